//! Chimera graphs, random ±1 coupling instances and the instance file format.
//!
//! Site numbering: unit cells are numbered row-major, `cell = row * cols + col`,
//! and site `8 * cell + k`. Within a cell, sites `k = 0..4` form side A and
//! `k = 4..8` side B; every A site couples to every B site of its cell.
//! Side-A site `k` couples to side-A site `k` of the cell below, side-B site
//! `k` couples to side-B site `k` of the cell to the right.
//!
//! The graph is bipartite with a checkerboard coloring: side A of cell
//! `(r, c)` has color `(r + c) % 2`, side B the other color.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng;

pub const MAX_L: usize = 16;
pub const CELL_SPINS: usize = 8;
pub const SIDE: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChimeraGraph {
    rows: usize,
    cols: usize,
    edges: Vec<(u32, u32)>,
}

impl ChimeraGraph {
    /// Square `L x L` chimera graph with `8 L^2` spins.
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 || l > MAX_L {
            return Err(Error::invalid(format!(
                "chimera side L must be in [1, {MAX_L}], got {l}"
            )));
        }
        Ok(Self::build(l, l))
    }

    /// Rectangular `rows x cols` chimera graph; used for truncated lattices.
    pub fn rectangular(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > MAX_L || cols > MAX_L {
            return Err(Error::invalid(format!(
                "chimera dimensions must be in [1, {MAX_L}], got {rows}x{cols}"
            )));
        }
        Ok(Self::build(rows, cols))
    }

    fn build(rows: usize, cols: usize) -> Self {
        let site = |r: usize, c: usize, k: usize| (CELL_SPINS * (r * cols + c) + k) as u32;
        let mut edges = Vec::with_capacity(16 * rows * cols + 4 * (rows - 1) * cols + 4 * rows * (cols - 1));
        for r in 0..rows {
            for c in 0..cols {
                for a in 0..SIDE {
                    for b in 0..SIDE {
                        edges.push((site(r, c, a), site(r, c, SIDE + b)));
                    }
                }
                if r + 1 < rows {
                    for k in 0..SIDE {
                        edges.push((site(r, c, k), site(r + 1, c, k)));
                    }
                }
                if c + 1 < cols {
                    for k in 0..SIDE {
                        edges.push((site(r, c, SIDE + k), site(r, c + 1, SIDE + k)));
                    }
                }
            }
        }
        edges.sort_unstable();
        Self { rows, cols, edges }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Side length for square graphs.
    pub fn side(&self) -> Option<usize> {
        (self.rows == self.cols).then_some(self.rows)
    }

    pub fn num_spins(&self) -> usize {
        CELL_SPINS * self.rows * self.cols
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn site(&self, row: usize, col: usize, k: usize) -> usize {
        CELL_SPINS * (row * self.cols + col) + k
    }

    /// `(row, col, k)` of a site.
    pub fn locate(&self, site: usize) -> (usize, usize, usize) {
        let cell = site / CELL_SPINS;
        (cell / self.cols, cell % self.cols, site % CELL_SPINS)
    }

    /// Checkerboard 2-coloring (0 or 1 per site).
    pub fn bipartition(&self) -> Vec<u8> {
        (0..self.num_spins())
            .map(|s| {
                let (r, c, k) = self.locate(s);
                let parity = ((r + c) % 2) as u8;
                if k < SIDE {
                    parity
                } else {
                    1 - parity
                }
            })
            .collect()
    }

    fn label(&self) -> String {
        match self.side() {
            Some(l) => l.to_string(),
            None => format!("{}x{}", self.rows, self.cols),
        }
    }
}

/// Per-site neighbor lists with coupling values (CSR layout).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseCouplings {
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    values: Vec<i8>,
}

impl SparseCouplings {
    /// Builds adjacency for an arbitrary ±1 model; used for chimera instances
    /// and small toy systems alike.
    pub fn from_edges(n: usize, edges: &[(u32, u32)], couplings: &[i8]) -> Result<Self> {
        if edges.len() != couplings.len() {
            return Err(Error::invalid("edge and coupling counts differ"));
        }
        let mut degree = vec![0u32; n];
        for &(i, j) in edges {
            if i as usize >= n || j as usize >= n || i == j {
                return Err(Error::invalid(format!("bad edge ({i}, {j}) for {n} sites")));
            }
            degree[i as usize] += 1;
            degree[j as usize] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for s in 0..n {
            offsets[s + 1] = offsets[s] + degree[s];
        }
        let mut fill = offsets.clone();
        let total = offsets[n] as usize;
        let mut neighbors = vec![0u32; total];
        let mut values = vec![0i8; total];
        for (&(i, j), &v) in edges.iter().zip(couplings) {
            for (a, b) in [(i, j), (j, i)] {
                let slot = fill[a as usize] as usize;
                neighbors[slot] = b;
                values[slot] = v;
                fill[a as usize] += 1;
            }
        }
        Ok(Self {
            offsets,
            neighbors,
            values,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, site: usize) -> (&[u32], &[i8]) {
        let lo = self.offsets[site] as usize;
        let hi = self.offsets[site + 1] as usize;
        (&self.neighbors[lo..hi], &self.values[lo..hi])
    }

    pub fn degree(&self, site: usize) -> usize {
        (self.offsets[site + 1] - self.offsets[site]) as usize
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_sites()).map(|s| self.degree(s)).max().unwrap_or(0)
    }

    /// `sum_j J_ij s_j`.
    #[inline]
    pub fn local_field(&self, site: usize, spins: &[i8]) -> i32 {
        let (nb, jv) = self.neighbors(site);
        nb.iter()
            .zip(jv)
            .map(|(&j, &v)| v as i32 * spins[j as usize] as i32)
            .sum()
    }

    /// `-sum_{i<j} J_ij s_i s_j`, each edge counted once.
    pub fn energy(&self, spins: &[i8]) -> i64 {
        let twice: i64 = (0..self.num_sites())
            .map(|s| spins[s] as i64 * self.local_field(s, spins) as i64)
            .sum();
        -twice / 2
    }
}

/// A chimera graph with ±1 couplings in edge-list order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingInstance {
    graph: ChimeraGraph,
    couplings: Vec<i8>,
    seed: u64,
    id: u64,
    adjacency: SparseCouplings,
}

impl CouplingInstance {
    pub fn from_couplings(graph: ChimeraGraph, couplings: Vec<i8>, seed: u64, id: u64) -> Result<Self> {
        if couplings.len() != graph.num_edges() {
            return Err(Error::invalid(format!(
                "{} couplings for {} edges",
                couplings.len(),
                graph.num_edges()
            )));
        }
        if let Some(bad) = couplings.iter().find(|&&j| j != 1 && j != -1) {
            return Err(Error::invalid(format!("coupling {bad} is not +-1")));
        }
        let adjacency = SparseCouplings::from_edges(graph.num_spins(), graph.edges(), &couplings)?;
        Ok(Self {
            graph,
            couplings,
            seed,
            id,
            adjacency,
        })
    }

    /// All couplings equal to `value` (+1 ferromagnet, -1 its gauge image).
    pub fn uniform(graph: ChimeraGraph, value: i8) -> Result<Self> {
        let m = graph.num_edges();
        Self::from_couplings(graph, vec![value; m], 0, 0)
    }

    pub fn graph(&self) -> &ChimeraGraph {
        &self.graph
    }

    pub fn couplings(&self) -> &[i8] {
        &self.couplings
    }

    pub fn adjacency(&self) -> &SparseCouplings {
        &self.adjacency
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }

    pub fn num_spins(&self) -> usize {
        self.graph.num_spins()
    }

    pub fn energy(&self, config: &SpinConfig) -> Result<i64> {
        if config.len() != self.num_spins() {
            return Err(Error::invalid(format!(
                "config has {} spins, instance has {}",
                config.len(),
                self.num_spins()
            )));
        }
        Ok(self.energy_unchecked(config.as_slice()))
    }

    /// Energy of a raw spin slice of the right length.
    #[inline]
    pub fn energy_unchecked(&self, spins: &[i8]) -> i64 {
        -self
            .graph
            .edges
            .iter()
            .zip(&self.couplings)
            .map(|(&(i, j), &v)| v as i64 * spins[i as usize] as i64 * spins[j as usize] as i64)
            .sum::<i64>()
    }

    /// Negates every coupling with exactly one endpoint in `flip`.
    /// Paired with [`SpinConfig::gauge`], energies are preserved.
    pub fn gauge(&self, flip: &[bool]) -> Result<Self> {
        if flip.len() != self.num_spins() {
            return Err(Error::invalid("gauge mask length differs from spin count"));
        }
        let couplings = self
            .graph
            .edges
            .iter()
            .zip(&self.couplings)
            .map(|(&(i, j), &v)| if flip[i as usize] != flip[j as usize] { -v } else { v })
            .collect();
        Self::from_couplings(self.graph.clone(), couplings, self.seed, self.id)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.to_text().as_bytes())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(12 * self.couplings.len() + 32);
        let _ = writeln!(s, "chimera {} {} {}", self.graph.label(), self.num_spins(), self.seed);
        for (&(i, j), &v) in self.graph.edges.iter().zip(&self.couplings) {
            let _ = writeln!(s, "{i} {j} {v}");
        }
        s
    }

    /// Parses the text format. `source` names the input in error messages.
    pub fn read<R: BufRead>(input: R, id: u64, source: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: source.to_string(),
            line,
            msg,
        };
        let mut lines = input.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| perr(1, "empty file".into()))?;
        let header = header.map_err(|e| perr(1, e.to_string()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "chimera" {
            return Err(perr(1, format!("expected `chimera L N seed`, got `{header}`")));
        }
        let (rows, cols) = match fields[1].split_once('x') {
            Some((r, c)) => (
                r.parse::<usize>().map_err(|e| perr(1, format!("rows: {e}")))?,
                c.parse::<usize>().map_err(|e| perr(1, format!("cols: {e}")))?,
            ),
            None => {
                let l = fields[1].parse::<usize>().map_err(|e| perr(1, format!("L: {e}")))?;
                (l, l)
            }
        };
        let graph = ChimeraGraph::rectangular(rows, cols).map_err(|e| perr(1, e.to_string()))?;
        let n: usize = fields[2].parse().map_err(|e| perr(1, format!("N: {e}")))?;
        if n != graph.num_spins() {
            return Err(perr(1, format!("N = {n} but graph has {} spins", graph.num_spins())));
        }
        let seed: u64 = fields[3].parse().map_err(|e| perr(1, format!("seed: {e}")))?;

        let index: HashMap<(u32, u32), usize> =
            graph.edges().iter().enumerate().map(|(k, &e)| (e, k)).collect();
        let mut couplings = vec![0i8; graph.num_edges()];
        let mut seen = 0usize;
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            let line = line.map_err(|e| perr(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(perr(lineno, format!("expected `i j J`, got `{line}`")));
            }
            let i: u32 = parts[0].parse().map_err(|e| perr(lineno, format!("i: {e}")))?;
            let j: u32 = parts[1].parse().map_err(|e| perr(lineno, format!("j: {e}")))?;
            let v: i64 = parts[2].parse().map_err(|e| perr(lineno, format!("J: {e}")))?;
            if i as usize >= n || j as usize >= n {
                return Err(perr(lineno, format!("index out of range [0, {n})")));
            }
            if v != 1 && v != -1 {
                return Err(perr(lineno, format!("coupling {v} is not +-1")));
            }
            let key = (i.min(j), i.max(j));
            let k = *index
                .get(&key)
                .ok_or_else(|| perr(lineno, format!("({i}, {j}) is not a chimera edge")))?;
            if couplings[k] != 0 {
                return Err(perr(lineno, format!("duplicate edge ({i}, {j})")));
            }
            couplings[k] = v as i8;
            seen += 1;
        }
        if seen != graph.num_edges() {
            return Err(perr(0, format!("{seen} edges listed, graph has {}", graph.num_edges())));
        }
        Self::from_couplings(graph, couplings, seed, id)
    }
}

/// Generates one instance; each coupling is the top bit of an independent
/// Xoshiro256++ output seeded with `seed`.
pub fn generate_instance(graph: &ChimeraGraph, seed: u64, id: u64) -> CouplingInstance {
    let mut rng = rng::from_seed(seed);
    let couplings = (0..graph.num_edges())
        .map(|_| if rng.next_u64() >> 63 == 0 { 1 } else { -1 })
        .collect();
    CouplingInstance::from_couplings(graph.clone(), couplings, seed, id)
        .expect("generated couplings are valid")
}

/// Instance `id` of a batch; its seed is derived from `(master, id)`.
pub fn batch_instance(graph: &ChimeraGraph, master: u64, id: u64) -> CouplingInstance {
    generate_instance(graph, rng::stream_seed(master, rng::Stage::Instances, id, 0), id)
}

pub fn generate_batch(graph: &ChimeraGraph, master: u64, count: usize) -> Vec<CouplingInstance> {
    (0..count as u64).map(|id| batch_instance(graph, master, id)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!("spin value {bad} is not +-1")));
        }
        Ok(Self(spins))
    }

    pub fn all_up(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn random<R: RngCore>(n: usize, rng: &mut R) -> Self {
        let mut spins = Vec::with_capacity(n);
        while spins.len() < n {
            let mut word = rng.next_u64();
            for _ in 0..64.min(n - spins.len()) {
                spins.push(if word & 1 == 0 { 1 } else { -1 });
                word >>= 1;
            }
        }
        Self(spins)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn flip(&mut self, site: usize) {
        self.0[site] = -self.0[site];
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|&s| -s).collect())
    }

    pub fn gauge(&self, flip: &[bool]) -> Self {
        Self(
            self.0
                .iter()
                .zip(flip)
                .map(|(&s, &f)| if f { -s } else { s })
                .collect(),
        )
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn is_bipartite(graph: &ChimeraGraph) -> bool {
        let n = graph.num_spins();
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in graph.edges() {
            adj[i as usize].push(j as usize);
            adj[j as usize].push(i as usize);
        }
        let mut color = vec![u8::MAX; n];
        for start in 0..n {
            if color[start] != u8::MAX {
                continue;
            }
            color[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if color[w] == u8::MAX {
                        color[w] = 1 - color[v];
                        queue.push_back(w);
                    } else if color[w] == color[v] {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn chimera_sizes() {
        let g = ChimeraGraph::new(2).unwrap();
        assert_eq!((g.num_spins(), g.num_edges()), (32, 80));
        let g = ChimeraGraph::new(1).unwrap();
        assert_eq!((g.num_spins(), g.num_edges()), (8, 16));
        let g = ChimeraGraph::new(4).unwrap();
        assert_eq!(g.num_spins(), 128);
    }

    #[test]
    fn chimera_rejects_bad_side() {
        assert!(matches!(ChimeraGraph::new(0), Err(Error::InvalidParameter(_))));
        assert!(matches!(ChimeraGraph::new(17), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn chimera_invariants() {
        for l in 1..=8 {
            let g = ChimeraGraph::new(l).unwrap();
            assert_eq!(g.num_spins(), 8 * l * l);
            assert_eq!(g.num_edges(), 16 * l * l + 8 * l * (l - 1));
            assert!(is_bipartite(&g), "L = {l}");
            let colors = g.bipartition();
            for &(i, j) in g.edges() {
                assert!(i < j && (j as usize) < g.num_spins());
                assert_ne!(colors[i as usize], colors[j as usize]);
            }
            let mut dedup = g.edges().to_vec();
            dedup.dedup();
            assert_eq!(dedup.len(), g.num_edges());
            assert!(g.edges().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn ferromagnet_energy() {
        let inst = CouplingInstance::uniform(ChimeraGraph::new(2).unwrap(), 1).unwrap();
        let up = SpinConfig::all_up(32);
        assert_eq!(inst.energy(&up).unwrap(), -80);
        for site in [0usize, 5, 13, 31] {
            let mut c = up.clone();
            c.flip(site);
            let d = inst.adjacency().degree(site) as i64;
            assert_eq!(inst.energy(&c).unwrap(), -80 + 2 * d);
        }
    }

    #[test]
    fn energy_matches_direct_sum_on_single_cell() {
        let g = ChimeraGraph::new(1).unwrap();
        let mut rng = rng::from_seed(99);
        for seed in 0..20 {
            let inst = generate_instance(&g, seed, 0);
            let cfg = SpinConfig::random(8, &mut rng);
            let s = cfg.as_slice();
            // K4,4: sites 0..4 against 4..8, in lexicographic edge order.
            let mut direct = 0i64;
            let mut e = 0;
            for a in 0..4 {
                for b in 4..8 {
                    direct -= inst.couplings()[e] as i64 * s[a] as i64 * s[b] as i64;
                    e += 1;
                }
            }
            assert_eq!(inst.energy(&cfg).unwrap(), direct);
            assert_eq!(inst.adjacency().energy(s), direct);
        }
    }

    #[test]
    fn energy_length_mismatch() {
        let inst = CouplingInstance::uniform(ChimeraGraph::new(1).unwrap(), 1).unwrap();
        assert!(inst.energy(&SpinConfig::all_up(9)).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let g = ChimeraGraph::new(2).unwrap();
        assert_eq!(generate_instance(&g, 42, 0), generate_instance(&g, 42, 0));
        let differing = (0..100u64)
            .filter(|&k| generate_instance(&g, 2 * k, 0).couplings() != generate_instance(&g, 2 * k + 1, 0).couplings())
            .count();
        assert_eq!(differing, 100);
    }

    #[test]
    fn coupling_mean_concentrates() {
        let g = ChimeraGraph::new(2).unwrap();
        let total: i64 = generate_batch(&g, 5, 10_000)
            .iter()
            .flat_map(|i| i.couplings().iter().map(|&v| v as i64))
            .sum();
        let mean = total as f64 / (10_000.0 * 80.0);
        assert!(mean.abs() < 4.0 / (10_000.0f64 * 80.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn file_round_trip() {
        let g = ChimeraGraph::new(2).unwrap();
        let inst = generate_instance(&g, 1234, 7);
        let text = inst.to_text();
        assert!(text.starts_with("chimera 2 32 1234\n"));
        let back = CouplingInstance::read(text.as_bytes(), 7, "mem").unwrap();
        assert_eq!(back, inst);

        let rect = generate_instance(&ChimeraGraph::rectangular(1, 3).unwrap(), 5, 0);
        let back = CouplingInstance::read(rect.to_text().as_bytes(), 0, "mem").unwrap();
        assert_eq!(back, rect);
    }

    #[test]
    fn file_errors() {
        let inst = generate_instance(&ChimeraGraph::new(1).unwrap(), 3, 0);
        let text = inst.to_text();

        let mut lines: Vec<&str> = text.lines().collect();
        lines[1] = "0 4 2";
        match CouplingInstance::read(lines.join("\n").as_bytes(), 0, "f") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("not +-1"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let mut lines: Vec<&str> = text.lines().collect();
        let dup = lines[1];
        lines[2] = dup;
        match CouplingInstance::read(lines.join("\n").as_bytes(), 0, "f") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("duplicate"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let out_of_range = text.replacen("0 4 ", "0 9 ", 1);
        assert!(matches!(
            CouplingInstance::read(out_of_range.as_bytes(), 0, "f"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(CouplingInstance::read("chimera 1 9 0\n".as_bytes(), 0, "f").is_err());
    }

    proptest! {
        #[test]
        fn gauge_and_global_flip_preserve_energy(seed in any::<u64>(), cfg_seed in any::<u64>(), l in 1usize..4) {
            let g = ChimeraGraph::new(l).unwrap();
            let inst = generate_instance(&g, seed, 0);
            let cfg = SpinConfig::random(g.num_spins(), &mut rng::from_seed(cfg_seed));
            let e = inst.energy(&cfg).unwrap();
            prop_assert_eq!(inst.energy(&cfg.flipped()).unwrap(), e);

            let class: Vec<bool> = g.bipartition().iter().map(|&c| c == 1).collect();
            let gauged = inst.gauge(&class).unwrap();
            // Every edge crosses the bipartition, so all couplings flip sign.
            prop_assert!(gauged.couplings().iter().zip(inst.couplings()).all(|(a, b)| *a == -*b));
            prop_assert_eq!(gauged.energy(&cfg.gauge(&class)).unwrap(), e);

            let arbitrary: Vec<bool> = (0..g.num_spins()).map(|s| (seed >> (s % 64)) & 1 == 1).collect();
            prop_assert_eq!(inst.gauge(&arbitrary).unwrap().energy(&cfg.gauge(&arbitrary)).unwrap(), e);
        }
    }
}
