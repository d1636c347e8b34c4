//! Exact ground-state energies.
//!
//! [`dp_ground`] sweeps unit cells row-major while keeping a frontier of
//! `4 * cols + 4` spins: the side-A spins of the most recent cell in every
//! column (they couple downward) plus the side-B spins of the previous cell
//! (they couple to the right). Spins enter the frontier one at a time; each
//! entry eliminates the spin previously held in that slot. Because inter-cell
//! couplings join same-index spins, an elimination touches a single bit and
//! costs two table reads per entry. Intra-cell K4,4 terms are added once both
//! sides of a cell are in the frontier.
//!
//! [`brute_force_ground`] enumerates all configurations in Gray-code order
//! with one spin fixed; it exists to validate the DP.

use crate::error::{Error, Result};
use crate::instances::{CouplingInstance, SpinConfig, CELL_SPINS, SIDE};

pub const BRUTE_FORCE_MAX_SPINS: usize = 26;
pub const DEFAULT_MAX_FRONTIER_COLS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundResult {
    pub energy: i64,
    pub witness: Option<SpinConfig>,
}

pub fn brute_force_ground(instance: &CouplingInstance) -> Result<GroundResult> {
    let n = instance.num_spins();
    if n > BRUTE_FORCE_MAX_SPINS {
        return Err(Error::SizeLimit(format!(
            "brute force supports at most {BRUTE_FORCE_MAX_SPINS} spins, instance has {n}"
        )));
    }
    let adj = instance.adjacency();
    let mut spins = vec![1i8; n];
    let mut fields: Vec<i32> = (0..n).map(|s| adj.local_field(s, &spins)).collect();
    let mut energy = instance.energy_unchecked(&spins);
    let mut best = (energy, 0u64);

    // The last spin stays +1: global flip symmetry halves the enumeration.
    let free = n - 1;
    for g in 1u64..(1u64 << free) {
        let site = g.trailing_zeros() as usize;
        let s = spins[site] as i32;
        energy += 2 * (s * fields[site]) as i64;
        spins[site] = -spins[site];
        let (nb, jv) = adj.neighbors(site);
        for (&j, &v) in nb.iter().zip(jv) {
            fields[j as usize] -= 2 * v as i32 * s;
        }
        if energy < best.0 {
            best = (energy, g);
        }
    }

    let gray = best.1 ^ (best.1 >> 1);
    let witness: Vec<i8> = (0..n)
        .map(|s| if s < free && (gray >> s) & 1 == 1 { -1 } else { 1 })
        .collect();
    Ok(GroundResult {
        energy: best.0,
        witness: Some(SpinConfig::new(witness)?),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct DpOptions {
    /// Largest supported frontier width in unit cells; the table holds
    /// `2^(4 * cols + 4)` entries.
    pub max_frontier_cols: usize,
    /// Keep one back-pointer bit per table entry per eliminated spin.
    pub witness: bool,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self {
            max_frontier_cols: DEFAULT_MAX_FRONTIER_COLS,
            witness: false,
        }
    }
}

pub fn dp_ground(instance: &CouplingInstance) -> Result<GroundResult> {
    dp_ground_with(instance, DpOptions::default())
}

struct Replacement {
    bit: usize,
    site: usize,
    choices: Vec<u64>,
}

pub fn dp_ground_with(instance: &CouplingInstance, opts: DpOptions) -> Result<GroundResult> {
    let graph = instance.graph();
    let (rows, cols) = (graph.rows(), graph.cols());
    if cols > opts.max_frontier_cols {
        return Err(Error::ResourceLimit(format!(
            "frontier width {cols} exceeds limit {}: table would need 2^{} entries",
            opts.max_frontier_cols,
            4 * cols + 4
        )));
    }
    let bits = SIDE * cols + SIDE;
    let size = 1usize << bits;
    let b_base = SIDE * cols;

    let adj = instance.adjacency();
    let coupling = |a: usize, b: usize| -> i16 {
        let (nb, jv) = adj.neighbors(a);
        nb.iter()
            .zip(jv)
            .find(|(&j, _)| j as usize == b)
            .map_or(0, |(_, &v)| v as i16)
    };

    let mut table = vec![0i16; size];
    let mut occupant: Vec<Option<usize>> = vec![None; bits];
    let mut steps: Vec<Replacement> = Vec::new();

    for r in 0..rows {
        for c in 0..cols {
            let mut intra = [0i16; 256];
            for k in 0..SIDE {
                let site = graph.site(r, c, k);
                let bit = SIDE * c + k;
                let j = occupant[bit].map_or(0, |old| coupling(old, site));
                let choices = replace(&mut table, bit, j, opts.witness);
                steps.push(Replacement { bit, site, choices });
                occupant[bit] = Some(site);
            }
            for k in 0..SIDE {
                let site = graph.site(r, c, SIDE + k);
                let bit = b_base + k;
                let j = occupant[bit].map_or(0, |old| coupling(old, site));
                let choices = replace(&mut table, bit, j, opts.witness);
                steps.push(Replacement { bit, site, choices });
                occupant[bit] = Some(site);
            }
            for (idx, e) in intra.iter_mut().enumerate() {
                let mut sum = 0i16;
                for ka in 0..SIDE {
                    let sa = if (idx >> ka) & 1 == 0 { 1 } else { -1 };
                    for kb in 0..SIDE {
                        let sb = if (idx >> (SIDE + kb)) & 1 == 0 { 1 } else { -1 };
                        let j = coupling(graph.site(r, c, ka), graph.site(r, c, SIDE + kb));
                        sum -= j * sa * sb;
                    }
                }
                *e = sum;
            }
            let a_shift = SIDE * c;
            for (i, v) in table.iter_mut().enumerate() {
                let key = ((i >> a_shift) & 0xf) | (((i >> b_base) & 0xf) << SIDE);
                *v += intra[key];
            }
        }
    }

    let (mut state, &min) = table
        .iter()
        .enumerate()
        .min_by_key(|&(_, v)| *v)
        .expect("table is non-empty");
    let energy = min as i64;

    let witness = if opts.witness {
        let mut spins = vec![1i8; graph.num_spins()];
        for step in steps.iter().rev() {
            spins[step.site] = if (state >> step.bit) & 1 == 0 { 1 } else { -1 };
            let old = (step.choices[state / 64] >> (state % 64)) & 1;
            state = (state & !(1 << step.bit)) | ((old as usize) << step.bit);
        }
        debug_assert_eq!(spins.len(), CELL_SPINS * rows * cols);
        Some(SpinConfig::new(spins)?)
    } else {
        None
    };
    Ok(GroundResult { energy, witness })
}

/// Replaces the spin held at `bit` with a new one coupled to it by `j`,
/// minimizing over the old spin. Bit value 0 encodes spin +1. With `record`,
/// returns a bitset over post-replacement indices marking where the old
/// spin was -1 at the minimum.
fn replace(table: &mut [i16], bit: usize, j: i16, record: bool) -> Vec<u64> {
    let stride = 1usize << bit;
    if !record {
        for block in table.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (up, down) in lo.iter_mut().zip(hi.iter_mut()) {
                let (v0, v1) = (*up, *down);
                *up = (v0 - j).min(v1 + j);
                *down = (v0 + j).min(v1 - j);
            }
        }
        return Vec::new();
    }
    let mut choices = vec![0u64; table.len().div_ceil(64)];
    let mut mark = |i: usize| choices[i / 64] |= 1 << (i % 64);
    for (b, block) in table.chunks_exact_mut(2 * stride).enumerate() {
        let base = 2 * stride * b;
        let (lo, hi) = block.split_at_mut(stride);
        for (off, (up, down)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
            let (v0, v1) = (*up, *down);
            if v1 + j < v0 - j {
                mark(base + off);
            }
            if v1 - j < v0 + j {
                mark(base + off + stride);
            }
            *up = (v0 - j).min(v1 + j);
            *down = (v0 + j).min(v1 - j);
        }
    }
    choices
}
