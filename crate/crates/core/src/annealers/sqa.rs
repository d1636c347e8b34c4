//! Discrete imaginary-time path-integral annealing.
//!
//! The transverse-field model `A(t) H_D + B(t) H_P` at inverse temperature
//! `beta` maps onto `M` coupled classical replicas (Trotter slices) with
//! effective action
//!
//! ```text
//! S = -(beta / M) B(t) sum_m sum_<ij> J_ij s_i^m s_j^m - J_perp sum_m sum_i s_i^m s_i^{m+1},
//! J_perp = -1/2 ln tanh(beta A(t) / M),
//! ```
//!
//! with periodic boundaries in imaginary time. Each site's world line is one
//! `u64` word (bit `m` set means spin -1 in slice `m`). A site update draws
//! Swendsen-Wang bonds between equal time neighbours with probability
//! `1 - exp(-2 J_perp)` and flips every resulting cluster with heat-bath
//! probability `1 / (1 + exp(dS))` on its spatial action change `dS`. The spatial change of a cluster
//! is a popcount over the per-neighbour "unsatisfied bond" words.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{schedule_fraction, uniform, AnnealOutcome};
use crate::error::{Error, Result};
use crate::instances::{CouplingInstance, SparseCouplings};
use crate::rng::StreamRng;

pub const DEFAULT_SLICES: usize = 32;
pub const DEFAULT_JPERP_CAP: f64 = 25.0;
pub const MAX_SLICES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqaSchedule {
    pub t_a: u64,
    pub beta: f64,
    #[serde(default = "default_slices")]
    pub slices: usize,
    #[serde(default = "default_cap")]
    pub jperp_cap: f64,
}

fn default_slices() -> usize {
    DEFAULT_SLICES
}

fn default_cap() -> f64 {
    DEFAULT_JPERP_CAP
}

impl SqaSchedule {
    pub fn new(t_a: u64, beta: f64) -> Self {
        Self {
            t_a,
            beta,
            slices: DEFAULT_SLICES,
            jperp_cap: DEFAULT_JPERP_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_a == 0 {
            return Err(Error::invalid("t_a must be at least 1"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(2..=MAX_SLICES).contains(&self.slices) {
            return Err(Error::invalid(format!(
                "slice count must be in [2, {MAX_SLICES}], got {}",
                self.slices
            )));
        }
        if !(self.jperp_cap > 0.0) {
            return Err(Error::invalid("jperp_cap must be positive"));
        }
        Ok(())
    }

    /// Driver amplitude `A(t) = 1 - t/t_a` at sweep `k`.
    pub fn driver(&self, k: u64) -> f64 {
        1.0 - schedule_fraction(k, self.t_a)
    }

    /// Problem amplitude `B(t) = t/t_a` at sweep `k`.
    pub fn problem(&self, k: u64) -> f64 {
        schedule_fraction(k, self.t_a)
    }
}

/// `(spatial weight, J_perp)` for sweep `k`. The spatial weight multiplies
/// each `J_ij`; both act at effective inverse temperature 1. `J_perp` is
/// clamped to the schedule's cap where it diverges as `A -> 0`.
pub fn sqa_effective_couplings(schedule: &SqaSchedule, k: u64) -> (f64, f64) {
    let m = schedule.slices as f64;
    let spatial = schedule.beta / m * schedule.problem(k);
    (spatial, time_coupling(schedule.beta * schedule.driver(k) / m, schedule.jperp_cap))
}

/// `-1/2 ln tanh(x)`, clamped to `cap`.
pub fn time_coupling(x: f64, cap: f64) -> f64 {
    let j = -0.5 * x.tanh().ln();
    if j.is_nan() || j > cap {
        cap
    } else {
        j
    }
}

/// Neighbour lists with each coupling's sign spread over a slice mask.
#[derive(Debug, Clone)]
pub struct SqaLattice {
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    negative: Vec<u64>,
    mask: u64,
    slices: usize,
}

impl SqaLattice {
    pub fn new(adj: &SparseCouplings, slices: usize) -> Self {
        assert!((2..=MAX_SLICES).contains(&slices));
        let mask = if slices == 64 { u64::MAX } else { (1u64 << slices) - 1 };
        let n = adj.num_sites();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut negative = Vec::new();
        offsets.push(0);
        for s in 0..n {
            let (nb, jv) = adj.neighbors(s);
            neighbors.extend_from_slice(nb);
            negative.extend(jv.iter().map(|&v| if v < 0 { mask } else { 0 }));
            offsets.push(neighbors.len() as u32);
        }
        Self {
            offsets,
            neighbors,
            negative,
            mask,
            slices,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    /// Per-slice classical energies `-sum J s_i^m s_j^m`.
    pub fn slice_energies(&self, lines: &[u64]) -> Vec<i64> {
        let mut unsatisfied = vec![0i64; self.slices];
        let mut edges = 0i64;
        for i in 0..self.num_sites() {
            let (lo, hi) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
            for e in lo..hi {
                let j = self.neighbors[e] as usize;
                if j <= i {
                    continue;
                }
                edges += 1;
                let mut bad = (lines[i] ^ lines[j] ^ self.negative[e]) & self.mask;
                while bad != 0 {
                    unsatisfied[bad.trailing_zeros() as usize] += 1;
                    bad &= bad - 1;
                }
            }
        }
        unsatisfied.into_iter().map(|u| 2 * u - edges).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SqaState {
    lines: Vec<u64>,
    unsat: Vec<u64>,
}

impl SqaState {
    pub fn new(lines: Vec<u64>) -> Self {
        Self {
            lines,
            unsat: Vec::with_capacity(16),
        }
    }

    /// World lines, one word per site.
    pub fn lines(&self) -> &[u64] {
        &self.lines
    }

    /// One sweep of time-cluster updates at fixed couplings.
    pub fn sweep(&mut self, lat: &SqaLattice, spatial: f64, jperp: f64, rng: &mut StreamRng) {
        let m = lat.slices;
        let mask = lat.mask;
        // Probability that a bond between equal neighbours stays inactive.
        let keep_broken = (-2.0 * jperp).exp();
        let per_bit_threshold = (keep_broken * 18_446_744_073_709_551_616.0) as u64;
        let log_keep_active = (-keep_broken).ln_1p();

        for site in 0..self.lines.len() {
            let w = self.lines[site];
            let (lo, hi) = (lat.offsets[site] as usize, lat.offsets[site + 1] as usize);
            self.unsat.clear();
            for e in lo..hi {
                let j = lat.neighbors[e] as usize;
                self.unsat.push((w ^ self.lines[j] ^ lat.negative[e]) & mask);
            }
            let degree = (hi - lo) as i64;

            // Bit m set: bond (m, m+1) is broken.
            let next = ((w >> 1) | (w << (m - 1))) & mask;
            let equal = !(w ^ next) & mask;
            let random = if keep_broken > 0.125 {
                let mut bits = 0u64;
                for b in 0..m {
                    if rng.next_u64() < per_bit_threshold {
                        bits |= 1 << b;
                    }
                }
                bits
            } else {
                geometric_bits(m, log_keep_active, rng)
            };
            let broken = (!equal & mask) | (equal & random);

            let mut word = w;
            let mut flip = |cluster: u64, rng: &mut StreamRng| {
                let size = cluster.count_ones() as i64;
                let bad: i64 = self.unsat.iter().map(|&u| (u & cluster).count_ones() as i64).sum();
                let delta = spatial * (2 * degree * size - 4 * bad) as f64;
                if uniform(rng) * (1.0 + delta.exp()) < 1.0 {
                    word ^= cluster;
                }
            };

            if broken == 0 {
                flip(mask, rng);
            } else {
                let first = broken.trailing_zeros() as usize;
                let last = 63 - broken.leading_zeros() as usize;
                let mut rest = broken & (broken - 1);
                let mut start = first + 1;
                while rest != 0 {
                    let end = rest.trailing_zeros() as usize;
                    flip(low_mask(end + 1) & !low_mask(start), rng);
                    start = end + 1;
                    rest &= rest - 1;
                }
                flip((mask & !low_mask(last + 1)) | low_mask(first + 1), rng);
            }
            self.lines[site] = word;
        }
    }
}

#[inline]
fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Bits set independently with probability `q = 1 - exp(log_keep_active)`,
/// by geometric skipping.
#[inline]
fn geometric_bits(m: usize, log_keep_active: f64, rng: &mut StreamRng) -> u64 {
    if log_keep_active == 0.0 {
        return 0;
    }
    let mut bits = 0u64;
    let mut pos = 0usize;
    loop {
        let u = 1.0 - uniform(rng);
        let gap = (u.ln() / log_keep_active).floor();
        if gap >= (m - pos) as f64 {
            return bits;
        }
        pos += gap as usize;
        bits |= 1 << pos;
        pos += 1;
        if pos >= m {
            return bits;
        }
    }
}

/// One annealing run. Every site starts with a random spin replicated in
/// all slices.
pub fn sqa_run(instance: &CouplingInstance, schedule: &SqaSchedule, e0: i64, rng: &mut StreamRng) -> AnnealOutcome {
    let lat = SqaLattice::new(instance.adjacency(), schedule.slices);
    let n = instance.num_spins();
    let mut lines = Vec::with_capacity(n);
    while lines.len() < n {
        let mut word = rng.next_u64();
        for _ in 0..64.min(n - lines.len()) {
            lines.push(if word & 1 == 0 { 0 } else { lat.mask });
            word >>= 1;
        }
    }
    let mut state = SqaState::new(lines);
    let initial_energy = lat.slice_energies(state.lines())[0];
    for k in 1..=schedule.t_a {
        let (spatial, jperp) = sqa_effective_couplings(schedule, k);
        state.sweep(&lat, spatial, jperp, rng);
    }
    let energies = lat.slice_energies(state.lines());
    let hits = energies.iter().filter(|&&e| e == e0).count();
    AnnealOutcome {
        success_fraction: hits as f64 / schedule.slices as f64,
        final_energy: *energies.iter().min().expect("at least two slices"),
        initial_energy,
        sweeps_used: schedule.t_a,
    }
}
