//! Mean-field annealing with planar rotors.
//!
//! Each spin is an angle `theta_i` in the XZ plane with energy
//! `H(t) = -A(t) sum_i sin(theta_i) - B(t) sum_<ij> J_ij cos(theta_i) cos(theta_j)`.
//! Proposals draw a fresh uniform angle; with a lookup table of size `T` the
//! angle is one of `2 pi k / T`. Readout projects `s_i = sign(cos theta_i)`
//! with `cos theta_i = 0` mapped to +1.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{schedule_fraction, uniform, AnnealOutcome};
use crate::error::{Error, Result};
use crate::instances::{CouplingInstance, SparseCouplings};
use crate::rng::StreamRng;

pub const DEFAULT_TABLE_SIZE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfaSchedule {
    pub t_a: u64,
    pub beta: f64,
    /// Trig lookup resolution; 0 selects exact trigonometry.
    #[serde(default = "default_table")]
    pub table_size: usize,
}

fn default_table() -> usize {
    DEFAULT_TABLE_SIZE
}

impl MfaSchedule {
    pub fn new(t_a: u64, beta: f64) -> Self {
        Self {
            t_a,
            beta,
            table_size: DEFAULT_TABLE_SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_a == 0 {
            return Err(Error::invalid("t_a must be at least 1"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !self.table_size.is_multiple_of(4) {
            return Err(Error::invalid(format!(
                "table size must be a multiple of 4 so that pi/2 is tabulated, got {}",
                self.table_size
            )));
        }
        Ok(())
    }
}

/// Source of proposal angles as `(sin, cos)` pairs.
#[derive(Debug, Clone)]
pub enum AngleSource {
    Exact,
    Table(Vec<(f64, f64)>),
}

impl AngleSource {
    pub fn new(table_size: usize) -> Self {
        if table_size == 0 {
            return AngleSource::Exact;
        }
        let quarter = table_size / 4;
        let table = (0..table_size)
            .map(|k| match (k % quarter == 0).then_some(k / quarter) {
                Some(0) => (0.0, 1.0),
                Some(1) => (1.0, 0.0),
                Some(2) => (0.0, -1.0),
                Some(3) => (-1.0, 0.0),
                _ => (TAU * k as f64 / table_size as f64).sin_cos(),
            })
            .collect();
        AngleSource::Table(table)
    }

    #[inline]
    fn draw(&self, rng: &mut StreamRng) -> (f64, f64) {
        let u = uniform(rng);
        match self {
            AngleSource::Exact => (TAU * u).sin_cos(),
            AngleSource::Table(t) => t[(u * t.len() as f64) as usize],
        }
    }
}

#[derive(Debug, Clone)]
pub struct MfaState {
    sin: Vec<f64>,
    cos: Vec<f64>,
    fields: Vec<f64>,
}

impl MfaState {
    /// All rotors along +x (`theta = pi/2`), the `t = 0` ground state.
    pub fn x_aligned(n: usize) -> Self {
        Self {
            sin: vec![1.0; n],
            cos: vec![0.0; n],
            fields: vec![0.0; n],
        }
    }

    pub fn from_angles(adj: &SparseCouplings, angles: &[(f64, f64)]) -> Self {
        let sin: Vec<f64> = angles.iter().map(|a| a.0).collect();
        let cos: Vec<f64> = angles.iter().map(|a| a.1).collect();
        let fields = (0..cos.len())
            .map(|i| {
                let (nb, jv) = adj.neighbors(i);
                nb.iter().zip(jv).map(|(&j, &v)| v as f64 * cos[j as usize]).sum()
            })
            .collect();
        Self { sin, cos, fields }
    }

    pub fn sin(&self) -> &[f64] {
        &self.sin
    }

    pub fn cos(&self) -> &[f64] {
        &self.cos
    }

    /// One Metropolis sweep at fixed `(A, B, beta)`.
    pub fn sweep(&mut self, adj: &SparseCouplings, source: &AngleSource, driver: f64, problem: f64, beta: f64, rng: &mut StreamRng) {
        for site in 0..self.sin.len() {
            let (s_new, c_new) = source.draw(rng);
            let dc = c_new - self.cos[site];
            let delta = -driver * (s_new - self.sin[site]) - problem * self.fields[site] * dc;
            if delta > 0.0 && uniform(rng) >= (-beta * delta).exp() {
                continue;
            }
            self.sin[site] = s_new;
            self.cos[site] = c_new;
            let (nb, jv) = adj.neighbors(site);
            for (&j, &v) in nb.iter().zip(jv) {
                self.fields[j as usize] += v as f64 * dc;
            }
        }
    }

    pub fn project(&self) -> Vec<i8> {
        self.cos.iter().map(|&c| if c >= 0.0 { 1 } else { -1 }).collect()
    }
}

pub fn mfa_run(instance: &CouplingInstance, schedule: &MfaSchedule, e0: i64, rng: &mut StreamRng) -> AnnealOutcome {
    let adj = instance.adjacency();
    let source = AngleSource::new(schedule.table_size);
    let mut state = MfaState::x_aligned(instance.num_spins());
    let initial_energy = instance.energy_unchecked(&state.project());
    for k in 1..=schedule.t_a {
        let t = schedule_fraction(k, schedule.t_a);
        state.sweep(adj, &source, 1.0 - t, t, schedule.beta, rng);
    }
    let final_energy = instance.energy_unchecked(&state.project());
    AnnealOutcome {
        success_fraction: if final_energy == e0 { 1.0 } else { 0.0 },
        final_energy,
        initial_energy,
        sweeps_used: schedule.t_a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annealers::testing::{assert_gibbs, normalize};
    use crate::instances::{generate_instance, ChimeraGraph};
    use crate::rng;

    #[test]
    fn initial_state_minimizes_driver() {
        // At t = 0, H = -sum sin(theta) is minimal at theta = pi/2.
        let st = MfaState::x_aligned(8);
        assert!(st.sin().iter().all(|&s| s == 1.0));
        assert!(st.cos().iter().all(|&c| c == 0.0));
        assert_eq!(st.project(), vec![1; 8]);
        let AngleSource::Table(t) = AngleSource::new(1024) else { panic!() };
        assert_eq!(t[256], (1.0, 0.0));
        assert_eq!(t[768], (-1.0, 0.0));
        assert!(t.iter().all(|&(s, _)| s <= 1.0));
    }

    #[test]
    fn table_size_must_tabulate_right_angles() {
        assert!(MfaSchedule { table_size: 1022, ..MfaSchedule::new(10, 4.0) }.validate().is_err());
        assert!(MfaSchedule { table_size: 0, ..MfaSchedule::new(10, 4.0) }.validate().is_ok());
    }

    #[test]
    fn ferromagnet_is_solved() {
        let inst = CouplingInstance::uniform(ChimeraGraph::new(2).unwrap(), 1).unwrap();
        let sched = MfaSchedule::new(1000, 4.0);
        let solved = (0..100)
            .filter(|&r| mfa_run(&inst, &sched, -80, &mut rng::from_seed(r)).success_fraction == 1.0)
            .count();
        assert!(solved >= 90, "{solved}/100");
    }

    #[test]
    fn table_and_exact_trig_agree_on_readout() {
        let inst = CouplingInstance::uniform(ChimeraGraph::new(2).unwrap(), 1).unwrap();
        let table = MfaSchedule::new(5000, 4.0);
        let exact = MfaSchedule { table_size: 0, ..table };
        let runs = 200u64;
        let agree = (0..runs)
            .filter(|&r| {
                let a = mfa_run(&inst, &table, -80, &mut rng::from_seed(r));
                let b = mfa_run(&inst, &exact, -80, &mut rng::from_seed(r));
                a.success_fraction == b.success_fraction
            })
            .count();
        assert!(agree as u64 * 100 >= 99 * runs, "{agree}/{runs}");
    }

    #[test]
    fn seed_determinism() {
        let inst = generate_instance(&ChimeraGraph::new(2).unwrap(), 5, 0);
        let sched = MfaSchedule::new(100, 4.0);
        assert_eq!(
            mfa_run(&inst, &sched, -60, &mut rng::from_seed(3)),
            mfa_run(&inst, &sched, -60, &mut rng::from_seed(3))
        );
    }

    #[test]
    fn two_rotor_kernel_is_boltzmann() {
        // Four tabulated angles per rotor keep the state space at 16.
        let adj = SparseCouplings::from_edges(2, &[(0, 1)], &[1]).unwrap();
        let size = 4;
        let source = AngleSource::new(size);
        let AngleSource::Table(table) = &source else { panic!() };
        let (driver, problem, beta) = (0.5, 0.8, 2.0);
        let energy = |a: usize, b: usize| {
            -driver * (table[a].0 + table[b].0) - problem * table[a].1 * table[b].1
        };
        let exact = normalize(
            (0..size * size)
                .map(|s| (-beta * energy(s % size, s / size)).exp())
                .collect(),
        );
        let index = |sc: (f64, f64)| table.iter().position(|&t| t == sc).unwrap();
        let mut st = MfaState::x_aligned(2);
        let mut r = rng::from_seed(99);
        let trace: Vec<usize> = (0..1_000_000)
            .map(|_| {
                st.sweep(&adj, &source, driver, problem, beta, &mut r);
                index((st.sin()[0], st.cos()[0])) + size * index((st.sin()[1], st.cos()[1]))
            })
            .collect();
        assert_gibbs(&trace, &exact, "mfa");
    }
}
