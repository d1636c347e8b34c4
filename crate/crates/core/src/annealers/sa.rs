use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{schedule_fraction, AnnealOutcome};
use crate::error::{Error, Result};
use crate::instances::{CouplingInstance, SparseCouplings, SpinConfig};
use crate::rng::StreamRng;

/// Linear inverse-temperature ramp `beta(t) = beta_start + (beta_end - beta_start) t / t_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaSchedule {
    pub t_a: u64,
    #[serde(default = "default_beta_start")]
    pub beta_start: f64,
    #[serde(default = "default_beta_end")]
    pub beta_end: f64,
}

fn default_beta_start() -> f64 {
    0.1
}

fn default_beta_end() -> f64 {
    3.0
}

impl SaSchedule {
    pub fn new(t_a: u64) -> Self {
        Self {
            t_a,
            beta_start: default_beta_start(),
            beta_end: default_beta_end(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_a == 0 {
            return Err(Error::invalid("t_a must be at least 1"));
        }
        if !(self.beta_start > 0.0 && self.beta_end > self.beta_start) {
            return Err(Error::invalid(format!(
                "need beta_end > beta_start > 0, got {} and {}",
                self.beta_start, self.beta_end
            )));
        }
        Ok(())
    }

    /// Inverse temperature of sweep `k` (1-based). Exact at both endpoints.
    pub fn beta(&self, k: u64) -> f64 {
        let f = schedule_fraction(k, self.t_a);
        self.beta_start * (1.0 - f) + self.beta_end * f
    }
}

/// Spins plus incrementally maintained local fields `h_i = sum_j J_ij s_j`.
#[derive(Debug, Clone)]
pub struct SaState {
    spins: Vec<i8>,
    fields: Vec<i32>,
    energy: i64,
    thresholds: Vec<u64>,
}

impl SaState {
    pub fn new(adj: &SparseCouplings, spins: Vec<i8>) -> Self {
        let fields: Vec<i32> = (0..spins.len()).map(|s| adj.local_field(s, &spins)).collect();
        let energy = adj.energy(&spins);
        Self {
            spins,
            fields,
            energy,
            thresholds: vec![0; adj.max_degree() + 1],
        }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn energy(&self) -> i64 {
        self.energy
    }

    /// One Metropolis sweep at fixed `beta`, sites in index order.
    pub fn sweep(&mut self, adj: &SparseCouplings, beta: f64, rng: &mut StreamRng) {
        // Energy changes are 2*m for m = 1..=degree; acceptance exp(-2 beta m)
        // as a fraction of 2^64.
        for (m, t) in self.thresholds.iter_mut().enumerate().skip(1) {
            *t = ((-2.0 * beta * m as f64).exp() * 18_446_744_073_709_551_616.0) as u64;
        }
        for site in 0..self.spins.len() {
            let s = self.spins[site] as i32;
            let half_delta = s * self.fields[site];
            if half_delta > 0 && rng.next_u64() >= self.thresholds[half_delta as usize] {
                continue;
            }
            self.spins[site] = -self.spins[site];
            self.energy += 2 * half_delta as i64;
            let (nb, jv) = adj.neighbors(site);
            for (&j, &v) in nb.iter().zip(jv) {
                self.fields[j as usize] -= 2 * v as i32 * s;
            }
        }
    }
}

pub fn sa_run(instance: &CouplingInstance, schedule: &SaSchedule, e0: i64, rng: &mut StreamRng) -> AnnealOutcome {
    let adj = instance.adjacency();
    let start = SpinConfig::random(instance.num_spins(), rng).into_inner();
    let mut state = SaState::new(adj, start);
    let initial_energy = state.energy();
    for k in 1..=schedule.t_a {
        state.sweep(adj, schedule.beta(k), rng);
    }
    let final_energy = state.energy();
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
    fn schedule_endpoints() {
        let s = SaSchedule::new(1000);
        assert_eq!(s.beta(1000), 3.0);
        assert!((s.beta(0) - 0.1).abs() < 1e-15);
        assert!((s.beta(500) - 1.55).abs() < 1e-12);
        assert!(SaSchedule::new(0).validate().is_err());
        assert!(SaSchedule { t_a: 5, beta_start: 1.0, beta_end: 0.5 }.validate().is_err());
    }

    #[test]
    fn energy_tracking_is_exact() {
        let inst = generate_instance(&ChimeraGraph::new(3).unwrap(), 17, 0);
        let mut r = rng::from_seed(4);
        let mut st = SaState::new(inst.adjacency(), SpinConfig::random(72, &mut r).into_inner());
        for k in 0..50 {
            st.sweep(inst.adjacency(), 0.05 * k as f64, &mut r);
            assert_eq!(st.energy(), inst.energy_unchecked(st.spins()));
        }
    }

    #[test]
    fn ferromagnet_is_solved() {
        let inst = CouplingInstance::uniform(ChimeraGraph::new(2).unwrap(), 1).unwrap();
        let sched = SaSchedule::new(1000);
        let solved = (0..100)
            .filter(|&r| sa_run(&inst, &sched, -80, &mut rng::from_seed(r)).success_fraction == 1.0)
            .count();
        assert!(solved >= 99, "{solved}/100");
    }

    #[test]
    fn annealing_lowers_energy() {
        let g = ChimeraGraph::new(3).unwrap();
        let sched = SaSchedule::new(200);
        let mut lowered = 0;
        for r in 0..100u64 {
            let inst = generate_instance(&g, r, 0);
            let out = sa_run(&inst, &sched, i64::MIN, &mut rng::from_seed(1000 + r));
            assert_eq!(out.success_fraction, 0.0);
            if out.final_energy <= out.initial_energy {
                lowered += 1;
            }
        }
        assert!(lowered >= 95, "{lowered}/100");
    }

    #[test]
    fn seed_determinism() {
        let inst = generate_instance(&ChimeraGraph::new(2).unwrap(), 3, 0);
        let sched = SaSchedule::new(50);
        let a = sa_run(&inst, &sched, -60, &mut rng::from_seed(8));
        let b = sa_run(&inst, &sched, -60, &mut rng::from_seed(8));
        assert_eq!(a, b);
    }

    #[test]
    fn two_spin_kernel_is_boltzmann() {
        let adj = SparseCouplings::from_edges(2, &[(0, 1)], &[1]).unwrap();
        let beta = 0.4;
        let energy = |s: usize| {
            let (a, b) = (1 - 2 * (s & 1) as i64, 1 - 2 * ((s >> 1) & 1) as i64);
            -(a * b)
        };
        let exact = normalize((0..4).map(|s| (-beta * energy(s) as f64).exp()).collect());
        let mut r = rng::from_seed(2024);
        let mut st = SaState::new(&adj, vec![1, 1]);
        let steps = 1_000_000;
        let trace: Vec<usize> = (0..steps)
            .map(|_| {
                st.sweep(&adj, beta, &mut r);
                let s = st.spins();
                ((s[0] < 0) as usize) | (((s[1] < 0) as usize) << 1)
            })
            .collect();
        assert_gibbs(&trace, &exact, "sa");
    }
}
