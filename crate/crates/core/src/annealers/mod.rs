//! Stochastic solvers: simulated annealing (SA), simulated quantum annealing
//! on a discrete imaginary-time path integral (SQA), and mean-field rotor
//! annealing (MFA).
//!
//! Time is measured in sweeps. The schedule is sampled once per sweep at
//! `t = k / t_a` for `k = 1..=t_a`; sites are visited in index order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::CouplingInstance;
use crate::rng::StreamRng;

pub mod mfa;
pub mod sa;
pub mod sqa;

pub use mfa::{mfa_run, MfaSchedule, MfaState};
pub use sa::{sa_run, SaSchedule, SaState};
pub use sqa::{sqa_effective_couplings, sqa_run, SqaLattice, SqaSchedule, SqaState};

/// Result of a single annealing repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealOutcome {
    /// Fraction of the readout found in a ground state: 0 or 1 for SA and
    /// MFA, a multiple of `1/M` for SQA.
    pub success_fraction: f64,
    /// Lowest classical energy among the readout configurations.
    pub final_energy: i64,
    /// Classical energy of the starting configuration.
    pub initial_energy: i64,
    pub sweeps_used: u64,
}

/// Anything that can be repeated to estimate a success probability.
pub trait Annealer: Sync {
    /// Annealing time in sweeps; the unit of effort.
    fn sweeps(&self) -> u64;

    fn run(&self, instance: &CouplingInstance, e0: i64, rng: &mut StreamRng) -> AnnealOutcome;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum AnnealerConfig {
    Sa(SaSchedule),
    Sqa(SqaSchedule),
    Mfa(MfaSchedule),
}

impl AnnealerConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            AnnealerConfig::Sa(s) => s.validate(),
            AnnealerConfig::Sqa(s) => s.validate(),
            AnnealerConfig::Mfa(s) => s.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnnealerConfig::Sa(_) => "sa",
            AnnealerConfig::Sqa(_) => "sqa",
            AnnealerConfig::Mfa(_) => "mfa",
        }
    }

    /// Short label used in file names, e.g. `sqa_b10_ta150`.
    pub fn label(&self) -> String {
        match self {
            AnnealerConfig::Sa(s) => format!("sa_ta{}", s.t_a),
            AnnealerConfig::Sqa(s) => format!("sqa_b{}_ta{}", fmt_num(s.beta), s.t_a),
            AnnealerConfig::Mfa(s) => format!("mfa_b{}_ta{}", fmt_num(s.beta), s.t_a),
        }
    }

    pub fn with_sweeps(&self, t_a: u64) -> Self {
        match *self {
            AnnealerConfig::Sa(s) => AnnealerConfig::Sa(SaSchedule { t_a, ..s }),
            AnnealerConfig::Sqa(s) => AnnealerConfig::Sqa(SqaSchedule { t_a, ..s }),
            AnnealerConfig::Mfa(s) => AnnealerConfig::Mfa(MfaSchedule { t_a, ..s }),
        }
    }

    /// Replaces the constant inverse temperature; SA has none.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        match *self {
            AnnealerConfig::Sa(_) => Err(Error::invalid("SA has no constant inverse temperature")),
            AnnealerConfig::Sqa(s) => Ok(AnnealerConfig::Sqa(SqaSchedule { beta, ..s })),
            AnnealerConfig::Mfa(s) => Ok(AnnealerConfig::Mfa(MfaSchedule { beta, ..s })),
        }
    }
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

impl Annealer for AnnealerConfig {
    fn sweeps(&self) -> u64 {
        match self {
            AnnealerConfig::Sa(s) => s.t_a,
            AnnealerConfig::Sqa(s) => s.t_a,
            AnnealerConfig::Mfa(s) => s.t_a,
        }
    }

    fn run(&self, instance: &CouplingInstance, e0: i64, rng: &mut StreamRng) -> AnnealOutcome {
        match self {
            AnnealerConfig::Sa(s) => sa_run(instance, s, e0, rng),
            AnnealerConfig::Sqa(s) => sqa_run(instance, s, e0, rng),
            AnnealerConfig::Mfa(s) => mfa_run(instance, s, e0, rng),
        }
    }
}

/// `t = k / t_a`, the schedule position of sweep `k`.
#[inline]
pub(crate) fn schedule_fraction(k: u64, t_a: u64) -> f64 {
    k as f64 / t_a as f64
}

/// Uniform double in `[0, 1)` from the top 53 bits.
#[inline]
pub(crate) fn uniform(rng: &mut StreamRng) -> f64 {
    use rand::RngCore;
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
