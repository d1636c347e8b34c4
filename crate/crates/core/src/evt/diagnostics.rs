use serde::{Deserialize, Serialize};

use super::fit::{fit_gpd_mle, GpdFit};
use super::gpd::{standard_quantile, Distribution, GpdParams};
use crate::error::{Error, Result};

/// `F~(x) = #{x_i <= x} / (n + 1)`, which stays below 1 on the sample.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.iter().any(|x| x.is_nan()) {
            return Err(Error::invalid("sample contains NaN"));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / (self.sorted.len() + 1) as f64
    }
}

/// Sample points strictly above `u`, in their original order.
pub fn exceedances(sample: &[f64], u: f64) -> Vec<f64> {
    sample.iter().copied().filter(|&x| x > u).collect()
}

/// Empirical exceedance distribution `(F~(x) - F~(u)) / (1 - F~(u))`, zero
/// below the threshold.
pub fn exceedance_cdf(sample: &[f64], u: f64, x: f64) -> Result<f64> {
    let ecdf = EmpiricalCdf::new(sample)?;
    if !ecdf.sorted.last().is_some_and(|&m| m > u) {
        return Err(Error::NoExceedances { threshold: u });
    }
    if x < u {
        return Ok(0.0);
    }
    let fu = ecdf.eval(u);
    Ok((ecdf.eval(x) - fu) / (1.0 - fu))
}

/// Full-distribution tail above `u`, `F(x) = W_{xi,u~,sigma~}(x)` for
/// `x >= u`, chosen so that `F(u)` matches the empirical mass below `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub xi: f64,
    pub u: f64,
    pub f_u: f64,
    pub u_tilde: f64,
    pub sigma_tilde: f64,
}

impl TailModel {
    pub fn params(&self) -> GpdParams {
        GpdParams {
            xi: self.xi,
            u: self.u_tilde,
            sigma: self.sigma_tilde,
        }
    }
}

impl Distribution for TailModel {
    fn cdf(&self, x: f64) -> f64 {
        self.params().cdf(x)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        self.params().quantile(p)
    }
}

pub fn tail_model(fit: &GpdFit, f_u: f64) -> Result<TailModel> {
    if !(0.0..=1.0).contains(&f_u) {
        return Err(Error::invalid(format!("F(u) must lie in [0, 1], got {f_u}")));
    }
    let w = standard_quantile(fit.xi(), f_u);
    let denom = 1.0 + fit.xi() * w;
    if !(denom > 0.0) || !denom.is_finite() || !w.is_finite() {
        return Err(Error::InvalidReparametrization(denom));
    }
    let sigma_tilde = fit.sigma() / denom;
    Ok(TailModel {
        xi: fit.xi(),
        u: fit.u(),
        f_u,
        u_tilde: fit.u() - sigma_tilde * w,
        sigma_tilde,
    })
}

/// Sorted sample with average ranks for ties.
fn ranked(sample: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].partition_point(|&v| v == sorted[i]) + i;
        let rank = (i + 1 + j) as f64 / 2.0;
        out.extend(sorted[i..j].iter().map(|&x| (x, rank)));
        i = j;
    }
    out
}

/// `(model cdf, empirical probability)` pairs with plotting positions
/// `r / (n + 1)`.
pub fn pp_points(sample: &[f64], model: &dyn Distribution) -> Vec<(f64, f64)> {
    let n1 = (sample.len() + 1) as f64;
    ranked(sample).into_iter().map(|(x, r)| (model.cdf(x), r / n1)).collect()
}

/// `(model quantile, observed value)` pairs at plotting positions `r / (n + 1)`.
pub fn qq_points(sample: &[f64], model: &dyn Distribution) -> Result<Vec<(f64, f64)>> {
    let n1 = (sample.len() + 1) as f64;
    ranked(sample).into_iter().map(|(x, r)| Ok((model.quantile(r / n1)?, x))).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdScanEntry {
    /// Requested number of exceedances.
    pub k: usize,
    /// The `(k + 1)`-th largest sample value.
    pub u: f64,
    pub fit: Option<GpdFit>,
    pub error: Option<String>,
}

/// One fit per requested `k`, largest `k` first. Failures are recorded per
/// entry rather than aborting the scan.
pub fn threshold_scan(sample: &[f64], ks: &[usize]) -> Result<Vec<ThresholdScanEntry>> {
    let ecdf = EmpiricalCdf::new(sample)?;
    let mut ks = ks.to_vec();
    ks.sort_unstable_by(|a, b| b.cmp(a));
    ks.dedup();
    let n = ecdf.len();
    Ok(ks
        .into_iter()
        .map(|k| {
            if k >= n {
                return ThresholdScanEntry {
                    k,
                    u: f64::NAN,
                    fit: None,
                    error: Some(format!("k = {k} needs more than {n} points")),
                };
            }
            let u = ecdf.sorted[n - 1 - k];
            match fit_gpd_mle(sample, u) {
                Ok(fit) => ThresholdScanEntry { k, u, fit: Some(fit), error: None },
                Err(e) => ThresholdScanEntry { k, u, fit: None, error: Some(e.to_string()) },
            }
        })
        .collect())
}

/// Refit at a higher threshold `mu` and compare against the threshold
/// stability of the GPD: the shape is unchanged and the scale moves to
/// `sigma_u + xi (mu - u)`. The z-scores use the combined standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotReport {
    pub mu: f64,
    pub fit_mu: GpdFit,
    pub xi_z: f64,
    pub sigma_predicted: f64,
    pub sigma_predicted_se: f64,
    pub sigma_z: f64,
}

pub fn pot_stability_check(sample: &[f64], fit_u: &GpdFit, mu: f64) -> Result<PotReport> {
    let u = fit_u.u();
    if !(mu >= u) {
        return Err(Error::invalid(format!("stability threshold {mu} is below the fitted threshold {u}")));
    }
    let fit_mu = fit_gpd_mle(sample, mu)?;
    let d = mu - u;
    let sigma_predicted = fit_u.sigma() + fit_u.xi() * d;
    let var_pred = fit_u.sigma_se.powi(2) + d * d * fit_u.xi_se.powi(2) + 2.0 * d * fit_u.cov_xi_sigma;
    let sigma_predicted_se = var_pred.max(0.0).sqrt();
    let z = |diff: f64, var: f64| if var > 0.0 { diff.abs() / var.sqrt() } else { 0.0 };
    Ok(PotReport {
        mu,
        fit_mu,
        xi_z: z(fit_mu.xi() - fit_u.xi(), fit_mu.xi_se.powi(2) + fit_u.xi_se.powi(2)),
        sigma_predicted,
        sigma_predicted_se,
        sigma_z: z(fit_mu.sigma() - sigma_predicted, fit_mu.sigma_se.powi(2) + var_pred.max(0.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn gpd_sample(xi: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        GpdParams::new(xi, 0.0, sigma).unwrap().sample(n, &mut rng::from_seed(seed))
    }

    #[test]
    fn exceedance_cdf_values() {
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((exceedance_cdf(&s, 5.0, 8.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(exceedance_cdf(&s, 5.0, 4.0).unwrap(), 0.0);
        let ecdf = EmpiricalCdf::new(&s).unwrap();
        for x in [0.5, 3.0, 7.5, 10.0] {
            assert_eq!(exceedance_cdf(&s, 0.0, x).unwrap(), ecdf.eval(x));
        }
        assert!(matches!(exceedance_cdf(&s, 10.0, 11.0), Err(Error::NoExceedances { .. })));
    }

    fn fake_fit(xi: f64, u: f64, sigma: f64) -> GpdFit {
        GpdFit {
            params: GpdParams::new(xi, u, sigma).unwrap(),
            k: 100,
            xi_se: 0.1,
            sigma_se: 0.1,
            cov_xi_sigma: 0.0,
            log_likelihood: 0.0,
        }
    }

    #[test]
    fn tail_model_reparametrization() {
        let m = tail_model(&fake_fit(0.0, 5.0, 1.0), 1.0 - (-1.0f64).exp()).unwrap();
        assert!((m.sigma_tilde - 1.0).abs() < 1e-12);
        assert!((m.u_tilde - 4.0).abs() < 1e-12);
        // Above u the model is F(u) + (1 - F(u)) W_{xi,u,sigma}(x).
        for &xi in &[-0.4, 0.3, 1.2] {
            let fit = fake_fit(xi, 2.0, 1.5);
            let m = tail_model(&fit, 0.9).unwrap();
            assert!((m.cdf(2.0) - 0.9).abs() < 1e-12);
            for x in [2.5, 3.0, 4.0] {
                let expect = 0.9 + 0.1 * fit.params.cdf(x);
                assert!((m.cdf(x) - expect).abs() < 1e-12, "xi={xi} x={x}");
            }
        }
        assert!(matches!(tail_model(&fake_fit(-0.5, 0.0, 1.0), 1.0), Err(Error::InvalidReparametrization(_))));
        assert!(tail_model(&fake_fit(0.5, 0.0, 1.0), 1.2).is_err());
    }

    #[test]
    fn plotting_positions() {
        let fit = fake_fit(0.2, 1.0, 2.0);
        let pts = pp_points(&[3.0], &fit.params);
        assert_eq!(pts, vec![(fit.params.cdf(3.0), 0.5)]);
        let tied = pp_points(&[2.0, 1.5, 2.0, 4.0], &fit.params);
        let probs: Vec<f64> = tied.iter().map(|p| p.1).collect();
        assert_eq!(probs, vec![0.2, 0.5, 0.5, 0.8]);
        let qq = qq_points(&[3.0, 5.0], &fit.params).unwrap();
        assert!((qq[0].0 - fit.params.quantile(1.0 / 3.0).unwrap()).abs() < 1e-14);
        assert_eq!(qq[1].1, 5.0);
    }

    #[test]
    fn fitted_model_tracks_the_diagonal() {
        let data = gpd_sample(0.5, 1.0, 5000, 3);
        let fit = fit_gpd_mle(&data, 0.0).unwrap();
        let worst = pp_points(&data, &fit.params)
            .iter()
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        // Kolmogorov bound at the 0.1% level is about 1.95 / sqrt(n).
        assert!(worst < 1.95 / (5000f64).sqrt(), "{worst}");
    }

    #[test]
    fn qq_within_bootstrap_envelope() {
        let data = gpd_sample(0.3, 1.0, 2000, 7);
        let fit = fit_gpd_mle(&data, 0.0).unwrap();
        let qq = qq_points(&data, &fit.params).unwrap();
        let mut r = rng::from_seed(70);
        let reps = 200;
        let mut columns = vec![Vec::with_capacity(reps); data.len()];
        for _ in 0..reps {
            let mut sim = fit.params.sample(data.len(), &mut r);
            sim.sort_by(f64::total_cmp);
            for (c, v) in columns.iter_mut().zip(sim) {
                c.push(v);
            }
        }
        for col in columns.iter_mut() {
            col.sort_by(f64::total_cmp);
        }
        let inside = qq
            .iter()
            .zip(&columns)
            .filter(|((_, obs), col)| col[reps * 25 / 1000] <= *obs && *obs <= col[reps * 975 / 1000 - 1])
            .count();
        assert!(inside as f64 >= 0.9 * data.len() as f64, "{inside}");
    }

    #[test]
    fn scan_orders_and_records_failures() {
        let data = gpd_sample(0.4, 1.0, 1000, 9);
        let entries = threshold_scan(&data, &[100, 500, 20, 2000]).unwrap();
        let ks: Vec<usize> = entries.iter().map(|e| e.k).collect();
        assert_eq!(ks, vec![2000, 500, 100, 20]);
        assert!(entries[0].error.is_some());
        let mut sorted = data.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(entries[1].u, sorted[500]);
        assert_eq!(entries[1].fit.unwrap().k, 500);
        assert!(entries[3].error.as_deref().unwrap().contains("insufficient"));
    }

    #[test]
    fn pot_threshold_stability() {
        let data = gpd_sample(0.5, 1.0, 20_000, 14);
        let fit = fit_gpd_mle(&data, 0.0).unwrap();
        let same = pot_stability_check(&data, &fit, 0.0).unwrap();
        assert_eq!(same.xi_z, 0.0);
        assert_eq!(same.fit_mu, fit);
        let mut sorted = data.clone();
        sorted.sort_by(f64::total_cmp);
        let mu = sorted[sorted.len() * 9 / 10];
        let rep = pot_stability_check(&data, &fit, mu).unwrap();
        assert!(rep.xi_z < 3.0 && rep.sigma_z < 3.0, "{rep:?}");
        assert!((rep.sigma_predicted - (fit.sigma() + fit.xi() * mu)).abs() < 1e-12);
        assert!(pot_stability_check(&data, &fit, -1.0).is_err());
    }
}
