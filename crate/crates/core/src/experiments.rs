//! Lower-bound constructions and the Monte-Carlo risk harness.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{kl_monte_carlo, DivergenceEstimate};
use crate::error::{invalid, Result};
use crate::estimators::{em_fit, estimate_s0, estimate_s1, modified_mle, EmOptions};
use crate::model::{sample, ModelConfig};
use crate::moments::{matched_pair_continuous, matched_pair_discrete};
use crate::rng::derive_seed;
use crate::signal::{orbit_distance, GroupKind, Signal, ZERO_TOL};

/// Default `c1` for the lower-bound constructions.
pub const DEFAULT_C1: f64 = 0.1;

/// Two hard-to-distinguish signals whose `n`-sample divergence is targeted at
/// `kl_budget`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundPair {
    pub theta: Signal,
    pub phi: Signal,
    pub s: usize,
    pub sigma: f64,
    pub n: usize,
    pub c1: f64,
    /// Phase separating the pair; zero for `s <= 1`, where the pair differs in
    /// the mean or in a modulus instead.
    pub delta: f64,
    pub kl_budget: f64,
    pub group: GroupKind,
}

fn check_common(sigma: f64, n: usize, c1: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if !(c1 > 0.0 && c1 <= 1.0) {
        return invalid(format!("c1 must lie in (0, 1], got {c1}"));
    }
    Ok(())
}

/// The pair used for the minimax lower bound over signals with support in `{1..s}`:
///
/// * `s = 0`: `phi = 0`, `theta = sigma / sqrt(n L)` times the all-ones vector;
/// * `s = 1`: moduli `1/sqrt 2` and `1/sqrt 2 + c1 sigma^2 / sqrt(2n)` on `±1`;
/// * `s >= 2`: moduli `1/2` on `±(s-1), ±s`, with phase `exp(i delta)` on
///   coefficient `s` of `theta` and `delta = c1 min(sigma^{2s-1} / sqrt n, 1)`.
pub fn lower_bound_pair(len: usize, s: usize, sigma: f64, n: usize, c1: f64) -> Result<LowerBoundPair> {
    check_common(sigma, n, c1)?;
    if s > len / 2 {
        return invalid(format!("s = {s} exceeds L/2 = {}", len / 2));
    }
    let nf = n as f64;
    let (theta, phi, delta) = match s {
        0 => (
            Signal::constant(len, sigma / (nf * len as f64).sqrt())?,
            Signal::zeros(len)?,
            0.0,
        ),
        1 => {
            let base = std::f64::consts::FRAC_1_SQRT_2;
            let bumped = base + c1 * sigma * sigma / (2.0 * nf).sqrt();
            (
                Signal::from_coefficients(len, &[(1, Complex64::new(bumped, 0.0))])?,
                Signal::from_coefficients(len, &[(1, Complex64::new(base, 0.0))])?,
                0.0,
            )
        }
        _ => {
            let delta = c1 * (sigma.powi(2 * s as i32 - 1) / nf.sqrt()).min(1.0);
            let (theta, phi) = matched_pair_continuous(len, s, delta, 0.5)?;
            (theta, phi, delta)
        }
    };
    Ok(LowerBoundPair {
        theta,
        phi,
        s,
        sigma,
        n,
        c1,
        delta,
        kl_budget: 0.5,
        group: GroupKind::Continuous,
    })
}

/// Pure-harmonic pair for cyclic shifts, `delta = c1 min(sigma^L / sqrt n, 1)`.
pub fn lower_bound_pair_discrete(len: usize, sigma: f64, n: usize, c1: f64) -> Result<LowerBoundPair> {
    check_common(sigma, n, c1)?;
    if c1 >= std::f64::consts::PI / len as f64 {
        return invalid(format!("c1 must be below pi/L = {}", std::f64::consts::PI / len as f64));
    }
    let delta = c1 * (sigma.powi(len as i32) / (n as f64).sqrt()).min(1.0);
    let (theta, phi) = matched_pair_discrete(len, delta)?;
    Ok(LowerBoundPair {
        theta,
        phi,
        s: 1,
        sigma,
        n,
        c1,
        delta,
        kl_budget: 0.5,
        group: GroupKind::Discrete,
    })
}

/// Monte-Carlo estimate of the single-sample divergence of a pair; multiply by
/// `pair.n` to compare with `kl_budget`.
pub fn pair_divergence(pair: &LowerBoundPair, n_mc: usize, k_quad: usize, seed: u64) -> Result<DivergenceEstimate> {
    kl_monte_carlo(&pair.theta, &pair.phi, pair.sigma, n_mc, k_quad, seed, pair.group)
}

/// Estimator evaluated by the risk harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    /// Support estimated on the first half of the batch, MLE on the second.
    ModifiedMle { c0: f64, em: EmOptions },
    /// Constrained MLE with the true support.
    OracleEm { em: EmOptions },
    S0,
    S1 { c0: f64 },
}

impl EstimatorSpec {
    /// Runs the estimator on a batch; the flag reports convergence.
    pub fn estimate(&self, obs: &crate::model::Observations, truth: &Signal, seed: u64) -> Result<(Signal, bool)> {
        match self {
            EstimatorSpec::ModifiedMle { c0, em } => {
                let fit = modified_mle(obs, *c0, em, seed)?;
                Ok((fit.estimate, fit.converged))
            }
            EstimatorSpec::OracleEm { em } => {
                let fit = em_fit(obs, &truth.support(ZERO_TOL), em, seed)?;
                Ok((fit.estimate, fit.converged))
            }
            EstimatorSpec::S0 => Ok((estimate_s0(obs)?, true)),
            EstimatorSpec::S1 { c0 } => Ok((estimate_s1(obs, *c0)?, true)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub sigma: f64,
    pub n: usize,
    pub trials: usize,
    /// Mean orbit distance between estimate and truth.
    pub risk_mean: f64,
    pub risk_stderr: f64,
    /// Root-mean-square orbit distance.
    pub risk_rms: f64,
    /// Trials whose fit stopped at the iteration cap; they are still counted.
    pub nonconverged: usize,
}

/// Orbit-distance risk of `spec` at `(sigma, n)` over `trials` simulated batches.
pub fn risk_mc(
    spec: &EstimatorSpec,
    theta: &Signal,
    sigma: f64,
    n: usize,
    trials: usize,
    seed: u64,
    group: GroupKind,
) -> Result<RatePoint> {
    if trials < 2 {
        return invalid("at least two trials are needed");
    }
    let outcomes: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, bool)> {
            let trial_seed = derive_seed(seed, t as u64);
            let config = ModelConfig::new(theta.len(), sigma, group, trial_seed)?;
            let obs = sample(theta, &config, n)?.into_observations();
            let (estimate, converged) = spec.estimate(&obs, theta, derive_seed(trial_seed, 1))?;
            Ok((orbit_distance(&estimate, theta, group)?, converged))
        })
        .collect::<Result<_>>()?;
    let k = trials as f64;
    let mean = outcomes.iter().map(|o| o.0).sum::<f64>() / k;
    let var = outcomes.iter().map(|o| (o.0 - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let rms = (outcomes.iter().map(|o| o.0 * o.0).sum::<f64>() / k).sqrt();
    Ok(RatePoint {
        sigma,
        n,
        trials,
        risk_mean: mean,
        risk_stderr: (var / k).sqrt(),
        risk_rms: rms,
        nonconverged: outcomes.iter().filter(|o| !o.1).count(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateAxis {
    Sigma,
    N,
}

impl std::fmt::Display for RateAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RateAxis::Sigma => "sigma",
            RateAxis::N => "n",
        })
    }
}

impl std::str::FromStr for RateAxis {
    type Err = crate::error::MraError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma" => Ok(RateAxis::Sigma),
            "n" => Ok(RateAxis::N),
            other => invalid(format!("unknown axis {other:?}, expected sigma or n")),
        }
    }
}

/// Settings shared by every point of a rate curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    /// Noise level for `axis = n`.
    pub sigma: f64,
    /// Base sample size: `n = round(n0 sigma^e)` for `axis = sigma`.
    pub n0: usize,
    /// Exponent `e`; defaults to `2 max(2s - 1, s + 1)` with `s` the largest
    /// frequency of the truth, which keeps `risk` roughly constant along the curve.
    pub coupling_exponent: Option<f64>,
    pub trials: usize,
    pub group: GroupKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub axis: RateAxis,
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `log risk` against `log n` (axis `n`), or of
    /// `log(risk sqrt n)` against `log sigma` (axis `sigma`).
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    /// Sample-size coupling used along a sigma axis, e.g. `n = round(500 * sigma^6)`.
    pub coupling: Option<String>,
}

/// Default coupling exponent for a truth with largest frequency `s`.
pub fn default_coupling_exponent(s: usize) -> f64 {
    let s = s as f64;
    2.0 * (2.0 * s - 1.0).max(s + 1.0)
}

/// Risk at every grid value and the fitted log-log slope.
pub fn rate_curve(
    spec: &EstimatorSpec,
    theta: &Signal,
    axis: RateAxis,
    grid: &[f64],
    base: &RateConfig,
    seed: u64,
) -> Result<RateCurve> {
    if grid.len() < 3 {
        return invalid("a rate curve needs at least three grid points");
    }
    if grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return invalid("grid values must be positive");
    }
    let s = theta.support(ZERO_TOL).max().unwrap_or(0);
    let exponent = base.coupling_exponent.unwrap_or_else(|| default_coupling_exponent(s));
    let settings: Vec<(f64, usize)> = grid
        .iter()
        .map(|&x| match axis {
            RateAxis::N => (base.sigma, x.round() as usize),
            RateAxis::Sigma => (x, ((base.n0 as f64) * x.powf(exponent)).round().max(1.0) as usize),
        })
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    for (i, &(sigma, n)) in settings.iter().enumerate() {
        points.push(risk_mc(spec, theta, sigma, n, base.trials, derive_seed(seed, i as u64), base.group)?);
    }
    let ys: Vec<f64> = points
        .iter()
        .map(|p| match axis {
            RateAxis::N => p.risk_mean,
            RateAxis::Sigma => p.risk_mean * (p.n as f64).sqrt(),
        })
        .collect();
    let (fitted_slope, slope_stderr) = fit_log_slope(grid, &ys)?;
    Ok(RateCurve {
        axis,
        points,
        fitted_slope,
        slope_stderr,
        coupling: match axis {
            RateAxis::N => None,
            RateAxis::Sigma => Some(format!("n = round({} * sigma^{exponent})", base.n0)),
        },
    })
}

/// Least-squares slope of `log y` on `log x`, with its standard error (zero
/// when only two points are given).
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("slope fit needs at least two paired values");
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return invalid("slope fit needs positive finite values");
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("slope fit needs distinct x values");
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let stderr = if lx.len() > 2 {
        let ssr: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
            .sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::delta_norm;
    use crate::signal::{validate_class, SignalClassParams};

    #[test]
    fn synthetic_power_law_slope() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 0.3 * x.powf(-0.5)).collect();
        let (b, se) = fit_log_slope(&xs, &ys).unwrap();
        assert!((b + 0.5).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn pairs_match_their_moments() {
        for s in 2..=3 {
            let pair = lower_bound_pair(2 * s + 1, s, 2.0, 1000, 0.1).unwrap();
            for m in 1..=2 * s - 2 {
                assert!(delta_norm(&pair.theta, &pair.phi, m, GroupKind::Continuous).unwrap() <= 1e-10);
            }
            let params = SignalClassParams::new(s, 0.25, 2.0).unwrap();
            assert!(validate_class(&pair.theta, &params).passes());
            assert!(validate_class(&pair.phi, &params).passes());
        }
    }

    #[test]
    fn small_s_pairs() {
        let p0 = lower_bound_pair(5, 0, 2.0, 100, 0.1).unwrap();
        assert!((orbit_distance(&p0.theta, &p0.phi, GroupKind::Continuous).unwrap() - 0.2).abs() < 1e-12);
        let p1 = lower_bound_pair(5, 1, 2.0, 100, 0.1).unwrap();
        let rho = orbit_distance(&p1.theta, &p1.phi, GroupKind::Continuous).unwrap();
        assert!((rho - 0.1 * 4.0 / 10.0).abs() < 1e-12);
        assert!(lower_bound_pair(5, 3, 2.0, 100, 0.1).is_err());
        assert!(lower_bound_pair(5, 2, 2.0, 100, 0.0).is_err());
    }

    #[test]
    fn discrete_pair_range() {
        assert!(lower_bound_pair_discrete(5, 1.0, 100, 0.7).is_err());
        let pair = lower_bound_pair_discrete(5, 1.0, 100, 0.5).unwrap();
        assert!((pair.delta - 0.05).abs() < 1e-15);
    }

    #[test]
    fn noiseless_risk_vanishes() {
        let theta = Signal::constant(5, 0.4).unwrap();
        let p = risk_mc(&EstimatorSpec::S0, &theta, 1e-12, 10, 4, 1, GroupKind::Continuous).unwrap();
        assert!(p.risk_mean < 1e-10);
    }
}
