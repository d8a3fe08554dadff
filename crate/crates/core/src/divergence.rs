//! KL divergence between orbit mixtures: Monte-Carlo estimation, the
//! moment-series sandwich and the first-moment split.

use std::f64::consts::E;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, MraError, Result};
use crate::model::draw_element;
use crate::moments::delta_norm;
use crate::quadrature::{half_norm_sq, CircleQuadrature, MixtureDensity};
use crate::rng::{child_rng, complex_normal, std_normal, MraRng};
use crate::signal::{apply_shift, dft_unchecked, orbit_align, orbit_distance, GroupKind, Signal, SupportSet};

/// Samples per Monte-Carlo chunk; each chunk has its own derived seed.
const MC_CHUNK: usize = 2048;

/// Default truncation order of the lower series.
pub const DEFAULT_M_MAX: usize = 8;
/// Default truncation order of the upper series.
pub const DEFAULT_K: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_mc: usize,
    #[serde(rename = "K_quad")]
    pub k_quad: usize,
}

impl DivergenceEstimate {
    fn from_samples(values: &[f64], k_quad: usize) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        DivergenceEstimate {
            mean,
            stderr: (var / n).sqrt(),
            n_mc: values.len(),
            k_quad,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub k_used: usize,
    pub m_max: usize,
    pub mc: DivergenceEstimate,
    /// `|Delta_m|` for `m = 1..`.
    pub delta_norms: Vec<f64>,
    /// False when the bounds were evaluated outside their regime on request.
    pub guaranteed: bool,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    Ok(())
}

fn check_pair(theta: &Signal, phi: &Signal) -> Result<()> {
    if theta.len() != phi.len() {
        return invalid(format!("signal lengths differ: {} vs {}", theta.len(), phi.len()));
    }
    Ok(())
}

/// `log f_theta(y)` with the group average replaced by the quadrature rule.
pub fn log_density(y: &[f64], theta: &Signal, sigma: f64, k_quad: usize, group: GroupKind) -> Result<f64> {
    check_sigma(sigma)?;
    if y.len() != theta.len() {
        return invalid(format!("observation length {} does not match L = {}", y.len(), theta.len()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("observation contains a non-finite value");
    }
    let quad = CircleQuadrature::new(group, k_quad, theta.len())?;
    let density = MixtureDensity::new(theta, sigma, &quad);
    let full = dft_unchecked(y);
    let half = &full[theta.half_len()..];
    Ok(density.log_density(half, half_norm_sq(half), &mut Vec::new()))
}

/// Draws the half spectrum of `Y = G theta + sigma xi` directly in the Fourier domain.
fn draw_half(rng: &mut MraRng, theta: &Signal, sigma: f64, group: GroupKind, out: &mut [Complex64]) {
    let g = draw_element(rng, group, theta.len());
    out[0] = Complex64::new(theta.dc() + sigma * std_normal(rng), 0.0);
    for (j, o) in out.iter_mut().enumerate().skip(1) {
        *o = theta.coef(j as i64) * g.phase(j as i64) + complex_normal(rng) * sigma;
    }
}

/// Evaluates `f` on `n_mc` draws from `P_theta`, in chunks with derived seeds so
/// the values do not depend on the thread count.
fn mc_values<F>(theta: &Signal, sigma: f64, n_mc: usize, seed: u64, group: GroupKind, f: F) -> Vec<f64>
where
    F: Fn(&[Complex64], &mut Vec<f64>) -> f64 + Sync,
{
    let h = theta.half_len();
    let chunks = n_mc.div_ceil(MC_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = child_rng(seed, c as u64);
            let count = MC_CHUNK.min(n_mc - c * MC_CHUNK);
            let mut half = vec![Complex64::new(0.0, 0.0); h + 1];
            let mut scratch = Vec::new();
            (0..count)
                .map(|_| {
                    draw_half(&mut rng, theta, sigma, group, &mut half);
                    f(&half, &mut scratch)
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

/// Monte-Carlo estimate of `D(P_theta || P_phi)` from `n_mc` fresh draws.
pub fn kl_monte_carlo(
    theta: &Signal,
    phi: &Signal,
    sigma: f64,
    n_mc: usize,
    k_quad: usize,
    seed: u64,
    group: GroupKind,
) -> Result<DivergenceEstimate> {
    check_sigma(sigma)?;
    check_pair(theta, phi)?;
    if n_mc == 0 {
        return invalid("n_mc must be at least 1");
    }
    let quad = CircleQuadrature::new(group, k_quad, theta.len())?;
    let ft = MixtureDensity::new(theta, sigma, &quad);
    let fp = MixtureDensity::new(phi, sigma, &quad);
    let offset = (phi.norm_sq() - theta.norm_sq()) / (2.0 * sigma * sigma);
    let values = mc_values(theta, sigma, n_mc, seed, group, |half, scratch| {
        offset + ft.log_mean_exp(half, scratch) - fp.log_mean_exp(half, scratch)
    });
    Ok(DivergenceEstimate::from_samples(&values, quad.nodes()))
}

/// Lower-variance Monte-Carlo estimate of `D(P_theta || P_phi)`.
///
/// Subtracts the score term `<grad log f_theta(Y), theta - g phi>` with `g phi`
/// the element of the orbit of `phi` closest to `theta`. The score has mean
/// zero under `P_theta`, so the estimator stays unbiased while the variance
/// drops from `O(rho^2)` to `O(rho^4)` for nearby pairs.
pub fn kl_control_variate(
    theta: &Signal,
    phi: &Signal,
    sigma: f64,
    n_mc: usize,
    k_quad: usize,
    seed: u64,
    group: GroupKind,
) -> Result<DivergenceEstimate> {
    check_sigma(sigma)?;
    check_pair(theta, phi)?;
    if n_mc == 0 {
        return invalid("n_mc must be at least 1");
    }
    let quad = CircleQuadrature::new(group, k_quad, theta.len())?;
    let aligned = apply_shift(phi, &orbit_align(theta, phi, group)?.element)?;
    let ft = MixtureDensity::new(theta, sigma, &quad);
    let fp = MixtureDensity::new(&aligned, sigma, &quad);
    let h = theta.half_len();
    let freqs: Vec<usize> = (1..=h).collect();
    let table = quad.phase_table(&freqs);
    let nodes = quad.nodes();
    let var = sigma * sigma;
    let diff: Vec<Complex64> = (0..=h)
        .map(|j| theta.coef(j as i64) - aligned.coef(j as i64))
        .collect();
    let offset = (aligned.norm_sq() - theta.norm_sq()) / (2.0 * var);
    let values = mc_values(theta, sigma, n_mc, seed, group, |half, scratch| {
        scratch.resize(nodes, 0.0);
        ft.correlations(half, scratch);
        let max = scratch.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for a in scratch.iter_mut() {
            *a = (*a - max).exp();
            total += *a;
        }
        let lme_theta = max + total.ln() - (nodes as f64).ln();
        // Score in the Fourier domain: (E_w[G^-1 y] - theta) / sigma^2.
        let mut score = (half[0].re - theta.dc()) * diff[0].re;
        for j in 1..=h {
            let mut avg = Complex64::new(0.0, 0.0);
            for k in 0..nodes {
                avg += table[k * h + j - 1].conj() * scratch[k];
            }
            let s = half[j] * avg / total - theta.coef(j as i64);
            score += 2.0 * (s.conj() * diff[j]).re;
        }
        let mut tmp = Vec::new();
        offset + lme_theta - fp.log_mean_exp(half, &mut tmp) - score / var
    });
    Ok(DivergenceEstimate::from_samples(&values, nodes))
}

/// Checks centring and `3 rho <= |theta| <= sigma`, naming the failed inequality.
pub fn check_sandwich_regime(theta: &Signal, phi: &Signal, sigma: f64, group: GroupKind) -> Result<()> {
    check_sigma(sigma)?;
    check_pair(theta, phi)?;
    let scale = 1e-10 * theta.norm().max(phi.norm()).max(1.0);
    if theta.dc().abs() > scale {
        return Err(MraError::Domain(format!(
            "theta is not centered (coefficient 0 = {:e})",
            theta.dc()
        )));
    }
    if phi.dc().abs() > scale {
        return Err(MraError::Domain(format!(
            "phi is not centered (coefficient 0 = {:e})",
            phi.dc()
        )));
    }
    let rho = orbit_distance(theta, phi, group)?;
    let norm = theta.norm();
    if 3.0 * rho > norm * (1.0 + 1e-12) {
        return Err(MraError::Domain(format!("3 rho <= |theta| fails: 3 rho = {}, |theta| = {norm}", 3.0 * rho)));
    }
    if norm > sigma * (1.0 + 1e-12) {
        return Err(MraError::Domain(format!("|theta| <= sigma fails: |theta| = {norm}, sigma = {sigma}")));
    }
    Ok(())
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|i| i as f64).product()
}

fn delta_norms(theta: &Signal, phi: &Signal, orders: usize, group: GroupKind) -> Result<Vec<f64>> {
    (1..=orders).map(|m| delta_norm(theta, phi, m, group)).collect()
}

fn lower_from_norms(norms: &[f64], sigma: f64, m_max: usize) -> f64 {
    let v = 3.0 * sigma * sigma;
    norms[..m_max]
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let m = i + 1;
            d * d / (v.powi(m as i32) * factorial(m))
        })
        .sum::<f64>()
        / 15.0
}

fn upper_from_norms(norms: &[f64], sigma: f64, k: usize, rho: f64, theta_norm: f64) -> f64 {
    let var = sigma * sigma;
    let series: f64 = norms[..k - 1]
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let m = i + 1;
            d * d / (var.powi(m as i32) * factorial(m))
        })
        .sum();
    let remainder = 24.0 * E * E * rho * rho * theta_norm.powi(2 * k as i32 - 2) / var.powi(k as i32);
    2.0 * series + remainder
}

/// `(1/15) sum_{m <= m_max} |Delta_m|^2 / ((3 sigma^2)^m m!)`, a lower bound on
/// the divergence of centered pairs with `3 rho <= |theta| <= sigma`.
pub fn kl_series_lower(theta: &Signal, phi: &Signal, sigma: f64, m_max: usize, group: GroupKind) -> Result<f64> {
    check_sandwich_regime(theta, phi, sigma, group)?;
    kl_series_lower_unchecked(theta, phi, sigma, m_max, group)
}

/// [`kl_series_lower`] without the regime check; the value is then not a bound.
pub fn kl_series_lower_unchecked(
    theta: &Signal,
    phi: &Signal,
    sigma: f64,
    m_max: usize,
    group: GroupKind,
) -> Result<f64> {
    check_sigma(sigma)?;
    check_pair(theta, phi)?;
    let norms = delta_norms(theta, phi, m_max, group)?;
    Ok(lower_from_norms(&norms, sigma, m_max))
}

/// `2 sum_{m < k} |Delta_m|^2 / (sigma^{2m} m!) + 24 e^2 rho^2 |theta|^{2k-2} / sigma^{2k}`,
/// an upper bound under the same regime as [`kl_series_lower`].
pub fn kl_series_upper(theta: &Signal, phi: &Signal, sigma: f64, k: usize, group: GroupKind) -> Result<f64> {
    check_sandwich_regime(theta, phi, sigma, group)?;
    kl_series_upper_unchecked(theta, phi, sigma, k, group)
}

/// [`kl_series_upper`] without the regime check; the value is then not a bound.
pub fn kl_series_upper_unchecked(theta: &Signal, phi: &Signal, sigma: f64, k: usize, group: GroupKind) -> Result<f64> {
    check_sigma(sigma)?;
    check_pair(theta, phi)?;
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let norms = delta_norms(theta, phi, k - 1, group)?;
    let rho = orbit_distance(theta, phi, group)?;
    Ok(upper_from_norms(&norms, sigma, k, rho, theta.norm()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichOptions {
    pub m_max: usize,
    pub k: usize,
    pub n_mc: usize,
    pub k_quad: usize,
    pub seed: u64,
    pub group: GroupKind,
    /// Evaluate the series even when the regime check fails.
    pub force: bool,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        SandwichOptions {
            m_max: DEFAULT_M_MAX,
            k: DEFAULT_K,
            n_mc: 200_000,
            k_quad: crate::quadrature::DEFAULT_K_QUAD,
            seed: 0,
            group: GroupKind::Continuous,
            force: false,
        }
    }
}

/// Both series bounds together with a Monte-Carlo estimate.
pub fn kl_sandwich(theta: &Signal, phi: &Signal, sigma: f64, opts: &SandwichOptions) -> Result<SandwichReport> {
    if opts.m_max == 0 || opts.k == 0 {
        return invalid("m_max and k must be at least 1");
    }
    let guaranteed = match check_sandwich_regime(theta, phi, sigma, opts.group) {
        Ok(()) => true,
        Err(MraError::Domain(_)) if opts.force => false,
        Err(e) => return Err(e),
    };
    let orders = opts.m_max.max(opts.k - 1);
    let norms = delta_norms(theta, phi, orders, opts.group)?;
    let rho = orbit_distance(theta, phi, opts.group)?;
    let mc = kl_monte_carlo(theta, phi, sigma, opts.n_mc, opts.k_quad, opts.seed, opts.group)?;
    Ok(SandwichReport {
        lower_bound: lower_from_norms(&norms, sigma, opts.m_max),
        upper_bound: upper_from_norms(&norms, sigma, opts.k, rho, theta.norm()),
        k_used: opts.k,
        m_max: opts.m_max,
        mc,
        delta_norms: norms,
        guaranteed,
    })
}

/// Splits off the divergence carried by the first moment.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstMomentSplit {
    /// `(theta_0 - phi_0)^2 / (2 sigma^2)`.
    pub mean_term: f64,
    pub theta_centered: Signal,
    pub phi_centered: Signal,
}

/// `D(theta || phi) = mean_term + D(theta_c || phi_c)`, where the centered
/// signals have their coefficient 0 removed.
pub fn first_moment_decompose(theta: &Signal, phi: &Signal, sigma: f64) -> Result<FirstMomentSplit> {
    check_sigma(sigma)?;
    check_pair(theta, phi)?;
    let d = theta.dc() - phi.dc();
    Ok(FirstMomentSplit {
        mean_term: d * d / (2.0 * sigma * sigma),
        theta_centered: theta.centered(),
        phi_centered: phi.centered(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureOptions {
    pub n_mc: usize,
    pub k_quad: usize,
    pub group: GroupKind,
    /// Probe distances are drawn log-uniformly in `[min_radius, max_radius] * |theta|`.
    pub min_radius: f64,
    pub max_radius: f64,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        CurvatureOptions {
            n_mc: 20_000,
            k_quad: 128,
            group: GroupKind::Continuous,
            min_radius: 0.05,
            max_radius: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub rho: f64,
    pub kl: f64,
    pub kl_stderr: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureReport {
    pub min_ratio: f64,
    pub argmin: Signal,
    pub probes: Vec<Probe>,
}

/// Minimum of `D(theta || phi) / rho^2(theta, phi)` over random probes `phi` in
/// the span of the Fourier support of `theta`.
///
/// Half of the probes perturb only the phases of `theta`, which keeps the
/// power spectrum fixed and exposes the weakest directions; the rest move in
/// random directions of the support subspace. Probes with `rho = 0` are skipped.
pub fn curvature_ratio(
    theta: &Signal,
    sigma: f64,
    n_probe: usize,
    seed: u64,
    opts: &CurvatureOptions,
) -> Result<CurvatureReport> {
    check_sigma(sigma)?;
    if n_probe == 0 {
        return invalid("n_probe must be at least 1");
    }
    let support: SupportSet = theta.support(crate::signal::ZERO_TOL);
    let freqs: Vec<usize> = support.iter().collect();
    let norm = theta.norm();
    if norm == 0.0 {
        return invalid("theta must be nonzero");
    }
    let mc_seed = crate::rng::derive_seed(seed, u64::MAX);
    let probes: Vec<Option<(Probe, Signal)>> = (0..n_probe)
        .into_par_iter()
        .map(|p| -> Result<Option<(Probe, Signal)>> {
            let mut rng = child_rng(seed, p as u64);
            let log_r = rng.random_range(opts.min_radius.ln()..=opts.max_radius.ln());
            let r = log_r.exp() * norm;
            let phi = if p % 2 == 0 {
                let eps: Vec<f64> = freqs.iter().map(|_| std_normal(&mut rng)).collect();
                let scale = r / norm;
                theta.map_spectrum(|j, c| match freqs.iter().position(|&f| f == j) {
                    Some(i) => c * Complex64::from_polar(1.0, scale * eps[i]),
                    None => c,
                })
            } else {
                let dir: Vec<Complex64> = freqs.iter().map(|_| complex_normal(&mut rng)).collect();
                let dc = std_normal(&mut rng);
                let len = (dc * dc + 2.0 * dir.iter().map(|d| d.norm_sqr()).sum::<f64>()).sqrt();
                let t = r / len;
                theta.map_spectrum(|j, c| {
                    if j == 0 {
                        c + dc * t
                    } else {
                        match freqs.iter().position(|&f| f == j) {
                            Some(i) => c + dir[i] * t,
                            None => c,
                        }
                    }
                })
            };
            let rho = orbit_distance(theta, &phi, opts.group)?;
            if rho <= 1e-9 * norm {
                return Ok(None);
            }
            let kl = kl_control_variate(theta, &phi, sigma, opts.n_mc, opts.k_quad, mc_seed, opts.group)?;
            Ok(Some((
                Probe {
                    rho,
                    kl: kl.mean,
                    kl_stderr: kl.stderr,
                    ratio: kl.mean / (rho * rho),
                },
                phi,
            )))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, Signal)> = None;
    let mut out = Vec::new();
    for (probe, phi) in probes.into_iter().flatten() {
        if best.as_ref().is_none_or(|(b, _)| probe.ratio < *b) {
            best = Some((probe.ratio, phi));
        }
        out.push(probe);
    }
    let (min_ratio, argmin) = best.ok_or_else(|| MraError::InvalidArgument("every probe had rho = 0".into()))?;
    Ok(CurvatureReport {
        min_ratio,
        argmin,
        probes: out,
    })
}

/// Exact divergence between two fixed points of the group, `|theta - phi|^2 / 2 sigma^2`.
pub fn kl_fixed_points(theta: &Signal, phi: &Signal, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    check_pair(theta, phi)?;
    let moving = |s: &Signal| s.half_spectrum()[1..].iter().any(|c| c.norm() > crate::signal::ZERO_TOL);
    if moving(theta) || moving(phi) {
        return invalid("signals are not fixed points of the group");
    }
    Ok(theta.distance(phi).powi(2) / (2.0 * sigma * sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;
    use crate::signal::{random_signal, GroupElement, SignalClassParams};

    fn gaussian_log_density(y: &[f64], mean: &[f64], sigma: f64) -> f64 {
        let l = y.len() as f64;
        let d2: f64 = y.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
        -0.5 * l * (TAU * sigma * sigma).ln() - d2 / (2.0 * sigma * sigma)
    }

    #[test]
    fn constant_signal_density_is_gaussian() {
        let theta = Signal::constant(5, 0.7).unwrap();
        let y = [0.1, -0.4, 2.0, 0.3, 0.9];
        for k in [8, 64, 256] {
            let v = log_density(&y, &theta, 1.3, k, GroupKind::Continuous).unwrap();
            assert!((v - gaussian_log_density(&y, theta.values(), 1.3)).abs() < 1e-10);
        }
    }

    #[test]
    fn density_invariant_on_grid_shifts() {
        let theta = random_signal(&SignalClassParams::with_defaults(3), 7, 5).unwrap();
        let y = Signal::from_values(vec![0.3, -1.2, 0.5, 0.8, -0.1, 1.4, 0.2]).unwrap();
        let base = log_density(y.values(), &theta, 1.0, 64, GroupKind::Continuous).unwrap();
        for k in 1..5 {
            let g = GroupElement::continuous(TAU * k as f64 / 64.0);
            let gy = apply_shift(&y, &g).unwrap();
            let v = log_density(gy.values(), &theta, 1.0, 64, GroupKind::Continuous).unwrap();
            assert!((v - base).abs() < 1e-10);
        }
    }

    #[test]
    fn discrete_density_is_exact_average() {
        let theta = random_signal(&SignalClassParams::with_defaults(2), 5, 8).unwrap();
        let y = [0.4, 0.1, -0.9, 1.1, 0.0];
        let sigma = 0.8;
        let direct = (0..5)
            .map(|k| {
                let g = GroupElement::discrete(k, 5).unwrap();
                gaussian_log_density(&y, apply_shift(&theta, &g).unwrap().values(), sigma).exp()
            })
            .sum::<f64>()
            / 5.0;
        let v = log_density(&y, &theta, sigma, 0, GroupKind::Discrete).unwrap();
        assert!((v - direct.ln()).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_finite_observation() {
        let theta = Signal::zeros(3).unwrap();
        assert!(log_density(&[0.0, f64::NAN, 1.0], &theta, 1.0, 16, GroupKind::Continuous).is_err());
    }

    #[test]
    fn identical_signals_have_zero_divergence() {
        let theta = random_signal(&SignalClassParams::with_defaults(2), 5, 1).unwrap();
        let est = kl_monte_carlo(&theta, &theta, 1.0, 5000, 64, 3, GroupKind::Continuous).unwrap();
        assert_eq!(est.mean, 0.0);
        let shifted = apply_shift(&theta, &GroupElement::continuous(0.9)).unwrap();
        let est = kl_monte_carlo(&theta, &shifted, 1.0, 20_000, 64, 3, GroupKind::Continuous).unwrap();
        assert!(est.mean.abs() <= 3.0 * est.stderr + 1e-9);
    }

    #[test]
    fn fixed_point_divergence_is_exact() {
        let theta = Signal::constant(5, 0.3).unwrap();
        let phi = Signal::zeros(5).unwrap();
        let exact = kl_fixed_points(&theta, &phi, 2.0).unwrap();
        let est = kl_monte_carlo(&theta, &phi, 2.0, 50_000, 32, 1, GroupKind::Continuous).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.stderr);
    }

    #[test]
    fn control_variate_agrees_with_plain_estimate() {
        let theta = random_signal(&SignalClassParams::with_defaults(2), 5, 4).unwrap();
        let phi = theta.map_spectrum(|j, c| if j == 2 { c * Complex64::from_polar(1.0, 0.4) } else { c });
        let plain = kl_monte_carlo(&theta, &phi, 1.0, 100_000, 64, 5, GroupKind::Continuous).unwrap();
        let cv = kl_control_variate(&theta, &phi, 1.0, 100_000, 64, 6, GroupKind::Continuous).unwrap();
        assert!(cv.stderr < plain.stderr);
        let tol = 3.0 * (plain.stderr.powi(2) + cv.stderr.powi(2)).sqrt();
        assert!((plain.mean - cv.mean).abs() <= tol, "{plain:?} vs {cv:?}");
    }

    #[test]
    fn regime_violations_are_named() {
        let theta = random_signal(&SignalClassParams::with_defaults(2), 5, 2).unwrap();
        match kl_series_lower(&theta, &theta, 1.0, 4, GroupKind::Continuous) {
            Err(MraError::Domain(msg)) => assert!(msg.contains("centered")),
            other => panic!("unexpected {other:?}"),
        }
        let c = theta.centered();
        match kl_series_upper(&c, &c, 0.1, 4, GroupKind::Continuous) {
            Err(MraError::Domain(msg)) => assert!(msg.contains("sigma")),
            other => panic!("unexpected {other:?}"),
        }
        let far = c.scaled(-1.0);
        match kl_series_upper(&c, &far, 10.0, 4, GroupKind::Continuous) {
            Err(MraError::Domain(msg)) => assert!(msg.contains("3 rho")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn series_vanish_for_identical_signals() {
        let theta = random_signal(&SignalClassParams::with_defaults(2), 5, 2).unwrap().centered();
        let sigma = theta.norm() * 1.5;
        assert_eq!(kl_series_lower(&theta, &theta, sigma, 8, GroupKind::Continuous).unwrap(), 0.0);
        assert!(kl_series_upper(&theta, &theta, sigma, 4, GroupKind::Continuous).unwrap() < 1e-20);
    }

    #[test]
    fn forced_sandwich_is_labelled() {
        let theta = random_signal(&SignalClassParams::with_defaults(2), 5, 2).unwrap();
        let opts = SandwichOptions {
            n_mc: 1000,
            force: true,
            ..Default::default()
        };
        let report = kl_sandwich(&theta, &theta, 1.0, &opts).unwrap();
        assert!(!report.guaranteed);
        let strict = SandwichOptions { force: false, ..opts };
        assert!(kl_sandwich(&theta, &theta, 1.0, &strict).is_err());
    }

    #[test]
    fn first_moment_split() {
        let theta = Signal::constant(5, 0.4).unwrap();
        let phi = Signal::zeros(5).unwrap();
        let split = first_moment_decompose(&theta, &phi, 2.0).unwrap();
        assert!((split.mean_term - 0.16 * 5.0 / 8.0).abs() < 1e-14);
        assert!(split.theta_centered.norm_sq() < 1e-30);
    }
}
