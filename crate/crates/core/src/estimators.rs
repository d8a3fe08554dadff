//! Support estimation from the power spectrum, quadrature EM for the
//! support-constrained MLE, the sample-splitting modified MLE and the
//! closed-form estimators for `s <= 1`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::Observations;
use crate::quadrature::{CircleQuadrature, DEFAULT_K_QUAD};
use crate::rng::child_rng;
use crate::signal::{dft_unchecked, Signal, SignalClassParams, SupportSet, ZERO_TOL};

/// Rows per parallel work item in the E-step.
const ROW_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportEstimate {
    pub support: SupportSet,
    /// `M_j` for `j = 1..=L/2`.
    pub spectrum: Vec<f64>,
    pub threshold: f64,
}

/// Unbiased power-spectrum estimates `M_j = mean_i |Y_ij|^2 - sigma^2`, `j = 1..=L/2`.
pub fn spectrum_stats(obs: &Observations) -> Result<Vec<f64>> {
    if obs.is_empty() {
        return invalid("spectrum statistics need at least one observation");
    }
    let h = obs.len() / 2;
    let mut acc = vec![0.0; h];
    for row in obs.rows() {
        let f = dft_unchecked(row);
        for (a, c) in acc.iter_mut().zip(&f[h + 1..]) {
            *a += c.norm_sqr();
        }
    }
    let n = obs.n() as f64;
    let var = obs.sigma() * obs.sigma();
    Ok(acc.into_iter().map(|a| a / n - var).collect())
}

/// `{j : M_j >= c0^2 / 2}`.
pub fn estimate_support(spectrum: &[f64], c0: f64) -> Result<SupportEstimate> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return invalid(format!("c0 must be positive, got {c0}"));
    }
    let threshold = 0.5 * c0 * c0;
    let support = SupportSet::new(
        spectrum
            .iter()
            .enumerate()
            .filter(|(_, &m)| m >= threshold)
            .map(|(i, _)| i + 1),
        2 * spectrum.len() + 1,
    )?;
    Ok(SupportEstimate {
        support,
        spectrum: spectrum.to_vec(),
        threshold,
    })
}

/// Fourier coefficients of the observations restricted to the frequencies in play.
struct FourierData {
    n: usize,
    len: usize,
    sigma: f64,
    freqs: Vec<usize>,
    dc: Vec<f64>,
    /// Row-major `n x freqs.len()`.
    coefs: Vec<Complex64>,
    mean_norm_sq: f64,
}

impl FourierData {
    fn new(obs: &Observations, freqs: Vec<usize>) -> Self {
        let h = obs.len() / 2;
        let mut dc = Vec::with_capacity(obs.n());
        let mut coefs = Vec::with_capacity(obs.n() * freqs.len());
        let mut norm_sq = 0.0;
        for row in obs.rows() {
            let f = dft_unchecked(row);
            dc.push(f[h].re);
            coefs.extend(freqs.iter().map(|&j| f[h + j]));
            norm_sq += row.iter().map(|v| v * v).sum::<f64>();
        }
        FourierData {
            n: obs.n(),
            len: obs.len(),
            sigma: obs.sigma(),
            freqs,
            dc,
            coefs,
            mean_norm_sq: norm_sq / obs.n() as f64,
        }
    }

    fn prefix(&self, rows: usize) -> FourierData {
        let f = self.freqs.len();
        // Only the tracked frequencies are kept per row, so the pilot reuses the
        // full-batch energy; it shifts every candidate's log-likelihood equally.
        FourierData {
            n: rows,
            len: self.len,
            sigma: self.sigma,
            freqs: self.freqs.clone(),
            dc: self.dc[..rows].to_vec(),
            coefs: self.coefs[..rows * f].to_vec(),
            mean_norm_sq: self.mean_norm_sq,
        }
    }

    fn mean_dc(&self) -> f64 {
        self.dc.iter().sum::<f64>() / self.n as f64
    }
}

/// Phase table `z_k^j` split into real and imaginary parts, laid out `[f][k]`.
struct PhaseTable {
    nodes: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl PhaseTable {
    fn new(quad: &CircleQuadrature, freqs: &[usize]) -> Self {
        let nodes = quad.nodes();
        let mut re = vec![0.0; nodes * freqs.len()];
        let mut im = vec![0.0; nodes * freqs.len()];
        for k in 0..nodes {
            let g = quad.element(k);
            for (f, &j) in freqs.iter().enumerate() {
                let z = g.phase(j as i64);
                re[f * nodes + k] = z.re;
                im[f * nodes + k] = z.im;
            }
        }
        PhaseTable { nodes, re, im }
    }
}

/// One pass over the data at `phi`: the per-sample log-likelihood at `phi` and,
/// when `m_step` is set, the EM update of the tracked coefficients.
fn em_pass(
    data: &FourierData,
    table: &PhaseTable,
    phi_dc: f64,
    phi: &[Complex64],
    m_step: bool,
) -> (f64, Vec<Complex64>) {
    let f = data.freqs.len();
    let nodes = table.nodes;
    let var = data.sigma * data.sigma;
    let inv_var = 1.0 / var;
    let log_nodes = (nodes as f64).ln();
    let chunks = data.n.div_ceil(ROW_CHUNK);
    let partial: Vec<(f64, Vec<Complex64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * ROW_CHUNK;
            let end = (start + ROW_CHUNK).min(data.n);
            let mut a = vec![0.0; nodes];
            let mut b_re = vec![0.0; f];
            let mut b_im = vec![0.0; f];
            let mut lme = 0.0;
            let mut acc = vec![Complex64::new(0.0, 0.0); f];
            for i in start..end {
                let y = &data.coefs[i * f..(i + 1) * f];
                for q in 0..f {
                    let b = y[q].conj() * phi[q] * (2.0 * inv_var);
                    b_re[q] = b.re;
                    b_im[q] = b.im;
                }
                a.fill(data.dc[i] * phi_dc * inv_var);
                for q in 0..f {
                    let (br, bi) = (b_re[q], b_im[q]);
                    let tr = &table.re[q * nodes..(q + 1) * nodes];
                    let ti = &table.im[q * nodes..(q + 1) * nodes];
                    for k in 0..nodes {
                        a[k] += tr[k] * br - ti[k] * bi;
                    }
                }
                let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in a.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                lme += max + total.ln() - log_nodes;
                if m_step {
                    let inv_total = 1.0 / total;
                    for q in 0..f {
                        let tr = &table.re[q * nodes..(q + 1) * nodes];
                        let ti = &table.im[q * nodes..(q + 1) * nodes];
                        let mut sr = 0.0;
                        let mut si = 0.0;
                        for k in 0..nodes {
                            sr += a[k] * tr[k];
                            si += a[k] * ti[k];
                        }
                        // y_j * sum_k w_k conj(z_k^j)
                        acc[q] += y[q] * Complex64::new(sr, -si) * inv_total;
                    }
                }
            }
            (lme, acc)
        })
        .collect();
    let mut lme = 0.0;
    let mut acc = vec![Complex64::new(0.0, 0.0); f];
    for (l, a) in partial {
        lme += l;
        for (x, y) in acc.iter_mut().zip(a) {
            *x += y;
        }
    }
    let n = data.n as f64;
    let phi_norm_sq = phi_dc * phi_dc + 2.0 * phi.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let loglik = -0.5 * data.len as f64 * (TAU * var).ln() - (data.mean_norm_sq + phi_norm_sq) / (2.0 * var) + lme / n;
    for x in acc.iter_mut() {
        *x /= n;
    }
    (loglik, acc)
}

/// Per-sample mean log-likelihood `(1/n) sum_i log f_phi(Y_i)` under the
/// quadrature mixture, Gaussian normalizer included.
pub fn log_likelihood(obs: &Observations, phi: &Signal, k_quad: usize) -> Result<f64> {
    if obs.is_empty() {
        return invalid("log-likelihood needs at least one observation");
    }
    if phi.len() != obs.len() {
        return invalid(format!("signal length {} does not match L = {}", phi.len(), obs.len()));
    }
    let quad = CircleQuadrature::new(obs.config().group, k_quad, obs.len())?;
    let freqs: Vec<usize> = phi.support(ZERO_TOL).iter().collect();
    let data = FourierData::new(obs, freqs);
    let table = PhaseTable::new(&quad, &data.freqs);
    let coefs: Vec<Complex64> = data.freqs.iter().map(|&j| phi.coef(j as i64)).collect();
    Ok(em_pass(&data, &table, phi.dc(), &coefs, false).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    #[serde(rename = "K_quad")]
    pub k_quad: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the relative change of the log-likelihood drops below this.
    pub tol: f64,
    /// Floor `c0^2 / 2` on the initial power spectrum.
    pub c0: f64,
    /// Squared-extrapolation acceleration with a monotone safeguard.
    pub accelerate: bool,
    /// Run the restarts on the first `pilot` rows only, then refine the best
    /// candidate on the full batch.
    pub pilot: Option<usize>,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            k_quad: DEFAULT_K_QUAD,
            restarts: 20,
            max_iter: 500,
            tol: 1e-9,
            c0: SignalClassParams::DEFAULT_C0,
            accelerate: false,
            pilot: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimate: Signal,
    /// Per-sample mean log-likelihood at `estimate`.
    pub loglik: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
    pub support: SupportSet,
    /// Log-likelihood after every accepted iterate of the winning run.
    pub trace: Vec<f64>,
}

struct Run {
    coefs: Vec<Complex64>,
    loglik: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn relative_change(old: f64, new: f64) -> f64 {
    (new - old).abs() / old.abs().max(f64::MIN_POSITIVE)
}

fn run_em(data: &FourierData, table: &PhaseTable, dc: f64, init: Vec<Complex64>, opts: &EmOptions) -> Run {
    let mut x = init;
    let mut trace: Vec<f64> = Vec::new();
    let mut best = (x.clone(), f64::NEG_INFINITY);
    let mut passes = 0;

    // Records an accepted iterate; returns true once converged.
    let accept = |point: &[Complex64], l: f64, trace: &mut Vec<f64>, best: &mut (Vec<Complex64>, f64)| {
        let done = trace.last().is_some_and(|&prev| relative_change(prev, l) < opts.tol);
        trace.push(l);
        best.0.clear();
        best.0.extend_from_slice(point);
        best.1 = l;
        done
    };

    let converged = loop {
        if passes >= opts.max_iter {
            break false;
        }
        let (l0, x1) = em_pass(data, table, dc, &x, true);
        passes += 1;
        if accept(&x, l0, &mut trace, &mut best) {
            break true;
        }
        if !opts.accelerate || passes >= opts.max_iter {
            x = x1;
            continue;
        }
        let (l1, x2) = em_pass(data, table, dc, &x1, true);
        passes += 1;
        if accept(&x1, l1, &mut trace, &mut best) {
            break true;
        }
        let r: Vec<Complex64> = x1.iter().zip(&x).map(|(a, b)| a - b).collect();
        let v: Vec<Complex64> = x2.iter().zip(&x1).zip(&r).map(|((a, b), c)| a - b - c).collect();
        let rn = r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let vn = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let alpha = if vn > 0.0 { -(rn / vn) } else { -1.0 };
        if alpha >= -1.0 || passes >= opts.max_iter {
            x = x2;
            continue;
        }
        let xp: Vec<Complex64> = x
            .iter()
            .zip(&r)
            .zip(&v)
            .map(|((a, b), c)| a - b * (2.0 * alpha) + c * (alpha * alpha))
            .collect();
        let (lp, xpp) = em_pass(data, table, dc, &xp, true);
        passes += 1;
        if lp.is_finite() && lp >= l1 {
            if accept(&xp, lp, &mut trace, &mut best) {
                break true;
            }
            x = xpp;
        } else {
            x = x2;
        }
    };
    Run {
        coefs: best.0,
        loglik: best.1,
        iterations: passes,
        converged,
        trace,
    }
}

fn initial_point(moduli: &[f64], seed: u64, restart: usize) -> Vec<Complex64> {
    let mut rng = child_rng(seed, restart as u64);
    moduli
        .iter()
        .map(|&m| Complex64::from_polar(m, rng.random_range(0.0..TAU)))
        .collect()
}

/// Maximum likelihood over signals with Fourier support in `support` (plus
/// coefficient 0), by EM on the quadrature mixture with random-phase restarts.
pub fn em_fit(obs: &Observations, support: &SupportSet, opts: &EmOptions, seed: u64) -> Result<FitResult> {
    if obs.is_empty() {
        return invalid("EM needs at least one observation");
    }
    if !support.fits(obs.len()) {
        return invalid(format!("support {support:?} does not fit L = {}", obs.len()));
    }
    if opts.restarts == 0 || opts.max_iter == 0 {
        return invalid("restarts and max_iter must be at least 1");
    }
    if !(opts.c0 > 0.0) {
        return invalid("c0 must be positive");
    }
    let (freqs, data, table, dc) = prepare(obs, support, opts)?;
    let spectrum = spectrum_stats(obs)?;
    let floor = 0.5 * opts.c0 * opts.c0;
    let moduli: Vec<f64> = freqs.iter().map(|&j| spectrum[j - 1].max(floor).sqrt()).collect();

    let pilot = match opts.pilot {
        Some(p) if p > 0 && p < data.n => Some(data.prefix(p)),
        _ => None,
    };
    let search = pilot.as_ref().unwrap_or(&data);
    let restarts = if freqs.is_empty() { 1 } else { opts.restarts };
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| run_em(search, &table, dc, initial_point(&moduli, seed, r), opts))
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.loglik > runs[best].loglik + 1e-12 {
            best = i;
        }
    }
    let mut winner = runs.into_iter().nth(best).expect("at least one restart");
    if pilot.is_some() {
        winner = run_em(&data, &table, dc, winner.coefs, opts);
    }

    finish(obs.len(), &freqs, dc, winner, restarts, support)
}

/// EM from a given starting signal, projected onto `support`; no restarts.
pub fn em_refine(obs: &Observations, support: &SupportSet, init: &Signal, opts: &EmOptions) -> Result<FitResult> {
    if obs.is_empty() {
        return invalid("EM needs at least one observation");
    }
    if init.len() != obs.len() {
        return invalid(format!("initial signal has length {}, batch has L = {}", init.len(), obs.len()));
    }
    if !support.fits(obs.len()) || opts.max_iter == 0 {
        return invalid("support must fit the batch and max_iter must be at least 1");
    }
    let (freqs, data, table, dc) = prepare(obs, support, opts)?;
    let start = freqs.iter().map(|&j| init.coef(j as i64)).collect();
    let run = run_em(&data, &table, dc, start, opts);
    finish(obs.len(), &freqs, dc, run, 1, support)
}

fn prepare(obs: &Observations, support: &SupportSet, opts: &EmOptions) -> Result<(Vec<usize>, FourierData, PhaseTable, f64)> {
    let quad = CircleQuadrature::new(obs.config().group, opts.k_quad, obs.len())?;
    let freqs: Vec<usize> = support.iter().collect();
    let data = FourierData::new(obs, freqs.clone());
    let table = PhaseTable::new(&quad, &freqs);
    let dc = data.mean_dc();
    Ok((freqs, data, table, dc))
}

fn finish(len: usize, freqs: &[usize], dc: f64, run: Run, restarts: usize, support: &SupportSet) -> Result<FitResult> {
    let mut half = vec![Complex64::new(0.0, 0.0); len / 2 + 1];
    half[0] = Complex64::new(dc, 0.0);
    for (&j, c) in freqs.iter().zip(&run.coefs) {
        half[j] = *c;
    }
    Ok(FitResult {
        estimate: Signal::from_half_spectrum(len, &half)?,
        loglik: run.loglik,
        iterations: run.iterations,
        restarts_used: restarts,
        converged: run.converged,
        support: support.clone(),
        trace: run.trace,
    })
}

/// Splits the batch in order (the first half takes the extra row when the size
/// is odd), estimates the support on the first half and fits the constrained
/// MLE on the second.
pub fn modified_mle(obs: &Observations, c0: f64, opts: &EmOptions, seed: u64) -> Result<FitResult> {
    let n = obs.n();
    if n < 2 {
        return invalid("the modified MLE needs at least two observations");
    }
    let first = n.div_ceil(2);
    let support = estimate_support(&spectrum_stats(&obs.slice(0..first))?, c0)?.support;
    let opts = EmOptions { c0, ..*opts };
    em_fit(&obs.slice(first..n), &support, &opts, seed)
}

/// Grand mean of all `nL` entries, as a constant signal.
pub fn estimate_s0(obs: &Observations) -> Result<Signal> {
    if obs.is_empty() {
        return invalid("estimator needs at least one observation");
    }
    let total: f64 = obs.rows().map(|r| r.iter().sum::<f64>()).sum();
    Signal::constant(obs.len(), total / (obs.n() * obs.len()) as f64)
}

/// Grand mean plus `sqrt(M_1)` along the first harmonic `u_k = 2 cos(2 pi k / L) / sqrt(L)`,
/// with `M_1` set to zero below `c0^2 / 2`.
pub fn estimate_s1(obs: &Observations, c0: f64) -> Result<Signal> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return invalid(format!("c0 must be positive, got {c0}"));
    }
    let mean = estimate_s0(obs)?;
    if obs.len() < 3 {
        return Ok(mean);
    }
    let m1 = spectrum_stats(obs)?[0];
    let m1 = if m1 >= 0.5 * c0 * c0 { m1 } else { 0.0 };
    let amp = m1.sqrt();
    let l = obs.len();
    let values = mean
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v + amp * 2.0 / (l as f64).sqrt() * (2.0 * PI * (i + 1) as f64 / l as f64).cos())
        .collect();
    Signal::from_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample, ModelConfig};
    use crate::signal::{orbit_distance, GroupKind};

    fn theta5() -> Signal {
        Signal::from_coefficients(
            5,
            &[(0, Complex64::new(0.3, 0.0)), (1, Complex64::from_polar(0.9, 0.4)), (2, Complex64::from_polar(0.7, -1.1))],
        )
        .unwrap()
    }

    fn batch(theta: &Signal, sigma: f64, n: usize, group: GroupKind, seed: u64) -> Observations {
        let cfg = ModelConfig::new(theta.len(), sigma, group, seed).unwrap();
        sample(theta, &cfg, n).unwrap().into_observations()
    }

    fn fast() -> EmOptions {
        EmOptions { k_quad: 64, restarts: 4, max_iter: 300, ..Default::default() }
    }

    #[test]
    fn spectrum_ignores_cyclic_shifts() {
        let obs = batch(&theta5(), 1.0, 50, GroupKind::Continuous, 3);
        let rows: Vec<Vec<f64>> = obs
            .rows()
            .enumerate()
            .map(|(i, r)| {
                let mut v = r.to_vec();
                v.rotate_left(i % 5);
                v
            })
            .collect();
        let shifted = Observations::new(obs.config().clone(), rows).unwrap();
        let a = spectrum_stats(&obs).unwrap();
        let b = spectrum_stats(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn support_threshold_is_inclusive() {
        let est = estimate_support(&[0.125, 0.1249, 3.0], 0.5).unwrap();
        assert_eq!(est.support.iter().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(est.threshold, 0.125);
        assert!(estimate_support(&[1.0], 0.0).is_err());
    }

    #[test]
    fn loglik_is_orbit_invariant_on_discrete_group() {
        let obs = batch(&theta5(), 1.0, 200, GroupKind::Discrete, 1);
        let phi = theta5();
        let g = crate::signal::GroupElement::discrete(2, 5).unwrap();
        let moved = crate::signal::apply_shift(&phi, &g).unwrap();
        let a = log_likelihood(&obs, &phi, 0).unwrap();
        let b = log_likelihood(&obs, &moved, 0).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn em_trace_ascends_and_respects_support() {
        let obs = batch(&theta5(), 1.0, 1500, GroupKind::Continuous, 9);
        let support = SupportSet::new([2], 5).unwrap();
        for accelerate in [false, true] {
            let fit = em_fit(&obs, &support, &EmOptions { accelerate, ..fast() }, 5).unwrap();
            for w in fit.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "{:?}", w);
            }
            assert!(fit.estimate.coef(1).norm() <= 1e-12);
            assert!((fit.loglik - log_likelihood(&obs, &fit.estimate, 64).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_discrete_em_recovers_the_orbit() {
        let theta = theta5();
        let obs = batch(&theta, 1e-3, 400, GroupKind::Discrete, 4);
        let fit = em_fit(&obs, &SupportSet::full(5), &fast(), 2).unwrap();
        let err = orbit_distance(&fit.estimate, &theta, GroupKind::Discrete).unwrap();
        assert!(err < 1e-3, "error {err}");
    }

    #[test]
    fn noiseless_em_recovers_the_orbit() {
        let theta = theta5();
        for group in [GroupKind::Discrete, GroupKind::Continuous] {
            let obs = batch(&theta, 1e-12, 400, group, 4);
            let fit = em_fit(&obs, &SupportSet::full(5), &EmOptions { k_quad: 256, ..fast() }, 2).unwrap();
            let err = orbit_distance(&fit.estimate, &theta, group).unwrap();
            assert!(err <= 1e-6, "{group:?}: error {err}");
        }
    }

    #[test]
    fn noiseless_continuous_em_is_limited_by_the_quadrature() {
        // Each angle snaps to the nearest of K nodes, shrinking harmonic j by
        // about j^2 pi^2 / (6 K^2).
        let theta = theta5();
        let obs = batch(&theta, 1e-12, 400, GroupKind::Continuous, 4);
        let fit = em_fit(&obs, &SupportSet::full(5), &EmOptions { k_quad: 256, ..fast() }, 2).unwrap();
        let err = orbit_distance(&fit.estimate, &theta, GroupKind::Continuous).unwrap();
        assert!(err <= 1e-3, "error {err}");
    }

    #[test]
    fn continuous_em_is_close_at_high_snr() {
        let theta = theta5();
        let obs = batch(&theta, 0.3, 4000, GroupKind::Continuous, 4);
        let fit = em_fit(&obs, &SupportSet::first(2), &EmOptions { k_quad: 256, ..fast() }, 2).unwrap();
        let err = orbit_distance(&fit.estimate, &theta, GroupKind::Continuous).unwrap();
        assert!(err < 0.08, "error {err}");
        assert!(fit.converged);
    }

    #[test]
    fn em_is_deterministic_and_pilot_matches_scale() {
        let obs = batch(&theta5(), 1.0, 3000, GroupKind::Continuous, 21);
        let opts = EmOptions { accelerate: true, pilot: Some(1000), ..fast() };
        let a = em_fit(&obs, &SupportSet::first(2), &opts, 8).unwrap();
        let b = em_fit(&obs, &SupportSet::first(2), &opts, 8).unwrap();
        assert_eq!(a, b);
        let full = em_fit(&obs, &SupportSet::first(2), &EmOptions { pilot: None, ..opts }, 8).unwrap();
        assert!((a.loglik - full.loglik).abs() < 1e-6);
    }

    #[test]
    fn modified_mle_finds_support() {
        let obs = batch(&theta5(), 0.8, 3000, GroupKind::Continuous, 13);
        let fit = modified_mle(&obs, 0.5, &fast(), 1).unwrap();
        assert_eq!(fit.support, SupportSet::first(2));
        assert!(modified_mle(&obs.slice(0..1), 0.5, &fast(), 1).is_err());
    }

    #[test]
    fn small_s_estimators() {
        let theta = Signal::from_coefficients(7, &[(0, Complex64::new(1.2, 0.0)), (1, Complex64::new(0.0, 0.8))]).unwrap();
        let obs = batch(&theta, 0.5, 20000, GroupKind::Continuous, 17);
        let s0 = estimate_s0(&obs).unwrap();
        assert!(s0.support(ZERO_TOL).is_empty());
        assert!((s0.dc() - 1.2).abs() < 0.02);
        let s1 = estimate_s1(&obs, 0.5).unwrap();
        assert!((s1.coef(1).norm() - 0.8).abs() < 0.02);
        assert!(orbit_distance(&s1, &theta, GroupKind::Continuous).unwrap() < 0.05);
        // Below threshold the first harmonic is dropped.
        let flat = batch(&Signal::constant(7, 1.0).unwrap(), 0.5, 2000, GroupKind::Continuous, 2);
        assert_eq!(estimate_s1(&flat, 0.5).unwrap(), estimate_s0(&flat).unwrap());
    }
}
