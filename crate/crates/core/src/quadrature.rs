//! Uniform quadrature over the shift group and the mixture log-density it
//! induces.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::signal::{GroupElement, GroupKind, Signal, ZERO_TOL};

/// Default number of trapezoid nodes on the circle.
pub const DEFAULT_K_QUAD: usize = 256;

/// Minimum number of nodes accepted for the continuous group.
pub const MIN_K_QUAD: usize = 8;

/// Equally spaced group elements `alpha_k = 2 pi k / K`. The discrete group
/// always uses its `L` elements, which makes the average exact.
#[derive(Clone, Debug)]
pub struct CircleQuadrature {
    kind: GroupKind,
    nodes: usize,
    len: usize,
}

impl CircleQuadrature {
    pub fn new(kind: GroupKind, k_quad: usize, len: usize) -> Result<Self> {
        let nodes = match kind {
            GroupKind::Continuous => {
                if k_quad < MIN_K_QUAD {
                    return invalid(format!("K_quad must be at least {MIN_K_QUAD}, got {k_quad}"));
                }
                k_quad
            }
            GroupKind::Discrete => len,
        };
        Ok(CircleQuadrature { kind, nodes, len })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn element(&self, k: usize) -> GroupElement {
        match self.kind {
            GroupKind::Continuous => GroupElement::continuous(TAU * k as f64 / self.nodes as f64),
            GroupKind::Discrete => GroupElement::Discrete { shift: k, len: self.len },
        }
    }

    /// `z_k^j` for every node `k` and each frequency in `freqs`, laid out `[k][f]`.
    pub fn phase_table(&self, freqs: &[usize]) -> Vec<Complex64> {
        let mut table = Vec::with_capacity(self.nodes * freqs.len());
        for k in 0..self.nodes {
            let g = self.element(k);
            table.extend(freqs.iter().map(|&j| g.phase(j as i64)));
        }
        table
    }
}

#[inline]
pub(crate) fn log_sum_exp(a: &[f64]) -> f64 {
    let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + a.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Evaluates `log f_theta(y)` for the quadrature mixture of Gaussians
/// `N(G_k theta, sigma^2 I)`, working on half spectra.
///
/// `log f = -L/2 log(2 pi sigma^2) - (|y|^2 + |theta|^2) / 2 sigma^2
///          + log mean_k exp(<y, G_k theta> / sigma^2)`.
pub(crate) struct MixtureDensity {
    /// Active positive frequencies of theta.
    freqs: Vec<usize>,
    coeffs: Vec<Complex64>,
    table: Vec<Complex64>,
    nodes: usize,
    dc: f64,
    inv_var: f64,
    constant: f64,
}

impl MixtureDensity {
    pub(crate) fn new(theta: &Signal, sigma: f64, quad: &CircleQuadrature) -> Self {
        let freqs: Vec<usize> = (1..=theta.half_len())
            .filter(|&j| theta.coef(j as i64).norm() > ZERO_TOL)
            .collect();
        let coeffs = freqs.iter().map(|&j| theta.coef(j as i64)).collect();
        let var = sigma * sigma;
        let l = theta.len() as f64;
        MixtureDensity {
            table: quad.phase_table(&freqs),
            freqs,
            coeffs,
            nodes: quad.nodes(),
            dc: theta.dc(),
            inv_var: 1.0 / var,
            constant: -0.5 * l * (std::f64::consts::TAU * var).ln() - theta.norm_sq() / (2.0 * var),
        }
    }

    /// Correlations `<y, G_k theta> / sigma^2` for all nodes, written to `out`.
    pub(crate) fn correlations(&self, half_y: &[Complex64], out: &mut [f64]) {
        let base = half_y[0].re * self.dc * self.inv_var;
        let b: Vec<Complex64> = self
            .freqs
            .iter()
            .zip(&self.coeffs)
            .map(|(&j, c)| half_y[j].conj() * c * (2.0 * self.inv_var))
            .collect();
        let f = self.freqs.len();
        for (k, o) in out.iter_mut().enumerate().take(self.nodes) {
            let row = &self.table[k * f..(k + 1) * f];
            let mut acc = base;
            for (t, bj) in row.iter().zip(&b) {
                acc += t.re * bj.re - t.im * bj.im;
            }
            *o = acc;
        }
    }

    /// `log mean_k exp(<y, G_k theta> / sigma^2)`.
    pub(crate) fn log_mean_exp(&self, half_y: &[Complex64], scratch: &mut Vec<f64>) -> f64 {
        scratch.resize(self.nodes, 0.0);
        self.correlations(half_y, scratch);
        log_sum_exp(scratch) - (self.nodes as f64).ln()
    }

    /// Full log-density; `y_norm_sq` is `|y|^2`.
    pub(crate) fn log_density(&self, half_y: &[Complex64], y_norm_sq: f64, scratch: &mut Vec<f64>) -> f64 {
        self.constant - 0.5 * y_norm_sq * self.inv_var + self.log_mean_exp(half_y, scratch)
    }
}

/// `|y|^2` from a half spectrum.
pub(crate) fn half_norm_sq(half: &[Complex64]) -> f64 {
    half[0].re * half[0].re + 2.0 * half[1..].iter().map(|c| c.norm_sqr()).sum::<f64>()
}
