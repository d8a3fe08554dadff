//! Invariant moment tensors `E[(G theta)^{⊗m}]`, their differences, moment
//! matched signal pairs and unbiased Hermite moment estimation.
//!
//! In the Fourier basis the order-`m` moment tensor has entry
//! `theta_{j1} ... theta_{jm}` at every multi-index whose sum vanishes
//! (continuous group) or vanishes modulo `L` (discrete group), and zero
//! elsewhere. Tensors are stored sparsely by sorted multi-index; norms weight
//! each sorted key by the number of distinct orderings it stands for.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, MraError, Result};
use crate::model::Observations;
use crate::signal::{GroupKind, Signal, ZERO_TOL};

/// Upper limit on `(2 |supp| + 1)^m` before enumeration is refused.
pub const MAX_ENUMERATION: f64 = 1e8;

/// Largest order supported by the dense Hermite estimator.
pub const MAX_HERMITE_ORDER: usize = 3;

/// Serialized as `{"m", "L", "group", "entries": [{"idx", "re", "im"}]}` with
/// one entry per sorted multi-index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorJson", into = "TensorJson")]
pub struct MomentTensor {
    pub order: usize,
    pub len: usize,
    pub group: GroupKind,
    /// Sorted multi-index to value; only zero-sum indices are present.
    pub entries: BTreeMap<Vec<i64>, Complex64>,
    /// Hilbert-Schmidt norm squared over all ordered multi-indices.
    pub hs_norm_sq: f64,
}

/// Number of distinct orderings of a sorted multi-index.
pub fn multiplicity(key: &[i64]) -> f64 {
    let mut result: f64 = 1.0;
    let mut position = 0.0;
    let mut run = 0.0;
    for (i, k) in key.iter().enumerate() {
        position += 1.0;
        if i > 0 && key[i - 1] == *k {
            run += 1.0;
        } else {
            run = 1.0;
        }
        result *= position / run;
    }
    result.round()
}

fn zero_sum(sum: i64, group: GroupKind, len: usize) -> bool {
    match group {
        GroupKind::Continuous => sum == 0,
        GroupKind::Discrete => sum.rem_euclid(len as i64) == 0,
    }
}

struct Enumerator<'a> {
    indices: &'a [i64],
    values: &'a [Complex64],
    order: usize,
    group: GroupKind,
    len: usize,
    out: BTreeMap<Vec<i64>, Complex64>,
}

impl Enumerator<'_> {
    fn walk(&mut self, start: usize, key: &mut Vec<i64>, sum: i64, product: Complex64) {
        let remaining = self.order - key.len();
        if remaining == 0 {
            if zero_sum(sum, self.group, self.len) {
                self.out.insert(key.clone(), product);
            }
            return;
        }
        let max = *self.indices.last().expect("nonempty index set");
        for pos in start..self.indices.len() {
            let j = self.indices[pos];
            if self.group == GroupKind::Continuous {
                let r = remaining as i64;
                // Remaining entries lie in [j, max]; the total must reach zero.
                if sum + r * j > 0 {
                    break;
                }
                if sum + r * max < 0 {
                    continue;
                }
            }
            key.push(j);
            self.walk(pos, key, sum + j, product * self.values[pos]);
            key.pop();
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    idx: Vec<i64>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    m: usize,
    #[serde(rename = "L")]
    len: usize,
    group: GroupKind,
    entries: Vec<EntryJson>,
}

impl From<MomentTensor> for TensorJson {
    fn from(t: MomentTensor) -> Self {
        TensorJson {
            m: t.order,
            len: t.len,
            group: t.group,
            entries: t
                .entries
                .into_iter()
                .map(|(idx, v)| EntryJson { idx, re: v.re, im: v.im })
                .collect(),
        }
    }
}

impl TryFrom<TensorJson> for MomentTensor {
    type Error = MraError;

    fn try_from(json: TensorJson) -> Result<Self> {
        let h = (json.len / 2) as i64;
        let mut entries = BTreeMap::new();
        for e in json.entries {
            if e.idx.len() != json.m || e.idx.iter().any(|j| j.abs() > h) {
                return invalid(format!("tensor index {:?} does not fit m = {}, L = {}", e.idx, json.m, json.len));
            }
            let mut key = e.idx;
            key.sort_unstable();
            if entries.insert(key, Complex64::new(e.re, e.im)).is_some() {
                return invalid("duplicate tensor index");
            }
        }
        let mut t = MomentTensor {
            order: json.m,
            len: json.len,
            group: json.group,
            entries,
            hs_norm_sq: 0.0,
        };
        t.hs_norm_sq = t.recompute_norm_sq();
        Ok(t)
    }
}

/// The exact order-`m` moment tensor of `theta` in the Fourier basis.
pub fn moment_tensor(theta: &Signal, order: usize, group: GroupKind) -> Result<MomentTensor> {
    if order == 0 {
        return invalid("moment order must be at least 1");
    }
    let h = theta.half_len() as i64;
    let (indices, values): (Vec<i64>, Vec<Complex64>) = (-h..=h)
        .map(|j| (j, theta.coef(j)))
        .filter(|(_, c)| c.norm() > ZERO_TOL)
        .unzip();
    let support = indices.iter().filter(|&&j| j > 0).count();
    let size = (2.0 * support as f64 + 1.0).powi(order as i32);
    if size > MAX_ENUMERATION {
        return Err(MraError::ResourceLimit(format!(
            "order-{order} tensor over {support} positive frequencies needs {size:.3e} > {MAX_ENUMERATION:.0e} evaluations"
        )));
    }
    let mut entries = BTreeMap::new();
    if !indices.is_empty() {
        let mut e = Enumerator {
            indices: &indices,
            values: &values,
            order,
            group,
            len: theta.len(),
            out: BTreeMap::new(),
        };
        e.walk(0, &mut Vec::with_capacity(order), 0, Complex64::new(1.0, 0.0));
        entries = e.out;
    }
    let hs_norm_sq = entries.iter().map(|(k, v)| multiplicity(k) * v.norm_sqr()).sum();
    Ok(MomentTensor {
        order,
        len: theta.len(),
        group,
        entries,
        hs_norm_sq,
    })
}

impl MomentTensor {
    pub fn get(&self, key: &[i64]) -> Complex64 {
        let mut sorted = key.to_vec();
        sorted.sort_unstable();
        self.entries.get(&sorted).copied().unwrap_or_default()
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq.sqrt()
    }

    /// Weighted recomputation of the squared norm from the entries.
    pub fn recompute_norm_sq(&self) -> f64 {
        self.entries.iter().map(|(k, v)| multiplicity(k) * v.norm_sqr()).sum()
    }

    /// Dense Fourier-domain tensor over ordered multi-indices; index `j`
    /// sits at offset `j + L/2` along every mode.
    pub fn to_dense_fourier(&self) -> ComplexDenseTensor {
        let l = self.len;
        let h = (l / 2) as i64;
        let mut data = vec![Complex64::new(0.0, 0.0); l.pow(self.order as u32)];
        for (key, value) in &self.entries {
            let mut perm: Vec<usize> = key.iter().map(|&j| (j + h) as usize).collect();
            // Visit every distinct ordering of the sorted key.
            loop {
                let flat = perm.iter().fold(0, |acc, &p| acc * l + p);
                data[flat] = *value;
                if !next_permutation(&mut perm) {
                    break;
                }
            }
        }
        ComplexDenseTensor {
            order: self.order,
            dim: l,
            data,
        }
    }

    /// Dense signal-domain tensor `E[(G theta)^{⊗m}]`.
    pub fn to_dense_values(&self) -> DenseTensor {
        let mut t = self.to_dense_fourier();
        let inv = inverse_dft_matrix(self.len);
        for mode in 0..self.order {
            t.apply_mode(mode, &inv);
        }
        DenseTensor {
            order: self.order,
            dim: self.len,
            data: t.data.iter().map(|c| c.re).collect(),
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// `||moment_tensor(theta, m) - moment_tensor(phi, m)||` in Hilbert-Schmidt norm.
pub fn delta_norm(theta: &Signal, phi: &Signal, order: usize, group: GroupKind) -> Result<f64> {
    if theta.len() != phi.len() {
        return invalid("delta_norm needs signals of equal length");
    }
    let a = moment_tensor(theta, order, group)?;
    let b = moment_tensor(phi, order, group)?;
    Ok(tensor_distance_sq(&a, &b).sqrt())
}

pub fn tensor_distance_sq(a: &MomentTensor, b: &MomentTensor) -> f64 {
    let mut total = 0.0;
    for (k, va) in &a.entries {
        let vb = b.entries.get(k).copied().unwrap_or_default();
        total += multiplicity(k) * (va - vb).norm_sqr();
    }
    for (k, vb) in &b.entries {
        if !a.entries.contains_key(k) {
            total += multiplicity(k) * vb.norm_sqr();
        }
    }
    total
}

/// Two signals supported on `±(s-1), ±s` with all moduli `r`, differing only
/// by the phase `exp(i delta)` on coefficient `s`. Returns `(theta, phi)`;
/// their moment tensors agree through order `2s - 2`.
pub fn matched_pair_continuous(len: usize, s: usize, delta: f64, modulus: f64) -> Result<(Signal, Signal)> {
    if s < 2 || s > len / 2 {
        return invalid(format!("s = {s} outside 2..={}", len / 2));
    }
    if !(delta.abs() <= PI) {
        return invalid(format!("phase {delta} outside [-pi, pi]"));
    }
    if !(modulus > 0.0 && modulus.is_finite()) {
        return invalid("modulus must be positive");
    }
    let r = Complex64::new(modulus, 0.0);
    let phi = Signal::from_coefficients(len, &[(s - 1, r), (s, r)])?;
    let theta = Signal::from_coefficients(len, &[(s - 1, r), (s, Complex64::from_polar(modulus, delta))])?;
    Ok((theta, phi))
}

/// Pure harmonics `phi_{±1} = 1`, `theta_{±1} = exp(±i delta)`. Returns
/// `(theta, phi)`; their discrete moment tensors agree through order `L - 1`.
pub fn matched_pair_discrete(len: usize, delta: f64) -> Result<(Signal, Signal)> {
    if len < 3 || len % 2 == 0 {
        return invalid(format!("L must be odd and at least 3, got {len}"));
    }
    if !(delta.abs() < PI / len as f64) {
        return invalid(format!("|delta| must be below pi/L = {}", PI / len as f64));
    }
    let phi = Signal::from_coefficients(len, &[(1, Complex64::new(1.0, 0.0))])?;
    let theta = Signal::from_coefficients(len, &[(1, Complex64::from_polar(1.0, delta))])?;
    Ok((theta, phi))
}

/// Dense real tensor of order `order` over `dim` coordinates, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    pub order: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(order: usize, dim: usize) -> Self {
        DenseTensor {
            order,
            dim,
            data: vec![0.0; dim.pow(order as u32)],
        }
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[index.iter().fold(0, |acc, &i| acc * self.dim + i)]
    }

    pub fn hs_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Change of basis to Fourier coordinates along every mode.
    pub fn to_fourier(&self) -> ComplexDenseTensor {
        let mut t = ComplexDenseTensor {
            order: self.order,
            dim: self.dim,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        };
        let fwd = forward_dft_matrix(self.dim);
        for mode in 0..self.order {
            t.apply_mode(mode, &fwd);
        }
        t
    }
}

/// Dense complex tensor, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexDenseTensor {
    pub order: usize,
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl ComplexDenseTensor {
    pub fn hs_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Multiplies mode `mode` by the `dim x dim` row-major matrix `m`.
    fn apply_mode(&mut self, mode: usize, m: &[Complex64]) {
        let d = self.dim;
        let inner = d.pow((self.order - mode - 1) as u32);
        let outer = d.pow(mode as u32);
        let mut scratch = vec![Complex64::new(0.0, 0.0); d];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * d * inner + i;
                for (r, s) in scratch.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in 0..d {
                        acc += m[r * d + c] * self.data[base + c * inner];
                    }
                    *s = acc;
                }
                for (r, s) in scratch.iter().enumerate() {
                    self.data[base + r * inner] = *s;
                }
            }
        }
    }
}

/// Rows indexed by `j + h`, columns by coordinate.
fn forward_dft_matrix(l: usize) -> Vec<Complex64> {
    let h = (l / 2) as i64;
    let norm = 1.0 / (l as f64).sqrt();
    let mut m = Vec::with_capacity(l * l);
    for j in -h..=h {
        for i in 0..l {
            let e = (j * (i as i64 + 1)).rem_euclid(l as i64);
            m.push(Complex64::from_polar(norm, TAU * e as f64 / l as f64));
        }
    }
    m
}

/// Rows indexed by coordinate, columns by `j + h`.
fn inverse_dft_matrix(l: usize) -> Vec<Complex64> {
    let h = (l / 2) as i64;
    let norm = 1.0 / (l as f64).sqrt();
    let mut m = Vec::with_capacity(l * l);
    for i in 0..l {
        for j in -h..=h {
            let e = (j * (i as i64 + 1)).rem_euclid(l as i64);
            m.push(Complex64::from_polar(norm, -TAU * e as f64 / l as f64));
        }
    }
    m
}

/// Sample mean and per-entry standard error of the Hermite tensors.
#[derive(Clone, Debug)]
pub struct HermiteEstimate {
    pub mean: DenseTensor,
    pub stderr: DenseTensor,
    pub n: usize,
}

/// `(1/n) sum_i H_m(Y_i)` where entry `(i_1..i_m)` of `H_m(y)` is
/// `prod_l sigma^{a_l} He_{a_l}(y_l / sigma)` for the multiplicities `a_l` of
/// each coordinate in the index. Unbiased for `E[(G theta)^{⊗m}]`.
pub fn hermite_moment_estimate(obs: &Observations, order: usize) -> Result<HermiteEstimate> {
    if order == 0 {
        return invalid("moment order must be at least 1");
    }
    if order > MAX_HERMITE_ORDER {
        return Err(MraError::Unsupported(format!(
            "dense Hermite estimates are limited to order {MAX_HERMITE_ORDER}"
        )));
    }
    let n = obs.n();
    if n == 0 {
        return invalid("Hermite estimate of an empty batch");
    }
    let dim = obs.len();
    let var = obs.sigma() * obs.sigma();
    let size = dim.pow(order as u32);
    // Multiplicity pattern of every flat index.
    let patterns: Vec<Vec<(usize, usize)>> = (0..size)
        .map(|flat| {
            let mut counts = vec![0usize; dim];
            let mut f = flat;
            for _ in 0..order {
                counts[f % dim] += 1;
                f /= dim;
            }
            counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(l, &c)| (l, c)).collect()
        })
        .collect();
    let mut sum = vec![0.0; size];
    let mut sum_sq = vec![0.0; size];
    // scaled Hermite polynomials P_k(y) = sigma^k He_k(y / sigma), k = 0..=order
    let mut herm = vec![0.0; dim * (order + 1)];
    for row in obs.rows() {
        for (l, &y) in row.iter().enumerate() {
            let p = &mut herm[l * (order + 1)..(l + 1) * (order + 1)];
            p[0] = 1.0;
            p[1] = y;
            for k in 1..order {
                p[k + 1] = y * p[k] - k as f64 * var * p[k - 1];
            }
        }
        for (flat, pattern) in patterns.iter().enumerate() {
            let v: f64 = pattern.iter().map(|&(l, c)| herm[l * (order + 1) + c]).product();
            sum[flat] += v;
            sum_sq[flat] += v * v;
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let stderr: Vec<f64> = sum_sq
        .iter()
        .zip(&mean)
        .map(|(ss, m)| {
            if n < 2 {
                return f64::INFINITY;
            }
            let var = ((ss - nf * m * m) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        })
        .collect();
    Ok(HermiteEstimate {
        mean: DenseTensor { order, dim, data: mean },
        stderr: DenseTensor { order, dim, data: stderr },
        n,
    })
}
