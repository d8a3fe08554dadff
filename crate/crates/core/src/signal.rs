//! Fourier representation of real signals, the shift-group actions, orbit
//! distance, support projection and the signal classes.
//!
//! Conventions: a signal of odd length `L` has coordinates `values[i]` for
//! `i = 0..L`, where `values[i]` is the coordinate at position `i + 1` of the
//! cyclic index set `1..=L`. Its Fourier transform is
//!
//! ```text
//! fourier_j = L^{-1/2} * sum_{k=1}^{L} exp(2 pi i j k / L) * values[k - 1],   |j| <= L/2
//! ```
//!
//! which is unitary. Coefficients are stored for `j = -h..=h` with `h = L / 2`
//! at offset `j + h`. A phase `z = exp(-i alpha)` acts on a signal by
//! multiplying coefficient `j` by `z^j`.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, MraError, Result};
use crate::rng::rng_from_seed;

/// Largest supported signal length.
pub const MAX_LEN: usize = 64;

/// Magnitude below which a Fourier coefficient counts as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Number of grid angles used to bracket the continuous orbit alignment.
pub const ORBIT_GRID: usize = 4096;

fn check_len(l: usize) -> Result<()> {
    if l == 0 || l % 2 == 0 {
        return invalid(format!("signal length must be odd and positive, got {l}"));
    }
    if l > MAX_LEN {
        return invalid(format!("signal length {l} exceeds the supported maximum {MAX_LEN}"));
    }
    Ok(())
}

/// `exp(2 pi i m / l)` for `m = 0..l`.
fn roots_of_unity(l: usize) -> Vec<Complex64> {
    (0..l)
        .map(|m| Complex64::from_polar(1.0, TAU * m as f64 / l as f64))
        .collect()
}

/// Unitary DFT, indexed `j = -h..=h`.
pub fn dft(values: &[f64]) -> Result<Vec<Complex64>> {
    let l = values.len();
    check_len(l)?;
    Ok(dft_unchecked(values))
}

pub(crate) fn dft_unchecked(values: &[f64]) -> Vec<Complex64> {
    let l = values.len();
    let h = (l / 2) as i64;
    let roots = roots_of_unity(l);
    let norm = 1.0 / (l as f64).sqrt();
    (-h..=h)
        .map(|j| {
            let jm = j.rem_euclid(l as i64) as usize;
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &v) in values.iter().enumerate() {
                acc += roots[(jm * (i + 1)) % l] * v;
            }
            acc * norm
        })
        .collect()
}

/// Inverse of [`dft`]. Returns the real part; callers are expected to pass a
/// conjugate-symmetric spectrum.
pub fn idft(fourier: &[Complex64]) -> Result<Vec<f64>> {
    check_len(fourier.len())?;
    Ok(idft_unchecked(fourier))
}

pub(crate) fn idft_unchecked(fourier: &[Complex64]) -> Vec<f64> {
    let l = fourier.len();
    let h = (l / 2) as i64;
    let roots = roots_of_unity(l);
    let norm = 1.0 / (l as f64).sqrt();
    (0..l)
        .map(|i| {
            let mut acc = 0.0;
            for j in -h..=h {
                let jm = (-j).rem_euclid(l as i64) as usize;
                let w = roots[(jm * (i + 1)) % l];
                acc += (w * fourier[(j + h) as usize]).re;
            }
            acc * norm
        })
        .collect()
}

/// Which shift group acts on the signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    /// Phase shifts by the whole circle U(1).
    Continuous,
    /// Cyclic coordinate shifts, i.e. phases restricted to L-th roots of unity.
    Discrete,
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::Continuous => f.write_str("continuous"),
            GroupKind::Discrete => f.write_str("discrete"),
        }
    }
}

impl FromStr for GroupKind {
    type Err = MraError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" => Ok(GroupKind::Continuous),
            "discrete" => Ok(GroupKind::Discrete),
            other => invalid(format!("unknown group kind '{other}'")),
        }
    }
}

/// An element of one of the two shift groups.
///
/// `Continuous { angle }` is the phase `z = exp(-i angle)` with the angle
/// reduced to `[0, 2 pi)`. `Discrete { shift, len }` is the cyclic shift by
/// `shift` positions, equal to `Continuous { angle: 2 pi shift / len }`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroupElement {
    Continuous { angle: f64 },
    Discrete { shift: usize, len: usize },
}

impl GroupElement {
    pub fn continuous(angle: f64) -> Self {
        let mut a = angle.rem_euclid(TAU);
        if a >= TAU {
            a = 0.0;
        }
        GroupElement::Continuous { angle: a }
    }

    pub fn discrete(shift: i64, len: usize) -> Result<Self> {
        check_len(len)?;
        Ok(GroupElement::Discrete {
            shift: shift.rem_euclid(len as i64) as usize,
            len,
        })
    }

    pub fn identity(kind: GroupKind, len: usize) -> Self {
        match kind {
            GroupKind::Continuous => GroupElement::Continuous { angle: 0.0 },
            GroupKind::Discrete => GroupElement::Discrete { shift: 0, len },
        }
    }

    pub fn kind(&self) -> GroupKind {
        match self {
            GroupElement::Continuous { .. } => GroupKind::Continuous,
            GroupElement::Discrete { .. } => GroupKind::Discrete,
        }
    }

    pub fn angle(&self) -> f64 {
        match *self {
            GroupElement::Continuous { angle } => angle,
            GroupElement::Discrete { shift, len } => TAU * shift as f64 / len as f64,
        }
    }

    /// `z^j` with `z = exp(-i angle)`. Discrete elements use exact integer
    /// reduction of the exponent.
    pub fn phase(&self, j: i64) -> Complex64 {
        match *self {
            GroupElement::Continuous { angle } => Complex64::from_polar(1.0, -(j as f64) * angle),
            GroupElement::Discrete { shift, len } => {
                let m = (j * shift as i64).rem_euclid(len as i64);
                Complex64::from_polar(1.0, -TAU * m as f64 / len as f64)
            }
        }
    }

    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        match (*self, *other) {
            (GroupElement::Discrete { shift: a, len }, GroupElement::Discrete { shift: b, len: lb }) => {
                if len != lb {
                    return invalid("cannot compose discrete shifts of different lengths");
                }
                GroupElement::discrete((a + b) as i64, len)
            }
            _ => Ok(GroupElement::continuous(self.angle() + other.angle())),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        match *self {
            GroupElement::Continuous { angle } => GroupElement::continuous(-angle),
            GroupElement::Discrete { shift, len } => GroupElement::Discrete {
                shift: (len - shift) % len,
                len,
            },
        }
    }
}

/// A real signal of odd length together with its unitary DFT.
///
/// Serialized as `{"L": .., "fourier": [{"j": .., "re": .., "im": ..}, ..]}`
/// listing `j = 0..=L/2`; negative indices follow from conjugate symmetry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalJson", into = "SignalJson")]
pub struct Signal {
    values: Vec<f64>,
    fourier: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientJson {
    j: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct SignalJson {
    #[serde(rename = "L")]
    len: usize,
    fourier: Vec<CoefficientJson>,
}

impl From<Signal> for SignalJson {
    fn from(s: Signal) -> Self {
        SignalJson {
            len: s.len(),
            fourier: s
                .half_spectrum()
                .iter()
                .enumerate()
                .map(|(j, c)| CoefficientJson { j, re: c.re, im: c.im })
                .collect(),
        }
    }
}

impl TryFrom<SignalJson> for Signal {
    type Error = MraError;

    fn try_from(json: SignalJson) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &json.fourier {
            if !seen.insert(c.j) {
                return invalid(format!("Fourier index {} listed twice", c.j));
            }
        }
        let coeffs: Vec<(usize, Complex64)> = json
            .fourier
            .iter()
            .map(|c| (c.j, Complex64::new(c.re, c.im)))
            .collect();
        Signal::from_coefficients(json.len, &coeffs)
    }
}

impl Signal {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("signal values must be finite");
        }
        let mut fourier = dft_unchecked(&values);
        let h = values.len() / 2;
        // Enforce exact conjugate symmetry.
        fourier[h].im = 0.0;
        for j in 1..=h {
            fourier[h - j] = fourier[h + j].conj();
        }
        Ok(Signal { values, fourier })
    }

    /// Builds a signal from coefficients `j = 0..half.len()`; the remaining
    /// nonnegative coefficients are zero and negative ones follow from
    /// conjugate symmetry.
    pub fn from_half_spectrum(len: usize, half: &[Complex64]) -> Result<Self> {
        check_len(len)?;
        let h = len / 2;
        if half.len() > h + 1 {
            return invalid(format!("{} coefficients given for length {len}", half.len()));
        }
        if half.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return invalid("Fourier coefficients must be finite");
        }
        if let Some(dc) = half.first() {
            if dc.im.abs() > ZERO_TOL {
                return invalid("coefficient 0 of a real signal must be real");
            }
        }
        let mut fourier = vec![Complex64::new(0.0, 0.0); len];
        for (j, &c) in half.iter().enumerate() {
            fourier[h + j] = c;
            fourier[h - j] = c.conj();
        }
        fourier[h].im = 0.0;
        let values = idft_unchecked(&fourier);
        Ok(Signal { values, fourier })
    }

    /// Builds a signal from `(j, coefficient)` pairs with `j >= 0`.
    pub fn from_coefficients(len: usize, coeffs: &[(usize, Complex64)]) -> Result<Self> {
        check_len(len)?;
        let h = len / 2;
        let mut half = vec![Complex64::new(0.0, 0.0); h + 1];
        for &(j, c) in coeffs {
            if j > h {
                return invalid(format!("Fourier index {j} out of range for length {len}"));
            }
            half[j] = c;
        }
        Signal::from_half_spectrum(len, &half)
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Signal::from_values(vec![0.0; len])
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Signal::from_values(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `L / 2`, the largest Fourier index.
    pub fn half_len(&self) -> usize {
        self.values.len() / 2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Full spectrum, offset by `half_len()`.
    pub fn fourier(&self) -> &[Complex64] {
        &self.fourier
    }

    /// Coefficient `j` for `|j| <= L/2`.
    pub fn coef(&self, j: i64) -> Complex64 {
        self.fourier[(j + self.half_len() as i64) as usize]
    }

    /// Coefficients `j = 0..=L/2`.
    pub fn half_spectrum(&self) -> &[Complex64] {
        &self.fourier[self.half_len()..]
    }

    pub fn dc(&self) -> f64 {
        self.fourier[self.half_len()].re
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Positive support `{j >= 1 : |coef(j)| > tol}`.
    pub fn support(&self, tol: f64) -> SupportSet {
        SupportSet {
            indices: (1..=self.half_len())
                .filter(|&j| self.coef(j as i64).norm() > tol)
                .collect(),
        }
    }

    /// Applies `f(j, coef_j)` to every `j >= 0` and mirrors the result.
    pub fn map_spectrum(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Signal {
        let half: Vec<Complex64> = self
            .half_spectrum()
            .iter()
            .enumerate()
            .map(|(j, &c)| f(j, c))
            .collect();
        let mut half = half;
        half[0].im = 0.0;
        Signal::from_half_spectrum(self.len(), &half).expect("length already validated")
    }

    /// The signal with coefficient 0 removed, `theta - E[G theta]`.
    pub fn centered(&self) -> Signal {
        self.map_spectrum(|j, c| if j == 0 { Complex64::new(0.0, 0.0) } else { c })
    }

    pub fn scaled(&self, factor: f64) -> Signal {
        self.map_spectrum(|_, c| c * factor)
    }

    pub fn distance(&self, other: &Signal) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Applies a group element: coefficient `j` is multiplied by `z^j`.
pub fn apply_shift(theta: &Signal, g: &GroupElement) -> Result<Signal> {
    if let GroupElement::Discrete { len, shift } = *g {
        if len != theta.len() {
            return invalid(format!(
                "discrete shift for length {len} applied to a signal of length {}",
                theta.len()
            ));
        }
        // Exact coordinate rotation; equals the phase action with z = exp(-2 pi i shift / L).
        let l = theta.len();
        let values: Vec<f64> = (0..l).map(|i| theta.values[(i + shift) % l]).collect();
        let fourier = theta
            .fourier
            .iter()
            .enumerate()
            .map(|(idx, &c)| c * g.phase(idx as i64 - theta.half_len() as i64))
            .collect();
        return Ok(Signal { values, fourier });
    }
    Ok(theta.map_spectrum(|j, c| c * g.phase(j as i64)))
}

/// Result of aligning one signal to the orbit of another.
#[derive(Clone, Copy, Debug)]
pub struct Alignment {
    /// `min_g ||theta - g phi||`.
    pub distance: f64,
    /// A minimizing group element.
    pub element: GroupElement,
}

/// Orbit distance `rho(theta, phi) = min_g ||theta - g phi||`.
pub fn orbit_distance(theta: &Signal, phi: &Signal, group: GroupKind) -> Result<f64> {
    Ok(orbit_align(theta, phi, group)?.distance)
}

/// Orbit distance together with a minimizing group element.
pub fn orbit_align(theta: &Signal, phi: &Signal, group: GroupKind) -> Result<Alignment> {
    if theta.len() != phi.len() {
        return invalid(format!(
            "orbit distance between signals of lengths {} and {}",
            theta.len(),
            phi.len()
        ));
    }
    match group {
        GroupKind::Discrete => Ok(discrete_align(theta, phi)),
        GroupKind::Continuous => Ok(continuous_align(theta, phi)),
    }
}

fn discrete_align(theta: &Signal, phi: &Signal) -> Alignment {
    let l = theta.len();
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..l {
        let d2: f64 = (0..l)
            .map(|i| {
                let d = theta.values[i] - phi.values[(i + k) % l];
                d * d
            })
            .sum();
        if d2 < best.0 {
            best = (d2, k);
        }
    }
    Alignment {
        distance: best.0.sqrt(),
        element: GroupElement::Discrete { shift: best.1, len: l },
    }
}

/// The correlation `Re <theta, G_alpha phi>` as a trigonometric polynomial.
struct Correlation {
    /// `conj(theta_j) * phi_j` for `j = 0..=h`.
    b: Vec<Complex64>,
}

impl Correlation {
    fn value(&self, alpha: f64) -> f64 {
        let step = Complex64::from_polar(1.0, -alpha);
        let mut z = Complex64::new(1.0, 0.0);
        let mut acc = self.b[0].re;
        for bj in &self.b[1..] {
            z *= step;
            acc += 2.0 * (bj * z).re;
        }
        acc
    }

    /// First and second derivatives in alpha.
    fn derivatives(&self, alpha: f64) -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (j, bj) in self.b.iter().enumerate().skip(1) {
            let t = bj * Complex64::from_polar(1.0, -(j as f64) * alpha);
            let jf = j as f64;
            d1 += 2.0 * jf * t.im;
            d2 -= 2.0 * jf * jf * t.re;
        }
        (d1, d2)
    }
}

fn shifted_distance_sq(theta: &Signal, phi: &Signal, alpha: f64) -> f64 {
    let t = theta.half_spectrum();
    let p = phi.half_spectrum();
    let mut acc = (t[0] - p[0]).norm_sqr();
    for j in 1..t.len() {
        let z = Complex64::from_polar(1.0, -(j as f64) * alpha);
        acc += 2.0 * (t[j] - z * p[j]).norm_sqr();
    }
    acc
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

fn continuous_align(theta: &Signal, phi: &Signal) -> Alignment {
    let corr = Correlation {
        b: theta
            .half_spectrum()
            .iter()
            .zip(phi.half_spectrum())
            .map(|(t, p)| t.conj() * p)
            .collect(),
    };
    let identity = Alignment {
        distance: theta.distance(phi),
        element: GroupElement::continuous(0.0),
    };
    let curvature: f64 = corr
        .b
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, b)| 2.0 * (j * j) as f64 * b.norm())
        .sum();
    if curvature <= f64::MIN_POSITIVE {
        return identity;
    }

    let step = TAU / ORBIT_GRID as f64;
    let grid: Vec<f64> = (0..ORBIT_GRID).map(|n| corr.value(n as f64 * step)).collect();
    let gmax = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Any basin whose peak beats the best grid value has a grid point within
    // curvature * step^2 / 2 of that peak.
    let margin = curvature * step * step;
    let mut candidates: Vec<usize> = (0..ORBIT_GRID)
        .filter(|&n| {
            let prev = grid[(n + ORBIT_GRID - 1) % ORBIT_GRID];
            let next = grid[(n + 1) % ORBIT_GRID];
            grid[n] >= prev && grid[n] >= next && grid[n] >= gmax - margin
        })
        .collect();
    candidates.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]).then(a.cmp(&b)));
    candidates.truncate(16);

    let mut best = identity;
    let mut best_sq = best.distance * best.distance;
    for n in candidates {
        let centre = n as f64 * step;
        let (lo, hi) = (centre - step, centre + step);
        let mut alpha = golden_max(|a| corr.value(a), lo, hi, 1e-12);
        // Newton polish on the derivative; golden section alone stalls near
        // sqrt(machine epsilon) because the peak is flat.
        for _ in 0..4 {
            let (d1, d2) = corr.derivatives(alpha);
            if d2 >= 0.0 {
                break;
            }
            let next = alpha - d1 / d2;
            if !(lo..=hi).contains(&next) {
                break;
            }
            alpha = next;
        }
        let d2 = shifted_distance_sq(theta, phi, alpha);
        if d2 < best_sq {
            best_sq = d2;
            best = Alignment {
                distance: d2.max(0.0).sqrt(),
                element: GroupElement::continuous(alpha),
            };
        }
    }
    best
}

/// A set of positive Fourier indices `S ⊂ {1, ..., L/2}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet {
    indices: BTreeSet<usize>,
}

impl SupportSet {
    pub fn new(indices: impl IntoIterator<Item = usize>, len: usize) -> Result<Self> {
        check_len(len)?;
        let h = len / 2;
        let indices: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = indices.iter().find(|&&j| j == 0 || j > h) {
            return invalid(format!("support index {bad} outside 1..={h}"));
        }
        Ok(SupportSet { indices })
    }

    pub fn empty() -> Self {
        SupportSet::default()
    }

    /// `{1, ..., L/2}`.
    pub fn full(len: usize) -> Self {
        SupportSet {
            indices: (1..=len / 2).collect(),
        }
    }

    /// `{1, ..., s}`.
    pub fn first(s: usize) -> Self {
        SupportSet {
            indices: (1..=s).collect(),
        }
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.contains(&j)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn max(&self) -> Option<usize> {
        self.indices.iter().next_back().copied()
    }

    pub fn is_subset(&self, other: &SupportSet) -> bool {
        self.indices.is_subset(&other.indices)
    }

    pub fn fits(&self, len: usize) -> bool {
        self.max().is_none_or(|m| m <= len / 2)
    }
}

/// Orthogonal projection keeping coefficients on `S ∪ -S ∪ {0}`.
pub fn project_support(phi: &Signal, support: &SupportSet) -> Result<Signal> {
    if !support.fits(phi.len()) {
        return invalid(format!("support {:?} does not fit length {}", support, phi.len()));
    }
    Ok(phi.map_spectrum(|j, c| {
        if j == 0 || support.contains(j) {
            c
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// Parameters of the signal class: support inside `{1..s}`, nonzero
/// coefficients at least `c0` in modulus, norm within `[1/c, c]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalClassParams {
    pub s: usize,
    pub c0: f64,
    pub c: f64,
}

impl SignalClassParams {
    pub const DEFAULT_C: f64 = 2.0;
    pub const DEFAULT_C0: f64 = 0.25;

    pub fn new(s: usize, c0: f64, c: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return invalid(format!("c0 must be positive, got {c0}"));
        }
        if !(c > 1.0 && c.is_finite()) {
            return invalid(format!("c must exceed 1, got {c}"));
        }
        Ok(SignalClassParams { s, c0, c })
    }

    pub fn with_defaults(s: usize) -> Self {
        SignalClassParams {
            s,
            c0: Self::DEFAULT_C0,
            c: Self::DEFAULT_C,
        }
    }

    fn check_for(&self, len: usize) -> Result<()> {
        check_len(len)?;
        SignalClassParams::new(self.s, self.c0, self.c)?;
        if self.s > len / 2 {
            return invalid(format!("s = {} exceeds L/2 = {}", self.s, len / 2));
        }
        Ok(())
    }
}

/// Outcome of [`validate_class`], one flag per condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub norm: f64,
    pub norm_ok: bool,
    pub support: SupportSet,
    pub support_ok: bool,
    /// Smallest modulus over the positive support, if nonempty.
    pub min_modulus: Option<f64>,
    pub min_modulus_ok: bool,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.norm_ok && self.support_ok && self.min_modulus_ok
    }
}

pub fn validate_class(theta: &Signal, params: &SignalClassParams) -> ValidationReport {
    let norm = theta.norm();
    let norm_ok = norm >= 1.0 / params.c - ZERO_TOL && norm <= params.c + ZERO_TOL;
    let support = theta.support(ZERO_TOL);
    let support_ok = support.max().is_none_or(|m| m <= params.s);
    let min_modulus = support
        .iter()
        .map(|j| theta.coef(j as i64).norm())
        .min_by(f64::total_cmp);
    let min_modulus_ok = min_modulus.is_none_or(|m| m >= params.c0 - ZERO_TOL);
    ValidationReport {
        norm,
        norm_ok,
        support,
        support_ok,
        min_modulus,
        min_modulus_ok,
    }
}

/// Draws a signal from the class with support exactly `{1..s}`.
///
/// The squared norm is uniform on `[max(1/c, sqrt(2s) c0)^2, c^2]`; the excess
/// over the minimal energy `2 s c0^2` is split at random between the
/// coefficient 0 and the `s` moduli. Phases are uniform.
pub fn random_signal(params: &SignalClassParams, len: usize, seed: u64) -> Result<Signal> {
    params.check_for(len)?;
    let s = params.s;
    let min_energy = 2.0 * s as f64 * params.c0 * params.c0;
    let lo = (1.0 / params.c).max(min_energy.sqrt());
    let hi = params.c;
    if lo > hi {
        return invalid(format!(
            "class T_{s} with c0 = {} and c = {} is empty (needs 2 s c0^2 <= c^2)",
            params.c0, params.c
        ));
    }
    let mut rng = rng_from_seed(seed);
    let target = rng.random_range(lo * lo..=hi * hi);
    let excess = (target - min_energy).max(0.0);
    let weights: Vec<f64> = (0..=s).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut half = vec![Complex64::new(0.0, 0.0); len / 2 + 1];
    let dc = (weights[0] / total * excess).sqrt();
    half[0] = Complex64::new(if rng.random::<bool>() { dc } else { -dc }, 0.0);
    for j in 1..=s {
        let modulus = (params.c0 * params.c0 + weights[j] / total * excess / 2.0).sqrt();
        let phase = rng.random_range(-PI..PI);
        half[j] = Complex64::from_polar(modulus, phase);
    }
    Signal::from_half_spectrum(len, &half)
}
