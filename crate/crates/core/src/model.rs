//! Observation model `Y = G theta + sigma xi` with `G` uniform on the group.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{rng_from_seed, std_normal};
use crate::signal::{dft_unchecked, GroupElement, GroupKind, Signal, MAX_LEN};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(rename = "L")]
    pub len: usize,
    pub sigma: f64,
    pub group: GroupKind,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(len: usize, sigma: f64, group: GroupKind, seed: u64) -> Result<Self> {
        let cfg = ModelConfig { len, sigma, group, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.len == 0 || self.len % 2 == 0 || self.len > MAX_LEN {
            return invalid(format!("L must be odd in 1..={MAX_LEN}, got {}", self.len));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return invalid(format!("sigma must be positive, got {}", self.sigma));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ModelConfig { seed, ..*self }
    }
}

/// Noisy observations without the latent shifts that produced them.
///
/// Estimators only ever receive this type, so they cannot read the shifts.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    config: ModelConfig,
    /// Row-major `n x L`.
    data: Vec<f64>,
}

impl Observations {
    pub fn new(config: ModelConfig, rows: Vec<Vec<f64>>) -> Result<Self> {
        config.validate()?;
        let mut data = Vec::with_capacity(rows.len() * config.len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != config.len {
                return invalid(format!("row {i} has {} entries, expected {}", row.len(), config.len));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return invalid(format!("row {i} contains a non-finite value"));
            }
            data.extend_from_slice(row);
        }
        Ok(Observations { config, data })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.config.len
    }

    pub fn sigma(&self) -> f64 {
        self.config.sigma
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.config.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.config.len..(i + 1) * self.config.len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.config.len)
    }

    /// Rows `range`, keeping the configuration.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Observations {
        let l = self.config.len;
        Observations {
            config: self.config,
            data: self.data[range.start * l..range.end * l].to_vec(),
        }
    }

    /// Coefficients `j = 0..=L/2` of every row, row-major `n x (L/2 + 1)`.
    pub fn half_spectra(&self) -> Vec<Complex64> {
        let h = self.config.len / 2;
        let mut out = Vec::with_capacity(self.n() * (h + 1));
        for row in self.rows() {
            out.extend_from_slice(&dft_unchecked(row)[h..]);
        }
        out
    }

    /// Applies an independent uniform group element to every row.
    pub fn rerandomized(&self, seed: u64) -> Observations {
        let mut rng = rng_from_seed(seed);
        let l = self.config.len;
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.rows() {
            let s = Signal::from_values(row.to_vec()).expect("validated row");
            let g = draw_element(&mut rng, self.config.group, l);
            data.extend_from_slice(crate::signal::apply_shift(&s, &g).expect("same length").values());
        }
        Observations { config: self.config, data }
    }
}

/// A simulated batch: observations plus the latent shifts, kept for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    observations: Observations,
    latent_shifts: Vec<GroupElement>,
}

impl SampleBatch {
    pub fn observations(&self) -> &Observations {
        &self.observations
    }

    pub fn into_observations(self) -> Observations {
        self.observations
    }

    pub fn latent_shifts(&self) -> &[GroupElement] {
        &self.latent_shifts
    }

    pub fn config(&self) -> &ModelConfig {
        self.observations.config()
    }

    pub fn n(&self) -> usize {
        self.observations.n()
    }
}

pub(crate) fn draw_element<R: Rng + ?Sized>(rng: &mut R, group: GroupKind, len: usize) -> GroupElement {
    match group {
        GroupKind::Continuous => GroupElement::continuous(rng.random_range(0.0..TAU)),
        GroupKind::Discrete => GroupElement::Discrete {
            shift: rng.random_range(0..len),
            len,
        },
    }
}

/// Precomputed inverse-DFT kernel for evaluating `G theta` row by row.
pub(crate) struct ShiftKernel {
    half: Vec<Complex64>,
    /// `exp(-2 pi i j (k + 1) / L) / sqrt(L)` laid out `[k][j]`, `j = 1..=h`.
    basis: Vec<Complex64>,
    dc: f64,
    len: usize,
}

impl ShiftKernel {
    pub(crate) fn new(theta: &Signal) -> Self {
        let l = theta.len();
        let h = l / 2;
        let norm = 1.0 / (l as f64).sqrt();
        let mut basis = Vec::with_capacity(l * h);
        for k in 0..l {
            for j in 1..=h {
                let m = (j * (k + 1)) % l;
                basis.push(Complex64::from_polar(norm, -TAU * m as f64 / l as f64));
            }
        }
        ShiftKernel {
            half: theta.half_spectrum().to_vec(),
            basis,
            dc: theta.dc() * norm,
            len: l,
        }
    }

    pub(crate) fn write(&self, g: &GroupElement, out: &mut [f64]) {
        let h = self.len / 2;
        let shifted: Vec<Complex64> = (1..=h).map(|j| self.half[j] * g.phase(j as i64)).collect();
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.basis[k * h..(k + 1) * h];
            let mut acc = 0.0;
            for (b, c) in row.iter().zip(&shifted) {
                acc += (b * c).re;
            }
            *o = self.dc + 2.0 * acc;
        }
    }
}

/// Draws `n` observations `G_i theta + sigma xi_i`, deterministic in `config.seed`.
pub fn sample(theta: &Signal, config: &ModelConfig, n: usize) -> Result<SampleBatch> {
    config.validate()?;
    if theta.len() != config.len {
        return invalid(format!("signal length {} does not match L = {}", theta.len(), config.len));
    }
    let l = config.len;
    let kernel = ShiftKernel::new(theta);
    let mut rng = rng_from_seed(config.seed);
    let mut data = vec![0.0; n * l];
    let mut latent_shifts = Vec::with_capacity(n);
    for row in data.chunks_exact_mut(l) {
        let g = draw_element(&mut rng, config.group, l);
        kernel.write(&g, row);
        for v in row.iter_mut() {
            *v += config.sigma * std_normal(&mut rng);
        }
        latent_shifts.push(g);
    }
    Ok(SampleBatch {
        observations: Observations { config: *config, data },
        latent_shifts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{apply_shift, orbit_distance, random_signal, SignalClassParams};

    #[test]
    fn kernel_matches_apply_shift() {
        let theta = random_signal(&SignalClassParams::with_defaults(3), 7, 11).unwrap();
        let kernel = ShiftKernel::new(&theta);
        let mut out = vec![0.0; 7];
        for g in [GroupElement::continuous(1.1), GroupElement::discrete(2, 7).unwrap()] {
            kernel.write(&g, &mut out);
            let direct = apply_shift(&theta, &g).unwrap();
            for (a, b) in out.iter().zip(direct.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_rows_lie_on_orbit() {
        let theta = random_signal(&SignalClassParams::with_defaults(2), 5, 3).unwrap();
        for group in [GroupKind::Continuous, GroupKind::Discrete] {
            let cfg = ModelConfig::new(5, 1e-12, group, 9).unwrap();
            let batch = sample(&theta, &cfg, 50).unwrap();
            for row in batch.observations().rows() {
                let y = Signal::from_values(row.to_vec()).unwrap();
                assert!(orbit_distance(&y, &theta, group).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn seeded_batches_are_identical() {
        let theta = random_signal(&SignalClassParams::with_defaults(2), 5, 3).unwrap();
        let cfg = ModelConfig::new(5, 1.0, GroupKind::Continuous, 7).unwrap();
        let a = sample(&theta, &cfg, 100).unwrap();
        let b = sample(&theta, &cfg, 100).unwrap();
        assert_eq!(a, b);
        let c = sample(&theta, &cfg.with_seed(8), 100).unwrap();
        assert_ne!(a.observations(), c.observations());
    }

    #[test]
    fn invalid_configs() {
        assert!(ModelConfig::new(5, 0.0, GroupKind::Continuous, 0).is_err());
        assert!(ModelConfig::new(4, 1.0, GroupKind::Continuous, 0).is_err());
        let theta = Signal::zeros(5).unwrap();
        let cfg = ModelConfig::new(7, 1.0, GroupKind::Continuous, 0).unwrap();
        assert!(sample(&theta, &cfg, 3).is_err());
        let cfg = ModelConfig::new(5, 1.0, GroupKind::Continuous, 0).unwrap();
        assert_eq!(sample(&theta, &cfg, 0).unwrap().n(), 0);
    }
}
