//! Browser bindings. The `#[wasm_bindgen]` wrappers are thin; the logic lives
//! in plain functions so it can be tested natively.

use std::f64::consts::TAU;

use mra_core::moments::{delta_norm, matched_pair_continuous, matched_pair_discrete};
use mra_core::signal::{apply_shift, orbit_distance, GroupElement};
use mra_core::{sample, GroupKind, ModelConfig, Signal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct PairView {
    #[serde(rename = "L")]
    pub len: usize,
    pub group: GroupKind,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// `|Delta_m|` for `m = 1..=delta_norms.len()`.
    pub delta_norms: Vec<f64>,
    pub orbit_distance: f64,
}

/// Matched pair and its moment differences. For the discrete group `s` is
/// ignored and `L = 5`.
pub fn matched_pair_view(s: usize, delta: f64, modulus: f64, discrete: bool) -> Result<PairView, String> {
    let (group, (theta, phi)) = if discrete {
        (GroupKind::Discrete, matched_pair_discrete(5, delta).map_err(|e| e.to_string())?)
    } else {
        (
            GroupKind::Continuous,
            matched_pair_continuous(2 * s + 1, s, delta, modulus).map_err(|e| e.to_string())?,
        )
    };
    let top = if discrete { theta.len() + 1 } else { 2 * s + 1 };
    let delta_norms = (1..=top)
        .map(|m| delta_norm(&theta, &phi, m, group))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(PairView {
        len: theta.len(),
        group,
        orbit_distance: orbit_distance(&theta, &phi, group).map_err(|e| e.to_string())?,
        theta: theta.values().to_vec(),
        phi: phi.values().to_vec(),
        delta_norms,
    })
}

/// `|theta - g_a phi|` at `points` equally spaced rotation angles in `[0, 2 pi)`.
pub fn orbit_profile(theta: &[f64], phi: &[f64], points: usize) -> Result<Vec<f64>, String> {
    let theta = Signal::from_values(theta.to_vec()).map_err(|e| e.to_string())?;
    let phi = Signal::from_values(phi.to_vec()).map_err(|e| e.to_string())?;
    if theta.len() != phi.len() {
        return Err("signals differ in length".into());
    }
    (0..points)
        .map(|k| {
            let g = GroupElement::continuous(TAU * k as f64 / points as f64);
            Ok(theta.distance(&apply_shift(&phi, &g).map_err(|e| e.to_string())?))
        })
        .collect()
}

/// `n` noisy, randomly rotated copies of `theta`, flattened row by row.
pub fn noisy_rows(theta: &[f64], sigma: f64, n: usize, seed: u64, discrete: bool) -> Result<Vec<f64>, String> {
    let theta = Signal::from_values(theta.to_vec()).map_err(|e| e.to_string())?;
    let group = if discrete { GroupKind::Discrete } else { GroupKind::Continuous };
    let config = ModelConfig::new(theta.len(), sigma, group, seed).map_err(|e| e.to_string())?;
    let batch = sample(&theta, &config, n).map_err(|e| e.to_string())?;
    Ok(batch.observations().rows().flatten().copied().collect())
}

fn js_err(e: String) -> JsValue {
    JsValue::from_str(&e)
}

/// JSON-encoded [`PairView`].
#[wasm_bindgen(js_name = matchedPair)]
pub fn matched_pair_js(s: usize, delta: f64, modulus: f64, discrete: bool) -> Result<String, JsValue> {
    let view = matched_pair_view(s, delta, modulus, discrete).map_err(js_err)?;
    serde_json::to_string(&view).map_err(|e| js_err(e.to_string()))
}

#[wasm_bindgen(js_name = orbitProfile)]
pub fn orbit_profile_js(theta: &[f64], phi: &[f64], points: usize) -> Result<Vec<f64>, JsValue> {
    orbit_profile(theta, phi, points).map_err(js_err)
}

#[wasm_bindgen(js_name = noisyRows)]
pub fn noisy_rows_js(theta: &[f64], sigma: f64, n: usize, seed: u32, discrete: bool) -> Result<Vec<f64>, JsValue> {
    noisy_rows(theta, sigma, n, seed as u64, discrete).map_err(js_err)
}
