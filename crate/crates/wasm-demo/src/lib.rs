//! Browser bindings: push-forward density of a sine-shift generator, the JS/χ²
//! sandwich between two such densities, and one bump of the lower-bound family.
//! Every entry point returns a JSON string.

use gdl_core::divergence::sandwich_values;
use gdl_core::generator_density::{GeneratorDensity, SineShift};
use gdl_core::minimax_lab::PerturbedFamily;
use gdl_core::quadrature::{uniform_grid, QuadratureScheme};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_js<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

fn err(e: gdl_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
fn sine_density(amplitude: f64, frequency: f64) -> Result<GeneratorDensity<SineShift>, JsError> {
    if !((2.0 * std::f64::consts::PI * amplitude * frequency).abs() < 1.0)
        || frequency.fract() != 0.0
    {
        return Err(JsError::new("need |2π·a·f| < 1 and an integer frequency"));
    }
    GeneratorDensity::new(
        SineShift {
            amplitude,
            frequency,
        },
        4.0,
    )
    .map_err(err)
}

#[derive(Serialize)]
struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
}

/// Density of `g(Y)`, `g(y) = y − a·sin(2πfy)`, `Y` uniform, on `points` grid nodes.
#[wasm_bindgen]
pub fn pushforward_density(
    amplitude: f64,
    frequency: f64,
    points: usize,
) -> Result<String, JsError> {
    let g = sine_density(amplitude, frequency)?;
    let grid = uniform_grid(1, points.clamp(2, 2001));
    let y = grid
        .iter()
        .map(|x| g.density(x))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    to_js(&Curve {
        x: grid.into_iter().map(|x| x[0]).collect(),
        y,
    })
}

/// `¼χ_sym ≤ JS ≤ (ln 2/2)χ_sym` for two sine-shift densities.
#[wasm_bindgen]
pub fn js_sandwich(a1: f64, f1: f64, a2: f64, f2: f64) -> Result<String, JsError> {
    let quad = QuadratureScheme::default_for(1);
    let p = sine_density(a1, f1)?.tabulate(&quad).map_err(err)?;
    let q = sine_density(a2, f2)?.tabulate(&quad).map_err(err)?;
    to_js(&sandwich_values(&p, &q, &quad))
}

#[derive(Serialize)]
struct BumpView {
    x: Vec<f64>,
    density: Vec<f64>,
    score: Vec<f64>,
    min_eigenvalue: f64,
    valid: bool,
}

/// One-bump family centred at ½: density and score `∂θ log p` across `[0,1]`.
#[wasm_bindgen]
pub fn bump_family(h: f64, theta: f64, beta: f64, points: usize) -> Result<String, JsError> {
    let fam = PerturbedFamily::single(h, beta, vec![0.5], theta).map_err(err)?;
    let min_eigenvalue = fam.min_eigenvalue(64);
    let valid = fam.check_valid(64).is_ok();
    let grid = uniform_grid(1, points.clamp(2, 2001));
    let (mut density, mut score) = (Vec::new(), Vec::new());
    for x in &grid {
        if valid {
            density.push(fam.log_density(x).map_err(err)?.exp());
            score.push(fam.score(x, 0).map_err(err)?);
        } else {
            density.push(f64::NAN);
            score.push(f64::NAN);
        }
    }
    to_js(&BumpView {
        x: grid.into_iter().map(|x| x[0]).collect(),
        density,
        score,
        min_eigenvalue,
        valid,
    })
}
