//! Brute-force reference for the octant model: enumerate θ on a midpoint grid
//! in each of the two r layers and count outcomes with integers.

#![allow(dead_code)]

use std::f64::consts::TAU;

use bellsim::{is_coincident, CoincidenceWindow, HiddenVariable, LocalModel, OctantModel, Setting};

pub const GRID_POINTS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub struct GridStats {
    pub p_coincidence: f64,
    pub p_equal_and_coincident: f64,
    pub p_unequal_and_coincident: f64,
    pub conditional_correlation: Option<f64>,
}

/// `[equal & coincident, unequal & coincident]` counts for one layer.
fn layer_counts(model: &OctantModel, r: f64, a: Setting, c: Setting, window: CoincidenceWindow, n: u64) -> [u64; 2] {
    let mut counts = [0u64; 2];
    for i in 0..n {
        let theta = (i as f64 + 0.5) * TAU / n as f64;
        let lambda = HiddenVariable::new(theta, r).unwrap();
        let left = model.respond(lambda, a);
        let right = model.respond(lambda, c);
        if is_coincident(left.time, right.time, window) {
            counts[usize::from(left.outcome != right.outcome)] += 1;
        }
    }
    counts
}

pub fn grid_pair(l: f64, a: Setting, c: Setting, window: CoincidenceWindow, n: u64) -> GridStats {
    let model = OctantModel::new(l).unwrap();
    let band = if l > 0.0 {
        layer_counts(&model, 0.5 * l, a, c, window, n)
    } else {
        [0, 0]
    };
    let main = if l < 1.0 {
        layer_counts(&model, 0.5 * (1.0 + l), a, c, window, n)
    } else {
        [0, 0]
    };
    let p = |k: usize| (band[k] as f64 * l + main[k] as f64 * (1.0 - l)) / n as f64;
    let (eq, ne) = (p(0), p(1));
    let pc = eq + ne;
    GridStats {
        p_coincidence: pc,
        p_equal_and_coincident: eq,
        p_unequal_and_coincident: ne,
        conditional_correlation: (pc > 0.0).then(|| (eq - ne) / pc),
    }
}

/// Largest absolute difference between the sweep and the grid for one pair.
pub fn max_deviation(l: f64, a: Setting, c: Setting, window: CoincidenceWindow, n: u64) -> f64 {
    let model = OctantModel::new(l).unwrap();
    let pw = model.piecewise().unwrap();
    let exact = bellsim::exact::sweep_pair(&pw, a, c, window);
    let grid = grid_pair(l, a, c, window, n);
    let corr = match (exact.conditional_correlation, grid.conditional_correlation) {
        (Some(x), Some(y)) => (x - y).abs(),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    };
    [
        (exact.p_coincidence - grid.p_coincidence).abs(),
        (exact.p_equal_and_coincident - grid.p_equal_and_coincident).abs(),
        (exact.p_unequal_and_coincident - grid.p_unequal_and_coincident).abs(),
        corr,
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn bellsim_bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_bellsim"))
}
