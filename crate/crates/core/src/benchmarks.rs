//! Bundled models and load cases.
//!
//! The 27-bar model is a reconstruction: a cantilever with three chords and
//! three bays of 1 m, every bay cross-braced, clamped at x = 0. It is loaded
//! downward at the two bottom-chord nodes farthest from the wall and probed
//! at the horizontal displacement of the bottom rightmost node.

use crate::harness::LoadCase;
use crate::truss::TrussModel;

pub const ONE_BAR_JSON: &str = include_str!("../data/one_bar.json");
pub const TWO_BAR_JSON: &str = include_str!("../data/two_bar.json");
pub const TRUSS27_JSON: &str = include_str!("../data/truss27.json");
pub const ONE_BAR_LOAD_JSON: &str = include_str!("../data/one_bar_load.json");
pub const TRUSS27_LOAD_JSON: &str = include_str!("../data/truss27_load.json");

/// 1 m bar along x, area 200 mm^2, axial dof only.
pub fn one_bar() -> TrussModel {
    TrussModel::from_json(ONE_BAR_JSON).expect("bundled model is valid")
}

/// Supports at (0,0) and (8,0), apex at (4,3), areas 2000 mm^2.
pub fn two_bar() -> TrussModel {
    TrussModel::from_json(TWO_BAR_JSON).expect("bundled model is valid")
}

pub fn truss27() -> TrussModel {
    TrussModel::from_json(TRUSS27_JSON).expect("bundled model is valid")
}

/// `pbar = 10 N`, `lambda = 0, 2, ..., 38`.
pub fn one_bar_load() -> LoadCase {
    LoadCase::from_json(ONE_BAR_LOAD_JSON).expect("bundled load is valid")
}

/// 50 N downward per loaded node per unit multiplier.
pub fn truss27_load() -> LoadCase {
    LoadCase::from_json(TRUSS27_LOAD_JSON).expect("bundled load is valid")
}

pub const ONE_BAR_PROBE: usize = 0;

/// Horizontal dof of the bottom rightmost node of [`truss27`].
pub fn truss27_probe() -> usize {
    let model = truss27();
    let node = model
        .nodes()
        .iter()
        .filter(|n| n.y == 0.0)
        .max_by(|a, b| a.x.total_cmp(&b.x))
        .expect("model has nodes");
    model.dof(node.id, 0).expect("probe node is free")
}
