//! Calibrated constants and fixed algorithmic choices, echoed into every run
//! manifest. Bump `CONSTANTS_VERSION` whenever a value changes.

use serde::Serialize;

pub const CONSTANTS_VERSION: u32 = 1;

/// Caccioppoli ratio bound over computed eigenfunctions (2D, N = 128,
/// ε = 1/16, seeds 1..=10, k < 10, r ∈ {1/32, 1/16, 1/8}; observed 1.0037).
pub const CACCIOPPOLI_C_CAL: f64 = 1.05;
/// Aronszajn ratio bound for the annular bump of radius 1/4 (2D, N = 128,
/// β ∈ 0..=10; observed 9.64e-4 at β = 0).
pub const ARONSZAJN_C_CAL: f64 = 1.0e-3;
/// Deformed three-circles ratio bound for pipeline eigenfunctions (2D,
/// N = 128, ε = 1/16, seeds 1..=5; observed 0.44 to 0.53).
pub const THREE_CIRCLES_C_CAL: f64 = 1.0;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConstantsEcho {
    pub version: u32,
    pub caccioppoli_c_cal: f64,
    pub aronszajn_c_cal: f64,
    pub three_circles_c_cal: f64,
    pub band_base: f64,
    pub stage_duration_ratio: f64,
    pub min_stage_nodes: usize,
    pub nodal_delta: f64,
    pub critical_threshold: f64,
    pub beltrami_tolerance: f64,
    pub mori_alpha_step: f64,
    pub mori_scale_balance: f64,
    pub specineq_alpha: f64,
    pub specineq_resolution_floor: f64,
}

pub fn echo() -> ConstantsEcho {
    ConstantsEcho {
        version: CONSTANTS_VERSION,
        caccioppoli_c_cal: CACCIOPPOLI_C_CAL,
        aronszajn_c_cal: ARONSZAJN_C_CAL,
        three_circles_c_cal: THREE_CIRCLES_C_CAL,
        band_base: crate::control::BAND_BASE,
        stage_duration_ratio: std::f64::consts::FRAC_1_SQRT_2,
        min_stage_nodes: crate::control::MIN_STAGE_NODES,
        nodal_delta: crate::nodal::DEFAULT_DELTA,
        critical_threshold: crate::qc::CRITICAL_THRESHOLD,
        beltrami_tolerance: crate::qc::BELTRAMI_TOLERANCE,
        mori_alpha_step: crate::qc::ALPHA_STEP,
        mori_scale_balance: crate::qc::SCALE_BALANCE,
        specineq_alpha: crate::control::INTERPOLATION_ALPHA,
        specineq_resolution_floor: crate::control::RESOLUTION_FLOOR,
    }
}
