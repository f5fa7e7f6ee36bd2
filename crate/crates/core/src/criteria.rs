//! Inseparability verdicts from joint quadrature variances.
//!
//! For two modes `a`, `b` the separable bound is
//! `Var((X_a + X_b)/√2) + Var((Y_a - Y_b)/√2) ≥ 2`; a total strictly below two
//! witnesses entanglement.

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, Quadrature};

pub const SEPARABLE_BOUND: f64 = 2.0;

/// Totals within this relative distance of the bound are treated as on it.
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Which pair of joint quadratures is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// `X_a + X_b` and `Y_a - Y_b`: the deamplified NOPA.
    #[default]
    SumDifference,
    /// `X_a - X_b` and `Y_a + Y_b`: the amplified NOPA.
    DifferenceSum,
}

impl Orientation {
    fn signs(self) -> (f64, f64) {
        match self {
            Orientation::SumDifference => (1.0, -1.0),
            Orientation::DifferenceSum => (-1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionReport {
    /// Normalized amplitude-quadrature variance.
    pub v_plus: f64,
    /// Normalized phase-quadrature variance.
    pub v_minus: f64,
    pub total: f64,
    pub bound: f64,
    pub entangled: bool,
    /// `10 log10(bound / total)`: positive when the total is below the bound.
    pub margin_db: f64,
}

impl CriterionReport {
    pub fn new(v_plus: f64, v_minus: f64) -> Self {
        let total = v_plus + v_minus;
        let bound = SEPARABLE_BOUND;
        CriterionReport {
            v_plus,
            v_minus,
            total,
            bound,
            entangled: total < bound * (1.0 - BOUNDARY_RTOL),
            margin_db: 10.0 * libm::log10(bound / total),
        }
    }
}

/// Evaluates the criterion directly on the state's covariance.
pub fn duan_sum(
    state: &GaussianState,
    a: &str,
    b: &str,
    orientation: Orientation,
) -> Result<CriterionReport> {
    let (sx, sy) = orientation.signs();
    // unit-weight combinations keep the coherent-state total at exactly 2
    let joint = |q: Quadrature, sign: f64| -> Result<f64> {
        let c = state.coefficients(&[(a, q, 1.0), (b, q, sign)])?;
        Ok(0.5 * state.quadrature_variance(&c)?)
    };
    Ok(CriterionReport::new(
        joint(Quadrature::X, sx)?,
        joint(Quadrature::Y, sy)?,
    ))
}

/// Converts measured `δ²i₊`, `δ²i₋` into normalized variances by dividing out
/// `α²`, the shot-noise level of each current.
pub fn duan_from_currents(sum_variance: f64, diff_variance: f64, alpha: f64) -> Result<CriterionReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
        });
    }
    let shot = alpha * alpha;
    Ok(CriterionReport::new(sum_variance / shot, diff_variance / shot))
}

/// Variance in dB relative to the vacuum level.
pub fn variance_db(v: f64) -> Result<f64> {
    if v.is_nan() || v <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "variance",
            value: v,
        });
    }
    Ok(10.0 * libm::log10(v))
}
