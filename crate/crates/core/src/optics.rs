//! Optical components of the measurement setup, from the seeded NOPA source
//! up to the polarizing beam splitter.
//!
//! Polarization wires are a pair `(x, y)`. The signal starts on `x`, the idler on
//! `y`. Wave plate angles are measured from the `y` axis, positive towards `-x`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, ModeRegistry, Quadrature, SymplecticOp};

/// Pump–seed relative phase of the NOPA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PumpPhase {
    /// Relative phase `(2n+1)π`: `X_a + X_b` and `Y_a - Y_b` are squeezed.
    #[default]
    Deamplification,
    /// Relative phase `2nπ`: `X_a - X_b` and `Y_a + Y_b` are squeezed.
    Amplification,
}

/// NOPA parameters.
///
/// `alpha` is the real mean amplitude of each output beam. `r` sets the joint
/// quadrature variances `e^{∓2r}`; `excess_noise` is added to both the squeezed
/// and anti-squeezed combinations, and `efficiency` is applied as a loss
/// channel on the fluctuations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub alpha: f64,
    pub r: f64,
    pub pump_phase: PumpPhase,
    pub excess_noise: f64,
    pub efficiency: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            alpha: 100.0,
            r: 1.0,
            pump_phase: PumpPhase::Deamplification,
            excess_noise: 0.0,
            efficiency: 1.0,
        }
    }
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 4] = [
            ("alpha", self.alpha, self.alpha >= 0.0 && self.alpha.is_finite()),
            ("r", self.r, self.r >= 0.0 && self.r.is_finite()),
            (
                "excess_noise",
                self.excess_noise,
                self.excess_noise >= 0.0 && self.excess_noise.is_finite(),
            ),
            (
                "efficiency",
                self.efficiency,
                self.efficiency > 0.0 && self.efficiency <= 1.0,
            ),
        ];
        for (name, value, ok) in checks {
            if !ok {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }
}

/// Bright EPR pair from the NOPA. Both beams have mean `alpha` and are in phase.
pub fn nopa_source(spec: &SourceSpec, signal: &str, idler: &str) -> Result<GaussianState> {
    spec.validate()?;
    let squeezed = libm::exp(-2.0 * spec.r) + spec.excess_noise;
    let anti = libm::exp(2.0 * spec.r) + spec.excess_noise;
    let diag = 0.5 * (squeezed + anti);
    let half_gap = 0.5 * (anti - squeezed);
    let (xx, yy) = match spec.pump_phase {
        PumpPhase::Deamplification => (-half_gap, half_gap),
        PumpPhase::Amplification => (half_gap, -half_gap),
    };
    let eta = spec.efficiency;
    let loss = |v: f64, vac: f64| eta * v + (1.0 - eta) * vac;
    let d = loss(diag, 1.0);
    let cx = loss(xx, 0.0);
    let cy = loss(yy, 0.0);
    #[rustfmt::skip]
    let cov = DMatrix::from_row_slice(4, 4, &[
        d,   0.0, cx,  0.0,
        0.0, d,   0.0, cy,
        cx,  0.0, d,   0.0,
        0.0, cy,  0.0, d,
    ]);
    let x = 2.0 * spec.alpha;
    let mean = DVector::from_row_slice(&[x, 0.0, x, 0.0]);
    let state = GaussianState::new(ModeRegistry::new([signal, idler])?, mean, cov)?;
    state.require_physical()?;
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateKind {
    Quarter,
    Half,
}

impl PlateKind {
    /// Retardance in radians.
    pub fn retardance(self) -> f64 {
        match self {
            PlateKind::Quarter => core::f64::consts::FRAC_PI_2,
            PlateKind::Half => core::f64::consts::PI,
        }
    }
}

/// A wave plate; the angle is stored in degrees, normalized to `[0, 180)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePlateSpec {
    pub kind: PlateKind,
    fast_axis_deg: f64,
}

/// Maps an angle in degrees into `[0, 180)`.
fn wrap_half_turn(deg: f64) -> f64 {
    let r = libm::fmod(deg, 180.0);
    let r = if r < 0.0 { r + 180.0 } else { r };
    if r >= 180.0 {
        0.0
    } else {
        r
    }
}

impl WavePlateSpec {
    pub fn new(kind: PlateKind, fast_axis_deg: f64) -> Self {
        WavePlateSpec {
            kind,
            fast_axis_deg: wrap_half_turn(fast_axis_deg),
        }
    }

    pub fn quarter(fast_axis_deg: f64) -> Self {
        WavePlateSpec::new(PlateKind::Quarter, fast_axis_deg)
    }

    pub fn half(fast_axis_deg: f64) -> Self {
        WavePlateSpec::new(PlateKind::Half, fast_axis_deg)
    }

    pub fn fast_axis_deg(&self) -> f64 {
        self.fast_axis_deg
    }

    /// Jones matrix on `(x, y)` mode operators.
    ///
    /// The plate axis `u = (-sin θ, cos θ)` acquires `e^{iδ}`; the orthogonal
    /// axis is left unchanged.
    pub fn jones(&self) -> DMatrix<Complex<f64>> {
        let (s, c) = libm::sincos(self.fast_axis_deg.to_radians());
        let u = [-s, c];
        let v = [c, s];
        let (sd, cd) = libm::sincos(self.kind.retardance());
        let phase = Complex::new(cd, sd);
        DMatrix::from_fn(2, 2, |i, j| phase * (u[i] * u[j]) + Complex::new(v[i] * v[j], 0.0))
    }

    /// The plate as an in-place op on the wire pair `(x, y)`.
    pub fn op(&self, x: &str, y: &str) -> Result<SymplecticOp> {
        SymplecticOp::from_mode_matrix(&self.jones(), &[x, y], &[x, y])
    }
}

/// Quarter-wave plate on `(x, y)`. At 0° the idler picks up `+π/2`: `b → ib`.
pub fn quarter_wave_plate(spec: &WavePlateSpec, x: &str, y: &str) -> Result<SymplecticOp> {
    if spec.kind != PlateKind::Quarter {
        return Err(Error::WrongPlateKind { expected: "quarter" });
    }
    spec.op(x, y)
}

/// Half-wave plate on `(x, y)`: a polarization reflection about the plate axis.
pub fn half_wave_plate(spec: &WavePlateSpec, x: &str, y: &str) -> Result<SymplecticOp> {
    if spec.kind != PlateKind::Half {
        return Err(Error::WrongPlateKind { expected: "half" });
    }
    spec.op(x, y)
}

/// Quarter-wave plate at 0° followed by a half-wave plate at 22.5°.
///
/// Inputs are `(signal, idler)`; the `y` wire leaves as `p = (a - ib)/√2` and
/// the `x` wire as `s = (a + ib)/√2`. Outputs are listed as `(s, p)`, the
/// physical wire order.
pub fn measurement_chain(signal: &str, idler: &str, p: &str, s: &str) -> Result<SymplecticOp> {
    let qwp = quarter_wave_plate(&WavePlateSpec::quarter(0.0), signal, idler)?;
    let hwp = half_wave_plate(&WavePlateSpec::half(22.5), signal, idler)?;
    hwp.after(&qwp)?.with_outputs(&[s, p])
}

/// Literal encoding of `p = (a - ib)/√2`, `s = (a + ib)/√2`.
pub fn decomposition_reference(signal: &str, idler: &str, p: &str, s: &str) -> Result<SymplecticOp> {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let modes = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex::new(h, 0.0),
            Complex::new(0.0, -h),
            Complex::new(h, 0.0),
            Complex::new(0.0, h),
        ],
    );
    SymplecticOp::from_mode_matrix(&modes, &[signal, idler], &[p, s])
}

/// Port labels of a polarizing beam splitter.
///
/// Inputs are `[in_t, in_r, vac_t, vac_r]`: the transmitted and reflected
/// polarizations of the bright arm and of the vacuum arm. Outputs are
/// `[c, c_r, d_t, d]`: port `c` carries the transmitted bright polarization
/// plus the reflected vacuum one, port `d` the reflected bright polarization
/// plus the transmitted vacuum one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PbsPorts<'a> {
    pub inputs: [&'a str; 4],
    pub outputs: [&'a str; 4],
}

/// Polarizing beam splitter. `extinction` (radians) leaks `sin²ε` of each
/// polarization into the wrong port; `0` is the ideal splitter, a pure permutation.
pub fn pbs(ports: PbsPorts<'_>, extinction: f64) -> Result<SymplecticOp> {
    if !extinction.is_finite() {
        return Err(Error::InvalidParameter {
            name: "extinction",
            value: extinction,
        });
    }
    for (i, l) in ports.inputs.iter().enumerate() {
        if ports.inputs[..i].contains(l) {
            return Err(Error::DuplicateLabel((*l).into()));
        }
    }
    let (s, c) = libm::sincos(extinction);
    // rows: c, c_r, d_t, d; columns: in_t, in_r, vac_t, vac_r
    #[rustfmt::skip]
    let modes = DMatrix::from_row_slice(4, 4, &[
        c,   0.0, -s,  0.0,
        0.0, s,   0.0, c,
        s,   0.0, c,   0.0,
        0.0, c,   0.0, -s,
    ])
    .map(|v| Complex::new(v, 0.0));
    SymplecticOp::from_mode_matrix(&modes, &ports.inputs, &ports.outputs)
}

/// Optical phase `a → e^{iθ} a` on every listed mode.
pub fn phase_shift(labels: &[&str], theta: f64) -> Result<SymplecticOp> {
    if !theta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
        });
    }
    let (s, c) = libm::sincos(theta);
    let n = labels.len();
    let modes = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex::new(c, s)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    SymplecticOp::from_mode_matrix(&modes, labels, labels)
}

/// Rotates the fluctuations of one mode by `θ` about its fixed carrier.
///
/// Models a pump–seed phase error: the squeezing ellipse turns relative to the
/// bright mean field. Implemented as a phase shift followed by the
/// displacement that restores the mean.
pub fn rotate_fluctuations(state: &GaussianState, label: &str, theta: f64) -> Result<GaussianState> {
    let rot = phase_shift(&[label], theta)?;
    let (x, y) = state.mode_mean(label)?;
    let mean = DVector::from_row_slice(&[x, y]);
    let restore = &mean - rot.matrix() * &mean;
    let op = SymplecticOp::new(rot.matrix().clone(), restore, &[label], &[label])?;
    state.apply(&op)
}

/// Pure-loss channel of transmissivity `eta` on one mode.
pub fn loss_channel(state: &GaussianState, label: &str, eta: f64) -> Result<GaussianState> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
        });
    }
    let i = 2 * state.registry().require(label)?;
    let t = libm::sqrt(eta);
    let dim = state.mean().len();
    let mut scale = DVector::from_element(dim, 1.0);
    scale[i] = t;
    scale[i + 1] = t;
    let mean = state.mean().component_mul(&scale);
    let mut cov = DMatrix::from_fn(dim, dim, |r, c| state.cov()[(r, c)] * scale[r] * scale[c]);
    cov[(i, i)] += 1.0 - eta;
    cov[(i + 1, i + 1)] += 1.0 - eta;
    Ok(GaussianState::from_parts(state.registry().clone(), mean, cov))
}

/// Loss on several modes, applied in order.
pub fn loss_on(state: &GaussianState, labels: &[&str], eta: f64) -> Result<GaussianState> {
    labels
        .iter()
        .try_fold(state.clone(), |s, l| loss_channel(&s, l, eta))
}

/// Joint combination `(X_a ± X_b)/√2` or `(Y_a ± Y_b)/√2` as a coefficient vector.
pub fn joint_quadrature(
    state: &GaussianState,
    a: &str,
    b: &str,
    quadrature: Quadrature,
    sign: f64,
) -> Result<DVector<f64>> {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    state.coefficients(&[(a, quadrature, h), (b, quadrature, sign * h)])
}
