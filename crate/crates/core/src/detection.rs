//! Linearized direct photodetection and the RF-split sum/difference
//! photocurrents, plus a homodyne baseline.
//!
//! A bright mode with mean quadratures `(x̄, ȳ)` has photon number
//! `n ≈ (x̄² + ȳ²)/4 + (x̄ δX + ȳ δY)/2` to first order in the fluctuations, so a
//! detector is a [`LinearObservable`] over the state's quadrature slots.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, ModeRegistry, Quadrature, SymplecticOp};

/// Mean photon number below which the first-order expansion is flagged.
pub const BRIGHT_PHOTON_THRESHOLD: f64 = 100.0;

/// A photocurrent to first order: a DC level plus a linear form in the
/// quadrature fluctuations.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObservable {
    /// Mean photocurrent, including the noise photons of the detected modes.
    pub dc: f64,
    /// Mean-field part of `dc`, `|⟨a⟩|²` summed over detected modes.
    pub carrier: f64,
    pub coeffs: DVector<f64>,
}

impl LinearObservable {
    pub fn zero(modes: usize) -> Self {
        LinearObservable {
            dc: 0.0,
            carrier: 0.0,
            coeffs: DVector::zeros(2 * modes),
        }
    }

    pub fn scaled(&self, dc_factor: f64, amplitude_factor: f64) -> Self {
        LinearObservable {
            dc: self.dc * dc_factor,
            carrier: self.carrier * dc_factor,
            coeffs: &self.coeffs * amplitude_factor,
        }
    }

    /// Coefficient on one slot, for inspection.
    pub fn coefficient(&self, registry: &ModeRegistry, label: &str, q: Quadrature) -> Result<f64> {
        Ok(self.coeffs[registry.slot(label, q)?])
    }

    /// Re-expresses the observable over the modes that existed before `op`.
    ///
    /// `before` is the registry the op was applied to; the observable must be
    /// defined on the registry the op produced.
    pub fn pull_back(&self, op: &SymplecticOp, before: &ModeRegistry) -> Result<Self> {
        let embedded = op.embedding(before)?;
        if self.coeffs.len() != embedded.matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: embedded.matrix.nrows(),
                found: self.coeffs.len(),
            });
        }
        Ok(LinearObservable {
            coeffs: embedded.matrix.transpose() * &self.coeffs,
            ..self.clone()
        })
    }
}

/// A detected mode too dim for the first-order expansion to be trusted.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationWarning {
    pub label: String,
    pub mean_photon_number: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub observable: LinearObservable,
    pub warnings: Vec<LinearizationWarning>,
}

/// Linearized photon-number measurement of one mode.
pub fn direct_detect(state: &GaussianState, label: &str) -> Result<Detection> {
    let (x, y) = state.mode_mean(label)?;
    let block = state.mode_cov(label)?;
    let carrier = (x * x + y * y) / 4.0;
    let dc = carrier - 0.5 + block.trace() / 4.0;
    let coeffs = state.coefficients(&[(label, Quadrature::X, x / 2.0), (label, Quadrature::Y, y / 2.0)])?;
    let mut warnings = Vec::new();
    if carrier < BRIGHT_PHOTON_THRESHOLD {
        warnings.push(LinearizationWarning {
            label: label.to_string(),
            mean_photon_number: carrier,
        });
    }
    Ok(Detection {
        observable: LinearObservable { dc, carrier, coeffs },
        warnings,
    })
}

/// A detector that collects every listed mode (both polarizations of a port).
/// The brightness check applies to the port as a whole.
pub fn detect_port(state: &GaussianState, labels: &[&str]) -> Result<Detection> {
    let mut total = LinearObservable::zero(state.modes());
    for label in labels {
        total = current_sum(&total, &direct_detect(state, label)?.observable)?;
    }
    let mut warnings = Vec::new();
    if total.carrier < BRIGHT_PHOTON_THRESHOLD {
        warnings.push(LinearizationWarning {
            label: labels.join("+"),
            mean_photon_number: total.carrier,
        });
    }
    Ok(Detection {
        observable: total,
        warnings,
    })
}

/// Power-preserving RF splitter: each output carries half the DC level and
/// `1/√2` of the fluctuation amplitude.
pub fn rf_split(obs: &LinearObservable) -> (LinearObservable, LinearObservable) {
    let half = obs.scaled(0.5, core::f64::consts::FRAC_1_SQRT_2);
    (half.clone(), half)
}

fn combine(a: &LinearObservable, b: &LinearObservable, sign: f64) -> Result<LinearObservable> {
    if a.coeffs.len() != b.coeffs.len() {
        return Err(Error::DimensionMismatch {
            expected: a.coeffs.len(),
            found: b.coeffs.len(),
        });
    }
    Ok(LinearObservable {
        dc: a.dc + sign * b.dc,
        carrier: a.carrier + sign * b.carrier,
        coeffs: &a.coeffs + &b.coeffs * sign,
    })
}

pub fn current_sum(a: &LinearObservable, b: &LinearObservable) -> Result<LinearObservable> {
    combine(a, b, 1.0)
}

pub fn current_diff(a: &LinearObservable, b: &LinearObservable) -> Result<LinearObservable> {
    combine(a, b, -1.0)
}

/// Variance of a linearized current, `cᵀ V c`.
pub fn current_variance(state: &GaussianState, obs: &LinearObservable) -> Result<f64> {
    state.quadrature_variance(&obs.coeffs)
}

/// Variance of `X cos θ + Y sin θ` on one mode, as seen by a homodyne detector
/// with local-oscillator phase `θ`.
pub fn homodyne_variance(state: &GaussianState, label: &str, lo_phase: f64) -> Result<f64> {
    let (s, c) = libm::sincos(lo_phase);
    let coeffs = state.coefficients(&[(label, Quadrature::X, c), (label, Quadrature::Y, s)])?;
    state.quadrature_variance(&coeffs)
}

/// Sum and difference photocurrents of the two PBS ports after RF splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentMeasurement {
    pub sum: LinearObservable,
    pub diff: LinearObservable,
    /// `δ²i₊`, including any electronic noise.
    pub sum_variance: f64,
    /// `δ²i₋`, including any electronic noise.
    pub diff_variance: f64,
    /// Mean-field photon number per port, the `α²` calibration.
    pub alpha_sq: f64,
    pub warnings: Vec<LinearizationWarning>,
}

/// Detects ports `c` and `d`, splits each photocurrent and forms `i₊ = c' + d'`,
/// `i₋ = c' - d'`. `electronic_noise` is added to both variances.
pub fn measure_currents(
    state: &GaussianState,
    port_c: &[&str],
    port_d: &[&str],
    electronic_noise: f64,
) -> Result<CurrentMeasurement> {
    if electronic_noise.is_nan() || electronic_noise < 0.0 {
        return Err(Error::InvalidParameter {
            name: "electronic_noise",
            value: electronic_noise,
        });
    }
    let c = detect_port(state, port_c)?;
    let d = detect_port(state, port_d)?;
    let (c_half, _) = rf_split(&c.observable);
    let (d_half, _) = rf_split(&d.observable);
    let sum = current_sum(&c_half, &d_half)?;
    let diff = current_diff(&c_half, &d_half)?;
    let mut warnings = c.warnings;
    warnings.extend(d.warnings);
    Ok(CurrentMeasurement {
        sum_variance: current_variance(state, &sum)? + electronic_noise,
        diff_variance: current_variance(state, &diff)? + electronic_noise,
        alpha_sq: 0.5 * (c.observable.carrier + d.observable.carrier),
        sum,
        diff,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{measurement_chain, nopa_source, pbs, PbsPorts, SourceSpec};
    use nalgebra::Complex;

    fn coherent(alpha: f64) -> GaussianState {
        GaussianState::vacuum(["a"])
            .unwrap()
            .displace("a", Complex::new(alpha, 0.0))
            .unwrap()
    }

    #[test]
    fn coherent_detection() {
        let d = direct_detect(&coherent(20.0), "a").unwrap();
        assert!((d.observable.dc - 400.0).abs() < 1e-12);
        assert_eq!(d.observable.coeffs.as_slice(), &[20.0, 0.0]);
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn vacuum_detection_is_degenerate_and_flagged() {
        let d = direct_detect(&GaussianState::vacuum(["v"]).unwrap(), "v").unwrap();
        assert_eq!(d.observable.dc, 0.0);
        assert_eq!(d.observable.coeffs.amax(), 0.0);
        assert_eq!(d.warnings.len(), 1);
        assert!(direct_detect(&coherent(1.0), "zz").is_err());
    }

    #[test]
    fn dim_mode_warns() {
        let d = direct_detect(&coherent(5.0), "a").unwrap();
        assert_eq!(d.warnings[0].mean_photon_number, 25.0);
    }

    #[test]
    fn rf_split_halves_variance() {
        let s = nopa_source(&SourceSpec::default(), "a", "b").unwrap();
        let obs = direct_detect(&s, "a").unwrap().observable;
        let (h1, h2) = rf_split(&obs);
        let full = current_variance(&s, &obs).unwrap();
        let v1 = current_variance(&s, &h1).unwrap();
        let v2 = current_variance(&s, &h2).unwrap();
        assert!((v1 - 0.5 * full).abs() < 1e-9 * full);
        assert!((v1 + v2 - full).abs() < 1e-9 * full);
        let (z1, z2) = rf_split(&LinearObservable::zero(2));
        assert_eq!(z1, LinearObservable::zero(2));
        assert_eq!(z2, LinearObservable::zero(2));
    }

    #[test]
    fn difference_with_itself_vanishes() {
        let obs = direct_detect(&coherent(3.0), "a").unwrap().observable;
        assert_eq!(current_diff(&obs, &obs).unwrap(), LinearObservable::zero(1));
        assert!(current_sum(&obs, &LinearObservable::zero(2)).is_err());
        assert_eq!(current_variance(&coherent(3.0), &LinearObservable::zero(1)).unwrap(), 0.0);
    }

    fn detected(spec: &SourceSpec) -> (GaussianState, GaussianState, SymplecticOp) {
        let src = nopa_source(spec, "a", "b")
            .unwrap()
            .with_vacuum("vt")
            .unwrap()
            .with_vacuum("vr")
            .unwrap();
        let chain = measurement_chain("a", "b", "p", "s")
            .unwrap()
            .embed(&["vt", "vr"])
            .unwrap();
        let split = pbs(
            PbsPorts {
                inputs: ["p", "s", "vt", "vr"],
                outputs: ["c", "c_r", "d_t", "d"],
            },
            0.0,
        )
        .unwrap();
        let full = split.after(&chain).unwrap();
        let out = src.apply(&full).unwrap();
        (src, out, full)
    }

    #[test]
    fn port_observables_pulled_back_to_source_quadratures() {
        let alpha = 10.0;
        let spec = SourceSpec {
            alpha,
            ..SourceSpec::default()
        };
        let (src, out, full) = detected(&spec);
        let c = detect_port(&out, &["c", "c_r"]).unwrap().observable;
        let d = detect_port(&out, &["d", "d_t"]).unwrap().observable;
        let c_src = c.pull_back(&full, src.registry()).unwrap();
        let d_src = d.pull_back(&full, src.registry()).unwrap();
        let h = 0.5 * alpha;
        let expect_c = [h, -h, h, h, 0.0, 0.0, 0.0, 0.0];
        let expect_d = [h, h, h, -h, 0.0, 0.0, 0.0, 0.0];
        for i in 0..8 {
            assert!((c_src.coeffs[i] - expect_c[i]).abs() < 1e-12, "c slot {i}");
            assert!((d_src.coeffs[i] - expect_d[i]).abs() < 1e-12, "d slot {i}");
        }
        assert!((c.carrier - alpha * alpha).abs() < 1e-10);
    }

    #[test]
    fn shot_noise_reference_at_zero_squeezing() {
        let spec = SourceSpec {
            r: 0.0,
            ..SourceSpec::default()
        };
        let (_, out, _) = detected(&spec);
        let m = measure_currents(&out, &["c", "c_r"], &["d", "d_t"], 0.0).unwrap();
        assert!((m.sum_variance - 1e4).abs() < 1e-8);
        assert!((m.diff_variance - 1e4).abs() < 1e-8);
    }

    #[test]
    fn squeezed_sum_current() {
        let (_, out, _) = detected(&SourceSpec::default());
        let m = measure_currents(&out, &["c", "c_r"], &["d", "d_t"], 0.0).unwrap();
        assert!((m.sum_variance - 1e4 * libm::exp(-2.0)).abs() < 1e-8);
        assert!((m.sum_variance - 1_353.352_832_366_127).abs() < 1e-8);
        assert!((m.alpha_sq - 1e4).abs() < 1e-9);
        let noisy = measure_currents(&out, &["c", "c_r"], &["d", "d_t"], 5.0).unwrap();
        assert!((noisy.sum_variance - m.sum_variance - 5.0).abs() < 1e-9);
    }

    #[test]
    fn homodyne_baseline() {
        let vac = GaussianState::vacuum(["a"]).unwrap();
        for th in [0.0, 0.4, 2.0] {
            assert!((homodyne_variance(&vac, "a", th).unwrap() - 1.0).abs() < 1e-15);
        }
        let r = 0.8;
        let s = nopa_source(
            &SourceSpec {
                r,
                ..SourceSpec::default()
            },
            "a",
            "b",
        )
        .unwrap();
        for th in [0.0, 1.0, 2.5] {
            let v = homodyne_variance(&s, "b", th).unwrap();
            assert!((v - libm::cosh(2.0 * r)).abs() < 1e-12);
        }
        // a single-mode squeezed vacuum is LO-phase sensitive
        let reg = ModeRegistry::new(["m"]).unwrap();
        let e = libm::exp(2.0 * r);
        let sq = GaussianState::new(
            reg,
            DVector::zeros(2),
            nalgebra::DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![1.0 / e, e])),
        )
        .unwrap();
        let grid: Vec<f64> = (0..=64)
            .map(|k| homodyne_variance(&sq, "m", k as f64 * core::f64::consts::PI / 64.0).unwrap())
            .collect();
        let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = grid.iter().copied().fold(0.0, f64::max);
        assert!((lo - 1.0 / e).abs() < 1e-12 && (hi - e).abs() < 1e-12);
    }
}
