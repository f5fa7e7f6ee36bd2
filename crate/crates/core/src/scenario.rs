//! End-to-end measurement scenarios: a NOPA source, optical elements on the
//! polarization wires, then direct or homodyne detection.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::criteria::{duan_sum, CriterionReport, Orientation};
use crate::detection::{measure_currents, LinearizationWarning};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, Quadrature, SymplecticOp};
use crate::optics::{
    loss_on, nopa_source, pbs, phase_shift, rotate_fluctuations, PbsPorts, PlateKind, SourceSpec,
    WavePlateSpec,
};

pub const SIGNAL: &str = "a";
pub const IDLER: &str = "b";
/// Polarization wire that starts out carrying the signal.
pub const X_WIRE: &str = "x";
/// Polarization wire that starts out carrying the idler.
pub const Y_WIRE: &str = "y";
pub const PBS_PORTS: PbsPorts<'static> = PbsPorts {
    inputs: [Y_WIRE, X_WIRE, "vac_t", "vac_r"],
    outputs: ["c", "c_r", "d_t", "d"],
};
pub const PORT_C: [&str; 2] = ["c", "c_r"];
pub const PORT_D: [&str; 2] = ["d", "d_t"];

/// Which polarization wire(s) an element acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Signal,
    Idler,
    Both,
}

impl Target {
    pub fn wires(self) -> &'static [&'static str] {
        match self {
            Target::Signal => &[X_WIRE],
            Target::Idler => &[Y_WIRE],
            Target::Both => &[X_WIRE, Y_WIRE],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    WavePlate(WavePlateSpec),
    /// Optical phase on carrier and fluctuations alike.
    Phase { target: Target, theta: f64 },
    /// Rotation of the fluctuations about a fixed carrier (pump–seed phase error).
    SqueezingPhase { target: Target, theta: f64 },
    Loss { target: Target, eta: f64 },
}

impl Element {
    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState> {
        match *self {
            Element::WavePlate(spec) => state.apply(&spec.op(X_WIRE, Y_WIRE)?),
            Element::Phase { target, theta } => state.apply(&phase_shift(target.wires(), theta)?),
            Element::SqueezingPhase { target, theta } => target
                .wires()
                .iter()
                .try_fold(state.clone(), |s, w| rotate_fluctuations(&s, w, theta)),
            Element::Loss { target, eta } => loss_on(state, target.wires(), eta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Photodiodes behind the PBS; no local oscillator.
    #[default]
    Direct,
    /// One homodyne detector per beam with a fixed local-oscillator phase.
    Homodyne,
}

/// Gaussian phase jitter during the measurement, RMS in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseNoise {
    /// Optical phase shared by both wires.
    pub common_rms: f64,
    /// Squeezing-phase jitter on the idler.
    pub differential_rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub source: SourceSpec,
    pub elements: Vec<Element>,
    /// PBS leakage angle, radians.
    pub pbs_extinction: f64,
    pub scheme: Scheme,
    /// Added to both current variances (current units).
    pub electronic_noise: f64,
    pub noise: PhaseNoise,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::direct(SourceSpec::default())
    }
}

impl Scenario {
    /// Quarter-wave plate at 0°, half-wave plate at 22.5°, ideal PBS.
    pub fn direct(source: SourceSpec) -> Self {
        Scenario {
            source,
            elements: vec![
                Element::WavePlate(WavePlateSpec::quarter(0.0)),
                Element::WavePlate(WavePlateSpec::half(22.5)),
            ],
            pbs_extinction: 0.0,
            scheme: Scheme::Direct,
            electronic_noise: 0.0,
            noise: PhaseNoise::default(),
        }
    }

    pub fn homodyne(source: SourceSpec) -> Self {
        Scenario {
            elements: Vec::new(),
            scheme: Scheme::Homodyne,
            ..Scenario::direct(source)
        }
    }

    /// Source state on labels `a`, `b`.
    pub fn source_state(&self) -> Result<GaussianState> {
        nopa_source(&self.source, SIGNAL, IDLER)
    }

    /// Field on the `x`, `y` wires after the element chain, with an extra
    /// common optical phase and squeezing phase applied right after the source.
    pub fn wires(&self, common_phase: f64, squeezing_phase: f64) -> Result<GaussianState> {
        let mut state = self
            .source_state()?
            .relabel(SIGNAL, X_WIRE)?
            .relabel(IDLER, Y_WIRE)?;
        if common_phase != 0.0 {
            state = state.apply(&phase_shift(&[X_WIRE, Y_WIRE], common_phase)?)?;
        }
        if squeezing_phase != 0.0 {
            state = rotate_fluctuations(&state, Y_WIRE, squeezing_phase)?;
        }
        for element in &self.elements {
            state = element.apply(&state)?;
        }
        Ok(state)
    }

    /// The PBS op used by the direct scheme.
    pub fn pbs(&self) -> Result<SymplecticOp> {
        pbs(PBS_PORTS, self.pbs_extinction)
    }

    /// Field on the PBS output ports.
    pub fn detected(&self, common_phase: f64, squeezing_phase: f64) -> Result<GaussianState> {
        self.wires(common_phase, squeezing_phase)?
            .with_vacuum(PBS_PORTS.inputs[2])?
            .with_vacuum(PBS_PORTS.inputs[3])?
            .apply(&self.pbs()?)
    }

    fn sample_point(&self, common: f64, squeezing: f64) -> Result<Point> {
        match self.scheme {
            Scheme::Direct => {
                let st = self.detected(common, squeezing)?;
                let m = measure_currents(&st, &PORT_C, &PORT_D, 0.0)?;
                Ok(Point {
                    sum_mean: m.sum.dc,
                    diff_mean: m.diff.dc,
                    sum_variance: m.sum_variance,
                    diff_variance: m.diff_variance,
                    alpha_sq: m.alpha_sq,
                    warnings: m.warnings,
                })
            }
            Scheme::Homodyne => {
                let st = self.wires(common, squeezing)?;
                let plus = st.coefficients(&[
                    (X_WIRE, Quadrature::X, 1.0),
                    (Y_WIRE, Quadrature::X, 1.0),
                ])?;
                let minus = st.coefficients(&[
                    (X_WIRE, Quadrature::Y, 1.0),
                    (Y_WIRE, Quadrature::Y, -1.0),
                ])?;
                // already in shot-noise units
                Ok(Point {
                    sum_mean: plus.dot(st.mean()) / core::f64::consts::SQRT_2,
                    diff_mean: minus.dot(st.mean()) / core::f64::consts::SQRT_2,
                    sum_variance: 0.5 * st.quadrature_variance(&plus)?,
                    diff_variance: 0.5 * st.quadrature_variance(&minus)?,
                    alpha_sq: 1.0,
                    warnings: Vec::new(),
                })
            }
        }
    }

    /// Runs the scenario, averaging over phase jitter when configured.
    pub fn evaluate(&self) -> Result<Outcome> {
        self.evaluate_at(0.0, 0.0)
    }

    /// As [`Scenario::evaluate`], with fixed phase offsets added to the jitter.
    pub fn evaluate_at(&self, common_phase: f64, squeezing_phase: f64) -> Result<Outcome> {
        if self.electronic_noise.is_nan() || self.electronic_noise < 0.0 {
            return Err(Error::InvalidParameter {
                name: "electronic_noise",
                value: self.electronic_noise,
            });
        }
        let common = quadrature_rule(self.noise.common_rms)?;
        let squeezing = quadrature_rule(self.noise.differential_rms)?;
        let mut points = Vec::with_capacity(common.len() * squeezing.len());
        for &(tc, wc) in &common {
            for &(ts, ws) in &squeezing {
                let p = self.sample_point(common_phase + tc, squeezing_phase + ts)?;
                points.push((wc * ws, p));
            }
        }
        let avg = |f: &dyn Fn(&Point) -> f64| points.iter().map(|(w, p)| w * f(p)).sum::<f64>();
        let sum_mean = avg(&|p| p.sum_mean);
        let diff_mean = avg(&|p| p.diff_mean);
        // law of total variance
        let sum_variance = avg(&|p| p.sum_variance + (p.sum_mean - sum_mean) * (p.sum_mean - sum_mean));
        let diff_variance =
            avg(&|p| p.diff_variance + (p.diff_mean - diff_mean) * (p.diff_mean - diff_mean));
        let alpha_sq = avg(&|p| p.alpha_sq);
        let warnings = points.swap_remove(0).1.warnings;
        let sum_variance = sum_variance + self.electronic_noise;
        let diff_variance = diff_variance + self.electronic_noise;
        let source = self.source_state()?;
        Ok(Outcome {
            sum_variance,
            diff_variance,
            alpha_sq,
            measured: CriterionReport::new(sum_variance / alpha_sq, diff_variance / alpha_sq),
            source: duan_sum(&source, SIGNAL, IDLER, Orientation::SumDifference)?,
            source_mirrored: duan_sum(&source, SIGNAL, IDLER, Orientation::DifferenceSum)?,
            warnings,
        })
    }
}

struct Point {
    sum_mean: f64,
    diff_mean: f64,
    sum_variance: f64,
    diff_variance: f64,
    alpha_sq: f64,
    warnings: Vec<LinearizationWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// `δ²i₊` (direct) or `Var((X_a + X_b)/√2)` (homodyne).
    pub sum_variance: f64,
    /// `δ²i₋` (direct) or `Var((Y_a - Y_b)/√2)` (homodyne).
    pub diff_variance: f64,
    /// Shot-noise calibration dividing the current variances.
    pub alpha_sq: f64,
    /// Criterion from the measured variances.
    pub measured: CriterionReport,
    /// Criterion on the source covariance, deamplification orientation.
    pub source: CriterionReport,
    /// Criterion on the source covariance, amplification orientation.
    pub source_mirrored: CriterionReport,
    pub warnings: Vec<LinearizationWarning>,
}

/// Number of Gauss–Hermite nodes per jittered phase.
pub const QUADRATURE_NODES: usize = 32;

/// Gauss–Hermite nodes and weights for `N(0, σ²)` (Golub–Welsch). A zero
/// width gives the single node `(0, 1)`.
pub fn quadrature_rule(sigma: f64) -> Result<Vec<(f64, f64)>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "phase_rms",
            value: sigma,
        });
    }
    if sigma == 0.0 {
        return Ok(vec![(0.0, 1.0)]);
    }
    let n = QUADRATURE_NODES;
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            libm::sqrt(i.max(j) as f64)
        } else {
            0.0
        }
    });
    let eig = nalgebra::linalg::SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v = eig.eigenvectors[(0, k)];
            (sigma * eig.eigenvalues[k], v * v)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rule)
}

/// A scalar knob that sweeps vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    R,
    Eta,
    CommonPhase,
    DifferentialPhase,
    HwpAngle,
    Alpha,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 6] = [
        SweepParameter::R,
        SweepParameter::Eta,
        SweepParameter::CommonPhase,
        SweepParameter::DifferentialPhase,
        SweepParameter::HwpAngle,
        SweepParameter::Alpha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::R => "r",
            SweepParameter::Eta => "eta",
            SweepParameter::CommonPhase => "common_phase",
            SweepParameter::DifferentialPhase => "differential_phase",
            SweepParameter::HwpAngle => "hwp_angle",
            SweepParameter::Alpha => "alpha",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        SweepParameter::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Evaluates `scenario` with this parameter set to `value`.
    pub fn evaluate(self, scenario: &Scenario, value: f64) -> Result<Outcome> {
        let point = self.configure(scenario, value);
        point
            .scenario
            .evaluate_at(point.common_phase, point.squeezing_phase)
    }

    /// `scenario` with this parameter set to `value`.
    ///
    /// `eta` sets (or inserts) a loss on both wires right after the source;
    /// phases are radians added ahead of the chain; `hwp_angle` is in degrees
    /// and replaces every half-wave plate angle.
    pub fn configure(self, scenario: &Scenario, value: f64) -> SweepPoint {
        let mut point = SweepPoint {
            scenario: scenario.clone(),
            common_phase: 0.0,
            squeezing_phase: 0.0,
        };
        let s = &mut point.scenario;
        match self {
            SweepParameter::R => s.source.r = value,
            SweepParameter::Alpha => s.source.alpha = value,
            SweepParameter::Eta => set_loss(s, value),
            SweepParameter::HwpAngle => {
                for e in &mut s.elements {
                    if let Element::WavePlate(spec) = e {
                        if spec.kind == PlateKind::Half {
                            *spec = WavePlateSpec::half(value);
                        }
                    }
                }
            }
            SweepParameter::CommonPhase => point.common_phase = value,
            SweepParameter::DifferentialPhase => point.squeezing_phase = value,
        }
        point
    }
}

/// One point of a sweep: the scenario plus fixed phase offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub scenario: Scenario,
    pub common_phase: f64,
    pub squeezing_phase: f64,
}

impl SweepPoint {
    pub fn evaluate(&self) -> Result<Outcome> {
        self.scenario
            .evaluate_at(self.common_phase, self.squeezing_phase)
    }

    /// Field on the PBS outputs at the nominal phases.
    pub fn detected(&self) -> Result<GaussianState> {
        self.scenario
            .detected(self.common_phase, self.squeezing_phase)
    }
}

/// Sets the transmissivity of the leading two-wire loss, inserting one if needed.
pub fn set_loss(scenario: &mut Scenario, eta: f64) {
    match scenario.elements.first_mut() {
        Some(Element::Loss {
            target: Target::Both,
            eta: e,
        }) => *e = eta,
        _ => scenario.elements.insert(
            0,
            Element::Loss {
                target: Target::Both,
                eta,
            },
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::PumpPhase;
    use core::f64::consts::{FRAC_PI_2, PI};

    fn with_r(r: f64) -> Scenario {
        Scenario::direct(SourceSpec {
            r,
            ..SourceSpec::default()
        })
    }

    #[test]
    fn ideal_chain_measures_the_source_criterion() {
        let out = with_r(1.0).evaluate().unwrap();
        assert!((out.measured.total - out.source.total).abs() < 1e-10);
        assert!((out.measured.total - 2.0 * libm::exp(-2.0)).abs() < 1e-10);
        assert!(out.measured.entangled);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn coherent_beams_are_not_entangled() {
        let out = with_r(0.0).evaluate().unwrap();
        assert!((out.measured.total - 2.0).abs() < 1e-12);
        assert!(!out.measured.entangled);
        assert!(!out.source.entangled);
    }

    #[test]
    fn amplified_source_fails_the_direct_scheme() {
        let s = Scenario::direct(SourceSpec {
            pump_phase: PumpPhase::Amplification,
            ..SourceSpec::default()
        });
        let out = s.evaluate().unwrap();
        assert!(!out.measured.entangled);
        assert!(!out.source.entangled);
        assert!(out.source_mirrored.entangled);
    }

    #[test]
    fn squeezing_phase_degrades_the_sum_current() {
        let r: f64 = 1.0;
        let s = with_r(r);
        for phi in [0.0, FRAC_PI_2, PI] {
            let out = SweepParameter::DifferentialPhase.evaluate(&s, phi).unwrap();
            let expect = libm::cosh(2.0 * r) - libm::cos(phi) * libm::sinh(2.0 * r);
            assert!((out.measured.v_plus - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn carrier_phase_on_idler_alone_leaves_currents_unchanged() {
        let base = with_r(1.0).evaluate().unwrap();
        let mut s = with_r(1.0);
        s.elements.insert(
            0,
            Element::Phase {
                target: Target::Idler,
                theta: 1.1,
            },
        );
        let out = s.evaluate().unwrap();
        assert!((out.sum_variance - base.sum_variance).abs() < 1e-8);
        assert!((out.diff_variance - base.diff_variance).abs() < 1e-8);
    }

    #[test]
    fn quadrature_rule_integrates_gaussian_moments() {
        let rule = quadrature_rule(0.7).unwrap();
        let w: f64 = rule.iter().map(|p| p.1).sum();
        let m2: f64 = rule.iter().map(|p| p.1 * p.0 * p.0).sum();
        let c: f64 = rule.iter().map(|p| p.1 * libm::cos(2.0 * p.0)).sum();
        assert!((w - 1.0).abs() < 1e-12);
        assert!((m2 - 0.49).abs() < 1e-12);
        assert!((c - libm::exp(-2.0 * 0.49)).abs() < 1e-12);
        assert!(quadrature_rule(-1.0).is_err());
        assert_eq!(quadrature_rule(0.0).unwrap(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn squeezing_phase_jitter_averages_the_rotation() {
        let r: f64 = 1.0;
        let sigma: f64 = 0.3;
        let mut s = with_r(r);
        s.noise.differential_rms = sigma;
        let out = s.evaluate().unwrap();
        let expect = libm::cosh(2.0 * r) - libm::exp(-sigma * sigma / 2.0) * libm::sinh(2.0 * r);
        assert!((out.measured.v_plus - expect).abs() < 1e-9, "{}", out.measured.v_plus);
    }

    #[test]
    fn common_phase_jitter_is_harmless_for_direct_detection_only() {
        let mut direct = with_r(1.0);
        direct.noise.common_rms = 0.5;
        let d = direct.evaluate().unwrap();
        assert!((d.measured.total - 2.0 * libm::exp(-2.0)).abs() < 1e-9);

        let mut hd = Scenario::homodyne(SourceSpec {
            alpha: 1.0,
            ..SourceSpec::default()
        });
        let clean = hd.evaluate().unwrap();
        assert!((clean.measured.total - 2.0 * libm::exp(-2.0)).abs() < 1e-12);
        hd.noise.common_rms = 0.5;
        assert!(!hd.evaluate().unwrap().measured.entangled);
    }

    #[test]
    fn hwp_angle_optimum() {
        let s = with_r(1.0);
        let at = |deg: f64| SweepParameter::HwpAngle.evaluate(&s, deg).unwrap().measured.total;
        let best = at(22.5);
        assert!(at(21.5) > best && at(23.5) > best);
        assert!(at(22.0) < at(21.5));
    }

    #[test]
    fn electronic_noise_adds_to_both_currents() {
        let mut s = with_r(1.0);
        let base = s.evaluate().unwrap();
        s.electronic_noise = 10.0;
        let out = s.evaluate().unwrap();
        assert!((out.sum_variance - base.sum_variance - 10.0).abs() < 1e-9);
        s.electronic_noise = -1.0;
        assert!(s.evaluate().is_err());
    }

    #[test]
    fn loss_sweep_inserts_then_updates() {
        let mut s = with_r(1.0);
        set_loss(&mut s, 0.5);
        set_loss(&mut s, 0.5);
        assert_eq!(s.elements.len(), 3);
        let out = s.evaluate().unwrap();
        assert!((out.measured.total - 1.135_335_283_236_612_7).abs() < 1e-10);
    }

    #[test]
    fn sweep_names_round_trip() {
        for p in SweepParameter::ALL {
            assert_eq!(SweepParameter::parse(p.name()), Some(p));
        }
        assert_eq!(SweepParameter::parse("temperature"), None);
    }
}
