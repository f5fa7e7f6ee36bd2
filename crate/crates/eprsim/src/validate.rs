//! The `validate` subcommand: the model's identities and invariants as data.

use std::f64::consts::PI;

use eprsim_core::criteria::{duan_sum, Orientation};
use eprsim_core::gaussian::{symplectic_form, GaussianState, SymplecticOp};
use eprsim_core::optics::{
    loss_on, nopa_source, pbs, phase_shift, rotate_fluctuations, PbsPorts, PumpPhase, SourceSpec,
    WavePlateSpec,
};
use eprsim_core::oracle::{sample_wigner, McConfig, Moments};
use eprsim_core::scenario::{Element, Scenario, SweepParameter, Target, PORT_C, PORT_D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Settings;
use crate::error::CliError;
use crate::record::{Check, Record};
use crate::run::{identity_checks, mc_currents, Report, CRITERION_TOL, EXACT_TOL};

pub const PHYSICALITY_TOL: f64 = 1e-9;
pub const PHASE_TOL: f64 = 1e-10;
pub const DIFFERENTIAL_TOL: f64 = 1e-9;
pub const MC_RELATIVE_TOL: f64 = 0.02;
pub const MC_SAMPLER_SIGMAS: f64 = 5.0;
pub const RANDOM_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValidateOptions {
    pub mc: bool,
    /// Added to one off-diagonal covariance entry of the symmetry probe.
    pub inject_asymmetry: f64,
}

pub fn validate(settings: &Settings, opts: ValidateOptions) -> Result<Report, CliError> {
    let seed = settings.mc_or_default().seed;
    let mut checks = Vec::new();
    checks.extend(operator_checks(seed)?);
    checks.extend(state_checks(seed, opts.inject_asymmetry)?);
    checks.extend(measurement_checks(seed)?);
    if opts.mc {
        checks.extend(mc_checks(&settings.mc_or_default())?);
    }
    let records = checks
        .iter()
        .map(|c| Record::check("validate", &settings.id, c))
        .collect();
    Ok(Report::new(records))
}

fn symplectic_gap(op: &SymplecticOp) -> f64 {
    let s = op.matrix();
    let omega = symplectic_form(op.modes());
    (s * &omega * s.transpose() - omega).amax()
}

fn source(alpha: f64, r: f64) -> SourceSpec {
    SourceSpec {
        alpha,
        r,
        ..SourceSpec::default()
    }
}

fn operator_checks(seed: u64) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut gap, mut det) = (0.0f64, 0.0f64);
    for _ in 0..RANDOM_TRIALS {
        let angle = rng.random_range(-360.0..360.0);
        let theta = rng.random_range(-2.0 * PI..2.0 * PI);
        let eps = rng.random_range(-PI..PI);
        let ops = [
            WavePlateSpec::quarter(angle).op("x", "y")?,
            WavePlateSpec::half(angle).op("x", "y")?,
            phase_shift(&["x"], theta)?,
            phase_shift(&["x", "y"], theta)?,
            pbs(
                PbsPorts {
                    inputs: ["p", "s", "u", "v"],
                    outputs: ["c", "e", "f", "d"],
                },
                eps,
            )?,
        ];
        for op in &ops {
            gap = gap.max(symplectic_gap(op));
            det = det.max((op.matrix().clone().determinant() - 1.0).abs());
        }
    }
    let q = WavePlateSpec::quarter(0.0).op("x", "y")?;
    let four = q.after(&q)?.after(&q)?.after(&q)?;
    let period = (four.matrix() - SymplecticOp::identity(&["x", "y"])?.matrix()).amax();
    Ok(vec![
        Check::at_most("symplectic_condition.max_deviation", gap, EXACT_TOL),
        Check::at_most("determinant.max_deviation", det, EXACT_TOL),
        Check::at_most("quarter_wave_period", period, EXACT_TOL),
    ])
}

fn state_checks(seed: u64, asymmetry: f64) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    for r in [0.3, 1.0, 2.0] {
        let rep = nopa_source(&source(100.0, r), "a", "b")?.check_physicality();
        let gap = rep
            .symplectic_eigenvalues
            .iter()
            .map(|nu| (nu - 1.0).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most(format!("pure_source_spectrum.r_{r}"), gap, PHYSICALITY_TOL));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut min_nu = f64::INFINITY;
    for _ in 0..RANDOM_TRIALS {
        let spec = SourceSpec {
            alpha: rng.random_range(0.0..200.0),
            r: rng.random_range(0.0..2.5),
            pump_phase: if rng.random_bool(0.5) {
                PumpPhase::Amplification
            } else {
                PumpPhase::Deamplification
            },
            excess_noise: rng.random_range(0.0..0.5),
            efficiency: rng.random_range(0.05..=1.0),
        };
        let mut st = nopa_source(&spec, "x", "y")?;
        st = st.apply(&WavePlateSpec::quarter(rng.random_range(0.0..180.0)).op("x", "y")?)?;
        st = rotate_fluctuations(&st, "y", rng.random_range(-PI..PI))?;
        st = st.apply(&phase_shift(&["x"], rng.random_range(-PI..PI))?)?;
        st = loss_on(&st, &["x"], rng.random_range(0.0..=1.0))?;
        st = st.apply(&WavePlateSpec::half(rng.random_range(0.0..180.0)).op("x", "y")?)?;
        st = st.with_vacuum("u")?.with_vacuum("v")?;
        st = st.apply(&pbs(
            PbsPorts {
                inputs: ["x", "y", "u", "v"],
                outputs: ["c", "c_r", "d_t", "d"],
            },
            rng.random_range(-0.2..0.2),
        )?)?;
        min_nu = min_nu.min(st.check_physicality().min_symplectic_eigenvalue);
    }
    checks.push(Check::at_most(
        "random_circuits.eigenvalue_deficit",
        1.0 - min_nu,
        PHYSICALITY_TOL,
    ));

    let base = nopa_source(&source(100.0, 1.0), "a", "b")?;
    let mut cov = base.cov().clone();
    cov[(0, 1)] += asymmetry;
    let accepted = GaussianState::new(base.registry().clone(), base.mean().clone(), cov)
        .map(|s| s.check_physicality().physical)
        .unwrap_or(false);
    checks.push(Check {
        name: "covariance_symmetry".into(),
        value: asymmetry,
        expected: 0.0,
        tolerance: eprsim_core::gaussian::SYMMETRY_TOL,
        pass: accepted,
    });

    for r in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let s = nopa_source(&source(100.0, r), "a", "b")?;
        let rep = duan_sum(&s, "a", "b", Orientation::SumDifference)?;
        checks.push(Check::close(
            format!("criterion_closed_form.r_{r}"),
            rep.total,
            2.0 * (-2.0 * r).exp(),
            CRITERION_TOL,
        ));
    }
    let coherent = duan_sum(&nopa_source(&source(100.0, 0.0), "a", "b")?, "a", "b", Orientation::SumDifference)?;
    checks.push(Check::flag(
        "criterion_boundary",
        coherent.total == 2.0 && !coherent.entangled,
        true,
    ));

    let totals = |f: &dyn Fn(f64) -> Result<f64, CliError>, grid: &[f64]| -> Result<Vec<f64>, CliError> {
        grid.iter().map(|&v| f(v)).collect()
    };
    let r_grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
    let by_r = totals(
        &|r| Ok(duan_sum(&nopa_source(&source(100.0, r), "a", "b")?, "a", "b", Orientation::SumDifference)?.total),
        &r_grid,
    )?;
    checks.push(Check::flag(
        "criterion_non_increasing_in_r",
        by_r.windows(2).all(|w| w[1] <= w[0]),
        true,
    ));
    let eta_grid: Vec<f64> = (0..=20).map(|i| 1.0 - i as f64 * 0.05).collect();
    let src = nopa_source(&source(100.0, 1.0), "a", "b")?;
    let by_eta = totals(
        &|eta| Ok(duan_sum(&loss_on(&src, &["a", "b"], eta)?, "a", "b", Orientation::SumDifference)?.total),
        &eta_grid,
    )?;
    checks.push(Check::flag(
        "criterion_non_decreasing_with_loss",
        by_eta.windows(2).all(|w| w[1] >= w[0]),
        true,
    ));
    Ok(checks)
}

fn measurement_checks(seed: u64) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    for alpha in [1.0, 10.0, 100.0] {
        for c in identity_checks(&source(alpha, 1.0), None)? {
            if c.name.contains("coefficient") {
                checks.push(Check {
                    name: format!("alpha_{alpha}.{}", c.name),
                    ..c
                });
            }
        }
    }

    let mut worst_prefactor = 0.0f64;
    for alpha in [1.0, 10.0, 30.0, 100.0, 300.0] {
        for r in [0.0, 0.5, 1.0, 1.5, 2.0] {
            for c in identity_checks(&source(alpha, r), None)? {
                if c.name.ends_with("current_variance.relative") {
                    worst_prefactor = worst_prefactor.max((c.value - c.expected).abs());
                }
            }
        }
    }
    checks.push(Check::at_most("current_prefactor.max_relative_deviation", worst_prefactor, EXACT_TOL));

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut worst_total = 0.0f64;
    for _ in 0..100 {
        let spec = source(rng.random_range(10.0..1000.0), rng.random_range(0.0..2.0));
        for c in identity_checks(&spec, None)? {
            if c.name == "criterion_total" {
                worst_total = worst_total.max((c.value - c.expected).abs());
            }
        }
    }
    checks.push(Check::at_most("end_to_end.max_deviation", worst_total, CRITERION_TOL));

    let scenario = Scenario::direct(source(100.0, 1.0));
    let base = scenario.evaluate()?;
    let mut worst_common = 0.0f64;
    for i in 0..100 {
        let theta = 2.0 * PI * i as f64 / 99.0;
        let out = SweepParameter::CommonPhase.evaluate(&scenario, theta)?;
        worst_common = worst_common
            .max((out.sum_variance - base.sum_variance).abs())
            .max((out.diff_variance - base.diff_variance).abs());
    }
    checks.push(Check::at_most("common_phase_invariance.max_shift", worst_common, PHASE_TOL));

    let r: f64 = 1.0;
    for (label, phi) in [("0", 0.0), ("pi_2", PI / 2.0), ("pi", PI)] {
        let out = SweepParameter::DifferentialPhase.evaluate(&scenario, phi)?;
        checks.push(Check::close(
            format!("differential_phase.phi_{label}"),
            out.measured.v_plus,
            (2.0 * r).cosh() - phi.cos() * (2.0 * r).sinh(),
            DIFFERENTIAL_TOL,
        ));
    }

    let mut idler = scenario.clone();
    idler.elements.insert(
        0,
        Element::Phase {
            target: Target::Idler,
            theta: PI / 3.0,
        },
    );
    let out = idler.evaluate()?;
    checks.push(Check::at_most(
        "idler_carrier_phase.max_shift",
        (out.measured.total - base.measured.total).abs(),
        PHASE_TOL,
    ));

    let angles: Vec<f64> = (0..=20).map(|i| 21.5 + 0.1 * i as f64).collect();
    let mut best = (f64::INFINITY, f64::NAN);
    for &a in &angles {
        let t = SweepParameter::HwpAngle.evaluate(&scenario, a)?.measured.total;
        if t < best.0 {
            best = (t, a);
        }
    }
    checks.push(Check::close("hwp_angle_argmin", best.1, 22.5, 1e-9));
    Ok(checks)
}

fn mc_checks(config: &McConfig) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let detected = |alpha: f64, r: f64| Scenario::direct(source(alpha, r)).detected(0.0, 0.0);

    let (sum, diff) = mc_currents(&detected(100.0, 1.0)?, config)?;
    checks.push(Check::at_most("mc.sum_current.relative_error", sum.relative_error, MC_RELATIVE_TOL));
    checks.push(Check::at_most("mc.diff_current.relative_error", diff.relative_error, MC_RELATIVE_TOL));
    let (shot, _) = mc_currents(&detected(100.0, 0.0)?, config)?;
    checks.push(Check::at_most("mc.shot_noise.relative_error", shot.relative_error, MC_RELATIVE_TOL));

    let mut errors = Vec::new();
    for alpha in [25.0, 50.0, 100.0, 200.0] {
        let (s, d) = mc_currents(&detected(alpha, 1.0)?, config)?;
        errors.push(s.relative_error.max(d.relative_error));
    }
    checks.push(Check::flag(
        "mc.error_decreases_with_alpha",
        errors.windows(2).all(|w| w[1] < w[0]),
        true,
    ));

    let scenario = Scenario::direct(source(100.0, 1.0));
    let turned = SweepParameter::CommonPhase.configure(&scenario, 0.7).detected()?;
    let (s7, d7) = mc_currents(&turned, config)?;
    let shift = |a: f64, b: f64, sa: f64, sb: f64| (a - b).abs() / (sa * sa + sb * sb).sqrt();
    checks.push(Check::at_most(
        "mc.common_phase.sum_shift_in_standard_errors",
        shift(s7.mc_variance, sum.mc_variance, s7.standard_error, sum.standard_error),
        1.0,
    ));
    checks.push(Check::at_most(
        "mc.common_phase.diff_shift_in_standard_errors",
        shift(d7.mc_variance, diff.mc_variance, d7.standard_error, diff.standard_error),
        1.0,
    ));

    let seq = eprsim_core::oracle::mc_current_variance(&detected(100.0, 1.0)?, &PORT_C, &PORT_D, config)?;
    checks.push(Check::flag("mc.parallel_matches_sequential", seq == (sum, diff), true));
    let again = mc_currents(&detected(100.0, 1.0)?, config)?;
    checks.push(Check::flag("mc.deterministic", again == (sum, diff), true));

    let src = nopa_source(&source(100.0, 1.0), "a", "b")?;
    let mut m = Moments::<4>::default();
    for s in sample_wigner(&src, config)? {
        m.push(&[s[0], s[1], s[2], s[3]]);
    }
    let n = m.count as f64;
    let v = src.cov();
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let se = ((v[(i, i)] * v[(j, j)] + v[(i, j)] * v[(i, j)]) / n).sqrt();
            worst = worst.max((m.covariance(i, j) - v[(i, j)]).abs() / se);
        }
    }
    checks.push(Check::at_most("mc.sampler_covariance.max_standard_errors", worst, MC_SAMPLER_SIGMAS));
    Ok(checks)
}
