//! The `demo`, `sweep` and `mc` subcommands.

use eprsim_core::criteria::{duan_from_currents, duan_sum, Orientation};
use eprsim_core::detection::{measure_currents, LinearObservable};
use eprsim_core::gaussian::{GaussianState, Quadrature, SymplecticOp};
use eprsim_core::optics::{
    decomposition_reference, loss_on, measurement_chain, nopa_source, pbs, SourceSpec,
};
use eprsim_core::oracle::{McConfig, McReport, Moments, MonteCarlo, SplitCurrents};
use eprsim_core::scenario::{Scheme, SweepParameter, PBS_PORTS, PORT_C, PORT_D, X_WIRE, Y_WIRE};
use rayon::prelude::*;

use crate::config::Settings;
use crate::error::CliError;
use crate::record::{Check, Record};

/// Max-norm tolerance for matrix and coefficient identities.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance on the criterion total measured through the currents.
pub const CRITERION_TOL: f64 = 1e-10;

/// Outcome of a subcommand: the records plus whether every check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub records: Vec<Record>,
    pub ok: bool,
}

impl Report {
    pub fn new(records: Vec<Record>) -> Self {
        let ok = records.iter().all(|r| r.pass != Some(false));
        Report { records, ok }
    }
}

/// The ideal detection pipeline on one source: wires `x`, `y` with the two
/// PBS vacuum ports appended, and the wave-plate + PBS op acting on them.
pub struct Pipeline {
    pub wires: GaussianState,
    pub op: SymplecticOp,
    pub detected: GaussianState,
}

impl Pipeline {
    /// `eta` is a loss on both beams between source and wave plates.
    pub fn new(source: &SourceSpec, eta: Option<f64>) -> Result<Self, CliError> {
        let mut wires = nopa_source(source, X_WIRE, Y_WIRE)?;
        if let Some(eta) = eta {
            wires = loss_on(&wires, &[X_WIRE, Y_WIRE], eta)?;
        }
        let [p, s, vt, vr] = PBS_PORTS.inputs;
        let wires = wires.with_vacuum(vt)?.with_vacuum(vr)?;
        // p exits on the y wire, s on the x wire
        let chain = measurement_chain(X_WIRE, Y_WIRE, p, s)?.embed(&[vt, vr])?;
        let op = pbs(PBS_PORTS, 0.0)?.after(&chain)?;
        let detected = wires.apply(&op)?;
        Ok(Pipeline { wires, op, detected })
    }

    /// Mean amplitude of the signal wire.
    pub fn alpha(&self) -> Result<f64, CliError> {
        Ok(self.wires.mode_mean(X_WIRE)?.0 / 2.0)
    }

    /// The photon-number observable of a port, expressed on the wire quadratures.
    pub fn port_on_wires(&self, port: &[&str]) -> Result<LinearObservable, CliError> {
        let det = eprsim_core::detection::detect_port(&self.detected, port)?;
        Ok(det.observable.pull_back(&self.op, self.wires.registry())?)
    }
}

/// Largest entry-wise gap between the composed wave plates and the literal
/// two-mode decomposition.
pub fn decomposition_deviation() -> Result<f64, CliError> {
    let chain = measurement_chain("a", "b", "p", "s")?;
    let reference = decomposition_reference("a", "b", "p", "s")?;
    let order_in = ["a", "b"];
    let order_out = ["p", "s"];
    let m = chain.matrix_in_order(&order_in, &order_out)?;
    let r = reference.matrix_in_order(&order_in, &order_out)?;
    let d_gap = (chain.displacement() - reference.displacement()).amax();
    Ok((m - r).amax().max(d_gap))
}

const SLOTS: [(&str, Quadrature, &str); 4] = [
    (X_WIRE, Quadrature::X, "x_signal"),
    (X_WIRE, Quadrature::Y, "y_signal"),
    (Y_WIRE, Quadrature::X, "x_idler"),
    (Y_WIRE, Quadrature::Y, "y_idler"),
];

/// Identity checks on the ideal pipeline for `source` (optionally lossy).
pub fn identity_checks(source: &SourceSpec, eta: Option<f64>) -> Result<Vec<Check>, CliError> {
    let pipe = Pipeline::new(source, eta)?;
    let alpha = pipe.alpha()?;
    let h = 0.5 * alpha;
    let mut checks = vec![Check::at_most(
        "decomposition_matrix",
        decomposition_deviation()?,
        EXACT_TOL,
    )];

    let patterns: [(&str, &[&str], [f64; 4]); 2] = [
        ("port_c", &PORT_C, [h, -h, h, h]),
        ("port_d", &PORT_D, [h, h, h, -h]),
    ];
    for (name, port, expect) in patterns {
        let obs = pipe.port_on_wires(port)?;
        for ((label, q, slot), e) in SLOTS.iter().zip(expect) {
            let c = obs.coefficient(pipe.wires.registry(), label, *q)?;
            checks.push(Check::close(format!("{name}.coefficient.{slot}"), c, e, EXACT_TOL));
        }
    }

    let m = measure_currents(&pipe.detected, &PORT_C, &PORT_D, 0.0)?;
    let w = &pipe.wires;
    let var = |terms: &[(&str, Quadrature, f64)]| -> Result<f64, CliError> {
        Ok(w.quadrature_variance(&w.coefficients(terms)?)?)
    };
    let plus = var(&[(X_WIRE, Quadrature::X, 1.0), (Y_WIRE, Quadrature::X, 1.0)])?;
    let minus = var(&[(X_WIRE, Quadrature::Y, 1.0), (Y_WIRE, Quadrature::Y, -1.0)])?;
    let rel = |name: &str, got: f64, want: f64| {
        Check::close(name, got / want.abs().max(f64::MIN_POSITIVE), want.signum(), EXACT_TOL)
    };
    checks.push(rel("sum_current_variance.relative", m.sum_variance, 0.5 * alpha * alpha * plus));
    checks.push(rel("diff_current_variance.relative", m.diff_variance, 0.5 * alpha * alpha * minus));
    checks.push(rel("shot_noise_calibration.relative", m.alpha_sq, alpha * alpha));

    let measured = duan_from_currents(m.sum_variance, m.diff_variance, m.alpha_sq.sqrt())?;
    let direct = duan_sum(w, X_WIRE, Y_WIRE, Orientation::SumDifference)?;
    checks.push(Check::close("criterion_total", measured.total, direct.total, CRITERION_TOL));
    checks.push(Check::flag("criterion_verdict", measured.entangled, direct.entangled));
    Ok(checks)
}

pub fn demo(settings: &Settings) -> Result<Report, CliError> {
    let s = &settings.scenario;
    let id = &settings.id;
    let freq = &settings.analysis_frequency;
    let mut records = Vec::new();
    let out = s.evaluate()?;
    records.push(Record::outcome("demo", id, "measured", freq, s, &out));
    records.push(Record::criterion("demo", id, "source.sum_difference", freq, s, &out.source));
    records.push(Record::criterion(
        "demo",
        id,
        "source.difference_sum",
        freq,
        s,
        &out.source_mirrored,
    ));
    for c in identity_checks(&s.source, settings.eta)? {
        records.push(Record::check("demo", id, &c));
    }
    Ok(Report::new(records))
}

pub fn sweep(settings: &Settings, param: SweepParameter, grid: &[f64]) -> Result<Report, CliError> {
    let s = &settings.scenario;
    let records = grid
        .par_iter()
        .map(|&v| -> Result<Record, CliError> {
            let point = param.configure(s, v);
            let out = point.evaluate()?;
            let rec = Record::outcome("sweep", &settings.id, "measured", &settings.analysis_frequency, &point.scenario, &out)
                .with_param(param.name(), v);
            match (&settings.mc, point.scenario.scheme) {
                (Some(mc), Scheme::Direct) => {
                    let (sum, diff) = mc_currents(&point.detected()?, mc)?;
                    Ok(rec.with_mc(mc, &sum, &diff))
                }
                _ => Ok(rec),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report::new(records))
}

pub fn mc(settings: &Settings) -> Result<Report, CliError> {
    let s = &settings.scenario;
    if s.scheme != Scheme::Direct {
        return Err(CliError::Config("mc needs paper_scheme detection".into()));
    }
    let config = settings.mc_or_default();
    let out = s.evaluate()?;
    let (sum, diff) = mc_currents(&s.detected(0.0, 0.0)?, &config)?;
    let rec = Record::outcome("mc", &settings.id, "measured", &settings.analysis_frequency, s, &out)
        .with_mc(&config, &sum, &diff);
    Ok(Report::new(vec![rec]))
}

/// Monte Carlo current variances (`i₊`, `i₋`) with batches run in parallel.
/// Batches are merged in index order, so the result does not depend on the
/// thread count.
pub fn mc_currents(detected: &GaussianState, config: &McConfig) -> Result<(McReport, McReport), CliError> {
    let mc = MonteCarlo::new(detected, SplitCurrents::new(detected, &PORT_C, &PORT_D)?, *config)?;
    let parts: Vec<Moments<4>> = (0..config.batches())
        .into_par_iter()
        .map(|b| mc.batch::<4>(b))
        .collect();
    let r = mc.finish(&parts);
    Ok((r[0], r[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Overrides, ScenarioConfig};

    fn settings(o: Overrides) -> Settings {
        Settings::resolve(ScenarioConfig::default(), &o).unwrap()
    }

    #[test]
    fn demo_default_passes() {
        let rep = demo(&settings(Overrides::default())).unwrap();
        assert!(rep.ok);
        let measured = &rep.records[0];
        assert!((measured.total.unwrap() - 2.0 * (-2.0f64).exp()).abs() < 1e-10);
        assert_eq!(measured.entangled, Some(true));
    }

    #[test]
    fn demo_with_loss_still_satisfies_identities() {
        let rep = demo(&settings(Overrides {
            eta: Some(0.5),
            ..Overrides::default()
        }))
        .unwrap();
        assert!(rep.ok, "{:#?}", rep.records.iter().filter(|r| r.pass == Some(false)).collect::<Vec<_>>());
        assert!((rep.records[0].total.unwrap() - 1.135_335_283_236_612_7).abs() < 1e-10);
    }

    #[test]
    fn sweep_keeps_grid_order() {
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let rep = sweep(&settings(Overrides::default()), SweepParameter::R, &grid).unwrap();
        let got: Vec<f64> = rep.records.iter().map(|r| r.param_value.unwrap()).collect();
        assert_eq!(got, grid);
    }

    #[test]
    fn parallel_mc_matches_sequential() {
        let s = settings(Overrides::default());
        let det = s.scenario.detected(0.0, 0.0).unwrap();
        let cfg = McConfig {
            n_samples: 40_000,
            seed: 7,
            batch: 3_000,
        };
        let par = mc_currents(&det, &cfg).unwrap();
        let seq = eprsim_core::oracle::mc_current_variance(&det, &PORT_C, &PORT_D, &cfg).unwrap();
        assert_eq!(par, seq);
    }
}
