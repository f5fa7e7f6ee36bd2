//! Output records and their CSV / JSON-lines encodings.
//!
//! Every subcommand emits a flat stream of [`Record`]s. Result rows fill the
//! variance and criterion columns, check rows fill `value` through `pass`; the
//! rest stay empty (`null` in JSON). Column set and order are fixed per
//! [`SCHEMA_VERSION`].

use std::io::Write;

use eprsim_core::criteria::CriterionReport;
use eprsim_core::oracle::{McConfig, McReport};
use eprsim_core::scenario::{Outcome, Scenario};
use serde::Serialize;

use crate::config::Format;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Significant digits kept in CSV output.
pub const CSV_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Result,
    Check,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub schema_version: u32,
    pub command: &'static str,
    pub kind: Kind,
    pub scenario: String,
    pub name: String,
    pub analysis_frequency: String,
    pub param: Option<&'static str>,
    pub param_value: Option<f64>,
    pub alpha: Option<f64>,
    pub r: Option<f64>,
    pub sum_variance: Option<f64>,
    pub diff_variance: Option<f64>,
    pub alpha_sq: Option<f64>,
    pub v_plus: Option<f64>,
    pub v_minus: Option<f64>,
    pub total: Option<f64>,
    pub bound: Option<f64>,
    pub entangled: Option<bool>,
    pub margin_db: Option<f64>,
    pub value: Option<f64>,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
    pub mc_samples: Option<u64>,
    pub mc_seed: Option<u64>,
    pub mc_sum_variance: Option<f64>,
    pub mc_sum_standard_error: Option<f64>,
    pub mc_sum_relative_error: Option<f64>,
    pub mc_diff_variance: Option<f64>,
    pub mc_diff_standard_error: Option<f64>,
    pub mc_diff_relative_error: Option<f64>,
}

pub const COLUMNS: [&str; 31] = [
    "schema_version",
    "command",
    "kind",
    "scenario",
    "name",
    "analysis_frequency",
    "param",
    "param_value",
    "alpha",
    "r",
    "sum_variance",
    "diff_variance",
    "alpha_sq",
    "v_plus",
    "v_minus",
    "total",
    "bound",
    "entangled",
    "margin_db",
    "value",
    "expected",
    "tolerance",
    "pass",
    "mc_samples",
    "mc_seed",
    "mc_sum_variance",
    "mc_sum_standard_error",
    "mc_sum_relative_error",
    "mc_diff_variance",
    "mc_diff_standard_error",
    "mc_diff_relative_error",
];

impl Record {
    fn blank(command: &'static str, kind: Kind, scenario: &str, name: &str, freq: &str) -> Self {
        Record {
            schema_version: SCHEMA_VERSION,
            command,
            kind,
            scenario: scenario.into(),
            name: name.into(),
            analysis_frequency: freq.into(),
            param: None,
            param_value: None,
            alpha: None,
            r: None,
            sum_variance: None,
            diff_variance: None,
            alpha_sq: None,
            v_plus: None,
            v_minus: None,
            total: None,
            bound: None,
            entangled: None,
            margin_db: None,
            value: None,
            expected: None,
            tolerance: None,
            pass: None,
            mc_samples: None,
            mc_seed: None,
            mc_sum_variance: None,
            mc_sum_standard_error: None,
            mc_sum_relative_error: None,
            mc_diff_variance: None,
            mc_diff_standard_error: None,
            mc_diff_relative_error: None,
        }
    }

    /// A criterion row without current variances.
    pub fn criterion(
        command: &'static str,
        scenario: &str,
        name: &str,
        freq: &str,
        source: &Scenario,
        rep: &CriterionReport,
    ) -> Self {
        let mut r = Record::blank(command, Kind::Result, scenario, name, freq);
        r.alpha = Some(source.source.alpha);
        r.r = Some(source.source.r);
        r.v_plus = Some(rep.v_plus);
        r.v_minus = Some(rep.v_minus);
        r.total = Some(rep.total);
        r.bound = Some(rep.bound);
        r.entangled = Some(rep.entangled);
        r.margin_db = Some(rep.margin_db);
        r
    }

    /// The measured-current row of an evaluated scenario.
    pub fn outcome(
        command: &'static str,
        scenario: &str,
        name: &str,
        freq: &str,
        source: &Scenario,
        out: &Outcome,
    ) -> Self {
        let mut r = Record::criterion(command, scenario, name, freq, source, &out.measured);
        r.sum_variance = Some(out.sum_variance);
        r.diff_variance = Some(out.diff_variance);
        r.alpha_sq = Some(out.alpha_sq);
        r
    }

    pub fn check(command: &'static str, scenario: &str, check: &Check) -> Self {
        let mut r = Record::blank(command, Kind::Check, scenario, &check.name, "");
        r.value = Some(check.value);
        r.expected = Some(check.expected);
        r.tolerance = Some(check.tolerance);
        r.pass = Some(check.pass);
        r
    }

    pub fn with_param(mut self, param: &'static str, value: f64) -> Self {
        self.param = Some(param);
        self.param_value = Some(value);
        self
    }

    pub fn with_mc(mut self, config: &McConfig, sum: &McReport, diff: &McReport) -> Self {
        self.mc_samples = Some(sum.n_samples);
        self.mc_seed = Some(config.seed);
        self.mc_sum_variance = Some(sum.mc_variance);
        self.mc_sum_standard_error = Some(sum.standard_error);
        self.mc_sum_relative_error = Some(sum.relative_error);
        self.mc_diff_variance = Some(diff.mc_variance);
        self.mc_diff_standard_error = Some(diff.standard_error);
        self.mc_diff_relative_error = Some(diff.relative_error);
        self
    }

    fn csv_fields(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
        let b = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
        let u = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.schema_version.to_string(),
            self.command.into(),
            match self.kind {
                Kind::Result => "result".into(),
                Kind::Check => "check".into(),
            },
            self.scenario.clone(),
            self.name.clone(),
            self.analysis_frequency.clone(),
            self.param.unwrap_or_default().into(),
            f(self.param_value),
            f(self.alpha),
            f(self.r),
            f(self.sum_variance),
            f(self.diff_variance),
            f(self.alpha_sq),
            f(self.v_plus),
            f(self.v_minus),
            f(self.total),
            f(self.bound),
            b(self.entangled),
            f(self.margin_db),
            f(self.value),
            f(self.expected),
            f(self.tolerance),
            b(self.pass),
            u(self.mc_samples),
            u(self.mc_seed),
            f(self.mc_sum_variance),
            f(self.mc_sum_standard_error),
            f(self.mc_sum_relative_error),
            f(self.mc_diff_variance),
            f(self.mc_diff_standard_error),
            f(self.mc_diff_relative_error),
        ]
    }
}

/// A named identity or invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `|value - expected| <= tolerance`.
    pub fn close(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            expected,
            tolerance,
            pass: (value - expected).abs() <= tolerance,
        }
    }

    /// Passes when `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            expected: 0.0,
            tolerance: bound,
            pass: value <= bound,
        }
    }

    pub fn flag(name: impl Into<String>, value: bool, expected: bool) -> Self {
        Check {
            name: name.into(),
            value: value as u8 as f64,
            expected: expected as u8 as f64,
            tolerance: 0.0,
            pass: value == expected,
        }
    }
}

/// `x` rounded to [`CSV_DIGITS`] significant digits. Magnitudes outside
/// `[1e-4, 1e15)` use exponent notation.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", CSV_DIGITS - 1, x).parse().unwrap_or(x);
    let a = rounded.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[Record], format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut out = csv::Writer::from_writer(&mut w);
            out.write_record(COLUMNS)?;
            for r in records {
                out.write_record(r.csv_fields())?;
            }
            out.flush()?;
        }
        Format::Json => {
            for r in records {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
