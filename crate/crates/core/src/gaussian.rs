//! Multimode Gaussian states in the quadrature picture.
//!
//! Quadratures are `X = a + a†` and `Y = i(a† - a)`, so the vacuum carries unit
//! variance on both and `[X, Y] = 2i`. Slots are ordered `(X₁, Y₁, X₂, Y₂, …)`
//! following the mode registry. The symplectic form is block diagonal with
//! per-mode blocks `[[0, 1], [-1, 0]]`; a covariance matrix is physical iff
//! every symplectic eigenvalue is at least one.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};

/// Largest tolerated `|V - Vᵀ|` entry before construction is refused.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Largest tolerated `|S Ω Sᵀ - Ω|` entry for a symplectic matrix.
pub const SYMPLECTIC_TOL: f64 = 1e-12;
/// Symplectic eigenvalues may fall this far below one and still count as physical.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// One of the two quadratures owned by every mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    X,
    Y,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::Y => 1,
        }
    }
}

/// Ordered, duplicate-free list of mode labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModeRegistry {
    labels: Vec<String>,
}

impl ModeRegistry {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut registry = ModeRegistry::default();
        for label in labels {
            registry.push(label)?;
        }
        if registry.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        Ok(registry)
    }

    /// Appends a mode. Existing slot indices are unchanged.
    pub fn push(&mut self, label: impl Into<String>) -> Result<()> {
        let label = label.into();
        if self.index_of(&label).is_some() {
            return Err(Error::DuplicateLabel(label));
        }
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn require(&self, label: &str) -> Result<usize> {
        self.index_of(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Index of a quadrature slot in the `2N` vector.
    pub fn slot(&self, label: &str, quadrature: Quadrature) -> Result<usize> {
        Ok(2 * self.require(label)? + quadrature.offset())
    }
}

/// The symplectic form for `modes` modes.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Symplectic eigenvalues of a covariance matrix, ascending, one per mode.
///
/// Taken as the moduli of the eigenvalues of `Ω⁻¹ V`, which come in pairs `±iν`.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Vec<f64> {
    let modes = cov.nrows() / 2;
    // Ω⁻¹ = -Ω
    let m = -symplectic_form(modes) * cov;
    let mut moduli: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .map(|z| libm::hypot(z.re, z.im))
        .collect();
    moduli.sort_by(f64::total_cmp);
    moduli.into_iter().step_by(2).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalityReport {
    pub symplectic_eigenvalues: Vec<f64>,
    pub min_symplectic_eigenvalue: f64,
    pub physical: bool,
}

/// A Gaussian state: first moments and covariance over labelled modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    registry: ModeRegistry,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state from raw moments. The covariance is symmetrized; any
    /// asymmetry larger than [`SYMMETRY_TOL`] is rejected.
    pub fn new(registry: ModeRegistry, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = 2 * registry.len();
        if registry.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        if mean.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: mean.len(),
            });
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: cov.nrows().max(cov.ncols()),
            });
        }
        let cov_t = cov.transpose();
        let deviation = max_abs_diff(&cov, &cov_t);
        if deviation.is_nan() || deviation > SYMMETRY_TOL {
            return Err(Error::AsymmetricCovariance { deviation });
        }
        let cov = (cov + cov_t) * 0.5;
        Ok(GaussianState {
            registry,
            mean,
            cov,
        })
    }

    /// Vacuum on every listed mode.
    pub fn vacuum<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let registry = ModeRegistry::new(labels)?;
        let dim = 2 * registry.len();
        Ok(GaussianState {
            registry,
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim),
        })
    }

    pub(crate) fn from_parts(registry: ModeRegistry, mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        let cov = (&cov + cov.transpose()) * 0.5;
        GaussianState {
            registry,
            mean,
            cov,
        }
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub fn labels(&self) -> &[String] {
        self.registry.labels()
    }

    pub fn modes(&self) -> usize {
        self.registry.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Mean `(x̄, ȳ)` of one mode.
    pub fn mode_mean(&self, label: &str) -> Result<(f64, f64)> {
        let i = 2 * self.registry.require(label)?;
        Ok((self.mean[i], self.mean[i + 1]))
    }

    /// The 2×2 covariance block of one mode.
    pub fn mode_cov(&self, label: &str) -> Result<Matrix2<f64>> {
        let i = 2 * self.registry.require(label)?;
        Ok(self.cov.fixed_view::<2, 2>(i, i).into_owned())
    }

    /// Coherent displacement `a → a + amplitude`.
    pub fn displace(&self, label: &str, amplitude: Complex<f64>) -> Result<Self> {
        let i = 2 * self.registry.require(label)?;
        let mut out = self.clone();
        out.mean[i] += 2.0 * amplitude.re;
        out.mean[i + 1] += 2.0 * amplitude.im;
        Ok(out)
    }

    /// Appends an uncorrelated vacuum mode.
    pub fn with_vacuum(&self, label: &str) -> Result<Self> {
        let mut registry = self.registry.clone();
        registry.push(label)?;
        let dim = 2 * registry.len();
        let old = self.mean.len();
        let mut mean = DVector::zeros(dim);
        mean.rows_mut(0, old).copy_from(&self.mean);
        let mut cov = DMatrix::identity(dim, dim);
        cov.view_mut((0, 0), (old, old)).copy_from(&self.cov);
        Ok(GaussianState {
            registry,
            mean,
            cov,
        })
    }

    /// Renames one mode in place.
    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let i = self.registry.require(from)?;
        if from != to && self.registry.index_of(to).is_some() {
            return Err(Error::DuplicateLabel(to.to_string()));
        }
        let mut out = self.clone();
        out.registry.labels[i] = to.to_string();
        Ok(out)
    }

    /// Builds a coefficient vector over this state's slots.
    pub fn coefficients(&self, terms: &[(&str, Quadrature, f64)]) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(2 * self.modes());
        for &(label, q, weight) in terms {
            v[self.registry.slot(label, q)?] += weight;
        }
        Ok(v)
    }

    /// `cᵀ V c` for a coefficient vector over all slots.
    pub fn quadrature_variance(&self, coeffs: &DVector<f64>) -> Result<f64> {
        if coeffs.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: coeffs.len(),
            });
        }
        Ok(coeffs.dot(&(&self.cov * coeffs)))
    }

    pub fn check_physicality(&self) -> PhysicalityReport {
        let symplectic_eigenvalues = symplectic_eigenvalues(&self.cov);
        let min = symplectic_eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        PhysicalityReport {
            physical: min >= 1.0 - PHYSICALITY_TOL,
            min_symplectic_eigenvalue: min,
            symplectic_eigenvalues,
        }
    }

    pub fn require_physical(&self) -> Result<()> {
        let report = self.check_physicality();
        if report.physical {
            Ok(())
        } else {
            Err(Error::NotPhysical {
                min_symplectic_eigenvalue: report.min_symplectic_eigenvalue,
            })
        }
    }

    /// Applies an affine symplectic map to the modes named by `op.inputs()`.
    /// Those modes take the op's output labels; all other modes are untouched.
    pub fn apply(&self, op: &SymplecticOp) -> Result<Self> {
        let embedded = op.embedding(&self.registry)?;
        let mean = &embedded.matrix * &self.mean + &embedded.shift;
        let cov = &embedded.matrix * &self.cov * embedded.matrix.transpose();
        Ok(GaussianState::from_parts(embedded.registry, mean, cov))
    }
}

/// An op lifted to act on every mode of a registry.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// Full `2N × 2N` matrix, identity on untouched modes.
    pub matrix: DMatrix<f64>,
    pub shift: DVector<f64>,
    /// Registry after the op: touched positions carry the output labels.
    pub registry: ModeRegistry,
}

/// Affine Gaussian unitary: `r → S r + d` on the input modes, which are then
/// renamed to the output labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticOp {
    matrix: DMatrix<f64>,
    displacement: DVector<f64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

fn unique_labels(labels: &[String]) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

fn owned(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

impl SymplecticOp {
    pub fn new(
        matrix: DMatrix<f64>,
        displacement: DVector<f64>,
        inputs: &[&str],
        outputs: &[&str],
    ) -> Result<Self> {
        let op = SymplecticOp {
            matrix,
            displacement,
            inputs: owned(inputs),
            outputs: owned(outputs),
        };
        op.validate()?;
        Ok(op)
    }

    /// Linear op acting in place (outputs keep the input labels).
    pub fn linear(matrix: DMatrix<f64>, labels: &[&str]) -> Result<Self> {
        let dim = matrix.nrows();
        SymplecticOp::new(matrix, DVector::zeros(dim), labels, labels)
    }

    pub fn identity(labels: &[&str]) -> Result<Self> {
        let dim = 2 * labels.len();
        SymplecticOp::linear(DMatrix::identity(dim, dim), labels)
    }

    /// Lifts a passive linear mode map `b_j = Σ_k U_jk a_k` to quadratures.
    pub fn from_mode_matrix(
        modes: &DMatrix<Complex<f64>>,
        inputs: &[&str],
        outputs: &[&str],
    ) -> Result<Self> {
        let n = modes.nrows();
        let mut s = DMatrix::zeros(2 * n, 2 * modes.ncols());
        for j in 0..n {
            for k in 0..modes.ncols() {
                let u = modes[(j, k)];
                s[(2 * j, 2 * k)] = u.re;
                s[(2 * j, 2 * k + 1)] = -u.im;
                s[(2 * j + 1, 2 * k)] = u.im;
                s[(2 * j + 1, 2 * k + 1)] = u.re;
            }
        }
        SymplecticOp::new(s, DVector::zeros(2 * n), inputs, outputs)
    }

    fn validate(&self) -> Result<()> {
        let dim = 2 * self.inputs.len();
        if self.inputs.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        if self.outputs.len() != self.inputs.len() {
            return Err(Error::WiringMismatch(format!(
                "{} inputs but {} outputs",
                self.inputs.len(),
                self.outputs.len()
            )));
        }
        unique_labels(&self.inputs)?;
        unique_labels(&self.outputs)?;
        for found in [self.matrix.nrows(), self.matrix.ncols(), self.displacement.len()] {
            if found != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found,
                });
            }
        }
        let deviation = self.symplectic_deviation();
        if deviation.is_nan() || deviation >= SYMPLECTIC_TOL {
            return Err(Error::NotSymplectic { deviation });
        }
        Ok(())
    }

    /// `max |S Ω Sᵀ - Ω|`.
    pub fn symplectic_deviation(&self) -> f64 {
        let omega = symplectic_form(self.inputs.len());
        let lhs = &self.matrix * &omega * self.matrix.transpose();
        max_abs_diff(&lhs, &omega)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.displacement
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn modes(&self) -> usize {
        self.inputs.len()
    }

    /// Same map with renamed outputs.
    pub fn with_outputs(&self, outputs: &[&str]) -> Result<Self> {
        let op = SymplecticOp {
            outputs: owned(outputs),
            ..self.clone()
        };
        op.validate()?;
        Ok(op)
    }

    /// Extends the op with identity wires for `extra` labels.
    pub fn embed(&self, extra: &[&str]) -> Result<Self> {
        let extra = extra
            .iter()
            .filter(|l| !self.inputs.iter().any(|i| i == *l))
            .copied()
            .collect::<Vec<_>>();
        for l in &extra {
            if self.outputs.iter().any(|o| o == l) {
                return Err(Error::WiringMismatch(format!(
                    "`{l}` is already an output of this op"
                )));
            }
        }
        let old = self.matrix.nrows();
        let dim = old + 2 * extra.len();
        let mut matrix = DMatrix::identity(dim, dim);
        matrix.view_mut((0, 0), (old, old)).copy_from(&self.matrix);
        let mut displacement = DVector::zeros(dim);
        displacement.rows_mut(0, old).copy_from(&self.displacement);
        let mut inputs = self.inputs.clone();
        let mut outputs = self.outputs.clone();
        inputs.extend(extra.iter().map(|s| s.to_string()));
        outputs.extend(extra.iter().map(|s| s.to_string()));
        let op = SymplecticOp {
            matrix,
            displacement,
            inputs,
            outputs,
        };
        op.validate()?;
        Ok(op)
    }

    /// The op's matrix with rows in `outputs` order and columns in `inputs` order.
    pub fn matrix_in_order(&self, inputs: &[&str], outputs: &[&str]) -> Result<DMatrix<f64>> {
        let cols = permutation(&self.inputs, inputs)?;
        let rows = permutation(&self.outputs, outputs)?;
        let dim = self.matrix.nrows();
        Ok(DMatrix::from_fn(dim, dim, |r, c| {
            self.matrix[(2 * rows[r / 2] + r % 2, 2 * cols[c / 2] + c % 2)]
        }))
    }

    /// Lifts the op onto all modes of `registry`.
    pub fn embedding(&self, registry: &ModeRegistry) -> Result<Embedding> {
        self.validate()?;
        let positions = self
            .inputs
            .iter()
            .map(|l| registry.require(l))
            .collect::<Result<Vec<_>>>()?;
        let mut labels = registry.labels().to_vec();
        for (pos, out) in positions.iter().zip(&self.outputs) {
            labels[*pos] = out.clone();
        }
        let out_registry = ModeRegistry::new(labels).map_err(|e| match e {
            Error::DuplicateLabel(l) => {
                Error::WiringMismatch(format!("output `{l}` collides with an untouched mode"))
            }
            other => other,
        })?;
        let dim = 2 * registry.len();
        let mut matrix = DMatrix::identity(dim, dim);
        let mut shift = DVector::zeros(dim);
        for (i, &pi) in positions.iter().enumerate() {
            for (j, &pj) in positions.iter().enumerate() {
                matrix
                    .view_mut((2 * pi, 2 * pj), (2, 2))
                    .copy_from(&self.matrix.view((2 * i, 2 * j), (2, 2)));
            }
            shift[2 * pi] = self.displacement[2 * i];
            shift[2 * pi + 1] = self.displacement[2 * i + 1];
        }
        Ok(Embedding {
            matrix,
            shift,
            registry: out_registry,
        })
    }

    /// `self ∘ early`: apply `early` first.
    pub fn after(&self, early: &SymplecticOp) -> Result<Self> {
        compose(self, early)
    }
}

/// For each label in `wanted`, its index in `have`; the two must be permutations.
fn permutation(have: &[String], wanted: &[&str]) -> Result<Vec<usize>> {
    if have.len() != wanted.len() {
        return Err(Error::WiringMismatch(format!(
            "expected {} labels, got {}",
            have.len(),
            wanted.len()
        )));
    }
    let idx = wanted
        .iter()
        .map(|w| {
            have.iter()
                .position(|h| h == w)
                .ok_or_else(|| Error::WiringMismatch(format!("`{w}` is not wired")))
        })
        .collect::<Result<Vec<_>>>()?;
    unique_labels(&owned(wanted))?;
    Ok(idx)
}

/// Composes two ops: `late` consumes exactly the modes `early` produces.
pub fn compose(late: &SymplecticOp, early: &SymplecticOp) -> Result<SymplecticOp> {
    let early_outputs: Vec<&str> = early.outputs.iter().map(String::as_str).collect();
    // late's columns reordered to match early's output order
    let cols = permutation(&late.inputs, &early_outputs)?;
    let dim = late.matrix.nrows();
    let reordered = DMatrix::from_fn(dim, dim, |r, c| {
        late.matrix[(r, 2 * cols[c / 2] + c % 2)]
    });
    let op = SymplecticOp {
        matrix: &reordered * &early.matrix,
        displacement: &reordered * &early.displacement + &late.displacement,
        inputs: early.inputs.clone(),
        outputs: late.outputs.clone(),
    };
    op.validate()?;
    Ok(op)
}
