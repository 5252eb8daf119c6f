//! Labeled tensor-product Hilbert spaces, dense operators, and density
//! matrices.
//!
//! Spaces are small (a truncated cavity times a two- or three-level
//! dissipator, sometimes a qubit), so everything is dense `DMatrix<C64>`.
//! Modes are identified by label; the tensor order is the declaration order,
//! with the first mode as the outermost Kronecker factor. A basis index
//! decomposes as `i = ((n_0 * d_1 + n_1) * d_2 + n_2) ...`.

use crate::error::{Error, Result};
use crate::{C64, CMatrix, CVector};

/// Largest |deviation| tolerated when checking operator/state hermiticity.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Largest |trace - 1| tolerated when validating a density matrix.
pub const TRACE_TOL: f64 = 1e-9;
/// Most negative eigenvalue tolerated when validating a density matrix.
pub const POSITIVITY_TOL: f64 = -1e-9;

/// Physical character of a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    /// Truncated harmonic ladder with `sqrt(n)` matrix elements.
    Bosonic,
    /// Discrete few-level system (two-level by default, three with the
    /// anharmonic level retained).
    FewLevel,
}

impl ModeKind {
    fn name(self) -> &'static str {
        match self {
            ModeKind::Bosonic => "bosonic",
            ModeKind::FewLevel => "few-level",
        }
    }
}

/// One labeled mode of the composite system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSpec {
    pub label: String,
    pub kind: ModeKind,
    pub dim: usize,
}

impl ModeSpec {
    pub fn bosonic(label: &str, dim: usize) -> Self {
        Self { label: label.into(), kind: ModeKind::Bosonic, dim }
    }

    pub fn few_level(label: &str, dim: usize) -> Self {
        Self { label: label.into(), kind: ModeKind::FewLevel, dim }
    }
}

/// Ordered collection of modes defining the tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    modes: Vec<ModeSpec>,
    total_dim: usize,
}

impl HilbertSpace {
    /// Builds a space, rejecting duplicate labels and dimensions below 2.
    pub fn new(modes: Vec<ModeSpec>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidParameter("a Hilbert space needs at least one mode".into()));
        }
        for (i, m) in modes.iter().enumerate() {
            if m.dim < 2 {
                return Err(Error::InvalidParameter(format!(
                    "mode `{}` has dimension {}; need at least 2",
                    m.label, m.dim
                )));
            }
            if modes[..i].iter().any(|o| o.label == m.label) {
                return Err(Error::InvalidParameter(format!("duplicate mode label `{}`", m.label)));
            }
        }
        let total_dim = modes.iter().map(|m| m.dim).product();
        Ok(Self { modes, total_dim })
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn mode(&self, label: &str) -> Result<&ModeSpec> {
        self.modes
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::UnknownMode(label.into()))
    }

    fn mode_position(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::UnknownMode(label.into()))
    }

    /// Product of mode dimensions before and after the given mode.
    fn split_dims(&self, position: usize) -> (usize, usize) {
        let before = self.modes[..position].iter().map(|m| m.dim).product();
        let after = self.modes[position + 1..].iter().map(|m| m.dim).product();
        (before, after)
    }

    /// Flat basis index for one level per mode, in declaration order.
    pub fn basis_index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.modes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} levels given for {} modes",
                levels.len(),
                self.modes.len()
            )));
        }
        let mut idx = 0;
        for (m, &n) in self.modes.iter().zip(levels) {
            if n >= m.dim {
                return Err(Error::DimensionMismatch(format!(
                    "level {} out of range for mode `{}` (dim {})",
                    n, m.label, m.dim
                )));
            }
            idx = idx * m.dim + n;
        }
        Ok(idx)
    }

    /// Level of `label` encoded in the flat basis index `i`.
    fn level_of(&self, position: usize, i: usize) -> usize {
        let (_, after) = self.split_dims(position);
        (i / after) % self.modes[position].dim
    }
}

/// Which few-level operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FewLevelOp {
    /// `sum_n sqrt(n+1) |n+1><n|` (truncated).
    Raise,
    /// Adjoint of `Raise`.
    Lower,
    /// `diag(+1, -1)` for two levels, so the ground state is the +1
    /// eigenstate and `-(w/2) sigma_z` orders energies correctly. For more
    /// levels this generalizes to `I - 2 N`, which keeps a frequency
    /// modulation `eps sin(wt) sigma_z` acting as a uniform modulation of the
    /// level spacing.
    SigmaZ,
    /// `diag(0, 1, 2, ...)`.
    Number,
}

/// Dense operator on a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: CMatrix,
}

impl Operator {
    /// Wraps a matrix, checking its dimension against the space.
    pub fn from_matrix(space: &HilbertSpace, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != space.total_dim() || matrix.ncols() != space.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a dimension-{} space",
                matrix.nrows(),
                matrix.ncols(),
                space.total_dim()
            )));
        }
        Ok(Self { space: space.clone(), matrix })
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        Self { space: space.clone(), matrix: CMatrix::zeros(space.total_dim(), space.total_dim()) }
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        Self {
            space: space.clone(),
            matrix: CMatrix::identity(space.total_dim(), space.total_dim()),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { space: self.space.clone(), matrix: &self.matrix * c }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.matrix.nrows();
        for i in 0..d {
            for j in i..d {
                if (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Maximum absolute row sum; cheap upper bound on the spectral norm used
    /// for step-size control.
    pub fn infinity_norm(&self) -> f64 {
        (0..self.matrix.nrows())
            .map(|i| self.matrix.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn assert_same_space(&self, other: &Self, what: &str) {
        assert!(
            self.space == other.space,
            "operator {what} mixes different Hilbert spaces"
        );
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.assert_same_space(other, "commutator");
        Self {
            space: self.space.clone(),
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        }
    }
}

impl std::ops::Add<&Operator> for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.assert_same_space(rhs, "sum");
        Operator { space: self.space.clone(), matrix: &self.matrix + &rhs.matrix }
    }
}

impl std::ops::Sub<&Operator> for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.assert_same_space(rhs, "difference");
        Operator { space: self.space.clone(), matrix: &self.matrix - &rhs.matrix }
    }
}

impl std::ops::Mul<&Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.assert_same_space(rhs, "product");
        Operator { space: self.space.clone(), matrix: &self.matrix * &rhs.matrix }
    }
}

impl std::ops::Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(C64::new(rhs, 0.0))
    }
}

/// Annihilation operator of a bosonic mode, embedded in the full space.
pub fn annihilation(space: &HilbertSpace, label: &str) -> Result<Operator> {
    let mode = space.mode(label)?;
    if mode.kind != ModeKind::Bosonic {
        return Err(Error::WrongModeKind {
            label: label.into(),
            expected: "bosonic",
            actual: mode.kind.name(),
        });
    }
    embed(space, label, &ladder_lower(mode.dim))
}

/// Ladder/diagonal operators of a few-level mode, embedded in the full space.
pub fn few_level_op(space: &HilbertSpace, label: &str, which: FewLevelOp) -> Result<Operator> {
    let mode = space.mode(label)?;
    if mode.kind != ModeKind::FewLevel {
        return Err(Error::WrongModeKind {
            label: label.into(),
            expected: "few-level",
            actual: mode.kind.name(),
        });
    }
    let local = match which {
        FewLevelOp::Lower => ladder_lower(mode.dim),
        FewLevelOp::Raise => ladder_lower(mode.dim).adjoint(),
        FewLevelOp::Number => number_matrix(mode.dim),
        FewLevelOp::SigmaZ => {
            CMatrix::identity(mode.dim, mode.dim) - number_matrix(mode.dim) * C64::new(2.0, 0.0)
        }
    };
    embed(space, label, &local)
}

/// Number operator of any mode, embedded in the full space.
pub fn number_op(space: &HilbertSpace, label: &str) -> Result<Operator> {
    let mode = space.mode(label)?;
    embed(space, label, &number_matrix(mode.dim))
}

/// Embeds a single-mode matrix as `I (x) ... (x) local (x) ... (x) I`.
pub fn embed(space: &HilbertSpace, label: &str, local: &CMatrix) -> Result<Operator> {
    let pos = space.mode_position(label)?;
    let dim = space.modes()[pos].dim;
    if local.nrows() != dim || local.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} local matrix for mode `{}` of dimension {}",
            local.nrows(),
            local.ncols(),
            label,
            dim
        )));
    }
    let (before, after) = space.split_dims(pos);
    let left = CMatrix::identity(before, before).kronecker(local);
    let full = left.kronecker(&CMatrix::identity(after, after));
    Operator::from_matrix(space, full)
}

fn ladder_lower(dim: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    m
}

fn number_matrix(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| {
        if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.0, 0.0) }
    })
}

/// Density matrix with validated trace, hermiticity, and positivity.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validating constructor: hermitian to [`HERMITICITY_TOL`], unit trace
    /// to [`TRACE_TOL`], eigenvalues above [`POSITIVITY_TOL`].
    pub fn new(space: &HilbertSpace, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != space.total_dim() || matrix.ncols() != space.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a dimension-{} space",
                matrix.nrows(),
                matrix.ncols(),
                space.total_dim()
            )));
        }
        let herm_dev = hermiticity_deviation(&matrix);
        if herm_dev > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "hermiticity deviation {herm_dev:.3e} exceeds {HERMITICITY_TOL:.0e}"
            )));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = min_eigenvalue(&matrix);
        if min_eig < POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "most negative eigenvalue {min_eig:.3e} below {POSITIVITY_TOL:.0e}"
            )));
        }
        Ok(Self { space: space.clone(), matrix })
    }

    /// Constructor for internal propagation steps where validity is
    /// maintained by the integrator and re-checked via diagnostics.
    pub(crate) fn from_matrix_unchecked(space: &HilbertSpace, matrix: CMatrix) -> Self {
        Self { space: space.clone(), matrix }
    }

    /// Pure state |psi><psi| from a normalized (or normalizable) vector.
    pub fn pure(space: &HilbertSpace, psi: &CVector) -> Result<Self> {
        if psi.len() != space.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "length-{} vector on a dimension-{} space",
                psi.len(),
                space.total_dim()
            )));
        }
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("state vector has zero or non-finite norm".into()));
        }
        let psi = psi / C64::new(norm, 0.0);
        let matrix = CMatrix::from_fn(psi.len(), psi.len(), |i, j| psi[i] * psi[j].conj());
        Ok(Self { space: space.clone(), matrix })
    }

    /// Product Fock/level state, one level per mode in declaration order.
    pub fn basis_state(space: &HilbertSpace, levels: &[usize]) -> Result<Self> {
        let idx = space.basis_index(levels)?;
        let mut psi = CVector::zeros(space.total_dim());
        psi[idx] = C64::new(1.0, 0.0);
        Self::pure(space, &psi)
    }

    /// Every mode in its ground level.
    pub fn vacuum(space: &HilbertSpace) -> Self {
        let levels = vec![0; space.modes().len()];
        Self::basis_state(space, &levels).expect("vacuum is always valid")
    }

    /// Pure product state with a coherent amplitude in one bosonic mode and
    /// every other mode in its ground level.
    pub fn coherent(space: &HilbertSpace, label: &str, alpha: C64) -> Result<Self> {
        let mode = space.mode(label)?;
        if mode.kind != ModeKind::Bosonic {
            return Err(Error::WrongModeKind {
                label: label.into(),
                expected: "bosonic",
                actual: mode.kind.name(),
            });
        }
        let local = coherent_amplitudes(mode.dim, alpha);
        let pos = space.mode_position(label)?;
        let mut psi = CVector::zeros(space.total_dim());
        for (n, amp) in local.iter().enumerate() {
            let mut levels = vec![0; space.modes().len()];
            levels[pos] = n;
            psi[space.basis_index(&levels)?] = *amp;
        }
        Self::pure(space, &psi)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        trace(&self.matrix)
    }

    /// Populations of one mode's levels (diagonal of the reduced state).
    pub fn level_populations(&self, label: &str) -> Result<Vec<f64>> {
        let pos = self.space.mode_position(label)?;
        let dim = self.space.modes()[pos].dim;
        let mut pops = vec![0.0; dim];
        for i in 0..self.space.total_dim() {
            pops[self.space.level_of(pos, i)] += self.matrix[(i, i)].re;
        }
        Ok(pops)
    }

    /// Sum of the top `levels` populations of a mode; used to judge whether
    /// a Fock cutoff was large enough.
    pub fn top_level_population(&self, label: &str, levels: usize) -> Result<f64> {
        let pops = self.level_populations(label)?;
        Ok(pops.iter().rev().take(levels).sum())
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }
}

/// Truncated coherent-state amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)`.
pub fn coherent_amplitudes(dim: usize, alpha: C64) -> CVector {
    let mut v = CVector::zeros(dim);
    let mut amp = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        v[n] = amp;
        amp = amp * alpha / C64::new(((n + 1) as f64).sqrt(), 0.0);
    }
    v
}

/// `Tr(rho O)`, complex in general, real for hermitian observables.
pub fn expectation(state: &DensityMatrix, op: &Operator) -> Result<C64> {
    if state.space() != op.space() {
        return Err(Error::SpaceMismatch);
    }
    let d = state.matrix.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += state.matrix[(i, j)] * op.matrix[(j, i)];
        }
    }
    Ok(acc)
}

pub(crate) fn trace(m: &CMatrix) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

pub(crate) fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn min_eigenvalue(m: &CMatrix) -> f64 {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}
