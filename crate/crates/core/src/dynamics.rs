//! Lindblad master-equation propagation and steady states.
//!
//! The integrator is deliberately plain: dense matrices, fixed-step RK4 with
//! a step bound tied to the operator norms, and per-step trace bookkeeping.
//! Steady states come from the null space of the vectorized Liouvillian.
//! A closed-form coherent ringdown covers the large-photon-number regime
//! where a Fock-basis density matrix would be wastefully big.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{expectation, trace, DensityMatrix, HilbertSpace, ModeKind, Operator};
use crate::model::{DeviceParams, DriveSpec};
use crate::{C64, CMatrix};

/// Per-step trace renormalization gives up beyond this drift.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// Step size rule: step * max(|H|, |L'L|) stays at or below this.
pub const STEP_NORM_BUDGET: f64 = 0.05;
/// Minimum integration steps per period of any oscillating drive.
pub const STEPS_PER_DRIVE_PERIOD: f64 = 40.0;
/// Steady-state residual |L(rho)| must fall below this.
pub const STEADY_STATE_RESIDUAL_LIMIT: f64 = 1e-9;
/// Top-two Fock populations above this fraction flag the cutoff as too low.
pub const CUTOFF_POPULATION_LIMIT: f64 = 1e-6;

/// One oscillating Hamiltonian term `amplitude(t) * operator`.
pub struct DriveTerm {
    pub operator: Operator,
    pub amplitude: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Upper bound on |amplitude(t)|, used in the step-size rule.
    pub amplitude_bound: f64,
    /// Shortest oscillation period, if periodic; enforces temporal
    /// resolution of at least [`STEPS_PER_DRIVE_PERIOD`] steps per cycle.
    pub period: Option<f64>,
}

impl DriveTerm {
    pub fn sinusoidal(operator: Operator, amplitude: f64, omega: f64) -> Self {
        Self {
            operator,
            amplitude: Box::new(move |t| amplitude * (omega * t).sin()),
            amplitude_bound: amplitude.abs(),
            period: Some(std::f64::consts::TAU / omega.abs()),
        }
    }
}

/// Hamiltonian plus collapse operators, ready to integrate.
///
/// Collapse operators carry their rate prefactors (i.e. they are the
/// `sqrt(kappa) * a` combinations), so the dissipator needs no extra weights.
pub struct LindbladSystem {
    h_static: Operator,
    drives: Vec<DriveTerm>,
    collapse: Vec<Operator>,
}

impl LindbladSystem {
    pub fn new(h_static: Operator, drives: Vec<DriveTerm>, collapse: Vec<Operator>) -> Result<Self> {
        if !h_static.is_hermitian(1e-10) {
            return Err(Error::InvalidParameter(
                "static Hamiltonian must be hermitian".into(),
            ));
        }
        for d in &drives {
            if d.operator.space() != h_static.space() {
                return Err(Error::SpaceMismatch);
            }
            if !d.operator.is_hermitian(1e-10) {
                return Err(Error::InvalidParameter(
                    "drive operators must be hermitian".into(),
                ));
            }
            if !(d.amplitude_bound >= 0.0) || !d.amplitude_bound.is_finite() {
                return Err(Error::InvalidParameter(
                    "drive amplitude bound must be finite and nonnegative".into(),
                ));
            }
        }
        for c in &collapse {
            if c.space() != h_static.space() {
                return Err(Error::SpaceMismatch);
            }
        }
        Ok(Self { h_static, drives, collapse })
    }

    pub fn space(&self) -> &HilbertSpace {
        self.h_static.space()
    }

    pub fn h_static(&self) -> &Operator {
        &self.h_static
    }

    pub fn drives(&self) -> &[DriveTerm] {
        &self.drives
    }

    pub fn collapse(&self) -> &[Operator] {
        &self.collapse
    }

    /// Largest integration step compatible with the norm and drive-period
    /// rules. Infinite for a trivial (zero-generator) system.
    fn step_limit(&self) -> f64 {
        let mut h_bound = self.h_static.infinity_norm();
        for d in &self.drives {
            h_bound += d.amplitude_bound * d.operator.infinity_norm();
        }
        let mut generator_bound = h_bound;
        for c in &self.collapse {
            let ldl = c.dagger().matrix() * c.matrix();
            let norm = (0..ldl.nrows())
                .map(|i| ldl.row(i).iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max);
            generator_bound = generator_bound.max(norm);
        }
        let mut limit = if generator_bound > 0.0 {
            STEP_NORM_BUDGET / generator_bound
        } else {
            f64::INFINITY
        };
        for d in &self.drives {
            if let Some(p) = d.period {
                limit = limit.min(p / STEPS_PER_DRIVE_PERIOD);
            }
        }
        limit
    }
}

/// Worst-case state-quality numbers observed during an evolution.
///
/// Trace drift is measured before each renormalization; hermiticity and
/// positivity are sampled at the requested grid times.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EvolveDiagnostics {
    pub max_trace_drift: f64,
    pub max_hermiticity_deviation: f64,
    pub min_eigenvalue: f64,
    /// Largest combined population seen in the top two levels of any
    /// bosonic mode; above [`CUTOFF_POPULATION_LIMIT`] the Fock cutoff was
    /// too small and `cutoff_ok` reports false.
    pub max_top_level_population: f64,
    pub cutoff_ok: bool,
}

impl Default for EvolveDiagnostics {
    fn default() -> Self {
        Self {
            max_trace_drift: 0.0,
            max_hermiticity_deviation: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_top_level_population: 0.0,
            cutoff_ok: true,
        }
    }
}

/// Device and drive settings a trace was produced under.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct TraceMetadata {
    pub device: Option<DeviceParams>,
    pub drive: Option<DriveSpec>,
}

/// Time series of real observable expectations.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExpectationTrace {
    pub times: Vec<f64>,
    /// Labeled columns in recording order.
    pub columns: Vec<(String, Vec<f64>)>,
    pub metadata: TraceMetadata,
    pub diagnostics: EvolveDiagnostics,
}

impl ExpectationTrace {
    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(l, _)| l == label).map(|(_, v)| v.as_slice())
    }
}

/// An evolution's recorded trace plus the state it ended in.
pub struct Evolution {
    pub trace: ExpectationTrace,
    pub final_state: DensityMatrix,
}

/// Coherent cavity amplitude; mean photon number is its squared magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentState {
    pub alpha: C64,
}

impl CoherentState {
    pub fn new(alpha: C64) -> Self {
        Self { alpha }
    }

    pub fn from_mean_photons(n_bar: f64) -> Self {
        Self { alpha: C64::new(n_bar.max(0.0).sqrt(), 0.0) }
    }

    pub fn n_bar(&self) -> f64 {
        self.alpha.norm_sqr()
    }
}

struct RhsWorkspace {
    h_t: CMatrix,
    product: CMatrix,
}

/// Collapse operator with its precomputed adjoint and normal product.
struct CollapseTriple {
    l: CMatrix,
    l_dag: CMatrix,
    ldl: CMatrix,
}

fn lindblad_rhs(
    system: &LindbladSystem,
    collapse: &[CollapseTriple],
    t: f64,
    rho: &CMatrix,
    out: &mut CMatrix,
    ws: &mut RhsWorkspace,
) {
    let minus_i = C64::new(0.0, -1.0);
    let plus_i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let half_neg = C64::new(-0.5, 0.0);

    ws.h_t.copy_from(system.h_static.matrix());
    for d in &system.drives {
        let amp = (d.amplitude)(t);
        if amp != 0.0 {
            let c = C64::new(amp, 0.0);
            ws.h_t
                .as_mut_slice()
                .iter_mut()
                .zip(d.operator.matrix().as_slice())
                .for_each(|(h, o)| *h += c * o);
        }
    }

    out.gemm(minus_i, &ws.h_t, rho, C64::new(0.0, 0.0));
    out.gemm(plus_i, rho, &ws.h_t, one);

    for c in collapse {
        ws.product.gemm(one, &c.l, rho, C64::new(0.0, 0.0));
        out.gemm(one, &ws.product, &c.l_dag, one);
        out.gemm(half_neg, &c.ldl, rho, one);
        out.gemm(half_neg, rho, &c.ldl, one);
    }
}

/// Integrates the master equation and records observables at the grid times.
///
/// The evolution starts at the first grid time. Fixed-step RK4 is used with
/// the step chosen so that `step * max(|H|, |L'L|)` stays at or below
/// [`STEP_NORM_BUDGET`] and every oscillating drive is resolved by at least
/// [`STEPS_PER_DRIVE_PERIOD`] steps per period. The trace is renormalized
/// each step; drifting past [`TRACE_DRIFT_LIMIT`] aborts with an error since
/// that signals an unstable step size rather than harmless rounding.
pub fn evolve(
    system: &LindbladSystem,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    observables: &[(&str, &Operator)],
) -> Result<Evolution> {
    if rho0.space() != system.space() {
        return Err(Error::SpaceMismatch);
    }
    for (_, op) in observables {
        if op.space() != system.space() {
            return Err(Error::SpaceMismatch);
        }
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidGrid("time grid is empty".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("time grid contains non-finite values".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("time grid must be strictly increasing".into()));
    }

    let dim = system.space().total_dim();
    let collapse: Vec<CollapseTriple> = system
        .collapse
        .iter()
        .map(|c| {
            let l = c.matrix().clone();
            let l_dag = l.adjoint();
            let ldl = &l_dag * &l;
            CollapseTriple { l, l_dag, ldl }
        })
        .collect();
    let step_limit = system.step_limit();

    let bosonic_labels: Vec<String> = system
        .space()
        .modes()
        .iter()
        .filter(|m| m.kind == ModeKind::Bosonic)
        .map(|m| m.label.clone())
        .collect();

    let mut rho = rho0.matrix().clone();
    let mut ws = RhsWorkspace {
        h_t: CMatrix::zeros(dim, dim),
        product: CMatrix::zeros(dim, dim),
    };
    let mut k1 = CMatrix::zeros(dim, dim);
    let mut k2 = CMatrix::zeros(dim, dim);
    let mut k3 = CMatrix::zeros(dim, dim);
    let mut k4 = CMatrix::zeros(dim, dim);
    let mut stage = CMatrix::zeros(dim, dim);

    let mut diagnostics = EvolveDiagnostics::default();
    let mut columns: Vec<(String, Vec<f64>)> = observables
        .iter()
        .map(|(label, _)| (label.to_string(), Vec::with_capacity(t_grid.len())))
        .collect();

    let record = |rho: &CMatrix, diagnostics: &mut EvolveDiagnostics,
                      columns: &mut Vec<(String, Vec<f64>)>|
     -> Result<()> {
        let state = DensityMatrix::from_matrix_unchecked(system.space(), rho.clone());
        for ((_, op), (_, col)) in observables.iter().zip(columns.iter_mut()) {
            let value = expectation(&state, op)?;
            if !value.re.is_finite() {
                return Err(Error::NonFinite(value.re));
            }
            col.push(value.re);
        }
        diagnostics.max_hermiticity_deviation =
            diagnostics.max_hermiticity_deviation.max(state.hermiticity_deviation());
        diagnostics.min_eigenvalue = diagnostics.min_eigenvalue.min(state.min_eigenvalue());
        for label in &bosonic_labels {
            let top = state.top_level_population(label, 2)?;
            diagnostics.max_top_level_population =
                diagnostics.max_top_level_population.max(top);
        }
        Ok(())
    };

    record(&rho, &mut diagnostics, &mut columns)?;

    for window in t_grid.windows(2) {
        let (t_start, t_end) = (window[0], window[1]);
        let span = t_end - t_start;
        let n_sub = if step_limit.is_finite() {
            (span / step_limit).ceil().max(1.0) as usize
        } else {
            1
        };
        let h = span / n_sub as f64;
        let h_c = C64::new(h, 0.0);
        let half_h = C64::new(0.5 * h, 0.0);
        let sixth_h = C64::new(h / 6.0, 0.0);
        let third_h = C64::new(h / 3.0, 0.0);

        for i in 0..n_sub {
            let t = t_start + i as f64 * h;

            lindblad_rhs(system, &collapse, t, &rho, &mut k1, &mut ws);

            stage.copy_from(&rho);
            stage.zip_apply(&k1, |s, k| *s += half_h * k);
            lindblad_rhs(system, &collapse, t + 0.5 * h, &stage, &mut k2, &mut ws);

            stage.copy_from(&rho);
            stage.zip_apply(&k2, |s, k| *s += half_h * k);
            lindblad_rhs(system, &collapse, t + 0.5 * h, &stage, &mut k3, &mut ws);

            stage.copy_from(&rho);
            stage.zip_apply(&k3, |s, k| *s += h_c * k);
            lindblad_rhs(system, &collapse, t + h, &stage, &mut k4, &mut ws);

            rho.zip_apply(&k1, |r, k| *r += sixth_h * k);
            rho.zip_apply(&k2, |r, k| *r += third_h * k);
            rho.zip_apply(&k3, |r, k| *r += third_h * k);
            rho.zip_apply(&k4, |r, k| *r += sixth_h * k);

            let tr = trace(&rho);
            if !tr.re.is_finite() || !tr.im.is_finite() {
                return Err(Error::NonFinite(tr.re));
            }
            let drift = (tr - C64::new(1.0, 0.0)).norm();
            if drift >= TRACE_DRIFT_LIMIT {
                return Err(Error::TraceDrift { t: t + h, drift });
            }
            diagnostics.max_trace_drift = diagnostics.max_trace_drift.max(drift);
            if drift > 0.0 {
                let inv = C64::new(1.0, 0.0) / tr;
                rho.as_mut_slice().iter_mut().for_each(|z| *z *= inv);
            }
        }

        record(&rho, &mut diagnostics, &mut columns)?;
    }

    diagnostics.cutoff_ok = diagnostics.max_top_level_population <= CUTOFF_POPULATION_LIMIT;

    Ok(Evolution {
        trace: ExpectationTrace {
            times: t_grid.to_vec(),
            columns,
            metadata: TraceMetadata::default(),
            diagnostics,
        },
        final_state: DensityMatrix::from_matrix_unchecked(system.space(), rho),
    })
}

/// Column-stacked matrix form of the full Lindblad generator.
fn liouvillian_matrix(system: &LindbladSystem) -> CMatrix {
    let d = system.space().total_dim();
    let eye = CMatrix::identity(d, d);
    let h = system.h_static.matrix();
    let minus_i = C64::new(0.0, -1.0);

    let mut liou = (eye.kronecker(h) - h.transpose().kronecker(&eye)) * minus_i;
    for c in &system.collapse {
        let l = c.matrix();
        let ldl = l.adjoint() * l;
        liou += l.conjugate().kronecker(l);
        liou -= (eye.kronecker(&ldl) + ldl.transpose().kronecker(&eye)) * C64::new(0.5, 0.0);
    }
    liou
}

/// Steady state of a time-independent system: the trace-one null vector of
/// the vectorized Liouvillian.
///
/// A null space of dimension two or more means dynamically disconnected
/// sectors with no unique equilibrium, which is reported as an error rather
/// than silently picking one.
pub fn steady_state(system: &LindbladSystem) -> Result<DensityMatrix> {
    if !system.drives.is_empty() {
        return Err(Error::TimeDependentSteadyState);
    }
    let d = system.space().total_dim();
    let liou = liouvillian_matrix(system);
    let svd = liou.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");

    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Err(Error::DegenerateSteadyState(d * d));
    }
    let tol = sigma_max * 1e-10;
    let null_count = svd.singular_values.iter().filter(|&&s| s < tol).count();
    if null_count >= 2 {
        return Err(Error::DegenerateSteadyState(null_count));
    }

    // Smallest singular value sits last in nalgebra's ordering; its right
    // singular vector is the conjugate of the corresponding row of V^H.
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty singular values");
    let null_vec: Vec<C64> = v_t.row(min_idx).iter().map(|z| z.conj()).collect();

    let mut rho = CMatrix::zeros(d, d);
    rho.as_mut_slice().copy_from_slice(&null_vec);

    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let tr = trace(&rho);
    if tr.norm() < 1e-12 {
        return Err(Error::InvalidState(
            "steady-state null vector is traceless; no physical equilibrium".into(),
        ));
    }
    let rho = rho / tr;

    let flat = DMatrix::from_column_slice(d * d, 1, rho.as_slice());
    let residual = (&liou * &flat).norm();
    if residual > STEADY_STATE_RESIDUAL_LIMIT {
        return Err(Error::SteadyStateResidual(residual));
    }

    DensityMatrix::new(system.space(), rho)
}

/// Closed-form ringdown of a coherent cavity field under linear loss:
/// photon number decays at kappa_total, field amplitude at half that.
pub fn coherent_ringdown(n_bar0: f64, kappa_total: f64, t_grid: &[f64]) -> Result<ExpectationTrace> {
    if n_bar0 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "initial photon number must be nonnegative, got {n_bar0}"
        )));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("time grid must be nonempty and increasing".into()));
    }
    let t0 = t_grid[0];
    let alpha0 = CoherentState::from_mean_photons(n_bar0);
    let n_bar: Vec<f64> =
        t_grid.iter().map(|&t| n_bar0 * (-kappa_total * (t - t0)).exp()).collect();
    let amplitude: Vec<f64> = t_grid
        .iter()
        .map(|&t| alpha0.alpha.norm() * (-0.5 * kappa_total * (t - t0)).exp())
        .collect();
    Ok(ExpectationTrace {
        times: t_grid.to_vec(),
        columns: vec![("n_bar".into(), n_bar), ("amplitude".into(), amplitude)],
        metadata: TraceMetadata::default(),
        diagnostics: EvolveDiagnostics::default(),
    })
}
