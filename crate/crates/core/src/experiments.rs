//! The measurement campaigns as configurable numerical sweeps: ringdown
//! spectroscopy against pump frequency and power, coherence recovery after
//! a reset pulse, cavity refrigeration under a coherent drive, and flux
//! spectroscopy of the coupled mode stack.
//!
//! Sweep points are independent and evaluated in parallel; results are
//! assembled by grid index, so output order never depends on scheduling.
//! Synthetic measurement noise is seeded per point from the grid index and
//! a master seed, which keeps sweeps reproducible under any thread count.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{self, BathRates, PhotonStatistics};
use crate::calibration;
use crate::dynamics::{self, evolve};
use crate::error::{Error, Result};
use crate::hilbert::{number_op, DensityMatrix};
use crate::model::{
    self, DeviceParams, DriveSpec, ModulationConvention, SidebandFrame, CAVITY, DISSIPATOR,
};

/// Evenly spaced grid from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![start];
    }
    (0..n)
        .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
        .collect()
}

/// One sweep axis: a physical quantity (already in internal units) sampled
/// at explicit values.
#[derive(Debug, Clone, Serialize)]
pub struct SweepAxis {
    pub name: String,
    /// Display unit carried through to output files; values are always
    /// internal (rad/us, us).
    pub unit: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::InvalidGrid(format!("axis `{name}` has no values")));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "axis `{name}` contains non-finite values"
            )));
        }
        Ok(Self { name, unit: unit.into(), values })
    }
}

/// Per-point replacements applied on top of the sweep's base configuration.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PointOverride {
    pub device: Option<DeviceParams>,
    pub drive: Option<DriveSpec>,
}

/// Cartesian sweep over one or two axes, flat-indexed row-major (the first
/// axis is the slow one).
#[derive(Debug, Clone, Serialize)]
pub struct SweepGrid {
    axes: Vec<SweepAxis>,
    overrides: BTreeMap<usize, PointOverride>,
}

impl SweepGrid {
    pub fn one(axis: SweepAxis) -> Self {
        Self { axes: vec![axis], overrides: BTreeMap::new() }
    }

    pub fn two(first: SweepAxis, second: SweepAxis) -> Self {
        Self { axes: vec![first, second], overrides: BTreeMap::new() }
    }

    pub fn axes(&self) -> &[SweepAxis] {
        &self.axes
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Splits a flat index into per-axis indices; the second is 0 for
    /// single-axis grids.
    pub fn unravel(&self, index: usize) -> (usize, usize) {
        let inner = self.axes.get(1).map_or(1, |a| a.values.len());
        (index / inner, index % inner)
    }

    /// Registers a per-point override; `index` is the flat grid index.
    pub fn set_override(&mut self, index: usize, point: PointOverride) -> Result<()> {
        if index >= self.len() {
            return Err(Error::InvalidGrid(format!(
                "override index {index} outside grid of {} points",
                self.len()
            )));
        }
        self.overrides.insert(index, point);
        Ok(())
    }

    pub fn override_at(&self, index: usize) -> Option<&PointOverride> {
        self.overrides.get(&index)
    }
}

/// Knobs for the ringdown sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RingdownOptions {
    /// Fock cutoff for the cavity mode.
    pub cavity_dim: usize,
    /// Cavity Fock level prepared before the drive window.
    pub initial_level: usize,
    /// Number of fitted samples along each decay trace.
    pub samples: usize,
    /// Fitted trace length in units of the expected decay time.
    pub window_factor: f64,
    /// Dead time before the fit window, in units of `1/kappa_diss`, so the
    /// fast cavity-dissipator hybridization transient does not bias the
    /// extracted rate.
    pub settle_factor: f64,
    /// Optional Gaussian noise added to <n>(t) before fitting.
    pub noise: Option<NoiseSpec>,
}

impl Default for RingdownOptions {
    fn default() -> Self {
        Self {
            cavity_dim: 4,
            initial_level: 1,
            samples: 60,
            window_factor: 3.0,
            settle_factor: 10.0,
            noise: None,
        }
    }
}

/// Synthetic measurement noise: zero-mean Gaussian of width `sigma`,
/// seeded per grid point from `seed` and the point index.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// One fitted point of the ringdown map. `rate` and `uncertainty` are
/// present only when the exponential fit converged to a nonnegative,
/// non-degenerate decay rate; `r_squared` is kept whenever the fit ran at
/// all, however poor.
#[derive(Debug, Clone, Serialize)]
pub struct RingdownPoint {
    pub index: usize,
    pub omega_p: f64,
    pub g_p: f64,
    pub rate: Option<f64>,
    pub uncertainty: Option<f64>,
    pub r_squared: Option<f64>,
}

/// Fitted decay-rate map over the drive grid, ordered by flat grid index.
#[derive(Debug, Clone, Serialize)]
pub struct RingdownResult {
    pub points: Vec<RingdownPoint>,
}

impl RingdownResult {
    pub fn rate_at(&self, index: usize) -> Option<f64> {
        self.points.get(index).and_then(|p| p.rate)
    }
}

fn ringdown_rate_guess(device: &DeviceParams, g_p: f64, xi: f64) -> f64 {
    let kd = device.kappa_diss;
    let lorentzian = g_p * g_p * kd / (xi * xi + 0.25 * kd * kd);
    device.kappa_c + lorentzian.min(0.5 * kd)
}

/// Ringdown spectroscopy: prepare a cavity Fock state, evolve it in the
/// sideband-exchange rotating frame at each grid point, and fit the decay
/// of the cavity population.
///
/// The grid must carry exactly two axes named `omega_p` (pump frequency,
/// rad/us) and `g_p` (induced exchange coupling, rad/us). Points with a
/// [`DriveSpec`] override instead derive `g_p`, the carrier shift, and the
/// frame detuning from the raw modulation via the Bessel weights. Fit
/// failures are recorded per point and the sweep continues; errors from
/// the propagation itself abort the sweep.
pub fn ringdown_spectroscopy(
    params: &DeviceParams,
    grid: &SweepGrid,
    options: &RingdownOptions,
) -> Result<RingdownResult> {
    params.validate()?;
    let axes = grid.axes();
    if axes.len() != 2 {
        return Err(Error::InvalidGrid(format!(
            "ringdown sweep needs axes omega_p and g_p, got {} axes",
            axes.len()
        )));
    }
    let omega_axis = axes
        .iter()
        .position(|a| a.name == "omega_p")
        .ok_or_else(|| Error::InvalidGrid("ringdown sweep is missing an omega_p axis".into()))?;
    let g_axis = axes
        .iter()
        .position(|a| a.name == "g_p")
        .ok_or_else(|| Error::InvalidGrid("ringdown sweep is missing a g_p axis".into()))?;
    if axes[g_axis].values.iter().any(|&g| g < 0.0) {
        return Err(Error::InvalidGrid("g_p values must be nonnegative".into()));
    }
    if options.cavity_dim < 2 || options.initial_level >= options.cavity_dim {
        return Err(Error::InvalidParameter(format!(
            "initial level {} does not fit in a cavity of dimension {}",
            options.initial_level, options.cavity_dim
        )));
    }
    if options.samples < 8 || !(options.window_factor > 0.0) || !(options.settle_factor >= 0.0) {
        return Err(Error::InvalidParameter(
            "ringdown needs at least 8 samples, a positive window factor, \
             and a nonnegative settle factor"
                .into(),
        ));
    }
    if let Some(noise) = &options.noise {
        if !(noise.sigma >= 0.0) || !noise.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be finite and nonnegative, got {}",
                noise.sigma
            )));
        }
    }

    let points: Vec<RingdownPoint> = (0..grid.len())
        .into_par_iter()
        .map(|index| -> Result<RingdownPoint> {
            let (i0, i1) = grid.unravel(index);
            let pick = |axis: usize| axes[axis].values[if axis == 0 { i0 } else { i1 }];
            let omega_p = pick(omega_axis);
            let g_p = pick(g_axis);

            let ovr = grid.override_at(index);
            let device = ovr.and_then(|o| o.device.as_ref()).unwrap_or(params);
            device.validate()?;
            let frame = match ovr.and_then(|o| o.drive.as_ref()) {
                Some(drive) => SidebandFrame::from_drive(
                    device,
                    drive,
                    device.operating_omega_diss(),
                    ModulationConvention::SigmaZCoefficient,
                )?,
                None => {
                    SidebandFrame::from_exchange_coupling(g_p, omega_p - device.operating_detuning())
                }
            };

            let space = model::standard_space(options.cavity_dim, 2)?;
            let system = model::rotating_frame_system(
                &space,
                device,
                &frame,
                device.operating_omega_diss(),
                false,
            )?;
            let rho0 = DensityMatrix::basis_state(&space, &[options.initial_level, 0])?;
            let window = options.window_factor / ringdown_rate_guess(device, frame.g_p, frame.xi);
            let settle = options.settle_factor / device.kappa_diss;
            let dt = window / (options.samples as f64 - 1.0);
            let lead = (settle / dt).ceil() as usize;
            let total = lead + options.samples;
            let times = linspace(0.0, dt * (total - 1) as f64, total);
            let n_cavity = number_op(&space, CAVITY)?;
            let evolution = evolve(&system, &rho0, &times, &[("n_cavity", &n_cavity)])?;

            let times = &times[lead..];
            let mut trace = evolution
                .trace
                .column("n_cavity")
                .expect("requested observable column")[lead..]
                .to_vec();
            if let Some(noise) = &options.noise {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    noise.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                );
                let dist = Normal::new(0.0, noise.sigma)
                    .map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
                for v in trace.iter_mut() {
                    *v += dist.sample(&mut rng);
                }
            }

            let point = match calibration::fit_exponential(&times, &trace) {
                Ok(fit) => {
                    let rate = fit.value("rate").expect("exponential fit exposes a rate");
                    let usable = fit.converged && !fit.degenerate && rate >= 0.0;
                    RingdownPoint {
                        index,
                        omega_p,
                        g_p: frame.g_p,
                        rate: usable.then_some(rate),
                        uncertainty: usable.then(|| fit.uncertainty("rate").unwrap_or(0.0)),
                        r_squared: Some(fit.r_squared),
                    }
                }
                Err(_) => RingdownPoint {
                    index,
                    omega_p,
                    g_p: frame.g_p,
                    rate: None,
                    uncertainty: None,
                    r_squared: None,
                },
            };
            Ok(point)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RingdownResult { points })
}

/// Knobs for the reset experiment.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResetOptions {
    /// Total cavity decay rate during the drive window; computed from the
    /// drive via the induced-loss formula when absent.
    pub gamma_cav: Option<f64>,
    /// Free-decay interval between the measurement pulse and the drive
    /// window, us.
    pub gap: f64,
    /// Background echo decoherence rate, 1/us.
    pub gamma_2_0: f64,
    /// Recovery threshold as a fraction of the background rate.
    pub recovery_fraction: f64,
}

impl Default for ResetOptions {
    fn default() -> Self {
        Self { gamma_cav: None, gap: 0.08, gamma_2_0: 0.124, recovery_fraction: 0.05 }
    }
}

/// Dephasing transient after a reset pulse: the photon population left by
/// the measurement, the drained population curve, and the echo decoherence
/// rate along it.
#[derive(Debug, Clone, Serialize)]
pub struct ResetResult {
    /// Time since the drive turned on, us.
    pub tau: Vec<f64>,
    /// Residual cavity population n(tau).
    pub n_bar: Vec<f64>,
    /// Echo decoherence rate along the transient, 1/us.
    pub gamma2: Vec<f64>,
    /// Total cavity decay rate used for the drain, 1/us.
    pub gamma_cav: f64,
    /// Population at drive turn-on, after the free-decay gap.
    pub n_bar_start: f64,
    /// First time the transient is within the recovery fraction of the
    /// background rate, us.
    pub recovery_time: f64,
}

/// Cavity reset: a residual population `n_bar0` decays freely at the bare
/// rate through the pulse gap, then drains at `kappa_c + kappa_eff(drive)`
/// while the qubit dephases through the residual photons.
///
/// The tau grid starts at zero (drive turn-on) and the recovery time is
/// the continuous-time threshold crossing, not a grid point.
pub fn reset_experiment(
    params: &DeviceParams,
    drive: &DriveSpec,
    n_bar0: f64,
    tau_grid: &[f64],
    options: &ResetOptions,
) -> Result<ResetResult> {
    params.validate()?;
    drive.validate()?;
    if !(n_bar0 >= 0.0) || !n_bar0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "initial population must be finite and nonnegative, got {n_bar0}"
        )));
    }
    if tau_grid.is_empty() || tau_grid[0] != 0.0 {
        return Err(Error::InvalidGrid(
            "tau grid must start at 0 (drive turn-on)".into(),
        ));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) || !tau_grid.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidGrid("tau grid must be strictly increasing".into()));
    }
    if !(options.gap >= 0.0) || !(options.gamma_2_0 > 0.0) || !(options.recovery_fraction > 0.0) {
        return Err(Error::InvalidParameter(
            "reset needs gap >= 0, gamma_2_0 > 0, and a positive recovery fraction".into(),
        ));
    }

    let gamma_cav = match options.gamma_cav {
        Some(rate) => {
            if !(rate > 0.0) || !rate.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "gamma_cav override must be positive, got {rate}"
                )));
            }
            rate
        }
        None => {
            let frame = SidebandFrame::from_drive(
                params,
                drive,
                params.operating_omega_diss(),
                ModulationConvention::SigmaZCoefficient,
            )?;
            params.kappa_c
                + analytics::effective_loss(frame.g_p, params.kappa_diss)?.rate
                + frame.carrier_loss.unwrap_or(0.0)
        }
    };

    let n_bar_start = n_bar0 * (-params.kappa_c * options.gap).exp();
    let ringdown = dynamics::coherent_ringdown(n_bar_start, gamma_cav, tau_grid)?;
    let n_bar = ringdown
        .column("n_bar")
        .expect("ringdown trace carries n_bar")
        .to_vec();
    let gamma2 = analytics::reset_dephasing_curve(
        n_bar_start,
        params.chi,
        params.kappa_c,
        gamma_cav,
        options.gamma_2_0,
        tau_grid,
    );
    let recovery_time = analytics::coherence_recovery_time(
        n_bar_start,
        params.chi,
        params.kappa_c,
        gamma_cav,
        options.gamma_2_0,
        options.recovery_fraction,
    )?;

    Ok(ResetResult {
        tau: tau_grid.to_vec(),
        n_bar,
        gamma2,
        gamma_cav,
        n_bar_start,
        recovery_time,
    })
}

/// One cell of the refrigeration map.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RefrigerationPoint {
    pub g_p: f64,
    pub n_injected: f64,
    /// Drive-induced cavity loss at this power, 1/us.
    pub kappa_eff: f64,
    /// Steady thermal cavity occupation from detailed balance.
    pub n_thermal: f64,
    /// Steady occupation sustained by the coherent injection.
    pub n_coherent: f64,
    /// Echo decoherence rate, 1/us.
    pub gamma2_echo: f64,
}

/// Refrigeration map, one row per injected occupation, row-major in the
/// power axis.
#[derive(Debug, Clone, Serialize)]
pub struct RefrigerationResult {
    pub gamma_2_0: f64,
    pub g_p: Vec<f64>,
    pub n_injected: Vec<f64>,
    pub points: Vec<RefrigerationPoint>,
}

impl RefrigerationResult {
    /// All points sharing the injected occupation `n_injected[row]`.
    pub fn row(&self, row: usize) -> &[RefrigerationPoint] {
        let width = self.g_p.len();
        &self.points[row * width..(row + 1) * width]
    }
}

/// Refrigeration under a coherent cavity drive: for each (power, injected
/// occupation) cell, detailed balance against the thermal baths gives the
/// residual thermal occupation, a second balance with the injection
/// feeding the cavity at `kappa_c * n_injected` gives the coherent
/// occupation, and the two dephase the qubit with their own photon
/// statistics on top of the background rate.
pub fn refrigeration_experiment(
    params: &DeviceParams,
    g_p_values: &[f64],
    injected_n_bar: &[f64],
    gamma_2_0: f64,
) -> Result<RefrigerationResult> {
    params.validate()?;
    if g_p_values.is_empty() || injected_n_bar.is_empty() {
        return Err(Error::InvalidGrid(
            "refrigeration needs at least one power and one injected occupation".into(),
        ));
    }
    if !g_p_values.iter().all(|g| g.is_finite() && *g >= 0.0)
        || !injected_n_bar.iter().all(|n| n.is_finite() && *n >= 0.0)
    {
        return Err(Error::InvalidGrid(
            "powers and injected occupations must be finite and nonnegative".into(),
        ));
    }
    if !(gamma_2_0 > 0.0) || !gamma_2_0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "background rate must be positive, got {gamma_2_0}"
        )));
    }

    let cavity_thermal =
        BathRates::thermal(params.kappa_c, params.omega_c, params.t_zero_k)?;
    let dissipator_thermal = BathRates::thermal(
        params.kappa_diss,
        params.operating_omega_diss(),
        params.t_bath_k,
    )?;
    let dissipator_cold = BathRates::new(0.0, params.kappa_diss)?;

    let mut points = Vec::with_capacity(g_p_values.len() * injected_n_bar.len());
    for &n_injected in injected_n_bar {
        for &g_p in g_p_values {
            let kappa_eff = analytics::effective_loss(g_p, params.kappa_diss)?.rate;
            let kappa_total = params.kappa_c + kappa_eff;
            let n_thermal =
                analytics::driven_balance(&cavity_thermal, &dissipator_thermal, kappa_eff)?
                    .n_cavity;
            let n_coherent = if n_injected > 0.0 {
                let injection = BathRates::new(params.kappa_c * n_injected, params.kappa_c)?;
                analytics::driven_balance(&injection, &dissipator_cold, kappa_eff)?.n_cavity
            } else {
                0.0
            };
            let gamma2_echo = gamma_2_0
                + analytics::photon_dephasing(
                    params.chi,
                    kappa_total,
                    n_thermal,
                    PhotonStatistics::Thermal,
                )
                + analytics::photon_dephasing(
                    params.chi,
                    kappa_total,
                    n_coherent,
                    PhotonStatistics::Coherent,
                );
            points.push(RefrigerationPoint {
                g_p,
                n_injected,
                kappa_eff,
                n_thermal,
                n_coherent,
                gamma2_echo,
            });
        }
    }

    Ok(RefrigerationResult {
        gamma_2_0,
        g_p: g_p_values.to_vec(),
        n_injected: injected_n_bar.to_vec(),
        points,
    })
}

/// Eigenfrequency branches of the coupled mode stack against flux.
///
/// Branch `b` is continuous in flux: at each new bias the eigenvector with
/// the largest overlap against branch `b`'s previous eigenvector continues
/// the branch, so identities follow the physical mode through crossings
/// instead of re-sorting by frequency.
#[derive(Debug, Clone, Serialize)]
pub struct FluxMap {
    pub phi: Vec<f64>,
    /// Labels of the modes entering the diagonalization, in matrix order.
    pub mode_labels: Vec<String>,
    /// `branches[b][k]` is the frequency of branch `b` at `phi[k]`, rad/us,
    /// with branches ordered by frequency at the first bias point.
    pub branches: Vec<Vec<f64>>,
}

impl FluxMap {
    /// Minimum separation between two branches and the bias where it
    /// occurs, `(phi, gap)`.
    pub fn minimum_gap(&self, a: usize, b: usize) -> Result<(f64, f64)> {
        if a == b || a >= self.branches.len() || b >= self.branches.len() {
            return Err(Error::InvalidParameter(format!(
                "branch pair ({a}, {b}) not in a map of {} branches",
                self.branches.len()
            )));
        }
        let mut best = (self.phi[0], f64::INFINITY);
        for (k, &phi) in self.phi.iter().enumerate() {
            let gap = (self.branches[b][k] - self.branches[a][k]).abs();
            if gap < best.1 {
                best = (phi, gap);
            }
        }
        Ok(best)
    }
}

fn mode_matrix(params: &DeviceParams, phi: f64, include_qubit: bool) -> (Vec<&'static str>, DMatrix<f64>) {
    let omega_diss = model::dissipator_frequency(params, phi);
    let reference = params.operating_omega_diss();
    let g_c = model::coupling_flux_correction(params.g_c, reference, omega_diss, params.alpha_diss);
    let g_f = model::coupling_flux_correction(params.g_f, reference, omega_diss, params.alpha_diss);

    let mut labels = vec![CAVITY];
    if include_qubit {
        labels.push("qubit");
    }
    labels.push("filter");
    labels.push(DISSIPATOR);

    let n = labels.len();
    let idx = |label: &str| labels.iter().position(|l| *l == label).expect("known label");
    let mut m = DMatrix::zeros(n, n);
    m[(idx(CAVITY), idx(CAVITY))] = params.omega_c;
    if include_qubit {
        m[(idx("qubit"), idx("qubit"))] = params.omega_q;
        m[(idx("qubit"), idx(CAVITY))] = params.g_q;
        m[(idx(CAVITY), idx("qubit"))] = params.g_q;
    }
    m[(idx("filter"), idx("filter"))] = params.omega_f;
    m[(idx(DISSIPATOR), idx(DISSIPATOR))] = omega_diss;
    m[(idx(CAVITY), idx(DISSIPATOR))] = g_c;
    m[(idx(DISSIPATOR), idx(CAVITY))] = g_c;
    m[(idx("filter"), idx(DISSIPATOR))] = g_f;
    m[(idx(DISSIPATOR), idx("filter"))] = g_f;
    (labels, m)
}

/// Flux spectroscopy: single-excitation eigenfrequencies of the
/// exchange-coupled cavity/filter/dissipator stack (plus the qubit when
/// requested) as the dissipator tunes with flux. The cavity-dissipator and
/// filter-dissipator couplings pick up the junction-impedance correction
/// as the dissipator moves away from its reference frequency.
pub fn flux_spectroscopy(
    params: &DeviceParams,
    phi_grid: &[f64],
    include_qubit: bool,
) -> Result<FluxMap> {
    params.validate()?;
    if phi_grid.len() < 2 {
        return Err(Error::InvalidGrid(
            "flux spectroscopy needs at least 2 bias points".into(),
        ));
    }
    if phi_grid.windows(2).any(|w| w[1] <= w[0]) || !phi_grid.iter().all(|p| p.is_finite()) {
        return Err(Error::InvalidGrid("flux grid must be strictly increasing".into()));
    }

    let (labels, first) = mode_matrix(params, phi_grid[0], include_qubit);
    let n = labels.len();
    let mut branches = vec![Vec::with_capacity(phi_grid.len()); n];

    let eig = SymmetricEigen::new(first);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut prev_vectors: Vec<DVector<f64>> = order
        .iter()
        .map(|&c| eig.eigenvectors.column(c).into_owned())
        .collect();
    let mut prev_freqs: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    for (b, &freq) in prev_freqs.iter().enumerate() {
        branches[b].push(freq);
    }

    for &phi in &phi_grid[1..] {
        let (_, m) = mode_matrix(params, phi, include_qubit);
        let eig = SymmetricEigen::new(m);
        let mut used = vec![false; n];
        for b in 0..n {
            let mut best_col = usize::MAX;
            let mut best_overlap = -1.0;
            for c in 0..n {
                if used[c] {
                    continue;
                }
                let overlap = prev_vectors[b].dot(&eig.eigenvectors.column(c)).abs();
                let tie = (overlap - best_overlap).abs() <= 1e-12;
                let closer = best_col != usize::MAX
                    && (eig.eigenvalues[c] - prev_freqs[b]).abs()
                        < (eig.eigenvalues[best_col] - prev_freqs[b]).abs();
                if overlap > best_overlap + 1e-12 || (tie && closer) {
                    best_overlap = overlap;
                    best_col = c;
                }
            }
            used[best_col] = true;
            prev_vectors[b] = eig.eigenvectors.column(best_col).into_owned();
            prev_freqs[b] = eig.eigenvalues[best_col];
            branches[b].push(eig.eigenvalues[best_col]);
        }
    }

    Ok(FluxMap {
        phi: phi_grid.to_vec(),
        mode_labels: labels.into_iter().map(str::to_owned).collect(),
        branches,
    })
}
