//! Nonlinear least-squares reduction of sweep data.
//!
//! Every fitter here runs on the same damped Gauss-Newton engine
//! ([`fit_model`]): central-difference Jacobians, a Levenberg-Marquardt
//! damping parameter that grows tenfold on a rejected step and shrinks
//! tenfold on an accepted one, and 1-sigma parameter uncertainties taken
//! from the Jacobian at the solution. The named fitters wrap the engine
//! with model functions and initial guesses appropriate to the traces the
//! experiments produce: exponential ringdowns, Lorentzian lines, avoided
//! crossings against the flux tuning curve, and the tuning curve itself.
//!
//! Rank-deficient solutions (flat data, vanishing gaps) are reported with
//! the `degenerate` flag set rather than as errors, so sweep drivers can
//! record the point and move on.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{self, DeviceParams};
use crate::C64;

/// Iteration cap for the damped Gauss-Newton loop.
pub const MAX_ITERATIONS: usize = 200;

/// Relative tolerance on both the cost decrease and the parameter step
/// used to declare convergence.
pub const RELATIVE_TOLERANCE: f64 = 1e-10;

const LAMBDA_INITIAL: f64 = 1e-3;
const LAMBDA_FLOOR: f64 = 1e-12;
const LAMBDA_CEILING: f64 = 1e14;

/// Outcome of a least-squares fit.
///
/// `estimates[i]` and `uncertainties[i]` belong to `names[i]`; the
/// uncertainties are 1-sigma values from the covariance
/// `residual_variance * (J^T J)^{-1}` at the solution and are zeroed when
/// that matrix is singular (`degenerate` is then set). `converged` means
/// the loop terminated on the relative tolerance, not the iteration cap.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub residual_norm: f64,
    pub r_squared: f64,
    pub converged: bool,
    pub iterations: usize,
    pub degenerate: bool,
}

impl FitResult {
    /// Estimate for the named parameter, if the fit has one.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.estimates[i])
    }

    /// 1-sigma uncertainty for the named parameter.
    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.uncertainties[i])
    }
}

fn jacobian<F>(predict: &F, params: &[f64], n: usize) -> DMatrix<f64>
where
    F: Fn(usize, &[f64]) -> f64,
{
    let p = params.len();
    let mut jac = DMatrix::zeros(n, p);
    let mut probe = params.to_vec();
    for j in 0..p {
        let step = (1e-7 * params[j].abs()).max(1e-9);
        probe[j] = params[j] + step;
        let plus: Vec<f64> = (0..n).map(|i| predict(i, &probe)).collect();
        probe[j] = params[j] - step;
        for (i, plus_i) in plus.iter().enumerate() {
            jac[(i, j)] = (plus_i - predict(i, &probe)) / (2.0 * step);
        }
        probe[j] = params[j];
    }
    jac
}

/// Least squares over an indexed prediction function.
///
/// `predict(i, params)` must return the model value matching `targets[i]`.
/// The indexed form (rather than a function of x) lets a single parameter
/// vector serve several data series at once, as the avoided-crossing fit
/// does with its two branches.
pub fn fit_model<F>(predict: F, targets: &[f64], initial: &[f64], names: &[&str]) -> Result<FitResult>
where
    F: Fn(usize, &[f64]) -> f64,
{
    let n = targets.len();
    let p_count = initial.len();
    if p_count == 0 || names.len() != p_count {
        return Err(Error::InvalidParameter(
            "fit needs one name per initial parameter".into(),
        ));
    }
    if n < p_count {
        return Err(Error::InsufficientData(format!(
            "{n} data points cannot constrain {p_count} parameters"
        )));
    }
    if !targets.iter().chain(initial).all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite fit input".into()));
    }

    let residuals = |p: &[f64]| DVector::from_fn(n, |i, _| predict(i, p) - targets[i]);

    let mut params = initial.to_vec();
    let mut r = residuals(&params);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::FitFailed(
            "model is non-finite at the initial guess".into(),
        ));
    }

    let mut lambda = LAMBDA_INITIAL;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let jac = jacobian(&predict, &params, n);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        if grad.amax() <= f64::EPSILON * (1.0 + cost) {
            converged = true;
            break;
        }

        let mut accepted = false;
        while lambda <= LAMBDA_CEILING {
            let mut damped = jtj.clone();
            for j in 0..p_count {
                damped[(j, j)] += lambda * jtj[(j, j)].max(LAMBDA_FLOOR);
            }
            let delta = match damped.lu().solve(&(-&grad)) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d,
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let small_step = delta
                .iter()
                .zip(&params)
                .all(|(d, p)| d.abs() <= RELATIVE_TOLERANCE * (p.abs() + 1e-12));
            let trial: Vec<f64> = params.iter().zip(delta.iter()).map(|(p, d)| p + d).collect();
            let r_trial = residuals(&trial);
            let cost_trial = r_trial.norm_squared();
            if cost_trial.is_finite() && cost_trial < cost {
                let rel_drop = (cost - cost_trial) / cost.max(f64::MIN_POSITIVE);
                params = trial;
                r = r_trial;
                cost = cost_trial;
                lambda = (lambda * 0.1).max(LAMBDA_FLOOR);
                accepted = true;
                if (rel_drop <= RELATIVE_TOLERANCE || small_step) && lambda < 1.0 {
                    converged = true;
                }
                break;
            }
            if small_step {
                converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || converged {
            break;
        }
    }

    let jac = jacobian(&predict, &params, n);
    let jtj = jac.transpose() * &jac;
    let dof = n.saturating_sub(p_count);
    let sigma2 = if dof > 0 { cost / dof as f64 } else { 0.0 };
    let mut degenerate = false;
    let uncertainties: Vec<f64> = match jtj.clone().try_inverse() {
        Some(cov) => (0..p_count)
            .map(|j| (cov[(j, j)].max(0.0) * sigma2).sqrt())
            .collect(),
        None => {
            degenerate = true;
            vec![0.0; p_count]
        }
    };
    let uncertainties = if uncertainties.iter().all(|u| u.is_finite()) {
        uncertainties
    } else {
        degenerate = true;
        vec![0.0; p_count]
    };

    let mean = targets.iter().sum::<f64>() / n as f64;
    let tss: f64 = targets.iter().map(|y| (y - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 {
        1.0 - cost / tss
    } else if cost <= f64::EPSILON {
        1.0
    } else {
        0.0
    };

    Ok(FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        estimates: params,
        uncertainties,
        residual_norm: cost.sqrt(),
        r_squared,
        converged,
        iterations,
        degenerate,
    })
}

/// Least squares of `model(x, params)` against samples `(x[i], y[i])`.
pub fn fit_curve<F>(model: F, x: &[f64], y: &[f64], initial: &[f64], names: &[&str]) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} x values vs {} y values",
            x.len(),
            y.len()
        )));
    }
    fit_model(|i, p| model(x[i], p), y, initial, names)
}

fn check_trace(x: &[f64], y: &[f64], min_len: usize, what: &str) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {} x values vs {} y values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_len {
        return Err(Error::InsufficientData(format!(
            "{what} needs at least {min_len} points, got {}",
            x.len()
        )));
    }
    if !x.iter().chain(y).all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what}: non-finite input")));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!(
            "{what}: x grid must be strictly increasing"
        )));
    }
    Ok(())
}

fn line_through(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() <= f64::EPSILON * n * sxx.abs() {
        return (0.0, sy / n);
    }
    let slope = (n * sxy - sx * sy) / denom;
    (slope, (sy - slope * sx) / n)
}

/// Seed (amplitude, rate, offset) for an exponential fit, estimating the
/// baseline from either the settled tail or the head of the trace and
/// log-linear-regressing the rest.
fn exponential_seed(t: &[f64], y: &[f64], baseline_from_tail: bool) -> [f64; 3] {
    let n = t.len();
    let chunk = (n / 10).max(1);
    let offset = if baseline_from_tail {
        y[n - chunk..].iter().sum::<f64>() / chunk as f64
    } else {
        y[..chunk].iter().sum::<f64>() / chunk as f64
    };
    let shifted: Vec<f64> = y.iter().map(|v| v - offset).collect();
    let peak = shifted.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let span = t[n - 1] - t[0];
    if peak == 0.0 {
        return [0.0, 1.0 / span, offset];
    }
    let anchor = shifted.iter().find(|s| s.abs() > 0.02 * peak);
    let sign = if anchor.copied().unwrap_or(shifted[0]) >= 0.0 {
        1.0
    } else {
        -1.0
    };
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(&shifted)
        .filter(|(_, s)| sign * **s > 0.02 * peak)
        .map(|(&ti, &si)| (ti, (sign * si).ln()))
        .collect();
    if pts.len() < 2 {
        return [shifted[0], 1.0 / span, offset];
    }
    let (slope, intercept) = line_through(&pts);
    let mut rate = -slope;
    if rate == 0.0 {
        rate = 1.0 / span;
    }
    [sign * intercept.exp(), rate, offset]
}

/// Fits `y = amplitude * exp(-rate * t) + offset`.
///
/// The amplitude is referenced to `t = 0`. Two seeds are tried (baseline
/// read off the tail for decays, off the head for growing traces) and the
/// cheaper one starts the solver. A best-fit rate that comes out negative
/// is reported as-is with the `degenerate` flag set, since the trace then
/// grows without bound and the "decay rate" reading is meaningless.
///
/// Parameter names: `amplitude`, `rate`, `offset`. Needs at least 5
/// strictly increasing time samples.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<FitResult> {
    check_trace(t, y, 5, "exponential fit")?;
    let model = |ti: f64, p: &[f64]| p[2] + p[0] * (-p[1] * ti).exp();
    let cost_of = |seed: &[f64; 3]| -> f64 {
        t.iter()
            .zip(y)
            .map(|(&ti, &yi)| {
                let r = model(ti, seed) - yi;
                r * r
            })
            .sum()
    };
    let tail_seed = exponential_seed(t, y, true);
    let head_seed = exponential_seed(t, y, false);
    let seed = if cost_of(&tail_seed).is_finite()
        && (cost_of(&tail_seed) <= cost_of(&head_seed) || !cost_of(&head_seed).is_finite())
    {
        tail_seed
    } else {
        head_seed
    };
    let mut fit = fit_curve(model, t, y, &seed, &["amplitude", "rate", "offset"])?;
    if fit.estimates[1] < 0.0 {
        fit.degenerate = true;
    }
    Ok(fit)
}

/// Fits `power = floor + height * (fwhm/2)^2 / ((f - center)^2 + (fwhm/2)^2)`.
///
/// Parameter names: `center`, `fwhm`, `height`, `floor`; the width is
/// reported as a magnitude. Needs at least 7 strictly increasing frequency
/// samples. Flat data converges to zero height with the width
/// unconstrained, which is flagged as degenerate.
pub fn fit_lorentzian(f: &[f64], power: &[f64]) -> Result<FitResult> {
    check_trace(f, power, 7, "Lorentzian fit")?;
    let n = f.len();
    let mut i_max = 0;
    let (mut y_max, mut y_min) = (f64::NEG_INFINITY, f64::INFINITY);
    for (i, &v) in power.iter().enumerate() {
        if v > y_max {
            y_max = v;
            i_max = i;
        }
        y_min = y_min.min(v);
    }
    let half = y_min + 0.5 * (y_max - y_min);
    let above: Vec<f64> = f
        .iter()
        .zip(power)
        .filter(|(_, &v)| v > half)
        .map(|(&fi, _)| fi)
        .collect();
    let span = f[n - 1] - f[0];
    let fwhm0 = if above.len() >= 2 {
        (above[above.len() - 1] - above[0]).max(span / n as f64)
    } else {
        span / 4.0
    };
    let model = |fi: f64, p: &[f64]| {
        let hw = 0.5 * p[1];
        p[3] + p[2] * hw * hw / ((fi - p[0]).powi(2) + hw * hw)
    };
    let seed = [f[i_max], fwhm0, y_max - y_min, y_min];
    let mut fit = fit_curve(model, f, power, &seed, &["center", "fwhm", "height", "floor"])?;
    fit.estimates[1] = fit.estimates[1].abs();
    Ok(fit)
}

/// Fits the two branches of an avoided crossing between the flux-tuned
/// dissipator and a static mode.
///
/// `branches[i]` holds the (lower, upper) branch frequencies measured at
/// `phi[i]`; the model is the eigenvalue pair of
/// `[[omega_tuned(phi), g], [g, omega_bare]]` with the tuned frequency
/// taken from `flux_params`. Parameter names: `g`, `omega_bare`; the
/// coupling is reported as a magnitude. A gap that fits below the solver's
/// resolution leaves `g` near zero with the `degenerate` flag set.
pub fn fit_avoided_crossing(
    phi: &[f64],
    branches: &[(f64, f64)],
    flux_params: &DeviceParams,
) -> Result<FitResult> {
    if phi.len() != branches.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} flux points vs {} branch pairs",
            phi.len(),
            branches.len()
        )));
    }
    if phi.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "avoided-crossing fit needs at least 3 flux points, got {}",
            phi.len()
        )));
    }
    if !phi
        .iter()
        .chain(branches.iter().flat_map(|(a, b)| [a, b]))
        .all(|v| v.is_finite())
    {
        return Err(Error::InvalidParameter(
            "avoided-crossing fit: non-finite input".into(),
        ));
    }
    flux_params.validate()?;

    let n = phi.len();
    let lowers: Vec<f64> = branches.iter().map(|&(a, b)| a.min(b)).collect();
    let uppers: Vec<f64> = branches.iter().map(|&(a, b)| a.max(b)).collect();
    let tuned: Vec<f64> = phi
        .iter()
        .map(|&p| model::dissipator_frequency(flux_params, p))
        .collect();

    let targets: Vec<f64> = lowers.iter().chain(&uppers).copied().collect();
    let bare0 = (0..n).map(|i| lowers[i] + uppers[i] - tuned[i]).sum::<f64>() / n as f64;
    let g0 = 0.5
        * (0..n)
            .map(|i| uppers[i] - lowers[i])
            .fold(f64::INFINITY, f64::min);

    let predict = |i: usize, p: &[f64]| {
        let tuned_i = tuned[i % n];
        let mean = 0.5 * (tuned_i + p[1]);
        let split = (0.25 * (tuned_i - p[1]).powi(2) + p[0] * p[0]).sqrt();
        if i < n {
            mean - split
        } else {
            mean + split
        }
    };
    let mut fit = fit_model(predict, &targets, &[g0, bare0], &["g", "omega_bare"])?;
    fit.estimates[0] = fit.estimates[0].abs();
    Ok(fit)
}

/// Fits the flux tuning curve
/// `omega(phi) = (omega_max - alpha) * (cos^2(pi phi) + d^2 sin^2(pi phi))^(1/4) + alpha`
/// through measured `(phi, omega)` crossing points.
///
/// Pass `Some(alpha)` to pin the anharmonicity offset to an independently
/// known value, or `None` to float it as a third parameter. Parameter
/// names: `omega_max`, `d`, and `alpha` when floated; the asymmetry is
/// reported as a magnitude. Needs at least 3 points (and at least one per
/// free parameter).
pub fn fit_flux_curve(points: &[(f64, f64)], alpha: Option<f64>) -> Result<FitResult> {
    let free_alpha = alpha.is_none();
    let p_count = if free_alpha { 3 } else { 2 };
    if points.len() < 3.max(p_count) {
        return Err(Error::InsufficientData(format!(
            "flux-curve fit needs at least {} points, got {}",
            3.max(p_count),
            points.len()
        )));
    }
    if !points.iter().flat_map(|(a, b)| [a, b]).all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("flux-curve fit: non-finite input".into()));
    }
    let (phis, freqs): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let omega_max0 = freqs.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let pinned = alpha.unwrap_or(0.0);
    let model = |phi: f64, p: &[f64]| {
        let a = if free_alpha { p[2] } else { pinned };
        model::raw_tuning_curve(p[0], p[1], a, phi)
    };
    let mut initial = vec![omega_max0, 0.1];
    let mut names = vec!["omega_max", "d"];
    if free_alpha {
        initial.push(0.0);
        names.push("alpha");
    }
    let mut fit = fit_curve(model, &phis, &freqs, &initial, &names)?;
    fit.estimates[1] = fit.estimates[1].abs();
    Ok(fit)
}

/// Infers the qubit-cavity coupling from the measured dispersive shift.
///
/// `chi` is the full frequency separation between the cavity lines
/// conditioned on the two qubit states (twice the per-state pull), so
/// `g = sqrt(chi/2 * Delta (Delta + alpha_q) / alpha_q)` with
/// `Delta = omega_q - omega_c`. Returns [`Error::StraddledResonance`] when
/// the cavity sits between the two qubit transitions, where the dispersive
/// relation has no real solution.
pub fn infer_coupling_from_chi(chi: f64, omega_q: f64, omega_c: f64, alpha_q: f64) -> Result<f64> {
    if !chi.is_finite() || !omega_q.is_finite() || !omega_c.is_finite() || !alpha_q.is_finite() {
        return Err(Error::InvalidParameter("non-finite dispersive inputs".into()));
    }
    if alpha_q == 0.0 {
        return Err(Error::InvalidParameter(
            "qubit anharmonicity must be nonzero to relate chi to g".into(),
        ));
    }
    let delta = omega_q - omega_c;
    let product = delta * (delta + alpha_q);
    if product < 0.0 {
        return Err(Error::StraddledResonance);
    }
    if product == 0.0 {
        return Err(Error::InvalidParameter(
            "qubit transition resonant with the cavity".into(),
        ));
    }
    Ok((0.5 * chi.abs() * product / alpha_q.abs()).sqrt())
}

/// Dominant oscillation frequency of a uniformly sampled trace, in rad/us.
///
/// Subtracts the mean, applies a Hann window, zero-pads eightfold, and
/// refines the tallest non-DC FFT bin with parabolic interpolation of the
/// magnitude. Needs at least 16 uniform samples.
pub fn oscillation_frequency(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    let n = times.len();
    if n < 16 {
        return Err(Error::InsufficientData(format!(
            "oscillation frequency needs at least 16 samples, got {n}"
        )));
    }
    let dt = (times[n - 1] - times[0]) / (n as f64 - 1.0);
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidGrid("sample times must increase".into()));
    }
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt)
    {
        return Err(Error::InvalidGrid("sample times must be uniform".into()));
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let n_fft = (8 * n).next_power_of_two();
    let mut buf: Vec<C64> = vec![C64::new(0.0, 0.0); n_fft];
    for (i, &v) in values.iter().enumerate() {
        let w = 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / (n as f64 - 1.0)).cos());
        buf[i] = C64::new((v - mean) * w, 0.0);
    }
    rustfft::FftPlanner::new()
        .plan_fft_forward(n_fft)
        .process(&mut buf);

    let half = n_fft / 2;
    let (mut k_peak, mut best) = (1usize, 0.0_f64);
    for (k, value) in buf.iter().enumerate().take(half + 1).skip(1) {
        let m = value.norm();
        if m > best {
            best = m;
            k_peak = k;
        }
    }
    if best <= 0.0 {
        return Err(Error::FitFailed("trace has no spectral content".into()));
    }
    let mut k_refined = k_peak as f64;
    if k_peak > 1 && k_peak < half {
        let (a, b, c) = (buf[k_peak - 1].norm(), best, buf[k_peak + 1].norm());
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            k_refined += 0.5 * (a - c) / denom;
        }
    }
    Ok(std::f64::consts::TAU * k_refined / (n_fft as f64 * dt))
}
