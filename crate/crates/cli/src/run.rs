//! Experiment runners: resolve a [`RunConfig`] against the per-experiment
//! defaults, call into the library, and render the result as a table plus
//! manifest summary.

use serde_json::json;

use qdiss::constants::mhz;
use qdiss::experiments::{
    self, linspace, NoiseSpec, ResetOptions, RingdownOptions, SweepAxis, SweepGrid,
};
use qdiss::model::DriveSpec;

use crate::config::RunConfig;
use crate::output::{cell, Table};
use crate::Failure;

/// A finished experiment: the table to write, its file name, and the scalar
/// headline numbers echoed into the manifest.
pub struct RunOutput {
    pub file_name: &'static str,
    pub table: Table,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

fn config_err(message: String) -> Failure {
    Failure::Config(message)
}

/// Induced-loss map: drive frequency and strength swept over a grid, one
/// fitted cavity decay rate per point.
pub fn ringdown(config: &RunConfig, seed: Option<u64>) -> Result<RunOutput, Failure> {
    let params = config.device.to_params().map_err(config_err)?;
    let section = &config.ringdown;
    let delta = params.operating_detuning();

    let omega_p = section
        .omega_p
        .resolve("ringdown.omega_p")
        .map_err(config_err)?
        .unwrap_or_else(|| linspace(delta - mhz(150.0), delta + mhz(150.0), 21));
    let g_p = section
        .g_p
        .resolve("ringdown.g_p")
        .map_err(config_err)?
        .unwrap_or_else(|| linspace(0.0, mhz(10.0), 11));

    let grid = SweepGrid::two(
        SweepAxis::new("omega_p", "rad/us", omega_p).map_err(|e| config_err(e.to_string()))?,
        SweepAxis::new("g_p", "rad/us", g_p).map_err(|e| config_err(e.to_string()))?,
    );

    let mut options = RingdownOptions::default();
    if let Some(dim) = section.cavity_dim {
        options.cavity_dim = dim;
    }
    if let Some(level) = section.initial_level {
        options.initial_level = level;
    }
    if let Some(samples) = section.samples {
        options.samples = samples;
    }
    if let Some(factor) = section.window_factor {
        options.window_factor = factor;
    }
    if let Some(factor) = section.settle_factor {
        options.settle_factor = factor;
    }
    options.noise = section
        .noise_sigma
        .map(|sigma| NoiseSpec { sigma, seed: seed.unwrap_or(0) });

    let map = experiments::ringdown_spectroscopy(&params, &grid, &options)?;

    let rows = map
        .points
        .iter()
        .map(|p| {
            vec![
                p.omega_p.to_string(),
                p.g_p.to_string(),
                cell(p.rate),
                cell(p.uncertainty),
                cell(p.r_squared),
            ]
        })
        .collect();

    let mut summary = serde_json::Map::new();
    let max_rate = map
        .points
        .iter()
        .filter_map(|p| p.rate)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_rate.is_finite() {
        summary.insert("max_rate_per_us".into(), json!(max_rate));
    }
    summary.insert(
        "fitted_points".into(),
        json!(map.points.iter().filter(|p| p.rate.is_some()).count()),
    );

    Ok(RunOutput {
        file_name: "ringdown.csv",
        table: Table {
            header: vec![
                "omega_p_rad_per_us",
                "g_p_rad_per_us",
                "rate_per_us",
                "rate_uncertainty_per_us",
                "r_squared",
            ],
            rows,
        },
        summary,
    })
}

/// Reset transient: residual photon population and echo dephasing rate
/// against time since the drain drive turned on.
pub fn reset(config: &RunConfig, _seed: Option<u64>) -> Result<RunOutput, Failure> {
    let params = config.device.to_params().map_err(config_err)?;
    let section = &config.reset;

    let tau = section
        .tau
        .resolve("reset.tau")
        .map_err(config_err)?
        .unwrap_or_else(|| linspace(0.0, 3.0, 301));
    let n_bar0 = section.n_bar0.unwrap_or(39.8);
    let drive = DriveSpec::new(
        section.epsilon_p.map_or(0.0, |f| f.0),
        section
            .omega_p
            .map_or_else(|| params.operating_detuning(), |f| f.0),
    );

    let mut options = ResetOptions::default();
    options.gamma_cav = section.gamma_cav;
    if let Some(gap) = section.gap {
        options.gap = gap;
    }
    if let Some(rate) = section.gamma_2_0 {
        options.gamma_2_0 = rate;
    }
    if let Some(fraction) = section.recovery_fraction {
        options.recovery_fraction = fraction;
    }

    let result = experiments::reset_experiment(&params, &drive, n_bar0, &tau, &options)?;

    let rows = result
        .tau
        .iter()
        .zip(result.n_bar.iter().zip(&result.gamma2))
        .map(|(&t, (&n, &g2))| vec![t.to_string(), n.to_string(), g2.to_string()])
        .collect();

    let mut summary = serde_json::Map::new();
    summary.insert("gamma_cav_per_us".into(), json!(result.gamma_cav));
    summary.insert("n_bar_start".into(), json!(result.n_bar_start));
    summary.insert("recovery_time_us".into(), json!(result.recovery_time));

    Ok(RunOutput {
        file_name: "reset.csv",
        table: Table {
            header: vec!["tau_us", "n_bar", "gamma2_per_us"],
            rows,
        },
        summary,
    })
}

/// Refrigeration map: steady occupations and echo dephasing over a grid of
/// drive powers and injected photon numbers.
pub fn cool(config: &RunConfig, _seed: Option<u64>) -> Result<RunOutput, Failure> {
    let params = config.device.to_params().map_err(config_err)?;
    let section = &config.cool;

    let g_p = section
        .g_p
        .resolve("cool.g_p")
        .map_err(config_err)?
        .unwrap_or_else(|| linspace(0.0, mhz(11.0), 12));
    let injected = section
        .injected
        .clone()
        .unwrap_or_else(|| vec![0.0, 0.14, 0.35, 1.10]);
    let gamma_2_0 = section.gamma_2_0.unwrap_or(0.124);

    let map = experiments::refrigeration_experiment(&params, &g_p, &injected, gamma_2_0)?;

    let rows = map
        .points
        .iter()
        .map(|p| {
            vec![
                p.n_injected.to_string(),
                p.g_p.to_string(),
                p.kappa_eff.to_string(),
                p.n_thermal.to_string(),
                p.n_coherent.to_string(),
                p.gamma2_echo.to_string(),
            ]
        })
        .collect();

    let mut summary = serde_json::Map::new();
    summary.insert("gamma_2_0_per_us".into(), json!(map.gamma_2_0));
    let min_gamma2 = map
        .points
        .iter()
        .map(|p| p.gamma2_echo)
        .fold(f64::INFINITY, f64::min);
    if min_gamma2.is_finite() {
        summary.insert("min_gamma2_echo_per_us".into(), json!(min_gamma2));
    }

    Ok(RunOutput {
        file_name: "cool.csv",
        table: Table {
            header: vec![
                "n_injected",
                "g_p_rad_per_us",
                "kappa_eff_per_us",
                "n_thermal",
                "n_coherent",
                "gamma2_echo_per_us",
            ],
            rows,
        },
        summary,
    })
}

/// Flux spectroscopy: hybridized mode branches against dissipator flux bias,
/// in long format with one row per (bias, branch) pair.
pub fn spectroscopy(config: &RunConfig, _seed: Option<u64>) -> Result<RunOutput, Failure> {
    let params = config.device.to_params().map_err(config_err)?;
    let section = &config.spectroscopy;

    let phi = section
        .phi
        .resolve("spectroscopy.phi")
        .map_err(config_err)?
        .unwrap_or_else(|| linspace(0.0, 0.5, 251));
    let include_qubit = section.include_qubit.unwrap_or(true);

    let map = experiments::flux_spectroscopy(&params, &phi, include_qubit)?;

    let mut rows = Vec::with_capacity(map.phi.len() * map.branches.len());
    for (k, &phi_k) in map.phi.iter().enumerate() {
        for (b, branch) in map.branches.iter().enumerate() {
            rows.push(vec![phi_k.to_string(), b.to_string(), branch[k].to_string()]);
        }
    }

    let mut summary = serde_json::Map::new();
    summary.insert("modes".into(), json!(map.mode_labels));
    summary.insert("branches".into(), json!(map.branches.len()));

    Ok(RunOutput {
        file_name: "spectroscopy.csv",
        table: Table {
            header: vec!["phi", "branch", "frequency_rad_per_us"],
            rows,
        },
        summary,
    })
}
