//! End-to-end numerical narratives: echo-chain runs, exponent fitting,
//! norm-inflation scans, the modified-scattering construction, and damping
//! verification.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{evolve, IntegratorConfig};
use crate::model::{
    norm, norm_single, velocity_norm, EtaEnsemble, EtaEntry, ModeVector, ModelParams, NormWeight,
    TimeVar,
};
use crate::scattering::{optimal_k, ChainLaw, ExponentVariant};

/// Per-resonance record of an echo chain.
#[derive(Debug, Clone)]
pub struct ResonanceTrace {
    /// Resonant mode index of this window.
    pub k: i64,
    /// Single-resonance strength `xi = eta/k^2`.
    pub xi: f64,
    /// `(tau_enter, tau_exit)` of the window.
    pub interval: (f64, f64),
    /// Dominant amplitude after the window over dominant before.
    pub gain: f64,
    /// Requested norms of the state at the window exit.
    pub norms: Vec<(String, f64)>,
    /// Whether mode `k-1` holds at least half the post-window maximum.
    pub handoff_ok: bool,
}

/// Full echo-chain run from mode `k0` down to the last resonance.
#[derive(Debug, Clone)]
pub struct ChainRunResult {
    pub params: ModelParams,
    pub trace: Vec<ResonanceTrace>,
    pub final_state: ModeVector,
    /// Sum of per-resonance log gains (log-space product).
    pub log_total_gain: f64,
    /// Windows where the dominance handoff `k -> k-1` failed; expected
    /// outside the validated regime `xi >= 10/c`, reported rather than fatal.
    pub handoff_failures: Vec<i64>,
    pub wall_time: std::time::Duration,
}

impl ChainRunResult {
    pub fn total_gain(&self) -> f64 {
        self.log_total_gain.exp()
    }
}

/// Midpoint between the critical times of `k+1` and `k`, the canonical
/// window entry for resonance `k`.
pub fn window_start(k: i64) -> f64 {
    0.5 * (1.0 / (k + 1) as f64 + 1.0 / k as f64)
}

/// Window exit for resonance `k`; the final window runs to `tau = 1.5`.
pub fn window_end(k: i64) -> f64 {
    if k >= 2 {
        0.5 * (1.0 / k as f64 + 1.0 / (k - 1) as f64)
    } else {
        1.5
    }
}

/// Run a full echo chain: a unit impulse on mode `k0` placed at the window
/// entry of resonance `k0`, integrated window by window down to `tau = 1.5`,
/// recording the per-resonance dominant-mode gains.
pub fn run_echo_chain(
    c: f64,
    eta: f64,
    k0: i64,
    cfg: &IntegratorConfig,
    norms: &[NormWeight],
) -> Result<ChainRunResult> {
    if k0 < 1 {
        return Err(Error::InvalidParameter(format!("chain needs k0 >= 1, got {k0}")));
    }
    if eta < (k0 * k0) as f64 {
        return Err(Error::InvalidParameter(format!(
            "chain needs eta/k0^2 >= 1, got eta = {eta}, k0 = {k0}"
        )));
    }
    let started = std::time::Instant::now();
    let (k_min, k_max) = ModelParams::chain_window(c, k0, 1e-12);
    let p = ModelParams::new(c, eta, k_min, k_max)?;

    let mut state = ModeVector::delta(window_start(k0), TimeVar::Tau, k_min, k_max, k0);
    let mut trace = Vec::with_capacity(k0 as usize);
    let mut handoff_failures = Vec::new();
    let mut log_total_gain = 0.0;

    for k in (1..=k0).rev() {
        let tau_exit = window_end(k);
        let before = state.dominant().1;
        let rep = evolve(&state, tau_exit, &p, cfg)?;
        state = rep.final_state;
        let (dom_k, after) = state.dominant();
        let gain = after / before;
        log_total_gain += gain.ln();
        let handoff_ok = state.get(k - 1).norm() >= 0.5 * after;
        if !handoff_ok {
            handoff_failures.push(k);
            log::debug!(
                "handoff failure at resonance k = {k}: dominant mode {dom_k} (xi = {})",
                eta / (k * k) as f64
            );
        }
        trace.push(ResonanceTrace {
            k,
            xi: eta / (k * k) as f64,
            interval: (window_start(k), tau_exit),
            gain,
            norms: norms
                .iter()
                .map(|w| (w.label(), norm_single(&state, eta, w)))
                .collect(),
            handoff_ok,
        });
    }

    Ok(ChainRunResult {
        params: p,
        trace,
        final_state: state,
        log_total_gain,
        handoff_failures,
        wall_time: started.elapsed(),
    })
}

/// Least-squares power-law fit in log-log space.
#[derive(Debug, Clone)]
pub struct ExponentFit {
    pub label: String,
    /// `(log xi, log gain)` pairs actually fitted.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
}

/// Ordinary least squares on `(log xi, log gain)`; the slope is the measured
/// exponent. Requires at least three strictly positive points with
/// non-degenerate abscissae.
pub fn fit_exponent(label: &str, points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need >= 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(x, g)| !(*x > 0.0) || !(*g > 0.0)) {
        return Err(Error::DegenerateFit("all points must be positive".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, g)| (x.ln(), g.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateFit("abscissae are all equal".into()));
    }
    let sxy = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_rms = (logs
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentFit {
        label: label.to_string(),
        points: logs,
        slope,
        intercept,
        residual_rms,
    })
}

/// One row of a norm-inflation scan.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub eta: f64,
    pub k: i64,
    pub log_gain_measured: f64,
    /// `c^k (eta^k/(k!)^2)^gamma` in log space.
    pub log_gain_model: f64,
    /// `(c^(2-2 gamma2))^k (eta^k/(k!)^2)^gamma` in log space.
    pub log_gain_homogeneous: f64,
    /// `log(total gain)/sqrt(eta)`, the Gevrey-2 signature; stabilizes as
    /// `eta` grows.
    pub ratio_log_gain_sqrt_eta: f64,
    pub handoff_failures: usize,
}

/// Chain runs over an `eta` list, each at its optimal chain length, against
/// the closed-form predictions.
pub fn norm_inflation_scan(
    c: f64,
    eta_list: &[f64],
    norms: &[NormWeight],
    cfg: &IntegratorConfig,
) -> Result<Vec<ScanRow>> {
    let variant = ExponentVariant::ThreeMode;
    eta_list
        .par_iter()
        .map(|&eta| {
            let k = optimal_k(c, eta, ChainLaw::ModelGrowth(variant))?;
            let run = run_echo_chain(c, eta, k, cfg, norms)?;
            Ok(ScanRow {
                eta,
                k,
                log_gain_measured: run.log_total_gain,
                log_gain_model: crate::scattering::chain_growth_prediction(
                    c,
                    eta,
                    k,
                    ChainLaw::ModelGrowth(variant),
                )?,
                log_gain_homogeneous: crate::scattering::chain_growth_prediction(
                    c,
                    eta,
                    k,
                    ChainLaw::HomogeneousChain(variant),
                )?,
                ratio_log_gain_sqrt_eta: run.log_total_gain / eta.sqrt(),
                handoff_failures: run.handoff_failures.len(),
            })
        })
        .collect()
}

/// Prescribed final-data profile of the scattering construction.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiProfile {
    /// `|psi(eta)| = (1 + eta^2)^(-(sigma0 + 1/2)/2)`, the critical Sobolev
    /// decay for regularity `sigma0`.
    SobolevDecay,
    Zero,
    /// Explicit values, one per grid point.
    Custom(Vec<f64>),
}

/// Outcome of the modified-scattering construction on a finite eta grid.
#[derive(Debug, Clone)]
pub struct ScatteringDemoResult {
    pub eta_grid: Vec<f64>,
    /// Inverse measured gains `1/g(eta)`; positive, decaying in eta.
    pub weights: Vec<f64>,
    /// Measured per-eta total transfer onto mode 1 at the scattering time.
    pub measured_g: Vec<f64>,
    /// Prescribed final-data amplitudes `psi(eta)`.
    pub psi_values: Vec<f64>,
    /// Mode-1 amplitudes actually reached; equals `psi_values` by the
    /// weighting construction.
    pub final_mode1: Vec<f64>,
    pub sample_times: Vec<f64>,
    /// Ensemble norms over the full grid at the sample times, per weight.
    pub norm_history: Vec<(String, Vec<(f64, f64)>)>,
    /// Ensemble norms at the last sample time for each grid prefix
    /// (cutoff), per weight.
    pub norm_final_by_cutoff: Vec<(String, Vec<f64>)>,
    /// Velocity-weighted l2 over the full grid at the sample times.
    pub velocity_history: Vec<(f64, f64)>,
}

/// Default sample times: geometric with ratio 3, so `~1/tau` velocity tails
/// shrink by about 3x per sample.
pub const DEMO_SAMPLE_TIMES: [f64; 4] = [2.5, 7.5, 22.5, 67.5];

/// Build weighted initial data per grid frequency so the prescribed profile
/// appears as the final mode-1 data, evolve every frequency past its chain,
/// and collect norm and velocity histories.
///
/// Each frequency evolves independently (the system decouples in eta); runs
/// execute in a work pool and are reduced in grid order.
pub fn modified_scattering_demo(
    c: f64,
    sigma0: f64,
    eta_grid: &[f64],
    psi: &PsiProfile,
    cfg: &IntegratorConfig,
) -> Result<ScatteringDemoResult> {
    if eta_grid.is_empty() {
        return Err(Error::InvalidParameter("empty eta grid".into()));
    }
    if let PsiProfile::Custom(v) = psi {
        if v.len() != eta_grid.len() {
            return Err(Error::InvalidParameter(format!(
                "custom profile has {} values for {} grid points",
                v.len(),
                eta_grid.len()
            )));
        }
    }
    let psi_values: Vec<f64> = eta_grid
        .iter()
        .enumerate()
        .map(|(i, &eta)| match psi {
            PsiProfile::SobolevDecay => (1.0 + eta * eta).powf(-(sigma0 + 0.5) / 2.0),
            PsiProfile::Zero => 0.0,
            PsiProfile::Custom(v) => v[i],
        })
        .collect();

    // Reference run per eta: unit impulse through its chain, snapshots at the
    // sample times. The weighted states are exact rescalings by linearity.
    struct PerEta {
        g: f64,
        snapshots: Vec<ModeVector>,
    }
    let runs: Vec<PerEta> = eta_grid
        .par_iter()
        .map(|&eta| {
            let k = optimal_k(c, eta, ChainLaw::ModelGrowth(ExponentVariant::ThreeMode))?;
            let run = run_echo_chain(c, eta, k, cfg, &[])?;
            let mut snapshots = Vec::with_capacity(DEMO_SAMPLE_TIMES.len());
            let mut state = run.final_state;
            for &tau in DEMO_SAMPLE_TIMES.iter() {
                state = evolve(&state, tau, &run.params, cfg)?.final_state;
                snapshots.push(state.clone());
            }
            let g = snapshots[0].get(1).re;
            if !(g.is_finite() && g != 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "degenerate measured gain g({eta}) = {g}"
                )));
            }
            Ok(PerEta { g, snapshots })
        })
        .collect::<Result<_>>()?;

    let weights: Vec<f64> = runs.iter().map(|r| 1.0 / r.g.abs()).collect();
    let measured_g: Vec<f64> = runs.iter().map(|r| r.g).collect();

    // Weighted ensembles at each sample time.
    let scale = |i: usize| psi_values[i] / runs[i].g;
    let ensemble_at = |s: usize, cutoff: usize| -> EtaEnsemble {
        EtaEnsemble {
            entries: (0..cutoff)
                .map(|i| EtaEntry {
                    eta: eta_grid[i],
                    state: runs[i].snapshots[s].scale(scale(i).into()),
                })
                .collect(),
        }
    };

    let kinds = [
        NormWeight::Sobolev { s: sigma0 + 1.0 },
        NormWeight::Sobolev { s: sigma0 - 0.25 },
        NormWeight::L2,
    ];
    let n = eta_grid.len();
    let last = DEMO_SAMPLE_TIMES.len() - 1;

    let norm_history = kinds
        .iter()
        .map(|w| {
            (
                w.label(),
                DEMO_SAMPLE_TIMES
                    .iter()
                    .enumerate()
                    .map(|(s, &tau)| (tau, norm(&ensemble_at(s, n), w)))
                    .collect(),
            )
        })
        .collect();
    let norm_final_by_cutoff = kinds
        .iter()
        .map(|w| {
            (
                w.label(),
                (1..=n).map(|cut| norm(&ensemble_at(last, cut), w)).collect(),
            )
        })
        .collect();
    let velocity_history = DEMO_SAMPLE_TIMES
        .iter()
        .enumerate()
        .map(|(s, &tau)| {
            let ens = ensemble_at(s, n);
            let v2: f64 = ens
                .entries
                .iter()
                .map(|e| velocity_norm(&e.state, e.eta).map(|v| v * v))
                .sum::<Result<f64>>()?;
            Ok((tau, v2.sqrt()))
        })
        .collect::<Result<_>>()?;

    let final_mode1 = (0..n)
        .map(|i| runs[i].snapshots[0].get(1).re * scale(i))
        .collect();

    Ok(ScatteringDemoResult {
        eta_grid: eta_grid.to_vec(),
        weights,
        measured_g,
        psi_values,
        final_mode1,
        sample_times: DEMO_SAMPLE_TIMES.to_vec(),
        norm_history,
        norm_final_by_cutoff,
        velocity_history,
    })
}

/// Large-time damping diagnostics of one chain run.
#[derive(Debug, Clone)]
pub struct DampingReport {
    /// Sup over sampled `tau >= horizon/2` of the velocity-norm change
    /// against the value at `horizon/2`; decreases as the horizon grows.
    pub velocity_tail: f64,
    pub vorticity_norm_series: Vec<(f64, f64)>,
    pub velocity_series: Vec<(f64, f64)>,
    /// `max ||omega(tau)|| / ||omega(2)||` over the sampled tail; bounded by
    /// `exp(2 c C1 pi)`.
    pub max_growth_after_2: f64,
}

/// Extend a finished run to `horizon_tau`, verifying the post-resonance
/// plateau of the vorticity norms and the decay of the velocity changes.
pub fn damping_check(
    run: &ChainRunResult,
    horizon_tau: f64,
    cfg: &IntegratorConfig,
) -> Result<DampingReport> {
    if horizon_tau < 4.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon must be >= 4, got {horizon_tau}"
        )));
    }
    let p = run.params;
    let mut state = run.final_state.clone();
    if state.time < 2.0 {
        state = evolve(&state, 2.0, &p, cfg)?.final_state;
    }
    // Geometric sample times 2, 4, 8, ... capped at the horizon.
    let mut samples = vec![2.0f64];
    while *samples.last().unwrap() < horizon_tau {
        samples.push((samples.last().unwrap() * 2.0).min(horizon_tau));
    }

    let mut vort = Vec::with_capacity(samples.len());
    let mut velo = Vec::with_capacity(samples.len());
    for &tau in &samples {
        if tau > state.time {
            state = evolve(&state, tau, &p, cfg)?.final_state;
        }
        vort.push((tau, state.l2_norm()));
        velo.push((tau, velocity_norm(&state, p.eta)?));
    }
    let base = vort[0].1;
    let max_growth_after_2 = if base > 0.0 {
        vort.iter().map(|(_, v)| v / base).fold(0.0f64, f64::max)
    } else {
        0.0
    };
    let half = horizon_tau / 2.0;
    let v_at_half = velo
        .iter()
        .filter(|(t, _)| *t >= half)
        .map(|(_, v)| *v)
        .next()
        .unwrap_or(0.0);
    let velocity_tail = velo
        .iter()
        .filter(|(t, _)| *t >= half)
        .map(|(_, v)| (v - v_at_half).abs())
        .fold(0.0f64, f64::max);

    Ok(DampingReport {
        velocity_tail,
        vorticity_norm_series: vort,
        velocity_series: velo,
        max_growth_after_2,
    })
}
