use cavity_teleport::analysis::{fidelity_mistimed, success_probability, timing_budget, TimingBudget};
use cavity_teleport::dynamics::{Detector, SystemParams};
use cavity_teleport::protocol::{run_analytic, OutcomeStatus, ProtocolSchedule};
use cavity_teleport::pulses::{raman_model, RamanModel};
use cavity_teleport::trajectory::{
    checkpoint_compare, default_dt_max, run_ensemble, EnsembleResult, StageComparison, TrajectoryConfig,
};
use serde::Serialize;

use crate::config::{Resolved, RunConfig};
use crate::Failure;

#[derive(Serialize)]
pub struct Derived {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub eta: f64,
    pub omega_raman: f64,
    pub delta_raman: f64,
    pub beta: f64,
    pub schedule: ProtocolSchedule,
    pub purge_residual: f64,
    pub raman: RamanModel,
    pub dt_max: f64,
}

pub fn params(r: &Resolved) -> Result<Derived, Failure> {
    let p = &r.params;
    Ok(Derived {
        g: p.g(),
        kappa: p.kappa(),
        gamma: p.gamma(),
        eta: p.eta(),
        omega_raman: p.omega_raman(),
        delta_raman: p.delta_raman(),
        beta: p.beta(),
        schedule: r.schedule,
        purge_residual: r.schedule.purge_residual(p),
        raman: raman_model(p)?,
        dt_max: default_dt_max(p),
    })
}

/// Closed-form figures at one configuration.
#[derive(Clone, Debug, Serialize)]
pub struct Analytic {
    pub beta: f64,
    pub t1: f64,
    pub dt1: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "P_prime")]
    pub p_prime: f64,
    #[serde(rename = "F_plus")]
    pub f_plus: f64,
    #[serde(rename = "F_minus")]
    pub f_minus: f64,
    #[serde(rename = "F_avg")]
    pub f_avg: f64,
    /// `None` when a window is infinite.
    pub timing_budget: Option<TimingBudget>,
    pub raman_leakage: f64,
}

pub fn analytic(r: &Resolved) -> Result<Analytic, Failure> {
    let (p, s) = (&r.params, &r.schedule);
    let prob = success_probability(p, s)?;
    let (f_plus, _) = fidelity_mistimed(p, s, &r.input, Detector::Plus)?;
    let (f_minus, _) = fidelity_mistimed(p, s, &r.input, Detector::Minus)?;
    let finite = [s.t1, s.dt1, s.tau1, s.tau2, s.t_d].iter().all(|v| v.is_finite());
    Ok(Analytic {
        beta: p.beta(),
        t1: s.t1,
        dt1: s.dt1,
        p: prob,
        p_prime: p.eta().powi(2) * prob,
        f_plus,
        f_minus,
        f_avg: 0.5 * (f_plus + f_minus),
        timing_budget: if finite { Some(timing_budget(p, s, true)?) } else { None },
        raman_leakage: raman_model(p)?.leakage,
    })
}

#[derive(Serialize)]
pub struct Predictions {
    #[serde(flatten)]
    pub closed_form: Analytic,
    /// Sum of the success weights from the click-time quadrature.
    pub model_success_rate: f64,
    pub cavity_branching_ratio: f64,
}

#[derive(Serialize)]
pub struct Comparison {
    /// `(empirical − P′)/P′`.
    pub success_rate_vs_p_prime: f64,
    pub success_rate_vs_model: f64,
    /// Measured second-window cavity fraction over `κ/(κ+Γ)`.
    pub branching_vs_ratio: Option<f64>,
}

#[derive(Serialize)]
pub struct Trajectories {
    pub dt_max: f64,
    pub ensemble: EnsembleResult,
    pub analytic: Predictions,
    pub comparison: Comparison,
}

pub fn trajectories(r: &Resolved, cfg: &RunConfig) -> Result<Trajectories, Failure> {
    let (p, s) = (&r.params, &r.schedule);
    let traj = TrajectoryConfig::new(p, cfg.seed, cfg.n_traj);
    let ensemble = run_ensemble(p, s, &r.input, &traj)?;
    let model_success_rate = run_analytic(p, s, &r.input)?
        .iter()
        .filter(|o| o.status == OutcomeStatus::Success)
        .map(|o| o.weight)
        .sum::<f64>();
    let closed_form = analytic(r)?;
    let ratio = p.kappa() / (p.kappa() + p.gamma());
    let rate = ensemble.success_rate.mean;
    let comparison = Comparison {
        success_rate_vs_p_prime: (rate - closed_form.p_prime) / closed_form.p_prime,
        success_rate_vs_model: (rate - model_success_rate) / model_success_rate,
        branching_vs_ratio: ensemble.second_window_cavity_fraction.map(|f| f / ratio),
    };
    Ok(Trajectories {
        dt_max: traj.dt_max,
        ensemble,
        analytic: Predictions { closed_form, model_success_rate, cavity_branching_ratio: ratio },
        comparison,
    })
}

#[derive(Serialize)]
pub struct Checkpoints {
    pub dt_max: f64,
    pub stages: Vec<StageComparison>,
    pub min_fidelity: f64,
}

pub fn checkpoints(r: &Resolved) -> Result<Checkpoints, Failure> {
    let dt_max = default_dt_max(&r.params);
    let stages = checkpoint_compare(&r.params, &r.schedule, &r.input, dt_max)?;
    let min_fidelity = stages.iter().map(|c| c.fidelity).fold(f64::INFINITY, f64::min);
    Ok(Checkpoints { dt_max, stages, min_fidelity })
}

pub const SWEEP_HEADER: [&str; 9] =
    ["sweep_key", "value", "beta", "t1", "P", "P_prime", "F_plus", "F_minus", "F_avg"];

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub sweep_key: String,
    pub value: f64,
    pub beta: f64,
    pub t1: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "P_prime")]
    pub p_prime: f64,
    #[serde(rename = "F_plus")]
    pub f_plus: f64,
    #[serde(rename = "F_minus")]
    pub f_minus: f64,
    #[serde(rename = "F_avg")]
    pub f_avg: f64,
}

pub fn sweep(cfg: &RunConfig, key: &str, values: &[f64]) -> Result<Vec<SweepRow>, Failure> {
    values
        .iter()
        .map(|&value| {
            let point = cfg.set(key, value)?;
            let a = analytic(&point.resolve()?)?;
            Ok(SweepRow {
                sweep_key: key.to_string(),
                value,
                beta: a.beta,
                t1: a.t1,
                p: a.p,
                p_prime: a.p_prime,
                f_plus: a.f_plus,
                f_minus: a.f_minus,
                f_avg: a.f_avg,
            })
        })
        .collect()
}

/// Warnings a run should carry in its report.
pub fn warnings(p: &SystemParams, s: &ProtocolSchedule) -> Result<Vec<String>, Failure> {
    let mut out = s.validate(p)?;
    out.extend(raman_model(p)?.warnings);
    Ok(out)
}
