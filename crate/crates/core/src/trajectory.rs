//! Quantum-jump Monte-Carlo unraveling of the whole protocol.
//!
//! Each stage evolves with the no-jump propagator until the squared norm
//! falls to a uniform draw `r`, then applies one collapse operator chosen in
//! proportion to `‖C_k ψ‖²`. Photons reaching a detector port are recorded
//! with probability `η`; free-space emission is never recorded. The
//! protocol logic sees only the records.
//!
//! Stage clock: the first interaction starts at 0 with the detectors gated
//! off, the first window opens right after the swap, and the second window
//! opens right after the remapping pulses. The random second-click instant
//! plays the role of the second interaction time.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ChannelLabel, Detector, JumpChannel, NoJumpPropagator, SystemParams};
use crate::hilbert::{fidelity, reduce_to_atom2, StateVector};
use crate::par::{map_indexed, Execution};
use crate::protocol::{
    analytic_checkpoints, classical_correction, prepare, Branch, Checkpoint, ClickPattern,
    ClickRecord, Cycle, InputState, OutcomeStatus, ProtocolOutcome, ProtocolSchedule, Stage,
};
use crate::pulses::{apply_sequence, first_swap, remap_sequence};
use crate::{Error, Result};

/// Resolution of the jump instant, μs.
pub const JUMP_TIME_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub seed: u64,
    pub n_traj: u64,
    /// Bracket width for locating jump instants, μs.
    pub dt_max: f64,
    /// Keep the normalized state at the end of every stage.
    pub record_checkpoints: bool,
    pub execution: Execution,
}

impl TrajectoryConfig {
    /// `dt_max = min(0.1/κ, 0.1/β)`.
    pub fn new(params: &SystemParams, seed: u64, n_traj: u64) -> Self {
        Self {
            seed,
            n_traj,
            dt_max: default_dt_max(params),
            record_checkpoints: false,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        Ok(())
    }
}

pub fn default_dt_max(params: &SystemParams) -> f64 {
    let by_beta = 0.1 / params.beta();
    if params.kappa() > 0.0 {
        by_beta.min(0.1 / params.kappa())
    } else {
        by_beta
    }
}

/// Generator for trajectory `index` of an ensemble with the given seed.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A jump, whether or not anyone saw it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub channel: ChannelLabel,
    /// Protocol clock, μs.
    pub time: f64,
    /// Window the jump fell in; `None` during the first interaction.
    pub cycle: Option<Cycle>,
    pub recorded: bool,
}

/// Everything one run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub outcome: ProtocolOutcome,
    pub clicks: Vec<ClickRecord>,
    pub emissions: Vec<EmissionRecord>,
    pub checkpoints: Vec<Checkpoint>,
}

impl Trajectory {
    /// Photons that left through a cavity mirror, recorded or not.
    pub fn cavity_emissions(&self) -> usize {
        self.emissions.iter().filter(|e| e.channel.detector().is_some()).count()
    }

    pub fn spont_emissions(&self) -> usize {
        self.emissions.len() - self.cavity_emissions()
    }
}

/// Smallest time in `(0, horizon]` at which `‖U(t)ψ‖² = r`, or `None` if the
/// norm is still above `r` at the horizon. The norm is nonincreasing, so the
/// bracket of width `dt_max` holding the crossing is found by binary search
/// over bracket ends and then bisected to [`JUMP_TIME_TOLERANCE`].
pub fn locate_jump(
    params: &SystemParams,
    psi: &StateVector,
    horizon: f64,
    r: f64,
    dt_max: f64,
) -> Result<Option<f64>> {
    let norm_at = |t: f64| -> Result<f64> { Ok(NoJumpPropagator::new(params, t)?.apply(psi).norm_sqr()) };
    if horizon <= 0.0 || norm_at(horizon)? > r {
        return Ok(None);
    }
    let n_brackets = (horizon / dt_max).ceil().max(1.0) as u64;
    let end = |k: u64| if k >= n_brackets { horizon } else { k as f64 * dt_max };
    // first bracket end with norm ≤ r
    let (mut lo_k, mut hi_k) = (0u64, n_brackets);
    while hi_k - lo_k > 1 {
        let mid = (lo_k + hi_k) / 2;
        if norm_at(end(mid))? > r {
            lo_k = mid;
        } else {
            hi_k = mid;
        }
    }
    let (mut lo, mut hi) = (end(lo_k), end(hi_k));
    while hi - lo > JUMP_TIME_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm_at(mid)? > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(hi))
}

struct Sampler<'a, R> {
    params: &'a SystemParams,
    channels: [JumpChannel; 4],
    dt_max: f64,
    rng: &'a mut R,
    psi: StateVector,
    clicks: Vec<ClickRecord>,
    emissions: Vec<EmissionRecord>,
}

impl<R: Rng> Sampler<'_, R> {
    fn draw_open_unit(&mut self) -> f64 {
        loop {
            let r: f64 = self.rng.random();
            if r > 0.0 {
                return r;
            }
        }
    }

    /// Runs one stage of length `duration` starting at protocol time
    /// `offset`. `cycle` is `None` while the detectors are gated off.
    fn stage(&mut self, duration: f64, offset: f64, cycle: Option<Cycle>) -> Result<()> {
        let mut elapsed = 0.0;
        loop {
            let remaining = duration - elapsed;
            let r = self.draw_open_unit();
            match locate_jump(self.params, &self.psi, remaining, r, self.dt_max)? {
                None => {
                    NoJumpPropagator::new(self.params, remaining.max(0.0))?.apply_in_place(&mut self.psi);
                    self.renormalize()?;
                    return Ok(());
                }
                Some(t) => {
                    NoJumpPropagator::new(self.params, t)?.apply_in_place(&mut self.psi);
                    elapsed += t;
                    let kicked: Vec<StateVector> = self.channels.iter().map(|c| c.apply(&self.psi)).collect();
                    let weights: Vec<f64> = kicked.iter().map(|k| k.norm_sqr()).collect();
                    let total: f64 = weights.iter().sum();
                    if total <= 0.0 {
                        // Norm loss only from truncation; nothing to emit.
                        self.renormalize()?;
                        continue;
                    }
                    let mut pick = self.rng.random::<f64>() * total;
                    let mut chosen = weights.len() - 1;
                    for (k, w) in weights.iter().enumerate() {
                        if *w > 0.0 && pick < *w {
                            chosen = k;
                            break;
                        }
                        pick -= w;
                    }
                    while weights[chosen] <= 0.0 {
                        chosen -= 1;
                    }
                    self.psi = kicked[chosen].clone();
                    self.renormalize()?;
                    let label = self.channels[chosen].label;
                    let time = offset + elapsed;
                    let mut recorded = false;
                    if let Some(detector) = label.detector() {
                        // drawn even while gated so the random stream does not depend on η
                        let seen = self.rng.random::<f64>() < self.params.eta();
                        if let (Some(cycle), true) = (cycle, seen) {
                            self.clicks.push(ClickRecord { detector, time, cycle });
                            recorded = true;
                        }
                    }
                    self.emissions.push(EmissionRecord { channel: label, time, cycle, recorded });
                }
            }
        }
    }

    fn renormalize(&mut self) -> Result<()> {
        let n = self.psi.normalize_in_place();
        if !(n > 0.0) || !self.psi.is_finite() {
            return Err(Error::Unreachable("state vanished during sampling".into()));
        }
        Ok(())
    }
}

/// One quantum-jump run of the protocol.
pub fn sample_trajectory<R: Rng>(
    params: &SystemParams,
    schedule: &ProtocolSchedule,
    input: &InputState,
    dt_max: f64,
    record_checkpoints: bool,
    rng: &mut R,
) -> Result<Trajectory> {
    schedule.validate(params)?;
    let finite = [schedule.interaction_time(), schedule.tau1, schedule.tau2, schedule.t_d];
    if finite.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidSchedule("trajectory windows must be finite".into()));
    }
    let mut s = Sampler {
        params,
        channels: JumpChannel::all(params),
        dt_max,
        rng,
        psi: prepare(input),
        clicks: Vec::new(),
        emissions: Vec::new(),
    };
    let mut checkpoints = Vec::new();
    let mut keep = |stage: Stage, psi: &StateVector| {
        if record_checkpoints {
            checkpoints.push(Checkpoint { stage, state: psi.clone() });
        }
    };
    keep(Stage::Prepared, &s.psi);

    let t1 = schedule.interaction_time();
    s.stage(t1, 0.0, None)?;
    keep(Stage::Interaction, &s.psi);
    apply_sequence(&first_swap(), &mut s.psi);
    keep(Stage::Swapped, &s.psi);

    let mut clock = t1;
    s.stage(schedule.tau1, clock, Some(Cycle::First))?;
    keep(Stage::FirstClick, &s.psi);
    let first_window: Vec<ClickRecord> = s.clicks.clone();
    clock += schedule.tau1;

    let before_purge = s.clicks.len();
    s.stage(schedule.tau2, clock, Some(Cycle::First))?;
    keep(Stage::PurgeWait, &s.psi);
    let purge_clicks = s.clicks.len() - before_purge;
    clock += schedule.tau2;

    apply_sequence(&remap_sequence(), &mut s.psi);
    keep(Stage::Remapped, &s.psi);
    let before_second = s.clicks.len();
    s.stage(schedule.t_d, clock, Some(Cycle::Second))?;
    keep(Stage::SecondClick, &s.psi);
    let second_window: Vec<ClickRecord> = s.clicks[before_second..].to_vec();

    let success = first_window.len() == 1 && purge_clicks == 0 && second_window.len() == 1;
    let outcome = if success {
        let (d1, d2) = (first_window[0].detector, second_window[0].detector);
        let pattern = ClickPattern::from_detectors(d1, d2);
        let mut corrected = s.psi.clone();
        if let Some(fix) = classical_correction(Some(pattern))? {
            fix.apply_in_place(&mut corrected);
        }
        keep(Stage::Corrected, &corrected);
        let rho = reduce_to_atom2(&corrected)?.normalized()?;
        let f = fidelity(&input.target(), &rho)?;
        ProtocolOutcome {
            status: OutcomeStatus::Success,
            pattern: Some(pattern),
            detectors: Some((d1, d2)),
            final_atom2: Some(rho),
            weight: 1.0,
            fidelity: f,
        }
    } else {
        ProtocolOutcome {
            status: OutcomeStatus::Discarded,
            pattern: None,
            detectors: None,
            final_atom2: None,
            weight: 1.0,
            fidelity: 0.0,
        }
    };
    Ok(Trajectory { outcome, clicks: s.clicks, emissions: s.emissions, checkpoints })
}

/// Mean and standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub n_traj: u64,
    pub n_success: u64,
    pub n_discarded: u64,
    pub success_rate: Estimate,
    /// `None` when nothing succeeded.
    pub mean_success_fidelity: Option<Estimate>,
    pub min_success_fidelity: Option<f64>,
    /// Successful runs by detector pair, keyed `"++"`, `"+-"`, `"-+"`, `"--"`.
    pub click_pattern_histogram: BTreeMap<String, u64>,
    pub spont_emission_count: u64,
    pub cavity_emission_count: u64,
    /// Cavity emissions over all emissions.
    pub cavity_branching_fraction: Option<f64>,
    /// Cavity share of the emissions in the second window, where every
    /// excitation starts in `|e⟩`; tends to `κ/(κ+Γ)`.
    pub second_window_cavity_fraction: Option<f64>,
}

pub fn pattern_key(first: Detector, second: Detector) -> String {
    format!("{}{}", first.symbol(), second.symbol())
}

/// Runs `n_traj` independent trajectories; trajectory `i` draws from
/// [`trajectory_rng`]`(seed, i)`, and results are reduced in index order, so
/// the output does not depend on `config.execution`.
pub fn run_ensemble(
    params: &SystemParams,
    schedule: &ProtocolSchedule,
    input: &InputState,
    config: &TrajectoryConfig,
) -> Result<EnsembleResult> {
    config.validate()?;
    schedule.validate(params)?;
    let runs = map_indexed(config.n_traj, config.execution, |i| {
        let mut rng = trajectory_rng(config.seed, i);
        sample_trajectory(params, schedule, input, config.dt_max, false, &mut rng)
    });

    let mut histogram: BTreeMap<String, u64> =
        Branch::all().iter().map(|b| (pattern_key(b.first, b.second), 0)).collect();
    let (mut n_success, mut spont, mut cavity) = (0u64, 0u64, 0u64);
    let (mut second_cavity, mut second_all) = (0u64, 0u64);
    let (mut sum_f, mut sum_f2, mut min_f) = (0.0f64, 0.0f64, f64::INFINITY);
    for run in runs {
        let run = run?;
        spont += run.spont_emissions() as u64;
        cavity += run.cavity_emissions() as u64;
        for e in run.emissions.iter().filter(|e| e.cycle == Some(Cycle::Second)) {
            second_all += 1;
            second_cavity += u64::from(e.channel.detector().is_some());
        }
        if run.outcome.status == OutcomeStatus::Success {
            n_success += 1;
            let f = run.outcome.fidelity;
            sum_f += f;
            sum_f2 += f * f;
            min_f = min_f.min(f);
            if let Some((d1, d2)) = run.outcome.detectors {
                *histogram.entry(pattern_key(d1, d2)).or_default() += 1;
            }
        }
    }
    let n = config.n_traj as f64;
    let p = n_success as f64 / n;
    let mean_success_fidelity = (n_success > 0).then(|| {
        let k = n_success as f64;
        let mean = sum_f / k;
        let var = if n_success > 1 { ((sum_f2 - k * mean * mean) / (k - 1.0)).max(0.0) } else { 0.0 };
        Estimate { mean, std_err: (var / k).sqrt() }
    });
    let emitted = spont + cavity;
    Ok(EnsembleResult {
        n_traj: config.n_traj,
        n_success,
        n_discarded: config.n_traj - n_success,
        success_rate: Estimate { mean: p, std_err: (p * (1.0 - p) / n).sqrt() },
        mean_success_fidelity,
        min_success_fidelity: (n_success > 0).then_some(min_f),
        click_pattern_histogram: histogram,
        spont_emission_count: spont,
        cavity_emission_count: cavity,
        cavity_branching_fraction: (emitted > 0).then(|| cavity as f64 / emitted as f64),
        second_window_cavity_fraction: (second_all > 0).then(|| second_cavity as f64 / second_all as f64),
    })
}

/// Per-stage fidelity between a conditioned trajectory and the analytic
/// branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageComparison {
    pub stage: Stage,
    pub fidelity: f64,
}

/// Stages compared by [`checkpoint_compare`].
pub const COMPARED_STAGES: [Stage; 5] =
    [Stage::Interaction, Stage::FirstClick, Stage::Purged, Stage::SecondInteraction, Stage::Corrected];

/// Replays the analytic event pattern (first click at the end of `τ1` on
/// `D+`, no other emission, second click on `D+` after `t2`) through the
/// trajectory machinery: stepwise evolution in `dt_max` steps with
/// renormalization, rate-weighted collapse operators, and a purge that
/// conditions on silence instead of projecting. Each stage is compared with
/// the normalized analytic checkpoint.
pub fn checkpoint_compare(
    params: &SystemParams,
    schedule: &ProtocolSchedule,
    input: &InputState,
    dt_max: f64,
) -> Result<Vec<StageComparison>> {
    let branch = Branch::new(Detector::Plus, Detector::Plus);
    let analytic = analytic_checkpoints(params, schedule, input, branch)?;
    let reference = |stage: Stage| -> Result<StateVector> {
        let cp = analytic
            .iter()
            .find(|c| c.stage == stage)
            .ok_or_else(|| Error::Unreachable(format!("missing analytic stage {stage:?}")))?;
        cp.state
            .normalized()
            .ok_or_else(|| Error::Unreachable(format!("analytic stage {stage:?} has zero norm")))
    };
    let dplus = JumpChannel::new(ChannelLabel::Dplus, params);

    let step = |psi: &mut StateVector, duration: f64| -> Result<()> {
        let n = (duration / dt_max).ceil().max(1.0) as u64;
        let prop = NoJumpPropagator::new(params, duration / n as f64)?;
        for _ in 0..n {
            prop.apply_in_place(psi);
            if psi.normalize_in_place() <= 0.0 {
                return Err(Error::Unreachable("no-jump branch has zero probability".into()));
            }
        }
        Ok(())
    };
    let click = |psi: &StateVector| -> Result<StateVector> {
        dplus
            .apply(psi)
            .normalized()
            .ok_or_else(|| Error::Unreachable("conditioning click has zero rate".into()))
    };

    let mut out = Vec::with_capacity(COMPARED_STAGES.len());
    let mut compare = |stage: Stage, psi: &StateVector| -> Result<()> {
        let f = reference(stage)?.fidelity_with(psi);
        out.push(StageComparison { stage, fidelity: f });
        Ok(())
    };

    let mut psi = prepare(input);
    step(&mut psi, schedule.interaction_time())?;
    compare(Stage::Interaction, &psi)?;
    apply_sequence(&first_swap(), &mut psi);
    step(&mut psi, schedule.tau1)?;
    psi = click(&psi)?;
    compare(Stage::FirstClick, &psi)?;
    step(&mut psi, schedule.tau2)?;
    compare(Stage::Purged, &psi)?;
    apply_sequence(&remap_sequence(), &mut psi);
    step(&mut psi, schedule.t2)?;
    compare(Stage::SecondInteraction, &psi)?;
    psi = click(&psi)?;
    if let Some(fix) = classical_correction(Some(branch.pattern()))? {
        fix.apply_in_place(&mut psi);
    }
    compare(Stage::Corrected, &psi)?;
    Ok(out)
}
