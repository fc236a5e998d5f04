//! The teleportation state machine.
//!
//! Sequence: prepare → interact for `t1 + δt1` → Raman swap on both atoms →
//! wait `τ1` for a click → purge for `τ2` with no click → remap pulses →
//! second interaction/detection window → classical correction.
//!
//! [`analytic_checkpoints`] follows one branch with the click instants pinned
//! (first click at the end of `τ1`, second after `t2`) and returns the
//! conditional, sub-normalized state after every stage. [`run_analytic`]
//! enumerates the four detector patterns, weighting each by its probability
//! integrated over click times.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::dynamics::Detector;
use crate::dynamics::{solve_t1, ChannelLabel, JumpChannel, NoJumpPropagator, SystemParams};
use crate::hilbert::{
    fidelity, reduce_to_atom2, Atom2Ket, BasisLabel, DensityMatrix, Level, Operator, StateVector,
};
use crate::pulses::{apply_sequence, first_swap, remap_sequence, PulseSpec};
use crate::quad::composite_gauss_legendre;
use crate::{Error, Result, EPS_NUM};

/// Unknown state `c_f|f⟩ + c_g|g⟩` of atom 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputState {
    c_f: C64,
    c_g: C64,
}

impl InputState {
    pub fn new(c_f: C64, c_g: C64) -> Result<Self> {
        let n = c_f.norm_sqr() + c_g.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > EPS_NUM {
            return Err(Error::Unnormalized(n));
        }
        Ok(Self { c_f, c_g })
    }

    /// `(|f⟩ + |g⟩)/√2`.
    pub fn balanced() -> Self {
        Self { c_f: C64::from(FRAC_1_SQRT_2), c_g: C64::from(FRAC_1_SQRT_2) }
    }

    /// Real amplitudes with `c_g` given and `c_f = √(1 − c_g²)`.
    pub fn from_real_cg(c_g: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&c_g) {
            return Err(Error::InvalidParameter(format!("|c_g| must not exceed 1, got {c_g}")));
        }
        Self::new(C64::from((1.0 - c_g * c_g).sqrt()), C64::from(c_g))
    }

    /// Haar-random qubit state.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u: f64 = rng.random();
        let theta = u.sqrt().asin();
        let phi_f = 2.0 * PI * rng.random::<f64>();
        let phi_g = 2.0 * PI * rng.random::<f64>();
        Self {
            c_f: C64::from_polar(theta.cos(), phi_f),
            c_g: C64::from_polar(theta.sin(), phi_g),
        }
    }

    pub fn c_f(&self) -> C64 {
        self.c_f
    }

    pub fn c_g(&self) -> C64 {
        self.c_g
    }

    /// The input relabeled on atom 2: `c_f|f2⟩ + c_g|g2⟩`.
    pub fn target(&self) -> Atom2Ket {
        Atom2Ket::new(self.c_f, self.c_g, C64::new(0.0, 0.0))
    }
}

/// Protocol times, μs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    /// First interaction time (nominal).
    pub t1: f64,
    /// Timing error added to `t1`.
    pub dt1: f64,
    /// First detection window.
    pub tau1: f64,
    /// Purge window, during which no click may occur.
    pub tau2: f64,
    /// Second interaction time at which the second click is pinned in the
    /// analytic branch.
    pub t2: f64,
    /// Second detection window.
    pub t_d: f64,
}

/// `exp(−κτ2/2)` above this only warns.
pub const PURGE_WARN: f64 = 0.01;
/// `exp(−κτ2/2)` above this is an error for the analytic pipeline.
pub const PURGE_ERROR: f64 = 0.1;

impl ProtocolSchedule {
    /// `t1` from [`solve_t1`], `τ1 = 2/κ`, `τ2 = 20/κ`, `t_d = 20/(κ+Γ)`,
    /// `t2 = t1`, no timing error. Windows are infinite when the relevant
    /// rate vanishes.
    pub fn default_for(params: &SystemParams) -> Self {
        let t1 = solve_t1(params);
        let k = params.kappa();
        let kg = params.kappa() + params.gamma();
        let per = |n: f64, rate: f64| if rate > 0.0 { n / rate } else { f64::INFINITY };
        Self { t1, dt1: 0.0, tau1: per(2.0, k), tau2: per(20.0, k), t2: t1, t_d: per(20.0, kg) }
    }

    pub fn with_dt1_frac(mut self, frac: f64) -> Self {
        self.dt1 = frac * self.t1;
        self
    }

    /// Actual first interaction time `t1 + δt1`.
    pub fn interaction_time(&self) -> f64 {
        self.t1 + self.dt1
    }

    pub fn purge_residual(&self, params: &SystemParams) -> f64 {
        if params.kappa() == 0.0 {
            1.0
        } else {
            (-params.kappa() * self.tau2 / 2.0).exp()
        }
    }

    /// Checks signs and returns warnings (currently only a weak purge).
    pub fn validate(&self, params: &SystemParams) -> Result<Vec<String>> {
        let named = [
            ("t1", self.t1),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("t2", self.t2),
            ("t_d", self.t_d),
        ];
        for (name, v) in named {
            if v.is_nan() || v < 0.0 {
                return Err(Error::InvalidSchedule(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.dt1.is_nan() || self.interaction_time() < 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "t1 + dt1 must be nonnegative, got {}",
                self.interaction_time()
            )));
        }
        let mut warnings = Vec::new();
        let residual = self.purge_residual(params);
        if residual > PURGE_WARN {
            let w = format!("purge window too short: exp(-κτ2/2) = {residual:.3e} > {PURGE_WARN}");
            log::warn!("{w}");
            warnings.push(w);
        }
        Ok(warnings)
    }

    /// Validation for pipelines that propagate through every window.
    fn require_finite(&self) -> Result<()> {
        let all = [self.interaction_time(), self.tau1, self.tau2, self.t2, self.t_d];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSchedule(
                "all windows must be finite (set them explicitly when κ or κ+Γ is zero)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cycle {
    First,
    Second,
}

/// A recorded detector click. `time` is on the protocol clock (μs since
/// preparation).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub detector: Detector,
    pub time: f64,
    pub cycle: Cycle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClickPattern {
    SameDetector,
    DifferentDetector,
}

impl ClickPattern {
    pub fn from_detectors(first: Detector, second: Detector) -> Self {
        if first == second {
            ClickPattern::SameDetector
        } else {
            ClickPattern::DifferentDetector
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeStatus {
    Success,
    Discarded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolOutcome {
    pub status: OutcomeStatus,
    pub pattern: Option<ClickPattern>,
    /// Detectors of the first and second click, for successful runs.
    pub detectors: Option<(Detector, Detector)>,
    /// Atom-2 state after correction (trace one). `None` for the aggregate
    /// discarded outcome of [`run_analytic`].
    pub final_atom2: Option<DensityMatrix>,
    pub weight: f64,
    /// Fidelity of `final_atom2` against the input relabeled on atom 2;
    /// zero when there is no final state.
    pub fidelity: f64,
}

/// Stages of the pipeline, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Prepared,
    /// After the first interaction `t1 + δt1`.
    Interaction,
    /// After the Raman swap on both atoms.
    Swapped,
    /// After waiting `τ1` and the first click.
    FirstClick,
    /// After the purge window, before discarding leftover photons.
    PurgeWait,
    /// Leftover photons and excitations dropped.
    Purged,
    Remapped,
    /// After the second interaction `t2` without detection.
    SecondInteraction,
    SecondClick,
    /// Normalized and corrected.
    Corrected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub stage: Stage,
    pub state: StateVector,
}

/// Detector choice for each cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub first: Detector,
    pub second: Detector,
}

impl Branch {
    pub fn new(first: Detector, second: Detector) -> Self {
        Self { first, second }
    }

    pub fn all() -> [Branch; 4] {
        use Detector::*;
        [Branch::new(Plus, Plus), Branch::new(Plus, Minus), Branch::new(Minus, Plus), Branch::new(Minus, Minus)]
    }

    pub fn pattern(&self) -> ClickPattern {
        ClickPattern::from_detectors(self.first, self.second)
    }
}

/// `(c_f|f1⟩ + c_g|e1⟩)|0⟩ ⊗ (|e2⟩ + |f2⟩)|0⟩/√2`: atom 1 already excited
/// from `g` to `e`.
pub fn prepare(input: &InputState) -> StateVector {
    let s = C64::from(FRAC_1_SQRT_2);
    let atom1 = [(Level::F, input.c_f), (Level::E, input.c_g)];
    let atom2 = [(Level::E, s), (Level::F, s)];
    let mut psi = StateVector::zeros();
    for (l1, a1) in atom1 {
        for (l2, a2) in atom2 {
            psi.set_amplitude(BasisLabel::new(l1, 0, l2, 0), a1 * a2);
        }
    }
    psi
}

/// The correction applied on success: none for the same detector, a sign
/// flip of `|f2⟩` for different detectors. `None` means a discarded run.
pub fn classical_correction(pattern: Option<ClickPattern>) -> Result<Option<PulseSpec>> {
    match pattern {
        None => Err(Error::NotSuccess),
        Some(ClickPattern::SameDetector) => Ok(None),
        Some(ClickPattern::DifferentDetector) => Ok(Some(PulseSpec::phase_fix_f2())),
    }
}

fn bare_jump(params: &SystemParams, detector: Detector) -> Operator {
    JumpChannel::new(ChannelLabel::for_detector(detector), params).bare
}

fn check_purge(params: &SystemParams, schedule: &ProtocolSchedule) -> Result<()> {
    // Without cavity loss nothing can leak during the purge; the branch then
    // relies on the projection alone (the lossless limit).
    if params.kappa() == 0.0 {
        return Ok(());
    }
    let residual = schedule.purge_residual(params);
    if residual > PURGE_ERROR {
        return Err(Error::InsufficientPurge(residual));
    }
    Ok(())
}

/// Conditional states along one branch with pinned click times. Jumps use
/// the bare `(a1 ± a2)/√2`, so squared norms never increase along the list.
/// The last entry is normalized and corrected.
pub fn analytic_checkpoints(
    params: &SystemParams,
    schedule: &ProtocolSchedule,
    input: &InputState,
    branch: Branch,
) -> Result<Vec<Checkpoint>> {
    schedule.validate(params)?;
    schedule.require_finite()?;
    check_purge(params, schedule)?;

    let mut out = Vec::with_capacity(10);
    let mut psi = prepare(input);
    out.push(Checkpoint { stage: Stage::Prepared, state: psi.clone() });

    NoJumpPropagator::new(params, schedule.interaction_time())?.apply_in_place(&mut psi);
    out.push(Checkpoint { stage: Stage::Interaction, state: psi.clone() });

    apply_sequence(&first_swap(), &mut psi);
    out.push(Checkpoint { stage: Stage::Swapped, state: psi.clone() });

    NoJumpPropagator::new(params, schedule.tau1)?.apply_in_place(&mut psi);
    psi = bare_jump(params, branch.first).apply(&psi);
    out.push(Checkpoint { stage: Stage::FirstClick, state: psi.clone() });

    NoJumpPropagator::new(params, schedule.tau2)?.apply_in_place(&mut psi);
    out.push(Checkpoint { stage: Stage::PurgeWait, state: psi.clone() });

    psi = Operator::frozen_projector().apply(&psi);
    out.push(Checkpoint { stage: Stage::Purged, state: psi.clone() });

    apply_sequence(&remap_sequence(), &mut psi);
    out.push(Checkpoint { stage: Stage::Remapped, state: psi.clone() });

    NoJumpPropagator::new(params, schedule.t2)?.apply_in_place(&mut psi);
    out.push(Checkpoint { stage: Stage::SecondInteraction, state: psi.clone() });

    psi = bare_jump(params, branch.second).apply(&psi);
    out.push(Checkpoint { stage: Stage::SecondClick, state: psi.clone() });

    let mut corrected = psi.normalized().ok_or_else(|| {
        Error::Unreachable(format!("branch {branch:?} has zero amplitude"))
    })?;
    if let Some(fix) = classical_correction(Some(branch.pattern()))? {
        fix.apply_in_place(&mut corrected);
    }
    out.push(Checkpoint { stage: Stage::Corrected, state: corrected });
    Ok(out)
}

/// Probability (with unit detector efficiency) of each detector pattern,
/// indexed `[first][second]` with `Plus = 0`. Counts runs with exactly two
/// detector jumps, the first in `(0, τ1]` and the second in `(0, t_d]`, and
/// no other jump from preparation to the end of the second window.
pub fn pattern_probabilities(
    params: &SystemParams,
    schedule: &ProtocolSchedule,
    input: &InputState,
) -> Result<[[f64; 2]; 2]> {
    schedule.validate(params)?;
    schedule.require_finite()?;

    let beta = params.beta();
    let piece = PI / (4.0 * beta);
    let channels = Detector::BOTH.map(|d| JumpChannel::new(ChannelLabel::for_detector(d), params));
    let purge = NoJumpPropagator::new(params, schedule.tau2)?;

    let mut start = prepare(input);
    NoJumpPropagator::new(params, schedule.interaction_time())?.apply_in_place(&mut start);
    apply_sequence(&first_swap(), &mut start);

    // States entering the second window, one per first-click node.
    let first_nodes = composite_gauss_legendre(0.0, schedule.tau1, piece);
    let mut entering: [Vec<(f64, StateVector)>; 2] = [Vec::new(), Vec::new()];
    for (k, ch) in channels.iter().enumerate() {
        for &(t, w) in &first_nodes {
            let mut psi = NoJumpPropagator::new(params, t)?.apply(&start);
            psi = ch.apply(&psi);
            NoJumpPropagator::new(params, schedule.tau1 - t)?.apply_in_place(&mut psi);
            purge.apply_in_place(&mut psi);
            apply_sequence(&remap_sequence(), &mut psi);
            entering[k].push((w, psi));
        }
    }

    // Support of everything entering the second window.
    let support: Vec<usize> = (0..crate::hilbert::DIM)
        .filter(|&i| {
            entering.iter().flatten().any(|(_, psi)| psi.amplitudes()[i].norm_sqr() > 0.0)
        })
        .collect();

    let second_nodes = composite_gauss_legendre(0.0, schedule.t_d, piece);
    let mut probs = [[0.0; 2]; 2];
    for (k2, ch) in channels.iter().enumerate() {
        // Gram matrix of the second-window map restricted to `support`.
        let n = support.len();
        let mut gram = vec![C64::new(0.0, 0.0); n * n];
        let mut cols: Vec<StateVector> = Vec::with_capacity(n);
        for &(t, w) in &second_nodes {
            let before = NoJumpPropagator::new(params, t)?;
            let after = NoJumpPropagator::new(params, schedule.t_d - t)?;
            cols.clear();
            for &i in &support {
                let mut col = before.apply(&StateVector::basis(BasisLabel::from_index(i).unwrap()));
                col = ch.apply(&col);
                after.apply_in_place(&mut col);
                cols.push(col);
            }
            for a in 0..n {
                for b in a..n {
                    let v = crate::hilbert::inner(&cols[a], &cols[b]) * w;
                    gram[a * n + b] += v;
                    if a != b {
                        gram[b * n + a] += v.conj();
                    }
                }
            }
        }
        for (k1, list) in entering.iter().enumerate() {
            let mut total = 0.0;
            for (w, psi) in list {
                let amps = psi.amplitudes();
                let mut q = C64::new(0.0, 0.0);
                for a in 0..n {
                    let xa = amps[support[a]].conj();
                    for b in 0..n {
                        q += xa * gram[a * n + b] * amps[support[b]];
                    }
                }
                total += w * q.re;
            }
            probs[k1][k2] = total;
        }
    }
    Ok(probs)
}

fn detector_index(d: Detector) -> usize {
    match d {
        Detector::Plus => 0,
        Detector::Minus => 1,
    }
}

/// All four success patterns (post-correction atom-2 state, fidelity and
/// probability including `η²`), followed by the discarded remainder.
pub fn run_analytic(
    params: &SystemParams,
    schedule: &ProtocolSchedule,
    input: &InputState,
) -> Result<Vec<ProtocolOutcome>> {
    let probs = pattern_probabilities(params, schedule, input)?;
    let eta_sq = params.eta() * params.eta();
    let target = input.target();
    let mut outcomes = Vec::with_capacity(5);
    let mut total = 0.0;
    for branch in Branch::all() {
        let checkpoints = analytic_checkpoints(params, schedule, input, branch)?;
        let last = &checkpoints.last().expect("pipeline is nonempty").state;
        let rho = reduce_to_atom2(last)?.normalized()?;
        let f = fidelity(&target, &rho)?;
        let weight = eta_sq * probs[detector_index(branch.first)][detector_index(branch.second)];
        total += weight;
        outcomes.push(ProtocolOutcome {
            status: OutcomeStatus::Success,
            pattern: Some(branch.pattern()),
            detectors: Some((branch.first, branch.second)),
            final_atom2: Some(rho),
            weight,
            fidelity: f,
        });
    }
    outcomes.push(ProtocolOutcome {
        status: OutcomeStatus::Discarded,
        pattern: None,
        detectors: None,
        final_atom2: None,
        weight: (1.0 - total).max(0.0),
        fidelity: 0.0,
    });
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Level::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ket(a1: Level, n1: u8, a2: Level, n2: u8) -> StateVector {
        StateVector::basis(BasisLabel::new(a1, n1, a2, n2))
    }

    #[test]
    fn prepare_basis_input() {
        let input = InputState::new(C64::from(1.0), C64::from(0.0)).unwrap();
        let psi = prepare(&input);
        let s = C64::from(FRAC_1_SQRT_2);
        let expected = ket(F, 0, E, 0).scaled(s) + ket(F, 0, F, 0).scaled(s);
        assert!((psi - expected).norm_sqr() < 1e-30);
    }

    #[test]
    fn prepare_balanced_input() {
        let psi = prepare(&InputState::balanced());
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-15);
        for (a1, a2) in [(F, F), (F, E), (E, F), (E, E)] {
            assert!((psi.amplitude(BasisLabel::new(a1, 0, a2, 0)).norm() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn prepare_excited_weight_matches_cg() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let input = InputState::random(&mut rng);
            let psi = prepare(&input);
            let w = psi.weight_where(|l| l.atom1 == E);
            assert!((w - input.c_g().norm_sqr()).abs() < 1e-14);
        }
    }

    #[test]
    fn unnormalized_input_rejected() {
        assert!(matches!(
            InputState::new(C64::from(1.0), C64::from(0.1)),
            Err(Error::Unnormalized(_))
        ));
    }

    #[test]
    fn correction_rule() {
        assert_eq!(classical_correction(Some(ClickPattern::SameDetector)), Ok(None));
        assert_eq!(
            classical_correction(Some(ClickPattern::DifferentDetector)),
            Ok(Some(PulseSpec::phase_fix_f2()))
        );
        assert_eq!(classical_correction(None), Err(Error::NotSuccess));
        assert_eq!(
            ClickPattern::from_detectors(Detector::Plus, Detector::Minus),
            ClickPattern::DifferentDetector
        );
    }

    #[test]
    fn default_schedule_scales_with_kappa() {
        let p = SystemParams::cesium();
        let s = ProtocolSchedule::default_for(&p);
        assert!((s.tau1 - 2.0 / p.kappa()).abs() < 1e-15);
        assert!((s.tau2 - 20.0 / p.kappa()).abs() < 1e-15);
        assert!((s.t_d - 20.0 / (p.kappa() + p.gamma())).abs() < 1e-15);
        assert_eq!(s.t2, s.t1);
        assert!(s.validate(&p).unwrap().is_empty());
    }

    #[test]
    fn weak_purge_warns_then_fails() {
        let p = SystemParams::cesium();
        let mut s = ProtocolSchedule::default_for(&p);
        s.tau2 = 6.0 / p.kappa(); // e^{-3} ≈ 0.05
        assert_eq!(s.validate(&p).unwrap().len(), 1);
        assert!(analytic_checkpoints(&p, &s, &InputState::balanced(), Branch::all()[0]).is_ok());
        s.tau2 = 2.0 / p.kappa(); // e^{-1} ≈ 0.37
        assert!(matches!(
            analytic_checkpoints(&p, &s, &InputState::balanced(), Branch::all()[0]),
            Err(Error::InsufficientPurge(_))
        ));
    }

    #[test]
    fn negative_window_rejected() {
        let p = SystemParams::cesium();
        let mut s = ProtocolSchedule::default_for(&p);
        s.tau1 = -1.0;
        assert!(matches!(s.validate(&p), Err(Error::InvalidSchedule(_))));
    }
}
