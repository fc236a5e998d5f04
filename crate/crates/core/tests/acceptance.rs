//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::time::{Duration, Instant};

use cavity_teleport::analysis::{
    fidelity_mistimed, scan_tau1_t2, success_probability, success_with_detector, timing_budget,
};
use cavity_teleport::dynamics::{
    conditional_hamiltonian, no_jump_propagator, solve_t1, Detector, JumpChannel, SystemParams,
};
use cavity_teleport::hilbert::{fidelity, reduce_to_atom2, Operator, StateVector};
use cavity_teleport::par::Execution;
use cavity_teleport::protocol::{analytic_checkpoints, Branch, InputState, ProtocolSchedule};
use cavity_teleport::pulses::raman_model;
use cavity_teleport::trajectory::{checkpoint_compare, default_dt_max, run_ensemble, TrajectoryConfig};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn cs() -> (SystemParams, ProtocolSchedule) {
    let p = SystemParams::cesium();
    (p, ProtocolSchedule::default_for(&p))
}

fn random_inputs(seed: u64, n: usize) -> Vec<InputState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| InputState::random(&mut rng)).collect()
}

fn t1_reproduction() -> Verdict {
    let p = SystemParams::cesium();
    let mut best = Duration::MAX;
    let mut t1 = 0.0;
    for _ in 0..20 {
        let start = Instant::now();
        t1 = solve_t1(&p);
        best = best.min(start.elapsed());
    }
    let rel = (t1 - 7.4e-3).abs() / 7.4e-3;
    verdict(
        rel < 0.015 && best < Duration::from_millis(1),
        format!("t1 = {t1:.6e} μs (rel. dev. {rel:.2e}), solve time {best:?}"),
    )
}

fn success_probability_check() -> Verdict {
    let (p, s) = cs();
    let long = ProtocolSchedule { t_d: f64::INFINITY, ..s };
    let prob = success_probability(&p, &long).unwrap();
    let with_eta = success_with_detector(&p, &long).unwrap();
    let at_default = success_with_detector(&p, &s).unwrap();
    verdict(
        (prob - 0.428).abs() <= 0.002 && (with_eta - 0.15).abs() <= 0.01 && (at_default - 0.15).abs() <= 0.01,
        format!("P = {prob:.5}, P' = {with_eta:.5} (t_d → ∞), P' = {at_default:.5} at t_d = 20/(κ+Γ)"),
    )
}

fn raman_leakage() -> Verdict {
    let r = raman_model(&SystemParams::cesium()).unwrap();
    verdict((r.leakage - 2.74e-3).abs() <= 1e-5, format!("leakage = {:.6e}", r.leakage))
}

fn timing_budget_check() -> Verdict {
    let (p, s) = cs();
    let b = timing_budget(&p, &s, true).unwrap();
    verdict((b.total - 1.35).abs() <= 0.05 * 1.35, format!("total = {:.4} μs", b.total))
}

fn exact_timing_fidelity() -> Verdict {
    let (p, s) = cs();
    let mut worst: f64 = 0.0;
    for input in random_inputs(100, 100) {
        for branch in Detector::BOTH {
            let (f, _) = fidelity_mistimed(&p, &s, &input, branch).unwrap();
            worst = worst.max((f - 1.0).abs());
        }
        for branch in Branch::all() {
            let cps = analytic_checkpoints(&p, &s, &input, branch).unwrap();
            let rho = reduce_to_atom2(&cps.last().unwrap().state).unwrap();
            worst = worst.max((fidelity(&input.target(), &rho).unwrap() - 1.0).abs());
        }
    }
    verdict(worst <= 1e-12, format!("max |F − 1| = {worst:.2e} over 100 inputs, both branches"))
}

fn mistimed_fidelity() -> Verdict {
    let (p, s) = cs();
    let s = s.with_dt1_frac(0.05);
    let input = InputState::balanced();
    let (minus, _) = fidelity_mistimed(&p, &s, &input, Detector::Minus).unwrap();
    let (plus_default, _) = fidelity_mistimed(&p, &s, &input, Detector::Plus).unwrap();
    let k = p.kappa();
    let scan = scan_tau1_t2(&p, &s, &input, (1.0 / k, 3.0 / k), (0.5 * s.t1, 2.0 * s.t1), 41).unwrap();
    let in_band = scan.iter().filter(|x| (0.99..=1.0).contains(&x.f_plus)).count();
    let best = scan.iter().map(|x| x.f_plus).fold(0.0, f64::max);
    let worst = scan.iter().map(|x| x.f_plus).fold(1.0, f64::min);
    let above = scan.iter().filter(|x| x.f_plus >= 0.998).count();
    verdict(
        (minus - 1.0).abs() <= 1e-12 && in_band > 0 && (0.998..=1.0).contains(&best),
        format!(
            "F(−) = {minus:.15}; F(+) at default schedule = {plus_default:.6}; scan 41×41: F(+) ∈ [{worst:.6}, {best:.6}], \
             {in_band}/{} points in [0.99, 1], {above} points ≥ 0.998",
            scan.len()
        ),
    )
}

fn checkpoint_equivalence() -> Verdict {
    let (p, s) = cs();
    let start = Instant::now();
    let mut worst: f64 = 1.0;
    for seed in 0..20u64 {
        let input = InputState::random(&mut ChaCha8Rng::seed_from_u64(seed));
        for c in checkpoint_compare(&p, &s, &input, default_dt_max(&p)).unwrap() {
            worst = worst.min(c.fidelity);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst >= 1.0 - 1e-8 && elapsed < Duration::from_secs(10),
        format!("min stage fidelity = {worst:.12} over 20 inputs, {elapsed:?}"),
    )
}

struct Pooled {
    n: u64,
    success: u64,
    worst_infidelity: f64,
    mean_fidelity_sum: f64,
}

fn pooled_run(p: &SystemParams, s: &ProtocolSchedule, inputs: &[InputState], n_traj: u64, seed: u64) -> Pooled {
    let mut out = Pooled { n: 0, success: 0, worst_infidelity: 0.0, mean_fidelity_sum: 0.0 };
    for (i, input) in inputs.iter().enumerate() {
        let cfg = TrajectoryConfig::new(p, seed + i as u64, n_traj);
        let r = run_ensemble(p, s, input, &cfg).unwrap();
        out.n += r.n_traj;
        out.success += r.n_success;
        if let (Some(m), Some(f)) = (r.mean_success_fidelity, r.min_success_fidelity) {
            out.mean_fidelity_sum += m.mean * r.n_success as f64;
            out.worst_infidelity = out.worst_infidelity.max(1.0 - f);
        }
    }
    out
}

fn state_independence() -> Verdict {
    let (p, s) = cs();
    let inputs = random_inputs(8, 10);
    let full = pooled_run(&p.with_eta(1.0).unwrap(), &s, &inputs, 10_000, 1000);
    let part = pooled_run(&p.with_eta(0.6).unwrap(), &s, &inputs, 10_000, 1000);
    let rate = |x: &Pooled| x.success as f64 / x.n as f64;
    let (r1, r6) = (rate(&full), rate(&part));
    let ratio = r6 / r1;
    let rel = |x: &Pooled| (rate(x) * (1.0 - rate(x)) / x.n as f64).sqrt() / rate(x);
    let sigma = ratio * (rel(&full).powi(2) + rel(&part).powi(2)).sqrt();
    let mean1 = full.mean_fidelity_sum / full.success as f64;
    let mean6 = part.mean_fidelity_sum / part.success as f64;
    let worst = full.worst_infidelity.max(part.worst_infidelity);
    let residual = s.purge_residual(&p);
    verdict(
        worst <= 1e-9 && (ratio - 0.36).abs() <= 3.0 * sigma && (mean1 - mean6).abs() <= 1e-9,
        format!(
            "worst success infidelity = {worst:.3e} (η=1: {:.3e}, η=0.6: {:.3e}); mean F: {mean1:.12} vs {mean6:.12}; \
             rate ratio = {ratio:.4} ± {sigma:.4} (η² = 0.36); purge residual e^(-κτ2/2) = {residual:.2e}",
            full.worst_infidelity, part.worst_infidelity
        ),
    )
}

fn physics_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut unitary, mut norm_ok, mut complete, mut semigroup) = (0.0f64, true, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let g = rng.random_range(5.0..300.0);
        let lossless = SystemParams::new(g, 0.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let t = rng.random_range(0.0..0.2);
        let u = no_jump_propagator(&lossless, t).unwrap();
        unitary = unitary.max(u.adjoint().compose(&u).max_abs_diff(&Operator::identity()));

        let p = SystemParams::new(g, rng.random_range(0.0..2.0) * g, rng.random_range(0.0..2.0) * g, 1.0, 1.0, 1.0)
            .unwrap();
        let psi = StateVector::from_fn(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .normalized()
            .unwrap();
        let (a, b) = (rng.random_range(0.0..0.05), rng.random_range(0.0..0.05));
        let ua = no_jump_propagator(&p, a).unwrap();
        let ub = no_jump_propagator(&p, b).unwrap();
        let n1 = ua.apply(&psi).norm_sqr();
        let n2 = ub.apply(&ua.apply(&psi)).norm_sqr();
        norm_ok &= n1 <= 1.0 + 1e-12 && n2 <= n1 + 1e-12;
        semigroup = semigroup.max(ub.compose(&ua).max_abs_diff(&no_jump_propagator(&p, a + b).unwrap()));

        let h = conditional_hamiltonian(&p);
        let loss = (&h - &h.adjoint()).scaled(C64::new(0.0, 1.0));
        let mut sum = Operator::zeros();
        for c in JumpChannel::all(&p) {
            sum = &sum + &c.collapse.adjoint().compose(&c.collapse);
        }
        complete = complete.max(sum.max_abs_diff(&loss) / (p.kappa() + p.gamma() + 1.0));
    }
    verdict(
        unitary <= 1e-10 && norm_ok && complete <= 1e-14 && semigroup <= 1e-9,
        format!(
            "200 random sets: unitarity dev {unitary:.1e}, norm non-increasing {norm_ok}, \
             completeness dev {complete:.1e} (relative), semigroup dev {semigroup:.1e}"
        ),
    )
}

fn determinism() -> Verdict {
    let (p, s) = cs();
    let input = InputState::balanced();
    let cfg = TrajectoryConfig::new(&p, 42, 2000);
    let reference = run_ensemble(&p, &s, &input, &cfg.with_execution(Execution::Sequential)).unwrap();
    let mut same = run_ensemble(&p, &s, &input, &cfg.with_execution(Execution::Sequential)).unwrap() == reference;
    for threads in [1, 2, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let r = pool.install(|| run_ensemble(&p, &s, &input, &cfg.with_execution(Execution::Parallel)).unwrap());
        same &= r == reference;
    }
    verdict(same, "sequential, repeated, and 1/2/3/8-thread runs are bit-identical")
}

/// The closed-form success probability against the empirical rate with
/// ideal detectors. Reported, not asserted.
fn formula_vs_empirical() {
    let (p, s) = cs();
    let p = p.with_eta(1.0).unwrap();
    let cfg = TrajectoryConfig::new(&p, 7, 40_000);
    let r = run_ensemble(&p, &s, &InputState::balanced(), &cfg).unwrap();
    let formula = success_probability(&p, &s).unwrap();
    let rel = (r.success_rate.mean - formula) / formula;
    let branching = r.second_window_cavity_fraction.unwrap_or(f64::NAN);
    let first_leak = 1.0 - (-p.kappa() * s.tau1).exp();
    let line = format!(
        "empirical success rate (η=1) = {:.4} ± {:.4}, closed form = {formula:.4}, relative difference {:+.1}%; \
         measured second-window cavity branching fraction = {branching:.4} (κ/(κ+Γ) = {:.4}); \
         closed form × first-window leak probability {first_leak:.4} × measured branching = {:.4}",
        r.success_rate.mean,
        r.success_rate.std_err,
        100.0 * rel,
        p.kappa() / (p.kappa() + p.gamma()),
        formula * first_leak * branching
    );
    if rel.abs() > 0.10 {
        println!("NOTE  formula vs trajectories: {line}");
    } else {
        println!("info  formula vs trajectories: {line}");
    }
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("t1 reproduction", t1_reproduction),
        ("success probability", success_probability_check),
        ("Raman leakage", raman_leakage),
        ("timing budget", timing_budget_check),
        ("exact-timing fidelity", exact_timing_fidelity),
        ("mistimed fidelity", mistimed_fidelity),
        ("checkpoint equivalence", checkpoint_equivalence),
        ("state independence", state_independence),
        ("physics invariants", physics_invariants),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    formula_vs_empirical();
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

