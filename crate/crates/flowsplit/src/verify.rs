//! Self-checks run by `flowsplit verify`.
//!
//! Every check measures something and compares it with a fixed bound. The
//! measuring functions are public so the test suite can reuse them.

use std::fmt::Write as _;

use flowsplit_core::analytic1d::{
    example_norms, fourier_decompose, oracle_decompose_1d, relative_l2, transfer_ratio, NormCase,
    SeparableScene1D, SpatialProfile,
};
use flowsplit_core::operators::{div3, grad3, surrogate_fields, temporal_primitive, temporal_second_primitive};
use flowsplit_core::regularizer::{optimality_residual_u1, optimality_residual_u2, total_energy};
use flowsplit_core::solver::decompose;
use flowsplit_core::synth::bundled_fixtures;
use flowsplit_core::{FlowComponent, GridSpec, ScalarField3, SolverConfig, VectorField3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flo::{FlowSlice, UNKNOWN};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    /// Run a single named check.
    pub only: Option<String>,
    /// Exponent for the `norms` check; default runs the standard set.
    pub beta: Option<f64>,
}

type CheckFn = fn(&VerifyOptions) -> (bool, String);

const CHECKS: &[(&str, CheckFn)] = &[
    ("primitive", check_primitive),
    ("adjointness", check_adjointness),
    ("surrogate", check_surrogate),
    ("gradient", check_gradient),
    ("fourier-oracle", check_fourier_oracle),
    ("frequency-law", check_frequency_law),
    ("norms", check_norms),
    ("transport-divergence", check_transport_divergence),
    ("solver", check_solver),
    ("flo-roundtrip", check_flo_roundtrip),
];

pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|(n, _)| *n)
}

/// Runs the selected checks in order. `Err` carries an unknown check name.
pub fn run(opts: &VerifyOptions) -> Result<Vec<CheckOutcome>, String> {
    if let Some(name) = &opts.only {
        if !check_names().any(|n| n == name) {
            return Err(name.clone());
        }
    }
    Ok(CHECKS
        .iter()
        .filter(|(n, _)| opts.only.as_deref().is_none_or(|o| o == *n))
        .map(|(name, f)| {
            let (passed, detail) = f(opts);
            CheckOutcome { name, passed, detail }
        })
        .collect())
}

fn random_field(g: GridSpec, rng: &mut ChaCha8Rng, amp: f64) -> ScalarField3 {
    ScalarField3::sample(g, |_, _, _| rng.gen_range(-amp..amp)).expect("finite samples")
}

fn zero_collar(f: &mut ScalarField3) {
    let g = f.grid();
    for t in 0..g.t() {
        for s in 0..g.n() {
            for r in 0..g.m() {
                if r == 0 || s == 0 || t == 0 || r + 1 == g.m() || s + 1 == g.n() || t + 1 == g.t() {
                    f.set(r, s, t, 0.0);
                }
            }
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Largest relative deviation of `(ûû(t+1) - ûû(t))/Δt` from `û(t)`.
pub fn primitive_identity_error(seed: u64) -> f64 {
    let g = GridSpec::new(7, 6, 9).unwrap();
    let u = random_field(g, &mut ChaCha8Rng::seed_from_u64(seed), 1.0);
    let uh = temporal_primitive(&u);
    let uu = temporal_second_primitive(&u);
    let scale = uh.sup_norm();
    let mut worst: f64 = 0.0;
    for t in 0..g.t() - 1 {
        for s in 0..g.n() {
            for r in 0..g.m() {
                let d = (uu.get(r, s, t + 1) - uu.get(r, s, t)) / g.dt();
                worst = worst.max((d - uh.get(r, s, t)).abs() / scale);
            }
        }
    }
    worst
}

/// `|⟨∇₃h, V⟩ + ⟨h, ∇₃·V⟩| / (‖∇₃h‖‖V‖)` for collar-supported random `h`, `V`.
pub fn adjointness_error(seed: u64) -> f64 {
    let g = GridSpec::new(8, 7, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = random_field(g, &mut rng, 1.0);
    zero_collar(&mut h);
    let mut ch = || {
        let mut c = random_field(g, &mut rng, 1.0);
        zero_collar(&mut c);
        c
    };
    let v = VectorField3::new(ch(), ch(), ch()).unwrap();
    let gh = grad3(&h);
    let lhs = gh.inner(&v).unwrap();
    let rhs = -h.inner(&div3(&v)).unwrap();
    (lhs - rhs).abs() / (gh.l2_norm_sq() * v.l2_norm_sq()).sqrt()
}

/// Largest relative gap between `|A₀^{1/2}w - ρ|²` and `(∇f·w + f_t)²`.
pub fn surrogate_identity_error(seed: u64) -> f64 {
    let g = GridSpec::new(8, 8, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_field(g, &mut rng, 0.5).map(|v| v + 0.5);
    let sd = surrogate_fields(&f);
    let mut worst: f64 = 0.0;
    for idx in 0..g.len() {
        let w = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let (a, b) = sd.equiv_sides(idx, w);
        if a.max(b) > 1e-300 {
            worst = worst.max(rel(a, b));
        }
    }
    worst
}

/// Outcome of comparing the optimality residuals with finite differences of
/// the total energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub directions: usize,
    pub worst_u1: f64,
    pub worst_u2: f64,
}

/// Central differences of `F` (step `1e-6`) along random directions on an
/// 8×8×6 grid against `2⟨residual, h⟩`. Directions for `u1` vanish on the
/// boundary collar.
pub fn gradient_check(seed: u64, directions: usize) -> GradientCheck {
    let g = GridSpec::new(8, 8, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_field(g, &mut rng, 0.5).map(|v| v + 0.5);
    let flow = |rng: &mut ChaCha8Rng, amp: f64, collar: bool| {
        let mut c = [random_field(g, rng, amp), random_field(g, rng, amp)];
        if collar {
            c.iter_mut().for_each(zero_collar);
        }
        let [a, b] = c;
        FlowComponent::new(a, b).unwrap()
    };
    let u1 = flow(&mut rng, 1.0, false);
    let u2 = flow(&mut rng, 1.0, false);
    let cfg = SolverConfig {
        alpha1: 0.7,
        alpha2: 0.3,
        eps_nu: 0.2,
        lambda: 0.5,
        ..SolverConfig::default()
    };
    let r1 = optimality_residual_u1(&f, &u1, &u2, &cfg).unwrap();
    let r2 = optimality_residual_u2(&f, &u1, &u2, &cfg).unwrap();
    let step = 1e-6;
    let energy = |a: &FlowComponent, b: &FlowComponent| total_energy(&f, a, b, &cfg).unwrap();
    let mut out = GradientCheck { directions, worst_u1: 0.0, worst_u2: 0.0 };
    for _ in 0..directions {
        let h = flow(&mut rng, 1.0, true);
        let plus = u1.plus(&h.scaled(step)).unwrap();
        let minus = u1.plus(&h.scaled(-step)).unwrap();
        let fd = (energy(&plus, &u2) - energy(&minus, &u2)) / (2.0 * step);
        out.worst_u1 = out.worst_u1.max(rel(fd, 2.0 * r1.inner(&h).unwrap()));

        let h = flow(&mut rng, 1.0, false);
        let plus = u2.plus(&h.scaled(step)).unwrap();
        let minus = u2.plus(&h.scaled(-step)).unwrap();
        let fd = (energy(&u1, &plus) - energy(&u1, &minus)) / (2.0 * step);
        out.worst_u2 = out.worst_u2.max(rel(fd, 2.0 * r2.inner(&h).unwrap()));
    }
    out
}

/// Relative `L²` gap between the truncated Fourier solution and the
/// finite-difference solution of the one-dimensional flicker problem
/// (`f = (1 + x)·g(t)`, two flicker periods, `α = 10`, 48×48 nodes,
/// 32 modes per variable).
pub fn fourier_oracle_discrepancy() -> f64 {
    let scene = SeparableScene1D::flicker(SpatialProfile::Affine { a: 1.0, b: 1.0 }, 2).unwrap();
    let model = fourier_decompose(&scene, 10.0, 32, 32).unwrap();
    let oracle = oracle_decompose_1d(&scene, 10.0, 48, 48).unwrap();
    relative_l2(&model.sample_u1(48, 48), &oracle.u1, 48, 48)
}

/// Strict monotonicity of the transfer ratio over `m, n ≤ 16`, `n ≥ 1`.
pub fn transfer_ratio_monotone(alpha: f64) -> bool {
    let down_n = (0..=16).all(|m| (1..16).all(|n| transfer_ratio(alpha, m, n + 1) < transfer_ratio(alpha, m, n)));
    let down_m = (1..=16).all(|n| (0..16).all(|m| transfer_ratio(alpha, m + 1, n) < transfer_ratio(alpha, m, n)));
    down_n && down_m
}

fn check_primitive(_: &VerifyOptions) -> (bool, String) {
    let e = (0..4).map(primitive_identity_error).fold(0.0, f64::max);
    (e <= 1e-12, format!("max rel error {e:.3e} (bound 1e-12)"))
}

fn check_adjointness(_: &VerifyOptions) -> (bool, String) {
    let e = (0..4).map(adjointness_error).fold(0.0, f64::max);
    (e <= 1e-10, format!("max rel error {e:.3e} (bound 1e-10)"))
}

fn check_surrogate(_: &VerifyOptions) -> (bool, String) {
    let e = (0..4).map(surrogate_identity_error).fold(0.0, f64::max);
    (e <= 1e-10, format!("max rel error {e:.3e} (bound 1e-10)"))
}

fn check_gradient(_: &VerifyOptions) -> (bool, String) {
    let c = gradient_check(17, 24);
    let ok = c.worst_u1 <= 1e-4 && c.worst_u2 <= 1e-4;
    (ok, format!("{} directions, worst rel u1 {:.3e}, u2 {:.3e} (bound 1e-4)", c.directions, c.worst_u1, c.worst_u2))
}

fn check_fourier_oracle(_: &VerifyOptions) -> (bool, String) {
    let d = fourier_oracle_discrepancy();
    (d <= 0.02, format!("relative L2 {d:.4} (bound 0.02)"))
}

fn check_frequency_law(_: &VerifyOptions) -> (bool, String) {
    let mono = transfer_ratio_monotone(1.0);
    let r = transfer_ratio(1.0, 0, 8);
    let want = 1.0 / (1.0 + 4096.0 * std::f64::consts::PI.powi(4));
    let close = rel(r, want) <= 0.01;
    (mono && close, format!("monotone {mono}, ratio(0, 8) = {r:.4e} vs {want:.4e}"))
}

fn check_norms(opts: &VerifyOptions) -> (bool, String) {
    let mut ok = true;
    let mut detail = String::new();
    let mut note = |ok_here: bool, text: String| {
        ok &= ok_here;
        let _ = write!(detail, "{}{text}", if detail.is_empty() { "" } else { "; " });
    };
    let converge = |case, b: f64, levels| match example_norms(case, Some(b), levels) {
        Ok(s) => {
            let e = s.relative_error().unwrap_or(f64::INFINITY);
            (e <= 0.02, format!("{} beta {b}: rel error {e:.4}", case.name()))
        }
        Err(e) => (false, format!("{} beta {b}: {e}", case.name())),
    };
    let diverge = |b: f64| match example_norms(NormCase::Ex2U, Some(b), 4) {
        Ok(s) => (s.strictly_increasing(), format!("ex2_u beta {b}: increasing {}", s.strictly_increasing())),
        Err(e) => (false, format!("ex2_u beta {b}: {e}")),
    };
    match opts.beta {
        Some(b) => {
            let (o, t) = if b > 0.5 { converge(NormCase::Ex2U, b, 3) } else { diverge(b) };
            note(o, t);
            let (o, t) = converge(NormCase::Ex2Uhat, b, 3);
            note(o, t);
        }
        None => {
            let (o, t) = converge(NormCase::Ex2U, 0.75, 3);
            note(o, t);
            for b in [0.25, 0.5, 0.75] {
                let (o, t) = converge(NormCase::Ex2Uhat, b, 3);
                note(o, t);
            }
            let (o, t) = diverge(0.4);
            note(o, t);
        }
    }
    (ok, detail)
}

fn check_transport_divergence(_: &VerifyOptions) -> (bool, String) {
    match example_norms(NormCase::Ex1Uhat, None, 4) {
        Ok(s) => {
            let v: Vec<String> = s.levels.iter().map(|l| format!("{:.4}", l.norm_sq)).collect();
            (s.strictly_increasing(), format!("norms {}", v.join(" < ")))
        }
        Err(e) => (false, e.to_string()),
    }
}

/// Iterations and largest relative energy increase after the second sweep
/// of a default run on `f`.
pub fn solver_behaviour(f: &ScalarField3, cfg: &SolverConfig) -> Result<(usize, f64), flowsplit_core::Error> {
    let res = decompose(f, cfg)?;
    let h = &res.energy_history;
    let uptick = h
        .windows(2)
        .skip(1)
        .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok((res.iterations, uptick))
}

fn check_solver(_: &VerifyOptions) -> (bool, String) {
    let fixtures = match bundled_fixtures() {
        Ok(f) => f,
        Err(e) => return (false, e.to_string()),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for fx in fixtures {
        match solver_behaviour(&fx.field, &SolverConfig::default()) {
            Ok((it, up)) => {
                ok &= it < 100 && up <= 1e-9;
                parts.push(format!("{} {it} it, uptick {up:.1e}", fx.name));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{}: {e}", fx.name));
            }
        }
    }
    (ok, parts.join("; "))
}

/// Number of random slices whose `.flo` encoding does not decode to the same
/// bits.
pub fn flo_round_trip_failures(trials: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..trials {
        let (w, h) = (rng.gen_range(1..24), rng.gen_range(1..24));
        let mut value = || {
            let v = f32::from_bits(rng.gen());
            if v.is_finite() { v } else { UNKNOWN }
        };
        let s = FlowSlice::from_fn(w, h, |_, _| [value(), value()]);
        let same = s
            .to_bytes()
            .and_then(|b| FlowSlice::from_bytes(&b))
            .map(|back| {
                back.width() == w
                    && back.height() == h
                    && s.data().iter().zip(back.data()).all(|(a, b)| a.map(f32::to_bits) == b.map(f32::to_bits))
            })
            .unwrap_or(false);
        failures += usize::from(!same);
    }
    failures
}

fn check_flo_roundtrip(_: &VerifyOptions) -> (bool, String) {
    let n = flo_round_trip_failures(1000, 5);
    (n == 0, format!("{n} of 1000 slices differ"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_check_is_reported() {
        let opts = VerifyOptions { only: Some("nope".into()), beta: None };
        assert_eq!(run(&opts), Err("nope".to_string()));
    }

    #[test]
    fn single_check_runs_alone() {
        let opts = VerifyOptions { only: Some("frequency-law".into()), beta: None };
        let out = run(&opts).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].passed, "{}", out[0].detail);
    }

    #[test]
    fn identities_hold() {
        assert!(primitive_identity_error(1) <= 1e-12);
        assert!(adjointness_error(1) <= 1e-10);
        assert!(surrogate_identity_error(1) <= 1e-10);
    }

    #[test]
    fn adjointness_needs_the_collar() {
        // Without the collar the replicate padding breaks summation by parts.
        let g = GridSpec::new(8, 7, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_field(g, &mut rng, 1.0);
        let v = VectorField3::new(random_field(g, &mut rng, 1.0), random_field(g, &mut rng, 1.0), random_field(g, &mut rng, 1.0)).unwrap();
        let gh = grad3(&h);
        let gap = (gh.inner(&v).unwrap() + h.inner(&div3(&v)).unwrap()).abs() / (gh.l2_norm_sq() * v.l2_norm_sq()).sqrt();
        assert!(gap > 1e-6);
    }
}
