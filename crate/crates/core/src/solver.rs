//! Semi-implicit fixed-point iteration for the decomposition `u = u1 + u2`.
//!
//! One sweep updates the four scalar unknowns in the order `u1₁, u1₂, u2₁, u2₂`.
//! Each update equation is linear in its own new value at every voxel and is
//! solved in closed form, e.g.
//!
//! ```text
//! u1₁' = [u1₁/Δτ + ∇₃·(ν'∇₃u1₁) − (f_x/α1)(f_y(u1₂ + u2₂) + f_t + f_x u2₁)]
//!        / (1/Δτ + f_x²/α1)
//! ```
//!
//! Later equations read the components already updated in the same sweep.
//! The diffusivity `ν'` and both diffusion terms are frozen at the start of a
//! sweep, as is the second primitive `ûû2` feeding the `u2` equations.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{
    DecompositionResult, FlowComponent, ScalarField3, SolverConfig, StopReason,
};
use crate::operators::temporal_second_primitive;
use crate::regularizer::{diffusion_terms, energy_terms, NuParams, SequenceGradient};

/// Current iterate `k` plus the cached derivatives of the input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub k: usize,
    pub u1: FlowComponent,
    pub u2: FlowComponent,
    pub grads: SequenceGradient,
}

impl IterationState {
    /// Zero initialization.
    pub fn new(f: &ScalarField3) -> Self {
        let g = f.grid();
        Self {
            k: 0,
            u1: FlowComponent::zeros(g),
            u2: FlowComponent::zeros(g),
            grads: SequenceGradient::new(f),
        }
    }

    pub fn with_flows(f: &ScalarField3, u1: FlowComponent, u2: FlowComponent) -> Result<Self> {
        if u1.grid() != f.grid() || u2.grid() != f.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            k: 0,
            u1,
            u2,
            grads: SequenceGradient::new(f),
        })
    }
}

/// Which equations a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Components {
    Both,
    /// `u2` stays at zero: the single-component spatio-temporal model.
    SmoothOnly,
}

/// One `k → k+1` step of the decomposition iteration.
pub fn sweep(state: &IterationState, cfg: &SolverConfig) -> Result<IterationState> {
    sweep_with(state, cfg, Components::Both)
}

pub(crate) fn sweep_with(
    state: &IterationState,
    cfg: &SolverConfig,
    which: Components,
) -> Result<IterationState> {
    let iteration = state.k + 1;
    let g = state.grads.grid();
    let n = g.len();
    let inv_tau = 1.0 / cfg.dtau;
    let (fx, fy, ft) = (
        state.grads.fx.data(),
        state.grads.fy.data(),
        state.grads.ft.data(),
    );

    let [diff1, diff2] = diffusion_terms(&state.u1, &NuParams::from_config(cfg));
    let (diff1, diff2) = (diff1.data(), diff2.data());

    let mut u1 = state.u1.clone();
    let mut u2 = state.u2.clone();
    let a1 = cfg.alpha1;

    {
        let (old2, v21, v22) = (
            state.u1.channel(1).data(),
            state.u2.channel(0).data(),
            state.u2.channel(1).data(),
        );
        let c = u1.channel_mut(0).data_mut();
        for i in 0..n {
            let num = c[i] * inv_tau + diff1[i]
                - fx[i] / a1 * (fy[i] * (old2[i] + v22[i]) + ft[i] + fx[i] * v21[i]);
            c[i] = num / (inv_tau + fx[i] * fx[i] / a1);
        }
    }
    check_finite(u1.channel(0), iteration)?;
    {
        let [c1, c2] = u1.channels_mut();
        let (v21, v22) = (state.u2.channel(0).data(), state.u2.channel(1).data());
        let new1 = c1.data();
        let c = c2.data_mut();
        for i in 0..n {
            let num = c[i] * inv_tau + diff2[i]
                - fy[i] / a1 * (fx[i] * (new1[i] + v21[i]) + ft[i] + fy[i] * v22[i]);
            c[i] = num / (inv_tau + fy[i] * fy[i] / a1);
        }
    }
    check_finite(u1.channel(1), iteration)?;

    if which == Components::Both {
        let a2 = cfg.alpha2;
        let uu1 = temporal_second_primitive(state.u2.channel(0));
        let uu2 = temporal_second_primitive(state.u2.channel(1));
        let (n11, n12) = (u1.channel(0).data(), u1.channel(1).data());
        {
            let old22 = state.u2.channel(1).data();
            let uu = uu1.data();
            let c = u2.channel_mut(0).data_mut();
            for i in 0..n {
                let num = c[i] * inv_tau + uu[i]
                    - fx[i] / a2 * (fx[i] * n11[i] + fy[i] * (n12[i] + old22[i]) + ft[i]);
                c[i] = num / (inv_tau + fx[i] * fx[i] / a2);
            }
        }
        check_finite(u2.channel(0), iteration)?;
        {
            let [c1, c2] = u2.channels_mut();
            let new21 = c1.data();
            let uu = uu2.data();
            let c = c2.data_mut();
            for i in 0..n {
                let num = c[i] * inv_tau + uu[i]
                    - fy[i] / a2 * (fx[i] * (n11[i] + new21[i]) + fy[i] * n12[i] + ft[i]);
                c[i] = num / (inv_tau + fy[i] * fy[i] / a2);
            }
        }
        check_finite(u2.channel(1), iteration)?;
    }

    Ok(IterationState {
        k: iteration,
        u1,
        u2,
        grads: state.grads.clone(),
    })
}

fn check_finite(c: &ScalarField3, iteration: usize) -> Result<()> {
    if c.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { iteration })
    }
}

/// `‖a − b‖ / ‖a‖` with `0/0 = 0` and `x/0 = ∞`.
fn relative_change(prev: &ScalarField3, next: &ScalarField3) -> f64 {
    let num: f64 = prev
        .data()
        .iter()
        .zip(next.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den = crate::grid::sum_sq(prev.data());
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        crate::math::sqrt(num / den)
    }
}

fn min_relative_change(prev: &FlowComponent, next: &FlowComponent) -> f64 {
    relative_change(prev.channel(0), next.channel(0))
        .min(relative_change(prev.channel(1), next.channel(1)))
}

/// True when at least one channel of `u1` and one channel of `u2` changed by
/// a relative Euclidean amount strictly below `tol`.
pub fn stopping_criterion(prev: &IterationState, next: &IterationState, tol: f64) -> bool {
    min_relative_change(&prev.u1, &next.u1) < tol && min_relative_change(&prev.u2, &next.u2) < tol
}

/// Minimizes the decomposition energy from a zero start.
pub fn decompose(f: &ScalarField3, cfg: &SolverConfig) -> Result<DecompositionResult> {
    run(f, cfg, Components::Both)
}

pub(crate) fn run(f: &ScalarField3, cfg: &SolverConfig, which: Components) -> Result<DecompositionResult> {
    cfg.validate()?;
    let mut state = IterationState::new(f);
    let mut history = Vec::new();
    let mut residuals = Vec::new();
    let mut stop = StopReason::MaxIter;
    while state.k < cfg.max_iter {
        let next = sweep_with(&state, cfg, which)?;
        let e = energy_terms(&next.grads, &next.u1, &next.u2, cfg)?;
        history.push(e.total);
        residuals.push(e.data);
        let converged = match which {
            Components::Both => stopping_criterion(&state, &next, cfg.tol),
            Components::SmoothOnly => min_relative_change(&state.u1, &next.u1) < cfg.tol,
        };
        state = next;
        // 0/0 counts as converged, so the first sweeps of a trivial input would
        // stop immediately; require at least two sweeps.
        if converged && state.k >= 2 {
            stop = StopReason::ToleranceReached;
            break;
        }
    }
    let data_residual = residuals.last().copied().unwrap_or(0.0);
    Ok(DecompositionResult {
        u1: state.u1,
        u2: state.u2,
        energy_history: history,
        residual_history: residuals,
        data_residual,
        iterations: state.k,
        stop_reason: stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::regularizer::{optimality_residual_u1, optimality_residual_u2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(g: GridSpec, rng: &mut ChaCha8Rng, amp: f64) -> ScalarField3 {
        ScalarField3::sample(g, |_, _, _| rng.gen_range(-amp..amp)).unwrap()
    }

    #[test]
    fn constant_sequence_stays_at_zero() {
        let g = GridSpec::new(6, 5, 4).unwrap();
        let f = ScalarField3::constant(g, 0.5);
        let st = IterationState::new(&f);
        let next = sweep(&st, &SolverConfig::default()).unwrap();
        assert_eq!(next.u1.l2_norm_sq() + next.u2.l2_norm_sq(), 0.0);
        let res = decompose(&f, &SolverConfig::default()).unwrap();
        assert_eq!(res.iterations, 2);
        assert_eq!(res.stop_reason, StopReason::ToleranceReached);
        assert_eq!(res.energy_history.len(), 2);
        assert_eq!(res.data_residual, 0.0);
    }

    #[test]
    fn stopping_rule_conventions() {
        let g = GridSpec::new(4, 4, 3).unwrap();
        let f = ScalarField3::constant(g, 0.0);
        let zero = IterationState::new(&f);
        assert!(stopping_criterion(&zero, &zero, 0.05));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let flows = |rng: &mut ChaCha8Rng| FlowComponent::new(random(g, rng, 1.0), random(g, rng, 1.0)).unwrap();
        let nonzero = IterationState::with_flows(&f, flows(&mut rng), flows(&mut rng)).unwrap();
        assert!(!stopping_criterion(&zero, &nonzero, 0.05));
        assert!(stopping_criterion(&nonzero, &nonzero, 1e-12));

        // relative change exactly 1/2 = tol is not converged
        let ones = FlowComponent::new(ScalarField3::constant(g, 1.0), ScalarField3::constant(g, 1.0)).unwrap();
        let halves = ones.scaled(0.5);
        let a = IterationState::with_flows(&f, ones.clone(), ones.clone()).unwrap();
        let b = IterationState::with_flows(&f, halves.clone(), halves).unwrap();
        assert_eq!(relative_change(ones.channel(0), b.u1.channel(0)), 0.5);
        assert!(!stopping_criterion(&a, &b, 0.5));
        assert!(stopping_criterion(&a, &b, 0.5000001));
    }

    /// Straight-line scalar evaluation of one sweep on a 3x3x3 grid, with its
    /// own stencils and sums.
    #[test]
    fn single_sweep_matches_independent_evaluation() {
        let g = GridSpec::new(3, 3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = random(g, &mut rng, 1.0).map(|v| 0.5 + 0.5 * v);
        let u1 = FlowComponent::new(random(g, &mut rng, 0.3), random(g, &mut rng, 0.3)).unwrap();
        let u2 = FlowComponent::new(random(g, &mut rng, 0.3), random(g, &mut rng, 0.3)).unwrap();
        let cfg = SolverConfig {
            alpha1: 0.7,
            alpha2: 0.3,
            eps_nu: 0.2,
            lambda: 0.5,
            dtau: 1e-3,
            ..SolverConfig::default()
        };
        let st = IterationState::with_flows(&f, u1.clone(), u2.clone()).unwrap();
        let next = sweep(&st, &cfg).unwrap();

        // ---- independent evaluation ----
        type A3 = [[[f64; 3]; 3]; 3];
        let to_arr = |s: &ScalarField3| {
            let mut a: A3 = [[[0.0; 3]; 3]; 3];
            for t in 0..3 { for y in 0..3 { for x in 0..3 { a[x][y][t] = s.get(x, y, t); } } }
            a
        };
        let h = 0.5; // spacing on a 3-node unit axis
        let cl = |i: isize| i.clamp(0, 2) as usize;
        let d = |a: &A3, axis: usize, x: usize, y: usize, t: usize| -> f64 {
            let (xi, yi, ti) = (x as isize, y as isize, t as isize);
            let (p, m) = match axis {
                0 => (a[cl(xi + 1)][y][t], a[cl(xi - 1)][y][t]),
                1 => (a[x][cl(yi + 1)][t], a[x][cl(yi - 1)][t]),
                _ => (a[x][y][cl(ti + 1)], a[x][y][cl(ti - 1)]),
            };
            (p - m) / (2.0 * h)
        };
        let fa = to_arr(&f);
        let (mut a11, mut a12) = (to_arr(u1.channel(0)), to_arr(u1.channel(1)));
        let (mut a21, mut a22) = (to_arr(u2.channel(0)), to_arr(u2.channel(1)));
        let (o11, o12, o21, o22) = (a11, a12, a21, a22);
        let nup = |x: usize, y: usize, t: usize| {
            let mut s = 0.0;
            for ax in 0..3 {
                s += d(&o11, ax, x, y, t).powi(2) + d(&o12, ax, x, y, t).powi(2);
            }
            cfg.eps_nu + (1.0 - cfg.eps_nu) / (2.0 * (1.0 + s / (cfg.lambda * cfg.lambda)).sqrt())
        };
        let mut flux: [[A3; 3]; 2] = [[[[[0.0; 3]; 3]; 3]; 3]; 2];
        for x in 0..3 { for y in 0..3 { for t in 0..3 {
            let w = nup(x, y, t);
            for ax in 0..3 {
                flux[0][ax][x][y][t] = w * d(&o11, ax, x, y, t);
                flux[1][ax][x][y][t] = w * d(&o12, ax, x, y, t);
            }
        }}}
        let div = |c: usize, x: usize, y: usize, t: usize| {
            d(&flux[c][0], 0, x, y, t) + d(&flux[c][1], 1, x, y, t) + d(&flux[c][2], 2, x, y, t)
        };
        let uu = |a: &A3, x: usize, y: usize, t: usize| {
            let uh = |tt: usize| (0..=tt).map(|s| a[x][y][s]).sum::<f64>() * h;
            -h * (t..3).map(uh).sum::<f64>()
        };
        let it = 1.0 / cfg.dtau;
        for x in 0..3 { for y in 0..3 { for t in 0..3 {
            let (fx, fy, ft) = (d(&fa, 0, x, y, t), d(&fa, 1, x, y, t), d(&fa, 2, x, y, t));
            a11[x][y][t] = (o11[x][y][t] * it + div(0, x, y, t)
                - fx / cfg.alpha1 * (fy * (o12[x][y][t] + o22[x][y][t]) + ft + fx * o21[x][y][t]))
                / (it + fx * fx / cfg.alpha1);
            a12[x][y][t] = (o12[x][y][t] * it + div(1, x, y, t)
                - fy / cfg.alpha1 * (fx * (a11[x][y][t] + o21[x][y][t]) + ft + fy * o22[x][y][t]))
                / (it + fy * fy / cfg.alpha1);
        }}}
        for x in 0..3 { for y in 0..3 { for t in 0..3 {
            let (fx, fy, ft) = (d(&fa, 0, x, y, t), d(&fa, 1, x, y, t), d(&fa, 2, x, y, t));
            a21[x][y][t] = (o21[x][y][t] * it + uu(&o21, x, y, t)
                - fx / cfg.alpha2 * (fx * (a11[x][y][t] + o21[x][y][t]) + fy * (a12[x][y][t] + o22[x][y][t]) + ft
                    - fx * o21[x][y][t]))
                / (it + fx * fx / cfg.alpha2);
            a22[x][y][t] = (o22[x][y][t] * it + uu(&o22, x, y, t)
                - fy / cfg.alpha2 * (fx * (a11[x][y][t] + a21[x][y][t]) + fy * a12[x][y][t] + ft))
                / (it + fy * fy / cfg.alpha2);
        }}}
        let check = |a: &A3, s: &ScalarField3| {
            for x in 0..3 { for y in 0..3 { for t in 0..3 {
                let (e, got) = (a[x][y][t], s.get(x, y, t));
                assert!((e - got).abs() <= 1e-12 * (1.0 + e.abs()), "{e} vs {got}");
            }}}
        };
        check(&a11, next.u1.channel(0));
        check(&a12, next.u1.channel(1));
        check(&a21, next.u2.channel(0));
        check(&a22, next.u2.channel(1));
    }

    #[test]
    fn denominators_are_positive() {
        // 1/Δτ + f_j²/α ≥ 1/Δτ: any finite input yields a finite sweep.
        let g = GridSpec::new(5, 5, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random(g, &mut rng, 1000.0);
        let st = IterationState::new(&f);
        assert!(sweep(&st, &SolverConfig::default()).is_ok());
    }

    #[test]
    fn divergence_is_reported() {
        let g = GridSpec::new(9, 9, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = random(g, &mut rng, 1.0);
        // an explicit diffusion step far beyond its stability limit
        let cfg = SolverConfig { dtau: 10.0, eps_nu: 1.0, max_iter: 10_000, tol: 1e-300, ..SolverConfig::default() };
        match decompose(&f, &cfg) {
            Err(Error::Divergence { iteration }) => assert!(iteration > 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let g = GridSpec::new(10, 9, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random(g, &mut rng, 0.5).map(|v| v + 0.5);
        let cfg = SolverConfig::default();
        let a = decompose(&f, &cfg).unwrap();
        let b = decompose(&f, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.energy_history.iter().zip(&b.energy_history).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn sweep_increments_determine_the_optimality_residuals() {
        // Rearranging the four update formulas expresses the optimality
        // residuals at the old state through the increments δ of one sweep:
        //
        //   r1₁ = -(α1/Δτ + fx²) δ1₁
        //   r1₂ = -(α1/Δτ + fy²) δ1₂ - fx fy δ1₁
        //   r2₁ = -(α2/Δτ + fx²) δ2₁ - fx (fx δ1₁ + fy δ1₂)
        //   r2₂ = -(α2/Δτ + fy²) δ2₂ - fy (fx δ1₁ + fy δ1₂ + fx δ2₁)
        //
        // so a state left unchanged by a sweep makes both residuals vanish.
        let g = GridSpec::new(7, 6, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let f = random(g, &mut rng, 0.4).map(|v| v + 0.5);
        let u1 = FlowComponent::new(random(g, &mut rng, 0.2), random(g, &mut rng, 0.2)).unwrap();
        let u2 = FlowComponent::new(random(g, &mut rng, 0.2), random(g, &mut rng, 0.2)).unwrap();
        let cfg = SolverConfig { alpha1: 0.8, alpha2: 0.3, eps_nu: 0.1, lambda: 0.3, dtau: 1e-3, ..SolverConfig::default() };
        let st = IterationState::with_flows(&f, u1.clone(), u2.clone()).unwrap();
        let next = sweep(&st, &cfg).unwrap();
        let r1 = optimality_residual_u1(&f, &u1, &u2, &cfg).unwrap();
        let r2 = optimality_residual_u2(&f, &u1, &u2, &cfg).unwrap();
        let d = |a: &FlowComponent, b: &FlowComponent, j: usize, i: usize| a.channel(j).data()[i] - b.channel(j).data()[i];
        let (a1, a2, it) = (cfg.alpha1, cfg.alpha2, 1.0 / cfg.dtau);
        for i in 0..g.len() {
            let (fx, fy) = (st.grads.fx.data()[i], st.grads.fy.data()[i]);
            let (d11, d12) = (d(&next.u1, &u1, 0, i), d(&next.u1, &u1, 1, i));
            let (d21, d22) = (d(&next.u2, &u2, 0, i), d(&next.u2, &u2, 1, i));
            let expect = [
                -(a1 * it + fx * fx) * d11,
                -(a1 * it + fy * fy) * d12 - fx * fy * d11,
                -(a2 * it + fx * fx) * d21 - fx * (fx * d11 + fy * d12),
                -(a2 * it + fy * fy) * d22 - fy * (fx * d11 + fy * d12 + fx * d21),
            ];
            let got = [
                r1.channel(0).data()[i],
                r1.channel(1).data()[i],
                r2.channel(0).data()[i],
                r2.channel(1).data()[i],
            ];
            for (e, r) in expect.iter().zip(got) {
                assert!((e - r).abs() <= 1e-9 * (1.0 + r.abs()), "voxel {i}: {e} vs {r}");
            }
        }
    }
}
