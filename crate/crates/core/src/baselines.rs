//! Reference methods: two-frame Horn–Schunck and the single-component
//! spatio-temporal model (`u2 ≡ 0`).

use alloc::vec;

use crate::error::{Error, Result};
use crate::grid::{DecompositionResult, Frame, ScalarField3, SolverConfig};
use crate::solver::{run, Components};

/// Dense 2D flow between two frames, in pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarFlow {
    pub u: Frame,
    pub v: Frame,
}

struct HsDerivatives {
    ix: Frame,
    iy: Frame,
    it: Frame,
}

fn hs_derivatives(a: &Frame, b: &Frame) -> HsDerivatives {
    let (w, h) = (a.width(), a.height());
    let avg = Frame::from_fn(w, h, |x, y| 0.5 * (a.get(x, y) + b.get(x, y)));
    let cd = |dx: isize, dy: isize| {
        Frame::from_fn(w, h, |x, y| {
            let (x, y) = (x as isize, y as isize);
            0.5 * (avg.get_clamped(x + dx, y + dy) - avg.get_clamped(x - dx, y - dy))
        })
    };
    HsDerivatives {
        ix: cd(1, 0),
        iy: cd(0, 1),
        it: Frame::from_fn(w, h, |x, y| b.get(x, y) - a.get(x, y)),
    }
}

fn neighbours(w: usize, h: usize, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> {
    let cand = [
        (x.wrapping_sub(1), y),
        (x + 1, y),
        (x, y.wrapping_sub(1)),
        (x, y + 1),
    ];
    cand.into_iter().filter(move |&(a, b)| a < w && b < h)
}

/// Horn–Schunck flow from `frame_a` to `frame_b`.
///
/// Minimizes `Σ (I_x u + I_y v + I_t)² + α Σ_edges (|Δu|² + |Δv|²)` by block
/// Jacobi sweeps. With `n` in-grid neighbours and their mean `ū`:
///
/// ```text
/// u' = ū - I_x (I_x ū + I_y v̄ + I_t) / (nα + I_x² + I_y²)
/// ```
///
/// which is the classical `4α` update away from the border.
pub fn horn_schunck(frame_a: &Frame, frame_b: &Frame, alpha: f64, iters: usize) -> Result<PlanarFlow> {
    frame_a.same_size(frame_b)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter { name: "alpha", value: alpha });
    }
    let (w, h) = (frame_a.width(), frame_a.height());
    let d = hs_derivatives(frame_a, frame_b);
    let mut u = Frame::constant(w, h, 0.0);
    let mut v = Frame::constant(w, h, 0.0);
    for _ in 0..iters {
        let mut nu = vec![0.0; w * h];
        let mut nv = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0);
                for (a, b) in neighbours(w, h, x, y) {
                    su += u.get(a, b);
                    sv += v.get(a, b);
                    n += 1.0;
                }
                let (ub, vb) = (su / n, sv / n);
                let (ix, iy, it) = (d.ix.get(x, y), d.iy.get(x, y), d.it.get(x, y));
                let k = (ix * ub + iy * vb + it) / (n * alpha + ix * ix + iy * iy);
                nu[y * w + x] = ub - ix * k;
                nv[y * w + x] = vb - iy * k;
            }
        }
        u = Frame::new(w, h, nu)?;
        v = Frame::new(w, h, nv)?;
    }
    Ok(PlanarFlow { u, v })
}

/// The discrete energy minimized by [`horn_schunck`].
pub fn horn_schunck_energy(frame_a: &Frame, frame_b: &Frame, alpha: f64, flow: &PlanarFlow) -> Result<f64> {
    frame_a.same_size(frame_b)?;
    frame_a.same_size(&flow.u)?;
    frame_a.same_size(&flow.v)?;
    let (w, h) = (frame_a.width(), frame_a.height());
    let d = hs_derivatives(frame_a, frame_b);
    let (u, v) = (&flow.u, &flow.v);
    let mut data = 0.0;
    let mut smooth = 0.0;
    for y in 0..h {
        for x in 0..w {
            let r = d.ix.get(x, y) * u.get(x, y) + d.iy.get(x, y) * v.get(x, y) + d.it.get(x, y);
            data += r * r;
            let sq = |a: f64| a * a;
            if x + 1 < w {
                smooth += sq(u.get(x + 1, y) - u.get(x, y)) + sq(v.get(x + 1, y) - v.get(x, y));
            }
            if y + 1 < h {
                smooth += sq(u.get(x, y + 1) - u.get(x, y)) + sq(v.get(x, y + 1) - v.get(x, y));
            }
        }
    }
    Ok(data + alpha * smooth)
}

/// Spatio-temporal flow with a single smooth component: the decomposition
/// iteration with the `u2` equations dropped. `alpha2` is ignored and the
/// returned `u2` is zero. Stops on `u1` alone.
pub fn weickert_schnoerr(f: &ScalarField3, cfg: &SolverConfig) -> Result<DecompositionResult> {
    run(f, cfg, Components::SmoothOnly)
}
