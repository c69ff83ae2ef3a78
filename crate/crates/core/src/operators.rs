//! Discrete space-time differential operators and temporal primitives.
//!
//! Derivatives are central differences `(H(r+1) - H(r-1)) / (2Δ)` along each
//! axis. At the edges the field is extended by replicate padding
//! (`H(0) := H(1)`, `H(M+1) := H(M)`), for the gradient and the divergence
//! alike. With test fields that vanish on a one-node collar, `div3` is exactly
//! the negative adjoint of `grad3` under the quadrature inner product.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::grid::{FlowComponent, GridSpec, ScalarField3, VectorField3};
use crate::math::sqrt;

/// Spatial or temporal axis of a space-time grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
    T,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X1, Axis::X2, Axis::T];

    fn extent(self, g: &GridSpec) -> (usize, usize, f64) {
        // (length along axis, index stride, spacing)
        match self {
            Axis::X1 => (g.m(), 1, g.dx()),
            Axis::X2 => (g.n(), g.m(), g.dy()),
            Axis::T => (g.t(), g.slice_len(), g.dt()),
        }
    }
}

/// Central difference of `h` along `axis`, replicate padded.
pub fn partial(h: &ScalarField3, axis: Axis) -> ScalarField3 {
    let g = h.grid();
    let (len, stride, spacing) = axis.extent(&g);
    let inv = 1.0 / (2.0 * spacing);
    let src = h.data();
    let mut out = vec![0.0; src.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let pos = (idx / stride) % len;
        let lo = if pos == 0 { idx } else { idx - stride };
        let hi = if pos + 1 == len { idx } else { idx + stride };
        *o = (src[hi] - src[lo]) * inv;
    }
    ScalarField3::from_raw(g, out)
}

/// Discrete space-time gradient `∇₃ʰH`.
pub fn grad3(h: &ScalarField3) -> VectorField3 {
    VectorField3::new(
        partial(h, Axis::X1),
        partial(h, Axis::X2),
        partial(h, Axis::T),
    )
    .expect("partials share the input grid")
}

/// Discrete divergence `∂₁ʰV₁ + ∂₂ʰV₂ + ∂ₜʰV₃`, same stencil and padding as [`grad3`].
pub fn div3(v: &VectorField3) -> ScalarField3 {
    let mut acc = partial(v.channel(0), Axis::X1);
    for (axis, ch) in [(Axis::X2, 1), (Axis::T, 2)] {
        let d = partial(v.channel(ch), axis);
        for (a, b) in acc.data_mut().iter_mut().zip(d.data()) {
            *a += b;
        }
    }
    acc
}

/// Running time integral `û(t) = Δt Σ_{τ≤t} u(τ)`.
pub fn temporal_primitive(u: &ScalarField3) -> ScalarField3 {
    let g = u.grid();
    let dt = g.dt();
    let slice = g.slice_len();
    let src = u.data();
    let mut out = vec![0.0; src.len()];
    for p in 0..slice {
        let mut acc = 0.0;
        for t in 0..g.t() {
            acc += src[t * slice + p];
            out[t * slice + p] = dt * acc;
        }
    }
    ScalarField3::from_raw(g, out)
}

/// Second primitive `ûû(t) = -Δt Σ_{τ=t}^{T} û(τ)` (suffix sum, both ends included).
///
/// Its forward difference reproduces `û`: `(ûû(t+1) - ûû(t)) / Δt = û(t)`.
pub fn temporal_second_primitive(u: &ScalarField3) -> ScalarField3 {
    second_primitive_of(&temporal_primitive(u))
}

/// Suffix sum step applied to an already integrated field `û`.
pub(crate) fn second_primitive_of(uhat: &ScalarField3) -> ScalarField3 {
    let g = uhat.grid();
    let dt = g.dt();
    let slice = g.slice_len();
    let src = uhat.data();
    let mut out = vec![0.0; src.len()];
    for p in 0..slice {
        let mut acc = 0.0;
        for t in (0..g.t()).rev() {
            acc += src[t * slice + p];
            out[t * slice + p] = -dt * acc;
        }
    }
    ScalarField3::from_raw(g, out)
}

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn identity() -> Self {
        Self {
            xx: 1.0,
            xy: 0.0,
            yy: 1.0,
        }
    }

    /// Outer product `a aᵀ`.
    pub fn outer(a: [f64; 2]) -> Self {
        Self {
            xx: a[0] * a[0],
            xy: a[0] * a[1],
            yy: a[1] * a[1],
        }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn apply(&self, w: [f64; 2]) -> [f64; 2] {
        [
            self.xx * w[0] + self.xy * w[1],
            self.xy * w[0] + self.yy * w[1],
        ]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            xx: c * self.xx,
            xy: c * self.xy,
            yy: c * self.yy,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yy: self.yy + o.yy,
        }
    }

    /// `selfᵀ self` (= `self²` for a symmetric matrix).
    pub fn square(&self) -> Self {
        Self {
            xx: self.xx * self.xx + self.xy * self.xy,
            xy: self.xy * (self.xx + self.yy),
            yy: self.xy * self.xy + self.yy * self.yy,
        }
    }

    /// Principal square root of a positive semi-definite matrix:
    /// `√M = (M + √det·I) / √(tr + 2√det)`.
    pub fn sqrt_psd(&self) -> Self {
        let s = sqrt(self.det().max(0.0));
        let tau = sqrt((self.trace() + 2.0 * s).max(0.0));
        if tau == 0.0 {
            return Self::default();
        }
        Self {
            xx: (self.xx + s) / tau,
            xy: self.xy / tau,
            yy: (self.yy + s) / tau,
        }
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Self {
            xx: self.yy / d,
            xy: -self.xy / d,
            yy: self.xx / d,
        })
    }
}

/// Below this gradient magnitude `ρ` is defined as zero.
pub const RHO_GRADIENT_FLOOR: f64 = 1e-12;

/// Per-voxel quantities of the surrogate data term: `A₀ = ∇f ∇fᵀ`,
/// `ρ = -(f_t/|∇f|) ∇f` and `|∇f|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateData {
    pub rho: FlowComponent,
    pub a0: Vec<Sym2>,
    pub grad_mag: ScalarField3,
    /// Spatial gradient and temporal derivative of the sequence.
    pub fx: ScalarField3,
    pub fy: ScalarField3,
    pub ft: ScalarField3,
}

/// Computes `A₀`, `ρ` and `|∇f|` from the discrete derivatives of `f`.
pub fn surrogate_fields(f: &ScalarField3) -> SurrogateData {
    let g = f.grid();
    let [fx, fy, ft] = grad3(f).into_channels();
    let n = g.len();
    let mut a0 = Vec::with_capacity(n);
    let mut mag = vec![0.0; n];
    let mut rho1 = vec![0.0; n];
    let mut rho2 = vec![0.0; n];
    for i in 0..n {
        let (gx, gy, gt) = (fx.data()[i], fy.data()[i], ft.data()[i]);
        a0.push(Sym2::outer([gx, gy]));
        let m = crate::math::hypot(gx, gy);
        mag[i] = m;
        if m >= RHO_GRADIENT_FLOOR {
            rho1[i] = -gt * gx / m;
            rho2[i] = -gt * gy / m;
        }
    }
    SurrogateData {
        rho: FlowComponent::new(
            ScalarField3::from_raw(g, rho1),
            ScalarField3::from_raw(g, rho2),
        )
        .expect("same grid"),
        a0,
        grad_mag: ScalarField3::from_raw(g, mag),
        fx,
        fy,
        ft,
    }
}

impl SurrogateData {
    /// `A₀^{1/2} = A₀ / |∇f|` at voxel `idx` (zero where the gradient vanishes).
    pub fn a0_sqrt(&self, idx: usize) -> Sym2 {
        let m = self.grad_mag.data()[idx];
        if m < RHO_GRADIENT_FLOOR {
            Sym2::default()
        } else {
            self.a0[idx].scale(1.0 / m)
        }
    }

    /// Both sides of `|A₀^{1/2}w - ρ|² = (∇f·w + f_t)²` at voxel `idx`.
    pub fn equiv_sides(&self, idx: usize, w: [f64; 2]) -> (f64, f64) {
        let aw = self.a0_sqrt(idx).apply(w);
        let d0 = aw[0] - self.rho.channel(0).data()[idx];
        let d1 = aw[1] - self.rho.channel(1).data()[idx];
        let lhs = d0 * d0 + d1 * d1;
        let res = self.fx.data()[idx] * w[0] + self.fy.data()[idx] * w[1] + self.ft.data()[idx];
        (lhs, res * res)
    }

    /// The uniformly positive definite matrix `A = (A₀ᵀA₀ + εI)^{1/2}` at `idx`.
    pub fn surrogate_matrix(&self, idx: usize, eps: f64) -> Sym2 {
        self.a0[idx]
            .square()
            .add(&Sym2::identity().scale(eps))
            .sqrt_psd()
    }

    /// `φ = A^{-1/2} ρ`, for diagnostics.
    pub fn phi(&self, eps: f64) -> Result<FlowComponent> {
        let g = self.grad_mag.grid();
        let n = g.len();
        let mut p1 = vec![0.0; n];
        let mut p2 = vec![0.0; n];
        for i in 0..n {
            let a_half_inv = self
                .surrogate_matrix(i, eps)
                .sqrt_psd()
                .inverse()
                .ok_or(crate::Error::InvalidParameter {
                    name: "eps_surrogate",
                    value: eps,
                })?;
            let v = a_half_inv.apply([self.rho.channel(0).data()[i], self.rho.channel(1).data()[i]]);
            p1[i] = v[0];
            p2[i] = v[1];
        }
        FlowComponent::new(ScalarField3::from_raw(g, p1), ScalarField3::from_raw(g, p2))
    }
}
