//! Energy terms of the decomposition model and their first variations.
//!
//! * `ν(r) = εr + (1-ε)λ²(√(1 + r/λ²) - 1)`, so `ν(0) = 0`.
//! * `R1(u1) = ∫ ν(|∇₃u1₁|² + |∇₃u1₂|²)`.
//! * `R2(u2) = Σ_j ∫ (û2_j)²`, the temporal H^-1 norm.
//! * `E(u1, u2) = ∫ (∇f·(u1 + u2) + f_t)²`.
//!
//! The optimality residuals drop the common factor 2 of the directional
//! derivatives: `∂_h F = 2⟨residual, h⟩` under the quadrature inner product.
//! For `u1` this needs `h` to vanish on the boundary collar (the integration
//! by parts behind the divergence form); for `u2` it is exact for any `h`.

use alloc::vec;

use crate::error::{Error, Result};
use crate::grid::{FlowComponent, ScalarField3, SolverConfig, VectorField3};
use crate::math::sqrt;
use crate::operators::{div3, grad3, second_primitive_of, temporal_primitive};

/// Parameters `(ε, λ)` of the penalty `ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuParams {
    pub eps: f64,
    pub lambda: f64,
}

impl NuParams {
    pub fn new(eps: f64, lambda: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter { name: "eps_nu", value: eps });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter { name: "lambda", value: lambda });
        }
        Ok(Self { eps, lambda })
    }

    pub fn from_config(cfg: &SolverConfig) -> Self {
        Self {
            eps: cfg.eps_nu,
            lambda: cfg.lambda,
        }
    }

    #[inline]
    pub(crate) fn value(&self, r: f64) -> f64 {
        let l2 = self.lambda * self.lambda;
        self.eps * r + (1.0 - self.eps) * l2 * (sqrt(1.0 + r / l2) - 1.0)
    }

    #[inline]
    pub(crate) fn derivative(&self, r: f64) -> f64 {
        let l2 = self.lambda * self.lambda;
        self.eps + (1.0 - self.eps) / (2.0 * sqrt(1.0 + r / l2))
    }
}

/// `ν(r)`; rejects `r < 0`.
pub fn nu(r: f64, p: &NuParams) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::NegativeArgument(r));
    }
    Ok(p.value(r))
}

/// `ν'(r) = ε + (1-ε) / (2√(1 + r/λ²))`; rejects `r < 0`.
pub fn nu_prime(r: f64, p: &NuParams) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::NegativeArgument(r));
    }
    Ok(p.derivative(r))
}

/// Discrete derivatives `(∂₁ʰf, ∂₂ʰf, ∂ₜʰf)` of an input sequence, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceGradient {
    pub fx: ScalarField3,
    pub fy: ScalarField3,
    pub ft: ScalarField3,
}

impl SequenceGradient {
    pub fn new(f: &ScalarField3) -> Self {
        let [fx, fy, ft] = grad3(f).into_channels();
        Self { fx, fy, ft }
    }

    pub fn grid(&self) -> crate::GridSpec {
        self.fx.grid()
    }

    /// Pointwise `∇f·(u1 + u2) + f_t`.
    pub fn residual(&self, u1: &FlowComponent, u2: &FlowComponent) -> Result<ScalarField3> {
        let g = self.grid();
        if u1.grid() != g || u2.grid() != g {
            return Err(Error::GridMismatch);
        }
        let (a1, a2) = (u1.channel(0).data(), u1.channel(1).data());
        let (b1, b2) = (u2.channel(0).data(), u2.channel(1).data());
        let (fx, fy, ft) = (self.fx.data(), self.fy.data(), self.ft.data());
        let mut out = vec![0.0; g.len()];
        for i in 0..g.len() {
            out[i] = fx[i] * (a1[i] + b1[i]) + fy[i] * (a2[i] + b2[i]) + ft[i];
        }
        Ok(ScalarField3::from_raw(g, out))
    }

    pub fn data_energy(&self, u1: &FlowComponent, u2: &FlowComponent) -> Result<f64> {
        Ok(self.residual(u1, u2)?.l2_norm_sq())
    }
}

/// Pointwise diffusivity `ν'(|∇₃u1₁|² + |∇₃u1₂|²)` together with the two gradients.
pub(crate) fn diffusivity(u1: &FlowComponent, p: &NuParams) -> (ScalarField3, VectorField3, VectorField3) {
    let g1 = grad3(u1.channel(0));
    let g2 = grad3(u1.channel(1));
    let s = squared_gradient_sum(&g1, &g2);
    (s.map(|r| p.derivative(r)), g1, g2)
}

fn squared_gradient_sum(g1: &VectorField3, g2: &VectorField3) -> ScalarField3 {
    let g = g1.grid();
    let mut out = vec![0.0; g.len()];
    for v in [g1, g2] {
        for a in 0..3 {
            for (o, x) in out.iter_mut().zip(v.channel(a).data()) {
                *o += x * x;
            }
        }
    }
    ScalarField3::from_raw(g, out)
}

/// `∇₃ʰ·(ν' ∇₃ʰu1_j)` for both channels, with `ν'` evaluated at `u1`.
pub fn diffusion_terms(u1: &FlowComponent, p: &NuParams) -> [ScalarField3; 2] {
    let (nup, g1, g2) = diffusivity(u1, p);
    [weighted_divergence(&nup, g1), weighted_divergence(&nup, g2)]
}

pub(crate) fn weighted_divergence(weight: &ScalarField3, mut v: VectorField3) -> ScalarField3 {
    for a in 0..3 {
        for (x, w) in v.channel_mut(a).data_mut().iter_mut().zip(weight.data()) {
            *x *= w;
        }
    }
    div3(&v)
}

/// `R1(u1)`.
pub fn reg1(u1: &FlowComponent, p: &NuParams) -> f64 {
    let g1 = grad3(u1.channel(0));
    let g2 = grad3(u1.channel(1));
    let s = squared_gradient_sum(&g1, &g2);
    let sum: f64 = s.data().iter().map(|&r| p.value(r)).sum();
    u1.grid().cell_volume() * sum
}

/// `R2(u2) = Σ_j ‖û2_j‖²`.
pub fn reg2(u2: &FlowComponent) -> f64 {
    u2.channels()
        .iter()
        .map(|c| temporal_primitive(c).l2_norm_sq())
        .sum()
}

/// `E(u1, u2)`.
pub fn data_energy(f: &ScalarField3, u1: &FlowComponent, u2: &FlowComponent) -> Result<f64> {
    if u1.grid() != f.grid() || u2.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    SequenceGradient::new(f).data_energy(u1, u2)
}

/// The three energy terms and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    pub data: f64,
    pub reg1: f64,
    pub reg2: f64,
    pub total: f64,
}

pub fn energy_terms(
    grads: &SequenceGradient,
    u1: &FlowComponent,
    u2: &FlowComponent,
    cfg: &SolverConfig,
) -> Result<EnergyTerms> {
    let data = grads.data_energy(u1, u2)?;
    let r1 = reg1(u1, &NuParams::from_config(cfg));
    let r2 = reg2(u2);
    Ok(EnergyTerms {
        data,
        reg1: r1,
        reg2: r2,
        total: data + cfg.alpha1 * r1 + cfg.alpha2 * r2,
    })
}

/// `F = E + α1·R1 + α2·R2`.
pub fn total_energy(
    f: &ScalarField3,
    u1: &FlowComponent,
    u2: &FlowComponent,
    cfg: &SolverConfig,
) -> Result<f64> {
    if u1.grid() != f.grid() || u2.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(energy_terms(&SequenceGradient::new(f), u1, u2, cfg)?.total)
}

/// `∂_j f · res - α1 ∇₃·(ν' ∇₃ u1_j)` for `j = 1, 2`.
pub fn optimality_residual_u1(
    f: &ScalarField3,
    u1: &FlowComponent,
    u2: &FlowComponent,
    cfg: &SolverConfig,
) -> Result<FlowComponent> {
    let grads = SequenceGradient::new(f);
    let res = grads.residual(u1, u2)?;
    let [d1, d2] = diffusion_terms(u1, &NuParams::from_config(cfg));
    let mk = |fj: &ScalarField3, diff: &ScalarField3| {
        ScalarField3::from_raw(
            res.grid(),
            fj.data()
                .iter()
                .zip(res.data())
                .zip(diff.data())
                .map(|((a, r), d)| a * r - cfg.alpha1 * d)
                .collect(),
        )
    };
    FlowComponent::new(mk(&grads.fx, &d1), mk(&grads.fy, &d2))
}

/// `∂_j f · res - α2 ûû2_j` for `j = 1, 2`.
pub fn optimality_residual_u2(
    f: &ScalarField3,
    u1: &FlowComponent,
    u2: &FlowComponent,
    cfg: &SolverConfig,
) -> Result<FlowComponent> {
    let grads = SequenceGradient::new(f);
    let res = grads.residual(u1, u2)?;
    let mk = |fj: &ScalarField3, u: &ScalarField3| {
        let uu = second_primitive_of(&temporal_primitive(u));
        ScalarField3::from_raw(
            res.grid(),
            fj.data()
                .iter()
                .zip(res.data())
                .zip(uu.data())
                .map(|((a, r), w)| a * r - cfg.alpha2 * w)
                .collect(),
        )
    };
    FlowComponent::new(mk(&grads.fx, u2.channel(0)), mk(&grads.fy, u2.channel(1)))
}
