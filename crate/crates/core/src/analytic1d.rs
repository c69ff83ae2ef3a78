//! One space dimension: separable scenes `f(x, t) = f̃(x) g(t)`, their exact
//! optical flow, norm studies of the two worked examples, and the split of
//! `Û = Û1 + Û2` for the quadratic model problem, both as a Fourier series
//! and by a direct discrete solve.
//!
//! For a separable scene the flow equation `f_x u + f_t = 0` gives
//!
//! ```text
//! u(x, t) = -∂ₜ log g(t) / ∂ₓ log f̃(x)
//! û(x, t) = -(log g(t) - log g(0)) · h(x),   h = 1/∂ₓ log f̃ = f̃/f̃'
//! ```
//!
//! The model problem minimizes, with `Û1 = 0` at `t = 0, 1`,
//!
//! ```text
//! ∫∫ (∂ₓₜÛ1)² + (∂ₜₜÛ1)² + α (q + Û1)²,   q = (log g - log g(0)) h,
//! ```
//!
//! and `Û2 = -q - Û1`. In the basis `cos(mπx) sin(nπt)` it decouples into
//! `Û1_mn = -α/(α + π⁴(m² + n²)n²) · f_m ĝ_n`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::math::{cos, ln, powf, sin, sqrt, PI};

/// Points where `|f̃'| ≤ CRITICAL_SLOPE` are treated as critical.
pub const CRITICAL_SLOPE: f64 = 1e-12;

/// Spatial profile `f̃`.
#[derive(Debug, Clone, Copy)]
pub enum SpatialProfile {
    /// `x(1 - x)`, critical at `x = 1/2`.
    Parabola,
    /// `a + b x`.
    Affine { a: f64, b: f64 },
    Custom {
        value: fn(f64) -> f64,
        derivative: fn(f64) -> f64,
    },
}

impl SpatialProfile {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Self::Parabola => x * (1.0 - x),
            Self::Affine { a, b } => a + b * x,
            Self::Custom { value, .. } => value(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Parabola => 1.0 - 2.0 * x,
            Self::Affine { b, .. } => b,
            Self::Custom { derivative, .. } => derivative(x),
        }
    }

    /// `1/∂ₓ log f̃ = f̃/f̃'`; `None` at a critical point.
    pub fn inv_log_slope(&self, x: f64) -> Option<f64> {
        let d = self.derivative(x);
        if d.abs() <= CRITICAL_SLOPE {
            None
        } else {
            Some(self.value(x) / d)
        }
    }
}

/// Illumination `g(t) > 0`.
#[derive(Debug, Clone, Copy)]
pub enum Illumination {
    Constant,
    /// `1 - t`.
    Linear,
    /// `exp(-(1/β)(1 - t)^β)`.
    ExpPower { beta: f64 },
    /// `exp(sin(n₀πt)/(n₀π))`.
    Flicker { n0: u32 },
    /// `log g` and its derivative.
    Custom {
        log: fn(f64) -> f64,
        dlog: fn(f64) -> f64,
    },
}

impl Illumination {
    /// `log g(t)`; `None` where `g` is not positive.
    pub fn log_g(&self, t: f64) -> Option<f64> {
        match *self {
            Self::Constant => Some(0.0),
            Self::Linear => (t < 1.0).then(|| ln(1.0 - t)),
            Self::ExpPower { beta } => Some(-powf(1.0 - t, beta) / beta),
            Self::Flicker { n0 } => {
                let w = n0 as f64 * PI;
                Some(sin(w * t) / w)
            }
            Self::Custom { log, .. } => Some(log(t)),
        }
    }

    /// `∂ₜ log g(t)`.
    pub fn dlog_g(&self, t: f64) -> Option<f64> {
        match *self {
            Self::Constant => Some(0.0),
            Self::Linear => (t < 1.0).then(|| -1.0 / (1.0 - t)),
            Self::ExpPower { beta } => (t < 1.0).then(|| powf(1.0 - t, beta - 1.0)),
            Self::Flicker { n0 } => Some(cos(n0 as f64 * PI * t)),
            Self::Custom { dlog, .. } => Some(dlog(t)),
        }
    }

    pub fn value(&self, t: f64) -> Option<f64> {
        match *self {
            Self::Linear => (t <= 1.0).then(|| 1.0 - t),
            _ => self.log_g(t).map(crate::math::exp),
        }
    }

    /// `log g(t) - log g(0)`.
    pub fn log_ratio(&self, t: f64) -> Option<f64> {
        Some(self.log_g(t)? - self.log_g(0.0)?)
    }
}

/// `f(x, t) = f̃(x) g(t)`.
#[derive(Debug, Clone, Copy)]
pub struct SeparableScene1D {
    pub profile: SpatialProfile,
    pub illumination: Illumination,
}

impl SeparableScene1D {
    pub fn new(profile: SpatialProfile, illumination: Illumination) -> Result<Self> {
        match illumination {
            Illumination::ExpPower { beta } if !(beta > 0.0 && beta < 1.0) => {
                Err(Error::InvalidParameter { name: "beta", value: beta })
            }
            Illumination::Flicker { n0: 0 } => Err(Error::InvalidParameter { name: "n0", value: 0.0 }),
            _ => Ok(Self { profile, illumination }),
        }
    }

    /// The transport example: `x(1 - x)(1 - t)`.
    pub fn transport() -> Self {
        Self {
            profile: SpatialProfile::Parabola,
            illumination: Illumination::Linear,
        }
    }

    /// `x(1 - x) exp(-(1/β)(1 - t)^β)`.
    pub fn exp_power(beta: f64) -> Result<Self> {
        Self::new(SpatialProfile::Parabola, Illumination::ExpPower { beta })
    }

    pub fn flicker(profile: SpatialProfile, n0: u32) -> Result<Self> {
        Self::new(profile, Illumination::Flicker { n0 })
    }

    pub fn value(&self, x: f64, t: f64) -> Option<f64> {
        Some(self.profile.value(x) * self.illumination.value(t)?)
    }

    /// `q(x, t) = (log g(t) - log g(0)) h(x)`, i.e. `-û`.
    pub fn target(&self, x: f64, t: f64) -> Result<f64> {
        let h = self.profile.inv_log_slope(x).ok_or(Error::Singularity { x, t })?;
        let l = self.illumination.log_ratio(t).ok_or(Error::Singularity { x, t })?;
        Ok(l * h)
    }
}

/// `u(x, t) = -∂ₜ log g(t) / ∂ₓ log f̃(x)`.
pub fn ofe_flow_1d(scene: &SeparableScene1D, x: f64, t: f64) -> Result<f64> {
    let h = scene.profile.inv_log_slope(x).ok_or(Error::Singularity { x, t })?;
    let d = scene.illumination.dlog_g(t).ok_or(Error::Singularity { x, t })?;
    Ok(-d * h)
}

/// `û(x, t) = ∫₀ᵗ u`.
pub fn ofe_primitive_1d(scene: &SeparableScene1D, x: f64, t: f64) -> Result<f64> {
    Ok(-scene.target(x, t)?)
}

/// Composite Simpson rule with `panels` (made even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = (panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rule(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = rule(fa, flm, fm, a, m);
        let right = rule(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    step(f, a, b, fa, fm, fb, rule(fa, fm, fb, a, b), tol, 50)
}

/// `C = ∫₀^{1/4} x²(1-x)²/(1-2x)² dx`.
pub fn c_constant() -> f64 {
    let w = |x: f64| {
        let v = x * (1.0 - x) / (1.0 - 2.0 * x);
        v * v
    };
    adaptive_simpson(&w, 0.0, 0.25, 1e-14)
}

/// Which norm study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormCase {
    /// `‖û‖²` of the transport example on `(0,1)²`; refined in `x` only.
    Ex1Uhat,
    /// `‖u‖²` of the exp-power example on `(0,1/4) × (0,1)`.
    Ex2U,
    /// `‖û‖²` of the exp-power example on `(0,1/4) × (0,1)`.
    Ex2Uhat,
}

impl NormCase {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ex1Uhat => "ex1_uhat",
            Self::Ex2U => "ex2_u",
            Self::Ex2Uhat => "ex2_uhat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormLevel {
    pub level: usize,
    pub nx: usize,
    pub nt: usize,
    pub norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormStudy {
    pub case: NormCase,
    pub beta: Option<f64>,
    pub levels: Vec<NormLevel>,
    /// The limit when the norm is finite, `None` when it diverges.
    pub analytic: Option<f64>,
}

impl NormStudy {
    pub fn finest(&self) -> Option<&NormLevel> {
        self.levels.last()
    }

    /// Relative error of the finest level against the limit.
    pub fn relative_error(&self) -> Option<f64> {
        let a = self.analytic?;
        Some((self.finest()?.norm_sq - a).abs() / a.abs())
    }

    pub fn strictly_increasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].norm_sq > w[0].norm_sq)
    }

    /// `level,nx,nt,norm_sq,analytic` rows; `analytic` is `inf` for divergent cases.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,nx,nt,norm_sq,analytic\n");
        for l in &self.levels {
            let a = self.analytic.unwrap_or(f64::INFINITY);
            let _ = writeln!(s, "{},{},{},{:.12e},{:.12e}", l.level, l.nx, l.nt, l.norm_sq, a);
        }
        s
    }
}

/// Discrete squared `L²` norms on midpoint grids at refinement levels
/// `0..levels`. Level `ℓ` uses `16·2^ℓ` cells in `x`; in `t` it uses `64·4^ℓ`
/// cells for the exp-power cases and a fixed 256 for `ex1_uhat`.
///
/// Midpoint nodes never hit `x = 1/2` or `t = 1`, where the integrands blow up.
pub fn example_norms(case: NormCase, beta: Option<f64>, levels: usize) -> Result<NormStudy> {
    let (scene, x_max, beta) = match case {
        NormCase::Ex1Uhat => (SeparableScene1D::transport(), 1.0, None),
        NormCase::Ex2U | NormCase::Ex2Uhat => {
            let b = beta.ok_or(Error::InvalidParameter { name: "beta", value: f64::NAN })?;
            (SeparableScene1D::exp_power(b)?, 0.25, Some(b))
        }
    };
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let nx = 16usize << level;
        let nt = match case {
            NormCase::Ex1Uhat => 256,
            _ => 64usize << (2 * level),
        };
        let (hx, ht) = (x_max / nx as f64, 1.0 / nt as f64);
        let mut sum = 0.0;
        for j in 0..nt {
            let t = (j as f64 + 0.5) * ht;
            let mut row = 0.0;
            for i in 0..nx {
                let x = (i as f64 + 0.5) * hx;
                let v = match case {
                    NormCase::Ex2U => ofe_flow_1d(&scene, x, t)?,
                    _ => ofe_primitive_1d(&scene, x, t)?,
                };
                row += v * v;
            }
            sum += row;
        }
        out.push(NormLevel { level, nx, nt, norm_sq: sum * hx * ht });
    }
    let c = c_constant();
    let analytic = match (case, beta) {
        (NormCase::Ex2U, Some(b)) if b > 0.5 => Some(c / (2.0 * b - 1.0)),
        (NormCase::Ex2Uhat, Some(b)) => Some(c / (b * b) * (1.0 / (2.0 * b + 1.0) - 2.0 / (b + 1.0) + 1.0)),
        _ => None,
    };
    Ok(NormStudy { case, beta, levels: out, analytic })
}

/// `α/(α + π⁴(m² + n²)n²)`: the share of mode `(m, n)` carried by `Û1`.
pub fn transfer_ratio(alpha: f64, m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    let p4 = PI * PI * PI * PI;
    alpha / (alpha + p4 * (m * m + n * n) * n * n)
}

/// Panels of the coefficient quadrature.
pub const COEFFICIENT_PANELS: usize = 4096;

/// Truncated double series for `Û1`, `Û2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierModel1D {
    /// `f_m`, `m = 0..=m_max`.
    pub f_m: Vec<f64>,
    /// `ĝ_n`, `n = 1..=n_max`, stored at index `n - 1`.
    pub g_hat: Vec<f64>,
    pub alpha: f64,
    u1: Vec<f64>,
    u2: Vec<f64>,
}

impl FourierModel1D {
    /// Builds the split from given coefficients.
    pub fn with_coefficients(f_m: Vec<f64>, g_hat: Vec<f64>, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter { name: "alpha", value: alpha });
        }
        if let Some(&bad) = f_m.iter().chain(&g_hat).find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "coefficient", value: bad });
        }
        let nn = g_hat.len();
        let mut u1 = vec![0.0; f_m.len() * nn];
        let mut u2 = vec![0.0; f_m.len() * nn];
        for (m, fm) in f_m.iter().enumerate() {
            for (k, gn) in g_hat.iter().enumerate() {
                let total = -fm * gn;
                let a = transfer_ratio(alpha, m, k + 1) * total;
                u1[m * nn + k] = a;
                u2[m * nn + k] = total - a;
            }
        }
        Ok(Self { f_m, g_hat, alpha, u1, u2 })
    }

    pub fn m_max(&self) -> usize {
        self.f_m.len() - 1
    }

    pub fn n_max(&self) -> usize {
        self.g_hat.len()
    }

    /// `Û1_mn`, `n ≥ 1`.
    pub fn u1(&self, m: usize, n: usize) -> f64 {
        self.u1[m * self.g_hat.len() + n - 1]
    }

    pub fn u2(&self, m: usize, n: usize) -> f64 {
        self.u2[m * self.g_hat.len() + n - 1]
    }

    fn synth(&self, c: &[f64], x: f64, t: f64) -> f64 {
        let nn = self.g_hat.len();
        let mut s = 0.0;
        for m in 0..self.f_m.len() {
            let cx = cos(m as f64 * PI * x);
            for k in 0..nn {
                s += c[m * nn + k] * cx * sin((k + 1) as f64 * PI * t);
            }
        }
        s
    }

    pub fn synthesize_u1(&self, x: f64, t: f64) -> f64 {
        self.synth(&self.u1, x, t)
    }

    pub fn synthesize_u2(&self, x: f64, t: f64) -> f64 {
        self.synth(&self.u2, x, t)
    }

    /// `Û1` on the node grid of [`oracle_decompose_1d`].
    pub fn sample_u1(&self, nx: usize, nt: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(nx * nt);
        for j in 0..nt {
            let t = j as f64 / (nt - 1) as f64;
            for i in 0..nx {
                out.push(self.synthesize_u1(i as f64 / (nx - 1) as f64, t));
            }
        }
        out
    }
}

/// Coefficients by composite Simpson quadrature, then the modal split.
pub fn fourier_decompose(scene: &SeparableScene1D, alpha: f64, m_max: usize, n_max: usize) -> Result<FourierModel1D> {
    let mut hs = Vec::with_capacity(COEFFICIENT_PANELS + 1);
    let dx = 1.0 / COEFFICIENT_PANELS as f64;
    for i in 0..=COEFFICIENT_PANELS {
        let h = scene
            .profile
            .inv_log_slope(i as f64 * dx)
            .ok_or(Error::NonIntegrable("1/∂ₓ log f̃"))?;
        if !h.is_finite() {
            return Err(Error::NonIntegrable("1/∂ₓ log f̃"));
        }
        hs.push(h);
    }
    let mut ls = Vec::with_capacity(COEFFICIENT_PANELS + 1);
    for i in 0..=COEFFICIENT_PANELS {
        let l = scene
            .illumination
            .log_ratio(i as f64 * dx)
            .ok_or(Error::NonIntegrable("log g"))?;
        if !l.is_finite() {
            return Err(Error::NonIntegrable("log g"));
        }
        ls.push(l);
    }
    // Simpson weights on the tabulated nodes
    let tabulated = |v: &[f64], k: f64, basis: fn(f64) -> f64| {
        let mut s = 0.0;
        for (i, vi) in v.iter().enumerate() {
            let w = if i == 0 || i == COEFFICIENT_PANELS {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * vi * basis(k * PI * i as f64 * dx);
        }
        s * dx / 3.0
    };
    let f_m = (0..=m_max)
        .map(|m| {
            let c = tabulated(&hs, m as f64, cos);
            if m == 0 { c } else { 2.0 * c }
        })
        .collect();
    let g_hat = (1..=n_max).map(|n| 2.0 * tabulated(&ls, n as f64, sin)).collect();
    FourierModel1D::with_coefficients(f_m, g_hat, alpha)
}

/// Direct discrete solution of the model problem.
///
/// Nodes `x_i = i/(nx-1)`, `t_j = j/(nt-1)`, with `Û1 = 0` on the first and last
/// time rows. Discrete objective:
///
/// * `∂ₓₜ`: one mixed difference per grid cell, weight `hx·ht`;
/// * `∂ₜₜ`: the three-point second difference on interior time rows,
///   trapezoid weight in `x`;
/// * data: trapezoid weights in both variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle1D {
    pub nx: usize,
    pub nt: usize,
    /// `Û1` at node `(i, j)`, index `j·nx + i`.
    pub u1: Vec<f64>,
    /// `Û2 = -q - Û1`.
    pub u2: Vec<f64>,
}

impl Oracle1D {
    pub fn u1_at(&self, i: usize, j: usize) -> f64 {
        self.u1[j * self.nx + i]
    }
}

/// Symmetric band matrix, lower band stored row by row.
struct BandSpd {
    n: usize,
    bw: usize,
    // a[i * (bw + 1) + (i - j)] holds A[i][j] for i - bw ≤ j ≤ i
    a: Vec<f64>,
}

impl BandSpd {
    fn new(n: usize, bw: usize) -> Self {
        Self { n, bw, a: vec![0.0; n * (bw + 1)] }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.bw);
        self.a[i * (self.bw + 1) + (i - j)] += v;
    }

    /// Adds `w·ccᵀ` for a sparse coefficient vector.
    fn add_outer(&mut self, terms: &[(usize, f64)], w: f64) {
        for &(i, a) in terms {
            for &(j, b) in terms {
                if i >= j {
                    self.add(i, j, w * a * b);
                }
            }
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.bw + 1) + (i - j)]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * (self.bw + 1) + (i - j)]
    }

    /// In-place banded Cholesky, then solves `A x = b`.
    fn solve(mut self, mut b: Vec<f64>) -> Result<Vec<f64>> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = self.at(i, j);
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= self.at(i, k) * self.at(j, k);
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::SingularSystem { pivot: i });
                    }
                    *self.at_mut(i, i) = sqrt(s);
                } else {
                    *self.at_mut(i, j) = s / self.at(j, j);
                }
            }
        }
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.at(i, k) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.at(k, i) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
        Ok(b)
    }
}

/// Minimizes the discrete model objective by a banded Cholesky solve of its
/// normal equations. `nx ≥ 2`, `nt ≥ 3`.
pub fn oracle_decompose_1d(scene: &SeparableScene1D, alpha: f64, nx: usize, nt: usize) -> Result<Oracle1D> {
    if nx < 2 {
        return Err(Error::InvalidParameter { name: "nx", value: nx as f64 });
    }
    if nt < 3 {
        return Err(Error::InvalidParameter { name: "nt", value: nt as f64 });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter { name: "alpha", value: alpha });
    }
    let (hx, ht) = (1.0 / (nx - 1) as f64, 1.0 / (nt - 1) as f64);
    let mut q = vec![0.0; nx * nt];
    for j in 0..nt {
        for i in 0..nx {
            q[j * nx + i] = scene.target(i as f64 * hx, j as f64 * ht)?;
        }
    }
    let trap = |k: usize, n: usize, h: f64| if k == 0 || k == n - 1 { 0.5 * h } else { h };

    // unknowns: interior time rows j = 1..nt-2
    let rows = nt - 2;
    let unknown = |i: usize, j: usize| -> Option<usize> {
        (j >= 1 && j <= rows).then(|| (j - 1) * nx + i)
    };
    let mut a = BandSpd::new(nx * rows, 2 * nx);
    let mut rhs = vec![0.0; nx * rows];
    let mut terms: Vec<(usize, f64)> = Vec::with_capacity(4);

    let cell = 1.0 / (hx * ht);
    for j in 0..nt - 1 {
        for i in 0..nx - 1 {
            terms.clear();
            for (di, dj, s) in [(1, 1, 1.0), (0, 1, -1.0), (1, 0, -1.0), (0, 0, 1.0)] {
                if let Some(k) = unknown(i + di, j + dj) {
                    terms.push((k, s * cell));
                }
            }
            a.add_outer(&terms, hx * ht);
        }
    }
    let tt = 1.0 / (ht * ht);
    for j in 1..nt - 1 {
        for i in 0..nx {
            terms.clear();
            for (dj, s) in [(-1isize, 1.0), (0, -2.0), (1, 1.0)] {
                if let Some(k) = unknown(i, (j as isize + dj) as usize) {
                    terms.push((k, s * tt));
                }
            }
            a.add_outer(&terms, trap(i, nx, hx) * ht);
        }
    }
    for j in 1..nt - 1 {
        for i in 0..nx {
            let k = unknown(i, j).expect("interior row");
            let w = alpha * trap(i, nx, hx) * trap(j, nt, ht);
            a.add(k, k, w);
            rhs[k] = -w * q[j * nx + i];
        }
    }
    let sol = a.solve(rhs)?;
    let mut u1 = vec![0.0; nx * nt];
    u1[nx..nx * (nt - 1)].copy_from_slice(&sol);
    let u2 = q.iter().zip(&u1).map(|(q, u)| -q - u).collect();
    Ok(Oracle1D { nx, nt, u1, u2 })
}

/// Trapezoid-weighted relative `L²` distance of `a` from `reference` on the
/// oracle node grid.
pub fn relative_l2(a: &[f64], reference: &[f64], nx: usize, nt: usize) -> f64 {
    let w = |k: usize, n: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..nt {
        for i in 0..nx {
            let ww = w(i, nx) * w(j, nt);
            let (x, r) = (a[j * nx + i], reference[j * nx + i]);
            num += ww * (x - r) * (x - r);
            den += ww * r * r;
        }
    }
    sqrt(num / den)
}
