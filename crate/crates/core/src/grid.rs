//! Sampled space-time fields on the unit cube and the solver configuration.
//!
//! Samples sit on the closed cube `[0,1]^3`: node `(r, s, t)` (0-based here,
//! 1-based in messages and file names) is at `(r·Δx, s·Δy, t·Δt)` with
//! `Δx = 1/(M-1)` and so on. Storage is row-major with `r` fastest and `t`
//! slowest. Every quadrature in the crate is the plain Riemann sum with weight
//! `Δx·Δy·Δt` at every node, boundary nodes included.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Sample counts along `x₁`, `x₂` and `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    m: usize,
    n: usize,
    t: usize,
}

impl GridSpec {
    /// Central differences need an interior, so every axis needs at least 3 samples.
    pub fn new(m: usize, n: usize, t: usize) -> Result<Self> {
        for (axis, len) in [('M', m), ('N', n), ('T', t)] {
            if len < 3 {
                return Err(Error::GridTooSmall { axis, len });
            }
        }
        Ok(Self { m, n, t })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.m - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.t - 1) as f64
    }

    /// Quadrature weight of a single node.
    pub fn cell_volume(&self) -> f64 {
        self.dx() * self.dy() * self.dt()
    }

    pub fn len(&self) -> usize {
        self.m * self.n * self.t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of samples in one temporal slice.
    pub fn slice_len(&self) -> usize {
        self.m * self.n
    }

    #[inline]
    pub fn index(&self, r: usize, s: usize, t: usize) -> usize {
        debug_assert!(r < self.m && s < self.n && t < self.t);
        (t * self.n + s) * self.m + r
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let r = idx % self.m;
        let s = (idx / self.m) % self.n;
        let t = idx / self.slice_len();
        (r, s, t)
    }

    /// Physical coordinates `(x, y, t)` of a node.
    #[inline]
    pub fn coords(&self, r: usize, s: usize, t: usize) -> (f64, f64, f64) {
        (
            r as f64 * self.dx(),
            s as f64 * self.dy(),
            t as f64 * self.dt(),
        )
    }
}

/// A real-valued sample per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3 {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField3 {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    /// Wraps raw samples, rejecting wrong lengths and non-finite values.
    pub fn from_vec(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            let (r, s, t) = grid.unravel(idx);
            return Err(Error::NonFinite {
                r: r + 1,
                s: s + 1,
                t: t + 1,
            });
        }
        Ok(Self { grid, data })
    }

    /// Builds a field without validation; used internally where finiteness is
    /// guaranteed by construction or checked afterwards.
    pub(crate) fn from_raw(grid: GridSpec, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    /// Evaluates `f(x, y, t)` at every node. No interpolation is involved.
    pub fn sample<F>(grid: GridSpec, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, f64, f64) -> f64,
    {
        let mut data = Vec::with_capacity(grid.len());
        for t in 0..grid.t() {
            for s in 0..grid.n() {
                for r in 0..grid.m() {
                    let (x, y, tt) = grid.coords(r, s, t);
                    let v = f(x, y, tt);
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            r: r + 1,
                            s: s + 1,
                            t: t + 1,
                        });
                    }
                    data.push(v);
                }
            }
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, s: usize, t: usize) -> f64 {
        self.data[self.grid.index(r, s, t)]
    }

    #[inline]
    pub fn set(&mut self, r: usize, s: usize, t: usize, v: f64) {
        let idx = self.grid.index(r, s, t);
        self.data[idx] = v;
    }

    /// One temporal slice (0-based `t`), `r` fastest.
    pub fn slice(&self, t: usize) -> &[f64] {
        let len = self.grid.slice_len();
        &self.data[t * len..(t + 1) * len]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `Δx·Δy·Δt·Σ v²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.cell_volume() * sum_sq(&self.data)
    }

    /// Quadrature inner product `Δx·Δy·Δt·Σ a·b`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        Ok(self.grid.cell_volume() * s)
    }

    /// Plain Euclidean norm of the sample vector (no quadrature weight).
    pub fn euclidean_norm(&self) -> f64 {
        crate::math::sqrt(sum_sq(&self.data))
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub(crate) fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

pub(crate) fn sum_sq(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum()
}

/// Three channels (along `x₁`, `x₂`, `t`) on one grid, e.g. the discrete
/// space-time gradient of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    channels: [ScalarField3; 3],
}

impl VectorField3 {
    pub fn new(d1: ScalarField3, d2: ScalarField3, dt: ScalarField3) -> Result<Self> {
        d1.check_grid(&d2)?;
        d1.check_grid(&dt)?;
        Ok(Self {
            channels: [d1, d2, dt],
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            channels: [
                ScalarField3::zeros(grid),
                ScalarField3::zeros(grid),
                ScalarField3::zeros(grid),
            ],
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.channels[0].grid()
    }

    /// Channel `0` is along `x₁`, `1` along `x₂`, `2` along `t`.
    pub fn channel(&self, axis: usize) -> &ScalarField3 {
        &self.channels[axis]
    }

    pub fn channel_mut(&mut self, axis: usize) -> &mut ScalarField3 {
        &mut self.channels[axis]
    }

    pub fn into_channels(self) -> [ScalarField3; 3] {
        self.channels
    }

    /// Quadrature inner product summed over channels.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        let mut acc = 0.0;
        for (a, b) in self.channels.iter().zip(&other.channels) {
            acc += a.inner(b)?;
        }
        Ok(acc)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.channels.iter().map(ScalarField3::l2_norm_sq).sum()
    }
}

/// One flow module `u⁽ⁱ⁾ = (u⁽ⁱ⁾₁, u⁽ⁱ⁾₂)` over space-time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowComponent {
    channels: [ScalarField3; 2],
}

impl FlowComponent {
    pub fn new(u1: ScalarField3, u2: ScalarField3) -> Result<Self> {
        u1.check_grid(&u2)?;
        Ok(Self {
            channels: [u1, u2],
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            channels: [ScalarField3::zeros(grid), ScalarField3::zeros(grid)],
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.channels[0].grid()
    }

    /// `j = 0` is the flow along `x₁`, `j = 1` along `x₂`.
    pub fn channel(&self, j: usize) -> &ScalarField3 {
        &self.channels[j]
    }

    pub fn channel_mut(&mut self, j: usize) -> &mut ScalarField3 {
        &mut self.channels[j]
    }

    pub fn channels(&self) -> &[ScalarField3; 2] {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut [ScalarField3; 2] {
        &mut self.channels
    }

    pub fn into_channels(self) -> [ScalarField3; 2] {
        self.channels
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.channels.iter().map(ScalarField3::l2_norm_sq).sum()
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        Ok(self.channels[0].inner(&other.channels[0])? + self.channels[1].inner(&other.channels[1])?)
    }

    /// Largest pointwise vector magnitude `|(u₁, u₂)|`.
    pub fn sup_magnitude(&self) -> f64 {
        self.channels[0]
            .data()
            .iter()
            .zip(self.channels[1].data())
            .fold(0.0, |m, (a, b)| m.max(crate::math::hypot(*a, *b)))
    }

    /// Mean pointwise vector magnitude.
    pub fn mean_magnitude(&self) -> f64 {
        let n = self.grid().len() as f64;
        self.channels[0]
            .data()
            .iter()
            .zip(self.channels[1].data())
            .map(|(a, b)| crate::math::hypot(*a, *b))
            .sum::<f64>()
            / n
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            channels: [self.channels[0].scaled(c), self.channels[1].scaled(c)],
        }
    }

    /// Pointwise sum `self + other`.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        let add = |a: &ScalarField3, b: &ScalarField3| -> Result<ScalarField3> {
            a.check_grid(b)?;
            Ok(ScalarField3::from_raw(
                a.grid(),
                a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
            ))
        };
        Ok(Self {
            channels: [
                add(&self.channels[0], &other.channels[0])?,
                add(&self.channels[1], &other.channels[1])?,
            ],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.channels.iter().all(ScalarField3::is_finite)
    }
}

/// A single 2D frame, `x` fastest. Used for synthetic patterns and the
/// two-frame baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Replicate-padded read.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc)
    }

    pub fn same_size(&self, other: &Self) -> Result<()> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(Error::SizeMismatch {
                a_width: self.width,
                a_height: self.height,
                b_width: other.width,
                b_height: other.height,
            })
        }
    }
}

/// How stencils read past the edge of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// `H(0) := H(1)`, `H(M+1) := H(M)` along every axis.
    #[default]
    Replicate,
}

/// Every tunable of the fixed-point solver.
///
/// `eps_nu` belongs to the penalty `ν`; `eps_surrogate` regularizes the
/// surrogate matrix `A = (A₀ᵀA₀ + εI)^{1/2}`. They are unrelated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub eps_nu: f64,
    pub lambda: f64,
    pub dtau: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub eps_surrogate: f64,
    pub boundary: BoundaryPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 0.25,
            eps_nu: 0.01,
            lambda: 0.1,
            dtau: 1e-4,
            tol: 0.05,
            max_iter: 100,
            eps_surrogate: 1e-6,
            boundary: BoundaryPolicy::Replicate,
        }
    }
}

impl SolverConfig {
    pub fn with_alphas(alpha1: f64, alpha2: f64) -> Self {
        Self {
            alpha1,
            alpha2,
            ..Self::default()
        }
    }

    /// Ratio `α = α⁽²⁾/α⁽¹⁾`.
    pub fn alpha_ratio(&self) -> f64 {
        self.alpha2 / self.alpha1
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("lambda", self.lambda),
            ("dtau", self.dtau),
            ("tol", self.tol),
            ("eps_surrogate", self.eps_surrogate),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if !(self.eps_nu > 0.0 && self.eps_nu <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eps_nu",
                value: self.eps_nu,
            });
        }
        if self.tol >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "tol",
                value: self.tol,
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// Why the iteration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ToleranceReached,
    MaxIter,
}

/// Output of the decomposition solver (and of its single-component baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub u1: FlowComponent,
    pub u2: FlowComponent,
    /// Total energy after every sweep; `energy_history.len() == iterations`.
    pub energy_history: Vec<f64>,
    /// Data energy after every sweep.
    pub residual_history: Vec<f64>,
    /// Data energy of the final iterate.
    pub data_residual: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

impl DecompositionResult {
    /// `u1 + u2`.
    pub fn total_flow(&self) -> FlowComponent {
        self.u1
            .plus(&self.u2)
            .expect("solver output shares one grid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_small_grids() {
        assert_eq!(
            GridSpec::new(2, 2, 2),
            Err(Error::GridTooSmall { axis: 'M', len: 2 })
        );
        assert!(GridSpec::new(3, 3, 2).is_err());
        assert!(GridSpec::new(3, 3, 3).is_ok());
    }

    #[test]
    fn sample_zero_function() {
        let g = GridSpec::new(3, 3, 3).unwrap();
        let f = ScalarField3::sample(g, |_, _, _| 0.0).unwrap();
        assert!(f.data().iter().all(|&v| v == 0.0));
        assert_eq!(f.l2_norm_sq(), 0.0);
    }

    #[test]
    fn sample_separable_example() {
        // r=3 (1-based) on M=5 is x = 0.5; t=1 is t = 0.
        let g = GridSpec::new(5, 3, 3).unwrap();
        let f = ScalarField3::sample(g, |x, _, t| x * (1.0 - x) * (1.0 - t)).unwrap();
        assert_eq!(f.get(2, 0, 0), 0.25);
    }

    #[test]
    fn sample_reports_non_finite_location() {
        let g = GridSpec::new(3, 4, 3).unwrap();
        let err = ScalarField3::sample(g, |x, y, _| if x == 1.0 && y > 0.5 { f64::NAN } else { 0.0 })
            .unwrap_err();
        assert_eq!(err, Error::NonFinite { r: 3, s: 3, t: 1 });
    }

    #[test]
    fn constant_norm_close_to_unit_volume() {
        for (m, n, t) in [(3, 3, 3), (8, 5, 6), (33, 17, 9)] {
            let g = GridSpec::new(m, n, t).unwrap();
            let one = ScalarField3::constant(g, 1.0);
            let bound = 3.0 * (g.dx() + g.dy() + g.dt());
            assert!((one.l2_norm_sq() - 1.0).abs() <= bound);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            tol: 1.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            alpha2: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            eps_nu: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn index_roundtrip(m in 3usize..9, n in 3usize..9, t in 3usize..7, seed in 0usize..10_000) {
            let g = GridSpec::new(m, n, t).unwrap();
            let idx = seed % g.len();
            let (r, s, tt) = g.unravel(idx);
            prop_assert_eq!(g.index(r, s, tt), idx);
            let (x, y, z) = g.coords(r, s, tt);
            prop_assert_eq!((x / g.dx()).round() as usize, r);
            prop_assert_eq!((y / g.dy()).round() as usize, s);
            prop_assert_eq!((z / g.dt()).round() as usize, tt);
        }

        #[test]
        fn norm_is_quadratic(c in -10.0f64..10.0, vals in proptest::collection::vec(-5.0f64..5.0, 27)) {
            let g = GridSpec::new(3, 3, 3).unwrap();
            let f = ScalarField3::from_vec(g, vals).unwrap();
            let lhs = f.scaled(c).l2_norm_sq();
            let rhs = c * c * f.l2_norm_sq();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn trilinear_sampling_exact(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0) {
            let g = GridSpec::new(5, 4, 3).unwrap();
            let fun = |x: f64, y: f64, t: f64| a + b * x + c * x * y + d * x * y * t;
            let f = ScalarField3::sample(g, fun).unwrap();
            for t in 0..3 { for s in 0..4 { for r in 0..5 {
                let (x, y, tt) = g.coords(r, s, t);
                prop_assert_eq!(f.get(r, s, t), fun(x, y, tt));
            }}}
        }
    }
}
