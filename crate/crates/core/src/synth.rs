//! Deterministic synthetic sequences: separable 1D scenes, a rotating
//! textured disc, a square over an oscillating background, and flicker.
//!
//! Every generator returns values in `[0, 1]` and is a pure function of its
//! arguments (textures come from a seeded ChaCha8 stream).

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic1d::SeparableScene1D;
use crate::error::{Error, Result};
use crate::grid::{Frame, GridSpec, ScalarField3};
use crate::math::{cos, exp, floor, hypot, sin, PI};

/// Intensity of blank flicker frames.
pub const BLANK_LEVEL: f64 = 0.5;

/// Spatial axis along which a 1D profile is held constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrude {
    /// Profile varies with `x₁`, constant in `x₂`.
    AlongX2,
    /// Profile varies with `x₂`, constant in `x₁`.
    AlongX1,
}

/// Axis-aligned pixel rectangle `[x0, x0 + w) × [y0, y0 + h)`; may extend past
/// the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: isize,
    pub y0: isize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let (x, y) = (x as isize, y as isize);
        x >= self.x0 && y >= self.y0 && x < self.x0 + self.w as isize && y < self.y0 + self.h as isize
    }

    /// Grows (`r > 0`) or shrinks (`r < 0`) by `r` pixels on every side.
    pub fn dilate(&self, r: isize) -> Self {
        let w = (self.w as isize + 2 * r).max(0) as usize;
        let h = (self.h as isize + 2 * r).max(0) as usize;
        Self { x0: self.x0 - r, y0: self.y0 - r, w, h }
    }

    pub fn inside(&self, width: usize, height: usize) -> bool {
        self.x0 >= 0 && self.y0 >= 0 && self.x0 as usize + self.w <= width && self.y0 as usize + self.h <= height
    }
}

/// `f̃(x) g(t)` sampled on the grid and extruded along the other axis.
/// Values are rescaled into `[0, 1]` only when they fall outside it.
pub fn gen_separable(grid: GridSpec, scene: &SeparableScene1D, extrude: Extrude) -> Result<ScalarField3> {
    let f = ScalarField3::sample(grid, |x, y, t| {
        let s = match extrude {
            Extrude::AlongX2 => x,
            Extrude::AlongX1 => y,
        };
        scene.profile.value(s) * scene.illumination.value(t).unwrap_or(f64::NAN)
    })?;
    let (lo, hi) = f.min_max();
    if lo >= 0.0 && hi <= 1.0 {
        return Ok(f);
    }
    let span = hi - lo;
    Ok(if span > 0.0 { f.map(|v| (v - lo) / span) } else { f.map(|_| 0.0) })
}

/// Bilinear sample with replicate padding.
pub fn bilinear(frame: &Frame, x: f64, y: f64) -> f64 {
    let (x0, y0) = (floor(x), floor(y));
    let (fx, fy) = (x - x0, y - y0);
    let (xi, yi) = (x0 as isize, y0 as isize);
    let a = frame.get_clamped(xi, yi);
    let b = frame.get_clamped(xi + 1, yi);
    let c = frame.get_clamped(xi, yi + 1);
    let d = frame.get_clamped(xi + 1, yi + 1);
    (a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy
}

fn disc_radius(w: usize, h: usize) -> f64 {
    0.5 * (w.min(h) - 1) as f64
}

/// `pattern` rotated counter-clockwise by `angle` about the frame center.
/// Pixels outside the inscribed disc are 0.
pub fn rotate_pattern(pattern: &Frame, angle: f64) -> Frame {
    let (w, h) = (pattern.width(), pattern.height());
    let (cx, cy) = (0.5 * (w - 1) as f64, 0.5 * (h - 1) as f64);
    let r = disc_radius(w, h);
    let (c, s) = (cos(angle), sin(angle));
    Frame::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        if hypot(dx, dy) > r {
            return 0.0;
        }
        // inverse rotation
        let sx = c * dx + s * dy + cx;
        let sy = -s * dx + c * dy + cy;
        bilinear(pattern, sx, sy)
    })
}

/// Smooth random texture confined to the inscribed disc, values in `[0.15, 0.85]`.
pub fn disc_texture(w: usize, h: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            let th = rng.gen_range(0.0..2.0 * PI);
            let k = rng.gen_range(1.5..4.0) * 2.0 * PI / w.min(h) as f64;
            (k * cos(th), k * sin(th), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let (cx, cy) = (0.5 * (w - 1) as f64, 0.5 * (h - 1) as f64);
    let r = disc_radius(w, h);
    Frame::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        if hypot(dx, dy) > r {
            return 0.0;
        }
        let s: f64 = waves.iter().map(|&(kx, ky, p)| sin(kx * dx + ky * dy + p)).sum();
        (0.5 + 0.12 * s).clamp(0.15, 0.85)
    })
}

/// Frame `t` (0-based) is `pattern` rotated by `2πk·t·Δt`, so `k` full turns
/// fit in the unit time interval.
pub fn gen_periodic_motion(grid: GridSpec, pattern: &Frame, k: u32) -> Result<ScalarField3> {
    if k == 0 {
        return Err(Error::InvalidParameter { name: "freq_multiplier", value: 0.0 });
    }
    check_frame(grid, pattern)?;
    let mut data = Vec::with_capacity(grid.len());
    for t in 0..grid.t() {
        let angle = 2.0 * PI * k as f64 * t as f64 * grid.dt();
        data.extend_from_slice(rotate_pattern(pattern, angle).data());
    }
    ScalarField3::from_vec(grid, data)
}

/// Grid for `k` periods of `frames_per_period` frames each, with the closing
/// frame of the last period included: `T = k·frames_per_period + 1`.
pub fn periodic_grid(size: usize, frames_per_period: usize, k: u32) -> Result<GridSpec> {
    GridSpec::new(size, size, frames_per_period * k as usize + 1)
}

fn check_frame(grid: GridSpec, f: &Frame) -> Result<()> {
    if f.width() != grid.m() || f.height() != grid.n() {
        return Err(Error::SizeMismatch {
            a_width: grid.m(),
            a_height: grid.n(),
            b_width: f.width(),
            b_height: f.height(),
        });
    }
    Ok(())
}

/// Sparse field of soft dots on a mid-gray base, periodic with period `size`
/// in both directions so it can be translated without edge effects.
struct DotTexture {
    dots: Vec<(f64, f64, f64)>,
    period: f64,
    sigma: f64,
}

impl DotTexture {
    fn new(size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (size * size) / 40;
        let dots = (0..n.max(4))
            .map(|_| {
                (
                    rng.gen_range(0.0..size as f64),
                    rng.gen_range(0.0..size as f64),
                    rng.gen_range(-0.25..0.25),
                )
            })
            .collect();
        Self { dots, period: size as f64, sigma: 1.2 }
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        let p = self.period;
        let mut v = 0.35;
        for &(dx, dy, a) in &self.dots {
            let mut ex = (x - dx) % p;
            let mut ey = (y - dy) % p;
            if ex > 0.5 * p {
                ex -= p;
            } else if ex < -0.5 * p {
                ex += p;
            }
            if ey > 0.5 * p {
                ey -= p;
            } else if ey < -0.5 * p {
                ey += p;
            }
            let r2 = ex * ex + ey * ey;
            if r2 < 16.0 * self.sigma * self.sigma {
                v += a * exp(-r2 / (2.0 * self.sigma * self.sigma));
            }
        }
        v.clamp(0.0, 0.7)
    }
}

/// Output of [`gen_square_over_oscillating_bg`].
#[derive(Debug, Clone, PartialEq)]
pub struct SquareScene {
    pub field: ScalarField3,
    /// Square footprint in every frame.
    pub squares: Vec<Rect>,
    /// The square left the frame in at least one frame.
    pub clipped: bool,
}

impl SquareScene {
    /// Pixel lies at least two pixels inside the square in frame `t`.
    pub fn in_square(&self, x: usize, y: usize, t: usize) -> bool {
        self.squares[t].dilate(-2).contains(x, y)
    }

    /// Pixel lies more than half a side away from the square in frame `t`.
    /// The band in between is where the smooth component has to fall off.
    pub fn in_background(&self, x: usize, y: usize, t: usize) -> bool {
        let sq = self.squares[t];
        !sq.dilate((sq.w / 2) as isize).contains(x, y)
    }
}

/// Uniform bright square moving right at `square_speed` px/frame over a dotted
/// background that slides towards the top right by `bg_amplitude · width`
/// pixels per frame for the first half of each `bg_period` and back for the
/// second half (a symmetric sawtooth, i.e. zero mean drift).
pub fn gen_square_over_oscillating_bg(
    grid: GridSpec,
    square_speed: f64,
    bg_amplitude: f64,
    bg_period: usize,
    seed: u64,
) -> Result<SquareScene> {
    if !(0.0..=0.2).contains(&bg_amplitude) {
        return Err(Error::InvalidParameter { name: "bg_amplitude", value: bg_amplitude });
    }
    if bg_period < 2 {
        return Err(Error::InvalidParameter { name: "bg_period", value: bg_period as f64 });
    }
    if !square_speed.is_finite() {
        return Err(Error::InvalidParameter { name: "square_speed", value: square_speed });
    }
    let (w, h) = (grid.m(), grid.n());
    let tex = DotTexture::new(w.max(h), seed);
    let side = (w.min(h) / 4).max(2);
    let start_x = (w / 8) as f64;
    let y0 = ((h - side) / 2) as isize;
    let mut squares = Vec::with_capacity(grid.t());
    let mut clipped = false;
    let mut data = Vec::with_capacity(grid.len());
    for t in 0..grid.t() {
        let phase = t % bg_period;
        let shift = bg_amplitude * w as f64 * phase.min(bg_period - phase) as f64;
        let sq = Rect {
            x0: libm::round(start_x + square_speed * t as f64) as isize,
            y0,
            w: side,
            h: side,
        };
        clipped |= !sq.inside(w, h);
        squares.push(sq);
        for y in 0..h {
            for x in 0..w {
                // image rows grow downwards: "up and right" is (+s, -s)
                let v = if sq.contains(x, y) {
                    0.9
                } else {
                    tex.value(x as f64 - shift, y as f64 + shift)
                };
                data.push(v);
            }
        }
    }
    Ok(SquareScene { field: ScalarField3::from_vec(grid, data)?, squares, clipped })
}

/// The raw cycle `[frame1, blank, frame2, blank]` repeated `repeats` times and
/// linearly interpolated onto the `T` frames of `grid`, raw frame `i` sitting
/// at time `i/(R-1)` for `R = 4·repeats` raw frames.
pub fn gen_flicker(grid: GridSpec, frame1: &Frame, frame2: &Frame, repeats: usize) -> Result<ScalarField3> {
    frame1.same_size(frame2)?;
    check_frame(grid, frame1)?;
    if repeats == 0 {
        return Err(Error::InvalidParameter { name: "repeats", value: 0.0 });
    }
    let blank = Frame::constant(frame1.width(), frame1.height(), BLANK_LEVEL);
    let cycle = [frame1, &blank, frame2, &blank];
    let raw = 4 * repeats;
    let mut data = Vec::with_capacity(grid.len());
    for t in 0..grid.t() {
        let pos = t as f64 * grid.dt() * (raw - 1) as f64;
        let i = (floor(pos) as usize).min(raw - 2);
        let s = pos - i as f64;
        let (a, b) = (cycle[i % 4], cycle[(i + 1) % 4]);
        data.extend(a.data().iter().zip(b.data()).map(|(p, q)| (1.0 - s) * p + s * q));
    }
    ScalarField3::from_vec(grid, data)
}

/// Number of output frames that puts `per_segment` samples on every raw
/// segment: `per_segment·(4·repeats - 1) + 1`.
pub fn flicker_frame_count(repeats: usize, per_segment: usize) -> usize {
    per_segment * (4 * repeats - 1) + 1
}

/// A flicker pair: a faint texture around the blank level and a copy with one
/// rectangle replaced by a high-contrast pattern. Returns `(frame1, frame2,
/// changed_rect)`.
pub fn flicker_frames(w: usize, h: usize, seed: u64) -> (Frame, Frame, Rect) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p1: f64 = rng.gen_range(0.0..2.0 * PI);
    let p2: f64 = rng.gen_range(0.0..2.0 * PI);
    let k = 2.0 * PI / 8.0;
    let faint = Frame::from_fn(w, h, |x, y| {
        BLANK_LEVEL + 0.03 * sin(k * x as f64 * 0.5 + p1) * sin(k * y as f64 * 0.5 + p2)
    });
    let rect = Rect {
        x0: (w / 2) as isize,
        y0: (h / 4) as isize,
        w: (w / 4).max(1),
        h: (h / 4).max(1),
    };
    let mut changed = faint.clone();
    for y in 0..h {
        for x in 0..w {
            if rect.contains(x, y) {
                changed.set(x, y, BLANK_LEVEL + 0.4 * sin(k * x as f64 + p1) * sin(k * y as f64 + p2));
            }
        }
    }
    (faint, changed, rect)
}

/// A named test sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: &'static str,
    pub field: ScalarField3,
}

/// Small sequences (at most 64×64×16) used by the solver checks.
pub fn bundled_fixtures() -> Result<Vec<Fixture>> {
    let mut out = Vec::new();
    let sep = gen_separable(
        GridSpec::new(32, 32, 16)?,
        &SeparableScene1D::transport(),
        Extrude::AlongX2,
    )?;
    out.push(Fixture { name: "separable-transport", field: sep });

    let g = GridSpec::new(48, 48, 16)?;
    let rot = gen_periodic_motion(g, &disc_texture(48, 48, 7), 1)?;
    out.push(Fixture { name: "rotating-disc", field: rot });

    let sq = gen_square_over_oscillating_bg(GridSpec::new(64, 64, 16)?, 1.0, 0.05, 4, 11)?;
    out.push(Fixture { name: "square-over-bg", field: sq.field });

    let (f1, f2, _) = flicker_frames(64, 64, 3);
    let fl = gen_flicker(GridSpec::new(64, 64, flicker_frame_count(2, 2))?, &f1, &f2, 2)?;
    out.push(Fixture { name: "flicker", field: fl });
    Ok(out)
}
