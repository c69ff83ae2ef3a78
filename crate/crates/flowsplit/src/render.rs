//! Flow visualization: color wheel and thresholded magnitude.

use std::f64::consts::PI;

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::error::Result;
use crate::flo::{FlowSlice, UNKNOWN};

/// HSV (all components in `[0, 1]`) to RGB in `[0, 1]`.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i as u8 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Hue of the flow vector as a fraction of the wheel: `atan2(v, u) / 2π`
/// in `[0, 1)`. Zero flow has hue 0.
pub fn flow_hue(u: f64, v: f64) -> f64 {
    (v.atan2(u) / (2.0 * PI)).rem_euclid(1.0)
}

/// Nearest-rank 99th percentile of the known magnitudes (0 if none).
pub fn auto_max_magnitude(slice: &FlowSlice) -> f64 {
    let mut m: Vec<f64> = slice.magnitudes().flatten().collect();
    if m.is_empty() {
        return 0.0;
    }
    m.sort_by(f64::total_cmp);
    let rank = ((0.99 * m.len() as f64).ceil() as usize).clamp(1, m.len());
    m[rank - 1]
}

fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Color coding: hue from direction, saturation `min(1, |w|/max)`, value 1.
/// Unknown pixels are black. `max_magnitude = None` uses
/// [`auto_max_magnitude`].
pub fn render_color(slice: &FlowSlice, max_magnitude: Option<f64>) -> RgbImage {
    let max = max_magnitude.unwrap_or_else(|| auto_max_magnitude(slice));
    RgbImage::from_fn(slice.width() as u32, slice.height() as u32, |x, y| {
        let uv = slice.get(x as usize, y as usize);
        if FlowSlice::is_unknown(uv) {
            return Rgb([0, 0, 0]);
        }
        let (u, v) = (uv[0] as f64, uv[1] as f64);
        let mag = u.hypot(v);
        let s = if max > 0.0 { (mag / max).min(1.0) } else { 0.0 };
        let [r, g, b] = hsv_to_rgb(flow_hue(u, v), s, 1.0);
        Rgb([to_u8(r), to_u8(g), to_u8(b)])
    })
}

/// Black where `|w| <= threshold` (and for unknown pixels), otherwise gray
/// proportional to `|w|` over the largest known magnitude in the slice.
pub fn render_magnitude(slice: &FlowSlice, threshold: f64) -> GrayImage {
    let mags: Vec<Option<f64>> = slice.magnitudes().collect();
    let max = mags.iter().flatten().copied().fold(0.0, f64::max);
    let w = slice.width();
    GrayImage::from_fn(w as u32, slice.height() as u32, |x, y| match mags[y as usize * w + x as usize] {
        Some(m) if m > threshold && max > 0.0 => Luma([to_u8(m / max)]),
        _ => Luma([0]),
    })
}

/// Zeroes `primary` wherever both it and `other` exceed `threshold` in
/// magnitude.
pub fn mask_common(primary: &FlowSlice, other: &FlowSlice, threshold: f64) -> Result<FlowSlice> {
    primary.same_size(other)?;
    let mut out = primary.clone();
    let both = primary.magnitudes().zip(other.magnitudes());
    for (i, (p, o)) in both.enumerate() {
        if matches!((p, o), (Some(p), Some(o)) if p > threshold && o > threshold) {
            out.set(i % primary.width(), i / primary.width(), [0.0, 0.0]);
        }
    }
    Ok(out)
}

/// Disc of unit-magnitude-at-the-rim radial vectors `(dx, dy)/r`, unknown
/// outside. Rendered with `max_magnitude = 1` it is the color wheel.
pub fn color_wheel_slice(size: usize) -> FlowSlice {
    let c = (size as f64 - 1.0) / 2.0;
    let r = size as f64 / 2.0 - 1.0;
    FlowSlice::from_fn(size, size, |x, y| {
        let (dx, dy) = ((x as f64 - c) / r, (y as f64 - c) / r);
        if dx * dx + dy * dy > 1.0 {
            [UNKNOWN, UNKNOWN]
        } else {
            [dx as f32, dy as f32]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rgb_hue(p: Rgb<u8>) -> (f64, f64) {
        let [r, g, b] = p.0.map(|c| c as f64 / 255.0);
        let (mx, mn) = (r.max(g).max(b), r.min(g).min(b));
        let d = mx - mn;
        let h = if d == 0.0 {
            0.0
        } else if mx == r {
            ((g - b) / d).rem_euclid(6.0)
        } else if mx == g {
            (b - r) / d + 2.0
        } else {
            (r - g) / d + 4.0
        };
        (h / 6.0, if mx > 0.0 { d / mx } else { 0.0 })
    }

    #[test]
    fn zero_flow_is_white() {
        let img = render_color(&FlowSlice::zeros(4, 3), None);
        assert!(img.pixels().all(|p| p.0 == [255, 255, 255]));
    }

    #[test]
    fn saturated_rightward_flow_is_red() {
        let s = FlowSlice::from_fn(3, 3, |_, _| [2.0, 0.0]);
        assert!(render_color(&s, Some(2.0)).pixels().all(|p| p.0 == [255, 0, 0]));
        assert!(render_color(&s, None).pixels().all(|p| p.0 == [255, 0, 0]));
    }

    #[test]
    fn unknown_is_black() {
        let mut s = FlowSlice::zeros(2, 1);
        s.set(0, 0, [UNKNOWN, 0.0]);
        let img = render_color(&s, Some(1.0));
        assert_eq!(img.get_pixel(0, 0).0, [0, 0, 0]);
        assert_eq!(img.get_pixel(1, 0).0, [255, 255, 255]);
    }

    #[test]
    fn percentile_ignores_outliers() {
        let s = FlowSlice::from_fn(10, 10, |x, y| if (x, y) == (0, 0) { [100.0, 0.0] } else { [0.0, (x + 10 * y) as f32 / 100.0] });
        // 99 values 0.01..=0.99 and one outlier: rank 99 is 0.99
        assert_eq!(auto_max_magnitude(&s), 0.99_f32 as f64);
        assert_eq!(auto_max_magnitude(&FlowSlice::from_fn(1, 1, |_, _| [UNKNOWN, 0.0])), 0.0);
    }

    #[test]
    fn magnitude_threshold() {
        assert!(render_magnitude(&FlowSlice::zeros(3, 3), 0.0).pixels().all(|p| p.0 == [0]));
        let weak = FlowSlice::from_fn(3, 3, |_, _| [0.17, 0.0]);
        assert!(render_magnitude(&weak, 0.18).pixels().all(|p| p.0 == [0]));
        let two = FlowSlice::from_fn(4, 1, |x, _| if x < 2 { [0.1, 0.0] } else { [0.0, 0.5] });
        let img = render_magnitude(&two, 0.18);
        let row: Vec<u8> = img.pixels().map(|p| p.0[0]).collect();
        assert_eq!(row, vec![0, 0, 255, 255]);
    }

    #[test]
    fn masking_common_support() {
        let p = FlowSlice::from_fn(4, 1, |x, _| [x as f32 * 0.2, 0.0]);
        assert_eq!(mask_common(&p, &FlowSlice::zeros(4, 1), 0.1).unwrap(), p);
        let m = mask_common(&p, &p, 0.1).unwrap();
        assert!(m.data().iter().all(|uv| uv[0] == 0.0));
        let disjoint = FlowSlice::from_fn(4, 1, |x, _| if x == 0 { [1.0, 0.0] } else { [0.0, 0.0] });
        assert_eq!(mask_common(&p, &disjoint, 0.1).unwrap(), p);
        assert!(mask_common(&p, &FlowSlice::zeros(3, 1), 0.1).is_err());
    }

    #[test]
    fn wheel_has_disc_shape() {
        let w = color_wheel_slice(16);
        assert!(FlowSlice::is_unknown(w.get(0, 0)));
        assert!(!FlowSlice::is_unknown(w.get(8, 8)));
        let img = render_color(&w, Some(1.0));
        assert_eq!(img.get_pixel(0, 0).0, [0, 0, 0]);
    }

    proptest! {
        #[test]
        fn hue_rotates_with_the_flow(k in 0usize..8, seed in 0u64..1000) {
            let phi = k as f64 * PI / 4.0 + 0.1;
            let base = FlowSlice::from_fn(8, 8, |x, y| {
                let a = (seed as f64) * 0.37 + x as f64 * 0.9 + y as f64 * 0.4;
                let r = 0.6 + 0.4 * ((x * 7 + y * 3) % 5) as f64 / 4.0;
                [(r * a.cos()) as f32, (r * a.sin()) as f32]
            });
            let rot = FlowSlice::from_fn(8, 8, |x, y| {
                let [u, v] = base.get(x, y).map(f64::from);
                [(u * phi.cos() - v * phi.sin()) as f32, (u * phi.sin() + v * phi.cos()) as f32]
            });
            let (a, b) = (render_color(&base, Some(1.0)), render_color(&rot, Some(1.0)));
            for (p, q) in a.pixels().zip(b.pixels()) {
                let ((h1, s1), (h2, _)) = (rgb_hue(*p), rgb_hue(*q));
                if s1 <= 0.5 {
                    continue;
                }
                let d = (h2 - h1 - phi / (2.0 * PI)).rem_euclid(1.0);
                prop_assert!(d.min(1.0 - d) <= 1.0 / 255.0, "hue shift off by {}", d.min(1.0 - d));
            }
        }
    }
}
