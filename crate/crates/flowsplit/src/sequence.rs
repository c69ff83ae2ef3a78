//! Grayscale frame sequences (binary PGM or PNG) to and from [`ScalarField3`].

use std::io::Cursor;
use std::path::{Path, PathBuf};

use flowsplit_core::{GridSpec, ScalarField3};
use image::codecs::pnm::{GraymapHeader, PnmEncoder, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::error::{io_err, Error, Result};
use crate::report::write_atomic;

/// Sample depth used when writing frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

struct RawFrame {
    width: u32,
    height: u32,
    samples: Vec<u16>,
}

fn load(path: &Path) -> Result<RawFrame> {
    let img_err = |source| Error::Image { path: path.to_owned(), source };
    let img = ImageReader::open(path)
        .map_err(io_err(path))?
        .with_guessed_format()
        .map_err(io_err(path))?
        .decode()
        .map_err(img_err)?;
    let (width, height) = (img.width(), img.height());
    let samples = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u16::from).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw(),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_owned(),
                format: format!("{:?}", other.color()),
            })
        }
    };
    Ok(RawFrame { width, height, samples })
}

/// Reads frames in the given order and scales all intensities by one global
/// min-max map onto `[0, 1]`. A sequence with a single gray level maps to 0.
pub fn read_sequence<P: AsRef<Path>>(paths: &[P]) -> Result<ScalarField3> {
    if paths.len() < 3 {
        return Err(Error::TooFewFrames(paths.len()));
    }
    let frames = paths.iter().map(|p| load(p.as_ref())).collect::<Result<Vec<_>>>()?;
    let (w, h) = (frames[0].width, frames[0].height);
    for (index, f) in frames.iter().enumerate() {
        if (f.width, f.height) != (w, h) {
            return Err(Error::DimensionMismatch {
                index,
                width: f.width,
                height: f.height,
                expected_width: w,
                expected_height: h,
            });
        }
    }
    let all = frames.iter().flat_map(|f| f.samples.iter().copied());
    let (lo, hi) = all.fold((u16::MAX, 0), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let range = f64::from(hi) - f64::from(lo);
    let grid = GridSpec::new(w as usize, h as usize, frames.len())?;
    let data = frames
        .iter()
        .flat_map(|f| f.samples.iter())
        .map(|&v| if range > 0.0 { (f64::from(v) - f64::from(lo)) / range } else { 0.0 })
        .collect();
    Ok(ScalarField3::from_vec(grid, data)?)
}

/// `.pgm` and `.png` files of a directory, sorted by file name.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("pgm" | "png")) && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Binary (P5) PGM bytes of `values` in `[0, 1]`; out-of-range values are
/// clamped.
pub fn encode_pgm(values: &[f64], width: usize, height: usize, depth: BitDepth) -> Result<Vec<u8>> {
    let max = f64::from(depth.max_value());
    let q = |v: f64| (v.clamp(0.0, 1.0) * max).round() as u16;
    let (bytes, color): (Vec<u8>, _) = match depth {
        BitDepth::Eight => (values.iter().map(|&v| q(v) as u8).collect(), ExtendedColorType::L8),
        BitDepth::Sixteen => (
            values.iter().flat_map(|&v| q(v).to_ne_bytes()).collect(),
            ExtendedColorType::L16,
        ),
    };
    let mut out = Cursor::new(Vec::new());
    let header = GraymapHeader {
        encoding: SampleEncoding::Binary,
        width: width as u32,
        height: height as u32,
        maxwhite: depth.max_value(),
    };
    PnmEncoder::new(&mut out)
        .with_header(header.into())
        .write_image(&bytes, width as u32, height as u32, color)
        .map_err(|source| Error::Image { path: PathBuf::from("<pgm>"), source })?;
    Ok(out.into_inner())
}

/// Writes every time slice as `{prefix}{t:04}.pgm` inside `dir` and returns
/// the paths.
pub fn write_sequence(field: &ScalarField3, dir: impl AsRef<Path>, prefix: &str, depth: BitDepth) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let g = field.grid();
    let mut paths = Vec::with_capacity(g.t());
    for t in 0..g.t() {
        let path = dir.join(format!("{prefix}{t:04}.pgm"));
        write_atomic(&path, &encode_pgm(field.slice(t), g.m(), g.n(), depth)?)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_frames(dir: &Path, frames: &[Vec<f64>], w: usize, h: usize, depth: BitDepth) -> Vec<PathBuf> {
        frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let p = dir.join(format!("f{i}.pgm"));
                std::fs::write(&p, encode_pgm(f, w, h, depth).unwrap()).unwrap();
                p
            })
            .collect()
    }

    #[test]
    fn eight_bit_ramp_scales_linearly() {
        let dir = tempfile::tempdir().unwrap();
        let ramp: Vec<f64> = [0u8, 128, 255].repeat(3).iter().map(|&v| f64::from(v) / 255.0).collect();
        let paths = write_frames(dir.path(), &[ramp.clone(), ramp.clone(), ramp], 3, 3, BitDepth::Eight);
        let f = read_sequence(&paths).unwrap();
        assert_eq!(&f.slice(0)[..3], &[0.0, 128.0 / 255.0, 1.0]);
    }

    #[test]
    fn scaling_is_global() {
        let dir = tempfile::tempdir().unwrap();
        let a = vec![0.2; 9];
        let b = vec![0.6; 9];
        let paths = write_frames(dir.path(), &[a.clone(), b, a], 3, 3, BitDepth::Sixteen);
        let f = read_sequence(&paths).unwrap();
        assert!(f.slice(0).iter().all(|&v| v == 0.0));
        assert!(f.slice(1).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn black_sequence_maps_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let z = vec![0.0; 12];
        let paths = write_frames(dir.path(), &[z.clone(), z.clone(), z], 4, 3, BitDepth::Eight);
        assert!(read_sequence(&paths).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn input_errors() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_frames(dir.path(), &[vec![0.0; 9], vec![1.0; 9]], 3, 3, BitDepth::Eight);
        assert!(matches!(read_sequence(&a), Err(Error::TooFewFrames(2))));
        let odd = dir.path().join("odd.pgm");
        std::fs::write(&odd, encode_pgm(&[0.0; 12], 4, 3, BitDepth::Eight).unwrap()).unwrap();
        let paths = [a[0].clone(), a[1].clone(), odd];
        assert!(matches!(read_sequence(&paths), Err(Error::DimensionMismatch { index: 2, .. })));

        let rgb = dir.path().join("rgb.png");
        image::RgbImage::new(3, 3).save(&rgb).unwrap();
        let paths = [a[0].clone(), a[1].clone(), rgb];
        assert!(matches!(read_sequence(&paths), Err(Error::UnsupportedFormat { .. })));
    }

    #[test]
    fn png_frames_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let paths: Vec<_> = (0..3u8)
            .map(|i| {
                let p = dir.path().join(format!("{i}.png"));
                image::GrayImage::from_pixel(3, 3, image::Luma([i * 100])).save(&p).unwrap();
                p
            })
            .collect();
        let f = read_sequence(&paths).unwrap();
        assert_eq!(f.get(1, 1, 1), 0.5);
        assert_eq!(list_frames(dir.path()).unwrap(), paths);
    }

    #[test]
    fn rewrite_is_idempotent_up_to_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(5, 4, 3).unwrap();
        let f = ScalarField3::sample(g, |x, y, t| 0.5 + 0.45 * (7.0 * x + 3.0 * y - 2.0 * t).sin()).unwrap();
        for depth in [BitDepth::Eight, BitDepth::Sixteen] {
            let a = read_sequence(&write_sequence(&f, dir.path().join("a"), "f", depth).unwrap()).unwrap();
            let b = read_sequence(&write_sequence(&a, dir.path().join("b"), "f", depth).unwrap()).unwrap();
            let q = 1.0 / f64::from(depth.max_value());
            let worst = a.data().iter().zip(b.data()).map(|(p, r)| (p - r).abs()).fold(0.0, f64::max);
            assert!(worst <= q, "{depth:?}: {worst}");
        }
    }
}
