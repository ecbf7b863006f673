//! Grayscale images in [0, 1], portable graymap i/o, blur kernels, phantoms,
//! seeded noise and the SNR metric.

use crate::rng::SplitMix64;
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width} x {height}")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer has {actual} entries, expected {expected}")]
    PixelCount { expected: usize, actual: usize },
    #[error("pixel values must be finite")]
    NonFinitePixels,
    #[error("image dimensions disagree: {0} vs {1}")]
    DimensionMismatch(String, String),
    #[error("phantom dimensions must be at least 16 x 16, got {width} x {height}")]
    PhantomTooSmall { width: usize, height: usize },
    #[error("kernel size must be odd and positive, got {0}")]
    EvenKernelSize(usize),
    #[error("kernel width must be positive, got {0}")]
    NonPositiveKernelWidth(f64),
    #[error("noise standard deviation must be nonnegative, got {0}")]
    NegativeNoiseStd(f64),
    #[error("pgm parse error at byte {offset}: {message}")]
    PgmParse { offset: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Row-major grayscale image with pixels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImageError::PixelCount {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(ImageError::NonFinitePixels);
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Wraps a solver iterate as an image, clamping into [0, 1].
    pub fn from_vector_clamped(
        width: usize,
        height: usize,
        values: &[f64],
    ) -> Result<Self, ImageError> {
        let clamped: Vec<f64> = values.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self::new(width, height, clamped)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }
}

/// Normalized isotropic Gaussian kernel on a centered size x size grid,
/// `K(i, j) ~ exp(-(i^2 + j^2) / (2 width^2))`, entries summing to 1 exactly
/// after the final renormalization.
pub fn gaussian_kernel(size: usize, width: f64) -> Result<Vec<f64>, ImageError> {
    if size == 0 || size % 2 == 0 {
        return Err(ImageError::EvenKernelSize(size));
    }
    if !(width > 0.0) {
        return Err(ImageError::NonPositiveKernelWidth(width));
    }
    let h = (size / 2) as isize;
    let mut k = Vec::with_capacity(size * size);
    for i in -h..=h {
        for j in -h..=h {
            let d2 = (i * i + j * j) as f64;
            k.push((-d2 / (2.0 * width * width)).exp());
        }
    }
    let total: f64 = k.iter().sum();
    for v in k.iter_mut() {
        *v /= total;
    }
    Ok(k)
}

/// Deterministic piecewise-constant phantom: flat background, seeded
/// rectangles and disks, and one linear ramp band. Dimensions below 16 x 16
/// are rejected.
pub fn phantom_image(width: usize, height: usize, seed: u64) -> Result<ImageBuffer, ImageError> {
    if width < 16 || height < 16 {
        return Err(ImageError::PhantomTooSmall { width, height });
    }
    let mut rng = SplitMix64::new(seed ^ 0x9876_5432_10AB_CDEF);
    let mut px = vec![0.15f64; width * height];

    let grays = [0.95, 0.55, 0.75, 0.35, 0.85, 0.45];
    // Rectangles.
    for level in grays.iter().take(4) {
        let rw = (width as f64 * rng.uniform(0.15, 0.4)) as usize;
        let rh = (height as f64 * rng.uniform(0.15, 0.4)) as usize;
        let r0 = (rng.uniform(0.0, 1.0) * (height - rh) as f64) as usize;
        let c0 = (rng.uniform(0.0, 1.0) * (width - rw) as f64) as usize;
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                px[r * width + c] = *level;
            }
        }
    }
    // Disks.
    for level in grays.iter().skip(4) {
        let rad = rng.uniform(0.08, 0.2) * width.min(height) as f64;
        let cr = rng.uniform(rad, height as f64 - rad);
        let cc = rng.uniform(rad, width as f64 - rad);
        for r in 0..height {
            for c in 0..width {
                let dr = r as f64 - cr;
                let dc = c as f64 - cc;
                if dr * dr + dc * dc <= rad * rad {
                    px[r * width + c] = *level;
                }
            }
        }
    }
    // One horizontal ramp band near the bottom.
    let band_h = (height / 8).max(2);
    for r in height - band_h..height {
        for c in 0..width {
            px[r * width + c] = c as f64 / (width - 1) as f64;
        }
    }
    for v in px.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    ImageBuffer::new(width, height, px)
}

/// Zero-mean Gaussian samples from the pinned generator; exposed so the noise
/// statistics can be tested before clamping.
pub fn gaussian_noise_field(len: usize, std: f64, seed: u64) -> Result<Vec<f64>, ImageError> {
    if !(std >= 0.0) {
        return Err(ImageError::NegativeNoiseStd(std));
    }
    let mut rng = SplitMix64::new(seed);
    Ok((0..len).map(|_| std * rng.standard_normal()).collect())
}

/// Adds seeded i.i.d. Gaussian noise, then clamps into [0, 1].
pub fn add_noise(img: &ImageBuffer, std: f64, seed: u64) -> Result<ImageBuffer, ImageError> {
    let noise = gaussian_noise_field(img.pixels.len(), std, seed)?;
    let px: Vec<f64> = img
        .pixels
        .iter()
        .zip(&noise)
        .map(|(p, n)| (p + n).clamp(0.0, 1.0))
        .collect();
    ImageBuffer::new(img.width, img.height, px)
}

/// Signal-to-noise ratio in dB: `10 log10(|u - mean(u)|^2 / |u - u_star|^2)`
/// where `u` is the reference image. Returns +inf when the images coincide.
pub fn snr(u: &ImageBuffer, u_star: &ImageBuffer) -> Result<f64, ImageError> {
    if u.width != u_star.width || u.height != u_star.height {
        return Err(ImageError::DimensionMismatch(
            format!("{}x{}", u.width, u.height),
            format!("{}x{}", u_star.width, u_star.height),
        ));
    }
    let mean = u.mean();
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in u.pixels.iter().zip(&u_star.pixels) {
        num += (a - mean) * (a - mean);
        den += (a - b) * (a - b);
    }
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (num / den).log10())
}

/// SNR against a raw solver iterate without clamping, for per-iteration traces.
pub fn snr_vs_vector(u: &ImageBuffer, values: &[f64]) -> Option<f64> {
    if values.len() != u.pixels.len() {
        return None;
    }
    let mean = u.mean();
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in u.pixels.iter().zip(values) {
        num += (a - mean) * (a - mean);
        den += (a - b) * (a - b);
    }
    Some(if den == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (num / den).log10()
    })
}

// ---------------------------------------------------------------------------
// Portable graymap i/o. Load accepts binary P5 and ASCII P2 with
// maxval <= 65535 (two-byte samples are big-endian); save always writes P5
// with maxval 255, rounding and clamping.
// ---------------------------------------------------------------------------

struct PgmCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> PgmCursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ImageError> {
        Err(ImageError::PgmParse {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn read_unsigned(&mut self) -> Result<usize, ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: usize = 0;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((self.data[self.pos] - b'0') as usize))
                .ok_or(ImageError::PgmParse {
                    offset: self.pos,
                    message: "integer overflow".into(),
                })?;
            self.pos += 1;
        }
        if self.pos == start {
            return self.err("expected an unsigned integer");
        }
        Ok(value)
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageBuffer, ImageError> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|source| ImageError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_pgm(&data)
}

pub fn parse_pgm(data: &[u8]) -> Result<ImageBuffer, ImageError> {
    let mut cur = PgmCursor { data, pos: 0 };
    if data.len() < 2 {
        return cur.err("file too short for a magic number");
    }
    let magic = &data[0..2];
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => {
            return cur.err(format!(
                "unsupported magic {:?} (only P5 and P2 graymaps are accepted)",
                String::from_utf8_lossy(magic)
            ));
        }
    };
    cur.pos = 2;
    let width = cur.read_unsigned()?;
    let height = cur.read_unsigned()?;
    let maxval = cur.read_unsigned()?;
    if width == 0 || height == 0 {
        return cur.err("dimensions must be positive");
    }
    if maxval == 0 || maxval > 65535 {
        return cur.err(format!("maxval {maxval} outside 1..=65535"));
    }
    let count = width * height;
    let mut samples = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the payload.
        if cur.pos >= data.len() || !data[cur.pos].is_ascii_whitespace() {
            return cur.err("expected single whitespace before binary payload");
        }
        cur.pos += 1;
        let bytes_per = if maxval > 255 { 2 } else { 1 };
        let need = count * bytes_per;
        if data.len() < cur.pos + need {
            return Err(ImageError::PgmParse {
                offset: data.len(),
                message: format!(
                    "payload truncated: need {need} bytes, have {}",
                    data.len() - cur.pos
                ),
            });
        }
        for i in 0..count {
            let v = if bytes_per == 2 {
                let hi = data[cur.pos + 2 * i] as usize;
                let lo = data[cur.pos + 2 * i + 1] as usize;
                (hi << 8) | lo
            } else {
                data[cur.pos + i] as usize
            };
            if v > maxval {
                return Err(ImageError::PgmParse {
                    offset: cur.pos + i * bytes_per,
                    message: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            samples.push(v);
        }
    } else {
        for _ in 0..count {
            let v = cur.read_unsigned()?;
            if v > maxval {
                return Err(ImageError::PgmParse {
                    offset: cur.pos,
                    message: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            samples.push(v);
        }
    }
    let scale = maxval as f64;
    ImageBuffer::new(
        width,
        height,
        samples.into_iter().map(|v| v as f64 / scale).collect(),
    )
}

/// Writes binary P5 with maxval 255; pixels are scaled by 255, rounded and
/// clamped.
pub fn save_pgm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let bytes = encode_pgm(img);
    let mut file = fs::File::create(path).map_err(|source| ImageError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(&bytes).map_err(|source| ImageError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn encode_pgm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(
        img.pixels
            .iter()
            .map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_size_one_is_unit() {
        assert_eq!(gaussian_kernel(1, 3.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn kernel_17_5_sums_to_one() {
        let k = gaussian_kernel(17, 5.0).unwrap();
        assert_eq!(k.len(), 289);
        let s: f64 = k.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wide_kernel_is_flat() {
        let k = gaussian_kernel(3, 1000.0).unwrap();
        for v in &k {
            assert!((v - 1.0 / 9.0).abs() < 1e-6);
        }
    }

    #[test]
    fn even_kernel_size_rejected() {
        assert!(matches!(
            gaussian_kernel(4, 1.0),
            Err(ImageError::EvenKernelSize(4))
        ));
        assert!(matches!(
            gaussian_kernel(3, 0.0),
            Err(ImageError::NonPositiveKernelWidth(_))
        ));
    }

    #[test]
    fn phantom_is_deterministic_and_in_range() {
        let a = phantom_image(64, 64, 7).unwrap();
        let b = phantom_image(64, 64, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
        let c = phantom_image(64, 64, 8).unwrap();
        assert_ne!(a, c, "different seeds should place features differently");
    }

    #[test]
    fn phantom_has_at_least_three_gray_levels() {
        let img = phantom_image(64, 64, 0).unwrap();
        let mut levels: Vec<u64> = img.pixels().iter().map(|p| p.to_bits()).collect();
        levels.sort_unstable();
        levels.dedup();
        assert!(levels.len() >= 3, "found {} distinct levels", levels.len());
    }

    #[test]
    fn phantom_rejects_small_dims() {
        assert!(matches!(
            phantom_image(8, 64, 0),
            Err(ImageError::PhantomTooSmall { .. })
        ));
    }

    #[test]
    fn noise_zero_std_is_identity() {
        let img = phantom_image(32, 32, 3).unwrap();
        let noisy = add_noise(&img, 0.0, 42).unwrap();
        assert_eq!(img, noisy);
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let img = phantom_image(32, 32, 3).unwrap();
        let a = add_noise(&img, 0.01, 42).unwrap();
        let b = add_noise(&img, 0.01, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_field_statistics() {
        let n = 256 * 256;
        let std = 0.01;
        let field = gaussian_noise_field(n, std, 1234).unwrap();
        let mean = field.iter().sum::<f64>() / n as f64;
        let var = field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 * std / (n as f64).sqrt(), "mean {mean}");
        let sd = var.sqrt();
        assert!((0.009..=0.011).contains(&sd), "std {sd}");
    }

    #[test]
    fn snr_examples() {
        let img = phantom_image(32, 32, 1).unwrap();
        assert_eq!(snr(&img, &img).unwrap(), f64::INFINITY);

        let mean_img = ImageBuffer::constant(32, 32, img.mean()).unwrap();
        assert!(snr(&img, &mean_img).unwrap().abs() < 1e-12);

        let u = ImageBuffer::new(2, 1, vec![0.0, 1.0]).unwrap();
        let v = ImageBuffer::new(2, 1, vec![0.5, 0.5]).unwrap();
        assert!(snr(&u, &v).unwrap().abs() < 1e-12);
    }

    #[test]
    fn snr_rejects_dim_mismatch() {
        let a = ImageBuffer::constant(4, 4, 0.5).unwrap();
        let b = ImageBuffer::constant(4, 5, 0.5).unwrap();
        assert!(snr(&a, &b).is_err());
    }

    #[test]
    fn pgm_roundtrip_quantization_bound() {
        let img = phantom_image(24, 19, 9).unwrap();
        let encoded = encode_pgm(&img);
        let back = parse_pgm(&encoded).unwrap();
        assert_eq!(back.width(), 24);
        assert_eq!(back.height(), 19);
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn pgm_all_zero_roundtrips_bitwise() {
        let img = ImageBuffer::constant(4, 4, 0.0).unwrap();
        let back = parse_pgm(&encode_pgm(&img)).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn pgm_rejects_wrong_magic() {
        let err = parse_pgm(b"P6\n2 2\n255\n\0\0\0\0\0\0\0\0\0\0\0\0").unwrap_err();
        match err {
            ImageError::PgmParse { message, .. } => assert!(message.contains("P6")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pgm_parses_ascii_p2_with_comments() {
        let text = b"P2\n# a comment\n3 2\n15\n0 3 6\n9 12 15\n";
        let img = parse_pgm(text).unwrap();
        assert_eq!(img.width(), 3);
        assert_eq!(img.height(), 2);
        assert!((img.get(0, 1) - 0.2).abs() < 1e-12);
        assert!((img.get(1, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pgm_two_byte_samples_big_endian() {
        let mut data = b"P5\n2 1\n65535\n".to_vec();
        data.extend_from_slice(&[0xFF, 0xFF, 0x00, 0x00]);
        let img = parse_pgm(&data).unwrap();
        assert_eq!(img.pixels(), &[1.0, 0.0]);
    }

    #[test]
    fn pgm_truncated_payload_reports_offset() {
        let data = b"P5\n2 2\n255\n\x01\x02";
        let err = parse_pgm(data).unwrap_err();
        match err {
            ImageError::PgmParse { message, offset } => {
                assert!(message.contains("truncated"), "{message}");
                assert_eq!(offset, data.len());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pgm_file_roundtrip() {
        let dir = std::env::temp_dir().join("ilradmm-pgm-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("img.pgm");
        let img = phantom_image(20, 20, 5).unwrap();
        save_pgm(&img, &path).unwrap();
        let back = load_pgm(&path).unwrap();
        assert_eq!(back.width(), 20);
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
