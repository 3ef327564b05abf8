//! Grayscale images, the filters that build per-pixel feature stacks, and
//! the covariance descriptor of those stacks.
//!
//! Filters are deliberately plain: a separable Gaussian with an explicit
//! normalized kernel (radius `ceil(3σ)`), a Hessian ridge response (the
//! signed larger-magnitude eigenvalue of the per-pixel 2×2 Hessian of the
//! smoothed image, min-max normalized), and a single-scale or multi-scale
//! vesselness measure that suppresses blobs through the eigenvalue ratio
//! and weak responses through the second-order norm. Boundaries are
//! whole-sample mirrors by default; wrap is available, under which
//! filtering commutes with cyclic translation bit for bit.
//!
//! The descriptor of an image is the covariance of its feature stack over
//! pixels, reusing the time-series covariance path (features play the role
//! of channels, pixels the role of time).

use crate::error::{Error, Result};
use crate::io::read_matrix_csv;
use crate::spd::SpdMatrix;
use crate::ts::{run_covariance, CovOptions};
use nalgebra::{DMatrix, DVector};
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pixels: DMatrix<f64>,
}

impl GrayImage {
    pub fn new(pixels: DMatrix<f64>) -> Result<Self> {
        if pixels.nrows() == 0 || pixels.ncols() == 0 {
            return Err(Error::InvalidInput("image has no pixels".into()));
        }
        for r in 0..pixels.nrows() {
            for c in 0..pixels.ncols() {
                if !pixels[(r, c)].is_finite() {
                    return Err(Error::NonFiniteValue {
                        context: format!("pixel ({r}, {c})"),
                    });
                }
            }
        }
        Ok(GrayImage { pixels })
    }

    pub fn rows(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn cols(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[(r, c)]
    }

    pub fn pixels(&self) -> &DMatrix<f64> {
        &self.pixels
    }

    pub fn into_pixels(self) -> DMatrix<f64> {
        self.pixels
    }

    /// Row-major pixel vector.
    pub fn flatten(&self) -> DVector<f64> {
        let (h, w) = (self.rows(), self.cols());
        DVector::from_fn(h * w, |i, _| self.pixels[(i / w, i % w)])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Whole-sample mirror: `-1 → 1`, `len → len-2`.
    #[default]
    Reflect,
    /// Cyclic.
    Wrap,
}

impl Boundary {
    pub fn index(self, i: isize, len: usize) -> usize {
        debug_assert!(len > 0, "boundary lookup on an empty axis");
        let n = len as isize;
        match self {
            Boundary::Wrap => i.rem_euclid(n) as usize,
            Boundary::Reflect => {
                if len == 1 {
                    return 0;
                }
                // Triangle wave with period 2(len-1).
                let p = 2 * (n - 1);
                let k = i.rem_euclid(p);
                if k < n {
                    k as usize
                } else {
                    (p - k) as usize
                }
            }
        }
    }
}

const MAX_SIGMA: f64 = 100.0;

/// Normalized Gaussian taps, length `2·ceil(3σ) + 1`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !sigma.is_finite() || sigma <= 0.0 || sigma > MAX_SIGMA {
        return Err(Error::InvalidInput(format!(
            "smoothing width {sigma} outside (0, {MAX_SIGMA}]"
        )));
    }
    let r = (3.0 * sigma).ceil() as usize;
    let mut w = Vec::with_capacity(2 * r + 1);
    for i in 0..=2 * r {
        let x = i as f64 - r as f64;
        w.push((-x * x / (2.0 * sigma * sigma)).exp());
    }
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

fn convolve_axis(
    src: &DMatrix<f64>,
    kernel: &[f64],
    boundary: Boundary,
    horizontal: bool,
) -> DMatrix<f64> {
    let (h, w) = (src.nrows(), src.ncols());
    let r = (kernel.len() / 2) as isize;
    let mut out = DMatrix::zeros(h, w);
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (ki, &kv) in kernel.iter().enumerate() {
                let off = ki as isize - r;
                let v = if horizontal {
                    src[(row, boundary.index(col as isize + off, w))]
                } else {
                    src[(boundary.index(row as isize + off, h), col)]
                };
                acc += kv * v;
            }
            out[(row, col)] = acc;
        }
    }
    out
}

pub fn gaussian_smooth(img: &GrayImage, sigma: f64, boundary: Boundary) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma)?;
    let horizontal = convolve_axis(&img.pixels, &kernel, boundary, true);
    let both = convolve_axis(&horizontal, &kernel, boundary, false);
    GrayImage::new(both)
}

/// Eigenvalues of `[[a, b], [b, d]]`, ascending.
pub fn sym2_eigs(a: f64, b: f64, d: f64) -> (f64, f64) {
    let half_trace = 0.5 * (a + d);
    let disc = (0.5 * (a - d)).hypot(b);
    (half_trace - disc, half_trace + disc)
}

/// Central second differences of `src` at `(r, c)`: `(dxx, dyy, dxy)` with
/// x along columns.
fn hessian_at(src: &DMatrix<f64>, r: usize, c: usize, boundary: Boundary) -> (f64, f64, f64) {
    let (h, w) = (src.nrows(), src.ncols());
    let ri = r as isize;
    let ci = c as isize;
    let row = |dr: isize| boundary.index(ri + dr, h);
    let col = |dc: isize| boundary.index(ci + dc, w);
    let f = |dr: isize, dc: isize| src[(row(dr), col(dc))];
    let dxx = f(0, 1) - 2.0 * f(0, 0) + f(0, -1);
    let dyy = f(1, 0) - 2.0 * f(0, 0) + f(-1, 0);
    let dxy = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / 4.0;
    (dxx, dyy, dxy)
}

fn min_max_normalize(mut pixels: DMatrix<f64>) -> DMatrix<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in 0..pixels.nrows() {
        for c in 0..pixels.ncols() {
            lo = lo.min(pixels[(r, c)]);
            hi = hi.max(pixels[(r, c)]);
        }
    }
    if hi > lo {
        let span = hi - lo;
        for r in 0..pixels.nrows() {
            for c in 0..pixels.ncols() {
                pixels[(r, c)] = (pixels[(r, c)] - lo) / span;
            }
        }
    } else {
        pixels.fill(0.0);
    }
    pixels
}

/// Signed larger-magnitude Hessian eigenvalue of the σ-smoothed image,
/// before normalization.
pub fn hessian_response_raw(
    img: &GrayImage,
    sigma: f64,
    boundary: Boundary,
) -> Result<GrayImage> {
    let smoothed = gaussian_smooth(img, sigma, boundary)?;
    let src = smoothed.pixels();
    let mut out = DMatrix::zeros(img.rows(), img.cols());
    for r in 0..img.rows() {
        for c in 0..img.cols() {
            let (dxx, dyy, dxy) = hessian_at(src, r, c, boundary);
            let (lo, hi) = sym2_eigs(dxx, dxy, dyy);
            out[(r, c)] = if hi.abs() >= lo.abs() { hi } else { lo };
        }
    }
    GrayImage::new(out)
}

/// [`hessian_response_raw`] rescaled to `[0, 1]` over the image.
pub fn hessian_response(img: &GrayImage, sigma: f64, boundary: Boundary) -> Result<GrayImage> {
    let raw = hessian_response_raw(img, sigma, boundary)?;
    GrayImage::new(min_max_normalize(raw.into_pixels()))
}

pub const FRANGI_DEFAULT_BETA: f64 = 0.5;
const FRANGI_C_FALLBACK: f64 = 1e-10;

/// Multi-scale bright-ridge vesselness, before normalization.
///
/// Per scale, the per-pixel Hessian eigenvalues are ordered by magnitude
/// `|λ1| ≤ |λ2|`; a bright ridge has `λ2 < 0`, everything else scores 0.
/// The blobness ratio `λ1/λ2` is damped by `β` and the structure norm
/// `S = √(λ1² + λ2²)` by `c`, which defaults to half the largest `S` of
/// that scale. Scales combine by pointwise maximum.
pub fn frangi_response_raw(
    img: &GrayImage,
    sigmas: &[f64],
    beta: f64,
    c: Option<f64>,
    boundary: Boundary,
) -> Result<GrayImage> {
    if sigmas.is_empty() {
        return Err(Error::InvalidInput("no scales given".into()));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidInput(format!("beta {beta} must be finite and > 0")));
    }
    if let Some(c) = c {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidInput(format!("c {c} must be finite and > 0")));
        }
    }
    let (h, w) = (img.rows(), img.cols());
    let mut out = DMatrix::zeros(h, w);
    let mut l1 = DMatrix::zeros(h, w);
    let mut l2 = DMatrix::zeros(h, w);
    for &sigma in sigmas {
        let smoothed = gaussian_smooth(img, sigma, boundary)?;
        let src = smoothed.pixels();
        let mut s_max = 0.0f64;
        for r in 0..h {
            for cc in 0..w {
                let (dxx, dyy, dxy) = hessian_at(src, r, cc, boundary);
                let (lo, hi) = sym2_eigs(dxx, dxy, dyy);
                let (small, large) = if hi.abs() >= lo.abs() { (lo, hi) } else { (hi, lo) };
                l1[(r, cc)] = small;
                l2[(r, cc)] = large;
                s_max = s_max.max(small.hypot(large));
            }
        }
        let c_scale = c.unwrap_or(if s_max > 0.0 { 0.5 * s_max } else { FRANGI_C_FALLBACK });
        for r in 0..h {
            for cc in 0..w {
                let large = l2[(r, cc)];
                if large >= 0.0 {
                    continue;
                }
                let small = l1[(r, cc)];
                let blobness = small / large;
                let s2 = small * small + large * large;
                let v = (-blobness * blobness / (2.0 * beta * beta)).exp()
                    * (1.0 - (-s2 / (2.0 * c_scale * c_scale)).exp());
                if v > out[(r, cc)] {
                    out[(r, cc)] = v;
                }
            }
        }
    }
    GrayImage::new(out)
}

/// [`frangi_response_raw`] rescaled to `[0, 1]` over the image.
pub fn frangi_response(
    img: &GrayImage,
    sigmas: &[f64],
    beta: f64,
    c: Option<f64>,
    boundary: Boundary,
) -> Result<GrayImage> {
    let raw = frangi_response_raw(img, sigmas, beta, c, boundary)?;
    GrayImage::new(min_max_normalize(raw.into_pixels()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterSpec {
    Identity,
    Gaussian { sigma: f64 },
    Hessian { sigma: f64 },
    Frangi { sigma: f64 },
}

impl FilterSpec {
    pub fn name(&self) -> String {
        match self {
            FilterSpec::Identity => "identity".to_string(),
            FilterSpec::Gaussian { sigma } => format!("gauss_s{sigma}"),
            FilterSpec::Hessian { sigma } => format!("hessian_s{sigma}"),
            FilterSpec::Frangi { sigma } => format!("frangi_s{sigma}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FeatureBank {
    pub filters: Vec<FilterSpec>,
    pub boundary: Boundary,
    pub frangi_beta: f64,
    /// Flip the ridge polarity test so the vesselness filters respond to
    /// dark-on-bright structures instead of bright-on-dark ones.
    pub frangi_dark: bool,
}

impl Default for FeatureBank {
    fn default() -> Self {
        FeatureBank {
            filters: vec![
                FilterSpec::Identity,
                FilterSpec::Gaussian { sigma: 1.0 },
                FilterSpec::Gaussian { sigma: 2.0 },
                FilterSpec::Frangi { sigma: 1.0 },
                FilterSpec::Frangi { sigma: 2.0 },
                FilterSpec::Frangi { sigma: 4.0 },
                FilterSpec::Hessian { sigma: 1.0 },
                FilterSpec::Hessian { sigma: 2.0 },
                FilterSpec::Hessian { sigma: 4.0 },
            ],
            boundary: Boundary::Reflect,
            frangi_beta: FRANGI_DEFAULT_BETA,
            frangi_dark: false,
        }
    }
}

impl FeatureBank {
    pub fn names(&self) -> Vec<String> {
        self.filters.iter().map(FilterSpec::name).collect()
    }

    pub fn apply_one(&self, img: &GrayImage, f: FilterSpec) -> Result<GrayImage> {
        match f {
            FilterSpec::Identity => Ok(img.clone()),
            FilterSpec::Gaussian { sigma } => gaussian_smooth(img, sigma, self.boundary),
            FilterSpec::Hessian { sigma } => hessian_response(img, sigma, self.boundary),
            FilterSpec::Frangi { sigma } => {
                // Photometric inversion negates the Hessian, so running the
                // bright-ridge detector on the inverted image is exactly the
                // dark-ridge detector.
                if self.frangi_dark {
                    let inv = GrayImage::new(img.pixels().map(|v| 1.0 - v))?;
                    frangi_response(&inv, &[sigma], self.frangi_beta, None, self.boundary)
                } else {
                    frangi_response(img, &[sigma], self.frangi_beta, None, self.boundary)
                }
            }
        }
    }
}

/// One row per filter, one column per pixel (row-major).
pub fn feature_stack(img: &GrayImage, bank: &FeatureBank) -> Result<DMatrix<f64>> {
    if bank.filters.is_empty() {
        return Err(Error::InvalidInput("feature bank is empty".into()));
    }
    let npix = img.rows() * img.cols();
    let mut stack = DMatrix::zeros(bank.filters.len(), npix);
    for (fi, &f) in bank.filters.iter().enumerate() {
        let response = bank.apply_one(img, f)?;
        let flat = response.flatten();
        for p in 0..npix {
            stack[(fi, p)] = flat[p];
        }
    }
    Ok(stack)
}

/// Covariance of a feature stack over pixels: features are channels,
/// pixels are samples. The boolean reports spectrum repair.
pub fn image_covariance(stack: &DMatrix<f64>, opts: &CovOptions) -> Result<(SpdMatrix, bool)> {
    run_covariance(&stack.transpose(), opts)
}

fn pgm_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::FormatError {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Header tokens of a PGM file: stops after the maxval, returning the
/// offset of the first payload byte.
fn pgm_tokens(bytes: &[u8], count: usize) -> Option<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        // Skip whitespace and comments.
        loop {
            if i >= bytes.len() {
                return None;
            }
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else if bytes[i].is_ascii_whitespace() {
                i += 1;
            } else {
                break;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
            i += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // Exactly one whitespace byte separates the header from binary data.
    if i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    Some((tokens, i))
}

fn parse_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let (header, payload_at) =
        pgm_tokens(bytes, 4).ok_or_else(|| pgm_err(path, "truncated header"))?;
    let magic = header[0].as_str();
    if magic != "P2" && magic != "P5" {
        return Err(pgm_err(path, format!("unsupported magic {magic:?}")));
    }
    let parse_dim = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| pgm_err(path, format!("malformed {what} {s:?}")))
    };
    let width = parse_dim(&header[1], "width")?;
    let height = parse_dim(&header[2], "height")?;
    let maxval = parse_dim(&header[3], "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage {
            path: path.display().to_string(),
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(pgm_err(path, format!("maxval {maxval} outside 1..=65535")));
    }
    let npix = width * height;
    let mut pixels = DMatrix::zeros(height, width);
    if magic == "P2" {
        let text = String::from_utf8_lossy(&bytes[payload_at..]);
        let mut values = text.split_ascii_whitespace();
        for p in 0..npix {
            let token = values
                .next()
                .ok_or_else(|| pgm_err(path, format!("expected {npix} pixels, found {p}")))?;
            let v = token
                .parse::<usize>()
                .map_err(|_| pgm_err(path, format!("malformed pixel {token:?}")))?;
            if v > maxval {
                return Err(pgm_err(path, format!("pixel {v} exceeds maxval {maxval}")));
            }
            pixels[(p / width, p % width)] = v as f64 / maxval as f64;
        }
        if values.next().is_some() {
            return Err(pgm_err(path, "trailing data after pixels"));
        }
    } else {
        if maxval > 255 {
            return Err(pgm_err(path, "16-bit binary images are not supported"));
        }
        let data = &bytes[payload_at..];
        if data.len() != npix {
            return Err(pgm_err(
                path,
                format!("expected {npix} data bytes, found {}", data.len()),
            ));
        }
        for (p, &b) in data.iter().enumerate() {
            if b as usize > maxval {
                return Err(pgm_err(path, format!("pixel {b} exceeds maxval {maxval}")));
            }
            pixels[(p / width, p % width)] = b as f64 / maxval as f64;
        }
    }
    GrayImage::new(pixels)
}

/// Load `.pgm` (ascii P2 or 8-bit binary P5, scaled to `[0, 1]`) or a CSV
/// matrix of raw intensities (any other extension).
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let is_pgm = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("pgm"))
        .unwrap_or(false);
    if is_pgm {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        parse_pgm(&bytes, path)
    } else {
        let m = read_matrix_csv(path, false)?;
        GrayImage::new(m)
    }
}

/// Write ascii P2 at maxval 255, clamping to `[0, 1]`.
pub fn save_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut out = format!("P2\n{} {}\n255\n", img.cols(), img.rows());
    for r in 0..img.rows() {
        for c in 0..img.cols() {
            if c > 0 {
                out.push(' ');
            }
            let v = (img.get(r, c).clamp(0.0, 1.0) * 255.0).round() as u8;
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    crate::io::write_text(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::spd::{eig_sym, SymMatrix, DEFAULT_SYM_TOL};
    use std::fs;

    fn random_image(h: usize, w: usize, seed: u64) -> GrayImage {
        let mut rng = SplitMix64::new(seed);
        GrayImage::new(DMatrix::from_fn(h, w, |_, _| rng.next_f64())).unwrap()
    }

    /// A bright vertical ridge with a Gaussian cross-section.
    fn ridge_image(h: usize, w: usize, center: f64, width: f64) -> GrayImage {
        GrayImage::new(DMatrix::from_fn(h, w, |_, c| {
            let d = c as f64 - center;
            (-d * d / (2.0 * width * width)).exp()
        }))
        .unwrap()
    }

    #[test]
    fn boundary_indexing() {
        let b = Boundary::Reflect;
        assert_eq!(b.index(-1, 4), 1);
        assert_eq!(b.index(-2, 4), 2);
        assert_eq!(b.index(-3, 4), 3);
        assert_eq!(b.index(0, 4), 0);
        assert_eq!(b.index(3, 4), 3);
        assert_eq!(b.index(4, 4), 2);
        assert_eq!(b.index(5, 4), 1);
        assert_eq!(b.index(6, 4), 0);
        assert_eq!(b.index(-7, 4), 1, "mirror must keep bouncing");
        assert_eq!(b.index(17, 1), 0);

        let w = Boundary::Wrap;
        assert_eq!(w.index(-1, 4), 3);
        assert_eq!(w.index(4, 4), 0);
        assert_eq!(w.index(-5, 4), 3);
        assert_eq!(w.index(9, 4), 1);
    }

    #[test]
    fn kernel_shape_and_mass() {
        for sigma in [0.5, 1.0, 2.0, 4.0] {
            let k = gaussian_kernel(sigma).unwrap();
            assert_eq!(k.len(), 2 * ((3.0 * sigma).ceil() as usize) + 1);
            let total: f64 = k.iter().sum();
            assert!((total - 1.0).abs() <= 1e-12, "kernel mass {total}");
            for i in 0..k.len() / 2 {
                assert_eq!(k[i], k[k.len() - 1 - i], "kernel must be symmetric");
            }
            let mid = k.len() / 2;
            assert!(k[mid] >= k[0], "kernel must peak at the center");
        }
        assert_eq!(gaussian_kernel(0.0).unwrap_err().kind(), "InvalidInput");
        assert_eq!(gaussian_kernel(-1.0).unwrap_err().kind(), "InvalidInput");
        assert_eq!(gaussian_kernel(1e9).unwrap_err().kind(), "InvalidInput");
    }

    #[test]
    fn smoothing_fixes_constants_and_preserves_wrap_mass() {
        let flat = GrayImage::new(DMatrix::from_element(9, 7, 0.37)).unwrap();
        let out = gaussian_smooth(&flat, 1.5, Boundary::Reflect).unwrap();
        for r in 0..9 {
            for c in 0..7 {
                assert!((out.get(r, c) - 0.37).abs() <= 1e-12);
            }
        }

        let img = random_image(12, 12, 1);
        let before: f64 = img.pixels().iter().sum();
        let smoothed = gaussian_smooth(&img, 2.0, Boundary::Wrap).unwrap();
        let after: f64 = smoothed.pixels().iter().sum();
        assert!(
            (before - after).abs() <= 1e-9 * before.abs(),
            "cyclic smoothing must conserve total intensity"
        );
    }

    #[test]
    fn impulse_response_is_the_separable_kernel() {
        let mut pixels = DMatrix::zeros(15, 15);
        pixels[(7, 7)] = 1.0;
        let img = GrayImage::new(pixels).unwrap();
        let out = gaussian_smooth(&img, 1.0, Boundary::Reflect).unwrap();
        let k = gaussian_kernel(1.0).unwrap();
        let r = k.len() / 2;
        for (i, &ki) in k.iter().enumerate() {
            for (j, &kj) in k.iter().enumerate() {
                let got = out.get(7 - r + i, 7 - r + j);
                assert!(
                    (got - ki * kj).abs() <= 1e-14,
                    "impulse response at ({i}, {j}): {got} vs {}",
                    ki * kj
                );
            }
        }
        assert!(out.get(0, 0).abs() <= 1e-14, "impulse must stay local");
    }

    #[test]
    fn separable_pass_matches_direct_convolution() {
        let img = random_image(10, 8, 2);
        let sigma = 1.2;
        let out = gaussian_smooth(&img, sigma, Boundary::Reflect).unwrap();
        let k = gaussian_kernel(sigma).unwrap();
        let r = (k.len() / 2) as isize;
        for row in 0..10usize {
            for col in 0..8usize {
                let mut acc = 0.0;
                for (ki, &kv) in k.iter().enumerate() {
                    for (kj, &kh) in k.iter().enumerate() {
                        let rr = Boundary::Reflect.index(row as isize + ki as isize - r, 10);
                        let cc = Boundary::Reflect.index(col as isize + kj as isize - r, 8);
                        acc += kv * kh * img.get(rr, cc);
                    }
                }
                assert!(
                    (acc - out.get(row, col)).abs() <= 1e-12,
                    "direct 2-d convolution disagrees at ({row}, {col})"
                );
            }
        }
    }

    #[test]
    fn wrap_smoothing_commutes_with_translation_bitwise() {
        let img = random_image(16, 16, 3);
        let (dr, dc) = (5usize, 11usize);
        let shifted = GrayImage::new(DMatrix::from_fn(16, 16, |r, c| {
            img.get((r + dr) % 16, (c + dc) % 16)
        }))
        .unwrap();
        let a = gaussian_smooth(&shifted, 1.5, Boundary::Wrap).unwrap();
        let b = gaussian_smooth(&img, 1.5, Boundary::Wrap).unwrap();
        let b_shifted = DMatrix::from_fn(16, 16, |r, c| b.get((r + dr) % 16, (c + dc) % 16));
        assert_eq!(
            a.pixels(),
            &b_shifted,
            "cyclic filtering must commute with cyclic shifts exactly"
        );
    }

    #[test]
    fn smoothing_shrinks_variance() {
        let img = random_image(24, 24, 4);
        let var = |im: &GrayImage| {
            let mean: f64 = im.pixels().iter().sum::<f64>() / 576.0;
            im.pixels().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 575.0
        };
        let smoothed = gaussian_smooth(&img, 2.0, Boundary::Reflect).unwrap();
        assert!(
            var(&smoothed) < 0.5 * var(&img),
            "heavy smoothing should wipe out most noise variance"
        );
    }

    #[test]
    fn closed_form_eigenvalues_match_the_solver() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..50 {
            let a = rng.uniform(-5.0, 5.0);
            let b = rng.uniform(-5.0, 5.0);
            let d = rng.uniform(-5.0, 5.0);
            let (lo, hi) = sym2_eigs(a, b, d);
            let m = SymMatrix::from_raw(
                DMatrix::from_row_slice(2, 2, &[a, b, b, d]),
                DEFAULT_SYM_TOL,
            )
            .unwrap();
            let eig = eig_sym(&m).unwrap();
            assert!((lo - eig.eigenvalues[0]).abs() <= 1e-12 * (1.0 + lo.abs()));
            assert!((hi - eig.eigenvalues[1]).abs() <= 1e-12 * (1.0 + hi.abs()));
        }
    }

    #[test]
    fn hessian_of_a_quadratic_surface() {
        // f = a r² + b c² + e r c has constant Hessian [[2b, e], [e, 2a]]
        // in (x, y) = (col, row) order; smoothing only shifts a quadratic
        // by a constant away from the edges.
        let (a, b, e) = (0.7, -0.2, 0.3);
        let img = GrayImage::new(DMatrix::from_fn(41, 41, |r, c| {
            let (rf, cf) = (r as f64 - 20.0, c as f64 - 20.0);
            a * rf * rf + b * cf * cf + e * rf * cf
        }))
        .unwrap();
        let raw = hessian_response_raw(&img, 1.0, Boundary::Reflect).unwrap();
        let (lo, hi) = sym2_eigs(2.0 * b, e, 2.0 * a);
        let want = if hi.abs() >= lo.abs() { hi } else { lo };
        for r in 15..=25 {
            for c in 15..=25 {
                assert!(
                    (raw.get(r, c) - want).abs() <= 1e-8 * (1.0 + want.abs()),
                    "interior response at ({r}, {c}): {} vs {want}",
                    raw.get(r, c)
                );
            }
        }
    }

    #[test]
    fn hessian_response_is_normalized_and_ridge_seeking() {
        let img = ridge_image(32, 32, 16.0, 1.5);
        let resp = hessian_response(&img, 1.0, Boundary::Reflect).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..32 {
            for c in 0..32 {
                lo = lo.min(resp.get(r, c));
                hi = hi.max(resp.get(r, c));
            }
        }
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 1.0);
        // A bright ridge has strongly negative curvature across it, so the
        // signed response is minimal on the ridge: after min-max it sits at
        // the bottom of the range, far below the flat background.
        let on_ridge = resp.get(16, 16);
        let off_ridge = resp.get(16, 2);
        assert!(
            on_ridge < 0.3 && off_ridge > on_ridge + 0.3,
            "ridge {on_ridge} vs background {off_ridge}"
        );
    }

    #[test]
    fn vesselness_lights_up_bright_ridges_only() {
        let bright = ridge_image(32, 32, 16.0, 1.5);
        let resp = frangi_response(&bright, &[1.0, 2.0], FRANGI_DEFAULT_BETA, None, Boundary::Reflect)
            .unwrap();
        let mut ridge_mean = 0.0;
        let mut bg_mean = 0.0;
        for r in 0..32 {
            ridge_mean += resp.get(r, 16);
            bg_mean += resp.get(r, 2);
        }
        assert!(
            ridge_mean >= 5.0 * bg_mean.max(1e-12),
            "ridge column {ridge_mean} vs background column {bg_mean}"
        );

        // The same ridge in negative is a dark groove. On its centerline the
        // smaller curvature is positive, so the response is exactly zero there.
        // The shoulders flanking the groove do curve downward and produce real
        // side lobes, so the groove's global max is only bounded, not zero.
        let dark = GrayImage::new(bright.pixels().map(|v| 1.0 - v)).unwrap();
        let dark_raw =
            frangi_response_raw(&dark, &[1.0, 2.0], FRANGI_DEFAULT_BETA, None, Boundary::Reflect)
                .unwrap();
        let bright_raw =
            frangi_response_raw(&bright, &[1.0, 2.0], FRANGI_DEFAULT_BETA, None, Boundary::Reflect)
                .unwrap();
        for r in 0..32 {
            assert_eq!(dark_raw.get(r, 16), 0.0, "groove centerline must be silent at row {r}");
        }
        let max_of = |im: &GrayImage| im.pixels().iter().cloned().fold(0.0f64, f64::max);
        assert!(
            max_of(&dark_raw) <= 0.5 * max_of(&bright_raw),
            "groove side lobes must stay below the ridge response: {} vs {}",
            max_of(&dark_raw),
            max_of(&bright_raw)
        );
    }

    #[test]
    fn dark_polarity_bank_sees_the_groove_the_bright_one_ignores() {
        let bright = ridge_image(32, 32, 16.0, 1.5);
        let groove = GrayImage::new(bright.pixels().map(|v| 1.0 - v)).unwrap();
        let bank = FeatureBank {
            filters: vec![FilterSpec::Identity, FilterSpec::Frangi { sigma: 1.0 }],
            frangi_dark: true,
            ..FeatureBank::default()
        };
        let resp = bank.apply_one(&groove, FilterSpec::Frangi { sigma: 1.0 }).unwrap();
        let mut groove_mean = 0.0;
        let mut bg_mean = 0.0;
        for r in 0..32 {
            groove_mean += resp.get(r, 16);
            bg_mean += resp.get(r, 2);
        }
        assert!(
            groove_mean >= 5.0 * bg_mean.max(1e-12),
            "dark polarity should fire on the groove: {groove_mean} vs {bg_mean}"
        );
        // With the flag set, the dark detector on the groove is the bright
        // detector on the original ridge, up to the roundoff of the double
        // photometric inversion (1 - (1 - v) loses the last bits of tiny v).
        let bright_resp =
            frangi_response(&bright, &[1.0], FRANGI_DEFAULT_BETA, None, Boundary::Reflect).unwrap();
        let dev = (resp.pixels() - bright_resp.pixels()).abs().max();
        assert!(dev <= 1e-9, "polarity flip deviates from direct detection by {dev:.3e}");
    }

    #[test]
    fn vesselness_of_a_flat_image_is_zero_without_dividing_by_zero() {
        let flat = GrayImage::new(DMatrix::from_element(16, 16, 0.5)).unwrap();
        let resp =
            frangi_response(&flat, &[1.0], FRANGI_DEFAULT_BETA, None, Boundary::Reflect).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(resp.get(r, c), 0.0);
            }
        }
    }

    #[test]
    fn vesselness_validates_parameters() {
        let img = random_image(8, 8, 6);
        assert_eq!(
            frangi_response(&img, &[], 0.5, None, Boundary::Reflect).unwrap_err().kind(),
            "InvalidInput"
        );
        assert_eq!(
            frangi_response(&img, &[1.0], 0.0, None, Boundary::Reflect).unwrap_err().kind(),
            "InvalidInput"
        );
        assert_eq!(
            frangi_response(&img, &[1.0], 0.5, Some(-1.0), Boundary::Reflect)
                .unwrap_err()
                .kind(),
            "InvalidInput"
        );
    }

    #[test]
    fn default_bank_stacks_nine_features() {
        let bank = FeatureBank::default();
        assert_eq!(
            bank.names(),
            vec![
                "identity",
                "gauss_s1",
                "gauss_s2",
                "frangi_s1",
                "frangi_s2",
                "frangi_s4",
                "hessian_s1",
                "hessian_s2",
                "hessian_s4"
            ]
        );
        let img = random_image(16, 16, 7);
        let stack = feature_stack(&img, &bank).unwrap();
        assert_eq!(stack.nrows(), 9);
        assert_eq!(stack.ncols(), 256);
        for p in 0..256 {
            assert_eq!(stack[(0, p)], img.get(p / 16, p % 16), "row 0 is the raw image");
            for f in 0..9 {
                assert!(stack[(f, p)].is_finite());
            }
        }
    }

    #[test]
    fn stack_covariance_matches_a_naive_loop() {
        let img = random_image(12, 12, 8);
        let bank = FeatureBank {
            filters: vec![
                FilterSpec::Identity,
                FilterSpec::Gaussian { sigma: 1.0 },
                FilterSpec::Hessian { sigma: 1.0 },
            ],
            ..FeatureBank::default()
        };
        let stack = feature_stack(&img, &bank).unwrap();
        let (cov, _) = image_covariance(&stack, &CovOptions::default()).unwrap();
        assert_eq!(cov.dim(), 3);

        let npix = 144;
        let mut means = [0.0; 3];
        for f in 0..3 {
            for p in 0..npix {
                means[f] += stack[(f, p)];
            }
            means[f] /= npix as f64;
        }
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for p in 0..npix {
                    acc += (stack[(i, p)] - means[i]) * (stack[(j, p)] - means[j]);
                }
                acc /= (npix - 1) as f64;
                assert!(
                    (cov.get(i, j) - acc).abs() <= 1e-12 * (1.0 + acc.abs()),
                    "covariance entry ({i}, {j}): {} vs {acc}",
                    cov.get(i, j)
                );
            }
        }
    }

    #[test]
    fn full_bank_covariance_is_nine_by_nine() {
        let img = ridge_image(24, 24, 12.0, 2.0);
        let stack = feature_stack(&img, &FeatureBank::default()).unwrap();
        let (cov, _) = image_covariance(&stack, &CovOptions::default()).unwrap();
        assert_eq!(cov.dim(), 9);
        for f in 0..9 {
            assert!(cov.get(f, f) >= 0.0);
        }
    }

    #[test]
    fn pgm_ascii_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let img = random_image(9, 13, 9);
        save_pgm(&path, &img).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.rows(), 9);
        assert_eq!(back.cols(), 13);
        for r in 0..9 {
            for c in 0..13 {
                assert!(
                    (back.get(r, c) - img.get(r, c)).abs() <= 0.5 / 255.0 + 1e-12,
                    "quantization error too large at ({r}, {c})"
                );
            }
        }
    }

    #[test]
    fn pgm_parser_handles_comments_and_binary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        fs::write(&path, "P2 # magic\n# a comment line\n2 2\n# maxval next\n4\n0 1\n2 4\n").unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(0, 1), 0.25);
        assert_eq!(img.get(1, 1), 1.0);

        let bin = dir.path().join("b.pgm");
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 51, 102, 153, 204, 255]);
        fs::write(&bin, &bytes).unwrap();
        let img = load_image(&bin).unwrap();
        assert_eq!(img.rows(), 2);
        assert_eq!(img.cols(), 3);
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(1, 2), 1.0);
        assert!((img.get(0, 1) - 0.2).abs() <= 1e-12);
    }

    #[test]
    fn pgm_parser_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        for (content, kind) in [
            (b"P3\n2 2\n255\n0 0 0 0\n".to_vec(), "FormatError"),
            (b"P2\n0 2\n255\n".to_vec(), "EmptyImage"),
            (b"P2\n2 2\n0\n0 0 0 0\n".to_vec(), "FormatError"),
            (b"P2\n2 2\n255\n0 0 0\n".to_vec(), "FormatError"),
            (b"P2\n2 2\n255\n0 0 0 0 0\n".to_vec(), "FormatError"),
            (b"P2\n2 2\n10\n0 0 0 11\n".to_vec(), "FormatError"),
            (b"P2\n2 2\n".to_vec(), "FormatError"),
            (b"P5\n2 2\n255\n\x00\x01\x02".to_vec(), "FormatError"),
        ] {
            fs::write(&path, &content).unwrap();
            assert_eq!(
                load_image(&path).unwrap_err().kind(),
                kind,
                "content {:?}",
                String::from_utf8_lossy(&content)
            );
        }
    }

    #[test]
    fn csv_images_load_raw() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.csv");
        fs::write(&path, "0.0,0.5\n1.5,-2.0\n").unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.rows(), 2);
        assert_eq!(img.get(1, 0), 1.5);
        assert_eq!(img.get(1, 1), -2.0, "CSV intensities are not rescaled");
    }
}
