//! Raster containers, binary PPM/PGM codecs and the geometric helpers the
//! descriptor pipeline runs before feature extraction.
//!
//! Samples are `f64` in the nominal range `[0, 255]`; nothing is quantized
//! until a code map is formed or a file is written.

use crate::error::{DecodeError, ShapeError};

/// A `width × height` row-major grid of real samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self, ShapeError> {
        if width == 0 || height == 0 {
            return Err(ShapeError::Empty { width, height });
        }
        if samples.len() != width * height {
            return Err(ShapeError::SampleCount {
                width,
                height,
                len: samples.len(),
            });
        }
        Ok(PixelGrid {
            width,
            height,
            samples,
        })
    }

    /// Constant grid. Panics on a zero dimension.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        PixelGrid {
            width,
            height,
            samples: vec![value; width * height],
        }
    }

    /// Builds a grid from `f(row, col)`. Panics on a zero dimension.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        let mut samples = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                samples.push(f(row, col));
            }
        }
        PixelGrid {
            width,
            height,
            samples,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.samples[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.samples[row * self.width + col] = value;
    }

    /// Sample with out-of-range coordinates clamped to the nearest edge pixel,
    /// i.e. the value an unbounded replicate padding would hold there.
    #[inline]
    pub fn clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.samples[r * self.width + c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PixelGrid {
        PixelGrid {
            width: self.width,
            height: self.height,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> PixelGrid {
        PixelGrid::from_fn(self.height, self.width, |r, c| self.get(c, r))
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub(crate) fn same_dims(&self, other: &PixelGrid) -> Result<(), ShapeError> {
        if self.dims() != other.dims() {
            return Err(ShapeError::Mismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// Three channel grids sharing one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbPixelGrid {
    pub r: PixelGrid,
    pub g: PixelGrid,
    pub b: PixelGrid,
}

impl RgbPixelGrid {
    pub fn new(r: PixelGrid, g: PixelGrid, b: PixelGrid) -> Result<Self, ShapeError> {
        r.same_dims(&g)?;
        r.same_dims(&b)?;
        Ok(RgbPixelGrid { r, g, b })
    }

    /// Replicates a single channel into all three.
    pub fn from_gray(gray: PixelGrid) -> Self {
        RgbPixelGrid {
            r: gray.clone(),
            g: gray.clone(),
            b: gray,
        }
    }

    /// Builds an image from a per-pixel `(r, g, b)` closure taking `(row, col)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Self {
        let mut rgb = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                rgb.push(f(row, col));
            }
        }
        let channel = |k: usize| PixelGrid::new(width, height, rgb.iter().map(|p| p[k]).collect());
        RgbPixelGrid {
            r: channel(0).expect("positive dimensions"),
            g: channel(1).expect("positive dimensions"),
            b: channel(2).expect("positive dimensions"),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.r.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.r.height()
    }

    pub fn channels(&self) -> [&PixelGrid; 3] {
        [&self.r, &self.g, &self.b]
    }

    pub fn map_channels(&self, f: impl Fn(&PixelGrid) -> PixelGrid) -> RgbPixelGrid {
        RgbPixelGrid {
            r: f(&self.r),
            g: f(&self.g),
            b: f(&self.b),
        }
    }
}

/// Container formats recognised by [`decode_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary PGM (`P5`) or PPM (`P6`).
    Pnm,
    Jpeg,
    Png,
}

impl ImageFormat {
    /// Sniffs the format from leading magic bytes.
    pub fn detect(bytes: &[u8]) -> Option<ImageFormat> {
        match bytes {
            [b'P', b'5' | b'6', ..] => Some(ImageFormat::Pnm),
            [0xFF, 0xD8, 0xFF, ..] => Some(ImageFormat::Jpeg),
            [0x89, b'P', b'N', b'G', ..] => Some(ImageFormat::Png),
            _ => None,
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_extension(ext: &str) -> Option<ImageFormat> {
        match ext.to_ascii_lowercase().as_str() {
            "ppm" | "pgm" | "pnm" => Some(ImageFormat::Pnm),
            "jpg" | "jpeg" => Some(ImageFormat::Jpeg),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }
}

/// Decodes a raster file into three channel grids.
///
/// Binary PPM/PGM are handled natively. JPEG and PNG go through the `image`
/// crate when the `codecs` feature is enabled. When `hint` is `None` the
/// format is sniffed from the magic bytes.
pub fn decode_image(bytes: &[u8], hint: Option<ImageFormat>) -> Result<RgbPixelGrid, DecodeError> {
    let format = match ImageFormat::detect(bytes).or(hint) {
        Some(f) => f,
        None => {
            return Err(DecodeError::Unsupported(
                "unrecognised magic bytes at offset 0".into(),
            ))
        }
    };
    match format {
        ImageFormat::Pnm => decode_pnm(bytes),
        ImageFormat::Jpeg | ImageFormat::Png => decode_with_codec(bytes, format),
    }
}

#[cfg(feature = "codecs")]
fn decode_with_codec(bytes: &[u8], format: ImageFormat) -> Result<RgbPixelGrid, DecodeError> {
    let fmt = match format {
        ImageFormat::Jpeg => image::ImageFormat::Jpeg,
        ImageFormat::Png => image::ImageFormat::Png,
        ImageFormat::Pnm => unreachable!("PNM is decoded natively"),
    };
    let img = image::load_from_memory_with_format(bytes, fmt)
        .map_err(|e| DecodeError::Codec(e.to_string()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(DecodeError::Codec("zero-sized image".into()));
    }
    let raw = img.into_raw();
    Ok(RgbPixelGrid::from_fn(w, h, |r, c| {
        let i = 3 * (r * w + c);
        [raw[i] as f64, raw[i + 1] as f64, raw[i + 2] as f64]
    }))
}

#[cfg(not(feature = "codecs"))]
fn decode_with_codec(_bytes: &[u8], format: ImageFormat) -> Result<RgbPixelGrid, DecodeError> {
    Err(DecodeError::Unsupported(format!(
        "{format:?} decoding requires the `codecs` feature"
    )))
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, DecodeError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(DecodeError::Malformed {
                offset: start,
                reason: format!("expected {what}"),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DecodeError::Malformed {
                offset: start,
                reason: format!("{what} out of range"),
            })
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<RgbPixelGrid, DecodeError> {
    let channels = match bytes {
        [b'P', b'5', ..] => 1,
        [b'P', b'6', ..] => 3,
        _ => {
            return Err(DecodeError::Malformed {
                offset: 0,
                reason: "expected P5 or P6 magic".into(),
            })
        }
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval_at = rd.pos;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(DecodeError::Malformed {
            offset: 2,
            reason: format!("zero dimension {width}x{height}"),
        });
    }
    if maxval == 0 || maxval > 255 {
        return Err(DecodeError::Unsupported(format!(
            "maxval {maxval} at byte {maxval_at} (only 8-bit samples are supported)"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
        _ => {
            return Err(DecodeError::Malformed {
                offset: rd.pos,
                reason: "expected whitespace after maxval".into(),
            })
        }
    }
    let offset = rd.pos;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| DecodeError::Malformed {
            offset: 2,
            reason: "dimensions overflow".into(),
        })?;
    let payload = &bytes[offset..];
    if payload.len() < expected {
        return Err(DecodeError::Truncated {
            offset,
            expected,
            found: payload.len(),
        });
    }
    let scale = |v: u8| -> f64 {
        if maxval == 255 {
            v as f64
        } else {
            v as f64 * 255.0 / maxval as f64
        }
    };
    let payload = &payload[..expected];
    if channels == 1 {
        let gray = PixelGrid::new(width, height, payload.iter().map(|&v| scale(v)).collect())
            .expect("dimensions checked");
        Ok(RgbPixelGrid::from_gray(gray))
    } else {
        Ok(RgbPixelGrid::from_fn(width, height, |r, c| {
            let i = 3 * (r * width + c);
            [
                scale(payload[i]),
                scale(payload[i + 1]),
                scale(payload[i + 2]),
            ]
        }))
    }
}

fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Writes a binary PGM (`P5`, maxval 255). Samples are rounded and clamped.
pub fn encode_pgm(grid: &PixelGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend(grid.samples().iter().map(|&v| to_byte(v)));
    out
}

/// Writes a binary PPM (`P6`, maxval 255). Samples are rounded and clamped.
pub fn encode_ppm(img: &RgbPixelGrid) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    for ((&r, &g), &b) in img
        .r
        .samples()
        .iter()
        .zip(img.g.samples())
        .zip(img.b.samples())
    {
        out.extend([to_byte(r), to_byte(g), to_byte(b)]);
    }
    out
}

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// BT.601 luma, `0.299 r + 0.587 g + 0.114 b`.
pub fn to_grayscale(img: &RgbPixelGrid) -> PixelGrid {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    combine3(img, |r, g, b| wr * r + wg * g + wb * b)
}

/// BT.601 luma in thousandths: `299 r + 587 g + 114 b`.
///
/// On integer samples every value is an exact integer, so adding a constant
/// to all channels shifts the result by exactly `1000 × constant`.
pub fn to_luma_milli(img: &RgbPixelGrid) -> PixelGrid {
    combine3(img, |r, g, b| 299.0 * r + 587.0 * g + 114.0 * b)
}

fn combine3(img: &RgbPixelGrid, f: impl Fn(f64, f64, f64) -> f64) -> PixelGrid {
    let samples = img
        .r
        .samples()
        .iter()
        .zip(img.g.samples())
        .zip(img.b.samples())
        .map(|((&r, &g), &b)| f(r, g, b))
        .collect();
    PixelGrid::new(img.width(), img.height(), samples).expect("channel dims are shared")
}

/// Bilinear resize using pixel-centre alignment, edges clamped.
///
/// Interpolation is written as chained lerps so constant regions stay
/// exactly constant. Requesting the current size returns a clone.
pub fn resize(grid: &PixelGrid, new_width: usize, new_height: usize) -> PixelGrid {
    assert!(
        new_width > 0 && new_height > 0,
        "target dimensions must be positive"
    );
    if grid.dims() == (new_width, new_height) {
        return grid.clone();
    }
    let src_coord = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let pos = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
            .clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - lo as f64)
    };
    let cols: Vec<_> = (0..new_width)
        .map(|x| src_coord(x, grid.width(), new_width))
        .collect();
    let mut samples = Vec::with_capacity(new_width * new_height);
    for y in 0..new_height {
        let (r0, r1, ty) = src_coord(y, grid.height(), new_height);
        for &(c0, c1, tx) in &cols {
            let p00 = grid.get(r0, c0);
            let p01 = grid.get(r0, c1);
            let p10 = grid.get(r1, c0);
            let p11 = grid.get(r1, c1);
            let top = p00 + tx * (p01 - p00);
            let bottom = p10 + tx * (p11 - p10);
            samples.push(top + ty * (bottom - top));
        }
    }
    PixelGrid::new(new_width, new_height, samples).expect("positive dimensions")
}

pub fn resize_rgb(img: &RgbPixelGrid, new_width: usize, new_height: usize) -> RgbPixelGrid {
    img.map_channels(|c| resize(c, new_width, new_height))
}

/// Grows the grid by `margin` on every side, copying the nearest edge pixel.
pub fn pad_replicate(grid: &PixelGrid, margin: usize) -> PixelGrid {
    pad_replicate_sides(grid, margin, margin, margin, margin)
}

/// Replicate padding with independent margins per side.
pub(crate) fn pad_replicate_sides(
    grid: &PixelGrid,
    top: usize,
    bottom: usize,
    left: usize,
    right: usize,
) -> PixelGrid {
    if top == 0 && bottom == 0 && left == 0 && right == 0 {
        return grid.clone();
    }
    let w = grid.width() + left + right;
    let h = grid.height() + top + bottom;
    PixelGrid::from_fn(w, h, |r, c| {
        grid.clamped(r as isize - top as isize, c as isize - left as isize)
    })
}
