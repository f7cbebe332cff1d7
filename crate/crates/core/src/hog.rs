//! Histogram of oriented gradients.
//!
//! Central-difference gradients, orientation votes split linearly between
//! the two nearest bin centres, overlapping block normalization, and
//! row-major concatenation of the normalized blocks.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ShapeError};
use crate::image::PixelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockNorm {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HogParams {
    /// Pixels per cell side.
    pub cell_size: usize,
    /// Cells per block side.
    pub block_size: usize,
    /// Block step, in cells.
    pub block_stride: usize,
    pub bin_count: usize,
    /// Orientations over 0°–360° instead of 0°–180°.
    pub signed: bool,
    pub norm: BlockNorm,
    pub epsilon: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cell_size: 8,
            block_size: 2,
            block_stride: 1,
            bin_count: 9,
            signed: false,
            norm: BlockNorm::L2,
            epsilon: 1e-5,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cell_size < 2 {
            return Err(ConfigError::invalid("hog.cell_size", "must be at least 2"));
        }
        if self.block_size < 1 {
            return Err(ConfigError::invalid("hog.block_size", "must be at least 1"));
        }
        if self.block_stride < 1 || self.block_stride > self.block_size {
            return Err(ConfigError::invalid(
                "hog.block_stride",
                "must be within 1..=block_size",
            ));
        }
        if self.bin_count < 2 {
            return Err(ConfigError::invalid("hog.bin_count", "must be at least 2"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(ConfigError::invalid(
                "hog.epsilon",
                "must be positive and finite",
            ));
        }
        Ok(())
    }

    fn range_degrees(&self) -> f64 {
        if self.signed {
            360.0
        } else {
            180.0
        }
    }

    /// Descriptor layout for a `width × height` input, without computing it.
    pub fn layout(&self, width: usize, height: usize) -> Result<HogLayout, ShapeError> {
        let cells_x = width / self.cell_size;
        let cells_y = height / self.cell_size;
        self.layout_for_cells(cells_x, cells_y)
            .map_err(|_| ShapeError::TooSmall {
                width,
                height,
                reason: format!(
                    "no full {0}x{0}-cell block of {1}px cells fits",
                    self.block_size, self.cell_size
                ),
            })
    }

    fn layout_for_cells(&self, cells_x: usize, cells_y: usize) -> Result<HogLayout, ShapeError> {
        if cells_x < self.block_size || cells_y < self.block_size {
            return Err(ShapeError::TooSmall {
                width: cells_x,
                height: cells_y,
                reason: format!(
                    "{0}x{0} block does not fit in the cell grid",
                    self.block_size
                ),
            });
        }
        Ok(HogLayout {
            blocks_x: (cells_x - self.block_size) / self.block_stride + 1,
            blocks_y: (cells_y - self.block_size) / self.block_stride + 1,
            cells_per_block: self.block_size * self.block_size,
            bin_count: self.bin_count,
        })
    }
}

/// Shape of a [`HogVector`]: `blocks_y × blocks_x` blocks, each holding
/// `cells_per_block` histograms of `bin_count` bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogLayout {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub cells_per_block: usize,
    pub bin_count: usize,
}

impl HogLayout {
    pub fn block_len(&self) -> usize {
        self.cells_per_block * self.bin_count
    }

    pub fn len(&self) -> usize {
        self.blocks_x * self.blocks_y * self.block_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HogVector {
    pub values: Vec<f64>,
    pub layout: HogLayout,
}

impl HogVector {
    /// Slice of one normalized block, blocks numbered row-major.
    pub fn block(&self, index: usize) -> &[f64] {
        let n = self.layout.block_len();
        &self.values[index * n..(index + 1) * n]
    }
}

/// Unnormalized per-cell orientation histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct CellHistograms {
    pub cells_x: usize,
    pub cells_y: usize,
    pub bin_count: usize,
    data: Vec<f64>,
}

impl CellHistograms {
    pub fn cell(&self, cell_row: usize, cell_col: usize) -> &[f64] {
        let start = (cell_row * self.cells_x + cell_col) * self.bin_count;
        &self.data[start..start + self.bin_count]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Horizontal and vertical central differences, edges replicated:
/// `gx = I(r, c+1) − I(r, c−1)`, `gy = I(r+1, c) − I(r−1, c)`.
pub fn gradients(grid: &PixelGrid) -> Result<(PixelGrid, PixelGrid), ShapeError> {
    let (w, h) = grid.dims();
    if w < 3 || h < 3 {
        return Err(ShapeError::TooSmall {
            width: w,
            height: h,
            reason: "gradients need at least 3x3 pixels".into(),
        });
    }
    let (r, c) = (|v: usize| v as isize, |v: usize| v as isize);
    let gx = PixelGrid::from_fn(w, h, |row, col| {
        grid.clamped(r(row), c(col) + 1) - grid.clamped(r(row), c(col) - 1)
    });
    let gy = PixelGrid::from_fn(w, h, |row, col| {
        grid.clamped(r(row) + 1, c(col)) - grid.clamped(r(row) - 1, c(col))
    });
    Ok((gx, gy))
}

/// Orientation in degrees of a single gradient; 0 when the gradient is zero.
pub fn orientation(gx: f64, gy: f64, signed: bool) -> f64 {
    if gx == 0.0 && gy == 0.0 {
        return 0.0;
    }
    let mut theta = gy.atan2(gx).to_degrees();
    let range = if signed { 360.0 } else { 180.0 };
    // atan2 lies in (-180°, 180°]
    if theta < 0.0 {
        theta += range;
    }
    if theta >= range {
        theta -= range;
    }
    theta
}

pub fn magnitude_orientation(
    gx: &PixelGrid,
    gy: &PixelGrid,
    signed: bool,
) -> Result<(PixelGrid, PixelGrid), ShapeError> {
    gx.same_dims(gy)?;
    let (w, h) = gx.dims();
    let mut mag = Vec::with_capacity(w * h);
    let mut theta = Vec::with_capacity(w * h);
    for (&x, &y) in gx.samples().iter().zip(gy.samples()) {
        mag.push(x.hypot(y));
        theta.push(orientation(x, y, signed));
    }
    Ok((
        PixelGrid::new(w, h, mag).expect("dims checked"),
        PixelGrid::new(w, h, theta).expect("dims checked"),
    ))
}

/// Bin `k` is centred on `k × range / bin_count`; votes wrap circularly.
pub fn cell_histograms(
    mag: &PixelGrid,
    theta: &PixelGrid,
    params: &HogParams,
) -> Result<CellHistograms, ShapeError> {
    mag.same_dims(theta)?;
    let (w, h) = mag.dims();
    let cs = params.cell_size;
    if w < cs || h < cs {
        return Err(ShapeError::TooSmall {
            width: w,
            height: h,
            reason: format!("smaller than one {cs}px cell"),
        });
    }
    let (cells_x, cells_y) = (w / cs, h / cs);
    let n = params.bin_count;
    let bin_width = params.range_degrees() / n as f64;
    let mut data = vec![0.0; cells_x * cells_y * n];
    for row in 0..cells_y * cs {
        for col in 0..cells_x * cs {
            let m = mag.get(row, col);
            if m == 0.0 {
                continue;
            }
            let pos = theta.get(row, col) / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = (lo as usize) % n;
            let hi = (lo + 1) % n;
            let base = ((row / cs) * cells_x + col / cs) * n;
            data[base + lo] += m * (1.0 - frac);
            data[base + hi] += m * frac;
        }
    }
    Ok(CellHistograms {
        cells_x,
        cells_y,
        bin_count: n,
        data,
    })
}

pub fn normalize_blocks(
    cells: &CellHistograms,
    params: &HogParams,
) -> Result<HogVector, ShapeError> {
    let layout = params.layout_for_cells(cells.cells_x, cells.cells_y)?;
    let mut values = Vec::with_capacity(layout.len());
    let mut block = Vec::with_capacity(layout.block_len());
    for by in 0..layout.blocks_y {
        for bx in 0..layout.blocks_x {
            block.clear();
            for cy in 0..params.block_size {
                for cx in 0..params.block_size {
                    let cell =
                        cells.cell(by * params.block_stride + cy, bx * params.block_stride + cx);
                    block.extend_from_slice(cell);
                }
            }
            let e = params.epsilon;
            let denom = match params.norm {
                BlockNorm::L1 => block.iter().map(|v| v.abs()).sum::<f64>() + e,
                BlockNorm::L2 => (block.iter().map(|v| v * v).sum::<f64>() + e * e).sqrt(),
            };
            values.extend(block.iter().map(|v| v / denom));
        }
    }
    Ok(HogVector { values, layout })
}

pub fn hog(grid: &PixelGrid, params: &HogParams) -> Result<HogVector, ShapeError> {
    params.layout(grid.width(), grid.height())?;
    let (gx, gy) = gradients(grid)?;
    let (mag, theta) = magnitude_orientation(&gx, &gy, params.signed)?;
    let cells = cell_histograms(&mag, &theta, params)?;
    normalize_blocks(&cells, params)
}
