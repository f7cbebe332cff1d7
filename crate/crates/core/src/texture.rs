//! Directional binary codes, the plain LBP baseline, and the fusion of
//! per-direction / per-channel code maps into one colour texture map.
//!
//! Coordinates are `(row, col)`. Pixels outside the grid take the value of
//! the nearest edge pixel (unbounded replicate padding), so every code map
//! has the dimensions of its source.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ShapeError};
use crate::image::{pad_replicate, PixelGrid};

/// One of the four derivative directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Direction {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl TryFrom<u32> for Direction {
    type Error = String;

    fn try_from(deg: u32) -> Result<Self, Self::Error> {
        Direction::from_degrees(deg)
            .ok_or_else(|| format!("direction must be 0, 45, 90 or 135, got {deg}"))
    }
}

impl From<Direction> for u32 {
    fn from(d: Direction) -> u32 {
        d.degrees()
    }
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Deg0,
        Direction::Deg45,
        Direction::Deg90,
        Direction::Deg135,
    ];

    pub fn degrees(self) -> u32 {
        match self {
            Direction::Deg0 => 0,
            Direction::Deg45 => 45,
            Direction::Deg90 => 90,
            Direction::Deg135 => 135,
        }
    }

    pub fn from_degrees(deg: u32) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.degrees() == deg)
    }

    /// `(Δrow, Δcol)` of the pixel subtracted from the centre at distance `d`.
    #[inline]
    pub fn neighbor_offset(self, d: isize) -> (isize, isize) {
        match self {
            Direction::Deg0 => (0, -d),
            Direction::Deg45 => (-d, d),
            Direction::Deg90 => (-d, 0),
            Direction::Deg135 => (-d, -d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbcParams {
    pub distance: usize,
    pub directions: Vec<Direction>,
}

impl Default for DbcParams {
    fn default() -> Self {
        DbcParams {
            distance: 1,
            directions: Direction::ALL.to_vec(),
        }
    }
}

impl DbcParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.distance == 0 {
            return Err(ConfigError::invalid("dbc.distance", "must be at least 1"));
        }
        if self.directions.is_empty() {
            return Err(ConfigError::invalid("dbc.directions", "must not be empty"));
        }
        let mut seen = self.directions.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.directions.len() {
            return Err(ConfigError::invalid(
                "dbc.directions",
                "contains duplicates",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbpParams {
    pub neighbors: u32,
    pub radius: f64,
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams {
            neighbors: 8,
            radius: 1.0,
        }
    }
}

impl LbpParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(4..=32).contains(&self.neighbors) {
            return Err(ConfigError::invalid(
                "lbp.neighbors",
                "must be within 4..=32",
            ));
        }
        if self.radius.is_nan() || self.radius < 1.0 || !self.radius.is_finite() {
            return Err(ConfigError::invalid(
                "lbp.radius",
                "must be finite and at least 1",
            ));
        }
        Ok(())
    }
}

/// What produced a [`CodeMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeSource {
    Dbc(Direction),
    Lbp,
}

/// Per-pixel integer codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMap {
    width: usize,
    height: usize,
    codes: Vec<u32>,
    code_bits: u32,
    source: CodeSource,
}

impl CodeMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn code_bits(&self) -> u32 {
        self.code_bits
    }

    pub fn source(&self) -> CodeSource {
        self.source
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.codes[row * self.width + col]
    }

    /// Debug rendering: codes are shifted down to 8 bits (`code >> (bits - 8)`,
    /// i.e. `floor(code / 2)` for DBC). Never consumed by the pipeline.
    pub fn to_debug_grid(&self) -> PixelGrid {
        let shift = self.code_bits.saturating_sub(8);
        PixelGrid::new(
            self.width,
            self.height,
            self.codes.iter().map(|&c| (c >> shift) as f64).collect(),
        )
        .expect("code map dims are positive")
    }
}

/// `I(x) − I(neighbour)` for direction `dir` at distance `d`, with
/// out-of-grid coordinates clamped to the edge.
pub fn directional_derivative(
    grid: &PixelGrid,
    dir: Direction,
    d: usize,
    row: isize,
    col: isize,
) -> f64 {
    let (dr, dc) = dir.neighbor_offset(d as isize);
    grid.clamped(row, col) - grid.clamped(row + dr, col + dc)
}

/// Step function shared by the DBC and LBP codes: zero counts as positive.
#[inline]
pub fn dbc_threshold(x: f64) -> u32 {
    (x >= 0.0) as u32
}

/// The nine sample positions of a DBC code, most significant bit first.
pub const DBC_POSITIONS: [(isize, isize); 9] = [
    (0, 0),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
];

/// Nine-bit directional binary code of every pixel for one direction.
pub fn dbc_code_map(grid: &PixelGrid, dir: Direction, params: &DbcParams) -> CodeMap {
    let d = params.distance;
    let (w, h) = grid.dims();
    // Derivatives are needed up to `d` outside the grid, and each of those
    // reads another `d` further out.
    let padded = pad_replicate(grid, 2 * d);
    let pw = padded.width();
    let (dr, dc) = dir.neighbor_offset(d as isize);

    // bit plane over the grid grown by `d` on each side
    let bw = w + 2 * d;
    let bh = h + 2 * d;
    let mut bits = vec![0u8; bw * bh];
    let src = padded.samples();
    for br in 0..bh {
        let pr = br + d;
        let nr = (pr as isize + dr) as usize;
        for bc in 0..bw {
            let pc = bc + d;
            let nc = (pc as isize + dc) as usize;
            bits[br * bw + bc] = dbc_threshold(src[pr * pw + pc] - src[nr * pw + nc]) as u8;
        }
    }

    let offsets: Vec<isize> = DBC_POSITIONS
        .iter()
        .map(|&(r, c)| r * d as isize * bw as isize + c * d as isize)
        .collect();
    let mut codes = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let base = ((row + d) * bw + col + d) as isize;
            let code = offsets.iter().fold(0u32, |acc, &off| {
                (acc << 1) | bits[(base + off) as usize] as u32
            });
            codes.push(code);
        }
    }
    CodeMap {
        width: w,
        height: h,
        codes,
        code_bits: 9,
        source: CodeSource::Dbc(dir),
    }
}

/// Ring of neighbour offsets `(Δrow, Δcol)`, starting east and turning
/// counter-clockwise (up is negative row).
fn lbp_ring(params: &LbpParams) -> Vec<(f64, f64)> {
    if params.neighbors == 8 && params.radius == 1.0 {
        return vec![
            (0.0, 1.0),
            (-1.0, 1.0),
            (-1.0, 0.0),
            (-1.0, -1.0),
            (0.0, -1.0),
            (1.0, -1.0),
            (1.0, 0.0),
            (1.0, 1.0),
        ];
    }
    let snap = |v: f64| {
        let r = v.round();
        if (v - r).abs() < 1e-9 {
            r
        } else {
            v
        }
    };
    (0..params.neighbors)
        .map(|p| {
            let theta = std::f64::consts::TAU * p as f64 / params.neighbors as f64;
            (
                snap(-params.radius * theta.sin()),
                snap(params.radius * theta.cos()),
            )
        })
        .collect()
}

fn sample_bilinear(grid: &PixelGrid, row: f64, col: f64) -> f64 {
    let r0 = row.floor();
    let c0 = col.floor();
    let (ty, tx) = (row - r0, col - c0);
    let (r0, c0) = (r0 as isize, c0 as isize);
    let p00 = grid.clamped(r0, c0);
    if ty == 0.0 && tx == 0.0 {
        return p00;
    }
    let p01 = grid.clamped(r0, c0 + 1);
    let p10 = grid.clamped(r0 + 1, c0);
    let p11 = grid.clamped(r0 + 1, c0 + 1);
    let top = p00 + tx * (p01 - p00);
    let bottom = p10 + tx * (p11 - p10);
    top + ty * (bottom - top)
}

/// Local binary pattern `Σ s(g_p − g_c)·2^p` of every pixel.
///
/// `P = 8, R = 1` reads the literal 3×3 neighbourhood; other settings sample
/// the circle bilinearly.
pub fn lbp_code_map(grid: &PixelGrid, params: &LbpParams) -> CodeMap {
    let ring = lbp_ring(params);
    let (w, h) = grid.dims();
    let mut codes = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let center = grid.get(row, col);
            let code = ring.iter().enumerate().fold(0u32, |acc, (p, &(dr, dc))| {
                let g = sample_bilinear(grid, row as f64 + dr, col as f64 + dc);
                acc | (dbc_threshold(g - center) << p)
            });
            codes.push(code);
        }
    }
    CodeMap {
        width: w,
        height: h,
        codes,
        code_bits: params.neighbors,
        source: CodeSource::Lbp,
    }
}

/// Per-pixel mean of one channel's direction maps.
pub fn fuse_directions(maps: &[CodeMap]) -> Result<PixelGrid, ShapeError> {
    let first = maps
        .first()
        .ok_or_else(|| ShapeError::Fusion("no code maps supplied".into()))?;
    let mut seen = Vec::with_capacity(maps.len());
    for m in maps {
        if (m.width, m.height) != (first.width, first.height) {
            return Err(ShapeError::Mismatch(
                first.width,
                first.height,
                m.width,
                m.height,
            ));
        }
        match m.source {
            CodeSource::Dbc(dir) if !seen.contains(&dir) => seen.push(dir),
            CodeSource::Dbc(dir) => {
                return Err(ShapeError::Fusion(format!(
                    "direction {}° supplied twice",
                    dir.degrees()
                )))
            }
            CodeSource::Lbp => {
                return Err(ShapeError::Fusion(
                    "LBP maps cannot be fused as directions".into(),
                ))
            }
        }
    }
    let n = maps.len() as f64;
    let samples = (0..first.codes.len())
        .map(|i| maps.iter().map(|m| m.codes[i] as f64).sum::<f64>() / n)
        .collect();
    Ok(PixelGrid::new(first.width, first.height, samples).expect("dims checked"))
}

/// Per-pixel mean of the three channel texture maps.
pub fn fuse_channels(
    r_map: &PixelGrid,
    g_map: &PixelGrid,
    b_map: &PixelGrid,
) -> Result<PixelGrid, ShapeError> {
    r_map.same_dims(g_map)?;
    r_map.same_dims(b_map)?;
    let samples = r_map
        .samples()
        .iter()
        .zip(g_map.samples())
        .zip(b_map.samples())
        .map(|((&r, &g), &b)| {
            if r == g && g == b {
                r
            } else {
                (r + g + b) / 3.0
            }
        })
        .collect();
    Ok(PixelGrid::new(r_map.width(), r_map.height(), samples).expect("dims checked"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> PixelGrid {
        PixelGrid::from_fn(w, h, |_, c| c as f64)
    }

    #[test]
    fn derivative_examples() {
        let flat = PixelGrid::filled(4, 4, 9.0);
        for dir in Direction::ALL {
            for d in 1..3 {
                assert_eq!(directional_derivative(&flat, dir, d, 1, 2), 0.0);
            }
        }
        let row = PixelGrid::new(2, 1, vec![3.0, 7.0]).unwrap();
        assert_eq!(directional_derivative(&row, Direction::Deg0, 1, 0, 1), 4.0);

        let r = ramp(3, 3);
        assert_eq!(directional_derivative(&r, Direction::Deg90, 1, 1, 1), 0.0);
        assert_eq!(directional_derivative(&r, Direction::Deg0, 1, 1, 1), 1.0);
    }

    #[test]
    fn threshold_boundary() {
        assert_eq!(dbc_threshold(5.0), 1);
        assert_eq!(dbc_threshold(-3.0), 0);
        assert_eq!(dbc_threshold(0.0), 1);
    }

    #[test]
    fn constant_grid_codes_saturate() {
        let flat = PixelGrid::filled(6, 5, 17.0);
        for dir in Direction::ALL {
            let m = dbc_code_map(&flat, dir, &DbcParams::default());
            assert!(m.codes().iter().all(|&c| c == 511));
            assert_eq!((m.width(), m.height()), (6, 5));
        }
        let lbp = lbp_code_map(&flat, &LbpParams::default());
        assert!(lbp.codes().iter().all(|&c| c == 255));
    }

    #[test]
    fn horizontal_ramp_zero_degrees_is_all_ones() {
        let r = ramp(8, 8);
        let m = dbc_code_map(&r, Direction::Deg0, &DbcParams::default());
        for row in 2..6 {
            for col in 2..6 {
                assert_eq!(m.get(row, col), 511);
            }
        }
    }

    #[test]
    fn lbp_darker_neighbours_give_zero() {
        let g = PixelGrid::from_fn(3, 3, |r, c| if (r, c) == (1, 1) { 5.0 } else { 4.0 });
        assert_eq!(lbp_code_map(&g, &LbpParams::default()).get(1, 1), 0);
    }

    #[test]
    fn lbp_bit_zero_is_east() {
        // only the east neighbour is brighter than the centre
        let g = PixelGrid::from_fn(3, 3, |r, c| match (r, c) {
            (1, 2) => 9.0,
            (1, 1) => 5.0,
            _ => 0.0,
        });
        assert_eq!(lbp_code_map(&g, &LbpParams::default()).get(1, 1), 1);
        // north-east is bit 1
        let g = PixelGrid::from_fn(3, 3, |r, c| match (r, c) {
            (0, 2) => 9.0,
            (1, 1) => 5.0,
            _ => 0.0,
        });
        assert_eq!(lbp_code_map(&g, &LbpParams::default()).get(1, 1), 2);
    }

    #[test]
    fn generic_ring_matches_literal_on_axes() {
        // P=4, R=1 samples exactly the four axis neighbours
        let g = PixelGrid::from_fn(5, 5, |r, c| ((r * 7 + c * 13) % 11) as f64);
        let params = LbpParams {
            neighbors: 4,
            radius: 1.0,
        };
        let m = lbp_code_map(&g, &params);
        let e8 = lbp_code_map(&g, &LbpParams::default());
        for row in 0..5 {
            for col in 0..5 {
                let full = e8.get(row, col);
                // bits 0, 2, 4, 6 of the 8-ring are E, N, W, S
                let expect = (full & 1) | ((full >> 1) & 2) | ((full >> 2) & 4) | ((full >> 3) & 8);
                assert_eq!(m.get(row, col), expect);
            }
        }
    }

    #[test]
    fn fuse_directions_cases() {
        let flat = PixelGrid::filled(3, 3, 1.0);
        let maps: Vec<CodeMap> = Direction::ALL
            .iter()
            .map(|&d| dbc_code_map(&flat, d, &DbcParams::default()))
            .collect();
        let fused = fuse_directions(&maps).unwrap();
        assert!(fused.samples().iter().all(|&v| v == 511.0));

        let mk = |dir, code| CodeMap {
            width: 1,
            height: 1,
            codes: vec![code],
            code_bits: 9,
            source: CodeSource::Dbc(dir),
        };
        let maps = [
            mk(Direction::Deg0, 0),
            mk(Direction::Deg45, 511),
            mk(Direction::Deg90, 0),
            mk(Direction::Deg135, 511),
        ];
        assert_eq!(fuse_directions(&maps).unwrap().samples(), &[255.5]);

        let dup = [mk(Direction::Deg0, 0), mk(Direction::Deg0, 1)];
        assert!(matches!(fuse_directions(&dup), Err(ShapeError::Fusion(_))));

        let mut odd = mk(Direction::Deg45, 3);
        odd.width = 2;
        odd.codes = vec![3, 3];
        assert!(matches!(
            fuse_directions(&[mk(Direction::Deg0, 0), odd]),
            Err(ShapeError::Mismatch(..))
        ));
    }

    #[test]
    fn fuse_channels_cases() {
        let a = PixelGrid::from_fn(2, 2, |r, c| (r * 2 + c) as f64 * 37.3);
        assert_eq!(fuse_channels(&a, &a, &a).unwrap(), a);

        let x = PixelGrid::filled(1, 1, 30.0);
        let y = PixelGrid::filled(1, 1, 60.0);
        let z = PixelGrid::filled(1, 1, 90.0);
        assert_eq!(fuse_channels(&x, &y, &z).unwrap().samples(), &[60.0]);

        let wide = PixelGrid::filled(2, 1, 0.0);
        assert!(fuse_channels(&x, &wide, &z).is_err());
    }

    #[test]
    fn debug_grid_halves_dbc_codes() {
        let flat = PixelGrid::filled(2, 2, 0.0);
        let m = dbc_code_map(&flat, Direction::Deg0, &DbcParams::default());
        assert!(m.to_debug_grid().samples().iter().all(|&v| v == 255.0));
    }

    #[test]
    fn params_validation() {
        assert!(DbcParams::default().validate().is_ok());
        let bad = DbcParams {
            distance: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let none = DbcParams {
            distance: 1,
            directions: vec![],
        };
        assert!(none.validate().is_err());
        assert!(LbpParams {
            neighbors: 3,
            radius: 1.0
        }
        .validate()
        .is_err());
        assert!(LbpParams {
            neighbors: 8,
            radius: 0.5
        }
        .validate()
        .is_err());
    }
}
