//! Single-level 2D Haar decomposition with the averaging normalization.
//!
//! For each 2×2 block `[[a, b], [c, d]]`:
//!
//! ```text
//! ll = (a + b + c + d) / 4     lh = (a - b + c - d) / 4
//! hl = (a + b - c - d) / 4     hh = (a - b - c + d) / 4
//! ```
//!
//! `ll` stays in the source value range. Odd widths or heights are
//! replicate-padded by one column/row before the transform.

use crate::image::{pad_replicate_sides, PixelGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct SubBands {
    pub ll: PixelGrid,
    pub lh: PixelGrid,
    pub hl: PixelGrid,
    pub hh: PixelGrid,
    /// Source dimensions before even-padding.
    pub source_width: usize,
    pub source_height: usize,
}

impl SubBands {
    /// Bands in the fixed order LL, LH, HL, HH.
    pub fn bands(&self) -> [&PixelGrid; 4] {
        [&self.ll, &self.lh, &self.hl, &self.hh]
    }

    pub fn band_dims(&self) -> (usize, usize) {
        self.ll.dims()
    }
}

pub fn haar_decompose(grid: &PixelGrid) -> SubBands {
    let (w, h) = grid.dims();
    let padded = pad_replicate_sides(grid, 0, h % 2, 0, w % 2);
    let (bw, bh) = (padded.width() / 2, padded.height() / 2);
    let n = bw * bh;
    let (mut ll, mut lh, mut hl, mut hh) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for br in 0..bh {
        for bc in 0..bw {
            let a = padded.get(2 * br, 2 * bc);
            let b = padded.get(2 * br, 2 * bc + 1);
            let c = padded.get(2 * br + 1, 2 * bc);
            let d = padded.get(2 * br + 1, 2 * bc + 1);
            ll.push((a + b + c + d) / 4.0);
            lh.push((a - b + c - d) / 4.0);
            hl.push((a + b - c - d) / 4.0);
            hh.push((a - b - c + d) / 4.0);
        }
    }
    let band = |v| PixelGrid::new(bw, bh, v).expect("band dims are positive");
    SubBands {
        ll: band(ll),
        lh: band(lh),
        hl: band(hl),
        hh: band(hh),
        source_width: w,
        source_height: h,
    }
}

/// Inverse of [`haar_decompose`]; padding rows/columns are trimmed.
pub fn haar_reconstruct(bands: &SubBands) -> PixelGrid {
    let (bw, _) = bands.band_dims();
    let (w, h) = (bands.source_width, bands.source_height);
    PixelGrid::from_fn(w, h, |r, c| {
        let i = (r / 2) * bw + c / 2;
        let ll = bands.ll.samples()[i];
        let lh = bands.lh.samples()[i];
        let hl = bands.hl.samples()[i];
        let hh = bands.hh.samples()[i];
        match (r % 2, c % 2) {
            (0, 0) => ll + lh + hl + hh,
            (0, _) => ll - lh + hl - hh,
            (_, 0) => ll + lh - hl - hh,
            _ => ll - lh - hl + hh,
        }
    })
}
