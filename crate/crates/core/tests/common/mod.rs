//! Brute-force reference implementations and fixture generators shared by
//! the integration tests.

#![allow(dead_code)]

use dbcr::image::{PixelGrid, RgbPixelGrid};
use dbcr::index::{FeatureIndex, IndexEntry};
use dbcr::pipeline::{describe, DescriptorConfig, FeatureVector, Fingerprint};
use dbcr::texture::Direction;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rng: &mut impl Rng, width: usize, height: usize) -> PixelGrid {
    PixelGrid::from_fn(width, height, |_, _| rng.gen_range(0..256) as f64)
}

pub fn random_real_grid(rng: &mut impl Rng, width: usize, height: usize) -> PixelGrid {
    PixelGrid::from_fn(width, height, |_, _| rng.gen_range(-100.0..100.0))
}

fn at(grid: &PixelGrid, row: i64, col: i64) -> f64 {
    let r = row.clamp(0, grid.height() as i64 - 1) as usize;
    let c = col.clamp(0, grid.width() as i64 - 1) as usize;
    grid.get(r, c)
}

/// Derivative of `grid` at (row, col), written out per direction.
pub fn oracle_derivative(grid: &PixelGrid, dir: Direction, d: i64, row: i64, col: i64) -> f64 {
    let here = at(grid, row, col);
    match dir {
        Direction::Deg0 => here - at(grid, row, col - d),
        Direction::Deg45 => here - at(grid, row - d, col + d),
        Direction::Deg90 => here - at(grid, row - d, col),
        Direction::Deg135 => here - at(grid, row - d, col - d),
    }
}

/// Nine-bit code of one pixel: centre, then W, NW, N, NE, E, SE, S, SW at
/// distance `d`, most significant bit first.
pub fn oracle_dbc(grid: &PixelGrid, dir: Direction, d: i64, row: i64, col: i64) -> u32 {
    let ring = [
        (0, 0),
        (0, -d),
        (-d, -d),
        (-d, 0),
        (-d, d),
        (0, d),
        (d, d),
        (d, 0),
        (d, -d),
    ];
    let mut code = 0;
    for (i, (dr, dc)) in ring.into_iter().enumerate() {
        if oracle_derivative(grid, dir, d, row + dr, col + dc) >= 0.0 {
            code += 1 << (8 - i);
        }
    }
    code
}

/// Eight-neighbour LBP code with P=8, R=1: east first, counter-clockwise.
pub fn oracle_lbp(grid: &PixelGrid, row: i64, col: i64) -> u32 {
    let ring = [
        (0, 1),
        (-1, 1),
        (-1, 0),
        (-1, -1),
        (0, -1),
        (1, -1),
        (1, 0),
        (1, 1),
    ];
    let centre = at(grid, row, col);
    let mut code = 0;
    for (p, (dr, dc)) in ring.into_iter().enumerate() {
        if at(grid, row + dr, col + dc) - centre >= 0.0 {
            code += 1 << p;
        }
    }
    code
}

/// The three synthetic classes used by the end-to-end tests.
pub const SYNTHETIC_CLASSES: [&str; 3] = ["checker", "solid", "stripes"];

/// Pattern period of the striped and checkered classes, in pixels.
pub const SYNTHETIC_PERIOD: usize = 16;
/// Per-pixel uniform noise amplitude of the synthetic images, in levels.
pub const SYNTHETIC_NOISE: i32 = 4;

/// One synthetic 8-bit colour image with mild uniform noise.
pub fn synthetic_image(class: &str, size: usize, rng: &mut impl Rng) -> RgbPixelGrid {
    let a: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(40..216) as f64);
    // every channel differs visibly between the two pattern colours
    let b = a.map(|v| {
        let step = rng.gen_range(60..100) as f64;
        if v + step <= 255.0 {
            v + step
        } else {
            v - step
        }
    });
    let p = SYNTHETIC_PERIOD;
    let samples: Vec<[f64; 3]> = (0..size * size)
        .map(|i| {
            let (row, col) = (i / size, i % size);
            let first = match class {
                "solid" => true,
                "stripes" => (col / p).is_multiple_of(2),
                _ => (row / p + col / p).is_multiple_of(2),
            };
            let base = if first { a } else { b };
            base.map(|v| {
                let n = rng.gen_range(-SYNTHETIC_NOISE..=SYNTHETIC_NOISE) as f64;
                (v + n).clamp(0.0, 255.0)
            })
        })
        .collect();
    RgbPixelGrid::from_fn(size, size, |row, col| samples[row * size + col])
}

/// `per_class` images of each synthetic class, labels in class order.
pub fn synthetic_dataset(per_class: usize, size: usize, seed: u64) -> Vec<(String, RgbPixelGrid)> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for class in SYNTHETIC_CLASSES {
        for _ in 0..per_class {
            out.push((class.to_string(), synthetic_image(class, size, &mut rng)));
        }
    }
    out
}

pub fn build_index(images: &[(String, RgbPixelGrid)], config: &DescriptorConfig) -> FeatureIndex {
    let vectors: Vec<FeatureVector> = images
        .par_iter()
        .map(|(_, img)| describe(img, config).unwrap())
        .collect();
    let mut index = FeatureIndex::new(config.fingerprint(), config.feature_dim().unwrap());
    for (id, ((label, _), vector)) in images.iter().zip(vectors).enumerate() {
        index
            .push(IndexEntry {
                id: id as u32,
                path: format!("{label}/{id:03}.ppm"),
                label: label.clone(),
                vector,
            })
            .unwrap();
    }
    index
}

/// Ten one-dimensional points in two classes of five.
pub fn ranking_fixture() -> FeatureIndex {
    let fp = Fingerprint([0xAB; 32]);
    let positions = [0.0, 1.0, 2.0, 6.0, 9.0, 3.0, 5.0, 7.0, 8.0, 12.0];
    let mut index = FeatureIndex::new(fp, 1);
    for (id, &x) in positions.iter().enumerate() {
        let label = if id < 5 { "a" } else { "b" };
        index
            .push(IndexEntry {
                id: id as u32,
                path: format!("{label}/{id}.pgm"),
                label: label.into(),
                vector: FeatureVector::new(vec![x], fp),
            })
            .unwrap();
    }
    index
}

/// Per-query rank-window precision of [`ranking_fixture`] under L2 with
/// the query included, counted by hand.
pub const FIXTURE_WINDOW_5: [f64; 10] = [0.6, 0.6, 0.6, 0.4, 0.4, 0.4, 0.6, 0.6, 0.6, 0.6];
pub const FIXTURE_CLASS_MEANS_5: [f64; 2] = [0.52, 0.56];
pub const FIXTURE_WINDOW_3: [f64; 10] = [
    1.0,
    1.0,
    2.0 / 3.0,
    1.0 / 3.0,
    1.0 / 3.0,
    1.0 / 3.0,
    2.0 / 3.0,
    2.0 / 3.0,
    2.0 / 3.0,
    2.0 / 3.0,
];
pub const FIXTURE_CLASS_MEANS_3: [f64; 2] = [2.0 / 3.0, 0.6];
