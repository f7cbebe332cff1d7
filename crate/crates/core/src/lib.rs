//! Content-based image retrieval with directional binary code texture maps,
//! single-level Haar sub-bands and histograms of oriented gradients.
//!
//! The descriptor of an image is built in [`pipeline::describe`]:
//!
//! 1. resize to the canonical geometry,
//! 2. directional binary codes per channel and direction, fused by mean
//!    into one colour texture map,
//! 3. Haar decomposition of the texture map and of the original image,
//! 4. HOG of every sub-band, concatenated.
//!
//! Descriptors are stored in a [`index::FeatureIndex`], ranked with
//! [`retrieval::knn`] and benchmarked with [`eval::run_benchmark`].

pub mod error;
pub mod eval;
pub mod haar;
pub mod hog;
pub mod image;
pub mod index;
pub mod metric;
pub mod pipeline;
pub mod retrieval;
pub mod texture;

pub use error::{Error, Result};
pub use eval::{run_benchmark, EvalConfig, EvalReport};
pub use image::{decode_image, PixelGrid, RgbPixelGrid};
pub use index::{FeatureIndex, IndexEntry};
pub use metric::{distance, Metric};
pub use pipeline::{describe, DescriptorConfig, FeatureVector, Fingerprint};
pub use retrieval::{ingest, knn, Layout};
