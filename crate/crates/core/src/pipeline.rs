//! The full descriptor: colour texture map and original image, each split
//! into Haar sub-bands, each sub-band summarized by HOG, all concatenated.
//!
//! Every vector carries the [`Fingerprint`] of the configuration that made
//! it. Vectors with different fingerprints are never compared.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ConfigError, Error};
use crate::haar::haar_decompose;
use crate::hog::{hog, BlockNorm, HogParams};
use crate::image::{resize_rgb, to_luma_milli, PixelGrid, RgbPixelGrid};
use crate::texture::{dbc_code_map, fuse_channels, fuse_directions, DbcParams};

/// SHA-256 of a configuration's canonical serialization.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Fingerprint> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(Fingerprint(out))
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", &self.to_hex()[..16])
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Fingerprint::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex digits"))
    }
}

/// How the untextured image enters the wavelet stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OriginalBranch {
    /// One BT.601 luma image.
    #[default]
    Grayscale,
    /// R, G and B transformed separately.
    PerChannel,
}

/// Discrete Haar filter normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveletNorm {
    /// Block sums divided by 4; the inverse uses plain sums.
    #[default]
    Averaging,
}

/// Operator combining direction maps and channel maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionRule {
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescriptorConfig {
    pub width: usize,
    pub height: usize,
    pub dbc: DbcParams,
    pub hog: HogParams,
    pub original_branch: OriginalBranch,
    pub wavelet: WaveletNorm,
    pub fusion: FusionRule,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            width: 256,
            height: 256,
            dbc: DbcParams::default(),
            hog: HogParams::default(),
            original_branch: OriginalBranch::default(),
            wavelet: WaveletNorm::default(),
            fusion: FusionRule::default(),
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.dbc.validate()?;
        self.hog.validate()?;
        if self.width == 0 || self.height == 0 {
            return Err(ConfigError::invalid(
                "size",
                "canonical size must be positive",
            ));
        }
        let (bw, bh) = self.band_dims();
        if bw < 3 || bh < 3 {
            return Err(ConfigError::invalid(
                "size",
                "sub-bands must be at least 3x3",
            ));
        }
        self.hog
            .layout(bw, bh)
            .map_err(|e| ConfigError::invalid("size", e.to_string()))?;
        Ok(())
    }

    /// Sub-band dimensions after one Haar level on the canonical size.
    pub fn band_dims(&self) -> (usize, usize) {
        (self.width.div_ceil(2), self.height.div_ceil(2))
    }

    /// Number of images that go through the wavelet stage.
    pub fn transformed_images(&self) -> usize {
        1 + match self.original_branch {
            OriginalBranch::Grayscale => 1,
            OriginalBranch::PerChannel => 3,
        }
    }

    /// Length of every vector produced under this configuration.
    pub fn feature_dim(&self) -> Result<usize, ConfigError> {
        self.validate()?;
        let (bw, bh) = self.band_dims();
        let per_band = self
            .hog
            .layout(bw, bh)
            .map_err(|e| ConfigError::invalid("size", e.to_string()))?
            .len();
        Ok(self.transformed_images() * 4 * per_band)
    }

    /// Stable textual form hashed into the fingerprint.
    pub fn canonical_string(&self) -> String {
        let mut dirs: Vec<u32> = self.dbc.directions.iter().map(|d| d.degrees()).collect();
        dirs.sort_unstable();
        let dirs: Vec<String> = dirs.iter().map(u32::to_string).collect();
        let h = &self.hog;
        let original = match self.original_branch {
            OriginalBranch::Grayscale => "grayscale-bt601-milli",
            OriginalBranch::PerChannel => "per-channel",
        };
        let wavelet = match self.wavelet {
            WaveletNorm::Averaging => "haar-averaging-1level",
        };
        let fusion = match self.fusion {
            FusionRule::Mean => "mean-directions-then-mean-channels",
        };
        let norm = match h.norm {
            BlockNorm::L1 => "l1",
            BlockNorm::L2 => "l2",
        };
        [
            "dbcr-descriptor/1".to_string(),
            format!("size={}x{}/bilinear", self.width, self.height),
            format!("dbc.distance={}", self.dbc.distance),
            format!("dbc.directions={}", dirs.join(",")),
            "dbc.code=9bit-msb-first/replicate".to_string(),
            format!("fusion={fusion}"),
            format!("wavelet={wavelet}"),
            format!("hog.cell={}", h.cell_size),
            format!("hog.block={}", h.block_size),
            format!("hog.stride={}", h.block_stride),
            format!("hog.bins={}", h.bin_count),
            format!("hog.signed={}", h.signed),
            format!("hog.norm={norm}"),
            format!("hog.epsilon={:?}", h.epsilon),
            format!("original={original}"),
            "order=texture,original;ll,lh,hl,hh".to_string(),
            "values=f32".to_string(),
        ]
        .join("\n")
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint(Sha256::digest(self.canonical_string().as_bytes()).into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub fingerprint: Fingerprint,
}

impl FeatureVector {
    pub fn new(values: Vec<f32>, fingerprint: Fingerprint) -> Self {
        FeatureVector {
            values,
            fingerprint,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Fused colour texture map of an image already at canonical size.
pub fn colour_texture_map(img: &RgbPixelGrid, dbc: &DbcParams) -> PixelGrid {
    let [r, g, b] = img.channels().map(|channel| {
        let maps: Vec<_> = dbc
            .directions
            .iter()
            .map(|&dir| dbc_code_map(channel, dir, dbc))
            .collect();
        fuse_directions(&maps).expect("maps share the channel's dimensions")
    });
    fuse_channels(&r, &g, &b).expect("channels share dimensions")
}

/// Computes the descriptor of one image.
///
/// Values are computed in `f64` and narrowed to `f32` once at the end.
pub fn describe(img: &RgbPixelGrid, config: &DescriptorConfig) -> Result<FeatureVector, Error> {
    config.validate()?;
    let img = resize_rgb(img, config.width, config.height);

    let mut transformed = vec![colour_texture_map(&img, &config.dbc)];
    match config.original_branch {
        OriginalBranch::Grayscale => transformed.push(to_luma_milli(&img)),
        OriginalBranch::PerChannel => {
            transformed.extend(img.channels().into_iter().cloned());
        }
    }

    let mut values = Vec::with_capacity(config.feature_dim()?);
    for grid in &transformed {
        let bands = haar_decompose(grid);
        for band in bands.bands() {
            let h = hog(band, &config.hog)?;
            values.extend(h.values.iter().map(|&v| v as f32));
        }
    }
    Ok(FeatureVector::new(values, config.fingerprint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::texture::Direction;

    fn small() -> DescriptorConfig {
        DescriptorConfig {
            width: 64,
            height: 64,
            ..Default::default()
        }
    }

    #[test]
    fn default_dimension() {
        assert_eq!(DescriptorConfig::default().feature_dim().unwrap(), 64_800);
        let per_channel = DescriptorConfig {
            original_branch: OriginalBranch::PerChannel,
            ..Default::default()
        };
        assert_eq!(per_channel.feature_dim().unwrap(), 4 * 4 * 8100);
    }

    #[test]
    fn fingerprint_tracks_every_parameter() {
        let base = DescriptorConfig::default();
        let mut variants = vec![base.clone()];
        let mut c = base.clone();
        c.width = 128;
        variants.push(c);
        let mut c = base.clone();
        c.dbc.distance = 2;
        variants.push(c);
        let mut c = base.clone();
        c.dbc.directions = vec![Direction::Deg0];
        variants.push(c);
        let mut c = base.clone();
        c.hog.epsilon = 1e-4;
        variants.push(c);
        let mut c = base.clone();
        c.hog.norm = BlockNorm::L1;
        variants.push(c);
        let mut c = base.clone();
        c.original_branch = OriginalBranch::PerChannel;
        variants.push(c);
        let fps: std::collections::HashSet<_> = variants.iter().map(|c| c.fingerprint()).collect();
        assert_eq!(fps.len(), variants.len());
        assert_eq!(
            base.fingerprint(),
            DescriptorConfig::default().fingerprint()
        );
    }

    #[test]
    fn direction_order_does_not_change_fingerprint() {
        let mut c = DescriptorConfig::default();
        c.dbc.directions.reverse();
        assert_eq!(c.fingerprint(), DescriptorConfig::default().fingerprint());
    }

    #[test]
    fn constant_image_has_zero_texture_contribution() {
        let cfg = small();
        let img = RgbPixelGrid::from_fn(64, 64, |_, _| [40.0, 90.0, 200.0]);
        let v = describe(&img, &cfg).unwrap();
        assert_eq!(v.dim(), cfg.feature_dim().unwrap());
        let texture_len = v.dim() / cfg.transformed_images();
        assert!(v.values[..texture_len].iter().all(|&x| x == 0.0));
        assert!(v.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn rejects_too_small_canonical_size() {
        let cfg = DescriptorConfig {
            width: 16,
            height: 16,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(cfg.feature_dim().is_err());
    }

    #[test]
    fn config_toml_style_roundtrip() {
        let json = serde_json::to_string(&DescriptorConfig::default()).unwrap();
        let back: DescriptorConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, DescriptorConfig::default());
        let partial: DescriptorConfig = serde_json::from_str(r#"{"width": 128}"#).unwrap();
        assert_eq!(partial.height, 256);
        assert_eq!(partial.hog, HogParams::default());
    }
}
