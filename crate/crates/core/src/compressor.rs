//! Visual token compression: shape and value semantics.
//!
//! A frame is patchified into an `H0 x W0 x C0` feature grid, zero-padded so
//! both sides are multiples of `2^(N+1)` (or `2^N` without the merger),
//! passed through `N` compression blocks (pixel-unshuffle, 3x3 convolution,
//! inference-mode normalization, SiLU), flattened, merged 2x2 into tokens
//! and summed with a 2D sinusoidal positional encoding.
//!
//! The encoder features and all weights are seeded pseudo-random values, so
//! every stage is bit-reproducible from `(frame_seed, weight_seed)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, SplitMix64};

/// Visual tokens per 720x640 frame produced by the native vision tower.
pub const NATIVE_TOKENS_PER_FRAME: usize = 598;
/// Hidden width the last block projects to.
pub const INTERFACE_WIDTH: usize = 1280;
pub const DEFAULT_FEATURE_CHANNELS: usize = 32;
pub const DEFAULT_INTERMEDIATE_CHANNELS: usize = 64;

const BLOCK_STREAM: u64 = 0xB10C;
const MERGER_STREAM: u64 = 0x3E26;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompressError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid compression config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, CompressError>;

/// An `H x W x C` tensor stored row-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FeatureGrid {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(CompressError::InvalidArgument(format!("empty grid {height}x{width}x{channels}")));
        }
        if data.len() != height * width * channels {
            return Err(CompressError::InvalidArgument(format!(
                "data length {} != {height}*{width}*{channels}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CompressError::InvalidArgument("non-finite feature value".into()));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [f32] {
        let start = (row * self.width + col) * self.channels;
        &mut self.data[start..start + self.channels]
    }
}

/// Per-frame token list; `data` holds `len() * dim` values, token-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub dim: usize,
    pub data: Vec<f32>,
    pub frame_index: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn token(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompressionConfig {
    pub image_width: usize,
    pub image_height: usize,
    pub patch_size: usize,
    pub num_blocks: usize,
    pub apply_merger: bool,
    /// Channels of the pseudo encoder features (`C0`).
    pub feature_channels: usize,
    /// Output channels of each block; the last entry is the interface width.
    pub channel_plan: Vec<usize>,
    pub weight_seed: u64,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self::with_blocks(2)
    }
}

impl CompressionConfig {
    /// 720x640 frames, patch 16, merger on, `n` blocks ending at the
    /// interface width.
    pub fn with_blocks(n: usize) -> Self {
        Self {
            image_width: 640,
            image_height: 720,
            patch_size: 16,
            num_blocks: n,
            apply_merger: true,
            feature_channels: DEFAULT_FEATURE_CHANNELS,
            channel_plan: default_channel_plan(n),
            weight_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CompressError::InvalidConfig(m));
        let (h0, w0) = self.patch_grid_dims()?;
        if h0 == 0 || w0 == 0 {
            return bad(format!("{}x{} image smaller than one {} px patch", self.image_height, self.image_width, self.patch_size));
        }
        if self.channel_plan.len() != self.num_blocks {
            return bad(format!("channel_plan has {} entries for {} blocks", self.channel_plan.len(), self.num_blocks));
        }
        if self.feature_channels == 0 || self.channel_plan.contains(&0) {
            return bad("channel counts must be positive".into());
        }
        if !self.output_channels().is_multiple_of(4) {
            return bad(format!("output width {} must be divisible by 4 for positional encoding", self.output_channels()));
        }
        if self.num_blocks > 16 {
            return bad(format!("{} blocks is beyond any sensible input size", self.num_blocks));
        }
        Ok(())
    }

    /// `(H0, W0)`: whole patches that fit in the image.
    pub fn patch_grid_dims(&self) -> Result<(usize, usize)> {
        if self.patch_size == 0 {
            return Err(CompressError::InvalidArgument("patch_size must be positive".into()));
        }
        Ok((self.image_height / self.patch_size, self.image_width / self.patch_size))
    }

    /// Padding multiple for the patch grid.
    pub fn pad_multiple(&self) -> usize {
        1 << (self.num_blocks + usize::from(self.apply_merger))
    }

    pub fn output_channels(&self) -> usize {
        self.channel_plan.last().copied().unwrap_or(self.feature_channels)
    }

    /// Grid sizes at each stage, from raw patch grid to final token count.
    pub fn shape_trace(&self) -> Result<ShapeTrace> {
        let (h0, w0) = self.patch_grid_dims()?;
        let m = self.pad_multiple();
        let padded = (h0.div_ceil(m) * m, w0.div_ceil(m) * m);
        let blocks = (1..=self.num_blocks).map(|i| (padded.0 >> i, padded.1 >> i)).collect::<Vec<_>>();
        let (hn, wn) = blocks.last().copied().unwrap_or(padded);
        let tokens = if self.apply_merger { hn * wn / 4 } else { hn * wn };
        Ok(ShapeTrace { patch_grid: (h0, w0), padded, blocks, tokens })
    }
}

pub fn default_channel_plan(n: usize) -> Vec<usize> {
    (0..n).map(|i| if i + 1 == n { INTERFACE_WIDTH } else { DEFAULT_INTERMEDIATE_CHANNELS }).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTrace {
    pub patch_grid: (usize, usize),
    pub padded: (usize, usize),
    /// `(H_i, W_i)` after each block.
    pub blocks: Vec<(usize, usize)>,
    pub tokens: usize,
}

pub fn patch_grid_dims(config: &CompressionConfig) -> Result<(usize, usize)> {
    config.patch_grid_dims()
}

/// Tokens per frame after the full pipeline.
pub fn token_count(config: &CompressionConfig) -> Result<usize> {
    Ok(config.shape_trace()?.tokens)
}

/// `(r_spatial, r_native)`: the `4^N` spatial reduction of the blocks and the
/// reduction relative to the native tokenizer's per-frame count.
pub fn compression_ratio(config: &CompressionConfig) -> Result<(u64, f64)> {
    let r_spatial = 4u64.pow(config.num_blocks as u32);
    let tokens = token_count(config)?;
    Ok((r_spatial, NATIVE_TOKENS_PER_FRAME as f64 / tokens as f64))
}

/// Zero-pad at the bottom and right up to the next multiples of `multiple`.
pub fn pad_grid(grid: &FeatureGrid, multiple: usize) -> FeatureGrid {
    let multiple = multiple.max(1);
    let h = grid.height.div_ceil(multiple) * multiple;
    let w = grid.width.div_ceil(multiple) * multiple;
    if (h, w) == (grid.height, grid.width) {
        return grid.clone();
    }
    let mut out = FeatureGrid::zeros(h, w, grid.channels);
    for r in 0..grid.height {
        let src = &grid.data[r * grid.width * grid.channels..(r + 1) * grid.width * grid.channels];
        out.data[r * w * grid.channels..r * w * grid.channels + src.len()].copy_from_slice(src);
    }
    out
}

/// Space-to-depth by 2: each output vector is the top-left, top-right,
/// bottom-left and bottom-right input vectors concatenated.
pub fn pixel_unshuffle(grid: &FeatureGrid) -> Result<FeatureGrid> {
    if !grid.height.is_multiple_of(2) || !grid.width.is_multiple_of(2) {
        return Err(CompressError::InvalidArgument(format!("pixel_unshuffle needs even dims, got {}x{}", grid.height, grid.width)));
    }
    let c = grid.channels;
    let mut out = FeatureGrid::zeros(grid.height / 2, grid.width / 2, 4 * c);
    for r in 0..out.height {
        for col in 0..out.width {
            let dst = out.pixel_mut(r, col);
            for (k, (dr, dc)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                dst[k * c..(k + 1) * c].copy_from_slice(grid.pixel(2 * r + dr, 2 * col + dc));
            }
        }
    }
    Ok(out)
}

/// Weights of one compression block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    /// Channels entering the convolution (after pixel-unshuffle).
    pub in_channels: usize,
    pub out_channels: usize,
    /// Layout `[out][ky][kx][in]`.
    pub kernel: Vec<f32>,
    pub norm_scale: Vec<f32>,
    pub norm_shift: Vec<f32>,
}

impl BlockParams {
    /// Kernel taps uniform in `[-1/sqrt(9*in), 1/sqrt(9*in)]`, drawn from a
    /// SplitMix64 stream keyed by `(weight_seed, block_index)`; identity
    /// normalization.
    pub fn seeded(in_channels: usize, out_channels: usize, weight_seed: u64, block_index: usize) -> Self {
        let mut stream = SplitMix64::new(derive_seed(weight_seed, &[BLOCK_STREAM, block_index as u64]));
        let bound = 1.0 / ((9 * in_channels) as f32).sqrt();
        let kernel = (0..out_channels * 9 * in_channels).map(|_| stream.next_symmetric_f32() * bound).collect();
        Self {
            in_channels,
            out_channels,
            kernel,
            norm_scale: vec![1.0; out_channels],
            norm_shift: vec![0.0; out_channels],
        }
    }

    /// Center tap maps channel `i` to channel `i`; everything else is zero.
    pub fn identity(channels: usize) -> Self {
        let mut kernel = vec![0.0; channels * 9 * channels];
        for o in 0..channels {
            kernel[(o * 9 + 4) * channels + o] = 1.0;
        }
        Self {
            in_channels: channels,
            out_channels: channels,
            kernel,
            norm_scale: vec![1.0; channels],
            norm_shift: vec![0.0; channels],
        }
    }

    fn tap(&self, out: usize, ky: usize, kx: usize) -> &[f32] {
        let start = ((out * 3 + ky) * 3 + kx) * self.in_channels;
        &self.kernel[start..start + self.in_channels]
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    // Fixed 8-lane accumulation order: vectorizes and stays reproducible.
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    acc.iter().sum::<f32>() + tail
}

pub fn silu(x: f32) -> f32 {
    x / (1.0 + (-x).exp())
}

/// Zero-padded 3x3 stride-1 convolution.
pub fn conv3x3(grid: &FeatureGrid, params: &BlockParams) -> Result<FeatureGrid> {
    if grid.channels != params.in_channels {
        return Err(CompressError::InvalidArgument(format!(
            "block expects {} input channels, got {}",
            params.in_channels, grid.channels
        )));
    }
    let mut out = FeatureGrid::zeros(grid.height, grid.width, params.out_channels);
    for r in 0..grid.height {
        for c in 0..grid.width {
            let dst = out.pixel_mut(r, c);
            for ky in 0..3 {
                let Some(sr) = (r + ky).checked_sub(1).filter(|&v| v < grid.height) else { continue };
                for kx in 0..3 {
                    let Some(sc) = (c + kx).checked_sub(1).filter(|&v| v < grid.width) else { continue };
                    let input = grid.pixel(sr, sc);
                    for (o, d) in dst.iter_mut().enumerate() {
                        *d += dot(params.tap(o, ky, kx), input);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Pixel-unshuffle, 3x3 convolution, per-channel affine normalization, SiLU.
pub fn compression_block(grid: &FeatureGrid, params: &BlockParams) -> Result<FeatureGrid> {
    let mut out = conv3x3(&pixel_unshuffle(grid)?, params)?;
    let ch = out.channels;
    for (i, v) in out.data.iter_mut().enumerate() {
        let o = i % ch;
        *v = silu(*v * params.norm_scale[o] + params.norm_shift[o]);
    }
    Ok(out)
}

/// Linear map from four concatenated neighbors back to `channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct MergerParams {
    pub channels: usize,
    /// Layout `[out][4 * channels]`.
    pub weight: Vec<f32>,
}

impl MergerParams {
    pub fn seeded(channels: usize, weight_seed: u64) -> Self {
        let mut stream = SplitMix64::new(derive_seed(weight_seed, &[MERGER_STREAM]));
        let bound = 1.0 / ((4 * channels) as f32).sqrt();
        let weight = (0..channels * 4 * channels).map(|_| stream.next_symmetric_f32() * bound).collect();
        Self { channels, weight }
    }

    /// Copies the first `channels` inputs (the top-left vector).
    pub fn identity_prefix(channels: usize) -> Self {
        let mut weight = vec![0.0; channels * 4 * channels];
        for o in 0..channels {
            weight[o * 4 * channels + o] = 1.0;
        }
        Self { channels, weight }
    }
}

/// Group 2x2 neighborhoods of the row-major flattened grid into tokens.
/// Tokens come out row-major over the `H/2 x W/2` merged grid.
pub fn patch_merger(grid: &FeatureGrid, params: &MergerParams) -> Result<TokenSequence> {
    if params.channels != grid.channels {
        return Err(CompressError::InvalidArgument(format!(
            "merger expects {} channels, got {}",
            params.channels, grid.channels
        )));
    }
    let grouped = pixel_unshuffle(grid)?;
    let c = grid.channels;
    let mut data = Vec::with_capacity(grouped.height * grouped.width * c);
    for r in 0..grouped.height {
        for col in 0..grouped.width {
            let concat = grouped.pixel(r, col);
            data.extend((0..c).map(|o| dot(&params.weight[o * 4 * c..(o + 1) * 4 * c], concat)));
        }
    }
    Ok(TokenSequence { dim: c, data, frame_index: 0 })
}

/// 2D sinusoidal encoding. Channels `[0, C/2)` encode the row and
/// `[C/2, C)` the column; within each half, channel `2k` is
/// `sin(pos / 10000^(2k / (C/2)))` and `2k + 1` the matching cosine.
pub fn positional_encoding(height: usize, width: usize, channels: usize) -> Result<FeatureGrid> {
    if channels == 0 || !channels.is_multiple_of(4) {
        return Err(CompressError::InvalidArgument(format!("positional encoding needs channels divisible by 4, got {channels}")));
    }
    let half = channels / 2;
    let freqs: Vec<f64> = (0..half / 2).map(|k| 10000f64.powf(-((2 * k) as f64) / half as f64)).collect();
    let mut out = FeatureGrid::zeros(height, width, channels);
    for r in 0..height {
        for c in 0..width {
            let px = out.pixel_mut(r, c);
            for (k, f) in freqs.iter().enumerate() {
                let (ra, ca) = (r as f64 * f, c as f64 * f);
                px[2 * k] = ra.sin() as f32;
                px[2 * k + 1] = ra.cos() as f32;
                px[half + 2 * k] = ca.sin() as f32;
                px[half + 2 * k + 1] = ca.cos() as f32;
            }
        }
    }
    Ok(out)
}

/// Deterministic stand-in for frozen encoder features, uniform in `[-1, 1]`.
pub fn pseudo_features(frame_seed: u64, height: usize, width: usize, channels: usize) -> FeatureGrid {
    let mut stream = SplitMix64::new(frame_seed);
    let data = (0..height * width * channels).map(|_| stream.next_symmetric_f32()).collect();
    FeatureGrid { height, width, channels, data }
}

/// A compression pipeline with its weights materialized once.
#[derive(Debug, Clone)]
pub struct Compressor {
    config: CompressionConfig,
    blocks: Vec<BlockParams>,
    merger: Option<MergerParams>,
}

impl Compressor {
    pub fn new(config: &CompressionConfig) -> Result<Self> {
        config.validate()?;
        let mut in_ch = config.feature_channels;
        let blocks = config
            .channel_plan
            .iter()
            .enumerate()
            .map(|(i, &out_ch)| {
                let p = BlockParams::seeded(4 * in_ch, out_ch, config.weight_seed, i);
                in_ch = out_ch;
                p
            })
            .collect();
        let merger = config.apply_merger.then(|| MergerParams::seeded(config.output_channels(), config.weight_seed));
        Ok(Self { config: config.clone(), blocks, merger })
    }

    /// Replace the generated weights, e.g. with identity maps.
    pub fn with_weights(config: &CompressionConfig, blocks: Vec<BlockParams>, merger: Option<MergerParams>) -> Result<Self> {
        config.validate()?;
        if blocks.len() != config.num_blocks || merger.is_some() != config.apply_merger {
            return Err(CompressError::InvalidConfig("weights do not match config".into()));
        }
        Ok(Self { config: config.clone(), blocks, merger })
    }

    pub fn config(&self) -> &CompressionConfig {
        &self.config
    }

    pub fn compress(&self, frame_seed: u64) -> Result<TokenSequence> {
        Ok(self.compress_traced(frame_seed)?.0)
    }

    /// Compress a frame and report the grid sizes actually produced.
    pub fn compress_traced(&self, frame_seed: u64) -> Result<(TokenSequence, ShapeTrace)> {
        let (h0, w0) = self.config.patch_grid_dims()?;
        let features = pseudo_features(frame_seed, h0, w0, self.config.feature_channels);
        let mut x = pad_grid(&features, self.config.pad_multiple());
        let padded = (x.height, x.width);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for p in &self.blocks {
            x = compression_block(&x, p)?;
            blocks.push((x.height, x.width));
        }
        let (mut tokens, grid_h, grid_w) = match &self.merger {
            Some(m) => (patch_merger(&x, m)?, x.height / 2, x.width / 2),
            None => (TokenSequence { dim: x.channels, data: x.data, frame_index: 0 }, x.height, x.width),
        };
        let pe = positional_encoding(grid_h, grid_w, tokens.dim)?;
        for (v, p) in tokens.data.iter_mut().zip(&pe.data) {
            *v += p;
        }
        let trace = ShapeTrace { patch_grid: (h0, w0), padded, blocks, tokens: tokens.len() };
        Ok((tokens, trace))
    }
}

pub fn compress_frame(frame_seed: u64, config: &CompressionConfig) -> Result<TokenSequence> {
    Compressor::new(config)?.compress(frame_seed)
}
