//! Rasterization of models and interpolants into per-channel density grids,
//! image ingestion (pixel intensities as mass), and PPM frame output.
//!
//! Frames are binary PPM (P6) with a shared linear normalization: the global
//! maximum across the whole frame sequence maps to 255. Channels map to red,
//! green and blue in index order; single-channel grids render as gray.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fit::WeightedSamples;
use crate::gaussian::{DensityEvaluator, Gaussian};
use crate::io::Model;
use crate::mixture::MixtureModel;
use crate::vector::{VectorInterpolant, VectorMixtureModel};

/// One axis of a rectangular grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

/// Evaluation grid in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidParameter(
                "grids must have one or two axes".into(),
            ));
        }
        for a in &axes {
            if !(a.hi > a.lo) || a.cells == 0 {
                return Err(Error::InvalidParameter(format!(
                    "bad grid axis {}:{}:{}",
                    a.lo, a.hi, a.cells
                )));
            }
        }
        Ok(Self { axes })
    }

    /// Parse `"x0:x1:nx"` or `"x0:x1:nx,y0:y1:ny"`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut axes = Vec::new();
        for part in text.split(',') {
            let fields: Vec<&str> = part.split(':').collect();
            if fields.len() != 3 {
                return Err(Error::InvalidParameter(format!(
                    "grid axis {part:?} is not lo:hi:cells"
                )));
            }
            let lo: f64 = fields[0]
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad grid bound {:?}", fields[0])))?;
            let hi: f64 = fields[1]
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad grid bound {:?}", fields[1])))?;
            let cells: usize = fields[2]
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad cell count {:?}", fields[2])))?;
            axes.push(GridAxis { lo, hi, cells });
        }
        Self::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| (a.hi - a.lo) / a.cells as f64)
            .product()
    }
}

/// Per-channel density samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
    /// channels[m][cell], row-major over (y, x) for 2D grids.
    pub channels: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn cell_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Sum of densities times cell volume: approximate total mass.
    pub fn integral(&self) -> f64 {
        let vol: f64 = self.spacing.iter().product();
        self.channels
            .iter()
            .map(|c| c.iter().sum::<f64>() * vol)
            .sum()
    }

    pub fn max_value(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |a, &b| a.max(b))
    }
}

/// A weighted Gaussian with its mass split over channels; the common input
/// of the rasterizer.
#[derive(Debug, Clone)]
pub struct RenderComponent {
    pub weight: f64,
    pub gaussian: Gaussian,
    pub channel_weights: Vec<f64>,
}

pub fn render_mixture(m: &MixtureModel) -> Vec<RenderComponent> {
    m.components()
        .iter()
        .map(|(w, g)| RenderComponent {
            weight: *w,
            gaussian: g.clone(),
            channel_weights: vec![1.0],
        })
        .collect()
}

/// Scalar mixtures stacked onto separate channels (original layer, source
/// layer), for the unbalanced pipeline.
pub fn render_layers(layers: &[&MixtureModel]) -> Vec<RenderComponent> {
    let channels = layers.len();
    let mut out = Vec::new();
    for (m, layer) in layers.iter().enumerate() {
        for (w, g) in layer.components() {
            let mut cw = vec![0.0; channels];
            cw[m] = 1.0;
            out.push(RenderComponent {
                weight: *w,
                gaussian: g.clone(),
                channel_weights: cw,
            });
        }
    }
    out
}

pub fn render_vector_mixture(m: &VectorMixtureModel) -> Vec<RenderComponent> {
    let channels = m.graph().node_count();
    m.components()
        .iter()
        .map(|c| {
            let mut cw = vec![0.0; channels];
            cw[c.channel] = 1.0;
            RenderComponent {
                weight: c.weight,
                gaussian: c.gaussian.clone(),
                channel_weights: cw,
            }
        })
        .collect()
}

pub fn render_interpolant(i: &VectorInterpolant) -> Result<Vec<RenderComponent>> {
    let channels = i.graph().node_count();
    i.components()
        .iter()
        .map(|c| {
            Ok(RenderComponent {
                weight: c.weight,
                gaussian: c.gaussian.clone(),
                channel_weights: crate::graph::delta_vector(&c.position, channels)?,
            })
        })
        .collect()
}

pub fn render_model(m: &Model) -> Vec<RenderComponent> {
    match m {
        Model::Gmm(m) => render_mixture(m),
        Model::Vgmm(m) => render_vector_mixture(m),
    }
}

/// Split an unbalanced interpolation into components for the original
/// channels and a single-channel list for the source layer.
pub fn render_unbalanced_interpolant(
    u: &crate::vector::UnbalancedVectorInterpolation,
) -> Result<(Vec<RenderComponent>, Vec<RenderComponent>)> {
    let extended = u.interpolant.graph().node_count();
    let source = u.source_channel;
    let mut original = Vec::new();
    let mut source_layer = Vec::new();
    for c in u.interpolant.components() {
        let delta = crate::graph::delta_vector(&c.position, extended)?;
        let orig_weights: Vec<f64> = delta[..source].to_vec();
        if orig_weights.iter().any(|&w| w > 0.0) {
            original.push(RenderComponent {
                weight: c.weight,
                gaussian: c.gaussian.clone(),
                channel_weights: orig_weights,
            });
        }
        if delta[source] > 0.0 {
            source_layer.push(RenderComponent {
                weight: c.weight,
                gaussian: c.gaussian.clone(),
                channel_weights: vec![delta[source]],
            });
        }
    }
    Ok((original, source_layer))
}

/// Evaluate the weighted component densities over the grid.
///
/// `channels[m][cell] = sum_i weight_i * split_i[m] * density_i(cell center)`
pub fn rasterize(
    components: &[RenderComponent],
    channel_count: usize,
    spec: &GridSpec,
) -> Result<DensityGrid> {
    let dim = spec.dim();
    let origin: Vec<f64> = spec.axes.iter().map(|a| a.lo).collect();
    let spacing: Vec<f64> = spec
        .axes
        .iter()
        .map(|a| (a.hi - a.lo) / a.cells as f64)
        .collect();
    let shape: Vec<usize> = spec.axes.iter().map(|a| a.cells).collect();
    let cell_count: usize = shape.iter().product();
    let mut channels = vec![vec![0.0; cell_count]; channel_count];

    for comp in components {
        if comp.gaussian.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "component vs grid dimension",
                left: comp.gaussian.dim(),
                right: dim,
            });
        }
        if comp.channel_weights.len() != channel_count {
            return Err(Error::DimensionMismatch {
                context: "component channel weights",
                left: comp.channel_weights.len(),
                right: channel_count,
            });
        }
        let eval = DensityEvaluator::new(&comp.gaussian)?;
        let active: Vec<usize> = (0..channel_count)
            .filter(|&m| comp.channel_weights[m] > 0.0)
            .collect();
        match dim {
            1 => {
                for ix in 0..shape[0] {
                    let x = origin[0] + (ix as f64 + 0.5) * spacing[0];
                    let d = comp.weight * eval.eval(&[x])?;
                    for &m in &active {
                        channels[m][ix] += comp.channel_weights[m] * d;
                    }
                }
            }
            2 => {
                let (nx, ny) = (shape[0], shape[1]);
                for iy in 0..ny {
                    let y = origin[1] + (iy as f64 + 0.5) * spacing[1];
                    for ix in 0..nx {
                        let x = origin[0] + (ix as f64 + 0.5) * spacing[0];
                        let d = comp.weight * eval.eval(&[x, y])?;
                        let cell = iy * nx + ix;
                        for &m in &active {
                            channels[m][cell] += comp.channel_weights[m] * d;
                        }
                    }
                }
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "rasterization supports dimensions 1 and 2".into(),
                ))
            }
        }
    }
    Ok(DensityGrid {
        origin,
        spacing,
        shape,
        channels,
    })
}

/// Height of the banner used to render 1D grids as images.
const BANNER_HEIGHT: usize = 64;

/// Write one PPM (P6) frame per grid, named `frame_###.ppm`, normalized by
/// the global maximum across the whole sequence. Returns the file paths.
pub fn write_frames(grids: &[DensityGrid], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let global_max = grids.iter().map(|g| g.max_value()).fold(0.0f64, f64::max);
    write_strip(grids, global_max, dir, "frame")
}

/// Write a named strip of frames under an explicit normalization maximum,
/// so several strips of one run can share a scale.
pub fn write_strip(
    grids: &[DensityGrid],
    global_max: f64,
    dir: impl AsRef<Path>,
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(grids.len());
    for (idx, grid) in grids.iter().enumerate() {
        let path = dir.join(format!("{prefix}_{idx:03}.ppm"));
        let bytes = frame_bytes(grid, global_max)?;
        fs::write(&path, bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Encode one grid as a PPM image with a fixed normalization maximum.
pub fn frame_bytes(grid: &DensityGrid, global_max: f64) -> Result<Vec<u8>> {
    let channels = grid.channel_count();
    if channels == 0 || channels > 3 {
        return Err(Error::InvalidParameter(format!(
            "PPM output supports 1..=3 channels, got {channels}"
        )));
    }
    let quantize = |v: f64| -> u8 {
        if global_max <= 0.0 {
            0
        } else {
            ((v / global_max * 255.0).round().clamp(0.0, 255.0)) as u8
        }
    };
    let rgb_at = |cell: usize| -> [u8; 3] {
        if channels == 1 {
            let g = quantize(grid.channels[0][cell]);
            [g, g, g]
        } else {
            let mut px = [0u8; 3];
            for (m, data) in grid.channels.iter().enumerate() {
                px[m] = quantize(data[cell]);
            }
            px
        }
    };

    let (width, height, flipped_rows) = match grid.shape.len() {
        1 => (grid.shape[0], BANNER_HEIGHT, false),
        2 => (grid.shape[0], grid.shape[1], true),
        _ => {
            return Err(Error::InvalidParameter(
                "PPM output supports 1D and 2D grids".into(),
            ))
        }
    };

    let mut out = Vec::with_capacity(width * height * 3 + 32);
    write!(&mut out, "P6\n{width} {height}\n255\n")?;
    for row in 0..height {
        for col in 0..width {
            let cell = match grid.shape.len() {
                1 => col,
                _ => {
                    // Row 0 is the top of the image = largest y.
                    let iy = if flipped_rows { height - 1 - row } else { row };
                    iy * width + col
                }
            };
            out.extend_from_slice(&rgb_at(cell));
        }
    }
    Ok(out)
}

/// Decoded image: per-channel weighted samples plus channel masses.
#[derive(Debug, Clone)]
pub struct ImageChannels {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<Option<WeightedSamples>>,
    pub masses: Vec<f64>,
}

/// Load a 1- or 3-channel image (PPM P5/P6 or PNG) as weighted samples.
///
/// Pixel intensities (0..255 scaled to 0..1) become weights at pixel-center
/// coordinates with the y axis pointing up; zero-intensity pixels are
/// dropped. A channel with no mass yields `None`.
pub fn image_to_channels(path: impl AsRef<Path>) -> Result<ImageChannels> {
    let bytes = fs::read(path.as_ref())?;
    let (width, height, channel_count, data) = decode_image(&bytes)?;

    let mut points: Vec<Vec<Vec<f64>>> = vec![Vec::new(); channel_count];
    let mut weights: Vec<Vec<f64>> = vec![Vec::new(); channel_count];
    for row in 0..height {
        for col in 0..width {
            let base = (row * width + col) * channel_count;
            for m in 0..channel_count {
                let v = data[base + m] as f64 / 255.0;
                if v > 0.0 {
                    points[m].push(vec![
                        col as f64 + 0.5,
                        (height - 1 - row) as f64 + 0.5,
                    ]);
                    weights[m].push(v);
                }
            }
        }
    }
    let masses: Vec<f64> = weights.iter().map(|w| w.iter().sum()).collect();
    if masses.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let channels = points
        .into_iter()
        .zip(weights)
        .map(|(p, w)| {
            if p.is_empty() {
                None
            } else {
                Some(WeightedSamples::new(p, w).expect("validated above"))
            }
        })
        .collect();
    Ok(ImageChannels {
        width,
        height,
        channels,
        masses,
    })
}

/// Returns (width, height, channels, interleaved bytes).
fn decode_image(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    if bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
        return decode_pnm(bytes);
    }
    let img = image::load_from_memory(bytes).map_err(|e| Error::Image(e.to_string()))?;
    match img {
        image::DynamicImage::ImageLuma8(gray) => {
            let (w, h) = (gray.width() as usize, gray.height() as usize);
            Ok((w, h, 1, gray.into_raw()))
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            Ok((w, h, 3, rgb.into_raw()))
        }
    }
}

/// Minimal binary PPM/PGM reader (maxval 255).
fn decode_pnm(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let channels = if bytes.starts_with(b"P6") { 3 } else { 1 };
    let mut pos = 2;
    let mut fields = Vec::with_capacity(3);
    while fields.len() < 3 {
        // Skip whitespace and comment lines.
        while pos < bytes.len() {
            let b = bytes[pos];
            if b == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Image("truncated PNM header".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        fields.push(
            text.parse::<usize>()
                .map_err(|_| Error::Image(format!("bad PNM header field {text:?}")))?,
        );
    }
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(Error::Image(format!(
            "only maxval 255 PNM is supported, got {maxval}"
        )));
    }
    // Single whitespace byte separates header from pixel data.
    pos += 1;
    let expected = width * height * channels;
    if bytes.len() < pos + expected {
        return Err(Error::Image("PNM pixel data truncated".into()));
    }
    Ok((
        width,
        height,
        channels,
        bytes[pos..pos + expected].to_vec(),
    ))
}
