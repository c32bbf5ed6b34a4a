//! Pixel-grid graphs for image segmentation.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Adjacency, AttributedGraph, LabelVector, NodeFeatures};
use crate::error::{arg_err, dim_err, Error, Result};

/// Number of features produced by [`sinusoidal_expand`].
pub const EXPANDED_DIM: usize = 64;

/// RGB image in `[0, 1]` with a binary foreground mask, both row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridImage {
    height: usize,
    width: usize,
    pixels: Vec<[f64; 3]>,
    mask: Vec<u8>,
}

impl GridImage {
    pub fn new(height: usize, width: usize, pixels: Vec<[f64; 3]>, mask: Vec<u8>) -> Result<Self> {
        if pixels.len() != height * width || mask.len() != height * width {
            return Err(dim_err(format!(
                "{height}x{width} image with {} pixels and {} mask entries",
                pixels.len(),
                mask.len()
            )));
        }
        if pixels.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(arg_err("channel values must lie in [0, 1]"));
        }
        if mask.iter().any(|&m| m > 1) {
            return Err(arg_err("mask entries must be 0 or 1"));
        }
        Ok(GridImage {
            height,
            width,
            pixels,
            mask,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    pub(crate) fn with_pixels(&self, pixels: Vec<[f64; 3]>) -> GridImage {
        GridImage {
            pixels,
            ..self.clone()
        }
    }

    /// Loads a PPM (P3) image and a PBM (P1) mask of the same size.
    pub fn load(ppm: impl AsRef<Path>, pbm: impl AsRef<Path>) -> Result<GridImage> {
        let (h, w, pixels) = read_ppm(ppm)?;
        let (mh, mw, mask) = read_pbm(pbm)?;
        if (h, w) != (mh, mw) {
            return Err(dim_err(format!("image is {h}x{w} but mask is {mh}x{mw}")));
        }
        GridImage::new(h, w, pixels, mask)
    }
}

/// Expands `s = [r, g, b, row, col]` to `sin(c . s)` and `cos(c . s)` for
/// every binary vector `c` of length 5.
///
/// Output `2c` is the sine and `2c + 1` the cosine for `c` read as a 5-bit
/// integer whose most significant bit multiplies `s[0]`.
pub fn sinusoidal_expand(base: &[f64; 5]) -> [f64; EXPANDED_DIM] {
    let mut out = [0.0; EXPANDED_DIM];
    for c in 0..32usize {
        let dot: f64 = (0..5)
            .filter(|&j| c >> (4 - j) & 1 == 1)
            .map(|j| base[j])
            .sum();
        out[2 * c] = dot.sin();
        out[2 * c + 1] = dot.cos();
    }
    out
}

/// One node per pixel, 4-neighborhood edges, sinusoidal features of
/// `[R, G, B, row / height, col / width]` and mask labels (`k = 2`).
pub fn build_grid_graph(image: &GridImage) -> Result<AttributedGraph> {
    let (h, w) = (image.height, image.width);
    if h * w == 0 {
        return Err(arg_err("image must contain at least one pixel"));
    }
    let node = |r: usize, c: usize| r * w + c;
    let mut edges = Vec::with_capacity(2 * h * w);
    let mut x = Array2::zeros((h * w, EXPANDED_DIM));
    for r in 0..h {
        for c in 0..w {
            if c + 1 < w {
                edges.push((node(r, c), node(r, c + 1)));
            }
            if r + 1 < h {
                edges.push((node(r, c), node(r + 1, c)));
            }
            let [red, green, blue] = image.pixels[node(r, c)];
            let base = [red, green, blue, r as f64 / h as f64, c as f64 / w as f64];
            for (dst, v) in x.row_mut(node(r, c)).iter_mut().zip(sinusoidal_expand(&base)) {
                *dst = v;
            }
        }
    }
    let labels = image.mask.iter().map(|&m| m as usize).collect();
    AttributedGraph::new(
        Adjacency::from_edges(h * w, edges)?,
        NodeFeatures::new(x)?,
        Some(LabelVector::new(labels, 2)?),
    )
}

/// Random test image: an elliptical foreground blob of one base color on a
/// background of another, with Gaussian pixel jitter (sd 0.1, clamped).
pub fn generate_synthetic_image(height: usize, width: usize, seed: u64) -> Result<GridImage> {
    if height * width == 0 {
        return Err(arg_err("image must contain at least one pixel"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 0.1).expect("valid sd");
    let fg: [f64; 3] = [rng.random_range(0.4..0.7), rng.random_range(0.2..0.4), rng.random_range(0.0..0.2)];
    let bg: [f64; 3] = [rng.random_range(0.2..0.6), rng.random_range(0.4..0.8), rng.random_range(0.3..0.7)];
    let (h, w) = (height as f64, width as f64);
    let cy = rng.random_range(0.35..0.65) * h;
    let cx = rng.random_range(0.35..0.65) * w;
    let ry = rng.random_range(0.2..0.35) * h;
    let rx = rng.random_range(0.2..0.35) * w;
    let mut pixels = Vec::with_capacity(height * width);
    let mut mask = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let dy = (r as f64 + 0.5 - cy) / ry.max(0.5);
            let dx = (c as f64 + 0.5 - cx) / rx.max(0.5);
            let inside = dy * dy + dx * dx <= 1.0;
            let base = if inside { fg } else { bg };
            pixels.push(base.map(|v| (v + jitter.sample(&mut rng)).clamp(0.0, 1.0)));
            mask.push(inside as u8);
        }
    }
    GridImage::new(height, width, pixels, mask)
}

/// Whitespace-separated tokens with `#` comments removed.
fn netpbm_tokens(text: &str) -> Vec<&str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .collect()
}

fn header_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: path.display().to_string(),
        line: 0,
        message: message.into(),
    }
}

fn parse_ints(path: &Path, tokens: &[&str]) -> Result<Vec<usize>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| header_err(path, format!("bad integer {t:?}")))
        })
        .collect()
}

/// Reads a plain PPM (P3). Returns `(height, width, pixels)` scaled to `[0, 1]`.
pub fn read_ppm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<[f64; 3]>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let tokens = netpbm_tokens(&text);
    if tokens.first() != Some(&"P3") || tokens.len() < 4 {
        return Err(header_err(path, "expected a P3 header"));
    }
    let header = parse_ints(path, &tokens[1..4])?;
    let (w, h, maxval) = (header[0], header[1], header[2]);
    if maxval == 0 {
        return Err(header_err(path, "maxval must be positive"));
    }
    let body = parse_ints(path, &tokens[4..])?;
    if body.len() != 3 * w * h {
        return Err(header_err(path, format!("expected {} samples, found {}", 3 * w * h, body.len())));
    }
    if body.iter().any(|&v| v > maxval) {
        return Err(header_err(path, "sample exceeds maxval"));
    }
    let scale = maxval as f64;
    let pixels = body
        .chunks_exact(3)
        .map(|p| [p[0] as f64 / scale, p[1] as f64 / scale, p[2] as f64 / scale])
        .collect();
    Ok((h, w, pixels))
}

/// Reads a plain PBM (P1). Returns `(height, width, bits)`.
pub fn read_pbm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let tokens = netpbm_tokens(&text);
    if tokens.first() != Some(&"P1") || tokens.len() < 3 {
        return Err(header_err(path, "expected a P1 header"));
    }
    let header = parse_ints(path, &tokens[1..3])?;
    let (w, h) = (header[0], header[1]);
    // P1 allows bits without separating whitespace
    let bits: Vec<u8> = tokens[3..]
        .iter()
        .flat_map(|t| t.chars())
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(header_err(path, format!("bad bit {ch:?}"))),
        })
        .collect::<Result<_>>()?;
    if bits.len() != w * h {
        return Err(header_err(path, format!("expected {} bits, found {}", w * h, bits.len())));
    }
    Ok((h, w, bits))
}

/// Writes the image as PPM (P3) with maxval 255.
pub fn write_ppm(image: &GridImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "P3\n{} {}\n255", image.width, image.height)?;
    for row in image.pixels.chunks(image.width.max(1)) {
        let line: Vec<String> = row
            .iter()
            .flat_map(|p| p.iter().map(|v| ((v * 255.0).round() as u32).to_string()))
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the mask as PBM (P1).
pub fn write_pbm(image: &GridImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "P1\n{} {}", image.width, image.height)?;
    for row in image.mask.chunks(image.width.max(1)) {
        let line: Vec<String> = row.iter().map(|b| b.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()?;
    Ok(())
}
