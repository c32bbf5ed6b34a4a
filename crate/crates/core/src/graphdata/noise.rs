use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttributedGraph, GraphView, GridImage};
use crate::error::{arg_err, Result};

/// Removes a random `floor(fraction * d)` subset of feature columns.
///
/// Column choice depends only on `d`, `fraction` and `seed`, so graphs with
/// the same width lose the same columns.
pub fn delete_feature_columns(
    graph: &AttributedGraph,
    fraction: f64,
    seed: u64,
) -> Result<AttributedGraph> {
    delete_feature_columns_with_kept(graph, fraction, seed).map(|(g, _)| g)
}

/// Like [`delete_feature_columns`], also returning the retained column indices.
pub fn delete_feature_columns_with_kept(
    graph: &AttributedGraph,
    fraction: f64,
    seed: u64,
) -> Result<(AttributedGraph, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(arg_err(format!("deletion fraction must lie in [0, 1), got {fraction}")));
    }
    let d = graph.d();
    let removed = ((fraction * d as f64) + 1e-9).floor() as usize;
    if removed >= d {
        return Err(arg_err(format!(
            "deleting {removed} of {d} columns leaves no features"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drop = vec![false; d];
    for c in sample(&mut rng, d, removed) {
        drop[c] = true;
    }
    let kept: Vec<usize> = (0..d).filter(|&c| !drop[c]).collect();
    let features = graph.features().select_columns(&kept);
    Ok((graph.with_features(features)?, kept))
}

/// Replaces each pixel with probability `amount` by pure black or pure white
/// (equal odds). The mask is untouched.
pub fn salt_pepper_noise(image: &GridImage, amount: f64, seed: u64) -> Result<GridImage> {
    if !(0.0..=1.0).contains(&amount) {
        return Err(arg_err(format!("noise amount must lie in [0, 1], got {amount}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = image
        .pixels()
        .iter()
        .map(|&p| {
            if rng.random::<f64>() < amount {
                if rng.random::<bool>() {
                    [1.0; 3]
                } else {
                    [0.0; 3]
                }
            } else {
                p
            }
        })
        .collect();
    Ok(image.with_pixels(pixels))
}
