use rand::Rng as _;
use rand_distr::StandardNormal;

use super::ExampleRecord;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Isotropic Gaussian clusters, one per class, clamped to `[0, 1]`.
///
/// Class centers are drawn uniformly from the unit cube; each point is its
/// center plus `spread * N(0, I)`. Records are emitted class-interleaved
/// (`id = i * num_classes + c`), so any prefix is close to balanced.
pub fn synth_clusters(
    num_classes: usize,
    input_dim: usize,
    n_per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<Vec<ExampleRecord>> {
    synth_mixture(num_classes, 1, input_dim, n_per_class, spread, seed)
}

/// Like [`synth_clusters`] with `modes_per_class` centers per class; the
/// `i`-th point of each class comes from mode `i % modes_per_class`.
/// One mode reproduces [`synth_clusters`] exactly.
pub fn synth_mixture(
    num_classes: usize,
    modes_per_class: usize,
    input_dim: usize,
    n_per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<Vec<ExampleRecord>> {
    if num_classes < 2 || input_dim == 0 || modes_per_class == 0 {
        return Err(Error::Input(
            "need at least 2 classes, 1 mode and 1 input dimension".into(),
        ));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::Input(format!(
            "spread must be a non-negative finite number, got {spread}"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Synth);
    // Indexed [mode][class] so that a single mode draws centers in class order.
    let centers: Vec<Vec<Vec<f64>>> = (0..modes_per_class)
        .map(|_| {
            (0..num_classes)
                .map(|_| (0..input_dim).map(|_| rng.random::<f64>()).collect())
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(num_classes * n_per_class);
    for i in 0..n_per_class {
        for (c, center) in centers[i % modes_per_class].iter().enumerate() {
            let features = center
                .iter()
                .map(|&m| {
                    let z: f64 = rng.sample(StandardNormal);
                    (m + spread * z).clamp(0.0, 1.0)
                })
                .collect();
            out.push(ExampleRecord::clean(
                (i * num_classes + c) as u32,
                features,
                c,
            ));
        }
    }
    Ok(out)
}
