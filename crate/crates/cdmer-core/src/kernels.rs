//! Kernel matrices over block-structured feature sets.
//!
//! Feature vectors are split into K per-region blocks of dimension d. All
//! kernel matrices used by the transfer regression are computed against the
//! joined source+target basis, one matrix per block.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Origin of a feature set within one cross-database experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    Source,
    Target,
    Test,
}

/// N samples described by K per-region descriptor blocks of dimension d.
///
/// Block `i` is a d×N matrix whose columns are the region-`i` descriptors of
/// the N samples. Stacking the blocks row-wise reproduces the full (K·d)×N
/// feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedFeatureSet {
    blocks: Vec<DMatrix<f64>>,
    domain_tag: DomainTag,
    sample_ids: Vec<String>,
}

impl BlockedFeatureSet {
    /// Builds a feature set and validates the block layout.
    ///
    /// All blocks must share the same d×N shape, with K, d, N ≥ 1, and every
    /// entry must be finite. `sample_ids` must have one id per column.
    pub fn new(
        blocks: Vec<DMatrix<f64>>,
        domain_tag: DomainTag,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidParameter("feature set needs at least one block".into()))?;
        let (d, n) = (first.nrows(), first.ncols());
        if d == 0 || n == 0 {
            return Err(Error::InvalidParameter(
                "feature blocks must be non-empty (d >= 1, N >= 1)".into(),
            ));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.nrows() != d || b.ncols() != n {
                return Err(Error::dims(
                    "feature blocks",
                    format!("{d}x{n}"),
                    format!("{}x{} at block {i}", b.nrows(), b.ncols()),
                ));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("feature block"));
            }
        }
        if sample_ids.len() != n {
            return Err(Error::dims(
                "sample ids",
                n.to_string(),
                sample_ids.len().to_string(),
            ));
        }
        Ok(BlockedFeatureSet {
            blocks,
            domain_tag,
            sample_ids,
        })
    }

    /// Number of blocks K.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Per-block descriptor dimension d.
    pub fn block_dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    /// Number of samples N.
    pub fn len(&self) -> usize {
        self.blocks[0].ncols()
    }

    pub fn is_empty(&self) -> bool {
        false // construction enforces N >= 1
    }

    pub fn block(&self, i: usize) -> &DMatrix<f64> {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn domain_tag(&self) -> DomainTag {
        self.domain_tag
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    /// Returns the same data under a different domain tag.
    pub fn retagged(mut self, tag: DomainTag) -> Self {
        self.domain_tag = tag;
        self
    }

    /// Stacks all blocks into the full (K·d)×N feature matrix.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (k, d, n) = (self.block_count(), self.block_dim(), self.len());
        let mut out = DMatrix::zeros(k * d, n);
        for (i, b) in self.blocks.iter().enumerate() {
            out.view_mut((i * d, 0), (d, n)).copy_from(b);
        }
        out
    }

    /// Order-sensitive hash of dimensions and raw feature bytes.
    ///
    /// Used to detect at predict time that a serialized model is applied
    /// against the training basis it was fitted on.
    pub fn content_hash(&self) -> u64 {
        let mut h = fnv1a_init();
        for dim in [self.block_count(), self.block_dim(), self.len()] {
            h = fnv1a_bytes(h, &(dim as u64).to_le_bytes());
        }
        for b in &self.blocks {
            for v in b.iter() {
                h = fnv1a_bytes(h, &v.to_bits().to_le_bytes());
            }
        }
        h
    }

    fn check_compatible(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.block_count() != other.block_count() || self.block_dim() != other.block_dim() {
            return Err(Error::dims(
                context,
                format!("K={} d={}", self.block_count(), self.block_dim()),
                format!("K={} d={}", other.block_count(), other.block_dim()),
            ));
        }
        Ok(())
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a_init() -> u64 {
    FNV_OFFSET
}

fn fnv1a_bytes(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Kernel bandwidth: either a fixed value or the median pairwise distance
/// of the data the kernel is resolved against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    Fixed(f64),
    MedianHeuristic,
}

/// Kernel function selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelConfig {
    #[default]
    Linear,
    Polynomial { degree: u32, offset: f64 },
    Gaussian { bandwidth: Bandwidth },
}

impl KernelConfig {
    pub fn gaussian(bandwidth: f64) -> Self {
        KernelConfig::Gaussian {
            bandwidth: Bandwidth::Fixed(bandwidth),
        }
    }

    pub fn gaussian_median() -> Self {
        KernelConfig::Gaussian {
            bandwidth: Bandwidth::MedianHeuristic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelConfig::Linear => Ok(()),
            KernelConfig::Polynomial { degree, offset } => {
                if *degree < 1 {
                    return Err(Error::InvalidParameter(
                        "polynomial degree must be >= 1".into(),
                    ));
                }
                if !offset.is_finite() {
                    return Err(Error::NonFinite("polynomial offset"));
                }
                Ok(())
            }
            KernelConfig::Gaussian { bandwidth } => match bandwidth {
                Bandwidth::Fixed(b) if !(b.is_finite() && *b > 0.0) => Err(
                    Error::InvalidParameter(format!("gaussian bandwidth must be positive, got {b}")),
                ),
                _ => Ok(()),
            },
        }
    }

    /// Resolves a median-heuristic bandwidth against the columns of `data`.
    ///
    /// The bandwidth becomes the median of the pairwise Euclidean distances
    /// between columns (1.0 when the median degenerates to zero). Fixed
    /// bandwidths and non-gaussian kernels pass through unchanged.
    pub fn resolve(&self, data: &DMatrix<f64>) -> Self {
        match self {
            KernelConfig::Gaussian {
                bandwidth: Bandwidth::MedianHeuristic,
            } => {
                let m = median_pairwise_distance(data);
                let bw = if m > 0.0 { m } else { 1.0 };
                KernelConfig::gaussian(bw)
            }
            other => *other,
        }
    }
}

/// Median of the Euclidean distances over all unordered column pairs.
///
/// Invariant under column permutation; even pair counts take the midpoint of
/// the two central values. Returns 0.0 when there are fewer than two columns.
pub fn median_pairwise_distance(data: &DMatrix<f64>) -> f64 {
    let n = data.ncols();
    if n < 2 {
        return 0.0;
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = data
                .column(i)
                .iter()
                .zip(data.column(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    let m = dists.len();
    if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    }
}

/// Gram matrix between the columns of `a` (d×m) and `b` (d×n).
///
/// Entry (p, q) is k(a_p, b_q) under `cfg`. A median-heuristic bandwidth is
/// resolved over the joined columns of `a` and `b`; callers that need the
/// training-time convention resolve the config themselves first.
pub fn gram(a: &DMatrix<f64>, b: &DMatrix<f64>, cfg: &KernelConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    if a.nrows() != b.nrows() {
        return Err(Error::dims(
            "gram operands",
            format!("d={}", a.nrows()),
            format!("d={}", b.nrows()),
        ));
    }
    if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gram input"));
    }
    let cfg = match cfg {
        KernelConfig::Gaussian {
            bandwidth: Bandwidth::MedianHeuristic,
        } => {
            let mut joined = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
            joined.view_mut((0, 0), a.shape()).copy_from(a);
            joined.view_mut((0, a.ncols()), b.shape()).copy_from(b);
            cfg.resolve(&joined)
        }
        other => *other,
    };
    Ok(match cfg {
        KernelConfig::Linear => a.transpose() * b,
        KernelConfig::Polynomial { degree, offset } => {
            let mut k = a.transpose() * b;
            k.apply(|v| *v = (*v + offset).powi(degree as i32));
            k
        }
        KernelConfig::Gaussian { bandwidth } => {
            let bw = match bandwidth {
                Bandwidth::Fixed(v) => v,
                Bandwidth::MedianHeuristic => unreachable!("resolved above"),
            };
            let denom = 2.0 * bw * bw;
            DMatrix::from_fn(a.ncols(), b.ncols(), |p, q| {
                let d2: f64 = a
                    .column(p)
                    .iter()
                    .zip(b.column(q).iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                (-d2 / denom).exp()
            })
        }
    })
}

/// Per-block kernel matrices against the joined source+target basis.
///
/// For block i, `per_block_source[i]` is the (N_s+N_t)×N_s matrix of kernel
/// values between every basis sample and every source sample, and
/// `per_block_target[i]` the (N_s+N_t)×N_t counterpart.
#[derive(Debug, Clone)]
pub struct KernelSet {
    per_block_source: Vec<DMatrix<f64>>,
    per_block_target: Vec<DMatrix<f64>>,
    config: KernelConfig,
    resolved: Vec<KernelConfig>,
    basis_ids: Vec<String>,
    n_source: usize,
    n_target: usize,
}

impl KernelSet {
    pub fn per_block_source(&self) -> &[DMatrix<f64>] {
        &self.per_block_source
    }

    pub fn per_block_target(&self) -> &[DMatrix<f64>] {
        &self.per_block_target
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    /// Per-block configs with median-heuristic bandwidths made concrete.
    pub fn resolved_configs(&self) -> &[KernelConfig] {
        &self.resolved
    }

    pub fn block_count(&self) -> usize {
        self.per_block_source.len()
    }

    pub fn n_source(&self) -> usize {
        self.n_source
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    /// Rows of every kernel matrix: N_s + N_t.
    pub fn basis_len(&self) -> usize {
        self.n_source + self.n_target
    }

    /// Sample ids of the joined basis, source samples first.
    pub fn basis_ids(&self) -> &[String] {
        &self.basis_ids
    }

    /// Per-block gap between the source and target kernel-space means:
    /// (1/N_s)·K_i^s·1 − (1/N_t)·K_i^t·1, one (N_s+N_t)-vector per block.
    pub fn mean_gap(&self, block: usize) -> DVector<f64> {
        let ks = &self.per_block_source[block];
        let kt = &self.per_block_target[block];
        let s = ks.column_sum() / self.n_source as f64;
        let t = kt.column_sum() / self.n_target as f64;
        s - t
    }
}

fn joined_block(source: &BlockedFeatureSet, target: &BlockedFeatureSet, i: usize) -> DMatrix<f64> {
    let (d, ns, nt) = (source.block_dim(), source.len(), target.len());
    let mut joined = DMatrix::zeros(d, ns + nt);
    joined.view_mut((0, 0), (d, ns)).copy_from(source.block(i));
    joined.view_mut((0, ns), (d, nt)).copy_from(target.block(i));
    joined
}

/// Builds the per-block source/target kernel pair for a training instance.
///
/// `source` must be tagged source and `target` tagged target; both must share
/// block count and dimension. Median-heuristic bandwidths resolve per block
/// over the joined source+target samples.
pub fn build_kernel_set(
    source: &BlockedFeatureSet,
    target: &BlockedFeatureSet,
    cfg: &KernelConfig,
) -> Result<KernelSet> {
    cfg.validate()?;
    source.check_compatible(target, "kernel set inputs")?;
    if source.domain_tag() != DomainTag::Source {
        return Err(Error::InvalidParameter(
            "first kernel-set argument must be tagged source".into(),
        ));
    }
    if target.domain_tag() != DomainTag::Target {
        return Err(Error::InvalidParameter(
            "second kernel-set argument must be tagged target".into(),
        ));
    }
    let k = source.block_count();
    let mut per_block_source = Vec::with_capacity(k);
    let mut per_block_target = Vec::with_capacity(k);
    let mut resolved = Vec::with_capacity(k);
    for i in 0..k {
        let joined = joined_block(source, target, i);
        let block_cfg = cfg.resolve(&joined);
        per_block_source.push(gram(&joined, source.block(i), &block_cfg)?);
        per_block_target.push(gram(&joined, target.block(i), &block_cfg)?);
        resolved.push(block_cfg);
    }
    let mut basis_ids = source.sample_ids().to_vec();
    basis_ids.extend_from_slice(target.sample_ids());
    Ok(KernelSet {
        per_block_source,
        per_block_target,
        config: *cfg,
        resolved,
        basis_ids,
        n_source: source.len(),
        n_target: target.len(),
    })
}

/// Kernel matrices between the training basis and a test set, one per block.
///
/// Uses the same per-block bandwidth resolution as training, so the output
/// agrees with `build_kernel_set` whenever the test set equals the target set.
pub fn build_test_kernels(
    source: &BlockedFeatureSet,
    target: &BlockedFeatureSet,
    test: &BlockedFeatureSet,
    cfg: &KernelConfig,
) -> Result<Vec<DMatrix<f64>>> {
    cfg.validate()?;
    source.check_compatible(target, "test kernel inputs")?;
    source.check_compatible(test, "test kernel inputs")?;
    let k = source.block_count();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let joined = joined_block(source, target, i);
        let block_cfg = cfg.resolve(&joined);
        out.push(gram(&joined, test.block(i), &block_cfg)?);
    }
    Ok(out)
}
