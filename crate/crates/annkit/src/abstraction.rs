//! Node partitionings, partition combination matrices (PCMs), mergings,
//! column scaling, and the layer-wise abstraction algorithm built on binary
//! mergings.

use crate::domains::{AbstractWeight, Ann, AnnLayer, DomainKind};
use crate::error::{Error, Result};
use crate::model::{Dnn, Matrix};
use rand::Rng;

/// Default cap on the number of binary mergings enumerated per layer.
pub const DEFAULT_MERGE_CAP: u128 = 1_000_000;

/// Ordered disjoint blocks of `{0..n-1}` covering all indices. Block order is
/// fixed and used for PCM column indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partitioning {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partitioning {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::PartitioningMismatch("empty block".into()));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::PartitioningMismatch(format!(
                        "index {i} out of range for dimension {n}"
                    )));
                }
                if seen[i] {
                    return Err(Error::PartitioningMismatch(format!(
                        "index {i} appears in two blocks"
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::PartitioningMismatch(
                "blocks do not cover every index".into(),
            ));
        }
        Ok(Partitioning { n, blocks })
    }

    /// All-singleton partitioning `{{0}, {1}, ..., {n-1}}`.
    pub fn singletons(n: usize) -> Self {
        Partitioning {
            n,
            blocks: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_singletons(&self) -> bool {
        self.blocks.len() == self.n
    }

    /// Block sizes in block order, as used by `scale_cols`.
    pub fn block_sizes(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.len() as f64).collect()
    }

    /// Number of binary PCMs, i.e. the product of the block sizes.
    pub fn binary_pcm_count(&self) -> u128 {
        self.blocks.iter().map(|b| b.len() as u128).product()
    }
}

/// Per-layer partitioning for layers `0..=n`; the boundary layers must be
/// singletons so the abstract network keeps the input/output dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerwisePartitioning {
    layers: Vec<Partitioning>,
}

impl LayerwisePartitioning {
    pub fn new(layers: Vec<Partitioning>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::PartitioningMismatch(
                "need a partitioning for every intermediate space".into(),
            ));
        }
        if !layers.first().unwrap().is_singletons() || !layers.last().unwrap().is_singletons() {
            return Err(Error::PartitioningMismatch(
                "input and output partitionings must be singletons".into(),
            ));
        }
        Ok(LayerwisePartitioning { layers })
    }

    /// Identity partitioning for the given layer sizes.
    pub fn identity(sizes: &[usize]) -> Result<Self> {
        LayerwisePartitioning::new(sizes.iter().map(|&s| Partitioning::singletons(s)).collect())
    }

    pub fn layer(&self, i: usize) -> &Partitioning {
        &self.layers[i]
    }

    pub fn layers(&self) -> &[Partitioning] {
        &self.layers
    }

    pub fn num_spaces(&self) -> usize {
        self.layers.len()
    }

    pub fn matches(&self, n: &Dnn) -> Result<()> {
        let sizes = n.layer_sizes();
        if sizes.len() != self.layers.len() {
            return Err(Error::PartitioningMismatch(format!(
                "network has {} intermediate spaces, partitioning has {}",
                sizes.len(),
                self.layers.len()
            )));
        }
        for (i, (s, p)) in sizes.iter().zip(&self.layers).enumerate() {
            if p.dim() != *s {
                return Err(Error::PartitioningMismatch(format!(
                    "layer {i}: size {s} but partitioning over {} indices",
                    p.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Checks the PCV conditions for every column of `m` against `p`: entries
/// non-negative, column sums 1 within 1e-12, support inside the block.
pub fn is_pcm(m: &Matrix, p: &Partitioning) -> Result<bool> {
    if m.rows() != p.dim() || m.cols() != p.num_blocks() {
        return Err(Error::ShapeMismatch(format!(
            "PCM for this partitioning must be {}x{}, got {}x{}",
            p.dim(),
            p.num_blocks(),
            m.rows(),
            m.cols()
        )));
    }
    for (j, block) in p.blocks().iter().enumerate() {
        let mut sum = 0.0;
        for i in 0..m.rows() {
            let e = m.get(i, j);
            if e < 0.0 {
                return Ok(false);
            }
            if e != 0.0 && !block.contains(&i) {
                return Ok(false);
            }
            sum += e;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All binary PCMs of `p` in lexicographic order over per-block choices
/// (first block most significant). Errors when the count exceeds `cap`.
pub fn enumerate_binary_pcms(p: &Partitioning, cap: u128) -> Result<Vec<Matrix>> {
    let count = p.binary_pcm_count();
    if count > cap {
        return Err(Error::BinaryEnumerationLimitExceeded {
            required: count,
            cap,
        });
    }
    let mut choices = vec![0usize; p.num_blocks()];
    let mut out = Vec::with_capacity(count as usize);
    loop {
        let mut m = Matrix::zeros(p.dim(), p.num_blocks());
        for (j, block) in p.blocks().iter().enumerate() {
            m.set(block[choices[j]], j, 1.0);
        }
        out.push(m);
        // odometer increment, last block fastest
        let mut j = p.num_blocks();
        loop {
            if j == 0 {
                return Ok(out);
            }
            j -= 1;
            choices[j] += 1;
            if choices[j] < p.blocks()[j].len() {
                break;
            }
            choices[j] = 0;
        }
    }
}

/// The merging `D^T M C`.
pub fn merge(m: &Matrix, c: &Matrix, d: &Matrix) -> Result<Matrix> {
    d.transpose().matmul(m)?.matmul(c)
}

/// Column scaling: `out[i,j] = m[i,j] * w[j]`.
pub fn scale_cols(m: &Matrix, w: &[f64]) -> Result<Matrix> {
    if w.len() != m.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{} column weights for a matrix with {} columns",
            w.len(),
            m.cols()
        )));
    }
    let mut out = m.clone();
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            out.set(r, c, m.get(r, c) * w[c]);
        }
    }
    Ok(out)
}

/// All column-scaled binary mergings of `m`, in the deterministic order
/// (outer loop over input PCMs, inner over output PCMs).
pub fn binary_mergings(
    m: &Matrix,
    p_in: &Partitioning,
    p_out: &Partitioning,
    cap: u128,
) -> Result<Vec<Matrix>> {
    if m.cols() != p_in.dim() || m.rows() != p_out.dim() {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {}x{} but partitionings cover {} outputs and {} inputs",
            m.rows(),
            m.cols(),
            p_out.dim(),
            p_in.dim()
        )));
    }
    let total = p_in.binary_pcm_count() * p_out.binary_pcm_count();
    if total > cap {
        return Err(Error::BinaryEnumerationLimitExceeded {
            required: total,
            cap,
        });
    }
    let cs = enumerate_binary_pcms(p_in, cap)?;
    let ds = enumerate_binary_pcms(p_out, cap)?;
    let sizes = p_in.block_sizes();
    let mut out = Vec::with_capacity(total as usize);
    for c in &cs {
        for d in &ds {
            out.push(scale_cols(&merge(m, c, d)?, &sizes)?);
        }
    }
    Ok(out)
}

/// Abstraction of all binary mergings of `m` in the requested domain.
pub fn ahat_bin(
    m: &Matrix,
    p_in: &Partitioning,
    p_out: &Partitioning,
    domain: DomainKind,
    cap: u128,
) -> Result<AbstractWeight> {
    AbstractWeight::alpha(domain, &binary_mergings(m, p_in, p_out, cap)?)
}

/// Options for [`abstract_dnn`].
#[derive(Debug, Clone)]
pub struct AbstractionOptions {
    /// Cap on binary mergings per layer.
    pub cap: u128,
    /// Allow non-convex domains; exists only to reproduce the known-unsound
    /// powerset construction.
    pub allow_nonconvex: bool,
}

impl Default for AbstractionOptions {
    fn default() -> Self {
        AbstractionOptions {
            cap: DEFAULT_MERGE_CAP,
            allow_nonconvex: false,
        }
    }
}

/// Layer-wise abstraction: per layer `i`, the abstract weight is the hull of
/// the binary mergings of `W^(i)` under the adjacent partitionings; the
/// activations carry over unchanged.
pub fn abstract_dnn(
    n: &Dnn,
    lp: &LayerwisePartitioning,
    domains: &[DomainKind],
    opts: &AbstractionOptions,
) -> Result<Ann> {
    lp.matches(n)?;
    if domains.len() != n.num_layers() {
        return Err(Error::PartitioningMismatch(format!(
            "{} domain tags for {} layers",
            domains.len(),
            n.num_layers()
        )));
    }
    if !opts.allow_nonconvex {
        if let Some(d) = domains.iter().find(|d| !d.is_convex()) {
            let _ = d;
            return Err(Error::NonConvexDomainRejected);
        }
    }
    let mut layers = Vec::with_capacity(n.num_layers());
    for (i, layer) in n.layers().iter().enumerate() {
        let weight = ahat_bin(
            &layer.weights,
            lp.layer(i),
            lp.layer(i + 1),
            domains[i],
            opts.cap,
        )?;
        layers.push(AnnLayer {
            weight,
            activation: layer.activation.clone(),
        });
    }
    Ann::new(layers)
}

/// A uniformly shuffled random partitioning of `{0..n-1}`; blocks are kept
/// sorted. Used by the randomized property suites.
pub fn random_partitioning<R: Rng>(n: usize, rng: &mut R) -> Partitioning {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut rest = indices.as_slice();
    while !rest.is_empty() {
        let take = rng.gen_range(1..=rest.len());
        let mut block = rest[..take].to_vec();
        block.sort_unstable();
        blocks.push(block);
        rest = &rest[take..];
    }
    Partitioning::new(n, blocks).unwrap()
}

/// A valid PCM with strictly interior convex weights, deterministic per RNG
/// state. Singleton blocks yield exact 1.0 entries.
pub fn random_pcm<R: Rng>(p: &Partitioning, rng: &mut R) -> Matrix {
    let mut m = Matrix::zeros(p.dim(), p.num_blocks());
    for (j, block) in p.blocks().iter().enumerate() {
        if block.len() == 1 {
            m.set(block[0], j, 1.0);
            continue;
        }
        let raw: Vec<f64> = block.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (&i, w) in block.iter().zip(&raw) {
            m.set(i, j, w / total);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: usize, cols: usize, entries: &[f64]) -> Matrix {
        Matrix::new(rows, cols, entries.to_vec()).unwrap()
    }

    fn part(n: usize, blocks: &[&[usize]]) -> Partitioning {
        Partitioning::new(n, blocks.iter().map(|b| b.to_vec()).collect()).unwrap()
    }

    #[test]
    fn pcm_check_accepts_the_worked_example() {
        // 4-dim output partitioning {{2,4},{1,3}} (1-indexed) and its PCM.
        let p = part(4, &[&[1, 3], &[0, 2]]);
        let d = mat(4, 2, &[0.0, 0.99, 0.4, 0.0, 0.0, 0.01, 0.6, 0.0]);
        assert!(is_pcm(&d, &p).unwrap());
        // 3-dim input partitioning {{1,3},{2}} and its PCM.
        let p = part(3, &[&[0, 2], &[1]]);
        let c = mat(3, 2, &[0.25, 0.0, 0.0, 1.0, 0.75, 0.0]);
        assert!(is_pcm(&c, &p).unwrap());
    }

    #[test]
    fn pcm_check_rejects_bad_columns() {
        let p = part(2, &[&[0, 1]]);
        assert!(!is_pcm(&mat(2, 1, &[0.4, 0.5]), &p).unwrap());
        assert!(!is_pcm(&mat(2, 1, &[1.5, -0.5]), &p).unwrap());
        assert!(is_pcm(&Matrix::identity(2), &Partitioning::singletons(2)).unwrap());
    }

    #[test]
    fn binary_pcm_enumeration() {
        // {{1,2},{3}} over 3 indices: two one-hot choices for the first block.
        let p = part(3, &[&[0, 1], &[2]]);
        let pcms = enumerate_binary_pcms(&p, 1000).unwrap();
        assert_eq!(pcms.len(), 2);
        assert_eq!(pcms[0], mat(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]));
        assert_eq!(pcms[1], mat(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]));

        let id = enumerate_binary_pcms(&Partitioning::singletons(3), 1000).unwrap();
        assert_eq!(id, vec![Matrix::identity(3)]);

        let p = part(5, &[&[0, 1], &[2, 3, 4]]);
        assert_eq!(enumerate_binary_pcms(&p, 1000).unwrap().len(), 6);
    }

    #[test]
    fn enumeration_cap_is_an_error() {
        let p = part(4, &[&[0, 1], &[2, 3]]);
        assert!(matches!(
            enumerate_binary_pcms(&p, 3),
            Err(Error::BinaryEnumerationLimitExceeded { required: 4, cap: 3 })
        ));
    }

    #[test]
    fn merge_matches_symbolic_example() {
        // Random assignment to the 4x3 symbolic matrix; compare against the
        // printed closed form of D^T M C.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let m = {
            let entries: Vec<f64> = (0..12).map(|_| rng.gen_range(-3.0..3.0_f64)).collect();
            mat(4, 3, &entries)
        };
        let e = |i: usize, j: usize| m.get(i - 1, j - 1);
        let c = mat(3, 2, &[0.25, 0.0, 0.0, 1.0, 0.75, 0.0]);
        let d = mat(4, 2, &[0.0, 0.99, 0.4, 0.0, 0.0, 0.01, 0.6, 0.0]);
        let merged = merge(&m, &c, &d).unwrap();
        let expected = mat(
            2,
            2,
            &[
                0.4 * (0.25 * e(2, 1) + 0.75 * e(2, 3)) + 0.6 * (0.25 * e(4, 1) + 0.75 * e(4, 3)),
                0.4 * e(2, 2) + 0.6 * e(4, 2),
                0.99 * (0.25 * e(1, 1) + 0.75 * e(1, 3))
                    + 0.01 * (0.25 * e(3, 1) + 0.75 * e(3, 3)),
                0.99 * e(1, 2) + 0.01 * e(3, 2),
            ],
        );
        assert!(merged.max_abs_diff(&expected) < 1e-12);

        let scaled = scale_cols(&merged, &[2.0, 2.0]).unwrap();
        let expected_scaled = mat(
            2,
            2,
            &[
                0.8 * (0.25 * e(2, 1) + 0.75 * e(2, 3)) + 1.2 * (0.25 * e(4, 1) + 0.75 * e(4, 3)),
                0.8 * e(2, 2) + 1.2 * e(4, 2),
                1.98 * (0.25 * e(1, 1) + 0.75 * e(1, 3))
                    + 0.02 * (0.25 * e(3, 1) + 0.75 * e(3, 3)),
                1.98 * e(1, 2) + 0.02 * e(3, 2),
            ],
        );
        assert!(scaled.max_abs_diff(&expected_scaled) < 1e-12);
    }

    #[test]
    fn merge_with_identity_pcms_is_identity() {
        let m = mat(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let c = Matrix::identity(3);
        let d = Matrix::identity(2);
        assert_eq!(merge(&m, &c, &d).unwrap(), m);
        assert_eq!(scale_cols(&m, &[1.0, 1.0, 1.0]).unwrap(), m);
    }

    #[test]
    fn worked_nonbinary_merging_scales_to_printed_matrix() {
        let w = mat(3, 3, &[1.0, -2.0, 3.0, 4.0, -5.0, 6.0, 7.0, -8.0, 9.0]);
        let c = mat(3, 2, &[0.75, 0.0, 0.25, 0.0, 0.0, 1.0]);
        let d = mat(3, 2, &[0.5, 0.0, 0.0, 1.0, 0.5, 0.0]);
        let merged = merge(&w, &c, &d).unwrap();
        let scaled = scale_cols(&merged, &[2.0, 1.0]).unwrap();
        assert!(scaled.max_abs_diff(&mat(2, 2, &[3.5, 6.0, 3.5, 6.0])) < 1e-12);
    }

    #[test]
    fn binary_mergings_of_walkthrough_matrix() {
        let w = mat(3, 3, &[1.0, -2.0, 3.0, 4.0, -5.0, 6.0, 7.0, -8.0, 9.0]);
        let p_in = part(3, &[&[0, 1], &[2]]);
        let p_out = part(3, &[&[0, 2], &[1]]);
        let ms = binary_mergings(&w, &p_in, &p_out, 1000).unwrap();
        let expected = [
            mat(2, 2, &[2.0, 3.0, 8.0, 6.0]),
            mat(2, 2, &[14.0, 9.0, 8.0, 6.0]),
            mat(2, 2, &[-4.0, 3.0, -10.0, 6.0]),
            mat(2, 2, &[-16.0, 9.0, -10.0, 6.0]),
        ];
        assert_eq!(ms.len(), 4);
        for e in &expected {
            assert!(ms.iter().any(|m| m.max_abs_diff(e) < 1e-12));
        }

        // Interval hull of the four mergings.
        let hull = match ahat_bin(&w, &p_in, &p_out, DomainKind::Interval, 1000).unwrap() {
            AbstractWeight::Interval(h) => h,
            _ => unreachable!(),
        };
        assert_eq!((hull.lo(0, 0), hull.hi(0, 0)), (-16.0, 14.0));
        assert_eq!((hull.lo(0, 1), hull.hi(0, 1)), (3.0, 9.0));
        assert_eq!((hull.lo(1, 0), hull.hi(1, 0)), (-10.0, 8.0));
        assert_eq!((hull.lo(1, 1), hull.hi(1, 1)), (6.0, 6.0));
    }

    #[test]
    fn ahat_bin_degenerate_with_singletons() {
        let w = mat(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let e = ahat_bin(
            &w,
            &Partitioning::singletons(2),
            &Partitioning::singletons(2),
            DomainKind::Interval,
            1000,
        )
        .unwrap();
        assert!(e.contains(&w, 0.0).unwrap());
        assert!(!e.contains(&mat(2, 2, &[1.0, 2.0, 3.0, 4.1]), 1e-3).unwrap());
    }

    #[test]
    fn random_pcm_is_valid_and_deterministic() {
        let p = part(5, &[&[0, 2], &[1, 3, 4]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_pcm(&p, &mut rng);
        assert!(is_pcm(&a, &p).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_pcm(&p, &mut rng);
        assert_eq!(a, b);
        assert_eq!(
            random_pcm(&Partitioning::singletons(3), &mut rng),
            Matrix::identity(3)
        );
    }

    #[test]
    fn random_pcm_decomposes_over_binary_pcms() {
        // Per-column one-hot decomposition: the coefficient of binary choice
        // `row = i` within a block is the PCM's own entry at (i, block).
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let p = part(5, &[&[0, 2], &[1, 3, 4]]);
            let c = random_pcm(&p, &mut rng);
            let binaries = enumerate_binary_pcms(&p, 1000).unwrap();
            let mut recon = Matrix::zeros(c.rows(), c.cols());
            let mut coeff_sum = 0.0;
            for b in &binaries {
                // coefficient = product over blocks of c's entry at the chosen row
                let mut coeff = 1.0;
                for (j, block) in p.blocks().iter().enumerate() {
                    let chosen = block.iter().find(|&&i| b.get(i, j) == 1.0).unwrap();
                    coeff *= c.get(*chosen, j);
                }
                coeff_sum += coeff;
                for r in 0..c.rows() {
                    for col in 0..c.cols() {
                        recon.set(r, col, recon.get(r, col) + coeff * b.get(r, col));
                    }
                }
            }
            assert!((coeff_sum - 1.0).abs() < 1e-12);
            assert!(recon.max_abs_diff(&c) < 1e-12);
        }
    }

    #[test]
    fn merged_entries_stay_in_block_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..500 {
            use rand::Rng;
            let rows = rng.gen_range(2..=4);
            let cols = rng.gen_range(2..=4);
            let entries: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let m = Matrix::new(rows, cols, entries).unwrap();
            let p_in = random_partitioning(cols, &mut rng);
            let p_out = random_partitioning(rows, &mut rng);
            let c = random_pcm(&p_in, &mut rng);
            let d = random_pcm(&p_out, &mut rng);
            let merged = merge(&m, &c, &d).unwrap();
            for (i, bo) in p_out.blocks().iter().enumerate() {
                for (j, bi) in p_in.blocks().iter().enumerate() {
                    let m_ref = &m;
                    let vals: Vec<f64> = bo
                        .iter()
                        .flat_map(|&r| bi.iter().map(move |&cc| m_ref.get(r, cc)))
                        .collect();
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let e = merged.get(i, j);
                    assert!(e >= lo - 1e-9 && e <= hi + 1e-9);
                }
            }
        }
    }

    #[test]
    fn abstract_dnn_rejects_nonconvex_without_flag() {
        let w1 = mat(2, 1, &[1.0, -1.0]);
        let w2 = mat(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        let n = Dnn::new(vec![
            crate::model::DnnLayer {
                weights: w1,
                activation: crate::model::Activation::ReLU,
            },
            crate::model::DnnLayer {
                weights: w2,
                activation: crate::model::Activation::Identity,
            },
        ])
        .unwrap();
        let lp = LayerwisePartitioning::new(vec![
            Partitioning::singletons(1),
            part(2, &[&[0, 1]]),
            Partitioning::singletons(3),
        ])
        .unwrap();
        let domains = [DomainKind::Powerset, DomainKind::Powerset];
        assert!(matches!(
            abstract_dnn(&n, &lp, &domains, &AbstractionOptions::default()),
            Err(Error::NonConvexDomainRejected)
        ));
        let opts = AbstractionOptions {
            allow_nonconvex: true,
            ..Default::default()
        };
        assert!(abstract_dnn(&n, &lp, &domains, &opts).is_ok());
    }
}
