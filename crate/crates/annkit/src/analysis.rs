//! Whole-network interval analysis over abstract weights, plus a summary of
//! how much a partitioning compresses a network.

use crate::abstraction::LayerwisePartitioning;
use crate::domains::Ann;
use crate::error::{Error, Result};
use crate::model::{Activation, Dnn};
use crate::soundness::Region;
use serde::{Deserialize, Serialize};

/// Per-coordinate output bounds from [`interval_forward`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl OutputBox {
    pub fn contains(&self, v: &[f64], eps: f64) -> bool {
        v.len() == self.lo.len()
            && v.iter()
                .enumerate()
                .all(|(i, &x)| x >= self.lo[i] - eps && x <= self.hi[i] + eps)
    }

    pub fn as_region(&self) -> Result<Region> {
        Region::new(self.lo.clone(), self.hi.clone())
    }
}

/// Bounds every output of the abstract network over the input box: each
/// layer's weight is relaxed to its interval hull and propagated with
/// interval arithmetic; activations are applied via their piecewise ranges.
/// Sound (never excludes a reachable output) but not exact.
pub fn interval_forward(ann: &Ann, input: &Region) -> Result<OutputBox> {
    if input.dim() != ann.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: ann.input_dim(),
            actual: input.dim(),
        });
    }
    let mut lo = input.lo.clone();
    let mut hi = input.hi.clone();
    for layer in ann.layers() {
        let w = layer.weight.interval_hull();
        let rows = w.rows();
        let cols = w.cols();
        let mut zlo = vec![0.0; rows];
        let mut zhi = vec![0.0; rows];
        for r in 0..rows {
            for c in 0..cols {
                // product of two intervals: extremes at endpoint pairs
                let mut pmin = f64::INFINITY;
                let mut pmax = f64::NEG_INFINITY;
                for a in [w.lo(r, c), w.hi(r, c)] {
                    for b in [lo[c], hi[c]] {
                        let p = a * b;
                        pmin = pmin.min(p);
                        pmax = pmax.max(p);
                    }
                }
                zlo[r] += pmin;
                zhi[r] += pmax;
            }
        }
        lo = Vec::with_capacity(rows);
        hi = Vec::with_capacity(rows);
        for r in 0..rows {
            let (l, h) = activation_interval(&layer.activation, zlo[r], zhi[r]);
            lo.push(l);
            hi.push(h);
        }
    }
    Ok(OutputBox { lo, hi })
}

/// Range of an activation over a pre-activation interval.
fn activation_interval(a: &Activation, zlo: f64, zhi: f64) -> (f64, f64) {
    match a {
        Activation::Thresh { t, v } => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            if zlo < *t {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
            if zhi >= *t {
                lo = lo.min(zlo.max(*t));
                hi = hi.max(zhi);
            }
            (lo, hi)
        }
        Activation::LReLU(c) if *c < 0.0 => {
            let mut cands = vec![a.eval(zlo), a.eval(zhi)];
            if zlo < 0.0 && zhi > 0.0 {
                cands.push(0.0);
            }
            (
                cands.iter().cloned().fold(f64::INFINITY, f64::min),
                cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        }
        _ => {
            let (x, y) = (a.eval(zlo), a.eval(zhi));
            (x.min(y), x.max(y))
        }
    }
}

/// Size comparison between a concrete network and its abstraction under a
/// partitioning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionReport {
    /// Node count per interface of the concrete network.
    pub concrete_sizes: Vec<usize>,
    /// Block count per interface of the abstract network.
    pub abstract_sizes: Vec<usize>,
    /// Total scalar weights in the concrete network.
    pub concrete_weights: usize,
    /// Total abstract weight entries (matrix cells of the merged shapes).
    pub abstract_weights: usize,
    /// concrete_weights / abstract_weights.
    pub compression: f64,
}

pub fn reduction_report(n: &Dnn, lp: &LayerwisePartitioning) -> Result<ReductionReport> {
    lp.matches(n)?;
    let concrete_sizes = n.layer_sizes();
    let abstract_sizes: Vec<usize> = lp.layers().iter().map(|p| p.num_blocks()).collect();
    let concrete_weights = n
        .layers()
        .iter()
        .map(|l| l.weights.rows() * l.weights.cols())
        .sum();
    let abstract_weights = (0..n.num_layers())
        .map(|i| lp.layer(i + 1).num_blocks() * lp.layer(i).num_blocks())
        .sum();
    let compression = concrete_weights as f64 / abstract_weights as f64;
    Ok(ReductionReport {
        concrete_sizes,
        abstract_sizes,
        concrete_weights,
        abstract_weights,
        compression,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{
        abstract_dnn, random_partitioning, AbstractionOptions, Partitioning,
    };
    use crate::domains::DomainKind;
    use crate::model::{DnnLayer, Matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: usize, cols: usize, entries: &[f64]) -> Matrix {
        Matrix::new(rows, cols, entries.to_vec()).unwrap()
    }

    fn overview_net(hidden: Activation) -> (Dnn, LayerwisePartitioning) {
        let n = Dnn::new(vec![
            DnnLayer {
                weights: mat(2, 1, &[1.0, -1.0]),
                activation: hidden,
            },
            DnnLayer {
                weights: mat(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
                activation: Activation::Identity,
            },
        ])
        .unwrap();
        let lp = LayerwisePartitioning::new(vec![
            Partitioning::singletons(1),
            Partitioning::new(2, vec![vec![0, 1]]).unwrap(),
            Partitioning::singletons(3),
        ])
        .unwrap();
        (n, lp)
    }

    #[test]
    fn interval_forward_overview_point_input() {
        let (n, lp) = overview_net(Activation::ReLU);
        let ann = abstract_dnn(
            &n,
            &lp,
            &[DomainKind::Interval, DomainKind::Interval],
            &AbstractionOptions::default(),
        )
        .unwrap();
        // hidden weight hull [-1, 1], output hull [0, 2] per row:
        // at v=1 hidden in [0,1], outputs in [0, 2].
        let out = interval_forward(&ann, &Region::point(&[1.0])).unwrap();
        assert_eq!(out.lo, vec![0.0; 3]);
        assert_eq!(out.hi, vec![2.0; 3]);
        assert!(out.contains(&n.eval(&[1.0]).unwrap(), 0.0));
    }

    #[test]
    fn interval_forward_contains_concrete_outputs_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        for _ in 0..300 {
            let depth = rng.gen_range(1..=3);
            let mut sizes = vec![rng.gen_range(1..=4)];
            for _ in 0..depth {
                sizes.push(rng.gen_range(1..=4));
            }
            let acts = [Activation::ReLU, Activation::Identity, Activation::Tanh];
            let mut layers = Vec::new();
            for i in 0..depth {
                let entries: Vec<f64> = (0..sizes[i + 1] * sizes[i])
                    .map(|_| rng.gen_range(-2.0..2.0))
                    .collect();
                layers.push(DnnLayer {
                    weights: Matrix::new(sizes[i + 1], sizes[i], entries).unwrap(),
                    activation: acts[rng.gen_range(0..acts.len())].clone(),
                });
            }
            let n = Dnn::new(layers).unwrap();
            let mut parts = vec![Partitioning::singletons(sizes[0])];
            for &s in &sizes[1..sizes.len() - 1] {
                parts.push(random_partitioning(s, &mut rng));
            }
            parts.push(Partitioning::singletons(sizes[depth]));
            let lp = LayerwisePartitioning::new(parts).unwrap();
            let kinds = [DomainKind::Interval, DomainKind::Octagon];
            let domains: Vec<DomainKind> = (0..depth)
                .map(|_| kinds[rng.gen_range(0..kinds.len())])
                .collect();
            let ann =
                abstract_dnn(&n, &lp, &domains, &AbstractionOptions::default()).unwrap();

            let lo: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-2.0..0.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|&l| l + rng.gen_range(0.0..2.0)).collect();
            let region = Region::new(lo, hi).unwrap();
            let out = interval_forward(&ann, &region).unwrap();
            for _ in 0..20 {
                let v = region.sample(&mut rng);
                assert!(out.contains(&n.eval(&v).unwrap(), 1e-9));
            }
        }
    }

    #[test]
    fn interval_forward_thresh_gap() {
        // thresh(t=1, v=0) over z in [-1, 2]: outputs {0} union [1, 2]
        let n = Dnn::new(vec![DnnLayer {
            weights: mat(1, 1, &[1.0]),
            activation: Activation::Thresh { t: 1.0, v: 0.0 },
        }])
        .unwrap();
        let lp = LayerwisePartitioning::identity(&[1, 1]).unwrap();
        let ann = abstract_dnn(
            &n,
            &lp,
            &[DomainKind::Interval],
            &AbstractionOptions::default(),
        )
        .unwrap();
        let out = interval_forward(&ann, &Region::new(vec![-1.0], vec![2.0]).unwrap()).unwrap();
        assert_eq!((out.lo[0], out.hi[0]), (0.0, 2.0));
    }

    #[test]
    fn reduction_report_overview() {
        let (n, lp) = overview_net(Activation::ReLU);
        let r = reduction_report(&n, &lp).unwrap();
        assert_eq!(r.concrete_sizes, vec![1, 2, 3]);
        assert_eq!(r.abstract_sizes, vec![1, 1, 3]);
        assert_eq!(r.concrete_weights, 8);
        assert_eq!(r.abstract_weights, 4);
        assert_eq!(r.compression, 2.0);
    }
}
