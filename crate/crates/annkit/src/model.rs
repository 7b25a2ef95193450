//! Concrete networks: dense matrices, scalar activation functions, and exact
//! forward evaluation with a full intermediate trace.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Scalar activation function applied component-wise after each linear layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    ReLU,
    /// `x` for `x >= 0`, `c*x` otherwise.
    LReLU(f64),
    Tanh,
    /// `x` for `x >= t`, constant `v` otherwise.
    Thresh { t: f64, v: f64 },
    /// `max(base(x) + s, 0)` with `s >= 0`; produced by the shift transform.
    Shifted { base: Box<Activation>, shift: f64 },
}

impl Activation {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::ReLU => {
                if x >= 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LReLU(c) => {
                if x >= 0.0 {
                    x
                } else {
                    c * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Thresh { t, v } => {
                if x >= *t {
                    x
                } else {
                    *v
                }
            }
            Activation::Shifted { base, shift } => (base.eval(x) + shift).max(0.0),
        }
    }

    /// True when every output of the function is `>= 0`.
    pub fn is_nonnegative(&self) -> bool {
        match self {
            Activation::Identity => false,
            Activation::ReLU => true,
            Activation::LReLU(c) => *c <= 0.0,
            Activation::Tanh => false,
            Activation::Thresh { t, v } => *v >= 0.0 && *t >= 0.0,
            Activation::Shifted { .. } => true,
        }
    }

    /// True when the weakened intermediate value property holds: for sorted
    /// points `a_1 <= ... <= a_k` some `b` in `[a_1, a_k]` maps to the mean of
    /// the images. Holds for every continuous kind; a threshold with a gap in
    /// its range fails it.
    pub fn satisfies_wivp(&self) -> bool {
        match self {
            Activation::Thresh { t, v } => v >= t,
            _ => true,
        }
    }

    /// True when the function is non-decreasing on all of `R`.
    pub fn is_monotone(&self) -> bool {
        match self {
            Activation::Identity | Activation::ReLU | Activation::Tanh => true,
            Activation::LReLU(c) => *c >= 0.0,
            Activation::Thresh { t, v } => v <= t,
            Activation::Shifted { base, .. } => base.is_monotone(),
        }
    }

    /// True when the function is continuous on all of `R`.
    pub fn is_continuous(&self) -> bool {
        match self {
            Activation::Thresh { t, v } => v == t,
            Activation::Shifted { base, .. } => base.is_continuous(),
            _ => true,
        }
    }

    /// A finite constant `C` with `eval(x) >= C` for all `x`, or `None` when
    /// the range is unbounded below. Tight for `Tanh`, `ReLU` and `Shifted`.
    pub fn lower_bound(&self) -> Option<f64> {
        match self {
            Activation::Identity => None,
            Activation::ReLU => Some(0.0),
            Activation::LReLU(c) => {
                if *c > 0.0 {
                    None
                } else {
                    Some(0.0)
                }
            }
            Activation::Tanh => Some(-1.0),
            Activation::Thresh { t, v } => Some(t.min(*v)),
            Activation::Shifted { .. } => Some(0.0),
        }
    }

    /// Stable name used by the serialized model format.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::ReLU => "relu",
            Activation::LReLU(_) => "lrelu",
            Activation::Tanh => "tanh",
            Activation::Thresh { .. } => "thresh",
            Activation::Shifted { .. } => "shifted",
        }
    }
}

/// Dense row-major matrix of finite `f64` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidModel("matrix entry is not finite".into()));
        }
        Ok(Matrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Column vector from a slice.
    pub fn column(entries: &[f64]) -> Self {
        Matrix::new(entries.len(), 1, entries.to_vec()).expect("non-empty column")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.entries[r * self.cols + c] = value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.get(r, k) * other.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: v.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let mut acc = 0.0;
            for c in 0..self.cols {
                acc += self.get(r, c) * v[c];
            }
            out[r] = acc;
        }
        Ok(out)
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.cols)
    }

    /// Entry-wise maximum absolute difference; shapes must already match.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One linear layer plus its activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DnnLayer {
    pub weights: Matrix,
    pub activation: Activation,
}

/// Bias-free feed-forward network: an ordered list of layers with chained
/// dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dnn {
    layers: Vec<DnnLayer>,
}

/// Intermediate values of one forward evaluation: `pre[i]` is the vector
/// before the activation of layer `i`, `post[i]` the vector after it.
#[derive(Debug, Clone)]
pub struct EvalTrace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl EvalTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("trace has at least one layer")
    }
}

impl Dnn {
    pub fn new(layers: Vec<DnnLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[1].weights.cols() != w[0].weights.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "layer output dimension {} does not match next layer input dimension {}",
                    w[0].weights.rows(),
                    w[1].weights.cols()
                )));
            }
        }
        Ok(Dnn { layers })
    }

    pub fn layers(&self) -> &[DnnLayer] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.rows()
    }

    /// Sizes `s_0, s_1, ..., s_n` of the intermediate spaces.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weights.rows()));
        sizes
    }

    /// Forward evaluation, keeping every pre- and post-activation vector.
    pub fn eval_trace(&self, input: &[f64]) -> Result<EvalTrace> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            let z = layer.weights.matvec(&current)?;
            let v: Vec<f64> = z.iter().map(|&x| layer.activation.eval(x)).collect();
            pre.push(z);
            post.push(v.clone());
            current = v;
        }
        Ok(EvalTrace {
            input: input.to_vec(),
            pre,
            post,
        })
    }

    pub fn eval(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_trace(input)?.output().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The two-layer overview network: 1 -> 2 -> 3 with identity output.
    pub fn overview_net(hidden: Activation) -> Dnn {
        let w1 = Matrix::new(2, 1, vec![1.0, -1.0]).unwrap();
        let w2 = Matrix::new(3, 2, vec![1.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        Dnn::new(vec![
            DnnLayer {
                weights: w1,
                activation: hidden,
            },
            DnnLayer {
                weights: w2,
                activation: Activation::Identity,
            },
        ])
        .unwrap()
    }

    #[test]
    fn activation_values() {
        assert_eq!(Activation::LReLU(0.5).eval(-1.0), -0.5);
        assert_eq!(Activation::ReLU.eval(0.0), 0.0);
        assert_eq!(Activation::Thresh { t: 1.0, v: 0.0 }.eval(0.999), 0.0);
        assert_eq!(Activation::Thresh { t: 1.0, v: 0.0 }.eval(1.0), 1.0);
    }

    #[test]
    fn shifted_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let base = Activation::LReLU(0.3);
        let shifted = Activation::Shifted {
            base: Box::new(base.clone()),
            shift: 1.25,
        };
        for _ in 0..10_000 {
            let x = rng.gen_range(-50.0..50.0);
            assert_eq!(shifted.eval(x), (base.eval(x) + 1.25).max(0.0));
        }
    }

    #[test]
    fn activation_metadata() {
        assert!(Activation::ReLU.is_nonnegative());
        assert!(!Activation::LReLU(0.5).is_nonnegative());
        assert!(!Activation::Tanh.is_nonnegative());
        assert!(Activation::Thresh { t: 1.0, v: 0.0 }.is_nonnegative());
        assert!(!Activation::Thresh { t: 1.0, v: -1.0 }.is_nonnegative());
        assert!(Activation::Shifted {
            base: Box::new(Activation::Tanh),
            shift: 1.0
        }
        .is_nonnegative());

        assert!(!Activation::Thresh { t: 1.0, v: 0.0 }.satisfies_wivp());
        assert!(Activation::Tanh.satisfies_wivp());
        assert!(Activation::LReLU(0.5).satisfies_wivp());

        assert!(Activation::Thresh { t: 1.0, v: 0.0 }.is_monotone());
        assert!(!Activation::LReLU(-1.0).is_monotone());
    }

    #[test]
    fn lower_bounds() {
        assert_eq!(Activation::Tanh.lower_bound(), Some(-1.0));
        assert_eq!(Activation::ReLU.lower_bound(), Some(0.0));
        assert_eq!(Activation::LReLU(0.5).lower_bound(), None);
        assert_eq!(Activation::Identity.lower_bound(), None);
        assert_eq!(
            Activation::Thresh { t: 1.0, v: 0.0 }.lower_bound(),
            Some(0.0)
        );
    }

    #[test]
    fn lower_bound_holds_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let acts = [
            Activation::ReLU,
            Activation::Tanh,
            Activation::Thresh { t: 1.0, v: 0.0 },
            Activation::Shifted {
                base: Box::new(Activation::Tanh),
                shift: 1.0,
            },
        ];
        for a in &acts {
            let bound = a.lower_bound().unwrap();
            for _ in 0..100_000 {
                let x = rng.gen_range(-1e4..1e4);
                assert!(a.eval(x) >= bound);
            }
        }
    }

    #[test]
    fn monotone_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let acts = [
            Activation::Identity,
            Activation::ReLU,
            Activation::LReLU(0.5),
            Activation::Tanh,
            Activation::Thresh { t: 1.0, v: 0.0 },
        ];
        for a in acts.iter().filter(|a| a.is_monotone()) {
            for _ in 0..1000 {
                let x = rng.gen_range(-100.0..100.0);
                let y = rng.gen_range(-100.0..100.0);
                let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                assert!(a.eval(lo) <= a.eval(hi), "{a:?} at {lo}, {hi}");
            }
        }
    }

    #[test]
    fn overview_relu_output() {
        let net = overview_net(Activation::ReLU);
        assert_eq!(net.eval(&[1.0]).unwrap(), vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn overview_lrelu_output() {
        let net = overview_net(Activation::LReLU(0.5));
        assert_eq!(net.eval(&[1.0]).unwrap(), vec![0.5, 1.0, -0.5]);
    }

    #[test]
    fn relu_net_zero_input() {
        let net = overview_net(Activation::ReLU);
        assert_eq!(net.eval(&[0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn trace_replays_bit_for_bit() {
        let net = overview_net(Activation::LReLU(0.5));
        let trace = net.eval_trace(&[0.75]).unwrap();
        let mut v = trace.input.clone();
        for (i, layer) in net.layers().iter().enumerate() {
            let z = layer.weights.matvec(&v).unwrap();
            assert_eq!(z, trace.pre[i]);
            v = z.iter().map(|&x| layer.activation.eval(x)).collect();
            assert_eq!(v, trace.post[i]);
        }
        assert_eq!(v.as_slice(), trace.output());
    }

    #[test]
    fn dimension_mismatch_detected() {
        let net = overview_net(Activation::ReLU);
        assert!(matches!(
            net.eval(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
