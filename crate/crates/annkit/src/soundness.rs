//! Constructive soundness machinery: representatives, WIVP preimage solving,
//! the instantiation algorithm that maps mean representatives onto chosen
//! outputs, end-to-end witness construction, exact membership for restricted
//! network shapes, and the two counterexample builders for networks that
//! violate the preconditions.

use crate::abstraction::{scale_cols, LayerwisePartitioning, Partitioning};
use crate::domains::{Ann, DomainKind};
use crate::error::{Error, Result};
use crate::model::{Activation, Dnn, DnnLayer, Matrix};
use serde::{Deserialize, Serialize};

/// Axis-aligned box: per-coordinate closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidModel("box has lo > hi".into()));
        }
        Ok(Region { lo, hi })
    }

    /// Degenerate box at a single point.
    pub fn point(v: &[f64]) -> Self {
        Region {
            lo: v.to_vec(),
            hi: v.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().all(|l| l.is_finite()) && self.hi.iter().all(|h| h.is_finite())
    }

    pub fn contains(&self, v: &[f64], eps: f64) -> bool {
        v.len() == self.dim()
            && v.iter()
                .enumerate()
                .all(|(i, &x)| x >= self.lo[i] - eps && x <= self.hi[i] + eps)
    }

    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if l == h { l } else { rng.gen_range(l..=h) })
            .collect()
    }
}

/// Block-wise mean of `v`: component `j` averages the entries in block `j`.
pub fn mean_rep(v: &[f64], p: &Partitioning) -> Result<Vec<f64>> {
    if v.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: v.len(),
        });
    }
    Ok(p.blocks()
        .iter()
        .map(|block| block.iter().map(|&i| v[i]).sum::<f64>() / block.len() as f64)
        .collect())
}

/// Block-wise min/max box of `v`: the convex representative set.
pub fn rep_box(v: &[f64], p: &Partitioning) -> Result<Region> {
    if v.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: v.len(),
        });
    }
    let lo = p
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&i| v[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi = p
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Region::new(lo, hi)
}

const MAX_BISECT_ITERS: usize = 200;

/// Finds `b` in `[values[0], values[k-1]]` with `a(b)` within `tol` of the
/// mean of the `a(values[i])`, by bisection. Requires a continuous monotone
/// activation; `values` must be sorted ascending.
pub fn wivp_solve(a: &Activation, values: &[f64], tol: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::PreconditionViolated("empty point set".into()));
    }
    // A single point (or a constant run) is its own preimage, whatever the
    // activation looks like.
    if values[0] == values[values.len() - 1] {
        return Ok(values[0]);
    }
    if !a.is_continuous() || !a.is_monotone() {
        return Err(Error::WivpUnsupportedActivation(format!(
            "{} is not continuous and monotone",
            a.kind_name()
        )));
    }
    let target = values.iter().map(|&x| a.eval(x)).sum::<f64>() / values.len() as f64;
    let (mut lo, mut hi) = (values[0], values[values.len() - 1]);
    if a.eval(lo) == target {
        return Ok(lo);
    }
    if a.eval(hi) == target {
        return Ok(hi);
    }
    for _ in 0..MAX_BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        let f = a.eval(mid);
        if (f - target).abs() <= tol || hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()) {
            return Ok(mid);
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(MAX_BISECT_ITERS))
}

/// Instantiates a merged weight matrix: builds the input PCM from the
/// non-negative vector `v`, the output PCM from the chosen representative
/// `w_prime` of `M v`, and returns the column-scaled merging `H`. `H` maps
/// the mean representative of `v` to `w_prime` and lies in the gamma of any
/// convex abstraction of the binary mergings.
pub fn zeta(
    m: &Matrix,
    p_in: &Partitioning,
    p_out: &Partitioning,
    v: &[f64],
    w_prime: &[f64],
) -> Result<Matrix> {
    let (c, d) = zeta_pcms(m, p_in, p_out, v, w_prime)?;
    scale_cols(
        &d.transpose().matmul(m)?.matmul(&c)?,
        &p_in.block_sizes(),
    )
}

/// The PCM pair constructed by the instantiation algorithm; exposed so tests
/// can check both matrices against the PCV conditions.
pub fn zeta_pcms(
    m: &Matrix,
    p_in: &Partitioning,
    p_out: &Partitioning,
    v: &[f64],
    w_prime: &[f64],
) -> Result<(Matrix, Matrix)> {
    if v.len() != p_in.dim() || m.cols() != p_in.dim() || m.rows() != p_out.dim() {
        return Err(Error::ShapeMismatch(format!(
            "zeta: matrix {}x{}, input dim {}, partitionings {}/{}",
            m.rows(),
            m.cols(),
            v.len(),
            p_in.dim(),
            p_out.dim()
        )));
    }
    if w_prime.len() != p_out.num_blocks() {
        return Err(Error::DimensionMismatch {
            expected: p_out.num_blocks(),
            actual: w_prime.len(),
        });
    }

    let mut c = Matrix::zeros(p_in.dim(), p_in.num_blocks());
    for (i, block) in p_in.blocks().iter().enumerate() {
        if block.len() == 1 {
            c.set(block[0], i, 1.0);
            continue;
        }
        if let Some(&j) = block.iter().find(|&&j| v[j] < 0.0) {
            return Err(Error::NegativeInput(j));
        }
        let total: f64 = block.iter().map(|&j| v[j]).sum();
        if total == 0.0 {
            // A zero block contributes nothing to the mean representative;
            // any PCV works, so spread uniformly.
            for &j in block {
                c.set(j, i, 1.0 / block.len() as f64);
            }
        } else {
            for &j in block {
                c.set(j, i, v[j] / total);
            }
        }
    }

    let w = m.matvec(v)?;
    let mut d = Matrix::zeros(p_out.dim(), p_out.num_blocks());
    for (i, block) in p_out.blocks().iter().enumerate() {
        // argmax / argmin with ties resolved to the lowest index
        let mut a = block[0];
        let mut b = block[0];
        for &p in block {
            if w[p] > w[a] {
                a = p;
            }
            if w[p] < w[b] {
                b = p;
            }
        }
        let slack = 1e-9 * (1.0 + w[a].abs().max(w[b].abs()));
        if w_prime[i] < w[b] - slack || w_prime[i] > w[a] + slack {
            return Err(Error::RepresentativeOutOfRange {
                index: i,
                value: w_prime[i],
                lo: w[b],
                hi: w[a],
            });
        }
        if w[a] == w[b] {
            // Constant block: the representative necessarily equals it.
            d.set(a, i, 1.0);
        } else {
            let theta = ((w_prime[i] - w[b]) / (w[a] - w[b])).clamp(0.0, 1.0);
            d.set(a, i, theta);
            d.set(b, i, 1.0 - theta);
        }
    }
    Ok((c, d))
}

/// One instantiated layer of a witness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessLayer {
    /// Concrete matrix in the gamma of the layer's abstract weight.
    pub weight: Matrix,
    /// Representative preimage chosen for the layer's post-activations.
    pub w_prime: Vec<f64>,
    /// Mean representative entering the layer.
    pub rep_in: Vec<f64>,
    /// Mean representative leaving the layer.
    pub rep_out: Vec<f64>,
}

/// Instantiation certifying that one concrete input's output is in the
/// abstract network's output set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub input: Vec<f64>,
    pub layers: Vec<WitnessLayer>,
    pub output: Vec<f64>,
}

/// Tolerances used by [`witness_instantiation`].
pub const WIVP_TOL: f64 = 1e-12;
pub const LAYER_TOL: f64 = 1e-9;
pub const END_TO_END_TOL: f64 = 1e-6;

/// Builds an instantiation of `ann` whose output on `v` equals the concrete
/// network's output. Per layer: a representative preimage of the block means
/// is found by bisection, then the instantiation algorithm produces a matrix
/// in gamma mapping mean representative to representative. With `force` the
/// precondition check (non-negative, WIVP-capable activations) is skipped and
/// violations surface as `WitnessFailed`.
pub fn witness_instantiation(
    n: &Dnn,
    ann: &Ann,
    lp: &LayerwisePartitioning,
    v: &[f64],
    force: bool,
) -> Result<Witness> {
    lp.matches(n)?;
    if ann.num_layers() != n.num_layers() {
        return Err(Error::PartitioningMismatch(format!(
            "abstract network has {} layers, concrete has {}",
            ann.num_layers(),
            n.num_layers()
        )));
    }
    if !force {
        // Only layers whose outputs feed another layer constrain the
        // construction: merged inputs must be non-negative and the
        // representative preimage must exist. The final layer's activation
        // is applied after the last instantiated matrix and is unrestricted.
        for (i, layer) in n.layers().iter().enumerate().take(n.num_layers() - 1) {
            if !layer.activation.is_nonnegative() {
                return Err(Error::PreconditionViolated(format!(
                    "layer {i} activation {} can output negative values",
                    layer.activation.kind_name()
                )));
            }
            if !layer.activation.satisfies_wivp() {
                return Err(Error::PreconditionViolated(format!(
                    "layer {i} activation {} violates the WIVP",
                    layer.activation.kind_name()
                )));
            }
        }
    }

    let trace = n.eval_trace(v)?;
    let mut rep_in = mean_rep(v, lp.layer(0))?;
    let mut layers = Vec::with_capacity(n.num_layers());
    for (i, layer) in n.layers().iter().enumerate() {
        let fail = |reason: String| Error::WitnessFailed {
            layer: i + 1,
            reason,
        };
        let p_in = lp.layer(i);
        let p_out = lp.layer(i + 1);
        let w = &trace.pre[i];
        let post = &trace.post[i];

        // Representative preimage per block: mean of the post-activations,
        // pulled back through the activation within the block's value range.
        let mut w_prime = Vec::with_capacity(p_out.num_blocks());
        for block in p_out.blocks() {
            let mut vals: Vec<f64> = block.iter().map(|&p| w[p]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let b = wivp_solve(&layer.activation, &vals, WIVP_TOL)
                .map_err(|e| fail(e.to_string()))?;
            w_prime.push(b);
        }

        let h = zeta(&layer.weights, p_in, p_out, &trace_input(&trace, i), &w_prime)
            .map_err(|e| fail(e.to_string()))?;
        if !ann.layers()[i]
            .weight
            .contains(&h, LAYER_TOL)
            .map_err(|e| fail(e.to_string()))?
        {
            return Err(fail(
                "instantiated matrix is outside the abstract weight".into(),
            ));
        }

        // Check the commuting square: H(rep_in) = w', activation(w') equals
        // the block means of the concrete post-activations.
        let mapped = h.matvec(&rep_in).map_err(|e| fail(e.to_string()))?;
        let max_dev = mapped
            .iter()
            .zip(&w_prime)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if max_dev > LAYER_TOL {
            return Err(fail(format!(
                "instantiated layer misses its representative by {max_dev:.3e}"
            )));
        }
        let rep_out: Vec<f64> = w_prime.iter().map(|&x| layer.activation.eval(x)).collect();
        let expected_rep = mean_rep(post, p_out)?;
        let rep_dev = rep_out
            .iter()
            .zip(&expected_rep)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if rep_dev > 1e-7 {
            return Err(fail(format!(
                "post-activation representative off by {rep_dev:.3e}"
            )));
        }

        layers.push(WitnessLayer {
            weight: h,
            w_prime,
            rep_in: rep_in.clone(),
            rep_out: rep_out.clone(),
        });
        rep_in = rep_out;
    }

    // Boundary partitionings are singletons, so the final representative is
    // the instantiated output itself.
    let output = trace.output().to_vec();
    let final_dev = rep_in
        .iter()
        .zip(&output)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if final_dev > END_TO_END_TOL {
        return Err(Error::WitnessFailed {
            layer: n.num_layers(),
            reason: format!("end-to-end deviation {final_dev:.3e}"),
        });
    }
    Ok(Witness {
        input: v.to_vec(),
        layers,
        output,
    })
}

fn trace_input<'a>(trace: &'a crate::model::EvalTrace, layer: usize) -> &'a [f64] {
    if layer == 0 {
        &trace.input
    } else {
        &trace.post[layer - 1]
    }
}

/// Replays a witness: chains the instantiated layers on the input and checks
/// the recorded output is reproduced and every matrix is in gamma.
pub fn verify_witness(ann: &Ann, w: &Witness, eps: f64) -> Result<()> {
    let mut v = w.input.clone();
    for (i, (wl, al)) in w.layers.iter().zip(ann.layers()).enumerate() {
        if !al.weight.contains(&wl.weight, eps)? {
            return Err(Error::WitnessFailed {
                layer: i + 1,
                reason: "recorded matrix is outside the abstract weight".into(),
            });
        }
        let z = wl.weight.matvec(&v)?;
        v = z.iter().map(|&x| al.activation.eval(x)).collect();
    }
    let dev = v
        .iter()
        .zip(&w.output)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if dev > END_TO_END_TOL {
        return Err(Error::WitnessFailed {
            layer: w.layers.len(),
            reason: format!("replayed output deviates by {dev:.3e}"),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Exact output-set membership for restricted shapes
// ---------------------------------------------------------------------------

/// Union of disjoint closed intervals on the real line, endpoints possibly
/// infinite. Just enough set algebra for the scalar feasibility problems of
/// `exact_membership_small`.
#[derive(Debug, Clone, PartialEq)]
struct IntervalSet {
    spans: Vec<(f64, f64)>,
}

impl IntervalSet {
    fn empty() -> Self {
        IntervalSet { spans: vec![] }
    }

    #[cfg(test)]
    fn all() -> Self {
        IntervalSet {
            spans: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        }
    }

    fn from_spans(mut spans: Vec<(f64, f64)>) -> Self {
        spans.retain(|(l, h)| l <= h);
        spans.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (l, h) in spans {
            match merged.last_mut() {
                Some(last) if l <= last.1 => last.1 = last.1.max(h),
                _ => merged.push((l, h)),
            }
        }
        IntervalSet { spans: merged }
    }

    fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for &(a, b) in &self.spans {
            for &(c, d) in &other.spans {
                let l = a.max(c);
                let h = b.min(d);
                if l <= h {
                    out.push((l, h));
                }
            }
        }
        IntervalSet::from_spans(out)
    }
}

/// Solutions of `a*h <= b` restricted to the closed half-line `h >= 0`
/// (`positive = true`) or `h <= 0`.
fn linear_halfline(a: f64, b: f64, positive: bool) -> IntervalSet {
    let (lo, hi) = if positive {
        (0.0, f64::INFINITY)
    } else {
        (f64::NEG_INFINITY, 0.0)
    };
    if a == 0.0 {
        return if b >= 0.0 {
            IntervalSet::from_spans(vec![(lo, hi)])
        } else {
            IntervalSet::empty()
        };
    }
    let root = b / a;
    let span = if a > 0.0 {
        (f64::NEG_INFINITY, root)
    } else {
        (root, f64::INFINITY)
    };
    IntervalSet::from_spans(vec![(span.0.max(lo), span.1.min(hi))])
}

/// Feasible hidden values `h` with `y` attainable as `u*h` for some
/// `u` in `[ulo, uhi]`, with slack `eps`. At most two intervals.
fn scalar_constraint(ulo: f64, uhi: f64, y: f64, eps: f64) -> IntervalSet {
    let mut out = IntervalSet::empty();
    for positive in [true, false] {
        // On each half-line min/max of u*h over u are linear in h.
        let (min_c, max_c) = if positive { (ulo, uhi) } else { (uhi, ulo) };
        // need min_c*h <= y + eps and max_c*h >= y - eps
        let s = linear_halfline(min_c, y + eps, positive)
            .intersect(&linear_halfline(-max_c, -(y - eps), positive));
        out = IntervalSet::from_spans([out.spans, s.spans].concat());
    }
    out
}

/// Image of a monotone activation over `[zlo, zhi]` as an interval set.
/// Continuous kinds give one interval; a gapped threshold gives the constant
/// plus the part of the identity branch that is reached.
fn activation_image(a: &Activation, zlo: f64, zhi: f64) -> Result<IntervalSet> {
    if !a.is_monotone() {
        return Err(Error::UnsupportedExactMembership(format!(
            "non-monotone activation {}",
            a.kind_name()
        )));
    }
    if a.is_continuous() {
        return Ok(IntervalSet::from_spans(vec![(a.eval(zlo), a.eval(zhi))]));
    }
    match a {
        Activation::Thresh { t, v } => {
            let mut spans = Vec::new();
            if zlo < *t {
                spans.push((*v, *v));
            }
            if zhi >= *t {
                spans.push((zlo.max(*t), zhi));
            }
            Ok(IntervalSet::from_spans(spans))
        }
        _ => Err(Error::UnsupportedExactMembership(format!(
            "discontinuous activation {}",
            a.kind_name()
        ))),
    }
}

/// Decides whether `y` is in the abstract network's output set at `v`, for
/// two restricted shapes: (a) two interval layers with a single hidden
/// dimension, monotone hidden activation and identity output activation,
/// solved exactly over the scalar hidden value; (b) all finite weight sets,
/// solved by enumerating every instantiation tuple.
pub fn exact_membership_small(ann: &Ann, v: &[f64], y: &[f64], eps: f64) -> Result<bool> {
    if v.len() != ann.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: ann.input_dim(),
            actual: v.len(),
        });
    }
    if y.len() != ann.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: ann.output_dim(),
            actual: y.len(),
        });
    }

    if ann
        .layers()
        .iter()
        .all(|l| matches!(l.weight, crate::domains::AbstractWeight::Finite(_)))
    {
        return Ok(enumerate_finite(ann, v, y, eps, 0, v.to_vec())?);
    }

    // Shape (a): 2 interval layers, hidden dimension 1.
    if ann.num_layers() == 2 {
        use crate::domains::AbstractWeight;
        if let (AbstractWeight::Interval(w1), AbstractWeight::Interval(w2)) =
            (&ann.layers()[0].weight, &ann.layers()[1].weight)
        {
            let hidden_act = &ann.layers()[0].activation;
            if w1.rows() == 1
                && hidden_act.is_monotone()
                && ann.layers()[1].activation == Activation::Identity
            {
                // Pre-activation range over the weight box for fixed input v.
                let (mut zlo, mut zhi) = (0.0, 0.0);
                for (j, &x) in v.iter().enumerate() {
                    let (l, h) = (w1.lo(0, j), w1.hi(0, j));
                    let (a, b) = (l * x, h * x);
                    zlo += a.min(b);
                    zhi += a.max(b);
                }
                let image = activation_image(hidden_act, zlo, zhi)?;
                let mut feasible = image;
                for (i, &yi) in y.iter().enumerate() {
                    let c = scalar_constraint(w2.lo(i, 0), w2.hi(i, 0), yi, eps);
                    feasible = feasible.intersect(&c);
                    if feasible.is_empty() {
                        return Ok(false);
                    }
                }
                return Ok(!feasible.is_empty());
            }
        }
    }

    Err(Error::UnsupportedExactMembership(
        "supported shapes: single hidden dimension with interval weights, or all finite sets"
            .into(),
    ))
}

fn enumerate_finite(
    ann: &Ann,
    v: &[f64],
    y: &[f64],
    eps: f64,
    layer: usize,
    current: Vec<f64>,
) -> Result<bool> {
    if layer == ann.num_layers() {
        let dev = current
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        return Ok(dev <= eps);
    }
    let al = &ann.layers()[layer];
    let members = match &al.weight {
        crate::domains::AbstractWeight::Finite(s) => s.members(),
        _ => unreachable!("caller checked all layers are finite"),
    };
    for m in members {
        let z = m.matvec(&current)?;
        let next: Vec<f64> = z.iter().map(|&x| al.activation.eval(x)).collect();
        if enumerate_finite(ann, v, y, eps, layer + 1, next)? {
            return Ok(true);
        }
    }
    Ok(false)
}

// ---------------------------------------------------------------------------
// Counterexample builders
// ---------------------------------------------------------------------------

/// Network and partitioning refuting soundness for an activation with mixed
/// output signs: `N(v) = I * a([x; y] v)` with the two hidden nodes merged.
/// Requires `a(x) < 0 < a(y)`. The interval abstraction of this network
/// provably misses `N(1)`.
pub fn build_nonneg_counterexample(
    a: &Activation,
    x: f64,
    y: f64,
) -> Result<(Dnn, LayerwisePartitioning)> {
    if !(a.eval(x) < 0.0) || !(a.eval(y) > 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "need a(x) < 0 < a(y); got a({x}) = {} and a({y}) = {}",
            a.eval(x),
            a.eval(y)
        )));
    }
    let n = Dnn::new(vec![
        DnnLayer {
            weights: Matrix::column(&[x, y]),
            activation: a.clone(),
        },
        DnnLayer {
            weights: Matrix::identity(2),
            activation: Activation::Identity,
        },
    ])?;
    let lp = LayerwisePartitioning::new(vec![
        Partitioning::singletons(1),
        Partitioning::new(2, vec![vec![0, 1]])?,
        Partitioning::singletons(2),
    ])?;
    Ok((n, lp))
}

/// Grid-search certificate that no `b` in `[a_1, a_k]` maps within `tol` of
/// the mean of the images. Only meaningful for range-gap functions, where the
/// miss distance is bounded away from zero.
pub fn wivp_violated_on(a: &Activation, points: &[f64], tol: f64) -> bool {
    let target = points.iter().map(|&x| a.eval(x)).sum::<f64>() / points.len() as f64;
    let (lo, hi) = (points[0], points[points.len() - 1]);
    const STEPS: usize = 100_000;
    (0..=STEPS).all(|i| {
        let b = lo + (hi - lo) * i as f64 / STEPS as f64;
        (a.eval(b) - target).abs() > tol
    })
}

/// Network and partitioning refuting soundness for an activation violating
/// the WIVP at the given sorted points: `N(v) = [1..1] * a((a_1..a_k) v)`
/// with all hidden nodes merged.
pub fn build_wivp_counterexample(
    a: &Activation,
    points: &[f64],
) -> Result<(Dnn, LayerwisePartitioning)> {
    if points.is_empty() || points.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::PreconditionViolated(
            "points must be non-empty and sorted ascending".into(),
        ));
    }
    if !wivp_violated_on(a, points, 1e-6) {
        return Err(Error::PreconditionViolated(
            "the activation satisfies the WIVP at these points".into(),
        ));
    }
    let k = points.len();
    let n = Dnn::new(vec![
        DnnLayer {
            weights: Matrix::column(points),
            activation: a.clone(),
        },
        DnnLayer {
            weights: Matrix::new(1, k, vec![1.0; k])?,
            activation: Activation::Identity,
        },
    ])?;
    let lp = LayerwisePartitioning::new(vec![
        Partitioning::singletons(1),
        Partitioning::new(k, vec![(0..k).collect()])?,
        Partitioning::singletons(1),
    ])?;
    Ok((n, lp))
}

/// Convenience used by the counterexample demos and golden suite: interval
/// abstraction of `(n, lp)` and the non-membership verdict for `n`'s own
/// output at `v`.
pub fn refutes_membership(n: &Dnn, lp: &LayerwisePartitioning, v: &[f64]) -> Result<bool> {
    let ann = crate::abstraction::abstract_dnn(
        n,
        lp,
        &vec![DomainKind::Interval; n.num_layers()],
        &crate::abstraction::AbstractionOptions::default(),
    )?;
    let out = n.eval(v)?;
    Ok(!exact_membership_small(&ann, v, &out, 1e-9)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{
        abstract_dnn, ahat_bin, is_pcm, random_partitioning, random_pcm, AbstractionOptions,
    };
    use crate::domains::AbstractWeight;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: usize, cols: usize, entries: &[f64]) -> Matrix {
        Matrix::new(rows, cols, entries.to_vec()).unwrap()
    }

    fn part(n: usize, blocks: &[&[usize]]) -> Partitioning {
        Partitioning::new(n, blocks.iter().map(|b| b.to_vec()).collect()).unwrap()
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
            part(2, &[&[0, 1]]),
            Partitioning::singletons(3),
        ])
        .unwrap();
        (n, lp)
    }

    #[test]
    fn mean_rep_and_rep_box_worked_example() {
        let v = [5.0, 6.0, 11.0, 2.0, 1.0];
        let p = part(5, &[&[0, 2], &[1, 3, 4]]);
        assert_eq!(mean_rep(&v, &p).unwrap(), vec![8.0, 3.0]);
        let b = rep_box(&v, &p).unwrap();
        assert_eq!(b.lo, vec![5.0, 1.0]);
        assert_eq!(b.hi, vec![11.0, 6.0]);
        assert!(b.contains(&mean_rep(&v, &p).unwrap(), 0.0));
    }

    #[test]
    fn mean_rep_identity_cases() {
        let v = [3.0, -1.0, 2.0];
        let p = Partitioning::singletons(3);
        assert_eq!(mean_rep(&v, &p).unwrap(), v.to_vec());
        let b = rep_box(&v, &p).unwrap();
        assert_eq!(b.lo, v.to_vec());
        let constant = [4.0; 5];
        let p = part(5, &[&[0, 1, 2], &[3, 4]]);
        assert_eq!(mean_rep(&constant, &p).unwrap(), vec![4.0, 4.0]);
    }

    #[test]
    fn wivp_solve_relu_midpoint() {
        let b = wivp_solve(&Activation::ReLU, &[-1.0, 1.0], 1e-12).unwrap();
        assert!((b - 0.5).abs() < 1e-9);
        assert!((Activation::ReLU.eval(b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wivp_solve_single_point() {
        let b = wivp_solve(&Activation::Tanh, &[0.7], 1e-12).unwrap();
        assert_eq!(b, 0.7);
    }

    #[test]
    fn wivp_solve_tanh_against_analytic_inverse() {
        let b = wivp_solve(&Activation::Tanh, &[0.0, 1.0], 1e-12).unwrap();
        let target = 1.0_f64.tanh() / 2.0;
        // analytic inverse: artanh(t) = ln((1+t)/(1-t)) / 2
        let analytic = 0.5 * ((1.0 + target) / (1.0 - target)).ln();
        assert!((b - analytic).abs() < 1e-9);
        assert!(b >= 0.0 && b <= 1.0);
    }

    #[test]
    fn wivp_solve_rejects_thresh() {
        assert!(matches!(
            wivp_solve(&Activation::Thresh { t: 1.0, v: 0.0 }, &[0.0, 1.0], 1e-12),
            Err(Error::WivpUnsupportedActivation(_))
        ));
    }

    #[test]
    fn wivp_solve_random_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(1001);
        let acts = [Activation::ReLU, Activation::Tanh, Activation::LReLU(0.3)];
        for _ in 0..500 {
            let a = &acts[rng.gen_range(0..acts.len())];
            let k = rng.gen_range(1..=6);
            let mut pts: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
            pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let b = wivp_solve(a, &pts, 1e-12).unwrap();
            assert!(b >= pts[0] - 1e-12 && b <= pts[k - 1] + 1e-12);
            let mean = pts.iter().map(|&x| a.eval(x)).sum::<f64>() / k as f64;
            assert!((a.eval(b) - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn zeta_first_layer_of_overview_witness() {
        // m = [1; -1], v = (1), w' = (0.5) -> H = [0.5]
        let h = zeta(
            &mat(2, 1, &[1.0, -1.0]),
            &Partitioning::singletons(1),
            &part(2, &[&[0, 1]]),
            &[1.0],
            &[0.5],
        )
        .unwrap();
        assert!(h.max_abs_diff(&mat(1, 1, &[0.5])) < 1e-12);
    }

    #[test]
    fn zeta_second_layer_of_overview_witness() {
        // m = [[1,1],[1,0],[0,1]], v = (1, 0), w' = (1, 1, 0) -> H = (2,2,0)^T
        let h = zeta(
            &mat(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
            &part(2, &[&[0, 1]]),
            &Partitioning::singletons(3),
            &[1.0, 0.0],
            &[1.0, 1.0, 0.0],
        )
        .unwrap();
        assert!(h.max_abs_diff(&mat(3, 1, &[2.0, 2.0, 0.0])) < 1e-12);
    }

    #[test]
    fn zeta_zero_block_uses_uniform_column() {
        let m = mat(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p_in = part(2, &[&[0, 1]]);
        let p_out = part(2, &[&[0, 1]]);
        let v = [0.0, 0.0];
        let w = m.matvec(&v).unwrap(); // all zeros
        let w_prime = [0.0];
        let (c, d) = zeta_pcms(&m, &p_in, &p_out, &v, &w_prime).unwrap();
        assert!(is_pcm(&c, &p_in).unwrap());
        assert!(is_pcm(&d, &p_out).unwrap());
        assert_eq!(c.get(0, 0), 0.5);
        let h = zeta(&m, &p_in, &p_out, &v, &w_prime).unwrap();
        let rep = mean_rep(&v, &p_in).unwrap();
        assert_eq!(h.matvec(&rep).unwrap(), vec![0.0]);
        let _ = w;
    }

    #[test]
    fn zeta_rejects_negative_merged_input() {
        let m = mat(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p = part(2, &[&[0, 1]]);
        assert!(matches!(
            zeta(&m, &p, &p, &[1.0, -0.5], &[3.0]),
            Err(Error::NegativeInput(1))
        ));
    }

    #[test]
    fn zeta_rejects_out_of_range_representative() {
        let m = mat(2, 1, &[1.0, -1.0]);
        assert!(matches!(
            zeta(
                &m,
                &Partitioning::singletons(1),
                &part(2, &[&[0, 1]]),
                &[1.0],
                &[2.0]
            ),
            Err(Error::RepresentativeOutOfRange { .. })
        ));
    }

    #[test]
    fn zeta_randomized_lemma() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let rows = rng.gen_range(1..=4);
            let cols = rng.gen_range(1..=4);
            let entries: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let m = Matrix::new(rows, cols, entries).unwrap();
            let p_in = random_partitioning(cols, &mut rng);
            let p_out = random_partitioning(rows, &mut rng);
            let v: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.0..3.0)).collect();
            let w = m.matvec(&v).unwrap();
            let rbox = rep_box(&w, &p_out).unwrap();
            let w_prime: Vec<f64> = rbox
                .lo
                .iter()
                .zip(&rbox.hi)
                .map(|(&l, &h)| if l == h { l } else { rng.gen_range(l..=h) })
                .collect();

            let (c, d) = zeta_pcms(&m, &p_in, &p_out, &v, &w_prime).unwrap();
            assert!(is_pcm(&c, &p_in).unwrap());
            assert!(is_pcm(&d, &p_out).unwrap());

            let h = zeta(&m, &p_in, &p_out, &v, &w_prime).unwrap();
            let rep = mean_rep(&v, &p_in).unwrap();
            let mapped = h.matvec(&rep).unwrap();
            for (a, b) in mapped.iter().zip(&w_prime) {
                assert!((a - b).abs() < 1e-9);
            }
            let abstracted =
                ahat_bin(&m, &p_in, &p_out, DomainKind::Interval, 1_000_000).unwrap();
            assert!(abstracted.contains(&h, 1e-9).unwrap());
            let _ = random_pcm(&p_in, &mut rng);
        }
    }

    #[test]
    fn witness_for_overview_relu_both_signs() {
        let (n, lp) = overview_net(Activation::ReLU);
        let ann = abstract_dnn(
            &n,
            &lp,
            &[DomainKind::Interval, DomainKind::Interval],
            &AbstractionOptions::default(),
        )
        .unwrap();

        let w = witness_instantiation(&n, &ann, &lp, &[1.0], false).unwrap();
        assert!(w.layers[0].weight.max_abs_diff(&mat(1, 1, &[0.5])) < 1e-9);
        assert!(w.layers[1]
            .weight
            .max_abs_diff(&mat(3, 1, &[2.0, 2.0, 0.0]))
            < 1e-9);
        assert_eq!(w.output, vec![1.0, 1.0, 0.0]);
        verify_witness(&ann, &w, 1e-9).unwrap();

        let w = witness_instantiation(&n, &ann, &lp, &[-1.0], false).unwrap();
        assert!(w.layers[0].weight.max_abs_diff(&mat(1, 1, &[-0.5])) < 1e-9);
        assert!(w.layers[1]
            .weight
            .max_abs_diff(&mat(3, 1, &[2.0, 0.0, 2.0]))
            < 1e-9);
        verify_witness(&ann, &w, 1e-9).unwrap();
    }

    #[test]
    fn witness_identity_partitioning_reproduces_weights() {
        let (n, _) = overview_net(Activation::ReLU);
        let lp = LayerwisePartitioning::identity(&n.layer_sizes()).unwrap();
        let ann = abstract_dnn(
            &n,
            &lp,
            &[DomainKind::Interval, DomainKind::Interval],
            &AbstractionOptions::default(),
        )
        .unwrap();
        let w = witness_instantiation(&n, &ann, &lp, &[0.3], false).unwrap();
        for (wl, nl) in w.layers.iter().zip(n.layers()) {
            assert!(wl.weight.max_abs_diff(&nl.weights) < 1e-12);
        }
    }

    #[test]
    fn witness_rejects_mixed_sign_activation_without_force() {
        let (n, lp) = overview_net(Activation::LReLU(0.5));
        let ann = abstract_dnn(
            &n,
            &lp,
            &[DomainKind::Interval, DomainKind::Interval],
            &AbstractionOptions::default(),
        )
        .unwrap();
        assert!(matches!(
            witness_instantiation(&n, &ann, &lp, &[1.0], false),
            Err(Error::PreconditionViolated(_))
        ));
        // With force, the failure surfaces as a per-layer diagnostic.
        match witness_instantiation(&n, &ann, &lp, &[1.0], true) {
            Err(Error::WitnessFailed { layer: 2, reason }) => {
                assert!(reason.contains("negative"), "{reason}");
            }
            other => panic!("expected layer-2 sign failure, got {other:?}"),
        }
    }

    #[test]
    fn lrelu_network_refutes_interval_membership() {
        let (n, lp) = overview_net(Activation::LReLU(0.5));
        assert!(refutes_membership(&n, &lp, &[1.0]).unwrap());
    }

    #[test]
    fn thresh_network_refutes_interval_membership() {
        let (n, lp) = overview_net(Activation::Thresh { t: 1.0, v: 0.0 });
        assert!(refutes_membership(&n, &lp, &[1.0]).unwrap());
    }

    #[test]
    fn relu_network_is_member() {
        let (n, lp) = overview_net(Activation::ReLU);
        let ann = abstract_dnn(
            &n,
            &lp,
            &[DomainKind::Interval, DomainKind::Interval],
            &AbstractionOptions::default(),
        )
        .unwrap();
        assert!(exact_membership_small(&ann, &[1.0], &[1.0, 1.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn powerset_network_misses_true_output() {
        let (n, lp) = overview_net(Activation::ReLU);
        let opts = AbstractionOptions {
            allow_nonconvex: true,
            ..Default::default()
        };
        let ann = abstract_dnn(
            &n,
            &lp,
            &[DomainKind::Powerset, DomainKind::Powerset],
            &opts,
        )
        .unwrap();
        assert!(!exact_membership_small(&ann, &[1.0], &[1.0, 1.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn nonneg_counterexample_lrelu() {
        let (n, lp) =
            build_nonneg_counterexample(&Activation::LReLU(0.5), -1.0, 1.0).unwrap();
        assert_eq!(n.eval(&[1.0]).unwrap(), vec![-0.5, 1.0]);
        // The merged second layer abstracts to the hull of {(2,0), (0,2)}.
        let ann = abstract_dnn(
            &n,
            &lp,
            &[DomainKind::Interval, DomainKind::Interval],
            &AbstractionOptions::default(),
        )
        .unwrap();
        match &ann.layers()[1].weight {
            AbstractWeight::Interval(h) => {
                assert_eq!((h.lo(0, 0), h.hi(0, 0)), (0.0, 2.0));
                assert_eq!((h.lo(1, 0), h.hi(1, 0)), (0.0, 2.0));
            }
            other => panic!("unexpected weight {other:?}"),
        }
        assert!(refutes_membership(&n, &lp, &[1.0]).unwrap());
    }

    #[test]
    fn nonneg_counterexample_rejects_relu() {
        assert!(matches!(
            build_nonneg_counterexample(&Activation::ReLU, -1.0, 1.0),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn nonneg_counterexample_tanh() {
        let (n, lp) = build_nonneg_counterexample(&Activation::Tanh, -1.0, 1.0).unwrap();
        assert!(refutes_membership(&n, &lp, &[1.0]).unwrap());
    }

    #[test]
    fn wivp_counterexample_thresh() {
        let a = Activation::Thresh { t: 1.0, v: 0.0 };
        let (n, lp) = build_wivp_counterexample(&a, &[0.0, 1.0]).unwrap();
        assert_eq!(n.eval(&[1.0]).unwrap(), vec![1.0]);
        assert!(refutes_membership(&n, &lp, &[1.0]).unwrap());
    }

    #[test]
    fn wivp_counterexample_rejects_continuous() {
        assert!(matches!(
            build_wivp_counterexample(&Activation::ReLU, &[0.0, 1.0]),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn wivp_counterexample_rejects_points_where_wivp_holds() {
        // Both points map to 0, and thresh(0.2) = 0 hits the mean.
        let a = Activation::Thresh { t: 1.0, v: 0.0 };
        assert!(matches!(
            build_wivp_counterexample(&a, &[0.2, 0.4]),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn exact_membership_agrees_with_grid_sampling() {
        // The three two-layer networks with a single merged hidden node:
        // dense grid over the two scalar weight intervals.
        for (act, expect) in [
            (Activation::ReLU, true),
            (Activation::LReLU(0.5), false),
            (Activation::Thresh { t: 1.0, v: 0.0 }, false),
        ] {
            let (n, lp) = overview_net(act);
            let ann = abstract_dnn(
                &n,
                &lp,
                &[DomainKind::Interval, DomainKind::Interval],
                &AbstractionOptions::default(),
            )
            .unwrap();
            let y = n.eval(&[1.0]).unwrap();
            let exact = exact_membership_small(&ann, &[1.0], &y, 1e-9).unwrap();
            assert_eq!(exact, expect);

            let (w1, w2) = match (&ann.layers()[0].weight, &ann.layers()[1].weight) {
                (AbstractWeight::Interval(a), AbstractWeight::Interval(b)) => (a, b),
                _ => unreachable!(),
            };
            let act = &ann.layers()[0].activation;
            let mut best = f64::INFINITY;
            let steps = 100;
            for i in 0..=steps {
                let wa = w1.lo(0, 0) + (w1.hi(0, 0) - w1.lo(0, 0)) * i as f64 / steps as f64;
                let h = act.eval(wa);
                // per-output nearest attainable value
                let mut dist: f64 = 0.0;
                for (r, &yr) in y.iter().enumerate() {
                    let (lo, hi) = (w2.lo(r, 0) * h, w2.hi(r, 0) * h);
                    let (lo, hi) = (lo.min(hi), lo.max(hi));
                    dist = dist.max(if yr < lo {
                        lo - yr
                    } else if yr > hi {
                        yr - hi
                    } else {
                        0.0
                    });
                }
                best = best.min(dist);
            }
            if exact {
                assert!(best < 1e-9);
            } else {
                assert!(best > 1e-3, "grid got within {best}");
            }
        }
    }

    #[test]
    fn interval_set_algebra() {
        let a = IntervalSet::from_spans(vec![(0.0, 2.0), (5.0, 6.0)]);
        let b = IntervalSet::from_spans(vec![(1.0, 5.5)]);
        assert_eq!(
            a.intersect(&b),
            IntervalSet::from_spans(vec![(1.0, 2.0), (5.0, 5.5)])
        );
        assert!(a.intersect(&IntervalSet::empty()).is_empty());
        assert_eq!(a.intersect(&IntervalSet::all()), a);
    }
}
