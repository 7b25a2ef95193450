//! Shift transform: rewrites a network with possibly-negative hidden values
//! into an equivalent one whose hidden activations are non-negative, so the
//! witness construction applies. Hidden values are shifted up by a global
//! constant carried through an extra always-positive dimension.

use crate::error::{Error, Result};
use crate::model::{Activation, Dnn, DnnLayer, Matrix};
use crate::soundness::Region;
use serde::{Deserialize, Serialize};

/// Summary of a shift transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftReport {
    /// Shift constant |C| applied to every hidden dimension.
    pub shift: f64,
    /// Per-hidden-layer carry constants k_i with shifted(k_i) = 1.
    pub carries: Vec<f64>,
    /// Layer sizes of the transformed network.
    pub layer_sizes: Vec<usize>,
}

/// A lower bound on every activation output reachable from `region`,
/// clamped to at most 0 (shifting by a positive amount is never needed).
/// Uses interval propagation through the layers; if a pre-activation
/// interval is unbounded the activation itself must be bounded below,
/// otherwise the bound does not exist.
pub fn lower_bound_activations(n: &Dnn, region: &Region) -> Result<f64> {
    if region.dim() != n.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: n.input_dim(),
            actual: region.dim(),
        });
    }
    let mut lo = region.lo.clone();
    let mut hi = region.hi.clone();
    let mut bound: f64 = 0.0;
    for (idx, layer) in n.layers().iter().enumerate() {
        let w = &layer.weights;
        let mut zlo = vec![0.0; w.rows()];
        let mut zhi = vec![0.0; w.rows()];
        for r in 0..w.rows() {
            for c in 0..w.cols() {
                let coef = w.get(r, c);
                let (a, b) = (coef * lo[c], coef * hi[c]);
                zlo[r] += a.min(b);
                zhi[r] += a.max(b);
            }
        }
        let a = &layer.activation;
        let mut post_lo = Vec::with_capacity(w.rows());
        let mut post_hi = Vec::with_capacity(w.rows());
        for r in 0..w.rows() {
            let (l, h) = if zlo[r].is_finite() && zhi[r].is_finite() {
                activation_range(a, zlo[r], zhi[r])
            } else {
                match a.lower_bound() {
                    Some(lb) => (lb, activation_sup(a)),
                    None => {
                        return Err(Error::UnboundedActivation(format!(
                            "layer {idx} node {r}: unbounded pre-activation and {} has no lower bound",
                            a.kind_name()
                        )))
                    }
                }
            };
            bound = bound.min(l);
            post_lo.push(l);
            post_hi.push(h);
        }
        lo = post_lo;
        hi = post_hi;
    }
    Ok(bound)
}

/// Conservative output range of an activation over `[zlo, zhi]`. Monotone
/// kinds use the endpoints; the remaining kinds enumerate their pieces.
fn activation_range(a: &Activation, zlo: f64, zhi: f64) -> (f64, f64) {
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
            // Non-monotone: extremes at the endpoints or at zero.
            let mut candidates = vec![a.eval(zlo), a.eval(zhi)];
            if zlo < 0.0 && zhi > 0.0 {
                candidates.push(0.0);
            }
            let lo = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = candidates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
        _ => {
            let (a0, a1) = (a.eval(zlo), a.eval(zhi));
            (a0.min(a1), a0.max(a1))
        }
    }
}

/// Upper bound of an activation's range, `+inf` when unbounded.
fn activation_sup(a: &Activation) -> f64 {
    match a {
        Activation::Tanh => 1.0,
        Activation::Shifted { base, shift } => (activation_sup(base) + shift).max(0.0),
        _ => f64::INFINITY,
    }
}

const CARRY_SEARCH: f64 = 1e6;
const CARRY_TOL: f64 = 1e-12;

/// Solves shifted(k) = 1 for the carry constant by bisection. The shifted
/// activation max(a(x) + shift, 0) is monotone non-decreasing for monotone a.
fn solve_carry(layer: usize, base: &Activation, shift: f64) -> Result<f64> {
    let f = |x: f64| (base.eval(x) + shift).max(0.0);
    let (mut lo, mut hi) = (-CARRY_SEARCH, CARRY_SEARCH);
    if f(lo) > 1.0 || f(hi) < 1.0 {
        return Err(Error::CarryUnsolvable(layer));
    }
    // Endpoints of the interval may already be exact solutions.
    for x in [lo, hi] {
        if f(x) == 1.0 {
            return Ok(x);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let y = f(mid);
        if y == 1.0 || hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
            return Ok(mid);
        }
        if y < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (f(mid) - 1.0).abs() <= CARRY_TOL {
        Ok(mid)
    } else {
        Err(Error::CarryUnsolvable(layer))
    }
}

/// Rewrites `n` so every hidden activation output is non-negative while the
/// final output is unchanged. Inputs to the new network are the original
/// inputs with a trailing constant 1. Each hidden layer gains a carry
/// dimension (appended last) holding exactly 1 after activation; hidden
/// activations become max(a(x) + shift, 0) and the carry column of the next
/// layer subtracts the accumulated shift again. The output layer keeps its
/// original activation.
///
/// `shift` must be non-negative; pass the value from
/// [`lower_bound_activations`] negated, or any larger constant.
pub fn shift_dnn(n: &Dnn, shift: f64) -> Result<(Dnn, ShiftReport)> {
    if !shift.is_finite() || shift < 0.0 {
        return Err(Error::InvalidBound(shift));
    }
    if n.num_layers() < 1 {
        return Err(Error::InvalidModel("network has no layers".into()));
    }
    for (i, layer) in n.layers().iter().enumerate().take(n.num_layers() - 1) {
        if !layer.activation.is_monotone() {
            return Err(Error::NonMonotoneActivation(format!(
                "layer {i} activation {}",
                layer.activation.kind_name()
            )));
        }
    }

    let last = n.num_layers() - 1;
    let mut layers = Vec::with_capacity(n.num_layers());
    let mut carries = Vec::new();
    for (i, layer) in n.layers().iter().enumerate() {
        let w = &layer.weights;
        let is_last = i == last;
        let out_rows = if is_last { w.rows() } else { w.rows() + 1 };
        let mut new_w = Matrix::zeros(out_rows, w.cols() + 1);
        for r in 0..w.rows() {
            for c in 0..w.cols() {
                new_w.set(r, c, w.get(r, c));
            }
            // Entering values are shifted up by `shift` (the input's trailing
            // 1 is not); the carry column cancels the accumulated excess.
            let excess = if i == 0 {
                0.0
            } else {
                shift * w.rows_iter().nth(r).unwrap().iter().sum::<f64>()
            };
            new_w.set(r, w.cols(), -excess);
        }
        if is_last {
            layers.push(DnnLayer {
                weights: new_w,
                activation: layer.activation.clone(),
            });
        } else {
            let shifted = Activation::Shifted {
                base: Box::new(layer.activation.clone()),
                shift,
            };
            let k = solve_carry(i, &layer.activation, shift)?;
            new_w.set(w.rows(), w.cols(), k);
            carries.push(k);
            layers.push(DnnLayer {
                weights: new_w,
                activation: shifted,
            });
        }
    }
    let out = Dnn::new(layers)?;
    let report = ShiftReport {
        shift,
        carries,
        layer_sizes: out.layer_sizes(),
    };
    Ok((out, report))
}

/// Appends the constant 1 expected by a shifted network's input.
pub fn augment_input(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    out.push(1.0);
    out
}
