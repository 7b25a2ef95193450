//! Weight-set abstract domains: interval hulls, octagon hulls over flattened
//! matrix entries, and explicit finite sets (the powerset domain). Only the
//! (alpha over finite sets, gamma membership) pair is implemented; the
//! abstraction algorithm needs nothing more.

use crate::error::{Error, Result};
use crate::model::{Activation, Matrix};
use serde::{Deserialize, Serialize};

/// Which weight-set domain an abstraction should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    Interval,
    Octagon,
    /// Explicit finite sets; alpha is the identity. Not convex.
    Powerset,
}

impl DomainKind {
    pub fn is_convex(self) -> bool {
        !matches!(self, DomainKind::Powerset)
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Interval => "interval",
            DomainKind::Octagon => "octagon",
            DomainKind::Powerset => "powerset",
        }
    }
}

fn check_uniform_shapes(ms: &[Matrix]) -> Result<(usize, usize)> {
    let first = ms.first().ok_or(Error::EmptySet)?;
    let shape = (first.rows(), first.cols());
    for m in ms {
        if (m.rows(), m.cols()) != shape {
            return Err(Error::ShapeMismatch(format!(
                "expected {}x{}, got {}x{}",
                shape.0,
                shape.1,
                m.rows(),
                m.cols()
            )));
        }
    }
    Ok(shape)
}

/// Component-wise interval hull of a set of matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMatrix {
    rows: usize,
    cols: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl IntervalMatrix {
    pub fn new(rows: usize, cols: usize, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != rows * cols || hi.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "interval matrix {rows}x{cols} needs {} bounds",
                rows * cols
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidModel(
                "interval bounds must be finite with lo <= hi".into(),
            ));
        }
        Ok(IntervalMatrix { rows, cols, lo, hi })
    }

    /// Interval hull of a non-empty set of same-shaped matrices.
    pub fn alpha(ms: &[Matrix]) -> Result<Self> {
        let (rows, cols) = check_uniform_shapes(ms)?;
        let n = rows * cols;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for m in ms {
            for (i, &e) in m.entries().iter().enumerate() {
                lo[i] = lo[i].min(e);
                hi[i] = hi[i].max(e);
            }
        }
        IntervalMatrix::new(rows, cols, lo, hi)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lo(&self, r: usize, c: usize) -> f64 {
        self.lo[r * self.cols + c]
    }

    pub fn hi(&self, r: usize, c: usize) -> f64 {
        self.hi[r * self.cols + c]
    }

    /// True iff every entry of `m` lies in the closed interval widened by `eps`.
    pub fn contains(&self, m: &Matrix, eps: f64) -> Result<bool> {
        if (m.rows(), m.cols()) != (self.rows, self.cols) {
            return Err(Error::ShapeMismatch(format!(
                "expected {}x{}, got {}x{}",
                self.rows,
                self.cols,
                m.rows(),
                m.cols()
            )));
        }
        Ok(m.entries()
            .iter()
            .enumerate()
            .all(|(i, &e)| e >= self.lo[i] - eps && e <= self.hi[i] + eps))
    }

    /// A member of gamma with each entry drawn independently from its interval.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Matrix {
        let entries = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if l == h { l } else { rng.gen_range(l..=h) })
            .collect();
        Matrix::new(self.rows, self.cols, entries).expect("bounds are finite")
    }
}

/// Upper bounds on the four pairwise forms of coordinates `p < q`:
/// `x_p + x_q <= pp`, `-x_p - x_q <= mm`, `x_p - x_q <= pm`, `-x_p + x_q <= mp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBounds {
    pub pp: f64,
    pub mm: f64,
    pub pm: f64,
    pub mp: f64,
}

/// Octagon over the flattened entries `x_1..x_dim` of a matrix, with unary
/// bounds `x_p <= plus[p]`, `-x_p <= minus[p]` and pairwise bounds for each
/// `p < q`. Bounds may be `+inf` (absent constraint). The interval hull is
/// cached at construction so later relaxation needs no LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OctagonMatrix {
    rows: usize,
    cols: usize,
    plus: Vec<f64>,
    minus: Vec<f64>,
    /// Row-major over pairs (p, q) with p < q.
    pairs: Vec<PairBounds>,
    hull_lo: Vec<f64>,
    hull_hi: Vec<f64>,
}

fn pair_index(dim: usize, p: usize, q: usize) -> usize {
    debug_assert!(p < q && q < dim);
    // offset of row p in the strictly-upper-triangular enumeration
    p * dim - p * (p + 1) / 2 + (q - p - 1)
}

impl OctagonMatrix {
    /// Octagon hull of a non-empty set of same-shaped matrices: each stored
    /// bound is the maximum of its linear form over the set.
    pub fn alpha(ms: &[Matrix]) -> Result<Self> {
        let (rows, cols) = check_uniform_shapes(ms)?;
        let dim = rows * cols;
        let mut plus = vec![f64::NEG_INFINITY; dim];
        let mut minus = vec![f64::NEG_INFINITY; dim];
        let mut pairs = vec![
            PairBounds {
                pp: f64::NEG_INFINITY,
                mm: f64::NEG_INFINITY,
                pm: f64::NEG_INFINITY,
                mp: f64::NEG_INFINITY,
            };
            dim * (dim - 1) / 2
        ];
        for m in ms {
            let x = m.entries();
            for p in 0..dim {
                plus[p] = plus[p].max(x[p]);
                minus[p] = minus[p].max(-x[p]);
                for q in (p + 1)..dim {
                    let b = &mut pairs[pair_index(dim, p, q)];
                    b.pp = b.pp.max(x[p] + x[q]);
                    b.mm = b.mm.max(-x[p] - x[q]);
                    b.pm = b.pm.max(x[p] - x[q]);
                    b.mp = b.mp.max(-x[p] + x[q]);
                }
            }
        }
        let hull_lo = minus.iter().map(|&m| -m).collect();
        let hull_hi = plus.clone();
        Ok(OctagonMatrix {
            rows,
            cols,
            plus,
            minus,
            pairs,
            hull_lo,
            hull_hi,
        })
    }

    /// Build an octagon from explicit constraint bounds (`+inf` for absent
    /// constraints). The interval hull is tightened from the pairwise bounds
    /// via `x_p <= ((x_p + x_q) + (x_p - x_q)) / 2` and its dual.
    pub fn from_constraints(
        rows: usize,
        cols: usize,
        plus: Vec<f64>,
        minus: Vec<f64>,
        pairs: Vec<PairBounds>,
    ) -> Result<Self> {
        let dim = rows * cols;
        if plus.len() != dim || minus.len() != dim || pairs.len() != dim * (dim - 1) / 2 {
            return Err(Error::ShapeMismatch(
                "octagon constraint vectors have wrong length".into(),
            ));
        }
        let mut hull_hi = plus.clone();
        let mut hull_lo: Vec<f64> = minus.iter().map(|&m| -m).collect();
        for p in 0..dim {
            for q in (p + 1)..dim {
                let b = &pairs[pair_index(dim, p, q)];
                hull_hi[p] = hull_hi[p].min((b.pp + b.pm) / 2.0);
                hull_hi[q] = hull_hi[q].min((b.pp + b.mp) / 2.0);
                hull_lo[p] = hull_lo[p].max(-(b.mm + b.mp) / 2.0);
                hull_lo[q] = hull_lo[q].max(-(b.mm + b.pm) / 2.0);
            }
        }
        Ok(OctagonMatrix {
            rows,
            cols,
            plus,
            minus,
            pairs,
            hull_lo,
            hull_hi,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of stored finite constraints.
    pub fn constraint_count(&self) -> usize {
        let unary = self
            .plus
            .iter()
            .chain(&self.minus)
            .filter(|b| b.is_finite())
            .count();
        let pair = self
            .pairs
            .iter()
            .flat_map(|b| [b.pp, b.mm, b.pm, b.mp])
            .filter(|b| b.is_finite())
            .count();
        unary + pair
    }

    /// Per-coordinate interval hull cached at construction time.
    pub fn hull(&self) -> IntervalMatrix {
        // An unbounded coordinate cannot appear in alpha-generated octagons;
        // clamp defensively for hand-built ones.
        let clamp = |v: f64| {
            if v.is_finite() {
                v
            } else {
                f64::MAX.copysign(v)
            }
        };
        IntervalMatrix::new(
            self.rows,
            self.cols,
            self.hull_lo.iter().map(|&v| clamp(v)).collect(),
            self.hull_hi.iter().map(|&v| clamp(v)).collect(),
        )
        .expect("cached hull is consistent")
    }

    /// True iff the flattened entries of `m` satisfy every stored constraint
    /// with slack `eps`.
    pub fn contains(&self, m: &Matrix, eps: f64) -> Result<bool> {
        if (m.rows(), m.cols()) != (self.rows, self.cols) {
            return Err(Error::ShapeMismatch(format!(
                "expected {}x{}, got {}x{}",
                self.rows,
                self.cols,
                m.rows(),
                m.cols()
            )));
        }
        let x = m.entries();
        let dim = self.dim();
        for p in 0..dim {
            if x[p] > self.plus[p] + eps || -x[p] > self.minus[p] + eps {
                return Ok(false);
            }
            for q in (p + 1)..dim {
                let b = &self.pairs[pair_index(dim, p, q)];
                if x[p] + x[q] > b.pp + eps
                    || -x[p] - x[q] > b.mm + eps
                    || x[p] - x[q] > b.pm + eps
                    || -x[p] + x[q] > b.mp + eps
                {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Explicit non-empty set of same-shaped matrices; alpha is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMatrixSet {
    members: Vec<Matrix>,
}

impl FiniteMatrixSet {
    pub fn alpha(ms: &[Matrix]) -> Result<Self> {
        check_uniform_shapes(ms)?;
        // Deduplicate exact repeats; binary merging loops produce many.
        let mut members: Vec<Matrix> = Vec::new();
        for m in ms {
            if !members.contains(m) {
                members.push(m.clone());
            }
        }
        Ok(FiniteMatrixSet { members })
    }

    pub fn members(&self) -> &[Matrix] {
        &self.members
    }

    pub fn rows(&self) -> usize {
        self.members[0].rows()
    }

    pub fn cols(&self) -> usize {
        self.members[0].cols()
    }

    /// True iff `m` is entry-wise within `eps` of some member.
    pub fn contains(&self, m: &Matrix, eps: f64) -> Result<bool> {
        if (m.rows(), m.cols()) != (self.rows(), self.cols()) {
            return Err(Error::ShapeMismatch(format!(
                "expected {}x{}, got {}x{}",
                self.rows(),
                self.cols(),
                m.rows(),
                m.cols()
            )));
        }
        Ok(self.members.iter().any(|c| c.max_abs_diff(m) <= eps))
    }

    /// Entry-wise min/max over the members.
    pub fn hull(&self) -> IntervalMatrix {
        IntervalMatrix::alpha(&self.members).expect("members are non-empty and uniform")
    }
}

/// Domain-tagged abstract weight element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AbstractWeight {
    Interval(IntervalMatrix),
    Octagon(OctagonMatrix),
    Finite(FiniteMatrixSet),
}

impl AbstractWeight {
    /// Apply the tagged domain's alpha to a finite generating set.
    pub fn alpha(kind: DomainKind, ms: &[Matrix]) -> Result<Self> {
        Ok(match kind {
            DomainKind::Interval => AbstractWeight::Interval(IntervalMatrix::alpha(ms)?),
            DomainKind::Octagon => AbstractWeight::Octagon(OctagonMatrix::alpha(ms)?),
            DomainKind::Powerset => AbstractWeight::Finite(FiniteMatrixSet::alpha(ms)?),
        })
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            AbstractWeight::Interval(_) => DomainKind::Interval,
            AbstractWeight::Octagon(_) => DomainKind::Octagon,
            AbstractWeight::Finite(_) => DomainKind::Powerset,
        }
    }

    pub fn is_convex(&self) -> bool {
        self.kind().is_convex()
    }

    pub fn rows(&self) -> usize {
        match self {
            AbstractWeight::Interval(e) => e.rows(),
            AbstractWeight::Octagon(e) => e.rows(),
            AbstractWeight::Finite(e) => e.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            AbstractWeight::Interval(e) => e.cols(),
            AbstractWeight::Octagon(e) => e.cols(),
            AbstractWeight::Finite(e) => e.cols(),
        }
    }

    /// Gamma membership with slack `eps`.
    pub fn contains(&self, m: &Matrix, eps: f64) -> Result<bool> {
        match self {
            AbstractWeight::Interval(e) => e.contains(m, eps),
            AbstractWeight::Octagon(e) => e.contains(m, eps),
            AbstractWeight::Finite(e) => e.contains(m, eps),
        }
    }

    /// Interval relaxation: identity for intervals, cached hull for octagons,
    /// entry-wise hull for finite sets.
    pub fn interval_hull(&self) -> IntervalMatrix {
        match self {
            AbstractWeight::Interval(e) => e.clone(),
            AbstractWeight::Octagon(e) => e.hull(),
            AbstractWeight::Finite(e) => e.hull(),
        }
    }
}

/// One abstract layer: weight-set element plus the concrete activation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnLayer {
    pub weight: AbstractWeight,
    pub activation: Activation,
}

/// Abstract neural network; its output on an input is the set of outputs of
/// all instantiations (one concrete matrix from each layer's gamma).
#[derive(Debug, Clone, PartialEq)]
pub struct Ann {
    layers: Vec<AnnLayer>,
}

impl Ann {
    pub fn new(layers: Vec<AnnLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[1].weight.cols() != w[0].weight.rows() {
                return Err(Error::ShapeMismatch(
                    "abstract layer dimensions do not chain".into(),
                ));
            }
        }
        Ok(Ann { layers })
    }

    pub fn layers(&self) -> &[AnnLayer] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.rows()
    }
}
