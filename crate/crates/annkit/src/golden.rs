//! Golden regression suite: every worked example the library is expected to
//! reproduce, checked against hard-coded expected values. The CLI exposes it
//! as `paper-examples`; the acceptance tests run it directly.

use crate::abstraction::{
    abstract_dnn, binary_mergings, merge, scale_cols, AbstractionOptions, LayerwisePartitioning,
    Partitioning,
};
use crate::analysis::interval_forward;
use crate::domains::{
    AbstractWeight, Ann, AnnLayer, DomainKind, IntervalMatrix, OctagonMatrix, PairBounds,
};
use crate::model::{Activation, Dnn, DnnLayer, Matrix};
use crate::soundness::{
    build_nonneg_counterexample, build_wivp_counterexample, exact_membership_small, mean_rep,
    refutes_membership, rep_box, witness_instantiation, Region,
};
use crate::transform::{augment_input, shift_dnn};

/// One regression case; `run` gets the comparison tolerance and returns a
/// diagnostic on failure.
pub struct GoldenCase {
    pub id: &'static str,
    pub run: fn(f64) -> Result<(), String>,
}

/// Comparison tolerance used by the CLI and acceptance suite.
pub const GOLDEN_TOL: f64 = 1e-9;

pub fn cases() -> Vec<GoldenCase> {
    vec![
        GoldenCase {
            id: "relu-merged-net-eval",
            run: relu_merged_net_eval,
        },
        GoldenCase {
            id: "lrelu-merged-net-eval",
            run: lrelu_merged_net_eval,
        },
        GoldenCase {
            id: "interval-net-output-range",
            run: interval_net_output_range,
        },
        GoldenCase {
            id: "octagon-instantiation-membership",
            run: octagon_instantiation_membership,
        },
        GoldenCase {
            id: "merged-abstraction-hulls",
            run: merged_abstraction_hulls,
        },
        GoldenCase {
            id: "pcm-merge-and-scale",
            run: pcm_merge_and_scale,
        },
        GoldenCase {
            id: "binary-mergings-convex-combination",
            run: binary_mergings_convex_combination,
        },
        GoldenCase {
            id: "mean-representative-and-box",
            run: mean_representative_and_box,
        },
        GoldenCase {
            id: "relu-witness-instantiations",
            run: relu_witness_instantiations,
        },
        GoldenCase {
            id: "lrelu-mixed-sign-nonmember",
            run: lrelu_mixed_sign_nonmember,
        },
        GoldenCase {
            id: "thresh-gap-nonmember",
            run: thresh_gap_nonmember,
        },
        GoldenCase {
            id: "powerset-binary-alpha-nonmember",
            run: powerset_binary_alpha_nonmember,
        },
        GoldenCase {
            id: "mixed-sign-counterexample-construction",
            run: mixed_sign_counterexample_construction,
        },
        GoldenCase {
            id: "wivp-counterexample-construction",
            run: wivp_counterexample_construction,
        },
        GoldenCase {
            id: "shifted-lrelu-net-eval",
            run: shifted_lrelu_net_eval,
        },
    ]
}

/// Runs every case whose id contains `only` (all when `None`); returns
/// `(id, result)` pairs in declaration order.
pub fn run_cases(tol: f64, only: Option<&str>) -> Vec<(&'static str, Result<(), String>)> {
    cases()
        .into_iter()
        .filter(|c| only.map_or(true, |f| c.id.contains(f)))
        .map(|c| (c.id, (c.run)(tol)))
        .collect()
}

// -- helpers ----------------------------------------------------------------

fn mat(rows: usize, cols: usize, entries: &[f64]) -> Matrix {
    Matrix::new(rows, cols, entries.to_vec()).unwrap()
}

/// The running example: 1 -> 2 -> 3 network with weights [1; -1] and
/// [[1,1],[1,0],[0,1]], identity output activation.
fn merged_net(hidden: Activation) -> (Dnn, LayerwisePartitioning) {
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

fn expect_vec(actual: &[f64], expected: &[f64], tol: f64, what: &str) -> Result<(), String> {
    if actual.len() != expected.len()
        || actual
            .iter()
            .zip(expected)
            .any(|(a, b)| (a - b).abs() > tol)
    {
        return Err(format!("{what}: expected {expected:?}, got {actual:?}"));
    }
    Ok(())
}

fn expect_mat(actual: &Matrix, expected: &Matrix, tol: f64, what: &str) -> Result<(), String> {
    if actual.rows() != expected.rows()
        || actual.cols() != expected.cols()
        || actual.max_abs_diff(expected) > tol
    {
        return Err(format!("{what}: expected {expected:?}, got {actual:?}"));
    }
    Ok(())
}

fn interval_ann(n: &Dnn, lp: &LayerwisePartitioning) -> Result<Ann, String> {
    abstract_dnn(
        n,
        lp,
        &vec![DomainKind::Interval; n.num_layers()],
        &AbstractionOptions::default(),
    )
    .map_err(|e| e.to_string())
}

// -- cases ------------------------------------------------------------------

fn relu_merged_net_eval(tol: f64) -> Result<(), String> {
    let (n, _) = merged_net(Activation::ReLU);
    expect_vec(
        &n.eval(&[1.0]).map_err(|e| e.to_string())?,
        &[1.0, 1.0, 0.0],
        tol,
        "relu net at 1",
    )
}

fn lrelu_merged_net_eval(tol: f64) -> Result<(), String> {
    let (n, _) = merged_net(Activation::LReLU(0.5));
    expect_vec(
        &n.eval(&[1.0]).map_err(|e| e.to_string())?,
        &[0.5, 1.0, -0.5],
        tol,
        "lrelu net at 1",
    )
}

fn interval_net_output_range(tol: f64) -> Result<(), String> {
    // Two-layer interval network; the output set at (1,1) is exactly [0, 3].
    let ann = Ann::new(vec![
        AnnLayer {
            weight: AbstractWeight::Interval(
                IntervalMatrix::new(
                    2,
                    2,
                    vec![-1.0, 0.0, -3.0, 1.0],
                    vec![1.0, 2.0, -2.0, 2.0],
                )
                .map_err(|e| e.to_string())?,
            ),
            activation: Activation::ReLU,
        },
        AnnLayer {
            weight: AbstractWeight::Interval(
                IntervalMatrix::new(1, 2, vec![0.0, 0.0], vec![1.0, 1.0])
                    .map_err(|e| e.to_string())?,
            ),
            activation: Activation::Identity,
        },
    ])
    .map_err(|e| e.to_string())?;
    let out = interval_forward(&ann, &Region::point(&[1.0, 1.0])).map_err(|e| e.to_string())?;
    expect_vec(&out.lo, &[0.0], tol, "output range lower end")?;
    expect_vec(&out.hi, &[3.0], tol, "output range upper end")?;
    // the instantiation with rows (0, 2), (-2.5, 1.5) and outer (0.5, 1)
    // evaluates to 1, inside the range
    let g = Dnn::new(vec![
        DnnLayer {
            weights: mat(2, 2, &[0.0, 2.0, -2.5, 1.5]),
            activation: Activation::ReLU,
        },
        DnnLayer {
            weights: mat(1, 2, &[0.5, 1.0]),
            activation: Activation::Identity,
        },
    ])
    .map_err(|e| e.to_string())?;
    let y = g.eval(&[1.0, 1.0]).map_err(|e| e.to_string())?;
    expect_vec(&y, &[1.0], tol, "instantiation output")?;
    if !out.contains(&y, tol) {
        return Err("instantiation output escaped the range".into());
    }
    Ok(())
}

fn octagon_instantiation_membership(tol: f64) -> Result<(), String> {
    // Hidden octagon: a - b <= 1, -a + b <= 1, a + b <= 2, -a - b <= 2.
    let inf = f64::INFINITY;
    let o1 = OctagonMatrix::from_constraints(
        2,
        1,
        vec![inf, inf],
        vec![inf, inf],
        vec![PairBounds {
            pp: 2.0,
            mm: 2.0,
            pm: 1.0,
            mp: 1.0,
        }],
    )
    .map_err(|e| e.to_string())?;
    // Output octagon: a - b <= 2, -a + b <= 3, a + b <= 4, -a - b <= 5.
    let o2 = OctagonMatrix::from_constraints(
        1,
        2,
        vec![inf, inf],
        vec![inf, inf],
        vec![PairBounds {
            pp: 4.0,
            mm: 5.0,
            pm: 2.0,
            mp: 3.0,
        }],
    )
    .map_err(|e| e.to_string())?;
    let inner = mat(2, 1, &[0.5, 1.5]);
    let outer = mat(1, 2, &[3.0, 1.0]);
    if !o1.contains(&inner, tol).map_err(|e| e.to_string())? {
        return Err("inner instantiation (0.5, 1.5) not in the hidden octagon".into());
    }
    if !o2.contains(&outer, tol).map_err(|e| e.to_string())? {
        return Err("outer instantiation (3, 1) not in the output octagon".into());
    }
    let g = Dnn::new(vec![
        DnnLayer {
            weights: inner,
            activation: Activation::ReLU,
        },
        DnnLayer {
            weights: outer,
            activation: Activation::Identity,
        },
    ])
    .map_err(|e| e.to_string())?;
    expect_vec(
        &g.eval(&[1.0]).map_err(|e| e.to_string())?,
        &[3.0],
        tol,
        "octagon instantiation at 1",
    )
}

fn merged_abstraction_hulls(tol: f64) -> Result<(), String> {
    // The merged ReLU net abstracts to hidden hull [-1, 1] and output hull
    // rows [2,2], [0,2], [0,2] (the hull of (2,2,0) and (2,0,2)).
    let (n, lp) = merged_net(Activation::ReLU);
    let ann = interval_ann(&n, &lp)?;
    let h1 = ann.layers()[0].weight.interval_hull();
    if (h1.lo(0, 0), h1.hi(0, 0)) != (-1.0, 1.0) {
        return Err(format!(
            "hidden hull: expected [-1, 1], got [{}, {}]",
            h1.lo(0, 0),
            h1.hi(0, 0)
        ));
    }
    let h2 = ann.layers()[1].weight.interval_hull();
    let expected = [(2.0, 2.0), (0.0, 2.0), (0.0, 2.0)];
    for (r, &(lo, hi)) in expected.iter().enumerate() {
        if (h2.lo(r, 0) - lo).abs() > tol || (h2.hi(r, 0) - hi).abs() > tol {
            return Err(format!(
                "output hull row {r}: expected [{lo}, {hi}], got [{}, {}]",
                h2.lo(r, 0),
                h2.hi(r, 0)
            ));
        }
    }
    Ok(())
}

fn pcm_merge_and_scale(tol: f64) -> Result<(), String> {
    // 4x3 matrix with a fixed numeric assignment; merged and scaled results
    // checked against the closed-form entries.
    let m_at = |i: usize, j: usize| (i as f64 + 1.0) + (j as f64 + 1.0) / 10.0;
    let entries: Vec<f64> = (0..4)
        .flat_map(|i| (0..3).map(move |j| m_at(i, j)))
        .collect();
    let m = mat(4, 3, &entries);
    let c = mat(3, 2, &[0.25, 0.0, 0.0, 1.0, 0.75, 0.0]);
    let d = mat(4, 2, &[0.0, 0.99, 0.4, 0.0, 0.0, 0.01, 0.6, 0.0]);
    let merged = merge(&m, &c, &d).map_err(|e| e.to_string())?;
    let col0 = |i: usize| 0.25 * m_at(i, 0) + 0.75 * m_at(i, 2);
    let expected = mat(
        2,
        2,
        &[
            0.4 * col0(1) + 0.6 * col0(3),
            0.4 * m_at(1, 1) + 0.6 * m_at(3, 1),
            0.99 * col0(0) + 0.01 * col0(2),
            0.99 * m_at(0, 1) + 0.01 * m_at(2, 1),
        ],
    );
    expect_mat(&merged, &expected, tol, "column-row-merged matrix")?;
    let scaled = scale_cols(&merged, &[2.0, 2.0]).map_err(|e| e.to_string())?;
    let expected_scaled = mat(
        2,
        2,
        &[
            0.8 * col0(1) + 1.2 * col0(3),
            0.8 * m_at(1, 1) + 1.2 * m_at(3, 1),
            1.98 * col0(0) + 0.02 * col0(2),
            1.98 * m_at(0, 1) + 0.02 * m_at(2, 1),
        ],
    );
    expect_mat(&scaled, &expected_scaled, tol, "column-scaled merged matrix")
}

fn binary_mergings_convex_combination(tol: f64) -> Result<(), String> {
    let m = mat(3, 3, &[1.0, -2.0, 3.0, 4.0, -5.0, 6.0, 7.0, -8.0, 9.0]);
    let p_in = Partitioning::new(3, vec![vec![0, 1], vec![2]]).map_err(|e| e.to_string())?;
    let p_out = Partitioning::new(3, vec![vec![0, 2], vec![1]]).map_err(|e| e.to_string())?;
    let got = binary_mergings(&m, &p_in, &p_out, 1_000_000).map_err(|e| e.to_string())?;
    let expected = [
        mat(2, 2, &[2.0, 3.0, 8.0, 6.0]),
        mat(2, 2, &[-4.0, 3.0, -10.0, 6.0]),
        mat(2, 2, &[14.0, 9.0, 8.0, 6.0]),
        mat(2, 2, &[-16.0, 9.0, -10.0, 6.0]),
    ];
    if got.len() != 4 {
        return Err(format!("expected 4 binary mergings, got {}", got.len()));
    }
    for e in &expected {
        if !got.iter().any(|g| g.max_abs_diff(e) <= tol) {
            return Err(format!("missing binary merging {e:?}"));
        }
    }

    // The scaled merging of C = [.75 0; .25 0; 0 1], D = [.5 0; 0 1; .5 0]
    // is [[3.5, 6], [3.5, 6]], a convex combination of the four above with
    // coefficients (0.375, 0.125, 0.375, 0.125).
    let c = mat(3, 2, &[0.75, 0.0, 0.25, 0.0, 0.0, 1.0]);
    let d = mat(3, 2, &[0.5, 0.0, 0.0, 1.0, 0.5, 0.0]);
    let scaled = scale_cols(
        &merge(&m, &c, &d).map_err(|e| e.to_string())?,
        &p_in.block_sizes(),
    )
    .map_err(|e| e.to_string())?;
    expect_mat(
        &scaled,
        &mat(2, 2, &[3.5, 6.0, 3.5, 6.0]),
        tol,
        "scaled merging",
    )?;
    let coeffs = [0.375, 0.125, 0.375, 0.125];
    let total: f64 = coeffs.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(format!("coefficients sum to {total}, not 1"));
    }
    let mut combo = Matrix::zeros(2, 2);
    for (k, b) in expected.iter().enumerate() {
        for r in 0..2 {
            for cc in 0..2 {
                combo.set(r, cc, combo.get(r, cc) + coeffs[k] * b.get(r, cc));
            }
        }
    }
    expect_mat(&combo, &scaled, tol, "convex combination")
}

fn mean_representative_and_box(tol: f64) -> Result<(), String> {
    let v = [5.0, 6.0, 11.0, 2.0, 1.0];
    let p = Partitioning::new(5, vec![vec![0, 2], vec![1, 3, 4]]).map_err(|e| e.to_string())?;
    expect_vec(
        &mean_rep(&v, &p).map_err(|e| e.to_string())?,
        &[8.0, 3.0],
        tol,
        "mean representative",
    )?;
    let b = rep_box(&v, &p).map_err(|e| e.to_string())?;
    expect_vec(&b.lo, &[5.0, 1.0], tol, "representative box lower")?;
    expect_vec(&b.hi, &[11.0, 6.0], tol, "representative box upper")
}

fn relu_witness_instantiations(tol: f64) -> Result<(), String> {
    let (n, lp) = merged_net(Activation::ReLU);
    let ann = interval_ann(&n, &lp)?;
    let w = witness_instantiation(&n, &ann, &lp, &[1.0], false).map_err(|e| e.to_string())?;
    expect_mat(&w.layers[0].weight, &mat(1, 1, &[0.5]), tol, "inner weight at 1")?;
    expect_mat(
        &w.layers[1].weight,
        &mat(3, 1, &[2.0, 2.0, 0.0]),
        tol,
        "outer weight at 1",
    )?;
    expect_vec(&w.output, &[1.0, 1.0, 0.0], tol, "witness output at 1")?;
    let w = witness_instantiation(&n, &ann, &lp, &[-1.0], false).map_err(|e| e.to_string())?;
    expect_mat(
        &w.layers[0].weight,
        &mat(1, 1, &[-0.5]),
        tol,
        "inner weight at -1",
    )?;
    expect_mat(
        &w.layers[1].weight,
        &mat(3, 1, &[2.0, 0.0, 2.0]),
        tol,
        "outer weight at -1",
    )
}

fn lrelu_mixed_sign_nonmember(tol: f64) -> Result<(), String> {
    let (n, lp) = merged_net(Activation::LReLU(0.5));
    let ann = interval_ann(&n, &lp)?;
    let y = n.eval(&[1.0]).map_err(|e| e.to_string())?;
    expect_vec(&y, &[0.5, 1.0, -0.5], tol, "lrelu output")?;
    if exact_membership_small(&ann, &[1.0], &y, tol).map_err(|e| e.to_string())? {
        return Err("mixed-sign output was reported as a member".into());
    }
    Ok(())
}

fn thresh_gap_nonmember(tol: f64) -> Result<(), String> {
    let (n, lp) = merged_net(Activation::Thresh { t: 1.0, v: 0.0 });
    let ann = interval_ann(&n, &lp)?;
    let y = n.eval(&[1.0]).map_err(|e| e.to_string())?;
    expect_vec(&y, &[1.0, 1.0, 0.0], tol, "thresh output")?;
    if exact_membership_small(&ann, &[1.0], &y, tol).map_err(|e| e.to_string())? {
        return Err("threshold-gap output was reported as a member".into());
    }
    Ok(())
}

fn powerset_binary_alpha_nonmember(tol: f64) -> Result<(), String> {
    let (n, lp) = merged_net(Activation::ReLU);
    let opts = AbstractionOptions {
        allow_nonconvex: true,
        ..Default::default()
    };
    let ann = abstract_dnn(&n, &lp, &[DomainKind::Powerset, DomainKind::Powerset], &opts)
        .map_err(|e| e.to_string())?;
    let y = n.eval(&[1.0]).map_err(|e| e.to_string())?;
    if exact_membership_small(&ann, &[1.0], &y, tol).map_err(|e| e.to_string())? {
        return Err("powerset of binary mergings should miss the true output".into());
    }
    Ok(())
}

fn mixed_sign_counterexample_construction(tol: f64) -> Result<(), String> {
    for (a, x, y) in [
        (Activation::LReLU(0.5), -1.0, 1.0),
        (Activation::Tanh, -1.0, 1.0),
    ] {
        let (n, lp) = build_nonneg_counterexample(&a, x, y).map_err(|e| e.to_string())?;
        let ann = interval_ann(&n, &lp)?;
        // inner hull [x, y], outer hull [0, 2] per row
        let h = ann.layers()[1].weight.interval_hull();
        for r in 0..2 {
            if (h.lo(r, 0) - 0.0).abs() > tol || (h.hi(r, 0) - 2.0).abs() > tol {
                return Err(format!(
                    "outer hull row {r}: expected [0, 2], got [{}, {}]",
                    h.lo(r, 0),
                    h.hi(r, 0)
                ));
            }
        }
        if !refutes_membership(&n, &lp, &[1.0]).map_err(|e| e.to_string())? {
            return Err(format!(
                "constructed mixed-sign network for {} was not refuted",
                a.kind_name()
            ));
        }
    }
    Ok(())
}

fn wivp_counterexample_construction(tol: f64) -> Result<(), String> {
    let a = Activation::Thresh { t: 1.0, v: 0.0 };
    let (n, lp) = build_wivp_counterexample(&a, &[0.0, 1.0]).map_err(|e| e.to_string())?;
    let y = n.eval(&[1.0]).map_err(|e| e.to_string())?;
    expect_vec(&y, &[1.0], tol, "counterexample output")?;
    // outer weight is [k, k] with k = 2 merged nodes
    let ann = interval_ann(&n, &lp)?;
    let h = ann.layers()[1].weight.interval_hull();
    if (h.lo(0, 0) - 2.0).abs() > tol || (h.hi(0, 0) - 2.0).abs() > tol {
        return Err(format!(
            "outer hull: expected [2, 2], got [{}, {}]",
            h.lo(0, 0),
            h.hi(0, 0)
        ));
    }
    if !refutes_membership(&n, &lp, &[1.0]).map_err(|e| e.to_string())? {
        return Err("constructed gap network was not refuted".into());
    }
    Ok(())
}

fn shifted_lrelu_net_eval(tol: f64) -> Result<(), String> {
    let (n, _) = merged_net(Activation::LReLU(0.5));
    let (s, report) = shift_dnn(&n, 0.5).map_err(|e| e.to_string())?;
    if report.carries.len() != 1 || (report.carries[0] - 0.5).abs() > tol {
        return Err(format!("expected carry 0.5, got {:?}", report.carries));
    }
    expect_mat(
        &s.layers()[0].weights,
        &mat(3, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 0.5]),
        tol,
        "shifted inner weights",
    )?;
    expect_mat(
        &s.layers()[1].weights,
        &mat(3, 3, &[1.0, 1.0, -1.0, 1.0, 0.0, -0.5, 0.0, 1.0, -0.5]),
        tol,
        "shifted outer weights",
    )?;
    let out = s
        .eval(&augment_input(&[-1.0]))
        .map_err(|e| e.to_string())?;
    expect_vec(&out, &[0.5, -0.5, 1.0], tol, "shifted net at -1")
}
