//! Sound weight-set abstractions of feedforward neural networks.
//!
//! This crate compresses a concrete network by merging groups of neurons and
//! replacing each weight matrix with an element of an abstract domain
//! (interval hulls, octagon hulls, or explicit finite sets) that covers every
//! way of redistributing the merged weights. The resulting abstract network
//! maps an input to the *set* of outputs of all its instantiations.
//!
//! The main entry points:
//!
//! - [`abstraction::abstract_dnn`] builds the abstract network from a
//!   concrete one and a layer-wise partitioning.
//! - [`soundness::witness_instantiation`] certifies pointwise soundness by
//!   constructing an instantiation that reproduces the concrete output.
//! - [`transform::shift_dnn`] rewrites networks with negative hidden values
//!   into equivalent ones the witness construction accepts.
//! - [`analysis::interval_forward`] bounds all outputs over an input box.
//!
//! ```
//! use annkit::abstraction::{abstract_dnn, AbstractionOptions, LayerwisePartitioning, Partitioning};
//! use annkit::domains::DomainKind;
//! use annkit::model::{Activation, Dnn, DnnLayer, Matrix};
//! use annkit::soundness::witness_instantiation;
//!
//! // 1 -> 2 -> 3 ReLU network with the two hidden neurons merged.
//! let net = Dnn::new(vec![
//!     DnnLayer {
//!         weights: Matrix::new(2, 1, vec![1.0, -1.0]).unwrap(),
//!         activation: Activation::ReLU,
//!     },
//!     DnnLayer {
//!         weights: Matrix::new(3, 2, vec![1.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap(),
//!         activation: Activation::Identity,
//!     },
//! ]).unwrap();
//! let parts = LayerwisePartitioning::new(vec![
//!     Partitioning::singletons(1),
//!     Partitioning::new(2, vec![vec![0, 1]]).unwrap(),
//!     Partitioning::singletons(3),
//! ]).unwrap();
//!
//! let ann = abstract_dnn(
//!     &net,
//!     &parts,
//!     &[DomainKind::Interval, DomainKind::Interval],
//!     &AbstractionOptions::default(),
//! ).unwrap();
//!
//! // Certify that the concrete output at x = 1 is reachable in the
//! // abstraction: the witness instantiates the merged weights to 0.5 and
//! // (2, 2, 0).
//! let w = witness_instantiation(&net, &ann, &parts, &[1.0], false).unwrap();
//! assert_eq!(w.output, vec![1.0, 1.0, 0.0]);
//! ```

pub mod abstraction;
pub mod analysis;
pub mod domains;
pub mod error;
pub mod golden;
pub mod io;
pub mod model;
pub mod soundness;
pub mod transform;

pub use abstraction::{abstract_dnn, AbstractionOptions, LayerwisePartitioning, Partitioning};
pub use analysis::{interval_forward, reduction_report, OutputBox};
pub use domains::{AbstractWeight, Ann, AnnLayer, DomainKind};
pub use error::{Error, Result};
pub use model::{Activation, Dnn, DnnLayer, Matrix};
pub use soundness::{
    exact_membership_small, mean_rep, rep_box, witness_instantiation, Region, Witness,
};
pub use transform::{lower_bound_activations, shift_dnn, ShiftReport};

// Compile and run the guide's code snippets as doc-tests so the book stays in
// sync with the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(networks, "../../../book/src/networks.md");
    chapter!(abstraction, "../../../book/src/abstraction.md");
    chapter!(witnesses, "../../../book/src/witnesses.md");
    chapter!(shift, "../../../book/src/shift.md");
    chapter!(bounds, "../../../book/src/bounds.md");
    chapter!(cli, "../../../book/src/cli.md");
    chapter!(formats, "../../../book/src/formats.md");
}
