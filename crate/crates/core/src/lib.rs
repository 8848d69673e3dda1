//! Feature and clutter detection for point patterns on linear networks.
//!
//! K-th nearest-neighbour disc volumes measured with shortest-path distances
//! are modelled as a two-component Gamma mixture. EM estimates the component
//! rates, points are labelled by the component with the higher density, and
//! K can be chosen automatically from the changepoint of the entropy curve.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod geodesics;
pub mod io;
pub mod kselect;
pub mod mixture;
pub mod network;
pub mod pipeline;
pub mod plot;
pub mod simulation;
pub mod synthetic;

pub use error::{Error, Result};
pub use geodesics::{circumradius, insert_points, knn_volumes, AugmentedGraph, PointProfile, VolumeSample};
pub use kselect::{entropy_curve, fit_segmented, select_k, EntropyCurve, KPolicy, KSelection, SegmentedFit};
pub use mixture::{
    classify, em_fit, entropy, gamma_pdf, mle_rate, Classification, EmInit, EmOptions, Label, MixtureFit,
};
pub use network::{build_network, extract_subnetwork, LinearNetwork, NetPoint, SubNetwork};
pub use simulation::{confusion, rpoislpp, run_design, superpose, Design, LabelledPattern, RatesReport};
