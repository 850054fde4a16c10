//! Bayesian estimation and prediction for nonhomogeneous Poisson processes
//! with kernel-mixture intensities and a shrinkage prior family.
//!
//! See the guide under `book/` for a tour.

pub mod error;
pub mod grid;
pub mod intensity;
pub mod kernels;
pub mod pattern;
pub mod posterior;
pub mod predict;
pub mod prior;
pub mod quadrature;
pub mod risk;
pub mod simulate;
pub mod window;

pub use error::{Error, Result};
pub use intensity::IntensityModel;
pub use kernels::{Atom, KernelSpec};
pub use pattern::PointPattern;
pub use posterior::{ClusterState, McmcConfig, PosteriorSummary};
pub use prior::{BaseMeasure, Beta, PriorSpec};
pub use simulate::RngStream;
pub use window::Window;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/intensities.md")]
    mod intensities {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/priors.md")]
    mod priors {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/prediction.md")]
    mod prediction {}
    #[doc = include_str!("../../../book/src/risk.md")]
    mod risk {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
