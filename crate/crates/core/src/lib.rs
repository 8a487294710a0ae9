//! Smooth nonnegative tensor factorization of multi-site daily load curves.
//!
//! Daily curves `X_{j,n}(u)` of site `n` on day `j` are modelled as
//! `Σ_r a_r(u) b_r(T_{j,n}) c_{n,r}^{(ε_{j,n})}` with a 24-hour periodic
//! smooth signature `a_r`, a smooth thermal activation `b_r` of the day's
//! temperature and a site activation per consumption regime. Smoothness is
//! imposed through curvature penalties on cubic splines, which reduces the
//! fit to a weighted nonnegative tensor factorization solved by Fast HALS.
//!
//! The pipeline is:
//! [`panel::normalize_by_daily_mean`] → [`panel::build_temperature_grid`] →
//! [`panel::assemble_tensors`] → [`solver::fit`] →
//! [`features::site_features`] → [`features::kmeans`].

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod features;
pub mod linalg;
pub mod panel;
pub mod panelio;
pub mod scalar;
pub mod solver;
pub mod splinequad;
pub mod synthgen;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor3F64 = tensor::Tensor3<f64>;
pub type Tensor3F32 = tensor::Tensor3<f32>;
pub type SplineSystemF64 = splinequad::SplineSystem<f64>;
pub type SplineSystemF32 = splinequad::SplineSystem<f32>;
pub type LoadPanelF64 = panel::LoadPanel<f64>;
pub type LoadPanelF32 = panel::LoadPanel<f32>;
pub type WeightedTensorPairF64 = panel::WeightedTensorPair<f64>;
pub type WeightedTensorPairF32 = panel::WeightedTensorPair<f32>;
pub type FactorSetF64 = solver::FactorSet<f64>;
pub type FactorSetF32 = solver::FactorSet<f32>;
pub type SolverConfigF64 = solver::SolverConfig<f64>;
pub type SolverConfigF32 = solver::SolverConfig<f32>;
pub type FitReportF64 = solver::FitReport<f64>;
pub type FitReportF32 = solver::FitReport<f32>;
