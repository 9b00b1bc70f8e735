//! Maximum-likelihood fitting of map components.
//!
//! Each component `S^k` minimizes the empirical objective
//! `(1/N) Σ_i ½ S^k(zⁱ)² − log ∂_k S^k(zⁱ)` independently of the others.

mod cv;
mod fit;
mod objective;
pub mod optim;

pub use cv::{held_out_score, select_degree_cv, CvSelection};
pub use fit::{
    fit_component, fit_triangular_map, fit_triangular_map_with, DegreeScore, FitOptions, FitReport, MapFitReport,
};
pub use objective::{empirical_objective, observed_fisher};
