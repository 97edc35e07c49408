//! Core data types shared by every stage of the pipeline.

mod density;
mod draw;
mod quarter;
mod series;
mod view;
mod weights;

pub use density::{flatten_mixture_of_mixtures, Component, ForecastDensity};
pub use draw::{MsarDraw, TransitionMatrix};
pub use quarter::Quarter;
pub use series::TimeSeries;
pub use view::{ViewKind, ViewSpec};
pub use weights::PoolWeights;


/// `Σ_m w_m N(y; mean_m, var_m)`.
pub fn mixture_pdf(d: &ForecastDensity, y: f64) -> f64 {
    d.pdf(y)
}

/// `Σ_m w_m Φ((y - mean_m) / sd_m)`.
pub fn mixture_cdf(d: &ForecastDensity, y: f64) -> f64 {
    d.cdf(y)
}
