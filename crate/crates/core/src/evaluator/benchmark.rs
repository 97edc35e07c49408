use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_window, EstimationContext};
use crate::domain::{Quarter, TimeSeries, ViewSpec};
use crate::error::{Error, Result};
use crate::forecaster::ViewForecast;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Every window starts at the given quarter.
    Recursive { start: Quarter },
    /// Fixed-width windows ending at each origin.
    Rolling { width: usize },
}

/// Forecasts of a single-regime Bayesian AR from each origin, estimated with the same
/// sampler, seeds and forecast pipeline as the views.
pub fn ar_benchmark(
    y: &TimeSeries,
    view: &ViewSpec,
    origins: &[Quarter],
    scheme: Scheme,
    ctx: &EstimationContext,
) -> Result<Vec<ViewForecast>> {
    if view.regimes != 1 {
        return Err(Error::invalid("the AR benchmark is a single-regime view"));
    }
    let min = view.lags + 10;
    origins
        .par_iter()
        .map(|&o| {
            let start = match scheme {
                Scheme::Recursive { start } => start,
                Scheme::Rolling { width } => {
                    if width < min {
                        return Err(Error::invalid(format!(
                            "rolling window of {width} quarters is shorter than {min}"
                        )));
                    }
                    o - (width as i32 - 1)
                }
            };
            Ok(estimate_window(y, view, start, o, ctx, false)?.forecast)
        })
        .collect()
}
