use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conditionals::{
    inv_gamma_variate, regression_posterior_stats, sample_c0, sample_xi, sigma2_posterior_data,
    split_coefficients, RegimeStats,
};
use super::filter::{forward_filter_data, sample_states};
use super::{PosteriorDraws, RegressionData, SamplerConfig};
use crate::domain::{MsarDraw, Quarter, TimeSeries, TransitionMatrix, ViewSpec};
use crate::error::{Error, Result};

/// Starting point of the chain: prior means for the coefficients, the sample variance for
/// every regime and the prior mean of each transition row.
pub fn initial_state(y: &TimeSeries, view: &ViewSpec) -> MsarDraw {
    let k = view.regimes;
    let v = if y.len() > 1 {
        crate::math::variance(y.values())
    } else {
        1.0
    };
    let v = if v > 0.0 && v.is_finite() { v } else { 1.0 };
    let mut xi = Vec::with_capacity(k * k);
    for row in &view.transition_prior {
        let s: f64 = row.iter().sum();
        xi.extend(row.iter().map(|e| e / s));
    }
    MsarDraw {
        beta: view.intercept_mean.clone(),
        alpha: view.ar_mean.clone(),
        sigma2: vec![v; k],
        xi: TransitionMatrix::new(k, xi).expect("prior mean rows are stochastic"),
        states: vec![0; y.len().saturating_sub(view.lags)],
        c0: view.hyper_shape / view.hyper_rate,
    }
}

/// One full sweep: filter, regime path, coefficients, variances, C0, transition matrix.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    y: &TimeSeries,
    view: &ViewSpec,
    state: &mut MsarDraw,
    rng: &mut R,
) -> Result<()> {
    let data = RegressionData::new(y.values(), view.lags)?;
    sweep(&data, view, state, rng)
}

pub(crate) fn sweep<R: Rng + ?Sized>(
    data: &RegressionData,
    view: &ViewSpec,
    state: &mut MsarDraw,
    rng: &mut R,
) -> Result<()> {
    let k = view.regimes;
    let init = state.xi.initial_distribution();
    let filter = forward_filter_data(data, state, &init)?;
    state.states = sample_states(&filter, state, rng);

    let stats = RegimeStats::new(data, &state.states, k);
    let post = regression_posterior_stats(&stats, view, &state.sigma2)?;
    let (beta, alpha) = split_coefficients(&post.sample(rng), k);
    state.beta = beta;
    state.alpha = alpha;

    let params = sigma2_posterior_data(data, &state.states, &state.beta, &state.alpha, view, state.c0);
    state.sigma2 = params
        .into_iter()
        .map(|(a, b)| inv_gamma_variate(a, b, rng))
        .collect();

    state.c0 = sample_c0(&state.sigma2, view, rng);

    if k > 1 {
        // The Dirichlet full conditional ignores the first regime's dependence on the
        // stationary distribution; an independence Metropolis step corrects for it.
        let proposal = sample_xi(&state.states, view, rng);
        let s0 = state.states.first().copied().unwrap_or(0) as usize;
        let new_p = proposal.initial_distribution()[s0];
        let old_p = state.xi.initial_distribution()[s0];
        let u: f64 = rng.random();
        if u * old_p < new_p {
            state.xi = proposal;
        }
    }
    Ok(())
}

/// Runs the sampler on the whole of `y` and returns the retained draws.
pub fn run_gibbs(y: &TimeSeries, view: &ViewSpec, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    view.validate()?;
    cfg.validate()?;
    let min_len = view.lags + 10 * view.regimes;
    if y.len() < min_len {
        return Err(Error::invalid(format!(
            "view {} needs at least {min_len} observations, window has {}",
            view.id,
            y.len()
        )));
    }
    let data = RegressionData::new(y.values(), view.lags)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = initial_state(y, view);
    let mut draws = Vec::with_capacity(cfg.retained());
    let total = cfg.burn_in + cfg.keep;
    for it in 0..total {
        sweep(&data, view, &mut state, &mut rng).map_err(|e| Error::Sweep {
            sweep: it,
            source: Box::new(e),
        })?;
        if it >= cfg.burn_in && (it - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
            draws.push(state.clone());
        }
    }
    Ok(PosteriorDraws {
        view_id: view.id,
        window_start: y.start(),
        window_end: y.end(),
        config: *cfg,
        regimes: view.regimes,
        lags: view.lags,
        draws,
    })
}

/// Runs the sampler on the sub-window `[start, end]` of `y`.
pub fn run_gibbs_on_window(
    y: &TimeSeries,
    view: &ViewSpec,
    cfg: &SamplerConfig,
    start: Quarter,
    end: Quarter,
) -> Result<PosteriorDraws> {
    run_gibbs(&y.window(start, end)?, view, cfg)
}
