//! Expected total-charge variance removed by one site measurement in the
//! two-sector model: the charge (number of occupied sites) is `N` with
//! probability `q` and `N + 1` otherwise, uniformly spread over the chain.

use super::state::ChargeDistribution;
use crate::error::{Error, Result};

fn check(sites: usize, occupied: usize, q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param("q", "sector weight must lie in [0, 1]"));
    }
    if occupied == 0 || occupied >= sites {
        return Err(Error::param("N", "need 0 < N < L"));
    }
    Ok(())
}

/// Exact Bayes: prior variance minus the outcome-averaged posterior
/// variance, in units of the occupation number.
pub fn variance_decrement_oracle(sites: usize, occupied: usize, q: f64) -> Result<f64> {
    check(sites, occupied, q)?;
    let l = sites as f64;
    let a = occupied as f64 / l;
    let b = (occupied + 1) as f64 / l;
    let prior = q * (1.0 - q);
    let mut posterior = 0.0;
    for (like_n, like_n1) in [(a, b), (1.0 - a, 1.0 - b)] {
        let evidence = q * like_n + (1.0 - q) * like_n1;
        if evidence > 0.0 {
            let post_q = q * like_n / evidence;
            posterior += evidence * post_q * (1.0 - post_q);
        }
    }
    Ok(prior - posterior)
}

/// `[q (1 - q)]^2 / (L^2 P_occ P_empty)`, with `P_occ` the prior probability
/// of finding the site occupied. Tends to `[q (1 - q)]^2 / (N (L - N))`.
pub fn variance_decrement_closed_form(sites: usize, occupied: usize, q: f64) -> Result<f64> {
    check(sites, occupied, q)?;
    let l = sites as f64;
    let p_occ = (q * occupied as f64 + (1.0 - q) * (occupied + 1) as f64) / l;
    Ok((q * (1.0 - q)).powi(2) / (l * l * p_occ * (1.0 - p_occ)))
}

/// The same decrement from the dense filter: measure site 0 of the
/// two-sector distribution, both outcomes, and average the posterior
/// total-charge variance. Limited to dense sizes.
pub fn variance_decrement_dense(sites: usize, occupied: usize, q: f64) -> Result<f64> {
    check(sites, occupied, q)?;
    let prior = ChargeDistribution::two_sector(sites, occupied, q)?;
    // sigma units: Var(sum sigma) = 4 Var(N)
    let before = prior.total_charge_variance() / 4.0;
    let mut after = 0.0;
    for outcome in [1i8, -1] {
        let mut post = prior.clone();
        if let Ok(prob) = post.condition(0, outcome) {
            after += prob * post.total_charge_variance() / 4.0;
        }
    }
    Ok(before - after)
}
