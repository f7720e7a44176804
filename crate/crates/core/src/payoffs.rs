//! Profit functions of the two strategic players and the premium strip where
//! the insurer can break even.

use crate::distributions::PopulationMeasure;
use crate::error::Result;
use crate::population::{region_masses, Premium, PricePair, RegionMasses};
use serde::Serialize;

/// Profits of both players at one action vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfitPair {
    pub producer: f64,
    pub insurer: f64,
}

/// Producer and insurer profit at the given prices:
/// producer = theta * r * (insured + out_of_pocket),
/// insurer  = (premium - theta * r) * insured (zero when staying out).
pub fn profits(pm: &PopulationMeasure, prices: &PricePair) -> Result<ProfitPair> {
    let masses = region_masses(pm, prices)?;
    Ok(profits_from_masses(pm.incidence(), prices, &masses))
}

/// Recompute profits from already-known region masses.
pub fn profits_from_masses(
    incidence: f64,
    prices: &PricePair,
    masses: &RegionMasses,
) -> ProfitPair {
    let producer = prices.theta * incidence * masses.coverage();
    let insurer = match prices.premium {
        Premium::Quoted(premium) => (premium - prices.theta * incidence) * masses.insured,
        Premium::NoEntry => 0.0,
    };
    ProfitPair { producer, insurer }
}

/// Producer profit when the insurer stays out: `theta * r * P[psi > theta]`.
pub fn no_insurer_profit(pm: &PopulationMeasure, theta: f64) -> f64 {
    theta * pm.incidence() * pm.psi_survival(theta)
}

/// True when the premium lies in [theta * r, theta], the only band where the
/// insurer's profit can be positive. NoEntry is never inside.
pub fn in_delta(prices: &PricePair, incidence: f64) -> bool {
    match prices.premium {
        Premium::Quoted(premium) => {
            premium >= prices.theta * incidence && premium <= prices.theta
        }
        Premium::NoEntry => false,
    }
}
