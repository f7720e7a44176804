//! Browser bindings for the pricing-game solver. One `Market` wraps a
//! population and exposes three interactive operations: a raster of the
//! decision regions in the (p, psi) plane, the insurer's best-response curve
//! across treatment prices, and full equilibrium solves. Everything returns
//! JSON strings so the page needs no binding glue beyond `JSON.parse`.

use premia::sweep::format_sig;
use premia::{
    baseline, best_response, classify, dictatorial, mc_region_masses, region_masses, spne,
    Choice, EquilibriumKind, PopulationMeasure, PricePair, SolverOptions,
};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn err_js(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn prices_for(theta: f64, premium: f64) -> Result<PricePair, String> {
    if premium.is_finite() {
        PricePair::new(theta, premium).map_err(err_js)
    } else {
        PricePair::no_entry(theta).map_err(err_js)
    }
}

/// A population plus incidence rate, ready to answer pricing questions.
#[wasm_bindgen]
pub struct Market {
    pm: PopulationMeasure,
    opts: SolverOptions,
}

#[wasm_bindgen]
impl Market {
    /// Build from the same `[population]` config text the CLI uses, e.g.
    ///
    /// ```text
    /// [population]
    /// mu_p = beta(2, 3)
    /// mu_psi = exp(1.0)
    /// r = 0.3
    /// ```
    #[wasm_bindgen(constructor)]
    pub fn new(config_text: &str) -> Result<Market, String> {
        let cfg = premia::config::parse(config_text).map_err(err_js)?;
        let spec = cfg
            .population
            .ok_or_else(|| "config has no [population] section".to_string())?;
        let pm = spec.build().map_err(err_js)?;
        Ok(Market {
            pm,
            opts: SolverOptions::quick(),
        })
    }

    /// Trade accuracy for speed: grid sizes for the interactive solves.
    pub fn set_grid(&mut self, outer: usize, inner: usize) {
        self.opts.outer_grid = outer.clamp(16, 4096);
        self.opts.inner_grid = inner.clamp(16, 4096);
    }

    /// Median of the reservation-price marginal; a good vertical scale for
    /// plots.
    pub fn psi_scale(&self) -> f64 {
        self.pm.psi_scale()
    }

    pub fn incidence(&self) -> f64 {
        self.pm.incidence()
    }

    /// Row-major byte raster of the decision regions over
    /// [0, 1] x [0, psi_max]: 0 = no access, 1 = out of pocket, 2 = insured.
    /// Row 0 is the bottom of the plane (psi near 0).
    pub fn region_raster(
        &self,
        theta: f64,
        premium: f64,
        nx: usize,
        ny: usize,
        psi_max: f64,
    ) -> Result<Vec<u8>, String> {
        let prices = prices_for(theta, premium)?;
        let (nx, ny) = (nx.clamp(1, 2048), ny.clamp(1, 2048));
        let mut out = vec![0u8; nx * ny];
        for iy in 0..ny {
            let psi = psi_max * (iy as f64 + 0.5) / ny as f64;
            for ix in 0..nx {
                let p = (ix as f64 + 0.5) / nx as f64;
                out[iy * nx + ix] = match classify(p, psi, &prices) {
                    Choice::Forgo => 0,
                    Choice::Treat => 1,
                    Choice::Insure => 2,
                };
            }
        }
        Ok(out)
    }

    /// Region masses and both profits at one price pair, with a Monte Carlo
    /// cross-check when `mc_n > 0`.
    pub fn masses_json(&self, theta: f64, premium: f64, mc_n: usize) -> Result<String, String> {
        let prices = prices_for(theta, premium)?;
        let masses = region_masses(&self.pm, &prices).map_err(err_js)?;
        let profits = premia::profits_from_masses(self.pm.incidence(), &prices, &masses);
        let mut doc = json!({
            "theta": theta,
            "premium": prices.premium.quoted(),
            "masses": masses,
            "profits": profits,
        });
        if mc_n > 0 {
            let (mc, se) =
                mc_region_masses(&self.pm, &prices, mc_n.max(1000), 42).map_err(err_js)?;
            doc["monte_carlo"] = json!({ "masses": mc, "standard_errors": se });
        }
        Ok(doc.to_string())
    }

    /// The insurer's best response to one treatment price.
    pub fn best_response_json(&self, theta: f64) -> Result<String, String> {
        let br = best_response(&self.pm, theta, &self.opts).map_err(err_js)?;
        Ok(serde_json::to_string(&br).expect("serializable"))
    }

    /// Best-response curve over `n` prices in (0, theta_hi]: premium,
    /// insurer profit and producer profit per price, for plotting the
    /// follower reaction and the leader's objective.
    pub fn best_response_curve_json(&self, theta_hi: f64, n: usize) -> Result<String, String> {
        let n = n.clamp(2, 512);
        let mut thetas = Vec::with_capacity(n);
        let mut premiums = Vec::with_capacity(n);
        let mut insurer = Vec::with_capacity(n);
        let mut producer = Vec::with_capacity(n);
        for i in 1..=n {
            let theta = theta_hi * i as f64 / n as f64;
            let br = best_response(&self.pm, theta, &self.opts).map_err(err_js)?;
            let prices = PricePair {
                theta,
                premium: br.premium,
            };
            let masses = region_masses(&self.pm, &prices).map_err(err_js)?;
            let pr = premia::profits_from_masses(self.pm.incidence(), &prices, &masses);
            thetas.push(theta);
            premiums.push(br.premium.quoted());
            insurer.push(pr.insurer);
            producer.push(pr.producer);
        }
        Ok(json!({
            "theta": thetas,
            "premium": premiums,
            "insurer_profit": insurer,
            "producer_profit": producer,
        })
        .to_string())
    }

    /// Full equilibrium solve; kind is "spne", "dictatorial" or "baseline".
    pub fn solve_json(&self, kind: &str) -> Result<String, String> {
        let kind = premia::config::parse_kind(kind)
            .ok_or_else(|| "kind must be spne | dictatorial | baseline".to_string())?;
        let eq = match kind {
            EquilibriumKind::SubgamePerfect => spne(&self.pm, &self.opts),
            EquilibriumKind::Dictatorial => dictatorial(&self.pm, &self.opts),
            EquilibriumKind::NoInsuranceBaseline => baseline(&self.pm, &self.opts),
        }
        .map_err(err_js)?;
        Ok(serde_json::to_string(&eq).expect("serializable"))
    }

    /// Compact human summary of an equilibrium solve, for a status line.
    pub fn solve_summary(&self, kind: &str) -> Result<String, String> {
        let eq_json = self.solve_json(kind)?;
        let eq: serde_json::Value = serde_json::from_str(&eq_json).expect("own json");
        let premium = match &eq["premium"] {
            serde_json::Value::Null => "no entry".to_string(),
            v => format_sig(v.as_f64().unwrap_or(f64::NAN)),
        };
        Ok(format!(
            "theta {} premium {} producer {} insurer {}",
            format_sig(eq["theta"].as_f64().unwrap_or(f64::NAN)),
            premium,
            format_sig(eq["profits"]["producer"].as_f64().unwrap_or(f64::NAN)),
            format_sig(eq["profits"]["insurer"].as_f64().unwrap_or(f64::NAN)),
        ))
    }
}
