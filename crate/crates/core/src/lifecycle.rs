//! Multi-period agent model reduced to the two sufficient statistics that
//! drive the pricing game: the per-period diagnosis belief p_t and the
//! reservation price psi(t) an agent attaches to treatment upon diagnosis.
//!
//! Scenario paths are deterministic per agent (consumption, quality and
//! survival arrays); stochastic variants enter only through expectations and
//! can be emulated by averaging cohort members.

use crate::distributions::PopulationMeasure;
use crate::error::{Error, Result};
use crate::population::Choice;

/// Relative tail cutoff of the reservation-price series.
const TAIL_CUTOFF: f64 = 1e-10;
/// Locations closer than this merge into one atom when reducing a cohort.
const MERGE_TOL: f64 = 1e-12;

/// Per-period description of one agent over a finite horizon.
///
/// Arrays are indexed by period and must cover `horizon + 1` entries so that
/// period-`horizon` lookups stay in range. Quality and survival factors live
/// in (0, 1]; the closed-end cases (perfect quality, certain survival, zero
/// discounting) are admitted so that idealized cohorts remain expressible.
#[derive(Debug, Clone, PartialEq)]
pub struct LifecycleAgent {
    horizon: usize,
    consumption: Vec<f64>,
    quality: Vec<f64>,
    survival: Vec<f64>,
    discount: f64,
    efficacy_quality: f64,
    efficacy_survival: f64,
    diag_prob: Vec<f64>,
}

impl LifecycleAgent {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: usize,
        consumption: Vec<f64>,
        quality: Vec<f64>,
        survival: Vec<f64>,
        discount: f64,
        efficacy_quality: f64,
        efficacy_survival: f64,
        diag_prob: Vec<f64>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        let need = horizon + 1;
        for (name, arr) in [
            ("consumption", &consumption),
            ("quality", &quality),
            ("survival", &survival),
            ("diag_prob", &diag_prob),
        ] {
            if arr.len() < need {
                return Err(Error::invalid(format!(
                    "{name} needs at least {need} entries for horizon {horizon}, got {}",
                    arr.len()
                )));
            }
        }
        if consumption.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("consumption entries must be finite and >= 0"));
        }
        if quality.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) {
            return Err(Error::invalid("quality factors must lie in (0, 1]"));
        }
        if survival.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
            return Err(Error::invalid("survival factors must lie in (0, 1]"));
        }
        if diag_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("diagnosis probabilities must lie in [0, 1]"));
        }
        if !(discount >= 0.0) || !discount.is_finite() {
            return Err(Error::invalid(format!("discount rate must be >= 0, got {discount}")));
        }
        if !(efficacy_quality >= 0.0) || !efficacy_quality.is_finite() {
            return Err(Error::invalid("quality efficacy must be >= 0"));
        }
        if !(efficacy_survival >= 0.0) || !efficacy_survival.is_finite() {
            return Err(Error::invalid("survival efficacy must be >= 0"));
        }
        Ok(LifecycleAgent {
            horizon,
            consumption,
            quality,
            survival,
            discount,
            efficacy_quality,
            efficacy_survival,
            diag_prob,
        })
    }

    /// Constant-parameter agent, the common cohort building block.
    #[allow(clippy::too_many_arguments)]
    pub fn constant(
        horizon: usize,
        consumption: f64,
        quality: f64,
        survival: f64,
        discount: f64,
        efficacy_quality: f64,
        efficacy_survival: f64,
        diag_prob: f64,
    ) -> Result<Self> {
        let n = horizon + 1;
        LifecycleAgent::new(
            horizon,
            vec![consumption; n],
            vec![quality; n],
            vec![survival; n],
            discount,
            efficacy_quality,
            efficacy_survival,
            vec![diag_prob; n],
        )
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn diag_prob_at(&self, t: usize) -> Result<f64> {
        if t >= self.diag_prob.len() {
            return Err(Error::domain(format!("period {t} out of range")));
        }
        Ok(self.diag_prob[t])
    }

    /// Weight an agent puts at period `s` on one unit of consumption in
    /// period `t`: the quality-survival product over [s, t] discounted by
    /// (1 + discount)^(t - s).
    pub fn utility_weight(&self, s: usize, t: usize) -> Result<f64> {
        if s > t || t > self.horizon {
            return Err(Error::domain(format!(
                "need s <= t <= horizon, got s={s}, t={t}, horizon={}",
                self.horizon
            )));
        }
        let mut prod = 1.0;
        for l in s..=t {
            prod *= self.quality[l] * self.survival[l];
        }
        Ok(prod / (1.0 + self.discount).powi((t - s) as i32))
    }

    /// Reservation price of treatment upon diagnosis in period `t`: the
    /// efficacy-weighted, discounted value of remaining consumption,
    ///   sum over k >= 1 of w(t, t+k) * c[t+k] * e1 * (1 + e2)^(-k),
    /// truncated once the geometric tail bound drops below 1e-10 of the
    /// peak consumption, or at the horizon.
    pub fn reservation_price(&self, t: usize) -> Result<f64> {
        if t >= self.horizon {
            return Err(Error::domain(format!(
                "period {t} must precede the horizon {}",
                self.horizon
            )));
        }
        let e1 = self.efficacy_quality;
        let e2 = self.efficacy_survival;
        if e1 == 0.0 {
            return Ok(0.0);
        }
        let c_max = self
            .consumption
            .iter()
            .copied()
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let mut acc = 0.0;
        // running utility weight, the quality-survival product over [t, t+k]
        // with the period-t factor included, discounted per elapsed period
        let mut weight = self.quality[t] * self.survival[t];
        let mut shrink = 1.0; // (1 + e2)^(-k)
        for k in 1..=(self.horizon - t) {
            let period = t + k;
            weight *= self.quality[period] * self.survival[period] / (1.0 + self.discount);
            shrink /= 1.0 + e2;
            acc += weight * self.consumption[period] * e1 * shrink;
            if e2 > 0.0 && e1 * shrink * c_max / e2 < TAIL_CUTOFF * c_max {
                break;
            }
        }
        Ok(acc)
    }

    /// Insure / treat / forgo decision at period `t` given posted prices.
    /// Weak inequalities: an indifferent agent insures, and an indifferent
    /// uninsured agent treats.
    pub fn decide(&self, t: usize, theta: f64, premium: f64) -> Result<Choice> {
        let psi = self.reservation_price(t)?;
        let p = self.diag_prob[t];
        Ok(if premium <= p * psi.min(theta) {
            Choice::Insure
        } else if psi >= theta {
            Choice::Treat
        } else {
            Choice::Forgo
        })
    }

    /// True when the agent sits exactly on a decision boundary at `t`, where
    /// the weak-inequality convention above is the deciding factor.
    pub fn on_decision_boundary(&self, t: usize, theta: f64, premium: f64) -> Result<bool> {
        let psi = self.reservation_price(t)?;
        let p = self.diag_prob[t];
        Ok(premium == p * psi.min(theta) || psi == theta)
    }
}

/// One-period agent: wealth, diagnosis belief, treatment success belief and
/// the wealth fraction lost despite treatment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePeriodAgent {
    pub wealth: f64,
    pub diag_prob: f64,
    pub success: f64,
    pub loss_fraction: f64,
}

impl SinglePeriodAgent {
    pub fn new(wealth: f64, diag_prob: f64, success: f64, loss_fraction: f64) -> Result<Self> {
        if !(wealth >= 0.0) || !wealth.is_finite() {
            return Err(Error::invalid(format!("wealth must be >= 0, got {wealth}")));
        }
        if !(0.0..=1.0).contains(&diag_prob) {
            return Err(Error::invalid(format!("diagnosis probability {diag_prob} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&success) {
            return Err(Error::invalid(format!("success probability {success} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&loss_fraction) {
            return Err(Error::invalid(format!("loss fraction {loss_fraction} outside [0, 1]")));
        }
        Ok(SinglePeriodAgent {
            wealth,
            diag_prob,
            success,
            loss_fraction,
        })
    }
}

/// Reservation price of a one-period agent: wealth * success * (1 - loss).
pub fn single_period_psi(a: &SinglePeriodAgent) -> f64 {
    a.wealth * a.success * (1.0 - a.loss_fraction)
}

/// The (p, psi) statistics of a cohort at period `t`, merged within 1e-12.
pub fn cohort_atoms(agents: &[LifecycleAgent], t: usize) -> Result<Vec<(f64, f64, f64)>> {
    if agents.is_empty() {
        return Err(Error::precondition("cohort must not be empty"));
    }
    let w = 1.0 / agents.len() as f64;
    let mut atoms: Vec<(f64, f64, f64)> = Vec::new();
    for a in agents {
        let p = a.diag_prob_at(t)?;
        let psi = a.reservation_price(t)?;
        match atoms
            .iter_mut()
            .find(|(ap, apsi, _)| (*ap - p).abs() <= MERGE_TOL && (*apsi - psi).abs() <= MERGE_TOL)
        {
            Some(existing) => existing.2 += w,
            None => atoms.push((p, psi, w)),
        }
    }
    Ok(atoms)
}

/// Reduce a cohort to the atomic population measure that feeds the pricing
/// game: equal-weight atoms at each agent's (p_t, psi(t)), merged within
/// 1e-12, under the statistical incidence rate `r`.
pub fn reduce_cohort(
    agents: &[LifecycleAgent],
    t: usize,
    incidence: f64,
) -> Result<PopulationMeasure> {
    PopulationMeasure::planar_atoms(cohort_atoms(agents, t)?, incidence)
}
