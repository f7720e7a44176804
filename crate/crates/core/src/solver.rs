//! Equilibrium search: the insurer's best response in the premium band, the
//! producer's price search against it, the insurer-optimal (dictatorial)
//! program, and the no-insurance baseline.
//!
//! All searches share one scheme: a coarse grid over the decision interval,
//! bracketing of every local maximum (interior sign changes of the discrete
//! slope plus both endpoints), golden-section refinement of the best
//! brackets, and a deterministic merge with ties broken toward smaller
//! prices. Outer grids evaluate in parallel; the merge is serial, so results
//! do not depend on thread count.

use crate::distributions::PopulationMeasure;
use crate::error::{Error, Result};
use crate::num;
use crate::payoffs::{no_insurer_profit, profits_from_masses, ProfitPair};
use crate::population::{region_masses, Premium, PricePair, RegionMasses};
use serde::Serialize;

/// Search configuration. Defaults reproduce the documented experiment setup.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Points in the producer-price grid.
    pub outer_grid: usize,
    /// Points in the premium grid of each best-response call.
    pub inner_grid: usize,
    /// How many of the best local-maximum brackets get golden-section
    /// refinement in the outer search.
    pub refine_top: usize,
    /// Width target of premium refinement, relative to theta.
    pub premium_tol: f64,
    /// Width target of price refinement, relative to the price scale.
    pub price_tol: f64,
    /// Slack on the producer-participation constraint.
    pub participation_slack: f64,
    /// Override the automatic price-search upper bound.
    pub theta_max: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            outer_grid: 512,
            inner_grid: 512,
            refine_top: 5,
            premium_tol: 1e-10,
            price_tol: 1e-9,
            participation_slack: 1e-9,
            theta_max: None,
        }
    }
}

impl SolverOptions {
    /// Cheaper settings for interactive use; same structure, coarser grids.
    pub fn quick() -> Self {
        SolverOptions {
            outer_grid: 128,
            inner_grid: 128,
            refine_top: 3,
            ..SolverOptions::default()
        }
    }
}

/// The insurer's optimal reaction to a posted treatment price.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BestResponse {
    pub premium: Premium,
    pub insurer_profit: f64,
    /// Whether the maximizer lies strictly inside (theta*r, theta).
    pub is_interior: bool,
    /// |d insurer-profit / d premium| at the solution; 0 for boundary or
    /// no-entry outcomes.
    pub stationarity_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    SubgamePerfect,
    Dictatorial,
    NoInsuranceBaseline,
}

/// A local optimum the search considered.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Candidate {
    pub theta: f64,
    pub premium: Premium,
    pub producer: f64,
    pub insurer: f64,
}

/// Search metadata attached to every result.
#[derive(Debug, Clone, Serialize)]
pub struct SearchDiagnostics {
    pub theta_min: f64,
    pub theta_max: f64,
    pub log_spaced: bool,
    pub outer_grid: usize,
    pub inner_grid: usize,
    pub refined_brackets: usize,
    /// Stationarity residual of the inner problem at the reported premium.
    pub stationarity_residual: f64,
    /// Producer-profit bound at theta_max certifying that the search domain
    /// contains the optimum (theta_max * psi-tail at theta_max * r).
    pub tail_bound: f64,
    /// Whether that bound fell below 1e-6 of the incumbent profit.
    pub tail_bound_met: bool,
    /// Set when the psi-marginal has infinite mean, outside the regime where
    /// an equilibrium is guaranteed to exist.
    pub non_certified: bool,
    pub notes: Vec<String>,
}

/// One computed equilibrium (or the no-insurance benchmark).
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumResult {
    pub kind: EquilibriumKind,
    pub theta: f64,
    pub premium: Premium,
    pub masses: RegionMasses,
    pub profits: ProfitPair,
    pub candidates: Vec<Candidate>,
    pub diagnostics: SearchDiagnostics,
}

impl EquilibriumResult {
    pub fn prices(&self) -> PricePair {
        PricePair {
            theta: self.theta,
            premium: self.premium,
        }
    }
}

/// Side-by-side view of the market with and without the insurer.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub baseline: EquilibriumResult,
    pub with_insurer: EquilibriumResult,
    /// theta* - theta_baseline.
    pub price_effect: f64,
    /// Covered fraction with the insurer minus treated fraction without.
    pub access_effect: f64,
    /// Producer profit gain from insurer entry (non-negative in theory).
    pub producer_gain: f64,
    pub insurer_profit: f64,
}

/// One point of the equilibrium-set trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KPrimePoint {
    pub theta: f64,
    pub premium: Premium,
    pub producer: f64,
    pub insurer: f64,
}

// ---------------------------------------------------------------------------
// scalar search machinery
// ---------------------------------------------------------------------------

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Indices of grid-local maxima (slope sign changes plus endpoints).
fn local_max_indices(vals: &[f64]) -> Vec<usize> {
    let n = vals.len();
    (0..n)
        .filter(|&i| {
            let left_ok = i == 0 || vals[i] >= vals[i - 1];
            let right_ok = i == n - 1 || vals[i] >= vals[i + 1];
            left_ok && right_ok && vals[i].is_finite()
        })
        .collect()
}

struct ScalarMax {
    x: f64,
    value: f64,
    refined: usize,
    candidates: Vec<(f64, f64)>,
}

/// Grid-plus-golden maximization of `f` over the given grid. Each of the
/// `refine_top` best brackets is re-gridded once (a zoom pass, so narrow
/// features inside a coarse bracket are still resolved) and then refined by
/// golden section to width `tol`. Ties resolve toward smaller x.
fn maximize_on_grid<F>(f: F, xs: &[f64], vals: &[f64], refine_top: usize, tol: f64) -> ScalarMax
where
    F: Fn(f64) -> f64,
{
    const ZOOM: usize = 33;
    let mut locals = local_max_indices(vals);
    locals.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut best: Option<(f64, f64)> = None;
    let mut candidates = Vec::new();
    let mut refined = 0;
    for &i in locals.iter().take(refine_top.max(1)) {
        let lo = xs[i.saturating_sub(1)];
        let hi = xs[(i + 1).min(xs.len() - 1)];
        let (x, v) = if hi > lo {
            let zs = linspace(lo, hi, ZOOM);
            let zvals: Vec<f64> = zs.iter().map(|&z| f(z)).collect();
            let zi = (0..ZOOM)
                .max_by(|&a, &b| zvals[a].total_cmp(&zvals[b]).then(b.cmp(&a)))
                .unwrap();
            let zlo = zs[zi.saturating_sub(1)];
            let zhi = zs[(zi + 1).min(ZOOM - 1)];
            if zhi > zlo {
                num::golden_max(&f, zlo, zhi, tol)
            } else {
                (zs[zi], zvals[zi])
            }
        } else {
            (xs[i], vals[i])
        };
        refined += 1;
        candidates.push((x, v));
        best = Some(match best {
            None => (x, v),
            Some((bx, bv)) => {
                if v > bv || (v == bv && x < bx) {
                    (x, v)
                } else {
                    (bx, bv)
                }
            }
        });
    }
    let (x, value) = best.unwrap_or((xs[0], vals[0]));
    ScalarMax {
        x,
        value,
        refined,
        candidates,
    }
}

// ---------------------------------------------------------------------------
// best response
// ---------------------------------------------------------------------------

fn insurer_profit_at(pm: &PopulationMeasure, theta: f64, premium: f64) -> Result<f64> {
    let prices = PricePair {
        theta,
        premium: Premium::Quoted(premium),
    };
    let masses = region_masses(pm, &prices)?;
    Ok(profits_from_masses(pm.incidence(), &prices, &masses).insurer)
}

fn insured_mass_at(pm: &PopulationMeasure, theta: f64, premium: f64) -> Result<f64> {
    let prices = PricePair {
        theta,
        premium: Premium::Quoted(premium),
    };
    Ok(region_masses(pm, &prices)?.insured)
}

/// Upper end of the premium range that still attracts any insurance demand.
/// The insured mass is nonincreasing in the premium (region inclusion), so
/// the boundary is found by bisection; the premium grid then spends all its
/// points where profit can be nonzero, which matters when demand collapses
/// in a sliver just above the actuarially fair level.
fn premium_support_cap(pm: &PopulationMeasure, theta: f64, lo: f64, hi: f64) -> Result<Option<f64>> {
    if insured_mass_at(pm, theta, lo)? <= 0.0 {
        return Ok(None); // no demand anywhere in the band
    }
    if insured_mass_at(pm, theta, hi * (1.0 - 1e-12))? > 0.0 {
        return Ok(Some(hi));
    }
    let mut a = lo;
    let mut b = hi;
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if insured_mass_at(pm, theta, m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Some(b.min(hi)))
}

/// Global maximizer of the insurer's profit over the premium band
/// [theta * r, theta]. Returns NoEntry when no premium earns a positive
/// profit. Ties break toward the smallest premium.
pub fn best_response(
    pm: &PopulationMeasure,
    theta: f64,
    opts: &SolverOptions,
) -> Result<BestResponse> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::domain(format!(
            "best response needs a positive treatment price, got {theta}"
        )));
    }
    let r = pm.incidence();
    let (lo, hi) = (theta * r, theta);
    let no_entry = BestResponse {
        premium: Premium::NoEntry,
        insurer_profit: 0.0,
        is_interior: false,
        stationarity_residual: 0.0,
    };
    let cap = match premium_support_cap(pm, theta, lo, hi)? {
        Some(cap) if cap > lo => cap,
        _ => return Ok(no_entry),
    };
    let xs = linspace(lo, cap, opts.inner_grid.max(8));
    let mut vals = Vec::with_capacity(xs.len());
    for &x in &xs {
        vals.push(insurer_profit_at(pm, theta, x)?);
    }
    let tol = opts.premium_tol * theta;
    let sm = maximize_on_grid(
        |x| insurer_profit_at(pm, theta, x).unwrap_or(f64::NEG_INFINITY),
        &xs,
        &vals,
        opts.refine_top.max(3),
        tol,
    );
    if !(sm.value > 0.0) {
        // the insurer cannot profit at any premium: stay out
        return Ok(no_entry);
    }
    let interior = sm.x - lo > 2.0 * tol && hi - sm.x > 2.0 * tol;
    let residual = if interior {
        let h = (1e-6 * theta).min(0.5 * (sm.x - lo)).min(0.5 * (hi - sm.x));
        if h > 0.0 {
            let up = insurer_profit_at(pm, theta, sm.x + h)?;
            let dn = insurer_profit_at(pm, theta, sm.x - h)?;
            ((up - dn) / (2.0 * h)).abs()
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(BestResponse {
        premium: Premium::Quoted(sm.x),
        insurer_profit: sm.value,
        is_interior: interior,
        stationarity_residual: residual,
    })
}

// ---------------------------------------------------------------------------
// price-search domain
// ---------------------------------------------------------------------------

struct ThetaDomain {
    theta_min: f64,
    knee: f64,
    theta_max: f64,
    log_spaced: bool,
    tail_bound: f64,
    tail_bound_met: bool,
}

/// Price-search interval: from a tiny positive price up to a bound beyond
/// which no price can beat the incumbent profit. The default upper bound is
/// the (1 - 1e-6) psi-quantile, doubled until
///     theta_max * P[psi > theta_max * r] <= 1e-6 * incumbent
/// (a producer-profit envelope), with a hard cap on doublings for tails too
/// fat to certify.
fn theta_domain(pm: &PopulationMeasure, opts: &SolverOptions) -> Result<ThetaDomain> {
    let r = pm.incidence();
    let scale = pm.psi_scale();
    let theta_min = 1e-8 * scale;
    let knee = pm
        .psi_quantile(1.0 - 1e-6)
        .unwrap_or(scale)
        .max(theta_min * 10.0);
    // incumbent: the no-insurance supremum over the pre-extension range,
    // a guaranteed lower bound for every equilibrium producer profit
    let probe = logspace(theta_min.max(1e-12), knee, 128);
    let incumbent = probe
        .iter()
        .map(|&t| no_insurer_profit(pm, t))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let target = 1e-6 * incumbent;
    if let Some(cap) = opts.theta_max {
        if !(cap > theta_min) {
            return Err(Error::domain(format!("theta_max override {cap} too small")));
        }
        let bound = cap * pm.psi_survival(cap * r);
        return Ok(ThetaDomain {
            theta_min,
            knee: knee.min(cap),
            theta_max: cap,
            log_spaced: cap / scale.max(theta_min) > 1e3,
            tail_bound: bound,
            tail_bound_met: bound <= target,
        });
    }
    let mut theta_max = knee;
    let mut bound = theta_max * pm.psi_survival(theta_max * r);
    let mut doublings = 0;
    while bound > target && doublings < 48 {
        theta_max *= 2.0;
        bound = theta_max * pm.psi_survival(theta_max * r);
        doublings += 1;
    }
    let log_spaced = theta_max / scale.max(theta_min) > 1e3;
    Ok(ThetaDomain {
        theta_min,
        knee,
        theta_max,
        log_spaced,
        tail_bound: bound,
        tail_bound_met: bound <= target,
    })
}

/// Price grid over the search domain. Most points cover (theta_min, knee],
/// the quantile bulk of the psi-marginal; the rest cover the certified tail.
fn theta_grid(dom: &ThetaDomain, n: usize) -> Vec<f64> {
    let n = n.max(16);
    let space = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
        if dom.log_spaced {
            logspace(lo.max(1e-300), hi, k)
        } else {
            linspace(lo, hi, k)
        }
    };
    if dom.theta_max <= dom.knee * 1.0000001 {
        return space(dom.theta_min, dom.theta_max, n);
    }
    let n_tail = (n / 8).max(8);
    let mut xs = space(dom.theta_min, dom.knee, n - n_tail);
    let tail = logspace(dom.knee, dom.theta_max, n_tail + 1);
    xs.extend_from_slice(&tail[1..]);
    xs
}

fn base_diagnostics(dom: &ThetaDomain, pm: &PopulationMeasure, opts: &SolverOptions) -> SearchDiagnostics {
    let non_certified = pm.psi_mean().is_infinite();
    let mut notes = Vec::new();
    if non_certified {
        notes.push(
            "psi-marginal has infinite mean; existence of an equilibrium is not guaranteed and \
             the search ran on a truncated domain"
                .to_string(),
        );
    }
    if !dom.tail_bound_met {
        notes.push(format!(
            "tail bound {:.3e} at theta_max {:.3e} above certification target",
            dom.tail_bound, dom.theta_max
        ));
    }
    SearchDiagnostics {
        theta_min: dom.theta_min,
        theta_max: dom.theta_max,
        log_spaced: dom.log_spaced,
        outer_grid: opts.outer_grid,
        inner_grid: opts.inner_grid,
        refined_brackets: 0,
        stationarity_residual: 0.0,
        tail_bound: dom.tail_bound,
        tail_bound_met: dom.tail_bound_met,
        non_certified,
        notes,
    }
}

// ---------------------------------------------------------------------------
// solvers
// ---------------------------------------------------------------------------

/// Producer's optimum when the insurer never enters.
pub fn baseline(pm: &PopulationMeasure, opts: &SolverOptions) -> Result<EquilibriumResult> {
    let dom = theta_domain(pm, opts)?;
    let xs = theta_grid(&dom, opts.outer_grid);
    let vals: Vec<f64> = xs.iter().map(|&t| no_insurer_profit(pm, t)).collect();
    let sm = maximize_on_grid(
        |t| no_insurer_profit(pm, t),
        &xs,
        &vals,
        opts.refine_top,
        dom.theta_min.max(opts.price_tol * pm.psi_scale()),
    );
    let prices = PricePair {
        theta: sm.x,
        premium: Premium::NoEntry,
    };
    let masses = region_masses(pm, &prices)?;
    let profits = profits_from_masses(pm.incidence(), &prices, &masses);
    let mut diagnostics = base_diagnostics(&dom, pm, opts);
    diagnostics.refined_brackets = sm.refined;
    Ok(EquilibriumResult {
        kind: EquilibriumKind::NoInsuranceBaseline,
        theta: sm.x,
        premium: Premium::NoEntry,
        masses,
        profits,
        candidates: sm
            .candidates
            .iter()
            .map(|&(t, v)| Candidate {
                theta: t,
                premium: Premium::NoEntry,
                producer: v,
                insurer: 0.0,
            })
            .collect(),
        diagnostics,
    })
}

fn require_density(pm: &PopulationMeasure, what: &str) -> Result<()> {
    if pm.is_atomic() {
        return Err(Error::precondition(format!(
            "{what} requires a density population; smooth atomic measures first (smooth_atoms)"
        )));
    }
    Ok(())
}

/// Producer profit when the insurer plays its best response to `theta`.
fn leader_payoff(pm: &PopulationMeasure, theta: f64, opts: &SolverOptions) -> Result<(f64, Premium)> {
    let br = best_response(pm, theta, opts)?;
    let prices = PricePair {
        theta,
        premium: br.premium,
    };
    let masses = region_masses(pm, &prices)?;
    Ok((
        profits_from_masses(pm.incidence(), &prices, &masses).producer,
        br.premium,
    ))
}

/// Subgame-perfect equilibrium that maximizes producer profit: grid plus
/// refinement on theta -> producer profit at the insurer's best response.
pub fn spne(pm: &PopulationMeasure, opts: &SolverOptions) -> Result<EquilibriumResult> {
    require_density(pm, "subgame-perfect search")?;
    let dom = theta_domain(pm, opts)?;
    let xs = theta_grid(&dom, opts.outer_grid);
    let vals: Vec<f64> =
        crate::parallel::try_map(&xs, |&t| leader_payoff(pm, t, opts).map(|(v, _)| v))?;
    let tol = opts.price_tol * pm.psi_scale().max(dom.theta_min);
    let sm = maximize_on_grid(
        |t| {
            leader_payoff(pm, t, opts)
                .map(|(v, _)| v)
                .unwrap_or(f64::NEG_INFINITY)
        },
        &xs,
        &vals,
        opts.refine_top,
        tol,
    );
    let theta = sm.x;
    let br = best_response(pm, theta, opts)?;
    let prices = PricePair {
        theta,
        premium: br.premium,
    };
    let masses = region_masses(pm, &prices)?;
    let profits = profits_from_masses(pm.incidence(), &prices, &masses);
    let mut diagnostics = base_diagnostics(&dom, pm, opts);
    diagnostics.refined_brackets = sm.refined;
    diagnostics.stationarity_residual = br.stationarity_residual;
    let mut candidates = Vec::with_capacity(sm.candidates.len());
    for &(t, v) in &sm.candidates {
        let premium = best_response(pm, t, opts)?.premium;
        let prices = PricePair { theta: t, premium };
        let m = region_masses(pm, &prices)?;
        let pr = profits_from_masses(pm.incidence(), &prices, &m);
        debug_assert!((pr.producer - v).abs() <= 1e-6 * v.abs().max(1.0));
        candidates.push(Candidate {
            theta: t,
            premium,
            producer: pr.producer,
            insurer: pr.insurer,
        });
    }
    Ok(EquilibriumResult {
        kind: EquilibriumKind::SubgamePerfect,
        theta,
        premium: br.premium,
        masses,
        profits,
        candidates,
        diagnostics,
    })
}

/// Largest feasible premium at fixed theta under the producer-participation
/// constraint, assuming producer profit is nonincreasing in the premium.
/// Returns None when even the smallest premium is infeasible.
fn participation_cap(
    pm: &PopulationMeasure,
    theta: f64,
    floor: f64,
    opts: &SolverOptions,
) -> Result<Option<f64>> {
    let r = pm.incidence();
    let (lo, hi) = (theta * r, theta);
    let producer_at = |premium: f64| -> Result<f64> {
        let prices = PricePair {
            theta,
            premium: Premium::Quoted(premium),
        };
        Ok(profits_from_masses(pm.incidence(), &prices, &region_masses(pm, &prices)?).producer)
    };
    let slack = opts.participation_slack;
    if producer_at(lo)? < floor - slack {
        return Ok(None);
    }
    if producer_at(hi)? >= floor - slack {
        return Ok(Some(hi));
    }
    // monotonicity spot check; fall back to a fine scan if it fails
    let probe = linspace(lo, hi, 9);
    let pv: Vec<f64> = probe
        .iter()
        .map(|&x| producer_at(x))
        .collect::<Result<_>>()?;
    let monotone = pv.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    if monotone {
        let mut a = lo;
        let mut b = hi;
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if producer_at(m)? >= floor - slack {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(Some(a))
    } else {
        let xs = linspace(lo, hi, opts.inner_grid.max(64));
        let mut cap = lo;
        for &x in &xs {
            if producer_at(x)? >= floor - slack {
                cap = cap.max(x);
            }
        }
        Ok(Some(cap))
    }
}

/// Insurer profit maximized over premiums that keep the producer
/// participating at this theta.
fn dictatorial_inner(
    pm: &PopulationMeasure,
    theta: f64,
    floor: f64,
    opts: &SolverOptions,
) -> Result<Option<(f64, f64)>> {
    let r = pm.incidence();
    let lo = theta * r;
    let mut cap = match participation_cap(pm, theta, floor, opts)? {
        Some(c) => c,
        None => return Ok(None),
    };
    if let Some(demand_cap) = premium_support_cap(pm, theta, lo, theta)? {
        cap = cap.min(demand_cap);
    } else {
        return Ok(Some((lo, 0.0)));
    }
    if cap <= lo {
        return Ok(Some((lo, insurer_profit_at(pm, theta, lo)?)));
    }
    let xs = linspace(lo, cap, opts.inner_grid.max(8));
    let mut vals = Vec::with_capacity(xs.len());
    for &x in &xs {
        vals.push(insurer_profit_at(pm, theta, x)?);
    }
    let sm = maximize_on_grid(
        |x| insurer_profit_at(pm, theta, x).unwrap_or(f64::NEG_INFINITY),
        &xs,
        &vals,
        opts.refine_top.max(3),
        opts.premium_tol * theta,
    );
    Ok(Some((sm.x.min(cap), sm.value)))
}

/// Insurer-optimal equilibrium sustained by an entry-refusal threat: maximize
/// insurer profit subject to the producer earning at least the no-insurance
/// supremum. Returns the baseline outcome when no price-premium pair is
/// feasible.
pub fn dictatorial(pm: &PopulationMeasure, opts: &SolverOptions) -> Result<EquilibriumResult> {
    require_density(pm, "dictatorial search")?;
    let base = baseline(pm, opts)?;
    let floor = base.profits.producer;
    let dom = theta_domain(pm, opts)?;
    let xs = theta_grid(&dom, opts.outer_grid);
    let vals: Vec<f64> = crate::parallel::try_map(&xs, |&t| {
        dictatorial_inner(pm, t, floor, opts)
            .map(|o| o.map(|(_, v)| v).unwrap_or(f64::NEG_INFINITY))
    })?;
    if vals.iter().all(|v| !v.is_finite() || *v <= 0.0) {
        let mut out = base;
        out.diagnostics.notes.push(
            "no feasible dictatorial point: insurer entry cannot hold producer participation"
                .to_string(),
        );
        return Ok(out);
    }
    let sm = maximize_on_grid(
        |t| {
            dictatorial_inner(pm, t, floor, opts)
                .map(|o| o.map(|(_, v)| v).unwrap_or(f64::NEG_INFINITY))
                .unwrap_or(f64::NEG_INFINITY)
        },
        &xs,
        &vals,
        opts.refine_top,
        opts.price_tol * pm.psi_scale().max(dom.theta_min),
    );
    // the refined point can land a hair past the feasibility edge; fall back
    // to the best feasible grid point in that case
    let mut theta = sm.x;
    let mut inner = dictatorial_inner(pm, theta, floor, opts)?;
    if inner.is_none() {
        let best_idx = (0..xs.len())
            .filter(|&i| vals[i].is_finite())
            .max_by(|&a, &b| vals[a].total_cmp(&vals[b]))
            .expect("a feasible grid point exists");
        theta = xs[best_idx];
        inner = dictatorial_inner(pm, theta, floor, opts)?;
    }
    let (premium, _) = inner
        .ok_or_else(|| Error::numeric("refined dictatorial point became infeasible", 0.0))?;
    let prices = PricePair {
        theta,
        premium: Premium::Quoted(premium),
    };
    let masses = region_masses(pm, &prices)?;
    let profits = profits_from_masses(pm.incidence(), &prices, &masses);
    let mut diagnostics = base_diagnostics(&dom, pm, opts);
    diagnostics.refined_brackets = sm.refined;
    let mut candidates = Vec::with_capacity(sm.candidates.len());
    for &(t, v) in &sm.candidates {
        if let Some((pr, pi)) = dictatorial_inner(pm, t, floor, opts)? {
            let prices = PricePair {
                theta: t,
                premium: Premium::Quoted(pr),
            };
            let m = region_masses(pm, &prices)?;
            candidates.push(Candidate {
                theta: t,
                premium: Premium::Quoted(pr),
                producer: profits_from_masses(pm.incidence(), &prices, &m).producer,
                insurer: pi.max(v),
            });
        }
    }
    Ok(EquilibriumResult {
        kind: EquilibriumKind::Dictatorial,
        theta,
        premium: Premium::Quoted(premium),
        masses,
        profits,
        candidates,
        diagnostics,
    })
}

/// Baseline and subgame-perfect outcomes plus the derived price, access and
/// profit effects of insurer entry.
pub fn compare(pm: &PopulationMeasure, opts: &SolverOptions) -> Result<ComparisonReport> {
    require_density(pm, "comparison")?;
    let base = baseline(pm, opts)?;
    let eq = spne(pm, opts)?;
    let price_effect = eq.theta - base.theta;
    let access_effect = eq.masses.coverage() - base.masses.out_of_pocket;
    let producer_gain = eq.profits.producer - base.profits.producer;
    let insurer_profit = eq.profits.insurer;
    Ok(ComparisonReport {
        baseline: base,
        with_insurer: eq,
        price_effect,
        access_effect,
        producer_gain,
        insurer_profit,
    })
}

/// Trace of best-response points that clear the producer-participation bar:
/// the candidate set containing every equilibrium outcome. Useful for
/// plotting and for locating the insurer-optimal equilibrium.
pub fn kprime_scan(
    pm: &PopulationMeasure,
    thetas: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<KPrimePoint>> {
    require_density(pm, "equilibrium-set scan")?;
    let floor = baseline(pm, opts)?.profits.producer;
    let slack = opts.participation_slack;
    let points: Vec<Option<KPrimePoint>> =
        crate::parallel::try_map(thetas, |&theta| -> Result<Option<KPrimePoint>> {
            if !(theta > 0.0) {
                return Ok(None);
            }
            let br = best_response(pm, theta, opts)?;
            let prices = PricePair {
                theta,
                premium: br.premium,
            };
            let masses = region_masses(pm, &prices)?;
            let pr = profits_from_masses(pm.incidence(), &prices, &masses);
            if pr.producer >= floor - slack {
                Ok(Some(KPrimePoint {
                    theta,
                    premium: br.premium,
                    producer: pr.producer,
                    insurer: pr.insurer,
                }))
            } else {
                Ok(None)
            }
        })?;
    Ok(points.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Marginal;

    fn beta_exp(s1: f64, s2: f64, lambda: f64, r: f64) -> PopulationMeasure {
        PopulationMeasure::product(
            Marginal::beta(s1, s2).unwrap(),
            Marginal::exponential(lambda).unwrap(),
            r,
        )
        .unwrap()
    }

    fn quick() -> SolverOptions {
        SolverOptions {
            outer_grid: 192,
            inner_grid: 192,
            ..SolverOptions::default()
        }
    }

    #[test]
    fn best_response_needs_positive_theta() {
        let pm = beta_exp(2.0, 3.0, 1.0, 0.3);
        assert!(best_response(&pm, 0.0, &quick()).is_err());
        assert!(best_response(&pm, -1.0, &quick()).is_err());
    }

    #[test]
    fn best_response_interior_for_density() {
        let pm = beta_exp(2.0, 3.0, 1.0, 0.3);
        for theta in [0.5, 1.0, 1.5] {
            let br = best_response(&pm, theta, &quick()).unwrap();
            let x = br.premium.quoted().expect("entry");
            assert!(x > theta * 0.3 + 1e-9 && x < theta - 1e-9, "premium {x}");
            assert!(br.insurer_profit > 0.0);
            assert!(br.is_interior);
            assert!(br.stationarity_residual < 1e-4, "{}", br.stationarity_residual);
        }
    }

    #[test]
    fn best_response_matches_reference_pairing() {
        let pm = beta_exp(2.0, 3.0, 1.0, 0.3);
        let br = best_response(&pm, 1.113, &SolverOptions::default()).unwrap();
        let x = br.premium.quoted().unwrap();
        assert!((x - 0.540).abs() < 0.01, "premium {x}");
    }

    #[test]
    fn best_response_single_atom_extracts_full_value() {
        // one agent type (p, x) with theta in (x, p x / r): the optimal
        // premium is the agent's full expected value p * x
        let pm = PopulationMeasure::planar_atoms(vec![(0.6, 2.0, 1.0)], 0.3).unwrap();
        let theta = 2.5; // inside (2, 0.6 * 2 / 0.3 = 4)
        let br = best_response(&pm, theta, &SolverOptions::default()).unwrap();
        let x = br.premium.quoted().unwrap();
        assert!((x - 1.2).abs() < 1e-4, "premium {x}");
        assert!((br.insurer_profit - (1.2 - theta * 0.3)).abs() < 1e-4);
    }

    #[test]
    fn no_entry_when_no_premium_profits() {
        // nobody believes in a diagnosis strongly enough: p support below r
        let pm = PopulationMeasure::product(
            Marginal::uniform(0.0, 0.1).unwrap(),
            Marginal::exponential(1.0).unwrap(),
            0.3,
        )
        .unwrap();
        let br = best_response(&pm, 1.0, &quick()).unwrap();
        assert_eq!(br.premium, Premium::NoEntry);
        assert_eq!(br.insurer_profit, 0.0);
    }

    #[test]
    fn baseline_exp_closed_form() {
        // theta * exp(-lambda theta) peaks at 1 / lambda
        for lambda in [1.0, 2.0] {
            let pm = beta_exp(2.0, 2.0, lambda, 0.3);
            let res = baseline(&pm, &quick()).unwrap();
            assert!((res.theta - 1.0 / lambda).abs() < 1e-4, "theta {}", res.theta);
            let expect = 0.3 / lambda * (-1.0f64).exp();
            assert!((res.profits.producer - expect).abs() < 1e-6);
            assert_eq!(res.premium, Premium::NoEntry);
        }
    }

    #[test]
    fn baseline_pareto_support_edge() {
        let pm = PopulationMeasure::product(
            Marginal::beta(2.0, 2.0).unwrap(),
            Marginal::pareto(1.0, 2.0).unwrap(),
            0.3,
        )
        .unwrap();
        let res = baseline(&pm, &quick()).unwrap();
        assert!((res.theta - 1.0).abs() < 1e-4, "theta {}", res.theta);
        assert!((res.profits.producer - 0.3).abs() < 1e-4);
    }

    #[test]
    fn spne_rejects_atomic() {
        let pm = PopulationMeasure::planar_atoms(vec![(0.6, 2.0, 1.0)], 0.3).unwrap();
        let err = spne(&pm, &quick()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(err.to_string().contains("smooth_atoms"));
    }

    #[test]
    fn spne_reference_row() {
        let pm = beta_exp(2.0, 3.0, 1.0, 0.3);
        let res = spne(&pm, &SolverOptions::default()).unwrap();
        assert!((res.theta - 1.113).abs() < 0.01, "theta {}", res.theta);
        let premium = res.premium.quoted().unwrap();
        assert!((premium - 0.540).abs() < 0.01, "premium {premium}");
        assert!(res.profits.insurer > 0.0);
        assert!(res.diagnostics.tail_bound_met);
        assert!(!res.diagnostics.non_certified);
    }

    #[test]
    fn spne_dominates_baseline() {
        for (s1, lam) in [(2.0, 1.0), (0.5, 1.0), (5.0, 2.0)] {
            let pm = beta_exp(s1, 2.0, lam, 0.3);
            let eq = spne(&pm, &quick()).unwrap();
            let base = baseline(&pm, &quick()).unwrap();
            assert!(
                eq.profits.producer >= base.profits.producer - 1e-6,
                "s1={s1} lam={lam}: {} vs {}",
                eq.profits.producer,
                base.profits.producer
            );
        }
    }

    #[test]
    fn dictatorial_reference_row() {
        let pm = beta_exp(2.0, 2.0, 1.0, 0.3);
        let res = dictatorial(&pm, &SolverOptions::default()).unwrap();
        assert_eq!(res.kind, EquilibriumKind::Dictatorial);
        assert!((res.theta - 1.328).abs() < 0.01, "theta {}", res.theta);
        let premium = res.premium.quoted().unwrap();
        assert!((premium - 0.707).abs() < 0.01, "premium {premium}");
        assert!((res.profits.insurer - 0.051).abs() < 0.006);
        // participation holds
        assert!(res.profits.producer >= 0.3 / std::f64::consts::E - 1e-6);
    }

    #[test]
    fn dictatorial_insurer_beats_spne_insurer() {
        let pm = beta_exp(2.0, 2.0, 1.0, 0.3);
        let d = dictatorial(&pm, &quick()).unwrap();
        let s = spne(&pm, &quick()).unwrap();
        assert!(d.profits.insurer >= s.profits.insurer - 1e-6);
    }

    #[test]
    fn compare_reports_positive_gain() {
        let pm = beta_exp(2.0, 3.0, 1.0, 0.3);
        let rep = compare(&pm, &quick()).unwrap();
        assert!(rep.producer_gain >= -1e-6);
        assert!(rep.insurer_profit > 0.0);
        assert!((rep.price_effect - (rep.with_insurer.theta - rep.baseline.theta)).abs() < 1e-12);
    }

    #[test]
    fn kprime_contains_spne_and_bounds_insurer_profit() {
        let pm = beta_exp(2.0, 3.0, 1.0, 0.3);
        let opts = quick();
        let eq = spne(&pm, &opts).unwrap();
        let thetas: Vec<f64> = (1..=60).map(|i| 0.05 * i as f64).collect();
        let scan = kprime_scan(&pm, &thetas, &opts).unwrap();
        assert!(!scan.is_empty());
        // the scan's best insurer profit is at least the SPNE insurer profit
        // (maximizing over a superset of outcomes)
        let best_pi = scan.iter().map(|p| p.insurer).fold(f64::MIN, f64::max);
        assert!(best_pi >= eq.profits.insurer - 1e-3);
        // every kept point clears the participation bar
        let floor = baseline(&pm, &opts).unwrap().profits.producer;
        for p in &scan {
            assert!(p.producer >= floor - 1e-6);
        }
    }
}
