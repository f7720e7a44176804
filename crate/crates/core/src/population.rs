//! Agent decision rules and the measure of each decision region.
//!
//! At prices (theta, premium) an agent (p, psi) picks one of three choices:
//! insure, buy treatment out of pocket upon diagnosis, or go without. The
//! fractions of the population in each region drive both profit functions.

use crate::distributions::{Marginal, PopulationForm, PopulationMeasure, WeightedPatch};
use crate::error::{Error, Result};
use crate::num;
use crate::rng::Rng;
use serde::Serialize;

/// Absolute tolerance of the region-mass quadrature.
pub const MASS_QUAD_TOL: f64 = 1e-9;
/// Maximum bisection depth of the region-mass quadrature.
pub const MASS_QUAD_DEPTH: u32 = 20;

/// The insurer's action: a quoted premium, or staying out of the market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Premium {
    Quoted(f64),
    NoEntry,
}

impl Premium {
    pub fn quoted(self) -> Option<f64> {
        match self {
            Premium::Quoted(x) => Some(x),
            Premium::NoEntry => None,
        }
    }

    pub fn is_entry(self) -> bool {
        matches!(self, Premium::Quoted(_))
    }
}

impl Serialize for Premium {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Premium::Quoted(x) => s.serialize_f64(*x),
            Premium::NoEntry => s.serialize_none(),
        }
    }
}

impl std::fmt::Display for Premium {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Premium::Quoted(x) => write!(f, "{x}"),
            Premium::NoEntry => write!(f, "no-entry"),
        }
    }
}

/// An action vector: treatment price plus the insurer's premium decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePair {
    pub theta: f64,
    pub premium: Premium,
}

impl PricePair {
    pub fn new(theta: f64, premium: f64) -> Result<Self> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::invalid(format!("treatment price must be >= 0, got {theta}")));
        }
        if !(premium >= 0.0) || !premium.is_finite() {
            return Err(Error::invalid(format!("premium must be >= 0, got {premium}")));
        }
        Ok(PricePair {
            theta,
            premium: Premium::Quoted(premium),
        })
    }

    pub fn no_entry(theta: f64) -> Result<Self> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::invalid(format!("treatment price must be >= 0, got {theta}")));
        }
        Ok(PricePair {
            theta,
            premium: Premium::NoEntry,
        })
    }
}

/// An agent's optimal choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Choice {
    /// Buy insurance now; treatment is reimbursed upon diagnosis.
    Insure,
    /// Stay uninsured, buy the treatment out of pocket upon diagnosis.
    Treat,
    /// No insurance and no treatment.
    Forgo,
}

/// Decision rule for a single agent. Indifference resolves away from
/// insuring and away from treating, so boundary agents forgo.
pub fn classify(p: f64, psi: f64, prices: &PricePair) -> Choice {
    let theta = prices.theta;
    match prices.premium {
        Premium::Quoted(premium) => {
            if p * theta > premium && p * psi > premium {
                Choice::Insure
            } else if psi > theta && p * theta <= premium {
                Choice::Treat
            } else {
                Choice::Forgo
            }
        }
        Premium::NoEntry => {
            if psi > theta {
                Choice::Treat
            } else {
                Choice::Forgo
            }
        }
    }
}

/// Population fractions of the three decision regions. Components sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionMasses {
    /// Fraction insuring.
    pub insured: f64,
    /// Fraction buying treatment out of pocket upon diagnosis.
    pub out_of_pocket: f64,
    /// Fraction without access to treatment.
    pub no_access: f64,
}

impl RegionMasses {
    fn closing(insured: f64, out_of_pocket: f64) -> Self {
        let insured = insured.clamp(0.0, 1.0);
        let out_of_pocket = out_of_pocket.clamp(0.0, 1.0 - insured);
        RegionMasses {
            insured,
            out_of_pocket,
            no_access: (1.0 - insured - out_of_pocket).max(0.0),
        }
    }

    /// Fraction with access to treatment if diagnosed.
    pub fn coverage(&self) -> f64 {
        self.insured + self.out_of_pocket
    }
}

/// Exact or quadrature evaluation of the three region masses.
///
/// Product populations use the reduction (for 0 < premium < theta)
///   out_of_pocket = S_psi(theta) * F_p(premium / theta)
///   insured       = integral over p in (premium/theta, 1] of
///                   S_psi(premium / p) dmu_p(p)
/// which follows from the region inequalities: treatment requires psi >
/// theta and p * theta <= premium; insuring requires p * theta > premium and
/// p * psi > premium, and for p > premium/theta the second condition is
/// binding only below the hyperbola psi = premium / p.
pub fn region_masses(pm: &PopulationMeasure, prices: &PricePair) -> Result<RegionMasses> {
    match pm.form() {
        PopulationForm::PlanarAtoms(atoms) => {
            let mut a = 0.0;
            let mut t = 0.0;
            for atom in atoms {
                match classify(atom.p, atom.psi, prices) {
                    Choice::Insure => a += atom.weight,
                    Choice::Treat => t += atom.weight,
                    Choice::Forgo => {}
                }
            }
            Ok(RegionMasses::closing(a, t))
        }
        PopulationForm::SmoothedAtoms(patches) => {
            let mut a = 0.0;
            let mut t = 0.0;
            for r in patches {
                let (ra, rt) = patch_masses(r, prices);
                a += ra;
                t += rt;
            }
            Ok(RegionMasses::closing(a, t))
        }
        PopulationForm::Product { p, psi } => product_masses(p, psi, prices),
    }
}

fn product_masses(mu_p: &Marginal, mu_psi: &Marginal, prices: &PricePair) -> Result<RegionMasses> {
    let theta = prices.theta;
    let premium = match prices.premium {
        Premium::NoEntry => {
            let t = mu_psi.survival(theta);
            return Ok(RegionMasses::closing(0.0, t));
        }
        Premium::Quoted(x) => x,
    };
    if theta <= 0.0 || premium >= theta {
        // region A is empty: p * theta <= theta <= premium for every agent
        let t = mu_psi.survival(theta);
        return Ok(RegionMasses::closing(0.0, t));
    }
    if premium == 0.0 {
        // limit case: everyone with p > 0 and psi > 0 insures
        let a = mu_p.survival(0.0) * mu_psi.survival(0.0);
        let t = mu_psi.survival(theta) * mu_p.cdf_unchecked(0.0);
        return Ok(RegionMasses::closing(a, t));
    }

    let cut = premium / theta; // p below this cannot insure
    let t = mu_psi.survival(theta) * mu_p.cdf_unchecked(cut);

    let a = match mu_p {
        Marginal::AtomMixture { atoms } => atoms
            .iter()
            .filter(|(loc, _)| loc * theta > premium)
            .map(|(loc, w)| w * mu_psi.survival(premium / loc))
            .sum(),
        _ => {
            // integrand S_psi(premium / p) f_p(p); pre-split at survival kinks
            // mapped into p-space so each panel is smooth
            let mut cuts = vec![cut, 1.0];
            for k in mu_psi.survival_kinks() {
                if k > 0.0 {
                    let p = premium / k;
                    if p > cut && p < 1.0 {
                        cuts.push(p);
                    }
                }
            }
            if let Marginal::UniformInterval { lo, hi } = mu_p {
                for b in [*lo, *hi] {
                    if b > cut && b < 1.0 {
                        cuts.push(b);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut total = 0.0;
            for w in cuts.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                if hi - lo < 1e-300 {
                    continue;
                }
                total += num::integrate(
                    |p| mu_psi.survival(premium / p) * mu_p.pdf(p).unwrap_or(0.0),
                    lo,
                    hi,
                    MASS_QUAD_TOL * (hi - lo) / (1.0 - cut).max(1e-12),
                    MASS_QUAD_DEPTH,
                )?;
            }
            total
        }
    };
    Ok(RegionMasses::closing(a, t))
}

/// Closed-form region masses of a uniform rectangular patch.
fn patch_masses(r: &WeightedPatch, prices: &PricePair) -> (f64, f64) {
    let theta = prices.theta;
    let pw = r.p_hi - r.p_lo;
    let ph = r.psi_hi - r.psi_lo;
    if pw <= 0.0 || ph <= 0.0 {
        // degenerate patch behaves like an atom
        return match classify(0.5 * (r.p_lo + r.p_hi), 0.5 * (r.psi_lo + r.psi_hi), prices) {
            Choice::Insure => (r.weight, 0.0),
            Choice::Treat => (0.0, r.weight),
            Choice::Forgo => (0.0, 0.0),
        };
    }
    let frac_psi_above = |x: f64| ((r.psi_hi - x).clamp(0.0, ph)) / ph;
    let frac_p_below = |x: f64| ((x - r.p_lo).clamp(0.0, pw)) / pw;

    let premium = match prices.premium {
        Premium::NoEntry => {
            return (0.0, r.weight * frac_psi_above(theta));
        }
        Premium::Quoted(x) => x,
    };
    if theta <= 0.0 || premium >= theta {
        return (0.0, r.weight * frac_psi_above(theta));
    }
    let cut = premium / theta;
    let t = r.weight * frac_psi_above(theta) * frac_p_below(cut);

    // insured mass: integral over p in (max(p_lo, cut), p_hi] of the psi
    // height above premium / p, times the uniform density
    let a = if premium == 0.0 {
        // {p > 0} has full patch measure (patches have positive width)
        r.weight * frac_psi_above(0.0)
    } else {
        let lo = r.p_lo.max(cut);
        if lo >= r.p_hi {
            0.0
        } else {
            // hyperbola psi = premium / p crosses the patch between
            // p = premium / psi_hi (above which the height is positive) and
            // p = premium / psi_lo (above which the full height insures)
            let p_enter = premium / r.psi_hi;
            let p_full = if r.psi_lo > 0.0 {
                premium / r.psi_lo
            } else {
                f64::INFINITY
            };
            let seg_lo = lo.max(p_enter);
            let seg_hi = r.p_hi.min(p_full);
            let mut area = 0.0;
            if seg_hi > seg_lo {
                // height psi_hi - premium / p
                area += r.psi_hi * (seg_hi - seg_lo) - premium * (seg_hi / seg_lo).ln();
            }
            if r.p_hi > p_full {
                let from = lo.max(p_full);
                if r.p_hi > from {
                    area += ph * (r.p_hi - from);
                }
            }
            r.weight * area / (pw * ph)
        }
    };
    (a, t)
}

/// Region masses estimated by Monte Carlo, with per-component binomial
/// standard errors. The verification oracle for `region_masses`.
pub fn mc_region_masses(
    pm: &PopulationMeasure,
    prices: &PricePair,
    n: usize,
    seed: u64,
) -> Result<(RegionMasses, [f64; 3])> {
    if n < 1_000 {
        return Err(Error::domain(format!("monte carlo needs n >= 1000, got {n}")));
    }
    let mut rng = Rng::seed_from(seed);
    let mut counts = [0u64; 3];
    let mut tally = |p: f64, psi: f64| {
        let idx = match classify(p, psi, prices) {
            Choice::Insure => 0,
            Choice::Treat => 1,
            Choice::Forgo => 2,
        };
        counts[idx] += 1;
    };
    if let PopulationForm::Product { p, psi } = pm.form() {
        // batch per marginal so beta draws amortize their quantile grid
        let ps = p.sample(&mut rng, n)?;
        let psis = psi.sample(&mut rng, n)?;
        for (pv, sv) in ps.into_iter().zip(psis) {
            tally(pv, sv);
        }
    } else {
        for _ in 0..n {
            let (pv, sv) = pm.sample_one(&mut rng);
            tally(pv, sv);
        }
    }
    let nf = n as f64;
    let fracs = [
        counts[0] as f64 / nf,
        counts[1] as f64 / nf,
        counts[2] as f64 / nf,
    ];
    let se = |p: f64| (p * (1.0 - p) / nf).sqrt();
    Ok((
        RegionMasses {
            insured: fracs[0],
            out_of_pocket: fracs[1],
            no_access: fracs[2],
        },
        [se(fracs[0]), se(fracs[1]), se(fracs[2])],
    ))
}

/// Atoms lying exactly on a decision boundary at the given prices.
/// Equilibrium existence can hinge on how these resolve, so they are
/// surfaced rather than silently classified.
pub fn boundary_atoms(pm: &PopulationMeasure, prices: &PricePair) -> Vec<(f64, f64)> {
    let atoms = match pm.form() {
        PopulationForm::PlanarAtoms(atoms) => atoms,
        _ => return Vec::new(),
    };
    let theta = prices.theta;
    let mut out = Vec::new();
    for a in atoms {
        let on_treat_edge = a.psi == theta;
        let on_insure_edge = match prices.premium {
            Premium::Quoted(pr) => a.p * theta == pr || a.p * a.psi == pr,
            Premium::NoEntry => false,
        };
        if on_treat_edge || on_insure_edge {
            out.push((a.p, a.psi));
        }
    }
    out
}
