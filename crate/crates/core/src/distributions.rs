//! Parametric marginal distributions, their products, and weighted-atom
//! populations over the (p, psi) plane.
//!
//! `p` is an agent's subjective one-period diagnosis probability (lives in
//! [0, 1]); `psi` is the reservation price for treatment upon diagnosis
//! (lives in R+). A population is a probability measure over that plane plus
//! the statistical incidence rate `r`.

use crate::error::{Error, Result};
use crate::num;
use crate::rng::Rng;
use serde::Serialize;

/// Tolerance for atom weights summing to one.
const WEIGHT_TOL: f64 = 1e-12;

/// A one-dimensional marginal distribution. Build through the validating
/// constructors (`beta`, `exponential`, ...), not variant literals.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    /// Beta(shape1, shape2) on [0, 1]. `ln_norm` caches ln B(shape1, shape2),
    /// so this variant cannot be constructed literally downstream.
    #[non_exhaustive]
    Beta {
        shape1: f64,
        shape2: f64,
        ln_norm: f64,
    },
    /// Exponential with the given rate, on R+.
    Exponential { rate: f64 },
    /// Pareto with density 1[x >= scale] * shape * scale^shape / x^(shape+1).
    Pareto { scale: f64, shape: f64 },
    /// Uniform on [lo, hi].
    UniformInterval { lo: f64, hi: f64 },
    /// Finite mixture of point masses; locations strictly increasing.
    AtomMixture { atoms: Vec<(f64, f64)> },
}

impl Marginal {
    pub fn beta(shape1: f64, shape2: f64) -> Result<Self> {
        if !(shape1 > 0.0 && shape2 > 0.0) || !shape1.is_finite() || !shape2.is_finite() {
            return Err(Error::invalid(format!(
                "beta shapes must be positive finite, got ({shape1}, {shape2})"
            )));
        }
        Ok(Marginal::Beta {
            shape1,
            shape2,
            ln_norm: num::ln_beta(shape1, shape2),
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Marginal::Exponential { rate })
    }

    pub fn pareto(scale: f64, shape: f64) -> Result<Self> {
        if !(scale > 0.0 && shape > 0.0) || !scale.is_finite() || !shape.is_finite() {
            return Err(Error::invalid(format!(
                "pareto scale and shape must be positive, got ({scale}, {shape})"
            )));
        }
        Ok(Marginal::Pareto { scale, shape })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("uniform needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Marginal::UniformInterval { lo, hi })
    }

    /// Atom locations may arrive unsorted; duplicates are merged.
    pub fn atoms(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("atom mixture needs at least one atom"));
        }
        for &(x, w) in &atoms {
            if !x.is_finite() || !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!("bad atom ({x}, {w})")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if (x - last.0).abs() <= WEIGHT_TOL => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid(format!(
                "atom weights must sum to 1 (got {total})"
            )));
        }
        Ok(Marginal::AtomMixture { atoms: merged })
    }

    /// `P[X <= x]`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::domain(format!("cdf argument must be finite, got {x}")));
        }
        Ok(self.cdf_unchecked(x))
    }

    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        match self {
            Marginal::Beta {
                shape1,
                shape2,
                ln_norm,
            } => num::reg_inc_beta_ln(*shape1, *shape2, *ln_norm, x),
            Marginal::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Marginal::Pareto { scale, shape } => {
                if x <= *scale {
                    0.0
                } else {
                    1.0 - (scale / x).powf(*shape)
                }
            }
            Marginal::UniformInterval { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::AtomMixture { atoms } => {
                atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum()
            }
        }
    }

    /// `P[X > x]`. For atom mixtures this is the strict tail, so that atomic
    /// populations represent the boundary cases of the game exactly.
    pub fn survival(&self, x: f64) -> f64 {
        match self {
            Marginal::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Marginal::Pareto { scale, shape } => {
                if x <= *scale {
                    1.0
                } else {
                    (scale / x).powf(*shape)
                }
            }
            Marginal::AtomMixture { atoms } => {
                atoms.iter().filter(|a| a.0 > x).map(|a| a.1).sum()
            }
            _ => 1.0 - self.cdf_unchecked(x),
        }
    }

    /// Density, where one exists. Atom mixtures have none and return an error.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        match self {
            Marginal::Beta {
                shape1,
                shape2,
                ln_norm,
            } => {
                if !(0.0..=1.0).contains(&x) {
                    return Ok(0.0);
                }
                if x == 0.0 || x == 1.0 {
                    // infinite-endpoint cases excluded by callers
                    return Ok(match () {
                        _ if x == 0.0 && *shape1 < 1.0 => f64::INFINITY,
                        _ if x == 0.0 && *shape1 == 1.0 => *shape2,
                        _ if x == 1.0 && *shape2 < 1.0 => f64::INFINITY,
                        _ if x == 1.0 && *shape2 == 1.0 => *shape1,
                        _ => 0.0,
                    });
                }
                let ln =
                    (shape1 - 1.0) * x.ln() + (shape2 - 1.0) * (1.0 - x).ln() - ln_norm;
                Ok(ln.exp())
            }
            Marginal::Exponential { rate } => {
                Ok(if x < 0.0 { 0.0 } else { rate * (-rate * x).exp() })
            }
            Marginal::Pareto { scale, shape } => Ok(if x < *scale {
                0.0
            } else {
                shape * scale.powf(*shape) / x.powf(shape + 1.0)
            }),
            Marginal::UniformInterval { lo, hi } => Ok(if x < *lo || x > *hi {
                0.0
            } else {
                1.0 / (hi - lo)
            }),
            Marginal::AtomMixture { .. } => {
                Err(Error::domain("atom mixture has no density"))
            }
        }
    }

    /// inf{x : cdf(x) >= q}. `q` must lie in [0, 1); q = 1 is accepted only
    /// for bounded-support marginals.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::domain(format!("quantile level {q} outside [0, 1]")));
        }
        if q == 1.0 {
            return match self.support_max() {
                Some(hi) => Ok(hi),
                None => Err(Error::domain(
                    "quantile level 1 undefined for unbounded support",
                )),
            };
        }
        Ok(match self {
            Marginal::Beta { .. } => self.quantile_by_inversion(q),
            Marginal::Exponential { rate } => -(-q).ln_1p() / rate,
            Marginal::Pareto { scale, shape } => scale * (1.0 - q).powf(-1.0 / shape),
            Marginal::UniformInterval { lo, hi } => lo + q * (hi - lo),
            Marginal::AtomMixture { atoms } => {
                let mut acc = 0.0;
                let mut x = atoms[atoms.len() - 1].0;
                for &(loc, w) in atoms {
                    acc += w;
                    if acc >= q {
                        x = loc;
                        break;
                    }
                }
                x
            }
        })
    }

    /// Monotone-safeguarded Newton on the cdf, started from a bisection
    /// bracket. Deterministic and rejection-free, which keeps sampling
    /// reproducible under a seeded stream.
    fn quantile_by_inversion(&self, q: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        if q <= 0.0 {
            return 0.0;
        }
        // a few bisection steps to localize
        for _ in 0..8 {
            let mid = 0.5 * (lo + hi);
            if self.cdf_unchecked(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..60 {
            let fx = self.cdf_unchecked(x) - q;
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let dfx = self.pdf(x).unwrap_or(0.0);
            let mut next = if dfx > 1e-300 { x - fx / dfx } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() < 1e-15 {
                return next;
            }
            x = next;
        }
        x
    }

    /// i.i.d. draws, deterministic given the stream state. Beta draws go
    /// through a precomputed quantile grid plus a safeguarded Newton polish,
    /// which keeps batch sampling cheap without leaving the inverse-cdf path.
    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::domain("sample count must be at least 1"));
        }
        let mut out = Vec::with_capacity(n);
        if matches!(self, Marginal::Beta { .. }) {
            let knots = self.quantile_knots(2048);
            for _ in 0..n {
                let u = rng.uniform();
                out.push(self.invert_with_knots(&knots, u));
            }
        } else {
            for _ in 0..n {
                out.push(self.sample_one(rng));
            }
        }
        Ok(out)
    }

    fn quantile_knots(&self, k: usize) -> Vec<f64> {
        (0..=k)
            .map(|i| self.quantile_by_inversion(i as f64 / k as f64))
            .collect()
    }

    fn invert_with_knots(&self, knots: &[f64], u: f64) -> f64 {
        let k = knots.len() - 1;
        let idx = ((u * k as f64) as usize).min(k - 1);
        let (mut lo, mut hi) = (knots[idx], knots[idx + 1]);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..24 {
            let f = self.cdf_unchecked(x) - u;
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.pdf(x).unwrap_or(0.0);
            let mut next = if d > 1e-300 { x - f / d } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() < 1e-14 {
                return next;
            }
            x = next;
        }
        x
    }

    pub(crate) fn sample_one(&self, rng: &mut Rng) -> f64 {
        let u = rng.uniform();
        match self {
            Marginal::Beta { .. } => self.quantile_by_inversion(u),
            Marginal::Exponential { rate } => -(-u).ln_1p() / rate,
            Marginal::Pareto { scale, shape } => scale * (1.0 - u).powf(-1.0 / shape),
            Marginal::UniformInterval { lo, hi } => lo + u * (hi - lo),
            Marginal::AtomMixture { atoms } => {
                let mut acc = 0.0;
                for &(loc, w) in atoms {
                    acc += w;
                    if u < acc {
                        return loc;
                    }
                }
                atoms[atoms.len() - 1].0
            }
        }
    }

    /// Upper end of the support, when bounded.
    pub fn support_max(&self) -> Option<f64> {
        match self {
            Marginal::Beta { .. } => Some(1.0),
            Marginal::UniformInterval { hi, .. } => Some(*hi),
            Marginal::AtomMixture { atoms } => Some(atoms[atoms.len() - 1].0),
            _ => None,
        }
    }

    /// Lower end of the support.
    pub fn support_min(&self) -> f64 {
        match self {
            Marginal::Beta { .. } => 0.0,
            Marginal::Exponential { .. } => 0.0,
            Marginal::Pareto { scale, .. } => *scale,
            Marginal::UniformInterval { lo, .. } => *lo,
            Marginal::AtomMixture { atoms } => atoms[0].0,
        }
    }

    /// Points where the survival function is not smooth, used to pre-split
    /// quadrature panels.
    pub(crate) fn survival_kinks(&self) -> Vec<f64> {
        match self {
            Marginal::Pareto { scale, .. } => vec![*scale],
            Marginal::UniformInterval { lo, hi } => vec![*lo, *hi],
            Marginal::AtomMixture { atoms } => atoms.iter().map(|a| a.0).collect(),
            _ => Vec::new(),
        }
    }

    /// `E[X]`, infinite for Pareto with shape <= 1.
    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Beta { shape1, shape2, .. } => shape1 / (shape1 + shape2),
            Marginal::Exponential { rate } => 1.0 / rate,
            Marginal::Pareto { scale, shape } => {
                if *shape <= 1.0 {
                    f64::INFINITY
                } else {
                    shape * scale / (shape - 1.0)
                }
            }
            Marginal::UniformInterval { lo, hi } => 0.5 * (lo + hi),
            Marginal::AtomMixture { atoms } => atoms.iter().map(|a| a.0 * a.1).sum(),
        }
    }

    fn supported_within(&self, lo: f64, hi: f64) -> bool {
        let smin = self.support_min();
        let smax = self.support_max();
        smin >= lo && smax.map_or(hi.is_infinite(), |m| m <= hi)
    }
}

/// A point mass in the (p, psi) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedAtom {
    pub p: f64,
    pub psi: f64,
    pub weight: f64,
}

/// Axis-aligned rectangle carrying a uniform patch of probability mass;
/// produced by smoothing planar atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedPatch {
    pub p_lo: f64,
    pub p_hi: f64,
    pub psi_lo: f64,
    pub psi_hi: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PopulationForm {
    /// Independent marginals: mu_p on [0, 1] times mu_psi on R+.
    Product { p: Marginal, psi: Marginal },
    /// Weighted Dirac atoms in the plane.
    PlanarAtoms(Vec<WeightedAtom>),
    /// Uniform rectangles, the smoothed version of planar atoms.
    SmoothedAtoms(Vec<WeightedPatch>),
}

/// Distribution of agent characteristics plus the statistical incidence rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMeasure {
    form: PopulationForm,
    incidence: f64,
}

impl PopulationMeasure {
    pub fn product(p: Marginal, psi: Marginal, incidence: f64) -> Result<Self> {
        if !p.supported_within(0.0, 1.0) {
            return Err(Error::invalid(
                "p-marginal must be supported within [0, 1]",
            ));
        }
        if psi.support_min() < 0.0 {
            return Err(Error::invalid("psi-marginal must be supported within R+"));
        }
        let pm = PopulationMeasure {
            form: PopulationForm::Product { p, psi },
            incidence,
        };
        pm.validate()?;
        Ok(pm)
    }

    /// Atoms are (p, psi, weight); weights must sum to 1. Duplicate locations
    /// merge (within 1e-12).
    pub fn planar_atoms(atoms: Vec<(f64, f64, f64)>, incidence: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("population needs at least one atom"));
        }
        let mut list: Vec<WeightedAtom> = Vec::with_capacity(atoms.len());
        for (p, psi, weight) in atoms {
            if !(0.0..=1.0).contains(&p) || psi < 0.0 || weight < 0.0 {
                return Err(Error::invalid(format!("bad atom ({p}, {psi}, {weight})")));
            }
            if let Some(existing) = list
                .iter_mut()
                .find(|a| (a.p - p).abs() <= WEIGHT_TOL && (a.psi - psi).abs() <= WEIGHT_TOL)
            {
                existing.weight += weight;
            } else {
                list.push(WeightedAtom { p, psi, weight });
            }
        }
        let total: f64 = list.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid(format!("atom weights must sum to 1 (got {total})")));
        }
        list.sort_by(|a, b| (a.p, a.psi).partial_cmp(&(b.p, b.psi)).unwrap());
        let pm = PopulationMeasure {
            form: PopulationForm::PlanarAtoms(list),
            incidence,
        };
        pm.validate()?;
        Ok(pm)
    }

    fn validate(&self) -> Result<()> {
        if !(self.incidence > 0.0 && self.incidence < 1.0) {
            return Err(Error::invalid(format!(
                "incidence rate must lie strictly inside (0, 1), got {}",
                self.incidence
            )));
        }
        if self.psi_survival(0.0) <= 0.0 {
            return Err(Error::invalid(
                "population carries no profit potential: psi = 0 almost surely",
            ));
        }
        Ok(())
    }

    pub fn form(&self) -> &PopulationForm {
        &self.form
    }

    pub fn incidence(&self) -> f64 {
        self.incidence
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.form, PopulationForm::PlanarAtoms(_))
    }

    /// True when region masses are computed from densities (product or
    /// smoothed form), which is what the equilibrium solvers require.
    pub fn has_density_form(&self) -> bool {
        match &self.form {
            PopulationForm::Product { p, psi } => {
                !matches!(p, Marginal::AtomMixture { .. })
                    && !matches!(psi, Marginal::AtomMixture { .. })
            }
            PopulationForm::SmoothedAtoms(_) => true,
            PopulationForm::PlanarAtoms(_) => false,
        }
    }

    /// Replace each planar atom with a uniform square of side 2*radius
    /// centred on it, clipped to [0, 1] x R+. Weights are preserved.
    pub fn smooth_atoms(&self, radius: f64) -> Result<PopulationMeasure> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain(format!("smoothing radius must be positive, got {radius}")));
        }
        let atoms = match &self.form {
            PopulationForm::PlanarAtoms(atoms) => atoms,
            _ => {
                return Err(Error::precondition(
                    "smooth_atoms applies to planar-atom populations only",
                ))
            }
        };
        let patches = atoms
            .iter()
            .map(|a| WeightedPatch {
                p_lo: (a.p - radius).max(0.0),
                p_hi: (a.p + radius).min(1.0),
                psi_lo: (a.psi - radius).max(0.0),
                psi_hi: a.psi + radius,
                weight: a.weight,
            })
            .collect();
        let pm = PopulationMeasure {
            form: PopulationForm::SmoothedAtoms(patches),
            incidence: self.incidence,
        };
        pm.validate()?;
        Ok(pm)
    }

    /// Marginal tail `P[psi > x]` of the population.
    pub fn psi_survival(&self, x: f64) -> f64 {
        match &self.form {
            PopulationForm::Product { psi, .. } => psi.survival(x),
            PopulationForm::PlanarAtoms(atoms) => {
                atoms.iter().filter(|a| a.psi > x).map(|a| a.weight).sum()
            }
            PopulationForm::SmoothedAtoms(patches) => patches
                .iter()
                .map(|r| {
                    let h = r.psi_hi - r.psi_lo;
                    if h <= 0.0 {
                        if r.psi_lo > x {
                            r.weight
                        } else {
                            0.0
                        }
                    } else {
                        r.weight * ((r.psi_hi - x).clamp(0.0, h) / h)
                    }
                })
                .sum(),
        }
    }

    /// Quantile of the psi-marginal (smallest x with `P[psi <= x] >= q`).
    pub fn psi_quantile(&self, q: f64) -> Result<f64> {
        match &self.form {
            PopulationForm::Product { psi, .. } => psi.quantile(q),
            PopulationForm::PlanarAtoms(atoms) => {
                let mut sorted: Vec<(f64, f64)> = atoms.iter().map(|a| (a.psi, a.weight)).collect();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                Marginal::atoms(sorted)?.quantile(q)
            }
            PopulationForm::SmoothedAtoms(patches) => {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::domain(format!("quantile level {q} outside [0, 1]")));
                }
                let hi = patches.iter().map(|r| r.psi_hi).fold(0.0, f64::max);
                if q >= 1.0 {
                    return Ok(hi);
                }
                let target = 1.0 - q;
                Ok(num::bisect_boundary(
                    |x| self.psi_survival(x) <= target,
                    0.0,
                    hi,
                    80,
                ))
            }
        }
    }

    /// A characteristic monetary scale of the psi-marginal; positive for any
    /// population with profit potential.
    pub fn psi_scale(&self) -> f64 {
        for q in [0.5, 0.9, 0.99, 0.999] {
            if let Ok(v) = self.psi_quantile(q) {
                if v > 0.0 && v.is_finite() {
                    return v;
                }
            }
        }
        1.0
    }

    /// `E[psi]`; infinite when the psi-marginal has a fat enough tail. Used to
    /// flag searches that leave the regime where equilibria are guaranteed.
    pub fn psi_mean(&self) -> f64 {
        match &self.form {
            PopulationForm::Product { psi, .. } => psi.mean(),
            PopulationForm::PlanarAtoms(atoms) => {
                atoms.iter().map(|a| a.psi * a.weight).sum()
            }
            PopulationForm::SmoothedAtoms(patches) => patches
                .iter()
                .map(|r| r.weight * 0.5 * (r.psi_lo + r.psi_hi))
                .sum(),
        }
    }

    /// Draw one (p, psi) pair.
    pub fn sample_one(&self, rng: &mut Rng) -> (f64, f64) {
        match &self.form {
            PopulationForm::Product { p, psi } => (p.sample_one(rng), psi.sample_one(rng)),
            PopulationForm::PlanarAtoms(atoms) => {
                let u = rng.uniform();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        return (a.p, a.psi);
                    }
                }
                let a = &atoms[atoms.len() - 1];
                (a.p, a.psi)
            }
            PopulationForm::SmoothedAtoms(patches) => {
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut chosen = &patches[patches.len() - 1];
                for r in patches {
                    acc += r.weight;
                    if u < acc {
                        chosen = r;
                        break;
                    }
                }
                (
                    rng.uniform_in(chosen.p_lo, chosen.p_hi),
                    rng.uniform_in(chosen.psi_lo, chosen.psi_hi),
                )
            }
        }
    }
}
