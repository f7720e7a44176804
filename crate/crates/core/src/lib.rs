//! Solver library for a sequential pricing game between a monopolist
//! treatment producer, a profit-maximizing insurer, and a heterogeneous
//! population of potential patients.
//!
//! Agents are summarized by two statistics: a subjective diagnosis
//! probability `p` in [0, 1] and a reservation price `psi` for treatment
//! upon diagnosis. Given a treatment price and an insurance premium, the
//! population splits into insured, out-of-pocket and no-access fractions;
//! those fractions drive both players' profits. The crate computes these
//! region masses (exactly, by quadrature, or by Monte Carlo), the insurer's
//! best response, subgame-perfect and insurer-optimal equilibria, and the
//! no-insurance benchmark, plus a multi-period reduction of richer agent
//! descriptions down to (p, psi).
//!
//! ```
//! use premia::{Marginal, PopulationMeasure, SolverOptions, spne};
//!
//! let pm = PopulationMeasure::product(
//!     Marginal::beta(2.0, 3.0)?,
//!     Marginal::exponential(1.0)?,
//!     0.3,
//! )?;
//! let eq = spne(&pm, &SolverOptions::quick())?;
//! assert!(eq.profits.producer > 0.0 && eq.profits.insurer > 0.0);
//! # Ok::<(), premia::Error>(())
//! ```

// `!(x > 0.0)`-style guards deliberately treat NaN as out of range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod distributions;
pub mod error;
pub mod lifecycle;
pub mod num;
pub(crate) mod parallel;
pub mod payoffs;
pub mod population;
pub mod rng;
pub mod solver;
pub mod sweep;

pub use distributions::{Marginal, PopulationForm, PopulationMeasure, WeightedAtom, WeightedPatch};
pub use error::{Error, Result};
pub use payoffs::{in_delta, no_insurer_profit, profits, profits_from_masses, ProfitPair};
pub use population::{
    boundary_atoms, classify, mc_region_masses, region_masses, Choice, Premium, PricePair,
    RegionMasses,
};
pub use rng::Rng;
pub use solver::{
    baseline, best_response, compare, dictatorial, kprime_scan, spne, BestResponse, Candidate,
    ComparisonReport, EquilibriumKind, EquilibriumResult, KPrimePoint, SearchDiagnostics,
    SolverOptions,
};
