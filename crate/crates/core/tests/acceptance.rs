//! Acceptance suite: nine criteria covering reproduction of the reference
//! equilibrium tables for four distribution families, internal
//! scaling consistency, equilibrium dominance properties, the Monte Carlo
//! region oracle, qualitative insurance effects on smoothed two-atom
//! populations, and the multi-period reduction.
//!
//! Each criterion prints one PASS/FAIL line (run with `--nocapture` to see
//! them); failures additionally print per-cell diffs. Where a reference cell
//! is not reproducible from the stated model configuration, the criterion is
//! expected to stay red with the diffs documenting exactly which cells
//! disagree; the solver's own output is cross-checked by independent oracles
//! in criteria 5-8.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must register as failure

mod common;

use premia::config::{MarginalSpec, PopulationSpec, SweepParam};
use premia::sweep::{run_sweep, SweepRow};
use premia::{
    baseline, compare, mc_region_masses, no_insurer_profit, region_masses, spne, EquilibriumKind,
    Marginal, PopulationMeasure, PricePair, Rng, SolverOptions,
};
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

const PRICE_TOL: f64 = 0.01;
const MASS_TOL: f64 = 0.006;

/// Serializes the heavy phases so wall-clock budgets mean something.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_guard() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

// ---------------------------------------------------------------------------
// reference tables: param, theta*, premium*, a*, t*, o*, p_i, p_p
// ---------------------------------------------------------------------------

type Row = (f64, f64, f64, f64, f64, f64, f64, f64);

const REFERENCE_LAMBDA_SPNE: [Row; 8] = [
    (1.000, 1.113, 0.540, 0.232, 0.157, 0.611, 0.048, 0.130),
    (1.571, 0.708, 0.344, 0.232, 0.157, 0.611, 0.030, 0.083),
    (2.143, 0.519, 0.252, 0.232, 0.157, 0.611, 0.022, 0.061),
    (2.714, 0.410, 0.199, 0.232, 0.157, 0.611, 0.018, 0.048),
    (3.286, 0.339, 0.164, 0.232, 0.157, 0.611, 0.015, 0.040),
    (3.857, 0.288, 0.140, 0.232, 0.157, 0.611, 0.012, 0.034),
    (4.429, 0.251, 0.122, 0.232, 0.157, 0.611, 0.011, 0.029),
    (5.000, 0.223, 0.108, 0.232, 0.157, 0.611, 0.010, 0.026),
];

const REFERENCE_S1_SPNE: [Row; 10] = [
    (0.100, 1.008, 0.485, 0.010, 0.357, 0.633, 0.002, 0.111),
    (0.200, 1.015, 0.491, 0.021, 0.346, 0.633, 0.004, 0.112),
    (0.500, 1.041, 0.514, 0.054, 0.311, 0.636, 0.011, 0.114),
    (1.000, 1.088, 0.553, 0.105, 0.256, 0.640, 0.024, 0.118),
    (1.500, 1.133, 0.593, 0.147, 0.209, 0.644, 0.037, 0.121),
    (2.000, 1.173, 0.630, 0.180, 0.172, 0.648, 0.050, 0.124),
    (3.000, 1.239, 0.698, 0.226, 0.119, 0.654, 0.074, 0.129),
    (4.000, 1.286, 0.754, 0.254, 0.087, 0.659, 0.093, 0.131),
    (5.000, 1.316, 0.799, 0.271, 0.066, 0.663, 0.110, 0.133),
    (10.000, 1.344, 0.925, 0.305, 0.025, 0.669, 0.159, 0.133),
];

const REFERENCE_S1_DICTATORIAL: [Row; 9] = [
    (0.400, 1.321, 0.639, 0.036, 0.241, 0.724, 0.009, 0.110),
    (0.500, 1.335, 0.650, 0.044, 0.231, 0.725, 0.011, 0.110),
    (1.000, 1.332, 0.670, 0.089, 0.199, 0.712, 0.024, 0.115),
    (1.500, 1.330, 0.689, 0.130, 0.170, 0.701, 0.038, 0.119),
    (2.000, 1.328, 0.707, 0.164, 0.145, 0.691, 0.051, 0.123),
    (3.000, 1.317, 0.738, 0.215, 0.109, 0.675, 0.074, 0.128),
    (4.000, 1.306, 0.765, 0.251, 0.085, 0.665, 0.093, 0.131),
    (5.000, 1.296, 0.788, 0.275, 0.067, 0.658, 0.110, 0.133),
    (10.000, 1.238, 0.858, 0.328, 0.030, 0.642, 0.160, 0.133),
];

const REFERENCE_S2_SPNE: [Row; 10] = [
    (1.100, 1.822, 0.964, 0.335, 0.293, 0.373, 0.140, 0.343),
    (1.200, 1.683, 0.896, 0.350, 0.306, 0.343, 0.137, 0.332),
    (1.400, 1.392, 0.764, 0.378, 0.378, 0.244, 0.131, 0.316),
    (1.600, 1.158, 0.654, 0.393, 0.493, 0.114, 0.121, 0.308),
    (1.800, 1.068, 0.608, 0.396, 0.556, 0.048, 0.114, 0.305),
    (2.000, 1.041, 0.592, 0.396, 0.577, 0.026, 0.111, 0.304),
    (3.000, 1.015, 0.578, 0.396, 0.596, 0.007, 0.108, 0.302),
    (4.000, 1.010, 0.575, 0.396, 0.599, 0.004, 0.108, 0.302),
    (5.000, 1.008, 0.574, 0.396, 0.601, 0.003, 0.108, 0.302),
    (6.000, 1.007, 0.573, 0.396, 0.601, 0.002, 0.108, 0.301),
];

// ---------------------------------------------------------------------------
// shared sweep data
// ---------------------------------------------------------------------------

struct SweepData {
    lambda_rows: Vec<SweepRow>,
    lambda_elapsed: Duration,
    s1_rows: Vec<SweepRow>,
    dict_rows: Vec<SweepRow>,
    s2_rows: Vec<SweepRow>,
}

fn beta_exp_spec(s1: f64, s2: f64, lambda: f64, r: f64) -> PopulationSpec {
    PopulationSpec {
        mu_p: Some(MarginalSpec::Beta(s1, s2)),
        mu_psi: Some(MarginalSpec::Exponential(lambda)),
        atoms: None,
        incidence: r,
        radius: None,
    }
}

fn beta_pareto_spec(shape: f64, r: f64) -> PopulationSpec {
    PopulationSpec {
        mu_p: Some(MarginalSpec::Beta(2.0, 2.0)),
        mu_psi: Some(MarginalSpec::Pareto(1.0, shape)),
        atoms: None,
        incidence: r,
        radius: None,
    }
}

fn sweeps() -> &'static SweepData {
    static DATA: OnceLock<SweepData> = OnceLock::new();
    DATA.get_or_init(|| {
        let _guard = heavy_guard();
        let opts = SolverOptions::default();

        let start = Instant::now();
        let lambda = run_sweep(
            &beta_exp_spec(2.0, 3.0, 1.0, 0.3),
            SweepParam::Lambda,
            &REFERENCE_LAMBDA_SPNE.map(|r| r.0),
            EquilibriumKind::SubgamePerfect,
            &opts,
        )
        .expect("lambda sweep");
        let lambda_elapsed = start.elapsed();

        let s1 = run_sweep(
            &beta_exp_spec(2.0, 2.0, 1.0, 0.3),
            SweepParam::S1,
            &REFERENCE_S1_SPNE.map(|r| r.0),
            EquilibriumKind::SubgamePerfect,
            &opts,
        )
        .expect("s1 sweep");

        let dict = run_sweep(
            &beta_exp_spec(2.0, 2.0, 1.0, 0.3),
            SweepParam::S1,
            &REFERENCE_S1_DICTATORIAL.map(|r| r.0),
            EquilibriumKind::Dictatorial,
            &opts,
        )
        .expect("dictatorial sweep");

        let s2 = run_sweep(
            &beta_pareto_spec(2.0, 0.3),
            SweepParam::S2,
            &REFERENCE_S2_SPNE.map(|r| r.0),
            EquilibriumKind::SubgamePerfect,
            &opts,
        )
        .expect("s2 sweep");

        for (name, out) in [
            ("lambda", &lambda),
            ("s1", &s1),
            ("dict", &dict),
            ("s2", &s2),
        ] {
            assert!(
                out.failures.is_empty(),
                "{name} sweep had failures: {:?}",
                out.failures
            );
        }

        SweepData {
            lambda_rows: lambda.rows,
            lambda_elapsed,
            s1_rows: s1.rows,
            dict_rows: dict.rows,
            s2_rows: s2.rows,
        }
    })
}

fn diff_cells(label: &str, got: &SweepRow, expect: &Row) -> Vec<String> {
    let premium = if got.premium.is_finite() {
        got.premium
    } else {
        f64::NAN
    };
    let cells = [
        ("theta", got.theta, expect.1, PRICE_TOL),
        ("premium", premium, expect.2, PRICE_TOL),
        ("a", got.insured, expect.3, MASS_TOL),
        ("t", got.out_of_pocket, expect.4, MASS_TOL),
        ("o", got.no_access, expect.5, MASS_TOL),
        ("p_i", got.insurer_profit, expect.6, MASS_TOL),
        ("p_p", got.producer_profit, expect.7, MASS_TOL),
    ];
    cells
        .iter()
        .filter(|(_, got, want, tol)| !((got - want).abs() <= *tol))
        .map(|(cell, got, want, tol)| {
            format!("{label} {cell}: computed {got:.4}, reference {want:.3}, tol {tol}")
        })
        .collect()
}

fn check_table(rows: &[SweepRow], reference: &[Row], label: &str) -> Vec<String> {
    assert_eq!(rows.len(), reference.len());
    rows.iter()
        .zip(reference)
        .flat_map(|(got, want)| diff_cells(&format!("{label}={}", want.0), got, want))
        .collect()
}

fn report(criterion: &str, failures: &[String], extra: &str) {
    if failures.is_empty() {
        println!("[{criterion}] PASS {extra}");
    } else {
        println!("[{criterion}] FAIL ({} cell(s) outside tolerance) {extra}", failures.len());
        for f in failures {
            println!("    {f}");
        }
    }
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_lambda_family_reproduction() {
    let data = sweeps();
    let mut failures = check_table(&data.lambda_rows, &REFERENCE_LAMBDA_SPNE, "lambda");
    let budget = Duration::from_secs(60);
    if data.lambda_elapsed > budget {
        failures.push(format!(
            "runtime {:?} above the 60 s budget",
            data.lambda_elapsed
        ));
    }
    report(
        "criterion 1",
        &failures,
        &format!("(sweep took {:?})", data.lambda_elapsed),
    );
    assert!(
        failures.is_empty(),
        "criterion 1: {} cell(s) outside tolerance; the reference mass/profit columns of this \
         family are mutually inconsistent with its price columns (no single population produces \
         both); see printed diffs",
        failures.len()
    );
}

#[test]
fn criterion_2_s1_family_reproduction() {
    let data = sweeps();
    let mut failures = check_table(&data.s1_rows, &REFERENCE_S1_SPNE, "s1");
    for w in data.s1_rows.windows(2) {
        if w[1].theta < w[0].theta - 1e-9 {
            failures.push(format!(
                "theta not nondecreasing: {} -> {}",
                w[0].theta, w[1].theta
            ));
        }
        if w[1].premium < w[0].premium - 1e-9 {
            failures.push(format!(
                "premium not nondecreasing: {} -> {}",
                w[0].premium, w[1].premium
            ));
        }
    }
    if !(data.s1_rows[0].insured <= 0.015) {
        failures.push(format!(
            "insured share at s1=0.1 should vanish, got {}",
            data.s1_rows[0].insured
        ));
    }
    report("criterion 2", &failures, "");
    assert!(failures.is_empty(), "criterion 2 failed:\n{}", failures.join("\n"));
}

#[test]
fn criterion_3_dictatorial_reproduction() {
    let data = sweeps();
    let mut failures = check_table(&data.dict_rows, &REFERENCE_S1_DICTATORIAL, "s1");
    let theta_at = |s1: f64| {
        data.dict_rows
            .iter()
            .find(|r| (r.param - s1).abs() < 1e-12)
            .unwrap()
            .theta
    };
    if !(theta_at(10.0) < theta_at(1.0)) {
        failures.push(format!(
            "dictatorial price should fall at large s1: theta(10)={} vs theta(1)={}",
            theta_at(10.0),
            theta_at(1.0)
        ));
    }
    report("criterion 3", &failures, "");
    assert!(
        failures.is_empty(),
        "criterion 3: {} cell(s) outside tolerance; the insurer objective is nearly flat in the \
         price around its optimum and the s1=0.4 reference point is strictly suboptimal under \
         the stated model; see printed diffs",
        failures.len()
    );
}

#[test]
fn criterion_4_pareto_family_reproduction() {
    let data = sweeps();
    let mut failures = check_table(&data.s2_rows, &REFERENCE_S2_SPNE, "s2");
    for w in data.s2_rows.windows(2) {
        if w[1].no_access > w[0].no_access + 1e-9 {
            failures.push(format!(
                "no-access share not decreasing in s2: {} -> {}",
                w[0].no_access, w[1].no_access
            ));
        }
    }
    let o_at_5 = data
        .s2_rows
        .iter()
        .find(|r| (r.param - 5.0).abs() < 1e-12)
        .unwrap()
        .no_access;
    if !(o_at_5 <= 0.005) {
        failures.push(format!("no-access share at s2=5 should be <= 0.005, got {o_at_5}"));
    }
    report("criterion 4", &failures, "");
    assert!(
        failures.is_empty(),
        "criterion 4: {} cell(s) outside tolerance; for s2 >= 1.8 the producer objective is \
         maximized exactly at the support edge theta = 1 and several reference rows sit strictly \
         inside (verifiably lower producer profit); see printed diffs",
        failures.len()
    );
}

#[test]
fn criterion_5_scaling_invariance() {
    let data = sweeps();
    let rows = &data.lambda_rows;
    let base = &rows[0];
    let mut failures = Vec::new();
    for &lambda in &[2.143, 5.0] {
        let row = rows
            .iter()
            .find(|r| (r.param - lambda).abs() < 1e-12)
            .unwrap();
        let scaled_theta = lambda * row.theta;
        if (scaled_theta - base.theta).abs() > 0.005 {
            failures.push(format!(
                "lambda={lambda}: lambda * theta = {scaled_theta:.5} vs {:.5}",
                base.theta
            ));
        }
        let scaled_premium = lambda * row.premium;
        if (scaled_premium - base.premium).abs() > 0.005 {
            failures.push(format!(
                "lambda={lambda}: lambda * premium = {scaled_premium:.5} vs {:.5}",
                base.premium
            ));
        }
        for (name, got, want) in [
            ("a", row.insured, base.insured),
            ("t", row.out_of_pocket, base.out_of_pocket),
            ("o", row.no_access, base.no_access),
        ] {
            if (got - want).abs() > 0.005 {
                failures.push(format!("lambda={lambda}: {name} = {got:.5} vs {want:.5}"));
            }
        }
    }
    report("criterion 5", &failures, "");
    assert!(failures.is_empty(), "criterion 5 failed:\n{}", failures.join("\n"));
}

#[test]
fn criterion_6_equilibrium_dominance_suite() {
    let data = sweeps();
    let opts = SolverOptions::default();
    let mut failures = Vec::new();
    let mut check = |name: &str, spec: &PopulationSpec, param: SweepParam, row: &SweepRow| {
        let pm = spec
            .with_param(param, row.param)
            .unwrap()
            .build()
            .unwrap();
        let base = baseline(&pm, &opts).unwrap();
        if !(row.producer_profit >= base.profits.producer - 1e-6) {
            failures.push(format!(
                "{name}={}: producer profit {} below baseline {}",
                row.param, row.producer_profit, base.profits.producer
            ));
        }
        if !(row.insurer_profit > 0.0) {
            failures.push(format!("{name}={}: insurer profit not positive", row.param));
        }
        let r = pm.incidence();
        if !(row.premium > r * row.theta && row.premium < row.theta) {
            failures.push(format!(
                "{name}={}: premium {} outside ({}, {})",
                row.param,
                row.premium,
                r * row.theta,
                row.theta
            ));
        }
    };
    let lam_spec = beta_exp_spec(2.0, 3.0, 1.0, 0.3);
    for row in &data.lambda_rows {
        check("lambda", &lam_spec, SweepParam::Lambda, row);
    }
    let s1_spec = beta_exp_spec(2.0, 2.0, 1.0, 0.3);
    for row in &data.s1_rows {
        check("s1(spne)", &s1_spec, SweepParam::S1, row);
    }
    for row in &data.dict_rows {
        check("s1(dict)", &s1_spec, SweepParam::S1, row);
    }
    let s2_spec = beta_pareto_spec(2.0, 0.3);
    for row in &data.s2_rows {
        check("s2", &s2_spec, SweepParam::S2, row);
    }
    report("criterion 6", &failures, "(37 sweep points)");
    assert!(failures.is_empty(), "criterion 6 failed:\n{}", failures.join("\n"));
}

#[test]
fn criterion_7_oracle_equivalence() {
    let _guard = heavy_guard();
    let start = Instant::now();
    let families: Vec<(&str, PopulationMeasure)> = vec![
        (
            "beta(2,3)xexp(1)",
            PopulationMeasure::product(
                Marginal::beta(2.0, 3.0).unwrap(),
                Marginal::exponential(1.0).unwrap(),
                0.3,
            )
            .unwrap(),
        ),
        (
            "beta(1,2)xexp(1)",
            PopulationMeasure::product(
                Marginal::beta(1.0, 2.0).unwrap(),
                Marginal::exponential(1.0).unwrap(),
                0.3,
            )
            .unwrap(),
        ),
        (
            "beta(2,2)xexp(1)",
            PopulationMeasure::product(
                Marginal::beta(2.0, 2.0).unwrap(),
                Marginal::exponential(1.0).unwrap(),
                0.3,
            )
            .unwrap(),
        ),
        (
            "beta(2,2)xpareto(1,2)",
            PopulationMeasure::product(
                Marginal::beta(2.0, 2.0).unwrap(),
                Marginal::pareto(1.0, 2.0).unwrap(),
                0.3,
            )
            .unwrap(),
        ),
    ];
    let mut points = Vec::new();
    for (fi, (name, pm)) in families.iter().enumerate() {
        let r = pm.incidence();
        for (qi, q) in [0.15, 0.35, 0.55, 0.75, 0.9].iter().enumerate() {
            let theta = pm.psi_quantile(*q).unwrap().max(1e-6);
            for (pj, frac) in [0.1, 0.3, 0.5, 0.7, 0.9].iter().enumerate() {
                let premium = theta * (r + (1.0 - r) * frac);
                let seed = 0x0A11CE ^ ((fi as u64) << 16) ^ ((qi as u64) << 8) ^ pj as u64;
                points.push((*name, pm, theta, premium, seed));
            }
        }
    }
    use rayon::prelude::*;
    let results: Vec<(f64, Vec<String>)> = points
        .par_iter()
        .map(|(name, pm, theta, premium, seed)| {
            let prices = PricePair::new(*theta, *premium).unwrap();
            let quad = region_masses(pm, &prices).unwrap();
            let (mc, se) = mc_region_masses(pm, &prices, 1_000_000, *seed).unwrap();
            let mut fails = Vec::new();
            let mut worst = 0.0f64;
            for (cell, a, b, s) in [
                ("a", quad.insured, mc.insured, se[0]),
                ("t", quad.out_of_pocket, mc.out_of_pocket, se[1]),
                ("o", quad.no_access, mc.no_access, se[2]),
            ] {
                let dev = (a - b).abs();
                let limit = 3.0 * s + 1e-6;
                if s > 0.0 {
                    worst = worst.max(dev / s);
                }
                if dev > limit {
                    fails.push(format!(
                        "{name} theta={theta:.4} premium={premium:.4} {cell}: |{a:.6} - {b:.6}| > {limit:.2e}"
                    ));
                }
            }
            (worst, fails)
        })
        .collect();
    let mut failures = Vec::new();
    let mut worst_sigma = 0.0f64;
    for (worst, fails) in results {
        worst_sigma = worst_sigma.max(worst);
        failures.extend(fails);
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(120) {
        failures.push(format!("runtime {elapsed:?} above the 2 min budget"));
    }
    report(
        "criterion 7",
        &failures,
        &format!("(worst deviation {worst_sigma:.2} sigma, {elapsed:?})"),
    );
    assert!(failures.is_empty(), "criterion 7 failed:\n{}", failures.join("\n"));
}

/// Exhaustive grid search of the sequential game used as an independent
/// check on the solver's search machinery: for each price on a 2000-point
/// grid, scan 2000 premiums for the follower's best reply, then pick the
/// price maximizing producer profit.
fn brute_force_equilibrium(
    pm: &PopulationMeasure,
    theta_hi: f64,
    n: usize,
) -> (f64, f64, f64, f64) {
    let r = pm.incidence();
    let mut best = (f64::NEG_INFINITY, 0.0, f64::INFINITY, 0.0); // (pp, theta, premium, coverage)
    for i in 1..=n {
        let theta = theta_hi * i as f64 / n as f64;
        let mut best_pi = 0.0;
        let mut best_premium = f64::INFINITY; // no entry
        for j in 0..=n {
            let premium = theta * (r + (1.0 - r) * j as f64 / n as f64);
            let prices = PricePair::new(theta, premium).unwrap();
            let m = region_masses(pm, &prices).unwrap();
            let pi = (premium - theta * r) * m.insured;
            if pi > best_pi {
                best_pi = pi;
                best_premium = premium;
            }
        }
        let prices = if best_premium.is_finite() {
            PricePair::new(theta, best_premium).unwrap()
        } else {
            PricePair::no_entry(theta).unwrap()
        };
        let m = region_masses(pm, &prices).unwrap();
        let pp = theta * r * m.coverage();
        if pp > best.0 {
            best = (pp, theta, best_premium, m.coverage());
        }
    }
    (best.1, best.2, best.0, best.3)
}

fn brute_force_baseline(pm: &PopulationMeasure, theta_hi: f64, n: usize) -> (f64, f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 1..=n {
        let theta = theta_hi * i as f64 / n as f64;
        let pp = no_insurer_profit(pm, theta);
        if pp > best.0 {
            best = (pp, theta);
        }
    }
    let prices = PricePair::no_entry(best.1).unwrap();
    let cov = region_masses(pm, &prices).unwrap().coverage();
    (best.1, best.0, cov)
}

#[test]
fn criterion_8_smoothed_atom_effects() {
    let _guard = heavy_guard();
    let mut failures = Vec::new();

    // (a) half the population at (0, 1), half at (1, 1.9): coverage falls
    // when the insurer enters
    let pm_a = PopulationMeasure::planar_atoms(vec![(0.0, 1.0, 0.5), (1.0, 1.9, 0.5)], 0.3)
        .unwrap()
        .smooth_atoms(1e-3)
        .unwrap();
    let rep = compare(&pm_a, &SolverOptions::default()).unwrap();
    if !(rep.access_effect < 0.0) {
        failures.push(format!(
            "(a) access effect should be negative, got {}",
            rep.access_effect
        ));
    }
    let (bf_theta, _, bf_pp, bf_cov) = brute_force_equilibrium(&pm_a, 8.0, 2000);
    let (_, _, base_cov) = brute_force_baseline(&pm_a, 8.0, 2000);
    if !(bf_cov - base_cov < 0.0) {
        failures.push(format!(
            "(a) brute-force oracle disagrees: coverage {bf_cov} vs baseline {base_cov}"
        ));
    }
    // winning-price structure, cross-checked against the exhaustive grid:
    // the insurer-sustained price is a multiple of the no-insurance optimum.
    // (The grid's producer profit is not compared directly: its discretized
    // follower reply over-captures relative to the true best response.)
    if (rep.with_insurer.theta - bf_theta).abs() > 0.02 * bf_theta {
        failures.push(format!(
            "(a) solver price {} inconsistent with exhaustive-grid price {bf_theta}",
            rep.with_insurer.theta
        ));
    }
    if !(rep.with_insurer.profits.producer > 0.9 * bf_pp) {
        failures.push(format!(
            "(a) solver producer profit {} implausibly far from exhaustive-grid {bf_pp}",
            rep.with_insurer.profits.producer
        ));
    }
    if !(rep.with_insurer.theta > 3.0 * rep.baseline.theta) {
        failures.push(format!(
            "(a) insurer entry should sustain a far higher price: {} vs baseline {}",
            rep.with_insurer.theta, rep.baseline.theta
        ));
    }

    // (b) half at (0, 1/r), half at (1, 1) with r < 1/2: the treatment price
    // falls when the insurer enters
    let pm_b = PopulationMeasure::planar_atoms(
        vec![(0.0, 1.0 / 0.3, 0.5), (1.0, 1.0, 0.5)],
        0.3,
    )
    .unwrap()
    .smooth_atoms(1e-3)
    .unwrap();
    let rep_b = compare(&pm_b, &SolverOptions::default()).unwrap();
    if !(rep_b.price_effect < 0.0) {
        failures.push(format!(
            "(b) price effect should be negative, got {}",
            rep_b.price_effect
        ));
    }
    let (bf_theta_b, _, bf_pp_b, _) = brute_force_equilibrium(&pm_b, 4.0, 2000);
    let (bf_base_theta, _, _) = brute_force_baseline(&pm_b, 4.0, 2000);
    if !(bf_theta_b < bf_base_theta) {
        failures.push(format!(
            "(b) brute-force oracle disagrees: price {bf_theta_b} vs baseline {bf_base_theta}"
        ));
    }
    if (rep_b.with_insurer.theta - bf_theta_b).abs() > 0.02 * bf_theta_b {
        failures.push(format!(
            "(b) solver price {} inconsistent with exhaustive-grid price {bf_theta_b}",
            rep_b.with_insurer.theta
        ));
    }
    if !(rep_b.with_insurer.profits.producer > 0.9 * bf_pp_b) {
        failures.push(format!(
            "(b) solver producer profit {} implausibly far from exhaustive-grid {bf_pp_b}",
            rep_b.with_insurer.profits.producer
        ));
    }
    // winning-price structure: both prices sit just below the high cluster's
    // reservation value, with the insured equilibrium a notch lower
    let anchor = 1.0 / 0.3;
    for (label, th) in [
        ("equilibrium", rep_b.with_insurer.theta),
        ("baseline", rep_b.baseline.theta),
    ] {
        if !((th - anchor).abs() < 0.03 * anchor) {
            failures.push(format!("(b) {label} price {th} far from the high cluster"));
        }
    }

    report(
        "criterion 8",
        &failures,
        &format!(
            "(access effect {:.4}, price effect {:.5})",
            rep.access_effect, rep_b.price_effect
        ),
    );
    assert!(failures.is_empty(), "criterion 8 failed:\n{}", failures.join("\n"));
}

#[test]
fn criterion_9_lifecycle_suite() {
    use premia::lifecycle::{
        cohort_atoms, single_period_psi, LifecycleAgent, SinglePeriodAgent,
    };
    let mut failures = Vec::new();

    // psi bound on 1000 random agents
    let mut rng = Rng::seed_from(0x11FE);
    for i in 0..1000 {
        let c = 0.2 + 4.8 * rng.uniform();
        let q = 0.5 + 0.5 * rng.uniform();
        let g = 0.5 + 0.5 * rng.uniform();
        let alpha = 0.2 * rng.uniform();
        let e1 = 0.01 + 1.99 * rng.uniform();
        let e2 = 0.02 + 0.48 * rng.uniform();
        let p = rng.uniform();
        let horizon = 50 + (rng.uniform() * 400.0) as usize;
        let agent =
            LifecycleAgent::constant(horizon, c, q, g, alpha, e1, e2, p).unwrap();
        let psi = agent.reservation_price(0).unwrap();
        if !(psi <= e1 / e2 * c + 1e-9) {
            failures.push(format!("agent {i}: psi {psi} above bound {}", e1 / e2 * c));
        }
        // finite horizons stay strictly below the infinite-horizon bound
        if !(psi < e1 / e2 * c) {
            failures.push(format!("agent {i}: psi {psi} not strictly below the bound"));
        }
    }

    // one-period reduction is exact
    let cohort = [
        SinglePeriodAgent::new(100.0, 0.3, 0.5, 0.2).unwrap(),
        SinglePeriodAgent::new(40.0, 0.7, 0.9, 0.1).unwrap(),
    ];
    let expect = [40.0, 40.0 * 0.9 * 0.9];
    for (agent, want) in cohort.iter().zip(expect) {
        let got = single_period_psi(agent);
        if (got - want).abs() > 1e-12 {
            failures.push(format!("one-period psi {got} vs {want}"));
        }
    }

    // geometric closed form to 1e-9
    let flat = LifecycleAgent::constant(4000, 1.0, 1.0, 1.0, 0.0, 0.5, 0.1, 0.3).unwrap();
    let psi = flat.reservation_price(0).unwrap();
    if (psi - 5.0).abs() > 1e-9 {
        failures.push(format!("geometric case psi {psi} vs 5.0"));
    }

    // truncation insensitivity
    let a = LifecycleAgent::constant(500, 2.0, 0.96, 0.97, 0.02, 0.6, 0.12, 0.3).unwrap();
    let b = LifecycleAgent::constant(1000, 2.0, 0.96, 0.97, 0.02, 0.6, 0.12, 0.3).unwrap();
    let (pa, pb) = (
        a.reservation_price(0).unwrap(),
        b.reservation_price(0).unwrap(),
    );
    if (pa - pb).abs() > 1e-9 * pa.max(1.0) {
        failures.push(format!("truncation sensitivity: {pa} vs {pb}"));
    }

    // cohort reduction feeds the game end to end
    let agents: Vec<LifecycleAgent> = (0..16)
        .map(|i| {
            LifecycleAgent::constant(
                300,
                1.0,
                0.95,
                0.97,
                0.03,
                0.4 + 0.02 * i as f64,
                0.1,
                0.05 + 0.05 * i as f64,
            )
            .unwrap()
        })
        .collect();
    let atoms = cohort_atoms(&agents, 0).unwrap();
    if atoms.len() != 16 {
        failures.push(format!("expected 16 distinct atoms, got {}", atoms.len()));
    }
    let pm = premia::lifecycle::reduce_cohort(&agents, 0, 0.3)
        .unwrap()
        .smooth_atoms(1e-3)
        .unwrap();
    let eq = spne(&pm, &SolverOptions::quick()).unwrap();
    if !(eq.profits.producer > 0.0) {
        failures.push("cohort equilibrium should earn the producer a profit".to_string());
    }

    report("criterion 9", &failures, "");
    assert!(failures.is_empty(), "criterion 9 failed:\n{}", failures.join("\n"));
}
