//! Parameter sweeps over distribution families, the fixed-order CSV format
//! they are persisted in, and the plot-ready series derived from them.

use crate::config::{PopulationSpec, SweepParam};
use crate::error::{Error, Result};
use crate::population::Premium;
use crate::solver::{self, EquilibriumKind, SolverOptions};
use serde::Serialize;
use serde_json::json;

/// Fixed CSV header of a sweep file; column order mirrors the result tables.
pub const SWEEP_HEADER: &str = "param,theta,premium,a,t,o,p_i,p_p";

/// One sweep point. `premium` is +inf when the insurer stays out; failed
/// points carry NaN everywhere except `param`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub theta: f64,
    pub premium: f64,
    pub insured: f64,
    pub out_of_pocket: f64,
    pub no_access: f64,
    pub insurer_profit: f64,
    pub producer_profit: f64,
}

impl SweepRow {
    fn failed(param: f64) -> Self {
        SweepRow {
            param,
            theta: f64::NAN,
            premium: f64::NAN,
            insured: f64::NAN,
            out_of_pocket: f64::NAN,
            no_access: f64::NAN,
            insurer_profit: f64::NAN,
            producer_profit: f64::NAN,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.theta.is_nan()
    }
}

/// Sweep output: rows in input order plus per-point failures.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// (parameter value, error message) for every failed point.
    pub failures: Vec<(f64, String)>,
}

/// Run one solver kind across the sweep values. Points are independent and
/// evaluated in parallel; output order follows input order.
pub fn run_sweep(
    base: &PopulationSpec,
    param: SweepParam,
    values: &[f64],
    kind: EquilibriumKind,
    opts: &SolverOptions,
) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::domain("sweep needs at least one value"));
    }
    let results: Vec<(f64, std::result::Result<SweepRow, String>)> =
        crate::parallel::map(values, |&value| {
            let row = solve_point(base, param, value, kind, opts)
                .map_err(|e| e.to_string());
            (value, row)
        });
    let mut rows = Vec::with_capacity(values.len());
    let mut failures = Vec::new();
    for (value, outcome) in results {
        match outcome {
            Ok(row) => rows.push(row),
            Err(msg) => {
                rows.push(SweepRow::failed(value));
                failures.push((value, msg));
            }
        }
    }
    Ok(SweepOutcome { rows, failures })
}

fn solve_point(
    base: &PopulationSpec,
    param: SweepParam,
    value: f64,
    kind: EquilibriumKind,
    opts: &SolverOptions,
) -> Result<SweepRow> {
    let pm = base.with_param(param, value)?.build()?;
    let eq = match kind {
        EquilibriumKind::SubgamePerfect => solver::spne(&pm, opts)?,
        EquilibriumKind::Dictatorial => solver::dictatorial(&pm, opts)?,
        EquilibriumKind::NoInsuranceBaseline => solver::baseline(&pm, opts)?,
    };
    Ok(SweepRow {
        param: value,
        theta: eq.theta,
        premium: match eq.premium {
            Premium::Quoted(x) => x,
            Premium::NoEntry => f64::INFINITY,
        },
        insured: eq.masses.insured,
        out_of_pocket: eq.masses.out_of_pocket,
        no_access: eq.masses.no_access,
        insurer_profit: eq.profits.insurer,
        producer_profit: eq.profits.producer,
    })
}

/// Format with six significant digits; round-trips through `parse_csv`
/// reproduce the emitted text byte for byte.
pub fn format_sig(x: f64) -> String {
    const SIG: i32 = 6;
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..SIG).contains(&mag) {
        format!("{:.*e}", SIG as usize - 1, x)
    } else {
        format!("{:.*}", (SIG - 1 - mag).max(0) as usize, x)
    }
}

/// Serialize rows in the fixed column order.
pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let cells = [
            r.param,
            r.theta,
            r.premium,
            r.insured,
            r.out_of_pocket,
            r.no_access,
            r.insurer_profit,
            r.producer_profit,
        ];
        let line: Vec<String> = cells.iter().map(|&x| format_sig(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parse a sweep CSV produced by `to_csv`.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("sweep csv is empty"))?;
    if header.trim() != SWEEP_HEADER {
        return Err(Error::invalid(format!(
            "sweep csv header must be '{SWEEP_HEADER}'"
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 8 {
            return Err(Error::invalid(format!(
                "sweep csv row {} has {} cells, expected 8",
                i + 2,
                cells.len()
            )));
        }
        let nums = cells
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|_| Error::invalid(format!("sweep csv row {}: bad number", i + 2)))?;
        rows.push(SweepRow {
            param: nums[0],
            theta: nums[1],
            premium: nums[2],
            insured: nums[3],
            out_of_pocket: nums[4],
            no_access: nums[5],
            insurer_profit: nums[6],
            producer_profit: nums[7],
        });
    }
    Ok(rows)
}

/// Plot-ready series for the three standard figures: the equilibrium locus
/// (theta, premium), the population shares, and both profits, all against
/// the sweep parameter.
pub fn plot_series(param_name: &str, rows: &[SweepRow]) -> serde_json::Value {
    let take = |f: fn(&SweepRow) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    json!({
        "param": param_name,
        "x": take(|r| r.param),
        "equilibrium": {
            "theta": take(|r| r.theta),
            "premium": take(|r| r.premium),
        },
        "shares": {
            "insured": take(|r| r.insured),
            "out_of_pocket": take(|r| r.out_of_pocket),
            "no_access": take(|r| r.no_access),
        },
        "profits": {
            "insurer": take(|r| r.insurer_profit),
            "producer": take(|r| r.producer_profit),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MarginalSpec;

    fn base_spec() -> PopulationSpec {
        PopulationSpec {
            mu_p: Some(MarginalSpec::Beta(2.0, 3.0)),
            mu_psi: Some(MarginalSpec::Exponential(1.0)),
            atoms: None,
            incidence: 0.3,
            radius: None,
        }
    }

    #[test]
    fn format_sig_cases() {
        assert_eq!(format_sig(1.113), "1.11300");
        assert_eq!(format_sig(0.048), "0.0480000");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(f64::INFINITY), "inf");
        assert_eq!(format_sig(f64::NAN), "NaN");
        assert_eq!(format_sig(1234567.0), "1.23457e6");
        assert_eq!(format_sig(-0.5), "-0.500000");
    }

    #[test]
    fn csv_roundtrip_is_fixed_point() {
        let rows = vec![
            SweepRow {
                param: 1.0,
                theta: 1.1126,
                premium: 0.54017,
                insured: 0.14,
                out_of_pocket: 0.2188,
                no_access: 0.6412,
                insurer_profit: 0.0289,
                producer_profit: 0.1198,
            },
            SweepRow {
                param: 2.0,
                theta: 1.0,
                premium: f64::INFINITY,
                insured: 0.0,
                out_of_pocket: 0.3678,
                no_access: 0.6322,
                insurer_profit: 0.0,
                producer_profit: 0.1103,
            },
        ];
        let csv1 = to_csv(&rows);
        let parsed = parse_csv(&csv1).unwrap();
        let csv2 = to_csv(&parsed);
        assert_eq!(csv1, csv2);
        assert!(parsed[1].premium.is_infinite());
    }

    #[test]
    fn sweep_failed_point_is_nan_row() {
        // lambda sweep over a pareto psi-marginal is a config error per point
        let mut spec = base_spec();
        spec.mu_psi = Some(MarginalSpec::Pareto(1.0, 2.0));
        let out = run_sweep(
            &spec,
            SweepParam::Lambda,
            &[1.0],
            EquilibriumKind::NoInsuranceBaseline,
            &SolverOptions::quick(),
        )
        .unwrap();
        assert!(out.rows[0].is_failed());
        assert_eq!(out.failures.len(), 1);
    }

    #[test]
    fn baseline_sweep_runs() {
        let out = run_sweep(
            &base_spec(),
            SweepParam::Lambda,
            &[1.0, 2.0],
            EquilibriumKind::NoInsuranceBaseline,
            &SolverOptions::quick(),
        )
        .unwrap();
        assert_eq!(out.rows.len(), 2);
        assert!(out.failures.is_empty());
        for (row, lambda) in out.rows.iter().zip([1.0, 2.0]) {
            assert!((row.theta - 1.0 / lambda).abs() < 1e-3);
            assert!(row.premium.is_infinite());
        }
        let series = plot_series("lambda", &out.rows);
        assert_eq!(series["x"].as_array().unwrap().len(), 2);
    }
}
