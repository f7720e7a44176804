//! Experiment configuration: a flat key = value format with bracketed
//! section headers, chosen so that every experiment is archivable and
//! reproducible from one file.
//!
//! ```text
//! [population]
//! mu_p   = beta(2.0, 3.0)
//! mu_psi = exp(1.0)          # or pareto(1.0, 2.0), uniform(0.0, 2.0),
//!                            # or atoms((1.0, 0.5), (1.9, 0.5))
//! r      = 0.3
//! # alternatively a planar-atom population:
//! # atoms  = [(0.0, 1.0, 0.5), (1.0, 1.9, 0.5)]   # (p, psi, weight)
//! # radius = 0.001                                 # optional smoothing
//!
//! [solver]
//! grid       = 512
//! inner_grid = 512
//! kind       = spne          # spne | dictatorial | baseline
//!
//! [sweep]
//! param  = lambda            # lambda | s1 | s2 | r
//! values = 1.0, 1.571, 2.143
//!
//! [oracle]
//! grid = 5
//! mc_n = 1000000
//! seed = 42
//!
//! [lifecycle]
//! cohort = cohort.csv        # or an inline parametric cohort, see below
//! period = 0
//! radius = 0.001
//! ```
//!
//! Parse errors carry the line and column where scanning stopped.

use crate::distributions::{Marginal, PopulationMeasure};
use crate::error::Error;
use crate::lifecycle::{single_period_psi, LifecycleAgent, SinglePeriodAgent};
use crate::solver::{EquilibriumKind, SolverOptions};
use std::fmt;

/// Parse failure with source position (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ConfigError {
    fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            col,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ConfigError {}

type Parsed<T> = std::result::Result<T, ConfigError>;

/// Declarative marginal description, prior to validation.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalSpec {
    Beta(f64, f64),
    Exponential(f64),
    Pareto(f64, f64),
    Uniform(f64, f64),
    Atoms(Vec<(f64, f64)>),
}

impl MarginalSpec {
    pub fn build(&self) -> Result<Marginal, Error> {
        match self {
            MarginalSpec::Beta(a, b) => Marginal::beta(*a, *b),
            MarginalSpec::Exponential(rate) => Marginal::exponential(*rate),
            MarginalSpec::Pareto(scale, shape) => Marginal::pareto(*scale, *shape),
            MarginalSpec::Uniform(lo, hi) => Marginal::uniform(*lo, *hi),
            MarginalSpec::Atoms(atoms) => Marginal::atoms(atoms.clone()),
        }
    }
}

/// Declarative population description.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub mu_p: Option<MarginalSpec>,
    pub mu_psi: Option<MarginalSpec>,
    /// Planar atoms (p, psi, weight); mutually exclusive with the marginals.
    pub atoms: Option<Vec<(f64, f64, f64)>>,
    pub incidence: f64,
    /// Optional smoothing radius applied to atomic populations at build time.
    pub radius: Option<f64>,
}

impl PopulationSpec {
    pub fn build(&self) -> Result<PopulationMeasure, Error> {
        let pm = match (&self.atoms, &self.mu_p, &self.mu_psi) {
            (Some(atoms), None, None) => {
                PopulationMeasure::planar_atoms(atoms.clone(), self.incidence)?
            }
            (None, Some(p), Some(psi)) => {
                PopulationMeasure::product(p.build()?, psi.build()?, self.incidence)?
            }
            (Some(_), _, _) => {
                return Err(Error::invalid(
                    "population: atoms and marginals are mutually exclusive",
                ))
            }
            _ => {
                return Err(Error::invalid(
                    "population needs either atoms or both mu_p and mu_psi",
                ))
            }
        };
        match self.radius {
            Some(radius) if pm.is_atomic() => pm.smooth_atoms(radius),
            Some(_) => Err(Error::invalid(
                "population: radius applies to atomic populations only",
            )),
            None => Ok(pm),
        }
    }

    /// Rewrite the population spec with a sweep parameter set to `value`.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<PopulationSpec, Error> {
        let mut out = self.clone();
        match param {
            SweepParam::Lambda => match &self.mu_psi {
                Some(MarginalSpec::Exponential(_)) => {
                    out.mu_psi = Some(MarginalSpec::Exponential(value));
                }
                _ => {
                    return Err(Error::invalid(
                        "lambda sweep needs an exponential psi-marginal",
                    ))
                }
            },
            SweepParam::S1 => match &self.mu_p {
                Some(MarginalSpec::Beta(_, b)) => {
                    out.mu_p = Some(MarginalSpec::Beta(value, *b));
                }
                _ => return Err(Error::invalid("s1 sweep needs a beta p-marginal")),
            },
            SweepParam::S2 => match &self.mu_psi {
                Some(MarginalSpec::Pareto(scale, _)) => {
                    out.mu_psi = Some(MarginalSpec::Pareto(*scale, value));
                }
                _ => return Err(Error::invalid("s2 sweep needs a pareto psi-marginal")),
            },
            SweepParam::R => out.incidence = value,
        }
        Ok(out)
    }
}

/// Sweepable model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Rate of an exponential psi-marginal.
    Lambda,
    /// First shape of a beta p-marginal.
    S1,
    /// Shape of a pareto psi-marginal.
    S2,
    /// Incidence rate.
    R,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::S1 => "s1",
            SweepParam::S2 => "s2",
            SweepParam::R => "r",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "lambda" => Some(SweepParam::Lambda),
            "s1" => Some(SweepParam::S1),
            "s2" => Some(SweepParam::S2),
            "r" => Some(SweepParam::R),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub grid: usize,
    pub mc_n: usize,
    pub seed: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            grid: 5,
            mc_n: 1_000_000,
            seed: 42,
        }
    }
}

/// Scalar that may vary linearly across a parametric cohort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarOrRange {
    Fixed(f64),
    Range(f64, f64),
}

impl ScalarOrRange {
    fn at(&self, i: usize, count: usize) -> f64 {
        match *self {
            ScalarOrRange::Fixed(v) => v,
            ScalarOrRange::Range(lo, hi) => {
                if count <= 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            }
        }
    }
}

/// Inline parametric cohort: `count` agents with per-field scalars or linear
/// ranges across the cohort index.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub count: usize,
    pub horizon: usize,
    pub alpha: ScalarOrRange,
    pub eps1: ScalarOrRange,
    pub eps2: ScalarOrRange,
    pub consumption: ScalarOrRange,
    pub quality: ScalarOrRange,
    pub survival: ScalarOrRange,
    pub diag_prob: ScalarOrRange,
}

impl CohortSpec {
    pub fn build(&self) -> Result<Vec<LifecycleAgent>, Error> {
        (0..self.count)
            .map(|i| {
                LifecycleAgent::constant(
                    self.horizon,
                    self.consumption.at(i, self.count),
                    self.quality.at(i, self.count),
                    self.survival.at(i, self.count),
                    self.alpha.at(i, self.count),
                    self.eps1.at(i, self.count),
                    self.eps2.at(i, self.count),
                    self.diag_prob.at(i, self.count),
                )
            })
            .collect()
    }
}

/// Which cohort CSV schema to expect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CohortFormat {
    /// horizon,alpha,eps1,eps2,consumption,quality,survival,diag_prob with
    /// semicolon-separated arrays.
    #[default]
    Multi,
    /// wealth,diag_prob,success,loss_fraction one-period agents.
    SinglePeriod,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LifecycleSettings {
    pub cohort_path: Option<String>,
    pub cohort: Option<CohortSpec>,
    pub format: CohortFormat,
    pub period: usize,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverSettings {
    pub grid: Option<usize>,
    pub inner_grid: Option<usize>,
    pub theta_max: Option<f64>,
    pub kind: Option<EquilibriumKind>,
}

impl SolverSettings {
    pub fn apply(&self, base: SolverOptions) -> SolverOptions {
        let mut opts = base;
        if let Some(g) = self.grid {
            opts.outer_grid = g;
        }
        if let Some(g) = self.inner_grid {
            opts.inner_grid = g;
        }
        opts.theta_max = self.theta_max.or(opts.theta_max);
        opts
    }
}

/// Everything one experiment run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub population: Option<PopulationSpec>,
    pub solver: SolverSettings,
    pub sweep: Option<SweepSettings>,
    pub oracle: OracleSettings,
    pub lifecycle: Option<LifecycleSettings>,
}

// ---------------------------------------------------------------------------
// scanner
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Ident(String),
    Call(String, Vec<Value>),
    Tuple(Vec<Value>),
    List(Vec<Value>),
}

struct Scanner<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col_base: usize,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str, line: usize, col_base: usize) -> Self {
        Scanner {
            src: src.as_bytes(),
            pos: 0,
            line,
            col_base,
        }
    }

    fn col(&self) -> usize {
        self.col_base + self.pos
    }

    fn err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::new(self.line, self.col(), message)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t')) {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    fn scan_number(&mut self) -> Parsed<f64> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(self.err("expected a number"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map_err(|_| ConfigError::new(self.line, self.col_base + start, format!("bad number '{text}'")))
    }

    fn scan_ident(&mut self) -> Parsed<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(self.err("expected an identifier"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string())
    }

    fn scan_value(&mut self) -> Parsed<Value> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let items = self.scan_items(b')')?;
                Ok(Value::Tuple(items))
            }
            Some(b'[') => {
                self.pos += 1;
                let items = self.scan_items(b']')?;
                Ok(Value::List(items))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.scan_ident()?;
                self.skip_ws();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let args = self.scan_items(b')')?;
                    Ok(Value::Call(name, args))
                } else {
                    Ok(Value::Ident(name))
                }
            }
            Some(_) => Ok(Value::Num(self.scan_number()?)),
            None => Err(self.err("expected a value")),
        }
    }

    fn scan_items(&mut self, close: u8) -> Parsed<Vec<Value>> {
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(close) {
            self.pos += 1;
            return Ok(items);
        }
        loop {
            items.push(self.scan_value()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                }
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(items);
                }
                _ => return Err(self.err(format!("expected ',' or '{}'", close as char))),
            }
        }
    }

    /// Whole right-hand side: one value or a bare comma-separated list.
    fn scan_rhs(&mut self) -> Parsed<Vec<Value>> {
        let mut items = vec![self.scan_value()?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    items.push(self.scan_value()?);
                }
                None => return Ok(items),
                Some(_) => return Err(self.err("trailing characters after value")),
            }
        }
    }
}

fn expect_num(v: &Value, line: usize, col: usize, what: &str) -> Parsed<f64> {
    match v {
        Value::Num(x) => Ok(*x),
        _ => Err(ConfigError::new(line, col, format!("{what} must be a number"))),
    }
}

fn pair(v: &Value, line: usize, col: usize, what: &str) -> Parsed<(f64, f64)> {
    match v {
        Value::Tuple(items) if items.len() == 2 => Ok((
            expect_num(&items[0], line, col, what)?,
            expect_num(&items[1], line, col, what)?,
        )),
        _ => Err(ConfigError::new(line, col, format!("{what} must be a (a, b) pair"))),
    }
}

fn triple(v: &Value, line: usize, col: usize, what: &str) -> Parsed<(f64, f64, f64)> {
    match v {
        Value::Tuple(items) if items.len() == 3 => Ok((
            expect_num(&items[0], line, col, what)?,
            expect_num(&items[1], line, col, what)?,
            expect_num(&items[2], line, col, what)?,
        )),
        _ => Err(ConfigError::new(
            line,
            col,
            format!("{what} must be a (a, b, c) triple"),
        )),
    }
}

fn marginal_from(v: &Value, line: usize, col: usize) -> Parsed<MarginalSpec> {
    let bad = |msg: &str| ConfigError::new(line, col, msg.to_string());
    match v {
        Value::Call(name, args) => match (name.as_str(), args.len()) {
            ("beta", 2) => Ok(MarginalSpec::Beta(
                expect_num(&args[0], line, col, "beta shape")?,
                expect_num(&args[1], line, col, "beta shape")?,
            )),
            ("exp", 1) | ("exponential", 1) => Ok(MarginalSpec::Exponential(expect_num(
                &args[0], line, col, "rate",
            )?)),
            ("pareto", 2) => Ok(MarginalSpec::Pareto(
                expect_num(&args[0], line, col, "pareto scale")?,
                expect_num(&args[1], line, col, "pareto shape")?,
            )),
            ("uniform", 2) => Ok(MarginalSpec::Uniform(
                expect_num(&args[0], line, col, "uniform bound")?,
                expect_num(&args[1], line, col, "uniform bound")?,
            )),
            ("atoms", n) if n >= 1 => {
                let atoms = args
                    .iter()
                    .map(|a| pair(a, line, col, "atom"))
                    .collect::<Parsed<Vec<_>>>()?;
                Ok(MarginalSpec::Atoms(atoms))
            }
            _ => Err(bad(&format!(
                "unknown marginal '{name}' (expected beta(a,b), exp(rate), pareto(scale,shape), \
                 uniform(lo,hi) or atoms((x,w),...))"
            ))),
        },
        _ => Err(bad("expected a marginal such as beta(2, 3) or exp(1.0)")),
    }
}

fn scalar_or_range(v: &Value, line: usize, col: usize, what: &str) -> Parsed<ScalarOrRange> {
    match v {
        Value::Num(x) => Ok(ScalarOrRange::Fixed(*x)),
        Value::Call(name, args) if name == "range" && args.len() == 2 => Ok(ScalarOrRange::Range(
            expect_num(&args[0], line, col, what)?,
            expect_num(&args[1], line, col, what)?,
        )),
        _ => Err(ConfigError::new(
            line,
            col,
            format!("{what} must be a number or range(lo, hi)"),
        )),
    }
}

/// Parse an experiment configuration from text.
pub fn parse(text: &str) -> Parsed<ExperimentConfig> {
    let mut population: Option<PopulationSpec> = None;
    let mut solver = SolverSettings::default();
    let mut sweep_param: Option<(SweepParam, usize)> = None;
    let mut sweep_values: Option<Vec<f64>> = None;
    let mut oracle = OracleSettings::default();
    let mut lifecycle: Option<LifecycleSettings> = None;
    let mut cohort_fields: Vec<(String, ScalarOrRange)> = Vec::new();
    let mut cohort_count: Option<usize> = None;
    let mut cohort_horizon: Option<usize> = None;

    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(stripped) = trimmed.strip_prefix('[') {
            let name = stripped.strip_suffix(']').ok_or_else(|| {
                ConfigError::new(line_no, line.len(), "unterminated section header")
            })?;
            section = name.trim().to_string();
            match section.as_str() {
                "population" | "solver" | "sweep" | "oracle" | "lifecycle" => {}
                other => {
                    return Err(ConfigError::new(
                        line_no,
                        raw.find('[').unwrap_or(0) + 2,
                        format!("unknown section '{other}'"),
                    ))
                }
            }
            if section == "lifecycle" && lifecycle.is_none() {
                lifecycle = Some(LifecycleSettings::default());
            }
            continue;
        }
        let eq = trimmed.find('=').ok_or_else(|| {
            ConfigError::new(line_no, raw.find(trimmed).unwrap_or(0) + 1, "expected key = value")
        })?;
        let key = trimmed[..eq].trim();
        let rhs_offset = raw.find('=').unwrap() + 2;
        let rhs_text = &trimmed[eq + 1..];
        let key_col = raw.find(key).map(|i| i + 1).unwrap_or(1);

        // keys taking free text (paths) bypass the value scanner
        if section == "lifecycle" && key == "cohort" {
            let lc = lifecycle.as_mut().unwrap();
            lc.cohort_path = Some(rhs_text.trim().to_string());
            continue;
        }

        let mut sc = Scanner::new(rhs_text, line_no, rhs_offset);
        let values = sc.scan_rhs()?;
        if !sc.at_end() {
            return Err(sc.err("trailing characters after value"));
        }
        let v = &values[0];
        let single = |what: &str| -> Parsed<&Value> {
            if values.len() == 1 {
                Ok(v)
            } else {
                Err(ConfigError::new(line_no, rhs_offset, format!("{what} takes one value")))
            }
        };
        let num = |what: &str| -> Parsed<f64> { expect_num(single(what)?, line_no, rhs_offset, what) };
        let count = |what: &str| -> Parsed<usize> {
            let x = expect_num(single(what)?, line_no, rhs_offset, what)?;
            if x.fract() != 0.0 || x < 0.0 {
                return Err(ConfigError::new(
                    line_no,
                    rhs_offset,
                    format!("{what} must be a nonnegative integer"),
                ));
            }
            Ok(x as usize)
        };

        match (section.as_str(), key) {
            ("population", "mu_p") => {
                let spec = marginal_from(single("mu_p")?, line_no, rhs_offset)?;
                population.get_or_insert_with(empty_population).mu_p = Some(spec);
            }
            ("population", "mu_psi") => {
                let spec = marginal_from(single("mu_psi")?, line_no, rhs_offset)?;
                population.get_or_insert_with(empty_population).mu_psi = Some(spec);
            }
            ("population", "atoms") => {
                let items = match single("atoms")? {
                    Value::List(items) => items.clone(),
                    other => vec![other.clone()],
                };
                let atoms = items
                    .iter()
                    .map(|a| triple(a, line_no, rhs_offset, "atom"))
                    .collect::<Parsed<Vec<_>>>()?;
                population.get_or_insert_with(empty_population).atoms = Some(atoms);
            }
            ("population", "r") => {
                population.get_or_insert_with(empty_population).incidence = num("r")?;
            }
            ("population", "radius") => {
                population.get_or_insert_with(empty_population).radius = Some(num("radius")?);
            }
            ("solver", "grid") => solver.grid = Some(count("grid")?),
            ("solver", "inner_grid") => solver.inner_grid = Some(count("inner_grid")?),
            ("solver", "theta_max") => solver.theta_max = Some(num("theta_max")?),
            ("solver", "kind") => {
                let name = match single("kind")? {
                    Value::Ident(s) => s.clone(),
                    _ => {
                        return Err(ConfigError::new(line_no, rhs_offset, "kind must be a name"))
                    }
                };
                solver.kind = Some(parse_kind(&name).ok_or_else(|| {
                    ConfigError::new(
                        line_no,
                        rhs_offset,
                        format!("unknown kind '{name}' (spne | dictatorial | baseline)"),
                    )
                })?);
            }
            ("sweep", "param") => {
                let name = match single("param")? {
                    Value::Ident(s) => s.clone(),
                    _ => {
                        return Err(ConfigError::new(line_no, rhs_offset, "param must be a name"))
                    }
                };
                let param = SweepParam::from_name(&name).ok_or_else(|| {
                    ConfigError::new(
                        line_no,
                        rhs_offset,
                        format!("unknown sweep parameter '{name}' (lambda | s1 | s2 | r)"),
                    )
                })?;
                sweep_param = Some((param, line_no));
            }
            ("sweep", "values") => {
                let nums = values
                    .iter()
                    .map(|x| expect_num(x, line_no, rhs_offset, "sweep value"))
                    .collect::<Parsed<Vec<_>>>()?;
                if nums.is_empty() || nums.iter().any(|x| !x.is_finite()) {
                    return Err(ConfigError::new(
                        line_no,
                        rhs_offset,
                        "sweep values must be a nonempty list of finite numbers",
                    ));
                }
                sweep_values = Some(nums);
            }
            ("oracle", "grid") => oracle.grid = count("grid")?,
            ("oracle", "mc_n") => oracle.mc_n = count("mc_n")?,
            ("oracle", "seed") => oracle.seed = count("seed")? as u64,
            ("lifecycle", "period") => {
                lifecycle.as_mut().unwrap().period = count("period")?;
            }
            ("lifecycle", "radius") => {
                lifecycle.as_mut().unwrap().radius = Some(num("radius")?);
            }
            ("lifecycle", "format") => {
                let name = match single("format")? {
                    Value::Ident(s) => s.clone(),
                    _ => {
                        return Err(ConfigError::new(line_no, rhs_offset, "format must be a name"))
                    }
                };
                lifecycle.as_mut().unwrap().format = match name.as_str() {
                    "multi" => CohortFormat::Multi,
                    "single_period" => CohortFormat::SinglePeriod,
                    other => {
                        return Err(ConfigError::new(
                            line_no,
                            rhs_offset,
                            format!("unknown cohort format '{other}' (multi | single_period)"),
                        ))
                    }
                };
            }
            ("lifecycle", "count") => cohort_count = Some(count("count")?),
            ("lifecycle", "horizon") => cohort_horizon = Some(count("horizon")?),
            (
                "lifecycle",
                k @ ("alpha" | "eps1" | "eps2" | "consumption" | "quality" | "survival" | "p"),
            ) => {
                let field = scalar_or_range(single(k)?, line_no, rhs_offset, k)?;
                cohort_fields.push((k.to_string(), field));
            }
            ("", _) => {
                return Err(ConfigError::new(
                    line_no,
                    key_col,
                    format!("key '{key}' outside any section"),
                ))
            }
            (sec, _) => {
                return Err(ConfigError::new(
                    line_no,
                    key_col,
                    format!("unknown key '{key}' in section [{sec}]"),
                ))
            }
        }
    }

    let sweep = match (sweep_param, sweep_values) {
        (Some((param, _)), Some(values)) => Some(SweepSettings { param, values }),
        (Some((_, line)), None) => {
            return Err(ConfigError::new(line, 1, "sweep section is missing values"))
        }
        (None, Some(_)) => {
            return Err(ConfigError::new(1, 1, "sweep section is missing param"))
        }
        (None, None) => None,
    };

    if let Some(lc) = lifecycle.as_mut() {
        if cohort_count.is_some() || !cohort_fields.is_empty() {
            let count = cohort_count
                .ok_or_else(|| ConfigError::new(1, 1, "parametric cohort needs count"))?;
            let horizon = cohort_horizon
                .ok_or_else(|| ConfigError::new(1, 1, "parametric cohort needs horizon"))?;
            let mut spec = CohortSpec {
                count,
                horizon,
                alpha: ScalarOrRange::Fixed(0.0),
                eps1: ScalarOrRange::Fixed(0.0),
                eps2: ScalarOrRange::Fixed(0.0),
                consumption: ScalarOrRange::Fixed(1.0),
                quality: ScalarOrRange::Fixed(1.0),
                survival: ScalarOrRange::Fixed(1.0),
                diag_prob: ScalarOrRange::Fixed(0.0),
            };
            for (k, v) in &cohort_fields {
                match k.as_str() {
                    "alpha" => spec.alpha = *v,
                    "eps1" => spec.eps1 = *v,
                    "eps2" => spec.eps2 = *v,
                    "consumption" => spec.consumption = *v,
                    "quality" => spec.quality = *v,
                    "survival" => spec.survival = *v,
                    "p" => spec.diag_prob = *v,
                    _ => unreachable!(),
                }
            }
            lc.cohort = Some(spec);
        }
    }

    Ok(ExperimentConfig {
        population,
        solver,
        sweep,
        oracle,
        lifecycle,
    })
}

fn empty_population() -> PopulationSpec {
    PopulationSpec {
        mu_p: None,
        mu_psi: None,
        atoms: None,
        incidence: f64::NAN,
        radius: None,
    }
}

pub fn parse_kind(name: &str) -> Option<EquilibriumKind> {
    match name {
        "spne" | "subgame_perfect" => Some(EquilibriumKind::SubgamePerfect),
        "dictatorial" => Some(EquilibriumKind::Dictatorial),
        "baseline" | "no_insurance" => Some(EquilibriumKind::NoInsuranceBaseline),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// cohort CSV
// ---------------------------------------------------------------------------

/// Parse a multi-period cohort CSV: header
/// `horizon,alpha,eps1,eps2,consumption,quality,survival,diag_prob`,
/// array cells semicolon-separated. Arrays of length one broadcast across
/// the horizon.
pub fn parse_cohort_csv(text: &str) -> Result<Vec<LifecycleAgent>, Error> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::invalid("cohort csv is empty"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let expect = [
        "horizon",
        "alpha",
        "eps1",
        "eps2",
        "consumption",
        "quality",
        "survival",
        "diag_prob",
    ];
    if cols != expect {
        return Err(Error::invalid(format!(
            "cohort csv header must be '{}'",
            expect.join(",")
        )));
    }
    let mut agents = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expect.len() {
            return Err(Error::invalid(format!(
                "cohort csv row {} has {} fields, expected {}",
                lineno + 1,
                fields.len(),
                expect.len()
            )));
        }
        let horizon: usize = fields[0]
            .parse()
            .map_err(|_| Error::invalid(format!("row {}: bad horizon", lineno + 1)))?;
        let scalar = |i: usize| -> Result<f64, Error> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("row {}: bad {}", lineno + 1, expect[i])))
        };
        let array = |i: usize| -> Result<Vec<f64>, Error> {
            let vals = fields[i]
                .split(';')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|_| Error::invalid(format!("row {}: bad {}", lineno + 1, expect[i])))?;
            Ok(if vals.len() == 1 {
                vec![vals[0]; horizon + 1]
            } else {
                vals
            })
        };
        agents.push(LifecycleAgent::new(
            horizon,
            array(4)?,
            array(5)?,
            array(6)?,
            scalar(1)?,
            scalar(2)?,
            scalar(3)?,
            array(7)?,
        )?);
    }
    if agents.is_empty() {
        return Err(Error::invalid("cohort csv has no agent rows"));
    }
    Ok(agents)
}

/// Parse a single-period cohort CSV with header
/// `wealth,diag_prob,success,loss_fraction` and return the implied planar
/// atoms (p, psi, weight), equal weights.
pub fn parse_single_period_csv(text: &str) -> Result<Vec<(f64, f64, f64)>, Error> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::invalid("cohort csv is empty"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["wealth", "diag_prob", "success", "loss_fraction"] {
        return Err(Error::invalid(
            "single-period cohort header must be 'wealth,diag_prob,success,loss_fraction'",
        ));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::invalid(format!(
                "row {}: expected 4 fields",
                lineno + 1
            )));
        }
        let nums = fields
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|_| Error::invalid(format!("row {}: bad number", lineno + 1)))?;
        let agent = SinglePeriodAgent::new(nums[0], nums[1], nums[2], nums[3])?;
        rows.push((agent.diag_prob, single_period_psi(&agent)));
    }
    if rows.is_empty() {
        return Err(Error::invalid("cohort csv has no agent rows"));
    }
    let w = 1.0 / rows.len() as f64;
    Ok(rows.into_iter().map(|(p, psi)| (p, psi, w)).collect())
}
