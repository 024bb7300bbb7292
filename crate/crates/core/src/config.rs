//! Run configuration files.
//!
//! Grammar:
//!
//! ```text
//! # comment (also after a value)
//! [section]
//! key = value                  # number or word
//! key = 1, 2, 3                # array
//! key =                        # matrix: one indented row per line
//!     0, -0.5
//!     -0.5, 0
//! ```
//!
//! Recognized sections are `domain`, `params`, `solver`, `sweep`, `unbounded`
//! and `selftest`. Unknown sections or keys are errors, reported with the line
//! they appear on.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Domain;
use crate::nehari::SystemParams;
use crate::system::ContinuationConfig;

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    rows: Vec<Vec<String>>,
    row_lines: Vec<usize>,
    matrix: bool,
    used: std::cell::Cell<bool>,
}

/// Raw `section → key → value` table preserving line numbers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

fn split_cells(s: &str) -> Vec<String> {
    s.split(',').map(|c| c.trim().to_string()).collect()
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RawConfig::default();
        let mut section: Option<String> = None;
        let mut open_matrix: Option<(String, String)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let indented = content.starts_with(' ') || content.starts_with('\t');
            if indented {
                if let Some((sec, key)) = &open_matrix {
                    let entry = cfg.sections.get_mut(sec).unwrap().1.get_mut(key).unwrap();
                    entry.rows.push(split_cells(content.trim()));
                    entry.row_lines.push(line);
                    continue;
                }
            }
            open_matrix = None;
            let trimmed = content.trim();
            if let Some(name) = trimmed.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| err(line, "unterminated section header"))?.trim();
                if name.is_empty() {
                    return Err(err(line, "empty section name"));
                }
                if cfg.sections.contains_key(name) {
                    return Err(err(line, &format!("duplicate section [{name}]")));
                }
                cfg.sections.insert(name.to_string(), (line, BTreeMap::new()));
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(err(line, &format!("expected `key = value`, found `{trimmed}`")));
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(err(line, &format!("invalid key `{key}`")));
            }
            let sec = section.clone().ok_or_else(|| err(line, "key outside of any [section]"))?;
            let table = &mut cfg.sections.get_mut(&sec).unwrap().1;
            if table.contains_key(key) {
                return Err(err(line, &format!("duplicate key `{key}` in [{sec}]")));
            }
            let value = value.trim();
            let matrix = value.is_empty();
            table.insert(
                key.to_string(),
                Entry {
                    line,
                    rows: if matrix { Vec::new() } else { vec![split_cells(value)] },
                    row_lines: if matrix { Vec::new() } else { vec![line] },
                    matrix,
                    used: std::cell::Cell::new(false),
                },
            );
            if matrix {
                open_matrix = Some((sec, key.to_string()));
            }
        }
        Ok(cfg)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    fn entry(&self, sec: &str, key: &str) -> Option<&Entry> {
        let e = self.sections.get(sec)?.1.get(key)?;
        e.used.set(true);
        Some(e)
    }

    fn section_line(&self, sec: &str) -> usize {
        self.sections.get(sec).map_or(0, |s| s.0)
    }

    fn require(&self, sec: &str, key: &str) -> Result<&Entry> {
        self.entry(sec, key)
            .ok_or_else(|| err(self.section_line(sec), &format!("missing key `{key}` in [{sec}]")))
    }

    fn scalar_cell<'a>(e: &'a Entry, key: &str) -> Result<&'a str> {
        match e.rows.as_slice() {
            [row] if !e.matrix && row.len() == 1 => Ok(&row[0]),
            _ => Err(err(e.line, &format!("`{key}` must be a single value"))),
        }
    }

    pub fn f64_opt(&self, sec: &str, key: &str) -> Result<Option<f64>> {
        self.entry(sec, key)
            .map(|e| parse_num(Self::scalar_cell(e, key)?, e.line, key))
            .transpose()
    }

    pub fn f64(&self, sec: &str, key: &str) -> Result<f64> {
        let e = self.require(sec, key)?;
        parse_num(Self::scalar_cell(e, key)?, e.line, key)
    }

    pub fn usize_opt(&self, sec: &str, key: &str) -> Result<Option<usize>> {
        self.entry(sec, key)
            .map(|e| {
                Self::scalar_cell(e, key)?
                    .parse::<usize>()
                    .map_err(|_| err(e.line, &format!("`{key}` must be a nonnegative integer")))
            })
            .transpose()
    }

    pub fn u64_opt(&self, sec: &str, key: &str) -> Result<Option<u64>> {
        self.entry(sec, key)
            .map(|e| {
                Self::scalar_cell(e, key)?
                    .parse::<u64>()
                    .map_err(|_| err(e.line, &format!("`{key}` must be a nonnegative integer")))
            })
            .transpose()
    }

    pub fn list_opt(&self, sec: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.entry(sec, key) else {
            return Ok(None);
        };
        match e.rows.as_slice() {
            [row] if !e.matrix => row.iter().map(|c| parse_num(c, e.line, key)).collect::<Result<_>>().map(Some),
            _ => Err(err(e.line, &format!("`{key}` must be a comma-separated list"))),
        }
    }

    pub fn list(&self, sec: &str, key: &str) -> Result<Vec<f64>> {
        self.require(sec, key)?;
        Ok(self.list_opt(sec, key)?.unwrap())
    }

    /// Square `n × n` matrix, row-major.
    pub fn matrix_opt(&self, sec: &str, key: &str, n: usize) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.entry(sec, key) else {
            return Ok(None);
        };
        if !e.matrix {
            return Err(err(e.line, &format!("`{key}` must be a matrix: `{key} =` followed by indented rows")));
        }
        if e.rows.len() != n {
            return Err(err(e.line, &format!("`{key}` has {} rows, expected {n}", e.rows.len())));
        }
        let mut out = Vec::with_capacity(n * n);
        for (r, (row, &row_line)) in e.rows.iter().zip(&e.row_lines).enumerate() {
            if row.len() != n {
                return Err(err(
                    row_line,
                    &format!("row {} of `{key}` has {} entries, expected {n}", r + 1, row.len()),
                ));
            }
            for c in row {
                out.push(parse_num(c, row_line, key)?);
            }
        }
        Ok(Some(out))
    }

    /// Errors on the first key or section nobody asked for.
    pub fn reject_unused(&self, known_sections: &[&str]) -> Result<()> {
        for (name, (line, table)) in &self.sections {
            if !known_sections.contains(&name.as_str()) {
                return Err(err(*line, &format!("unknown section [{name}]")));
            }
            if let Some((key, e)) = table.iter().find(|(_, e)| !e.used.get()) {
                return Err(err(e.line, &format!("unknown key `{key}` in [{name}]")));
            }
        }
        Ok(())
    }
}

fn err(line: usize, msg: &str) -> Error {
    Error::Config {
        line,
        msg: msg.to_string(),
    }
}

fn parse_num(s: &str, line: usize, key: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| err(line, &format!("`{key}`: cannot parse `{s}` as a number")))?;
    if !v.is_finite() {
        return Err(err(line, &format!("`{key}`: non-finite value")));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub multipliers: Vec<f64>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnboundedConfig {
    pub mu: f64,
    pub p: f64,
    pub q: f64,
    pub a: Vec<f64>,
    pub workers: usize,
}

/// Tolerance overrides and resolution for `selftest`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestConfig {
    pub n: usize,
    pub residual_tol: f64,
    pub nehari_tol: f64,
    pub scaling_tol: f64,
    pub cases: usize,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self {
            n: 32,
            residual_tol: 1e-8,
            nehari_tol: 1e-9,
            scaling_tol: 1e-9,
            cases: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub domain: Option<Domain>,
    pub params: Option<SystemParams>,
    pub solver: ContinuationConfig,
    pub seed: u64,
    pub sweep: Option<SweepConfig>,
    pub unbounded: Option<UnboundedConfig>,
    pub selftest: SelftestConfig,
}

const SECTIONS: [&str; 6] = ["domain", "params", "solver", "sweep", "unbounded", "selftest"];

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw = RawConfig::parse(text)?;
        let domain = if raw.has_section("domain") { Some(parse_domain(&raw)?) } else { None };
        let params = if raw.has_section("params") { Some(parse_params(&raw)?) } else { None };
        let mut solver = ContinuationConfig::default();
        if let Some(v) = raw.f64_opt("solver", "initial_step")? {
            solver.initial_step = v;
        }
        if let Some(v) = raw.f64_opt("solver", "min_step")? {
            solver.min_step = v;
        }
        if let Some(v) = raw.f64_opt("solver", "newton_tol")? {
            solver.newton_tol = v;
        }
        if let Some(v) = raw.usize_opt("solver", "max_newton")? {
            solver.max_newton = v;
        }
        if let Some(v) = raw.f64_opt("solver", "guard_factor")? {
            solver.guard_factor = v;
        }
        solver.guard = raw.f64_opt("solver", "guard")?;
        solver
            .validate()
            .map_err(|e| err(raw.section_line("solver"), &e.to_string()))?;
        let seed = raw.u64_opt("solver", "seed")?.unwrap_or(0);

        let sweep = if raw.has_section("sweep") {
            Some(SweepConfig {
                multipliers: raw.list("sweep", "multipliers")?,
                workers: raw.usize_opt("sweep", "workers")?.unwrap_or(1).max(1),
            })
        } else {
            None
        };
        let unbounded = if raw.has_section("unbounded") {
            Some(UnboundedConfig {
                mu: raw.f64_opt("unbounded", "mu")?.unwrap_or(1.0),
                p: raw.f64("unbounded", "p")?,
                q: raw.f64("unbounded", "q")?,
                a: raw.list("unbounded", "a")?,
                workers: raw.usize_opt("unbounded", "workers")?.unwrap_or(1).max(1),
            })
        } else {
            None
        };
        let mut selftest = SelftestConfig::default();
        if let Some(v) = raw.usize_opt("selftest", "n")? {
            selftest.n = v;
        }
        if let Some(v) = raw.f64_opt("selftest", "residual_tol")? {
            selftest.residual_tol = v;
        }
        if let Some(v) = raw.f64_opt("selftest", "nehari_tol")? {
            selftest.nehari_tol = v;
        }
        if let Some(v) = raw.f64_opt("selftest", "scaling_tol")? {
            selftest.scaling_tol = v;
        }
        if let Some(v) = raw.usize_opt("selftest", "cases")? {
            selftest.cases = v;
        }
        raw.reject_unused(&SECTIONS)?;
        Ok(Self {
            domain,
            params,
            solver,
            seed,
            sweep,
            unbounded,
            selftest,
        })
    }

    pub fn domain(&self) -> Result<&Domain> {
        self.domain.as_ref().ok_or_else(|| err(0, "missing [domain] section"))
    }

    pub fn params(&self) -> Result<&SystemParams> {
        self.params.as_ref().ok_or_else(|| err(0, "missing [params] section"))
    }
}

fn parse_domain(raw: &RawConfig) -> Result<Domain> {
    let line = raw.section_line("domain");
    let lengths = raw.list("domain", "lengths")?;
    let nodes = raw.list("domain", "nodes")?;
    let dim = raw.usize_opt("domain", "dim")?.unwrap_or(lengths.len());
    if lengths.len() != dim || nodes.len() != dim {
        return Err(err(line, &format!("`lengths` and `nodes` must have {dim} entries")));
    }
    let nodes: Vec<usize> = nodes
        .iter()
        .map(|&n| {
            if n >= 1.0 && n.fract() == 0.0 {
                Ok(n as usize)
            } else {
                Err(err(line, &format!("node count {n} is not a positive integer")))
            }
        })
        .collect::<Result<_>>()?;
    let domain = match dim {
        1 => Domain::interval(lengths[0], nodes[0]),
        2 => Domain::rectangle(lengths[0], lengths[1], nodes[0], nodes[1]),
        _ => return Err(err(line, "dim must be 1 or 2")),
    };
    domain.map_err(|e| err(line, &e.to_string()))
}

fn parse_params(raw: &RawConfig) -> Result<SystemParams> {
    let line = raw.section_line("params");
    let mu = raw.list("params", "mu")?;
    let l = raw.usize_opt("params", "ell")?.unwrap_or(mu.len());
    if mu.len() != l {
        return Err(err(line, &format!("`mu` has {} entries, ell = {l}", mu.len())));
    }
    let p = raw.f64("params", "p")?;
    let lambda = raw
        .matrix_opt("params", "lambda", l)?
        .ok_or_else(|| err(line, "missing key `lambda` in [params]"))?;
    let alpha = raw.matrix_opt("params", "alpha", l)?.unwrap_or_else(|| vec![1.0; l * l]);
    let beta = raw.matrix_opt("params", "beta", l)?.unwrap_or_else(|| vec![1.0; l * l]);
    SystemParams::new(p, mu, lambda, alpha, beta).map_err(|e| err(line, &e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOTKA: &str = "\
# two species
[domain]
lengths = 1, 1
nodes = 15, 15

[params]
p = 3
mu = 1, 1
lambda =
    0, -0.5   # symmetric
    -0.5, 0

[solver]
seed = 7
";

    #[test]
    fn parses_matrices_and_defaults() {
        let cfg = RunConfig::parse(LOTKA).unwrap();
        let params = cfg.params().unwrap();
        assert_eq!(params.lambda, vec![0.0, -0.5, -0.5, 0.0]);
        assert_eq!(params.alpha, vec![1.0; 4]);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.domain().unwrap().nodes(), (15, 15));
        assert_eq!(cfg.solver, ContinuationConfig::default());
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = format!("{LOTKA}tolerance = 3\n");
        match RunConfig::parse(&text) {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, 15);
                assert!(msg.contains("tolerance"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_matrix_row() {
        let text = LOTKA.replace("    -0.5, 0\n", "    -0.5\n");
        match RunConfig::parse(&text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 11),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn violated_constraint_is_named() {
        let text = LOTKA.replace("[solver]", "alpha =\n    0, 2\n    2, 0\n[solver]");
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.to_string().contains("must be < p"), "{e}");
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(RawConfig::parse("x = 1"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(RawConfig::parse("[a\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(RawConfig::parse("[a]\njunk\n"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(RawConfig::parse("[a]\nk=1\nk=2\n"), Err(Error::Config { line: 3, .. })));
    }
}
