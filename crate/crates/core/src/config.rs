//! Experiment configuration: flat key = value lines with dotted sections
//! (TOML syntax), strict key checking and whole-document validation.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::dirac::ConnectionSpec;
use crate::geometry::FlatTorus;
use crate::{LabError, Result, C64};

pub const DEFAULT_CUTOFF: usize = 12;
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Every accepted key (besides `tolerances.<check>`).
pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "seed",
    "torus.periods",
    "torus.metric",
    "connection.twist",
    "connection.modes",
    "dirac.cutoff",
    "fractional.alpha",
    "region.center",
    "region.radius",
    "wave.horizon",
    "wave.steps",
    "recovery.eps",
    "recovery.delta",
    "recovery.beta",
    "recovery.samples",
    "output.dir",
];

/// Validated experiment configuration with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub seed: u64,
    pub periods: Vec<f64>,
    pub metric: Array2<f64>,
    /// Constant twist a in A_j = i a_j Id.
    pub twist: Vec<f64>,
    /// Scalar trigonometric terms: mode and per-direction complex amplitude.
    pub modes: Vec<(Vec<i64>, Vec<C64>)>,
    pub cutoff: usize,
    pub alpha: f64,
    pub region_center: Vec<f64>,
    pub region_radius: f64,
    /// Half horizon T of the wave experiments.
    pub horizon: f64,
    /// Time steps per T.
    pub steps: usize,
    pub eps: f64,
    pub delta: f64,
    pub beta: f64,
    pub samples: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = 2.0 * std::f64::consts::PI;
        ExperimentConfig {
            experiment: None,
            seed: 0,
            periods: vec![p, p],
            metric: Array2::eye(2),
            twist: vec![0.0, 0.0],
            modes: Vec::new(),
            cutoff: DEFAULT_CUTOFF,
            alpha: DEFAULT_ALPHA,
            region_center: vec![std::f64::consts::PI, std::f64::consts::PI],
            region_radius: 1.0,
            horizon: 2.0,
            steps: 512,
            eps: 0.1,
            delta: 1e-2,
            beta: 1e-4,
            samples: 10,
            tolerances: BTreeMap::new(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn torus(&self) -> Result<FlatTorus> {
        FlatTorus::new(self.periods.clone(), self.metric.clone(), 2 * self.cutoff + 1)
    }

    pub fn connection(&self) -> Result<ConnectionSpec> {
        let m = self.dim();
        let n = 1usize << (m / 2);
        let mut spec = ConnectionSpec::scalar_trig(m, n, &self.modes)?;
        if self.twist.iter().any(|&a| a != 0.0) {
            let c = ConnectionSpec::constant_scalar(&self.twist, n);
            for (q, comps) in c.coefficients() {
                spec.add_term(q, comps.clone());
            }
        }
        Ok(spec)
    }

    /// Tolerance override for a named check, else the default.
    pub fn tolerance(&self, check: &str, default: f64) -> f64 {
        self.tolerances.get(check).copied().unwrap_or(default)
    }
}

/// Outcome of parsing: the config plus non-fatal warnings (unknown keys in
/// non-strict mode).
#[derive(Clone, Debug)]
pub struct Parsed {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

/// Reports every key defined twice, with line numbers.
fn duplicate_keys(text: &str) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut problems = Vec::new();
    let mut section = String::new();
    let mut depth: i64 = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if depth > 0 {
            depth += line.matches('[').count() as i64 - line.matches(']').count() as i64;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && !line.contains('=') {
            section = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            let key: String = k.split('.').map(|p| p.trim().trim_matches('"')).collect::<Vec<_>>().join(".");
            let full = if section.is_empty() { key } else { format!("{section}.{key}") };
            if let Some(first) = seen.get(&full) {
                problems.push(format!("duplicate key '{full}' at line {} (first defined at line {first})", i + 1));
            } else {
                seen.insert(full, i + 1);
            }
            depth = v.matches('[').count() as i64 - v.matches(']').count() as i64;
        }
    }
    problems
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_f64_vec(v: &toml::Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(as_f64).collect()
}

/// Parses and validates a configuration document, collecting all violations.
pub fn parse_config(text: &str, strict: bool) -> Result<Parsed> {
    let dups = duplicate_keys(text);
    if !dups.is_empty() {
        return Err(LabError::Config(dups));
    }
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let msg = e.message().to_string();
        let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1));
        LabError::Config(vec![match line {
            Some(l) => format!("line {l}: {msg}"),
            None => msg,
        }])
    })?;
    let mut flat = Vec::new();
    flatten("", &table, &mut flat);
    let mut cfg = ExperimentConfig::default();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut metric_given = false;
    let mut center_given = false;
    for (key, value) in &flat {
        let bad = |what: &str| format!("{key}: expected {what}, got {value}");
        match key.as_str() {
            "experiment" => match value.as_str() {
                Some(s) => cfg.experiment = Some(s.to_string()),
                None => errors.push(bad("a string")),
            },
            "seed" => match value.as_integer() {
                Some(i) if i >= 0 => cfg.seed = i as u64,
                _ => errors.push(bad("a non-negative integer")),
            },
            "torus.periods" => match as_f64_vec(value) {
                Some(p) => cfg.periods = p,
                None => errors.push(bad("an array of numbers")),
            },
            "torus.metric" => {
                let rows: Option<Vec<Vec<f64>>> = value.as_array().and_then(|a| a.iter().map(as_f64_vec).collect());
                match rows {
                    Some(r) if !r.is_empty() && r.iter().all(|row| row.len() == r.len()) => {
                        let m = r.len();
                        cfg.metric = Array2::from_shape_fn((m, m), |(i, j)| r[i][j]);
                        metric_given = true;
                    }
                    _ => errors.push(bad("a square array of numbers")),
                }
            }
            "connection.twist" => match as_f64_vec(value) {
                Some(a) => cfg.twist = a,
                None => errors.push(bad("an array of numbers")),
            },
            "connection.modes" => {
                let rows: Option<Vec<Vec<f64>>> = value.as_array().and_then(|a| a.iter().map(as_f64_vec).collect());
                match rows {
                    Some(rows) => {
                        cfg.modes.clear();
                        for row in rows {
                            // [k_1..k_m, re_1, im_1, ..., re_m, im_m]
                            if row.len() % 3 != 0 || row.iter().take(row.len() / 3).any(|k| k.fract() != 0.0) {
                                errors.push(format!(
                                    "connection.modes: entry {row:?} must be m integers followed by m (re, im) pairs"
                                ));
                                continue;
                            }
                            let m = row.len() / 3;
                            let q = row[..m].iter().map(|&k| k as i64).collect();
                            let amp = (0..m).map(|j| C64::new(row[m + 2 * j], row[m + 2 * j + 1])).collect();
                            cfg.modes.push((q, amp));
                        }
                    }
                    None => errors.push(bad("an array of numeric arrays")),
                }
            }
            "dirac.cutoff" => match value.as_integer() {
                Some(k) if k >= 1 => cfg.cutoff = k as usize,
                _ => errors.push(bad("a positive integer")),
            },
            "fractional.alpha" => match as_f64(value) {
                Some(a) => cfg.alpha = a,
                None => errors.push(bad("a number")),
            },
            "region.center" => match as_f64_vec(value) {
                Some(c) => {
                    cfg.region_center = c;
                    center_given = true;
                }
                None => errors.push(bad("an array of numbers")),
            },
            "region.radius" => match as_f64(value) {
                Some(r) => cfg.region_radius = r,
                None => errors.push(bad("a number")),
            },
            "wave.horizon" => match as_f64(value) {
                Some(t) => cfg.horizon = t,
                None => errors.push(bad("a number")),
            },
            "wave.steps" => match value.as_integer() {
                Some(s) if s >= 2 => cfg.steps = s as usize,
                _ => errors.push(bad("an integer >= 2")),
            },
            "recovery.eps" => match as_f64(value) {
                Some(v) => cfg.eps = v,
                None => errors.push(bad("a number")),
            },
            "recovery.delta" => match as_f64(value) {
                Some(v) => cfg.delta = v,
                None => errors.push(bad("a number")),
            },
            "recovery.beta" => match as_f64(value) {
                Some(v) => cfg.beta = v,
                None => errors.push(bad("a number")),
            },
            "recovery.samples" => match value.as_integer() {
                Some(v) if v >= 1 => cfg.samples = v as usize,
                _ => errors.push(bad("a positive integer")),
            },
            "output.dir" => match value.as_str() {
                Some(s) => cfg.output_dir = Some(s.to_string()),
                None => errors.push(bad("a string")),
            },
            k if k.starts_with("tolerances.") => match as_f64(value) {
                Some(v) if v >= 0.0 => {
                    cfg.tolerances.insert(k["tolerances.".len()..].to_string(), v);
                }
                _ => errors.push(bad("a non-negative number")),
            },
            _ => {
                let msg = format!("unknown key '{key}'");
                if strict {
                    errors.push(msg);
                } else {
                    warnings.push(msg);
                }
            }
        }
    }
    // Dimension-dependent defaults.
    let m = cfg.periods.len();
    if !metric_given && m != 2 {
        cfg.metric = Array2::eye(m);
    }
    if !center_given && m != 2 {
        cfg.region_center = cfg.periods.iter().map(|p| p / 2.0).collect();
    }
    if cfg.twist.len() != m && cfg.twist.iter().all(|&a| a == 0.0) {
        cfg.twist = vec![0.0; m];
    }
    validate(&cfg, &mut errors);
    if errors.is_empty() {
        Ok(Parsed { config: cfg, warnings })
    } else {
        Err(LabError::Config(errors))
    }
}

fn validate(cfg: &ExperimentConfig, errors: &mut Vec<String>) {
    let m = cfg.periods.len();
    if !(1..=2).contains(&m) {
        errors.push(format!("torus.periods: dimension {m} unsupported (1 or 2)"));
        return;
    }
    if cfg.metric.nrows() != m {
        errors.push(format!("torus.metric: {}x{} does not match torus.periods of length {m}", cfg.metric.nrows(), cfg.metric.ncols()));
    }
    if cfg.twist.len() != m {
        errors.push(format!("connection.twist: length {} does not match dimension {m}", cfg.twist.len()));
    }
    for (q, amp) in &cfg.modes {
        if q.len() != m || amp.len() != m {
            errors.push(format!("connection.modes: mode {q:?} does not match dimension {m}"));
        }
    }
    if cfg.region_center.len() != m {
        errors.push(format!("region.center: length {} does not match dimension {m}", cfg.region_center.len()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        errors.push(format!("fractional.alpha = {} must lie in (0, 1)", cfg.alpha));
    }
    if !(cfg.horizon > 0.0) {
        errors.push(format!("wave.horizon = {} must be positive", cfg.horizon));
    }
    for (name, v) in [("recovery.eps", cfg.eps), ("recovery.delta", cfg.delta), ("recovery.beta", cfg.beta)] {
        if !(v > 0.0) {
            errors.push(format!("{name} = {v} must be positive"));
        }
    }
    let k_a = cfg
        .modes
        .iter()
        .filter(|(_, a)| a.iter().any(|z| z.norm() != 0.0))
        .map(|(q, _)| q.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    if cfg.cutoff < k_a + 1 {
        errors.push(format!(
            "dirac.cutoff = {} must be at least K_A + 1 = {} where K_A is the bandwidth of connection.modes",
            cfg.cutoff,
            k_a + 1
        ));
    }
    if errors.is_empty() {
        match FlatTorus::new(cfg.periods.clone(), cfg.metric.clone(), 2 * cfg.cutoff + 1) {
            Ok(torus) => {
                // The region must be a genuine ball: radius below the injectivity radius.
                let inj = injectivity_radius(&torus);
                if !(cfg.region_radius > 0.0 && cfg.region_radius < inj) {
                    errors.push(format!(
                        "region.radius = {} must lie in (0, {inj:.4}) to fit in the torus",
                        cfg.region_radius
                    ));
                }
            }
            Err(e) => errors.push(format!("torus: {e}")),
        }
    }
}

/// Half the length of the shortest nonzero lattice vector.
pub fn injectivity_radius(torus: &FlatTorus) -> f64 {
    let m = torus.dim();
    let p = torus.periods();
    let mut best = f64::INFINITY;
    let range: Vec<i64> = (-3..=3).collect();
    let mut idx = vec![0usize; m];
    loop {
        let v: Vec<f64> = (0..m).map(|j| range[idx[j]] as f64 * p[j]).collect();
        if v.iter().any(|&x| x != 0.0) {
            best = best.min(torus.norm_sq(&v).sqrt());
        }
        let mut j = 0;
        loop {
            if j == m {
                return best / 2.0;
            }
            idx[j] += 1;
            if idx[j] < range.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gets_defaults() {
        let p = parse_config("", true).unwrap();
        assert_eq!(p.config.cutoff, 12);
        assert_eq!(p.config.alpha, 0.5);
    }

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = parse_config("[dirac]\ncutoff = 9\n", true).unwrap();
        let b = parse_config("dirac.cutoff = 9\n", true).unwrap();
        assert_eq!(a.config, b.config);
    }

    #[test]
    fn duplicate_reports_line() {
        let err = parse_config("seed = 1\n[dirac]\ncutoff = 4\ncutoff = 5\n", true).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4") && msg.contains("dirac.cutoff"), "{msg}");
    }

    #[test]
    fn all_violations_reported() {
        let err = parse_config("dirac.cutof = 3\nfractional.alpha = 2.0\nseed = -1\n", true).unwrap_err();
        match err {
            LabError::Config(v) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn cutoff_error_names_both_keys() {
        let err = parse_config("dirac.cutoff = 2\nconnection.modes = [[2, 0, 0.1, 0.0, 0.0, 0.0]]\n", true).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dirac.cutoff") && msg.contains("connection.modes"), "{msg}");
    }

    #[test]
    fn unknown_key_is_warning_without_strict() {
        let p = parse_config("typo = 1\n", false).unwrap();
        assert_eq!(p.warnings.len(), 1);
    }
}
