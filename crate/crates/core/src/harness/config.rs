//! Problem definition: phases, operator domains, error weights and learner
//! settings, read from a flat `key = value` text file.
//!
//! ```text
//! # comments start with '#'
//! phases = pre, proc, post          # phase names in chain order
//! phase.pre = medfilt2, wiener2     # operators allowed in a phase
//! wiener2.size = 3, 5               # value domain of one parameter
//! edge.threshold = 0.02:0.01:0.10   # start:step:end, both ends included
//! weights = 1/3, 1/3, 1/3
//! tol = 2
//! learn.episodes = 200              # also alpha, gamma, epsilon, temperature,
//!                                   # policy, max_steps, target_reward, sweep_k
//! seed = 0
//! dataset = data
//! output = out
//! budget = 1000000
//! ```
//!
//! Keys absent from the file keep their [`ProblemConfig::default`] value.
//! Setting `phases` discards the default phase list, so every listed
//! phase then needs its own `phase.<name>` line.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{Weights, DEFAULT_TOLERANCE};
use crate::orchestration::{OperatorKind, OperatorSpec, PhaseDef, DEFAULT_BUDGET};
use crate::qlearn::{EvalSettings, LearnParams};

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub phases: Vec<PhaseDef>,
    pub weights: Weights,
    pub tol: f64,
    pub learn: LearnParams,
    pub dataset_path: PathBuf,
    pub output_path: PathBuf,
    /// Evaluation cap of the exhaustive search.
    pub budget: u64,
}

const DEFAULT_DOMAINS: [(&str, &str); 7] = [
    ("medfilt2.size", "3, 5"),
    ("ordfilt2.size", "3, 5"),
    ("wiener2.size", "3, 5"),
    ("edge.method", "sobel, prewitt, zerocross, log"),
    ("edge.threshold", "0.02:0.01:0.10"),
    ("bwareaopen.min_size", "10, 30, 50"),
    ("bwareaopen.connectivity", "4, 8"),
];

const DEFAULT_PHASES: [(&str, &str); 3] = [
    ("preprocessing", "medfilt2, ordfilt2, wiener2"),
    ("processing", "edge"),
    ("postprocessing", "bwareaopen"),
];

impl Default for ProblemConfig {
    /// Three pre-processing filters, one edge detector with four methods and
    /// nine thresholds, and small-object removal with three areas and two
    /// connectivities: 3 chains of 432 actions each.
    fn default() -> Self {
        let mut domains = BTreeMap::new();
        for (key, value) in DEFAULT_DOMAINS {
            let (op, param) = split_param_key(key).expect("valid default key");
            domains.insert(
                (op, param),
                parse_domain(op, param, value).expect("valid default"),
            );
        }
        let phases = DEFAULT_PHASES
            .iter()
            .map(|(name, ops)| build_phase(name, ops, &domains).expect("valid default phase"))
            .collect();
        ProblemConfig {
            phases,
            weights: Weights::default(),
            tol: DEFAULT_TOLERANCE,
            learn: LearnParams::default(),
            dataset_path: PathBuf::from("data"),
            output_path: PathBuf::from("out"),
            budget: DEFAULT_BUDGET,
        }
    }
}

type DomainMap = BTreeMap<(OperatorKind, usize), Vec<crate::orchestration::ParamValue>>;

fn split_param_key(key: &str) -> Option<(OperatorKind, usize)> {
    let (op, param) = key.split_once('.')?;
    let kind = OperatorKind::from_id(op)?;
    let p = kind.param_names().iter().position(|n| *n == param)?;
    Some((kind, p))
}

fn split_list(value: &str) -> Vec<&str> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Decimal literal as (integer mantissa, number of fraction digits).
fn decimal(text: &str) -> Option<(i64, u32)> {
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits = format!("{int}{frac}");
    Some((digits.parse().ok()?, frac.len() as u32))
}

/// Expands `start:step:end` into its decimal literals, inclusive of `end`.
/// Arithmetic is done on scaled integers so `0.02:0.01:0.10` yields exactly
/// the nine literals `0.02`, ..., `0.1`.
fn expand_range(text: &str) -> Result<Vec<String>> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let bad = |why: &str| Error::invalid(format!("range {text:?}: {why}"));
    let [start, step, end] = parts[..] else {
        return Err(bad("expected start:step:end"));
    };
    let (s, ds) = decimal(start).ok_or_else(|| bad("bad start"))?;
    let (st, dst) = decimal(step).ok_or_else(|| bad("bad step"))?;
    let (e, de) = decimal(end).ok_or_else(|| bad("bad end"))?;
    let scale = ds.max(dst).max(de);
    let up = |v: i64, d: u32| v * 10i64.pow(scale - d);
    let (s, st, e) = (up(s, ds), up(st, dst), up(e, de));
    if st <= 0 {
        return Err(bad("step must be positive"));
    }
    if e < s {
        return Err(bad("end is below start"));
    }
    if (e - s) / st > 10_000 {
        return Err(bad("more than 10000 values"));
    }
    let unit = 10i64.pow(scale);
    Ok((0..)
        .map(|i| s + i * st)
        .take_while(|&v| v <= e)
        .map(|v| {
            if scale == 0 {
                v.to_string()
            } else {
                format!("{}.{:0width$}", v / unit, v % unit, width = scale as usize)
            }
        })
        .collect())
}

fn parse_domain(
    kind: OperatorKind,
    param: usize,
    value: &str,
) -> Result<Vec<crate::orchestration::ParamValue>> {
    let mut out = Vec::new();
    for item in split_list(value) {
        if item.contains(':') {
            for lit in expand_range(item)? {
                out.push(kind.parse_value(param, &lit)?);
            }
        } else {
            out.push(kind.parse_value(param, item)?);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid(format!(
            "{kind}.{} has an empty domain",
            kind.param_names()[param]
        )));
    }
    Ok(out)
}

fn build_phase(name: &str, ops: &str, domains: &DomainMap) -> Result<PhaseDef> {
    let mut operators = Vec::new();
    for id in split_list(ops) {
        let kind = OperatorKind::from_id(id)
            .ok_or_else(|| Error::invalid(format!("phase {name}: unknown operator {id:?}")))?;
        let doms = (0..kind.param_names().len())
            .map(|p| {
                domains.get(&(kind, p)).cloned().ok_or_else(|| {
                    Error::invalid(format!(
                        "phase {name}: no domain for {kind}.{}",
                        kind.param_names()[p]
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        operators.push(OperatorSpec::new(kind, doms)?);
    }
    if operators.is_empty() {
        return Err(Error::invalid(format!("phase {name} has no operators")));
    }
    Ok(PhaseDef {
        name: name.to_string(),
        operators,
    })
}

/// Number or `a/b` fraction.
fn parse_f64(text: &str) -> std::result::Result<f64, String> {
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    match text.split_once('/') {
        Some((a, b)) => Ok(parse(a)? / parse(b)?),
        None => parse(text),
    }
}

fn parse_num<T: std::str::FromStr>(text: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    text.parse::<T>().map_err(|e| format!("{text:?}: {e}"))
}

impl ProblemConfig {
    pub fn settings(&self) -> EvalSettings {
        EvalSettings {
            weights: self.weights,
            tol: self.tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::invalid("no phases defined"));
        }
        for phase in &self.phases {
            if phase.operators.is_empty() {
                return Err(Error::invalid(format!(
                    "phase {} has no operators",
                    phase.name
                )));
            }
            for op in &phase.operators {
                op.validate()?;
            }
        }
        self.weights.validate()?;
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::invalid("tol must be finite and >= 0"));
        }
        self.learn.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config { line, message } => Error::Format {
                path: path.to_path_buf(),
                message: format!("line {line}: {message}"),
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, &str, &str)> = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = key.trim();
            if !seen.insert(key) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key {key:?}"),
                });
            }
            entries.push((line, key, value.trim()));
        }

        let mut cfg = ProblemConfig::default();
        let mut domains: DomainMap = BTreeMap::new();
        for (key, value) in DEFAULT_DOMAINS {
            let (op, p) = split_param_key(key).expect("valid default key");
            domains.insert((op, p), parse_domain(op, p, value)?);
        }
        let mut phase_names: Vec<String> =
            DEFAULT_PHASES.iter().map(|(n, _)| n.to_string()).collect();
        let mut phase_ops: BTreeMap<String, (usize, String)> = DEFAULT_PHASES
            .iter()
            .map(|(n, ops)| (n.to_string(), (0, ops.to_string())))
            .collect();
        if let Some(&(_, _, value)) = entries.iter().find(|e| e.1 == "phases") {
            phase_names = split_list(value).into_iter().map(String::from).collect();
            phase_ops.clear();
        }

        for &(line, key, value) in &entries {
            let err = |message: String| Error::Config { line, message };
            let wrap = |e: Error| match e {
                Error::InvalidParameter(m) => err(m),
                other => other,
            };
            match key {
                "phases" => {}
                "weights" => {
                    let w: Vec<f64> = split_list(value)
                        .into_iter()
                        .map(parse_f64)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(err)?;
                    let w: [f64; 3] = w
                        .try_into()
                        .map_err(|_| err("weights needs exactly three values".into()))?;
                    cfg.weights = Weights::new(w).map_err(wrap)?;
                }
                "tol" => cfg.tol = parse_f64(value).map_err(err)?,
                "seed" => cfg.learn.seed = parse_num(value).map_err(err)?,
                "dataset" => cfg.dataset_path = PathBuf::from(value),
                "output" => cfg.output_path = PathBuf::from(value),
                "budget" => cfg.budget = parse_num(value).map_err(err)?,
                _ => {
                    if let Some(name) = key.strip_prefix("phase.") {
                        if !phase_names.iter().any(|n| n == name) {
                            return Err(err(format!("phase {name:?} is not listed in `phases`")));
                        }
                        phase_ops.insert(name.to_string(), (line, value.to_string()));
                    } else if let Some(field) = key.strip_prefix("learn.") {
                        let l = &mut cfg.learn;
                        match field {
                            "alpha" => l.alpha = parse_f64(value).map_err(err)?,
                            "gamma" => l.gamma = parse_f64(value).map_err(err)?,
                            "epsilon" => l.epsilon = parse_f64(value).map_err(err)?,
                            "temperature" => l.temperature = parse_f64(value).map_err(err)?,
                            "policy" => l.policy = value.parse().map_err(wrap)?,
                            "episodes" => l.episodes = parse_num(value).map_err(err)?,
                            "max_steps" => l.max_steps = parse_num(value).map_err(err)?,
                            "target_reward" => l.target_reward = parse_f64(value).map_err(err)?,
                            "sweep_k" => l.sweep_k = parse_num(value).map_err(err)?,
                            _ => return Err(err(format!("unknown key {key:?}"))),
                        }
                    } else if let Some((op, p)) = split_param_key(key) {
                        domains.insert((op, p), parse_domain(op, p, value).map_err(wrap)?);
                    } else {
                        return Err(err(format!("unknown key {key:?}")));
                    }
                }
            }
        }

        let phases_line = entries.iter().find(|e| e.1 == "phases").map_or(0, |e| e.0);
        if phase_names.is_empty() {
            return Err(Error::Config {
                line: phases_line,
                message: "`phases` lists no phase".into(),
            });
        }
        cfg.phases = phase_names
            .iter()
            .map(|name| {
                let (line, ops) = phase_ops.get(name).ok_or_else(|| Error::Config {
                    line: phases_line,
                    message: format!("phase {name:?} has no `phase.{name}` line"),
                })?;
                build_phase(name, ops, &domains).map_err(|e| match e {
                    Error::InvalidParameter(message) => Error::Config {
                        line: *line,
                        message,
                    },
                    other => other,
                })
            })
            .collect::<Result<_>>()?;
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter(message) => Error::Config { line: 0, message },
            other => other,
        })?;
        Ok(cfg)
    }

    /// Canonical text form; [`ProblemConfig::parse`] reads it back to an
    /// equal value. The output path is included.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.phases.iter().map(|p| p.name.as_str()).collect();
        writeln!(out, "phases = {}", names.join(", ")).unwrap();
        let mut domains: BTreeMap<OperatorKind, &OperatorSpec> = BTreeMap::new();
        for phase in &self.phases {
            let ops: Vec<&str> = phase.operators.iter().map(|o| o.kind.id()).collect();
            writeln!(out, "phase.{} = {}", phase.name, ops.join(", ")).unwrap();
            for op in &phase.operators {
                domains.insert(op.kind, op);
            }
        }
        for (kind, op) in domains {
            for (p, name) in kind.param_names().iter().enumerate() {
                let vals: Vec<String> = op.domains[p].iter().map(|v| v.to_string()).collect();
                writeln!(out, "{kind}.{name} = {}", vals.join(", ")).unwrap();
            }
        }
        let [w1, w2, w3] = self.weights.0;
        writeln!(out, "weights = {w1}, {w2}, {w3}").unwrap();
        writeln!(out, "tol = {}", self.tol).unwrap();
        let l = &self.learn;
        writeln!(out, "learn.alpha = {}", l.alpha).unwrap();
        writeln!(out, "learn.gamma = {}", l.gamma).unwrap();
        writeln!(out, "learn.epsilon = {}", l.epsilon).unwrap();
        writeln!(out, "learn.temperature = {}", l.temperature).unwrap();
        let policy = serde_json::to_value(l.policy).expect("policy serialises");
        writeln!(
            out,
            "learn.policy = {}",
            policy.as_str().unwrap_or_default()
        )
        .unwrap();
        writeln!(out, "learn.episodes = {}", l.episodes).unwrap();
        writeln!(out, "learn.max_steps = {}", l.max_steps).unwrap();
        writeln!(out, "learn.target_reward = {}", l.target_reward).unwrap();
        writeln!(out, "learn.sweep_k = {}", l.sweep_k).unwrap();
        writeln!(out, "seed = {}", l.seed).unwrap();
        writeln!(out, "dataset = {}", self.dataset_path.display()).unwrap();
        writeln!(out, "output = {}", self.output_path.display()).unwrap();
        writeln!(out, "budget = {}", self.budget).unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestration::{enumerate_actions, enumerate_chains, ParamValue};
    use crate::qlearn::Policy;

    #[test]
    fn default_shape() {
        let cfg = ProblemConfig::default();
        let ops: Vec<usize> = cfg.phases.iter().map(|p| p.operators.len()).collect();
        assert_eq!(ops, [3, 1, 1]);
        let edge = &cfg.phases[1].operators[0];
        assert_eq!(edge.domains[0].len(), 4);
        let th: Vec<f64> = edge.domains[1]
            .iter()
            .map(|v| match v {
                ParamValue::Threshold(t) => *t,
                _ => panic!(),
            })
            .collect();
        let expected: Vec<f64> = (2..=10).map(|i| i as f64 / 100.0).collect();
        assert_eq!(th, expected);
        let chains = enumerate_chains(&cfg.phases).unwrap();
        assert_eq!(chains.len(), 3);
        for c in &chains {
            assert_eq!(enumerate_actions(c).len(), 432);
        }
    }

    #[test]
    fn shipped_file_is_the_default() {
        let text = include_str!("../../../../configs/default.cfg");
        assert_eq!(
            ProblemConfig::parse(text).unwrap(),
            ProblemConfig::default()
        );
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ProblemConfig::parse(
            "phases = a, b\nphase.a = wiener2, medfilt2\nphase.b = edge\n\
             edge.method = log\nedge.threshold = 0.05, 0.125\nmedfilt2.size = 5:2:9\n\
             learn.policy = boltzmann\nseed = 42\nweights = 0.5, 0.25, 0.25\n",
        )
        .unwrap();
        assert_eq!(cfg.learn.policy, Policy::Boltzmann);
        assert_eq!(cfg.phases[0].operators[1].domains[0].len(), 3);
        assert_eq!(ProblemConfig::parse(&cfg.to_text()).unwrap(), cfg);
        cfg = ProblemConfig::default();
        assert_eq!(ProblemConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn ranges() {
        assert_eq!(expand_range("3:2:7").unwrap(), ["3", "5", "7"]);
        assert_eq!(
            expand_range("0.5:0.25:1").unwrap(),
            ["0.50", "0.75", "1.00"]
        );
        assert_eq!(
            expand_range("0.02:0.01:0.04").unwrap(),
            ["0.02", "0.03", "0.04"]
        );
        assert!(expand_range("1:0:3").is_err());
        assert!(expand_range("3:1:1").is_err());
        assert!(expand_range("1:2").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("tol = 1\nbogus = 3\n", 2),
            ("\n\nwiener2.size = 4\n", 3),
            ("seed = x\n", 1),
            ("tol = 1\ntol = 2\n", 2),
            ("phases = a\nphase.a = sharpen\n", 2),
            ("phases = a\nphase.b = edge\n", 2),
            ("just text\n", 1),
        ];
        for (text, line) in cases {
            match ProblemConfig::parse(text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(ProblemConfig::parse("phases = a\n").is_err());
        assert!(ProblemConfig::parse("weights = 1, 1, 1\n").is_err());
        assert!(ProblemConfig::parse("learn.alpha = 0\n").is_err());
    }
}
