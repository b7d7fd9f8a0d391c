//! Operator chains and their parameter-value tables.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Connectivity, EdgeMethod};

/// The kinds of pixel data flowing between operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Gray,
    Binary,
}

/// The five operators a chain can be built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorKind {
    /// `medfilt2`: median filter, parameter `size`.
    Median,
    /// `ordfilt2`: order-statistic (max) filter, parameter `size`.
    OrderStatistic,
    /// `wiener2`: adaptive Wiener filter, parameter `size`.
    Wiener,
    /// `edge`: edge detector, parameters `method` and `threshold`.
    Edge,
    /// `bwareaopen`: small-object removal, parameters `min_size` and `connectivity`.
    AreaOpen,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 5] = [
        OperatorKind::Median,
        OperatorKind::OrderStatistic,
        OperatorKind::Wiener,
        OperatorKind::Edge,
        OperatorKind::AreaOpen,
    ];

    pub fn id(self) -> &'static str {
        match self {
            OperatorKind::Median => "medfilt2",
            OperatorKind::OrderStatistic => "ordfilt2",
            OperatorKind::Wiener => "wiener2",
            OperatorKind::Edge => "edge",
            OperatorKind::AreaOpen => "bwareaopen",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            OperatorKind::Median | OperatorKind::OrderStatistic | OperatorKind::Wiener => &["size"],
            OperatorKind::Edge => &["method", "threshold"],
            OperatorKind::AreaOpen => &["min_size", "connectivity"],
        }
    }

    /// Input and output stage.
    pub fn io(self) -> (Stage, Stage) {
        match self {
            OperatorKind::Median | OperatorKind::OrderStatistic | OperatorKind::Wiener => {
                (Stage::Gray, Stage::Gray)
            }
            OperatorKind::Edge => (Stage::Gray, Stage::Binary),
            OperatorKind::AreaOpen => (Stage::Binary, Stage::Binary),
        }
    }

    /// Parses one value of parameter `param` from its text form.
    pub fn parse_value(self, param: usize, text: &str) -> Result<ParamValue> {
        let text = text.trim();
        let name = self
            .param_names()
            .get(param)
            .ok_or_else(|| Error::invalid(format!("{} has no parameter #{param}", self.id())))?;
        let bad = |e: &dyn fmt::Display| {
            Error::invalid(format!("{}.{name}: bad value {text:?}: {e}", self.id()))
        };
        let value = match (self, param) {
            (OperatorKind::Edge, 0) => ParamValue::Method(text.parse()?),
            (OperatorKind::Edge, _) => ParamValue::Threshold(text.parse().map_err(|e| bad(&e))?),
            (OperatorKind::AreaOpen, 0) => ParamValue::MinSize(text.parse().map_err(|e| bad(&e))?),
            (OperatorKind::AreaOpen, _) => {
                let n: u32 = text.parse().map_err(|e| bad(&e))?;
                ParamValue::Connectivity(
                    Connectivity::from_neighbours(n).ok_or_else(|| bad(&"expected 4 or 8"))?,
                )
            }
            _ => ParamValue::Size(text.parse().map_err(|e| bad(&e))?),
        };
        self.check_value(param, &value)?;
        Ok(value)
    }

    /// Checks that `value` is a legal value for parameter `param`.
    pub fn check_value(self, param: usize, value: &ParamValue) -> Result<()> {
        let name = self.param_names().get(param).copied().unwrap_or("?");
        let fail = |why: &str| {
            Err(Error::invalid(format!(
                "{}.{name} = {value}: {why}",
                self.id()
            )))
        };
        match (self, param, value) {
            (
                OperatorKind::Median | OperatorKind::OrderStatistic | OperatorKind::Wiener,
                0,
                ParamValue::Size(s),
            ) => {
                if *s < 3 || s % 2 == 0 {
                    return fail("window size must be odd and >= 3");
                }
            }
            (OperatorKind::Edge, 0, ParamValue::Method(_)) => {}
            (OperatorKind::Edge, 1, ParamValue::Threshold(t)) => {
                if !(t.is_finite() && *t >= 0.0) {
                    return fail("threshold must be finite and >= 0");
                }
            }
            (OperatorKind::AreaOpen, 0, ParamValue::MinSize(_)) => {}
            (OperatorKind::AreaOpen, 1, ParamValue::Connectivity(_)) => {}
            _ => return fail("value has the wrong type for this parameter"),
        }
        Ok(())
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// One concrete parameter value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParamValue {
    Size(usize),
    Method(EdgeMethod),
    Threshold(f64),
    MinSize(usize),
    Connectivity(Connectivity),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Size(s) | ParamValue::MinSize(s) => write!(f, "{s}"),
            ParamValue::Method(m) => write!(f, "{m}"),
            ParamValue::Threshold(t) => write!(f, "{t}"),
            ParamValue::Connectivity(c) => write!(f, "{}", c.neighbours()),
        }
    }
}

/// An operator together with the finite, ordered value domain of each of
/// its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub domains: Vec<Vec<ParamValue>>,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, domains: Vec<Vec<ParamValue>>) -> Result<Self> {
        let spec = OperatorSpec { kind, domains };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.kind.param_names();
        if self.domains.len() != names.len() {
            return Err(Error::invalid(format!(
                "{} takes {} parameter domains, got {}",
                self.kind,
                names.len(),
                self.domains.len()
            )));
        }
        for (p, domain) in self.domains.iter().enumerate() {
            if domain.is_empty() {
                return Err(Error::invalid(format!(
                    "{}.{} has an empty domain",
                    self.kind, names[p]
                )));
            }
            for v in domain {
                self.kind.check_value(p, v)?;
            }
        }
        Ok(())
    }
}

/// A processing phase and the operators that may fill it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDef {
    pub name: String,
    pub operators: Vec<OperatorSpec>,
}

/// One operator per phase, in phase order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub id: usize,
    pub operators: Vec<OperatorSpec>,
}

impl ChainSpec {
    /// Operator ids joined by `+`, e.g. `wiener2+edge+bwareaopen`.
    pub fn label(&self) -> String {
        self.operators.iter().map(|o| o.kind.id()).join("+")
    }

    /// Domain sizes of every parameter, flattened in chain order.
    pub fn radices(&self) -> Vec<usize> {
        self.operators
            .iter()
            .flat_map(|o| o.domains.iter().map(Vec::len))
            .collect()
    }

    /// `operator.parameter` names, flattened in chain order.
    pub fn param_keys(&self) -> Vec<String> {
        self.operators
            .iter()
            .flat_map(|o| {
                o.kind
                    .param_names()
                    .iter()
                    .map(move |p| format!("{}.{p}", o.kind.id()))
            })
            .collect()
    }
}

/// One chosen value for every parameter of every operator of a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub values: Vec<Vec<ParamValue>>,
}

impl ActionSpec {
    pub fn flat(&self) -> impl Iterator<Item = &ParamValue> {
        self.values.iter().flatten()
    }
}

impl fmt::Display for ActionSpec {
    /// Operators separated by `;`, multi-parameter operators parenthesised:
    /// `3 ; (prewitt, 0.02) ; (5, 8)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts = self.values.iter().map(|vals| match vals.as_slice() {
            [single] => single.to_string(),
            many => format!("({})", many.iter().join(", ")),
        });
        write!(f, "{}", parts.format(" ; "))
    }
}

/// Every action of a chain, in lexicographic domain order (the last
/// parameter varies fastest).
#[derive(Clone, Debug)]
pub struct ActionTable {
    chain: ChainSpec,
    radices: Vec<usize>,
    actions: Vec<ActionSpec>,
}

impl ActionTable {
    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&ActionSpec> {
        self.actions.get(index)
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    /// Mixed-radix digits of `index`, one per flattened parameter.
    pub fn digits(&self, index: usize) -> Option<Vec<usize>> {
        if index >= self.actions.len() {
            return None;
        }
        let mut rest = index;
        let mut digits = vec![0; self.radices.len()];
        for (d, &r) in digits.iter_mut().zip(&self.radices).rev() {
            *d = rest % r;
            rest /= r;
        }
        Some(digits)
    }

    /// Builds the action at `index` directly from the domains.
    pub fn decode(&self, index: usize) -> Option<ActionSpec> {
        let digits = self.digits(index)?;
        let mut it = digits.into_iter();
        let values = self
            .chain
            .operators
            .iter()
            .map(|op| {
                op.domains
                    .iter()
                    .map(|dom| dom[it.next().expect("one digit per parameter")])
                    .collect()
            })
            .collect();
        Some(ActionSpec { values })
    }

    /// Index of `action` in this table, or `None` if some value lies outside
    /// its domain or the shape does not match the chain.
    pub fn encode(&self, action: &ActionSpec) -> Option<usize> {
        if action.values.len() != self.chain.operators.len() {
            return None;
        }
        let mut index = 0;
        for (op, vals) in self.chain.operators.iter().zip(&action.values) {
            if vals.len() != op.domains.len() {
                return None;
            }
            for (dom, v) in op.domains.iter().zip(vals) {
                let digit = dom.iter().position(|d| d == v)?;
                index = index * dom.len() + digit;
            }
        }
        Some(index)
    }
}

/// Cartesian product of the per-phase operator lists. Chain ids are the
/// positions in lexicographic order (first phase varies slowest).
pub fn enumerate_chains(phases: &[PhaseDef]) -> Result<Vec<ChainSpec>> {
    if phases.is_empty() {
        return Err(Error::invalid("at least one phase is required"));
    }
    for phase in phases {
        if phase.operators.is_empty() {
            return Err(Error::invalid(format!(
                "phase {:?} has no operators",
                phase.name
            )));
        }
        for op in &phase.operators {
            op.validate()?;
        }
    }
    Ok(phases
        .iter()
        .map(|p| p.operators.iter().cloned())
        .multi_cartesian_product()
        .enumerate()
        .map(|(id, operators)| ChainSpec { id, operators })
        .collect())
}

/// Full cartesian product over every parameter domain of the chain.
pub fn enumerate_actions(chain: &ChainSpec) -> ActionTable {
    let domains: Vec<&Vec<ParamValue>> = chain.operators.iter().flat_map(|o| &o.domains).collect();
    let radices = chain.radices();
    let shape: Vec<usize> = chain.operators.iter().map(|o| o.domains.len()).collect();
    let actions = domains
        .iter()
        .map(|d| d.iter().copied())
        .multi_cartesian_product()
        .map(|flat| {
            let mut it = flat.into_iter();
            ActionSpec {
                values: shape
                    .iter()
                    .map(|&n| it.by_ref().take(n).collect())
                    .collect(),
            }
        })
        .collect::<Vec<_>>();
    // multi_cartesian_product of zero iterators yields nothing; a chain
    // without parameters still has exactly one (empty) action.
    let actions = if domains.is_empty() {
        vec![ActionSpec {
            values: shape.iter().map(|_| Vec::new()).collect(),
        }]
    } else {
        actions
    };
    ActionTable {
        chain: chain.clone(),
        radices,
        actions,
    }
}
