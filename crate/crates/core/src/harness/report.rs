//! `report.json`, `report.csv` and per-image result bitmaps.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::config::ProblemConfig;
use super::{pgm, DatasetEntry};
use crate::error::{Error, Result};
use crate::imaging::apply_chain;
use crate::metrics::{evaluate, EvalReport};
use crate::orchestration::{ActionSpec, ChainOutcome, ChainSpec, ParamValue, SearchResult};
use crate::qlearn::EvalSettings;

fn value_json(v: &ParamValue) -> Value {
    match *v {
        ParamValue::Size(s) | ParamValue::MinSize(s) => json!(s),
        ParamValue::Method(m) => json!(m.name()),
        ParamValue::Threshold(t) => json!(t),
        ParamValue::Connectivity(c) => json!(c.neighbours()),
    }
}

/// `{"wiener2.size": 3, "edge.method": "prewitt", ...}`.
pub fn named_action(chain: &ChainSpec, action: &ActionSpec) -> Value {
    let map: Map<String, Value> = chain
        .param_keys()
        .into_iter()
        .zip(action.flat().map(value_json))
        .collect();
    Value::Object(map)
}

fn config_json(cfg: &ProblemConfig) -> Value {
    let phases: Vec<Value> = cfg
        .phases
        .iter()
        .map(|p| {
            let ops: Vec<Value> = p
                .operators
                .iter()
                .map(|o| {
                    let params: Map<String, Value> = o
                        .kind
                        .param_names()
                        .iter()
                        .zip(&o.domains)
                        .map(|(n, d)| (n.to_string(), d.iter().map(value_json).collect()))
                        .collect();
                    json!({ "operator": o.kind.id(), "domains": params })
                })
                .collect();
            json!({ "name": p.name, "operators": ops })
        })
        .collect();
    json!({
        "phases": phases,
        "weights": cfg.weights.0,
        "tol": cfg.tol,
        "learn": cfg.learn,
        "dataset": cfg.dataset_path.display().to_string(),
        "budget": cfg.budget,
    })
}

fn chain_json(c: &ChainOutcome, images: usize) -> Value {
    let (evaluations, sweep, episodes) = match &c.tuning {
        Some(t) => (
            t.evaluations,
            serde_json::to_value(&t.sweep).expect("plain data"),
            serde_json::to_value(&t.episode_log).expect("plain data"),
        ),
        None => (c.action_count * images, json!([]), json!([])),
    };
    json!({
        "id": c.chain.id,
        "label": c.chain.label(),
        "action_count": c.action_count,
        "best_action_index": c.best_action_index,
        "best_action": named_action(&c.chain, &c.best_action),
        "best_action_text": c.best_action.to_string(),
        "best_quality": c.best_quality,
        "evaluations": evaluations,
        "sweep": sweep,
        "episode_log": episodes,
        "action_rewards": c.action_rewards.as_deref().unwrap_or_default(),
    })
}

/// The full report as JSON.
pub fn report_json(result: &SearchResult, cfg: &ProblemConfig, dataset: &[DatasetEntry]) -> Value {
    let win = result.winning_chain();
    json!({
        "method": result.method,
        "seed": cfg.learn.seed,
        "config": config_json(cfg),
        "dataset": dataset.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(),
        "chains": result.chains.iter().map(|c| chain_json(c, dataset.len())).collect::<Vec<_>>(),
        "winner": {
            "chain_id": result.winner.chain_id,
            "chain": win.chain.label(),
            "action_index": result.winner.action_index,
            "action": named_action(&win.chain, &result.winner.action),
            "action_text": result.winner.action.to_string(),
            "quality": result.winner.quality,
            "tie_break": "lowest chain id",
        },
    })
}

/// One row per (chain, metric).
pub fn report_csv(result: &SearchResult, images: usize) -> String {
    let mut out = String::from("chain_id,chain,metric,value\n");
    for c in &result.chains {
        let mut rows: Vec<(&str, String)> = vec![
            ("action_count", c.action_count.to_string()),
            ("best_action_index", c.best_action_index.to_string()),
            ("best_quality", c.best_quality.to_string()),
        ];
        match &c.tuning {
            Some(t) => {
                rows.push(("evaluations", t.evaluations.to_string()));
                rows.push(("episodes", t.episode_log.len().to_string()));
                let steps: usize = t.episode_log.iter().map(|e| e.steps).sum();
                rows.push(("episode_steps", steps.to_string()));
            }
            None => rows.push(("evaluations", (c.action_count * images).to_string())),
        }
        let winner = usize::from(c.chain.id == result.winner.chain_id);
        rows.push(("winner", winner.to_string()));
        for (metric, value) in rows {
            out.push_str(&format!(
                "{},{},{metric},{value}\n",
                c.chain.id,
                c.chain.label()
            ));
        }
    }
    out
}

/// Applies `action` to every image, writes `<dir>/<id>.pgm` for each and
/// returns the per-image scores.
pub fn write_results(
    dir: &Path,
    dataset: &[DatasetEntry],
    chain: &ChainSpec,
    action: &ActionSpec,
    settings: EvalSettings,
) -> Result<Vec<EvalReport>> {
    let mut outputs = Vec::with_capacity(dataset.len());
    for entry in dataset {
        let bin = apply_chain(&entry.image, chain, action)?;
        let rep = evaluate(&bin, &entry.gt, settings.weights, settings.tol)?;
        outputs.push((bin, rep));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (entry, (bin, _)) in dataset.iter().zip(&outputs) {
        let path = dir.join(format!("{}.pgm", entry.id));
        pgm::write(&path, bin.width(), bin.height(), &bin.to_u8())?;
    }
    Ok(outputs.into_iter().map(|(_, r)| r).collect())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, `report.csv` and `results/<id>.pgm` for the
/// winning chain and action into `out`.
pub fn emit_report(
    result: &SearchResult,
    cfg: &ProblemConfig,
    dataset: &[DatasetEntry],
    out: &Path,
) -> Result<()> {
    let json = report_json(result, cfg, dataset);
    let csv = report_csv(result, dataset.len());
    let win = result.winning_chain();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_results(
        &out.join("results"),
        dataset,
        &win.chain,
        &result.winner.action,
        cfg.settings(),
    )?;
    let mut text = serde_json::to_string_pretty(&json).expect("json value");
    text.push('\n');
    write_file(&out.join("report.json"), text.as_bytes())?;
    write_file(&out.join("report.csv"), csv.as_bytes())
}

/// Per-image scores of one evaluation run as CSV.
pub fn evaluation_csv(dataset: &[DatasetEntry], reports: &[EvalReport]) -> String {
    let mut out = String::from("image,d_over,d_under,d_loc,d_total,reward\n");
    for (e, r) in dataset.iter().zip(reports) {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.id, r.d_over, r.d_under, r.d_loc, r.d_total, r.reward
        ));
    }
    out
}
