use super::{
    detect_edges, median_filter, order_statistic_filter, ordfilt_rank, remove_small_objects,
    wiener_filter, BinaryImage, GrayImage,
};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::orchestration::{ActionSpec, ChainSpec, OperatorKind, ParamValue};

/// Value passed between operators of a chain.
#[derive(Clone, Debug, PartialEq)]
pub enum ChainData {
    Gray(GrayImage),
    Binary(BinaryImage),
}

/// Runs every operator of `chain` in order with the values of `action`.
///
/// Filters map gray to gray, the edge detector maps gray to binary and
/// small-object removal maps binary to binary; the chain must end on a
/// binary image.
pub fn apply_chain(img: &GrayImage, chain: &ChainSpec, action: &ActionSpec) -> Result<BinaryImage> {
    let data = apply_steps(
        ChainData::Gray(img.clone()),
        chain,
        action,
        0..chain.operators.len(),
    )?;
    finish(data, chain)
}

/// Unwraps the binary output of a complete chain.
pub fn finish(data: ChainData, chain: &ChainSpec) -> Result<BinaryImage> {
    match data {
        ChainData::Binary(b) => Ok(b),
        ChainData::Gray(_) => Err(Error::contract(format!(
            "chain {} does not produce a binary image",
            chain.label()
        ))),
    }
}

/// Runs only the operators in `steps`, starting from `data`. Splitting a
/// chain this way lets callers reuse a shared prefix.
pub fn apply_steps(
    mut data: ChainData,
    chain: &ChainSpec,
    action: &ActionSpec,
    steps: Range<usize>,
) -> Result<ChainData> {
    if action.values.len() != chain.operators.len() {
        return Err(Error::contract(format!(
            "chain {} has {} operators, action assigns {}",
            chain.label(),
            chain.operators.len(),
            action.values.len()
        )));
    }
    let ops = chain.operators.get(steps.clone()).ok_or_else(|| {
        Error::contract(format!("steps {steps:?} outside chain {}", chain.label()))
    })?;
    for (op, values) in ops.iter().zip(&action.values[steps]) {
        let kind = op.kind;
        let arity = kind.param_names().len();
        if values.len() != arity {
            return Err(Error::contract(format!(
                "{kind} takes {arity} values, action gives {}",
                values.len()
            )));
        }
        for (p, v) in values.iter().enumerate() {
            kind.check_value(p, v)?;
        }
        data = match (kind, data, values.as_slice()) {
            (OperatorKind::Median, ChainData::Gray(g), [ParamValue::Size(s)]) => {
                ChainData::Gray(median_filter(&g, *s)?)
            }
            (OperatorKind::OrderStatistic, ChainData::Gray(g), [ParamValue::Size(s)]) => {
                ChainData::Gray(order_statistic_filter(&g, *s, ordfilt_rank(*s))?)
            }
            (OperatorKind::Wiener, ChainData::Gray(g), [ParamValue::Size(s)]) => {
                ChainData::Gray(wiener_filter(&g, *s)?)
            }
            (
                OperatorKind::Edge,
                ChainData::Gray(g),
                [ParamValue::Method(m), ParamValue::Threshold(t)],
            ) => ChainData::Binary(detect_edges(&g, *m, *t)?),
            (
                OperatorKind::AreaOpen,
                ChainData::Binary(b),
                [ParamValue::MinSize(n), ParamValue::Connectivity(c)],
            ) => ChainData::Binary(remove_small_objects(&b, *n, *c)),
            (kind, _, _) => {
                return Err(Error::contract(format!(
                    "{kind} cannot follow the previous operator in chain {}",
                    chain.label()
                )))
            }
        };
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{Connectivity, EdgeMethod};
    use crate::orchestration::OperatorSpec;

    fn cop(kind: OperatorKind) -> ChainSpec {
        let op = |k, d| OperatorSpec::new(k, d).unwrap();
        ChainSpec {
            id: 0,
            operators: vec![
                op(kind, vec![vec![ParamValue::Size(3)]]),
                op(
                    OperatorKind::Edge,
                    vec![
                        vec![ParamValue::Method(EdgeMethod::Prewitt)],
                        vec![ParamValue::Threshold(0.02)],
                    ],
                ),
                op(
                    OperatorKind::AreaOpen,
                    vec![
                        vec![ParamValue::MinSize(50)],
                        vec![ParamValue::Connectivity(Connectivity::Eight)],
                    ],
                ),
            ],
        }
    }

    fn action(size: usize, min: usize) -> ActionSpec {
        ActionSpec {
            values: vec![
                vec![ParamValue::Size(size)],
                vec![
                    ParamValue::Method(EdgeMethod::Prewitt),
                    ParamValue::Threshold(0.02),
                ],
                vec![
                    ParamValue::MinSize(min),
                    ParamValue::Connectivity(Connectivity::Eight),
                ],
            ],
        }
    }

    fn step(w: usize, h: usize) -> GrayImage {
        let data = (0..w * h)
            .map(|i| if i % w >= w / 2 { 0.8 } else { 0.2 })
            .collect();
        GrayImage::new(w, h, data).unwrap()
    }

    #[test]
    fn wiener_prewitt_area_on_step() {
        let img = step(64, 64);
        let out = apply_chain(&img, &cop(OperatorKind::Wiener), &action(3, 50)).unwrap();
        let g = wiener_filter(&img, 3).unwrap();
        let e = detect_edges(&g, EdgeMethod::Prewitt, 0.02).unwrap();
        assert_eq!(out, remove_small_objects(&e, 50, Connectivity::Eight));
        assert!(out.count_true() >= 60);
    }

    #[test]
    fn constant_image_gives_nothing() {
        let img = GrayImage::constant(16, 16, 0.0).unwrap();
        for k in [
            OperatorKind::Median,
            OperatorKind::OrderStatistic,
            OperatorKind::Wiener,
        ] {
            let out = apply_chain(&img, &cop(k), &action(5, 10)).unwrap();
            assert_eq!(out.count_true(), 0);
        }
    }

    #[test]
    fn zero_min_size_is_identity_post() {
        let img = step(20, 12);
        let out = apply_chain(&img, &cop(OperatorKind::Median), &action(3, 0)).unwrap();
        let pre = median_filter(&img, 3).unwrap();
        assert_eq!(out, detect_edges(&pre, EdgeMethod::Prewitt, 0.02).unwrap());
    }

    #[test]
    fn arity_mismatch_is_contract_error() {
        let img = step(8, 8);
        let mut a = action(3, 0);
        a.values.pop();
        assert!(matches!(
            apply_chain(&img, &cop(OperatorKind::Median), &a),
            Err(Error::Contract(_))
        ));
        let mut b = action(3, 0);
        b.values[1].pop();
        assert!(matches!(
            apply_chain(&img, &cop(OperatorKind::Median), &b),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn stage_order_enforced() {
        let mut chain = cop(OperatorKind::Median);
        chain.operators.swap(0, 2);
        let mut a = action(3, 0);
        a.values.swap(0, 2);
        assert!(apply_chain(&step(8, 8), &chain, &a).is_err());
        chain.operators.truncate(1);
        a.values.truncate(1);
        assert!(apply_chain(&step(8, 8), &chain, &a).is_err());
    }
}
