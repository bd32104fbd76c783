use super::{Condition, Op, Rule};
use crate::data::{EncodedColumn, EncodingRole};

/// Shortest decimal form, keeping one fractional digit on integers.
pub(crate) fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{v:.1}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

pub fn render_condition(c: &Condition, col_map: &[EncodedColumn]) -> String {
    let Some(col) = col_map.get(c.feature) else {
        let op = if c.op == Op::Le { "<=" } else { ">" };
        return format!("x{} {op} {}", c.feature, fmt_num(c.threshold));
    };
    let src = &col.source;
    match &col.role {
        EncodingRole::NumericScaled { min, max } => {
            let raw = min + c.threshold * (max - min);
            let op = if c.op == Op::Le { "<=" } else { ">" };
            format!("{src} {op} {}", fmt_num(raw))
        }
        EncodingRole::Onehot { category } => match c.op {
            Op::Le => format!("{src} is not {category}"),
            Op::Gt => format!("{src} is {category}"),
        },
        EncodingRole::Ordinal { order } => {
            let last = order.len().saturating_sub(1);
            let k = c.threshold.floor().max(0.0) as usize;
            match c.op {
                Op::Le => format!("{src} <= {}", order[k.min(last)]),
                Op::Gt => format!("{src} >= {}", order[(k + 1).min(last)]),
            }
        }
    }
}

pub fn render_rule(rule: &Rule, col_map: &[EncodedColumn]) -> String {
    rule.conditions()
        .iter()
        .map(|c| render_condition(c, col_map))
        .collect::<Vec<_>>()
        .join(" and ")
}
