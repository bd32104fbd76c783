use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{active_features, FeatureDictionary, LocalExplanation, SweepEntry};
use crate::error::Result;
use crate::merged::MergedModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        Some(Self {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            avg: v.iter().sum::<f64>() / v.len() as f64,
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            n: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRow {
    pub j: usize,
    pub subset_size: usize,
    pub rule: String,
    pub length: usize,
    pub coverage_count: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReport {
    pub class_names: Vec<String>,
    pub d_hid: usize,
    pub chosen_p: u32,
    /// `W'`, C × d_hid.
    pub weights: Vec<Vec<f64>>,
    /// Column headers for the heatmap, one per dictionary feature.
    pub feature_labels: Vec<String>,
    /// Largest subset first.
    pub rule_table: Vec<RuleRow>,
    pub rule_length: Option<Summary>,
    /// Over the supplied (test) decisions.
    pub active_per_decision: Option<Summary>,
    pub n_dead: usize,
    pub n_uncovered: usize,
    pub sweep: Vec<SweepEntry>,
}

pub fn global_report(
    m: &MergedModel,
    dict: &FeatureDictionary,
    x_test: &ArrayView2<f64>,
    class_names: &[String],
) -> Result<GlobalReport> {
    let codes = m.codes(x_test)?;
    let mut rule_table: Vec<RuleRow> = dict
        .features
        .iter()
        .map(|f| RuleRow {
            j: f.j,
            subset_size: f.subset_size,
            rule: f.text.clone(),
            length: f.rule.len(),
            coverage_count: f.stats.coverage_count,
            recall: f.stats.recall,
        })
        .collect();
    rule_table.sort_by(|a, b| b.subset_size.cmp(&a.subset_size).then(a.j.cmp(&b.j)));
    Ok(GlobalReport {
        class_names: class_names.to_vec(),
        d_hid: m.d_hid(),
        chosen_p: dict.chosen_p,
        weights: m.head_w.outer_iter().map(|r| r.to_vec()).collect(),
        feature_labels: (0..m.d_hid()).map(|j| dict.label(j)).collect(),
        rule_length: Summary::of(dict.features.iter().map(|f| f.rule.len() as f64)),
        active_per_decision: Summary::of(
            codes
                .outer_iter()
                .map(|c| active_features(c).len() as f64),
        ),
        rule_table,
        n_dead: dict.dead.len(),
        n_uncovered: dict.uncovered.len(),
        sweep: dict.sweep.clone(),
    })
}

fn rules_markdown(r: &GlobalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Dictionary features (p = {}%)\n", r.chosen_p);
    if r.rule_table.is_empty() {
        let _ = writeln!(
            s,
            "No dictionary feature received a rule at this threshold. \
             All {} features appear as unlabeled terms in explanations.",
            r.d_hid
        );
        return s;
    }
    let _ = writeln!(s, "| j | \\|T_j\\| | rule | coverage / recall |");
    let _ = writeln!(s, "|---|---|---|---|");
    for row in &r.rule_table {
        let _ = writeln!(
            s,
            "| {} | {} | `{}` | {}/{:.2} |",
            row.j,
            row.subset_size,
            row.rule.replace('|', "\\|"),
            row.coverage_count,
            row.recall
        );
    }
    let _ = writeln!(
        s,
        "\n{} labeled, {} dead, {} uncovered of {} features.",
        r.rule_table.len(),
        r.n_dead,
        r.n_uncovered,
        r.d_hid
    );
    s
}

#[derive(Serialize)]
struct Stats<'a> {
    chosen_p: u32,
    d_hid: usize,
    n_labeled: usize,
    n_dead: usize,
    n_uncovered: usize,
    rule_length: &'a Option<Summary>,
    active_per_decision: &'a Option<Summary>,
}

fn write_heatmap_csv(path: &Path, r: &GlobalReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = std::iter::once("class".to_string())
        .chain(r.feature_labels.iter().enumerate().map(|(j, l)| format!("f{j}: {l}")))
        .collect();
    w.write_record(&header)?;
    for (c, row) in r.weights.iter().enumerate() {
        let name = r.class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        w.write_record(std::iter::once(name).chain(row.iter().map(|v| v.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, sweep: &[SweepEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p", "n_features", "n_alive", "proportion", "avg_recall"])?;
    for s in sweep {
        w.write_record([
            s.p.to_string(),
            s.n_features.to_string(),
            s.n_alive.to_string(),
            s.proportion.to_string(),
            s.avg_recall.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Diverging blue/white/red grid of `W'`, symmetric around zero.
pub fn write_heatmap_svg(path: &Path, r: &GlobalReport) -> Result<()> {
    let cell = 24usize;
    let left = 90usize;
    let top = 20usize;
    let cols = r.d_hid;
    let rows = r.weights.len();
    let scale = r
        .weights
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="monospace" font-size="11">"#,
        left + cols * cell + 10,
        top + rows * cell + 30
    );
    for j in 0..cols {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{j}</text>"#,
            left + j * cell + cell / 2,
            top - 6
        );
    }
    for (c, row) in r.weights.iter().enumerate() {
        let name = r.class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6,
            top + c * cell + cell / 2 + 4,
            xml_escape(&name)
        );
        for (j, &v) in row.iter().enumerate() {
            let t = (v / scale).clamp(-1.0, 1.0);
            let fade = |x: f64| (255.0 * (1.0 - x)).round() as u8;
            let (red, green, blue) = if t >= 0.0 {
                (255, fade(t), fade(t))
            } else {
                (fade(-t), fade(-t), 255)
            };
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb({red},{green},{blue})"><title>{}: {v:.4}</title></rect>"#,
                left + j * cell,
                top + c * cell,
                xml_escape(&r.feature_labels[j])
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{}">max |w| = {scale:.4}</text>"#,
        top + rows * cell + 20
    );
    s.push_str("</svg>\n");
    fs::write(path, s)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// rules.json, rules.md, stats.json, heatmap.csv, sweep.json and one
/// explanations/<id>.json per explanation.
pub fn write_bundle(
    dir: &Path,
    report: &GlobalReport,
    dict: &FeatureDictionary,
    explanations: &[LocalExplanation],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("rules.json"), serde_json::to_string_pretty(&dict.features)?)?;
    fs::write(dir.join("rules.md"), rules_markdown(report))?;
    let stats = Stats {
        chosen_p: report.chosen_p,
        d_hid: report.d_hid,
        n_labeled: report.rule_table.len(),
        n_dead: report.n_dead,
        n_uncovered: report.n_uncovered,
        rule_length: &report.rule_length,
        active_per_decision: &report.active_per_decision,
    };
    fs::write(dir.join("stats.json"), serde_json::to_string_pretty(&stats)?)?;
    write_heatmap_csv(&dir.join("heatmap.csv"), report)?;
    fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&report.sweep)?)?;
    if !explanations.is_empty() {
        let ex = dir.join("explanations");
        fs::create_dir_all(&ex)?;
        for e in explanations {
            fs::write(
                ex.join(format!("{}.json", file_stem(&e.instance))),
                serde_json::to_string_pretty(e)?,
            )?;
        }
    }
    Ok(())
}
