//! Batch scoring of JSONL prediction files and the RadGraph exchange format.

use super::{bleu4, normalize_with, rouge_l, tokenized_f1_tokens, CiderScorer, NormalizeOptions, TextError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "bleu4")]
    Bleu4,
    #[serde(rename = "rougeL")]
    RougeL,
    #[serde(rename = "cider")]
    Cider,
    #[serde(rename = "tokf1")]
    TokF1,
    #[serde(rename = "em")]
    ExactMatch,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Bleu4, Metric::RougeL, Metric::Cider, Metric::TokF1, Metric::ExactMatch];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu4 => "bleu4",
            Metric::RougeL => "rougeL",
            Metric::Cider => "cider",
            Metric::TokF1 => "tokf1",
            Metric::ExactMatch => "em",
        }
    }

    pub fn parse_set(text: &str) -> Result<Vec<Metric>, TextError> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Metric = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

impl FromStr for Metric {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| TextError::UnknownMetric(s.to_string()))
    }
}

/// One line of the input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub prediction: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub per_example: Vec<(String, f64)>,
    /// Arithmetic mean of `per_example`.
    pub aggregate: f64,
    pub fingerprint: String,
}

impl MetricReport {
    pub fn new(metric: &str, per_example: Vec<(String, f64)>, fingerprint: String) -> Self {
        let aggregate = if per_example.is_empty() {
            0.0
        } else {
            per_example.iter().map(|(_, v)| v).sum::<f64>() / per_example.len() as f64
        };
        MetricReport {
            metric: metric.to_string(),
            per_example,
            aggregate,
            fingerprint,
        }
    }
}

/// Hash of everything that changes a metric's value besides the data.
pub fn metric_fingerprint(metric: Metric, options: NormalizeOptions) -> String {
    let orders = match metric {
        Metric::Bleu4 | Metric::Cider => "1-4",
        _ => "-",
    };
    let extra = match metric {
        Metric::RougeL => "beta=1.2",
        Metric::Cider => "stop=en;stem=porter2;scale=10",
        Metric::Bleu4 => "smoothing=none",
        _ => "",
    };
    let text = format!(
        "{};remove_articles={};orders={orders};{extra}",
        metric.name(),
        options.remove_articles
    );
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn read_examples<R: BufRead>(reader: R) -> Result<Vec<Example>, TextError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| TextError::Invalid(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: Example =
            serde_json::from_str(&line).map_err(|e| TextError::Invalid(format!("line {}: {e}", i + 1)))?;
        out.push(ex);
    }
    Ok(out)
}

/// Score every example. With several references, BLEU and CIDEr use them
/// jointly; ROUGE-L, token F1 and exact match take the best reference.
pub fn run_metrics(examples: &[Example], metrics: &[Metric], options: NormalizeOptions) -> Result<Vec<MetricReport>, TextError> {
    let tok = |s: &str| normalize_with(s, options).tokens;
    let preds: Vec<Vec<String>> = examples.iter().map(|e| tok(&e.prediction)).collect();
    let refs: Vec<Vec<Vec<String>>> = examples.iter().map(|e| e.references.iter().map(|r| tok(r)).collect()).collect();
    let best = |f: &dyn Fn(&[String], &[String]) -> f64, i: usize| {
        refs[i].iter().map(|r| f(&preds[i], r)).fold(0.0, f64::max)
    };
    let mut reports = Vec::new();
    for &metric in metrics {
        let values: Vec<f64> = match metric {
            Metric::Bleu4 => (0..examples.len()).map(|i| bleu4(&preds[i], &refs[i])).collect(),
            Metric::RougeL => (0..examples.len()).map(|i| best(&rouge_l, i)).collect(),
            Metric::TokF1 => (0..examples.len()).map(|i| best(&tokenized_f1_tokens, i)).collect(),
            Metric::ExactMatch => (0..examples.len())
                .map(|i| best(&|p, r| if p == r { 1.0 } else { 0.0 }, i))
                .collect(),
            Metric::Cider => {
                let corpus: Vec<Vec<String>> = examples.iter().map(|e| e.references.clone()).collect();
                let scorer = CiderScorer::fit(&corpus)?;
                examples.iter().map(|e| scorer.score(&e.prediction, &e.references)).collect()
            }
        };
        let per = examples.iter().map(|e| e.id.clone()).zip(values).collect();
        reports.push(MetricReport::new(metric.name(), per, metric_fingerprint(metric, options)));
    }
    Ok(reports)
}

/// Per-example JSONL: `{"id": .., "<metric>": .., ...}` in input order.
pub fn write_scores_jsonl<W: Write>(mut out: W, reports: &[MetricReport]) -> std::io::Result<()> {
    let n = reports.first().map_or(0, |r| r.per_example.len());
    for i in 0..n {
        let mut row = serde_json::Map::new();
        row.insert("id".into(), reports[0].per_example[i].0.clone().into());
        for r in reports {
            row.insert(r.metric.clone(), r.per_example[i].1.into());
        }
        writeln!(out, "{}", serde_json::Value::Object(row))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadGraphPair {
    pub id: String,
    pub prediction: String,
    pub reference: String,
}

/// Lowercased (prediction, reference) pairs for the external RadGraph scorer,
/// one line per reference.
pub fn write_radgraph_exchange<W: Write>(mut out: W, examples: &[Example]) -> std::io::Result<usize> {
    let mut lines = 0;
    for ex in examples {
        for reference in &ex.references {
            let pair = RadGraphPair {
                id: ex.id.clone(),
                prediction: ex.prediction.to_lowercase(),
                reference: reference.to_lowercase(),
            };
            writeln!(out, "{}", serde_json::to_string(&pair).expect("pair serializes"))?;
        }
        lines += ex.references.len();
    }
    Ok(lines)
}

#[derive(Debug, Deserialize)]
struct RadGraphScore {
    id: String,
    score: f64,
}

/// Read `{"id", "score"}` lines from the external tool. Repeated ids (one per
/// reference) keep the maximum.
pub fn ingest_radgraph<R: BufRead>(reader: R) -> Result<MetricReport, TextError> {
    let mut per: Vec<(String, f64)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| TextError::Invalid(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: RadGraphScore =
            serde_json::from_str(&line).map_err(|e| TextError::Invalid(format!("line {}: {e}", i + 1)))?;
        if !s.score.is_finite() {
            return Err(TextError::Invalid(format!("line {}: non-finite score", i + 1)));
        }
        match per.iter_mut().find(|(id, _)| *id == s.id) {
            Some(entry) => entry.1 = entry.1.max(s.score),
            None => per.push((s.id, s.score)),
        }
    }
    Ok(MetricReport::new("radgraph_f1", per, "external".into()))
}
