//! CIDEr: TF-IDF weighted n-gram cosine similarity (n = 1..=4), averaged
//! over references and orders and scaled by 10. Tokens are normalized,
//! stopwords dropped and the remainder Porter2-stemmed.

use super::{normalize_answer, TextError};
use rust_stemmers::{Algorithm, Stemmer};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

pub const MAX_N: usize = 4;
pub const SCALE: f64 = 10.0;

pub fn stopwords() -> &'static HashSet<&'static str> {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        include_str!("../../data/stopwords_en.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// Normalize, drop stopwords, stem.
pub fn cider_tokens(text: &str) -> Vec<String> {
    let stemmer = Stemmer::create(Algorithm::English);
    let stop = stopwords();
    normalize_answer(text)
        .tokens
        .into_iter()
        .filter(|t| !stop.contains(t.as_str()))
        .map(|t| stemmer.stem(&t).into_owned())
        .collect()
}

type Gram = Vec<String>;

// Ordered maps keep floating-point sums independent of hash seeds.
fn grams(tokens: &[String], n: usize) -> BTreeMap<Gram, f64> {
    let mut out = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w.to_vec()).or_insert(0.0) += 1.0;
        }
    }
    out
}

/// Document frequencies fitted once on a corpus of reference sets.
#[derive(Debug, Clone)]
pub struct CiderScorer {
    docs: usize,
    df: Vec<HashMap<Gram, usize>>,
}

impl CiderScorer {
    /// Each corpus entry is the reference set of one example.
    pub fn fit(corpus: &[Vec<String>]) -> Result<Self, TextError> {
        if corpus.is_empty() {
            return Err(TextError::EmptyCorpus);
        }
        let mut df: Vec<HashMap<Gram, usize>> = vec![HashMap::new(); MAX_N];
        for refs in corpus {
            let tokenized: Vec<Vec<String>> = refs.iter().map(|r| cider_tokens(r)).collect();
            for (n, table) in df.iter_mut().enumerate() {
                let mut seen: HashSet<Gram> = HashSet::new();
                for t in &tokenized {
                    seen.extend(grams(t, n + 1).into_keys());
                }
                for g in seen {
                    *table.entry(g).or_default() += 1;
                }
            }
        }
        Ok(CiderScorer { docs: corpus.len(), df })
    }

    fn idf(&self, n: usize, g: &Gram) -> f64 {
        let df = self.df[n].get(g).copied().unwrap_or(0).max(1);
        (self.docs as f64).ln() - (df as f64).ln()
    }

    fn vector(&self, tokens: &[String], n: usize) -> BTreeMap<Gram, f64> {
        let mut v = grams(tokens, n + 1);
        for (g, w) in v.iter_mut() {
            *w *= self.idf(n, g);
        }
        v
    }

    /// Score of one prediction against its references.
    pub fn score(&self, pred: &str, refs: &[String]) -> f64 {
        if refs.is_empty() {
            return 0.0;
        }
        let p = cider_tokens(pred);
        let rs: Vec<Vec<String>> = refs.iter().map(|r| cider_tokens(r)).collect();
        let mut total = 0.0;
        for n in 0..MAX_N {
            let pv = self.vector(&p, n);
            let mut sum = 0.0;
            for r in &rs {
                sum += cosine(&pv, &self.vector(r, n));
            }
            total += sum / rs.len() as f64;
        }
        SCALE * total / MAX_N as f64
    }
}

fn cosine(a: &BTreeMap<Gram, f64>, b: &BTreeMap<Gram, f64>) -> f64 {
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, v)| b.get(g).map(|w| v * w)).sum();
    dot / (na * nb)
}

/// Per-example scores and their mean, with IDF fitted on `corpus`.
pub fn cider(preds: &[String], refs: &[Vec<String>], corpus: &[Vec<String>]) -> Result<(f64, Vec<f64>), TextError> {
    if preds.len() != refs.len() {
        return Err(TextError::Invalid(format!("{} predictions vs {} reference sets", preds.len(), refs.len())));
    }
    let scorer = CiderScorer::fit(corpus)?;
    let per: Vec<f64> = preds.iter().zip(refs).map(|(p, r)| scorer.score(p, r)).collect();
    let mean = if per.is_empty() { 0.0 } else { per.iter().sum::<f64>() / per.len() as f64 };
    Ok((mean, per))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn preprocessing_stems_and_filters() {
        assert_eq!(cider_tokens("The lungs are clearly expanded."), s(&["lung", "clear", "expand"]));
    }

    #[test]
    fn single_document_corpus_has_zero_idf() {
        let refs = vec![s(&["mild cardiomegaly without edema"])];
        let (score, _) = cider(&s(&["mild cardiomegaly without edema"]), &refs, &refs).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn identical_prediction_scores_maximum() {
        let corpus = vec![
            s(&["mild cardiomegaly without edema"]),
            s(&["small left pleural effusion"]),
            s(&["no acute cardiopulmonary process"]),
        ];
        let scorer = CiderScorer::fit(&corpus).unwrap();
        let exact = scorer.score("mild cardiomegaly without edema", &corpus[0]);
        assert!((exact - SCALE).abs() < 1e-12);
        assert_eq!(scorer.score("pneumothorax", &corpus[0]), 0.0);
        assert_eq!(CiderScorer::fit(&[]).unwrap_err(), TextError::EmptyCorpus);
    }
}
