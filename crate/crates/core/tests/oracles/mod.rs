//! Brute-force reference implementations shared by the integration tests
//! and the acceptance target. None of them reuse library internals.
#![allow(dead_code)]

use medeval_core::rater::adjudicate::{LabelVerdict, Provenance};
use medeval_core::rater::{CaseRecord, CaseStatus, RubricRating, Verdict};
use medeval_core::split::synthetic::RATIO_CELLS;
use medeval_core::split::{AnswerType, BalanceObjective, QaItem, RatioTarget, Region, Split};
use medeval_core::text::cider::cider_tokens;
use std::collections::BTreeMap;

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

// Independent n-gram counting: nested loops, no hashing.
fn count_in(seq: &[String], gram: &[String]) -> usize {
    if seq.len() < gram.len() {
        return 0;
    }
    (0..=seq.len() - gram.len()).filter(|&i| &seq[i..i + gram.len()] == gram).count()
}

pub fn bleu_oracle(pred: &[String], refs: &[Vec<String>]) -> f64 {
    if pred.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    for n in 1..=4 {
        if pred.len() < n {
            return 0.0;
        }
        let total = pred.len() - n + 1;
        let mut matched = 0;
        let mut seen: Vec<&[String]> = Vec::new();
        for i in 0..total {
            let g = &pred[i..i + n];
            if seen.contains(&g) {
                continue;
            }
            seen.push(g);
            let max_ref = refs.iter().map(|r| count_in(r, g)).max().unwrap();
            matched += count_in(pred, g).min(max_ref);
        }
        if matched == 0 {
            return 0.0;
        }
        product *= matched as f64 / total as f64;
    }
    let c = pred.len() as f64;
    let mut r = refs[0].len();
    for x in refs {
        let (d, best) = ((x.len() as f64 - c).abs(), (r as f64 - c).abs());
        if d < best || (d == best && x.len() < r) {
            r = x.len();
        }
    }
    let bp = if c < r as f64 { (1.0 - r as f64 / c).exp() } else { 1.0 };
    bp * product.powf(0.25)
}

/// Longest common subsequence by enumerating every subsequence of `a`.
pub fn lcs_brute(a: &[String], b: &[String]) -> usize {
    let is_subseq = |sub: &[&String]| {
        let mut it = b.iter();
        sub.iter().all(|x| it.any(|y| y == *x))
    };
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if sub.len() > best && is_subseq(&sub) {
            best = sub.len();
        }
    }
    best
}

pub fn rouge_oracle(pred: &[String], reference: &[String]) -> f64 {
    if pred.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let lcs = lcs_brute(pred, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let (p, r) = (lcs / pred.len() as f64, lcs / reference.len() as f64);
    let beta2 = 1.2f64 * 1.2;
    (1.0 + beta2) * p * r / (r + beta2 * p)
}

/// TF-IDF cosine over n = 1..=4 with document frequency counted per
/// reference set, using linear scans instead of maps.
pub fn cider_oracle(pred: &str, refs: &[String], corpus: &[Vec<String>]) -> f64 {
    let docs: Vec<Vec<Vec<String>>> = corpus.iter().map(|rs| rs.iter().map(|r| cider_tokens(r)).collect()).collect();
    let grams = |s: &[String], n: usize| -> Vec<Vec<String>> {
        if s.len() < n { vec![] } else { s.windows(n).map(|w| w.to_vec()).collect() }
    };
    let df = |g: &Vec<String>, n: usize| docs.iter().filter(|d| d.iter().any(|r| grams(r, n).contains(g))).count();
    let vec_of = |s: &[String], n: usize| -> Vec<(Vec<String>, f64)> {
        let mut out: Vec<(Vec<String>, f64)> = Vec::new();
        for g in grams(s, n) {
            if let Some(e) = out.iter_mut().find(|e| e.0 == g) {
                e.1 += 1.0;
            } else {
                out.push((g, 1.0));
            }
        }
        for e in out.iter_mut() {
            e.1 *= (docs.len() as f64).ln() - (df(&e.0, n).max(1) as f64).ln();
        }
        out
    };
    let cos = |a: &[(Vec<String>, f64)], b: &[(Vec<String>, f64)]| {
        let na = a.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        let nb = b.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let dot: f64 = a.iter().map(|x| b.iter().find(|y| y.0 == x.0).map_or(0.0, |y| x.1 * y.1)).sum();
        dot / (na * nb)
    };
    if refs.is_empty() {
        return 0.0;
    }
    let p = cider_tokens(pred);
    let rs: Vec<Vec<String>> = refs.iter().map(|r| cider_tokens(r)).collect();
    let mut total = 0.0;
    for n in 1..=4 {
        let pv = vec_of(&p, n);
        total += rs.iter().map(|r| cos(&pv, &vec_of(r, n))).sum::<f64>() / rs.len() as f64;
    }
    10.0 * total / 4.0
}

pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Binary, one feature: the objective depends on a = w1 − w0 and b = b1 − b0,
/// with the penalty minimized at w0 = −w1, giving λa²/4.
fn reduced_loss(x: &[f64], y: &[usize], lambda: f64, a: f64, b: f64) -> f64 {
    let nll: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let s = if yi == 1 { 1.0 } else { -1.0 };
            let m = -s * (a * xi + b);
            // log(1 + e^m), stable
            if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() }
        })
        .sum::<f64>()
        / x.len() as f64;
    nll + lambda * a * a / 4.0
}

/// Zooming dense grid over (a, b).
pub fn grid_minimum(x: &[f64], y: &[usize], lambda: f64) -> f64 {
    let (mut ca, mut cb, mut half) = (0.0, 0.0, 20.0);
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let steps = 40;
        let (mut ba, mut bb) = (ca, cb);
        for i in 0..=steps {
            for j in 0..=steps {
                let a = ca - half + 2.0 * half * i as f64 / steps as f64;
                let b = cb - half + 2.0 * half * j as f64 / steps as f64;
                let v = reduced_loss(x, y, lambda, a, b);
                if v < best {
                    best = v;
                    ba = a;
                    bb = b;
                }
            }
        }
        ca = ba;
        cb = bb;
        half *= 0.5;
    }
    best
}

/// Objective recomputed from scratch over items, independent of the search's bookkeeping.
pub fn split_objective(items: &[QaItem], assignment: &BTreeMap<String, Split>, objective: &BalanceObjective) -> f64 {
    let n = items.len() as f64;
    let regions: Vec<Region> = Region::ALL.into_iter().filter(|r| items.iter().any(|i| i.region == *r)).collect();
    let types: Vec<String> = {
        let mut t: Vec<String> = items.iter().map(|i| i.question_type.clone()).collect();
        t.sort();
        t.dedup();
        t
    };
    let count = |f: &dyn Fn(&QaItem) -> bool| items.iter().filter(|i| f(i)).count() as f64;
    let pooled: Vec<f64> = types.iter().map(|t| count(&|i| &i.question_type == t) / n).collect();
    let log2_term = |a: f64, b: f64| if a > 0.0 { a * (2.0 * a / (a + b)).log2() } else { 0.0 };

    let mut ratio = 0.0;
    let mut qtype = 0.0;
    let mut size = 0.0;
    for (s_idx, s) in Split::ALL.into_iter().enumerate() {
        let in_s = |i: &QaItem| assignment[&i.image_id] == s;
        for &r in &regions {
            let open = count(&|i| in_s(i) && i.region == r && i.answer_type == AnswerType::Open);
            let closed = count(&|i| in_s(i) && i.region == r && i.answer_type == AnswerType::Closed);
            let pooled_open = count(&|i| i.region == r && i.answer_type == AnswerType::Open);
            let pooled_closed = count(&|i| i.region == r && i.answer_type == AnswerType::Closed);
            let target = objective
                .ratio_targets
                .iter()
                .find(|t| t.region == r && t.split == Some(s))
                .or_else(|| objective.ratio_targets.iter().find(|t| t.region == r && t.split.is_none()))
                .map(|t| t.ratio)
                .unwrap_or(pooled_open / pooled_closed.max(1.0));
            ratio += (open / closed.max(1.0) - target).abs();
        }
        let size_s = count(&|i| in_s(i));
        if size_s == 0.0 {
            qtype += 1.0;
        } else {
            let p: Vec<f64> = types.iter().map(|t| count(&|i| in_s(i) && &i.question_type == t) / size_s).collect();
            let js: f64 = p.iter().zip(&pooled).map(|(&a, &b)| 0.5 * log2_term(a, b) + 0.5 * log2_term(b, a)).sum();
            qtype += js;
        }
        size += (size_s / n - objective.size_targets[s_idx]).abs();
    }
    objective.w_ratio * ratio + objective.w_qtype * qtype + objective.w_size * size
}

/// Best objective over all 3^images legal assignments.
pub fn split_brute_force(items: &[QaItem], objective: &BalanceObjective) -> f64 {
    let mut images: Vec<String> = items.iter().map(|i| i.image_id.clone()).collect();
    images.sort();
    images.dedup();
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(images.len() as u32) {
        let mut c = code;
        let mut assignment = BTreeMap::new();
        for img in &images {
            assignment.insert(img.clone(), Split::ALL[c % 3]);
            c /= 3;
        }
        let legal = items.iter().all(|i| match i.legacy_split {
            Some(Split::Validation) => assignment[&i.image_id] == Split::Validation,
            Some(Split::Test) => assignment[&i.image_id] == Split::Test,
            _ => true,
        });
        if legal {
            best = best.min(split_objective(items, &assignment, objective));
        }
    }
    best
}

/// Per-cell open/closed ratios and split sizes of the published corpus.
pub fn published_targets() -> BalanceObjective {
    let n: usize = RATIO_CELLS.iter().map(|c| c.2 + c.3).sum();
    let mut size_targets = [0.0; 3];
    for c in RATIO_CELLS {
        size_targets[c.1.index()] += (c.2 + c.3) as f64 / n as f64;
    }
    BalanceObjective {
        ratio_targets: RATIO_CELLS
            .iter()
            .map(|&(region, split, open, closed)| RatioTarget {
                region,
                split: Some(split),
                ratio: open as f64 / closed as f64,
            })
            .collect(),
        size_targets,
        ..BalanceObjective::default()
    }
}

/// Adjudication rule table written as explicit counting.
pub fn expected_adjudication(votes: [LabelVerdict; 3], senior: Option<LabelVerdict>) -> Option<(LabelVerdict, Provenance)> {
    let mut tally: BTreeMap<LabelVerdict, usize> = BTreeMap::new();
    for v in votes {
        *tally.entry(v).or_default() += 1;
    }
    match tally.len() {
        1 => Some((votes[0], Provenance::Unanimous)),
        2 => Some((*tally.iter().find(|(_, &n)| n == 2).unwrap().0, Provenance::Majority)),
        _ => senior.map(|s| (s, Provenance::Senior)),
    }
}

pub fn rating(case: &str, reader: &str, verdict: Verdict, ai_a: bool) -> RubricRating {
    RubricRating {
        case_id: case.into(),
        reader_id: reader.into(),
        verdict,
        comment: String::new(),
        ai_is_report_a: ai_a,
        timestamp_ms: 0,
    }
}

/// Verdict a reader would enter for AI-relative ordinal `o` given the presentation.
pub fn verdict_for(o: usize, ai_a: bool) -> Verdict {
    let v = [Verdict::B2, Verdict::B1, Verdict::C, Verdict::A1, Verdict::A2][o];
    if ai_a { v } else { v.mirror() }
}

pub fn case(id: &str, status: CaseStatus) -> CaseRecord {
    CaseRecord {
        case_id: id.into(),
        dataset: "synthetic".into(),
        status,
        report_ai: "ai".into(),
        report_original: "orig".into(),
        image_refs: vec![],
    }
}

/// Ratings encoding the published MIMIC-CXR summary: 57% superior or
/// similar on normal cases, 43% on abnormal, 72% clinically acceptable
/// overall. Reader "kept" carries the table; "dropped" always prefers the AI.
pub fn table5_fixture() -> (Vec<RubricRating>, BTreeMap<String, CaseRecord>) {
    // Per group, counts in ordinal order much_worse..much_better, plus X.
    let normal = [(0usize, 15usize), (1, 28), (2, 30), (3, 17), (4, 10)];
    let abnormal = [(0usize, 41usize), (1, 16), (2, 20), (3, 13), (4, 10)];
    let mut ratings = Vec::new();
    let mut cases = BTreeMap::new();
    let mut i = 0;
    for (status, table) in [(CaseStatus::Normal, normal), (CaseStatus::Abnormal, abnormal)] {
        for (o, n) in table {
            for _ in 0..n {
                let id = format!("c{i:03}");
                let ai_a = i % 3 == 0;
                cases.insert(id.clone(), case(&id, status));
                ratings.push(rating(&id, "kept", verdict_for(o, ai_a), ai_a));
                ratings.push(rating(&id, "dropped", verdict_for(4, ai_a), ai_a));
                i += 1;
            }
        }
    }
    for j in 0..25 {
        let id = format!("x{j:02}");
        cases.insert(id.clone(), case(&id, if j % 2 == 0 { CaseStatus::Normal } else { CaseStatus::Abnormal }));
        ratings.push(rating(&id, "kept", Verdict::X, j % 2 == 0));
    }
    (ratings, cases)
}

/// Specialists s1 and s2 plus readers "low" (κ = 19/100 against each
/// specialist) and "edge" (κ = 1/5).
pub fn elimination_fixture() -> Vec<RubricRating> {
    let low = ([2, 1, 3, 3, 1, 2, 3, 1, 1, 3, 1, 1], [3, 1, 4, 0, 1, 1, 3, 2, 3, 3, 0, 4]);
    let edge = ([3, 3, 3, 0, 4, 3, 1, 4, 1, 0], [3, 0, 1, 1, 3, 2, 1, 4, 1, 4]);
    let mut ratings = Vec::new();
    let mut add = |prefix: &str, spec: &[usize], reader: &str, codes: &[usize]| {
        for (i, (&s, &r)) in spec.iter().zip(codes).enumerate() {
            let id = format!("{prefix}{i}");
            let ai_a = i % 2 == 0;
            for sp in ["s1", "s2"] {
                ratings.push(rating(&id, sp, verdict_for(s, ai_a), ai_a));
            }
            ratings.push(rating(&id, reader, verdict_for(r, ai_a), ai_a));
        }
    };
    add("l", &low.0, "low", &low.1);
    add("e", &edge.0, "edge", &edge.1);
    ratings
}
