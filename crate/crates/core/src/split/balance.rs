//! Attribute-balanced three-way split by seeded greedy construction followed
//! by hill climbing over single-unit moves and pairwise swaps, with random
//! restarts whenever the walk stalls.
//!
//! A unit is the smallest indivisible block: one image, or all images of a
//! patient when patient ids are present. Only legal moves are ever generated,
//! so every visited state satisfies the hard constraints.

use super::{validate_items, AnswerType, QaItem, Region, Split, SplitAssignment, SplitError};
use crate::seed::derive_indexed_seed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const S: usize = 3;
const R: usize = 4;
const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioTarget {
    pub region: Region,
    /// `None` applies to every split without a more specific entry.
    #[serde(default)]
    pub split: Option<Split>,
    /// Open-to-closed ratio, e.g. 0.68 for 68%.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceObjective {
    pub w_ratio: f64,
    pub w_qtype: f64,
    pub w_size: f64,
    /// Overrides; regions without one use the pooled corpus ratio.
    #[serde(default)]
    pub ratio_targets: Vec<RatioTarget>,
    /// Fraction of items per split (train, validation, test).
    pub size_targets: [f64; S],
}

impl Default for BalanceObjective {
    fn default() -> Self {
        BalanceObjective {
            w_ratio: 1.0,
            w_qtype: 1.0,
            w_size: 0.5,
            ratio_targets: Vec::new(),
            size_targets: [1.0 / 3.0; S],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    /// Former validation/test images must stay in validation/test.
    pub legacy: bool,
    /// Images of one patient move together.
    pub group_patients: bool,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            legacy: true,
            group_patients: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub ratio: f64,
    pub qtype: f64,
    pub size: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceResult {
    pub assignment: SplitAssignment,
    pub terms: ObjectiveTerms,
    pub restart: usize,
    pub restart_seed: u64,
    /// Objective after construction and after every accepted move.
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone)]
struct Unit {
    images: Vec<String>,
    allowed: [bool; S],
    open: [u32; R],
    closed: [u32; R],
    qtypes: Vec<(usize, u32)>,
    size: u32,
}

impl Unit {
    fn movable(&self) -> bool {
        self.allowed.iter().filter(|&&a| a).count() > 1
    }
}

/// Everything the objective needs, precomputed from the corpus.
#[derive(Debug, Clone)]
pub struct Problem {
    units: Vec<Unit>,
    n_qtypes: usize,
    pooled_qtype: Vec<f64>,
    present: [bool; R],
    targets: [[f64; R]; S],
    size_targets: [f64; S],
    weights: (f64, f64, f64),
    total: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Counts {
    open: [[u32; R]; S],
    closed: [[u32; R]; S],
    qtype: Vec<[u32; S]>,
    size: [u32; S],
}

impl Counts {
    fn new(n_qtypes: usize) -> Self {
        Counts {
            open: [[0; R]; S],
            closed: [[0; R]; S],
            qtype: vec![[0; S]; n_qtypes],
            size: [0; S],
        }
    }

    fn add(&mut self, unit: &Unit, s: usize) {
        for r in 0..R {
            self.open[s][r] += unit.open[r];
            self.closed[s][r] += unit.closed[r];
        }
        for &(q, c) in &unit.qtypes {
            self.qtype[q][s] += c;
        }
        self.size[s] += unit.size;
    }

    fn remove(&mut self, unit: &Unit, s: usize) {
        for r in 0..R {
            self.open[s][r] -= unit.open[r];
            self.closed[s][r] -= unit.closed[r];
        }
        for &(q, c) in &unit.qtypes {
            self.qtype[q][s] -= c;
        }
        self.size[s] -= unit.size;
    }
}

/// Open-to-closed ratio with an empty closed count treated as 1.
pub fn open_closed_ratio(open: u32, closed: u32) -> f64 {
    open as f64 / closed.max(1) as f64
}

/// Jensen-Shannon divergence in bits between two distributions.
pub fn jsd(p: &[f64], q: &[f64]) -> f64 {
    let kl_to_mid = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .filter(|(&x, _)| x > 0.0)
            .map(|(&x, &y)| x * (2.0 * x / (x + y)).log2())
            .sum()
    };
    (0.5 * kl_to_mid(p, q) + 0.5 * kl_to_mid(q, p)).max(0.0)
}

impl Problem {
    pub fn new(items: &[QaItem], objective: &BalanceObjective, constraints: Constraints) -> Result<Self, SplitError> {
        validate_items(items)?;
        let (w_ratio, w_qtype, w_size) = (objective.w_ratio, objective.w_qtype, objective.w_size);
        if [w_ratio, w_qtype, w_size].iter().any(|w| !(*w >= 0.0)) || w_ratio + w_qtype + w_size <= 0.0 {
            return Err(SplitError::BadWeights);
        }
        if items.is_empty() {
            return Err(SplitError::InvalidInput("no items".into()));
        }

        // Union images into units by patient id.
        let mut image_region: BTreeMap<&str, Region> = BTreeMap::new();
        let mut image_patient: BTreeMap<&str, Option<&str>> = BTreeMap::new();
        for item in items {
            if let Some(prev) = image_region.insert(&item.image_id, item.region) {
                if prev != item.region {
                    return Err(SplitError::InvalidInput(format!("image {} has several regions", item.image_id)));
                }
            }
            let patient = item.patient_id.as_deref().filter(|_| constraints.group_patients);
            let entry = image_patient.entry(&item.image_id).or_insert(None);
            match (*entry, patient) {
                (Some(a), Some(b)) if a != b => {
                    return Err(SplitError::InvalidInput(format!("image {} has several patients", item.image_id)));
                }
                (None, Some(b)) => *entry = Some(b),
                _ => {}
            }
        }
        let mut unit_of_key: BTreeMap<String, usize> = BTreeMap::new();
        let mut unit_of_image: BTreeMap<&str, usize> = BTreeMap::new();
        let mut units: Vec<Unit> = Vec::new();
        for (&image, &patient) in &image_patient {
            let key = match patient {
                Some(p) => format!("patient:{p}"),
                None => format!("image:{image}"),
            };
            let u = *unit_of_key.entry(key).or_insert_with(|| {
                units.push(Unit {
                    images: Vec::new(),
                    allowed: [true; S],
                    open: [0; R],
                    closed: [0; R],
                    qtypes: Vec::new(),
                    size: 0,
                });
                units.len() - 1
            });
            units[u].images.push(image.to_string());
            unit_of_image.insert(image, u);
        }

        let mut qtype_index: BTreeMap<&str, usize> = BTreeMap::new();
        for item in items {
            let n = qtype_index.len();
            qtype_index.entry(item.question_type.as_str()).or_insert(n);
        }
        let n_qtypes = qtype_index.len();
        let mut pooled_counts = vec![0u32; n_qtypes];
        let mut qtype_by_unit: Vec<BTreeMap<usize, u32>> = vec![BTreeMap::new(); units.len()];
        let mut present = [false; R];
        let (mut open_total, mut closed_total) = ([0u32; R], [0u32; R]);
        for item in items {
            let u = unit_of_image[item.image_id.as_str()];
            let r = item.region.index();
            present[r] = true;
            match item.answer_type {
                AnswerType::Open => {
                    units[u].open[r] += 1;
                    open_total[r] += 1;
                }
                AnswerType::Closed => {
                    units[u].closed[r] += 1;
                    closed_total[r] += 1;
                }
            }
            units[u].size += 1;
            let q = qtype_index[item.question_type.as_str()];
            *qtype_by_unit[u].entry(q).or_default() += 1;
            pooled_counts[q] += 1;
            if constraints.legacy {
                let only = match item.legacy_split {
                    Some(Split::Validation) => Some(Split::Validation),
                    Some(Split::Test) => Some(Split::Test),
                    _ => None,
                };
                if let Some(s) = only {
                    for other in Split::ALL {
                        if other != s {
                            units[u].allowed[other.index()] = false;
                        }
                    }
                }
            }
        }
        for (u, unit) in units.iter_mut().enumerate() {
            unit.qtypes = qtype_by_unit[u].iter().map(|(&q, &c)| (q, c)).collect();
            if !unit.allowed.iter().any(|&a| a) {
                return Err(SplitError::InfeasibleConstraints(format!(
                    "images {:?} are bound to both validation and test",
                    unit.images
                )));
            }
        }

        let mut targets = [[0.0; R]; S];
        for (s, row) in targets.iter_mut().enumerate() {
            for (r, cell) in row.iter_mut().enumerate() {
                let region = Region::ALL[r];
                let split = Split::ALL[s];
                let specific = objective
                    .ratio_targets
                    .iter()
                    .find(|t| t.region == region && t.split == Some(split));
                let general = objective.ratio_targets.iter().find(|t| t.region == region && t.split.is_none());
                *cell = specific
                    .or(general)
                    .map(|t| t.ratio)
                    .unwrap_or_else(|| open_closed_ratio(open_total[r], closed_total[r]));
            }
        }
        let total = items.len() as f64;
        Ok(Problem {
            units,
            n_qtypes,
            pooled_qtype: pooled_counts.iter().map(|&c| c as f64 / total).collect(),
            present,
            targets,
            size_targets: objective.size_targets,
            weights: (w_ratio, w_qtype, w_size),
            total,
        })
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    fn terms(&self, c: &Counts) -> ObjectiveTerms {
        let mut ratio = 0.0;
        let mut qtype = 0.0;
        let mut size = 0.0;
        let mut dist = vec![0.0; self.n_qtypes];
        for s in 0..S {
            for r in 0..R {
                if self.present[r] {
                    ratio += (open_closed_ratio(c.open[s][r], c.closed[s][r]) - self.targets[s][r]).abs();
                }
            }
            if c.size[s] == 0 {
                qtype += 1.0;
            } else {
                let n = c.size[s] as f64;
                for (q, d) in dist.iter_mut().enumerate() {
                    *d = c.qtype[q][s] as f64 / n;
                }
                qtype += jsd(&dist, &self.pooled_qtype);
            }
            size += (c.size[s] as f64 / self.total - self.size_targets[s]).abs();
        }
        let (a, b, w) = self.weights;
        ObjectiveTerms {
            ratio,
            qtype,
            size,
            total: a * ratio + b * qtype + w * size,
        }
    }

    fn counts_for(&self, state: &[usize]) -> Counts {
        let mut c = Counts::new(self.n_qtypes);
        for (unit, &s) in self.units.iter().zip(state) {
            c.add(unit, s);
        }
        c
    }

    /// Objective of a full unit-level state, for oracles and audits.
    pub fn evaluate(&self, state: &[usize]) -> ObjectiveTerms {
        self.terms(&self.counts_for(state))
    }

    /// Legal splits for unit `u`.
    pub fn allowed(&self, u: usize) -> Vec<usize> {
        (0..S).filter(|&s| self.units[u].allowed[s]).collect()
    }

    pub fn assignment(&self, state: &[usize]) -> SplitAssignment {
        let mut out = SplitAssignment::new();
        for (unit, &s) in self.units.iter().zip(state) {
            for image in &unit.images {
                out.insert(image.clone(), Split::ALL[s]);
            }
        }
        out
    }

    fn greedy(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.units.len()).collect();
        order.shuffle(rng);
        order.sort_by_key(|&u| std::cmp::Reverse(self.units[u].size));
        let mut state = vec![usize::MAX; self.units.len()];
        let mut counts = Counts::new(self.n_qtypes);
        for u in order {
            let unit = &self.units[u];
            let mut best = (f64::INFINITY, 0);
            for s in (0..S).filter(|&s| unit.allowed[s]) {
                counts.add(unit, s);
                let j = self.terms(&counts).total;
                counts.remove(unit, s);
                if j < best.0 {
                    best = (j, s);
                }
            }
            counts.add(unit, best.1);
            state[u] = best.1;
        }
        state
    }

    fn random_state(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        self.units
            .iter()
            .map(|u| {
                let legal: Vec<usize> = (0..S).filter(|&s| u.allowed[s]).collect();
                legal[rng.random_range(0..legal.len())]
            })
            .collect()
    }

    /// Hill climbing from `state`. After `stall_limit` consecutive rejected
    /// moves the walk restarts from a random legal state; the best state seen
    /// is written back. The trace records every new best.
    fn climb(&self, state: &mut Vec<usize>, rng: &mut ChaCha8Rng, budget: u64) -> Vec<TracePoint> {
        let mut counts = self.counts_for(state);
        let mut current = self.terms(&counts).total;
        let mut best = (current, state.clone());
        let mut trace = vec![TracePoint {
            iteration: 0,
            objective: current,
        }];
        let movable: Vec<usize> = (0..self.units.len()).filter(|&u| self.units[u].movable()).collect();
        if movable.is_empty() {
            return trace;
        }
        let stall_limit = (50 * movable.len() as u64).max(200);
        let mut stall = 0u64;
        for iteration in 1..=budget {
            if stall >= stall_limit {
                *state = self.random_state(rng);
                counts = self.counts_for(state);
                current = self.terms(&counts).total;
                stall = 0;
            } else {
                stall += 1;
                let u = movable[rng.random_range(0..movable.len())];
                let from = state[u];
                if rng.random_bool(0.5) {
                    // Relocate one unit.
                    let choices: Vec<usize> = (0..S).filter(|&s| s != from && self.units[u].allowed[s]).collect();
                    let to = choices[rng.random_range(0..choices.len())];
                    counts.remove(&self.units[u], from);
                    counts.add(&self.units[u], to);
                    let j = self.terms(&counts).total;
                    if j < current - IMPROVEMENT_EPS {
                        state[u] = to;
                        current = j;
                        stall = 0;
                    } else {
                        counts.remove(&self.units[u], to);
                        counts.add(&self.units[u], from);
                    }
                } else {
                    // Swap with a unit from another split when both moves are legal.
                    let v = movable[rng.random_range(0..movable.len())];
                    let to = state[v];
                    if to == from || !self.units[u].allowed[to] || !self.units[v].allowed[from] {
                        continue;
                    }
                    counts.remove(&self.units[u], from);
                    counts.remove(&self.units[v], to);
                    counts.add(&self.units[u], to);
                    counts.add(&self.units[v], from);
                    let j = self.terms(&counts).total;
                    if j < current - IMPROVEMENT_EPS {
                        state[u] = to;
                        state[v] = from;
                        current = j;
                        stall = 0;
                    } else {
                        counts.remove(&self.units[u], to);
                        counts.remove(&self.units[v], from);
                        counts.add(&self.units[u], from);
                        counts.add(&self.units[v], to);
                    }
                }
            }
            if current < best.0 - IMPROVEMENT_EPS {
                best = (current, state.clone());
                trace.push(TracePoint {
                    iteration,
                    objective: current,
                });
            }
        }
        *state = best.1;
        trace
    }

    /// One restart: greedy construction then `budget` hill-climbing iterations.
    pub fn run(&self, seed: u64, budget: u64) -> (Vec<usize>, Vec<TracePoint>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = self.greedy(&mut rng);
        let trace = self.climb(&mut state, &mut rng, budget);
        (state, trace)
    }
}

/// Balance `items` into train/validation/test. Restarts run in parallel and
/// the result with the lowest objective wins, ties going to the earliest restart.
pub fn balance_split(
    items: &[QaItem],
    objective: &BalanceObjective,
    constraints: Constraints,
    seed: u64,
    budget: u64,
    restarts: usize,
) -> Result<BalanceResult, SplitError> {
    let problem = Problem::new(items, objective, constraints)?;
    let runs: Vec<(usize, u64, Vec<usize>, Vec<TracePoint>)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let restart_seed = derive_indexed_seed(seed, "balance_restart", r as u64);
            let (state, trace) = problem.run(restart_seed, budget);
            (r, restart_seed, state, trace)
        })
        .collect();
    let (restart, restart_seed, state, trace) = runs
        .into_iter()
        .min_by(|a, b| {
            let ja = a.3.last().map(|t| t.objective).unwrap_or(f64::INFINITY);
            let jb = b.3.last().map(|t| t.objective).unwrap_or(f64::INFINITY);
            ja.total_cmp(&jb).then(a.0.cmp(&b.0))
        })
        .expect("at least one restart");
    Ok(BalanceResult {
        assignment: problem.assignment(&state),
        terms: problem.evaluate(&state),
        restart,
        restart_seed,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::split::check_contamination;

    fn qa(i: usize, image: &str, region: Region, open: bool, qtype: &str) -> QaItem {
        QaItem {
            qa_id: i.to_string(),
            image_id: image.into(),
            patient_id: None,
            region,
            answer_type: if open { AnswerType::Open } else { AnswerType::Closed },
            question_type: qtype.into(),
            legacy_split: None,
        }
    }

    fn corpus(n_images: usize) -> Vec<QaItem> {
        let mut items = Vec::new();
        for img in 0..n_images {
            let region = Region::ALL[img % 3];
            for k in 0..(2 + img % 5) {
                let i = items.len();
                items.push(qa(i, &format!("img{img}"), region, (img + k) % 3 == 0, ["A", "B", "C"][(img * 7 + k) % 3]));
            }
        }
        items
    }

    #[test]
    fn jsd_properties() {
        assert_eq!(jsd(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert!((jsd(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
        let a = [0.2, 0.3, 0.5];
        let b = [0.6, 0.1, 0.3];
        assert!((jsd(&a, &b) - jsd(&b, &a)).abs() < 1e-15);
    }

    #[test]
    fn trace_is_monotone_and_clean() {
        let items = corpus(60);
        let result = balance_split(&items, &BalanceObjective::default(), Constraints::default(), 5, 20_000, 2).unwrap();
        assert!(result.trace.windows(2).all(|w| w[1].objective < w[0].objective));
        assert!(check_contamination(&result.assignment, &items).is_clean());
        assert_eq!(result.assignment.len(), 60);
        let again = balance_split(&items, &BalanceObjective::default(), Constraints::default(), 5, 20_000, 2).unwrap();
        assert_eq!(again, result);
    }

    #[test]
    fn legacy_membership_respected() {
        let mut items = corpus(30);
        for it in items.iter_mut() {
            if it.image_id == "img3" {
                it.legacy_split = Some(Split::Validation);
            }
            if it.image_id == "img4" {
                it.legacy_split = Some(Split::Test);
            }
        }
        let result = balance_split(&items, &BalanceObjective::default(), Constraints::default(), 1, 5_000, 1).unwrap();
        assert_eq!(result.assignment["img3"], Split::Validation);
        assert_eq!(result.assignment["img4"], Split::Test);
    }

    #[test]
    fn conflicting_legacy_is_infeasible() {
        let mut items = corpus(5);
        items[0].legacy_split = Some(Split::Validation);
        items[1].legacy_split = Some(Split::Test);
        assert_eq!(items[0].image_id, items[1].image_id);
        assert!(matches!(
            balance_split(&items, &BalanceObjective::default(), Constraints::default(), 1, 10, 1),
            Err(SplitError::InfeasibleConstraints(_))
        ));
    }

    #[test]
    fn patients_move_together() {
        let mut items = corpus(40);
        for it in items.iter_mut() {
            let n: usize = it.image_id[3..].parse().unwrap();
            it.patient_id = Some(format!("p{}", n / 4));
        }
        let result = balance_split(&items, &BalanceObjective::default(), Constraints::default(), 2, 5_000, 1).unwrap();
        assert!(check_contamination(&result.assignment, &items).is_clean());
    }

    #[test]
    fn bad_weights_rejected() {
        let objective = BalanceObjective {
            w_ratio: 0.0,
            w_qtype: 0.0,
            w_size: 0.0,
            ..Default::default()
        };
        assert_eq!(
            balance_split(&corpus(3), &objective, Constraints::default(), 0, 1, 1).unwrap_err(),
            SplitError::BadWeights
        );
    }
}
