//! Per-region answer-type table and per-question-type table, as CSV.

use super::{AnswerType, QaItem, Region, Split, SplitAssignment, SplitError};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub region: Option<Region>,
    pub split: Option<Split>,
    pub open: usize,
    pub closed: usize,
    pub total: usize,
}

impl RatioRow {
    /// Open-to-closed ratio; `None` when there are no closed questions.
    pub fn ratio(&self) -> Option<f64> {
        (self.closed > 0).then(|| self.open as f64 / self.closed as f64)
    }

    pub fn ratio_text(&self) -> String {
        match self.ratio() {
            Some(r) => format!("{:.1}%", 100.0 * r),
            None => "n/a".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    /// One row per present region and split, then the corpus-wide row.
    pub ratio_rows: Vec<RatioRow>,
    pub regions: Vec<Region>,
    /// Question types ordered by overall count, descending, then by name.
    pub question_types: Vec<String>,
    /// `qtype_counts[type][(region, split)]`.
    pub qtype_counts: BTreeMap<String, BTreeMap<(Region, Split), usize>>,
    pub cell_totals: BTreeMap<(Region, Split), usize>,
    pub total: usize,
}

pub fn split_report(assignment: &SplitAssignment, items: &[QaItem]) -> Result<SplitReport, SplitError> {
    let mut open: BTreeMap<(Region, Split), usize> = BTreeMap::new();
    let mut closed: BTreeMap<(Region, Split), usize> = BTreeMap::new();
    let mut qtype_counts: BTreeMap<String, BTreeMap<(Region, Split), usize>> = BTreeMap::new();
    let mut regions: Vec<Region> = Vec::new();
    for item in items {
        let split = *assignment
            .get(&item.image_id)
            .ok_or_else(|| SplitError::InvalidInput(format!("image {} is not assigned", item.image_id)))?;
        let key = (item.region, split);
        match item.answer_type {
            AnswerType::Open => *open.entry(key).or_default() += 1,
            AnswerType::Closed => *closed.entry(key).or_default() += 1,
        }
        *qtype_counts.entry(item.question_type.clone()).or_default().entry(key).or_default() += 1;
        if !regions.contains(&item.region) {
            regions.push(item.region);
        }
    }
    regions.sort();
    let mut ratio_rows = Vec::new();
    let mut cell_totals = BTreeMap::new();
    for &region in &regions {
        for split in Split::ALL {
            let o = open.get(&(region, split)).copied().unwrap_or(0);
            let c = closed.get(&(region, split)).copied().unwrap_or(0);
            cell_totals.insert((region, split), o + c);
            ratio_rows.push(RatioRow {
                region: Some(region),
                split: Some(split),
                open: o,
                closed: c,
                total: o + c,
            });
        }
    }
    let all_open: usize = open.values().sum();
    let all_closed: usize = closed.values().sum();
    ratio_rows.push(RatioRow {
        region: None,
        split: None,
        open: all_open,
        closed: all_closed,
        total: all_open + all_closed,
    });
    let mut question_types: Vec<String> = qtype_counts.keys().cloned().collect();
    question_types.sort_by(|a, b| {
        let ta: usize = qtype_counts[a].values().sum();
        let tb: usize = qtype_counts[b].values().sum();
        tb.cmp(&ta).then_with(|| a.cmp(b))
    });
    Ok(SplitReport {
        ratio_rows,
        regions,
        question_types,
        qtype_counts,
        cell_totals,
        total: items.len(),
    })
}

fn label(region: Option<Region>, split: Option<Split>) -> (String, String) {
    match (region, split) {
        (Some(r), Some(s)) => (r.name().to_string(), s.name().to_string()),
        _ => ("all".to_string(), String::new()),
    }
}

impl SplitReport {
    pub fn ratio_csv(&self) -> String {
        let mut out = String::from("region,split,open,closed,total,open_to_closed\n");
        for row in &self.ratio_rows {
            let (r, s) = label(row.region, row.split);
            writeln!(out, "{r},{s},{},{},{},{}", row.open, row.closed, row.total, row.ratio_text()).unwrap();
        }
        out
    }

    pub fn qtype_csv(&self) -> String {
        let columns: Vec<(Region, Split)> = self
            .regions
            .iter()
            .flat_map(|&r| Split::ALL.into_iter().map(move |s| (r, s)))
            .collect();
        let mut out = String::from("question_type");
        for (r, s) in &columns {
            write!(out, ",{}/{}", r.name(), s.name()).unwrap();
        }
        out.push_str(",all\n");
        out.push_str("total");
        for c in &columns {
            write!(out, ",{}", self.cell_totals[c]).unwrap();
        }
        writeln!(out, ",{}", self.total).unwrap();
        for q in &self.question_types {
            let counts = &self.qtype_counts[q];
            out.push_str(q);
            for c in &columns {
                write!(out, ",{}", counts.get(c).copied().unwrap_or(0)).unwrap();
            }
            writeln!(out, ",{}", counts.values().sum::<usize>()).unwrap();
        }
        out
    }

    pub fn row(&self, region: Region, split: Split) -> Option<&RatioRow> {
        self.ratio_rows
            .iter()
            .find(|r| r.region == Some(region) && r.split == Some(split))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(open: usize, closed: usize, region: Region, image: &str) -> Vec<QaItem> {
        (0..open + closed)
            .map(|i| QaItem {
                qa_id: format!("{image}-{i}"),
                image_id: image.into(),
                patient_id: None,
                region,
                answer_type: if i < open { AnswerType::Open } else { AnswerType::Closed },
                question_type: if i % 2 == 0 { "Presence" } else { "Size" }.into(),
                legacy_split: None,
            })
            .collect()
    }

    #[test]
    fn abdomen_train_row() {
        let its = items(104, 153, Region::Abdomen, "a");
        let assignment: SplitAssignment = [("a".to_string(), Split::Train)].into();
        let report = split_report(&assignment, &its).unwrap();
        let row = report.row(Region::Abdomen, Split::Train).unwrap();
        assert_eq!(row.total, 257);
        assert_eq!(row.ratio_text(), "68.0%");
        let empty = report.row(Region::Abdomen, Split::Test).unwrap();
        assert_eq!((empty.total, empty.ratio_text().as_str()), (0, "n/a"));
        assert!(report.ratio_csv().contains("abdomen,validation,0,0,0,n/a"));
    }

    #[test]
    fn columns_sum_to_totals() {
        let mut its = items(3, 4, Region::Chest, "c");
        its.extend(items(5, 1, Region::Head, "h"));
        let assignment: SplitAssignment = [("c".to_string(), Split::Train), ("h".to_string(), Split::Test)].into();
        let report = split_report(&assignment, &its).unwrap();
        for (cell, total) in &report.cell_totals {
            let sum: usize = report.qtype_counts.values().map(|m| m.get(cell).copied().unwrap_or(0)).sum();
            assert_eq!(sum, *total);
        }
        assert_eq!(report.ratio_rows.last().unwrap().total, its.len());
        let csv = report.qtype_csv();
        assert!(csv.starts_with("question_type,chest/train,"));
        assert!(csv.contains("\ntotal,7,0,0,0,0,6,13\n"));
    }

    #[test]
    fn unassigned_image_is_an_error() {
        let its = items(1, 1, Region::Head, "h");
        assert!(split_report(&SplitAssignment::new(), &its).is_err());
    }
}
