//! Long-format score tables and demographics.

use super::{Demographics, PrsError, PrsProfile, Sex, CHANNELS};
use serde::Deserialize;
use std::collections::HashMap;
use std::io::Read;

#[derive(Debug, Clone, PartialEq)]
pub struct PrsCohort {
    /// Trait ids in order of first appearance; this fixes block positions.
    pub trait_ids: Vec<String>,
    pub thresholds: [String; CHANNELS],
    pub profiles: Vec<PrsProfile>,
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    individual_id: String,
    trait_id: String,
    threshold_id: String,
    score: f64,
}

#[derive(Debug, Deserialize)]
struct DemographicsRow {
    individual_id: String,
    age: f64,
    sex: String,
    bmi: f64,
}

fn reader<R: Read>(input: R, delimiter: u8) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Delimiter by file extension: tab for `.tsv`, comma otherwise.
pub fn delimiter_for(path: &std::path::Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("txt") => b'\t',
        _ => b',',
    }
}

/// Read rows of (individual_id, trait_id, threshold_id, score). Every
/// individual must have a finite score for every trait at every threshold.
pub fn read_scores<R: Read>(input: R, delimiter: u8, thresholds: &[String; CHANNELS]) -> Result<PrsCohort, PrsError> {
    let channel_of: HashMap<&str, usize> = thresholds.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut trait_ids: Vec<String> = Vec::new();
    let mut trait_index: HashMap<String, usize> = HashMap::new();
    let mut people: Vec<String> = Vec::new();
    let mut person_index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize, usize), f64> = HashMap::new();
    for row in reader(input, delimiter).deserialize::<ScoreRow>() {
        let row = row.map_err(|e| PrsError::Input(e.to_string()))?;
        let Some(&c) = channel_of.get(row.threshold_id.as_str()) else {
            continue;
        };
        let t = *trait_index.entry(row.trait_id.clone()).or_insert_with(|| {
            trait_ids.push(row.trait_id.clone());
            trait_ids.len() - 1
        });
        let p = *person_index.entry(row.individual_id.clone()).or_insert_with(|| {
            people.push(row.individual_id.clone());
            people.len() - 1
        });
        if cells.insert((p, c, t), row.score).is_some() {
            return Err(PrsError::Input(format!(
                "duplicate score for {} / {} / {}",
                row.individual_id, row.trait_id, row.threshold_id
            )));
        }
    }
    let mut profiles = Vec::with_capacity(people.len());
    for (p, id) in people.iter().enumerate() {
        let mut scores: [Vec<f64>; CHANNELS] = std::array::from_fn(|_| Vec::with_capacity(trait_ids.len()));
        for (c, channel) in scores.iter_mut().enumerate() {
            for (t, trait_id) in trait_ids.iter().enumerate() {
                match cells.get(&(p, c, t)) {
                    Some(s) if s.is_finite() => channel.push(*s),
                    _ => {
                        return Err(PrsError::MissingScore {
                            individual: id.clone(),
                            trait_id: trait_id.clone(),
                            threshold: thresholds[c].clone(),
                        })
                    }
                }
            }
        }
        profiles.push(PrsProfile::new(id.clone(), scores)?);
    }
    Ok(PrsCohort {
        trait_ids,
        thresholds: thresholds.clone(),
        profiles,
    })
}

pub fn read_demographics<R: Read>(input: R, delimiter: u8) -> Result<HashMap<String, Demographics>, PrsError> {
    let mut out = HashMap::new();
    for row in reader(input, delimiter).deserialize::<DemographicsRow>() {
        let row = row.map_err(|e| PrsError::Input(e.to_string()))?;
        let sex = Sex::parse(&row.sex).ok_or_else(|| PrsError::Input(format!("unknown sex `{}`", row.sex)))?;
        out.insert(
            row.individual_id,
            Demographics {
                age: row.age,
                sex,
                bmi: row.bmi,
            },
        );
    }
    Ok(out)
}

impl PrsCohort {
    pub fn attach_demographics(&mut self, demographics: &HashMap<String, Demographics>) {
        for p in &mut self.profiles {
            p.demographics = demographics.get(&p.individual_id).copied();
        }
    }
}
