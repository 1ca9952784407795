//! A synthetic VQA corpus with the published balanced-split marginals: per
//! region and split open/closed counts, and per-column question-type counts.
//! Items are grouped into images of 3 to 11 questions.

use super::{AnswerType, QaItem, Region, Split};
use crate::seed::stage_rng;
use rand::seq::SliceRandom;
use rand::Rng;

/// (region, split, open, closed). The head/test closed count is 124: the
/// published row prints 144, which contradicts both its own total of 246 and
/// the corpus-wide 1,299 closed questions.
pub const RATIO_CELLS: [(Region, Split, usize, usize); 9] = [
    (Region::Abdomen, Split::Train, 104, 153),
    (Region::Abdomen, Split::Validation, 97, 143),
    (Region::Abdomen, Split::Test, 99, 143),
    (Region::Chest, Split::Train, 94, 185),
    (Region::Chest, Split::Validation, 107, 161),
    (Region::Chest, Split::Test, 82, 165),
    (Region::Head, Split::Train, 131, 118),
    (Region::Head, Split::Validation, 113, 107),
    (Region::Head, Split::Test, 122, 124),
];

/// Question-type counts per column, columns in [`RATIO_CELLS`] order.
pub const QTYPE_COUNTS: [(&str, [usize; 9]); 11] = [
    ("Presence", [105, 95, 100, 101, 92, 93, 79, 67, 68]),
    ("Positional", [26, 27, 21, 37, 36, 42, 35, 42, 50]),
    ("Abnormality", [19, 18, 27, 15, 40, 21, 22, 25, 15]),
    ("Other", [20, 20, 22, 26, 19, 19, 22, 14, 32]),
    ("Modality", [25, 13, 23, 19, 17, 13, 35, 24, 16]),
    ("Size", [17, 20, 11, 41, 26, 27, 10, 5, 14]),
    ("Plane", [12, 9, 13, 14, 12, 13, 17, 16, 14]),
    ("Attribute Other", [13, 19, 7, 5, 9, 8, 4, 12, 10]),
    ("Organ", [5, 4, 2, 10, 8, 7, 13, 3, 7]),
    ("Color", [6, 7, 8, 2, 0, 0, 9, 7, 13]),
    ("Counting", [3, 8, 3, 5, 1, 2, 0, 1, 1]),
];

/// Filler type for the items the question-type table does not account for.
pub const UNLISTED_QTYPE: &str = "Unlisted";

/// The published open-to-closed ratio for a cell.
pub fn published_ratio(region: Region, split: Split) -> Option<f64> {
    RATIO_CELLS
        .iter()
        .find(|c| c.0 == region && c.1 == split)
        .map(|c| c.2 as f64 / c.3 as f64)
}

/// Build the corpus. `legacy_fraction` of the validation and test images are
/// pinned to their split through `legacy_split`.
pub fn vqa_shaped_corpus(seed: u64, legacy_fraction: f64) -> Vec<QaItem> {
    let mut rng = stage_rng(seed, "synthetic_vqa");
    let mut items = Vec::new();
    let mut image_counter = 0usize;
    for (col, &(region, split, open, closed)) in RATIO_CELLS.iter().enumerate() {
        let total = open + closed;
        let mut qtypes: Vec<&str> = QTYPE_COUNTS
            .iter()
            .flat_map(|(name, counts)| std::iter::repeat_n(*name, counts[col]))
            .collect();
        qtypes.resize(total, UNLISTED_QTYPE);
        qtypes.shuffle(&mut rng);
        let mut answers: Vec<AnswerType> = std::iter::repeat_n(AnswerType::Open, open)
            .chain(std::iter::repeat_n(AnswerType::Closed, closed))
            .collect();
        answers.shuffle(&mut rng);

        let mut start = 0;
        while start < total {
            let size = rng.random_range(3..=11).min(total - start);
            let image_id = format!("synpic{image_counter:05}");
            image_counter += 1;
            let pinned = split != Split::Train && rng.random_bool(legacy_fraction.clamp(0.0, 1.0));
            for k in start..start + size {
                items.push(QaItem {
                    qa_id: format!("qa{:05}", items.len()),
                    image_id: image_id.clone(),
                    patient_id: None,
                    region,
                    answer_type: answers[k],
                    question_type: qtypes[k].to_string(),
                    legacy_split: pinned.then_some(split),
                });
            }
            start += size;
        }
    }
    items
}
