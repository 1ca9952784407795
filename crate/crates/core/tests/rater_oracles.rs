use medeval_core::rater::adjudicate::{adjudicate, LabelReview, LabelVerdict};
use medeval_core::rater::aggregate::{aggregate_rubric, eliminate_readers, mean_kappas, pairwise_kappa, Group, DEFAULT_THRESHOLD};
use medeval_core::rater::labels::{build_revision_prompt, FindingCatalog, PromptStyle};
use medeval_core::rater::{ai_relative, quadratic_kappa, RaterError, RubricRating, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

mod oracles;
use oracles::{elimination_fixture, expected_adjudication, table5_fixture};

#[test]
fn adjudication_matches_rule_table() {
    use LabelVerdict::*;
    let all = LabelVerdict::ALL;
    let mut senior_cases = 0;
    for a in all {
        for b in all {
            for c in all {
                let votes = [a, b, c];
                for senior in [None, Some(Positive), Some(Negative), Some(Uncertain), Some(NotMentioned)] {
                    let review = LabelReview {
                        report_id: "r".into(),
                        finding: "Fracture".into(),
                        reviewers: votes.to_vec(),
                        senior,
                    };
                    match (adjudicate(&review), expected_adjudication(votes, senior)) {
                        (Ok(got), Some(want)) => assert_eq!((got.verdict, got.provenance), want, "{votes:?} {senior:?}"),
                        (Err(RaterError::MissingAdjudicator), None) => {}
                        (got, want) => panic!("{votes:?} {senior:?}: {got:?} vs {want:?}"),
                    }
                }
                if expected_adjudication(votes, None).is_none() {
                    senior_cases += 1;
                }
            }
        }
    }
    // 4·3·2 ordered triples of distinct verdicts.
    assert_eq!(senior_cases, 24);
}

#[test]
fn rubric_summary_reproduces_published_rows() {
    let (ratings, cases) = table5_fixture();
    let retained: BTreeSet<String> = ["kept".to_string()].into();
    let s = aggregate_rubric(&ratings, &cases, &retained).unwrap();
    assert_eq!(s.groups[&Group::Normal].superior_or_similar, Some(57.0));
    assert_eq!(s.groups[&Group::Abnormal].superior_or_similar, Some(43.0));
    assert_eq!(s.groups[&Group::All].clinically_acceptable, Some(72.0));
    assert_eq!(s.groups[&Group::All].excluded_x, 25);
    for g in s.groups.values() {
        assert!((g.percentages.iter().sum::<f64>() - 100.0).abs() < 0.01);
    }
    // Relabeling readers and reversing order leave the summary unchanged.
    let mut relabeled: Vec<RubricRating> = ratings
        .iter()
        .map(|r| RubricRating { reader_id: r.reader_id.replace("kept", "zz"), ..r.clone() })
        .collect();
    relabeled.reverse();
    let s2 = aggregate_rubric(&relabeled, &cases, &["zz".to_string()].into()).unwrap();
    assert_eq!(s.groups, s2.groups);
}

#[test]
fn elimination_boundary_on_real_ratings() {
    let ratings = elimination_fixture();
    let k_low = pairwise_kappa(&ratings, "low", "s1").unwrap();
    let k_edge = pairwise_kappa(&ratings, "edge", "s1").unwrap();
    assert!((k_low - 0.19).abs() < 1e-12);
    assert!((k_edge - 0.2).abs() < 1e-12);

    let specialists: BTreeSet<String> = ["s1".to_string(), "s2".to_string()].into();
    let means: BTreeMap<String, Option<f64>> =
        mean_kappas(&ratings, &specialists).into_iter().map(|(k, v)| (k, v.mean)).collect();
    let e = eliminate_readers(&means, &specialists, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(e.eliminated, ["low".to_string()].into());
    assert!(e.retained.contains("edge") && e.retained.contains("s1") && e.retained.contains("s2"));
}

#[test]
fn kappa_near_zero_for_independent_raters() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..5)).collect();
    let b: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..5)).collect();
    assert!(quadratic_kappa(&a, &b, 5).unwrap().abs() < 0.05);
    let v = ai_relative(Verdict::A1, true);
    assert_eq!(v.ordinal(), Some(3));
}

#[test]
fn prompts_match_golden_files() {
    let catalog = FindingCatalog::builtin();
    let bot = build_revision_prompt("<REPORT TEXT>", "Fracture", PromptStyle::Bot, &catalog).unwrap();
    let question = build_revision_prompt("<REPORT TEXT>", "Fracture", PromptStyle::Question, &catalog).unwrap();
    assert_eq!(bot.as_bytes(), include_bytes!("golden/prompt_bot_fracture.txt"));
    assert_eq!(question.as_bytes(), include_bytes!("golden/prompt_question_fracture.txt"));
}
