//! Segmentation and token-mapping checks on two realistic worked
//! solutions: one clean seven-step derivation and one thirteen-step
//! derivation whose middle steps carry a sign error.

use capo_core::rollout::{
    map_tokens_to_steps, segment_steps, strip_step_tags, wrap_steps, DEFAULT_STEP_DELIMITER,
};

const WRONG_SOLUTION: &str = include_str!("fixtures/wrong_solution.txt");
const CORRECT_SOLUTION: &str = include_str!("fixtures/correct_solution.txt");

/// Reference tokenizer for the tests: every whitespace character closes a
/// token, so concatenation reproduces the text exactly.
fn reference_tokens(text: &str) -> Vec<String> {
    text.split_inclusive(char::is_whitespace)
        .map(str::to_string)
        .collect()
}

#[test]
fn wrong_solution_has_thirteen_steps() {
    let seg = segment_steps(WRONG_SOLUTION, DEFAULT_STEP_DELIMITER);
    assert_eq!(seg.num_steps(), 13);
    let indices: Vec<usize> = seg.steps.iter().map(|s| s.index).collect();
    assert_eq!(indices, (0..13).collect::<Vec<_>>());
}

#[test]
fn correct_solution_wraps_with_markers_zero_through_six() {
    let seg = segment_steps(CORRECT_SOLUTION, DEFAULT_STEP_DELIMITER);
    assert_eq!(seg.num_steps(), 7);
    let tagged = wrap_steps(&seg, CORRECT_SOLUTION);
    for k in 0..7 {
        assert!(
            tagged.contains(&format!("<step_{k}>")),
            "missing <step_{k}>"
        );
        assert!(
            tagged.contains(&format!("</step_{k}>")),
            "missing </step_{k}>"
        );
    }
    assert!(!tagged.contains("<step_7>"));
    assert_eq!(strip_step_tags(&tagged), CORRECT_SOLUTION);
}

#[test]
fn flagged_steps_map_to_nonempty_token_spans() {
    let tokens = reference_tokens(WRONG_SOLUTION);
    let seg = segment_steps(WRONG_SOLUTION, DEFAULT_STEP_DELIMITER);
    let mapped = map_tokens_to_steps(WRONG_SOLUTION, &tokens, &seg).unwrap();

    // Byte-scan oracle: a token belongs to the step whose ownership range
    // contains its first byte.
    let mut oracle_counts = vec![0usize; mapped.num_steps()];
    let mut cursor = 0usize;
    for token in &tokens {
        let step = mapped
            .steps
            .iter()
            .find(|s| s.char_span.contains(cursor))
            .map(|s| s.index)
            .expect("every byte is owned by a step");
        oracle_counts[step] += 1;
        cursor += token.len();
    }

    for (step, count) in mapped.steps[5..=11].iter().zip(&oracle_counts[5..=11]) {
        let span = step.token_span.unwrap();
        assert!(
            !span.is_empty(),
            "step {} has an empty token span",
            step.index
        );
        assert_eq!(
            span.len(),
            *count,
            "step {} disagrees with oracle",
            step.index
        );
    }
    let total: usize = mapped
        .steps
        .iter()
        .map(|s| s.token_span.unwrap().len())
        .sum();
    assert_eq!(total, tokens.len());
}
