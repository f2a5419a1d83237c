//! Critic prompt construction.

use capo_core::rollout::Question;

use crate::error::JudgeError;

/// Instruction block of the critic prompt. The judged solution must carry
/// `<step_k>` markers before the prompt is built.
pub const CRITIC_PROMPT_INSTRUCTION: &str = "You are a math teacher.  Use [Ground Truth Solution] to find any erroneous step in [Solution To Judge]. And the solution to be checked is separated with steps like \"<step_i>...</step_i>\" where i is the index of the step. First, determine whether the solution is correct based on [Ground Truth Solution] and write it in the form \"Judgment: Is the solution correct (Yes/No)? X\",  where X is either Yes or No. If the solution is incorrect, review, analyze, and verify each step of the solution independently, without relying on the correctness of the context before. This means that the current step cannot be considered as incorrect simply because it used the conclusion derived from the previous erroneous reasoning. Then provide the list of the indices of error steps separated by a comma. And the format is as follows:\n<incorrect_steps>\n...(the index of the incorrect steps)...\n</incorrect_steps>. Please give your answer directly.";

/// Fills the critic prompt with the question, its ground truth, and the
/// step-tagged solution to judge.
///
/// When the question has no worked ground-truth solution, the block holds
/// the ground-truth answer instead, keeping the header the instruction
/// text refers to.
pub fn build_prompt(question: &Question, tagged_solution: &str) -> Result<String, JudgeError> {
    if !tagged_solution.contains("<step_") {
        return Err(JudgeError::PreconditionViolation(
            "tagged solution contains no <step_k> blocks".into(),
        ));
    }
    let ground_truth = match &question.ground_truth_solution {
        Some(solution) if !solution.trim().is_empty() => solution.clone(),
        _ => {
            let answer = question.ground_truth_answer.trim();
            if answer.is_empty() {
                return Err(JudgeError::MissingGroundTruth(question.id.clone()));
            }
            format!("The ground truth answer is {answer}.")
        }
    };
    Ok(format!(
        "{CRITIC_PROMPT_INSTRUCTION}\n\n[Question]\n{}\n\n[Ground Truth Solution]\n{}\n\n[Solution To Judge]\n{}",
        question.prompt, ground_truth, tagged_solution
    ))
}
