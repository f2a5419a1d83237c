//! Acceptance suite: one test per headline behavior, each printing a
//! PASS line with the measured values (visible with `--nocapture`).
//!
//! Run with `cargo test -p capo-cli --test acceptance`.

// Indexed (state, action) loops mirror the in-place logit perturbation
// of the finite-difference check.
#![allow(clippy::needless_range_loop)]

use std::collections::BTreeSet;

use capo_core::objective::{
    capo_gradient, capo_objective, grpo_advantage, k3_divergence, normalize_advantages,
    ObjectiveConfig, Trajectory,
};
use capo_core::policy::TabularPolicy;
use capo_core::rewards::{token_rewards, RewardConfig, TokenRewards};
use capo_core::rollout::{segment_steps, Question, Rollout, DEFAULT_STEP_DELIMITER};
use capo_core::sim::{
    derive_seed, noisy_judge, oracle_judge, rollout_group, train, Algo, ChainEnv, JudgeKind,
    NoisyJudge, TrainConfig,
};
use capo_core::voting::{vote, VoteMode, VoteResult};
use capo_judge::{build_prompt, parse_critique, Judgment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const CORRECT_SOLUTION: &str = include_str!("fixtures/correct_solution.txt");
const WRONG_SOLUTION: &str = include_str!("fixtures/wrong_solution.txt");
const CRITIQUE_CORRECT: &str = include_str!("fixtures/critique_correct.txt");
const CRITIQUE_WRONG: &str = include_str!("fixtures/critique_wrong.txt");

/// Criterion 1: the captured judge outputs parse exactly, and the built
/// prompt starts with the instruction preamble byte-for-byte.
#[test]
fn criterion_01_fixture_exactness() {
    let correct_steps = segment_steps(CORRECT_SOLUTION, DEFAULT_STEP_DELIMITER).num_steps();
    let wrong_steps = segment_steps(WRONG_SOLUTION, DEFAULT_STEP_DELIMITER).num_steps();
    assert_eq!(correct_steps, 7);
    assert_eq!(wrong_steps, 13);

    let approved = parse_critique(CRITIQUE_CORRECT, correct_steps);
    assert_eq!(approved.judgment, Judgment::Correct);
    assert!(approved.flagged_steps.is_empty());

    let rejected = parse_critique(CRITIQUE_WRONG, wrong_steps);
    assert_eq!(rejected.judgment, Judgment::Incorrect);
    assert_eq!(
        rejected.flagged_steps,
        (5..=11).collect::<BTreeSet<usize>>()
    );

    let question = Question {
        id: "q-accept".into(),
        prompt: "What is $a$?".into(),
        ground_truth_answer: "9".into(),
        ground_truth_solution: Some("Expand $(2x+b)^2$; $a = 9$.".into()),
    };
    let prompt = build_prompt(&question, "<step_0>x</step_0>").unwrap();
    let preamble = "You are a math teacher.";
    assert_eq!(&prompt.as_bytes()[..preamble.len()], preamble.as_bytes());
    assert!(prompt.contains("Judgment: Is the solution correct (Yes/No)? X"));

    println!(
        "criterion 1 PASS: fixtures parse to (Correct, {{}}) and (Incorrect, {{5..11}}); \
         prompt preamble exact"
    );
}

fn quadrant_rollout(text: &str, outcome: f64) -> Rollout<f64> {
    let tokens: Vec<String> = text
        .split_inclusive(char::is_whitespace)
        .map(str::to_string)
        .collect();
    let mut rollout = Rollout {
        question_id: "quadrants".into(),
        text: text.to_string(),
        tokens: tokens.clone(),
        old_logprobs: vec![-0.5; tokens.len()],
        ref_logprobs: None,
        outcome_reward: outcome,
        steps: Default::default(),
    };
    rollout.segment(DEFAULT_STEP_DELIMITER).unwrap();
    rollout
}

/// Criterion 2: with C=2 and P=1, the four outcome/process quadrants
/// produce exactly the token rewards {+2, +1, 0, -1}.
#[test]
fn criterion_02_reward_hierarchy() {
    let cfg = RewardConfig::new(2.0, 1.0).without_format_bonus();
    let text = "first part\n\nsecond part";
    let clean: VoteResult<f64> = vote(&[BTreeSet::new()], VoteMode::Greedy).unwrap();
    let flagged: VoteResult<f64> =
        vote(&[[1usize].into_iter().collect()], VoteMode::Greedy).unwrap();

    let cases = [
        (1.0, &clean, vec![2.0]),
        (1.0, &flagged, vec![2.0, 1.0]),
        (0.0, &clean, vec![0.0]),
        (0.0, &flagged, vec![0.0, -1.0]),
    ];
    let mut seen: BTreeSet<i64> = BTreeSet::new();
    for (outcome, decision, expected_distinct) in cases {
        let rollout = quadrant_rollout(text, outcome);
        let rewards = token_rewards(&rollout, decision, &cfg).unwrap();
        let distinct: BTreeSet<i64> = rewards.values.iter().map(|v| *v as i64).collect();
        assert_eq!(
            distinct,
            expected_distinct
                .iter()
                .map(|v| *v as i64)
                .collect::<BTreeSet<i64>>()
        );
        for value in &rewards.values {
            assert_eq!(value.fract(), 0.0, "rewards must be exact integers here");
            seen.insert(*value as i64);
        }
    }
    assert_eq!(
        seen,
        [-1i64, 0, 1, 2].into_iter().collect::<BTreeSet<i64>>()
    );
    println!("criterion 2 PASS: quadrant token rewards are exactly {{+2, +1, 0, -1}}");
}

/// Criterion 3: lattice ordering and average-weight consistency over
/// 10,000 randomized vote inputs.
#[test]
fn criterion_03_voting_lattice() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for case in 0..10_000 {
        let k = rng.random_range(1..=9usize);
        let num_steps = rng.random_range(1..=20usize);
        let sets: Vec<BTreeSet<usize>> = (0..k)
            .map(|_| {
                let size = rng.random_range(0..=num_steps);
                (0..size).map(|_| rng.random_range(0..num_steps)).collect()
            })
            .collect();
        let inter = vote::<f64>(&sets, VoteMode::Intersection).unwrap().flagged;
        let major = vote::<f64>(&sets, VoteMode::Majority).unwrap().flagged;
        let union = vote::<f64>(&sets, VoteMode::Union).unwrap().flagged;
        assert!(
            inter.is_subset(&major),
            "case {case}: intersection not within majority"
        );
        assert!(
            major.is_subset(&union),
            "case {case}: majority not within union"
        );

        let average = vote::<f64>(&sets, VoteMode::Average).unwrap();
        for step in 0..num_steps {
            let weight = average.penalty_weight(step);
            assert_eq!(
                weight > 0.0,
                union.contains(&step),
                "case {case} step {step}"
            );
            assert_eq!(
                weight == 1.0,
                inter.contains(&step),
                "case {case} step {step}"
            );
        }
    }
    println!(
        "criterion 3 PASS: 10000 cases keep intersection within majority within union, \
         average weights consistent"
    );
}

/// Criterion 4: normalization properties over 1,000 random groups, plus
/// the outcome-only equivalence at P=0 with equal lengths.
#[test]
fn criterion_04_normalization_properties() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let eps = 1e-6;
    let mut degenerate_seen = 0usize;
    for case in 0..1_000 {
        let rollouts = rng.random_range(2..=8usize);
        let constant = case % 10 == 0;
        let group: Vec<TokenRewards<f64>> = (0..rollouts)
            .map(|_| {
                let len = rng.random_range(1..=6usize);
                let values = if constant {
                    vec![1.5; len]
                } else {
                    (0..len).map(|_| rng.random_range(-3.0..3.0)).collect()
                };
                TokenRewards { values }
            })
            .collect();
        let batch = normalize_advantages(&group, eps);
        let flat: Vec<f64> = batch.advantages.iter().flatten().copied().collect();
        if batch.degenerate {
            degenerate_seen += 1;
            assert!(
                flat.iter().all(|&a| a == 0.0),
                "case {case}: degenerate but nonzero"
            );
        } else {
            let mean = flat.iter().sum::<f64>() / flat.len() as f64;
            let std = (flat.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
                / flat.len() as f64)
                .sqrt();
            assert!(mean.abs() < 1e-9, "case {case}: advantage mean {mean}");
            assert!((std - 1.0).abs() < 1e-6, "case {case}: advantage std {std}");
        }
    }
    assert!(
        degenerate_seen >= 100,
        "constant groups must hit the degenerate path"
    );

    // Outcome-only rewards with equal lengths: pooled normalization
    // equals the per-rollout outcome normalization broadcast per token.
    for case in 0..1_000 {
        let rollouts = rng.random_range(2..=8usize);
        let len = rng.random_range(1..=6usize);
        let outcomes: Vec<f64> = (0..rollouts)
            .map(|_| if rng.random::<f64>() < 0.5 { 0.0 } else { 1.0 })
            .collect();
        let group: Vec<TokenRewards<f64>> = outcomes
            .iter()
            .map(|&r| TokenRewards {
                values: vec![r * 2.0; len],
            })
            .collect();
        let pooled = normalize_advantages(&group, eps);
        let outcome_advs = grpo_advantage(&outcomes, eps);
        for (i, adv) in outcome_advs.iter().enumerate() {
            for token_adv in &pooled.advantages[i] {
                assert!(
                    (token_adv - adv).abs() < 1e-9,
                    "case {case}: pooled {token_adv} vs outcome {adv}"
                );
            }
        }
    }
    println!(
        "criterion 4 PASS: 1000 groups normalized (|mean|<1e-9, |std-1|<1e-6, degenerate \
         all-zero); P=0 equal-length pooled == outcome normalization within 1e-9"
    );
}

fn objective_value(
    policy: &TabularPolicy<f64>,
    group: &[Trajectory<f64>],
    cfg: &ObjectiveConfig<f64>,
) -> f64 {
    let new: Vec<Vec<f64>> = group.iter().map(|t| t.logprobs_under(policy)).collect();
    let old: Vec<Vec<f64>> = group.iter().map(|t| t.old_logprobs.clone()).collect();
    let refs: Vec<Vec<f64>> = group
        .iter()
        .map(|t| t.ref_logprobs.clone().unwrap())
        .collect();
    let adv: Vec<Vec<f64>> = group.iter().map(|t| t.advantages.clone()).collect();
    capo_objective(&new, &old, Some(&refs), &adv, cfg)
        .unwrap()
        .total_objective
}

/// Criterion 5: analytic gradient vs central finite differences on 100
/// random small instances.
#[test]
fn criterion_05_gradient_matches_finite_differences() {
    let cfg = ObjectiveConfig {
        eps_clip: 0.2,
        beta_kl: 1e-2,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let h = 1e-5;
    let margin = 1e-3;
    let mut worst = 0.0f64;

    for _ in 0..100 {
        // Rejection keeps ratios away from the clip kinks where the
        // objective is not differentiable.
        let (mut policy, group) = loop {
            let num_states = rng.random_range(1..=4usize);
            let mut policy = TabularPolicy::<f64>::uniform(num_states, 3, 0.1);
            for row in &mut policy.logits {
                for logit in row.iter_mut() {
                    *logit = rng.random_range(-1.0..1.0);
                }
            }
            let group: Vec<Trajectory<f64>> = (0..3)
                .map(|_| {
                    let states: Vec<usize> = (0..num_states).collect();
                    let actions: Vec<usize> =
                        states.iter().map(|_| rng.random_range(0..3usize)).collect();
                    let old: Vec<f64> = states
                        .iter()
                        .zip(&actions)
                        .map(|(&s, &a)| policy.log_prob(s, a) + rng.random_range(-0.4..0.4))
                        .collect();
                    let refs: Vec<f64> = states
                        .iter()
                        .zip(&actions)
                        .map(|(&s, &a)| policy.log_prob(s, a) + rng.random_range(-0.3..0.3))
                        .collect();
                    let adv: Vec<f64> =
                        states.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
                    Trajectory {
                        states,
                        actions,
                        old_logprobs: old,
                        ref_logprobs: Some(refs),
                        advantages: adv,
                    }
                })
                .collect();
            let near_kink = group.iter().any(|t| {
                t.states
                    .iter()
                    .zip(&t.actions)
                    .zip(&t.old_logprobs)
                    .zip(&t.advantages)
                    .any(|(((&s, &a), &old), &adv)| {
                        let ratio = (policy.log_prob(s, a) - old).exp();
                        (ratio - 0.8).abs() < margin
                            || (ratio - 1.2).abs() < margin
                            || adv.abs() < margin
                    })
            });
            if !near_kink {
                break (policy, group);
            }
        };

        let analytic = capo_gradient(&policy, &group, &cfg).unwrap();
        for state in 0..policy.num_states() {
            for action in 0..3 {
                let saved = policy.logits[state][action];
                policy.logits[state][action] = saved + h;
                let plus = objective_value(&policy, &group, &cfg);
                policy.logits[state][action] = saved - h;
                let minus = objective_value(&policy, &group, &cfg);
                policy.logits[state][action] = saved;
                let fd = (plus - minus) / (2.0 * h);
                let a = analytic[state][action];
                let scale = a.abs().max(fd.abs()).max(1e-6);
                worst = worst.max((a - fd).abs() / scale);
            }
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
    println!("criterion 5 PASS: gradient max relative error {worst:.3e} < 1e-4");
}

/// Criterion 6: per-token KL estimates are non-negative and unchanged
/// policies produce a zero clip fraction.
#[test]
fn criterion_06_kl_and_clip_sanity() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    for _ in 0..10_000 {
        let new = rng.random_range(-30.0..0.0);
        let reference = rng.random_range(-30.0..0.0);
        let k3 = k3_divergence(new, reference);
        assert!(k3 >= 0.0, "k3({new}, {reference}) = {k3}");
    }

    let cfg = ObjectiveConfig {
        eps_clip: 0.2,
        beta_kl: 1e-2,
    };
    for _ in 0..100 {
        let lens: Vec<usize> = (0..rng.random_range(1..=5usize))
            .map(|_| rng.random_range(1..=6usize))
            .collect();
        let lp: Vec<Vec<f64>> = lens
            .iter()
            .map(|&l| (0..l).map(|_| rng.random_range(-5.0..0.0)).collect())
            .collect();
        let adv: Vec<Vec<f64>> = lens
            .iter()
            .map(|&l| (0..l).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let out = capo_objective(&lp, &lp, Some(&lp), &adv, &cfg).unwrap();
        assert_eq!(out.clip_fraction, 0.0);
        assert_eq!(out.kl_penalty, 0.0);
    }
    println!("criterion 6 PASS: 10000 k3 estimates >= 0; clip fraction 0 at unchanged policy");
}

fn f1(flagged: &BTreeSet<usize>, truth: &BTreeSet<usize>) -> f64 {
    if flagged.is_empty() && truth.is_empty() {
        return 1.0;
    }
    let tp = flagged.intersection(truth).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / flagged.len() as f64;
    let recall = tp / truth.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Criterion 7: majority-vote flag quality rises monotonically with the
/// number of critiques under a noisy judge, each step by at least 0.01.
#[test]
fn criterion_07_critique_count_scaling() {
    let env = ChainEnv::seeded(6, 4, 0).unwrap();
    let policy = TabularPolicy::<f64>::uniform(6, 4, 0.02);
    let judge = NoisyJudge {
        false_positive_rate: 0.3,
        false_negative_rate: 0.3,
        rng_seed: 0,
    };
    let ks = [1usize, 3, 5, 9];
    let trials = 1_000;

    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut sums = [0.0f64; 4];
    for _ in 0..trials {
        let rollout = &rollout_group(&env, &policy, 1, &mut rng)[0];
        let truth = oracle_judge(rollout, &env);
        // Shared critique pool: k uses the first k sets, so larger k
        // strictly adds information.
        let sets: Vec<BTreeSet<usize>> = (0..9)
            .map(|_| noisy_judge(rollout, &env, &judge, &mut rng))
            .collect();
        for (slot, &k) in ks.iter().enumerate() {
            let decision = vote::<f64>(&sets[..k], VoteMode::Majority).unwrap();
            sums[slot] += f1(&decision.flagged, &truth);
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / trials as f64).collect();
    for pair in means.windows(2) {
        assert!(
            pair[1] - pair[0] >= 0.01,
            "scaling step too small: {:.4} -> {:.4}",
            pair[0],
            pair[1]
        );
    }
    println!(
        "criterion 7 PASS: majority-vote F1 scales {:.4} -> {:.4} -> {:.4} -> {:.4} \
         for k in {{1,3,5,9}}",
        means[0], means[1], means[2], means[3]
    );
}

fn criterion_env() -> ChainEnv {
    ChainEnv::seeded(6, 4, 0).unwrap()
}

fn run_config(w_process: f64, num_critiques: usize) -> TrainConfig<f64> {
    TrainConfig {
        num_critiques,
        reward: RewardConfig::new(2.0, w_process).without_format_bonus(),
        ..TrainConfig::default()
    }
}

fn final_accuracies(
    env: &ChainEnv,
    algo: Algo,
    judge: &JudgeKind,
    cfg: &TrainConfig<f64>,
    tag: &str,
) -> Vec<f64> {
    (0..10)
        .map(|seed_index| {
            let seed = derive_seed(0, &format!("{tag}/seed={seed_index}"));
            let policy = TabularPolicy::<f64>::uniform(
                env.num_checkpoints,
                env.num_actions,
                cfg.learning_rate,
            );
            let run = train(env, policy, algo, judge, cfg, 300, seed).unwrap();
            run.trace.final_policy_accuracy().unwrap()
        })
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Criterion 8: token-level credit assignment beats the outcome-only
/// baseline by at least 0.05 mean final accuracy over 10 paired seeds,
/// and is lower on at most 2 seeds.
#[test]
fn criterion_08_capo_beats_grpo_at_toy_scale() {
    let env = criterion_env();
    let cfg = run_config(1.0, 1);
    let capo = final_accuracies(
        &env,
        Algo::Capo,
        &JudgeKind::Oracle,
        &cfg,
        "capo_c2_p1_k1_majority",
    );
    let grpo = final_accuracies(&env, Algo::Grpo, &JudgeKind::Oracle, &cfg, "grpo");

    let gap = mean(&capo) - mean(&grpo);
    let lower = capo.iter().zip(&grpo).filter(|(c, g)| c < g).count();
    assert!(gap >= 0.05, "mean final-accuracy gap {gap:.4} < 0.05");
    assert!(lower <= 2, "credit assignment lower on {lower} of 10 seeds");
    println!(
        "criterion 8 PASS: mean final accuracy {:.4} vs {:.4} (gap {gap:.4} >= 0.05), \
         lower on {lower}/10 seeds",
        mean(&capo),
        mean(&grpo)
    );
}

/// Criterion 9: the asymmetric weighting (C=2, P=1) tops the C/P grid and
/// the over-penalizing P=5 lands last. The grid runs under the imperfect
/// judge (FP=FN=0.3, 4 critiques, majority vote): with a perfect oracle
/// the process channel is never wrong and normalization cancels most of
/// P's magnitude, while a noisy judge exposes the asymmetry mechanism:
/// once P approaches C, false flags flip the sign of correct-answer
/// tokens. An oracle-judge sanity check (P=1 above P=5 and P=0.1) runs in
/// `criterion_09_oracle_judge_sanity`.
#[test]
fn criterion_09_cp_ablation_trend() {
    let env = criterion_env();
    let judge = JudgeKind::Noisy(NoisyJudge {
        false_positive_rate: 0.3,
        false_negative_rate: 0.3,
        rng_seed: 0,
    });
    let grid = [0.1, 1.0, 2.0, 5.0];
    let means: Vec<f64> = grid
        .iter()
        .map(|&p| {
            let cfg = run_config(p, 4);
            let tag = format!("capo_c2_p{p}_k4_majority");
            mean(&final_accuracies(&env, Algo::Capo, &judge, &cfg, &tag))
        })
        .collect();

    let p1 = means[1];
    for (i, &p) in grid.iter().enumerate() {
        assert!(
            p1 >= means[i],
            "P=1 mean {p1:.4} below P={p} mean {:.4}",
            means[i]
        );
    }
    let p5 = means[3];
    for (i, &p) in grid.iter().enumerate().take(3) {
        assert!(
            p5 < means[i],
            "P=5 mean {p5:.4} not below P={p} mean {:.4}",
            means[i]
        );
    }
    println!(
        "criterion 9 PASS: final accuracy by P {{0.1: {:.4}, 1: {:.4}, 2: {:.4}, 5: {:.4}}}; \
         P=1 best, P=5 lowest",
        means[0], means[1], means[2], means[3]
    );
}

/// Oracle-judge companion to criterion 9: even with perfect flags, the
/// balanced setting beats both the weak-penalty and the over-penalizing
/// extremes.
#[test]
fn criterion_09_oracle_judge_sanity() {
    let env = criterion_env();
    let p01 = mean(&final_accuracies(
        &env,
        Algo::Capo,
        &JudgeKind::Oracle,
        &run_config(0.1, 1),
        "capo_c2_p0.1_k1_majority",
    ));
    let p1 = mean(&final_accuracies(
        &env,
        Algo::Capo,
        &JudgeKind::Oracle,
        &run_config(1.0, 1),
        "capo_c2_p1_k1_majority",
    ));
    let p5 = mean(&final_accuracies(
        &env,
        Algo::Capo,
        &JudgeKind::Oracle,
        &run_config(5.0, 1),
        "capo_c2_p5_k1_majority",
    ));
    assert!(
        p1 > p5,
        "P=1 ({p1:.4}) must beat P=5 ({p5:.4}) under the oracle judge"
    );
    assert!(
        p1 > p01,
        "P=1 ({p1:.4}) must beat P=0.1 ({p01:.4}) under the oracle judge"
    );
    println!("criterion 9 (oracle sanity) PASS: P=1 {p1:.4} above P=0.1 {p01:.4} and P=5 {p5:.4}");
}

/// Criterion 10: running the same simulate spec twice produces
/// byte-identical trace files.
#[test]
fn criterion_10_simulate_determinism() {
    let spec = r#"
[grid]
algos = ["capo", "grpo"]
seeds = 2
c_values = [2.0]
p_values = [1.0]
k_values = [2]
vote_modes = ["majority"]

[env]
checkpoints = 4
actions = 3
answer_seed = 1

[train]
group_size = 8
iterations = 25
learning_rate = 0.02

[judge]
false_positive = 0.2
false_negative = 0.1
"#;
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("exp.toml");
    std::fs::write(&spec_path, spec).unwrap();

    let run = |out: &std::path::Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_capo"))
            .args([
                "simulate",
                "--spec",
                spec_path.to_str().unwrap(),
                "--seed",
                "11",
                "--out",
                out.to_str().unwrap(),
            ])
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run(&out_a);
    run(&out_b);

    let mut names: Vec<String> = std::fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"summary.csv".to_string()));
    assert!(names.len() > 1);
    for name in &names {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "file {name} differs between runs");
    }
    println!(
        "criterion 10 PASS: {} output files byte-identical across reruns",
        names.len()
    );
}
