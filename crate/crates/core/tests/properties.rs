mod common;

use common::invariants::ALL;

fn run(name: &str) {
    let (_, check, cases) = ALL
        .iter()
        .find(|(n, _, _)| *n == name)
        .expect("registered invariant");
    if let Err(e) = check(*cases) {
        panic!("{name}: {e}");
    }
}

macro_rules! invariants {
    ($($name:ident),* $(,)?) => {
        $(#[test]
        fn $name() {
            run(stringify!($name));
        })*

        #[test]
        fn every_invariant_has_a_test() {
            let named = [$(stringify!($name)),*];
            for (n, _, _) in ALL {
                assert!(named.contains(n), "{n} has no test");
            }
        }
    };
}

invariants!(
    softmax_is_a_distribution,
    consistency_loss_is_nonnegative,
    supervised_loss_is_permutation_invariant,
    gradients_match_finite_differences,
    zero_weight_training_is_supervised,
    pool_stays_a_partition,
    generators_are_deterministic,
    degenerate_augmentation_is_identity,
    inconsistency_is_bounded,
    topk_ignores_monotone_transforms,
    strategies_return_k_distinct_unlabeled,
    identity_augmentation_scores_zero,
    loop_is_deterministic_and_budgeted,
    passive_supervised_loop_matches_reference,
    gibbs_inequality,
    target_loss_bracket,
    zero_model_target_loss_is_ln_j,
    start_size_rule_is_monotone_in_epsilon,
    overconfidence_counts_decrease,
    group_entropy_aggregates,
    diversity_is_rotation_invariant,
    pca_is_ordered_and_uncorrelated,
    snapshots_round_trip,
);
