use mvrank_core::censored::{gehan_pair_score, gehan_scores, SurvivalColumn};
use mvrank_core::datagen::{survival_time, SCENARIO3_BETA, SCENARIO3_HAZARD};
use mvrank_core::rng::{substream, Tag};
use proptest::prelude::*;
use rand::Rng;

/// Count of subjects known to have failed before `i` minus the count known
/// to outlive `i`. A subject "fails before" `i` only if its event is observed
/// and precedes `i`'s time (or equals it while `i` is still at risk).
fn definitely_count_oracle(times: &[f64], events: &[bool]) -> Vec<i64> {
    let before = |j: usize, i: usize| {
        events[j] && (times[j] < times[i] || (times[j] == times[i] && !events[i]))
    };
    (0..times.len())
        .map(|i| {
            let less = (0..times.len()).filter(|&j| before(j, i)).count() as i64;
            let more = (0..times.len()).filter(|&j| before(i, j)).count() as i64;
            less - more
        })
        .collect()
}

fn column_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..12).prop_map(f64::from), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

#[test]
fn worked_example() {
    let col = SurvivalColumn::new(vec![1.0, 2.0, 3.0], vec![true, false, true]).unwrap();
    assert_eq!(gehan_scores(&col), vec![-2, 1, 1]);
}

proptest! {
    #[test]
    fn uncensored_scores_are_centered_ranks(times in prop::collection::hash_set(0u32..100_000, 1..60)) {
        let times: Vec<f64> = times.into_iter().map(|t| f64::from(t) / 7.0).collect();
        let n = times.len() as i64;
        let col = SurvivalColumn::new(times.clone(), vec![true; times.len()]).unwrap();
        let u = gehan_scores(&col);
        for (i, t) in times.iter().enumerate() {
            let rank = 1 + times.iter().filter(|s| *s < t).count() as i64;
            prop_assert_eq!(u[i], 2 * rank - n - 1);
        }
    }

    #[test]
    fn antisymmetric_and_zero_sum((times, events) in column_strategy()) {
        for i in 0..times.len() {
            for j in 0..times.len() {
                prop_assert_eq!(
                    gehan_pair_score(times[i], events[i], times[j], events[j]),
                    -gehan_pair_score(times[j], events[j], times[i], events[i])
                );
            }
        }
        let col = SurvivalColumn::new(times.clone(), events.clone()).unwrap();
        let u = gehan_scores(&col);
        prop_assert_eq!(u.iter().sum::<i64>(), 0);
        let bound = times.len() as i64 - 1;
        prop_assert!(u.iter().all(|v| v.abs() <= bound));
        prop_assert_eq!(u, definitely_count_oracle(&times, &events));
    }

    #[test]
    fn raising_an_event_time_never_lowers_its_score(
        (times, events) in column_strategy(),
        pick in any::<prop::sample::Index>(),
        bump in 1u8..5,
    ) {
        let i = pick.index(times.len());
        prop_assume!(events[i]);
        let before = gehan_scores(&SurvivalColumn::new(times.clone(), events.clone()).unwrap())[i];
        let mut raised = times.clone();
        raised[i] += f64::from(bump);
        let after = gehan_scores(&SurvivalColumn::new(raised, events).unwrap())[i];
        prop_assert!(after >= before);
    }
}

#[test]
fn generated_survival_times_follow_the_exponential_law() {
    let covariates = [3.0, 2.0, 2.0, 1.0, 1.0];
    let eta: f64 = covariates
        .iter()
        .zip(SCENARIO3_BETA)
        .map(|(x, b)| x * b)
        .sum();
    let rate = SCENARIO3_HAZARD * eta.exp();
    let mut rng = substream(11, &[Tag::Str("cox")]);
    let draws = 100_000;
    let mut t: Vec<f64> = (0..draws)
        .map(|_| survival_time(1.0 - rng.random::<f64>(), SCENARIO3_HAZARD, eta))
        .collect();
    t.sort_by(f64::total_cmp);
    // sup-norm distance between the empirical and exact survival functions
    let sup = t
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let exact = (-rate * s).exp();
            let above = 1.0 - k as f64 / draws as f64;
            let below = 1.0 - (k + 1) as f64 / draws as f64;
            (exact - above).abs().max((exact - below).abs())
        })
        .fold(0.0, f64::max);
    assert!(sup < 0.01, "sup-norm {sup}");
}
