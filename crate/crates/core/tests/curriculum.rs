use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use std::collections::BTreeMap;

use stepstone::curriculum::{
    sample_item, sample_split, stage_weights, validate_schedule, ScheduleViolation, SplitSampler, SplitWeights,
};
use stepstone::model::Fraction;
use stepstone::presets::Presets;

const DRAWS: usize = 100_000;

/// Pearson statistic and the 0.001 critical value, over splits with nonzero weight.
fn chi_square(weights: &SplitWeights, counts: &[usize]) -> (f64, f64) {
    let mut stat = 0.0;
    let mut cells = 0;
    for ((_, w), &n) in weights.0.iter().zip(counts) {
        if w.is_zero() {
            assert_eq!(n, 0, "drew a zero-weight split");
            continue;
        }
        let expected = w.to_f64() * DRAWS as f64;
        stat += (n as f64 - expected).powi(2) / expected;
        cells += 1;
    }
    if cells < 2 {
        return (0.0, 0.0);
    }
    let crit = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.999);
    (stat, crit)
}

fn draw_counts(weights: &SplitWeights, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut counts = vec![0; weights.0.len()];
    for _ in 0..DRAWS {
        let s = sample_split(weights, rng);
        counts[weights.0.iter().position(|(l, _)| l == s).unwrap()] += 1;
    }
    counts
}

#[test]
fn sampling_matches_every_shipped_stage() {
    let p = Presets::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for (name, sched) in &p.schedules {
        for (j, stage) in sched.stages.iter().enumerate() {
            let w = stage_weights(sched, stage.start_step).unwrap();
            let counts = draw_counts(&w, &mut rng);
            let (stat, crit) = chi_square(&w, &counts);
            assert!(stat <= crit, "{name} stage {j}: chi2 {stat:.2} > {crit:.2} ({counts:?})");
        }
    }
}

#[test]
fn lopsided_weights_converge() {
    let f = |n, d| Fraction::new(n, d).unwrap();
    let w = SplitWeights(vec![
        ("a".into(), f(1, 1000)),
        ("b".into(), f(333, 1000)),
        ("c".into(), f(666, 1000)),
    ]);
    let (stat, crit) = chi_square(&w, &draw_counts(&w, &mut ChaCha8Rng::seed_from_u64(99)));
    assert!(stat <= crit, "chi2 {stat:.2} > {crit:.2}");
}

#[test]
fn soft_boundary_belongs_to_the_later_stage() {
    let soft = Presets::builtin().schedule("soft").unwrap();
    assert_eq!(stage_weights(soft, 7499).unwrap().render(), "easy=0.80 medium=0.15 hard=0.05");
    assert_eq!(stage_weights(soft, 7500).unwrap().render(), "easy=0.15 medium=0.80 hard=0.05");
    assert_eq!(stage_weights(soft, 12000).unwrap().render(), "easy=0.15 medium=0.80 hard=0.05");
    assert!(stage_weights(soft, 40_000).is_err());
}

#[test]
fn reverse_medium_start_names_the_easy_medium_split() {
    let s = Presets::builtin().schedule("reverse-medium-start").unwrap();
    let w = stage_weights(s, 39_999).unwrap();
    assert_eq!(w.get("easy-medium"), Some(Fraction::ONE));
    assert_eq!(w.get("easy"), None);
}

#[test]
fn uniform_has_one_stage_of_thirds() {
    let u = Presets::builtin().schedule("uniform").unwrap();
    assert_eq!(u.stages.len(), 1);
    let w = stage_weights(u, 20_000).unwrap();
    assert!(w.0.iter().all(|(_, x)| *x == Fraction::new(1, 3).unwrap()));
}

#[test]
fn samplers_with_the_same_seed_agree() {
    let soft = Presets::builtin().schedule("soft").unwrap().clone();
    let mut a = SplitSampler::new(soft.clone(), 4);
    let mut b = SplitSampler::new(soft, 4);
    for step in (0..40_000).step_by(97) {
        assert_eq!(a.sample(step).unwrap(), b.sample(step).unwrap());
    }
    assert!(a.sample(40_000).is_err());
}

#[test]
fn stage_rows_at_sample_steps() {
    let p = Presets::builtin();
    let row = |name: &str, step| stage_weights(p.schedule(name).unwrap(), step).unwrap().render();
    assert_eq!(row("hard", 20_000), "easy=0.05 medium=0.05 hard=0.90");
    assert_eq!(row("reverse-medium-start", 30_000), "easy-medium=1.00 medium=0.00 hard=0.00");
    assert_eq!(row("classic", 12_000), "easy=0.75 medium=0.25 hard=0.00");
}

#[test]
fn even_split_stays_within_a_percent() {
    let half = Fraction::new(1, 2).unwrap();
    let w = SplitWeights(vec![("easy".into(), half), ("hard".into(), half)]);
    let easy = draw_counts(&w, &mut ChaCha8Rng::seed_from_u64(7))[0];
    assert!((49_000..=51_000).contains(&easy), "{easy}");
}

#[test]
fn missing_stage_is_a_gap() {
    let mut s = Presets::builtin().schedule("soft").unwrap().clone();
    s.stages[2].start_step = 18_000;
    assert!(validate_schedule(&s, 40_000).contains(&ScheduleViolation::Gap { from: 17_500, to: 18_000 }));
}

#[test]
fn items_are_drawn_uniformly_within_the_split() {
    let one = Fraction::ONE;
    let w = SplitWeights(vec![("easy".into(), one), ("hard".into(), Fraction::ZERO)]);
    let data: BTreeMap<String, Vec<u32>> = [("easy".to_string(), (0..4).collect()), ("hard".to_string(), vec![99])]
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut counts = [0usize; 4];
    for _ in 0..DRAWS {
        counts[*sample_item(&w, &data, &mut rng).unwrap() as usize] += 1;
    }
    let expected = SplitWeights((0..4).map(|i| (i.to_string(), Fraction::new(1, 4).unwrap())).collect());
    let (stat, crit) = chi_square(&expected, &counts);
    assert!(stat <= crit, "chi2 {stat:.2} > {crit:.2}");
    let empty: BTreeMap<String, Vec<u32>> = [("easy".to_string(), vec![])].into_iter().collect();
    assert_eq!(sample_item(&w, &empty, &mut rng), None);
}
