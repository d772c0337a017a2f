use evsynth::esim::{inject_noise, simulate, simulate_parallel, simulate_pixel, IntensitySequence};
use evsynth::event::{Polarity, PolarityMode, SensorModel, EventStream};
use proptest::prelude::*;
use rand::Rng;

fn random_sequence(seed: u64, lo: f64) -> IntensitySequence {
    let mut rng = evsynth::rng::stream(seed, evsynth::rng::Domain::Toy, 0);
    let (w, h) = (rng.random_range(1..6), rng.random_range(1..6));
    let n = rng.random_range(2..6);
    let mut t = 0;
    let frames = (0..n)
        .map(|_| {
            t += rng.random_range(1..5000u64);
            (t, (0..w * h).map(|_| rng.random_range(lo..=1.0)).collect())
        })
        .collect();
    IntensitySequence::new(w, h, frames).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_is_a_valid_stream(seed in any::<u64>(), sigma in 0.0f64..0.1) {
        let seq = random_sequence(seed, 0.0);
        let sensor = SensorModel { threshold_sigma: sigma, ..SensorModel::default() };
        let s = simulate(&seq, &sensor, seed).unwrap();
        prop_assert!(s.validate().is_ok());
        prop_assert_eq!(s.clone(), simulate_parallel(&seq, &sensor, seed).unwrap());
        let t0 = seq.frames[0].0;
        let t1 = seq.frames.last().unwrap().0;
        let noisy = inject_noise(&s, &SensorModel { background_rate: 50.0, ..sensor }, t0, t1, seed).unwrap();
        prop_assert!(noisy.validate().is_ok());
        prop_assert!(noisy.len() >= s.len());
    }

    #[test]
    fn excursion_returns_to_reference(k in 1usize..8, c in 0.05f64..0.5, start in -3.0f64..0.0) {
        let levels = [start, start + k as f64 * c, start];
        let mut reference = start;
        let events = simulate_pixel(&[0, 1000, 2000], &levels, c, &mut reference);
        let expected: Vec<Polarity> =
            std::iter::repeat_n(Polarity::Positive, k).chain(std::iter::repeat_n(Polarity::Negative, k)).collect();
        prop_assert_eq!(events.iter().map(|e| e.1).collect::<Vec<_>>(), expected);
        prop_assert!((reference - start).abs() < 1e-9);
    }

    #[test]
    fn counts_are_scale_invariant_without_offset(seed in any::<u64>(), scale in 0.2f64..1.0) {
        let seq = random_sequence(seed, 0.05);
        let scaled = IntensitySequence::new(
            seq.width,
            seq.height,
            seq.frames.iter().map(|(t, img)| (*t, img.iter().map(|v| v * scale).collect())).collect(),
        ).unwrap();
        let sensor = SensorModel { log_epsilon: 1e-300, ..SensorModel::default() };
        let a = simulate(&seq, &sensor, 1).unwrap();
        let b = simulate(&scaled, &sensor, 1).unwrap();
        prop_assert_eq!(a.len(), b.len());
    }
}

#[test]
fn noise_mean_matches_rate() {
    let empty = EventStream::new(32, 32, PolarityMode::Signed);
    let sensor = SensorModel { background_rate: 10.0, ..SensorModel::default() };
    let total: usize = (0..100).map(|s| inject_noise(&empty, &sensor, 0, 1_000_000, s).unwrap().len()).sum();
    let mean = total as f64 / 100.0;
    assert!((mean - 10_240.0).abs() / 10_240.0 < 0.01, "{mean}");
}

#[test]
fn noise_on_polarity_free_stream_has_no_polarity() {
    let empty = EventStream::new(8, 8, PolarityMode::None);
    let sensor = SensorModel { background_rate: 100.0, ..SensorModel::default() };
    let s = inject_noise(&empty, &sensor, 0, 1_000_000, 3).unwrap();
    assert!(!s.is_empty());
    assert!(s.events.iter().all(|e| e.polarity == Polarity::None));
}
