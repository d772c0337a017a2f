//! Renders a moving bar, converts it to events and adds background activity.

use evsynth::esim::{inject_noise, sample_thresholds, simulate, simulate_parallel};
use evsynth::event::{Polarity, SensorModel};
use evsynth::toy::{moving_bar, Motion};

fn main() -> evsynth::Result<()> {
    let mut rng = evsynth::rng::stream(1, evsynth::rng::Domain::Toy, 0);
    let seq = moving_bar(Motion::Horizontal, 32, &mut rng)?;

    let ideal = SensorModel::ideal(0.2);
    let stream = simulate(&seq, &ideal, 5)?;
    let pos = stream.events.iter().filter(|e| e.polarity == Polarity::Positive).count();
    println!("ideal sensor: {} events ({pos} positive, {} negative)", stream.len(), stream.len() - pos);

    let jittered = SensorModel { threshold_sigma: 0.03, ..ideal };
    let th = sample_thresholds(&jittered, 32, 32, 5)?;
    let (lo, hi) = th.thresholds.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!("per-pixel thresholds in [{lo:.3}, {hi:.3}]");
    let serial = simulate(&seq, &jittered, 5)?;
    let parallel = simulate_parallel(&seq, &jittered, 5)?;
    assert_eq!(serial, parallel);
    println!("jittered sensor: {} events (serial == parallel)", serial.len());

    let noisy_sensor = SensorModel { background_rate: 10.0, ..jittered };
    let noisy = inject_noise(&serial, &noisy_sensor, 0, 1_000_000, 9)?;
    println!(
        "with 10 ev/px/s background over 1 s: {} events (about {} expected from noise)",
        noisy.len(),
        10 * 32 * 32
    );
    Ok(())
}
