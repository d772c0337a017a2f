//! Trains a class-conditioned denoiser on simulated moving-bar events and
//! checks that samples follow their class and the real distribution.
//!
//! ```text
//! cargo run --release --example train_class_conditional -- [STEPS]
//! ```

use evsynth::conditioning::Condition;
use evsynth::ddpm::{sample_batch, GuidanceConfig, NoiseSchedule};
use evsynth::denoiser::{save_params, train, DenoiserSpec, TrainConfig};
use evsynth::event::SensorModel;
use evsynth::frame::{Encoding, EventFrame};
use evsynth::metrics::{extract_features, fid, NearestCentroid, Projection};
use evsynth::toy::{class_dataset, Motion};
use rand::Rng;

fn main() -> evsynth::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let dim = 16;
    let sensor = SensorModel::default();
    let train_set = class_dataset(100, 16, &sensor, 1)?;
    let held_out = class_dataset(100, 16, &sensor, 2)?;
    let data: Vec<(EventFrame, Condition)> = train_set
        .iter()
        .map(|(f, m)| Ok((f.clone(), Condition::class_text(m.label(), dim)?)))
        .collect::<evsynth::Result<_>>()?;

    let spec = DenoiserSpec { cond_dim: dim, ..DenoiserSpec::default() };
    let sched = NoiseSchedule::linear_rescaled(50)?;
    let cfg = TrainConfig { steps, seed: 3, ..TrainConfig::default() };
    let started = std::time::Instant::now();
    let (params, report) = train(&data, spec, &cfg, &sched)?;
    let tail = &report.losses[report.losses.len().saturating_sub(100)..];
    println!("trained {steps} steps in {:.1?}, recent loss {:.4}", started.elapsed(), tail.iter().sum::<f64>() / tail.len() as f64);
    save_params(std::env::temp_dir().join("class_conditional.dnsr"), &params)?;

    let mut labels = Vec::new();
    let mut conds = Vec::new();
    for m in Motion::ALL {
        for _ in 0..200 {
            labels.push(m);
            conds.push(Condition::class_text(m.label(), dim)?);
        }
    }
    let guidance = GuidanceConfig { scale: 2.0, uncond_prob: 0.1 };
    let samples = sample_batch(&params, &conds, &sched, &[3, 16, 16], 5, &guidance, true)?;
    let generated: Vec<EventFrame> = samples.iter().map(EventFrame::from_model_tensor).collect::<evsynth::Result<_>>()?;

    let classifier = NearestCentroid::fit(&train_set.iter().map(|(f, m)| (f.data().to_vec(), *m)).collect::<Vec<_>>())?;
    let agree = generated.iter().zip(&labels).filter(|(f, m)| classifier.predict(f.data()) == *m).count();
    println!("nearest-centroid agreement: {:.1}%", 100.0 * agree as f64 / generated.len() as f64);

    let proj = Projection::Random { dim: 64, seed: 11 };
    let real: Vec<EventFrame> = held_out.into_iter().map(|(f, _)| f).collect();
    let mut rng = evsynth::rng::stream(4, evsynth::rng::Domain::Toy, 0);
    let noise: Vec<EventFrame> = (0..400)
        .map(|_| EventFrame::from_data(16, 16, (0..768).map(|_| rng.random()).collect(), Encoding::Full))
        .collect::<evsynth::Result<_>>()?;
    let real_f = extract_features(&real, proj)?;
    println!("FID generated vs held-out: {:.3}", fid(&extract_features(&generated, proj)?, &real_f)?);
    println!("FID uniform noise vs held-out: {:.3}", fid(&extract_features(&noise, proj)?, &real_f)?);
    Ok(())
}
