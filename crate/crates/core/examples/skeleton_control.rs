//! Rasterizes skeletons into control images and trains a denoiser whose
//! events land where the skeleton says.
//!
//! ```text
//! cargo run --release --example skeleton_control -- [STEPS]
//! ```

use evsynth::conditioning::{default_bones, rasterize_skeleton, Condition, Joint, RasterStyle, Skeleton2D};
use evsynth::ddpm::{sample_batch, GuidanceConfig, NoiseSchedule};
use evsynth::denoiser::{train, DenoiserSpec, TrainConfig};
use evsynth::event::SensorModel;
use evsynth::frame::EventFrame;
use evsynth::toy::{event_mass_centroid, skeleton_control, skeleton_dataset};

fn main() -> evsynth::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);

    // A 13-joint figure at 64x64 with the default bone table.
    let joints = [
        (32, 8), (24, 18), (40, 18), (20, 30), (44, 30), (18, 40), (46, 40),
        (27, 36), (37, 36), (26, 48), (38, 48), (26, 60), (38, 60),
    ]
    .iter()
    .map(|&(x, y)| Joint::new(x as f64, y as f64))
    .collect();
    let figure = Skeleton2D::new(joints, default_bones())?;
    let map = rasterize_skeleton(&figure, 64, 64, &RasterStyle::for_size(64, 64))?;
    let path = std::env::temp_dir().join("skeleton_control.ppm");
    map.save_ppm(&path)?;
    println!("13-joint control image: {} lit pixels, written to {}", map.lit_pixels().len(), path.display());

    let dim = 16;
    let cond = |sk: &Skeleton2D| Condition::skeleton(skeleton_control(sk, 16)?, dim);
    let sensor = SensorModel::default();
    let train_set = skeleton_dataset(300, 16, &sensor, 1)?;
    let held_out = skeleton_dataset(50, 16, &sensor, 2)?;
    let data = train_set.iter().map(|(f, s)| Ok((f.clone(), cond(s)?))).collect::<evsynth::Result<Vec<_>>>()?;

    let spec = DenoiserSpec { control_channels: 3, cond_dim: dim, ..DenoiserSpec::default() };
    let sched = NoiseSchedule::linear_rescaled(50)?;
    let (params, _) = train(&data, spec, &TrainConfig { steps, seed: 3, ..TrainConfig::default() }, &sched)?;

    let conds = held_out.iter().map(|(_, s)| cond(s)).collect::<evsynth::Result<Vec<_>>>()?;
    let guidance = GuidanceConfig { scale: 2.0, uncond_prob: 0.1 };
    let samples = sample_batch(&params, &conds, &sched, &[3, 16, 16], 5, &guidance, true)?;
    let mut within = 0;
    for (x, (_, sk)) in samples.iter().zip(&held_out) {
        let (cx, cy) = event_mass_centroid(&EventFrame::from_model_tensor(x)?).unwrap_or((f64::NAN, f64::NAN));
        if ((cx - sk.joints[0].x).powi(2) + (cy - sk.joints[0].y).powi(2)).sqrt() <= 3.0 {
            within += 1;
        }
    }
    println!("{within}/{} generated frames centre within 3 px of the conditioning joint", held_out.len());
    Ok(())
}
