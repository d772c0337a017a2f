//! Noise schedule statistics, the forward marginal, and a reverse chain driven
//! by an oracle that knows the clean image.

use evsynth::conditioning::Condition;
use evsynth::ddpm::{q_sample, sample_chain, GuidanceConfig, NoiseSchedule};
use evsynth::Tensor;

fn main() -> evsynth::Result<()> {
    let sched = NoiseSchedule::default_linear();
    for t in [1, 10, 100, 500, 1000] {
        println!("t = {t:4}  beta = {:.5}  alpha_bar = {:.6}", sched.beta(t), sched.alpha_bar(t));
    }

    let mut rng = evsynth::rng::stream(1, evsynth::rng::Domain::Sample, 0);
    let x0 = Tensor::full(&[1], 1.0);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| q_sample(&x0, 1000, &Tensor::randn(&[1], &mut rng), &sched).map(|x| x.data()[0]))
        .collect::<evsynth::Result<_>>()?;
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
    println!("q(x_T | x0 = 1): mean {mean:.4}, variance {var:.4}");

    // An oracle that returns the exact noise for a known x0 walks the chain back to it.
    let short = NoiseSchedule::linear_rescaled(50)?;
    let target = Tensor::from_vec(&[4], vec![-0.5, 0.0, 0.25, 0.75])?;
    let oracle = |x_t: &Tensor, t: usize, _: &Condition| {
        let ab = short.alpha_bar(t);
        x_t.axpby(1.0 / (1.0 - ab).sqrt(), &target, -ab.sqrt() / (1.0 - ab).sqrt())
    };
    let none = GuidanceConfig { scale: 0.0, uncond_prob: 0.0 };
    let x = sample_chain(&oracle, &Condition::Unconditional, &short, &[4], &none, &mut rng)?;
    println!("oracle chain result {:?} (target {:?})", x.data(), target.data());
    Ok(())
}
