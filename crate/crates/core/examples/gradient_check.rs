//! Compares analytic denoiser gradients with central finite differences.

use evsynth::conditioning::{Condition, ControlImage};
use evsynth::denoiser::{Activation, DenoiserParams, DenoiserSpec, ParamGroup};
use evsynth::Tensor;

fn main() -> evsynth::Result<()> {
    let spec = DenoiserSpec { image_channels: 3, control_channels: 1, hidden: 4, cond_dim: 3, time_dim: 4, activation: Activation::Silu };
    let params = DenoiserParams::init_all(spec, 1)?;
    let mut rng = evsynth::rng::stream(2, evsynth::rng::Domain::Toy, 0);
    let x = Tensor::randn(&[3, 4, 4], &mut rng);
    let target = Tensor::randn(&[3, 4, 4], &mut rng);
    let mut ctrl = ControlImage::blank(4, 4, 1);
    ctrl.set(0, 1, 2, 1.0);
    let cond = Condition::Skeleton { control: ctrl, embedding: vec![0.2, -0.4, 0.9] };

    let (_, grad) = params.loss_and_grad(&x, 7, &cond, &target)?;
    let h = 1e-4;
    let mut worst = 0.0f64;
    for g in ParamGroup::ALL {
        let mut group_worst = 0.0f64;
        for i in params.range(g) {
            let mut p = params.clone();
            p.values_mut()[i] += h;
            let up = p.loss_and_grad(&x, 7, &cond, &target)?.0;
            p.values_mut()[i] -= 2.0 * h;
            let down = p.loss_and_grad(&x, 7, &cond, &target)?.0;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-7);
            group_worst = group_worst.max(rel);
        }
        println!("{:<13} {:>5} params  max relative error {group_worst:.2e}", g.name(), params.range(g).len());
        worst = worst.max(group_worst);
    }
    println!("{} parameters, worst relative error {worst:.2e}", params.len());
    Ok(())
}
