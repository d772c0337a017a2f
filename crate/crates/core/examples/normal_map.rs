//! Ray-casts a capsule figure into a normal-map control image.

use evsynth::conditioning::{capsule_normal_map, capsule_normals, Capsule, CapsuleBody, Intrinsics, Condition};

fn main() -> evsynth::Result<()> {
    let cap = |a: [f64; 3], b: [f64; 3], radius| Capsule { a, b, radius };
    let body = CapsuleBody {
        capsules: vec![
            cap([0.0, -0.45, 3.0], [0.0, 0.1, 3.0], 0.18),
            cap([0.0, -0.65, 3.0], [0.0, -0.65, 3.0], 0.12),
            cap([-0.1, 0.1, 3.0], [-0.15, 0.6, 3.0], 0.07),
            cap([0.1, 0.1, 3.0], [0.15, 0.6, 3.0], 0.07),
            cap([-0.2, -0.4, 3.0], [-0.45, 0.0, 3.0], 0.05),
            cap([0.2, -0.4, 3.0], [0.45, 0.0, 3.0], 0.05),
        ],
        intrinsics: Intrinsics::centered(64, 64, 80.0),
    };
    let normals = capsule_normals(&body, 64, 64)?;
    let hits = normals.iter().flatten().count();
    let worst = normals.iter().flatten().map(|n| ((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() - 1.0).abs()).fold(0.0, f64::max);
    println!("{hits} of {} pixels hit the body; max |‖n‖ - 1| = {worst:.1e}", 64 * 64);

    let map = capsule_normal_map(&body, 64, 64)?;
    let path = std::env::temp_dir().join("normal_map.ppm");
    map.save_ppm(&path)?;
    println!("normal map written to {}", path.display());
    let cond = Condition::normal_map(map, 16)?;
    println!("condition carries a {}-d prompt embedding and a control image", cond.embedding().map_or(0, <[f64]>::len));
    Ok(())
}
