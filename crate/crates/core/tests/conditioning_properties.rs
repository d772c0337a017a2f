use evsynth::conditioning::{
    capsule_normal_map, capsule_normals, embed_text, nearest_label_with_dim, rasterize_skeleton, Capsule, CapsuleBody,
    Intrinsics, Joint, RasterStyle, Skeleton2D,
};
use proptest::prelude::*;

fn words() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec("[a-z]{1,8}", 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn embedding_is_unit_or_zero(ws in words(), dim in 1usize..64) {
        let v = embed_text(&ws.join(" "), dim).unwrap();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embedding_ignores_token_order(ws in words(), rot in 0usize..8) {
        let mut shuffled = ws.clone();
        shuffled.rotate_left(rot % ws.len());
        shuffled.reverse();
        prop_assert_eq!(embed_text(&ws.join(" "), 32).unwrap(), embed_text(&shuffled.join("  "), 32).unwrap());
    }

    #[test]
    fn nearest_label_ignores_duplicates(labels in proptest::collection::vec("[a-z]{1,6}( [a-z]{1,6})?", 1..6), q in "[a-z]{1,6}") {
        let mut doubled = labels.clone();
        doubled.extend(labels.iter().cloned());
        let (a, sa) = nearest_label_with_dim(&q, &labels, 32).unwrap();
        let (b, sb) = nearest_label_with_dim(&q, &doubled, 32).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(sa, sb);
    }

    #[test]
    fn skeleton_raster_is_translation_equivariant(
        pts in proptest::collection::vec((8.0f64..16.0, 8.0f64..16.0), 3),
        dx in 0usize..8,
        dy in 0usize..8,
    ) {
        let joints = pts.iter().map(|&(x, y)| Joint::new(x, y)).collect();
        let sk = Skeleton2D::new(joints, vec![(0, 1), (1, 2)]).unwrap();
        let style = RasterStyle { line_width: 1.5, joint_radius: 1.5 };
        let a = rasterize_skeleton(&sk, 32, 32, &style).unwrap();
        let b = rasterize_skeleton(&sk.translated(dx as f64, dy as f64), 32, 32, &style).unwrap();
        for c in 0..3 {
            for y in 0..24 {
                for x in 0..24 {
                    prop_assert!((a.get(c, x, y) - b.get(c, x + dx, y + dy)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn normals_are_unit_length(
        a in (-0.3f64..0.3, -0.3f64..0.3, 2.0f64..4.0),
        b in (-0.3f64..0.3, -0.3f64..0.3, 2.0f64..4.0),
        r in 0.1f64..0.5,
    ) {
        let body = CapsuleBody {
            capsules: vec![Capsule { a: [a.0, a.1, a.2], b: [b.0, b.1, b.2], radius: r }],
            intrinsics: Intrinsics::centered(24, 24, 20.0),
        };
        let normals = capsule_normals(&body, 24, 24).unwrap();
        prop_assert!(normals.iter().any(|n| n.is_some()));
        for n in normals.into_iter().flatten() {
            prop_assert!((n.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
            // Visible surfaces face the camera.
            prop_assert!(n[2] >= -1e-9);
        }
    }

    #[test]
    fn separate_capsules_commute(y1 in -0.2f64..0.2, y2 in -0.2f64..0.2, z1 in 2.0f64..3.0, z2 in 2.0f64..3.0) {
        let left = Capsule { a: [-0.6, y1, z1], b: [-0.4, y1, z1], radius: 0.15 };
        let right = Capsule { a: [0.4, y2, z2], b: [0.6, y2, z2], radius: 0.15 };
        let k = Intrinsics::centered(32, 32, 16.0);
        let ab = capsule_normal_map(&CapsuleBody { capsules: vec![left, right], intrinsics: k }, 32, 32).unwrap();
        let ba = capsule_normal_map(&CapsuleBody { capsules: vec![right, left], intrinsics: k }, 32, 32).unwrap();
        prop_assert_eq!(ab, ba);
    }
}
