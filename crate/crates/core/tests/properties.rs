use std::f64::consts::PI;

use omniproj::eval::{accumulate, iou, ConfusionMatrix};
use omniproj::geom::solid_angle_of_mask;
use omniproj::warp::{project_image, project_labels};
use omniproj::{
    EquirectSpec, Interp, LabelMap, ProjectionJob, ProjectionPlan, RasterImage, SphereCoord,
    WarpMode, IGNORE_ID,
};
use proptest::prelude::*;

fn job(theta: f64, phi: f64, spec: EquirectSpec, n: usize, interp: Interp) -> ProjectionJob {
    ProjectionJob::new(
        SphereCoord::new(theta, phi).unwrap(),
        spec,
        n,
        interp,
        WarpMode::Inverse,
    )
    .unwrap()
}

fn labels_strategy(side: usize, classes: u8) -> impl Strategy<Value = LabelMap> {
    prop::collection::vec(
        prop_oneof![9 => 0..classes, 1 => Just(IGNORE_ID)],
        side * side,
    )
    .prop_map(move |ids| LabelMap::new(side, side, ids).unwrap())
}

#[test]
fn azimuth_shift_is_a_circular_shift() {
    let spec = EquirectSpec::new(512, 256).unwrap();
    let img = RasterImage::new(
        33,
        33,
        1,
        (0..33 * 33)
            .map(|k| ((k * 37) % 256) as f32 / 255.0)
            .collect(),
    )
    .unwrap();
    for phi in [PI / 16.0, 6.0 * PI / 16.0, PI / 2.0] {
        let (base, base_mask) =
            project_image(&img, &job(0.0, phi, spec, 33, Interp::Nearest)).unwrap();
        for shift in [1usize, 37, 256, 500] {
            let delta = shift as f64 * spec.delta_theta();
            let (moved, moved_mask) =
                project_image(&img, &job(delta, phi, spec, 33, Interp::Nearest)).unwrap();
            let mut differing = 0;
            for y in 0..spec.height() {
                for x in 0..spec.width() {
                    let sx = (x + spec.width() - shift) % spec.width();
                    if moved_mask.get(x, y) != base_mask.get(sx, y)
                        || moved.pixel(x, y) != base.pixel(sx, y)
                    {
                        differing += 1;
                    }
                }
            }
            // only pixels whose lookup lands exactly on a rounding boundary may differ
            assert!(
                differing <= 4,
                "phi {phi}, shift {shift}: {differing} pixels differ"
            );
        }
    }
}

#[test]
fn constant_image_fills_the_mask_without_holes() {
    let spec = EquirectSpec::new(512, 256).unwrap();
    let img = RasterImage::filled(65, 65, 3, 0.6).unwrap();
    for k in 1..=8 {
        for interp in [Interp::Nearest, Interp::Bilinear] {
            let (out, mask) =
                project_image(&img, &job(0.3, k as f64 * PI / 16.0, spec, 65, interp)).unwrap();
            assert!(!mask.is_empty());
            for y in 0..spec.height() {
                for x in 0..spec.width() {
                    let expected = if mask.get(x, y) { 0.6 } else { 0.0 };
                    assert!(
                        out.pixel(x, y).iter().all(|&v| (v - expected).abs() < 1e-6),
                        "({x}, {y}) at k={k}"
                    );
                }
            }
        }
    }
}

#[test]
fn plan_is_shared_between_images() {
    let spec = EquirectSpec::new(256, 128).unwrap();
    let j = job(-1.0, 0.7, spec, 33, Interp::Bilinear);
    let plan = ProjectionPlan::build(&j).unwrap();
    for v in [0.0, 0.25, 1.0] {
        let img = RasterImage::filled(33, 33, 1, v).unwrap();
        assert_eq!(
            plan.apply_image(&img).unwrap(),
            project_image(&img, &j).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn masked_solid_angle_is_placement_invariant(theta in -PI..PI, phi in -1.5f64..1.5) {
        let spec = EquirectSpec::new(1024, 512).unwrap();
        let reference = solid_angle_of_mask(&ProjectionPlan::build(&job(0.0, 0.0, spec, 129, Interp::Nearest)).unwrap().mask(), &spec).unwrap();
        let moved = solid_angle_of_mask(&ProjectionPlan::build(&job(theta, phi, spec, 129, Interp::Nearest)).unwrap().mask(), &spec).unwrap();
        prop_assert!((moved - reference).abs() / reference <= 0.01, "{moved} vs {reference}");
    }

    #[test]
    fn projected_labels_stay_in_the_input_alphabet(labels in labels_strategy(17, 6), theta in -PI..PI, phi in -1.5f64..1.5) {
        let spec = EquirectSpec::new(256, 128).unwrap();
        let (out, mask) = project_labels(&labels, &job(theta, phi, spec, 17, Interp::Bilinear)).unwrap();
        let allowed = labels.distinct_ids();
        for (idx, &id) in out.ids().iter().enumerate() {
            if mask.bits()[idx] {
                prop_assert!(allowed.contains(&id));
            } else {
                prop_assert_eq!(id, IGNORE_ID);
            }
        }
    }

    #[test]
    fn accumulation_is_additive(
        a in labels_strategy(12, 4),
        b in labels_strategy(12, 4),
        c in labels_strategy(12, 4),
        d in labels_strategy(12, 4),
    ) {
        let names: Vec<String> = ["a", "b", "c", "d"].map(String::from).to_vec();
        let mut together = ConfusionMatrix::new(names.clone()).unwrap();
        accumulate(&a, &b, None, &mut together).unwrap();
        accumulate(&c, &d, None, &mut together).unwrap();
        let mut first = ConfusionMatrix::new(names.clone()).unwrap();
        let mut second = ConfusionMatrix::new(names).unwrap();
        accumulate(&a, &b, None, &mut first).unwrap();
        accumulate(&c, &d, None, &mut second).unwrap();
        first.merge(&second).unwrap();
        prop_assert_eq!(&together, &first);
    }

    #[test]
    fn iou_follows_class_relabeling(
        pred in labels_strategy(10, 5),
        gt in labels_strategy(10, 5),
        perm in Just([0u8, 1, 2, 3, 4]).prop_shuffle(),
    ) {
        let names: Vec<String> = (0..5).map(|k| format!("c{k}")).collect();
        let mut cm = ConfusionMatrix::new(names.clone()).unwrap();
        accumulate(&pred, &gt, None, &mut cm).unwrap();
        let base = iou(&cm);

        let mut table = [IGNORE_ID; 256];
        for (from, &to) in perm.iter().enumerate() {
            table[from] = to;
        }
        let (mut p2, mut g2) = (pred.clone(), gt.clone());
        p2.remap(&table);
        g2.remap(&table);
        let mut permuted_names = names.clone();
        for (from, &to) in perm.iter().enumerate() {
            permuted_names[to as usize] = names[from].clone();
        }
        let mut cm2 = ConfusionMatrix::new(permuted_names).unwrap();
        accumulate(&p2, &g2, None, &mut cm2).unwrap();
        let moved = iou(&cm2);

        for (from, &to) in perm.iter().enumerate() {
            prop_assert_eq!(&base.classes[from], &moved.classes[to as usize]);
        }
        prop_assert!((base.mean - moved.mean).abs() < 1e-9);
    }
}
