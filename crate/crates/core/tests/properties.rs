use proptest::prelude::*;

use bcnn::data::{
    adjust_brightness, augment_dataset, rotate, scale_image, stratified_split, AugmentSpec,
    DatasetManifest, GrayImage, ManifestItem, Provenance,
};
use bcnn::model::{build_model, forward, tiny_config, ParameterSet};
use bcnn::optim::{adam_init, adam_step, AdamConfig};
use bcnn::tensor::{concat_channels, softmax_rows, softmax_xent, upsample2};
use bcnn::Tensor;

fn tensor(shape: &[usize]) -> impl Strategy<Value = Tensor<f64>> {
    let shape = shape.to_vec();
    let n: usize = shape.iter().product();
    prop::collection::vec(-3.0f64..3.0, n).prop_map(move |d| Tensor::new(&shape, d).unwrap())
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn image(max_side: usize) -> impl Strategy<Value = GrayImage> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h).prop_map(move |px| GrayImage::new(w, h, px).unwrap())
    })
}

fn uniform(p: &ParameterSet<f64>, value: f64) -> ParameterSet<f64> {
    let mut out = p.zeros_like();
    for (_, t) in out.iter_mut() {
        *t = Tensor::full(t.shape(), value).unwrap();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_shift_invariant(x in tensor(&[3, 4]), c in -50.0f64..50.0) {
        let shifted = x.map(|v| v + c);
        let (a, b) = (softmax_rows(&x).unwrap(), softmax_rows(&shifted).unwrap());
        for (p, q) in a.data().iter().zip(b.data()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
        for row in a.data().chunks(4) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn xent_gradient_rows_sum_to_zero(x in tensor(&[5, 3]), t in prop::collection::vec(0usize..3, 5)) {
        let (loss, g) = softmax_xent(&x, &t).unwrap();
        prop_assert!(loss >= 0.0);
        for row in g.data().chunks(3) {
            prop_assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn upsample_backward_is_adjoint(x in tensor(&[2, 3, 2, 3]), dy in tensor(&[2, 3, 4, 6])) {
        let (y, ctx) = upsample2(&x).unwrap();
        let dx = ctx.backward(&dy).unwrap();
        prop_assert!((dot(&y, &dy) - dot(&x, &dx)).abs() < 1e-9);
    }

    #[test]
    fn concat_backward_is_adjoint(
        a in tensor(&[2, 2, 3, 3]),
        b in tensor(&[2, 3, 3, 3]),
        dy in tensor(&[2, 5, 3, 3]),
    ) {
        let (y, ctx) = concat_channels(&a, &b).unwrap();
        let (da, db) = ctx.backward(&dy).unwrap();
        prop_assert!((dot(&y, &dy) - dot(&a, &da) - dot(&b, &db)).abs() < 1e-9);
    }

    #[test]
    fn forward_is_batch_permutation_equivariant(x in tensor(&[3, 1, 8, 8]), seed in 0u32..1000) {
        let params = build_model::<f64>(&tiny_config(seed)).unwrap();
        let (logits, _) = forward(&params, &x).unwrap();
        let plane = 64;
        let perm = [2usize, 0, 1];
        let mut data = Vec::with_capacity(x.len());
        for &i in &perm {
            data.extend_from_slice(&x.data()[i * plane..(i + 1) * plane]);
        }
        let (permuted, _) = forward(&params, &Tensor::new(x.shape(), data).unwrap()).unwrap();
        for (row, &i) in perm.iter().enumerate() {
            prop_assert_eq!(&permuted.data()[row * 3..row * 3 + 3], &logits.data()[i * 3..i * 3 + 3]);
        }
    }

    #[test]
    fn adam_step_is_bounded_and_opposes_gradient(g in -10.0f64..10.0, steps in 1usize..20) {
        prop_assume!(g.abs() > 1e-3);
        let cfg = tiny_config(0);
        let mut p = uniform(&ParameterSet::zeros(&cfg).unwrap(), 0.0);
        let grads = uniform(&p, g);
        let mut state = adam_init(&p, AdamConfig::default()).unwrap();
        for _ in 0..steps {
            let before = p.iter().next().unwrap().1.data()[0];
            adam_step(&mut state, &mut p, &grads).unwrap();
            let delta = p.iter().next().unwrap().1.data()[0] - before;
            prop_assert!(delta.abs() <= 1e-3 * 1.01, "step {delta}");
            prop_assert!(delta * g < 0.0);
        }
    }

    #[test]
    fn quarter_turns_compose_to_identity(img in image(12)) {
        let mut out = img.clone();
        for _ in 0..4 {
            out = rotate(&out, 90.0);
        }
        prop_assert_eq!(&out, &img);
        prop_assert_eq!(rotate(&rotate(&img, 90.0), 270.0), img.clone());
        prop_assert_eq!(rotate(&rotate(&img, 180.0), 180.0), img);
    }

    #[test]
    fn unit_factors_are_identity(img in image(12)) {
        prop_assert_eq!(scale_image(&img, 1.0).unwrap(), img.clone());
        prop_assert_eq!(adjust_brightness(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn brightness_is_monotone_and_clamped(img in image(10), f in 0.25f64..4.0) {
        let out = adjust_brightness(&img, f).unwrap();
        for (&a, &b) in img.pixels().iter().zip(out.pixels()) {
            prop_assert_eq!(b, (a as f64 * f).round().min(255.0) as u8);
        }
    }

    #[test]
    fn split_partitions_every_class(
        counts in prop::collection::vec(2usize..40, 2..5),
        ratio in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let manifest = toy_manifest(&counts);
        let (train, val) = stratified_split(&manifest, ratio, seed).unwrap();
        prop_assert_eq!(train.len() + val.len(), manifest.len());
        let mut seen: Vec<&str> = train.items().iter().chain(val.items()).map(|i| i.path.as_str()).collect();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), manifest.len());
        for (c, &n) in counts.iter().enumerate() {
            prop_assert!(val.counts()[c] >= 1);
            prop_assert_eq!(train.counts()[c] + val.counts()[c], n);
        }
        let again = stratified_split(&manifest, ratio, seed).unwrap();
        prop_assert_eq!(again.0.labels(), train.labels());
    }

    #[test]
    fn augmentation_count_and_labels(counts in prop::collection::vec(1usize..6, 2..4), k in 0usize..4, seed in any::<u64>()) {
        let manifest = toy_manifest(&counts);
        let spec = AugmentSpec { variants: k, seed, ..AugmentSpec::default() };
        let out = augment_dataset(&manifest, &spec).unwrap();
        prop_assert_eq!(out.len(), manifest.len() * (1 + k));
        for (c, &n) in counts.iter().enumerate() {
            prop_assert_eq!(out.counts()[c], n * (1 + k));
        }
    }
}

fn toy_manifest(counts: &[usize]) -> DatasetManifest {
    let names = (0..counts.len()).map(|c| format!("class{c}")).collect();
    let mut items = Vec::new();
    for (label, &n) in counts.iter().enumerate() {
        for i in 0..n {
            items.push(ManifestItem {
                path: format!("class{label}/{i}.pgm"),
                label,
                image: GrayImage::from_fn(8, 8, |r, c| (r * 8 + c + i + label) as u8),
            });
        }
    }
    DatasetManifest::new(names, items, Provenance::Loaded, None).unwrap()
}

#[test]
fn adam_minimises_a_quadratic() {
    // f(θ) = ½θ², ∇f = θ
    let cfg = tiny_config(0);
    let mut p = uniform(&ParameterSet::zeros(&cfg).unwrap(), 1.0);
    let mut state = adam_init(&p, AdamConfig::with_lr(0.01)).unwrap();
    let mut reached = None;
    for step in 1..=500 {
        let grads = p.clone();
        adam_step(&mut state, &mut p, &grads).unwrap();
        if p.iter().all(|(_, t)| t.max_abs() < 0.1) {
            reached = Some(step);
            break;
        }
    }
    assert!(reached.is_some(), "did not converge within 500 steps");
}
