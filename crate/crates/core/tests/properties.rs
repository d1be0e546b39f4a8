use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharpnet_core::data::{decode_mask, encode_mask_rgb, split_dataset, ClassMap, ColorMode, Palette, SplitSpec};
use sharpnet_core::gradcheck::{finite_difference_grad, relative_error};
use sharpnet_core::haar::{
    apply_haar_filter, haar_response, integral_image, psnr, raw_response_map, refine_with_mask, GrayImage, HaarFamily,
    HaarKernel,
};
use sharpnet_core::metrics::confusion;
use sharpnet_core::tnsr::{self, DType};
use sharpnet_core::{Graph, NodeId, Padding, Tensor};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(64)
}

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Reverse-mode gradient of `Σ r ⊙ f(inputs)` against central differences,
/// for a fixed random readout `r`.
fn grad_error(inputs: &[Tensor], seed: u64, f: &dyn Fn(&mut Graph, &[NodeId]) -> NodeId) -> f64 {
    let mut g = Graph::new();
    let ids: Vec<_> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let y = f(&mut g, &ids);
    let readout = random(g.value(y).shape(), seed ^ 0xabc);
    let r = g.constant(readout.clone());
    let m = g.mul(y, r).unwrap();
    let s = g.sum(m).unwrap();
    g.backward(s).unwrap();
    let mut worst = 0.0f64;
    for (k, id) in ids.iter().enumerate() {
        let analytic = g.grad(*id).unwrap();
        let numeric = finite_difference_grad(
            |x| {
                let mut h = Graph::new();
                let ids: Vec<_> = inputs
                    .iter()
                    .enumerate()
                    .map(|(j, t)| h.constant(if j == k { x.clone() } else { t.clone() }))
                    .collect();
                let y = f(&mut h, &ids);
                h.value(y).data().iter().zip(readout.data()).map(|(a, b)| a * b).sum()
            },
            &inputs[k],
            1e-6,
        );
        worst = worst.max(relative_error(analytic.data(), numeric.data()));
    }
    worst
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn depthwise_gradients(seed in any::<u64>(), h in 1usize..6, w in 1usize..6, c in 1usize..4, big in any::<bool>()) {
        let k = if big { 5 } else { 3 };
        let inputs = [random(&[1, h, w, c], seed), random(&[k, k, c], seed + 1)];
        let e = grad_error(&inputs, seed, &|g, i| g.depthwise_conv(i[0], i[1], 1, Padding::Same).unwrap());
        prop_assert!(e < 1e-7, "{e}");
    }

    #[test]
    fn pointwise_gradients(seed in any::<u64>(), n in 1usize..3, c in 1usize..5, k in 1usize..5) {
        let inputs = [random(&[n, 3, 2, c], seed), random(&[c, k], seed + 1), random(&[k], seed + 2)];
        let e = grad_error(&inputs, seed, &|g, i| g.pointwise_conv(i[0], i[1], i[2]).unwrap());
        prop_assert!(e < 1e-7, "{e}");
    }

    #[test]
    fn maxpool_gradients(seed in any::<u64>(), h in 1usize..4, w in 1usize..4, c in 1usize..3) {
        let inputs = [random(&[1, 2 * h, 2 * w, c], seed)];
        let e = grad_error(&inputs, seed, &|g, i| {
            let a = g.max_pool(i[0], 2, 2, Padding::Valid).unwrap();
            let b = g.max_pool(i[0], 3, 1, Padding::Same).unwrap();
            let b = g.max_pool(b, 2, 2, Padding::Valid).unwrap();
            g.add(a, b).unwrap()
        });
        prop_assert!(e < 1e-7, "{e}");
    }

    #[test]
    fn elementwise_gradients(seed in any::<u64>()) {
        let inputs = [random(&[1, 2, 3, 2], seed), random(&[1, 2, 3, 2], seed + 1), random(&[1, 2, 3, 1], seed + 2)];
        let e = grad_error(&inputs, seed, &|g, i| {
            let s = g.sigmoid(i[0]).unwrap();
            let m = g.mul(s, i[1]).unwrap();
            let r = g.relu(i[1]).unwrap();
            let a = g.add(m, r).unwrap();
            let a = g.scale(a, 0.7).unwrap();
            let c = g.concat_channels(&[a, i[2]]).unwrap();
            g.upsample2x(c).unwrap()
        });
        prop_assert!(e < 1e-7, "{e}");
    }

    #[test]
    fn cross_entropy_gradient_and_probabilities(seed in any::<u64>(), k in 1usize..5) {
        let logits = random(&[2, 2, 3, k], seed).map(|v| 4.0 * v);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut targets = Tensor::zeros(&[2, 2, 3, k]);
        for p in 0..12 {
            let c = rng.gen_range(0..k);
            targets.data_mut()[p * k + c] = 1.0;
        }
        let mut g = Graph::new();
        let l = g.variable(logits.clone());
        let t = g.constant(targets.clone());
        let loss = g.softmax_cross_entropy(l, t).unwrap();
        for row in g.softmax_probs(loss).unwrap().chunks(k) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        g.backward(loss).unwrap();
        let analytic = g.grad(l).unwrap();
        let numeric = finite_difference_grad(|x| {
            let mut h = Graph::new();
            let (a, b) = (h.constant(x.clone()), h.constant(targets.clone()));
            let loss = h.softmax_cross_entropy(a, b).unwrap();
            h.value(loss).data()[0]
        }, &logits, 1e-6);
        prop_assert!(relative_error(analytic.data(), numeric.data()) < 1e-7);
    }

    #[test]
    fn depthwise_channels_are_independent(seed in any::<u64>(), c in 2usize..5, which in 0usize..5) {
        let which = which % c;
        let x = random(&[1, 5, 5, c], seed);
        let k = random(&[3, 3, c], seed + 1);
        let mut bumped = x.clone();
        for (i, v) in bumped.data_mut().iter_mut().enumerate() {
            if i % c == which {
                *v += 1.0;
            }
        }
        let mut g = Graph::new();
        let (a, b, kk) = (g.constant(x), g.constant(bumped), g.constant(k));
        let ya = g.depthwise_conv(a, kk, 1, Padding::Same).unwrap();
        let yb = g.depthwise_conv(b, kk, 1, Padding::Same).unwrap();
        for (i, (p, q)) in g.value(ya).data().iter().zip(g.value(yb).data()).enumerate() {
            if i % c != which {
                prop_assert_eq!(p, q);
            }
        }
    }

    #[test]
    fn metrics_invariant_under_label_permutation(seed in any::<u64>(), k in 2usize..6, len in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<u8> = (0..len).map(|_| rng.gen_range(0..k) as u8).collect();
        let pred: Vec<u8> = (0..len).map(|_| rng.gen_range(0..k) as u8).collect();
        let mut perm: Vec<u8> = (0..k as u8).collect();
        for i in (1..k).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let relabel = |v: &[u8]| ClassMap::new(len, 1, v.iter().map(|&c| perm[c as usize]).collect()).unwrap();
        let a = confusion(&ClassMap::new(len, 1, pred.clone()).unwrap(), &ClassMap::new(len, 1, truth.clone()).unwrap(), k).unwrap();
        let b = confusion(&relabel(&pred), &relabel(&truth), k).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
        prop_assert!(close(a.iou(true).1.unwrap(), b.iou(true).1.unwrap()));
        prop_assert!(close(a.fwiou(None).unwrap(), b.fwiou(None).unwrap()));
        prop_assert!(close(a.f1_macro(), b.f1_macro()));
        prop_assert!(close(a.balanced_accuracy(), b.balanced_accuracy()));
        prop_assert!(close(a.mcc(), b.mcc()));
    }

    #[test]
    fn metric_ranges(seed in any::<u64>(), k in 2usize..6, len in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<u8> = (0..len).map(|_| rng.gen_range(0..k) as u8).collect();
        let pred: Vec<u8> = (0..len).map(|_| rng.gen_range(0..k) as u8).collect();
        let m = confusion(&ClassMap::new(len, 1, pred).unwrap(), &ClassMap::new(len, 1, truth).unwrap(), k).unwrap();
        let unit = 0.0..=1.0;
        prop_assert!(unit.contains(&m.iou(true).1.unwrap()));
        prop_assert!(unit.contains(&m.fwiou(None).unwrap()));
        prop_assert!(unit.contains(&m.f1_macro()));
        prop_assert!(unit.contains(&m.balanced_accuracy()));
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&m.mcc()));
    }

    #[test]
    fn one_hot_ciw_selects_class_iou(seed in any::<u64>(), k in 2usize..6, len in 1usize..80, pick in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<u8> = (0..len).map(|_| rng.gen_range(0..k) as u8).collect();
        let pred: Vec<u8> = (0..len).map(|_| rng.gen_range(0..k) as u8).collect();
        let c = truth[pick % len] as usize;
        let m = confusion(&ClassMap::new(len, 1, pred).unwrap(), &ClassMap::new(len, 1, truth).unwrap(), k).unwrap();
        let mut w = vec![0.0; k];
        w[c] = 1.0;
        prop_assert_eq!(m.fwiou(Some(&w)).unwrap(), m.iou_per_class()[c].unwrap());
    }

    #[test]
    fn rect_sum_is_exact(seed in any::<u64>(), w in 1usize..24, h in 1usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pixels: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0..=255) as f64).collect();
        let ii = integral_image(&GrayImage::new(w, h, pixels.clone()).unwrap());
        let (x, y) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (rw, rh) = (rng.gen_range(1..=w - x), rng.gen_range(1..=h - y));
        let direct: f64 = (y..y + rh).flat_map(|yy| (x..x + rw).map(move |xx| (xx, yy))).map(|(xx, yy)| pixels[yy * w + xx]).sum();
        prop_assert_eq!(ii.rect_sum(x, y, rw, rh).unwrap(), direct);
    }

    #[test]
    fn psnr_is_symmetric(seed in any::<u64>(), len in 1usize..50) {
        let a = random(&[len], seed);
        let b = random(&[len], seed + 1);
        prop_assert_eq!(psnr(a.data(), b.data(), 2.0).unwrap(), psnr(b.data(), a.data(), 2.0).unwrap());
        prop_assert_eq!(psnr(a.data(), a.data(), 2.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn refinement_is_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let image = GrayImage::new(16, 16, (0..256).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let mask = ClassMap::new(16, 16, (0..256).map(|_| rng.gen_range(0..3)).collect()).unwrap();
        let map = apply_haar_filter(&image, &HaarKernel::default_bank()[0]).unwrap();
        let once = refine_with_mask(&map, &mask).unwrap();
        prop_assert_eq!(refine_with_mask(&once, &mask).unwrap(), once);
    }

    #[test]
    fn split_is_a_partition(n in 0usize..200, seed in any::<u64>()) {
        let spec = SplitSpec { seed, ..SplitSpec::default() };
        let s = split_dataset(n, &spec).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn mask_round_trip(seed in any::<u64>(), w in 1usize..20, h in 1usize..20) {
        let palette = Palette::culvert_sewer();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = ClassMap::new(w, h, (0..w * h).map(|_| rng.gen_range(0..palette.len() as u8)).collect()).unwrap();
        let rgb = encode_mask_rgb(&mask, &palette).unwrap();
        prop_assert_eq!(decode_mask(&rgb, w, h, &palette, ColorMode::Strict).unwrap(), mask);
    }

    #[test]
    fn tnsr_round_trip(seed in any::<u64>(), dims in proptest::collection::vec(1usize..5, 1..5)) {
        let t = random(&dims, seed);
        prop_assert_eq!(tnsr::decode(&tnsr::encode(&t, DType::F64).unwrap()).unwrap(), t);
    }

    #[test]
    fn dense_map_matches_windows(seed in any::<u64>(), family in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let image = GrayImage::new(16, 16, (0..256).map(|_| rng.gen_range(0..=255) as f64).collect()).unwrap();
        let kernel = HaarKernel::default_bank()[family];
        let ii = integral_image(&image);
        let raw = raw_response_map(&image, &kernel).unwrap();
        let (hw, hh) = (kernel.width() / 2, kernel.height() / 2);
        for py in 0..16 {
            for px in 0..16 {
                let inside = px >= hw && py >= hh && px - hw + kernel.width() <= 16 && py - hh + kernel.height() <= 16;
                let expected = if inside { haar_response(&ii, &kernel, px - hw, py - hh).unwrap() } else { 0.0 };
                prop_assert_eq!(raw[py * 16 + px], expected);
            }
        }
    }

    #[test]
    fn edge_responses_flip_under_mirroring(seed in any::<u64>(), vertical in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (12, 12);
        let pixels: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0..=255) as f64).collect();
        let mirrored: Vec<f64> = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if vertical { pixels[y * w + (w - 1 - x)] } else { pixels[(h - 1 - y) * w + x] }
            })
            .collect();
        let family = if vertical { HaarFamily::VerticalEdge } else { HaarFamily::HorizontalEdge };
        let kernel = HaarKernel::new(family, 4, 4, 1).unwrap();
        let (a, b) = (integral_image(&GrayImage::new(w, h, pixels).unwrap()), integral_image(&GrayImage::new(w, h, mirrored).unwrap()));
        for y in 0..=h - 4 {
            for x in 0..=w - 4 {
                let (mx, my) = if vertical { (w - 4 - x, y) } else { (x, h - 4 - y) };
                prop_assert_eq!(haar_response(&a, &kernel, x, y).unwrap(), -haar_response(&b, &kernel, mx, my).unwrap());
            }
        }
    }

    #[test]
    fn constant_images_have_zero_response(value in 0.0f64..1.0, family in 0usize..5) {
        let image = GrayImage::new(16, 16, vec![value; 256]).unwrap();
        let kernel = HaarKernel::default_bank()[family];
        prop_assert!(raw_response_map(&image, &kernel).unwrap().iter().all(|&v| v.abs() < 1e-9));
    }
}
