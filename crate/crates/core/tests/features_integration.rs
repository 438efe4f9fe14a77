use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svmcascade::features::{
    build_lut, build_lut_subset, enumerate_pool, eval_feature, pool_size, HaarFeature, HaarKind,
};
use svmcascade::{GrayImage, IntegralPair, Rect};

fn random_image(w: u32, h: u32, rng: &mut ChaCha8Rng) -> GrayImage {
    GrayImage::new(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap()
}

fn value(lut: &svmcascade::features::ScaledFeatureLUT, id: u32, ip: &IntegralPair, r: Rect) -> f64 {
    let std = ip.window_stats(r).unwrap().std_dev();
    eval_feature(lut, id, ip, r, std).unwrap()
}

/// Brute count of legal anchors, independent of the enumeration order.
fn brute_count(base: u32, kind: HaarKind) -> u64 {
    let mut n = 0;
    for y in 0..base {
        for x in 0..base {
            for h in 1..=base - y {
                for w in 1..=base - x {
                    if HaarFeature::new(kind, Rect::new(x, y, w, h)).is_some() {
                        n += 1;
                    }
                }
            }
        }
    }
    n
}

#[test]
fn pool_counts_match_brute_enumeration() {
    for base in [4u32, 8, 24] {
        let pool = enumerate_pool(base);
        let mut total = 0;
        for kind in HaarKind::ALL {
            let want = brute_count(base, kind);
            let got = pool.features.iter().filter(|f| f.kind == kind).count() as u64;
            assert_eq!(got, want, "base {base} {kind:?}");
            total += want;
        }
        assert_eq!(pool_size(base), total);
    }
    assert_eq!(pool_size(32), enumerate_pool(32).len() as u64);
}

/// `round_half_even(v * 5 / 4)` in integers.
fn five_quarters(v: u32) -> u32 {
    let (q, r) = (5 * v / 4, 5 * v % 4);
    match (2 * r).cmp(&4) {
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Equal => q + (q % 2),
    }
}

#[test]
fn scale_five_quarters_matches_rational_rounding() {
    let pool = enumerate_pool(8);
    let anchor = Rect::new(1, 1, 2, 1);
    let id = pool
        .features
        .iter()
        .position(|f| f.kind == HaarKind::TwoRectHorizontal && f.anchor == anchor)
        .unwrap() as u32;
    let lut = build_lut_subset(&pool, &[id], 1.25).unwrap();
    assert_eq!(lut.window, 10);
    let rects: Vec<Rect> = lut.entry(0).rects.iter().map(|r| r.rect).collect();
    // grey [1,2) x [1,2), white [2,3) x [1,2) at base scale
    let corner = |x0: u32, x1: u32| {
        let (sx0, sx1) = (five_quarters(x0), five_quarters(x1));
        let (sy0, sy1) = (five_quarters(1), five_quarters(2));
        Rect::new(sx0, sy0, sx1 - sx0, sy1 - sy0)
    };
    assert_eq!(rects, vec![corner(1, 2), corner(2, 3)]);
    // 5/4 -> 1, 10/4 -> 2 (tie to even), 15/4 -> 4
    assert_eq!(rects[0], Rect::new(1, 1, 1, 1));
    assert_eq!(rects[1], Rect::new(2, 1, 2, 1));

    // every feature of a small pool agrees with the integer oracle
    let lut = build_lut(&pool, 1.25).unwrap();
    for (i, f) in pool.features.iter().enumerate() {
        for (scaled, (base_rect, _)) in lut.entry(i).rects.iter().zip(f.sub_rects()) {
            let x0 = five_quarters(base_rect.x);
            let y0 = five_quarters(base_rect.y);
            let x1 = five_quarters(base_rect.x + base_rect.w);
            let y1 = five_quarters(base_rect.y + base_rect.h);
            assert_eq!(scaled.rect, Rect::new(x0, y0, x1 - x0, y1 - y0));
        }
    }
}

#[test]
fn upsampled_image_at_scale_two_gives_equal_values() {
    let pool = enumerate_pool(8);
    let base_lut = build_lut(&pool, 1.0).unwrap();
    let lut2 = build_lut(&pool, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let img = random_image(8, 8, &mut rng);
    let up = img.resize_nearest(16, 16).unwrap();
    let (ip, ip2) = (IntegralPair::build(&img), IntegralPair::build(&up));
    for id in 0..pool.len() as u32 {
        let a = value(&base_lut, id, &ip, Rect::new(0, 0, 8, 8));
        let b = value(&lut2, id, &ip2, Rect::new(0, 0, 16, 16));
        assert!((a - b).abs() <= 1e-6, "feature {id}: {a} vs {b}");
    }
}

#[test]
fn joint_integer_scaling_changes_values_little() {
    let pool = enumerate_pool(6);
    let base_lut = build_lut(&pool, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let img = random_image(6, 6, &mut rng);
        let ip = IntegralPair::build(&img);
        let k = rng.random_range(2..=3u32);
        let up = img.resize_nearest(6 * k, 6 * k).unwrap();
        let ipk = IntegralPair::build(&up);
        let lut = build_lut(&pool, k as f64).unwrap();
        for id in 0..pool.len() as u32 {
            let a = value(&base_lut, id, &ip, Rect::new(0, 0, 6, 6));
            let b = value(&lut, id, &ipk, Rect::new(0, 0, 6 * k, 6 * k));
            worst = worst.max((a - b).abs() / a.abs().max(1e-3));
        }
    }
    assert!(worst < 0.02, "worst relative change {worst}");
}

proptest! {
    #[test]
    fn constant_offset_leaves_features_unchanged(
        seed in any::<u64>(),
        offset in 0u8..=60,
        x in 0u32..8,
        y in 0u32..8,
    ) {
        let pool = enumerate_pool(8);
        let lut = build_lut(&pool, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = GrayImage::new(16, 16, (0..256).map(|_| rng.random_range(0..=195u8)).collect()).unwrap();
        let shifted = GrayImage::new(16, 16, img.data().iter().map(|&p| p + offset).collect()).unwrap();
        let (ip, ips) = (IntegralPair::build(&img), IntegralPair::build(&shifted));
        let r = Rect::new(x, y, 8, 8);
        for id in (0..pool.len() as u32).step_by(37) {
            let a = value(&lut, id, &ip, r);
            let b = value(&lut, id, &ips, r);
            prop_assert!((a - b).abs() <= 1e-9, "feature {}: {} vs {}", id, a, b);
        }
    }

    #[test]
    fn rect_sums_match_brute_force(seed in any::<u64>(), w in 1u32..40, h in 1u32..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_image(w, h, &mut rng);
        let ip = IntegralPair::build(&img);
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        let r = Rect::new(x, y, rng.random_range(1..=w - x), rng.random_range(1..=h - y));
        let mut s = 0u64;
        let mut q = 0u64;
        for py in r.y..r.bottom() {
            for px in r.x..r.right() {
                let v = img.get(px, py) as u64;
                s += v;
                q += v * v;
            }
        }
        prop_assert_eq!(ip.rect_sum(r).unwrap(), s);
        prop_assert_eq!(ip.rect_sqsum(r).unwrap(), q);
        let stats = ip.window_stats(r).unwrap();
        prop_assert!(stats.variance >= 0.0);
    }
}
