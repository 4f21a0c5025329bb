use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bcdi_core::grid::{centered_fft, centered_ifft, crop_center, pad_center, ComplexGrid, RealGrid};

fn random_complex(w: usize, h: usize, seed: u64) -> ComplexGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexGrid::from_fn(w, h, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap()
}

fn random_real(w: usize, h: usize, seed: u64) -> RealGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealGrid::from_fn(w, h, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

fn rel_diff(a: &ComplexGrid, b: &ComplexGrid) -> f64 {
    let num: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()).sum();
    (num / b.norm_sqr()).sqrt()
}

#[test]
fn large_shapes_round_trip() {
    for &(w, h) in &[(512, 512), (4, 512), (510, 6), (300, 300)] {
        let g = random_complex(w, h, (w * h) as u64);
        assert!(rel_diff(&centered_ifft(&centered_fft(&g)), &g) <= 1e-12, "{w}x{h}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip(w in 4usize..=96, h in 4usize..=96, seed in any::<u64>()) {
        let g = random_complex(w, h, seed);
        prop_assert!(rel_diff(&centered_ifft(&centered_fft(&g)), &g) <= 1e-12);
    }

    #[test]
    fn parseval(w in 4usize..=96, h in 4usize..=96, seed in any::<u64>()) {
        let g = random_complex(w, h, seed);
        let lhs = centered_fft(&g).norm_sqr();
        let rhs = (w * h) as f64 * g.norm_sqr();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
    }

    #[test]
    fn pad_crop_are_transposes(
        w in 2usize..=24, h in 2usize..=24, px in 0usize..8, py in 0usize..8, seed in any::<u64>()
    ) {
        let small = random_real(w, h, seed);
        let big = random_real(w + 2 * px, h + 2 * py, seed ^ 1);
        let lhs = crop_center(&big, (w, h)).unwrap().dot(&small).unwrap();
        let rhs = big.dot(&pad_center(&small, big.shape()).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        prop_assert_eq!(crop_center(&pad_center(&small, big.shape()).unwrap(), (w, h)).unwrap(), small);
    }

    #[test]
    fn hermitian_input_transforms_to_real(half in 2usize..=24, seed in any::<u64>()) {
        // Symmetrize about DC: g(p) = conj g(-p) for every pixel with a mirror.
        let n = 2 * half;
        let raw = random_complex(n, n, seed);
        let g = ComplexGrid::from_fn(n, n, |x, y| {
            let (mx, my) = ((n - x) % n, (n - y) % n);
            (raw.get(x, y) + raw.get(mx, my).conj()) * 0.5
        })
        .unwrap();
        let f = centered_fft(&g);
        let max_re = f.re().data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_im = f.im().data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max_im <= 1e-10 * max_re);
    }

    #[test]
    fn odd_pad_differences_are_rejected(w in 2usize..=16, extra in 0usize..6) {
        let g = random_real(w, w, 0);
        let target = (w + 2 * extra + 1, w);
        prop_assert!(pad_center(&g, target).is_err());
        let big = random_real(w + 2 * extra + 1, w, 1);
        prop_assert!(crop_center(&big, (w, w)).is_err());
    }

    #[test]
    fn real_grids_stay_finite(w in 4usize..=32, seed in any::<u64>()) {
        let g = random_real(w, w, seed);
        let f = centered_fft(&g.to_complex());
        prop_assert!(f.re().is_finite() && f.im().is_finite());
        prop_assert!(pad_center(&g, (w + 4, w + 6)).unwrap().is_finite());
    }
}
