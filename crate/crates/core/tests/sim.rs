use proptest::prelude::*;

use bcdi_core::grid::{centered_ifft, RealGrid};

use bcdi_core::sim::{
    add_noise, blobs, digit_glyph, friedel_asymmetry, load_phantom, radial_energy_fraction, simulate_mono,
    simulate_poly_independent, Builtin, NoiseModel, Phantom, PhantomSource, Provenance,
};
use bcdi_core::spectrum::{apply_poly, harmonics_spectrum, Spectrum};

fn rel(a: &RealGrid, b: &RealGrid) -> f64 {
    a.sub(b).unwrap().norm() / b.norm()
}

#[test]
fn routes_agree_on_the_eight_pixel_example() {
    let p = load_phantom(&PhantomSource::Builtin(Builtin::Digit { digit: 1, size: 4 }), (8, 8)).unwrap();
    let s = Spectrum::from_table(&[1.0, 2.0], &[0.5, 0.5]).unwrap().bind((8, 8)).unwrap();
    let b = simulate_poly_independent(&p, &s).unwrap();
    assert!(rel(&b, &apply_poly(&simulate_mono(&p), &s).unwrap()) <= 1e-10);
}

#[test]
fn routes_agree_for_the_harmonic_spectrum() {
    let p = load_phantom(&PhantomSource::Builtin(Builtin::Digit { digit: 2, size: 64 }), (128, 128)).unwrap();
    let s = harmonics_spectrum(&[3, 5, 7, 9, 11], &[0.2, 0.4, 0.4, 0.3, 0.2])
        .unwrap()
        .bind((128, 128))
        .unwrap();
    let b = simulate_poly_independent(&p, &s).unwrap();
    assert!(rel(&b, &apply_poly(&simulate_mono(&p), &s).unwrap()) <= 1e-10);
}

#[test]
fn undersampled_object_breaks_route_equivalence() {
    let obj = digit_glyph(6, 44).unwrap();
    let p = Phantom::new_unchecked(obj.clone(), (64, 64), Provenance::Digit { digit: 6, size: 44 }).unwrap();
    assert!(Phantom::new(obj, (64, 64), Provenance::Digit { digit: 6, size: 44 }).is_err());
    let s = Spectrum::from_table(&[1.0, 2.0], &[0.5, 0.5]).unwrap().bind((64, 64)).unwrap();
    let b = simulate_poly_independent(&p, &s).unwrap();
    let err = rel(&b, &apply_poly(&simulate_mono(&p), &s).unwrap());
    assert!(err > 1e-3, "{err}");
}

#[test]
fn harmonics_blur_the_pattern_radially() {
    let p = load_phantom(&PhantomSource::Builtin(Builtin::Digit { digit: 5, size: 64 }), (128, 128)).unwrap();
    let s = harmonics_spectrum(&[3, 5, 7, 9, 11], &[0.2, 0.4, 0.4, 0.3, 0.2])
        .unwrap()
        .bind((128, 128))
        .unwrap();
    let mono = simulate_mono(&p);
    let poly = simulate_poly_independent(&p, &s).unwrap();
    // Longer wavelengths stretch the pattern outward...
    let (m, b) = (radial_energy_fraction(&mono, 16.0), radial_energy_fraction(&poly, 16.0));
    eprintln!("pattern energy beyond radius 16: mono {m:.3e}, broadband {b:.3e}");
    assert!(b > m);
    // ...and smear its fine speckle, which lives far from the origin of the
    // autocorrelation.
    let detail = |g: &RealGrid| radial_energy_fraction(&centered_ifft(&g.to_complex()).abs(), 32.0);
    let (m, b) = (detail(&mono), detail(&poly));
    eprintln!("autocorrelation energy beyond radius 32: mono {m:.3e}, broadband {b:.3e}");
    assert!(b < 0.5 * m);
}

#[test]
fn noise_limits() {
    let p = load_phantom(&PhantomSource::Builtin(Builtin::Disk { radius: 10 }), (64, 64)).unwrap();
    let b = simulate_mono(&p);
    let loud = add_noise(&b, NoiseModel::Poisson { photons: 1e12 }, 3).unwrap();
    assert!(rel(&loud, &b) <= 1e-3);
    assert!(loud.min() >= 0.0);
    assert_eq!(add_noise(&b, NoiseModel::Gaussian { sigma: 0.0 }, 3).unwrap(), b);
    let quiet = NoiseModel::Poisson { photons: 1e5 };
    assert_eq!(add_noise(&b, quiet, 9).unwrap(), add_noise(&b, quiet, 9).unwrap());
    assert_ne!(add_noise(&b, quiet, 9).unwrap(), add_noise(&b, quiet, 10).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn route_equivalence(
        seed in any::<u64>(),
        count in 1usize..6,
        ratios in prop::collection::vec(1.0f64..3.0, 1..4),
    ) {
        let obj = blobs(count, 16, seed).unwrap();
        let p = Phantom::new(obj, (32, 32), Provenance::Blobs { count, size: 16, seed }).unwrap();
        let weights: Vec<f64> = (0..ratios.len()).map(|i| 1.0 / (i + 1) as f64).collect();
        let s = Spectrum::from_table(&ratios, &weights).unwrap().bind((32, 32)).unwrap();
        let b = simulate_poly_independent(&p, &s).unwrap();
        prop_assert!(rel(&b, &apply_poly(&simulate_mono(&p), &s).unwrap()) <= 1e-10);
        prop_assert!(b.min() >= -1e-10 * b.max());
        prop_assert!(friedel_asymmetry(&b) <= 1e-10);
    }
}
