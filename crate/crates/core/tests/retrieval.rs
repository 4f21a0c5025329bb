use bcdi_core::grid::RealGrid;
use bcdi_core::retrieval::{
    point_reflect, reconstruct, register_and_compare, translate, Algorithm, Reconstruction, RetrievalConfig,
};
use bcdi_core::sim::{load_phantom, simulate_mono, Builtin, Phantom, PhantomSource};

fn digit(d: u8) -> Phantom {
    load_phantom(&PhantomSource::Builtin(Builtin::Digit { digit: d, size: 32 }), (64, 64)).unwrap()
}

fn run(p: &Phantom, algorithm: Algorithm, iterations: usize) -> Reconstruction {
    let cfg = RetrievalConfig {
        algorithm,
        iterations,
        restarts: 4,
        seed: 11,
        ..Default::default()
    };
    reconstruct(&simulate_mono(p), &cfg).unwrap()
}

/// Moves `g` into the reference frame found by registering `obj`.
fn align(g: &RealGrid, obj: &RealGrid, reference: &RealGrid) -> RealGrid {
    let reg = register_and_compare(obj, reference).unwrap();
    let g = if reg.twin { point_reflect(g) } else { g.clone() };
    translate(&g, (-reg.shift.0, -reg.shift.1))
}

fn check_end_to_end(algorithm: Algorithm, iterations: usize) {
    let p = digit(2);
    let rec = run(&p, algorithm, iterations);
    let err = rec.best_run().final_error;
    assert!(err < 0.1, "{algorithm:?}: E_F {err}");

    let truth = p.embedded();
    assert!(register_and_compare(&rec.object, truth).unwrap().score > 0.9);
    let support = align(&rec.support.to_grid(), &rec.object, truth);
    let true_support = p.support().unwrap().to_grid();
    let (mut inter, mut union) = (0usize, 0usize);
    for (a, b) in support.data().iter().zip(true_support.data()) {
        let (a, b) = (*a > 0.5, *b > 0.5);
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    let jaccard = inter as f64 / union as f64;
    assert!(jaccard >= 0.7, "{algorithm:?}: Jaccard {jaccard}");
}

#[test]
fn hio_recovers_digit() {
    check_end_to_end(Algorithm::Hio, 2000);
}

#[test]
fn raar_recovers_digit() {
    check_end_to_end(Algorithm::Raar, 1000);
}

#[test]
fn pipeline_is_deterministic() {
    let p = digit(4);
    let a = run(&p, Algorithm::Hio, 200);
    let b = run(&p, Algorithm::Hio, 200);
    assert_eq!(a.best, b.best);
    assert_eq!(a.runs, b.runs);
    for (x, y) in a.object.data().iter().zip(b.object.data()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn best_run_has_lowest_error() {
    let rec = run(&digit(7), Algorithm::Hio, 100);
    let best = rec.best_run().final_error;
    assert!(rec.runs.iter().all(|r| r.final_error >= best));
    let seeds: Vec<u64> = rec.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![11, 12, 13, 14]);
    assert!(rec.runs.iter().all(|r| r.trace.len() == 100));
}
