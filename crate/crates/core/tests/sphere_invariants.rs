//! Large-sample invariants of the spherical exponential map.

use spherical_core::activations::{sexp_forward, sexp_jacobian, sflat_forward, sflat_jacobian};
use spherical_core::{DenseVector, Rng};

const SAMPLES: usize = 100_000;

fn random_o(rng: &mut Rng) -> DenseVector {
    let n = 2 + rng.below(15);
    // Mix of ordinary and very large magnitudes to exercise the max-shift.
    let scale = if rng.uniform() < 0.1 { 500.0 } else { 3.0 };
    DenseVector::new(rng.normal_vec(n).into_iter().map(|v| scale * v).collect()).unwrap()
}

#[test]
fn sexp_outputs_are_strictly_positive_unit_vectors() {
    let mut rng = Rng::new(11);
    for _ in 0..SAMPLES {
        let o = random_o(&mut rng);
        let p = sexp_forward(&o);
        let norm2: f64 = p.iter().map(|v| v * v).sum();
        assert!((norm2.sqrt() - 1.0).abs() <= 1e-12, "{o:?}");
        // Strict positivity holds while the spread of O stays inside the
        // double-precision exponent range.
        let spread = o.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - o.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread < 700.0 {
            assert!(p.iter().all(|&v| v > 0.0), "{o:?}");
        }
    }
}

#[test]
fn sexp_jacobian_is_tangent() {
    let mut rng = Rng::new(12);
    for _ in 0..SAMPLES {
        let p = sexp_forward(&random_o(&mut rng));
        if p.iter().any(|&v| v <= 0.0) {
            continue;
        }
        let j = sexp_jacobian(&p).unwrap();
        for i in 0..p.len() {
            let col: f64 = (0..p.len()).map(|r| p[r] * j[(r, i)]).sum();
            assert!(col.abs() <= 1e-10);
        }
    }
}

#[test]
fn sflat_jacobian_is_tangent_up_to_scale() {
    let mut rng = Rng::new(13);
    for _ in 0..10_000 {
        let o = random_o(&mut rng);
        let p = sflat_forward(&o).unwrap();
        let j = sflat_jacobian(&o).unwrap();
        let scale = o.norm();
        for i in 0..p.len() {
            let col: f64 = (0..p.len()).map(|r| p[r] * j[(r, i)]).sum();
            assert!((col * scale).abs() <= 1e-10);
        }
    }
}

#[test]
fn sexp_shift_invariance_is_bitwise() {
    // Dyadic inputs and integer shifts keep `O + c` exactly representable,
    // so the internal max-shift sees identical differences.
    let mut rng = Rng::new(14);
    for _ in 0..SAMPLES {
        let n = 2 + rng.below(15);
        let o: Vec<f64> = (0..n).map(|_| (rng.below(1 << 16) as f64 - 32768.0) / 1024.0).collect();
        let c = rng.below(1 << 20) as f64 - 524288.0;
        let shifted: Vec<f64> = o.iter().map(|v| v + c).collect();
        let a = sexp_forward(&DenseVector::new(o).unwrap());
        let b = sexp_forward(&DenseVector::new(shifted).unwrap());
        assert_eq!(a, b);
    }
}
