//! Round-trips between rotation representations and the geodesic metric,
//! checked against a quaternion-algebra oracle written here from scratch.

use std::f64::consts::{FRAC_PI_2, PI};

use spherical_core::rotations::{
    axis_angle_to_quat, euler_to_matrix, geodesic_distance, matrix_to_euler, matrix_to_quat, quat_to_axis_angle,
    quat_to_matrix, sample_uniform_so3, unit_quaternion_matrix, EulerAngles, Quaternion, GIMBAL_MARGIN,
};
use spherical_core::Rng;

const PAIRS: usize = 10_000;

/// Rotation angle between two unit quaternions: the angle of `q₁* q₂`,
/// computed as `2·atan2(‖vector part‖, |scalar part|)`.
fn quaternion_angle(q1: [f64; 4], q2: [f64; 4]) -> f64 {
    let [a1, b1, c1, d1] = q1;
    let [a2, b2, c2, d2] = q2;
    // (a1 − v1)(a2 + v2)
    let w = a1 * a2 + b1 * b2 + c1 * c2 + d1 * d2;
    let x = a1 * b2 - b1 * a2 - (c1 * d2 - d1 * c2);
    let y = a1 * c2 - c1 * a2 - (d1 * b2 - b1 * d2);
    let z = a1 * d2 - d1 * a2 - (b1 * c2 - c1 * b2);
    2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())
}

fn max_entry_diff(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

#[test]
fn geodesic_matches_quaternion_oracle() {
    let mut rng = Rng::new(21);
    let a = sample_uniform_so3(&mut rng, PAIRS);
    let b = sample_uniform_so3(&mut rng, PAIRS);
    for (p, q) in a.iter().zip(&b) {
        let d = geodesic_distance(&quat_to_matrix(p), &quat_to_matrix(q));
        let oracle = quaternion_angle(p.components(), q.components());
        assert!((d - oracle).abs() <= 1e-9, "{d} vs {oracle}");
    }
}

#[test]
fn geodesic_matches_oracle_for_small_and_half_turn_angles() {
    let mut rng = Rng::new(22);
    for q in sample_uniform_so3(&mut rng, 2000) {
        let axis = {
            let v = rng.normal_vec(3);
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        };
        for angle in [1e-7, 1e-4, PI - 1e-4, PI] {
            let (s, c) = (angle / 2.0).sin_cos();
            let delta = [c, s * axis[0], s * axis[1], s * axis[2]];
            let [a, b, cc, d] = q.components();
            // q·δ
            let r = Quaternion::from_unnormalized(
                a * delta[0] - b * delta[1] - cc * delta[2] - d * delta[3],
                a * delta[1] + b * delta[0] + cc * delta[3] - d * delta[2],
                a * delta[2] - b * delta[3] + cc * delta[0] + d * delta[1],
                a * delta[3] + b * delta[2] - cc * delta[1] + d * delta[0],
            )
            .unwrap();
            let dist = geodesic_distance(&quat_to_matrix(&q), &quat_to_matrix(&r));
            assert!((dist - angle).abs() <= 1e-9, "{angle}: {dist}");
        }
    }
}

#[test]
fn quaternion_matrix_round_trip() {
    let mut rng = Rng::new(23);
    for q in sample_uniform_so3(&mut rng, PAIRS) {
        let back = matrix_to_quat(&quat_to_matrix(&q));
        for (x, y) in q.components().iter().zip(back.components()) {
            assert!((x - y).abs() <= 1e-9, "{q:?} vs {back:?}");
        }
    }
}

#[test]
fn double_cover_is_exact() {
    let mut rng = Rng::new(24);
    for q in sample_uniform_so3(&mut rng, PAIRS) {
        let c = q.components();
        let neg = c.map(|v| -v);
        assert_eq!(unit_quaternion_matrix(c).unwrap(), unit_quaternion_matrix(neg).unwrap());
    }
}

#[test]
fn euler_matrix_round_trip_off_gimbal_lock() {
    let mut rng = Rng::new(25);
    let mut checked = 0;
    while checked < PAIRS {
        let e = EulerAngles::new(
            rng.uniform_in(-PI, PI),
            rng.uniform_in(-FRAC_PI_2, FRAC_PI_2),
            rng.uniform_in(-PI, PI),
        )
        .unwrap();
        if FRAC_PI_2 - e.elevation.abs() < 1e-3 {
            continue;
        }
        let r = euler_to_matrix(&e);
        let back = matrix_to_euler(&r).unwrap();
        assert!(max_entry_diff(r.rows(), euler_to_matrix(&back).rows()) <= 1e-9);
        for (x, y) in [(e.azimuth, back.azimuth), (e.elevation, back.elevation), (e.inplane, back.inplane)] {
            let d = (x - y).abs();
            assert!(d.min(2.0 * PI - d) <= 1e-9, "{e:?} vs {back:?}");
        }
        checked += 1;
    }
}

#[test]
fn gimbal_lock_is_reported() {
    let e = EulerAngles::new(0.3, FRAC_PI_2, -0.2).unwrap();
    assert!(matrix_to_euler(&euler_to_matrix(&e)).is_err());
    let e = EulerAngles::new(0.3, -FRAC_PI_2 + GIMBAL_MARGIN / 2.0, -0.2).unwrap();
    assert!(matrix_to_euler(&euler_to_matrix(&e)).is_err());
}

#[test]
fn axis_angle_round_trip() {
    let mut rng = Rng::new(26);
    for q in sample_uniform_so3(&mut rng, PAIRS) {
        let back = axis_angle_to_quat(&quat_to_axis_angle(&q));
        for (x, y) in q.components().iter().zip(back.components()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
}
