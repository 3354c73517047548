//! Exponential-map rotations: Rodrigues evaluation and the closed-form
//! derivative of the rotation matrix with respect to the map coefficients.

use crate::{Mat3, Vec3};

/// Cross-product matrix [v]x.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix for the exponential-map vector `v` (angle |v| about v/|v|).
pub fn rotation_from_expmap(v: &Vec3) -> Mat3 {
    let theta = v.norm();
    let k = skew(v);
    let (a, b) = if theta < 1e-8 {
        (1.0, 0.5)
    } else {
        let half = 0.5 * theta;
        // 2 sin^2(t/2) / t^2 avoids the cancellation in (1 - cos t) / t^2
        (theta.sin() / theta, 2.0 * half.sin() * half.sin() / (theta * theta))
    };
    Mat3::identity() + k * a + k * k * b
}

/// Partial derivative of `rotation_from_expmap(v)` with respect to `v[axis]`.
///
/// Closed form of Gallego & Yezzi: dR/dv_i = (v_i [v]x + [v x (I - R) e_i]x) R / |v|^2,
/// with the first-order expansion [e_i]x + ([e_i]x [v]x + [v]x [e_i]x) / 2
/// below |v| = 1e-4 where the quotient becomes ill-conditioned.
pub fn rotation_expmap_derivative(v: &Vec3, axis: usize) -> Mat3 {
    assert!(axis < 3, "axis index out of range");
    let mut e = Vec3::zeros();
    e[axis] = 1.0;
    let theta2 = v.norm_squared();
    if theta2.sqrt() < 1e-4 {
        let ge = skew(&e);
        let kv = skew(v);
        return ge + (ge * kv + kv * ge) * 0.5;
    }
    let r = rotation_from_expmap(v);
    let w = v.cross(&((Mat3::identity() - r) * e));
    (skew(v) * v[axis] + skew(&w)) * r / theta2
}
