//! Rotation math: 6d parameterization, quaternions, SLERP, yaw extraction.
//!
//! Conventions: the vertical axis is +Z, the character's neutral facing
//! direction is +X, and yaw is the angle of the rotated forward axis in the
//! ground (XY) plane. `Rz(theta)` therefore has yaw exactly `theta`.

use crate::error::CoreError;

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [f64; 9]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn rot_z(theta: f64) -> Mat3 {
        let (s, c) = theta.sin_cos();
        Mat3([c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
    }

    pub fn rot_x(theta: f64) -> Mat3 {
        let (s, c) = theta.sin_cos();
        Mat3([1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c])
    }

    pub fn rot_y(theta: f64) -> Mat3 {
        let (s, c) = theta.sin_cos();
        Mat3([c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c])
    }

    pub fn mul(&self, rhs: &Mat3) -> Mat3 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                out[i * 3 + j] = a[i * 3] * b[j] + a[i * 3 + 1] * b[3 + j] + a[i * 3 + 2] * b[6 + j];
            }
        }
        Mat3(out)
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let a = &self.0;
        [
            a[0] * v[0] + a[1] * v[1] + a[2] * v[2],
            a[3] * v[0] + a[4] * v[1] + a[5] * v[2],
            a[6] * v[0] + a[7] * v[1] + a[8] * v[2],
        ]
    }

    pub fn col(&self, j: usize) -> [f64; 3] {
        [self.0[j], self.0[3 + j], self.0[6 + j]]
    }

    pub fn transpose(&self) -> Mat3 {
        let a = &self.0;
        Mat3([a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]])
    }

    /// First two columns, flattened: the 6d encoding of this rotation.
    pub fn to_sixd(&self) -> [f64; 6] {
        let c0 = self.col(0);
        let c1 = self.col(1);
        [c0[0], c0[1], c0[2], c1[0], c1[1], c1[2]]
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Gram-Schmidt completion of the 6d rotation encoding into a proper
/// rotation matrix. The first column is `normalize(v[0..3])`.
pub fn sixd_to_matrix(v: &[f64; 6]) -> Result<Mat3, CoreError> {
    let a = [v[0], v[1], v[2]];
    let b = [v[3], v[4], v[5]];
    let na = norm3(a);
    if na <= 1e-8 {
        return Err(CoreError::DegenerateRotation(format!(
            "first 3-vector norm {na:.3e}"
        )));
    }
    let c0 = [a[0] / na, a[1] / na, a[2] / na];
    let d = dot3(c0, b);
    let u = [b[0] - d * c0[0], b[1] - d * c0[1], b[2] - d * c0[2]];
    let nu = norm3(u);
    if nu <= 1e-8 {
        return Err(CoreError::DegenerateRotation(format!(
            "residual norm {nu:.3e} after projection"
        )));
    }
    let c1 = [u[0] / nu, u[1] / nu, u[2] / nu];
    let c2 = cross(c0, c1);
    Ok(Mat3([
        c0[0], c1[0], c2[0], c0[1], c1[1], c2[1], c0[2], c1[2], c2[2],
    ]))
}

/// Yaw of a rotation: the heading of the rotated forward (+X) axis in the
/// ground plane. Errors when the forward axis is within 1e-6 of vertical.
pub fn yaw_of(rotation: &Mat3) -> Result<f64, CoreError> {
    let f = rotation.col(0);
    let horiz = (f[0] * f[0] + f[1] * f[1]).sqrt();
    if horiz < 1e-6 {
        return Err(CoreError::GimbalDegenerate);
    }
    Ok(f[1].atan2(f[0]))
}

/// Unit quaternion with canonical sign: w >= 0, ties broken by the first
/// nonzero vector component positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes and canonicalizes sign.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<UnitQuaternion, CoreError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n <= 1e-12 {
            return Err(CoreError::DegenerateRotation("zero quaternion".into()));
        }
        Ok(UnitQuaternion { w: w / n, x: x / n, y: y / n, z: z / n }.canonicalized())
    }

    fn raw(w: f64, x: f64, y: f64, z: f64) -> UnitQuaternion {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        UnitQuaternion { w: w / n, x: x / n, y: y / n, z: z / n }
    }

    pub fn canonicalized(self) -> UnitQuaternion {
        let comps = [self.w, self.x, self.y, self.z];
        let lead = comps.iter().copied().find(|c| *c != 0.0).unwrap_or(0.0);
        if lead < 0.0 {
            UnitQuaternion { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            self
        }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, o: &UnitQuaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<UnitQuaternion, CoreError> {
        let n = norm3(axis);
        if n <= 1e-12 {
            return Err(CoreError::DegenerateRotation("zero axis".into()));
        }
        let h = angle * 0.5;
        let s = h.sin() / n;
        UnitQuaternion::new(h.cos(), axis[0] * s, axis[1] * s, axis[2] * s)
    }

    pub fn from_matrix(m: &Mat3) -> Result<UnitQuaternion, CoreError> {
        // Shepperd's method.
        let a = &m.0;
        let trace = a[0] + a[4] + a[8];
        let (w, x, y, z);
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (a[7] - a[5]) / s;
            y = (a[2] - a[6]) / s;
            z = (a[3] - a[1]) / s;
        } else if a[0] > a[4] && a[0] > a[8] {
            let s = (1.0 + a[0] - a[4] - a[8]).sqrt() * 2.0;
            w = (a[7] - a[5]) / s;
            x = 0.25 * s;
            y = (a[1] + a[3]) / s;
            z = (a[2] + a[6]) / s;
        } else if a[4] > a[8] {
            let s = (1.0 + a[4] - a[0] - a[8]).sqrt() * 2.0;
            w = (a[2] - a[6]) / s;
            x = (a[1] + a[3]) / s;
            y = 0.25 * s;
            z = (a[5] + a[7]) / s;
        } else {
            let s = (1.0 + a[8] - a[0] - a[4]).sqrt() * 2.0;
            w = (a[3] - a[1]) / s;
            x = (a[2] + a[6]) / s;
            y = (a[5] + a[7]) / s;
            z = 0.25 * s;
        }
        UnitQuaternion::new(w, x, y, z)
    }

    pub fn to_matrix(&self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3([
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ])
    }

    /// Geodesic angle to another rotation, in [0, pi].
    pub fn angle_to(&self, o: &UnitQuaternion) -> f64 {
        2.0 * self.dot(o).abs().min(1.0).acos()
    }
}

/// Spherical linear interpolation along the shortest arc. Falls back to
/// normalized linear interpolation when the endpoints are nearly parallel.
/// The result is unit-norm but deliberately not sign-canonicalized, so the
/// path is continuous in `t`.
pub fn slerp(q0: &UnitQuaternion, q1: &UnitQuaternion, t: f64) -> UnitQuaternion {
    let mut d = q0.dot(q1);
    let (mut w1, mut x1, mut y1, mut z1) = (q1.w, q1.x, q1.y, q1.z);
    if d < 0.0 {
        d = -d;
        w1 = -w1;
        x1 = -x1;
        y1 = -y1;
        z1 = -z1;
    }
    if d > 1.0 - 1e-6 {
        return UnitQuaternion::raw(
            q0.w + t * (w1 - q0.w),
            q0.x + t * (x1 - q0.x),
            q0.y + t * (y1 - q0.y),
            q0.z + t * (z1 - q0.z),
        );
    }
    let theta = d.acos();
    let sin_theta = theta.sin();
    let a = ((1.0 - t) * theta).sin() / sin_theta;
    let b = (t * theta).sin() / sin_theta;
    UnitQuaternion::raw(
        a * q0.w + b * w1,
        a * q0.x + b * x1,
        a * q0.y + b * y1,
        a * q0.z + b * z1,
    )
}

/// SLERP on two 6d rotation blocks.
pub fn slerp_sixd(a: &[f64; 6], b: &[f64; 6], t: f64) -> Result<[f64; 6], CoreError> {
    let qa = UnitQuaternion::from_matrix(&sixd_to_matrix(a)?)?;
    let qb = UnitQuaternion::from_matrix(&sixd_to_matrix(b)?)?;
    Ok(slerp(&qa, &qb, t).to_matrix().to_sixd())
}
