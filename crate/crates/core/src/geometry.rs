//! SE(2) pose algebra, frame transforms and pinhole projection.
//!
//! Conventions used across the whole crate:
//! - vehicle frame: x forward, y left, yaw counter-clockwise positive;
//! - angles are radians internally, normalized to `(-pi, pi]`;
//! - camera frame: z along the optical axis, x right, y down (pixels grow
//!   rightwards/downwards).

use thiserror::Error;

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Normalize an angle into `(-pi, pi]`. `wrap_angle(-PI)` returns `+PI`.
pub fn wrap_angle(psi: f64) -> f64 {
    let r = psi.rem_euclid(TAU);
    if r > std::f64::consts::PI {
        r - TAU
    } else {
        r
    }
}

/// 2D point/vector in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// 3D point/vector in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub fn identity() -> Self {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    /// Max-abs deviation of `R^T R` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let rtr = self.transpose().mul(self);
        let mut err = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((rtr.0[i][j] - target).abs());
            }
        }
        err
    }
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("camera focal lengths must be positive, got fx={fx} fy={fy}")]
    BadFocal { fx: f64, fy: f64 },
    #[error("camera rotation is not orthonormal (|R^T R - I| = {err:.3e})")]
    NotOrthonormal { err: f64 },
    #[error("image size must be positive, got {width}x{height}")]
    BadImageSize { width: usize, height: usize },
}

/// Global (navigation-frame) 3-DoF pose: position in meters, yaw in radians.
///
/// `psi` is kept normalized to `(-pi, pi]` by every constructor and
/// operation in this module.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Ego-frame pose correction: longitudinal (forward), lateral (left), yaw.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PoseDelta {
    pub d_lon: f64,
    pub d_lat: f64,
    pub d_psi: f64,
}

impl PoseDelta {
    pub fn new(d_lon: f64, d_lat: f64, d_psi: f64) -> Self {
        Self { d_lon, d_lat, d_psi }
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

/// Apply an ego-frame delta to a base pose.
///
/// The delta is expressed in the base pose's vehicle frame, so at zero
/// heading this reduces to componentwise addition.
pub fn compose_pose(base: Pose2D, delta: PoseDelta) -> Pose2D {
    let (s, c) = base.psi.sin_cos();
    Pose2D::new(
        base.x + delta.d_lon * c - delta.d_lat * s,
        base.y + delta.d_lon * s + delta.d_lat * c,
        base.psi + delta.d_psi,
    )
}

/// The delta that undoes `delta`: composing `delta` then the result (each in
/// the frame reached so far) returns to the starting pose.
pub fn inverse_delta(delta: PoseDelta) -> PoseDelta {
    let (s, c) = delta.d_psi.sin_cos();
    // Solve R(d_psi) * v = -[d_lon, d_lat] for the ego-frame vector v at the
    // perturbed pose: v = -R(-d_psi) * [d_lon, d_lat].
    PoseDelta::new(
        -(c * delta.d_lon + s * delta.d_lat),
        -(-s * delta.d_lon + c * delta.d_lat),
        -delta.d_psi,
    )
}

/// Express a global point in the vehicle frame of `pose`.
pub fn global_to_vehicle(p: Vec2, pose: Pose2D) -> Vec2 {
    let (s, c) = pose.psi.sin_cos();
    let dx = p.x - pose.x;
    let dy = p.y - pose.y;
    Vec2::new(c * dx + s * dy, -s * dx + c * dy)
}

/// Express a vehicle-frame point of `pose` in the global frame.
pub fn vehicle_to_global(p: Vec2, pose: Pose2D) -> Vec2 {
    let (s, c) = pose.psi.sin_cos();
    Vec2::new(pose.x + c * p.x - s * p.y, pose.y + s * p.x + c * p.y)
}

/// Signed 3-DoF pose error of `pred` w.r.t. `truth`, expressed in the truth
/// pose's ego frame (lon = forward, lat = left).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseError {
    pub e_lat: f64,
    pub e_lon: f64,
    pub e_psi: f64,
}

pub fn pose_error(pred: Pose2D, truth: Pose2D) -> PoseError {
    let rel = global_to_vehicle(pred.position(), truth);
    PoseError {
        e_lat: rel.y,
        e_lon: rel.x,
        e_psi: wrap_angle(pred.psi - truth.psi),
    }
}

/// Minimum depth (camera z, meters) for a point to count as in front of the
/// camera.
pub const MIN_VISIBLE_DEPTH: f64 = 0.1;

/// Pinhole camera with a rigid vehicle-to-camera extrinsic.
///
/// `rotation` rows are the camera axes expressed in vehicle coordinates;
/// `translation` maps a vehicle point `p` to camera coordinates as
/// `R * p + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        rotation: Mat3,
        translation: Vec3,
    ) -> Result<Self, GeometryError> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::BadFocal { fx, fy });
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::BadImageSize { width, height });
        }
        let err = rotation.orthonormality_error();
        if err >= 1e-9 {
            return Err(GeometryError::NotOrthonormal { err });
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        })
    }

    /// A camera placed at `center` (vehicle frame), optical axis horizontal
    /// at heading `yaw` relative to the vehicle's forward axis.
    pub fn level_camera(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        center: Vec3,
        yaw: f64,
    ) -> Result<Self, GeometryError> {
        let (s, c) = yaw.sin_cos();
        // Camera axes in vehicle coordinates: z along heading, y down,
        // x = y cross z (to the right of the optical axis).
        let rotation = Mat3([[s, -c, 0.0], [0.0, 0.0, -1.0], [c, s, 0.0]]);
        let translation = {
            let rc = rotation.mul_vec(center);
            Vec3::new(-rc.x, -rc.y, -rc.z)
        };
        Self::new(fx, fy, cx, cy, width, height, rotation, translation)
    }

    /// Camera center in vehicle coordinates.
    pub fn center(&self) -> Vec3 {
        let rt = self.rotation.transpose();
        let c = rt.mul_vec(self.translation);
        Vec3::new(-c.x, -c.y, -c.z)
    }

    /// Heading of the optical axis projected to the ground plane, in the
    /// vehicle frame.
    pub fn ground_yaw(&self) -> f64 {
        // Optical axis in vehicle coordinates is the third row of R
        // transposed onto the columns, i.e. R^T * e_z.
        let axis = self.rotation.transpose().mul_vec(Vec3::new(0.0, 0.0, 1.0));
        axis.y.atan2(axis.x)
    }

    pub fn vehicle_to_camera(&self, p: Vec3) -> Vec3 {
        let r = self.rotation.mul_vec(p);
        Vec3::new(
            r.x + self.translation.x,
            r.y + self.translation.y,
            r.z + self.translation.z,
        )
    }
}

/// Result of projecting one 3D vehicle-frame point into an image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
    /// Camera-frame depth (z). Negative or near-zero depth marks the point
    /// as behind the camera.
    pub depth: f64,
    pub visible: bool,
}

/// Project vehicle-frame points through the camera. Points behind the camera
/// (depth <= 0.1 m) or outside the image bounds are flagged, never dropped.
pub fn project_to_image(points_vehicle: &[Vec3], cam: &CameraModel) -> Vec<PixelPoint> {
    points_vehicle
        .iter()
        .map(|&p| project_point(p, cam))
        .collect()
}

pub fn project_point(p_vehicle: Vec3, cam: &CameraModel) -> PixelPoint {
    let pc = cam.vehicle_to_camera(p_vehicle);
    if pc.z <= MIN_VISIBLE_DEPTH {
        return PixelPoint {
            u: 0.0,
            v: 0.0,
            depth: pc.z,
            visible: false,
        };
    }
    let u = cam.fx * pc.x / pc.z + cam.cx;
    let v = cam.fy * pc.y / pc.z + cam.cy;
    let in_bounds = u >= 0.0 && u < cam.width as f64 && v >= 0.0 && v < cam.height as f64;
    PixelPoint {
        u,
        v,
        depth: pc.z,
        visible: in_bounds,
    }
}
