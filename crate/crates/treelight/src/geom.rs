//! Small 3D vector and rotation helpers shared across the crate.
//!
//! Coordinates are east-north-up (ENU): x east, y north, z up. Azimuths are
//! degrees clockwise from true north, elevations degrees above the horizon.

/// A 3D vector in the ENU frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        Vec3::new(self.x / n, self.y / n, self.z / n)
    }

    pub fn scaled(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn add(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn sub(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    /// Unit vector for a sky direction given in degrees.
    pub fn from_az_el(azimuth_deg: f64, elevation_deg: f64) -> Vec3 {
        let az = azimuth_deg.to_radians();
        let el = elevation_deg.to_radians();
        Vec3::new(az.sin() * el.cos(), az.cos() * el.cos(), el.sin())
    }

    /// Azimuth in degrees clockwise from north, normalised to [0, 360).
    pub fn azimuth_deg(self) -> f64 {
        let az = self.x.atan2(self.y).to_degrees();
        az.rem_euclid(360.0)
    }

    /// Elevation above the horizon in degrees.
    pub fn elevation_deg(self) -> f64 {
        self.z.clamp(-1.0, 1.0).asin().to_degrees()
    }

    /// Great-arc angle to another unit vector, in degrees.
    pub fn angle_deg(self, other: Vec3) -> f64 {
        self.dot(other).clamp(-1.0, 1.0).acos().to_degrees()
    }
}

/// A 3x3 rotation matrix, rows stored as vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    rows: [Vec3; 3],
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            rows: [
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
        }
    }

    /// Rotation about the z axis by `degrees` (counter-clockwise looking down
    /// the +z axis, i.e. mathematical convention in the xy plane).
    pub fn about_z(degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Rotation {
            rows: [
                Vec3::new(c, -s, 0.0),
                Vec3::new(s, c, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
        }
    }

    /// The rotation taking unit vector `from` onto unit vector `to`
    /// (Rodrigues construction). Deterministic for all inputs, including the
    /// antiparallel case.
    pub fn aligning(from: Vec3, to: Vec3) -> Self {
        let c = from.dot(to).clamp(-1.0, 1.0);
        if c > 1.0 - 1e-14 {
            return Rotation::identity();
        }
        if c < -1.0 + 1e-14 {
            // 180-degree turn about an axis perpendicular to `from`.
            let pick = if from.x.abs() < 0.9 {
                Vec3::new(1.0, 0.0, 0.0)
            } else {
                Vec3::new(0.0, 1.0, 0.0)
            };
            let axis = from.cross(pick).normalized();
            let (ax, ay, az) = (axis.x, axis.y, axis.z);
            // R = 2*a*a^T - I for a half-turn about unit axis a
            return Rotation {
                rows: [
                    Vec3::new(2.0 * ax * ax - 1.0, 2.0 * ax * ay, 2.0 * ax * az),
                    Vec3::new(2.0 * ay * ax, 2.0 * ay * ay - 1.0, 2.0 * ay * az),
                    Vec3::new(2.0 * az * ax, 2.0 * az * ay, 2.0 * az * az - 1.0),
                ],
            };
        }
        let v = from.cross(to);
        let k = 1.0 / (1.0 + c);
        // R = I + [v]x + [v]x^2 / (1 + c)
        Rotation {
            rows: [
                Vec3::new(
                    1.0 + (-v.z * v.z - v.y * v.y) * k,
                    -v.z + v.x * v.y * k,
                    v.y + v.x * v.z * k,
                ),
                Vec3::new(
                    v.z + v.x * v.y * k,
                    1.0 + (-v.z * v.z - v.x * v.x) * k,
                    -v.x + v.y * v.z * k,
                ),
                Vec3::new(
                    -v.y + v.x * v.z * k,
                    v.x + v.y * v.z * k,
                    1.0 + (-v.y * v.y - v.x * v.x) * k,
                ),
            ],
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        Vec3::new(self.rows[0].dot(p), self.rows[1].dot(p), self.rows[2].dot(p))
    }

    /// The inverse rotation (transpose).
    pub fn inverse(&self) -> Rotation {
        let r = &self.rows;
        Rotation {
            rows: [
                Vec3::new(r[0].x, r[1].x, r[2].x),
                Vec3::new(r[0].y, r[1].y, r[2].y),
                Vec3::new(r[0].z, r[1].z, r[2].z),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn az_el_round_trip() {
        let d = Vec3::from_az_el(123.0, 45.0);
        assert_relative_eq!(d.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.azimuth_deg(), 123.0, epsilon = 1e-9);
        assert_relative_eq!(d.elevation_deg(), 45.0, epsilon = 1e-9);
    }

    #[test]
    fn cardinal_directions() {
        let north = Vec3::from_az_el(0.0, 0.0);
        assert_relative_eq!(north.y, 1.0, epsilon = 1e-12);
        let east = Vec3::from_az_el(90.0, 0.0);
        assert_relative_eq!(east.x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn aligning_maps_from_to_to() {
        let cases = [
            (Vec3::from_az_el(10.0, 40.0), Vec3::new(0.0, 0.0, -1.0)),
            (Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 0.0, -1.0)),
            (Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0)),
            (Vec3::from_az_el(200.0, 5.0), Vec3::from_az_el(20.0, 80.0)),
        ];
        for (from, to) in cases {
            let r = Rotation::aligning(from, to);
            let mapped = r.apply(from);
            assert_relative_eq!(mapped.x, to.x, epsilon = 1e-12);
            assert_relative_eq!(mapped.y, to.y, epsilon = 1e-12);
            assert_relative_eq!(mapped.z, to.z, epsilon = 1e-12);
            // orthonormality: R * R^T = I
            let back = r.inverse().apply(mapped);
            assert_relative_eq!(back.x, from.x, epsilon = 1e-12);
            assert_relative_eq!(back.y, from.y, epsilon = 1e-12);
            assert_relative_eq!(back.z, from.z, epsilon = 1e-12);
        }
    }

    #[test]
    fn about_z_quarter_turn() {
        let r = Rotation::about_z(90.0);
        let p = r.apply(Vec3::new(1.0, 0.0, 0.5));
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.z, 0.5, epsilon = 1e-12);
    }
}
