//! Deterministic synthetic scenes and weather for self-consistency testing.
//!
//! Field data equivalent to the original measurement campaigns is not
//! shipped with the crate; tuning and ablation are exercised instead on
//! scenes generated here, with "measured" readings produced by the engine
//! itself at known ground-truth parameters.

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};

use crate::cloud::{Label, LabeledCloud, LabeledPoint};
use crate::geom::Vec3;
use crate::weather::{GeoLocation, WeatherSample, WeatherSeries};

/// Points on a cubic lattice filling a ball. `pitch` should be at most half
/// the voxel size the scene will be traced with, so silhouette voxels stay
/// occupied.
pub fn ball(center: Vec3, radius: f64, pitch: f64, label: Label) -> Vec<LabeledPoint> {
    let mut points = Vec::new();
    let steps = (radius / pitch).ceil() as i64;
    let r2 = radius * radius;
    for ix in -steps..=steps {
        for iy in -steps..=steps {
            for iz in -steps..=steps {
                let p = Vec3::new(ix as f64 * pitch, iy as f64 * pitch, iz as f64 * pitch);
                if p.dot(p) <= r2 {
                    points.push(LabeledPoint { position: center.add(p), label });
                }
            }
        }
    }
    points
}

/// An opaque (branch-labelled) ball hovering above the ground plane.
pub fn opaque_ball_cloud(center: Vec3, radius: f64, pitch: f64, ground_z: f64) -> LabeledCloud {
    LabeledCloud::new(ball(center, radius, pitch, Label::Branch))
        .expect("ball generates points")
        .with_ground_z(ground_z)
}

/// A foliage ball (transmissive canopy blob).
pub fn foliage_ball_cloud(center: Vec3, radius: f64, pitch: f64, ground_z: f64) -> LabeledCloud {
    LabeledCloud::new(ball(center, radius, pitch, Label::Foliage))
        .expect("ball generates points")
        .with_ground_z(ground_z)
}

/// Points on a cubic lattice filling an axis-aligned box.
pub fn slab(min: Vec3, max: Vec3, pitch: f64, label: Label) -> Vec<LabeledPoint> {
    let mut points = Vec::new();
    let nx = ((max.x - min.x) / pitch).floor() as i64;
    let ny = ((max.y - min.y) / pitch).floor() as i64;
    let nz = ((max.z - min.z) / pitch).floor() as i64;
    for ix in 0..=nx {
        for iy in 0..=ny {
            for iz in 0..=nz {
                points.push(LabeledPoint {
                    position: Vec3::new(
                        min.x + ix as f64 * pitch,
                        min.y + iy as f64 * pitch,
                        min.z + iz as f64 * pitch,
                    ),
                    label,
                });
            }
        }
    }
    points
}

/// An asymmetric L-shaped canopy: two foliage slabs of different thickness
/// joined at a corner, plus a branch-labelled trunk column. Its shadow
/// pattern changes under rotation, which the ablation experiments rely on.
pub fn lshape_canopy(ground_z: f64) -> LabeledCloud {
    let pitch = 0.045;
    let mut points = Vec::new();
    // Arm along +x: long, thin canopy.
    points.extend(slab(
        Vec3::new(-0.4, -0.4, 2.0),
        Vec3::new(2.2, 0.6, 2.6),
        pitch,
        Label::Foliage,
    ));
    // Arm along +y: shorter but thicker, so column depths differ by azimuth.
    points.extend(slab(
        Vec3::new(-0.4, 0.6, 1.7),
        Vec3::new(0.8, 2.0, 2.9),
        pitch,
        Label::Foliage,
    ));
    // Trunk.
    points.extend(slab(
        Vec3::new(-0.1, -0.1, ground_z),
        Vec3::new(0.1, 0.1, 2.0),
        pitch,
        Label::Branch,
    ));
    LabeledCloud::new(points).expect("canopy generates points").with_ground_z(ground_z)
}

/// A canopy slab perforated with a deterministic high-frequency gap pattern,
/// producing dappled shade.
pub fn dappled_canopy(ground_z: f64) -> LabeledCloud {
    let pitch = 0.05;
    let mut points = Vec::new();
    for p in slab(
        Vec3::new(-2.0, -2.0, 2.2),
        Vec3::new(2.0, 2.0, 2.8),
        pitch,
        Label::Foliage,
    ) {
        // Integer-hash speckle: keeps ~60% of lattice sites in clumps a few
        // centimetres across.
        let ix = (p.position.x / pitch).round() as i64;
        let iy = (p.position.y / pitch).round() as i64;
        let iz = (p.position.z / pitch).round() as i64;
        let h = (ix.wrapping_mul(73856093)
            ^ iy.wrapping_mul(19349663)
            ^ iz.wrapping_mul(83492791))
        .rem_euclid(10);
        if h < 6 {
            points.push(p);
        }
    }
    LabeledCloud::new(points).expect("canopy generates points").with_ground_z(ground_z)
}

/// Orchard location used by the synthetic datasets (Bundaberg, UTC+10).
pub fn orchard_location() -> GeoLocation {
    GeoLocation::new(-24.85, 152.35, 10.0).expect("valid location")
}

/// A smooth bell-shaped clear day of 30-minute samples on the local date.
pub fn clear_day_series(location: GeoLocation, date: NaiveDate, peak_wm2: f64) -> WeatherSeries {
    let offset = Duration::seconds((location.timezone_offset * 3600.0).round() as i64);
    let midnight_utc = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).unwrap()) - offset;
    let samples = (0..48)
        .map(|i| {
            let hour = i as f64 / 2.0;
            let x = (hour - 12.0) / 6.5;
            let irr = if x.abs() < 1.0 { peak_wm2 * (1.0 - x * x) } else { 0.0 };
            WeatherSample { timestamp: midnight_utc + Duration::minutes(30 * i), global_irradiance: irr }
        })
        .collect();
    WeatherSeries::new(location, samples).expect("ordered samples")
}

/// Clear days covering several dates (for date-shift ablations).
pub fn clear_days_series(location: GeoLocation, dates: &[NaiveDate], peak_wm2: f64) -> WeatherSeries {
    let mut samples = Vec::new();
    for &date in dates {
        samples.extend(clear_day_series(location, date, peak_wm2).samples().to_vec());
    }
    samples.sort_by_key(|s| s.timestamp);
    WeatherSeries::new(location, samples).expect("ordered samples")
}

/// The session instant used by synthetic datasets: mid-morning local time,
/// chosen so the sun sits between low-resolution sky nodes.
pub fn session_time(date: NaiveDate, location: &GeoLocation) -> DateTime<Utc> {
    let offset = Duration::seconds((location.timezone_offset * 3600.0).round() as i64);
    Utc.from_utc_datetime(&date.and_hms_opt(10, 0, 0).unwrap()) - offset
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_fills_expected_volume() {
        let pts = ball(Vec3::new(0.0, 0.0, 2.0), 0.5, 0.05, Label::Branch);
        // Lattice-count estimate of the ball volume.
        let vol = pts.len() as f64 * 0.05f64.powi(3);
        let expected = 4.0 / 3.0 * std::f64::consts::PI * 0.5f64.powi(3);
        assert!((vol - expected).abs() / expected < 0.05, "vol {vol} vs {expected}");
    }

    #[test]
    fn lshape_is_asymmetric_under_quarter_turn() {
        // The horizontal mass distribution must change under a quarter turn,
        // otherwise rotation ablations would be no-ops.
        let moments = |c: &LabeledCloud| {
            let n = c.len() as f64;
            let mx = c.points().iter().map(|p| p.position.x).sum::<f64>() / n;
            let my = c.points().iter().map(|p| p.position.y).sum::<f64>() / n;
            let sxx = c.points().iter().map(|p| (p.position.x - mx).powi(2)).sum::<f64>() / n;
            let syy = c.points().iter().map(|p| (p.position.y - my).powi(2)).sum::<f64>() / n;
            (sxx, syy)
        };
        let cloud = lshape_canopy(0.0);
        let rotated = crate::cloud::rotate_about_trunk(&cloud, 90.0);
        let (axx, ayy) = moments(&cloud);
        let (bxx, byy) = moments(&rotated);
        assert!((axx - bxx).abs() / axx > 0.2, "sxx {axx} vs {bxx}");
        assert!((ayy - byy).abs() / ayy > 0.2, "syy {ayy} vs {byy}");
    }

    #[test]
    fn generators_are_deterministic() {
        let a = dappled_canopy(0.0);
        let b = dappled_canopy(0.0);
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn clear_day_peaks_at_noon() {
        let loc = orchard_location();
        let date = NaiveDate::from_ymd_opt(2016, 11, 15).unwrap();
        let series = clear_day_series(loc, date, 900.0);
        let max = series
            .samples()
            .iter()
            .max_by(|a, b| a.global_irradiance.total_cmp(&b.global_irradiance))
            .unwrap();
        assert_eq!(loc.local_date(max.timestamp), date);
        assert_eq!(max.global_irradiance, 900.0);
    }
}
