//! Virtual ceptometer sampling of the modelled ground field, PAR conversion,
//! and open-air calibration against a logging reference sensor.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};

use crate::error::{Error, Result};
use crate::radiance::EnergyField;
use crate::skydome::{DomeMode, SkyDome};

/// Conversion factor from full-spectrum irradiance (W/m^2) to PAR
/// (umol s^-1 m^-2), assuming a constant light spectrum.
pub const PAR_PER_WM2: f64 = 1.72;

/// Default neighbourhood radius for virtual readings: half the 80 cm
/// instrument length, approximating the eight-sensor average.
pub const DEFAULT_SAMPLE_RADIUS: f64 = 0.4;

/// One ceptometer reading on the measurement grid. `row_m` runs along the
/// orchard row (1 m spacing), `col_m` across it (0.8 m spacing); negative
/// `col_m` is the north side of the tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeptometerReading {
    pub timestamp: DateTime<Utc>,
    pub row_m: f64,
    pub col_m: f64,
    /// Mean of the instrument's eight sensors, umol s^-1 m^-2.
    pub par: f64,
}

/// Continuous open-air PAR log at one-minute cadence.
#[derive(Debug, Clone)]
pub struct OpenAirLog {
    samples: Vec<(DateTime<Utc>, f64)>,
}

impl OpenAirLog {
    pub fn new(samples: Vec<(DateTime<Utc>, f64)>) -> Result<Self> {
        for pair in samples.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::Input("open-air log timestamps must increase".into()));
            }
        }
        if samples.iter().any(|&(_, p)| p < 0.0) {
            return Err(Error::Input("open-air PAR must be non-negative".into()));
        }
        Ok(OpenAirLog { samples })
    }

    pub fn samples(&self) -> &[(DateTime<Utc>, f64)] {
        &self.samples
    }

    /// The logged PAR nearest to `time`, if within one minute.
    pub fn par_at(&self, time: DateTime<Utc>) -> Option<f64> {
        self.samples
            .iter()
            .map(|&(t, p)| ((t - time).num_milliseconds().abs(), p))
            .min_by_key(|&(dt, _)| dt)
            .filter(|&(dt, _)| dt <= Duration::minutes(1).num_milliseconds())
            .map(|(_, p)| p)
    }
}

/// Convert irradiance to PAR by the constant-spectrum factor.
pub fn par_from_irradiance(irradiance: f64) -> Result<f64> {
    if irradiance < 0.0 {
        return Err(Error::Input(format!("negative irradiance {irradiance}")));
    }
    Ok(PAR_PER_WM2 * irradiance)
}

/// Open-air irradiance a horizontal sensor would see under the dome:
/// every node's value projected by the cosine of its zenith angle.
pub fn open_air_irradiance(dome: &SkyDome) -> Result<f64> {
    if dome.mode != DomeMode::Instantaneous {
        return Err(Error::Input(
            "open-air calibration applies to instantaneous domes only".into(),
        ));
    }
    Ok(dome
        .nodes
        .iter()
        .map(|n| n.value * n.direction.z.max(0.0))
        .sum())
}

/// Convert a modelled irradiance to PAR, calibrated against the open-air
/// log when one is available; otherwise the constant-spectrum conversion
/// is used (the whole-season case).
pub fn calibrated_par(
    model_irradiance: f64,
    log: Option<&OpenAirLog>,
    time: DateTime<Utc>,
    dome: &SkyDome,
) -> Result<f64> {
    if model_irradiance < 0.0 {
        return Err(Error::Input(format!("negative model irradiance {model_irradiance}")));
    }
    let Some(log) = log else {
        return par_from_irradiance(model_irradiance);
    };
    let o_par = log.par_at(time).ok_or_else(|| {
        Error::Degenerate(format!("open-air log does not cover {time} within one minute"))
    })?;
    let o_irr = open_air_irradiance(dome)?;
    if o_irr == 0.0 {
        if o_par > 0.0 {
            return Err(Error::Degenerate(
                "open-air calibration degenerate: modelled open-air irradiance is zero".into(),
            ));
        }
        return Ok(0.0);
    }
    Ok(model_irradiance * (o_par / o_irr))
}

/// Average the horizontal-projected ground arrivals over all cells whose
/// centre lies within `radius` of `location` (x, y in world metres).
pub fn sample_virtual(field: &EnergyField, location: (f64, f64), radius: f64) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(Error::Input(format!("negative sampling radius {radius}")));
    }
    let region = &field.ground.region;
    let r2 = radius * radius;
    let mut sum = 0.0;
    let mut count = 0usize;
    // Only the cells in the bounding square of the disc need scanning.
    let ix0 = (((location.0 - radius) - region.min_x) / region.cell_size).floor().max(0.0) as usize;
    let iy0 = (((location.1 - radius) - region.min_y) / region.cell_size).floor().max(0.0) as usize;
    let ix1 = ((((location.0 + radius) - region.min_x) / region.cell_size).ceil() as usize).min(region.nx);
    let iy1 = ((((location.1 + radius) - region.min_y) / region.cell_size).ceil() as usize).min(region.ny);
    for iy in iy0..iy1 {
        for ix in ix0..ix1 {
            let c = iy * region.nx + ix;
            let center = region.center(c);
            let dx = center.x - location.0;
            let dy = center.y - location.1;
            if dx * dx + dy * dy <= r2 {
                sum += field.ground.horizontal[c];
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Input(format!(
            "no ground cells within {radius} m of ({}, {})",
            location.0, location.1
        )));
    }
    Ok(sum / count as f64)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Read a ceptometer CSV (`timestamp_iso8601,row_m,col_m,par_umol`).
/// With `exclude_north` set, readings on the north side of the tree
/// (negative `col_m`) are dropped.
pub fn load_readings_csv(path: &Path, exclude_north: bool) -> Result<Vec<CeptometerReading>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io { path: path.into(), source: e })?;
        let lineno = idx as u64 + 1;
        if idx == 0 {
            if line.trim() != "timestamp_iso8601,row_m,col_m,par_umol" {
                return Err(Error::Malformed {
                    path: path.into(),
                    line: lineno,
                    message: format!(
                        "expected header `timestamp_iso8601,row_m,col_m,par_umol`, got `{line}`"
                    ),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Malformed {
                path: path.into(),
                line: lineno,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let timestamp = DateTime::parse_from_rfc3339(fields[0].trim())
            .map_err(|e| Error::Malformed {
                path: path.into(),
                line: lineno,
                message: format!("bad timestamp `{}`: {e}", fields[0]),
            })?
            .with_timezone(&Utc);
        let mut vals = [0.0f64; 3];
        for (v, f) in vals.iter_mut().zip(&fields[1..]) {
            *v = f.trim().parse().map_err(|e| Error::Malformed {
                path: path.into(),
                line: lineno,
                message: format!("bad number `{f}`: {e}"),
            })?;
        }
        if vals[2] < 0.0 {
            return Err(Error::Malformed {
                path: path.into(),
                line: lineno,
                message: format!("negative PAR {}", vals[2]),
            });
        }
        let reading = CeptometerReading { timestamp, row_m: vals[0], col_m: vals[1], par: vals[2] };
        if exclude_north && reading.col_m < 0.0 {
            continue;
        }
        out.push(reading);
    }
    Ok(out)
}

pub fn save_readings_csv(readings: &[CeptometerReading], path: &Path) -> Result<()> {
    let mut out = String::from("timestamp_iso8601,row_m,col_m,par_umol\n");
    for r in readings {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            r.row_m,
            r.col_m,
            r.par
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    f.write_all(out.as_bytes()).map_err(|e| Error::Io { path: path.into(), source: e })
}

/// Read an open-air log CSV (`timestamp_iso8601,par_umol`).
pub fn load_open_air_csv(path: &Path) -> Result<OpenAirLog> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let mut samples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io { path: path.into(), source: e })?;
        let lineno = idx as u64 + 1;
        if idx == 0 {
            if line.trim() != "timestamp_iso8601,par_umol" {
                return Err(Error::Malformed {
                    path: path.into(),
                    line: lineno,
                    message: format!("expected header `timestamp_iso8601,par_umol`, got `{line}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(2, ',');
        let ts = fields.next().unwrap_or("");
        let v = fields.next().ok_or_else(|| Error::Malformed {
            path: path.into(),
            line: lineno,
            message: "expected 2 fields".into(),
        })?;
        let timestamp = DateTime::parse_from_rfc3339(ts.trim())
            .map_err(|e| Error::Malformed {
                path: path.into(),
                line: lineno,
                message: format!("bad timestamp `{ts}`: {e}"),
            })?
            .with_timezone(&Utc);
        let par: f64 = v.trim().parse().map_err(|e| Error::Malformed {
            path: path.into(),
            line: lineno,
            message: format!("bad PAR `{v}`: {e}"),
        })?;
        samples.push((timestamp, par));
    }
    OpenAirLog::new(samples)
}

pub fn save_open_air_csv(log: &OpenAirLog, path: &Path) -> Result<()> {
    let mut out = String::from("timestamp_iso8601,par_umol\n");
    for (t, p) in log.samples() {
        out.push_str(&format!(
            "{},{}\n",
            t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            p
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    f.write_all(out.as_bytes()).map_err(|e| Error::Io { path: path.into(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::radiance::{GroundField, GroundRegion};
    use crate::skydome::{NodeKind, SkyNode};
    use approx::assert_relative_eq;
    use chrono::TimeZone;

    fn dome_with(nodes: Vec<SkyNode>, mode: DomeMode) -> SkyDome {
        SkyDome { resolution: nodes.len(), nodes, mode, provenance: None }
    }

    #[test]
    fn par_conversion() {
        assert_relative_eq!(par_from_irradiance(100.0).unwrap(), 172.0, max_relative = 1e-12);
        assert_eq!(par_from_irradiance(0.0).unwrap(), 0.0);
        let (a, b) = (13.7, 29.1);
        assert_relative_eq!(
            par_from_irradiance(a + b).unwrap(),
            par_from_irradiance(a).unwrap() + par_from_irradiance(b).unwrap(),
            max_relative = 1e-12
        );
        assert!(par_from_irradiance(-1.0).is_err());
    }

    #[test]
    fn open_air_projects_by_zenith() {
        let zenith_node = SkyNode {
            direction: Vec3::new(0.0, 0.0, 1.0),
            value: 800.0,
            kind: NodeKind::Sun,
        };
        let dome = dome_with(vec![zenith_node], DomeMode::Instantaneous);
        assert_relative_eq!(open_air_irradiance(&dome).unwrap(), 800.0, max_relative = 1e-12);

        let horizon_node = SkyNode {
            direction: Vec3::from_az_el(90.0, 0.0),
            value: 800.0,
            kind: NodeKind::Diffuse,
        };
        let dome = dome_with(vec![horizon_node], DomeMode::Instantaneous);
        assert!(open_air_irradiance(&dome).unwrap() < 1e-10);

        // Two-node cross-check against direct summation.
        let nodes = vec![
            SkyNode { direction: Vec3::from_az_el(30.0, 70.0), value: 300.0, kind: NodeKind::Diffuse },
            SkyNode { direction: Vec3::from_az_el(210.0, 25.0), value: 450.0, kind: NodeKind::Diffuse },
        ];
        let expected: f64 = nodes
            .iter()
            .map(|n| n.value * (90.0 - n.direction.elevation_deg()).to_radians().cos())
            .sum();
        let dome = dome_with(nodes, DomeMode::Instantaneous);
        assert_relative_eq!(open_air_irradiance(&dome).unwrap(), expected, max_relative = 1e-9);
    }

    #[test]
    fn open_air_rejects_composite() {
        let dome = dome_with(vec![], DomeMode::Composite);
        assert!(open_air_irradiance(&dome).is_err());
    }

    fn log_at(time: DateTime<Utc>, par: f64) -> OpenAirLog {
        OpenAirLog::new(vec![(time, par)]).unwrap()
    }

    #[test]
    fn calibration_identities() {
        let t = Utc.with_ymd_and_hms(2016, 11, 15, 1, 0, 0).unwrap();
        let dome = dome_with(
            vec![SkyNode { direction: Vec3::new(0.0, 0.0, 1.0), value: 500.0, kind: NodeKind::Sun }],
            DomeMode::Instantaneous,
        );
        // An unshaded virtual sensor reads back the open-air PAR exactly.
        let log = log_at(t, 941.3);
        assert_relative_eq!(
            calibrated_par(500.0, Some(&log), t, &dome).unwrap(),
            941.3,
            max_relative = 1e-12
        );
        // O_PAR consistent with the constant factor reduces to the plain conversion.
        let log = log_at(t, 1.72 * 500.0);
        assert_relative_eq!(
            calibrated_par(123.0, Some(&log), t, &dome).unwrap(),
            par_from_irradiance(123.0).unwrap(),
            max_relative = 1e-12
        );
        // Zero model irradiance stays zero under any calibration.
        assert_eq!(calibrated_par(0.0, Some(&log), t, &dome).unwrap(), 0.0);
        // Without a log the constant-spectrum conversion applies.
        assert_relative_eq!(
            calibrated_par(123.0, None, t, &dome).unwrap(),
            211.56,
            max_relative = 1e-12
        );
    }

    #[test]
    fn calibration_degenerate_cases() {
        let t = Utc.with_ymd_and_hms(2016, 11, 15, 1, 0, 0).unwrap();
        let dark = dome_with(
            vec![SkyNode { direction: Vec3::new(0.0, 0.0, 1.0), value: 0.0, kind: NodeKind::Diffuse }],
            DomeMode::Instantaneous,
        );
        let log = log_at(t, 900.0);
        assert!(calibrated_par(10.0, Some(&log), t, &dark).is_err());
        // Log too far from the requested time.
        let far_log = log_at(t - Duration::minutes(5), 900.0);
        let lit = dome_with(
            vec![SkyNode { direction: Vec3::new(0.0, 0.0, 1.0), value: 500.0, kind: NodeKind::Sun }],
            DomeMode::Instantaneous,
        );
        assert!(calibrated_par(10.0, Some(&far_log), t, &lit).is_err());
    }

    fn uniform_field(value: f64) -> EnergyField {
        let region = GroundRegion::new(-1.0, -1.0, 1.0, 1.0, 0.1, 0.0).unwrap();
        let n = region.cell_count();
        EnergyField {
            per_point: vec![],
            mode: DomeMode::Instantaneous,
            ground: GroundField { region, raw: vec![value; n], horizontal: vec![value; n] },
        }
    }

    #[test]
    fn sampling_uniform_field_returns_value() {
        let field = uniform_field(713.0);
        for radius in [0.08, 0.4, 0.9] {
            assert_relative_eq!(
                sample_virtual(&field, (0.0, 0.0), radius).unwrap(),
                713.0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn sampling_half_covered_neighbourhood_averages() {
        let mut field = uniform_field(0.0);
        // Left half dark, right half bright, split at x = 0.
        let region = field.ground.region.clone();
        for c in 0..region.cell_count() {
            let v = if region.center(c).x > 0.0 { 100.0 } else { 0.0 };
            field.ground.horizontal[c] = v;
        }
        // Enumerate the qualifying cells directly.
        let radius = 0.35;
        let mut sum = 0.0;
        let mut count = 0;
        for c in 0..region.cell_count() {
            let p = region.center(c);
            if p.x * p.x + p.y * p.y <= radius * radius {
                sum += field.ground.horizontal[c];
                count += 1;
            }
        }
        let expected = sum / count as f64;
        assert_relative_eq!(
            sample_virtual(&field, (0.0, 0.0), radius).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sampling_outside_bounds_errors() {
        let field = uniform_field(1.0);
        assert!(sample_virtual(&field, (50.0, 50.0), 0.4).is_err());
    }

    #[test]
    fn readings_round_trip_and_north_filter() {
        let t = Utc.with_ymd_and_hms(2016, 11, 15, 1, 0, 0).unwrap();
        let readings = vec![
            CeptometerReading { timestamp: t, row_m: 0.0, col_m: 0.8, par: 812.25 },
            CeptometerReading { timestamp: t, row_m: 1.0, col_m: -0.8, par: 64.125 },
            CeptometerReading { timestamp: t, row_m: 2.0, col_m: 1.6, par: 1200.0 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("readings.csv");
        save_readings_csv(&readings, &path).unwrap();
        let all = load_readings_csv(&path, false).unwrap();
        assert_eq!(all, readings);
        let south = load_readings_csv(&path, true).unwrap();
        assert_eq!(south.len(), 2);
        assert!(south.iter().all(|r| r.col_m >= 0.0));
    }

    #[test]
    fn open_air_log_round_trip_and_lookup() {
        let t0 = Utc.with_ymd_and_hms(2016, 11, 15, 1, 0, 0).unwrap();
        let log = OpenAirLog::new(
            (0..10).map(|i| (t0 + Duration::minutes(i), 900.0 + i as f64)).collect(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("openair.csv");
        save_open_air_csv(&log, &path).unwrap();
        let loaded = load_open_air_csv(&path).unwrap();
        assert_eq!(loaded.samples(), log.samples());

        assert_eq!(log.par_at(t0 + Duration::seconds(70)).unwrap(), 901.0);
        assert!(log.par_at(t0 - Duration::minutes(2)).is_none());
    }
}
