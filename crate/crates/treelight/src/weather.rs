//! Weather ingest, solar geometry, and the direct/diffuse decomposition of
//! global irradiance.
//!
//! Global irradiance is split using the multi-predictor logistic model
//! (clearness index, daily clearness, persistence, apparent solar time and
//! solar elevation). Solar positions come from the NOAA general algorithm,
//! good to well under half a degree in the current era.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc};

use crate::error::{Error, Result};

/// A point on Earth. `timezone_offset` is hours ahead of UTC and is used only
/// for grouping samples into local calendar days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoLocation {
    pub latitude: f64,
    pub longitude: f64,
    pub timezone_offset: f64,
}

impl GeoLocation {
    pub fn new(latitude: f64, longitude: f64, timezone_offset: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::Input(format!("latitude {latitude} outside [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::Input(format!("longitude {longitude} outside [-180, 180]")));
        }
        Ok(GeoLocation { latitude, longitude, timezone_offset })
    }

    fn offset_seconds(&self) -> i64 {
        (self.timezone_offset * 3600.0).round() as i64
    }

    /// Local civil date of a UTC instant at this location.
    pub fn local_date(&self, time: DateTime<Utc>) -> NaiveDate {
        (time + Duration::seconds(self.offset_seconds())).date_naive()
    }
}

/// One global-irradiance record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherSample {
    pub timestamp: DateTime<Utc>,
    /// Global irradiance on the horizontal, W/m^2.
    pub global_irradiance: f64,
}

/// A time-ordered series of weather samples at a location.
#[derive(Debug, Clone)]
pub struct WeatherSeries {
    pub location: GeoLocation,
    samples: Vec<WeatherSample>,
}

impl WeatherSeries {
    pub fn new(location: GeoLocation, samples: Vec<WeatherSample>) -> Result<Self> {
        for pair in samples.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(Error::Input(format!(
                    "weather timestamps not strictly increasing at {}",
                    pair[1].timestamp
                )));
            }
        }
        for s in &samples {
            if s.global_irradiance < 0.0 || !s.global_irradiance.is_finite() {
                return Err(Error::Input(format!(
                    "negative or non-finite irradiance at {}",
                    s.timestamp
                )));
            }
        }
        Ok(WeatherSeries { location, samples })
    }

    pub fn samples(&self) -> &[WeatherSample] {
        &self.samples
    }

    /// Linear interpolation of global irradiance at `time`.
    pub fn irradiance_at(&self, time: DateTime<Utc>) -> Result<f64> {
        let s = &self.samples;
        if s.is_empty() {
            return Err(Error::WeatherCoverage(time.to_rfc3339()));
        }
        match s.binary_search_by_key(&time, |x| x.timestamp) {
            Ok(i) => Ok(s[i].global_irradiance),
            Err(i) => {
                if i == 0 || i == s.len() {
                    return Err(Error::WeatherCoverage(time.to_rfc3339()));
                }
                let (a, b) = (&s[i - 1], &s[i]);
                let span = (b.timestamp - a.timestamp).num_milliseconds() as f64;
                let frac = (time - a.timestamp).num_milliseconds() as f64 / span;
                Ok(a.global_irradiance + frac * (b.global_irradiance - a.global_irradiance))
            }
        }
    }

    /// All samples falling on the given local calendar day.
    fn day_samples(&self, local_date: NaiveDate) -> Vec<&WeatherSample> {
        self.samples
            .iter()
            .filter(|s| self.location.local_date(s.timestamp) == local_date)
            .collect()
    }
}

/// Where the sun is, seen from a location. Azimuth is degrees clockwise from
/// true north; elevation is degrees above the horizon (negative at night).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarPosition {
    pub azimuth: f64,
    pub elevation: f64,
}

impl SolarPosition {
    pub fn zenith(&self) -> f64 {
        90.0 - self.elevation
    }
}

/// The decomposition of one global-irradiance value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrradianceSplit {
    /// Diffuse fraction from the logistic model, always in (0, 1).
    pub diffuse_fraction: f64,
    /// Direct (beam) component, W/m^2. Forced to zero when the sun is below
    /// the horizon; `direct + diffuse` equals the global input exactly.
    pub direct: f64,
    /// Diffuse component, W/m^2.
    pub diffuse: f64,
    /// Clearness index k_t.
    pub clearness: f64,
    /// Daily clearness index K_t.
    pub daily_clearness: f64,
    /// Persistence (mean of neighbouring clearness values).
    pub persistence: f64,
}

impl IrradianceSplit {
    pub fn global(&self) -> f64 {
        self.direct + self.diffuse
    }
}

const SOLAR_CONSTANT: f64 = 1370.0;

/// Extraterrestrial irradiance for a day of year in [1, 366], W/m^2.
pub fn extraterrestrial_irradiance(day_of_year: u32) -> Result<f64> {
    if !(1..=366).contains(&day_of_year) {
        return Err(Error::Input(format!("day of year {day_of_year} outside [1, 366]")));
    }
    let n = day_of_year as f64;
    Ok(SOLAR_CONSTANT * (1.0 + 0.033412 * (2.0 * std::f64::consts::PI * (n - 3.0) / 365.0).cos()))
}

/// Equation-of-time correction in minutes for a day of year.
///
/// B is in degrees; the sinusoid coefficients give minutes, the standard
/// convention for these numeric values.
pub fn equation_of_time_minutes(day_of_year: i64) -> f64 {
    let b = 360.0 * (day_of_year as f64 - 81.0) / 365.0;
    9.87 * (2.0 * b).to_radians().sin() - 7.67 * (b + 78.7).to_radians().sin()
}

/// Apparent solar time at a location, in decimal hours [0, 24).
///
/// Local mean solar time (UTC plus longitude/15) plus the equation-of-time
/// correction. The day of year is taken from the local civil date.
pub fn apparent_solar_time(time: DateTime<Utc>, location: &GeoLocation) -> f64 {
    let n = location.local_date(time).ordinal() as i64;
    let utc_hours = time.num_seconds_from_midnight() as f64 / 3600.0
        + time.nanosecond() as f64 / 3.6e12;
    let mean_solar = utc_hours + location.longitude / 15.0;
    (mean_solar + equation_of_time_minutes(n) / 60.0).rem_euclid(24.0)
}

/// Solar azimuth and elevation at a UTC instant (NOAA general algorithm,
/// no refraction). Below-horizon results are valid (negative elevation).
pub fn solar_position(location: &GeoLocation, time: DateTime<Utc>) -> SolarPosition {
    let jd = time.timestamp() as f64 / 86400.0 + time.nanosecond() as f64 / 86400.0e9
        + 2440587.5;
    let t = (jd - 2451545.0) / 36525.0;

    // Geometric mean longitude and anomaly of the sun, degrees.
    let l0 = (280.46646 + t * (36000.76983 + t * 0.0003032)).rem_euclid(360.0);
    let m = 357.52911 + t * (35999.05029 - 0.0001537 * t);
    let ecc = 0.016708634 - t * (0.000042037 + 0.0000001267 * t);

    let mr = m.to_radians();
    let eq_center = mr.sin() * (1.914602 - t * (0.004817 + 0.000014 * t))
        + (2.0 * mr).sin() * (0.019993 - 0.000101 * t)
        + (3.0 * mr).sin() * 0.000289;
    let true_long = l0 + eq_center;
    let omega = (125.04 - 1934.136 * t).to_radians();
    let app_long = (true_long - 0.00569 - 0.00478 * omega.sin()).to_radians();

    let eps0 = 23.0
        + (26.0 + (21.448 - t * (46.8150 + t * (0.00059 - t * 0.001813))) / 60.0) / 60.0;
    let eps = (eps0 + 0.00256 * omega.cos()).to_radians();

    let decl = (eps.sin() * app_long.sin()).asin();

    // Equation of time, minutes.
    let y = (eps / 2.0).tan().powi(2);
    let l0r = l0.to_radians();
    let eot = 4.0
        * (y * (2.0 * l0r).sin() - 2.0 * ecc * mr.sin()
            + 4.0 * ecc * y * mr.sin() * (2.0 * l0r).cos()
            - 0.5 * y * y * (4.0 * l0r).sin()
            - 1.25 * ecc * ecc * (2.0 * mr).sin())
        .to_degrees();

    let minutes_utc = time.num_seconds_from_midnight() as f64 / 60.0
        + time.nanosecond() as f64 / 6.0e10;
    let tst = (minutes_utc + eot + 4.0 * location.longitude).rem_euclid(1440.0);
    let hour_angle = tst / 4.0 - 180.0;

    let lat = location.latitude.to_radians();
    let ha = hour_angle.to_radians();
    let cos_zen = (lat.sin() * decl.sin() + lat.cos() * decl.cos() * ha.cos()).clamp(-1.0, 1.0);
    let zenith = cos_zen.acos();

    let denom = lat.cos() * zenith.sin();
    let azimuth = if denom.abs() < 1e-12 {
        // Sun at the zenith or observer at a pole: azimuth is degenerate.
        180.0
    } else {
        let arg = ((lat.sin() * cos_zen - decl.sin()) / denom).clamp(-1.0, 1.0);
        let base = arg.acos().to_degrees();
        if hour_angle > 0.0 {
            (base + 180.0).rem_euclid(360.0)
        } else {
            (540.0 - base).rem_euclid(360.0)
        }
    };

    SolarPosition { azimuth, elevation: 90.0 - zenith.to_degrees() }
}

/// The diffuse-fraction logistic. Apparent solar time in decimal hours,
/// solar elevation in degrees; the remaining predictors are dimensionless.
pub fn diffuse_fraction(
    clearness: f64,
    apparent_solar_time_hours: f64,
    solar_elevation_deg: f64,
    daily_clearness: f64,
    persistence: f64,
) -> f64 {
    let exponent = -5.38 + 6.63 * clearness + 0.006 * apparent_solar_time_hours
        - 0.007 * solar_elevation_deg
        + 1.75 * daily_clearness
        + 1.31 * persistence;
    1.0 / (1.0 + exponent.exp())
}

/// Options for [`decompose`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DecomposeOptions {
    /// Project extraterrestrial irradiance onto the horizontal when forming
    /// clearness indices (k_t = I / (H0 sin alpha)). Off by default: the
    /// plain normal-irradiance ratio is used.
    pub project_h0_horizontal: bool,
}

fn sample_clearness(
    series: &WeatherSeries,
    sample: &WeatherSample,
    opts: DecomposeOptions,
) -> Result<f64> {
    let n = series.location.local_date(sample.timestamp).ordinal();
    let h0 = extraterrestrial_irradiance(n)?;
    if opts.project_h0_horizontal {
        let sin_el = solar_position(&series.location, sample.timestamp)
            .elevation
            .to_radians()
            .sin();
        if sin_el <= 0.0 {
            return Ok(0.0);
        }
        Ok(sample.global_irradiance / (h0 * sin_el))
    } else {
        Ok(sample.global_irradiance / h0)
    }
}

/// Split the global irradiance at `time` into direct and diffuse components.
pub fn decompose(series: &WeatherSeries, time: DateTime<Utc>) -> Result<IrradianceSplit> {
    decompose_with_options(series, time, DecomposeOptions::default())
}

pub fn decompose_with_options(
    series: &WeatherSeries,
    time: DateTime<Utc>,
    opts: DecomposeOptions,
) -> Result<IrradianceSplit> {
    let i_global = series.irradiance_at(time)?;
    let location = series.location;
    let local_date = location.local_date(time);
    let day = series.day_samples(local_date);
    if day.is_empty() {
        return Err(Error::WeatherCoverage(format!("local day {local_date}")));
    }

    let n = local_date.ordinal();
    let h0 = extraterrestrial_irradiance(n)?;
    let sun = solar_position(&location, time);

    let clearness = if opts.project_h0_horizontal {
        let sin_el = sun.elevation.to_radians().sin();
        if sin_el <= 0.0 { 0.0 } else { i_global / (h0 * sin_el) }
    } else {
        i_global / h0
    };

    // Daily clearness: ratio of the day's irradiance sum to the matching
    // extraterrestrial sum, over whatever samples exist.
    let mut num = 0.0;
    let mut den = 0.0;
    for s in &day {
        let n_s = location.local_date(s.timestamp).ordinal();
        let h0_s = extraterrestrial_irradiance(n_s)?;
        num += s.global_irradiance;
        den += if opts.project_h0_horizontal {
            let sin_el = solar_position(&location, s.timestamp).elevation.to_radians().sin();
            h0_s * sin_el.max(0.0)
        } else {
            h0_s
        };
    }
    let daily_clearness = if den > 0.0 { num / den } else { 0.0 };

    // Persistence: mean clearness of the neighbouring samples within the
    // day; at the day's first or last sample the single available
    // neighbour is used.
    let prev = day.iter().rev().find(|s| s.timestamp < time);
    let next = day.iter().find(|s| s.timestamp > time);
    let persistence = match (prev, next) {
        (Some(p), Some(nx)) => {
            (sample_clearness(series, p, opts)? + sample_clearness(series, nx, opts)?) / 2.0
        }
        (Some(p), None) => sample_clearness(series, p, opts)?,
        (None, Some(nx)) => sample_clearness(series, nx, opts)?,
        (None, None) => clearness,
    };

    let ast = apparent_solar_time(time, &location);
    let d_frac = diffuse_fraction(clearness, ast, sun.elevation, daily_clearness, persistence);

    // Below the horizon there is no beam component; everything left in the
    // record is treated as diffuse.
    let (direct, diffuse) = if sun.elevation <= 0.0 {
        (0.0, i_global)
    } else {
        let direct = (1.0 - d_frac) * i_global;
        (direct, i_global - direct)
    };

    Ok(IrradianceSplit {
        diffuse_fraction: d_frac,
        direct,
        diffuse,
        clearness,
        daily_clearness,
        persistence,
    })
}

/// Build a synthetic 30-minute series for `date` from a daily exposure total
/// (MJ/m^2) by scaling the mean diurnal profile of the overlap series.
pub fn synthesize_from_daily(
    date: NaiveDate,
    daily_exposure_mj: f64,
    overlap: &WeatherSeries,
) -> Result<WeatherSeries> {
    const SLOT_SECONDS: i64 = 1800;
    const SLOTS: usize = 48;

    if overlap.samples.is_empty() {
        return Err(Error::Input("no overlap days available for synthesis".into()));
    }
    if daily_exposure_mj < 0.0 {
        return Err(Error::Input("daily exposure must be non-negative".into()));
    }

    let offset = overlap.location.offset_seconds();
    let mut sums = [0.0f64; SLOTS];
    let mut counts = [0u32; SLOTS];
    for s in &overlap.samples {
        let local = s.timestamp + Duration::seconds(offset);
        let slot = (local.num_seconds_from_midnight() as i64 / SLOT_SECONDS) as usize;
        sums[slot] += s.global_irradiance;
        counts[slot] += 1;
    }

    let mut profile = [0.0f64; SLOTS];
    let mut integral = 0.0;
    for i in 0..SLOTS {
        if counts[i] > 0 {
            profile[i] = sums[i] / counts[i] as f64;
            integral += profile[i] * SLOT_SECONDS as f64;
        }
    }
    if integral <= 0.0 {
        return Err(Error::Degenerate(
            "overlap profile integrates to zero; cannot scale".into(),
        ));
    }

    let scale = daily_exposure_mj * 1.0e6 / integral;
    let midnight_local = date.and_hms_opt(0, 0, 0).unwrap();
    let midnight_utc = Utc.from_utc_datetime(&midnight_local) - Duration::seconds(offset);
    let samples = (0..SLOTS)
        .filter(|&i| counts[i] > 0)
        .map(|i| WeatherSample {
            timestamp: midnight_utc + Duration::seconds(i as i64 * SLOT_SECONDS),
            global_irradiance: profile[i] * scale,
        })
        .collect();
    WeatherSeries::new(overlap.location, samples)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Read a weather CSV (`timestamp_iso8601,global_wm2`, UTC timestamps).
pub fn load_weather_csv(path: &Path, location: GeoLocation) -> Result<WeatherSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let mut samples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io { path: path.into(), source: e })?;
        let lineno = idx as u64 + 1;
        if idx == 0 {
            if line.trim() != "timestamp_iso8601,global_wm2" {
                return Err(Error::Malformed {
                    path: path.into(),
                    line: lineno,
                    message: format!("expected header `timestamp_iso8601,global_wm2`, got `{line}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(2, ',');
        let ts = fields.next().unwrap_or("");
        let val = fields.next().ok_or_else(|| Error::Malformed {
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
        let global_irradiance: f64 = val.trim().parse().map_err(|e| Error::Malformed {
            path: path.into(),
            line: lineno,
            message: format!("bad irradiance `{val}`: {e}"),
        })?;
        samples.push(WeatherSample { timestamp, global_irradiance });
    }
    WeatherSeries::new(location, samples)
}

pub fn save_weather_csv(series: &WeatherSeries, path: &Path) -> Result<()> {
    let mut out = String::from("timestamp_iso8601,global_wm2\n");
    for s in &series.samples {
        out.push_str(&format!(
            "{},{}\n",
            s.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            s.global_irradiance
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    f.write_all(out.as_bytes()).map_err(|e| Error::Io { path: path.into(), source: e })
}

/// Read a daily-exposure CSV (`date_iso8601,exposure_mj_m2`).
pub fn load_daily_exposure_csv(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io { path: path.into(), source: e })?;
        let lineno = idx as u64 + 1;
        if idx == 0 {
            if line.trim() != "date_iso8601,exposure_mj_m2" {
                return Err(Error::Malformed {
                    path: path.into(),
                    line: lineno,
                    message: format!("expected header `date_iso8601,exposure_mj_m2`, got `{line}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(2, ',');
        let d = fields.next().unwrap_or("");
        let v = fields.next().ok_or_else(|| Error::Malformed {
            path: path.into(),
            line: lineno,
            message: "expected 2 fields".into(),
        })?;
        let date = NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d").map_err(|e| Error::Malformed {
            path: path.into(),
            line: lineno,
            message: format!("bad date `{d}`: {e}"),
        })?;
        let exposure: f64 = v.trim().parse().map_err(|e| Error::Malformed {
            path: path.into(),
            line: lineno,
            message: format!("bad exposure `{v}`: {e}"),
        })?;
        out.push((date, exposure));
    }
    Ok(out)
}
