//! Regression comparison of modelled vs measured readings: best-fit line,
//! R^2, slope, RMSE, and sliding-window dappling compensation.

use crate::error::{Error, Result};

/// One modelled/measured pair at a ground position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedSample {
    /// Measured PAR, umol s^-1 m^-2.
    pub measured: f64,
    /// Modelled PAR, umol s^-1 m^-2.
    pub modelled: f64,
    /// World x, y of the reading.
    pub position: (f64, f64),
    pub dataset: u32,
}

/// How RMSE residuals are measured against the best-fit line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualMode {
    /// Perpendicular distance to the fitted line.
    #[default]
    Perpendicular,
    /// Vertical distance (modelled-axis) to the fitted line.
    Vertical,
}

/// Least-squares comparison of modelled against measured values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// RMS perpendicular distance of the points to the best-fit line.
    pub rmse: f64,
    /// RMS vertical residual against the best-fit line.
    pub rmse_vertical: f64,
    pub n: usize,
}

impl FitReport {
    /// Flat key-value record (`m=... r2=... rmse=... n=...`).
    pub fn to_record(&self) -> String {
        format!(
            "m={} intercept={} r2={} rmse={} rmse_vertical={} n={}",
            self.slope, self.intercept, self.r_squared, self.rmse, self.rmse_vertical, self.n
        )
    }
}

/// Ordinary least squares of modelled (y) on measured (x).
pub fn fit(pairs: &[PairedSample]) -> Result<FitReport> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("need at least 3 pairs, got {n}")));
    }
    let nf = n as f64;
    let mean_x = pairs.iter().map(|p| p.measured).sum::<f64>() / nf;
    let mean_y = pairs.iter().map(|p| p.modelled).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for p in pairs {
        let dx = p.measured - mean_x;
        let dy = p.modelled - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("measured values have zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    // R^2 of a simple linear regression is the squared correlation. A flat
    // response (syy = 0) is fitted exactly by the horizontal line.
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };

    let mut ss_vertical = 0.0;
    for p in pairs {
        let r = p.modelled - (slope * p.measured + intercept);
        ss_vertical += r * r;
    }
    let rmse_vertical = (ss_vertical / nf).sqrt();
    // Perpendicular distance scales the vertical residual by 1/sqrt(1+m^2).
    let rmse = (ss_vertical / (1.0 + slope * slope) / nf).sqrt();

    Ok(FitReport { slope, intercept, r_squared, rmse, rmse_vertical, n })
}

/// RMSE in the requested residual mode.
pub fn rmse_of(report: &FitReport, mode: ResidualMode) -> f64 {
    match mode {
        ResidualMode::Perpendicular => report.rmse,
        ResidualMode::Vertical => report.rmse_vertical,
    }
}

/// Replace each sample's measured and modelled values by their means over
/// all samples inside the axis-aligned square window (side `window`)
/// centred on it. Boundary samples are included.
pub fn window_average(pairs: &[PairedSample], window: f64) -> Result<Vec<PairedSample>> {
    if !(window > 0.0) {
        return Err(Error::Input(format!("window {window} must be positive")));
    }
    let half = window / 2.0;
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        let mut sum_measured = 0.0;
        let mut sum_modelled = 0.0;
        let mut count = 0usize;
        for q in pairs {
            if (q.position.0 - p.position.0).abs() <= half
                && (q.position.1 - p.position.1).abs() <= half
            {
                sum_measured += q.measured;
                sum_modelled += q.modelled;
                count += 1;
            }
        }
        out.push(PairedSample {
            measured: sum_measured / count as f64,
            modelled: sum_modelled / count as f64,
            position: p.position,
            dataset: p.dataset,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pair(x: f64, y: f64, px: f64, py: f64) -> PairedSample {
        PairedSample { measured: x, modelled: y, position: (px, py), dataset: 0 }
    }

    #[test]
    fn identity_line_is_perfect() {
        let pairs: Vec<PairedSample> =
            (0..10).map(|i| pair(i as f64, i as f64, i as f64, 0.0)).collect();
        let r = fit(&pairs).unwrap();
        assert_relative_eq!(r.slope, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.intercept, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.r_squared, 1.0, epsilon = 1e-12);
        assert!(r.rmse < 1e-12);
    }

    #[test]
    fn exact_double_slope() {
        let pairs = vec![pair(0.0, 0.0, 0.0, 0.0), pair(1.0, 2.0, 1.0, 0.0), pair(2.0, 4.0, 2.0, 0.0)];
        let r = fit(&pairs).unwrap();
        assert_relative_eq!(r.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.intercept, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_noise_keeps_slope_lowers_r2() {
        // Points on y = 2x with symmetric +/- 0.5 noise at each x.
        let e = 0.5;
        let pairs = vec![
            pair(1.0, 2.0 - e, 0.0, 0.0),
            pair(1.0, 2.0 + e, 0.0, 0.0),
            pair(2.0, 4.0 - e, 0.0, 0.0),
            pair(2.0, 4.0 + e, 0.0, 0.0),
        ];
        let r = fit(&pairs).unwrap();
        assert_relative_eq!(r.slope, 2.0, epsilon = 1e-12);
        assert!(r.r_squared < 1.0);
        assert!(r.rmse > 0.0);
        // Closed form: sxx = 2*0.5, sxy = 2*1.0 -> slope 2; syy = 4 + 4e^2.
        let expected_r2 = 4.0 / (4.0 + 4.0 * e * e / 2.0 * 2.0);
        assert_relative_eq!(r.r_squared, expected_r2, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(fit(&[pair(0.0, 0.0, 0.0, 0.0), pair(1.0, 1.0, 0.0, 0.0)]).is_err());
        let flat_x = vec![pair(5.0, 1.0, 0.0, 0.0), pair(5.0, 2.0, 0.0, 0.0), pair(5.0, 3.0, 0.0, 0.0)];
        assert!(fit(&flat_x).is_err());
    }

    #[test]
    fn fit_is_order_invariant() {
        let pairs: Vec<PairedSample> = (0..40)
            .map(|i| {
                let x = i as f64 * 0.3;
                pair(x, 1.4 * x + (i as f64 * 0.7).sin(), x, 0.0)
            })
            .collect();
        let mut reversed = pairs.clone();
        reversed.reverse();
        let a = fit(&pairs).unwrap();
        let b = fit(&reversed).unwrap();
        assert_relative_eq!(a.slope, b.slope, max_relative = 1e-12);
        assert_relative_eq!(a.r_squared, b.r_squared, max_relative = 1e-12);
        assert_relative_eq!(a.rmse, b.rmse, max_relative = 1e-12);
    }

    #[test]
    fn scaling_both_axes_scales_rmse_only() {
        let pairs: Vec<PairedSample> = (0..25)
            .map(|i| {
                let x = i as f64 * 0.5;
                pair(x, 0.9 * x + ((i * 7) % 5) as f64 * 0.3, x, 0.0)
            })
            .collect();
        let k = 3.7;
        let scaled: Vec<PairedSample> = pairs
            .iter()
            .map(|p| pair(p.measured * k, p.modelled * k, p.position.0, p.position.1))
            .collect();
        let a = fit(&pairs).unwrap();
        let b = fit(&scaled).unwrap();
        assert_relative_eq!(b.r_squared, a.r_squared, max_relative = 1e-12);
        assert_relative_eq!(b.rmse, a.rmse * k, max_relative = 1e-12);
        assert_relative_eq!(b.rmse_vertical, a.rmse_vertical * k, max_relative = 1e-12);
        assert_relative_eq!(b.slope, a.slope, max_relative = 1e-12);
    }

    #[test]
    fn tiny_window_is_identity() {
        let pairs: Vec<PairedSample> = (0..9)
            .map(|i| pair(i as f64, 2.0 * i as f64, (i % 3) as f64, (i / 3) as f64))
            .collect();
        let out = window_average(&pairs, 0.5).unwrap();
        assert_eq!(out, pairs);
    }

    #[test]
    fn uniform_field_is_identity_under_windowing() {
        let pairs: Vec<PairedSample> = (0..16)
            .map(|i| pair(7.0, 7.0, (i % 4) as f64, (i / 4) as f64))
            .collect();
        let out = window_average(&pairs, 2.0).unwrap();
        for (a, b) in out.iter().zip(&pairs) {
            assert_relative_eq!(a.measured, b.measured, epsilon = 1e-12);
            assert_relative_eq!(a.modelled, b.modelled, epsilon = 1e-12);
        }
    }

    #[test]
    fn checkerboard_window_reduces_variance_raises_r2() {
        // Measured follows a checkerboard; the model sees the complementary
        // pattern plus a shared gradient, so raw pairs anti-correlate within
        // cells but agree after smoothing.
        let mut pairs = Vec::new();
        for iy in 0..8 {
            for ix in 0..8 {
                let x = ix as f64;
                let y = iy as f64;
                let checker = if (ix + iy) % 2 == 0 { 1.0 } else { 0.0 };
                let gradient = (x + y) * 50.0;
                let measured = gradient + 400.0 * checker;
                let modelled = gradient + 400.0 * (1.0 - checker);
                pairs.push(pair(measured, modelled, x, y));
            }
        }
        let raw = fit(&pairs).unwrap();
        let windowed = window_average(&pairs, 2.0).unwrap();
        let smooth = fit(&windowed).unwrap();

        let var = |ps: &[PairedSample]| {
            let m = ps.iter().map(|p| p.modelled).sum::<f64>() / ps.len() as f64;
            ps.iter().map(|p| (p.modelled - m).powi(2)).sum::<f64>() / ps.len() as f64
        };
        assert!(var(&windowed) < var(&pairs));
        assert!(smooth.r_squared > raw.r_squared);
    }

    #[test]
    fn repeated_windowing_converges_to_global_mean() {
        let pairs: Vec<PairedSample> = (0..12)
            .map(|i| pair((i * i % 7) as f64, (i % 5) as f64, (i % 4) as f64, (i / 4) as f64))
            .collect();
        // A window spanning the whole grid collapses everything to the mean
        // in one application; a second changes nothing.
        let once = window_average(&pairs, 100.0).unwrap();
        let twice = window_average(&once, 100.0).unwrap();
        let mean_measured = pairs.iter().map(|p| p.measured).sum::<f64>() / pairs.len() as f64;
        for p in &once {
            assert_relative_eq!(p.measured, mean_measured, epsilon = 1e-12);
        }
        for (a, b) in once.iter().zip(&twice) {
            assert_relative_eq!(a.measured, b.measured, epsilon = 1e-12);
            assert_relative_eq!(a.modelled, b.modelled, epsilon = 1e-12);
        }
    }

    #[test]
    fn record_format_is_flat() {
        let pairs = vec![pair(0.0, 0.0, 0.0, 0.0), pair(1.0, 2.0, 1.0, 0.0), pair(2.0, 4.0, 2.0, 0.0)];
        let r = fit(&pairs).unwrap();
        let rec = r.to_record();
        assert!(rec.contains("m=2") && rec.contains("r2=1") && rec.contains("n=3"), "{rec}");
    }
}
