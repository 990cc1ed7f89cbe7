//! The discretised hemispherical sky: geodesic node placement, CIE diffuse
//! distribution, a dedicated sun node, and composite (time-integrated) skies.

use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::weather::{decompose, solar_position, IrradianceSplit, SolarPosition, WeatherSeries};

/// Highest zenith angle fed into the luminance gradation; the b/cos(Z) pole
/// sits at 90 degrees.
const ZENITH_CLAMP_DEG: f64 = 89.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Diffuse,
    Sun,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Diffuse => "diffuse",
            NodeKind::Sun => "sun",
        }
    }
}

/// One discrete sky light source. `value` is W/m^2 for instantaneous domes
/// and J/m^2 for composite domes, measured perpendicular to the ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkyNode {
    pub direction: Vec3,
    pub value: f64,
    pub kind: NodeKind,
}

impl SkyNode {
    pub fn zenith_deg(&self) -> f64 {
        90.0 - self.direction.elevation_deg()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomeMode {
    Instantaneous,
    Composite,
}

/// Time span and location a dome was generated for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone)]
pub struct SkyDome {
    pub nodes: Vec<SkyNode>,
    /// Number of diffuse nodes (the sky resolution actually generated).
    pub resolution: usize,
    pub mode: DomeMode,
    pub provenance: Option<Provenance>,
}

impl SkyDome {
    pub fn total(&self) -> f64 {
        self.nodes.iter().map(|n| n.value).sum()
    }

    pub fn sun_node(&self) -> Option<&SkyNode> {
        self.nodes.iter().find(|n| n.kind == NodeKind::Sun)
    }
}

/// CIE sky parameters, one row of the four-type lookup table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CieParameters {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub sky_type: u8,
}

/// Select CIE parameters from the diffuse fraction.
pub fn cie_parameters(d_frac: f64) -> Result<CieParameters> {
    if !(0.0..=1.0).contains(&d_frac) {
        return Err(Error::Input(format!("diffuse fraction {d_frac} outside [0, 1]")));
    }
    Ok(if d_frac <= 0.25 {
        // Standard clear
        CieParameters { a: -1.0, b: -0.32, c: 10.0, d: -3.0, e: 0.45, sky_type: 12 }
    } else if d_frac <= 0.50 {
        // White-blue sky
        CieParameters { a: -1.0, b: -0.55, c: 10.0, d: -3.0, e: 0.45, sky_type: 11 }
    } else if d_frac <= 0.75 {
        // Partly cloudy
        CieParameters { a: 0.0, b: -1.0, c: 5.0, d: -2.5, e: 0.30, sky_type: 7 }
    } else {
        // Standard overcast
        CieParameters { a: 4.0, b: -0.7, c: 2.0, d: -1.5, e: 0.15, sky_type: 1 }
    })
}

/// Scattering indicatrix f(chi); chi in radians.
pub fn scattering_indicatrix(chi: f64, p: &CieParameters) -> f64 {
    1.0 + p.c * ((p.d * chi).exp() - (p.d * std::f64::consts::FRAC_PI_2).exp())
        + p.e * chi.cos().powi(2)
}

/// Luminance gradation phi(Z); zenith angle in degrees, clamped away from
/// the horizon pole.
pub fn luminance_gradation(zenith_deg: f64, p: &CieParameters) -> f64 {
    let z = zenith_deg.min(ZENITH_CLAMP_DEG).to_radians();
    1.0 + p.a * (p.b / z.cos()).exp()
}

/// Great-arc distance between a sky element and the sun, in radians. All
/// angles in degrees.
pub fn sun_arc_distance(node_zenith_deg: f64, sun_zenith_deg: f64, azimuth_delta_deg: f64) -> f64 {
    let z = node_zenith_deg.to_radians();
    let zs = sun_zenith_deg.to_radians();
    let az = azimuth_delta_deg.to_radians();
    (zs.cos() * z.cos() + zs.sin() * z.sin() * az.cos()).clamp(-1.0, 1.0).acos()
}

/// Relative luminance of a sky element against the sun position.
pub fn relative_luminance(
    node_zenith_deg: f64,
    sun_zenith_deg: f64,
    azimuth_delta_deg: f64,
    params: &CieParameters,
) -> f64 {
    let chi = sun_arc_distance(node_zenith_deg, sun_zenith_deg, azimuth_delta_deg);
    scattering_indicatrix(chi, params) * luminance_gradation(node_zenith_deg, params)
}

/// A generated hemisphere of quasi-uniform unit directions.
#[derive(Debug, Clone)]
pub struct Hemisphere {
    pub directions: Vec<Vec3>,
    /// Subdivision frequency of the underlying icosahedron.
    pub frequency: u32,
}

impl Hemisphere {
    pub fn count(&self) -> usize {
        self.directions.len()
    }
}

/// Generate the smallest geodesic hemisphere with at least
/// `target_resolution` nodes.
///
/// An icosahedron oriented vertex-up is subdivided at increasing frequency,
/// vertices are normalised to the unit sphere and filtered to elevation >= 0.
/// Deterministic: node order depends only on the frequency.
pub fn build_hemisphere(target_resolution: usize) -> Result<Hemisphere> {
    if target_resolution < 12 {
        return Err(Error::Input(format!(
            "target sky resolution {target_resolution} below minimum 12"
        )));
    }
    for frequency in 1..=128u32 {
        let directions = hemisphere_at_frequency(frequency);
        if directions.len() >= target_resolution {
            return Ok(Hemisphere { directions, frequency });
        }
    }
    Err(Error::Input(format!(
        "target sky resolution {target_resolution} too large"
    )))
}

/// Vertex-up icosahedron: two poles plus two latitude rings of five.
fn icosahedron_vertices() -> Vec<Vec3> {
    let lat = (0.5f64).atan().to_degrees(); // ~26.565 degrees
    let mut v = vec![Vec3::new(0.0, 0.0, 1.0)];
    for i in 0..5 {
        v.push(Vec3::from_az_el(72.0 * i as f64, lat));
    }
    for i in 0..5 {
        v.push(Vec3::from_az_el(36.0 + 72.0 * i as f64, -lat));
    }
    v.push(Vec3::new(0.0, 0.0, -1.0));
    v
}

fn icosahedron_faces() -> Vec<[usize; 3]> {
    let mut f = Vec::with_capacity(20);
    for i in 0..5 {
        let a = 1 + i;
        let b = 1 + (i + 1) % 5;
        let c = 6 + i;
        let d = 6 + (i + 1) % 5;
        f.push([0, a, b]); // cap
        f.push([a, c, b]); // upper band
        f.push([b, c, d]); // lower band
        f.push([11, d, c]); // base
    }
    f
}

fn hemisphere_at_frequency(frequency: u32) -> Vec<Vec3> {
    use std::collections::HashMap;

    let verts = icosahedron_vertices();
    let faces = icosahedron_faces();
    let f = frequency as i64;

    // Each subdivision point is keyed by its exact integer barycentric
    // weights on the base vertices, so shared edge points dedupe bit-exactly
    // across faces and the node order is independent of float rounding.
    let mut seen: HashMap<Vec<(usize, i64)>, ()> = HashMap::new();
    let mut out = Vec::new();
    for face in &faces {
        for i in 0..=f {
            for j in 0..=(f - i) {
                let k = f - i - j;
                let mut key: Vec<(usize, i64)> = [(face[0], i), (face[1], j), (face[2], k)]
                    .into_iter()
                    .filter(|&(_, w)| w > 0)
                    .collect();
                key.sort_unstable();
                if seen.contains_key(&key) {
                    continue;
                }
                seen.insert(key, ());
                let p = verts[face[0]]
                    .scaled(i as f64)
                    .add(verts[face[1]].scaled(j as f64))
                    .add(verts[face[2]].scaled(k as f64));
                let unit = p.normalized();
                if unit.z >= -1e-12 {
                    out.push(Vec3::new(unit.x, unit.y, unit.z.max(0.0)));
                }
            }
        }
    }
    out
}

/// Distribute a diffuse total over node directions by relative luminance.
pub fn distribute_diffuse(
    diffuse_total: f64,
    directions: &[Vec3],
    sun: &SolarPosition,
    params: &CieParameters,
) -> Result<Vec<f64>> {
    if directions.is_empty() {
        return Err(Error::Input("cannot distribute diffuse light over zero nodes".into()));
    }
    if diffuse_total < 0.0 {
        return Err(Error::Input(format!("negative diffuse total {diffuse_total}")));
    }
    // A sun below the horizon is treated as sitting on it; residual dusk
    // light then concentrates toward the sunset azimuth.
    let sun_zenith = sun.zenith().min(90.0);
    let weights: Vec<f64> = directions
        .iter()
        .map(|d| {
            relative_luminance(
                90.0 - d.elevation_deg(),
                sun_zenith,
                d.azimuth_deg() - sun.azimuth,
                params,
            )
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        // Cannot happen with the four tabulated parameter sets; fall back to
        // a uniform split rather than dividing by zero.
        let uniform = diffuse_total / directions.len() as f64;
        return Ok(vec![uniform; directions.len()]);
    }
    Ok(weights.into_iter().map(|w| diffuse_total * w / sum).collect())
}

/// Build an instantaneous sky dome from an irradiance split and sun position.
///
/// Diffuse light is spread over the geodesic nodes by the CIE model chosen
/// from the diffuse fraction. The direct component goes into a dedicated
/// node at the exact solar direction when `dedicated_sun` is set (and the
/// sun is up), otherwise into the nearest diffuse node.
pub fn instantaneous_sky(
    split: &IrradianceSplit,
    sun: &SolarPosition,
    resolution: usize,
    dedicated_sun: bool,
) -> Result<SkyDome> {
    let hemisphere = build_hemisphere(resolution)?;
    let params = cie_parameters(split.diffuse_fraction.clamp(0.0, 1.0))?;
    let values = distribute_diffuse(split.diffuse, &hemisphere.directions, sun, &params)?;
    let mut nodes: Vec<SkyNode> = hemisphere
        .directions
        .iter()
        .zip(values)
        .map(|(&direction, value)| SkyNode { direction, value, kind: NodeKind::Diffuse })
        .collect();

    if split.direct > 0.0 {
        if dedicated_sun && sun.elevation > 0.0 {
            nodes.push(SkyNode {
                direction: Vec3::from_az_el(sun.azimuth, sun.elevation),
                value: split.direct,
                kind: NodeKind::Sun,
            });
        } else {
            let sun_dir = Vec3::from_az_el(sun.azimuth, sun.elevation);
            let nearest = nearest_node(&nodes, sun_dir);
            nodes[nearest].value += split.direct;
        }
    }

    Ok(SkyDome {
        resolution: hemisphere.count(),
        nodes,
        mode: DomeMode::Instantaneous,
        provenance: None,
    })
}

/// Index of the node whose direction is closest to `dir`; ties break to the
/// lowest index.
fn nearest_node(nodes: &[SkyNode], dir: Vec3) -> usize {
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, n) in nodes.iter().enumerate() {
        let d = n.direction.dot(dir);
        if d > best_dot {
            best_dot = d;
            best = i;
        }
    }
    best
}

/// Integrate instantaneous skies over a time span into a composite dome of
/// per-node energy (J/m^2).
///
/// Steps run at `start`, `start + step`, ... while strictly before `end`;
/// the direct component snaps to the nearest diffuse node at every step.
pub fn composite_sky(
    series: &WeatherSeries,
    start: DateTime<Utc>,
    end: DateTime<Utc>,
    step: Duration,
    resolution: usize,
) -> Result<SkyDome> {
    if step <= Duration::zero() {
        return Err(Error::Input("composite step must be positive".into()));
    }
    if end <= start {
        return Err(Error::Input("empty composite timespan".into()));
    }
    let hemisphere = build_hemisphere(resolution)?;
    let step_seconds = step.num_milliseconds() as f64 / 1000.0;
    let mut values = vec![0.0f64; hemisphere.count()];

    let mut t = start;
    while t < end {
        let split = decompose(series, t)?;
        let sun = solar_position(&series.location, t);
        let params = cie_parameters(split.diffuse_fraction.clamp(0.0, 1.0))?;
        let mut step_values =
            distribute_diffuse(split.diffuse, &hemisphere.directions, &sun, &params)?;
        if split.direct > 0.0 {
            let sun_dir = Vec3::from_az_el(sun.azimuth, sun.elevation);
            let mut best = 0;
            let mut best_dot = f64::NEG_INFINITY;
            for (i, d) in hemisphere.directions.iter().enumerate() {
                let dot = d.dot(sun_dir);
                if dot > best_dot {
                    best_dot = dot;
                    best = i;
                }
            }
            step_values[best] += split.direct;
        }
        for (acc, v) in values.iter_mut().zip(&step_values) {
            *acc += v * step_seconds;
        }
        t += step;
    }

    let nodes = hemisphere
        .directions
        .iter()
        .zip(values)
        .map(|(&direction, value)| SkyNode { direction, value, kind: NodeKind::Diffuse })
        .collect();
    Ok(SkyDome {
        resolution: hemisphere.count(),
        nodes,
        mode: DomeMode::Composite,
        provenance: Some(Provenance {
            start,
            end,
            latitude: series.location.latitude,
            longitude: series.location.longitude,
        }),
    })
}

/// Write a dome as CSV: `azimuth_deg,elevation_deg,value,kind`.
pub fn save_dome_csv(dome: &SkyDome, path: &Path) -> Result<()> {
    let mut out = String::from("azimuth_deg,elevation_deg,value,kind\n");
    for n in &dome.nodes {
        out.push_str(&format!(
            "{},{},{},{}\n",
            n.direction.azimuth_deg(),
            n.direction.elevation_deg(),
            n.value,
            n.kind.as_str()
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    f.write_all(out.as_bytes()).map_err(|e| Error::Io { path: path.into(), source: e })
}
