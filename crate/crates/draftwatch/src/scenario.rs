//! Scripted races: a generated course plus rider tracks that follow
//! piecewise speed and lateral-offset scripts, with optional Gaussian
//! position noise.

use draftwatch_core::{Course, Ellipsoid, GeoError, GeodeticFix, RiderId, Timestamp, UtmFrame, UtmPoint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iso;
use crate::track::Track;

/// Constant speed and lateral offset for `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub duration: f64,
    pub speed: f64,
    /// Metres left of the course line; negative is right.
    #[serde(default)]
    pub lateral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiderScript {
    pub rider: u32,
    /// Seconds after the scenario start at which this rider sets off.
    #[serde(default)]
    pub start_delay: f64,
    pub phases: Vec<Phase>,
}

/// Course geometry: chords of `spacing` metres whose heading swings by
/// `amplitude` radians over each `wavelength` metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CourseShape {
    pub spacing: f64,
    pub amplitude: f64,
    pub wavelength: f64,
    /// Initial heading, radians counter-clockwise from east.
    pub heading: f64,
}

impl Default for CourseShape {
    fn default() -> Self {
        CourseShape { spacing: 5.0, amplitude: 0.3, wavelength: 1200.0, heading: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub course_length: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub start_time: String,
    /// Standard deviation of the per-axis position noise, metres.
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub course_shape: CourseShape,
    pub riders: Vec<RiderScript>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("rider {rider}: phase {phase} starts at {at_l:.1} m, past the {length:.1} m course")]
    Truncated { rider: u32, phase: usize, at_l: f64, length: f64 },
    #[error("unknown builtin scenario {0:?}")]
    UnknownBuiltin(String),
    #[error("scenario file: {0}")]
    Toml(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("could not invert projection near ({east:.1}, {north:.1})")]
    Inversion { east: f64, north: f64 },
}

/// Per-rider facts about a synthesized track.
#[derive(Debug, Clone, PartialEq)]
pub struct RiderSummary {
    pub rider: RiderId,
    pub start_delay: f64,
    pub samples: usize,
    /// Scenario-clock seconds of the last sample.
    pub last_offset: f64,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub course: Track,
    pub riders: Vec<Track>,
    pub course_length: f64,
    pub summary: Vec<RiderSummary>,
}

impl ScenarioSpec {
    pub fn builtin(name: &str) -> Result<ScenarioSpec, ScenarioError> {
        match name {
            "fig5" => Ok(fig5()),
            "solo" => Ok(solo()),
            _ => Err(ScenarioError::UnknownBuiltin(name.to_string())),
        }
    }

    pub fn from_toml(text: &str) -> Result<ScenarioSpec, ScenarioError> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| ScenarioError::Toml(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario spec serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.course_length.is_finite() && self.course_length > 0.0) {
            return bad(format!("course_length {} must be positive", self.course_length));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std {} must be non-negative", self.noise_std));
        }
        let sh = self.course_shape;
        if !(sh.spacing.is_finite() && sh.spacing > 0.0 && sh.spacing <= 50.0) {
            return bad(format!("course spacing {} must be in (0, 50]", sh.spacing));
        }
        if !(sh.amplitude.is_finite() && sh.wavelength.is_finite() && sh.wavelength > 0.0 && sh.heading.is_finite()) {
            return bad("course shape must be finite with positive wavelength".into());
        }
        if iso::parse(&self.start_time).is_none() {
            return bad(format!("start_time {:?} is not ISO-8601", self.start_time));
        }
        if self.riders.is_empty() {
            return bad("no riders".into());
        }
        for (i, r) in self.riders.iter().enumerate() {
            if self.riders[..i].iter().any(|o| o.rider == r.rider) {
                return bad(format!("rider {} listed twice", r.rider));
            }
            if !(r.start_delay.is_finite() && r.start_delay >= 0.0) {
                return bad(format!("rider {}: start_delay must be non-negative", r.rider));
            }
            if r.phases.is_empty() {
                return bad(format!("rider {}: no phases", r.rider));
            }
            for (k, p) in r.phases.iter().enumerate() {
                if !(p.duration.is_finite() && p.duration > 0.0) {
                    return bad(format!("rider {} phase {k}: duration must be positive", r.rider));
                }
                if !(0.0..=25.0).contains(&p.speed) {
                    return bad(format!("rider {} phase {k}: speed {} outside [0, 25] m/s", r.rider, p.speed));
                }
                if !p.lateral.is_finite() {
                    return bad(format!("rider {} phase {k}: lateral must be finite", r.rider));
                }
            }
        }
        Ok(())
    }
}

/// Path length and lateral offset of a script at `tau` seconds after the
/// rider's start. At a phase boundary the later phase's offset applies.
fn script_state(phases: &[Phase], tau: f64) -> (f64, f64) {
    let mut t0 = 0.0;
    let mut l0 = 0.0;
    for (k, p) in phases.iter().enumerate() {
        let t1 = t0 + p.duration;
        if tau < t1 || k + 1 == phases.len() {
            let dt = (tau - t0).clamp(0.0, p.duration);
            return (l0 + dt * p.speed, p.lateral);
        }
        t0 = t1;
        l0 += p.duration * p.speed;
    }
    (l0, 0.0)
}

/// Generates the course and rider tracks. The same spec and seed always
/// give bit-identical output.
pub fn synthesize(spec: &ScenarioSpec, seed: u64) -> Result<Scenario, ScenarioError> {
    spec.validate()?;
    let ell = Ellipsoid::WGS84;
    let epoch = iso::parse(&spec.start_time).expect("validated");
    let origin = GeodeticFix::new(spec.origin_lat, spec.origin_lon, 0.0, epoch);
    let frame = UtmFrame::for_fix(&origin)?;
    let o = frame.project(&origin, &ell)?;

    let plane = course_plane(spec, o.east, o.north);
    let points: Vec<UtmPoint> = plane.iter().map(|&(e, n)| UtmPoint::in_frame(frame, e, n, 0.0)).collect();
    let course = Course::build(&points).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let length = course.total_length();

    let mut inv = Inverter { frame, ell, guess: (spec.origin_lat, spec.origin_lon) };
    let mut survey = Vec::with_capacity(plane.len());
    for (k, &(e, n)) in plane.iter().enumerate() {
        let (lat, lon) = inv.invert(e, n)?;
        survey.push(GeodeticFix::new(lat, lon, 0.0, epoch + k as i64 * 1000));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let mut riders = Vec::with_capacity(spec.riders.len());
    let mut summary = Vec::with_capacity(spec.riders.len());
    for script in &spec.riders {
        check_truncation(script, length)?;
        let total: f64 = script.phases.iter().map(|p| p.duration).sum();
        let mut samples = Vec::new();
        let mut finished = false;
        let mut last_offset = script.start_delay;
        inv.guess = (spec.origin_lat, spec.origin_lon);
        let mut k = 0u64;
        while k as f64 <= total + 1e-9 {
            let tau = k as f64;
            let (l, lateral) = script_state(&script.phases, tau);
            let l = l.min(length);
            let (e, n, ux, uy) = course.point_at(l);
            let mut east = e - lateral * uy;
            let mut north = n + lateral * ux;
            if spec.noise_std > 0.0 {
                east += noise.sample(&mut rng);
                north += noise.sample(&mut rng);
            }
            let (lat, lon) = inv.invert(east, north)?;
            last_offset = script.start_delay + tau;
            let t = epoch + (last_offset * 1000.0).round() as i64;
            samples.push(GeodeticFix::new(lat, lon, 0.0, t));
            if l >= length - 1e-6 {
                finished = true;
                break;
            }
            k += 1;
        }
        summary.push(RiderSummary {
            rider: RiderId(script.rider),
            start_delay: script.start_delay,
            samples: samples.len(),
            last_offset,
            finished,
        });
        riders.push(Track::new(Some(RiderId(script.rider)), Some(format!("rider {}", script.rider)), samples));
    }

    Ok(Scenario {
        course: Track::new(None, Some(format!("{} course", spec.name)), survey),
        riders,
        course_length: length,
        summary,
    })
}

fn check_truncation(script: &RiderScript, length: f64) -> Result<(), ScenarioError> {
    let mut l = 0.0;
    for (k, p) in script.phases.iter().enumerate() {
        if k > 0 && l >= length - 1e-6 {
            return Err(ScenarioError::Truncated { rider: script.rider, phase: k, at_l: l, length });
        }
        l += p.duration * p.speed;
    }
    Ok(())
}

fn course_plane(spec: &ScenarioSpec, e0: f64, n0: f64) -> Vec<(f64, f64)> {
    let sh = spec.course_shape;
    let heading = |s: f64| sh.heading + sh.amplitude * (std::f64::consts::TAU * s / sh.wavelength).sin();
    let mut out = vec![(e0, n0)];
    let (mut e, mut n, mut s) = (e0, n0, 0.0);
    while s < spec.course_length - 1e-9 {
        let step = sh.spacing.min(spec.course_length - s);
        let h = heading(s + step / 2.0);
        e += step * h.cos();
        n += step * h.sin();
        s += step;
        out.push((e, n));
    }
    out
}

/// Newton iteration on the forward projection, warm-started from the
/// previous solution.
struct Inverter {
    frame: UtmFrame,
    ell: Ellipsoid,
    guess: (f64, f64),
}

impl Inverter {
    fn forward(&self, lat: f64, lon: f64) -> Result<(f64, f64), ScenarioError> {
        let p = self.frame.project(&GeodeticFix::new(lat, lon, 0.0, Timestamp(0)), &self.ell)?;
        Ok((p.east, p.north))
    }

    fn invert(&mut self, east: f64, north: f64) -> Result<(f64, f64), ScenarioError> {
        const H: f64 = 1e-6;
        let (mut lat, mut lon) = self.guess;
        for _ in 0..30 {
            let (e, n) = self.forward(lat, lon)?;
            let (re, rn) = (east - e, north - n);
            if re.hypot(rn) < 1e-7 {
                self.guess = (lat, lon);
                return Ok((lat, lon));
            }
            let (e_lat, n_lat) = self.forward(lat + H, lon)?;
            let (e_lon, n_lon) = self.forward(lat, lon + H)?;
            let (a, b) = ((e_lat - e) / H, (e_lon - e) / H);
            let (c, d) = ((n_lat - n) / H, (n_lon - n) / H);
            let det = a * d - b * c;
            if det == 0.0 || !det.is_finite() {
                break;
            }
            lat += (d * re - b * rn) / det;
            lon += (a * rn - c * re) / det;
        }
        Err(ScenarioError::Inversion { east, north })
    }
}

const FIG5_LENGTH: f64 = 3332.0;

/// Two riders on a flat 3332 m course. A starts first; B starts 20 s
/// later, closes onto A at 2:31 and sits 5 m behind until 3:22, then
/// passes and leads by 25 m. A closes back in at 6:10, sits in B's zone
/// until 7:16, passes, and finishes at 8:54, 12 s ahead of B on the clock
/// and 8 s slower in elapsed time.
fn fig5() -> ScenarioSpec {
    let v2 = 200.0 / 31.0;
    let a_head = [(151.0, 6.0, 0.0), (209.0, v2, 0.0), (10.0, v2 + 2.0, 1.5), (66.0, v2, 0.0)];
    let a_l: f64 = a_head.iter().map(|p| p.0 * p.1).sum();
    let a_end = (FIG5_LENGTH - a_l) / 98.0;
    let mut a = a_head.to_vec();
    a.extend([(18.0, a_end, 1.5), (80.0, a_end, 0.0)]);

    let b1 = 901.0 / 131.0;
    let b_head = [
        (121.0, b1, 0.0),
        (10.0, b1, 1.5),
        (51.0, v2, 0.0),
        (10.0, v2 + 1.5, 1.5),
        (10.0, v2 + 1.5, 0.0),
        (214.0, v2, 0.0),
    ];
    let b_l: f64 = b_head.iter().map(|p| p.0 * p.1).sum();
    let mut b = b_head.to_vec();
    b.push((110.0, (FIG5_LENGTH - b_l) / 110.0, 0.0));

    let phases = |ps: Vec<(f64, f64, f64)>| {
        ps.into_iter().map(|(duration, speed, lateral)| Phase { duration, speed, lateral }).collect()
    };
    ScenarioSpec {
        name: "fig5".into(),
        course_length: FIG5_LENGTH,
        origin_lat: 46.5547,
        origin_lon: 15.6459,
        start_time: "2011-07-10T08:00:00Z".into(),
        noise_std: 0.0,
        course_shape: CourseShape::default(),
        riders: vec![
            RiderScript { rider: 1, start_delay: 0.0, phases: phases(a) },
            RiderScript { rider: 2, start_delay: 20.0, phases: phases(b) },
        ],
    }
}

/// One rider at 10 m/s over 100 m.
fn solo() -> ScenarioSpec {
    ScenarioSpec {
        name: "solo".into(),
        course_length: 100.0,
        origin_lat: 46.5547,
        origin_lon: 15.6459,
        start_time: "2011-07-10T08:00:00Z".into(),
        noise_std: 0.0,
        course_shape: CourseShape::default(),
        riders: vec![RiderScript {
            rider: 1,
            start_delay: 0.0,
            phases: vec![Phase { duration: 10.0, speed: 10.0, lateral: 0.0 }],
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_boundaries() {
        let ps =
            [Phase { duration: 10.0, speed: 2.0, lateral: 1.0 }, Phase { duration: 5.0, speed: 4.0, lateral: -1.0 }];
        assert_eq!(script_state(&ps, 0.0), (0.0, 1.0));
        assert_eq!(script_state(&ps, 10.0), (20.0, -1.0));
        assert_eq!(script_state(&ps, 15.0), (40.0, -1.0));
        assert_eq!(script_state(&ps, 99.0), (40.0, -1.0));
    }

    #[test]
    fn fig5_distances_close() {
        let spec = fig5();
        spec.validate().unwrap();
        for r in &spec.riders {
            let total: f64 = r.phases.iter().map(|p| p.duration * p.speed).sum();
            assert!((total - FIG5_LENGTH).abs() < 1e-9, "{total}");
        }
    }

    #[test]
    fn truncation_detected() {
        let mut spec = solo();
        spec.riders[0].phases.push(Phase { duration: 5.0, speed: 3.0, lateral: 0.0 });
        assert!(matches!(synthesize(&spec, 1), Err(ScenarioError::Truncated { phase: 1, .. })));
    }

    #[test]
    fn invalid_speed() {
        let mut spec = solo();
        spec.riders[0].phases[0].speed = 30.0;
        assert!(matches!(spec.validate(), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn toml_round_trip() {
        let spec = fig5();
        assert_eq!(ScenarioSpec::from_toml(&spec.to_toml()).unwrap(), spec);
    }
}
