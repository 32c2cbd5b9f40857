//! Geodetic coordinates, forward UTM projection and planar distance.
//!
//! The projection uses Krüger's series in the third flattening `n`, carried
//! to sixth order. Within a zone the truncation error is well under a
//! millimetre, which matters because the drafting rule works at metre scale.

use core::f64::consts::PI;

use libm::{asinh, atan2, atanh, cos, cosh, floor, sin, sinh, sqrt, tan};
use thiserror::Error;

use crate::time::Timestamp;

/// UTM scale factor on the central meridian.
pub const UTM_SCALE: f64 = 0.9996;
pub const FALSE_EASTING: f64 = 500_000.0;
pub const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

const BANDS: &[u8; 20] = b"CDEFGHJKLMNPQRSTUVWX";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside UTM coverage [-80, 84]")]
    OutOfCoverage(f64),
    #[error("longitude {0} outside [-180, 180)")]
    InvalidLongitude(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("points in different zones ({0}{1} vs {2}{3})")]
    CrossZone(u8, char, u8, char),
    #[error("invalid ellipsoid: flattening {0} not in (0, 0.01) or axis {1} not positive")]
    InvalidEllipsoid(f64, f64),
    #[error("invalid zone number {0}")]
    InvalidZone(u8),
}

/// Reference ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    semi_major_axis: f64,
    flattening: f64,
}

impl Ellipsoid {
    pub const WGS84: Ellipsoid = Ellipsoid { semi_major_axis: 6_378_137.0, flattening: 1.0 / 298.257_223_563 };

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(semi_major_axis: f64, flattening: f64) -> Result<Self, GeoError> {
        if !(flattening > 0.0 && flattening < 0.01) || !(semi_major_axis > 0.0) {
            return Err(GeoError::InvalidEllipsoid(flattening, semi_major_axis));
        }
        Ok(Ellipsoid { semi_major_axis, flattening })
    }

    pub fn semi_major_axis(&self) -> f64 {
        self.semi_major_axis
    }

    pub fn flattening(&self) -> f64 {
        self.flattening
    }

    /// First eccentricity squared.
    pub fn eccentricity_squared(&self) -> f64 {
        self.flattening * (2.0 - self.flattening)
    }
}

impl Default for Ellipsoid {
    fn default() -> Self {
        Ellipsoid::WGS84
    }
}

/// A raw GPS sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticFix {
    /// Degrees, positive north.
    pub lat: f64,
    /// Degrees, positive east.
    pub lon: f64,
    /// Metres above the ellipsoid.
    pub alt: f64,
    pub t: Timestamp,
}

impl GeodeticFix {
    pub fn new(lat: f64, lon: f64, alt: f64, t: Timestamp) -> Self {
        GeodeticFix { lat, lon, alt, t }
    }

    fn validate(&self) -> Result<(), GeoError> {
        if !self.lat.is_finite() || !self.lon.is_finite() || !self.alt.is_finite() {
            return Err(GeoError::NonFinite);
        }
        if !(-80.0..=84.0).contains(&self.lat) {
            return Err(GeoError::OutOfCoverage(self.lat));
        }
        if !(-180.0..180.0).contains(&self.lon) {
            return Err(GeoError::InvalidLongitude(self.lon));
        }
        Ok(())
    }
}

/// Metric position in a UTM zone, with the fix altitude carried along.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtmPoint {
    pub lon_zone: u8,
    pub lat_band: char,
    /// True when northings use the northern-hemisphere origin.
    pub northern: bool,
    pub east: f64,
    pub north: f64,
    pub alt: f64,
}

impl UtmPoint {
    /// A point in an already-chosen frame, for geometry built directly in
    /// metres.
    pub fn in_frame(frame: UtmFrame, east: f64, north: f64, alt: f64) -> Self {
        UtmPoint {
            lon_zone: frame.zone,
            lat_band: if frame.northern { 'N' } else { 'M' },
            northern: frame.northern,
            east,
            north,
            alt,
        }
    }

    pub fn frame(&self) -> UtmFrame {
        UtmFrame { zone: self.lon_zone, northern: self.northern }
    }
}

/// Longitude zone and latitude band of a fix, with the Norway and Svalbard
/// exceptions applied.
pub fn utm_zone(lat: f64, lon: f64) -> Result<(u8, char), GeoError> {
    let probe = GeodeticFix::new(lat, lon, 0.0, Timestamp::default());
    probe.validate()?;
    let band_idx = (floor((lat + 80.0) / 8.0) as usize).min(BANDS.len() - 1);
    let band = BANDS[band_idx] as char;
    let mut zone = (floor((lon + 180.0) / 6.0) as i32 + 1).clamp(1, 60) as u8;
    if band == 'V' && (3.0..12.0).contains(&lon) {
        zone = 32;
    }
    if band == 'X' {
        zone = match lon {
            l if (0.0..9.0).contains(&l) => 31,
            l if (9.0..21.0).contains(&l) => 33,
            l if (21.0..33.0).contains(&l) => 35,
            l if (33.0..42.0).contains(&l) => 37,
            _ => zone,
        };
    }
    Ok((zone, band))
}

/// Projects a fix into its own UTM zone.
pub fn geodetic_to_utm(fix: &GeodeticFix, ellipsoid: &Ellipsoid) -> Result<UtmPoint, GeoError> {
    fix.validate()?;
    let (zone, _) = utm_zone(fix.lat, fix.lon)?;
    UtmFrame { zone, northern: fix.lat >= 0.0 }.project(fix, ellipsoid)
}

/// Planar distance between two projected points, ignoring altitude.
pub fn euclidean_2d(a: &UtmPoint, b: &UtmPoint) -> Result<f64, GeoError> {
    if a.lon_zone != b.lon_zone || a.northern != b.northern {
        return Err(GeoError::CrossZone(a.lon_zone, a.lat_band, b.lon_zone, b.lat_band));
    }
    Ok(planar_distance(a.east, a.north, b.east, b.north))
}

#[inline]
pub(crate) fn planar_distance(e0: f64, n0: f64, e1: f64, n1: f64) -> f64 {
    let de = e1 - e0;
    let dn = n1 - n0;
    sqrt(de * de + dn * dn)
}

/// A fixed projection target: one zone and hemisphere. Course and riders
/// of a race all project through the frame of the course's first vertex,
/// even when they stray across a zone boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UtmFrame {
    pub zone: u8,
    pub northern: bool,
}

impl UtmFrame {
    pub fn new(zone: u8, northern: bool) -> Result<Self, GeoError> {
        if !(1..=60).contains(&zone) {
            return Err(GeoError::InvalidZone(zone));
        }
        Ok(UtmFrame { zone, northern })
    }

    /// The frame a fix would get on its own.
    pub fn for_fix(fix: &GeodeticFix) -> Result<Self, GeoError> {
        fix.validate()?;
        let (zone, _) = utm_zone(fix.lat, fix.lon)?;
        Ok(UtmFrame { zone, northern: fix.lat >= 0.0 })
    }

    pub fn central_meridian(&self) -> f64 {
        6.0 * self.zone as f64 - 183.0
    }

    pub fn project(&self, fix: &GeodeticFix, ellipsoid: &Ellipsoid) -> Result<UtmPoint, GeoError> {
        fix.validate()?;
        let (_, band) = utm_zone(fix.lat, fix.lon)?;
        let (x, y) = transverse_mercator(ellipsoid, self.central_meridian(), fix.lat, fix.lon);
        let north = if self.northern { y } else { y + FALSE_NORTHING_SOUTH };
        Ok(UtmPoint {
            lon_zone: self.zone,
            lat_band: band,
            northern: self.northern,
            east: FALSE_EASTING + x,
            north,
            alt: fix.alt,
        })
    }
}

/// Krüger series coefficients for one ellipsoid.
struct KruegerSeries {
    rectifying_radius: f64,
    eccentricity: f64,
    alpha: [f64; 6],
}

impl KruegerSeries {
    fn new(ellipsoid: &Ellipsoid) -> Self {
        let f = ellipsoid.flattening;
        let n = f / (2.0 - f);
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        let n5 = n4 * n;
        let n6 = n5 * n;
        let rectifying_radius = ellipsoid.semi_major_axis / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let alpha = [
            n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0 + 7891.0 * n6 / 37800.0,
            13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0 - 1983433.0 * n6 / 1935360.0,
            61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 + 167603.0 * n6 / 181440.0,
            49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
            34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
            212378941.0 * n6 / 319334400.0,
        ];
        KruegerSeries { rectifying_radius, eccentricity: sqrt(ellipsoid.eccentricity_squared()), alpha }
    }
}

/// Returns (x, y) in metres relative to the central meridian and equator,
/// already scaled by the UTM factor.
fn transverse_mercator(ellipsoid: &Ellipsoid, lon0_deg: f64, lat_deg: f64, lon_deg: f64) -> (f64, f64) {
    let series = KruegerSeries::new(ellipsoid);
    let phi = lat_deg * PI / 180.0;
    let mut dlon = lon_deg - lon0_deg;
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon < -180.0 {
        dlon += 360.0;
    }
    let lam = dlon * PI / 180.0;
    let e = series.eccentricity;

    // Conformal latitude via its tangent.
    let tau = tan(phi);
    let sigma = sinh(e * atanh(e * tau / sqrt(1.0 + tau * tau)));
    let tau_c = tau * sqrt(1.0 + sigma * sigma) - sigma * sqrt(1.0 + tau * tau);

    let cos_lam = cos(lam);
    let xi_c = atan2(tau_c, cos_lam);
    let eta_c = asinh(sin(lam) / sqrt(tau_c * tau_c + cos_lam * cos_lam));

    let mut xi = xi_c;
    let mut eta = eta_c;
    for (j, a) in series.alpha.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi += a * sin(k * xi_c) * cosh(k * eta_c);
        eta += a * cos(k * xi_c) * sinh(k * eta_c);
    }
    let scale = UTM_SCALE * series.rectifying_radius;
    (scale * eta, scale * xi)
}
