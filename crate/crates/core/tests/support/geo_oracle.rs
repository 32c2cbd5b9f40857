//! Reference geodesy written independently of the crate: the Thomas
//! power series in longitude difference (the form used by TM8358.2) with
//! the meridian arc integrated numerically, plus Vincenty's inverse and
//! direct solutions for ground distances.

#![allow(dead_code)]

use std::f64::consts::PI;

pub const A: f64 = 6_378_137.0;
pub const F: f64 = 1.0 / 298.257_223_563;
const K0: f64 = 0.9996;

fn e2() -> f64 {
    F * (2.0 - F)
}

/// Meridian arc from the equator by composite Simpson quadrature.
pub fn meridian_arc(phi: f64) -> f64 {
    let e2 = e2();
    let m = |x: f64| A * (1.0 - e2) / (1.0 - e2 * x.sin().powi(2)).powf(1.5);
    let n = 4000;
    let h = phi / n as f64;
    let mut sum = m(0.0) + m(phi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * m(i as f64 * h);
    }
    sum * h / 3.0
}

/// UTM easting/northing by the Thomas series. Northern hemisphere unless
/// `lat` is negative, in which case the 10 000 km false northing applies.
pub fn thomas_utm(lat_deg: f64, lon_deg: f64, lon0_deg: f64) -> (f64, f64) {
    let e2 = e2();
    let ep2 = e2 / (1.0 - e2);
    let phi = lat_deg.to_radians();
    let p = (lon_deg - lon0_deg).to_radians();
    let (s, c, t) = (phi.sin(), phi.cos(), phi.tan());
    let nu = A / (1.0 - e2 * s * s).sqrt();
    let n2 = ep2 * c * c;
    let t2 = t * t;
    let t4 = t2 * t2;
    let t6 = t4 * t2;

    let t1 = meridian_arc(phi) * K0;
    let t_2 = nu * s * c * K0 / 2.0;
    let t_3 = nu * s * c.powi(3) * K0 / 24.0 * (5.0 - t2 + 9.0 * n2 + 4.0 * n2 * n2);
    let t_4 = nu * s * c.powi(5) * K0 / 720.0
        * (61.0 - 58.0 * t2 + t4 + 270.0 * n2 - 330.0 * t2 * n2 + 445.0 * n2.powi(2) + 324.0 * n2.powi(3)
            - 680.0 * t2 * n2.powi(2)
            + 88.0 * n2.powi(4)
            - 600.0 * t2 * n2.powi(3)
            - 192.0 * t2 * n2.powi(4));
    let t_5 = nu * s * c.powi(7) * K0 / 40320.0 * (1385.0 - 3111.0 * t2 + 543.0 * t4 - t6);
    let north = t1 + p.powi(2) * t_2 + p.powi(4) * t_3 + p.powi(6) * t_4 + p.powi(8) * t_5;

    let t_6 = nu * c * K0;
    let t_7 = nu * c.powi(3) * K0 / 6.0 * (1.0 - t2 + n2);
    let t_8 = nu * c.powi(5) * K0 / 120.0
        * (5.0 - 18.0 * t2 + t4 + 14.0 * n2 - 58.0 * t2 * n2 + 13.0 * n2.powi(2) + 4.0 * n2.powi(3)
            - 64.0 * t2 * n2.powi(2)
            - 24.0 * t2 * n2.powi(3));
    let t_9 = nu * c.powi(7) * K0 / 5040.0 * (61.0 - 479.0 * t2 + 179.0 * t4 - t6);
    let east = 500_000.0 + p * t_6 + p.powi(3) * t_7 + p.powi(5) * t_8 + p.powi(7) * t_9;
    let north = if lat_deg < 0.0 { north + 10_000_000.0 } else { north };
    (east, north)
}

/// Vincenty inverse: ground distance in metres.
pub fn vincenty_inverse(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let b = A * (1.0 - F);
    let l = (lon2 - lon1).to_radians();
    let u1 = ((1.0 - F) * lat1.to_radians().tan()).atan();
    let u2 = ((1.0 - F) * lat2.to_radians().tan()).atan();
    let (su1, cu1) = u1.sin_cos();
    let (su2, cu2) = u2.sin_cos();
    let mut lambda = l;
    for _ in 0..200 {
        let (sl, cl) = lambda.sin_cos();
        let sin_sigma = ((cu2 * sl).powi(2) + (cu1 * su2 - su1 * cu2 * cl).powi(2)).sqrt();
        if sin_sigma == 0.0 {
            return 0.0;
        }
        let cos_sigma = su1 * su2 + cu1 * cu2 * cl;
        let sigma = sin_sigma.atan2(cos_sigma);
        let sin_alpha = cu1 * cu2 * sl / sin_sigma;
        let cos2_alpha = 1.0 - sin_alpha * sin_alpha;
        let cos_2sm = if cos2_alpha != 0.0 { cos_sigma - 2.0 * su1 * su2 / cos2_alpha } else { 0.0 };
        let c = F / 16.0 * cos2_alpha * (4.0 + F * (4.0 - 3.0 * cos2_alpha));
        let prev = lambda;
        lambda = l
            + (1.0 - c)
                * F
                * sin_alpha
                * (sigma + c * sin_sigma * (cos_2sm + c * cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)));
        if (lambda - prev).abs() < 1e-13 {
            let u_sq = cos2_alpha * (A * A - b * b) / (b * b);
            let big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
            let big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
            let d_sigma = big_b
                * sin_sigma
                * (cos_2sm
                    + big_b / 4.0
                        * (cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)
                            - big_b / 6.0
                                * cos_2sm
                                * (-3.0 + 4.0 * sin_sigma * sin_sigma)
                                * (-3.0 + 4.0 * cos_2sm * cos_2sm)));
            return b * big_a * (sigma - d_sigma);
        }
    }
    panic!("vincenty inverse did not converge");
}

/// Vincenty direct: destination after `dist` metres on `azimuth_deg`.
pub fn vincenty_direct(lat: f64, lon: f64, azimuth_deg: f64, dist: f64) -> (f64, f64) {
    let b = A * (1.0 - F);
    let alpha1 = azimuth_deg.to_radians();
    let (sa1, ca1) = alpha1.sin_cos();
    let tan_u1 = (1.0 - F) * lat.to_radians().tan();
    let cu1 = 1.0 / (1.0 + tan_u1 * tan_u1).sqrt();
    let su1 = tan_u1 * cu1;
    let sigma1 = tan_u1.atan2(ca1);
    let sin_alpha = cu1 * sa1;
    let cos2_alpha = 1.0 - sin_alpha * sin_alpha;
    let u_sq = cos2_alpha * (A * A - b * b) / (b * b);
    let big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
    let big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
    let mut sigma = dist / (b * big_a);
    let (mut sin_s, mut cos_s, mut cos_2sm);
    loop {
        cos_2sm = (2.0 * sigma1 + sigma).cos();
        sin_s = sigma.sin();
        cos_s = sigma.cos();
        let d_sigma = big_b
            * sin_s
            * (cos_2sm
                + big_b / 4.0
                    * (cos_s * (-1.0 + 2.0 * cos_2sm * cos_2sm)
                        - big_b / 6.0 * cos_2sm * (-3.0 + 4.0 * sin_s * sin_s) * (-3.0 + 4.0 * cos_2sm * cos_2sm)));
        let next = dist / (b * big_a) + d_sigma;
        if (next - sigma).abs() < 1e-14 {
            sigma = next;
            break;
        }
        sigma = next;
    }
    let x = su1 * sin_s - cu1 * cos_s * ca1;
    let lat2 = (su1 * cos_s + cu1 * sin_s * ca1).atan2((1.0 - F) * (sin_alpha * sin_alpha + x * x).sqrt());
    let lambda = (sin_s * sa1).atan2(cu1 * cos_s - su1 * sin_s * ca1);
    let c = F / 16.0 * cos2_alpha * (4.0 + F * (4.0 - 3.0 * cos2_alpha));
    let l = lambda
        - (1.0 - c) * F * sin_alpha * (sigma + c * sin_s * (cos_2sm + c * cos_s * (-1.0 + 2.0 * cos_2sm * cos_2sm)));
    (lat2 * 180.0 / PI, lon + l * 180.0 / PI)
}
