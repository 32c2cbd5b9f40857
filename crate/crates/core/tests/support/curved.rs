#![allow(dead_code)]

use draftwatch_core::{Course, UtmFrame, UtmPoint};

/// A winding course of `length` metres made of 5 m chords. The heading
/// swings +-0.6 rad around east, so the course never doubles back.
pub fn curved_course(length: f64) -> Course {
    let frame = UtmFrame::new(33, true).unwrap();
    let (mut e, mut n) = (540_000.0, 5_150_000.0);
    let mut pts = vec![UtmPoint::in_frame(frame, e, n, 0.0)];
    let mut s = 0.0;
    while s < length {
        let step = 5.0f64.min(length - s);
        let heading = 0.6 * (2.0 * std::f64::consts::PI * (s + step / 2.0) / 1000.0).sin();
        e += step * heading.cos();
        n += step * heading.sin();
        s += step;
        pts.push(UtmPoint::in_frame(frame, e, n, 0.0));
    }
    Course::build(&pts).unwrap()
}

/// Exhaustive nearest-segment search: smallest distance, ties within 1 mm
/// to the later segment. Returns (segment, l, distance).
pub fn brute_force_nearest(course: &Course, e: f64, n: f64) -> (usize, f64, f64) {
    let v = course.vertices();
    let cum = course.cum_length();
    let mut hits = Vec::new();
    for k in 0..v.len() - 1 {
        let (ax, ay, bx, by) = (v[k].east, v[k].north, v[k + 1].east, v[k + 1].north);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let t = (((e - ax) * dx + (n - ay) * dy) / len2).clamp(0.0, 1.0);
        let (cx, cy) = (ax + t * dx, ay + t * dy);
        let d = ((e - cx).powi(2) + (n - cy).powi(2)).sqrt();
        hits.push((k, cum[k] + t * len2.sqrt(), d));
    }
    let min = hits.iter().map(|h| h.2).fold(f64::INFINITY, f64::min);
    *hits.iter().rev().find(|h| h.2 <= min + 1e-3).unwrap()
}
