//! Surveyed reference course and nearest-point projection onto it.

use alloc::vec::Vec;

use libm::{ceil, sqrt};
use thiserror::Error;

use crate::geodesy::{planar_distance, Ellipsoid, GeoError, GeodeticFix, UtmFrame, UtmPoint};

/// Default half-width of the corridor around the course, in metres.
pub const DEFAULT_CORRIDOR_WIDTH: f64 = 15.0;
/// Longest allowed step between consecutive vertices.
pub const MAX_VERTEX_SPACING: f64 = 50.0;
/// Segments searched either side of a hint.
pub const HINT_WINDOW: usize = 200;
/// Distances this close are treated as a tie.
const TIE_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CourseError {
    #[error("degenerate course: {0} distinct vertices, need at least 2")]
    Degenerate(usize),
    #[error("point is {distance:.1} m from the course (corridor {corridor:.1} m)")]
    OffCourse { distance: f64, corridor: f64 },
    #[error("vertex in zone {found_zone} but course frame is zone {course_zone}")]
    FrameMismatch { course_zone: u8, found_zone: u8 },
    #[error("corridor width must be positive and finite, got {0}")]
    InvalidCorridor(f64),
    #[error("non-finite vertex coordinate at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Where a point lands on the course.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Path length from the start, metres.
    pub l: f64,
    /// Signed perpendicular offset from the hit segment's line; positive is
    /// left of the direction of travel.
    pub lateral: f64,
    /// Distance to the nearest point of the course.
    pub distance: f64,
    pub segment: usize,
    pub east: f64,
    pub north: f64,
}

/// Immutable polyline with cumulative arc length per vertex.
#[derive(Debug, Clone)]
pub struct Course {
    frame: UtmFrame,
    vertices: Vec<UtmPoint>,
    cum_length: Vec<f64>,
    corridor_width: f64,
}

impl Course {
    /// Builds a course from projected vertices. Zero-length steps are
    /// dropped; steps longer than 50 m are subdivided evenly.
    pub fn build(vertices: &[UtmPoint]) -> Result<Course, CourseError> {
        let first = vertices.first().ok_or(CourseError::Degenerate(0))?;
        let frame = first.frame();
        let mut kept: Vec<UtmPoint> = Vec::with_capacity(vertices.len());
        let mut cum: Vec<f64> = Vec::with_capacity(vertices.len());
        for (idx, v) in vertices.iter().enumerate() {
            if !v.east.is_finite() || !v.north.is_finite() {
                return Err(CourseError::NonFinite(idx));
            }
            if v.frame() != frame {
                return Err(CourseError::FrameMismatch { course_zone: frame.zone, found_zone: v.lon_zone });
            }
            let Some(prev) = kept.last().copied() else {
                kept.push(*v);
                cum.push(0.0);
                continue;
            };
            let step = planar_distance(prev.east, prev.north, v.east, v.north);
            if step == 0.0 {
                continue;
            }
            let pieces = ceil(step / MAX_VERTEX_SPACING).max(1.0) as usize;
            let base = *cum.last().unwrap_or(&0.0);
            for i in 1..=pieces {
                let f = i as f64 / pieces as f64;
                let p = if i == pieces {
                    *v
                } else {
                    UtmPoint {
                        east: prev.east + f * (v.east - prev.east),
                        north: prev.north + f * (v.north - prev.north),
                        alt: prev.alt + f * (v.alt - prev.alt),
                        ..*v
                    }
                };
                kept.push(p);
                cum.push(base + step * f);
            }
        }
        if kept.len() < 2 {
            return Err(CourseError::Degenerate(kept.len()));
        }
        Ok(Course { frame, vertices: kept, cum_length: cum, corridor_width: DEFAULT_CORRIDOR_WIDTH })
    }

    /// Projects geodetic survey points into the frame of the first point
    /// and builds the course.
    pub fn from_fixes(fixes: &[GeodeticFix], ellipsoid: &Ellipsoid) -> Result<Course, CourseError> {
        let first = fixes.first().ok_or(CourseError::Degenerate(0))?;
        let frame = UtmFrame::for_fix(first)?;
        let pts = fixes.iter().map(|f| frame.project(f, ellipsoid)).collect::<Result<Vec<_>, _>>()?;
        Course::build(&pts)
    }

    pub fn with_corridor_width(mut self, width: f64) -> Result<Course, CourseError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(CourseError::InvalidCorridor(width));
        }
        self.corridor_width = width;
        Ok(self)
    }

    pub fn frame(&self) -> UtmFrame {
        self.frame
    }

    pub fn vertices(&self) -> &[UtmPoint] {
        &self.vertices
    }

    pub fn cum_length(&self) -> &[f64] {
        &self.cum_length
    }

    pub fn total_length(&self) -> f64 {
        self.cum_length[self.cum_length.len() - 1]
    }

    pub fn corridor_width(&self) -> f64 {
        self.corridor_width
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Point and unit direction at path length `l` (clamped to the course).
    pub fn point_at(&self, l: f64) -> (f64, f64, f64, f64) {
        let l = l.clamp(0.0, self.total_length());
        let seg = match self.cum_length.binary_search_by(|c| c.total_cmp(&l)) {
            Ok(i) => i.min(self.segment_count() - 1),
            Err(i) => i.saturating_sub(1).min(self.segment_count() - 1),
        };
        let a = &self.vertices[seg];
        let b = &self.vertices[seg + 1];
        let len = self.cum_length[seg + 1] - self.cum_length[seg];
        let (ux, uy) = ((b.east - a.east) / len, (b.north - a.north) / len);
        let s = l - self.cum_length[seg];
        (a.east + ux * s, a.north + uy * s, ux, uy)
    }

    /// Nearest-point projection of `p` onto the course.
    ///
    /// With a hint, the search covers the segments within `HINT_WINDOW` of
    /// it, growing the window while the best hit sits on its edge. Without a
    /// hint, or when nothing in the window is inside the corridor, every
    /// segment is scanned.
    pub fn project(&self, p: &UtmPoint, hint: Option<usize>) -> Result<Projection, CourseError> {
        if p.frame() != self.frame {
            return Err(CourseError::FrameMismatch { course_zone: self.frame.zone, found_zone: p.lon_zone });
        }
        self.project_xy(p.east, p.north, hint)
    }

    pub fn project_xy(&self, east: f64, north: f64, hint: Option<usize>) -> Result<Projection, CourseError> {
        let last = self.segment_count() - 1;
        let best = match hint {
            None => self.scan(east, north, 0, last),
            Some(h) => {
                let h = h.min(last);
                let mut lo = h.saturating_sub(HINT_WINDOW);
                let mut hi = (h + HINT_WINDOW).min(last);
                loop {
                    let best = self.scan(east, north, lo, hi);
                    if best.distance > self.corridor_width {
                        break self.scan(east, north, 0, last);
                    }
                    if best.segment == lo && lo > 0 {
                        lo = lo.saturating_sub(HINT_WINDOW);
                    } else if best.segment == hi && hi < last {
                        hi = (hi + HINT_WINDOW).min(last);
                    } else {
                        break best;
                    }
                }
            }
        };
        if best.distance > self.corridor_width {
            return Err(CourseError::OffCourse { distance: best.distance, corridor: self.corridor_width });
        }
        Ok(best)
    }

    fn scan(&self, east: f64, north: f64, lo: usize, hi: usize) -> Projection {
        let min = (lo..=hi).map(|seg| self.project_segment(east, north, seg).distance).fold(f64::INFINITY, f64::min);
        // Ties go to the later segment: forward progress.
        (lo..=hi)
            .rev()
            .map(|seg| self.project_segment(east, north, seg))
            .find(|p| p.distance <= min + TIE_EPSILON)
            .expect("non-empty segment range")
    }

    fn project_segment(&self, east: f64, north: f64, seg: usize) -> Projection {
        let a = &self.vertices[seg];
        let b = &self.vertices[seg + 1];
        let dx = b.east - a.east;
        let dy = b.north - a.north;
        let len = self.cum_length[seg + 1] - self.cum_length[seg];
        let px = east - a.east;
        let py = north - a.north;
        let t = ((px * dx + py * dy) / (len * len)).clamp(0.0, 1.0);
        let cx = a.east + t * dx;
        let cy = a.north + t * dy;
        let ex = east - cx;
        let ey = north - cy;
        Projection {
            l: if t >= 1.0 - 1e-12 { self.cum_length[seg + 1] } else { self.cum_length[seg] + t * len },
            lateral: (dx * py - dy * px) / len,
            distance: sqrt(ex * ex + ey * ey),
            segment: seg,
            east: cx,
            north: cy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn frame() -> UtmFrame {
        UtmFrame::new(33, true).unwrap()
    }

    fn pt(e: f64, n: f64) -> UtmPoint {
        UtmPoint::in_frame(frame(), 500_000.0 + e, 5_000_000.0 + n, 0.0)
    }

    #[test]
    fn two_vertices() {
        let c = Course::build(&[pt(0.0, 0.0), pt(10.0, 0.0)]).unwrap();
        assert_eq!(c.total_length(), 10.0);
    }

    #[test]
    fn colinear_fourteen() {
        let v: Vec<_> = (0..14).map(|i| pt(i as f64, 0.0)).collect();
        let c = Course::build(&v).unwrap();
        assert_eq!(c.total_length(), 13.0);
        assert_eq!(c.cum_length()[0], 0.0);
    }

    #[test]
    fn degenerate() {
        assert_eq!(Course::build(&[pt(1.0, 1.0)]).unwrap_err(), CourseError::Degenerate(1));
        assert_eq!(Course::build(&[pt(1.0, 1.0), pt(1.0, 1.0)]).unwrap_err(), CourseError::Degenerate(1));
        assert_eq!(Course::build(&[]).unwrap_err(), CourseError::Degenerate(0));
    }

    #[test]
    fn zero_steps_dropped_long_steps_split() {
        let c = Course::build(&[pt(0.0, 0.0), pt(0.0, 0.0), pt(120.0, 0.0)]).unwrap();
        assert_eq!(c.total_length(), 120.0);
        assert_eq!(c.segment_count(), 3);
        for w in c.cum_length().windows(2) {
            assert!(w[1] - w[0] > 0.0 && w[1] - w[0] <= MAX_VERTEX_SPACING);
        }
    }

    #[test]
    fn frame_mismatch_rejected() {
        let other = UtmPoint::in_frame(UtmFrame::new(34, true).unwrap(), 500_000.0, 0.0, 0.0);
        assert!(matches!(Course::build(&[pt(0.0, 0.0), other]), Err(CourseError::FrameMismatch { .. })));
    }

    #[test]
    fn vertex_self_projection() {
        let c = Course::build(&[pt(0.0, 0.0), pt(10.0, 0.0), pt(20.0, 5.0)]).unwrap();
        for k in 0..3 {
            let v = c.vertices()[k];
            let p = c.project(&v, None).unwrap();
            assert_eq!(p.l, c.cum_length()[k]);
            assert_eq!(p.lateral, 0.0);
        }
    }

    #[test]
    fn perpendicular_left_of_midpoint() {
        // Straight course with the 10 m segment of interest starting at l = 100.
        let c = Course::build(&[pt(0.0, 0.0), pt(50.0, 0.0), pt(100.0, 0.0), pt(110.0, 0.0), pt(150.0, 0.0)]).unwrap();
        let p = c.project(&pt(105.0, 1.0), None).unwrap();
        assert_eq!(p.l, 105.0);
        assert_eq!(p.lateral, 1.0);
        let r = c.project(&pt(105.0, -1.0), Some(0)).unwrap();
        assert_eq!(r.lateral, -1.0);
    }

    #[test]
    fn endpoints_clamp() {
        let c = Course::build(&[pt(0.0, 0.0), pt(10.0, 0.0)]).unwrap();
        assert_eq!(c.project(&pt(12.0, 0.5), None).unwrap().l, 10.0);
        assert_eq!(c.project(&pt(-3.0, 0.0), None).unwrap().l, 0.0);
    }

    #[test]
    fn off_course() {
        let c = Course::build(&[pt(0.0, 0.0), pt(10.0, 0.0)]).unwrap();
        assert!(matches!(c.project(&pt(5.0, 16.0), None), Err(CourseError::OffCourse { .. })));
        let narrow = c.with_corridor_width(20.0).unwrap();
        assert!(narrow.project(&pt(5.0, 16.0), None).is_ok());
    }

    #[test]
    fn hairpin_tie_prefers_later_segment() {
        // Out 20 m east, back 20 m west 4 m north: midpoint is equidistant.
        let c = Course::build(&[pt(0.0, 0.0), pt(20.0, 0.0), pt(20.0, 4.0), pt(0.0, 4.0)]).unwrap();
        let p = c.project(&pt(10.0, 2.0), None).unwrap();
        assert_eq!(p.segment, 2);
        assert!((p.l - 34.0).abs() < 1e-9);
    }

    #[test]
    fn crossover_resolved_by_hint() {
        // Figure-eight style: the long segment 0 is crossed again by a
        // segment thousands of indices later.
        let step = 2.5;
        let mut v = vec![pt(0.0, 0.0)];
        for i in 1..=400 {
            v.push(pt(i as f64 * step, 0.0));
        }
        // Loop up and come back down across x = 500.
        for i in 1..=200 {
            v.push(pt(1000.0, i as f64 * step));
        }
        for i in 1..=200 {
            v.push(pt(1000.0 - i as f64 * step, 500.0));
        }
        for i in 1..=400 {
            v.push(pt(500.0, 500.0 - i as f64 * step));
        }
        let c = Course::build(&v).unwrap();
        let cross = pt(500.0, 0.0);
        let early = c.project(&cross, Some(19)).unwrap();
        assert!((early.l - 500.0).abs() < 1e-9);
        let late = c.project(&cross, Some(c.segment_count() - 1)).unwrap();
        assert!(late.l > 2000.0);
    }

    #[test]
    fn point_at_roundtrip() {
        let c = Course::build(&[pt(0.0, 0.0), pt(30.0, 0.0), pt(30.0, 40.0)]).unwrap();
        let (e, n, ux, uy) = c.point_at(50.0);
        assert!((e - 500_030.0).abs() < 1e-9 && (n - 5_000_020.0).abs() < 1e-9);
        assert_eq!((ux, uy), (0.0, 1.0));
        let (e, _, _, _) = c.point_at(1e9);
        assert_eq!(e, 500_030.0);
    }
}
