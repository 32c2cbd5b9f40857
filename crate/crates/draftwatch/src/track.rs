//! Track files: GPX 1.1-shaped XML and a line-oriented text fallback.
//!
//! GPX: `gpx > trk > trkseg > trkpt[lat, lon] > (ele?, time)`. The rider is
//! read from the track's `<number>` element. Text: one fix per line,
//! `rider, time, lat, lon[, alt]`, with `#` comments and blank lines
//! ignored; fixes are grouped into one track per rider in order of first
//! appearance.

use std::fmt::Write as _;

use draftwatch_core::{GeodeticFix, RiderId, Timestamp};
use thiserror::Error;

use crate::iso;

/// One recorded or synthesized trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub name: Option<String>,
    pub rider: Option<RiderId>,
    pub samples: Vec<GeodeticFix>,
}

impl Track {
    pub fn new(rider: Option<RiderId>, name: Option<String>, samples: Vec<GeodeticFix>) -> Self {
        Track { name, rider, samples }
    }

    pub fn start(&self) -> Option<Timestamp> {
        self.samples.first().map(|s| s.t)
    }

    pub fn end(&self) -> Option<Timestamp> {
        self.samples.last().map(|s| s.t)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("byte {offset}: input is not valid UTF-8")]
    Encoding { offset: usize },
    #[error("malformed XML: {message}")]
    Xml { line: u32, col: u32, message: String },
    #[error("root element is <{root}>, expected <gpx>")]
    NotGpx { line: u32, root: String },
    #[error("document contains no tracks")]
    NoTracks,
    #[error("point has no {attr} attribute")]
    MissingCoordinate { line: u32, attr: &'static str },
    #[error("bad {field} value {value:?}")]
    BadNumber { line: u32, field: &'static str, value: String },
    #[error("coordinate ({lat}, {lon}) out of range")]
    CoordinateRange { line: u32, lat: f64, lon: f64 },
    #[error("point has no time")]
    MissingTime { line: u32 },
    #[error("unreadable time {value:?}")]
    BadTime { line: u32, value: String },
    #[error("track {track} point {point} at {got} does not follow {prev}")]
    Ordering { line: u32, track: usize, point: usize, prev: String, got: String },
    #[error("track {track} has {count} point(s), need at least {min}")]
    TooFewSamples { track: usize, count: usize, min: usize },
    #[error("{message}")]
    MalformedLine { line: u32, message: String },
}

impl TrackError {
    /// Stable name of the error class.
    pub fn class(&self) -> &'static str {
        match self {
            TrackError::Encoding { .. } => "encoding",
            TrackError::Xml { .. } => "xml",
            TrackError::NotGpx { .. } => "not_gpx",
            TrackError::NoTracks => "no_tracks",
            TrackError::MissingCoordinate { .. } => "missing_coordinate",
            TrackError::BadNumber { .. } => "bad_number",
            TrackError::CoordinateRange { .. } => "coordinate_range",
            TrackError::MissingTime { .. } => "missing_time",
            TrackError::BadTime { .. } => "bad_time",
            TrackError::Ordering { .. } => "ordering",
            TrackError::TooFewSamples { .. } => "too_few_samples",
            TrackError::MalformedLine { .. } => "malformed_line",
        }
    }

    /// `source:line[:col]: message`, or `source: message` when the error
    /// has no position.
    pub fn located(&self, source: &str) -> String {
        match (self, self.line()) {
            (TrackError::Xml { col, .. }, Some(line)) => format!("{source}:{line}:{col}: {self}"),
            (_, Some(line)) => format!("{source}:{line}: {self}"),
            _ => format!("{source}: {self}"),
        }
    }

    /// 1-based source line, when the error has one.
    pub fn line(&self) -> Option<u32> {
        match self {
            TrackError::Xml { line, .. }
            | TrackError::NotGpx { line, .. }
            | TrackError::MissingCoordinate { line, .. }
            | TrackError::BadNumber { line, .. }
            | TrackError::CoordinateRange { line, .. }
            | TrackError::MissingTime { line }
            | TrackError::BadTime { line, .. }
            | TrackError::Ordering { line, .. }
            | TrackError::MalformedLine { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Parses every track in a GPX or text document. Each track needs at
/// least two samples with strictly increasing times.
pub fn parse_tracks(bytes: &[u8]) -> Result<Vec<Track>, TrackError> {
    parse_with(bytes, 2)
}

/// Parses the first track of a course survey. Only one point is required
/// here so that a degenerate course reaches the course builder and is
/// reported by it.
pub fn parse_survey(bytes: &[u8]) -> Result<Track, TrackError> {
    let mut tracks = parse_with(bytes, 1)?;
    Ok(tracks.swap_remove(0))
}

fn parse_with(bytes: &[u8], min_samples: usize) -> Result<Vec<Track>, TrackError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TrackError::Encoding { offset: e.valid_up_to() })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let tracks = if text.trim_start().starts_with('<') { parse_gpx(text)? } else { parse_text(text)? };
    if tracks.is_empty() {
        return Err(TrackError::NoTracks);
    }
    for (i, t) in tracks.iter().enumerate() {
        if t.samples.len() < min_samples {
            return Err(TrackError::TooFewSamples { track: i, count: t.samples.len(), min: min_samples });
        }
    }
    Ok(tracks)
}

fn parse_gpx(text: &str) -> Result<Vec<Track>, TrackError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        TrackError::Xml { line: pos.row, col: pos.col, message: e.to_string() }
    })?;
    let line_of = |n: roxmltree::Node| doc.text_pos_at(n.range().start).row;
    let root = doc.root_element();
    if root.tag_name().name() != "gpx" {
        return Err(TrackError::NotGpx { line: line_of(root), root: root.tag_name().name().to_string() });
    }

    let mut tracks = Vec::new();
    for trk in root.children().filter(|n| n.has_tag_name("trk")) {
        let index = tracks.len();
        let mut track = Track::new(None, None, Vec::new());
        let mut tail = None;
        for child in trk.children().filter(|n| n.is_element()) {
            match child.tag_name().name() {
                "name" => track.name = Some(child.text().unwrap_or("").trim().to_string()),
                "number" => {
                    let raw = child.text().unwrap_or("").trim();
                    let id = raw.parse::<u32>().map_err(|_| TrackError::BadNumber {
                        line: line_of(child),
                        field: "number",
                        value: raw.to_string(),
                    })?;
                    track.rider = Some(RiderId(id));
                }
                "trkseg" => {
                    for pt in child.children().filter(|n| n.has_tag_name("trkpt")) {
                        let line = line_of(pt);
                        let fix = gpx_point(pt, line, &line_of)?;
                        push_ordered(&mut track, &mut tail, fix, line, index)?;
                    }
                }
                _ => {}
            }
        }
        tracks.push(track);
    }
    Ok(tracks)
}

fn gpx_point<'a>(
    pt: roxmltree::Node<'a, 'a>,
    line: u32,
    line_of: &dyn Fn(roxmltree::Node<'a, 'a>) -> u32,
) -> Result<GeodeticFix, TrackError> {
    let coord = |attr: &'static str| -> Result<f64, TrackError> {
        let raw = pt.attribute(attr).ok_or(TrackError::MissingCoordinate { line, attr })?;
        number(raw, line, attr)
    };
    let lat = coord("lat")?;
    let lon = coord("lon")?;
    check_range(lat, lon, line)?;
    let mut alt = 0.0;
    let mut t = None;
    for c in pt.children().filter(|n| n.is_element()) {
        match c.tag_name().name() {
            "ele" => alt = number(c.text().unwrap_or(""), line_of(c), "ele")?,
            "time" => {
                let raw = c.text().unwrap_or("").trim();
                t = Some(iso::parse(raw).ok_or(TrackError::BadTime { line: line_of(c), value: raw.to_string() })?);
            }
            _ => {}
        }
    }
    let t = t.ok_or(TrackError::MissingTime { line })?;
    Ok(GeodeticFix::new(lat, lon, alt, t))
}

fn parse_text(text: &str) -> Result<Vec<Track>, TrackError> {
    let mut tracks: Vec<Track> = Vec::new();
    let mut tails: Vec<Option<(Timestamp, u32)>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u32 + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(TrackError::MalformedLine {
                line,
                message: format!("expected rider, time, lat, lon[, alt]; found {} field(s)", fields.len()),
            });
        }
        let rider = fields[0].parse::<u32>().map(RiderId).map_err(|_| TrackError::BadNumber {
            line,
            field: "rider",
            value: fields[0].to_string(),
        })?;
        let t = iso::parse(fields[1]).ok_or(TrackError::BadTime { line, value: fields[1].to_string() })?;
        let lat = number(fields[2], line, "lat")?;
        let lon = number(fields[3], line, "lon")?;
        check_range(lat, lon, line)?;
        let alt = match fields.get(4) {
            Some(a) if !a.is_empty() => number(a, line, "alt")?,
            _ => 0.0,
        };
        let index = match tracks.iter().position(|t| t.rider == Some(rider)) {
            Some(k) => k,
            None => {
                tracks.push(Track::new(Some(rider), None, Vec::new()));
                tails.push(None);
                tracks.len() - 1
            }
        };
        push_ordered(&mut tracks[index], &mut tails[index], GeodeticFix::new(lat, lon, alt, t), line, index)?;
    }
    Ok(tracks)
}

fn push_ordered(
    track: &mut Track,
    tail: &mut Option<(Timestamp, u32)>,
    fix: GeodeticFix,
    line: u32,
    index: usize,
) -> Result<(), TrackError> {
    if let Some((prev, _)) = *tail {
        if fix.t <= prev {
            return Err(TrackError::Ordering {
                line,
                track: index,
                point: track.samples.len(),
                prev: iso::format(prev),
                got: iso::format(fix.t),
            });
        }
    }
    *tail = Some((fix.t, line));
    track.samples.push(fix);
    Ok(())
}

fn number(raw: &str, line: u32, field: &'static str) -> Result<f64, TrackError> {
    let raw = raw.trim();
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(TrackError::BadNumber { line, field, value: raw.to_string() }),
    }
}

fn check_range(lat: f64, lon: f64, line: u32) -> Result<(), TrackError> {
    if (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) {
        Ok(())
    } else {
        Err(TrackError::CoordinateRange { line, lat, lon })
    }
}

/// Writes tracks as GPX. Coordinates use the shortest decimal form that
/// reads back to the same `f64`.
pub fn write_gpx(tracks: &[Track]) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<gpx version=\"1.1\" creator=\"draftwatch\" xmlns=\"http://www.topografix.com/GPX/1/1\">\n");
    for t in tracks {
        out.push_str("  <trk>\n");
        if let Some(name) = &t.name {
            let _ = writeln!(out, "    <name>{}</name>", escape(name));
        }
        if let Some(r) = t.rider {
            let _ = writeln!(out, "    <number>{}</number>", r.0);
        }
        out.push_str("    <trkseg>\n");
        for s in &t.samples {
            let _ = writeln!(
                out,
                "      <trkpt lat=\"{}\" lon=\"{}\"><ele>{}</ele><time>{}</time></trkpt>",
                s.lat,
                s.lon,
                s.alt,
                iso::format(s.t)
            );
        }
        out.push_str("    </trkseg>\n  </trk>\n");
    }
    out.push_str("</gpx>\n");
    out
}

/// Writes tracks in the text format. Tracks without a rider are written as
/// rider 0.
pub fn write_text(tracks: &[Track]) -> String {
    let mut out = String::from("# rider, time, lat, lon, alt\n");
    for t in tracks {
        let r = t.rider.map_or(0, |r| r.0);
        for s in &t.samples {
            let _ = writeln!(out, "{r}, {}, {}, {}, {}", iso::format(s.t), s.lat, s.lon, s.alt);
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
