//! Operator commands: `serve`, `replay`, `simulate` and `report`.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use draftwatch_core::{Course, Ellipsoid, Engine, LogEntry, RiderId, Timestamp};

use crate::client::{Client, HttpSink};
use crate::iso;
use crate::replay::{replay, EngineSink, ReplayReport};
use crate::report;
use crate::scenario::{synthesize, ScenarioSpec};
use crate::service::{self, ServiceOptions};
use crate::settings::RaceSettings;
use crate::track::{parse_survey, parse_tracks, write_gpx, write_text, Track};
use crate::wire::{decode_log, encode_log};

#[derive(Debug, Parser)]
#[command(name = "draftwatch", version, about = "Drafting detection for triathlon bike legs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP race service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Directory for per-race event logs.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
    /// Replay track files into a race and print a summary.
    Replay {
        #[arg(long)]
        course: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        tracks: Vec<PathBuf>,
        /// Replay speed relative to the recorded clock; `inf` skips pacing.
        #[arg(long, default_value_t = 1.0)]
        speedup: f64,
        /// Flat key = value file overriding rule parameters.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Event log output (newline-delimited JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base URL of a running service; replays over HTTP instead of in
        /// process.
        #[arg(long)]
        server: Option<String>,
    },
    /// Write course and rider tracks for a scenario.
    Simulate {
        /// Builtin name (`fig5`, `solo`) or path to a TOML scenario.
        #[arg(long, default_value = "fig5")]
        scenario: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's position noise, metres.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Gpx)]
        format: Format,
    },
    /// Violation table and gap series from an event log.
    Report {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        course: PathBuf,
        #[arg(long, num_args = 1..)]
        tracks: Vec<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Directory for the gap CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Gpx,
    Text,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { bind, log_dir } => cmd_serve(bind, log_dir),
        Command::Replay { course, tracks, speedup, rules, out, server } => {
            let summary = cmd_replay(&course, &tracks, speedup, rules.as_deref(), out.as_deref(), server.as_deref())?;
            print!("{summary}");
            Ok(())
        }
        Command::Simulate { scenario, seed, out, noise, format } => {
            print!("{}", cmd_simulate(&scenario, seed, &out, noise, format)?);
            Ok(())
        }
        Command::Report { log, course, tracks, rules, out } => {
            print!("{}", cmd_report(&log, &course, &tracks, rules.as_deref(), out.as_deref())?);
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("{}: cannot read", path.display()))
}

pub fn load_settings(path: Option<&Path>) -> Result<RaceSettings> {
    match path {
        None => Ok(RaceSettings::default()),
        Some(p) => {
            let text = String::from_utf8(read(p)?).map_err(|_| anyhow!("{}: not UTF-8", p.display()))?;
            RaceSettings::parse(&text).map_err(|e| anyhow!("{}: {e}", p.display()))
        }
    }
}

pub fn load_course(path: &Path, settings: &RaceSettings) -> Result<Course> {
    let survey = parse_survey(&read(path)?).map_err(|e| anyhow!(e.located(&path.display().to_string())))?;
    Course::from_fixes(&survey.samples, &Ellipsoid::WGS84)
        .and_then(|c| c.with_corridor_width(settings.corridor_width))
        .map_err(|e| anyhow!("{}: {e}", path.display()))
}

pub fn load_tracks(paths: &[PathBuf]) -> Result<Vec<Track>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(parse_tracks(&read(p)?).map_err(|e| anyhow!(e.located(&p.display().to_string())))?);
    }
    Ok(out)
}

fn cmd_serve(bind: SocketAddr, log_dir: Option<PathBuf>) -> Result<()> {
    if let Some(d) = &log_dir {
        fs::create_dir_all(d).with_context(|| format!("{}: cannot create log directory", d.display()))?;
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| anyhow!("cannot bind {bind} (port {}): {e}", bind.port()))?;
        eprintln!("listening on {}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        service::serve(listener, ServiceOptions { log_dir }, shutdown).await?;
        Ok(())
    })
}

/// Replays the tracks and returns the printed summary. The event log is
/// written to `out` when given.
pub fn cmd_replay(
    course_path: &Path,
    track_paths: &[PathBuf],
    speedup: f64,
    rules: Option<&Path>,
    out: Option<&Path>,
    server: Option<&str>,
) -> Result<String> {
    if speedup.is_nan() || speedup < 1.0 {
        bail!("--speedup must be at least 1");
    }
    let settings = load_settings(rules)?;
    let course = load_course(course_path, &settings)?;
    let tracks = load_tracks(track_paths)?;

    let (log, rep, finish) = match server {
        None => {
            let mut sink = EngineSink::new(Engine::new(course, settings.rules())?);
            let rep = replay(&tracks, speedup, &mut sink)?;
            sink.engine.finish();
            let finish = sink.engine.snapshot_standings().iter().map(|r| (r.rider, r.l, r.finish_t)).collect();
            (sink.engine.log().to_vec(), rep, finish)
        }
        Some(url) => replay_remote(url, course_path, &tracks, speedup, settings)?,
    };
    if let Some(p) = out {
        fs::write(p, encode_log(&log)).with_context(|| format!("{}: cannot write", p.display()))?;
    }
    let mut s = replay_summary(&log, &rep, speedup, tracks.len());
    s.push_str(&finish_order(&finish, &tracks, rep.epoch));
    Ok(s)
}

type FinishRow = (RiderId, f64, Option<Timestamp>);

/// Final standings with race-clock and elapsed times.
fn finish_order(rows: &[FinishRow], tracks: &[Track], epoch: Option<Timestamp>) -> String {
    let mut s = String::from("finish order:\n");
    let epoch = epoch.unwrap_or_default();
    for (rank, (rider, l, finish)) in rows.iter().enumerate() {
        let start = tracks.iter().filter(|t| t.rider == Some(*rider)).filter_map(Track::start).min();
        match (finish, start) {
            (Some(f), Some(st)) => s.push_str(&format!(
                "  {}. rider {} clock {} elapsed {}\n",
                rank + 1,
                rider.0,
                iso::race_clock(*f - epoch),
                iso::race_clock(*f - st)
            )),
            _ => s.push_str(&format!("  {}. rider {} not finished at {:.1} m\n", rank + 1, rider.0, l)),
        }
    }
    s
}

fn replay_remote(
    url: &str,
    course_path: &Path,
    tracks: &[Track],
    speedup: f64,
    settings: RaceSettings,
) -> Result<(Vec<LogEntry>, ReplayReport, Vec<FinishRow>)> {
    let course_text = String::from_utf8(read(course_path)?)?;
    let client = Client::new(url)?;
    let name = course_path.file_stem().map(|s| s.to_string_lossy().into_owned());
    let race = client.create_race(name.as_deref(), &course_text, Some(settings))?.id;
    let rep = replay(tracks, speedup, &mut HttpSink { client: &client, race })?;
    client.close(race)?;
    let text = client.events(race, None)?.text()?;
    let log = decode_log(&text).map_err(|e| anyhow!("event stream: {e}"))?;
    let mut finish = Vec::new();
    for row in client.standings(race)?.standings {
        let t = match row.finish_t {
            Some(f) => Some(iso::parse(&f).ok_or_else(|| anyhow!("bad finish time {f:?}"))?),
            None => None,
        };
        finish.push((RiderId(row.rider), row.l, t));
    }
    Ok((log, rep, finish))
}

fn replay_summary(log: &[LogEntry], rep: &ReplayReport, speedup: f64, riders: usize) -> String {
    let pace = if speedup.is_finite() { format!("at {speedup}x") } else { "unpaced".into() };
    let mut s = format!(
        "replayed {} fixes from {} riders in {:.2} s {pace} ({} rejected)\n",
        rep.delivered + rep.rejected,
        riders,
        rep.wall.as_secs_f64(),
        rep.rejected
    );
    for r in rep.rejections.iter().take(5) {
        s.push_str(&format!("  rejected rider {} at {}: {}\n", r.rider.0, iso::format(r.t), r.reason));
    }
    s.push_str(&report::render(&report::table(log, rep.epoch)));
    s
}

/// Writes `course.<ext>` and `rider-<id>.<ext>` into `out` and returns the
/// printed summary.
pub fn cmd_simulate(scenario: &str, seed: u64, out: &Path, noise: Option<f64>, format: Format) -> Result<String> {
    let mut spec = match ScenarioSpec::builtin(scenario) {
        Ok(s) => s,
        Err(_) if Path::new(scenario).exists() => {
            let text = String::from_utf8(read(Path::new(scenario))?)?;
            ScenarioSpec::from_toml(&text).map_err(|e| anyhow!("{scenario}: {e}"))?
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(n) = noise {
        spec.noise_std = n;
    }
    let sc = synthesize(&spec, seed)?;
    fs::create_dir_all(out).with_context(|| format!("{}: cannot create", out.display()))?;
    let (ext, write): (&str, fn(&[Track]) -> String) = match format {
        Format::Gpx => ("gpx", write_gpx),
        Format::Text => ("txt", write_text),
    };
    let course_path = out.join(format!("course.{ext}"));
    fs::write(&course_path, write(std::slice::from_ref(&sc.course)))?;
    let mut s = format!(
        "scenario {} seed {}: course {:.1} m, {} vertices -> {}\n",
        spec.name,
        seed,
        sc.course_length,
        sc.course.samples.len(),
        course_path.display()
    );
    for (track, sum) in sc.riders.iter().zip(&sc.summary) {
        let path = out.join(format!("rider-{}.{ext}", sum.rider.0));
        fs::write(&path, write(std::slice::from_ref(track)))?;
        s.push_str(&format!(
            "rider {}: start +{} s, {} samples, last at {}{} -> {}\n",
            sum.rider.0,
            sum.start_delay,
            sum.samples,
            iso::race_clock((sum.last_offset * 1000.0).round() as i64),
            if sum.finished { " (finished)" } else { "" },
            path.display()
        ));
    }
    Ok(s)
}

/// Renders the report and writes one gap CSV per offender/victim pair into
/// `out`.
pub fn cmd_report(
    log_path: &Path,
    course_path: &Path,
    track_paths: &[PathBuf],
    rules: Option<&Path>,
    out: Option<&Path>,
) -> Result<String> {
    let settings = load_settings(rules)?;
    let text = String::from_utf8(read(log_path)?)?;
    let log = decode_log(&text).map_err(|e| anyhow!("{}:{}: {}", log_path.display(), e.line, e.message))?;
    let course = load_course(course_path, &settings)?;
    let tracks = load_tracks(track_paths)?;
    let rep = report::build(&log, &course, &tracks, &settings.rules());
    let mut s = report::render(&rep.rows);
    for w in &rep.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        for series in &rep.series {
            let p = dir.join(series.file_name());
            fs::write(&p, series.to_csv())?;
            s.push_str(&format!("gap series {} -> {}\n", series.file_name(), p.display()));
        }
    }
    Ok(s)
}
