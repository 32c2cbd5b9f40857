//! Blocking HTTP client for the race service.

use std::time::Duration;

use draftwatch_core::{GeodeticFix, RiderId};
use reqwest::blocking::{Client as Http, Response};
use thiserror::Error;

use crate::replay::Sink;
use crate::settings::RaceSettings;
use crate::wire::{CreateRace, ErrorBody, PositionBody, RaceCreated, StandingsBody, ViolationBody};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("server answered {status} ({class}): {message}")]
    Status { status: u16, class: String, message: String },
}

pub struct Client {
    base: String,
    http: Http,
}

impl Client {
    pub fn new(base: &str) -> Result<Client, ClientError> {
        let http = Http::builder().timeout(Duration::from_secs(30)).build()?;
        Ok(Client { base: base.trim_end_matches('/').to_string(), http })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn check(resp: Response) -> Result<Response, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().unwrap_or_default();
        let (class, message) = match serde_json::from_str::<ErrorBody>(&text) {
            Ok(b) => (b.class, b.error),
            Err(_) => ("http".to_string(), text),
        };
        Err(ClientError::Status { status: status.as_u16(), class, message })
    }

    pub fn create_race(
        &self,
        name: Option<&str>,
        course: &str,
        settings: Option<RaceSettings>,
    ) -> Result<RaceCreated, ClientError> {
        let body = CreateRace { name: name.map(str::to_string), course: course.to_string(), settings };
        let resp = self.http.post(self.url("/races")).json(&body).send()?;
        Ok(Self::check(resp)?.json()?)
    }

    pub fn submit(&self, race: u64, rider: RiderId, fix: &GeodeticFix) -> Result<(), ClientError> {
        let resp = self
            .http
            .post(self.url(&format!("/races/{race}/positions")))
            .json(&PositionBody::new(rider, fix))
            .send()?;
        Self::check(resp).map(|_| ())
    }

    pub fn standings(&self, race: u64) -> Result<StandingsBody, ClientError> {
        let resp = self.http.get(self.url(&format!("/races/{race}/standings"))).send()?;
        Ok(Self::check(resp)?.json()?)
    }

    pub fn violations(&self, race: u64, since: Option<&str>) -> Result<Vec<ViolationBody>, ClientError> {
        let mut req = self.http.get(self.url(&format!("/races/{race}/violations")));
        if let Some(s) = since {
            req = req.query(&[("since", s)]);
        }
        Ok(Self::check(req.send()?)?.json()?)
    }

    /// Opens the event stream. Reading the response yields NDJSON lines
    /// until the race is closed.
    pub fn events(&self, race: u64, from: Option<u64>) -> Result<Response, ClientError> {
        let mut req = self.http.get(self.url(&format!("/races/{race}/events"))).timeout(Duration::from_secs(3600));
        if let Some(f) = from {
            req = req.query(&[("from", f)]);
        }
        Self::check(req.send()?)
    }

    pub fn close(&self, race: u64) -> Result<(), ClientError> {
        let resp = self.http.post(self.url(&format!("/races/{race}/close"))).send()?;
        Self::check(resp).map(|_| ())
    }
}

/// Replay sink that submits to a race over HTTP.
pub struct HttpSink<'a> {
    pub client: &'a Client,
    pub race: u64,
}

impl Sink for HttpSink<'_> {
    fn deliver(&mut self, rider: RiderId, fix: &GeodeticFix) -> Result<(), String> {
        self.client.submit(self.race, rider, fix).map_err(|e| e.to_string())
    }
}
