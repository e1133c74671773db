//! HTTP client for an external program generator.
//!
//! `POST {endpoint}/propose` with `{"points", "k", "temperature", "top_p",
//! "top_k", "max_tokens", "seed"}` answers `{"programs": [...]}`.
//! `POST {endpoint}/train` receives dataset records as NDJSON and is not
//! waited on.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{DecodingParams, Proposal, ProposalSource, Proposer, ProposerError};
use crate::dsl::Program;
use crate::geometry::PointCloud;
use crate::selftrain::{DatasetRecord, TrainingPair};

#[derive(Serialize)]
struct ProposeRequest {
    points: Vec<[f64; 3]>,
    k: usize,
    temperature: f64,
    top_p: f64,
    top_k: usize,
    max_tokens: usize,
    seed: u64,
}

#[derive(Deserialize)]
struct ProposeResponse {
    programs: Vec<String>,
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug)]
pub struct RemoteProposer {
    endpoint: String,
    agent: ureq::Agent,
    slots: Slots,
}

impl RemoteProposer {
    pub fn new(endpoint: &str, max_in_flight: usize) -> Self {
        RemoteProposer {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new()
                .timeout_connect(Duration::from_secs(10))
                .timeout(Duration::from_secs(300))
                .build(),
            slots: Slots {
                free: Mutex::new(max_in_flight.max(1)),
                cv: Condvar::new(),
            },
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

/// Parses each returned text; unparseable or over-long programs are dropped
/// and counted.
pub fn parse_programs(texts: &[String], max_tokens: usize) -> (Vec<Program>, usize) {
    let mut programs = Vec::new();
    let mut dropped = 0;
    for text in texts {
        match text.parse::<Program>() {
            Ok(p) if p.count_tokens() <= max_tokens => programs.push(p),
            Ok(p) => {
                log::debug!("dropping remote program with {} tokens", p.count_tokens());
                dropped += 1;
            }
            Err(e) => {
                log::debug!("dropping unparseable remote program: {e}");
                dropped += 1;
            }
        }
    }
    (programs, dropped)
}

impl Proposer for RemoteProposer {
    fn propose(&self, shape: &PointCloud, k: usize, params: &DecodingParams, seed: u64) -> Result<Proposal, ProposerError> {
        let request = ProposeRequest {
            points: shape.points().iter().map(|p| [p.x, p.y, p.z]).collect(),
            k,
            temperature: params.temperature,
            top_p: params.top_p,
            top_k: params.top_k,
            max_tokens: params.max_tokens,
            seed,
        };
        let _slot = self.slots.acquire();
        let response = self
            .agent
            .post(&format!("{}/propose", self.endpoint))
            .send_json(&request)
            .map_err(|e| ProposerError::Transport(e.to_string()))?;
        let body: ProposeResponse = response
            .into_json()
            .map_err(|e| ProposerError::Protocol(e.to_string()))?;
        let (mut programs, mut dropped) = parse_programs(&body.programs, params.max_tokens);
        if programs.len() > k {
            dropped += programs.len() - k;
            programs.truncate(k);
        }
        Ok(Proposal {
            programs,
            dropped,
            source: ProposalSource::Remote,
        })
    }

    fn update(&mut self, pairs: &[TrainingPair]) {
        let mut body = String::new();
        for (i, pair) in pairs.iter().enumerate() {
            let record = DatasetRecord::from_pair(pair, i);
            body.push_str(&serde_json::to_string(&record).expect("record serializes"));
            body.push('\n');
        }
        let agent = self.agent.clone();
        let url = format!("{}/train", self.endpoint);
        std::thread::spawn(move || {
            if let Err(e) = agent
                .post(&url)
                .set("Content-Type", "application/x-ndjson")
                .send_string(&body)
            {
                log::warn!("train upload failed: {e}");
            }
        });
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}
