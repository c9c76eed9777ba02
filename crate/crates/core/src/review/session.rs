use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::report::ReportContext;
use super::sample::ReviewSample;
use crate::agreement::{RaterLabel, RatingMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingEntry {
    pub crash_key: String,
    pub label: RaterLabel,
    #[serde(default)]
    pub note: String,
    /// Server time, milliseconds since the Unix epoch.
    pub at: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum LogEvent {
    Open { session_id: String, rater_id: String, sample_id: String, at: u64 },
    Rating(RatingEntry),
    Close { at: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Complete,
    Closed,
}

/// Which answer counts when a rater revised an item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    First,
    Final,
}

/// A session rebuilt from its append-only log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub rater_id: String,
    pub sample_id: String,
    pub created: u64,
    pub entries: Vec<RatingEntry>,
    pub closed: bool,
}

impl SessionState {
    /// One entry per item: the latest (or earliest) submission.
    pub fn answers(&self, which: Answer) -> BTreeMap<&str, &RatingEntry> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            match which {
                Answer::Final => {
                    out.insert(e.crash_key.as_str(), e);
                }
                Answer::First => {
                    out.entry(e.crash_key.as_str()).or_insert(e);
                }
            }
        }
        out
    }

    pub fn rated(&self) -> usize {
        self.answers(Answer::Final).len()
    }

    pub fn status(&self, sample: &ReviewSample) -> SessionStatus {
        if self.closed {
            SessionStatus::Closed
        } else if self.rated() == sample.len() {
            SessionStatus::Complete
        } else {
            SessionStatus::Open
        }
    }

    pub fn is_complete(&self, sample: &ReviewSample) -> bool {
        self.rated() == sample.len()
    }

    fn apply(&mut self, ev: LogEvent) -> Result<()> {
        match ev {
            LogEvent::Open { .. } => return Err(Error::Format(format!("session {} opened twice", self.session_id))),
            LogEvent::Rating(e) => self.entries.push(e),
            LogEvent::Close { .. } => self.closed = true,
        }
        Ok(())
    }

    /// Rebuilds a session by replaying its log.
    pub fn replay(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let mut state: Option<SessionState> = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: LogEvent =
                serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            match (&mut state, ev) {
                (None, LogEvent::Open { session_id, rater_id, sample_id, at }) => {
                    state = Some(SessionState { session_id, rater_id, sample_id, created: at, entries: Vec::new(), closed: false })
                }
                (None, _) => return Err(Error::Parse { line: i + 1, message: "session log must start with an open event".into() }),
                (Some(s), ev) => s.apply(ev)?,
            }
        }
        state.ok_or_else(|| Error::Format(format!("empty session log {}", path.display())))
    }
}

/// What a rater should look at next.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextItem {
    Item { crash_key: String, narrative: String, position: usize, total: usize },
    Done { total: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub session_id: String,
    pub crash_key: String,
    pub rated: usize,
    pub total: usize,
    /// The submission replaced an earlier answer for the same item.
    pub superseded: bool,
}

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or_default())
}

fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.len() <= 64 && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Samples and sessions persisted under one directory:
/// `samples/<id>.json` manifests and `sessions/<id>.jsonl` logs.
pub struct ReviewStore {
    root: PathBuf,
    samples: RwLock<BTreeMap<String, Arc<ReviewSample>>>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<SessionState>>>>,
    clock: Clock,
}

impl std::fmt::Debug for ReviewStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReviewStore").field("root", &self.root).finish_non_exhaustive()
    }
}

impl ReviewStore {
    /// Opens (or creates) a store, loading every manifest and replaying
    /// every session log.
    pub fn open(root: &Path) -> Result<Self> {
        Self::open_with_clock(root, system_clock())
    }

    pub fn open_with_clock(root: &Path, clock: Clock) -> Result<Self> {
        fs::create_dir_all(root.join("samples"))?;
        fs::create_dir_all(root.join("sessions"))?;
        let mut samples = BTreeMap::new();
        for p in sorted_files(&root.join("samples"), "json")? {
            let s: ReviewSample = serde_json::from_slice(&fs::read(&p)?)?;
            samples.insert(s.sample_id.clone(), Arc::new(s));
        }
        let mut sessions = BTreeMap::new();
        for p in sorted_files(&root.join("sessions"), "jsonl")? {
            let s = SessionState::replay(&p)?;
            sessions.insert(s.session_id.clone(), Arc::new(Mutex::new(s)));
        }
        Ok(Self { root: root.to_path_buf(), samples: RwLock::new(samples), sessions: RwLock::new(sessions), clock })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.jsonl"))
    }

    /// Registers a sample; re-adding an identical manifest is a no-op.
    pub fn add_sample(&self, sample: ReviewSample) -> Result<Arc<ReviewSample>> {
        let mut samples = self.samples.write().expect("sample lock");
        if let Some(existing) = samples.get(&sample.sample_id) {
            if **existing == sample {
                return Ok(existing.clone());
            }
            return Err(Error::DuplicateKey(format!("sample {}", sample.sample_id)));
        }
        let path = self.root.join("samples").join(format!("{}.json", sample.sample_id));
        fs::write(&path, serde_json::to_vec_pretty(&sample)?)?;
        let s = Arc::new(sample);
        samples.insert(s.sample_id.clone(), s.clone());
        Ok(s)
    }

    pub fn sample(&self, id: &str) -> Result<Arc<ReviewSample>> {
        self.samples.read().expect("sample lock").get(id).cloned().ok_or_else(|| Error::NotFound(format!("sample {id}")))
    }

    /// Stores what reports need (predictions, coded labels) for a sample.
    pub fn set_context(&self, sample_id: &str, ctx: &ReportContext) -> Result<()> {
        self.sample(sample_id)?;
        let dir = self.root.join("context");
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(format!("{sample_id}.json")), serde_json::to_vec_pretty(ctx)?)?;
        Ok(())
    }

    /// Report context for a sample; empty when none was stored.
    pub fn context(&self, sample_id: &str) -> Result<ReportContext> {
        let p = self.root.join("context").join(format!("{sample_id}.json"));
        if !p.exists() {
            return Ok(ReportContext::default());
        }
        Ok(serde_json::from_slice(&fs::read(p)?)?)
    }

    pub fn sample_ids(&self) -> Vec<String> {
        self.samples.read().expect("sample lock").keys().cloned().collect()
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<SessionState>>> {
        self.sessions.read().expect("session lock").get(id).cloned().ok_or_else(|| Error::NotFound(format!("session {id}")))
    }

    pub fn session(&self, id: &str) -> Result<SessionState> {
        Ok(self.handle(id)?.lock().expect("session").clone())
    }

    /// Sessions on `sample_id`, in session-id order.
    pub fn sessions_for(&self, sample_id: &str) -> Vec<SessionState> {
        self.sessions
            .read()
            .expect("session lock")
            .values()
            .map(|s| s.lock().expect("session").clone())
            .filter(|s| s.sample_id == sample_id)
            .collect()
    }

    pub fn create_session(&self, rater_id: &str, sample_id: &str) -> Result<SessionState> {
        if !valid_id(rater_id) {
            return Err(Error::Rejected(format!("rater id {rater_id:?} must be 1-64 characters of [A-Za-z0-9_.-]")));
        }
        self.sample(sample_id)?;
        let mut sessions = self.sessions.write().expect("session lock");
        let prefix = format!("{sample_id}-{rater_id}-");
        let n = sessions
            .values()
            .filter(|s| {
                let s = s.lock().expect("session");
                s.rater_id == rater_id && s.sample_id == sample_id
            })
            .count()
            + 1;
        let session_id = format!("{prefix}{n}");
        let at = (self.clock)();
        let open = LogEvent::Open { session_id: session_id.clone(), rater_id: rater_id.into(), sample_id: sample_id.into(), at };
        append(&self.session_path(&session_id), &open)?;
        let state = SessionState {
            session_id: session_id.clone(),
            rater_id: rater_id.into(),
            sample_id: sample_id.into(),
            created: at,
            entries: Vec::new(),
            closed: false,
        };
        sessions.insert(session_id, Arc::new(Mutex::new(state.clone())));
        Ok(state)
    }

    /// First unrated item in sample order.
    pub fn next_item(&self, session_id: &str) -> Result<NextItem> {
        let s = self.session(session_id)?;
        let sample = self.sample(&s.sample_id)?;
        let answered = s.answers(Answer::Final);
        Ok(match sample.items.iter().enumerate().find(|(_, it)| !answered.contains_key(it.crash_key.as_str())) {
            Some((i, it)) => {
                NextItem::Item { crash_key: it.crash_key.clone(), narrative: it.narrative.clone(), position: i + 1, total: sample.len() }
            }
            None => NextItem::Done { total: sample.len() },
        })
    }

    /// Appends a rating. The log line is synced to disk before the ack.
    pub fn submit(&self, session_id: &str, crash_key: &str, label: &str, note: &str) -> Result<Ack> {
        let label = RaterLabel::parse(label)?;
        if label == RaterLabel::Missing {
            return Err(Error::InvalidLabel("a rating needs a label".into()));
        }
        let handle = self.handle(session_id)?;
        let mut s = handle.lock().expect("session");
        if s.closed {
            return Err(Error::Rejected(format!("session {session_id} is closed")));
        }
        let sample = self.sample(&s.sample_id)?;
        if !sample.contains(crash_key) {
            return Err(Error::Rejected(format!("{crash_key} is not in sample {}", sample.sample_id)));
        }
        let superseded = s.entries.iter().any(|e| e.crash_key == crash_key);
        let entry = RatingEntry { crash_key: crash_key.into(), label, note: note.into(), at: (self.clock)() };
        append(&self.session_path(session_id), &LogEvent::Rating(entry.clone()))?;
        s.entries.push(entry);
        Ok(Ack { session_id: session_id.into(), crash_key: crash_key.into(), rated: s.rated(), total: sample.len(), superseded })
    }

    pub fn close(&self, session_id: &str) -> Result<SessionState> {
        let handle = self.handle(session_id)?;
        let mut s = handle.lock().expect("session");
        if !s.closed {
            append(&self.session_path(session_id), &LogEvent::Close { at: (self.clock)() })?;
            s.closed = true;
        }
        Ok(s.clone())
    }

    /// Rater × item matrix for a sample, one column per rater (their most
    /// recent session). Incomplete sessions are skipped unless asked for.
    /// Also returns the number of ratings read, as a watermark.
    pub fn ratings(&self, sample_id: &str, include_incomplete: bool, which: Answer) -> Result<(RatingMatrix, usize)> {
        let sample = self.sample(sample_id)?;
        let mut by_rater: BTreeMap<String, SessionState> = BTreeMap::new();
        for s in self.sessions_for(sample_id) {
            if !include_incomplete && !s.is_complete(&sample) {
                continue;
            }
            let newer = by_rater.get(&s.rater_id).is_none_or(|old| session_number(&s.session_id) > session_number(&old.session_id));
            if newer {
                by_rater.insert(s.rater_id.clone(), s);
            }
        }
        let keys = sample.keys();
        let raters: Vec<String> = by_rater.keys().cloned().collect();
        let mut watermark = 0;
        let answers: Vec<BTreeMap<&str, &RatingEntry>> = by_rater.values().map(|s| s.answers(which)).collect();
        for s in by_rater.values() {
            watermark += s.entries.len();
        }
        let cells = keys
            .iter()
            .map(|k| answers.iter().map(|a| a.get(k.as_str()).map_or(RaterLabel::Missing, |e| e.label)).collect())
            .collect();
        Ok((RatingMatrix::new(keys, raters, cells)?, watermark))
    }
}

fn session_number(id: &str) -> u64 {
    id.rsplit('-').next().and_then(|n| n.parse().ok()).unwrap_or(0)
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    out.sort();
    Ok(out)
}

fn append(path: &Path, ev: &LogEvent) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(ev)?;
    line.push(b'\n');
    f.write_all(&line)?;
    f.sync_data()?;
    Ok(())
}
