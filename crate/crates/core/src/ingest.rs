//! Event-log ingestion: parse listening events, slice the study interval
//! into fixed-size windows, and derive the per-window genre allocation
//! tensor, co-listening counts, and appearance/disappearance candidate
//! pairs.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use ndarray::{Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One timestamped user-genre interaction. The track id is parsed and
/// validated but plays no role beyond counting the event itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListeningEvent {
    pub user: String,
    pub ts: i64,
    pub genre: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<String>,
}

/// Supported event-log formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for EventFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EventFormat::Csv),
            "jsonl" => Ok(EventFormat::Jsonl),
            other => Err(Error::Config(format!("unknown event format `{other}`"))),
        }
    }
}

/// The study interval and how many equal windows it is cut into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub t_start: i64,
    pub t_end: i64,
    pub count: usize,
}

impl WindowConfig {
    pub fn new(t_start: i64, t_end: i64, count: usize) -> Result<Self> {
        let cfg = Self { t_start, t_end, count };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_start >= self.t_end {
            return Err(Error::Config(format!(
                "window interval start {} must precede end {}",
                self.t_start, self.t_end
            )));
        }
        if self.count < 2 {
            return Err(Error::Config(format!(
                "window count must be at least 2, got {}",
                self.count
            )));
        }
        Ok(())
    }

    /// Window index (0-based) for a timestamp, or `None` outside the
    /// interval. Windows are half-open; the final window additionally
    /// includes `t_end` so no event is dropped.
    pub fn window_of(&self, ts: i64) -> Option<usize> {
        if ts < self.t_start || ts > self.t_end {
            return None;
        }
        let span = (self.t_end - self.t_start) as i128;
        let offset = (ts - self.t_start) as i128;
        let idx = (offset * self.count as i128 / span) as usize;
        Some(idx.min(self.count - 1))
    }
}

/// Sorted id <-> dense index bijection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    ids: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_ids(mut ids: Vec<String>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Self { ids, index }
    }

    /// Rebuild the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Per-user listening histories, ordered by timestamp (ties keep input
/// order). Genres are interned against a shared vocabulary.
#[derive(Debug, Clone)]
pub struct History {
    users: Vocab,
    genres: Vocab,
    /// events[user] = (ts, genre index), ascending by ts.
    events: Vec<Vec<(i64, u32)>>,
    /// Records skipped because their timestamp fell outside the interval.
    pub skipped_out_of_interval: usize,
}

impl History {
    /// Group events per user and sort by timestamp. The sort is stable,
    /// so equal timestamps keep their input order, which fixes the
    /// listening sequence used for co-listening adjacency.
    pub fn from_events(
        events: Vec<ListeningEvent>,
        window: Option<&WindowConfig>,
        genre_vocab: Option<&[String]>,
    ) -> Result<Self> {
        let mut kept = Vec::with_capacity(events.len());
        let mut skipped = 0usize;
        for ev in events {
            if ev.genre.is_empty() {
                return Err(Error::Input(format!(
                    "event for user `{}` at ts {} has an empty genre",
                    ev.user, ev.ts
                )));
            }
            match window {
                Some(w) if w.window_of(ev.ts).is_none() => skipped += 1,
                _ => kept.push(ev),
            }
        }

        let genres = match genre_vocab {
            Some(ids) => {
                let vocab = Vocab::from_ids(ids.to_vec());
                for ev in &kept {
                    if vocab.get(&ev.genre).is_none() {
                        return Err(Error::Lookup { kind: "genre", id: ev.genre.clone() });
                    }
                }
                vocab
            }
            None => Vocab::from_ids(kept.iter().map(|e| e.genre.clone()).collect()),
        };
        let users = Vocab::from_ids(kept.iter().map(|e| e.user.clone()).collect());

        let mut per_user: Vec<Vec<(i64, u32)>> = vec![Vec::new(); users.len()];
        for ev in &kept {
            let u = users.get(&ev.user).expect("user interned above");
            let g = genres.get(&ev.genre).expect("genre interned above");
            per_user[u].push((ev.ts, g as u32));
        }
        for seq in &mut per_user {
            seq.sort_by_key(|&(ts, _)| ts); // stable
        }

        Ok(Self { users, genres, events: per_user, skipped_out_of_interval: skipped })
    }

    pub fn users(&self) -> &Vocab {
        &self.users
    }

    pub fn genres(&self) -> &Vocab {
        &self.genres
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    pub fn events_of(&self, user: usize) -> &[(i64, u32)] {
        &self.events[user]
    }
}

/// Parse an event log. Records outside the window interval (when one is
/// supplied) are skipped and counted; malformed records abort with the
/// offending line number.
pub fn load_events(
    path: &Path,
    format: EventFormat,
    window: Option<&WindowConfig>,
    genre_vocab: Option<&[String]>,
) -> Result<History> {
    let file = std::fs::File::open(path)?;
    let events = match format {
        EventFormat::Csv => parse_csv(file)?,
        EventFormat::Jsonl => parse_jsonl(file)?,
    };
    History::from_events(events, window, genre_vocab)
}

fn parse_csv<R: Read>(reader: R) -> Result<Vec<ListeningEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new()); // empty file
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (u_col, t_col, g_col) = match (col("user"), col("ts"), col("genre")) {
        (Some(u), Some(t), Some(g)) => (u, t, g),
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header must contain user, ts and genre columns, got {headers:?}"),
            })
        }
    };
    let track_col = col("track");

    let mut events = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let field = |c: usize| {
            record.get(c).ok_or_else(|| Error::Parse {
                line,
                msg: format!("missing column {c}"),
            })
        };
        let ts: i64 = field(t_col)?.trim().parse().map_err(|e| Error::Parse {
            line,
            msg: format!("bad timestamp: {e}"),
        })?;
        let track = track_col
            .and_then(|c| record.get(c))
            .filter(|t| !t.is_empty())
            .map(str::to_owned);
        events.push(ListeningEvent {
            user: field(u_col)?.to_owned(),
            ts,
            genre: field(g_col)?.to_owned(),
            track,
        });
    }
    Ok(events)
}

fn parse_jsonl<R: Read>(reader: R) -> Result<Vec<ListeningEvent>> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: ListeningEvent = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        events.push(ev);
    }
    Ok(events)
}

/// Per-user, per-window genre sequences: `h^k_u` as ordered genre indices.
#[derive(Debug, Clone)]
pub struct WindowedHistory {
    users: Vocab,
    genres: Vocab,
    window_count: usize,
    /// sequences[user][window] = genre indices in listening order.
    sequences: Vec<Vec<Vec<u32>>>,
}

impl WindowedHistory {
    pub fn users(&self) -> &Vocab {
        &self.users
    }

    pub fn genres(&self) -> &Vocab {
        &self.genres
    }

    pub fn window_count(&self) -> usize {
        self.window_count
    }

    pub fn sequence(&self, user: usize, window: usize) -> &[u32] {
        &self.sequences[user][window]
    }

    /// Keep only the first `count` windows.
    pub fn truncated(&self, count: usize) -> Self {
        assert!(count <= self.window_count);
        Self {
            users: self.users.clone(),
            genres: self.genres.clone(),
            window_count: count,
            sequences: self
                .sequences
                .iter()
                .map(|ws| ws[..count].to_vec())
                .collect(),
        }
    }

    /// Build directly from already-sliced sequences (used by artifact
    /// loading and tests).
    pub fn from_parts(
        users: Vocab,
        genres: Vocab,
        window_count: usize,
        sequences: Vec<Vec<Vec<u32>>>,
    ) -> Result<Self> {
        if sequences.len() != users.len() {
            return Err(Error::Shape(format!(
                "expected {} user rows, got {}",
                users.len(),
                sequences.len()
            )));
        }
        for (u, ws) in sequences.iter().enumerate() {
            if ws.len() != window_count {
                return Err(Error::Shape(format!(
                    "user {u} has {} windows, expected {window_count}",
                    ws.len()
                )));
            }
            for seq in ws {
                if let Some(&g) = seq.iter().find(|&&g| g as usize >= genres.len()) {
                    return Err(Error::Shape(format!("genre index {g} out of range")));
                }
            }
        }
        Ok(Self { users, genres, window_count, sequences })
    }

    /// Genre event frequencies pooled over windows `0..upto`, as a
    /// distribution over the genre vocabulary (all zeros when the pool
    /// is empty).
    pub fn genre_frequencies(&self, upto: usize) -> Vec<f64> {
        let mut counts = vec![0u64; self.genres.len()];
        for ws in &self.sequences {
            for seq in &ws[..upto.min(self.window_count)] {
                for &g in seq {
                    counts[g as usize] += 1;
                }
            }
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return vec![0.0; self.genres.len()];
        }
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

/// Assign every event to its window. Errors if an event falls outside the
/// configured interval; total event count is preserved (the windows
/// partition the input).
pub fn slice_windows(history: &History, cfg: &WindowConfig) -> Result<WindowedHistory> {
    cfg.validate()?;
    let n_users = history.users.len();
    let mut sequences: Vec<Vec<Vec<u32>>> = vec![vec![Vec::new(); cfg.count]; n_users];
    for u in 0..n_users {
        for &(ts, g) in history.events_of(u) {
            let k = cfg.window_of(ts).ok_or_else(|| {
                Error::Input(format!(
                    "event at ts {ts} for user `{}` lies outside the window interval",
                    history.users.id(u)
                ))
            })?;
            sequences[u][k].push(g);
        }
    }
    Ok(WindowedHistory {
        users: history.users.clone(),
        genres: history.genres.clone(),
        window_count: cfg.count,
        sequences,
    })
}

/// `K x |U| x |G|` tensor of per-window genre proportions. Every
/// non-empty (window, user) row sums to 1; empty windows leave an
/// all-zero row.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTensor {
    values: Array3<f64>,
    users: Vocab,
    genres: Vocab,
}

impl AllocationTensor {
    pub fn from_values(values: Array3<f64>, users: Vocab, genres: Vocab) -> Result<Self> {
        let (_, nu, ng) = values.dim();
        if nu != users.len() || ng != genres.len() {
            return Err(Error::Shape(format!(
                "tensor is {nu}x{ng} per window but vocabularies are {}x{}",
                users.len(),
                genres.len()
            )));
        }
        Ok(Self { values, users, genres })
    }

    pub fn window_count(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_genres(&self) -> usize {
        self.genres.len()
    }

    pub fn users(&self) -> &Vocab {
        &self.users
    }

    pub fn genres(&self) -> &Vocab {
        &self.genres
    }

    pub fn get(&self, window: usize, user: usize, genre: usize) -> f64 {
        self.values[[window, user, genre]]
    }

    /// The `|U| x |G|` allocation slice for one window.
    pub fn window(&self, window: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(ndarray::Axis(0), window)
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    /// Keep only the first `count` windows (used to compute the training
    /// phase without looking at later windows).
    pub fn truncated(&self, count: usize) -> Self {
        assert!(count <= self.window_count());
        Self {
            values: self.values.slice(ndarray::s![..count, .., ..]).to_owned(),
            users: self.users.clone(),
            genres: self.genres.clone(),
        }
    }

    /// Check the distribution invariant on every (window, user) row.
    pub fn validate(&self) -> Result<()> {
        let (k, nu, _) = self.values.dim();
        for w in 0..k {
            for u in 0..nu {
                let row = self.values.slice(ndarray::s![w, u, ..]);
                let sum: f64 = row.sum();
                let all_zero = row.iter().all(|&v| v == 0.0);
                if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::Shape(format!(
                        "allocation out of [0,1] at window {w}, user {u}"
                    )));
                }
                if !all_zero && (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Shape(format!(
                        "allocation row at window {w}, user {u} sums to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Compute the allocation tensor from sliced histories.
pub fn allocation(windowed: &WindowedHistory) -> AllocationTensor {
    let (k, nu, ng) = (
        windowed.window_count,
        windowed.users.len(),
        windowed.genres.len(),
    );
    let mut values = Array3::zeros((k, nu, ng));
    for u in 0..nu {
        for w in 0..k {
            let seq = windowed.sequence(u, w);
            if seq.is_empty() {
                continue;
            }
            let inv = 1.0 / seq.len() as f64;
            for &g in seq {
                values[[w, u, g as usize]] += inv;
            }
        }
    }
    AllocationTensor { values, users: windowed.users.clone(), genres: windowed.genres.clone() }
}

/// Counts of the genres heard immediately before or after events of a
/// fixed genre within one window sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoListeningVector {
    pub counts: Vec<u64>,
}

impl CoListeningVector {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// For each event of `genre` at position `j`, count the genres at `j-1`
/// and `j+1` (when those positions exist). Self-adjacency counts.
pub fn colistening(sequence: &[u32], genre: u32, n_genres: usize) -> CoListeningVector {
    let mut counts = vec![0u64; n_genres];
    for (j, &g) in sequence.iter().enumerate() {
        if g != genre {
            continue;
        }
        if j > 0 {
            counts[sequence[j - 1] as usize] += 1;
        }
        if j + 1 < sequence.len() {
            counts[sequence[j + 1] as usize] += 1;
        }
    }
    CoListeningVector { counts }
}

/// Whether a pair is a candidate for genre appearance or disappearance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    Appearance,
    Disappearance,
}

impl CandidateKind {
    pub fn label(self) -> &'static str {
        match self {
            CandidateKind::Appearance => "appearance",
            CandidateKind::Disappearance => "disappearance",
        }
    }
}

/// A user-genre pair flagged as a potential appearance or disappearance
/// in the window after the penultimate one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidatePair {
    pub user: String,
    pub genre: String,
    pub kind: CandidateKind,
}

/// Appearance and disappearance candidate pairs, each sorted by
/// (user, genre).
#[derive(Debug, Clone, Default)]
pub struct CandidateSets {
    pub appearance: Vec<CandidatePair>,
    pub disappearance: Vec<CandidatePair>,
}

/// Candidates derived from the penultimate window of `x`:
/// appearance pairs have a zero penultimate allocation but were listened
/// to in some earlier window; disappearance pairs have a positive
/// penultimate allocation.
pub fn candidate_sets(x: &AllocationTensor) -> Result<CandidateSets> {
    let k = x.window_count();
    if k < 2 {
        return Err(Error::Input(format!("candidate sets need at least 2 windows, got {k}")));
    }
    let prev = k - 2; // penultimate, 0-based
    let mut sets = CandidateSets::default();
    for u in 0..x.n_users() {
        for g in 0..x.n_genres() {
            let at_prev = x.get(prev, u, g);
            if at_prev > 0.0 {
                sets.disappearance.push(CandidatePair {
                    user: x.users.id(u).to_owned(),
                    genre: x.genres.id(g).to_owned(),
                    kind: CandidateKind::Disappearance,
                });
            } else if (0..k - 1).any(|w| x.get(w, u, g) > 0.0) {
                sets.appearance.push(CandidatePair {
                    user: x.users.id(u).to_owned(),
                    genre: x.genres.id(g).to_owned(),
                    kind: CandidateKind::Appearance,
                });
            }
        }
    }
    Ok(sets)
}
