//! On-disk formats for stage artifacts: JSONL for trajectories,
//! candidates, dictionaries and embeddings; CSV for loss histories,
//! predictions and analysis tables; JSON for windowed histories and
//! metric reports. Floats are written in Rust's shortest round-trip
//! form, so re-reading an artifact reproduces it bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dict_learn::PathletDictionary;
use crate::error::{Error, Result};
use crate::evaluate::{GenreGraph, PathletProfile, VariationDecomposition};
use crate::ingest::{Vocab, WindowedHistory};
use crate::pathlet_graph::{Pathlet, TrajectoryGraph};
use crate::pipeline::SweepPoint;
use crate::predict::{EmbeddedPair, PredictionMatrix};
use crate::trajectory::RankTrajectory;

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)
            .map_err(|e| Error::Input(format!("serializing {}: {e}", path.display())))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: format!("{}: {e}", path.display()),
        })?);
    }
    Ok(items)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::Input(format!("serializing {}: {e}", path.display())))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Parse { line: 0, msg: format!("{}: {e}", path.display()) })
}

/// Serialized windowed history (the ingest artifact). The allocation
/// tensor is recomputed on load; the sequences are the single source of
/// truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowsArtifact {
    pub users: Vec<String>,
    pub genres: Vec<String>,
    pub window_count: usize,
    pub sequences: Vec<Vec<Vec<u32>>>,
}

impl WindowsArtifact {
    pub fn from_history(w: &WindowedHistory) -> Self {
        let sequences = (0..w.users().len())
            .map(|u| (0..w.window_count()).map(|k| w.sequence(u, k).to_vec()).collect())
            .collect();
        Self {
            users: w.users().ids().to_vec(),
            genres: w.genres().ids().to_vec(),
            window_count: w.window_count(),
            sequences,
        }
    }

    pub fn into_history(self) -> Result<WindowedHistory> {
        WindowedHistory::from_parts(
            Vocab::from_ids(self.users),
            Vocab::from_ids(self.genres),
            self.window_count,
            self.sequences,
        )
    }
}

pub fn write_trajectories(path: &Path, trajectories: &[RankTrajectory]) -> Result<()> {
    write_jsonl(path, trajectories)
}

pub fn read_trajectories(path: &Path) -> Result<Vec<RankTrajectory>> {
    read_jsonl(path)
}

pub fn write_candidates(path: &Path, candidates: &[Pathlet]) -> Result<()> {
    write_jsonl(path, candidates)
}

pub fn read_candidates(path: &Path) -> Result<Vec<Pathlet>> {
    read_jsonl(path)
}

/// Dictionary entries carry their rank sequence, influence and support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DictionaryRecord {
    pub ranks: Vec<u32>,
    pub influence: f64,
    pub support: u64,
}

pub fn write_dictionary(path: &Path, dict: &PathletDictionary) -> Result<()> {
    let records: Vec<DictionaryRecord> = dict
        .pathlets
        .iter()
        .zip(&dict.influence)
        .map(|(p, &influence)| DictionaryRecord {
            ranks: p.ranks.clone(),
            influence,
            support: p.support,
        })
        .collect();
    write_jsonl(path, &records)
}

pub fn read_dictionary(path: &Path) -> Result<PathletDictionary> {
    let records: Vec<DictionaryRecord> = read_jsonl(path)?;
    Ok(PathletDictionary {
        pathlets: records
            .iter()
            .map(|r| Pathlet { ranks: r.ranks.clone(), support: r.support })
            .collect(),
        influence: records.iter().map(|r| r.influence).collect(),
    })
}

pub fn write_embedded_pairs(path: &Path, pairs: &[EmbeddedPair]) -> Result<()> {
    write_jsonl(path, pairs)
}

pub fn read_embedded_pairs(path: &Path) -> Result<Vec<EmbeddedPair>> {
    read_jsonl(path)
}

/// CSV view of pair embeddings: one row per pair, one column per
/// dictionary pathlet labeled by its rank sequence.
pub fn write_embeddings_csv(
    path: &Path,
    dict: &PathletDictionary,
    pairs: &[EmbeddedPair],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "user,genre,kind")?;
    for label in dict.labels() {
        write!(out, ",{label}")?;
    }
    writeln!(out)?;
    for ep in pairs {
        write!(out, "{},{},{}", ep.pair.user, ep.pair.genre, ep.pair.kind.label())?;
        for v in &ep.features {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_loss_csv(path: &Path, loss_history: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "epoch,loss")?;
    for (epoch, loss) in loss_history.iter().enumerate() {
        writeln!(out, "{epoch},{loss}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_graph_edges(path: &Path, graph: &TrajectoryGraph) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (from, to) in graph.edges() {
        writeln!(out, "{from} {to}")?;
    }
    out.flush()?;
    Ok(())
}

/// Predictions as a users x genres CSV. Excluded users appear as
/// all-zero rows; reading recovers the exclusion flags from that.
pub fn write_predictions_csv(
    path: &Path,
    users: &Vocab,
    genres: &Vocab,
    pred: &PredictionMatrix,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "user")?;
    for g in genres.ids() {
        write!(out, ",{g}")?;
    }
    writeln!(out)?;
    for (u, row) in pred.values.rows().into_iter().enumerate() {
        write!(out, "{}", users.id(u))?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_predictions_csv(
    path: &Path,
    users: &Vocab,
    genres: &Vocab,
) -> Result<PredictionMatrix> {
    let file = File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(file));
    {
        let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        let expected: Vec<&str> =
            std::iter::once("user").chain(genres.ids().iter().map(String::as_str)).collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Input(format!(
                "{}: genre columns do not match the allocation artifact",
                path.display()
            )));
        }
    }
    let mut values = Array2::zeros((users.len(), genres.len()));
    let mut seen = vec![false; users.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?;
        let user = record.get(0).unwrap_or_default();
        let u = users
            .get(user)
            .ok_or_else(|| Error::Lookup { kind: "user", id: user.to_owned() })?;
        seen[u] = true;
        for g in 0..genres.len() {
            let field = record.get(g + 1).ok_or_else(|| Error::Parse {
                line: i + 2,
                msg: format!("missing column {}", g + 1),
            })?;
            values[[u, g]] = field.parse().map_err(|e| Error::Parse {
                line: i + 2,
                msg: format!("bad float: {e}"),
            })?;
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Input(format!(
            "{}: no prediction row for user {}",
            path.display(),
            users.id(missing)
        )));
    }
    let excluded = values
        .rows()
        .into_iter()
        .map(|row| row.iter().all(|&v| v == 0.0))
        .collect();
    Ok(PredictionMatrix { values, excluded })
}

pub fn write_variation_csv(path: &Path, decomposition: &VariationDecomposition) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "decile,mean_tv,appearance_share,disappearance_share,persistence_share,n")?;
    for b in &decomposition.deciles {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            b.decile,
            b.mean_tv,
            b.mean_shares.appearance,
            b.mean_shares.disappearance,
            b.mean_shares.persistence,
            b.n
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_profiles_csv(
    path: &Path,
    profiles: &[PathletProfile],
    correlations: Option<&[f64]>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "pathlet,inertial,mean_rank,diversity,correlation")?;
    for (i, p) in profiles.iter().enumerate() {
        let label =
            p.ranks.iter().map(u32::to_string).collect::<Vec<_>>().join("-");
        let corr = correlations
            .and_then(|c| c.get(i))
            .map(|c| c.to_string())
            .unwrap_or_default();
        writeln!(out, "{label},{},{},{},{corr}", p.inertial, p.mean_rank, p.diversity)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "lambda,cover_ratio,code_sparsity,mean_pathlets_per_trajectory,final_loss,epochs")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.lambda, p.cover_ratio, p.code_sparsity, p.mean_pathlets_per_trajectory, p.final_loss, p.epochs
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_genre_graph(json_path: &Path, dot_path: &Path, name: &str, graph: &GenreGraph) -> Result<()> {
    write_json(json_path, graph)?;
    std::fs::write(dot_path, graph.to_dot(name))?;
    Ok(())
}
