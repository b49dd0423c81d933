//! Games datasets: CSV ingestion, validation and multi-Games panels.
//!
//! One CSV row describes one NOC at one Games:
//!
//! ```text
//! code,name,population,m1,m2,m3,m4plus,gold,silver,bronze
//! NZL,New Zealand,5214000,14,0,2,0,10,7,3
//! ```
//!
//! `m1..m4plus` count athletes that won exactly 1, 2, 3 and 4-or-more medals.
//! Team medals count as a single nominal athlete with one medal. The
//! gold/silver/bronze columns are optional and only feed the lexicographic
//! baseline.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number of multiplicity bins; the last bin holds athletes with this many medals or more.
pub const MULTIPLICITY_BINS: usize = 4;

pub const CSV_HEADER: [&str; 10] = [
    "code", "name", "population", "m1", "m2", "m3", "m4plus", "gold", "silver", "bronze",
];

/// Relative gap between the official medal total and the summed NOC totals that triggers a warning.
const TOTAL_MISMATCH_WARN: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedalSplit {
    pub gold: u32,
    pub silver: u32,
    pub bronze: u32,
}

impl MedalSplit {
    pub fn total(&self) -> u32 {
        self.gold + self.silver + self.bronze
    }
}

/// One NOC at one Games.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NocRecord {
    pub code: String,
    pub name: String,
    pub population: u64,
    /// Athletes winning exactly 1, 2, 3 and >=4 medals.
    pub counts: [u32; MULTIPLICITY_BINS],
    pub medals: Option<MedalSplit>,
}

impl NocRecord {
    /// Total medals, `1*m1 + 2*m2 + 3*m3 + 4*m4plus`.
    pub fn total_medals(&self) -> u32 {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &m)| (i as u32 + 1) * m)
            .sum()
    }

    /// Number of distinct medal-winning athletes.
    pub fn unique_medalists(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn has_multimedalist(&self) -> bool {
        self.counts[1..].iter().any(|&m| m > 0)
    }

    pub fn is_medal_winner(&self) -> bool {
        self.unique_medalists() > 0
    }

    /// Observed medals per million inhabitants.
    pub fn observed_rate_per_million(&self) -> f64 {
        self.total_medals() as f64 / self.population as f64 * 1e6
    }
}

/// Per-Games metadata that does not live in the CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GamesMeta {
    pub year: u16,
    pub label: String,
    pub host: String,
    /// Official number of medals awarded (T).
    pub total_medals: u32,
    /// Maximum number of medals a single NOC could win (M).
    pub medal_quota: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GamesDataset {
    pub meta: GamesMeta,
    pub records: Vec<NocRecord>,
}

/// Non-fatal findings produced while loading a Games file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestWarning {
    /// Rows without a usable population figure.
    DroppedNoPopulation(Vec<String>),
    TotalMismatch { official: u32, summed: u32 },
}

impl std::fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IngestWarning::DroppedNoPopulation(codes) => {
                write!(f, "dropped NOCs without population: {}", codes.join(", "))
            }
            IngestWarning::TotalMismatch { official, summed } => write!(
                f,
                "official medal total {official} differs from summed NOC totals {summed} by more than 2%"
            ),
        }
    }
}

impl GamesDataset {
    /// Builds and validates a dataset from records that have already been parsed.
    pub fn new(meta: GamesMeta, records: Vec<NocRecord>) -> Result<(Self, Vec<IngestWarning>)> {
        if meta.total_medals == 0 {
            return Err(Error::Validation("total_medals must be positive".into()));
        }
        if meta.medal_quota == 0 || meta.medal_quota > meta.total_medals {
            return Err(Error::Validation(format!(
                "medal_quota {} must be in 1..={}",
                meta.medal_quota, meta.total_medals
            )));
        }
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.code.as_str()) {
                return Err(Error::Validation(format!("duplicate NOC code {}", r.code)));
            }
            if r.population == 0 {
                return Err(Error::Validation(format!("{}: population must be positive", r.code)));
            }
            if let Some(split) = r.medals {
                if split.total() != r.total_medals() {
                    return Err(Error::Validation(format!(
                        "{}: gold+silver+bronze = {} but multiplicity counts imply {} medals",
                        r.code,
                        split.total(),
                        r.total_medals()
                    )));
                }
            }
        }
        if records.is_empty() {
            return Err(Error::Validation("dataset has no NOCs".into()));
        }
        let dataset = GamesDataset { meta, records };
        let mut warnings = Vec::new();
        let summed = dataset.summed_medals();
        let official = dataset.meta.total_medals;
        if (official as f64 - summed as f64).abs() > TOTAL_MISMATCH_WARN * official as f64 {
            warnings.push(IngestWarning::TotalMismatch { official, summed });
        }
        Ok((dataset, warnings))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn summed_medals(&self) -> u32 {
        self.records.iter().map(NocRecord::total_medals).sum()
    }

    pub fn codes(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.code.as_str()).collect()
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.records.iter().position(|r| r.code == code)
    }

    pub fn record(&self, code: &str) -> Option<&NocRecord> {
        self.records.iter().find(|r| r.code == code)
    }

    /// Medal counts pooled over NOCs per multiplicity bin.
    pub fn pooled_counts(&self) -> [u64; MULTIPLICITY_BINS] {
        let mut pooled = [0u64; MULTIPLICITY_BINS];
        for r in &self.records {
            for (acc, &m) in pooled.iter_mut().zip(&r.counts) {
                *acc += m as u64;
            }
        }
        pooled
    }

    pub fn medal_winner_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_medal_winner()).count()
    }

    /// Serializes the records in the canonical CSV layout.
    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        write_records(&mut out, &self.records).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("csv output is utf-8")
    }

    /// SHA-256 over the metadata and canonical CSV serialization.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let meta = serde_json::to_string(&self.meta).expect("metadata serializes");
        hasher.update(meta.as_bytes());
        hasher.update(b"\n");
        hasher.update(self.to_csv_string().as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        write_records(&mut file, &self.records).map_err(|e| Error::io(path, e))
    }
}

fn write_records<W: Write>(out: W, records: &[NocRecord]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let split = |f: fn(&MedalSplit) -> u32| r.medals.as_ref().map(|s| f(s).to_string()).unwrap_or_default();
        w.write_record([
            r.code.clone(),
            r.name.clone(),
            r.population.to_string(),
            r.counts[0].to_string(),
            r.counts[1].to_string(),
            r.counts[2].to_string(),
            r.counts[3].to_string(),
            split(|s| s.gold),
            split(|s| s.silver),
            split(|s| s.bronze),
        ])?;
    }
    w.flush()
}

/// Reads and validates one Games CSV file.
///
/// Rows whose population is empty or zero are dropped and reported in the
/// returned warnings (and via `log::warn!`).
pub fn load_games_csv(path: &Path, meta: GamesMeta) -> Result<GamesDataset> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    file.read_to_string(&mut text).map_err(|e| Error::io(path, e))?;
    let (dataset, warnings) = parse_games_csv(&text, meta)?;
    for w in &warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(dataset)
}

/// Parses Games CSV text. See [`load_games_csv`].
pub fn parse_games_csv(text: &str, meta: GamesMeta) -> Result<(GamesDataset, Vec<IngestWarning>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Ingest { row: 0, column: "header".into(), message: e.to_string() })?
        .clone();
    let header: Vec<&str> = header.iter().collect();
    if header != CSV_HEADER {
        return Err(Error::Ingest {
            row: 0,
            column: "header".into(),
            message: format!("expected `{}`, found `{}`", CSV_HEADER.join(","), header.join(",")),
        });
    }

    let mut records = Vec::new();
    let mut dropped = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        // Row 1 is the header.
        let row_no = i + 2;
        let row = row.map_err(|e| Error::Ingest { row: row_no, column: "-".into(), message: e.to_string() })?;
        let field = |col: usize| row.get(col).unwrap_or("");
        let code = field(0).to_string();
        if code.is_empty() {
            return Err(Error::Ingest { row: row_no, column: "code".into(), message: "empty NOC code".into() });
        }
        if !seen.insert(code.clone()) {
            return Err(Error::Validation(format!("duplicate NOC code {code}")));
        }
        let population = match field(2) {
            "" => 0,
            s => parse_count::<u64>(s, row_no, "population")?,
        };
        if population == 0 {
            dropped.push(code);
            continue;
        }
        let mut counts = [0u32; MULTIPLICITY_BINS];
        for (k, slot) in counts.iter_mut().enumerate() {
            *slot = parse_count::<u32>(field(3 + k), row_no, CSV_HEADER[3 + k])?;
        }
        let split_fields = [field(7), field(8), field(9)];
        let medals = if split_fields.iter().all(|s| s.is_empty()) {
            None
        } else if split_fields.iter().any(|s| s.is_empty()) {
            return Err(Error::Ingest {
                row: row_no,
                column: "gold/silver/bronze".into(),
                message: "medal split must be given completely or not at all".into(),
            });
        } else {
            Some(MedalSplit {
                gold: parse_count(split_fields[0], row_no, "gold")?,
                silver: parse_count(split_fields[1], row_no, "silver")?,
                bronze: parse_count(split_fields[2], row_no, "bronze")?,
            })
        };
        records.push(NocRecord { code, name: field(1).to_string(), population, counts, medals });
    }

    let (dataset, mut warnings) = GamesDataset::new(meta, records)?;
    if !dropped.is_empty() {
        warnings.insert(0, IngestWarning::DroppedNoPopulation(dropped));
    }
    Ok((dataset, warnings))
}

fn parse_count<T: std::str::FromStr>(s: &str, row: usize, column: &str) -> Result<T> {
    s.parse::<T>().map_err(|_| Error::Ingest {
        row,
        column: column.to_string(),
        message: format!("`{s}` is not a non-negative integer"),
    })
}

/// One entry of a games list: the CSV path plus its metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GamesSource {
    pub file: PathBuf,
    pub year: u16,
    pub label: String,
    pub host: String,
    pub total_medals: u32,
    pub medal_quota: u32,
}

impl GamesSource {
    pub fn meta(&self) -> GamesMeta {
        GamesMeta {
            year: self.year,
            label: self.label.clone(),
            host: self.host.clone(),
            total_medals: self.total_medals,
            medal_quota: self.medal_quota,
        }
    }

    pub fn load(&self) -> Result<GamesDataset> {
        load_games_csv(&self.file, self.meta())
    }
}

/// Sidecar TOML listing Games files and their metadata (`[[games]]` tables).
/// Relative `file` entries resolve against the sidecar's directory.
pub fn load_games_index(path: &Path) -> Result<Vec<GamesSource>> {
    #[derive(Deserialize)]
    struct Index {
        games: Vec<GamesSource>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let index: Index = toml::from_str(&text)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(index
        .games
        .into_iter()
        .map(|mut g| {
            if g.file.is_relative() {
                g.file = base.join(&g.file);
            }
            g
        })
        .collect())
}

/// Medal totals for every NOC across a sequence of Games. `None` marks a
/// Games the NOC did not enter; a zero means it entered and won nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiGamesPanel {
    pub games: Vec<GamesDataset>,
    pub series: BTreeMap<String, Vec<Option<u32>>>,
}

impl MultiGamesPanel {
    pub fn new(games: Vec<GamesDataset>) -> Result<Self> {
        if games.len() < 2 {
            return Err(Error::Validation("a panel needs at least two Games".into()));
        }
        for pair in games.windows(2) {
            if pair[0].meta.year >= pair[1].meta.year {
                return Err(Error::Validation(format!(
                    "Games years must be strictly increasing ({} then {})",
                    pair[0].meta.year, pair[1].meta.year
                )));
            }
        }
        let mut series: BTreeMap<String, Vec<Option<u32>>> = BTreeMap::new();
        for (g, games_ds) in games.iter().enumerate() {
            for r in &games_ds.records {
                series.entry(r.code.clone()).or_insert_with(|| vec![None; games.len()])[g] =
                    Some(r.total_medals());
            }
        }
        Ok(MultiGamesPanel { games, series })
    }

    pub fn years(&self) -> Vec<u16> {
        self.games.iter().map(|g| g.meta.year).collect()
    }

    /// NOC codes that hosted any Games in the panel window.
    pub fn hosts(&self) -> HashSet<&str> {
        self.games.iter().map(|g| g.meta.host.as_str()).collect()
    }
}

/// Loads a panel from Games sources given in increasing year order.
pub fn load_panel_csv(sources: &[GamesSource]) -> Result<MultiGamesPanel> {
    if sources.len() < 2 {
        return Err(Error::Validation("a panel needs at least two Games".into()));
    }
    for pair in sources.windows(2) {
        if pair[0].year >= pair[1].year {
            return Err(Error::Validation(format!(
                "Games years must be strictly increasing ({} then {})",
                pair[0].year, pair[1].year
            )));
        }
    }
    let games = sources.iter().map(GamesSource::load).collect::<Result<Vec<_>>>()?;
    MultiGamesPanel::new(games)
}
