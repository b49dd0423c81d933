//! Persisted artifacts: posterior draws CSV, run manifest and tabular outputs.
//!
//! Every table written here carries the hash of the run manifest it came
//! from, as a leading `manifest_hash` column in CSV and a top-level field in
//! JSON.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{GamesDataset, GamesMeta};
use crate::error::{Error, Result};
use crate::model::{HyperParams, PriorFamily, PriorSpec};
use crate::sampler::{ChainDraws, ConvergenceReport, PosteriorDraws, SamplerConfig, RNG_NAME};

pub const TOOL: &str = concat!("medalrank ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// Plain decimal for table cells, exponent form only for very small or large magnitudes.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Validation(format!("csv: {e}"))
}

// ---------------------------------------------------------------- draws

fn draws_header(draws: &PosteriorDraws) -> Vec<String> {
    let mut h: Vec<String> = ["chain", "iter", "q2", "q3", "q4"].iter().map(|s| s.to_string()).collect();
    h.extend(draws.hyper_names.iter().cloned());
    h.extend(draws.codes.iter().map(|c| format!("p_{c}")));
    h
}

/// One row per retained draw: chain, iteration, q's, hyperparameters, `p_<CODE>`.
pub fn draws_to_csv(draws: &PosteriorDraws) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(draws_header(draws)).expect("in-memory write");
    for (c, chain) in draws.chains.iter().enumerate() {
        for it in 0..chain.len() {
            let mut row = vec![c.to_string(), it.to_string()];
            row.extend(chain.q.row(it).iter().map(|&v| fmt_f64(v)));
            row.extend(chain.hyper.row(it).iter().map(|&v| fmt_f64(v)));
            row.extend(chain.p.row(it).iter().map(|&v| fmt_f64(v)));
            w.write_record(&row).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Rebuilds draws from CSV text; the manifest supplies family, codes and config.
pub fn draws_from_csv(text: &str, manifest: &RunManifest) -> Result<PosteriorDraws> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut draws = PosteriorDraws {
        family: manifest.prior.family,
        codes: manifest.codes.clone(),
        hyper_names: HyperParams::names(manifest.prior.family).into_iter().map(String::from).collect(),
        chains: Vec::new(),
        dataset_fingerprint: manifest.dataset_fingerprint.clone(),
        config: manifest.sampler.clone(),
        acceptance: Vec::new(),
    };
    let expected = draws_header(&draws);
    if header != expected {
        return Err(Error::Validation("draws header does not match the manifest".into()));
    }
    let (n_hyper, n_p) = (draws.hyper_names.len(), draws.codes.len());
    let mut per_chain: Vec<Vec<Vec<f64>>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |col: &str, msg: &str| Error::Ingest { row: line + 2, column: col.to_string(), message: msg.to_string() };
        let chain: usize = rec[0].parse().map_err(|_| bad("chain", "not an integer"))?;
        let it: usize = rec[1].parse().map_err(|_| bad("iter", "not an integer"))?;
        if chain == per_chain.len() {
            per_chain.push(Vec::new());
        }
        if chain + 1 != per_chain.len() || it != per_chain[chain].len() {
            return Err(bad("iter", "rows must be grouped by chain in iteration order"));
        }
        let values = rec
            .iter()
            .enumerate()
            .skip(2)
            .map(|(k, s)| s.parse::<f64>().map_err(|_| bad(&expected[k], "not a number")))
            .collect::<Result<Vec<f64>>>()?;
        per_chain[chain].push(values);
    }
    for rows in per_chain {
        let n = rows.len();
        let take = |from: usize, width: usize| Array2::from_shape_fn((n, width), |(i, j)| rows[i][from + j]);
        draws.chains.push(ChainDraws { q: take(0, 3), hyper: take(3, n_hyper), p: take(3 + n_hyper, n_p) });
    }
    if draws.chains.len() != manifest.sampler.chains {
        return Err(Error::Validation(format!(
            "draws file has {} chains, manifest says {}",
            draws.chains.len(),
            manifest.sampler.chains
        )));
    }
    Ok(draws)
}

// ---------------------------------------------------------------- manifest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub passed: bool,
    pub rhat_threshold: f64,
    /// `None` when undefined (degenerate or non-finite).
    pub max_rhat: Option<f64>,
    pub min_ess: Option<f64>,
}

impl From<&ConvergenceReport> for ConvergenceSummary {
    fn from(r: &ConvergenceReport) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        ConvergenceSummary {
            passed: r.passed,
            rhat_threshold: r.rhat_threshold,
            max_rhat: finite(r.max_rhat),
            min_ess: finite(r.min_ess),
        }
    }
}

/// Everything needed to reproduce and audit one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub games: GamesMeta,
    pub dataset_fingerprint: String,
    pub prior: PriorSpec,
    pub sampler: SamplerConfig,
    pub rng: String,
    pub codes: Vec<String>,
    pub draws_file: String,
    pub draws_sha256: String,
    /// Post-adaptation acceptance rates per chain; undefined rates are null.
    pub acceptance: serde_json::Value,
    pub convergence: ConvergenceSummary,
}

impl RunManifest {
    pub fn new(
        data: &GamesDataset,
        spec: &PriorSpec,
        draws: &PosteriorDraws,
        report: &ConvergenceReport,
        draws_file: &str,
        draws_csv: &str,
    ) -> Self {
        RunManifest {
            tool: TOOL.to_string(),
            games: data.meta.clone(),
            dataset_fingerprint: draws.dataset_fingerprint.clone(),
            prior: spec.clone(),
            sampler: draws.config.clone(),
            rng: RNG_NAME.to_string(),
            codes: draws.codes.clone(),
            draws_file: draws_file.to_string(),
            draws_sha256: sha256_hex(draws_csv.as_bytes()),
            acceptance: serde_json::to_value(&draws.acceptance).expect("acceptance serializes"),
            convergence: report.into(),
        }
    }

    /// SHA-256 of the manifest's canonical JSON.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    manifest_hash: String,
    #[serde(flatten)]
    manifest: RunManifest,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<String> {
    let hash = manifest.hash();
    let file = ManifestFile { manifest_hash: hash.clone(), manifest: manifest.clone() };
    let mut text = serde_json::to_string_pretty(&file).expect("manifest serializes");
    text.push('\n');
    write_file(path, text.as_bytes())?;
    Ok(hash)
}

/// Reads a manifest and checks its recorded hash.
pub fn read_manifest(path: &Path) -> Result<(RunManifest, String)> {
    let text = read_file(path)?;
    let file: ManifestFile =
        serde_json::from_str(&text).map_err(|e| Error::Validation(format!("manifest {}: {e}", path.display())))?;
    let hash = file.manifest.hash();
    if hash != file.manifest_hash {
        return Err(Error::Validation(format!("manifest {} hash mismatch (edited?)", path.display())));
    }
    Ok((file.manifest, hash))
}

/// Writes the draws next to the manifest and returns the manifest hash.
pub fn persist_fit(
    dir: &Path,
    data: &GamesDataset,
    spec: &PriorSpec,
    draws: &PosteriorDraws,
    report: &ConvergenceReport,
) -> Result<(RunManifest, String)> {
    let draws_csv = draws_to_csv(draws);
    let draws_file = "draws.csv";
    write_file(&dir.join(draws_file), draws_csv.as_bytes())?;
    let manifest = RunManifest::new(data, spec, draws, report, draws_file, &draws_csv);
    let hash = write_manifest(&dir.join("manifest.json"), &manifest)?;
    let conv = convergence_table(report);
    conv.write(&dir.join("convergence.csv"), &dir.join("convergence.json"), &hash)?;
    Ok((manifest, hash))
}

/// Loads draws referenced by a manifest, checking the draws hash and,
/// when given, the dataset fingerprint.
pub fn load_fit(manifest_path: &Path, data: Option<&GamesDataset>) -> Result<(PosteriorDraws, RunManifest, String)> {
    let (manifest, hash) = read_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let draws_path = dir.join(&manifest.draws_file);
    let text = read_file(&draws_path)?;
    if sha256_hex(text.as_bytes()) != manifest.draws_sha256 {
        return Err(Error::Validation(format!("{} does not match the manifest's draws hash", draws_path.display())));
    }
    if let Some(data) = data {
        if data.fingerprint() != manifest.dataset_fingerprint {
            return Err(Error::Validation(
                "dataset fingerprint differs from the one the draws were fitted to".into(),
            ));
        }
    }
    let draws = draws_from_csv(&text, &manifest)?;
    Ok((draws, manifest, hash))
}

/// Provenance of a command that does not produce draws of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandManifest {
    pub tool: String,
    pub command: String,
    pub seed: u64,
    /// `(label, fingerprint or manifest hash)` of every input.
    pub inputs: Vec<(String, String)>,
    pub settings: serde_json::Value,
}

impl CommandManifest {
    pub fn new(command: &str, seed: u64, inputs: Vec<(String, String)>, settings: serde_json::Value) -> Self {
        CommandManifest { tool: TOOL.to_string(), command: command.to_string(), seed, inputs, settings }
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }

    pub fn write(&self, path: &Path) -> Result<String> {
        let hash = self.hash();
        let mut value = serde_json::to_value(self).expect("manifest serializes");
        value["manifest_hash"] = hash.clone().into();
        let mut text = serde_json::to_string_pretty(&value).expect("json");
        text.push('\n');
        write_file(path, text.as_bytes())?;
        Ok(hash)
    }
}

// ---------------------------------------------------------------- tables

/// A rectangular table serialized to both CSV and JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra top-level JSON fields, e.g. the ordering statistic.
    pub meta: Vec<(String, serde_json::Value)>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), meta: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, manifest_hash: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["manifest_hash".to_string()];
        header.extend(self.header.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut r = vec![manifest_hash.to_string()];
            r.extend(row.iter().cloned());
            w.write_record(&r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Rows as objects; numeric-looking cells become JSON numbers, empty cells null.
    pub fn to_json(&self, manifest_hash: &str) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj = self.header.iter().zip(row).map(|(k, v)| (k.clone(), cell_value(v))).collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let mut top = serde_json::Map::new();
        top.insert("manifest_hash".into(), manifest_hash.into());
        for (k, v) in &self.meta {
            top.insert(k.clone(), v.clone());
        }
        top.insert("rows".into(), rows.into());
        let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(top)).expect("json");
        s.push('\n');
        s
    }

    pub fn write(&self, csv_path: &Path, json_path: &Path, manifest_hash: &str) -> Result<()> {
        write_file(csv_path, self.to_csv(manifest_hash).as_bytes())?;
        write_file(json_path, self.to_json(manifest_hash).as_bytes())
    }
}

fn cell_value(s: &str) -> serde_json::Value {
    if s.is_empty() {
        return serde_json::Value::Null;
    }
    if let Ok(i) = s.parse::<i64>() {
        return i.into();
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => x.into(),
        _ => s.into(),
    }
}

pub fn ranking_table(table: &crate::ranking::RankingTable) -> Table {
    let joined = table.rows.iter().any(|r| r.baselines.is_some());
    let mut header = vec![
        "position",
        "code",
        "name",
        "population",
        "medal_total",
        "order_statistic",
        "posterior_mean_rank",
        "posterior_median_rank",
        "rank_ci80_lo",
        "rank_ci80_hi",
        "rate_median_per_million",
        "rate_ci95_lo_per_million",
        "rate_ci95_hi_per_million",
        "observed_rate_per_million",
    ];
    if joined {
        header.extend(["per_capita_rank", "lexicographic_rank", "u_index", "u_index_rank"]);
    }
    let mut out = Table::new(&header);
    out.meta.push(("order_statistic".into(), table.order.label().into()));
    for r in &table.rows {
        let mut row = vec![
            r.position.to_string(),
            r.code.clone(),
            r.name.clone(),
            r.population.to_string(),
            r.medal_total.to_string(),
            table.order.label().to_string(),
            fmt_num(r.posterior_mean_rank),
            fmt_num(r.posterior_median_rank),
            fmt_num(r.rank_ci80.0),
            fmt_num(r.rank_ci80.1),
            fmt_num(r.rate_median_per_million),
            fmt_num(r.rate_ci95_per_million.0),
            fmt_num(r.rate_ci95_per_million.1),
            fmt_num(r.observed_rate_per_million),
        ];
        if joined {
            let b = r.baselines.clone().unwrap_or_default();
            row.extend([
                fmt_opt(b.per_capita_rank),
                fmt_opt(b.lexicographic_rank),
                b.u_index.map(fmt_num).unwrap_or_default(),
                fmt_opt(b.u_index_rank),
            ]);
        }
        out.push(row);
    }
    out
}

pub fn shrinkage_table(records: &[crate::ranking::ShrinkageRecord]) -> Table {
    let mut out = Table::new(&[
        "code",
        "population",
        "medal_total",
        "observed_rate_per_million",
        "posterior_median_rate_per_million",
        "rate_ci95_lo_per_million",
        "rate_ci95_hi_per_million",
        "has_multimedalist",
        "zero_medal",
    ]);
    for r in records {
        out.push(vec![
            r.code.clone(),
            r.population.to_string(),
            r.medal_total.to_string(),
            fmt_num(r.observed_rate_per_million),
            fmt_num(r.posterior_median_rate_per_million),
            fmt_num(r.rate_ci95_per_million.0),
            fmt_num(r.rate_ci95_per_million.1),
            r.has_multimedalist.to_string(),
            r.zero_medal.to_string(),
        ]);
    }
    out
}

pub fn baseline_table(table: &crate::baselines::BaselineTable) -> Table {
    let mut out = Table::new(&[
        "code",
        "population",
        "medal_total",
        "per_capita_rate_per_million",
        "per_capita_rank",
        "lexicographic_rank",
        "u_index",
        "u_index_rank",
    ]);
    out.meta.push(("n_definition".into(), table.n_definition.name().into()));
    out.meta.push(("reference_population".into(), table.reference_population.into()));
    for r in &table.rows {
        out.push(vec![
            r.code.clone(),
            r.population.to_string(),
            r.medal_total.to_string(),
            fmt_num(r.per_capita_rate_per_million),
            fmt_opt(r.per_capita_rank),
            fmt_opt(r.lexicographic_rank),
            fmt_num(r.u_index),
            fmt_opt(r.u_index_rank),
        ]);
    }
    out
}

/// Long-format rank against population for every method (one row per NOC and method).
pub fn method_comparison_table(joined: &crate::ranking::RankingTable, baselines: &crate::baselines::BaselineTable) -> Table {
    let mut out = Table::new(&["code", "population", "method", "rank"]);
    for r in &joined.rows {
        let b = baselines.row(&r.code);
        let entries = [
            ("bayesian", Some(r.position)),
            ("per_capita", b.and_then(|b| b.per_capita_rank)),
            ("lexicographic", b.and_then(|b| b.lexicographic_rank)),
            ("u_index", b.and_then(|b| b.u_index_rank)),
        ];
        for (method, rank) in entries {
            if let Some(rank) = rank {
                out.push(vec![r.code.clone(), r.population.to_string(), method.to_string(), rank.to_string()]);
            }
        }
    }
    out
}

pub fn convergence_table(report: &ConvergenceReport) -> Table {
    let mut out = Table::new(&["parameter", "rhat", "rhat_bulk", "rhat_tail", "ess_bulk", "ess_tail", "degenerate"]);
    out.meta.push(("passed".into(), report.passed.into()));
    out.meta.push(("rhat_threshold".into(), report.rhat_threshold.into()));
    for d in &report.params {
        out.push(vec![
            d.name.clone(),
            fmt_num(d.rhat),
            fmt_num(d.rhat_bulk),
            fmt_num(d.rhat_tail),
            fmt_num(d.ess_bulk),
            fmt_num(d.ess_tail),
            d.degenerate.to_string(),
        ]);
    }
    out
}

pub fn trajectory_table(entries: &[crate::ranking::TrajectoryEntry]) -> Table {
    let mut out = Table::new(&["year", "label", "code", "position", "posterior_mean_rank", "posterior_median_rank", "converged"]);
    for e in entries {
        for r in &e.table.rows {
            out.push(vec![
                e.year.to_string(),
                e.label.clone(),
                r.code.clone(),
                r.position.to_string(),
                fmt_num(r.posterior_mean_rank),
                fmt_num(r.posterior_median_rank),
                e.convergence.passed.to_string(),
            ]);
        }
    }
    out
}

/// Cross-prior comparison: one row per NOC, position and mean rank per family.
pub fn sensitivity_table(fits: &[(PriorFamily, crate::ranking::RankingTable)]) -> Table {
    let mut header: Vec<String> = vec!["code".into()];
    for (family, _) in fits {
        header.push(format!("{}_position", family.name()));
        header.push(format!("{}_mean_rank", family.name()));
        header.push(format!("{}_rate_median_per_million", family.name()));
    }
    let mut codes: Vec<&str> = fits.first().map(|(_, t)| t.rows.iter().map(|r| r.code.as_str()).collect()).unwrap_or_default();
    for (_, t) in fits.iter().skip(1) {
        for r in &t.rows {
            if !codes.contains(&r.code.as_str()) {
                codes.push(&r.code);
            }
        }
    }
    let mut out = Table { header, rows: Vec::new(), meta: Vec::new() };
    for code in codes {
        let mut row = vec![code.to_string()];
        for (_, t) in fits {
            match t.row(code) {
                Some(r) => row.extend([r.position.to_string(), fmt_num(r.posterior_mean_rank), fmt_num(r.rate_median_per_million)]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        out.rows.push(row);
    }
    out
}

pub fn mean_variance_table(points: &[crate::diagnostics::MeanVarPoint]) -> Table {
    let mut out = Table::new(&["code", "sample_mean", "sample_variance", "games_count", "is_host_in_window"]);
    for p in points {
        out.push(vec![
            p.code.clone(),
            fmt_num(p.sample_mean),
            fmt_num(p.sample_variance),
            p.games_count.to_string(),
            p.is_host_in_window.to_string(),
        ]);
    }
    out
}

pub fn band_table(points: &[crate::diagnostics::BandPoint], n_games: usize, level: f64) -> Table {
    let mut out = Table::new(&["mean", "lo", "hi"]);
    out.meta.push(("n_games".into(), n_games.into()));
    out.meta.push(("level".into(), level.into()));
    for b in points {
        out.push(vec![fmt_num(b.mean), fmt_num(b.lo), fmt_num(b.hi)]);
    }
    out
}

pub fn pair_test_table(tests: &[crate::diagnostics::PairTest]) -> Table {
    let mut out = Table::new(&["code", "year_a", "year_b", "medals_a", "medals_b", "p_value"]);
    for t in tests {
        out.push(vec![
            t.code.clone(),
            t.year_a.to_string(),
            t.year_b.to_string(),
            t.medals_a.to_string(),
            t.medals_b.to_string(),
            fmt_num(t.p_value),
        ]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::NocRecord;
    use crate::sampler::run_sampler;

    fn small_fit() -> (GamesDataset, PriorSpec, PosteriorDraws, ConvergenceReport) {
        let records = vec![
            NocRecord { code: "AAA".into(), name: "A".into(), population: 1_000_000, counts: [3, 1, 0, 0], medals: None },
            NocRecord { code: "BBB".into(), name: "B".into(), population: 5_000_000, counts: [0, 0, 0, 0], medals: None },
            NocRecord { code: "CCC".into(), name: "C".into(), population: 200_000, counts: [1, 0, 0, 0], medals: None },
        ];
        let meta = GamesMeta { year: 2024, label: "t".into(), host: "AAA".into(), total_medals: 6, medal_quota: 6 };
        let data = GamesDataset::new(meta, records).unwrap().0;
        let spec = PriorSpec::new(PriorFamily::LogitNormal);
        let config = SamplerConfig { chains: 2, adapt_iters: 50, burn_in: 20, keep_iters: 40, thin: 2, seed: 3, ..Default::default() };
        let (draws, report) = run_sampler(&data, &spec, &config).unwrap();
        (data, spec, draws, report)
    }

    #[test]
    fn floats_round_trip_through_text() {
        for &x in &[0.1, 1e-300, 5e-324, 123456.789, -2.5e-17, f64::MAX] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
            assert_eq!(fmt_num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn fit_round_trips_bit_exactly() {
        let (data, spec, draws, report) = small_fit();
        let dir = tempfile::tempdir().unwrap();
        let (manifest, hash) = persist_fit(dir.path(), &data, &spec, &draws, &report).unwrap();
        assert_eq!(manifest.prior.family, PriorFamily::LogitNormal);
        let (back, m2, h2) = load_fit(&dir.path().join("manifest.json"), Some(&data)).unwrap();
        assert_eq!((m2, h2), (manifest, hash));
        assert_eq!(back.chains, draws.chains);
        assert_eq!(back.codes, draws.codes);
    }

    #[test]
    fn tampering_is_detected() {
        let (data, spec, draws, report) = small_fit();
        let dir = tempfile::tempdir().unwrap();
        persist_fit(dir.path(), &data, &spec, &draws, &report).unwrap();
        let manifest = dir.path().join("manifest.json");

        let mut other = data.clone();
        other.records[0].population += 1;
        assert!(load_fit(&manifest, Some(&other)).is_err());

        let draws_path = dir.path().join("draws.csv");
        let text = read_file(&draws_path).unwrap();
        fs::write(&draws_path, text.replacen('1', "2", 1)).unwrap();
        assert!(load_fit(&manifest, None).is_err());

        let m = read_file(&manifest).unwrap();
        fs::write(&manifest, m.replace("\"seed\": 3", "\"seed\": 4")).unwrap();
        assert!(read_manifest(&manifest).is_err());
    }

    #[test]
    fn tables_carry_the_hash() {
        let mut t = Table::new(&["code", "x"]);
        t.push(vec!["AAA".into(), "1.5".into()]);
        t.push(vec!["BBB".into(), String::new()]);
        let csv = t.to_csv("abc");
        assert_eq!(csv, "manifest_hash,code,x\nabc,AAA,1.5\nabc,BBB,\n");
        let json: serde_json::Value = serde_json::from_str(&t.to_json("abc")).unwrap();
        assert_eq!(json["manifest_hash"], "abc");
        assert_eq!(json["rows"][0]["x"], 1.5);
        assert!(json["rows"][1]["x"].is_null());
        assert_eq!(json["rows"][1]["code"], "BBB");
    }
}
