//! Command-line front end.
//!
//! Settings come from an optional TOML run config; any flag given on the
//! command line overrides the file. Exit codes: 0 success, 1 internal or
//! numerical failure, 2 invalid input, 3 convergence failure (unless
//! `--allow-unconverged`), 4 I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, NDefinition};
use crate::data::{load_games_csv, load_games_index, load_panel_csv, GamesDataset, GamesMeta, GamesSource, MultiGamesPanel};
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::model::{HyperParams, PriorFamily, PriorSpec};
use crate::output::{self, CommandManifest};
use crate::par::Execution;
use crate::ranking::{self, OrderStatistic, RankingTable};
use crate::sampler::{run_sampler, SamplerConfig};
use crate::simulate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_UNCONVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Ingest { .. } | Error::Validation(_) | Error::Domain(_) | Error::Dimension { .. } => EXIT_VALIDATION,
        Error::Io { .. } => EXIT_IO,
        Error::Games { source, .. } => exit_code(source),
        Error::Numeric(_) | Error::Sampler(_) => EXIT_FAILURE,
    }
}

/// Games file plus metadata, any of which may be left to another source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GamesEntry {
    pub file: Option<PathBuf>,
    pub year: Option<u16>,
    pub label: Option<String>,
    pub host: Option<String>,
    pub total_medals: Option<u32>,
    pub medal_quota: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSettings {
    pub reps: usize,
    pub level: f64,
    pub grid_points: usize,
}

impl Default for DiagnoseSettings {
    fn default() -> Self {
        DiagnoseSettings { reps: 100_000, level: 0.90, grid_points: 50 }
    }
}

/// Contents of a `--config` file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub games: GamesEntry,
    /// Games list (`[[games]]` TOML) for panel commands.
    pub panel: Option<PathBuf>,
    pub prior: PriorSpec,
    pub sampler: SamplerConfig,
    pub order: OrderStatistic,
    pub n_definition: NDefinition,
    pub output: PathBuf,
    pub allow_unconverged: bool,
    pub diagnose: DiagnoseSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            games: GamesEntry::default(),
            panel: None,
            prior: PriorSpec::default(),
            sampler: SamplerConfig::default(),
            order: OrderStatistic::Mean,
            n_definition: NDefinition::AllNocs,
            output: PathBuf::from("out"),
            allow_unconverged: false,
            diagnose: DiagnoseSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = output::read_file(path)?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(f) = cfg.games.file.as_mut() {
            rebase(f);
        }
        if let Some(p) = cfg.panel.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.output);
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "medalrank", version, about = "Bayesian per-capita ranking of Olympic medal tables")]
pub struct Cli {
    /// -v for info, -vv for debug logging.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// TOML run config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GamesArgs {
    /// Games CSV. Metadata missing from flags and config is read from a
    /// sidecar `<file stem>.toml` next to it.
    #[arg(long)]
    pub games: Option<PathBuf>,
    #[arg(long)]
    pub year: Option<u16>,
    #[arg(long)]
    pub label: Option<String>,
    /// Host NOC code.
    #[arg(long)]
    pub host: Option<String>,
    /// Official number of medals awarded.
    #[arg(long)]
    pub total_medals: Option<u32>,
    /// Most medals a single NOC could win.
    #[arg(long)]
    pub medal_quota: Option<u32>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SamplerArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub adapt_iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Iterations after burn-in, before thinning.
    #[arg(long)]
    pub keep_iters: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub rhat_threshold: Option<f64>,
    /// Run chains on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
    /// Exit 0 even when R-hat exceeds the threshold.
    #[arg(long)]
    pub allow_unconverged: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to one Games and write draws, manifest and convergence report.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        games: GamesArgs,
        /// beta | lognormal | logitnormal | mixture
        #[arg(long)]
        prior: Option<PriorFamily>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Posterior rank table and shrinkage summary from a fit.
    Rank {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        games: GamesArgs,
        /// Fit directory or its manifest.json.
        #[arg(long)]
        fit: PathBuf,
        /// mean | median
        #[arg(long)]
        order: Option<OrderStatistic>,
    },
    /// Join the posterior ranking with the per-capita, lexicographic and U-index baselines.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        games: GamesArgs,
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        order: Option<OrderStatistic>,
        /// all-nocs | medal-winners
        #[arg(long)]
        n_definition: Option<NDefinition>,
    },
    /// Fit several prior families and tabulate the rankings side by side.
    Sensitivity {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        games: GamesArgs,
        /// Comma-separated prior families.
        #[arg(long, value_delimiter = ',', default_value = "beta,lognormal,logitnormal,mixture")]
        priors: Vec<PriorFamily>,
        #[arg(long)]
        order: Option<OrderStatistic>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Mean-variance points, Poisson variance band and successive-Games tests for a panel.
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        /// Games list TOML (`[[games]]` tables).
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Base seed; the band uses seed + 1.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Fit every Games of a panel separately and tabulate each NOC's rank path.
    Trajectory {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long)]
        prior: Option<PriorFamily>,
        #[arg(long)]
        order: Option<OrderStatistic>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Simulate multiplicity counts for the NOCs of a template Games file.
    Simulate {
        #[command(flatten)]
        games: GamesArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV; a metadata sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 4e6)]
        beta: f64,
        #[arg(long, default_value_t = 0.2)]
        q2: f64,
        #[arg(long, default_value_t = 0.2)]
        q3: f64,
        #[arg(long, default_value_t = 0.2)]
        q4: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn base_config(common_config: Option<&Path>) -> Result<RunConfig> {
    match common_config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn apply_sampler(cfg: &mut RunConfig, a: &SamplerArgs) {
    let s = &mut cfg.sampler;
    s.seed = a.seed.unwrap_or(s.seed);
    s.chains = a.chains.unwrap_or(s.chains);
    s.adapt_iters = a.adapt_iters.unwrap_or(s.adapt_iters);
    s.burn_in = a.burn_in.unwrap_or(s.burn_in);
    s.keep_iters = a.keep_iters.unwrap_or(s.keep_iters);
    s.thin = a.thin.unwrap_or(s.thin);
    s.rhat_threshold = a.rhat_threshold.unwrap_or(s.rhat_threshold);
    if a.sequential {
        s.execution = Execution::Sequential;
    }
    cfg.allow_unconverged |= a.allow_unconverged;
}

/// Metadata fields a sidecar TOML may provide.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct Sidecar {
    year: Option<u16>,
    label: Option<String>,
    host: Option<String>,
    total_medals: Option<u32>,
    medal_quota: Option<u32>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("toml")
}

/// Resolves the Games source from flags, then config, then sidecar.
pub fn resolve_games(cfg: &RunConfig, a: &GamesArgs) -> Result<GamesSource> {
    let file = a
        .games
        .clone()
        .or_else(|| cfg.games.file.clone())
        .ok_or_else(|| Error::Validation("no Games file given (--games or [games].file)".into()))?;
    let side = sidecar_path(&file);
    let sidecar: Sidecar = if side.exists() {
        toml::from_str(&output::read_file(&side)?).map_err(|e| Error::Validation(format!("{}: {e}", side.display())))?
    } else {
        Sidecar::default()
    };
    let missing = |name: &str| {
        Error::Validation(format!("Games metadata `{name}` missing (flag, config or {})", side.display()))
    };
    let g = &cfg.games;
    Ok(GamesSource {
        year: a.year.or(g.year).or(sidecar.year).ok_or_else(|| missing("year"))?,
        label: a.label.clone().or(g.label.clone()).or(sidecar.label).ok_or_else(|| missing("label"))?,
        host: a.host.clone().or(g.host.clone()).or(sidecar.host).ok_or_else(|| missing("host"))?,
        total_medals: a.total_medals.or(g.total_medals).or(sidecar.total_medals).ok_or_else(|| missing("total_medals"))?,
        medal_quota: a.medal_quota.or(g.medal_quota).or(sidecar.medal_quota).ok_or_else(|| missing("medal_quota"))?,
        file,
    })
}

pub fn write_sidecar(csv: &Path, meta: &GamesMeta) -> Result<()> {
    let text = toml::to_string(meta).map_err(|e| Error::Validation(e.to_string()))?;
    let path = sidecar_path(csv);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn manifest_path(fit: &Path) -> PathBuf {
    if fit.is_dir() {
        fit.join("manifest.json")
    } else {
        fit.to_path_buf()
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Unconverged,
}

fn convergence_outcome(passed: bool, allow: bool) -> Outcome {
    if passed || allow {
        Outcome::Done
    } else {
        Outcome::Unconverged
    }
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match execute(cli.command) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::Unconverged) => {
            eprintln!("error: sampler did not converge (pass --allow-unconverged to accept)");
            EXIT_UNCONVERGED
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Fit { common, games, prior, sampler } => {
            let mut cfg = base_config(common.config.as_deref())?;
            apply_sampler(&mut cfg, &sampler);
            if let Some(f) = prior {
                cfg.prior.family = f;
            }
            let out = common.out.unwrap_or(cfg.output.clone());
            let data = resolve_games(&cfg, &games)?.load()?;
            cmd_fit(&data, &cfg.prior, &cfg.sampler, &out, cfg.allow_unconverged)
        }
        Command::Rank { common, games, fit, order } => {
            let cfg = base_config(common.config.as_deref())?;
            let data = resolve_games(&cfg, &games)?.load()?;
            let out = common.out.unwrap_or_else(|| fit_dir(&fit));
            cmd_rank(&data, &manifest_path(&fit), order.unwrap_or(cfg.order), &out)?;
            Ok(Outcome::Done)
        }
        Command::Compare { common, games, fit, order, n_definition } => {
            let cfg = base_config(common.config.as_deref())?;
            let data = resolve_games(&cfg, &games)?.load()?;
            let out = common.out.unwrap_or_else(|| fit_dir(&fit));
            cmd_compare(
                &data,
                &manifest_path(&fit),
                order.unwrap_or(cfg.order),
                n_definition.unwrap_or(cfg.n_definition),
                &out,
            )?;
            Ok(Outcome::Done)
        }
        Command::Sensitivity { common, games, priors, order, sampler } => {
            let mut cfg = base_config(common.config.as_deref())?;
            apply_sampler(&mut cfg, &sampler);
            let out = common.out.unwrap_or(cfg.output.clone());
            let data = resolve_games(&cfg, &games)?.load()?;
            cmd_sensitivity(&data, &cfg.prior, &priors, &cfg.sampler, order.unwrap_or(cfg.order), &out, cfg.allow_unconverged)
        }
        Command::Diagnose { common, panel, seed, reps, level, grid_points } => {
            let mut cfg = base_config(common.config.as_deref())?;
            cfg.sampler.seed = seed.unwrap_or(cfg.sampler.seed);
            cfg.diagnose.reps = reps.unwrap_or(cfg.diagnose.reps);
            cfg.diagnose.level = level.unwrap_or(cfg.diagnose.level);
            cfg.diagnose.grid_points = grid_points.unwrap_or(cfg.diagnose.grid_points);
            let out = common.out.unwrap_or(cfg.output.clone());
            let panel = load_panel(panel.or(cfg.panel.clone()))?;
            cmd_diagnose(&panel, cfg.sampler.seed, &cfg.diagnose, &out)?;
            Ok(Outcome::Done)
        }
        Command::Trajectory { common, panel, prior, order, sampler } => {
            let mut cfg = base_config(common.config.as_deref())?;
            apply_sampler(&mut cfg, &sampler);
            if let Some(f) = prior {
                cfg.prior.family = f;
            }
            let out = common.out.unwrap_or(cfg.output.clone());
            let panel = load_panel(panel.or(cfg.panel.clone()))?;
            cmd_trajectory(&panel, &cfg.prior, &cfg.sampler, order.unwrap_or(cfg.order), &out, cfg.allow_unconverged)
        }
        Command::Simulate { games, config, out, alpha, beta, q2, q3, q4, seed } => {
            let cfg = base_config(config.as_deref())?;
            let template = resolve_games(&cfg, &games)?.load()?;
            cmd_simulate(&template, HyperParams::Beta { alpha, beta }, [q2, q3, q4], seed, &out)?;
            Ok(Outcome::Done)
        }
    }
}

fn fit_dir(fit: &Path) -> PathBuf {
    if fit.is_dir() {
        fit.to_path_buf()
    } else {
        fit.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn load_panel(path: Option<PathBuf>) -> Result<MultiGamesPanel> {
    let path = path.ok_or_else(|| Error::Validation("no panel given (--panel or `panel` in config)".into()))?;
    load_panel_csv(&load_games_index(&path)?)
}

pub fn cmd_fit(data: &GamesDataset, spec: &PriorSpec, config: &SamplerConfig, out: &Path, allow_unconverged: bool) -> Result<Outcome> {
    let (draws, report) = run_sampler(data, spec, config)?;
    let (_, hash) = output::persist_fit(out, data, spec, &draws, &report)?;
    log::info!("fit written to {} (manifest {hash})", out.display());
    Ok(convergence_outcome(report.passed, allow_unconverged))
}

pub fn cmd_rank(data: &GamesDataset, manifest: &Path, order: OrderStatistic, out: &Path) -> Result<RankingTable> {
    let (draws, _, hash) = output::load_fit(manifest, Some(data))?;
    let table = ranking::summarize_ranks(&draws, data, order)?;
    output::ranking_table(&table).write(&out.join("ranking.csv"), &out.join("ranking.json"), &hash)?;
    let shrinkage = ranking::shrinkage_table(&draws, data)?;
    output::shrinkage_table(&shrinkage).write(&out.join("shrinkage.csv"), &out.join("shrinkage.json"), &hash)?;
    Ok(table)
}

pub fn cmd_compare(
    data: &GamesDataset,
    manifest: &Path,
    order: OrderStatistic,
    n_def: NDefinition,
    out: &Path,
) -> Result<RankingTable> {
    let (draws, _, hash) = output::load_fit(manifest, Some(data))?;
    let table = ranking::summarize_ranks(&draws, data, order)?;
    let base = baselines::baseline_table(data, n_def)?;
    let joined = baselines::join(&table, &base)?;
    output::baseline_table(&base).write(&out.join("baselines.csv"), &out.join("baselines.json"), &hash)?;
    output::ranking_table(&joined).write(&out.join("comparison.csv"), &out.join("comparison.json"), &hash)?;
    output::method_comparison_table(&joined, &base).write(&out.join("methods.csv"), &out.join("methods.json"), &hash)?;
    Ok(joined)
}

pub fn cmd_sensitivity(
    data: &GamesDataset,
    base_spec: &PriorSpec,
    families: &[PriorFamily],
    config: &SamplerConfig,
    order: OrderStatistic,
    out: &Path,
    allow_unconverged: bool,
) -> Result<Outcome> {
    if families.is_empty() {
        return Err(Error::Validation("no prior families given".into()));
    }
    let mut fits = Vec::new();
    let mut inputs = vec![("dataset".to_string(), data.fingerprint())];
    let mut all_passed = true;
    for &family in families {
        let spec = PriorSpec { family, ..base_spec.clone() };
        let (draws, report) = run_sampler(data, &spec, config)?;
        let dir = out.join(family.name());
        let (_, hash) = output::persist_fit(&dir, data, &spec, &draws, &report)?;
        all_passed &= report.passed;
        let table = ranking::summarize_ranks(&draws, data, order)?;
        output::ranking_table(&table).write(&dir.join("ranking.csv"), &dir.join("ranking.json"), &hash)?;
        inputs.push((family.name().to_string(), hash));
        fits.push((family, table));
    }
    let manifest = CommandManifest::new(
        "sensitivity",
        config.seed,
        inputs,
        serde_json::json!({ "order": order, "families": families.iter().map(|f| f.name()).collect::<Vec<_>>() }),
    );
    let hash = manifest.write(&out.join("sensitivity_manifest.json"))?;
    output::sensitivity_table(&fits).write(&out.join("sensitivity.csv"), &out.join("sensitivity.json"), &hash)?;
    Ok(convergence_outcome(all_passed, allow_unconverged))
}

pub fn cmd_diagnose(panel: &MultiGamesPanel, seed: u64, settings: &DiagnoseSettings, out: &Path) -> Result<()> {
    let band_seed = seed.wrapping_add(1);
    let points = diagnostics::mean_variance_panel(panel);
    let exec = Execution::default();
    let positive: Vec<f64> = points.iter().map(|p| p.sample_mean).filter(|&m| m > 0.0).collect();
    let band = if positive.is_empty() {
        Vec::new()
    } else {
        let lo = positive.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = positive.iter().cloned().fold(0.0, f64::max);
        let grid = diagnostics::log_grid(lo, hi.max(lo), settings.grid_points.max(1));
        diagnostics::variance_band_grid(&grid, panel.games.len(), settings.level, settings.reps, band_seed, exec)?
    };
    let coverage = if positive.is_empty() {
        None
    } else {
        Some(diagnostics::band_coverage(&points, settings.level, settings.reps, band_seed, true, exec)?)
    };
    let pairs = diagnostics::successive_pair_pvalues(panel);

    let inputs = panel.games.iter().map(|g| (g.meta.year.to_string(), g.fingerprint())).collect();
    let manifest = CommandManifest::new("diagnose", seed, inputs, serde_json::to_value(settings).expect("settings serialize"));
    let hash = manifest.write(&out.join("diagnose_manifest.json"))?;

    let mut mv = output::mean_variance_table(&points);
    if let Some((fraction, n)) = coverage {
        log::info!("{:.1}% of {n} non-host NOCs inside their band", 100.0 * fraction);
        mv.meta.push(("non_host_band_coverage".into(), fraction.into()));
        mv.meta.push(("non_host_nocs_with_positive_mean".into(), n.into()));
    }
    mv.write(&out.join("mean_variance.csv"), &out.join("mean_variance.json"), &hash)?;
    output::band_table(&band, panel.games.len(), settings.level).write(&out.join("variance_band.csv"), &out.join("variance_band.json"), &hash)?;
    output::pair_test_table(&pairs).write(&out.join("successive_pairs.csv"), &out.join("successive_pairs.json"), &hash)?;
    Ok(())
}

pub fn cmd_trajectory(
    panel: &MultiGamesPanel,
    spec: &PriorSpec,
    config: &SamplerConfig,
    order: OrderStatistic,
    out: &Path,
    allow_unconverged: bool,
) -> Result<Outcome> {
    let entries = ranking::rank_trajectory(panel, spec, config, order)?;
    let inputs = panel.games.iter().map(|g| (g.meta.year.to_string(), g.fingerprint())).collect();
    let settings = serde_json::json!({ "prior": spec, "sampler": config, "order": order });
    let hash = CommandManifest::new("trajectory", config.seed, inputs, settings).write(&out.join("trajectory_manifest.json"))?;
    output::trajectory_table(&entries).write(&out.join("trajectory.csv"), &out.join("trajectory.json"), &hash)?;
    Ok(convergence_outcome(entries.iter().all(|e| e.convergence.passed), allow_unconverged))
}

pub fn cmd_simulate(template: &GamesDataset, hyper: HyperParams, q: [f64; 3], seed: u64, out: &Path) -> Result<GamesDataset> {
    let spec = PriorSpec::new(PriorFamily::Beta);
    if crate::model::ln_hyperprior(&hyper, &spec) == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("{hyper:?} lies outside the hyperprior support")));
    }
    if q.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
        return Err(Error::Domain("q values must lie in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nocs: Vec<(String, u64)> = template.records.iter().map(|r| (r.code.clone(), r.population)).collect();
    let p: Vec<f64> = nocs.iter().map(|_| simulate::draw_ln_p(&hyper, PriorFamily::Beta, &mut rng).exp()).collect();
    let mut data = simulate::simulate_dataset(&nocs, &p, q, template.meta.year, &mut rng)?;
    for (r, t) in data.records.iter_mut().zip(&template.records) {
        r.name = t.name.clone();
    }
    data.meta.host = template.meta.host.clone();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    data.write_csv(out)?;
    write_sidecar(out, &data.meta)?;
    Ok(data)
}

/// Loads a Games CSV whose metadata sits in its sidecar.
pub fn load_with_sidecar(csv: &Path) -> Result<GamesDataset> {
    let source = resolve_games(&RunConfig::default(), &GamesArgs { games: Some(csv.to_path_buf()), ..Default::default() })?;
    load_games_csv(&source.file, source.meta())
}
