//! `selcert` subcommands.
//!
//! Exit codes: 0 success, 1 usage/schema/IO error, 2 infeasible certificate.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{ArgGroup, Args, Parser, Subcommand};
use selcert_core::metrics::selective_significance_with;
use selcert_core::sim::{confidence_grid, validate_guarantee_with, GuaranteeSummary};
use selcert_core::{
    apply, carve_fraction, certify_threshold, generate_synthetic, retain_rate, selective_report,
    temporal_split, tradeoff_curve, Decision, Metric, Outcome, RiskConfig, SplitSpec,
    SyntheticScorerSpec,
};

use crate::error::{Error, Result};
use crate::exec::Parallel;
use crate::io::{self, Format, ReadOptions};
use crate::manifest::RunManifest;
use crate::wire::{self, CertificateDoc, CurveDoc, ReportDoc, SignificanceDoc, TrialsDoc};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

pub const DEFAULT_CALIB_FRACTION: f64 = 0.2;

#[derive(Debug, Parser)]
#[command(
    name = "selcert",
    version,
    about = "Certify abstention thresholds for binary classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify a confidence threshold on a calibration set.
    Calibrate(CalibrateArgs),
    /// Predict or abstain on a test set with a certificate.
    Apply(ApplyArgs),
    /// Compute metrics over retained (or all) test predictions.
    Evaluate(EvaluateArgs),
    /// Selective accuracy and fraction kept over a threshold grid.
    Tradeoff(TradeoffArgs),
    /// Monte Carlo check of the guarantee on a synthetic scorer.
    Simulate(SimulateArgs),
    /// Write a synthetic score file.
    Generate(GenerateArgs),
    /// Split a dated score file into train and test parts.
    Split(SplitArgs),
}

#[derive(Debug, Args)]
pub struct InputOpts {
    /// Input format; inferred from the file extension when omitted.
    #[arg(long)]
    pub format: Option<Format>,
    /// strftime-style format of the `date` column (default %Y-%m-%d).
    #[arg(long)]
    pub date_format: Option<String>,
}

impl InputOpts {
    fn read_options(&self) -> ReadOptions {
        ReadOptions {
            date_format: self
                .date_format
                .clone()
                .unwrap_or_else(|| io::ISO_DATE.to_string()),
        }
    }

    fn load(&self, path: &Path) -> Result<selcert_core::Dataset> {
        let fmt = self.format.unwrap_or_else(|| Format::from_path(path));
        io::load_dataset(path, fmt, &self.read_options())
    }

    fn stamp(&self, m: &mut RunManifest) {
        m.date_format = self.date_format.clone();
    }
}

/// Minimum retained count for a threshold to be considered: a number,
/// or `auto` for the smallest count at which a zero-error bound can reach
/// alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Auto,
    Fixed(u64),
}

impl std::str::FromStr for Support {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "auto" => Ok(Support::Auto),
            t => t
                .parse::<u64>()
                .ok()
                .filter(|&n| n >= 1)
                .map(Support::Fixed)
                .ok_or_else(|| format!("expected a positive integer or `auto`, got `{s}`")),
        }
    }
}

impl Support {
    fn config(self, alpha: f64, beta: f64) -> Result<RiskConfig> {
        let c = RiskConfig::new(alpha, beta)?;
        Ok(match self {
            Support::Auto => c.with_auto_support(),
            Support::Fixed(n) => c.with_min_support(n),
        })
    }

    fn stamp(self, m: &mut RunManifest, resolved: u64) {
        let mode = match self {
            Support::Auto => "auto",
            Support::Fixed(_) => "fixed",
        };
        m.param("min_support", resolved)
            .param("min_support_mode", mode);
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["calib", "train"])))]
pub struct CalibrateArgs {
    /// Dedicated calibration file.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Training file to carve a calibration fraction from.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Fraction of --train used for calibration (default 0.2).
    #[arg(long, requires = "train")]
    pub calib_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    /// Minimum retained calibration count per threshold (N or `auto`).
    #[arg(long, default_value = "auto")]
    pub min_support: Support,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub input: InputOpts,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub cert: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub input: InputOpts,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["decisions", "no_abstention"])))]
pub struct EvaluateArgs {
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub decisions: Option<PathBuf>,
    /// Evaluate every test record, no abstention.
    #[arg(long)]
    pub no_abstention: bool,
    /// Certificate whose threshold and risk settings go into the report.
    #[arg(long)]
    pub cert: Option<PathBuf>,
    /// Add a per-group breakdown.
    #[arg(long)]
    pub group: bool,
    /// Paired bootstrap of retained-set metrics against full-set metrics.
    #[arg(long, requires = "decisions")]
    pub significance: bool,
    /// Paired bootstrap of the test scores against a second score file.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// What one replication means in this report, if anything.
    #[arg(long)]
    pub replication: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV mirror of the report.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
    #[command(flatten)]
    pub input: InputOpts,
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated ascending thresholds; defaults to the unique
    /// confidences of the test file.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
    /// Output format; inferred from the output extension when omitted.
    #[arg(long)]
    pub out_format: Option<Format>,
    #[command(flatten)]
    pub input: InputOpts,
}

#[derive(Debug, Args)]
pub struct ScorerOpts {
    #[arg(long, value_delimiter = ',', default_values_t = [8.0, 2.0])]
    pub pos_shape: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 8.0])]
    pub neg_shape: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub prevalence: f64,
}

impl ScorerOpts {
    fn spec(&self, n: usize, seed: u64) -> Result<SyntheticScorerSpec> {
        let pair = |v: &[f64], name: &str| match v {
            [a, b] => Ok((*a, *b)),
            _ => Err(Error::Usage(format!("--{name} takes two values"))),
        };
        let spec = SyntheticScorerSpec {
            n,
            prevalence: self.prevalence,
            pos_shape: pair(&self.pos_shape, "pos-shape")?,
            neg_shape: pair(&self.neg_shape, "neg-shape")?,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn stamp(&self, m: &mut RunManifest) {
        m.param(
            "pos_shape",
            format!("{},{}", self.pos_shape[0], self.pos_shape[1]),
        )
        .param(
            "neg_shape",
            format!("{},{}", self.neg_shape[0], self.neg_shape[1]),
        )
        .param("prevalence", self.prevalence);
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scorer: ScorerOpts,
    #[arg(long, default_value_t = 500)]
    pub n_calib: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    /// Minimum retained calibration count per threshold (N or `auto`).
    #[arg(long, default_value = "auto")]
    pub min_support: Support,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scorer: ScorerOpts,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Records dated before this go to train, the rest to test.
    #[arg(long)]
    pub split_date: String,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
    #[command(flatten)]
    pub opts: InputOpts,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Calibrate(a) => calibrate(a),
        Command::Apply(a) => apply_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Tradeoff(a) => tradeoff(a),
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a),
        Command::Split(a) => split(a),
    }
}

fn out_format(explicit: Option<Format>, out: &Path) -> Format {
    explicit.unwrap_or_else(|| Format::from_path(out))
}

fn calibrate(a: CalibrateArgs) -> Result<i32> {
    let config = a.min_support.config(a.alpha, a.beta)?;
    let mut m = RunManifest::new("calibrate");
    m.alpha = Some(a.alpha);
    m.beta = Some(a.beta);
    a.min_support.stamp(&mut m, config.min_support);
    a.input.stamp(&mut m);

    let calib = match (&a.calib, &a.train, a.calib_fraction) {
        (Some(path), None, None) => {
            m.input(path)?;
            a.input.load(path)?
        }
        (None, Some(path), f) => {
            let f = f.unwrap_or(DEFAULT_CALIB_FRACTION);
            m.input(path)?;
            m.seed = Some(a.seed);
            m.param("calib_fraction", f);
            let (_, calib) = carve_fraction(&a.input.load(path)?, f, a.seed)?;
            calib
        }
        _ => return Err(Error::Usage("give either --calib or --train".into())),
    };

    let cert = certify_threshold(&calib, config)?;
    io::write_file(&a.out, &CertificateDoc::new(&cert, Some(m)).to_bytes()?)?;
    match cert.lambda_hat {
        Some(l) => {
            println!(
                "feasible lambda_hat={} calib_size={}",
                crate::num::fmt12(l),
                cert.calib_size
            );
            Ok(EXIT_OK)
        }
        None => {
            eprintln!(
                "infeasible: no threshold keeps the risk bound within alpha={} (calib_size={})",
                a.alpha, cert.calib_size
            );
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn apply_cmd(a: ApplyArgs) -> Result<i32> {
    let cert = CertificateDoc::read(&a.cert)?.to_certificate(&a.cert)?;
    if !cert.is_feasible() {
        eprintln!("error: {}", selcert_core::Error::InfeasibleCertificate);
        return Ok(EXIT_INFEASIBLE);
    }
    let test = a.input.load(&a.test)?;
    let decisions = apply(&test, &cert)?;

    let mut m = RunManifest::new("apply");
    m.alpha = Some(cert.config.alpha);
    m.beta = Some(cert.config.beta);
    a.input.stamp(&mut m);
    m.input(&a.test)?.input(&a.cert)?;

    io::write_file(&a.out, &wire::decisions_bytes(&decisions)?)?;
    m.write_sidecar(&a.out)?;
    let kept = decisions.iter().filter(|d| d.is_retained()).count();
    println!(
        "retain_rate={} ({kept}/{})",
        crate::num::fmt12(retain_rate(&decisions)),
        decisions.len()
    );
    Ok(EXIT_OK)
}

fn evaluate(a: EvaluateArgs) -> Result<i32> {
    let test = a.input.load(&a.test)?;
    let mut m = RunManifest::new("evaluate");
    a.input.stamp(&mut m);
    m.input(&a.test)?;

    let decisions: Vec<Decision> = match &a.decisions {
        Some(p) => {
            m.input(p)?;
            wire::read_decisions(p)?
        }
        None => test
            .records()
            .iter()
            .map(|r| Decision {
                id: r.id.clone(),
                outcome: Outcome::Predict(selcert_core::predicted_label(r.score)),
                confidence: r.score.max(1.0 - r.score),
            })
            .collect(),
    };
    let mut report = selective_report(&test, &decisions)?;
    if !a.group {
        report.group_breakdown = None;
    }
    let mut doc = ReportDoc::new(&report, RunManifest::new("evaluate"));

    if let Some(p) = &a.cert {
        m.input(p)?;
        let cert = CertificateDoc::read(p)?.to_certificate(p)?;
        doc.lambda_hat = cert.lambda_hat;
        doc.alpha = Some(cert.config.alpha);
        doc.beta = Some(cert.config.beta);
    }
    doc.replication = a.replication.clone();

    if a.significance || a.baseline.is_some() {
        let exec = Parallel::from_env()?;
        doc.seed = Some(a.seed);
        m.seed = Some(a.seed);
        m.param("resamples", a.resamples);
        if a.significance {
            for metric in Metric::ALL {
                let s = selective_significance_with(
                    &exec,
                    &test,
                    &decisions,
                    metric,
                    a.resamples,
                    a.seed,
                )?;
                doc.significance
                    .push(SignificanceDoc::new(&s, "retained_vs_all"));
            }
        }
        if let Some(p) = &a.baseline {
            m.input(p)?;
            let base = a.input.load(p)?;
            for metric in Metric::ALL {
                let s = selcert_core::metrics::bootstrap_significance_with(
                    &exec,
                    &test,
                    &base,
                    metric,
                    a.resamples,
                    a.seed,
                )?;
                doc.significance
                    .push(SignificanceDoc::new(&s, "test_vs_baseline"));
            }
        }
    }
    doc.manifest = m;

    io::write_file(&a.out, &doc.to_bytes()?)?;
    if let Some(p) = &a.csv_out {
        io::write_file(p, &doc.csv_bytes()?)?;
        doc.manifest.write_sidecar(p)?;
    }
    println!(
        "n_retained={}/{} retain_rate={}",
        report.n_retained,
        report.n_total,
        crate::num::fmt12(report.retain_rate)
    );
    Ok(EXIT_OK)
}

fn tradeoff(a: TradeoffArgs) -> Result<i32> {
    let test = a.input.load(&a.test)?;
    let lambdas = a.lambdas.clone().unwrap_or_else(|| confidence_grid(&test));
    let curve = tradeoff_curve(&test, &lambdas)?;

    let mut m = RunManifest::new("tradeoff");
    a.input.stamp(&mut m);
    m.input(&a.test)?;
    m.param(
        "lambdas",
        if a.lambdas.is_some() {
            "explicit"
        } else {
            "unique_confidences"
        },
    );
    match out_format(a.out_format, &a.out) {
        Format::Csv => {
            io::write_file(&a.out, &wire::curve_csv(&curve)?)?;
            m.write_sidecar(&a.out)?;
        }
        Format::Json => {
            let doc = CurveDoc {
                points: wire::curve_points(&curve),
                manifest: m,
            };
            io::write_file(&a.out, &crate::manifest::to_json_bytes(&doc)?)?;
        }
    }
    println!("points={}", curve.points.len());
    Ok(EXIT_OK)
}

fn simulate(a: SimulateArgs) -> Result<i32> {
    let config = a.min_support.config(a.alpha, a.beta)?;
    let spec = a.scorer.spec(a.n_calib, a.seed)?;
    let exec = Parallel::from_env()?;
    let trials =
        validate_guarantee_with(&exec, &spec, config, a.trials, a.n_calib, a.n_test, a.seed)?;
    let summary = GuaranteeSummary::from_trials(&trials);

    let mut m = RunManifest::new("simulate");
    m.alpha = Some(a.alpha);
    m.beta = Some(a.beta);
    m.seed = Some(a.seed);
    a.scorer.stamp(&mut m);
    a.min_support.stamp(&mut m, config.min_support);
    m.param("trials", a.trials)
        .param("n_calib", a.n_calib)
        .param("n_test", a.n_test);

    match out_format(a.out_format, &a.out) {
        Format::Csv => {
            io::write_file(&a.out, &wire::trials_csv(&trials)?)?;
            m.write_sidecar(&a.out)?;
        }
        Format::Json => {
            let doc = TrialsDoc {
                trials: wire::trial_docs(&trials),
                summary: (&summary).into(),
                manifest: m,
            };
            io::write_file(&a.out, &crate::manifest::to_json_bytes(&doc)?)?;
        }
    }
    let rate = summary
        .violation_rate
        .map(crate::num::fmt12)
        .unwrap_or_else(|| "undefined".into());
    println!(
        "violation_rate={rate} violations={} feasible={} trials={}",
        summary.violations, summary.feasible, summary.trials
    );
    Ok(EXIT_OK)
}

fn generate(a: GenerateArgs) -> Result<i32> {
    let spec = a.scorer.spec(a.n, a.seed)?;
    let d = generate_synthetic(&spec)?;
    io::write_dataset(&d, &a.out, out_format(a.out_format, &a.out))?;
    println!("records={} positives={}", d.len(), d.positives());
    Ok(EXIT_OK)
}

fn split(a: SplitArgs) -> Result<i32> {
    let ro = a.opts.read_options();
    let date = NaiveDate::parse_from_str(a.split_date.trim(), &ro.date_format)
        .map_err(|e| Error::Usage(format!("--split-date `{}`: {e}", a.split_date)))?;
    let d = a.opts.load(&a.input)?;
    let (train, test) = temporal_split(&d, SplitSpec { split_date: date })?;
    io::write_dataset(&train, &a.train_out, Format::from_path(&a.train_out))?;
    io::write_dataset(&test, &a.test_out, Format::from_path(&a.test_out))?;
    println!(
        "train={} (positives {}, negatives {}) test={} (positives {}, negatives {})",
        train.len(),
        train.positives(),
        train.len() - train.positives(),
        test.len(),
        test.positives(),
        test.len() - test.positives()
    );
    Ok(EXIT_OK)
}
