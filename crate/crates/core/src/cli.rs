//! Command-line entry points. Exit codes: 0 success, 1 usage error,
//! 2 data or validation error, 3 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::connectome::DisconnectedPolicy;
use crate::dataio::{
    export_report, generate_synthetic_subjects, load_cohort_with, load_feature_store,
    materialize_synthetic, read_report, write_feature_store, write_fold_dump, LoadOptions,
    SyntheticCohortConfig,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    mann_whitney_u, run_experiment_detailed, AucMode, ExperimentConfig, MannWhitneyMethod, Metric,
    Strategy,
};
use crate::neuralnet::TrainConfig;
use crate::sampling::{SamplerConfig, SamplerMode, SamplingMethod};
use crate::seed::derive_seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Stream of the master seed reserved for dataset-level samplers.
const SAMPLER_STREAM: u64 = 1 << 32;

#[derive(Debug, Parser)]
#[command(
    name = "connectome-mci",
    version,
    about = "Connectome-based MCI classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic cohort (matrices and manifest).
    Synth(SynthArgs),
    /// Extract per-measure feature tables from a manifest.
    Extract(ExtractArgs),
    /// Cross-validate all strategies and write a JSON report.
    Evaluate(EvaluateArgs),
    /// Mann-Whitney comparison of two reports, metric by metric.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 120)]
    nodes: usize,
    #[arg(long, default_value_t = 49)]
    hc: usize,
    #[arg(long, default_value_t = 108)]
    mci: usize,
    /// Relative weight reduction on affected edges of MCI subjects.
    #[arg(long, default_value_t = 0.3)]
    effect_size: f64,
    #[arg(long, default_value_t = 0.1)]
    affected_fraction: f64,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for weights.csv, shortest_path.csv, communicability.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "max_finite")]
    disconnected: DisconnectedPolicy,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(
        long,
        conflicts_with = "features",
        required_unless_present = "features"
    )]
    manifest: Option<PathBuf>,
    /// Directory written by `extract`.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value = "none", value_parser = ["none", "random", "nearmiss3", "iht"])]
    sampler: String,
    #[arg(long, default_value = "dataset", value_parser = ["dataset", "fold"])]
    sampler_mode: String,
    #[arg(long, default_value_t = 3)]
    k_neighbors: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Squared-weight penalty coefficient.
    #[arg(long, default_value_t = 1e-4)]
    alpha: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value = "max_finite")]
    disconnected: DisconnectedPolicy,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value = "per_fold", value_parser = ["per_fold", "pooled"])]
    auc_mode: String,
    #[arg(long)]
    out: PathBuf,
    /// Replace an existing report.
    #[arg(long)]
    overwrite: bool,
    /// Also write per-fold metrics to `<out>.folds.csv`.
    #[arg(long)]
    dump_folds: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Write the table as CSV instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        _ if e.is_numerical() => EXIT_NUMERICAL,
        Error::InvalidConfig(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SyntheticCohortConfig {
        n_nodes: a.nodes,
        n_hc: a.hc,
        n_mci: a.mci,
        effect_size: a.effect_size,
        affected_edge_fraction: a.affected_fraction,
        noise_scale: a.noise,
        density: a.density,
        seed: a.seed,
    };
    let subjects = generate_synthetic_subjects(&cfg)?;
    let manifest = materialize_synthetic(&subjects, &a.out)?;
    println!(
        "wrote {} subjects, manifest {}",
        subjects.len(),
        manifest.display()
    );
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let cohort = load_cohort_with(
        &a.manifest,
        &LoadOptions {
            disconnected: a.disconnected,
            ..Default::default()
        },
    )?;
    write_feature_store(&a.out, &cohort)?;
    println!(
        "wrote features of {} subjects to {}",
        cohort.len(),
        a.out.display()
    );
    Ok(())
}

fn fold_dump_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".folds.csv");
    out.with_file_name(name)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    if a.out.exists() && !a.overwrite {
        return Err(Error::FileExists(a.out.clone()));
    }
    let train = TrainConfig {
        l2_alpha: a.alpha,
        max_iterations: a.max_iter,
        seed: a.seed,
        ..Default::default()
    };
    let cfg = ExperimentConfig {
        sampler: SamplerConfig {
            method: a.sampler.parse::<SamplingMethod>()?,
            mode: a.sampler_mode.parse::<SamplerMode>()?,
            k_neighbors: a.k_neighbors,
            seed: derive_seed(a.seed, SAMPLER_STREAM),
            iht_train_config: train,
            iht_internal_folds: 5,
        },
        train,
        folds: a.folds,
        repetitions: a.repeats,
        seed: a.seed,
        threshold: a.threshold,
        auc_mode: if a.auc_mode == "pooled" {
            AucMode::Pooled
        } else {
            AucMode::PerFold
        },
    };
    cfg.validate()?;
    let (cohort, policy) = match (&a.manifest, &a.features) {
        (Some(m), _) => (
            load_cohort_with(
                m,
                &LoadOptions {
                    disconnected: a.disconnected,
                    ..Default::default()
                },
            )?,
            Some(a.disconnected.to_string()),
        ),
        (None, Some(dir)) => (load_feature_store(dir)?, None),
        (None, None) => unreachable!("clap requires one input"),
    };
    let mut outcome = run_experiment_detailed(&cohort, &cfg, None)?;
    outcome.report.config.disconnected_policy = policy;
    export_report(&outcome.report, &a.out, a.overwrite)?;
    if a.dump_folds {
        write_fold_dump(&outcome.folds, &fold_dump_path(&a.out))?;
    }
    for strategy in Strategy::ALL {
        let line: Vec<String> = Metric::ALL
            .iter()
            .map(|&m| {
                let s = outcome
                    .report
                    .summary(strategy, m)
                    .expect("complete report");
                format!("{m} {:.3}±{:.3}", s.mean, s.se)
            })
            .collect();
        println!("{:<16} {}", strategy.as_str(), line.join("  "));
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let ra = read_report(&a.a)?;
    let rb = read_report(&a.b)?;
    let mut rows = vec![[
        "strategy".to_string(),
        "metric".into(),
        "mean_a".into(),
        "mean_b".into(),
        "u".into(),
        "p".into(),
    ]];
    for strategy in Strategy::ALL {
        for metric in Metric::ALL {
            let (Some(sa), Some(sb)) = (ra.summary(strategy, metric), rb.summary(strategy, metric))
            else {
                continue;
            };
            let t = mann_whitney_u(&sa.values, &sb.values, MannWhitneyMethod::Auto)?;
            rows.push([
                strategy.to_string(),
                metric.to_string(),
                format!("{:.6}", sa.mean),
                format!("{:.6}", sb.mean),
                format!("{}", t.u),
                format!("{:.6e}", t.p),
            ]);
        }
    }
    match a.out {
        Some(path) => {
            let mut w = csv::Writer::from_path(path)?;
            for r in &rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        None => {
            for r in &rows {
                println!(
                    "{:<16} {:<12} {:>10} {:>10} {:>8} {:>14}",
                    r[0], r[1], r[2], r[3], r[4], r[5]
                );
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(
            run([
                "connectome-mci",
                "evaluate",
                "--sampler",
                "smote",
                "--out",
                "x"
            ]),
            EXIT_USAGE
        );
        assert_eq!(run(["connectome-mci", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["connectome-mci", "--help"]), EXIT_OK);
    }

    #[test]
    fn exit_code_classes() {
        assert_eq!(exit_code(&Error::NonFiniteObjective), EXIT_NUMERICAL);
        assert_eq!(
            exit_code(&Error::EigendecompositionFailure.for_subject("s")),
            EXIT_NUMERICAL
        );
        assert_eq!(exit_code(&Error::UnknownLabel("AD".into())), EXIT_DATA);
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), EXIT_USAGE);
    }

    #[test]
    fn fold_dump_name() {
        assert_eq!(
            fold_dump_path(Path::new("/tmp/r.json")),
            PathBuf::from("/tmp/r.folds.csv")
        );
    }
}
