use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use tebc::harness::{self, ExperimentConfig, MaxentMethod, TebSource, Track};
use tebc::maxent::{self, BoxSpec};
use tebc::teb::{self, BiasEstimate, BootstrapConfig};
use tebc::{validate, CountSample, SmoothingMethod, SolverConfig};

#[derive(Parser)]
#[command(name = "tebc", version, about = "Tsallis entropy bias corrected density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the closed-form entropy expectations numerically.
    Validate {
        #[command(subcommand)]
        what: ValidateWhat,
    },
    /// Run a benchmark track from a JSON config.
    Bench {
        #[arg(value_enum)]
        track: TrackArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Estimate a distribution from a counts file.
    Estimate {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long, value_enum)]
        bias: Option<BiasArg>,
        /// Seed of the bootstrap bias estimate.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ValidateWhat {
    Props {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        draws: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TrackArg {
    Maxent,
    Smoothing,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BiasArg {
    Naive,
    Bootstrap,
    Bayes,
    Seb,
}

/// Bad input versus a failure while running.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Validate {
            what: ValidateWhat::Props { m, n, draws, seed, json },
        } => validate_props(m, n, draws, seed, json.as_deref()),
        Command::Bench { track, config, out, json } => {
            let track = match track {
                TrackArg::Maxent => Track::Maxent,
                TrackArg::Smoothing => Track::Smoothing,
            };
            bench(track, &config, &out, json.as_deref())
        }
        Command::Estimate { counts, method, bias, seed, out } => estimate(&counts, &method, bias, seed, &out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)?;
    Ok(())
}

/// Runs the three checks; `Ok(false)` when any of them fails.
fn validate_props(m: usize, n: u64, draws: u64, seed: u64, json: Option<&Path>) -> Result<bool, Failure> {
    if m < 2 || n < 2 || draws < 1000 {
        return Err(anyhow::anyhow!("need m >= 2, n >= 2 and draws >= 1000")).config();
    }
    let mut rng = tebc::rng::stream(seed, &[m as u64, n]);
    let real = tebc::Distribution::new(validate::uniform_simplex(m, &mut rng)).runtime()?;
    let exact = match validate::validate_prop1(&real, n) {
        Ok(r) => Some(r),
        Err(tebc::Error::OutcomeCapExceeded { .. }) => None,
        Err(e) => return Err(e).runtime(),
    };
    let prior_mean = validate::validate_prop2(m, n, draws, seed).runtime()?;
    let prior_std = validate::validate_prop3(m, n, draws, seed).runtime()?;

    let mut passed = true;
    let mut line = |name: &str, r: &validate::ValidationReport| {
        passed &= r.passed;
        println!(
            "{name}: closed form {:.10} estimate {:.10} ({})",
            r.closed_form,
            r.estimate,
            if r.passed { "pass" } else { "FAIL" }
        );
    };
    match &exact {
        Some(r) => line("sampling expectation", r),
        None => println!("sampling expectation: skipped, too many outcomes to enumerate"),
    }
    line("prior expectation", &prior_mean);
    line("prior std", &prior_std);

    if let Some(path) = json {
        let value = json!({
            "m": m, "n": n, "draws": draws, "seed": seed,
            "sampling_expectation": exact,
            "prior_expectation": prior_mean,
            "prior_std": prior_std,
            "passed": passed,
        });
        write_json(path, &value).runtime()?;
    }
    Ok(passed)
}

fn bench(track: Track, config: &Path, out: &Path, json: Option<&Path>) -> Result<bool, Failure> {
    let cfg = ExperimentConfig::read(config)
        .with_context(|| format!("reading {}", config.display()))
        .config()?;
    cfg.validate(track).config()?;
    let report = harness::run_benchmark(&cfg, track).runtime()?;
    let file = File::create(out)
        .with_context(|| format!("creating {}", out.display()))
        .runtime()?;
    report.write_csv(BufWriter::new(file)).runtime()?;
    if let Some(path) = json {
        let file = File::create(path)
            .with_context(|| format!("creating {}", path.display()))
            .runtime()?;
        report.write_json(BufWriter::new(file)).runtime()?;
    }
    for f in &report.failures {
        eprintln!(
            "warning: {} on {} failed on {} replicates: {}",
            f.method, f.dataset, f.failed_replicates, f.first_error
        );
    }
    Ok(true)
}

enum Estimator {
    Smoothing(SmoothingMethod),
    Maxent(MaxentMethod),
}

fn estimate(counts: &Path, method: &str, bias: Option<BiasArg>, seed: u64, out: &Path) -> Result<bool, Failure> {
    let estimator = match (method.parse::<SmoothingMethod>(), method.parse::<MaxentMethod>()) {
        (Ok(m), _) => Estimator::Smoothing(m),
        (_, Ok(m)) => Estimator::Maxent(m),
        _ => return Err(anyhow::anyhow!("unknown method {method:?}")).config(),
    };
    let sample = CountSample::read_csv(counts)
        .with_context(|| format!("reading {}", counts.display()))
        .config()?;

    // which family of bias the method compensates, if any
    let wants = match &estimator {
        Estimator::Smoothing(SmoothingMethod::FLidstone) => Some(BiasArg::Naive),
        Estimator::Smoothing(SmoothingMethod::BLidstone) => Some(BiasArg::Bayes),
        Estimator::Smoothing(SmoothingMethod::SebLidstone) => Some(BiasArg::Seb),
        Estimator::Maxent(MaxentMethod::Tebc(_, TebSource::Frequentist)) => Some(BiasArg::Naive),
        Estimator::Maxent(MaxentMethod::Tebc(_, TebSource::Bayesian)) => Some(BiasArg::Bayes),
        Estimator::Maxent(MaxentMethod::Seb(_)) => Some(BiasArg::Seb),
        _ => None,
    };
    let chosen = match (wants, bias) {
        (None, Some(_)) => return Err(anyhow::anyhow!("{method} takes no bias estimate")).config(),
        (Some(BiasArg::Seb), Some(b)) if b != BiasArg::Seb => {
            return Err(anyhow::anyhow!("{method} needs the seb bias")).config()
        }
        (Some(w), Some(BiasArg::Seb)) if w != BiasArg::Seb => {
            return Err(anyhow::anyhow!("{method} needs a Tsallis bias")).config()
        }
        (w, b) => b.or(w),
    };
    let bias: Option<BiasEstimate> = match chosen {
        None => None,
        Some(BiasArg::Naive) => Some(teb::frequentist_teb_naive(&sample).runtime()?),
        Some(BiasArg::Bootstrap) => Some(
            teb::frequentist_teb_bootstrap(&sample, &BootstrapConfig::default_for(sample.n(), seed)).runtime()?,
        ),
        Some(BiasArg::Bayes) => Some(teb::bayesian_teb(sample.m(), sample.n()).runtime()?),
        Some(BiasArg::Seb) => Some(teb::seb(sample.m(), sample.n()).runtime()?),
    };

    let solver_cfg = SolverConfig::default();
    let mut diagnostics = serde_json::Map::new();
    let estimate = match estimator {
        Estimator::Smoothing(m) => m.estimate_with_bias(&sample, bias.as_ref()).runtime()?,
        Estimator::Maxent(MaxentMethod::Sample) => sample.to_distribution(),
        Estimator::Maxent(m) => {
            let (variant, boxes) = match m {
                MaxentMethod::Tebc(v, _) | MaxentMethod::Seb(v) => (v, None),
                _ => (maxent::MaxentVariant::Sme, Some(BoxSpec::default())),
            };
            let (model, report) =
                maxent::estimate_with_report(&sample, variant, bias.as_ref(), &[], boxes.as_ref(), &solver_cfg)
                    .runtime()?;
            diagnostics.insert("clamped".into(), json!(model.clamped));
            diagnostics.insert("relaxed_delta".into(), json!(model.relaxed_delta));
            diagnostics.insert("kkt_residual".into(), json!(report.kkt_residual));
            diagnostics.insert("iterations".into(), json!(report.iterations));
            report.solution
        }
    };
    let value = json!({
        "method": method,
        "m": sample.m(),
        "n": sample.n(),
        "bias": bias,
        "diagnostics": diagnostics,
        "distribution": estimate.probs(),
    });
    write_json(out, &value).runtime()?;
    Ok(true)
}
