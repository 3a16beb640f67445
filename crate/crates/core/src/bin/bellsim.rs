use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bellsim::config::{load_config, parse_angle};
use bellsim::engine::{run_chsh, scan, ExperimentConfig, Lanes, ScanParameter};
use bellsim::exact::{sweep_common_part, sweep_pair};
use bellsim::inequality::{run_suite, Suite};
use bellsim::lhv::{ModelSpec, SATURATING_L};
use bellsim::report::{
    exact_section, fixed, saturation_line, write_pairs_csv, write_scan_csv, RunReport, VerifyReport,
};
use bellsim::{ChshSettings, CoincidenceWindow, RunSeed, Setting, PAIR_LABELS};

#[derive(Parser)]
#[command(
    name = "bellsim",
    version,
    about = "Bell experiments with setting-dependent detection times"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo run; writes a JSON report and optionally a per-pair CSV.
    Simulate {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Report path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-pair CSV path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Omit the timestamp so reruns are byte-identical.
        #[arg(long)]
        canonical: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Exact evaluation of a piecewise-constant model.
    Exact {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long)]
        json: bool,
    },
    /// Parameter scan; CSV with columns value,gamma,S,bound_6g4,margin.
    Scan {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long, value_enum)]
        param: ScanParam,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Property suites over random finite models.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 10_000)]
        models: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the JSON report instead of the summary.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// The saturating configuration, exactly and by Monte Carlo.
    Saturate {
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        mc: bool,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Octant,
    Classic,
    Qm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanParam {
    L,
    DeltaT,
    RelativeAngle,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SuiteArg {
    Theorem2,
    ProofChain,
    DeltaGamma,
    Saturation,
    All,
}

/// Experiment flags. Flags override the config file; anything unset falls back
/// to the saturating octant model at a=0, b=pi/2, c=pi/4, d=-pi/4, ΔT=3/2.
#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    d: Option<String>,
    #[arg(long)]
    delta_t: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stream: Option<u64>,
}

enum Failure {
    /// Bad input or unmet precondition.
    Usage(String),
    /// A check that must never fail did.
    Internal(String),
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn angle(text: &str, key: &str) -> Result<Setting, Failure> {
    parse_angle(text)
        .and_then(|x| Setting::new(x).map_err(|e| e.to_string()))
        .map_err(|e| Failure::Usage(format!("--{key}: {e}")))
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path).map_err(Failure::usage)?,
            None => ExperimentConfig::standard(1_000_000, RunSeed::new(0, 0)),
        };
        let current_l = match cfg.model {
            ModelSpec::Octant { l } => l,
            _ => SATURATING_L,
        };
        if let Some(m) = self.model {
            cfg.model = match m {
                ModelArg::Octant => ModelSpec::Octant { l: current_l },
                ModelArg::Classic => ModelSpec::Classic,
                ModelArg::Qm => ModelSpec::Qm,
            };
        }
        if let Some(l) = self.l {
            match cfg.model {
                ModelSpec::Octant { .. } => cfg.model = ModelSpec::Octant { l },
                _ => return Err(Failure::Usage("--l: only the octant model takes l".into())),
            }
        }
        cfg.model.build().map_err(|e| Failure::Usage(format!("--l: {e}")))?;
        for (flag, slot) in [
            ("a", &mut cfg.settings.a),
            ("b", &mut cfg.settings.b),
            ("c", &mut cfg.settings.c),
            ("d", &mut cfg.settings.d),
        ] {
            let value = match flag {
                "a" => &self.a,
                "b" => &self.b,
                "c" => &self.c,
                _ => &self.d,
            };
            if let Some(text) = value {
                *slot = angle(text, flag)?;
            }
        }
        if let Some(dt) = self.delta_t {
            cfg.window = CoincidenceWindow::new(dt).map_err(|e| Failure::Usage(format!("--delta-t: {e}")))?;
        }
        if let Some(n) = self.trials {
            if n == 0 {
                return Err(Failure::Usage("--trials: must be >= 1".into()));
            }
            cfg.trials_per_pair = n;
        }
        if let Some(s) = self.seed {
            cfg.seed.seed = s;
        }
        if let Some(s) = self.stream {
            cfg.seed.stream = s;
        }
        Ok(cfg)
    }

    /// Only a and c were given on the command line: evaluate that single pair.
    fn single_pair(&self) -> bool {
        self.config.is_none() && self.b.is_none() && self.d.is_none() && (self.a.is_some() || self.c.is_some())
    }
}

fn lanes(threads: Option<usize>) -> Lanes {
    threads.map_or_else(Lanes::from_env, Lanes::new)
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_text(path: &Option<PathBuf>, text: &str) -> Outcome {
    let mut w = sink(path)?;
    writeln!(w, "{text}").and_then(|_| w.flush()).map_err(Failure::usage)
}

fn simulate(
    args: &ExperimentArgs,
    out: &Option<PathBuf>,
    csv: &Option<PathBuf>,
    canonical: bool,
    threads: Option<usize>,
) -> Outcome {
    let cfg = args.resolve()?;
    let estimate = run_chsh(&cfg, lanes(threads)).map_err(Failure::usage)?;
    if let Some(i) = estimate.pairs.iter().position(|p| p.e_conditional.is_none()) {
        return Err(Failure::Usage(format!(
            "zero coincidences for pair {}; conditional correlation undefined",
            PAIR_LABELS[i]
        )));
    }
    let model = cfg.model.build().map_err(Failure::usage)?;
    let exact = exact_section(&cfg, &model).map_err(Failure::usage)?;
    let report = RunReport::new(&cfg, &estimate, exact, canonical);
    write_text(out, &report.to_json())?;
    if let Some(path) = csv {
        let w = sink(&Some(path.clone()))?;
        write_pairs_csv(&report, w).map_err(Failure::usage)?;
    }
    Ok(())
}

fn exact(args: &ExperimentArgs, json: bool) -> Outcome {
    let cfg = args.resolve()?;
    let model = cfg.model.build().map_err(Failure::usage)?;
    let pw = model.piecewise().ok_or_else(|| {
        Failure::Usage("exact evaluation needs a piecewise-constant model (octant or classic)".into())
    })?;
    if args.single_pair() {
        let st = sweep_pair(&pw, cfg.settings.a, cfg.settings.c, cfg.window);
        if json {
            println!("{}", serde_json::to_string_pretty(&st).map_err(Failure::usage)?);
        } else {
            println!("p_coincidence {}", fixed(st.p_coincidence));
            match st.conditional_correlation {
                Some(e) => println!("E {}", fixed(e)),
                None => println!("E undefined (no coincidences)"),
            }
        }
        return Ok(());
    }
    let cp = sweep_common_part(&pw, &cfg.settings, cfg.window).map_err(Failure::usage)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&cp).map_err(Failure::usage)?);
        return Ok(());
    }
    println!("{:<5} {:>14} {:>10}", "pair", "p_coincidence", "E");
    for (i, p) in cp.pairs.iter().enumerate() {
        println!(
            "{:<5} {:>14} {:>10}",
            PAIR_LABELS[i],
            fixed(p.p_coincidence),
            fixed(cp.correlations[i])
        );
    }
    println!("P(common part) {}", fixed(cp.p_intersection));
    println!("delta {}  gamma {}", fixed(cp.delta), fixed(cp.gamma));
    println!(
        "S {}  bound_thm2 {}  bound_6g4 {}",
        fixed(cp.s_value),
        fixed(cp.bound_thm2()),
        fixed(cp.bound_gamma())
    );
    Ok(())
}

fn run_scan(
    args: &ExperimentArgs,
    param: ScanParam,
    from: &str,
    to: &str,
    steps: usize,
    out: &Option<PathBuf>,
    threads: Option<usize>,
) -> Outcome {
    let cfg = args.resolve()?;
    let bound = |text: &str, flag: &str| -> Result<f64, Failure> {
        parse_angle(text).map_err(|e| Failure::Usage(format!("--{flag}: {e}")))
    };
    let parameter = match param {
        ScanParam::L => ScanParameter::L,
        ScanParam::DeltaT => ScanParameter::DeltaT,
        ScanParam::RelativeAngle => ScanParameter::RelativeAngle,
    };
    let rows = scan(
        &cfg,
        parameter,
        bound(from, "from")?,
        bound(to, "to")?,
        steps,
        lanes(threads),
    )
    .map_err(Failure::usage)?;
    write_scan_csv(&rows, sink(out)?).map_err(Failure::usage)
}

fn verify(
    suite: SuiteArg,
    models: usize,
    seed: u64,
    out: &Option<PathBuf>,
    json: bool,
    threads: Option<usize>,
) -> Outcome {
    if models == 0 {
        return Err(Failure::Usage("--models: must be >= 1".into()));
    }
    let suites: Vec<Suite> = match suite {
        SuiteArg::All => Suite::ALL.to_vec(),
        SuiteArg::Theorem2 => vec![Suite::Theorem2],
        SuiteArg::ProofChain => vec![Suite::ProofChain],
        SuiteArg::DeltaGamma => vec![Suite::DeltaGamma],
        SuiteArg::Saturation => vec![Suite::Saturation],
    };
    let lanes = lanes(threads);
    let reports: Vec<_> = suites.into_iter().map(|s| run_suite(s, models, seed, lanes)).collect();
    let failed = reports.iter().any(|r| !r.all_passed());
    let report = VerifyReport {
        schema_version: bellsim::config::SCHEMA_VERSION,
        suites: reports,
    };
    let text = serde_json::to_string_pretty(&report).map_err(Failure::usage)?;
    if out.is_some() {
        write_text(out, &text)?;
    }
    if json {
        println!("{text}");
    } else {
        for r in &report.suites {
            println!(
                "{}: {}/{} pass ({} failed, {} skipped) min_margin={} max_ratio_thm2={}",
                r.suite.name(),
                r.passed,
                r.models,
                r.failed,
                r.skipped,
                r.min_margin.map_or("-".into(), |m| format!("{m:.3e}")),
                r.max_ratio_thm2.map_or("-".into(), |m| format!("{m:.9}")),
            );
        }
    }
    if failed {
        return Err(Failure::Internal(
            "property suite found a counterexample (see witnesses)".into(),
        ));
    }
    Ok(())
}

fn saturate(exact_only: bool, mc_only: bool, trials: u64, seed: u64, threads: Option<usize>) -> Outcome {
    let (do_exact, do_mc) = match (exact_only, mc_only) {
        (false, false) => (true, true),
        flags => flags,
    };
    if trials == 0 {
        return Err(Failure::Usage("--trials: must be >= 1".into()));
    }
    let cfg = ExperimentConfig::standard(trials, RunSeed::new(seed, 0));
    println!("settings a=0 b=pi/2 c=pi/4 d=-pi/4  l={SATURATING_L:.6}  delta_t=1.5");
    if do_exact {
        let model = cfg.model.build().map_err(Failure::usage)?;
        let pw = model
            .piecewise()
            .ok_or_else(|| Failure::Internal("octant model is not piecewise".into()))?;
        let cp = sweep_common_part(&pw, &ChshSettings::standard(), cfg.window).map_err(Failure::usage)?;
        println!("{}", saturation_line("exact", cp.gamma, cp.s_value, cp.bound_gamma()));
        if (cp.s_value - cp.bound_gamma()).abs() > 1e-9 {
            return Err(Failure::Internal(format!(
                "exact S {} misses 6/gamma-4 {}",
                cp.s_value,
                cp.bound_gamma()
            )));
        }
    }
    if do_mc {
        let est = run_chsh(&cfg, lanes(threads)).map_err(Failure::usage)?;
        let (Some(s), Some(bound)) = (est.s_value, est.gamma_bound) else {
            return Err(Failure::Usage("zero coincidences in Monte Carlo run".into()));
        };
        println!("{}", saturation_line("monte_carlo", est.gamma_min, s, bound));
        println!(
            "{:<12} n={} per pair, S std error {}",
            "",
            trials,
            fixed(est.s_std_error.unwrap_or(0.0))
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // argument errors are usage errors, not internal failures
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate {
            experiment,
            out,
            csv,
            canonical,
            threads,
        } => simulate(experiment, out, csv, *canonical, *threads),
        Command::Exact { experiment, json } => exact(experiment, *json),
        Command::Scan {
            experiment,
            param,
            from,
            to,
            steps,
            out,
            threads,
        } => run_scan(experiment, *param, from, to, *steps, out, *threads),
        Command::Verify {
            suite,
            models,
            seed,
            out,
            json,
            threads,
        } => verify(*suite, *models, *seed, out, *json, *threads),
        Command::Saturate {
            exact,
            mc,
            trials,
            seed,
            threads,
        } => saturate(*exact, *mc, *trials, *seed, *threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
