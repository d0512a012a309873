use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod config;
mod output;
mod run;

const EXIT_VALIDATION: u8 = 2;
const EXIT_TOLERANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "toa-lab", version, about = "Time-of-arrival distributions from JSON scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write `<out>.csv`, `<out>.meta.json` and optionally `<out>.svg`.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output stem; defaults to `output.stem` in the config, then the config path without extension.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
        /// Worker threads for the compute kernels.
        #[arg(long, env = "TOA_LAB_THREADS")]
        threads: Option<usize>,
    },
    /// Check a scenario without computing.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Validation(Vec<String>),
    Io(String),
}

struct Loaded {
    scenario: config::Scenario,
    raw: serde_json::Value,
    warnings: Vec<String>,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let (scenario, raw) = config::parse(&text).map_err(|e| Failure::Validation(vec![format!("parse error at {e}")]))?;
    let issues = config::validate(&scenario);
    if issues.iter().any(|i| !i.warning) {
        return Err(Failure::Validation(issues.iter().map(|i| i.to_string()).collect()));
    }
    let warnings: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
    for w in &warnings {
        eprintln!("{w}");
    }
    Ok(Loaded {
        scenario,
        raw,
        warnings,
    })
}

fn write(path: &Path, body: &str) -> Result<(), Failure> {
    std::fs::write(path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn run(config: &Path, out: Option<PathBuf>, svg: bool, threads: Option<usize>) -> Result<bool, Failure> {
    let Loaded {
        scenario: s,
        raw,
        warnings: flags,
    } = load(config)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Validation(vec!["threads: must be >= 1".into()]));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Io(e.to_string()))?;
    let n_threads = pool.current_num_threads();
    let stem = out
        .or_else(|| s.output.as_ref().map(|o| PathBuf::from(&o.stem)))
        .unwrap_or_else(|| config.with_extension(""));

    let start = Instant::now();
    let mut result = pool.install(|| run::run(&s)).map_err(|e| Failure::Validation(vec![e.to_string()]))?;
    result
        .summary
        .insert("regime_flags".into(), serde_json::json!(flags));
    let elapsed = start.elapsed().as_secs_f64();
    log::info!("{} finished in {elapsed:.3} s on {n_threads} threads", s.scheme.name());

    let mut resolved = serde_json::to_value(&s).expect("serializable");
    if let serde_json::Value::Object(o) = &mut resolved {
        if let Some(g) = config::grid_spec(&s) {
            o.insert("grid".into(), serde_json::to_value(g).expect("serializable"));
        }
        if let Some(h) = s.histories.or((s.scheme == config::Scheme::Histories).then(Default::default)) {
            let mut h = h;
            h.dt = config::method_dt(&h);
            o.insert("histories".into(), serde_json::to_value(h).expect("serializable"));
        }
        if matches!(
            s.scheme,
            config::Scheme::PovmFull | config::Scheme::PovmRegime | config::Scheme::Kijowski | config::Scheme::Compare
        ) {
            let mut p = s.povm.unwrap_or_default();
            if s.scheme != config::Scheme::Kijowski {
                p.regime = Some(config::regime(&s));
            }
            o.insert("povm".into(), serde_json::to_value(p).expect("serializable"));
        }
        if s.scheme == config::Scheme::Zeno {
            o.insert("zeno".into(), serde_json::to_value(s.zeno.clone().unwrap_or_default()).expect("serializable"));
        }
    }
    // Wall-clock time varies between runs; it enters the metadata only on request.
    let wall = std::env::var_os("TOA_LAB_TIMINGS").is_some().then_some(elapsed);
    let meta = output::meta(&output::MetaInput {
        raw: &raw,
        resolved,
        out: &result,
        threads: n_threads,
        seed: s.seed,
        wall_clock: wall,
    });
    write(&with_ext(&stem, ".csv"), &output::csv(s.scheme.name(), &result))?;
    write(&with_ext(&stem, ".meta.json"), &meta)?;
    if svg {
        write(&with_ext(&stem, ".svg"), &output::svg(s.scheme.name(), &result))?;
    }
    let mut ok = true;
    for c in &result.checks {
        if !c.pass() {
            ok = false;
            eprintln!(
                "tolerance failure: {} = {:.6e} (required {} {:e})",
                c.name,
                c.value,
                if c.below { "<" } else { ">" },
                c.limit
            );
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            svg,
            threads,
        } => run(&config, out, svg, threads),
        Command::Validate { config } => load(&config).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_TOLERANCE),
        Err(Failure::Validation(lines)) => {
            for l in lines {
                eprintln!("{l}");
            }
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
