use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gt_cli::api::{router, AppState};
use gt_cli::commands;
use gt_cli::config::RunConfig;
use tower_http::cors::CorsLayer;
use tower_http::trace::TraceLayer;
use tracing_subscriber::EnvFilter;

/// Adaptive group testing: simulation sweeps, sample-complexity bounds and a
/// live session service.
#[derive(Parser)]
#[command(name = "gt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation sweep and write entropy.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `runs` in the config.
        #[arg(long)]
        runs: Option<usize>,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's `out`, then `./out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the sample-complexity report as JSON.
    Bounds {
        #[arg(long)]
        config: PathBuf,
    },
    /// Serve the /v1 session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long)]
        state_dir: PathBuf,
    },
}

fn load(path: &Path, tweak: impl FnOnce(&mut RunConfig)) -> Result<RunConfig, String> {
    let (mut cfg, text) = RunConfig::load(path).map_err(|e| e.to_string())?;
    tweak(&mut cfg);
    cfg.validate(Some(&text)).map_err(|mut e| {
        e.source = Some(path.display().to_string());
        e.to_string()
    })?;
    Ok(cfg)
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            runs,
            seed,
            out,
        } => {
            let cfg = match load(&config, |c| {
                if let Some(r) = runs {
                    c.runs = r;
                }
                if let Some(s) = seed {
                    c.seed = s;
                }
            }) {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return Ok(ExitCode::from(2));
                }
            };
            let base = config.parent().unwrap_or(Path::new("."));
            let out = out
                .or_else(|| {
                    cfg.out.as_ref().map(|o| {
                        if o.is_absolute() {
                            o.clone()
                        } else {
                            base.join(o)
                        }
                    })
                })
                .unwrap_or_else(|| PathBuf::from("out"));
            let result = commands::simulate(&cfg, &out)?;
            emit(&format!(
                "{}wrote {}\nwrote {}\n",
                commands::summary_table(&result.report, cfg.delta),
                result.paths.entropy_csv.display(),
                result.paths.summary_json.display()
            ))?;
        }
        Command::Bounds { config } => {
            let cfg = match load(&config, |_| {}) {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return Ok(ExitCode::from(2));
                }
            };
            let base = config.parent().unwrap_or(Path::new("."));
            let out = commands::bounds(&cfg, base)?;
            if !out.report.feasible {
                tracing::warn!("expected information is not positive; bound is vacuous");
            }
            emit(&format!("{}\n", serde_json::to_string_pretty(&out)?))?;
        }
        Command::Serve {
            port,
            host,
            state_dir,
        } => {
            let state = AppState::persistent(&state_dir)?;
            tracing::info!(sessions = state.session_count(), dir = %state_dir.display(), "restored sessions");
            let app = router(state)
                .layer(CorsLayer::permissive())
                .layer(TraceLayer::new_for_http());
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                tracing::info!(%addr, "listening");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("GT_LOG").unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
