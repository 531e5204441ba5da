//! `station`: run, resume, inspect, and export Station runs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use tracing::{info, warn};

use station::agent::AgentId;
use station::capsules::CapsuleRoom;
use station::config::{ConfigError, StationConfig};
use station::inspect::{self, View};
use station::kernel::{transcript, Station, StationError, StationOptions, TickReport};
use station::persistence::{self, PersistError};

#[derive(Parser)]
#[command(name = "station", version, about = "Run and examine Station simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Halt after this many completed ticks (overrides the manifest).
    #[arg(long)]
    max_ticks: Option<u64>,
    /// Directory for transcripts.
    #[arg(long, default_value = "station-run/transcript")]
    transcript_dir: PathBuf,
    /// Directory for periodic snapshots (`tick-NNNNNN/`).
    #[arg(long, default_value = "station-run/snapshots")]
    snapshot_dir: PathBuf,
    /// Write an export bundle here when the run stops.
    #[arg(long)]
    export_dir: Option<PathBuf>,
    /// Print nothing per tick.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Start a run from a manifest.
    Run {
        /// Run manifest (TOML).
        #[arg(long, short)]
        manifest: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Continue a run from a snapshot (or the newest one under a directory).
    Resume {
        #[arg(long, short)]
        snapshot: PathBuf,
        /// Replace the manifest stored in the snapshot.
        #[arg(long, short)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Print part of a snapshot's state.
    Inspect {
        #[arg(long, short)]
        snapshot: PathBuf,
        what: Inspect,
        /// Capsule room for `capsules`.
        #[arg(long, value_enum, default_value = "archive")]
        room: Room,
        /// Show the leaderboard as this agent sees it.
        #[arg(long)]
        agent: Option<u64>,
        /// Leaderboard rows to print.
        #[arg(long, default_value_t = 20)]
        rows: usize,
    },
    /// Write a human-readable bundle from a snapshot and its transcript.
    Export {
        #[arg(long, short)]
        snapshot: PathBuf,
        #[arg(long, default_value = "station-run/transcript")]
        transcript_dir: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Recompute a transcript's hash chain.
    Verify {
        #[arg(long, default_value = "station-run/transcript")]
        transcript_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Inspect {
    Leaderboard,
    Capsules,
    Agents,
    Status,
}

#[derive(Clone, Copy, ValueEnum)]
enum Room {
    Private,
    Public,
    Archive,
    Mail,
}

impl From<Room> for CapsuleRoom {
    fn from(r: Room) -> Self {
        match r {
            Room::Private => CapsuleRoom::PrivateMemory,
            Room::Public => CapsuleRoom::PublicMemory,
            Room::Archive => CapsuleRoom::Archive,
            Room::Mail => CapsuleRoom::Mail,
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Station(#[from] StationError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Station(StationError::Config(_)) => 2,
            CliError::Persist(PersistError::Version { .. }) => 3,
            CliError::Persist(PersistError::Corrupt(_)) => 4,
            _ => 1,
        }
    }
}

fn report_line(r: &TickReport) -> String {
    let mut line = format!("tick {} (wall {})", r.tick, r.wall);
    if r.pause_steps > 0 {
        line.push_str(&format!(", held {} steps for evaluations", r.pause_steps));
    }
    if !r.deliveries.is_empty() {
        line.push_str(&format!(", {} results", r.deliveries.len()));
    }
    let degraded = r.turns.iter().filter(|t| t.degraded).count();
    if degraded > 0 {
        line.push_str(&format!(", {degraded} turns without a response"));
    }
    for e in &r.lifecycle {
        line.push_str(&format!(", agent {} {:?}", e.agent.0, e.kind));
    }
    line
}

fn snapshot(station: &Station, dir: &Path) -> Result<(), CliError> {
    let tick = station.world().tick;
    let target = dir.join(persistence::snapshot_name(tick));
    let digest = persistence::write_snapshot(&target, station.config(), station.world())?;
    info!(tick, digest = %digest, "snapshot written to {}", target.display());
    Ok(())
}

fn drive(mut station: Station, args: &RunArgs) -> Result<(), CliError> {
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = stop.clone();
        if let Err(e) = ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)) {
            warn!("could not install the interrupt handler: {e}");
        }
    }
    let every = station.config().snapshot_every_ticks;
    let mut last_snapshot = None;
    while !station.is_halted() && !stop.load(Ordering::SeqCst) {
        if station.gate_pending() && last_snapshot != Some(station.world().tick) {
            snapshot(&station, &args.snapshot_dir)?;
            last_snapshot = Some(station.world().tick);
        }
        let report = station.advance_tick()?;
        if !args.quiet {
            println!("{}", report_line(&report));
        }
        if report.tick % every == 0 {
            snapshot(&station, &args.snapshot_dir)?;
            last_snapshot = Some(report.tick);
        }
    }
    if stop.load(Ordering::SeqCst) {
        warn!("interrupted; stopping after tick {}", station.world().tick);
    }
    if last_snapshot != Some(station.world().tick) {
        snapshot(&station, &args.snapshot_dir)?;
    }
    if let Some(out) = &args.export_dir {
        let n = persistence::export(station.world(), station.transcript_dir(), out)?;
        info!("exported {n} files to {}", out.display());
    }
    println!(
        "stopped after tick {}; state digest {}; transcript head {} ({} records)",
        station.world().tick,
        station.digest(),
        station.transcript_head().digest,
        station.transcript_head().records
    );
    Ok(())
}

fn options(args: &RunArgs) -> StationOptions {
    StationOptions {
        transcript_dir: Some(args.transcript_dir.clone()),
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { manifest, args } => {
            let mut config = StationConfig::load(&manifest)?;
            if args.max_ticks.is_some() {
                config.max_ticks = args.max_ticks;
            }
            if args.transcript_dir.exists() {
                info!("replacing the transcript in {}", args.transcript_dir.display());
            }
            let station = Station::new(config, options(&args))?;
            drive(station, &args)
        }
        Command::Resume {
            snapshot,
            manifest,
            args,
        } => {
            let dir = persistence::latest_snapshot(&snapshot)?;
            let restored = persistence::read_snapshot(&dir)?;
            let config = match manifest {
                Some(path) => StationConfig::load(&path)?,
                None => restored.config,
            };
            info!(tick = restored.world.tick, "resuming from {}", dir.display());
            let mut station = Station::from_world(config, restored.world, options(&args))?;
            if args.max_ticks.is_some() {
                station.set_max_ticks(args.max_ticks);
            }
            drive(station, &args)
        }
        Command::Inspect {
            snapshot,
            what,
            room,
            agent,
            rows,
        } => {
            let dir = persistence::latest_snapshot(&snapshot)?;
            let restored = persistence::read_snapshot(&dir)?;
            let view = match what {
                Inspect::Leaderboard => View::Leaderboard {
                    agent: agent.map(AgentId),
                    rows,
                },
                Inspect::Capsules => View::Capsules(room.into()),
                Inspect::Agents => View::Agents,
                Inspect::Status => View::Status,
            };
            let text = inspect::render(&restored.world, &restored.config, view).map_err(CliError::Other)?;
            print!("{text}");
            Ok(())
        }
        Command::Export {
            snapshot,
            transcript_dir,
            out,
        } => {
            let dir = persistence::latest_snapshot(&snapshot)?;
            let restored = persistence::read_snapshot(&dir)?;
            let transcript = transcript_dir.is_dir().then_some(transcript_dir.as_path());
            let n = persistence::export(&restored.world, transcript, &out)?;
            println!("wrote {n} files to {}", out.display());
            Ok(())
        }
        Command::Verify { transcript_dir } => {
            let head = transcript::verify_dir(&transcript_dir)
                .map_err(|e| CliError::Other(format!("{}: {e}", transcript_dir.display())))?;
            println!("{} records, head {}", head.records, head.digest);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("STATION_LOG").unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
