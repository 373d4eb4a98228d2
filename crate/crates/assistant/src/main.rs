use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use email_assistant::audit::SystemClock;
use email_assistant::config::{
    load_config, parse_config, resolve_credentials, AppConfig, RunMode, TerminalPrompt, ENV_PASS,
    ENV_USER,
};
use email_assistant::store::{LoopbackServer, ServerOptions, StoreMode};
use email_assistant::{run_pipeline, RunError};

/// Sorts unread mail into folders, files attachments and drafts interview
/// invitations. Dry run unless --execute is given.
#[derive(Debug, Parser)]
#[command(
    name = "email-assistant",
    version,
    args_conflicts_with_subcommands = true
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Perform moves and writes (default is a dry run).
    #[arg(long)]
    execute: bool,
    /// Most messages to take, newest first.
    #[arg(long)]
    top: Option<usize>,
    /// Folder to read from.
    #[arg(long)]
    mailbox: Option<String>,
    /// Read a maildir-style tree instead of an IMAP server.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long)]
    report_dir: Option<PathBuf>,
    /// Where attachments and drafts go.
    #[arg(long)]
    layout_root: Option<PathBuf>,
    /// Expected labels; enables accuracy scoring.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    blocklist: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve a fixture tree over plaintext IMAP on 127.0.0.1 (for testing).
    /// Login is taken from EMAIL_ASSISTANT_USER / EMAIL_ASSISTANT_PASS.
    Serve {
        /// Fixture root (`<Folder>/new`, `<Folder>/cur`).
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = 1143)]
        port: u16,
        /// Do not advertise MOVE.
        #[arg(long)]
        no_move: bool,
    },
}

fn build_config(args: &RunArgs) -> Result<AppConfig, RunError> {
    let cwd = Path::new(".");
    let mut cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => parse_config("{}", cwd)?,
    };
    let abs = |p: &PathBuf| {
        if p.is_relative() {
            cwd.join(p)
        } else {
            p.clone()
        }
    };
    if args.execute {
        cfg.run_mode = RunMode::Execute;
    }
    if let Some(t) = args.top {
        cfg.store.top = t;
    }
    if let Some(m) = &args.mailbox {
        cfg.store.mail_folder = m.clone();
    }
    if let Some(f) = &args.fixture {
        cfg.store.mode = StoreMode::Fixture;
        cfg.store.fixture_root = Some(abs(f));
    }
    if let Some(p) = &args.report_dir {
        cfg.report_dir = abs(p);
    }
    if let Some(p) = &args.layout_root {
        cfg.layout_root = abs(p);
    }
    if let Some(p) = &args.manifest {
        cfg.manifest_path = Some(abs(p));
    }
    if let Some(p) = &args.rules {
        cfg.rules_path = Some(abs(p));
    }
    if let Some(p) = &args.blocklist {
        cfg.blocklist_path = Some(abs(p));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<ExitCode, RunError> {
    let cfg = build_config(args)?;
    let creds = resolve_credentials(&cfg, &|k| std::env::var(k).ok(), &mut TerminalPrompt)?;
    let out = run_pipeline(&cfg, &creds, &SystemClock)?;
    println!("{}", out.report.to_json_pretty());
    eprintln!("audit log: {}", out.audit_path.display());
    eprintln!("report:    {}", out.report_path.display());
    if let Some(t) = &out.trace_path {
        eprintln!("trace:     {}", t.display());
    }
    Ok(if out.report.errors > 0 {
        ExitCode::from(5)
    } else {
        ExitCode::SUCCESS
    })
}

fn serve(root: &Path, port: u16, no_move: bool) -> ExitCode {
    let (Ok(user), Ok(password)) = (std::env::var(ENV_USER), std::env::var(ENV_PASS)) else {
        eprintln!("error: set {ENV_USER} and {ENV_PASS} for the server login");
        return ExitCode::from(2);
    };
    let opts = ServerOptions {
        user,
        password,
        move_supported: !no_move,
    };
    match LoopbackServer::start(root, port, opts) {
        Ok(server) => {
            eprintln!("serving {} on {}", root.display(), server.addr());
            server.wait();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(4)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Some(Command::Serve {
            root,
            port,
            no_move,
        }) => serve(root, *port, *no_move),
        None => match run(&cli.run) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
