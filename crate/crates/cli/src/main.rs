use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use classifieds_core::schema::Decision;
use classifieds_core::RequestId;
use classifieds_service::{admin, server, Service, ServiceConfig};

#[derive(Parser)]
#[command(name = "classifieds", version, about = "Network-scoped classifieds service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Operate on the store while the service is stopped.
    Admin {
        #[arg(long)]
        config: PathBuf,
        #[command(subcommand)]
        command: AdminCommand,
    },
}

#[derive(Subcommand)]
enum AdminCommand {
    /// Field requests awaiting a decision.
    Requests {
        #[command(subcommand)]
        command: RequestsCommand,
    },
    /// The network registry.
    Networks {
        #[command(subcommand)]
        command: NetworksCommand,
    },
    /// Generate demo users and listings from a fixed seed.
    Seed {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Write the social graph as `user_id<TAB>listing_id<TAB>kind<TAB>message_count` lines.
    ExportGraph {
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RequestsCommand {
    List,
    /// File a `requestField` XML document.
    Submit { file: PathBuf },
    Approve { id: u64 },
    Reject { id: u64 },
}

#[derive(Subcommand)]
enum NetworksCommand {
    Add {
        id: String,
        #[arg(long)]
        name: String,
        /// Email domain suffix; repeat for several.
        #[arg(long = "domain", required = true)]
        domains: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { config } => serve(config),
        Command::Admin { config, command } => admin_command(config, command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &std::path::Path) -> anyhow::Result<ServiceConfig> {
    ServiceConfig::load(path).with_context(|| format!("config {}", path.display()))
}

fn serve(path: PathBuf) -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let config = load(&path)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = server::bind(&config).await?;
        let service = Arc::new(tokio::task::spawn_blocking(move || Service::open(config)).await??);
        println!("listening on {}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        server::serve(service, listener, shutdown).await?;
        Ok(())
    })
}

fn admin_command(path: PathBuf, command: AdminCommand) -> anyhow::Result<()> {
    let config = load(&path)?;
    match command {
        AdminCommand::Requests { command } => match command {
            RequestsCommand::List => {
                let requests = admin::list_requests(config)?;
                if requests.is_empty() {
                    println!("no field requests");
                }
                for r in requests {
                    println!(
                        "{}\t{}\t{}\t{}\t{}\t{:?}",
                        r.id, r.category, r.label, r.data_type, r.creator, r.status
                    );
                }
            }
            RequestsCommand::Submit { file } => {
                let xml = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
                let request = admin::submit_request(config, &xml)?;
                println!("filed request {} for {:?} in {}", request.id, request.label, request.category);
            }
            RequestsCommand::Approve { id } => {
                let (request, entry) = admin::decide_request(config, RequestId(id), Decision::Approve)?;
                println!(
                    "approved request {}: {} is now version {} with field {:?}",
                    request.id, entry.current.category, entry.current.version, request.label
                );
            }
            RequestsCommand::Reject { id } => {
                let (request, _) = admin::decide_request(config, RequestId(id), Decision::Reject)?;
                println!("rejected request {}", request.id);
            }
        },
        AdminCommand::Networks { command } => match command {
            NetworksCommand::Add { id, name, domains } => {
                let network = admin::add_network(&config, &id, &name, &domains)?;
                println!("added network {}", network.to_line());
            }
        },
        AdminCommand::Seed { count, seed } => {
            let report = admin::seed(config, count, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        AdminCommand::ExportGraph { out } => {
            let graph = admin::export_graph(config)?;
            match out {
                Some(path) => fs::write(&path, graph).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{graph}"),
            }
        }
    }
    Ok(())
}
