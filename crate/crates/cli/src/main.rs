use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glocal::pipeline::{topn_table, Fusion, Pipeline, RunConfig, KEYS};
use glocal::{Error, ErrorClass};

#[derive(Parser, Debug)]
#[command(name = "glocal", version, about = "Multi-space collaborative filtering with a cluster index")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Flat `key = value` configuration file
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. `--set clusters=10`
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Shorthand for `--set dataset.path=...`
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Shorthand for `--set out=...`
    #[arg(short, long, global = true)]
    out: Option<String>,
    /// Shorthand for `--set seed=...`
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run every stage on one thread
    #[arg(long, global = true)]
    single_thread: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read, filter and split the dataset
    Ingest,
    /// Run every training stage in dependency order, resuming from saved artifacts
    Train,
    /// Build the item cluster index over the GD space
    Index,
    /// Train attention configurations (all configured ones by default)
    Attend {
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
    },
    /// Write top-N recommendations
    Recommend {
        /// Raw user ids, comma separated; every user when absent
        #[arg(long, value_delimiter = ',', conflicts_with = "users_file")]
        users: Vec<String>,
        /// File with one raw user id per line
        #[arg(long)]
        users_file: Option<PathBuf>,
    },
    /// Emit the top-N, coverage and leave-one-out tables
    Evaluate,
    /// Summarize the run directory
    Report,
    /// List the configuration keys with their defaults
    Keys,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>().map(Error::class) {
        Some(ErrorClass::Config) => 2,
        Some(ErrorClass::Data) => 3,
        Some(ErrorClass::Numeric) => 4,
        None => 1,
    }
}

fn load_config(args: &GlobalArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for (key, value) in [
        ("dataset.path", args.dataset.clone()),
        ("out", args.out.clone()),
        ("seed", args.seed.map(|s| s.to_string())),
    ] {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    for pair in &args.overrides {
        cfg.set_pair(pair)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Command::Keys = cli.command {
        for (key, default, doc) in KEYS {
            println!("{key} = {default}\t# {doc}");
        }
        return Ok(());
    }
    if cli.global.single_thread {
        rayon::ThreadPoolBuilder::new().num_threads(1).build_global()?;
    }
    let cfg = load_config(&cli.global)?;
    let mut p = Pipeline::open(cfg)?;
    match cli.command {
        Command::Ingest => {
            p.ingest()?;
        }
        Command::Train => p.train_all()?,
        Command::Index => {
            p.build_index()?;
        }
        Command::Attend { models } => {
            let targets: Vec<Fusion> = if models.is_empty() {
                p.config().fusions()?
            } else {
                models.iter().map(|m| m.parse()).collect::<Result<_, Error>>()?
            };
            for a in targets {
                p.attend(a)?;
            }
        }
        Command::Recommend { users, users_file } => {
            let list: Option<Vec<String>> = match users_file {
                Some(path) => Some(
                    std::fs::read_to_string(&path)
                        .map_err(|e| Error::io(&path, e))?
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(String::from)
                        .collect(),
                ),
                None if users.is_empty() => None,
                None => Some(users),
            };
            let path = p.recommend(list.as_deref())?;
            println!("{}", path.display());
        }
        Command::Evaluate => {
            let m = p.evaluate()?;
            print!("{}", topn_table(&m.topn));
        }
        Command::Report => print!("{}", p.report()),
        Command::Keys => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
