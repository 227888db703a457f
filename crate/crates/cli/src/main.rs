use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use submatch_cli::commands::{self, default_out, MODEL_FILE, TEST_DIR};
use submatch_cli::graphref::GraphRef;
use submatch_cli::{Overrides, RunConfig, VERSION};
use submatch_core::{Error, Verdict};

#[derive(Parser)]
#[command(name = "submatch", version, about = "Neural subgraph matching with an order-embedding measure")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (each subcommand has its own default).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exact-oracle budget in milliseconds.
    #[arg(long, global = true)]
    timeout_ms: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Split the corpus and draw validation and test pair sets.
    Sample,
    /// Train an encoder on the output of `sample`.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Continue from last.ckpt in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Score a labeled pair set; writes metrics.json and scores.csv.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Pair set directory; the sampled test set by default.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Correlate scores with nesting depth on chains of subgraphs.
    Rank {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Data graphs as dir/NAME or dir/NAME@idx.
        #[arg(long)]
        graphs: Option<String>,
    },
    /// Node-level alignment quality (hit@k) on the positive pairs of a set.
    Align {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Embed every node neighborhood of one large graph.
    Index {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// The graph as dir/NAME@idx.
        #[arg(long)]
        graph: String,
        /// Neighborhood radius.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Decide containment of queries in an indexed graph.
    Query {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory written by `index`.
        #[arg(long)]
        index: PathBuf,
        /// Queries as dir/NAME or dir/NAME@idx.
        #[arg(long)]
        queries: String,
        /// Decision threshold; the checkpoint's by default.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Exact containment check. Exit status: 0 match, 1 no match,
    /// 2 timeout, 3 bad input.
    Oracle {
        /// Query graph as dir/NAME@idx.
        query: String,
        /// Data graph as dir/NAME@idx.
        data: String,
    },
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let g = cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Argument(e.to_string()))?;
    }
    let cfg = RunConfig::load(g.config.as_deref())?.resolve(&Overrides {
        seed: g.seed,
        timeout_ms: g.timeout_ms,
    })?;
    let out = |name: &str| g.out.clone().unwrap_or_else(|| default_out(&cfg, name));
    let ckpt = |c: Option<PathBuf>| c.unwrap_or_else(|| cfg.paths.model_dir.join(MODEL_FILE));
    let print = |v: &dyn erased::Show| println!("{}", v.show());
    match cli.command {
        Command::Sample => print(&commands::sample(&cfg, &out("sample"))?),
        Command::Train { data, resume } => {
            let data = data.unwrap_or_else(|| cfg.paths.data_dir.clone());
            print(&commands::train(&cfg, &data, &out("train"), resume)?)
        }
        Command::Eval { checkpoint, pairs } => {
            let pairs = pairs.unwrap_or_else(|| cfg.paths.data_dir.join(TEST_DIR));
            print(&commands::eval(&cfg, &ckpt(checkpoint), &pairs, &out("eval"))?)
        }
        Command::Rank { checkpoint, graphs } => {
            let graphs = match graphs {
                Some(s) => GraphRef::parse(&s)?,
                None => GraphRef {
                    dir: cfg.paths.data_dir.join(TEST_DIR),
                    name: submatch_core::pairs::DATA_NAME.into(),
                    index: None,
                },
            };
            print(&commands::rank(&cfg, &ckpt(checkpoint), &graphs, &out("rank"))?.spearman_rho)
        }
        Command::Align { checkpoint, pairs } => {
            let pairs = pairs.unwrap_or_else(|| cfg.paths.data_dir.join(TEST_DIR));
            print(&commands::align(&cfg, &ckpt(checkpoint), &pairs, &out("align"))?)
        }
        Command::Index { checkpoint, graph, k } => {
            let graph = GraphRef::parse(&graph)?;
            print(&commands::index(&cfg, &ckpt(checkpoint), &graph, k, &out("index"))?)
        }
        Command::Query {
            checkpoint,
            index,
            queries,
            tau,
        } => {
            let queries = GraphRef::parse(&queries)?;
            let s = commands::query(&cfg, &ckpt(checkpoint), &index, &queries, tau, &out("query"))?;
            println!("{} of {} queries matched at tau {}", s.matched, s.queries, s.tau);
        }
        Command::Oracle { query, data } => {
            let q = GraphRef::parse(&query)?;
            let d = GraphRef::parse(&data)?;
            let outcome = commands::oracle(&q, &d, cfg.sampler.oracle_timeout_ms)?;
            return Ok(match outcome.verdict {
                Verdict::Match(m) => {
                    println!("match {m}");
                    ExitCode::from(0)
                }
                Verdict::NoMatch => {
                    println!("no match");
                    ExitCode::from(1)
                }
                Verdict::Timeout => {
                    println!("timeout after {} ms", cfg.sampler.oracle_timeout_ms);
                    ExitCode::from(2)
                }
            });
        }
    }
    Ok(ExitCode::SUCCESS)
}

mod erased {
    pub trait Show {
        fn show(&self) -> String;
    }

    impl<T: serde::Serialize> Show for T {
        fn show(&self) -> String {
            serde_json::to_string_pretty(self).unwrap_or_default()
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    log::debug!("{VERSION}");
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
