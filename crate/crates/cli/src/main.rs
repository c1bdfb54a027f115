use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use clp::graph::{degree_sequence, Graph};
use clp::harness::sweep::{sweep_cliques, sweep_lambda};
use clp::harness::{pipeline, prepare_dataset, run_on_dataset, DataSource, RunConfig, SynthSpec};
use clp::powerlaw::fit_power_law;

/// Conformalized link prediction experiments.
#[derive(Parser, Debug)]
#[command(name = "clp", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Miscoverage level.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// literal | directional
    #[arg(long, global = true)]
    sampler_mode: Option<String>,
    /// sum | max
    #[arg(long, global = true)]
    sampler_agg: Option<String>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run CQR and S-CQR over every trial and write the JSON report.
    Run,
    /// Sampled arm over a grid of lambda values.
    SweepLambda {
        #[arg(long, value_delimiter = ',', default_values_t = [0.45, 0.3, 0.15])]
        lambdas: Vec<f64>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// CQR on clique-injected variants of the synthetic graph.
    SweepCliques {
        /// `size x count` pairs, e.g. `10x5,25x5`.
        #[arg(long, value_delimiter = ',', default_values_t = ["10x5".to_string(), "25x5".to_string(), "40x5".to_string()])]
        grid: Vec<String>,
        #[arg(long, default_value_t = 5)]
        variants: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a synthetic power-law edge list.
    Synth {
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        d_min: Option<usize>,
        #[arg(long)]
        clique_size: Option<usize>,
        #[arg(long)]
        clique_count: Option<usize>,
    },
    /// Fit a discrete power law to an edge list's degrees.
    FitPowerlaw {
        edges: PathBuf,
        #[arg(long)]
        nodes: Option<usize>,
    },
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &g.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
    }
    for kv in &g.overrides {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("override {kv:?} is not key=value"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(alpha) = g.alpha {
        cfg.alpha = alpha;
    }
    if let Some(l) = g.lambda {
        cfg.sampler.lambda = l;
    }
    if let Some(m) = &g.sampler_mode {
        cfg.sampler.mode = m.parse()?;
    }
    if let Some(a) = &g.sampler_agg {
        cfg.sampler.aggregation = a.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_csv(path: Option<&PathBuf>, text: String) -> Result<()> {
    if let Some(p) = path {
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn parse_grid(items: &[String]) -> Result<Vec<(usize, usize)>> {
    items
        .iter()
        .map(|s| {
            let (m, n) = s
                .split_once(['x', 'X'])
                .with_context(|| format!("grid entry {s:?} is not SIZExCOUNT"))?;
            Ok((m.trim().parse()?, n.trim().parse()?))
        })
        .collect()
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = cli.global.out.as_deref();
    match &cli.command {
        Command::Run => {
            let cfg = load_config(&cli.global)?;
            let data = prepare_dataset(&cfg)?;
            let report = run_on_dataset(&cfg, &data)?;
            emit(out, &report.to_json()?)?;
            if let Some(pct) = report.summary.improvement_pct {
                log::info!("improvement {pct:.2}%");
            }
        }
        Command::SweepLambda { lambdas, csv } => {
            let cfg = load_config(&cli.global)?;
            let data = prepare_dataset(&cfg)?;
            let table = sweep_lambda(&cfg, &data, lambdas)?;
            write_csv(csv.as_ref(), table.to_csv())?;
            emit(out, &(serde_json::to_string_pretty(&table)? + "\n"))?;
        }
        Command::SweepCliques { grid, variants, csv } => {
            let cfg = load_config(&cli.global)?;
            let table = sweep_cliques(&cfg, &parse_grid(grid)?, *variants)?;
            write_csv(csv.as_ref(), table.to_csv())?;
            let mut value = serde_json::to_value(&table)?;
            value["spearman"] = serde_json::json!(table.spearman_points());
            emit(out, &(serde_json::to_string_pretty(&value)? + "\n"))?;
        }
        Command::Synth {
            nodes,
            beta,
            d_min,
            clique_size,
            clique_count,
        } => {
            let cfg = load_config(&cli.global)?;
            let mut spec = match cfg.data {
                DataSource::Synthetic(s) => s,
                DataSource::EdgeList { .. } => SynthSpec::default(),
            };
            spec.nodes = nodes.unwrap_or(spec.nodes);
            spec.beta = beta.unwrap_or(spec.beta);
            spec.d_min = d_min.unwrap_or(spec.d_min);
            spec.clique_size = clique_size.unwrap_or(spec.clique_size);
            spec.clique_count = clique_count.unwrap_or(spec.clique_count);
            let graph = pipeline::synthetic_graph(&spec, cfg.seed, 0)?;
            let mut text = format!(
                "# nodes {} beta {} d_min {} cliques {}x{} seed {}\n",
                spec.nodes, spec.beta, spec.d_min, spec.clique_size, spec.clique_count, cfg.seed
            );
            for (u, v) in graph.edges() {
                text.push_str(&format!("{u} {v}\n"));
            }
            emit(out, &text)?;
        }
        Command::FitPowerlaw { edges, nodes } => {
            let text = fs::read_to_string(edges).with_context(|| format!("reading {}", edges.display()))?;
            let graph = Graph::from_edge_list(&text, *nodes)?;
            if graph.num_edges() == 0 {
                bail!("{} contains no edges", edges.display());
            }
            let fit = fit_power_law(&degree_sequence(&graph, true))?;
            emit(out, &(serde_json::to_string_pretty(&fit)? + "\n"))?;
        }
    }
    Ok(())
}
