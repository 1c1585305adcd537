use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use board_clerk::harness::{self, ExperimentSpec, MetricsSummary, METRIC_COLUMNS};
use board_clerk::hash::Digest;
use board_clerk::hyperblock::{verify_tx_result, HyperBlock, TxResultProof, Verdict};
use board_clerk::sim::{self, SimConfig};
use board_clerk::utxo::TxId;

#[derive(Parser)]
#[command(name = "bnc", version, about = "Board-and-Clerk simulator, experiment runner and proof verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    JsonLines,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonLines => "jsonl",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its latency records, summary and log.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Write up to this many hyper-block/proof pairs under `<out-dir>/proofs`.
        #[arg(long, default_value_t = 0)]
        proofs: usize,
    },
    /// Run a sweep described by an experiment file.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Check a transaction result proof against a hyper-block.
    Verify {
        #[arg(long)]
        hyperblock: PathBuf,
        #[arg(long)]
        proof: PathBuf,
        /// Transaction id (hex); defaults to the one named in the proof.
        #[arg(long)]
        tx: Option<String>,
    },
    /// Print one node's DAG as an edge list.
    ExportDag {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        node: u32,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SimConfig> {
    let text = String::from_utf8(read(path)?).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let mut cfg = SimConfig::parse(&text).with_context(|| format!("bad config {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run(config: &Path, seed: Option<u64>, out_dir: &Path, format: Format, proofs: usize) -> Result<()> {
    let cfg = load_config(config, seed)?;
    let out = sim::run(&cfg)?;
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let summary = MetricsSummary::of_run(&out);
    let ext = format.ext();
    match format {
        Format::Csv => {
            write(out_dir, "latencies.csv", harness::latencies_csv(&out.latencies))?;
            write(
                out_dir,
                "summary.csv",
                format!(
                    "seed,config_hash,truncated,violations,{METRIC_COLUMNS}\n{},{},{},{},{}\n",
                    cfg.seed,
                    cfg.hash(),
                    out.truncated,
                    out.violations(),
                    summary.csv_values()
                ),
            )?;
        }
        Format::JsonLines => {
            write(out_dir, "latencies.jsonl", harness::latencies_json_lines(&out.latencies))?;
            let row = serde_json::json!({
                "seed": cfg.seed,
                "config_hash": cfg.hash(),
                "truncated": out.truncated,
                "violations": out.violations(),
                "metrics": summary,
            });
            write(out_dir, "summary.jsonl", format!("{row}\n"))?;
        }
    }
    write(out_dir, "log.jsonl", out.log_json_lines())?;
    write(out_dir, "config.cfg", cfg.render())?;
    if proofs > 0 {
        let node = out.honest().next().context("no live node")?.id();
        let dir = out_dir.join("proofs");
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let mut written = 0;
        'blocks: for (hb, txs) in out.hyperblocks(node).into_iter().flatten() {
            let name = format!("r{}", hb.leadership.round);
            write(&dir, &format!("{name}.hb"), hb.to_bytes())?;
            for p in txs {
                if written == proofs {
                    break 'blocks;
                }
                write(&dir, &format!("{name}-{}.proof", &p.tx.to_string()[..16]), p.to_bytes())?;
                written += 1;
            }
        }
    }
    if out.truncated {
        eprintln!("warning: run hit max_time before completing");
    }
    println!(
        "committed {} fast-rate {:.3} formal {:.2} rounds fast {:.2} rounds -> {}/latencies.{ext}",
        summary.committed,
        summary.fast_rate,
        summary.mean_formal_rounds,
        summary.mean_fast_rounds,
        out_dir.display()
    );
    Ok(())
}

fn experiment(spec: &Path, seed: Option<u64>, out_dir: &Path, format: Format) -> Result<()> {
    let text = String::from_utf8(read(spec)?).with_context(|| format!("{} is not UTF-8", spec.display()))?;
    let mut spec = ExperimentSpec::parse(&text).with_context(|| format!("bad experiment {}", spec.display()))?;
    if let Some(s) = seed {
        spec.base.seed = s;
    }
    let result = harness::run_experiment(&spec)?;
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let file = format!("{}.{}", spec.name, format.ext());
    match format {
        Format::Csv => write(out_dir, &file, result.to_csv())?,
        Format::JsonLines => write(out_dir, &file, result.to_json_lines())?,
    }
    print!("{}", result.table());
    if result.rows.iter().any(|r| r.truncated) {
        eprintln!("warning: some runs were truncated; their rows are marked");
    }
    Ok(())
}

fn verify(hyperblock: &Path, proof: &Path, tx: Option<&str>) -> Result<bool> {
    let hb = HyperBlock::from_bytes(&read(hyperblock)?).with_context(|| format!("cannot decode {}", hyperblock.display()))?;
    let p = TxResultProof::from_bytes(&read(proof)?).with_context(|| format!("cannot decode {}", proof.display()))?;
    let tx = match tx {
        Some(h) => TxId(Digest::from_hex(h).context("bad transaction id")?),
        None => p.tx,
    };
    match verify_tx_result(&p, &hb, &tx) {
        Verdict::Success => println!("{tx} success"),
        Verdict::Failed => println!("{tx} failed"),
        Verdict::Invalid => {
            eprintln!("{tx}: proof does not verify");
            return Ok(false);
        }
    }
    Ok(true)
}

fn export_dag(config: &Path, seed: Option<u64>, node: u32, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(config, seed)?;
    if node >= cfg.n {
        bail!("node {node} out of range for n = {}", cfg.n);
    }
    let result = sim::run(&cfg)?;
    let edges = result.nodes[node as usize].dag().export_edges();
    match out {
        Some(path) => fs::write(path, edges).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{edges}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, seed, out_dir, format, proofs } => run(config, *seed, out_dir, *format, *proofs).map(|_| true),
        Command::Experiment { spec, seed, out_dir, format } => experiment(spec, *seed, out_dir, *format).map(|_| true),
        Command::Verify { hyperblock, proof, tx } => verify(hyperblock, proof, tx.as_deref()),
        Command::ExportDag { config, seed, node, out } => export_dag(config, *seed, *node, out.as_deref()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
