use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use sct_core::term_graphs::{validate_term, OmegaTerm, UPattern};

use sct_cli::{analyze, corpus, verify_witness, Witness, WitnessData};

#[derive(Parser)]
#[command(name = "sct", about = "Star-comb duality decisions with machine-checkable witnesses", version)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Decide all seven theorems for a term and a vertex set pattern.
    Analyze {
        /// Path to the term JSON file.
        term: PathBuf,
        /// Vertex set pattern ("all" or patterns joined by ';').
        #[arg(long)]
        u: String,
        #[arg(long, default_value_t = 6)]
        budget: u32,
        /// Output format: json | text.
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Build the witness for one theorem and write it to a file.
    Witness {
        term: PathBuf,
        #[arg(long)]
        u: String,
        /// Theorem number 1..=7.
        #[arg(long)]
        theorem: u8,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        budget: u32,
    },
    /// Re-verify a witness file against the term alone.
    Verify {
        term: PathBuf,
        witness: PathBuf,
        #[arg(long, default_value_t = 6)]
        budget: u32,
    },
    /// Built-in corpus commands.
    Corpus {
        #[command(subcommand)]
        cmd: CorpusCmd,
    },
    /// Compute the U-rank of a term.
    Rank {
        term: PathBuf,
        #[arg(long)]
        u: String,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Run the analysis over every corpus case and check the expected
    /// verdict table.
    Run {
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 6)]
        budget: u32,
    },
}

fn load_term(path: &PathBuf) -> Result<OmegaTerm> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(validate_term(&raw)?)
}

fn parse_u(t: &OmegaTerm, s: &str) -> Result<UPattern> {
    if s == "all" {
        return Ok(t.all_vertices());
    }
    Ok(s.parse()?)
}

fn run() -> Result<u8> {
    match Cli::parse().command {
        Commands::Analyze { term, u, budget, format } => {
            let t = load_term(&term)?;
            let u = parse_u(&t, &u)?;
            let report = analyze(&t, &u, budget)?;
            match format.as_str() {
                "json" => println!("{}", serde_json::to_string_pretty(&report)?),
                _ => {
                    println!("comb attached to U: {}", report.comb_exists);
                    println!("star attached to U: {}", report.star_exists);
                    println!("critical vertex sets: {}", report.critical_sets.len());
                    println!("U-rank: {:?}", report.u_rank);
                    for th in &report.theorems {
                        println!(
                            "theorem {}: side ({}) holds, witness {}",
                            th.theorem,
                            if th.side_i { "i" } else { "ii" },
                            if th.verified { "verified" } else { "FAILED" },
                        );
                    }
                    println!(
                        "agreement: comb {} star {} ({} ms)",
                        report.comb_agreement, report.star_agreement, report.runtime_ms
                    );
                }
            }
            Ok(if report.all_verified && report.comb_agreement && report.star_agreement {
                0
            } else {
                2
            })
        }
        Commands::Witness { term, u, theorem, out, budget } => {
            let t = load_term(&term)?;
            let u = parse_u(&t, &u)?;
            if !(1..=7).contains(&theorem) {
                return Err(anyhow!("theorem must be 1..=7"));
            }
            let report = analyze(&t, &u, budget)?;
            let th = &report.theorems[(theorem - 1) as usize];
            fs::write(&out, serde_json::to_string_pretty(&th.witness)?)?;
            println!(
                "theorem {theorem}: side ({}) holds; witness written to {}",
                if th.side_i { "i" } else { "ii" },
                out.display()
            );
            Ok(0)
        }
        Commands::Verify { term, witness, budget } => {
            let t = load_term(&term)?;
            let raw = fs::read_to_string(&witness)
                .with_context(|| format!("reading {}", witness.display()))?;
            let w: Witness = serde_json::from_str(&raw).context("parsing the witness file")?;
            match verify_witness(&t, &w, budget) {
                Ok(checks) => {
                    for c in checks {
                        println!("ok: {c}");
                    }
                    println!("witness verified");
                    Ok(0)
                }
                Err(e) => {
                    println!("verification failed: {e}");
                    Ok(2)
                }
            }
        }
        Commands::Corpus { cmd: CorpusCmd::Run { filter, budget } } => {
            let mut failed = false;
            for case in corpus() {
                if let Some(f) = &filter {
                    if !case.name.contains(f.as_str()) {
                        continue;
                    }
                }
                let report = analyze(&case.term, &case.u, budget)?;
                let ok = report.comb_exists == case.comb
                    && report.star_exists == case.star
                    && report.critical_sets.len() == case.crit_count
                    && report.u_rank == case.rank
                    && report.all_verified
                    && report.comb_agreement
                    && report.star_agreement;
                failed |= !ok;
                println!(
                    "{} {:14} comb={:5} star={:5} crit={} rank={:?} ({} ms)",
                    if ok { "PASS" } else { "FAIL" },
                    case.name,
                    report.comb_exists,
                    report.star_exists,
                    report.critical_sets.len(),
                    report.u_rank,
                    report.runtime_ms,
                );
            }
            Ok(if failed { 2 } else { 0 })
        }
        Commands::Rank { term, u } => {
            let t = load_term(&term)?;
            let u = parse_u(&t, &u)?;
            let (rank, tree) = sct_core::boundary::u_rank(&t, &u).map_err(|e| anyhow!(e))?;
            let payload = serde_json::json!({
                "u_rank": rank,
                "witness": tree.map(|tr| WitnessData::RankTree {
                    rank: match rank {
                        sct_core::boundary::RankValue::Finite(r) => r,
                        _ => 0,
                    },
                    tree: tr,
                }),
            });
            println!("{}", serde_json::to_string_pretty(&payload)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
