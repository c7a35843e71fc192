//! `lmod` — a command-line workbench for finite first-order structures:
//! formula evaluation and classification, homomorphism checks, products,
//! limits and colimits of diagrams, reduced products over filters, and the
//! profinite limit with its retraction from the ultraproduct.
//!
//! Workspaces are plain-text `.lmod` files (see `files`).  Every command
//! prints one report to standard output, as text or as JSON with identical
//! content under `--json`.  Exit codes: 0 for pass/value, 1 when a checked
//! property fails (the report carries a replayable witness), 2 for usage and
//! parse errors.

mod commands;
mod files;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use commands::CliError;
use report::Report;

#[derive(Parser)]
#[command(name = "lmod", version, about = "A workbench for finite first-order structures")]
struct Cli {
    /// Emit the report as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Workspace files to load (.lmod format); repeatable.
    #[arg(long, global = true, value_name = "FILE")]
    load: Vec<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a formula in a structure under an assignment.
    Eval {
        #[arg(long)]
        structure: String,
        #[arg(long)]
        formula: String,
        /// Values for the free variables, e.g. `v0=a,v1=b`.
        #[arg(long)]
        assign: Option<String>,
    },
    /// Report which syntactic fragments a formula belongs to.
    Classify {
        #[arg(long)]
        formula: String,
        /// Needed only when several signatures are loaded.
        #[arg(long)]
        signature: Option<String>,
    },
    /// Rewrite an existential-positive formula as a disjunction of
    /// positive-primitive formulas.
    NormalizeEp {
        #[arg(long)]
        formula: String,
        #[arg(long)]
        signature: Option<String>,
    },
    /// Check that a map is a homomorphism.
    CheckHom {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// The map, e.g. `a->x,b->y`.
        #[arg(long)]
        map: String,
    },
    /// Check that a map is an embedding.
    CheckEmbed {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        map: String,
    },
    /// Check purity: the map must reflect positive-primitive formulas
    /// within the probe budget.
    CheckPure {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        map: String,
        /// Bound on free variables, existentials, and atoms per probe.
        #[arg(long, default_value_t = 2)]
        budget: usize,
    },
    /// Check that a homomorphism is a section, by finding a retraction.
    CheckRetraction {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        map: String,
    },
    /// The direct product of a family of structures.
    Product {
        /// Comma-separated structure names, or `key=name` pairs.
        #[arg(long)]
        structures: String,
        /// Name used for the reloadable output block.
        #[arg(long, default_value = "out")]
        name: String,
    },
    /// The equalizer of two parallel homomorphisms.
    Equalizer {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        first: String,
        #[arg(long)]
        second: String,
    },
    /// The limit of a diagram: compatible threads through its maps.
    Limit {
        #[arg(long)]
        diagram: String,
        #[arg(long, default_value = "out")]
        name: String,
    },
    /// The colimit of a diagram along its (downward) maps.
    Colimit {
        #[arg(long)]
        diagram: String,
        #[arg(long, default_value = "out")]
        name: String,
    },
    /// The reduced product of a family over the filter with the given base.
    ReducedProduct {
        #[arg(long)]
        family: String,
        /// Comma-separated base indices of the filter.
        #[arg(long)]
        base: String,
        /// Compute via the colimit of restricted products instead of the
        /// quotient of the full product (tolerates empty factors off the
        /// filter).
        #[arg(long)]
        via_colimit: bool,
        #[arg(long, default_value = "out")]
        name: String,
    },
    /// The ultraproduct: a reduced product over an ultrafilter.
    Ultraproduct {
        #[arg(long)]
        family: String,
        /// The single base index of the ultrafilter.
        #[arg(long)]
        base: String,
        #[arg(long, default_value = "out")]
        name: String,
    },
    /// The diagonal map from a structure into its reduced power.
    Diagonal {
        #[arg(long)]
        structure: String,
        /// Comma-separated index names for the power.
        #[arg(long)]
        indices: String,
        #[arg(long)]
        base: String,
    },
    /// Verify a theorem on concrete inputs.
    Verify {
        #[command(subcommand)]
        what: VerifyCommand,
    },
    /// Generate random, reloadable workspace items.
    Generate {
        #[command(subcommand)]
        what: GenerateCommand,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Satisfaction transfer for ultraproducts over a seeded formula corpus.
    Los {
        #[arg(long)]
        family: String,
        /// The single base index of the ultrafilter.
        #[arg(long)]
        base: String,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Number of distinct formulas to generate.
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Satisfaction transfer for reduced products, restricted to formulas
    /// built from atoms by conjunction and quantifiers.
    LosPp {
        #[arg(long)]
        family: String,
        /// Comma-separated base indices of the filter.
        #[arg(long)]
        base: String,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        seed: u64,
    },
    /// The comparison maps between the colimit of restricted products and
    /// the reduced product compose to identities both ways.
    ColimIso {
        #[arg(long)]
        family: String,
        #[arg(long)]
        base: String,
    },
    /// The limit of a diagram is a retract of the ultraproduct of its
    /// stages: the canonical section and retraction compose to the identity.
    Retraction {
        #[arg(long)]
        diagram: String,
    },
    /// Stages satisfying geometric axioms force the limit to satisfy them.
    Closure {
        #[arg(long)]
        diagram: String,
        /// A geometric axiom; repeatable.
        #[arg(long = "axiom", value_name = "FORMULA")]
        axioms: Vec<String>,
    },
}

#[derive(Subcommand)]
enum GenerateCommand {
    /// A random functorial diagram over a random directed poset, emitted as
    /// a reloadable .lmod bundle.
    Diagram {
        #[arg(long)]
        seed: u64,
        /// `graph` or `special-group`.
        #[arg(long, default_value = "graph")]
        signature: String,
        #[arg(long, default_value_t = 4)]
        max_indices: usize,
        #[arg(long, default_value_t = 3)]
        max_size: usize,
        /// Base name for the emitted items.
        #[arg(long, default_value = "generated")]
        name: String,
        /// Also write the bundle to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let ws = files::load(&cli.load)?;
    match &cli.command {
        Command::Eval {
            structure,
            formula,
            assign,
        } => commands::eval(&ws, structure, formula, assign.as_deref()),
        Command::Classify { formula, signature } => {
            commands::classify_cmd(&ws, formula, signature.as_deref())
        }
        Command::NormalizeEp { formula, signature } => {
            commands::normalize_ep(&ws, formula, signature.as_deref())
        }
        Command::CheckHom { from, to, map } => commands::check_hom(&ws, from, to, map),
        Command::CheckEmbed { from, to, map } => commands::check_embed(&ws, from, to, map),
        Command::CheckPure {
            from,
            to,
            map,
            budget,
        } => commands::check_pure(&ws, from, to, map, *budget),
        Command::CheckRetraction { from, to, map } => {
            commands::check_retraction(&ws, from, to, map)
        }
        Command::Product { structures, name } => commands::product_cmd(&ws, structures, name),
        Command::Equalizer {
            from,
            to,
            first,
            second,
        } => commands::equalizer_cmd(&ws, from, to, first, second),
        Command::Limit { diagram, name } => commands::limit_cmd(&ws, diagram, name),
        Command::Colimit { diagram, name } => commands::colimit_cmd(&ws, diagram, name),
        Command::ReducedProduct {
            family,
            base,
            via_colimit,
            name,
        } => commands::reduced_product_cmd(&ws, family, base, *via_colimit, name),
        Command::Ultraproduct { family, base, name } => {
            commands::ultraproduct_cmd(&ws, family, base, name)
        }
        Command::Diagonal {
            structure,
            indices,
            base,
        } => commands::diagonal_cmd(&ws, structure, indices, base),
        Command::Verify { what } => match what {
            VerifyCommand::Los {
                family,
                base,
                depth,
                count,
                seed,
            } => commands::verify_los(&ws, family, base, *depth, *count, *seed, false),
            VerifyCommand::LosPp {
                family,
                base,
                depth,
                count,
                seed,
            } => commands::verify_los(&ws, family, base, *depth, *count, *seed, true),
            VerifyCommand::ColimIso { family, base } => {
                commands::verify_colim_iso(&ws, family, base)
            }
            VerifyCommand::Retraction { diagram } => commands::verify_retraction(&ws, diagram),
            VerifyCommand::Closure { diagram, axioms } => {
                commands::verify_closure(&ws, diagram, axioms)
            }
        },
        Command::Generate { what } => match what {
            GenerateCommand::Diagram {
                seed,
                signature,
                max_indices,
                max_size,
                name,
                out,
            } => commands::generate_diagram(&commands::GenerateArgs {
                seed: *seed,
                signature: signature.clone(),
                max_indices: *max_indices,
                max_size: *max_size,
                name: name.clone(),
                out: out.clone(),
            }),
        },
    }
}

/// Reconstruct the invocation for the report, with the binary path
/// normalized and arguments re-quoted where needed.
fn echo_command() -> String {
    let mut parts = vec!["lmod".to_string()];
    for arg in std::env::args().skip(1) {
        if arg.is_empty() || arg.chars().any(|c| c.is_whitespace() || c == '"') {
            parts.push(format!("{arg:?}"));
        } else {
            parts.push(arg);
        }
    }
    parts.join(" ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    match run(&cli) {
        Ok(mut r) => {
            r.command = echo_command();
            r.elapsed = start.elapsed();
            if cli.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&r.to_json()).expect("reports serialize")
                );
            } else {
                print!("{}", r.to_text());
            }
            ExitCode::from(r.outcome.exit_code())
        }
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
