use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use umatrix::builder::{random_instance, validate_annotation, Strictness};
use umatrix::document::{build_report, ReportOptions, TreeSpecDocument};
use umatrix::dot::render_dot;
use umatrix::rational::parse_rational;
use umatrix::roots::build_structure_sets;
use umatrix::selftest::{reproducer, run_selftest, SelftestConfig};
use umatrix::Error;

const OK: u8 = 0;
const INVALID: u8 = 1;
const PARSE: u8 = 2;
const HYPOTHESES: u8 = 3;
const MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(
    name = "umatrix",
    version,
    about = "Exact analysis of tree-supported inverse M-matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Check the tree and annotation conditions.
    Validate {
        /// Spec file, or `-` for stdin.
        spec: PathBuf,
    },
    /// Matrix, exact inverse, potentials, roots, links and zero blocks.
    Report {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Kernel scale, at least the largest diagonal entry of the inverse.
        #[arg(long)]
        eta: Option<String>,
        /// Include the Neumann gap sequence up to this many terms.
        #[arg(long)]
        neumann: Option<usize>,
    },
    /// Graphviz rendering of the annotated tree.
    Dot {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Emit a random valid spec.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
        max_leaves: u64,
        #[arg(long)]
        strict: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check every invariant suite on random instances against the exact inverse.
    Selftest {
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
        cases: u64,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
        max_leaves: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Strict draws only (default alternates strict and lax).
        #[arg(long)]
        strict: bool,
        /// Extra spec files checked before the random cases.
        #[arg(long, num_args = 1..)]
        corpus: Vec<PathBuf>,
        /// Where to write the reproducer spec on failure.
        #[arg(long, default_value = "selftest-reproducer.json")]
        reproducer: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_)
            | Error::MalformedTree(_)
            | Error::UnknownNode(_)
            | Error::MissingAnnotation(_) => PARSE,
            Error::FixedLeafNotRightmost { .. } | Error::InvalidAnnotation(_) => INVALID,
            Error::Singular(_) | Error::EtaTooSmall { .. } => HYPOTHESES,
            Error::IndexOutOfRange(..) | Error::DimensionMismatch(_) => MISMATCH,
        };
        let message = match code {
            HYPOTHESES => format!("theorem hypotheses not met: {e}"),
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

type CmdResult = Result<u8, Failure>;

fn read_input(path: &Path) -> Result<String, Failure> {
    let mut text = String::new();
    let read = if path == Path::new("-") {
        io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        fs::read_to_string(path).map(|t| text = t)
    };
    read.map_err(|e| Failure {
        code: PARSE,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(text)
}

fn load(path: &Path) -> Result<TreeSpecDocument, Failure> {
    Ok(TreeSpecDocument::parse(&read_input(path)?)?)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    let io_failure = |e: io::Error| Failure {
        code: PARSE,
        message: format!("write failed: {e}"),
    };
    match path {
        Some(p) if p != Path::new("-") => fs::write(p, text).map_err(io_failure),
        _ => io::stdout().write_all(text.as_bytes()).map_err(io_failure),
    }
}

fn validate(spec: &Path) -> CmdResult {
    let (tree, ann) = load(spec)?.to_instance()?;
    let violations = validate_annotation(&tree, &ann);
    if violations.is_empty() {
        println!(
            "valid: {} leaves, fixed leaf {}",
            tree.num_leaves(),
            tree.name(tree.fixed_leaf())
        );
        return Ok(OK);
    }
    for v in &violations {
        println!("{v}");
    }
    Ok(INVALID)
}

fn report(spec: &Path, format: Format, eta: Option<&str>, neumann: Option<usize>) -> CmdResult {
    let doc = load(spec)?;
    let (tree, ann) = doc.to_instance()?;
    let eta = eta.map(parse_rational).transpose()?;
    let outcome = build_report(
        &tree,
        &ann,
        &ReportOptions {
            eta,
            neumann_terms: neumann,
        },
    )?;
    if !outcome.mismatches.is_empty() {
        eprintln!("structural analysis disagrees with the exact inverse:");
        for m in &outcome.mismatches {
            eprintln!("  {m}");
        }
        eprintln!("instance:\n{}", doc.to_json());
        return Ok(MISMATCH);
    }
    let text = match format {
        Format::Json => outcome.report.to_json() + "\n",
        Format::Text => outcome.report.to_text(),
    };
    write_output(None, &text)?;
    Ok(OK)
}

fn dot(spec: &Path, output: Option<&Path>) -> CmdResult {
    let (tree, ann) = load(spec)?.to_instance()?;
    let sets = build_structure_sets(&tree, &ann)?;
    write_output(output, &render_dot(&tree, &ann, &sets))?;
    Ok(OK)
}

fn random(seed: u64, max_leaves: usize, strict: bool, output: Option<&Path>) -> CmdResult {
    let strictness = if strict {
        Strictness::Strict
    } else {
        Strictness::Lax
    };
    let (tree, ann) = random_instance(seed, max_leaves, strictness);
    write_output(
        output,
        &(TreeSpecDocument::from_instance(&tree, &ann).to_json() + "\n"),
    )?;
    Ok(OK)
}

fn selftest(
    cases: usize,
    max_leaves: usize,
    seed: u64,
    strict: bool,
    corpus: &[PathBuf],
    reproducer_path: &Path,
) -> CmdResult {
    let mut config = SelftestConfig::new(cases, max_leaves, seed, strict);
    for path in corpus {
        let (tree, ann) = load(path)?.to_instance()?;
        config.corpus.push((path.display().to_string(), tree, ann));
    }
    let summary = run_selftest(&config);
    print!("{}", summary.render());
    if let Some((tree, ann)) = reproducer(&summary, &config.options) {
        let text = TreeSpecDocument::from_instance(&tree, &ann).to_json() + "\n";
        write_output(Some(reproducer_path), &text)?;
        println!("reproducer written to {}", reproducer_path.display());
        return Ok(MISMATCH);
    }
    Ok(OK)
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Validate { spec } => validate(&spec),
        Command::Report {
            spec,
            format,
            eta,
            neumann,
        } => report(&spec, format, eta.as_deref(), neumann),
        Command::Dot { spec, output } => dot(&spec, output.as_deref()),
        Command::Random {
            seed,
            max_leaves,
            strict,
            output,
        } => random(seed, max_leaves as usize, strict, output.as_deref()),
        Command::Selftest {
            cases,
            max_leaves,
            seed,
            strict,
            corpus,
            reproducer,
        } => selftest(
            cases as usize,
            max_leaves as usize,
            seed,
            strict,
            &corpus,
            &reproducer,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
