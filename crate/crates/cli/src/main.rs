//! Command-line workbench: parse an AIGER file, inspect its structure,
//! classify attackers, sweep bounds, and query saved classifications.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use aigclass::aig::parse::{parse_ascii, parse_binary};
use aigclass::analysis;
use aigclass::classify::{classify, naive_classify, Options};
use aigclass::coverage::coverage;
use aigclass::report;
use aigclass::solver::ExternalSolver;
use aigclass::unroll::UnrolledInstance;
use aigclass::{Aig, ClassificationMap, ComponentId, ComponentSet, Universe, Verdict};

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "aigclass", version, about = "Attacker classification for AIGER circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print circuit size and per-requirement structure summary.
    Info { file: PathBuf },
    /// Emit cone-of-influence, source, and Jaccard data for all requirements.
    Coi {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Classify attackers for every requirement.
    Classify {
        file: PathBuf,
        #[command(flatten)]
        config: RunConfig,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write report.json, classification.json, metrics.csv, witnesses.json
        /// and minimal-attackers.json into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Use the reference full-enumeration classifier.
        #[arg(long)]
        naive: bool,
        /// Cross-check every recorded verdict with the external DIMACS solver
        /// from AIGCLASS_EXTERNAL_SOLVER.
        #[arg(long)]
        cross_check: bool,
    },
    /// Run classify over several bounds; prints one CSV block per bound.
    Sweep {
        file: PathBuf,
        /// Comma-separated bounds, e.g. 0,1,5,10. Overrides -t.
        #[arg(long, required = true, value_delimiter = ',')]
        bounds: Vec<usize>,
        #[command(flatten)]
        config: RunConfig,
        /// Only print the per-bound averages rows.
        #[arg(long)]
        averages_only: bool,
    },
    /// Query a saved classification without new solver calls.
    Query {
        /// classification.json from a prior classify run.
        classification: PathBuf,
        #[arg(long)]
        requirement: usize,
        /// Comma-separated components, e.g. v1,g2. Empty string for the
        /// empty attacker.
        #[arg(long, default_value = "")]
        attacker: String,
    },
    /// Export the unrolled CNF of the requirements as annotated DIMACS.
    ExportDimacs {
        file: PathBuf,
        #[command(flatten)]
        config: RunConfig,
        /// Comma-separated requirement indices; all when omitted.
        #[arg(long, value_delimiter = ',')]
        requirements: Option<Vec<usize>>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct RunConfig {
    /// Unrolling bound t.
    #[arg(long, short = 't', default_value_t = 10)]
    steps: usize,
    /// Maximum attacker size z.
    #[arg(long, short = 'z', default_value_t = 3)]
    max_size: usize,
    /// Budget per requirement in seconds.
    #[arg(long, default_value_t = 600)]
    budget: u64,
    #[arg(long)]
    no_isolation: bool,
    #[arg(long)]
    no_monotonicity: bool,
    #[arg(long, value_enum, default_value_t = UniverseArg::LatchesOnly)]
    universe: UniverseArg,
    /// Jaccard clustering threshold.
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
}

impl RunConfig {
    fn options(&self) -> Options {
        Options {
            bound: self.steps,
            max_size: self.max_size,
            requirement_budget: Duration::from_secs(self.budget),
            isolation: !self.no_isolation,
            monotonicity: !self.no_monotonicity,
            universe: match self.universe {
                UniverseArg::LatchesOnly => Universe::LatchesOnly,
                UniverseArg::LatchesAndGates => Universe::LatchesAndGates,
            },
            cluster_threshold: self.threshold,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum UniverseArg {
    LatchesOnly,
    LatchesAndGates,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Everything a classify run produces, in one JSON document.
#[derive(Serialize, Deserialize)]
struct Artifact {
    report: report::Report,
    classification: ClassificationMap,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Debug)]
enum CliError {
    Parse(String),
    Usage(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(msg) | CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_PARSE,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Io(e)
    }
}

fn load(path: &Path) -> Result<Aig, CliError> {
    let bytes = std::fs::read(path)?;
    let result = if bytes.starts_with(b"aig ") {
        parse_binary(&bytes)
    } else {
        parse_ascii(&bytes)
    };
    result.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn parse_attacker(text: &str) -> Result<ComponentSet, CliError> {
    let mut set = ComponentSet::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let c = ComponentId::from_str(part).map_err(CliError::Usage)?;
        if c.is_input() {
            return Err(CliError::Usage(format!(
                "attackers cannot control inputs: {part}"
            )));
        }
        set.insert(c);
    }
    Ok(set)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Info { file } => cmd_info(&file),
        Command::Coi { file, format } => cmd_coi(&file, format),
        Command::Classify {
            file,
            config,
            format,
            out_dir,
            naive,
            cross_check,
        } => cmd_classify(&file, &config, format, out_dir, naive, cross_check),
        Command::Sweep {
            file,
            bounds,
            config,
            averages_only,
        } => cmd_sweep(&file, &bounds, &config, averages_only),
        Command::Query {
            classification,
            requirement,
            attacker,
        } => cmd_query(&classification, requirement, &attacker),
        Command::ExportDimacs {
            file,
            config,
            requirements,
            output,
        } => cmd_export(&file, &config, requirements, output),
    }
}

fn cmd_info(file: &Path) -> Result<ExitCode, CliError> {
    let aig = load(file)?;
    println!(
        "inputs={} latches={} gates={} requirements={}",
        aig.num_inputs(),
        aig.num_latches(),
        aig.num_gates(),
        aig.requirements().len()
    );
    for (i, r) in aig.requirements().iter().enumerate() {
        let cone = analysis::coi(&aig, r.good);
        let sources = analysis::sources(&aig, r.good);
        println!(
            "r{} name={} coi={} sources={}",
            i + 1,
            r.name,
            cone.len(),
            sources.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CoiReport {
    requirements: Vec<CoiRow>,
    /// Pairwise Jaccard indices of requirement source sets.
    jaccard: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct CoiRow {
    index: usize,
    name: String,
    coi: Vec<String>,
    sources: Vec<String>,
}

fn cmd_coi(file: &Path, format: Format) -> Result<ExitCode, CliError> {
    let aig = load(file)?;
    let render = |set: &ComponentSet| -> Vec<String> {
        set.iter().map(|c| c.to_string()).collect()
    };
    let rows: Vec<CoiRow> = aig
        .requirements()
        .iter()
        .enumerate()
        .map(|(i, r)| CoiRow {
            index: i,
            name: r.name.clone(),
            coi: render(&analysis::coi(&aig, r.good)),
            sources: render(&analysis::sources(&aig, r.good)),
        })
        .collect();
    let jaccard: Vec<Vec<f64>> = aig
        .requirements()
        .iter()
        .map(|a| {
            aig.requirements()
                .iter()
                .map(|b| analysis::jaccard(&aig, a.good, b.good))
                .collect()
        })
        .collect();
    match format {
        Format::Json => {
            let report = CoiReport {
                requirements: rows,
                jaccard,
            };
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
        }
        Format::Csv => {
            println!("requirement,name,coi,sources");
            for row in &rows {
                println!(
                    "{},{},{},{}",
                    row.index,
                    row.name,
                    row.coi.join(" "),
                    row.sources.join(" ")
                );
            }
            println!("jaccard");
            for line in &jaccard {
                println!(
                    "{}",
                    line.iter()
                        .map(|v| format!("{v:.4}"))
                        .collect::<Vec<_>>()
                        .join(",")
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(
    file: &Path,
    config: &RunConfig,
    format: Format,
    out_dir: Option<PathBuf>,
    naive: bool,
    cross_check: bool,
) -> Result<ExitCode, CliError> {
    let aig = load(file)?;
    let options = config.options();
    let map = if naive {
        naive_classify(&aig, &options)
    } else {
        classify(&aig, &options)
    }
    .map_err(|e| CliError::Parse(format!("classification failed: {e}")))?;
    if cross_check {
        cross_check_verdicts(&aig, &map)?;
    }
    let cov = coverage(&map);
    let report = report::build(Some(file.display().to_string()), &map, &cov);
    let partial = map.requirements.iter().any(|r| !r.complete);

    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)?;
        let artifact = Artifact {
            report: report.clone(),
            classification: map.clone(),
        };
        fn json<T: Serialize>(value: &T) -> String {
            serde_json::to_string_pretty(value).unwrap()
        }
        std::fs::write(dir.join("report.json"), json(&artifact.report))?;
        std::fs::write(dir.join("classification.json"), json(&artifact.classification))?;
        let minimal: std::collections::BTreeMap<String, Vec<Vec<String>>> = map
            .requirements
            .iter()
            .map(|rc| {
                (
                    rc.name.clone(),
                    rc.minimal_attackers
                        .iter()
                        .map(|m| m.iter().map(|c| c.to_string()).collect())
                        .collect(),
                )
            })
            .collect();
        std::fs::write(dir.join("minimal-attackers.json"), json(&minimal))?;
        let witnesses: Vec<_> = map
            .requirements
            .iter()
            .flat_map(|rc| rc.witnesses.clone())
            .collect();
        std::fs::write(dir.join("witnesses.json"), json(&witnesses))?;
        let mut csv = String::from(report::CSV_HEADER);
        csv.push('\n');
        for row in report::csv_requirement_rows(&map, &cov) {
            csv.push_str(&row);
            csv.push('\n');
        }
        csv.push_str(&report::csv_average_row(&map, &cov));
        csv.push('\n');
        std::fs::write(dir.join("metrics.csv"), csv)?;
    }

    match format {
        Format::Json => {
            let artifact = Artifact {
                report,
                classification: map,
            };
            println!("{}", serde_json::to_string_pretty(&artifact).unwrap());
        }
        Format::Csv => {
            println!("{}", report::CSV_HEADER);
            for row in report::csv_requirement_rows(&map, &cov) {
                println!("{row}");
            }
            println!("{}", report::csv_average_row(&map, &cov));
        }
    }
    Ok(if partial {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    })
}

/// Replays every recorded SAT/UNSAT verdict through the external solver on
/// the exported instance. Any disagreement is a hard error.
fn cross_check_verdicts(aig: &Aig, map: &ClassificationMap) -> Result<(), CliError> {
    let Some(external) = ExternalSolver::from_env() else {
        return Err(CliError::Usage(
            "--cross-check needs AIGCLASS_EXTERNAL_SOLVER to point at a DIMACS solver".into(),
        ));
    };
    let options = &map.options;
    for rc in &map.requirements {
        let inst = UnrolledInstance::build(
            aig,
            &[rc.requirement],
            options.bound,
            options.isolation,
            options.universe,
        )
        .map_err(|e| CliError::Parse(e.to_string()))?;
        let verdicts = rc
            .minimal_attackers
            .iter()
            .map(|a| (a, true))
            .chain(rc.safe_sets.iter().map(|a| (a, false)));
        for (attacker, expect_sat) in verdicts {
            let assumptions = inst
                .assumptions(attacker, rc.requirement)
                .map_err(|e| CliError::Parse(e.to_string()))?;
            let verdict = external
                .solve(&inst.cnf, &assumptions)
                .map_err(|e| CliError::Parse(format!("external solver: {e}")))?;
            let is_sat = matches!(verdict, aigclass::solver::ExternalVerdict::Sat(_));
            if is_sat != expect_sat {
                return Err(CliError::Parse(format!(
                    "external solver disagrees on requirement {} attacker {:?}",
                    rc.name, attacker
                )));
            }
        }
    }
    Ok(())
}

fn cmd_sweep(
    file: &Path,
    bounds: &[usize],
    config: &RunConfig,
    averages_only: bool,
) -> Result<ExitCode, CliError> {
    if bounds.is_empty() {
        return Err(CliError::Usage("sweep needs at least one bound".into()));
    }
    let aig = load(file)?;
    let mut partial = false;
    println!("{}", report::CSV_HEADER);
    for &t in bounds {
        let mut options = config.options();
        options.bound = t;
        let map = classify(&aig, &options)
            .map_err(|e| CliError::Parse(format!("classification failed: {e}")))?;
        let cov = coverage(&map);
        partial |= map.requirements.iter().any(|r| !r.complete);
        if !averages_only {
            for row in report::csv_requirement_rows(&map, &cov) {
                println!("{row}");
            }
        }
        println!("{}", report::csv_average_row(&map, &cov));
    }
    Ok(if partial {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_query(
    classification: &Path,
    requirement: usize,
    attacker: &str,
) -> Result<ExitCode, CliError> {
    let attacker = parse_attacker(attacker)?;
    let text = std::fs::read_to_string(classification)?;
    let map: ClassificationMap = serde_json::from_str::<Artifact>(&text)
        .map(|a| a.classification)
        .or_else(|_| serde_json::from_str(&text))
        .map_err(|e| CliError::Parse(format!("{}: {e}", classification.display())))?;
    let verdict = map
        .query(requirement, &attacker)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    println!(
        "{}",
        match verdict {
            Verdict::Breaks => "break",
            Verdict::Safe => "safe",
            Verdict::Unknown => "unknown",
        }
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(
    file: &Path,
    config: &RunConfig,
    requirements: Option<Vec<usize>>,
    output: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let aig = load(file)?;
    let options = config.options();
    let requirements =
        requirements.unwrap_or_else(|| (0..aig.requirements().len()).collect());
    let inst = UnrolledInstance::build(
        &aig,
        &requirements,
        options.bound,
        options.isolation,
        options.universe,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let dimacs = inst.to_dimacs();
    match output {
        Some(path) => std::fs::write(path, dimacs)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&dimacs)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
