use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dynobs::augment::budget_from_env;
use dynobs::checker::{check_with, CheckOptions, CheckRun, Report};
use dynobs::model::{parse_model_def, validate};
use dynobs::oracle::{natural_eval_bounded, History, RecordTuple, Verdict3};
use dynobs::reduce::{check_via_reduction_run, reduce};
use dynobs::{fixtures, parse_formula, Formula, Model};

const EXIT_HOLDS: u8 = 0;
const EXIT_FAILS: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "dynobs", version, about = "Model checker for temporal-epistemic logic with observation change")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and list every violation.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Decide whether the model satisfies the formula.
    Check {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = Engine::Direct)]
        engine: Engine,
        /// Print structure statistics before the verdict.
        #[arg(long)]
        stats: bool,
        /// Write the augmented structure as Graphviz DOT.
        #[arg(long, value_name = "FILE")]
        dump_augmented: Option<PathBuf>,
        /// Write a JSON report.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Node budget for the augmented structure.
        #[arg(long)]
        budget: Option<usize>,
        /// Use k-trees even where information sets suffice.
        #[arg(long)]
        ktree: bool,
    },
    /// Evaluate the formula by bounded enumeration of histories.
    Oracle {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 4)]
        bound: usize,
    },
    /// Run both engines and the oracle and compare their verdicts.
    Compare {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 4)]
        bound: usize,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Emit the static-observation instance.
    Reduce {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_name = "FILE")]
        out_model: PathBuf,
        #[arg(long, value_name = "FILE")]
        out_formula: PathBuf,
    },
    /// Write a bundled example to the working directory.
    Examples {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(fixtures::BUNDLES))]
        name: String,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    model: PathBuf,
    /// Formula text, or `@FILE` to read it from a file.
    #[arg(long)]
    formula: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Direct,
    Reduction,
}

struct Failure {
    code: String,
    message: String,
}

impl Failure {
    fn new(code: impl Into<String>, message: impl Display) -> Failure {
        Failure { code: code.into(), message: message.to_string() }
    }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new("E_IO", format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new("E_IO", format!("{}: {e}", path.display())))
}

fn load(input: &Input) -> Result<(Model, Formula), Failure> {
    let model = dynobs::parse_model(&read(&input.model)?).map_err(|e| Failure::new(e.code(), e))?;
    let text = match input.formula.strip_prefix('@') {
        Some(path) => read(Path::new(path))?,
        None => input.formula.clone(),
    };
    let formula = parse_formula(text.trim(), &model).map_err(|e| Failure::new(e.code(), e))?;
    Ok((model, formula))
}

fn options(budget: Option<usize>, force_ktree: bool) -> CheckOptions {
    CheckOptions { force_ktree, budget: budget.unwrap_or_else(budget_from_env) }
}

fn verdict_word(holds: bool) -> &'static str {
    if holds {
        "HOLDS"
    } else {
        "FAILS"
    }
}

fn exit_for(holds: bool) -> u8 {
    if holds {
        EXIT_HOLDS
    } else {
        EXIT_FAILS
    }
}

fn oracle_verdict(m: &Model, f: &Formula, bound: usize) -> Verdict3 {
    let h = History(vec![m.initial_state()]);
    natural_eval_bounded(m, &h, &RecordTuple::empty(m.num_agents()), f, bound)
}

fn cmd_validate(path: &Path) -> Outcome {
    let def = parse_model_def(&read(path)?).map_err(|e| Failure::new(e.code(), e))?;
    let violations = validate(&def);
    if violations.is_empty() {
        println!("valid: {} states, {} observations, {} agents", def.states.len(), def.observations.len(), def.agents.len());
        return Ok(EXIT_HOLDS);
    }
    for v in &violations {
        println!("{}: {}", v.code, v.message);
    }
    Err(Failure::new(violations[0].code, format!("{} violation(s)", violations.len())))
}

struct CheckArgs {
    engine: Engine,
    stats: bool,
    dump: Option<PathBuf>,
    report: Option<PathBuf>,
    opts: CheckOptions,
}

fn print_stats(report: &Report) {
    let levels: Vec<String> = report.levels.iter().map(|(k, n)| format!("{k}:{n}")).collect();
    println!("engine: {}", report.engine);
    println!("knowledge depth: {}", report.knowledge_depth);
    println!("nodes: {} (levels {})", report.nodes, levels.join(" "));
    println!("components: {}", report.components);
    println!("transitions: {}", report.t_edges);
    println!("passes: {}", report.passes);
    println!("time: {:.3} ms", report.timing.total_ms);
}

fn cmd_check(input: &Input, args: CheckArgs) -> Outcome {
    let (m, f) = load(input)?;
    let (target, run, engine): (Model, CheckRun, &'static str) = match args.engine {
        Engine::Direct => {
            let run = check_with(&m, &f, &args.opts).map_err(|e| Failure::new(e.code(), e))?;
            let engine = run.augmented.engine_name();
            (m, run, engine)
        }
        Engine::Reduction => {
            let (ri, run) = check_via_reduction_run(&m, &f).map_err(|e| Failure::new(e.code(), e))?;
            (ri.model, run, "reduction")
        }
    };
    let mut report = run.report(&target, args.report.is_some());
    report.engine = engine;
    if let Some(path) = &args.dump {
        let dot = run.augmented.to_dot(&target, &|v| run.labels_of(&target, v));
        write(path, &dot)?;
    }
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::new("E_IO", e))?;
        write(path, &(json + "\n"))?;
    }
    if args.stats {
        print_stats(&report);
    }
    println!("{}", verdict_word(run.verdict));
    Ok(exit_for(run.verdict))
}

fn cmd_oracle(input: &Input, bound: usize) -> Outcome {
    let (m, f) = load(input)?;
    let v = oracle_verdict(&m, &f, bound);
    println!("{v}");
    Ok(match v {
        Verdict3::Holds => EXIT_HOLDS,
        Verdict3::Fails => EXIT_FAILS,
        Verdict3::Unknown => EXIT_UNKNOWN,
    })
}

fn cmd_compare(input: &Input, bound: usize, opts: CheckOptions) -> Outcome {
    let (m, f) = load(input)?;
    let direct = check_with(&m, &f, &opts).map_err(|e| Failure::new(e.code(), e))?.verdict;
    let reduced = check_via_reduction_run(&m, &f).map_err(|e| Failure::new(e.code(), e))?.1.verdict;
    let oracle = oracle_verdict(&m, &f, bound);
    let rows = [
        ("direct".to_string(), verdict_word(direct).to_string()),
        ("reduction".to_string(), verdict_word(reduced).to_string()),
        (format!("oracle@{bound}"), oracle.to_string()),
    ];
    for (name, v) in &rows {
        println!("{name:<12} {v}");
    }
    let agree = direct == reduced && oracle.definite().is_none_or(|o| o == direct);
    if agree {
        println!("{} all-agree", verdict_word(direct));
        Ok(EXIT_HOLDS)
    } else {
        println!("{} disagree", verdict_word(direct));
        Ok(EXIT_FAILS)
    }
}

fn cmd_reduce(input: &Input, out_model: &Path, out_formula: &Path) -> Outcome {
    let (m, f) = load(input)?;
    let (ri, g) = reduce(&m, &f).map_err(|e| Failure::new(e.code(), e))?;
    write(out_model, &ri.model.to_text())?;
    write(out_formula, &format!("{}\n", g.display(&ri.model)))?;
    println!(
        "reduced: {} states, {} transitions, {} copies",
        ri.model.num_states(),
        ri.model.num_transitions(),
        ri.copies.len()
    );
    Ok(EXIT_HOLDS)
}

fn cmd_examples(name: &str) -> Outcome {
    let files = fixtures::bundle(name).ok_or_else(|| Failure::new("E_USAGE", format!("unknown example `{name}`")))?;
    for (file, contents) in files {
        write(Path::new(file), contents)?;
        println!("wrote {file}");
    }
    Ok(EXIT_HOLDS)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { model } => cmd_validate(&model),
        Command::Check { input, engine, stats, dump_augmented, report, budget, ktree } => cmd_check(
            &input,
            CheckArgs { engine, stats, dump: dump_augmented, report, opts: options(budget, ktree) },
        ),
        Command::Oracle { input, bound } => cmd_oracle(&input, bound),
        Command::Compare { input, bound, budget } => cmd_compare(&input, bound, options(budget, false)),
        Command::Reduce { input, out_model, out_formula } => cmd_reduce(&input, &out_model, &out_formula),
        Command::Examples { name } => cmd_examples(&name),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            eprintln!("E_USAGE: invalid arguments");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}: {}", f.code, f.message);
            ExitCode::from(EXIT_ERROR)
        }
    }
}
