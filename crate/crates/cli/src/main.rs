use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use parafact::corpus::{parse_stopwords, read_corpus_dir, Analyzer, Gazetteer, Lexicon};
use parafact::evaluation::{classify_misses, evaluate, misses_to_tsv, parse_gold, MissContext};
use parafact::extraction::{dedupe_per_document, extract, parse_records, records_to_tsv};
use parafact::metagraph::{compile, parse_metagraphs, CompiledGraph};
use parafact::table::{PatternTable, RowStatus};
use parafact::{Acquirer, SeedPattern, SemanticNet};
use parafact_workbench::{Resources, Store};

/// Weakly supervised acquisition of paraphrastic extraction patterns.
#[derive(Parser)]
#[command(name = "parafact", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Semantic network utilities
    Net {
        #[command(subcommand)]
        command: NetCommand,
    },
    /// Propose candidate patterns from one or more seeds
    Acquire(AcquireArgs),
    /// Apply accept/reject verdicts to a pattern table
    Decide(DecideArgs),
    /// Compile meta-graphs over the accepted rows of a table
    Compile(CompileArgs),
    /// Run a compiled graph over a corpus
    Extract(ExtractArgs),
    /// Score extraction records against gold annotations
    Eval(EvalArgs),
    /// Start the validation workbench HTTP service
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum NetCommand {
    /// Parse a net file and check it for cycles and dangling references
    Validate { file: PathBuf },
}

#[derive(Args)]
struct Analysis {
    /// Lexicon TSV (surface, lemma, POS, optional `pred`)
    #[arg(long)]
    lexicon: PathBuf,
    /// Stop-word list
    #[arg(long)]
    stopwords: PathBuf,
    /// Entity gazetteer TSV (name, class)
    #[arg(long)]
    gazetteer: PathBuf,
}

#[derive(Args)]
struct AcquireArgs {
    #[arg(long)]
    net: PathBuf,
    /// Directory of plain-text documents
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    analysis: Analysis,
    /// Seed pattern `head/expansion/etq/objet`; repeatable
    #[arg(long = "seed", required = true)]
    seeds: Vec<String>,
    #[arg(long, allow_negative_numbers = true)]
    threshold: f64,
    /// Output table; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecideArgs {
    #[arg(long)]
    table: PathBuf,
    /// Row ids to accept
    #[arg(long, num_args = 1..)]
    accept: Vec<String>,
    /// Row ids to reject
    #[arg(long, num_args = 1..)]
    reject: Vec<String>,
    /// Write only the accepted rows
    #[arg(long)]
    accepted_only: bool,
    /// Output table; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    metagraphs: PathBuf,
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Print `states=<n> transitions=<m>`
    #[arg(long)]
    stats: bool,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    analysis: Analysis,
    /// Output records; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Explain every missed gold filler (needs the inputs below)
    #[arg(long, requires_all = ["graph", "corpus", "net", "lexicon", "stopwords", "gazetteer"])]
    classify_misses: bool,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    threshold: f64,
    /// Miss report destination; appended to stdout when absent
    #[arg(long)]
    misses: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    analysis: Analysis,
    /// Overrides PARAFACT_DATA_DIR
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Overrides PARAFACT_LISTEN
    #[arg(long)]
    listen: Option<String>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_net(path: &Path) -> Result<SemanticNet> {
    SemanticNet::parse(&read(path)?).with_context(|| path.display().to_string())
}

fn load_lexicon(path: &Path) -> Result<Lexicon> {
    Lexicon::parse(&read(path)?).with_context(|| path.display().to_string())
}

fn load_table(path: &Path) -> Result<PatternTable> {
    PatternTable::parse(&read(path)?).with_context(|| path.display().to_string())
}

fn load_graph(path: &Path) -> Result<CompiledGraph> {
    CompiledGraph::deserialize(&read(path)?).with_context(|| path.display().to_string())
}

fn analyzer(lexicon: &Path, stopwords: &Path, gazetteer: &Path) -> Result<Analyzer> {
    let gaz = Gazetteer::parse(&read(gazetteer)?).with_context(|| gazetteer.display().to_string())?;
    Ok(Analyzer::new(load_lexicon(lexicon)?, gaz, parse_stopwords(&read(stopwords)?)))
}

impl Analysis {
    fn load(&self) -> Result<Analyzer> {
        analyzer(&self.lexicon, &self.stopwords, &self.gazetteer)
    }
}

fn corpus(dir: &Path) -> Result<Vec<(String, String)>> {
    Ok(read_corpus_dir(dir)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Net { command: NetCommand::Validate { file } } => {
            let net = load_net(&file)?;
            println!(
                "ok: {} nodes, {} relations, {} words",
                net.nodes().len(),
                net.relations().len(),
                net.words().count()
            );
        }
        Command::Acquire(a) => {
            let net = load_net(&a.net)?;
            let analyzer = a.analysis.load()?;
            let seeds = a.seeds.iter().map(|s| s.parse::<SeedPattern>()).collect::<Result<Vec<_>, _>>()?;
            let sentences = analyzer.analyze_corpus(&corpus(&a.corpus)?);
            let table = Acquirer::new(&net, &analyzer.lexicon, a.threshold)?.acquire_seeds(&seeds, &sentences);
            write_or_print(a.out.as_deref(), &table.to_tsv())?;
            if a.out.is_some() {
                for r in table.rows() {
                    println!("{}\t{}\t{}\t{}\t{}\t{:.6}", r.id(), r.elt1, r.cat1, r.elt2, r.cat2, r.score);
                }
            }
        }
        Command::Decide(d) => {
            let mut table = load_table(&d.table)?;
            let accept: BTreeSet<&String> = d.accept.iter().collect();
            if let Some(both) = d.reject.iter().find(|id| accept.contains(id)) {
                bail!("row {both} is both accepted and rejected");
            }
            for (ids, status) in [(&d.accept, RowStatus::Accepted), (&d.reject, RowStatus::Rejected)] {
                for id in ids {
                    table.get_mut(id).ok_or_else(|| anyhow!("unknown row id {id}"))?.status = status;
                }
            }
            if d.accepted_only {
                table = PatternTable::from_rows(table.accepted().cloned().collect())?;
            }
            write_or_print(d.out.as_deref(), &table.to_tsv())?;
        }
        Command::Compile(c) => {
            let metas = parse_metagraphs(&read(&c.metagraphs)?).with_context(|| c.metagraphs.display().to_string())?;
            let graph = compile(&metas, &load_table(&c.table)?, &load_lexicon(&c.lexicon)?)?;
            std::fs::write(&c.out, graph.serialize()).with_context(|| format!("writing {}", c.out.display()))?;
            if c.stats {
                let (states, transitions) = graph.stats();
                println!("states={states} transitions={transitions}");
            }
        }
        Command::Extract(e) => {
            let graph = load_graph(&e.graph)?;
            let sentences = e.analysis.load()?.analyze_corpus(&corpus(&e.corpus)?);
            write_or_print(e.out.as_deref(), &records_to_tsv(&extract(&graph, &sentences)))?;
        }
        Command::Eval(e) => {
            let records = parse_records(&read(&e.records)?).with_context(|| e.records.display().to_string())?;
            let gold = parse_gold(&read(&e.gold)?).with_context(|| e.gold.display().to_string())?;
            let report = evaluate(&dedupe_per_document(&records), &gold);
            print!("{}", report.to_tsv());
            if e.classify_misses {
                let need = |p: &Option<PathBuf>| p.clone().expect("clap enforces requires_all");
                let graph = load_graph(&need(&e.graph))?;
                let net = load_net(&need(&e.net))?;
                let analyzer = analyzer(&need(&e.lexicon), &need(&e.stopwords), &need(&e.gazetteer))?;
                let sentences = analyzer.analyze_corpus(&corpus(&need(&e.corpus))?);
                let table = PatternTable::from_rows(graph.rows().values().cloned().collect())?;
                let ctx = MissContext {
                    sentences: &sentences,
                    table: &table,
                    net: &net,
                    threshold: e.threshold,
                    graph: &graph,
                };
                let misses = misses_to_tsv(&classify_misses(&report.missed, &ctx));
                match &e.misses {
                    Some(p) => std::fs::write(p, misses).with_context(|| format!("writing {}", p.display()))?,
                    None => print!("{misses}"),
                }
            }
        }
        Command::Serve(s) => {
            let (env_dir, env_addr) = parafact_workbench::env_config().map_err(|e| anyhow!(e))?;
            let dir = s.data_dir.unwrap_or(env_dir);
            let addr = match s.listen {
                Some(l) => l.parse().with_context(|| format!("--listen `{l}`"))?,
                None => env_addr,
            };
            let resources = Resources::new(load_net(&s.net)?, s.analysis.load()?, &corpus(&s.corpus)?);
            let store = Arc::new(Store::open(dir, Some(resources))?);
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            rt.block_on(parafact_workbench::serve(store, addr)).with_context(|| format!("serving on {addr}"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(3),
    }
}
