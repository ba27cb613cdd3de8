//! `qrec` subcommands: serve, mine, recommend and repl.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use qrec_core::embedding::SemanticSpace;
use qrec_core::exec::{execute, recommend_chart, ResultTable};
use qrec_core::recommender::{
    mine_frequent_attribute_sets, occurrences, AttributeSet, RecommendationSet, Recommender,
    RelevanceVector,
};
use qrec_core::reference::ReferenceRepository;
use qrec_core::schema::{load_sqlite_schema, SchemaCatalog};
use qrec_core::sql::{ActionKind, BoundQuery};
use qrec_core::{parse_sql, render_nl, synthesize_sql, QueryIR};
use qrec_server::{DatabaseConfig, ServiceConfig, SessionService};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "qrec", version, about = "Next-step SQL query recommendation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start the HTTP session service.
    Serve(ServeArgs),
    /// Mine frequent attribute sets of every reference domain.
    Mine(MineArgs),
    /// Print first-step recommendations for a database.
    Recommend(RecommendArgs),
    /// Explore a database interactively.
    Repl(RecommendArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Reference query log (Spider format) or repository snapshot.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Spider tables.json for the log; defaults to the one next to it.
    #[arg(long)]
    pub schemas: Option<PathBuf>,
    /// Service configuration file.
    #[arg(long, env = "QREC_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: Common,
    /// SQLite database to register; may be repeated.
    #[arg(long)]
    pub db: Vec<PathBuf>,
    /// Event log path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Port to bind; 0 picks a free one.
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[command(flatten)]
    pub common: Common,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub common: Common,
    /// SQLite database to explore.
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub top_k: Option<usize>,
}

/// A failure that maps to an exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    let result = match cli.command {
        Command::Serve(a) => serve(a, out),
        Command::Mine(a) => mine(a, out),
        Command::Recommend(a) => recommend(a, out),
        Command::Repl(a) => repl(a, input, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let mut cmd = Cli::command();
            let _ = write!(
                err,
                "{}",
                cmd.error(ErrorKind::MissingRequiredArgument, m).render()
            );
            2
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
    }
}

fn settings(common: &Common) -> Result<ServiceConfig, Failure> {
    let mut config = match &common.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    if let Some(log) = &common.log {
        config.reference_log = Some(log.clone());
        config.reference_schemas = common.schemas.clone();
    } else if common.schemas.is_some() {
        config.reference_schemas = common.schemas.clone();
    }
    Ok(config)
}

fn load_references(config: &ServiceConfig) -> Result<ReferenceRepository, Failure> {
    let log = config.reference_log.as_ref().ok_or_else(|| {
        Failure::Usage("--log is required unless the config sets reference_log".into())
    })?;
    Ok(ReferenceRepository::load_any(
        log,
        config.reference_schemas.as_deref(),
    )?)
}

fn space(config: &ServiceConfig) -> Result<SemanticSpace, Failure> {
    Ok(SemanticSpace::new(config.embedder.build()?))
}

struct Explorer {
    config: ServiceConfig,
    catalog: SchemaCatalog,
    repository: ReferenceRepository,
    space: SemanticSpace,
}

impl Explorer {
    fn open(args: &RecommendArgs) -> Result<Explorer, Failure> {
        let mut config = settings(&args.common)?;
        if let Some(k) = args.top_k {
            config.recommender.top_k = k;
        }
        config.recommender.validate()?;
        let repository = load_references(&config)?;
        Ok(Explorer {
            catalog: load_sqlite_schema(&args.db)?,
            space: space(&config)?,
            repository,
            config,
        })
    }

    fn recommend(&self, history_recent_first: &[QueryIR]) -> Result<RecommendationSet, Failure> {
        let r = Recommender::new(
            &self.space,
            &self.catalog,
            &self.repository,
            self.config.recommender.clone(),
        )?;
        Ok(r.recommend_next(history_recent_first)?)
    }
}

fn print_set(out: &mut dyn Write, set: &RecommendationSet) -> std::io::Result<()> {
    if set.fallback {
        writeln!(
            out,
            "(no column matched the references; ranked by similarity)"
        )?;
    }
    if set.exhausted {
        writeln!(
            out,
            "(every column has been explored; ranked by reference frequency)"
        )?;
    }
    for (i, r) in set.items.iter().enumerate() {
        let b = &r.action_breakdown;
        writeln!(out, "[{i}] {}", r.nl_text)?;
        writeln!(
            out,
            "    score {:.6} (selection {:.6}, grouping {:.6}, aggregation {:.6})",
            r.score,
            b.get(&ActionKind::Selection).copied().unwrap_or(0.0),
            b.get(&ActionKind::Grouping).copied().unwrap_or(0.0),
            b.get(&ActionKind::Aggregation).copied().unwrap_or(0.0),
        )?;
        writeln!(out, "    {}", r.sql)?;
        if i + 1 < set.items.len() {
            writeln!(out)?;
        }
    }
    Ok(())
}

fn recommend(args: RecommendArgs, out: &mut dyn Write) -> Outcome {
    let explorer = Explorer::open(&args)?;
    let set = explorer.recommend(&[])?;
    print_set(out, &set)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DomainReport {
    domain_label: String,
    db_id: String,
    columns: Vec<String>,
    /// One per reference SELECT occurrence: the columns relevant to it.
    transactions: Vec<Vec<String>>,
    itemsets: Vec<ItemsetReport>,
}

#[derive(Debug, Serialize)]
struct ItemsetReport {
    columns: Vec<String>,
    support: usize,
    relative_support: f64,
}

#[derive(Debug, Serialize)]
struct MineReport {
    min_support: f64,
    binarization_threshold: f64,
    domains: Vec<DomainReport>,
}

fn mine(args: MineArgs, out: &mut dyn Write) -> Outcome {
    let config = settings(&args.common)?;
    config.recommender.validate()?;
    let repository = load_references(&config)?;
    let space = space(&config)?;
    let threshold = config.recommender.binarization_threshold;
    let mut domains = Vec::new();
    for g in repository.groups() {
        let refs: Vec<BoundQuery<'_>> = g
            .queries
            .iter()
            .map(|q| BoundQuery::new(q, &g.schema))
            .collect();
        let occ = occurrences(&refs, ActionKind::Selection);
        let columns: Vec<_> = g
            .schema
            .columns()
            .filter(|c| !g.schema.is_key_column(c))
            .collect();
        let vectors = columns
            .iter()
            .map(|c| {
                qrec_core::recommender::column_relevance_vector(
                    &space,
                    c,
                    &g.schema,
                    &refs,
                    ActionKind::Selection,
                    threshold,
                )
            })
            .collect::<Result<Vec<RelevanceVector>, _>>()?;
        let itemsets = mine_frequent_attribute_sets(&vectors, config.recommender.min_support)?;
        let transactions = (0..occ.len())
            .map(|pos| {
                vectors
                    .iter()
                    .filter(|v| v.bits[pos] == 1)
                    .map(|v| v.column.to_string())
                    .collect()
            })
            .collect();
        domains.push(DomainReport {
            domain_label: g.domain_label.clone(),
            db_id: g.db_id.clone(),
            columns: columns.iter().map(ToString::to_string).collect(),
            transactions,
            itemsets: itemsets
                .into_iter()
                .map(|AttributeSet { columns, support }| ItemsetReport {
                    columns: columns.iter().map(ToString::to_string).collect(),
                    support,
                    relative_support: if occ.is_empty() {
                        0.0
                    } else {
                        support as f64 / occ.len() as f64
                    },
                })
                .collect(),
        });
    }
    let report = MineReport {
        min_support: config.recommender.min_support,
        binarization_threshold: threshold,
        domains,
    };
    let json = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(p) => std::fs::write(p, json + "\n")
            .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?,
        None => writeln!(out, "{json}")?,
    }
    Ok(())
}

fn print_table(out: &mut dyn Write, table: &ResultTable, limit: usize) -> std::io::Result<()> {
    let header: Vec<String> = table
        .columns
        .iter()
        .map(|c| format!("{} ({:?})", c.name, c.field_type))
        .collect();
    writeln!(out, "    {}", header.join(" | "))?;
    for row in table.rows.iter().take(limit) {
        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
        writeln!(out, "    {}", cells.join(" | "))?;
    }
    if table.rows.len() > limit {
        writeln!(out, "    ... {} more rows", table.rows.len() - limit)?;
    }
    Ok(())
}

const REPL_HELP: &str = "commands: :pick <n>, :history, :help, :quit; anything else is run as SQL";

fn repl(args: RecommendArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Outcome {
    let explorer = Explorer::open(&args)?;
    let conn = rusqlite::Connection::open_with_flags(
        &args.db,
        rusqlite::OpenFlags::SQLITE_OPEN_READ_ONLY,
    )?;
    let mut history: Vec<QueryIR> = Vec::new();
    let mut served = explorer.recommend(&[])?;
    writeln!(out, "{REPL_HELP}")?;
    print_set(out, &served)?;
    loop {
        write!(out, "qrec> ")?;
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            break;
        }
        let line = line.trim();
        let query = match line {
            "" => continue,
            ":quit" | ":q" => break,
            ":help" => {
                writeln!(out, "{REPL_HELP}")?;
                continue;
            }
            ":history" => {
                for (i, q) in history.iter().enumerate() {
                    writeln!(out, "#{i} {}", render_nl(q, &explorer.catalog))?;
                    writeln!(out, "    {}", synthesize_sql(q))?;
                }
                continue;
            }
            _ if line.starts_with(":pick") => {
                let pick = line[":pick".len()..].trim().parse::<usize>().ok();
                match pick.and_then(|n| served.items.get(n)) {
                    Some(r) => r.query.clone(),
                    None => {
                        writeln!(out, "no recommendation {}", line[":pick".len()..].trim())?;
                        continue;
                    }
                }
            }
            _ if line.starts_with(':') => {
                writeln!(out, "unknown command `{line}`; {REPL_HELP}")?;
                continue;
            }
            sql => match parse_sql(sql, &explorer.catalog) {
                Ok(q) => q,
                Err(e) => {
                    let at = e.position().map(|p| format!(" at {p}")).unwrap_or_default();
                    writeln!(out, "parse error{at}: {e}")?;
                    continue;
                }
            },
        };
        let table = match execute(&query, &conn) {
            Ok(t) => t,
            Err(e) => {
                writeln!(out, "execution error: {e}")?;
                continue;
            }
        };
        let chart = recommend_chart(&table);
        writeln!(
            out,
            "#{} {}",
            history.len(),
            render_nl(&query, &explorer.catalog)
        )?;
        writeln!(out, "    {}", synthesize_sql(&query))?;
        writeln!(
            out,
            "    chart: {}",
            serde_json::to_string(&chart.mark)?.trim_matches('"')
        )?;
        print_table(out, &table, 20)?;
        history.push(query);
        let recent_first: Vec<QueryIR> = history.iter().rev().cloned().collect();
        served = explorer.recommend(&recent_first)?;
        print_set(out, &served)?;
    }
    Ok(())
}

fn database_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "db".into())
}

fn serve(args: ServeArgs, out: &mut dyn Write) -> Outcome {
    let mut config = settings(&args.common)?;
    let mut seen: BTreeSet<String> = config.databases.iter().map(|d| d.id.clone()).collect();
    for path in &args.db {
        let id = database_id(path);
        if !seen.insert(id.clone()) {
            return Err(Failure::Usage(format!(
                "database id `{id}` is registered twice"
            )));
        }
        config.databases.push(DatabaseConfig {
            id,
            path: path.clone(),
            domain_label: None,
        });
    }
    if config.databases.is_empty() {
        return Err(Failure::Usage(
            "no database: pass --db or list databases in the config".into(),
        ));
    }
    if let Some(p) = &args.out {
        config.storage = p.clone();
    }
    if let Some(port) = args.port {
        config.port = port;
    }
    let service = Arc::new(SessionService::from_config(&config)?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", config.port)).await?;
        writeln!(out, "listening on http://{}", listener.local_addr()?)?;
        out.flush()?;
        qrec_server::http::serve(listener, service).await
    })?;
    Ok(())
}
