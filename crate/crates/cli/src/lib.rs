//! The `larf` command line.
//!
//! Exit codes: 0 success; 2 usage or configuration error; 3 output written
//! but at least one chunk fell back to the unannotated text; 4 the model
//! endpoint was unreachable or rejected the credentials; 5 anything else.
//! Nothing is written to stdout unless the command succeeds.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use larf_core::annotator::{AnnotateError, AnnotationResult, Annotator};
use larf_core::bionic::{bionic_format, BionicParams, DEFAULT_FIXATION, DEFAULT_SACCADE};
use larf_core::llm::{LlmConfig, LlmError};
use larf_core::markup::verify_text;
use larf_core::model::{AnnotatedDocument, AnnotationKind};
use larf_core::offline::offline_annotate;
use larf_core::prompt::{Category, PromptSpec};
use larf_core::render::{render_html, render_terminal, HighlightColor, RenderStyle, Theme};
use larf_core::scorer::{ScoreError, Scorer};
use larf_service::ServiceConfig;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "larf", version, about = "Annotate text for easier reading without changing a word of it")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mark key information with a model (or offline rules) and verify the
    /// text came back unchanged.
    Annotate(AnnotateArgs),
    /// Bold the first letters of words.
    Bionic(BionicArgs),
    /// Render a JSON document as HTML or terminal text.
    Render(RenderArgs),
    /// Rate free-recall answers against an article, 0 to 10.
    Score(ScoreArgs),
    /// Run the HTTP service until interrupted.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Default,
    Custom,
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Html,
    Json,
    Ansi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderFormat {
    Html,
    Ansi,
}

#[derive(Debug, Args)]
pub struct StyleArgs {
    #[arg(long, default_value_t = 1.0)]
    pub font_scale: f64,
    /// Extra space between letters, in em.
    #[arg(long, default_value_t = 0.0)]
    pub letter_spacing: f64,
    #[arg(long, default_value_t = 1.5)]
    pub line_spacing: f64,
    #[arg(long, value_enum, default_value = "yellow")]
    pub highlight: HighlightArg,
    #[arg(long, value_enum, default_value = "light")]
    pub theme: ThemeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HighlightArg {
    Yellow,
    Green,
    Blue,
    Pink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThemeArg {
    Light,
    Dark,
}

impl StyleArgs {
    fn style(&self) -> Result<RenderStyle, CliError> {
        let style = RenderStyle {
            font_scale: self.font_scale,
            letter_spacing: self.letter_spacing,
            line_spacing: self.line_spacing,
            highlight: match self.highlight {
                HighlightArg::Yellow => HighlightColor::Yellow,
                HighlightArg::Green => HighlightColor::Green,
                HighlightArg::Blue => HighlightColor::Blue,
                HighlightArg::Pink => HighlightColor::Pink,
            },
            theme: match self.theme {
                ThemeArg::Light => Theme::Light,
                ThemeArg::Dark => Theme::Dark,
            },
        };
        style.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(style)
    }
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Input file; stdin when omitted.
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "default")]
    pub mode: Mode,
    /// A custom category as "description=tag", tag one of strong, mark, u.
    /// Repeatable; custom mode only.
    #[arg(long = "category", value_name = "DESC=TAG")]
    pub categories: Vec<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_output_tokens: Option<u32>,
    #[arg(long, value_enum, default_value = "html")]
    pub format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the full job detail (report, raw replies, exchanges) as JSON.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub style: StyleArgs,
}

#[derive(Debug, Args)]
pub struct BionicArgs {
    pub input: Option<PathBuf>,
    /// Bold prefix strength, 1 to 5.
    #[arg(long, default_value_t = i64::from(DEFAULT_FIXATION))]
    pub fixation: i64,
    /// Word spacing of bolded words: 10 is every word, 20 every other, up to 50.
    #[arg(long, default_value_t = i64::from(DEFAULT_SACCADE))]
    pub saccade: i64,
    #[arg(long, value_enum, default_value = "html")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub style: StyleArgs,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// A JSON document, or any JSON object with a "document" field.
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "html")]
    pub format: RenderFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub style: StyleArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub article: PathBuf,
    /// One answer per line, or JSON Lines of strings or {"answer": ...}.
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Overrides LARF_LISTEN_ADDR.
    #[arg(long)]
    pub listen: Option<String>,
    /// Overrides LARF_JOB_LOG.
    #[arg(long)]
    pub job_log: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Endpoint(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Endpoint(_) => 4,
            Self::Other(_) => 5,
        }
    }
}

impl From<AnnotateError> for CliError {
    fn from(e: AnnotateError) -> Self {
        match e {
            AnnotateError::EmptyInput | AnnotateError::Config(_) => Self::Usage(e.to_string()),
            AnnotateError::Transport(_) | AnnotateError::Auth(_) => Self::Endpoint(e.to_string()),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        AnnotateError::from(e).into()
    }
}

/// What a successful run produced.
#[derive(Debug, Default, PartialEq)]
pub struct Output {
    /// For stdout, unless `--out` sent it to a file.
    pub stdout: String,
    /// For stderr.
    pub warnings: Vec<String>,
    /// 0, or 3 when a fallback was used.
    pub exit_code: u8,
}

/// Parses "description=tag"; the last '=' separates, so descriptions may
/// contain '='.
pub fn parse_category(raw: &str) -> Result<Category, CliError> {
    let (desc, tag) = raw
        .rsplit_once('=')
        .ok_or_else(|| CliError::Usage(format!("--category {raw:?}: expected \"description=tag\"")))?;
    let kind: AnnotationKind = tag
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--category {raw:?}: tag must be strong, mark or u")))?;
    Ok(Category::new(desc.trim(), kind))
}

fn read_input(path: Option<&Path>, stdin: &mut dyn Read) -> Result<String, CliError> {
    match path {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display()))),
        None => {
            let mut s = String::new();
            stdin
                .read_to_string(&mut s)
                .map_err(|e| CliError::Usage(format!("cannot read stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))
}

fn format_document(doc: &AnnotatedDocument, format: Format, style: &RenderStyle) -> String {
    match format {
        Format::Html => render_html(doc, style).expect("style validated before use"),
        Format::Json => {
            let mut json = serde_json::to_string_pretty(doc).expect("documents serialize");
            json.push('\n');
            json
        }
        Format::Ansi => render_terminal(doc),
    }
}

/// Sends `rendered` to `out` or returns it for stdout.
fn deliver(rendered: String, out: Option<&Path>) -> Result<String, CliError> {
    match out {
        Some(path) => write_file(path, &rendered).map(|()| String::new()),
        None => Ok(rendered),
    }
}

fn prompt_spec(args: &AnnotateArgs) -> Result<PromptSpec, CliError> {
    let usage = |e: larf_core::prompt::PromptError| CliError::Usage(e.to_string());
    let mut spec = match args.mode {
        Mode::Custom => {
            let categories = args
                .categories
                .iter()
                .map(|c| parse_category(c))
                .collect::<Result<Vec<_>, _>>()?;
            PromptSpec::custom(categories).map_err(|_| CliError::Usage("custom mode needs at least one --category".into()))?
        }
        _ if !args.categories.is_empty() => {
            return Err(CliError::Usage("--category only applies to --mode custom".into()));
        }
        _ => PromptSpec::default(),
    };
    if let Some(t) = args.temperature {
        spec = spec.with_temperature(t).map_err(usage)?;
    }
    if let Some(n) = args.max_output_tokens {
        spec = spec.with_max_output_tokens(n).map_err(usage)?;
    }
    Ok(spec)
}

async fn annotate(args: AnnotateArgs, stdin: &mut dyn Read, env: &dyn Fn(&str) -> Option<String>) -> Result<Output, CliError> {
    let style = args.style.style()?;
    let spec = prompt_spec(&args)?;
    let text = read_input(args.input.as_deref(), stdin)?;
    let result = if args.mode == Mode::Offline {
        if larf_core::model::normalize(&text).is_empty() {
            return Err(AnnotateError::EmptyInput.into());
        }
        let document = offline_annotate(&text);
        AnnotationResult {
            report: verify_text(&text, document.text()),
            document,
            attempts: 0,
            fallback_used: false,
            raw_replies: Vec::new(),
            exchanges: Vec::new(),
        }
    } else {
        let config = LlmConfig::from_lookup(env)?;
        Annotator::from_config(&config)?.annotate(&text, &spec).await?
    };

    if let Some(log) = &args.log {
        write_file(log, &serde_json::to_string_pretty(&result).expect("results serialize"))?;
    }
    let mut output = Output {
        stdout: deliver(format_document(&result.document, args.format, &style), args.out.as_deref())?,
        ..Output::default()
    };
    if result.fallback_used {
        let detail = result
            .report
            .first_diff()
            .map(|d| format!(" (first change at word {}: {:?} -> {:?})", d.position, d.original, d.produced))
            .unwrap_or_default();
        output.warnings.push(format!(
            "warning: the model kept changing the text{detail}; affected parts are shown unannotated"
        ));
        output.exit_code = 3;
    }
    Ok(output)
}

fn bionic(args: BionicArgs, stdin: &mut dyn Read) -> Result<Output, CliError> {
    let params = BionicParams::new(args.fixation, args.saccade).map_err(|e| CliError::Usage(e.to_string()))?;
    let style = args.style.style()?;
    let text = read_input(args.input.as_deref(), stdin)?;
    let doc = bionic_format(&text, &params);
    Ok(Output {
        stdout: deliver(format_document(&doc, args.format, &style), args.out.as_deref())?,
        ..Output::default()
    })
}

/// Reads a JSON document, or any JSON object with a `document` field such
/// as a service response or an annotate log. Empty input is an empty
/// document.
pub fn parse_document(json: &str) -> Result<AnnotatedDocument, CliError> {
    if json.trim().is_empty() {
        return Ok(AnnotatedDocument::default());
    }
    let mut value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| CliError::Usage(format!("input is not JSON: {e}")))?;
    if let Some(inner) = value.get_mut("document") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("input is not a valid document: {e}")))
}

fn render(args: RenderArgs, stdin: &mut dyn Read) -> Result<Output, CliError> {
    let style = args.style.style()?;
    let doc = parse_document(&read_input(args.input.as_deref(), stdin)?)?;
    let format = match args.format {
        RenderFormat::Html => Format::Html,
        RenderFormat::Ansi => Format::Ansi,
    };
    Ok(Output {
        stdout: deliver(format_document(&doc, format, &style), args.out.as_deref())?,
        ..Output::default()
    })
}

/// Plain lines, or JSON Lines when every nonblank line is a JSON string or
/// an object with an "answer" string.
pub fn parse_answers(contents: &str) -> Vec<String> {
    let lines: Vec<&str> = contents.lines().filter(|l| !l.trim().is_empty()).collect();
    let as_json: Option<Vec<String>> = lines
        .iter()
        .map(|l| match serde_json::from_str::<serde_json::Value>(l).ok()? {
            serde_json::Value::String(s) => Some(s),
            serde_json::Value::Object(o) => o.get("answer")?.as_str().map(str::to_string),
            _ => None,
        })
        .collect();
    as_json.unwrap_or_else(|| lines.iter().map(|l| l.trim().to_string()).collect())
}

async fn score(args: ScoreArgs, env: &dyn Fn(&str) -> Option<String>) -> Result<Output, CliError> {
    let article = read_input(Some(&args.article), &mut std::io::empty())?;
    let answers = parse_answers(&read_input(Some(&args.answers), &mut std::io::empty())?);
    if answers.is_empty() {
        return Err(CliError::Usage(format!("{} has no answers", args.answers.display())));
    }
    let config = LlmConfig::from_lookup(env)?;
    let scorer = Scorer::from_config(&config).map_err(score_error)?;
    let mut jsonl = String::new();
    for (n, outcome) in scorer.score_batch(&article, &answers).await.into_iter().enumerate() {
        let result = outcome
            .result
            .map_err(|e| match score_error(e) {
                CliError::Other(m) => CliError::Other(format!("answer {}: {m}", n + 1)),
                other => other,
            })?;
        jsonl.push_str(&serde_json::to_string(&result).expect("scores serialize"));
        jsonl.push('\n');
    }
    Ok(Output {
        stdout: deliver(jsonl, args.out.as_deref())?,
        ..Output::default()
    })
}

fn score_error(e: ScoreError) -> CliError {
    match e {
        ScoreError::Llm(e) => e.into(),
        ScoreError::EmptyInput => CliError::Usage(e.to_string()),
        e => CliError::Other(e.to_string()),
    }
}

async fn serve(args: ServeArgs, env: &dyn Fn(&str) -> Option<String>) -> Result<Output, CliError> {
    let mut config = ServiceConfig::from_lookup(env)?;
    if let Some(listen) = args.listen {
        config.listen_addr = listen
            .parse()
            .map_err(|_| CliError::Usage(format!("--listen {listen:?} is not a socket address")))?;
    }
    if let Some(log) = args.job_log {
        config.job_log = log;
    }
    let (addr, server) = larf_service::bind(&config, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
    .map_err(|e| CliError::Other(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    server.await.map_err(|e| CliError::Other(e.to_string()))?;
    Ok(Output::default())
}

/// Runs one command. `env` supplies the `LARF_*` settings.
pub async fn execute(
    cli: Cli,
    stdin: &mut dyn Read,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<Output, CliError> {
    match cli.command {
        Command::Annotate(args) => annotate(args, stdin, env).await,
        Command::Bionic(args) => bionic(args, stdin),
        Command::Render(args) => render(args, stdin),
        Command::Score(args) => score(args, env).await,
        Command::Serve(args) => serve(args, env).await,
    }
}
