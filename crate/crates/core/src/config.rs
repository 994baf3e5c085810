//! Run configuration and its `config.yaml` reader.
//!
//! The accepted syntax is a small YAML subset:
//!
//! ```yaml
//! # comments run to end of line
//! network:
//!   layer_sizes: [784, 256, 10]     # flow list of scalars
//!   activations:                    # or a block list
//!     - relu
//!     - softmax
//!   learning_rate: 0.05
//! children: 10                      # leaves may also appear at top level
//! lr: 0.1                           # with a few short aliases
//! ```
//!
//! Indentation is spaces only. Every key must be known (see [`KEYS`]); a
//! missing key keeps its default. Errors carry the 1-based line number.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::activation::ActivationKind;
use crate::combine::Combiner;
use crate::error::{Error, Result};
use crate::metrics::ConfidenceKind;
use crate::network::{NetworkConfig, WeightInit};

pub const DEFAULT_CONFIG_NAME: &str = "config.yaml";

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelSettings {
    /// 1 runs a single sequential network.
    pub children: usize,
    pub workers: usize,
    pub combiner: Combiner,
    pub init: ChildInit,
}

/// How a PNN's children are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChildInit {
    /// Clones of one network initialized from the run seed.
    #[default]
    Replicate,
    /// Independent initializations with seeds `seed+1 ..= seed+k`.
    Fresh,
}

impl ChildInit {
    pub fn name(&self) -> &'static str {
        match self {
            ChildInit::Replicate => "replicate",
            ChildInit::Fresh => "fresh",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub eval_every: usize,
    pub output_csv: PathBuf,
    pub checkpoint_dir: Option<PathBuf>,
    pub confidence: ConfidenceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    /// Child counts for the CN-count sweep.
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub children: usize,
    pub workers: Vec<usize>,
    pub repeats: usize,
    pub epochs: usize,
}

/// Everything one CLI invocation needs. Epoch count and seed live in
/// `network` and are written under `run:`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub parallel: ParallelSettings,
    pub data_dir: Option<PathBuf>,
    pub run: RunSettings,
    pub sweep: SweepSettings,
    pub bench: BenchSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            network: NetworkConfig::default(),
            parallel: ParallelSettings {
                children: 1,
                workers: 1,
                combiner: Combiner::Average,
                init: ChildInit::Replicate,
            },
            data_dir: None,
            run: RunSettings {
                eval_every: 1,
                output_csv: PathBuf::from("results.csv"),
                checkpoint_dir: None,
                confidence: ConfidenceKind::MaxProbability,
            },
            sweep: SweepSettings {
                children: vec![2, 5, 10, 20, 30],
            },
            bench: BenchSettings {
                children: 64,
                workers: vec![1, 2, 4, 6, 8, 12, 16, 32, 64],
                repeats: 3,
                epochs: 2,
            },
        }
    }
}

impl RunConfig {
    pub fn is_sequential(&self) -> bool {
        self.parallel.children == 1
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = match self.network.validate() {
            Ok(()) => Vec::new(),
            Err(Error::Validation(v)) => v,
            Err(e) => vec![e.to_string()],
        };
        let p = &self.parallel;
        if p.children == 0 {
            problems.push("children must be at least 1".into());
        }
        if p.workers == 0 {
            problems.push("workers must be at least 1".into());
        }
        if p.children > 1 && p.workers > p.children {
            problems.push(format!(
                "workers ({}) may not exceed children ({})",
                p.workers, p.children
            ));
        }
        if self.run.eval_every == 0 {
            problems.push("eval_every must be at least 1".into());
        }
        if self.sweep.children.is_empty() || self.sweep.children.iter().any(|&k| k < 2) {
            problems.push("sweep children must be a non-empty list of counts >= 2".into());
        }
        let b = &self.bench;
        if b.children < 2 {
            problems.push("bench children must be at least 2".into());
        }
        if b.workers.is_empty() || b.workers.contains(&0) {
            problems.push("bench workers must be a non-empty list of positive counts".into());
        }
        if b.repeats == 0 || b.epochs == 0 {
            problems.push("bench repeats and epochs must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Canonical nested form; [`parse_config`] reads it back to an equal value.
    pub fn to_yaml(&self) -> String {
        let n = &self.network;
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let acts = n
            .activations
            .iter()
            .map(|a| a.name())
            .collect::<Vec<_>>()
            .join(", ");
        let slope = n
            .activations
            .iter()
            .find_map(|a| match a {
                ActivationKind::LeakyRelu { slope } => Some(*slope),
                _ => None,
            })
            .unwrap_or(crate::activation::DEFAULT_LEAKY_SLOPE);
        let mut out = String::new();
        let _ = writeln!(out, "network:");
        let _ = writeln!(out, "  layer_sizes: [{}]", list(&n.layer_sizes));
        let _ = writeln!(out, "  activations: [{acts}]");
        let _ = writeln!(out, "  learning_rate: {:?}", n.learning_rate);
        let _ = writeln!(out, "  batch_size: {}", n.batch_size);
        let _ = writeln!(out, "  leaky_slope: {slope:?}");
        let _ = writeln!(out, "  weight_init: {}", n.weight_init.name());
        let _ = writeln!(out, "parallel:");
        let _ = writeln!(out, "  children: {}", self.parallel.children);
        let _ = writeln!(out, "  workers: {}", self.parallel.workers);
        let _ = writeln!(out, "  combiner: {}", self.parallel.combiner.name());
        let _ = writeln!(out, "  init: {}", self.parallel.init.name());
        if let Some(dir) = &self.data_dir {
            let _ = writeln!(out, "data:");
            let _ = writeln!(out, "  dir: {}", quote(&dir.display().to_string()));
        }
        let _ = writeln!(out, "run:");
        let _ = writeln!(out, "  epochs: {}", n.epochs);
        let _ = writeln!(out, "  seed: {}", n.seed);
        let _ = writeln!(out, "  eval_every: {}", self.run.eval_every);
        let _ = writeln!(
            out,
            "  output_csv: {}",
            quote(&self.run.output_csv.display().to_string())
        );
        if let Some(dir) = &self.run.checkpoint_dir {
            let _ = writeln!(out, "  checkpoint_dir: {}", quote(&dir.display().to_string()));
        }
        let conf = match self.run.confidence {
            ConfidenceKind::MaxProbability => "max_probability",
            ConfidenceKind::TrueClass => "true_class",
        };
        let _ = writeln!(out, "  confidence: {conf}");
        let _ = writeln!(out, "sweep:");
        let _ = writeln!(out, "  children: [{}]", list(&self.sweep.children));
        let _ = writeln!(out, "bench:");
        let _ = writeln!(out, "  children: {}", self.bench.children);
        let _ = writeln!(out, "  workers: [{}]", list(&self.bench.workers));
        let _ = writeln!(out, "  repeats: {}", self.bench.repeats);
        let _ = writeln!(out, "  epochs: {}", self.bench.epochs);
        out
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Known keys: canonical dotted path, then the leaf names accepted at top
/// level or inside the key's own section.
pub const KEYS: &[(&str, &[&str])] = &[
    ("network.layer_sizes", &["layer_sizes", "layers", "sizes"]),
    ("network.activations", &["activations"]),
    ("network.learning_rate", &["learning_rate", "lr", "eta"]),
    ("network.batch_size", &["batch_size", "batch", "batchsize"]),
    ("network.leaky_slope", &["leaky_slope"]),
    ("network.weight_init", &["weight_init"]),
    ("parallel.children", &["children", "cns"]),
    ("parallel.workers", &["workers", "goroutines"]),
    ("parallel.combiner", &["combiner"]),
    ("parallel.init", &["init", "child_init"]),
    ("data.dir", &["data_dir"]),
    ("run.epochs", &["epochs"]),
    ("run.seed", &["seed"]),
    ("run.eval_every", &["eval_every"]),
    ("run.output_csv", &["output_csv", "out"]),
    ("run.checkpoint_dir", &["checkpoint_dir"]),
    ("run.confidence", &["confidence"]),
    ("sweep.children", &["sweep_children"]),
    ("bench.children", &["bench_children"]),
    ("bench.workers", &["bench_workers"]),
    ("bench.repeats", &["bench_repeats", "repeats"]),
    ("bench.epochs", &["bench_epochs"]),
];

fn canonical_key(path: &[String]) -> Option<&'static str> {
    let joined = path.join(".");
    let (section, leaf) = match path {
        [leaf] => ("", leaf.as_str()),
        [section, leaf] => (section.as_str(), leaf.as_str()),
        _ => return None,
    };
    KEYS.iter().find_map(|&(canon, aliases)| {
        let canon_section = canon.split('.').next().unwrap();
        let hit = joined == canon
            || (section.is_empty() && aliases.contains(&leaf))
            || (section == canon_section && aliases.contains(&leaf));
        hit.then_some(canon)
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Scalar(String),
    List(Vec<String>),
}

#[derive(Debug)]
struct Entry {
    path: Vec<String>,
    value: Value,
    line: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Drops a trailing `# comment` that is not inside quotes.
fn strip_comment(line: &str) -> &str {
    let mut quote: Option<char> = None;
    for (i, ch) in line.char_indices() {
        match (quote, ch) {
            (None, '"' | '\'') => quote = Some(ch),
            (Some(q), c) if c == q => quote = None,
            (None, '#') if i == 0 || line[..i].ends_with([' ', '\t']) => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(raw: &str, line: usize) -> Result<String> {
    let s = raw.trim();
    if let Some(inner) = s.strip_prefix('"') {
        let inner = inner
            .strip_suffix('"')
            .ok_or_else(|| parse_err(line, "unterminated double quote"))?;
        let mut out = String::new();
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            if c == '\\' {
                match chars.next() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(other) => out.push(other),
                    None => return Err(parse_err(line, "dangling escape")),
                }
            } else {
                out.push(c);
            }
        }
        Ok(out)
    } else if let Some(inner) = s.strip_prefix('\'') {
        let inner = inner
            .strip_suffix('\'')
            .ok_or_else(|| parse_err(line, "unterminated single quote"))?;
        Ok(inner.replace("''", "'"))
    } else {
        Ok(s.to_string())
    }
}

fn parse_flow_list(raw: &str, line: usize) -> Result<Vec<String>> {
    let inner = raw
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| parse_err(line, "unterminated list"))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|item| unquote(item, line)).collect()
}

/// Flattens the document into `(path, value, line)` entries.
fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    // Stack of (indent, key) for open maps.
    let mut stack: Vec<(usize, String)> = Vec::new();
    let mut entries: Vec<Entry> = Vec::new();
    // An open `key:` with no inline value waiting for a block.
    let mut pending: Option<(usize, Vec<String>, usize)> = None;
    let mut block_list: Option<(usize, Vec<String>, Vec<String>, usize)> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = strip_comment(raw_line);
        if content.trim().is_empty() {
            continue;
        }
        if content.starts_with('\t') || content[..content.len() - content.trim_start().len()].contains('\t') {
            return Err(parse_err(line_no, "tabs are not allowed for indentation"));
        }
        let indent = content.len() - content.trim_start().len();
        let body = content.trim();

        if let Some(item) = body.strip_prefix("- ").or(if body == "-" { Some("") } else { None }) {
            match (&mut block_list, &pending) {
                (Some((list_indent, _, items, _)), _) if indent == *list_indent => {
                    items.push(unquote(item, line_no)?);
                    continue;
                }
                (None, Some((p_indent, path, p_line))) if indent > *p_indent => {
                    block_list = Some((indent, path.clone(), vec![unquote(item, line_no)?], *p_line));
                    pending = None;
                    continue;
                }
                _ => return Err(parse_err(line_no, "list item without an owning key")),
            }
        }
        if let Some((_, path, items, l)) = block_list.take() {
            entries.push(Entry {
                path,
                value: Value::List(items),
                line: l,
            });
        }

        let (key, rest) = body
            .split_once(':')
            .ok_or_else(|| parse_err(line_no, format!("expected 'key: value', found '{body}'")))?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(parse_err(line_no, format!("invalid key '{key}'")));
        }

        if let Some((p_indent, path, p_line)) = pending.take() {
            if indent > p_indent {
                stack.push((p_indent, path.last().unwrap().clone()));
            } else {
                return Err(parse_err(p_line, format!("key '{}' has no value", path.join("."))));
            }
        }
        while stack.last().is_some_and(|(i, _)| *i >= indent) {
            stack.pop();
        }
        let mut path: Vec<String> = stack.iter().map(|(_, k)| k.clone()).collect();
        path.push(key.to_string());

        let rest = rest.trim();
        if rest.is_empty() {
            pending = Some((indent, path, line_no));
        } else if rest.starts_with('[') {
            entries.push(Entry {
                path,
                value: Value::List(parse_flow_list(rest, line_no)?),
                line: line_no,
            });
        } else {
            entries.push(Entry {
                path,
                value: Value::Scalar(unquote(rest, line_no)?),
                line: line_no,
            });
        }
    }
    if let Some((_, path, items, l)) = block_list.take() {
        entries.push(Entry {
            path,
            value: Value::List(items),
            line: l,
        });
    }
    if let Some((_, path, l)) = pending {
        return Err(parse_err(l, format!("key '{}' has no value", path.join("."))));
    }
    Ok(entries)
}

fn scalar<'a>(e: &'a Entry, key: &str) -> Result<&'a str> {
    match &e.value {
        Value::Scalar(s) => Ok(s),
        Value::List(_) => Err(parse_err(e.line, format!("{key} expects a single value"))),
    }
}

fn list<'a>(e: &'a Entry, key: &str) -> Result<&'a [String]> {
    match &e.value {
        Value::List(v) => Ok(v),
        Value::Scalar(_) => Err(parse_err(e.line, format!("{key} expects a list"))),
    }
}

fn number<T: std::str::FromStr>(s: &str, line: usize, key: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{key}: '{s}' is not a valid number")))
}

fn seed_value(s: &str, line: usize) -> Result<u64> {
    if s.trim() == "time" {
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        Ok(nanos)
    } else {
        number(s, line, "seed")
    }
}

/// Parses config text over the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<(&'static str, usize)> = Vec::new();
    let mut slope: Option<f64> = None;

    for e in parse_entries(text)? {
        let key = canonical_key(&e.path)
            .ok_or_else(|| parse_err(e.line, format!("unknown key '{}'", e.path.join("."))))?;
        if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
            return Err(parse_err(
                e.line,
                format!("'{key}' already set on line {first}"),
            ));
        }
        seen.push((key, e.line));
        let l = e.line;
        match key {
            "network.layer_sizes" => {
                cfg.network.layer_sizes = list(&e, key)?
                    .iter()
                    .map(|s| number(s, l, key))
                    .collect::<Result<_>>()?
            }
            "network.activations" => {
                cfg.network.activations = list(&e, key)?
                    .iter()
                    .map(|s| s.parse().map_err(|err: Error| parse_err(l, err.to_string())))
                    .collect::<Result<_>>()?
            }
            "network.learning_rate" => cfg.network.learning_rate = number(scalar(&e, key)?, l, key)?,
            "network.batch_size" => cfg.network.batch_size = number(scalar(&e, key)?, l, key)?,
            "network.leaky_slope" => slope = Some(number(scalar(&e, key)?, l, key)?),
            "network.weight_init" => {
                cfg.network.weight_init = WeightInit::parse(scalar(&e, key)?)
                    .map_err(|err| parse_err(l, err.to_string()))?
            }
            "parallel.children" => cfg.parallel.children = number(scalar(&e, key)?, l, key)?,
            "parallel.workers" => cfg.parallel.workers = number(scalar(&e, key)?, l, key)?,
            "parallel.combiner" => {
                cfg.parallel.combiner = Combiner::parse(scalar(&e, key)?)
                    .map_err(|err| parse_err(l, err.to_string()))?
            }
            "parallel.init" => {
                cfg.parallel.init = match scalar(&e, key)? {
                    "replicate" | "clone" => ChildInit::Replicate,
                    "fresh" => ChildInit::Fresh,
                    other => return Err(parse_err(l, format!("unknown child init '{other}'"))),
                }
            }
            "data.dir" => cfg.data_dir = Some(PathBuf::from(scalar(&e, key)?)),
            "run.epochs" => cfg.network.epochs = number(scalar(&e, key)?, l, key)?,
            "run.seed" => cfg.network.seed = seed_value(scalar(&e, key)?, l)?,
            "run.eval_every" => cfg.run.eval_every = number(scalar(&e, key)?, l, key)?,
            "run.output_csv" => cfg.run.output_csv = PathBuf::from(scalar(&e, key)?),
            "run.checkpoint_dir" => cfg.run.checkpoint_dir = Some(PathBuf::from(scalar(&e, key)?)),
            "run.confidence" => {
                cfg.run.confidence = match scalar(&e, key)? {
                    "max_probability" | "max" => ConfidenceKind::MaxProbability,
                    "true_class" => ConfidenceKind::TrueClass,
                    other => return Err(parse_err(l, format!("unknown confidence kind '{other}'"))),
                }
            }
            "sweep.children" => {
                cfg.sweep.children = list(&e, key)?
                    .iter()
                    .map(|s| number(s, l, key))
                    .collect::<Result<_>>()?
            }
            "bench.children" => cfg.bench.children = number(scalar(&e, key)?, l, key)?,
            "bench.workers" => {
                cfg.bench.workers = list(&e, key)?
                    .iter()
                    .map(|s| number(s, l, key))
                    .collect::<Result<_>>()?
            }
            "bench.repeats" => cfg.bench.repeats = number(scalar(&e, key)?, l, key)?,
            "bench.epochs" => cfg.bench.epochs = number(scalar(&e, key)?, l, key)?,
            _ => unreachable!("key table and match disagree on {key}"),
        }
    }
    if let Some(slope) = slope {
        for act in &mut cfg.network.activations {
            if let ActivationKind::LeakyRelu { slope: s } = act {
                *s = slope;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads `path`, or `config.yaml` beside the executable when `path` is
/// `None` (falling back to defaults if that file does not exist).
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let path = match path {
        Some(p) => p.to_path_buf(),
        None => {
            let beside = std::env::current_exe()
                .ok()
                .and_then(|exe| exe.parent().map(|d| d.join(DEFAULT_CONFIG_NAME)));
            match beside {
                Some(p) if p.is_file() => p,
                _ => return Ok(RunConfig::default()),
            }
        }
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_config(&text)
}
