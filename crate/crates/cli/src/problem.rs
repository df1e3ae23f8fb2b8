//! Line-oriented problem files.
//!
//! ```text
//! # real n = 2 on the unit square
//! setting    = real2
//! box        = 0, 0 .. 1, 1
//! resolution = 33
//! delta      = pi/4
//! h          = expr: pi/2
//! phi        = expr: 0.5*(x1^2 + x2^2)
//! usub       = expr: 0.5*(x1^2 + x2^2)
//! ```
//!
//! Fields are either `expr:<expression>` evaluated at every node or
//! `csv:<path>` in the grid CSV format, resolved against the problem file's
//! directory. `box` lists the lower corner, `..`, then the upper corner;
//! coordinates are separated by commas (or whitespace when no comma is
//! present) and may themselves be constant expressions.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use lagphase::{BoxDomain, GridError, GridField, ProblemSpec, Setting};
use thiserror::Error;

use crate::expr::Expr;

const KEYS: [&str; 7] = ["setting", "box", "resolution", "delta", "h", "phi", "usub"];

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<GridError> for ProblemError {
    fn from(e: GridError) -> Self {
        ProblemError::Invalid(e.to_string())
    }
}

/// How a field was given in the problem file.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    Expr(String),
    Csv(PathBuf),
}

/// A validated problem together with where its fields came from.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub h: FieldSource,
    pub phi: FieldSource,
    pub usub: FieldSource,
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    /// 1-based column of the first value character.
    column: usize,
    value: String,
}

impl Entry {
    fn syntax(&self, offset: usize, message: impl Into<String>) -> ProblemError {
        ProblemError::Syntax {
            line: self.line,
            column: self.column + offset,
            message: message.into(),
        }
    }
}

/// Parses a problem file; `csv:` paths are resolved against the file's directory.
pub fn parse_problem_file(path: &Path) -> Result<Problem, ProblemError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_problem(&text, base)
}

/// Parses problem text; `csv:` paths are resolved against `base`.
pub fn parse_problem(text: &str, base: &Path) -> Result<Problem, ProblemError> {
    let entries = collect_entries(text)?;
    let get = |key: &str| -> Result<&Entry, ProblemError> {
        entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, e)| e)
            .ok_or_else(|| ProblemError::Invalid(format!("missing required key '{key}'")))
    };

    let e = get("setting")?;
    let setting = Setting::from_name(&e.value).map_err(|_| {
        e.syntax(0, format!("unknown setting '{}' (expected real2, real3, complex1 or complex2)", e.value))
    })?;

    let e = get("box")?;
    let (lower, upper) = parse_box(e)?;

    let e = get("resolution")?;
    let resolution: usize = e
        .value
        .parse()
        .map_err(|_| e.syntax(0, format!("resolution must be a positive integer, got '{}'", e.value)))?;

    let domain = BoxDomain::new(&lower, &upper, resolution)?;
    if domain.dim() != setting.dim() {
        return Err(ProblemError::Invalid(format!(
            "setting {} needs a {}-dimensional box, got {} coordinates per corner",
            setting.name(),
            setting.dim(),
            domain.dim()
        )));
    }

    let delta = constant(get("delta")?, 0)?;

    let (h, h_src) = parse_field(get("h")?, &domain, base)?;
    let (phi, phi_src) = parse_field(get("phi")?, &domain, base)?;
    let (usub, usub_src) = parse_field(get("usub")?, &domain, base)?;

    let spec = ProblemSpec::new(domain, setting, h, phi, usub, delta)?;
    Ok(Problem {
        spec,
        h: h_src,
        phi: phi_src,
        usub: usub_src,
    })
}

fn collect_entries(text: &str) -> Result<Vec<(String, Entry)>, ProblemError> {
    let mut entries: Vec<(String, Entry)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let column = leading_columns(content) + 1;
            return Err(ProblemError::Syntax {
                line,
                column,
                message: "expected 'key = value'".into(),
            });
        };
        let key_part = &content[..eq];
        let key = key_part.trim();
        let key_column = leading_columns(key_part) + 1;
        if key.is_empty() {
            return Err(ProblemError::Syntax {
                line,
                column: key_column,
                message: "missing key before '='".into(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(ProblemError::Syntax {
                line,
                column: key_column,
                message: format!("unknown key '{key}' (expected one of {})", KEYS.join(", ")),
            });
        }
        if let Some((_, prev)) = entries.iter().find(|(k, _)| k == key) {
            return Err(ProblemError::Syntax {
                line,
                column: key_column,
                message: format!("duplicate key '{key}' (first given on line {})", prev.line),
            });
        }
        let value_part = &content[eq + 1..];
        let value = value_part.trim();
        let column = content[..eq + 1].chars().count() + leading_columns(value_part) + 1;
        if value.is_empty() {
            return Err(ProblemError::Syntax {
                line,
                column,
                message: format!("missing value for '{key}'"),
            });
        }
        entries.push((
            key.to_string(),
            Entry {
                line,
                column,
                value: value.to_string(),
            },
        ));
    }
    Ok(entries)
}

/// Number of leading whitespace characters.
fn leading_columns(s: &str) -> usize {
    s.chars().take_while(|c| c.is_whitespace()).count()
}

/// Evaluates a coordinate-free expression found `offset` characters into the entry.
fn constant_at(e: &Entry, text: &str, offset: usize) -> Result<f64, ProblemError> {
    let expr = Expr::parse(text, 0).map_err(|err| e.syntax(offset + err.column - 1, err.message))?;
    let v = expr.eval(&[]);
    if !v.is_finite() {
        return Err(e.syntax(offset, format!("'{}' is not a finite number", text.trim())));
    }
    Ok(v)
}

fn constant(e: &Entry, offset: usize) -> Result<f64, ProblemError> {
    constant_at(e, &e.value, offset)
}

/// Splits `s` into trimmed pieces with their character offsets.
fn pieces(s: &str, sep: impl Fn(char) -> bool) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<char> = s.chars().collect();
    for i in 0..=chars.len() {
        if i == chars.len() || sep(chars[i]) {
            let piece: String = chars[start..i].iter().collect();
            let lead = leading_columns(&piece);
            out.push((start + lead, piece.trim().to_string()));
            start = i + 1;
        }
    }
    out
}

fn parse_box(e: &Entry) -> Result<(Vec<f64>, Vec<f64>), ProblemError> {
    let Some(split) = e.value.find("..") else {
        return Err(e.syntax(0, "box must be 'lower corner .. upper corner'"));
    };
    let lower_text = &e.value[..split];
    let upper_text = &e.value[split + 2..];
    let upper_offset = e.value[..split + 2].chars().count();
    let lower = corner(e, lower_text, 0)?;
    let upper = corner(e, upper_text, upper_offset)?;
    if lower.len() != upper.len() {
        return Err(e.syntax(
            0,
            format!("box corners have {} and {} coordinates", lower.len(), upper.len()),
        ));
    }
    Ok((lower, upper))
}

fn corner(e: &Entry, text: &str, offset: usize) -> Result<Vec<f64>, ProblemError> {
    let trimmed = text.trim();
    let lead = leading_columns(text);
    let (inner, inner_offset) = match (trimmed.chars().next(), trimmed.chars().last()) {
        (Some('[' | '('), Some(']' | ')')) if trimmed.chars().count() >= 2 => {
            (&trimmed[1..trimmed.len() - 1], offset + lead + 1)
        }
        _ => (trimmed, offset + lead),
    };
    let parts = if inner.contains(',') {
        pieces(inner, |c| c == ',')
    } else {
        pieces(inner, char::is_whitespace).into_iter().filter(|(_, p)| !p.is_empty()).collect()
    };
    let mut out = Vec::with_capacity(parts.len());
    for (at, part) in parts {
        if part.is_empty() {
            return Err(e.syntax(inner_offset + at, "empty box coordinate"));
        }
        out.push(constant_at(e, &part, inner_offset + at)?);
    }
    if out.is_empty() {
        return Err(e.syntax(offset, "box corner has no coordinates"));
    }
    Ok(out)
}

fn parse_field(e: &Entry, domain: &BoxDomain, base: &Path) -> Result<(GridField, FieldSource), ProblemError> {
    if let Some(rest) = e.value.strip_prefix("expr:") {
        let offset = "expr:".len() + leading_columns(rest);
        let text = rest.trim();
        let expr = Expr::parse(text, domain.dim()).map_err(|err| e.syntax(offset + err.column - 1, err.message))?;
        let field = GridField::from_fn(domain, |x| expr.eval(x));
        if let Some(p) = (0..domain.node_count()).find(|&p| !field.value(p).is_finite()) {
            return Err(e.syntax(
                offset,
                format!("expression is not finite at node {}", domain.describe_node(p)),
            ));
        }
        return Ok((field, FieldSource::Expr(text.to_string())));
    }
    if let Some(rest) = e.value.strip_prefix("csv:") {
        let rel = rest.trim();
        if rel.is_empty() {
            return Err(e.syntax("csv:".len(), "missing csv path"));
        }
        let path = base.join(rel);
        let file = File::open(&path).map_err(|source| ProblemError::Io {
            path: path.clone(),
            source,
        })?;
        let field = GridField::read_csv(domain, BufReader::new(file))
            .map_err(|err| ProblemError::Invalid(format!("{}: {err}", path.display())))?;
        return Ok((field, FieldSource::Csv(path)));
    }
    Err(e.syntax(0, "field must start with 'expr:' or 'csv:'"))
}
