//! Isolating the code payload of a raw model response.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LanguageId, LanguageRegistry};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("response contains no code")]
    NoCode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionMethod {
    /// Contents of a ``` fenced block.
    Fenced,
    /// Unfenced response with leading/trailing prose lines removed.
    Heuristic,
    /// Unfenced response taken verbatim.
    Whole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedCode {
    pub code: String,
    pub method: ExtractionMethod,
    /// Info string of the chosen fence (`python` in ```` ```python ````).
    pub fence_info: Option<String>,
}

struct Line<'a> {
    start: usize,
    /// Excludes the `\n` terminator and a trailing `\r`.
    text: &'a str,
}

fn lines(s: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut start = 0;
    for piece in s.split('\n') {
        let text = piece.strip_suffix('\r').unwrap_or(piece);
        out.push(Line { start, text });
        start += piece.len() + 1;
    }
    out
}

fn span<'a>(src: &'a str, lines: &[Line<'_>]) -> &'a str {
    match (lines.first(), lines.last()) {
        (Some(first), Some(last)) => &src[first.start..last.start + last.text.len()],
        _ => "",
    }
}

struct Fence<'a> {
    info: Option<&'a str>,
    body: &'a str,
    line_count: usize,
}

fn fence_opener(line: &str) -> Option<&str> {
    let rest = line.trim_start().strip_prefix("```")?;
    Some(rest.trim_start_matches('`').trim())
}

fn fenced_blocks(src: &str) -> Vec<Fence<'_>> {
    let all = lines(src);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let Some(info) = fence_opener(all[i].text) else {
            i += 1;
            continue;
        };
        let body_start = i + 1;
        let mut end = body_start;
        while end < all.len() && fence_opener(all[end].text) != Some("") {
            end += 1;
        }
        // an unclosed fence runs to the end of the response
        let body = &all[body_start.min(all.len())..end];
        blocks.push(Fence {
            info: info.split_whitespace().next(),
            body: span(src, body),
            line_count: body.len(),
        });
        i = end + 1;
    }
    blocks
}

const STATEMENT_STARTS: &[&str] = &[
    "abstract", "async", "auto", "await", "bool", "case", "catch", "char", "class", "const",
    "console", "data", "def", "defer", "do", "double", "echo", "elif", "else", "elseif", "end",
    "enum", "except", "export", "extern", "final", "finally", "float", "fn", "for", "from",
    "fun", "func", "function", "go", "if", "impl", "import", "include", "instance", "int",
    "interface", "let", "local", "long", "loop", "main", "match", "module", "mut", "namespace",
    "new", "object", "override", "package", "print", "printf", "println", "private",
    "protected", "pub", "public", "raise", "repeat", "return", "sealed", "short", "signed",
    "static", "struct", "switch", "template", "then", "throw", "trait", "try", "type",
    "typedef", "unsigned", "use", "using", "val", "var", "void", "where", "while", "with",
    "yield",
];

/// A line counts as prose when it is not indented, reads like a sentence
/// (starts with a letter or list marker, ends in sentence punctuation), has
/// no brace or semicolon, and does not open with a statement keyword.
fn is_prose(line: &str) -> bool {
    let trimmed = line.trim_end();
    if trimmed.is_empty() || line.starts_with([' ', '\t']) {
        return false;
    }
    if !trimmed.ends_with(['.', '!', '?', ':']) {
        return false;
    }
    if trimmed.contains(['{', '}', ';']) {
        return false;
    }
    let body = trimmed
        .strip_prefix("- ")
        .or_else(|| trimmed.strip_prefix("* "))
        .or_else(|| trimmed.strip_prefix("**"))
        .unwrap_or(trimmed);
    let Some(first) = body.chars().next() else {
        return false;
    };
    if !first.is_alphabetic() {
        return false;
    }
    let word: String = body
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect::<String>()
        .to_lowercase();
    !STATEMENT_STARTS.contains(&word.as_str())
}

/// Picks the code out of a model response.
///
/// With at least one nonblank fenced block, the block with the most lines
/// wins (earliest on ties). Otherwise leading and trailing prose lines are
/// dropped; if nothing was dropped the response is returned whole.
pub fn extract_code(response: &str) -> Result<ExtractedCode, ExtractError> {
    let blocks = fenced_blocks(response);
    if !blocks.is_empty() {
        let best = blocks
            .into_iter()
            .filter(|b| !b.body.trim().is_empty())
            .fold(None::<Fence<'_>>, |best, b| match best {
                Some(cur) if cur.line_count >= b.line_count => Some(cur),
                _ => Some(b),
            })
            .ok_or(ExtractError::NoCode)?;
        return Ok(ExtractedCode {
            code: best.body.to_string(),
            method: ExtractionMethod::Fenced,
            fence_info: best.info.filter(|s| !s.is_empty()).map(str::to_string),
        });
    }

    let all = lines(response);
    let is_blank = |l: &Line<'_>| l.text.trim().is_empty();
    let Some(first_code) = all.iter().position(|l| !is_blank(l) && !is_prose(l.text)) else {
        return Err(ExtractError::NoCode);
    };
    let last_code = all
        .iter()
        .rposition(|l| !is_blank(l) && !is_prose(l.text))
        .expect("a code line exists");
    let leading_prose = all[..first_code].iter().any(|l| is_prose(l.text));
    let trailing_prose = all[last_code + 1..].iter().any(|l| is_prose(l.text));
    if !leading_prose && !trailing_prose {
        return Ok(ExtractedCode {
            code: response.to_string(),
            method: ExtractionMethod::Whole,
            fence_info: None,
        });
    }
    let start = if leading_prose { first_code } else { 0 };
    let end = if trailing_prose { last_code } else { all.len() - 1 };
    let code = span(response, &all[start..=end]);
    Ok(ExtractedCode {
        code: code.to_string(),
        method: ExtractionMethod::Heuristic,
        fence_info: None,
    })
}

/// Registry-normalized language named by the fence info string, if any.
pub fn fence_language_hint(extracted: &ExtractedCode, registry: &LanguageRegistry) -> Option<LanguageId> {
    let info = extracted.fence_info.as_deref()?;
    let name = info.trim_start_matches(['{', '.']).trim_end_matches('}');
    Some(registry.normalize_or_unknown(name)).filter(|id| !id.is_unknown())
}
