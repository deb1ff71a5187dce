//! Tagged long-context serialization of a commit.
//!
//! Layout, one element per line:
//!
//! ```text
//! [num_lines_added:] [LOW]            <- optional metric block
//! ...
//! <COMMIT_MESSAGE>message</COMMIT_MESSAGE>
//! <FILE path="src/lib.rs">
//! <REMOVED>
//! old line
//! </REMOVED>
//! <ADDED/>
//! </FILE>
//! ```
//!
//! Content is copied verbatim except that a `<` opening one of the four tag
//! names, and a `&` opening `&lt;` or `&amp;`, are entity-escaped. That keeps
//! the escaping reversible while leaving ordinary code untouched.

use serde::{Deserialize, Serialize};

use super::{Commit, DiffDocument, DiffError};

/// Sequence budget in text units.
pub const DEFAULT_BUDGET: usize = 22_000;

const TAG_NAMES: [&str; 4] = ["COMMIT_MESSAGE", "FILE", "REMOVED", "ADDED"];

/// How text length is measured against a budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountingRule {
    /// Whitespace-delimited words.
    #[default]
    Words,
    Bytes,
}

impl CountingRule {
    pub fn count(self, text: &str) -> usize {
        match self {
            CountingRule::Words => text.split_whitespace().count(),
            CountingRule::Bytes => text.len(),
        }
    }
}

impl std::str::FromStr for CountingRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "words" => Ok(CountingRule::Words),
            "bytes" => Ok(CountingRule::Bytes),
            other => Err(format!("unknown counting rule {other:?} (expected words|bytes)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredText {
    pub text: String,
    pub unit_count: usize,
    pub truncated: bool,
    pub rule: CountingRule,
}

impl StructuredText {
    fn new(text: String, rule: CountingRule, truncated: bool) -> Self {
        Self {
            unit_count: rule.count(&text),
            text,
            truncated,
            rule,
        }
    }
}

/// The element tree behind a [`StructuredText`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructuredCommit {
    pub metric_block: Option<String>,
    pub message: String,
    pub files: Vec<StructuredFile>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructuredFile {
    pub path: String,
    pub removed: Vec<String>,
    pub added: Vec<String>,
}

impl StructuredCommit {
    pub fn from_parts(metric_block: Option<&str>, message: &str, doc: &DiffDocument) -> Self {
        Self {
            metric_block: metric_block
                .map(|b| b.trim_end_matches('\n').to_string())
                .filter(|b| !b.is_empty()),
            message: message.to_string(),
            files: doc
                .files
                .iter()
                .map(|f| StructuredFile {
                    path: f.path.clone(),
                    removed: f.removed_lines.clone(),
                    added: f.added_lines.clone(),
                })
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(block) = &self.metric_block {
            out.push_str(block);
            out.push('\n');
        }
        out.push_str("<COMMIT_MESSAGE>");
        escape_content_into(&self.message, &mut out);
        out.push_str("</COMMIT_MESSAGE>");
        for file in &self.files {
            out.push_str("\n<FILE path=\"");
            escape_attr_into(&file.path, &mut out);
            out.push_str("\">");
            render_block(&mut out, "REMOVED", &file.removed);
            render_block(&mut out, "ADDED", &file.added);
            out.push_str("\n</FILE>");
        }
        out
    }

    fn diff_line_count(&self) -> usize {
        self.files.iter().map(|f| f.removed.len() + f.added.len()).sum()
    }

    /// Keep only the first `keep` diff lines in render order. Files past the
    /// cut point are dropped.
    fn keep_first_lines(&self, keep: usize) -> StructuredCommit {
        let mut remaining = keep;
        let mut files = Vec::new();
        for file in &self.files {
            if remaining == 0 {
                break;
            }
            let removed = file.removed.len().min(remaining);
            remaining -= removed;
            let added = file.added.len().min(remaining);
            remaining -= added;
            files.push(StructuredFile {
                path: file.path.clone(),
                removed: file.removed[..removed].to_vec(),
                added: file.added[..added].to_vec(),
            });
        }
        StructuredCommit {
            metric_block: self.metric_block.clone(),
            message: self.message.clone(),
            files,
        }
    }
}

fn render_block(out: &mut String, tag: &str, lines: &[String]) {
    if lines.is_empty() {
        out.push_str("\n<");
        out.push_str(tag);
        out.push_str("/>");
        return;
    }
    out.push_str("\n<");
    out.push_str(tag);
    out.push('>');
    for line in lines {
        out.push('\n');
        escape_content_into(line, out);
    }
    out.push_str("\n</");
    out.push_str(tag);
    out.push('>');
}

/// Serialize a commit: optional metric block, commit message, then one FILE
/// element per file with its REMOVED block followed by its ADDED block.
pub fn structure_commit(
    commit: &Commit,
    metric_block: Option<&str>,
    doc: &DiffDocument,
    rule: CountingRule,
) -> StructuredText {
    let tree = StructuredCommit::from_parts(metric_block, &commit.message, doc);
    StructuredText::new(tree.render(), rule, false)
}

/// Drop whole diff lines from the end until the text fits `budget`.
///
/// The metric block and commit message are never touched.
pub fn truncate_to_budget(st: &StructuredText, budget: usize) -> Result<StructuredText, DiffError> {
    let tree = parse_structured(&st.text)?;
    let rule = st.rule;
    let prefix = rule.count(&tree.keep_first_lines(0).render());
    if prefix > budget {
        return Err(DiffError::BudgetTooSmall { budget, prefix });
    }
    if st.unit_count <= budget {
        return Ok(st.clone());
    }

    // Rendered size is non-decreasing in the number of kept lines.
    let (mut lo, mut hi) = (0usize, tree.diff_line_count());
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if rule.count(&tree.keep_first_lines(mid).render()) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(StructuredText::new(tree.keep_first_lines(lo).render(), rule, true))
}

/// Parse structured text back into its element tree.
pub fn parse_structured(text: &str) -> Result<StructuredCommit, DiffError> {
    let ill = |msg: &str| DiffError::IllFormed(msg.to_string());
    let open = text
        .find("<COMMIT_MESSAGE>")
        .ok_or_else(|| ill("missing <COMMIT_MESSAGE>"))?;
    let body_start = open + "<COMMIT_MESSAGE>".len();
    let close = text[body_start..]
        .find("</COMMIT_MESSAGE>")
        .map(|i| i + body_start)
        .ok_or_else(|| ill("missing </COMMIT_MESSAGE>"))?;

    let metric_block = text[..open].trim_end_matches('\n');
    let mut tree = StructuredCommit {
        metric_block: (!metric_block.is_empty()).then(|| metric_block.to_string()),
        message: unescape_content(&text[body_start..close]),
        files: Vec::new(),
    };

    let rest = &text[close + "</COMMIT_MESSAGE>".len()..];
    if rest.is_empty() {
        return Ok(tree);
    }
    let rest = rest
        .strip_prefix('\n')
        .ok_or_else(|| ill("expected newline after </COMMIT_MESSAGE>"))?;

    let mut lines = rest.split('\n');
    while let Some(line) = lines.next() {
        let path = line
            .strip_prefix("<FILE path=\"")
            .and_then(|l| l.strip_suffix("\">"))
            .ok_or_else(|| DiffError::IllFormed(format!("expected <FILE>, found {line:?}")))?;
        let removed = parse_block(&mut lines, "REMOVED")?;
        let added = parse_block(&mut lines, "ADDED")?;
        match lines.next() {
            Some("</FILE>") => {}
            other => return Err(DiffError::IllFormed(format!("expected </FILE>, found {other:?}"))),
        }
        tree.files.push(StructuredFile {
            path: unescape_attr(path),
            removed,
            added,
        });
    }
    Ok(tree)
}

fn parse_block<'a>(lines: &mut impl Iterator<Item = &'a str>, tag: &str) -> Result<Vec<String>, DiffError> {
    let open = format!("<{tag}>");
    let empty = format!("<{tag}/>");
    let close = format!("</{tag}>");
    match lines.next() {
        Some(l) if l == empty => Ok(Vec::new()),
        Some(l) if l == open => {
            let mut out = Vec::new();
            loop {
                match lines.next() {
                    Some(l) if l == close => return Ok(out),
                    Some(l) => out.push(unescape_content(l)),
                    None => return Err(DiffError::IllFormed(format!("unterminated <{tag}>"))),
                }
            }
        }
        other => Err(DiffError::IllFormed(format!("expected <{tag}>, found {other:?}"))),
    }
}

/// Stack scan over the structural tags.
pub fn check_well_formed(text: &str) -> Result<(), DiffError> {
    let mut stack: Vec<&str> = Vec::new();
    let mut rest = text;
    while let Some(idx) = rest.find('<') {
        rest = &rest[idx + 1..];
        let closing = rest.starts_with('/');
        let name_start = usize::from(closing);
        let name_len = rest[name_start..]
            .find(|c: char| !(c.is_ascii_uppercase() || c == '_'))
            .unwrap_or(rest.len() - name_start);
        let name = &rest[name_start..name_start + name_len];
        if !TAG_NAMES.contains(&name) {
            continue;
        }
        let end = rest
            .find('>')
            .ok_or_else(|| DiffError::IllFormed(format!("unterminated tag <{name}")))?;
        let self_closing = rest[..end].ends_with('/');
        if closing {
            match stack.pop() {
                Some(open) if open == name => {}
                other => return Err(DiffError::IllFormed(format!("</{name}> closes {other:?}"))),
            }
        } else if !self_closing {
            stack.push(name);
        }
        rest = &rest[end + 1..];
    }
    match stack.pop() {
        None => Ok(()),
        Some(open) => Err(DiffError::IllFormed(format!("<{open}> is never closed"))),
    }
}

fn opens_tag(s: &str) -> bool {
    let s = s.strip_prefix('/').unwrap_or(s);
    TAG_NAMES.iter().any(|t| s.starts_with(t))
}

fn escape_content_into(text: &str, out: &mut String) {
    for (i, c) in text.char_indices() {
        let tail = &text[i..];
        match c {
            '<' if opens_tag(&tail[1..]) => out.push_str("&lt;"),
            '&' if tail.starts_with("&lt;") || tail.starts_with("&amp;") => out.push_str("&amp;"),
            _ => out.push(c),
        }
    }
}

fn unescape_content(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(idx) = rest.find('&') {
        out.push_str(&rest[..idx]);
        let tail = &rest[idx..];
        if let Some(after) = tail.strip_prefix("&lt;") {
            out.push('<');
            rest = after;
        } else if let Some(after) = tail.strip_prefix("&amp;") {
            out.push('&');
            rest = after;
        } else {
            out.push('&');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}

fn escape_attr_into(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}

fn unescape_attr(text: &str) -> String {
    text.replace("&quot;", "\"")
        .replace("&gt;", ">")
        .replace("&lt;", "<")
        .replace("&amp;", "&")
}
