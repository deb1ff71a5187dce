use super::{DiffDocument, DiffError, FileDelta};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    /// Before the first file header.
    Preamble,
    /// Inside a file section, outside any hunk body.
    Header,
    Hunk {
        old_left: usize,
        new_left: usize,
    },
    /// Inside a `GIT binary patch` payload.
    Binary,
}

struct Parser {
    files: Vec<FileDelta>,
    current: Option<FileDelta>,
    /// Whether the current section was opened by `diff --git`.
    git_section: bool,
    saw_minus_header: bool,
    saw_hunk: bool,
    warnings: usize,
    state: State,
}

/// Parse git-format (or plain) unified diff text.
///
/// Context lines, hunk headers and extended header lines are dropped. Lines
/// that fit no known construct are skipped and counted in
/// [`DiffDocument::warnings`].
pub fn parse_unified_diff(raw: &str) -> Result<DiffDocument, DiffError> {
    let mut parser = Parser {
        files: Vec::new(),
        current: None,
        git_section: false,
        saw_minus_header: false,
        saw_hunk: false,
        warnings: 0,
        state: State::Preamble,
    };
    let lines: Vec<&str> = raw.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    // `split` yields a trailing empty piece for newline-terminated input.
    let n = if raw.ends_with('\n') {
        lines.len() - 1
    } else {
        lines.len()
    };
    for i in 0..n {
        let next = lines.get(i + 1).copied().filter(|_| i + 1 < n);
        parser.line(lines[i], next);
    }
    parser.finish_file();

    if parser.files.is_empty() && !raw.trim().is_empty() {
        return Err(DiffError::MalformedDiff);
    }
    Ok(DiffDocument {
        files: parser.files,
        warnings: parser.warnings,
    })
}

impl Parser {
    fn line(&mut self, line: &str, next: Option<&str>) {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            self.finish_file();
            self.current = Some(FileDelta::new(git_header_path(rest)));
            self.git_section = true;
            self.state = State::Header;
            return;
        }

        match self.state {
            State::Binary => {}
            State::Hunk { old_left, new_left } => self.hunk_line(line, next, old_left, new_left),
            State::Preamble => {
                if is_plain_file_start(line, next) {
                    self.start_plain_file();
                    self.header_line(line, next);
                }
            }
            State::Header => self.header_line(line, next),
        }
    }

    fn hunk_line(&mut self, line: &str, next: Option<&str>, old_left: usize, new_left: usize) {
        let file = self.current.as_mut().expect("hunk outside of a file");
        let (old_left, new_left) = match line.as_bytes().first() {
            Some(b'+') if new_left > 0 => {
                file.added_lines.push(line[1..].to_string());
                (old_left, new_left - 1)
            }
            Some(b'-') if old_left > 0 => {
                file.removed_lines.push(line[1..].to_string());
                (old_left - 1, new_left)
            }
            Some(b' ') | None => (old_left.saturating_sub(1), new_left.saturating_sub(1)),
            Some(b'\\') => (old_left, new_left),
            _ => {
                // Hunk shorter than its header claimed.
                self.state = State::Header;
                self.header_line(line, next);
                return;
            }
        };
        self.state = if old_left == 0 && new_left == 0 {
            State::Header
        } else {
            State::Hunk { old_left, new_left }
        };
    }

    fn header_line(&mut self, line: &str, next: Option<&str>) {
        // A plain (non-git) diff starts the next file with a ---/+++ pair.
        if !self.git_section && (self.saw_hunk || self.saw_minus_header) && is_plain_file_start(line, next) {
            self.start_plain_file();
        }
        let Some(file) = self.current.as_mut() else {
            return;
        };

        if let Some(rest) = line.strip_prefix("--- ") {
            self.saw_minus_header = true;
            let old = header_file_path(rest);
            if old != "/dev/null" && file.path.is_empty() {
                file.path = strip_side_prefix(&old).to_string();
            }
        } else if let Some(rest) = line.strip_prefix("+++ ") {
            let new = header_file_path(rest);
            if new != "/dev/null" {
                file.path = strip_side_prefix(&new).to_string();
            }
        } else if line.starts_with("@@ ") {
            match parse_hunk_header(line) {
                Some((old_len, new_len)) => {
                    self.saw_hunk = true;
                    if old_len > 0 || new_len > 0 {
                        self.state = State::Hunk {
                            old_left: old_len,
                            new_left: new_len,
                        };
                    }
                }
                None => self.warnings += 1,
            }
        } else if let Some(from) = line
            .strip_prefix("rename from ")
            .or_else(|| line.strip_prefix("copy from "))
        {
            file.old_path = Some(unquote(from));
        } else if let Some(to) = line
            .strip_prefix("rename to ")
            .or_else(|| line.strip_prefix("copy to "))
        {
            file.path = unquote(to);
        } else if line.starts_with("Binary files ") && line.ends_with(" differ") {
            file.is_binary = true;
        } else if line == "GIT binary patch" {
            file.is_binary = true;
            self.state = State::Binary;
        } else if is_extended_header(line) || line.starts_with('\\') {
        } else {
            self.warnings += 1;
        }
    }

    fn start_plain_file(&mut self) {
        self.finish_file();
        self.current = Some(FileDelta::new(String::new()));
        self.git_section = false;
        self.state = State::Header;
    }

    fn finish_file(&mut self) {
        if let Some(mut file) = self.current.take() {
            if file.is_binary {
                file.added_lines.clear();
                file.removed_lines.clear();
            }
            self.files.push(file);
        }
        self.saw_minus_header = false;
        self.saw_hunk = false;
    }
}

fn is_plain_file_start(line: &str, next: Option<&str>) -> bool {
    line.starts_with("--- ") && next.is_some_and(|n| n.starts_with("+++ "))
}

fn is_extended_header(line: &str) -> bool {
    const PREFIXES: [&str; 8] = [
        "index ",
        "old mode ",
        "new mode ",
        "deleted file mode ",
        "new file mode ",
        "similarity index ",
        "dissimilarity index ",
        "mode change ",
    ];
    PREFIXES.iter().any(|p| line.starts_with(p))
}

/// Path of the new side from the `diff --git a/<old> b/<new>` header.
fn git_header_path(rest: &str) -> String {
    let rest = rest.trim_end();
    if rest.starts_with('"') || rest.ends_with('"') {
        // One or both sides quoted: "a/x y" "b/x y"
        let second = match split_quoted(rest) {
            Some((_, tail)) => tail.trim_start(),
            None => rest.rfind(" \"").map_or(rest, |i| &rest[i + 1..]),
        };
        return strip_side_prefix(&unquote(second)).to_string();
    }
    // Unambiguous when both sides name the same path.
    let bytes = rest.len();
    if bytes % 2 == 1 {
        let mid = bytes / 2;
        let (a, b) = (&rest[..mid], &rest[mid + 1..]);
        if rest.is_char_boundary(mid) && rest.as_bytes()[mid] == b' ' && strip_side_prefix(a) == strip_side_prefix(b) {
            return strip_side_prefix(b).to_string();
        }
    }
    match rest.rfind(" b/") {
        Some(idx) => rest[idx + 3..].to_string(),
        None => rest
            .rsplit_once(' ')
            .map(|(_, b)| strip_side_prefix(b).to_string())
            .unwrap_or_else(|| rest.to_string()),
    }
}

/// File name from a `---`/`+++` line, without a trailing timestamp.
fn header_file_path(rest: &str) -> String {
    let name = rest.split('\t').next().unwrap_or(rest).trim_end();
    unquote(name)
}

fn strip_side_prefix(path: &str) -> &str {
    path.strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path)
}

/// Undo git's C-style path quoting; unquoted input is returned as is.
fn unquote(s: &str) -> String {
    match split_quoted(s) {
        Some((path, "")) => path,
        _ => s.to_string(),
    }
}

/// Decode a leading quoted string, returning it and the remaining input.
fn split_quoted(s: &str) -> Option<(String, &str)> {
    let body = s.strip_prefix('"')?;
    let mut bytes = Vec::new();
    let mut iter = body.char_indices();
    while let Some((i, c)) = iter.next() {
        match c {
            '"' => return Some((String::from_utf8_lossy(&bytes).into_owned(), &body[i + 1..])),
            '\\' => {
                let (_, e) = iter.next()?;
                let simple = match e {
                    'a' => Some(0x07),
                    'b' => Some(0x08),
                    't' => Some(b'\t'),
                    'n' => Some(b'\n'),
                    'v' => Some(0x0b),
                    'f' => Some(0x0c),
                    'r' => Some(b'\r'),
                    '"' => Some(b'"'),
                    '\\' => Some(b'\\'),
                    _ => None,
                };
                match simple {
                    Some(b) => bytes.push(b),
                    None if e.is_digit(8) => {
                        let mut value = e.to_digit(8)?;
                        for _ in 0..2 {
                            let (_, d) = iter.next()?;
                            value = value * 8 + d.to_digit(8)?;
                        }
                        bytes.push(u8::try_from(value).ok()?);
                    }
                    None => return None,
                }
            }
            c => {
                let mut buf = [0u8; 4];
                bytes.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    None
}

/// Old and new line counts of `@@ -a[,b] +c[,d] @@`.
fn parse_hunk_header(line: &str) -> Option<(usize, usize)> {
    let body = line.strip_prefix("@@ ")?;
    let end = body.find(" @@")?;
    let mut parts = body[..end].split(' ');
    let old = parts.next()?.strip_prefix('-')?;
    let new = parts.next()?.strip_prefix('+')?;
    if parts.next().is_some() {
        return None;
    }
    Some((range_len(old)?, range_len(new)?))
}

fn range_len(range: &str) -> Option<usize> {
    match range.split_once(',') {
        Some((start, len)) => {
            start.parse::<usize>().ok()?;
            len.parse().ok()
        }
        None => {
            range.parse::<usize>().ok()?;
            Some(1)
        }
    }
}
