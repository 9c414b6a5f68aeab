//! Single-pass segmentation of raw Markdown into visibility segments.
//!
//! The scanner walks byte offsets (every delimiter is ASCII, so UTF-8 text
//! passes through untouched) and resolves three constructs:
//!
//! - fenced code blocks: opener at a line start with at most three spaces of
//!   indent, three or more backticks or tildes; content is visible, and any
//!   complete HTML comment inside is split out as `HtmlCommentInCode`;
//! - inline code spans: a backtick run closed by an equal-length run on the
//!   same line masks comment openers between the runs;
//! - HTML comments: `<!--` anywhere else opens a hidden segment that runs to
//!   the first `-->` (which may be on a later line) or to end of input.
//!
//! When a comment opens before a would-be fence line, the comment wins: a
//! renderer that honors raw HTML removes the whole comment span, so the fence
//! marker inside it never reaches the reader.

use super::{CommentClose, Segment, SegmentKind, SkillDocument, Visibility};

/// Parse raw Skill text into a segmented document. The resulting segments are
/// non-overlapping, in order, and cover the entire input.
pub fn parse_skill(raw: &str, source_name: Option<&str>) -> SkillDocument {
    let mut scanner = Scanner {
        b: raw.as_bytes(),
        pieces: Vec::new(),
        prose_from: 0,
    };
    scanner.run();
    let segments = to_segments(raw, scanner.pieces);
    SkillDocument {
        raw_text: raw.to_string(),
        segments,
        source_name: source_name.map(String::from),
    }
}

/// Byte-offset piece, later converted to a char-offset `Segment`.
struct Piece {
    start: usize,
    end: usize,
    kind: SegmentKind,
    close: CommentClose,
}

struct Fence {
    ch: u8,
    len: usize,
}

struct Scanner<'a> {
    b: &'a [u8],
    pieces: Vec<Piece>,
    prose_from: usize,
}

impl Scanner<'_> {
    fn run(&mut self) {
        let n = self.b.len();
        let mut ls = 0;
        while ls < n {
            let le = line_end(self.b, ls);
            if let Some(fence) = fence_opener(self.b, ls, le) {
                self.flush_prose(ls);
                let next = self.fence_block(ls, le, fence);
                self.prose_from = next;
                ls = next;
            } else {
                ls = self.scan_line(ls, le);
            }
        }
        self.flush_prose(n);
    }

    /// Scan one prose line for code-span masks and comment openers. A comment
    /// may run past the line end; returns the position scanning stopped at,
    /// which is always a line start.
    fn scan_line(&mut self, ls: usize, le: usize) -> usize {
        let b = self.b;
        let mut i = ls;
        let mut le = le;
        while i < le {
            match b[i] {
                b'`' => {
                    let run = run_len(b, i, le, b'`');
                    match code_span_close(b, i + run, le, run) {
                        Some(after) => i = after,
                        None => i += run,
                    }
                }
                b'<' if b[i..].starts_with(b"<!--") => {
                    self.flush_prose(i);
                    let (end, close) = comment_end(b, i);
                    self.pieces.push(Piece {
                        start: i,
                        end,
                        kind: SegmentKind::HtmlCommentHidden,
                        close,
                    });
                    self.prose_from = end;
                    i = end;
                    // Comment crossed the line: keep scanning its tail line.
                    if i > le {
                        le = line_end(b, i);
                    }
                }
                _ => i += 1,
            }
        }
        le
    }

    /// Consume a fenced block: opener line, body, and closer line (or to end
    /// of input when unclosed). Complete comments in the body become visible
    /// `HtmlCommentInCode` pieces; everything else stays `CodeFence`.
    fn fence_block(&mut self, ls: usize, le: usize, fence: Fence) -> usize {
        let b = self.b;
        let n = b.len();
        let mut cls = le;
        let (body_end, end) = loop {
            if cls >= n {
                break (n, n);
            }
            let cle = line_end(b, cls);
            if is_fence_closer(strip_eol(&b[cls..cle]), &fence) {
                break (cls, cle);
            }
            cls = cle;
        };
        let mut prev = ls;
        let mut i = le;
        while i < body_end {
            let Some(c) = find_sub(b, b"<!--", i).filter(|&c| c < body_end) else {
                break;
            };
            let (cend, close) = comment_end(b, c);
            if close == CommentClose::Eof || cend > body_end {
                // The closer search is monotone, so no later opener in this
                // body can terminate either.
                break;
            }
            if c > prev {
                self.pieces.push(Piece {
                    start: prev,
                    end: c,
                    kind: SegmentKind::CodeFence,
                    close: CommentClose::None,
                });
            }
            self.pieces.push(Piece {
                start: c,
                end: cend,
                kind: SegmentKind::HtmlCommentInCode,
                close,
            });
            prev = cend;
            i = cend;
        }
        if end > prev {
            self.pieces.push(Piece {
                start: prev,
                end,
                kind: SegmentKind::CodeFence,
                close: CommentClose::None,
            });
        }
        end
    }

    fn flush_prose(&mut self, upto: usize) {
        if upto > self.prose_from {
            self.pieces.push(Piece {
                start: self.prose_from,
                end: upto,
                kind: SegmentKind::Prose,
                close: CommentClose::None,
            });
        }
        self.prose_from = upto;
    }
}

/// End offset of the `<!--` comment opened at `opener`, plus how it closed.
/// The closer search starts two bytes into the opener because HTML lets the
/// closer overlap it: `<!-->` and `<!--->` are complete, empty comments.
fn comment_end(b: &[u8], opener: usize) -> (usize, CommentClose) {
    match find_sub(b, b"-->", opener + 2) {
        Some(k) => {
            let close = if k < opener + 4 {
                CommentClose::Abrupt
            } else {
                CommentClose::Normal
            };
            (k + 3, close)
        }
        None => (b.len(), CommentClose::Eof),
    }
}

/// Closing backtick run of exactly `run` length before `le`, returning the
/// offset just past it. Matching is same-line only.
fn code_span_close(b: &[u8], from: usize, le: usize, run: usize) -> Option<usize> {
    let mut i = from;
    while i < le {
        if b[i] == b'`' {
            let r = run_len(b, i, le, b'`');
            if r == run {
                return Some(i + r);
            }
            i += r;
        } else {
            i += 1;
        }
    }
    None
}

fn fence_opener(b: &[u8], ls: usize, le: usize) -> Option<Fence> {
    let line = strip_eol(&b[ls..le]);
    let indent = line.iter().take_while(|&&c| c == b' ').count();
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let &ch = rest.first()?;
    if ch != b'`' && ch != b'~' {
        return None;
    }
    let len = rest.iter().take_while(|&&c| c == ch).count();
    if len < 3 {
        return None;
    }
    // A backtick fence's info string cannot itself contain a backtick.
    if ch == b'`' && rest[len..].contains(&b'`') {
        return None;
    }
    Some(Fence { ch, len })
}

fn is_fence_closer(line: &[u8], fence: &Fence) -> bool {
    let indent = line.iter().take_while(|&&c| c == b' ').count();
    if indent > 3 {
        return false;
    }
    let rest = &line[indent..];
    let len = rest.iter().take_while(|&&c| c == fence.ch).count();
    len >= fence.len && rest[len..].iter().all(|&c| c == b' ' || c == b'\t')
}

/// Offset one past the next `\n` at or after `from`, or end of input.
fn line_end(b: &[u8], from: usize) -> usize {
    match b[from..].iter().position(|&c| c == b'\n') {
        Some(k) => from + k + 1,
        None => b.len(),
    }
}

fn strip_eol(line: &[u8]) -> &[u8] {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    line.strip_suffix(b"\r").unwrap_or(line)
}

fn run_len(b: &[u8], from: usize, le: usize, ch: u8) -> usize {
    b[from..le].iter().take_while(|&&c| c == ch).count()
}

fn find_sub(b: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= b.len() {
        return None;
    }
    b[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|k| from + k)
}

/// Convert contiguous byte pieces to char-offset segments in one text walk.
/// Piece boundaries always land on char boundaries because every delimiter
/// is ASCII.
fn to_segments(raw: &str, pieces: Vec<Piece>) -> Vec<Segment> {
    let b = raw.as_bytes();
    let mut segments = Vec::with_capacity(pieces.len());
    let mut cpos = 0usize;
    let mut bpos = 0usize;
    for p in pieces {
        debug_assert_eq!(bpos, p.start, "pieces must be contiguous");
        let cstart = cpos;
        while bpos < p.end {
            bpos += utf8_len(b[bpos]);
            cpos += 1;
        }
        let visibility = if p.kind == SegmentKind::HtmlCommentHidden {
            Visibility::Hidden
        } else {
            Visibility::Visible
        };
        segments.push(Segment {
            span: cstart..cpos,
            byte_span: p.start..p.end,
            visibility,
            kind: p.kind,
            close: p.close,
        });
    }
    debug_assert_eq!(bpos, b.len(), "pieces must cover the document");
    segments
}

fn utf8_len(first: u8) -> usize {
    match first {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}
