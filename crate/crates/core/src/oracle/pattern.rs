//! The restricted pattern dialect used by `stdout_matches`.
//!
//! Supported: literal characters, `\n` `\t` `\r` for control characters,
//! `\` before punctuation for that character, `.` (any character but newline), `[...]` / `[^...]` classes with ranges, `*`
//! after any single atom, a leading `^` and a trailing `$`. Matching is an
//! unanchored search unless anchored, and runs in O(text * pattern) time.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("pattern {pattern:?}, offset {offset}: {message}")]
pub struct PatternError {
    pub pattern: String,
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Atom {
    Char(char),
    Any,
    Class { negated: bool, ranges: Vec<(char, char)> },
}

impl Atom {
    fn matches(&self, c: char) -> bool {
        match self {
            Atom::Char(x) => *x == c,
            Atom::Any => c != '\n',
            Atom::Class { negated, ranges } => ranges.iter().any(|&(lo, hi)| lo <= c && c <= hi) != *negated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Item {
    atom: Atom,
    star: bool,
}

#[derive(Clone, PartialEq, Eq)]
pub struct Pattern {
    source: String,
    anchored_start: bool,
    anchored_end: bool,
    items: Vec<Item>,
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Pattern").field(&self.source).finish()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Pattern {
    pub fn new(source: &str) -> Result<Pattern, PatternError> {
        let err = |offset: usize, message: &str| PatternError {
            pattern: source.to_string(),
            offset,
            message: message.to_string(),
        };
        let chars: Vec<(usize, char)> = source.char_indices().collect();
        let mut i = 0;
        let mut end = chars.len();
        let anchored_start = chars.first().is_some_and(|&(_, c)| c == '^');
        if anchored_start {
            i = 1;
        }
        let anchored_end = end > i && chars[end - 1].1 == '$' && !ends_in_escape(&chars[i..end - 1]);
        if anchored_end {
            end -= 1;
        }
        let mut items: Vec<Item> = Vec::new();
        while i < end {
            let (offset, c) = chars[i];
            i += 1;
            let atom = match c {
                '\\' => {
                    let Some(&(_, next)) = chars[..end].get(i) else {
                        return Err(err(offset, "dangling escape"));
                    };
                    i += 1;
                    Atom::Char(unescape(next).map_err(|m| err(offset, m))?)
                }
                '.' => Atom::Any,
                '[' => {
                    let (atom, next) = parse_class(&chars[..end], i).map_err(|m| err(offset, m))?;
                    i = next;
                    atom
                }
                '*' => {
                    match items.last_mut() {
                        Some(last) if !last.star => last.star = true,
                        _ => return Err(err(offset, "`*` must follow a single atom")),
                    }
                    continue;
                }
                '^' | '$' => return Err(err(offset, "anchors are only allowed at the ends")),
                '+' | '?' | '(' | ')' | '|' | '{' => return Err(err(offset, "unsupported operator")),
                c => Atom::Char(c),
            };
            items.push(Item { atom, star: false });
        }
        Ok(Pattern {
            source: source.to_string(),
            anchored_start,
            anchored_end,
            items,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    pub fn is_match(&self, text: &str) -> bool {
        let m = self.items.len();
        let mut current = vec![false; m + 1];
        let mut next = vec![false; m + 1];
        self.enter(&mut current, 0);
        if !self.anchored_end && current[m] {
            return true;
        }
        for c in text.chars() {
            next.iter_mut().for_each(|s| *s = false);
            for (state, item) in self.items.iter().enumerate() {
                if current[state] && item.atom.matches(c) {
                    if item.star {
                        self.enter(&mut next, state);
                    } else {
                        self.enter(&mut next, state + 1);
                    }
                }
            }
            if !self.anchored_start {
                self.enter(&mut next, 0);
            }
            std::mem::swap(&mut current, &mut next);
            if !self.anchored_end && current[m] {
                return true;
            }
        }
        current[m]
    }

    /// Adds `state` and everything reachable from it by skipping starred items.
    fn enter(&self, set: &mut [bool], mut state: usize) {
        loop {
            set[state] = true;
            if state < self.items.len() && self.items[state].star {
                state += 1;
            } else {
                return;
            }
        }
    }
}

fn unescape(c: char) -> Result<char, &'static str> {
    match c {
        'n' => Ok('\n'),
        't' => Ok('\t'),
        'r' => Ok('\r'),
        c if c.is_ascii_alphanumeric() => Err("unsupported escape"),
        c => Ok(c),
    }
}

fn ends_in_escape(chars: &[(usize, char)]) -> bool {
    chars.iter().rev().take_while(|&&(_, c)| c == '\\').count() % 2 == 1
}

const UNTERMINATED: &str = "unterminated class";

/// Parses a class body starting just after `[`; returns the atom and the
/// index after the closing `]`.
fn parse_class(chars: &[(usize, char)], mut i: usize) -> Result<(Atom, usize), &'static str> {
    let negated = chars.get(i).is_some_and(|&(_, c)| c == '^');
    if negated {
        i += 1;
    }
    let mut members: Vec<char> = Vec::new();
    let mut ranges = Vec::new();
    let mut first = true;
    loop {
        let &(_, c) = chars.get(i).ok_or(UNTERMINATED)?;
        i += 1;
        let lit = match c {
            ']' if !first => break,
            '\\' => {
                let &(_, e) = chars.get(i).ok_or(UNTERMINATED)?;
                i += 1;
                unescape(e)?
            }
            c => c,
        };
        first = false;
        let is_range = chars.get(i).is_some_and(|&(_, c)| c == '-') && chars.get(i + 1).is_some_and(|&(_, c)| c != ']');
        if is_range {
            let &(_, mut hi) = chars.get(i + 1).ok_or(UNTERMINATED)?;
            i += 2;
            if hi == '\\' {
                hi = unescape(chars.get(i).ok_or(UNTERMINATED)?.1)?;
                i += 1;
            }
            if hi < lit {
                return Err("reversed range");
            }
            ranges.push((lit, hi));
        } else {
            members.push(lit);
        }
    }
    ranges.extend(members.into_iter().map(|c| (c, c)));
    Ok((Atom::Class { negated, ranges }, i))
}
