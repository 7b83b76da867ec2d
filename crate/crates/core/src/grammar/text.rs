//! The line-oriented BNF file format.
//!
//! ```text
//! # comment
//! <start> ::= <int> " " <int>
//! <int>   ::= "0" | "1" | <int> "0"
//! ```
//!
//! Terminals are double-quoted with the escapes `\"`, `\\`, `\n` and `\t`.
//! A repeated left-hand side appends its alternatives to the earlier rule.

use super::{is_valid_name, Expansion, Grammar, GrammarError, Symbol};

pub fn load_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut rules: Vec<(String, Vec<Expansion>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, alts) = parse_rule(line).map_err(|message| GrammarError::Syntax { line: idx + 1, message })?;
        rules.push((name, alts));
    }
    let start = match rules.first() {
        Some((name, _)) => name.clone(),
        None => return Err(GrammarError::Empty),
    };
    Grammar::new(start, rules)
}

pub fn serialize_grammar(g: &Grammar) -> String {
    let mut out = String::new();
    for (name, alts) in g.rules() {
        out.push('<');
        out.push_str(name);
        out.push_str("> ::= ");
        let rendered: Vec<String> = alts
            .iter()
            .map(|alt| alt.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        out.push_str(&rendered.join(" | "));
        out.push('\n');
    }
    out
}

pub(crate) fn quote_terminal(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

struct Cursor<'a> {
    rest: &'a str,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        let trimmed = self.rest.trim_start();
        self.col += self.rest[..self.rest.len() - trimmed.len()].chars().count();
        self.rest = trimmed;
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest.chars().next()?;
        self.rest = &self.rest[c.len_utf8()..];
        self.col += 1;
        Some(c)
    }

    fn peek(&self) -> Option<char> {
        self.rest.chars().next()
    }

    fn nonterminal(&mut self) -> Result<String, String> {
        let at = self.col;
        self.bump();
        let end = self
            .rest
            .find('>')
            .ok_or_else(|| format!("column {at}: unterminated nonterminal"))?;
        let name = &self.rest[..end];
        if !is_valid_name(name) {
            return Err(format!("column {at}: invalid nonterminal name {name:?}"));
        }
        let name = name.to_string();
        for _ in 0..=name.chars().count() {
            self.bump();
        }
        Ok(name)
    }

    fn terminal(&mut self) -> Result<String, String> {
        let at = self.col;
        self.bump();
        let mut text = String::new();
        loop {
            match self.bump() {
                None => return Err(format!("column {at}: unterminated terminal")),
                Some('"') => return Ok(text),
                Some('\\') => match self.bump() {
                    Some('"') => text.push('"'),
                    Some('\\') => text.push('\\'),
                    Some('n') => text.push('\n'),
                    Some('t') => text.push('\t'),
                    Some(other) => return Err(format!("column {}: unknown escape \\{other}", self.col - 1)),
                    None => return Err(format!("column {at}: unterminated terminal")),
                },
                Some(c) => text.push(c),
            }
        }
    }
}

fn parse_rule(line: &str) -> Result<(String, Vec<Expansion>), String> {
    let mut cur = Cursor { rest: line, col: 1 };
    if cur.peek() != Some('<') {
        return Err("expected `<name>` at start of rule".into());
    }
    let lhs = cur.nonterminal()?;
    cur.skip_ws();
    if !cur.rest.starts_with("::=") {
        return Err(format!("column {}: expected `::=`", cur.col));
    }
    for _ in 0..3 {
        cur.bump();
    }
    let mut alts = Vec::new();
    let mut current: Expansion = Vec::new();
    loop {
        cur.skip_ws();
        match cur.peek() {
            None => break,
            Some('|') => {
                if current.is_empty() {
                    return Err(format!("column {}: empty alternative", cur.col));
                }
                alts.push(std::mem::take(&mut current));
                cur.bump();
            }
            Some('<') => current.push(Symbol::Nonterminal(cur.nonterminal()?)),
            Some('"') => current.push(Symbol::Terminal(cur.terminal()?)),
            Some(other) => return Err(format!("column {}: unexpected character {other:?}", cur.col)),
        }
    }
    if current.is_empty() {
        return Err(format!("column {}: empty alternative", cur.col));
    }
    alts.push(current);
    Ok((lhs, alts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_grammar_loads() {
        let g = load_grammar(r#"<start> ::= "0" | "1""#).unwrap();
        assert_eq!(g.rule_count(), 1);
        assert_eq!(g.alternatives("start").unwrap().len(), 2);
        assert_eq!(g.start(), "start");
    }

    #[test]
    fn digit_grammar_round_trips() {
        let g = load_grammar(r#"<start> ::= "0" | "1""#).unwrap();
        let text = serialize_grammar(&g);
        assert_eq!(text, "<start> ::= \"0\" | \"1\"\n");
        assert_eq!(load_grammar(&text).unwrap(), g);
    }

    #[test]
    fn escaped_quote_preserved() {
        let g = load_grammar(r#"<start> ::= "\"" "\\" "\n\t""#).unwrap();
        assert_eq!(
            g.alternatives("start").unwrap()[0],
            vec![Symbol::terminal("\""), Symbol::terminal("\\"), Symbol::terminal("\n\t")]
        );
        let text = serialize_grammar(&g);
        assert!(text.contains(r#""\"""#));
        assert_eq!(load_grammar(&text).unwrap(), g);
    }

    #[test]
    fn comments_blank_lines_and_duplicate_lhs() {
        let src = "# digits\n\n<start> ::= <d>\n<d> ::= \"0\"\n   # more\n<d> ::= \"1\"\n";
        let g = load_grammar(src).unwrap();
        assert_eq!(g.alternatives("d").unwrap().len(), 2);
        assert_eq!(g.alternatives("d").unwrap()[1], vec![Symbol::terminal("1")]);
    }

    #[test]
    fn adjacency_without_whitespace() {
        let g = load_grammar("<s> ::= \"a\"<t>\"c\"\n<t> ::= \"b\"").unwrap();
        assert_eq!(g.alternatives("s").unwrap()[0].len(), 3);
    }

    #[test]
    fn syntax_errors_are_line_addressed() {
        for (src, line) in [
            ("<s> ::= \"a\"\n<s> := \"b\"", 2),
            ("# c\n<s> ::= \"a", 2),
            ("<s> ::= \"a\" |", 1),
            ("<s> ::= | \"a\"", 1),
            ("<s> ::= \"\\q\"", 1),
            ("s ::= \"a\"", 1),
            ("<s> ::= <9x>", 1),
            ("<s> ::= a", 1),
        ] {
            match load_grammar(src) {
                Err(GrammarError::Syntax { line: l, .. }) => assert_eq!(l, line, "{src:?}"),
                other => panic!("{src:?}: expected syntax error, got {other:?}"),
            }
        }
    }

    #[test]
    fn empty_text_is_an_error() {
        assert_eq!(load_grammar("# nothing\n\n"), Err(GrammarError::Empty));
    }
}
