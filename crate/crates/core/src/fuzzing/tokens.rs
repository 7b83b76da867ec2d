//! Splitting a derived command line into argv tokens and back.
//!
//! Tokens are separated by unquoted whitespace. A `"` opens a group that
//! may contain whitespace; inside a group `\` escapes the next character.
//! Outside groups a backslash is an ordinary character. An unterminated
//! group runs to the end of the line.

pub fn tokenize(line: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut in_token = false;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                in_token = true;
                while let Some(g) = chars.next() {
                    match g {
                        '"' => break,
                        '\\' => {
                            if let Some(escaped) = chars.next() {
                                current.push(escaped);
                            }
                        }
                        other => current.push(other),
                    }
                }
            }
            c if c.is_whitespace() => {
                if in_token {
                    tokens.push(std::mem::take(&mut current));
                    in_token = false;
                }
            }
            c => {
                in_token = true;
                current.push(c);
            }
        }
    }
    if in_token {
        tokens.push(current);
    }
    tokens
}

/// Inverse of [`tokenize`]: `tokenize(&detokenize(t)) == t` for every token list.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(|t| quote_token(t.as_ref())).collect::<Vec<_>>().join(" ")
}

fn quote_token(token: &str) -> String {
    if !token.is_empty() && !token.chars().any(|c| c == '"' || c.is_whitespace()) {
        return token.to_string();
    }
    let mut out = String::with_capacity(token.len() + 2);
    out.push('"');
    for c in token.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}
