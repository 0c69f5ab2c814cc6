use super::TaskError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    FStr(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Colon,
    Eq,
    Newline,
    Indent,
    Dedent,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> TaskError {
    TaskError::Syntax {
        line,
        col,
        msg: msg.into(),
    }
}

/// Python-style tokenization: physical lines inside brackets are joined,
/// leading whitespace produces `Indent`/`Dedent`.
pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, TaskError> {
    let mut out: Vec<Token> = Vec::new();
    let mut indents = vec![0usize];
    let mut depth = 0usize;
    let mut last_line = 1;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        if depth == 0 {
            while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t') {
                if chars[i] == '\t' {
                    return Err(syntax(line, i + 1, "tabs are not allowed for indentation"));
                }
                i += 1;
            }
            if i == chars.len() || chars[i] == '#' {
                continue;
            }
            let width = i;
            let top = *indents.last().unwrap();
            if width > top {
                indents.push(width);
                out.push(Token {
                    tok: Tok::Indent,
                    line,
                    col: 1,
                });
            } else {
                while width < *indents.last().unwrap() {
                    indents.pop();
                    out.push(Token {
                        tok: Tok::Dedent,
                        line,
                        col: 1,
                    });
                }
                if width != *indents.last().unwrap() {
                    return Err(syntax(line, 1, "inconsistent indentation"));
                }
            }
        }
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let mut push = |tok| out.push(Token { tok, line, col });
            match c {
                ' ' | '\t' => {}
                '#' => break,
                '(' | '[' => {
                    depth += 1;
                    push(if c == '(' { Tok::LParen } else { Tok::LBracket });
                }
                ')' | ']' => {
                    depth = depth
                        .checked_sub(1)
                        .ok_or_else(|| syntax(line, col, format!("unmatched `{c}`")))?;
                    push(if c == ')' { Tok::RParen } else { Tok::RBracket });
                }
                ',' => push(Tok::Comma),
                '.' => push(Tok::Dot),
                ':' => push(Tok::Colon),
                '=' => push(Tok::Eq),
                '"' | '\'' => {
                    let (s, end) = string(&chars, i, line)?;
                    push(Tok::Str(s));
                    i = end;
                    continue;
                }
                'f' if matches!(chars.get(i + 1), Some('"' | '\'')) => {
                    let (s, end) = string(&chars, i + 1, line)?;
                    push(Tok::FStr(s));
                    i = end;
                    continue;
                }
                c if c.is_ascii_digit() => {
                    let mut j = i;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let s: String = chars[i..j].iter().collect();
                    let n = s
                        .parse()
                        .map_err(|_| syntax(line, col, "integer out of range"))?;
                    push(Tok::Int(n));
                    i = j;
                    continue;
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    push(Tok::Ident(chars[i..j].iter().collect()));
                    i = j;
                    continue;
                }
                other => return Err(syntax(line, col, format!("unexpected character `{other}`"))),
            }
            i += 1;
        }
        if depth == 0 {
            out.push(Token {
                tok: Tok::Newline,
                line,
                col: chars.len() + 1,
            });
        }
        last_line = line;
    }
    if depth != 0 {
        return Err(syntax(last_line, 1, "unclosed bracket at end of file"));
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(Token {
            tok: Tok::Dedent,
            line: last_line + 1,
            col: 1,
        });
    }
    Ok(out)
}

/// Returns the unescaped contents and the index after the closing quote.
fn string(chars: &[char], start: usize, line: usize) -> Result<(String, usize), TaskError> {
    let quote = chars[start];
    let mut s = String::new();
    let mut j = start + 1;
    loop {
        match chars.get(j) {
            None => return Err(syntax(line, start + 1, "unterminated string")),
            Some(c) if *c == quote => return Ok((s, j + 1)),
            Some('\\') => {
                match chars.get(j + 1) {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some(c) => s.push(*c),
                    None => return Err(syntax(line, start + 1, "unterminated string")),
                }
                j += 2;
            }
            Some(c) => {
                s.push(*c);
                j += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Tok> {
        tokenize(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn indentation() {
        let k = kinds("for i in range(2):\n  x = f\"a {i}\"\n\n  # note\ny = 'b'\n");
        assert!(k.contains(&Tok::Indent));
        assert_eq!(k.iter().filter(|t| **t == Tok::Dedent).count(), 1);
        assert!(k.contains(&Tok::FStr("a {i}".into())));
        assert!(k.contains(&Tok::Str("b".into())));
    }

    #[test]
    fn brackets_join_lines() {
        let k = kinds("x = robot.prompt(\"q\",\n    buttons=[\"a\"])\n");
        assert_eq!(k.iter().filter(|t| **t == Tok::Newline).count(), 1);
        assert!(!k.contains(&Tok::Indent));
    }

    #[test]
    fn bad_dedent() {
        assert!(tokenize("a = 1\n    b = 2\n  c = 3\n").is_err());
    }
}
