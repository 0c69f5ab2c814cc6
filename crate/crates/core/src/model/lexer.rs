use super::ModelError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Assign,
    Prime,
    Str(String),
    Sym(String),
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn is_sym_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '(' | ')' | '[' | ']' | ',' | '\'' | '"' | ';')
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, ModelError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok| {
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            })
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {}
            ';' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '(' => push(Tok::LParen),
            ')' => push(Tok::RParen),
            '[' => push(Tok::LBracket),
            ']' => push(Tok::RBracket),
            ',' => push(Tok::Comma),
            '\'' => push(Tok::Prime),
            ':' if chars.get(i + 1) == Some(&'=') => {
                push(Tok::Assign);
                i += 2;
                col += 2;
                continue;
            }
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None | Some('\n') => {
                            return Err(ModelError::Syntax {
                                line: tl,
                                col: tc,
                                msg: "unterminated string".into(),
                            })
                        }
                        Some('"') => break,
                        Some('\\') if chars.get(j + 1).is_some() => {
                            s.push(chars[j + 1]);
                            j += 2;
                        }
                        Some(ch) => {
                            s.push(*ch);
                            j += 1;
                        }
                    }
                }
                push(Tok::Str(s));
                col += j + 1 - i;
                i = j + 1;
                continue;
            }
            _ => {
                let mut j = i;
                while j < chars.len() && is_sym_char(chars[j]) {
                    j += 1;
                }
                push(Tok::Sym(chars[i..j].iter().collect()));
                col += j - i;
                i = j;
                continue;
            }
        }
        i += 1;
        col += 1;
    }
    Ok(out)
}
