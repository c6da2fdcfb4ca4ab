//! Minimal s-expression reader with source positions.

use super::PddlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexpr {
    Atom(String, Pos),
    List(Vec<Sexpr>, Pos),
}

impl Sexpr {
    pub fn pos(&self) -> Pos {
        match self {
            Sexpr::Atom(_, p) | Sexpr::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(s, _) => Some(s),
            Sexpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items, _) => Some(items),
            Sexpr::Atom(..) => None,
        }
    }

    /// Head keyword of a list, e.g. `and` for `(and ...)`.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(Sexpr::as_atom)
    }

    pub fn expect_atom(&self, expected: &str) -> Result<&str, PddlError> {
        self.as_atom().ok_or_else(|| PddlError::syntax(self.pos(), expected))
    }

    pub fn expect_list(&self, expected: &str) -> Result<&[Sexpr], PddlError> {
        self.as_list().ok_or_else(|| PddlError::syntax(self.pos(), expected))
    }
}

/// Reads every top-level expression in `text`. Symbols are lower-cased since
/// PDDL is case-insensitive.
pub fn read_all(text: &str) -> Result<Vec<Sexpr>, PddlError> {
    let mut stack: Vec<(Vec<Sexpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut line = 1;
    let mut col = 0;
    let mut chars = text.chars().peekable();
    let mut token = String::new();
    let mut token_pos = Pos { line: 1, col: 1 };

    fn flush(token: &mut String, pos: Pos, stack: &mut [(Vec<Sexpr>, Pos)], top: &mut Vec<Sexpr>) {
        if token.is_empty() {
            return;
        }
        let atom = Sexpr::Atom(std::mem::take(token).to_lowercase(), pos);
        match stack.last_mut() {
            Some((items, _)) => items.push(atom),
            None => top.push(atom),
        }
    }

    while let Some(c) = chars.next() {
        col += 1;
        let here = Pos { line, col };
        match c {
            '\n' => {
                flush(&mut token, token_pos, &mut stack, &mut top);
                line += 1;
                col = 0;
            }
            ';' => {
                flush(&mut token, token_pos, &mut stack, &mut top);
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                flush(&mut token, token_pos, &mut stack, &mut top);
                stack.push((Vec::new(), here));
            }
            ')' => {
                flush(&mut token, token_pos, &mut stack, &mut top);
                let (items, pos) = stack
                    .pop()
                    .ok_or_else(|| PddlError::syntax(here, "matching '(' before ')'"))?;
                let list = Sexpr::List(items, pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            c if c.is_whitespace() => flush(&mut token, token_pos, &mut stack, &mut top),
            c => {
                if token.is_empty() {
                    token_pos = here;
                }
                token.push(c);
            }
        }
    }
    flush(&mut token, token_pos, &mut stack, &mut top);
    if let Some((_, pos)) = stack.last() {
        return Err(PddlError::syntax(
            Pos { line, col: col + 1 },
            &format!("')' closing the list opened at {}:{}", pos.line, pos.col),
        ));
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_and_comments() {
        let exprs = read_all("; header\n(define (Domain X) ; trailing\n  (:requirements :strips))").unwrap();
        assert_eq!(exprs.len(), 1);
        let items = exprs[0].as_list().unwrap();
        assert_eq!(items[0].as_atom(), Some("define"));
        assert_eq!(items[1].as_list().unwrap()[1].as_atom(), Some("x"));
        assert_eq!(items[2].pos(), Pos { line: 3, col: 3 });
    }

    #[test]
    fn unbalanced_input_reports_position() {
        match read_all("(a (b)").unwrap_err() {
            PddlError::Syntax { line, .. } => assert_eq!(line, 1),
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(read_all("a)"), Err(PddlError::Syntax { line: 1, col: 2, .. })));
    }
}
