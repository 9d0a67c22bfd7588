//! Concrete syntax for terms, meta-terms and rule files.
//!
//! ```text
//! term  ::= rec X. term | [x, y] term | ident | ident(term, ..) | _|_
//! file  ::= { sym f/2 ; | rule name: term -> term ; | term name = term ; }
//! ```
//! Uppercase identifiers are meta-variables (or `rec` variables when bound by
//! `rec`); lowercase identifiers are variables when bound by an abstraction and
//! constants otherwise.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::term::{name, Builder, Name, Node, Term, HOLE};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Sym(&'static str),
    Hole,
    Eof,
}

#[derive(Debug, Clone)]
struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let here = (line, col);
        let adv = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            adv(1, &mut i, &mut col);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let push = |out: &mut Vec<Lexed>, tok: Tok| out.push(Lexed { tok, line: here.0, col: here.1 });
        if c == '_' && chars.get(i + 1) == Some(&'|') && chars.get(i + 2) == Some(&'_') {
            push(&mut out, Tok::Hole);
            adv(3, &mut i, &mut col);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            push(&mut out, Tok::Sym("->"));
            adv(2, &mut i, &mut col);
            continue;
        }
        let single = match c {
            '(' => Some("("),
            ')' => Some(")"),
            '[' => Some("["),
            ']' => Some("]"),
            ',' => Some(","),
            '.' => Some("."),
            ';' => Some(";"),
            ':' => Some(":"),
            '/' => Some("/"),
            '=' => Some("="),
            '{' => Some("{"),
            '}' => Some("}"),
            '@' => Some("@"),
            _ => None,
        };
        if let Some(s) = single {
            push(&mut out, Tok::Sym(s));
            adv(1, &mut i, &mut col);
            continue;
        }
        if c.is_ascii_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            while i < chars.len() && chars[i] == '\'' {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            push(&mut out, Tok::Ident(word));
            continue;
        }
        return Err(ParseError { line, col, msg: format!("unexpected character `{c}`") });
    }
    out.push(Lexed { tok: Tok::Eof, line, col });
    Ok(out)
}

fn is_upper(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

#[derive(Debug, Clone)]
enum Ast {
    Ident { name: String, args: Option<Vec<Ast>>, line: usize, col: usize },
    Abs(Vec<String>, Box<Ast>),
    Rec { var: String, body: Box<Ast>, line: usize, col: usize },
    Hole,
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, s: &'static str) -> bool {
        if *self.peek() == Tok::Sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &'static str) -> Result<(), ParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected identifier, found {}", describe(&t))),
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Hole => {
                self.bump();
                Ok(Ast::Hole)
            }
            Tok::Sym("[") => {
                self.bump();
                let mut xs = vec![self.ident()?];
                while self.eat(",") {
                    xs.push(self.ident()?);
                }
                self.expect("]")?;
                for x in &xs {
                    if is_upper(x) {
                        return self.err(format!("binder `{x}` must be lowercase"));
                    }
                }
                let body = self.term()?;
                Ok(Ast::Abs(xs, Box::new(body)))
            }
            Tok::Ident(w) if w == "rec" => {
                self.bump();
                let var = self.ident()?;
                if !is_upper(&var) {
                    return self.err(format!("rec variable `{var}` must be uppercase"));
                }
                self.expect(".")?;
                let body = self.term()?;
                Ok(Ast::Rec { var, body: Box::new(body), line, col })
            }
            Tok::Ident(w) => {
                self.bump();
                let args = if self.eat("(") {
                    let mut v = Vec::new();
                    if !self.eat(")") {
                        v.push(self.term()?);
                        while self.eat(",") {
                            v.push(self.term()?);
                        }
                        self.expect(")")?;
                    }
                    Some(v)
                } else {
                    None
                };
                Ok(Ast::Ident { name: w, args, line, col })
            }
            t => self.err(format!("expected a term, found {}", describe(&t))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Hole => format!("`{HOLE}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

struct Lower<'a> {
    b: Builder,
    bound: Vec<String>,
    recs: Vec<(String, usize)>,
    free: &'a HashSet<String>,
}

impl Lower<'_> {
    fn build(&mut self, ast: &Ast, slot: Option<usize>) -> Result<usize, ParseError> {
        let place = |b: &mut Builder, n: Node| match slot {
            Some(s) => {
                b.set(s, n);
                s
            }
            None => b.add(n),
        };
        match ast {
            Ast::Hole => Ok(place(&mut self.b, Node::Hole)),
            Ast::Abs(xs, body) => {
                // [x, y] t abbreviates [x][y] t
                let n = xs.len();
                for x in xs {
                    self.bound.push(x.clone());
                }
                let mut cur = self.build(body, None)?;
                for (k, x) in xs.iter().enumerate().rev() {
                    self.bound.pop();
                    let node = Node::Abs(name(x), cur);
                    cur = if k == 0 { place(&mut self.b, node) } else { self.b.add(node) };
                }
                debug_assert!(n > 0);
                Ok(cur)
            }
            Ast::Rec { var, body, line, col } => {
                let s = match slot {
                    Some(s) => s,
                    None => self.b.reserve(),
                };
                self.recs.push((var.clone(), s));
                let r = self.build(body, Some(s));
                self.recs.pop();
                let r = r?;
                if r != s {
                    return Err(ParseError {
                        line: *line,
                        col: *col,
                        msg: format!("body of `rec {var}` must not be a bare rec variable"),
                    });
                }
                Ok(s)
            }
            Ast::Ident { name: w, args, line, col } => {
                if is_upper(w) {
                    if let Some(&(_, id)) = self.recs.iter().rev().find(|(v, _)| v == w) {
                        if args.is_some() {
                            return Err(ParseError {
                                line: *line,
                                col: *col,
                                msg: format!("rec variable `{w}` cannot take arguments"),
                            });
                        }
                        if slot.is_some() {
                            return Err(ParseError {
                                line: *line,
                                col: *col,
                                msg: format!("degenerate cycle through `{w}`"),
                            });
                        }
                        return Ok(id);
                    }
                    let mut ids = Vec::new();
                    for a in args.iter().flatten() {
                        ids.push(self.build(a, None)?);
                    }
                    return Ok(place(&mut self.b, Node::Meta(name(w), ids)));
                }
                match args {
                    None if self.bound.iter().any(|x| x == w) || self.free.contains(w) => {
                        Ok(place(&mut self.b, Node::Var(name(w))))
                    }
                    _ => {
                        let mut ids = Vec::new();
                        for a in args.iter().flatten() {
                            ids.push(self.build(a, None)?);
                        }
                        Ok(place(&mut self.b, Node::App(name(w), ids)))
                    }
                }
            }
        }
    }
}

fn lower(ast: &Ast, free: &HashSet<String>) -> Result<Term, ParseError> {
    let mut l = Lower { b: Builder::new(), bound: Vec::new(), recs: Vec::new(), free };
    let r = l.build(ast, None)?;
    Ok(l.b.finish_raw(r))
}

/// Parse a (meta-)term; unbound lowercase identifiers are constants.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    parse_term_with_free(src, &[])
}

/// Parse a term treating the listed lowercase names as free variables.
pub fn parse_term_with_free(src: &str, free: &[&str]) -> Result<Term, ParseError> {
    let free: HashSet<String> = free.iter().map(|s| s.to_string()).collect();
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let ast = p.term()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("trailing input {}", describe(p.peek())));
    }
    lower(&ast, &free)
}

/// Items of a rule file, in source order.
#[derive(Debug, Clone)]
pub enum Item {
    Sym { name: Name, arity: usize, line: usize },
    Rule { name: Name, lhs: Term, rhs: Term, line: usize },
    Term { name: Name, term: Term, line: usize },
}

pub fn parse_file(src: &str) -> Result<Vec<Item>, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let free = HashSet::new();
    let mut items = Vec::new();
    while *p.peek() != Tok::Eof {
        let (line, _) = p.here();
        let kw = p.ident()?;
        match kw.as_str() {
            "sym" => {
                let f = p.ident()?;
                p.expect("/")?;
                let k = p.ident()?;
                let arity = match k.parse::<usize>() {
                    Ok(a) => a,
                    Err(_) => return p.err(format!("arity `{k}` is not a number")),
                };
                p.expect(";")?;
                items.push(Item::Sym { name: name(&f), arity, line });
            }
            "rule" => {
                let n = p.ident()?;
                p.expect(":")?;
                let lhs = p.term()?;
                p.expect("->")?;
                let rhs = p.term()?;
                p.expect(";")?;
                items.push(Item::Rule {
                    name: name(&n),
                    lhs: lower(&lhs, &free)?,
                    rhs: lower(&rhs, &free)?,
                    line,
                });
            }
            "term" => {
                let n = p.ident()?;
                p.expect("=")?;
                let t = p.term()?;
                p.expect(";")?;
                items.push(Item::Term { name: name(&n), term: lower(&t, &free)?, line });
            }
            other => {
                return Err(ParseError {
                    line,
                    col: 1,
                    msg: format!("expected `sym`, `rule` or `term`, found `{other}`"),
                })
            }
        }
    }
    Ok(items)
}

/// One `stage { redexes @1, @1.0.1 }` entry of a development script; `all` selects every redex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageSpec {
    Positions(Vec<crate::Position>),
    All,
}

pub fn parse_stage_script(src: &str) -> Result<Vec<StageSpec>, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let mut out = Vec::new();
    while *p.peek() != Tok::Eof {
        let kw = p.ident()?;
        if kw != "stage" {
            return p.err(format!("expected `stage`, found `{kw}`"));
        }
        p.expect("{")?;
        let kw = p.ident()?;
        match kw.as_str() {
            "all" => {
                p.expect("}")?;
                out.push(StageSpec::All);
                continue;
            }
            "redexes" => {}
            _ => return p.err(format!("expected `redexes` or `all`, found `{kw}`")),
        }
        let mut ps = Vec::new();
        if !p.eat("}") {
            loop {
                ps.push(parse_position_tokens(&mut p)?);
                if p.eat("}") {
                    break;
                }
                p.expect(",")?;
            }
        }
        out.push(StageSpec::Positions(ps));
    }
    Ok(out)
}

fn parse_position_tokens(p: &mut Parser) -> Result<crate::Position, ParseError> {
    p.expect("@")?;
    let mut text = String::new();
    loop {
        match p.peek().clone() {
            Tok::Ident(w) if w.chars().all(|c| c.is_ascii_digit()) => {
                p.bump();
                text.push_str(&w);
                if *p.peek() == Tok::Sym(".") {
                    p.bump();
                    text.push('.');
                    continue;
                }
                break;
            }
            _ => break,
        }
    }
    match text.parse::<crate::Position>() {
        Ok(pos) => Ok(pos),
        Err(e) => p.err(e.to_string()),
    }
}

/// Prints with `rec` binders at cycle entries; names are the graph's own.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut pr = Printer { t: self, stack: Vec::new(), avoid: HashSet::new() };
        for (z, _) in self.metas() {
            pr.avoid.insert(z.to_string());
        }
        for (s, _) in self.symbols() {
            pr.avoid.insert(s.to_string());
        }
        let s = pr.print(0);
        write!(f, "{s}")
    }
}

struct Printer<'a> {
    t: &'a Term,
    stack: Vec<(usize, Option<String>)>,
    avoid: HashSet<String>,
}

impl Printer<'_> {
    fn print(&mut self, n: usize) -> String {
        if let Some(k) = self.stack.iter().position(|(m, _)| *m == n) {
            if let Some(x) = &self.stack[k].1 {
                return x.clone();
            }
            let x = self.rec_name(n);
            self.stack[k].1 = Some(x.clone());
            return x;
        }
        self.stack.push((n, None));
        let body = match self.t.node(n) {
            Node::Var(x) => x.to_string(),
            Node::Hole => HOLE.to_string(),
            Node::Abs(x, b) => format!("[{x}]{}", self.print(*b)),
            Node::App(s, cs) | Node::Meta(s, cs) => {
                if cs.is_empty() {
                    s.to_string()
                } else {
                    let args: Vec<String> = cs.iter().map(|&c| self.print(c)).collect();
                    format!("{s}({})", args.join(", "))
                }
            }
        };
        let (_, recname) = self.stack.pop().unwrap();
        match recname {
            Some(x) => format!("rec {x}. {body}"),
            None => body,
        }
    }

    fn rec_name(&self, n: usize) -> String {
        let base = match self.t.node(n) {
            Node::App(s, _) | Node::Meta(s, _) => s
                .chars()
                .find(|c| c.is_ascii_alphabetic())
                .map(|c| c.to_ascii_uppercase().to_string())
                .unwrap_or_else(|| "X".to_string()),
            _ => "W".to_string(),
        };
        let used: HashSet<&str> =
            self.stack.iter().filter_map(|(_, x)| x.as_deref()).collect();
        (0usize..)
            .map(|k| if k == 0 { base.clone() } else { format!("{base}{k}") })
            .find(|c| !used.contains(c.as_str()) && !self.avoid.contains(c))
            .unwrap()
    }
}

/// Parse every `term` item of a file into a lookup table.
pub fn named_terms(items: &[Item]) -> HashMap<String, Term> {
    items
        .iter()
        .filter_map(|it| match it {
            Item::Term { name, term, .. } => Some((name.to_string(), term.clone())),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_simple() {
        for src in ["f([x]g(x), a)", "rec C. cons(a, C)", "[x][y]Z(x, f(y))", "g(g(_|_))"] {
            let t = parse_term(src).unwrap();
            assert_eq!(t.to_string(), src);
        }
    }

    #[test]
    fn constants_and_vars() {
        let t = parse_term("[x]f(x, y)").unwrap();
        match t.node(t.walk(0, &[0, 2]).unwrap()) {
            Node::App(c, cs) => assert!(&**c == "y" && cs.is_empty()),
            n => panic!("{n:?}"),
        }
        let t = parse_term_with_free("g(x)", &["x"]).unwrap();
        assert_eq!(t.free_vars(), &[name("x")]);
    }

    #[test]
    fn errors_carry_location() {
        let e = parse_term("f(a,").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(parse_term("rec X. X").is_err());
        assert!(parse_term("f(a) b").is_err());
    }

    #[test]
    fn file_items() {
        let items = parse_file("sym f/2; rule r: f([x]Z(x), Z') -> Z(Z'); term s = f([x]x, a);").unwrap();
        assert_eq!(items.len(), 3);
    }

    #[test]
    fn stage_script() {
        let st = parse_stage_script("stage { redexes @1.0.1, @ }\nstage { redexes }\nstage { all }").unwrap();
        assert_eq!(
            st,
            vec![
                StageSpec::Positions(vec![crate::Position::from_steps(&[1, 0, 1]), crate::Position::root()]),
                StageSpec::Positions(vec![]),
                StageSpec::All
            ]
        );
    }
}
