use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// First-order term.
///
/// Lowercase identifiers without an argument list are variables. Everything
/// else is an application; `c()` and identifiers that start with an uppercase
/// letter or a digit (`Nil`, `0`) are constants.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Equation {
    pub lhs: Term,
    pub rhs: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("term syntax error at column {column}: {reason}")]
pub struct TermError {
    pub column: usize,
    pub reason: String,
}

pub type Substitution = BTreeMap<String, Term>;

fn is_var_name(name: &str) -> bool {
    name.starts_with(|c: char| c.is_lowercase() || c == '_')
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn app(head: impl Into<String>, args: Vec<Term>) -> Self {
        Term::App(head.into(), args)
    }

    pub fn constant(head: impl Into<String>) -> Self {
        Term::App(head.into(), Vec::new())
    }

    pub fn head(&self) -> &str {
        match self {
            Term::Var(v) => v,
            Term::App(h, _) => h,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Var(_) => &[],
            Term::App(_, args) => args,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn size(&self) -> usize {
        1 + self.args().iter().map(Term::size).sum::<usize>()
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Var(v) => {
                out.insert(v);
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Match `self` as a pattern against `term`, extending `sub`.
    ///
    /// Variables of `term` are rigid: they only unify with pattern variables.
    pub fn matches(&self, term: &Term, sub: &mut Substitution) -> bool {
        match self {
            Term::Var(v) => match sub.get(v) {
                Some(bound) => bound == term,
                None => {
                    sub.insert(v.clone(), term.clone());
                    true
                }
            },
            Term::App(h, args) => match term {
                Term::App(th, targs) if th == h && targs.len() == args.len() => {
                    args.iter().zip(targs).all(|(p, t)| p.matches(t, sub))
                }
                _ => false,
            },
        }
    }

    /// Apply a substitution; unbound variables are left in place.
    pub fn substitute(&self, sub: &Substitution) -> Term {
        match self {
            Term::Var(v) => sub.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::App(h, args) => Term::App(h.clone(), args.iter().map(|a| a.substitute(sub)).collect()),
        }
    }

    /// Rewrite the leftmost-outermost subterm matching `from` into `to`.
    pub fn rewrite_first(&self, from: &Term, to: &Term) -> Option<Term> {
        let mut sub = Substitution::new();
        if from.matches(self, &mut sub) {
            return Some(to.substitute(&sub));
        }
        match self {
            Term::Var(_) => None,
            Term::App(h, args) => args.iter().enumerate().find_map(|(i, a)| {
                a.rewrite_first(from, to).map(|new| {
                    let mut args = args.clone();
                    args[i] = new;
                    Term::App(h.clone(), args)
                })
            }),
        }
    }

    pub fn parse(src: &str) -> Result<Term, TermError> {
        let mut p = Parser { src, pos: 0 };
        let t = p.term()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(t)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::App(h, args) if args.is_empty() => {
                if is_var_name(h) {
                    write!(f, "{h}()")
                } else {
                    f.write_str(h)
                }
            }
            Term::App(h, args) => {
                write!(f, "{h}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl Equation {
    pub fn new(lhs: Term, rhs: Term) -> Self {
        Equation { lhs, rhs }
    }

    /// Parse `<term> = <term>`.
    pub fn parse(src: &str) -> Result<Equation, TermError> {
        let mut p = Parser { src, pos: 0 };
        let lhs = p.term()?;
        p.skip_ws();
        if !p.eat('=') {
            return Err(p.error("expected '='"));
        }
        let rhs = p.term()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(Equation { lhs, rhs })
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> TermError {
        TermError { column: self.pos + 1, reason: reason.to_string() }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<&str, TermError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !is_ident_char(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        if start == self.pos {
            return Err(self.error("expected identifier"));
        }
        Ok(&self.src[start..self.pos])
    }

    fn term(&mut self) -> Result<Term, TermError> {
        let name = self.ident()?.to_string();
        if !self.eat('(') {
            return Ok(if is_var_name(&name) { Term::Var(name) } else { Term::App(name, vec![]) });
        }
        let mut args = Vec::new();
        if self.eat(')') {
            return Ok(Term::App(name, args));
        }
        loop {
            args.push(self.term()?);
            if self.eat(',') {
                continue;
            }
            if self.eat(')') {
                return Ok(Term::App(name, args));
            }
            return Err(self.error("expected ',' or ')'"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Term {
        Term::parse(s).unwrap()
    }

    #[test]
    fn parses_variables_and_constants() {
        assert_eq!(t("x"), Term::var("x"));
        assert_eq!(t("Nil"), Term::constant("Nil"));
        assert_eq!(t("0"), Term::constant("0"));
        assert_eq!(t("c()"), Term::constant("c"));
        assert_eq!(t("add(x, s(0))"), Term::app("add", vec![Term::var("x"), Term::app("s", vec![Term::constant("0")])]));
    }

    #[test]
    fn display_round_trips() {
        for s in ["add(x, s(0))", "c()", "Nil", "op(op(a, b), inv(E))"] {
            assert_eq!(t(s).to_string(), s);
            assert_eq!(t(&t(s).to_string()), t(s));
        }
    }

    #[test]
    fn rejects_malformed_terms() {
        assert!(Term::parse("add(x,").is_err());
        assert!(Term::parse("").is_err());
        assert!(Term::parse("f(x) g").is_err());
        assert!(Equation::parse("f(x)").is_err());
    }

    #[test]
    fn goal_variables_are_rigid() {
        let mut sub = Substitution::new();
        assert!(!t("s(y)").matches(&t("a"), &mut sub));
        let mut sub = Substitution::new();
        assert!(t("add(x, x)").matches(&t("add(a, a)"), &mut sub));
        let mut sub = Substitution::new();
        assert!(!t("add(x, x)").matches(&t("add(a, b)"), &mut sub));
    }

    #[test]
    fn rewrites_leftmost_outermost() {
        let from = t("add(x, 0)");
        let to = t("x");
        let goal = t("s(add(add(a, 0), 0))");
        // the outer redex wins over the inner one
        assert_eq!(goal.rewrite_first(&from, &to).unwrap(), t("s(add(a, 0))"));
        let goal = t("f(add(a, 0), add(b, 0))");
        assert_eq!(goal.rewrite_first(&from, &to).unwrap(), t("f(a, add(b, 0))"));
        assert!(t("f(a)").rewrite_first(&from, &to).is_none());
    }
}
