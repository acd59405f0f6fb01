//! Theory-file corpora.
//!
//! A theory file is line oriented:
//!
//! ```text
//! -- comment
//! theory nat_add
//!
//! axiom add_0: add(x, 0) = x
//! def one_def: One = s(0)
//!
//! lemma add_one: add(a, One) = s(a)
//! proof:
//!   rw one_def
//!   rw add_s
//!   rw add_0
//!   refl
//!
//! lemmas add_simps: add(x, 0) = x
//! ```
//!
//! `lemma` and `theorem` need a proof block (`proof:` followed by indented
//! steps, ended by a blank line, an unindented line or end of file).
//! `lemmas` introduces a pseudo-theorem whose proof block is optional.
//! A corpus manifest lists theory files one per line; the parent directory of
//! each file names its project.

mod split;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{Equation, RuleSet};

pub use split::{split, Fractions, Split, SplitPolicy, SplitSpec, Subset};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {reason}")]
    Parse { path: String, line: usize, reason: String },
    #[error("duplicate theory name `{0}`")]
    DuplicateName(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
    #[error("invalid split spec: {0}")]
    InvalidSpec(String),
    #[error("empty corpus")]
    Empty,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Theorem,
    Definition,
    Axiom,
    Comment,
    Other,
}

/// One top-level item of a theory file, with its verbatim source text
/// (including the proof block for lemmas).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Statement {
    pub kind: StatementKind,
    pub keyword: String,
    pub text: String,
    pub line: usize,
}

impl Statement {
    /// First line of the statement (the header for lemmas).
    pub fn header(&self) -> &str {
        self.text.lines().next().unwrap_or("")
    }

    /// `(id, equation)` when the header is `<keyword> <id>: <lhs> = <rhs>`.
    pub fn rule(&self) -> Option<(String, Equation)> {
        if self.kind == StatementKind::Comment {
            return None;
        }
        let h = parse_header(self.header())?;
        let eq = Equation::parse(h.body).ok()?;
        Some((h.name.to_string(), eq))
    }

    /// Proof steps of a lemma block, trimmed, without the `proof:` line.
    pub fn proof_steps(&self) -> Vec<String> {
        let mut lines = self.text.lines().skip(1);
        match lines.next() {
            Some(l) if l.trim() == "proof:" => lines.map(|l| l.trim().to_string()).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TheoryFile {
    pub name: String,
    pub project: String,
    pub source_path: String,
    /// Line of the `theory <name>` header.
    pub header_line: usize,
    pub statements: Vec<Statement>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Theorem {
    /// `<file>:<statement index>`, unique corpus-wide.
    pub id: String,
    pub name: String,
    pub keyword: String,
    /// The header line, e.g. `lemma add_one: add(a, One) = s(a)`.
    pub statement_text: String,
    pub proof_steps: Vec<String>,
    pub file: String,
    pub project: String,
    pub index_in_file: usize,
    pub line: usize,
    #[serde(default)]
    pub topics: BTreeSet<String>,
}

impl Theorem {
    /// Ground-truth proof with steps joined by newlines.
    pub fn proof_text(&self) -> String {
        self.proof_steps.join("\n")
    }

    pub fn is_pseudo(&self) -> bool {
        self.keyword == "lemmas"
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub files: Vec<TheoryFile>,
    pub theorems: Vec<Theorem>,
}

struct Header<'a> {
    keyword: &'a str,
    name: &'a str,
    body: &'a str,
}

const STATEMENT_KEYWORDS: [&str; 5] = ["axiom", "def", "lemma", "theorem", "lemmas"];

fn parse_header(line: &str) -> Option<Header<'_>> {
    let (keyword, rest) = line.split_once(char::is_whitespace)?;
    if !STATEMENT_KEYWORDS.contains(&keyword) {
        return None;
    }
    let (name, body) = rest.split_once(':')?;
    let name = name.trim();
    if name.is_empty() || name.contains(char::is_whitespace) {
        return None;
    }
    Some(Header { keyword, name, body: body.trim() })
}

/// Parse a statement header such as `lemma foo: add(a, 0) = a` into its
/// keyword, name and goal equation.
pub fn parse_statement(line: &str) -> Result<(String, String, Equation), String> {
    let h = parse_header(line.trim()).ok_or_else(|| format!("not a statement header: {line}"))?;
    let eq = Equation::parse(h.body).map_err(|e| e.to_string())?;
    Ok((h.keyword.to_string(), h.name.to_string(), eq))
}

fn kind_of(keyword: &str) -> StatementKind {
    match keyword {
        "axiom" => StatementKind::Axiom,
        "def" => StatementKind::Definition,
        "lemma" | "theorem" | "lemmas" => StatementKind::Theorem,
        "--" => StatementKind::Comment,
        _ => StatementKind::Other,
    }
}

fn is_indented(line: &str) -> bool {
    line.starts_with(' ') || line.starts_with('\t')
}

/// Parse one theory file's text.
pub fn parse_theory(text: &str, project: &str, source_path: &str) -> Result<TheoryFile, CorpusError> {
    let err = |line: usize, reason: &str| CorpusError::Parse {
        path: source_path.to_string(),
        line,
        reason: reason.to_string(),
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut name: Option<(String, usize)> = None;
    let mut statements = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let lineno = i + 1;
        if line.trim().is_empty() {
            i += 1;
            continue;
        }
        if line.starts_with("--") {
            statements.push(Statement {
                kind: StatementKind::Comment,
                keyword: "--".into(),
                text: line.to_string(),
                line: lineno,
            });
            i += 1;
            continue;
        }
        if is_indented(line) {
            return Err(err(lineno, "indented line outside a proof block"));
        }
        let keyword = line.split_whitespace().next().unwrap_or_default();
        if keyword == "theory" {
            if name.is_some() {
                return Err(err(lineno, "second `theory` header"));
            }
            if !statements.iter().all(|s: &Statement| s.kind == StatementKind::Comment) {
                return Err(err(lineno, "`theory` must be the first non-comment line"));
            }
            let mut parts = line.split_whitespace().skip(1);
            match (parts.next(), parts.next()) {
                (Some(n), None) => name = Some((n.to_string(), lineno)),
                _ => return Err(err(lineno, "expected `theory <name>`")),
            }
            i += 1;
            continue;
        }
        if name.is_none() {
            return Err(err(lineno, "missing `theory <name>` header"));
        }
        let kind = kind_of(keyword);
        if kind == StatementKind::Other {
            statements.push(Statement { kind, keyword: keyword.to_string(), text: line.to_string(), line: lineno });
            i += 1;
            continue;
        }
        let header = parse_header(line).ok_or_else(|| err(lineno, &format!("malformed `{keyword}` statement")))?;
        if header.keyword != "lemmas" {
            Equation::parse(header.body).map_err(|e| err(lineno, &e.to_string()))?;
        }
        let mut block = vec![line];
        i += 1;
        let has_proof = lines.get(i).is_some_and(|l| l.trim_end() == "proof:");
        if has_proof {
            if kind != StatementKind::Theorem {
                return Err(err(i + 1, "proof block after a non-theorem statement"));
            }
            block.push(lines[i].trim_end());
            i += 1;
            let start = i;
            while i < lines.len() && is_indented(lines[i]) && !lines[i].trim().is_empty() {
                block.push(lines[i]);
                i += 1;
            }
            if i == start {
                return Err(err(start, "empty proof block"));
            }
        } else if matches!(keyword, "lemma" | "theorem") {
            return Err(err(lineno, "lemma without proof block"));
        }
        statements.push(Statement { kind, keyword: keyword.to_string(), text: block.join("\n"), line: lineno });
    }
    let (name, header_line) = name.ok_or_else(|| err(lines.len().max(1), "missing `theory <name>` header"))?;
    Ok(TheoryFile { name, project: project.to_string(), source_path: source_path.to_string(), header_line, statements })
}

impl TheoryFile {
    /// Render back to theory-file text; every item lands on its recorded
    /// line so that re-parsing reproduces the same file.
    pub fn to_text(&self) -> String {
        let mut items: Vec<(usize, &str)> = self.statements.iter().map(|s| (s.line, s.text.as_str())).collect();
        let header = format!("theory {}", self.name);
        items.push((self.header_line, &header));
        items.sort_by_key(|(line, _)| *line);
        let mut out = String::new();
        let mut next_line = 1;
        for (line, text) in items {
            while next_line < line {
                out.push('\n');
                next_line += 1;
            }
            out.push_str(text);
            out.push('\n');
            next_line += text.lines().count().max(1);
        }
        out
    }

    /// Rewrite rules declared by the first `upto` statements.
    pub fn rules(&self, upto: usize) -> RuleSet {
        rules_of(&self.statements[..upto.min(self.statements.len())])
    }
}

/// Axioms, definitions and (pseudo-)theorem statements as rewrite rules.
pub fn rules_of(statements: &[Statement]) -> RuleSet {
    let mut rules = RuleSet::new();
    for (id, eq) in statements.iter().filter_map(Statement::rule) {
        rules.insert(id, eq);
    }
    rules
}

impl Corpus {
    pub fn from_files(files: Vec<TheoryFile>) -> Result<Corpus, CorpusError> {
        let mut seen = HashSet::new();
        for f in &files {
            if !seen.insert(f.name.clone()) {
                return Err(CorpusError::DuplicateName(f.name.clone()));
            }
        }
        let theorems = files
            .iter()
            .flat_map(|f| {
                f.statements.iter().enumerate().filter(|(_, s)| s.kind == StatementKind::Theorem).map(move |(idx, s)| {
                    let h = parse_header(s.header()).expect("theorem headers are validated while parsing");
                    Theorem {
                        id: format!("{}:{idx}", f.name),
                        name: h.name.to_string(),
                        keyword: s.keyword.clone(),
                        statement_text: s.header().to_string(),
                        proof_steps: s.proof_steps(),
                        file: f.name.clone(),
                        project: f.project.clone(),
                        index_in_file: idx,
                        line: s.line,
                        topics: BTreeSet::new(),
                    }
                })
            })
            .collect();
        Ok(Corpus { files, theorems })
    }

    pub fn is_empty(&self) -> bool {
        self.theorems.is_empty()
    }

    pub fn file(&self, name: &str) -> Option<&TheoryFile> {
        self.files.iter().find(|f| f.name == name)
    }

    pub fn theorem(&self, id: &str) -> Option<&Theorem> {
        self.theorems.iter().find(|t| t.id == id)
    }

    pub fn index(&self) -> BTreeMap<&str, &Theorem> {
        self.theorems.iter().map(|t| (t.id.as_str(), t)).collect()
    }

    /// Statements of the theorem's file strictly before it, oldest first.
    pub fn preceding_statements(&self, thm: &Theorem) -> &[Statement] {
        match self.file(&thm.file) {
            Some(f) => &f.statements[..thm.index_in_file.min(f.statements.len())],
            None => &[],
        }
    }

    /// Theory text a checker loads before checking `thm`: the header and
    /// every statement before it. The theorem's own proof is never included.
    pub fn theory_context(&self, thm: &Theorem) -> String {
        let mut out = format!("theory {}\n", self.file(&thm.file).map(|f| f.name.as_str()).unwrap_or(&thm.file));
        for s in self.preceding_statements(thm) {
            out.push('\n');
            out.push_str(&s.text);
            out.push('\n');
        }
        out
    }

    /// Attach project-level topics to every theorem.
    pub fn assign_topics(&mut self, topics: &BTreeMap<String, BTreeSet<String>>) {
        for t in &mut self.theorems {
            t.topics = topics.get(&t.project).cloned().unwrap_or_default();
        }
    }

    /// theorem id → topics, for theorems with at least one topic.
    pub fn topic_map(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.theorems.iter().filter(|t| !t.topics.is_empty()).map(|t| (t.id.clone(), t.topics.clone())).collect()
    }
}

/// Drop pseudo-theorems (keyword `lemmas`). Files and ids are untouched.
pub fn filter_pseudo_theorems(corpus: &Corpus) -> Corpus {
    Corpus { files: corpus.files.clone(), theorems: corpus.theorems.iter().filter(|t| !t.is_pseudo()).cloned().collect() }
}

fn project_of(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Parse theory files; each file's project is its parent directory name.
pub fn parse_corpus<P: AsRef<Path> + Sync>(paths: &[P]) -> Result<Corpus, CorpusError> {
    let files = paths
        .par_iter()
        .map(|p| {
            let p = p.as_ref();
            let text = fs::read_to_string(p).map_err(|source| CorpusError::Io { path: p.display().to_string(), source })?;
            parse_theory(&text, &project_of(p), &p.display().to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Corpus::from_files(files)
}

fn manifest_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Read a corpus manifest; relative entries resolve against its directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(manifest_lines(&text).map(|l| base.join(l)).collect())
}

pub fn load_corpus(manifest: &Path) -> Result<Corpus, CorpusError> {
    parse_corpus(&read_manifest(manifest)?)
}

/// Read a `project: topic, topic` file.
pub fn read_topics(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (project, topics) = line.split_once(':').ok_or_else(|| CorpusError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            reason: "expected `project: topic, ...`".into(),
        })?;
        let set: BTreeSet<String> = topics.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect();
        out.entry(project.trim().to_string()).or_insert_with(BTreeSet::new).extend(set);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "theory small\n\naxiom add0: add(x, 0) = x\n\nlemma l1: add(a, 0) = a\nproof:\n  rw add0\n  refl\n";

    #[test]
    fn smallest_file() {
        let f = parse_theory(SMALL, "p", "p/small.thy").unwrap();
        let c = Corpus::from_files(vec![f]).unwrap();
        assert_eq!(c.files.len(), 1);
        assert_eq!(c.files[0].statements.len(), 2);
        assert_eq!(c.theorems.len(), 1);
        let t = &c.theorems[0];
        assert_eq!(t.id, "small:1");
        assert_eq!(t.statement_text, "lemma l1: add(a, 0) = a");
        assert_eq!(t.proof_steps, vec!["rw add0", "refl"]);
        assert_eq!(t.line, 5);
        assert_eq!(c.files[0].statements[1].line, 5);
    }

    #[test]
    fn empty_file_list() {
        let c = parse_corpus::<PathBuf>(&[]).unwrap();
        assert!(c.files.is_empty() && c.theorems.is_empty());
    }

    #[test]
    fn round_trips_through_text() {
        let src = "-- head comment\ntheory t\naxiom a1: f(x) = x\n-- inline\n\n\nlemma l: f(f(a)) = a\nproof:\n  rw a1\n  rw a1\n  refl\nlemmas ls: f(x) = x\nnotation foo\n";
        let f = parse_theory(src, "p", "t.thy").unwrap();
        let again = parse_theory(&f.to_text(), "p", "t.thy").unwrap();
        assert_eq!(f, again);
        assert_eq!(f.statements.iter().map(|s| s.kind).collect::<Vec<_>>(), vec![
            StatementKind::Comment,
            StatementKind::Axiom,
            StatementKind::Comment,
            StatementKind::Theorem,
            StatementKind::Theorem,
            StatementKind::Other
        ]);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let bad = [
            ("axiom a: f(x) = x\n", 1, "missing"),
            ("theory t\nlemma l: f(a) = a\n", 2, "without proof"),
            ("theory t\nlemma l: f(a) = a\nproof:\n\n", 3, "empty proof"),
            ("theory t\n  rw x\n", 2, "indented"),
            ("theory t\naxiom a: f(x\n", 2, "term syntax"),
            ("theory t\ntheory u\n", 2, "second"),
        ];
        for (src, line, reason) in bad {
            match parse_theory(src, "p", "x.thy") {
                Err(CorpusError::Parse { line: l, reason: r, .. }) => {
                    assert_eq!(l, line, "{src:?}");
                    assert!(r.contains(reason), "{r} / {reason}");
                }
                other => panic!("{src:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_theory_names() {
        let a = parse_theory(SMALL, "p", "a.thy").unwrap();
        let b = parse_theory(SMALL, "q", "b.thy").unwrap();
        assert!(matches!(Corpus::from_files(vec![a, b]), Err(CorpusError::DuplicateName(n)) if n == "small"));
    }

    #[test]
    fn filter_removes_only_pseudo_theorems() {
        let src = "theory t\naxiom a1: f(x) = x\nlemmas ls: f(x) = x\nlemma l: f(a) = a\nproof:\n  rw a1\n  refl\n";
        let c = Corpus::from_files(vec![parse_theory(src, "p", "t.thy").unwrap()]).unwrap();
        assert_eq!(c.theorems.len(), 2);
        let f = filter_pseudo_theorems(&c);
        assert_eq!(f.theorems.len(), 1);
        assert_eq!(f.theorems[0].id, "t:2");
        assert_eq!(filter_pseudo_theorems(&f), f);
    }

    #[test]
    fn context_excludes_own_proof() {
        let c = Corpus::from_files(vec![parse_theory(SMALL, "p", "s.thy").unwrap()]).unwrap();
        let ctx = c.theory_context(&c.theorems[0]);
        assert_eq!(ctx, "theory small\n\naxiom add0: add(x, 0) = x\n");
    }
}
