//! Loader for the line-oriented `.lmod` workspace format.
//!
//! A file is a sequence of four kinds of declarations:
//!
//! ```text
//! signature graph { relation E/2; }
//! structure K2 : graph { universe a b; E = { (a,b) (b,a) }; }
//! poset omega3 { elements 1 2 3; leq 1<=2 2<=3; }
//! diagram D : graph over omega3 { object 1 = M1; map 2->1 { a->x b->y }; }
//! ```
//!
//! `#` starts a comment running to the end of the line.  Poset orders are
//! closed reflexively and transitively on load.  Diagram maps run downward
//! (`map j->i` needs `i <= j`); missing composites are synthesized and
//! path-dependent composites are load errors.  Relation symbols left unbound
//! in a structure get the empty interpretation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use lmod::profinite::CofilteredDiagram;
use lmod::{Element, Morphism, Poset, Signature, Structure};

/// A parse or validation diagnostic, already formatted as `file:line: message`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadError(pub String);

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for LoadError {}

/// Where a declaration came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loc {
    pub file: String,
    pub line: usize,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

impl Loc {
    fn err(&self, msg: impl fmt::Display) -> LoadError {
        LoadError(format!("{self}: {msg}"))
    }
}

/// Everything loaded from a set of files, keyed by name within each kind.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub signatures: BTreeMap<String, (Signature, Loc)>,
    pub structures: BTreeMap<String, (Structure, Loc)>,
    pub posets: BTreeMap<String, (Poset, Loc)>,
    pub diagrams: BTreeMap<String, (CofilteredDiagram, Loc)>,
}

impl Workspace {
    pub fn signature(&self, name: &str) -> Result<&Signature, LoadError> {
        self.signatures
            .get(name)
            .map(|(s, _)| s)
            .ok_or_else(|| missing("signature", name, self.signatures.keys()))
    }

    pub fn structure(&self, name: &str) -> Result<&Structure, LoadError> {
        self.structures
            .get(name)
            .map(|(s, _)| s)
            .ok_or_else(|| missing("structure", name, self.structures.keys()))
    }

    pub fn diagram(&self, name: &str) -> Result<&CofilteredDiagram, LoadError> {
        self.diagrams
            .get(name)
            .map(|(d, _)| d)
            .ok_or_else(|| missing("diagram", name, self.diagrams.keys()))
    }

    /// The workspace name of a signature, found by structural equality.
    pub fn signature_name(&self, sig: &Signature) -> Option<&str> {
        self.signatures
            .iter()
            .find(|(_, (s, _))| s == sig)
            .map(|(name, _)| name.as_str())
    }
}

fn missing<'k>(
    kind: &str,
    name: &str,
    have: impl Iterator<Item = &'k String>,
) -> LoadError {
    let known: Vec<&str> = have.map(|s| s.as_str()).collect();
    let hint = if known.is_empty() {
        "none are loaded".to_string()
    } else {
        format!("loaded: {}", known.join(", "))
    };
    LoadError(format!("no {kind} named `{name}` ({hint})"))
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
    Eq,
    Slash,
    Colon,
    Arrow, // ->
    Leq,   // <=
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Leq => write!(f, "`<=`"),
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(file: &str, text: &str) -> Result<Vec<(Tok, usize)>, LoadError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    while let Some(c) = chars.next() {
        match c {
            '\n' => line += 1,
            c if c.is_whitespace() => {}
            '#' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        break;
                    }
                }
            }
            '{' => out.push((Tok::LBrace, line)),
            '}' => out.push((Tok::RBrace, line)),
            '(' => out.push((Tok::LParen, line)),
            ')' => out.push((Tok::RParen, line)),
            ';' => out.push((Tok::Semi, line)),
            ',' => out.push((Tok::Comma, line)),
            '=' => out.push((Tok::Eq, line)),
            '/' => out.push((Tok::Slash, line)),
            ':' => out.push((Tok::Colon, line)),
            '<' => match chars.next() {
                Some('=') => out.push((Tok::Leq, line)),
                _ => return Err(LoadError(format!("{file}:{line}: expected `<=`"))),
            },
            '-' => match chars.peek() {
                Some('>') => {
                    chars.next();
                    out.push((Tok::Arrow, line));
                }
                // A `-` not starting an arrow begins a name such as `-1`.
                Some(c2) if is_ident_char(*c2) => {
                    let mut s = String::from('-');
                    while let Some(c2) = chars.peek() {
                        if is_ident_char(*c2) {
                            s.push(*c2);
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    out.push((Tok::Ident(s), line));
                }
                _ => {
                    return Err(LoadError(format!(
                        "{file}:{line}: stray `-` (names may start with `-` only when followed by a letter or digit)"
                    )))
                }
            },
            c if is_ident_char(c) => {
                let mut s = String::from(c);
                while let Some(c2) = chars.peek() {
                    if is_ident_char(*c2) {
                        s.push(*c2);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), line));
            }
            other => {
                return Err(LoadError(format!(
                    "{file}:{line}: unexpected character `{other}`"
                )))
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Raw declarations (parsed shape, before cross-reference resolution)

#[derive(Debug)]
struct RawSignature {
    name: String,
    loc: Loc,
    constants: Vec<String>,
    functions: Vec<(String, usize)>,
    relations: Vec<(String, usize)>,
}

#[derive(Debug)]
enum RawBinding {
    /// `c = a;`
    Single(String),
    /// `f = { (a,b)->c .. };` or `R = { (a,b) .. };`
    Table(Vec<RawRow>),
}

#[derive(Debug)]
struct RawRow {
    args: Vec<String>,
    value: Option<String>,
    line: usize,
}

#[derive(Debug)]
struct RawStructure {
    name: String,
    sig: String,
    loc: Loc,
    universe: Vec<String>,
    bindings: Vec<(String, RawBinding, usize)>,
}

#[derive(Debug)]
struct RawPoset {
    name: String,
    loc: Loc,
    elements: Vec<String>,
    pairs: Vec<(String, String)>,
}

/// A `map j->i { ... }` clause: source index, target index, element pairs, line.
type RawMap = (String, String, Vec<(String, String)>, usize);

#[derive(Debug)]
struct RawDiagram {
    name: String,
    sig: String,
    poset: String,
    loc: Loc,
    objects: Vec<(String, String, usize)>,
    maps: Vec<RawMap>,
}

#[derive(Debug, Default)]
struct RawFile {
    signatures: Vec<RawSignature>,
    structures: Vec<RawStructure>,
    posets: Vec<RawPoset>,
    diagrams: Vec<RawDiagram>,
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    file: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|(_, l)| *l)
            .unwrap_or(1)
    }

    fn loc(&self) -> Loc {
        Loc {
            file: self.file.to_string(),
            line: self.line(),
        }
    }

    fn err(&self, msg: impl fmt::Display) -> LoadError {
        self.loc().err(msg)
    }

    fn next(&mut self, what: &str) -> Result<(Tok, usize), LoadError> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.err(format!("expected {what}, found end of file")))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, tok: Tok) -> Result<usize, LoadError> {
        let (t, line) = self.next(&tok.to_string())?;
        if t == tok {
            Ok(line)
        } else {
            Err(LoadError(format!(
                "{}:{line}: expected {tok}, found {t}",
                self.file
            )))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), LoadError> {
        let (t, line) = self.next(what)?;
        match t {
            Tok::Ident(s) => Ok((s, line)),
            other => Err(LoadError(format!(
                "{}:{line}: expected {what}, found {other}",
                self.file
            ))),
        }
    }

    fn nat(&mut self, what: &str) -> Result<(usize, usize), LoadError> {
        let (s, line) = self.ident(what)?;
        s.parse::<usize>()
            .map(|n| (n, line))
            .map_err(|_| LoadError(format!("{}:{line}: expected {what}, found `{s}`", self.file)))
    }

    fn file(&mut self) -> Result<RawFile, LoadError> {
        let mut out = RawFile::default();
        while self.peek().is_some() {
            let (kw, line) = self.ident("a declaration (`signature`, `structure`, `poset`, or `diagram`)")?;
            match kw.as_str() {
                "signature" => out.signatures.push(self.signature(line)?),
                "structure" => out.structures.push(self.structure(line)?),
                "poset" => out.posets.push(self.poset(line)?),
                "diagram" => out.diagrams.push(self.diagram(line)?),
                other => {
                    return Err(LoadError(format!(
                        "{}:{line}: expected `signature`, `structure`, `poset`, or `diagram`, found `{other}`",
                        self.file
                    )))
                }
            }
        }
        Ok(out)
    }

    fn signature(&mut self, line: usize) -> Result<RawSignature, LoadError> {
        let (name, _) = self.ident("a signature name")?;
        let mut sig = RawSignature {
            name,
            loc: Loc {
                file: self.file.to_string(),
                line,
            },
            constants: Vec::new(),
            functions: Vec::new(),
            relations: Vec::new(),
        };
        self.expect(Tok::LBrace)?;
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.next("`}`")?;
                    break;
                }
                _ => {
                    let (kw, kwline) = self.ident("`constant`, `function`, or `relation`")?;
                    match kw.as_str() {
                        "constant" => {
                            let (c, _) = self.ident("a constant symbol")?;
                            sig.constants.push(c);
                        }
                        "function" => {
                            let (f, _) = self.ident("a function symbol")?;
                            self.expect(Tok::Slash)?;
                            let (ar, _) = self.nat("an arity")?;
                            sig.functions.push((f, ar));
                        }
                        "relation" => {
                            let (r, _) = self.ident("a relation symbol")?;
                            self.expect(Tok::Slash)?;
                            let (ar, _) = self.nat("an arity")?;
                            sig.relations.push((r, ar));
                        }
                        other => {
                            return Err(LoadError(format!(
                                "{}:{kwline}: expected `constant`, `function`, or `relation`, found `{other}`",
                                self.file
                            )))
                        }
                    }
                    self.expect(Tok::Semi)?;
                }
            }
        }
        Ok(sig)
    }

    fn structure(&mut self, line: usize) -> Result<RawStructure, LoadError> {
        let (name, _) = self.ident("a structure name")?;
        self.expect(Tok::Colon)?;
        let (sig, _) = self.ident("a signature name")?;
        let mut st = RawStructure {
            name,
            sig,
            loc: Loc {
                file: self.file.to_string(),
                line,
            },
            universe: Vec::new(),
            bindings: Vec::new(),
        };
        self.expect(Tok::LBrace)?;
        let mut saw_universe = false;
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.next("`}`")?;
                    break;
                }
                _ => {
                    let (head, headline) = self.ident("`universe` or a symbol binding")?;
                    if head == "universe" {
                        if saw_universe {
                            return Err(LoadError(format!(
                                "{}:{headline}: duplicate `universe` entry",
                                self.file
                            )));
                        }
                        saw_universe = true;
                        while let Some(Tok::Ident(_)) = self.peek() {
                            let (e, _) = self.ident("an element name")?;
                            st.universe.push(e);
                        }
                        self.expect(Tok::Semi)?;
                    } else {
                        self.expect(Tok::Eq)?;
                        let binding = match self.peek() {
                            Some(Tok::Ident(_)) => {
                                let (v, _) = self.ident("an element name")?;
                                RawBinding::Single(v)
                            }
                            Some(Tok::LBrace) => {
                                self.next("`{`")?;
                                let mut rows = Vec::new();
                                loop {
                                    match self.peek() {
                                        Some(Tok::RBrace) => {
                                            self.next("`}`")?;
                                            break;
                                        }
                                        Some(Tok::LParen) => {
                                            let rowline = self.line();
                                            self.next("`(`")?;
                                            let mut args = Vec::new();
                                            loop {
                                                let (a, _) = self.ident("an element name")?;
                                                args.push(a);
                                                match self.next("`,` or `)`")? {
                                                    (Tok::Comma, _) => continue,
                                                    (Tok::RParen, _) => break,
                                                    (other, l) => {
                                                        return Err(LoadError(format!(
                                                            "{}:{l}: expected `,` or `)`, found {other}",
                                                            self.file
                                                        )))
                                                    }
                                                }
                                            }
                                            let value = if self.peek() == Some(&Tok::Arrow) {
                                                self.next("`->`")?;
                                                let (v, _) = self.ident("an element name")?;
                                                Some(v)
                                            } else {
                                                None
                                            };
                                            rows.push(RawRow {
                                                args,
                                                value,
                                                line: rowline,
                                            });
                                        }
                                        _ => {
                                            let loc = self.loc();
                                            let (t, _) = self.next("a tuple or `}`")?;
                                            return Err(
                                                loc.err(format!("expected a tuple or `}}`, found {t}"))
                                            );
                                        }
                                    }
                                }
                                RawBinding::Table(rows)
                            }
                            _ => {
                                let loc = self.loc();
                                let (t, _) = self.next("an element or `{`")?;
                                return Err(loc.err(format!("expected an element or `{{`, found {t}")));
                            }
                        };
                        self.expect(Tok::Semi)?;
                        st.bindings.push((head, binding, headline));
                    }
                }
            }
        }
        Ok(st)
    }

    fn poset(&mut self, line: usize) -> Result<RawPoset, LoadError> {
        let (name, _) = self.ident("a poset name")?;
        let mut p = RawPoset {
            name,
            loc: Loc {
                file: self.file.to_string(),
                line,
            },
            elements: Vec::new(),
            pairs: Vec::new(),
        };
        self.expect(Tok::LBrace)?;
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.next("`}`")?;
                    break;
                }
                _ => {
                    let (kw, kwline) = self.ident("`elements` or `leq`")?;
                    match kw.as_str() {
                        "elements" => {
                            while let Some(Tok::Ident(_)) = self.peek() {
                                let (e, _) = self.ident("an element name")?;
                                p.elements.push(e);
                            }
                            self.expect(Tok::Semi)?;
                        }
                        "leq" => {
                            while let Some(Tok::Ident(_)) = self.peek() {
                                let (a, _) = self.ident("an element name")?;
                                self.expect(Tok::Leq)?;
                                let (b, _) = self.ident("an element name")?;
                                p.pairs.push((a, b));
                            }
                            self.expect(Tok::Semi)?;
                        }
                        other => {
                            return Err(LoadError(format!(
                                "{}:{kwline}: expected `elements` or `leq`, found `{other}`",
                                self.file
                            )))
                        }
                    }
                }
            }
        }
        Ok(p)
    }

    fn diagram(&mut self, line: usize) -> Result<RawDiagram, LoadError> {
        let (name, _) = self.ident("a diagram name")?;
        self.expect(Tok::Colon)?;
        let (sig, _) = self.ident("a signature name")?;
        let (over, overline) = self.ident("`over`")?;
        if over != "over" {
            return Err(LoadError(format!(
                "{}:{overline}: expected `over`, found `{over}`",
                self.file
            )));
        }
        let (poset, _) = self.ident("a poset name")?;
        let mut d = RawDiagram {
            name,
            sig,
            poset,
            loc: Loc {
                file: self.file.to_string(),
                line,
            },
            objects: Vec::new(),
            maps: Vec::new(),
        };
        self.expect(Tok::LBrace)?;
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.next("`}`")?;
                    break;
                }
                _ => {
                    let (kw, kwline) = self.ident("`object` or `map`")?;
                    match kw.as_str() {
                        "object" => {
                            let (idx, _) = self.ident("a poset index")?;
                            self.expect(Tok::Eq)?;
                            let (st, _) = self.ident("a structure name")?;
                            self.expect(Tok::Semi)?;
                            d.objects.push((idx, st, kwline));
                        }
                        "map" => {
                            let (from, _) = self.ident("a poset index")?;
                            self.expect(Tok::Arrow)?;
                            let (to, _) = self.ident("a poset index")?;
                            self.expect(Tok::LBrace)?;
                            let mut entries = Vec::new();
                            loop {
                                match self.peek() {
                                    Some(Tok::RBrace) => {
                                        self.next("`}`")?;
                                        break;
                                    }
                                    Some(Tok::Ident(_)) => {
                                        let (a, _) = self.ident("an element name")?;
                                        self.expect(Tok::Arrow)?;
                                        let (b, _) = self.ident("an element name")?;
                                        entries.push((a, b));
                                    }
                                    _ => {
                                        let loc = self.loc();
                                        let (t, _) = self.next("an entry or `}`")?;
                                        return Err(
                                            loc.err(format!("expected `a->b` or `}}`, found {t}"))
                                        );
                                    }
                                }
                            }
                            self.expect(Tok::Semi)?;
                            d.maps.push((from, to, entries, kwline));
                        }
                        other => {
                            return Err(LoadError(format!(
                                "{}:{kwline}: expected `object` or `map`, found `{other}`",
                                self.file
                            )))
                        }
                    }
                }
            }
        }
        Ok(d)
    }
}

// ---------------------------------------------------------------------------
// Resolution

/// Parse and validate a set of files into a workspace.  Declarations may
/// reference items from any file in the set, regardless of order.
pub fn load<P: AsRef<Path>>(paths: &[P]) -> Result<Workspace, LoadError> {
    let mut raws = Vec::new();
    for p in paths {
        let display = p.as_ref().display().to_string();
        let text = std::fs::read_to_string(p.as_ref())
            .map_err(|e| LoadError(format!("{display}: cannot read file: {e}")))?;
        let toks = lex(&display, &text)?;
        let mut parser = Parser {
            file: &display,
            toks,
            pos: 0,
        };
        raws.push(parser.file()?);
    }

    let mut ws = Workspace::default();

    for raw in &raws {
        for rs in &raw.signatures {
            if let Some((_, prev)) = ws.signatures.get(&rs.name) {
                return Err(rs
                    .loc
                    .err(format!("signature `{}` already declared at {prev}", rs.name)));
            }
            let sig = Signature::new(
                rs.constants.iter().cloned(),
                rs.functions.iter().cloned(),
                rs.relations.iter().cloned(),
            )
            .map_err(|e| rs.loc.err(format!("in signature `{}`: {e}", rs.name)))?;
            ws.signatures.insert(rs.name.clone(), (sig, rs.loc.clone()));
        }
        for rp in &raw.posets {
            if let Some((_, prev)) = ws.posets.get(&rp.name) {
                return Err(rp
                    .loc
                    .err(format!("poset `{}` already declared at {prev}", rp.name)));
            }
            let poset = Poset::from_generators(rp.elements.iter().cloned(), rp.pairs.iter().cloned())
                .map_err(|e| rp.loc.err(format!("in poset `{}`: {e}", rp.name)))?;
            ws.posets.insert(rp.name.clone(), (poset, rp.loc.clone()));
        }
    }

    for raw in &raws {
        for rs in &raw.structures {
            if let Some((_, prev)) = ws.structures.get(&rs.name) {
                return Err(rs
                    .loc
                    .err(format!("structure `{}` already declared at {prev}", rs.name)));
            }
            let st = resolve_structure(rs, &ws)?;
            ws.structures.insert(rs.name.clone(), (st, rs.loc.clone()));
        }
    }

    for raw in &raws {
        for rd in &raw.diagrams {
            if let Some((_, prev)) = ws.diagrams.get(&rd.name) {
                return Err(rd
                    .loc
                    .err(format!("diagram `{}` already declared at {prev}", rd.name)));
            }
            let d = resolve_diagram(rd, &ws)?;
            ws.diagrams.insert(rd.name.clone(), (d, rd.loc.clone()));
        }
    }

    Ok(ws)
}

fn resolve_structure(rs: &RawStructure, ws: &Workspace) -> Result<Structure, LoadError> {
    let (sig, _) = ws.signatures.get(&rs.sig).ok_or_else(|| {
        rs.loc.err(format!(
            "structure `{}` references undeclared signature `{}`",
            rs.name, rs.sig
        ))
    })?;
    let universe: Vec<Element> = rs.universe.iter().map(Element::name).collect();
    let in_universe = |name: &str, line: usize| -> Result<Element, LoadError> {
        if rs.universe.iter().any(|u| u == name) {
            Ok(Element::name(name))
        } else {
            Err(LoadError(format!(
                "{}:{line}: element `{name}` is not in the universe of `{}`",
                rs.loc.file, rs.name
            )))
        }
    };

    let mut constants: BTreeMap<String, Element> = BTreeMap::new();
    let mut functions: BTreeMap<String, BTreeMap<Vec<Element>, Element>> = BTreeMap::new();
    let mut relations: BTreeMap<String, BTreeSet<Vec<Element>>> = BTreeMap::new();

    for (symbol, binding, line) in &rs.bindings {
        let file = &rs.loc.file;
        if sig.is_constant(symbol) {
            let RawBinding::Single(v) = binding else {
                return Err(LoadError(format!(
                    "{file}:{line}: `{symbol}` is a constant; bind it as `{symbol} = <element>;`"
                )));
            };
            if constants.insert(symbol.clone(), in_universe(v, *line)?).is_some() {
                return Err(LoadError(format!(
                    "{file}:{line}: constant `{symbol}` bound twice"
                )));
            }
        } else if let Some(arity) = sig.function_arity(symbol) {
            let RawBinding::Table(rows) = binding else {
                return Err(LoadError(format!(
                    "{file}:{line}: `{symbol}` is a function; bind it as `{symbol} = {{ (args)->value .. }};`"
                )));
            };
            let mut table = BTreeMap::new();
            for row in rows {
                let Some(v) = &row.value else {
                    return Err(LoadError(format!(
                        "{file}:{line}: function rows need a value: `(args)->value` (row at line {})",
                        row.line
                    )));
                };
                if row.args.len() != arity {
                    return Err(LoadError(format!(
                        "{file}:{}: function `{symbol}` has arity {arity}, row lists {} arguments",
                        row.line,
                        row.args.len()
                    )));
                }
                let args: Vec<Element> = row
                    .args
                    .iter()
                    .map(|a| in_universe(a, row.line))
                    .collect::<Result<_, _>>()?;
                if table.insert(args, in_universe(v, row.line)?).is_some() {
                    return Err(LoadError(format!(
                        "{file}:{}: function `{symbol}` lists ({}) twice",
                        row.line,
                        row.args.join(",")
                    )));
                }
            }
            if functions.insert(symbol.clone(), table).is_some() {
                return Err(LoadError(format!(
                    "{file}:{line}: function `{symbol}` bound twice"
                )));
            }
        } else if let Some(arity) = sig.relation_arity(symbol) {
            let RawBinding::Table(rows) = binding else {
                return Err(LoadError(format!(
                    "{file}:{line}: `{symbol}` is a relation; bind it as `{symbol} = {{ (tuples) .. }};`"
                )));
            };
            let mut set = BTreeSet::new();
            for row in rows {
                if row.value.is_some() {
                    return Err(LoadError(format!(
                        "{file}:{}: relation rows are bare tuples, no `->`",
                        row.line
                    )));
                }
                if row.args.len() != arity {
                    return Err(LoadError(format!(
                        "{file}:{}: relation `{symbol}` has arity {arity}, tuple lists {} elements",
                        row.line,
                        row.args.len()
                    )));
                }
                let args: Vec<Element> = row
                    .args
                    .iter()
                    .map(|a| in_universe(a, row.line))
                    .collect::<Result<_, _>>()?;
                set.insert(args);
            }
            if relations.insert(symbol.clone(), set).is_some() {
                return Err(LoadError(format!(
                    "{file}:{line}: relation `{symbol}` bound twice"
                )));
            }
        } else {
            return Err(LoadError(format!(
                "{file}:{line}: symbol `{symbol}` is not declared in signature `{}`",
                rs.sig
            )));
        }
    }

    // Unbound relations mean the empty interpretation; unbound constants and
    // functions have no sensible default and must be spelled out.
    for (r, _) in sig.relations() {
        relations.entry(r.to_string()).or_default();
    }
    for c in sig.constants() {
        if !constants.contains_key(c) {
            return Err(rs.loc.err(format!(
                "structure `{}` leaves constant `{c}` unbound",
                rs.name
            )));
        }
    }
    for (f, _) in sig.functions() {
        if !functions.contains_key(f) && !universe.is_empty() {
            return Err(rs.loc.err(format!(
                "structure `{}` leaves function `{f}` unbound",
                rs.name
            )));
        }
        functions.entry(f.to_string()).or_default();
    }

    Structure::new(sig.clone(), universe, constants, functions, relations)
        .map_err(|e| rs.loc.err(format!("in structure `{}`: {e}", rs.name)))
}

fn resolve_diagram(rd: &RawDiagram, ws: &Workspace) -> Result<CofilteredDiagram, LoadError> {
    let (sig, _) = ws.signatures.get(&rd.sig).ok_or_else(|| {
        rd.loc.err(format!(
            "diagram `{}` references undeclared signature `{}`",
            rd.name, rd.sig
        ))
    })?;
    let (poset, _) = ws.posets.get(&rd.poset).ok_or_else(|| {
        rd.loc.err(format!(
            "diagram `{}` references undeclared poset `{}`",
            rd.name, rd.poset
        ))
    })?;

    let file = &rd.loc.file;
    let mut objects: BTreeMap<String, Structure> = BTreeMap::new();
    for (idx, st_name, line) in &rd.objects {
        if !poset.contains(idx) {
            return Err(LoadError(format!(
                "{file}:{line}: index `{idx}` is not an element of poset `{}`",
                rd.poset
            )));
        }
        let (st, _) = ws.structures.get(st_name).ok_or_else(|| {
            LoadError(format!(
                "{file}:{line}: object `{idx}` references undeclared structure `{st_name}`"
            ))
        })?;
        if st.signature() != sig {
            return Err(LoadError(format!(
                "{file}:{line}: structure `{st_name}` does not have signature `{}`",
                rd.sig
            )));
        }
        if objects.insert(idx.clone(), st.clone()).is_some() {
            return Err(LoadError(format!(
                "{file}:{line}: object `{idx}` assigned twice"
            )));
        }
    }
    for i in poset.elements() {
        if !objects.contains_key(i) {
            return Err(rd.loc.err(format!(
                "diagram `{}` has no object for index `{i}`",
                rd.name
            )));
        }
    }

    let mut maps: BTreeMap<(String, String), Morphism> = BTreeMap::new();
    for (from, to, entries, line) in &rd.maps {
        for idx in [from, to] {
            if !poset.contains(idx) {
                return Err(LoadError(format!(
                    "{file}:{line}: index `{idx}` is not an element of poset `{}`",
                    rd.poset
                )));
            }
        }
        if !poset.le(to, from) {
            return Err(LoadError(format!(
                "{file}:{line}: map `{from}->{to}` must run downward: `{to}` is not below `{from}` in `{}`",
                rd.poset
            )));
        }
        let source = &objects[from];
        let target = &objects[to];
        let mut table: BTreeMap<Element, Element> = BTreeMap::new();
        for (a, b) in entries {
            if !source.contains(&Element::name(a.as_str())) {
                return Err(LoadError(format!(
                    "{file}:{line}: `{a}` is not an element of the object at `{from}`"
                )));
            }
            if !target.contains(&Element::name(b.as_str())) {
                return Err(LoadError(format!(
                    "{file}:{line}: `{b}` is not an element of the object at `{to}`"
                )));
            }
            if table.insert(Element::name(a.as_str()), Element::name(b.as_str())).is_some() {
                return Err(LoadError(format!(
                    "{file}:{line}: map `{from}->{to}` lists `{a}` twice"
                )));
            }
        }
        let m = Morphism::new(source.clone(), target.clone(), table)
            .map_err(|e| LoadError(format!("{file}:{line}: in map `{from}->{to}`: {e}")))?;
        if maps.insert((from.clone(), to.clone()), m).is_some() {
            return Err(LoadError(format!(
                "{file}:{line}: map `{from}->{to}` given twice"
            )));
        }
    }

    CofilteredDiagram::new(poset.clone(), objects, maps)
        .map_err(|e| rd.loc.err(format!("in diagram `{}`: {e}", rd.name)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(name: &str, content: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("lmod-files-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_a_graph_workspace() {
        let p = write_temp(
            "k2.lmod",
            "signature graph { relation E/2; }\n\
             structure K2 : graph { universe a b; E = { (a,b) (b,a) }; }\n",
        );
        let ws = load(&[p]).unwrap();
        let k2 = ws.structure("K2").unwrap();
        assert_eq!(k2.size(), 2);
        assert_eq!(k2.relation("E").unwrap().len(), 2);
    }

    #[test]
    fn negative_constant_names_lex() {
        let p = write_temp(
            "sg.lmod",
            "signature sg { constant 1; constant -1; function mul/2; }\n\
             structure s2 : sg { universe 1 -1; 1 = 1; -1 = -1;\n\
               mul = { (1,1)->1 (1,-1)->-1 (-1,1)->-1 (-1,-1)->1 }; }\n",
        );
        let ws = load(&[p]).unwrap();
        let s2 = ws.structure("s2").unwrap();
        assert_eq!(s2.constant("-1"), Some(&Element::name("-1")));
    }

    #[test]
    fn poset_closure_and_diagram_composites() {
        let p = write_temp(
            "d.lmod",
            "signature graph { relation E/2; }\n\
             structure One : graph { universe u; E = { (u,u) }; }\n\
             structure Two : graph { universe a b; E = { (a,b) (b,a) (a,a) (b,b) }; }\n\
             poset omega { elements 1 2 3; leq 1<=2 2<=3; }\n\
             diagram D : graph over omega {\n\
               object 1 = One; object 2 = Two; object 3 = Two;\n\
               map 3->2 { a->a b->b };\n\
               map 2->1 { a->u b->u };\n\
             }\n",
        );
        let ws = load(&[p]).unwrap();
        let d = ws.diagram("D").unwrap();
        // 1 <= 3 by transitive closure; the composite map is synthesized.
        let m = d.map_down("3", "1").unwrap();
        assert_eq!(m.apply(&Element::name("a")), Some(&Element::name("u")));
    }

    #[test]
    fn undeclared_structure_reference_is_named() {
        let p = write_temp(
            "bad.lmod",
            "signature graph { relation E/2; }\n\
             poset pt { elements 1; }\n\
             diagram D : graph over pt { object 1 = Ghost; }\n",
        );
        let err = load(&[p]).unwrap_err();
        assert!(err.0.contains("Ghost"), "{err}");
        assert!(err.0.contains(":3"), "{err}");
    }

    #[test]
    fn upward_map_is_rejected() {
        let p = write_temp(
            "up.lmod",
            "signature graph { relation E/2; }\n\
             structure One : graph { universe u; }\n\
             poset c2 { elements 1 2; leq 1<=2; }\n\
             diagram D : graph over c2 { object 1 = One; object 2 = One; map 1->2 { u->u }; }\n",
        );
        let err = load(&[p]).unwrap_err();
        assert!(err.0.contains("must run downward"), "{err}");
    }

    #[test]
    fn conflicting_composites_are_load_errors() {
        // 1 <= 2 <= 4, 1 <= 3 <= 4: two paths from 4 to 1 that disagree.
        let p = write_temp(
            "conflict.lmod",
            "signature graph { relation E/2; }\n\
             structure Two : graph { universe a b; }\n\
             poset diamond { elements 1 2 3 4; leq 1<=2 1<=3 2<=4 3<=4; }\n\
             diagram D : graph over diamond {\n\
               object 1 = Two; object 2 = Two; object 3 = Two; object 4 = Two;\n\
               map 2->1 { a->a b->b }; map 3->1 { a->b b->a };\n\
               map 4->2 { a->a b->b }; map 4->3 { a->a b->b };\n\
             }\n",
        );
        let err = load(&[p]).unwrap_err();
        assert!(err.0.contains("diagram `D`"), "{err}");
    }

    #[test]
    fn empty_universe_without_constants_loads() {
        let p = write_temp(
            "empty.lmod",
            "signature graph { relation E/2; }\n\
             structure Nothing : graph { universe ; }\n",
        );
        let ws = load(&[p]).unwrap();
        assert!(ws.structure("Nothing").unwrap().is_empty());
    }

    #[test]
    fn cross_file_references_resolve() {
        let sig = write_temp("xsig.lmod", "signature graph { relation E/2; }\n");
        let st = write_temp(
            "xst.lmod",
            "structure Pt : graph { universe p; E = { (p,p) }; }\n",
        );
        // The structure file comes first: order must not matter.
        let ws = load(&[st, sig]).unwrap();
        assert_eq!(ws.structure("Pt").unwrap().size(), 1);
    }
}
