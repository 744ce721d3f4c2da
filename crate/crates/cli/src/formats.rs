//! Text formats and their parsers/printers.
//!
//! Facts, rules, queries, tree decompositions and colorings are line based:
//! one statement per line, terminated by `.`, with `#` comments. Expression
//! systems are free form (`let NAME = expr;` bindings followed by
//! `root expr`).
//!
//! Identifier kinds depend on the file: in fact files every identifier is a
//! constant; in rule and query files identifiers are variables unless
//! declared with a `const a, b.` statement. Nulls are written `_:name`
//! everywhere.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rulebench_core::cliquewidth::{Color, CwExpr, EquationSystem, TreeDecomposition};
use rulebench_core::gridrw::MarkedQuery;
use rulebench_core::kernel::{Atom, Instance, Term};
use rulebench_core::rules::{Rule, RuleSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, col {}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(usize),
    Null(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Semi,
    Colon,
    Arrow,
    Eq,
    Dash,
    UnionOp,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::Null(s) => write!(f, "`_:{s}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Dash => write!(f, "`-`"),
            Tok::UnionOp => write!(f, "`(+)`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let col = i + 1;
            let c = chars[i];
            let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line, col });
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                '(' if chars.get(i + 1) == Some(&'+') && chars.get(i + 2) == Some(&')') => {
                    push(&mut out, Tok::UnionOp);
                    i += 3;
                }
                '(' => {
                    push(&mut out, Tok::LParen);
                    i += 1;
                }
                ')' => {
                    push(&mut out, Tok::RParen);
                    i += 1;
                }
                '{' => {
                    push(&mut out, Tok::LBrace);
                    i += 1;
                }
                '}' => {
                    push(&mut out, Tok::RBrace);
                    i += 1;
                }
                ',' => {
                    push(&mut out, Tok::Comma);
                    i += 1;
                }
                '.' => {
                    push(&mut out, Tok::Dot);
                    i += 1;
                }
                ';' => {
                    push(&mut out, Tok::Semi);
                    i += 1;
                }
                ':' => {
                    push(&mut out, Tok::Colon);
                    i += 1;
                }
                '=' => {
                    push(&mut out, Tok::Eq);
                    i += 1;
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    push(&mut out, Tok::Arrow);
                    i += 2;
                }
                '-' => {
                    push(&mut out, Tok::Dash);
                    i += 1;
                }
                // Null names admit `!`, which generated nulls use as an
                // internal separator.
                '_' if chars.get(i + 1) == Some(&':') => {
                    let start = i + 2;
                    let mut j = start;
                    while j < chars.len() && (is_ident_char(chars[j]) || chars[j] == '!') {
                        j += 1;
                    }
                    if j == start {
                        return Err(ParseError { line, col, msg: "empty null name after `_:`".into() });
                    }
                    push(&mut out, Tok::Null(chars[start..j].iter().collect()));
                    i = j;
                }
                c if c.is_ascii_digit() => {
                    let mut j = i;
                    while j < chars.len() && is_ident_char(chars[j]) {
                        j += 1;
                    }
                    let word: String = chars[i..j].iter().collect();
                    match word.parse::<usize>() {
                        Ok(n) => push(&mut out, Tok::Num(n)),
                        Err(_) => push(&mut out, Tok::Ident(word)),
                    }
                    i = j;
                }
                c if is_ident_char(c) => {
                    let mut j = i;
                    while j < chars.len() && is_ident_char(chars[j]) {
                        j += 1;
                    }
                    push(&mut out, Tok::Ident(chars[i..j].iter().collect()));
                    i = j;
                }
                other => {
                    return Err(ParseError { line, col, msg: format!("unexpected character `{other}`") });
                }
            }
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Cursor { toks: lex(text)?, pos: 0 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => self
                .toks
                .last()
                .map(|t| (t.line, t.col + 1))
                .unwrap_or((1, 1)),
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError { line, col, msg: msg.into() }
    }

    fn next(&mut self, what: &str) -> Result<Tok, ParseError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                let tok = t.tok.clone();
                self.pos += 1;
                Ok(tok)
            }
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let got = self.next(&want.to_string())?;
        if got == want {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.err(format!("expected {want}, found {got}")))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.next(what)? {
            Tok::Ident(s) => Ok(s),
            got => {
                self.pos -= 1;
                Err(self.err(format!("expected {what}, found {got}")))
            }
        }
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

/// How bare identifiers in term position are interpreted.
#[derive(Clone, Copy, PartialEq)]
enum TermMode {
    /// Every identifier is a constant (fact files).
    Ground,
    /// Identifiers are variables unless declared `const` (rules, queries).
    Declared,
}

struct ArityCheck(BTreeMap<String, usize>);

impl ArityCheck {
    fn check(&mut self, cur: &Cursor, pred: &str, arity: usize) -> Result<(), ParseError> {
        match self.0.insert(pred.to_string(), arity) {
            Some(prev) if prev != arity => Err(cur.err(format!(
                "predicate `{pred}` used with arity {arity}, previously {prev}"
            ))),
            _ => Ok(()),
        }
    }
}

fn parse_term(
    cur: &mut Cursor,
    mode: TermMode,
    consts: &BTreeSet<String>,
) -> Result<Term, ParseError> {
    match cur.next("a term")? {
        Tok::Ident(s) => Ok(match mode {
            TermMode::Ground => Term::constant(s),
            TermMode::Declared if consts.contains(&s) => Term::constant(s),
            TermMode::Declared => Term::variable(s),
        }),
        Tok::Num(n) => Ok(Term::constant(n.to_string())),
        Tok::Null(s) => {
            if mode == TermMode::Declared {
                cur.pos -= 1;
                return Err(cur.err("null terms are not allowed here"));
            }
            Ok(Term::null(s))
        }
        got => {
            cur.pos -= 1;
            Err(cur.err(format!("expected a term, found {got}")))
        }
    }
}

fn parse_atom(
    cur: &mut Cursor,
    mode: TermMode,
    consts: &BTreeSet<String>,
    arities: &mut ArityCheck,
) -> Result<Atom, ParseError> {
    let pred = cur.ident("a predicate")?;
    let mut args = Vec::new();
    if cur.eat(&Tok::LParen) {
        if !cur.eat(&Tok::RParen) {
            loop {
                args.push(parse_term(cur, mode, consts)?);
                if !cur.eat(&Tok::Comma) {
                    break;
                }
            }
            cur.expect(Tok::RParen)?;
        }
    }
    arities.check(cur, &pred, args.len())?;
    Ok(Atom::new(pred, args))
}

fn parse_atom_list(
    cur: &mut Cursor,
    mode: TermMode,
    consts: &BTreeSet<String>,
    arities: &mut ArityCheck,
) -> Result<Vec<Atom>, ParseError> {
    let mut atoms = vec![parse_atom(cur, mode, consts, arities)?];
    while cur.eat(&Tok::Comma) {
        atoms.push(parse_atom(cur, mode, consts, arities)?);
    }
    Ok(atoms)
}

/// Parses a fact file into an instance. All terms are constants or nulls.
pub fn parse_facts(text: &str) -> Result<Instance, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut arities = ArityCheck(BTreeMap::new());
    let mut atoms = Vec::new();
    while !cur.done() {
        let atom = parse_atom(&mut cur, TermMode::Ground, &BTreeSet::new(), &mut arities)?;
        cur.expect(Tok::Dot)?;
        atoms.push(atom);
    }
    Instance::from_atoms(atoms).map_err(|e| ParseError { line: 0, col: 0, msg: e.to_string() })
}

/// Parses `const` declarations shared by rule and query files.
fn parse_const_decl(cur: &mut Cursor, consts: &mut BTreeSet<String>) -> Result<(), ParseError> {
    loop {
        consts.insert(cur.ident("a constant name")?);
        if !cur.eat(&Tok::Comma) {
            break;
        }
    }
    cur.expect(Tok::Dot)
}

fn at_const_decl(cur: &Cursor) -> bool {
    matches!(cur.peek(), Some(Tok::Ident(s)) if s == "const")
        && !matches!(cur.toks.get(cur.pos + 1).map(|t| &t.tok), Some(Tok::LParen))
}

/// Parses a rule file: `const` declarations and rules of the form
/// `label: body -> exists y, z. head.` (label and `exists` optional).
pub fn parse_rules(text: &str) -> Result<RuleSet, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut arities = ArityCheck(BTreeMap::new());
    let mut consts = BTreeSet::new();
    let mut rules = Vec::new();
    while !cur.done() {
        if at_const_decl(&cur) {
            cur.pos += 1;
            parse_const_decl(&mut cur, &mut consts)?;
            continue;
        }
        let label = match (cur.peek(), cur.toks.get(cur.pos + 1).map(|t| &t.tok)) {
            (Some(Tok::Ident(name)), Some(Tok::Colon)) => {
                let name = name.clone();
                cur.pos += 2;
                name
            }
            _ => format!("r{}", rules.len()),
        };
        let body = parse_atom_list(&mut cur, TermMode::Declared, &consts, &mut arities)?;
        cur.expect(Tok::Arrow)?;
        if matches!(cur.peek(), Some(Tok::Ident(s)) if s == "exists") {
            cur.pos += 1;
            loop {
                // Existential variables are implied by not occurring in the
                // body; the list is kept for readability and checked.
                let v = cur.ident("an existential variable")?;
                if consts.contains(&v) {
                    cur.pos -= 1;
                    return Err(cur.err(format!("`{v}` is declared const, cannot be existential")));
                }
                if !cur.eat(&Tok::Comma) {
                    break;
                }
            }
            cur.expect(Tok::Dot)?;
        }
        let head = parse_atom_list(&mut cur, TermMode::Declared, &consts, &mut arities)?;
        cur.expect(Tok::Dot)?;
        rules.push(
            Rule::new(label, body, head)
                .map_err(|e| cur.err(e.to_string()))?,
        );
    }
    RuleSet::new(rules).map_err(|e| ParseError { line: 0, col: 0, msg: e.to_string() })
}

/// Parses a query file: `const` declarations plus conjunctions of atoms.
/// All statements together form one conjunctive query.
pub fn parse_query(text: &str) -> Result<Vec<Atom>, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut arities = ArityCheck(BTreeMap::new());
    let mut consts = BTreeSet::new();
    let mut atoms = Vec::new();
    while !cur.done() {
        if at_const_decl(&cur) {
            cur.pos += 1;
            parse_const_decl(&mut cur, &mut consts)?;
            continue;
        }
        atoms.extend(parse_atom_list(&mut cur, TermMode::Declared, &consts, &mut arities)?);
        cur.expect(Tok::Dot)?;
    }
    if atoms.is_empty() {
        return Err(cur.err("query has no atoms"));
    }
    Ok(atoms)
}

fn parse_color(cur: &mut Cursor) -> Result<Color, ParseError> {
    match cur.next("a color")? {
        Tok::Num(n) => Ok(Color::num(n)),
        Tok::Ident(s) => Ok(Color::name(s)),
        Tok::LParen => {
            let mut items = vec![parse_color(cur)?];
            while cur.eat(&Tok::Comma) {
                items.push(parse_color(cur)?);
            }
            cur.expect(Tok::RParen)?;
            Ok(Color::Tuple(items))
        }
        Tok::LBrace => {
            let mut items = BTreeSet::new();
            if !cur.eat(&Tok::RBrace) {
                loop {
                    items.insert(parse_color(cur)?);
                    if !cur.eat(&Tok::Comma) {
                        break;
                    }
                }
                cur.expect(Tok::RBrace)?;
            }
            Ok(Color::Set(items))
        }
        got => {
            cur.pos -= 1;
            Err(cur.err(format!("expected a color, found {got}")))
        }
    }
}

fn parse_cw_unary(cur: &mut Cursor) -> Result<CwExpr, ParseError> {
    match cur.peek() {
        Some(Tok::LParen) => {
            cur.pos += 1;
            let e = parse_cw_expr(cur)?;
            cur.expect(Tok::RParen)?;
            Ok(e)
        }
        Some(Tok::Ident(kw)) => {
            let kw = kw.clone();
            cur.pos += 1;
            match kw.as_str() {
                "void" => Ok(CwExpr::Void),
                "null" => Ok(CwExpr::NullLeaf(parse_color(cur)?)),
                "const" => {
                    let name = cur.ident("a constant name")?;
                    Ok(CwExpr::ConstLeaf(Term::constant(name), parse_color(cur)?))
                }
                "ref" => Ok(CwExpr::Ref(cur.ident("a definition name")?)),
                "add" => {
                    let pred = cur.ident("a predicate")?;
                    cur.expect(Tok::LParen)?;
                    let mut colors = vec![parse_color(cur)?];
                    while cur.eat(&Tok::Comma) {
                        colors.push(parse_color(cur)?);
                    }
                    cur.expect(Tok::RParen)?;
                    Ok(CwExpr::add(pred, colors, parse_cw_unary(cur)?))
                }
                "recolor" => {
                    let from = parse_color(cur)?;
                    cur.expect(Tok::Arrow)?;
                    let to = parse_color(cur)?;
                    Ok(CwExpr::recolor(from, to, parse_cw_unary(cur)?))
                }
                // A bare identifier is a reference, as in `root E`.
                other => Ok(CwExpr::Ref(other.to_string())),
            }
        }
        _ => Err(cur.err("expected an expression")),
    }
}

fn parse_cw_expr(cur: &mut Cursor) -> Result<CwExpr, ParseError> {
    let mut e = parse_cw_unary(cur)?;
    while cur.eat(&Tok::UnionOp) {
        e = CwExpr::union(e, parse_cw_unary(cur)?);
    }
    Ok(e)
}

/// Parses an expression system: `let NAME = expr;` bindings followed by
/// `root expr`.
pub fn parse_cwexpr(text: &str) -> Result<EquationSystem, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut defs = BTreeMap::new();
    while matches!(cur.peek(), Some(Tok::Ident(s)) if s == "let") {
        cur.pos += 1;
        let name = cur.ident("a definition name")?;
        cur.expect(Tok::Eq)?;
        let e = parse_cw_expr(&mut cur)?;
        cur.expect(Tok::Semi)?;
        if defs.insert(name.clone(), e).is_some() {
            return Err(cur.err(format!("`{name}` is defined twice")));
        }
    }
    match cur.peek() {
        Some(Tok::Ident(s)) if s == "root" => cur.pos += 1,
        _ => return Err(cur.err("expected `root`")),
    }
    let root = parse_cw_expr(&mut cur)?;
    cur.eat(&Tok::Semi);
    if !cur.done() {
        return Err(cur.err("trailing input after the root expression"));
    }
    Ok(EquationSystem::new(defs, root))
}

/// Parses a tree decomposition: one `bag ID PARENT: t1, t2.` line per node,
/// `-` as the parent of the root, ids contiguous from 0.
pub fn parse_td(text: &str) -> Result<(Vec<BTreeSet<Term>>, Vec<Option<usize>>), ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut nodes: BTreeMap<usize, (BTreeSet<Term>, Option<usize>)> = BTreeMap::new();
    while !cur.done() {
        match cur.next("`bag`")? {
            Tok::Ident(s) if s == "bag" => {}
            got => {
                cur.pos -= 1;
                return Err(cur.err(format!("expected `bag`, found {got}")));
            }
        }
        let id = match cur.next("a bag id")? {
            Tok::Num(n) => n,
            got => {
                cur.pos -= 1;
                return Err(cur.err(format!("expected a bag id, found {got}")));
            }
        };
        let parent = match cur.next("a parent id or `-`")? {
            Tok::Num(n) => Some(n),
            Tok::Dash => None,
            got => {
                cur.pos -= 1;
                return Err(cur.err(format!("expected a parent id or `-`, found {got}")));
            }
        };
        cur.expect(Tok::Colon)?;
        let mut bag = BTreeSet::new();
        if !cur.eat(&Tok::Dot) {
            loop {
                bag.insert(parse_term(&mut cur, TermMode::Ground, &BTreeSet::new())?);
                if !cur.eat(&Tok::Comma) {
                    break;
                }
            }
            cur.expect(Tok::Dot)?;
        }
        if nodes.insert(id, (bag, parent)).is_some() {
            return Err(cur.err(format!("bag {id} is declared twice")));
        }
    }
    let n = nodes.len();
    if nodes.keys().last() != n.checked_sub(1).as_ref() {
        return Err(cur.err(format!("bag ids must be 0..{n} without gaps")));
    }
    let mut bags = Vec::with_capacity(n);
    let mut parents = Vec::with_capacity(n);
    for (_, (bag, parent)) in nodes {
        bags.push(bag);
        parents.push(parent);
    }
    Ok((bags, parents))
}

/// Parses a coloring file: `term -> color.` lines.
pub fn parse_coloring(text: &str) -> Result<BTreeMap<Term, Color>, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut out = BTreeMap::new();
    while !cur.done() {
        let term = parse_term(&mut cur, TermMode::Ground, &BTreeSet::new())?;
        cur.expect(Tok::Arrow)?;
        let color = parse_color(&mut cur)?;
        cur.expect(Tok::Dot)?;
        out.insert(term, color);
    }
    Ok(out)
}

pub fn term_str(t: &Term) -> String {
    if t.is_null() {
        format!("_:{}", t.name())
    } else {
        t.name().to_string()
    }
}

pub fn atom_str(atom: &Atom) -> String {
    if atom.args().is_empty() {
        return atom.pred().to_string();
    }
    let args: Vec<String> = atom.args().iter().map(term_str).collect();
    format!("{}({})", atom.pred(), args.join(","))
}

pub fn instance_str(inst: &Instance) -> String {
    let mut out = String::new();
    for atom in inst.sorted_atoms() {
        out.push_str(&atom_str(&atom));
        out.push_str(".\n");
    }
    out
}

pub fn coloring_str(coloring: &BTreeMap<Term, Color>) -> String {
    let mut out = String::new();
    for (t, c) in coloring {
        out.push_str(&format!("{} -> {}.\n", term_str(t), c));
    }
    out
}

pub fn ruleset_str(rules: &RuleSet) -> String {
    let mut out = String::new();
    let consts: BTreeSet<&str> = rules
        .rules()
        .iter()
        .flat_map(|r| r.body().iter().chain(r.head()))
        .flat_map(|a| a.args())
        .filter(|t| t.is_constant())
        .map(|t| t.name())
        .collect();
    if !consts.is_empty() {
        out.push_str(&format!("const {}.\n", consts.into_iter().collect::<Vec<_>>().join(", ")));
    }
    for rule in rules.rules() {
        let part = |atoms: &[Atom]| {
            atoms.iter().map(atom_str).collect::<Vec<_>>().join(", ")
        };
        let existentials: Vec<String> =
            rule.existential_variables().iter().map(|v| v.name().to_string()).collect();
        let exists = if existentials.is_empty() {
            String::new()
        } else {
            format!("exists {}. ", existentials.join(", "))
        };
        out.push_str(&format!(
            "{}: {} -> {}{}.\n",
            rule.label(),
            part(rule.body()),
            exists,
            part(rule.head())
        ));
    }
    out
}

fn cw_expr_str(e: &CwExpr) -> String {
    match e {
        CwExpr::Void => "void".into(),
        CwExpr::ConstLeaf(t, c) => format!("const {} {c}", t.name()),
        CwExpr::NullLeaf(c) => format!("null {c}"),
        CwExpr::Add(pred, colors, child) => {
            let tuple: Vec<String> = colors.iter().map(|c| c.to_string()).collect();
            format!("add {pred} ({}) {}", tuple.join(","), cw_child_str(child))
        }
        CwExpr::Recolor(from, to, child) => {
            format!("recolor {from} -> {to} {}", cw_child_str(child))
        }
        CwExpr::Union(l, r) => format!("({} (+) {})", cw_expr_str(l), cw_expr_str(r)),
        CwExpr::Ref(name) => format!("ref {name}"),
    }
}

// Unions print their own parentheses; everything else is a valid unary
// argument as is.
fn cw_child_str(e: &CwExpr) -> String {
    cw_expr_str(e)
}

pub fn system_str(system: &EquationSystem) -> String {
    let mut out = String::new();
    for (name, e) in &system.defs {
        out.push_str(&format!("let {name} = {};\n", cw_expr_str(e)));
    }
    out.push_str(&format!("root {}\n", cw_expr_str(&system.root)));
    out
}

#[cfg(test)]
pub fn td_str(bags: &[BTreeSet<Term>], parents: &[Option<usize>]) -> String {
    let mut out = String::new();
    for (i, (bag, parent)) in bags.iter().zip(parents).enumerate() {
        let parent = parent.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        let terms: Vec<String> = bag.iter().map(term_str).collect();
        out.push_str(&format!("bag {i} {parent}: {}.\n", terms.join(", ")));
    }
    out
}

pub fn marked_query_str(mq: &MarkedQuery) -> String {
    let atoms: Vec<String> = mq.atoms().iter().map(atom_str).collect();
    let marked: Vec<String> = mq.marked().iter().map(term_str).collect();
    format!("{} [marked: {}]", atoms.join(", "), marked.join(", "))
}

pub fn parse_td_validated(
    text: &str,
) -> Result<Result<TreeDecomposition, rulebench_core::cliquewidth::CwError>, ParseError> {
    let (bags, parents) = parse_td(text)?;
    Ok(TreeDecomposition::new(bags, parents))
}
