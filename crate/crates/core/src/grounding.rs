//! Tuple-independent tables, Boolean conjunctive queries and their lineage.
//!
//! Grounding joins the atoms left to right with hash lookups on the
//! already-bound query variables. Every distinct binding of a prefix
//! contributes one shared subtree, so the lineage comes out factorized along
//! the atom order: `R(X), S(X,Y), T(Y)` yields `r1 (s1 t1 ∨ s2 t2) ∨ r2 s3 t2`
//! rather than the flat DNF.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::formula::{Formula, VarId};
use crate::table::{ProbTable, Provenance};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub id: VarId,
    pub values: Vec<String>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub schema: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn arity(&self) -> usize {
        self.schema.len()
    }
}

/// A set of tuple-independent tables. Tuple ids are unique across tables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Database {
    tables: BTreeMap<String, Table>,
}

impl Database {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.values()
    }

    /// Probabilities of every tuple in every table.
    pub fn var_table(&self) -> ProbTable<f64> {
        let mut vt = ProbTable::new();
        for t in self.tables.values() {
            for r in &t.rows {
                vt.insert(r.id.clone(), r.p)
                    .expect("rows are validated on load");
                vt.set_provenance(
                    r.id.clone(),
                    Provenance {
                        table: t.name.clone(),
                        key: r.values.join(","),
                    },
                );
            }
        }
        vt
    }
}

fn csv_error(table: &str, message: impl fmt::Display) -> Error {
    Error::Csv {
        table: table.to_string(),
        message: message.to_string(),
    }
}

fn parse_table(name: &str, content: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(content.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(name, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.last().map(String::as_str) != Some("_p") {
        return Err(csv_error(name, "last column must be `_p`"));
    }
    let has_id = header.first().map(String::as_str) == Some("_id");
    let attrs_from = usize::from(has_id);
    let schema: Vec<String> = header[attrs_from..header.len() - 1].to_vec();
    if schema.iter().any(|a| a == "_id" || a == "_p") {
        return Err(csv_error(name, "`_id` must be the first and `_p` the last column"));
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(name, e))?;
        let id_text = if has_id {
            record[0].to_string()
        } else {
            format!("{}{}", name.to_lowercase(), i + 1)
        };
        let id = VarId::new(&id_text)?;
        let p_text = &record[header.len() - 1];
        let p: f64 = p_text
            .parse()
            .map_err(|_| csv_error(name, format!("row {}: `{p_text}` is not a number", i + 1)))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityOutOfRange {
                name: id_text,
                value: p_text.to_string(),
            });
        }
        let values = (attrs_from..header.len() - 1)
            .map(|j| record[j].to_string())
            .collect();
        rows.push(Row { id, values, p });
    }
    Ok(Table {
        name: name.to_string(),
        schema,
        rows,
    })
}

/// Builds a database from `(table name, CSV content)` pairs.
///
/// Each CSV has a header whose last column is `_p`. An optional first
/// column `_id` names the tuples; otherwise tuple `i` (1-based) of table `R`
/// is called `ri`.
pub fn load_tables<S: AsRef<str>, C: AsRef<str>>(sources: &[(S, C)]) -> Result<Database> {
    let mut db = Database::default();
    let mut seen: HashMap<VarId, String> = HashMap::new();
    for (name, content) in sources {
        let name = name.as_ref();
        let table = parse_table(name, content.as_ref())?;
        for r in &table.rows {
            if seen.insert(r.id.clone(), name.to_string()).is_some() {
                return Err(Error::DuplicateTupleId {
                    table: name.to_string(),
                    id: r.id.to_string(),
                });
            }
        }
        if db.tables.insert(name.to_string(), table).is_some() {
            return Err(csv_error(name, "table defined twice"));
        }
    }
    Ok(db)
}

/// Loads every `*.csv` file of a directory; the file stem is the table name.
pub fn load_dir(dir: &Path) -> std::io::Result<Result<Database>> {
    let mut sources = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            sources.push((name, std::fs::read_to_string(&path)?));
        }
    }
    sources.sort();
    Ok(load_tables(&sources))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "'{c}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub table: String,
    pub args: Vec<Term>,
}

/// A Boolean conjunctive query. The atom order is the join order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub atoms: Vec<Atom>,
}

impl Query {
    /// Query variables in order of first appearance.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for a in &self.atoms {
            for t in &a.args {
                if let Term::Var(v) = t {
                    if !out.contains(&v.as_str()) {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    /// The same query with the atoms in the given order.
    pub fn permuted(&self, order: &[usize]) -> Query {
        Query {
            atoms: order.iter().map(|&i| self.atoms[i].clone()).collect(),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Q :- ")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}(", a.table)?;
            for (j, t) in a.args.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

struct QueryParser<'a> {
    chars: Vec<char>,
    pos: usize,
    text: &'a str,
}

impl QueryParser<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: 1,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        self.skip_ws();
        let found: String = self.chars.iter().skip(self.pos).take(token.chars().count()).collect();
        if found == token {
            self.pos += token.chars().count();
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self
            .chars
            .get(self.pos)
            .is_some_and(|c| c.is_alphanumeric() || *c == '_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a name"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn term(&mut self) -> Result<Term> {
        match self.peek() {
            Some(q @ ('\'' | '"')) => {
                self.pos += 1;
                let start = self.pos;
                while self.chars.get(self.pos).is_some_and(|c| *c != q) {
                    self.pos += 1;
                }
                if self.pos >= self.chars.len() {
                    return Err(self.error("unterminated constant"));
                }
                let value = self.chars[start..self.pos].iter().collect();
                self.pos += 1;
                Ok(Term::Const(value))
            }
            _ => {
                let name = self.ident()?;
                if name.starts_with(|c: char| c.is_uppercase()) {
                    Ok(Term::Var(name))
                } else {
                    Ok(Term::Const(name))
                }
            }
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let table = self.ident()?;
        self.expect("(")?;
        let mut args = vec![self.term()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            args.push(self.term()?);
        }
        self.expect(")")?;
        Ok(Atom { table, args })
    }

    fn query(&mut self) -> Result<Query> {
        self.ident()?;
        self.expect(":-")?;
        if self.peek().is_none() {
            return Err(Error::EmptyQuery);
        }
        let mut atoms = vec![self.atom()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            atoms.push(self.atom()?);
        }
        if self.peek().is_some() {
            return Err(self.error(format!("unexpected input after query `{}`", self.text.trim())));
        }
        Ok(Query { atoms })
    }
}

/// Parses `Q :- R(X), S(X,'d'), T(Y)`. Names starting with an uppercase
/// letter are query variables; quoted or other bare tokens are constants.
pub fn parse_query(text: &str) -> Result<Query> {
    QueryParser {
        chars: text.chars().collect(),
        pos: 0,
        text,
    }
    .query()
}

/// How one atom is matched: which columns are looked up in the hash index,
/// and which columns bind or re-check query variables.
struct AtomPlan<'a> {
    table: &'a Table,
    /// `(column, term)` pairs known before the atom is visited.
    keyed: Vec<(usize, Term)>,
    /// `(column, variable slot)` pairs first bound by this atom.
    binds: Vec<(usize, usize)>,
    index: HashMap<Vec<&'a str>, Vec<usize>>,
}

struct Grounder<'a> {
    plans: Vec<AtomPlan<'a>>,
    /// Variable slots still needed by atoms `i..`.
    live: Vec<Vec<usize>>,
    slot_of: HashMap<String, usize>,
    memo: HashMap<(usize, Vec<String>), Formula>,
}

impl<'a> Grounder<'a> {
    fn new(q: &Query, db: &'a Database) -> Result<Self> {
        let mut slot_of: HashMap<String, usize> = HashMap::new();
        let mut plans = Vec::new();
        for atom in &q.atoms {
            let table = db
                .table(&atom.table)
                .ok_or_else(|| Error::UnknownTable(atom.table.clone()))?;
            if table.arity() != atom.args.len() {
                return Err(Error::ArityMismatch {
                    table: atom.table.clone(),
                    expected: table.arity(),
                    found: atom.args.len(),
                });
            }
            let mut keyed = Vec::new();
            let mut binds = Vec::new();
            // Pairs of columns that must agree because a variable repeats.
            let mut equal = Vec::new();
            let mut first_here: HashMap<&str, usize> = HashMap::new();
            for (col, term) in atom.args.iter().enumerate() {
                match term {
                    Term::Const(_) => keyed.push((col, term.clone())),
                    Term::Var(v) if slot_of.contains_key(v) => keyed.push((col, term.clone())),
                    Term::Var(v) => match first_here.get(v.as_str()) {
                        Some(&c) => equal.push((c, col)),
                        None => {
                            first_here.insert(v, col);
                            binds.push((col, usize::MAX));
                        }
                    },
                }
            }
            for (col, slot) in binds.iter_mut() {
                let Term::Var(v) = &atom.args[*col] else { unreachable!() };
                let next = slot_of.len();
                *slot = *slot_of.entry(v.clone()).or_insert(next);
            }
            let mut index: HashMap<Vec<&str>, Vec<usize>> = HashMap::new();
            for (i, row) in table.rows.iter().enumerate() {
                if equal.iter().any(|&(a, b)| row.values[a] != row.values[b]) {
                    continue;
                }
                let key = keyed.iter().map(|(c, _)| row.values[*c].as_str()).collect();
                index.entry(key).or_default().push(i);
            }
            plans.push(AtomPlan {
                table,
                keyed,
                binds,
                index,
            });
        }
        let mut live = vec![Vec::new(); q.atoms.len() + 1];
        for i in (0..q.atoms.len()).rev() {
            let mut slots = live[i + 1].clone();
            for t in &q.atoms[i].args {
                if let Term::Var(v) = t {
                    let s = slot_of[v];
                    if !slots.contains(&s) {
                        slots.push(s);
                    }
                }
            }
            slots.sort_unstable();
            live[i] = slots;
        }
        Ok(Self {
            plans,
            live,
            slot_of,
            memo: HashMap::new(),
        })
    }

    /// Lineage of atoms `i..` under the binding.
    fn ground_from(&mut self, i: usize, binding: &mut Vec<Option<String>>) -> Formula {
        if i == self.plans.len() {
            return Formula::True;
        }
        let memo_key: Vec<String> = self.live[i]
            .iter()
            .filter_map(|&s| binding[s].clone())
            .collect();
        if let Some(f) = self.memo.get(&(i, memo_key.clone())) {
            return f.clone();
        }
        let plan = &self.plans[i];
        let key: Vec<&str> = plan
            .keyed
            .iter()
            .map(|(_, t)| match t {
                Term::Const(c) => c.as_str(),
                Term::Var(v) => binding[self.slot_of[v]].as_deref().expect("bound earlier"),
            })
            .collect();
        let matches: Vec<(VarId, Vec<(usize, String)>)> = plan
            .index
            .get(&key)
            .into_iter()
            .flatten()
            .map(|&r| {
                let row = &plan.table.rows[r];
                let binds = plan
                    .binds
                    .iter()
                    .map(|&(col, slot)| (slot, row.values[col].clone()))
                    .collect();
                (row.id.clone(), binds)
            })
            .collect();

        let mut disjuncts = Vec::new();
        for (id, binds) in matches {
            for (slot, value) in &binds {
                binding[*slot] = Some(value.clone());
            }
            let rest = self.ground_from(i + 1, binding);
            for (slot, _) in &binds {
                binding[*slot] = None;
            }
            match rest {
                Formula::False => {}
                Formula::True => disjuncts.push(Formula::Var(id)),
                rest => disjuncts.push(Formula::and([Formula::Var(id), rest])),
            }
        }
        let f = Formula::or(disjuncts);
        self.memo.insert((i, memo_key), f.clone());
        f
    }
}

/// Lineage of a Boolean query, factorized along the atom order and
/// simplified. The table holds exactly the variables of the formula.
pub fn ground(q: &Query, db: &Database) -> Result<(ProbTable<f64>, Formula)> {
    if q.atoms.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut g = Grounder::new(q, db)?;
    let mut binding = vec![None; g.slot_of.len()];
    let f = g.ground_from(0, &mut binding).simplify();
    Ok((db.var_table().restricted_to(&f), f))
}
