//! Pedigree records, validation and canonical ordering.
//!
//! Members are renumbered so that every known parent precedes its offspring.
//! For each member the two parent slots are normalised so that the later
//! parent (larger index) comes first; a single known parent always occupies
//! that first slot.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parent links of one member, as indices into the canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parents {
    Unknown,
    One(usize),
    /// `Two(p, q)` with `p >= q`.
    Two(usize, usize),
}

impl Parents {
    fn normalized(a: Option<usize>, b: Option<usize>) -> Parents {
        match (a, b) {
            (None, None) => Parents::Unknown,
            (Some(x), None) | (None, Some(x)) => Parents::One(x),
            (Some(x), Some(y)) => Parents::Two(x.max(y), x.min(y)),
        }
    }

    /// The later-indexed known parent.
    pub fn p(self) -> Option<usize> {
        match self {
            Parents::Unknown => None,
            Parents::One(p) | Parents::Two(p, _) => Some(p),
        }
    }

    /// The earlier-indexed parent, when both are known.
    pub fn q(self) -> Option<usize> {
        match self {
            Parents::Two(_, q) => Some(q),
            _ => None,
        }
    }

    pub fn known(self) -> usize {
        match self {
            Parents::Unknown => 0,
            Parents::One(_) => 1,
            Parents::Two(..) => 2,
        }
    }
}

/// One row of a pedigree file before canonicalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberRecord {
    pub id: String,
    pub sire: Option<String>,
    pub dam: Option<String>,
    pub ebv: f64,
}

/// Canonically ordered pedigree with breeding values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedigree {
    labels: Vec<String>,
    parents: Vec<Parents>,
    ebv: Vec<f64>,
}

/// Members split by how many parents are known.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupPartition {
    pub no_parents: Vec<usize>,
    pub one_parent: Vec<usize>,
    pub two_parents: Vec<usize>,
}

impl GroupPartition {
    pub fn len(&self) -> usize {
        self.no_parents.len() + self.one_parent.len() + self.two_parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Pedigree {
    /// Builds a pedigree that is already in canonical order.
    pub fn new(labels: Vec<String>, parents: Vec<Parents>, ebv: Vec<f64>) -> Result<Self> {
        let m = labels.len();
        if parents.len() != m || ebv.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: if parents.len() != m { parents.len() } else { ebv.len() },
            });
        }
        for (i, par) in parents.iter().enumerate() {
            let ok = match *par {
                Parents::Unknown => true,
                Parents::One(p) => p < i,
                Parents::Two(p, q) => p < i && q <= p,
            };
            if !ok {
                return Err(Error::InvalidInstance(format!(
                    "member {} violates canonical parent order",
                    labels[i]
                )));
            }
            if !ebv[i].is_finite() {
                return Err(Error::InvalidInstance(format!("member {} has non-finite EBV", labels[i])));
            }
        }
        Ok(Pedigree { labels, parents, ebv })
    }

    /// Validates records and renumbers them into canonical order.
    ///
    /// Input that already lists parents before offspring keeps its row
    /// order. Otherwise members are ordered by generation depth and then by
    /// label (numeric labels compare numerically), which makes the result
    /// independent of the input row order.
    pub fn from_records(records: Vec<MemberRecord>) -> Result<Self> {
        let n = records.len();
        let mut index: HashMap<&str, usize> = HashMap::with_capacity(n);
        for (k, r) in records.iter().enumerate() {
            if index.insert(r.id.as_str(), k).is_some() {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        let lookup = |member: &MemberRecord, parent: &Option<String>| -> Result<Option<usize>> {
            match parent {
                None => Ok(None),
                Some(pid) if *pid == member.id => Err(Error::SelfParent(member.id.clone())),
                Some(pid) => index.get(pid.as_str()).copied().map(Some).ok_or_else(|| {
                    Error::UndefinedParent {
                        member: member.id.clone(),
                        parent: pid.clone(),
                    }
                }),
            }
        };
        let mut links = Vec::with_capacity(n);
        for r in &records {
            links.push((lookup(r, &r.sire)?, lookup(r, &r.dam)?));
        }

        let in_order = links
            .iter()
            .enumerate()
            .all(|(k, (a, b))| a.is_none_or(|a| a < k) && b.is_none_or(|b| b < k));
        let order: Vec<usize> = if in_order {
            (0..n).collect()
        } else {
            let depth = generation_depths(&links, &records)?;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                depth[a]
                    .cmp(&depth[b])
                    .then_with(|| natural_cmp(&records[a].id, &records[b].id))
                    .then(a.cmp(&b))
            });
            order
        };

        let mut new_index = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let parents = order
            .iter()
            .map(|&old| {
                let (a, b) = links[old];
                Parents::normalized(a.map(|x| new_index[x]), b.map(|x| new_index[x]))
            })
            .collect();
        let mut labels = Vec::with_capacity(n);
        let mut ebv = Vec::with_capacity(n);
        let mut records: Vec<Option<MemberRecord>> = records.into_iter().map(Some).collect();
        for &old in &order {
            let r = records[old].take().unwrap();
            labels.push(r.id);
            ebv.push(r.ebv);
        }
        Pedigree::new(labels, parents, ebv)
    }

    /// Member count `m`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn parents(&self) -> &[Parents] {
        &self.parents
    }

    pub fn ebv(&self) -> &[f64] {
        &self.ebv
    }

    pub fn classify(&self) -> GroupPartition {
        classify(self)
    }

    /// Writes the canonical pedigree as CSV; parsing the output yields an
    /// identical pedigree.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "id,sire,dam,ebv")?;
        let label = |p: Option<usize>| p.map_or("0", |p| self.labels[p].as_str());
        for i in 0..self.len() {
            let par = self.parents[i];
            writeln!(
                sink,
                "{},{},{},{}",
                self.labels[i],
                label(par.p()),
                label(par.q()),
                self.ebv[i]
            )?;
        }
        Ok(())
    }
}

/// Splits members into the three parent-knowledge groups.
pub fn classify(ped: &Pedigree) -> GroupPartition {
    let mut out = GroupPartition::default();
    for (i, par) in ped.parents.iter().enumerate() {
        match par {
            Parents::Unknown => out.no_parents.push(i),
            Parents::One(_) => out.one_parent.push(i),
            Parents::Two(..) => out.two_parents.push(i),
        }
    }
    out
}

/// Parses pedigree CSV (`id,sire,dam,ebv`; `0` or empty marks an unknown
/// parent; `#` starts a comment line).
pub fn parse_pedigree<R: Read>(input: R) -> Result<Pedigree> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);

    let headers = reader.headers().map_err(csv_error)?.clone();
    let expected = ["id", "sire", "dam", "ebv"];
    if headers.len() != expected.len()
        || !headers.iter().zip(expected).all(|(h, e)| h.eq_ignore_ascii_case(e))
    {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `id,sire,dam,ebv`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message };
        let id = row[0].to_string();
        if is_unknown(&id) {
            return Err(parse_err("member id must be non-empty and not `0`".into()));
        }
        let parent = |s: &str| (!is_unknown(s)).then(|| s.to_string());
        let ebv_text = &row[3];
        if ebv_text.is_empty() {
            return Err(parse_err(format!("member `{id}` has no EBV")));
        }
        let ebv: f64 = ebv_text
            .parse()
            .map_err(|_| parse_err(format!("malformed EBV `{ebv_text}` for member `{id}`")))?;
        if !ebv.is_finite() {
            return Err(parse_err(format!("non-finite EBV for member `{id}`")));
        }
        records.push(MemberRecord {
            sire: parent(&row[1]),
            dam: parent(&row[2]),
            id,
            ebv,
        });
    }
    Pedigree::from_records(records)
}

fn is_unknown(s: &str) -> bool {
    s.is_empty() || s == "0"
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Integer labels compare numerically and sort before other labels.
fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<i128>(), b.parse::<i128>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Longest ancestor chain length per record; founders have depth 0.
fn generation_depths(
    links: &[(Option<usize>, Option<usize>)],
    records: &[MemberRecord],
) -> Result<Vec<usize>> {
    const UNVISITED: u8 = 0;
    const ACTIVE: u8 = 1;
    const DONE: u8 = 2;
    let n = links.len();
    let mut state = vec![UNVISITED; n];
    let mut depth = vec![0usize; n];
    let mut stack: Vec<(usize, u8)> = Vec::new();
    for root in 0..n {
        if state[root] != UNVISITED {
            continue;
        }
        stack.push((root, 0));
        state[root] = ACTIVE;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            let (a, b) = links[v];
            let child = match *next {
                0 => a,
                1 => b,
                _ => {
                    let d = [a, b].iter().flatten().map(|&u| depth[u] + 1).max().unwrap_or(0);
                    depth[v] = d;
                    state[v] = DONE;
                    stack.pop();
                    continue;
                }
            };
            *next += 1;
            if let Some(u) = child {
                match state[u] {
                    UNVISITED => {
                        state[u] = ACTIVE;
                        stack.push((u, 0));
                    }
                    ACTIVE => return Err(Error::CyclicAncestry(records[u].id.clone())),
                    _ => {}
                }
            }
        }
    }
    Ok(depth)
}
