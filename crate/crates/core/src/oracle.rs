//! Reference implementations used to check the matrix engine.
//!
//! Everything here is written as plain loops over rows with hash maps, and
//! shares no kernels with [`crate::laqops`], [`crate::mlops`] or
//! [`crate::fusion`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use crate::benchgen::{Aggregation, ColumnRef, QuerySpec};
use crate::error::Error;
use crate::laqops::{Predicate, ResultRow, Scalar, SortDirection};
use crate::mlops::{Model, Node, TreeModel};
use crate::storage::{ColumnData, StarSchema, Table};
use crate::Result;

pub fn nested_loop_join(r: &[i64], s: &[i64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in r.iter().enumerate() {
        for (j, b) in s.iter().enumerate() {
            if a == b {
                out.push((i, j));
            }
        }
    }
    out
}

/// All matching `(r, s)` index pairs in `(r, s)` order.
pub fn hash_join_keys(r: &[i64], s: &[i64]) -> Vec<(usize, usize)> {
    let mut build: HashMap<i64, Vec<usize>> = HashMap::new();
    for (j, &k) in s.iter().enumerate() {
        build.entry(k).or_default().push(j);
    }
    let mut out = Vec::new();
    for (i, k) in r.iter().enumerate() {
        if let Some(js) = build.get(k) {
            out.extend(js.iter().map(|&j| (i, j)));
        }
    }
    out
}

pub fn hash_join(r: &Table, s: &Table, r_key: &str, s_key: &str) -> Result<Vec<(usize, usize)>> {
    Ok(hash_join_keys(r.int_column(r_key)?, s.int_column(s_key)?))
}

/// Group sums in ascending group order.
pub fn hash_aggregate(groups: &[Vec<i64>], values: &[f64]) -> Vec<(Vec<i64>, f64)> {
    let mut acc: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (g, v) in groups.iter().zip(values) {
        *acc.entry(g.clone()).or_insert(0.0) += v;
    }
    acc.into_iter().collect()
}

pub fn traverse_tree(t: &TreeModel, row: &[f64]) -> Result<i64> {
    let mut id = 0;
    for _ in 0..t.nodes().len() {
        match t.nodes()[id] {
            Node::Leaf { label } => return Ok(label),
            Node::Split {
                feature,
                threshold,
                true_child,
                false_child,
            } => {
                let x = *row.get(feature).ok_or_else(|| {
                    Error::Tree(format!("feature {feature} outside row of {}", row.len()))
                })?;
                id = if x > threshold {
                    true_child
                } else {
                    false_child
                };
            }
        }
    }
    Err(Error::Tree("traversal did not reach a leaf".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Int(i64),
    Float(f64),
}

impl Value {
    fn as_f64(self) -> f64 {
        match self {
            Value::Int(x) => x as f64,
            Value::Float(x) => x,
        }
    }

    fn as_int(self) -> Result<i64> {
        match self {
            Value::Int(x) => Ok(x),
            Value::Float(_) => Err(Error::Type("expected an integer column".into())),
        }
    }
}

/// Row-major table with qualified column names.
struct Relation {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl Relation {
    fn from_table(t: &Table, prefix: &str) -> Self {
        let columns = t
            .schema()
            .columns()
            .iter()
            .map(|c| format!("{prefix}.{}", c.name))
            .collect();
        let rows = (0..t.row_count())
            .map(|r| {
                t.columns()
                    .iter()
                    .map(|c| match c {
                        ColumnData::Int(v) => Value::Int(v[r]),
                        ColumnData::Float(v) => Value::Float(v[r]),
                    })
                    .collect()
            })
            .collect();
        Self { columns, rows }
    }

    fn with_row_ids(mut self, name: &str) -> Self {
        self.columns.push(name.into());
        for (i, row) in self.rows.iter_mut().enumerate() {
            row.push(Value::Int(i as i64));
        }
        self
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Name(name.into()))
    }

    fn filter(mut self, column: &str, p: &Predicate) -> Result<Self> {
        let c = self.position(column)?;
        let mut keep = Vec::with_capacity(self.rows.len());
        for row in self.rows {
            if holds(p, row[c])? {
                keep.push(row);
            }
        }
        self.rows = keep;
        Ok(self)
    }

    /// Inner hash join producing fully materialized output rows.
    fn join(self, other: &Relation, left: &str, right: &str) -> Result<Relation> {
        let lc = self.position(left)?;
        let rc = other.position(right)?;
        let mut build: HashMap<i64, Vec<usize>> = HashMap::new();
        for (j, row) in other.rows.iter().enumerate() {
            build.entry(row[rc].as_int()?).or_default().push(j);
        }
        let mut rows = Vec::new();
        for row in &self.rows {
            if let Some(js) = build.get(&row[lc].as_int()?) {
                for &j in js {
                    let mut joined = row.clone();
                    joined.extend_from_slice(&other.rows[j]);
                    rows.push(joined);
                }
            }
        }
        let mut columns = self.columns;
        columns.extend(other.columns.iter().cloned());
        Ok(Relation { columns, rows })
    }
}

fn holds(p: &Predicate, v: Value) -> Result<bool> {
    let cmp = |c: &Scalar| -> Result<Option<Ordering>> {
        match (v, c) {
            (Value::Int(a), Scalar::Int(b)) => Ok(Some(a.cmp(b))),
            (Value::Float(a), Scalar::Float(b)) => Ok(a.partial_cmp(b)),
            _ => Err(Error::Type(format!("cannot compare {v:?} with {c:?}"))),
        }
    };
    use Ordering::*;
    Ok(match p {
        Predicate::Lt(c) => cmp(c)? == Some(Less),
        Predicate::Le(c) => matches!(cmp(c)?, Some(Less | Equal)),
        Predicate::Eq(c) => cmp(c)? == Some(Equal),
        Predicate::Ge(c) => matches!(cmp(c)?, Some(Greater | Equal)),
        Predicate::Gt(c) => cmp(c)? == Some(Greater),
        Predicate::Between(lo, hi) => {
            matches!(cmp(lo)?, Some(Greater | Equal)) && matches!(cmp(hi)?, Some(Less | Equal))
        }
        Predicate::InSet(cs) => {
            let mut any = false;
            for c in cs {
                any |= cmp(c)? == Some(Equal);
            }
            any
        }
    })
}

fn qualified(c: &ColumnRef) -> String {
    match c {
        ColumnRef::Fact { column } => format!("f.{column}"),
        ColumnRef::Dim { slot, column } => format!("{slot}.{column}"),
    }
}

/// Fact table joined with each link in turn, materializing every intermediate.
fn joined(
    schema: &StarSchema,
    links: &[usize],
    filters: &[(ColumnRef, &Predicate)],
) -> Result<Relation> {
    let mut rel = Relation::from_table(schema.fact(), "f").with_row_ids("f.#row");
    for (c, p) in filters
        .iter()
        .filter(|(c, _)| matches!(c, ColumnRef::Fact { .. }))
    {
        rel = rel.filter(&qualified(c), p)?;
    }
    for (slot, &link) in links.iter().enumerate() {
        let l = schema
            .links()
            .get(link)
            .ok_or_else(|| Error::Index(format!("link {link}")))?;
        let mut dim = Relation::from_table(schema.link_dim(link)?, &slot.to_string());
        for (c, p) in filters {
            if matches!(c, ColumnRef::Dim { slot: s, .. } if *s == slot) {
                dim = dim.filter(&qualified(c), p)?;
            }
        }
        rel = rel.join(
            &dim,
            &format!("f.{}", l.fact_fk),
            &format!("{slot}.{}", l.dim_pk),
        )?;
    }
    Ok(rel)
}

/// Evaluates a star query by sequential hash joins, hash aggregation and a
/// stable sort.
pub fn run_query(schema: &StarSchema, q: &QuerySpec) -> Result<Vec<ResultRow>> {
    let filters: Vec<(ColumnRef, &Predicate)> = q
        .filters
        .iter()
        .map(|f| (f.column.clone(), &f.predicate))
        .collect();
    if let Some((ColumnRef::Dim { slot, .. }, _)) = filters
        .iter()
        .find(|(c, _)| matches!(c, ColumnRef::Dim { slot, .. } if *slot >= q.joins.len()))
    {
        return Err(Error::Index(format!("join slot {slot}")));
    }
    let rel = joined(schema, &q.joins, &filters)?;
    let m = rel.position(&format!("f.{}", q.measure))?;
    let values: Vec<f64> = rel.rows.iter().map(|r| r[m].as_f64()).collect();
    let mut rows = match &q.aggregation {
        Aggregation::Sum => vec![ResultRow {
            group: vec![],
            sum: values.iter().sum(),
        }],
        Aggregation::GroupBySum { group_by } => {
            let cols = group_by
                .iter()
                .map(|c| rel.position(&qualified(c)))
                .collect::<Result<Vec<_>>>()?;
            let groups = rel
                .rows
                .iter()
                .map(|r| {
                    cols.iter()
                        .map(|&c| r[c].as_int())
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            hash_aggregate(&groups, &values)
                .into_iter()
                .map(|(group, sum)| ResultRow { group, sum })
                .collect()
        }
    };
    let width = rows.first().map_or(0, |r| r.group.len());
    if let Some(k) = q.order_by.iter().find(|k| k.col > width) {
        return Err(Error::Index(format!("sort column {}", k.col)));
    }
    rows.sort_by(|a, b| {
        for k in &q.order_by {
            let o = if k.col < width {
                a.group[k.col].cmp(&b.group[k.col])
            } else {
                a.sum.partial_cmp(&b.sum).unwrap_or(Ordering::Equal)
            };
            let o = if k.dir == SortDirection::Desc {
                o.reverse()
            } else {
                o
            };
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    });
    Ok(rows)
}

/// Per-row model output of the reference pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutput {
    Linear(Vec<Vec<f64>>),
    Tree(Vec<i64>),
}

/// Joined fact rows and their predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub fact_rows: Vec<usize>,
    pub output: OracleOutput,
}

/// Joins `links`, assembles the `k`-wide feature row of every joined tuple
/// from `(column, target)` lists per link, and evaluates the model row by row.
pub fn star_pipeline(
    schema: &StarSchema,
    links: &[usize],
    features: &[Vec<(String, usize)>],
    model: &Model,
) -> Result<OracleRun> {
    let k = match model {
        Model::Linear(l) => l.input_width(),
        Model::Tree(t) => t.max_feature().map_or(0, |f| f + 1),
    };
    let rel = joined(schema, links, &[])?;
    let id = rel.position("f.#row")?;
    let mut placed = Vec::new();
    for (slot, cols) in features.iter().enumerate() {
        for (name, t) in cols {
            placed.push((rel.position(&format!("{slot}.{name}"))?, *t));
        }
    }
    let width = placed.iter().map(|&(_, t)| t + 1).max().unwrap_or(0).max(k);
    let mut fact_rows = Vec::with_capacity(rel.rows.len());
    let mut inputs = Vec::with_capacity(rel.rows.len());
    for row in &rel.rows {
        fact_rows.push(row[id].as_int()? as usize);
        let mut x = vec![0.0; width];
        for &(c, t) in &placed {
            x[t] = row[c].as_f64();
        }
        inputs.push(x);
    }
    let output = match model {
        Model::Linear(l) => {
            let w = l.matrix();
            OracleOutput::Linear(
                inputs
                    .iter()
                    .map(|x| {
                        (0..w.cols())
                            .map(|c| (0..w.rows()).map(|t| x[t] * w.get(t, c)).sum())
                            .collect()
                    })
                    .collect(),
            )
        }
        Model::Tree(t) => OracleOutput::Tree(
            inputs
                .iter()
                .map(|x| traverse_tree(t, x))
                .collect::<Result<_>>()?,
        ),
    };
    Ok(OracleRun { fact_rows, output })
}
