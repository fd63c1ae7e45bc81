//! Columnar tables, star-schema metadata and headerless CSV I/O.
//!
//! Only numeric columns exist. Categorical attributes are expected to be
//! dictionary-encoded into `Key` or `Int` columns before they reach a table.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::matrix::DenseMat;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnKind {
    /// Non-negative join or grouping key.
    Key,
    Int,
    Float,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<ColumnDef>,
}

impl Schema {
    pub fn new<S: Into<String>>(
        columns: impl IntoIterator<Item = (S, ColumnKind)>,
    ) -> Result<Self> {
        let columns: Vec<ColumnDef> = columns
            .into_iter()
            .map(|(name, kind)| ColumnDef {
                name: name.into(),
                kind,
            })
            .collect();
        if columns.is_empty() {
            return Err(Error::Shape("schema needs at least one column".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Mapping(format!(
                    "duplicate column name `{}`",
                    c.name
                )));
            }
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Name(name.to_string()))
    }

    pub fn kind(&self, name: &str) -> Result<ColumnKind> {
        Ok(self.columns[self.position(name)?].kind)
    }
}

/// Storage for one column. `Key` and `Int` columns share the integer layout.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Int(Vec<i64>),
    Float(Vec<f64>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int(v) => v.len(),
            ColumnData::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_ints(&self) -> Option<&[i64]> {
        match self {
            ColumnData::Int(v) => Some(v),
            ColumnData::Float(_) => None,
        }
    }

    pub fn as_floats(&self) -> Option<&[f64]> {
        match self {
            ColumnData::Float(v) => Some(v),
            ColumnData::Int(_) => None,
        }
    }

    pub fn value_f64(&self, row: usize) -> f64 {
        match self {
            ColumnData::Int(v) => v[row] as f64,
            ColumnData::Float(v) => v[row],
        }
    }

    pub(crate) fn gather(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Int(v) => ColumnData::Int(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Float(v) => ColumnData::Float(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// Immutable columnar relation.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: Schema,
    columns: Vec<ColumnData>,
    row_count: usize,
}

impl Table {
    pub fn new(schema: Schema, columns: Vec<ColumnData>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Shape(format!(
                "schema has {} columns, got {}",
                schema.len(),
                columns.len()
            )));
        }
        let row_count = columns[0].len();
        for (def, col) in schema.columns().iter().zip(&columns) {
            if col.len() != row_count {
                return Err(Error::Shape(format!(
                    "column `{}` has {} rows, expected {row_count}",
                    def.name,
                    col.len()
                )));
            }
            match (def.kind, col) {
                (ColumnKind::Key, ColumnData::Int(v)) => {
                    if let Some(k) = v.iter().find(|&&k| k < 0) {
                        return Err(Error::Domain(format!("negative key {k} in `{}`", def.name)));
                    }
                }
                (ColumnKind::Int, ColumnData::Int(_))
                | (ColumnKind::Float, ColumnData::Float(_)) => {}
                _ => {
                    return Err(Error::Type(format!(
                        "column `{}` storage does not match {:?}",
                        def.name, def.kind
                    )))
                }
            }
        }
        Ok(Self {
            schema,
            columns,
            row_count,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&ColumnData> {
        Ok(&self.columns[self.schema.position(name)?])
    }

    /// Integer view of a `Key` or `Int` column.
    pub fn int_column(&self, name: &str) -> Result<&[i64]> {
        self.column(name)?
            .as_ints()
            .ok_or_else(|| Error::Type(format!("column `{name}` is not integer")))
    }

    pub fn float_column(&self, name: &str) -> Result<&[f64]> {
        self.column(name)?
            .as_floats()
            .ok_or_else(|| Error::Type(format!("column `{name}` is not float")))
    }

    /// Row subset in the given order.
    pub fn gather_rows(&self, rows: &[usize]) -> Result<Table> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.row_count) {
            return Err(Error::Index(format!("row {r} of {}", self.row_count)));
        }
        Ok(Table {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.gather(rows)).collect(),
            row_count: rows.len(),
        })
    }

    /// Row `i`, column `j` holds the `j`-th named column; integers widen to `f64`.
    pub fn to_matrix(&self, names: &[&str]) -> Result<DenseMat> {
        let cols: Vec<&ColumnData> = names
            .iter()
            .map(|n| self.column(n))
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(self.row_count * cols.len());
        for r in 0..self.row_count {
            data.extend(cols.iter().map(|c| c.value_f64(r)));
        }
        DenseMat::new(self.row_count, cols.len(), data)
    }

    /// All columns, in schema order.
    pub fn to_full_matrix(&self) -> DenseMat {
        let names: Vec<&str> = self
            .schema
            .columns()
            .iter()
            .map(|c| c.name.as_str())
            .collect();
        self.to_matrix(&names).expect("schema columns exist")
    }

    pub fn load_csv(path: impl AsRef<Path>, schema: Schema) -> Result<Table> {
        let file = fs::File::open(path)?;
        Self::read_csv(BufReader::new(file), schema)
    }

    pub fn read_csv<R: Read>(reader: R, schema: Schema) -> Result<Table> {
        let mut cols: Vec<ColumnData> = schema
            .columns()
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Float => ColumnData::Float(Vec::new()),
                _ => ColumnData::Int(Vec::new()),
            })
            .collect();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != schema.len() {
                return Err(Error::Format {
                    line: line_no,
                    msg: format!("expected {} fields, found {}", schema.len(), fields.len()),
                });
            }
            for ((field, def), col) in fields.iter().zip(schema.columns()).zip(cols.iter_mut()) {
                let field = field.trim();
                if field.is_empty() {
                    return Err(Error::Format {
                        line: line_no,
                        msg: format!("missing value for `{}`", def.name),
                    });
                }
                let bad = |e: &dyn std::fmt::Display| Error::Format {
                    line: line_no,
                    msg: format!("`{}`: cannot parse {field:?}: {e}", def.name),
                };
                match col {
                    ColumnData::Int(v) => {
                        let x: i64 = field.parse().map_err(|e| bad(&e))?;
                        if def.kind == ColumnKind::Key && x < 0 {
                            return Err(Error::Format {
                                line: line_no,
                                msg: format!("negative key {x} in `{}`", def.name),
                            });
                        }
                        v.push(x);
                    }
                    ColumnData::Float(v) => v.push(field.parse().map_err(|e| bad(&e))?),
                }
            }
        }
        Table::new(schema, cols)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Floats use the shortest representation that parses back to the same bits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut line = String::new();
        for r in 0..self.row_count {
            line.clear();
            for (j, c) in self.columns.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                match c {
                    ColumnData::Int(v) => write!(line, "{}", v[r]),
                    ColumnData::Float(v) => write!(line, "{:?}", v[r]),
                }
                .expect("writing to a String");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// A fact-table foreign key pointing at a dimension primary key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub fact_fk: String,
    pub dim: String,
    pub dim_pk: String,
}

/// Fact table plus named dimension tables.
///
/// Construction checks that every link resolves and that each referenced
/// primary key is unique, so a fact row matches at most one row per link.
#[derive(Debug, Clone)]
pub struct StarSchema {
    fact: Table,
    dims: Vec<(String, Table)>,
    links: Vec<Link>,
}

impl StarSchema {
    pub fn new(fact: Table, dims: Vec<(String, Table)>, links: Vec<Link>) -> Result<Self> {
        let mut names = HashSet::new();
        for (n, _) in &dims {
            if !names.insert(n.as_str()) {
                return Err(Error::Mapping(format!("duplicate dimension name `{n}`")));
            }
        }
        let s = Self { fact, dims, links };
        for link in &s.links {
            if s.fact.schema().kind(&link.fact_fk)? != ColumnKind::Key {
                return Err(Error::Type(format!(
                    "`{}` is not a Key column",
                    link.fact_fk
                )));
            }
            let dim = s.dim(&link.dim)?;
            if dim.schema().kind(&link.dim_pk)? != ColumnKind::Key {
                return Err(Error::Type(format!(
                    "`{}.{}` is not a Key column",
                    link.dim, link.dim_pk
                )));
            }
            let mut seen = HashSet::with_capacity(dim.row_count());
            for &k in dim.int_column(&link.dim_pk)? {
                if !seen.insert(k) {
                    return Err(Error::DuplicateKey {
                        table: link.dim.clone(),
                        column: link.dim_pk.clone(),
                        key: k,
                    });
                }
            }
        }
        Ok(s)
    }

    pub fn fact(&self) -> &Table {
        &self.fact
    }

    pub fn dims(&self) -> &[(String, Table)] {
        &self.dims
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn dim(&self, name: &str) -> Result<&Table> {
        self.dims
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Name(format!("dimension `{name}`")))
    }

    pub fn link_dim(&self, link: usize) -> Result<&Table> {
        let l = self
            .links
            .get(link)
            .ok_or_else(|| Error::Index(format!("link {link} of {}", self.links.len())))?;
        self.dim(&l.dim)
    }
}
