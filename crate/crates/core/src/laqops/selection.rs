use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error};
use crate::matrix::DenseMat;
use crate::storage::{ColumnData, Table};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scalar {
    Int(i64),
    Float(f64),
}

/// Row predicate on a single column. `Between` is inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    Lt(Scalar),
    Le(Scalar),
    Eq(Scalar),
    Ge(Scalar),
    Gt(Scalar),
    Between(Scalar, Scalar),
    InSet(Vec<Scalar>),
}

impl Predicate {
    fn constants(&self) -> Vec<Scalar> {
        match self {
            Predicate::Lt(c)
            | Predicate::Le(c)
            | Predicate::Eq(c)
            | Predicate::Ge(c)
            | Predicate::Gt(c) => {
                vec![*c]
            }
            Predicate::Between(a, b) => vec![*a, *b],
            Predicate::InSet(v) => v.clone(),
        }
    }

    fn test<T: PartialOrd + Copy>(&self, x: T, consts: &[T]) -> bool {
        let cmp = |c: T| x.partial_cmp(&c);
        match self {
            Predicate::Lt(_) => cmp(consts[0]) == Some(Ordering::Less),
            Predicate::Le(_) => matches!(cmp(consts[0]), Some(Ordering::Less | Ordering::Equal)),
            Predicate::Eq(_) => cmp(consts[0]) == Some(Ordering::Equal),
            Predicate::Ge(_) => matches!(cmp(consts[0]), Some(Ordering::Greater | Ordering::Equal)),
            Predicate::Gt(_) => cmp(consts[0]) == Some(Ordering::Greater),
            Predicate::Between(..) => x >= consts[0] && x <= consts[1],
            Predicate::InSet(_) => consts.iter().any(|&c| cmp(c) == Some(Ordering::Equal)),
        }
    }
}

/// Binary selection vector over the rows of one table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMask {
    bits: Vec<bool>,
}

impl SelectionMask {
    pub fn all(len: usize) -> Self {
        Self {
            bits: vec![true; len],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Row ids with a set bit, ascending.
    pub fn selected(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Element-wise conjunction.
    pub fn and(&self, other: &SelectionMask) -> Result<SelectionMask> {
        if self.len() != other.len() {
            return Err(shape_err!(
                "mask lengths {} and {}",
                self.len(),
                other.len()
            ));
        }
        Ok(SelectionMask {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a && b)
                .collect(),
        })
    }
}

/// Evaluates `predicate` on every element of `col`. Integer columns take
/// integer constants and float columns take float constants.
pub fn build_selection_mask(col: &ColumnData, predicate: &Predicate) -> Result<SelectionMask> {
    let consts = predicate.constants();
    if let Predicate::InSet(v) = predicate {
        if v.is_empty() {
            return Ok(SelectionMask::from_bits(vec![false; col.len()]));
        }
    }
    let bits = match col {
        ColumnData::Int(values) => {
            let c: Vec<i64> = consts
                .iter()
                .map(|s| match s {
                    Scalar::Int(x) => Ok(*x),
                    Scalar::Float(x) => {
                        Err(Error::Type(format!("float constant {x} on integer column")))
                    }
                })
                .collect::<Result<_>>()?;
            values.iter().map(|&x| predicate.test(x, &c)).collect()
        }
        ColumnData::Float(values) => {
            let c: Vec<f64> = consts
                .iter()
                .map(|s| match s {
                    Scalar::Float(x) => Ok(*x),
                    Scalar::Int(x) => {
                        Err(Error::Type(format!("integer constant {x} on float column")))
                    }
                })
                .collect::<Result<_>>()?;
            values.iter().map(|&x| predicate.test(x, &c)).collect()
        }
    };
    Ok(SelectionMask { bits })
}

/// Row selection under a mask, keeping the original row order.
pub trait MaskSelect: Sized {
    fn select(&self, mask: &SelectionMask) -> Result<Self>;
}

impl MaskSelect for DenseMat {
    fn select(&self, mask: &SelectionMask) -> Result<Self> {
        if mask.len() != self.rows() {
            return Err(shape_err!(
                "mask has {} bits for {} rows",
                mask.len(),
                self.rows()
            ));
        }
        // row copy per selected bit
        let mut data = Vec::with_capacity(mask.count() * self.cols());
        for (r, &keep) in mask.bits.iter().enumerate() {
            if keep {
                data.extend_from_slice(self.row(r));
            }
        }
        DenseMat::new(mask.count(), self.cols(), data)
    }
}

impl MaskSelect for Table {
    fn select(&self, mask: &SelectionMask) -> Result<Self> {
        if mask.len() != self.row_count() {
            return Err(shape_err!(
                "mask has {} bits for {} rows",
                mask.len(),
                self.row_count()
            ));
        }
        self.gather_rows(&mask.selected())
    }
}

pub fn apply_mask<T: MaskSelect>(t: &T, mask: &SelectionMask) -> Result<T> {
    t.select(mask)
}
