use serde::{Deserialize, Serialize};

use crate::benchgen::{LINK_COMMITDATE, LINK_ORDERDATE, LINK_PART, LINK_SUPPLIER};
use crate::error::Error;
use crate::laqops::{build_selection_mask, Predicate, Scalar, SelectionMask, SortKey};
use crate::storage::StarSchema;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryGroup {
    G1,
    G2,
    G3,
    G4,
}

impl QueryGroup {
    pub const ALL: [QueryGroup; 4] = [
        QueryGroup::G1,
        QueryGroup::G2,
        QueryGroup::G3,
        QueryGroup::G4,
    ];

    pub fn join_count(self) -> usize {
        match self {
            QueryGroup::G1 => 1,
            QueryGroup::G2 | QueryGroup::G3 => 3,
            QueryGroup::G4 => 4,
        }
    }

    pub fn grouped(self) -> bool {
        self != QueryGroup::G1
    }

    pub fn sorted(self) -> bool {
        self != QueryGroup::G1
    }

    fn index(self) -> usize {
        self as usize + 1
    }
}

impl std::str::FromStr for QueryGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches(['G', 'g']) {
            "1" => Ok(QueryGroup::G1),
            "2" => Ok(QueryGroup::G2),
            "3" => Ok(QueryGroup::G3),
            "4" => Ok(QueryGroup::G4),
            _ => Err(Error::Gen(format!("unknown query group `{s}`"))),
        }
    }
}

/// A fact column, or a column of the dimension joined in `slot` of the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "table", rename_all = "lowercase")]
pub enum ColumnRef {
    Fact { column: String },
    Dim { slot: usize, column: String },
}

impl ColumnRef {
    fn fact(c: &str) -> Self {
        ColumnRef::Fact { column: c.into() }
    }

    fn dim(slot: usize, c: &str) -> Self {
        ColumnRef::Dim {
            slot,
            column: c.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub column: ColumnRef,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Aggregation {
    Sum,
    GroupBySum { group_by: Vec<ColumnRef> },
}

/// One star query: inner joins over `joins` (link indices), conjunctive
/// filters, then `SUM(measure)` optionally grouped and ordered. Sort column
/// `n` refers to the `n`-th group column, and one past the last group column
/// to the sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub id: String,
    pub group: QueryGroup,
    pub joins: Vec<usize>,
    pub filters: Vec<Filter>,
    pub measure: String,
    pub aggregation: Aggregation,
    pub order_by: Vec<SortKey>,
    pub target_selectivity: f64,
    pub realized_selectivity: f64,
}

const TUNING_COLUMN: &str = "lo_extendedprice";

/// Selectivity targets per group, each below the selectivity of the
/// query's structural filters on uniform data.
pub fn default_targets(group: QueryGroup) -> [f64; 3] {
    match group {
        QueryGroup::G1 => [0.10, 0.05, 0.02],
        QueryGroup::G2 => [0.03, 0.02, 0.01],
        QueryGroup::G3 => [0.05, 0.03, 0.008],
        QueryGroup::G4 => [0.05, 0.015, 0.008],
    }
}

fn int(x: i64) -> Scalar {
    Scalar::Int(x)
}

fn f(column: ColumnRef, predicate: Predicate) -> Filter {
    Filter { column, predicate }
}

struct Template {
    joins: Vec<usize>,
    filters: Vec<Filter>,
    aggregation: Aggregation,
    order_by: Vec<SortKey>,
}

fn templates(group: QueryGroup) -> [Template; 3] {
    use ColumnRef as C;
    use Predicate::*;
    let three = vec![LINK_PART, LINK_SUPPLIER, LINK_ORDERDATE];
    let four = vec![LINK_PART, LINK_SUPPLIER, LINK_ORDERDATE, LINK_COMMITDATE];
    let gb = |cols: &[(usize, &str)]| Aggregation::GroupBySum {
        group_by: cols.iter().map(|&(s, c)| C::dim(s, c)).collect(),
    };
    let asc = |n: usize| (0..n).map(SortKey::asc).collect::<Vec<_>>();
    match group {
        QueryGroup::G1 => {
            let t = |filters| Template {
                joins: vec![LINK_ORDERDATE],
                filters,
                aggregation: Aggregation::Sum,
                order_by: vec![],
            };
            [
                t(vec![
                    f(C::dim(0, "d_year"), Le(int(1995))),
                    f(C::fact("lo_discount"), Between(int(1), int(3))),
                ]),
                t(vec![
                    f(C::dim(0, "d_year"), Between(int(1994), int(1996))),
                    f(C::fact("lo_quantity"), Between(int(26), int(35))),
                ]),
                t(vec![
                    f(C::dim(0, "d_year"), Eq(int(1994))),
                    f(C::fact("lo_discount"), Between(int(5), int(7))),
                ]),
            ]
        }
        QueryGroup::G2 => {
            let t = |filters| Template {
                joins: three.clone(),
                filters,
                aggregation: gb(&[(2, "d_year"), (0, "p_brand")]),
                order_by: asc(2),
            };
            [
                t(vec![
                    f(C::dim(0, "p_mfgr"), Le(int(2))),
                    f(C::dim(1, "s_region"), Eq(int(1))),
                ]),
                t(vec![
                    f(C::dim(0, "p_category"), Between(int(21), int(25))),
                    f(C::dim(1, "s_region"), Eq(int(2))),
                ]),
                t(vec![
                    f(C::dim(0, "p_category"), Eq(int(33))),
                    f(C::dim(1, "s_region"), InSet(vec![int(0), int(3), int(4)])),
                ]),
            ]
        }
        QueryGroup::G3 => {
            let years = || f(C::dim(2, "d_year"), Between(int(1992), int(1997)));
            [
                Template {
                    joins: three.clone(),
                    filters: vec![
                        f(C::dim(0, "p_mfgr"), Le(int(3))),
                        f(C::dim(1, "s_region"), Eq(int(2))),
                        years(),
                    ],
                    aggregation: gb(&[(0, "p_mfgr"), (1, "s_nation"), (2, "d_year")]),
                    order_by: vec![SortKey::asc(2), SortKey::desc(3)],
                },
                Template {
                    joins: three.clone(),
                    filters: vec![
                        f(C::dim(0, "p_mfgr"), Eq(int(3))),
                        f(C::dim(1, "s_region"), InSet(vec![int(1), int(2)])),
                        years(),
                    ],
                    aggregation: gb(&[(0, "p_category"), (1, "s_nation"), (2, "d_year")]),
                    order_by: vec![SortKey::asc(2), SortKey::desc(3)],
                },
                Template {
                    joins: three.clone(),
                    filters: vec![
                        f(C::dim(0, "p_mfgr"), InSet(vec![int(1), int(5)])),
                        f(C::dim(1, "s_region"), InSet(vec![int(3), int(4)])),
                        f(C::dim(2, "d_year"), Eq(int(1997))),
                    ],
                    aggregation: gb(&[(1, "s_city"), (2, "d_year")]),
                    order_by: vec![SortKey::asc(1), SortKey::desc(2)],
                },
            ]
        }
        QueryGroup::G4 => {
            let region = || f(C::dim(1, "s_region"), InSet(vec![int(1), int(2)]));
            let late = || f(C::dim(2, "d_year"), InSet(vec![int(1997), int(1998)]));
            [
                Template {
                    joins: four.clone(),
                    filters: vec![
                        region(),
                        f(C::dim(0, "p_mfgr"), InSet(vec![int(1), int(2)])),
                        f(C::dim(3, "d_year"), Le(int(1997))),
                    ],
                    aggregation: gb(&[(2, "d_year"), (1, "s_nation")]),
                    order_by: asc(2),
                },
                Template {
                    joins: four.clone(),
                    filters: vec![
                        region(),
                        f(C::dim(0, "p_mfgr"), InSet(vec![int(1), int(2)])),
                        late(),
                    ],
                    aggregation: gb(&[(2, "d_year"), (1, "s_nation"), (0, "p_category")]),
                    order_by: asc(3),
                },
                Template {
                    joins: four.clone(),
                    filters: vec![
                        region(),
                        f(C::dim(0, "p_category"), Between(int(11), int(15))),
                        late(),
                    ],
                    aggregation: gb(&[(2, "d_year"), (1, "s_city"), (0, "p_brand")]),
                    order_by: asc(3),
                },
            ]
        }
    }
}

/// Fact rows surviving the joins and filters of a query.
fn surviving_rows(schema: &StarSchema, joins: &[usize], filters: &[Filter]) -> Result<Vec<usize>> {
    let fact = schema.fact();
    let mut fact_mask = SelectionMask::all(fact.row_count());
    let mut dim_ok: Vec<Vec<bool>> = Vec::with_capacity(joins.len());
    for &link in joins {
        dim_ok.push(vec![true; schema.link_dim(link)?.row_count()]);
    }
    for flt in filters {
        match &flt.column {
            ColumnRef::Fact { column } => {
                fact_mask =
                    fact_mask.and(&build_selection_mask(fact.column(column)?, &flt.predicate)?)?;
            }
            ColumnRef::Dim { slot, column } => {
                let link = *joins
                    .get(*slot)
                    .ok_or_else(|| Error::Index(format!("join slot {slot}")))?;
                let m =
                    build_selection_mask(schema.link_dim(link)?.column(column)?, &flt.predicate)?;
                for (ok, &b) in dim_ok[*slot].iter_mut().zip(m.bits()) {
                    *ok &= b;
                }
            }
        }
    }
    let mut lookups = Vec::with_capacity(joins.len());
    for &link in joins {
        let l = &schema.links()[link];
        let pk = schema.link_dim(link)?.int_column(&l.dim_pk)?;
        let pos: std::collections::HashMap<i64, usize> =
            pk.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        lookups.push((fact.int_column(&l.fact_fk)?, pos));
    }
    Ok(fact_mask
        .selected()
        .into_iter()
        .filter(|&r| {
            lookups
                .iter()
                .zip(&dim_ok)
                .all(|((fk, pos), ok)| pos.get(&fk[r]).is_some_and(|&d| ok[d]))
        })
        .collect())
}

/// Three queries of `group`, each with a final `lo_extendedprice <= t`
/// filter chosen so the fraction of fact rows kept is within 20% of the
/// target. `targets` defaults to [`default_targets`].
pub fn gen_queries(
    schema: &StarSchema,
    group: QueryGroup,
    targets: Option<[f64; 3]>,
) -> Result<Vec<QuerySpec>> {
    let targets = targets.unwrap_or_else(|| default_targets(group));
    let n = schema.fact().row_count();
    if n == 0 {
        return Err(Error::Gen("fact table is empty".into()));
    }
    let price = schema.fact().int_column(TUNING_COLUMN)?;
    templates(group)
        .into_iter()
        .zip(targets)
        .enumerate()
        .map(|(q, (tpl, target))| {
            let id = format!("Q{}{}", group.index(), q + 1);
            if !(target > 0.0 && target <= 1.0) {
                return Err(Error::Gen(format!(
                    "{id}: selectivity target {target} outside (0, 1]"
                )));
            }
            let mut prices: Vec<i64> = surviving_rows(schema, &tpl.joins, &tpl.filters)?
                .into_iter()
                .map(|r| price[r])
                .collect();
            prices.sort_unstable();
            let want = target * n as f64;
            let need = (want.round() as usize).max(1);
            if prices.len() < need {
                return Err(Error::Gen(format!(
                    "{id}: target selectivity {target} needs {need} rows, filters keep only {}",
                    prices.len()
                )));
            }
            let t = prices[need - 1];
            let kept = prices.partition_point(|&p| p <= t);
            let realized = kept as f64 / n as f64;
            if (realized - target).abs() > 0.2 * target {
                return Err(Error::Gen(format!(
                    "{id}: realized selectivity {realized:.5} is not within 20% of {target}"
                )));
            }
            let mut filters = tpl.filters;
            filters.push(Filter {
                column: ColumnRef::fact(TUNING_COLUMN),
                predicate: Predicate::Le(Scalar::Int(t)),
            });
            Ok(QuerySpec {
                id,
                group,
                joins: tpl.joins,
                filters,
                measure: "lo_revenue".into(),
                aggregation: tpl.aggregation,
                order_by: tpl.order_by,
                target_selectivity: target,
                realized_selectivity: realized,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::{gen_star, GenConfig};

    #[test]
    fn shapes_follow_groups() {
        let s = gen_star(&GenConfig::default()).unwrap();
        for g in QueryGroup::ALL {
            let qs = gen_queries(&s, g, None).unwrap();
            assert_eq!(qs.len(), 3);
            for q in &qs {
                assert_eq!(q.joins.len(), g.join_count());
                assert_eq!(
                    matches!(q.aggregation, Aggregation::GroupBySum { .. }),
                    g.grouped()
                );
                assert_eq!(!q.order_by.is_empty(), g.sorted());
                assert!(
                    (q.realized_selectivity - q.target_selectivity).abs()
                        <= 0.2 * q.target_selectivity
                );
            }
        }
        let ids: Vec<String> = gen_queries(&s, QueryGroup::G4, None)
            .unwrap()
            .into_iter()
            .map(|q| q.id)
            .collect();
        assert_eq!(ids, ["Q41", "Q42", "Q43"]);
    }

    #[test]
    fn realized_selectivity_is_counted() {
        let s = gen_star(&GenConfig::default()).unwrap();
        for q in gen_queries(&s, QueryGroup::G2, None).unwrap() {
            let kept = surviving_rows(&s, &q.joins, &q.filters).unwrap().len();
            assert_eq!(
                q.realized_selectivity,
                kept as f64 / s.fact().row_count() as f64
            );
        }
    }

    #[test]
    fn unattainable_target() {
        let s = gen_star(&GenConfig::default()).unwrap();
        assert!(matches!(
            gen_queries(&s, QueryGroup::G3, Some([0.9, 0.01, 0.01])),
            Err(Error::Gen(_))
        ));
        assert!(matches!(
            gen_queries(&s, QueryGroup::G1, Some([0.0, 0.01, 0.01])),
            Err(Error::Gen(_))
        ));
    }

    #[test]
    fn spec_json_round_trip() {
        let s = gen_star(&GenConfig::default()).unwrap();
        let qs = gen_queries(&s, QueryGroup::G3, None).unwrap();
        let text = serde_json::to_string(&qs).unwrap();
        let back: Vec<QuerySpec> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, qs);
        assert_eq!("g2".parse::<QueryGroup>().unwrap(), QueryGroup::G2);
    }
}
