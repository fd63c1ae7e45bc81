//! Query and prediction-pipeline drivers over the matrix operators.

use serde::{Deserialize, Serialize};

use crate::benchgen::{feature_layout, Aggregation, ColumnRef, QuerySpec, FEATURE_LINKS};
use crate::error::Error;
use crate::fusion::{
    apply_fused_linear, apply_fused_tree, partition_tree, prefuse_linear, prefuse_tree,
    TreePartition,
};
use crate::laqops::{
    build_selection_mask, groupby_sum_multi, materialize, multiway_star_join_timed,
    sort_result_rows, ColumnMap, DimJoin, DomainCache, ResultRow, SelectionMask,
};
use crate::matrix::{DenseMat, SparseCsr};
use crate::mlops::{compile_tree, predict_linear, predict_tree, Model, TreeLA};
use crate::oracle::{self, OracleOutput};
use crate::storage::StarSchema;
use crate::timing::{Stage, StageTimes};
use crate::Result;

fn column_vector(values: Vec<f64>) -> DenseMat {
    let n = values.len();
    DenseMat::new(n, 1, values).expect("n x 1")
}

/// Runs a star query: masks from the filters, a star join over the
/// surviving rows, group values pulled through the row matching matrices,
/// then sort-based aggregation and ordering.
pub fn run_query_laq(
    schema: &StarSchema,
    q: &QuerySpec,
    stages: &mut StageTimes,
) -> Result<Vec<ResultRow>> {
    let fact = schema.fact();
    let links = q
        .joins
        .iter()
        .map(|&l| {
            schema
                .links()
                .get(l)
                .ok_or_else(|| Error::Index(format!("link {l}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let dims = q
        .joins
        .iter()
        .map(|&l| schema.link_dim(l))
        .collect::<Result<Vec<_>>>()?;

    let (fact_sel, dim_sel) = stages.time(Stage::Filter, || {
        let mut fact_mask = SelectionMask::all(fact.row_count());
        let mut dim_masks: Vec<SelectionMask> = dims
            .iter()
            .map(|d| SelectionMask::all(d.row_count()))
            .collect();
        for f in &q.filters {
            match &f.column {
                ColumnRef::Fact { column } => {
                    fact_mask = fact_mask
                        .and(&build_selection_mask(fact.column(column)?, &f.predicate)?)?;
                }
                ColumnRef::Dim { slot, column } => {
                    let d = dims
                        .get(*slot)
                        .ok_or_else(|| Error::Index(format!("join slot {slot}")))?;
                    let m = build_selection_mask(d.column(column)?, &f.predicate)?;
                    dim_masks[*slot] = dim_masks[*slot].and(&m)?;
                }
            }
        }
        Ok::<_, Error>((
            fact_mask.selected(),
            dim_masks
                .iter()
                .map(SelectionMask::selected)
                .collect::<Vec<_>>(),
        ))
    })?;

    let (fact_keys, dim_keys) = stages.time(Stage::SparseConstruct, || {
        let mut fk = Vec::with_capacity(links.len());
        let mut pk = Vec::with_capacity(links.len());
        for ((link, dim), sel) in links.iter().zip(&dims).zip(&dim_sel) {
            let f = fact.int_column(&link.fact_fk)?;
            let p = dim.int_column(&link.dim_pk)?;
            fk.push(fact_sel.iter().map(|&r| f[r]).collect::<Vec<i64>>());
            pk.push(sel.iter().map(|&r| p[r]).collect::<Vec<i64>>());
        }
        Ok::<_, Error>((fk, pk))
    })?;
    let joins: Vec<DimJoin<'_>> = fact_keys
        .iter()
        .zip(&dim_keys)
        .map(|(f, d)| DimJoin {
            fact_keys: f,
            dim_keys: d,
        })
        .collect();
    let sj = multiway_star_join_timed(fact_sel.len(), &joins, None, stages)?;

    stages.time(Stage::Aggregate, || {
        let fact_map = sj.fact_map();
        let pull_fact = |column: &str| -> Result<Vec<f64>> {
            let c = fact.column(column)?;
            let v = column_vector(fact_sel.iter().map(|&r| c.value_f64(r)).collect());
            Ok(fact_map.spmm_dense(&v)?.into_data())
        };
        let measure = pull_fact(&q.measure)?;
        let mut rows = match &q.aggregation {
            Aggregation::Sum => vec![ResultRow {
                group: vec![],
                sum: measure.iter().sum(),
            }],
            Aggregation::GroupBySum { group_by } => {
                let maps: Vec<SparseCsr> = sj.dim_maps();
                let mut cols: Vec<Vec<i64>> = Vec::with_capacity(group_by.len());
                for g in group_by {
                    let vals = match g {
                        ColumnRef::Fact { column } => pull_fact(column)?,
                        ColumnRef::Dim { slot, column } => {
                            let c = dims
                                .get(*slot)
                                .ok_or_else(|| Error::Index(format!("join slot {slot}")))?
                                .column(column)?;
                            let v = column_vector(
                                dim_sel[*slot].iter().map(|&r| c.value_f64(r)).collect(),
                            );
                            maps[*slot].spmm_dense(&v)?.into_data()
                        }
                    };
                    cols.push(vals.into_iter().map(|x| x as i64).collect());
                }
                let refs: Vec<&[i64]> = cols.iter().map(Vec::as_slice).collect();
                groupby_sum_multi(&refs, &measure)?
                    .into_iter()
                    .map(|(group, sum)| ResultRow { group, sum })
                    .collect()
            }
        };
        if !q.order_by.is_empty() {
            rows = sort_result_rows(&rows, &q.order_by)?;
        }
        Ok(rows)
    })
}

pub fn run_query_oracle(schema: &StarSchema, q: &QuerySpec) -> Result<Vec<ResultRow>> {
    oracle::run_query(schema, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    Fused,
    NonFused,
    Oracle,
}

impl PipelineMode {
    /// Mode label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            PipelineMode::Fused => "laq-fused",
            PipelineMode::NonFused => "laq",
            PipelineMode::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for PipelineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused" => Ok(PipelineMode::Fused),
            "nonfused" | "non-fused" => Ok(PipelineMode::NonFused),
            "oracle" => Ok(PipelineMode::Oracle),
            _ => Err(Error::Name(format!("pipeline mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Linear(DenseMat),
    Tree(Vec<i64>),
}

/// Joined fact rows, in target-row order, and one prediction per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub fact_rows: Vec<usize>,
    pub predictions: Predictions,
}

#[derive(Debug)]
enum Prepared {
    Linear,
    Tree {
        la: Box<TreeLA>,
        parts: Box<TreePartition>,
    },
}

/// A star join over feature-carrying dimensions followed by a model.
///
/// Key columns, dimension feature matrices and column maps are extracted
/// once at construction; [`Pipeline::run`] times only the join and the
/// model evaluation.
#[derive(Debug)]
pub struct Pipeline<'a> {
    schema: &'a StarSchema,
    links: Vec<usize>,
    features: Vec<Vec<(String, usize)>>,
    fact_keys: Vec<Vec<i64>>,
    dim_keys: Vec<Vec<i64>>,
    dim_mats: Vec<DenseMat>,
    col_maps: Vec<ColumnMap>,
    model: Model,
    prepared: Prepared,
}

impl<'a> Pipeline<'a> {
    /// Part, supplier and order-date features laid out as by the generator.
    pub fn standard(schema: &'a StarSchema, k: usize, model: Model) -> Result<Self> {
        Self::new(schema, &FEATURE_LINKS, feature_layout(k).to_vec(), k, model)
    }

    /// `features[j]` lists `(column, target position)` pairs of the
    /// dimension reached through `links[j]`.
    pub fn new(
        schema: &'a StarSchema,
        links: &[usize],
        features: Vec<Vec<(String, usize)>>,
        k: usize,
        model: Model,
    ) -> Result<Self> {
        if features.len() != links.len() {
            return Err(Error::Shape(format!(
                "{} feature lists for {} links",
                features.len(),
                links.len()
            )));
        }
        let mut fact_keys = Vec::new();
        let mut dim_keys = Vec::new();
        let mut dim_mats = Vec::new();
        let mut col_maps = Vec::new();
        let mut owner = vec![None; k];
        for (j, (&link, cols)) in links.iter().zip(&features).enumerate() {
            let l = schema
                .links()
                .get(link)
                .ok_or_else(|| Error::Index(format!("link {link}")))?;
            let dim = schema.link_dim(link)?;
            fact_keys.push(schema.fact().int_column(&l.fact_fk)?.to_vec());
            dim_keys.push(dim.int_column(&l.dim_pk)?.to_vec());
            let names: Vec<&str> = cols.iter().map(|(n, _)| n.as_str()).collect();
            dim_mats.push(dim.to_matrix(&names)?);
            let pairs: Vec<(usize, usize)> =
                cols.iter().enumerate().map(|(s, &(_, t))| (s, t)).collect();
            col_maps.push(ColumnMap::placement(cols.len(), k, &pairs)?);
            for &(_, t) in cols {
                owner[t] = Some(j);
            }
        }
        let prepared = match &model {
            Model::Linear(l) => {
                if l.input_width() != k {
                    return Err(Error::Shape(format!(
                        "model reads {} features, layout has {k}",
                        l.input_width()
                    )));
                }
                Prepared::Linear
            }
            Model::Tree(t) => {
                let la = compile_tree(t, k)?;
                let parts = partition_tree(&la, &owner, links.len())?;
                Prepared::Tree {
                    la: Box::new(la),
                    parts: Box::new(parts),
                }
            }
        };
        Ok(Self {
            schema,
            links: links.to_vec(),
            features,
            fact_keys,
            dim_keys,
            dim_mats,
            col_maps,
            model,
            prepared,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Sizes for the cost model: `(i, k, l, p, dimension rows)` with `i`
    /// taken as the fact row count.
    pub fn cost_shape(&self) -> (usize, usize, usize, Option<usize>, Vec<usize>) {
        let k = self.col_maps.first().map_or(0, ColumnMap::target_cols);
        let (l, p) = match (&self.model, &self.prepared) {
            (Model::Linear(op), _) => (op.output_width(), None),
            (Model::Tree(_), Prepared::Tree { la, .. }) => (la.leaf_count(), Some(la.node_count())),
            _ => unreachable!("prepared form follows the model"),
        };
        let rows = self.dim_mats.iter().map(DenseMat::rows).collect();
        (self.schema.fact().row_count(), k, l, p, rows)
    }

    /// Rough peak bytes for the intermediates of one run in `mode`:
    /// the materialized join for the non-fused path, the pre-fused
    /// partials for the fused one, and the output in both.
    pub fn estimated_bytes(&self, mode: PipelineMode) -> u64 {
        let (i, k, l, _, rows) = self.cost_shape();
        let width = match &self.prepared {
            Prepared::Linear => l,
            Prepared::Tree { la, .. } => la.node_count() + l,
        };
        let cells = match mode {
            PipelineMode::NonFused => i * (k + width),
            PipelineMode::Fused => rows.iter().sum::<usize>() * width + i * width,
            PipelineMode::Oracle => 2 * i * k,
        };
        8 * cells as u64
    }

    pub fn run(
        &self,
        mode: PipelineMode,
        cache: Option<&mut DomainCache>,
        stages: &mut StageTimes,
    ) -> Result<PipelineRun> {
        if mode == PipelineMode::Oracle {
            let run = stages.time(Stage::Predict, || {
                oracle::star_pipeline(self.schema, &self.links, &self.features, &self.model)
            })?;
            let predictions = match run.output {
                OracleOutput::Linear(rows) => {
                    let l = match &self.model {
                        Model::Linear(op) => op.output_width(),
                        Model::Tree(_) => 0,
                    };
                    let data = rows.into_iter().flatten().collect();
                    Predictions::Linear(DenseMat::new(run.fact_rows.len(), l, data)?)
                }
                OracleOutput::Tree(labels) => Predictions::Tree(labels),
            };
            return Ok(PipelineRun {
                fact_rows: run.fact_rows,
                predictions,
            });
        }

        let joins: Vec<DimJoin<'_>> = self
            .fact_keys
            .iter()
            .zip(&self.dim_keys)
            .map(|(f, d)| DimJoin {
                fact_keys: f,
                dim_keys: d,
            })
            .collect();
        let fact_rows = self.schema.fact().row_count();
        let sj = multiway_star_join_timed(fact_rows, &joins, cache, stages)?;
        let i_maps = stages.time(Stage::SparseConstruct, || sj.dim_maps());

        let predictions = match (&self.model, &self.prepared, mode) {
            (Model::Linear(op), _, PipelineMode::NonFused) => {
                let t = stages.time(Stage::Materialize, || {
                    materialize(&i_maps, &self.dim_mats, &self.col_maps)
                })?;
                Predictions::Linear(stages.time(Stage::Predict, || predict_linear(&t, op))?)
            }
            (Model::Linear(op), _, _) => {
                let f = stages.time(Stage::Prefuse, || {
                    prefuse_linear(&self.dim_mats, &self.col_maps, op)
                })?;
                Predictions::Linear(
                    stages.time(Stage::Predict, || apply_fused_linear(&i_maps, &f))?,
                )
            }
            (Model::Tree(_), Prepared::Tree { la, .. }, PipelineMode::NonFused) => {
                let t = stages.time(Stage::Materialize, || {
                    materialize(&i_maps, &self.dim_mats, &self.col_maps)
                })?;
                Predictions::Tree(stages.time(Stage::Predict, || predict_tree(&t, la))?)
            }
            (Model::Tree(_), Prepared::Tree { parts, .. }, _) => {
                let f = stages.time(Stage::Prefuse, || {
                    prefuse_tree(&self.dim_mats, &self.col_maps, parts)
                })?;
                Predictions::Tree(stages.time(Stage::Predict, || apply_fused_tree(&i_maps, &f))?)
            }
            (Model::Tree(_), Prepared::Linear, _) => {
                unreachable!("prepared form follows the model")
            }
        };
        Ok(PipelineRun {
            fact_rows: sj.fact_rows().to_vec(),
            predictions,
        })
    }
}

/// Relative difference used for float comparisons; 0 when equal.
fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Compares query results as multisets: group tuples exactly, sums exactly
/// when both are integral and within `rel_tol` otherwise. Returns a short
/// description of the first difference.
pub fn compare_results(
    a: &[ResultRow],
    b: &[ResultRow],
    rel_tol: f64,
) -> std::result::Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("{} rows vs {} rows", a.len(), b.len()));
    }
    let sorted = |rows: &[ResultRow]| {
        let mut v = rows.to_vec();
        v.sort_by(|x, y| x.group.cmp(&y.group).then(x.sum.total_cmp(&y.sum)));
        v
    };
    for (x, y) in sorted(a).iter().zip(&sorted(b)) {
        if x.group != y.group {
            return Err(format!("group {:?} vs {:?}", x.group, y.group));
        }
        let integral = x.sum.fract() == 0.0 && y.sum.fract() == 0.0;
        if (integral && x.sum != y.sum) || (!integral && rel_diff(x.sum, y.sum) > rel_tol) {
            return Err(format!("group {:?}: sum {} vs {}", x.group, x.sum, y.sum));
        }
    }
    Ok(())
}

/// Compares two pipeline runs row by row after aligning on fact row id:
/// labels exactly, linear outputs within `rel_tol`.
pub fn compare_runs(
    a: &PipelineRun,
    b: &PipelineRun,
    rel_tol: f64,
) -> std::result::Result<(), String> {
    let order = |r: &PipelineRun| {
        let mut idx: Vec<usize> = (0..r.fact_rows.len()).collect();
        idx.sort_by_key(|&i| r.fact_rows[i]);
        idx
    };
    let (oa, ob) = (order(a), order(b));
    if oa.len() != ob.len() {
        return Err(format!("{} rows vs {} rows", oa.len(), ob.len()));
    }
    for (&i, &j) in oa.iter().zip(&ob) {
        if a.fact_rows[i] != b.fact_rows[j] {
            return Err(format!("fact row {} vs {}", a.fact_rows[i], b.fact_rows[j]));
        }
        match (&a.predictions, &b.predictions) {
            (Predictions::Tree(x), Predictions::Tree(y)) => {
                if x[i] != y[j] {
                    return Err(format!(
                        "fact row {}: label {} vs {}",
                        a.fact_rows[i], x[i], y[j]
                    ));
                }
            }
            (Predictions::Linear(x), Predictions::Linear(y)) => {
                if x.cols() != y.cols() {
                    return Err(format!("{} outputs vs {}", x.cols(), y.cols()));
                }
                for (c, (&u, &v)) in x.row(i).iter().zip(y.row(j)).enumerate() {
                    if rel_diff(u, v) > rel_tol {
                        return Err(format!(
                            "fact row {} output {c}: {u} vs {v}",
                            a.fact_rows[i]
                        ));
                    }
                }
            }
            _ => return Err("prediction kinds differ".into()),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::{gen_linear, gen_queries, gen_star, gen_tree, GenConfig, QueryGroup};

    #[test]
    fn queries_match_oracle() {
        let s = gen_star(&GenConfig::default()).unwrap();
        for g in QueryGroup::ALL {
            for q in gen_queries(&s, g, None).unwrap() {
                let laq = run_query_laq(&s, &q, &mut StageTimes::new()).unwrap();
                let want = run_query_oracle(&s, &q).unwrap();
                compare_results(&laq, &want, 1e-9).unwrap();
                let groups =
                    |r: &[ResultRow]| r.iter().map(|x| x.group.clone()).collect::<Vec<_>>();
                if g == QueryGroup::G2 || g == QueryGroup::G4 {
                    assert_eq!(groups(&laq), groups(&want), "{}", q.id);
                }
            }
        }
    }

    #[test]
    fn pipeline_modes_agree() {
        let cfg = GenConfig {
            feature_width: 12,
            dangling_fraction: 0.05,
            ..GenConfig::default()
        };
        let s = gen_star(&cfg).unwrap();
        let models = [
            Model::Linear(gen_linear(12, 3, 5).unwrap()),
            Model::Tree(gen_tree(12, 8, 16, 5).unwrap()),
        ];
        for m in models {
            let p = Pipeline::standard(&s, 12, m).unwrap();
            let oracle = p
                .run(PipelineMode::Oracle, None, &mut StageTimes::new())
                .unwrap();
            assert!(oracle.fact_rows.len() < s.fact().row_count());
            for mode in [PipelineMode::Fused, PipelineMode::NonFused] {
                let mut st = StageTimes::new();
                let run = p.run(mode, None, &mut st).unwrap();
                compare_runs(&run, &oracle, 1e-9).unwrap();
                assert!(st.get(Stage::Spmm) > std::time::Duration::ZERO);
                assert_eq!(
                    st.get(Stage::Prefuse).is_zero(),
                    mode == PipelineMode::NonFused
                );
            }
            let mut cache = DomainCache::new(3);
            let cached = p
                .run(
                    PipelineMode::Fused,
                    Some(&mut cache),
                    &mut StageTimes::new(),
                )
                .unwrap();
            compare_runs(&cached, &oracle, 1e-9).unwrap();
        }
    }

    #[test]
    fn result_comparison() {
        let r = |g: i64, s: f64| ResultRow {
            group: vec![g],
            sum: s,
        };
        assert!(compare_results(&[r(1, 2.0), r(2, 3.0)], &[r(2, 3.0), r(1, 2.0)], 1e-9).is_ok());
        assert!(compare_results(&[r(1, 2.0)], &[r(1, 3.0)], 1e-9).is_err());
        assert!(compare_results(&[r(1, 0.5)], &[r(1, 0.5 + 1e-12)], 1e-9).is_ok());
        assert!(compare_results(&[r(1, 2.0)], &[], 1e-9).is_err());
    }
}
