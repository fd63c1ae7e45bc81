//! Synthetic star schemas, query workloads and random models.
//!
//! Tables follow SSB naming and cardinalities, with uniform keys and
//! measures. Model input features are uniform floats in `[0, 1)` spread over
//! the part, supplier and order-date dimensions.

mod models;
mod queries;

pub use models::{gen_linear, gen_tree};
pub use queries::{
    default_targets, gen_queries, Aggregation, ColumnRef, Filter, QueryGroup, QuerySpec,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::storage::{ColumnData, ColumnKind, Link, Schema, StarSchema, Table};
use crate::Result;

pub const FACT: &str = "lineorder";
pub const DATE_ROWS: usize = 7 * 365;
pub const FIRST_YEAR: i64 = 1992;

/// Link positions in every generated schema.
pub const LINK_PART: usize = 0;
pub const LINK_SUPPLIER: usize = 1;
pub const LINK_ORDERDATE: usize = 2;
pub const LINK_COMMITDATE: usize = 3;
/// Present only in [`gen_ssb_scale`] output.
pub const LINK_CUSTOMER: usize = 4;

/// Links carrying model features, in feature order.
pub const FEATURE_LINKS: [usize; 3] = [LINK_PART, LINK_SUPPLIER, LINK_ORDERDATE];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Setting1,
    Setting2,
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "setting1" => Ok(Setting::Setting1),
            "2" | "setting2" => Ok(Setting::Setting2),
            _ => Err(Error::Gen(format!("unknown setting `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub sf: u32,
    pub setting: Setting,
    pub seed: u64,
    /// Model input width `k`.
    pub feature_width: usize,
    /// Probability that a fact foreign key points at no dimension row.
    pub dangling_fraction: f64,
    /// Upper bound on the estimated in-memory size of the generated tables.
    pub mem_cap_bytes: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            sf: 1,
            setting: Setting::Setting2,
            seed: 42,
            feature_width: 16,
            dangling_fraction: 0.0,
            mem_cap_bytes: 4 << 30,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<()> {
        if self.sf < 1 {
            return Err(Error::Gen("scale factor must be at least 1".into()));
        }
        if self.feature_width < 1 {
            return Err(Error::Gen("feature width must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dangling_fraction) {
            return Err(Error::Gen(format!(
                "dangling fraction {} outside [0, 1)",
                self.dangling_fraction
            )));
        }
        Ok(())
    }
}

/// `floor(1 + log2 sf)`.
pub fn part_multiplier(sf: u32) -> usize {
    (32 - sf.leading_zeros()) as usize
}

/// Row counts `(lineorder, part, supplier, date)` for a setting.
pub fn cardinalities(setting: Setting, sf: u32) -> (usize, usize, usize, usize) {
    let sf_us = sf as usize;
    match setting {
        Setting::Setting1 => (
            sf_us * 600_000,
            20_000 * part_multiplier(sf),
            sf_us * 2_000,
            DATE_ROWS,
        ),
        Setting::Setting2 => (
            sf_us * 3_000,
            2_000 * part_multiplier(sf),
            sf_us * 2_000,
            DATE_ROWS,
        ),
    }
}

/// Number of features held by each of the [`FEATURE_LINKS`] dimensions.
pub fn feature_split(k: usize) -> [usize; 3] {
    let base = k / 3;
    let extra = k % 3;
    [0, 1, 2].map(|j| base + usize::from(j < extra))
}

/// Feature columns of each [`FEATURE_LINKS`] dimension as `(name, target)`.
/// Names carry the global target position, e.g. `s_f7`.
pub fn feature_layout(k: usize) -> [Vec<(String, usize)>; 3] {
    let split = feature_split(k);
    let prefixes = ["p", "s", "d"];
    let mut offset = 0;
    [0, 1, 2].map(|j| {
        let cols = (offset..offset + split[j])
            .map(|t| (format!("{}_f{t}", prefixes[j]), t))
            .collect();
        offset += split[j];
        cols
    })
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn check_capacity(cfg: &GenConfig, tables: &[(usize, usize)]) -> Result<()> {
    let bytes: u64 = tables
        .iter()
        .map(|&(rows, cols)| (rows * cols * 8) as u64)
        .sum();
    if bytes > cfg.mem_cap_bytes {
        return Err(Error::Capacity(format!(
            "tables need about {} MiB, cap is {} MiB",
            bytes >> 20,
            cfg.mem_cap_bytes >> 20
        )));
    }
    Ok(())
}

fn features(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: &[(String, usize)],
) -> Vec<(String, ColumnKind, ColumnData)> {
    cols.iter()
        .map(|(name, _)| {
            let v = (0..rows).map(|_| rng.gen::<f64>()).collect();
            (name.clone(), ColumnKind::Float, ColumnData::Float(v))
        })
        .collect()
}

fn build(cols: Vec<(String, ColumnKind, ColumnData)>) -> Result<Table> {
    let schema = Schema::new(cols.iter().map(|(n, k, _)| (n.clone(), *k)))?;
    Table::new(schema, cols.into_iter().map(|(_, _, d)| d).collect())
}

fn keys(n: usize) -> ColumnData {
    ColumnData::Int((0..n as i64).collect())
}

fn gen_part(rng: &mut ChaCha8Rng, rows: usize, feats: &[(String, usize)]) -> Result<Table> {
    let mut mfgr = Vec::with_capacity(rows);
    let mut category = Vec::with_capacity(rows);
    let mut brand = Vec::with_capacity(rows);
    for _ in 0..rows {
        let m = rng.gen_range(1..=5i64);
        let c = m * 10 + rng.gen_range(1..=5i64);
        mfgr.push(m);
        category.push(c);
        brand.push(c * 100 + rng.gen_range(1..=40i64));
    }
    let mut cols = vec![
        ("p_partkey".to_string(), ColumnKind::Key, keys(rows)),
        ("p_mfgr".to_string(), ColumnKind::Int, ColumnData::Int(mfgr)),
        (
            "p_category".to_string(),
            ColumnKind::Int,
            ColumnData::Int(category),
        ),
        (
            "p_brand".to_string(),
            ColumnKind::Int,
            ColumnData::Int(brand),
        ),
    ];
    cols.extend(features(rng, rows, feats));
    build(cols)
}

/// Supplier or customer: region 0..5, nation `region*5 + 0..5`, city `nation*10 + 0..10`.
fn gen_geo(
    rng: &mut ChaCha8Rng,
    prefix: &str,
    key: &str,
    rows: usize,
    feats: &[(String, usize)],
) -> Result<Table> {
    let mut region = Vec::with_capacity(rows);
    let mut nation = Vec::with_capacity(rows);
    let mut city = Vec::with_capacity(rows);
    for _ in 0..rows {
        let r = rng.gen_range(0..5i64);
        let n = r * 5 + rng.gen_range(0..5i64);
        region.push(r);
        nation.push(n);
        city.push(n * 10 + rng.gen_range(0..10i64));
    }
    let mut cols = vec![
        (format!("{prefix}_{key}"), ColumnKind::Key, keys(rows)),
        (
            format!("{prefix}_region"),
            ColumnKind::Int,
            ColumnData::Int(region),
        ),
        (
            format!("{prefix}_nation"),
            ColumnKind::Int,
            ColumnData::Int(nation),
        ),
        (
            format!("{prefix}_city"),
            ColumnKind::Int,
            ColumnData::Int(city),
        ),
    ];
    cols.extend(features(rng, rows, feats));
    build(cols)
}

/// Seven 365-day years starting in 1992; months are 31-day blocks capped at 12.
fn gen_date(rng: &mut ChaCha8Rng, feats: &[(String, usize)]) -> Result<Table> {
    let days = 0..DATE_ROWS as i64;
    let year: Vec<i64> = days.clone().map(|d| FIRST_YEAR + d / 365).collect();
    let month = |d: i64| ((d % 365) / 31 + 1).min(12);
    let ym: Vec<i64> = days
        .clone()
        .map(|d| (FIRST_YEAR + d / 365) * 100 + month(d))
        .collect();
    let week: Vec<i64> = days.map(|d| (d % 365) / 7 + 1).collect();
    let mut cols = vec![
        ("d_datekey".to_string(), ColumnKind::Key, keys(DATE_ROWS)),
        ("d_year".to_string(), ColumnKind::Int, ColumnData::Int(year)),
        (
            "d_yearmonthnum".to_string(),
            ColumnKind::Int,
            ColumnData::Int(ym),
        ),
        (
            "d_weeknuminyear".to_string(),
            ColumnKind::Int,
            ColumnData::Int(week),
        ),
    ];
    cols.extend(features(rng, DATE_ROWS, feats));
    build(cols)
}

fn fk(rng: &mut ChaCha8Rng, dim_rows: usize, dangling: f64) -> i64 {
    if dangling > 0.0 && rng.gen_bool(dangling) {
        (dim_rows + rng.gen_range(0..dim_rows.max(1))) as i64
    } else {
        rng.gen_range(0..dim_rows.max(1)) as i64
    }
}

fn gen_fact(
    rng: &mut ChaCha8Rng,
    cfg: &GenConfig,
    rows: usize,
    part: usize,
    supp: usize,
    cust: Option<usize>,
) -> Result<Table> {
    let d = cfg.dangling_fraction;
    let mut partkey = Vec::with_capacity(rows);
    let mut suppkey = Vec::with_capacity(rows);
    let mut orderdate = Vec::with_capacity(rows);
    let mut commitdate = Vec::with_capacity(rows);
    let mut custkey = Vec::with_capacity(if cust.is_some() { rows } else { 0 });
    let mut quantity = Vec::with_capacity(rows);
    let mut discount = Vec::with_capacity(rows);
    let mut price = Vec::with_capacity(rows);
    let mut revenue = Vec::with_capacity(rows);
    let mut supplycost = Vec::with_capacity(rows);
    for _ in 0..rows {
        partkey.push(fk(rng, part, d));
        suppkey.push(fk(rng, supp, d));
        let od = rng.gen_range(0..DATE_ROWS as i64);
        orderdate.push(od);
        commitdate.push((od + rng.gen_range(30..=90)).min(DATE_ROWS as i64 - 1));
        if let Some(c) = cust {
            custkey.push(fk(rng, c, d));
        }
        let q = rng.gen_range(1..=50i64);
        let disc = rng.gen_range(0..=10i64);
        let p = rng.gen_range(1_000..=100_000i64);
        quantity.push(q);
        discount.push(disc);
        price.push(p);
        revenue.push(p * (100 - disc) / 100);
        supplycost.push(rng.gen_range(100..=10_000i64));
    }
    let mut cols = vec![
        (
            "lo_partkey".to_string(),
            ColumnKind::Key,
            ColumnData::Int(partkey),
        ),
        (
            "lo_suppkey".to_string(),
            ColumnKind::Key,
            ColumnData::Int(suppkey),
        ),
        (
            "lo_orderdate".to_string(),
            ColumnKind::Key,
            ColumnData::Int(orderdate),
        ),
        (
            "lo_commitdate".to_string(),
            ColumnKind::Key,
            ColumnData::Int(commitdate),
        ),
    ];
    if cust.is_some() {
        cols.push((
            "lo_custkey".to_string(),
            ColumnKind::Key,
            ColumnData::Int(custkey),
        ));
    }
    cols.extend([
        (
            "lo_quantity".to_string(),
            ColumnKind::Int,
            ColumnData::Int(quantity),
        ),
        (
            "lo_discount".to_string(),
            ColumnKind::Int,
            ColumnData::Int(discount),
        ),
        (
            "lo_extendedprice".to_string(),
            ColumnKind::Int,
            ColumnData::Int(price),
        ),
        (
            "lo_revenue".to_string(),
            ColumnKind::Int,
            ColumnData::Int(revenue),
        ),
        (
            "lo_supplycost".to_string(),
            ColumnKind::Int,
            ColumnData::Int(supplycost),
        ),
    ]);
    build(cols)
}

fn standard_links() -> Vec<Link> {
    let link = |fk: &str, dim: &str, pk: &str| Link {
        fact_fk: fk.into(),
        dim: dim.into(),
        dim_pk: pk.into(),
    };
    vec![
        link("lo_partkey", "part", "p_partkey"),
        link("lo_suppkey", "supplier", "s_suppkey"),
        link("lo_orderdate", "date", "d_datekey"),
        link("lo_commitdate", "date", "d_datekey"),
    ]
}

fn gen_schema(
    cfg: &GenConfig,
    rows: (usize, usize, usize),
    customer: Option<usize>,
) -> Result<StarSchema> {
    cfg.validate()?;
    let (fact_rows, part_rows, supp_rows) = rows;
    let [pf, sf, df] = feature_layout(cfg.feature_width);
    let fact_cols = 9 + usize::from(customer.is_some());
    let mut sizes = vec![
        (fact_rows, fact_cols),
        (part_rows, 4 + pf.len()),
        (supp_rows, 4 + sf.len()),
        (DATE_ROWS, 4 + df.len()),
    ];
    if let Some(c) = customer {
        sizes.push((c, 4));
    }
    check_capacity(cfg, &sizes)?;

    let part = gen_part(&mut stream(cfg.seed, 1), part_rows, &pf)?;
    let supplier = gen_geo(&mut stream(cfg.seed, 2), "s", "suppkey", supp_rows, &sf)?;
    let date = gen_date(&mut stream(cfg.seed, 3), &df)?;
    let fact = gen_fact(
        &mut stream(cfg.seed, 0),
        cfg,
        fact_rows,
        part_rows,
        supp_rows,
        customer,
    )?;
    let mut dims = vec![
        ("part".to_string(), part),
        ("supplier".to_string(), supplier),
        ("date".to_string(), date),
    ];
    let mut links = standard_links();
    if let Some(c) = customer {
        dims.push((
            "customer".to_string(),
            gen_geo(&mut stream(cfg.seed, 4), "c", "custkey", c, &[])?,
        ));
        links.push(Link {
            fact_fk: "lo_custkey".into(),
            dim: "customer".into(),
            dim_pk: "c_custkey".into(),
        });
    }
    StarSchema::new(fact, dims, links)
}

/// Star schema with the reduced cardinalities used for fusion experiments.
pub fn gen_star(cfg: &GenConfig) -> Result<StarSchema> {
    let (f, p, s, _) = cardinalities(cfg.setting, cfg.sf);
    gen_schema(cfg, (f, p, s), None)
}

/// Full SSB cardinalities, adding a customer dimension of `sf·30,000` rows.
pub fn gen_ssb_scale(cfg: &GenConfig) -> Result<StarSchema> {
    let sf = cfg.sf as usize;
    gen_schema(
        cfg,
        (
            sf * 6_000_000,
            200_000 * part_multiplier(cfg.sf),
            sf * 2_000,
        ),
        Some(sf * 30_000),
    )
}
