use crate::error::Error;
use crate::Result;

/// Ratio above which fusion is chosen.
pub const DEFAULT_THRESHOLD: f64 = 1.0;

/// Sizes entering the fusion cost model.
#[derive(Debug, Clone, PartialEq)]
pub struct CostInputs {
    /// Target (joined) rows.
    pub i: f64,
    /// Model input width.
    pub k: f64,
    /// Model output width, or leaf count for trees.
    pub l: f64,
    /// Tree node count; taken as `k` when absent.
    pub p: Option<f64>,
    /// Dimension table row counts.
    pub r: Vec<f64>,
}

impl CostInputs {
    fn checked(&self) -> Result<(f64, f64, f64, f64, f64)> {
        let p = self.p.unwrap_or(self.k);
        for (name, x) in [("i", self.i), ("k", self.k), ("l", self.l), ("p", p)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {x}")));
            }
        }
        if self.r.is_empty() {
            return Err(Error::Domain("no dimension tables".into()));
        }
        if let Some(x) = self.r.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::Domain(format!(
                "dimension row count must be positive, got {x}"
            )));
        }
        Ok((self.i, self.k, self.l, p, self.r.iter().sum()))
    }
}

/// Non-fused over fused cost for a linear operator:
/// `((i·k + k²/3)·Σr + i·k·l) / (i·l·Σr)`.
pub fn speedup_ratio_linear(c: &CostInputs) -> Result<f64> {
    let (i, k, l, _, sr) = c.checked()?;
    Ok(((i * k + k * k / 3.0) * sr + i * k * l) / (i * l * sr))
}

/// Non-fused over fused cost for a decision tree with `p` nodes and `l` leaves:
/// `k/l + k²/(3il) + kp/(lΣr) + p/Σr + p/(lΣr) + 1/Σr`.
pub fn speedup_ratio_tree(c: &CostInputs) -> Result<f64> {
    let (i, k, l, p, sr) = c.checked()?;
    Ok(k / l + k * k / (3.0 * i * l) + k * p / (l * sr) + p / sr + p / (l * sr) + 1.0 / sr)
}

pub fn decide_fusion(ratio: f64, threshold: f64) -> bool {
    ratio > threshold
}
