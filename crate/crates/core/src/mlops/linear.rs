use crate::error::Error;
use crate::matrix::DenseMat;
use crate::Result;

/// Dense `k x l` linear map applied as `T · L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    mat: DenseMat,
}

impl LinearOperator {
    pub fn new(mat: DenseMat) -> Result<Self> {
        if let Some(pos) = mat.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Model(format!(
                "non-finite weight at ({}, {})",
                pos / mat.cols().max(1),
                pos % mat.cols().max(1)
            )));
        }
        Ok(Self { mat })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            mat: DenseMat::identity(k),
        }
    }

    pub fn matrix(&self) -> &DenseMat {
        &self.mat
    }

    /// Input width `k`.
    pub fn input_width(&self) -> usize {
        self.mat.rows()
    }

    /// Output width `l`.
    pub fn output_width(&self) -> usize {
        self.mat.cols()
    }
}

pub fn predict_linear(t: &DenseMat, l: &LinearOperator) -> Result<DenseMat> {
    t.matmul(&l.mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_empty() {
        let t = DenseMat::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(predict_linear(&t, &LinearOperator::identity(3)).unwrap(), t);
        let l = LinearOperator::new(DenseMat::zeros(3, 4)).unwrap();
        assert_eq!(
            predict_linear(&DenseMat::zeros(0, 3), &l).unwrap().shape(),
            (0, 4)
        );
        assert!(predict_linear(&t, &LinearOperator::identity(2)).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let m = DenseMat::from_rows(&[[1.0, f64::NAN]]).unwrap();
        assert!(matches!(LinearOperator::new(m), Err(Error::Model(_))));
    }

    #[test]
    fn random_against_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let (i, k, l) = (17, 9, 5);
        let t = DenseMat::new(
            i,
            k,
            (0..i * k).map(|_| rng.gen_range(-3..4) as f64).collect(),
        )
        .unwrap();
        let w = DenseMat::new(
            k,
            l,
            (0..k * l).map(|_| rng.gen_range(-3..4) as f64).collect(),
        )
        .unwrap();
        let got = predict_linear(&t, &LinearOperator::new(w.clone()).unwrap()).unwrap();
        for r in 0..i {
            for c in 0..l {
                let want: f64 = (0..k).map(|x| t.get(r, x) * w.get(x, c)).sum();
                assert_eq!(got.get(r, c), want);
            }
        }
    }
}
