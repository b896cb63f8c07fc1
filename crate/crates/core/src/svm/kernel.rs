/// `exp(-gamma * |u - v|^2)`.
#[inline]
pub fn rbf(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Largest training set whose Gram matrix is kept in memory.
pub(crate) const DENSE_LIMIT: usize = 4096;

/// Kernel values over a training set: a dense Gram matrix for small sets,
/// recomputed on demand above [`DENSE_LIMIT`].
pub(crate) enum KernelMatrix<'a> {
    Dense { n: usize, values: Vec<f64> },
    OnTheFly { xs: &'a [Vec<f64>], gamma: f64 },
}

impl<'a> KernelMatrix<'a> {
    pub(crate) fn new(xs: &'a [Vec<f64>], gamma: f64) -> Self {
        let n = xs.len();
        if n > DENSE_LIMIT {
            return KernelMatrix::OnTheFly { xs, gamma };
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in 0..i {
                let k = rbf(&xs[i], &xs[j], gamma);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        KernelMatrix::Dense { n, values }
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            KernelMatrix::Dense { n, values } => values[i * n + j],
            KernelMatrix::OnTheFly { xs, gamma } => {
                if i == j {
                    1.0
                } else {
                    rbf(&xs[i], &xs[j], *gamma)
                }
            }
        }
    }
}
