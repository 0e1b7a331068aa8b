//! Independent dense linear algebra for checking the GP.
//!
//! Gaussian elimination with partial pivoting on plain `Vec<Vec<f64>>`; shares
//! no code with the library's factorization path.
#![allow(dead_code, clippy::needless_range_loop)]

pub struct Lu {
    a: Vec<Vec<f64>>,
    perm: Vec<usize>,
    sign: f64,
}

pub fn lu(mut a: Vec<Vec<f64>>) -> Lu {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if pivot != col {
            a.swap(pivot, col);
            perm.swap(pivot, col);
            sign = -sign;
        }
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            a[row][col] = f;
            for k in col + 1..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    Lu { a, perm, sign }
}

impl Lu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.a[i][k] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.a[i][k] * y[k];
            }
            y[i] /= self.a[i][i];
        }
        y
    }

    pub fn log_abs_det(&self) -> f64 {
        (0..self.a.len()).map(|i| self.a[i][i].abs().ln()).sum()
    }
}

pub fn rq(x1: f64, x2: f64, s2: f64, l: f64, alpha: f64) -> f64 {
    s2 * (1.0 + (x1 - x2).powi(2) / (2.0 * alpha * l * l)).powf(-alpha)
}

pub struct DenseGp {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub s2: f64,
    pub l: f64,
    pub alpha: f64,
    pub noise: f64,
}

impl DenseGp {
    fn gram(&self) -> Vec<Vec<f64>> {
        let n = self.xs.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let k = rq(self.xs[i], self.xs[j], self.s2, self.l, self.alpha);
                        if i == j {
                            k + self.noise * self.noise
                        } else {
                            k
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// (mean, variance) of the predictive distribution at `x`.
    pub fn predict(&self, x: f64) -> (f64, f64) {
        let f = lu(self.gram());
        let ks: Vec<f64> = self
            .xs
            .iter()
            .map(|&xi| rq(x, xi, self.s2, self.l, self.alpha))
            .collect();
        let w = f.solve(&self.ys);
        let v = f.solve(&ks);
        let mean: f64 = ks.iter().zip(&w).map(|(a, b)| a * b).sum();
        let quad: f64 = ks.iter().zip(&v).map(|(a, b)| a * b).sum();
        (mean, self.s2 + self.noise * self.noise - quad)
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let f = lu(self.gram());
        let w = f.solve(&self.ys);
        let fit: f64 = self.ys.iter().zip(&w).map(|(a, b)| a * b).sum();
        let n = self.ys.len() as f64;
        -0.5 * fit - 0.5 * f.log_abs_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}
