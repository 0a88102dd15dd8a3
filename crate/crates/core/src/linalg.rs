//! Symmetric banded matrices with an in-place Cholesky factorization.
//!
//! All preconditioners in this crate couple a node only to nodes sharing a
//! gradient stencil, so with row-major ordering the half bandwidth is 1 in 1D
//! and `nx` in 2D.

#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    // row i holds A[i][i - k] at offset i * (bw + 1) + k
    data: Vec<f64>,
}

#[derive(Debug)]
pub(crate) struct NotPositiveDefinite;

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `v` to `A[i][j]` (and implicitly to `A[j][i]`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(r - c <= self.bw);
        self.data[r * (self.bw + 1) + (r - c)] += v;
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (self.bw + 1)]
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        self.data[i * (self.bw + 1)] += v;
    }

    /// Replaces row and column `i` by the identity.
    pub fn pin(&mut self, i: usize) {
        let w = self.bw + 1;
        for k in 0..w {
            self.data[i * w + k] = 0.0;
        }
        for r in i + 1..(i + w).min(self.n) {
            self.data[r * w + (r - i)] = 0.0;
        }
        self.data[i * w] = 1.0;
    }

    #[cfg(test)]
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let w = self.bw + 1;
        for i in 0..self.n {
            y[i] += self.data[i * w] * x[i];
            for k in 1..w.min(i + 1) {
                let a = self.data[i * w + k];
                if a != 0.0 {
                    y[i] += a * x[i - k];
                    y[i - k] += a * x[i];
                }
            }
        }
    }

    /// Cholesky factorization `A = L L^T`, consuming the matrix.
    pub fn cholesky(mut self) -> Result<Cholesky, NotPositiveDefinite> {
        let w = self.bw + 1;
        let n = self.n;
        for i in 0..n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let mut s = self.data[i * w + (i - j)];
                let klo = lo.max(j.saturating_sub(self.bw));
                for k in klo..j {
                    s -= self.data[i * w + (i - k)] * self.data[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(NotPositiveDefinite);
                    }
                    self.data[i * w] = s.sqrt();
                } else {
                    self.data[i * w + (i - j)] = s / self.data[j * w];
                }
            }
        }
        Ok(Cholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    l: BandMatrix,
}

impl Cholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let bw = self.l.bw;
        let w = bw + 1;
        let d = &self.l.data;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= d[i * w + (i - k)] * y[k];
            }
            y[i] = s / d[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for r in i + 1..(i + w).min(n) {
                s -= d[r * w + (r - i)] * y[r];
            }
            y[i] = s / d[i * w];
        }
        y
    }
}

/// `P + c v v^T`, solved through Sherman-Morrison when `c > 0`.
#[derive(Debug, Clone)]
pub(crate) struct Preconditioner {
    pub chol: Cholesky,
    pub rank_one: Option<(f64, Vec<f64>)>,
}

impl Preconditioner {
    pub fn solve(&self, g: &[f64]) -> Vec<f64> {
        let x = self.chol.solve(g);
        match &self.rank_one {
            Some((c, v)) if *c > 0.0 => {
                let z = self.chol.solve(v);
                let vx: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                let vz: f64 = v.iter().zip(&z).map(|(a, b)| a * b).sum();
                let f = c * vx / (1.0 + c * vz);
                x.iter().zip(&z).map(|(a, b)| a - f * b).collect()
            }
            _ => x,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn tridiagonal_solve_matches_product() {
        let a = laplacian(7);
        let x: Vec<f64> = (0..7).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
        let mut b = vec![0.0; 7];
        a.mul_vec(&x, &mut b);
        let sol = a.cholesky().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_band_solve() {
        let n = 20;
        let bw = 4;
        let mut a = BandMatrix::zeros(n, bw);
        for i in 0..n {
            a.add(i, i, 10.0);
            for k in 1..=bw {
                if i + k < n {
                    a.add(i, i + k, -1.0 / k as f64);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 3.5).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x, &mut b);
        let sol = a.cholesky().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = laplacian(4);
        a.add(2, 2, -5.0);
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn sherman_morrison() {
        let a = laplacian(5);
        let v = vec![1.0, 0.5, -0.25, 2.0, 1.0];
        let c = 3.0;
        let x = vec![0.3, -1.0, 2.0, 0.1, 0.7];
        let mut b = vec![0.0; 5];
        a.mul_vec(&x, &mut b);
        let vx: f64 = v.iter().zip(&x).map(|(p, q)| p * q).sum();
        for i in 0..5 {
            b[i] += c * v[i] * vx;
        }
        let p = Preconditioner {
            chol: a.cholesky().unwrap(),
            rank_one: Some((c, v)),
        };
        let sol = p.solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-12);
        }
    }
}
