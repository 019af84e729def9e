//! Small dense and banded linear algebra used by the direct solvers and the
//! matrix audits: banded LDLᵀ for SPD systems, a Jacobi eigensolver for small
//! symmetric matrices, and least-squares line fits.

use crate::error::{Error, Result};

/// Symmetric positive definite matrix stored as a lower band.
/// Entry `(i, j)` with `i - bw <= j <= i` lives at `data[i*(bw+1) + j+bw-i]`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandedSpd {
    pub fn new(n: usize, bw: usize) -> Self {
        BandedSpd {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
            factored: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Add `v` at `(i, j)`; symmetric entries are folded into the lower band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(!self.factored, "matrix already factored");
        let (r, c) = if j > i { (j, i) } else { (i, j) };
        assert!(
            r - c <= self.bw,
            "entry ({i}, {j}) outside bandwidth {}",
            self.bw
        );
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    /// In-place LDLᵀ factorization. Fails if a pivot is not strictly positive.
    pub fn factor(&mut self) -> Result<()> {
        assert!(!self.factored, "matrix already factored");
        let bw = self.bw;
        for i in 0..self.n {
            let jlo = i.saturating_sub(bw);
            for j in jlo..i {
                let mut sum = self.data[self.slot(i, j)];
                for k in jlo..j {
                    sum -= self.data[self.slot(i, k)]
                        * self.data[self.slot(j, k)]
                        * self.data[self.slot(k, k)];
                }
                let s = self.slot(i, j);
                self.data[s] = sum / self.data[self.slot(j, j)];
            }
            let mut d = self.data[self.slot(i, i)];
            for k in jlo..i {
                let l = self.data[self.slot(i, k)];
                d -= l * l * self.data[self.slot(k, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Solver(format!(
                    "LDLt pivot {} is {d}; matrix is not positive definite",
                    i
                )));
            }
            let s = self.slot(i, i);
            self.data[s] = d;
        }
        self.factored = true;
        Ok(())
    }

    /// Solve `A x = b` using the stored factorization.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if !self.factored {
            return Err(Error::Solver("solve called before factor".into()));
        }
        if b.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: b.len(),
            });
        }
        let bw = self.bw;
        let mut x = b.to_vec();
        // Forward: L z = b (unit lower triangular).
        for i in 0..self.n {
            let jlo = i.saturating_sub(bw);
            let mut v = x[i];
            for j in jlo..i {
                v -= self.data[self.slot(i, j)] * x[j];
            }
            x[i] = v;
        }
        // Diagonal: D y = z.
        for i in 0..self.n {
            x[i] /= self.data[self.slot(i, i)];
        }
        // Backward: Lᵀ x = y.
        for i in (0..self.n).rev() {
            let jhi = (i + bw).min(self.n - 1);
            let mut v = x[i];
            for j in (i + 1)..=jhi {
                v -= self.data[self.slot(j, i)] * x[j];
            }
            x[i] = v;
        }
        Ok(x)
    }
}

/// Eigenvalues of a small dense symmetric matrix (row-major, `n x n`) by
/// cyclic Jacobi rotations, returned in ascending order.
pub fn sym_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::Dimension {
            expected: n * n,
            got: a.len(),
        });
    }
    for i in 0..n {
        for j in 0..i {
            if (a[i * n + j] - a[j * n + i]).abs()
                > 1e-12 * (1.0 + a[i * n + j].abs().max(a[j * n + i].abs()))
            {
                return Err(Error::InvalidSpec(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut m = a.to_vec();
    let norm: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= 1e-15 * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-18 * norm {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eigs)
}

/// Least-squares fit `y = intercept + slope * x`; returns
/// `(intercept, slope, r_squared)`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidSpec(
            "line fit needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidSpec("line fit abscissae are constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok((intercept, slope, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Gaussian elimination with partial pivoting, as an oracle.
    fn dense_solve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
        let mut m = a.to_vec();
        let mut x = b.to_vec();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| {
                    m[i * n + col]
                        .abs()
                        .partial_cmp(&m[j * n + col].abs())
                        .unwrap()
                })
                .unwrap();
            if piv != col {
                for k in 0..n {
                    m.swap(col * n + k, piv * n + k);
                }
                x.swap(col, piv);
            }
            let d = m[col * n + col];
            for row in (col + 1)..n {
                let f = m[row * n + col] / d;
                for k in col..n {
                    m[row * n + k] -= f * m[col * n + k];
                }
                x[row] -= f * x[col];
            }
        }
        for row in (0..n).rev() {
            let mut v = x[row];
            for k in (row + 1)..n {
                v -= m[row * n + k] * x[k];
            }
            x[row] = v / m[row * n + row];
        }
        x
    }

    #[test]
    fn banded_matches_dense_oracle() {
        let n = 40;
        let bw = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut dense = vec![0.0; n * n];
        let mut banded = BandedSpd::new(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                if i == j {
                    // Strict diagonal dominance makes the matrix SPD.
                    let v = 2.0 * (2 * bw + 1) as f64 + rng.gen::<f64>();
                    dense[i * n + i] = v;
                    banded.add(i, i, v);
                } else {
                    let v = rng.gen::<f64>() * 2.0 - 1.0;
                    dense[i * n + j] = v;
                    dense[j * n + i] = v;
                    banded.add(i, j, v);
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        banded.factor().unwrap();
        let x = banded.solve(&b).unwrap();
        let x_ref = dense_solve(&dense, &b, n);
        for i in 0..n {
            assert!(
                (x[i] - x_ref[i]).abs() < 1e-10,
                "component {i}: {} vs {}",
                x[i],
                x_ref[i]
            );
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut m = BandedSpd::new(3, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, -2.0);
        m.add(2, 2, 1.0);
        assert!(m.factor().is_err());
    }

    #[test]
    fn jacobi_matches_known_spectra() {
        let eigs = sym_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!((eigs[0] - 1.0).abs() < 1e-12 && (eigs[1] - 3.0).abs() < 1e-12);

        let a = [4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 4.0];
        let eigs = sym_eigenvalues(&a, 3).unwrap();
        let sqrt2 = 2.0f64.sqrt();
        for (got, want) in eigs.iter().zip([4.0 - sqrt2, 4.0, 4.0 + sqrt2]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }

        assert!(sym_eigenvalues(&[1.0, 5.0, 0.0, 1.0], 2).is_err());
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 - 0.75 * v).collect();
        let (b, m, r2) = line_fit(&x, &y).unwrap();
        assert!((b - 2.5).abs() < 1e-12);
        assert!((m + 0.75).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
