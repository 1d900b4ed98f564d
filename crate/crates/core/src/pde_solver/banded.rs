use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square complex band matrix with equal lower and upper bandwidth, factored
/// in place as `LU` without pivoting.
///
/// Pivoting is unnecessary for the Crank–Nicolson matrices `iI/dt + ½K` with
/// `K` real symmetric: every leading block is again of that form, so every
/// leading minor is nonzero and the fill stays inside the band.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    /// Row `r`, column `c` is stored at `r * (2 bw + 1) + (c + bw − r)`.
    data: Vec<Complex64>,
}

impl BandedLu {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![Complex64::default(); n * (2 * bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, r: usize, c: usize) -> usize {
        r * (2 * self.bw + 1) + (c + self.bw - r)
    }

    /// Adds `v` at `(r, c)`; the entry must lie inside the band.
    pub fn add(&mut self, r: usize, c: usize, v: Complex64) {
        debug_assert!(r.abs_diff(c) <= self.bw);
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    /// Factors the matrix in place.
    pub fn factor(mut self) -> Result<Self> {
        let (n, bw) = (self.n, self.bw);
        let scale = self.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if !(pivot.norm() > 1e-14 * scale) {
                return Err(Error::Solver(format!("zero pivot at row {k}")));
            }
            let last = (k + bw).min(n - 1);
            for r in k + 1..=last {
                let srk = self.slot(r, k);
                let l = self.data[srk] / pivot;
                self.data[srk] = l;
                if l == Complex64::default() {
                    continue;
                }
                for c in k + 1..=last {
                    let u = self.data[self.slot(k, c)];
                    let s = self.slot(r, c);
                    self.data[s] -= l * u;
                }
            }
        }
        Ok(self)
    }

    /// Solves `A x = b` in place using the stored factors.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let (n, bw) = (self.n, self.bw);
        for r in 0..n {
            let first = r.saturating_sub(bw);
            let mut acc = b[r];
            for c in first..r {
                acc -= self.data[self.slot(r, c)] * b[c];
            }
            b[r] = acc;
        }
        for r in (0..n).rev() {
            let last = (r + bw).min(n - 1);
            let mut acc = b[r];
            for c in r + 1..=last {
                acc -= self.data[self.slot(r, c)] * b[c];
            }
            b[r] = acc / self.data[self.slot(r, r)];
        }
    }

    /// Solves `conj(A) x = b` in place, reusing the factors of `A`.
    pub fn solve_conj_in_place(&self, b: &mut [Complex64]) {
        b.iter_mut().for_each(|v| *v = v.conj());
        self.solve_in_place(b);
        b.iter_mut().for_each(|v| *v = v.conj());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solves_random_crank_nicolson_type_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, bw) = (40, 5);
        let mut dense = vec![vec![Complex64::default(); n]; n];
        let mut m = BandedLu::zeros(n, bw);
        for r in 0..n {
            for col in r..(r + bw + 1).min(n) {
                let k = if r == col { rng.random_range(-10.0..10.0) } else { rng.random_range(-3.0..3.0) };
                let mut v = c(0.5 * k, 0.0);
                if r == col {
                    v += c(0.0, 20.0);
                }
                dense[r][col] += v;
                m.add(r, col, v);
                if r != col {
                    dense[col][r] += v;
                    m.add(col, r, v);
                }
            }
        }
        let lu = m.factor().unwrap();
        let x: Vec<Complex64> = (0..n).map(|i| c(i as f64, 1.0 - i as f64 * 0.3)).collect();
        let mut b: Vec<Complex64> = (0..n).map(|r| (0..n).map(|j| dense[r][j] * x[j]).sum()).collect();
        lu.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).norm() < 1e-10);
        }
        let mut bc: Vec<Complex64> = (0..n).map(|r| (0..n).map(|j| dense[r][j].conj() * x[j]).sum()).collect();
        lu.solve_conj_in_place(&mut bc);
        for i in 0..n {
            assert!((bc[i] - x[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let m = BandedLu::zeros(3, 1);
        assert!(matches!(m.factor(), Err(Error::Solver(_))));
    }
}
