//! Sparse complex symmetric systems: reverse Cuthill-McKee ordering and an
//! envelope (skyline) LDLᵀ factorization without pivoting.
//!
//! The matrices solved here are `Σ σ_T K_T` with `Re σ > 0`, so the real part
//! is positive definite and the unpivoted factorization does not break down.

use std::collections::VecDeque;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),
    #[error("relative residual {0:e} above tolerance")]
    Residual(f64),
    #[error("right-hand side has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
}

/// Symmetric matrix in compressed rows, both triangles stored.
#[derive(Clone, Debug)]
pub struct SymCsr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl SymCsr {
    /// Sums duplicate entries; `entries` must list both (i, j) and (j, i).
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, Complex64)>) -> Self {
        entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }
}

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn rcm_order(a: &SymCsr) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row_ptr[i + 1] - a.row_ptr[i]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // Start each component from an unvisited node of minimum degree.
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        let start = pseudo_peripheral(a, start, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &SymCsr, start: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; a.n];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for (j, _) in a.row(v) {
            if level[j] == usize::MAX {
                level[j] = level[v] + 1;
                queue.push_back(j);
            }
        }
    }
    level
}

/// Repeatedly jumps to a minimum-degree node of the last BFS level.
fn pseudo_peripheral(a: &SymCsr, start: usize, degree: &[usize]) -> usize {
    let mut node = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let level = bfs_levels(a, node);
        let depth = level
            .iter()
            .filter(|&&l| l != usize::MAX)
            .max()
            .copied()
            .unwrap_or(0);
        if depth <= ecc && node != start {
            break;
        }
        ecc = depth;
        let far = (0..a.n)
            .filter(|&i| level[i] == depth)
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        if far == node {
            break;
        }
        node = far;
    }
    node
}

/// `A = L D Lᵀ` in envelope storage, in a fill-reducing ordering.
pub struct EnvelopeLdlt {
    n: usize,
    perm: Vec<usize>,
    inv: Vec<usize>,
    first: Vec<usize>,
    /// Row i holds `L[i][first[i]..i]`.
    rows: Vec<Vec<Complex64>>,
    diag: Vec<Complex64>,
}

impl EnvelopeLdlt {
    pub fn factor(a: &SymCsr) -> Result<Self, SolverError> {
        let n = a.n;
        let perm = rcm_order(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0; n];
        let mut rows: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        for i in 0..n {
            let f = a
                .row(perm[i])
                .map(|(j, _)| inv[j])
                .filter(|&j| j <= i)
                .min()
                .unwrap_or(i);
            first[i] = f;
            let mut r = vec![Complex64::new(0.0, 0.0); i - f];
            for (j, v) in a.row(perm[i]) {
                let jn = inv[j];
                if jn < i {
                    r[jn - f] = v;
                }
            }
            rows.push(r);
        }
        let mut diag = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let fi = first[i];
            // r[j] = L_ij D_j, computed in place over the row envelope.
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (lo, hi) = rows.split_at_mut(i);
                let rj = &lo[j];
                let ri = &mut hi[0];
                let mut s = Complex64::new(0.0, 0.0);
                for k in k0..j {
                    s += ri[k - fi] * rj[k - fj];
                }
                ri[j - fi] -= s;
            }
            let mut d = Complex64::new(0.0, 0.0);
            for (i2, v) in a.row(perm[i]) {
                if inv[i2] == i {
                    d = v;
                }
            }
            let ri = &mut rows[i];
            for j in fi..i {
                let r = ri[j - fi];
                let l = r / diag[j];
                d -= r * l;
                ri[j - fi] = l;
            }
            if d.norm() == 0.0 || !d.re.is_finite() {
                return Err(SolverError::ZeroPivot(i));
            }
            diag[i] = d;
        }
        Ok(Self {
            n,
            perm,
            inv,
            first,
            rows,
            diag,
        })
    }

    fn solve_once(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut y: Vec<Complex64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let mut s = Complex64::new(0.0, 0.0);
            for (k, l) in self.rows[i].iter().enumerate() {
                s += l * y[fi + k];
            }
            y[i] -= s;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            for (k, l) in self.rows[i].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        (0..n).map(|i| y[self.inv[i]]).collect()
    }

    /// Solves `A x = b`, with iterative refinement until the relative
    /// residual reaches `tol` (at most three rounds).
    pub fn solve(
        &self,
        a: &SymCsr,
        b: &[Complex64],
        tol: f64,
    ) -> Result<Vec<Complex64>, SolverError> {
        if b.len() != self.n {
            return Err(SolverError::Length {
                got: b.len(),
                expected: self.n,
            });
        }
        let bn = norm(b);
        let mut x = self.solve_once(b);
        if bn == 0.0 {
            return Ok(x);
        }
        for _ in 0..3 {
            let r: Vec<Complex64> = a.mul(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
            let rel = norm(&r) / bn;
            if rel <= tol {
                return Ok(x);
            }
            let dx = self.solve_once(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        let r: Vec<Complex64> = a.mul(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
        let rel = norm(&r) / bn;
        if rel <= tol {
            Ok(x)
        } else {
            Err(SolverError::Residual(rel))
        }
    }

    /// Stored entries of L, a measure of fill.
    pub fn envelope_size(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// 1D Laplacian-like chain with complex coefficients, shuffled indices.
    fn chain(n: usize) -> SymCsr {
        let shuffle = |i: usize| (i * 7) % n;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((shuffle(i), shuffle(i), c(2.5, 1.0)));
            if i + 1 < n {
                t.push((shuffle(i), shuffle(i + 1), c(-1.0, -0.4)));
                t.push((shuffle(i + 1), shuffle(i), c(-1.0, -0.4)));
            }
        }
        SymCsr::from_triplets(n, t)
    }

    #[test]
    fn rcm_recovers_band() {
        let a = chain(50);
        let f = EnvelopeLdlt::factor(&a).unwrap();
        assert_eq!(f.envelope_size(), 49);
        let p = rcm_order(&a);
        let mut seen = p.clone();
        seen.sort();
        assert_eq!(seen, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn solves_against_known_solution() {
        let a = chain(50);
        let x: Vec<Complex64> = (0..50)
            .map(|i| c(i as f64 * 0.1, 1.0 - i as f64 * 0.03))
            .collect();
        let b = a.mul(&x);
        let f = EnvelopeLdlt::factor(&a).unwrap();
        let got = f.solve(&a, &b, 1e-13).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).norm() < 1e-12);
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let a = SymCsr::from_triplets(
            2,
            vec![
                (0, 0, c(1.0, 0.0)),
                (0, 0, c(2.0, 0.0)),
                (1, 1, c(1.0, 0.0)),
            ],
        );
        assert_eq!(a.mul(&[c(1.0, 0.0), c(0.0, 0.0)])[0], c(3.0, 0.0));
    }

    #[test]
    fn zero_pivot_detected() {
        let a = SymCsr::from_triplets(2, vec![(0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))]);
        assert!(matches!(
            EnvelopeLdlt::factor(&a),
            Err(SolverError::ZeroPivot(_))
        ));
    }
}
