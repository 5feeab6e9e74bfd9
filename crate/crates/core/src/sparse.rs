//! Compressed-row matrices, ILU(0) and restarted GMRES.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Accumulates rows in order; duplicate columns within a row are summed.
#[derive(Debug, Default)]
pub struct CsrBuilder {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    scratch: Vec<(usize, f64)>,
}

impl CsrBuilder {
    pub fn new(n: usize, nnz_hint: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Self {
            n,
            row_ptr,
            cols: Vec::with_capacity(nnz_hint),
            vals: Vec::with_capacity(nnz_hint),
            scratch: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        self.scratch.clear();
        self.scratch.extend_from_slice(entries);
        self.scratch.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(c, v) in &self.scratch {
            debug_assert!(c < self.n);
            if last == Some(c) {
                *self.vals.last_mut().expect("entry present") += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = Some(c);
            }
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn finish(self) -> CsrMatrix {
        assert_eq!(self.row_ptr.len(), self.n + 1, "every row must be pushed");
        CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr,
            cols: self.cols,
            vals: self.vals,
        }
    }
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let (c, v) = self.row(i);
            let mut acc = 0.0;
            for k in 0..c.len() {
                acc += v[k] * x[c[k]];
            }
            y[i] = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }
}

/// Incomplete LU factorisation with the sparsity pattern of the matrix.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            let (c, _) = lu.row(i);
            let start = lu.row_ptr[i];
            if let Ok(p) = c.binary_search(&i) {
                diag[i] = start + p;
            }
            if diag[i] == usize::MAX {
                return Err(Error::SolverFailed {
                    iterations: 0,
                    residual: f64::NAN,
                    history: vec![],
                });
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in start..end {
                pos[lu.cols[p]] = p;
            }
            for p in start..end {
                let k = lu.cols[p];
                if k >= i {
                    break;
                }
                let pivot = lu.vals[diag[k]];
                let lik = lu.vals[p] / pivot;
                lu.vals[p] = lik;
                for q in (diag[k] + 1)..lu.row_ptr[k + 1] {
                    let j = lu.cols[q];
                    let pj = pos[j];
                    if pj != usize::MAX {
                        lu.vals[pj] -= lik * lu.vals[q];
                    }
                }
            }
            for p in start..end {
                pos[lu.cols[p]] = usize::MAX;
            }
            let d = lu.vals[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::SolverFailed {
                    iterations: 0,
                    residual: f64::NAN,
                    history: vec![],
                });
            }
        }
        Ok(Self { lu, diag })
    }

    /// Solves `L U x = b` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut acc = x[i];
            for p in lu.row_ptr[i]..self.diag[i] {
                acc -= lu.vals[p] * x[lu.cols[p]];
            }
            x[i] = acc;
        }
        for i in (0..lu.n).rev() {
            let mut acc = x[i];
            for p in (self.diag[i] + 1)..lu.row_ptr[i + 1] {
                acc -= lu.vals[p] * x[lu.cols[p]];
            }
            x[i] = acc / lu.vals[self.diag[i]];
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    pub rel_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            restart: 60,
            max_iter: 3000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KrylovReport {
    pub iterations: usize,
    pub rel_residual: f64,
    /// Relative residual at the start of each restart cycle and at exit.
    pub history: Vec<f64>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Right-preconditioned restarted GMRES. `x` holds the initial guess on entry.
pub fn gmres(
    a: &CsrMatrix,
    pre: &Ilu0,
    b: &[f64],
    x: &mut [f64],
    opts: &KrylovOptions,
) -> Result<KrylovReport> {
    let n = a.n;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovReport {
            iterations: 0,
            rel_residual: 0.0,
            history: vec![0.0],
        });
    }
    let m = opts.restart.max(1);
    let mut history = Vec::new();
    let mut total = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
    let mut g = vec![0.0; m + 1];
    loop {
        a.matvec(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm(&r);
        let rel = beta / bnorm;
        history.push(rel);
        if rel <= opts.rel_tol {
            return Ok(KrylovReport {
                iterations: total,
                rel_residual: rel,
                history,
            });
        }
        if total >= opts.max_iter || !rel.is_finite() {
            return Err(Error::SolverFailed {
                iterations: total,
                residual: rel,
                history,
            });
        }
        v.clear();
        v.push(r.iter().map(|e| e / beta).collect());
        g.iter_mut().for_each(|e| *e = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            z.copy_from_slice(&v[k]);
            pre.apply(&mut z);
            a.matvec(&z, &mut w);
            for j in 0..=k {
                let hjk = dot(&w, &v[j]);
                h[j][k] = hjk;
                for i in 0..n {
                    w[i] -= hjk * v[j][i];
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if d == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            let est = g[k + 1].abs() / bnorm;
            if est <= opts.rel_tol * 0.5 || total >= opts.max_iter || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|e| e / hn).collect());
        }
        // back substitution
        let mut yk = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k_used {
                acc -= h[i][j] * yk[j];
            }
            yk[i] = acc / h[i][i];
        }
        z.iter_mut().for_each(|e| *e = 0.0);
        for (j, yj) in yk.iter().enumerate() {
            for i in 0..n {
                z[i] += yj * v[j][i];
            }
        }
        pre.apply(&mut z);
        for i in 0..n {
            x[i] += z[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut b = CsrBuilder::new(n, 3 * n);
        for i in 0..n {
            let mut row = vec![(i, 2.0)];
            if i > 0 {
                row.push((i - 1, -1.0));
            }
            if i + 1 < n {
                row.push((i + 1, -1.0));
            }
            b.push_row(&row);
        }
        b.finish()
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let a = laplace_1d(50);
        let ilu = Ilu0::new(&a).unwrap();
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = a.mul(&xs);
        ilu.apply(&mut b);
        for (u, v) in b.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 200;
        let mut bld = CsrBuilder::new(n, 4 * n);
        for i in 0..n {
            let mut row = vec![(i, 3.0)];
            if i > 0 {
                row.push((i - 1, -1.5));
            }
            if i + 1 < n {
                row.push((i + 1, -0.5));
            }
            if i + 7 < n {
                row.push((i + 7, 0.3));
            }
            bld.push_row(&row);
        }
        let a = bld.finish();
        let ilu = Ilu0::new(&a).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos()).collect();
        let b = a.mul(&xs);
        let mut x = vec![0.0; n];
        let rep = gmres(&a, &ilu, &b, &mut x, &KrylovOptions::default()).unwrap();
        assert!(rep.rel_residual <= 1e-10);
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn duplicate_entries_are_summed() {
        let mut b = CsrBuilder::new(2, 4);
        b.push_row(&[(1, 1.0), (0, 2.0), (1, 3.0)]);
        b.push_row(&[(1, 1.0)]);
        let a = b.finish();
        assert_eq!(a.row(0), (&[0usize, 1][..], &[2.0, 4.0][..]));
    }
}
