//! Left-looking sparse LU with partial pivoting for complex matrices.
//!
//! Columns are taken in a fixed fill-reducing order; rows are pivoted as the
//! factorization proceeds, preferring the diagonal entry whenever it is within
//! `threshold` of the largest candidate. Each column is obtained from a sparse
//! triangular solve whose nonzero structure is found by depth-first search
//! over the already computed columns of `L`.

use crate::C64;

/// Sparsity pattern of a square matrix in CSC form.
#[derive(Debug, Clone)]
pub struct SparsePattern {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    pub column: usize,
}

#[derive(Debug, Clone)]
struct Csc {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<C64>,
}

impl Csc {
    fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        Self {
            col_ptr,
            row_idx: Vec::with_capacity(nnz),
            values: Vec::with_capacity(nnz),
        }
    }

    fn col(&self, k: usize) -> (&[usize], &[C64]) {
        let r = self.col_ptr[k]..self.col_ptr[k + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }
}

#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    col_order: Vec<usize>,
    pinv: Vec<usize>,
    l: Csc,
    u: Csc,
    u_diag: Vec<C64>,
}

const UNSET: usize = usize::MAX;

impl SparseLu {
    /// Factorizes `A(:, col_order) = Pᵀ L U`.
    ///
    /// `values` follows `pattern`. A pivot whose magnitude does not exceed
    /// `singular_tol` makes the factorization fail.
    pub fn factor(
        pattern: &SparsePattern,
        values: &[C64],
        col_order: &[usize],
        threshold: f64,
        singular_tol: f64,
    ) -> Result<Self, SingularPivot> {
        let n = pattern.n;
        assert_eq!(values.len(), pattern.row_idx.len());
        assert_eq!(col_order.len(), n);

        let guess = 4 * pattern.row_idx.len() + n;
        let mut l = Csc::with_capacity(n, guess);
        let mut u = Csc::with_capacity(n, guess);
        let mut u_diag = Vec::with_capacity(n);
        let mut pinv = vec![UNSET; n];

        let mut x = vec![C64::new(0.0, 0.0); n];
        let mut mark = vec![UNSET; n];
        let mut reach: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::with_capacity(n);

        for (k, &j) in col_order.iter().enumerate() {
            let col = pattern.col_ptr[j]..pattern.col_ptr[j + 1];

            // symbolic: reach of the column's rows through L, in postorder
            reach.clear();
            for &i in &pattern.row_idx[col.clone()] {
                if mark[i] == k {
                    continue;
                }
                mark[i] = k;
                stack.push((i, 0));
                while let Some(top) = stack.len().checked_sub(1) {
                    let (node, pos) = stack[top];
                    let p = pinv[node];
                    let child = if p == UNSET { None } else { l.col(p).0.get(pos).copied() };
                    match child {
                        Some(c) => {
                            stack[top].1 += 1;
                            if mark[c] != k {
                                mark[c] = k;
                                stack.push((c, 0));
                            }
                        }
                        None => {
                            stack.pop();
                            reach.push(node);
                        }
                    }
                }
            }

            // numeric: x = L⁻¹ a_j over the reach, in topological order
            for &i in &reach {
                x[i] = C64::new(0.0, 0.0);
            }
            for (&i, &v) in pattern.row_idx[col.clone()].iter().zip(&values[col]) {
                x[i] += v;
            }
            for &i in reach.iter().rev() {
                let p = pinv[i];
                if p == UNSET {
                    continue;
                }
                let xi = x[i];
                if xi == C64::new(0.0, 0.0) {
                    continue;
                }
                let (rows, vals) = l.col(p);
                for (&r, &lv) in rows.iter().zip(vals) {
                    x[r] -= lv * xi;
                }
            }

            // split into U part and pivot candidates
            let mut best = UNSET;
            let mut best_abs = -1.0_f64;
            for &i in &reach {
                let p = pinv[i];
                if p != UNSET {
                    if x[i] != C64::new(0.0, 0.0) {
                        u.row_idx.push(p);
                        u.values.push(x[i]);
                    }
                } else {
                    let a = x[i].norm();
                    if a > best_abs {
                        best_abs = a;
                        best = i;
                    }
                }
            }
            if best == UNSET || best_abs <= singular_tol {
                return Err(SingularPivot { column: k });
            }
            if pinv[j] == UNSET && mark[j] == k && x[j].norm() >= threshold * best_abs {
                best = j;
            }
            let pivot = x[best];
            pinv[best] = k;
            u_diag.push(pivot);
            u.col_ptr.push(u.row_idx.len());

            for &i in &reach {
                if pinv[i] == UNSET && x[i] != C64::new(0.0, 0.0) {
                    l.row_idx.push(i);
                    l.values.push(x[i] / pivot);
                }
            }
            l.col_ptr.push(l.row_idx.len());
        }

        for r in &mut l.row_idx {
            *r = pinv[*r];
        }

        Ok(Self {
            n,
            col_order: col_order.to_vec(),
            pinv,
            l,
            u,
            u_diag,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entries stored in `L` and `U` (including the diagonal of `U`).
    pub fn fill(&self) -> usize {
        self.l.row_idx.len() + self.u.row_idx.len() + self.n
    }

    /// Numbers of pivots with positive and negative real part, when every
    /// pivot was taken on the diagonal. For a Hermitian matrix this is its
    /// inertia (the factorization is then `P A Pᵀ = L D Lᴴ` with `D = diag U`).
    pub fn diagonal_pivot_inertia(&self) -> Option<(usize, usize)> {
        let diagonal = self.col_order.iter().enumerate().all(|(k, &j)| self.pinv[j] == k);
        if !diagonal {
            return None;
        }
        let pos = self.u_diag.iter().filter(|d| d.re > 0.0).count();
        let neg = self.u_diag.iter().filter(|d| d.re < 0.0).count();
        Some((pos, neg))
    }

    /// Solves `A x = b`, returning `x`.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.n);
        let mut c = vec![C64::new(0.0, 0.0); self.n];
        for (i, &bi) in b.iter().enumerate() {
            c[self.pinv[i]] = bi;
        }
        for k in 0..self.n {
            let ck = c[k];
            if ck == C64::new(0.0, 0.0) {
                continue;
            }
            let (rows, vals) = self.l.col(k);
            for (&r, &v) in rows.iter().zip(vals) {
                c[r] -= v * ck;
            }
        }
        for k in (0..self.n).rev() {
            c[k] /= self.u_diag[k];
            let ck = c[k];
            if ck == C64::new(0.0, 0.0) {
                continue;
            }
            let (rows, vals) = self.u.col(k);
            for (&r, &v) in rows.iter().zip(vals) {
                c[r] -= v * ck;
            }
        }
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for (k, &j) in self.col_order.iter().enumerate() {
            out[j] = c[k];
        }
        out
    }
}
