//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Columns are eliminated left-looking in order of increasing length with
//! threshold partial pivoting, so the slack part of a basis costs nothing
//! and the structural part stays close to triangular.

const DROP: f64 = 1e-14;
const SINGULAR: f64 = 1e-9;
const THRESHOLD: f64 = 0.1;

/// Factored basis `B = (row permutation) · L · U · (column permutation)`
/// followed by a list of eta transformations.
#[derive(Debug, Clone, Default)]
pub(crate) struct Factor {
    m: usize,
    /// Pivot row and basis position of each elimination step.
    prow: Vec<usize>,
    ppos: Vec<usize>,
    /// Nonempty L columns in step order.
    l_piv: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    /// U by step: diagonal plus off-diagonal entries keyed by earlier step.
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    /// Eta file: position, pivot value, other entries.
    eta_pos: Vec<usize>,
    eta_piv: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
    // Scratch.
    work: Vec<f64>,
}

/// A basis position whose column turned out dependent, and the row whose
/// slack replaced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Replacement {
    pub position: usize,
    pub row: usize,
}

impl Factor {
    /// Factors the `m` basis columns supplied by `column(position, out)`.
    /// Dependent columns are swapped for slack columns (`-e_row`) and
    /// reported.
    pub fn new(m: usize, column: impl Fn(usize, &mut Vec<(usize, f64)>)) -> (Self, Vec<Replacement>) {
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut row_count = vec![0usize; m];
        for pos in 0..m {
            let mut c = Vec::new();
            column(pos, &mut c);
            c.retain(|&(_, v)| v != 0.0);
            for &(i, _) in &c {
                row_count[i] += 1;
            }
            cols.push(c);
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| (cols[p].len(), p));

        let mut f = Factor {
            m,
            l_start: vec![0],
            u_start: vec![0],
            eta_start: vec![0],
            work: vec![0.0; m],
            ..Default::default()
        };
        let mut step_of_row = vec![usize::MAX; m];
        let mut x = vec![0.0; m];
        let mut mark = vec![false; m];
        let mut touched: Vec<usize> = Vec::new();
        let mut rejected = Vec::new();

        for &pos in &order {
            for &(i, v) in &cols[pos] {
                if !mark[i] {
                    mark[i] = true;
                    touched.push(i);
                }
                x[i] += v;
            }
            for lc in 0..f.l_piv.len() {
                let v = x[f.l_piv[lc]];
                if v == 0.0 {
                    continue;
                }
                for e in f.l_start[lc]..f.l_start[lc + 1] {
                    let i = f.l_idx[e];
                    if !mark[i] {
                        mark[i] = true;
                        touched.push(i);
                    }
                    x[i] -= f.l_val[e] * v;
                }
            }
            let mut max = 0.0f64;
            for &i in &touched {
                if step_of_row[i] == usize::MAX {
                    max = max.max(x[i].abs());
                }
            }
            if max <= SINGULAR {
                rejected.push(pos);
            } else {
                let mut best: Option<usize> = None;
                for &i in &touched {
                    if step_of_row[i] != usize::MAX || x[i].abs() < THRESHOLD * max {
                        continue;
                    }
                    best = match best {
                        Some(b) if (row_count[b], b) <= (row_count[i], i) => Some(b),
                        _ => Some(i),
                    };
                }
                let p = best.expect("a pivot above threshold exists");
                let k = f.prow.len();
                let piv = x[p];
                for &i in &touched {
                    let v = x[i];
                    if i == p || v.abs() <= DROP {
                        continue;
                    }
                    match step_of_row[i] {
                        usize::MAX => {
                            f.l_idx.push(i);
                            f.l_val.push(v / piv);
                        }
                        s => {
                            f.u_idx.push(s);
                            f.u_val.push(v);
                        }
                    }
                }
                if f.l_idx.len() > *f.l_start.last().unwrap() {
                    f.l_piv.push(p);
                    f.l_start.push(f.l_idx.len());
                }
                f.u_diag.push(piv);
                f.u_start.push(f.u_idx.len());
                f.prow.push(p);
                f.ppos.push(pos);
                step_of_row[p] = k;
            }
            for &i in &touched {
                x[i] = 0.0;
                mark[i] = false;
            }
            touched.clear();
        }

        // Cover the rows left without a pivot by slack columns.
        let free: Vec<usize> = (0..m).filter(|&i| step_of_row[i] == usize::MAX).collect();
        let mut free_rows = free.into_iter();
        let mut replacements = Vec::with_capacity(rejected.len());
        for pos in rejected {
            let row = free_rows.next().expect("as many free rows as rejected columns");
            let k = f.prow.len();
            f.u_diag.push(-1.0);
            f.u_start.push(f.u_idx.len());
            f.prow.push(row);
            f.ppos.push(pos);
            step_of_row[row] = k;
            replacements.push(Replacement { position: pos, row });
        }
        (f, replacements)
    }

    pub fn eta_count(&self) -> usize {
        self.eta_pos.len()
    }

    pub fn nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m + self.eta_idx.len()
    }

    /// Solves `B y = a`. `a` is indexed by row and is consumed; the result
    /// is written by basis position.
    pub fn ftran(&self, a: &mut [f64], out: &mut [f64]) {
        for lc in 0..self.l_piv.len() {
            let v = a[self.l_piv[lc]];
            if v == 0.0 {
                continue;
            }
            for e in self.l_start[lc]..self.l_start[lc + 1] {
                a[self.l_idx[e]] -= self.l_val[e] * v;
            }
        }
        for k in (0..self.m).rev() {
            let z = a[self.prow[k]] / self.u_diag[k];
            a[self.prow[k]] = 0.0;
            out[self.ppos[k]] = z;
            if z == 0.0 {
                continue;
            }
            for e in self.u_start[k]..self.u_start[k + 1] {
                a[self.prow[self.u_idx[e]]] -= self.u_val[e] * z;
            }
        }
        for t in 0..self.eta_pos.len() {
            let r = self.eta_pos[t];
            let v = out[r] / self.eta_piv[t];
            out[r] = v;
            if v == 0.0 {
                continue;
            }
            for e in self.eta_start[t]..self.eta_start[t + 1] {
                out[self.eta_idx[e]] -= self.eta_val[e] * v;
            }
        }
    }

    /// Solves `B^T y = c`. `c` is indexed by basis position and is consumed;
    /// the result is written by row.
    pub fn btran(&mut self, c: &mut [f64], out: &mut [f64]) {
        for t in (0..self.eta_pos.len()).rev() {
            let r = self.eta_pos[t];
            let mut s = c[r];
            for e in self.eta_start[t]..self.eta_start[t + 1] {
                s -= self.eta_val[e] * c[self.eta_idx[e]];
            }
            c[r] = s / self.eta_piv[t];
        }
        let w = &mut self.work;
        for k in 0..self.m {
            let mut s = c[self.ppos[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[e] * w[self.u_idx[e]];
            }
            w[k] = s / self.u_diag[k];
        }
        for k in 0..self.m {
            out[self.prow[k]] = w[k];
        }
        for lc in (0..self.l_piv.len()).rev() {
            let mut s = 0.0;
            for e in self.l_start[lc]..self.l_start[lc + 1] {
                s += self.l_val[e] * out[self.l_idx[e]];
            }
            out[self.l_piv[lc]] -= s;
        }
    }

    /// Records that the column with FTRAN image `alpha` replaced the one at
    /// basis position `r`.
    pub fn update(&mut self, r: usize, alpha: &[f64]) {
        self.eta_pos.push(r);
        self.eta_piv.push(alpha[r]);
        for (i, &v) in alpha.iter().enumerate() {
            if i != r && v.abs() > DROP {
                self.eta_idx.push(i);
                self.eta_val.push(v);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(b: &[Vec<f64>]) -> impl Fn(usize, &mut Vec<(usize, f64)>) + '_ {
        move |pos, out| {
            for (i, row) in b.iter().enumerate() {
                if row[pos] != 0.0 {
                    out.push((i, row[pos]));
                }
            }
        }
    }

    fn mul(b: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        b.iter().map(|row| row.iter().zip(x).map(|(a, v)| a * v).sum()).collect()
    }

    #[test]
    fn solves_both_directions() {
        let b = vec![
            vec![2.0, 0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0, 3.0],
            vec![4.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 5.0, 1.0],
        ];
        let (mut f, rep) = Factor::new(4, dense_cols(&b));
        assert!(rep.is_empty());
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut a = mul(&b, &x);
        let mut out = vec![0.0; 4];
        f.ftran(&mut a, &mut out);
        for i in 0..4 {
            assert!((out[i] - x[i]).abs() < 1e-12);
        }
        // B^T y = c
        let bt: Vec<Vec<f64>> = (0..4).map(|j| (0..4).map(|i| b[i][j]).collect()).collect();
        let mut c = mul(&bt, &x);
        f.btran(&mut c, &mut out);
        for i in 0..4 {
            assert!((out[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactor() {
        let mut b = vec![vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let (mut f, _) = Factor::new(3, dense_cols(&b));
        let newcol = [1.0, 1.0, 1.0];
        let mut a = newcol.to_vec();
        let mut alpha = vec![0.0; 3];
        f.ftran(&mut a, &mut alpha);
        f.update(1, &alpha);
        for (i, row) in b.iter_mut().enumerate() {
            row[1] = newcol[i];
        }
        let x = [0.3, -1.0, 2.0];
        let mut rhs = mul(&b, &x);
        let mut out = vec![0.0; 3];
        f.ftran(&mut rhs, &mut out);
        for i in 0..3 {
            assert!((out[i] - x[i]).abs() < 1e-12);
        }
        let bt: Vec<Vec<f64>> = (0..3).map(|j| (0..3).map(|i| b[i][j]).collect()).collect();
        let mut c = mul(&bt, &x);
        f.btran(&mut c, &mut out);
        for i in 0..3 {
            assert!((out[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_column_replaced_by_slack() {
        let b = vec![vec![1.0, 2.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 1.0]];
        let (f, rep) = Factor::new(3, dense_cols(&b));
        assert_eq!(rep.len(), 1);
        assert_eq!(f.prow.len(), 3);
    }
}
