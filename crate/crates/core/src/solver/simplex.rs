//! Bounded primal revised simplex on `A x - s = 0`, `l <= (x, s) <= u`.
//!
//! Phase 1 minimizes the sum of bound violations of the basic variables
//! with a conservative ratio test; phase 2 uses a two-pass Harris ratio
//! test. Pricing is Dantzig on the scaled problem, falling back to Bland's
//! rule during long runs of degenerate pivots.

mod dual;

use serde::{Deserialize, Serialize};

use super::lu::Factor;
use crate::milp::{LinearModel, Sense};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 80;
const DEGENERATE_RUN: usize = 300;
const CERTIFICATE_TOL: f64 = 1e-6;
const PERTURBATION: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic without finite bounds, held at zero.
    Free,
}

/// Basis over structural variables followed by one slack per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    /// Variable in each basis position.
    pub head: Vec<usize>,
    pub status: Vec<VarStatus>,
    /// Dual steepest-edge weights by position, when known.
    #[serde(skip)]
    pub weights: Vec<f64>,
}

/// Optimality evidence measured on the unscaled problem.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Certificate {
    /// Largest row or bound violation, relative to `max(1, |bound|)`.
    pub primal_infeasibility: f64,
    /// Largest wrong-signed reduced cost, relative to `max(1, max |c|)`.
    pub dual_infeasibility: f64,
    /// Largest `|reduced cost| × distance to its bound`, relative to
    /// `max(1, |objective|)`.
    pub complementarity: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.primal_infeasibility <= CERTIFICATE_TOL
            && self.dual_infeasibility <= CERTIFICATE_TOL
            && self.complementarity <= CERTIFICATE_TOL
    }

    pub fn worst(&self) -> f64 {
        self.primal_infeasibility.max(self.dual_infeasibility).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub status: LpStatus,
    pub objective: f64,
    /// Structural variable values.
    pub primal: Vec<f64>,
    /// Row duals `y` with reduced costs `c - A^T y`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
    pub certificate: Option<Certificate>,
    /// Why the solve stopped early, if it did.
    pub diagnostics: Option<String>,
}

enum Step {
    Optimal,
    Infeasible,
    Unbounded,
    Limit,
}

/// Simplex working state for one model; bounds may be changed between
/// solves for branch and bound.
#[derive(Debug, Clone)]
pub(crate) struct Engine {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    /// Unscaled copies for certificates.
    raw_vals: Vec<f64>,
    raw_cost: Vec<f64>,
    raw_lo: Vec<f64>,
    raw_up: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    head: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    factor: Factor,
    weights: Vec<f64>,
}

fn pow2(v: f64) -> f64 {
    if !(v.is_finite() && v > 0.0) {
        return 1.0;
    }
    2f64.powi(v.log2().round() as i32)
}

fn tol(bound: f64) -> f64 {
    PRIMAL_TOL * (1.0 + bound.abs())
}

impl Engine {
    pub fn new(model: &LinearModel) -> Self {
        let m = model.rows.len();
        let n = model.num_vars();
        let mut counts = vec![0usize; n + 1];
        for row in &model.rows {
            for &(j, a) in &row.terms {
                if a != 0.0 {
                    counts[j + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let nnz = col_start[n];
        let mut row_idx = vec![0; nnz];
        let mut vals = vec![0.0; nnz];
        for (i, row) in model.rows.iter().enumerate() {
            for &(j, a) in &row.terms {
                if a != 0.0 {
                    row_idx[fill[j]] = i;
                    vals[fill[j]] = a;
                    fill[j] += 1;
                }
            }
        }
        // Merge duplicate entries within a column.
        let mut e = Engine {
            m,
            n,
            col_start,
            row_idx,
            vals,
            raw_vals: Vec::new(),
            raw_cost: Vec::new(),
            raw_lo: Vec::new(),
            raw_up: Vec::new(),
            row_scale: vec![1.0; m],
            col_scale: vec![1.0; n],
            cost: Vec::new(),
            lo: Vec::new(),
            up: Vec::new(),
            head: Vec::new(),
            status: Vec::new(),
            x: Vec::new(),
            factor: Factor::default(),
            weights: Vec::new(),
        };
        e.merge_duplicates();
        e.raw_vals = e.vals.clone();

        let mut raw_lo = vec![0.0; n + m];
        let mut raw_up = vec![0.0; n + m];
        for (j, v) in model.variables.iter().enumerate() {
            raw_up[j] = v.upper_bound();
        }
        for (i, row) in model.rows.iter().enumerate() {
            let (l, u) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            raw_lo[n + i] = l;
            raw_up[n + i] = u;
        }
        let mut raw_cost = model.objective.clone();
        raw_cost.resize(n + m, 0.0);
        e.raw_cost = raw_cost;
        e.raw_lo = raw_lo;
        e.raw_up = raw_up;
        e.scale();
        e.apply_scaling();
        e
    }

    fn merge_duplicates(&mut self) {
        let mut out_idx = Vec::with_capacity(self.row_idx.len());
        let mut out_val = Vec::with_capacity(self.vals.len());
        let mut starts = vec![0];
        for j in 0..self.n {
            let mut entries: Vec<(usize, f64)> = (self.col_start[j]..self.col_start[j + 1])
                .map(|e| (self.row_idx[e], self.vals[e]))
                .collect();
            entries.sort_by_key(|&(i, _)| i);
            let mut k = 0;
            while k < entries.len() {
                let i = entries[k].0;
                let mut v = 0.0;
                while k < entries.len() && entries[k].0 == i {
                    v += entries[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    out_idx.push(i);
                    out_val.push(v);
                }
            }
            starts.push(out_idx.len());
        }
        self.col_start = starts;
        self.row_idx = out_idx;
        self.vals = out_val;
    }

    /// Geometric-mean scaling to powers of two.
    fn scale(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut r = vec![1.0; m];
        let mut c = vec![1.0; n];
        for _ in 0..6 {
            let mut rmin = vec![f64::INFINITY; m];
            let mut rmax = vec![0.0f64; m];
            for j in 0..n {
                for e in self.col_start[j]..self.col_start[j + 1] {
                    let i = self.row_idx[e];
                    let v = (self.raw_vals[e] * c[j]).abs();
                    rmin[i] = rmin[i].min(v);
                    rmax[i] = rmax[i].max(v);
                }
            }
            for i in 0..m {
                if rmax[i] > 0.0 {
                    r[i] = pow2(1.0 / (rmin[i] * rmax[i]).sqrt());
                }
            }
            for j in 0..n {
                let mut cmin = f64::INFINITY;
                let mut cmax = 0.0f64;
                for e in self.col_start[j]..self.col_start[j + 1] {
                    let v = (self.raw_vals[e] * r[self.row_idx[e]]).abs();
                    cmin = cmin.min(v);
                    cmax = cmax.max(v);
                }
                if cmax > 0.0 {
                    c[j] = pow2(1.0 / (cmin * cmax).sqrt());
                }
            }
        }
        self.row_scale = r;
        self.col_scale = c;
    }

    fn apply_scaling(&mut self) {
        let n = self.n;
        for j in 0..n {
            for e in self.col_start[j]..self.col_start[j + 1] {
                self.vals[e] = self.raw_vals[e] * self.row_scale[self.row_idx[e]] * self.col_scale[j];
            }
        }
        self.cost = self.raw_cost.clone();
        for j in 0..n {
            self.cost[j] *= self.col_scale[j];
        }
        self.lo = vec![0.0; n + self.m];
        self.up = vec![0.0; n + self.m];
        for j in 0..n + self.m {
            self.rescale_bounds(j);
        }
    }

    fn rescale_bounds(&mut self, j: usize) {
        let s = if j < self.n { 1.0 / self.col_scale[j] } else { self.row_scale[j - self.n] };
        self.lo[j] = self.raw_lo[j] * s;
        self.up[j] = self.raw_up[j] * s;
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.raw_lo[j], self.raw_up[j])
    }

    /// Changes the bounds of structural variable `j`.
    pub fn set_bounds(&mut self, j: usize, lo: f64, up: f64) {
        self.raw_lo[j] = lo;
        self.raw_up[j] = up;
        self.rescale_bounds(j);
    }

    fn column(&self, j: usize, out: &mut Vec<(usize, f64)>) {
        if j < self.n {
            for e in self.col_start[j]..self.col_start[j + 1] {
                out.push((self.row_idx[e], self.vals[e]));
            }
        } else {
            out.push((j - self.n, -1.0));
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lo[j],
            VarStatus::AtUpper => self.up[j],
            _ => 0.0,
        }
    }

    /// Picks a consistent nonbasic status given the current bounds.
    fn settle(&self, j: usize, preferred: VarStatus) -> VarStatus {
        let (l, u) = (self.lo[j], self.up[j]);
        match preferred {
            VarStatus::AtUpper if u.is_finite() => VarStatus::AtUpper,
            _ if l.is_finite() => VarStatus::AtLower,
            _ if u.is_finite() => VarStatus::AtUpper,
            _ => VarStatus::Free,
        }
    }

    fn load_basis(&mut self, warm: Option<&Basis>) {
        let total = self.n + self.m;
        match warm {
            Some(b) if b.head.len() == self.m && b.status.len() == total => {
                self.head = b.head.clone();
                self.status = b.status.clone();
                self.weights = if b.weights.len() == self.m { b.weights.clone() } else { vec![1.0; self.m] };
            }
            _ => {
                self.weights = vec![1.0; self.m];
                self.head = (self.n..total).collect();
                self.status = vec![VarStatus::AtLower; total];
                for j in self.n..total {
                    self.status[j] = VarStatus::Basic;
                }
            }
        }
        for j in 0..total {
            if self.status[j] != VarStatus::Basic {
                self.status[j] = self.settle(j, self.status[j]);
            }
        }
        self.x = vec![0.0; total];
        for j in 0..total {
            if self.status[j] != VarStatus::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
    }

    fn refactor(&mut self) {
        let (factor, replaced) = {
            let this = &*self;
            Factor::new(self.m, |pos, out| this.column(this.head[pos], out))
        };
        self.factor = factor;
        for r in replaced {
            let old = self.head[r.position];
            let slack = self.n + r.row;
            let prefer = if self.x[old] > 0.5 * (self.lo[old] + self.up[old]) && self.up[old].is_finite() {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            };
            self.status[old] = self.settle(old, prefer);
            self.x[old] = self.nonbasic_value(old);
            self.head[r.position] = slack;
            self.status[slack] = VarStatus::Basic;
        }
    }

    fn compute_xb(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                for e in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.row_idx[e]] -= self.vals[e] * v;
                }
            }
        }
        for i in 0..self.m {
            let j = self.n + i;
            if self.status[j] != VarStatus::Basic {
                rhs[i] += self.x[j];
            }
        }
        let mut xb = vec![0.0; self.m];
        self.factor.ftran(&mut rhs, &mut xb);
        for (pos, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[pos];
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1]).map(|e| self.vals[e] * y[self.row_idx[e]]).sum()
        } else {
            -y[j - self.n]
        }
    }

    /// Runs the simplex from the current basis.
    fn iterate(&mut self, limit: usize, iterations: &mut usize) -> Step {
        let m = self.m;
        let total = self.n + m;
        let mut cb = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut work = vec![0.0; m];
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut checks = 0;
        let mut blocks: Vec<(usize, f64, f64, f64)> = Vec::new();

        self.refactor();
        self.compute_xb();
        loop {
            if self.factor.eta_count() >= REFACTOR_EVERY {
                self.refactor();
                self.compute_xb();
            }
            let mut phase1 = false;
            for pos in 0..m {
                let j = self.head[pos];
                let v = self.x[j];
                cb[pos] = if v < self.lo[j] - tol(self.lo[j]) {
                    phase1 = true;
                    -1.0
                } else if v > self.up[j] + tol(self.up[j]) {
                    phase1 = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase1 {
                for pos in 0..m {
                    cb[pos] = self.cost[self.head[pos]];
                }
            }
            self.factor.btran(&mut cb, &mut y);

            // Pricing.
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..total {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.cost[j] };
                let d = c - self.dot_column(j, &y);
                let eligible = match st {
                    VarStatus::AtLower => d < -DUAL_TOL,
                    VarStatus::AtUpper => d > DUAL_TOL,
                    _ => d.abs() > DUAL_TOL,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    enter = Some((j, d));
                    break;
                }
                if enter.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    enter = Some((j, d));
                }
            }

            let Some((q, dq)) = enter else {
                // Confirm on a fresh factorization before concluding.
                if self.factor.eta_count() > 0 && checks < 3 {
                    checks += 1;
                    self.refactor();
                    self.compute_xb();
                    continue;
                }
                return if phase1 { Step::Infeasible } else { Step::Optimal };
            };
            if *iterations >= limit {
                return Step::Limit;
            }
            *iterations += 1;

            work.iter_mut().for_each(|v| *v = 0.0);
            let mut col = Vec::new();
            self.column(q, &mut col);
            for (i, v) in col {
                work[i] = v;
            }
            self.factor.ftran(&mut work, &mut alpha);

            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            blocks.clear();
            let mut theta_max = f64::INFINITY;
            for pos in 0..m {
                let a = alpha[pos];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let j = self.head[pos];
                let v = self.x[j];
                let rate = -dir * a;
                let (lo, up) = (self.lo[j], self.up[j]);
                let below = v < lo - tol(lo);
                let above = v > up + tol(up);
                let bound = if rate < 0.0 {
                    if above {
                        up
                    } else if below || !lo.is_finite() {
                        continue;
                    } else {
                        lo
                    }
                } else if below {
                    lo
                } else if above || !up.is_finite() {
                    continue;
                } else {
                    up
                };
                let exact = ((bound - v) / rate).max(0.0);
                let slack = tol(bound) / rate.abs();
                theta_max = theta_max.min(exact + if bland { 0.0 } else { slack });
                blocks.push((pos, exact, bound, a.abs()));
            }
            let mut leave: Option<(usize, f64, f64)> = None;
            if bland {
                for &(pos, ratio, bound, _) in &blocks {
                    let better = match leave {
                        None => true,
                        Some((p, r, _)) => ratio < r - 1e-12 || (ratio <= r + 1e-12 && self.head[pos] < self.head[p]),
                    };
                    if better {
                        leave = Some((pos, ratio, bound));
                    }
                }
            } else {
                let mut best = 0.0;
                for &(pos, ratio, bound, mag) in &blocks {
                    if ratio <= theta_max && mag > best {
                        best = mag;
                        leave = Some((pos, ratio, bound));
                    }
                }
            }

            let range = self.up[q] - self.lo[q];
            let theta = leave.map_or(f64::INFINITY, |l| l.1);
            if range.is_finite() && range <= theta {
                // Bound flip.
                for pos in 0..m {
                    if alpha[pos] != 0.0 {
                        let j = self.head[pos];
                        self.x[j] -= dir * range * alpha[pos];
                    }
                }
                self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[q] = self.nonbasic_value(q);
                degenerate = 0;
                bland = false;
                continue;
            }
            let Some((r, theta, bound)) = leave else {
                if phase1 {
                    // Numerical trouble: rebuild and retry.
                    self.refactor();
                    self.compute_xb();
                    if checks >= 3 {
                        return Step::Infeasible;
                    }
                    checks += 1;
                    continue;
                }
                return Step::Unbounded;
            };

            for pos in 0..m {
                if alpha[pos] != 0.0 {
                    let j = self.head[pos];
                    self.x[j] -= dir * theta * alpha[pos];
                }
            }
            self.x[q] += dir * theta;
            let out = self.head[r];
            self.x[out] = bound;
            self.status[out] = if bound == self.lo[out] { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.head[r] = q;
            self.status[q] = VarStatus::Basic;
            self.factor.update(r, &alpha);

            if theta * dq.abs() <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    /// Shifts nonbasic costs away from zero reduced cost by small
    /// deterministic amounts, which breaks dual degeneracy.
    fn perturb_costs(&mut self) {
        for j in 0..self.n {
            let shift = PERTURBATION * (1.0 + self.cost[j].abs()) * (1.0 + (j as f64 * 0.618_033_988_75).fract());
            match self.status[j] {
                VarStatus::AtLower if self.lo[j] < self.up[j] => self.cost[j] += shift,
                VarStatus::AtUpper if self.lo[j] < self.up[j] => self.cost[j] -= shift,
                _ => {}
            }
        }
    }

    /// Solves from `warm` (or the slack basis) with an iteration budget.
    pub fn solve(&mut self, warm: Option<&Basis>, limit: usize) -> LpResult {
        self.load_basis(warm);
        let mut iterations = 0;
        let cost = self.cost.clone();
        self.perturb_costs();
        let dual = self.dual_iterate(limit, &mut iterations);
        self.cost = cost;
        let step = match dual {
            dual::Outcome::Infeasible => Step::Infeasible,
            dual::Outcome::Limit => Step::Limit,
            // Clean up any remaining dual infeasibility with the primal.
            dual::Outcome::Optimal | dual::Outcome::NotDualFeasible => self.iterate(limit, &mut iterations),
        };
        let status = match step {
            Step::Optimal => LpStatus::Optimal,
            Step::Infeasible => LpStatus::Infeasible,
            Step::Unbounded => LpStatus::Unbounded,
            Step::Limit => LpStatus::IterationLimit,
        };
        let n = self.n;
        let primal: Vec<f64> = (0..n).map(|j| self.x[j] * self.col_scale[j]).collect();

        // Duals from the scaled phase-2 costs, then unscaled.
        let mut cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let mut ys = vec![0.0; self.m];
        self.factor.btran(&mut cb, &mut ys);
        let duals: Vec<f64> = ys.iter().zip(&self.row_scale).map(|(y, r)| y * r).collect();
        let reduced_costs = self.reduced_costs(&duals);
        let objective = primal.iter().zip(&self.raw_cost).map(|(x, c)| x * c).sum();

        let certificate = (status == LpStatus::Optimal).then(|| self.certificate(&primal, &duals, objective));
        let diagnostics = match status {
            LpStatus::IterationLimit => Some(format!(
                "stopped after {iterations} iterations (limit {limit}); factor holds {} nonzeros",
                self.factor.nnz()
            )),
            _ => None,
        };
        LpResult {
            status,
            objective,
            primal,
            duals,
            reduced_costs,
            basis: Basis {
                head: self.head.clone(),
                status: self.status.clone(),
                weights: self.weights.clone(),
            },
            iterations,
            certificate,
            diagnostics,
        }
    }

    /// `c - A^T y` over structurals and slacks (unscaled).
    fn reduced_costs(&self, y: &[f64]) -> Vec<f64> {
        let mut d = self.raw_cost.clone();
        for j in 0..self.n {
            for e in self.col_start[j]..self.col_start[j + 1] {
                d[j] -= self.raw_vals[e] * y[self.row_idx[e]];
            }
        }
        for i in 0..self.m {
            d[self.n + i] = y[i];
        }
        d
    }

    fn certificate(&self, primal: &[f64], duals: &[f64], objective: f64) -> Certificate {
        let n = self.n;
        let mut s = vec![0.0; self.m];
        for j in 0..n {
            for e in self.col_start[j]..self.col_start[j + 1] {
                s[self.row_idx[e]] += self.raw_vals[e] * primal[j];
            }
        }
        let value = |j: usize| if j < n { primal[j] } else { s[j - n] };
        let d = self.reduced_costs(duals);
        let cmax = self.raw_cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let omax = objective.abs().max(1.0);
        let mut cert = Certificate::default();
        for j in 0..n + self.m {
            let (l, u) = (self.raw_lo[j], self.raw_up[j]);
            let x = value(j);
            let p = if x < l { (l - x) / l.abs().max(1.0) } else if x > u { (x - u) / u.abs().max(1.0) } else { 0.0 };
            cert.primal_infeasibility = cert.primal_infeasibility.max(p);
            let dj = d[j];
            if dj > 0.0 {
                if l.is_finite() {
                    cert.complementarity = cert.complementarity.max(dj * (x - l).max(0.0) / omax);
                } else {
                    cert.dual_infeasibility = cert.dual_infeasibility.max(dj / cmax);
                }
            } else if dj < 0.0 {
                if u.is_finite() {
                    cert.complementarity = cert.complementarity.max(-dj * (u - x).max(0.0) / omax);
                } else {
                    cert.dual_infeasibility = cert.dual_infeasibility.max(-dj / cmax);
                }
            }
        }
        cert
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::VarKind;

    fn lp(build: impl FnOnce(&mut LinearModel)) -> LinearModel {
        let mut m = LinearModel::new("t");
        build(&mut m);
        m
    }

    #[test]
    fn two_variable_cover() {
        let m = lp(|m| {
            let x = m.add_var("x", VarKind::Continuous, None, 1.0);
            let y = m.add_var("y", VarKind::Continuous, None, 1.0);
            m.add_row("c", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 1.0);
        });
        let r = Engine::new(&m).solve(None, 1000);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-12);
        assert!(r.certificate.unwrap().holds());
    }

    #[test]
    fn null_objective() {
        let m = lp(|m| {
            m.add_var("x", VarKind::Continuous, None, 0.0);
        });
        let r = Engine::new(&m).solve(None, 1000);
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn unbounded_ray() {
        let m = lp(|m| {
            m.add_var("x", VarKind::Continuous, None, -1.0);
        });
        let r = Engine::new(&m).solve(None, 1000);
        assert_eq!(r.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_rows() {
        let m = lp(|m| {
            let x = m.add_var("x", VarKind::Continuous, Some(1.0), 1.0);
            m.add_row("c", vec![(x, 1.0)], Sense::Ge, 2.0);
        });
        assert_eq!(Engine::new(&m).solve(None, 1000).status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_with_bounds() {
        let m = lp(|m| {
            let a = m.add_var("a", VarKind::Continuous, Some(8.0), 2.0);
            let b = m.add_var("b", VarKind::Continuous, None, 3.0);
            let c = m.add_var("c", VarKind::Continuous, Some(3.0), 1.0);
            m.add_row("sum", vec![(a, 1.0), (b, 1.0), (c, 1.0)], Sense::Eq, 10.0);
            m.add_row("diff", vec![(a, 1.0), (b, -1.0)], Sense::Ge, 2.0);
        });
        let r = Engine::new(&m).solve(None, 1000);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 17.0).abs() < 1e-9);
        assert!((r.primal[0] - 7.0).abs() < 1e-9);
        assert!((r.duals[0] - 2.0).abs() < 1e-9);
        assert!(r.certificate.unwrap().holds());
    }

    #[test]
    fn iteration_limit_reports_diagnostics() {
        let m = lp(|m| {
            let x = m.add_var("x", VarKind::Continuous, None, 1.0);
            let y = m.add_var("y", VarKind::Continuous, None, 1.0);
            m.add_row("c", vec![(x, 1.0), (y, 2.0)], Sense::Ge, 1.0);
            m.add_row("d", vec![(x, 2.0), (y, 1.0)], Sense::Ge, 1.0);
        });
        let r = Engine::new(&m).solve(None, 0);
        assert_eq!(r.status, LpStatus::IterationLimit);
        assert!(r.diagnostics.is_some());
    }

    #[test]
    fn degenerate_transport() {
        // 3x3 assignment relaxation, optimum 1 + 2 + 1 = 4 on the given costs.
        let costs = [[1.0, 4.0, 5.0], [3.0, 2.0, 6.0], [4.0, 3.0, 1.0]];
        let m = lp(|m| {
            let mut v = [[0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    v[i][j] = m.add_var(format!("x{i}{j}"), VarKind::Continuous, None, costs[i][j]);
                }
            }
            for i in 0..3 {
                m.add_row(format!("r{i}"), (0..3).map(|j| (v[i][j], 1.0)).collect(), Sense::Eq, 1.0);
                m.add_row(format!("c{i}"), (0..3).map(|j| (v[j][i], 1.0)).collect(), Sense::Eq, 1.0);
            }
        });
        let r = Engine::new(&m).solve(None, 1000);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 4.0).abs() < 1e-9);
        assert!(r.certificate.unwrap().holds());
    }
}
