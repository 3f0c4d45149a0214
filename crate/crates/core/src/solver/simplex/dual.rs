//! Dual simplex with dual steepest-edge pricing and a bound-flipping Harris
//! ratio test. Used whenever the starting basis is dual feasible, which covers the
//! slack basis of a nonnegative-cost model and every branch-and-bound
//! child started from its parent's optimal basis.

use super::{tol, Engine, VarStatus, DUAL_TOL, PIVOT_TOL, REFACTOR_EVERY};

pub(super) enum Outcome {
    Optimal,
    Infeasible,
    Limit,
    NotDualFeasible,
}

struct Candidate {
    var: usize,
    ratio: f64,
    relaxed: f64,
    alpha: f64,
}

const WEIGHT_FLOOR: f64 = 1e-6;
const DEGENERATE_RUN: usize = 500;

impl Engine {
    /// Reduced costs `c - A^T y` of every variable for the current basis.
    fn dual_values(&mut self, d: &mut [f64]) {
        let m = self.m;
        let mut cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let mut y = vec![0.0; m];
        self.factor.btran(&mut cb, &mut y);
        for j in 0..self.n + m {
            d[j] = if self.status[j] == VarStatus::Basic { 0.0 } else { self.cost[j] - self.dot_column(j, &y) };
        }
    }

    /// Moves boxed nonbasics to the bound matching their reduced cost.
    /// Fails when some reduced cost has the wrong sign for an unbounded side.
    fn make_dual_feasible(&mut self, d: &[f64]) -> bool {
        let mut moved = false;
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lo[j] == self.up[j] {
                continue;
            }
            let want = if d[j] < -DUAL_TOL {
                VarStatus::AtUpper
            } else if d[j] > DUAL_TOL {
                VarStatus::AtLower
            } else {
                continue;
            };
            if want == st {
                continue;
            }
            let bound = if want == VarStatus::AtUpper { self.up[j] } else { self.lo[j] };
            if !bound.is_finite() {
                return false;
            }
            self.status[j] = want;
            self.x[j] = bound;
            moved = true;
        }
        if moved {
            self.compute_xb();
        }
        true
    }

    pub(super) fn dual_iterate(&mut self, limit: usize, iterations: &mut usize) -> Outcome {
        let m = self.m;
        let total = self.n + m;
        let mut d = vec![0.0; total];
        let mut rho = vec![0.0; m];
        let mut unit = vec![0.0; m];
        let mut row = vec![0.0; total];
        let mut alpha = vec![0.0; m];
        let mut tau = vec![0.0; m];
        let mut work = vec![0.0; m];
        let mut col = Vec::new();
        let mut candidates: Vec<Candidate> = Vec::new();
        let mut degenerate = 0usize;
        let mut retries = 0;

        self.refactor();
        self.compute_xb();
        self.dual_values(&mut d);
        if !self.make_dual_feasible(&d) {
            return Outcome::NotDualFeasible;
        }

        loop {
            if self.factor.eta_count() >= REFACTOR_EVERY {
                self.refactor();
                self.compute_xb();
                self.dual_values(&mut d);
            }

            // Leaving row: largest squared infeasibility per weight; Bland-like
            // lowest variable index during long degenerate runs.
            let bland = degenerate > DEGENERATE_RUN;
            let mut leave: Option<(usize, f64)> = None;
            for pos in 0..m {
                let j = self.head[pos];
                let v = self.x[j];
                let infeas = if v < self.lo[j] - tol(self.lo[j]) {
                    self.lo[j] - v
                } else if v > self.up[j] + tol(self.up[j]) {
                    v - self.up[j]
                } else {
                    continue;
                };
                if bland {
                    if leave.is_none_or(|(q, _)| j < self.head[q]) {
                        leave = Some((pos, 0.0));
                    }
                    continue;
                }
                let score = infeas * infeas / self.weights[pos].max(WEIGHT_FLOOR);
                if leave.is_none_or(|(_, s)| score > s) {
                    leave = Some((pos, score));
                }
            }
            let Some((r, _)) = leave else {
                return Outcome::Optimal;
            };
            if *iterations >= limit {
                return Outcome::Limit;
            }
            *iterations += 1;

            let p = self.head[r];
            let to_lower = self.x[p] < self.lo[p];
            let bound = if to_lower { self.lo[p] } else { self.up[p] };

            unit.iter_mut().for_each(|v| *v = 0.0);
            unit[r] = 1.0;
            self.factor.btran(&mut unit, &mut rho);
            for j in 0..total {
                row[j] = if self.status[j] == VarStatus::Basic { 0.0 } else { self.dot_column(j, &rho) };
            }

            // Ratio test on d_j - t * a_j with a_j = ±row_j.
            let sign = if to_lower { -1.0 } else { 1.0 };
            candidates.clear();
            for j in 0..total {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let a = sign * row[j];
                let eligible = match st {
                    VarStatus::AtLower => a > PIVOT_TOL,
                    VarStatus::AtUpper => a < -PIVOT_TOL,
                    _ => a.abs() > PIVOT_TOL,
                };
                if !eligible {
                    continue;
                }
                let (ratio, relaxed) = match st {
                    VarStatus::AtLower => (d[j] / a, (d[j] + DUAL_TOL) / a),
                    VarStatus::AtUpper => (d[j] / a, (d[j] - DUAL_TOL) / a),
                    _ => (d[j].abs() / a.abs(), (d[j].abs() + DUAL_TOL) / a.abs()),
                };
                candidates.push(Candidate {
                    var: j,
                    ratio: ratio.max(0.0),
                    relaxed: if bland { ratio } else { relaxed },
                    alpha: a,
                });
            }
            if candidates.is_empty() {
                if retries < 2 && self.factor.eta_count() > 0 {
                    retries += 1;
                    self.refactor();
                    self.compute_xb();
                    self.dual_values(&mut d);
                    continue;
                }
                return Outcome::Infeasible;
            }
            candidates.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then(a.var.cmp(&b.var)));

            // Long step: pass boxed breakpoints, flipping them to their other
            // bound, while the leaving row stays infeasible.
            let mut passed = 0;
            if !bland {
                let mut slope = (self.x[p] - bound).abs();
                while passed + 1 < candidates.len() {
                    let c = &candidates[passed];
                    let drop = c.alpha.abs() * (self.up[c.var] - self.lo[c.var]);
                    if !(drop < slope) {
                        break;
                    }
                    slope -= drop;
                    passed += 1;
                }
            }
            let rest = &candidates[passed..];
            let t_max = rest.iter().map(|c| c.relaxed).fold(f64::INFINITY, f64::min).max(0.0);
            let mut enter: Option<&Candidate> = None;
            for c in rest {
                if c.ratio > t_max + if bland { 1e-12 } else { 0.0 } {
                    continue;
                }
                let better = match enter {
                    None => true,
                    Some(e) if bland => c.var < e.var,
                    Some(e) => c.alpha.abs() > e.alpha.abs(),
                };
                if better {
                    enter = Some(c);
                }
            }
            let enter = enter.unwrap_or(&rest[0]);
            let (q, t, aq) = (enter.var, enter.ratio, enter.alpha);

            work.iter_mut().for_each(|v| *v = 0.0);
            col.clear();
            self.column(q, &mut col);
            for &(i, v) in &col {
                work[i] = v;
            }
            self.factor.ftran(&mut work, &mut alpha);
            let arq = alpha[r];
            if (arq - row[q]).abs() > 1e-7 * (1.0 + arq.abs()) || arq.abs() < PIVOT_TOL {
                // Row and column disagree: refresh the factorization.
                if retries < 5 {
                    retries += 1;
                    self.refactor();
                    self.compute_xb();
                    self.dual_values(&mut d);
                    continue;
                }
            }

            if passed > 0 {
                work.iter_mut().for_each(|v| *v = 0.0);
                for c in &candidates[..passed] {
                    let j = c.var;
                    let delta = if self.status[j] == VarStatus::AtLower {
                        self.status[j] = VarStatus::AtUpper;
                        self.up[j] - self.lo[j]
                    } else {
                        self.status[j] = VarStatus::AtLower;
                        self.lo[j] - self.up[j]
                    };
                    self.x[j] += delta;
                    col.clear();
                    self.column(j, &mut col);
                    for &(i, v) in &col {
                        work[i] += v * delta;
                    }
                }
                self.factor.ftran(&mut work, &mut tau);
                for pos in 0..m {
                    if tau[pos] != 0.0 {
                        let j = self.head[pos];
                        self.x[j] -= tau[pos];
                    }
                }
            }

            // Dual update.
            for j in 0..total {
                if self.status[j] != VarStatus::Basic && row[j] != 0.0 {
                    d[j] -= t * sign * row[j];
                }
            }
            d[q] = 0.0;
            d[p] = -t * sign;
            let _ = aq;

            // Steepest-edge weights.
            work.copy_from_slice(&rho);
            self.factor.ftran(&mut work, &mut tau);
            let wr = self.weights[r];
            for i in 0..m {
                if i == r || alpha[i] == 0.0 {
                    continue;
                }
                let k = alpha[i] / arq;
                self.weights[i] = (self.weights[i] - 2.0 * k * tau[i] + k * k * wr).max(WEIGHT_FLOOR);
            }
            self.weights[r] = (wr / (arq * arq)).max(WEIGHT_FLOOR);

            // Primal update.
            let theta = (self.x[p] - bound) / arq;
            for i in 0..m {
                if alpha[i] != 0.0 {
                    let j = self.head[i];
                    self.x[j] -= theta * alpha[i];
                }
            }
            self.x[q] += theta;
            self.x[p] = bound;
            self.status[p] = if to_lower { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.head[r] = q;
            self.status[q] = VarStatus::Basic;
            self.factor.update(r, &alpha);

            if t.abs() <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        }
    }
}
