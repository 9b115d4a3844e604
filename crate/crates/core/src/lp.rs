//! A small revised simplex solver for `min cᵀx` subject to sparse linear rows and `x ≥ 0`.
//!
//! The basis inverse is kept dense. Rows can be appended to a solved program;
//! the next call to [`Lp::solve`] then reoptimizes with the dual simplex from
//! the previous basis, which is how cutting-plane loops stay cheap.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("program is infeasible")]
    Infeasible,
    #[error("program is unbounded")]
    Unbounded,
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("basis matrix became singular")]
    Singular,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

/// Optimal primal point and row duals.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

const PIV_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 100;

#[derive(Clone, Debug)]
pub struct Lp {
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    kind: Vec<Kind>,
    rhs: Vec<f64>,
    pending: Vec<(Vec<(usize, f64)>, Cmp, f64)>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    solved: bool,
    since_refactor: usize,
    pivots: usize,
    max_pivots: usize,
}

const NOT_BASIC: usize = usize::MAX;

impl Lp {
    /// A program over `cost.len()` nonnegative variables.
    pub fn new(cost: Vec<f64>) -> Self {
        let n = cost.len();
        Self {
            n_struct: n,
            cols: vec![Vec::new(); n],
            kind: vec![Kind::Structural; n],
            cost,
            rhs: Vec::new(),
            pending: Vec::new(),
            basis: Vec::new(),
            pos: Vec::new(),
            binv: Vec::new(),
            xb: Vec::new(),
            solved: false,
            since_refactor: 0,
            pivots: 0,
            max_pivots: 0,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len() + self.pending.len()
    }

    pub fn num_vars(&self) -> usize {
        self.n_struct
    }

    /// Total pivots performed so far.
    pub fn pivots(&self) -> usize {
        self.pivots
    }

    /// Append `Σ coef·x cmp rhs`. After the first solve only `Le` rows are accepted.
    pub fn add_row(&mut self, coefs: &[(usize, f64)], cmp: Cmp, rhs: f64) -> Result<(), LpError> {
        if let Some((j, _)) = coefs.iter().find(|(j, _)| *j >= self.n_struct) {
            return Err(LpError::Invalid(format!("variable {j} out of range")));
        }
        if !rhs.is_finite() || coefs.iter().any(|(_, a)| !a.is_finite()) {
            return Err(LpError::Invalid("non-finite coefficient".into()));
        }
        if !self.solved {
            self.pending.push((coefs.to_vec(), cmp, rhs));
            return Ok(());
        }
        if cmp != Cmp::Le {
            return Err(LpError::Invalid("only <= rows can be added to a solved program".into()));
        }
        self.append_cut(coefs, rhs);
        Ok(())
    }

    fn push_var(&mut self, col: Vec<(usize, f64)>, kind: Kind) -> usize {
        self.cols.push(col);
        self.cost.push(0.0);
        self.kind.push(kind);
        self.pos.push(NOT_BASIC);
        self.cols.len() - 1
    }

    fn setup(&mut self) {
        let rows = std::mem::take(&mut self.pending);
        let m = rows.len();
        self.pos = vec![NOT_BASIC; self.cols.len()];
        self.basis = Vec::with_capacity(m);
        for (r, (coefs, cmp, rhs)) in rows.into_iter().enumerate() {
            let flip = rhs < 0.0;
            let sgn = if flip { -1.0 } else { 1.0 };
            for (j, a) in coefs {
                if a != 0.0 {
                    self.cols[j].push((r, sgn * a));
                }
            }
            let cmp = match (cmp, flip) {
                (Cmp::Le, true) => Cmp::Ge,
                (Cmp::Ge, true) => Cmp::Le,
                (c, _) => c,
            };
            self.rhs.push(sgn * rhs);
            let b = match cmp {
                Cmp::Le => self.push_var(vec![(r, 1.0)], Kind::Slack),
                Cmp::Ge => {
                    self.push_var(vec![(r, -1.0)], Kind::Slack);
                    self.push_var(vec![(r, 1.0)], Kind::Artificial)
                }
                Cmp::Eq => self.push_var(vec![(r, 1.0)], Kind::Artificial),
            };
            self.pos[b] = r;
            self.basis.push(b);
        }
        self.binv = identity(m);
        self.xb = self.rhs.clone();
        self.max_pivots = 50 * (m + self.cols.len()) + 1000;
    }

    /// Solve (or reoptimize after added rows).
    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        if !self.solved {
            self.setup();
            let real_cost = self.cost.clone();
            if self.kind.contains(&Kind::Artificial) {
                let phase1: Vec<f64> = self.kind.iter().map(|k| if *k == Kind::Artificial { 1.0 } else { 0.0 }).collect();
                self.cost = phase1;
                self.primal(true)?;
                let infeas: f64 = self
                    .basis
                    .iter()
                    .zip(&self.xb)
                    .filter(|(b, _)| self.kind[**b] == Kind::Artificial)
                    .map(|(_, x)| *x)
                    .sum();
                let scale = 1.0 + self.rhs.iter().map(|x| x.abs()).fold(0.0, f64::max);
                if infeas > 1e-9 * scale {
                    self.cost = real_cost;
                    return Err(LpError::Infeasible);
                }
                self.drive_out_artificials();
            }
            self.cost = real_cost;
            self.solved = true;
            self.primal(false)?;
        } else {
            self.dual()?;
            self.primal(false)?;
        }
        Ok(self.solution())
    }

    fn solution(&self) -> LpSolution {
        let mut x = vec![0.0; self.n_struct];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] = self.xb[r].max(0.0);
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        LpSolution { objective, x, pivots: self.pivots }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn enterable(&self, j: usize) -> bool {
        self.pos[j] == NOT_BASIC && self.kind[j] != Kind::Artificial
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m();
        let mut y = vec![0.0; m];
        for k in 0..m {
            let c = self.cost[self.basis[k]];
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                y.iter_mut().zip(row).for_each(|(yi, b)| *yi += c * b);
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|(i, a)| y[*i] * a).sum::<f64>()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m();
        let mut u = vec![0.0; m];
        for &(i, a) in &self.cols[j] {
            for k in 0..m {
                u[k] += self.binv[k * m + i] * a;
            }
        }
        u
    }

    fn pivot(&mut self, r: usize, j: usize, u: &[f64]) -> Result<(), LpError> {
        let m = self.m();
        let theta = self.xb[r] / u[r];
        for k in 0..m {
            if k != r {
                self.xb[k] -= theta * u[k];
            }
        }
        self.xb[r] = theta;
        let piv = u[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        prow.iter_mut().for_each(|x| *x /= piv);
        for (k, row) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
            let kk = if k < r { k } else { k + 1 };
            let f = u[kk];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(x, p)| *x -= f * p);
            }
        }
        let old = self.basis[r];
        self.pos[old] = NOT_BASIC;
        self.basis[r] = j;
        self.pos[j] = r;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        if self.pivots > self.max_pivots {
            return Err(LpError::IterationLimit(self.max_pivots));
        }
        Ok(())
    }

    /// Recompute the basis inverse and basic values from scratch.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m();
        let mut a = vec![0.0; m * m];
        for (k, &b) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[b] {
                a[i * m + k] = v;
            }
        }
        let mut inv = identity(m);
        for c in 0..m {
            let p = (c..m)
                .max_by(|x, y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()))
                .ok_or(LpError::Singular)?;
            if a[p * m + c].abs() < 1e-13 {
                return Err(LpError::Singular);
            }
            if p != c {
                for t in 0..m {
                    a.swap(p * m + t, c * m + t);
                    inv.swap(p * m + t, c * m + t);
                }
            }
            let d = a[c * m + c];
            for t in 0..m {
                a[c * m + t] /= d;
                inv[c * m + t] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for t in 0..m {
                            a[r * m + t] -= f * a[c * m + t];
                            inv[r * m + t] -= f * inv[c * m + t];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for k in 0..m {
            self.xb[k] = (0..m).map(|i| self.binv[k * m + i] * self.rhs[i]).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn primal(&mut self, phase1: bool) -> Result<(), LpError> {
        let mut degenerate_run = 0usize;
        loop {
            let y = self.duals();
            let bland = degenerate_run > 50;
            let mut enter = None;
            let mut best = -OPT_TOL;
            for j in 0..self.cols.len() {
                if !self.enterable(j) {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(j) = enter else { return Ok(()) };
            let u = self.ftran(j);
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for k in 0..self.m() {
                if u[k] > PIV_TOL {
                    let ratio = self.xb[k].max(0.0) / u[k];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if ratio < best_ratio - 1e-12 {
                                true
                            } else if ratio <= best_ratio + 1e-12 {
                                if bland {
                                    self.basis[k] < self.basis[l]
                                } else {
                                    u[k] > u[l]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(k);
                        best_ratio = best_ratio.min(ratio);
                    }
                }
            }
            let Some(r) = leave else {
                return Err(if phase1 { LpError::Singular } else { LpError::Unbounded });
            };
            if best_ratio < 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.xb[r] = self.xb[r].max(0.0);
            self.pivot(r, j, &u)?;
        }
    }

    fn dual(&mut self) -> Result<(), LpError> {
        loop {
            let m = self.m();
            let mut r = None;
            let mut worst = -FEAS_TOL;
            for k in 0..m {
                if self.xb[k] < worst {
                    worst = self.xb[k];
                    r = Some(k);
                }
            }
            let Some(r) = r else { return Ok(()) };
            let y = self.duals();
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            let mut enter = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_alpha = 0.0;
            for j in 0..self.cols.len() {
                if !self.enterable(j) {
                    continue;
                }
                let alpha: f64 = self.cols[j].iter().map(|(i, a)| rho[*i] * a).sum();
                if alpha < -PIV_TOL {
                    let ratio = self.reduced_cost(j, &y).max(0.0) / -alpha;
                    if ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && -alpha > best_alpha) {
                        best_ratio = best_ratio.min(ratio);
                        best_alpha = -alpha;
                        enter = Some(j);
                    }
                }
            }
            let Some(j) = enter else { return Err(LpError::Infeasible) };
            let u = self.ftran(j);
            self.pivot(r, j, &u)?;
        }
    }

    fn drive_out_artificials(&mut self) {
        for r in 0..self.m() {
            if self.kind[self.basis[r]] != Kind::Artificial {
                continue;
            }
            let m = self.m();
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.cols.len() {
                if !self.enterable(j) {
                    continue;
                }
                let alpha: f64 = self.cols[j].iter().map(|(i, a)| rho[*i] * a).sum();
                if alpha.abs() > 1e-7 && best.is_none_or(|(_, b)| alpha.abs() > b) {
                    best = Some((j, alpha.abs()));
                }
            }
            if let Some((j, _)) = best {
                let u = self.ftran(j);
                self.xb[r] = 0.0;
                // degenerate pivot; a refactor failure leaves the artificial in place
                let _ = self.pivot(r, j, &u);
            }
        }
    }

    fn append_cut(&mut self, coefs: &[(usize, f64)], rhs: f64) {
        let m = self.m();
        let r = m;
        let mut rb = vec![0.0; m];
        for &(j, a) in coefs {
            if a != 0.0 {
                self.cols[j].push((r, a));
                if self.pos[j] != NOT_BASIC {
                    rb[self.pos[j]] += a;
                }
            }
        }
        self.rhs.push(rhs);
        let s = self.push_var(vec![(r, 1.0)], Kind::Slack);
        // [[B⁻¹, 0], [−r_B B⁻¹, 1]]
        let mut binv = vec![0.0; (m + 1) * (m + 1)];
        for k in 0..m {
            binv[k * (m + 1)..k * (m + 1) + m].copy_from_slice(&self.binv[k * m..(k + 1) * m]);
        }
        for k in 0..m {
            if rb[k] != 0.0 {
                for i in 0..m {
                    binv[m * (m + 1) + i] -= rb[k] * self.binv[k * m + i];
                }
            }
        }
        binv[m * (m + 1) + m] = 1.0;
        self.binv = binv;
        let val = rhs - rb.iter().zip(&self.xb).map(|(a, x)| a * x).sum::<f64>();
        self.xb.push(val);
        self.basis.push(s);
        self.pos[s] = r;
        self.max_pivots += 50 * (m + 1) + 1000;
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        a[i * m + i] = 1.0;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Vertex enumeration on the standard form with one slack per inequality.
    fn brute(cost: &[f64], rows: &[(Vec<f64>, Cmp, f64)]) -> Option<f64> {
        let n = cost.len();
        let m = rows.len();
        let mut a = vec![vec![0.0; n + m]; m];
        let mut c = cost.to_vec();
        c.extend(vec![0.0; m]);
        let mut b = vec![0.0; m];
        for (r, (coefs, cmp, rhs)) in rows.iter().enumerate() {
            a[r][..n].copy_from_slice(coefs);
            a[r][n + r] = match cmp {
                Cmp::Le => 1.0,
                Cmp::Ge => -1.0,
                Cmp::Eq => 0.0,
            };
            b[r] = *rhs;
        }
        let total = n + m;
        let mut best: Option<f64> = None;
        for mask in 0u32..1 << total {
            if mask.count_ones() as usize != m {
                continue;
            }
            let idx: Vec<usize> = (0..total).filter(|j| mask >> j & 1 == 1).collect();
            let mut mat: Vec<Vec<f64>> = (0..m).map(|r| idx.iter().map(|&j| a[r][j]).chain([b[r]]).collect()).collect();
            let mut ok = true;
            for col in 0..m {
                let p = (col..m).max_by(|x, y| mat[*x][col].abs().total_cmp(&mat[*y][col].abs())).unwrap();
                if mat[p][col].abs() < 1e-10 {
                    ok = false;
                    break;
                }
                mat.swap(p, col);
                let d = mat[col][col];
                mat[col].iter_mut().for_each(|x| *x /= d);
                for r in 0..m {
                    if r != col {
                        let f = mat[r][col];
                        let pr = mat[col].clone();
                        mat[r].iter_mut().zip(pr).for_each(|(x, y)| *x -= f * y);
                    }
                }
            }
            if !ok {
                continue;
            }
            let xs: Vec<f64> = (0..m).map(|r| mat[r][m]).collect();
            if xs.iter().any(|x| *x < -1e-9) {
                continue;
            }
            let v: f64 = idx.iter().zip(&xs).map(|(j, x)| c[*j] * x).sum();
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
        best
    }

    fn dense(row: &[f64]) -> Vec<(usize, f64)> {
        row.iter().copied().enumerate().filter(|(_, a)| *a != 0.0).collect()
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
        let mut lp = Lp::new(vec![-3.0, -5.0]);
        lp.add_row(&[(0, 1.0)], Cmp::Le, 4.0).unwrap();
        lp.add_row(&[(1, 2.0)], Cmp::Le, 12.0).unwrap();
        lp.add_row(&[(0, 3.0), (1, 2.0)], Cmp::Le, 18.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective + 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = Lp::new(vec![1.0]);
        lp.add_row(&[(0, 1.0)], Cmp::Ge, 2.0).unwrap();
        lp.add_row(&[(0, 1.0)], Cmp::Le, 1.0).unwrap();
        assert_eq!(lp.solve().unwrap_err(), LpError::Infeasible);

        let mut lp = Lp::new(vec![-1.0, 0.0]);
        lp.add_row(&[(0, 1.0), (1, -1.0)], Cmp::Le, 1.0).unwrap();
        assert_eq!(lp.solve().unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn transport_problem() {
        // supplies (0.5, 0.5), demands (0.3, 0.7), cost |i - j|
        let mut lp = Lp::new(vec![0.0, 1.0, 1.0, 0.0]);
        lp.add_row(&[(0, 1.0), (1, 1.0)], Cmp::Eq, 0.5).unwrap();
        lp.add_row(&[(2, 1.0), (3, 1.0)], Cmp::Eq, 0.5).unwrap();
        lp.add_row(&[(0, 1.0), (2, 1.0)], Cmp::Eq, 0.3).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective - 0.2).abs() < 1e-12);
    }

    #[test]
    fn random_programs_match_vertex_enumeration() {
        let mut g = crate::rng::stream(11, 0);
        for case in 0..150 {
            let n = 2 + case % 3;
            let m = 1 + case % 4;
            let cost: Vec<f64> = (0..n).map(|_| g.random_range(-1.0..1.0)).collect();
            let mut rows: Vec<(Vec<f64>, Cmp, f64)> = Vec::new();
            for r in 0..m {
                let coefs: Vec<f64> = (0..n).map(|_| g.random_range(-1.0..2.0)).collect();
                let cmp = [Cmp::Le, Cmp::Ge, Cmp::Eq][(r + case) % 3];
                rows.push((coefs, cmp, g.random_range(-1.0..2.0)));
            }
            // a box keeps every feasible program bounded
            rows.push((vec![1.0; n], Cmp::Le, 5.0));
            let mut lp = Lp::new(cost.clone());
            for (c, cmp, b) in &rows {
                lp.add_row(&dense(c), *cmp, *b).unwrap();
            }
            match (lp.solve(), brute(&cost, &rows)) {
                (Ok(s), Some(v)) => assert!((s.objective - v).abs() < 1e-8, "case {case}: {} vs {v}", s.objective),
                (Err(LpError::Infeasible), None) => {}
                (got, want) => panic!("case {case}: {got:?} vs {want:?}"),
            }
        }
    }

    #[test]
    fn added_cuts_match_fresh_solve() {
        let mut g = crate::rng::stream(12, 0);
        for case in 0..60 {
            let n = 3 + case % 3;
            let cost: Vec<f64> = (0..n).map(|_| g.random_range(-1.0..1.0)).collect();
            let base = vec![(vec![1.0; n], Cmp::Eq, 1.0)];
            let cuts: Vec<(Vec<f64>, Cmp, f64)> = (0..3)
                .map(|_| ((0..n).map(|_| g.random_range(-1.0..1.0)).collect(), Cmp::Le, g.random_range(-0.3..0.5)))
                .collect();
            let mut warm = Lp::new(cost.clone());
            for (c, cmp, b) in &base {
                warm.add_row(&dense(c), *cmp, *b).unwrap();
            }
            warm.solve().unwrap();
            let mut all = base.clone();
            let mut warm_result = Ok(0.0);
            for cut in &cuts {
                warm.add_row(&dense(&cut.0), Cmp::Le, cut.2).unwrap();
                all.push(cut.clone());
                warm_result = warm.solve().map(|s| s.objective);
                if warm_result.is_err() {
                    break;
                }
            }
            match (warm_result, brute(&cost, &all)) {
                (Ok(v), Some(w)) => assert!((v - w).abs() < 1e-8, "case {case}: {v} vs {w}"),
                (Err(LpError::Infeasible), None) => {}
                (got, want) => panic!("case {case}: {got:?} vs {want:?}"),
            }
        }
    }
}
