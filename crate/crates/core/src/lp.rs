//! Exact two-phase simplex over the rationals with Bland's rule.
//!
//! Variables are nonnegative; the objective is minimized.

use crate::rational::Rational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub terms: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, Rational)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            ..Default::default()
        }
    }

    pub fn add(&mut self, terms: Vec<(usize, Rational)>, relation: Relation, rhs: Rational) {
        debug_assert!(terms.iter().all(|(j, _)| *j < self.num_vars));
        self.constraints.push(Constraint { terms, relation, rhs });
    }

    pub fn minimize(&mut self, objective: Vec<(usize, Rational)>) {
        self.objective = objective;
    }

    /// Checks a point against every constraint exactly.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars
            && x.iter().all(|v| !v.is_negative())
            && self.constraints.iter().all(|c| {
                let lhs = c.terms.iter().fold(Rational::zero(), |acc, (j, a)| acc + a * &x[*j]);
                match c.relation {
                    Relation::Le => lhs <= c.rhs,
                    Relation::Eq => lhs == c.rhs,
                    Relation::Ge => lhs >= c.rhs,
                }
            })
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        self.objective.iter().fold(Rational::zero(), |acc, (j, a)| acc + a * &x[*j])
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    cols: usize,
    first_artificial: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let slacks = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let first_artificial = lp.num_vars + slacks;
        let cols = first_artificial + m;
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut slack = lp.num_vars;
        for (i, c) in lp.constraints.iter().enumerate() {
            let mut row = vec![Rational::zero(); cols];
            for (j, a) in &c.terms {
                row[*j] += a;
            }
            match c.relation {
                Relation::Le => {
                    row[slack] = Rational::one();
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -Rational::one();
                    slack += 1;
                }
                Relation::Eq => {}
            }
            let mut b = c.rhs.clone();
            if b.is_negative() {
                row.iter_mut().for_each(|v| *v = -v.clone());
                b = -b;
            }
            row[first_artificial + i] = Rational::one();
            basis.push(first_artificial + i);
            rows.push(row);
            rhs.push(b);
        }
        Tableau {
            rows,
            rhs,
            basis,
            cols,
            first_artificial,
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        if !p.is_one() {
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v /= &p;
                }
            }
            self.rhs[r] /= &p;
        }
        let prow = self.rows[r].clone();
        let prhs = self.rhs[r].clone();
        let nz: Vec<usize> = (0..self.cols).filter(|&j| !prow[j].is_zero()).collect();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for &j in &nz {
                let delta = &f * &prow[j];
                self.rows[i][j] -= delta;
            }
            self.rhs[i] -= &f * &prhs;
        }
        self.basis[r] = c;
    }

    /// Reduced costs of `cost` for the current basis.
    fn reduced(&self, cost: &[Rational], allowed: usize) -> Vec<Rational> {
        let mut d: Vec<Rational> = cost[..allowed].to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for j in 0..allowed {
                if !self.rows[i][j].is_zero() {
                    d[j] -= cb * &self.rows[i][j];
                }
            }
        }
        d
    }

    /// Bland-rule simplex on columns `< allowed`; `false` when unbounded.
    fn optimize(&mut self, cost: &[Rational], allowed: usize) -> bool {
        loop {
            let d = self.reduced(cost, allowed);
            let Some(enter) = (0..allowed).find(|&j| d[j].is_negative()) else {
                return true;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][enter];
                if a.is_positive() {
                    let ratio = &self.rhs[i] / a;
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                None => return false,
                Some((r, _)) => self.pivot(r, enter),
            }
        }
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        let mut phase1 = vec![Rational::zero(); self.cols];
        for v in phase1[self.first_artificial..].iter_mut() {
            *v = Rational::one();
        }
        self.optimize(&phase1, self.cols);
        let infeasibility = self
            .basis
            .iter()
            .zip(&self.rhs)
            .filter(|(b, _)| **b >= self.first_artificial)
            .fold(Rational::zero(), |acc, (_, v)| acc + v);
        if infeasibility.is_positive() {
            return LpOutcome::Infeasible;
        }
        // Drive zero-valued artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= self.first_artificial {
                match (0..self.first_artificial).find(|&j| !self.rows[i][j].is_zero()) {
                    Some(j) => {
                        self.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        self.rows.remove(i);
                        self.rhs.remove(i);
                        self.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        let mut cost = vec![Rational::zero(); self.cols];
        for (j, a) in &lp.objective {
            cost[*j] += a;
        }
        if !self.optimize(&cost, self.first_artificial) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![Rational::zero(); lp.num_vars];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < lp.num_vars {
                x[b] = self.rhs[i].clone();
            }
        }
        let value = lp.objective_value(&x);
        LpOutcome::Optimal { x, value }
    }
}
