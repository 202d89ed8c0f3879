//! Dense two-phase simplex over exact rationals, Bland's rule throughout so
//! it cannot cycle. Solves `min c·x` subject to `A x = b`, `x >= 0`.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    obj: Vec<Rational>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.obj.len() - 1
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<Rational>| {
            let f = row[col].clone();
            if !f.is_zero() {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v -= &f * pv;
                    }
                }
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.basis[r] = col;
    }

    /// Runs simplex iterations over the first `allowed` columns. Returns
    /// false when the objective is unbounded below.
    fn run(&mut self, allowed: usize) -> bool {
        let rhs = self.rhs();
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.obj[j].is_negative()) else {
                return true;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[enter].is_positive() {
                    let ratio = &row[rhs] / &row[enter];
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
                Some((r, _)) => self.pivot(r, enter),
                None => return false,
            }
        }
    }
}

pub fn minimize(c: &[Rational], a: &[Vec<Rational>], b: &[Rational]) -> Result<LpOutcome> {
    let n = c.len();
    let m = a.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::Solver(format!("shape mismatch: c has {n} entries, A is {m} rows, b has {}", b.len())));
    }
    let width = n + m + 1;
    let mut rows = Vec::with_capacity(m);
    for (i, (row, bi)) in a.iter().zip(b).enumerate() {
        let flip = bi.is_negative();
        let mut t = vec![Rational::zero(); width];
        for (j, v) in row.iter().enumerate() {
            t[j] = if flip { -v.clone() } else { v.clone() };
        }
        t[n + i] = Rational::from_integer(1.into());
        t[width - 1] = bi.abs();
        rows.push(t);
    }
    // Phase one: minimize the sum of artificials.
    let mut obj = vec![Rational::zero(); width];
    for row in &rows {
        for j in (0..n).chain([width - 1]) {
            obj[j] -= &row[j];
        }
    }
    let mut t = Tableau { rows, obj, basis: (n..n + m).collect() };
    t.run(n + m);
    if !t.obj[width - 1].is_zero() {
        return Ok(LpOutcome::Infeasible);
    }
    // Drive remaining artificials out of the basis; rows with no original
    // column left are redundant.
    let mut keep = vec![true; m];
    for (i, kept) in keep.iter_mut().enumerate() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => *kept = false,
            }
        }
    }
    let mut rows = Vec::new();
    let mut basis = Vec::new();
    for (i, row) in t.rows.into_iter().enumerate() {
        if keep[i] {
            let mut r: Vec<Rational> = row[..n].to_vec();
            r.push(row[width - 1].clone());
            rows.push(r);
            basis.push(t.basis[i]);
        }
    }
    // Phase two.
    let mut obj: Vec<Rational> = c.iter().cloned().chain([Rational::zero()]).collect();
    for (row, &bj) in rows.iter().zip(&basis) {
        let cb = &c[bj];
        if !cb.is_zero() {
            for (o, v) in obj.iter_mut().zip(row) {
                *o -= cb * v;
            }
        }
    }
    let mut t = Tableau { rows, obj, basis };
    if !t.run(n) {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![Rational::zero(); n];
    for (row, &bj) in t.rows.iter().zip(&t.basis) {
        x[bj] = row[n].clone();
    }
    Ok(LpOutcome::Optimal { value: -t.obj[n].clone(), x })
}
