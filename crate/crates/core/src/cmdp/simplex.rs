//! Dense two-phase primal simplex over a generic ordered field.
//!
//! `f64` is the working type; `BigRational` gives exact answers for small
//! oracle problems. Pivoting uses the most negative reduced cost and falls
//! back to Bland's smallest-index rule after a run of degenerate pivots, so
//! the method cannot cycle and is deterministic for a given input.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Magnitudes at or below this count as zero.
    fn tolerance() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;

    fn is_pos(&self) -> bool {
        *self > Self::tolerance()
    }
    fn is_neg(&self) -> bool {
        *self < -Self::tolerance()
    }
    fn is_zero_tol(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn tolerance() -> Self {
        1e-11
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn tolerance() -> Self {
        Zero::zero()
    }
    /// Exact binary value of `v`.
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite coefficient")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
}

/// Exact rational from a ratio of integers.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from_i64(num).unwrap(), BigInt::from_i64(den).unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub sense: Sense,
    pub rhs: T,
}

/// `minimize c x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
}

/// Multipliers `y` (one per constraint) proving infeasibility: for every
/// variable `sum_i y_i a_ij <= 0`, `y_i <= 0` on `<=` rows, `y_i >= 0` on
/// `>=` rows, and `sum_i y_i b_i > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate<T> {
    pub multipliers: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<T> {
    Optimal { x: Vec<T>, objective: T },
    Infeasible(FarkasCertificate<T>),
    Unbounded,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    /// Largest violation of any constraint or sign bound at `x`.
    pub fn violation(&self, x: &[T]) -> f64 {
        let mut worst = x.iter().map(|v| (-v.to_f64()).max(0.0)).fold(0.0, f64::max);
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a.to_f64() * v.to_f64()).sum();
            let r = c.rhs.to_f64();
            let v = match c.sense {
                Sense::Le => lhs - r,
                Sense::Ge => r - lhs,
                Sense::Eq => (lhs - r).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Checks a certificate against this program exactly (in `T`).
    pub fn certifies_infeasible(&self, cert: &FarkasCertificate<T>) -> bool {
        if cert.multipliers.len() != self.constraints.len() {
            return false;
        }
        let signs_ok = self.constraints.iter().zip(&cert.multipliers).all(|(c, y)| match c.sense {
            Sense::Le => !y.is_pos(),
            Sense::Ge => !y.is_neg(),
            Sense::Eq => true,
        });
        let cols_ok = (0..self.variables()).all(|j| {
            let s = self
                .constraints
                .iter()
                .zip(&cert.multipliers)
                .fold(T::zero(), |acc, (c, y)| acc + c.coeffs[j].clone() * y.clone());
            !s.is_pos()
        });
        let rhs = self
            .constraints
            .iter()
            .zip(&cert.multipliers)
            .fold(T::zero(), |acc, (c, y)| acc + c.rhs.clone() * y.clone());
        signs_ok && cols_ok && rhs.is_pos()
    }
}

const DEGENERATE_RUN: usize = 50;

struct Tableau<T> {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<T>>,
    basis: Vec<usize>,
    cols: usize,
}

impl<T: Scalar> Tableau<T> {
    fn rhs(&self, i: usize) -> &T {
        &self.a[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c].clone();
        for v in self.a[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c].clone();
            if f == T::zero() {
                continue;
            }
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                if *pr != T::zero() {
                    *v = v.clone() - f.clone() * pr.clone();
                }
            }
            row[c] = T::zero();
        }
        self.basis[r] = c;
    }

    /// Reduced costs of `cost` for the current basis.
    fn reduced(&self, cost: &[T]) -> Vec<T> {
        let mut d: Vec<T> = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b].clone();
            if cb == T::zero() {
                continue;
            }
            for (j, dj) in d.iter_mut().enumerate() {
                let v = &self.a[i][j];
                if *v != T::zero() {
                    *dj = dj.clone() - cb.clone() * v.clone();
                }
            }
        }
        d
    }

    /// Runs primal simplex on `cost` over columns allowed by `allowed`.
    /// Returns `false` when unbounded.
    fn optimize(&mut self, cost: &[T], allowed: &dyn Fn(usize) -> bool) -> bool {
        let mut d = self.reduced(cost);
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            for j in 0..self.cols {
                if !allowed(j) || !d[j].is_neg() {
                    continue;
                }
                match enter {
                    None => enter = Some(j),
                    Some(e) if !bland && d[j] < d[e] => enter = Some(j),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some(c) = enter else {
                return true;
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.a.len() {
                let aic = &self.a[i][c];
                if !aic.is_pos() {
                    continue;
                }
                let ratio = self.rhs(i).clone() / aic.clone();
                let better = match &leave {
                    None => true,
                    Some((l, best)) => {
                        ratio < *best || (!(ratio > *best) && self.basis[i] < self.basis[*l])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((r, step)) = leave else {
                return false;
            };
            if step.is_zero_tol() {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            // keep reduced costs in step with the tableau
            let f = d[c].clone();
            self.pivot(r, c);
            for (j, dj) in d.iter_mut().enumerate() {
                let v = &self.a[r][j];
                if *v != T::zero() {
                    *dj = dj.clone() - f.clone() * v.clone();
                }
            }
            d[c] = T::zero();
        }
    }
}

/// Solves `lp` by the two-phase method.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Outcome<T> {
    let n = lp.variables();
    let m = lp.constraints.len();
    // normalise to nonnegative right-hand sides
    let mut flip = vec![false; m];
    let mut senses = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        assert_eq!(c.coeffs.len(), n, "constraint {i} has the wrong width");
        flip[i] = c.rhs.is_neg();
        senses.push(match (c.sense, flip[i]) {
            (s, false) => s,
            (Sense::Le, true) => Sense::Ge,
            (Sense::Ge, true) => Sense::Le,
            (Sense::Eq, true) => Sense::Eq,
        });
    }
    let slack_count = senses.iter().filter(|s| **s != Sense::Eq).count();
    let art_count = senses.iter().filter(|s| **s != Sense::Le).count();
    let cols = n + slack_count + art_count;
    let mut a = vec![vec![T::zero(); cols + 1]; m];
    let mut basis = vec![0; m];
    // column that started as row i's basic variable, with its sign
    let mut start_col = vec![0; m];
    let (mut next_slack, mut next_art) = (n, n + slack_count);
    for (i, c) in lp.constraints.iter().enumerate() {
        let sign = if flip[i] { -T::one() } else { T::one() };
        for j in 0..n {
            a[i][j] = c.coeffs[j].clone() * sign.clone();
        }
        a[i][cols] = c.rhs.clone() * sign;
        match senses[i] {
            Sense::Le => {
                a[i][next_slack] = T::one();
                basis[i] = next_slack;
                start_col[i] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                a[i][next_slack] = -T::one();
                next_slack += 1;
                a[i][next_art] = T::one();
                basis[i] = next_art;
                start_col[i] = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                a[i][next_art] = T::one();
                basis[i] = next_art;
                start_col[i] = next_art;
                next_art += 1;
            }
        }
    }
    let art_start = n + slack_count;
    let mut t = Tableau { a, basis, cols };

    if art_count > 0 {
        let mut phase1 = vec![T::zero(); cols];
        for c in phase1.iter_mut().skip(art_start) {
            *c = T::one();
        }
        t.optimize(&phase1, &|_| true);
        let infeas = t
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .fold(T::zero(), |acc, (i, _)| acc + t.rhs(i).clone());
        if infeas.is_pos() {
            // y^T = c_B B^-1; B^-1 sits in the starting basic columns
            let multipliers = (0..m)
                .map(|k| {
                    let col = start_col[k];
                    let yk = (0..m).fold(T::zero(), |acc, i| {
                        let cb = if t.basis[i] >= art_start { T::one() } else { T::zero() };
                        acc + cb * t.a[i][col].clone()
                    });
                    if flip[k] { -yk } else { yk }
                })
                .collect();
            return Outcome::Infeasible(FarkasCertificate { multipliers });
        }
        // drive artificial variables out of the basis; drop redundant rows
        let mut i = 0;
        while i < t.a.len() {
            if t.basis[i] < art_start {
                i += 1;
                continue;
            }
            match (0..art_start).find(|&j| !t.a[i][j].is_zero_tol()) {
                Some(j) => {
                    t.pivot(i, j);
                    i += 1;
                }
                None => {
                    t.a.remove(i);
                    t.basis.remove(i);
                }
            }
        }
    }

    let mut phase2 = vec![T::zero(); cols];
    for (c, o) in phase2.iter_mut().zip(&lp.objective) {
        *c = o.clone();
    }
    if !t.optimize(&phase2, &|j| j < art_start) {
        return Outcome::Unbounded;
    }
    let mut x = vec![T::zero(); n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs(i).clone();
        }
    }
    let objective = x
        .iter()
        .zip(&lp.objective)
        .fold(T::zero(), |acc, (v, c)| acc + v.clone() * c.clone());
    Outcome::Optimal { x, objective }
}
