//! A small dense simplex solver over exact rationals.
//!
//! Only the form needed by the loss-function algebra is supported:
//! maximize `c·x` subject to `A x <= b`, `x >= 0`, with `b >= 0`, so the
//! all-slack basis is feasible and no phase one is required. Bland's rule
//! guarantees termination on degenerate problems.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub value: BigRational,
    /// Optimal values of the structural variables.
    pub primal: Vec<BigRational>,
    /// Optimal multipliers of the constraints.
    pub dual: Vec<BigRational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Unbounded,
}

pub fn maximize(a: &[Vec<BigRational>], b: &[BigRational], c: &[BigRational]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m, "one bound per constraint");
    assert!(a.iter().all(|row| row.len() == n), "constraint rows must match objective");
    assert!(b.iter().all(|x| !x.is_negative()), "bounds must be nonnegative");

    let width = n + m;
    let mut rows: Vec<Vec<BigRational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = Vec::with_capacity(width);
            r.extend(row.iter().cloned());
            r.extend((0..m).map(|k| if k == i { BigRational::from_integer(1.into()) } else { BigRational::zero() }));
            r
        })
        .collect();
    let mut rhs: Vec<BigRational> = b.to_vec();
    let mut obj: Vec<BigRational> = c.iter().map(|x| -x).chain((0..m).map(|_| BigRational::zero())).collect();
    let mut value = BigRational::zero();
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        let Some(enter) = obj.iter().position(|x| x.is_negative()) else { break };
        let mut leave: Option<usize> = None;
        let mut best: Option<BigRational> = None;
        for i in 0..m {
            let coef = &rows[i][enter];
            if coef.is_positive() {
                let ratio = &rhs[i] / coef;
                let better = match &best {
                    None => true,
                    Some(b) => ratio < *b || (ratio == *b && basis[i] < basis[leave.unwrap()]),
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else { return LpOutcome::Unbounded };
        pivot(&mut rows, &mut rhs, &mut obj, &mut value, r, enter);
        basis[r] = enter;
    }

    let mut primal = vec![BigRational::zero(); n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            primal[j] = rhs[i].clone();
        }
    }
    let dual = obj[n..].to_vec();
    LpOutcome::Optimal(LpSolution { value, primal, dual })
}

fn pivot(
    rows: &mut [Vec<BigRational>],
    rhs: &mut [BigRational],
    obj: &mut [BigRational],
    value: &mut BigRational,
    r: usize,
    col: usize,
) {
    let p = rows[r][col].clone();
    for x in rows[r].iter_mut() {
        if !x.is_zero() {
            *x = &*x / &p;
        }
    }
    rhs[r] = &rhs[r] / &p;
    let nz: Vec<usize> = rows[r].iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(j, _)| j).collect();
    let prow = rows[r].clone();
    let prhs = rhs[r].clone();
    for (i, row) in rows.iter_mut().enumerate() {
        if i == r || row[col].is_zero() {
            continue;
        }
        let f = row[col].clone();
        for &j in &nz {
            row[j] = &row[j] - &f * &prow[j];
        }
        rhs[i] = &rhs[i] - &f * &prhs;
    }
    if !obj[col].is_zero() {
        let f = obj[col].clone();
        for &j in &nz {
            obj[j] = &obj[j] - &f * &prow[j];
        }
        *value = &*value - &f * &prhs;
    }
}

/// The same simplex in floating point, for screening only: the caller must
/// confirm anything it concludes from the result in exact arithmetic.
/// Returns the optimal value and primal, or `None` if the iteration budget
/// runs out or the problem looks unbounded.
pub fn maximize_approx(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    const EPS: f64 = 1e-10;
    const PIVOT: f64 = 1e-9;
    let m = a.len();
    let n = c.len();
    let width = n + m;
    let mut rows: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut rhs = b.to_vec();
    let mut obj: Vec<f64> = c.iter().map(|x| -x).chain(std::iter::repeat_n(0.0, m)).collect();
    let mut value = 0.0;
    let mut basis: Vec<usize> = (n..n + m).collect();
    for _ in 0..50 * (width + 1) {
        let Some(enter) = obj.iter().position(|&x| x < -EPS) else {
            let mut primal = vec![0.0; n];
            for (i, &j) in basis.iter().enumerate() {
                if j < n {
                    primal[j] = rhs[i];
                }
            }
            return Some((value, primal));
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = rows[i][enter];
            if coef > PIVOT {
                let ratio = rhs[i] / coef;
                let better = match leave {
                    None => true,
                    Some((l, best)) => ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, _) = leave?;
        let p = rows[r][enter];
        rows[r].iter_mut().for_each(|x| *x /= p);
        rhs[r] /= p;
        let prow = rows[r].clone();
        let prhs = rhs[r];
        for (i, row) in rows.iter_mut().enumerate() {
            let f = row[enter];
            if i == r || f == 0.0 {
                continue;
            }
            row.iter_mut().zip(&prow).for_each(|(x, y)| *x -= f * y);
            rhs[i] -= f * prhs;
        }
        let f = obj[enter];
        obj.iter_mut().zip(&prow).for_each(|(x, y)| *x -= f * y);
        value -= f * prhs;
        basis[r] = enter;
    }
    None
}
