//! Integer linear algebra: Smith normal form over Z and solving linear
//! systems over Z/N on exponents.  This is the engine behind the
//! 2-cocycle triviality test and the abelian character decomposition.

use num::bigint::BigInt;
use num::{Integer, One, Signed, Zero};

/// Dense integer matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct IMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<BigInt>,
}

impl IMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IMat {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }
    pub fn identity(n: usize) -> Self {
        let mut m = IMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> BigInt) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        IMat { rows, cols, data }
    }
    pub fn at(&self, r: usize, c: usize) -> &BigInt {
        &self.data[r * self.cols + c]
    }
    pub fn set(&mut self, r: usize, c: usize, v: BigInt) {
        self.data[r * self.cols + c] = v;
    }
    pub fn mul(&self, other: &IMat) -> IMat {
        assert_eq!(self.cols, other.rows);
        let mut out = IMat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.at(r, k).is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.at(r, c) + self.at(r, k) * other.at(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for r in 0..self.rows {
            self.data.swap(r * self.cols + a, r * self.cols + b);
        }
    }
    fn add_row(&mut self, src: usize, dst: usize, k: &BigInt) {
        for c in 0..self.cols {
            let v = self.at(dst, c) + k * self.at(src, c);
            self.set(dst, c, v);
        }
    }
    fn add_col(&mut self, src: usize, dst: usize, k: &BigInt) {
        for r in 0..self.rows {
            let v = self.at(r, dst) + k * self.at(r, src);
            self.set(r, dst, v);
        }
    }
    fn neg_row(&mut self, r: usize) {
        for c in 0..self.cols {
            let v = -self.at(r, c);
            self.set(r, c, v);
        }
    }
}

/// Smith normal form: returns (u, d, v) with u * self * v = d, u and v
/// unimodular, d diagonal with d[i] | d[i+1].
pub struct Snf {
    pub u: IMat,
    pub d: IMat,
    pub v: IMat,
}

pub fn smith_normal_form(a: &IMat) -> Snf {
    let mut d = a.clone();
    let mut u = IMat::identity(a.rows);
    let mut v = IMat::identity(a.cols);
    let n = a.rows.min(a.cols);
    let mut t = 0;
    while t < n {
        // find a nonzero pivot with minimal absolute value in the remaining block
        let mut best: Option<(usize, usize)> = None;
        for r in t..d.rows {
            for c in t..d.cols {
                if !d.at(r, c).is_zero() {
                    match &best {
                        None => best = Some((r, c)),
                        Some((br, bc)) => {
                            if d.at(r, c).abs() < d.at(*br, *bc).abs() {
                                best = Some((r, c));
                            }
                        }
                    }
                }
            }
        }
        let Some((pr, pc)) = best else { break };
        d.swap_rows(t, pr);
        u.swap_rows(t, pr);
        d.swap_cols(t, pc);
        v.swap_cols(t, pc);
        // clear row and column t
        let mut dirty = true;
        while dirty {
            dirty = false;
            for r in t + 1..d.rows {
                if !d.at(r, t).is_zero() {
                    let q = -(d.at(r, t).div_floor(d.at(t, t)));
                    d.add_row(t, r, &q);
                    u.add_row(t, r, &q);
                    if !d.at(r, t).is_zero() {
                        // remainder smaller than pivot; swap up and retry
                        d.swap_rows(t, r);
                        u.swap_rows(t, r);
                        dirty = true;
                    }
                }
            }
            for c in t + 1..d.cols {
                if !d.at(t, c).is_zero() {
                    let q = -(d.at(t, c).div_floor(d.at(t, t)));
                    d.add_col(t, c, &q);
                    v.add_col(t, c, &q);
                    if !d.at(t, c).is_zero() {
                        d.swap_cols(t, c);
                        v.swap_cols(t, c);
                        dirty = true;
                    }
                }
            }
        }
        // divisibility: ensure d[t][t] divides everything below-right
        let mut fixed = true;
        'outer: for r in t + 1..d.rows {
            for c in t + 1..d.cols {
                if !(d.at(r, c) % d.at(t, t)).is_zero() {
                    // add row r to row t and restart this pivot
                    d.add_row(r, t, &BigInt::one());
                    u.add_row(r, t, &BigInt::one());
                    fixed = false;
                    break 'outer;
                }
            }
        }
        if !fixed {
            continue;
        }
        if d.at(t, t).is_negative() {
            d.neg_row(t);
            u.neg_row(t);
        }
        t += 1;
    }
    Snf { u, d, v }
}

/// Solves A x = b (mod n) over Z/n.  Returns a particular solution plus a
/// basis of the homogeneous solution lattice mod n (as vectors), or None.
pub fn solve_mod(a: &IMat, b: &[BigInt], n: u64) -> Option<Vec<BigInt>> {
    // Solve [A | n*I] * (x, y) = b over Z via SNF.
    let rows = a.rows;
    let cols = a.cols + rows;
    let big = IMat::from_fn(rows, cols, |r, c| {
        if c < a.cols {
            a.at(r, c).clone()
        } else if c - a.cols == r {
            BigInt::from(n)
        } else {
            BigInt::zero()
        }
    });
    let snf = smith_normal_form(&big);
    // u * big * v = d; big * (v z) = b  <=>  d z = u b
    let ub: Vec<BigInt> = (0..rows)
        .map(|r| {
            (0..rows)
                .map(|c| snf.u.at(r, c) * &b[c])
                .fold(BigInt::zero(), |acc, x| acc + x)
        })
        .collect();
    let mut z = vec![BigInt::zero(); cols];
    for i in 0..rows.min(cols) {
        let di = snf.d.at(i, i);
        if di.is_zero() {
            if !ub[i].is_zero() {
                return None;
            }
        } else {
            let (q, r) = ub[i].div_rem(di);
            if !r.is_zero() {
                return None;
            }
            z[i] = q;
        }
    }
    for i in cols.min(rows)..rows {
        if !ub[i].is_zero() {
            return None;
        }
    }
    // x = first a.cols entries of v * z, reduced mod n
    let nn = BigInt::from(n);
    let x: Vec<BigInt> = (0..a.cols)
        .map(|r| {
            let s = (0..cols)
                .map(|c| snf.v.at(r, c) * &z[c])
                .fold(BigInt::zero(), |acc, v| acc + v);
            s.mod_floor(&nn)
        })
        .collect();
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn im(rows: usize, cols: usize, v: &[i64]) -> IMat {
        IMat::from_fn(rows, cols, |r, c| BigInt::from(v[r * cols + c]))
    }

    #[test]
    fn snf_diagonalizes() {
        let a = im(2, 2, &[2, 4, 6, 8]);
        let s = smith_normal_form(&a);
        let prod = s.u.mul(&a).mul(&s.v);
        assert_eq!(prod, s.d);
        assert_eq!(s.d.at(0, 0), &BigInt::from(2));
        assert_eq!(s.d.at(1, 1), &BigInt::from(4));
        // divisibility chain
        assert!((s.d.at(1, 1) % s.d.at(0, 0)).is_zero());
    }

    #[test]
    fn snf_rectangular() {
        let a = im(3, 2, &[1, 2, 3, 4, 5, 6]);
        let s = smith_normal_form(&a);
        assert_eq!(s.u.mul(&a).mul(&s.v), s.d);
        assert_eq!(s.d.at(0, 0), &BigInt::from(1));
        assert_eq!(s.d.at(1, 1), &BigInt::from(2));
    }

    #[test]
    fn modular_solve() {
        // x + y = 1, x - y = 1 (mod 4) -> x = 1, y = 0 works
        let a = im(2, 2, &[1, 1, 1, -1]);
        let b = vec![BigInt::from(1), BigInt::from(1)];
        let x = solve_mod(&a, &b, 4).unwrap();
        let check0 = (&x[0] + &x[1]).mod_floor(&BigInt::from(4));
        let check1 = (&x[0] - &x[1]).mod_floor(&BigInt::from(4));
        assert_eq!(check0, BigInt::from(1));
        assert_eq!(check1, BigInt::from(1));
        // 2x = 1 mod 4 unsolvable
        let a = im(1, 1, &[2]);
        assert!(solve_mod(&a, &[BigInt::one()], 4).is_none());
    }
}
