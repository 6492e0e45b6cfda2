//! Dense matrices over the cyclotomic field, with the exact kernel /
//! image / solve routines the sheaf calculus is built on.

use crate::cyclofield::{Field, Scalar};

/// Row-major dense matrix over Q(zeta_N).  Zero-sized shapes are legal and
/// common (empty fibers).
#[derive(Clone)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    ctx: Field,
    data: Vec<Scalar>,
}

impl PartialEq for Mat {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.data == other.data
    }
}
impl Eq for Mat {}

impl std::fmt::Debug for Mat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.at(r, c).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn ctx(&self) -> &Field {
        &self.ctx
    }

    pub fn zeros(ctx: &Field, rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            ctx: ctx.clone(),
            data: vec![Scalar::zero(ctx); rows * cols],
        }
    }

    pub fn identity(ctx: &Field, n: usize) -> Self {
        let mut m = Mat::zeros(ctx, n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one(ctx));
        }
        m
    }

    pub fn from_fn(ctx: &Field, rows: usize, cols: usize, f: impl Fn(usize, usize) -> Scalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat {
            rows,
            cols,
            ctx: ctx.clone(),
            data,
        }
    }

    pub fn from_rows(ctx: &Field, rows: Vec<Vec<Scalar>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c));
        Mat {
            rows: r,
            cols: c,
            ctx: ctx.clone(),
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn scalar(ctx: &Field, n: usize, s: &Scalar) -> Self {
        let mut m = Mat::zeros(ctx, n, n);
        for i in 0..n {
            m.set(i, i, s.clone());
        }
        m
    }

    pub fn at(&self, r: usize, c: usize) -> &Scalar {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && *self == Mat::identity(&self.ctx, self.rows)
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(&self.ctx, self.cols, self.rows, |r, c| self.at(c, r).clone())
    }

    pub fn map(&self, f: impl Fn(&Scalar) -> Scalar) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            ctx: self.ctx.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, s: &Scalar) -> Mat {
        self.map(|x| x * s)
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            ctx: self.ctx.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            ctx: self.ctx.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "shape mismatch in mul");
        let mut out = Mat::zeros(&self.ctx, self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let b = other.at(k, c);
                    if !b.is_zero() {
                        let v = out.at(r, c) + &(a * b);
                        out.set(r, c, v);
                    }
                }
            }
        }
        out
    }

    /// Kronecker product following row-major (a-index outer) ordering.
    pub fn kron(&self, other: &Mat) -> Mat {
        let mut out = Mat::zeros(&self.ctx, self.rows * other.rows, self.cols * other.cols);
        for r1 in 0..self.rows {
            for c1 in 0..self.cols {
                let a = self.at(r1, c1);
                if a.is_zero() {
                    continue;
                }
                for r2 in 0..other.rows {
                    for c2 in 0..other.cols {
                        let b = other.at(r2, c2);
                        if !b.is_zero() {
                            out.set(r1 * other.rows + r2, c1 * other.cols + c2, a * b);
                        }
                    }
                }
            }
        }
        out
    }

    /// Block-diagonal stack.
    pub fn direct_sum(&self, other: &Mat) -> Mat {
        let mut out = Mat::zeros(&self.ctx, self.rows + other.rows, self.cols + other.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(r, c, self.at(r, c).clone());
            }
        }
        for r in 0..other.rows {
            for c in 0..other.cols {
                out.set(self.rows + r, self.cols + c, other.at(r, c).clone());
            }
        }
        out
    }

    pub fn hstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        Mat::from_fn(&self.ctx, self.rows, self.cols + other.cols, |r, c| {
            if c < self.cols {
                self.at(r, c).clone()
            } else {
                other.at(r, c - self.cols).clone()
            }
        })
    }

    pub fn col(&self, c: usize) -> Vec<Scalar> {
        (0..self.rows).map(|r| self.at(r, c).clone()).collect()
    }

    /// Reduced row echelon form; returns (rref, pivot columns).
    pub fn rref(&self) -> (Mat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row >= m.rows {
                break;
            }
            // find pivot
            let mut piv = None;
            for r in row..m.rows {
                if !m.at(r, col).is_zero() {
                    piv = Some(r);
                    break;
                }
            }
            let Some(piv) = piv else { continue };
            // swap rows
            if piv != row {
                for c in 0..m.cols {
                    let a = m.at(row, c).clone();
                    let b = m.at(piv, c).clone();
                    m.set(row, c, b);
                    m.set(piv, c, a);
                }
            }
            // normalize
            let inv = m.at(row, col).inv();
            for c in 0..m.cols {
                let v = m.at(row, c) * &inv;
                m.set(row, c, v);
            }
            // eliminate
            for r in 0..m.rows {
                if r != row && !m.at(r, col).is_zero() {
                    let f = m.at(r, col).clone();
                    for c in 0..m.cols {
                        let v = m.at(r, c) - &(&f * m.at(row, c));
                        m.set(r, c, v);
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the (right) kernel as columns of a matrix.
    pub fn kernel(&self) -> Mat {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut k = Mat::zeros(&self.ctx, self.cols, free.len());
        for (j, fc) in free.iter().enumerate() {
            k.set(*fc, j, Scalar::one(&self.ctx));
            for (i, pc) in pivots.iter().enumerate() {
                k.set(*pc, j, -r.at(i, *fc));
            }
        }
        k
    }

    /// Solves self * X = rhs exactly; None if inconsistent.
    pub fn solve(&self, rhs: &Mat) -> Option<Mat> {
        assert_eq!(self.rows, rhs.rows);
        let aug = self.hstack(rhs);
        let (r, pivots) = aug.rref();
        // inconsistent if a pivot lies in the rhs block
        if pivots.iter().any(|p| *p >= self.cols) {
            return None;
        }
        let mut x = Mat::zeros(&self.ctx, self.cols, rhs.cols);
        for (i, p) in pivots.iter().enumerate() {
            for c in 0..rhs.cols {
                x.set(*p, c, r.at(i, self.cols + c).clone());
            }
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Mat> {
        if self.rows != self.cols {
            return None;
        }
        let x = self.solve(&Mat::identity(&self.ctx, self.rows))?;
        if self.mul(&x).is_identity() {
            Some(x)
        } else {
            None
        }
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }

    pub fn det(&self) -> Scalar {
        assert_eq!(self.rows, self.cols);
        let mut m = self.clone();
        let mut det = Scalar::one(&self.ctx);
        for col in 0..m.cols {
            let mut piv = None;
            for r in col..m.rows {
                if !m.at(r, col).is_zero() {
                    piv = Some(r);
                    break;
                }
            }
            let Some(piv) = piv else {
                return Scalar::zero(&self.ctx);
            };
            if piv != col {
                det = -det;
                for c in 0..m.cols {
                    let a = m.at(col, c).clone();
                    let b = m.at(piv, c).clone();
                    m.set(col, c, b);
                    m.set(piv, c, a);
                }
            }
            let p = m.at(col, col).clone();
            det = &det * &p;
            let inv = p.inv();
            for r in col + 1..m.rows {
                if !m.at(r, col).is_zero() {
                    let f = m.at(r, col) * &inv;
                    for c in col..m.cols {
                        let v = m.at(r, c) - &(&f * m.at(col, c));
                        m.set(r, c, v);
                    }
                }
            }
        }
        det
    }

    /// Basis of the column space: the pivot columns of self.
    pub fn image_basis(&self) -> Mat {
        let (_, pivots) = self.rref();
        Mat::from_fn(&self.ctx, self.rows, pivots.len(), |r, j| {
            self.at(r, pivots[j]).clone()
        })
    }

    /// Extends the column space basis to a basis of the ambient space with
    /// standard vectors; returns the complement columns (a cokernel basis).
    pub fn cokernel_basis(&self) -> Mat {
        let im = self.image_basis();
        let mut chosen: Vec<usize> = Vec::new();
        let mut cur = im.clone();
        for e in 0..self.rows {
            if cur.cols == self.rows {
                break;
            }
            let mut cand = Mat::zeros(&self.ctx, self.rows, 1);
            cand.set(e, 0, Scalar::one(&self.ctx));
            let ext = cur.hstack(&cand);
            if ext.rank() == cur.cols + 1 {
                chosen.push(e);
                cur = ext;
            }
        }
        Mat::from_fn(&self.ctx, self.rows, chosen.len(), |r, j| {
            if r == chosen[j] {
                Scalar::one(&self.ctx)
            } else {
                Scalar::zero(&self.ctx)
            }
        })
    }
}

/// Splits an exact idempotent e = e*e into (image basis i, projection p)
/// with p*i = id and i*p = e.
pub fn split_idempotent(e: &Mat) -> Option<(Mat, Mat)> {
    assert_eq!(e.rows, e.cols);
    if e.mul(e) != *e {
        return None;
    }
    let i = e.image_basis();
    // e = i * p with p uniquely determined since i has full column rank:
    // solve i * p = e (column by column), then p*i = id follows from e^2 = e.
    let p = i.solve(e)?;
    debug_assert!(p.mul(&i).is_identity());
    Some((i, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclofield::{field, Scalar};

    fn m(ctx: &Field, rows: usize, cols: usize, vals: &[i64]) -> Mat {
        Mat::from_fn(ctx, rows, cols, |r, c| Scalar::from_int(ctx, vals[r * cols + c]))
    }

    #[test]
    fn rank_kernel_solve() {
        let k = field(1).unwrap();
        let a = m(&k, 2, 3, &[1, 2, 3, 2, 4, 6]);
        assert_eq!(a.rank(), 1);
        let ker = a.kernel();
        assert_eq!(ker.cols, 2);
        assert!(a.mul(&ker).is_zero());

        let b = m(&k, 2, 2, &[1, 1, 0, 1]);
        let inv = b.inverse().unwrap();
        assert!(b.mul(&inv).is_identity());
        assert_eq!(b.det(), Scalar::from_int(&k, 1));
    }

    #[test]
    fn idempotent_split() {
        let k = field(1).unwrap();
        // averaging projector on K^2 for the swap action
        let half = Scalar::from_rational(&k, crate::cyclofield::parse_rational("1/2").unwrap());
        let e = Mat::from_fn(&k, 2, 2, |_, _| half.clone());
        let (i, p) = split_idempotent(&e).unwrap();
        assert_eq!(i.cols, 1);
        assert!(p.mul(&i).is_identity());
        assert_eq!(i.mul(&p), e);
        // non-idempotent input is rejected
        let bad = m(&k, 2, 2, &[1, 1, 0, 1]);
        assert!(split_idempotent(&bad).is_none());
    }

    #[test]
    fn det_over_cyclotomics() {
        let k = field(3).unwrap();
        let z = Scalar::zeta(&k);
        let a = Mat::from_rows(
            &k,
            vec![
                vec![Scalar::one(&k), z.clone()],
                vec![z.pow(2), Scalar::one(&k)],
            ],
        );
        // det = 1 - z^3 = 0
        assert!(a.det().is_zero());
    }
}
