//! Exact arithmetic in the cyclotomic field Q(zeta_N).
//!
//! Elements are stored in the power basis `1, z, ..., z^(phi(N)-1)` reduced
//! modulo the N-th cyclotomic polynomial, so equality is coefficient
//! equality and every result is in canonical form.  Rationals are
//! arbitrary precision; there is no floating point anywhere.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("conductor must be positive")]
    ZeroConductor,
    #[error("conductor mismatch: {0} vs {1}")]
    ConductorMismatch(u64, u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("conductor {have} too small, need a multiple of {need}")]
    ConductorTooSmall { have: u64, need: u64 },
}

/// Euler totient by trial factorisation; conductors stay tiny here.
pub fn euler_phi(mut n: u64) -> u64 {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

fn rat(i: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(i))
}

/// Dense polynomial over Q, little-endian coefficients, used only to set
/// up the cyclotomic modulus and its reduction tables.
fn poly_trim(p: &mut Vec<BigRational>) {
    while p.len() > 1 && p.last().map_or(false, |c| c.is_zero()) {
        p.pop();
    }
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if !bj.is_zero() {
                out[i + j] += ai * bj;
            }
        }
    }
    poly_trim(&mut out);
    out
}

/// Exact euclidean division; panics if the divisor does not divide evenly
/// where that is expected (cyclotomic construction divides exactly).
fn poly_divmod(num: &[BigRational], den: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let mut rem: Vec<BigRational> = num.to_vec();
    poly_trim(&mut rem);
    let dd = den.len() - 1;
    let lead = den.last().unwrap().clone();
    if rem.len() < den.len() {
        return (vec![BigRational::zero()], rem);
    }
    let mut quo = vec![BigRational::zero(); rem.len() - dd];
    while rem.len() >= den.len() && !(rem.len() == 1 && rem[0].is_zero()) {
        let k = rem.len() - den.len();
        let c = rem.last().unwrap() / &lead;
        quo[k] = c.clone();
        for (i, dc) in den.iter().enumerate() {
            let v = &rem[k + i] - &c * dc;
            rem[k + i] = v;
        }
        poly_trim(&mut rem);
        if rem.len() == 1 && rem[0].is_zero() {
            break;
        }
        if rem.len() < den.len() {
            break;
        }
    }
    poly_trim(&mut quo);
    (quo, rem)
}

/// The n-th cyclotomic polynomial by iterated exact division of x^n - 1 by
/// all lower cyclotomic polynomials.
pub fn cyclotomic_polynomial(n: u64) -> Vec<BigRational> {
    assert!(n >= 1);
    let mut acc = {
        // x^n - 1
        let mut p = vec![BigRational::zero(); n as usize + 1];
        p[0] = -BigRational::one();
        p[n as usize] = BigRational::one();
        p
    };
    for d in 1..n {
        if n % d == 0 {
            let phi_d = cyclotomic_polynomial(d);
            let (q, r) = poly_divmod(&acc, &phi_d);
            assert!(r.iter().all(|c| c.is_zero()), "cyclotomic division not exact");
            acc = q;
        }
    }
    acc
}

/// Shared context fixing the conductor N.  All scalars created through a
/// context carry a handle to it; mixing conductors is reported as an error
/// by the checked entry points.
#[derive(Debug)]
pub struct FieldCtx {
    conductor: u64,
    phi: usize,
    /// zeta^k for k in phi..2*phi-1, reduced into the power basis.
    reduction: Vec<Vec<BigRational>>,
    /// zeta^k for all k in 0..N in the power basis (N-periodic powers).
    zeta_powers: Vec<Vec<BigRational>>,
    modulus: Vec<BigRational>,
}

pub type Field = Arc<FieldCtx>;

/// Builds the field context for Q(zeta_N).
pub fn field(n: u64) -> Result<Field, FieldError> {
    if n == 0 {
        return Err(FieldError::ZeroConductor);
    }
    let modulus = cyclotomic_polynomial(n);
    let phi = modulus.len() - 1;
    // reduction table: z^(phi+k) mod Phi_N for k = 0..phi-1
    let mut reduction: Vec<Vec<BigRational>> = Vec::with_capacity(phi);
    // z^phi = -(lower coefficients) since Phi_N is monic
    let base: Vec<BigRational> = modulus[..phi].iter().map(|c| -c).collect();
    reduction.push(base);
    for _ in 1..phi {
        let prev = reduction.last().unwrap();
        // multiply by z
        let mut next = vec![BigRational::zero(); phi];
        for i in 0..phi - 1 {
            next[i + 1] = prev[i].clone();
        }
        let top = prev[phi - 1].clone();
        if !top.is_zero() {
            for i in 0..phi {
                let v = &next[i] + &top * &reduction[0][i];
                next[i] = v;
            }
        }
        reduction.push(next);
    }
    let mut zeta_powers: Vec<Vec<BigRational>> = Vec::with_capacity(n as usize);
    let mut cur = vec![BigRational::zero(); phi];
    cur[0] = BigRational::one();
    for _ in 0..n {
        zeta_powers.push(cur.clone());
        // multiply by z, reducing the overflow with z^phi = reduction[0]
        let mut next = vec![BigRational::zero(); phi];
        for i in 0..phi.saturating_sub(1) {
            next[i + 1] = cur[i].clone();
        }
        let top = cur[phi - 1].clone();
        if !top.is_zero() {
            for i in 0..phi {
                let v = &next[i] + &top * &reduction[0][i];
                next[i] = v;
            }
        }
        cur = next;
    }
    Ok(Arc::new(FieldCtx {
        conductor: n,
        phi,
        reduction,
        zeta_powers,
        modulus,
    }))
}

impl FieldCtx {
    pub fn conductor(&self) -> u64 {
        self.conductor
    }
    pub fn degree(&self) -> usize {
        self.phi
    }
    pub fn modulus(&self) -> &[BigRational] {
        &self.modulus
    }
}

/// Exact element of Q(zeta_N) in canonical (reduced) form.
#[derive(Clone)]
pub struct Scalar {
    ctx: Field,
    coeffs: Vec<BigRational>,
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar[{}]{:?}", self.ctx.conductor, self.coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>())
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.conductor == other.ctx.conductor && self.coeffs == other.coeffs
    }
}
impl Eq for Scalar {}

impl Scalar {
    pub fn ctx(&self) -> &Field {
        &self.ctx
    }

    pub fn zero(ctx: &Field) -> Self {
        Scalar {
            ctx: ctx.clone(),
            coeffs: vec![BigRational::zero(); ctx.phi],
        }
    }

    pub fn one(ctx: &Field) -> Self {
        Scalar::from_rational(ctx, BigRational::one())
    }

    pub fn from_rational(ctx: &Field, r: BigRational) -> Self {
        let mut coeffs = vec![BigRational::zero(); ctx.phi];
        coeffs[0] = r;
        Scalar {
            ctx: ctx.clone(),
            coeffs,
        }
    }

    pub fn from_int(ctx: &Field, i: i64) -> Self {
        Scalar::from_rational(ctx, rat(i))
    }

    /// zeta_N
    pub fn zeta(ctx: &Field) -> Self {
        Scalar::zeta_pow(ctx, 1)
    }

    /// zeta_N^k (k arbitrary integer, reduced mod N).
    pub fn zeta_pow(ctx: &Field, k: i64) -> Self {
        let n = ctx.conductor as i64;
        let k = k.rem_euclid(n) as usize;
        Scalar {
            ctx: ctx.clone(),
            coeffs: ctx.zeta_powers[k].clone(),
        }
    }

    /// A primitive root of unity of the given order, if order | N
    /// (or order | 2N using -zeta^j when N is odd and order = 2m, m | N).
    pub fn root_of_unity(ctx: &Field, order: u64) -> Result<Self, FieldError> {
        let n = ctx.conductor;
        if order == 0 {
            return Err(FieldError::ConductorTooSmall { have: n, need: 1 });
        }
        if n % order == 0 {
            return Ok(Scalar::zeta_pow(ctx, (n / order) as i64));
        }
        // -1 is always present; for odd N, mu_{2N} = {+-zeta^j}.
        let l = num::integer::lcm(2, n);
        if l % order == 0 {
            // want element of exact order `order` inside mu_{2N} = <-zeta>
            // (-zeta) has order lcm(2, N)... generate -zeta^j of order `order`
            let g = Scalar::from_int(ctx, -1) * Scalar::zeta(ctx); // order l
            let e = l / order;
            return Ok(g.pow(e as i64));
        }
        Err(FieldError::ConductorTooSmall { have: n, need: order })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self == &Scalar::one(&self.ctx)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Rational part if the element lies in Q.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.coeffs[1..].iter().all(|c| c.is_zero()) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    fn check_same(&self, other: &Self) -> Result<(), FieldError> {
        if self.ctx.conductor != other.ctx.conductor {
            Err(FieldError::ConductorMismatch(
                self.ctx.conductor,
                other.ctx.conductor,
            ))
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, FieldError> {
        self.check_same(other)?;
        Ok(self + other)
    }
    pub fn checked_sub(&self, other: &Self) -> Result<Self, FieldError> {
        self.check_same(other)?;
        Ok(self - other)
    }
    pub fn checked_mul(&self, other: &Self) -> Result<Self, FieldError> {
        self.check_same(other)?;
        Ok(self * other)
    }
    pub fn checked_div(&self, other: &Self) -> Result<Self, FieldError> {
        self.check_same(other)?;
        if other.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        Ok(self * &other.inv())
    }

    /// Multiplicative inverse via the extended gcd of the representing
    /// polynomial with Phi_N.  Panics on zero; use `checked_div` on user data.
    pub fn inv(&self) -> Self {
        assert!(!self.is_zero(), "inverse of zero");
        // extended euclid over Q[x]: gcd(a, Phi) = 1 = s*a + t*Phi
        let mut r0: Vec<BigRational> = self.ctx.modulus.clone();
        let mut r1: Vec<BigRational> = self.coeffs.clone();
        poly_trim(&mut r1);
        let mut s0 = vec![BigRational::zero()];
        let mut s1 = vec![BigRational::one()];
        while !(r1.len() == 1 && r1[0].is_zero()) {
            let (q, r) = poly_divmod(&r0, &r1);
            // s2 = s0 - q*s1
            let qs1 = poly_mul(&q, &s1);
            let mut s2 = vec![BigRational::zero(); s0.len().max(qs1.len())];
            for (i, c) in s0.iter().enumerate() {
                s2[i] += c;
            }
            for (i, c) in qs1.iter().enumerate() {
                s2[i] -= c;
            }
            poly_trim(&mut s2);
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s2;
        }
        // r0 = gcd (nonzero constant), inverse = s0 / r0
        assert!(r0.len() == 1 && !r0[0].is_zero(), "element not invertible mod Phi_N");
        let c = r0[0].clone();
        let mut coeffs = vec![BigRational::zero(); self.ctx.phi];
        for (i, v) in s0.iter().enumerate() {
            // s0 may exceed phi-1 in degree only transiently; reduce
            if i < self.ctx.phi {
                coeffs[i] = v / &c;
            } else {
                let red = &self.ctx.reduction[i - self.ctx.phi];
                for (j, rc) in red.iter().enumerate() {
                    let t = &coeffs[j] + &(v / &c) * rc;
                    coeffs[j] = t;
                }
            }
        }
        Scalar {
            ctx: self.ctx.clone(),
            coeffs,
        }
    }

    pub fn pow(&self, mut e: i64) -> Self {
        let mut base = if e < 0 {
            e = -e;
            self.inv()
        } else {
            self.clone()
        };
        let mut acc = Scalar::one(&self.ctx);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Galois conjugation zeta |-> zeta^k for gcd(k, N) = 1.
    pub fn galois(&self, k: u64) -> Self {
        assert_eq!(
            num::integer::gcd(k, self.ctx.conductor),
            1,
            "galois exponent must be coprime to the conductor"
        );
        let mut acc = Scalar::zero(&self.ctx);
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let zi = Scalar::zeta_pow(&self.ctx, (i as u64 * k) as i64);
            acc = &acc + &(&zi * &Scalar::from_rational(&self.ctx, c.clone()));
        }
        acc
    }

    /// Complex conjugation zeta |-> zeta^-1.
    pub fn conj(&self) -> Self {
        if self.ctx.conductor == 1 {
            return self.clone();
        }
        self.galois(self.ctx.conductor - 1)
    }

    /// Multiplicative order k (with a^k = 1) if `a` is a root of unity in
    /// Q(zeta_N); all such lie in mu_lcm(2,N).
    pub fn root_order(&self) -> Option<u64> {
        if self.is_zero() {
            return None;
        }
        let l = num::integer::lcm(2, self.ctx.conductor);
        let mut pow = self.clone();
        for k in 1..=l {
            if pow.is_one() {
                return Some(k);
            }
            pow = &pow * self;
        }
        None
    }

    /// If the element is zeta_N^t for some t, return t.
    pub fn as_zeta_exponent(&self) -> Option<u64> {
        for t in 0..self.ctx.conductor {
            if self == &Scalar::zeta_pow(&self.ctx, t as i64) {
                return Some(t);
            }
        }
        None
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                assert_eq!(self.ctx.conductor, rhs.ctx.conductor, "conductor mismatch");
                let coeffs = self
                    .coeffs
                    .iter()
                    .zip(rhs.coeffs.iter())
                    .map(|(a, b)| a $op b)
                    .collect();
                Scalar { ctx: self.ctx.clone(), coeffs }
            }
        }
        impl std::ops::$trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
    };
}

scalar_binop!(Add, add, +);
scalar_binop!(Sub, sub, -);

impl std::ops::Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        assert_eq!(self.ctx.conductor, rhs.ctx.conductor, "conductor mismatch");
        let phi = self.ctx.phi;
        let mut prod = vec![BigRational::zero(); 2 * phi - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    prod[i + j] += a * b;
                }
            }
        }
        let mut coeffs: Vec<BigRational> = prod[..phi].to_vec();
        for k in phi..2 * phi - 1 {
            if prod[k].is_zero() {
                continue;
            }
            let red = &self.ctx.reduction[k - phi];
            for j in 0..phi {
                if !red[j].is_zero() {
                    let t = &coeffs[j] + &prod[k] * &red[j];
                    coeffs[j] = t;
                }
            }
        }
        Scalar {
            ctx: self.ctx.clone(),
            coeffs,
        }
    }
}
impl std::ops::Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        &self * &rhs
    }
}

impl std::ops::Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            ctx: self.ctx.clone(),
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}
impl std::ops::Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<String> = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let cs = c.to_string();
            if i == 0 {
                terms.push(cs);
            } else if c.is_one() {
                terms.push(format!("z^{i}"));
            } else if (-c).is_one() {
                terms.push(format!("-z^{i}"));
            } else {
                terms.push(format!("{cs}*z^{i}"));
            }
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

/// Parses "p/q" or "p" into a BigRational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        Some(BigRational::new(p, q))
    } else {
        let p: BigInt = s.parse().ok()?;
        Some(BigRational::from_integer(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cyclotomic_degrees() {
        assert_eq!(cyclotomic_polynomial(1).len() - 1, 1);
        assert_eq!(cyclotomic_polynomial(4).len() - 1, 2);
        // degree of Phi_12 computed by dividing x^12 - 1 by the lower ones
        assert_eq!(cyclotomic_polynomial(12).len() - 1, 4);
        assert_eq!(cyclotomic_polynomial(24).len() - 1, 8);
        // Phi_12 = x^4 - x^2 + 1
        let p = cyclotomic_polynomial(12);
        let want: Vec<i64> = vec![1, 0, -1, 0, 1];
        for (c, w) in p.iter().zip(want) {
            assert_eq!(c, &rat(w));
        }
    }

    #[test]
    fn field_rejects_zero_conductor() {
        assert!(matches!(field(0), Err(FieldError::ZeroConductor)));
    }

    #[test]
    fn basic_identities() {
        let k = field(4).unwrap();
        let i = Scalar::zeta(&k);
        assert_eq!(&i * &i, Scalar::from_int(&k, -1));

        let k3 = field(3).unwrap();
        let z = Scalar::zeta(&k3);
        let sum = &(&Scalar::one(&k3) + &z) + &(&z * &z);
        assert!(sum.is_zero(), "1 + z3 + z3^2 = 0");

        let k8 = field(8).unwrap();
        let z8 = Scalar::zeta(&k8);
        assert_eq!(z8.inv(), z8.pow(7));
    }

    #[test]
    fn mul_reduces_mod_phi5() {
        // (1+z)(1+z^4) over Q(zeta_5): expand and reduce mod Phi_5
        let k = field(5).unwrap();
        let z = Scalar::zeta(&k);
        let a = &Scalar::one(&k) + &z;
        let b = &Scalar::one(&k) + &z.pow(4);
        let prod = &a * &b;
        // 1 + z + z^4 + z^5 = 2 + z + z^4, and z^4 = -(1+z+z^2+z^3)
        let want = &(&Scalar::from_int(&k, 1) + &z) + &z.pow(4);
        let want = &want + &Scalar::one(&k);
        assert_eq!(prod, want);
    }

    #[test]
    fn conductor_mismatch_reported() {
        let a = Scalar::one(&field(3).unwrap());
        let b = Scalar::one(&field(4).unwrap());
        assert!(matches!(
            a.checked_add(&b),
            Err(FieldError::ConductorMismatch(3, 4))
        ));
        assert!(matches!(
            Scalar::zero(&field(3).unwrap()).checked_div(&Scalar::zero(&field(3).unwrap())),
            Err(FieldError::DivisionByZero)
        ));
    }

    #[test]
    fn root_orders() {
        let k = field(6).unwrap();
        assert_eq!(Scalar::from_int(&k, -1).root_order(), Some(2));
        assert_eq!(Scalar::zeta(&k).root_order(), Some(6));
        assert_eq!(Scalar::from_int(&k, 2).root_order(), None);
        assert_eq!(Scalar::from_int(&k, 1).root_order(), Some(1));
        // root_order(zeta^j) = N / gcd(N, j)
        for j in 0..6i64 {
            let want = if j == 0 { 1 } else { 6 / num::integer::gcd(6, j as u64) };
            assert_eq!(Scalar::zeta_pow(&k, j).root_order(), Some(want));
        }
    }

    #[test]
    fn root_of_unity_orders() {
        let k = field(12).unwrap();
        for d in [1u64, 2, 3, 4, 6, 12] {
            let r = Scalar::root_of_unity(&k, d).unwrap();
            assert_eq!(r.root_order(), Some(d), "order {d}");
        }
        assert!(Scalar::root_of_unity(&k, 5).is_err());
        assert!(Scalar::root_of_unity(&k, 8).is_err());
        // odd conductor: mu_2N is still available through -zeta
        let k9 = field(9).unwrap();
        let r = Scalar::root_of_unity(&k9, 18).unwrap();
        assert_eq!(r.root_order(), Some(18));
    }

    fn small_scalar(k: &Field, seed: &[i8]) -> Scalar {
        let mut s = Scalar::zero(k);
        for (i, c) in seed.iter().enumerate() {
            let term = &Scalar::zeta_pow(k, i as i64) * &Scalar::from_int(k, *c as i64);
            s = &s + &term;
        }
        s
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn field_axioms_hold(a in proptest::collection::vec(-4i8..5, 4),
                             b in proptest::collection::vec(-4i8..5, 4),
                             c in proptest::collection::vec(-4i8..5, 4)) {
            let k = field(12).unwrap();
            let (a, b, c) = (small_scalar(&k, &a), small_scalar(&k, &b), small_scalar(&k, &c));
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            if !a.is_zero() {
                prop_assert_eq!(&a * &a.inv(), Scalar::one(&k));
            }
        }

        #[test]
        fn galois_is_multiplicative(a in proptest::collection::vec(-3i8..4, 4),
                                    b in proptest::collection::vec(-3i8..4, 4),
                                    k in prop::sample::select(vec![5u64, 7, 11])) {
            let f = field(12).unwrap();
            let (a, b) = (small_scalar(&f, &a), small_scalar(&f, &b));
            prop_assert_eq!((&a * &b).galois(k), &a.galois(k) * &b.galois(k));
            prop_assert_eq!((&a + &b).galois(k), &a.galois(k) + &b.galois(k));
        }
    }
}
