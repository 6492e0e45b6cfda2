//! Finite groups by Cayley table: characters, conjugacy data, the
//! H^2 obstruction machinery for linearisations, and representation
//! determinants.

use crate::cyclofield::{Field, FieldError, Scalar};
use crate::intlin::{solve_mod, IMat};
use crate::linalg::Mat;
use num::bigint::BigInt;
use num::integer::{gcd, lcm};
use num::{ToPrimitive, Zero};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("associativity fails at ({0}, {1}, {2})")]
    Associativity(usize, usize, usize),
    #[error("index 0 is not a two-sided identity (witness element {0})")]
    Identity(usize),
    #[error("element {0} has no inverse")]
    Inverse(usize),
    #[error("malformed Cayley table: {0}")]
    Malformed(String),
    #[error("not multiplicative at pair ({0}, {1})")]
    NotMultiplicative(usize, usize),
    #[error("subgroup is not normal: conjugate of {0} by {1} escapes")]
    NotNormal(usize, usize),
    #[error("not a subgroup: {0}")]
    NotSubgroup(String),
    #[error("map is not a bijective homomorphism: {0}")]
    NotIso(String),
    #[error("cocycle identity fails at ({0}, {1}, {2})")]
    NotCocycle(usize, usize, usize),
    #[error("cocycle value at ({0}, {1}) is zero")]
    ZeroCocycleValue(usize, usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Finite group given by its Cayley table; index 0 is the identity.
#[derive(Debug)]
pub struct FiniteGroup {
    order: usize,
    mul: Vec<Vec<usize>>,
    inv: Vec<usize>,
    label: String,
    names: Vec<String>,
}

pub type Group = Arc<FiniteGroup>;

impl PartialEq for FiniteGroup {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.mul == other.mul
    }
}
impl Eq for FiniteGroup {}

impl FiniteGroup {
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn name(&self, g: usize) -> &str {
        &self.names[g]
    }
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a][b]
    }
    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }
    pub fn elements(&self) -> impl Iterator<Item = usize> {
        0..self.order
    }
    pub fn is_abelian(&self) -> bool {
        for a in 0..self.order {
            for b in a + 1..self.order {
                if self.mul[a][b] != self.mul[b][a] {
                    return false;
                }
            }
        }
        true
    }
    pub fn element_order(&self, g: usize) -> u64 {
        let mut k = 1;
        let mut x = g;
        while x != 0 {
            x = self.mul[x][g];
            k += 1;
        }
        k
    }
    pub fn exponent(&self) -> u64 {
        (0..self.order).fold(1, |acc, g| lcm(acc, self.element_order(g)))
    }
    pub fn is_cyclic(&self) -> bool {
        (0..self.order).any(|g| self.element_order(g) as usize == self.order)
    }

    fn validate(&self) -> Result<(), GroupError> {
        let n = self.order;
        for g in 0..n {
            if self.mul[0][g] != g || self.mul[g][0] != g {
                return Err(GroupError::Identity(g));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if self.mul[self.mul[a][b]][c] != self.mul[a][self.mul[b][c]] {
                        return Err(GroupError::Associativity(a, b, c));
                    }
                }
            }
        }
        for g in 0..n {
            if self.mul[g][self.inv[g]] != 0 || self.mul[self.inv[g]][g] != 0 {
                return Err(GroupError::Inverse(g));
            }
        }
        Ok(())
    }
}

fn build(
    mul: Vec<Vec<usize>>,
    label: String,
    names: Vec<String>,
) -> Result<Group, GroupError> {
    let n = mul.len();
    if n == 0 {
        return Err(GroupError::Malformed("empty table".into()));
    }
    for row in &mul {
        if row.len() != n || row.iter().any(|&x| x >= n) {
            return Err(GroupError::Malformed("table is not square over 0..n".into()));
        }
    }
    let mut inv = vec![usize::MAX; n];
    for g in 0..n {
        match (0..n).find(|&h| mul[g][h] == 0 && mul[h][g] == 0) {
            Some(h) => inv[g] = h,
            None => return Err(GroupError::Inverse(g)),
        }
    }
    let g = FiniteGroup {
        order: n,
        mul,
        inv,
        label,
        names,
    };
    g.validate()?;
    Ok(Arc::new(g))
}

/// Z/n with elements ordered as powers of the generator.
pub fn cyclic(n: usize) -> Group {
    assert!(n >= 1);
    let mul = (0..n)
        .map(|a| (0..n).map(|b| (a + b) % n).collect())
        .collect();
    let names = (0..n).map(|k| format!("g^{k}")).collect();
    build(mul, format!("Z/{n}"), names).expect("cyclic group law")
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    // lexicographic order over one-line notation
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next_permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// S_n with elements in lexicographic one-line order (identity first).
pub fn symmetric(n: usize) -> Group {
    assert!(n >= 1);
    let perms = permutations(n);
    let index = |p: &Vec<usize>| perms.binary_search(p).unwrap();
    let mul = perms
        .iter()
        .map(|p| {
            perms
                .iter()
                .map(|q| {
                    // (p o q)(i) = p(q(i)); q applied first
                    let r: Vec<usize> = (0..n).map(|i| p[q[i]]).collect();
                    index(&r)
                })
                .collect()
        })
        .collect();
    let names = perms
        .iter()
        .map(|p| {
            let s: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            format!("({})", s.join(" "))
        })
        .collect();
    build(mul, format!("S{n}"), names).expect("symmetric group law")
}

/// The one-line permutation corresponding to an element of `symmetric(n)`.
pub fn symmetric_one_line(n: usize, g: usize) -> Vec<usize> {
    permutations(n)[g].clone()
}

/// Direct product with mixed-radix element indexing (first factor fastest).
pub fn product(factors: &[Group]) -> Group {
    assert!(!factors.is_empty());
    let sizes: Vec<usize> = factors.iter().map(|g| g.order()).collect();
    let total: usize = sizes.iter().product();
    let decode = |mut idx: usize| -> Vec<usize> {
        sizes
            .iter()
            .map(|&s| {
                let r = idx % s;
                idx /= s;
                r
            })
            .collect()
    };
    let encode = |parts: &[usize]| -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (p, s) in parts.iter().zip(&sizes) {
            idx += p * stride;
            stride *= s;
        }
        idx
    };
    let mul = (0..total)
        .map(|a| {
            let pa = decode(a);
            (0..total)
                .map(|b| {
                    let pb = decode(b);
                    let parts: Vec<usize> = pa
                        .iter()
                        .zip(pb.iter())
                        .zip(factors.iter())
                        .map(|((&x, &y), g)| g.mul(x, y))
                        .collect();
                    encode(&parts)
                })
                .collect()
        })
        .collect();
    let names = (0..total)
        .map(|i| {
            let parts = decode(i);
            let s: Vec<&str> = parts
                .iter()
                .zip(factors.iter())
                .map(|(&p, g)| g.name(p))
                .collect();
            format!("({})", s.join(","))
        })
        .collect();
    let label = factors
        .iter()
        .map(|g| g.label().to_string())
        .collect::<Vec<_>>()
        .join("x");
    build(mul, label, names).expect("product group law")
}

/// Group from an explicit Cayley table; law violations are reported with a
/// witness.
pub fn from_table(mul: Vec<Vec<usize>>, label: &str) -> Result<Group, GroupError> {
    let names = (0..mul.len()).map(|i| format!("e{i}")).collect();
    build(mul, label.to_string(), names)
}

pub fn klein_four() -> Group {
    product(&[cyclic(2), cyclic(2)])
}

/// Subgroup as a sorted element list of an ambient group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgroup {
    pub ambient: Group,
    pub elements: Vec<usize>,
}

impl Subgroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }
    pub fn contains(&self, g: usize) -> bool {
        self.elements.binary_search(&g).is_ok()
    }
    pub fn is_normal(&self) -> bool {
        for &u in &self.elements {
            for g in 0..self.ambient.order() {
                let conj = self
                    .ambient
                    .mul(self.ambient.mul(g, u), self.ambient.inv(g));
                if !self.contains(conj) {
                    return false;
                }
            }
        }
        true
    }
    pub fn trivial(ambient: &Group) -> Subgroup {
        Subgroup {
            ambient: ambient.clone(),
            elements: vec![0],
        }
    }
    pub fn full(ambient: &Group) -> Subgroup {
        Subgroup {
            ambient: ambient.clone(),
            elements: (0..ambient.order()).collect(),
        }
    }

    /// As a standalone group with the element mapping back to the ambient.
    pub fn as_group(&self) -> (Group, Vec<usize>) {
        let pos = |g: usize| self.elements.binary_search(&g).unwrap();
        let mul = self
            .elements
            .iter()
            .map(|&a| {
                self.elements
                    .iter()
                    .map(|&b| pos(self.ambient.mul(a, b)))
                    .collect()
            })
            .collect();
        let names = self
            .elements
            .iter()
            .map(|&g| self.ambient.name(g).to_string())
            .collect();
        let g = build(mul, format!("{}-sub{}", self.ambient.label(), self.order()), names)
            .expect("subgroup closure gives a group");
        (g, self.elements.clone())
    }

    /// Right cosets U\G with representatives (identity coset first).
    pub fn right_cosets(&self) -> Vec<usize> {
        let g = &self.ambient;
        let mut reps = Vec::new();
        let mut seen = vec![false; g.order()];
        for x in 0..g.order() {
            if !seen[x] {
                reps.push(x);
                for &u in &self.elements {
                    seen[g.mul(u, x)] = true;
                }
            }
        }
        reps
    }
}

/// Closure of a generating set.
pub fn subgroup(ambient: &Group, gens: &[usize]) -> Subgroup {
    let mut set = vec![false; ambient.order()];
    set[0] = true;
    let mut stack: Vec<usize> = vec![0];
    let mut frontier: Vec<usize> = gens.to_vec();
    while let Some(g) = frontier.pop() {
        if !set[g] {
            set[g] = true;
            stack.push(g);
            for &h in &stack.clone() {
                frontier.push(ambient.mul(g, h));
                frontier.push(ambient.mul(h, g));
            }
            frontier.push(ambient.inv(g));
        }
    }
    Subgroup {
        ambient: ambient.clone(),
        elements: (0..ambient.order()).filter(|&g| set[g]).collect(),
    }
}

/// Quotient by a normal subgroup; returns the quotient group and the
/// projection map.
pub fn quotient(ambient: &Group, normal: &Subgroup) -> Result<(Group, Vec<usize>), GroupError> {
    if !normal.is_normal() {
        for &u in &normal.elements {
            for g in 0..ambient.order() {
                let conj = ambient.mul(ambient.mul(g, u), ambient.inv(g));
                if !normal.contains(conj) {
                    return Err(GroupError::NotNormal(u, g));
                }
            }
        }
    }
    // left cosets (= right by normality), identity coset first
    let mut coset_of = vec![usize::MAX; ambient.order()];
    let mut reps = Vec::new();
    for g in 0..ambient.order() {
        if coset_of[g] == usize::MAX {
            let idx = reps.len();
            reps.push(g);
            for &u in &normal.elements {
                coset_of[ambient.mul(g, u)] = idx;
            }
        }
    }
    let m = reps.len();
    let mul: Vec<Vec<usize>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| coset_of[ambient.mul(reps[a], reps[b])])
                .collect()
        })
        .collect();
    let names = reps
        .iter()
        .map(|&r| format!("[{}]", ambient.name(r)))
        .collect();
    let q = build(mul, format!("{}/{}", ambient.label(), normal.order()), names)?;
    Ok((q, coset_of))
}

/// Commutator subgroup [G, G].
pub fn commutator_subgroup(g: &Group) -> Subgroup {
    let mut gens = Vec::new();
    for a in 0..g.order() {
        for b in 0..g.order() {
            let c = g.mul(g.mul(a, b), g.mul(g.inv(a), g.inv(b)));
            if c != 0 {
                gens.push(c);
            }
        }
    }
    subgroup(g, &gens)
}

/// Conjugacy class with its centralizer.
#[derive(Debug, Clone)]
pub struct ConjClass {
    pub rep: usize,
    pub members: Vec<usize>,
    pub centralizer: Subgroup,
}

/// Conjugacy classes by brute-force conjugation orbits; the centralizer of
/// the representative is the stabilizer for the conjugation action.
pub fn conjugacy(g: &Group) -> Vec<ConjClass> {
    let n = g.order();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for rep in 0..n {
        if seen[rep] {
            continue;
        }
        let mut members = Vec::new();
        for h in 0..n {
            let c = g.mul(g.mul(h, rep), g.inv(h));
            if !seen[c] {
                seen[c] = true;
                members.push(c);
            }
        }
        members.sort_unstable();
        let cent: Vec<usize> = (0..n).filter(|&h| g.mul(h, rep) == g.mul(rep, h)).collect();
        out.push(ConjClass {
            rep,
            members,
            centralizer: Subgroup {
                ambient: g.clone(),
                elements: cent,
            },
        });
    }
    out
}

/// Character of G valued in mu_N: value(g) = zeta_N^(exps[g]).
#[derive(Clone)]
pub struct Character {
    pub group: Group,
    ctx: Field,
    exps: Vec<u64>,
}

impl std::fmt::Debug for Character {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Character{:?}", self.exps)
    }
}

impl PartialEq for Character {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.group, &other.group) || self.group == other.group)
            && self.exps == other.exps
    }
}
impl Eq for Character {}

impl Character {
    pub fn new(group: &Group, ctx: &Field, exps: Vec<u64>) -> Result<Self, GroupError> {
        let n = ctx.conductor();
        let exps: Vec<u64> = exps.into_iter().map(|e| e % n).collect();
        for a in 0..group.order() {
            for b in 0..group.order() {
                if (exps[a] + exps[b]) % n != exps[group.mul(a, b)] {
                    return Err(GroupError::NotMultiplicative(a, b));
                }
            }
        }
        Ok(Character {
            group: group.clone(),
            ctx: ctx.clone(),
            exps,
        })
    }

    pub fn trivial(group: &Group, ctx: &Field) -> Self {
        Character {
            group: group.clone(),
            ctx: ctx.clone(),
            exps: vec![0; group.order()],
        }
    }

    pub fn ctx(&self) -> &Field {
        &self.ctx
    }
    pub fn exponent(&self, g: usize) -> u64 {
        self.exps[g]
    }
    pub fn value(&self, g: usize) -> Scalar {
        Scalar::zeta_pow(&self.ctx, self.exps[g] as i64)
    }
    pub fn is_trivial(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }
    pub fn mul(&self, other: &Character) -> Character {
        assert!(Arc::ptr_eq(&self.group, &other.group));
        let n = self.ctx.conductor();
        Character {
            group: self.group.clone(),
            ctx: self.ctx.clone(),
            exps: self
                .exps
                .iter()
                .zip(other.exps.iter())
                .map(|(a, b)| (a + b) % n)
                .collect(),
        }
    }
    pub fn inverse(&self) -> Character {
        let n = self.ctx.conductor();
        Character {
            group: self.group.clone(),
            ctx: self.ctx.clone(),
            exps: self.exps.iter().map(|&e| (n - e % n) % n).collect(),
        }
    }
    pub fn order(&self) -> u64 {
        let n = self.ctx.conductor();
        self.exps
            .iter()
            .filter(|&&e| e != 0)
            .map(|&e| n / gcd(n, e))
            .fold(1, lcm)
    }

    /// Kernel subgroup U_chi; its index equals the order of the character.
    pub fn kernel(&self) -> Subgroup {
        Subgroup {
            ambient: self.group.clone(),
            elements: (0..self.group.order())
                .filter(|&g| self.exps[g] == 0)
                .collect(),
        }
    }

    /// Precompose with a group map: chi . f (for f: H -> G given as a table).
    pub fn pullback(&self, source: &Group, map: &[usize]) -> Character {
        Character {
            group: source.clone(),
            ctx: self.ctx.clone(),
            exps: (0..source.order()).map(|h| self.exps[map[h]]).collect(),
        }
    }
}

/// Cyclic decomposition of the abelianisation: invariant factors and, for
/// every group element, its exponent tuple in those coordinates.
struct AbelianCoords {
    factors: Vec<u64>,
    coords: Vec<Vec<u64>>, // per group element, length = factors.len()
}

/// Computes the abelianisation coordinates via a Smith normal form of the
/// relation lattice of a generating set.
fn abelian_coordinates(g: &Group) -> AbelianCoords {
    let comm = commutator_subgroup(g);
    let (quot, proj) = quotient(g, &comm).expect("commutator subgroup is normal");
    // generating set of the abelianisation, greedily
    let mut gens: Vec<usize> = Vec::new();
    let mut have = subgroup(&quot, &[]);
    // prefer generators of maximal order
    let mut order: Vec<usize> = (0..quot.order()).collect();
    order.sort_by_key(|&a| std::cmp::Reverse(quot.element_order(a)));
    for &cand in &order {
        if !have.contains(cand) {
            gens.push(cand);
            let mut gs = gens.clone();
            gs.push(cand);
            have = subgroup(&quot, &gs);
            if have.order() == quot.order() {
                break;
            }
        }
    }
    if gens.is_empty() {
        return AbelianCoords {
            factors: vec![],
            coords: vec![vec![]; g.order()],
        };
    }
    let m = gens.len();
    // word map by BFS over the Cayley graph of the chosen generators
    let mut word: Vec<Option<Vec<i64>>> = vec![None; quot.order()];
    word[0] = Some(vec![0; m]);
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(a) = queue.pop_front() {
        let wa = word[a].clone().unwrap();
        for (i, &gen) in gens.iter().enumerate() {
            let b = quot.mul(a, gen);
            if word[b].is_none() {
                let mut wb = wa.clone();
                wb[i] += 1;
                word[b] = Some(wb);
                queue.push_back(b);
            }
        }
    }
    // relation lattice generators: w(a) + e_i - w(a * g_i) for all a, i
    let mut rels: Vec<Vec<i64>> = Vec::new();
    for a in 0..quot.order() {
        let wa = word[a].clone().unwrap();
        for (i, &gen) in gens.iter().enumerate() {
            let b = quot.mul(a, gen);
            let wb = word[b].clone().unwrap();
            let rel: Vec<i64> = (0..m)
                .map(|j| wa[j] + if i == j { 1 } else { 0 } - wb[j])
                .collect();
            if rel.iter().any(|&x| x != 0) {
                rels.push(rel);
            }
        }
    }
    let k = rels.len().max(1);
    let r = IMat::from_fn(m, k, |row, col| {
        BigInt::from(*rels.get(col).map(|v| &v[row]).unwrap_or(&0))
    });
    let snf = crate::intlin::smith_normal_form(&r);
    // A = Z^m / col(R); y = U x gives A = prod Z/d_i.  d_i = 0 cannot occur
    // for a finite group.
    let factors: Vec<u64> = (0..m)
        .map(|i| {
            let d = snf.d.at(i, i);
            assert!(!d.is_zero(), "abelianisation of a finite group has no free part");
            d.to_u64().expect("small invariant factor")
        })
        .collect();
    let coords = (0..g.order())
        .map(|x| {
            let w = word[proj[x]].clone().unwrap();
            (0..m)
                .map(|i| {
                    let y: BigInt = (0..m).map(|j| snf.u.at(i, j) * BigInt::from(w[j])).sum();
                    let d = BigInt::from(factors[i]);
                    let r = num::Integer::mod_floor(&y, &d);
                    r.to_u64().unwrap()
                })
                .collect()
        })
        .collect();
    AbelianCoords { factors, coords }
}

/// All homomorphisms G -> mu_n as exponent vectors mod n, trivial first,
/// in a deterministic order.  Requires exp(G^ab) | n.
fn characters_mod(g: &Group, n: u64) -> Result<Vec<Vec<u64>>, u64> {
    let ab = abelian_coordinates(g);
    let needed = ab.factors.iter().fold(1, |acc, &d| lcm(acc, d.max(1)));
    if needed != 0 && n % needed != 0 {
        return Err(needed);
    }
    let mut out = Vec::new();
    let mut tuple: Vec<u64> = vec![0; ab.factors.len()];
    loop {
        let exps: Vec<u64> = (0..g.order())
            .map(|x| {
                ab.coords[x]
                    .iter()
                    .zip(ab.factors.iter())
                    .zip(tuple.iter())
                    .map(|((&c, &d), &t)| (t * c % n) * (n / d) % n)
                    .fold(0u64, |acc, v| (acc + v) % n)
            })
            .collect();
        out.push(exps);
        // increment mixed-radix tuple
        let mut i = 0;
        loop {
            if i == tuple.len() {
                return Ok(out);
            }
            tuple[i] += 1;
            if tuple[i] < ab.factors[i] {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
    }
}

/// All |G/[G,G]| characters of G valued in mu_N, trivial character first.
/// Errors with the required conductor when N is too small.
pub fn characters(g: &Group, ctx: &Field) -> Result<Vec<Character>, GroupError> {
    let n = ctx.conductor();
    match characters_mod(g, n) {
        Ok(list) => Ok(list
            .into_iter()
            .map(|exps| Character {
                group: g.clone(),
                ctx: ctx.clone(),
                exps,
            })
            .collect()),
        Err(needed) => Err(GroupError::Field(FieldError::ConductorTooSmall {
            have: n,
            need: needed,
        })),
    }
}

/// Isomorphism of groups as an element bijection verified to be a
/// homomorphism.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupIso {
    pub source: Group,
    pub target: Group,
    pub map: Vec<usize>,
}

impl GroupIso {
    pub fn new(source: &Group, target: &Group, map: Vec<usize>) -> Result<Self, GroupError> {
        if source.order() != target.order() || map.len() != source.order() {
            return Err(GroupError::NotIso("size mismatch".into()));
        }
        let mut seen = vec![false; target.order()];
        for &m in &map {
            if m >= target.order() || seen[m] {
                return Err(GroupError::NotIso("not a bijection".into()));
            }
            seen[m] = true;
        }
        if map[0] != 0 {
            return Err(GroupError::NotIso("identity not preserved".into()));
        }
        for a in 0..source.order() {
            for b in 0..source.order() {
                if map[source.mul(a, b)] != target.mul(map[a], map[b]) {
                    return Err(GroupError::NotIso(format!(
                        "homomorphism fails at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(GroupIso {
            source: source.clone(),
            target: target.clone(),
            map,
        })
    }

    pub fn identity(g: &Group) -> Self {
        GroupIso {
            source: g.clone(),
            target: g.clone(),
            map: (0..g.order()).collect(),
        }
    }

    pub fn apply(&self, g: usize) -> usize {
        self.map[g]
    }

    pub fn inverse(&self) -> GroupIso {
        let mut map = vec![0; self.map.len()];
        for (a, &b) in self.map.iter().enumerate() {
            map[b] = a;
        }
        GroupIso {
            source: self.target.clone(),
            target: self.source.clone(),
            map,
        }
    }

    pub fn compose(&self, inner: &GroupIso) -> GroupIso {
        // self . inner
        GroupIso {
            source: inner.source.clone(),
            target: self.target.clone(),
            map: inner.map.iter().map(|&g| self.map[g]).collect(),
        }
    }

    /// Dual isomorphism on character groups: chi' |-> chi' . self.
    pub fn dual(&self, chi_target: &Character) -> Character {
        chi_target.pullback(&self.source, &self.map)
    }
}

/// Multiplicative 2-cochain on G with values in K^*.
pub type Cochain = Vec<Scalar>;

/// Normalized multiplicative 2-cocycle c(g, h) with the identity
/// c(g,h) c(gh,k) = c(h,k) c(g,hk).
#[derive(Clone, Debug)]
pub struct TwoCocycle {
    pub group: Group,
    pub values: Vec<Vec<Scalar>>,
}

impl TwoCocycle {
    /// Verifies the cocycle identity and normalizes so that
    /// c(e,.) = c(.,e) = 1 (dividing by the constant c(e,e)).
    pub fn new(group: &Group, values: Vec<Vec<Scalar>>) -> Result<Self, GroupError> {
        let n = group.order();
        for (g, row) in values.iter().enumerate() {
            for (h, v) in row.iter().enumerate() {
                if v.is_zero() {
                    return Err(GroupError::ZeroCocycleValue(g, h));
                }
            }
        }
        for g in 0..n {
            for h in 0..n {
                for k in 0..n {
                    let lhs = &values[g][h] * &values[group.mul(g, h)][k];
                    let rhs = &values[h][k] * &values[g][group.mul(h, k)];
                    if lhs != rhs {
                        return Err(GroupError::NotCocycle(g, h, k));
                    }
                }
            }
        }
        let c_ee = values[0][0].clone();
        let inv = c_ee.inv();
        let values = values
            .into_iter()
            .map(|row| row.into_iter().map(|v| &v * &inv).collect())
            .collect();
        Ok(TwoCocycle {
            group: group.clone(),
            values,
        })
    }

    pub fn is_normalized(&self) -> bool {
        self.values[0].iter().all(|v| v.is_one())
            && self.values.iter().all(|row| row[0].is_one())
    }

    pub fn identically_one(group: &Group, ctx: &Field) -> Self {
        TwoCocycle {
            group: group.clone(),
            values: vec![vec![Scalar::one(ctx); group.order()]; group.order()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObstructionVerdict {
    Trivial,
    Nontrivial,
    Inconclusive,
}

/// Result of the H^2 triviality test.
#[derive(Debug)]
pub struct ObstructionReport {
    pub verdict: ObstructionVerdict,
    /// Full set of trivializing 1-cochains when available in the session
    /// field; each beta satisfies beta(g) beta(h) / beta(gh) = c(g, h).
    pub solutions: Vec<Cochain>,
    /// Set when the class is trivial over C but the beta values need a
    /// larger conductor than the session provides.
    pub needed_conductor: Option<u64>,
    /// Witness pair with a nontrivial alternating pairing (abelian route).
    pub pairing_witness: Option<(usize, usize)>,
    pub note: String,
}

/// Decides triviality of the class of a 2-cocycle and, when trivial and
/// expressible in the session field, returns all solutions.
///
/// The verdict reflects H^2(G, C^*): for cyclic groups it is always
/// Trivial; for abelian groups the alternating pairing
/// (g,h) |-> c(g,h)/c(h,g) decides; for nonabelian groups with values in
/// roots of unity an exponent system over Z/L is solved by Smith normal
/// form, and otherwise the verdict is Inconclusive.
pub fn obstruction_class(ctx: &Field, cocycle: &TwoCocycle) -> ObstructionReport {
    let g = &cocycle.group;
    let n = g.order();
    let conductor = ctx.conductor();
    let l = lcm(2, conductor);
    // generator of mu_L inside K
    let xi = if conductor % 2 == 0 {
        Scalar::zeta(ctx)
    } else {
        Scalar::from_int(ctx, -1) * Scalar::zeta(ctx)
    };
    // exponents of the values with respect to xi, if all are roots of unity
    let exps: Option<Vec<Vec<u64>>> = {
        let mut table = vec![vec![0u64; n]; n];
        let mut ok = true;
        'outer: for a in 0..n {
            for b in 0..n {
                let v = &cocycle.values[a][b];
                let mut found = false;
                let mut pow = Scalar::one(ctx);
                for t in 0..l {
                    if &pow == v {
                        table[a][b] = t;
                        found = true;
                        break;
                    }
                    pow = &pow * &xi;
                }
                if !found {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            Some(table)
        } else {
            None
        }
    };

    let abelian = g.is_abelian();
    if abelian {
        // pairing criterion: trivial iff c(g,h)/c(h,g) == 1 everywhere
        for a in 0..n {
            for b in 0..n {
                if cocycle.values[a][b] != cocycle.values[b][a] {
                    return ObstructionReport {
                        verdict: ObstructionVerdict::Nontrivial,
                        solutions: vec![],
                        needed_conductor: None,
                        pairing_witness: Some((a, b)),
                        note: "alternating pairing is nontrivial".into(),
                    };
                }
            }
        }
    }

    if let Some(e) = exps {
        // solve b(g) + b(h) - b(gh) = e(g,h) over Z/L
        let unknowns = n;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let mut row = vec![0i64; unknowns];
                row[a] += 1;
                row[b] += 1;
                row[g.mul(a, b)] -= 1;
                rows.push(row);
                rhs.push(BigInt::from(e[a][b]));
            }
        }
        let a_mat = IMat::from_fn(rows.len(), unknowns, |r, c| BigInt::from(rows[r][c]));
        if let Some(sol) = solve_mod(&a_mat, &rhs, l) {
            // all mu_L-valued solutions: particular * every homomorphism
            // G -> mu_L (these are the homogeneous solutions)
            let mut solutions = Vec::new();
            if let Ok(homs) = characters_mod(g, l) {
                for hom in &homs {
                    let beta: Cochain = (0..n)
                        .map(|x| {
                            let t = (sol[x].to_u64().unwrap() + hom[x]) % l;
                            xi.pow(t as i64)
                        })
                        .collect();
                    solutions.push(beta);
                }
            }
            return ObstructionReport {
                verdict: ObstructionVerdict::Trivial,
                solutions,
                needed_conductor: None,
                pairing_witness: None,
                note: "solved on exponents over Z/L".into(),
            };
        }
        // unsolvable in mu_L: decide over C by inflating to L * exp(G)
        let le = l * g.exponent();
        if solve_mod(&a_mat, &rhs, le).is_some() {
            return ObstructionReport {
                verdict: ObstructionVerdict::Trivial,
                solutions: vec![],
                needed_conductor: Some(num::integer::lcm(conductor, le)),
                pairing_witness: None,
                note: "trivial over C, but beta needs a larger conductor".into(),
            };
        }
        return ObstructionReport {
            verdict: ObstructionVerdict::Nontrivial,
            solutions: vec![],
            needed_conductor: None,
            pairing_witness: None,
            note: "exponent system unsolvable even after inflation".into(),
        };
    }

    // values not in mu: cyclic / abelian verdicts still decided over C
    if g.is_cyclic() {
        return ObstructionReport {
            verdict: ObstructionVerdict::Trivial,
            solutions: vec![],
            needed_conductor: None,
            pairing_witness: None,
            note: "cyclic group: H^2(G, C^*) = 0; values are not roots of unity so no beta in K is produced".into(),
        };
    }
    if abelian {
        return ObstructionReport {
            verdict: ObstructionVerdict::Trivial,
            solutions: vec![],
            needed_conductor: None,
            pairing_witness: None,
            note: "abelian pairing is trivial; values are not roots of unity so no beta in K is produced".into(),
        };
    }
    ObstructionReport {
        verdict: ObstructionVerdict::Inconclusive,
        solutions: vec![],
        needed_conductor: None,
        pairing_witness: None,
        note: "nonabelian cocycle with values outside the roots of unity".into(),
    }
}

/// Determinant character of a matrix representation (multiplicativity of
/// the representation is verified first).
pub fn rep_determinant(
    ctx: &Field,
    group: &Group,
    rep: &[Mat],
) -> Result<Character, GroupError> {
    let n = group.order();
    assert_eq!(rep.len(), n);
    for a in 0..n {
        for b in 0..n {
            if rep[a].mul(&rep[b]) != rep[group.mul(a, b)] {
                return Err(GroupError::NotMultiplicative(a, b));
            }
        }
    }
    let mut exps = Vec::with_capacity(n);
    for g in 0..n {
        let d = rep[g].det();
        match d.as_zeta_exponent() {
            Some(t) => exps.push(t),
            None => {
                let need = d.root_order().unwrap_or(0);
                return Err(GroupError::Field(FieldError::ConductorTooSmall {
                    have: ctx.conductor(),
                    need: lcm(ctx.conductor(), need.max(1)),
                }));
            }
        }
    }
    Character::new(group, ctx, exps)
}

/// Permutation matrices of a group acting on a set, as a representation.
pub fn permutation_representation(ctx: &Field, group: &Group, action: &[Vec<usize>]) -> Vec<Mat> {
    let m = action[0].len();
    (0..group.order())
        .map(|g| {
            Mat::from_fn(ctx, m, m, |r, c| {
                if action[g][c] == r {
                    Scalar::one(ctx)
                } else {
                    Scalar::zero(ctx)
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclofield::field;

    #[test]
    fn cyclic_basics() {
        let g = cyclic(4);
        assert_eq!(g.order(), 4);
        assert_eq!(g.inv(1), 3);
        assert!(g.is_abelian());
        assert!(g.is_cyclic());
        assert_eq!(g.exponent(), 4);
    }

    #[test]
    fn symmetric3_structure() {
        let g = symmetric(3);
        assert_eq!(g.order(), 6);
        let classes = conjugacy(&g);
        assert_eq!(classes.len(), 3);
        let mut sizes: Vec<usize> = classes.iter().map(|c| c.members.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2, 3]);
        // |class| * |centralizer| = |G| and the classes partition G
        let mut all = Vec::new();
        for c in &classes {
            assert_eq!(c.members.len() * c.centralizer.order(), 6);
            all.extend(c.members.iter().copied());
        }
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
        // a transposition has centralizer of order 2
        let transposition = classes.iter().find(|c| c.members.len() == 3).unwrap();
        assert_eq!(transposition.centralizer.order(), 2);
    }

    #[test]
    fn klein_four_self_inverse() {
        let v = klein_four();
        assert!(v.elements().all(|g| v.inv(g) == g));
    }

    #[test]
    fn abelian_classes_are_singletons() {
        let g = cyclic(5);
        let classes = conjugacy(&g);
        assert_eq!(classes.len(), 5);
        assert!(classes.iter().all(|c| c.members.len() == 1));
        assert!(classes.iter().all(|c| c.centralizer.order() == 5));
        assert_eq!(conjugacy(&cyclic(1)).len(), 1);
    }

    #[test]
    fn bad_table_reports_witness() {
        // break associativity: 2x2 table that is not a group
        let t = vec![vec![0, 1], vec![1, 1]];
        match from_table(t, "bad") {
            Err(GroupError::Inverse(_)) | Err(GroupError::Associativity(..)) => {}
            other => panic!("expected law violation, got {other:?}"),
        }
    }

    #[test]
    fn characters_cyclic3() {
        let k = field(3).unwrap();
        let g = cyclic(3);
        let chars = characters(&g, &k).unwrap();
        assert_eq!(chars.len(), 3);
        assert!(chars[0].is_trivial());
        // values in mu_3, multiplicative, pairwise distinct
        for c in &chars {
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(
                        &c.value(a) * &c.value(b),
                        c.value(g.mul(a, b))
                    );
                }
            }
        }
        // nondegeneracy: for g != e some chi(g) != 1
        for x in 1..3 {
            assert!(chars.iter().any(|c| c.exponent(x) != 0));
        }
    }

    #[test]
    fn characters_s3_and_klein() {
        let k = field(2).unwrap();
        let s3 = symmetric(3);
        let chars = characters(&s3, &k).unwrap();
        assert_eq!(chars.len(), 2, "S3 abelianisation is Z/2");
        assert!(chars[0].is_trivial());
        let sign = &chars[1];
        assert_eq!(sign.kernel().order(), 3, "kernel of sign = A3");

        let v = klein_four();
        let chars = characters(&v, &k).unwrap();
        assert_eq!(chars.len(), 4);
        for c in &chars {
            for g in 0..4 {
                let val = c.value(g);
                assert!(val.is_one() || val == Scalar::from_int(&k, -1));
            }
        }
    }

    #[test]
    fn characters_group_structure() {
        // characters form a group isomorphic to the abelianisation;
        // pointwise products of characters are characters
        let k = field(12).unwrap();
        let g = product(&[cyclic(2), cyclic(3)]);
        let chars = characters(&g, &k).unwrap();
        assert_eq!(chars.len(), 6);
        for a in &chars {
            for b in &chars {
                let p = a.mul(b);
                assert!(chars.iter().any(|c| c.exps == p.exps));
            }
        }
    }

    #[test]
    fn conductor_too_small_reported() {
        let k = field(2).unwrap();
        let g = cyclic(3);
        match characters(&g, &k) {
            Err(GroupError::Field(FieldError::ConductorTooSmall { need, .. })) => {
                assert_eq!(need, 3)
            }
            other => panic!("expected conductor error, got {other:?}"),
        }
    }

    #[test]
    fn quotient_and_kernel() {
        let g = cyclic(4);
        let u = subgroup(&g, &[2]);
        assert!(u.is_normal());
        let (q, _) = quotient(&g, &u).unwrap();
        assert_eq!(q.order(), 2);

        let k = field(2).unwrap();
        let s3 = symmetric(3);
        let sign = characters(&s3, &k).unwrap().remove(1);
        let ker = sign.kernel();
        assert_eq!(ker.order(), 3);
        // kernel of the trivial character is everything
        let triv = Character::trivial(&s3, &k);
        assert_eq!(triv.kernel().order(), 6);
    }

    #[test]
    fn obstruction_trivial_cocycle() {
        let k = field(4).unwrap();
        let g = klein_four();
        let c = TwoCocycle::identically_one(&g, &k);
        let rep = obstruction_class(&k, &c);
        assert_eq!(rep.verdict, ObstructionVerdict::Trivial);
        // solution set = all characters: one free orbit, |solutions| = |G^|
        assert_eq!(rep.solutions.len(), 4);
        for beta in &rep.solutions {
            for a in 0..4 {
                for b in 0..4 {
                    let lhs = &(&beta[a] * &beta[b]) * &beta[g.mul(a, b)].inv();
                    assert!(lhs.is_one());
                }
            }
        }
    }

    #[test]
    fn obstruction_klein_pairing() {
        // Heisenberg-flavoured cocycle on V4 with pairing -1 on the two
        // generators: c((a1,a2),(b1,b2)) = (-1)^(a2 b1)
        let k = field(4).unwrap();
        let g = klein_four();
        let comp = |x: usize| (x % 2, x / 2);
        let values: Vec<Vec<Scalar>> = (0..4)
            .map(|a| {
                (0..4)
                    .map(|b| {
                        let (_, a2) = comp(a);
                        let (b1, _) = comp(b);
                        Scalar::from_int(&k, if a2 * b1 % 2 == 1 { -1 } else { 1 })
                    })
                    .collect()
            })
            .collect();
        let c = TwoCocycle::new(&g, values).unwrap();
        let rep = obstruction_class(&k, &c);
        assert_eq!(rep.verdict, ObstructionVerdict::Nontrivial);
        assert!(rep.pairing_witness.is_some());
    }

    #[test]
    fn obstruction_cyclic_always_trivial() {
        let k = field(12).unwrap();
        let g = cyclic(3);
        // cocycle from a coboundary of beta with values zeta_12^j
        let beta: Vec<Scalar> = vec![
            Scalar::one(&k),
            Scalar::zeta_pow(&k, 5),
            Scalar::zeta_pow(&k, 7),
        ];
        let values: Vec<Vec<Scalar>> = (0..3)
            .map(|a| {
                (0..3)
                    .map(|b| &(&beta[a] * &beta[b]) * &beta[g.mul(a, b)].inv())
                    .collect()
            })
            .collect();
        let c = TwoCocycle::new(&g, values).unwrap();
        let rep = obstruction_class(&k, &c);
        assert_eq!(rep.verdict, ObstructionVerdict::Trivial);
        assert_eq!(rep.solutions.len(), 3, "Hom(Z/3, mu_12) has 3 elements");
        // every solution actually trivializes the cocycle
        for beta in &rep.solutions {
            for a in 0..3 {
                for b in 0..3 {
                    let lhs = &(&beta[a] * &beta[b]) * &beta[g.mul(a, b)].inv();
                    assert_eq!(lhs, c.values[a][b]);
                }
            }
        }
    }

    #[test]
    fn non_cocycle_rejected() {
        let k = field(3).unwrap();
        let g = cyclic(3);
        let mut values = vec![vec![Scalar::one(&k); 3]; 3];
        values[1][1] = Scalar::zeta(&k); // breaks the identity at (1,1,2)
        match TwoCocycle::new(&g, values) {
            Err(GroupError::NotCocycle(..)) => {}
            other => panic!("expected cocycle witness, got {other:?}"),
        }
    }

    #[test]
    fn rep_determinants() {
        let k = field(2).unwrap();
        let s3 = symmetric(3);
        let action: Vec<Vec<usize>> = (0..6).map(|g| symmetric_one_line(3, g)).collect();
        let rep = permutation_representation(&k, &s3, &action);
        let det = rep_determinant(&k, &s3, &rep).unwrap();
        // det of the permutation representation = sign character
        let sign = characters(&s3, &k).unwrap().remove(1);
        assert_eq!(det.exps, sign.exps);

        // trivial representation -> trivial character
        let triv: Vec<Mat> = (0..6).map(|_| Mat::identity(&k, 1)).collect();
        assert!(rep_determinant(&k, &s3, &triv).unwrap().is_trivial());

        // regular representation of Z/2: det = sign
        let z2 = cyclic(2);
        let act = vec![vec![0, 1], vec![1, 0]];
        let rep = permutation_representation(&k, &z2, &act);
        let det = rep_determinant(&k, &z2, &rep).unwrap();
        assert_eq!(det.value(1), Scalar::from_int(&k, -1));
    }

    #[test]
    fn rep_determinant_is_additive_under_direct_sum() {
        let k = field(2).unwrap();
        let z2 = cyclic(2);
        let act = vec![vec![0, 1], vec![1, 0]];
        let rho = permutation_representation(&k, &z2, &act);
        let sum: Vec<Mat> = (0..2).map(|g| rho[g].direct_sum(&rho[g])).collect();
        let d1 = rep_determinant(&k, &z2, &rho).unwrap();
        let d2 = rep_determinant(&k, &z2, &sum).unwrap();
        assert_eq!(d2.exps, d1.mul(&d1).exps);
    }

    #[test]
    fn group_iso_checks() {
        let a = cyclic(4);
        let b = cyclic(4);
        // g -> g^3 is an automorphism of Z/4
        let iso = GroupIso::new(&a, &b, vec![0, 3, 2, 1]).unwrap();
        assert_eq!(iso.apply(1), 3);
        let inv = iso.inverse();
        assert_eq!(inv.apply(3), 1);
        // g -> g^2 is not
        assert!(GroupIso::new(&a, &b, vec![0, 2, 0, 2]).is_err());
    }
}
