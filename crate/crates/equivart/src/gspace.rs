//! Finite G-sets as dimension-0 stacks: products, fixed loci, Galois
//! covers, and covers induced by characters.

use crate::cyclofield::{Field, Scalar};
use crate::finitegroup::{
    self, cyclic, product as group_product, quotient, Character, Group, GroupIso, Subgroup,
};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("action of element {0} is not a permutation")]
    NotPermutation(usize),
    #[error("action law fails at (g={0}, h={1}, x={2})")]
    ActionLaw(usize, usize, usize),
    #[error("identity does not act trivially at x={0}")]
    IdentityAction(usize),
    #[error("line bundle linearisation law fails at (g={0}, h={1}, x={2})")]
    BundleLaw(usize, usize, usize),
    #[error("line bundle scalar at (g={0}, x={1}) is zero")]
    ZeroBundleScalar(usize, usize),
    #[error("stack automorphism law fails: f(g.x) != sigma(g).f(x) at (g={0}, x={1})")]
    AutLaw(usize, usize),
    #[error("group is not abelian")]
    NotAbelian,
    #[error("cover fibers are not deck orbits at base point {0}")]
    CoverFibers(usize),
    #[error(transparent)]
    Group(#[from] finitegroup::GroupError),
}

/// Finite set with a left group action, act[g][x] = g.x.
#[derive(Debug, Clone)]
pub struct GSet {
    pub group: Group,
    pub size: usize,
    act: Vec<Vec<usize>>,
}

impl PartialEq for GSet {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size && *self.group == *other.group && self.act == other.act
    }
}

impl GSet {
    pub fn new(group: &Group, size: usize, act: Vec<Vec<usize>>) -> Result<Self, SpaceError> {
        assert_eq!(act.len(), group.order());
        for (g, perm) in act.iter().enumerate() {
            let mut seen = vec![false; size];
            if perm.len() != size {
                return Err(SpaceError::NotPermutation(g));
            }
            for &y in perm {
                if y >= size || seen[y] {
                    return Err(SpaceError::NotPermutation(g));
                }
                seen[y] = true;
            }
        }
        for x in 0..size {
            if act[0][x] != x {
                return Err(SpaceError::IdentityAction(x));
            }
        }
        for g in 0..group.order() {
            for h in 0..group.order() {
                for x in 0..size {
                    if act[group.mul(g, h)][x] != act[g][act[h][x]] {
                        return Err(SpaceError::ActionLaw(g, h, x));
                    }
                }
            }
        }
        Ok(GSet {
            group: group.clone(),
            size,
            act,
        })
    }

    pub fn act(&self, g: usize, x: usize) -> usize {
        self.act[g][x]
    }

    /// Trivial action of a group on a set.
    pub fn trivial_action(group: &Group, size: usize) -> GSet {
        GSet {
            group: group.clone(),
            size,
            act: vec![(0..size).collect(); group.order()],
        }
    }

    /// A plain finite set (trivial group).
    pub fn plain(size: usize) -> GSet {
        GSet::trivial_action(&cyclic(1), size)
    }

    /// The group acting on itself by left translation.
    pub fn regular(group: &Group) -> GSet {
        let act = (0..group.order())
            .map(|g| (0..group.order()).map(|x| group.mul(g, x)).collect())
            .collect();
        GSet {
            group: group.clone(),
            size: group.order(),
            act,
        }
    }

    pub fn is_faithful(&self) -> bool {
        (1..self.group.order()).all(|g| (0..self.size).any(|x| self.act[g][x] != x))
    }

    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.size];
        let mut out = Vec::new();
        for x in 0..self.size {
            if seen[x] {
                continue;
            }
            let mut orbit: Vec<usize> = self
                .group
                .elements()
                .map(|g| self.act[g][x])
                .collect();
            orbit.sort_unstable();
            orbit.dedup();
            for &y in &orbit {
                seen[y] = true;
            }
            out.push(orbit);
        }
        out
    }

    pub fn stabilizer(&self, x: usize) -> Subgroup {
        Subgroup {
            ambient: self.group.clone(),
            elements: self
                .group
                .elements()
                .filter(|&g| self.act[g][x] == x)
                .collect(),
        }
    }

    /// Fixed points of one element.
    pub fn fixed_points(&self, g: usize) -> Vec<usize> {
        (0..self.size).filter(|&x| self.act[g][x] == x).collect()
    }

    /// Restriction of the action to a subgroup, as a standalone GSet.
    pub fn restrict(&self, sub: &Subgroup) -> GSet {
        let (group, elements) = sub.as_group();
        GSet {
            group,
            size: self.size,
            act: elements.iter().map(|&g| self.act[g].clone()).collect(),
        }
    }
}

/// The fixed locus X^g with the action of the centralizer of g.
pub struct FixedLocus {
    /// Points of X in the locus, in increasing order.
    pub points: Vec<usize>,
    /// The locus as a Cent(g)-set (points reindexed by position).
    pub gset: GSet,
    /// The centralizer inside the original group.
    pub centralizer: Subgroup,
}

pub fn fixed_locus(x: &GSet, g: usize) -> FixedLocus {
    let points = x.fixed_points(g);
    let cent: Vec<usize> = x
        .group
        .elements()
        .filter(|&h| x.group.mul(h, g) == x.group.mul(g, h))
        .collect();
    let centralizer = Subgroup {
        ambient: x.group.clone(),
        elements: cent,
    };
    let (cgroup, celems) = centralizer.as_group();
    let pos = |p: usize| points.binary_search(&p).unwrap();
    let act = celems
        .iter()
        .map(|&h| points.iter().map(|&p| pos(x.act(h, p))).collect())
        .collect();
    FixedLocus {
        gset: GSet {
            group: cgroup,
            size: points.len(),
            act,
        },
        points,
        centralizer,
    }
}

/// Componentwise product action of G x G' on X x Y.  Point encoding is
/// mixed-radix with the first factor fastest: p = x + |X| * y.
pub fn gset_product(x: &GSet, y: &GSet) -> GSet {
    let group = group_product(&[x.group.clone(), y.group.clone()]);
    let size = x.size * y.size;
    let act = (0..group.order())
        .map(|g| {
            let (gx, gy) = (g % x.group.order(), g / x.group.order());
            (0..size)
                .map(|p| {
                    let (px, py) = (p % x.size, p / x.size);
                    x.act(gx, px) + x.size * y.act(gy, py)
                })
                .collect()
        })
        .collect();
    GSet { group, size, act }
}

/// X^n with the symmetric group permuting coordinates.  Tuples are encoded
/// mixed-radix with coordinate 0 fastest.
pub fn power_sym(x_size: usize, n: usize) -> GSet {
    let sn = finitegroup::symmetric(n);
    let size = x_size.pow(n as u32);
    let decode = |mut p: usize| -> Vec<usize> {
        (0..n)
            .map(|_| {
                let r = p % x_size;
                p /= x_size;
                r
            })
            .collect()
    };
    let encode = |t: &[usize]| -> usize {
        t.iter().rev().fold(0, |acc, &c| acc * x_size + c)
    };
    let act = (0..sn.order())
        .map(|g| {
            let perm = finitegroup::symmetric_one_line(n, g);
            let mut inv = vec![0; n];
            for (i, &pi) in perm.iter().enumerate() {
                inv[pi] = i;
            }
            (0..size)
                .map(|p| {
                    let t = decode(p);
                    let moved: Vec<usize> = (0..n).map(|j| t[inv[j]]).collect();
                    encode(&moved)
                })
                .collect()
        })
        .collect();
    GSet {
        group: sn,
        size,
        act,
    }
}

/// Freeness of a subset of group elements, with a fixed-point witness when
/// it fails.
pub fn is_free(x: &GSet, subset: &[usize]) -> Result<(), (usize, usize)> {
    for &s in subset {
        if s == 0 {
            continue;
        }
        if let Some(&p) = x.fixed_points(s).first() {
            return Err((s, p));
        }
    }
    Ok(())
}

/// Burnside consistency: sum_g |X^g| = |G| * #orbits.
pub fn burnside_checks(x: &GSet) -> bool {
    let total: usize = x.group.elements().map(|g| x.fixed_points(g).len()).sum();
    total == x.group.order() * x.orbits().len()
}

/// Equivariant line bundle data: one-dimensional fibers with chosen bases
/// and linearisation scalars l(g, x) : fiber(x) -> fiber(g.x) satisfying
/// l(hg, x) = l(h, g.x) l(g, x).
#[derive(Debug, Clone, PartialEq)]
pub struct LineBundle {
    pub scalars: Vec<Vec<Scalar>>, // [g][x]
}

impl LineBundle {
    pub fn trivial(ctx: &Field, gset: &GSet) -> LineBundle {
        LineBundle {
            scalars: vec![vec![Scalar::one(ctx); gset.size]; gset.group.order()],
        }
    }

    /// O tensored with a character: constant scalars chi(g).
    pub fn from_character(gset: &GSet, chi: &Character) -> LineBundle {
        LineBundle {
            scalars: (0..gset.group.order())
                .map(|g| vec![chi.value(g); gset.size])
                .collect(),
        }
    }

    pub fn validate(&self, gset: &GSet) -> Result<(), SpaceError> {
        let n = gset.group.order();
        for g in 0..n {
            for x in 0..gset.size {
                if self.scalars[g][x].is_zero() {
                    return Err(SpaceError::ZeroBundleScalar(g, x));
                }
            }
        }
        for x in 0..gset.size {
            if !self.scalars[0][x].is_one() {
                return Err(SpaceError::BundleLaw(0, 0, x));
            }
        }
        for g in 0..n {
            for h in 0..n {
                let hg = gset.group.mul(h, g);
                for x in 0..gset.size {
                    let lhs = self.scalars[hg][x].clone();
                    let rhs = &self.scalars[h][gset.act(g, x)] * &self.scalars[g][x];
                    if lhs != rhs {
                        return Err(SpaceError::BundleLaw(g, h, x));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn tensor(&self, other: &LineBundle) -> LineBundle {
        LineBundle {
            scalars: self
                .scalars
                .iter()
                .zip(&other.scalars)
                .map(|(r1, r2)| r1.iter().zip(r2).map(|(a, b)| a * b).collect())
                .collect(),
        }
    }

    pub fn inverse(&self) -> LineBundle {
        LineBundle {
            scalars: self
                .scalars
                .iter()
                .map(|r| r.iter().map(|s| s.inv()).collect())
                .collect(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.scalars
            .iter()
            .all(|row| row.iter().all(|s| s.is_one()))
    }

    /// Whether two equivariant line bundles are isomorphic: there must be a
    /// pointwise rescaling s with l'(g,x) = s(g.x) l(g,x) / s(x).
    pub fn isomorphic(&self, other: &LineBundle, gset: &GSet) -> bool {
        let ctx = self.scalars[0][0].ctx().clone();
        let mut s: Vec<Option<Scalar>> = vec![None; gset.size];
        for orbit in gset.orbits() {
            let x0 = orbit[0];
            s[x0] = Some(Scalar::one(&ctx));
            // propagate along the action, then check consistency
            let mut changed = true;
            while changed {
                changed = false;
                for g in gset.group.elements() {
                    for x in 0..gset.size {
                        if let Some(sx) = s[x].clone() {
                            let y = gset.act(g, x);
                            let val = &(&other.scalars[g][x] * &sx)
                                * &self.scalars[g][x].inv();
                            match &s[y] {
                                None => {
                                    s[y] = Some(val);
                                    changed = true;
                                }
                                Some(sy) => {
                                    if *sy != val {
                                        return false;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        true
    }
}

/// Formal Serre data: a dimension shift and an equivariant line bundle
/// standing in for the canonical bundle.  In the dimension-0 model this is
/// a decree, not geometry; reports must flag it.
#[derive(Debug, Clone, PartialEq)]
pub struct SerreData {
    pub dim: i32,
    pub omega: LineBundle,
}

/// A finite quotient stack [X/G], the desk-scale model of a smooth
/// projective stack.
#[derive(Debug)]
pub struct QuotientStack {
    pub gset: GSet,
    pub serre: Option<SerreData>,
    pub label: String,
}

pub type Stack = Arc<QuotientStack>;

impl PartialEq for QuotientStack {
    fn eq(&self, other: &Self) -> bool {
        self.gset == other.gset && self.serre == other.serre
    }
}

impl QuotientStack {
    pub fn new(gset: GSet, label: &str) -> Stack {
        Arc::new(QuotientStack {
            gset,
            serre: None,
            label: label.to_string(),
        })
    }

    pub fn with_serre(gset: GSet, serre: SerreData, label: &str) -> Result<Stack, SpaceError> {
        serre.omega.validate(&gset)?;
        Ok(Arc::new(QuotientStack {
            gset,
            serre: Some(serre),
            label: label.to_string(),
        }))
    }

    pub fn point(label: &str) -> Stack {
        QuotientStack::new(GSet::plain(1), label)
    }

    pub fn group(&self) -> &Group {
        &self.gset.group
    }
    pub fn size(&self) -> usize {
        self.gset.size
    }
    pub fn act(&self, g: usize, x: usize) -> usize {
        self.gset.act(g, x)
    }
    pub fn serre_dim(&self) -> i32 {
        self.serre.as_ref().map_or(0, |s| s.dim)
    }
    /// The canonical-bundle scalars; trivial when no Serre data is set.
    pub fn omega(&self, ctx: &Field) -> LineBundle {
        self.serre
            .as_ref()
            .map(|s| s.omega.clone())
            .unwrap_or_else(|| LineBundle::trivial(ctx, &self.gset))
    }
}

/// Product stack with the mixed-radix point and group encodings of
/// `gset_product`.
pub fn stack_product(x: &Stack, y: &Stack) -> Stack {
    let gset = gset_product(&x.gset, &y.gset);
    Arc::new(QuotientStack {
        gset,
        serre: None,
        label: format!("{}x{}", x.label, y.label),
    })
}

/// Decomposes a product-stack point into its factors.
pub fn split_point(x_size: usize, p: usize) -> (usize, usize) {
    (p % x_size, p / x_size)
}
pub fn join_point(x_size: usize, px: usize, py: usize) -> usize {
    px + x_size * py
}
/// Same for product-group elements (first factor fastest).
pub fn split_group(x_order: usize, g: usize) -> (usize, usize) {
    (g % x_order, g / x_order)
}
pub fn join_group(x_order: usize, gx: usize, gy: usize) -> usize {
    gx + x_order * gy
}

/// Stack automorphism: a pair (f, sigma) with f(g.x) = sigma(g).f(x).
/// Composition is componentwise; pairs are not identified modulo inner
/// automorphisms.
#[derive(Debug, Clone, PartialEq)]
pub struct StackIso {
    pub f: Vec<usize>,
    pub sigma: GroupIso,
}

impl StackIso {
    pub fn new(
        source: &GSet,
        target: &GSet,
        f: Vec<usize>,
        sigma: GroupIso,
    ) -> Result<Self, SpaceError> {
        assert_eq!(f.len(), source.size);
        let mut seen = vec![false; target.size];
        for &y in &f {
            if y >= target.size || seen[y] {
                return Err(SpaceError::NotPermutation(0));
            }
            seen[y] = true;
        }
        for g in source.group.elements() {
            for x in 0..source.size {
                if f[source.act(g, x)] != target.act(sigma.apply(g), f[x]) {
                    return Err(SpaceError::AutLaw(g, x));
                }
            }
        }
        Ok(StackIso { f, sigma })
    }

    pub fn identity(gset: &GSet) -> StackIso {
        StackIso {
            f: (0..gset.size).collect(),
            sigma: GroupIso::identity(&gset.group),
        }
    }

    pub fn apply(&self, x: usize) -> usize {
        self.f[x]
    }

    /// self . other (other applied first).
    pub fn compose(&self, other: &StackIso) -> StackIso {
        StackIso {
            f: other.f.iter().map(|&x| self.f[x]).collect(),
            sigma: self.sigma.compose(&other.sigma),
        }
    }

    pub fn inverse(&self) -> StackIso {
        let mut f = vec![0; self.f.len()];
        for (x, &y) in self.f.iter().enumerate() {
            f[y] = x;
        }
        StackIso {
            f,
            sigma: self.sigma.inverse(),
        }
    }
}

/// A Galois cover [X/U] -> [X/G] for a normal subgroup U of G: the deck
/// group is G/U acting on the total stack through coset representatives.
/// The torsor property is what holds for every such pair: fibers of the
/// coarse projection X/U -> X/G are exactly deck orbits, and the deck
/// action is by stack automorphisms.
#[derive(Debug)]
pub struct GaloisCover {
    pub x: GSet,
    pub u: Subgroup,
    pub total: Stack,
    pub base: Stack,
    /// Deck group G/U.
    pub deck: Group,
    /// Coset representatives indexed by deck elements (identity first).
    pub deck_reps: Vec<usize>,
    /// Deck elements as stack automorphisms of the total stack.
    pub deck_auts: Vec<StackIso>,
    /// Projection of G onto the deck group.
    pub proj: Vec<usize>,
    /// Whether the deck action on total-space orbit classes is free
    /// (cover without stacky fibers); reported, not required.
    pub coarse_free: bool,
}

/// Builds and validates the cover [X/U] -> [X/G].
pub fn galois_cover(x: &GSet, u: &Subgroup) -> Result<GaloisCover, SpaceError> {
    assert!(Arc::ptr_eq(&u.ambient, &x.group) || *u.ambient == *x.group);
    let (q, proj) = quotient(&x.group, u)?;
    // pick coset representatives compatible with the projection
    let mut deck_reps = vec![usize::MAX; q.order()];
    for g in 0..x.group.order() {
        if deck_reps[proj[g]] == usize::MAX {
            deck_reps[proj[g]] = g;
        }
    }
    let total_gset = x.restrict(u);
    let (ugroup, uelems) = u.as_group();
    let total = QuotientStack::new(total_gset.clone(), "total");
    let base = QuotientStack::new(x.clone(), "base");
    // deck automorphism for coset rep r: f = action of r, sigma = conj by r
    let mut deck_auts = Vec::new();
    for d in 0..q.order() {
        let r = deck_reps[d];
        let f: Vec<usize> = (0..x.size).map(|p| x.act(r, p)).collect();
        let upos = |g: usize| uelems.binary_search(&g).unwrap();
        let sigma_map: Vec<usize> = uelems
            .iter()
            .map(|&v| upos(x.group.mul(x.group.mul(r, v), x.group.inv(r))))
            .collect();
        let sigma = GroupIso::new(&ugroup, &ugroup, sigma_map)?;
        deck_auts.push(StackIso::new(&total_gset, &total_gset, f, sigma)?);
    }
    // fibers of X/U -> X/G are deck orbits
    let total_orbits = total_gset.orbits();
    let orbit_of = |p: usize| total_orbits.iter().position(|o| o.contains(&p)).unwrap();
    for base_orbit in x.orbits() {
        let mut fiber: Vec<usize> = base_orbit.iter().map(|&p| orbit_of(p)).collect();
        fiber.sort_unstable();
        fiber.dedup();
        // deck orbit of the first fiber component must be the whole fiber
        let mut reach: Vec<usize> = deck_auts
            .iter()
            .map(|a| orbit_of(a.apply(total_orbits[fiber[0]][0])))
            .collect();
        reach.sort_unstable();
        reach.dedup();
        if reach != fiber {
            return Err(SpaceError::CoverFibers(base_orbit[0]));
        }
    }
    // freeness of the deck action on coarse points (reported only)
    let mut coarse_free = true;
    'free: for d in 1..q.order() {
        for (oi, orbit) in total_orbits.iter().enumerate() {
            if orbit_of(deck_auts[d].apply(orbit[0])) == oi {
                coarse_free = false;
                break 'free;
            }
        }
    }
    Ok(GaloisCover {
        x: x.clone(),
        u: u.clone(),
        total,
        base,
        deck: q,
        deck_reps,
        deck_auts,
        proj,
        coarse_free,
    })
}

/// The cover induced by a subgroup of characters: [X/U] -> [X/G] with
/// U the intersection of the kernels.  The deck group G/U is canonically
/// dual to the inducing character group; the pairing deck x H -> mu is
/// returned through `deck_pairing`.
pub struct CharacterCover {
    pub cover: GaloisCover,
    pub chars: Vec<Character>,
}

impl CharacterCover {
    /// Value chi(r_d) pairing a deck element with an inducing character.
    pub fn deck_pairing(&self, d: usize, chi: usize) -> Scalar {
        self.chars[chi].value(self.cover.deck_reps[d])
    }

    /// The character of the deck group induced by chars[chi].
    pub fn deck_character(&self, chi: usize) -> Character {
        let q = &self.cover.deck;
        let exps = (0..q.order())
            .map(|d| self.chars[chi].exponent(self.cover.deck_reps[d]))
            .collect();
        Character::new(q, self.chars[chi].ctx(), exps).expect("character factors through deck")
    }
}

pub fn cover_from_characters(
    x: &GSet,
    chars: &[Character],
) -> Result<CharacterCover, SpaceError> {
    // U = intersection of kernels
    let g = &x.group;
    let elements: Vec<usize> = g
        .elements()
        .filter(|&e| chars.iter().all(|c| c.exponent(e) == 0))
        .collect();
    let u = Subgroup {
        ambient: g.clone(),
        elements,
    };
    let cover = galois_cover(x, &u)?;
    // close the character set under products so the identification
    // deck^ = H is on the nose
    let ctx = chars
        .first()
        .map(|c| c.ctx().clone())
        .unwrap_or_else(|| crate::cyclofield::field(1).unwrap());
    let mut closed: Vec<Character> = vec![Character::trivial(g, &ctx)];
    let mut frontier: Vec<Character> = chars.to_vec();
    while let Some(c) = frontier.pop() {
        if !closed.iter().any(|d| d == &c) {
            for e in closed.clone() {
                frontier.push(c.mul(&e));
            }
            closed.push(c);
        }
    }
    closed.sort_by_key(|c| (0..g.order()).map(|e| c.exponent(e)).collect::<Vec<_>>());
    Ok(CharacterCover {
        cover,
        chars: closed,
    })
}

/// The Kummer groupoid [A / inversion] of a finite abelian group.
pub struct KummerGroupoid {
    pub stack: Stack,
    /// 2-torsion subgroup = fixed locus of the inversion.
    pub fixed: Vec<usize>,
    /// Inversion is trivial on 2-torsion groups; such quotients are flagged.
    pub degenerate: bool,
}

pub fn kummer_groupoid(a: &Group) -> Result<KummerGroupoid, SpaceError> {
    if !a.is_abelian() {
        return Err(SpaceError::NotAbelian);
    }
    let z2 = cyclic(2);
    let inv_perm: Vec<usize> = (0..a.order()).map(|x| a.inv(x)).collect();
    let act = vec![(0..a.order()).collect::<Vec<usize>>(), inv_perm.clone()];
    let gset = GSet::new(&z2, a.order(), act)?;
    let fixed = gset.fixed_points(1);
    let degenerate = fixed.len() == a.order();
    Ok(KummerGroupoid {
        stack: QuotientStack::new(gset, &format!("Kummer[{}]", a.label())),
        fixed,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclofield::field;
    use crate::finitegroup::{characters, symmetric, symmetric_one_line};

    fn s3_natural() -> GSet {
        let s3 = symmetric(3);
        let act = (0..6).map(|g| symmetric_one_line(3, g)).collect();
        GSet::new(&s3, 3, act).unwrap()
    }

    #[test]
    fn fixed_locus_examples() {
        let x = s3_natural();
        // find a transposition: an element of order 2
        let t = x.group.elements().find(|&g| x.group.element_order(g) == 2).unwrap();
        let fl = fixed_locus(&x, t);
        assert_eq!(fl.points.len(), 1, "a transposition fixes one point");
        assert_eq!(fl.centralizer.order(), 2);

        // identity fixes everything
        assert_eq!(fixed_locus(&x, 0).points.len(), 3);

        // free translation action: empty fixed locus
        let z2 = cyclic(2);
        let reg = GSet::regular(&z2);
        assert!(fixed_locus(&reg, 1).points.is_empty());
    }

    #[test]
    fn product_and_power() {
        let a = GSet::plain(2);
        let b = GSet::plain(3);
        assert_eq!(gset_product(&a, &b).size, 6);

        let p = power_sym(2, 3);
        assert_eq!(p.size, 8);
        assert!(burnside_checks(&p));
        // fixed locus of a transposition in S3 on X^3 has size |X|^2 = 4
        let t = p.group.elements().find(|&g| p.group.element_order(g) == 2).unwrap();
        assert_eq!(p.fixed_points(t).len(), 4);

        // power_sym over a point is a point with trivial action
        let pt = power_sym(1, 3);
        assert_eq!(pt.size, 1);
        assert!(pt.group.elements().all(|g| pt.act(g, 0) == 0));
    }

    #[test]
    fn freeness_witnesses() {
        let z2 = cyclic(2);
        let reg = GSet::regular(&z2);
        assert!(is_free(&reg, &[1]).is_ok());

        let pt = GSet::trivial_action(&z2, 1);
        assert_eq!(is_free(&pt, &[1]), Err((1, 0)));

        // transpositions on X^n fix diagonal-compatible tuples
        let p = power_sym(2, 3);
        let transpositions: Vec<usize> = p
            .group
            .elements()
            .filter(|&g| p.group.element_order(g) == 2)
            .collect();
        assert!(is_free(&p, &transpositions).is_err());
    }

    #[test]
    fn burnside_on_catalog() {
        assert!(burnside_checks(&s3_natural()));
        assert!(burnside_checks(&GSet::regular(&cyclic(4))));
        assert!(burnside_checks(&power_sym(2, 2)));
    }

    #[test]
    fn conjugate_fixed_loci_match() {
        // fixed_locus(X, h g h^-1) = h . fixed_locus(X, g)
        let x = s3_natural();
        let g = &x.group;
        for a in g.elements() {
            for h in g.elements() {
                let conj = g.mul(g.mul(h, a), g.inv(h));
                let fa = x.fixed_points(a);
                let mut moved: Vec<usize> = fa.iter().map(|&p| x.act(h, p)).collect();
                moved.sort_unstable();
                assert_eq!(moved, x.fixed_points(conj));
            }
        }
    }

    #[test]
    fn line_bundle_laws() {
        let k = field(2).unwrap();
        let z2 = cyclic(2);
        let x = GSet::trivial_action(&z2, 2);
        let triv = LineBundle::trivial(&k, &x);
        assert!(triv.validate(&x).is_ok());
        let sgn = characters(&z2, &k).unwrap().remove(1);
        let l = LineBundle::from_character(&x, &sgn);
        assert!(l.validate(&x).is_ok());
        assert!(!l.is_trivial());
        assert!(l.tensor(&l).is_trivial());
        assert!(!l.isomorphic(&triv, &x));
        assert!(l.isomorphic(&l, &x));
        // on a free orbit the character bundle becomes isomorphic to O
        let reg = GSet::regular(&z2);
        let lf = LineBundle::from_character(&reg, &sgn);
        let trivf = LineBundle::trivial(&k, &reg);
        assert!(lf.isomorphic(&trivf, &reg));
    }

    #[test]
    fn covers_from_characters() {
        let k = field(2).unwrap();
        // S3 acting naturally, H = <sign>: cover [X/A3] with deck Z/2
        let x = s3_natural();
        let sign = characters(&x.group, &k).unwrap().remove(1);
        let cc = cover_from_characters(&x, &[sign]).unwrap();
        assert_eq!(cc.cover.u.order(), 3, "kernel of sign = A3");
        assert_eq!(cc.cover.deck.order(), 2);
        assert_eq!(cc.chars.len(), 2);
        // deck / character pairing is nondegenerate
        let nontrivial = (0..2).find(|&i| !cc.chars[i].is_trivial()).unwrap();
        assert_eq!(cc.deck_pairing(1, nontrivial), Scalar::from_int(&k, -1));

        // trivial character set: identity cover
        let cc = cover_from_characters(&x, &[]).unwrap();
        assert_eq!(cc.cover.deck.order(), 1);

        // Z/2 on a point with <sign>: cover pt -> [pt/Z2], deck Z/2
        let z2 = cyclic(2);
        let pt = GSet::trivial_action(&z2, 1);
        let sgn = characters(&z2, &k).unwrap().remove(1);
        let cc = cover_from_characters(&pt, &[sgn]).unwrap();
        assert_eq!(cc.cover.u.order(), 1);
        assert_eq!(cc.cover.deck.order(), 2);
        assert!(!cc.cover.coarse_free, "point cover has a stacky fiber");
    }

    #[test]
    fn kummer_groupoids() {
        let a3 = cyclic(3);
        let km = kummer_groupoid(&a3).unwrap();
        assert_eq!(km.stack.size(), 3);
        assert_eq!(km.fixed, vec![0], "inversion fixes only 0");
        assert!(!km.degenerate);
        // orbit count (|A| + |A[2]|) / 2 = 2 for Z/3, 3 for Z/5
        assert_eq!(km.stack.gset.orbits().len(), 2);
        let km5 = kummer_groupoid(&cyclic(5)).unwrap();
        assert_eq!(km5.stack.gset.orbits().len(), 3);
        assert_eq!(km5.fixed, vec![0]);

        // Z/2: inversion is the identity, degenerate
        let km2 = kummer_groupoid(&cyclic(2)).unwrap();
        assert!(km2.degenerate);

        assert!(kummer_groupoid(&symmetric(3)).is_err());
    }

    #[test]
    fn stack_iso_composition() {
        let z4 = cyclic(4);
        let reg = GSet::regular(&z4);
        // inversion as a stack automorphism: f(x) = -x, sigma(g) = -g
        let f: Vec<usize> = (0..4).map(|x| z4.inv(x)).collect();
        let sigma = GroupIso::new(&z4, &z4, (0..4).map(|g| z4.inv(g)).collect()).unwrap();
        let iota = StackIso::new(&reg, &reg, f, sigma).unwrap();
        let sq = iota.compose(&iota);
        assert_eq!(sq, StackIso::identity(&reg));
    }
}
