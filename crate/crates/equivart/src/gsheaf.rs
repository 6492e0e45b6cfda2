//! Graded equivariant sheaves on finite G-sets: the semisimple model of
//! the bounded derived category of a quotient stack.
//!
//! An object is a Z-graded sheaf with chosen standard bases, a
//! linearisation over the stack group (making it an object of Coh([X/G])),
//! and optionally a second linearisation over an acting subgroup of
//! A(X) = Pic x| Aut.  All functors are strict on the chosen bases, so
//! isomorphisms are explicit matrices and every categorical identity is an
//! exact matrix identity.
//!
//! Conventions (used consistently across the crate):
//! * `mul(a, b)` is a.b and actions are left actions: act(mul(a,b), x) =
//!   act(a, act(b, x)).
//! * `g^*E` has fiber E_(g.x) at x, so g^* h^* = (hg)^*.
//! * a linearisation is lam_g(x): E_x -> E_(g.x) with lam_e = id and
//!   lam_(hg)(x) = lam_h(g.x) . lam_g(x).
//! * an A(X)-element h = (L, phi) with phi = (f, sigma) pulls back
//!   objects by (h^*E)_x = E_(f x) and transforms linearisations by
//!   (h^*lam)_g(x) = l_h(g, x) . lam_(sigma g)(f x).

use crate::cyclofield::{Field, Scalar};
use crate::finitegroup::{cyclic, Character, Group};
use crate::gspace::{GSet, LineBundle, Stack, StackIso};
use crate::linalg::Mat;
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SheafError {
    #[error("stack mismatch: {0} vs {1}")]
    StackMismatch(String, String),
    #[error("block shape mismatch at point {0}, degree {1}")]
    BlockShape(usize, i32),
    #[error("linearisation of the identity is not the identity at ({0}, {1})")]
    IdentityLin(usize, i32),
    #[error("linearisation cocycle fails for ({g}, {h}) at point {x}")]
    LinCocycle { g: usize, h: usize, x: usize },
    #[error("linearisation block at element {0}, point {1} is not invertible")]
    LinNotInvertible(usize, usize),
    #[error("outer linearisation is not equivariant for inner element {g} at point {x}")]
    MixedEquivariance { g: usize, x: usize },
    #[error("acting group is not strictly multiplicative at pair ({0}, {1})")]
    ActionNotStrict(usize, usize),
    #[error("map is not equivariant")]
    NotEquivariant,
    #[error("endomorphism is not idempotent")]
    NotIdempotent,
    #[error("object is not invariant under element {0}")]
    NotInvariant(usize),
    #[error("expected a degree-0 map, got shift {0}")]
    NotDegreeZero(i32),
}

pub type Dims = BTreeMap<(usize, i32), usize>;

fn same_stack(a: &Stack, b: &Stack) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Graded sheaf on the underlying set of a stack (equivariance is carried
/// separately).
#[derive(Debug, Clone)]
pub struct Sheaf {
    pub stack: Stack,
    dims: Dims,
}

impl PartialEq for Sheaf {
    fn eq(&self, other: &Self) -> bool {
        same_stack(&self.stack, &other.stack) && self.dims == other.dims
    }
}

impl Sheaf {
    pub fn new(stack: &Stack, dims: Dims) -> Sheaf {
        let dims: Dims = dims.into_iter().filter(|&(_, d)| d > 0).collect();
        for &(x, _) in dims.keys() {
            assert!(x < stack.size(), "point out of range");
        }
        Sheaf {
            stack: stack.clone(),
            dims,
        }
    }

    pub fn zero(stack: &Stack) -> Sheaf {
        Sheaf {
            stack: stack.clone(),
            dims: Dims::new(),
        }
    }

    /// Rank-1 sheaf at one point in one degree.
    pub fn skyscraper(stack: &Stack, x: usize, deg: i32) -> Sheaf {
        let mut dims = Dims::new();
        dims.insert((x, deg), 1);
        Sheaf::new(stack, dims)
    }

    /// Rank-1 everywhere in degree 0.
    pub fn structure(stack: &Stack) -> Sheaf {
        let mut dims = Dims::new();
        for x in 0..stack.size() {
            dims.insert((x, 0), 1);
        }
        Sheaf::new(stack, dims)
    }

    pub fn dim(&self, x: usize, deg: i32) -> usize {
        *self.dims.get(&(x, deg)).unwrap_or(&0)
    }

    pub fn support(&self) -> impl Iterator<Item = (&(usize, i32), &usize)> {
        self.dims.iter()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn degrees(&self) -> Vec<i32> {
        let mut ds: Vec<i32> = self.dims.keys().map(|&(_, d)| d).collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    /// E[m]: dims_(E[m])(x, j) = dims_E(x, j + m).
    pub fn shift(&self, m: i32) -> Sheaf {
        Sheaf {
            stack: self.stack.clone(),
            dims: self
                .dims
                .iter()
                .map(|(&(x, d), &r)| ((x, d - m), r))
                .collect(),
        }
    }

    /// Dual: dims swap degree sign.
    pub fn dual(&self) -> Sheaf {
        Sheaf {
            stack: self.stack.clone(),
            dims: self
                .dims
                .iter()
                .map(|(&(x, d), &r)| ((x, -d), r))
                .collect(),
        }
    }

    pub fn direct_sum(&self, other: &Sheaf) -> Sheaf {
        assert!(same_stack(&self.stack, &other.stack));
        let mut dims = self.dims.clone();
        for (&k, &r) in &other.dims {
            *dims.entry(k).or_insert(0) += r;
        }
        Sheaf {
            stack: self.stack.clone(),
            dims,
        }
    }

    /// Pointwise tensor with total-degree convolution.  The fiber at
    /// (x, i) is ordered by the source degree i1 of the first factor,
    /// Kronecker within each (i1, i2 = i - i1) pair.
    pub fn tensor(&self, other: &Sheaf) -> Sheaf {
        assert!(same_stack(&self.stack, &other.stack));
        let mut dims = Dims::new();
        for (&(x, i1), &r1) in &self.dims {
            for (&(y, i2), &r2) in &other.dims {
                if x == y {
                    *dims.entry((x, i1 + i2)).or_insert(0) += r1 * r2;
                }
            }
        }
        Sheaf {
            stack: self.stack.clone(),
            dims: dims.into_iter().filter(|&(_, d)| d > 0).collect(),
        }
    }

    /// Offset of the (i1, r1, r2) component inside the tensor fiber at
    /// (x, i1 + i2).
    fn tensor_offset(&self, other: &Sheaf, x: usize, i1: i32, i2: i32) -> usize {
        let mut off = 0;
        for (&(y, j1), &r1) in &self.dims {
            if y != x {
                continue;
            }
            if j1 < i1 {
                let r2 = other.dim(x, i1 + i2 - j1);
                off += r1 * r2;
            }
        }
        off
    }

    /// Pullback along a point map f (fiber at x is the fiber at f(x)).
    pub fn pull_points(&self, target_stack: &Stack, f: &[usize]) -> Sheaf {
        let mut dims = Dims::new();
        for x in 0..target_stack.size() {
            for (&(y, d), &r) in &self.dims {
                if y == f[x] && r > 0 {
                    dims.insert((x, d), r);
                }
            }
        }
        Sheaf {
            stack: target_stack.clone(),
            dims,
        }
    }
}

/// Transport family: per group element, blocks (x, i) -> Mat taking the
/// fiber at (x, i) to the fiber at (m(x), i) for the element's point map.
pub type Transport = Vec<BTreeMap<(usize, i32), Mat>>;

/// Degree-`shift` morphism E -> F[shift]; the block at (x, i) maps
/// E_(x,i) -> F_(x, i+shift).
#[derive(Debug, Clone)]
pub struct SMap {
    pub src: Sheaf,
    pub tgt: Sheaf,
    pub shift: i32,
    blocks: BTreeMap<(usize, i32), Mat>,
}

impl PartialEq for SMap {
    fn eq(&self, other: &Self) -> bool {
        if self.src != other.src || self.tgt != other.tgt || self.shift != other.shift {
            return false;
        }
        for (&(x, i), _) in self.src.support() {
            if self.block(x, i) != other.block(x, i) {
                return false;
            }
        }
        true
    }
}

impl SMap {
    pub fn zero(ctx: &Field, src: &Sheaf, tgt: &Sheaf, shift: i32) -> SMap {
        let _ = ctx;
        SMap {
            src: src.clone(),
            tgt: tgt.clone(),
            shift,
            blocks: BTreeMap::new(),
        }
    }

    pub fn identity(ctx: &Field, e: &Sheaf) -> SMap {
        let mut blocks = BTreeMap::new();
        for (&(x, i), &r) in e.support() {
            blocks.insert((x, i), Mat::identity(ctx, r));
        }
        SMap {
            src: e.clone(),
            tgt: e.clone(),
            shift: 0,
            blocks,
        }
    }

    pub fn from_blocks(
        ctx: &Field,
        src: &Sheaf,
        tgt: &Sheaf,
        shift: i32,
        blocks: BTreeMap<(usize, i32), Mat>,
    ) -> Result<SMap, SheafError> {
        for (&(x, i), m) in &blocks {
            if m.rows != tgt.dim(x, i + shift) || m.cols != src.dim(x, i) {
                return Err(SheafError::BlockShape(x, i));
            }
        }
        let _ = ctx;
        Ok(SMap {
            src: src.clone(),
            tgt: tgt.clone(),
            shift,
            blocks,
        })
    }

    pub fn ctx(&self) -> Field {
        self.blocks
            .values()
            .next()
            .map(|m| m.ctx().clone())
            .unwrap_or_else(|| crate::cyclofield::field(1).unwrap())
    }

    /// The block at (x, i), materializing zeros of the right shape.
    pub fn block_with(&self, ctx: &Field, x: usize, i: i32) -> Mat {
        match self.blocks.get(&(x, i)) {
            Some(m) => m.clone(),
            None => Mat::zeros(ctx, self.tgt.dim(x, i + self.shift), self.src.dim(x, i)),
        }
    }

    fn block(&self, x: usize, i: i32) -> Option<&Mat> {
        self.blocks.get(&(x, i))
    }

    pub fn set_block(&mut self, x: usize, i: i32, m: Mat) {
        assert_eq!(m.rows, self.tgt.dim(x, i + self.shift));
        assert_eq!(m.cols, self.src.dim(x, i));
        self.blocks.insert((x, i), m);
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|m| m.is_zero())
    }

    /// self . other (other applied first); shifts add.
    pub fn compose(&self, ctx: &Field, other: &SMap) -> SMap {
        let mut blocks = BTreeMap::new();
        for (&(x, i), _) in other.src.support() {
            let first = other.block_with(ctx, x, i);
            let second = self.block_with(ctx, x, i + other.shift);
            let m = second.mul(&first);
            if !m.is_zero() {
                blocks.insert((x, i), m);
            }
        }
        SMap {
            src: other.src.clone(),
            tgt: self.tgt.clone(),
            shift: self.shift + other.shift,
            blocks,
        }
    }

    pub fn add(&self, ctx: &Field, other: &SMap) -> SMap {
        assert_eq!(self.shift, other.shift);
        let mut blocks = BTreeMap::new();
        for (&(x, i), _) in self.src.support() {
            let m = self.block_with(ctx, x, i).add(&other.block_with(ctx, x, i));
            if !m.is_zero() {
                blocks.insert((x, i), m);
            }
        }
        SMap {
            src: self.src.clone(),
            tgt: self.tgt.clone(),
            shift: self.shift,
            blocks,
        }
    }

    pub fn scale(&self, s: &Scalar) -> SMap {
        SMap {
            src: self.src.clone(),
            tgt: self.tgt.clone(),
            shift: self.shift,
            blocks: self
                .blocks
                .iter()
                .map(|(&k, m)| (k, m.scale(s)))
                .collect(),
        }
    }

    /// All blocks square and invertible (including implicit zero blocks,
    /// which force matching dims).
    pub fn is_iso(&self) -> bool {
        // dims must match under the shift in both directions
        for (&(x, i), &r) in self.src.support() {
            if self.tgt.dim(x, i + self.shift) != r {
                return false;
            }
        }
        for (&(x, j), &r) in self.tgt.support() {
            if self.src.dim(x, j - self.shift) != r {
                return false;
            }
        }
        for (&(x, i), _) in self.src.support() {
            match self.block(x, i) {
                Some(m) => {
                    if !m.is_invertible() {
                        return false;
                    }
                }
                None => return false,
            }
        }
        true
    }

    pub fn inverse(&self, ctx: &Field) -> Option<SMap> {
        let _ = ctx;
        if !self.is_iso() {
            return None;
        }
        let mut blocks = BTreeMap::new();
        for (&(x, i), m) in &self.blocks {
            if m.rows > 0 {
                blocks.insert((x, i + self.shift), m.inverse()?);
            }
        }
        Some(SMap {
            src: self.tgt.clone(),
            tgt: self.src.clone(),
            shift: -self.shift,
            blocks,
        })
    }

    /// Reindex as a map E[m] -> F[m] (same blocks, shifted keys).
    pub fn shift_both(&self, m: i32) -> SMap {
        SMap {
            src: self.src.shift(m),
            tgt: self.tgt.shift(m),
            shift: self.shift,
            blocks: self
                .blocks
                .iter()
                .map(|(&(x, i), b)| ((x, i - m), b.clone()))
                .collect(),
        }
    }
}

/// Element of A(X) = Pic x| Aut: a line bundle with chosen linearisation
/// scalars and a stack automorphism.
#[derive(Debug, Clone, PartialEq)]
pub struct AElement {
    pub lb: LineBundle,
    pub aut: StackIso,
}

impl AElement {
    pub fn identity(ctx: &Field, gset: &GSet) -> AElement {
        AElement {
            lb: LineBundle::trivial(ctx, gset),
            aut: StackIso::identity(gset),
        }
    }

    pub fn from_aut(ctx: &Field, gset: &GSet, aut: StackIso) -> AElement {
        AElement {
            lb: LineBundle::trivial(ctx, gset),
            aut,
        }
    }

    pub fn from_line_bundle(gset: &GSet, lb: LineBundle) -> AElement {
        AElement {
            lb,
            aut: StackIso::identity(gset),
        }
    }

    /// Product (L, phi) . (K, psi) = (psi^* L tensor K, phi . psi).
    pub fn mul(&self, other: &AElement, gset: &GSet) -> AElement {
        let pulled = LineBundle {
            scalars: (0..gset.group.order())
                .map(|g| {
                    (0..gset.size)
                        .map(|x| {
                            self.lb.scalars[other.aut.sigma.apply(g)][other.aut.apply(x)].clone()
                        })
                        .collect()
                })
                .collect(),
        };
        AElement {
            lb: pulled.tensor(&other.lb),
            aut: self.aut.compose(&other.aut),
        }
    }

    /// The involution c: inverts the line bundle component.
    pub fn c(&self) -> AElement {
        AElement {
            lb: self.lb.inverse(),
            aut: self.aut.clone(),
        }
    }

    /// p(h) = (O, phi): forgets the line bundle.
    pub fn p(&self, ctx: &Field, gset: &GSet) -> AElement {
        AElement {
            lb: LineBundle::trivial(ctx, gset),
            aut: self.aut.clone(),
        }
    }
}

/// A finite group acting strictly on Coh([X/G]) through A(X)-elements.
#[derive(Debug)]
pub struct ActingGroupData {
    pub stack: Stack,
    pub group: Group,
    pub elements: Vec<AElement>,
    pub ctx: Field,
}

pub type ActingGroup = Arc<ActingGroupData>;

impl PartialEq for ActingGroupData {
    fn eq(&self, other: &Self) -> bool {
        same_stack(&self.stack, &other.stack)
            && *self.group == *other.group
            && self.elements == other.elements
    }
}

impl ActingGroupData {
    pub fn new(
        ctx: &Field,
        stack: &Stack,
        group: &Group,
        elements: Vec<AElement>,
    ) -> Result<ActingGroup, SheafError> {
        assert_eq!(elements.len(), group.order());
        let gset = &stack.gset;
        let idty = AElement::identity(ctx, gset);
        if elements[0] != idty {
            return Err(SheafError::ActionNotStrict(0, 0));
        }
        for a in 0..group.order() {
            for b in 0..group.order() {
                let prod = elements[a].mul(&elements[b], gset);
                if prod != elements[group.mul(a, b)] {
                    return Err(SheafError::ActionNotStrict(a, b));
                }
            }
        }
        for el in &elements {
            el.lb
                .validate(gset)
                .map_err(|_| SheafError::ActionNotStrict(0, 0))?;
        }
        Ok(Arc::new(ActingGroupData {
            stack: stack.clone(),
            group: group.clone(),
            elements,
            ctx: ctx.clone(),
        }))
    }

    pub fn trivial(ctx: &Field, stack: &Stack) -> ActingGroup {
        let g = cyclic(1);
        Arc::new(ActingGroupData {
            stack: stack.clone(),
            group: g.clone(),
            elements: vec![AElement::identity(ctx, &stack.gset)],
            ctx: ctx.clone(),
        })
    }

    pub fn is_trivial(&self) -> bool {
        self.group.order() == 1
    }

    /// Whether the subgroup is c-invariant (closed under inverting the
    /// line-bundle part).
    pub fn is_c_invariant(&self) -> bool {
        self.elements
            .iter()
            .all(|el| self.elements.iter().any(|f| *f == el.c()))
    }

    /// Index of c(h) in the element list, when present.
    pub fn c_index(&self, h: usize) -> Option<usize> {
        let c = self.elements[h].c();
        self.elements.iter().position(|f| *f == c)
    }

    pub fn point_map(&self, h: usize) -> &[usize] {
        &self.elements[h].aut.f
    }
    pub fn sigma(&self, h: usize, g: usize) -> usize {
        self.elements[h].aut.sigma.apply(g)
    }
    pub fn scalar(&self, h: usize, g: usize, x: usize) -> &Scalar {
        &self.elements[h].lb.scalars[g][x]
    }
}

/// Object of Coh([X/G]): a graded sheaf with a linearisation over the
/// stack group.
#[derive(Debug, Clone, PartialEq)]
pub struct EqSheaf {
    pub sheaf: Sheaf,
    /// lam[g] block at (x, i): E_(x,i) -> E_(g.x, i).
    pub lam: Transport,
}

impl EqSheaf {
    /// Object on a stack with trivial group.
    pub fn on_plain(ctx: &Field, sheaf: Sheaf) -> EqSheaf {
        assert_eq!(sheaf.stack.group().order(), 1);
        let lam = vec![sheaf
            .support()
            .map(|(&(x, i), &r)| ((x, i), Mat::identity(ctx, r)))
            .collect()];
        EqSheaf { sheaf, lam }
    }

    pub fn validate(&self, ctx: &Field) -> Result<(), SheafError> {
        let stack = &self.sheaf.stack;
        let g = stack.group();
        assert_eq!(self.lam.len(), g.order());
        for (&(x, i), &r) in self.sheaf.support() {
            // identity component
            let id = transport_block(ctx, &self.lam, 0, &self.sheaf, x, i, |_, p| p);
            if id != Mat::identity(ctx, r) {
                return Err(SheafError::IdentityLin(x, i));
            }
        }
        // shapes + invertibility
        for gg in g.elements() {
            for (&(x, i), &r) in self.sheaf.support() {
                let b = self.lam_block(ctx, gg, x, i);
                if b.rows != self.sheaf.dim(stack.act(gg, x), i) || b.cols != r {
                    return Err(SheafError::BlockShape(x, i));
                }
                if !b.is_invertible() {
                    return Err(SheafError::LinNotInvertible(gg, x));
                }
            }
        }
        // cocycle: lam_(hg)(x) = lam_h(g.x) lam_g(x)
        for h in g.elements() {
            for gg in g.elements() {
                let hg = g.mul(h, gg);
                for (&(x, i), _) in self.sheaf.support() {
                    let lhs = self.lam_block(ctx, hg, x, i);
                    let rhs = self
                        .lam_block(ctx, h, stack.act(gg, x), i)
                        .mul(&self.lam_block(ctx, gg, x, i));
                    if lhs != rhs {
                        return Err(SheafError::LinCocycle { g: gg, h, x });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn lam_block(&self, ctx: &Field, g: usize, x: usize, i: i32) -> Mat {
        match self.lam[g].get(&(x, i)) {
            Some(m) => m.clone(),
            None => Mat::zeros(
                ctx,
                self.sheaf.dim(self.sheaf.stack.act(g, x), i),
                self.sheaf.dim(x, i),
            ),
        }
    }

    pub fn zero(stack: &Stack) -> EqSheaf {
        EqSheaf {
            sheaf: Sheaf::zero(stack),
            lam: vec![BTreeMap::new(); stack.group().order()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sheaf.is_zero()
    }

    /// Structure sheaf with the trivial (identity) linearisation.
    pub fn structure(ctx: &Field, stack: &Stack) -> EqSheaf {
        let sheaf = Sheaf::structure(stack);
        let g = stack.group();
        let lam = (0..g.order())
            .map(|gg| {
                let mut blocks = BTreeMap::new();
                for x in 0..stack.size() {
                    blocks.insert((x, 0), Mat::identity(ctx, 1));
                }
                let _ = gg;
                blocks
            })
            .collect();
        EqSheaf { sheaf, lam }
    }

    /// Skyscraper at a point whose stabilizer acts through a character of
    /// the stabilizer (given as scalars per stabilizer element); for a
    /// free orbit point pass the empty default.  The object is supported
    /// on the whole orbit.
    pub fn skyscraper_orbit(
        ctx: &Field,
        stack: &Stack,
        x0: usize,
        deg: i32,
    ) -> EqSheaf {
        // induced from the trivial character of the stabilizer: fiber K at
        // each orbit point, transport = identity scalars
        let g = stack.group();
        let orbit: Vec<usize> = {
            let mut o: Vec<usize> = g.elements().map(|gg| stack.act(gg, x0)).collect();
            o.sort_unstable();
            o.dedup();
            o
        };
        let mut dims = Dims::new();
        for &x in &orbit {
            dims.insert((x, deg), 1);
        }
        let sheaf = Sheaf::new(stack, dims);
        let lam = (0..g.order())
            .map(|gg| {
                let mut blocks = BTreeMap::new();
                for &x in &orbit {
                    blocks.insert((x, deg), Mat::identity(ctx, 1));
                }
                let _ = gg;
                blocks
            })
            .collect();
        EqSheaf { sheaf, lam }
    }

    pub fn shift(&self, m: i32) -> EqSheaf {
        EqSheaf {
            sheaf: self.sheaf.shift(m),
            lam: self
                .lam
                .iter()
                .map(|blocks| {
                    blocks
                        .iter()
                        .map(|(&(x, i), b)| ((x, i - m), b.clone()))
                        .collect()
                })
                .collect(),
        }
    }

    /// Fiberwise dual with inverse-transpose transport.
    pub fn dual(&self) -> EqSheaf {
        EqSheaf {
            sheaf: self.sheaf.dual(),
            lam: self
                .lam
                .iter()
                .map(|blocks| {
                    blocks
                        .iter()
                        .map(|(&(x, i), b)| {
                            ((x, -i), b.inverse().expect("linearisation invertible").transpose())
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn direct_sum(&self, ctx: &Field, other: &EqSheaf) -> EqSheaf {
        let sheaf = self.sheaf.direct_sum(&other.sheaf);
        let stack = &self.sheaf.stack;
        let g = stack.group();
        let lam = (0..g.order())
            .map(|gg| {
                let mut blocks = BTreeMap::new();
                for (&(x, i), _) in sheaf.support() {
                    let a = self.lam_block(ctx, gg, x, i);
                    let b = other.lam_block(ctx, gg, x, i);
                    blocks.insert((x, i), a.direct_sum(&b));
                }
                blocks
            })
            .collect();
        EqSheaf { sheaf, lam }
    }

    pub fn tensor(&self, ctx: &Field, other: &EqSheaf) -> EqSheaf {
        let sheaf = self.sheaf.tensor(&other.sheaf);
        let stack = &self.sheaf.stack;
        let g = stack.group();
        let lam = (0..g.order())
            .map(|gg| {
                let mut blocks: BTreeMap<(usize, i32), Mat> = BTreeMap::new();
                for (&(x, i), &r) in sheaf.support() {
                    let gx = stack.act(gg, x);
                    let rows = sheaf.dim(gx, i);
                    let mut m = Mat::zeros(ctx, rows, r);
                    // fill blockwise over (i1, i2) splits
                    for (&(y, i1), &r1) in self.sheaf.support() {
                        if y != x {
                            continue;
                        }
                        let i2 = i - i1;
                        let r2 = other.sheaf.dim(x, i2);
                        if r2 == 0 {
                            continue;
                        }
                        let col_off = self.sheaf.tensor_offset(&other.sheaf, x, i1, i2);
                        let row_off = self.sheaf.tensor_offset(&other.sheaf, gx, i1, i2);
                        let k = self
                            .lam_block(ctx, gg, x, i1)
                            .kron(&other.lam_block(ctx, gg, x, i2));
                        let _ = r1;
                        for rr in 0..k.rows {
                            for cc in 0..k.cols {
                                m.set(row_off + rr, col_off + cc, k.at(rr, cc).clone());
                            }
                        }
                    }
                    if !m.is_zero() || (rows > 0 && r > 0) {
                        blocks.insert((x, i), m);
                    }
                }
                blocks
            })
            .collect();
        EqSheaf { sheaf, lam }
    }

    /// Inner twist by an equivariant line bundle: scales the
    /// linearisation by the bundle scalars.
    pub fn twist_line_bundle(&self, lb: &LineBundle) -> EqSheaf {
        EqSheaf {
            sheaf: self.sheaf.clone(),
            lam: self
                .lam
                .iter()
                .enumerate()
                .map(|(g, blocks)| {
                    blocks
                        .iter()
                        .map(|(&(x, i), m)| ((x, i), m.scale(&lb.scalars[g][x])))
                        .collect()
                })
                .collect(),
        }
    }

    /// Pullback along an A(X)-element: underlying fiber at x becomes the
    /// fiber at f(x); the linearisation picks up the sigma-twist and the
    /// bundle scalars.
    pub fn pull_a_element(&self, ctx: &Field, el: &AElement) -> EqSheaf {
        let stack = &self.sheaf.stack;
        let g = stack.group();
        let f = &el.aut.f;
        let mut dims = Dims::new();
        for x in 0..stack.size() {
            for (&(y, d), &r) in self.sheaf.support() {
                if y == f[x] {
                    dims.insert((x, d), r);
                }
            }
        }
        let sheaf = Sheaf::new(stack, dims);
        let lam = (0..g.order())
            .map(|gg| {
                let mut blocks = BTreeMap::new();
                for (&(x, i), _) in sheaf.support() {
                    let s = &el.lb.scalars[gg][x];
                    let m = self
                        .lam_block(ctx, el.aut.sigma.apply(gg), f[x], i)
                        .scale(s);
                    blocks.insert((x, i), m);
                }
                blocks
            })
            .collect();
        EqSheaf { sheaf, lam }
    }
}

fn transport_block(
    ctx: &Field,
    t: &Transport,
    g: usize,
    sheaf: &Sheaf,
    x: usize,
    i: i32,
    act: impl Fn(usize, usize) -> usize,
) -> Mat {
    match t[g].get(&(x, i)) {
        Some(m) => m.clone(),
        None => Mat::zeros(ctx, sheaf.dim(act(g, x), i), sheaf.dim(x, i)),
    }
}

/// Full two-layer object: an object of Coh_H([X/G]) for a subgroup
/// H of A(X) acting strictly.  The outer layer is trivial for plain
/// objects of Coh([X/G]).
#[derive(Debug, Clone)]
pub struct HSheaf {
    pub eq: EqSheaf,
    pub h: ActingGroup,
    /// kappa[h] block at (x, i): E_(x,i) -> E_(f_h(x), i).
    pub kappa: Transport,
}

impl HSheaf {
    pub fn plain(ctx: &Field, eq: EqSheaf) -> HSheaf {
        let stack = eq.sheaf.stack.clone();
        let h = ActingGroupData::trivial(ctx, &stack);
        let kappa = vec![eq
            .sheaf
            .support()
            .map(|(&(x, i), &r)| ((x, i), Mat::identity(ctx, r)))
            .collect()];
        HSheaf { eq, h, kappa }
    }

    pub fn new(ctx: &Field, eq: EqSheaf, h: &ActingGroup, kappa: Transport) -> HSheaf {
        let _ = ctx;
        HSheaf {
            eq,
            h: h.clone(),
            kappa,
        }
    }

    pub fn stack(&self) -> &Stack {
        &self.eq.sheaf.stack
    }

    pub fn kappa_block(&self, ctx: &Field, h: usize, x: usize, i: i32) -> Mat {
        match self.kappa[h].get(&(x, i)) {
            Some(m) => m.clone(),
            None => Mat::zeros(
                ctx,
                self.eq.sheaf.dim(self.h.point_map(h)[x], i),
                self.eq.sheaf.dim(x, i),
            ),
        }
    }

    /// Validates both layers: the inner linearisation, the outer cocycle,
    /// and the mixed equivariance kappa_h(g.x) lam_g(x) =
    /// l_h(g,x) lam_(sigma_h g)(f_h x) kappa_h(x).
    pub fn validate(&self, ctx: &Field) -> Result<(), SheafError> {
        self.eq.validate(ctx)?;
        let stack = self.stack().clone();
        let g = stack.group();
        let hh = &self.h;
        assert_eq!(self.kappa.len(), hh.group.order());
        for (&(x, i), &r) in self.eq.sheaf.support() {
            let id = self.kappa_block(ctx, 0, x, i);
            if id != Mat::identity(ctx, r) {
                return Err(SheafError::IdentityLin(x, i));
            }
        }
        for h in hh.group.elements() {
            let f = hh.point_map(h).to_vec();
            for (&(x, i), _) in self.eq.sheaf.support() {
                let b = self.kappa_block(ctx, h, x, i);
                if b.rows != self.eq.sheaf.dim(f[x], i) {
                    return Err(SheafError::BlockShape(x, i));
                }
                if !b.is_invertible() {
                    return Err(SheafError::LinNotInvertible(h, x));
                }
                // mixed equivariance
                for gg in g.elements() {
                    let lhs = self
                        .kappa_block(ctx, h, stack.act(gg, x), i)
                        .mul(&self.eq.lam_block(ctx, gg, x, i));
                    let rhs = self
                        .eq
                        .lam_block(ctx, hh.sigma(h, gg), f[x], i)
                        .mul(&self.kappa_block(ctx, h, x, i))
                        .scale(hh.scalar(h, gg, x));
                    if lhs != rhs {
                        return Err(SheafError::MixedEquivariance { g: gg, x });
                    }
                }
            }
        }
        // outer cocycle: kappa_(h'h)(x) = kappa_h'(f_h x) kappa_h(x)
        for h1 in hh.group.elements() {
            for h2 in hh.group.elements() {
                let prod = hh.group.mul(h1, h2);
                let f2 = hh.point_map(h2).to_vec();
                for (&(x, i), _) in self.eq.sheaf.support() {
                    let lhs = self.kappa_block(ctx, prod, x, i);
                    let rhs = self
                        .kappa_block(ctx, h1, f2[x], i)
                        .mul(&self.kappa_block(ctx, h2, x, i));
                    if lhs != rhs {
                        return Err(SheafError::LinCocycle { g: h2, h: h1, x });
                    }
                }
            }
        }
        Ok(())
    }

    /// Outer character twist: kappa_h multiplied by rho(h).
    pub fn twist_outer(&self, rho: &Character) -> HSheaf {
        HSheaf {
            eq: self.eq.clone(),
            h: self.h.clone(),
            kappa: self
                .kappa
                .iter()
                .enumerate()
                .map(|(h, blocks)| {
                    let v = rho.value(h);
                    blocks
                        .iter()
                        .map(|(&k, m)| (k, m.scale(&v)))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn shift(&self, m: i32) -> HSheaf {
        HSheaf {
            eq: self.eq.shift(m),
            h: self.h.clone(),
            kappa: self
                .kappa
                .iter()
                .map(|blocks| {
                    blocks
                        .iter()
                        .map(|(&(x, i), b)| ((x, i - m), b.clone()))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn direct_sum(&self, ctx: &Field, other: &HSheaf) -> HSheaf {
        assert!(Arc::ptr_eq(&self.h, &other.h) || *self.h == *other.h);
        let eq = self.eq.direct_sum(ctx, &other.eq);
        let kappa = (0..self.h.group.order())
            .map(|h| {
                let mut blocks = BTreeMap::new();
                for (&(x, i), _) in eq.sheaf.support() {
                    let a = self.kappa_block(ctx, h, x, i);
                    let b = other.kappa_block(ctx, h, x, i);
                    blocks.insert((x, i), a.direct_sum(&b));
                }
                blocks
            })
            .collect();
        HSheaf {
            eq,
            h: self.h.clone(),
            kappa,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.eq.is_zero()
    }
}

/// Morphism data between two-layer objects (same stack, same acting
/// group), represented by its underlying SMap.
pub struct HomSpace {
    pub dim: usize,
    /// Basis of the invariant subspace as maps.
    pub basis: Vec<SMap>,
    /// Flat coordinates: include (D x dim) and project (dim x D) with
    /// project . include = id; include . project = averaging projector.
    pub include: Mat,
    pub project: Mat,
    slots: Vec<((usize, i32), usize, usize)>, // (key, rows, cols)
    src: Sheaf,
    tgt: Sheaf,
    shift: i32,
}

impl HomSpace {
    pub fn flatten(&self, ctx: &Field, f: &SMap) -> Mat {
        let d: usize = self.slots.iter().map(|&(_, r, c)| r * c).sum();
        let mut v = Mat::zeros(ctx, d, 1);
        let mut off = 0;
        for &((x, i), rows, cols) in &self.slots {
            let b = f.block_with(ctx, x, i);
            for r in 0..rows {
                for c in 0..cols {
                    v.set(off + r * cols + c, 0, b.at(r, c).clone());
                }
            }
            off += rows * cols;
        }
        v
    }

    pub fn unflatten(&self, ctx: &Field, v: &Mat) -> SMap {
        let mut blocks = BTreeMap::new();
        let mut off = 0;
        for &((x, i), rows, cols) in &self.slots {
            let mut b = Mat::zeros(ctx, rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    b.set(r, c, v.at(off + r * cols + c, 0).clone());
                }
            }
            off += rows * cols;
            if !b.is_zero() {
                blocks.insert((x, i), b);
            }
        }
        SMap::from_blocks(ctx, &self.src, &self.tgt, self.shift, blocks).expect("slot shapes")
    }

    /// Coordinates of an invariant map in the basis; None if f is not in
    /// the invariant subspace.
    pub fn coordinates(&self, ctx: &Field, f: &SMap) -> Option<Mat> {
        let v = self.flatten(ctx, f);
        let coords = self.project.mul(&v);
        let back = self.include.mul(&coords);
        if back == v {
            Some(coords)
        } else {
            None
        }
    }
}

/// Computes Hom((E, lam, kappa), (F, lam', kappa'))[k]: the subspace of
/// degree-k sheaf maps invariant under the inner group and the outer
/// group.  For plain homs pass objects with trivial layers.
pub fn hom_space(ctx: &Field, a: &HSheaf, b: &HSheaf, k: i32) -> HomSpace {
    assert!(
        same_stack(a.stack(), b.stack()),
        "hom between different stacks"
    );
    let stack = a.stack().clone();
    let g = stack.group();
    let src = &a.eq.sheaf;
    let tgt = &b.eq.sheaf;
    // slots: source support with nonzero target dim
    let mut slots: Vec<((usize, i32), usize, usize)> = Vec::new();
    for (&(x, i), &c) in src.support() {
        let r = tgt.dim(x, i + k);
        if r > 0 {
            slots.push(((x, i), r, c));
        }
    }
    let d: usize = slots.iter().map(|&(_, r, c)| r * c).sum();
    let slot_offset = |key: (usize, i32)| -> Option<(usize, usize, usize)> {
        let mut off = 0;
        for &(k2, r, c) in &slots {
            if k2 == key {
                return Some((off, r, c));
            }
            off += r * c;
        }
        None
    };

    // inner averaging projector
    let inv_order = Scalar::from_int(ctx, g.order() as i64).inv();
    let mut p_in = Mat::zeros(ctx, d, d);
    for (si, &((x, i), rows, cols)) in slots.iter().enumerate() {
        let _ = si;
        let base = slot_offset((x, i)).unwrap().0;
        for r in 0..rows {
            for c in 0..cols {
                // phi = unit at ((x,i), r, c); compute the average of
                // phi.g over g
                let col_index = base + r * cols + c;
                for gg in g.elements() {
                    // (phi.g)(x', i) = mu_g(x', i+k)^-1 phi(g.x') lam_g(x', i)
                    let ginv = g.inv(gg);
                    let xp = stack.act(ginv, x);
                    let lam_b = a.eq.lam_block(ctx, gg, xp, i);
                    let mu_b = b.eq.lam_block(ctx, gg, xp, i + k);
                    let mu_inv = match mu_b.inverse() {
                        Some(m) => m,
                        None => continue,
                    };
                    if let Some((off2, r2, c2)) = slot_offset((xp, i)) {
                        // contribution: mu_inv[:, r] outer lam_b[c, :]
                        for rr in 0..r2 {
                            let left = mu_inv.at(rr, r).clone();
                            if left.is_zero() {
                                continue;
                            }
                            for cc in 0..c2 {
                                let right = lam_b.at(c, cc);
                                if right.is_zero() {
                                    continue;
                                }
                                let add = &(&left * right) * &inv_order;
                                let idx = off2 + rr * c2 + cc;
                                let v = p_in.at(idx, col_index) + &add;
                                p_in.set(idx, col_index, v);
                            }
                        }
                    }
                }
            }
        }
    }

    let p = if a.h.is_trivial() && b.h.is_trivial() {
        p_in
    } else {
        assert!(
            Arc::ptr_eq(&a.h, &b.h) || *a.h == *b.h,
            "hom between different outer actions"
        );
        let hh = &a.h;
        let inv_h = Scalar::from_int(ctx, hh.group.order() as i64).inv();
        let mut p_out = Mat::zeros(ctx, d, d);
        for &((x, i), rows, cols) in slots.iter() {
            let base = slot_offset((x, i)).unwrap().0;
            for r in 0..rows {
                for c in 0..cols {
                    let col_index = base + r * cols + c;
                    for h in hh.group.elements() {
                        // (phi.h)(x', i) = kap'_h(x', i+k)^-1 phi(f_h x') kap_h(x', i)
                        // nonzero where f_h x' = x
                        let fh = hh.point_map(h);
                        for xp in 0..stack.size() {
                            if fh[xp] != x {
                                continue;
                            }
                            let kap_a = a.kappa_block(ctx, h, xp, i);
                            let kap_b = b.kappa_block(ctx, h, xp, i + k);
                            let kb_inv = match kap_b.inverse() {
                                Some(m) => m,
                                None => continue,
                            };
                            if let Some((off2, r2, c2)) = slot_offset((xp, i)) {
                                for rr in 0..r2 {
                                    let left = kb_inv.at(rr, r).clone();
                                    if left.is_zero() {
                                        continue;
                                    }
                                    for cc in 0..c2 {
                                        let right = kap_a.at(c, cc);
                                        if right.is_zero() {
                                            continue;
                                        }
                                        let add = &(&left * right) * &inv_h;
                                        let idx = off2 + rr * c2 + cc;
                                        let v = p_out.at(idx, col_index) + &add;
                                        p_out.set(idx, col_index, v);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let joint = p_out.mul(&p_in);
        debug_assert_eq!(joint.mul(&joint), joint, "joint projector is idempotent");
        joint
    };

    let include = p.image_basis();
    let project = include.solve(&p).expect("projector factors through its image");
    let dim = include.cols;
    let hs = HomSpace {
        dim,
        basis: Vec::new(),
        include,
        project,
        slots,
        src: src.clone(),
        tgt: tgt.clone(),
        shift: k,
    };
    let basis = (0..dim)
        .map(|j| {
            let col = Mat::from_fn(ctx, hs.include.rows, 1, |r, _| hs.include.at(r, j).clone());
            hs.unflatten(ctx, &col)
        })
        .collect();
    HomSpace { basis, ..hs }
}

/// Plain graded Hom dimension (no equivariance): sum over support of
/// dim E^i_x * dim F^(i+k)_x.
pub fn hom_dim_plain(e: &Sheaf, f: &Sheaf, k: i32) -> usize {
    e.support()
        .map(|(&(x, i), &r)| r * f.dim(x, i + k))
        .sum()
}

/// Isomorphism test in a semisimple category: objects are isomorphic iff
/// dim End(M) = dim End(N) = dim Hom(M, N) (Cauchy-Schwarz equality forces
/// equal simple multiplicities).  Uses degree-0 invariant Homs.
pub fn iso_test(ctx: &Field, m: &HSheaf, n: &HSheaf) -> bool {
    let end_m = hom_space(ctx, m, m, 0).dim;
    let end_n = hom_space(ctx, n, n, 0).dim;
    let hom = hom_space(ctx, m, n, 0).dim;
    end_m == end_n && end_n == hom
}

/// Splits an idempotent endomorphism of a two-layer object into a direct
/// summand with inclusion and projection maps.
pub struct Summand {
    pub object: HSheaf,
    pub include: SMap,
    pub project: SMap,
}

pub fn split_idempotent(ctx: &Field, obj: &HSheaf, e: &SMap) -> Result<Summand, SheafError> {
    if e.shift != 0 {
        return Err(SheafError::NotDegreeZero(e.shift));
    }
    if e.compose(ctx, e) != *e {
        return Err(SheafError::NotIdempotent);
    }
    // pointwise image bases
    let mut incl_blocks: BTreeMap<(usize, i32), Mat> = BTreeMap::new();
    let mut proj_blocks: BTreeMap<(usize, i32), Mat> = BTreeMap::new();
    let mut dims = Dims::new();
    for (&(x, i), _) in obj.eq.sheaf.support() {
        let blk = e.block_with(ctx, x, i);
        let (inc, proj) = crate::linalg::split_idempotent(&blk).ok_or(SheafError::NotIdempotent)?;
        if inc.cols > 0 {
            dims.insert((x, i), inc.cols);
            incl_blocks.insert((x, i), inc);
            proj_blocks.insert((x, i), proj);
        }
    }
    let sub = Sheaf::new(&obj.eq.sheaf.stack, dims);
    let zero_inc = |x: usize, i: i32| Mat::zeros(ctx, obj.eq.sheaf.dim(x, i), sub.dim(x, i));
    let inc_at = |x: usize, i: i32| incl_blocks.get(&(x, i)).cloned().unwrap_or_else(|| zero_inc(x, i));
    let proj_at = |x: usize, i: i32| {
        proj_blocks
            .get(&(x, i))
            .cloned()
            .unwrap_or_else(|| Mat::zeros(ctx, sub.dim(x, i), obj.eq.sheaf.dim(x, i)))
    };
    // induced transports: lam^sub_g(x) = proj(g.x) lam_g(x) inc(x)
    let stack = obj.stack().clone();
    let g = stack.group();
    let lam: Transport = (0..g.order())
        .map(|gg| {
            let mut blocks = BTreeMap::new();
            for (&(x, i), _) in sub.support() {
                let m = proj_at(stack.act(gg, x), i)
                    .mul(&obj.eq.lam_block(ctx, gg, x, i))
                    .mul(&inc_at(x, i));
                blocks.insert((x, i), m);
            }
            blocks
        })
        .collect();
    let kappa: Transport = (0..obj.h.group.order())
        .map(|h| {
            let f = obj.h.point_map(h).to_vec();
            let mut blocks = BTreeMap::new();
            for (&(x, i), _) in sub.support() {
                let m = proj_at(f[x], i)
                    .mul(&obj.kappa_block(ctx, h, x, i))
                    .mul(&inc_at(x, i));
                blocks.insert((x, i), m);
            }
            blocks
        })
        .collect();
    let object = HSheaf {
        eq: EqSheaf {
            sheaf: sub.clone(),
            lam,
        },
        h: obj.h.clone(),
        kappa,
    };
    let include = SMap::from_blocks(ctx, &sub, &obj.eq.sheaf, 0, incl_blocks)?;
    let project = SMap::from_blocks(ctx, &obj.eq.sheaf, &sub, 0, proj_blocks)?;
    Ok(Summand {
        object,
        include,
        project,
    })
}

/// Cone of a degree-0 map of two-layer objects: in the semisimple model
/// cone(f) = coker(f) + ker(f)[1], with the two canonical triangle maps
/// F -> cone(f) and cone(f) -> E[1].
pub struct Cone {
    pub object: HSheaf,
    pub from_target: SMap,
    pub to_shifted_source: SMap,
}

pub fn cone(ctx: &Field, a: &HSheaf, b: &HSheaf, f: &SMap) -> Result<Cone, SheafError> {
    if f.shift != 0 {
        return Err(SheafError::NotDegreeZero(f.shift));
    }
    let stack = a.stack().clone();
    // Pointwise: coker basis (complement of im f in F) and ker basis.
    let mut coker_inc: BTreeMap<(usize, i32), Mat> = BTreeMap::new(); // F_(x,i) <- coker
    let mut coker_proj: BTreeMap<(usize, i32), Mat> = BTreeMap::new(); // coker <- F
    let mut ker_inc: BTreeMap<(usize, i32), Mat> = BTreeMap::new(); // E_(x,i) <- ker
    let mut ker_proj: BTreeMap<(usize, i32), Mat> = BTreeMap::new(); // ker <- E (a retraction)
    let mut keys: Vec<(usize, i32)> = Vec::new();
    for (&k, _) in a.eq.sheaf.support() {
        keys.push(k);
    }
    for (&k, _) in b.eq.sheaf.support() {
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for &(x, i) in &keys {
        let blk = {
            let rows = b.eq.sheaf.dim(x, i);
            let cols = a.eq.sheaf.dim(x, i);
            let mut m = Mat::zeros(ctx, rows, cols);
            let bb = f.block_with(ctx, x, i);
            for r in 0..rows.min(bb.rows) {
                for c in 0..cols.min(bb.cols) {
                    m.set(r, c, bb.at(r, c).clone());
                }
            }
            m
        };
        // coker: complement of the column space inside F
        let comp = blk.cokernel_basis();
        if comp.cols > 0 {
            // projection F -> coker along im(f): solve [im | comp] decomposition
            let im = blk.image_basis();
            let basis = im.hstack(&comp);
            let binv = basis.inverse().expect("basis of the fiber");
            // rows of binv corresponding to comp give the projection
            let proj = Mat::from_fn(ctx, comp.cols, blk.rows, |r, c| {
                binv.at(im.cols + r, c).clone()
            });
            coker_inc.insert((x, i), comp);
            coker_proj.insert((x, i), proj);
        }
        // ker
        let kb = blk.kernel();
        if kb.cols > 0 {
            // retraction ker <- E: any left inverse of kb; use solve on
            // the extended basis
            let comp_k = kb.cokernel_basis();
            let basis = kb.hstack(&comp_k);
            let binv = basis.inverse().expect("basis of the fiber");
            let retr = Mat::from_fn(ctx, kb.cols, blk.cols, |r, c| binv.at(r, c).clone());
            ker_inc.insert((x, i), kb);
            ker_proj.insert((x, i), retr);
        }
    }
    // cone dims: coker in degree i, ker in degree i shifted to i-1
    let mut dims = Dims::new();
    for (&(x, i), m) in &coker_inc {
        *dims.entry((x, i)).or_insert(0) += m.cols;
    }
    for (&(x, i), m) in &ker_inc {
        *dims.entry((x, i - 1)).or_insert(0) += m.cols;
    }
    let cone_sheaf = Sheaf::new(&stack, dims);
    let ck_dim = |x: usize, i: i32| coker_inc.get(&(x, i)).map_or(0, |m| m.cols);
    let kr_dim = |x: usize, i: i32| ker_inc.get(&(x, i)).map_or(0, |m| m.cols);

    // transported structure: cone transport = diag(coker part, ker part)
    // computed through the projections
    let build_transport = |elem_count: usize,
                           point_map: &dyn Fn(usize, usize) -> usize,
                           a_tr: &dyn Fn(usize, usize, i32) -> Mat,
                           b_tr: &dyn Fn(usize, usize, i32) -> Mat|
     -> Transport {
        (0..elem_count)
            .map(|gg| {
                let mut blocks = BTreeMap::new();
                for (&(x, j), &r) in cone_sheaf.support() {
                    let y = point_map(gg, x);
                    let rows = cone_sheaf.dim(y, j);
                    let mut m = Mat::zeros(ctx, rows, r);
                    // coker block: degrees j
                    let ck_c = ck_dim(x, j);
                    let ck_r = ck_dim(y, j);
                    if ck_c > 0 && ck_r > 0 {
                        let t = coker_proj[&(y, j)]
                            .mul(&b_tr(gg, x, j))
                            .mul(&coker_inc[&(x, j)]);
                        for rr in 0..ck_r {
                            for cc in 0..ck_c {
                                m.set(rr, cc, t.at(rr, cc).clone());
                            }
                        }
                    }
                    // ker block: stored at degree j, source degree j+1
                    let kr_c = kr_dim(x, j + 1);
                    let kr_r = kr_dim(y, j + 1);
                    if kr_c > 0 && kr_r > 0 {
                        let t = ker_proj[&(y, j + 1)]
                            .mul(&a_tr(gg, x, j + 1))
                            .mul(&ker_inc[&(x, j + 1)]);
                        for rr in 0..kr_r {
                            for cc in 0..kr_c {
                                m.set(ck_r + rr, ck_c + cc, t.at(rr, cc).clone());
                            }
                        }
                    }
                    blocks.insert((x, j), m);
                }
                blocks
            })
            .collect()
    };
    let stack2 = stack.clone();
    let lam = build_transport(
        stack.group().order(),
        &|gg, x| stack2.act(gg, x),
        &|gg, x, j| a.eq.lam_block(ctx, gg, x, j),
        &|gg, x, j| b.eq.lam_block(ctx, gg, x, j),
    );
    let hgroup = a.h.clone();
    let kappa = build_transport(
        hgroup.group.order(),
        &|h, x| hgroup.point_map(h)[x],
        &|h, x, j| a.kappa_block(ctx, h, x, j),
        &|h, x, j| b.kappa_block(ctx, h, x, j),
    );
    let object = HSheaf {
        eq: EqSheaf {
            sheaf: cone_sheaf.clone(),
            lam,
        },
        h: a.h.clone(),
        kappa,
    };
    // triangle maps: F -> cone (coker projection), cone -> E[1] (ker inclusion)
    let mut ft_blocks = BTreeMap::new();
    for (&(x, i), _) in b.eq.sheaf.support() {
        let rows = cone_sheaf.dim(x, i);
        if rows == 0 {
            continue;
        }
        let cols = b.eq.sheaf.dim(x, i);
        let mut m = Mat::zeros(ctx, rows, cols);
        if let Some(p) = coker_proj.get(&(x, i)) {
            for rr in 0..p.rows {
                for cc in 0..cols {
                    m.set(rr, cc, p.at(rr, cc).clone());
                }
            }
        }
        ft_blocks.insert((x, i), m);
    }
    let from_target = SMap::from_blocks(ctx, &b.eq.sheaf, &cone_sheaf, 0, ft_blocks)?;
    // cone -> E[1]: at degree j, the ker part (source degree j+1) includes
    // into E_(x, j+1) = E[1]_(x, j)
    let e1 = a.eq.sheaf.shift(1);
    let mut ts_blocks = BTreeMap::new();
    for (&(x, j), &r) in cone_sheaf.support() {
        let rows = e1.dim(x, j);
        if rows == 0 {
            continue;
        }
        let mut m = Mat::zeros(ctx, rows, r);
        let ck_c = ck_dim(x, j);
        if let Some(inc) = ker_inc.get(&(x, j + 1)) {
            for rr in 0..rows {
                for cc in 0..inc.cols {
                    m.set(rr, ck_c + cc, inc.at(rr, cc).clone());
                }
            }
        }
        ts_blocks.insert((x, j), m);
    }
    let to_shifted_source = SMap::from_blocks(ctx, &cone_sheaf, &e1, 0, ts_blocks)?;
    Ok(Cone {
        object,
        from_target,
        to_shifted_source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclofield::field;
    use crate::finitegroup::{characters, cyclic};
    use crate::gspace::{GSet, QuotientStack};

    fn pt_mod2(ctx: &Field) -> (Stack, ActingGroup) {
        let z2 = cyclic(2);
        let gset = GSet::trivial_action(&z2, 1);
        let stack = QuotientStack::new(gset, "ptZ2");
        let h = ActingGroupData::trivial(ctx, &stack);
        (stack, h)
    }

    /// Representation of Z/2 as an object of Coh([pt/Z2]) with the given
    /// scalar on the generator.
    fn rep_z2(ctx: &Field, stack: &Stack, scalars: &[i64]) -> HSheaf {
        let n = scalars.len();
        let mut dims = Dims::new();
        dims.insert((0, 0), n);
        let sheaf = Sheaf::new(stack, dims);
        let mut lam = vec![BTreeMap::new(), BTreeMap::new()];
        lam[0].insert((0, 0), Mat::identity(ctx, n));
        lam[1].insert(
            (0, 0),
            Mat::from_fn(ctx, n, n, |r, c| {
                if r == c {
                    Scalar::from_int(ctx, scalars[r])
                } else {
                    Scalar::zero(ctx)
                }
            }),
        );
        HSheaf::plain(ctx, EqSheaf { sheaf, lam })
    }

    #[test]
    fn hom_dims_on_point_mod_2() {
        let ctx = field(2).unwrap();
        let (stack, _) = pt_mod2(&ctx);
        let triv = rep_z2(&ctx, &stack, &[1]);
        let sgn = rep_z2(&ctx, &stack, &[-1]);
        triv.validate(&ctx).unwrap();
        sgn.validate(&ctx).unwrap();
        assert_eq!(hom_space(&ctx, &triv, &sgn, 0).dim, 0, "odd invariants vanish");
        assert_eq!(hom_space(&ctx, &triv, &triv, 0).dim, 1);
        let reg = rep_z2(&ctx, &stack, &[1, -1]);
        assert_eq!(hom_space(&ctx, &reg, &reg, 0).dim, 2);
        assert!(!iso_test(&ctx, &triv, &sgn));
        assert!(iso_test(&ctx, &reg, &triv.direct_sum(&ctx, &sgn)));
        assert!(!iso_test(&ctx, &triv, &triv.direct_sum(&ctx, &triv)));
    }

    #[test]
    fn plain_hom_dims() {
        let stack = QuotientStack::new(GSet::plain(2), "2pts");
        let e = Sheaf::skyscraper(&stack, 0, 0);
        let f = Sheaf::skyscraper(&stack, 1, 0);
        assert_eq!(hom_dim_plain(&e, &e, 0), 1);
        assert_eq!(hom_dim_plain(&e, &f, 0), 0);
        let mut dims = Dims::new();
        dims.insert((0, 0), 2);
        let e2 = Sheaf::new(&stack, dims);
        let mut dims = Dims::new();
        dims.insert((0, 1), 3);
        let f3 = Sheaf::new(&stack, dims);
        assert_eq!(hom_dim_plain(&e2, &f3, 1), 6);
    }

    #[test]
    fn tensor_unit_and_degrees() {
        let ctx = field(1).unwrap();
        let stack = QuotientStack::new(GSet::plain(2), "2pts");
        let o = EqSheaf::structure(&ctx, &stack);
        let mut dims = Dims::new();
        dims.insert((0, 1), 1);
        dims.insert((1, -2), 2);
        let sheaf = Sheaf::new(&stack, dims);
        let e = EqSheaf {
            sheaf: sheaf.clone(),
            lam: vec![sheaf
                .support()
                .map(|(&(x, i), &r)| ((x, i), Mat::identity(&ctx, r)))
                .collect()],
        };
        let t = e.tensor(&ctx, &o);
        assert_eq!(t.sheaf, e.sheaf, "O is a tensor unit on dims");
        // two rank-1 skyscrapers at x in degrees 1 and -1 tensor to degree 0
        let a = Sheaf::skyscraper(&stack, 0, 1);
        let b = Sheaf::skyscraper(&stack, 0, -1);
        let ab = a.tensor(&b);
        assert_eq!(ab.dim(0, 0), 1);
        assert_eq!(ab.total_dim(), 1);
    }

    #[test]
    fn cone_shapes() {
        let ctx = field(1).unwrap();
        let stack = QuotientStack::new(GSet::plain(1), "pt");
        let k1 = HSheaf::plain(
            &ctx,
            EqSheaf {
                sheaf: Sheaf::skyscraper(&stack, 0, 0),
                lam: vec![[((0, 0), Mat::identity(&ctx, 1))].into_iter().collect()],
            },
        );
        let mut dims = Dims::new();
        dims.insert((0, 0), 2);
        let sheaf2 = Sheaf::new(&stack, dims);
        let k2 = HSheaf::plain(
            &ctx,
            EqSheaf {
                sheaf: sheaf2.clone(),
                lam: vec![[((0, 0), Mat::identity(&ctx, 2))].into_iter().collect()],
            },
        );
        // identity: cone 0
        let idmap = SMap::identity(&ctx, &k1.eq.sheaf);
        let c = cone(&ctx, &k1, &k1, &idmap).unwrap();
        assert!(c.object.is_zero());
        // zero map: cone = F + E[1]
        let z = SMap::zero(&ctx, &k1.eq.sheaf, &k2.eq.sheaf, 0);
        let c = cone(&ctx, &k1, &k2, &z).unwrap();
        assert_eq!(c.object.eq.sheaf.dim(0, 0), 2);
        assert_eq!(c.object.eq.sheaf.dim(0, -1), 1);
        // diagonal K -> K^2: cone of rank 1 in degree 0
        let mut blocks = BTreeMap::new();
        blocks.insert(
            (0, 0),
            Mat::from_fn(&ctx, 2, 1, |_, _| Scalar::one(&ctx)),
        );
        let diag = SMap::from_blocks(&ctx, &k1.eq.sheaf, &k2.eq.sheaf, 0, blocks).unwrap();
        let c = cone(&ctx, &k1, &k2, &diag).unwrap();
        assert_eq!(c.object.eq.sheaf.total_dim(), 1);
        assert_eq!(c.object.eq.sheaf.dim(0, 0), 1);
        // triangle composition F -> cone -> E[1] is zero... only the
        // composite cone(f) . f is zero
        let comp = c.from_target.compose(&ctx, &diag);
        assert!(comp.is_zero(), "cone triangle: q . f = 0");
    }

    #[test]
    fn split_averaging_idempotent() {
        // averaging projector on the regular rep of Z/2 splits off the
        // trivial rank-1 summand
        let ctx = field(2).unwrap();
        let (stack, _) = pt_mod2(&ctx);
        let reg = rep_z2(&ctx, &stack, &[1, -1]);
        // e = (1 + swap-ish)/2 in the basis where lam1 = diag(1,-1): the
        // averaging endomorphism is diag(1, 0)
        let mut blocks = BTreeMap::new();
        blocks.insert(
            (0, 0),
            Mat::from_fn(&ctx, 2, 2, |r, c| {
                if r == 0 && c == 0 {
                    Scalar::one(&ctx)
                } else {
                    Scalar::zero(&ctx)
                }
            }),
        );
        let e = SMap::from_blocks(&ctx, &reg.eq.sheaf, &reg.eq.sheaf, 0, blocks).unwrap();
        let s = split_idempotent(&ctx, &reg, &e).unwrap();
        assert_eq!(s.object.eq.sheaf.total_dim(), 1);
        let pi = s.project.compose(&ctx, &s.include);
        assert!(pi.is_iso());
        let ip = s.include.compose(&ctx, &s.project);
        assert_eq!(ip, e);
        // e = id splits to the object itself; e = 0 to the zero object
        let idm = SMap::identity(&ctx, &reg.eq.sheaf);
        assert_eq!(
            split_idempotent(&ctx, &reg, &idm).unwrap().object.eq.sheaf.total_dim(),
            2
        );
        let zm = SMap::zero(&ctx, &reg.eq.sheaf, &reg.eq.sheaf, 0);
        assert!(split_idempotent(&ctx, &reg, &zm).unwrap().object.is_zero());
        // non-idempotent rejected
        let mut blocks = BTreeMap::new();
        blocks.insert((0, 0), Mat::from_fn(&ctx, 2, 2, |_, _| Scalar::one(&ctx)));
        let bad = SMap::from_blocks(&ctx, &reg.eq.sheaf, &reg.eq.sheaf, 0, blocks).unwrap();
        assert!(split_idempotent(&ctx, &reg, &bad).is_err());
    }

    #[test]
    fn character_twist_on_objects() {
        let ctx = field(2).unwrap();
        let (stack, _) = pt_mod2(&ctx);
        let triv = rep_z2(&ctx, &stack, &[1]);
        let chars = characters(stack.group(), &ctx).unwrap();
        let sgn_lb = LineBundle::from_character(&stack.gset, &chars[1]);
        let twisted = HSheaf::plain(&ctx, triv.eq.twist_line_bundle(&sgn_lb));
        twisted.validate(&ctx).unwrap();
        assert!(!iso_test(&ctx, &triv, &twisted));
        let back = HSheaf::plain(&ctx, twisted.eq.twist_line_bundle(&sgn_lb));
        assert_eq!(back.eq, triv.eq, "double twist by an order-2 character");
    }

    #[test]
    fn graded_composition_closure() {
        // Hom(E,F[k]) . Hom(D,E[j]) lands in Hom(D,F[j+k])
        let ctx = field(1).unwrap();
        let stack = QuotientStack::new(GSet::plain(1), "pt");
        let mk = |deg: i32, r: usize| {
            let mut dims = Dims::new();
            dims.insert((0, deg), r);
            Sheaf::new(&stack, dims)
        };
        let d = mk(0, 1);
        let e = mk(1, 2);
        let f = mk(3, 1);
        let mut b1 = BTreeMap::new();
        b1.insert((0, 0), Mat::from_fn(&ctx, 2, 1, |_, _| Scalar::one(&ctx)));
        let de = SMap::from_blocks(&ctx, &d, &e, 1, b1).unwrap();
        let mut b2 = BTreeMap::new();
        b2.insert((0, 1), Mat::from_fn(&ctx, 1, 2, |_, _| Scalar::one(&ctx)));
        let ef = SMap::from_blocks(&ctx, &e, &f, 2, b2).unwrap();
        let df = ef.compose(&ctx, &de);
        assert_eq!(df.shift, 3);
        assert_eq!(df.block_with(&ctx, 0, 0).at(0, 0), &Scalar::from_int(&ctx, 2));
    }
}
