//! The kernel calculus: Fourier-Mukai transforms, convolution,
//! mu-linearised kernels, adjoints with lifted units and counits,
//! equivalence certification, spherical and P^n verification, exterior
//! transport, and standard-kernel recognition.

mod adjoint;
mod axioms;
mod conv;
mod standard;

pub use adjoint::{adjoint_kernels, certify, AdjunctionData, Certificate, CertifyMode};
pub use axioms::{verify_pn, verify_spherical, PnReport, SphericalReport};
pub use conv::{convolve, conv_map2, ConvNode};
pub use standard::{exterior_transport, recognize_standard, StandardData, TransportReport};

use crate::cyclofield::{Field, Scalar};
use crate::finitegroup::{Group, GroupIso};
use crate::gsheaf::{
    ActingGroup, ActingGroupData, AElement, Dims, EqSheaf, HSheaf, SMap, Sheaf, SheafError,
    Transport,
};
use crate::gspace::{
    join_group, join_point, split_group, split_point, stack_product, LineBundle, Stack, StackIso,
};
use crate::linalg::Mat;
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("stack or action mismatch: {0}")]
    Mismatch(String),
    #[error("mu is not a c-isomorphism at element {0}")]
    NotCIso(usize),
    #[error("acting group is not c-invariant (element {0})")]
    NotCInvariant(usize),
    #[error("kernel is not simple (dim End = {0}); adjoint lifting needs 1")]
    NotSimple(usize),
    #[error("serre twist data is not invertible or not compatible: {0}")]
    SerreTwist(String),
    #[error("candidate decomposition failed: {0}")]
    Decomposition(String),
    #[error(transparent)]
    Sheaf(#[from] SheafError),
    #[error(transparent)]
    Group(#[from] crate::finitegroup::GroupError),
}

/// A c-isomorphism between acting groups on the two sides of a kernel.
#[derive(Clone)]
pub struct MuData {
    pub hx: ActingGroup,
    pub hy: ActingGroup,
    pub iso: GroupIso,
}

impl MuData {
    pub fn new(hx: &ActingGroup, hy: &ActingGroup, iso: GroupIso) -> Result<MuData, KernelError> {
        if !hx.is_c_invariant() {
            return Err(KernelError::NotCInvariant(0));
        }
        if !hy.is_c_invariant() {
            return Err(KernelError::NotCInvariant(1));
        }
        for h in hx.group.elements() {
            let ch = hx
                .c_index(h)
                .ok_or(KernelError::NotCInvariant(h))?;
            let rhs = hy
                .c_index(iso.apply(h))
                .ok_or(KernelError::NotCInvariant(h))?;
            if iso.apply(ch) != rhs {
                return Err(KernelError::NotCIso(h));
            }
        }
        Ok(MuData {
            hx: hx.clone(),
            hy: hy.clone(),
            iso,
        })
    }

    pub fn trivial(ctx: &Field, x: &Stack, y: &Stack) -> MuData {
        let hx = ActingGroupData::trivial(ctx, x);
        let hy = ActingGroupData::trivial(ctx, y);
        let iso = GroupIso::identity(&hx.group);
        MuData { hx, hy, iso }
    }

    pub fn identity(h: &ActingGroup) -> MuData {
        MuData {
            hx: h.clone(),
            hy: h.clone(),
            iso: GroupIso::identity(&h.group),
        }
    }

    pub fn group(&self) -> &Group {
        &self.hx.group
    }

    pub fn is_trivial(&self) -> bool {
        self.hx.is_trivial() && self.hy.is_trivial()
    }

    /// mu2 . mu1 for composable kernels.
    pub fn compose(m2: &MuData, m1: &MuData) -> Result<MuData, KernelError> {
        if *m1.hy != *m2.hx {
            return Err(KernelError::Mismatch(
                "middle acting groups do not match".into(),
            ));
        }
        Ok(MuData {
            hx: m1.hx.clone(),
            hy: m2.hy.clone(),
            iso: m2.iso.compose(&m1.iso),
        })
    }

    pub fn inverse(&self) -> MuData {
        MuData {
            hx: self.hy.clone(),
            hy: self.hx.clone(),
            iso: self.iso.inverse(),
        }
    }
}

/// The product-stack action h |-> (c(h) x mu(h)) used to linearise
/// kernels.
pub fn mu_product_action(
    ctx: &Field,
    prod: &Stack,
    x: &Stack,
    y: &Stack,
    mu: &MuData,
) -> Result<ActingGroup, KernelError> {
    let gx_order = x.group().order();
    let xs = x.size();
    let elements = mu
        .hx
        .group
        .elements()
        .map(|h| {
            let hbar = &mu.hx.elements[mu.hx.c_index(h).expect("c-invariant")];
            let hy = &mu.hy.elements[mu.iso.apply(h)];
            // product automorphism
            let f: Vec<usize> = (0..prod.size())
                .map(|p| {
                    let (px, py) = split_point(xs, p);
                    join_point(xs, hbar.aut.apply(px), hy.aut.apply(py))
                })
                .collect();
            let sigma_map: Vec<usize> = (0..prod.group().order())
                .map(|g| {
                    let (gx, gy) = split_group(gx_order, g);
                    join_group(
                        gx_order,
                        hbar.aut.sigma.apply(gx),
                        hy.aut.sigma.apply(gy),
                    )
                })
                .collect();
            let sigma = GroupIso::new(prod.group(), prod.group(), sigma_map)?;
            let aut = StackIso::new(&prod.gset, &prod.gset, f, sigma)
                .map_err(|e| KernelError::Mismatch(format!("product automorphism: {e}")))?;
            let scalars: Vec<Vec<Scalar>> = (0..prod.group().order())
                .map(|g| {
                    let (gx, gy) = split_group(gx_order, g);
                    (0..prod.size())
                        .map(|p| {
                            let (px, py) = split_point(xs, p);
                            &hbar.lb.scalars[gx][px] * &hy.lb.scalars[gy][py]
                        })
                        .collect()
                })
                .collect();
            Ok(AElement {
                lb: LineBundle { scalars },
                aut,
            })
        })
        .collect::<Result<Vec<_>, KernelError>>()?;
    ActingGroupData::new(ctx, prod, &mu.hx.group, elements).map_err(KernelError::Sheaf)
}

/// A mu-linearised Fourier-Mukai kernel from stack X to stack Y.
#[derive(Clone)]
pub struct Kernel {
    pub x: Stack,
    pub y: Stack,
    pub mu: MuData,
    pub prod: Stack,
    /// The underlying object on the product stack, with the outer
    /// (c x mu)-action of H.
    pub obj: HSheaf,
}

impl Kernel {
    pub fn new(
        ctx: &Field,
        x: &Stack,
        y: &Stack,
        mu: MuData,
        obj: HSheaf,
    ) -> Result<Kernel, KernelError> {
        let prod = obj.stack().clone();
        let expect = stack_product(x, y);
        if *prod != *expect {
            return Err(KernelError::Mismatch(
                "kernel object does not live on the product stack".into(),
            ));
        }
        let k = Kernel {
            x: x.clone(),
            y: y.clone(),
            mu,
            prod,
            obj,
        };
        Ok(k)
    }

    /// Plain kernel (trivial acting groups) from inner-equivariant data.
    pub fn plain(ctx: &Field, x: &Stack, y: &Stack, eq: EqSheaf) -> Result<Kernel, KernelError> {
        let mu = MuData::trivial(ctx, x, y);
        let obj = HSheaf::plain(ctx, eq);
        Kernel::new(ctx, x, y, mu, obj)
    }

    pub fn validate(&self, ctx: &Field) -> Result<(), KernelError> {
        self.obj.validate(ctx)?;
        // the outer action must be the (c x mu)-product action
        if !self.mu.is_trivial() {
            let expect = mu_product_action(ctx, &self.prod, &self.x, &self.y, &self.mu)?;
            if *expect != *self.obj.h {
                return Err(KernelError::Mismatch(
                    "outer action is not the (c x mu)-product action".into(),
                ));
            }
        }
        Ok(())
    }

    /// Forgets the outer linearisation.
    pub fn res_plain(&self, ctx: &Field) -> Kernel {
        Kernel {
            x: self.x.clone(),
            y: self.y.clone(),
            mu: MuData::trivial(ctx, &self.x, &self.y),
            prod: self.prod.clone(),
            obj: HSheaf::plain(ctx, self.obj.eq.clone()),
        }
    }

    /// Outer character twist (rho in H^): the kernel of M_rho-composed
    /// transforms.
    pub fn twist_outer(&self, rho: &crate::finitegroup::Character) -> Kernel {
        Kernel {
            x: self.x.clone(),
            y: self.y.clone(),
            mu: self.mu.clone(),
            prod: self.prod.clone(),
            obj: self.obj.twist_outer(rho),
        }
    }

    /// Tensor by an exterior line bundle L (x-leg) boxtimes K (y-leg):
    /// twists the inner linearisation.
    pub fn twist_exterior(
        &self,
        lx: Option<&LineBundle>,
        ly: Option<&LineBundle>,
    ) -> Kernel {
        let gx_order = self.x.group().order();
        let xs = self.x.size();
        let scalars: Vec<Vec<Scalar>> = (0..self.prod.group().order())
            .map(|g| {
                let (gx, gy) = split_group(gx_order, g);
                (0..self.prod.size())
                    .map(|p| {
                        let (px, py) = split_point(xs, p);
                        let ctx = self.obj.eq.lam[0]
                            .values()
                            .next()
                            .map(|m| m.ctx().clone())
                            .unwrap_or_else(|| crate::cyclofield::field(1).unwrap());
                        let mut s = Scalar::one(&ctx);
                        if let Some(l) = lx {
                            s = &s * &l.scalars[gx][px];
                        }
                        if let Some(l) = ly {
                            s = &s * &l.scalars[gy][py];
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let lb = LineBundle { scalars };
        Kernel {
            x: self.x.clone(),
            y: self.y.clone(),
            mu: self.mu.clone(),
            prod: self.prod.clone(),
            obj: HSheaf {
                eq: self.obj.eq.twist_line_bundle(&lb),
                h: self.obj.h.clone(),
                kappa: self.obj.kappa.clone(),
            },
        }
    }

    pub fn shift(&self, m: i32) -> Kernel {
        Kernel {
            x: self.x.clone(),
            y: self.y.clone(),
            mu: self.mu.clone(),
            prod: self.prod.clone(),
            obj: self.obj.shift(m),
        }
    }

    /// Transpose of a plain kernel: the same object read as a kernel in
    /// the opposite direction.
    pub fn transpose_plain(&self, ctx: &Field) -> Kernel {
        assert!(self.mu.is_trivial(), "transpose is for plain kernels");
        let prod_t = stack_product(&self.y, &self.x);
        let xs = self.x.size();
        let ys = self.y.size();
        let gx = self.x.group().order();
        let gy = self.y.group().order();
        let mut dims = Dims::new();
        for (&(p, i), &r) in self.obj.eq.sheaf.support() {
            let (px, py) = split_point(xs, p);
            dims.insert((join_point(ys, py, px), i), r);
        }
        let sheaf = Sheaf::new(&prod_t, dims);
        let lam: Transport = (0..prod_t.group().order())
            .map(|g| {
                let (gy_part, gx_part) = split_group(gy, g);
                let orig = join_group(gx, gx_part, gy_part);
                let mut blocks = BTreeMap::new();
                for (&(p, i), _) in sheaf.support() {
                    let (py, px) = split_point(ys, p);
                    let m = self
                        .obj
                        .eq
                        .lam_block(ctx, orig, join_point(xs, px, py), i);
                    blocks.insert((p, i), m);
                }
                blocks
            })
            .collect();
        Kernel::plain(ctx, &self.y, &self.x, EqSheaf { sheaf, lam }).expect("transpose shapes")
    }
}

/// The canonical diagonal kernel O_Delta with its id_H-linearisation: the
/// unit of convolution.  The fiber at (x, y) has basis {e_g : g.x = y};
/// the inner action is e_g |-> e_(b g a^-1) and the outer action of
/// h = (L, phi) sends e_g to l_h(g, x) e_(sigma_h g).
pub fn canonical_diagonal(ctx: &Field, stack: &Stack, h: &ActingGroup) -> Kernel {
    let prod = stack_product(stack, stack);
    let g = stack.group();
    let xs = stack.size();
    // index of g within the fiber basis at (x, g.x)
    let fiber: Vec<Vec<usize>> = (0..xs)
        .map(|x| {
            (0..xs)
                .map(|_| 0)
                .collect()
        })
        .collect();
    let _ = fiber;
    let members = |x: usize, y: usize| -> Vec<usize> {
        g.elements().filter(|&gg| stack.act(gg, x) == y).collect()
    };
    let mut dims = Dims::new();
    for x in 0..xs {
        for y in 0..xs {
            let m = members(x, y).len();
            if m > 0 {
                dims.insert((join_point(xs, x, y), 0), m);
            }
        }
    }
    let sheaf = Sheaf::new(&prod, dims);
    let lam: Transport = (0..prod.group().order())
        .map(|ab| {
            let (a, b) = split_group(g.order(), ab);
            let mut blocks = BTreeMap::new();
            for x in 0..xs {
                for y in 0..xs {
                    let src = members(x, y);
                    if src.is_empty() {
                        continue;
                    }
                    let tx = stack.act(a, x);
                    let ty = stack.act(b, y);
                    let tgt = members(tx, ty);
                    let mut m = Mat::zeros(ctx, tgt.len(), src.len());
                    for (c, &gg) in src.iter().enumerate() {
                        let img = g.mul(g.mul(b, gg), g.inv(a));
                        let r = tgt.binary_search(&img).expect("orbit closed");
                        m.set(r, c, Scalar::one(ctx));
                    }
                    blocks.insert((join_point(xs, x, y), 0), m);
                }
            }
            blocks
        })
        .collect();
    let eq = EqSheaf { sheaf, lam };
    let mu = MuData::identity(h);
    if h.is_trivial() {
        let obj = HSheaf::plain(ctx, eq);
        return Kernel {
            x: stack.clone(),
            y: stack.clone(),
            mu: MuData::trivial(ctx, stack, stack),
            prod,
            obj,
        };
    }
    let outer = mu_product_action(ctx, &prod, stack, stack, &mu).expect("diagonal outer action");
    let kappa: Transport = h
        .group
        .elements()
        .map(|hh| {
            let el = &h.elements[hh];
            let mut blocks = BTreeMap::new();
            for x in 0..xs {
                for y in 0..xs {
                    let src = members(x, y);
                    if src.is_empty() {
                        continue;
                    }
                    let fx = el.aut.apply(x);
                    let fy = el.aut.apply(y);
                    let tgt = members(fx, fy);
                    let mut m = Mat::zeros(ctx, tgt.len(), src.len());
                    for (c, &gg) in src.iter().enumerate() {
                        let img = el.aut.sigma.apply(gg);
                        let r = tgt.binary_search(&img).expect("sigma respects graphs");
                        m.set(r, c, el.lb.scalars[gg][x].clone());
                    }
                    blocks.insert((join_point(xs, x, y), 0), m);
                }
            }
            blocks
        })
        .collect();
    let obj = HSheaf::new(ctx, eq, &outer, kappa);
    Kernel {
        x: stack.clone(),
        y: stack.clone(),
        mu,
        prod,
        obj,
    }
}

/// Diagonal kernel of the line-bundle twist M_L: the canonical diagonal
/// tensored by O boxtimes L.
pub fn diagonal_line_bundle(
    ctx: &Field,
    stack: &Stack,
    h: &ActingGroup,
    l: &LineBundle,
) -> Kernel {
    canonical_diagonal(ctx, stack, h).twist_exterior(None, Some(l))
}

/// Serre kernel Sigma = Delta_* omega [d] built from the stack's formal
/// Serre data (trivial data gives the canonical diagonal).
pub fn serre_kernel(ctx: &Field, stack: &Stack, h: &ActingGroup) -> Kernel {
    let omega = stack.omega(ctx);
    let d = stack.serre_dim();
    diagonal_line_bundle(ctx, stack, h, &omega).shift(d)
}

/// Graph kernel of a stack isomorphism phi: X -> Y (the kernel of the
/// pushforward phi_*), as the pullback of the canonical diagonal of Y
/// along phi x id.
pub fn graph_kernel(ctx: &Field, x: &Stack, y: &Stack, phi: &StackIso) -> Kernel {
    let prod = stack_product(x, y);
    let diag_y = canonical_diagonal(ctx, y, &ActingGroupData::trivial(ctx, y));
    let ys = y.size();
    let xs = x.size();
    let mut dims = Dims::new();
    for (&(p, i), &r) in diag_y.obj.eq.sheaf.support() {
        let (y1, y2) = split_point(ys, p);
        // all x with phi(x) = y1
        for px in 0..xs {
            if phi.apply(px) == y1 {
                dims.insert((join_point(xs, px, y2), i), r);
            }
        }
    }
    let sheaf = Sheaf::new(&prod, dims);
    let gx_order = x.group().order();
    let lam: Transport = (0..prod.group().order())
        .map(|ab| {
            let (a, b) = split_group(gx_order, ab);
            let mut blocks = BTreeMap::new();
            for (&(p, i), _) in sheaf.support() {
                let (px, py) = split_point(xs, p);
                let src_pt = join_point(ys, phi.apply(px), py);
                let m = diag_y.obj.eq.lam_block(
                    ctx,
                    join_group(y.group().order(), phi.sigma.apply(a), b),
                    src_pt,
                    i,
                );
                blocks.insert((p, i), m);
            }
            blocks
        })
        .collect();
    Kernel::plain(ctx, x, y, EqSheaf { sheaf, lam }).expect("graph kernel shapes")
}

/// Inflation kernel for U <= G on a set X: the kernel of
/// Inf: Db([X/U]) -> Db([X/G]), with fiber basis {e_g : g.x = y} on
/// X x X over U x G.
pub fn inf_kernel(
    ctx: &Field,
    sub_stack: &Stack,
    big_stack: &Stack,
    embed: &[usize],
) -> Kernel {
    let g = big_stack.group();
    let xs = big_stack.size();
    let prod = stack_product(sub_stack, big_stack);
    let members = |x: usize, y: usize| -> Vec<usize> {
        g.elements().filter(|&gg| big_stack.act(gg, x) == y).collect()
    };
    let mut dims = Dims::new();
    for x in 0..xs {
        for y in 0..xs {
            let m = members(x, y).len();
            if m > 0 {
                dims.insert((join_point(xs, x, y), 0), m);
            }
        }
    }
    let sheaf = Sheaf::new(&prod, dims);
    let u_order = sub_stack.group().order();
    let lam: Transport = (0..prod.group().order())
        .map(|ab| {
            let (ui, b) = split_group(u_order, ab);
            let a = embed[ui];
            let mut blocks = BTreeMap::new();
            for x in 0..xs {
                for y in 0..xs {
                    let src = members(x, y);
                    if src.is_empty() {
                        continue;
                    }
                    let tx = big_stack.act(a, x);
                    let ty = big_stack.act(b, y);
                    let tgt = members(tx, ty);
                    let mut m = Mat::zeros(ctx, tgt.len(), src.len());
                    for (c, &gg) in src.iter().enumerate() {
                        let img = g.mul(g.mul(b, gg), g.inv(a));
                        let r = tgt.binary_search(&img).expect("closed");
                        m.set(r, c, Scalar::one(ctx));
                    }
                    blocks.insert((join_point(xs, x, y), 0), m);
                }
            }
            blocks
        })
        .collect();
    Kernel::plain(ctx, sub_stack, big_stack, EqSheaf { sheaf, lam }).expect("inf kernel shapes")
}

/// Restriction kernel: the same underlying sheaf read as a kernel
/// [X/G] -> [X/U].
pub fn res_kernel(
    ctx: &Field,
    big_stack: &Stack,
    sub_stack: &Stack,
    embed: &[usize],
) -> Kernel {
    let g = big_stack.group();
    let xs = big_stack.size();
    let prod = stack_product(big_stack, sub_stack);
    let members = |x: usize, y: usize| -> Vec<usize> {
        g.elements().filter(|&gg| big_stack.act(gg, x) == y).collect()
    };
    let mut dims = Dims::new();
    for x in 0..xs {
        for y in 0..xs {
            let m = members(x, y).len();
            if m > 0 {
                dims.insert((join_point(xs, x, y), 0), m);
            }
        }
    }
    let sheaf = Sheaf::new(&prod, dims);
    let g_order = g.order();
    let lam: Transport = (0..prod.group().order())
        .map(|ab| {
            let (a, ui) = split_group(g_order, ab);
            let b = embed[ui];
            let mut blocks = BTreeMap::new();
            for x in 0..xs {
                for y in 0..xs {
                    let src = members(x, y);
                    if src.is_empty() {
                        continue;
                    }
                    let tx = big_stack.act(a, x);
                    let ty = big_stack.act(b, y);
                    let tgt = members(tx, ty);
                    let mut m = Mat::zeros(ctx, tgt.len(), src.len());
                    for (c, &gg) in src.iter().enumerate() {
                        let img = g.mul(g.mul(b, gg), g.inv(a));
                        let r = tgt.binary_search(&img).expect("closed");
                        m.set(r, c, Scalar::one(ctx));
                    }
                    blocks.insert((join_point(xs, x, y), 0), m);
                }
            }
            blocks
        })
        .collect();
    Kernel::plain(ctx, big_stack, sub_stack, EqSheaf { sheaf, lam }).expect("res kernel shapes")
}

/// Applies the transform: FM_P(E) = pr_(Y*)(pr_X^* E tensor P), taking
/// invariants over the source groupoid; the H'-linearisation of the image
/// is induced by the kernel's outer structure.
pub fn fm_apply(ctx: &Field, k: &Kernel, e: &HSheaf) -> Result<HSheaf, KernelError> {
    if **e.stack() != *k.x {
        return Err(KernelError::Mismatch("input is not on the source stack".into()));
    }
    if !e.h.is_trivial() && *e.h != *k.mu.hx {
        return Err(KernelError::Mismatch("input outer action mismatch".into()));
    }
    let gx = k.x.group();
    let xs = k.x.size();
    let ys = k.y.size();
    // big fiber at (y, i): sum over x and i1+i2 = i of E_(x,i1) tensor P_((x,y),i2)
    struct Seg {
        x: usize,
        i1: i32,
        d1: usize,
        d2: usize,
        offset: usize,
    }
    let seg_layout = |y: usize, i: i32| -> Vec<Seg> {
        let mut segs = Vec::new();
        let mut off = 0;
        for x in 0..xs {
            for (&(sx, i1), &d1) in e.eq.sheaf.support() {
                if sx != x {
                    continue;
                }
                let d2 = k.obj.eq.sheaf.dim(join_point(xs, x, y), i - i1);
                if d1 * d2 > 0 {
                    segs.push(Seg {
                        x,
                        i1,
                        d1,
                        d2,
                        offset: off,
                    });
                    off += d1 * d2;
                }
            }
        }
        segs
    };
    // degrees that can occur in the result
    let mut degrees: Vec<i32> = Vec::new();
    for (&(_, i1), _) in e.eq.sheaf.support() {
        for (&(_, i2), _) in k.obj.eq.sheaf.support() {
            if !degrees.contains(&(i1 + i2)) {
                degrees.push(i1 + i2);
            }
        }
    }
    degrees.sort_unstable();
    // invariants per (y, i)
    let inv_scale = Scalar::from_int(ctx, gx.order() as i64).inv();
    let mut inc_map: BTreeMap<(usize, i32), Mat> = BTreeMap::new();
    let mut proj_map: BTreeMap<(usize, i32), Mat> = BTreeMap::new();
    let mut dims = Dims::new();
    for y in 0..ys {
        for &i in &degrees {
            let segs = seg_layout(y, i);
            let total: usize = segs.iter().map(|s| s.d1 * s.d2).sum();
            if total == 0 {
                continue;
            }
            // averaging projector over G_X
            let mut p = Mat::zeros(ctx, total, total);
            for g in gx.elements() {
                // transport: segment (x, i1) -> (g.x, i1)
                for s in &segs {
                    let tx = k.x.act(g, s.x);
                    let t = segs
                        .iter()
                        .find(|t| t.x == tx && t.i1 == s.i1)
                        .expect("equivariant dims");
                    let m1 = e.eq.lam_block(ctx, g, s.x, s.i1);
                    let m2 = k.obj.eq.lam_block(
                        ctx,
                        join_group(gx.order(), g, 0),
                        join_point(xs, s.x, y),
                        i - s.i1,
                    );
                    let kr = m1.kron(&m2).scale(&inv_scale);
                    for rr in 0..kr.rows {
                        for cc in 0..kr.cols {
                            let v = p.at(t.offset + rr, s.offset + cc) + kr.at(rr, cc);
                            p.set(t.offset + rr, s.offset + cc, v);
                        }
                    }
                }
            }
            let inc = p.image_basis();
            if inc.cols == 0 {
                continue;
            }
            let proj = inc.solve(&p).expect("projector factors");
            dims.insert((y, i), inc.cols);
            inc_map.insert((y, i), inc);
            proj_map.insert((y, i), proj);
        }
    }
    let sheaf = Sheaf::new(&k.y, dims);
    // transport a big-fiber map and conjugate by (inc, proj)
    let conj = |src_y: usize,
                i: i32,
                tgt_y: usize,
                blockf: &dyn Fn(&Seg) -> (usize, i32, Mat)|
     -> Mat {
        let segs_src = seg_layout(src_y, i);
        let segs_tgt = seg_layout(tgt_y, i);
        let total_src: usize = segs_src.iter().map(|s| s.d1 * s.d2).sum();
        let total_tgt: usize = segs_tgt.iter().map(|s| s.d1 * s.d2).sum();
        let mut big = Mat::zeros(ctx, total_tgt, total_src);
        for s in &segs_src {
            let (tx, ti1, m) = blockf(s);
            if let Some(t) = segs_tgt.iter().find(|t| t.x == tx && t.i1 == ti1) {
                for rr in 0..m.rows.min(t.d1 * t.d2) {
                    for cc in 0..m.cols {
                        big.set(t.offset + rr, s.offset + cc, m.at(rr, cc).clone());
                    }
                }
            }
        }
        let inc = &inc_map[&(src_y, i)];
        let proj = &proj_map[&(tgt_y, i)];
        proj.mul(&big.mul(inc))
    };
    let gy = k.y.group();
    let lam: Transport = gy
        .elements()
        .map(|b| {
            let mut blocks = BTreeMap::new();
            for (&(y, i), _) in sheaf.support() {
                let by = k.y.act(b, y);
                if !inc_map.contains_key(&(by, i)) {
                    continue;
                }
                let m = conj(y, i, by, &|s: &Seg| {
                    let m2 = k.obj.eq.lam_block(
                        ctx,
                        join_group(gx.order(), 0, b),
                        join_point(xs, s.x, y),
                        i - s.i1,
                    );
                    (s.x, s.i1, Mat::identity(ctx, s.d1).kron(&m2))
                });
                blocks.insert((y, i), m);
            }
            blocks
        })
        .collect();
    // outer layer
    let hy = &k.mu.hy;
    let kappa: Transport = hy
        .group
        .elements()
        .map(|hp| {
            let h = k.mu.iso.inverse().apply(hp);
            let fy = hy.point_map(hp).to_vec();
            let fx = k.mu.hx.point_map(h).to_vec();
            let mut blocks = BTreeMap::new();
            for (&(y, i), _) in sheaf.support() {
                if !inc_map.contains_key(&(fy[y], i)) {
                    continue;
                }
                let m = conj(y, i, fy[y], &|s: &Seg| {
                    let m1 = e.kappa_block(ctx, h, s.x, s.i1);
                    let m2 = k
                        .obj
                        .kappa_block(ctx, h, join_point(xs, s.x, y), i - s.i1);
                    (fx[s.x], s.i1, m1.kron(&m2))
                });
                blocks.insert((y, i), m);
            }
            blocks
        })
        .collect();
    Ok(HSheaf::new(
        ctx,
        EqSheaf { sheaf, lam },
        hy,
        kappa,
    ))
}

/// FM transform in the opposite direction for a plain kernel.
pub fn fm_apply_reverse(ctx: &Field, k: &Kernel, e: &HSheaf) -> Result<HSheaf, KernelError> {
    fm_apply(ctx, &k.transpose_plain(ctx), e)
}

/// The generating family of Db([X/G]): orbit skyscrapers induced from
/// trivial stabilizer characters (every object is a summand of sums of
/// these in the semisimple model).
pub fn generators(ctx: &Field, stack: &Stack) -> Vec<HSheaf> {
    let mut out = Vec::new();
    let mut seen = vec![false; stack.size()];
    for x in 0..stack.size() {
        if seen[x] {
            continue;
        }
        for g in stack.group().elements() {
            seen[stack.act(g, x)] = true;
        }
        let ri = crate::equivar::ResInf::new(
            &stack.gset,
            &crate::finitegroup::Subgroup::trivial(stack.group()),
        );
        let e = EqSheaf::on_plain(ctx, Sheaf::skyscraper(&ri.sub_stack, x, 0));
        let inf = ri.inf(ctx, &e);
        // reindex onto the given stack (same gset, different label)
        let sheaf = Sheaf::new(stack, inf.sheaf.support().map(|(&k, &v)| (k, v)).collect());
        out.push(HSheaf::plain(ctx, EqSheaf { sheaf, lam: inf.lam }));
    }
    out
}

#[cfg(test)]
mod tests;
