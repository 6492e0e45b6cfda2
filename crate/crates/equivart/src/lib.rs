//! Exact verification of the equivariant Fourier-Mukai calculus on finite
//! groupoid models.
//!
//! Spaces are finite G-sets viewed as quotient stacks `[X/G]`; coherent
//! sheaves are Z-graded, finitely supported vector bundles over the
//! cyclotomic field Q(zeta_N) with explicit linearisation matrices.  In
//! this model every categorical statement of the calculus (adjunctions,
//! kernel convolution, lifts to equivariant categories, Hochschild
//! decompositions, spherical and P^n axioms) is a finite, exact linear
//! algebra computation, so each one can be certified rather than trusted.
//!
//! Layout:
//! * [`cyclofield`] - exact arithmetic in Q(zeta_N).
//! * [`linalg`] - dense matrices over the cyclotomic field.
//! * [`intlin`] - integer linear algebra (Smith normal form, Z/N solving).
//! * [`finitegroup`] - groups by Cayley table, characters, 2-cocycles.
//! * [`gspace`] - finite G-sets, quotient stacks, Galois covers.
//! * [`gsheaf`] - graded equivariant sheaves and their morphism calculus.
//! * [`equivar`] - equivariantisation: linearisations, Res/Inf, duality.
//! * [`fmkernel`] - kernels, convolution, adjoints, spherical/P^n axioms.
//! * [`hochschild`] - orbifold Hochschild homology and kernel pullbacks.
//! * [`theorems`] - lift/descent along covers and the extraction harness.
//! * [`catalog`] - the named instances exercised by the verification suite.
//! * [`cli`] - session files, command dispatch, reports.

pub mod catalog;
pub mod cli;
pub mod cyclofield;
pub mod equivar;
pub mod finitegroup;
pub mod fmkernel;
pub mod gsheaf;
pub mod gspace;
pub mod hochschild;
pub mod intlin;
pub mod linalg;
pub mod theorems;
