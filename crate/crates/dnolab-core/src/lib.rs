//! Two-term Dirichlet-to-Neumann (DNO) symbol of the ∂̄-Neumann Laplacian on
//! smoothly bounded domains in ℂⁿ.
//!
//! The library computes, for a boundary point of a domain `{ρ < 0}`, the
//! symbol
//!
//! ```text
//! σ(N⁻)(x,ξ) = |Ξ(x,ξ)| + (√2/2)s₀ + a₀/(2|Ξ|) − ¼ Σ τ₀^{jk} ξ_jξ_k / Ξ²
//!              + (3i/8) ∂_ξΞ² · ∂_xΞ² / |Ξ|³
//! ```
//!
//! of the operator mapping Dirichlet boundary data of a solution of
//! `2□v = 0` to its outward normal derivative, together with the microlocal
//! boundary equation built from it and the conformally perturbed (φ-weighted)
//! variant.  Every coefficient is verified against independent combinatorial,
//! residue-calculus, and ODE/PDE oracles.
//!
//! Module map:
//! - [`forms`] — ordered multi-index algebra and ε-sign combinatorics for
//!   (0,q)-form components;
//! - [`geometry`] — boundary charts: orthonormal (1,0) frame with
//!   `ω_n = √2∂ρ`, chart coordinates, Levi data, structure (c) and adjoint (d)
//!   coefficients, transverse expansion, and the Ξ² symbol;
//! - [`symbols`] — exact residue engine for rational functions of the dual
//!   normal variable η and two-term symbol composition/inversion;
//! - [`operator_assembly`] — the chart-local form of `2□` (and `2□_φ`):
//!   Γ/S/A/τ, plus direct numeric appliers for ∂̄ and ∂̄*;
//! - [`dno`] — the DNO symbol, its asymptotics, microlocal cutoffs, the
//!   boundary operator with Υ⁰, the Kohn-Laplacian comparison, and the
//!   φ-perturbed pipeline;
//! - [`oracle`] — independent numerical ground truth: ODE/strip solvers,
//!   adaptive quadrature, and the brute-force operator cross-check.

pub mod dno;
pub mod forms;
pub mod geometry;
pub mod operator_assembly;
pub mod oracle;
pub mod symbols;
