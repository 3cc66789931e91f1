//! Domains, boundary-adapted frames, and boundary charts.
//!
//! The pipeline: a polynomial defining function ([`Poly`]) becomes a
//! [`Domain`]; [`normalize_defining`] rescales it so `|∇ρ| = 1` on the
//! boundary; [`build_chart`] erects boundary coordinates at a base point in
//! which ρ is exactly the last coordinate, `T = ∂/∂x_{2n−1}` on the
//! boundary, and `L_n = (1/√2)∂_ρ + iT`.  The chart exposes everything the
//! operator assembly consumes: frame coefficients λʲ and their variable
//! parts ℓʲ, the Levi form, structure constants `c`, adjoint zero-order
//! terms `d`, the transverse expansion of T, and the boundary symbol Ξ².

mod chart;
mod domain;
mod frame;
mod poly;

pub use chart::{
    build_chart, c_coefficient, d_coefficient, d_quadrature_residuals, divergence_fd4, levi_data,
    transverse_expansion, xi_squared, BoundaryChart, ChartPoint, TransverseData, XiSquared,
};
pub use domain::{normalize_defining, Domain, GeometryError, RhoJet};
pub use frame::{
    build_frame, gamma_field, l_n_coeffs, normal_field_and_jac, transverse_field_and_jac, Frame,
};
pub use poly::{DerivTables, Jet, Monomial, Poly};
