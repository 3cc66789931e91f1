//! Independent numerical ground truth for the symbol pipeline.
//!
//! Everything here is a *separate computational pathway* from the
//! residue/symbol machinery it validates:
//!
//! - [`quad_eta_integral`] — adaptive quadrature over the real η-line (used
//!   against the exact residue engine);
//! - [`ode_dno`] — per-frequency two-point boundary-value solves of the
//!   chart-local equation `−v'' + Ξ²v + √2 s₀ v' + a₀ v + ρτ₀ v = 0`, whose
//!   `v'(0)` is the DNO value that the two-term symbol predicts;
//! - [`strip_dno`] — a 2-D periodic-strip finite-difference solve isolating
//!   the x-dependent symbol-composition term of the DNO;
//! - `square_crosscheck` — brute-force `∂̄∂̄* + ∂̄*∂̄` application compared
//!   coefficient-by-coefficient with the assembled chart-local operator.
//!
//! Independence is structural: the oracles share *data containers* with the
//! rest of the crate (e.g. the rational-function and chart descriptions) but
//! none of its computational routes — no residues, no symbol composition, no
//! assembled coefficient formulas.  Comparisons against those happen in the
//! callers (tests and the CLI verification suites).

mod crosscheck;
mod ode;
mod quad;
mod strip;

pub use crosscheck::{square_crosscheck, SquareCrosscheckReport};
pub use ode::{ode_dno, OdeError, OdeProblem};
pub use quad::{quad_eta_integral, QuadError};
pub use strip::{strip_dno, StripError, StripProblem, StripReport};
