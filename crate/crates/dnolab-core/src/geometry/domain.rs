//! Domains `{ρ < 0} ⊂ ℂⁿ` given by polynomial defining functions, plus the
//! boundary normalization `ρ ↦ ρ/|∇ρ|` and jet evaluation of the normalized
//! function.
//!
//! Points are handled in 2n real coordinates `(Re z₁, Im z₁, …)`.  Jets are
//! returned over the 2n Wirtinger directions; [`RhoJet`] converts between
//! Wirtinger and real-coordinate derivatives.

use super::poly::{DerivTables, Jet, Poly};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("unknown builtin domain `{0}`")]
    UnknownBuiltin(String),
    #[error("defining function is not real-valued: |Im ρ| = {0:.3e} at a sample point")]
    NotReal(f64),
    #[error("gradient of ρ vanishes (|∇ρ|² = {0:.3e}) at the requested point")]
    DegenerateGradient(f64),
    #[error("point is not on the boundary: ρ = {0:.3e} (tolerance {1:.1e})")]
    NotOnBoundary(f64, f64),
    #[error("frame Gram–Schmidt broke down: remaining norm {0:.3e} below threshold")]
    FrameBreakdown(f64),
    #[error("Newton projection onto the boundary failed to converge (residual {0:.3e})")]
    ProjectionFailed(f64),
    #[error(
        "chart radius too large: Ξ²(x,ξ) = {0:.3e} not positive at |x| = {1:.3e}; \
         rebuild the chart with a smaller radius"
    )]
    ChartRadiusTooLarge(f64, f64),
    #[error("chart evaluation outside chart radius: |x| = {0:.3e} > {1:.3e}")]
    OutsideChart(f64, f64),
    #[error("{0}")]
    Invalid(String),
}

/// A smoothly bounded domain `{ρ < 0}` with polynomial defining data.
#[derive(Debug, Clone)]
pub struct Domain {
    pub n: usize,
    pub name: String,
    rho0: Poly,
    tables_rho0: DerivTables,
    tables_q: DerivTables,
    /// whether jets report ρ₀/√Q instead of raw ρ₀.
    pub normalized: bool,
}

impl Domain {
    /// Builds a domain from a polynomial table, verifying real-valuedness at
    /// scattered sample points.
    pub fn from_poly(name: &str, rho0: Poly) -> Result<Self, GeometryError> {
        let n = rho0.n;
        // deterministic low-discrepancy-ish samples
        let mut worst = 0.0f64;
        for s in 0..7 {
            let w: Vec<f64> = (0..2 * n)
                .map(|k| (((s * 2 * n + k) as f64 * 0.734_217 + 0.21).sin()) * 0.8)
                .collect();
            let v = rho0.eval(&w);
            worst = worst.max(v.im.abs());
        }
        if worst > 1e-10 {
            return Err(GeometryError::NotReal(worst));
        }
        let q = rho0.grad_norm_sq();
        Ok(Domain {
            n,
            name: name.to_string(),
            tables_rho0: DerivTables::build(&rho0),
            tables_q: DerivTables::build(&q),
            rho0,
            normalized: false,
        })
    }

    /// Registry of built-in domains.
    ///
    /// * `halfspace-flat` — Re z_n (any n ≥ 2)
    /// * `siegel`         — Re z₂ + |z₁|²  (n = 2)
    /// * `ball`           — |z|² − 1       (any n ≥ 2)
    /// * `weak-q4`        — Re z₂ + |z₁|⁴  (n = 2)
    pub fn builtin(name: &str, n: usize) -> Result<Self, GeometryError> {
        assert!(n >= 2, "domains require n >= 2");
        let re_coord = |poly: Poly, j: usize, n: usize| -> Poly {
            let mut ez = vec![0u8; n];
            ez[j] = 1;
            let p = poly.real_term(0.5, &ez, &vec![0u8; n]);
            p.real_term(0.5, &vec![0u8; n], &ez)
        };
        let rho0 = match name {
            "halfspace-flat" => re_coord(Poly::new(n), n - 1, n),
            "siegel" => {
                assert_eq!(n, 2, "siegel is a domain in C^2");
                re_coord(Poly::new(2), 1, 2).real_term(1.0, &[1, 0], &[1, 0])
            }
            "ball" => {
                let mut p = Poly::new(n).real_term(-1.0, &vec![0u8; n], &vec![0u8; n]);
                for j in 0..n {
                    let mut e = vec![0u8; n];
                    e[j] = 1;
                    let ec = e.clone();
                    p = p.real_term(1.0, &e, &ec);
                }
                p
            }
            "weak-q4" => {
                assert_eq!(n, 2, "weak-q4 is a domain in C^2");
                re_coord(Poly::new(2), 1, 2).real_term(1.0, &[2, 0], &[2, 0])
            }
            other => return Err(GeometryError::UnknownBuiltin(other.to_string())),
        };
        Self::from_poly(name, rho0)
    }

    /// Default base point for a builtin (on the boundary).
    pub fn default_base_point(&self) -> Vec<f64> {
        let mut p = vec![0.0; 2 * self.n];
        if self.name == "ball" {
            p[0] = 1.0;
        }
        p
    }

    /// Raw (unnormalized) ρ₀ value.
    pub fn rho0_value(&self, w: &[f64]) -> f64 {
        self.rho0.eval(w).re
    }

    /// Jet of the active defining function (raw or normalized) at `w`,
    /// over the 2n Wirtinger directions.
    pub fn rho_jet(&self, w: &[f64], order: usize) -> Jet {
        if !self.normalized {
            return self.tables_rho0.jet(w, order);
        }
        let jr = self.tables_rho0.jet(w, order);
        let jq = self.tables_q.jet(w, order);
        jr.mul(&jq.recip_sqrt())
    }

    /// Value of the active defining function.
    pub fn rho(&self, w: &[f64]) -> f64 {
        self.rho_jet(w, 1).v.re
    }

    /// `|∇ρ₀|²` (value of the gradient-norm polynomial of the raw function).
    pub fn q_value(&self, w: &[f64]) -> f64 {
        self.tables_q.jet(w, 1).v.re
    }
}

/// Normalizes the defining function so that `|∇ρ| = 1` holds on the
/// boundary: replaces ρ by ρ/|∇ρ| pointwise.  Idempotent; fails if the
/// gradient degenerates at the given reference point.
pub fn normalize_defining(domain: &Domain, at: &[f64]) -> Result<Domain, GeometryError> {
    let q = domain.q_value(at);
    if !(q > 1e-12) {
        return Err(GeometryError::DegenerateGradient(q));
    }
    let mut d = domain.clone();
    d.normalized = true;
    Ok(d)
}

/// Wrapper around a Wirtinger jet providing real-coordinate derivative
/// accessors.  Direction convention for the underlying jet: index `j < n`
/// is ∂z_{j+1}, index `n + j` is ∂z̄_{j+1}.  Real coordinates are ordered
/// `(x₁, y₁, …, x_n, y_n)` with `z_j = x_j + i y_j`.
#[derive(Debug, Clone)]
pub struct RhoJet {
    pub n: usize,
    pub jet: Jet,
}

impl RhoJet {
    pub fn new(n: usize, jet: Jet) -> Self {
        RhoJet { n, jet }
    }

    pub fn value(&self) -> f64 {
        self.jet.v.re
    }

    /// ∂ρ/∂z_j (0-based j).
    pub fn dz(&self, j: usize) -> Complex64 {
        self.jet.d1[j]
    }

    /// ∂ρ/∂z̄_j.
    pub fn dzbar(&self, j: usize) -> Complex64 {
        self.jet.d1[self.n + j]
    }

    /// Second Wirtinger derivative; directions use jet indexing
    /// (a, b in 0..2n).
    pub fn w2(&self, a: usize, b: usize) -> Complex64 {
        self.jet.g2(a, b)
    }

    /// Real gradient (∂ρ/∂x₁, ∂ρ/∂y₁, …); exactly real for real ρ.
    pub fn real_gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; 2 * self.n];
        for j in 0..self.n {
            let dz = self.dz(j);
            g[2 * j] = 2.0 * dz.re;
            g[2 * j + 1] = -2.0 * dz.im;
        }
        g
    }

    /// `|∇ρ|²` computed from first Wirtinger derivatives:
    /// `4 Σ_j ∂_{z_j}ρ ∂_{z̄_j}ρ`.
    pub fn grad_sq(&self) -> f64 {
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..self.n {
            s += self.dz(j) * self.dzbar(j);
        }
        (4.0 * s).re
    }

    /// Derivative of the first Wirtinger derivative `∂ρ/∂(dir a)` along a
    /// *real* coordinate direction `r` (0..2n, real-coords ordering).
    /// `∂/∂x_l = ∂z_l + ∂z̄_l`, `∂/∂y_l = i(∂z_l − ∂z̄_l)`.
    pub fn w1_real_deriv(&self, a: usize, r: usize) -> Complex64 {
        let l = r / 2;
        if r % 2 == 0 {
            self.w2(a, l) + self.w2(a, self.n + l)
        } else {
            (self.w2(a, l) - self.w2(a, self.n + l)) * Complex64::new(0.0, 1.0)
        }
    }

    /// Real-coordinate Hessian entry ∂²ρ/∂w_r∂w_s (real for real ρ).
    pub fn real_hessian(&self, r: usize, s: usize) -> f64 {
        // expand both real directions into Wirtinger pairs
        let expand = |r: usize| -> [(usize, Complex64); 2] {
            let l = r / 2;
            if r % 2 == 0 {
                [
                    (l, Complex64::new(1.0, 0.0)),
                    (self.n + l, Complex64::new(1.0, 0.0)),
                ]
            } else {
                [
                    (l, Complex64::new(0.0, 1.0)),
                    (self.n + l, Complex64::new(0.0, -1.0)),
                ]
            }
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, ca) in expand(r) {
            for (b, cb) in expand(s) {
                acc += ca * cb * self.w2(a, b);
            }
        }
        acc.re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtin_registry() {
        for (name, n) in [
            ("halfspace-flat", 3),
            ("siegel", 2),
            ("ball", 2),
            ("ball", 4),
            ("weak-q4", 2),
        ] {
            let d = Domain::builtin(name, n).unwrap();
            assert_eq!(d.n, n);
            let p = d.default_base_point();
            assert!(d.rho0_value(&p).abs() < 1e-14, "{name} base point on boundary");
        }
        assert!(Domain::builtin("torus", 2).is_err());
    }

    #[test]
    fn normalization_makes_unit_gradient_on_boundary() {
        // raw ball gradient norm on the boundary is 2; normalized is 1
        let d = Domain::builtin("ball", 2).unwrap();
        let p = d.default_base_point();
        assert_relative_eq!(d.q_value(&p).sqrt(), 2.0, epsilon = 1e-12);
        let dn = normalize_defining(&d, &p).unwrap();
        let jet = dn.rho_jet(&p, 1);
        let rj = RhoJet::new(2, jet);
        assert_relative_eq!(rj.grad_sq(), 1.0, epsilon = 1e-9);
        // also at another boundary point
        let q = [0.6, 0.0, 0.0, 0.8];
        let rj2 = RhoJet::new(2, dn.rho_jet(&q, 1));
        assert_relative_eq!(rj2.grad_sq(), 1.0, epsilon = 1e-9);
        // idempotent: normalizing again changes nothing
        let dn2 = normalize_defining(&dn, &p).unwrap();
        assert_relative_eq!(dn2.rho(&q), dn.rho(&q), epsilon = 1e-15);
    }

    #[test]
    fn normalization_is_scale_invariant() {
        let d1 = Domain::builtin("ball", 2).unwrap();
        let scaled = {
            let raw = Poly::new(2)
                .real_term(3.0, &[1, 0], &[1, 0])
                .real_term(3.0, &[0, 1], &[0, 1])
                .real_term(-3.0, &[0, 0], &[0, 0]);
            Domain::from_poly("ball-scaled", raw).unwrap()
        };
        let p = [1.0, 0.0, 0.0, 0.0];
        let n1 = normalize_defining(&d1, &p).unwrap();
        let n3 = normalize_defining(&scaled, &p).unwrap();
        for w in [[0.8, 0.1, 0.05, 0.2], [1.1, -0.2, 0.1, 0.0]] {
            assert_relative_eq!(n1.rho(&w), n3.rho(&w), epsilon = 1e-10);
        }
    }

    #[test]
    fn halfspace_normalization_is_identity() {
        let d = Domain::builtin("halfspace-flat", 2).unwrap();
        let p = d.default_base_point();
        let dn = normalize_defining(&d, &p).unwrap();
        for w in [[0.3, -0.2, 0.05, 0.4], [0.0, 0.0, -0.3, 0.1]] {
            assert_relative_eq!(dn.rho(&w), d.rho0_value(&w), epsilon = 1e-14);
        }
    }

    #[test]
    fn normalized_jets_match_finite_differences() {
        let d = Domain::builtin("ball", 2).unwrap();
        let p = d.default_base_point();
        let dn = normalize_defining(&d, &p).unwrap();
        // ρ̂ = (|z|²−1)/(2|z|); check real gradient and Hessian entries by FD
        let f = |w: &[f64]| dn.rho(w);
        let w0 = [0.9, 0.1, -0.15, 0.25];
        let rj = RhoJet::new(2, dn.rho_jet(&w0, 2));
        let h = 1e-5;
        for r in 0..4 {
            let mut wp = w0;
            wp[r] += h;
            let mut wm = w0;
            wm[r] -= h;
            let fd = (f(&wp) - f(&wm)) / (2.0 * h);
            assert_relative_eq!(rj.real_gradient()[r], fd, epsilon = 1e-8);
        }
        for r in 0..4 {
            for s in 0..4 {
                let mut wpp = w0;
                wpp[r] += h;
                wpp[s] += h;
                let mut wpm = w0;
                wpm[r] += h;
                wpm[s] -= h;
                let mut wmp = w0;
                wmp[r] -= h;
                wmp[s] += h;
                let mut wmm = w0;
                wmm[r] -= h;
                wmm[s] -= h;
                let fd = (f(&wpp) - f(&wpm) - f(&wmp) + f(&wmm)) / (4.0 * h * h);
                assert_relative_eq!(rj.real_hessian(r, s), fd, epsilon = 2e-6);
            }
        }
    }

    #[test]
    fn degenerate_gradient_rejected() {
        // ρ = |z₁|² has vanishing gradient at the origin
        let raw = Poly::new(2).real_term(1.0, &[1, 0], &[1, 0]);
        let d = Domain::from_poly("degenerate", raw).unwrap();
        assert!(matches!(
            normalize_defining(&d, &[0.0, 0.0, 0.0, 0.0]),
            Err(GeometryError::DegenerateGradient(_))
        ));
    }

    #[test]
    fn complex_coefficient_tables_must_be_real() {
        let raw = Poly::new(2).term(Complex64::new(0.0, 1.0), &[1, 0], &[0, 0]);
        assert!(matches!(
            Domain::from_poly("imag", raw),
            Err(GeometryError::NotReal(_))
        ));
    }
}
