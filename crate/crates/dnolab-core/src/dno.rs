//! Two-term Dirichlet-to-Neumann symbol and the boundary equation built on it.
//!
//! The centerpiece is [`dno_symbol`]: the first two homogeneous terms of the
//! DNO for the doubled complex Laplacian on a boundary chart,
//!
//! ```text
//! σ(N⁻)(x, ξ) = |Ξ(x,ξ)|                                  (principal, degree 1)
//!             + (√2/2)·s₀(x)                              (normal-derivative channel)
//!             + a₀(x,ξ)/(2|Ξ|)                            (tangential first-order channel)
//!             − ¼ Σ τ^{jk}(x) ξ_j ξ_k / Ξ²                (ρ-weighted second-order channel)
//!             + (3i/8) ∂_ξΞ² · ∂_xΞ² / |Ξ|³               (parametrix-correction channel)
//! ```
//!
//! over the boundary-data rows J ∌ n (the first Neumann-type boundary
//! condition kills the other components).  The four zero-order coefficients
//! are not axioms here: [`lambda0_from_residues`] re-derives them by driving
//! the contour integrator through the six boundary-restriction channels of
//! the interior parametrix construction and solving the resulting balance
//! equation, erroring with the failing channel's name if any constant drifts
//! from its pinned value.
//!
//! On top of the symbol sit the boundary-equation tools: the large-|ξ_{2n−1}|
//! asymptotics in both closed forms ([`dno_asymptotic`]), the conic cutoffs
//! ψ± / ψ⁰ ([`microlocal_cutoffs`]), the zero-order block Υ⁰ and the full
//! boundary operator (1/√2)N₁⁻ − iT⁰ + Υ⁰ with its two-term composition
//! against (1/√2)N₁⁻ + iT⁰ ([`upsilon_symbol`], [`boundary_operator_symbol`]),
//! the comparison of that composition with the tangential-field product form
//! ([`kohn_comparison`]), and the ρ-weighted perturbation □_φ with its
//! boundary-equation cancellation ([`dno_symbol_phi`], [`cancellation_check`]).
//!
//! Exactness conventions: channel constants are dyadic rationals, so the
//! residue engine reproduces them with zero floating-point deviation, and the
//! tests assert `==`.  Cancellations asserted "exact" are computed through
//! division by √2 (never multiplication by a rounded 1/√2), which is what
//! makes `(1/√2)·√2·t − t` vanish identically on dyadic rays.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::forms::{FormsError, MultiIndex};
use crate::geometry::{xi_squared, BoundaryChart, GeometryError, XiSquared};
use crate::operator_assembly::{AssemblyError, LocalOperator, PhiProfile};
use crate::symbols::{
    compose_two_term, eta_integral, GradedSymbolValue, IntegralMode, RationalEta, SymbolJet,
    SymbolsError,
};

/// Errors from DNO-symbol evaluation.
#[derive(Debug, Error)]
pub enum DnoError {
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Symbols(#[from] SymbolsError),
    /// |Ξ(x,ξ)| fell below the 1e−8·|ξ| floor (or ξ = 0): the microlocal
    /// construction lives away from the characteristic variety, so this is
    /// an error rather than a regularization.
    #[error("degenerate frequency: |Ξ| = {principal:e} with |ξ| = {xi_norm:e}")]
    DegenerateFrequency { principal: f64, xi_norm: f64 },
    /// A restriction-channel integral came out different from its pinned
    /// value — some sign or normalization convention has drifted.
    #[error("convention drift in channel {channel}: got {got}, want {want}")]
    ConventionDrift {
        channel: String,
        got: Complex64,
        want: Complex64,
    },
    #[error("shape error: {0}")]
    Shape(String),
}

// ---------------------------------------------------------------------------
// DNO symbol
// ---------------------------------------------------------------------------

/// First two homogeneous terms of the DNO at a chart point, over the
/// boundary-data rows J ∌ n.
#[derive(Debug, Clone)]
pub struct DnoSymbol {
    /// |Ξ(x, ξ)| — degree-1 principal part (scalar times identity).
    pub principal: f64,
    /// Degree-0 matrix over `rows` × `rows`.
    pub zero_order: DMatrix<Complex64>,
    /// The row index set: all J with |J| = q and n ∉ J, in lexicographic
    /// order.
    pub rows: Vec<MultiIndex>,
    /// Per-channel matrices; they sum to `zero_order` by construction.  Keys
    /// are `s-term`, `a-term`, `tau-term`, `xx-term`, plus the four
    /// `phi-*` channels when built by [`dno_symbol_phi`].
    pub term_breakdown: BTreeMap<String, DMatrix<Complex64>>,
    /// Evaluation point (x, ξ).
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

/// Boundary-data rows: all J with |J| = q, n ∉ J.
fn boundary_rows(n: usize, q: usize) -> Result<Vec<MultiIndex>, DnoError> {
    let rows: Vec<MultiIndex> = MultiIndex::all(n, q)
        .into_iter()
        .filter(|j| !j.contains(n))
        .collect();
    if rows.is_empty() {
        return Err(DnoError::Shape(format!(
            "no boundary rows for degree q = {q} in n = {n}: every index contains n"
        )));
    }
    Ok(rows)
}

/// Checks the frequency is usable and returns (Ξ-data, |Ξ|, |ξ|).
fn principal_data(
    chart: &BoundaryChart,
    x: &[f64],
    xi: &[f64],
) -> Result<(XiSquared, f64, f64), DnoError> {
    let xi_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if xi_norm == 0.0 {
        return Err(DnoError::DegenerateFrequency {
            principal: 0.0,
            xi_norm,
        });
    }
    let xs = xi_squared(chart, x, xi)?;
    let principal = xs.value.sqrt();
    if principal < 1e-8 * xi_norm {
        return Err(DnoError::DegenerateFrequency { principal, xi_norm });
    }
    Ok((xs, principal, xi_norm))
}

/// The five-term evaluation shared by [`dno_symbol`] and [`dno_symbol_phi`].
///
/// The `s`/`τ`/`xx` channels are closed forms of the unweighted operator; the
/// `a` channel is extracted by first-order monomial probes through `probe_op`
/// (which carries the φ-weighting in the perturbed variant — the weighting
/// provably does not move the tangential first-order coefficients at ρ = 0,
/// and probing the weighted operator keeps that an empirical fact rather
/// than an assumption).
fn assemble_dno(
    chart: &BoundaryChart,
    x: &[f64],
    xi: &[f64],
    q: usize,
    probe_op: &LocalOperator,
) -> Result<DnoSymbol, DnoError> {
    let n = chart.n();
    let dim = 2 * n - 1;
    if x.len() != dim || xi.len() != dim {
        return Err(DnoError::Shape(format!(
            "x and ξ must have dimension 2n−1 = {dim}, got {} and {}",
            x.len(),
            xi.len()
        )));
    }
    let (xs, principal, _) = principal_data(chart, x, xi)?;
    let rows = boundary_rows(n, q)?;
    let m = rows.len();
    let base_op = LocalOperator::new(chart, q)?;

    let zero = Complex64::new(0.0, 0.0);
    let mut s_term = DMatrix::from_element(m, m, zero);
    let mut a_term = DMatrix::from_element(m, m, zero);
    let mut tau_term = DMatrix::from_element(m, m, zero);
    let mut xx_term = DMatrix::from_element(m, m, zero);

    // s-channel: (√2/2)·s₀ on the diagonal (s is structurally diagonal).
    for (r, row) in rows.iter().enumerate() {
        let s = base_op.s_closed_at(row, x)?;
        s_term[(r, r)] = s * (SQRT_2 / 2.0);
    }

    // a-channel: full matrix from first-order probes.  a₀(x,ξ) = Σ_ν α_ν ξ_ν
    // with α_ν = i·B_ν, entry value a₀/(2|Ξ|).
    for (c, col) in rows.iter().enumerate() {
        for nu in 0..dim {
            if xi[nu] == 0.0 {
                continue;
            }
            let sample = probe_op.probe_first_order(x, nu, col)?;
            for (r, row) in rows.iter().enumerate() {
                let b = sample.get(row).copied().unwrap_or_default();
                a_term[(r, c)] += Complex64::new(0.0, 1.0) * b * xi[nu];
            }
        }
    }
    for entry in a_term.iter_mut() {
        *entry /= 2.0 * principal;
    }

    // τ-channel: −¼ ξᵀτξ / Ξ² on the diagonal.
    for (r, row) in rows.iter().enumerate() {
        let tau = base_op.tau(x, row)?;
        let mut quad = 0.0;
        for j in 0..dim {
            for k in 0..dim {
                quad += tau[(j, k)] * xi[j] * xi[k];
            }
        }
        tau_term[(r, r)] = Complex64::new(-0.25 * quad / xs.value, 0.0);
    }

    // xx-channel: (3i/8)·∂_ξΞ²·∂_xΞ²/|Ξ|³, row-independent.
    let dot: f64 = xs
        .grad_xi
        .iter()
        .zip(&xs.grad_x)
        .map(|(a, b)| a * b)
        .sum();
    let xx_val = Complex64::new(0.0, 0.375 * dot / (xs.value * principal));
    for r in 0..m {
        xx_term[(r, r)] = xx_val;
    }

    let zero_order = &s_term + &a_term + &tau_term + &xx_term;
    let mut term_breakdown = BTreeMap::new();
    term_breakdown.insert("s-term".to_string(), s_term);
    term_breakdown.insert("a-term".to_string(), a_term);
    term_breakdown.insert("tau-term".to_string(), tau_term);
    term_breakdown.insert("xx-term".to_string(), xx_term);

    Ok(DnoSymbol {
        principal,
        zero_order,
        rows,
        term_breakdown,
        x: x.to_vec(),
        xi: xi.to_vec(),
    })
}

/// Two-term DNO symbol of the doubled complex Laplacian at `(x, ξ)` on
/// (0, q)-forms, over the boundary-data rows J ∌ n.
pub fn dno_symbol(
    chart: &BoundaryChart,
    x: &[f64],
    xi: &[f64],
    q: usize,
) -> Result<DnoSymbol, DnoError> {
    let op = LocalOperator::new(chart, q)?;
    assemble_dno(chart, x, xi, q, &op)
}

// ---------------------------------------------------------------------------
// Residue engine: the six restriction channels and the coefficient solve
// ---------------------------------------------------------------------------

/// One boundary-restriction channel of the interior parametrix construction.
#[derive(Debug, Clone)]
pub struct Lambda0Channel {
    /// Channel name, used in convention-drift errors.
    pub name: &'static str,
    /// The constant printed in the channel's restriction display
    /// (sign conventions as displayed: a leading minus that is written
    /// outside the display is not part of this constant).
    pub display_constant: Complex64,
    /// The signed value of the restriction integral at |Ξ| = 1, as computed
    /// by the contour integrator.
    pub integral_value: Complex64,
    /// Homogeneity: integral(Λ) = integral(1)/Λ^h.
    pub homogeneity: u32,
}

/// The re-derived zero-order coefficient table.
#[derive(Debug, Clone)]
pub struct Lambda0Table {
    pub channels: Vec<Lambda0Channel>,
    /// Coefficient of s₀(x): √2/2.
    pub coeff_s: Complex64,
    /// Coefficient of a₀(x,ξ)/|Ξ|: 1/2.
    pub coeff_a: Complex64,
    /// Coefficient of Σ τ^{jk}ξ_jξ_k/Ξ²: −1/4.
    pub coeff_tau: Complex64,
    /// Coefficient of ∂_ξΞ²·∂_xΞ²/|Ξ|³: 3i/8.
    pub coeff_xx: Complex64,
}

/// Builds one channel's η-integrand at |Ξ| = `lam` and its expected value.
///
/// Channel inventory (g̃-normalized, symbol factors s₀/a₀/τξξ/∂ξΞ²·∂xΞ²/Λ⁰
/// divided out, contour closed in the upper half-plane):
///
/// * `S-int`     −η/[(η²+Λ²)(η+iΛ)]      → −1/(4Λ)
/// * `S-b`       1/(η²+Λ²)               → +1/(2Λ)
/// * `A`         i/[(η²+Λ²)(η+iΛ)]       → +1/(4Λ²)
/// * `rho-tau`   1/[(η−iΛ)(η+iΛ)³]       → −1/(8Λ³)
/// * `xx`        1/[(η²+Λ²)²(η+iΛ)]      → −3i/(16Λ⁴)
/// * `Lambda0`   1/(η²+Λ²)               → +1/(2Λ)
fn channel_integrand(name: &str, lam: f64) -> Result<(RationalEta, Complex64), DnoError> {
    let up = Complex64::new(0.0, lam);
    let dn = Complex64::new(0.0, -lam);
    let one = Complex64::new(1.0, 0.0);
    let (r, want) = match name {
        "S-int" => (
            RationalEta::new(vec![Complex64::new(0.0, 0.0), -one], vec![(up, 1), (dn, 2)])?,
            Complex64::new(-1.0 / (4.0 * lam), 0.0),
        ),
        "S-b" => (
            RationalEta::new(vec![one], vec![(up, 1), (dn, 1)])?,
            Complex64::new(1.0 / (2.0 * lam), 0.0),
        ),
        "A" => (
            RationalEta::new(vec![Complex64::new(0.0, 1.0)], vec![(up, 1), (dn, 2)])?,
            Complex64::new(1.0 / (4.0 * lam * lam), 0.0),
        ),
        "rho-tau" => (
            RationalEta::new(vec![one], vec![(up, 1), (dn, 3)])?,
            Complex64::new(-1.0 / (8.0 * lam * lam * lam), 0.0),
        ),
        "xx" => (
            RationalEta::new(vec![one], vec![(up, 2), (dn, 3)])?,
            Complex64::new(0.0, -3.0 / (16.0 * lam * lam * lam * lam)),
        ),
        "Lambda0" => (
            RationalEta::new(vec![one], vec![(up, 1), (dn, 1)])?,
            Complex64::new(1.0 / (2.0 * lam), 0.0),
        ),
        other => {
            return Err(DnoError::Shape(format!(
                "unknown restriction channel {other}"
            )))
        }
    };
    Ok((r, want))
}

/// Re-derives the four zero-order DNO coefficients from the six
/// boundary-restriction channels.
///
/// Each channel integral is evaluated by residues at |Ξ| = 1 and |Ξ| = 2 and
/// compared *exactly* with its pinned dyadic value (any deviation is a
/// [`DnoError::ConventionDrift`] naming the channel).  The degree-(−1)
/// balance of the interior representation,
///
/// ```text
/// 0 = v_xx·X + v_Γ·Λ⁰ − √2(v_Sint + v_Sb)·s₀ − v_A·a₀ − v_ρτ·τξξ ,
/// ```
///
/// is then solved for Λ⁰, producing the coefficients (√2/2, 1/2, −1/4, 3i/8)
/// of the s/a/τ/xx channels from the computed integrals — not from literals.
pub fn lambda0_from_residues() -> Result<Lambda0Table, DnoError> {
    let names = ["S-int", "S-b", "A", "rho-tau", "xx", "Lambda0"];
    let homogeneity = [1u32, 1, 2, 3, 4, 1];
    // Display constants: the S-int display carries its minus sign outside.
    let display_sign = [-1.0, 1.0, 1.0, 1.0, 1.0, 1.0];

    let mut channels = Vec::with_capacity(6);
    for (i, name) in names.iter().enumerate() {
        let mut at_one = Complex64::new(0.0, 0.0);
        for lam in [1.0, 2.0] {
            let (r, want) = channel_integrand(name, lam)?;
            let got = eta_integral(&r, IntegralMode::CloseUpper)?;
            if (got - want).norm() != 0.0 {
                return Err(DnoError::ConventionDrift {
                    channel: format!("{name} at |Xi| = {lam}"),
                    got,
                    want,
                });
            }
            if lam == 1.0 {
                at_one = got;
            }
        }
        channels.push(Lambda0Channel {
            name,
            display_constant: at_one * display_sign[i],
            integral_value: at_one,
            homogeneity: homogeneity[i],
        });
    }

    let v_sint = channels[0].integral_value;
    let v_sb = channels[1].integral_value;
    let v_a = channels[2].integral_value;
    let v_rt = channels[3].integral_value;
    let v_xx = channels[4].integral_value;
    let v_g = channels[5].integral_value;

    Ok(Lambda0Table {
        channels,
        coeff_s: (v_sint + v_sb) * SQRT_2 / v_g,
        coeff_a: v_a / v_g,
        coeff_tau: v_rt / v_g,
        coeff_xx: -v_xx / v_g,
    })
}

// ---------------------------------------------------------------------------
// Large-|ξ_{2n−1}| asymptotics of the zero-order term
// ---------------------------------------------------------------------------

/// The diagonal zero-order entry in its boundary-restricted closed forms.
#[derive(Debug, Clone)]
pub struct AsymptoticSymbol {
    /// ξ_{2n−1} → −∞ limit: −(−1)^{|J|}√2·c^J_{Jn} + Σ_{k∈J}|L_{bk}|²_ℒ −
    /// Σ_{k∉J}|L_{bk}|²_ℒ.
    pub limit: Complex64,
    /// The finite-frequency four-line form evaluated at the given ξ.
    pub finite: Complex64,
    /// ξ_{2n−1}/|Ξ(0,ξ)| (exactly −1/√2 on the pure negative ray).
    pub ratio_first: f64,
    /// ξ²_{2n−1}/Ξ²(0,ξ) (exactly 1/2 on pure rays).
    pub ratio_second: f64,
}

/// Closed-form zero-order data at the chart center for row J ∌ n: the
/// ξ_{2n−1} → −∞ limit together with the finite-ξ four-line form
///
/// ```text
/// (√2/2)(−2i(−1)^{|J|} Im c^J_{Jn} + d_n)
/// + ((−1)^{|J|} 2 Re c^J_{Jn} + d_n − ⟨T¹,T⁰/|T⁰|⟩)·ξ_{2n−1}/|Ξ|
/// − √2 (Σ_{k∈J} − Σ_{k∉J}) |L_{bk}|²_ℒ ·ξ_{2n−1}/|Ξ|
/// − √2 ⟨T¹,T⁰/|T⁰|⟩·ξ²_{2n−1}/Ξ² .
/// ```
///
/// The microlocal region of interest is ξ_{2n−1} → −∞ (the ψ⁻ cone); the
/// finite form itself evaluates at any nonzero ξ.
pub fn dno_asymptotic(
    chart: &BoundaryChart,
    j: &MultiIndex,
    xi: &[f64],
) -> Result<AsymptoticSymbol, DnoError> {
    let n = chart.n();
    let dim = 2 * n - 1;
    if j.contains(n) {
        return Err(DnoError::Shape(format!(
            "asymptotics are for boundary rows: J = {j:?} contains n = {n}"
        )));
    }
    let x0 = vec![0.0; dim];
    let (xs, _, _) = principal_data(chart, &x0, xi)?;

    let sign = if j.q() % 2 == 0 { 1.0 } else { -1.0 };
    let mut jn_entries: Vec<usize> = j.entries().to_vec();
    jn_entries.push(n);
    let jn = MultiIndex::new(&jn_entries, n)?;
    let c = chart.c_general(j, &jn)?;
    let d_n = chart.d_at(n, &x0, 0.0)?;
    let inner = chart.t_data.inner;
    let mut levi_sum = 0.0;
    for k in 1..n {
        let w = if j.contains(k) { 1.0 } else { -1.0 };
        levi_sum += w * chart.levi_norms[k - 1];
    }

    let limit = -sign * SQRT_2 * c + Complex64::new(levi_sum, 0.0);

    let xi_t = xi[dim - 1];
    // ratio_second shares the squared numerator with Ξ² so pure rays give
    // exactly 1/2; ratio_first is its signed square root, hence exactly
    // −1/√2 there.
    let ratio_second = (xi_t * xi_t) / xs.value;
    let ratio_first = if xi_t == 0.0 {
        0.0
    } else {
        xi_t.signum() * ratio_second.sqrt()
    };

    let line1 = (Complex64::new(0.0, -2.0 * sign * c.im) + d_n) * (SQRT_2 / 2.0);
    let line2 = (Complex64::new(sign * 2.0 * c.re - inner, 0.0) + d_n) * ratio_first;
    let line3 = Complex64::new(-SQRT_2 * levi_sum * ratio_first, 0.0);
    let line4 = Complex64::new(-SQRT_2 * inner * ratio_second, 0.0);
    let finite = line1 + line2 + line3 + line4;

    Ok(AsymptoticSymbol {
        limit,
        finite,
        ratio_first,
        ratio_second,
    })
}

// ---------------------------------------------------------------------------
// Microlocal cutoffs
// ---------------------------------------------------------------------------

/// Conic partition of unity ψ⁺ + ψ⁰ + ψ⁻ = 1 on frequency space, splitting
/// the ξ_{2n−1} > ½|ξ_L| and ξ_{2n−1} < −½|ξ_L| cones from the tangential
/// region, with everything absorbed into ψ⁰ inside the low-frequency ball.
#[derive(Debug, Clone, Copy)]
pub struct MicrolocalCutoffs {
    /// Lower edge of the conic transition band: ψ± vanish inside
    /// |ξ_{2n−1}| < t_lo·|ξ_L|.
    pub t_lo: f64,
    /// Upper edge: ψ± ≡ 1 beyond |ξ_{2n−1}| > t_hi·|ξ_L| (outside the
    /// low-frequency ball).
    pub t_hi: f64,
    /// ψ± vanish inside |ξ| < low_radius/2 and the low-frequency damping
    /// ends at |ξ| = low_radius.
    pub low_radius: f64,
}

/// exp-based C∞ step: 0 for u ≤ 0, 1 for u ≥ 1, strictly increasing between.
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let f = (-1.0 / u).exp();
    let g = (-1.0 / (1.0 - u)).exp();
    f / (f + g)
}

impl MicrolocalCutoffs {
    fn split(xi: &[f64]) -> (f64, f64, f64) {
        let dim = xi.len();
        let xi_t = xi[dim - 1];
        let xi_l: f64 = xi[..dim - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = (xi_l * xi_l + xi_t * xi_t).sqrt();
        (xi_t, xi_l, norm)
    }

    /// Conic profile in the signed slope ξ_{2n−1}/|ξ_L| over (t_lo, t_hi).
    fn band(&self, up: f64, side: f64) -> f64 {
        if up <= self.t_lo * side {
            return 0.0;
        }
        if up >= self.t_hi * side {
            return 1.0;
        }
        // strictly between the edges ⇒ side > 0
        smooth_step((up / side - self.t_lo) / (self.t_hi - self.t_lo))
    }

    /// 1 inside |ξ| ≤ low_radius/2, 0 outside |ξ| ≥ low_radius.
    fn low_freq(&self, norm: f64) -> f64 {
        let half = self.low_radius / 2.0;
        1.0 - smooth_step((norm - half) / half)
    }

    /// Cutoff supported in the upward cone ξ_{2n−1} > t_lo |ξ_L|.
    pub fn psi_plus(&self, xi: &[f64]) -> f64 {
        let (xi_t, xi_l, norm) = Self::split(xi);
        self.band(xi_t, xi_l) * (1.0 - self.low_freq(norm))
    }

    /// Cutoff supported in the downward cone ξ_{2n−1} < −t_lo |ξ_L|.
    pub fn psi_minus(&self, xi: &[f64]) -> f64 {
        let (xi_t, xi_l, norm) = Self::split(xi);
        self.band(-xi_t, xi_l) * (1.0 - self.low_freq(norm))
    }

    /// Complement ψ⁰ = 1 − ψ⁺ − ψ⁻.  The two cones are disjoint, so the sum
    /// of all three is exactly 1 in floating point as well.
    pub fn psi_zero(&self, xi: &[f64]) -> f64 {
        1.0 - self.psi_plus(xi) - self.psi_minus(xi)
    }
}

/// The fixed cutoff family: transition band (½, ¾), low-frequency radius 1.
pub fn microlocal_cutoffs() -> MicrolocalCutoffs {
    MicrolocalCutoffs {
        t_lo: 0.5,
        t_hi: 0.75,
        low_radius: 1.0,
    }
}

// ---------------------------------------------------------------------------
// Boundary operator: Υ⁰ block and the two-term composition
// ---------------------------------------------------------------------------

/// Zero-order boundary block Υ⁰_{J,K} at the chart center:
///
/// * diagonal (K = J): (−1)^{|J|}·c^J_{Jn} + (1/√2)·(zero-order)_{J,J},
/// * off-diagonal:     (1/√2)·(zero-order)_{J,K}.
///
/// Both J and K must omit n and share the degree.
pub fn upsilon_symbol(
    chart: &BoundaryChart,
    xi: &[f64],
    j: &MultiIndex,
    k: &MultiIndex,
) -> Result<Complex64, DnoError> {
    let n = chart.n();
    if j.contains(n) || k.contains(n) {
        return Err(DnoError::Shape(
            "Upsilon block is indexed by rows omitting n".to_string(),
        ));
    }
    if j.q() != k.q() {
        return Err(DnoError::Shape(format!(
            "Upsilon needs |J| = |K|, got {} and {}",
            j.q(),
            k.q()
        )));
    }
    let x0 = vec![0.0; 2 * n - 1];
    let ds = dno_symbol(chart, &x0, xi, j.q())?;
    let rj = ds
        .rows
        .iter()
        .position(|r| r == j)
        .ok_or_else(|| DnoError::Shape(format!("row {j:?} not found")))?;
    let ck = ds
        .rows
        .iter()
        .position(|r| r == k)
        .ok_or_else(|| DnoError::Shape(format!("row {k:?} not found")))?;
    let mut v = ds.zero_order[(rj, ck)] / SQRT_2;
    if j == k {
        let sign = if j.q() % 2 == 0 { 1.0 } else { -1.0 };
        let mut jn_entries: Vec<usize> = j.entries().to_vec();
        jn_entries.push(n);
        let jn = MultiIndex::new(&jn_entries, n)?;
        v += chart.c_general(j, &jn)? * sign;
    }
    Ok(v)
}

/// ξ_{2n−1} → −∞ limit of the diagonal Υ⁰ entry in the algebraically
/// cancelled closed form (1/√2)(Σ_{k∈J} − Σ_{k∉J})|L_{bk}|²_ℒ — the
/// structure-coefficient contributions have cancelled exactly, so none
/// appear.
pub fn upsilon_limit(chart: &BoundaryChart, j: &MultiIndex) -> Result<Complex64, DnoError> {
    let n = chart.n();
    if j.contains(n) {
        return Err(DnoError::Shape(
            "Upsilon block is indexed by rows omitting n".to_string(),
        ));
    }
    let mut levi_sum = 0.0;
    for k in 1..n {
        let w = if j.contains(k) { 1.0 } else { -1.0 };
        levi_sum += w * chart.levi_norms[k - 1];
    }
    Ok(Complex64::new(levi_sum / SQRT_2, 0.0))
}

/// The boundary operator's symbol data at the chart center.
#[derive(Debug, Clone)]
pub struct BoundarySymbol {
    /// σ((1/√2)N₁⁻ − iT⁰) = |Ξ(0,ξ)|/√2 + ξ_{2n−1}.  Vanishes identically on
    /// the ray ξ_L = 0, ξ_{2n−1} < 0 — the non-ellipticity at the heart of
    /// the problem — and equals 2ξ_{2n−1} on the opposite ray.
    pub first_order: f64,
    /// The Υ⁰ row for J over the boundary rows (J-th row of the zero-order
    /// block).
    pub zero_order: DMatrix<Complex64>,
    /// Two-term composition σ((1/√2)N₁⁻ + iT⁰) # σ((1/√2)N₁⁻ − iT⁰ + Υ⁰_JJ):
    /// degree 2 carries σ(½(N₁⁻)² + (T⁰)²) = ½Ξ² − ξ²_{2n−1}; degree 1
    /// carries the commutator channel i·∂_{x_{2n−1}}σ((1/√2)N₁⁻) (the symbol
    /// of (i/√2)[T⁰, N₁⁻]) plus the Υ⁰ channel (σ-first-order)·Υ⁰_{J,J}.
    pub composed: GradedSymbolValue,
}

/// Jet of p(x,ξ) = |Ξ(x,ξ)|/√2 ± ξ_{2n−1} at the chart center.
fn half_dno_jet(
    chart: &BoundaryChart,
    xi: &[f64],
    t_sign: f64,
    sub: Complex64,
) -> Result<SymbolJet, DnoError> {
    let n = chart.n();
    let dim = 2 * n - 1;
    let x0 = vec![0.0; dim];
    let (xs, principal, _) = principal_data(chart, &x0, xi)?;
    let value = principal / SQRT_2 + t_sign * xi[dim - 1];
    // ∂|Ξ|/∂· = ∂Ξ²/∂· / (2|Ξ|)
    let mut d_xi: Vec<Complex64> = xs
        .grad_xi
        .iter()
        .map(|g| Complex64::new(g / (2.0 * principal) / SQRT_2, 0.0))
        .collect();
    d_xi[dim - 1] += Complex64::new(t_sign, 0.0);
    let d_x: Vec<Complex64> = xs
        .grad_x
        .iter()
        .map(|g| Complex64::new(g / (2.0 * principal) / SQRT_2, 0.0))
        .collect();
    Ok(SymbolJet::scalar(
        1,
        Complex64::new(value, 0.0),
        sub,
        &d_xi,
        &d_x,
    ))
}

/// Boundary operator symbol for row J at the chart center: the scalar
/// first-order factor, the Υ⁰ row, and the two-term composition against the
/// conjugate factor (1/√2)N₁⁻ + iT⁰.
pub fn boundary_operator_symbol(
    chart: &BoundaryChart,
    xi: &[f64],
    j: &MultiIndex,
) -> Result<BoundarySymbol, DnoError> {
    let n = chart.n();
    let dim = 2 * n - 1;
    let x0 = vec![0.0; dim];
    let (_, principal, _) = principal_data(chart, &x0, xi)?;
    let first_order = principal / SQRT_2 + xi[dim - 1];

    let rows = boundary_rows(n, j.q())?;
    let mut zero_order = DMatrix::from_element(1, rows.len(), Complex64::new(0.0, 0.0));
    let mut diag = Complex64::new(0.0, 0.0);
    for (c, k) in rows.iter().enumerate() {
        let v = upsilon_symbol(chart, xi, j, k)?;
        zero_order[(0, c)] = v;
        if k == j {
            diag = v;
        }
    }

    let a = half_dno_jet(chart, xi, -1.0, Complex64::new(0.0, 0.0))?;
    let b = half_dno_jet(chart, xi, 1.0, diag)?;
    let composed = compose_two_term(&a, &b)?;

    Ok(BoundarySymbol {
        first_order,
        zero_order,
        composed,
    })
}

// ---------------------------------------------------------------------------
// Kohn-Laplacian comparison
// ---------------------------------------------------------------------------

/// Second-plus-first-order comparison of the composed boundary operator with
/// the tangential-field product form.
#[derive(Debug, Clone)]
pub struct KohnComparison {
    /// Degree-2 + degree-1 value of σ((1/√2)N₁⁻+iT⁰) # σ((1/√2)N₁⁻−iT⁰)
    /// (no Υ⁰ channel: this compares the quadratic part alone).
    pub composed: Complex64,
    /// Σ_{k∉J} σ(L̄_{bk}L_{bk}) + Σ_{k∈J} σ(L_{bk}L̄_{bk})
    /// − √2 ξ_{2n−1} Σ_{k∉J}|L_{bk}|²_ℒ + √2 ξ_{2n−1} Σ_{k∈J}|L_{bk}|²_ℒ.
    pub rhs: Complex64,
    /// composed − rhs; O(|ξ_L|) + O(1) along ξ_{2n−1} → −∞ rays at x = 0.
    pub residual: Complex64,
}

/// Frame row k (1-based, k ≤ n−1) at the center: tangential coefficients
/// λᵏ_ν(0,0) and the Jacobian D[(μ,ν)] = ∂_{x_μ}λᵏ_ν(·,0)|₀ by 4th-order
/// differencing.
fn frame_row_jet(
    chart: &BoundaryChart,
    k: usize,
) -> Result<(Vec<Complex64>, DMatrix<Complex64>), DnoError> {
    let n = chart.n();
    let dim = 2 * n - 1;
    let x0 = vec![0.0; dim];
    let cp0 = chart.point(&x0, 0.0)?;
    let lam0: Vec<Complex64> = (0..dim).map(|nu| cp0.lambda[(k - 1, nu)]).collect();
    let h = 1e-3;
    let mut d = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for mu in 0..dim {
        for (s, wgt) in [(2.0, -1.0), (1.0, 8.0), (-1.0, -8.0), (-2.0, 1.0)] {
            let mut x = x0.clone();
            x[mu] += s * h;
            let cp = chart.point(&x, 0.0)?;
            for nu in 0..dim {
                d[(mu, nu)] += cp.lambda[(k - 1, nu)] * wgt / (12.0 * h);
            }
        }
    }
    Ok((lam0, d))
}

/// Two-term product symbols of the boundary CR field pair at the center:
/// (σ(L̄_{bk}L_{bk}), σ(L_{bk}L̄_{bk})) at frequency ξ, including the
/// first-order composition corrections i·Σ_ν (L̄_{bk}λᵏ_ν)ξ_ν and
/// i·Σ_ν (L_{bk}λ̄ᵏ_ν)ξ_ν.
fn cr_product_symbols(
    chart: &BoundaryChart,
    k: usize,
    xi: &[f64],
) -> Result<(Complex64, Complex64), DnoError> {
    let (lam0, d) = frame_row_jet(chart, k)?;
    let dim = lam0.len();
    let i = Complex64::new(0.0, 1.0);
    let m: Complex64 = (0..dim).map(|nu| lam0[nu] * xi[nu]).sum();
    let m_bar: Complex64 = (0..dim).map(|nu| lam0[nu].conj() * xi[nu]).sum();
    let sigma_l = i * m;
    let sigma_l_bar = i * m_bar;
    // L̄_{bk} λᵏ_ν = Σ_μ λ̄ᵏ_μ ∂_μ λᵏ_ν
    let mut corr_bar_l = Complex64::new(0.0, 0.0);
    for nu in 0..dim {
        let mut der = Complex64::new(0.0, 0.0);
        for mu in 0..dim {
            der += lam0[mu].conj() * d[(mu, nu)];
        }
        corr_bar_l += der * xi[nu];
    }
    // L_{bk} λ̄ᵏ_ν = conj(L̄_{bk} λᵏ_ν) when taken entrywise
    let mut corr_l_bar = Complex64::new(0.0, 0.0);
    for nu in 0..dim {
        let mut der = Complex64::new(0.0, 0.0);
        for mu in 0..dim {
            der += lam0[mu] * d[(mu, nu)].conj();
        }
        corr_l_bar += der * xi[nu];
    }
    let lbar_l = sigma_l_bar * sigma_l + i * corr_bar_l;
    let l_lbar = sigma_l * sigma_l_bar + i * corr_l_bar;
    Ok((lbar_l, l_lbar))
}

/// Compares σ(½(N₁⁻)² + (T⁰)²) — evaluated through the two-term composition
/// of the boundary factors — with its tangential-field product form at the
/// chart center.
pub fn kohn_comparison(
    chart: &BoundaryChart,
    xi: &[f64],
    j: &MultiIndex,
) -> Result<KohnComparison, DnoError> {
    let n = chart.n();
    let dim = 2 * n - 1;
    if j.contains(n) {
        return Err(DnoError::Shape(
            "comparison rows omit n (boundary data)".to_string(),
        ));
    }
    let zero = Complex64::new(0.0, 0.0);
    let a = half_dno_jet(chart, xi, -1.0, zero)?;
    let b = half_dno_jet(chart, xi, 1.0, zero)?;
    let graded = compose_two_term(&a, &b)?;
    let composed = graded.scalar(2) + graded.scalar(1);

    let xi_t = xi[dim - 1];
    let mut rhs = Complex64::new(0.0, 0.0);
    for k in 1..n {
        let (lbar_l, l_lbar) = cr_product_symbols(chart, k, xi)?;
        let levi = chart.levi_norms[k - 1];
        if j.contains(k) {
            rhs += l_lbar + Complex64::new(SQRT_2 * xi_t * levi, 0.0);
        } else {
            rhs += lbar_l - Complex64::new(SQRT_2 * xi_t * levi, 0.0);
        }
    }
    Ok(KohnComparison {
        composed,
        rhs,
        residual: composed - rhs,
    })
}

/// The product-versus-composition identity for one CR field on the pure
/// transverse ray ξ = (0, …, 0, t): returns
/// (σ(L̄_{bk}L_{bk}) − σ(L̄_{bk})σ(L_{bk}), √2·t·|L_{bk}|²_ℒ), which agree at
/// the chart center.
pub fn kohn_levi_identity(
    chart: &BoundaryChart,
    k: usize,
    t: f64,
) -> Result<(Complex64, Complex64), DnoError> {
    let n = chart.n();
    if k == 0 || k >= n {
        return Err(DnoError::Shape(format!(
            "CR field index k = {k} out of range 1..={}",
            n - 1
        )));
    }
    let dim = 2 * n - 1;
    let mut xi = vec![0.0; dim];
    xi[dim - 1] = t;
    let (lam0, _) = frame_row_jet(chart, k)?;
    let i = Complex64::new(0.0, 1.0);
    let m: Complex64 = (0..dim).map(|nu| lam0[nu] * xi[nu]).sum();
    let m_bar: Complex64 = (0..dim).map(|nu| lam0[nu].conj() * xi[nu]).sum();
    let (lbar_l, _) = cr_product_symbols(chart, k, &xi)?;
    let correction = lbar_l - (i * m_bar) * (i * m);
    let expected = Complex64::new(SQRT_2 * t * chart.levi_norms[k - 1], 0.0);
    Ok((correction, expected))
}

// ---------------------------------------------------------------------------
// The ρ-weighted perturbation
// ---------------------------------------------------------------------------

/// Residue weights of the two interior channels created by weighting the
/// second factor of the Laplacian with (1 + φ(ρ)): at |Ξ| = `lam`,
///
/// * ρ·∂²ρ channel: 2Λ·(c₁ + c₂) with
///   c₁ = ∮ η²/[(η−iΛ)(η+iΛ)³], c₂ = ∮ −2η/[(η−iΛ)(η+iΛ)²]  → −3/4,
/// * boundary-trace channel: −2Λ·c₃ with
///   c₃ = ∮ −2η²/(η²+Λ²)²                                      → +1.
///
/// Both weights are Λ-independent; they multiply φ′(0) in the zero-order
/// symbol.  A drift from (−3/4, +1) is a convention error.
pub fn phi_residue_weights(lam: f64) -> Result<(Complex64, Complex64), DnoError> {
    let up = Complex64::new(0.0, lam);
    let dn = Complex64::new(0.0, -lam);
    let c1 = eta_integral(
        &RationalEta::from_real(&[0.0, 0.0, 1.0], vec![(up, 1), (dn, 3)])?,
        IntegralMode::CloseUpper,
    )?;
    let c2 = eta_integral(
        &RationalEta::from_real(&[0.0, -2.0], vec![(up, 1), (dn, 2)])?,
        IntegralMode::CloseUpper,
    )?;
    let c3 = eta_integral(
        &RationalEta::from_real(&[0.0, 0.0, -2.0], vec![(up, 2), (dn, 2)])?,
        IntegralMode::CloseUpper,
    )?;
    let rho_d2rho = (c1 + c2) * 2.0 * lam;
    let eta_gb = -c3 * 2.0 * lam;
    Ok((rho_d2rho, eta_gb))
}

/// Two-term DNO symbol of the weighted operator
/// ∂̄∂̄* + ∂̄*∂̄∘(1+φ) with φ = φ(ρ), φ(0) = 0, and φ′(0) = `phi_prime`.
///
/// The base channels are evaluated exactly as in [`dno_symbol`]; the
/// weighting enters through four additional diagonal channels in the
/// breakdown:
///
/// * `phi-s-channel`: the normal-derivative shift S → S − √2φ′, weighted by
///   √2/2, i.e. exactly −φ′;
/// * `phi-rho-d2rho-channel` and `phi-eta-gb-channel`: the two interior
///   parametrix corrections, −(3/4)φ′ and +φ′ (see [`phi_residue_weights`]);
/// * `phi-t-squared-channel`: the ρ-weighted transverse second-order shift
///   τ^{TT} → τ^{TT} + 2φ′ through the −¼ξᵀτξ/Ξ² channel, i.e.
///   −(φ′/2)·ξ²_{2n−1}/Ξ².
///
/// On the ray ξ_L = 0 the four sum to −φ′ exactly (−1 − ¾ + 1 − ¼ = −1); in
/// general the total differs from −φ′ by O(|ξ_L|/|Ξ|).  With `phi_prime = 0`
/// the symbol coincides with [`dno_symbol`]'s.
pub fn dno_symbol_phi(
    chart: &BoundaryChart,
    x: &[f64],
    xi: &[f64],
    q: usize,
    phi_prime: f64,
) -> Result<DnoSymbol, DnoError> {
    let op_phi = LocalOperator::with_phi(chart, q, PhiProfile::linear(phi_prime))?;
    let mut ds = assemble_dno(chart, x, xi, q, &op_phi)?;
    let m = ds.rows.len();
    let dim = xi.len();

    let (w_rho, w_gb) = phi_residue_weights(ds.principal)?;
    let xi_t = xi[dim - 1];
    let ratio_second = (xi_t * xi_t) / (ds.principal * ds.principal);

    let diag = |v: Complex64| {
        let mut mat = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
        for r in 0..m {
            mat[(r, r)] = v;
        }
        mat
    };
    let s_chan = diag(Complex64::new(-phi_prime, 0.0));
    let rho_chan = diag(w_rho * phi_prime);
    let gb_chan = diag(w_gb * phi_prime);
    let tsq_chan = diag(Complex64::new(-0.5 * phi_prime * ratio_second, 0.0));

    ds.zero_order += &s_chan + &rho_chan + &gb_chan + &tsq_chan;
    ds.term_breakdown.insert("phi-s-channel".to_string(), s_chan);
    ds.term_breakdown
        .insert("phi-rho-d2rho-channel".to_string(), rho_chan);
    ds.term_breakdown
        .insert("phi-eta-gb-channel".to_string(), gb_chan);
    ds.term_breakdown
        .insert("phi-t-squared-channel".to_string(), tsq_chan);
    Ok(ds)
}

// ---------------------------------------------------------------------------
// φ-independence of the boundary equation
// ---------------------------------------------------------------------------

/// Per-frequency record of the assembled boundary zero-order values across
/// the φ′ list.
#[derive(Debug, Clone)]
pub struct CancellationReport {
    /// Max over the sweep of the per-frequency max pairwise deviation.
    pub max_deviation: f64,
    /// Per-frequency max pairwise deviation, parallel to the sweep.
    pub deviations: Vec<f64>,
    /// values[i][p] = assembled value at xi_sweep[i], phi_values[p].
    pub values: Vec<Vec<Complex64>>,
}

/// Assembles the boundary zero-order symbol
/// (1/√2)·σ₀(N^{φ,−})_{J,J} + (1/√2)·φ′ + (−1)^{|J|}·c^J_{Jn}
/// for each φ′ in `phi_values` at each frequency in `xi_sweep` and reports
/// how far the values spread: the weighted problem's boundary equation is
/// φ-independent up to O(|ξ_L|/|Ξ|), so on transverse rays the spread
/// vanishes.
pub fn cancellation_check(
    chart: &BoundaryChart,
    xi_sweep: &[Vec<f64>],
    j: &MultiIndex,
    phi_values: &[f64],
) -> Result<CancellationReport, DnoError> {
    let n = chart.n();
    if j.contains(n) {
        return Err(DnoError::Shape(
            "boundary rows omit n; J contains n".to_string(),
        ));
    }
    let x0 = vec![0.0; 2 * n - 1];
    let sign = if j.q() % 2 == 0 { 1.0 } else { -1.0 };
    let mut jn_entries: Vec<usize> = j.entries().to_vec();
    jn_entries.push(n);
    let jn = MultiIndex::new(&jn_entries, n)?;
    let c_term = chart.c_general(j, &jn)? * sign;

    let mut values = Vec::with_capacity(xi_sweep.len());
    let mut deviations = Vec::with_capacity(xi_sweep.len());
    let mut max_deviation: f64 = 0.0;
    for xi in xi_sweep {
        let mut row = Vec::with_capacity(phi_values.len());
        for &phi in phi_values {
            let ds = dno_symbol_phi(chart, &x0, xi, j.q(), phi)?;
            let rj = ds
                .rows
                .iter()
                .position(|r| r == j)
                .ok_or_else(|| DnoError::Shape(format!("row {j:?} not found")))?;
            let v = ds.zero_order[(rj, rj)] / SQRT_2 + Complex64::new(phi, 0.0) / SQRT_2 + c_term;
            row.push(v);
        }
        let mut dev: f64 = 0.0;
        for a in 0..row.len() {
            for b in a + 1..row.len() {
                dev = dev.max((row[a] - row[b]).norm());
            }
        }
        deviations.push(dev);
        max_deviation = max_deviation.max(dev);
        values.push(row);
    }
    Ok(CancellationReport {
        max_deviation,
        deviations,
        values,
    })
}
