//! Brute-force cross-check of the assembled chart-local Laplacian.
//!
//! [`square_crosscheck`] drives the two extraction routes of the operator
//! assembly against each other on random polynomial test forms:
//!
//! * the *numeric* route applies `2□ = 2(∂̄∂̄* + ∂̄*∂̄)` by composing the
//!   componentwise first-order operators, differentiating sampled inner
//!   results — no coefficient formula of the assembled operator is reused;
//! * the *assembled* route predicts the same values from the symbol-level
//!   data: the analytic second-order matrix, the closed-form
//!   normal-derivative coefficient `√2·s`, the transverse-channel τ entry,
//!   and the off-diagonal commutator structure computed directly from frame
//!   derivatives.
//!
//! Deviations are reported per coefficient class; the caller (test suite or
//! CLI) asserts the bounds.  Class separation is exact at the probe point:
//! a pure centered quadratic sees only the second-order coefficients, a
//! ρ-linear form only the ∂_ρ-coefficient matrix, and the off-diagonal
//! comparison is restricted to the transverse direction `x_{2n−1}` — the
//! only tangential component that is well-defined once complex-tangential
//! fields and zero-order terms are quotiented out, and the direction in
//! which the frame's CR fields vanish at the chart center.

use crate::forms::{insert_index, MultiIndex};
use crate::geometry::BoundaryChart;
use crate::operator_assembly::{AssemblyError, ChartPoly, LocalOperator, PolyForm};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Maximum deviations per coefficient class between the numeric and
/// assembled routes, over all trials and form rows.
#[derive(Debug, Clone)]
pub struct SquareCrosscheckReport {
    pub n: usize,
    pub q: usize,
    pub trials: usize,
    /// random centered quadratics: `2□u` vs `M : Hess(u)` (relative).
    pub principal_dev: f64,
    /// random ρ-linear forms: `2□u` vs `√2·s·∂_ρu` on diagonal rows
    /// (relative).
    pub drho_dev: f64,
    /// off-diagonal entries of the probed ∂_ρ-coefficient matrix
    /// (absolute; the assembled s-matrix is diagonal).
    pub s_offdiag: f64,
    /// per-row probed `s` vs the closed coframe/divergence form (relative).
    pub s_eqn_dev: f64,
    /// assembled τ^{2n−1,2n−1}(0) vs −4√2⟨T¹, T̂⁰⟩ from the transverse
    /// expansion (relative).
    pub tau_tt_dev: f64,
    /// off-diagonal second-order probes (absolute; principal part is
    /// diagonal).
    pub offdiag_principal: f64,
    /// off-diagonal transverse first-order coefficient vs the commutator
    /// prediction −2εε·σ_T([L̄_k, L_l]) (absolute).
    pub offdiag_commutator_dev: f64,
}

fn rel(den: f64) -> f64 {
    den.max(1.0)
}

/// Coefficient vector of the commutator `[L̄_k, L_l]` at the chart center:
/// `comm_μ = L̄_k(λˡ_μ) − L_l(λ̄ᵏ_μ)`, frame derivatives by 4th-order
/// differencing of the chart frame (independent of the operator assembly).
fn commutator_coeffs(
    chart: &BoundaryChart,
    k: usize,
    l: usize,
) -> Result<Vec<Complex64>, AssemblyError> {
    let n = chart.n();
    let dim = 2 * n;
    let h = 1e-3;
    let x0 = vec![0.0; dim - 1];
    let cp0 = chart.point(&x0, 0.0)?;
    // ∂_ν λ for both rows, ν = 0..2n−1
    let mut dlam_l = vec![vec![Complex64::new(0.0, 0.0); dim]; dim]; // [ν][μ]
    let mut dlam_k = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for nu in 0..dim {
        for (s, wgt) in [(2.0, -1.0), (1.0, 8.0), (-1.0, -8.0), (-2.0, 1.0)] {
            let mut w = vec![0.0; dim];
            w[nu] += s * h;
            let (xs, rs) = w.split_at(dim - 1);
            let cps = chart.point(xs, rs[0])?;
            for mu in 0..dim {
                dlam_l[nu][mu] += cps.lambda[(l - 1, mu)] * wgt / (12.0 * h);
                dlam_k[nu][mu] += cps.lambda[(k - 1, mu)] * wgt / (12.0 * h);
            }
        }
    }
    let mut comm = vec![Complex64::new(0.0, 0.0); dim];
    for mu in 0..dim {
        for nu in 0..dim {
            comm[mu] += cp0.lambda[(k - 1, nu)].conj() * dlam_l[nu][mu]
                - cp0.lambda[(l - 1, nu)] * dlam_k[nu][mu].conj();
        }
    }
    Ok(comm)
}

/// Runs the dual-route property of the operator assembly over `trials`
/// random polynomial forms on the chart of `chart`, degree `q`, and
/// reports the maximum deviation in each coefficient class.
pub fn square_crosscheck(
    chart: &BoundaryChart,
    q: usize,
    trials: usize,
    seed: u64,
) -> Result<SquareCrosscheckReport, AssemblyError> {
    let n = chart.n();
    let dim = 2 * n;
    let op = LocalOperator::new(chart, q)?;
    let rows = op.indices.clone();
    let x0 = vec![0.0; dim - 1];
    let mut w0 = x0.clone();
    w0.push(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rnd = |rng: &mut ChaCha8Rng| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    };

    let mut principal_dev = 0.0f64;
    let mut drho_dev = 0.0f64;

    for _ in 0..trials {
        // --- second-order class: random centered quadratic ---------------
        // u_J = Σ_{a≤b} r^J_{ab} w_a w_b; value and gradient vanish at the
        // center, so 2□u(0) = Σ_{μν} M_{μν} Hess(u_J)_{μν} row-wise.
        let mut form = PolyForm::new(n, q);
        let mut hess: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(rows.len());
        for row in &rows {
            let mut poly = ChartPoly::zero(dim);
            let mut h_row = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
            for a in 0..dim {
                for b in a..dim {
                    let r = rnd(&mut rng);
                    let mut e = vec![0u8; dim];
                    e[a] += 1;
                    e[b] += 1;
                    poly = poly.plus_term(r, &e);
                    if a == b {
                        h_row[a][a] += 2.0 * r;
                    } else {
                        h_row[a][b] += r;
                        h_row[b][a] += r;
                    }
                }
            }
            form = form.with_component(row, poly)?;
            hess.push(h_row);
        }
        let numeric = op.apply(&form, &w0)?;
        for (ri, row) in rows.iter().enumerate() {
            let m = op.second_order_matrix(&x0, 0.0, row)?;
            let mut pred = Complex64::new(0.0, 0.0);
            let mut scale = 0.0f64;
            for mu in 0..dim {
                for nu in 0..dim {
                    pred += m[(mu, nu)] * hess[ri][mu][nu];
                    scale += (m[(mu, nu)] * hess[ri][mu][nu]).norm();
                }
            }
            let dev = (numeric[row] - pred).norm() / rel(scale);
            principal_dev = principal_dev.max(dev);
        }

        // --- ∂ρ class: random ρ-linear form ------------------------------
        // u_J = r_J · ρ, so 2□u(0) = (∂ρ-coefficient matrix)·r = √2·s·r.
        let mut form = PolyForm::new(n, q);
        let mut rvec = Vec::with_capacity(rows.len());
        for row in &rows {
            let r = rnd(&mut rng);
            let mut e = vec![0u8; dim];
            e[dim - 1] = 1;
            form = form.with_component(row, ChartPoly::zero(dim).plus_term(r, &e))?;
            rvec.push(r);
        }
        let numeric = op.apply(&form, &w0)?;
        for (ri, row) in rows.iter().enumerate() {
            let pred = op.s_closed_at(row, &x0)? * SQRT2 * rvec[ri];
            let dev = (numeric[row] - pred).norm() / rel(pred.norm());
            drho_dev = drho_dev.max(dev);
        }
    }

    // --- per-column probes: s-matrix structure and the sEqn form ---------
    let mut s_offdiag = 0.0f64;
    let mut s_eqn_dev = 0.0f64;
    let mut offdiag_principal = 0.0f64;
    for col in &rows {
        let sample = op.probe_first_order(&x0, dim - 1, col)?;
        for (row, v) in &sample {
            if row == col {
                let closed = op.s_closed_at(col, &x0)? * SQRT2;
                s_eqn_dev = s_eqn_dev.max((v - closed).norm() / rel(closed.norm()) / SQRT2);
            } else {
                s_offdiag = s_offdiag.max(v.norm());
            }
        }
        // off-diagonal second-order entries vanish: probe a spread of
        // direction pairs on every off-diagonal row
        for (a, b) in [(0usize, 0usize), (0, dim - 2), (dim - 2, dim - 2), (dim - 1, dim - 1)] {
            let sample = op.probe_second_order(&x0, a, b, col)?;
            for (row, v) in &sample {
                if row != col {
                    offdiag_principal = offdiag_principal.max(v.norm());
                }
            }
        }
    }

    // --- τ transverse entry vs the T-field expansion ----------------------
    let tau = op.tau(&x0, &rows[0])?;
    let want_tau = -4.0 * SQRT2 * chart.t_data.inner;
    let tau_tt_dev = (tau[(dim - 2, dim - 2)] - want_tau).abs() / rel(want_tau.abs());

    // --- off-diagonal commutator structure --------------------------------
    // For J ∋ k, l ∉ J_k̂ ∪ {k}: the (J, J_k̂∪{l}) entry of 2□ has
    // transverse first-order coefficient −2 ε^{lJ_k̂} ε^{kJ_k̂} comm_T.
    let mut offdiag_commutator_dev = 0.0f64;
    for row in &rows {
        for &k in row.entries() {
            let less: Vec<usize> = row.entries().iter().copied().filter(|&e| e != k).collect();
            let less_idx = MultiIndex::new(&less, n)?;
            for l in 1..=n {
                let si_l = insert_index(&less_idx, l, n)?;
                if si_l.sign == 0 || si_l.index == *row {
                    continue;
                }
                let si_k = insert_index(&less_idx, k, n)?;
                let col = si_l.index.clone();
                let comm = commutator_coeffs(chart, k, l)?;
                let pred = comm[dim - 2] * (-2.0 * (si_l.sign * si_k.sign) as f64);
                let sample = op.probe_first_order(&x0, dim - 2, &col)?;
                let got = sample[row];
                offdiag_commutator_dev =
                    offdiag_commutator_dev.max((got - pred).norm() / rel(pred.norm()));
            }
        }
    }

    Ok(SquareCrosscheckReport {
        n,
        q,
        trials,
        principal_dev,
        drho_dev,
        s_offdiag,
        s_eqn_dev,
        tau_tt_dev,
        offdiag_principal,
        offdiag_commutator_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_chart, normalize_defining, Domain};

    fn chart_for(name: &str, n: usize) -> BoundaryChart {
        let d = Domain::builtin(name, n).unwrap();
        let p = d.default_base_point();
        let dn = normalize_defining(&d, &p).unwrap();
        build_chart(&dn, &p, None).unwrap()
    }

    #[test]
    fn flat_crosscheck_all_deviations_vanish() {
        let ch = chart_for("halfspace-flat", 2);
        let r = square_crosscheck(&ch, 1, 2, 7).unwrap();
        assert!(r.principal_dev < 1e-12, "principal: {:.3e}", r.principal_dev);
        assert!(r.drho_dev < 1e-12, "drho: {:.3e}", r.drho_dev);
        assert!(r.s_offdiag < 1e-12, "s offdiag: {:.3e}", r.s_offdiag);
        assert!(r.s_eqn_dev < 1e-12, "sEqn: {:.3e}", r.s_eqn_dev);
        assert!(r.tau_tt_dev < 1e-12, "tau: {:.3e}", r.tau_tt_dev);
        assert!(
            r.offdiag_principal < 1e-12,
            "offdiag principal: {:.3e}",
            r.offdiag_principal
        );
        assert!(
            r.offdiag_commutator_dev < 1e-12,
            "offdiag commutator: {:.3e}",
            r.offdiag_commutator_dev
        );
    }

    #[test]
    fn ball_crosscheck_meets_reference_bounds() {
        // the dual-route property on a curved chart: 5 random polynomial
        // forms, deviations bounded per coefficient class
        let ch = chart_for("ball", 2);
        let r = square_crosscheck(&ch, 1, 5, 42).unwrap();
        assert!(r.principal_dev < 1e-4, "principal: {:.3e}", r.principal_dev);
        assert!(r.drho_dev < 1e-4, "drho: {:.3e}", r.drho_dev);
        assert!(r.s_offdiag < 1e-10, "s offdiag: {:.3e}", r.s_offdiag);
        assert!(r.s_eqn_dev < 1e-5, "sEqn: {:.3e}", r.s_eqn_dev);
        assert!(r.tau_tt_dev < 1e-5, "tau TT: {:.3e}", r.tau_tt_dev);
        assert!(
            r.offdiag_principal < 1e-6,
            "offdiag principal: {:.3e}",
            r.offdiag_principal
        );
        assert!(
            r.offdiag_commutator_dev < 1e-5,
            "offdiag commutator: {:.3e}",
            r.offdiag_commutator_dev
        );
    }

    #[test]
    fn siegel_crosscheck_q2_top_degree() {
        // top-degree forms exercise the n∈J branch alone (single row, no
        // off-diagonal); the dual routes still must agree
        let ch = chart_for("siegel", 2);
        let r = square_crosscheck(&ch, 2, 3, 11).unwrap();
        assert!(r.principal_dev < 1e-4, "principal: {:.3e}", r.principal_dev);
        assert!(r.drho_dev < 1e-4, "drho: {:.3e}", r.drho_dev);
        assert!(r.s_eqn_dev < 1e-5, "sEqn: {:.3e}", r.s_eqn_dev);
    }
}
