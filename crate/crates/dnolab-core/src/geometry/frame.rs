//! Boundary-adapted frame fields.
//!
//! For a normalized defining function ρ the frame consists of tangential
//! fields `L_k = √2 Σ_l γ̄ᵏ_l ∂/∂z_l` (k < n) with `Σ_l γᵏ_l ∂ρ/∂z̄_l = 0`
//! and `Σ_l γᵏ_l γ̄ˡ_l' …` Hermitian-orthonormal rows, together with the
//! complex normal `L_n = 2√2 Σ_k (∂ρ/∂z̄_k) ∂/∂z_k / |∇ρ|²`, dual to
//! `ω_n = √2 ∂ρ`.  The rows γᵏ are produced by Gram–Schmidt over projected
//! coordinate fields with the pivot order frozen at the base point, so the
//! frame varies smoothly near it.
//!
//! The real fields driving the chart flows — `T = (L_n − L̄_n)/2i` and the
//! normal-speed field `ν = ∇ρ/|∇ρ|²` — are provided with analytic Jacobians
//! assembled from second-order Wirtinger jets, so flow maps can carry exact
//! variational (Jacobian) data.

use super::domain::{Domain, GeometryError, RhoJet};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Hermitian inner product Σ a_l conj(b_l).
fn herm(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    herm(a, a).re.sqrt()
}

/// Candidate tangential vectors: coordinate directions projected off the
/// complex normal direction ν = (∂ρ/∂z₁, …, ∂ρ/∂z_n).
fn candidates(rj: &RhoJet) -> Vec<Vec<Complex64>> {
    let n = rj.n;
    let nu: Vec<Complex64> = (0..n).map(|j| rj.dz(j)).collect();
    let nn = herm(&nu, &nu).re;
    (0..n)
        .map(|j| {
            let mut w: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
            w[j] = Complex64::new(1.0, 0.0);
            // ⟨e_j, ν⟩ = conj(ν_j)
            let c = nu[j].conj() / nn;
            for l in 0..n {
                w[l] -= c * nu[l];
            }
            w
        })
        .collect()
}

/// Gram–Schmidt with an explicit pivot order; returns (n−1)×n rows γᵏ.
fn gram_schmidt(
    cands: &[Vec<Complex64>],
    pivots: &[usize],
) -> Result<Vec<Vec<Complex64>>, GeometryError> {
    let mut rows: Vec<Vec<Complex64>> = Vec::with_capacity(pivots.len());
    for &p in pivots {
        let mut v = cands[p].clone();
        for r in &rows {
            let c = herm(&v, r);
            for l in 0..v.len() {
                v[l] -= c * r[l];
            }
        }
        let nv = norm(&v);
        if nv < 1e-8 {
            return Err(GeometryError::FrameBreakdown(nv));
        }
        for l in 0..v.len() {
            v[l] /= nv;
        }
        rows.push(v);
    }
    Ok(rows)
}

/// Chooses the pivot order at the base point: repeatedly pick the candidate
/// with the largest remaining norm after orthogonalization.
fn choose_pivots(cands: &[Vec<Complex64>]) -> Result<Vec<usize>, GeometryError> {
    let n = cands.len();
    let mut pivots = Vec::with_capacity(n - 1);
    let mut rows: Vec<Vec<Complex64>> = vec![];
    let mut remaining: Vec<usize> = (0..n).collect();
    for _ in 0..n - 1 {
        let mut best: Option<(usize, f64, Vec<Complex64>)> = None;
        for (ri, &j) in remaining.iter().enumerate() {
            let mut v = cands[j].clone();
            for r in &rows {
                let c = herm(&v, r);
                for l in 0..v.len() {
                    v[l] -= c * r[l];
                }
            }
            let nv = norm(&v);
            if best.as_ref().map_or(true, |(_, bn, _)| nv > *bn) {
                best = Some((ri, nv, v));
            }
        }
        let (ri, nv, mut v) = best.unwrap();
        if nv < 1e-8 {
            return Err(GeometryError::FrameBreakdown(nv));
        }
        for l in 0..v.len() {
            v[l] /= nv;
        }
        rows.push(v);
        pivots.push(remaining.remove(ri));
    }
    Ok(pivots)
}

/// Tangential frame rows at a point, replaying the frozen pivot order.
pub fn gamma_field(
    domain: &Domain,
    pivots: &[usize],
    w: &[f64],
) -> Result<DMatrix<Complex64>, GeometryError> {
    let rj = RhoJet::new(domain.n, domain.rho_jet(w, 1));
    let gs = rj.grad_sq();
    if !(gs > 1e-12) {
        return Err(GeometryError::DegenerateGradient(gs));
    }
    let rows = gram_schmidt(&candidates(&rj), pivots)?;
    let n = domain.n;
    Ok(DMatrix::from_fn(n - 1, n, |k, l| rows[k][l]))
}

/// The boundary frame at a base point: γ rows, frozen pivots, ω_n data.
#[derive(Debug, Clone)]
pub struct Frame {
    pub n: usize,
    pub p: Vec<f64>,
    pub pivots: Vec<usize>,
    /// (n−1)×n rows γᵏ at p.
    pub gamma: DMatrix<Complex64>,
    /// coefficients of ω_n = √2 ∂ρ over dz_l at p.
    pub omega_n: Vec<Complex64>,
}

pub fn build_frame(domain: &Domain, p: &[f64]) -> Result<Frame, GeometryError> {
    let rj = RhoJet::new(domain.n, domain.rho_jet(p, 1));
    let gs = rj.grad_sq();
    if !(gs > 1e-12) {
        return Err(GeometryError::DegenerateGradient(gs));
    }
    let cands = candidates(&rj);
    let pivots = choose_pivots(&cands)?;
    let rows = gram_schmidt(&cands, &pivots)?;
    let n = domain.n;
    let gamma = DMatrix::from_fn(n - 1, n, |k, l| rows[k][l]);
    let omega_n = (0..n)
        .map(|l| rj.dz(l) * std::f64::consts::SQRT_2)
        .collect();
    Ok(Frame {
        n,
        p: p.to_vec(),
        pivots,
        gamma,
        omega_n,
    })
}

/// Complex coefficients a_k of `L_n = Σ a_k ∂/∂z_k`:
/// `a_k = 2√2 (∂ρ/∂z̄_k)/|∇ρ|²`.
pub fn l_n_coeffs(rj: &RhoJet) -> Vec<Complex64> {
    let q = rj.grad_sq();
    let s = 2.0 * std::f64::consts::SQRT_2 / q;
    (0..rj.n).map(|k| rj.dzbar(k) * s).collect()
}

/// Ambient real field of `T = (L_n − L̄_n)/2i` at `w`, together with its
/// real-coordinate Jacobian (2n × 2n).  Components over (x_k, y_k):
/// `T_{x_k} = Im(a_k)/2`, `T_{y_k} = −Re(a_k)/2`.
pub fn transverse_field_and_jac(domain: &Domain, w: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = domain.n;
    let rj = RhoJet::new(n, domain.rho_jet(w, 2));
    let q = rj.grad_sq();
    let s = 2.0 * std::f64::consts::SQRT_2;
    let a: Vec<Complex64> = (0..n).map(|k| rj.dzbar(k) * (s / q)).collect();
    let mut field = vec![0.0; 2 * n];
    for k in 0..n {
        field[2 * k] = 0.5 * a[k].im;
        field[2 * k + 1] = -0.5 * a[k].re;
    }
    // ∂_r a_k = s [∂_r(ρ_z̄k) q − ρ_z̄k ∂_r q] / q²
    let dq: Vec<f64> = (0..2 * n)
        .map(|r| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += rj.w1_real_deriv(j, r) * rj.dzbar(j) + rj.dz(j) * rj.w1_real_deriv(n + j, r);
            }
            (4.0 * acc).re
        })
        .collect();
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        for r in 0..2 * n {
            let da = (rj.w1_real_deriv(n + k, r) * q - rj.dzbar(k) * dq[r]) * (s / (q * q));
            jac[(2 * k, r)] = 0.5 * da.im;
            jac[(2 * k + 1, r)] = -0.5 * da.re;
        }
    }
    (field, jac)
}

/// Ambient real field `ν = ∇ρ/|∇ρ|²` at `w` with its Jacobian.
/// Flowing along ν changes ρ at unit rate: dρ/dt = ∇ρ·ν = 1.
pub fn normal_field_and_jac(domain: &Domain, w: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = domain.n;
    let rj = RhoJet::new(n, domain.rho_jet(w, 2));
    let q = rj.grad_sq();
    let g = rj.real_gradient();
    let field: Vec<f64> = g.iter().map(|&gi| gi / q).collect();
    let dq: Vec<f64> = (0..2 * n)
        .map(|r| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += rj.w1_real_deriv(j, r) * rj.dzbar(j) + rj.dz(j) * rj.w1_real_deriv(n + j, r);
            }
            (4.0 * acc).re
        })
        .collect();
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for mu in 0..2 * n {
        for r in 0..2 * n {
            jac[(mu, r)] = (rj.real_hessian(mu, r) * q - g[mu] * dq[r]) / (q * q);
        }
    }
    (field, jac)
}
