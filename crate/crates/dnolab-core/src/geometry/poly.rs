//! Polynomial defining functions in (z, z̄) with exact Wirtinger derivative
//! tables, and a small jet algebra for composing them.
//!
//! Defining functions are real-valued polynomials `ρ₀(z, z̄)`; the boundary
//! normalization divides by `√Q` with `Q = |∇ρ₀|² = 4 Σ_j ∂_{z_j}ρ₀ ·
//! ∂_{z̄_j}ρ₀` (also a polynomial), so every derivative of the normalized
//! function is a finite combination of *exact* polynomial derivatives glued
//! by the Leibniz product and the `w^{−1/2}` chain rule.  [`Jet`] carries a
//! value plus full symmetric derivative tensors up to order 3 over the 2n
//! Wirtinger directions `(∂_{z_1}, …, ∂_{z_n}, ∂_{z̄_1}, …, ∂_{z̄_n})`.

use num_complex::Complex64;
use std::collections::HashMap;

/// One monomial `c · Π z_j^{a_j} · Π z̄_j^{b_j}`.
#[derive(Debug, Clone)]
pub struct Monomial {
    pub coeff: Complex64,
    pub pow_z: Vec<u8>,
    pub pow_zbar: Vec<u8>,
}

/// Polynomial in (z, z̄) on ℂⁿ.
#[derive(Debug, Clone)]
pub struct Poly {
    pub n: usize,
    pub terms: Vec<Monomial>,
}

impl Poly {
    pub fn new(n: usize) -> Self {
        Poly { n, terms: vec![] }
    }

    pub fn term(mut self, coeff: Complex64, pow_z: &[u8], pow_zbar: &[u8]) -> Self {
        assert_eq!(pow_z.len(), self.n);
        assert_eq!(pow_zbar.len(), self.n);
        self.terms.push(Monomial {
            coeff,
            pow_z: pow_z.to_vec(),
            pow_zbar: pow_zbar.to_vec(),
        });
        self
    }

    pub fn real_term(self, coeff: f64, pow_z: &[u8], pow_zbar: &[u8]) -> Self {
        self.term(Complex64::new(coeff, 0.0), pow_z, pow_zbar)
    }

    /// Collects like monomials and drops numerically zero ones.
    pub fn simplify(mut self) -> Self {
        let mut map: HashMap<(Vec<u8>, Vec<u8>), Complex64> = HashMap::new();
        for t in self.terms.drain(..) {
            *map.entry((t.pow_z, t.pow_zbar))
                .or_insert(Complex64::new(0.0, 0.0)) += t.coeff;
        }
        let mut terms: Vec<Monomial> = map
            .into_iter()
            .filter(|(_, c)| c.norm() > 1e-300)
            .map(|((pow_z, pow_zbar), coeff)| Monomial {
                coeff,
                pow_z,
                pow_zbar,
            })
            .collect();
        terms.sort_by(|a, b| (&a.pow_z, &a.pow_zbar).cmp(&(&b.pow_z, &b.pow_zbar)));
        Poly { n: self.n, terms }
    }

    /// Wirtinger derivative along direction `dir` (0..n = ∂z_j, n..2n = ∂z̄_j).
    pub fn wirtinger(&self, dir: usize) -> Poly {
        let mut out = Poly::new(self.n);
        for t in &self.terms {
            if dir < self.n {
                let a = t.pow_z[dir];
                if a > 0 {
                    let mut pz = t.pow_z.clone();
                    pz[dir] -= 1;
                    out.terms.push(Monomial {
                        coeff: t.coeff * a as f64,
                        pow_z: pz,
                        pow_zbar: t.pow_zbar.clone(),
                    });
                }
            } else {
                let j = dir - self.n;
                let b = t.pow_zbar[j];
                if b > 0 {
                    let mut pb = t.pow_zbar.clone();
                    pb[j] -= 1;
                    out.terms.push(Monomial {
                        coeff: t.coeff * b as f64,
                        pow_z: t.pow_z.clone(),
                        pow_zbar: pb,
                    });
                }
            }
        }
        out.simplify()
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::new(self.n);
        for a in &self.terms {
            for b in &other.terms {
                let pow_z = a
                    .pow_z
                    .iter()
                    .zip(&b.pow_z)
                    .map(|(x, y)| x + y)
                    .collect();
                let pow_zbar = a
                    .pow_zbar
                    .iter()
                    .zip(&b.pow_zbar)
                    .map(|(x, y)| x + y)
                    .collect();
                out.terms.push(Monomial {
                    coeff: a.coeff * b.coeff,
                    pow_z,
                    pow_zbar,
                });
            }
        }
        out.simplify()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out.simplify()
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff *= s;
        }
        out
    }

    /// Evaluates at a point given as 2n real coordinates
    /// (Re z₁, Im z₁, …, Re z_n, Im z_n).
    pub fn eval(&self, w: &[f64]) -> Complex64 {
        let z: Vec<Complex64> = (0..self.n)
            .map(|j| Complex64::new(w[2 * j], w[2 * j + 1]))
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut v = t.coeff;
            for j in 0..self.n {
                for _ in 0..t.pow_z[j] {
                    v *= z[j];
                }
                for _ in 0..t.pow_zbar[j] {
                    v *= z[j].conj();
                }
            }
            acc += v;
        }
        acc
    }

    /// `|∇self|²` as a polynomial: `4 Σ_j ∂_{z_j}ρ · ∂_{z̄_j}ρ`.
    pub fn grad_norm_sq(&self) -> Poly {
        let mut out = Poly::new(self.n);
        for j in 0..self.n {
            let dz = self.wirtinger(j);
            let dzb = self.wirtinger(self.n + j);
            out = out.add(&dz.mul(&dzb).scale(4.0));
        }
        out.simplify()
    }
}

/// Precomputed Wirtinger derivative tables of one polynomial up to order 3.
#[derive(Debug, Clone)]
pub struct DerivTables {
    /// dims = 2n Wirtinger directions.
    pub dims: usize,
    /// keyed by sorted direction multi-index (len 0..=3).
    tables: HashMap<Vec<u8>, Poly>,
}

impl DerivTables {
    pub fn build(p: &Poly) -> Self {
        let dims = 2 * p.n;
        let mut tables = HashMap::new();
        tables.insert(vec![], p.clone().simplify());
        let mut frontier: Vec<Vec<u8>> = vec![vec![]];
        for _ in 0..3 {
            let mut next = vec![];
            for key in frontier {
                let base = tables[&key].clone();
                let start = key.last().copied().unwrap_or(0);
                for d in start..dims as u8 {
                    let mut k2 = key.clone();
                    k2.push(d);
                    if !tables.contains_key(&k2) {
                        tables.insert(k2.clone(), base.wirtinger(d as usize));
                        next.push(k2);
                    }
                }
            }
            frontier = next;
        }
        DerivTables { dims, tables }
    }

    fn table(&self, key: &[u8]) -> &Poly {
        let mut k = key.to_vec();
        k.sort_unstable();
        &self.tables[&k]
    }

    /// Evaluates the full jet of the polynomial at a real-coordinate point.
    pub fn jet(&self, w: &[f64], order: usize) -> Jet {
        let m = self.dims;
        let mut jet = Jet::zero(m, order);
        jet.v = self.table(&[]).eval(w);
        for a in 0..m {
            jet.d1[a] = self.table(&[a as u8]).eval(w);
        }
        if order >= 2 {
            for a in 0..m {
                for b in a..m {
                    let v = self.table(&[a as u8, b as u8]).eval(w);
                    jet.set2(a, b, v);
                }
            }
        }
        if order >= 3 {
            for a in 0..m {
                for b in a..m {
                    for c in b..m {
                        let v = self.table(&[a as u8, b as u8, c as u8]).eval(w);
                        jet.set3(a, b, c, v);
                    }
                }
            }
        }
        jet
    }
}

/// Value and symmetric derivative tensors (orders 1..=3) over `m` directions.
#[derive(Debug, Clone)]
pub struct Jet {
    pub m: usize,
    pub order: usize,
    pub v: Complex64,
    pub d1: Vec<Complex64>,
    /// row-major m×m (symmetric); empty if order < 2.
    pub d2: Vec<Complex64>,
    /// m×m×m (symmetric); empty if order < 3.
    pub d3: Vec<Complex64>,
}

impl Jet {
    pub fn zero(m: usize, order: usize) -> Self {
        Jet {
            m,
            order,
            v: Complex64::new(0.0, 0.0),
            d1: vec![Complex64::new(0.0, 0.0); m],
            d2: if order >= 2 {
                vec![Complex64::new(0.0, 0.0); m * m]
            } else {
                vec![]
            },
            d3: if order >= 3 {
                vec![Complex64::new(0.0, 0.0); m * m * m]
            } else {
                vec![]
            },
        }
    }

    pub fn g2(&self, a: usize, b: usize) -> Complex64 {
        self.d2[a * self.m + b]
    }

    pub fn set2(&mut self, a: usize, b: usize, v: Complex64) {
        self.d2[a * self.m + b] = v;
        self.d2[b * self.m + a] = v;
    }

    pub fn g3(&self, a: usize, b: usize, c: usize) -> Complex64 {
        self.d3[(a * self.m + b) * self.m + c]
    }

    pub fn set3(&mut self, a: usize, b: usize, c: usize, v: Complex64) {
        let m = self.m;
        for (x, y, z) in [
            (a, b, c),
            (a, c, b),
            (b, a, c),
            (b, c, a),
            (c, a, b),
            (c, b, a),
        ] {
            self.d3[(x * m + y) * m + z] = v;
        }
    }

    /// Leibniz product of two jets (same m, same order).
    pub fn mul(&self, o: &Jet) -> Jet {
        let m = self.m;
        let order = self.order.min(o.order);
        let mut r = Jet::zero(m, order);
        r.v = self.v * o.v;
        for a in 0..m {
            r.d1[a] = self.d1[a] * o.v + self.v * o.d1[a];
        }
        if order >= 2 {
            for a in 0..m {
                for b in 0..m {
                    r.d2[a * m + b] = self.g2(a, b) * o.v
                        + self.d1[a] * o.d1[b]
                        + self.d1[b] * o.d1[a]
                        + self.v * o.g2(a, b);
                }
            }
        }
        if order >= 3 {
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        r.d3[(a * m + b) * m + c] = self.g3(a, b, c) * o.v
                            + self.g2(a, b) * o.d1[c]
                            + self.g2(a, c) * o.d1[b]
                            + self.g2(b, c) * o.d1[a]
                            + self.d1[a] * o.g2(b, c)
                            + self.d1[b] * o.g2(a, c)
                            + self.d1[c] * o.g2(a, b)
                            + self.v * o.g3(a, b, c);
                    }
                }
            }
        }
        r
    }

    /// Jet of `self^{−1/2}` (value must be strictly positive real part and
    /// the function real in use; valid as a formal chain rule regardless).
    pub fn recip_sqrt(&self) -> Jet {
        let m = self.m;
        let order = self.order;
        let q = self.v;
        let f0 = (Complex64::new(1.0, 0.0) / q).sqrt();
        let f1 = f0 * Complex64::new(-0.5, 0.0) / q;
        let f2 = f0 * Complex64::new(0.75, 0.0) / (q * q);
        let f3 = f0 * Complex64::new(-15.0 / 8.0, 0.0) / (q * q * q);
        let mut r = Jet::zero(m, order);
        r.v = f0;
        for a in 0..m {
            r.d1[a] = f1 * self.d1[a];
        }
        if order >= 2 {
            for a in 0..m {
                for b in 0..m {
                    r.d2[a * m + b] = f2 * self.d1[a] * self.d1[b] + f1 * self.g2(a, b);
                }
            }
        }
        if order >= 3 {
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        r.d3[(a * m + b) * m + c] = f3 * self.d1[a] * self.d1[b] * self.d1[c]
                            + f2 * (self.g2(a, b) * self.d1[c]
                                + self.g2(a, c) * self.d1[b]
                                + self.g2(b, c) * self.d1[a])
                            + f1 * self.g3(a, b, c);
                    }
                }
            }
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c64(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// |z|² − 1 on ℂ².
    fn ball2() -> Poly {
        Poly::new(2)
            .real_term(1.0, &[1, 0], &[1, 0])
            .real_term(1.0, &[0, 1], &[0, 1])
            .real_term(-1.0, &[0, 0], &[0, 0])
    }

    #[test]
    fn wirtinger_derivatives_of_ball() {
        let p = ball2();
        // ∂z₁(|z|²−1) = z̄₁
        let d = p.wirtinger(0);
        assert_eq!(d.terms.len(), 1);
        assert_eq!(d.terms[0].pow_zbar, vec![1, 0]);
        // at z = (1+2i, −1): z̄₁ = 1 − 2i
        let v = d.eval(&[1.0, 2.0, -1.0, 0.0]);
        assert_relative_eq!(v.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(v.im, -2.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_norm_of_ball_is_four_z_sq() {
        let q = ball2().grad_norm_sq();
        // 4(|z₁|² + |z₂|²)
        let v = q.eval(&[0.6, 0.0, 0.0, 0.8]);
        assert_relative_eq!(v.re, 4.0, epsilon = 1e-14);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn jet_values_match_finite_differences() {
        let p = Poly::new(1)
            .real_term(1.0, &[2], &[1])
            .real_term(0.5, &[1], &[0])
            .real_term(0.5, &[0], &[1]);
        let tables = DerivTables::build(&p);
        let w = [0.3, -0.7];
        let jet = tables.jet(&w, 3);
        // check ∂z∂z̄ of z²z̄ = 2z at the point
        let z = Complex64::new(0.3, -0.7);
        let expect = z * 2.0;
        assert_relative_eq!((jet.g2(0, 1) - expect).norm(), 0.0, epsilon = 1e-14);
        // third derivative ∂z∂z∂z̄ = 2
        assert_relative_eq!((jet.g3(0, 0, 1) - c64(2.0)).norm(), 0.0, epsilon = 1e-14);
        // pure ∂z̄∂z̄ = 0
        assert_relative_eq!(jet.g2(1, 1).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn leibniz_product_matches_expanded_polynomial() {
        let a = Poly::new(1).real_term(1.0, &[1], &[0]).real_term(2.0, &[0], &[1]);
        let b = Poly::new(1).real_term(3.0, &[1], &[1]);
        let prod = a.mul(&b);
        let ta = DerivTables::build(&a);
        let tb = DerivTables::build(&b);
        let tp = DerivTables::build(&prod);
        let w = [0.4, 0.9];
        let ja = ta.jet(&w, 3);
        let jb = tb.jet(&w, 3);
        let jp = tp.jet(&w, 3);
        let jm = ja.mul(&jb);
        assert_relative_eq!((jm.v - jp.v).norm(), 0.0, epsilon = 1e-13);
        for x in 0..2 {
            assert_relative_eq!((jm.d1[x] - jp.d1[x]).norm(), 0.0, epsilon = 1e-13);
            for y in 0..2 {
                assert_relative_eq!((jm.g2(x, y) - jp.g2(x, y)).norm(), 0.0, epsilon = 1e-13);
                for z in 0..2 {
                    assert_relative_eq!(
                        (jm.g3(x, y, z) - jp.g3(x, y, z)).norm(),
                        0.0,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn recip_sqrt_against_finite_differences() {
        // q(z,z̄) = 2 + z z̄ (positive real); check jet of q^{-1/2} against
        // central differences in the real coordinate.
        let q = Poly::new(1).real_term(2.0, &[0], &[0]).real_term(1.0, &[1], &[1]);
        let tq = DerivTables::build(&q);
        let w = [0.5, -0.3];
        let jet = tq.jet(&w, 3).recip_sqrt();
        let f = |x: f64, y: f64| -> f64 {
            let qv = 2.0 + (x * x + y * y);
            1.0 / qv.sqrt()
        };
        let h = 1e-4;
        // real-coordinate derivative ∂x = ∂z + ∂z̄
        let fd_x = (f(w[0] + h, w[1]) - f(w[0] - h, w[1])) / (2.0 * h);
        let jet_x = jet.d1[0] + jet.d1[1];
        assert_relative_eq!(jet_x.re, fd_x, epsilon = 1e-8);
        assert!(jet_x.im.abs() < 1e-13);
        // ∂y = i(∂z − ∂z̄)
        let fd_y = (f(w[0], w[1] + h) - f(w[0], w[1] - h)) / (2.0 * h);
        let jet_y = (jet.d1[0] - jet.d1[1]) * Complex64::new(0.0, 1.0);
        assert_relative_eq!(jet_y.re, fd_y, epsilon = 1e-8);
        // ∂x∂x = (∂z + ∂z̄)² expanded
        let fd_xx = (f(w[0] + h, w[1]) - 2.0 * f(w[0], w[1]) + f(w[0] - h, w[1])) / (h * h);
        let jet_xx = jet.g2(0, 0) + jet.g2(0, 1) * 2.0 + jet.g2(1, 1);
        assert_relative_eq!(jet_xx.re, fd_xx, epsilon = 1e-6);
        // third derivative ∂x³ via the jet vs FD of the second derivative
        let fd2 = |x: f64| (f(x + h, w[1]) - 2.0 * f(x, w[1]) + f(x - h, w[1])) / (h * h);
        let fd_xxx = (fd2(w[0] + h) - fd2(w[0] - h)) / (2.0 * h);
        let jet_xxx = jet.g3(0, 0, 0)
            + jet.g3(0, 0, 1) * 3.0
            + jet.g3(0, 1, 1) * 3.0
            + jet.g3(1, 1, 1);
        assert_relative_eq!(jet_xxx.re, fd_xxx, epsilon = 2e-4);
    }
}
