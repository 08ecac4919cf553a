//! Sparse kernels for the Newton linearisation `J = diag(a) + tau * L * diag(b)`,
//! where `L = -Delta_h` is the (2d+1)-point negative Laplacian.
//!
//! `J` is a nonsingular M-matrix whenever `a > 0` and `b >= 0` (it is column
//! diagonally dominant), so LU without pivoting is stable in 1-D and BiCGSTAB
//! converges reliably in 2-D.

use crate::field::{Boundary, GridSpec};

/// `out = L w` with `L = -Delta_h` under the grid's boundary rule.
pub fn neg_laplacian(spec: &GridSpec, w: &[f64], out: &mut [f64]) {
    let n = spec.points_per_axis;
    let inv_h2 = 1.0 / (spec.spacing() * spec.spacing());
    let periodic = spec.boundary == Boundary::Periodic;
    let neighbour = |k: usize, axis: usize, forward: bool| -> f64 {
        let mut idx = spec.unravel(k);
        let i = idx[axis];
        let j = match (forward, i) {
            (true, i) if i + 1 < n => i + 1,
            (false, i) if i > 0 => i - 1,
            (true, _) if periodic => 0,
            (false, _) if periodic => n - 1,
            _ => return 0.0,
        };
        idx[axis] = j;
        w[spec.ravel(idx)]
    };
    if spec.dim == 1 {
        for i in 0..n {
            let left = if i > 0 { w[i - 1] } else if periodic { w[n - 1] } else { 0.0 };
            let right = if i + 1 < n { w[i + 1] } else if periodic { w[0] } else { 0.0 };
            out[i] = (2.0 * w[i] - left - right) * inv_h2;
        }
        return;
    }
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 2.0 * spec.dim as f64 * w[k];
        for axis in 0..spec.dim {
            acc -= neighbour(k, axis, true) + neighbour(k, axis, false);
        }
        *o = acc * inv_h2;
    }
}

/// Matrix-free `J x = a .* x + tau * L (b .* x)`.
pub struct Jacobian<'a> {
    pub spec: &'a GridSpec,
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub tau: f64,
}

impl Jacobian<'_> {
    pub fn apply(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        for ((s, b), x) in scratch.iter_mut().zip(self.b).zip(x) {
            *s = b * x;
        }
        neg_laplacian(self.spec, scratch, out);
        for ((o, a), x) in out.iter_mut().zip(self.a).zip(x) {
            *o = a * x + self.tau * *o;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let inv_h2 = 1.0 / (self.spec.spacing() * self.spec.spacing());
        let c = 2.0 * self.spec.dim as f64 * inv_h2 * self.tau;
        self.a.iter().zip(self.b).map(|(a, b)| a + c * b).collect()
    }

    /// Direct solve for 1-D grids (tridiagonal or cyclic tridiagonal).
    pub fn solve_1d(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(self.spec.dim, 1);
        let n = rhs.len();
        let c = self.tau / (self.spec.spacing() * self.spec.spacing());
        let diag: Vec<f64> = self.a.iter().zip(self.b).map(|(a, b)| a + 2.0 * c * b).collect();
        // Row i: lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1].
        let lower: Vec<f64> = (0..n).map(|i| if i > 0 { -c * self.b[i - 1] } else { 0.0 }).collect();
        let upper: Vec<f64> = (0..n).map(|i| if i + 1 < n { -c * self.b[i + 1] } else { 0.0 }).collect();
        match self.spec.boundary {
            Boundary::DirichletZero => thomas(&lower, &diag, &upper, rhs),
            Boundary::Periodic => {
                let top_right = -c * self.b[n - 1];
                let bottom_left = -c * self.b[0];
                cyclic_thomas(&lower, &diag, &upper, top_right, bottom_left, rhs)
            }
        }
    }
}

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Cyclic tridiagonal solve via Sherman-Morrison. `top_right` is `A[0][n-1]`,
/// `bottom_left` is `A[n-1][0]`.
pub fn cyclic_thomas(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    top_right: f64,
    bottom_left: f64,
    rhs: &[f64],
) -> Vec<f64> {
    let n = diag.len();
    if top_right == 0.0 && bottom_left == 0.0 {
        return thomas(lower, diag, upper, rhs);
    }
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - bottom_left * top_right / gamma;
    let x = thomas(lower, &bb, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = bottom_left;
    let z = thomas(lower, &bb, upper, &u);
    let fact = (x[0] + top_right * x[n - 1] / gamma) / (1.0 + z[0] + top_right * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(x, z)| x - fact * z).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned BiCGSTAB for `J x = rhs`, starting from zero.
pub fn bicgstab(jac: &Jacobian<'_>, rhs: &[f64], rel_tol: f64, max_iter: usize) -> (Vec<f64>, KrylovStats) {
    let n = rhs.len();
    let dinv: Vec<f64> = jac.diagonal().iter().map(|d| 1.0 / d).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let norm = |x: &[f64]| dot(x, x).sqrt();

    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return (
            x,
            KrylovStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        );
    }
    let mut r = rhs.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            phat[i] = dinv[i] * p[i];
        }
        jac.apply(&phat, &mut v, &mut scratch);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm <= rel_tol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            rel = norm(&s) / bnorm;
            return (
                x,
                KrylovStats {
                    iterations: it,
                    relative_residual: rel,
                },
            );
        }
        for i in 0..n {
            shat[i] = dinv[i] * s[i];
        }
        jac.apply(&shat, &mut t, &mut scratch);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= rel_tol {
            return (
                x,
                KrylovStats {
                    iterations: it,
                    relative_residual: rel,
                },
            );
        }
        if omega == 0.0 {
            break;
        }
    }
    (
        x,
        KrylovStats {
            iterations: max_iter,
            relative_residual: rel,
        },
    )
}
