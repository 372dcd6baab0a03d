//! Central finite differences with position-scaled steps.

use crate::linalg::norm2;

/// Gradient of a scalar function, step 1e-5·(1+|x|).
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-5 * (1.0 + norm2(x));
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Hessian from the gradient function, step 1e-4·(1+|x|).
pub fn fd_hessian_of_grad(grad: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let h = 1e-4 * (1.0 + norm2(x));
    let mut hess = vec![0.0; d * d];
    let mut xp = x.to_vec();
    for j in 0..d {
        let xj = x[j];
        xp[j] = xj + h;
        let gp = grad(&xp);
        xp[j] = xj - h;
        let gm = grad(&xp);
        xp[j] = xj;
        for i in 0..d {
            hess[i * d + j] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    // symmetrize
    for i in 0..d {
        for j in (i + 1)..d {
            let s = 0.5 * (hess[i * d + j] + hess[j * d + i]);
            hess[i * d + j] = s;
            hess[j * d + i] = s;
        }
    }
    hess
}

/// Column-wise derivative ∂_j of a matrix field, step 1e-5·(1+|x|).
/// Returns the divergence vector Υ_i = Σ_j ∂_j m_{ij}(x).
pub fn fd_divergence(m: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let h = 1e-5 * (1.0 + norm2(x));
    let mut div = vec![0.0; d];
    let mut xp = x.to_vec();
    for j in 0..d {
        let xj = x[j];
        xp[j] = xj + h;
        let mp = m(&xp);
        xp[j] = xj - h;
        let mm = m(&xp);
        xp[j] = xj;
        for i in 0..d {
            div[i] += (mp[i * d + j] - mm[i * d + j]) / (2.0 * h);
        }
    }
    div
}

/// Low-discrepancy points in a box (Kronecker / R_d sequence).
pub fn quasi_random_points(lo: &[f64], hi: &[f64], n: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    // generalized golden ratio alphas
    let phi = {
        let mut x = 2.0f64;
        for _ in 0..64 {
            x = (1.0 + x).powf(1.0 / (d as f64 + 1.0));
        }
        x
    };
    let alphas: Vec<f64> = (1..=d).map(|k| (1.0 / phi.powi(k as i32)).fract()).collect();
    (0..n)
        .map(|i| {
            (0..d)
                .map(|k| {
                    let u = ((i as f64 + 1.0) * alphas[k] + 0.5).fract();
                    lo[k] + u * (hi[k] - lo[k])
                })
                .collect()
        })
        .collect()
}
