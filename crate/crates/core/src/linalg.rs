//! Small dense helpers for the d ≤ 3 matrices this crate manipulates.
//! Matrices are row-major `Vec<f64>` of length d*d.

pub fn mat_vec(m: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    debug_assert_eq!(m.len(), d * d);
    (0..d).map(|i| (0..d).map(|j| m[i * d + j] * x[j]).sum()).collect()
}

pub fn mat_mul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            for j in 0..d {
                c[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    c
}

pub fn transpose(a: &[f64], d: usize) -> Vec<f64> {
    let mut t = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            t[j * d + i] = a[i * d + j];
        }
    }
    t
}

/// σσᵀ for a general square σ.
pub fn aat(a: &[f64], d: usize) -> Vec<f64> {
    let at = transpose(a, d);
    mat_mul(a, &at, d)
}

pub fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &[f64], d: usize) -> f64 {
    let mut a = m.to_vec();
    let mut sign = 1.0;
    let mut result = 1.0;
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs()))
            .unwrap();
        if a[pivot * d + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..d {
                a.swap(col * d + j, pivot * d + j);
            }
            sign = -sign;
        }
        result *= a[col * d + col];
        for i in (col + 1)..d {
            let f = a[i * d + col] / a[col * d + col];
            for j in col..d {
                a[i * d + j] -= f * a[col * d + j];
            }
        }
    }
    sign * result
}

/// Solve A x = b for small symmetric-ish A (Gaussian elimination).
pub fn solve(m: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let d = b.len();
    let mut a = m.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs()))?;
        if a[pivot * d + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..d {
                a.swap(col * d + j, pivot * d + j);
            }
            rhs.swap(col, pivot);
        }
        for i in (col + 1)..d {
            let f = a[i * d + col] / a[col * d + col];
            for j in col..d {
                a[i * d + j] -= f * a[col * d + j];
            }
            rhs[i] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..d {
            s -= a[i * d + j] * x[j];
        }
        x[i] = s / a[i * d + i];
    }
    Some(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigenvalues(m: &[f64], d: usize) -> Vec<f64> {
    let mut a = m.to_vec();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a[i * d + j] * a[i * d + j];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..d).map(|i| a[i * d + i]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Spectral norm of a symmetric matrix.
pub fn sym_op_norm(m: &[f64], d: usize) -> f64 {
    sym_eigenvalues(m, d)
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn sub_vec(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_solve() {
        let m = vec![2.0, 1.0, 1.0, 3.0];
        assert!((det(&m, 2) - 5.0).abs() < 1e-12);
        let x = solve(&m, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12);
        assert!((x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigen_2x2_and_3x3() {
        let m = vec![2.0, 1.0, 1.0, 2.0];
        let ev = sym_eigenvalues(&m, 2);
        assert!((ev[0] - 1.0).abs() < 1e-10);
        assert!((ev[1] - 3.0).abs() < 1e-10);
        // diag(1,4,9) rotated by a permutation stays diag
        let m3 = vec![4.0, 0.0, 0.0, 0.0, 9.0, 0.0, 0.0, 0.0, 1.0];
        let ev3 = sym_eigenvalues(&m3, 3);
        assert!((ev3[0] - 1.0).abs() < 1e-10);
        assert!((ev3[2] - 9.0).abs() < 1e-10);
    }
}
