//! Small dense symmetric-matrix helpers for 2x2 and 3x3 information matrices.

use crate::error::{Error, Result};

pub(crate) type Mat = Vec<Vec<f64>>;

pub(crate) fn zeros(n: usize) -> Mat {
    vec![vec![0.0; n]; n]
}

pub(crate) fn identity(n: usize) -> Mat {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub(crate) fn mat_vec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

pub(crate) fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn symmetrize(m: &mut Mat) {
    let n = m.len();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
}

/// Lower Cholesky factor, or `None` if `m` is not positive definite.
pub(crate) fn cholesky(m: &Mat) -> Option<Mat> {
    let n = m.len();
    let mut l = zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub(crate) fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let n = m.len();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

pub(crate) fn condition_number(m: &Mat) -> f64 {
    let eig = sym_eigenvalues(m);
    let max = eig.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    let min = eig.iter().fold(f64::INFINITY, |acc, e| acc.min(e.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a symmetric positive-definite matrix; a singular or
/// ill-conditioned matrix is reported with its condition number.
pub(crate) fn spd_inverse(m: &Mat) -> Result<Mat> {
    let n = m.len();
    let cond = condition_number(m);
    let l = match cholesky(m) {
        Some(l) if cond < 1e14 => l,
        _ => return Err(Error::SingularInformation { condition: cond }),
    };
    let mut inv = zeros(n);
    for col in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let rhs = if i == col { 1.0 } else { 0.0 };
            y[i] = (rhs - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
        }
        for i in 0..n {
            inv[i][col] = x[i];
        }
    }
    symmetrize(&mut inv);
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let m = vec![vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]];
        let inv = spd_inverse(&m).unwrap();
        let prod = mat_mul(&m, &inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigenvalues_and_singularity() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let mut e = sym_eigenvalues(&m);
        e.sort_by(f64::total_cmp);
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
        let singular = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            spd_inverse(&singular),
            Err(Error::SingularInformation { .. })
        ));
    }
}
