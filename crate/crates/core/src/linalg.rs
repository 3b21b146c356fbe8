//! Fixed-size 3x3 helpers for the squared-range systems.
//!
//! The unknown is always `y = (x, y, alpha)`, so every normal-equation matrix
//! is 3x3 and symmetric. Closed forms are used throughout.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO3: Mat3 = [[0.0; 3]; 3];

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for (r, row) in m.iter().enumerate() {
        out[r] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    out
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = ZERO3;
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut out = ZERO3;
    for r in 0..3 {
        for c in 0..3 {
            out[c][r] = m[r][c];
        }
    }
    out
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Solves `m z = b` by the adjugate formula after symmetric diagonal
/// equilibration. Returns `None` when the determinant of the equilibrated
/// matrix is negligible relative to its scale.
pub fn solve(m: &Mat3, b: &Vec3) -> Option<Vec3> {
    let s: Vec3 = std::array::from_fn(|i| {
        let a = m[i][i].abs();
        if a > 0.0 && a.is_finite() {
            1.0 / a.sqrt()
        } else {
            1.0
        }
    });
    let e: Mat3 = std::array::from_fn(|i| std::array::from_fn(|j| s[i] * m[i][j] * s[j]));
    let d = det(&e);
    let scale = e
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if !d.is_finite() || scale == 0.0 || d.abs() <= 1e-14 * scale.powi(3) {
        return None;
    }
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| e[r0][c0] * e[r1][c1] - e[r0][c1] * e[r1][c0];
    let adj: Mat3 = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let z = mat_vec(&adj, &[s[0] * b[0], s[1] * b[1], s[2] * b[2]]);
    Some(std::array::from_fn(|i| s[i] * z[i] / d))
}

/// Lower-triangular Cholesky factor of a symmetric matrix. `None` unless the
/// matrix is positive definite with pivots above `1e-14` of the largest
/// diagonal entry.
pub fn cholesky(m: &Mat3) -> Option<Mat3> {
    let max_diag = m[0][0].max(m[1][1]).max(m[2][2]);
    if !(max_diag > 0.0 && max_diag.is_finite()) {
        return None;
    }
    let floor = 1e-14 * max_diag;
    let mut l = ZERO3;
    for i in 0..3 {
        for j in 0..=i {
            let partial: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let pivot = m[i][i] - partial;
                if pivot <= floor {
                    return None;
                }
                l[i][i] = pivot.sqrt();
            } else {
                l[i][j] = (m[i][j] - partial) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix with a non-zero diagonal.
pub fn lower_inverse(l: &Mat3) -> Mat3 {
    let mut inv = ZERO3;
    for i in 0..3 {
        inv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let s: f64 = (j..i).map(|k| l[i][k] * inv[k][j]).sum();
            inv[i][j] = -s / l[i][i];
        }
    }
    inv
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Returns the eigenvalues and a matrix whose columns are the matching unit
/// eigenvectors.
pub fn symmetric_eigen(m: &Mat3) -> (Vec3, Mat3) {
    let mut a = *m;
    let mut v: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        let diag = a[0][0].abs() + a[1][1].abs() + a[2][2].abs();
        if off <= f64::EPSILON * 1e-3 * diag || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Eigenvalues of a symmetric 3x3 matrix in descending order, by the
/// trigonometric solution of the characteristic cubic.
pub fn symmetric_eigenvalues(m: &Mat3) -> Vec3 {
    let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    if off == 0.0 {
        let mut ev = [m[0][0], m[1][1], m[2][2]];
        ev.sort_by(|a, b| b.total_cmp(a));
        return ev;
    }
    let mean = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let spread = (m[0][0] - mean).powi(2) + (m[1][1] - mean).powi(2) + (m[2][2] - mean).powi(2)
        + 2.0 * off;
    let p = (spread / 6.0).sqrt();
    let mut b = *m;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= mean;
        for v in row.iter_mut() {
            *v /= p;
        }
    }
    let r = (det(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let largest = mean + 2.0 * p * phi.cos();
    let smallest = mean + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let middle = 3.0 * mean - largest - smallest;
    [largest, middle, smallest]
}
