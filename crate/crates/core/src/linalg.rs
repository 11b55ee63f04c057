//! Small dense helpers. Eigen problems go through nalgebra in `f64`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::scalar::Scalar;

/// Solves the `p × p` row-major system `a·x = b` by Gaussian elimination
/// with partial pivoting. `None` when the matrix is numerically singular.
pub(crate) fn solve_dense<T: Scalar>(a: &[T], b: &[T], p: usize) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::lit(64.0);
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| {
            m[i * p + col]
                .abs()
                .partial_cmp(&m[j * p + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv * p + col].abs() <= tiny {
            return None;
        }
        if piv != col {
            for k in 0..p {
                m.swap(piv * p + k, col * p + k);
            }
            x.swap(piv, col);
        }
        for row in col + 1..p {
            let f = m[row * p + col] / m[col * p + col];
            if f == T::zero() {
                continue;
            }
            for k in col..p {
                m[row * p + k] = m[row * p + k] - f * m[col * p + k];
            }
            x[row] = x[row] - f * x[col];
        }
    }
    for col in (0..p).rev() {
        let mut s = x[col];
        for k in col + 1..p {
            s = s - m[col * p + k] * x[k];
        }
        x[col] = s / m[col * p + col];
    }
    Some(x)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted in
/// decreasing order. Columns of the returned matrix are the eigenvectors.
pub(crate) fn symmetric_eigen_desc(mat: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = mat.nrows();
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Largest eigenvalue of a symmetric matrix.
pub(crate) fn symmetric_max_eigenvalue(mat: DMatrix<f64>) -> f64 {
    if mat.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(mat)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

// 10-point Gauss–Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Composite 10-point Gauss–Legendre quadrature of `f` over `[a, b]`.
/// Never evaluates the end points, so integrands with removable
/// singularities at `a` are fine.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let step = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + step * (p as f64 + 0.5);
        let half = 0.5 * step;
        let mut s = 0.0;
        for (&x, &w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
            s += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += s * half;
    }
    total
}
