//! Small dense linear-algebra helpers: symmetric pseudo-inverse and a
//! Lanczos eigensolver for the leading eigenpairs of large symmetric matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Moore–Penrose pseudo-inverse of a symmetric matrix via its eigendecomposition.
///
/// Eigenvalues with magnitude at most `rel_cutoff · max|λ|` are treated as zero.
pub fn symmetric_pinv(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.amax();
    let cutoff = rel_cutoff * max;
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= cutoff || lambda == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out += (v * v.transpose()) / lambda;
    }
    out
}

/// Leading `k` eigenpairs (largest eigenvalue first) of a symmetric matrix.
///
/// Small matrices are decomposed densely. Larger ones go through Lanczos with
/// full reorthogonalization, which only needs matrix–vector products and is
/// accurate for the well-separated top of the spectrum.
pub fn top_eigenpairs(m: &DMatrix<f64>, k: usize) -> Vec<(f64, DVector<f64>)> {
    let n = m.nrows();
    let k = k.min(n);
    if k == 0 {
        return Vec::new();
    }
    if n <= 400 {
        return dense_top(m, k);
    }
    lanczos_top(m, k, (3 * k + 40).min(n))
}

fn dense_top(m: &DMatrix<f64>, k: usize) -> Vec<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order
        .into_iter()
        .take(k)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect()
}

fn lanczos_top(m: &DMatrix<f64>, k: usize, steps: usize) -> Vec<(f64, DVector<f64>)> {
    let n = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
    q /= q.norm();

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);

    for j in 0..steps {
        basis.push(q.clone());
        let mut w = m * &q;
        let a = q.dot(&w);
        alpha.push(a);
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let nb = w.norm();
        if j + 1 == steps || nb <= 1e-14 * a.abs().max(1e-300) {
            break;
        }
        beta.push(nb);
        q = w / nb;
    }

    let s = alpha.len();
    let t = DMatrix::from_fn(s, s, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let ritz = dense_top(&t, k.min(s));
    ritz.into_iter()
        .map(|(lambda, y)| {
            let mut v = DVector::zeros(n);
            for (i, b) in basis.iter().take(s).enumerate() {
                v.axpy(y[i], b, 1.0);
            }
            let norm = v.norm();
            (lambda, v / norm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_full_rank_is_inverse() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let p = symmetric_pinv(&m, 1e-12);
        assert!((&p * &m - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn pinv_of_rank_one() {
        let v = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let m = &v * v.transpose();
        let p = symmetric_pinv(&m, 1e-12);
        // M M⁺ M = M
        assert!((&m * &p * &m - &m).amax() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense() {
        let n = 500;
        let m = DMatrix::from_fn(n, n, |i, j| {
            let (u, v) = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
            u.min(v) * (1.0 - u.max(v)) / n as f64
        });
        let dense = dense_top(&m, 8);
        let lz = top_eigenpairs(&m, 8);
        for ((a, va), (b, vb)) in dense.iter().zip(&lz) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{a} vs {b}");
            assert!((va.dot(vb).abs() - 1.0).abs() < 1e-8);
        }
    }
}
