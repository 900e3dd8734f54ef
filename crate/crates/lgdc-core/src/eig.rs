//! Symmetric eigensolver: cyclic Jacobi with accumulated rotations.
//!
//! Sized for the matrices this crate actually produces (n <= a few hundred).
//! Convergence is quadratic once off-diagonal mass is small; 100 sweeps is
//! far beyond what any such matrix needs, so hitting the cap is reported as
//! an error rather than silently returning garbage.

use ndarray::Array2;

use crate::{Error, Result};

const OFF_DIAG_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column k is the unit eigenvector for eigenvalues[k].
    pub eigenvectors: Array2<f64>,
}

pub fn eig_sym(matrix: &Array2<f64>) -> Result<SpectralDecomposition> {
    let (r, c) = matrix.dim();
    if r != c {
        return Err(Error::InvalidGraph(format!("eigensolve of {r}x{c} matrix")));
    }
    let n = r;
    for i in 0..n {
        for j in (i + 1)..n {
            if (matrix[[i, j]] - matrix[[j, i]]).abs() > 1e-12 {
                return Err(Error::InvalidGraph(format!("matrix not symmetric at ({i},{j})")));
            }
        }
    }
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: Array2::zeros((0, 0)),
        });
    }

    let mut a = matrix.clone();
    // Work on the symmetrized copy so the iteration sees an exactly
    // symmetric matrix even when the input passes the tolerance check.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = m;
            a[[j, i]] = m;
        }
    }
    let mut v = Array2::eye(n);
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() <= OFF_DIAG_TOL * scale {
                    continue;
                }
                rotated = true;
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = a[[p, p]];
                let aqq = a[[q, q]];
                a[[p, p]] = app - t * apq;
                a[[q, q]] = aqq + t * apq;
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[[k, p]];
                        let akq = a[[k, q]];
                        a[[k, p]] = akp - s * (akq + tau * akp);
                        a[[p, k]] = a[[k, p]];
                        a[[k, q]] = akq + s * (akp - tau * akq);
                        a[[q, k]] = a[[k, q]];
                    }
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp - s * (vkq + tau * vkp);
                    v[[k, q]] = vkq + s * (vkp - tau * vkq);
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }

    let residual = max_off_diag(&a);
    if !converged && residual > OFF_DIAG_TOL * scale {
        return Err(Error::EigNonConvergence { residual, sweeps });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].partial_cmp(&a[[j, j]]).expect("finite eigenvalues"));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[[i, i]]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[[k, dst]] = v[[k, src]];
        }
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

fn max_off_diag(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            m = m.max(a[[i, j]].abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use ndarray::arr2;
    use rand::Rng as _;

    #[test]
    fn identity_and_trivial_sizes() {
        let d = eig_sym(&Array2::eye(3)).unwrap();
        assert_eq!(d.eigenvalues, vec![1.0, 1.0, 1.0]);
        let d = eig_sym(&arr2(&[[4.0]])).unwrap();
        assert_eq!(d.eigenvalues, vec![4.0]);
        assert_eq!(d.eigenvectors[[0, 0]], 1.0);
        let d = eig_sym(&Array2::zeros((0, 0))).unwrap();
        assert!(d.eigenvalues.is_empty());
    }

    #[test]
    fn rejects_asymmetric_input() {
        assert!(eig_sym(&arr2(&[[0.0, 1.0], [0.5, 0.0]])).is_err());
        assert!(eig_sym(&Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn path3_laplacian_spectrum() {
        let l = Graph::simple_from_edges(3, &[(0, 1), (1, 2)]).unwrap().laplacian();
        let d = eig_sym(&l).unwrap();
        let expected = [0.0, 1.0, 3.0];
        for (got, want) in d.eigenvalues.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10, "{:?}", d.eigenvalues);
        }
    }

    // Independent route for the triangle: eigenvalues of the K3 Laplacian
    // are the roots of its characteristic polynomial -x^3 + 6x^2 - 9x,
    // i.e. x * (x^2 - 6x + 9) = x (x - 3)^2.
    #[test]
    fn triangle_spectrum_matches_characteristic_roots() {
        let l = Graph::simple_from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap().laplacian();
        let d = eig_sym(&l).unwrap();
        let disc: f64 = (6.0f64 * 6.0 - 4.0 * 9.0).sqrt();
        let roots = [0.0, (6.0 - disc) / 2.0, (6.0 + disc) / 2.0];
        for (got, want) in d.eigenvalues.iter().zip(roots) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    fn random_laplacian(n: usize, rng: &mut crate::rng::Rng) -> Array2<f64> {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < 0.3 {
                    edges.push((u, v, rng.random::<f64>() * 3.0 + 0.1));
                }
            }
        }
        Graph::from_edges(n, &edges).unwrap().laplacian()
    }

    /// Reconstruction V diag(lambda) V^T must match the input to relative
    /// 1e-7, eigenvalues must be sorted, V orthonormal.
    #[test]
    fn reconstructs_random_laplacians() {
        let mut rng = crate::rng::from_seed(42);
        for trial in 0..100 {
            let n = rng.random_range(2..=64);
            let l = random_laplacian(n, &mut rng);
            let d = eig_sym(&l).unwrap();
            let scale = l.iter().fold(1.0f64, |a, x| a.max(x.abs()));
            for w in d.eigenvalues.windows(2) {
                assert!(w[0] <= w[1] + 1e-12);
            }
            // Orthonormality.
            let vtv = d.eigenvectors.t().dot(&d.eigenvectors);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vtv[[i, j]] - want).abs() < 1e-9, "trial {trial}");
                }
            }
            // Reconstruction.
            let mut lam = Array2::zeros((n, n));
            for i in 0..n {
                lam[[i, i]] = d.eigenvalues[i];
            }
            let rec = d.eigenvectors.dot(&lam).dot(&d.eigenvectors.t());
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (rec[[i, j]] - l[[i, j]]).abs() <= 1e-7 * scale,
                        "trial {trial} at ({i},{j}): {} vs {}",
                        rec[[i, j]],
                        l[[i, j]]
                    );
                }
            }
        }
    }

    /// Laplacians are PSD and have one zero eigenvalue per component.
    #[test]
    fn laplacian_null_space_counts_components() {
        let mut rng = crate::rng::from_seed(7);
        for _ in 0..30 {
            let n = rng.random_range(2..=20);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random::<f64>() < 0.15 {
                        edges.push((u, v));
                    }
                }
            }
            let g = Graph::simple_from_edges(n, &edges).unwrap();
            let d = eig_sym(&g.laplacian()).unwrap();
            let zeros = d.eigenvalues.iter().filter(|&&x| x.abs() < 1e-8).count();
            assert_eq!(zeros, g.connected_components().len());
            assert!(d.eigenvalues[0] > -1e-9);
        }
    }
}
