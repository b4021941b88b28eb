//! Jacobi eigendecomposition for real symmetric 4×4 matrices.
//!
//! Only needed for the Gram-matrix feasibility check and the solver's
//! dominant-eigenvector initialization, so a dependency-free cyclic Jacobi
//! sweep is plenty.

/// Eigenvalues (descending) and matching orthonormal eigenvectors (columns)
/// of a real symmetric matrix. The input is symmetrized first.
pub(crate) fn eigen_sym4(m: &[[f64; 4]; 4]) -> ([f64; 4], [[f64; 4]; 4]) {
    let mut a = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = 0.5 * (m[i][j] + m[j][i]);
        }
    }
    let mut v = [[0.0; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _sweep in 0..60 {
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-28 {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                let app = a[p][p];
                let aqq = a[q][q];
                let apq = a[p][q];
                a[p][p] = cos * cos * app - 2.0 * sin * cos * apq + sin * sin * aqq;
                a[q][q] = sin * sin * app + 2.0 * sin * cos * apq + cos * cos * aqq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for k in 0..4 {
                    if k != p && k != q {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = cos * akp - sin * akq;
                        a[p][k] = a[k][p];
                        a[k][q] = sin * akp + cos * akq;
                        a[q][k] = a[k][q];
                    }
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = cos * vkp - sin * vkq;
                    v[k][q] = sin * vkp + cos * vkq;
                }
            }
        }
    }

    let mut order = [0, 1, 2, 3];
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let mut vals = [0.0; 4];
    let mut vecs = [[0.0; 4]; 4];
    for (slot, &idx) in order.iter().enumerate() {
        vals[slot] = a[idx][idx];
        for k in 0..4 {
            vecs[k][slot] = v[k][idx];
        }
    }
    (vals, vecs)
}
