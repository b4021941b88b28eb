//! Damped Gauss–Newton minimizer for zero-residual least-squares stages.
//!
//! Both solver costs are sums of squared residuals with analytic Jacobians
//! and (for feasible targets) an exactly attainable zero. Gauss–Newton with
//! Levenberg damping and minimum-norm steps converges quadratically to the
//! residual manifold, which the alternating outer loop depends on: each stage
//! must land on its manifold to near machine precision, close to its starting
//! point.

/// Dense row-major `rows × cols` matrix scratch.
pub(crate) struct Jacobian {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Jacobian {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

pub(crate) struct GnOpts {
    /// Stop when the cost (Σ r²) falls below this.
    pub cost_tol: f64,
    /// Stop when the gradient ‖2 Jᵀr‖∞ falls below this.
    pub grad_tol: f64,
    pub max_iters: usize,
}

/// Cholesky solve of the SPD system `A x = b`, in place on a copy of `A`.
/// Returns `None` if a pivot collapses.
fn cholesky_solve(a: &mut [f64], n: usize, b: &mut [f64]) -> Option<()> {
    for k in 0..n {
        let mut d = a[k * n + k];
        for m in 0..k {
            d -= a[k * n + m] * a[k * n + m];
        }
        if d <= 0.0 {
            return None;
        }
        let d = d.sqrt();
        a[k * n + k] = d;
        for i in (k + 1)..n {
            let mut v = a[i * n + k];
            for m in 0..k {
                v -= a[i * n + m] * a[k * n + m];
            }
            a[i * n + k] = v / d;
        }
    }
    // Forward then backward substitution with the factor L (row-major lower).
    for i in 0..n {
        let mut v = b[i];
        for m in 0..i {
            v -= a[i * n + m] * b[m];
        }
        b[i] = v / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for m in (i + 1)..n {
            v -= a[m * n + i] * b[m];
        }
        b[i] = v / a[i * n + i];
    }
    Some(())
}

/// Minimize `Σ_k r_k(x)²` from `x0`. `eval` fills the residual vector and the
/// Jacobian `J_kx = ∂r_k/∂x` for the current point. Returns the final point
/// and cost.
pub(crate) fn minimize<F>(
    n_residuals: usize,
    mut eval: F,
    x0: Vec<f64>,
    opts: &GnOpts,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64], &mut [f64], &mut Jacobian),
{
    let n = x0.len();
    let m = n_residuals;
    let mut x = x0;
    let mut r = vec![0.0; m];
    let mut jac = Jacobian::new(m, n);
    let mut r_new = vec![0.0; m];
    let mut jac_new = Jacobian::new(m, n);

    let trace = std::env::var_os("NOISEPLATE_TRACE_GN").is_some();
    eval(&x, &mut r, &mut jac);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut mu: f64 = 1e-12;
    let mut iters_used = opts.max_iters;

    for it in 0..opts.max_iters {
        if cost <= opts.cost_tol {
            if trace {
                eprintln!("gn: cost_tol at iter {it}, cost {cost:.3e}");
            }
            iters_used = it;
            break;
        }
        // Gradient of the cost: 2 Jᵀ r.
        let mut grad_inf: f64 = 0.0;
        for col in 0..n {
            let mut g = 0.0;
            for k in 0..m {
                g += jac.data[k * n + col] * r[k];
            }
            grad_inf = grad_inf.max((2.0 * g).abs());
        }
        if grad_inf <= opts.grad_tol {
            if trace {
                eprintln!("gn: grad_tol at iter {it}, cost {cost:.3e}, grad {grad_inf:.3e}");
            }
            iters_used = it;
            break;
        }

        // Normal matrix J Jᵀ (m × m) for the minimum-norm step
        // s = −Jᵀ (J Jᵀ + μ I)⁻¹ r.
        let mut normal = vec![0.0; m * m];
        for k in 0..m {
            for l in k..m {
                let dot: f64 = jac
                    .row(k)
                    .iter()
                    .zip(jac.row(l))
                    .map(|(a, b)| a * b)
                    .sum();
                normal[k * m + l] = dot;
                normal[l * m + k] = dot;
            }
        }
        let scale = (0..m).map(|k| normal[k * m + k]).fold(0.0, f64::max).max(1e-300);

        let mut accepted = false;
        for _damping in 0..25 {
            let mut a = normal.clone();
            let floor = mu.max(1e-15) * scale;
            for k in 0..m {
                a[k * m + k] += floor;
            }
            let mut lambda = r.clone();
            if cholesky_solve(&mut a, m, &mut lambda).is_none() {
                mu = (mu * 10.0).max(1e-12);
                continue;
            }
            let mut x_new = x.clone();
            for col in 0..n {
                let mut s = 0.0;
                for k in 0..m {
                    s += jac.data[k * n + col] * lambda[k];
                }
                x_new[col] -= s;
            }
            eval(&x_new, &mut r_new, &mut jac_new);
            let cost_new: f64 = r_new.iter().map(|v| v * v).sum();
            if cost_new < cost {
                x = x_new;
                std::mem::swap(&mut r, &mut r_new);
                std::mem::swap(&mut jac.data, &mut jac_new.data);
                let improved = cost - cost_new;
                cost = cost_new;
                mu = (mu * 0.25).max(1e-14);
                accepted = true;
                if improved <= 1e-30 {
                    // Numerical floor reached.
                    if trace {
                        eprintln!("gn: improvement floor at iter {it}, cost {cost:.3e}");
                    }
                    return (x, cost);
                }
                break;
            }
            mu = (mu * 10.0).max(1e-12);
        }
        if !accepted {
            if trace {
                eprintln!("gn: no acceptable step at iter {it}, cost {cost:.3e}, mu {mu:.3e}");
            }
            iters_used = it;
            break;
        }
    }
    if trace && iters_used == opts.max_iters {
        eprintln!("gn: max_iters ({}) exhausted, cost {cost:.3e}", opts.max_iters);
    }
    (x, cost)
}
