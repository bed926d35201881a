//! Damped least-squares fitting and small dense linear algebra.
//!
//! One Levenberg–Marquardt driver serves every curve fit in the crate
//! (peaks, autocorrelation, 2D Gaussians, vibronic envelopes). Problems are
//! expressed as a residual closure; the Jacobian is taken by central
//! differences. Parameter dimensions here are tiny (3–8), so the normal
//! equations are solved by Cholesky with Marquardt diagonal damping.

use crate::error::{Error, Result};

/// Convergence and damping controls.
#[derive(Debug, Clone)]
pub struct Options {
    /// Stop when every parameter step satisfies |δ| ≤ step_tol·(|p| + step_tol).
    pub step_tol: f64,
    pub max_iter: usize,
    pub lambda_init: f64,
    /// Per-parameter lower bounds; trial steps are clamped.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            step_tol: 1e-8,
            max_iter: 200,
            lambda_init: 1e-3,
            lower: None,
            upper: None,
        }
    }
}

/// Result of a damped least-squares run.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: Vec<f64>,
    /// (JᵀJ)⁻¹ at the solution, row-major n×n. For residuals already scaled
    /// by 1/σ this is the parameter covariance.
    pub covariance: Vec<f64>,
    pub chi2: f64,
    pub n_resid: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl FitOutcome {
    /// 1-σ parameter uncertainties. When `scale_by_reduced_chi2` is set the
    /// raw (JᵀJ)⁻¹ diagonal is multiplied by χ²/(m−n), the convention for
    /// unweighted residuals.
    pub fn param_errors(&self, scale_by_reduced_chi2: bool) -> Vec<f64> {
        let n = self.params.len();
        let dof = self.n_resid.saturating_sub(n).max(1) as f64;
        let scale = if scale_by_reduced_chi2 {
            self.chi2 / dof
        } else {
            1.0
        };
        (0..n)
            .map(|i| (self.covariance[i * n + i] * scale).max(0.0).sqrt())
            .collect()
    }

    pub fn covar(&self, i: usize, j: usize) -> f64 {
        self.covariance[i * self.params.len() + j]
    }
}

/// Minimize Σ rᵢ² over parameters starting from `p0`.
///
/// `residuals(p, out)` fills `out` (length `n_resid`) and returns `false`
/// if `p` is outside the model's domain, which rejects the trial step.
pub fn levmar<F>(mut residuals: F, n_resid: usize, p0: &[f64], opts: &Options) -> Result<FitOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> bool,
{
    let n = p0.len();
    if n_resid < n {
        return Err(Error::fit(
            format!("{n_resid} residuals cannot constrain {n} parameters"),
            p0,
        ));
    }
    let clamp = |p: &mut [f64]| {
        if let Some(lo) = &opts.lower {
            for (v, l) in p.iter_mut().zip(lo) {
                *v = v.max(*l);
            }
        }
        if let Some(hi) = &opts.upper {
            for (v, h) in p.iter_mut().zip(hi) {
                *v = v.min(*h);
            }
        }
    };

    let mut params = p0.to_vec();
    clamp(&mut params);
    let mut r = vec![0.0; n_resid];
    if !residuals(&params, &mut r) || r.iter().any(|v| !v.is_finite()) {
        return Err(Error::fit("initial parameters outside model domain", &params));
    }
    let mut chi2: f64 = r.iter().map(|v| v * v).sum();

    let mut jac = vec![0.0; n_resid * n];
    let mut lambda = opts.lambda_init;
    let mut iterations = 0;
    let mut converged = false;

    let mut r_plus = vec![0.0; n_resid];
    let mut r_minus = vec![0.0; n_resid];

    for iter in 0..opts.max_iter {
        iterations = iter + 1;

        // Central-difference Jacobian of the residual vector.
        for j in 0..n {
            let h = 1e-6 * params[j].abs().max(1e-6);
            let mut pp = params.clone();
            pp[j] += h;
            let ok_p = residuals(&pp, &mut r_plus);
            pp[j] = params[j] - h;
            let ok_m = residuals(&pp, &mut r_minus);
            match (ok_p, ok_m) {
                (true, true) => {
                    for i in 0..n_resid {
                        jac[i * n + j] = (r_plus[i] - r_minus[i]) / (2.0 * h);
                    }
                }
                // One-sided fallback at a domain edge.
                (true, false) => {
                    for i in 0..n_resid {
                        jac[i * n + j] = (r_plus[i] - r[i]) / h;
                    }
                }
                (false, true) => {
                    for i in 0..n_resid {
                        jac[i * n + j] = (r[i] - r_minus[i]) / h;
                    }
                }
                (false, false) => {
                    return Err(Error::fit("Jacobian evaluation left model domain", &params))
                }
            }
        }

        // Normal equations: jtj δ = -jᵀr.
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for i in 0..n_resid {
            for a in 0..n {
                let ja = jac[i * n + a];
                jtr[a] -= ja * r[i];
                for b in a..n {
                    jtj[a * n + b] += ja * jac[i * n + b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                jtj[a * n + b] = jtj[b * n + a];
            }
        }
        let max_diag = (0..n).map(|a| jtj[a * n + a]).fold(0.0_f64, f64::max);
        if max_diag <= 0.0 || !max_diag.is_finite() {
            return Err(Error::fit("degenerate fit: flat model response", &params));
        }

        // Gradient already zero: we are at a stationary point.
        if jtr.iter().all(|g| g.abs() <= 1e-300) {
            converged = true;
            break;
        }

        let mut stepped = false;
        while lambda < 1e14 {
            let mut damped = jtj.clone();
            for a in 0..n {
                // Marquardt scaling keeps damping meaningful for flat directions.
                damped[a * n + a] += lambda * jtj[a * n + a].max(1e-12 * max_diag);
            }
            let Some(delta) = cholesky_solve(&damped, n, &jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = params.clone();
            for j in 0..n {
                trial[j] += delta[j];
            }
            clamp(&mut trial);
            let ok = residuals(&trial, &mut r_plus) && r_plus.iter().all(|v| v.is_finite());
            if ok {
                let trial_chi2: f64 = r_plus.iter().map(|v| v * v).sum();
                if trial_chi2 <= chi2 {
                    let small_step = params
                        .iter()
                        .zip(&trial)
                        .all(|(p, t)| (t - p).abs() <= opts.step_tol * (p.abs() + opts.step_tol));
                    params = trial;
                    std::mem::swap(&mut r, &mut r_plus);
                    chi2 = trial_chi2;
                    lambda = (lambda / 3.0).max(1e-12);
                    stepped = true;
                    if small_step {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !stepped {
            // Cannot decrease χ² further; treat as converged at the iterate.
            converged = true;
            break;
        }
    }

    // Covariance from the undamped normal matrix at the solution.
    let mut jtj = vec![0.0; n * n];
    for i in 0..n_resid {
        for a in 0..n {
            for b in a..n {
                jtj[a * n + b] += jac[i * n + a] * jac[i * n + b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            jtj[a * n + b] = jtj[b * n + a];
        }
    }
    let covariance = invert(&jtj, n).unwrap_or_else(|| vec![f64::NAN; n * n]);

    Ok(FitOutcome {
        params,
        covariance,
        chi2,
        n_resid,
        iterations,
        converged,
    })
}

/// Solve A x = b for symmetric positive-definite A (row-major n×n).
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // Forward then back substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Invert a square matrix by Gauss-Jordan elimination with partial pivoting.
pub fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if m[row * n + col].abs() > m[pivot * n + col].abs() {
                pivot = row;
            }
        }
        let p = m[pivot * n + col];
        if p.abs() < 1e-300 || !p.is_finite() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
        }
        let inv_p = 1.0 / m[col * n + col];
        for k in 0..n {
            m[col * n + k] *= inv_p;
            inv[col * n + k] *= inv_p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row * n + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                m[row * n + k] -= f * m[col * n + k];
                inv[row * n + k] -= f * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

/// Ordinary least squares for y = a·x + b. Returns (a, b, r²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "linear fit needs at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
