use crate::error::{FemError, Result};
use crate::linalg::{dot, norm, Cholesky, SparseOperator};

#[derive(Clone, Debug)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for `A x = b` with `A` given as an
/// operator. Fails with a configuration error if a non-positive curvature
/// direction shows up (singular or indefinite operator).
pub fn pcg<A, P>(
    mut apply: A,
    b: &[f64],
    mut precond: P,
    tol: f64,
    max_iters: usize,
) -> Result<CgSolution>
where
    A: FnMut(&[f64]) -> Vec<f64>,
    P: FnMut(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    for it in 1..=max_iters {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FemError::Configuration(format!(
                "conjugate gradients hit a non-positive direction (pᵀAp = {pap:.3e}); the operator is singular"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            return Ok(CgSolution {
                x,
                iterations: it,
                relative_residual: res,
            });
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(FemError::Solver {
        iterations: max_iters,
        residual: res,
    })
}

/// Jacobi-preconditioned CG for a symmetric positive definite sparse matrix.
pub fn cg_solve(a: &SparseOperator, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let d = a.diagonal();
    if d.iter().any(|v| !(*v > 0.0)) {
        return Err(FemError::Configuration(
            "matrix has a non-positive diagonal entry".into(),
        ));
    }
    let max_iters = 10 * a.nrows().max(100);
    let sol = pcg(
        |x| a.matvec(x),
        b,
        |r| r.iter().zip(&d).map(|(r, d)| r / d).collect(),
        tol,
        max_iters,
    )?;
    Ok(sol.x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleOptions {
    /// Relative residual of the Schur complement iteration.
    pub tol: f64,
    pub max_iters: usize,
    /// Weights `W` of the augmentation `M + Bᵀ W B`; required when `M` is only
    /// positive semidefinite.
    pub augmentation: Option<Vec<f64>>,
    /// Accept linearly dependent constraint rows. The right-hand side must then
    /// be consistent; the multiplier is determined up to the kernel of `Bᵀ`.
    pub redundant_rows: bool,
}

impl Default for SaddleOptions {
    fn default() -> Self {
        SaddleOptions {
            tol: 1e-10,
            max_iters: 2000,
            augmentation: None,
            redundant_rows: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub primal: Vec<f64>,
    pub multiplier: Vec<f64>,
    pub iterations: usize,
}

/// Solves `[[M, Bᵀ], [B, 0]] (x, λ) = (f, g)`.
///
/// Outer PCG on the Schur complement `B A⁻¹ Bᵀ` with `A` the (optionally
/// augmented) top block factored by sparse Cholesky; preconditioned by
/// `(B diag(M)⁻¹ Bᵀ)⁻¹ + W`.
pub fn saddle_solve(
    m: &SparseOperator,
    b: &SparseOperator,
    top: &[f64],
    bottom: &[f64],
    opts: &SaddleOptions,
) -> Result<SaddleSolution> {
    if m.nrows() != b.ncols() || top.len() != m.nrows() || bottom.len() != b.nrows() {
        return Err(FemError::Configuration(
            "saddle point blocks have inconsistent sizes".into(),
        ));
    }
    let (a, f) = match &opts.augmentation {
        Some(w) => {
            let a = m.add_scaled(&b.weighted_gram(w), 1.0);
            let wg: Vec<f64> = bottom.iter().zip(w).map(|(g, w)| g * w).collect();
            let bt = b.transpose_matvec(&wg);
            let f: Vec<f64> = top.iter().zip(&bt).map(|(a, b)| a + b).collect();
            (a, f)
        }
        None => (m.clone(), top.to_vec()),
    };
    let chol = Cholesky::factor(&a).map_err(|_| {
        FemError::Configuration("top-left block is singular; an augmentation is required".into())
    })?;
    if b.nrows() == 0 {
        return Ok(SaddleSolution {
            primal: chol.solve(&f),
            multiplier: Vec::new(),
            iterations: 0,
        });
    }

    // (B (M + BᵀWB)⁻¹ Bᵀ)⁻¹ = (B M⁻¹ Bᵀ)⁻¹ + W, with M replaced by its diagonal
    let inv_diag: Vec<f64> = m.diagonal().iter().map(|d| 1.0 / d).collect();
    if inv_diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(FemError::Configuration(
            "top-left block has a non-positive diagonal entry".into(),
        ));
    }
    let bt = b.transpose();
    let mut gram = bt.weighted_gram(&inv_diag);
    if opts.redundant_rows {
        let shift = 1e-10 * gram.diagonal().iter().cloned().fold(0.0, f64::max);
        gram = gram.add_scaled(&SparseOperator::identity(b.nrows()), shift);
    }
    let pre = Cholesky::factor(&gram).map_err(|_| {
        FemError::Configuration(
            "singular Schur complement: the constraint operator is rank deficient (unpinned constant mode?)".into(),
        )
    })?;

    let a_inv_f = chol.solve(&f);
    let rhs: Vec<f64> = b
        .matvec(&a_inv_f)
        .iter()
        .zip(bottom)
        .map(|(x, g)| x - g)
        .collect();
    let schur = |lam: &[f64]| b.matvec(&chol.solve(&b.transpose_matvec(lam)));
    let precond = |r: &[f64]| {
        let mut z = pre.solve(r);
        if let Some(w) = &opts.augmentation {
            z.iter_mut()
                .zip(r.iter().zip(w))
                .for_each(|(z, (r, w))| *z += w * r);
        }
        z
    };
    let sol = pcg(schur, &rhs, precond, opts.tol, opts.max_iters)?;
    let lam = sol.x;
    let bl = b.transpose_matvec(&lam);
    let rhs2: Vec<f64> = f.iter().zip(&bl).map(|(f, b)| f - b).collect();
    Ok(SaddleSolution {
        primal: chol.solve(&rhs2),
        multiplier: lam,
        iterations: sol.iterations,
    })
}
