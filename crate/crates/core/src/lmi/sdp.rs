//! Embedded small-scale semidefinite programming solver.
//!
//! Problems are stated in the linear-matrix-inequality form
//! `min c'x  subject to  F_0 + sum_i x_i F_i  positive semidefinite`
//! over one or more symmetric blocks, plus linear scalar inequalities
//! (one-by-one blocks). The solver is a primal-dual interior-point method
//! with Nesterov-Todd scaling, sized for the small dense blocks produced by
//! the estimator synthesis in this crate rather than for general use.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Cap on the total number of scalar decision variables accepted by the
/// solver; the synthesis problems in this crate stay far below it.
pub const MAX_SCALAR_VARS: usize = 500;

const MAX_ITER: usize = 500;
const STEP_FRACTION: f64 = 0.98;
const FEAS_TOL: f64 = 1e-8;

/// Handle to a symmetric matrix variable; only the upper triangle is stored
/// as scalar unknowns.
#[derive(Debug, Clone, Copy)]
pub struct SymVar {
    offset: usize,
    n: usize,
}

impl SymVar {
    /// Side length of the matrix.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Reads the matrix out of a solution vector.
    pub fn value(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for i in 0..=j {
                let v = x[self.offset + j * (j + 1) / 2 + i];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

/// Handle to a rectangular matrix variable.
#[derive(Debug, Clone, Copy)]
pub struct RectVar {
    offset: usize,
    rows: usize,
    cols: usize,
}

impl RectVar {
    /// Reads the matrix out of a solution vector.
    pub fn value(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                m[(i, j)] = x[self.offset + j * self.rows + i];
            }
        }
        m
    }
}

/// Handle to a scalar variable.
#[derive(Debug, Clone, Copy)]
pub struct ScalarVar {
    offset: usize,
}

impl ScalarVar {
    /// Reads the scalar out of a solution vector.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        x[self.offset]
    }
}

/// One affine constraint block `F_0 + sum_i x_i F_i >= 0`.
///
/// `f0` already carries any strictness margin subtracted from the raw
/// constant term, so feasibility of the stored block implies the raw block
/// exceeds `margin * I`.
#[derive(Debug, Clone)]
pub struct AffineBlock {
    pub label: String,
    pub f0: DMatrix<f64>,
    /// Sparse list of `(variable index, coefficient matrix)` pairs.
    pub coeffs: Vec<(usize, DMatrix<f64>)>,
    pub margin: f64,
}

impl AffineBlock {
    /// Evaluates the stored (margin-shifted) block at `x`.
    pub fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.f0.clone();
        for (i, f) in &self.coeffs {
            m += f * x[*i];
        }
        m
    }

    /// Evaluates the raw block, without the strictness margin.
    pub fn eval_raw(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.f0.nrows();
        self.eval(x) + DMatrix::identity(n, n) * self.margin
    }
}

/// An assembled semidefinite program in linear-matrix-inequality form.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub num_vars: usize,
    /// Objective coefficients; the solver minimizes `objective . x`.
    pub objective: DVector<f64>,
    pub blocks: Vec<AffineBlock>,
}

type Assemble = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64>>;

struct PendingBlock {
    label: String,
    size: usize,
    assemble: Assemble,
}

/// Incremental builder for [`SdpProblem`]: declare variables, add affine
/// positive-definiteness blocks and scalar inequalities, then `finish`.
///
/// Constraint matrices are supplied as closures of the packed variable
/// vector; the builder extracts the constant and per-variable coefficient
/// matrices by evaluation, which is exact because every constraint is
/// required to be affine (this is checked by finite differences in tests).
pub struct SdpBuilder {
    total: usize,
    objective: Vec<(usize, f64)>,
    blocks: Vec<PendingBlock>,
    margin_rel: f64,
}

impl SdpBuilder {
    pub fn new() -> Self {
        Self {
            total: 0,
            objective: Vec::new(),
            blocks: Vec::new(),
            margin_rel: 0.0,
        }
    }

    /// Requests that every block be shifted by `rel` times its coefficient
    /// scale, so the solved blocks are strictly positive definite.
    pub fn strictness_margin(mut self, rel: f64) -> Self {
        self.margin_rel = rel;
        self
    }

    /// Declares a symmetric `n` by `n` matrix variable.
    pub fn sym(&mut self, n: usize) -> SymVar {
        let v = SymVar {
            offset: self.total,
            n,
        };
        self.total += n * (n + 1) / 2;
        v
    }

    /// Declares a rectangular matrix variable.
    pub fn rect(&mut self, rows: usize, cols: usize) -> RectVar {
        let v = RectVar {
            offset: self.total,
            rows,
            cols,
        };
        self.total += rows * cols;
        v
    }

    /// Declares a scalar variable.
    pub fn scalar(&mut self) -> ScalarVar {
        let v = ScalarVar { offset: self.total };
        self.total += 1;
        v
    }

    /// Adds `weight * value(var)` to the minimized objective.
    pub fn objective_term(&mut self, var: ScalarVar, weight: f64) {
        self.objective.push((var.offset, weight));
    }

    /// Adds a symmetric affine block required positive definite.
    pub fn psd_block<F>(&mut self, label: &str, size: usize, assemble: F)
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64> + 'static,
    {
        self.blocks.push(PendingBlock {
            label: label.into(),
            size,
            assemble: Box::new(assemble),
        });
    }

    /// Adds a linear scalar inequality `expr(x) > 0` as a one-by-one block.
    pub fn scalar_ineq<F>(&mut self, label: &str, expr: F)
    where
        F: Fn(&DVector<f64>) -> f64 + 'static,
    {
        self.blocks.push(PendingBlock {
            label: label.into(),
            size: 1,
            assemble: Box::new(move |x| DMatrix::from_element(1, 1, expr(x))),
        });
    }

    /// Extracts the affine representation of every block and assembles the
    /// problem.
    pub fn finish(self) -> Result<SdpProblem> {
        if self.total > MAX_SCALAR_VARS {
            return Err(Error::Unsupported(format!(
                "sdp: {} scalar variables exceeds the cap of {MAX_SCALAR_VARS}",
                self.total
            )));
        }
        if self.total == 0 {
            return Err(Error::Domain("sdp: no decision variables".into()));
        }
        let mut objective = DVector::zeros(self.total);
        for (i, w) in &self.objective {
            objective[*i] += *w;
        }
        let zero = DVector::zeros(self.total);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for pending in &self.blocks {
            let f0 = (pending.assemble)(&zero);
            if f0.nrows() != pending.size || f0.ncols() != pending.size {
                return Err(Error::Dimension(format!(
                    "sdp block '{}': expected size {}, got {}x{}",
                    pending.label,
                    pending.size,
                    f0.nrows(),
                    f0.ncols()
                )));
            }
            let mut coeffs = Vec::new();
            let mut scale: f64 = matrix_scale(&f0);
            for i in 0..self.total {
                let mut e = zero.clone();
                e[i] = 1.0;
                let fi = (pending.assemble)(&e) - &f0;
                if fi.amax() > 0.0 {
                    scale = scale.max(matrix_scale(&fi));
                    coeffs.push((i, fi));
                }
            }
            let sym_tol = 1e-9 * scale.max(1.0);
            for m in std::iter::once(&f0).chain(coeffs.iter().map(|(_, f)| f)) {
                if (m - m.transpose()).amax() > sym_tol {
                    return Err(Error::Dimension(format!(
                        "sdp block '{}': assembled matrix is not symmetric",
                        pending.label
                    )));
                }
            }
            // Extraction by unit-vector evaluation is only valid for affine
            // maps; verify at a pseudo-random point.
            let xr = DVector::from_fn(self.total, |i, _| ((i as f64) * 1.3 + 0.7).sin());
            let direct = (pending.assemble)(&xr);
            let mut affine = f0.clone();
            for (i, f) in &coeffs {
                affine += f * xr[*i];
            }
            if (direct - affine).amax() > 1e-6 * scale.max(1.0) * (1.0 + xr.amax()) {
                return Err(Error::Domain(format!(
                    "sdp block '{}' is not affine in the variables",
                    pending.label
                )));
            }
            let margin = self.margin_rel * scale.max(1.0);
            let n = f0.nrows();
            let f0 = symmetrize(&f0) - DMatrix::identity(n, n) * margin;
            let coeffs = coeffs
                .into_iter()
                .map(|(i, f)| (i, symmetrize(&f)))
                .collect();
            blocks.push(AffineBlock {
                label: pending.label.clone(),
                f0,
                coeffs,
                margin,
            });
        }
        if blocks.is_empty() {
            return Err(Error::Domain("sdp: no constraints".into()));
        }
        Ok(SdpProblem {
            num_vars: self.total,
            objective,
            blocks,
        })
    }
}

impl Default for SdpBuilder {
    fn default() -> Self {
        Self::new()
    }
}

fn matrix_scale(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// A converged interior point of the program.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Approximate dual ray certifying that no feasible point exists: a positive
/// semidefinite `Z` with `tr(F_i Z) ~ 0` for all `i` and `tr(F_0 Z) < 0`.
#[derive(Debug, Clone)]
pub struct InfeasibilityCertificate {
    /// Value of `tr(F_0 Z)` for the normalized ray; negative.
    pub constant_pairing: f64,
    /// Largest `|tr(F_i Z)|` over the variables; near zero.
    pub residual: f64,
}

/// Outcome of a solve: an optimal point or an infeasibility certificate.
#[derive(Debug, Clone)]
pub enum SdpOutcome {
    Optimal(SdpSolution),
    Infeasible(InfeasibilityCertificate),
}

struct Eigen {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

fn sym_eigen(m: &DMatrix<f64>) -> Eigen {
    let e = symmetrize(m).symmetric_eigen();
    Eigen {
        vectors: e.eigenvectors,
        values: e.eigenvalues,
    }
}

/// `U diag(values^p) U'` for a symmetric positive definite matrix.
fn sym_power(e: &Eigen, p: f64) -> Result<DMatrix<f64>> {
    let n = e.values.len();
    let top = e.values.amax().max(f64::MIN_POSITIVE);
    let floor = 1e-14 * top;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        if e.values[i] < -1e-10 * top {
            return Err(Error::Conditioning(
                "sdp: interior iterate lost positive definiteness".into(),
            ));
        }
        // clamp eigenvalues that rounding pushed to the cone boundary
        d[(i, i)] = e.values[i].max(floor).powf(p);
    }
    Ok(&e.vectors * d * e.vectors.transpose())
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).values.min()
}

/// Largest step `alpha <= 1` keeping `s + alpha * ds` positive definite,
/// backed off by the usual fraction-to-boundary factor.
fn max_step(s: &DMatrix<f64>, ds: &DMatrix<f64>) -> Result<f64> {
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Conditioning("sdp: iterate not positive definite".into()))?;
    let l = chol.l();
    // L^{-1} ds L^{-T}
    let a = l.solve_lower_triangular(ds).ok_or_else(|| {
        Error::Conditioning("sdp: singular Cholesky factor in step computation".into())
    })?;
    let b = l
        .solve_lower_triangular(&a.transpose())
        .ok_or_else(|| {
            Error::Conditioning("sdp: singular Cholesky factor in step computation".into())
        })?;
    let lam = min_eig(&b);
    if lam >= 0.0 {
        Ok(1.0)
    } else {
        Ok((STEP_FRACTION / (-lam)).min(1.0))
    }
}

/// Solves the program to the requested relative duality gap.
///
/// Returns the optimal point, an infeasibility certificate, or a convergence
/// error if the iteration cap is hit without either.
pub fn solve_sdp(problem: &SdpProblem, tolerance: f64) -> Result<SdpOutcome> {
    if problem.num_vars > MAX_SCALAR_VARS {
        return Err(Error::Unsupported(format!(
            "sdp: {} scalar variables exceeds the cap of {MAX_SCALAR_VARS}",
            problem.num_vars
        )));
    }
    // Equilibrate before iterating: the synthesis programs mix magnitudes
    // across many orders (strictness margins against trace caps), which a
    // raw interior-point iteration does not tolerate.
    let (scaled, var_scale) = scale_problem(problem);
    match solve_scaled(&scaled, tolerance)? {
        SdpOutcome::Infeasible(c) => Ok(SdpOutcome::Infeasible(c)),
        SdpOutcome::Optimal(mut sol) => {
            sol.x.component_mul_assign(&var_scale);
            sol.objective = problem.objective.dot(&sol.x);
            Ok(SdpOutcome::Optimal(sol))
        }
    }
}

/// Normalizes every block to unit coefficient scale and rescales each
/// variable so its largest coefficient entry is one.
fn scale_problem(problem: &SdpProblem) -> (SdpProblem, DVector<f64>) {
    let m = problem.num_vars;
    let mut scaled = problem.clone();
    for b in &mut scaled.blocks {
        let mut sc = matrix_scale(&b.f0);
        for (_, f) in &b.coeffs {
            sc = sc.max(matrix_scale(f));
        }
        let sc = sc.max(1e-300);
        b.f0 /= sc;
        b.margin /= sc;
        for (_, f) in &mut b.coeffs {
            *f /= sc;
        }
    }
    let mut var_scale = DVector::from_element(m, 1.0);
    for i in 0..m {
        let mut biggest = 0.0f64;
        for b in &scaled.blocks {
            for (j, f) in &b.coeffs {
                if *j == i {
                    biggest = biggest.max(matrix_scale(f));
                }
            }
        }
        if biggest > 0.0 {
            var_scale[i] = (1.0 / biggest).clamp(1e-8, 1e8);
        }
    }
    for b in &mut scaled.blocks {
        for (i, f) in &mut b.coeffs {
            *f *= var_scale[*i];
        }
    }
    for i in 0..m {
        scaled.objective[i] *= var_scale[i];
    }
    let c_norm = scaled.objective.amax();
    if c_norm > 0.0 {
        scaled.objective /= c_norm;
    }
    (scaled, var_scale)
}

fn solve_scaled(problem: &SdpProblem, tolerance: f64) -> Result<SdpOutcome> {
    let m = problem.num_vars;
    let nb = problem.blocks.len();
    let total_dim: usize = problem.blocks.iter().map(|b| b.f0.nrows()).sum();
    let c = &problem.objective;
    let c_scale = c.amax().max(1.0);

    let mut x = DVector::<f64>::zeros(m);
    let mut s: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
    let mut z: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
    let mut f_scale: f64 = 1.0;
    for b in &problem.blocks {
        let n = b.f0.nrows();
        let mut sc = matrix_scale(&b.f0);
        for (_, f) in &b.coeffs {
            sc = sc.max(matrix_scale(f));
        }
        f_scale = f_scale.max(sc);
        s.push(DMatrix::identity(n, n) * sc.max(1.0));
        z.push(DMatrix::identity(n, n) * c_scale);
    }
    let z_init_norm: f64 = z.iter().map(|m| m.norm()).sum();

    let mut best_merit = f64::INFINITY;
    let mut stall = 0usize;

    for iter in 0..MAX_ITER {
        // Residuals: rp wants S = F(x); rd wants tr(F_i Z) = c_i.
        let fx: Vec<DMatrix<f64>> = problem.blocks.iter().map(|b| b.eval(&x)).collect();
        let rp: Vec<DMatrix<f64>> = fx.iter().zip(&s).map(|(f, s)| f - s).collect();
        let mut rd = DVector::<f64>::zeros(m);
        for i in 0..m {
            rd[i] = c[i];
        }
        for (b, zk) in problem.blocks.iter().zip(&z) {
            for (i, f) in &b.coeffs {
                rd[*i] -= f.dot(zk);
            }
        }
        let gap: f64 = s.iter().zip(&z).map(|(sk, zk)| sk.dot(zk)).sum();
        let mu = gap / total_dim as f64;
        let obj = c.dot(&x);
        let rp_norm: f64 = rp.iter().map(|r| r.amax()).fold(0.0, f64::max);
        // Two gap measures: the complementarity gap <S, Z> and the distance
        // between the primal and dual objective values. Near a degenerate
        // optimum the complementarity gap hits a floor set by the Schur
        // conditioning while the objective sandwich keeps tightening, so
        // either one below tolerance certifies optimality once the
        // feasibility residuals are negligible.
        let dobj: f64 = -problem
            .blocks
            .iter()
            .zip(&z)
            .map(|(b, zk)| b.f0.dot(zk))
            .sum::<f64>();
        let rel_gap = gap.abs() / (1.0 + obj.abs());
        let rel_obj_gap = (obj - dobj).abs() / (1.0 + obj.abs() + dobj.abs());
        let rel_p = rp_norm / (1.0 + f_scale);
        let rel_d = rd.amax() / (1.0 + c_scale);

        if rel_gap.min(rel_obj_gap) <= tolerance
            && rel_p <= FEAS_TOL
            && rel_d <= FEAS_TOL.max(tolerance)
        {
            for (b, f) in problem.blocks.iter().zip(&fx) {
                if min_eig(f) < -1e-7 * f_scale {
                    return Err(Error::Conditioning(format!(
                        "sdp: converged point violates block '{}'",
                        b.label
                    )));
                }
            }
            return Ok(SdpOutcome::Optimal(SdpSolution {
                x,
                objective: obj,
                duality_gap: gap,
                iterations: iter,
            }));
        }

        // A diverging dual iterate that annihilates every coefficient matrix
        // while pairing negatively with the constant terms is a certificate
        // that no feasible point exists.
        let z_norm: f64 = z.iter().map(|m| m.norm()).sum();
        if z_norm > 1e8 * z_init_norm.max(1.0) {
            let mut pair = 0.0;
            let mut resid: f64 = 0.0;
            for (b, zk) in problem.blocks.iter().zip(&z) {
                pair += b.f0.dot(zk) / z_norm;
            }
            for i in 0..m {
                let mut ai = 0.0;
                for (b, zk) in problem.blocks.iter().zip(&z) {
                    for (j, f) in &b.coeffs {
                        if *j == i {
                            ai += f.dot(zk) / z_norm;
                        }
                    }
                }
                resid = resid.max(ai.abs());
            }
            if resid < 1e-6 * f_scale.max(1.0) && pair < -1e-8 * f_scale.max(1.0) {
                return Ok(SdpOutcome::Infeasible(InfeasibilityCertificate {
                    constant_pairing: pair,
                    residual: resid,
                }));
            }
        }

        let merit = rel_gap.min(rel_obj_gap) + rel_p + rel_d;
        if merit < 0.9 * best_merit {
            best_merit = merit;
            stall = 0;
        } else {
            stall += 1;
            if stall > 100 {
                return Err(Error::Convergence(format!(
                    "sdp: stalled after {iter} iterations (gap {rel_gap:.3e}, \
                     primal {rel_p:.3e}, dual {rel_d:.3e})"
                )));
            }
        }

        // Nesterov-Todd scaling per block: W Z W = S; only W^{-1} is needed.
        let mut winv: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
        let mut zinv: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
        for (sk, zk) in s.iter().zip(&z) {
            let es = sym_eigen(sk);
            let s_half = sym_power(&es, 0.5)?;
            let s_inv_half = sym_power(&es, -0.5)?;
            let t = symmetrize(&(&s_half * zk * &s_half));
            let et = sym_eigen(&t);
            let t_half = sym_power(&et, 0.5)?;
            winv.push(symmetrize(&(&s_inv_half * t_half * &s_inv_half)));
            let ez = sym_eigen(zk);
            zinv.push(sym_power(&ez, -1.0)?);
        }

        // Schur complement M_ij = sum_k tr(F_i W^{-1} F_j W^{-1}).
        let mut mmat = DMatrix::<f64>::zeros(m, m);
        let mut scaled: Vec<Vec<(usize, DMatrix<f64>)>> = Vec::with_capacity(nb);
        for (b, wk) in problem.blocks.iter().zip(&winv) {
            let g: Vec<(usize, DMatrix<f64>)> = b
                .coeffs
                .iter()
                .map(|(j, f)| (*j, wk * f * wk))
                .collect();
            for (i, fi) in &b.coeffs {
                for (j, gj) in &g {
                    mmat[(*i, *j)] += fi.dot(gj);
                }
            }
            scaled.push(g);
        }
        let mmat = symmetrize(&mmat);
        let factor = factor_schur(&mmat)?;

        // Newton right-hand side for a given complementarity target Rc:
        //   M dx = q,  q_i = tr(F_i W^{-1} (Rc - Rp) W^{-1}) - rd_i,
        // then dS = Rp + sum dx_j F_j, dZ = W^{-1} (Rc - dS) W^{-1}.
        let solve_direction = |rc: &[DMatrix<f64>]| -> Result<Direction> {
            let mut q = DVector::<f64>::zeros(m);
            for i in 0..m {
                q[i] = -rd[i];
            }
            for (k, b) in problem.blocks.iter().enumerate() {
                let t = &winv[k] * (&rc[k] - &rp[k]) * &winv[k];
                for (i, f) in &b.coeffs {
                    q[*i] += f.dot(&t);
                }
            }
            let dx = factor(&q)?;
            let mut ds = Vec::with_capacity(nb);
            let mut dz = Vec::with_capacity(nb);
            for (k, b) in problem.blocks.iter().enumerate() {
                let mut d = rp[k].clone();
                for (i, f) in &b.coeffs {
                    d += f * dx[*i];
                }
                let dzk = symmetrize(&(&winv[k] * (&rc[k] - &d) * &winv[k]));
                ds.push(symmetrize(&d));
                dz.push(dzk);
            }
            Ok(Direction { dx, ds, dz })
        };

        // Predictor (affine scaling) step.
        let rc_aff: Vec<DMatrix<f64>> = s.iter().map(|sk| -sk).collect();
        let aff = solve_direction(&rc_aff)?;
        let (ap, ad) = step_lengths(&s, &z, &aff)?;
        let mut gap_aff = 0.0;
        for k in 0..nb {
            gap_aff += (&s[k] + &aff.ds[k] * ap).dot(&(&z[k] + &aff.dz[k] * ad));
        }
        let mu_aff = (gap_aff / total_dim as f64).max(0.0);
        let sigma = ((mu_aff / mu).clamp(0.0, 1.0)).powi(3).max(1e-8);

        // Corrector step toward sigma * mu on the central path.
        let rc: Vec<DMatrix<f64>> = s
            .iter()
            .zip(&zinv)
            .map(|(sk, zik)| zik * (sigma * mu) - sk)
            .collect();
        let dir = solve_direction(&rc)?;
        let (mut ap, mut ad) = step_lengths(&s, &z, &dir)?;

        // The eigenvalue-based step bound can overshoot by rounding; back
        // off until both cones verify by Cholesky so iterates stay strictly
        // positive definite.
        let mut verified = false;
        for _ in 0..60 {
            let ok = (0..nb).all(|k| {
                symmetrize(&(&s[k] + &dir.ds[k] * ap)).cholesky().is_some()
                    && symmetrize(&(&z[k] + &dir.dz[k] * ad)).cholesky().is_some()
            });
            if ok {
                verified = true;
                break;
            }
            ap *= 0.8;
            ad *= 0.8;
        }
        if !verified {
            return Err(Error::Convergence(
                "sdp: no positive definite step found; iterate at the cone boundary"
                    .into(),
            ));
        }

        if std::env::var("SDP_DEBUG").is_ok() {
            eprintln!(
                "it {iter}: gap {rel_gap:.3e} rp {rel_p:.3e} rd {rel_d:.3e} obj {obj:.3e} \
                 dobj {dobj:.3e} sigma {sigma:.3e} ap {ap:.3e} ad {ad:.3e} mu {mu:.3e}"
            );
        }
        x += &dir.dx * ap;
        for k in 0..nb {
            s[k] = symmetrize(&(&s[k] + &dir.ds[k] * ap));
            z[k] = symmetrize(&(&z[k] + &dir.dz[k] * ad));
        }
    }
    Err(Error::Convergence(format!(
        "sdp: no convergence within {MAX_ITER} iterations"
    )))
}

struct Direction {
    dx: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
}

fn step_lengths(
    s: &[DMatrix<f64>],
    z: &[DMatrix<f64>],
    dir: &Direction,
) -> Result<(f64, f64)> {
    let mut ap: f64 = 1.0;
    let mut ad: f64 = 1.0;
    for k in 0..s.len() {
        ap = ap.min(max_step(&s[k], &dir.ds[k])?);
        ad = ad.min(max_step(&z[k], &dir.dz[k])?);
    }
    Ok((ap, ad))
}

/// Cholesky factorization of the Schur complement, with escalating diagonal
/// regularization as a fallback for nearly singular systems.
fn factor_schur(
    mmat: &DMatrix<f64>,
) -> Result<impl Fn(&DVector<f64>) -> Result<DVector<f64>> + '_> {
    let m = mmat.nrows();
    let scale = (mmat.trace() / m as f64).abs().max(1e-300);
    let mut reg = 0.0;
    let mut chol = mmat.clone().cholesky();
    while chol.is_none() && reg < 1e-5 * scale {
        reg = if reg == 0.0 { 1e-12 * scale } else { reg * 100.0 };
        chol = (mmat + DMatrix::identity(m, m) * reg).cholesky();
    }
    let chol = chol.ok_or_else(|| {
        Error::Conditioning("sdp: Schur complement is numerically singular".into())
    })?;
    // Iterative refinement against the unregularized matrix keeps the Newton
    // direction accurate even when the factorization needed a diagonal shift.
    Ok(move |q: &DVector<f64>| {
        let mut dx = chol.solve(q);
        for _ in 0..3 {
            let r = q - mmat * &dx;
            if r.amax() <= 1e-14 * q.amax().max(1e-300) {
                break;
            }
            dx += chol.solve(&r);
        }
        Ok(dx)
    })
}
