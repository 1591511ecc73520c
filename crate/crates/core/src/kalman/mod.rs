//! Steady-state Kalman filtering per participant with privacy noise injected
//! on the measurements (optionally compensated in the filter design) or on
//! the released aggregate estimate.

use nalgebra::{DMatrix, DVector};

use crate::lmi::FilterRealization;
use crate::lti::StateSpace;
use crate::numerics::{
    derive_seed, solve_dare, solve_discrete_lyapunov, DareOptions, NoiseDistribution,
    NoiseStream,
};
use crate::privacy::{kappa, PrivacyBudget};
use crate::{Error, Result, Scalar};

/// One participant's linear model
/// `x' = A x + B w, y = C x + D w` with released quantity contribution
/// `L x`, privacy selection `S` and trajectory bound `rho`.
#[derive(Debug, Clone)]
pub struct ParticipantModel<T: Scalar> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
    pub l: DMatrix<T>,
    pub s: DMatrix<T>,
    pub rho: T,
    pub x0_mean: DVector<T>,
}

impl<T: Scalar> ParticipantModel<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if self.a.ncols() != n {
            return Err(Error::Dimension("participant: A must be square".into()));
        }
        if self.b.nrows() != n || self.c.ncols() != n || self.l.ncols() != n {
            return Err(Error::Dimension(
                "participant: B, C, L must match the state dimension".into(),
            ));
        }
        if self.d.nrows() != self.c.nrows() || self.d.ncols() != self.b.ncols() {
            return Err(Error::Dimension(
                "participant: D must map the noise w to the measurement".into(),
            ));
        }
        if self.s.nrows() != n || self.s.ncols() != n {
            return Err(Error::Dimension(
                "participant: S must match the state dimension".into(),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                let v = self.s[(i, j)];
                let ok = if i == j {
                    v == T::zero() || v == T::one()
                } else {
                    v == T::zero()
                };
                if !ok {
                    return Err(Error::Domain(
                        "participant: S must be diagonal with 0/1 entries".into(),
                    ));
                }
            }
        }
        if !(self.rho >= T::zero()) {
            return Err(Error::Domain("participant: rho must be nonnegative".into()));
        }
        if self.x0_mean.len() != n {
            return Err(Error::Dimension(
                "participant: initial mean must match the state dimension".into(),
            ));
        }
        // D D^T nonsingular (measurement noise covariance)
        let v = &self.d * self.d.transpose();
        if v.clone().cholesky().is_none() {
            return Err(Error::Conditioning(
                "participant: D D^T must be positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Largest singular value of `C S`, the gain from a protected state
    /// deviation to the measurement.
    pub fn measurement_exposure(&self) -> T {
        let cs = &self.c * &self.s;
        cs.singular_values()
            .iter()
            .fold(T::zero(), |m, &v| m.max(v))
    }
}

/// Which estimate the filter realization outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterForm {
    /// Current-measurement form producing `xhat_{t|t}`.
    Filtering,
    /// One-step delayed form producing `xhat_{t|t-1}`.
    Predictor,
}

/// A steady-state Kalman filter for one participant.
#[derive(Debug, Clone)]
pub struct KalmanFilter<T: Scalar> {
    /// Predictor gain `Kp = (A P C^T + B D^T) (C P C^T + V)^{-1}`.
    pub predictor_gain: DMatrix<T>,
    /// Measurement-update gain `M = P C^T (C P C^T + V)^{-1}`.
    pub update_gain: DMatrix<T>,
    /// Stationary one-step prediction error covariance (DARE solution).
    pub p_pred: DMatrix<T>,
    /// Stationary filtering error covariance `(I - M C) P`.
    pub p_filt: DMatrix<T>,
    /// Filtering-form realization (measurement in, `xhat_{t|t}` out).
    pub filtering: FilterRealization<T>,
    /// Predictor-form realization (measurement in, `xhat_{t|t-1}` out).
    pub predictor: FilterRealization<T>,
}

impl<T: Scalar> KalmanFilter<T> {
    pub fn realization(&self, form: FilterForm) -> &FilterRealization<T> {
        match form {
            FilterForm::Filtering => &self.filtering,
            FilterForm::Predictor => &self.predictor,
        }
    }
}

/// Designs the stationary Kalman filter for the model, with the measurement
/// noise covariance optionally augmented by `extra_meas_var * I` (used to
/// compensate for privacy noise added to the measurements).
pub fn steady_state_kf<T: Scalar>(
    model: &ParticipantModel<T>,
    extra_meas_var: T,
) -> Result<KalmanFilter<T>> {
    model.validate()?;
    if !(extra_meas_var >= T::zero()) {
        return Err(Error::Domain(
            "steady_state_kf: extra measurement variance must be nonnegative".into(),
        ));
    }
    let n = model.a.nrows();
    let p_dim = model.c.nrows();
    let w = &model.b * model.b.transpose();
    let mut v = &model.d * model.d.transpose();
    for i in 0..p_dim {
        v[(i, i)] += extra_meas_var;
    }
    let cross = &model.b * model.d.transpose();
    let p = solve_dare(
        &model.a,
        &model.c,
        &w,
        &v,
        Some(&cross),
        &DareOptions::default(),
    )?;
    let innovation = &model.c * &p * model.c.transpose() + &v;
    let inn_chol = innovation.clone().cholesky().ok_or_else(|| {
        Error::Conditioning("steady_state_kf: singular innovation covariance".into())
    })?;
    // Kp^T = innovation^{-1} (A P C^T + B D^T)^T
    let apc = &model.a * &p * model.c.transpose() + &cross;
    let predictor_gain = inn_chol.solve(&apc.transpose()).transpose();
    let update_gain = inn_chol.solve(&(&model.c * &p)).transpose();
    let p_filt = {
        let pf = &p - &update_gain * &model.c * &p;
        (&pf + pf.transpose()) * T::cst(0.5)
    };
    let f = &model.a - &predictor_gain * &model.c;
    let identity = DMatrix::identity(n, n);
    let filtering = FilterRealization::new(
        f.clone(),
        predictor_gain.clone(),
        &identity - &update_gain * &model.c,
        update_gain.clone(),
    )?;
    let predictor = FilterRealization::new(
        f,
        predictor_gain.clone(),
        identity,
        DMatrix::zeros(n, p_dim),
    )?;
    let kf = KalmanFilter {
        predictor_gain,
        update_gain,
        p_pred: p,
        p_filt,
        filtering,
        predictor,
    };
    if !kf.filtering.is_stable() {
        return Err(Error::Unstable(
            "steady_state_kf: closed loop is not stable".into(),
        ));
    }
    Ok(kf)
}

/// The system `L K C S`: a protected state deviation enters the measurement
/// through `C S`, passes through the filter `K` and reaches the released
/// quantity through `L`. Its H-infinity norm is the `gamma_i` of the output
/// perturbation design.
pub fn privacy_gain_system<T: Scalar>(
    model: &ParticipantModel<T>,
    filter: &FilterRealization<T>,
) -> Result<StateSpace<T>> {
    let cs = &model.c * &model.s;
    StateSpace::new(
        filter.f.clone(),
        &filter.g * &cs,
        &model.l * &filter.h,
        &model.l * &filter.k * &cs,
    )
}

/// Where privacy noise enters the release.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KalmanPlacement {
    /// Per-participant measurement noise; `compensated` selects whether the
    /// filters were redesigned for the inflated measurement covariance.
    Input { compensated: bool },
    /// Single Gaussian noise on the aggregate release.
    Output,
}

/// A complete privacy-preserving aggregate estimation design.
#[derive(Debug, Clone)]
pub struct DpKalmanDesign<T: Scalar> {
    pub models: Vec<ParticipantModel<T>>,
    pub filters: Vec<KalmanFilter<T>>,
    pub placement: KalmanPlacement,
    pub form: FilterForm,
    /// Per-participant measurement noise standard deviations (input
    /// placement) or empty (output placement).
    pub input_sigmas: Vec<T>,
    /// Standard deviation of the release noise (output placement only).
    pub output_sigma: T,
    /// `gamma_i = ||L_i K_i C_i S_i||_inf` (output placement only).
    pub gammas: Vec<T>,
    /// Predicted steady-state mean squared error of the released aggregate.
    pub predicted_mse: T,
}

fn released_error_variance<T: Scalar>(
    model: &ParticipantModel<T>,
    kf: &KalmanFilter<T>,
    actual_extra_var: T,
    designed_for_actual: bool,
    form: FilterForm,
) -> Result<T> {
    // stationary filtering-error covariance under the actual noise
    let p_filt = if designed_for_actual {
        kf.p_filt.clone()
    } else {
        // the filter gains were designed for the nominal covariances; the
        // actual measurement carries additional white noise
        let f = &model.a - &kf.predictor_gain * &model.c;
        let bd = &model.b - &kf.predictor_gain * &model.d;
        let mut q = &bd * bd.transpose();
        let kkt = &kf.predictor_gain * kf.predictor_gain.transpose();
        q += kkt * actual_extra_var;
        let p_e = solve_discrete_lyapunov(&f, &q)?;
        let imc = DMatrix::identity(model.a.nrows(), model.a.nrows())
            - &kf.update_gain * &model.c;
        let mdv = {
            let dv = &model.d * model.d.transpose();
            let mut v = dv;
            for i in 0..v.nrows() {
                v[(i, i)] += actual_extra_var;
            }
            &kf.update_gain * v * kf.update_gain.transpose()
        };
        &imc * p_e * imc.transpose() + mdv
    };
    let p_err = match form {
        FilterForm::Filtering => p_filt,
        FilterForm::Predictor => {
            if designed_for_actual {
                kf.p_pred.clone()
            } else {
                // predictor covariance under actual noise
                let f = &model.a - &kf.predictor_gain * &model.c;
                let bd = &model.b - &kf.predictor_gain * &model.d;
                let mut q = &bd * bd.transpose();
                q += &kf.predictor_gain * kf.predictor_gain.transpose() * actual_extra_var;
                solve_discrete_lyapunov(&f, &q)?
            }
        }
    };
    Ok((&model.l * p_err * model.l.transpose())[(0, 0)])
}

/// Designs per-participant measurement perturbation with
/// `sigma_i = kappa * rho_i * sigma_max(C_i S_i)`. With `compensated` the
/// filters are redesigned for the inflated measurement covariance, otherwise
/// the nominal filters run against the noisier measurements.
pub fn design_input_noise_dp<T: Scalar>(
    models: Vec<ParticipantModel<T>>,
    budget: &PrivacyBudget<T>,
    compensated: bool,
    form: FilterForm,
) -> Result<DpKalmanDesign<T>> {
    let kap = kappa(budget)?;
    let mut filters = Vec::with_capacity(models.len());
    let mut sigmas = Vec::with_capacity(models.len());
    let mut mse = T::zero();
    for m in &models {
        let sigma = kap * m.rho * m.measurement_exposure();
        let extra = sigma * sigma;
        let kf = if compensated {
            steady_state_kf(m, extra)?
        } else {
            steady_state_kf(m, T::zero())?
        };
        mse += released_error_variance(m, &kf, extra, compensated, form)?;
        filters.push(kf);
        sigmas.push(sigma);
    }
    Ok(DpKalmanDesign {
        models,
        filters,
        placement: KalmanPlacement::Input { compensated },
        form,
        input_sigmas: sigmas,
        output_sigma: T::zero(),
        gammas: Vec::new(),
        predicted_mse: mse,
    })
}

/// Designs output perturbation: the aggregate estimate is released with a
/// single Gaussian noise of standard deviation
/// `sigma = kappa * max_i gamma_i rho_i`, `gamma_i = ||L_i K_i C_i S_i||_inf`.
pub fn design_output_noise_dp<T: Scalar>(
    models: Vec<ParticipantModel<T>>,
    budget: &PrivacyBudget<T>,
    form: FilterForm,
) -> Result<DpKalmanDesign<T>> {
    let kap = kappa(budget)?;
    let mut filters = Vec::with_capacity(models.len());
    let mut gammas = Vec::with_capacity(models.len());
    let mut gamma = T::zero();
    let mut mse = T::zero();
    for m in &models {
        let kf = steady_state_kf(m, T::zero())?;
        let sys = privacy_gain_system(m, kf.realization(form))?;
        let gi = sys.hinf_norm()?;
        gamma = gamma.max(gi * m.rho);
        mse += released_error_variance(m, &kf, T::zero(), true, form)?;
        gammas.push(gi);
        filters.push(kf);
    }
    let sigma = kap * gamma;
    mse += sigma * sigma;
    Ok(DpKalmanDesign {
        models,
        filters,
        placement: KalmanPlacement::Output,
        form,
        input_sigmas: Vec::new(),
        output_sigma: sigma,
        gammas,
        predicted_mse: mse,
    })
}

/// Monte Carlo evaluation result.
#[derive(Debug, Clone)]
pub struct MonteCarloRmse<T: Scalar> {
    /// RMSE of the released aggregate versus the true aggregate over the
    /// steady-state window.
    pub rmse: T,
    /// Per-step root mean squared error across trials, for convergence-time
    /// inspection.
    pub error_trace: Vec<T>,
    /// Steps discarded before the steady-state window.
    pub discarded: usize,
    /// First step after which the per-step error stays within twice the
    /// steady-state RMSE, if any.
    pub convergence_step: Option<usize>,
}

/// Simulates the participants' dynamics with privacy noise and the designed
/// filters, reporting the steady-state RMSE of the released aggregate.
///
/// `kf_init` optionally fixes every filter's initial state estimate (the
/// participants start from their model means).
pub fn monte_carlo_rmse<T: Scalar>(
    design: &DpKalmanDesign<T>,
    horizon: usize,
    trials: usize,
    seed: u64,
    kf_init: Option<&DVector<T>>,
    discard: usize,
) -> Result<MonteCarloRmse<T>> {
    if horizon == 0 || trials == 0 {
        return Err(Error::Domain(
            "monte_carlo_rmse: horizon and trials must be positive".into(),
        ));
    }
    if discard >= horizon {
        return Err(Error::Domain(
            "monte_carlo_rmse: discard must be below the horizon".into(),
        ));
    }
    let n_participants = design.models.len();
    let mut sq_trace = vec![T::zero(); horizon];
    for trial in 0..trials {
        let trial_seed = derive_seed(seed, trial as u64);
        let mut release = vec![T::zero(); horizon];
        let mut truth = vec![T::zero(); horizon];
        for (i, (m, kf)) in design.models.iter().zip(&design.filters).enumerate() {
            let w_dim = m.b.ncols();
            let mut w_stream = NoiseStream::new(
                NoiseDistribution::Gaussian { std: T::one() },
                w_dim,
                derive_seed(trial_seed, (2 * i) as u64),
            )?;
            let p_dim = m.c.nrows();
            let input_sigma = match design.placement {
                KalmanPlacement::Input { .. } => design.input_sigmas[i],
                KalmanPlacement::Output => T::zero(),
            };
            let mut privacy_stream = if input_sigma > T::zero() {
                Some(NoiseStream::new(
                    NoiseDistribution::Gaussian { std: input_sigma },
                    p_dim,
                    derive_seed(trial_seed, (2 * i + 1) as u64),
                )?)
            } else {
                None
            };
            let real = kf.realization(design.form);
            let mut x = m.x0_mean.clone();
            let mut xe = match kf_init {
                Some(v) => {
                    if v.len() != real.order() {
                        return Err(Error::Dimension(
                            "monte_carlo_rmse: filter init dimension mismatch".into(),
                        ));
                    }
                    v.clone()
                }
                None => m.x0_mean.clone(),
            };
            for t in 0..horizon {
                let w = w_stream.next_vector();
                let mut y = &m.c * &x + &m.d * &w;
                if let Some(s) = privacy_stream.as_mut() {
                    y += s.next_vector();
                }
                let est = &real.h * &xe + &real.k * &y;
                release[t] += (&m.l * &est)[0];
                truth[t] += (&m.l * &x)[0];
                xe = &real.f * xe + &real.g * &y;
                x = &m.a * x + &m.b * w;
            }
        }
        if design.placement == KalmanPlacement::Output && design.output_sigma > T::zero() {
            let mut out_stream = NoiseStream::new(
                NoiseDistribution::Gaussian {
                    std: design.output_sigma,
                },
                1,
                derive_seed(trial_seed, (2 * n_participants) as u64),
            )?;
            for r in release.iter_mut() {
                *r += out_stream.next_vector()[0];
            }
        }
        for t in 0..horizon {
            let e = release[t] - truth[t];
            sq_trace[t] += e * e;
        }
    }
    let error_trace: Vec<T> = sq_trace
        .iter()
        .map(|&s| (s / T::from_count(trials)).sqrt())
        .collect();
    let window = &error_trace[discard..];
    let rmse = (window
        .iter()
        .fold(T::zero(), |s, &v| s + v * v)
        / T::from_count(window.len()))
    .sqrt();
    let threshold = rmse * T::cst(2.0);
    let mut convergence_step = None;
    for t in (0..horizon).rev() {
        if error_trace[t] > threshold {
            convergence_step = if t + 1 < horizon { Some(t + 1) } else { None };
            break;
        }
        if t == 0 {
            convergence_step = Some(0);
        }
    }
    Ok(MonteCarloRmse {
        rmse,
        error_trace,
        discarded: discard,
        convergence_step,
    })
}

/// Builds the vehicle-speed aggregation scenario: double-integrator
/// participants measured in position, releasing the average velocity, with
/// position trajectories protected up to `rho` meters.
///
/// `v0_mean_kmh` is the mean initial velocity in km/h; the state is SI
/// (meters, meters per second).
pub fn build_traffic_scenario<T: Scalar>(
    n: usize,
    ts: T,
    sigma1: T,
    sigma2: T,
    rho: T,
    v0_mean_kmh: T,
) -> Result<Vec<ParticipantModel<T>>> {
    if n == 0 {
        return Err(Error::Domain("traffic scenario: need participants".into()));
    }
    let a = DMatrix::from_row_slice(2, 2, &[T::one(), ts, T::zero(), T::one()]);
    let b = DMatrix::from_row_slice(
        2,
        2,
        &[
            sigma1 * ts * ts * T::cst(0.5),
            T::zero(),
            sigma1 * ts,
            T::zero(),
        ],
    );
    let c = DMatrix::from_row_slice(1, 2, &[T::one(), T::zero()]);
    let d = DMatrix::from_row_slice(1, 2, &[T::zero(), sigma2]);
    let l = DMatrix::from_row_slice(1, 2, &[T::zero(), T::one() / T::from_count(n)]);
    let s = DMatrix::from_diagonal(&DVector::from_vec(vec![T::one(), T::zero()]));
    let v0 = v0_mean_kmh / T::cst(3.6);
    let model = ParticipantModel {
        a,
        b,
        c,
        d,
        l,
        s,
        rho,
        x0_mean: DVector::from_vec(vec![T::zero(), v0]),
    };
    model.validate()?;
    Ok(vec![model; n])
}

/// Meters-per-second to kilometers-per-hour conversion for reporting.
pub fn mps_to_kmh<T: Scalar>(v: T) -> T {
    v * T::cst(3.6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn traffic(n: usize) -> Vec<ParticipantModel<f64>> {
        build_traffic_scenario(n, 1.0, 1.0, 1.0, 100.0, 45.0).unwrap()
    }

    fn budget() -> PrivacyBudget<f64> {
        PrivacyBudget::new(3.0f64.ln(), 0.05).unwrap()
    }

    #[test]
    fn traffic_model_matrices() {
        let m = &traffic(200)[0];
        assert_eq!(m.a, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]));
        assert_relative_eq!(m.measurement_exposure(), 1.0);
        assert_relative_eq!(m.x0_mean[1], 12.5); // 45 km/h in m/s
        assert_relative_eq!(m.l[(0, 1)], 1.0 / 200.0);
    }

    #[test]
    fn static_model_gain_from_one_step_dare() {
        // A=0, B=0 (no dynamics, no process noise would make DARE singular;
        // use tiny process noise through B=I*eps is avoided by B=I, D=I)
        let model = ParticipantModel {
            a: DMatrix::zeros(1, 1),
            b: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            c: DMatrix::identity(1, 1),
            d: DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            l: DMatrix::identity(1, 1),
            s: DMatrix::identity(1, 1),
            rho: 0.0,
            x0_mean: DVector::zeros(1),
        };
        let kf = steady_state_kf(&model, 0.0).unwrap();
        // with A = 0 the one-step DARE gives P = W = 1 and M = P/(P+V) = 1/2
        assert_relative_eq!(kf.p_pred[(0, 0)], 1.0, max_relative = 1e-9);
        assert_relative_eq!(kf.update_gain[(0, 0)], 0.5, max_relative = 1e-9);
        assert_relative_eq!(kf.p_filt[(0, 0)], 0.5, max_relative = 1e-9);
    }

    #[test]
    fn traffic_dare_exact_solution() {
        let m = &traffic(200)[0];
        let kf = steady_state_kf(m, 0.0).unwrap();
        // known closed form for this double integrator
        let p_expect = DMatrix::from_row_slice(2, 2, &[3.0, 2.0, 2.0, 2.0]);
        assert!((&kf.p_pred - &p_expect).norm() < 1e-7, "P = {}", kf.p_pred);
        assert_relative_eq!(kf.predictor_gain[(0, 0)], 1.25, epsilon = 1e-7);
        assert_relative_eq!(kf.predictor_gain[(1, 0)], 0.5, epsilon = 1e-7);
        assert_relative_eq!(kf.update_gain[(0, 0)], 0.75, epsilon = 1e-7);
        assert_relative_eq!(kf.update_gain[(1, 0)], 0.5, epsilon = 1e-7);
        assert!(kf.filtering.is_stable());
    }

    #[test]
    fn random_detectable_models_closed_loop_stable() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = rng.random_range(1..=4);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.8..0.8f64));
            let b = DMatrix::from_fn(n, n + 1, |i, j| {
                if j < n {
                    if i == j {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    0.0
                }
            });
            let mut d = DMatrix::zeros(1, n + 1);
            d[(0, n)] = 1.0;
            let c = DMatrix::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0f64));
            let model = ParticipantModel {
                a,
                b,
                c,
                d,
                l: DMatrix::from_element(1, n, 1.0),
                s: DMatrix::identity(n, n),
                rho: 1.0,
                x0_mean: DVector::zeros(n),
            };
            let kf = steady_state_kf(&model, 0.0).unwrap();
            assert!(kf.filtering.is_stable());
        }
    }

    #[test]
    fn privacy_gain_norm_of_traffic_filter() {
        // The filtering-form gain from a protected position deviation to the
        // released average velocity, scaled to one participant (L = [0,1]):
        // closed form 2/sqrt(7).
        let mut m = traffic(1)[0].clone();
        m.l = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let kf = steady_state_kf(&m, 0.0).unwrap();
        let sys = privacy_gain_system(&m, &kf.filtering).unwrap();
        let gamma = sys.hinf_norm().unwrap();
        assert_relative_eq!(gamma, 2.0 / 7.0f64.sqrt(), max_relative = 1e-6);
        // dense-grid oracle
        let mut grid_max: f64 = 0.0;
        let steps = 1 << 16;
        for k in 0..=steps {
            let omega = std::f64::consts::PI * k as f64 / steps as f64;
            let g = sys.frequency_response(omega).unwrap();
            grid_max = grid_max.max(g[(0, 0)].norm());
        }
        assert!((gamma - grid_max).abs() <= 1e-5);
    }

    #[test]
    fn zero_rho_means_plain_kf() {
        let mut models = traffic(3);
        for m in &mut models {
            m.rho = 0.0;
        }
        let d = design_input_noise_dp(models, &budget(), true, FilterForm::Filtering).unwrap();
        assert!(d.input_sigmas.iter().all(|&s| s == 0.0));
        // plain filtering error: velocity variance 1.0 per participant,
        // aggregate variance 1.0/n
        assert_relative_eq!(d.predicted_mse, 1.0 / 3.0, max_relative = 1e-6);
    }

    #[test]
    fn zero_selection_means_noiseless_output_release() {
        let mut models = traffic(2);
        for m in &mut models {
            m.s = DMatrix::zeros(2, 2);
        }
        let d = design_output_noise_dp(models, &budget(), FilterForm::Filtering).unwrap();
        assert_eq!(d.output_sigma, 0.0);
        assert!(d.gammas.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn identical_participants_share_gamma() {
        let d2 = design_output_noise_dp(traffic(2), &budget(), FilterForm::Filtering).unwrap();
        let d5 = design_output_noise_dp(traffic(5), &budget(), FilterForm::Filtering).unwrap();
        // gamma_i carries the 1/n from L, so sigma scales as 1/n; rescale
        assert_relative_eq!(
            d2.output_sigma * 2.0,
            d5.output_sigma * 5.0,
            max_relative = 1e-6
        );
    }

    #[test]
    fn sigma_linear_in_rho() {
        let models1 = traffic(4);
        let mut models2 = traffic(4);
        for m in &mut models2 {
            m.rho = 200.0;
        }
        let b = budget();
        let i1 = design_input_noise_dp(models1.clone(), &b, true, FilterForm::Filtering).unwrap();
        let i2 = design_input_noise_dp(models2.clone(), &b, true, FilterForm::Filtering).unwrap();
        for (s1, s2) in i1.input_sigmas.iter().zip(&i2.input_sigmas) {
            assert_relative_eq!(2.0 * s1, *s2, max_relative = 1e-12);
        }
        let o1 = design_output_noise_dp(models1, &b, FilterForm::Filtering).unwrap();
        let o2 = design_output_noise_dp(models2, &b, FilterForm::Filtering).unwrap();
        assert_relative_eq!(2.0 * o1.output_sigma, o2.output_sigma, max_relative = 1e-9);
    }

    #[test]
    fn compensated_predicted_mse_matches_monte_carlo() {
        let n = 20;
        let design =
            design_input_noise_dp(traffic(n), &budget(), true, FilterForm::Filtering).unwrap();
        let mc = monte_carlo_rmse(&design, 800, 500, 42, None, 200).unwrap();
        let predicted_rmse = design.predicted_mse.sqrt();
        let rel = (mc.rmse - predicted_rmse).abs() / predicted_rmse;
        assert!(
            rel <= 0.05,
            "monte carlo {} vs predicted {predicted_rmse} (rel {rel})",
            mc.rmse
        );
    }

    #[test]
    fn noiseless_exact_init_gives_zero_rmse() {
        let mut models = traffic(2);
        for m in &mut models {
            m.b = DMatrix::zeros(2, 2);
            m.rho = 0.0;
            // keep D D^T nonsingular for validation but set the measurement
            // noise to zero through D = 0 is not allowed; instead check that
            // the error stems only from measurement noise by zeroing it via
            // a filter initialized at the true state and no process noise
        }
        // with B = 0 the DARE collapses; rebuild with tiny process noise to
        // keep the filter well posed, then verify the released error is the
        // filter's own estimation error, which vanishes as D -> 0
        for m in &mut models {
            m.b = DMatrix::from_row_slice(2, 2, &[1e-9, 0.0, 1e-9, 0.0]);
            m.d = DMatrix::from_row_slice(1, 2, &[0.0, 1e-9]);
        }
        let d = design_input_noise_dp(models, &budget(), true, FilterForm::Filtering).unwrap();
        let mc = monte_carlo_rmse(&d, 50, 5, 3, None, 10).unwrap();
        assert!(mc.rmse < 1e-7, "rmse {}", mc.rmse);
    }

    #[test]
    fn output_release_is_estimate_plus_noise() {
        // with the output noise sigma forced to zero the released signal
        // equals the noiseless aggregate estimate
        let mut d = design_output_noise_dp(traffic(2), &budget(), FilterForm::Filtering).unwrap();
        let with_noise = monte_carlo_rmse(&d, 100, 3, 9, None, 20).unwrap();
        d.output_sigma = 0.0;
        let without = monte_carlo_rmse(&d, 100, 3, 9, None, 20).unwrap();
        assert!(without.rmse < with_noise.rmse);
        // noiseless release error equals the plain estimation error
        let plain_rmse = {
            let mut acc = 0.0;
            for m in &d.models {
                let kf = steady_state_kf(m, 0.0).unwrap();
                acc += (&m.l * &kf.p_filt * m.l.transpose())[(0, 0)];
            }
            f64::sqrt(acc)
        };
        assert_relative_eq!(without.rmse, plain_rmse, max_relative = 0.2);
    }
}
