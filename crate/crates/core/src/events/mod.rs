//! Event-level differentially private release of filtered integer event
//! streams: input-noise baselines, equalized release through a minimum-phase
//! pre-filter with either exact inversion or an FIR estimator as the
//! post-filter, and a threshold detector for binary streams.

use rustfft::FftNum;

use crate::lti::{mean_abs_frequency_response, spectral_factor, RationalTf, FREQ_GRID};
use crate::mechanisms::NoiseKind;
use crate::numerics::{derive_seed, solve_toeplitz, NoiseDistribution, NoiseStream};
use crate::privacy::{kappa, BudgetLedger, PrivacyBudget};
use crate::{Error, Result, Scalar};

/// Relative floor applied to the sampled magnitude before spectral
/// factorization, so spectral zeros do not force the log-magnitude to
/// negative infinity.
const MAG_FLOOR_REL: f64 = 1e-4;

/// Relative tail tolerance when truncating impulse responses for the
/// autocorrelation convolutions.
const IMPULSE_TAIL: f64 = 1e-10;

/// An integer-valued event stream; each entry counts the events at one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSignal {
    values: Vec<i64>,
    binary: bool,
}

impl EventSignal {
    /// Wraps an integer event stream.
    pub fn integers(values: Vec<i64>) -> Self {
        let binary = values.iter().all(|&v| v == 0 || v == 1);
        Self { values, binary }
    }

    /// Wraps a stream declared binary; every entry must be 0 or 1.
    pub fn binary(values: Vec<i64>) -> Result<Self> {
        if values.iter().any(|&v| v != 0 && v != 1) {
            return Err(Error::Domain(
                "event signal: binary stream entries must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            values,
            binary: true,
        })
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Whether every entry is 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The stream as scalars for simulation.
    pub fn to_scalars<T: Scalar>(&self) -> Vec<T> {
        self.values.iter().map(|&v| T::cst(v as f64)).collect()
    }
}

/// Second-order statistics of a wide-sense stationary input:
/// `mean = E[u_t]` and `autocorrelation[k] = E[u_t u_{t+k}]`.
#[derive(Debug, Clone)]
pub struct InputStatistics<T: Scalar> {
    mean: T,
    autocorrelation: Vec<T>,
}

impl<T: Scalar> InputStatistics<T> {
    /// Validates and wraps the statistics. Full positive semidefiniteness of
    /// the implied Toeplitz matrix is certified later by the Levinson solve;
    /// here only the cheap necessary conditions are checked.
    pub fn new(mean: T, autocorrelation: Vec<T>) -> Result<Self> {
        let r0 = *autocorrelation.first().ok_or_else(|| {
            Error::Dimension("input statistics: need at least lag 0".into())
        })?;
        if !(r0 > T::zero()) || !r0.is_finite_s() {
            return Err(Error::Domain(
                "input statistics: lag-0 autocorrelation must be positive".into(),
            ));
        }
        if autocorrelation.iter().any(|&r| !r.is_finite_s() || r.abs() > r0) {
            return Err(Error::Domain(
                "input statistics: |R[k]| <= R[0] must hold for every lag".into(),
            ));
        }
        Ok(Self {
            mean,
            autocorrelation,
        })
    }

    /// Empirical statistics of a sample path, with biased (divide by the
    /// sample length) lag estimates so the implied Toeplitz matrix stays
    /// positive semidefinite.
    pub fn from_signal(signal: &EventSignal, max_lag: usize) -> Result<Self> {
        let u: Vec<f64> = signal.values.iter().map(|&v| v as f64).collect();
        let n = u.len();
        if n <= max_lag {
            return Err(Error::Dimension(format!(
                "input statistics: {n} samples cannot support lag {max_lag}"
            )));
        }
        let mean = u.iter().sum::<f64>() / n as f64;
        let mut r = Vec::with_capacity(max_lag + 1);
        for k in 0..=max_lag {
            let acc: f64 = (0..n - k).map(|t| u[t] * u[t + k]).sum();
            r.push(T::cst(acc / n as f64));
        }
        Self::new(T::cst(mean), r)
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn autocorrelation(&self) -> &[T] {
        &self.autocorrelation
    }

    /// `R[k]` with the even extension in the lag and the final provided value
    /// held beyond the recorded horizon (mixing processes settle to the
    /// squared mean, which the last recorded lag approximates).
    fn at(&self, lag: i64) -> T {
        let k = lag.unsigned_abs() as usize;
        let r = &self.autocorrelation;
        r[k.min(r.len() - 1)]
    }
}

/// Stationary statistics of the two-state burst process produced by
/// [`generate_burst_input`]: `R[k] = pi (pi + (1 - pi) r^k)` with
/// `pi = p_on / (p_on + p_off)` and `r = 1 - p_on - p_off`.
pub fn burst_statistics<T: Scalar>(
    p_on: f64,
    p_off: f64,
    max_lag: usize,
) -> Result<InputStatistics<T>> {
    check_burst_probabilities(p_on, p_off)?;
    let pi = p_on / (p_on + p_off);
    let r = 1.0 - p_on - p_off;
    let auto = (0..=max_lag)
        .map(|k| T::cst(pi * (pi + (1.0 - pi) * r.powi(k as i32))))
        .collect();
    InputStatistics::new(T::cst(pi), auto)
}

fn check_burst_probabilities(p_on: f64, p_off: f64) -> Result<()> {
    if !(p_on > 0.0 && p_on < 1.0 && p_off > 0.0 && p_off < 1.0) {
        return Err(Error::Domain(
            "burst input: transition probabilities must lie strictly in (0, 1)"
                .into(),
        ));
    }
    Ok(())
}

/// Samples a binary burst process: a two-state Markov chain that switches
/// off -> on with probability `p_on` and on -> off with probability `p_off`
/// each step, started from its stationary distribution.
pub fn generate_burst_input(
    len: usize,
    p_on: f64,
    p_off: f64,
    seed: u64,
) -> Result<EventSignal> {
    check_burst_probabilities(p_on, p_off)?;
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pi = p_on / (p_on + p_off);
    let mut on = rng.random::<f64>() < pi;
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(if on { 1 } else { 0 });
        let u: f64 = rng.random();
        on = if on { u >= p_off } else { u < p_on };
    }
    EventSignal::binary(values)
}

/// The filter applied after the noisy node.
#[derive(Debug, Clone)]
pub enum PostFilter<T: Scalar> {
    /// An exact rational chain, e.g. `G G1^-1` for zero-forcing equalization
    /// or `G` itself for the input-noise baseline.
    Chain(RationalTf<T>),
    /// A finite impulse response estimator `h_0..h_N`.
    Fir(Vec<T>),
}

/// A designed release mechanism for the set-up
/// `u -> G1 -> (+ noise) [-> detector] -> G2 -> released`, approximating the
/// reference output `G u`.
#[derive(Debug, Clone)]
pub struct EqualizerDesign<T: Scalar> {
    target: RationalTf<T>,
    pre: RationalTf<T>,
    post: PostFilter<T>,
    noise: NoiseDistribution<T>,
    detector: bool,
    budget: PrivacyBudget<T>,
    predicted_mse: T,
    lower_bound: T,
}

impl<T: Scalar> EqualizerDesign<T> {
    /// The filter `G` being approximated.
    pub fn target(&self) -> &RationalTf<T> {
        &self.target
    }

    /// The pre-filter `G1` ahead of the noisy node.
    pub fn pre(&self) -> &RationalTf<T> {
        &self.pre
    }

    /// The post-filter `G2` behind the noisy node.
    pub fn post(&self) -> &PostFilter<T> {
        &self.post
    }

    /// The calibrated noise at the release node.
    pub fn noise(&self) -> NoiseDistribution<T> {
        self.noise
    }

    /// Whether the binary threshold detector runs between the noisy node and
    /// the post-filter.
    pub fn detector(&self) -> bool {
        self.detector
    }

    pub fn budget(&self) -> &PrivacyBudget<T> {
        &self.budget
    }

    /// Analytic steady-state mean squared error of the linear release (the
    /// detector variant has no closed form; its figure is empirical and the
    /// detector can only improve on this bound by post-processing).
    pub fn predicted_mse(&self) -> T {
        self.predicted_mse
    }

    /// The best mean squared error any equalized Gaussian release of this
    /// target can achieve, `kappa^2 ((1/2pi) Int |G| dw)^2`.
    pub fn lower_bound(&self) -> T {
        self.lower_bound
    }

    /// Diagnostic copy with the noise removed. The release of the copy is
    /// NOT differentially private; it only serves to validate the equalizer
    /// chain (`G2 G1 = G` up to numerical error for the exact-inverse chain).
    pub fn noiseless(&self) -> Self {
        let mut d = self.clone();
        d.noise = NoiseDistribution::Gaussian { std: T::zero() };
        d
    }
}

fn check_stable<T: Scalar>(g: &RationalTf<T>, what: &str) -> Result<()> {
    if !g.is_stable() {
        return Err(Error::Unstable(format!("{what}: the filter must be stable")));
    }
    Ok(())
}

/// The ZFE optimum `kappa^2 ((1/2pi) Int |G| dw)^2`, which lower-bounds the
/// MSE of every Gaussian equalized release of `g`.
fn zfe_lower_bound<T: Scalar>(g: &RationalTf<T>, budget: &PrivacyBudget<T>) -> Result<T> {
    let k = kappa(budget)?;
    let mean = mean_abs_frequency_response(g);
    Ok(k * k * mean * mean)
}

/// Designs the baseline that perturbs the event stream before filtering:
/// white noise `w` is added to `u` and the sum is filtered by `g`. For
/// Gaussian noise `sigma = kappa` and the predicted MSE is
/// `kappa^2 ||G||_2^2`; for Laplace noise the scale is `1/epsilon` and the
/// predicted MSE is `2 ||g||_2^2 / epsilon^2`.
///
/// With `detector` set, the noisy stream is thresholded back to a binary
/// signal before filtering, which is free post-processing and typically
/// shrinks the error on binary inputs.
pub fn design_input_noise<T: Scalar>(
    g: &RationalTf<T>,
    budget: &PrivacyBudget<T>,
    kind: NoiseKind,
    detector: bool,
) -> Result<EqualizerDesign<T>> {
    check_stable(g, "design_input_noise")?;
    let h2 = g.h2_norm()?;
    let (noise, predicted_mse) = match kind {
        NoiseKind::Gaussian => {
            let k = kappa(budget)?;
            (NoiseDistribution::Gaussian { std: k }, k * k * h2 * h2)
        }
        NoiseKind::Laplace => {
            let scale = T::one() / budget.epsilon();
            (
                NoiseDistribution::Laplace { scale },
                T::cst(2.0) * scale * scale * h2 * h2,
            )
        }
    };
    Ok(EqualizerDesign {
        target: g.clone(),
        pre: RationalTf::identity(),
        post: PostFilter::Chain(g.clone()),
        noise,
        detector,
        budget: *budget,
        predicted_mse,
        lower_bound: zfe_lower_bound(g, budget)?,
    })
}

/// Designs the zero-forcing equalized release: `G1` is a minimum-phase FIR
/// factor with `|G1|^2` proportional to `|G|` on the frequency grid, the
/// Gaussian noise is calibrated to `sigma = kappa ||G1||_2`, and the
/// post-filter is the exact chain `G G1^-1`. The predicted MSE is
/// `kappa^2 ||G1||_2^2 ||G G1^-1||_2^2`, which approaches the reported lower
/// bound as the factor order grows.
pub fn design_zfe<T>(
    g: &RationalTf<T>,
    budget: &PrivacyBudget<T>,
    factor_order: usize,
) -> Result<EqualizerDesign<T>>
where
    T: Scalar + FftNum,
{
    check_stable(g, "design_zfe")?;
    let n = FREQ_GRID;
    let raw: Vec<T> = (0..n)
        .map(|k| {
            let omega = T::two_pi() * T::from_count(k) / T::from_count(n);
            nalgebra::ComplexField::modulus(g.frequency_response(omega))
        })
        .collect();
    let peak = raw.iter().fold(T::zero(), |m, &v| m.max(v));
    if !(peak > T::zero()) {
        return Err(Error::Domain(
            "design_zfe: the target filter has an identically zero response".into(),
        ));
    }
    let floor = T::cst(MAG_FLOOR_REL) * peak;
    let mag: Vec<T> = raw.iter().map(|&m| m.max(floor)).collect();
    let factor = spectral_factor(&mag, factor_order)?.factor;
    let pre_h2 = factor.h2_norm()?;
    let chain = g.series(&factor.invert()?)?;
    let chain_h2 = chain.h2_norm()?;
    let k = kappa(budget)?;
    Ok(EqualizerDesign {
        target: g.clone(),
        pre: factor,
        post: PostFilter::Chain(chain),
        noise: NoiseDistribution::Gaussian { std: k * pre_h2 },
        detector: false,
        budget: *budget,
        predicted_mse: k * k * pre_h2 * pre_h2 * chain_h2 * chain_h2,
        lower_bound: zfe_lower_bound(g, budget)?,
    })
}

/// Correlation `(a * b~)[j] = sum_t a_t b_{t-j}` for
/// `j = -(len(b)-1) .. len(a)-1`, returned with the offset of lag 0.
fn cross_correlation<T: Scalar>(a: &[T], b: &[T]) -> (Vec<T>, usize) {
    let offset = b.len() - 1;
    let mut c = vec![T::zero(); a.len() + b.len() - 1];
    for (t, &at) in a.iter().enumerate() {
        for (s, &bs) in b.iter().enumerate() {
            // j = t - s
            c[offset + t - s] += at * bs;
        }
    }
    (c, offset)
}

/// `(a * b~ * R_u)[lag]` with the autocorrelation's even extension.
fn filtered_autocorrelation<T: Scalar>(
    corr: &(Vec<T>, usize),
    stats: &InputStatistics<T>,
    lag: i64,
) -> T {
    let (c, offset) = corr;
    let mut acc = T::zero();
    for (idx, &cj) in c.iter().enumerate() {
        let j = idx as i64 - *offset as i64;
        acc += cj * stats.at(lag - j);
    }
    acc
}

fn impulse_taps_auto<T: Scalar>(g: &RationalTf<T>, what: &str) -> Result<Vec<T>> {
    let taps = g
        .to_state_space()?
        .impulse_response_auto(T::cst(IMPULSE_TAIL))?
        .scalar_taps();
    if taps.is_empty() {
        return Err(Error::Domain(format!("{what}: empty impulse response")));
    }
    Ok(taps)
}

/// Designs the minimum mean squared error FIR post-filter for an already
/// chosen pre-filter `g1`, using public second-order input statistics. With
/// `z` the noisy pre-filtered stream and `y = G u` the reference output, the
/// taps solve the Yule-Walker system `Toeplitz(R_z) h = R_yz` where
/// `R_z = f * f~ * R_u + sigma^2 delta` and `R_yz = g * f~ * R_u`, `f` being
/// the impulse response of `g1`. The predicted MSE follows from the
/// orthogonality principle: `R_y[0] - h' R_yz`.
pub fn design_mmse<T: Scalar>(
    g: &RationalTf<T>,
    g1: &RationalTf<T>,
    stats: &InputStatistics<T>,
    budget: &PrivacyBudget<T>,
    fir_order: usize,
) -> Result<EqualizerDesign<T>> {
    check_stable(g, "design_mmse")?;
    check_stable(g1, "design_mmse pre-filter")?;
    let f = impulse_taps_auto(g1, "design_mmse pre-filter")?;
    let gt = impulse_taps_auto(g, "design_mmse target")?;
    let k = kappa(budget)?;
    let sigma = k * g1.h2_norm()?;
    let sigma2 = sigma * sigma;

    let ff = cross_correlation(&f, &f);
    let gf = cross_correlation(&gt, &f);
    let gg = cross_correlation(&gt, &gt);

    let mut rz = Vec::with_capacity(fir_order + 1);
    let mut ryz = Vec::with_capacity(fir_order + 1);
    for lag in 0..=fir_order as i64 {
        let mut z = filtered_autocorrelation(&ff, stats, lag);
        if lag == 0 {
            z += sigma2;
        }
        rz.push(z);
        ryz.push(filtered_autocorrelation(&gf, stats, lag));
    }
    let h = solve_toeplitz(&rz, &ryz)?;
    let ry0 = filtered_autocorrelation(&gg, stats, 0);
    let predicted_mse = ry0 - h.dot(&nalgebra::DVector::from_vec(ryz.clone()));
    Ok(EqualizerDesign {
        target: g.clone(),
        pre: g1.clone(),
        post: PostFilter::Fir(h.iter().copied().collect()),
        noise: NoiseDistribution::Gaussian { std: sigma },
        detector: false,
        budget: *budget,
        predicted_mse,
        lower_bound: zfe_lower_bound(g, budget)?,
    })
}

/// Thresholds a real-valued stream back to a binary event stream:
/// entries at or above the threshold become 1, the rest 0. This is free
/// post-processing and consumes no privacy budget.
pub fn detect<T: Scalar>(values: &[T], threshold: T) -> EventSignal {
    EventSignal {
        values: values
            .iter()
            .map(|&v| if v >= threshold { 1 } else { 0 })
            .collect(),
        binary: true,
    }
}

/// Outcome of one pipeline run.
#[derive(Debug, Clone)]
pub struct EventRun<T: Scalar> {
    /// The privatized release.
    pub released: Vec<T>,
    /// The noise-free reference output `G u`.
    pub reference: Vec<T>,
    /// Time-averaged squared error over the steady-state window.
    pub empirical_mse: T,
    /// Steps discarded as transient before averaging.
    pub discarded: usize,
}

fn settle_steps<T: Scalar>(tf: &RationalTf<T>) -> usize {
    match tf.to_state_space() {
        Ok(ss) => {
            let rho = crate::numerics::spectral_radius(ss.a()).to_f64();
            if rho <= 1e-12 {
                ss.order()
            } else if rho >= 1.0 {
                0
            } else {
                (5.0 * (-1.0 / rho.ln())).ceil() as usize
            }
        }
        Err(_) => 0,
    }
}

/// Runs the release mechanism over one event stream: pre-filter, seeded
/// noise, optional detector, post-filter. The ledger is charged once for the
/// noisy node; the detector and the post-filter are logged as free
/// post-processing.
pub fn run_event_pipeline<T: Scalar>(
    design: &EqualizerDesign<T>,
    input: &EventSignal,
    seed: u64,
    ledger: &mut BudgetLedger<T>,
) -> Result<EventRun<T>> {
    if input.is_empty() {
        return Err(Error::Dimension("run_event_pipeline: empty input".into()));
    }
    let u = input.to_scalars::<T>();
    let reference = design.target.simulate(&u);
    let mut z = design.pre.simulate(&u);
    let mut stream = NoiseStream::new(design.noise, 1, seed)?;
    for v in z.iter_mut() {
        *v += stream.next_vector()[0];
    }
    ledger.charge("event stream release", &design.budget);
    if design.detector {
        z = detect(&z, T::cst(0.5)).to_scalars();
        ledger.register_postprocessing("threshold detector");
    }
    let released = match &design.post {
        PostFilter::Chain(tf) => {
            ledger.register_postprocessing("equalizer chain");
            tf.simulate(&z)
        }
        PostFilter::Fir(taps) => {
            ledger.register_postprocessing("fir equalizer");
            let mut y = vec![T::zero(); z.len()];
            for (t, yt) in y.iter_mut().enumerate() {
                let mut acc = T::zero();
                for (j, &hj) in taps.iter().enumerate() {
                    if j > t {
                        break;
                    }
                    acc += hj * z[t - j];
                }
                *yt = acc;
            }
            y
        }
    };
    let horizon = u.len();
    let settle = settle_steps(&design.target).max(settle_steps(&design.pre)).max(
        match &design.post {
            PostFilter::Chain(tf) => settle_steps(tf),
            PostFilter::Fir(taps) => taps.len(),
        },
    );
    let discarded = settle.min(horizon / 2);
    let window = horizon - discarded;
    let mut mse = T::zero();
    for t in discarded..horizon {
        let e = released[t] - reference[t];
        mse += e * e;
    }
    mse /= T::from_count(window);
    Ok(EventRun {
        released,
        reference,
        empirical_mse: mse,
        discarded,
    })
}

/// Averages the empirical MSE over independent trials with per-trial derived
/// seeds, and reports the standard error of that average.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloMse<T: Scalar> {
    pub mean: T,
    pub standard_error: T,
    pub trials: usize,
}

/// Runs `trials` independent releases of the same input and averages the
/// per-run empirical MSE.
pub fn monte_carlo_event_mse<T: Scalar>(
    design: &EqualizerDesign<T>,
    input: &EventSignal,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloMse<T>> {
    if trials == 0 {
        return Err(Error::Domain(
            "monte_carlo_event_mse: need at least one trial".into(),
        ));
    }
    let mut samples = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut ledger = BudgetLedger::new();
        let run =
            run_event_pipeline(design, input, derive_seed(seed, trial as u64), &mut ledger)?;
        samples.push(run.empirical_mse);
    }
    let mean = samples.iter().fold(T::zero(), |s, &v| s + v) / T::from_count(trials);
    let var = samples
        .iter()
        .fold(T::zero(), |s, &v| s + (v - mean) * (v - mean))
        / T::from_count(trials.max(2) - 1);
    Ok(MonteCarloMse {
        mean,
        standard_error: (var / T::from_count(trials)).sqrt(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn binary_constructor_rejects_other_integers() {
        assert!(EventSignal::binary(vec![0, 1, 1, 0]).is_ok());
        assert!(EventSignal::binary(vec![0, 2]).is_err());
        assert!(EventSignal::binary(vec![-1]).is_err());
        assert!(EventSignal::integers(vec![0, 3, -2]).is_binary() == false);
        assert!(EventSignal::integers(vec![0, 1]).is_binary());
    }

    #[test]
    fn detector_thresholds_at_one_half() {
        let s = detect(&[0.49f64, 0.5, -3.0, 1.7], 0.5);
        assert_eq!(s.values(), &[0, 1, 0, 1]);
        assert!(s.is_binary());
    }

    #[test]
    fn burst_statistics_match_a_long_sample() {
        let (p_on, p_off) = (0.08, 0.12);
        let signal = generate_burst_input(400_000, p_on, p_off, 9).unwrap();
        let empirical = InputStatistics::<f64>::from_signal(&signal, 10).unwrap();
        let analytic = burst_statistics::<f64>(p_on, p_off, 10).unwrap();
        assert_relative_eq!(empirical.mean(), analytic.mean(), max_relative = 0.02);
        for k in 0..=10 {
            assert_relative_eq!(
                empirical.autocorrelation()[k],
                analytic.autocorrelation()[k],
                max_relative = 0.05
            );
        }
    }

    #[test]
    fn burst_generator_rejects_degenerate_probabilities() {
        assert!(generate_burst_input(10, 0.0, 0.5, 1).is_err());
        assert!(generate_burst_input(10, 0.5, 1.0, 1).is_err());
        assert!(burst_statistics::<f64>(-0.1, 0.5, 4).is_err());
    }

    #[test]
    fn input_statistics_validation() {
        assert!(InputStatistics::<f64>::new(0.0, vec![]).is_err());
        assert!(InputStatistics::<f64>::new(0.0, vec![-1.0]).is_err());
        assert!(InputStatistics::<f64>::new(0.0, vec![1.0, 1.5]).is_err());
        let s = InputStatistics::<f64>::new(0.5, vec![1.0, 0.5, 0.2]).unwrap();
        // even extension and final-value hold
        assert_eq!(s.at(-1), 0.5);
        assert_eq!(s.at(7), 0.2);
    }

    #[test]
    fn cross_correlation_matches_direct_sums() {
        let a = [1.0f64, 2.0, 3.0];
        let b = [4.0f64, 5.0];
        let (c, off) = cross_correlation(&a, &b);
        // (a * b~)[j] = sum_t a_t b_{t-j}, j in -1..=2
        assert_eq!(off, 1);
        assert_relative_eq!(c[off - 1], 1.0 * 5.0 + 2.0 * 0.0);
        assert_relative_eq!(c[off], 1.0 * 4.0 + 2.0 * 5.0);
        assert_relative_eq!(c[off + 1], 2.0 * 4.0 + 3.0 * 5.0);
        assert_relative_eq!(c[off + 2], 3.0 * 4.0);
    }
}
