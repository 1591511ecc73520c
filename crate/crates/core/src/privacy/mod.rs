//! Privacy budgets, sensitivities under the supported adjacency relations,
//! and the Laplace/Gaussian perturbation primitives with a post-processing
//! aware budget ledger.

use nalgebra::{DMatrix, DVector};

use crate::lti::StateSpace;
use crate::numerics::{q_inverse, NoiseDistribution, NoiseStream};
use crate::{Error, Result, Scalar};

/// An (epsilon, delta) privacy budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget<T: Scalar> {
    epsilon: T,
    delta: T,
}

impl<T: Scalar> PrivacyBudget<T> {
    pub fn new(epsilon: T, delta: T) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite_s() {
            return Err(Error::Domain(format!(
                "privacy budget: epsilon must be positive, got {}",
                epsilon.to_f64()
            )));
        }
        if !(delta >= T::zero() && delta < T::one()) {
            return Err(Error::Domain(format!(
                "privacy budget: delta must lie in [0,1), got {}",
                delta.to_f64()
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }
    pub fn delta(&self) -> T {
        self.delta
    }
}

/// Gaussian-mechanism multiplier: with `K = Q^{-1}(delta)`,
/// `kappa = (K + sqrt(K^2 + 2 epsilon)) / (2 epsilon)`, so that a standard
/// deviation of `kappa` times the l2 sensitivity meets the budget.
pub fn kappa<T: Scalar>(budget: &PrivacyBudget<T>) -> Result<T> {
    if !(budget.delta > T::zero()) {
        return Err(Error::Domain(
            "kappa: delta must be strictly positive for the Gaussian mechanism".into(),
        ));
    }
    let k = q_inverse(budget.delta)?;
    let e = budget.epsilon;
    Ok((k + (k * k + T::cst(2.0) * e).sqrt()) / (T::cst(2.0) * e))
}

/// Norm order used for sensitivities and adjacency bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormOrder {
    L1,
    L2,
}

/// Adjacency relation between two collections of participant signals.
#[derive(Debug, Clone)]
pub enum AdjacencySpec<T: Scalar> {
    /// At most one participant's signal changes, with
    /// `||u_i - u_i'||_{r_i} <= b_i`.
    BoundedVariation {
        orders: Vec<NormOrder>,
        bounds: Vec<T>,
    },
    /// At most one participant's state trajectory changes, with
    /// `||S_i x_i - S_i x_i'||_2 <= rho_i` for 0/1 diagonal selections `S_i`.
    StateTrajectory {
        selections: Vec<DMatrix<T>>,
        bounds: Vec<T>,
    },
    /// Integer event streams differing by a single unit event,
    /// `||u - u'||_1 = 1`.
    EventStream,
}

impl<T: Scalar> AdjacencySpec<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            AdjacencySpec::BoundedVariation { orders, bounds } => {
                if orders.len() != bounds.len() {
                    return Err(Error::Dimension(
                        "adjacency: one norm order per bound required".into(),
                    ));
                }
                if bounds.iter().any(|b| !(*b >= T::zero())) {
                    return Err(Error::Domain(
                        "adjacency: bounds must be nonnegative".into(),
                    ));
                }
            }
            AdjacencySpec::StateTrajectory { selections, bounds } => {
                if selections.len() != bounds.len() {
                    return Err(Error::Dimension(
                        "adjacency: one selection matrix per bound required".into(),
                    ));
                }
                if bounds.iter().any(|b| !(*b >= T::zero())) {
                    return Err(Error::Domain(
                        "adjacency: bounds must be nonnegative".into(),
                    ));
                }
                for s in selections {
                    if s.nrows() != s.ncols() {
                        return Err(Error::Dimension(
                            "adjacency: selection matrices must be square".into(),
                        ));
                    }
                    for i in 0..s.nrows() {
                        for j in 0..s.ncols() {
                            let v = s[(i, j)];
                            let ok = if i == j {
                                v == T::zero() || v == T::one()
                            } else {
                                v == T::zero()
                            };
                            if !ok {
                                return Err(Error::Domain(
                                    "adjacency: selections must be diagonal with 0/1 entries"
                                        .into(),
                                ));
                            }
                        }
                    }
                }
            }
            AdjacencySpec::EventStream => {}
        }
        Ok(())
    }
}

/// A sensitivity in a specific norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityValue<T: Scalar> {
    pub p: NormOrder,
    pub value: T,
}

/// One accounting record: a mechanism invocation or a zero-cost
/// post-processing step.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry<T: Scalar> {
    pub description: String,
    pub epsilon: T,
    pub delta: T,
    pub post_processing: bool,
}

/// Append-only record of budget charges. Post-processing entries never change
/// the totals.
#[derive(Debug, Clone, Default)]
pub struct BudgetLedger<T: Scalar> {
    entries: Vec<LedgerEntry<T>>,
}

impl<T: Scalar> BudgetLedger<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn entries(&self) -> &[LedgerEntry<T>] {
        &self.entries
    }

    /// Records a mechanism invocation charged at the given budget.
    pub fn charge(&mut self, description: impl Into<String>, budget: &PrivacyBudget<T>) {
        self.entries.push(LedgerEntry {
            description: description.into(),
            epsilon: budget.epsilon,
            delta: budget.delta,
            post_processing: false,
        });
    }

    /// Records a post-processing step. By resilience to post-processing this
    /// costs nothing, so the totals are unchanged.
    pub fn register_postprocessing(&mut self, description: impl Into<String>) {
        self.entries.push(LedgerEntry {
            description: description.into(),
            epsilon: T::zero(),
            delta: T::zero(),
            post_processing: true,
        });
    }

    /// Sum of all charged budgets as `(epsilon, delta)`.
    pub fn total(&self) -> (T, T) {
        self.entries.iter().fold((T::zero(), T::zero()), |(e, d), x| {
            (e + x.epsilon, d + x.delta)
        })
    }
}

/// Adds i.i.d. `Laplace(sensitivity / epsilon)` noise to every coordinate of
/// every step and charges `(epsilon, 0)` to the ledger. A zero sensitivity
/// passes the signal through unchanged.
pub fn laplace_perturb<T: Scalar>(
    signal: &[DVector<T>],
    sensitivity: T,
    budget: &PrivacyBudget<T>,
    seed: u64,
    ledger: &mut BudgetLedger<T>,
) -> Result<(Vec<DVector<T>>, T)> {
    if !(sensitivity >= T::zero()) {
        return Err(Error::Domain(
            "laplace_perturb: sensitivity must be nonnegative".into(),
        ));
    }
    let scale = sensitivity / budget.epsilon;
    let charged = PrivacyBudget::new(budget.epsilon, T::zero())?;
    ledger.charge("laplace mechanism", &charged);
    if signal.is_empty() || scale == T::zero() {
        return Ok((signal.to_vec(), scale));
    }
    let dim = signal[0].len();
    let mut stream = NoiseStream::new(NoiseDistribution::Laplace { scale }, dim, seed)?;
    let out = signal
        .iter()
        .map(|u| {
            if u.len() != dim {
                return Err(Error::Dimension(
                    "laplace_perturb: inconsistent signal dimensions".into(),
                ));
            }
            Ok(u + stream.next_vector())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, scale))
}

/// Adds i.i.d. Gaussian noise with `sigma = kappa(budget) * sensitivity` to
/// every coordinate of every step and charges `(epsilon, delta)` to the
/// ledger. Requires `delta > 0`.
pub fn gaussian_perturb<T: Scalar>(
    signal: &[DVector<T>],
    sensitivity: T,
    budget: &PrivacyBudget<T>,
    seed: u64,
    ledger: &mut BudgetLedger<T>,
) -> Result<(Vec<DVector<T>>, T)> {
    if !(sensitivity >= T::zero()) {
        return Err(Error::Domain(
            "gaussian_perturb: sensitivity must be nonnegative".into(),
        ));
    }
    if !(budget.delta > T::zero()) {
        return Err(Error::Unsupported(
            "gaussian_perturb: the Gaussian mechanism requires delta > 0".into(),
        ));
    }
    let sigma = kappa(budget)? * sensitivity;
    ledger.charge("gaussian mechanism", budget);
    if signal.is_empty() || sigma == T::zero() {
        return Ok((signal.to_vec(), sigma));
    }
    let dim = signal[0].len();
    let mut stream = NoiseStream::new(NoiseDistribution::Gaussian { std: sigma }, dim, seed)?;
    let out = signal
        .iter()
        .map(|u| {
            if u.len() != dim {
                return Err(Error::Dimension(
                    "gaussian_perturb: inconsistent signal dimensions".into(),
                ));
            }
            Ok(u + stream.next_vector())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, sigma))
}

/// Sensitivity of the aggregate `sum_i G_i u_i` when at most one participant
/// deviates within the bounded-variation adjacency.
///
/// Implemented gains (per channel, from the l_{r_i} input ball to the l_p
/// output norm):
/// - `r_i = 2, p = 2`: the H-infinity norm.
/// - `r_i = 2, p = 1`: the l1 norm of the impulse response, a conservative
///   proxy that is tight when the two signals differ at a single time step
///   (where the l2 and l1 deviation norms coincide).
///
/// All other combinations are rejected as unsupported.
pub fn sensitivity_linear_aggregate<T: Scalar>(
    channels: &[StateSpace<T>],
    adjacency: &AdjacencySpec<T>,
    p: NormOrder,
) -> Result<SensitivityValue<T>> {
    adjacency.validate()?;
    let (orders, bounds) = match adjacency {
        AdjacencySpec::BoundedVariation { orders, bounds } => (orders, bounds),
        _ => {
            return Err(Error::Unsupported(
                "sensitivity_linear_aggregate: requires a bounded-variation adjacency".into(),
            ))
        }
    };
    if channels.len() != bounds.len() {
        return Err(Error::Dimension(format!(
            "sensitivity_linear_aggregate: {} channels but {} bounds",
            channels.len(),
            bounds.len()
        )));
    }
    let mut value = T::zero();
    for ((g, &r), &b) in channels.iter().zip(orders).zip(bounds) {
        let gain = match (r, p) {
            (NormOrder::L2, NormOrder::L2) => g.hinf_norm()?,
            (NormOrder::L2, NormOrder::L1) => {
                let resp = g.impulse_response_auto(T::cst(1e-10))?;
                resp.taps
                    .iter()
                    .fold(T::zero(), |s, tap| s + tap.norm())
                    + resp.tail_bound
            }
            (NormOrder::L1, _) => {
                return Err(Error::Unsupported(
                    "sensitivity_linear_aggregate: no gain formula for l1-bounded deviations"
                        .into(),
                ))
            }
        };
        value = value.max(gain * b);
    }
    Ok(SensitivityValue { p, value })
}

/// Sensitivity of a single filter under the unit event-stream adjacency: the
/// l_p norm of its impulse response.
pub fn sensitivity_event<T: Scalar>(
    g: &StateSpace<T>,
    p: NormOrder,
) -> Result<SensitivityValue<T>> {
    let value = match p {
        NormOrder::L2 => g.h2_norm()?,
        NormOrder::L1 => {
            let resp = g.impulse_response_auto(T::cst(1e-10))?;
            resp.taps
                .iter()
                .fold(T::zero(), |s, tap| s + tap.norm())
                + resp.tail_bound
        }
    };
    Ok(SensitivityValue { p, value })
}
