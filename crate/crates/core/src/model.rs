//! Parameters, closed-form constants and the one-step belief and action maps.
//!
//! Everything is carried in log-odds space. A public likelihood `l` is the
//! log-odds that the current state is `+1` given all past actions; the
//! posterior likelihood `L` adds the private signal's evidence `±c_alpha`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Neg;

use crate::error::{Error, Result};

/// Parameters closer than this to an open-interval boundary are rejected.
pub const BOUNDARY_MARGIN: f64 = 1e-9;

/// Signal precision and per-period switching probability.
///
/// Construct through [`ModelParams::new`]; the fields are private so that a
/// value of this type is always inside the valid domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    alpha: f64,
    epsilon: f64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    epsilon: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.alpha, raw.epsilon)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            alpha: p.alpha,
            epsilon: p.epsilon,
        }
    }
}

impl ModelParams {
    /// Requires `1/2 < alpha < 1` and `0 < epsilon < alpha(1 - alpha)`, each
    /// with a margin of [`BOUNDARY_MARGIN`].
    pub fn new(alpha: f64, epsilon: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.5 + BOUNDARY_MARGIN && alpha < 1.0 - BOUNDARY_MARGIN) {
            return Err(Error::Alpha { value: alpha });
        }
        let upper = alpha * (1.0 - alpha);
        if !(epsilon.is_finite() && epsilon > BOUNDARY_MARGIN && epsilon < upper - BOUNDARY_MARGIN)
        {
            return Err(Error::Epsilon {
                value: epsilon,
                upper,
            });
        }
        Ok(ModelParams { alpha, epsilon })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha={} epsilon={}", self.alpha, self.epsilon)
    }
}

/// Closed-form thresholds and bounds implied by a parameter pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Log-likelihood ratio carried by one signal, `ln(alpha / (1 - alpha))`.
    pub c_alpha: f64,
    /// Smallest public likelihood from which one up-signal starts an up-cascade.
    pub c_u: f64,
    /// Bound on the number of consecutive periods any cascade can last.
    pub cap_k: f64,
    pub cap_k_floor: u64,
    /// Bound on the expected time between sign switches of the public likelihood.
    pub fad_bound_m: f64,
}

pub fn derive_constants(params: &ModelParams) -> DerivedConstants {
    let a = params.alpha;
    let e = params.epsilon;
    let c_alpha = (a / (1.0 - a)).ln();
    let c_u = ((1.0 - a) * (a - e) / (a * (1.0 - a - e))).ln();
    let two_var = 2.0 * a * (1.0 - a);
    let cap_k = (1.0 - two_var).ln() / (1.0 - 2.0 * e).abs().ln();
    let fad_bound_m = 1.0 + cap_k / two_var;
    DerivedConstants {
        c_alpha,
        c_u,
        cap_k,
        cap_k_floor: cap_k.floor() as u64,
        fad_bound_m,
    }
}

/// A binary label: the state, a private signal, or an action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Down,
    Up,
}

pub type StateValue = Sign;
pub type Signal = Sign;
pub type Action = Sign;

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Down => -1,
            Sign::Up => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    /// Sign of a nonzero real; `None` for zero or NaN.
    pub fn of(x: f64) -> Option<Sign> {
        if x > 0.0 {
            Some(Sign::Up)
        } else if x < 0.0 {
            Some(Sign::Down)
        } else {
            None
        }
    }
}

impl Neg for Sign {
    type Output = Sign;

    fn neg(self) -> Sign {
        match self {
            Sign::Down => Sign::Up,
            Sign::Up => Sign::Down,
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        s.value()
    }
}

impl TryFrom<i8> for Sign {
    type Error = Error;

    fn try_from(v: i8) -> Result<Sign> {
        match v {
            -1 => Ok(Sign::Down),
            1 => Ok(Sign::Up),
            other => Err(Error::Parse(format!(
                "binary label must be -1 or +1, got {other}"
            ))),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// A log-likelihood ratio about the current state (public `l` or posterior `L`).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Likelihood(pub f64);

impl Likelihood {
    pub const ZERO: Likelihood = Likelihood(0.0);

    pub fn value(self) -> f64 {
        self.0
    }

    /// The belief `e^l / (1 + e^l)` that the state is `+1`.
    pub fn belief(self) -> f64 {
        let l = self.0;
        if l >= 0.0 {
            1.0 / (1.0 + (-l).exp())
        } else {
            let x = l.exp();
            x / (1.0 + x)
        }
    }

    pub fn from_belief(q: f64) -> Likelihood {
        Likelihood((q / (1.0 - q)).ln())
    }

    pub fn sign(self) -> Option<Sign> {
        Sign::of(self.0)
    }

    pub fn abs(self) -> f64 {
        self.0.abs()
    }
}

impl Neg for Likelihood {
    type Output = Likelihood;

    fn neg(self) -> Likelihood {
        Likelihood(-self.0)
    }
}

impl From<f64> for Likelihood {
    fn from(v: f64) -> Self {
        Likelihood(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    UpCascade,
    DownCascade,
    Learning,
}

impl Region {
    pub fn is_cascade(self) -> bool {
        !matches!(self, Region::Learning)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::UpCascade => "up_cascade",
            Region::DownCascade => "down_cascade",
            Region::Learning => "learning",
        }
    }

    pub fn parse(s: &str) -> Result<Region> {
        match s {
            "up_cascade" => Ok(Region::UpCascade),
            "down_cascade" => Ok(Region::DownCascade),
            "learning" => Ok(Region::Learning),
            other => Err(Error::Parse(format!("unknown region {other:?}"))),
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `ln((a e^l + b) / (c e^l + d))` for positive coefficients, without
/// overflowing `e^l` for large `|l|`.
fn log_mix_ratio(l: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    if l >= 0.0 {
        let x = (-l).exp();
        (a + b * x).ln() - (c + d * x).ln()
    } else {
        let x = l.exp();
        (a * x + b).ln() - (c * x + d).ln()
    }
}

/// Public likelihood after an up-signal is revealed in the learning region.
pub fn f1(l: Likelihood, params: &ModelParams) -> Likelihood {
    let (a, e) = (params.alpha, params.epsilon);
    Likelihood(log_mix_ratio(
        l.0,
        (1.0 - e) * a,
        e * (1.0 - a),
        e * a,
        (1.0 - e) * (1.0 - a),
    ))
}

/// Public likelihood after a down-signal is revealed in the learning region.
pub fn f0(l: Likelihood, params: &ModelParams) -> Likelihood {
    let (a, e) = (params.alpha, params.epsilon);
    Likelihood(log_mix_ratio(
        l.0,
        (1.0 - e) * (1.0 - a),
        e * a,
        e * (1.0 - a),
        (1.0 - e) * a,
    ))
}

/// Public likelihood one period later when the action reveals nothing, so
/// only the state transition moves the belief toward zero.
pub fn cascade_decay(l: Likelihood, params: &ModelParams) -> Likelihood {
    let e = params.epsilon;
    Likelihood(log_mix_ratio(l.0, 1.0 - e, e, e, 1.0 - e))
}

pub fn posterior_llr(l: Likelihood, s: Signal, constants: &DerivedConstants) -> Likelihood {
    match s {
        Sign::Up => Likelihood(l.0 + constants.c_alpha),
        Sign::Down => Likelihood(l.0 - constants.c_alpha),
    }
}

/// Strict preference decides; indifference repeats the predecessor's action.
pub fn choose_action(posterior: Likelihood, prev_action: Action) -> Action {
    Sign::of(posterior.0).unwrap_or(prev_action)
}

/// The boundary `|l| = c_alpha` belongs to the cascade region.
pub fn classify_region(l: Likelihood, constants: &DerivedConstants) -> Region {
    if l.0 >= constants.c_alpha {
        Region::UpCascade
    } else if l.0 <= -constants.c_alpha {
        Region::DownCascade
    } else {
        Region::Learning
    }
}

/// Marginal probability of an up-signal given public likelihood `l`.
pub fn signal_prob_up(l: Likelihood, params: &ModelParams) -> f64 {
    let a = params.alpha;
    let q = l.belief();
    (1.0 - a) + (2.0 * a - 1.0) * q
}

/// Parameters bundled with their derived constants, so callers on hot paths
/// do not recompute logarithms every period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub params: ModelParams,
    pub constants: DerivedConstants,
}

impl Model {
    pub fn new(params: ModelParams) -> Model {
        Model {
            params,
            constants: derive_constants(&params),
        }
    }

    pub fn from_values(alpha: f64, epsilon: f64) -> Result<Model> {
        ModelParams::new(alpha, epsilon).map(Model::new)
    }

    pub fn c_alpha(&self) -> f64 {
        self.constants.c_alpha
    }

    pub fn f1(&self, l: Likelihood) -> Likelihood {
        f1(l, &self.params)
    }

    pub fn f0(&self, l: Likelihood) -> Likelihood {
        f0(l, &self.params)
    }

    pub fn cascade_decay(&self, l: Likelihood) -> Likelihood {
        cascade_decay(l, &self.params)
    }

    pub fn posterior(&self, l: Likelihood, s: Signal) -> Likelihood {
        posterior_llr(l, s, &self.constants)
    }

    pub fn region(&self, l: Likelihood) -> Region {
        classify_region(l, &self.constants)
    }

    pub fn signal_prob_up(&self, l: Likelihood) -> f64 {
        signal_prob_up(l, &self.params)
    }

    /// Next period's public likelihood. In the learning region the update is
    /// keyed on the signal (which the action reveals); in a cascade the
    /// signal is ignored.
    pub fn next_public(&self, l: Likelihood, s: Signal) -> Likelihood {
        match self.region(l) {
            Region::Learning => match s {
                Sign::Up => self.f1(l),
                Sign::Down => self.f0(l),
            },
            _ => self.cascade_decay(l),
        }
    }

    /// Supremum of reachable `|l|`.
    pub fn sup_likelihood(&self) -> Likelihood {
        self.f1(Likelihood(self.c_alpha()))
    }

    /// Number of consecutive cascade periods starting at `l`, the first
    /// period included. Zero when `l` is in the learning region.
    pub fn cascade_length(&self, l: Likelihood) -> u64 {
        let mut l = l;
        let mut n = 0;
        while self.region(l).is_cascade() {
            n += 1;
            l = self.cascade_decay(l);
        }
        n
    }

    /// Value of the public likelihood when a cascade starting at `l` first exits.
    pub fn cascade_exit(&self, l: Likelihood) -> Likelihood {
        let mut l = l;
        while self.region(l).is_cascade() {
            l = self.cascade_decay(l);
        }
        l
    }
}
