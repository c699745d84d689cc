//! Enumeration-based ground truth.
//!
//! [`exact_joint_enumeration`] walks every (state path, signal path) pair and
//! tracks the public belief by direct Bayesian filtering in probability space,
//! so it shares no update code with the log-odds recursions used by the
//! simulator. [`expected_gap_interval`] enumerates the marginal chain of the
//! public likelihood to bound the expected time to the next sign switch.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Likelihood, Model, ModelParams, Sign};

/// Exact expectations of the change frequencies over `n + 1` periods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointExpectations {
    pub n: usize,
    pub expected_q_a: f64,
    pub expected_q_theta: f64,
    /// `P[a_t != a_{t+1}]` for `t = 1..=n`.
    pub action_change_probs: Vec<f64>,
    /// `P[theta_t != theta_{t+1}]` for `t = 1..=n`.
    pub state_change_probs: Vec<f64>,
    /// Total probability enumerated; 1 up to rounding.
    pub total_mass: f64,
}

struct Enumerator {
    alpha: f64,
    epsilon: f64,
    periods: usize,
    action_change: Vec<f64>,
    state_change: Vec<f64>,
    mass: f64,
}

impl Enumerator {
    /// Action of an agent with public belief `q` (that the state is +1) and
    /// signal `s`; indifference repeats `prev`.
    fn act(&self, q: f64, s: Sign, prev: Option<Sign>) -> Sign {
        let (num, den) = match s {
            Sign::Up => (q * self.alpha, (1.0 - q) * (1.0 - self.alpha)),
            Sign::Down => (q * (1.0 - self.alpha), (1.0 - q) * self.alpha),
        };
        if num > den {
            Sign::Up
        } else if num < den {
            Sign::Down
        } else {
            prev.expect("indifference cannot occur in the first period")
        }
    }

    /// Public belief about next period's state after observing action `a`.
    fn filter(&self, q: f64, a: Sign, prev: Option<Sign>) -> f64 {
        let p_match = |theta: Sign| -> f64 {
            [Sign::Up, Sign::Down]
                .iter()
                .filter(|&&s| self.act(q, s, prev) == a)
                .map(|&s| {
                    if s == theta {
                        self.alpha
                    } else {
                        1.0 - self.alpha
                    }
                })
                .sum()
        };
        let up = q * p_match(Sign::Up);
        let down = (1.0 - q) * p_match(Sign::Down);
        let r = up / (up + down);
        (1.0 - self.epsilon) * r + self.epsilon * (1.0 - r)
    }

    fn walk(&mut self, t: usize, prob: f64, theta: Sign, q: f64, prev: Option<Sign>) {
        let e = self.epsilon;
        for s in [Sign::Up, Sign::Down] {
            let p_s = if s == theta {
                self.alpha
            } else {
                1.0 - self.alpha
            };
            let a = self.act(q, s, prev);
            let p = prob * p_s;
            if let Some(pa) = prev {
                if pa != a {
                    self.action_change[t - 1] += p;
                }
            }
            if t + 1 == self.periods {
                self.mass += p;
                continue;
            }
            let q_next = self.filter(q, a, prev);
            for next_theta in [theta, -theta] {
                let p_tr = if next_theta == theta { 1.0 - e } else { e };
                if next_theta != theta {
                    self.state_change[t] += p * p_tr;
                }
                self.walk(t + 1, p * p_tr, next_theta, q_next, Some(a));
            }
        }
    }
}

/// Enumerates all `4^(n+1)` joint paths; supports `2 <= n <= 10`.
pub fn exact_joint_enumeration(params: &ModelParams, n: usize) -> Result<JointExpectations> {
    if !(2..=10).contains(&n) {
        return Err(Error::EnumerationRange(n));
    }
    let mut en = Enumerator {
        alpha: params.alpha(),
        epsilon: params.epsilon(),
        periods: n + 1,
        action_change: vec![0.0; n],
        state_change: vec![0.0; n],
        mass: 0.0,
    };
    for theta in [Sign::Up, Sign::Down] {
        en.walk(0, 0.5, theta, 0.5, None);
    }
    let expected_q_a = en.action_change.iter().sum::<f64>() / n as f64;
    let expected_q_theta = en.state_change.iter().sum::<f64>() / n as f64;
    Ok(JointExpectations {
        n,
        expected_q_a,
        expected_q_theta,
        action_change_probs: en.action_change,
        state_change_probs: en.state_change,
        total_mass: en.mass,
    })
}

/// Certified interval for an expectation computed by truncated enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub l0: f64,
    pub value_low: f64,
    pub value_high: f64,
    pub depth: u64,
    pub mass_unresolved: f64,
    /// More than half the probability mass is still unresolved.
    pub low_confidence: bool,
}

impl OracleResult {
    pub fn width(&self) -> f64 {
        self.value_high - self.value_low
    }
}

/// Default enumeration depth, `10 * (floor(K) + 2)`.
pub fn default_depth(model: &Model) -> u64 {
    10 * (model.constants.cap_k_floor + 2)
}

/// Incremental enumeration of the public-likelihood chain from a positive
/// starting value until its sign turns negative.
///
/// Frontier nodes are keyed on the exact bit pattern of `l`; only identical
/// values are merged. Path probabilities are kept as logarithms.
#[derive(Clone, Debug)]
pub struct GapEnumeration {
    model: Model,
    l0: f64,
    depth: u64,
    frontier: Vec<(f64, f64)>,
    /// Σ k · P[switch at step k] over resolved paths.
    partial: f64,
}

impl GapEnumeration {
    pub fn new(l0: Likelihood, params: &ModelParams) -> Result<Self> {
        if !l0.0.is_finite() || l0.0 == 0.0 {
            return Err(Error::StartingLikelihood(l0.0));
        }
        // the model is symmetric under relabeling, so work on the positive side
        Ok(GapEnumeration {
            model: Model::new(*params),
            l0: l0.0,
            depth: 0,
            frontier: vec![(l0.0.abs(), 0.0)],
            partial: 0.0,
        })
    }

    pub fn mass_unresolved(&self) -> f64 {
        self.frontier.iter().map(|&(_, lp)| lp.exp()).sum()
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    pub fn advance(&mut self) {
        let m = &self.model;
        let k = (self.depth + 1) as f64;
        let mut next: HashMap<u64, (f64, f64)> = HashMap::with_capacity(self.frontier.len() * 2);
        let mut push = |l: f64, lp: f64, partial: &mut f64| {
            if l < 0.0 {
                *partial += k * lp.exp();
                return;
            }
            next.entry(l.to_bits())
                .and_modify(|(_, acc)| *acc = log_add(*acc, lp))
                .or_insert((l, lp));
        };
        for &(l, lp) in &self.frontier {
            let x = Likelihood(l);
            if m.region(x).is_cascade() {
                push(m.cascade_decay(x).0, lp, &mut self.partial);
            } else {
                let p_up = m.signal_prob_up(x);
                push(m.f1(x).0, lp + p_up.ln(), &mut self.partial);
                push(m.f0(x).0, lp + (1.0 - p_up).ln(), &mut self.partial);
            }
        }
        let mut frontier: Vec<(f64, f64)> = next.into_values().collect();
        frontier.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.frontier = frontier;
        self.depth += 1;
    }

    /// Current interval. Unresolved paths have already lasted `depth`
    /// periods and need at least one more; the expected remainder from any
    /// positive value is below `M`.
    pub fn result(&self) -> OracleResult {
        let mass = self.mass_unresolved();
        let d = self.depth as f64;
        let m_bound = self.model.constants.fad_bound_m;
        OracleResult {
            l0: self.l0,
            value_low: self.partial + mass * (d + 1.0),
            value_high: self.partial + mass * (d + m_bound),
            depth: self.depth,
            mass_unresolved: mass,
            low_confidence: mass > 0.5,
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn expected_gap_interval(
    l0: Likelihood,
    params: &ModelParams,
    depth: u64,
) -> Result<OracleResult> {
    if depth == 0 {
        return Err(Error::Depth);
    }
    let mut en = GapEnumeration::new(l0, params)?;
    while en.depth() < depth {
        en.advance();
    }
    Ok(en.result())
}

/// Enumerates at least `min_depth` levels, then continues until the
/// unresolved mass is at most `mass_tol` or `max_depth` is reached.
pub fn expected_gap_interval_adaptive(
    l0: Likelihood,
    params: &ModelParams,
    min_depth: u64,
    mass_tol: f64,
    max_depth: u64,
) -> Result<OracleResult> {
    if min_depth == 0 {
        return Err(Error::Depth);
    }
    let mut en = GapEnumeration::new(l0, params)?;
    while en.depth() < min_depth || (en.depth() < max_depth && en.mass_unresolved() > mass_tol) {
        en.advance();
    }
    Ok(en.result())
}

/// Public-likelihood values immediately after a sign switch reachable from
/// `l = 0` within `periods` periods, reflected to the positive side, sorted
/// and deduplicated. Switches are counted against the first established sign.
pub fn post_switch_values(params: &ModelParams, periods: u64) -> Vec<f64> {
    let m = Model::new(*params);
    // (l, established sign)
    let mut frontier: Vec<(f64, Option<Sign>)> = vec![(0.0, None)];
    let mut out = Vec::new();
    for _ in 1..periods {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for &(l, sign) in &frontier {
            let x = Likelihood(l);
            let children: &[f64] = if m.region(x).is_cascade() {
                &[m.cascade_decay(x).0]
            } else {
                &[m.f1(x).0, m.f0(x).0]
            };
            for &c in children {
                let s = Sign::of(c).or(sign);
                if sign.is_some() && s != sign {
                    out.push(c.abs());
                }
                next.push((c, s));
            }
        }
        frontier = next;
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| a.to_bits() == b.to_bits());
    out
}

/// Horizon over which starting values for the bound check are sampled.
pub const POST_SWITCH_PERIODS: u64 = 12;

/// Grid of `(alpha, epsilon)` points; epsilon given as a fraction of `alpha(1 - alpha)`.
pub fn default_grid() -> Vec<(f64, f64)> {
    let alphas = [0.55, 0.6, 0.7, 0.8, 0.9, 0.95];
    let fracs = [0.5, 0.1, 0.01, 0.001];
    alphas
        .iter()
        .flat_map(|&a| fracs.iter().map(move |&f| (a, f * a * (1.0 - a))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub alpha: f64,
    pub epsilon: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub inv_eps: f64,
    pub max_cascade_len: u64,
    pub interval_low: f64,
    pub interval_high: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Unresolved-mass target used by [`verify_bounds`].
pub const VERIFY_MASS_TOL: f64 = 1e-3;

/// Worst-case gap interval over the sampled post-switch values.
pub fn worst_gap_interval(params: &ModelParams, min_depth: u64) -> Result<Vec<OracleResult>> {
    let m = Model::new(*params);
    let max_depth = 100 * default_depth(&m);
    post_switch_values(params, POST_SWITCH_PERIODS)
        .par_iter()
        .map(|&l0| {
            expected_gap_interval_adaptive(
                Likelihood(l0),
                params,
                min_depth,
                VERIFY_MASS_TOL,
                max_depth,
            )
        })
        .collect()
}

/// Checks, per grid point, that `M < 1/epsilon`, that the cascade cap holds
/// from the supremum, and that every sampled gap interval lies below `M`.
/// Invalid points are rejected before any check runs.
pub fn verify_bounds(grid: &[(f64, f64)], depth: Option<u64>) -> Result<VerifyReport> {
    let params = grid
        .iter()
        .map(|&(a, e)| ModelParams::new(a, e))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(params.len());
    let mut failures = Vec::new();
    for p in params {
        let m = Model::new(p);
        let c = m.constants;
        let inv_eps = 1.0 / p.epsilon();
        let max_cascade_len = m.cascade_length(m.sup_likelihood());
        let intervals = worst_gap_interval(&p, depth.unwrap_or_else(|| default_depth(&m)))?;
        let interval_low = intervals
            .iter()
            .map(|r| r.value_low)
            .fold(f64::NEG_INFINITY, f64::max);
        let interval_high = intervals
            .iter()
            .map(|r| r.value_high)
            .fold(f64::NEG_INFINITY, f64::max);

        let mut ok = true;
        let mut fail = |what: String| {
            ok = false;
            failures.push(format!("{p}: {what}"));
        };
        if c.fad_bound_m >= inv_eps {
            fail(format!(
                "M = {} is not below 1/epsilon = {}",
                c.fad_bound_m, inv_eps
            ));
        }
        if max_cascade_len > c.cap_k_floor {
            fail(format!(
                "cascade of length {max_cascade_len} exceeds floor(K) = {}",
                c.cap_k_floor
            ));
        }
        if intervals.is_empty() {
            fail("no post-switch values sampled".into());
        }
        if interval_high >= c.fad_bound_m {
            fail(format!(
                "gap interval upper end {interval_high} is not below M = {}",
                c.fad_bound_m
            ));
        }
        rows.push(VerifyRow {
            alpha: p.alpha(),
            epsilon: p.epsilon(),
            k: c.cap_k,
            m: c.fad_bound_m,
            inv_eps,
            max_cascade_len,
            interval_low,
            interval_high,
            pass: ok,
        });
    }
    Ok(VerifyReport { rows, failures })
}
