//! Sample paths of the model under its event timing.
//!
//! Each period: the state transitions (one uniform draw; at `t = 1` the same
//! draw picks the initial state uniformly), the agent receives a signal (one
//! uniform draw), acts on the posterior, and observers update the public
//! likelihood for the next period.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    choose_action, Action, Likelihood, Model, ModelParams, Region, Sign, Signal, StateValue,
};
use crate::rng::UniformStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub horizon: u64,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(params: ModelParams, horizon: u64, seed: u64) -> Result<RunConfig> {
        let cfg = RunConfig {
            params,
            horizon,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::Horizon(self.horizon));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: u64,
    pub theta: StateValue,
    pub signal: Signal,
    pub l_pub: Likelihood,
    #[serde(rename = "L_post")]
    pub l_post: Likelihood,
    pub action: Action,
    pub region: Region,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub config: RunConfig,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn model(&self) -> Model {
        Model::new(self.config.params)
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    pub fn states(&self) -> impl Iterator<Item = StateValue> + '_ {
        self.steps.iter().map(|s| s.theta)
    }

    pub fn public_likelihoods(&self) -> impl Iterator<Item = Likelihood> + '_ {
        self.steps.iter().map(|s| s.l_pub)
    }
}

/// Streaming form of [`simulate`]; yields one [`TraceStep`] per period forever.
///
/// Long horizons (10⁷ and beyond) should be consumed through this iterator
/// rather than collected, since a full [`Trace`] costs 40 bytes per period.
#[derive(Clone, Debug)]
pub struct Simulator {
    model: Model,
    rng: UniformStream,
    t: u64,
    theta: StateValue,
    l: Likelihood,
    prev_action: Option<Action>,
}

impl Simulator {
    pub fn new(params: ModelParams, seed: u64) -> Simulator {
        Simulator {
            model: Model::new(params),
            rng: UniformStream::new(seed),
            t: 0,
            theta: Sign::Up,
            l: Likelihood::ZERO,
            prev_action: None,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Public likelihood the next period will start from.
    pub fn next_public(&self) -> Likelihood {
        self.l
    }

    pub fn step(&mut self) -> TraceStep {
        let m = &self.model;
        self.t += 1;

        let u_state = self.rng.next_uniform();
        self.theta = if self.t == 1 {
            if u_state < 0.5 {
                Sign::Up
            } else {
                Sign::Down
            }
        } else if u_state < m.params.epsilon() {
            -self.theta
        } else {
            self.theta
        };

        let u_signal = self.rng.next_uniform();
        let signal = if u_signal < m.params.alpha() {
            self.theta
        } else {
            -self.theta
        };

        let l_pub = self.l;
        let l_post = m.posterior(l_pub, signal);
        // l = 0 at t = 1 makes L = ±c_alpha, so the placeholder is never consulted
        debug_assert!(self.prev_action.is_some() || l_post.0 != 0.0);
        let action = choose_action(l_post, self.prev_action.unwrap_or(Sign::Up));
        let region = m.region(l_pub);

        self.l = m.next_public(l_pub, signal);
        self.prev_action = Some(action);

        TraceStep {
            t: self.t,
            theta: self.theta,
            signal,
            l_pub,
            l_post,
            action,
            region,
        }
    }
}

impl Iterator for Simulator {
    type Item = TraceStep;

    fn next(&mut self) -> Option<TraceStep> {
        Some(self.step())
    }
}

pub fn simulate(config: &RunConfig) -> Result<Trace> {
    config.validate()?;
    let steps = Simulator::new(config.params, config.seed)
        .take(config.horizon as usize)
        .collect();
    Ok(Trace {
        config: *config,
        steps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub t: u64,
    pub signal: Signal,
    pub l_pub: Likelihood,
    pub region: Region,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub config: RunConfig,
    pub steps: Vec<ChainStep>,
}

/// The public likelihood as a Markov chain on its own: the state is
/// integrated out and each period's up-signal has probability `π(l)`.
/// One uniform draw per period.
#[derive(Clone, Debug)]
pub struct LikelihoodChain {
    model: Model,
    rng: UniformStream,
    t: u64,
    l: Likelihood,
}

impl LikelihoodChain {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Self::starting_at(params, Likelihood::ZERO, seed)
    }

    pub fn starting_at(params: ModelParams, l0: Likelihood, seed: u64) -> Self {
        LikelihoodChain {
            model: Model::new(params),
            rng: UniformStream::new(seed),
            t: 0,
            l: l0,
        }
    }

    pub fn step(&mut self) -> ChainStep {
        self.t += 1;
        let l_pub = self.l;
        let p_up = self.model.signal_prob_up(l_pub);
        let signal = if self.rng.next_uniform() < p_up {
            Sign::Up
        } else {
            Sign::Down
        };
        self.l = self.model.next_public(l_pub, signal);
        ChainStep {
            t: self.t,
            signal,
            l_pub,
            region: self.model.region(l_pub),
        }
    }
}

impl Iterator for LikelihoodChain {
    type Item = ChainStep;

    fn next(&mut self) -> Option<ChainStep> {
        Some(self.step())
    }
}

pub fn simulate_l_chain(config: &RunConfig) -> Result<ChainTrace> {
    config.validate()?;
    let steps = LikelihoodChain::new(config.params, config.seed)
        .take(config.horizon as usize)
        .collect();
    Ok(ChainTrace {
        config: *config,
        steps,
    })
}

/// Checks every per-step invariant of a trace: region labels, action rule,
/// the transition law between consecutive steps, and `a_t = sign(l_{t+1})`.
/// Returns the first violation found.
pub fn check_trace(trace: &Trace) -> std::result::Result<(), String> {
    let m = trace.model();
    let tol = 1e-12;
    for (i, s) in trace.steps.iter().enumerate() {
        if s.t != i as u64 + 1 {
            return Err(format!("step {i} has t = {}", s.t));
        }
        if s.region != m.region(s.l_pub) {
            return Err(format!(
                "t={}: region {} but l = {}",
                s.t, s.region, s.l_pub.0
            ));
        }
        if (s.l_post.0 - m.posterior(s.l_pub, s.signal).0).abs() > tol {
            return Err(format!("t={}: posterior mismatch", s.t));
        }
        match s.region {
            Region::Learning if s.l_post.0 != 0.0 => {
                if Some(s.action) != s.l_post.sign() {
                    return Err(format!(
                        "t={}: learning-region action ignores posterior",
                        s.t
                    ));
                }
            }
            Region::UpCascade | Region::DownCascade => {
                if Some(s.action) != s.l_pub.sign() {
                    return Err(format!(
                        "t={}: cascade action differs from public sign",
                        s.t
                    ));
                }
            }
            Region::Learning => {}
        }
        if i == 0 && s.l_pub.0 != 0.0 {
            return Err("first public likelihood must be zero".into());
        }
        if let Some(next) = trace.steps.get(i + 1) {
            let expect = m.next_public(s.l_pub, s.signal);
            if (next.l_pub.0 - expect.0).abs() > tol {
                return Err(format!("t={}: transition law violated", s.t));
            }
            if next.l_pub.0 != 0.0 && next.l_pub.sign() != Some(s.action) {
                return Err(format!(
                    "t={}: action {} but next l = {}",
                    s.t, s.action, next.l_pub.0
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(a: f64, e: f64, n: u64, seed: u64) -> RunConfig {
        RunConfig::new(ModelParams::new(a, e).unwrap(), n, seed).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let c = cfg(0.8, 0.05, 2000, 11);
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a, b);
        let bits = |t: &Trace| {
            t.steps
                .iter()
                .map(|s| s.l_pub.0.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn distinct_seeds_give_distinct_traces() {
        for s in 0..100 {
            let a = simulate(&cfg(0.8, 0.05, 200, s)).unwrap();
            let b = simulate(&cfg(0.8, 0.05, 200, s + 100)).unwrap();
            assert_ne!(a.steps, b.steps);
        }
    }

    #[test]
    fn draw_order_is_transition_then_signal() {
        let c = cfg(0.7, 0.05, 300, 5);
        let trace = simulate(&c).unwrap();
        let mut u = UniformStream::new(5);
        let mut theta = Sign::Up;
        for s in &trace.steps {
            let us = u.next_uniform();
            theta = if s.t == 1 {
                if us < 0.5 {
                    Sign::Up
                } else {
                    Sign::Down
                }
            } else if us < 0.05 {
                -theta
            } else {
                theta
            };
            let sig = if u.next_uniform() < 0.7 {
                theta
            } else {
                -theta
            };
            assert_eq!((s.theta, s.signal), (theta, sig), "t={}", s.t);
        }

        // swapping the two draws gives a different path
        let mut u = UniformStream::new(5);
        let mut theta = Sign::Up;
        let mut differs = false;
        for s in &trace.steps {
            let us_sig = u.next_uniform();
            let us = u.next_uniform();
            theta = if s.t == 1 {
                if us < 0.5 {
                    Sign::Up
                } else {
                    Sign::Down
                }
            } else if us < 0.05 {
                -theta
            } else {
                theta
            };
            let sig = if us_sig < 0.7 { theta } else { -theta };
            differs |= (s.theta, s.signal) != (theta, sig);
        }
        assert!(differs);
    }

    #[test]
    fn rejects_short_horizon() {
        let p = ModelParams::new(0.8, 0.05).unwrap();
        assert!(matches!(RunConfig::new(p, 1, 0), Err(Error::Horizon(1))));
        assert!(matches!(RunConfig::new(p, 0, 0), Err(Error::Horizon(0))));
        let bad = RunConfig {
            params: p,
            horizon: 1,
            seed: 0,
        };
        assert!(simulate(&bad).is_err());
        assert!(simulate_l_chain(&bad).is_err());
    }

    #[test]
    fn first_period_starts_uninformed() {
        let t = simulate(&cfg(0.8, 0.05, 10, 3)).unwrap();
        assert_eq!(t.steps[0].l_pub.0, 0.0);
        assert_eq!(t.steps[0].action, t.steps[0].signal);
    }

    #[test]
    fn short_runs_respect_cascade_cap() {
        for seed in 0..200 {
            let t = simulate(&cfg(0.8, 0.05, 100, seed)).unwrap();
            let mut run = 0;
            for s in &t.steps {
                run = if s.region.is_cascade() { run + 1 } else { 0 };
                assert!(run <= 3);
            }
        }
    }

    #[test]
    fn traces_satisfy_invariants() {
        for (a, e) in [(0.8, 0.05), (0.55, 0.01), (0.95, 0.001)] {
            for seed in 0..5 {
                let t = simulate(&cfg(a, e, 20_000, seed)).unwrap();
                check_trace(&t).unwrap();
            }
        }
    }

    #[test]
    fn chain_stays_below_supremum() {
        let c = cfg(0.8, 0.05, 50_000, 1);
        let m = Model::new(c.params);
        let sup = m.sup_likelihood().0;
        let chain = simulate_l_chain(&c).unwrap();
        assert_eq!(chain.steps[0].l_pub.0, 0.0);
        assert!(chain.steps.iter().all(|s| s.l_pub.abs() <= sup));
        let trace = simulate(&c).unwrap();
        assert!(trace.steps.iter().all(|s| s.l_pub.abs() <= sup));
    }
}
