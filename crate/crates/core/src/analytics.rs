//! Fad statistics computed from traces.
//!
//! Two routes compute the per-run numbers: the direct functions over a stored
//! [`Trace`] (`change_frequencies`, `switch_gaps`, ...) and the streaming
//! [`RunAccumulator`], which never holds a trace in memory. Tests check that
//! they agree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::{Action, Likelihood, Model, ModelParams, Sign};
use crate::sim::{Simulator, Trace, TraceStep};

pub fn count_changes<I>(labels: I) -> u64
where
    I: IntoIterator<Item = Sign>,
{
    let mut it = labels.into_iter();
    let Some(mut prev) = it.next() else { return 0 };
    let mut n = 0;
    for x in it {
        if x != prev {
            n += 1;
        }
        prev = x;
    }
    n
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeFrequencies {
    /// Number of adjacent pairs compared, `N - 1`.
    pub n: u64,
    pub action_changes: u64,
    pub state_changes: u64,
    pub q_a: f64,
    pub q_theta: f64,
}

pub fn change_frequencies(trace: &Trace) -> Result<ChangeFrequencies> {
    if trace.len() < 2 {
        return Err(Error::TraceTooShort {
            needed: 2,
            got: trace.len(),
        });
    }
    let n = trace.len() as u64 - 1;
    let action_changes = count_changes(trace.actions());
    let state_changes = count_changes(trace.states());
    Ok(ChangeFrequencies {
        n,
        action_changes,
        state_changes,
        q_a: action_changes as f64 / n as f64,
        q_theta: state_changes as f64 / n as f64,
    })
}

/// Incremental sign-switch bookkeeping for the public likelihood.
///
/// A period with `l = 0` keeps the previous sign and is counted in
/// `zero_hits`. The first nonzero sign is not a switch.
#[derive(Clone, Debug, Default)]
pub struct SwitchTracker {
    current: Option<Sign>,
    last_switch: u64,
    pub switch_times: Vec<u64>,
    pub zero_hits: u64,
}

impl SwitchTracker {
    /// Feeds the public likelihood of period `t`; returns `true` on a switch.
    pub fn observe(&mut self, t: u64, l: f64) -> bool {
        match Sign::of(l) {
            None => {
                if t > 1 {
                    self.zero_hits += 1;
                }
                false
            }
            Some(s) => match self.current {
                None => {
                    self.current = Some(s);
                    false
                }
                Some(c) if c == s => false,
                Some(_) => {
                    self.current = Some(s);
                    self.last_switch = t;
                    self.switch_times.push(t);
                    true
                }
            },
        }
    }

    /// Time of the most recent switch (0 before any).
    pub fn last_switch(&self) -> u64 {
        self.last_switch
    }
}

/// Gaps `D_i = T_i - T_{i-1}` with `T_0 = 0`.
pub fn gaps_from_switch_times(times: &[u64]) -> Vec<u64> {
    let mut prev = 0;
    times
        .iter()
        .map(|&t| {
            let d = t - prev;
            prev = t;
            d
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchStats {
    pub action_changes: u64,
    pub state_changes: u64,
    pub q_a: f64,
    pub q_theta: f64,
    pub switch_times: Vec<u64>,
    /// Empty when fewer than two switches occurred.
    pub gaps: Vec<u64>,
    /// False when fewer than two switches occurred.
    pub sufficient: bool,
    pub zero_hits: u64,
}

impl SwitchStats {
    /// Gaps after a fresh switch (`i >= 2`), the ones bounded on average.
    pub fn fresh_gaps(&self) -> &[u64] {
        self.gaps.get(1..).unwrap_or(&[])
    }

    pub fn mean_fresh_gap(&self) -> Option<f64> {
        mean_u64(self.fresh_gaps())
    }

    /// Action changes among `a_1..a_{N-1}` recovered from sign switches,
    /// using `a_t = sign(l_{t+1})`. Valid when the public likelihood never
    /// hits zero.
    pub fn action_changes_via_switches(&self) -> u64 {
        self.switch_times.iter().filter(|&&t| t >= 3).count() as u64
    }
}

pub fn switch_gaps(trace: &Trace) -> Result<SwitchStats> {
    let freq = change_frequencies(trace)?;
    let mut tracker = SwitchTracker::default();
    for s in &trace.steps {
        tracker.observe(s.t, s.l_pub.0);
    }
    let sufficient = tracker.switch_times.len() >= 2;
    let gaps = if sufficient {
        gaps_from_switch_times(&tracker.switch_times)
    } else {
        Vec::new()
    };
    Ok(SwitchStats {
        action_changes: freq.action_changes,
        state_changes: freq.state_changes,
        q_a: freq.q_a,
        q_theta: freq.q_theta,
        switch_times: tracker.switch_times,
        gaps,
        sufficient,
        zero_hits: tracker.zero_hits,
    })
}

/// Which action changes count as restricted fads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictedFadRule {
    /// `a_t != a_{t-1}` with `a_{t-1} = a_{t-2}`: a change not preceded by
    /// another change.
    #[default]
    NoPrecedingChange,
    /// Additionally requires `a_{t+1} = a_t`: the change is neither preceded
    /// nor followed by another change.
    Isolated,
}

impl RestrictedFadRule {
    pub fn as_str(self) -> &'static str {
        match self {
            RestrictedFadRule::NoPrecedingChange => "no_preceding_change",
            RestrictedFadRule::Isolated => "isolated",
        }
    }
}

/// Counts restricted fads over `t = 3..=N` (`Isolated` also needs `a_{t+1}`,
/// so it stops at `N - 1`).
pub fn restricted_fad_count(actions: &[Action], rule: RestrictedFadRule) -> Result<u64> {
    if actions.len() < 3 {
        return Err(Error::TraceTooShort {
            needed: 3,
            got: actions.len(),
        });
    }
    let count = actions
        .windows(3)
        .enumerate()
        .filter(|(i, w)| {
            let base = w[2] != w[1] && w[1] == w[0];
            match rule {
                RestrictedFadRule::NoPrecedingChange => base,
                RestrictedFadRule::Isolated => {
                    base && actions.get(i + 3).is_some_and(|&next| next == w[2])
                }
            }
        })
        .count();
    Ok(count as u64)
}

pub fn trace_restricted_fad_count(trace: &Trace, rule: RestrictedFadRule) -> Result<u64> {
    let actions: Vec<Action> = trace.actions().collect();
    restricted_fad_count(&actions, rule)
}

/// One maximal run of cascade-region periods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeEpisode {
    pub enter_t: u64,
    pub enter_l: Likelihood,
    pub length: u64,
    pub exit_l: Likelihood,
}

/// Cascade episodes with a recorded exit. A run still in progress at the end
/// of the trace is dropped, since its exit value is not part of the trace.
pub fn cascade_episodes(trace: &Trace) -> Vec<CascadeEpisode> {
    let mut out = Vec::new();
    let mut open: Option<(u64, Likelihood, u64)> = None;
    for s in &trace.steps {
        if s.region.is_cascade() {
            open = Some(match open {
                Some((t, l, n)) => (t, l, n + 1),
                None => (s.t, s.l_pub, 1),
            });
        } else if let Some((enter_t, enter_l, length)) = open.take() {
            out.push(CascadeEpisode {
                enter_t,
                enter_l,
                length,
                exit_l: s.l_pub,
            });
        }
    }
    out
}

/// Histogram of episode lengths: index `k` holds the number of episodes of length `k`.
pub fn episode_length_histogram(episodes: &[CascadeEpisode]) -> Vec<u64> {
    let max = episodes.iter().map(|e| e.length).max().unwrap_or(0) as usize;
    let mut hist = vec![0; max + 1];
    for e in episodes {
        hist[e.length as usize] += 1;
    }
    hist
}

/// Longest run of consecutive cascade periods, censored runs included.
pub fn max_cascade_run(steps: &[TraceStep]) -> u64 {
    let mut best = 0;
    let mut run = 0;
    for s in steps {
        run = if s.region.is_cascade() { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

fn mean_u64(xs: &[u64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64)
    }
}

/// Per-run statistics, as produced by [`RunAccumulator`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub horizon: u64,
    pub action_changes: u64,
    pub state_changes: u64,
    pub q_a: f64,
    pub q_theta: f64,
    pub fads_emerged: bool,
    pub margin: f64,
    /// Mean of the gaps `D_i` for `i >= 2`.
    pub mean_gap: Option<f64>,
    pub gap_count: u64,
    pub restricted_fad_count: u64,
    pub isolated_fad_count: u64,
    pub max_cascade_len: u64,
    pub zero_hits: u64,
    #[serde(skip)]
    pub gaps: Vec<u64>,
}

impl SeedSummary {
    pub fn restricted(&self, rule: RestrictedFadRule) -> u64 {
        match rule {
            RestrictedFadRule::NoPrecedingChange => self.restricted_fad_count,
            RestrictedFadRule::Isolated => self.isolated_fad_count,
        }
    }
}

/// Streaming per-run statistics; memory is independent of the horizon apart
/// from the retained gap list.
#[derive(Clone, Debug)]
pub struct RunAccumulator {
    seed: u64,
    len: u64,
    first_action: Option<Action>,
    // last three actions, most recent last
    a2: Option<Action>,
    a1: Option<Action>,
    prev_theta: Option<Sign>,
    action_changes: u64,
    state_changes: u64,
    restricted: u64,
    isolated: u64,
    pending_isolated: bool,
    run: u64,
    max_run: u64,
    switches: SwitchTracker,
    gaps: Vec<u64>,
}

impl RunAccumulator {
    pub fn new(seed: u64) -> Self {
        RunAccumulator {
            seed,
            len: 0,
            first_action: None,
            a2: None,
            a1: None,
            prev_theta: None,
            action_changes: 0,
            state_changes: 0,
            restricted: 0,
            isolated: 0,
            pending_isolated: false,
            run: 0,
            max_run: 0,
            switches: SwitchTracker::default(),
            gaps: Vec::new(),
        }
    }

    pub fn push(&mut self, s: &TraceStep) {
        self.len += 1;
        let a = s.action;
        if self.first_action.is_none() {
            self.first_action = Some(a);
        }
        if let Some(prev) = self.a1 {
            if a != prev {
                self.action_changes += 1;
            }
            if self.pending_isolated {
                if a == prev {
                    self.isolated += 1;
                }
                self.pending_isolated = false;
            }
            if let Some(prev2) = self.a2 {
                if a != prev && prev == prev2 {
                    self.restricted += 1;
                    self.pending_isolated = true;
                }
            }
        }
        self.a2 = self.a1;
        self.a1 = Some(a);

        if let Some(pt) = self.prev_theta {
            if s.theta != pt {
                self.state_changes += 1;
            }
        }
        self.prev_theta = Some(s.theta);

        self.run = if s.region.is_cascade() {
            self.run + 1
        } else {
            0
        };
        self.max_run = self.max_run.max(self.run);

        let before = self.switches.last_switch();
        if self.switches.observe(s.t, s.l_pub.0) {
            // the first switch closes D_1, which is excluded
            if self.switches.switch_times.len() >= 2 {
                self.gaps.push(s.t - before);
            }
        }
    }

    pub fn finish(self) -> Result<SeedSummary> {
        if self.len < 3 {
            return Err(Error::TraceTooShort {
                needed: 3,
                got: self.len as usize,
            });
        }
        let n = (self.len - 1) as f64;
        let q_a = self.action_changes as f64 / n;
        let q_theta = self.state_changes as f64 / n;
        Ok(SeedSummary {
            seed: self.seed,
            horizon: self.len,
            action_changes: self.action_changes,
            state_changes: self.state_changes,
            q_a,
            q_theta,
            fads_emerged: q_a > q_theta,
            margin: q_a - q_theta,
            mean_gap: mean_u64(&self.gaps),
            gap_count: self.gaps.len() as u64,
            restricted_fad_count: self.restricted,
            isolated_fad_count: self.isolated,
            max_cascade_len: self.max_run,
            zero_hits: self.switches.zero_hits,
            gaps: self.gaps,
        })
    }
}

pub fn summarize_trace(trace: &Trace) -> Result<SeedSummary> {
    let mut acc = RunAccumulator::new(trace.config.seed);
    for s in &trace.steps {
        acc.push(s);
    }
    acc.finish()
}

/// Simulates and summarizes one run without storing the trace.
pub fn run_streaming(params: ModelParams, horizon: u64, seed: u64) -> Result<SeedSummary> {
    if horizon < 3 {
        return Err(Error::Horizon(horizon));
    }
    let mut acc = RunAccumulator::new(seed);
    for s in Simulator::new(params, seed).take(horizon as usize) {
        acc.push(&s);
    }
    acc.finish()
}

/// Aggregate over seeds sharing one parameter pair. Pooled quantities are
/// unweighted averages of the per-seed values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadReport {
    pub params: ModelParams,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub restricted_rule: RestrictedFadRule,
    pub q_a: f64,
    pub q_theta: f64,
    pub fads_emerged: bool,
    pub fads_emerged_all_seeds: bool,
    pub margin: f64,
    pub mean_gap: Option<f64>,
    /// Per-seed restricted fad counts averaged and rounded to the nearest integer.
    pub restricted_fad_count: u64,
    pub action_changes_mean: f64,
    pub state_changes_mean: f64,
    /// `Q_a / Q_theta`, absent when no state change occurred.
    pub ratio: Option<f64>,
    pub fad_bound_m: f64,
    pub per_seed: Vec<SeedSummary>,
}

pub fn report_from_summaries(
    params: ModelParams,
    summaries: Vec<SeedSummary>,
    rule: RestrictedFadRule,
) -> Result<FadReport> {
    let first = summaries.first().ok_or(Error::EmptyInput)?;
    let horizon = first.horizon;
    if let Some(other) = summaries.iter().find(|s| s.horizon != horizon) {
        return Err(Error::Invalid(format!(
            "mixed horizons {} and {}",
            horizon, other.horizon
        )));
    }
    let k = summaries.len() as f64;
    let avg = |f: &dyn Fn(&SeedSummary) -> f64| summaries.iter().map(f).sum::<f64>() / k;
    let q_a = avg(&|s| s.q_a);
    let q_theta = avg(&|s| s.q_theta);
    let gap_means: Vec<f64> = summaries.iter().filter_map(|s| s.mean_gap).collect();
    let mean_gap = if gap_means.is_empty() {
        None
    } else {
        Some(gap_means.iter().sum::<f64>() / gap_means.len() as f64)
    };
    let state_changes_mean = avg(&|s| s.state_changes as f64);
    let action_changes_mean = avg(&|s| s.action_changes as f64);
    Ok(FadReport {
        params,
        horizon,
        seeds: summaries.iter().map(|s| s.seed).collect(),
        restricted_rule: rule,
        q_a,
        q_theta,
        fads_emerged: q_a > q_theta,
        fads_emerged_all_seeds: summaries.iter().all(|s| s.fads_emerged),
        margin: q_a - q_theta,
        mean_gap,
        restricted_fad_count: avg(&|s| s.restricted(rule) as f64).round() as u64,
        action_changes_mean,
        state_changes_mean,
        ratio: (q_theta > 0.0).then(|| q_a / q_theta),
        fad_bound_m: Model::new(params).constants.fad_bound_m,
        per_seed: summaries,
    })
}

pub fn fad_report(traces: &[Trace], rule: RestrictedFadRule) -> Result<FadReport> {
    let first = traces.first().ok_or(Error::EmptyInput)?;
    let params = first.config.params;
    for t in traces {
        if t.config.params != params {
            return Err(Error::MixedParams {
                first: (params.alpha(), params.epsilon()),
                other: (t.config.params.alpha(), t.config.params.epsilon()),
            });
        }
    }
    let summaries = traces
        .iter()
        .map(summarize_trace)
        .collect::<Result<Vec<_>>>()?;
    report_from_summaries(params, summaries, rule)
}

/// Runs every seed in parallel and aggregates; output order follows `seeds`.
pub fn run_seeds(
    params: ModelParams,
    horizon: u64,
    seeds: &[u64],
    rule: RestrictedFadRule,
) -> Result<FadReport> {
    let summaries = seeds
        .par_iter()
        .map(|&seed| run_streaming(params, horizon, seed))
        .collect::<Result<Vec<_>>>()?;
    report_from_summaries(params, summaries, rule)
}

/// Trend of one raw moment of the gap sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTrend {
    pub order: u32,
    /// `(window size, moment over the first window-size gaps)`.
    pub expanding: Vec<(usize, f64)>,
    /// OLS slope of per-block moments against block index.
    pub slope: f64,
    /// One-sided p-value for a positive slope.
    pub p_positive: f64,
    pub non_diverging: bool,
}

/// Diagnoses whether the first four raw moments of the gaps stay bounded.
///
/// Expanding-window moments are reported for inspection. The trend test
/// regresses moments of `blocks` disjoint consecutive blocks on the block
/// index, since overlapping windows are too correlated for a slope test. A
/// moment is flagged diverging when the slope is positive at the 5% level.
pub fn moment_stability(gaps: &[u64], blocks: usize) -> Result<Vec<MomentTrend>> {
    if blocks < 3 || gaps.len() < blocks * 2 {
        return Err(Error::Invalid(format!(
            "need at least {} gaps for {} blocks, got {}",
            blocks * 2,
            blocks,
            gaps.len()
        )));
    }
    let size = gaps.len() / blocks;
    let raw =
        |xs: &[u64], k: i32| xs.iter().map(|&x| (x as f64).powi(k)).sum::<f64>() / xs.len() as f64;
    (1..=4u32)
        .map(|order| {
            let k = order as i32;
            let expanding = (1..=blocks)
                .map(|j| (j * size, raw(&gaps[..j * size], k)))
                .collect();
            let ys: Vec<f64> = (0..blocks)
                .map(|j| raw(&gaps[j * size..(j + 1) * size], k))
                .collect();
            let (slope, se) = ols_slope(&ys);
            let df = (blocks - 2) as f64;
            let p_positive = if se > 0.0 {
                let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Invalid(e.to_string()))?;
                1.0 - t.cdf(slope / se)
            } else if slope > 0.0 {
                0.0
            } else {
                1.0
            };
            Ok(MomentTrend {
                order,
                expanding,
                slope,
                p_positive,
                non_diverging: p_positive >= 0.05,
            })
        })
        .collect()
}

/// Slope and its standard error for `ys` regressed on `0..len`.
fn ols_slope(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let xbar = (n - 1.0) / 2.0;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = (0..ys.len()).map(|i| (i as f64 - xbar).powi(2)).sum();
    let sxy: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (i as f64 - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let sse: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (y - ybar - slope * (i as f64 - xbar)).powi(2))
        .sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    (slope, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Region;
    use crate::sim::{simulate, RunConfig};
    use proptest::prelude::*;

    use Sign::{Down as D, Up as U};

    fn step(t: u64, theta: Sign, action: Sign, l: f64) -> TraceStep {
        TraceStep {
            t,
            theta,
            signal: action,
            l_pub: Likelihood(l),
            l_post: Likelihood(l),
            action,
            region: Region::Learning,
        }
    }

    fn synthetic(thetas: &[Sign], actions: &[Sign], ls: &[f64]) -> Trace {
        let params = ModelParams::new(0.8, 0.05).unwrap();
        let steps = (0..actions.len())
            .map(|i| step(i as u64 + 1, thetas[i], actions[i], ls[i]))
            .collect();
        Trace {
            config: RunConfig {
                params,
                horizon: actions.len() as u64,
                seed: 0,
            },
            steps,
        }
    }

    fn sim(a: f64, e: f64, n: u64, seed: u64) -> Trace {
        simulate(&RunConfig::new(ModelParams::new(a, e).unwrap(), n, seed).unwrap()).unwrap()
    }

    #[test]
    fn frequency_counts() {
        let t = synthetic(&[U, U, U, D], &[U, U, D, U], &[0.0, 1.0, 1.0, 1.0]);
        let f = change_frequencies(&t).unwrap();
        assert_eq!(f.n, 3);
        assert!((f.q_a - 2.0 / 3.0).abs() < 1e-15);
        assert!((f.q_theta - 1.0 / 3.0).abs() < 1e-15);
        let short = synthetic(&[U], &[U], &[0.0]);
        assert!(matches!(
            change_frequencies(&short),
            Err(Error::TraceTooShort { .. })
        ));
    }

    #[test]
    fn switch_times_and_gaps() {
        let t = synthetic(&[U; 5], &[U; 5], &[1.0, 1.0, -1.0, -1.0, 1.0]);
        let s = switch_gaps(&t).unwrap();
        assert_eq!(s.switch_times, vec![3, 5]);
        assert_eq!(s.gaps, vec![3, 2]);
        assert!(s.sufficient);
        assert_eq!(s.gaps.iter().sum::<u64>(), 5);

        let t = synthetic(&[U; 4], &[U; 4], &[1.0, 1.0, -1.0, -1.0]);
        let s = switch_gaps(&t).unwrap();
        assert!(!s.sufficient);
        assert!(s.gaps.is_empty());
        assert_eq!(s.switch_times, vec![3]);
    }

    #[test]
    fn zero_likelihood_keeps_previous_sign() {
        let t = synthetic(&[U; 6], &[U; 6], &[0.0, 1.0, 0.0, 1.0, 0.0, -1.0]);
        let s = switch_gaps(&t).unwrap();
        assert_eq!(s.switch_times, vec![6]);
        assert_eq!(s.zero_hits, 2);
    }

    #[test]
    fn restricted_fads() {
        assert_eq!(
            restricted_fad_count(&[U, D, U, U, D], RestrictedFadRule::NoPrecedingChange).unwrap(),
            1
        );
        assert_eq!(
            restricted_fad_count(&[U, U, U, U], RestrictedFadRule::NoPrecedingChange).unwrap(),
            0
        );
        assert_eq!(
            restricted_fad_count(&[U, U, D, D, U, D], RestrictedFadRule::Isolated).unwrap(),
            1
        );
        assert_eq!(
            restricted_fad_count(&[U, U, D, D, U, D], RestrictedFadRule::NoPrecedingChange)
                .unwrap(),
            2
        );
        assert!(restricted_fad_count(&[U, D], RestrictedFadRule::NoPrecedingChange).is_err());
    }

    #[test]
    fn episodes() {
        let t = sim(0.8, 0.05, 200, 9);
        let m = t.model();
        let c = m.constants;
        let eps = cascade_episodes(&t);
        assert!(!eps.is_empty());
        for e in &eps {
            assert!(e.length >= 1 && e.length <= c.cap_k_floor);
            assert!(e.enter_l.abs() >= c.c_alpha);
            assert!(e.exit_l.abs() < c.c_alpha);
            assert_eq!(e.exit_l.sign(), e.enter_l.sign());
        }
        let hist = episode_length_histogram(&eps);
        assert_eq!(hist.iter().sum::<u64>(), eps.len() as u64);

        let flat = synthetic(&[U; 4], &[U; 4], &[0.0, 0.5, -0.5, 0.2]);
        assert!(cascade_episodes(&flat).is_empty());
    }

    #[test]
    fn streaming_matches_direct() {
        for (a, e, seed) in [(0.8, 0.05, 1), (0.6, 0.02, 2), (0.9, 0.001, 3)] {
            let t = sim(a, e, 30_000, seed);
            let s = summarize_trace(&t).unwrap();
            let f = change_frequencies(&t).unwrap();
            let g = switch_gaps(&t).unwrap();
            assert_eq!(s.action_changes, f.action_changes);
            assert_eq!(s.state_changes, f.state_changes);
            assert_eq!(s.gaps, g.fresh_gaps());
            assert_eq!(
                s.restricted_fad_count,
                trace_restricted_fad_count(&t, RestrictedFadRule::NoPrecedingChange).unwrap()
            );
            assert_eq!(
                s.isolated_fad_count,
                trace_restricted_fad_count(&t, RestrictedFadRule::Isolated).unwrap()
            );
            assert_eq!(s.max_cascade_len, max_cascade_run(&t.steps));
            let streamed = run_streaming(t.config.params, 30_000, seed).unwrap();
            assert_eq!(streamed, s);
        }
    }

    #[test]
    fn action_changes_reconstructed_from_switches() {
        for seed in 0..20 {
            let t = sim(0.7, 0.03, 5_000, seed);
            let g = switch_gaps(&t).unwrap();
            let direct = count_changes(t.actions().take(t.len() - 1));
            if g.zero_hits == 0 {
                assert_eq!(g.action_changes_via_switches(), direct, "seed {seed}");
            }
        }
    }

    #[test]
    fn report_rejects_mixed_and_empty() {
        let a = sim(0.8, 0.05, 100, 1);
        let b = sim(0.7, 0.05, 100, 1);
        assert!(matches!(
            fad_report(&[a.clone(), b], RestrictedFadRule::default()),
            Err(Error::MixedParams { .. })
        ));
        assert!(matches!(
            fad_report(&[], RestrictedFadRule::default()),
            Err(Error::EmptyInput)
        ));
        let r = fad_report(
            &[a.clone(), sim(0.8, 0.05, 100, 2)],
            RestrictedFadRule::default(),
        )
        .unwrap();
        assert_eq!(r.seeds, vec![1, 2]);
        assert_eq!(r.fads_emerged, r.margin > 0.0);
        let c = sim(0.8, 0.05, 50, 3);
        assert!(fad_report(&[a, c], RestrictedFadRule::default()).is_err());
    }

    #[test]
    fn pooled_gap_mean_below_bound() {
        let p = ModelParams::new(0.8, 0.01).unwrap();
        let seeds: Vec<u64> = (0..32).collect();
        let r = run_seeds(p, 100_000, &seeds, RestrictedFadRule::default()).unwrap();
        let g = r.mean_gap.unwrap();
        assert!(
            g < 60.7 && g < r.fad_bound_m && r.fad_bound_m < 100.0,
            "{g}"
        );
        assert!(r.fads_emerged_all_seeds);
        assert!(
            (r.action_changes_mean - 3500.0).abs() < 350.0,
            "{}",
            r.action_changes_mean
        );
    }

    #[test]
    fn restricted_count_near_reported_value() {
        let p = ModelParams::new(0.8, 0.05).unwrap();
        let seeds: Vec<u64> = (0..8).collect();
        let r = run_seeds(p, 100_000, &seeds, RestrictedFadRule::NoPrecedingChange).unwrap();
        assert!(
            (7400..=9000).contains(&r.restricted_fad_count),
            "{}",
            r.restricted_fad_count
        );
        assert!(r.restricted_fad_count as f64 > r.state_changes_mean);
        // the stricter reading lands far from the reported figure
        let alt =
            report_from_summaries(p, r.per_seed.clone(), RestrictedFadRule::Isolated).unwrap();
        assert!(
            alt.restricted_fad_count < 6000,
            "{}",
            alt.restricted_fad_count
        );
    }

    #[test]
    fn state_change_frequency_converges() {
        for (a, e) in [(0.8, 0.05), (0.55, 0.0247), (0.95, 0.00475)] {
            let p = ModelParams::new(a, e).unwrap();
            let seeds: Vec<u64> = (0..16).collect();
            let r = run_seeds(p, 100_000, &seeds, RestrictedFadRule::default()).unwrap();
            let n = 16.0 * 99_999.0;
            let se = (e * (1.0 - e) / n).sqrt();
            assert!((r.q_theta - e).abs() < 3.0 * se, "{a} {e} {}", r.q_theta);
        }
    }

    #[test]
    fn gap_moments_do_not_diverge() {
        let s = run_streaming(ModelParams::new(0.8, 0.05).unwrap(), 400_000, 17).unwrap();
        let trends = moment_stability(&s.gaps, 10).unwrap();
        assert_eq!(trends.len(), 4);
        for tr in &trends {
            assert!(tr.non_diverging, "order {} p={}", tr.order, tr.p_positive);
        }
        assert!(moment_stability(&s.gaps[..5], 10).is_err());
    }

    #[test]
    fn ols_slope_recovers_line() {
        let ys: Vec<f64> = (0..10).map(|i| 2.0 + 0.5 * i as f64).collect();
        let (b, se) = ols_slope(&ys);
        assert!((b - 0.5).abs() < 1e-12);
        assert!(se < 1e-9);
    }

    proptest! {
        #[test]
        fn gaps_sum_to_last_switch(times in proptest::collection::btree_set(1u64..10_000, 2..50)) {
            let times: Vec<u64> = times.into_iter().collect();
            let gaps = gaps_from_switch_times(&times);
            prop_assert!(gaps.iter().all(|&d| d > 0));
            prop_assert_eq!(gaps.iter().sum::<u64>(), *times.last().unwrap());
        }

        #[test]
        fn frequencies_in_unit_interval(seed in 0u64..1000, n in 3u64..500) {
            let t = sim(0.7, 0.05, n, seed);
            let f = change_frequencies(&t).unwrap();
            prop_assert!((0.0..=1.0).contains(&f.q_a));
            prop_assert!((0.0..=1.0).contains(&f.q_theta));
        }
    }
}
