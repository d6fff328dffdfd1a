//! Brute-force oracles shared by the integration tests.
//!
//! They enumerate whole state sequences with the closed-form traffic model
//! and direct likelihood calls, without any of the detectors' tables.

#![allow(dead_code)]

use rand::Rng;
use rsmud_core::channel::{ChannelModel, Observation, SignatureSet, Spreading};
use rsmud_core::rst::{log_sum_exp, SetDensity, SlotState, StateSpace, Universe};
use rsmud_core::traffic::TrafficModel;

/// A random small dynamic instance.
pub struct Instance {
    pub traffic: TrafficModel,
    pub channel: ChannelModel,
    pub prior0: SetDensity,
    pub observations: Vec<Observation>,
    pub training: Option<Vec<Vec<f64>>>,
}

impl Instance {
    pub fn random<R: Rng>(rng: &mut R, max_users: usize, max_frames: usize) -> Self {
        let users = rng.random_range(1..=max_users);
        let trained = rng.random_bool(0.5);
        let reference = rng.random_bool(0.5);
        let symbols = usize::from(!trained);
        let alpha = rng.random_range(0.05..0.95);
        let mu = rng.random_range(0.05..0.95);
        let traffic = TrafficModel::new(users, alpha, mu, symbols).unwrap();
        let dim = users + usize::from(reference);
        let idx: Vec<usize> = (0..dim).collect();
        let sig = SignatureSet::from_family(Spreading::MSequence, 7, &idx).unwrap();
        let amps = (0..dim).map(|_| rng.random_range(0.5..2.0)).collect();
        let channel = ChannelModel::new(&sig, amps, rng.random_range(0.3..2.0), reference).unwrap();
        // random prior over the traffic universe
        let space = traffic.space();
        let masses: Vec<f64> = (0..space.len()).map(|_| rng.random_range(0.01..1.0)).collect();
        let prior0 = SetDensity::from_masses(space, &masses).unwrap();
        let frames = rng.random_range(1..=max_frames);
        let observations = (0..frames)
            .map(|_| Observation((0..dim).map(|_| rng.random_range(-2.5..2.5)).collect()))
            .collect();
        let training = trained.then(|| {
            (0..frames)
                .map(|_| (0..dim).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect())
                .collect()
        });
        Instance {
            traffic,
            channel,
            prior0,
            observations,
            training,
        }
    }

    pub fn detection_space(&self) -> StateSpace {
        let u = Universe::new(self.traffic.users(), self.traffic.symbols())
            .unwrap()
            .with_reference(self.channel.has_reference())
            .unwrap();
        StateSpace::new(u)
    }

    fn log_entry(&self, s: &SlotState) -> f64 {
        let mut v = -((self.traffic.symbols() * s.active.len()) as f64) * std::f64::consts::LN_2;
        if self.channel.has_reference() {
            v -= std::f64::consts::LN_2;
        }
        v
    }

    /// `ln f(X_1 = s)` from the prior of `X_0`.
    fn log_first(&self, s: &SlotState) -> f64 {
        let prior_space = self.prior0.space();
        let terms: Vec<f64> = (0..prior_space.len())
            .map(|i| {
                self.prior0.log_mass()[i] + self.traffic.log_transition_set(s.active, prior_space.set_at(i))
            })
            .collect();
        log_sum_exp(&terms) + self.log_entry(s)
    }

    fn log_emit(&self, t: usize, s: &SlotState) -> f64 {
        let tr = self.training.as_ref().map(|v| v[t].as_slice());
        self.channel.log_likelihood_state(&self.observations[t], s, tr)
    }

    /// Joint log-density of the first `path.len()` slots and observations.
    pub fn log_joint(&self, states: &[SlotState], path: &[usize]) -> f64 {
        let mut v = self.log_first(&states[path[0]]) + self.log_emit(0, &states[path[0]]);
        for t in 1..path.len() {
            let (a, b) = (&states[path[t - 1]], &states[path[t]]);
            v += self.traffic.log_transition_set(b.active, a.active) + self.log_entry(b) + self.log_emit(t, b);
        }
        v
    }

    /// Exact `f(X_t | y_{1:t})` by summing over all sequences of length `t`.
    pub fn exhaustive_marginal(&self, t: usize) -> Vec<f64> {
        let space = self.detection_space();
        let states: Vec<SlotState> = space.states().collect();
        let n = states.len();
        let mut per_last: Vec<Vec<f64>> = vec![Vec::new(); n];
        for_each_path(n, t, |path| {
            per_last[path[t - 1]].push(self.log_joint(&states, path));
        });
        let logs: Vec<f64> = per_last.iter().map(|v| log_sum_exp(v)).collect();
        let z = log_sum_exp(&logs);
        logs.iter().map(|l| (l - z).exp()).collect()
    }

    /// Highest-scoring full-frame path (lowest lexicographic path on ties).
    pub fn brute_force_path(&self) -> Vec<usize> {
        let space = self.detection_space();
        let states: Vec<SlotState> = space.states().collect();
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for_each_path(states.len(), self.observations.len(), |path| {
            let v = self.log_joint(&states, path);
            if best.1.is_empty() || v > best.0 {
                best = (v, path.to_vec());
            }
        });
        best.1
    }
}

/// Calls `f` on every path of `len` indices below `n`, lexicographically.
pub fn for_each_path(n: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0usize; len];
    loop {
        f(&path);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            path[i] += 1;
            if path[i] < n {
                break;
            }
            path[i] = 0;
        }
    }
}

/// True when `a` and `b` are at most `k` standard errors apart.
pub fn within_sigma(a: f64, b: f64, stderr: f64, k: f64) -> bool {
    (a - b).abs() <= k * stderr
}
