//! Detectors of the active set (and data) from a frame of observations.
//!
//! Dynamic detectors work on the trellis whose states are the slot states of
//! the detection universe: the traffic universe, doubled by the reference
//! user's bit when the channel has one. The branch log-mass from `s′` to `s`
//! is `ln f(C | B) − N|C| ln 2 (− ln 2 for the reference bit)`, where `B` and
//! `C` are the active sets of `s′` and `s`; it never depends on the previous
//! data, so every max or sum over predecessors first collapses each mask block.
//!
//! Ties are always broken toward the lowest canonical state index.

use std::sync::Arc;

use crate::channel::{ChannelModel, Observation};
use crate::error::{Error, Result};
use crate::rst::{log_sum_exp, normalize, ActiveSet, SetDensity, SlotState, StateSpace, Universe};
use crate::traffic::{TrafficModel, TransitionTable};

/// Observations of one frame and, for trained acquisition, the known symbol
/// of every user at every slot (length `K′` per slot).
#[derive(Clone, Copy, Debug)]
pub struct Frame<'a> {
    pub observations: &'a [Observation],
    pub training: Option<&'a [Vec<f64>]>,
}

impl<'a> Frame<'a> {
    pub fn blind(observations: &'a [Observation]) -> Self {
        Frame {
            observations,
            training: None,
        }
    }

    pub fn trained(observations: &'a [Observation], training: &'a [Vec<f64>]) -> Self {
        Frame {
            observations,
            training: Some(training),
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    fn training_at(&self, t: usize) -> Option<&'a [f64]> {
        self.training.map(|tr| tr[t].as_slice())
    }

    fn validate(&self, channel: &ChannelModel) -> Result<()> {
        if let Some(tr) = self.training {
            if tr.len() != self.observations.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} training vectors for {} observations",
                    tr.len(),
                    self.observations.len()
                )));
            }
            if tr.iter().any(|v| v.len() != channel.dim()) {
                return Err(Error::LengthMismatch("training vector length differs from K′".into()));
            }
        }
        if self.observations.iter().any(|y| y.0.len() != channel.dim()) {
            return Err(Error::LengthMismatch("observation length differs from K′".into()));
        }
        Ok(())
    }
}

/// Traffic model with its transition table precomputed.
#[derive(Clone, Debug)]
pub struct Kernel {
    traffic: TrafficModel,
    table: TransitionTable,
}

impl Kernel {
    pub fn new(traffic: &TrafficModel) -> Result<Self> {
        Ok(Kernel {
            traffic: *traffic,
            table: traffic.transition_table()?,
        })
    }

    pub fn traffic(&self) -> &TrafficModel {
        &self.traffic
    }

    pub fn table(&self) -> &TransitionTable {
        &self.table
    }
}

/// Universe of the detector's states for this traffic model and channel.
pub fn detection_universe(traffic: &TrafficModel, channel: &ChannelModel) -> Result<Universe> {
    if traffic.users() != channel.interferers() {
        return Err(Error::Incompatible(format!(
            "traffic model has {} users, channel has {} interferers",
            traffic.users(),
            channel.interferers()
        )));
    }
    if traffic.symbols() > 1 {
        return Err(Error::Incompatible(
            "the CDMA observation model carries one symbol per user per slot".into(),
        ));
    }
    traffic.universe().with_reference(channel.has_reference())
}

/// Additive branch term of entering each state: data and reference-bit priors.
fn entry_terms(space: &StateSpace) -> Vec<f64> {
    let u = space.universe();
    let ref_term = if u.has_reference() { -std::f64::consts::LN_2 } else { 0.0 };
    let mut out = vec![0.0; space.len()];
    for m in 0..u.set_count() as u32 {
        let set = ActiveSet::from_mask(m);
        let v = -((u.symbols() * set.len()) as f64) * std::f64::consts::LN_2 + ref_term;
        out[space.block(set)].fill(v);
    }
    out
}

/// Log-likelihood of every state of `space` for one observation.
pub fn slot_log_emission(
    space: &StateSpace,
    channel: &ChannelModel,
    y: &Observation,
    training: Option<&[f64]>,
) -> Vec<f64> {
    let prepared = channel.prepare(y);
    let mut buf = vec![0.0; channel.dim()];
    (0..space.len())
        .map(|i| {
            channel.fill_symbols(&space.state_at(i), training, &mut buf);
            channel.log_likelihood_prepared(&prepared, &buf)
        })
        .collect()
}

/// Prediction `f(X_{t+1} | y_{1:t}) = Σ_{X_t} f(X_{t+1} | X_t) f(X_t | y_{1:t})`
/// onto `target`. Only the active-set marginal of `posterior` matters because
/// data and reference bits are redrawn every slot.
pub fn bayes_predict_into(posterior: &SetDensity, kernel: &Kernel, target: Arc<StateSpace>) -> Result<SetDensity> {
    let u = target.universe();
    if posterior.universe().users() != kernel.traffic.users() || u.users() != kernel.traffic.users() {
        return Err(Error::UniverseMismatch);
    }
    let sets = u.set_count();
    let marginal = posterior.identity_marginal();
    let from = marginal.log_mass();
    let mut scratch = vec![0.0; sets];
    let mut predicted_sets = vec![f64::NEG_INFINITY; sets];
    for (c, slot) in predicted_sets.iter_mut().enumerate() {
        let to = ActiveSet::from_mask(c as u32);
        for (b, s) in scratch.iter_mut().enumerate() {
            *s = from[b] + kernel.table.log(ActiveSet::from_mask(b as u32), to);
        }
        *slot = log_sum_exp(&scratch);
    }
    let entry = entry_terms(&target);
    let mut table = entry;
    for (c, v) in predicted_sets.iter().enumerate() {
        for i in target.block(ActiveSet::from_mask(c as u32)) {
            table[i] += v;
        }
    }
    normalize(target, table)
}

/// [`bayes_predict_into`] on the posterior's own state space.
pub fn bayes_predict(posterior: &SetDensity, kernel: &Kernel) -> Result<SetDensity> {
    bayes_predict_into(posterior, kernel, posterior.space().clone())
}

/// Measurement update `f(X | y_{1:t}) ∝ f(y_t | X) f(X | y_{1:t−1})`.
pub fn bayes_update(
    predicted: &SetDensity,
    y: &Observation,
    channel: &ChannelModel,
    training: Option<&[f64]>,
) -> Result<SetDensity> {
    let emit = slot_log_emission(predicted.space(), channel, y, training);
    update_with(predicted, &emit)
}

fn update_with(predicted: &SetDensity, emit: &[f64]) -> Result<SetDensity> {
    let table = predicted
        .log_mass()
        .iter()
        .zip(emit)
        .map(|(p, e)| if *p == f64::NEG_INFINITY { *p } else { p + e })
        .collect();
    normalize(predicted.space().clone(), table)
}

/// Predicted and filtered densities at one slot (`t` is 1-based).
#[derive(Clone, Debug)]
pub struct FilterState {
    pub t: usize,
    pub predicted: SetDensity,
    pub posterior: SetDensity,
}

/// Runs the causal random-set Bayes filter over a frame. `prior0` is the
/// density of the active set before the first slot.
pub fn bayes_filter(
    frame: Frame<'_>,
    kernel: &Kernel,
    channel: &ChannelModel,
    prior0: &SetDensity,
) -> Result<Vec<FilterState>> {
    frame.validate(channel)?;
    let space = StateSpace::shared(detection_universe(&kernel.traffic, channel)?);
    let mut states: Vec<FilterState> = Vec::with_capacity(frame.len());
    for (t, y) in frame.observations.iter().enumerate() {
        let previous = states.last().map_or(prior0, |s| &s.posterior);
        let predicted = bayes_predict_into(previous, kernel, space.clone())?;
        let emit = slot_log_emission(&space, channel, y, frame.training_at(t));
        let posterior = update_with(&predicted, &emit)?;
        states.push(FilterState {
            t: t + 1,
            predicted,
            posterior,
        });
    }
    Ok(states)
}

/// Per-slot causal MAP estimates `argmax f(X_t | y_{1:t})`.
pub fn causal_map_sequence(
    frame: Frame<'_>,
    kernel: &Kernel,
    channel: &ChannelModel,
    prior0: &SetDensity,
) -> Result<Vec<SlotState>> {
    Ok(bayes_filter(frame, kernel, channel, prior0)?
        .iter()
        .map(|f| f.posterior.map_state())
        .collect())
}

/// Trellis of slot states over one frame.
#[derive(Clone, Debug)]
pub struct Trellis<'k> {
    space: Arc<StateSpace>,
    kernel: &'k Kernel,
    /// `ln f(X_1)`, the one-step prediction of the initial density.
    log_first: Vec<f64>,
    /// Data and reference-bit part of every branch entering a state.
    log_entry: Vec<f64>,
    log_emit: Vec<Vec<f64>>,
}

impl<'k> Trellis<'k> {
    pub fn build(
        frame: Frame<'_>,
        kernel: &'k Kernel,
        channel: &ChannelModel,
        prior0: &SetDensity,
    ) -> Result<Self> {
        frame.validate(channel)?;
        let space = StateSpace::shared(detection_universe(&kernel.traffic, channel)?);
        let first = bayes_predict_into(prior0, kernel, space.clone())?;
        let log_emit = frame
            .observations
            .iter()
            .enumerate()
            .map(|(t, y)| slot_log_emission(&space, channel, y, frame.training_at(t)))
            .collect();
        Ok(Trellis {
            log_entry: entry_terms(&space),
            space,
            kernel,
            log_first: first.log_mass().to_vec(),
            log_emit,
        })
    }

    pub fn frames(&self) -> usize {
        self.log_emit.len()
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn log_emit(&self, t: usize, state: usize) -> f64 {
        self.log_emit[t][state]
    }

    /// `ln f(s | s′)` for the full slot states.
    pub fn log_branch(&self, from: usize, to: usize) -> f64 {
        self.kernel.table.log(self.space.set_at(from), self.space.set_at(to)) + self.log_entry[to]
    }

    /// Joint log APP (up to a constant) of a state path over the whole frame.
    pub fn path_score(&self, path: &[usize]) -> f64 {
        let mut score = self.log_first[path[0]] + self.log_emit[0][path[0]];
        for t in 1..path.len() {
            score += self.log_branch(path[t - 1], path[t]) + self.log_emit[t][path[t]];
        }
        score
    }

    /// Max-sum pass over slots `start..end` (0-based, end exclusive) from the
    /// initial log density `initial` at slot `start`. Returns the best path
    /// and its score.
    pub fn viterbi_range(&self, start: usize, end: usize, initial: &[f64]) -> (Vec<usize>, f64) {
        let n = self.space.len();
        let sets = self.space.universe().set_count();
        let mut delta: Vec<f64> = initial
            .iter()
            .zip(&self.log_emit[start])
            .map(|(p, e)| p + e)
            .collect();
        // back[t][c] = survivor state for every state whose set is c
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(end - start);
        let mut block_best = vec![(f64::NEG_INFINITY, 0usize); sets];
        let mut next = vec![0.0; n];
        for t in start + 1..end {
            for (m, slot) in block_best.iter_mut().enumerate() {
                let range = self.space.block(ActiveSet::from_mask(m as u32));
                let mut best = (delta[range.start], range.start);
                for i in range {
                    if delta[i] > best.0 {
                        best = (delta[i], i);
                    }
                }
                *slot = best;
            }
            let mut pointers = vec![0usize; sets];
            for (c, ptr) in pointers.iter_mut().enumerate() {
                let to = ActiveSet::from_mask(c as u32);
                let mut best = (f64::NEG_INFINITY, block_best[0].1);
                let mut found = false;
                for (b, (v, idx)) in block_best.iter().enumerate() {
                    let cand = v + self.kernel.table.log(ActiveSet::from_mask(b as u32), to);
                    if !found || cand > best.0 {
                        best = (cand, *idx);
                        found = true;
                    }
                }
                *ptr = best.1;
                for i in self.space.block(to) {
                    next[i] = best.0 + self.log_entry[i] + self.log_emit[t][i];
                }
            }
            back.push(pointers);
            std::mem::swap(&mut delta, &mut next);
        }
        let mut last = 0;
        for (i, v) in delta.iter().enumerate() {
            if *v > delta[last] {
                last = i;
            }
        }
        let score = delta[last];
        let mut path = vec![last; end - start];
        for k in (1..end - start).rev() {
            let set = self.space.set_at(path[k]).mask() as usize;
            path[k - 1] = back[k - 1][set];
        }
        (path, score)
    }

    /// Exact sequence-MAP path over the frame.
    pub fn viterbi(&self) -> (Vec<usize>, f64) {
        self.viterbi_range(0, self.frames(), &self.log_first)
    }
}

/// Sequence-MAP detection with the Viterbi algorithm; decisions at each slot
/// come from the single best path.
pub fn viterbi_sequence_map(
    frame: Frame<'_>,
    kernel: &Kernel,
    channel: &ChannelModel,
    prior0: &SetDensity,
) -> Result<Vec<SlotState>> {
    let trellis = Trellis::build(frame, kernel, channel, prior0)?;
    let (path, _) = trellis.viterbi();
    Ok(path.iter().map(|&i| trellis.space.state_at(i)).collect())
}

/// Sliding-window Viterbi: slot `t` is decided from the best path over the
/// observations in `[t − delta, t + delta]` (clipped to the frame), starting
/// from the causal predicted density at the window's first slot.
pub fn sliding_window_viterbi(
    frame: Frame<'_>,
    kernel: &Kernel,
    channel: &ChannelModel,
    prior0: &SetDensity,
    delta: usize,
) -> Result<Vec<SlotState>> {
    let trellis = Trellis::build(frame, kernel, channel, prior0)?;
    let filter = bayes_filter(frame, kernel, channel, prior0)?;
    let frames = trellis.frames();
    (0..frames)
        .map(|t| {
            let start = t.saturating_sub(delta);
            let end = (t + delta + 1).min(frames);
            let (path, _) = trellis.viterbi_range(start, end, filter[start].predicted.log_mass());
            Ok(trellis.space.state_at(path[t - start]))
        })
        .collect()
}

/// MAP (or, with a flat prior, ML) detection of a constant active set and
/// per-slot data over a frame.
///
/// `prior` is a one-slot density over interferer states. Its active-set
/// marginal is the prior of the identities. For blind frames the data of
/// every slot are free; a prior carrying one symbol per user also weighs them
/// by its conditional over data patterns, while an identity-only prior leaves
/// them flat (joint ML over data). The reference bit, when present, is unknown
/// and equiprobable. With trained frames the data come from the training
/// symbols.
pub fn static_map_detect(frame: Frame<'_>, prior: &SetDensity, channel: &ChannelModel) -> Result<Vec<SlotState>> {
    frame.validate(channel)?;
    let pu = prior.universe();
    if pu.users() != channel.interferers() {
        return Err(Error::Incompatible(format!(
            "prior over {} users, channel has {} interferers",
            pu.users(),
            channel.interferers()
        )));
    }
    if pu.has_reference() {
        return Err(Error::InvalidParameter("prior must not carry the reference bit".into()));
    }
    if pu.symbols() > 1 {
        return Err(Error::Incompatible("at most one symbol per slot".into()));
    }
    let symbols = usize::from(frame.training.is_none());
    let space = StateSpace::shared(Universe::new(pu.users(), symbols)?.with_reference(channel.has_reference())?);
    let id_prior = prior.identity_marginal();
    let prior_space = prior.space();
    // conditional log-probability of each state's data given its set
    let conditional: Vec<f64> = (0..space.len())
        .map(|i| {
            let st = space.state_at(i);
            if symbols == 0 || pu.symbols() == 0 {
                0.0
            } else {
                let j = prior_space.index_of(&SlotState::new(st.active, st.data, None));
                prior.log_mass()[j] - id_prior.log_mass()[st.active.mask() as usize]
            }
        })
        .collect();
    let emits: Vec<Vec<f64>> = frame
        .observations
        .iter()
        .enumerate()
        .map(|(t, y)| slot_log_emission(&space, channel, y, frame.training_at(t)))
        .collect();

    let mut best: Option<(f64, ActiveSet, Vec<usize>)> = None;
    for m in 0..space.universe().set_count() as u32 {
        let set = ActiveSet::from_mask(m);
        let lp = id_prior.log_mass()[m as usize];
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let mut score = lp;
        let mut picks = Vec::with_capacity(emits.len());
        for emit in &emits {
            let range = space.block(set);
            let mut pick = range.start;
            let mut value = f64::NEG_INFINITY;
            for i in range {
                let v = emit[i] + conditional[i];
                if v > value {
                    value = v;
                    pick = i;
                }
            }
            score += value;
            picks.push(pick);
        }
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, set, picks));
        }
    }
    let (_, _, picks) = best.ok_or(Error::NumericalCollapse)?;
    Ok(picks.iter().map(|&i| space.state_at(i)).collect())
}

/// Classic multiuser ML: every interferer assumed active, data (and the
/// reference bit) chosen by maximum likelihood for one slot.
pub fn classic_all_active_ml(y: &Observation, channel: &ChannelModel, training: Option<&[f64]>) -> Result<SlotState> {
    let k = channel.interferers();
    let symbols = if training.is_some() { 0 } else { 1 };
    let space = StateSpace::new(Universe::new(k, symbols)?.with_reference(channel.has_reference())?);
    let emit = slot_log_emission(&space, channel, y, training);
    let mut pick = space.block(ActiveSet::full(k)).start;
    for i in space.block(ActiveSet::full(k)) {
        if emit[i] > emit[pick] {
            pick = i;
        }
    }
    Ok(space.state_at(pick))
}
