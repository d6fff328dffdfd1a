//! Pairwise error probabilities and the bounds built from them.
//!
//! For a true hypothesis `X` and a competitor `X̂` over `T` slots, with
//! `d_t = b_t(X) − b_t(X̂)`, the pairwise metric gap is Gaussian with mean
//! `ξ_T = Σ_t d_t′ A R A d_t` and variance `2 N0 ξ_T`, so
//! `P(X → X̂) = Q((ξ_T − η)/√(2 N0 ξ_T))` where `η` is `N0` times the log prior
//! ratio of the competitor over the truth (zero for ML).

use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::ChannelModel;
use crate::detect::{bayes_predict_into, Kernel};
use crate::error::{Error, Result};
use crate::rst::{antipodal, ActiveSet, SetDensity, StateSpace};
use crate::traffic::{TrafficModel, TransitionTable};

/// Gaussian tail `Q(x) = ½ erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Which prior enters the pairwise metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PepMode {
    /// No prior: `η = 0`.
    Ml,
    /// Prior over identity sets only.
    MapIdentities,
    /// Prior over identities and equiprobable data (`2^{−N|X|}` per slot).
    MapWithData,
}

impl FromStr for PepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml" => Ok(PepMode::Ml),
            "map" | "map_identities" => Ok(PepMode::MapIdentities),
            "map_with_data" => Ok(PepMode::MapWithData),
            other => Err(Error::Config(format!("unknown PEP mode `{other}`"))),
        }
    }
}

/// Whether the interferers' symbols are known to the detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKnowledge {
    Trained,
    Blind,
}

/// A hypothesis pair over `T` slots with its difference vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct PairContext {
    truth: Vec<ActiveSet>,
    competitor: Vec<ActiveSet>,
    d: Vec<Vec<f64>>,
    identical: bool,
}

impl PairContext {
    /// Builds a pair from per-slot sets and difference vectors. The pair is
    /// identical when the sets agree and every `d_t` vanishes.
    pub fn new(truth: Vec<ActiveSet>, competitor: Vec<ActiveSet>, d: Vec<Vec<f64>>) -> Result<Self> {
        if truth.len() != competitor.len() || truth.len() != d.len() || d.is_empty() {
            return Err(Error::LengthMismatch(format!(
                "{} truth slots, {} competitor slots, {} difference vectors",
                truth.len(),
                competitor.len(),
                d.len()
            )));
        }
        if d.iter().flatten().any(|v| ![0.0, 1.0, -1.0, 2.0, -2.0].contains(v)) {
            return Err(Error::InvalidParameter("difference entries must lie in {0, ±1, ±2}".into()));
        }
        let identical = truth == competitor && d.iter().flatten().all(|v| *v == 0.0);
        Ok(PairContext {
            truth,
            competitor,
            d,
            identical,
        })
    }

    /// Pair of constant identity sets with per-slot symbol vectors of the two
    /// hypotheses (length `K′`).
    pub fn from_symbols(
        truth: &[ActiveSet],
        competitor: &[ActiveSet],
        b_truth: &[Vec<f64>],
        b_competitor: &[Vec<f64>],
    ) -> Result<Self> {
        if b_truth.len() != b_competitor.len() {
            return Err(Error::LengthMismatch("symbol sequences differ in length".into()));
        }
        let d = b_truth
            .iter()
            .zip(b_competitor)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        PairContext::new(truth.to_vec(), competitor.to_vec(), d)
    }

    pub fn frames(&self) -> usize {
        self.d.len()
    }

    pub fn truth(&self) -> &[ActiveSet] {
        &self.truth
    }

    pub fn competitor(&self) -> &[ActiveSet] {
        &self.competitor
    }

    pub fn differences(&self) -> &[Vec<f64>] {
        &self.d
    }

    pub fn is_identical(&self) -> bool {
        self.identical
    }

    /// The pair over the concatenated frames.
    pub fn concat(&self, other: &PairContext) -> PairContext {
        let cat = |a: &[ActiveSet], b: &[ActiveSet]| a.iter().chain(b).copied().collect::<Vec<_>>();
        PairContext {
            truth: cat(&self.truth, &other.truth),
            competitor: cat(&self.competitor, &other.competitor),
            d: self.d.iter().chain(&other.d).cloned().collect(),
            identical: self.identical && other.identical,
        }
    }
}

/// Prior law of identity-set sequences entering `η`.
#[derive(Clone, Debug)]
pub struct SequenceLaw {
    /// `ln f(X_1)` over identity sets.
    first: Vec<f64>,
    table: Option<TransitionTable>,
    symbols: usize,
}

impl SequenceLaw {
    /// Constant identities drawn once from the static prior.
    pub fn static_law(m: &TrafficModel) -> Self {
        let sets = 1usize << m.users();
        SequenceLaw {
            first: (0..sets)
                .map(|s| m.log_static_set(ActiveSet::from_mask(s as u32)))
                .collect(),
            table: None,
            symbols: m.symbols(),
        }
    }

    /// Static law with an arbitrary identity prior `ln f(X)` (e.g. flat).
    pub fn static_with_prior(log_prior: Vec<f64>, symbols: usize) -> Self {
        SequenceLaw {
            first: log_prior,
            table: None,
            symbols,
        }
    }

    /// Markov chain started from the one-step prediction of `prior0`.
    pub fn markov(kernel: &Kernel, prior0: &SetDensity) -> Result<Self> {
        let m = kernel.traffic();
        let ids = StateSpace::shared(m.universe().identity_universe());
        let first = bayes_predict_into(prior0, kernel, ids)?;
        Ok(SequenceLaw {
            first: first.log_mass().to_vec(),
            table: Some(kernel.table().clone()),
            symbols: m.symbols(),
        })
    }

    pub fn is_static(&self) -> bool {
        self.table.is_none()
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn log_first(&self, set: ActiveSet) -> f64 {
        self.first[set.mask() as usize]
    }

    /// Log-probability of an identity sequence. Under a static law the
    /// sequence is constant and only its first set counts.
    pub fn log_prob(&self, seq: &[ActiveSet]) -> f64 {
        let mut lp = self.log_first(seq[0]);
        if let Some(table) = &self.table {
            for w in seq.windows(2) {
                lp += table.log(w[0], w[1]);
            }
        }
        lp
    }
}

fn quad(gram: &nalgebra::DMatrix<f64>, d: &[f64]) -> f64 {
    let k = d.len();
    let mut acc = 0.0;
    for i in 0..k {
        if d[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..k {
            row += gram[(i, j)] * d[j];
        }
        acc += d[i] * row;
    }
    acc
}

/// `ξ_T = Σ_t d_t′ A R A d_t`.
pub fn xi(ctx: &PairContext, channel: &ChannelModel) -> f64 {
    ctx.d.iter().map(|d| quad(channel.gram(), d)).sum()
}

fn eta_sets(law: &SequenceLaw, mode: PepMode, n0: f64, truth: &[ActiveSet], competitor: &[ActiveSet]) -> f64 {
    match mode {
        PepMode::Ml => 0.0,
        PepMode::MapIdentities | PepMode::MapWithData => {
            let mut eta = n0 * (law.log_prob(competitor) - law.log_prob(truth));
            if mode == PepMode::MapWithData {
                let diff: f64 = truth
                    .iter()
                    .zip(competitor)
                    .map(|(x, xh)| x.len() as f64 - xh.len() as f64)
                    .sum();
                eta += n0 * (law.symbols as f64) * diff * std::f64::consts::LN_2;
            }
            eta
        }
    }
}

/// `η` for the pair under the chosen mode.
pub fn eta(ctx: &PairContext, law: &SequenceLaw, mode: PepMode, n0: f64) -> f64 {
    eta_sets(law, mode, n0, &ctx.truth, &ctx.competitor)
}

pub fn xi_eta(ctx: &PairContext, law: &SequenceLaw, channel: &ChannelModel, mode: PepMode) -> (f64, f64) {
    (xi(ctx, channel), eta(ctx, law, mode, channel.n0()))
}

/// `Q((ξ − η)/√(2 N0 ξ))`, with the limits at `ξ = 0`: 1 when the prior
/// favours the competitor, 0 when it favours the truth, ½ on a tie.
pub fn pep_from(xi: f64, eta: f64, n0: f64) -> f64 {
    if xi <= 0.0 {
        return if eta < 0.0 {
            1.0
        } else if eta > 0.0 {
            0.0
        } else {
            0.5
        };
    }
    q_function((xi - eta) / (2.0 * n0 * xi).sqrt())
}

/// Closed-form pairwise error probability.
pub fn pep(ctx: &PairContext, law: &SequenceLaw, channel: &ChannelModel, mode: PepMode) -> Result<f64> {
    if ctx.identical {
        return Err(Error::IdenticalHypotheses);
    }
    let (x, e) = xi_eta(ctx, law, channel, mode);
    Ok(pep_from(x, e, channel.n0()))
}

/// Possible entries `(value, weight)` of `d(i)` for each dimension when the
/// truth has set `x` and the competitor `xh`. Weights average over the true
/// data and sum over the competitor's free data; the reference bit is always
/// unknown.
fn slot_alphabet(x: ActiveSet, xh: ActiveSet, channel: &ChannelModel, data: DataKnowledge) -> Vec<Vec<(f64, f64)>> {
    let free = vec![(0.0, 1.0), (2.0, 0.5), (-2.0, 0.5)];
    let mut out = Vec::with_capacity(channel.dim());
    if channel.has_reference() {
        out.push(free.clone());
    }
    for u in 0..channel.interferers() {
        out.push(match (x.contains(u), xh.contains(u), data) {
            (true, true, DataKnowledge::Trained) | (false, false, _) => vec![(0.0, 1.0)],
            (true, true, DataKnowledge::Blind) => free.clone(),
            (true, false, _) | (false, true, DataKnowledge::Trained) => vec![(1.0, 0.5), (-1.0, 0.5)],
            (false, true, DataKnowledge::Blind) => vec![(1.0, 1.0), (-1.0, 1.0)],
        });
    }
    out
}

/// Sorts and merges equal values (relative tolerance 1e-9).
fn merge(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (x, w) in v {
        match out.last_mut() {
            Some(last) if (x - last.0).abs() <= 1e-9 * last.0.abs().max(1.0) => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

/// Weighted distribution of the per-slot `ξ_t` over the data alphabet.
fn slot_xi_distribution(alphabet: &[Vec<(f64, f64)>], channel: &ChannelModel) -> Vec<(f64, f64)> {
    let dim = alphabet.len();
    let mut idx = vec![0usize; dim];
    let mut d = vec![0.0; dim];
    let mut out = Vec::new();
    loop {
        let mut w = 1.0;
        for i in 0..dim {
            let (v, wi) = alphabet[i][idx[i]];
            d[i] = v;
            w *= wi;
        }
        out.push((quad(channel.gram(), &d), w));
        let mut i = 0;
        loop {
            if i == dim {
                return merge(out);
            }
            idx[i] += 1;
            if idx[i] < alphabet[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn convolve(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for (x, wx) in a {
        for (y, wy) in b {
            out.push((x + y, wx * wy));
        }
    }
    merge(out)
}

fn frame_xi_distribution(slot: &[(f64, f64)], frames: usize) -> Vec<(f64, f64)> {
    let mut acc = slot.to_vec();
    for _ in 1..frames {
        acc = convolve(&acc, slot);
    }
    acc
}

/// PEP of one constant identity pair over `frames` slots, averaged over the
/// true (or training) data and summed over the competitor's free data.
pub fn averaged_pep(
    x: ActiveSet,
    xh: ActiveSet,
    law: &SequenceLaw,
    channel: &ChannelModel,
    frames: usize,
    mode: PepMode,
    data: DataKnowledge,
) -> f64 {
    let slot = slot_xi_distribution(&slot_alphabet(x, xh, channel, data), channel);
    let dist = frame_xi_distribution(&slot, frames);
    let e = eta_sets(law, mode, channel.n0(), &vec![x; frames], &vec![xh; frames]);
    dist.iter().map(|(v, w)| w * pep_from(*v, e, channel.n0())).sum()
}

fn check_static(law: &SequenceLaw, channel: &ChannelModel, frames: usize) -> Result<usize> {
    if !law.is_static() {
        return Err(Error::InvalidParameter("static analysis needs a static law".into()));
    }
    if frames == 0 {
        return Err(Error::InvalidParameter("frame length must be positive".into()));
    }
    let k = channel.interferers();
    if law.first.len() != 1 << k {
        return Err(Error::UniverseMismatch);
    }
    if k > 10 {
        return Err(Error::UniverseTooLarge(format!("pair enumeration over K = {k} users")));
    }
    Ok(k)
}

/// Union bound on the set-error probability of static detection over
/// `frames` slots: `Σ_i f(X_i) Σ_{j≠i} P(X_i → X_j)`, restricted to pairs at
/// symmetric-difference distance at most `restrict_n` when given. PEPs are
/// averaged exactly over the unknown or training data.
pub fn union_bound_static(
    law: &SequenceLaw,
    channel: &ChannelModel,
    frames: usize,
    restrict_n: Option<usize>,
    mode: PepMode,
    data: DataKnowledge,
) -> Result<f64> {
    let k = check_static(law, channel, frames)?;
    let sets = 1u32 << k;
    let per_truth: Vec<f64> = (0..sets)
        .into_par_iter()
        .map(|i| {
            let x = ActiveSet::from_mask(i);
            let lf = law.log_first(x);
            if lf == f64::NEG_INFINITY {
                return 0.0;
            }
            let mut acc = 0.0;
            for j in 0..sets {
                let xh = ActiveSet::from_mask(j);
                if j == i || restrict_n.is_some_and(|n| x.distance(xh) > n) {
                    continue;
                }
                acc += averaged_pep(x, xh, law, channel, frames, mode, data);
            }
            lf.exp() * acc
        })
        .collect();
    Ok(per_truth.iter().sum())
}

/// Smallest `T ≤ cap` at which every competing pair of constant identity
/// sets has `ξ_T − η > 0` for the worst-case data.
pub fn t_min_open_eye(
    law: &SequenceLaw,
    channel: &ChannelModel,
    mode: PepMode,
    data: DataKnowledge,
    cap: usize,
) -> Result<usize> {
    let k = check_static(law, channel, 1)?;
    let sets = 1u32 << k;
    let mut worst = Vec::new();
    for i in 0..sets {
        let x = ActiveSet::from_mask(i);
        if law.log_first(x) == f64::NEG_INFINITY {
            continue;
        }
        for j in (0..sets).filter(|&j| j != i) {
            let xh = ActiveSet::from_mask(j);
            let slot = slot_xi_distribution(&slot_alphabet(x, xh, channel, data), channel);
            worst.push((x, xh, slot[0].0));
        }
    }
    for t in 1..=cap {
        let open = worst.iter().all(|(x, xh, min_xi)| {
            let e = eta_sets(law, mode, channel.n0(), &vec![*x; t], &vec![*xh; t]);
            t as f64 * min_xi - e > 0.0
        });
        if open {
            return Ok(t);
        }
    }
    Err(Error::OpenEyeCapExceeded(cap))
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl BoundEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        BoundEstimate { mean, stderr, samples: n }
    }
}

/// One competitor option at a slot.
struct SlotOption {
    set: ActiveSet,
    cost: usize,
    xi: f64,
}

/// Competitor slot states within `budget` of the true slot, with the
/// distance counting identity changes and, in blind mode, flipped data of
/// users active in both. Trained competitors reuse the training symbols;
/// the reference bit is free in trained mode and counts as a flip in blind.
fn slot_options(
    x: ActiveSet,
    b: &[f64],
    channel: &ChannelModel,
    data: DataKnowledge,
    budget: usize,
) -> Vec<SlotOption> {
    let k = channel.interferers();
    let off = usize::from(channel.has_reference());
    let mut out = Vec::new();
    for m in 0..1u32 << k {
        let xh = ActiveSet::from_mask(m);
        let set_cost = x.distance(xh);
        if set_cost > budget {
            continue;
        }
        // users whose competitor symbol may differ from the truth
        let mut free: Vec<usize> = Vec::new();
        if off == 1 {
            free.push(0);
        }
        if data == DataKnowledge::Blind {
            free.extend(xh.members().map(|u| u + off));
        }
        for pattern in 0..1u32 << free.len() {
            let mut bh = vec![0.0; channel.dim()];
            if off == 1 {
                bh[0] = b[0];
            }
            for u in xh.members() {
                bh[u + off] = b[u + off];
            }
            let mut cost = set_cost;
            for (bit, &i) in free.iter().enumerate() {
                let flip = pattern >> bit & 1 == 1;
                let is_ref = off == 1 && i == 0;
                let both = is_ref || x.contains(i - off);
                if both {
                    if flip {
                        bh[i] = -b[i];
                        if data == DataKnowledge::Blind {
                            cost += 1;
                        }
                    }
                } else {
                    // newly active competitor user: either symbol at no extra cost
                    bh[i] = antipodal(flip);
                }
            }
            if cost > budget {
                continue;
            }
            let bx: Vec<f64> = (0..channel.dim())
                .map(|i| if i < off || x.contains(i - off) { b[i] } else { 0.0 })
                .collect();
            let d: Vec<f64> = bx.iter().zip(&bh).map(|(p, q)| p - q).collect();
            out.push(SlotOption {
                set: xh,
                cost,
                xi: quad(channel.gram(), &d),
            });
        }
    }
    out
}

/// Sum of PEPs over all competitor sequences within total distance `n`,
/// excluding the truth itself (and, in trained mode, competitors that differ
/// only in the reference bit).
#[allow(clippy::too_many_arguments)]
fn restricted_pep_sum(
    truth: &[ActiveSet],
    symbols: &[Vec<f64>],
    law: &SequenceLaw,
    channel: &ChannelModel,
    mode: PepMode,
    data: DataKnowledge,
    n: usize,
) -> f64 {
    let options: Vec<Vec<SlotOption>> = truth
        .iter()
        .zip(symbols)
        .map(|(x, b)| slot_options(*x, b, channel, data, n))
        .collect();
    let mut seq = Vec::with_capacity(truth.len());
    let mut total = 0.0;
    walk(&options, truth, law, channel, mode, data, n, 0.0, false, &mut seq, &mut total);
    total
}

#[allow(clippy::too_many_arguments)]
fn walk(
    options: &[Vec<SlotOption>],
    truth: &[ActiveSet],
    law: &SequenceLaw,
    channel: &ChannelModel,
    mode: PepMode,
    data: DataKnowledge,
    budget: usize,
    xi_acc: f64,
    differs: bool,
    seq: &mut Vec<ActiveSet>,
    total: &mut f64,
) {
    let t = seq.len();
    if t == options.len() {
        if differs {
            let e = eta_sets(law, mode, channel.n0(), truth, seq);
            *total += pep_from(xi_acc, e, channel.n0());
        }
        return;
    }
    for opt in &options[t] {
        if opt.cost > budget {
            continue;
        }
        let changed = match data {
            DataKnowledge::Trained => opt.set != truth[t],
            DataKnowledge::Blind => opt.cost > 0,
        };
        seq.push(opt.set);
        walk(
            options,
            truth,
            law,
            channel,
            mode,
            data,
            budget - opt.cost,
            xi_acc + opt.xi,
            differs || changed,
            seq,
            total,
        );
        seq.pop();
    }
}

/// Semi-analytic estimate of the restricted union bound on the set-sequence
/// error probability of dynamic detection: `samples` true sequences are drawn
/// from the Markov law (with their data), and for each the PEPs to every
/// competitor sequence within total distance `restrict_n` are summed.
#[allow(clippy::too_many_arguments)]
pub fn semianalytic_dynamic_bound<R: Rng + ?Sized>(
    kernel: &Kernel,
    channel: &ChannelModel,
    prior0: &SetDensity,
    frames: usize,
    samples: usize,
    restrict_n: usize,
    mode: PepMode,
    data: DataKnowledge,
    rng: &mut R,
) -> Result<BoundEstimate> {
    if samples == 0 || frames == 0 {
        return Err(Error::InvalidParameter("samples and frame length must be positive".into()));
    }
    let m = kernel.traffic();
    if m.users() != channel.interferers() {
        return Err(Error::Incompatible("traffic model and channel disagree on K".into()));
    }
    let law = SequenceLaw::markov(kernel, prior0)?;
    let prior_ids = prior0.identity_marginal();
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let mut set = prior_ids.space().set_at(prior_ids.sample_index(rng));
            let mut truth = Vec::with_capacity(frames);
            let mut symbols = Vec::with_capacity(frames);
            for _ in 0..frames {
                set = m.sample_next_set(set, rng);
                truth.push(set);
                symbols.push((0..channel.dim()).map(|_| antipodal(rng.random())).collect::<Vec<f64>>());
            }
            restricted_pep_sum(&truth, &symbols, &law, channel, mode, data, restrict_n)
        })
        .collect();
    Ok(BoundEstimate::from_samples(&values))
}
