//! Birth/death traffic model of the set of active interferers.
//!
//! Each potential interferer is a two-state chain: an active user stays
//! active with probability `mu`, an inactive one becomes active with
//! probability `alpha`. When slots carry `N` data symbols per user, every
//! active user draws fresh equiprobable bits each slot, which multiplies
//! every density by `2^{-N|C|}`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rst::{convolve_union, normalize, xlogp, ActiveSet, SetDensity, StateSpace, Universe};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    users: usize,
    alpha: f64,
    mu: f64,
    symbols: usize,
}

impl TrafficModel {
    pub fn new(users: usize, alpha: f64, mu: f64, symbols: usize) -> Result<Self> {
        for (name, p) in [("alpha", alpha), ("mu", mu)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")));
            }
        }
        Universe::new(users, symbols)?;
        Ok(TrafficModel {
            users,
            alpha,
            mu,
            symbols,
        })
    }

    /// Static model: the same activity factor with no memory (`mu = alpha`).
    pub fn memoryless(users: usize, alpha: f64, symbols: usize) -> Result<Self> {
        Self::new(users, alpha, alpha, symbols)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn with_symbols(&self, symbols: usize) -> Result<Self> {
        Self::new(self.users, self.alpha, self.mu, symbols)
    }

    pub fn universe(&self) -> Universe {
        Universe::new(self.users, self.symbols).expect("validated at construction")
    }

    pub fn space(&self) -> Arc<StateSpace> {
        StateSpace::shared(self.universe())
    }

    /// `ln 2^{-N|C|}`, the probability of one data pattern of `C`.
    pub fn log_data_factor(&self, set: ActiveSet) -> f64 {
        -((self.symbols * set.len()) as f64) * std::f64::consts::LN_2
    }

    /// `ln[α^{|B|}(1−α)^{K−|B|}]`.
    pub fn log_static_set(&self, set: ActiveSet) -> f64 {
        let k = set.len();
        xlogp(k, self.alpha) + xlogp(self.users - k, 1.0 - self.alpha)
    }

    /// `ln f_S(C | B)`: each member of `B` survives with probability `mu`.
    pub fn log_survival_set(&self, kept: ActiveSet, from: ActiveSet) -> f64 {
        if !kept.is_subset_of(from) {
            return f64::NEG_INFINITY;
        }
        xlogp(kept.len(), self.mu) + xlogp(from.len() - kept.len(), 1.0 - self.mu)
    }

    /// `ln f_N(C | B)`: each user outside `B` is born with probability `alpha`.
    pub fn log_birth_set(&self, born: ActiveSet, from: ActiveSet) -> f64 {
        if !born.intersection(from).is_empty() {
            return f64::NEG_INFINITY;
        }
        xlogp(born.len(), self.alpha) + xlogp(self.users - from.len() - born.len(), 1.0 - self.alpha)
    }

    /// `ln f(C | B) = ln f_S(C ∩ B | B) + ln f_N(C ∖ B | B)` over active sets.
    pub fn log_transition_set(&self, to: ActiveSet, from: ActiveSet) -> f64 {
        self.log_survival_set(to.intersection(from), from)
            + self.log_birth_set(to.difference(from), from)
    }

    fn density_with(&self, log_set: impl Fn(ActiveSet) -> f64) -> SetDensity {
        let space = self.space();
        let mut table = vec![f64::NEG_INFINITY; space.len()];
        for m in 0..space.universe().set_count() as u32 {
            let set = ActiveSet::from_mask(m);
            let v = log_set(set) + self.log_data_factor(set);
            for i in space.block(set) {
                table[i] = v;
            }
        }
        normalize(space, table).expect("kernel rows always carry mass")
    }

    /// Prior of the active set (and data) at a single slot.
    pub fn static_prior(&self) -> SetDensity {
        self.density_with(|c| self.log_static_set(c))
    }

    /// Distribution of the survivors of `from`.
    pub fn survival_kernel(&self, from: ActiveSet) -> SetDensity {
        self.density_with(|c| self.log_survival_set(c, from))
    }

    /// Distribution of the users born next to `from`.
    pub fn birth_kernel(&self, from: ActiveSet) -> SetDensity {
        self.density_with(|c| self.log_birth_set(c, from))
    }

    /// One-step transition row, built as the union convolution of the survival
    /// and birth kernels.
    pub fn transition_density(&self, from: ActiveSet) -> Result<SetDensity> {
        convolve_union(&self.survival_kernel(from), &self.birth_kernel(from), from)
    }

    /// Per-user stationary activity `α / (1 + α − μ)`.
    pub fn stationary_activity(&self) -> Result<f64> {
        let denom = 1.0 + self.alpha - self.mu;
        if denom <= 0.0 {
            return Err(Error::AbsorbingChain);
        }
        Ok(self.alpha / denom)
    }

    /// Dense identity-level transition matrix in log domain.
    pub fn transition_table(&self) -> Result<TransitionTable> {
        let sets = 1usize << self.users;
        if sets.saturating_mul(sets) > crate::rst::MAX_TABLE_ENTRIES {
            return Err(Error::UniverseTooLarge(format!(
                "{sets}x{sets} transition table for K = {}",
                self.users
            )));
        }
        let mut log = Vec::with_capacity(sets * sets);
        for from in 0..sets as u32 {
            for to in 0..sets as u32 {
                log.push(self.log_transition_set(ActiveSet::from_mask(to), ActiveSet::from_mask(from)));
            }
        }
        Ok(TransitionTable { sets, log })
    }

    pub fn sample_static_set<R: Rng + ?Sized>(&self, rng: &mut R) -> ActiveSet {
        ActiveSet::from_members((0..self.users).filter(|_| rng.random_bool(self.alpha)))
    }

    pub fn sample_next_set<R: Rng + ?Sized>(&self, from: ActiveSet, rng: &mut R) -> ActiveSet {
        ActiveSet::from_members((0..self.users).filter(|&u| {
            let p = if from.contains(u) { self.mu } else { self.alpha };
            rng.random_bool(p)
        }))
    }

    /// Equiprobable data word for the members of `set`.
    pub fn sample_data<R: Rng + ?Sized>(&self, set: ActiveSet, rng: &mut R) -> u32 {
        let bits = self.symbols * set.len();
        if bits == 0 {
            0
        } else {
            rng.random::<u32>() & (u32::MAX >> (32 - bits))
        }
    }
}

/// `ln f(to | from)` for every pair of active sets, row-major by `from`.
#[derive(Clone, Debug)]
pub struct TransitionTable {
    sets: usize,
    log: Vec<f64>,
}

impl TransitionTable {
    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn log(&self, from: ActiveSet, to: ActiveSet) -> f64 {
        self.log[from.mask() as usize * self.sets + to.mask() as usize]
    }

    pub fn row(&self, from: ActiveSet) -> &[f64] {
        let f = from.mask() as usize;
        &self.log[f * self.sets..(f + 1) * self.sets]
    }
}
