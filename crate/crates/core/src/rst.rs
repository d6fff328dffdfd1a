//! Discrete finite-random-set calculus over the power set of a finite user
//! universe.
//!
//! A realization of the random set is a [`SlotState`]: which interferers are
//! active, the antipodal symbols they carry in the slot, and optionally the
//! bit of the always-active reference user. All realizations of a
//! [`Universe`] are laid out in one canonical order:
//!
//! * mask-major: states are grouped by the active-user bit mask, masks in
//!   increasing numeric order;
//! * inside a mask block, the data word (`N` bits per active user, users in
//!   ascending index order, little-endian) counts upward;
//! * when the reference user is present its bit is the least significant
//!   digit of the in-block offset.
//!
//! Densities are stored as log-mass tables in that order. With `N = 0` and no
//! reference user, index and mask coincide, and belief functions and Möbius
//! inversion become the subset-sum zeta transform and its inverse.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported interferer count.
pub const MAX_USERS: usize = 16;

/// Largest dense table the crate will allocate.
pub const MAX_TABLE_ENTRIES: usize = 1 << 26;

/// Maps a stored bit onto its antipodal symbol: `0 → +1`, `1 → −1`.
#[inline]
pub fn antipodal(bit: bool) -> f64 {
    if bit {
        -1.0
    } else {
        1.0
    }
}

/// `count · ln p` with the convention `0 · ln 0 = 0`.
#[inline]
pub(crate) fn xlogp(count: usize, p: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * p.ln()
    }
}

/// Max-shifted log-sum-exp; `-inf` for an empty or all-`-inf` slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Subset of the interferer universe, bit `i` set iff user `i` is active.
///
/// Users are numbered from 0 here; user `i` is interferer `i + 1` in the
/// one-based numbering used when the reference user is index 0 of a
/// signature set.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActiveSet(u32);

impl ActiveSet {
    pub const EMPTY: ActiveSet = ActiveSet(0);

    pub fn from_mask(mask: u32) -> Self {
        ActiveSet(mask)
    }

    pub fn full(users: usize) -> Self {
        if users >= 32 {
            ActiveSet(u32::MAX)
        } else {
            ActiveSet((1u32 << users) - 1)
        }
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        ActiveSet(members.into_iter().fold(0, |m, u| m | (1 << u)))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, user: usize) -> bool {
        self.0 >> user & 1 == 1
    }

    pub fn is_subset_of(self, other: ActiveSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: ActiveSet) -> ActiveSet {
        ActiveSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ActiveSet) -> ActiveSet {
        ActiveSet(self.0 & other.0)
    }

    pub fn difference(self, other: ActiveSet) -> ActiveSet {
        ActiveSet(self.0 & !other.0)
    }

    /// Number of users in exactly one of the two sets.
    pub fn distance(self, other: ActiveSet) -> usize {
        (self.0 ^ other.0).count_ones() as usize
    }

    /// Members in ascending order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let u = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(u)
            }
        })
    }
}

impl fmt::Debug for ActiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

/// Size parameters of a state space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Universe {
    users: usize,
    symbols: usize,
    reference: bool,
}

impl Universe {
    /// Universe of `users` interferers each carrying `symbols` bits per slot.
    pub fn new(users: usize, symbols: usize) -> Result<Self> {
        Self::build(users, symbols, false)
    }

    /// Identity-only universe (`N = 0`).
    pub fn identities(users: usize) -> Result<Self> {
        Self::build(users, 0, false)
    }

    /// Same universe with (or without) the reference user's bit in every state.
    pub fn with_reference(self, reference: bool) -> Result<Self> {
        Self::build(self.users, self.symbols, reference)
    }

    fn build(users: usize, symbols: usize, reference: bool) -> Result<Self> {
        if users > MAX_USERS {
            return Err(Error::UniverseTooLarge(format!(
                "{users} users exceeds the limit of {MAX_USERS}"
            )));
        }
        let per_user = 1.0 + 2f64.powi(symbols as i32);
        let count = per_user.powi(users as i32) * if reference { 2.0 } else { 1.0 };
        if count > MAX_TABLE_ENTRIES as f64 || users * symbols > 31 {
            return Err(Error::UniverseTooLarge(format!(
                "K = {users}, N = {symbols} needs {count} table entries (limit {MAX_TABLE_ENTRIES})"
            )));
        }
        Ok(Universe {
            users,
            symbols,
            reference,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn has_reference(&self) -> bool {
        self.reference
    }

    /// `2^K`.
    pub fn set_count(&self) -> usize {
        1 << self.users
    }

    /// `(1 + 2^N)^K`, doubled when the reference bit is part of the state.
    pub fn state_count(&self) -> usize {
        let per_user = 1 + (1usize << self.symbols);
        per_user.pow(self.users as u32) << usize::from(self.reference)
    }

    /// The identity-only universe over the same users.
    pub fn identity_universe(&self) -> Universe {
        Universe {
            users: self.users,
            symbols: 0,
            reference: false,
        }
    }

    /// Whether states are plain masks (index equals mask).
    pub fn is_identity_only(&self) -> bool {
        self.symbols == 0 && !self.reference
    }
}

/// One realization of the per-slot random set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SlotState {
    pub active: ActiveSet,
    /// `N` bits per active user, users ascending, little-endian.
    pub data: u32,
    /// Bit of the reference user (`true` encodes the symbol −1).
    pub ref_bit: Option<bool>,
}

impl SlotState {
    pub fn identity(active: ActiveSet) -> Self {
        SlotState {
            active,
            data: 0,
            ref_bit: None,
        }
    }

    pub fn new(active: ActiveSet, data: u32, ref_bit: Option<bool>) -> Self {
        SlotState {
            active,
            data,
            ref_bit,
        }
    }

    /// Bit `symbol` of user `user`, who must be active.
    pub fn bit(&self, user: usize, symbol: usize, symbols_per_user: usize) -> bool {
        debug_assert!(self.active.contains(user));
        let rank = (self.active.mask() & ((1u32 << user) - 1)).count_ones() as usize;
        self.data >> (rank * symbols_per_user + symbol) & 1 == 1
    }

    /// Per-user antipodal symbol for single-symbol slots, `0` for inactive users.
    pub fn symbols(&self, users: usize) -> Vec<f64> {
        let mut out = vec![0.0; users];
        for (rank, u) in self.active.members().enumerate() {
            if u < users {
                out[u] = antipodal(self.data >> rank & 1 == 1);
            }
        }
        out
    }
}

/// Canonical index over every state of a [`Universe`].
#[derive(Debug, PartialEq, Eq)]
pub struct StateSpace {
    universe: Universe,
    offsets: Vec<usize>,
}

impl StateSpace {
    pub fn new(universe: Universe) -> Self {
        let per_data = |mask: usize| {
            (1usize << (universe.symbols * (mask as u32).count_ones() as usize))
                << usize::from(universe.reference)
        };
        let mut offsets = Vec::with_capacity(universe.set_count() + 1);
        let mut acc = 0;
        offsets.push(0);
        for mask in 0..universe.set_count() {
            acc += per_data(mask);
            offsets.push(acc);
        }
        debug_assert_eq!(acc, universe.state_count());
        StateSpace { universe, offsets }
    }

    pub fn shared(universe: Universe) -> Arc<Self> {
        Arc::new(Self::new(universe))
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index range of every state with active set `set`.
    pub fn block(&self, set: ActiveSet) -> Range<usize> {
        let m = set.mask() as usize;
        self.offsets[m]..self.offsets[m + 1]
    }

    pub fn index_of(&self, state: &SlotState) -> usize {
        let base = self.offsets[state.active.mask() as usize];
        if self.universe.reference {
            base + ((state.data as usize) << 1) + usize::from(state.ref_bit.unwrap_or(false))
        } else {
            base + state.data as usize
        }
    }

    pub fn set_at(&self, index: usize) -> ActiveSet {
        ActiveSet::from_mask((self.offsets.partition_point(|&o| o <= index) - 1) as u32)
    }

    pub fn state_at(&self, index: usize) -> SlotState {
        let active = self.set_at(index);
        let local = index - self.offsets[active.mask() as usize];
        if self.universe.reference {
            SlotState::new(active, (local >> 1) as u32, Some(local & 1 == 1))
        } else {
            SlotState::new(active, local as u32, None)
        }
    }

    pub fn states(&self) -> impl Iterator<Item = SlotState> + '_ {
        (0..self.len()).map(|i| self.state_at(i))
    }
}

/// Normalized probability table over every state of a universe, log domain.
#[derive(Clone, Debug)]
pub struct SetDensity {
    space: Arc<StateSpace>,
    log_mass: Vec<f64>,
}

impl PartialEq for SetDensity {
    fn eq(&self, other: &Self) -> bool {
        self.space.universe == other.space.universe && self.log_mass == other.log_mass
    }
}

/// Normalizes an unnormalized log-mass table with a max-shifted log-sum-exp.
pub fn normalize(space: Arc<StateSpace>, mut log_mass: Vec<f64>) -> Result<SetDensity> {
    if log_mass.len() != space.len() {
        return Err(Error::TableLength {
            expected: space.len(),
            got: log_mass.len(),
        });
    }
    let max = log_mass
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() || log_mass.iter().any(|v| v.is_nan()) {
        return Err(Error::NumericalCollapse);
    }
    if max == f64::INFINITY {
        return Err(Error::InvalidParameter("log mass +inf".into()));
    }
    let lse = max + log_mass.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    for v in &mut log_mass {
        *v -= lse;
    }
    Ok(SetDensity { space, log_mass })
}

impl SetDensity {
    /// Builds a density from nonnegative (possibly unnormalized) masses.
    pub fn from_masses(space: Arc<StateSpace>, masses: &[f64]) -> Result<Self> {
        if let Some(m) = masses.iter().find(|m| **m < 0.0 || m.is_nan()) {
            return Err(Error::InvalidParameter(format!("negative mass {m}")));
        }
        normalize(space, masses.iter().map(|m| m.ln()).collect())
    }

    pub fn point_mass(space: Arc<StateSpace>, index: usize) -> Self {
        let mut log_mass = vec![f64::NEG_INFINITY; space.len()];
        log_mass[index] = 0.0;
        SetDensity { space, log_mass }
    }

    pub fn uniform(space: Arc<StateSpace>) -> Self {
        let v = -(space.len() as f64).ln();
        let log_mass = vec![v; space.len()];
        SetDensity { space, log_mass }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn universe(&self) -> Universe {
        self.space.universe()
    }

    pub fn len(&self) -> usize {
        self.log_mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_mass.is_empty()
    }

    pub fn log_mass(&self) -> &[f64] {
        &self.log_mass
    }

    pub fn mass(&self, index: usize) -> f64 {
        self.log_mass[index].exp()
    }

    pub fn mass_of(&self, state: &SlotState) -> f64 {
        self.mass(self.space.index_of(state))
    }

    pub fn masses(&self) -> Vec<f64> {
        self.log_mass.iter().map(|v| v.exp()).collect()
    }

    /// Draws a state index by inverting the cumulative masses.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, lm) in self.log_mass.iter().enumerate() {
            if *lm == f64::NEG_INFINITY {
                continue;
            }
            acc += lm.exp();
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }

    pub fn total_mass(&self) -> f64 {
        self.log_mass.iter().map(|v| v.exp()).sum()
    }

    /// Index of the most probable state; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.log_mass.iter().enumerate() {
            if *v > self.log_mass[best] {
                best = i;
            }
        }
        best
    }

    pub fn map_state(&self) -> SlotState {
        self.space.state_at(self.argmax())
    }

    /// Sums data and reference bits out, leaving a density over active sets.
    pub fn identity_marginal(&self) -> SetDensity {
        let u = self.universe();
        let space = StateSpace::shared(u.identity_universe());
        let log_mass = (0..u.set_count())
            .map(|m| log_sum_exp(&self.log_mass[self.space.block(ActiveSet::from_mask(m as u32))]))
            .collect();
        SetDensity { space, log_mass }
    }

    /// Probability that the active set lies inside `region` (the discrete set
    /// integral of the density over the subsets of `region`).
    pub fn set_integral(&self, region: ActiveSet) -> f64 {
        let u = self.universe();
        (0..u.set_count() as u32)
            .map(ActiveSet::from_mask)
            .filter(|s| s.is_subset_of(region))
            .flat_map(|s| self.space.block(s))
            .map(|i| self.log_mass[i].exp())
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        let u = self.universe();
        let wire = DensityJson {
            k: u.users,
            n: u.symbols,
            reference: u.reference,
            log_mass: self
                .log_mass
                .iter()
                .map(|v| v.is_finite().then_some(*v))
                .collect(),
        };
        Ok(serde_json::to_string(&wire)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: DensityJson = serde_json::from_str(text)?;
        let universe = Universe::new(wire.k, wire.n)?.with_reference(wire.reference)?;
        let table = wire
            .log_mass
            .into_iter()
            .map(|v| v.unwrap_or(f64::NEG_INFINITY))
            .collect();
        normalize(StateSpace::shared(universe), table)
    }
}

/// JSON shape: `{"K":…, "N":…, "log_mass":[…]}`, `null` for zero mass and an
/// optional `"reference": true` when states carry the reference bit.
#[derive(Serialize, Deserialize)]
struct DensityJson {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    reference: bool,
    log_mass: Vec<Option<f64>>,
}

/// `β(S) = P(X ⊆ S)` for every active set `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefTable {
    universe: Universe,
    values: Vec<f64>,
}

impl BeliefTable {
    pub fn new(universe: Universe, values: Vec<f64>) -> Result<Self> {
        if !universe.is_identity_only() {
            return Err(Error::DataBearingDensity);
        }
        if values.len() != universe.set_count() {
            return Err(Error::TableLength {
                expected: universe.set_count(),
                got: values.len(),
            });
        }
        Ok(BeliefTable { universe, values })
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, set: ActiveSet) -> f64 {
        self.values[set.mask() as usize]
    }

    /// `B ⊆ C ⇒ β(B) ≤ β(C) + tol`, checked on every covering pair.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let k = self.universe.users;
        (0..self.values.len()).all(|s| {
            (0..k)
                .filter(|i| s >> i & 1 == 0)
                .all(|i| self.values[s] <= self.values[s | 1 << i] + tol)
        })
    }
}

/// Belief function of an identity-only density (subset-sum zeta transform).
pub fn belief_from_density(f: &SetDensity) -> Result<BeliefTable> {
    let u = f.universe();
    if !u.is_identity_only() {
        return Err(Error::DataBearingDensity);
    }
    let mut v = f.masses();
    for i in 0..u.users {
        let bit = 1 << i;
        for s in 0..v.len() {
            if s & bit != 0 {
                v[s] += v[s ^ bit];
            }
        }
    }
    BeliefTable::new(u, v)
}

/// Möbius inversion `f(A) = Σ_{B⊆A} (−1)^{|A∖B|} β(B)`.
pub fn density_from_belief(beta: &BeliefTable) -> Result<SetDensity> {
    let u = beta.universe;
    let mut v = beta.values.clone();
    for i in 0..u.users {
        let bit = 1 << i;
        for s in 0..v.len() {
            if s & bit != 0 {
                v[s] -= v[s ^ bit];
            }
        }
    }
    for (mask, m) in v.iter_mut().enumerate() {
        if *m < -1e-9 || m.is_nan() {
            return Err(Error::InconsistentBelief {
                mask: mask as u32,
                mass: *m,
            });
        }
        *m = m.max(0.0);
    }
    SetDensity::from_masses(StateSpace::shared(u), &v)
}

/// Splits the data word of `active` into the words of `active ∩ ground` and
/// `active ∖ ground`.
fn split_data(active: ActiveSet, data: u32, ground: ActiveSet, n: usize) -> (u32, u32) {
    if n == 0 {
        return (0, 0);
    }
    let chunk = (1u32 << n) - 1;
    let (mut inside, mut outside) = (0u32, 0u32);
    let (mut ri, mut ro) = (0, 0);
    for (rank, u) in active.members().enumerate() {
        let bits = data >> (rank * n) & chunk;
        if ground.contains(u) {
            inside |= bits << (ri * n);
            ri += 1;
        } else {
            outside |= bits << (ro * n);
            ro += 1;
        }
    }
    (inside, outside)
}

/// Density of `S ∪ N` for independent `S ⊆ ground` and `N ∩ ground = ∅`:
/// `f(C) = f_S(C ∩ ground) · f_N(C ∖ ground)`.
pub fn convolve_union(
    survivors: &SetDensity,
    newborns: &SetDensity,
    ground: ActiveSet,
) -> Result<SetDensity> {
    let u = survivors.universe();
    if newborns.universe() != u {
        return Err(Error::UniverseMismatch);
    }
    if u.reference {
        return Err(Error::InvalidParameter(
            "union convolution is defined on interferer states only".into(),
        ));
    }
    let space = survivors.space.clone();
    for set in (0..u.set_count() as u32).map(ActiveSet::from_mask) {
        let block = space.block(set);
        let s_live = survivors.log_mass[block.clone()].iter().any(|v| v.is_finite());
        let n_live = newborns.log_mass[block].iter().any(|v| v.is_finite());
        if s_live && !set.is_subset_of(ground) {
            return Err(Error::OverlappingSupport(format!(
                "survivor mass on {set:?} outside ground set {ground:?}"
            )));
        }
        if n_live && !set.intersection(ground).is_empty() {
            return Err(Error::OverlappingSupport(format!(
                "newborn mass on {set:?} meets ground set {ground:?}"
            )));
        }
    }
    let mut table = vec![f64::NEG_INFINITY; space.len()];
    for set in (0..u.set_count() as u32).map(ActiveSet::from_mask) {
        let kept = set.intersection(ground);
        let born = set.difference(ground);
        for idx in space.block(set) {
            let state = space.state_at(idx);
            let (ds, dn) = split_data(set, state.data, ground, u.symbols);
            let i_s = space.index_of(&SlotState::new(kept, ds, None));
            let i_n = space.index_of(&SlotState::new(born, dn, None));
            table[idx] = survivors.log_mass[i_s] + newborns.log_mass[i_n];
        }
    }
    normalize(space, table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id_space(k: usize) -> Arc<StateSpace> {
        StateSpace::shared(Universe::identities(k).unwrap())
    }

    fn prior(k: usize, a: f64) -> SetDensity {
        let m: Vec<f64> = (0..1u32 << k)
            .map(|s| {
                let c = s.count_ones() as i32;
                a.powi(c) * (1.0 - a).powi(k as i32 - c)
            })
            .collect();
        SetDensity::from_masses(id_space(k), &m).unwrap()
    }

    #[test]
    fn state_counts() {
        assert_eq!(Universe::identities(5).unwrap().state_count(), 32);
        assert_eq!(Universe::new(3, 1).unwrap().state_count(), 27);
        assert_eq!(Universe::new(2, 2).unwrap().state_count(), 25);
        let r = Universe::new(2, 1).unwrap().with_reference(true).unwrap();
        assert_eq!(r.state_count(), 18);
        assert!(Universe::new(17, 0).is_err());
        assert!(Universe::new(16, 1).unwrap().with_reference(true).is_err());
        assert!(Universe::new(16, 2).is_err());
        assert_eq!(StateSpace::new(Universe::new(4, 1).unwrap()).len(), 81);
    }

    #[test]
    fn index_round_trip() {
        for u in [
            Universe::new(3, 1).unwrap(),
            Universe::new(2, 2).unwrap().with_reference(true).unwrap(),
            Universe::identities(4).unwrap(),
        ] {
            let space = StateSpace::new(u);
            for i in 0..space.len() {
                assert_eq!(space.index_of(&space.state_at(i)), i);
            }
        }
    }

    #[test]
    fn mask_major_order() {
        let space = StateSpace::new(Universe::new(2, 1).unwrap());
        let sets: Vec<u32> = space.states().map(|s| s.active.mask()).collect();
        assert_eq!(sets, vec![0, 1, 1, 2, 2, 3, 3, 3, 3]);
        // data bits little-endian by ascending user
        let s = space.state_at(5 + 2);
        assert_eq!(s.symbols(2), vec![1.0, -1.0]);
    }

    #[test]
    fn belief_of_uniform() {
        let f = SetDensity::uniform(id_space(2));
        let b = belief_from_density(&f).unwrap();
        assert!((b.get(ActiveSet::EMPTY) - 0.25).abs() < 1e-15);
        assert!((b.get(ActiveSet::from_mask(1)) - 0.5).abs() < 1e-15);
        assert!((b.get(ActiveSet::full(2)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn belief_of_empty_point_mass() {
        let f = SetDensity::point_mass(id_space(3), 0);
        let b = belief_from_density(&f).unwrap();
        assert!(b.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn belief_of_static_prior() {
        let b = belief_from_density(&prior(2, 0.3)).unwrap();
        assert!((b.get(ActiveSet::from_mask(1)) - 0.70).abs() < 1e-12);
        let f = density_from_belief(&b).unwrap();
        let m = f.masses();
        for (got, want) in m.iter().zip([0.49, 0.21, 0.21, 0.09]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mobius_point_mass() {
        let u = Universe::identities(2).unwrap();
        let beta = BeliefTable::new(u, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let f = density_from_belief(&beta).unwrap();
        assert_eq!(f.masses(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn mobius_rejects_inconsistent_table() {
        let u = Universe::identities(2).unwrap();
        // not monotone: β({1}) > β({1,2})
        let beta = BeliefTable::new(u, vec![0.1, 0.9, 0.1, 0.5]).unwrap();
        assert!(matches!(
            density_from_belief(&beta),
            Err(Error::InconsistentBelief { .. })
        ));
    }

    #[test]
    fn belief_rejects_data_states() {
        let f = SetDensity::uniform(StateSpace::shared(Universe::new(2, 1).unwrap()));
        assert!(matches!(belief_from_density(&f), Err(Error::DataBearingDensity)));
    }

    #[test]
    fn normalize_examples() {
        let s = id_space(1);
        let f = normalize(s.clone(), vec![0.0, 0.0]).unwrap();
        assert!((f.mass(0) - 0.5).abs() < 1e-15);
        let f = normalize(s.clone(), vec![0.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(f.masses(), vec![1.0, 0.0]);
        let f = normalize(s.clone(), vec![-1000.0, -1001.0]).unwrap();
        let e = std::f64::consts::E;
        assert!((f.mass(0) - e / (1.0 + e)).abs() < 1e-12);
        assert!((f.mass(0) - 0.7311).abs() < 1e-4);
        assert!((f.mass(1) - 0.2689).abs() < 1e-4);
        assert!(matches!(
            normalize(s, vec![f64::NEG_INFINITY; 2]),
            Err(Error::NumericalCollapse)
        ));
    }

    #[test]
    fn convolve_point_masses() {
        let s = id_space(2);
        let empty = SetDensity::point_mass(s.clone(), 0);
        let out = convolve_union(&empty, &empty, ActiveSet::EMPTY).unwrap();
        assert_eq!(out.masses(), vec![1.0, 0.0, 0.0, 0.0]);
        let one = SetDensity::point_mass(s.clone(), 1);
        let two = SetDensity::point_mass(s.clone(), 2);
        let out = convolve_union(&one, &two, ActiveSet::from_mask(1)).unwrap();
        assert_eq!(out.masses(), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn convolve_survival_and_birth() {
        let s = id_space(2);
        // survival of {1} with mu = 0.8, birth into {2} with alpha = 0.2
        let surv = SetDensity::from_masses(s.clone(), &[0.2, 0.8, 0.0, 0.0]).unwrap();
        let birth = SetDensity::from_masses(s.clone(), &[0.8, 0.0, 0.2, 0.0]).unwrap();
        let out = convolve_union(&surv, &birth, ActiveSet::from_mask(1)).unwrap();
        for (got, want) in out.masses().iter().zip([0.16, 0.64, 0.04, 0.16]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn convolve_rejects_overlap() {
        let s = id_space(2);
        let one = SetDensity::point_mass(s.clone(), 1);
        assert!(matches!(
            convolve_union(&one, &one, ActiveSet::from_mask(1)),
            Err(Error::OverlappingSupport(_))
        ));
        let two = SetDensity::point_mass(s, 2);
        assert!(convolve_union(&two, &SetDensity::point_mass(two.space().clone(), 0), ActiveSet::from_mask(1)).is_err());
    }

    #[test]
    fn convolve_with_data_bits() {
        let s = StateSpace::shared(Universe::new(2, 1).unwrap());
        // survivor user 0 with bit 1, newborn user 1 with bit 0
        let surv = SetDensity::point_mass(s.clone(), s.index_of(&SlotState::new(ActiveSet::from_mask(1), 1, None)));
        let born = SetDensity::point_mass(s.clone(), s.index_of(&SlotState::new(ActiveSet::from_mask(2), 0, None)));
        let out = convolve_union(&surv, &born, ActiveSet::from_mask(1)).unwrap();
        let st = out.map_state();
        assert_eq!(st.active, ActiveSet::full(2));
        assert_eq!(st.symbols(2), vec![-1.0, 1.0]);
    }

    #[test]
    fn json_round_trip_with_zero_mass() {
        let f = normalize(id_space(2), vec![0.0, f64::NEG_INFINITY, -1.0, -2.0]).unwrap();
        let text = f.to_json().unwrap();
        assert!(text.starts_with("{\"K\":2,\"N\":0,\"log_mass\":["));
        assert!(text.contains("null"));
        let g = SetDensity::from_json(&text).unwrap();
        for (a, b) in f.masses().iter().zip(g.masses()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_marginal_sums_data() {
        let s = StateSpace::shared(Universe::new(2, 1).unwrap().with_reference(true).unwrap());
        let f = SetDensity::uniform(s);
        let m = f.identity_marginal();
        let w = [2.0, 4.0, 4.0, 8.0].map(|x| x / 18.0);
        for (a, b) in m.masses().iter().zip(w) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn active_set_ops() {
        let a = ActiveSet::from_members([0, 2]);
        let b = ActiveSet::from_members([2, 3]);
        assert_eq!(a.union(b).mask(), 0b1101);
        assert_eq!(a.intersection(b).mask(), 0b0100);
        assert_eq!(a.difference(b).mask(), 0b0001);
        assert_eq!(a.distance(b), 2);
        assert_eq!(a.members().collect::<Vec<_>>(), vec![0, 2]);
        assert!(ActiveSet::EMPTY.is_subset_of(a));
        assert_eq!(format!("{a:?}"), "{0, 2}");
    }
}
