//! Synchronous DS-CDMA observation model at the matched-filter-bank output.
//!
//! `y_t = R·A·b_t + z_t` with `z_t ~ N(0, (N0/2)·R)`, where `R` is the
//! user-by-user correlation matrix of unit-norm signatures, `A` the diagonal
//! amplitude matrix and `b_t` the antipodal symbol vector with zeros at
//! inactive users. When the reference user is present it occupies index 0
//! and interferer `u` sits at index `u + 1`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rst::{antipodal, SlotState};

/// Primitive feedback polynomials, bit `k` = coefficient of `x^k`.
pub fn primitive_taps(degree: u32) -> Option<u32> {
    Some(match degree {
        2 => 0b111,
        3 => 0b1011,
        4 => 0b1_0011,
        5 => 0b10_0101,
        6 => 0b100_0011,
        7 => 0b1000_0011,
        8 => 0x11D,
        9 => 0x211,
        10 => 0x409,
        11 => 0x805,
        12 => 0x1053,
        _ => return None,
    })
}

/// One period of the binary LFSR sequence of `taps`, started from the fill
/// `1, 0, …, 0`. Fails unless the period is `2^degree − 1`.
pub fn msequence_bits(degree: u32, taps: u32) -> Result<Vec<u8>> {
    if !(2..=20).contains(&degree) {
        return Err(Error::InvalidParameter(format!("LFSR degree {degree}")));
    }
    let n = degree as usize;
    let expected = (1usize << n) - 1;
    let not_primitive = |period| Error::NotPrimitive {
        taps,
        period,
        expected,
    };
    if taps >> degree != 1 {
        return Err(not_primitive(0));
    }
    // state holds s_k .. s_{k+n-1}, s_k in bit 0
    let initial: u32 = 1;
    let feedback = taps & ((1 << degree) - 1);
    let mut state = initial;
    let mut bits = Vec::with_capacity(expected);
    for step in 1..=expected + 1 {
        bits.push((state & 1) as u8);
        let next = (state & feedback).count_ones() & 1;
        state = (state >> 1) | (next << (degree - 1));
        if state == initial {
            if step != expected {
                return Err(not_primitive(step));
            }
            return Ok(bits);
        }
    }
    Err(not_primitive(0))
}

fn to_unit_antipodal(bits: &[u8]) -> Vec<f64> {
    let scale = 1.0 / (bits.len() as f64).sqrt();
    bits.iter().map(|&b| antipodal(b == 1) * scale).collect()
}

/// Unit-norm antipodal m-sequence, cyclically advanced by `shift` chips.
pub fn gen_msequence(degree: u32, taps: u32, shift: usize) -> Result<Vec<f64>> {
    let mut bits = msequence_bits(degree, taps)?;
    let len = bits.len();
    bits.rotate_left(shift % len);
    Ok(to_unit_antipodal(&bits))
}

/// Small set of Kasami sequences of length `2^n − 1` (`n` even): the base
/// m-sequence `u` and `u ⊕ T^j w` for `j = 0 .. 2^{n/2} − 2`, where `w` is
/// `u` decimated by `2^{n/2} + 1`.
pub fn gen_kasami_small_set(n: u32) -> Result<Vec<Vec<f64>>> {
    Ok(kasami_bits(n)?.iter().map(|b| to_unit_antipodal(b)).collect())
}

fn kasami_bits(n: u32) -> Result<Vec<Vec<u8>>> {
    if n % 2 == 1 {
        return Err(Error::OddDegree(n));
    }
    let taps = primitive_taps(n)
        .ok_or_else(|| Error::InvalidParameter(format!("no primitive polynomial for degree {n}")))?;
    let u = msequence_bits(n, taps)?;
    let len = u.len();
    let q = (1usize << (n / 2)) + 1;
    let w: Vec<u8> = (0..len).map(|k| u[(q * k) % len]).collect();
    let mut family = vec![u.clone()];
    for j in 0..(1usize << (n / 2)) - 1 {
        family.push((0..len).map(|k| u[k] ^ w[(k + j) % len]).collect());
    }
    Ok(family)
}

/// Periodic correlation of two equal-length sequences at cyclic lag `lag`.
pub fn periodic_correlation(a: &[f64], b: &[f64], lag: usize) -> f64 {
    let len = a.len();
    (0..len).map(|k| a[k] * b[(k + lag) % len]).sum()
}

/// Spreading family used to build a [`SignatureSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spreading {
    /// Distinct cyclic shifts of one m-sequence.
    MSequence,
    /// Small-set Kasami family.
    Kasami,
}

impl std::str::FromStr for Spreading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "msequence" => Ok(Spreading::MSequence),
            "kasami" => Ok(Spreading::Kasami),
            other => Err(Error::Config(format!("unknown spreading family '{other}'"))),
        }
    }
}

impl std::fmt::Display for Spreading {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Spreading::MSequence => "msequence",
            Spreading::Kasami => "kasami",
        })
    }
}

/// Unit-norm signatures, one per user (reference user first when present).
#[derive(Clone, Debug, PartialEq)]
pub struct SignatureSet {
    length: usize,
    chips: Vec<Vec<f64>>,
}

impl SignatureSet {
    pub fn new(chips: Vec<Vec<f64>>) -> Result<Self> {
        let length = chips.first().map_or(0, Vec::len);
        if length == 0 {
            return Err(Error::InvalidParameter("empty signature set".into()));
        }
        for (i, c) in chips.iter().enumerate() {
            if c.len() != length {
                return Err(Error::LengthMismatch(format!(
                    "signature {i} has {} chips, expected {length}",
                    c.len()
                )));
            }
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("signature {i} has norm {norm}")));
            }
        }
        Ok(SignatureSet { length, chips })
    }

    /// The canonical orthonormal basis (`count` chips per signature).
    pub fn orthogonal(count: usize) -> Result<Self> {
        Self::new(
            (0..count)
                .map(|i| (0..count).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    /// Chooses `indices` from the family of length `length`: cyclic shifts
    /// for m-sequences, members of the canonical construction for Kasami.
    pub fn from_family(family: Spreading, length: usize, indices: &[usize]) -> Result<Self> {
        let degree = (length + 1).trailing_zeros();
        if (1usize << degree) != length + 1 {
            return Err(Error::Config(format!("length {length} is not 2^n - 1")));
        }
        let pool = match family {
            Spreading::MSequence => {
                let taps = primitive_taps(degree).ok_or_else(|| {
                    Error::Config(format!("no primitive polynomial of degree {degree}"))
                })?;
                (0..length)
                    .map(|s| gen_msequence(degree, taps, s))
                    .collect::<Result<Vec<_>>>()?
            }
            Spreading::Kasami => gen_kasami_small_set(degree)?,
        };
        let chips = indices
            .iter()
            .map(|&i| {
                pool.get(i).cloned().ok_or_else(|| {
                    Error::Config(format!(
                        "signature index {i} outside the {family} family of size {}",
                        pool.len()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(chips)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn count(&self) -> usize {
        self.chips.len()
    }

    pub fn chips(&self) -> &[Vec<f64>] {
        &self.chips
    }

    /// One row per user of `+1`/`-1` chip signs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.chips {
            let row: Vec<&str> = c
                .iter()
                .map(|x| match x.partial_cmp(&0.0) {
                    Some(std::cmp::Ordering::Less) => "-1",
                    Some(std::cmp::Ordering::Greater) => "+1",
                    _ => "0",
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Inverse of [`SignatureSet::to_text`]; rows are rescaled to unit norm.
    pub fn from_text(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let v = l
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| Error::Config(format!("chip '{t}': {e}"))))
                    .collect::<Result<Vec<f64>>>()?;
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                Ok(v.into_iter().map(|x| x / norm).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }
}

/// Gram matrix of the signatures; fails when it is not positive definite.
pub fn correlation_matrix(s: &SignatureSet) -> Result<DMatrix<f64>> {
    let k = s.count();
    let r = DMatrix::from_fn(k, k, |i, j| {
        s.chips[i].iter().zip(&s.chips[j]).map(|(a, b)| a * b).sum()
    });
    if r.clone().cholesky().is_none() {
        return Err(Error::SingularCorrelation);
    }
    Ok(r)
}

/// Matched-filter-bank output for one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Observation with the state-independent parts of the metric precomputed.
#[derive(Clone, Debug)]
pub struct PreparedObservation {
    /// `y' R^{-1} y`.
    energy: f64,
    /// `a(i) y(i)`.
    weighted: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ChannelModel {
    r: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    chol: DMatrix<f64>,
    amplitudes: Vec<f64>,
    /// `A R A`.
    gram: DMatrix<f64>,
    n0: f64,
    reference: bool,
}

impl ChannelModel {
    pub fn new(signatures: &SignatureSet, amplitudes: Vec<f64>, n0: f64, reference: bool) -> Result<Self> {
        Self::from_correlation(correlation_matrix(signatures)?, amplitudes, n0, reference)
    }

    pub fn from_correlation(r: DMatrix<f64>, amplitudes: Vec<f64>, n0: f64, reference: bool) -> Result<Self> {
        let k = r.nrows();
        if r.ncols() != k || amplitudes.len() != k {
            return Err(Error::LengthMismatch(format!(
                "R is {}x{}, {} amplitudes",
                r.nrows(),
                r.ncols(),
                amplitudes.len()
            )));
        }
        if reference && k == 0 {
            return Err(Error::InvalidParameter("reference user needs a signature".into()));
        }
        for i in 0..k {
            if (r[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("R[{i},{i}] = {}", r[(i, i)])));
            }
            for j in 0..i {
                if (r[(i, j)] - r[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("R is not symmetric".into()));
                }
            }
        }
        if let Some(a) = amplitudes.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParameter(format!("amplitude {a}")));
        }
        if !(n0.is_finite() && n0 > 0.0) {
            return Err(Error::InvalidParameter(format!("N0 = {n0}")));
        }
        let factor = r.clone().cholesky().ok_or(Error::SingularCorrelation)?;
        let chol = factor.l();
        let a = DMatrix::from_diagonal(&DVector::from_vec(amplitudes.clone()));
        let gram = &a * &r * &a;
        Ok(ChannelModel {
            r,
            factor,
            chol,
            amplitudes,
            gram,
            n0,
            reference,
        })
    }

    /// Same channel at another noise level.
    pub fn with_n0(&self, n0: f64) -> Result<Self> {
        if !(n0.is_finite() && n0 > 0.0) {
            return Err(Error::InvalidParameter(format!("N0 = {n0}")));
        }
        Ok(ChannelModel { n0, ..self.clone() })
    }

    /// Number of signatures `K′`.
    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    /// Number of interferers `K` (excludes the reference user).
    pub fn interferers(&self) -> usize {
        self.dim() - usize::from(self.reference)
    }

    pub fn has_reference(&self) -> bool {
        self.reference
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `A R A`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    /// Position of interferer `user` in the symbol vector.
    pub fn interferer_index(&self, user: usize) -> usize {
        user + usize::from(self.reference)
    }

    /// Symbol vector `b(state)` (length `K′`). Interferer symbols come from
    /// `training` when given (known data), otherwise from the state's data
    /// bits (one symbol per slot). The reference symbol always comes from the
    /// state's reference bit.
    pub fn symbol_vector(&self, state: &SlotState, training: Option<&[f64]>) -> Vec<f64> {
        let mut b = vec![0.0; self.dim()];
        self.fill_symbols(state, training, &mut b);
        b
    }

    /// [`ChannelModel::symbol_vector`] into a caller buffer of length `K′`.
    pub fn fill_symbols(&self, state: &SlotState, training: Option<&[f64]>, b: &mut [f64]) {
        b.fill(0.0);
        if self.reference {
            b[0] = antipodal(state.ref_bit.unwrap_or(false));
        }
        for (rank, u) in state.active.members().enumerate() {
            let i = self.interferer_index(u);
            b[i] = match training {
                Some(t) => t[i],
                None => antipodal(state.data >> rank & 1 == 1),
            };
        }
    }

    /// Noiseless signal `R A b`.
    pub fn mean_signal(&self, symbols: &[f64]) -> Vec<f64> {
        let ab = DVector::from_iterator(
            self.dim(),
            symbols.iter().zip(&self.amplitudes).map(|(b, a)| a * b),
        );
        (&self.r * ab).iter().copied().collect()
    }

    /// Correlated noise `sqrt(N0/2) L g` with `g` standard normal.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.dim();
        let g = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let scale = (self.n0 / 2.0).sqrt();
        (&self.chol * g).iter().map(|v| v * scale).collect()
    }

    pub fn synthesize<R: Rng + ?Sized>(&self, symbols: &[f64], rng: &mut R) -> Observation {
        let mean = self.mean_signal(symbols);
        let noise = self.sample_noise(rng);
        Observation(mean.iter().zip(noise).map(|(m, z)| m + z).collect())
    }

    pub fn synthesize_observation<R: Rng + ?Sized>(
        &self,
        state: &SlotState,
        training: Option<&[f64]>,
        rng: &mut R,
    ) -> Observation {
        self.synthesize(&self.symbol_vector(state, training), rng)
    }

    pub fn prepare(&self, y: &Observation) -> PreparedObservation {
        let yv = DVector::from_column_slice(y.as_slice());
        let w = self.factor.solve(&yv);
        PreparedObservation {
            energy: yv.dot(&w),
            weighted: y.0.iter().zip(&self.amplitudes).map(|(y, a)| a * y).collect(),
        }
    }

    /// `−(1/N0)(y − RAb)′ R^{-1} (y − RAb)` from a prepared observation.
    pub fn log_likelihood_prepared(&self, p: &PreparedObservation, symbols: &[f64]) -> f64 {
        let k = self.dim();
        let mut cross = 0.0;
        let mut quad = 0.0;
        for i in 0..k {
            let bi = symbols[i];
            if bi == 0.0 {
                continue;
            }
            cross += p.weighted[i] * bi;
            let mut row = 0.0;
            for (j, bj) in symbols.iter().enumerate() {
                row += self.gram[(i, j)] * bj;
            }
            quad += bi * row;
        }
        -(p.energy - 2.0 * cross + quad) / self.n0
    }

    /// Log-density of `y` given the symbol vector, up to a state-independent
    /// constant: `−(1/N0)(y − RAb)′ R^{-1} (y − RAb)`.
    pub fn log_likelihood(&self, y: &Observation, symbols: &[f64]) -> f64 {
        self.log_likelihood_prepared(&self.prepare(y), symbols)
    }

    pub fn log_likelihood_state(&self, y: &Observation, state: &SlotState, training: Option<&[f64]>) -> f64 {
        self.log_likelihood(y, &self.symbol_vector(state, training))
    }
}
