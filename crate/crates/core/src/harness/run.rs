//! Monte Carlo engine.
//!
//! At every sweep point each trial draws a traffic realization, its data and
//! noise from its own stream, then runs every configured detector on the same
//! observations. Error counts are integers, so the parallel reduction is
//! exact and the output depends only on the configuration and seed.

use rand::Rng;
use rayon::prelude::*;

use super::config::{BoundKind, DetectorKind, ExperimentConfig, MetricKind};
use super::metrics::{compute_metrics, Indicator, MetricRecord};
use crate::analysis::{semianalytic_dynamic_bound, union_bound_static, DataKnowledge, SequenceLaw};
use crate::channel::{ChannelModel, Observation, SignatureSet};
use crate::detect::{
    causal_map_sequence, classic_all_active_ml, sliding_window_viterbi, static_map_detect, viterbi_sequence_map,
    Frame, Kernel,
};
use crate::error::Result;
use crate::rng::{stream_rng, trial_rng};
use crate::rst::{antipodal, SetDensity, SlotState, StateSpace};
use crate::traffic::TrafficModel;

/// One simulated frame.
#[derive(Clone, Debug)]
pub struct Trial {
    pub truth: Vec<SlotState>,
    pub observations: Vec<Observation>,
    /// Known symbols per slot (trained scenarios), indexed like the channel.
    pub training: Option<Vec<Vec<f64>>>,
}

impl Trial {
    pub fn frame(&self) -> Frame<'_> {
        Frame {
            observations: &self.observations,
            training: self.training.as_deref(),
        }
    }

    fn slot(&self, t: usize) -> Frame<'_> {
        Frame {
            observations: &self.observations[t..t + 1],
            training: self.training.as_deref().map(|tr| &tr[t..t + 1]),
        }
    }
}

/// Models shared by every point of an experiment.
pub struct Setup {
    pub cfg: ExperimentConfig,
    pub traffic: TrafficModel,
    pub kernel: Option<Kernel>,
    pub signatures: SignatureSet,
    /// Density of `X_0` (dynamic) or of the constant set (static).
    pub prior0: SetDensity,
    /// Flat identity prior of the joint ML detector.
    pub flat_prior: SetDensity,
    counters: Vec<(usize, Indicator)>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let traffic = TrafficModel::new(cfg.users, cfg.alpha, cfg.mu, cfg.scenario.symbols())?;
        let kernel = if cfg.scenario.is_dynamic() {
            Some(Kernel::new(&traffic)?)
        } else {
            None
        };
        let indices: Vec<usize> = cfg
            .signature_indices
            .clone()
            .unwrap_or_else(|| (0..cfg.dimension()).collect());
        let signatures = SignatureSet::from_family(cfg.spreading, cfg.length, &indices)?;
        let flat_prior = SetDensity::uniform(StateSpace::shared(traffic.universe().identity_universe()));
        let slots = cfg.slots();
        let mut counters = Vec::new();
        for d in 0..cfg.detectors.len() {
            for m in &cfg.metrics {
                match m {
                    MetricKind::Ber => counters.push((d, Indicator::Ber)),
                    MetricKind::Sep if !cfg.scenario.is_dynamic() => counters.push((d, Indicator::Sep)),
                    MetricKind::Sep => counters.extend(slots.iter().map(|&t| (d, Indicator::SepAt(t)))),
                    MetricKind::Ssep => counters.push((
                        d,
                        Indicator::Ssep {
                            blind: !cfg.scenario.is_trained(),
                        },
                    )),
                    MetricKind::Bsep => counters.extend(slots.iter().map(|&t| (d, Indicator::BsepAt(t)))),
                }
            }
        }
        Ok(Setup {
            cfg: cfg.clone(),
            prior0: traffic.static_prior(),
            traffic,
            kernel,
            signatures,
            flat_prior,
            counters,
        })
    }

    /// Equal-power channel at `Eb/N0 = db` with `N0 = 1`.
    pub fn channel_at(&self, db: f64) -> Result<ChannelModel> {
        let a = 10f64.powf(db / 10.0).sqrt();
        ChannelModel::new(
            &self.signatures,
            vec![a; self.cfg.dimension()],
            1.0,
            self.cfg.reference_user,
        )
    }

    fn label(&self, tail: &str) -> String {
        if self.cfg.label.is_empty() {
            tail.to_string()
        } else {
            format!("{}/{tail}", self.cfg.label)
        }
    }

    /// Draws the truth, training symbols and observations of one frame.
    pub fn generate<R: Rng + ?Sized>(&self, channel: &ChannelModel, rng: &mut R) -> Trial {
        let cfg = &self.cfg;
        let m = &self.traffic;
        let frames = cfg.frame_length;
        let mut set = if cfg.scenario.is_dynamic() {
            self.prior0.space().set_at(self.prior0.sample_index(rng))
        } else {
            m.sample_static_set(rng)
        };
        let mut truth = Vec::with_capacity(frames);
        let mut observations = Vec::with_capacity(frames);
        let mut training = cfg.scenario.is_trained().then(Vec::new);
        for _ in 0..frames {
            if cfg.scenario.is_dynamic() {
                set = m.sample_next_set(set, rng);
            }
            let data = m.sample_data(set, rng);
            let ref_bit = cfg.reference_user.then(|| rng.random::<bool>());
            let state = SlotState::new(set, data, ref_bit);
            let known: Option<Vec<f64>> = training
                .as_ref()
                .map(|_| (0..channel.dim()).map(|_| antipodal(rng.random())).collect());
            observations.push(channel.synthesize_observation(&state, known.as_deref(), rng));
            if let (Some(tr), Some(k)) = (training.as_mut(), known) {
                tr.push(k);
            }
            truth.push(state);
        }
        Trial {
            truth,
            observations,
            training,
        }
    }

    fn per_slot(
        &self,
        trial: &Trial,
        f: impl Fn(Frame<'_>) -> Result<Vec<SlotState>>,
    ) -> Result<Vec<SlotState>> {
        let mut out = Vec::with_capacity(trial.observations.len());
        for t in 0..trial.observations.len() {
            out.extend(f(trial.slot(t))?);
        }
        Ok(out)
    }

    /// Runs one detector on a frame.
    pub fn detect(&self, kind: DetectorKind, channel: &ChannelModel, trial: &Trial) -> Result<Vec<SlotState>> {
        let dynamic = self.cfg.scenario.is_dynamic();
        let static_with = |prior: &SetDensity| {
            if dynamic {
                self.per_slot(trial, |f| static_map_detect(f, prior, channel))
            } else {
                static_map_detect(trial.frame(), prior, channel)
            }
        };
        let kernel = || self.kernel.as_ref().expect("dynamic detectors need a kernel");
        match kind {
            DetectorKind::ClassicMl => trial
                .observations
                .iter()
                .enumerate()
                .map(|(t, y)| {
                    classic_all_active_ml(y, channel, trial.training.as_ref().map(|tr| tr[t].as_slice()))
                })
                .collect(),
            DetectorKind::JointMl => static_with(&self.flat_prior),
            DetectorKind::MapStatic => static_with(&self.prior0),
            DetectorKind::BayesCausal => causal_map_sequence(trial.frame(), kernel(), channel, &self.prior0),
            DetectorKind::Viterbi => viterbi_sequence_map(trial.frame(), kernel(), channel, &self.prior0),
            DetectorKind::ViterbiWindow => {
                sliding_window_viterbi(trial.frame(), kernel(), channel, &self.prior0, self.cfg.window_delta)
            }
        }
    }

    fn trial_counts(&self, channel: &ChannelModel, point: usize, index: usize) -> Result<Vec<u64>> {
        let mut rng = trial_rng(self.cfg.seed, point as u64, index as u64);
        let trial = self.generate(channel, &mut rng);
        let mut out = vec![0u64; 2 * self.counters.len()];
        let mut estimates: Vec<Option<Vec<SlotState>>> = vec![None; self.cfg.detectors.len()];
        for (c, (d, kind)) in self.counters.iter().enumerate() {
            if estimates[*d].is_none() {
                estimates[*d] = Some(self.detect(self.cfg.detectors[*d], channel, &trial)?);
            }
            let est = estimates[*d].as_ref().expect("estimate computed above");
            let (e, n) = compute_metrics(&trial.truth, est, *kind)?;
            out[2 * c] = e;
            out[2 * c + 1] = n;
        }
        Ok(out)
    }

    /// Simulated metrics and bounds at one sweep point.
    pub fn run_point(&self, point: usize, db: f64) -> Result<Vec<MetricRecord>> {
        let channel = self.channel_at(db)?;
        let cfg = &self.cfg;
        let mut totals = vec![0u64; 2 * self.counters.len()];
        let mut done = 0;
        while done < cfg.trials && !self.counters.is_empty() {
            let end = (done + cfg.batch).min(cfg.trials);
            let batch = (done..end)
                .into_par_iter()
                .map(|i| self.trial_counts(&channel, point, i))
                .try_reduce(
                    || vec![0u64; totals.len()],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        Ok(a)
                    },
                )?;
            totals.iter_mut().zip(batch).for_each(|(x, y)| *x += y);
            done = end;
            if let Some(min) = cfg.min_errors {
                if totals.iter().step_by(2).all(|&e| e >= min) {
                    break;
                }
            }
        }
        let mut records: Vec<MetricRecord> = self
            .counters
            .iter()
            .enumerate()
            .map(|(c, (d, kind))| {
                let name = self.label(&format!("{}/{}", cfg.detectors[*d], kind.label()));
                MetricRecord::from_counts(name, db, totals[2 * c], totals[2 * c + 1])
            })
            .collect();
        records.extend(self.bounds_at(&channel, point, db)?);
        Ok(records)
    }

    fn bounds_at(&self, channel: &ChannelModel, point: usize, db: f64) -> Result<Vec<MetricRecord>> {
        let cfg = &self.cfg;
        let data = if cfg.scenario.is_trained() {
            DataKnowledge::Trained
        } else {
            DataKnowledge::Blind
        };
        let mut out = Vec::new();
        for b in &cfg.bounds {
            match b {
                BoundKind::Union | BoundKind::Restricted => {
                    let law = SequenceLaw::static_law(&self.traffic);
                    let (n, name) = match b {
                        BoundKind::Union => (None, "bound/union".to_string()),
                        _ => (Some(cfg.restrict_n), format!("bound/restricted_n{}", cfg.restrict_n)),
                    };
                    let v = union_bound_static(&law, channel, cfg.frame_length, n, cfg.bound_mode, data)?;
                    out.push(MetricRecord::value(self.label(&name), db, v, 0.0, 0));
                }
                BoundKind::Semianalytic => {
                    let kernel = self.kernel.as_ref().expect("dynamic scenario has a kernel");
                    let mut rng = stream_rng(cfg.seed, u64::MAX - point as u64);
                    let est = semianalytic_dynamic_bound(
                        kernel,
                        channel,
                        &self.prior0,
                        cfg.frame_length,
                        cfg.bound_samples,
                        cfg.restrict_n,
                        cfg.bound_mode,
                        data,
                        &mut rng,
                    )?;
                    out.push(MetricRecord::value(
                        self.label("bound/semianalytic"),
                        db,
                        est.mean,
                        est.stderr,
                        est.samples as u64,
                    ));
                }
            }
        }
        Ok(out)
    }
}

/// Runs every sweep point of one experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    let setup = Setup::new(cfg)?;
    let mut out = Vec::new();
    for (i, db) in cfg.ebn0_db.iter().enumerate() {
        out.extend(setup.run_point(i, *db)?);
    }
    Ok(out)
}

/// Runs several experiments (e.g. the expansion of a preset) in order.
pub fn run_all(cfgs: &[ExperimentConfig]) -> Result<Vec<MetricRecord>> {
    let mut out = Vec::new();
    for c in cfgs {
        out.extend(run_experiment(c)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        for (k, v) in [
            ("scenario", "dynamic_blind"),
            ("users", "2"),
            ("alpha", "0.2"),
            ("mu", "0.8"),
            ("reference_user", "true"),
            ("detector", "classic_ml, map_static, bayes_causal, viterbi, viterbi_window"),
            ("metrics", "BER, SEP, SSEP, BSEP"),
            ("frame_length", "4"),
            ("trials", "300"),
            ("batch", "128"),
            ("ebn0_db", "4, 8"),
        ] {
            c.apply(k, v).unwrap();
        }
        c
    }

    #[test]
    fn deterministic_given_seed() {
        let c = small();
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
        let mut d = c.clone();
        d.seed = 2;
        assert_ne!(run_experiment(&c).unwrap(), run_experiment(&d).unwrap());
    }

    #[test]
    fn bsep_dominates_sep_every_trial() {
        let c = small();
        let setup = Setup::new(&c).unwrap();
        let ch = setup.channel_at(2.0).unwrap();
        for i in 0..200 {
            let trial = setup.generate(&ch, &mut trial_rng(7, 0, i));
            let est = setup.detect(DetectorKind::Viterbi, &ch, &trial).unwrap();
            for t in 1..=4 {
                let (s, _) = compute_metrics(&trial.truth, &est, Indicator::SepAt(t)).unwrap();
                let (b, _) = compute_metrics(&trial.truth, &est, Indicator::BsepAt(t)).unwrap();
                assert!(b >= s);
            }
        }
    }

    #[test]
    fn trained_static_generation() {
        let mut c = ExperimentConfig::default();
        c.apply("scenario", "static_trained").unwrap();
        c.apply("frame_length", "3").unwrap();
        let setup = Setup::new(&c).unwrap();
        let ch = setup.channel_at(0.0).unwrap();
        let t = setup.generate(&ch, &mut trial_rng(1, 0, 0));
        assert!(t.truth.iter().all(|s| s.active == t.truth[0].active && s.data == 0));
        assert_eq!(t.training.as_ref().unwrap().len(), 3);
    }
}
