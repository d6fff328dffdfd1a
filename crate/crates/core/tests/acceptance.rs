//! Acceptance suite. Each test prints a single `PASS`/`FAIL` line on stderr
//! (written through the raw handle so it shows without `--nocapture`).

mod common;

use std::io::Write;

use common::Instance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rsmud_core::analysis::{pep, q_function, PairContext, PepMode, SequenceLaw};
use rsmud_core::channel::{ChannelModel, SignatureSet, Spreading};
use rsmud_core::detect::{bayes_filter, Frame, Kernel, Trellis};
use rsmud_core::harness::config::{DetectorKind, MetricKind, Scenario};
use rsmud_core::harness::{preset, run_experiment, ExperimentConfig, MetricRecord};
use rsmud_core::rst::{belief_from_density, density_from_belief, ActiveSet, SetDensity, SlotState, StateSpace, Universe};
use rsmud_core::traffic::TrafficModel;

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance {id}] {verdict} {name}: {detail}");
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn find<'a>(records: &'a [MetricRecord], suffix: &str, db: f64) -> &'a MetricRecord {
    records
        .iter()
        .find(|r| r.metric.ends_with(suffix) && r.point_db == db)
        .unwrap_or_else(|| panic!("no record `{suffix}` at {db} dB"))
}

fn select(name: &str, label: &str) -> ExperimentConfig {
    preset(name)
        .unwrap()
        .into_iter()
        .find(|c| c.label == label)
        .unwrap_or_else(|| panic!("{name} has no `{label}`"))
}

/// True when the 95% intervals of `lo` and `hi` are disjoint with `lo` below.
fn clearly_below(lo: &MetricRecord, hi: &MetricRecord) -> bool {
    lo.ci95().1 < hi.ci95().0
}

fn overlapping(a: &MetricRecord, b: &MetricRecord) -> bool {
    a.ci95().0 <= b.ci95().1 && b.ci95().0 <= a.ci95().1
}

#[test]
fn c1_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_round_trip: f64 = 0.0;
    let mut worst_row: f64 = 0.0;
    for k in 0..=8usize {
        for _ in 0..20 {
            let space = StateSpace::shared(Universe::identities(k).unwrap());
            let masses: Vec<f64> = (0..space.len()).map(|_| rng.random::<f64>()).collect();
            let f = SetDensity::from_masses(space, &masses).unwrap();
            let back = density_from_belief(&belief_from_density(&f).unwrap()).unwrap();
            for (a, b) in f.masses().iter().zip(back.masses()) {
                worst_round_trip = worst_round_trip.max((a - b).abs());
            }
        }
        for n in 0..=1 {
            let m = TrafficModel::new(k, rng.random(), rng.random(), n).unwrap();
            for b in 0..1u32 << k {
                let row = m.transition_density(ActiveSet::from_mask(b)).unwrap();
                worst_row = worst_row.max((row.total_mass() - 1.0).abs());
            }
        }
    }

    let mut worst_norm: f64 = 0.0;
    let mut worst_marginal: f64 = 0.0;
    let mut viterbi_mismatches = 0;
    let instances = 200;
    for _ in 0..instances {
        let inst = Instance::random(&mut rng, 2, 4);
        let kernel = Kernel::new(&inst.traffic).unwrap();
        let frame = Frame {
            observations: &inst.observations,
            training: inst.training.as_deref(),
        };
        for f in bayes_filter(frame, &kernel, &inst.channel, &inst.prior0).unwrap() {
            worst_norm = worst_norm.max((f.posterior.total_mass() - 1.0).abs());
            for (a, b) in f.posterior.masses().iter().zip(inst.exhaustive_marginal(f.t)) {
                worst_marginal = worst_marginal.max((a - b).abs());
            }
        }
        let (path, _) = Trellis::build(frame, &kernel, &inst.channel, &inst.prior0)
            .unwrap()
            .viterbi();
        if path != inst.brute_force_path() {
            viterbi_mismatches += 1;
        }
    }
    let ok = worst_round_trip <= 1e-12
        && worst_row <= 1e-12
        && worst_norm <= 1e-12
        && worst_marginal <= 1e-9
        && viterbi_mismatches == 0;
    report(
        1,
        "oracle equivalence",
        ok,
        &format!(
            "round trip {worst_round_trip:.1e}, kernel rows {worst_row:.1e}, normalization {worst_norm:.1e}, \
             filter vs exhaustive {worst_marginal:.1e}, Viterbi mismatches {viterbi_mismatches}/{instances}"
        ),
    );
}

#[test]
fn c2_single_user_ber_matches_bpsk() {
    let cfg = ExperimentConfig {
        label: "single".into(),
        scenario: Scenario::StaticBlind,
        users: 0,
        reference_user: true,
        detectors: vec![DetectorKind::ClassicMl],
        metrics: vec![MetricKind::Ber],
        ebn0_db: vec![0.0, 2.0, 4.0, 6.0, 8.0],
        trials: 100_000,
        seed: 2,
        ..ExperimentConfig::default()
    };
    let records = run_experiment(&cfg).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for db in &cfg.ebn0_db {
        let r = find(&records, "classic_ml/BER", *db);
        let q = q_function((2.0 * 10f64.powf(db / 10.0)).sqrt());
        let se = (q * (1.0 - q) / r.trials as f64).sqrt();
        let z = (r.estimate - q) / se;
        ok &= z.abs() <= 3.0;
        detail.push(format!("{db} dB {:.3e} vs {q:.3e} ({z:+.2}σ)", r.estimate));
    }
    report(2, "single-user BER", ok, &detail.join("; "));
}

#[test]
fn c3_joint_detection_versus_classic() {
    let mut low = select("fig1", "alpha=0.1");
    low.ebn0_db = vec![8.0];
    low.trials = 100_000;
    let rec = run_experiment(&low).unwrap();
    let classic = find(&rec, "classic_ml/BER", 8.0);
    let joint = find(&rec, "joint_ml/BER", 8.0);
    let single = q_function((2.0 * 10f64.powf(0.8)).sqrt());
    let ordering = clearly_below(joint, classic) && joint.ci95().0 > single && classic.ci95().0 > single;

    let mut high = low.clone();
    high.alpha = 0.99;
    high.label = "alpha=0.99".into();
    let rec_high = run_experiment(&high).unwrap();
    let classic_h = find(&rec_high, "classic_ml/BER", 8.0);
    let joint_h = find(&rec_high, "joint_ml/BER", 8.0);
    let reversal = classic_h.estimate <= joint_h.estimate;
    report(
        3,
        "joint vs classic ML",
        ordering && reversal,
        &format!(
            "α=0.1: joint {:.3e}±{:.1e} < classic {:.3e}±{:.1e}, single-user {single:.3e}; \
             α=0.99: classic {:.3e} <= joint {:.3e}",
            joint.estimate, joint.stderr, classic.estimate, classic.stderr, classic_h.estimate, joint_h.estimate
        ),
    );
}

#[test]
fn c4_prior_knowledge_never_hurts() {
    let mut cfg = select("fig2", "alpha=0.1");
    cfg.ebn0_db = vec![6.0];
    cfg.trials = 100_000;
    let rec = run_experiment(&cfg).unwrap();
    let map = find(&rec, "map_static/BER", 6.0);
    let joint = find(&rec, "joint_ml/BER", 6.0);
    let ok = map.ci95().0 <= joint.ci95().1;
    report(
        4,
        "MAP with activity prior vs joint ML",
        ok,
        &format!(
            "MAP {:.3e}±{:.1e}, joint {:.3e}±{:.1e}",
            map.estimate, map.stderr, joint.estimate, joint.stderr
        ),
    );
}

#[test]
fn c5_union_bound_and_single_error_approximation() {
    let mut ok = true;
    let mut detail = Vec::new();
    for t in 1..=3 {
        let mut cfg = select("fig4", &format!("T={t}"));
        cfg.trials = 30_000;
        let rec = run_experiment(&cfg).unwrap();
        let mut gaps = Vec::new();
        for db in &cfg.ebn0_db {
            let sim = find(&rec, "joint_ml/SEP", *db);
            let bound = find(&rec, "bound/union", *db).estimate;
            let p1 = find(&rec, &format!("bound/restricted_n{}", cfg.restrict_n), *db).estimate;
            if sim.estimate > bound + 3.0 * sim.stderr {
                ok = false;
                detail.push(format!("T={t} {db} dB: SEP {:.3e} above bound {bound:.3e}", sim.estimate));
            }
            gaps.push((bound - p1).abs() / bound);
        }
        let top = &gaps[gaps.len() - 3..];
        let monotone = top.windows(2).all(|w| w[1] < w[0]);
        ok &= monotone;
        detail.push(format!(
            "T={t} top gaps {:.2e} {:.2e} {:.2e}",
            top[0], top[1], top[2]
        ));
    }
    report(5, "union bound and dominant-event approximation", ok, &detail.join("; "));
}

#[test]
fn c6_causality_constraint() {
    let mut cfg = preset("fig5").unwrap().remove(0);
    cfg.ebn0_db = vec![8.0];
    cfg.trials = 50_000;
    let rec = run_experiment(&cfg).unwrap();
    let v1 = find(&rec, "viterbi/SEP@1", 8.0);
    let b1 = find(&rec, "bayes_causal/SEP@1", 8.0);
    let v10 = find(&rec, "viterbi/SEP@10", 8.0);
    let b10 = find(&rec, "bayes_causal/SEP@10", 8.0);
    let ok = overlapping(v10, b10) && clearly_below(v1, b1);
    report(
        6,
        "sequence vs causal detection",
        ok,
        &format!(
            "slot 1: Viterbi {:.4}±{:.4}, causal {:.4}±{:.4}; slot 10: Viterbi {:.4}±{:.4}, causal {:.4}±{:.4}",
            v1.estimate, v1.stderr, b1.estimate, b1.stderr, v10.estimate, v10.stderr, b10.estimate, b10.stderr
        ),
    );
}

#[test]
fn c7_semianalytic_bound_tracks_simulation() {
    let mut cfg = preset("fig6").unwrap().remove(0);
    let top: Vec<f64> = cfg.ebn0_db[cfg.ebn0_db.len() - 2..].to_vec();
    cfg.ebn0_db = top.clone();
    cfg.trials = 50_000;
    cfg.bound_samples = 1000;
    let rec = run_experiment(&cfg).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for db in top {
        let sim = find(&rec, "viterbi/SSEP", db);
        let bound = find(&rec, "bound/semianalytic", db);
        let tol = 3.0 * (sim.stderr.powi(2) + bound.stderr.powi(2)).sqrt();
        ok &= bound.estimate + tol >= sim.estimate && bound.estimate <= 5.0 * sim.estimate;
        detail.push(format!(
            "{db} dB: bound {:.4}±{:.4} (M={}), SSEP {:.4}±{:.4}, ratio {:.2}",
            bound.estimate,
            bound.stderr,
            bound.trials,
            sim.estimate,
            sim.stderr,
            bound.estimate / sim.estimate
        ));
    }
    report(7, "semi-analytic sequence bound", ok, &detail.join("; "));
}

#[test]
fn c8_pep_closed_form_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draws = 1_000_000u64;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for pair in 0..20 {
        let k = rng.random_range(1..=3usize);
        let frames = rng.random_range(1..=2usize);
        let mode = [PepMode::Ml, PepMode::MapIdentities, PepMode::MapWithData][pair % 3];
        let sig = SignatureSet::from_family(Spreading::MSequence, 7, &(0..k).collect::<Vec<_>>()).unwrap();
        let amps: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..1.2)).collect();
        let n0 = rng.random_range(0.5..2.0);
        let channel = ChannelModel::new(&sig, amps, n0, false).unwrap();
        let traffic = TrafficModel::memoryless(k, rng.random_range(0.1..0.9), 1).unwrap();
        let law = SequenceLaw::static_law(&traffic);

        let space = StateSpace::new(Universe::new(k, 1).unwrap());
        let draw_frame = |rng: &mut ChaCha8Rng, set: ActiveSet| -> Vec<SlotState> {
            let block: Vec<usize> = space.block(set).collect();
            (0..frames)
                .map(|_| space.state_at(block[rng.random_range(0..block.len())]))
                .collect()
        };
        let (truth, competitor, ctx) = loop {
            let x = ActiveSet::from_mask(rng.random_range(0..1u32 << k));
            let xh = ActiveSet::from_mask(rng.random_range(0..1u32 << k));
            let a = draw_frame(&mut rng, x);
            let b = draw_frame(&mut rng, xh);
            let sym = |s: &[SlotState]| -> Vec<Vec<f64>> {
                s.iter()
                    .map(|st| {
                        let mut v = vec![0.0; k];
                        channel.fill_symbols(st, None, &mut v);
                        v
                    })
                    .collect()
            };
            let ctx =
                PairContext::from_symbols(&vec![x; frames], &vec![xh; frames], &sym(&a), &sym(&b)).unwrap();
            if !ctx.is_identical() {
                break (a, b, ctx);
            }
        };
        let closed = pep(&ctx, &law, &channel, mode).unwrap();

        let (x, xh) = (truth[0].active, competitor[0].active);
        let prior_gap = match mode {
            PepMode::Ml => 0.0,
            PepMode::MapIdentities => traffic.log_static_set(xh) - traffic.log_static_set(x),
            PepMode::MapWithData => {
                traffic.log_static_set(xh) - traffic.log_static_set(x)
                    + frames as f64 * (traffic.log_data_factor(xh) - traffic.log_data_factor(x))
            }
        };
        let mut crossings = 0u64;
        for _ in 0..draws {
            let mut gap = prior_gap;
            for t in 0..frames {
                let y = channel.synthesize_observation(&truth[t], None, &mut rng);
                gap += channel.log_likelihood_state(&y, &competitor[t], None)
                    - channel.log_likelihood_state(&y, &truth[t], None);
            }
            if gap > 0.0 {
                crossings += 1;
            }
        }
        let freq = crossings as f64 / draws as f64;
        let se = (closed * (1.0 - closed) / draws as f64).sqrt();
        let z = if se > 0.0 { (freq - closed) / se } else if freq == closed { 0.0 } else { f64::INFINITY };
        worst = worst.max(z.abs());
        ok &= z.abs() <= 3.0;
    }
    report(
        8,
        "pairwise error probability vs Monte Carlo",
        ok,
        &format!("20 pairs at {draws} draws, worst deviation {worst:.2}σ"),
    );
}

#[test]
fn c9_stationary_activity() {
    let (alpha, mu, users, slots) = (0.2, 0.8, 4usize, 1_000_000usize);
    let m = TrafficModel::new(users, alpha, mu, 0).unwrap();
    let target = m.stationary_activity().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut set = TrafficModel::memoryless(users, target, 0).unwrap().sample_static_set(&mut rng);
    let mut active = 0usize;
    for _ in 0..slots {
        set = m.sample_next_set(set, &mut rng);
        active += set.len();
    }
    let freq = active as f64 / (users * slots) as f64;
    let lambda = mu - alpha;
    let se = (target * (1.0 - target) / (users * slots) as f64 * (1.0 + lambda) / (1.0 - lambda)).sqrt();
    let z = (freq - 0.5) / se;
    report(
        9,
        "stationary activity",
        (target - 0.5).abs() < 1e-12 && z.abs() <= 3.0,
        &format!("activity {freq:.5} over {slots} slots x {users} users, target 0.5 ({z:+.2}σ)"),
    );
}

