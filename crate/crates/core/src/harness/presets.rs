//! Ready-made experiments for the published figures.
//!
//! Trial counts and Eb/N0 ranges are not given with the figures; every preset
//! uses 0 to 12 dB in 2 dB steps and 10^5 trials per point.

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const NAMES: [&str; 7] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

const ALPHAS: [&str; 5] = ["0.1", "0.3", "0.5", "0.7", "0.9"];

fn build(pairs: &[(&str, &str)]) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::default();
    for (k, v) in pairs {
        c.apply(k, v)?;
    }
    Ok(c)
}

/// Two interferers plus the reference user on length-15 Kasami signatures.
const KASAMI_PAIR: [(&str, &str); 5] = [
    ("users", "2"),
    ("reference_user", "true"),
    ("spreading", "kasami"),
    ("length", "15"),
    ("metrics", "BER"),
];

fn alpha_sweep(detectors: &str) -> Result<Vec<ExperimentConfig>> {
    ALPHAS
        .iter()
        .map(|a| {
            let label = format!("alpha={a}");
            let mut pairs = KASAMI_PAIR.to_vec();
            pairs.extend([
                ("label", label.as_str()),
                ("scenario", "static_blind"),
                ("alpha", a),
                ("detector", detectors),
                ("frame_length", "1"),
            ]);
            build(&pairs)
        })
        .collect()
}

/// Expands a preset into its experiments.
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    match name {
        "fig1" => alpha_sweep("classic_ml, joint_ml"),
        "fig2" => alpha_sweep("joint_ml, map_static"),
        "fig3" => {
            let mut pairs = KASAMI_PAIR.to_vec();
            pairs.extend([
                ("scenario", "dynamic_blind"),
                ("alpha", "0.2"),
                ("mu", "0.8"),
                ("frame_length", "10"),
                ("detector", "classic_ml, map_static, bayes_causal, viterbi"),
            ]);
            Ok(vec![build(&pairs)?])
        }
        "fig4" => (1..=3)
            .map(|t| {
                let label = format!("T={t}");
                let frames = t.to_string();
                build(&[
                    ("label", label.as_str()),
                    ("scenario", "static_trained"),
                    ("users", "6"),
                    ("alpha", "0.5"),
                    ("spreading", "msequence"),
                    ("length", "7"),
                    ("frame_length", frames.as_str()),
                    ("detector", "joint_ml"),
                    ("metrics", "SEP"),
                    ("bounds", "union, restricted"),
                    ("bound_mode", "ml"),
                    ("restrict_n", "1"),
                ])
            })
            .collect(),
        "fig5" => Ok(vec![build(&[
            ("scenario", "dynamic_trained"),
            ("users", "3"),
            ("alpha", "0.2"),
            ("mu", "0.8"),
            ("spreading", "msequence"),
            ("length", "7"),
            ("frame_length", "10"),
            ("detector", "viterbi, bayes_causal"),
            ("metrics", "SEP"),
            ("report_slots", "1, 10"),
        ])?]),
        "fig6" => Ok(vec![build(&[
            ("scenario", "dynamic_trained"),
            ("users", "6"),
            ("alpha", "0.2"),
            ("mu", "0.8"),
            ("spreading", "msequence"),
            ("length", "7"),
            ("frame_length", "3"),
            ("detector", "viterbi"),
            ("metrics", "SSEP"),
            ("bounds", "semianalytic"),
            ("bound_mode", "map_identities"),
            ("bound_samples", "1000"),
            ("restrict_n", "2"),
        ])?]),
        "fig7" => Ok(vec![build(&[
            ("scenario", "dynamic_blind"),
            ("users", "3"),
            ("alpha", "0.2"),
            ("mu", "0.8"),
            ("spreading", "msequence"),
            ("length", "7"),
            ("frame_length", "10"),
            ("detector", "viterbi, bayes_causal"),
            ("metrics", "BSEP"),
            ("report_slots", "1, 10"),
        ])?]),
        other => Err(Error::Config(format!(
            "unknown preset `{other}` (available: {})",
            NAMES.join(", ")
        ))),
    }
}
