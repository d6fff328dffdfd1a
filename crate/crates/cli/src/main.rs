//! `rsmud`: simulate random-set multiuser detectors and evaluate their bounds.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rsmud_core::analysis::{
    averaged_pep, semianalytic_dynamic_bound, t_min_open_eye, union_bound_static, DataKnowledge, SequenceLaw,
};
use rsmud_core::channel::{SignatureSet, Spreading};
use rsmud_core::harness::config::parse_sweep;
use rsmud_core::harness::{parse_pairs, preset, run_all, sidecar_json, write_csv, ExperimentConfig, Setup};
use rsmud_core::rng::stream_rng;
use rsmud_core::rst::ActiveSet;

#[derive(Parser)]
#[command(name = "rsmud", version, about = "Random-set multiuser detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where an experiment comes from: preset, then file, then `--set` overrides.
#[derive(Args)]
struct Source {
    /// Configuration file (`key = value` per line).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in figure preset (fig1 .. fig7).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Eb/N0 sweep in dB: `0,4,8` or `start:step:stop`.
    #[arg(long)]
    ebn0: Option<String>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Keep only the experiment with this label.
    #[arg(long)]
    select: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo simulation; writes CSV and a JSON sidecar.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// CSV output path (stdout when omitted); the sidecar goes to `<out>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Data-averaged pairwise error probability of two identity sets.
    Pep {
        #[command(flatten)]
        source: Source,
        /// True active set as a comma-separated user list (may be empty).
        #[arg(long, default_value = "")]
        truth: String,
        #[arg(long, default_value = "")]
        competitor: String,
    },
    /// Union bound, restricted bound or semi-analytic bound over the sweep.
    Bound {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum)]
        kind: BoundArg,
    },
    /// Minimal frame length meeting the open-eye condition at each sweep point.
    Tmin {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1000)]
        cap: usize,
    },
    /// Prints a signature set as rows of +1/-1 chips.
    Signatures {
        #[arg(long, default_value = "msequence")]
        spreading: String,
        #[arg(long, default_value_t = 7)]
        length: usize,
        /// Comma-separated family indices.
        #[arg(long, default_value = "0")]
        indices: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundArg {
    Union,
    Restricted,
    Semianalytic,
}

fn resolve(src: &Source) -> Result<Vec<ExperimentConfig>> {
    let mut cfgs = match &src.preset {
        Some(name) => preset(name)?,
        None => vec![ExperimentConfig::default()],
    };
    let mut pairs = Vec::new();
    if let Some(path) = &src.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        pairs.extend(parse_pairs(&text)?);
    }
    if let Some(s) = src.seed {
        pairs.push(("seed".into(), s.to_string()));
    }
    if let Some(t) = src.trials {
        pairs.push(("trials".into(), t.to_string()));
    }
    if let Some(e) = &src.ebn0 {
        pairs.push(("ebn0_db".into(), e.clone()));
    }
    for s in &src.sets {
        let (k, v) = s
            .split_once('=')
            .with_context(|| format!("`--set {s}`: expected KEY=VALUE"))?;
        pairs.push((k.trim().into(), v.trim().into()));
    }
    for c in &mut cfgs {
        c.apply_pairs(&pairs)?;
        c.validate()?;
    }
    if let Some(label) = &src.select {
        cfgs.retain(|c| &c.label == label);
        if cfgs.is_empty() {
            bail!("no experiment labelled `{label}`");
        }
    }
    Ok(cfgs)
}

fn single(src: &Source) -> Result<ExperimentConfig> {
    let mut cfgs = resolve(src)?;
    if cfgs.len() != 1 {
        let labels: Vec<&str> = cfgs.iter().map(|c| c.label.as_str()).collect();
        bail!("this command needs one experiment; pick one with --select ({})", labels.join(", "));
    }
    Ok(cfgs.remove(0))
}

fn users(list: &str) -> Result<ActiveSet> {
    let members: Vec<usize> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().with_context(|| format!("bad user index `{s}`")))
        .collect::<Result<_>>()?;
    Ok(ActiveSet::from_members(members))
}

fn data_knowledge(cfg: &ExperimentConfig) -> DataKnowledge {
    if cfg.scenario.is_trained() {
        DataKnowledge::Trained
    } else {
        DataKnowledge::Blind
    }
}

fn rows(out: &mut impl Write, rows: &[(f64, f64, f64)]) -> Result<()> {
    writeln!(out, "EbN0_dB,value,stderr")?;
    for (db, v, se) in rows {
        writeln!(out, "{db},{v},{se}")?;
    }
    Ok(())
}

fn simulate(src: &Source, out: Option<&Path>) -> Result<()> {
    let cfgs = resolve(src)?;
    let records = run_all(&cfgs)?;
    match out {
        Some(path) => {
            write_csv(&records, fs::File::create(path).with_context(|| format!("creating {}", path.display()))?)?;
            let mut side = path.as_os_str().to_owned();
            side.push(".json");
            fs::write(&side, sidecar_json(&cfgs)?)?;
        }
        None => write_csv(&records, std::io::stdout().lock())?,
    }
    Ok(())
}

fn pep(src: &Source, truth: &str, competitor: &str) -> Result<()> {
    let cfg = single(src)?;
    let (x, xh) = (users(truth)?, users(competitor)?);
    if x.mask() >> cfg.users != 0 || xh.mask() >> cfg.users != 0 {
        bail!("user index out of range for K = {}", cfg.users);
    }
    if x == xh {
        bail!("identical hypotheses have no pairwise error probability");
    }
    let setup = Setup::new(&cfg)?;
    let law = SequenceLaw::static_law(&setup.traffic);
    let mut out = Vec::new();
    for db in &cfg.ebn0_db {
        let ch = setup.channel_at(*db)?;
        let p = averaged_pep(x, xh, &law, &ch, cfg.frame_length, cfg.bound_mode, data_knowledge(&cfg));
        out.push((*db, p, 0.0));
    }
    rows(&mut std::io::stdout().lock(), &out)
}

fn bound(src: &Source, kind: BoundArg) -> Result<()> {
    let cfg = single(src)?;
    let setup = Setup::new(&cfg)?;
    let data = data_knowledge(&cfg);
    let mut out = Vec::new();
    for (i, db) in cfg.ebn0_db.iter().enumerate() {
        let ch = setup.channel_at(*db)?;
        out.push(match kind {
            BoundArg::Union | BoundArg::Restricted => {
                if cfg.scenario.is_dynamic() {
                    bail!("union bounds are for static scenarios");
                }
                let n = matches!(kind, BoundArg::Restricted).then_some(cfg.restrict_n);
                let law = SequenceLaw::static_law(&setup.traffic);
                let v = union_bound_static(&law, &ch, cfg.frame_length, n, cfg.bound_mode, data)?;
                (*db, v, 0.0)
            }
            BoundArg::Semianalytic => {
                let Some(kernel) = setup.kernel.as_ref() else {
                    bail!("the semi-analytic bound is for dynamic scenarios");
                };
                let est = semianalytic_dynamic_bound(
                    kernel,
                    &ch,
                    &setup.prior0,
                    cfg.frame_length,
                    cfg.bound_samples,
                    cfg.restrict_n,
                    cfg.bound_mode,
                    data,
                    &mut stream_rng(cfg.seed, u64::MAX - i as u64),
                )?;
                (*db, est.mean, est.stderr)
            }
        });
    }
    rows(&mut std::io::stdout().lock(), &out)
}

fn tmin(src: &Source, cap: usize) -> Result<()> {
    let cfg = single(src)?;
    let setup = Setup::new(&cfg)?;
    let law = SequenceLaw::static_law(&setup.traffic);
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "EbN0_dB,value,stderr")?;
    for db in &cfg.ebn0_db {
        let ch = setup.channel_at(*db)?;
        match t_min_open_eye(&law, &ch, cfg.bound_mode, data_knowledge(&cfg), cap) {
            Ok(t) => writeln!(stdout, "{db},{t},0")?,
            Err(rsmud_core::Error::OpenEyeCapExceeded(_)) => writeln!(stdout, "{db},inf,0")?,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn signatures(spreading: &str, length: usize, indices: &str) -> Result<()> {
    let family: Spreading = spreading.parse()?;
    let idx: Vec<usize> = parse_sweep(indices)?.iter().map(|v| *v as usize).collect();
    let set = SignatureSet::from_family(family, length, &idx)?;
    print!("{}", set.to_text());
    Ok(())
}

fn main() -> Result<()> {
    if let Ok(n) = std::env::var("RSMUD_THREADS") {
        let n: usize = n.parse().context("RSMUD_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { source, out } => simulate(source, out.as_deref()),
        Command::Pep {
            source,
            truth,
            competitor,
        } => pep(source, truth, competitor),
        Command::Bound { source, kind } => bound(source, *kind),
        Command::Tmin { source, cap } => tmin(source, *cap),
        Command::Signatures {
            spreading,
            length,
            indices,
        } => signatures(spreading, *length, indices),
    }
}
