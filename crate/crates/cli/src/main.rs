mod analyze;
mod plot;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use bellkit::geometry::{cdf_h, s_curve, sample_curve, search_s_max, table1};
use bellkit::loopholes::{
    apply_coincidence, apply_detection, efficiency_threshold, emit_events, threshold_scan, CoincidenceConfig,
    EfficiencyConfig, Pairing,
};
use bellkit::models::carol_keys;
use bellkit::nogo::{party_from_id, run_challenge, strategy_zoo, Fault, RefereeConfig, PARTY_IDS};
use bellkit::rng::{tags, RngStream};
use bellkit::stats::{ks_uniformity, Arity, ChshSelection};
use bellkit::trial::{write_jsonl, HiddenTrace, Party};
use bellkit::{simulate, Error, ModelKind, ModelSpec, SettingPolicy, SimConfig, TrialRecord};

use plot::{Figure, PALETTE};

#[derive(Parser)]
#[command(name = "bellkit", version, about = "Bell-CHSH simulation laboratory")]
struct Cli {
    /// Master seed; every subcommand is deterministic given its flags and seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Hcurves,
    Scurve,
    Fig6,
    Fig9,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Uniform,
    RoundRobin,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairingArg {
    FixedSlots,
    MovingWindow,
}

impl From<PairingArg> for Pairing {
    fn from(p: PairingArg) -> Self {
        match p {
            PairingArg::FixedSlots => Pairing::FixedSlots,
            PairingArg::MovingWindow => Pairing::MovingWindow,
        }
    }
}

#[derive(clap::Args)]
struct InjectArgs {
    /// Detection efficiency of both arms.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_a: Option<f64>,
    #[arg(long)]
    eta_b: Option<f64>,
    /// Mean exponential detection delay; enables timestamp pairing.
    #[arg(long)]
    jitter: Option<f64>,
    /// Coincidence window (defaults to 5 × jitter).
    #[arg(long)]
    window: Option<f64>,
    #[arg(long, value_enum, default_value = "moving-window")]
    pairing: PairingArg,
    /// Emission period between trials.
    #[arg(long, default_value_t = 1.0)]
    period: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a JSONL trial log from a model file or a run manifest.
    Simulate {
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        model: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, value_enum, default_value = "uniform")]
        policy: Policy,
        /// Keep hidden-state traces (needed by `plot fig9`).
        #[arg(long)]
        trace: bool,
    },
    /// Apply detection loss and/or timing jitter with coincidence pairing.
    Inject {
        /// Input log (stdin when omitted).
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        args: InjectArgs,
    },
    /// Correlations, CHSH and CH values, and hypothesis tests for a log.
    Analyze {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Keys (p,q,r,s) of the CHSH quadruple.
        #[arg(long, default_value = "1,1,2,2")]
        keys: String,
        #[arg(long, value_enum, default_value = "pair")]
        arity: ArityArg,
    },
    /// Maximal CHSH value per sphere dimension.
    Table {
        /// Also write a plot of the column.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Sample S_n(γ) or H_n(γ), or the CH violation against efficiency.
    Scan {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 181)]
        points: usize,
        /// Emit H_n instead of S_n.
        #[arg(long)]
        h: bool,
        /// Scan efficiency instead: `eta,max_violation`.
        #[arg(long)]
        threshold: bool,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 0.6)]
        eta_min: f64,
        #[arg(long, default_value_t = 1.0)]
        eta_max: f64,
        /// Angle grid step in degrees for the seed search.
        #[arg(long, default_value_t = 15.0)]
        grid: f64,
    },
    /// Write an SVG figure.
    Plot {
        #[arg(value_enum)]
        kind: PlotKind,
        /// Dimensions for hcurves/scurve.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 5])]
        dims: Vec<usize>,
        /// Model file for fig6.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Traced log for fig9.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Key pair for fig9.
        #[arg(long, default_value = "1,1")]
        pair: String,
    },
    /// Run the two-party locality challenge.
    Nogo {
        #[arg(long, default_value = "sign-lhv")]
        alice: String,
        #[arg(long, default_value = "sign-lhv")]
        bob: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Write the message transcript as JSONL.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Print the available strategy ids.
        #[arg(long)]
        list: bool,
        /// Run every pairing of the built-in strategy zoo.
        #[arg(long)]
        zoo: bool,
        #[arg(long, hide = true)]
        fault_setting_before_share: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ArityArg {
    Pair,
    Triple,
    Quad,
}

/// Model file: a full model, or a model kind plus a request for random keys.
#[derive(Deserialize)]
#[serde(untagged)]
enum ModelFile {
    Full(ModelSpec),
    Random {
        #[serde(flatten)]
        kind: ModelKind,
        random_keys: [usize; 2],
        /// Sphere dimension of the keys; loop and graph models use their n.
        #[serde(default)]
        dim: Option<usize>,
    },
}

fn load_model(path: &Path, seed: u64) -> anyhow::Result<ModelSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| anyhow!("invalid model JSON in {}: {e}", path.display()))?;
    Ok(match file {
        ModelFile::Full(m) => {
            m.validate()?;
            m
        }
        ModelFile::Random { kind, random_keys: [k, l], dim } => {
            let n = match &kind {
                ModelKind::LoopOfFour { n, .. } | ModelKind::NsphereGraph { n, .. } => *n,
                ModelKind::Eberhard { .. } => 1,
                _ => dim.unwrap_or(2),
            };
            let (a, b) = carol_keys(n, k, l, RngStream::new(seed, tags::KEYS))?;
            ModelSpec::new(kind, a, b)?
        }
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum InjectStep {
    Detection {
        eta_a: f64,
        eta_b: f64,
    },
    Coincidence {
        jitter: f64,
        window: f64,
        pairing: Pairing,
        #[serde(default = "one")]
        period: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// A simulate run described in a file. Paths are relative to the manifest.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    model: PathBuf,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    l: Option<usize>,
    n_trials: u64,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    policy: SettingPolicy,
    #[serde(default)]
    trace: bool,
    #[serde(default)]
    inject: Vec<InjectStep>,
}

fn writer(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn reader(path: Option<&Path>) -> anyhow::Result<Box<dyn BufRead>> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?)),
        None => Box::new(BufReader::new(io::stdin().lock())),
    })
}

fn parse_usizes(s: &str, n: usize, what: &str) -> anyhow::Result<Vec<usize>> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| anyhow!("{what}: expected {n} comma-separated positive integers, got '{s}'"))?;
    if v.len() != n || v.contains(&0) {
        bail!("{what}: expected {n} comma-separated positive integers, got '{s}'");
    }
    Ok(v)
}

fn inject_steps(args: &InjectArgs) -> anyhow::Result<Vec<InjectStep>> {
    let mut steps = Vec::new();
    if args.eta.is_some() || args.eta_a.is_some() || args.eta_b.is_some() {
        let base = args.eta.unwrap_or(1.0);
        steps.push(InjectStep::Detection { eta_a: args.eta_a.unwrap_or(base), eta_b: args.eta_b.unwrap_or(base) });
    }
    if let Some(jitter) = args.jitter {
        let window = args.window.unwrap_or(5.0 * jitter);
        steps.push(InjectStep::Coincidence { jitter, window, pairing: args.pairing.into(), period: args.period });
    } else if args.window.is_some() {
        bail!("--window needs --jitter");
    }
    if steps.is_empty() {
        bail!("nothing to inject: give --eta/--eta-a/--eta-b and/or --jitter");
    }
    Ok(steps)
}

fn run_inject(mut log: Vec<TrialRecord>, steps: &[InjectStep], seed: u64) -> anyhow::Result<Vec<TrialRecord>> {
    for step in steps {
        log = match *step {
            InjectStep::Detection { eta_a, eta_b } => {
                apply_detection(&log, &EfficiencyConfig::new(eta_a, eta_b)?, seed)
            }
            InjectStep::Coincidence { jitter, window, pairing, period } => {
                let (a, b) = emit_events(&log, period, jitter, seed)?;
                let res = apply_coincidence(&a, &b, &CoincidenceConfig::new(window, pairing)?)?;
                eprintln!(
                    "{}",
                    serde_json::json!({"paired": res.log.len(), "ambiguous": res.ambiguous, "unpaired_a": res.unpaired_a, "unpaired_b": res.unpaired_b})
                );
                res.log
            }
        };
    }
    Ok(log)
}

fn cmd_simulate(
    cli: &Cli,
    model: Option<&Path>,
    manifest: Option<&Path>,
    trials: u64,
    policy: Policy,
    trace: bool,
) -> anyhow::Result<()> {
    let policy = match policy {
        Policy::Uniform => SettingPolicy::Uniform,
        Policy::RoundRobin => SettingPolicy::RoundRobin,
    };
    let (spec, cfg, steps, out) = match manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
            let m: RunManifest =
                serde_json::from_str(&text).map_err(|e| anyhow!("invalid manifest {}: {e}", path.display()))?;
            let dir = path.parent().unwrap_or(Path::new("."));
            if m.n_trials == 0 {
                bail!("manifest: n_trials must be at least 1");
            }
            let seed = m.seed.unwrap_or(cli.seed);
            let model_path = dir.join(&m.model);
            if !model_path.exists() {
                bail!("manifest: model file {} does not exist", model_path.display());
            }
            let spec = load_model(&model_path, seed)?;
            if m.k.is_some_and(|k| k != spec.k()) || m.l.is_some_and(|l| l != spec.l()) {
                bail!("manifest: k, l = {:?}, {:?} but the model has {} x {} keys", m.k, m.l, spec.k(), spec.l());
            }
            let cfg = SimConfig::new(m.n_trials, seed).with_policy(m.policy).with_trace(m.trace);
            let out = cli.out.clone().or(m.out.map(|o| dir.join(o)));
            (spec, cfg, m.inject, out)
        }
        None => {
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let spec = load_model(model.expect("clap requires --model or --manifest"), cli.seed)?;
            (spec, SimConfig::new(trials, cli.seed).with_policy(policy).with_trace(trace), Vec::new(), cli.out.clone())
        }
    };
    let log = simulate(&spec.prepare()?, &cfg);
    let log = run_inject(log, &steps, cfg.seed)?;
    let mut w = writer(out.as_deref())?;
    write_jsonl(&mut w, &log)?;
    w.flush()?;
    Ok(())
}

fn cmd_analyze(cli: &Cli, input: Option<&Path>, keys: &str, arity: ArityArg) -> anyhow::Result<()> {
    let log = analyze::read_log(reader(input)?)?;
    let mut w = writer(cli.out.as_deref())?;
    if cli.format == Some(Format::Csv) {
        w.write_all(analyze::counts_csv(&log)?.as_bytes())?;
        w.flush()?;
        return Ok(());
    }
    let k = parse_usizes(keys, 4, "--keys")?;
    let sel = ChshSelection::new(k[0], k[1], k[2], k[3], [1, 1, 1, -1])?;
    let arity = match arity {
        ArityArg::Pair => Arity::Pair,
        ArityArg::Triple => Arity::Triple,
        ArityArg::Quad => Arity::Quad,
    };
    match analyze::analyze(&log, sel, arity) {
        Ok(rep) => {
            serde_json::to_writer_pretty(&mut w, &rep)?;
            writeln!(w)?;
            w.flush()?;
            Ok(())
        }
        Err(e @ Error::Empty(_)) => {
            serde_json::to_writer(
                &mut w,
                &serde_json::json!({"status": "no data", "n_trials": log.len(), "detail": e.to_string()}),
            )?;
            writeln!(w)?;
            w.flush()?;
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_table(cli: &Cli, svg: Option<&Path>) -> anyhow::Result<()> {
    let rows = table1();
    let mut w = writer(cli.out.as_deref())?;
    if cli.format == Some(Format::Json) {
        let v: Vec<_> =
            rows.iter().map(|&(n, s)| serde_json::json!({"n": n, "s_max": (s * 1e6).round() / 1e6})).collect();
        serde_json::to_writer_pretty(&mut w, &v)?;
        writeln!(w)?;
    } else {
        writeln!(w, "n,s_max")?;
        for (n, s) in &rows {
            writeln!(w, "{n},{s:.6}")?;
        }
    }
    w.flush()?;
    if let Some(p) = svg {
        let mut f = Figure::new("Maximal CHSH value by dimension", (0.0, 21.0), (1.8, 4.2), "n", "S_max");
        let pts: Vec<(f64, f64)> = rows.iter().map(|&(n, s)| (n as f64, s)).collect();
        f.line(&pts, PALETTE[0], Some("S_n(π/4)"));
        for &(x, y) in &pts {
            f.dot(x, y, PALETTE[0]);
        }
        f.dashed(&[(0.0, 4.0), (21.0, 4.0)], "#888");
        std::fs::write(p, f.render())?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_scan(
    cli: &Cli,
    n: usize,
    points: usize,
    h: bool,
    threshold: bool,
    r: f64,
    eta_min: f64,
    eta_max: f64,
    grid: f64,
) -> anyhow::Result<()> {
    let mut w = writer(cli.out.as_deref())?;
    let points = points.max(2);
    let json = cli.format == Some(Format::Json);
    if threshold {
        let etas: Vec<f64> =
            (0..points).map(|i| eta_min + (eta_max - eta_min) * i as f64 / (points - 1) as f64).collect();
        let scan = threshold_scan(r, &etas, grid)?;
        if json {
            let crit = efficiency_threshold(r, grid)?;
            let rows: Vec<_> = scan.iter().map(|&(e, v)| serde_json::json!({"eta": e, "max_violation": v})).collect();
            serde_json::to_writer_pretty(&mut w, &serde_json::json!({"r": r, "eta_crit": crit, "scan": rows}))?;
            writeln!(w)?;
        } else {
            writeln!(w, "eta,max_violation")?;
            for (e, v) in scan {
                writeln!(w, "{e:.6},{v:.9}")?;
            }
        }
    } else {
        let curve = sample_curve(0.0, std::f64::consts::PI, points, |g| if h { cdf_h(g, n) } else { s_curve(g, n) })?;
        let col = if h { "h_n" } else { "s_n" };
        if json {
            let rows: Vec<_> = curve.iter().map(|&(g, v)| serde_json::json!({"gamma": g, col: v})).collect();
            serde_json::to_writer_pretty(&mut w, &rows)?;
            writeln!(w)?;
        } else {
            writeln!(w, "gamma,{col}")?;
            for (g, v) in curve {
                writeln!(w, "{g:.9},{v:.9}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_plot(
    cli: &Cli,
    kind: PlotKind,
    dims: &[usize],
    model: Option<&Path>,
    input: Option<&Path>,
    pair: &str,
) -> anyhow::Result<()> {
    use std::f64::consts::PI;
    let svg = match kind {
        PlotKind::Hcurves => {
            let mut f =
                Figure::new("Cumulative closeness distributions H_n", (0.0, PI), (0.0, 2.0), "η (rad)", "H_n(η)");
            for (c, &n) in dims.iter().enumerate() {
                let pts = sample_curve(0.0, PI, 241, |g| cdf_h(g, n))?;
                f.line(&pts, PALETTE[c % PALETTE.len()], Some(&format!("n = {n}")));
            }
            f.render()
        }
        PlotKind::Scurve => {
            let mut f = Figure::new("CHSH value along the great circle", (0.0, PI), (-4.2, 4.2), "γ (rad)", "S_n(γ)");
            for (c, &n) in dims.iter().enumerate() {
                let pts = sample_curve(0.0, PI, 361, |g| s_curve(g, n))?;
                f.line(&pts, PALETTE[c % PALETTE.len()], Some(&format!("n = {n}")));
                let (g, s) = search_s_max(n)?;
                f.dot(g, s, PALETTE[c % PALETTE.len()]);
            }
            f.dashed(&[(0.0, 2.0), (PI, 2.0)], "#888");
            f.render()
        }
        PlotKind::Fig6 => {
            let path = model.ok_or_else(|| anyhow!("fig6 needs --model"))?;
            let spec = load_model(path, cli.seed)?;
            let mut vals = Vec::new();
            for i in 1..=spec.k() {
                for j in 1..=spec.l() {
                    vals.push(spec.correlation_exact(i, j)?);
                }
            }
            let bins = 20;
            let mut hist = vec![0usize; bins];
            for v in &vals {
                hist[(((v + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1)] += 1;
            }
            let expect = vals.len() as f64 / bins as f64;
            let top = hist.iter().copied().max().unwrap_or(1) as f64;
            let title = match ks_uniformity(&vals, -1.0, 1.0) {
                Ok(r) => format!("Distribution of E_ab over {} key pairs (KS p = {:.3})", vals.len(), r.p_value),
                Err(_) => format!("Distribution of E_ab over {} key pairs", vals.len()),
            };
            let mut f = Figure::new(&title, (-1.0, 1.0), (0.0, 1.15 * top.max(expect)), "E_ab", "count");
            for (b, &c) in hist.iter().enumerate() {
                let x0 = -1.0 + 2.0 * b as f64 / bins as f64;
                f.bar(x0, x0 + 2.0 / bins as f64, c as f64, PALETTE[0]);
            }
            f.dashed(&[(-1.0, expect), (1.0, expect)], PALETTE[1]);
            f.legend("uniform", PALETTE[1]);
            f.render()
        }
        PlotKind::Fig9 => {
            let path = input.ok_or_else(|| anyhow!("fig9 needs --input with a traced log"))?;
            let log = analyze::read_log(reader(Some(path))?)?;
            let p = parse_usizes(pair, 2, "--pair")?;
            let traced: Vec<_> = log
                .iter()
                .filter(|r| (r.a, r.b) == (p[0], p[1]))
                .filter_map(|r| match &r.hidden {
                    Some(HiddenTrace::Loop(st)) => Some((st.lambda_a, st.lambda_b, r.product())),
                    _ => None,
                })
                .collect();
            if traced.is_empty() {
                bail!("no loop-of-four hidden traces for key pair ({}, {}); rerun simulate with --trace", p[0], p[1]);
            }
            let mut f = Figure::new(
                &format!("λ_A and λ_B for keys ({}, {})", p[0], p[1]),
                (0.0, 2.0),
                (0.0, 2.0),
                "λ_A",
                "λ_B",
            );
            for &(la, lb, xy) in traced.iter().take(20_000) {
                f.dot(la, lb, if xy == Some(1) { "#d62728" } else { "#1f77b4" });
            }
            f.legend("x·y = +1", "#d62728");
            f.legend("x·y = −1", "#1f77b4");
            f.render()
        }
    };
    let mut w = writer(cli.out.as_deref())?;
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_nogo(
    cli: &Cli,
    alice: &str,
    bob: &str,
    trials: u64,
    transcript: Option<&Path>,
    list: bool,
    zoo: bool,
    fault: Option<u64>,
) -> anyhow::Result<()> {
    let mut w = writer(cli.out.as_deref())?;
    if list {
        for id in PARTY_IDS {
            writeln!(w, "{id}")?;
        }
        w.flush()?;
        return Ok(());
    }
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    if zoo {
        let entries = strategy_zoo();
        let results = bellkit::par::map_slice(&entries, |e| -> bellkit::Result<_> {
            let (a, b) = e.build()?;
            let r = run_challenge(a, b, &RefereeConfig::new(trials, cli.seed))?;
            Ok(serde_json::json!({"alice": e.ids.alice, "bob": e.ids.bob, "chsh": r.chsh, "p_value": r.report.p_value}))
        });
        let results: Vec<_> = results.into_iter().collect::<bellkit::Result<_>>()?;
        let min_p = results.iter().filter_map(|v| v["p_value"].as_f64()).fold(1.0, f64::min);
        serde_json::to_writer_pretty(
            &mut w,
            &serde_json::json!({"runs": results.len(), "n_trials": trials, "seed": cli.seed, "min_p_value": min_p, "results": results}),
        )?;
        writeln!(w)?;
        w.flush()?;
        return Ok(());
    }
    let mut cfg = RefereeConfig::new(trials, cli.seed);
    cfg.keep_transcript = transcript.is_some();
    cfg.fault = fault.map(|trial| Fault::SettingBeforeShare { trial });
    let r = run_challenge(party_from_id(alice, Party::Alice)?, party_from_id(bob, Party::Bob)?, &cfg)?;
    if let Some(p) = transcript {
        let mut t = writer(Some(p))?;
        for m in &r.transcript {
            serde_json::to_writer(&mut t, m)?;
            writeln!(t)?;
        }
        t.flush()?;
    }
    let verdict = serde_json::json!({
        "alice": alice,
        "bob": bob,
        "n_trials": trials,
        "seed": cli.seed,
        "chsh": r.chsh,
        "martingale": r.report,
        "local_bound_respected": r.report.p_value >= 1e-3,
    });
    serde_json::to_writer_pretty(&mut w, &verdict)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.cmd {
        Cmd::Simulate { model, manifest, trials, policy, trace } => {
            cmd_simulate(cli, model.as_deref(), manifest.as_deref(), *trials, *policy, *trace)
        }
        Cmd::Inject { input, args } => {
            let steps = inject_steps(args)?;
            let log = analyze::read_log(reader(input.as_deref())?)?;
            let log = run_inject(log, &steps, cli.seed)?;
            let mut w = writer(cli.out.as_deref())?;
            write_jsonl(&mut w, &log)?;
            w.flush()?;
            Ok(())
        }
        Cmd::Analyze { input, keys, arity } => cmd_analyze(cli, input.as_deref(), keys, *arity),
        Cmd::Table { svg } => cmd_table(cli, svg.as_deref()),
        Cmd::Scan { n, points, h, threshold, r, eta_min, eta_max, grid } => {
            cmd_scan(cli, *n, *points, *h, *threshold, *r, *eta_min, *eta_max, *grid)
        }
        Cmd::Plot { kind, dims, model, input, pair } => {
            cmd_plot(cli, *kind, dims, model.as_deref(), input.as_deref(), pair)
        }
        Cmd::Nogo { alice, bob, trials, transcript, list, zoo, fault_setting_before_share } => {
            cmd_nogo(cli, alice, bob, *trials, transcript.as_deref(), *list, *zoo, *fault_setting_before_share)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Empty(_) | Error::ZeroDenominator(_) | Error::MissingCell(..) | Error::TooFew { .. }) => 2,
        Some(Error::Protocol { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
