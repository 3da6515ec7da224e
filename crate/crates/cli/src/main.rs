use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use dicka_core::attacks::{
    depolarized_ghz_correlation, diqkd_correlation, figure_grid, figure_sweep,
    isotropic_correlation, Figure, SweepResult,
};
use dicka_core::correlations::{
    check_no_signaling, embed_cq, input_register, nosignaling_via_cmi, output_register,
    uniform_inputs,
};
use dicka_core::infotheory::{
    chain_rule_residual_multipartite, chain_rule_residual_tripartite, chain_rule_telescope,
    conditional_total_correlation, Conditioning, RegisterPartition, TripartiteLabels,
};
use dicka_core::protocol::{run_rmw18, ProtocolConfig};
use dicka_core::random::{random_cq_state, random_quantum_correlation};
use dicka_core::Correlation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_ABORT: u8 = 3;

/// Identity suites pass when every residual is at most this.
const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "dicka",
    version,
    about = "Multipartite device-independent key rate toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a correlation file against the no-signaling conditions.
    CheckNosig {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Total correlation I(A1;...;AM|X) of a correlation, in bits.
    TotalCorrelation {
        input: PathBuf,
        /// `uniform`, or a JSON file holding one probability per input tuple.
        #[arg(long, default_value = "uniform")]
        inputs_dist: String,
        #[arg(long, value_enum, default_value_t = Extension::Trivial)]
        extension: Extension,
    },
    /// Write a key-rate bound curve as CSV.
    Figure {
        #[arg(value_enum)]
        which: FigureArg,
        /// Attack plotted by fig2.
        #[arg(long, value_enum, default_value_t = Fig2Attack::Convex)]
        attack: Fig2Attack,
        #[arg(long, default_value_t = 101)]
        grid_steps: usize,
        #[arg(long)]
        out: PathBuf,
        /// CSV with one row per grid point whose columns are appended verbatim.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Run the chain-rule and no-signaling identity suites on random instances.
    VerifyIdentities {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace one device by a signaling box; the suite must then fail.
        #[arg(long)]
        corrupt: bool,
    },
    /// Simulate the parity-CHSH key distribution protocol.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the win threshold in the config.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Write the correlation of a standard device as JSON.
    Device {
        #[arg(value_enum)]
        kind: DeviceKind,
        /// Noise parameter: p for isotropic, p_dep for depolarized, C for diqkd.
        #[arg(long, default_value_t = 0.0)]
        param: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Extension {
    Trivial,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig2,
    Fig3,
    Fig4,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fig2Attack {
    Convex,
    Dephasing,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeviceKind {
    /// GHZ mixed with white noise, tripartite parity-CHSH measurements.
    Isotropic,
    /// GHZ with each qubit depolarized.
    Depolarized,
    /// Bipartite dephased Bell state with DIQKD measurements.
    Diqkd,
    /// Deterministic all-zero outputs on the tripartite alphabets.
    Classical,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn io(err: anyhow::Error) -> Self {
        Self { code: EXIT_IO, err }
    }

    fn validation(err: anyhow::Error) -> Self {
        Self {
            code: EXIT_VALIDATION,
            err,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Self::io(err)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::CheckNosig { input, tol } => check_nosig(&input, tol),
        Command::TotalCorrelation {
            input,
            inputs_dist,
            extension: Extension::Trivial,
        } => total_correlation(&input, &inputs_dist),
        Command::Figure {
            which,
            attack,
            grid_steps,
            out,
            overlay,
        } => figure(which, attack, grid_steps, &out, overlay.as_deref()),
        Command::VerifyIdentities {
            trials,
            seed,
            corrupt,
        } => verify_identities(trials, seed, corrupt),
        Command::Simulate {
            config,
            out,
            threshold,
        } => simulate(&config, &out, threshold),
        Command::Device { kind, param, out } => device(kind, param, &out),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_correlation(path: &Path) -> anyhow::Result<Correlation> {
    Correlation::from_json(&read(path)?)
        .with_context(|| format!("invalid correlation in {}", path.display()))
}

fn check_nosig(input: &Path, tol: f64) -> Result<u8, Failure> {
    if !(tol >= 0.0) {
        return Err(Failure::validation(anyhow!(
            "tolerance must be nonnegative"
        )));
    }
    let p = load_correlation(input)?;
    let report = check_no_signaling(&p, tol);
    println!("parties: {}", p.num_parties());
    println!("worst violation: {:.3e}", report.worst_violation);
    if let Some(party) = report.party {
        println!("at party {}: {}", party + 1, report.location);
    }
    if report.passed {
        println!("no-signaling: pass (tol {tol:e})");
        Ok(0)
    } else {
        println!("no-signaling: FAIL (tol {tol:e})");
        Ok(EXIT_VALIDATION)
    }
}

fn total_correlation(input: &Path, inputs_dist: &str) -> Result<u8, Failure> {
    let p = load_correlation(input)?;
    let q: Vec<f64> = if inputs_dist == "uniform" {
        uniform_inputs(&p)
    } else {
        let path = Path::new(inputs_dist);
        serde_json::from_str(&read(path)?)
            .with_context(|| format!("{} is not a JSON array of numbers", path.display()))?
    };
    let st = embed_cq(&p, &q, None).map_err(|e| Failure::validation(e.into()))?;
    let m = p.num_parties();
    let part = RegisterPartition::new(
        (0..m).map(|i| vec![output_register(i)]).collect(),
        Conditioning::classical((0..m).map(input_register).collect()),
    )
    .map_err(|e| Failure::validation(e.into()))?;
    let tc =
        conditional_total_correlation(&st, &part).map_err(|e| Failure::validation(e.into()))?;
    println!("{tc:.12}");
    Ok(0)
}

/// `x` with 12 significant digits, positional unless the magnitude is extreme.
fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=11).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn read_overlay(path: &Path) -> anyhow::Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| Ok(r?.iter().map(str::to_string).collect()))
        .collect::<anyhow::Result<Vec<Vec<String>>>>()
        .with_context(|| format!("malformed CSV in {}", path.display()))?;
    Ok((header, rows))
}

fn figure(
    which: FigureArg,
    attack: Fig2Attack,
    steps: usize,
    out: &Path,
    overlay: Option<&Path>,
) -> Result<u8, Failure> {
    if steps < 2 {
        return Err(Failure::validation(anyhow!(
            "--grid-steps must be at least 2"
        )));
    }
    let fig = match (which, attack) {
        (FigureArg::Fig2, Fig2Attack::Convex) => Figure::Fig2Attack1,
        (FigureArg::Fig2, Fig2Attack::Dephasing) => Figure::Fig2Dephasing,
        (FigureArg::Fig3, _) => Figure::Fig3,
        (FigureArg::Fig4, _) => Figure::Fig4,
    };
    let overlay = overlay.map(read_overlay).transpose()?;
    let grid = figure_grid(fig, steps).map_err(anyhow::Error::from)?;
    let curve: SweepResult = figure_sweep(fig, &grid).map_err(anyhow::Error::from)?;
    if let Some((_, rows)) = &overlay {
        if rows.len() != curve.rows.len() {
            return Err(Failure::validation(anyhow!(
                "overlay has {} rows, curve has {}",
                rows.len(),
                curve.rows.len()
            )));
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["parameter".to_string(), "S".into(), "bound".into()];
    if let Some((h, _)) = &overlay {
        header.extend(h.iter().cloned());
    }
    w.write_record(&header).map_err(anyhow::Error::from)?;
    for (k, r) in curve.rows.iter().enumerate() {
        let mut rec = vec![sig12(r.parameter), sig12(r.s), sig12(r.bound)];
        if let Some((_, rows)) = &overlay {
            rec.extend(rows[k].iter().cloned());
        }
        w.write_record(&rec).map_err(anyhow::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    write(out, &String::from_utf8(bytes).map_err(anyhow::Error::from)?)?;
    log::info!("wrote {} rows to {}", curve.rows.len(), out.display());
    Ok(0)
}

fn names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

/// A box where party 2's output copies party 1's input.
fn signaling_box() -> Correlation {
    Correlation::from_fn(
        vec![2, 2],
        vec![2, 2],
        |a, x| if a[1] == x[0] { 0.5 } else { 0.0 },
    )
    .expect("valid table")
}

fn verify_identities(trials: usize, seed: u64, corrupt: bool) -> Result<u8, Failure> {
    if trials == 0 {
        return Err(Failure::validation(anyhow!("--trials must be at least 1")));
    }
    let mut worst_tri: f64 = 0.0;
    let mut worst_multi: f64 = 0.0;
    let mut worst_tel: f64 = 0.0;
    let mut worst_cmi: f64 = 0.0;
    let blocks: Vec<(Vec<String>, Vec<String>)> = (0..4)
        .map(|p| (vec![format!("P{p}a")], vec![format!("P{p}b")]))
        .collect();
    let block_regs: Vec<(String, usize)> = blocks
        .iter()
        .flat_map(|(f, g)| [(f[0].clone(), 2), (g[0].clone(), 2)])
        .collect();
    let block_refs: Vec<(&str, usize)> = block_regs.iter().map(|(n, k)| (n.as_str(), *k)).collect();
    let tri_regs: Vec<(&str, usize)> = ["A1", "A2", "B1", "B2", "C1", "C2"]
        .iter()
        .map(|&n| (n, 2))
        .collect();
    let labels = TripartiteLabels {
        a1: vec!["A1".into()],
        a2: vec!["A2".into()],
        b1: vec!["B1".into()],
        b2: vec!["B2".into()],
        c1: vec!["C1".into()],
        c2: vec!["C2".into()],
        conditioning: Conditioning::e(),
    };
    let tri_part = RegisterPartition::new(
        vec![names("A", 2), names("B", 2), names("C", 2)],
        Conditioning::e(),
    )
    .map_err(anyhow::Error::from)?;
    for k in 0..trials {
        let run = || -> dicka_core::Result<(f64, f64, f64, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed_for(seed, k));
            let st = random_cq_state(&tri_regs, rng.random_range(1..=4), &mut rng)?;
            let tri = chain_rule_residual_tripartite(&st, &labels)?;
            let tel = chain_rule_telescope(&st, &tri_part)?;
            let st4 = random_cq_state(&block_refs, rng.random_range(1..=4), &mut rng)?;
            let multi = chain_rule_residual_multipartite(&st4, &blocks, &Conditioning::e())?;
            let p = if corrupt && k == 0 {
                signaling_box()
            } else {
                random_quantum_correlation(&[2, 2, 2], &[2, 2, 2], &[2, 2, 2], &mut rng)?
            };
            let cmi = nosignaling_via_cmi(&p, &uniform_inputs(&p))?
                .iter()
                .map(|t| t.value)
                .fold(0.0, f64::max);
            Ok((tri, multi, tel, cmi))
        };
        let (tri, multi, tel, cmi) = run().map_err(anyhow::Error::from)?;
        worst_tri = worst_tri.max(tri);
        worst_multi = worst_multi.max(multi);
        worst_tel = worst_tel.max(tel);
        worst_cmi = worst_cmi.max(cmi);
    }
    let mut ok = true;
    for (name, v) in [
        ("tripartite chain rule", worst_tri),
        ("multipartite chain rule (M=4)", worst_multi),
        ("telescope chain rule", worst_tel),
        ("no-signaling CMI", worst_cmi),
    ] {
        let pass = v <= RESIDUAL_TOL;
        ok &= pass;
        println!(
            "{} {name}: max residual {v:.3e} over {trials} trials",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(if ok { 0 } else { EXIT_VALIDATION })
}

/// Per-trial seed, so a trial's instance does not depend on earlier trials.
fn rng_seed_for(seed: u64, trial: usize) -> u64 {
    ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)).random()
}

fn simulate(config: &Path, out: &Path, threshold: Option<f64>) -> Result<u8, Failure> {
    let text = read(config)?;
    let mut cfg = ProtocolConfig::from_json(&text)
        .with_context(|| format!("invalid protocol config in {}", config.display()))?;
    if let Some(t) = threshold {
        cfg.win_threshold = t;
    }
    let stats = match run_rmw18(&cfg) {
        Ok(s) => s,
        Err(e) => return Err(Failure::validation(e.into())),
    };
    write(out, &stats.to_json().map_err(anyhow::Error::from)?)?;
    match stats.empirical_win {
        Some(w) => println!(
            "empirical win {w:.6} over {} test rounds",
            stats.rounds_tested
        ),
        None => println!("no test rounds"),
    }
    for q in &stats.empirical_qber {
        println!("QBER parties {:?}: {:.6}", q.parties, q.qber);
    }
    if stats.aborted {
        println!("protocol aborted");
        return Ok(EXIT_ABORT);
    }
    Ok(0)
}

fn device(kind: DeviceKind, param: f64, out: &Path) -> Result<u8, Failure> {
    let p = match kind {
        DeviceKind::Isotropic => isotropic_correlation(param),
        DeviceKind::Depolarized => depolarized_ghz_correlation(param),
        DeviceKind::Diqkd => diqkd_correlation(param),
        DeviceKind::Classical => Correlation::deterministic(vec![2, 2, 2], vec![2, 3, 2], |_, _| 0),
    }
    .map_err(|e| Failure::validation(e.into()))?;
    write(out, &p.to_json().map_err(anyhow::Error::from)?)?;
    Ok(0)
}
