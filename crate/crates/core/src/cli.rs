//! Command-line front end. Every subcommand writes its result to `--out` (or
//! stdout) together with a [`RunManifest`]: JSON results embed it, CSV and
//! degree files get a `<out>.manifest.json` beside them (stderr when writing
//! to stdout).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bpsim::{run_sim, SimConfig, SimError};
use crate::channels::{ChannelFamily, ChannelModel, FamilyKind};
use crate::de::{
    evolve, threshold_search, threshold_search_mode, typicality_compare, DeError, DeMode, DeOptions,
};
use crate::density::GridSpec;
use crate::ensemble::DegreeDistribution;
use crate::optimize::{optimize_degrees, OptConstraints, OptError};
use crate::rankstats::estimate_e2mr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Iteration cap used on the BEC when `--max-iter` is not given; erasure
/// recursions converge slowly near threshold.
pub const BEC_MAX_ITER: usize = 500;
pub const DEFAULT_MAX_ITER: usize = 100;

/// z-channel search interval for `table2`; wide enough for the low-rate ensembles.
const TABLE2_LO: f64 = 1e-3;
const TABLE2_HI: f64 = 0.95;

#[derive(Parser, Debug)]
#[command(name = "asymde", version, about = "Density evolution and BP simulation for asymmetric channels")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Serialize)]
struct DeArgs {
    /// Quantization grid `bins:min:max`.
    #[arg(long, default_value = "256:-15:15")]
    grid: String,
    /// DE iteration cap (default 100, or 500 on the BEC).
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Linear)]
    mode: Mode,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum Mode {
    Linear,
    Coset,
}

impl From<Mode> for DeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Linear => DeMode::Linear,
            Mode::Coset => DeMode::Coset,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Density-evolution trace (CSV: l, p_e, cbp) at one channel.
    De {
        /// Degree file or preset name (`3,6`, `12A`, ...).
        #[arg(long)]
        code: String,
        /// Channel spec, e.g. `z:eps1=0.23`.
        #[arg(long)]
        channel: String,
        /// Keep iterating after the stability region is reached.
        #[arg(long)]
        no_stop: bool,
        #[command(flatten)]
        de: DeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decoding threshold over a channel family (JSON).
    Threshold {
        #[arg(long)]
        code: String,
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 1e-5)]
        precision: f64,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[command(flatten)]
        de: DeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linear versus coset thresholds, optionally with traces at a probe point (JSON).
    Typicality {
        #[arg(long)]
        code: String,
        #[arg(long, default_value = "z")]
        family: String,
        #[arg(long, default_value_t = 1e-5)]
        precision: f64,
        #[arg(long)]
        probe: Option<f64>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[command(flatten)]
        de: DeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo BER/BLER of BP decoding on one sampled graph (JSON).
    Sim {
        #[arg(long)]
        code: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        channel: String,
        #[arg(long, default_value_t = 1000)]
        codewords: usize,
        #[arg(long, default_value_t = 40)]
        bp_iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of E{2^(m - rank)} (CSV: n, mean, stderr).
    Rank {
        #[arg(long)]
        dv: u32,
        #[arg(long)]
        dc: u32,
        /// Comma-separated block lengths.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Number of checks of degree dc - 1.
        #[arg(long, default_value_t = 0)]
        m_prime: usize,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hill-climbs a degree distribution for the family threshold (writes a degree file).
    Optimize {
        #[arg(long, default_value = "z")]
        family: String,
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
        #[arg(long, default_value_t = 12)]
        max_dv: u32,
        #[arg(long, default_value_t = 9)]
        max_dc: u32,
        #[arg(long)]
        forbid_lambda2: bool,
        #[arg(long, default_value_t = 500)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "256:-15:15")]
        grid: String,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Thresholds and Bhattacharyya values over BEC, BSC, z and BiAWGNC (CSV).
    Table1 {
        #[arg(long, required = true)]
        code: Vec<String>,
        #[arg(long, default_value_t = 1e-5)]
        precision: f64,
        #[arg(long, default_value = "256:-15:15")]
        grid: String,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linear and coset z-channel thresholds for several ensembles (CSV).
    Table2 {
        /// Codes to compare; defaults to (3,4), (3,6) and the two
        /// lambda = x^2 ensembles with mixed check degrees.
        #[arg(long)]
        code: Vec<String>,
        #[arg(long, default_value_t = 1e-5)]
        precision: f64,
        #[arg(long, default_value = "512:-15:15")]
        grid: String,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Provenance record written with every output.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub params: Value,
    /// SHA-256 of each code's text, keyed by the name given on the command line.
    pub code_hash: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_s: f64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<DeError> for CliError {
    fn from(e: DeError) -> Self {
        match e {
            DeError::NoIterations => usage(e),
            e => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::EncoderFailure => CliError::Numeric(e.to_string()),
            e => usage(e),
        }
    }
}

impl From<OptError> for CliError {
    fn from(e: OptError) -> Self {
        match e {
            OptError::De(e) => e.into(),
            e => usage(e),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// A degree file path, or a preset name when no such file exists.
pub fn load_code(spec: &str) -> Result<(DegreeDistribution, String), String> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{spec}: {e}"))?;
        let d = DegreeDistribution::parse(&text).map_err(|e| format!("{spec}: {e}"))?;
        Ok((d, sha256_hex(text.as_bytes())))
    } else {
        let d = DegreeDistribution::preset(spec)
            .map_err(|_| format!("`{spec}` is neither a readable degree file nor a preset"))?;
        let hash = sha256_hex(d.to_text().as_bytes());
        Ok((d, hash))
    }
}

fn parse_grid(s: &str) -> Result<GridSpec, CliError> {
    GridSpec::parse(s).map_err(|e| usage(format!("--grid {s}: {e}")))
}

fn parse_family(s: &str) -> Result<ChannelFamily, CliError> {
    ChannelFamily::parse(s).map_err(usage)
}

fn iter_cap(explicit: Option<usize>, kind: FamilyKind) -> usize {
    explicit.unwrap_or(if kind == FamilyKind::Bec {
        BEC_MAX_ITER
    } else {
        DEFAULT_MAX_ITER
    })
}

fn with_interval(fam: ChannelFamily, lo: Option<f64>, hi: Option<f64>) -> ChannelFamily {
    let (l, h) = (lo.unwrap_or(fam.lo), hi.unwrap_or(fam.hi));
    fam.with_interval(l, h)
}

/// Output of one subcommand before it is written.
struct Output {
    body: String,
    json: bool,
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Ok(v) = std::env::var("ASYMDE_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: ASYMDE_THREADS must be a positive integer, got `{v}`");
                return EXIT_USAGE;
            }
        }
    }
    match dispatch(cli.cmd) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn manifest(name: &str, params: Value, codes: &[(String, String)], seed: Option<u64>, start: Instant) -> RunManifest {
    RunManifest {
        subcommand: name.to_string(),
        params,
        code_hash: codes.to_vec(),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

fn emit(out: Option<&Path>, output: Output, m: &RunManifest) -> Result<(), CliError> {
    let manifest_json = serde_json::to_string_pretty(m).expect("manifest serializes");
    let body = if output.json {
        let mut v: Value = serde_json::from_str(&output.body).expect("result is JSON");
        v["manifest"] = serde_json::to_value(m).expect("manifest serializes");
        serde_json::to_string_pretty(&v).expect("JSON serializes") + "\n"
    } else {
        output.body
    };
    match out {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            if !output.json {
                let mut side = path.as_os_str().to_owned();
                side.push(".manifest.json");
                std::fs::write(&side, manifest_json + "\n")
                    .map_err(|e| usage(format!("{}: {e}", Path::new(&side).display())))?;
            }
        }
        None => {
            print!("{body}");
            if !output.json {
                eprintln!("{manifest_json}");
            }
        }
    }
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    let start = Instant::now();
    match cmd {
        Cmd::De { code, channel, no_stop, de, out } => {
            let (d, hash) = load_code(&code).map_err(usage)?;
            let ch = ChannelModel::parse(&channel).map_err(usage)?;
            let grid = parse_grid(&de.grid)?;
            let opts = DeOptions {
                max_iter: iter_cap(de.max_iter, ch.family()),
                mode: de.mode.into(),
                stop_at_stability: !no_stop,
                early_exit_unstable: false,
            };
            let trace = evolve(&ch.initial_density_pair(grid), &d, opts, |_| {})?;
            let params = json!({"code": code, "channel": channel.to_string(), "no_stop": no_stop, "de": de,
                "max_iter": opts.max_iter, "verdict": trace.verdict});
            let m = manifest("de", params, &[(code, hash)], None, start);
            emit(out.as_deref(), Output { body: trace.to_csv(), json: false }, &m)
        }
        Cmd::Threshold { code, family, precision, lo, hi, de, out } => {
            let (d, hash) = load_code(&code).map_err(usage)?;
            let fam = with_interval(parse_family(&family)?, lo, hi);
            let grid = parse_grid(&de.grid)?;
            let max_iter = iter_cap(de.max_iter, fam.kind);
            let r = threshold_search_mode(&fam, &d, grid, max_iter, precision, de.mode.into())?;
            let body = json!({
                "family": fam.name(),
                "threshold": r.threshold,
                "upper": r.upper,
                "evaluations": r.evaluations,
                "cbp": fam.at(r.threshold).bhattacharyya(),
                "stability_bound": d.derived_scalars().stability_bound(),
            });
            let params = json!({"code": code, "family": family, "precision": precision, "lo": fam.lo,
                "hi": fam.hi, "de": de, "max_iter": max_iter});
            let m = manifest("threshold", params, &[(code, hash)], None, start);
            emit(out.as_deref(), Output { body: body.to_string(), json: true }, &m)
        }
        Cmd::Typicality { code, family, precision, probe, lo, hi, de, out } => {
            let (d, hash) = load_code(&code).map_err(usage)?;
            let fam = with_interval(parse_family(&family)?, lo, hi);
            let grid = parse_grid(&de.grid)?;
            let max_iter = iter_cap(de.max_iter, fam.kind);
            let r = typicality_compare(&d, &fam, grid, max_iter, precision, probe)?;
            let body = serde_json::to_string(&r).expect("report serializes");
            let params = json!({"code": code, "family": family, "precision": precision, "probe": probe,
                "lo": fam.lo, "hi": fam.hi, "de": de, "max_iter": max_iter});
            let m = manifest("typicality", params, &[(code, hash)], None, start);
            emit(out.as_deref(), Output { body, json: true }, &m)
        }
        Cmd::Sim { code, n, channel, codewords, bp_iters, seed, out } => {
            let (d, hash) = load_code(&code).map_err(usage)?;
            let ch = ChannelModel::parse(&channel).map_err(usage)?;
            let cfg = SimConfig {
                bp_iters,
                num_codewords: codewords,
                master_seed: seed,
                ..SimConfig::new(d, n, ch)
            };
            let r = run_sim(&cfg)?;
            let mut body = serde_json::to_value(&r).expect("result serializes");
            body["config"] = serde_json::to_value(&cfg).expect("config serializes");
            body["wall_time"] = json!(start.elapsed().as_secs_f64());
            let params = json!({"code": code, "n": n, "channel": channel, "codewords": codewords,
                "bp_iters": bp_iters});
            let m = manifest("sim", params, &[(code, hash)], Some(seed), start);
            emit(out.as_deref(), Output { body: body.to_string(), json: true }, &m)
        }
        Cmd::Rank { dv, dc, n, m_prime, trials, seed, out } => {
            let est = estimate_e2mr(dv, dc, &n, m_prime, trials, seed).map_err(usage)?;
            let mut body = String::from("n,mean,stderr\n");
            for e in &est {
                let _ = writeln!(body, "{},{},{}", e.n, e.mean, e.stderr);
            }
            let params = json!({"dv": dv, "dc": dc, "n": n, "m_prime": m_prime, "trials": trials});
            let m = manifest("rank", params, &[], Some(seed), start);
            emit(out.as_deref(), Output { body, json: false }, &m)
        }
        Cmd::Optimize { family, rate, max_dv, max_dc, forbid_lambda2, budget, seed, grid, max_iter, out } => {
            let fam = parse_family(&family)?;
            let mut c = OptConstraints::new(max_dv, max_dc, rate);
            c.forbid_lambda2 = forbid_lambda2;
            c.budget = budget;
            c.grid = parse_grid(&grid)?;
            c.max_iter = max_iter;
            let r = optimize_degrees(&fam, &c, seed)?;
            let body = format!(
                "# {} threshold {} (rate {}, max degrees {}/{})\n{}",
                fam.name(),
                r.threshold,
                rate,
                max_dv,
                max_dc,
                r.best.to_text()
            );
            let params = json!({"family": family, "constraints": c, "grid": grid,
                "threshold": r.threshold, "evaluations": r.eval_log.len(),
                "best_so_far": r.eval_log.iter().map(|e| e.best_so_far).collect::<Vec<_>>()});
            let m = manifest("optimize", params, &[], Some(seed), start);
            emit(out.as_deref(), Output { body, json: false }, &m)
        }
        Cmd::Table1 { code, precision, grid, max_iter, out } => {
            let grid = parse_grid(&grid)?;
            let families = ["bec", "bsc", "z", "biawgnc"];
            let mut body = String::from("code");
            for f in families {
                let _ = write!(body, ",{f},{f}_cbp");
            }
            body.push_str(",stability\n");
            let mut hashes = Vec::new();
            for spec in &code {
                let (d, hash) = load_code(spec).map_err(usage)?;
                hashes.push((spec.clone(), hash));
                let cells: Vec<(f64, f64)> = families
                    .par_iter()
                    .map(|f| {
                        let fam = ChannelFamily::parse(f).expect("known family");
                        let cap = iter_cap(max_iter, fam.kind);
                        let t = threshold_search(&fam, &d, grid, cap, precision)?.threshold;
                        Ok((t, fam.at(t).bhattacharyya()))
                    })
                    .collect::<Result<_, DeError>>()?;
                let _ = write!(body, "{}", csv_field(spec));
                for (t, b) in cells {
                    let _ = write!(body, ",{t:.12},{b:.12}");
                }
                let _ = writeln!(body, ",{:.12}", d.derived_scalars().stability_bound());
            }
            let params = json!({"code": code, "precision": precision, "max_iter": max_iter,
                "bec_max_iter": iter_cap(max_iter, FamilyKind::Bec)});
            let m = manifest("table1", params, &hashes, None, start);
            emit(out.as_deref(), Output { body, json: false }, &m)
        }
        Cmd::Table2 { code, precision, grid, max_iter, out } => {
            let grid_spec = parse_grid(&grid)?;
            let fam = parse_family("z")?.with_interval(TABLE2_LO, TABLE2_HI);
            let mut rows: Vec<(String, DegreeDistribution, String)> = Vec::new();
            if code.is_empty() {
                for (name, d) in table2_ensembles() {
                    let h = sha256_hex(d.to_text().as_bytes());
                    rows.push((name.to_string(), d, h));
                }
            } else {
                for spec in &code {
                    let (d, h) = load_code(spec).map_err(usage)?;
                    rows.push((spec.clone(), d, h));
                }
            }
            let results: Vec<(f64, f64)> = rows
                .par_iter()
                .map(|(_, d, _)| {
                    let r = typicality_compare(d, &fam, grid_spec, max_iter, precision, None)?;
                    Ok((r.linear_threshold, r.coset_threshold))
                })
                .collect::<Result<_, DeError>>()?;
            let mut body = String::from("code,linear,coset,gap\n");
            for ((name, _, _), (l, c)) in rows.iter().zip(&results) {
                let _ = writeln!(body, "{},{l:.12},{c:.12},{:.12}", csv_field(name), l - c);
            }
            let hashes: Vec<(String, String)> = rows.iter().map(|(n, _, h)| (n.clone(), h.clone())).collect();
            let params = json!({"code": code, "precision": precision, "max_iter": max_iter, "family": "z",
                "lo": TABLE2_LO, "hi": TABLE2_HI, "grid": grid});
            let m = manifest("table2", params, &hashes, None, start);
            emit(out.as_deref(), Output { body, json: false }, &m)
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// The four ensembles of the linear/coset comparison.
pub fn table2_ensembles() -> Vec<(&'static str, DegreeDistribution)> {
    let d = |l: &[(u32, f64)], r: &[(u32, f64)]| {
        DegreeDistribution::new(l.iter().copied(), r.iter().copied()).expect("valid ensemble")
    };
    vec![
        ("(3,4)", d(&[(3, 1.0)], &[(4, 1.0)])),
        ("(3,6)", d(&[(3, 1.0)], &[(6, 1.0)])),
        ("x^2/.5x^2+.5x^3", d(&[(3, 1.0)], &[(3, 0.5), (4, 0.5)])),
        ("x^2/.5x^4+.5x^5", d(&[(3, 1.0)], &[(5, 0.5), (6, 0.5)])),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_and_hashes() {
        let (d, h) = load_code("3,6").unwrap();
        assert_eq!(d, DegreeDistribution::regular(3, 6).unwrap());
        assert_eq!(h.len(), 64);
        assert!(load_code("no-such-code").is_err());
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("(3,6)"), "\"(3,6)\"");
        assert_eq!(csv_field("12A"), "12A");
    }

    #[test]
    fn bec_defaults_to_longer_runs() {
        assert_eq!(iter_cap(None, FamilyKind::Bec), BEC_MAX_ITER);
        assert_eq!(iter_cap(None, FamilyKind::Bsc), DEFAULT_MAX_ITER);
        assert_eq!(iter_cap(Some(7), FamilyKind::Bec), 7);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["asymde", "threshold", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["asymde"]), EXIT_USAGE);
        assert_eq!(run(["asymde", "--help"]), EXIT_OK);
    }
}
