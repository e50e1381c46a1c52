//! Density-evolution drivers: codeword-averaged and coset iterations, the
//! stability region, threshold bisection and linear-vs-coset comparisons.

use serde::Serialize;
use thiserror::Error;

use crate::channels::{ChannelFamily, ChannelModel};
use crate::density::{DensityError, DensityPair, GridSpec, QuantizedDensity};
use crate::ensemble::DegreeDistribution;

#[derive(Debug, Error, PartialEq)]
pub enum DeError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("no bracket: both ends of [{lo}, {hi}] are {}", if *.decodable { "decodable" } else { "undecodable" })]
    NoBracket { lo: f64, hi: f64, decodable: bool },
    #[error("max_iter must be at least 1")]
    NoIterations,
}

/// One full codeword-averaged iteration in the aligned-parity frame:
/// `P(x) = init(x) (*) lambda(Q(x))` with `Q` from [`DensityPair::rho_apply`].
pub fn cw_avg_de_step(
    pair: &DensityPair,
    init: &DensityPair,
    d: &DegreeDistribution,
) -> Result<DensityPair, DensityError> {
    let q = pair.rho_apply(d);
    Ok(DensityPair {
        p0: init.p0.convolve(&q.p0.lambda_apply(d))?.normalized(),
        p1: init.p1.convolve(&q.p1.lambda_apply(d))?.normalized(),
    })
}

/// One iteration on the symmetrized channel: `P <- init_avg (*) lambda(rho(P))`.
pub fn coset_de_step(
    p: &QuantizedDensity,
    init_avg: &QuantizedDensity,
    d: &DegreeDistribution,
) -> Result<QuantizedDensity, DensityError> {
    Ok(init_avg.convolve(&p.rho_apply(d).lambda_apply(d))?.normalized())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub r: f64,
    pub lambda2_rho1_r: f64,
    /// Smallest root in (0, 1] of `lambda(rho'(1) eps) r = eps`; absent when
    /// the sufficient condition fails or no root exists.
    pub epsilon_star: Option<f64>,
    pub epsilon_star_lower_bound: Option<f64>,
    pub sufficient_ok: bool,
    pub necessary_violated: bool,
}

/// Stability analysis for Bhattacharyya parameter `r`.
pub fn stability(d: &DegreeDistribution, r: f64) -> StabilityReport {
    let s = d.derived_scalars();
    let rp = s.rho_prime_1;
    let l2 = s.lambda2 * rp * r;
    let sufficient_ok = l2 < 1.0;
    let necessary_violated = l2 > 1.0;
    let f = |e: f64| d.lambda_poly(rp * e) * r - e;

    let epsilon_star = if sufficient_ok && r > 0.0 {
        smallest_root(f)
    } else {
        None
    };
    let denom = d.lambda_poly(rp) * r - l2;
    let epsilon_star_lower_bound = (sufficient_ok && denom > 0.0).then(|| (1.0 - l2) / denom);
    StabilityReport {
        r,
        lambda2_rho1_r: l2,
        epsilon_star,
        epsilon_star_lower_bound,
        sufficient_ok,
        necessary_violated,
    }
}

fn smallest_root(f: impl Fn(f64) -> f64) -> Option<f64> {
    // log-spaced points near zero, then a uniform scan of (0, 1]
    let mut pts: Vec<f64> = (0..=180).map(|i| 10f64.powf(-12.0 + i as f64 * 0.05)).collect();
    pts.extend((1..=8192).map(|i| i as f64 / 8192.0));
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut prev = pts[0];
    if f(prev) >= 0.0 {
        return Some(prev);
    }
    for &x in &pts[1..] {
        if x > 1.0 {
            break;
        }
        if f(x) >= 0.0 {
            let (mut lo, mut hi) = (prev, x);
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if f(mid) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = x;
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// `<CBP>` fell below `eps*` (or the stability condition holds on all of (0, 1]).
    ConvergedToStability,
    MaxIterations,
    /// `lambda2 rho'(1) r >= 1`: zero error is not a stable fixed point.
    Unstable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeRecord {
    pub l: usize,
    pub p_e: f64,
    pub cbp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeTrace {
    pub records: Vec<DeRecord>,
    pub verdict: Verdict,
    pub iterations_used: usize,
    pub stability: StabilityReport,
}

impl DeTrace {
    pub fn last(&self) -> &DeRecord {
        self.records.last().unwrap()
    }

    pub fn converged(&self) -> bool {
        self.verdict == Verdict::ConvergedToStability
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("l,p_e,cbp\n");
        for r in &self.records {
            s.push_str(&format!("{},{:.12e},{:.12e}\n", r.l, r.p_e, r.cbp));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
pub enum DeMode {
    /// Codeword-averaged pair of densities.
    #[default]
    Linear,
    /// Single density on the symmetrized channel.
    Coset,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeOptions {
    pub max_iter: usize,
    pub mode: DeMode,
    /// Stop as soon as `<CBP>` is below `eps*`.
    pub stop_at_stability: bool,
    /// Return at `l = 0` when the stability condition fails.
    pub early_exit_unstable: bool,
}

impl DeOptions {
    pub fn new(max_iter: usize) -> Self {
        DeOptions {
            max_iter,
            mode: DeMode::Linear,
            stop_at_stability: true,
            early_exit_unstable: false,
        }
    }

    pub fn mode(mut self, mode: DeMode) -> Self {
        self.mode = mode;
        self
    }
}

/// State handed to a [`evolve`] observer after each iteration.
pub struct DeStep<'a> {
    pub l: usize,
    /// Variable-to-check densities after iteration `l` (symmetric in coset mode).
    pub pair: &'a DensityPair,
    /// Check-to-variable densities of iteration `l` (absent at `l = 0`).
    pub q: Option<&'a DensityPair>,
}

/// Iterates density evolution from `init`, calling `observe` after every
/// iteration (including `l = 0`).
pub fn evolve(
    init: &DensityPair,
    d: &DegreeDistribution,
    opts: DeOptions,
    mut observe: impl FnMut(&DeStep),
) -> Result<DeTrace, DeError> {
    if opts.max_iter == 0 {
        return Err(DeError::NoIterations);
    }
    let avg = init.average();
    let r = avg.chernoff()?;
    let stab = stability(d, r);
    let eps_star = stab.epsilon_star;

    let mut state = match opts.mode {
        DeMode::Linear => init.clone(),
        DeMode::Coset => DensityPair::symmetric(avg.clone()),
    };
    let mut records = vec![DeRecord {
        l: 0,
        p_e: state.error_prob(),
        cbp: state.chernoff()?,
    }];
    observe(&DeStep {
        l: 0,
        pair: &state,
        q: None,
    });
    let finish = |records: Vec<DeRecord>, verdict, used| DeTrace {
        records,
        verdict,
        iterations_used: used,
        stability: stab,
    };

    let immediate = if stab.sufficient_ok && eps_star.is_none() {
        Some(Verdict::ConvergedToStability)
    } else if !stab.sufficient_ok && opts.early_exit_unstable {
        Some(Verdict::Unstable)
    } else if eps_star.is_some_and(|e| records[0].cbp < e) && opts.stop_at_stability {
        Some(Verdict::ConvergedToStability)
    } else {
        None
    };
    if let Some(v) = immediate {
        return Ok(finish(records, v, 0));
    }

    for l in 1..=opts.max_iter {
        let q = match opts.mode {
            DeMode::Linear => state.rho_apply(d),
            DeMode::Coset => DensityPair::symmetric(state.p0.rho_apply(d)),
        };
        state = match opts.mode {
            DeMode::Linear => DensityPair {
                p0: init.p0.convolve(&q.p0.lambda_apply(d))?.normalized(),
                p1: init.p1.convolve(&q.p1.lambda_apply(d))?.normalized(),
            },
            DeMode::Coset => {
                DensityPair::symmetric(avg.convolve(&q.p0.lambda_apply(d))?.normalized())
            }
        };
        let cbp = state.chernoff()?;
        records.push(DeRecord {
            l,
            p_e: state.error_prob(),
            cbp,
        });
        observe(&DeStep {
            l,
            pair: &state,
            q: Some(&q),
        });
        if opts.stop_at_stability && eps_star.is_some_and(|e| cbp < e) {
            return Ok(finish(records, Verdict::ConvergedToStability, l));
        }
    }
    let verdict = if stab.sufficient_ok {
        Verdict::MaxIterations
    } else {
        Verdict::Unstable
    };
    Ok(finish(records, verdict, opts.max_iter))
}

/// Codeword-averaged density evolution for `ch`, stopping once `<CBP>` enters
/// the stability region.
pub fn run_de(
    ch: &ChannelModel,
    d: &DegreeDistribution,
    grid: GridSpec,
    max_iter: usize,
) -> Result<DeTrace, DeError> {
    let init = ch.initial_density_pair(grid);
    evolve(&init, d, DeOptions::new(max_iter), |_| {})
}

/// Whether density evolution reaches the stability region within `max_iter`.
pub fn is_decodable(
    ch: &ChannelModel,
    d: &DegreeDistribution,
    grid: GridSpec,
    max_iter: usize,
    mode: DeMode,
) -> Result<bool, DeError> {
    let init = ch.initial_density_pair(grid);
    let opts = DeOptions {
        max_iter,
        mode,
        stop_at_stability: true,
        early_exit_unstable: true,
    };
    Ok(evolve(&init, d, opts, |_| {})?.converged())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdResult {
    /// Largest parameter found decodable.
    pub threshold: f64,
    /// Smallest parameter found undecodable.
    pub upper: f64,
    pub evaluations: usize,
}

/// Bisection on the family parameter until the bracket is narrower than `precision`.
pub fn threshold_search(
    fam: &ChannelFamily,
    d: &DegreeDistribution,
    grid: GridSpec,
    max_iter: usize,
    precision: f64,
) -> Result<ThresholdResult, DeError> {
    threshold_search_mode(fam, d, grid, max_iter, precision, DeMode::Linear)
}

pub fn threshold_search_mode(
    fam: &ChannelFamily,
    d: &DegreeDistribution,
    grid: GridSpec,
    max_iter: usize,
    precision: f64,
    mode: DeMode,
) -> Result<ThresholdResult, DeError> {
    let test = |t: f64| is_decodable(&fam.at(t), d, grid, max_iter, mode);
    let (mut lo, mut hi) = (fam.lo, fam.hi);
    let lo_ok = test(lo)?;
    let hi_ok = test(hi)?;
    if lo_ok == hi_ok {
        return Err(DeError::NoBracket {
            lo,
            hi,
            decodable: lo_ok,
        });
    }
    let mut evaluations = 2;
    while hi - lo > precision {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if test(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        threshold: lo,
        upper: hi,
        evaluations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeTraces {
    pub param: f64,
    pub linear: DeTrace,
    pub coset: DeTrace,
    /// Total-variation distance between `Q(0)` and `Q(1)` per iteration `l >= 1`.
    pub q_distance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypicalityReport {
    pub linear_threshold: f64,
    pub coset_threshold: f64,
    pub probe: Option<ProbeTraces>,
}

/// Thresholds of the linear and coset ensembles and, at `probe`, full traces of
/// both (run for all `max_iter` iterations without the stability stop).
pub fn typicality_compare(
    d: &DegreeDistribution,
    fam: &ChannelFamily,
    grid: GridSpec,
    max_iter: usize,
    precision: f64,
    probe: Option<f64>,
) -> Result<TypicalityReport, DeError> {
    let (lin, cos) = rayon::join(
        || threshold_search_mode(fam, d, grid, max_iter, precision, DeMode::Linear),
        || threshold_search_mode(fam, d, grid, max_iter, precision, DeMode::Coset),
    );
    let probe = match probe {
        Some(t) => Some(probe_traces(d, &fam.at(t), t, grid, max_iter, false)?),
        None => None,
    };
    Ok(TypicalityReport {
        linear_threshold: lin?.threshold,
        coset_threshold: cos?.threshold,
        probe,
    })
}

/// Linear and coset traces at one channel, with the `Q(0)`/`Q(1)` distances.
pub fn probe_traces(
    d: &DegreeDistribution,
    ch: &ChannelModel,
    param: f64,
    grid: GridSpec,
    max_iter: usize,
    stop_at_stability: bool,
) -> Result<ProbeTraces, DeError> {
    let init = ch.initial_density_pair(grid);
    let mut q_distance = Vec::new();
    let opts = DeOptions {
        max_iter,
        mode: DeMode::Linear,
        stop_at_stability,
        early_exit_unstable: false,
    };
    let linear = evolve(&init, d, opts, |s| {
        if let Some(q) = s.q {
            q_distance.push(q.p0.tv_distance(&q.p1).unwrap());
        }
    })?;
    let coset = evolve(&init, d, opts.mode(DeMode::Coset), |_| {})?;
    Ok(ProbeTraces {
        param,
        linear,
        coset,
        q_distance,
    })
}
