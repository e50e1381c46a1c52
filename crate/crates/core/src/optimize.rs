//! Degree-distribution search: projected stochastic hill-climbing on the
//! decoding threshold of a channel family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bpsim::mix_seed;
use crate::channels::ChannelFamily;
use crate::de::{is_decodable, threshold_search, DeError, DeMode};
use crate::density::GridSpec;
use crate::ensemble::{DegreeDistribution, EnsembleError};

/// Allowed deviation of a candidate's design rate from the target.
pub const RATE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum OptError {
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error(transparent)]
    De(#[from] DeError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptConstraints {
    pub max_dv: u32,
    pub max_dc: u32,
    pub target_rate: f64,
    pub forbid_lambda2: bool,
    #[serde(skip)]
    pub grid: GridSpec,
    pub max_iter: usize,
    /// Number of candidates scored.
    pub budget: usize,
    /// Minimum threshold gain for a candidate to replace the incumbent.
    pub search_precision: f64,
    /// Precision of the reported threshold.
    pub final_precision: f64,
    /// Candidates scored concurrently per generation.
    pub generation: usize,
}

impl OptConstraints {
    pub fn new(max_dv: u32, max_dc: u32, target_rate: f64) -> Self {
        OptConstraints {
            max_dv,
            max_dc,
            target_rate,
            forbid_lambda2: false,
            grid: GridSpec::default(),
            max_iter: 100,
            budget: 500,
            search_precision: 1e-3,
            final_precision: 1e-4,
            generation: 4,
        }
    }

    fn min_dv(&self) -> u32 {
        if self.forbid_lambda2 {
            3
        } else {
            2
        }
    }

    fn validate(&self) -> Result<(), OptError> {
        if self.max_dv < 3 || self.max_dc < 3 {
            return Err(OptError::Infeasible(format!(
                "degree caps ({}, {}) must be at least 3",
                self.max_dv, self.max_dc
            )));
        }
        if !(self.target_rate > 0.0 && self.target_rate < 1.0) {
            return Err(OptError::Infeasible(format!(
                "target rate {} is not in (0, 1)",
                self.target_rate
            )));
        }
        if self.budget == 0 || self.generation == 0 {
            return Err(OptError::Infeasible("empty search budget".into()));
        }
        Ok(())
    }

    /// Whether `d` satisfies the sum, rate and degree constraints.
    pub fn admits(&self, d: &DegreeDistribution) -> bool {
        let s = d.derived_scalars();
        let sums_ok = (d.lambda().values().sum::<f64>() - 1.0).abs() < 1e-9
            && (d.rho().values().sum::<f64>() - 1.0).abs() < 1e-9;
        sums_ok
            && (s.design_rate - self.target_rate).abs() <= RATE_TOLERANCE
            && d.max_variable_degree() <= self.max_dv
            && d.max_check_degree() <= self.max_dc
            && d.lambda().keys().all(|&k| k >= self.min_dv())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    pub index: usize,
    pub lambda: Vec<(u32, f64)>,
    pub rho: Vec<(u32, f64)>,
    pub design_rate: f64,
    /// Candidate threshold at search precision, when it beat the incumbent.
    pub threshold: Option<f64>,
    pub best_so_far: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptResult {
    #[serde(serialize_with = "ser_code")]
    pub best: DegreeDistribution,
    pub threshold: f64,
    pub eval_log: Vec<EvalRecord>,
}

fn ser_code<S: serde::Serializer>(d: &DegreeDistribution, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&d.to_text())
}

/// Dense coefficient vectors indexed by degree.
#[derive(Clone, Debug)]
struct Coeffs {
    lambda: Vec<f64>,
    rho: Vec<f64>,
}

impl Coeffs {
    fn to_distribution(&self) -> Result<DegreeDistribution, EnsembleError> {
        let nz = |v: &[f64]| {
            v.iter()
                .enumerate()
                .filter(|&(_, &x)| x > 0.0)
                .map(|(k, &x)| (k as u32, x))
                .collect::<Vec<_>>()
        };
        DegreeDistribution::new(nz(&self.lambda), nz(&self.rho))
    }
}

fn integral(v: &[f64]) -> f64 {
    v.iter().enumerate().skip(1).map(|(k, &x)| x / k as f64).sum()
}

/// Rescales the low-degree and high-degree parts of `lambda` so that it sums
/// to one and `sum lambda_k / k = target`. Returns `None` when impossible.
fn project_rate(lambda: &mut [f64], min_dv: usize, target: f64) -> Option<()> {
    let max_dv = lambda.len() - 1;
    if target > 1.0 / min_dv as f64 || target < 1.0 / max_dv as f64 {
        return None;
    }
    let low = |k: usize| 1.0 / k as f64 > target;
    let side = |lambda: &[f64], want_low: bool| {
        (min_dv..=max_dv)
            .filter(|&k| low(k) == want_low)
            .fold((0.0, 0.0), |(s, i), k| (s + lambda[k], i + lambda[k] / k as f64))
    };
    let (mut sl, mut il) = side(lambda, true);
    let (mut sh, mut ih) = side(lambda, false);
    if sl == 0.0 && sh > 0.0 && ih == target * sh {
        return Some(());
    }
    if sl == 0.0 {
        let k = min_dv;
        if !low(k) {
            return None;
        }
        lambda[k] += 1e-3;
        (sl, il) = side(lambda, true);
    }
    if sh == 0.0 {
        lambda[max_dv] += 1e-3;
        (sh, ih) = side(lambda, false);
    }
    let det = sl * ih - sh * il;
    if det == 0.0 {
        return None;
    }
    let alpha = (ih - target * sh) / det;
    let beta = (sl * target - il) / det;
    if !(alpha >= 0.0 && beta >= 0.0) {
        return None;
    }
    for (k, x) in lambda.iter_mut().enumerate() {
        if k >= min_dv {
            *x *= if low(k) { alpha } else { beta };
        }
    }
    Some(())
}

/// Starting point: regular variable degree `dv` with a two-degree check side.
fn initial(c: &OptConstraints) -> Option<Coeffs> {
    let dvs: Vec<u32> = std::iter::once(3).chain(c.min_dv()..=c.max_dv).collect();
    for dv in dvs {
        if dv < c.min_dv() || dv > c.max_dv {
            continue;
        }
        let target = (1.0 - c.target_rate) / dv as f64;
        if target > 0.5 || target < 1.0 / c.max_dc as f64 {
            continue;
        }
        let mut rho = vec![0.0; c.max_dc as usize + 1];
        let a = (1.0 / target).floor() as usize;
        if (1.0 / a as f64 - target).abs() < 1e-15 {
            rho[a] = 1.0;
        } else {
            let b = a + 1;
            let w = (target - 1.0 / b as f64) / (1.0 / a as f64 - 1.0 / b as f64);
            rho[a] = w;
            rho[b] = 1.0 - w;
        }
        let mut lambda = vec![0.0; c.max_dv as usize + 1];
        lambda[dv as usize] = 1.0;
        return Some(Coeffs { lambda, rho });
    }
    None
}

/// Moves a random amount of mass between two degrees on one side, then
/// restores the rate on the variable side.
fn perturb(x: &Coeffs, c: &OptConstraints, step: f64, rng: &mut ChaCha8Rng) -> Option<Coeffs> {
    let mut y = x.clone();
    let min_dv = c.min_dv() as usize;
    let (v, lo) = if rng.random::<bool>() {
        (&mut y.lambda, min_dv)
    } else {
        (&mut y.rho, 2)
    };
    let support: Vec<usize> = (lo..v.len()).filter(|&k| v[k] > 0.0).collect();
    let from = support[rng.random_range(0..support.len())];
    let to = rng.random_range(lo..v.len());
    if from == to {
        return None;
    }
    let amount = v[from].min(rng.random::<f64>() * step);
    v[from] -= amount;
    v[to] += amount;
    if v[from] < 1e-6 {
        v[to] += v[from];
        v[from] = 0.0;
    }
    let target = integral(&y.rho) / (1.0 - c.target_rate);
    project_rate(&mut y.lambda, min_dv, target)?;
    for side in [&mut y.lambda, &mut y.rho] {
        let s: f64 = side.iter().sum();
        side.iter_mut().for_each(|t| *t /= s);
    }
    Some(y)
}

/// Hill-climbs the threshold of `fam` over distributions admitted by `c`.
/// Each generation scores `c.generation` candidates concurrently: a
/// candidate is first tested at the incumbent threshold plus
/// `search_precision`, and only survivors get a threshold search. The
/// winner is re-thresholded at `final_precision`. Deterministic given `seed`.
pub fn optimize_degrees(
    fam: &ChannelFamily,
    c: &OptConstraints,
    seed: u64,
) -> Result<OptResult, OptError> {
    c.validate()?;
    let start = initial(c).ok_or_else(|| {
        OptError::Infeasible(format!(
            "no regular variable degree <= {} meets rate {} with check degrees <= {}",
            c.max_dv, c.target_rate, c.max_dc
        ))
    })?;
    let mut best = start;
    let mut best_d = best.to_distribution()?;
    let coarse = |d: &DegreeDistribution, lo: f64| -> Result<Option<f64>, DeError> {
        let fam = fam.clone().with_interval(lo, fam.hi);
        match threshold_search(&fam, d, c.grid, c.max_iter, c.search_precision) {
            Ok(t) => Ok(Some(t.threshold)),
            Err(DeError::NoBracket { decodable, .. }) => Ok(decodable.then_some(fam.hi)),
            Err(e) => Err(e),
        }
    };
    let mut best_thr = coarse(&best_d, fam.lo)?.unwrap_or(fam.lo);
    let mut eval_log = Vec::with_capacity(c.budget);
    let mut step = 0.1;
    let mut attempts = 0usize;
    let max_attempts = 200 * c.budget;
    let mut generation = 0u64;

    while eval_log.len() < c.budget && attempts < max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, generation));
        generation += 1;
        let want = c.generation.min(c.budget - eval_log.len());
        let mut cands = Vec::with_capacity(want);
        while cands.len() < want && attempts < max_attempts {
            attempts += 1;
            if let Some(y) = perturb(&best, c, step, &mut rng) {
                if let Ok(d) = y.to_distribution() {
                    if c.admits(&d) {
                        cands.push((y, d));
                    }
                }
            }
        }
        let probe = best_thr + c.search_precision;
        let scores: Vec<Option<f64>> = cands
            .par_iter()
            .map(|(_, d)| {
                if probe >= fam.hi || !is_decodable(&fam.at(probe), d, c.grid, c.max_iter, DeMode::Linear)? {
                    return Ok(None);
                }
                coarse(d, probe)
            })
            .collect::<Result<_, DeError>>()?;
        let winner = scores
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.map(|t| (k, t)))
            .fold(None, |acc: Option<(usize, f64)>, (k, t)| match acc {
                Some((_, bt)) if bt >= t => acc,
                _ => Some((k, t)),
            });
        let improved = winner.is_some();
        let mut running = eval_log.last().map_or(best_thr, |r: &EvalRecord| r.best_so_far);
        if let Some((k, t)) = winner {
            best = cands[k].0.clone();
            best_d = cands[k].1.clone();
            best_thr = t;
        }
        for ((_, d), score) in cands.iter().zip(&scores) {
            if let Some(t) = score {
                running = running.max(*t);
            }
            eval_log.push(EvalRecord {
                index: eval_log.len(),
                lambda: d.lambda().iter().map(|(&k, &v)| (k, v)).collect(),
                rho: d.rho().iter().map(|(&k, &v)| (k, v)).collect(),
                design_rate: d.derived_scalars().design_rate,
                threshold: *score,
                best_so_far: running,
            });
        }
        step = if improved { (step * 1.25).min(0.3) } else { (step * 0.9).max(0.01) };
    }

    let threshold = match threshold_search(fam, &best_d, c.grid, c.max_iter, c.final_precision) {
        Ok(t) => t.threshold,
        Err(DeError::NoBracket { decodable, .. }) => {
            if decodable {
                fam.hi
            } else {
                fam.lo
            }
        }
        Err(e) => return Err(e.into()),
    };
    Ok(OptResult {
        best: best_d,
        threshold,
        eval_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::FamilyKind;
    use crate::channels::Z_EPS0_FLOOR;

    fn z() -> ChannelFamily {
        ChannelFamily::new(FamilyKind::Z {
            eps0_floor: Z_EPS0_FLOOR,
        })
    }

    #[test]
    fn projection_hits_rate() {
        let mut l = vec![0.0, 0.0, 0.3, 0.3, 0.0, 0.0, 0.0, 0.0, 0.4];
        project_rate(&mut l, 2, 0.25).unwrap();
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((integral(&l) - 0.25).abs() < 1e-12);
        assert!(l.iter().all(|&x| x >= 0.0));
        // one-sided support gains mass on the other side
        let mut l = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        project_rate(&mut l, 2, 0.3).unwrap();
        assert!((integral(&l) - 0.3).abs() < 1e-12);
        assert!(l[5] > 0.0);
        let mut l = vec![0.0, 0.0, 0.0, 1.0];
        assert!(project_rate(&mut l, 3, 0.2).is_none());
    }

    #[test]
    fn initial_point_is_admissible() {
        for (dv, dc, r) in [(12, 9, 0.5), (3, 6, 0.5), (6, 5, 0.3), (5, 12, 0.75)] {
            let mut c = OptConstraints::new(dv, dc, r);
            c.forbid_lambda2 = true;
            let d = initial(&c).unwrap().to_distribution().unwrap();
            assert!(c.admits(&d), "{dv} {dc} {r}: {d}");
        }
        assert!(initial(&OptConstraints::new(3, 3, 0.9)).is_none());
    }

    #[test]
    fn perturbations_stay_admissible() {
        let mut c = OptConstraints::new(12, 9, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = initial(&c).unwrap();
        let mut ok = 0;
        for _ in 0..2000 {
            if let Some(y) = perturb(&x, &c, 0.2, &mut rng) {
                let d = y.to_distribution().unwrap();
                assert!(c.admits(&d), "{d}");
                x = y;
                ok += 1;
            }
        }
        assert!(ok > 500);
        c.forbid_lambda2 = true;
        for _ in 0..500 {
            if let Some(y) = perturb(&x, &c, 0.2, &mut rng) {
                assert_eq!(y.lambda[2], 0.0);
            }
        }
    }

    #[test]
    fn infeasible_constraints() {
        let fam = z();
        assert!(matches!(
            optimize_degrees(&fam, &OptConstraints::new(2, 9, 0.5), 0),
            Err(OptError::Infeasible(_))
        ));
        assert!(matches!(
            optimize_degrees(&fam, &OptConstraints::new(3, 3, 0.9), 0),
            Err(OptError::Infeasible(_))
        ));
    }

    #[test]
    fn degenerate_box_returns_regular_code() {
        let mut c = OptConstraints::new(3, 6, 0.5);
        c.forbid_lambda2 = true;
        c.budget = 4;
        let r = optimize_degrees(&z(), &c, 3).unwrap();
        assert_eq!(r.best, DegreeDistribution::regular(3, 6).unwrap());
        assert!((r.threshold - 0.2305).abs() < 5e-4, "{}", r.threshold);
    }

    #[test]
    fn small_search_is_monotone_and_admissible() {
        let mut c = OptConstraints::new(6, 7, 0.5);
        c.grid = GridSpec::parse("64:-15:15").unwrap();
        c.max_iter = 40;
        c.budget = 12;
        c.search_precision = 1e-2;
        c.final_precision = 1e-3;
        let r = optimize_degrees(&z(), &c, 5).unwrap();
        assert_eq!(r.eval_log.len(), 12);
        assert!(r.eval_log.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far));
        for rec in &r.eval_log {
            let d = DegreeDistribution::new(rec.lambda.clone(), rec.rho.clone()).unwrap();
            assert!(c.admits(&d));
        }
        let again = optimize_degrees(&z(), &c, 5).unwrap();
        assert_eq!(r, again);
    }
}
