//! Binary-input memoryless channel models.
//!
//! Bit 0 maps to the positive signal on the Gaussian channels. Every model can
//! be reduced to a list of output cells `(m, u0, u1)` with `u_x` the
//! probability of the cell given bit `x` and `m = ln(u0 / u1)`; quantized
//! initial densities are built from those cells.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::density::{DensityPair, GridSpec, QuantizedDensity};

/// Output symbol for a BEC erasure.
pub const ERASURE: f64 = 0.5;

/// Default crossover probability 0 -> 1 of the z-channel family.
pub const Z_EPS0_FLOOR: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("output {0} is outside the channel's support")]
    UnsupportedOutput(f64),
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse channel `{spec}`: {msg}")]
    Parse { spec: String, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelModel {
    Bec { eps: f64 },
    Bsc { eps: f64 },
    /// Binary asymmetric channel; `eps0 = P(1 | 0)`, `eps1 = P(0 | 1)`.
    Basc { eps0: f64, eps1: f64 },
    /// BASC with a small fixed `eps0`.
    Z { eps1: f64, eps0_floor: f64 },
    BiAwgn { sigma: f64 },
    /// Gray-mapped 4-PAM bit channel: bit 0 sends `±3/√5`, bit 1 sends `±1/√5`.
    CompositeBiAwgn { sigma: f64 },
}

const COMPOSITE_OUTER: f64 = 3.0 / 2.236_067_977_499_79;
const COMPOSITE_INNER: f64 = 1.0 / 2.236_067_977_499_79;

fn probability(name: &str, v: f64) -> Result<(), ChannelError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ChannelError::InvalidParameter(format!(
            "{name} = {v} is not in [0, 1]"
        )))
    }
}

/// Upper Gaussian tail `P(Z > t)`.
fn normal_sf(t: f64) -> f64 {
    0.5 * erfc(t * FRAC_1_SQRT_2)
}

/// `P(a < N(mu, sigma^2) <= b)` without cancellation in the tails.
fn normal_mass(mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    let (za, zb) = ((a - mu) / sigma, (b - mu) / sigma);
    if za >= 0.0 {
        normal_sf(za) - normal_sf(zb)
    } else if zb <= 0.0 {
        normal_sf(-zb) - normal_sf(-za)
    } else {
        1.0 - normal_sf(-za) - normal_sf(zb)
    }
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            ChannelModel::Bec { eps } | ChannelModel::Bsc { eps } => probability("eps", eps),
            ChannelModel::Basc { eps0, eps1 } => {
                probability("eps0", eps0)?;
                probability("eps1", eps1)?;
                if eps0 + eps1 >= 1.0 {
                    return Err(ChannelError::InvalidParameter(format!(
                        "eps0 + eps1 = {} must be below 1",
                        eps0 + eps1
                    )));
                }
                Ok(())
            }
            ChannelModel::Z { eps1, eps0_floor } => ChannelModel::Basc {
                eps0: eps0_floor,
                eps1,
            }
            .validate(),
            ChannelModel::BiAwgn { sigma } | ChannelModel::CompositeBiAwgn { sigma } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(ChannelError::InvalidParameter(format!(
                        "sigma = {sigma} must be positive"
                    )))
                }
            }
        }
    }

    pub fn z(eps1: f64) -> Self {
        ChannelModel::Z {
            eps1,
            eps0_floor: Z_EPS0_FLOOR,
        }
    }

    /// Crossover pair `(eps0, eps1)` for the discrete two-output channels.
    fn crossovers(&self) -> Option<(f64, f64)> {
        match *self {
            ChannelModel::Bsc { eps } => Some((eps, eps)),
            ChannelModel::Basc { eps0, eps1 } => Some((eps0, eps1)),
            ChannelModel::Z { eps1, eps0_floor } => Some((eps0_floor, eps1)),
            _ => None,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match *self {
            ChannelModel::Bec { .. } | ChannelModel::Bsc { .. } | ChannelModel::BiAwgn { .. } => {
                true
            }
            ChannelModel::Basc { eps0, eps1 } => eps0 == eps1,
            ChannelModel::Z { eps1, eps0_floor } => eps1 == eps0_floor,
            ChannelModel::CompositeBiAwgn { .. } => false,
        }
    }

    /// Draws a channel output for input bit `x`.
    pub fn sample_output<R: Rng + ?Sized>(&self, x: u8, rng: &mut R) -> f64 {
        let bit = x & 1;
        match *self {
            ChannelModel::Bec { eps } => {
                if rng.random::<f64>() < eps {
                    ERASURE
                } else {
                    bit as f64
                }
            }
            ChannelModel::Bsc { .. } | ChannelModel::Basc { .. } | ChannelModel::Z { .. } => {
                let (e0, e1) = self.crossovers().unwrap();
                let flip = if bit == 0 { e0 } else { e1 };
                let flipped = rng.random::<f64>() < flip;
                (bit ^ flipped as u8) as f64
            }
            ChannelModel::BiAwgn { sigma } => {
                let mean = if bit == 0 { 1.0 } else { -1.0 };
                Normal::new(mean, sigma).unwrap().sample(rng)
            }
            ChannelModel::CompositeBiAwgn { sigma } => {
                let amp = if bit == 0 { COMPOSITE_OUTER } else { COMPOSITE_INNER };
                let mean = if rng.random::<bool>() { amp } else { -amp };
                Normal::new(mean, sigma).unwrap().sample(rng)
            }
        }
    }

    /// `ln f(y | 0) / f(y | 1)`; may be ±∞.
    pub fn llr(&self, y: f64) -> Result<f64, ChannelError> {
        match *self {
            ChannelModel::Bec { .. } => {
                if y == 0.0 {
                    Ok(f64::INFINITY)
                } else if y == 1.0 {
                    Ok(f64::NEG_INFINITY)
                } else if y == ERASURE {
                    Ok(0.0)
                } else {
                    Err(ChannelError::UnsupportedOutput(y))
                }
            }
            ChannelModel::Bsc { .. } | ChannelModel::Basc { .. } | ChannelModel::Z { .. } => {
                let (e0, e1) = self.crossovers().unwrap();
                if y == 0.0 {
                    Ok(((1.0 - e0) / e1).ln())
                } else if y == 1.0 {
                    Ok((e0 / (1.0 - e1)).ln())
                } else {
                    Err(ChannelError::UnsupportedOutput(y))
                }
            }
            ChannelModel::BiAwgn { sigma } => {
                if y.is_finite() {
                    Ok(2.0 * y / (sigma * sigma))
                } else {
                    Err(ChannelError::UnsupportedOutput(y))
                }
            }
            ChannelModel::CompositeBiAwgn { sigma } => {
                if y.is_finite() {
                    Ok(composite_llr(sigma, y))
                } else {
                    Err(ChannelError::UnsupportedOutput(y))
                }
            }
        }
    }

    /// Conditional output densities `f(y | x)`; for the discrete channels this is
    /// the probability mass of `y`.
    pub fn likelihood(&self, y: f64, x: u8) -> f64 {
        let gauss = |mu: f64, s: f64| (-(y - mu).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        match *self {
            ChannelModel::Bec { eps } => {
                if y == ERASURE {
                    eps
                } else if y == (x & 1) as f64 {
                    1.0 - eps
                } else {
                    0.0
                }
            }
            ChannelModel::Bsc { .. } | ChannelModel::Basc { .. } | ChannelModel::Z { .. } => {
                let (e0, e1) = self.crossovers().unwrap();
                let flip = if x & 1 == 0 { e0 } else { e1 };
                if y == (x & 1) as f64 {
                    1.0 - flip
                } else if y == ((x & 1) ^ 1) as f64 {
                    flip
                } else {
                    0.0
                }
            }
            ChannelModel::BiAwgn { sigma } => gauss(if x & 1 == 0 { 1.0 } else { -1.0 }, sigma),
            ChannelModel::CompositeBiAwgn { sigma } => {
                let a = if x & 1 == 0 { COMPOSITE_OUTER } else { COMPOSITE_INNER };
                0.5 * (gauss(a, sigma) + gauss(-a, sigma))
            }
        }
    }

    /// Output cells `(m, u0, u1)`. Continuous channels are cut into cells of
    /// LLR width at most `max_step`, with the tails beyond `|m| > llr_cut`
    /// lumped into one cell each.
    pub fn output_cells(&self, max_step: f64, llr_cut: f64) -> Vec<(f64, f64, f64)> {
        match *self {
            ChannelModel::Bec { eps } => vec![
                (f64::INFINITY, 1.0 - eps, 0.0),
                (0.0, eps, eps),
                (f64::NEG_INFINITY, 0.0, 1.0 - eps),
            ],
            ChannelModel::Bsc { .. } | ChannelModel::Basc { .. } | ChannelModel::Z { .. } => {
                let (e0, e1) = self.crossovers().unwrap();
                vec![
                    (self.llr(0.0).unwrap(), 1.0 - e0, e1),
                    (self.llr(1.0).unwrap(), e0, 1.0 - e1),
                ]
            }
            ChannelModel::BiAwgn { sigma } => {
                // m = 2y / sigma^2 is linear in y
                let slope = 2.0 / (sigma * sigma);
                let y_cut = llr_cut / slope;
                let dy = max_step / slope;
                let cells = (2.0 * y_cut / dy).ceil() as usize;
                let dy = 2.0 * y_cut / cells as f64;
                let mut edges: Vec<f64> = (0..=cells).map(|i| -y_cut + i as f64 * dy).collect();
                edges[0] = f64::NEG_INFINITY;
                edges[cells] = f64::INFINITY;
                let cell = |a: f64, b: f64| {
                    (normal_mass(1.0, sigma, a, b), normal_mass(-1.0, sigma, a, b))
                };
                gaussian_cells(&edges, cell)
            }
            ChannelModel::CompositeBiAwgn { sigma } => {
                // the LLR is even in y and increasing in |y| with slope below 3/(√5 sigma^2)
                let slope = 3.0 * COMPOSITE_INNER / (sigma * sigma);
                let asym = 2.0 * COMPOSITE_INNER / (sigma * sigma);
                let offset = (COMPOSITE_OUTER.powi(2) - COMPOSITE_INNER.powi(2)) / (2.0 * sigma * sigma);
                let y_cut = (llr_cut + offset) / asym;
                let dy = max_step / slope;
                let cells = (y_cut / dy).ceil() as usize;
                let dy = y_cut / cells as f64;
                let mut edges: Vec<f64> = (0..=cells).map(|i| i as f64 * dy).collect();
                edges[cells] = f64::INFINITY;
                let half = |a: f64, mu: f64, b: f64| {
                    normal_mass(mu, sigma, a, b) + normal_mass(-mu, sigma, a, b)
                };
                // each |y| cell collects both signs of y, which carry equal mass
                let cell = |a: f64, b: f64| {
                    (half(a, COMPOSITE_OUTER, b), half(a, COMPOSITE_INNER, b))
                };
                gaussian_cells(&edges, cell)
            }
        }
    }

    /// Quantized laws of the channel LLR given bit 0 and (reflected) given bit 1.
    pub fn initial_density_pair(&self, grid: GridSpec) -> DensityPair {
        let step = grid.width() / 10.0;
        let cut = grid.llr_max + 40.0;
        let mut p0 = QuantizedDensity::zero(grid);
        let mut p1 = QuantizedDensity::zero(grid);
        for (m, u0, u1) in self.output_cells(step, cut) {
            if u0 > 0.0 {
                p0.add_at(m, u0);
            }
            if u1 > 0.0 {
                p1.add_at(-m, u1);
            }
        }
        DensityPair::new(p0, p1).unwrap()
    }

    /// `∫ sqrt(f(y|0) f(y|1)) dy`.
    pub fn bhattacharyya(&self) -> f64 {
        match *self {
            ChannelModel::Bec { eps } => eps,
            ChannelModel::Bsc { .. } | ChannelModel::Basc { .. } | ChannelModel::Z { .. } => {
                let (e0, e1) = self.crossovers().unwrap();
                (e1 * (1.0 - e0)).sqrt() + (e0 * (1.0 - e1)).sqrt()
            }
            ChannelModel::BiAwgn { sigma } => (-1.0 / (2.0 * sigma * sigma)).exp(),
            ChannelModel::CompositeBiAwgn { sigma } => {
                // Simpson's rule on an even integrand; the tails past 12 sigma are negligible
                let hi = COMPOSITE_OUTER + 12.0 * sigma;
                let steps = 20_000;
                let h = hi / steps as f64;
                let f = |y: f64| (self.likelihood(y, 0) * self.likelihood(y, 1)).sqrt();
                let mut acc = f(0.0) + f(hi);
                for i in 1..steps {
                    acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                2.0 * acc * h / 3.0
            }
        }
    }

    pub fn family(&self) -> FamilyKind {
        match *self {
            ChannelModel::Bec { .. } => FamilyKind::Bec,
            ChannelModel::Bsc { .. } => FamilyKind::Bsc,
            ChannelModel::Basc { eps0, .. } => FamilyKind::Z { eps0_floor: eps0 },
            ChannelModel::Z { eps0_floor, .. } => FamilyKind::Z { eps0_floor },
            ChannelModel::BiAwgn { .. } => FamilyKind::BiAwgn,
            ChannelModel::CompositeBiAwgn { .. } => FamilyKind::CompositeBiAwgn,
        }
    }

    /// Parses spec strings such as `bec:eps=0.42`, `basc:eps0=0.01,eps1=0.2`,
    /// `z:eps1=0.23` or `biawgnc:sigma=0.879`.
    pub fn parse(spec: &str) -> Result<Self, ChannelError> {
        let err = |msg: String| ChannelError::Parse {
            spec: spec.to_string(),
            msg,
        };
        let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
        let mut fields = Vec::new();
        for part in args.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{part}`")))?;
            let k = k.trim();
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| err(format!("field `{k}` has non-numeric value `{}`", v.trim())))?;
            fields.push((k, v));
        }
        let allowed: &[&str] = match kind.trim() {
            "bec" | "bsc" => &["eps"],
            "basc" => &["eps0", "eps1"],
            "z" => &["eps1", "eps0"],
            "biawgnc" | "biawgn" | "cbiawgnc" => &["sigma"],
            other => return Err(err(format!("unknown channel `{other}`"))),
        };
        if let Some((k, _)) = fields.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(err(format!("unknown field `{k}`")));
        }
        let get = |name: &str| {
            fields
                .iter()
                .find(|(k, _)| *k == name)
                .map(|&(_, v)| v)
                .ok_or_else(|| err(format!("missing field `{name}`")))
        };
        let ch = match kind.trim() {
            "bec" => ChannelModel::Bec { eps: get("eps")? },
            "bsc" => ChannelModel::Bsc { eps: get("eps")? },
            "basc" => ChannelModel::Basc {
                eps0: get("eps0")?,
                eps1: get("eps1")?,
            },
            "z" => ChannelModel::Z {
                eps1: get("eps1")?,
                eps0_floor: get("eps0").unwrap_or(Z_EPS0_FLOOR),
            },
            "cbiawgnc" => ChannelModel::CompositeBiAwgn {
                sigma: get("sigma")?,
            },
            _ => ChannelModel::BiAwgn {
                sigma: get("sigma")?,
            },
        };
        ch.validate().map_err(|e| err(e.to_string()))?;
        Ok(ch)
    }
}

fn composite_llr(sigma: f64, y: f64) -> f64 {
    let s2 = sigma * sigma;
    let offset = (COMPOSITE_OUTER.powi(2) - COMPOSITE_INNER.powi(2)) / (2.0 * s2);
    ln_cosh(COMPOSITE_OUTER * y / s2) - ln_cosh(COMPOSITE_INNER * y / s2) - offset
}

fn gaussian_cells(edges: &[f64], cell: impl Fn(f64, f64) -> (f64, f64)) -> Vec<(f64, f64, f64)> {
    edges
        .windows(2)
        .filter_map(|w| {
            let (u0, u1) = cell(w[0], w[1]);
            if u0 <= 0.0 && u1 <= 0.0 {
                return None;
            }
            let m = if u1 <= 0.0 {
                f64::INFINITY
            } else if u0 <= 0.0 {
                f64::NEG_INFINITY
            } else {
                (u0 / u1).ln()
            };
            Some((m, u0.max(0.0), u1.max(0.0)))
        })
        .collect()
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ChannelModel::Bec { eps } => write!(f, "bec:eps={eps}"),
            ChannelModel::Bsc { eps } => write!(f, "bsc:eps={eps}"),
            ChannelModel::Basc { eps0, eps1 } => write!(f, "basc:eps0={eps0},eps1={eps1}"),
            ChannelModel::Z { eps1, eps0_floor } => write!(f, "z:eps1={eps1},eps0={eps0_floor}"),
            ChannelModel::BiAwgn { sigma } => write!(f, "biawgnc:sigma={sigma}"),
            ChannelModel::CompositeBiAwgn { sigma } => write!(f, "cbiawgnc:sigma={sigma}"),
        }
    }
}

impl FromStr for ChannelModel {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// A one-parameter channel family; larger parameters are noisier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyKind {
    Bec,
    Bsc,
    /// Sweeps `eps1` at fixed `eps0`.
    Z { eps0_floor: f64 },
    BiAwgn,
    CompositeBiAwgn,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelFamily {
    pub kind: FamilyKind,
    pub lo: f64,
    pub hi: f64,
}

impl ChannelFamily {
    /// Family with its default search interval.
    pub fn new(kind: FamilyKind) -> Self {
        let (lo, hi) = match kind {
            FamilyKind::BiAwgn | FamilyKind::CompositeBiAwgn => (0.3, 2.0),
            _ => (1e-3, 0.5),
        };
        ChannelFamily { kind, lo, hi }
    }

    pub fn with_interval(mut self, lo: f64, hi: f64) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    pub fn at(&self, param: f64) -> ChannelModel {
        match self.kind {
            FamilyKind::Bec => ChannelModel::Bec { eps: param },
            FamilyKind::Bsc => ChannelModel::Bsc { eps: param },
            FamilyKind::Z { eps0_floor } => ChannelModel::Z {
                eps1: param,
                eps0_floor,
            },
            FamilyKind::BiAwgn => ChannelModel::BiAwgn { sigma: param },
            FamilyKind::CompositeBiAwgn => ChannelModel::CompositeBiAwgn { sigma: param },
        }
    }

    /// Name of the swept parameter.
    pub fn axis(&self) -> &'static str {
        match self.kind {
            FamilyKind::Bec | FamilyKind::Bsc => "eps",
            FamilyKind::Z { .. } => "eps1",
            FamilyKind::BiAwgn | FamilyKind::CompositeBiAwgn => "sigma",
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::Bec => "bec",
            FamilyKind::Bsc => "bsc",
            FamilyKind::Z { .. } => "z",
            FamilyKind::BiAwgn => "biawgnc",
            FamilyKind::CompositeBiAwgn => "cbiawgnc",
        }
    }

    /// `bec`, `bsc`, `z`, `biawgnc` or `cbiawgnc`.
    pub fn parse(s: &str) -> Result<Self, ChannelError> {
        let kind = match s.trim() {
            "bec" => FamilyKind::Bec,
            "bsc" => FamilyKind::Bsc,
            "z" => FamilyKind::Z {
                eps0_floor: Z_EPS0_FLOOR,
            },
            "biawgnc" | "biawgn" | "sigma" => FamilyKind::BiAwgn,
            "cbiawgnc" => FamilyKind::CompositeBiAwgn,
            other => {
                return Err(ChannelError::Parse {
                    spec: other.to_string(),
                    msg: "unknown family; expected bec, bsc, z, biawgnc or cbiawgnc".into(),
                })
            }
        };
        Ok(Self::new(kind))
    }
}
