//! Quantized LLR densities on a uniform lattice with explicit atoms at ±∞.
//!
//! The lattice has `bins + 1` points `x_k = (k - bins/2) * w` for
//! `w = (llr_max - llr_min) / bins`, so zero is a lattice point and the grid
//! is closed under negation. Values that fall between lattice points are
//! placed by a [`Rounding`] kernel.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::ensemble::DegreeDistribution;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("densities live on different grids")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("Chernoff functional is infinite: mass {0} at -inf")]
    Overflow(f64),
}

/// How a value between two lattice points is assigned to the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Rounding {
    /// Splits mass between the two neighbours with weights linear in `e^{-m}`
    /// (`weight_lo = expm1(c_hi - r) / expm1(w)`). Above the top point the
    /// remainder `1 - e^{max - r}` goes to the +∞ atom; below the bottom point
    /// everything goes to the bottom point. Applied to both conditional
    /// densities this keeps `P0(x) = e^x P1(-x)` exact on the lattice.
    LikelihoodSplit,
    /// Nearest lattice point, ties toward zero, saturating at the end points.
    #[default]
    Nearest,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub llr_max: f64,
    pub bins: usize,
    pub rounding: Rounding,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            llr_max: 15.0,
            bins: 256,
            rounding: Rounding::Nearest,
        }
    }
}

impl GridSpec {
    /// Grid on `[llr_min, llr_max]`; the range must be symmetric about zero
    /// and `bins` even so that negation maps lattice points to lattice points.
    pub fn new(bins: usize, llr_min: f64, llr_max: f64) -> Result<Self, DensityError> {
        let bad = |m: String| Err(DensityError::InvalidGrid(m));
        if !(llr_min < 0.0 && 0.0 < llr_max) || !llr_max.is_finite() || !llr_min.is_finite() {
            return bad(format!("need llr_min < 0 < llr_max, got {llr_min}:{llr_max}"));
        }
        if (llr_min + llr_max).abs() > 1e-12 * llr_max {
            return bad(format!("range must be symmetric, got {llr_min}:{llr_max}"));
        }
        if bins < 8 || bins % 2 != 0 || bins > u16::MAX as usize - 1 {
            return bad(format!("bins must be even and in [8, 65534], got {bins}"));
        }
        Ok(GridSpec {
            llr_max,
            bins,
            rounding: Rounding::Nearest,
        })
    }

    pub fn with_rounding(mut self, rounding: Rounding) -> Self {
        self.rounding = rounding;
        self
    }

    /// Parses `bins:min:max`, e.g. `256:-15:15`.
    pub fn parse(s: &str) -> Result<Self, DensityError> {
        let parts: Vec<&str> = s.split(':').collect();
        let [b, lo, hi] = parts[..] else {
            return Err(DensityError::InvalidGrid(format!(
                "expected bins:min:max, got `{s}`"
            )));
        };
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| DensityError::InvalidGrid(format!("bad number `{t}` in `{s}`")))
        };
        let bins = b
            .trim()
            .parse::<usize>()
            .map_err(|_| DensityError::InvalidGrid(format!("bad bin count `{b}`")))?;
        Self::new(bins, num(lo)?, num(hi)?)
    }

    pub fn llr_min(&self) -> f64 {
        -self.llr_max
    }

    pub fn width(&self) -> f64 {
        2.0 * self.llr_max / self.bins as f64
    }

    /// Number of lattice points (`bins + 1`).
    pub fn points(&self) -> usize {
        self.bins + 1
    }

    /// Index of the zero point.
    pub fn zero_index(&self) -> usize {
        self.bins / 2
    }

    pub fn center(&self, k: usize) -> f64 {
        (k as f64 - (self.bins / 2) as f64) * self.width()
    }

    fn key(&self) -> (usize, u64, Rounding) {
        (self.bins, self.llr_max.to_bits(), self.rounding)
    }

    /// Where a finite value lands: `(lo index, weight at lo, weight at lo+1,
    /// weight at +∞)`. Weights sum to one.
    pub fn split(&self, r: f64) -> Placement {
        let w = self.width();
        let top = self.bins;
        let pos = r / w + (self.bins / 2) as f64;
        match self.rounding {
            Rounding::Nearest => {
                let k = if pos <= 0.0 {
                    0
                } else if pos >= top as f64 {
                    top
                } else {
                    let fl = pos.floor();
                    let frac = pos - fl;
                    let k = fl as usize;
                    // ties go toward the zero point
                    if frac > 0.5 || (frac == 0.5 && k < self.zero_index()) {
                        k + 1
                    } else {
                        k
                    }
                };
                Placement::point(k)
            }
            Rounding::LikelihoodSplit => {
                if r >= self.llr_max {
                    let keep = (self.llr_max - r).exp();
                    return Placement {
                        lo: top,
                        w_lo: keep,
                        w_hi: 0.0,
                        w_inf: 1.0 - keep,
                    };
                }
                if pos <= 0.0 {
                    return Placement::point(0);
                }
                let fl = pos.floor();
                let k = fl as usize;
                let c_hi = self.center(k + 1);
                let snap = 1e-9;
                if pos - fl < snap {
                    return Placement::point(k);
                }
                if fl + 1.0 - pos < snap {
                    return Placement::point(k + 1);
                }
                let w_lo = (c_hi - r).exp_m1() / w.exp_m1();
                Placement {
                    lo: k,
                    w_lo,
                    w_hi: 1.0 - w_lo,
                    w_inf: 0.0,
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub lo: usize,
    pub w_lo: f64,
    pub w_hi: f64,
    pub w_inf: f64,
}

impl Placement {
    fn point(k: usize) -> Self {
        Placement {
            lo: k,
            w_lo: 1.0,
            w_hi: 0.0,
            w_inf: 0.0,
        }
    }
}

/// Signed discrete measure on a [`GridSpec`] lattice plus ±∞ atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedDensity {
    grid: GridSpec,
    mass: Vec<f64>,
    neg_inf: f64,
    pos_inf: f64,
}

impl QuantizedDensity {
    pub fn zero(grid: GridSpec) -> Self {
        QuantizedDensity {
            grid,
            mass: vec![0.0; grid.points()],
            neg_inf: 0.0,
            pos_inf: 0.0,
        }
    }

    /// Unit mass at `r` (may be ±∞), placed by the grid's rounding kernel.
    pub fn delta(grid: GridSpec, r: f64) -> Self {
        let mut d = Self::zero(grid);
        d.add_at(r, 1.0);
        d
    }

    pub fn from_parts(grid: GridSpec, mass: Vec<f64>, neg_inf: f64, pos_inf: f64) -> Self {
        assert_eq!(mass.len(), grid.points(), "mass vector length");
        QuantizedDensity {
            grid,
            mass,
            neg_inf,
            pos_inf,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn neg_inf(&self) -> f64 {
        self.neg_inf
    }

    pub fn pos_inf(&self) -> f64 {
        self.pos_inf
    }

    pub fn total(&self) -> f64 {
        self.neg_inf + self.pos_inf + self.mass.iter().sum::<f64>()
    }

    pub fn mass_at(&self, k: usize) -> f64 {
        self.mass[k]
    }

    /// Adds `weight` at value `r` through the rounding kernel.
    pub fn add_at(&mut self, r: f64, weight: f64) {
        if r == f64::INFINITY {
            self.pos_inf += weight;
        } else if r == f64::NEG_INFINITY {
            self.neg_inf += weight;
        } else {
            let p = self.grid.split(r);
            self.apply(&p, weight);
        }
    }

    #[inline]
    fn apply(&mut self, p: &Placement, weight: f64) {
        self.mass[p.lo] += weight * p.w_lo;
        if p.w_hi != 0.0 {
            self.mass[p.lo + 1] += weight * p.w_hi;
        }
        if p.w_inf != 0.0 {
            self.pos_inf += weight * p.w_inf;
        }
    }

    fn same_grid(&self, other: &Self) -> Result<(), DensityError> {
        if self.grid.key() == other.grid.key() {
            Ok(())
        } else {
            Err(DensityError::GridMismatch)
        }
    }

    /// Law of `-m`.
    pub fn reflect(&self) -> Self {
        let mut mass = self.mass.clone();
        mass.reverse();
        QuantizedDensity {
            grid: self.grid,
            mass,
            neg_inf: self.pos_inf,
            pos_inf: self.neg_inf,
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        QuantizedDensity {
            grid: self.grid,
            mass: self.mass.iter().map(|m| a * m).collect(),
            neg_inf: a * self.neg_inf,
            pos_inf: a * self.pos_inf,
        }
    }

    /// Rescaled to unit total mass. Density evolution amplifies rounding errors
    /// in the total mass by `lambda'(1) rho'(1)` per iteration, so iterated
    /// probability densities are renormalized after every step.
    pub fn normalized(&self) -> Self {
        self.scale(1.0 / self.total())
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self, DensityError> {
        self.same_grid(other)?;
        Ok(QuantizedDensity {
            grid: self.grid,
            mass: self
                .mass
                .iter()
                .zip(&other.mass)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            neg_inf: a * self.neg_inf + b * other.neg_inf,
            pos_inf: a * self.pos_inf + b * other.pos_inf,
        })
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, other: &Self, a: f64) -> Result<(), DensityError> {
        self.same_grid(other)?;
        for (x, y) in self.mass.iter_mut().zip(&other.mass) {
            *x += a * y;
        }
        self.neg_inf += a * other.neg_inf;
        self.pos_inf += a * other.pos_inf;
        Ok(())
    }

    /// Law of `m_P + m_Q`. Sums past the ends of the lattice go through the
    /// rounding kernel; `∞ + finite = ∞` and `(-∞) + (+∞)` lands on zero.
    pub fn convolve(&self, other: &Self) -> Result<Self, DensityError> {
        self.same_grid(other)?;
        let grid = self.grid;
        let n = grid.points();
        let top = grid.bins;
        let z = grid.zero_index();
        let tables = tables_for(&grid);
        let mut out = Self::zero(grid);
        let (pm, qm) = (&self.mass, &other.mass);
        let (p_total, q_total): (f64, f64) = (pm.iter().sum(), qm.iter().sum());

        let q_nz: Vec<usize> = (0..n).filter(|&j| qm[j] != 0.0).collect();
        let mut full = vec![0.0; 2 * n - 1];
        for (i, &a) in pm.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &mut full[i..i + n];
            for &j in &q_nz {
                row[j] += a * qm[j];
            }
        }
        // full[t] sits at (t - 2z) w, i.e. lattice index t - z
        for (t, &v) in full.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            if t < z {
                let p = &tables.below[z - t - 1];
                out.apply(p, v);
            } else if t - z > top {
                let p = &tables.above[t - z - top - 1];
                out.apply(p, v);
            } else {
                out.mass[t - z] += v;
            }
        }
        let (pn, pp, qn, qp) = (self.neg_inf, self.pos_inf, other.neg_inf, other.pos_inf);
        out.pos_inf += pp * (q_total + qp) + qp * p_total;
        out.neg_inf += pn * (q_total + qn) + qn * p_total;
        out.mass[z] += pn * qp + pp * qn;
        Ok(out)
    }

    /// Law of `R(m_P, m_Q) = 2 atanh(tanh(m_P/2) tanh(m_Q/2))`, bilinear in
    /// its arguments so signed inputs are allowed.
    pub fn check_combine(&self, other: &Self) -> Result<Self, DensityError> {
        self.same_grid(other)?;
        let grid = self.grid;
        let n = grid.points();
        let top = grid.bins;
        let tables = tables_for(&grid);
        let mut out = Self::zero(grid);
        let (pm, qm) = (&self.mass, &other.mass);

        let q_nz: Vec<usize> = (0..n).filter(|&j| qm[j] != 0.0).collect();
        for (i, &a) in pm.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let lo_row = &tables.check_lo[i * n..(i + 1) * n];
            let w_row = &tables.check_w[i * n..(i + 1) * n];
            for &j in &q_nz {
                let v = a * qm[j];
                let lo = lo_row[j] as usize;
                let wl = w_row[j];
                out.mass[lo] += v * wl;
                if wl != 1.0 {
                    out.mass[lo + 1] += v * (1.0 - wl);
                }
            }
        }
        // +∞ acts as the identity, -∞ as negation
        let (pn, pp, qn, qp) = (self.neg_inf, self.pos_inf, other.neg_inf, other.pos_inf);
        for k in 0..n {
            out.mass[k] += pp * qm[k] + qp * pm[k];
            out.mass[top - k] += pn * qm[k] + qn * pm[k];
        }
        out.pos_inf += pp * qp + pn * qn;
        out.neg_inf += pp * qn + pn * qp;
        Ok(out)
    }

    /// `sum_k lambda_k Q^{conv (k-1)}`.
    pub fn lambda_apply(&self, d: &DegreeDistribution) -> Self {
        let unit = QuantizedDensity::delta(self.grid, 0.0);
        poly_apply(self, d.lambda(), unit, |a, b| a.convolve(b))
    }

    /// `sum_k rho_k Q^{check (k-1)}`.
    pub fn rho_apply(&self, d: &DegreeDistribution) -> Self {
        let unit = QuantizedDensity::delta(self.grid, f64::INFINITY);
        poly_apply(self, d.rho(), unit, |a, b| a.check_combine(b))
    }

    /// Mass strictly below zero (including -∞) plus half the mass at zero.
    pub fn error_mass(&self) -> f64 {
        let z = self.grid.zero_index();
        self.neg_inf + self.mass[..z].iter().sum::<f64>() + 0.5 * self.mass[z]
    }

    /// `∫ e^{-s m} dP`; infinite if the -∞ atom carries mass.
    pub fn exp_moment(&self, s: f64) -> f64 {
        if self.neg_inf > 0.0 {
            return f64::INFINITY;
        }
        let g = self.grid;
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0.0)
            .map(|(k, &m)| m * (-s * g.center(k)).exp())
            .sum()
    }

    /// `∫ e^{-m/2} dP`.
    pub fn chernoff(&self) -> Result<f64, DensityError> {
        if self.neg_inf > 0.0 {
            return Err(DensityError::Overflow(self.neg_inf));
        }
        Ok(self.exp_moment(0.5))
    }

    /// Total-variation distance `½ sum |P - Q|`.
    pub fn tv_distance(&self, other: &Self) -> Result<f64, DensityError> {
        self.same_grid(other)?;
        let s: f64 = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            + (self.neg_inf - other.neg_inf).abs()
            + (self.pos_inf - other.pos_inf).abs();
        Ok(0.5 * s)
    }

    /// Smallest mass in any bin or atom (negative for signed measures).
    pub fn min_mass(&self) -> f64 {
        self.mass
            .iter()
            .copied()
            .chain([self.neg_inf, self.pos_inf])
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `llr,mass`; atoms are written as `-inf` / `inf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("llr,mass\n");
        let _ = writeln!(s, "-inf,{:.12e}", self.neg_inf);
        for (k, m) in self.mass.iter().enumerate() {
            let _ = writeln!(s, "{:.12},{:.12e}", self.grid.center(k), m);
        }
        let _ = writeln!(s, "inf,{:.12e}", self.pos_inf);
        s
    }
}

fn poly_apply(
    q: &QuantizedDensity,
    coeffs: &std::collections::BTreeMap<u32, f64>,
    unit: QuantizedDensity,
    op: impl Fn(&QuantizedDensity, &QuantizedDensity) -> Result<QuantizedDensity, DensityError>,
) -> QuantizedDensity {
    let mut out = QuantizedDensity::zero(q.grid);
    let mut power = q.clone();
    let mut exponent = 1;
    for (&k, &c) in coeffs {
        let e = k.saturating_sub(1);
        if e == 0 {
            // degree-1 nodes contribute the identity element of the operator
            out.add_scaled(&unit, c).unwrap();
            continue;
        }
        while exponent < e {
            power = op(&power, q).unwrap();
            exponent += 1;
        }
        out.add_scaled(&power, c).unwrap();
    }
    out
}

/// A pair of conditional message densities in the aligned-parity frame:
/// `p0` is the law given bit 0 and `p1` the law of `-m` given bit 1.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityPair {
    pub p0: QuantizedDensity,
    pub p1: QuantizedDensity,
}

impl DensityPair {
    pub fn new(p0: QuantizedDensity, p1: QuantizedDensity) -> Result<Self, DensityError> {
        p0.same_grid(&p1)?;
        Ok(DensityPair { p0, p1 })
    }

    pub fn symmetric(p: QuantizedDensity) -> Self {
        DensityPair { p0: p.clone(), p1: p }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.p0.grid
    }

    /// Bit-averaged density `½ (p0 + p1)`.
    pub fn average(&self) -> QuantizedDensity {
        self.p0.lin_comb(0.5, &self.p1, 0.5).unwrap()
    }

    /// Check-node output pair: with `S± = (p0 ± p1) / 2`,
    /// `Q(x) = rho(S+) + (-1)^x rho(S-)`.
    pub fn rho_apply(&self, d: &DegreeDistribution) -> DensityPair {
        let sp = self.p0.lin_comb(0.5, &self.p1, 0.5).unwrap();
        let sm = self.p0.lin_comb(0.5, &self.p1, -0.5).unwrap();
        let rp = sp.rho_apply(d);
        let rm = sm.rho_apply(d);
        DensityPair {
            p0: rp.lin_comb(1.0, &rm, 1.0).unwrap(),
            p1: rp.lin_comb(1.0, &rm, -1.0).unwrap(),
        }
    }

    /// `½ [P(p0 < 0) + P(p1 < 0)]` with half the zero mass counted as error.
    pub fn error_prob(&self) -> f64 {
        0.5 * (self.p0.error_mass() + self.p1.error_mass())
    }

    /// `(CBP(0), CBP(1))`.
    pub fn chernoff_parts(&self) -> Result<(f64, f64), DensityError> {
        Ok((self.p0.chernoff()?, self.p1.chernoff()?))
    }

    /// `½ (CBP(0) + CBP(1))`.
    pub fn chernoff(&self) -> Result<f64, DensityError> {
        let (a, b) = self.chernoff_parts()?;
        Ok(0.5 * (a + b))
    }
}

struct GridTables {
    /// Placement of `(bins + d) w` for `d = 1..=bins`.
    above: Vec<Placement>,
    /// Placement of `-(bins/2 + d) w` for `d = 1..=bins`.
    below: Vec<Placement>,
    check_lo: Vec<u16>,
    check_w: Vec<f64>,
}

type TableCache = Mutex<HashMap<(usize, u64, Rounding), Arc<GridTables>>>;

fn tables_for(grid: &GridSpec) -> Arc<GridTables> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&grid.key()) {
        return t.clone();
    }
    let built = Arc::new(build_tables(grid));
    cache
        .lock()
        .unwrap()
        .entry(grid.key())
        .or_insert(built)
        .clone()
}

fn build_tables(grid: &GridSpec) -> GridTables {
    let n = grid.points();
    let w = grid.width();
    let half = (grid.bins / 2) as f64;
    let above = (1..=grid.bins)
        .map(|d| grid.split((half + d as f64) * w))
        .collect();
    let below = (1..=grid.bins)
        .map(|d| grid.split(-(half + d as f64) * w))
        .collect();
    let mut check_lo = vec![0u16; n * n];
    let mut check_w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let r = check_node_llr(grid.center(i), grid.center(j));
            let p = grid.split(r);
            debug_assert_eq!(p.w_inf, 0.0);
            let (lo, wl) = if p.w_hi == 0.0 {
                (p.lo, 1.0)
            } else {
                (p.lo, p.w_lo)
            };
            check_lo[i * n + j] = lo as u16;
            check_w[i * n + j] = wl;
        }
    }
    GridTables {
        above,
        below,
        check_lo,
        check_w,
    }
}

/// `2 atanh(tanh(a/2) tanh(b/2))`, evaluated without cancellation.
pub fn check_node_llr(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    if a.is_infinite() {
        return a.signum() * b;
    }
    if b.is_infinite() {
        return b.signum() * a;
    }
    let sign = a.signum() * b.signum();
    sign * a.abs().min(b.abs()) + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}
