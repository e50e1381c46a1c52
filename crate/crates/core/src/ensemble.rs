//! Degree distributions and socket-permutation sampling of bipartite multigraphs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gf2::GF2Matrix;

/// Tolerance on the coefficient sums of a degree distribution after parsing.
pub const PARSE_SUM_TOLERANCE: f64 = 1e-6;
const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("{side} fractions sum to {sum}, expected 1")]
    BadSum { side: &'static str, sum: f64 },
    #[error("{side} fraction {value} for degree {degree} is outside [0, 1]")]
    BadFraction {
        side: &'static str,
        degree: u32,
        value: f64,
    },
    #[error("{side} degree {degree} is below the minimum {min}")]
    DegreeTooSmall {
        side: &'static str,
        degree: u32,
        min: u32,
    },
    #[error("{side} distribution is empty")]
    Empty { side: &'static str },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no integral node-degree assignment for n = {n}: {reason}")]
    InfeasibleDegrees { n: usize, reason: String },
    #[error("unknown code preset `{0}`")]
    UnknownPreset(String),
}

/// Edge-perspective degree distribution pair (lambda, rho).
///
/// Keys are node degrees `k`; values are the fraction of edges attached to
/// nodes of that degree, i.e. the coefficient of `x^(k-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeDistribution {
    lambda: BTreeMap<u32, f64>,
    rho: BTreeMap<u32, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedScalars {
    pub lambda2: f64,
    pub rho_prime_1: f64,
    pub int_lambda: f64,
    pub int_rho: f64,
    pub design_rate: f64,
}

impl DerivedScalars {
    /// Largest Bhattacharyya parameter allowed by the necessary stability
    /// condition, `1 / (lambda2 rho'(1))`; infinite when `lambda2 = 0`.
    pub fn stability_bound(&self) -> f64 {
        1.0 / (self.lambda2 * self.rho_prime_1)
    }
}

fn check_side(
    side: &'static str,
    map: &BTreeMap<u32, f64>,
    min_degree: u32,
    tol: f64,
) -> Result<(), EnsembleError> {
    if map.is_empty() {
        return Err(EnsembleError::Empty { side });
    }
    for (&degree, &value) in map {
        if !(0.0..=1.0).contains(&value) || !value.is_finite() {
            return Err(EnsembleError::BadFraction { side, degree, value });
        }
        if degree < min_degree {
            return Err(EnsembleError::DegreeTooSmall {
                side,
                degree,
                min: min_degree,
            });
        }
    }
    let sum: f64 = map.values().sum();
    if (sum - 1.0).abs() > tol {
        return Err(EnsembleError::BadSum { side, sum });
    }
    Ok(())
}

fn normalized(map: BTreeMap<u32, f64>) -> BTreeMap<u32, f64> {
    let sum: f64 = map.values().sum();
    map.into_iter()
        .filter(|&(_, v)| v > 0.0)
        .map(|(k, v)| (k, v / sum))
        .collect()
}

impl DegreeDistribution {
    /// Validated constructor. Variable degrees must be at least 2 and check
    /// degrees at least 2; sums must equal one within 1e-9.
    pub fn new(
        lambda: impl IntoIterator<Item = (u32, f64)>,
        rho: impl IntoIterator<Item = (u32, f64)>,
    ) -> Result<Self, EnsembleError> {
        Self::with_min_variable_degree(lambda, rho, 2)
    }

    /// Like [`DegreeDistribution::new`] but admits variable degrees down to
    /// `min_variable_degree` (e.g. 1 for degenerate test ensembles).
    pub fn with_min_variable_degree(
        lambda: impl IntoIterator<Item = (u32, f64)>,
        rho: impl IntoIterator<Item = (u32, f64)>,
        min_variable_degree: u32,
    ) -> Result<Self, EnsembleError> {
        let lambda = collect(lambda);
        let rho = collect(rho);
        check_side("lambda", &lambda, min_variable_degree, SUM_TOLERANCE)?;
        check_side("rho", &rho, 2, SUM_TOLERANCE)?;
        Ok(DegreeDistribution {
            lambda: normalized(lambda),
            rho: normalized(rho),
        })
    }

    pub fn regular(dv: u32, dc: u32) -> Result<Self, EnsembleError> {
        Self::new([(dv, 1.0)], [(dc, 1.0)])
    }

    /// Parses the text format: one `lambda <k> <fraction>` or
    /// `rho <k> <fraction>` term per line; `#` starts a comment. Sums within
    /// 1e-6 of one are accepted and renormalized.
    pub fn parse(text: &str) -> Result<Self, EnsembleError> {
        let mut lambda = BTreeMap::new();
        let mut rho = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| EnsembleError::Parse { line: line_no, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [side, degree, value] = fields[..] else {
                return Err(err(format!(
                    "expected `lambda|rho <degree> <fraction>`, got `{line}`"
                )));
            };
            let degree: u32 = degree
                .parse()
                .map_err(|_| err(format!("bad degree `{degree}`")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| err(format!("bad fraction `{value}`")))?;
            let target = match side {
                "lambda" => &mut lambda,
                "rho" => &mut rho,
                other => return Err(err(format!("unknown side `{other}`"))),
            };
            if target.insert(degree, value).is_some() {
                return Err(err(format!("duplicate {side} degree {degree}")));
            }
        }
        let tol = PARSE_SUM_TOLERANCE + 1e-12;
        check_side("lambda", &lambda, 2, tol)?;
        check_side("rho", &rho, 2, tol)?;
        Ok(DegreeDistribution {
            lambda: normalized(lambda),
            rho: normalized(rho),
        })
    }

    /// Serialized form accepted by [`DegreeDistribution::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lambda {
            s.push_str(&format!("lambda {k} {v:.12}\n"));
        }
        for (k, v) in &self.rho {
            s.push_str(&format!("rho {k} {v:.12}\n"));
        }
        s
    }

    /// Named ensembles: `dv,dc` regular codes and the rate-1/2 irregular
    /// ensembles `12A`, `12B`, `12C` (max variable degree 12, max check degree 9).
    pub fn preset(name: &str) -> Result<Self, EnsembleError> {
        let unknown = || EnsembleError::UnknownPreset(name.to_string());
        match name.to_ascii_uppercase().as_str() {
            "12A" => Self::parse(CODE_12A),
            "12B" => Self::parse(CODE_12B),
            "12C" => Self::parse(CODE_12C),
            other => {
                let (a, b) = other
                    .trim_matches(|c| c == '(' || c == ')')
                    .split_once(',')
                    .ok_or_else(unknown)?;
                let dv = a.trim().parse().map_err(|_| unknown())?;
                let dc = b.trim().parse().map_err(|_| unknown())?;
                Self::regular(dv, dc)
            }
        }
    }

    pub fn lambda(&self) -> &BTreeMap<u32, f64> {
        &self.lambda
    }

    pub fn rho(&self) -> &BTreeMap<u32, f64> {
        &self.rho
    }

    pub fn max_variable_degree(&self) -> u32 {
        *self.lambda.keys().next_back().unwrap()
    }

    pub fn max_check_degree(&self) -> u32 {
        *self.rho.keys().next_back().unwrap()
    }

    pub fn min_check_degree(&self) -> u32 {
        *self.rho.keys().next().unwrap()
    }

    /// `lambda(x) = sum_k lambda_k x^(k-1)`.
    pub fn lambda_poly(&self, x: f64) -> f64 {
        self.lambda.iter().map(|(&k, &v)| v * x.powi(k as i32 - 1)).sum()
    }

    pub fn rho_poly(&self, x: f64) -> f64 {
        self.rho.iter().map(|(&k, &v)| v * x.powi(k as i32 - 1)).sum()
    }

    pub fn derived_scalars(&self) -> DerivedScalars {
        let lambda2 = self.lambda.get(&2).copied().unwrap_or(0.0);
        let rho_prime_1 = self.rho.iter().map(|(&k, &v)| v * (k as f64 - 1.0)).sum();
        let int_lambda: f64 = self.lambda.iter().map(|(&k, &v)| v / k as f64).sum();
        let int_rho: f64 = self.rho.iter().map(|(&k, &v)| v / k as f64).sum();
        DerivedScalars {
            lambda2,
            rho_prime_1,
            int_lambda,
            int_rho,
            design_rate: 1.0 - int_rho / int_lambda,
        }
    }

    /// The same ensemble with every check degree raised by `delta`
    /// (`rho -> x^delta rho`).
    pub fn shift_check_degrees(&self, delta: u32) -> Self {
        DegreeDistribution {
            lambda: self.lambda.clone(),
            rho: self.rho.iter().map(|(&k, &v)| (k + delta, v)).collect(),
        }
    }

    /// Node counts per degree for a length-`n` realization.
    ///
    /// Variable counts use largest-remainder rounding of `lambda_k E / k` at the
    /// edge budget `E = round(n / int_lambda)`; check counts are rounded the same
    /// way and then nudged between adjacent check degrees until both sides carry
    /// the same number of sockets.
    pub fn node_degrees(&self, n: usize) -> Result<(Vec<u32>, Vec<u32>), EnsembleError> {
        let infeasible = |reason: String| EnsembleError::InfeasibleDegrees { n, reason };
        if n < self.max_variable_degree() as usize {
            return Err(infeasible(format!(
                "n is smaller than the maximum variable degree {}",
                self.max_variable_degree()
            )));
        }
        let s = self.derived_scalars();
        let budget = (n as f64 / s.int_lambda).round();
        let var_counts = largest_remainder(
            &self
                .lambda
                .iter()
                .map(|(&k, &v)| (k, v * budget / k as f64))
                .collect::<Vec<_>>(),
            n,
        );
        let var_sockets: usize = var_counts.iter().map(|&(k, c)| k as usize * c).sum();

        let ideal: Vec<(u32, f64)> = self
            .rho
            .iter()
            .map(|(&k, &v)| (k, v * var_sockets as f64 / k as f64))
            .collect();
        let m = ideal.iter().map(|&(_, c)| c).sum::<f64>().round().max(1.0) as usize;
        let mut check_counts = largest_remainder(&ideal, m);
        balance_checks(&mut check_counts, var_sockets).map_err(infeasible)?;

        let expand = |counts: &[(u32, usize)]| -> Vec<u32> {
            counts
                .iter()
                .flat_map(|&(k, c)| std::iter::repeat_n(k, c))
                .collect()
        };
        Ok((expand(&var_counts), expand(&check_counts)))
    }

    /// A uniformly random socket pairing for a length-`n` code.
    pub fn sample_graph(&self, n: usize, seed: u64) -> Result<BipartiteGraph, EnsembleError> {
        let (var_degrees, check_degrees) = self.node_degrees(n)?;
        BipartiteGraph::random(var_degrees, check_degrees, seed)
    }
}

fn collect(it: impl IntoIterator<Item = (u32, f64)>) -> BTreeMap<u32, f64> {
    let mut map = BTreeMap::new();
    for (k, v) in it {
        *map.entry(k).or_insert(0.0) += v;
    }
    map
}

fn largest_remainder(ideal: &[(u32, f64)], total: usize) -> Vec<(u32, usize)> {
    let mut counts: Vec<(u32, usize)> = ideal.iter().map(|&(k, c)| (k, c.floor() as usize)).collect();
    let assigned: usize = counts.iter().map(|&(_, c)| c).sum();
    let mut order: Vec<usize> = (0..ideal.len()).collect();
    // stable: ties resolved toward lower degree
    order.sort_by(|&a, &b| {
        let ra = ideal[a].1 - ideal[a].1.floor();
        let rb = ideal[b].1 - ideal[b].1.floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut remaining = total.saturating_sub(assigned);
    for &i in order.iter().cycle().take(remaining.min(ideal.len() * total.max(1))) {
        if remaining == 0 {
            break;
        }
        counts[i].1 += 1;
        remaining -= 1;
    }
    counts
}

fn balance_checks(counts: &mut [(u32, usize)], target: usize) -> Result<(), String> {
    let sockets = |c: &[(u32, usize)]| c.iter().map(|&(k, n)| k as usize * n).sum::<usize>();
    for _ in 0..10 * target.max(1) {
        let have = sockets(counts);
        if have == target {
            return Ok(());
        }
        let need_more = have < target;
        let diff = have.abs_diff(target);
        // Move one check node to a neighbouring support degree whose step fits.
        let mut best: Option<(usize, usize, usize)> = None;
        for from in 0..counts.len() {
            if counts[from].1 == 0 {
                continue;
            }
            for to in 0..counts.len() {
                let (kf, kt) = (counts[from].0 as usize, counts[to].0 as usize);
                let ok = if need_more { kt > kf } else { kt < kf };
                let step = kf.abs_diff(kt);
                if ok && step <= diff && best.is_none_or(|b| step < b.2) {
                    best = Some((from, to, step));
                }
            }
        }
        match best {
            Some((from, to, _)) => {
                counts[from].1 -= 1;
                counts[to].1 += 1;
            }
            None => {
                // Add or remove a whole check node of degree `diff` if the support has it.
                let idx = counts
                    .iter()
                    .position(|&(k, n)| k as usize == diff && (need_more || n > 0));
                match idx {
                    Some(i) if need_more => counts[i].1 += 1,
                    Some(i) => counts[i].1 -= 1,
                    None => {
                        return Err(format!(
                            "{have} check sockets cannot be matched to {target} variable sockets"
                        ))
                    }
                }
            }
        }
    }
    Err("check socket balancing did not terminate".into())
}

/// Socket-level bipartite multigraph.
///
/// Variable sockets are numbered variable-major and check sockets check-major;
/// `pairing[s]` is the check socket joined to variable socket `s`. Edge `e` is
/// identified with variable socket `e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    var_degrees: Vec<u32>,
    check_degrees: Vec<u32>,
    var_offsets: Vec<usize>,
    check_offsets: Vec<usize>,
    pairing: Vec<u32>,
    edge_check: Vec<u32>,
    edge_var: Vec<u32>,
    check_edges: Vec<u32>,
    seed: Option<u64>,
}

fn offsets(degrees: &[u32]) -> Vec<usize> {
    let mut out = Vec::with_capacity(degrees.len() + 1);
    let mut acc = 0;
    out.push(0);
    for &d in degrees {
        acc += d as usize;
        out.push(acc);
    }
    out
}

impl BipartiteGraph {
    /// Pairs sockets by a uniformly random permutation (ChaCha8 seeded with `seed`).
    pub fn random(
        var_degrees: Vec<u32>,
        check_degrees: Vec<u32>,
        seed: u64,
    ) -> Result<Self, EnsembleError> {
        let edges: usize = var_degrees.iter().map(|&d| d as usize).sum();
        let check_sockets: usize = check_degrees.iter().map(|&d| d as usize).sum();
        if edges != check_sockets {
            return Err(EnsembleError::InfeasibleDegrees {
                n: var_degrees.len(),
                reason: format!("{edges} variable sockets vs {check_sockets} check sockets"),
            });
        }
        let mut pairing: Vec<u32> = (0..edges as u32).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pairing.shuffle(&mut rng);
        Ok(Self::from_pairing(var_degrees, check_degrees, pairing, Some(seed)))
    }

    /// Builds a graph from an explicit edge list of `(variable, check)` pairs,
    /// repeated pairs giving multi-edges. Node degrees are read off the list.
    pub fn from_edges(n: usize, m: usize, edges: &[(usize, usize)]) -> Self {
        let mut var_degrees = vec![0u32; n];
        let mut check_degrees = vec![0u32; m];
        for &(v, c) in edges {
            var_degrees[v] += 1;
            check_degrees[c] += 1;
        }
        let mut sorted: Vec<(usize, usize)> = edges.to_vec();
        sorted.sort_by_key(|&(v, _)| v);
        let check_off = offsets(&check_degrees);
        let mut fill = vec![0usize; m];
        let pairing = sorted
            .iter()
            .map(|&(_, c)| {
                let s = check_off[c] + fill[c];
                fill[c] += 1;
                s as u32
            })
            .collect();
        Self::from_pairing(var_degrees, check_degrees, pairing, None)
    }

    fn from_pairing(
        var_degrees: Vec<u32>,
        check_degrees: Vec<u32>,
        pairing: Vec<u32>,
        seed: Option<u64>,
    ) -> Self {
        let var_offsets = offsets(&var_degrees);
        let check_offsets = offsets(&check_degrees);
        let mut socket_check = vec![0u32; pairing.len()];
        for (c, w) in check_offsets.windows(2).enumerate() {
            for s in w[0]..w[1] {
                socket_check[s] = c as u32;
            }
        }
        let mut edge_var = vec![0u32; pairing.len()];
        for (v, w) in var_offsets.windows(2).enumerate() {
            for e in w[0]..w[1] {
                edge_var[e] = v as u32;
            }
        }
        let edge_check: Vec<u32> = pairing.iter().map(|&s| socket_check[s as usize]).collect();
        let mut check_edges = vec![0u32; pairing.len()];
        for (e, &s) in pairing.iter().enumerate() {
            check_edges[s as usize] = e as u32;
        }
        BipartiteGraph {
            var_degrees,
            check_degrees,
            var_offsets,
            check_offsets,
            pairing,
            edge_check,
            edge_var,
            check_edges,
            seed,
        }
    }

    pub fn n(&self) -> usize {
        self.var_degrees.len()
    }

    pub fn m(&self) -> usize {
        self.check_degrees.len()
    }

    pub fn num_edges(&self) -> usize {
        self.pairing.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn var_degrees(&self) -> &[u32] {
        &self.var_degrees
    }

    pub fn check_degrees(&self) -> &[u32] {
        &self.check_degrees
    }

    /// Check socket joined to each variable socket.
    pub fn pairing(&self) -> &[u32] {
        &self.pairing
    }

    /// Edge ids incident to variable `v` (contiguous).
    pub fn var_edges(&self, v: usize) -> std::ops::Range<usize> {
        self.var_offsets[v]..self.var_offsets[v + 1]
    }

    /// Edge ids incident to check `c`, in check-socket order.
    pub fn check_edges(&self, c: usize) -> &[u32] {
        &self.check_edges[self.check_offsets[c]..self.check_offsets[c + 1]]
    }

    pub fn edge_var(&self, e: usize) -> usize {
        self.edge_var[e] as usize
    }

    pub fn edge_check(&self, e: usize) -> usize {
        self.edge_check[e] as usize
    }

    /// Number of parallel edges between variable `v` and check `c`.
    pub fn multiplicity(&self, v: usize, c: usize) -> usize {
        self.var_edges(v).filter(|&e| self.edge_check(e) == c).count()
    }

    /// Parity-check matrix: `A[c][v] = 1` iff `v` and `c` share an odd number of edges.
    pub fn parity_matrix(&self) -> GF2Matrix {
        let mut a = GF2Matrix::zeros(self.m().max(1), self.n().max(1));
        for e in 0..self.num_edges() {
            a.flip(self.edge_check(e), self.edge_var(e));
        }
        a
    }
}

impl fmt::Display for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let poly = |m: &BTreeMap<u32, f64>| {
            m.iter()
                .map(|(k, v)| format!("{v:.6}x^{}", k - 1))
                .collect::<Vec<_>>()
                .join(" + ")
        };
        write!(f, "lambda = {}; rho = {}", poly(&self.lambda), poly(&self.rho))
    }
}

impl FromStr for DegreeDistribution {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

const CODE_12A: &str = "\
lambda 2 0.24426
lambda 3 0.25907
lambda 4 0.01054
lambda 5 0.05510
lambda 8 0.01455
lambda 10 0.01275
lambda 12 0.40373
rho 7 0.25475
rho 8 0.73438
rho 9 0.01087
";

const CODE_12B: &str = "\
lambda 2 0.236809
lambda 3 0.309590
lambda 4 0.032789
lambda 5 0.007116
lambda 6 0.000001
lambda 12 0.413695
rho 6 0.000015
rho 7 0.464854
rho 8 0.502485
rho 9 0.032647
";

const CODE_12C: &str = "\
lambda 3 0.861939
lambda 4 0.000818
lambda 5 0.000818
lambda 6 0.000818
lambda 7 0.000818
lambda 8 0.000818
lambda 9 0.000218
lambda 10 0.077898
lambda 11 0.055843
lambda 12 0.000013
rho 5 0.000814
rho 6 0.560594
rho 7 0.192771
rho 8 0.145207
rho 9 0.100613
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_36_scalars() {
        let d = DegreeDistribution::regular(3, 6).unwrap();
        let s = d.derived_scalars();
        assert_eq!(s.lambda2, 0.0);
        assert_eq!(s.rho_prime_1, 5.0);
        assert!((s.design_rate - 0.5).abs() < 1e-15);
    }

    #[test]
    fn regular_rate_is_one_minus_ratio() {
        for (dv, dc) in [(2, 3), (3, 4), (4, 8), (3, 5), (5, 10)] {
            let s = DegreeDistribution::regular(dv, dc).unwrap().derived_scalars();
            assert!((s.design_rate - (1.0 - dv as f64 / dc as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn code_12a_scalars() {
        let s = DegreeDistribution::preset("12A").unwrap().derived_scalars();
        assert!((s.stability_bound() - 0.6060).abs() < 1e-4, "{}", s.stability_bound());
        assert!((s.design_rate - 0.5).abs() < 0.005, "{}", s.design_rate);
    }

    #[test]
    fn code_12b_stability_from_coefficients() {
        // The printed table entry is 0.6247; the coefficients give ~0.643.
        let s = DegreeDistribution::preset("12B").unwrap().derived_scalars();
        assert!((s.stability_bound() - 0.643).abs() < 1e-3);
    }

    #[test]
    fn parser_accepts_and_rejects() {
        let d = DegreeDistribution::parse("# (3,6)\nlambda 3 1.0\nrho 6 1\n").unwrap();
        assert_eq!(d, DegreeDistribution::regular(3, 6).unwrap());
        assert!(matches!(
            DegreeDistribution::parse("lambda 3 0.9\nrho 6 1\n"),
            Err(EnsembleError::BadSum { side: "lambda", .. })
        ));
        assert!(matches!(
            DegreeDistribution::parse("lambda 3 1\nrho 6 1 2\n"),
            Err(EnsembleError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            DegreeDistribution::parse("lambda 3 1\nrho 6 1\nrho 6 0\n"),
            Err(EnsembleError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            DegreeDistribution::parse("lambda 1 1\nrho 6 1\n"),
            Err(EnsembleError::DegreeTooSmall { .. })
        ));
        assert!(matches!(
            DegreeDistribution::parse("lambda 3 1\n"),
            Err(EnsembleError::Empty { side: "rho" })
        ));
        // printed 12B/12C coefficients are off by 1e-6 and still accepted
        for p in ["12A", "12B", "12C"] {
            let d = DegreeDistribution::preset(p).unwrap();
            let reparsed = DegreeDistribution::parse(&d.to_text()).unwrap();
            let a = d.derived_scalars();
            let b = reparsed.derived_scalars();
            assert!((a.design_rate - b.design_rate).abs() < 1e-11);
        }
    }

    #[test]
    fn presets() {
        assert_eq!(
            DegreeDistribution::preset("(3,6)").unwrap(),
            DegreeDistribution::regular(3, 6).unwrap()
        );
        assert!(DegreeDistribution::preset("nope").is_err());
        let c = DegreeDistribution::preset("12C").unwrap();
        assert_eq!(c.derived_scalars().lambda2, 0.0);
        assert_eq!(c.max_variable_degree(), 12);
        assert_eq!(c.max_check_degree(), 9);
    }

    #[test]
    fn sample_regular_graphs() {
        let g = DegreeDistribution::regular(2, 3).unwrap().sample_graph(6, 1).unwrap();
        assert_eq!((g.n(), g.m(), g.num_edges()), (6, 4, 12));
        assert!(g.check_degrees().iter().all(|&d| d == 3));
        let g = DegreeDistribution::regular(3, 6).unwrap().sample_graph(10, 5).unwrap();
        assert_eq!((g.n(), g.m(), g.num_edges()), (10, 5, 30));
        let again = DegreeDistribution::regular(3, 6).unwrap().sample_graph(10, 5).unwrap();
        assert_eq!(g, again);
        let other = DegreeDistribution::regular(3, 6).unwrap().sample_graph(10, 6).unwrap();
        assert_ne!(g.pairing(), other.pairing());
    }

    #[test]
    fn infeasible_regular_lengths() {
        let d = DegreeDistribution::regular(3, 6).unwrap();
        assert!(matches!(
            d.sample_graph(11, 0),
            Err(EnsembleError::InfeasibleDegrees { .. })
        ));
        assert!(matches!(
            d.sample_graph(2, 0),
            Err(EnsembleError::InfeasibleDegrees { .. })
        ));
    }

    #[test]
    fn irregular_realization_balances_sockets() {
        for p in ["12A", "12B", "12C"] {
            let d = DegreeDistribution::preset(p).unwrap();
            for n in [100, 1000, 9999] {
                let (vd, cd) = d.node_degrees(n).unwrap();
                assert_eq!(vd.len(), n);
                let ev: u32 = vd.iter().sum();
                let ec: u32 = cd.iter().sum();
                assert_eq!(ev, ec);
                // realized edge fractions close to lambda for large n
                if n == 9999 {
                    for (&k, &frac) in d.lambda() {
                        let got = vd.iter().filter(|&&x| x == k).count() as f64 * k as f64 / ev as f64;
                        assert!((got - frac).abs() < 2e-3, "{p} degree {k}: {got} vs {frac}");
                    }
                }
            }
        }
    }

    #[test]
    fn parity_matrix_odd_rule() {
        // v0-c0 twice, v1-c0 once: entry (0,0) cancels
        let g = BipartiteGraph::from_edges(2, 1, &[(0, 0), (0, 0), (1, 0)]);
        let a = g.parity_matrix();
        assert!(!a.get(0, 0));
        assert!(a.get(0, 1));
        assert_eq!(g.multiplicity(0, 0), 2);
    }

    #[test]
    fn parity_matrix_simple_graph() {
        let g = BipartiteGraph::from_edges(3, 2, &[(0, 0), (1, 0), (1, 1), (2, 1)]);
        let a = g.parity_matrix();
        let expect = [[1, 1, 0], [0, 1, 1]];
        for (c, row) in expect.iter().enumerate() {
            for (v, &bit) in row.iter().enumerate() {
                assert_eq!(a.get(c, v), bit == 1);
            }
        }
    }

    #[test]
    fn row_weight_bounded_by_check_degree() {
        let d = DegreeDistribution::regular(3, 6).unwrap();
        for seed in 0..50 {
            let g = d.sample_graph(12, seed).unwrap();
            let a = g.parity_matrix();
            for c in 0..g.m() {
                let distinct: std::collections::BTreeSet<usize> =
                    g.check_edges(c).iter().map(|&e| g.edge_var(e as usize)).collect();
                let w = a.row_weight(c);
                assert!(w <= g.check_degrees()[c] as usize);
                let simple = distinct.len() == g.check_degrees()[c] as usize;
                assert_eq!(w == g.check_degrees()[c] as usize, simple);
            }
        }
    }

    #[test]
    fn socket_pairing_is_roughly_uniform() {
        // Variable socket 0 should land on each of the 12 check sockets equally often.
        let d = DegreeDistribution::regular(2, 3).unwrap();
        let trials = 12_000;
        let mut counts = [0usize; 12];
        for seed in 0..trials {
            let g = d.sample_graph(6, seed).unwrap();
            counts[g.pairing()[0] as usize] += 1;
        }
        let expected = trials as f64 / 12.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 11 degrees of freedom; 99.9% quantile is about 31.3
        assert!(chi2 < 31.3, "chi2 = {chi2}, counts = {counts:?}");
    }
}
