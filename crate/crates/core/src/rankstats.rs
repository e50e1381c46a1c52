//! Ensemble audits: supporting trees, perfect-projection checks and rank
//! deficiency statistics of sampled parity-check matrices.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bpsim::mix_seed;
use crate::ensemble::{BipartiteGraph, EnsembleError};
use crate::gf2::{BitVec, GF2Matrix, Gf2Error};

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("variable {var} and check {check} are not adjacent")]
    NotAnEdge { var: usize, check: usize },
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Neighbourhood of variable `i` seen from check `j`: nodes `v` with
/// `d(v, i) = d(v, j) - 1 <= 2(l - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportTree {
    pub root: (usize, usize),
    pub depth: usize,
    /// Variable nodes, sorted.
    pub vars: Vec<usize>,
    /// Check nodes, sorted.
    pub checks: Vec<usize>,
    /// One row per tree check over the tree variables (odd-multiplicity rule).
    pub constraints: GF2Matrix,
    /// Whether the induced subgraph is a tree.
    pub cycle_free: bool,
}

impl SupportTree {
    /// Rank of the local constraints; `|X^l| = 2^(vars - rank)`.
    pub fn constraint_rank(&self) -> usize {
        if self.checks.is_empty() {
            0
        } else {
            self.constraints.rank()
        }
    }

    /// Whether `x` (indexed like `vars`) satisfies every tree check.
    pub fn satisfies(&self, x: &BitVec) -> bool {
        self.checks.is_empty() || self.constraints.mul_vec(x).map(|s| s.is_zero()).unwrap_or(false)
    }
}

/// Breadth-first distances over the Tanner graph; variables are nodes
/// `0..n`, checks `n..n+m`.
fn distances(g: &BipartiteGraph, start: usize) -> Vec<usize> {
    let n = g.n();
    let mut dist = vec![usize::MAX; n + g.m()];
    let mut queue = VecDeque::from([start]);
    dist[start] = 0;
    while let Some(u) = queue.pop_front() {
        let next: Vec<usize> = if u < n {
            g.var_edges(u).map(|e| n + g.edge_check(e)).collect()
        } else {
            g.check_edges(u - n).iter().map(|&e| g.edge_var(e as usize)).collect()
        };
        for w in next {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Supporting tree of the message from variable `i` to check `j` at iteration `l >= 1`.
pub fn build_support_tree(
    g: &BipartiteGraph,
    i: usize,
    j: usize,
    l: usize,
) -> Result<SupportTree, RankError> {
    if i >= g.n() || j >= g.m() || g.multiplicity(i, j) == 0 {
        return Err(RankError::NotAnEdge { var: i, check: j });
    }
    if l == 0 {
        return Err(RankError::Invalid("depth must be at least 1".into()));
    }
    let n = g.n();
    let di = distances(g, i);
    let dj = distances(g, n + j);
    let limit = 2 * (l - 1);
    let member = |u: usize| di[u] <= limit && dj[u] != usize::MAX && di[u] + 1 == dj[u];
    let vars: Vec<usize> = (0..n).filter(|&v| member(v)).collect();
    let checks: Vec<usize> = (0..g.m()).filter(|&c| member(n + c)).collect();

    let col: BTreeMap<usize, usize> = vars.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut constraints = GF2Matrix::zeros(checks.len().max(1), vars.len());
    let mut induced_edges = 0;
    for (r, &c) in checks.iter().enumerate() {
        for &e in g.check_edges(c) {
            if let Some(&k) = col.get(&g.edge_var(e as usize)) {
                constraints.flip(r, k);
                induced_edges += 1;
            }
        }
    }
    // A cycle closing through `j` or beyond the depth limit leaves an interior
    // node with a neighbour outside the set; that is not a tree neighbourhood either.
    let complete = checks
        .iter()
        .all(|&c| g.check_edges(c).iter().all(|&e| col.contains_key(&g.edge_var(e as usize))))
        && vars.iter().filter(|&&v| di[v] < limit).all(|&v| {
            g.var_edges(v)
                .filter(|&e| !(v == i && g.edge_check(e) == j))
                .all(|e| member(n + g.edge_check(e)))
        });
    let cycle_free = complete && g.multiplicity(i, j) == 1 && induced_edges + 1 == vars.len() + checks.len();
    Ok(SupportTree {
        root: (i, j),
        depth: l,
        vars,
        checks,
        constraints,
        cycle_free,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionAudit {
    pub is_perfect: bool,
    /// Codewords per projected string, keyed by the string (tree-variable order).
    pub histogram: BTreeMap<String, u64>,
    /// `|X^l|`, the number of tree-satisfying strings.
    pub tree_strings: u64,
    pub codewords: u64,
    /// Every projection satisfied the tree checks.
    pub within_tree: bool,
    /// All occurring projections have the same count.
    pub uniform_on_support: bool,
}

/// Exhaustive audit: enumerates the null space of `a` (at most `cap`
/// codewords) and compares the projections onto the tree variables with the
/// uniform law on tree-satisfying strings.
pub fn perfect_projection_audit(
    a: &GF2Matrix,
    tree: &SupportTree,
    cap: u64,
) -> Result<ProjectionAudit, RankError> {
    let words = a.enumerate_codewords(cap)?;
    let mut histogram: BTreeMap<String, u64> = BTreeMap::new();
    let mut within_tree = true;
    for x in &words {
        let bits: Vec<u8> = tree.vars.iter().map(|&v| x.get(v) as u8).collect();
        within_tree &= tree.satisfies(&BitVec::from_bits(&bits));
        let key: String = bits.iter().map(|&b| char::from(b'0' + b)).collect();
        *histogram.entry(key).or_default() += 1;
    }
    let free = tree.vars.len() - tree.constraint_rank();
    let tree_strings = 1u64 << free;
    let first = histogram.values().next().copied().unwrap_or(0);
    let uniform_on_support = histogram.values().all(|&c| c == first);
    let is_perfect = within_tree && uniform_on_support && histogram.len() as u64 == tree_strings;
    Ok(ProjectionAudit {
        is_perfect,
        histogram,
        tree_strings,
        codewords: words.len() as u64,
        within_tree,
        uniform_on_support,
    })
}

/// Perfect-projection test without enumeration. Projection is linear, so
/// the image is uniform on a subspace; it is perfect iff that subspace has
/// the dimension of the tree-satisfying strings and lies inside them.
pub fn is_perfect_projection(a: &GF2Matrix, tree: &SupportTree) -> bool {
    let basis = a.null_space_basis();
    let free = tree.vars.len() - tree.constraint_rank();
    if basis.is_empty() {
        return free == 0;
    }
    let mut image = Vec::with_capacity(basis.dim());
    for row in basis.rows() {
        let bits: Vec<u8> = tree.vars.iter().map(|&v| row.get(v) as u8).collect();
        if !tree.satisfies(&BitVec::from_bits(&bits)) {
            return false;
        }
        image.push(bits);
    }
    GF2Matrix::from_rows(&image).rank() == free
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionFrequency {
    pub n: usize,
    pub trials: usize,
    pub cycle_free: usize,
    /// Trials whose tree was cycle-free and perfectly projected.
    pub perfect: usize,
}

impl ProjectionFrequency {
    pub fn frequency(&self) -> f64 {
        self.perfect as f64 / self.trials as f64
    }
}

/// Fraction of random `(dv, dc)` graphs whose depth-`l` tree at a random edge
/// is cycle-free and perfectly projected.
pub fn projection_frequency(
    dv: u32,
    dc: u32,
    n: usize,
    l: usize,
    trials: usize,
    seed: u64,
) -> Result<ProjectionFrequency, RankError> {
    let m = check_count(dv, dc, n, 0)?;
    let outcomes: Vec<(bool, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = mix_seed(mix_seed(seed, n as u64), t);
            let g = BipartiteGraph::random(vec![dv; n], vec![dc; m], s)?;
            let e = (s % g.num_edges() as u64) as usize;
            let tree = build_support_tree(&g, g.edge_var(e), g.edge_check(e), l)?;
            let perfect = tree.cycle_free && is_perfect_projection(&g.parity_matrix(), &tree);
            Ok((tree.cycle_free, perfect))
        })
        .collect::<Result<_, RankError>>()?;
    Ok(ProjectionFrequency {
        n,
        trials,
        cycle_free: outcomes.iter().filter(|o| o.0).count(),
        perfect: outcomes.iter().filter(|o| o.1).count(),
    })
}

fn check_count(dv: u32, dc: u32, n: usize, m_prime: usize) -> Result<usize, RankError> {
    if dv < 1 || dc < 2 {
        return Err(RankError::Invalid(format!("degrees ({dv},{dc})")));
    }
    let sockets = n * dv as usize;
    let short = m_prime * (dc as usize - 1);
    if short > sockets || (sockets - short) % dc as usize != 0 {
        return Err(RankError::Invalid(format!(
            "n = {n}, m' = {m_prime}: {sockets} sockets do not split into degree {} and {dc} checks",
            dc - 1
        )));
    }
    Ok((sockets - short) / dc as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankEstimate {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    /// Monte Carlo mean of `2^(m - rank)`.
    pub mean: f64,
    pub stderr: f64,
    pub mean_over_n: f64,
    pub max_deficiency: usize,
}

/// `E{2^{m_r}}` over the semi-regular ensemble with `m_prime` checks of degree
/// `dc - 1` and the rest of degree `dc`.
pub fn estimate_e2mr(
    dv: u32,
    dc: u32,
    n_list: &[usize],
    m_prime: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<RankEstimate>, RankError> {
    if trials < 2 {
        return Err(RankError::Invalid("need at least 2 trials".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let m2 = check_count(dv, dc, n, m_prime)?;
            let mut check_deg = vec![dc - 1; m_prime];
            check_deg.extend(std::iter::repeat_n(dc, m2));
            let m = check_deg.len();
            let deficiency: Vec<usize> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let s = mix_seed(mix_seed(seed, n as u64), t);
                    let g = BipartiteGraph::random(vec![dv; n], check_deg.clone(), s)?;
                    Ok(m - g.parity_matrix().rank())
                })
                .collect::<Result<_, RankError>>()?;
            Ok(summarize(n, m, &deficiency))
        })
        .collect()
}

fn summarize(n: usize, m: usize, deficiency: &[usize]) -> RankEstimate {
    let vals: Vec<f64> = deficiency.iter().map(|&d| 2f64.powi(d as i32)).collect();
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    RankEstimate {
        n,
        m,
        trials: vals.len(),
        mean,
        stderr: (var / k).sqrt(),
        mean_over_n: mean / n as f64,
        max_deficiency: deficiency.iter().copied().max().unwrap_or(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_graph() -> BipartiteGraph {
        let e = [
            (0, 0),
            (0, 3),
            (1, 0),
            (1, 2),
            (2, 0),
            (2, 2),
            (3, 1),
            (3, 1),
            (4, 2),
            (4, 3),
            (5, 1),
            (5, 3),
        ];
        BipartiteGraph::from_edges(6, 4, &e)
    }

    #[test]
    fn example_depth_two_tree() {
        let t = build_support_tree(&example_graph(), 0, 0, 2).unwrap();
        assert_eq!(t.vars, vec![0, 4, 5]);
        assert_eq!(t.checks, vec![3]);
        assert!(t.cycle_free);
        assert_eq!(t.constraints, GF2Matrix::from_rows(&[[1u8, 1, 1]]));
    }

    #[test]
    fn depth_one_is_the_root_variable() {
        let t = build_support_tree(&example_graph(), 2, 2, 1).unwrap();
        assert_eq!(t.vars, vec![2]);
        assert!(t.checks.is_empty());
        assert!(t.cycle_free);
        assert_eq!(t.constraint_rank(), 0);
    }

    #[test]
    fn not_an_edge() {
        assert_eq!(
            build_support_tree(&example_graph(), 0, 1, 2),
            Err(RankError::NotAnEdge { var: 0, check: 1 })
        );
    }

    #[test]
    fn four_cycle_is_detected() {
        // v0-c0, v0-c1, v1-c1, v1-c2, v2-c1, v2-c2: c1, v1, c2, v2 form a 4-cycle
        let g = BipartiteGraph::from_edges(3, 3, &[(0, 0), (0, 1), (1, 1), (1, 2), (2, 1), (2, 2)]);
        let t = build_support_tree(&g, 0, 0, 3).unwrap();
        assert!(!t.cycle_free);
        // a double edge inside the tree is a cycle as well
        let t = build_support_tree(&example_graph(), 5, 3, 2).unwrap();
        assert!(t.vars.contains(&3));
        assert!(!t.cycle_free);
    }

    #[test]
    fn example_audits() {
        let g = example_graph();
        let a = g.parity_matrix();
        let t2 = build_support_tree(&g, 0, 0, 2).unwrap();
        let audit = perfect_projection_audit(&a, &t2, 1 << 20).unwrap();
        assert!(!audit.is_perfect);
        assert_eq!(audit.tree_strings, 4);
        assert_eq!(audit.histogram.len(), 2);
        assert!(audit.within_tree && audit.uniform_on_support);
        assert!(!is_perfect_projection(&a, &t2));

        let t1 = build_support_tree(&g, 0, 0, 1).unwrap();
        let audit = perfect_projection_audit(&a, &t1, 1 << 20).unwrap();
        assert!(audit.is_perfect);
        assert_eq!(audit.histogram.values().copied().collect::<Vec<_>>(), vec![4, 4]);
        assert!(is_perfect_projection(&a, &t1));
    }

    #[test]
    fn repetition_code_is_perfect() {
        let g = BipartiteGraph::from_edges(2, 1, &[(0, 0), (1, 0)]);
        for v in 0..2 {
            let t = build_support_tree(&g, v, 0, 1).unwrap();
            let audit = perfect_projection_audit(&g.parity_matrix(), &t, 16).unwrap();
            assert!(audit.is_perfect);
            assert_eq!(audit.codewords, 2);
        }
    }

    #[test]
    fn audit_respects_cap() {
        let g = crate::ensemble::DegreeDistribution::regular(3, 6)
            .unwrap()
            .sample_graph(48, 1)
            .unwrap();
        let t = build_support_tree(&g, 0, g.edge_check(0), 2).unwrap();
        assert!(matches!(
            perfect_projection_audit(&g.parity_matrix(), &t, 1024),
            Err(RankError::Gf2(Gf2Error::CapacityExceeded { .. }))
        ));
    }

    #[test]
    fn rank_test_agrees_with_enumeration() {
        for seed in 0..40 {
            let g = BipartiteGraph::random(vec![3; 12], vec![6; 6], seed).unwrap();
            let a = g.parity_matrix();
            for l in 1..=3 {
                let t = build_support_tree(&g, 0, g.edge_check(0), l).unwrap();
                let audit = perfect_projection_audit(&a, &t, 1 << 20).unwrap();
                assert!(audit.uniform_on_support);
                if t.cycle_free {
                    assert!(audit.within_tree);
                    assert_eq!(audit.is_perfect, is_perfect_projection(&a, &t), "seed {seed} l {l}");
                }
            }
        }
    }

    #[test]
    fn full_rank_gives_one() {
        // one check per variable of degree 1: A is the identity
        let est = estimate_e2mr(1, 2, &[10], 10, 50, 0).unwrap();
        assert_eq!(est[0].m, 10);
        assert_eq!(est[0].mean, 1.0);
        assert_eq!(est[0].stderr, 0.0);
    }

    #[test]
    fn even_variable_degree_forces_deficiency() {
        let est = estimate_e2mr(4, 8, &[32], 0, 100, 5).unwrap();
        assert!(est[0].mean >= 2.0);
        let g = BipartiteGraph::random(vec![4; 32], vec![8; 16], 9).unwrap();
        let a = g.parity_matrix();
        let mut sum = BitVec::zeros(a.cols());
        for r in 0..a.rows() {
            sum.xor_assign(&a.row(r));
        }
        assert!(sum.is_zero());
    }

    #[test]
    fn semi_regular_counts() {
        assert_eq!(check_count(3, 6, 24, 0).unwrap(), 12);
        assert_eq!(check_count(3, 6, 24, 6).unwrap(), 7);
        assert!(check_count(3, 6, 24, 1).is_err());
    }
}
