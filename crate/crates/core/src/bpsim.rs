//! Finite-length Monte Carlo: random codewords through a channel, decoded by
//! flooding sum-product belief propagation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channels::ChannelModel;
use crate::ensemble::{BipartiteGraph, DegreeDistribution, EnsembleError};
use crate::gf2::{BitVec, GF2Basis};

/// Magnitude clamp on variable-to-check messages.
pub const LLR_CLAMP: f64 = 30.0;
/// Clamp on the magnitude of the tanh product at a check node.
pub const TANH_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("parity-check matrix has full column rank; no nonzero codewords")]
    EncoderFailure,
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Flooding sum-product decoder bound to one graph.
pub struct BpDecoder<'g> {
    g: &'g BipartiteGraph,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    tanh: Vec<f64>,
    prefix: Vec<f64>,
}

impl<'g> BpDecoder<'g> {
    pub fn new(g: &'g BipartiteGraph) -> Self {
        let e = g.num_edges();
        let max_dc = g.check_degrees().iter().copied().max().unwrap_or(0) as usize;
        BpDecoder {
            g,
            v2c: vec![0.0; e],
            c2v: vec![0.0; e],
            tanh: vec![0.0; e],
            prefix: vec![0.0; max_dc + 1],
        }
    }

    /// Runs `iters` rounds from channel LLRs `m0` (±∞ allowed). After each
    /// round `observe(l, posterior)` sees the decision LLRs
    /// `m0 + sum of incoming`. Once the messages reach an exact fixed point the
    /// remaining rounds are not recomputed, since they would repeat it.
    pub fn decode(&mut self, m0: &[f64], iters: usize, mut observe: impl FnMut(usize, &[f64])) {
        let g = self.g;
        assert_eq!(m0.len(), g.n(), "LLR vector length");
        self.c2v.iter_mut().for_each(|x| *x = 0.0);
        let mut posterior = vec![0.0; g.n()];
        let sat_tanh = (0.5 * LLR_CLAMP).tanh();
        let sat_out = 2.0 * TANH_CLAMP.atanh();
        let mut l = 1;
        while l <= iters {
            // variable side
            for (v, &m) in m0.iter().enumerate() {
                let edges = g.var_edges(v);
                let sum: f64 = self.c2v[edges.clone()].iter().sum();
                for e in edges {
                    let out = m + (sum - self.c2v[e]);
                    self.v2c[e] = if out.is_nan() { 0.0 } else { out.clamp(-LLR_CLAMP, LLR_CLAMP) };
                }
            }
            // check side
            let mut changed = false;
            for (t, &m) in self.tanh.iter_mut().zip(&self.v2c) {
                *t = if m.abs() == LLR_CLAMP { sat_tanh.copysign(m) } else { (0.5 * m).tanh() };
            }
            for c in 0..g.m() {
                let edges = g.check_edges(c);
                let d = edges.len();
                self.prefix[0] = 1.0;
                for (k, &e) in edges.iter().enumerate() {
                    self.prefix[k + 1] = self.prefix[k] * self.tanh[e as usize];
                }
                let mut suffix = 1.0;
                for k in (0..d).rev() {
                    let e = edges[k] as usize;
                    let t = self.prefix[k] * suffix;
                    let out = if t.abs() >= TANH_CLAMP {
                        sat_out.copysign(t)
                    } else {
                        2.0 * t.atanh()
                    };
                    if out != self.c2v[e] {
                        changed = true;
                        self.c2v[e] = out;
                    }
                    suffix *= self.tanh[e];
                }
            }
            for (v, &m) in m0.iter().enumerate() {
                posterior[v] = m + self.c2v[g.var_edges(v)].iter().sum::<f64>();
            }
            observe(l, &posterior);
            if !changed && l > 1 {
                for rest in l + 1..=iters {
                    observe(rest, &posterior);
                }
                break;
            }
            l += 1;
        }
    }
}

/// Hard decision: `Some(0)` for positive LLR, `Some(1)` for negative, `None` on a tie.
pub fn hard_decision(llr: f64) -> Option<u8> {
    if llr > 0.0 {
        Some(0)
    } else if llr < 0.0 {
        Some(1)
    } else {
        None
    }
}

/// Per-iteration hard decisions for one received word.
pub fn bp_decode(
    g: &BipartiteGraph,
    ch: &ChannelModel,
    y: &[f64],
    iters: usize,
) -> Result<Vec<Vec<Option<u8>>>, crate::channels::ChannelError> {
    let m0 = y.iter().map(|&v| ch.llr(v)).collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(iters);
    BpDecoder::new(g).decode(&m0, iters, |_, post| {
        out.push(post.iter().map(|&p| hard_decision(p)).collect())
    });
    Ok(out)
}

/// GF(2) combination of the basis rows selected by `message`.
pub fn encode(basis: &GF2Basis, message: &BitVec) -> Result<BitVec, crate::gf2::Gf2Error> {
    basis.encode(message)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    #[serde(skip)]
    pub code: DegreeDistribution,
    pub n: usize,
    #[serde(serialize_with = "ser_display")]
    pub channel: ChannelModel,
    pub bp_iters: usize,
    pub num_codewords: usize,
    pub master_seed: u64,
}

fn ser_display<S: serde::Serializer>(ch: &ChannelModel, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(ch)
}

impl SimConfig {
    pub fn new(code: DegreeDistribution, n: usize, channel: ChannelModel) -> Self {
        SimConfig {
            code,
            n,
            channel,
            bp_iters: 40,
            num_codewords: 1000,
            master_seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SimResult {
    pub ber: f64,
    pub bler: f64,
    /// Bits decided wrongly (ties excluded).
    pub bit_errors: u64,
    /// Bits left at LLR exactly zero; each counts as half an error in `ber`.
    pub tied_bits: u64,
    pub block_errors: u64,
    pub bits_total: u64,
    pub blocks: u64,
    /// Bit error rate given the transmitted bit, `[given 0, given 1]`.
    pub ber_given_bit: [f64; 2],
    /// Bit error rate after each BP iteration.
    pub ber_per_iter: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
struct Tally {
    errors: u64,
    ties: u64,
    block_errors: u64,
    bits: u64,
    blocks: u64,
    // half-error units (2 per error, 1 per tie) by transmitted bit
    half_by_bit: [u64; 2],
    bits_by_bit: [u64; 2],
    half_per_iter: Vec<u64>,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.errors += o.errors;
        self.ties += o.ties;
        self.block_errors += o.block_errors;
        self.bits += o.bits;
        self.blocks += o.blocks;
        for b in 0..2 {
            self.half_by_bit[b] += o.half_by_bit[b];
            self.bits_by_bit[b] += o.bits_by_bit[b];
        }
        if self.half_per_iter.len() < o.half_per_iter.len() {
            self.half_per_iter.resize(o.half_per_iter.len(), 0);
        }
        for (a, b) in self.half_per_iter.iter_mut().zip(&o.half_per_iter) {
            *a += b;
        }
        self
    }
}

/// SplitMix64 finalizer; derives independent per-codeword seeds.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A sampled code with its generator, ready for repeated trials.
pub struct SimCode {
    pub graph: BipartiteGraph,
    pub basis: GF2Basis,
}

impl SimCode {
    /// Samples one graph for `cfg` (seeded from the master seed) and builds its generator.
    pub fn sample(cfg: &SimConfig) -> Result<Self, SimError> {
        let graph = cfg.code.sample_graph(cfg.n, mix_seed(cfg.master_seed, u64::MAX))?;
        Self::from_graph(graph)
    }

    pub fn from_graph(graph: BipartiteGraph) -> Result<Self, SimError> {
        let basis = graph.parity_matrix().null_space_basis();
        if basis.is_empty() {
            return Err(SimError::EncoderFailure);
        }
        Ok(SimCode { graph, basis })
    }
}

/// Monte Carlo BER/BLER for one configuration: one graph, many codewords.
/// Results do not depend on the number of worker threads.
pub fn run_sim(cfg: &SimConfig) -> Result<SimResult, SimError> {
    if cfg.bp_iters == 0 {
        return Err(SimError::Config("bp_iters must be at least 1".into()));
    }
    cfg.channel
        .validate()
        .map_err(|e| SimError::Config(e.to_string()))?;
    let code = SimCode::sample(cfg)?;
    Ok(run_trials(&code, &cfg.channel, cfg.bp_iters, cfg.num_codewords, cfg.master_seed))
}

/// Runs `codewords` independent trials on a prepared code.
pub fn run_trials(
    code: &SimCode,
    ch: &ChannelModel,
    bp_iters: usize,
    codewords: usize,
    master_seed: u64,
) -> SimResult {
    let n = code.graph.n();
    let tally = (0..codewords as u64)
        .into_par_iter()
        .map_init(
            || BpDecoder::new(&code.graph),
            |dec, idx| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(master_seed, idx));
                let mut msg = BitVec::zeros(code.basis.dim());
                for k in 0..code.basis.dim() {
                    msg.set(k, rng.random::<bool>());
                }
                let x = code.basis.encode(&msg).unwrap();
                let m0: Vec<f64> = (0..n)
                    .map(|i| {
                        let y = ch.sample_output(x.get(i) as u8, &mut rng);
                        ch.llr(y).unwrap()
                    })
                    .collect();
                let mut t = Tally {
                    half_per_iter: vec![0; bp_iters],
                    ..Default::default()
                };
                dec.decode(&m0, bp_iters, |l, post| {
                    let mut half = 0;
                    for (i, &p) in post.iter().enumerate() {
                        half += match hard_decision(p) {
                            None => 1,
                            Some(b) if b != x.get(i) as u8 => 2,
                            _ => 0,
                        };
                    }
                    t.half_per_iter[l - 1] = half;
                    if l == bp_iters {
                        let mut block_err = false;
                        for (i, &p) in post.iter().enumerate() {
                            let bit = x.get(i) as usize;
                            t.bits_by_bit[bit] += 1;
                            match hard_decision(p) {
                                None => {
                                    t.ties += 1;
                                    t.half_by_bit[bit] += 1;
                                    block_err = true;
                                }
                                Some(b) if b as usize != bit => {
                                    t.errors += 1;
                                    t.half_by_bit[bit] += 2;
                                    block_err = true;
                                }
                                _ => {}
                            }
                        }
                        t.block_errors += block_err as u64;
                    }
                });
                t.bits = n as u64;
                t.blocks = 1;
                t
            },
        )
        .reduce(Tally::default, Tally::merge);

    let bits = tally.bits.max(1) as f64;
    let rate = |half: u64, total: u64| {
        if total == 0 {
            0.0
        } else {
            half as f64 / (2.0 * total as f64)
        }
    };
    SimResult {
        ber: (tally.errors as f64 + 0.5 * tally.ties as f64) / bits,
        bler: tally.block_errors as f64 / tally.blocks.max(1) as f64,
        bit_errors: tally.errors,
        tied_bits: tally.ties,
        block_errors: tally.block_errors,
        bits_total: tally.bits,
        blocks: tally.blocks,
        ber_given_bit: [
            rate(tally.half_by_bit[0], tally.bits_by_bit[0]),
            rate(tally.half_by_bit[1], tally.bits_by_bit[1]),
        ],
        ber_per_iter: tally
            .half_per_iter
            .iter()
            .map(|&h| h as f64 / (2.0 * bits))
            .collect(),
    }
}
