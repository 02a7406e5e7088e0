//! Quasiprobability importance sampling of stabilizer channel decompositions.
//!
//! Each shot samples one term per channel with probability proportional to
//! |q|, propagates the resulting stabilizer circuit through a tableau, and
//! weights the observable projections by the product of coefficient signs
//! and 1-norms. The per-shot estimator is centered with the exact identity
//! E[w] = 1 (trace preservation):
//!
//!   v = 1/2 + w·(f − 1/2)
//!
//! which has the same expectation as w·f but satisfies the variance bound
//! N·Var ≤ (Πg)²/4 for every plan.
//!
//! Shots are embarrassingly parallel: shot s draws from a counter-derived
//! stream hash(seed, s), and accumulation runs over fixed-size blocks that
//! are reduced in index order, so results are bit-identical for any worker
//! count.

use crate::channels::{StabilizerChannelTerm, StabilizerDecomposition};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::tableau::{CompiledAction, Tableau};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

/// One channel application: a decomposition tagged with its target qubits.
#[derive(Debug, Clone)]
pub struct ChannelApplication {
    pub decomposition: StabilizerDecomposition,
    pub qubits: Vec<usize>,
}

/// A complete sampling problem: initial stabilizer state, channel sequence,
/// and stabilizer-projector observables. Initial states and observables are
/// single stabilizer terms (their own 1-norms are 1).
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub n: usize,
    /// n independent commuting generators of the initial state.
    pub initial: Vec<PauliString>,
    pub channels: Vec<ChannelApplication>,
    /// Each observable is the projector onto the joint +1 eigenspace of a
    /// generator set.
    pub observables: Vec<Vec<PauliString>>,
}

impl SimulationPlan {
    /// Plan starting from |0…0⟩.
    pub fn from_zero_state(n: usize) -> Self {
        SimulationPlan {
            n,
            initial: (0..n)
                .map(|q| PauliString::single(n, q, crate::pauli::Pauli::Z))
                .collect(),
            channels: Vec::new(),
            observables: Vec::new(),
        }
    }
}

/// Weighted Monte Carlo output for one observable.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorResult {
    pub mean: f64,
    #[serde(rename = "variance")]
    pub sample_variance: f64,
    pub std_error: f64,
    pub shots: u64,
    pub one_norm_product: f64,
    pub seed: u64,
}

/// Sampling probabilities p_i = |q_i| / Σ|q_j| for one decomposition.
pub fn term_probabilities(d: &StabilizerDecomposition) -> Result<Vec<f64>> {
    let norm = d.one_norm();
    if d.is_empty() || norm <= 0.0 {
        return Err(Error::EmptyDecomposition);
    }
    Ok(d.terms().iter().map(|(q, _)| q.abs() / norm).collect())
}

/// A sampling-ready channel: cumulative probabilities, per-term signs, the
/// 1-norm, and tableau-ready operations.
#[derive(Debug, Clone)]
pub struct PreparedChannel {
    cum: Vec<f64>,
    negative: Vec<bool>,
    g: f64,
    ops: Vec<PreparedOp>,
}

#[derive(Debug, Clone)]
enum PreparedOp {
    /// Identity action; nothing to apply.
    Skip,
    Clifford {
        compiled: CompiledAction,
        qubits: Vec<usize>,
    },
    Reset {
        target: PauliString,
    },
}

impl PreparedChannel {
    pub fn new(d: &StabilizerDecomposition, qubits: &[usize], n: usize) -> Result<Self> {
        if d.num_qubits() != qubits.len() {
            return Err(Error::DimensionMismatch {
                expected: d.num_qubits(),
                got: qubits.len(),
            });
        }
        for (i, &q) in qubits.iter().enumerate() {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, n });
            }
            if qubits[..i].contains(&q) {
                return Err(Error::InvalidPlan(format!("duplicate qubit {q} in channel tag")));
            }
        }
        let g = d.one_norm();
        if d.is_empty() || g <= 0.0 {
            return Err(Error::EmptyDecomposition);
        }
        let mut cum = Vec::new();
        let mut negative = Vec::new();
        let mut ops = Vec::new();
        let mut acc = 0.0;
        for (q, term) in d.terms() {
            if *q == 0.0 {
                continue;
            }
            acc += q.abs() / g;
            cum.push(acc);
            negative.push(*q < 0.0);
            ops.push(match term {
                StabilizerChannelTerm::Clifford(a) => {
                    let compiled = CompiledAction::compile(a)?;
                    if *a == crate::channels::CliffordAction::identity(a.num_qubits()) {
                        PreparedOp::Skip
                    } else {
                        PreparedOp::Clifford {
                            compiled,
                            qubits: qubits.to_vec(),
                        }
                    }
                }
                StabilizerChannelTerm::PauliReset(t) => PreparedOp::Reset {
                    target: t.embed(n, qubits)?,
                },
            });
        }
        // Guard against drift in the final cumulative bin.
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Ok(PreparedChannel {
            cum,
            negative,
            g,
            ops,
        })
    }

    pub fn one_norm(&self) -> f64 {
        self.g
    }

    /// True when applying this channel can never change the state, the
    /// weight, or the random stream (a single identity term).
    pub fn is_trivial(&self) -> bool {
        self.cum.len() == 1 && !self.negative[0] && matches!(self.ops[0], PreparedOp::Skip)
    }

    /// Sample a term index; single-term channels consume no randomness.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.cum.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        // Few terms per channel; a linear scan wins over binary search.
        self.cum
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cum.len() - 1)
    }

    /// Sample and apply one term; returns true when the coefficient was
    /// negative.
    pub fn apply_sampled<R: Rng + ?Sized>(
        &self,
        t: &mut Tableau,
        rng: &mut R,
    ) -> Result<bool> {
        let idx = self.sample(rng);
        match &self.ops[idx] {
            PreparedOp::Skip => {}
            PreparedOp::Clifford { compiled, qubits } => {
                t.apply_compiled(compiled, qubits)?;
            }
            PreparedOp::Reset { target } => {
                t.pauli_reset(target, rng)?;
            }
        }
        Ok(self.negative[idx])
    }
}

/// Validated, sampling-ready form of a [`SimulationPlan`].
#[derive(Debug, Clone)]
pub struct PreparedPlan {
    n: usize,
    base: Tableau,
    channels: Vec<PreparedChannel>,
    observables: Vec<Vec<PauliString>>,
    /// Prefix products of the channel 1-norms; entry k is Π_{j<k} g_j.
    g_prefix: Vec<f64>,
}

impl PreparedPlan {
    pub fn new(plan: &SimulationPlan) -> Result<Self> {
        let base = Tableau::from_stabilizers(&plan.initial)?;
        if base.num_qubits() != plan.n {
            return Err(Error::InvalidPlan(format!(
                "{} initial generators for {} qubits",
                plan.initial.len(),
                plan.n
            )));
        }
        let channels = plan
            .channels
            .iter()
            .map(|c| PreparedChannel::new(&c.decomposition, &c.qubits, plan.n))
            .collect::<Result<Vec<_>>>()?;
        for obs in &plan.observables {
            // Validate once here; shots use the unchecked projection.
            base.projection_probability(obs)?;
        }
        let mut g_prefix = Vec::with_capacity(channels.len() + 1);
        let mut acc = 1.0;
        g_prefix.push(acc);
        for c in &channels {
            acc *= c.g;
            g_prefix.push(acc);
        }
        Ok(PreparedPlan {
            n: plan.n,
            base,
            channels: channels,
            observables: plan.observables.clone(),
            g_prefix,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Π g_k over all channels.
    pub fn one_norm_product(&self) -> f64 {
        *self.g_prefix.last().unwrap()
    }

    /// Run one trajectory; returns the sign of the sampled weight and the
    /// per-observable projections of the final state.
    fn trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, Vec<f64>)> {
        let mut t = self.base.clone();
        let mut sign = 1.0f64;
        for ch in &self.channels {
            if ch.apply_sampled(&mut t, rng)? {
                sign = -sign;
            }
        }
        let fs = self
            .observables
            .iter()
            .map(|obs| t.projection_probability(obs))
            .collect::<Result<Vec<_>>>()?;
        Ok((sign, fs))
    }

    /// Trajectory with observable evaluations at each checkpoint (a sorted
    /// list of channel counts). Values are the raw weighted projections
    /// w_k · f with w_k the weight accumulated through the first k channels.
    fn trajectory_checkpoints<R: Rng + ?Sized>(
        &self,
        checkpoints: &[usize],
        rng: &mut R,
        mut record: impl FnMut(usize, f64, &[f64]),
    ) -> Result<()> {
        let mut t = self.base.clone();
        let mut sign = 1.0f64;
        let mut next = 0usize;
        while next < checkpoints.len() && checkpoints[next] == 0 {
            let fs = self.project_all(&t)?;
            record(next, sign * self.g_prefix[0], &fs);
            next += 1;
        }
        for (k, ch) in self.channels.iter().enumerate() {
            if ch.apply_sampled(&mut t, rng)? {
                sign = -sign;
            }
            while next < checkpoints.len() && checkpoints[next] == k + 1 {
                let fs = self.project_all(&t)?;
                record(next, sign * self.g_prefix[k + 1], &fs);
                next += 1;
            }
        }
        Ok(())
    }

    fn project_all(&self, t: &Tableau) -> Result<Vec<f64>> {
        self.observables
            .iter()
            .map(|obs| t.projection_probability(obs))
            .collect()
    }
}

/// Derive the independent random stream for one shot.
fn shot_rng(seed: u64, shot: u64) -> ChaCha12Rng {
    let mut state = seed ^ 0x6A09_E667_F3BC_C908;
    let mut key = [0u8; 32];
    let mut next = move |extra: u64| -> u64 {
        state = state
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(extra.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    for (chunk, i) in key.chunks_mut(8).zip(0u64..) {
        chunk.copy_from_slice(&next(shot.wrapping_add(i << 32)).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// One shot of the raw weighted estimator: w·f per observable, with
/// w = Π sign(q_{i_k}) · g_k.
pub fn run_shot<R: Rng + ?Sized>(plan: &PreparedPlan, rng: &mut R) -> Result<Vec<f64>> {
    let (sign, fs) = plan.trajectory(rng)?;
    let w = sign * plan.one_norm_product();
    Ok(fs.into_iter().map(|f| w * f).collect())
}

const SHOT_BLOCK: u64 = 4096;

struct BlockSums {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

/// Weighted Monte Carlo estimate of every observable in the plan.
///
/// Deterministic for a fixed seed regardless of the number of worker
/// threads. Requires at least 2 shots.
pub fn estimate(plan: &SimulationPlan, shots: u64, seed: u64) -> Result<Vec<EstimatorResult>> {
    let prepared = PreparedPlan::new(plan)?;
    estimate_prepared(&prepared, shots, seed)
}

pub fn estimate_prepared(
    plan: &PreparedPlan,
    shots: u64,
    seed: u64,
) -> Result<Vec<EstimatorResult>> {
    let per_checkpoint =
        estimate_checkpoints_prepared(plan, &[plan.num_channels()], shots, seed)?;
    Ok(per_checkpoint.into_iter().next().unwrap())
}

/// Estimates at several points along the channel sequence; checkpoint k
/// evaluates the observables after the first k channels with the weight
/// accumulated so far. Returns one result list per checkpoint.
pub fn estimate_checkpoints(
    plan: &SimulationPlan,
    checkpoints: &[usize],
    shots: u64,
    seed: u64,
) -> Result<Vec<Vec<EstimatorResult>>> {
    let prepared = PreparedPlan::new(plan)?;
    estimate_checkpoints_prepared(&prepared, checkpoints, shots, seed)
}

pub fn estimate_checkpoints_prepared(
    plan: &PreparedPlan,
    checkpoints: &[usize],
    shots: u64,
    seed: u64,
) -> Result<Vec<Vec<EstimatorResult>>> {
    if shots < 2 {
        return Err(Error::InvalidPlan("at least 2 shots required".into()));
    }
    if plan.observables.is_empty() {
        return Err(Error::InvalidPlan("plan has no observables".into()));
    }
    for (i, &c) in checkpoints.iter().enumerate() {
        if c > plan.num_channels() || (i > 0 && checkpoints[i - 1] > c) {
            return Err(Error::InvalidPlan("checkpoints must be sorted and ≤ K".into()));
        }
    }
    let n_obs = plan.observables.len();
    let n_cells = checkpoints.len() * n_obs;
    let n_blocks = shots.div_ceil(SHOT_BLOCK);

    let blocks: Vec<Result<BlockSums>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * SHOT_BLOCK;
            let hi = (lo + SHOT_BLOCK).min(shots);
            let mut sums = BlockSums {
                sum: vec![0.0; n_cells],
                sumsq: vec![0.0; n_cells],
            };
            for s in lo..hi {
                let mut rng = shot_rng(seed, s);
                plan.trajectory_checkpoints(checkpoints, &mut rng, |ci, w, fs| {
                    for (oi, &f) in fs.iter().enumerate() {
                        let v = 0.5 + w * (f - 0.5);
                        let cell = ci * n_obs + oi;
                        sums.sum[cell] += v;
                        sums.sumsq[cell] += v * v;
                    }
                })?;
            }
            Ok(sums)
        })
        .collect();

    // Fold blocks in index order for a scheduling-independent reduction.
    let mut sum = vec![0.0; n_cells];
    let mut sumsq = vec![0.0; n_cells];
    for block in blocks {
        let block = block?;
        for i in 0..n_cells {
            sum[i] += block.sum[i];
            sumsq[i] += block.sumsq[i];
        }
    }

    let n = shots as f64;
    let mut out = Vec::with_capacity(checkpoints.len());
    for (ci, &k) in checkpoints.iter().enumerate() {
        let g = plan.g_prefix[k];
        let mut per_obs = Vec::with_capacity(n_obs);
        for oi in 0..n_obs {
            let cell = ci * n_obs + oi;
            let mean = sum[cell] / n;
            let var = ((sumsq[cell] - sum[cell] * sum[cell] / n) / (n - 1.0)).max(0.0);
            per_obs.push(EstimatorResult {
                mean,
                sample_variance: var,
                std_error: (var / n).sqrt(),
                shots,
                one_norm_product: g,
                seed,
            });
        }
        out.push(per_obs);
    }
    Ok(out)
}

/// Low-level access to per-shot trajectories with externally derived
/// streams; used by workloads that orchestrate their own circuits.
pub fn stream_for_shot(seed: u64, shot: u64) -> ChaCha12Rng {
    shot_rng(seed, shot)
}

fn check_norms(g_in: f64, g_obs: f64, g_ch: f64) -> Result<()> {
    for (name, g) in [("g_in", g_in), ("g_obs", g_obs), ("g_ch", g_ch)] {
        if !(g >= 1.0) || !g.is_finite() {
            return Err(Error::ParameterOutOfRange {
                name: match name {
                    "g_in" => "g_in",
                    "g_obs" => "g_obs",
                    _ => "g_ch",
                },
                value: g,
                min: 1.0,
                max: f64::INFINITY,
            });
        }
    }
    Ok(())
}

/// Shots needed for statistical uncertainty ε by the variance bound:
/// ⌈g_in² g_obs² g_ch^{2K} / (4ε²)⌉.
pub fn shots_for_variance(g_in: f64, g_obs: f64, g_ch: f64, k: u32, eps: f64) -> Result<u64> {
    check_norms(g_in, g_obs, g_ch)?;
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::ParameterOutOfRange {
            name: "eps",
            value: eps,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
        });
    }
    let bound = g_in * g_in * g_obs * g_obs * g_ch.powi(2 * k as i32) / (4.0 * eps * eps);
    Ok(robust_ceil(bound))
}

/// Ceiling that forgives sub-relative-epsilon float drift (so e.g. a bound
/// of exactly 50 computed as 50.000000000000007 stays 50).
fn robust_ceil(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Shots for error ≤ ε with probability ≥ 1−δ by Hoeffding's inequality:
/// ⌈(g_in² g_obs² g_ch^{2K} / (2ε²)) ln(2/δ)⌉.
pub fn shots_for_hoeffding(
    g_in: f64,
    g_obs: f64,
    g_ch: f64,
    k: u32,
    eps: f64,
    delta: f64,
) -> Result<u64> {
    check_norms(g_in, g_obs, g_ch)?;
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::ParameterOutOfRange {
            name: "eps",
            value: eps,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
        });
    }
    if delta <= 0.0 || delta >= 1.0 {
        return Err(Error::ParameterOutOfRange {
            name: "delta",
            value: delta,
            min: 0.0,
            max: 1.0,
        });
    }
    let bound =
        g_in * g_in * g_obs * g_obs * g_ch.powi(2 * k as i32) / (2.0 * eps * eps) * (2.0 / delta).ln();
    Ok(robust_ceil(bound))
}
