//! Steane [[7,1,3]] demonstration workload: encoding, noisy logical
//! identity, repeated syndrome extraction with majority vote, lookup-table
//! decoding, and pseudo-threshold sweeps.
//!
//! Layout: data qubits 0–6, ancilla qubits 7–10 (reused across all six
//! syndrome circuits through measure-and-reset). The six measured
//! generators are Z then X on the supports {0,3,5,6}, {1,3,4,6}, {2,3,4,5};
//! every weight-1 Pauli error has a distinct nonzero syndrome per type, so
//! a 3-bit lookup table decodes each error type exactly.
//!
//! Noise enters only at the boundaries carrying error gates in the
//! extraction schedule: after ancilla preparation (ancillas only) and after
//! the data–ancilla coupling block (the four data qubits of the measured
//! generator plus the ancillas), with the mirrored placement for the
//! X-type circuits, twelve noise slots per circuit. The encoding circuit
//! and the final error-correction round are noiseless.

use crate::circuit::{
    execute_dynamic, Circuit, Gate, Instruction, NoiseModel, NoiseRegistry, PreparedCircuit,
};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::sampler::{stream_for_shot, EstimatorResult};
use crate::tableau::Tableau;
use rayon::prelude::*;
use serde::Serialize;

pub const DATA_QUBITS: usize = 7;
pub const ANCILLA_QUBITS: usize = 4;
pub const TOTAL_QUBITS: usize = DATA_QUBITS + ANCILLA_QUBITS;

/// Support of the i-th generator of each type.
pub const GENERATOR_SUPPORTS: [[usize; 4]; 3] = [[0, 3, 5, 6], [1, 3, 4, 6], [2, 3, 4, 5]];

const ANCILLA: [usize; 4] = [7, 8, 9, 10];

/// The six Pauli eigenstates used as logical inputs.
pub const INPUT_STATES: [&str; 6] = ["Z+", "Z-", "X+", "X-", "Y+", "Y-"];

/// Code structure: stabilizer generators, logical operators, and the
/// syndrome lookup table (built by brute force over weight-1 errors).
#[derive(Debug, Clone)]
pub struct SteaneLayout {
    /// Six generators on the 7 data qubits: Z-type on the three supports,
    /// then X-type.
    pub generators: Vec<PauliString>,
    pub logical_x: PauliString,
    pub logical_z: PauliString,
    lookup: [Option<usize>; 8],
}

impl Default for SteaneLayout {
    fn default() -> Self {
        Self::new()
    }
}

impl SteaneLayout {
    pub fn new() -> Self {
        let on_support = |p: Pauli, support: &[usize]| {
            let mut out = PauliString::identity(DATA_QUBITS);
            for &q in support {
                out.set(q, p);
            }
            out
        };
        let mut generators = Vec::with_capacity(6);
        for support in &GENERATOR_SUPPORTS {
            generators.push(on_support(Pauli::Z, support));
        }
        for support in &GENERATOR_SUPPORTS {
            generators.push(on_support(Pauli::X, support));
        }
        // Brute-force syndrome table: qubit k's syndrome bit for generator
        // i is membership of k in the i-th support.
        let mut lookup = [None; 8];
        for k in 0..DATA_QUBITS {
            let mut idx = 0usize;
            for (i, support) in GENERATOR_SUPPORTS.iter().enumerate() {
                if support.contains(&k) {
                    idx |= 1 << i;
                }
            }
            lookup[idx] = Some(k);
        }
        SteaneLayout {
            generators,
            logical_x: on_support(Pauli::X, &[4, 5, 6]),
            logical_z: on_support(Pauli::Z, &[0, 1, 6]),
            lookup,
        }
    }

    /// Data qubit indicated by a 3-bit syndrome of one error type, or None
    /// for the trivial syndrome.
    pub fn decode(&self, bits: [bool; 3]) -> Option<usize> {
        let idx = bits[0] as usize | (bits[1] as usize) << 1 | (bits[2] as usize) << 2;
        self.lookup[idx]
    }
}

/// Correction for a pair of syndrome triples: the Z-type triple flags an X
/// error, the X-type triple a Z error (a Y error flags both).
pub fn decode_syndrome(
    layout: &SteaneLayout,
    z_type: [bool; 3],
    x_type: [bool; 3],
) -> PauliString {
    let mut out = PauliString::identity(DATA_QUBITS);
    if let Some(k) = layout.decode(z_type) {
        out.set(k, Pauli::X);
    }
    if let Some(k) = layout.decode(x_type) {
        let merged = if out.get(k) == Pauli::X { Pauli::Y } else { Pauli::Z };
        out.set(k, merged);
    }
    out
}

/// Gate list of the encoding circuit (input on data qubit 6).
fn encoding_gates() -> Vec<Gate> {
    vec![
        Gate::H(0),
        Gate::H(1),
        Gate::H(2),
        Gate::Cnot(6, 5),
        Gate::Cnot(6, 4),
        Gate::Cnot(0, 3),
        Gate::Cnot(0, 5),
        Gate::Cnot(0, 6),
        Gate::Cnot(1, 3),
        Gate::Cnot(1, 4),
        Gate::Cnot(1, 6),
        Gate::Cnot(2, 3),
        Gate::Cnot(2, 4),
        Gate::Cnot(2, 5),
    ]
}

/// The noiseless 7-qubit encoding circuit; the logical input rides on
/// qubit 6.
pub fn build_encoding_circuit() -> Circuit {
    let mut c = Circuit::new(DATA_QUBITS);
    for g in encoding_gates() {
        c.push(Instruction::Gate(g));
    }
    c
}

fn noise_step(model: &NoiseModel, qubits: &[usize]) -> Vec<Instruction> {
    qubits
        .iter()
        .map(|&q| Instruction::Noise {
            name: model.name.clone(),
            params: model.params.clone(),
            qubits: vec![q],
        })
        .collect()
}

/// Timesteps of one syndrome extraction circuit on the 11-qubit register.
/// `index` 0–2 are the Z-type generators, 3–5 the X-type; classical bits
/// start at `cbit_base`.
fn syndrome_circuit_steps(
    index: usize,
    model: &NoiseModel,
    cbit_base: usize,
) -> Vec<Vec<Instruction>> {
    let support = GENERATOR_SUPPORTS[index % 3];
    let [a0, a1, a2, a3] = ANCILLA;
    let mut steps: Vec<Vec<Instruction>> = Vec::with_capacity(12);
    let gates = |gs: &[Gate]| gs.iter().map(|g| Instruction::Gate(*g)).collect::<Vec<_>>();

    // Shared cat-state preparation.
    steps.push(gates(&[Gate::H(a1)]));
    steps.push(gates(&[Gate::Cnot(a1, a2)]));
    steps.push(gates(&[Gate::Cnot(a1, a0)]));
    steps.push(gates(&[Gate::Cnot(a2, a3)]));

    if index < 3 {
        // Z-type: basis-change the ancillas, couple data → ancilla.
        steps.push(gates(&[Gate::H(a0), Gate::H(a1), Gate::H(a2), Gate::H(a3)]));
        steps.push(noise_step(model, &ANCILLA));
        for (i, &q) in support.iter().enumerate() {
            steps.push(gates(&[Gate::Cnot(q, ANCILLA[i])]));
        }
        let mut touched: Vec<usize> = support.to_vec();
        touched.extend_from_slice(&ANCILLA);
        steps.push(noise_step(model, &touched));
    } else {
        // X-type: couple ancilla → data, then basis-change the ancillas.
        for (i, &q) in support.iter().enumerate() {
            steps.push(gates(&[Gate::Cnot(ANCILLA[i], q)]));
        }
        let mut touched: Vec<usize> = support.to_vec();
        touched.extend_from_slice(&ANCILLA);
        steps.push(noise_step(model, &touched));
        steps.push(gates(&[Gate::H(a0), Gate::H(a1), Gate::H(a2), Gate::H(a3)]));
        steps.push(noise_step(model, &ANCILLA));
    }

    steps.push(
        ANCILLA
            .iter()
            .enumerate()
            .map(|(i, &q)| Instruction::MeasureReset {
                qubit: q,
                cbit: cbit_base + i,
            })
            .collect(),
    );
    steps
}

/// The six syndrome extraction circuits at the given noise strength, each
/// on the full 11-qubit register with classical bits 0–3.
pub fn build_syndrome_circuits(model: &NoiseModel) -> Result<Vec<Circuit>> {
    (0..6)
        .map(|i| Circuit::from_steps(TOTAL_QUBITS, syndrome_circuit_steps(i, model, 0)))
        .collect()
}

/// One or more full rounds of all six syndrome extractions as a single
/// circuit; round r, circuit c records bits (r·6 + c)·4 ‥ +4.
fn ec_circuit(rounds: usize, model: &NoiseModel) -> Result<Circuit> {
    let mut steps = Vec::new();
    for r in 0..rounds {
        for c in 0..6 {
            steps.extend(syndrome_circuit_steps(c, model, (r * 6 + c) * 4));
        }
    }
    Circuit::from_steps(TOTAL_QUBITS, steps)
}

/// The noisy logical identity: one boundary with noise on all seven data
/// qubits.
fn identity_circuit(model: &NoiseModel) -> Result<Circuit> {
    Circuit::from_steps(TOTAL_QUBITS, vec![noise_step(model, &[0, 1, 2, 3, 4, 5, 6])])
}

/// Parity of the four ancilla bits of syndrome circuit `c` in round `r`.
fn syndrome_bit(bits: &[bool], r: usize, c: usize) -> bool {
    let base = (r * 6 + c) * 4;
    bits[base] ^ bits[base + 1] ^ bits[base + 2] ^ bits[base + 3]
}

/// Majority vote over the per-round triples: the first triple that appears
/// at least twice, or the sole triple for a single round; no agreement
/// means no correction.
fn majority(triples: &[[bool; 3]]) -> Option<[bool; 3]> {
    if triples.len() == 1 {
        return Some(triples[0]);
    }
    for (i, t) in triples.iter().enumerate() {
        if triples.iter().skip(i + 1).any(|u| u == t) {
            return Some(*t);
        }
    }
    None
}

fn correction_instructions(
    bits: &[bool],
    rounds: usize,
    layout: &SteaneLayout,
) -> Vec<Instruction> {
    let triple = |r: usize, kind: usize| -> [bool; 3] {
        [
            syndrome_bit(bits, r, 3 * kind),
            syndrome_bit(bits, r, 3 * kind + 1),
            syndrome_bit(bits, r, 3 * kind + 2),
        ]
    };
    let z_triples: Vec<[bool; 3]> = (0..rounds).map(|r| triple(r, 0)).collect();
    let x_triples: Vec<[bool; 3]> = (0..rounds).map(|r| triple(r, 1)).collect();
    let mut out = Vec::new();
    if let Some(t) = majority(&z_triples) {
        if let Some(k) = layout.decode(t) {
            out.push(Instruction::Gate(Gate::X(k)));
        }
    }
    if let Some(t) = majority(&x_triples) {
        if let Some(k) = layout.decode(t) {
            out.push(Instruction::Gate(Gate::Z(k)));
        }
    }
    out
}

/// Tableau of the noiseless encoded state for one of [`INPUT_STATES`],
/// ancillas in |0⟩.
pub fn encoded_tableau(input: usize) -> Tableau {
    let mut t = Tableau::new_zero_state(TOTAL_QUBITS);
    // Prepare the input eigenstate on qubit 6.
    match INPUT_STATES[input] {
        "Z+" => {}
        "Z-" => t.apply_x(6).unwrap(),
        "X+" => t.apply_h(6).unwrap(),
        "X-" => {
            t.apply_x(6).unwrap();
            t.apply_h(6).unwrap();
        }
        "Y+" => {
            t.apply_h(6).unwrap();
            t.apply_s(6).unwrap();
        }
        _ => {
            t.apply_x(6).unwrap();
            t.apply_h(6).unwrap();
            t.apply_s(6).unwrap();
        }
    }
    for g in encoding_gates() {
        match g {
            Gate::H(q) => t.apply_h(q).unwrap(),
            Gate::Cnot(c, q) => t.apply_cnot(c, q).unwrap(),
            _ => unreachable!(),
        }
    }
    t
}

/// Run one noiseless EC round (all six syndromes plus lookup correction)
/// on the given state.
pub fn run_noiseless_ec<R: rand::Rng + ?Sized>(t: &mut Tableau, rng: &mut R) -> Result<()> {
    let layout = SteaneLayout::new();
    let registry = NoiseRegistry::new();
    let circuit = ec_circuit(1, &NoiseModel::depolarizing(0.0))?;
    let prepared = PreparedCircuit::new(&circuit, &registry)?;
    let mut calls = 0usize;
    let mut handler = |bits: &[bool]| -> Option<Vec<Instruction>> {
        calls += 1;
        (calls == 6).then(|| correction_instructions(bits, 1, &layout))
    };
    execute_dynamic(&prepared, t, rng, &registry, Some(&mut handler))?;
    Ok(())
}

/// Supported noise families for the threshold study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Depolarizing,
    AmplitudeDamping,
}

impl NoiseKind {
    pub fn model(self, strength: f64) -> NoiseModel {
        match self {
            NoiseKind::Depolarizing => NoiseModel::depolarizing(strength),
            NoiseKind::AmplitudeDamping => NoiseModel::amplitude_damping(strength),
        }
    }

    /// Analytic single-qubit infidelity: 2p/3 for depolarizing;
    /// 1 − (2F+1)/3 with F = (1+√(1−γ))²/4 for amplitude damping.
    pub fn physical_infidelity(self, strength: f64) -> f64 {
        match self {
            NoiseKind::Depolarizing => 2.0 * strength / 3.0,
            NoiseKind::AmplitudeDamping => {
                let f = (1.0 + (1.0 - strength).sqrt()).powi(2) / 4.0;
                1.0 - (2.0 * f + 1.0) / 3.0
            }
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "depolarizing" => Ok(NoiseKind::Depolarizing),
            "amplitude_damping" => Ok(NoiseKind::AmplitudeDamping),
            other => Err(Error::UnknownChannel(other.to_string())),
        }
    }
}

/// One sweep sample.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdPoint {
    pub strength: f64,
    pub physical_infidelity: f64,
    pub logical_infidelity: f64,
    pub std_error: f64,
    pub shots: u64,
}

struct PipelineCircuits {
    identity: PreparedCircuit,
    noisy_ec: PreparedCircuit,
    clean_ec: PreparedCircuit,
    rounds: usize,
    one_norm_product: f64,
}

fn build_pipeline(model: &NoiseModel, rounds: usize) -> Result<PipelineCircuits> {
    let registry = NoiseRegistry::new();
    let identity = PreparedCircuit::new(&identity_circuit(model)?, &registry)?;
    let noisy_ec = PreparedCircuit::new(&ec_circuit(rounds, model)?, &registry)?;
    let clean_ec = PreparedCircuit::new(
        &ec_circuit(1, &NoiseModel::depolarizing(0.0))?,
        &registry,
    )?;
    let one_norm_product = identity.one_norm_product() * noisy_ec.one_norm_product();
    Ok(PipelineCircuits {
        identity,
        noisy_ec,
        clean_ec,
        rounds,
        one_norm_product,
    })
}

/// One pipeline shot: noisy identity, `rounds` noisy EC rounds with
/// majority-vote correction, one noiseless EC round, then projection onto
/// the ideal encoded state. Returns (weight, fidelity projection).
fn pipeline_shot<R: rand::Rng + ?Sized>(
    pipe: &PipelineCircuits,
    layout: &SteaneLayout,
    registry: &NoiseRegistry,
    base: &Tableau,
    targets: &[PauliString],
    rng: &mut R,
) -> Result<(f64, f64)> {
    let mut t = base.clone();
    let (_, w1) = execute_dynamic(&pipe.identity, &mut t, rng, registry, None)?;
    let rounds = pipe.rounds;
    let mut calls = 0usize;
    let mut handler = |bits: &[bool]| -> Option<Vec<Instruction>> {
        calls += 1;
        (calls == rounds * 6).then(|| correction_instructions(bits, rounds, layout))
    };
    let (_, w2) = execute_dynamic(&pipe.noisy_ec, &mut t, rng, registry, Some(&mut handler))?;
    let mut calls = 0usize;
    let mut handler = |bits: &[bool]| -> Option<Vec<Instruction>> {
        calls += 1;
        (calls == 6).then(|| correction_instructions(bits, 1, layout))
    };
    let (_, w3) = execute_dynamic(&pipe.clean_ec, &mut t, rng, registry, Some(&mut handler))?;
    let f = t.projection_probability(targets)?;
    Ok((w1 * w2 * w3, f))
}

const STEANE_BLOCK: u64 = 1024;

/// Average logical infidelity of the noisy identity-plus-EC pipeline over
/// the six Pauli eigenstate inputs.
///
/// `shots` is the total budget for the point; it is split evenly (rounded
/// up) across the six input states. Deterministic in `seed` for any worker
/// count.
pub fn logical_infidelity(
    kind: NoiseKind,
    strength: f64,
    shots: u64,
    seed: u64,
    rounds: usize,
) -> Result<EstimatorResult> {
    if rounds == 0 {
        return Err(Error::InvalidPlan("at least one EC round required".into()));
    }
    let model = kind.model(strength);
    let layout = SteaneLayout::new();
    let registry = NoiseRegistry::new();
    let pipe = build_pipeline(&model, rounds)?;
    let per_state = shots.div_ceil(6).max(2);
    let bases: Vec<(Tableau, Vec<PauliString>)> = (0..6)
        .map(|i| {
            let t = encoded_tableau(i);
            let targets = t.stabilizers().to_vec();
            (t, targets)
        })
        .collect();

    let n_blocks = per_state.div_ceil(STEANE_BLOCK);
    let cells: Vec<(usize, u64)> = (0..6)
        .flat_map(|state| (0..n_blocks).map(move |b| (state, b)))
        .collect();
    let partial: Vec<Result<(usize, f64, f64)>> = cells
        .par_iter()
        .map(|&(state, block)| {
            let (base, targets) = &bases[state];
            let lo = block * STEANE_BLOCK;
            let hi = (lo + STEANE_BLOCK).min(per_state);
            let mut sum = 0.0f64;
            let mut sumsq = 0.0f64;
            for s in lo..hi {
                let global_shot = state as u64 * per_state + s;
                let mut rng = stream_for_shot(seed, global_shot);
                let (w, f) = pipeline_shot(&pipe, &layout, &registry, base, targets, &mut rng)?;
                debug_assert!(
                    (w.abs() - pipe.one_norm_product).abs() <= 1e-9 * pipe.one_norm_product
                );
                let v = 0.5 + w * (f - 0.5);
                sum += v;
                sumsq += v * v;
            }
            Ok((state, sum, sumsq))
        })
        .collect();

    let mut sums = [0.0f64; 6];
    let mut sumsqs = [0.0f64; 6];
    for p in partial {
        let (state, s, sq) = p?;
        sums[state] += s;
        sumsqs[state] += sq;
    }

    let s = per_state as f64;
    let mut mean_total = 0.0;
    let mut mean_variance = 0.0;
    for state in 0..6 {
        let mean = sums[state] / s;
        let var = ((sumsqs[state] - sums[state] * sums[state] / s) / (s - 1.0)).max(0.0);
        mean_total += mean;
        mean_variance += var / s / 36.0;
    }
    let fidelity_mean = mean_total / 6.0;
    let total_shots = 6 * per_state;
    let std_error = mean_variance.sqrt();
    Ok(EstimatorResult {
        mean: 1.0 - fidelity_mean,
        sample_variance: std_error * std_error * total_shots as f64,
        std_error,
        shots: total_shots,
        one_norm_product: pipe.one_norm_product,
        seed,
    })
}

/// Sweep the noise strength and estimate the pseudo-threshold crossing by
/// log-log interpolation of the logical-vs-physical infidelity curves.
pub fn threshold_sweep(
    kind: NoiseKind,
    strengths: &[f64],
    shots: u64,
    seed: u64,
    rounds: usize,
) -> Result<(Vec<ThresholdPoint>, Option<f64>)> {
    if strengths.len() < 2 {
        return Err(Error::InvalidPlan("sweep needs at least two strengths".into()));
    }
    let mut points = Vec::with_capacity(strengths.len());
    for (i, &strength) in strengths.iter().enumerate() {
        let r = logical_infidelity(kind, strength, shots, seed.wrapping_add(i as u64), rounds)?;
        points.push(ThresholdPoint {
            strength,
            physical_infidelity: kind.physical_infidelity(strength),
            logical_infidelity: r.mean,
            std_error: r.std_error,
            shots: r.shots,
        });
    }
    let crossing = estimate_crossing(&points);
    Ok((points, crossing))
}

/// Physical infidelity at which the interpolated logical curve crosses the
/// physical line; None when the sampled points do not bracket a crossing.
pub fn estimate_crossing(points: &[ThresholdPoint]) -> Option<f64> {
    let mut usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.logical_infidelity > 0.0 && p.physical_infidelity > 0.0)
        .map(|p| (p.physical_infidelity, p.logical_infidelity))
        .collect();
    usable.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in usable.windows(2) {
        let d0 = (w[0].1 / w[0].0).ln();
        let d1 = (w[1].1 / w[1].0).ln();
        if d0 <= 0.0 && d1 > 0.0 {
            let t = d0 / (d0 - d1);
            let ln_x = w[0].0.ln() + t * (w[1].0.ln() - w[0].0.ln());
            return Some(ln_x.exp());
        }
    }
    None
}
