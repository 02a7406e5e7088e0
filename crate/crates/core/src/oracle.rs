//! Dense brute-force reference implementations for small qubit counts.
//!
//! Used by tests and by the CLI's cross-check mode. The state is a full
//! density matrix (dimension at most 16), so every channel, measurement,
//! and projection can be evaluated exactly. Capped at n = 4.

use crate::channels::{Ptm, StabilizerDecomposition};
use crate::dense::{self, CMat};
use crate::error::{Error, Result};
use crate::pauli::{pauli_basis, BasisIndex, PauliString};
use crate::sampler::SimulationPlan;
use num_complex::Complex64;

pub const MAX_ORACLE_QUBITS: usize = 4;

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_ORACLE_QUBITS {
        return Err(Error::UnsupportedQubitCount(n, "oracle supports 1..=4"));
    }
    Ok(())
}

/// Pauli vector (components Tr(P_i ρ)) of the pure stabilizer state fixed by
/// the given generators, by expanding ρ = 2^{-n} Σ_{g ∈ ⟨S⟩} g.
pub fn stabilizer_pauli_vector(generators: &[PauliString]) -> Result<Vec<f64>> {
    let n = generators.len();
    check_size(n)?;
    for g in generators {
        if g.num_qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: g.num_qubits(),
            });
        }
    }
    let mut vec = vec![0.0; 1 << (2 * n)];
    for mask in 0..1usize << n {
        let mut elem = PauliString::identity(n);
        for (k, g) in generators.iter().enumerate() {
            if mask >> k & 1 == 1 {
                elem = elem.mul(g)?;
            }
        }
        let sign = elem.phase().sign().map_err(|_| Error::InvalidGenerators)? as f64;
        let idx = BasisIndex::of(&elem).0;
        if vec[idx] != 0.0 {
            return Err(Error::InvalidGenerators);
        }
        vec[idx] = sign;
    }
    Ok(vec)
}

/// Exact expectation value of a plan: contracts the observable's Pauli
/// vector with the product of the channel PTMs applied to the initial
/// state's Pauli vector.
pub fn exact_expectation(plan: &SimulationPlan) -> Result<Vec<f64>> {
    check_size(plan.n)?;
    let mut state = stabilizer_pauli_vector(&plan.initial)?;
    for ch in &plan.channels {
        let ptm = ch.decomposition.to_ptm()?.lift(plan.n, &ch.qubits)?;
        state = ptm.apply_vec(&state);
    }
    let norm = 1.0 / (1u64 << plan.n) as f64;
    plan.observables
        .iter()
        .map(|obs| {
            let ovec = stabilizer_pauli_vector(obs)?;
            Ok(norm * ovec.iter().zip(&state).map(|(a, b)| a * b).sum::<f64>())
        })
        .collect()
}

/// Dense density-matrix state for exact evolution at small n.
#[derive(Debug, Clone)]
pub struct DenseState {
    n: usize,
    rho: CMat,
}

impl DenseState {
    pub fn zero_state(n: usize) -> Result<Self> {
        check_size(n)?;
        let dim = 1 << n;
        let mut rho = CMat::zeros(dim, dim);
        rho[(0, 0)] = Complex64::ONE;
        Ok(DenseState { n, rho })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn density_matrix(&self) -> &CMat {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn apply_unitary(&mut self, u: &CMat, qubits: &[usize]) -> Result<()> {
        for &q in qubits {
            if q >= self.n {
                return Err(Error::QubitOutOfRange { qubit: q, n: self.n });
            }
        }
        let full = dense::lift_unitary(u, self.n, qubits);
        self.rho = full.mul(&self.rho).mul(&full.dagger());
        Ok(())
    }

    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        self.apply_unitary(&dense::gate_matrix_h(), &[q])
    }

    pub fn apply_s(&mut self, q: usize) -> Result<()> {
        self.apply_unitary(&dense::gate_matrix_s(), &[q])
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.apply_unitary(&dense::gate_matrix_cnot(), &[control, target])
    }

    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: p.num_qubits(),
            });
        }
        let m = dense::pauli_matrix(p);
        self.rho = m.mul(&self.rho).mul(&m.dagger());
        Ok(())
    }

    /// Apply a channel given by Kraus operators on a qubit subset.
    pub fn apply_kraus(&mut self, kraus: &[CMat], qubits: &[usize]) -> Result<()> {
        let dim = self.rho.rows;
        let mut out = CMat::zeros(dim, dim);
        for e in kraus {
            let full = dense::lift_unitary(e, self.n, qubits);
            out = out.add(&full.mul(&self.rho).mul(&full.dagger()));
        }
        self.rho = out;
        Ok(())
    }

    /// Apply a channel through its PTM in the Pauli-vector picture.
    pub fn apply_ptm(&mut self, ptm: &Ptm, qubits: &[usize]) -> Result<()> {
        let full = ptm.lift(self.n, qubits)?;
        let vec = self.to_pauli_vector();
        let out = full.apply_vec(&vec);
        self.set_from_pauli_vector(&out);
        Ok(())
    }

    pub fn apply_decomposition(
        &mut self,
        d: &StabilizerDecomposition,
        qubits: &[usize],
    ) -> Result<()> {
        self.apply_ptm(&d.to_ptm()?, qubits)
    }

    pub fn to_pauli_vector(&self) -> Vec<f64> {
        let basis = pauli_basis(self.n);
        basis
            .iter()
            .map(|p| dense::pauli_matrix(p).mul(&self.rho).trace().re)
            .collect()
    }

    pub fn set_from_pauli_vector(&mut self, vec: &[f64]) {
        let basis = pauli_basis(self.n);
        let dim = 1 << self.n;
        let norm = 1.0 / dim as f64;
        let mut rho = CMat::zeros(dim, dim);
        for (p, &v) in basis.iter().zip(vec) {
            if v != 0.0 {
                rho = rho.add(&dense::pauli_matrix(p).scale(dense::c(v * norm, 0.0)));
            }
        }
        self.rho = rho;
    }

    /// Probability of the +1 outcome when measuring a signed Pauli.
    pub fn measure_prob_plus(&self, observable: &PauliString) -> Result<f64> {
        if !observable.is_hermitian() {
            return Err(Error::NonHermitian);
        }
        let m = dense::pauli_matrix(observable);
        let dim = self.rho.rows;
        let proj = CMat::identity(dim).add(&m).scale(dense::c(0.5, 0.0));
        Ok(proj.mul(&self.rho).trace().re)
    }

    /// Collapse onto the ±1 eigenspace of the observable and renormalize.
    pub fn collapse(&mut self, observable: &PauliString, outcome: i8) -> Result<()> {
        let m = dense::pauli_matrix(observable);
        let dim = self.rho.rows;
        let sign = dense::c(0.5 * outcome as f64, 0.0);
        let proj = CMat::identity(dim).scale(dense::c(0.5, 0.0)).add(&m.scale(sign));
        let next = proj.mul(&self.rho).mul(&proj);
        let p = next.trace().re;
        if p < 1e-12 {
            return Err(Error::InvalidPlan(
                "collapse onto a zero-probability outcome".into(),
            ));
        }
        self.rho = next.scale(dense::c(1.0 / p, 0.0));
        Ok(())
    }

    /// ⟨projector onto the joint +1 eigenspace of the generators⟩.
    pub fn expect_projector(&self, generators: &[PauliString]) -> Result<f64> {
        let dim = self.rho.rows;
        let mut proj = CMat::identity(dim);
        for g in generators {
            if g.num_qubits() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: g.num_qubits(),
                });
            }
            let m = dense::pauli_matrix(g);
            let half = CMat::identity(dim).add(&m).scale(dense::c(0.5, 0.0));
            proj = proj.mul(&half);
        }
        Ok(proj.mul(&self.rho).trace().re)
    }
}

/// Average fidelity of a single-qubit channel PTM: 1/2 + (Σ diag)/6 over the
/// X, Y, Z diagonal entries.
pub fn average_fidelity_1q(ptm: &Ptm) -> f64 {
    0.5 + (ptm.get(1, 1) + ptm.get(2, 2) + ptm.get(3, 3)) / 6.0
}
