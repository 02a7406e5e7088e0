//! Quantum channels as Pauli transfer matrices and their quasiprobability
//! decompositions over stabilizer channels.
//!
//! A stabilizer channel is either a Clifford channel (stored by its action on
//! the X/Z generators) or a Pauli reset channel (measure a signed Pauli and
//! conditionally apply the canonical correction so the state lands in the +1
//! eigenspace). A decomposition is a list of real-weighted terms; the weights
//! sum to one for trace-preserving channels and the total magnitude in excess
//! of one measures how far the channel is from a stochastic mixture.

use crate::dense::CMat;
use crate::error::{Error, Result};
use crate::pauli::{pauli_basis, reset_correction, BasisIndex, Pauli, PauliString, Phase};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Numeric tolerance for coefficient and PTM comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Real 4^n × 4^n Pauli transfer matrix; entry (i, j) = 2^{-n} Tr(P_i χ(P_j)).
#[derive(Debug, Clone, PartialEq)]
pub struct Ptm {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Ptm {
    pub fn zeros(n: usize) -> Self {
        let dim = 1usize << (2 * n);
        Ptm {
            n,
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Ptm::zeros(n);
        for i in 0..m.dim {
            m.data[i * m.dim + i] = 1.0;
        }
        m
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.dim + col] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn mul(&self, other: &Ptm) -> Result<Ptm> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let d = self.dim;
        let mut out = Ptm::zeros(self.n);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        Ok(out)
    }

    pub fn scaled_add(&mut self, s: f64, other: &Ptm) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Apply to a Pauli vector (components Tr(P_j ρ)).
    pub fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.data[i * d + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Ptm) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Ptm, tol: f64) -> bool {
        self.n == other.n && self.max_abs_diff(other) <= tol
    }

    /// Trace preservation ⇔ first row is (1, 0, …, 0).
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        (0..self.dim).all(|j| {
            let expect = if j == 0 { 1.0 } else { 0.0 };
            (self.get(0, j) - expect).abs() <= tol
        })
    }

    /// Unitality ⇔ first column is (1, 0, …, 0)ᵀ.
    pub fn is_unital(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| {
            let expect = if i == 0 { 1.0 } else { 0.0 };
            (self.get(i, 0) - expect).abs() <= tol
        })
    }

    /// Embed a k-qubit PTM into `n` qubits at the given positions (identity
    /// on the rest).
    pub fn lift(&self, n: usize, qubits: &[usize]) -> Result<Ptm> {
        let k = qubits.len();
        if (1usize << (2 * k)) != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: k,
            });
        }
        for &q in qubits {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, n });
            }
        }
        let dim = 1usize << (2 * n);
        let mut out = Ptm::zeros(n);
        // Base-4 digit extraction/insertion at the chosen qubit positions.
        let extract = |full: usize| -> (usize, usize) {
            let mut sub = 0usize;
            let mut rest = full;
            for (i, &q) in qubits.iter().enumerate() {
                let digit = (full >> (2 * q)) & 3;
                sub |= digit << (2 * i);
                rest &= !(3usize << (2 * q));
            }
            (sub, rest)
        };
        for col in 0..dim {
            let (sub_col, rest) = extract(col);
            for sub_row in 0..self.dim {
                let v = self.get(sub_row, sub_col);
                if v == 0.0 {
                    continue;
                }
                let mut row = rest;
                for (i, &q) in qubits.iter().enumerate() {
                    row |= ((sub_row >> (2 * i)) & 3) << (2 * q);
                }
                out.set(row, col, v);
            }
        }
        Ok(out)
    }

    /// PTM of the channel ρ ↦ Σ_k E_k ρ E_k†.
    ///
    /// Prints a warning on stderr when the Kraus set is not trace-preserving
    /// within `DEFAULT_TOL`; non-TP maps remain representable for diagnostics.
    pub fn from_kraus(kraus: &[CMat]) -> Result<Ptm> {
        if kraus.is_empty() {
            return Err(Error::InvalidTerm("empty Kraus set".into()));
        }
        let dim2 = kraus[0].rows;
        if !dim2.is_power_of_two() || kraus[0].cols != dim2 {
            return Err(Error::InvalidTerm("Kraus operators must be square 2^n".into()));
        }
        let n = dim2.trailing_zeros() as usize;
        for e in kraus {
            if e.rows != dim2 || e.cols != dim2 {
                return Err(Error::InvalidTerm("Kraus operators differ in shape".into()));
            }
        }
        // Completeness check Σ E†E = I.
        let mut sum = CMat::zeros(dim2, dim2);
        for e in kraus {
            sum = sum.add(&e.dagger().mul(e));
        }
        if sum.max_abs_diff(&CMat::identity(dim2)) > DEFAULT_TOL {
            eprintln!(
                "warning: Kraus set is not trace-preserving (residual {:.3e})",
                sum.max_abs_diff(&CMat::identity(dim2))
            );
        }
        let basis = pauli_basis(n);
        let dense: Vec<CMat> = basis.iter().map(crate::dense::pauli_matrix).collect();
        let norm = 1.0 / dim2 as f64;
        let mut out = Ptm::zeros(n);
        for (j, pj) in dense.iter().enumerate() {
            let mut chi = CMat::zeros(dim2, dim2);
            for e in kraus {
                chi = chi.add(&e.mul(pj).mul(&e.dagger()));
            }
            for (i, pi) in dense.iter().enumerate() {
                let t = pi.mul(&chi).trace();
                debug_assert!(t.im.abs() < 1e-9, "PTM entry has imaginary part {}", t.im);
                out.set(i, j, t.re * norm);
            }
        }
        Ok(out)
    }

    /// PTM of conjugation by a unitary.
    pub fn from_unitary(u: &CMat) -> Result<Ptm> {
        Ptm::from_kraus(std::slice::from_ref(u))
    }
}

/// Clifford channel stored as the images of the X_k and Z_k generators.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordAction {
    n: usize,
    img_x: Vec<PauliString>,
    img_z: Vec<PauliString>,
}

impl CliffordAction {
    pub fn identity(n: usize) -> Self {
        CliffordAction {
            n,
            img_x: (0..n).map(|q| PauliString::single(n, q, Pauli::X)).collect(),
            img_z: (0..n).map(|q| PauliString::single(n, q, Pauli::Z)).collect(),
        }
    }

    /// Build from generator images, validating the commutation relations.
    pub fn from_images(img_x: Vec<PauliString>, img_z: Vec<PauliString>) -> Result<Self> {
        let n = img_x.len();
        if img_z.len() != n {
            return Err(Error::InvalidTerm("generator image count mismatch".into()));
        }
        let action = CliffordAction { n, img_x, img_z };
        action.validate()?;
        Ok(action)
    }

    pub fn validate(&self) -> Result<()> {
        let all: Vec<&PauliString> = self.img_x.iter().chain(&self.img_z).collect();
        for img in &all {
            if img.num_qubits() != self.n {
                return Err(Error::InvalidTerm("image qubit count mismatch".into()));
            }
            if !img.is_hermitian() {
                return Err(Error::InvalidTerm("generator image is not Hermitian".into()));
            }
        }
        for i in 0..self.n {
            for j in 0..self.n {
                let want_anti = i == j;
                let anti = !self.img_x[i].commutes_with(&self.img_z[j]);
                if anti != want_anti {
                    return Err(Error::InvalidTerm(
                        "generator images break the X/Z pairing".into(),
                    ));
                }
                if !self.img_x[i].commutes_with(&self.img_x[j])
                    || !self.img_z[i].commutes_with(&self.img_z[j])
                {
                    return Err(Error::InvalidTerm(
                        "generator images of the same kind must commute".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn image_of_x(&self, k: usize) -> &PauliString {
        &self.img_x[k]
    }

    pub fn image_of_z(&self, k: usize) -> &PauliString {
        &self.img_z[k]
    }

    /// Conjugation by a Pauli operator: generators keep their bits, signs
    /// flip where they anticommute with `p`.
    pub fn from_pauli(p: &PauliString) -> Self {
        let n = p.num_qubits();
        let flip = |g: PauliString| -> PauliString {
            if g.commutes_with(p) {
                g
            } else {
                g.negated()
            }
        };
        CliffordAction {
            n,
            img_x: (0..n)
                .map(|q| flip(PauliString::single(n, q, Pauli::X)))
                .collect(),
            img_z: (0..n)
                .map(|q| flip(PauliString::single(n, q, Pauli::Z)))
                .collect(),
        }
    }

    /// Single-qubit named actions.
    pub fn h() -> Self {
        CliffordAction {
            n: 1,
            img_x: vec!["+Z".parse().unwrap()],
            img_z: vec!["+X".parse().unwrap()],
        }
    }

    pub fn s() -> Self {
        CliffordAction {
            n: 1,
            img_x: vec!["+Y".parse().unwrap()],
            img_z: vec!["+Z".parse().unwrap()],
        }
    }

    pub fn x() -> Self {
        Self::from_pauli(&"+X".parse().unwrap())
    }

    pub fn y() -> Self {
        Self::from_pauli(&"+Y".parse().unwrap())
    }

    pub fn z() -> Self {
        Self::from_pauli(&"+Z".parse().unwrap())
    }

    pub fn cnot() -> Self {
        // Qubit 0 controls qubit 1.
        CliffordAction {
            n: 2,
            img_x: vec!["+XX".parse().unwrap(), "+IX".parse().unwrap()],
            img_z: vec!["+ZI".parse().unwrap(), "+ZZ".parse().unwrap()],
        }
    }

    /// Image of an arbitrary signed Pauli under this action.
    pub fn apply_to(&self, p: &PauliString) -> Result<PauliString> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: p.num_qubits(),
            });
        }
        // p = phase · i^{|x∧z|} · Πk X_k^{x_k} · Πk Z_k^{z_k}; conjugation is
        // an algebra homomorphism, so substitute the images in that order.
        let mut out = PauliString::identity(self.n);
        for k in 0..self.n {
            if p.x_bit(k) {
                out.mul_assign(&self.img_x[k]);
            }
        }
        for k in 0..self.n {
            if p.z_bit(k) {
                out.mul_assign(&self.img_z[k]);
            }
        }
        let fold = Phase::from_i_power(p.xz_overlap() as i64);
        out.set_phase(out.phase().mul(p.phase()).mul(fold));
        debug_assert!(!p.is_hermitian() || out.is_hermitian());
        Ok(out)
    }

    /// Composite action: apply `inner` first, then `self`.
    pub fn compose(&self, inner: &CliffordAction) -> Result<CliffordAction> {
        if self.n != inner.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: inner.n,
            });
        }
        let img_x = inner
            .img_x
            .iter()
            .map(|p| self.apply_to(p))
            .collect::<Result<Vec<_>>>()?;
        let img_z = inner
            .img_z
            .iter()
            .map(|p| self.apply_to(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(CliffordAction {
            n: self.n,
            img_x,
            img_z,
        })
    }

    pub fn to_ptm(&self) -> Ptm {
        let mut out = Ptm::zeros(self.n);
        for (j, p) in pauli_basis(self.n).iter().enumerate() {
            let img = self.apply_to(p).expect("validated action");
            let sign = img.phase().sign().expect("Hermitian image") as f64;
            out.set(BasisIndex::of(&img).0, j, sign);
        }
        out
    }
}

/// One stabilizer channel: a Clifford action or a Pauli reset.
#[derive(Debug, Clone, PartialEq)]
pub enum StabilizerChannelTerm {
    Clifford(CliffordAction),
    /// Reset to the +1 eigenstate of the signed target: measure it, then on
    /// outcome −1 apply [`reset_correction`]. Resetting to the −1 eigenstate
    /// is expressed by flipping the target's sign.
    PauliReset(PauliString),
}

impl StabilizerChannelTerm {
    pub fn num_qubits(&self) -> usize {
        match self {
            StabilizerChannelTerm::Clifford(a) => a.num_qubits(),
            StabilizerChannelTerm::PauliReset(t) => t.num_qubits(),
        }
    }

    pub fn identity(n: usize) -> Self {
        StabilizerChannelTerm::Clifford(CliffordAction::identity(n))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StabilizerChannelTerm::Clifford(a) => a.validate(),
            StabilizerChannelTerm::PauliReset(t) => {
                if !t.is_hermitian() {
                    return Err(Error::NonHermitian);
                }
                if t.is_identity_unsigned() {
                    return Err(Error::IdentityReset);
                }
                Ok(())
            }
        }
    }
}

/// PTM of a single stabilizer channel term.
pub fn term_to_ptm(term: &StabilizerChannelTerm) -> Result<Ptm> {
    term.validate()?;
    match term {
        StabilizerChannelTerm::Clifford(a) => Ok(a.to_ptm()),
        StabilizerChannelTerm::PauliReset(target) => {
            let n = target.num_qubits();
            let correction = reset_correction(target)?;
            let mut out = Ptm::zeros(n);
            // χ(Q) = Π₊QΠ₊ + N Π₋QΠ₋ N with Π± = (I ± P)/2 and N the fixed
            // Pauli correction. For Pauli N this collapses to
            //   χ(Q) = [Q commutes with P]·[N commutes with Q]·(Q + QP).
            for (j, q) in pauli_basis(n).iter().enumerate() {
                if !q.commutes_with(target) || !q.commutes_with(&correction) {
                    continue;
                }
                let qp = q.mul(target)?;
                out.set(j, j, 1.0);
                let row = BasisIndex::of(&qp).0;
                let prev = out.get(row, j);
                out.set(row, j, prev + qp.phase().sign()? as f64);
            }
            Ok(out)
        }
    }
}

/// Quasiprobability decomposition: a real-weighted list of stabilizer
/// channel terms.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizerDecomposition {
    n: usize,
    terms: Vec<(f64, StabilizerChannelTerm)>,
}

impl StabilizerDecomposition {
    pub fn new(n: usize, terms: Vec<(f64, StabilizerChannelTerm)>) -> Result<Self> {
        for (_, t) in &terms {
            if t.num_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.num_qubits(),
                });
            }
            t.validate()?;
        }
        Ok(StabilizerDecomposition { n, terms })
    }

    pub fn single(term: StabilizerChannelTerm) -> Self {
        let n = term.num_qubits();
        StabilizerDecomposition {
            n,
            terms: vec![(1.0, term)],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, StabilizerChannelTerm)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Σ q_i (equals 1 for trace-preserving channels).
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|(q, _)| q).sum()
    }

    /// Total magnitude of the negative coefficients.
    pub fn negativity(&self) -> f64 {
        self.terms
            .iter()
            .map(|(q, _)| if *q < 0.0 { -q } else { 0.0 })
            .sum()
    }

    /// Σ |q_i|; equals 1 + 2·negativity in the trace-preserving case.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|(q, _)| q.abs()).sum()
    }

    pub fn to_ptm(&self) -> Result<Ptm> {
        let mut out = Ptm::zeros(self.n);
        for (q, term) in &self.terms {
            out.scaled_add(*q, &term_to_ptm(term)?);
        }
        Ok(out)
    }

    /// Tensor product of two decompositions (term-by-term); the 1-norm is
    /// multiplicative under this operation.
    pub fn tensor(&self, other: &StabilizerDecomposition) -> Result<StabilizerDecomposition> {
        let n = self.n + other.n;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (qa, ta) in &self.terms {
            for (qb, tb) in &other.terms {
                let term = tensor_terms(ta, tb, self.n, other.n)?;
                terms.push((qa * qb, term));
            }
        }
        StabilizerDecomposition::new(n, terms)
    }
}

fn tensor_terms(
    a: &StabilizerChannelTerm,
    b: &StabilizerChannelTerm,
    na: usize,
    nb: usize,
) -> Result<StabilizerChannelTerm> {
    let n = na + nb;
    let qubits_a: Vec<usize> = (0..na).collect();
    let qubits_b: Vec<usize> = (na..n).collect();
    match (a, b) {
        (StabilizerChannelTerm::Clifford(ca), StabilizerChannelTerm::Clifford(cb)) => {
            let mut img_x = Vec::with_capacity(n);
            let mut img_z = Vec::with_capacity(n);
            for k in 0..na {
                img_x.push(ca.image_of_x(k).embed(n, &qubits_a)?);
                img_z.push(ca.image_of_z(k).embed(n, &qubits_a)?);
            }
            for k in 0..nb {
                img_x.push(cb.image_of_x(k).embed(n, &qubits_b)?);
                img_z.push(cb.image_of_z(k).embed(n, &qubits_b)?);
            }
            Ok(StabilizerChannelTerm::Clifford(CliffordAction::from_images(
                img_x, img_z,
            )?))
        }
        _ => Err(Error::InvalidTerm(
            "tensor of reset terms is not a single stabilizer term".into(),
        )),
    }
}

fn check_range(name: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if !(min..=max).contains(&value) || !value.is_finite() {
        return Err(Error::ParameterOutOfRange {
            name,
            value,
            min,
            max,
        });
    }
    Ok(())
}

/// Exact coherent Z-rotation decomposition over the I, Z, and S channels:
/// (1 + cosθ − sinθ)/2 · I + (1 − cosθ − sinθ)/2 · Z + sinθ · S.
/// Minimal negativity on 0 ≤ θ ≤ π/4.
pub fn make_rotation_z(theta: f64) -> StabilizerDecomposition {
    let (s, c) = theta.sin_cos();
    StabilizerDecomposition {
        n: 1,
        terms: vec![
            (
                (1.0 + c - s) / 2.0,
                StabilizerChannelTerm::Clifford(CliffordAction::identity(1)),
            ),
            (
                (1.0 - c - s) / 2.0,
                StabilizerChannelTerm::Clifford(CliffordAction::z()),
            ),
            (s, StabilizerChannelTerm::Clifford(CliffordAction::s())),
        ],
    }
}

/// The T gate: the θ = π/4 special case of [`make_rotation_z`].
pub fn make_t_gate() -> StabilizerDecomposition {
    make_rotation_z(std::f64::consts::FRAC_PI_4)
}

/// Nonnegative approximation (1 − sinθ) · I + sinθ · S; exact only to first
/// order, but its 1-norm stays at 1.
pub fn make_rotation_z_positive_approx(theta: f64) -> Result<StabilizerDecomposition> {
    check_range("theta", theta, 0.0, std::f64::consts::FRAC_PI_2)?;
    let s = theta.sin();
    Ok(StabilizerDecomposition {
        n: 1,
        terms: vec![
            (
                1.0 - s,
                StabilizerChannelTerm::Clifford(CliffordAction::identity(1)),
            ),
            (s, StabilizerChannelTerm::Clifford(CliffordAction::s())),
        ],
    })
}

/// Amplitude damping with damping parameter γ:
/// ((1−γ)+√(1−γ))/2 · I + ((1−γ)−√(1−γ))/2 · Z + γ · R_Z.
/// The Z coefficient is negative, ≈ −γ/4 for γ ≪ 1; minimal negativity.
pub fn make_amplitude_damping(gamma: f64) -> Result<StabilizerDecomposition> {
    check_range("gamma", gamma, 0.0, 1.0)?;
    let root = (1.0 - gamma).sqrt();
    Ok(StabilizerDecomposition {
        n: 1,
        terms: vec![
            (
                ((1.0 - gamma) + root) / 2.0,
                StabilizerChannelTerm::Clifford(CliffordAction::identity(1)),
            ),
            (
                ((1.0 - gamma) - root) / 2.0,
                StabilizerChannelTerm::Clifford(CliffordAction::z()),
            ),
            (
                gamma,
                StabilizerChannelTerm::PauliReset("+Z".parse().unwrap()),
            ),
        ],
    })
}

/// Kraus operators of the amplitude damping channel.
pub fn amplitude_damping_kraus(gamma: f64) -> Vec<CMat> {
    use crate::dense::c;
    let root = (1.0 - gamma).sqrt();
    vec![
        CMat::from_rows(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(root, 0.)]]),
        CMat::from_rows(&[
            &[c(0., 0.), c(gamma.sqrt(), 0.)],
            &[c(0., 0.), c(0., 0.)],
        ]),
    ]
}

/// Depolarizing channel (1−p) · I + p/3 · (X + Y + Z); a true probability
/// mixture for 0 ≤ p ≤ 3/4.
pub fn make_depolarizing(p: f64) -> Result<StabilizerDecomposition> {
    check_range("p", p, 0.0, 0.75)?;
    Ok(StabilizerDecomposition {
        n: 1,
        terms: vec![
            (
                1.0 - p,
                StabilizerChannelTerm::Clifford(CliffordAction::identity(1)),
            ),
            (p / 3.0, StabilizerChannelTerm::Clifford(CliffordAction::x())),
            (p / 3.0, StabilizerChannelTerm::Clifford(CliffordAction::y())),
            (p / 3.0, StabilizerChannelTerm::Clifford(CliffordAction::z())),
        ],
    })
}

// --- JSON serialization -------------------------------------------------
//
// { "n": 1, "terms": [
//     { "kind": "clifford", "q": 0.5, "action": {"X0": "+Y", "Z0": "+Z"} },
//     { "kind": "pauli_reset", "q": 0.1, "target": "+Z" } ] }

#[derive(Serialize, Deserialize)]
struct DecompositionJson {
    n: usize,
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TermJson {
    Clifford {
        q: f64,
        action: BTreeMap<String, String>,
    },
    PauliReset {
        q: f64,
        target: String,
    },
}

impl StabilizerDecomposition {
    pub fn to_json(&self) -> String {
        let terms = self
            .terms
            .iter()
            .map(|(q, term)| match term {
                StabilizerChannelTerm::Clifford(a) => {
                    let mut action = BTreeMap::new();
                    for k in 0..a.num_qubits() {
                        action.insert(format!("X{k}"), a.image_of_x(k).to_string());
                        action.insert(format!("Z{k}"), a.image_of_z(k).to_string());
                    }
                    TermJson::Clifford { q: *q, action }
                }
                StabilizerChannelTerm::PauliReset(t) => TermJson::PauliReset {
                    q: *q,
                    target: t.to_string(),
                },
            })
            .collect();
        serde_json::to_string_pretty(&DecompositionJson { n: self.n, terms })
            .expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: DecompositionJson = serde_json::from_str(s)?;
        let mut terms = Vec::with_capacity(raw.terms.len());
        for t in raw.terms {
            match t {
                TermJson::Clifford { q, action } => {
                    let mut img_x = Vec::with_capacity(raw.n);
                    let mut img_z = Vec::with_capacity(raw.n);
                    for k in 0..raw.n {
                        let gx = action.get(&format!("X{k}")).ok_or_else(|| {
                            Error::InvalidTerm(format!("missing X{k} image"))
                        })?;
                        let gz = action.get(&format!("Z{k}")).ok_or_else(|| {
                            Error::InvalidTerm(format!("missing Z{k} image"))
                        })?;
                        img_x.push(gx.parse()?);
                        img_z.push(gz.parse()?);
                    }
                    terms.push((
                        q,
                        StabilizerChannelTerm::Clifford(CliffordAction::from_images(
                            img_x, img_z,
                        )?),
                    ));
                }
                TermJson::PauliReset { q, target } => {
                    terms.push((q, StabilizerChannelTerm::PauliReset(target.parse()?)));
                }
            }
        }
        StabilizerDecomposition::new(raw.n, terms)
    }
}

/// Largest-residual comparison of a channel PTM against a decomposition.
pub fn verify_decomposition(channel: &Ptm, d: &StabilizerDecomposition) -> Result<f64> {
    if channel.num_qubits() != d.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: channel.num_qubits(),
            got: d.num_qubits(),
        });
    }
    Ok(channel.max_abs_diff(&d.to_ptm()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{self, CMat};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn kraus_oracle_ptm(kraus: &[CMat]) -> Ptm {
        // Independent path: build the superoperator Σ E ⊗ E* in the
        // computational vec basis (column stacking), then change basis to
        // the normalized Pauli basis.
        let dim = kraus[0].rows;
        let n = dim.trailing_zeros() as usize;
        let d2 = dim * dim;
        let mut superop = CMat::zeros(d2, d2);
        for e in kraus {
            let mut conj = e.clone();
            for v in conj.data.iter_mut() {
                *v = v.conj();
            }
            superop = superop.add(&e.kron(&conj));
        }
        // Basis matrix T with columns vec(P_j)/√dim.
        let basis = crate::pauli::pauli_basis(n);
        let mut t = CMat::zeros(d2, d2);
        let norm = 1.0 / (dim as f64).sqrt();
        for (j, p) in basis.iter().enumerate() {
            let m = dense::pauli_matrix(p);
            for col in 0..dim {
                for row in 0..dim {
                    t[(col * dim + row, j)] = m[(row, col)] * dense::c(norm, 0.0);
                }
            }
        }
        let m = t.dagger().mul(&superop).mul(&t);
        let mut out = Ptm::zeros(n);
        for i in 0..d2 {
            for j in 0..d2 {
                assert!(m[(i, j)].im.abs() < 1e-12);
                out.set(i, j, m[(i, j)].re);
            }
        }
        out
    }

    #[test]
    fn kraus_identity_gives_identity_ptm() {
        let ptm = Ptm::from_kraus(&[CMat::identity(2)]).unwrap();
        assert!(ptm.approx_eq(&Ptm::identity(1), 1e-12));
    }

    #[test]
    fn kraus_z_gives_diagonal_signs() {
        let z = dense::pauli_matrix(&"+Z".parse().unwrap());
        let ptm = Ptm::from_kraus(&[z]).unwrap();
        let mut expect = Ptm::zeros(1);
        for (i, v) in [1.0, -1.0, -1.0, 1.0].into_iter().enumerate() {
            expect.set(i, i, v);
        }
        assert!(ptm.approx_eq(&expect, 1e-12));
    }

    #[test]
    fn kraus_matches_superoperator_oracle() {
        let kraus = amplitude_damping_kraus(0.5);
        let direct = Ptm::from_kraus(&kraus).unwrap();
        let oracle = kraus_oracle_ptm(&kraus);
        assert!(direct.approx_eq(&oracle, 1e-12));
        assert!(direct.is_trace_preserving(1e-12));
        assert!(!direct.is_unital(1e-6));
    }

    #[test]
    fn clifford_term_ptm_matches_dense_conjugation() {
        let h = StabilizerChannelTerm::Clifford(CliffordAction::h());
        let ptm = term_to_ptm(&h).unwrap();
        let oracle = Ptm::from_unitary(&dense::gate_matrix_h()).unwrap();
        assert!(ptm.approx_eq(&oracle, 1e-12));
        // PTM is a signed permutation: X and Z rows swap, Y picks up −1.
        assert_eq!(ptm.get(3, 1), 1.0);
        assert_eq!(ptm.get(1, 3), 1.0);
        assert_eq!(ptm.get(2, 2), -1.0);
    }

    #[test]
    fn identity_term_is_identity_ptm() {
        let t = StabilizerChannelTerm::identity(2);
        assert!(term_to_ptm(&t).unwrap().approx_eq(&Ptm::identity(2), 0.0));
    }

    #[test]
    fn reset_ptm_first_column_is_identity_plus_target() {
        // R_P(I) = I + P.
        let t = StabilizerChannelTerm::PauliReset("+Z".parse().unwrap());
        let ptm = term_to_ptm(&t).unwrap();
        assert_eq!(ptm.get(0, 0), 1.0);
        assert_eq!(ptm.get(3, 0), 1.0);
        for j in 1..4 {
            for i in 0..4 {
                assert_eq!(ptm.get(i, j), 0.0, "entry ({i},{j})");
            }
        }
        // Signed target resets to the −1 eigenstate of Z.
        let t = StabilizerChannelTerm::PauliReset("-Z".parse().unwrap());
        let ptm = term_to_ptm(&t).unwrap();
        assert_eq!(ptm.get(3, 0), -1.0);
    }

    #[test]
    fn reset_ptm_matches_dense_projector_formula() {
        use crate::pauli::reset_correction;
        for target in ["+Z", "-X", "+Y", "+XX", "-ZI", "+YZ", "+IZ"] {
            let target: crate::pauli::PauliString = target.parse().unwrap();
            let n = target.num_qubits();
            let dim = 1 << n;
            let p = dense::pauli_matrix(&target);
            let id = CMat::identity(dim);
            let proj_plus = id.add(&p).scale(dense::c(0.5, 0.0));
            let proj_minus = id.sub(&p).scale(dense::c(0.5, 0.0));
            let nmat = dense::pauli_matrix(&reset_correction(&target).unwrap());
            let basis = crate::pauli::pauli_basis(n);
            let mut oracle = Ptm::zeros(n);
            for (j, q) in basis.iter().enumerate() {
                let qd = dense::pauli_matrix(q);
                let chi = proj_plus
                    .mul(&qd)
                    .mul(&proj_plus)
                    .add(&nmat.mul(&proj_minus).mul(&qd).mul(&proj_minus).mul(&nmat.dagger()));
                for (i, pi) in basis.iter().enumerate() {
                    let tr = dense::pauli_matrix(pi).mul(&chi).trace();
                    assert!(tr.im.abs() < 1e-12);
                    oracle.set(i, j, tr.re / dim as f64);
                }
            }
            let algebraic =
                term_to_ptm(&StabilizerChannelTerm::PauliReset(target.clone())).unwrap();
            assert!(
                algebraic.approx_eq(&oracle, 1e-12),
                "reset target {target}"
            );
        }
    }

    #[test]
    fn rotation_decomposition_matches_dense_oracle() {
        for theta in [0.0, 0.01, std::f64::consts::PI / 100.0, 0.3, FRAC_PI_4] {
            let d = make_rotation_z(theta);
            let oracle = Ptm::from_unitary(&dense::gate_matrix_rz(theta)).unwrap();
            assert!(
                d.to_ptm().unwrap().approx_eq(&oracle, 1e-12),
                "theta = {theta}"
            );
        }
    }

    #[test]
    fn t_gate_coefficients() {
        let d = make_t_gate();
        let q: Vec<f64> = d.terms().iter().map(|(q, _)| *q).collect();
        assert_abs_diff_eq!(q[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], 0.5 - 1.0 / SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(q[2], 1.0 / SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.negativity(), 1.0 / SQRT_2 - 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.one_norm(), SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn rotation_zero_is_identity() {
        let d = make_rotation_z(0.0);
        let q: Vec<f64> = d.terms().iter().map(|(q, _)| *q).collect();
        assert_eq!(q, vec![1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(d.one_norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rotation_one_norm_identity() {
        // Σ|q| = 1 + 2η at θ = π/100.
        let d = make_rotation_z(std::f64::consts::PI / 100.0);
        assert_abs_diff_eq!(
            d.one_norm(),
            1.0 + 2.0 * d.negativity(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(d.coefficient_sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn positive_approx_is_positive() {
        for theta in [0.0, 0.01, 0.5, 1.0, std::f64::consts::FRAC_PI_2] {
            let d = make_rotation_z_positive_approx(theta).unwrap();
            assert_eq!(d.negativity(), 0.0);
            assert_abs_diff_eq!(d.one_norm(), 1.0, epsilon = 1e-12);
        }
        let d = make_rotation_z_positive_approx(std::f64::consts::PI / 100.0).unwrap();
        let q: Vec<f64> = d.terms().iter().map(|(q, _)| *q).collect();
        let s = (std::f64::consts::PI / 100.0).sin();
        assert_abs_diff_eq!(q[0], 1.0 - s, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], s, epsilon = 1e-15);
        assert!(make_rotation_z_positive_approx(2.0).is_err());
    }

    #[test]
    fn amplitude_damping_matches_kraus_path() {
        for gamma in [0.0, 0.01, 0.3, 0.5, 1.0] {
            let d = make_amplitude_damping(gamma).unwrap();
            let oracle = Ptm::from_kraus(&amplitude_damping_kraus(gamma)).unwrap();
            assert!(
                d.to_ptm().unwrap().approx_eq(&oracle, 1e-12),
                "gamma = {gamma}"
            );
            assert_abs_diff_eq!(d.coefficient_sum(), 1.0, epsilon = 1e-12);
        }
        assert!(make_amplitude_damping(-0.1).is_err());
        assert!(make_amplitude_damping(1.1).is_err());
    }

    #[test]
    fn amplitude_damping_negativity_small_gamma() {
        let gamma = 0.01f64;
        let d = make_amplitude_damping(gamma).unwrap();
        let exact = ((1.0 - gamma).sqrt() - (1.0 - gamma)) / 2.0;
        assert_abs_diff_eq!(d.negativity(), exact, epsilon = 1e-15);
        // ≈ γ/4 for small γ.
        assert!((d.negativity() - gamma / 4.0).abs() < 0.03 * (gamma / 4.0));
    }

    #[test]
    fn amplitude_damping_extremes() {
        let d = make_amplitude_damping(0.0).unwrap();
        let q: Vec<f64> = d.terms().iter().map(|(q, _)| *q).collect();
        assert_eq!(q, vec![1.0, 0.0, 0.0]);
        let d = make_amplitude_damping(1.0).unwrap();
        let q: Vec<f64> = d.terms().iter().map(|(q, _)| *q).collect();
        assert_eq!(q, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn depolarizing_coefficients_and_fidelity() {
        let p = 3e-4;
        let d = make_depolarizing(p).unwrap();
        let q: Vec<f64> = d.terms().iter().map(|(q, _)| *q).collect();
        assert_abs_diff_eq!(q[0], 1.0 - p, epsilon = 1e-15);
        for v in &q[1..] {
            assert_abs_diff_eq!(*v, p / 3.0, epsilon = 1e-18);
        }
        assert_eq!(d.negativity(), 0.0);
        // Average fidelity of the PTM is 1 − 2p/3.
        let ptm = d.to_ptm().unwrap();
        let avg_fid = 0.5 + (ptm.get(1, 1) + ptm.get(2, 2) + ptm.get(3, 3)) / 6.0;
        assert_abs_diff_eq!(avg_fid, 1.0 - 2.0 * p / 3.0, epsilon = 1e-12);
        assert!(make_depolarizing(0.8).is_err());
    }

    #[test]
    fn constructors_match_dense_oracle_at_random_parameters() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let theta: f64 = rng.random::<f64>() * FRAC_PI_4;
            let gamma: f64 = rng.random();
            let p: f64 = rng.random::<f64>() * 0.75;

            let rot = make_rotation_z(theta);
            let oracle = Ptm::from_unitary(&dense::gate_matrix_rz(theta)).unwrap();
            assert!(rot.to_ptm().unwrap().approx_eq(&oracle, 1e-9));
            assert_abs_diff_eq!(rot.coefficient_sum(), 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(
                rot.one_norm(),
                1.0 + 2.0 * rot.negativity(),
                epsilon = 1e-9
            );

            let ad = make_amplitude_damping(gamma).unwrap();
            let oracle = Ptm::from_kraus(&amplitude_damping_kraus(gamma)).unwrap();
            assert!(ad.to_ptm().unwrap().approx_eq(&oracle, 1e-9));

            let dep = make_depolarizing(p).unwrap();
            let mut oracle = Ptm::zeros(1);
            oracle.set(0, 0, 1.0);
            for i in 1..4 {
                oracle.set(i, i, 1.0 - 4.0 * p / 3.0);
            }
            assert!(dep.to_ptm().unwrap().approx_eq(&oracle, 1e-9));
        }
    }

    #[test]
    fn decomposition_ptm_rejects_mixed_qubit_counts() {
        let terms = vec![
            (1.0, StabilizerChannelTerm::identity(1)),
            (0.5, StabilizerChannelTerm::identity(2)),
        ];
        assert!(StabilizerDecomposition::new(1, terms).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = make_amplitude_damping(0.3).unwrap();
        let json = d.to_json();
        let back = StabilizerDecomposition::from_json(&json).unwrap();
        assert_eq!(d, back);
        assert!(json.contains("\"pauli_reset\""));
        assert!(json.contains("\"+Z\""));
    }

    #[test]
    fn verify_decomposition_residuals() {
        let t_ptm = Ptm::from_unitary(&dense::gate_matrix_rz(FRAC_PI_4)).unwrap();
        assert!(verify_decomposition(&t_ptm, &make_t_gate()).unwrap() < 1e-9);

        let id = StabilizerDecomposition::single(StabilizerChannelTerm::identity(1));
        assert_eq!(
            verify_decomposition(&Ptm::identity(1), &id).unwrap(),
            0.0
        );

        // Positive approximation of a small rotation is visibly approximate.
        let theta = std::f64::consts::PI / 100.0;
        let exact = Ptm::from_unitary(&dense::gate_matrix_rz(theta)).unwrap();
        let approx = make_rotation_z_positive_approx(theta).unwrap();
        assert!(verify_decomposition(&exact, &approx).unwrap() > 1e-3);
    }

    #[test]
    fn tensor_one_norm_is_multiplicative() {
        let a = make_rotation_z(0.2);
        let b = make_rotation_z(0.4);
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.num_qubits(), 2);
        assert_abs_diff_eq!(
            ab.one_norm(),
            a.one_norm() * b.one_norm(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn ptm_lift_places_subsystem() {
        let h = CliffordAction::h().to_ptm();
        let lifted = h.lift(2, &[1]).unwrap();
        // X on qubit 1 (basis index 4) maps to Z on qubit 1 (index 12).
        assert_eq!(lifted.get(12, 4), 1.0);
        // X on qubit 0 untouched.
        assert_eq!(lifted.get(1, 1), 1.0);
        assert!(h.lift(2, &[3]).is_err());
    }

    #[test]
    fn apply_to_matches_dense_for_named_actions() {
        let cases: Vec<(CliffordAction, CMat)> = vec![
            (CliffordAction::h(), dense::gate_matrix_h()),
            (CliffordAction::s(), dense::gate_matrix_s()),
            (CliffordAction::cnot(), dense::gate_matrix_cnot()),
        ];
        for (action, u) in cases {
            let n = action.num_qubits();
            for p in pauli_basis(n) {
                let img = action.apply_to(&p).unwrap();
                let lhs = u.mul(&dense::pauli_matrix(&p)).mul(&u.dagger());
                assert!(
                    lhs.approx_eq(&dense::pauli_matrix(&img), 1e-12),
                    "action on {p}"
                );
            }
        }
    }
}
