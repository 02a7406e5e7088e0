//! Signed n-qubit Pauli operators and the indexed Pauli basis.
//!
//! A Pauli operator is stored as paired X/Z bit vectors plus a phase that is
//! a power of i. With `W(x, z) = i^(x·z) X^x Z^z` per qubit, the phase of any
//! Hermitian operator is ±1 and products track phases exactly through the
//! symplectic accounting in [`PauliString::mul`].

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// One of I, X, Y, Z on a single qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Pauli {
    I = 0,
    X = 1,
    Y = 2,
    Z = 3,
}

impl Pauli {
    /// (x, z) bit pair for this operator.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' | 'i' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
        _ => None,
        }
    }
}

/// Phase as a power of i: `Phase(k)` represents i^k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const PLUS_ONE: Phase = Phase(0);
    pub const PLUS_I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_i_power(k: i64) -> Self {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn i_power(self) -> u8 {
        self.0
    }

    pub fn mul(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) & 3)
    }

    /// True for ±1.
    pub fn is_real(self) -> bool {
        self.0 & 1 == 0
    }

    /// +1 or −1 for a real phase.
    pub fn sign(self) -> Result<i8> {
        match self.0 {
            0 => Ok(1),
            2 => Ok(-1),
            _ => Err(Error::NonHermitian),
        }
    }

    pub fn negate(self) -> Phase {
        Phase((self.0 + 2) & 3)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => write!(f, "+"),
            1 => write!(f, "+i"),
            2 => write!(f, "-"),
            _ => write!(f, "-i"),
        }
    }
}

const WORD_BITS: usize = 64;

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD_BITS)
}

/// Signed Pauli operator on `n` qubits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: Phase,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliString {
            n,
            x: vec![0; w],
            z: vec![0; w],
            phase: Phase::PLUS_ONE,
        }
    }

    /// Single-qubit operator `p` at `qubit`, identity elsewhere.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Self {
        assert!(qubit < n, "qubit index out of range");
        let mut s = PauliString::identity(n);
        s.set(qubit, p);
        s
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn negated(&self) -> Self {
        let mut s = self.clone();
        s.phase = s.phase.negate();
        s
    }

    pub fn x_bit(&self, qubit: usize) -> bool {
        self.x[qubit / WORD_BITS] >> (qubit % WORD_BITS) & 1 == 1
    }

    pub fn z_bit(&self, qubit: usize) -> bool {
        self.z[qubit / WORD_BITS] >> (qubit % WORD_BITS) & 1 == 1
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x_bit(qubit), self.z_bit(qubit))
    }

    pub fn set(&mut self, qubit: usize, p: Pauli) {
        let (x, z) = p.bits();
        let (w, b) = (qubit / WORD_BITS, qubit % WORD_BITS);
        self.x[w] = self.x[w] & !(1 << b) | (x as u64) << b;
        self.z[w] = self.z[w] & !(1 << b) | (z as u64) << b;
    }

    pub fn is_identity_unsigned(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    pub fn is_identity(&self) -> bool {
        self.is_identity_unsigned() && self.phase == Phase::PLUS_ONE
    }

    /// Number of qubits acted on non-trivially.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(&x, &z)| (x | z).count_ones() as usize)
            .sum()
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }

    /// Copy without its phase.
    pub fn unsigned(&self) -> Self {
        let mut s = self.clone();
        s.phase = Phase::PLUS_ONE;
        s
    }

    /// Operator product `self · other` with exact phase accounting.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let mut x = Vec::with_capacity(self.x.len());
        let mut z = Vec::with_capacity(self.z.len());
        // i-power of the product of two W-form operators:
        //   |x1∧z1| + |x2∧z2| + 2|z1∧x2| − |x3∧z3|  (mod 4)
        let mut ipow: i64 = 0;
        for k in 0..self.x.len() {
            let (x1, z1) = (self.x[k], self.z[k]);
            let (x2, z2) = (other.x[k], other.z[k]);
            let (x3, z3) = (x1 ^ x2, z1 ^ z2);
            ipow += (x1 & z1).count_ones() as i64;
            ipow += (x2 & z2).count_ones() as i64;
            ipow += 2 * (z1 & x2).count_ones() as i64;
            ipow -= (x3 & z3).count_ones() as i64;
            x.push(x3);
            z.push(z3);
        }
        Ok(PauliString {
            n: self.n,
            x,
            z,
            phase: self.phase.mul(other.phase).mul(Phase::from_i_power(ipow)),
        })
    }

    /// In-place `self ← self · other` without the dimension check.
    pub(crate) fn mul_assign(&mut self, other: &PauliString) {
        debug_assert_eq!(self.n, other.n);
        let mut ipow: i64 = 0;
        for k in 0..self.x.len() {
            let (x1, z1) = (self.x[k], self.z[k]);
            let (x2, z2) = (other.x[k], other.z[k]);
            let (x3, z3) = (x1 ^ x2, z1 ^ z2);
            ipow += (x1 & z1).count_ones() as i64;
            ipow += (x2 & z2).count_ones() as i64;
            ipow += 2 * (z1 & x2).count_ones() as i64;
            ipow -= (x3 & z3).count_ones() as i64;
            self.x[k] = x3;
            self.z[k] = z3;
        }
        self.phase = self.phase.mul(other.phase).mul(Phase::from_i_power(ipow));
    }

    /// True when the two operators commute (symplectic inner product zero).
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        debug_assert_eq!(self.n, other.n);
        let mut acc = 0u32;
        for k in 0..self.x.len() {
            acc ^= (self.x[k] & other.z[k]).count_ones() & 1;
            acc ^= (self.z[k] & other.x[k]).count_ones() & 1;
        }
        acc == 0
    }

    /// Exponent count |x ∧ z|, the i-power folded into the W-form.
    pub(crate) fn xz_overlap(&self) -> u32 {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(&x, &z)| (x & z).count_ones())
            .sum()
    }

    /// Index of the first qubit acted on non-trivially.
    pub fn first_support(&self) -> Option<usize> {
        for (w, (&x, &z)) in self.x.iter().zip(&self.z).enumerate() {
            let occ = x | z;
            if occ != 0 {
                return Some(w * WORD_BITS + occ.trailing_zeros() as usize);
            }
        }
        None
    }

    /// Raw X words (for GF(2) linear algebra).
    pub(crate) fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub(crate) fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub(crate) fn from_words(n: usize, x: Vec<u64>, z: Vec<u64>, phase: Phase) -> Self {
        debug_assert_eq!(x.len(), words_for(n));
        debug_assert_eq!(z.len(), words_for(n));
        PauliString { n, x, z, phase }
    }

    /// Embed a k-qubit operator into `n` qubits at the given positions.
    pub fn embed(&self, n: usize, qubits: &[usize]) -> Result<PauliString> {
        if qubits.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: qubits.len(),
            });
        }
        let mut out = PauliString::identity(n);
        for (k, &q) in qubits.iter().enumerate() {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, n });
            }
            out.set(q, self.get(k));
        }
        out.phase = self.phase;
        Ok(out)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.phase)?;
        for q in 0..self.n {
            write!(f, "{}", self.get(q).to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses `±?i?[IXYZ]+`; leftmost letter is qubit 0.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::PauliParse(s.to_string());
        let mut rest = s;
        let mut phase = Phase::PLUS_ONE;
        if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        } else if let Some(r) = rest.strip_prefix('-') {
            phase = Phase::MINUS_ONE;
            rest = r;
        }
        if let Some(r) = rest.strip_prefix('i') {
            // Only treat a leading 'i' as the imaginary unit when letters follow.
            if !r.is_empty() {
                phase = phase.mul(Phase::PLUS_I);
                rest = r;
            }
        }
        if rest.is_empty() {
            return Err(bad());
        }
        let mut out = PauliString::identity(rest.chars().count());
        for (k, c) in rest.chars().enumerate() {
            out.set(k, Pauli::from_char(c).ok_or_else(bad)?);
        }
        out.phase = phase;
        Ok(out)
    }
}

/// Index into the unsigned n-qubit Pauli basis.
///
/// The bijection is fixed across the codebase and all serialized formats:
/// qubit k contributes a base-4 digit (I=0, X=1, Y=2, Z=3) with qubit 0 the
/// least-significant digit. Index 0 is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisIndex(pub usize);

impl BasisIndex {
    pub fn of(p: &PauliString) -> BasisIndex {
        let mut idx = 0usize;
        for q in (0..p.num_qubits()).rev() {
            idx = idx * 4 + p.get(q) as usize;
        }
        BasisIndex(idx)
    }

    pub fn to_pauli(self, n: usize) -> PauliString {
        let mut idx = self.0;
        let mut out = PauliString::identity(n);
        for q in 0..n {
            let d = idx & 3;
            idx >>= 2;
            out.set(
                q,
                match d {
                    0 => Pauli::I,
                    1 => Pauli::X,
                    2 => Pauli::Y,
                    _ => Pauli::Z,
                },
            );
        }
        out
    }
}

/// Ordered list of all 4^n unsigned Pauli operators in [`BasisIndex`] order.
pub fn pauli_basis(n: usize) -> Vec<PauliString> {
    let count = 1usize << (2 * n);
    (0..count).map(|i| BasisIndex(i).to_pauli(n)).collect()
}

/// +1 if `a` and `b` commute, −1 if they anticommute.
pub fn comm_sign(a: &PauliString, b: &PauliString) -> Result<i8> {
    if a.num_qubits() != b.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: a.num_qubits(),
            got: b.num_qubits(),
        });
    }
    Ok(if a.commutes_with(b) { 1 } else { -1 })
}

/// Operator product with the dimension check; see [`PauliString::mul`].
pub fn pauli_mul(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    a.mul(b)
}

/// Canonical correction Pauli for resetting `target` to its +1 eigenstate:
/// a single-qubit Pauli that anticommutes with `target`, chosen from the
/// first qubit in its support (Z there if the component is X or Y, X if it
/// is Z). The choice is state-independent so the realized reset channel is
/// the same linear map everywhere it is used.
pub fn reset_correction(target: &PauliString) -> Result<PauliString> {
    let q = target.first_support().ok_or(Error::IdentityReset)?;
    let p = match target.get(q) {
        Pauli::X | Pauli::Y => Pauli::Z,
        Pauli::Z => Pauli::X,
        Pauli::I => unreachable!(),
    };
    Ok(PauliString::single(target.num_qubits(), q, p))
}
