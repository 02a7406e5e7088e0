//! Extended CHP stabilizer propagation kernel.
//!
//! The state is a tableau of 2n signed Pauli rows: n destabilizers followed
//! by n stabilizers. Storage is bit-sliced: for each qubit column there is
//! one bit per row, packed into words, so named gates are a handful of word
//! operations regardless of n and anticommutation scans produce a row mask
//! word-parallel. Measurement of any signed Pauli observable costs O(n²),
//! and projection onto a stabilizer subspace costs O(n³) via sequential
//! forced measurement on a scratch copy.
//!
//! Destabilizer phases carry no physical meaning; row updates that would
//! leave them imaginary pin them back to +1.

use crate::channels::CliffordAction;
use crate::error::{Error, Result};
use crate::pauli::{reset_correction, Pauli, PauliString, Phase};
use rand::Rng;
use std::fmt;

/// Outcome of one Pauli measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasurementRecord {
    /// +1 or −1.
    pub outcome: i8,
    /// True when the outcome was fixed by the state.
    pub deterministic: bool,
}

/// CHP-style stabilizer/destabilizer tableau in bit-sliced layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tableau {
    n: usize,
    /// Words per row mask: ceil(2n / 64).
    rw: usize,
    /// X bits: column q, word w at index q·rw + w; bit r%64 of word r/64
    /// belongs to row r (rows 0..n destabilizers, n..2n stabilizers).
    x: Vec<u64>,
    z: Vec<u64>,
    /// Sign bits per row (set = −1).
    neg: Vec<u64>,
}

#[inline]
fn bit(words: &[u64], r: usize) -> u64 {
    words[r / 64] >> (r % 64) & 1
}

#[inline]
fn set_bit(words: &mut [u64], r: usize, v: u64) {
    let (w, b) = (r / 64, r % 64);
    words[w] = words[w] & !(1 << b) | v << b;
}

impl Tableau {
    /// |0…0⟩: stabilizers +Z_k, destabilizers +X_k.
    pub fn new_zero_state(n: usize) -> Self {
        assert!(n >= 1, "tableau needs at least one qubit");
        let rw = (2 * n).div_ceil(64);
        let mut t = Tableau {
            n,
            rw,
            x: vec![0; n * rw],
            z: vec![0; n * rw],
            neg: vec![0; rw],
        };
        for q in 0..n {
            set_bit(&mut t.x[q * rw..(q + 1) * rw], q, 1);
            set_bit(&mut t.z[q * rw..(q + 1) * rw], n + q, 1);
        }
        t
    }

    /// Build the unique pure state stabilized by the given generators.
    ///
    /// The generators must be Hermitian, independent, and mutually commuting;
    /// destabilizers are completed by GF(2) symplectic elimination.
    pub fn from_stabilizers(generators: &[PauliString]) -> Result<Self> {
        let n = generators.len();
        if n == 0 {
            return Err(Error::InvalidGenerators);
        }
        for g in generators {
            if g.num_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: g.num_qubits(),
                });
            }
            if !g.is_hermitian() || g.is_identity_unsigned() {
                return Err(Error::InvalidGenerators);
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if !generators[i].commutes_with(&generators[j]) {
                    return Err(Error::InvalidGenerators);
                }
            }
        }

        // Solve ⟨d_i, s_j⟩ = δ_ij over GF(2). The functional v ↦ ⟨s_j, v⟩ has
        // coefficient vector (z_j | x_j) against v = (v_x | v_z).
        let w = generators[0].x_words().len();
        let mut mat: Vec<Vec<u64>> = generators
            .iter()
            .map(|g| {
                let mut row = Vec::with_capacity(2 * w);
                row.extend_from_slice(g.z_words());
                row.extend_from_slice(g.x_words());
                row
            })
            .collect();
        let rhs_words = n.div_ceil(64);
        let mut rhs_full: Vec<Vec<u64>> = (0..n)
            .map(|i| {
                let mut r = vec![0u64; rhs_words];
                r[i / 64] = 1 << (i % 64);
                r
            })
            .collect();

        // Gauss-Jordan elimination; record pivot column per row. Column c
        // lives in the first w words for c < n (the v_x block) and in the
        // next w words for c ≥ n (the v_z block).
        let col_pos = |col: usize| -> (usize, usize) {
            if col < n {
                (col / 64, col % 64)
            } else {
                (w + (col - n) / 64, (col - n) % 64)
            }
        };
        let cols = 2 * n;
        let mut pivot_cols = Vec::with_capacity(n);
        let mut row_at = 0usize;
        for col in 0..cols {
            let (cw, cb) = col_pos(col);
            let Some(p) = (row_at..n).find(|&r| mat[r][cw] >> cb & 1 == 1) else {
                continue;
            };
            mat.swap(row_at, p);
            rhs_full.swap(row_at, p);
            for r in 0..n {
                if r != row_at && mat[r][cw] >> cb & 1 == 1 {
                    for k in 0..2 * w {
                        let v = mat[row_at][k];
                        mat[r][k] ^= v;
                    }
                    for k in 0..rhs_words {
                        let v = rhs_full[row_at][k];
                        rhs_full[r][k] ^= v;
                    }
                }
            }
            pivot_cols.push(col);
            row_at += 1;
            if row_at == n {
                break;
            }
        }
        if row_at < n {
            return Err(Error::InvalidGenerators);
        }

        // Back-substitute each unit RHS; free variables stay zero.
        let mut destabs: Vec<PauliString> = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = vec![0u64; w];
            let mut z = vec![0u64; w];
            for (r, &pc) in pivot_cols.iter().enumerate() {
                if rhs_full[r][i / 64] >> (i % 64) & 1 == 1 {
                    if pc < n {
                        x[pc / 64] |= 1 << (pc % 64);
                    } else {
                        let q = pc - n;
                        z[q / 64] |= 1 << (q % 64);
                    }
                }
            }
            destabs.push(PauliString::from_words(n, x, z, Phase::PLUS_ONE));
        }
        // Make the destabilizers mutually commuting; adding s_j to d_i flips
        // ⟨d_i, d_j⟩ without disturbing any ⟨d, s⟩ pairing.
        for i in 0..n {
            for j in 0..i {
                if !destabs[i].commutes_with(&destabs[j]) {
                    let g = generators[j].unsigned();
                    destabs[i] = destabs[i].mul(&g)?;
                    destabs[i].set_phase(Phase::PLUS_ONE);
                }
            }
        }

        let rw = (2 * n).div_ceil(64);
        let mut t = Tableau {
            n,
            rw,
            x: vec![0; n * rw],
            z: vec![0; n * rw],
            neg: vec![0; rw],
        };
        for (i, d) in destabs.iter().enumerate() {
            t.set_row(i, d)?;
        }
        for (i, g) in generators.iter().enumerate() {
            t.set_row(n + i, g)?;
        }
        t.check_invariants().map_err(|_| Error::InvalidGenerators)?;
        Ok(t)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn col(&self, q: usize) -> usize {
        q * self.rw
    }

    fn row_to_pauli(&self, r: usize) -> PauliString {
        let mut p = PauliString::identity(self.n);
        for q in 0..self.n {
            let xb = bit(&self.x[self.col(q)..], r) == 1;
            let zb = bit(&self.z[self.col(q)..], r) == 1;
            p.set(q, Pauli::from_bits(xb, zb));
        }
        if bit(&self.neg, r) == 1 {
            p.set_phase(Phase::MINUS_ONE);
        }
        p
    }

    fn set_row(&mut self, r: usize, p: &PauliString) -> Result<()> {
        for q in 0..self.n {
            let c = self.col(q);
            set_bit(&mut self.x[c..c + self.rw], r, p.x_bit(q) as u64);
            set_bit(&mut self.z[c..c + self.rw], r, p.z_bit(q) as u64);
        }
        let neg = (p.phase().sign()? == -1) as u64;
        set_bit(&mut self.neg, r, neg);
        Ok(())
    }

    pub fn stabilizer(&self, k: usize) -> PauliString {
        self.row_to_pauli(self.n + k)
    }

    pub fn destabilizer(&self, k: usize) -> PauliString {
        self.row_to_pauli(k)
    }

    pub fn stabilizers(&self) -> Vec<PauliString> {
        (0..self.n).map(|k| self.stabilizer(k)).collect()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { qubit: q, n: self.n });
        }
        Ok(())
    }

    #[inline]
    fn post_mutate_check(&self) {
        #[cfg(feature = "strict-invariants")]
        if let Err(e) = self.check_invariants() {
            panic!("tableau invariant broken: {e}");
        }
    }

    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let c = self.col(q);
        for w in 0..self.rw {
            let xv = self.x[c + w];
            let zv = self.z[c + w];
            self.neg[w] ^= xv & zv;
            self.x[c + w] = zv;
            self.z[c + w] = xv;
        }
        self.post_mutate_check();
        Ok(())
    }

    pub fn apply_s(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let c = self.col(q);
        for w in 0..self.rw {
            let xv = self.x[c + w];
            self.neg[w] ^= xv & self.z[c + w];
            self.z[c + w] ^= xv;
        }
        self.post_mutate_check();
        Ok(())
    }

    pub fn apply_x(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let c = self.col(q);
        for w in 0..self.rw {
            self.neg[w] ^= self.z[c + w];
        }
        self.post_mutate_check();
        Ok(())
    }

    pub fn apply_y(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let c = self.col(q);
        for w in 0..self.rw {
            self.neg[w] ^= self.x[c + w] ^ self.z[c + w];
        }
        self.post_mutate_check();
        Ok(())
    }

    pub fn apply_z(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let c = self.col(q);
        for w in 0..self.rw {
            self.neg[w] ^= self.x[c + w];
        }
        self.post_mutate_check();
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::InvalidPlan("cnot control equals target".into()));
        }
        let (cc, ct) = (self.col(control), self.col(target));
        for w in 0..self.rw {
            let xc = self.x[cc + w];
            let zc = self.z[cc + w];
            let xt = self.x[ct + w];
            let zt = self.z[ct + w];
            self.neg[w] ^= xc & zt & !(xt ^ zc);
            self.x[ct + w] = xt ^ xc;
            self.z[cc + w] = zc ^ zt;
        }
        self.post_mutate_check();
        Ok(())
    }

    /// Conjugate every row by a Pauli operator (phase flips only).
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: p.num_qubits(),
            });
        }
        for q in 0..self.n {
            let c = self.col(q);
            match p.get(q) {
                Pauli::I => {}
                Pauli::X => {
                    for w in 0..self.rw {
                        self.neg[w] ^= self.z[c + w];
                    }
                }
                Pauli::Y => {
                    for w in 0..self.rw {
                        self.neg[w] ^= self.x[c + w] ^ self.z[c + w];
                    }
                }
                Pauli::Z => {
                    for w in 0..self.rw {
                        self.neg[w] ^= self.x[c + w];
                    }
                }
            }
        }
        self.post_mutate_check();
        Ok(())
    }

    /// Apply a compiled 1- or 2-qubit Clifford action at the given
    /// positions.
    pub fn apply_compiled(&mut self, action: &CompiledAction, qubits: &[usize]) -> Result<()> {
        if qubits.len() != action.k {
            return Err(Error::DimensionMismatch {
                expected: action.k,
                got: qubits.len(),
            });
        }
        for &q in qubits {
            self.check_qubit(q)?;
        }
        match *qubits {
            [q] => self.apply_compiled_1q(action, q),
            [q0, q1] => {
                if q0 == q1 {
                    return Err(Error::InvalidPlan("channel qubits must be distinct".into()));
                }
                self.apply_compiled_2q(action, q0, q1);
            }
            _ => unreachable!("compiled actions are capped at two qubits"),
        }
        self.post_mutate_check();
        Ok(())
    }

    fn apply_compiled_1q(&mut self, action: &CompiledAction, q: usize) {
        // Bits transform linearly through the generator images; the sign is
        // a lookup over the input Pauli.
        let ex = &action.table[0b01];
        let ez = &action.table[0b10];
        let ey_neg = action.table[0b11].negate;
        let sel = |cond: bool, v: u64| if cond { v } else { 0 };
        let c = self.col(q);
        for w in 0..self.rw {
            let xv = self.x[c + w];
            let zv = self.z[c + w];
            let mut flips = 0u64;
            if ex.negate {
                flips ^= xv & !zv;
            }
            if ey_neg {
                flips ^= xv & zv;
            }
            if ez.negate {
                flips ^= !xv & zv;
            }
            self.neg[w] ^= flips;
            self.x[c + w] = sel(ex.x & 1 == 1, xv) ^ sel(ez.x & 1 == 1, zv);
            self.z[c + w] = sel(ex.z & 1 == 1, xv) ^ sel(ez.z & 1 == 1, zv);
        }
    }

    fn apply_compiled_2q(&mut self, action: &CompiledAction, q0: usize, q1: usize) {
        let ex0 = &action.table[0b0001];
        let ez0 = &action.table[0b0010];
        let ex1 = &action.table[0b0100];
        let ez1 = &action.table[0b1000];
        let sel = |cond: bool, v: u64| if cond { v } else { 0 };
        let (c0, c1) = (self.col(q0), self.col(q1));
        for w in 0..self.rw {
            let x0 = self.x[c0 + w];
            let z0 = self.z[c0 + w];
            let x1 = self.x[c1 + w];
            let z1 = self.z[c1 + w];
            let mut flips = 0u64;
            for idx in 1..16usize {
                if action.table[idx].negate {
                    let m = (if idx & 1 != 0 { x0 } else { !x0 })
                        & (if idx & 2 != 0 { z0 } else { !z0 })
                        & (if idx & 4 != 0 { x1 } else { !x1 })
                        & (if idx & 8 != 0 { z1 } else { !z1 });
                    flips ^= m;
                }
            }
            self.neg[w] ^= flips;
            let combine = |bx0: bool, bz0: bool, bx1: bool, bz1: bool| {
                sel(bx0, x0) ^ sel(bz0, z0) ^ sel(bx1, x1) ^ sel(bz1, z1)
            };
            self.x[c0 + w] = combine(
                ex0.x & 1 == 1,
                ez0.x & 1 == 1,
                ex1.x & 1 == 1,
                ez1.x & 1 == 1,
            );
            self.z[c0 + w] = combine(
                ex0.z & 1 == 1,
                ez0.z & 1 == 1,
                ex1.z & 1 == 1,
                ez1.z & 1 == 1,
            );
            self.x[c1 + w] = combine(
                ex0.x & 2 == 2,
                ez0.x & 2 == 2,
                ex1.x & 2 == 2,
                ez1.x & 2 == 2,
            );
            self.z[c1 + w] = combine(
                ex0.z & 2 == 2,
                ez0.z & 2 == 2,
                ex1.z & 2 == 2,
                ez1.z & 2 == 2,
            );
        }
    }

    /// Apply a general Clifford action (compiles a lookup table first; use
    /// [`CompiledAction`] directly in hot loops).
    pub fn apply_clifford(&mut self, action: &CliffordAction, qubits: &[usize]) -> Result<()> {
        let compiled = CompiledAction::compile(action)?;
        self.apply_compiled(&compiled, qubits)
    }

    /// Word-parallel anticommutation mask of every row against an operator;
    /// iterates only the operator's support.
    fn anticommute_mask(&self, obs: &PauliString, out: &mut [u64]) {
        out.fill(0);
        let (ox, oz) = (obs.x_words(), obs.z_words());
        for (wq, (&xw, &zw)) in ox.iter().zip(oz).enumerate() {
            let mut occupied = xw | zw;
            while occupied != 0 {
                let b = occupied.trailing_zeros() as usize;
                occupied &= occupied - 1;
                let q = wq * 64 + b;
                let c = self.col(q);
                let has_x = xw >> b & 1 == 1;
                let has_z = zw >> b & 1 == 1;
                for w in 0..self.rw {
                    if has_z {
                        out[w] ^= self.x[c + w];
                    }
                    if has_x {
                        out[w] ^= self.z[c + w];
                    }
                }
            }
        }
    }

    /// Multiply the source row into every row flagged in `targets`
    /// (word-parallel over rows, columnwise over qubits) with exact phase
    /// accounting; destabilizer signs are pinned back to +1.
    fn row_mul_into_targets(&mut self, src: usize, targets: &[u64]) {
        let rw = self.rw;
        let mut c0 = vec![0u64; rw];
        let mut c1 = vec![0u64; rw];
        for q in 0..self.n {
            let c = self.col(q);
            let sx = bit(&self.x[c..], src);
            let sz = bit(&self.z[c..], src);
            if sx == 0 && sz == 0 {
                continue;
            }
            for w in 0..rw {
                let t = targets[w];
                if t == 0 {
                    continue;
                }
                let xv = self.x[c + w];
                let zv = self.z[c + w];
                // Per-row i-power contribution of multiplying by the source
                // component (dst·src): X source gains i on Z, loses on Y;
                // Z source gains on Y, loses on X; Y source gains on X,
                // loses on Z.
                let (plus, minus) = match (sx, sz) {
                    (1, 0) => (!xv & zv, xv & zv),
                    (0, 1) => (xv & zv, xv & !zv),
                    _ => (xv & !zv, !xv & zv),
                };
                let plus = plus & t;
                let minus = minus & t;
                let carry = c0[w] & plus;
                c0[w] ^= plus;
                c1[w] ^= carry;
                // −1 ≡ +3: add 2 then 1.
                c1[w] ^= minus;
                let carry = c0[w] & minus;
                c0[w] ^= minus;
                c1[w] ^= carry;
                if sx == 1 {
                    self.x[c + w] = xv ^ t;
                }
                if sz == 1 {
                    self.z[c + w] = zv ^ t;
                }
            }
        }
        let src_neg = bit(&self.neg, src);
        let n = self.n;
        for w in 0..rw {
            let t = targets[w];
            if t == 0 {
                continue;
            }
            // Stabilizer rows must stay real.
            debug_assert_eq!(c0[w] & t & self.stab_mask_word(w), 0);
            let mut flip = c1[w];
            if src_neg == 1 {
                flip ^= t;
            }
            self.neg[w] ^= flip & t;
            // Pin destabilizer signs.
            let destab = destab_mask_word(n, w);
            self.neg[w] &= !(t & destab);
        }
    }

    #[inline]
    fn stab_mask_word(&self, w: usize) -> u64 {
        stab_mask_word(self.n, w)
    }

    fn copy_row(&mut self, dst: usize, src: usize) {
        for q in 0..self.n {
            let c = self.col(q);
            let xv = bit(&self.x[c..], src);
            let zv = bit(&self.z[c..], src);
            set_bit(&mut self.x[c..c + self.rw], dst, xv);
            set_bit(&mut self.z[c..c + self.rw], dst, zv);
        }
        let nv = bit(&self.neg, src);
        set_bit(&mut self.neg, dst, nv);
    }

    /// Measure a signed Pauli observable; O(n²).
    pub fn measure_pauli<R: Rng + ?Sized>(
        &mut self,
        observable: &PauliString,
        rng: &mut R,
    ) -> Result<MeasurementRecord> {
        self.measure_inner(observable, Some(rng))
    }

    /// Shared measurement path. A `None` sampler forces the +1 outcome in
    /// the random case (used by projection) and consumes no randomness.
    fn measure_inner<R: Rng + ?Sized>(
        &mut self,
        observable: &PauliString,
        mut rng: Option<&mut R>,
    ) -> Result<MeasurementRecord> {
        if observable.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: observable.num_qubits(),
            });
        }
        if !observable.is_hermitian() {
            return Err(Error::NonHermitian);
        }
        if observable.is_identity_unsigned() {
            return Ok(MeasurementRecord {
                outcome: observable.phase().sign()?,
                deterministic: true,
            });
        }
        let n = self.n;
        let mut anti = [0u64; STACK_ROW_WORDS];
        let mut anti_heap;
        let anti: &mut [u64] = if self.rw <= STACK_ROW_WORDS {
            &mut anti[..self.rw]
        } else {
            anti_heap = vec![0u64; self.rw];
            &mut anti_heap
        };
        self.anticommute_mask(observable, anti);

        // First anticommuting stabilizer row, if any.
        let mut pivot = None;
        for w in 0..self.rw {
            let masked = anti[w] & self.stab_mask_word(w);
            if masked != 0 {
                pivot = Some(w * 64 + masked.trailing_zeros() as usize);
                break;
            }
        }
        let obs_neg = observable.phase().sign()? == -1;

        if let Some(p) = pivot {
            // Random case. The destabilizer slot p−n takes the old
            // stabilizer row first, then serves as the multiplication
            // source for every other anticommuting row.
            let dp = p - n;
            self.copy_row(dp, p);
            set_bit(anti, p, 0);
            set_bit(anti, dp, 0);
            if anti.iter().any(|&w| w != 0) {
                self.row_mul_into_targets(dp, anti);
            }
            let outcome = match rng.as_deref_mut() {
                Some(r) => {
                    if r.random::<bool>() {
                        1i8
                    } else {
                        -1i8
                    }
                }
                None => 1,
            };
            self.set_row(p, observable)?;
            if outcome == -1 {
                let v = bit(&self.neg, p) ^ 1;
                set_bit(&mut self.neg, p, v);
            }
            set_bit(&mut self.neg, dp, 0);
            self.post_mutate_check();
            Ok(MeasurementRecord {
                outcome,
                deterministic: false,
            })
        } else {
            // Deterministic case: the observable is ± the product of the
            // stabilizers flagged by anticommuting destabilizers.
            let qw = self.n.div_ceil(64);
            let mut sx_stack = [0u64; STACK_ROW_WORDS];
            let mut sz_stack = [0u64; STACK_ROW_WORDS];
            let mut sx_heap;
            let mut sz_heap;
            let (sx, sz): (&mut [u64], &mut [u64]) = if qw <= STACK_ROW_WORDS {
                (&mut sx_stack[..qw], &mut sz_stack[..qw])
            } else {
                sx_heap = vec![0u64; qw];
                sz_heap = vec![0u64; qw];
                (&mut sx_heap, &mut sz_heap)
            };
            let mut ipow: i64 = 0;
            for i in 0..n {
                if bit(anti, i) == 1 {
                    let row = n + i;
                    for q in 0..self.n {
                        let c = self.col(q);
                        let x2 = bit(&self.x[c..], row);
                        let z2 = bit(&self.z[c..], row);
                        if x2 == 0 && z2 == 0 {
                            continue;
                        }
                        let (wq, bq) = (q / 64, q % 64);
                        let x1 = sx[wq] >> bq & 1;
                        let z1 = sz[wq] >> bq & 1;
                        ipow += (x1 & z1) as i64 + (x2 & z2) as i64 + 2 * (z1 & x2) as i64
                            - ((x1 ^ x2) & (z1 ^ z2)) as i64;
                        sx[wq] ^= x2 << bq;
                        sz[wq] ^= z2 << bq;
                    }
                    ipow += 2 * bit(&self.neg, row) as i64;
                }
            }
            debug_assert!(
                sx[..] == *observable.x_words() && sz[..] == *observable.z_words(),
                "deterministic measurement scratch does not reproduce observable"
            );
            let scratch_neg = ipow.rem_euclid(4) == 2;
            let outcome = if scratch_neg == obs_neg { 1 } else { -1 };
            Ok(MeasurementRecord {
                outcome,
                deterministic: true,
            })
        }
    }

    /// Measure the target, then on −1 apply the canonical Pauli correction
    /// so the state ends in the target's +1 eigenspace.
    pub fn pauli_reset<R: Rng + ?Sized>(
        &mut self,
        target: &PauliString,
        rng: &mut R,
    ) -> Result<()> {
        if target.is_identity_unsigned() {
            return Err(Error::IdentityReset);
        }
        let correction = reset_correction(target)?;
        let record = self.measure_pauli(target, rng)?;
        if record.outcome == -1 {
            self.apply_pauli(&correction)?;
        }
        Ok(())
    }

    /// Probability that measuring each target generator would yield +1, with
    /// post-selection after each one; equals ⟨ψ_target|ρ|ψ_target⟩ when n
    /// independent generators describe a pure target state. The result is
    /// always 0 or an exact dyadic 2^{-s}.
    pub fn projection_probability(&self, target_generators: &[PauliString]) -> Result<f64> {
        if target_generators.is_empty() {
            return Ok(1.0);
        }
        for g in target_generators {
            if g.num_qubits() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: g.num_qubits(),
                });
            }
            if !g.is_hermitian() || g.is_identity_unsigned() {
                return Err(Error::InvalidGenerators);
            }
        }
        for i in 0..target_generators.len() {
            for j in (i + 1)..target_generators.len() {
                if !target_generators[i].commutes_with(&target_generators[j]) {
                    return Err(Error::InvalidGenerators);
                }
            }
        }
        if gf2_rank(target_generators) < target_generators.len() {
            return Err(Error::InvalidGenerators);
        }
        self.projection_probability_unchecked(target_generators)
    }

    /// Projection without the generator validation; callers must guarantee
    /// Hermitian, independent, mutually commuting targets.
    pub(crate) fn projection_probability_unchecked(
        &self,
        target_generators: &[PauliString],
    ) -> Result<f64> {
        let mut scratch = self.clone();
        let mut prob = 1.0f64;
        for g in target_generators {
            let rec = scratch.measure_inner::<NoRng>(g, None)?;
            if rec.deterministic {
                if rec.outcome == -1 {
                    return Ok(0.0);
                }
            } else {
                prob *= 0.5;
            }
        }
        Ok(prob)
    }

    /// Structural invariants: correct pairing of (de)stabilizers. Row
    /// independence follows from the pairing.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.n;
        let anticom = |a: usize, b: usize| -> bool {
            let mut acc = 0u64;
            for q in 0..n {
                let c = self.col(q);
                let (xa, za) = (bit(&self.x[c..], a), bit(&self.z[c..], a));
                let (xb, zb) = (bit(&self.x[c..], b), bit(&self.z[c..], b));
                acc ^= (xa & zb) ^ (za & xb);
            }
            acc == 1
        };
        for i in 0..n {
            for j in 0..n {
                if anticom(n + i, n + j) {
                    return Err(format!("stabilizers {i} and {j} anticommute"));
                }
                if anticom(i, j) {
                    return Err(format!("destabilizers {i} and {j} anticommute"));
                }
                if anticom(i, n + j) != (i == j) {
                    return Err(format!(
                        "destabilizer {i} / stabilizer {j} pairing broken"
                    ));
                }
            }
        }
        Ok(())
    }
}

const STACK_ROW_WORDS: usize = 4;

#[inline]
fn stab_mask_word(n: usize, w: usize) -> u64 {
    // Bits for rows in [n, 2n) that fall in word w.
    range_mask_word(n, 2 * n, w)
}

#[inline]
fn destab_mask_word(n: usize, w: usize) -> u64 {
    range_mask_word(0, n, w)
}

#[inline]
fn range_mask_word(lo: usize, hi: usize, w: usize) -> u64 {
    let word_lo = w * 64;
    let a = lo.clamp(word_lo, word_lo + 64) - word_lo;
    let b = hi.clamp(word_lo, word_lo + 64) - word_lo;
    if a >= b {
        return 0;
    }
    let upper = if b == 64 { u64::MAX } else { (1u64 << b) - 1 };
    let lower = (1u64 << a) - 1;
    upper & !lower
}

/// Rank of the symplectic bit vectors of the given Paulis over GF(2).
fn gf2_rank(paulis: &[PauliString]) -> usize {
    let mut rows: Vec<Vec<u64>> = paulis
        .iter()
        .map(|p| {
            let mut v = p.x_words().to_vec();
            v.extend_from_slice(p.z_words());
            v
        })
        .collect();
    let words = rows[0].len();
    let mut rank = 0;
    for col in 0..words * 64 {
        let (cw, cb) = (col / 64, col % 64);
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][cw] >> cb & 1 == 1) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && rows[r][cw] >> cb & 1 == 1 {
                for k in 0..words {
                    let v = rows[rank][k];
                    rows[r][k] ^= v;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Stand-in RNG for forced measurements; never actually sampled.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("forced measurement must not consume randomness")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("forced measurement must not consume randomness")
    }
    fn fill_bytes(&mut self, _dest: &mut [u8]) {
        unreachable!("forced measurement must not consume randomness")
    }
}

/// Lookup-table form of a k-qubit Clifford action: one entry per unsigned
/// sub-Pauli giving the image bits and whether the sign flips.
#[derive(Debug, Clone)]
pub struct CompiledAction {
    k: usize,
    table: Vec<CompiledEntry>,
}

#[derive(Debug, Clone, Copy)]
struct CompiledEntry {
    x: u8,
    z: u8,
    negate: bool,
}

impl CompiledAction {
    pub fn compile(action: &CliffordAction) -> Result<CompiledAction> {
        action.validate()?;
        let k = action.num_qubits();
        if k > 2 {
            return Err(Error::UnsupportedQubitCount(
                k,
                "compiled actions support one or two qubits",
            ));
        }
        let mut table = Vec::with_capacity(1 << (2 * k));
        for idx in 0..1usize << (2 * k) {
            let mut p = PauliString::identity(k);
            for i in 0..k {
                p.set(
                    i,
                    Pauli::from_bits(idx >> (2 * i) & 1 == 1, idx >> (2 * i + 1) & 1 == 1),
                );
            }
            let img = action.apply_to(&p)?;
            let mut x = 0u8;
            let mut z = 0u8;
            for i in 0..k {
                x |= (img.x_bit(i) as u8) << i;
                z |= (img.z_bit(i) as u8) << i;
            }
            table.push(CompiledEntry {
                x,
                z,
                negate: img.phase() == Phase::MINUS_ONE,
            });
        }
        Ok(CompiledAction { k, table })
    }

    pub fn num_qubits(&self) -> usize {
        self.k
    }
}

impl fmt::Display for Tableau {
    /// Debug dump, one row per line, destabilizers then stabilizers.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..2 * self.n {
            writeln!(f, "{}", self.row_to_pauli(r))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(0xC0FFEE)
    }

    #[test]
    fn zero_state_measurements() {
        let mut t = Tableau::new_zero_state(1);
        let rec = t.measure_pauli(&ps("+Z"), &mut rng()).unwrap();
        assert_eq!(rec, MeasurementRecord { outcome: 1, deterministic: true });

        let t = Tableau::new_zero_state(3);
        let gens = vec![ps("+ZII"), ps("+IZI"), ps("+IIZ")];
        assert_eq!(t.projection_probability(&gens).unwrap(), 1.0);
    }

    #[test]
    fn product_state_vs_entangling_observable() {
        // |00⟩ against X⊗X: random, prob(+1) = 1/2.
        let mut t = Tableau::new_zero_state(2);
        let rec = t.measure_pauli(&ps("+XX"), &mut rng()).unwrap();
        assert!(!rec.deterministic);
        // Second measurement must repeat deterministically.
        let rec2 = t.measure_pauli(&ps("+XX"), &mut rng()).unwrap();
        assert!(rec2.deterministic);
        assert_eq!(rec2.outcome, rec.outcome);
    }

    #[test]
    fn hadamard_makes_z_random() {
        let mut plus = 0;
        for seed in 0..200 {
            let mut t = Tableau::new_zero_state(1);
            t.apply_h(0).unwrap();
            let mut r = ChaCha12Rng::seed_from_u64(seed);
            let rec = t.measure_pauli(&ps("+Z"), &mut r).unwrap();
            assert!(!rec.deterministic);
            if rec.outcome == 1 {
                plus += 1;
            }
        }
        assert!((60..=140).contains(&plus), "plus count {plus}");
    }

    #[test]
    fn bell_pair_stabilizers() {
        let mut t = Tableau::new_zero_state(2);
        t.apply_h(0).unwrap();
        t.apply_cnot(0, 1).unwrap();
        for obs in ["+XX", "+ZZ"] {
            let rec = t.measure_pauli(&ps(obs), &mut rng()).unwrap();
            assert_eq!(
                rec,
                MeasurementRecord { outcome: 1, deterministic: true },
                "observable {obs}"
            );
        }
        let rec = t.measure_pauli(&ps("+YY"), &mut rng()).unwrap();
        assert_eq!(rec.outcome, -1);
        assert!(rec.deterministic);
    }

    #[test]
    fn repeated_x_measurement_is_idempotent() {
        for seed in 0..20 {
            let mut t = Tableau::new_zero_state(1);
            let mut r = ChaCha12Rng::seed_from_u64(seed);
            let first = t.measure_pauli(&ps("+X"), &mut r).unwrap();
            assert!(!first.deterministic);
            let second = t.measure_pauli(&ps("+X"), &mut r).unwrap();
            assert!(second.deterministic);
            assert_eq!(second.outcome, first.outcome);
        }
    }

    #[test]
    fn reset_examples() {
        // reset(+Z) on |1⟩ → |0⟩.
        let mut t = Tableau::new_zero_state(1);
        t.apply_x(0).unwrap();
        t.pauli_reset(&ps("+Z"), &mut rng()).unwrap();
        let rec = t.measure_pauli(&ps("+Z"), &mut rng()).unwrap();
        assert_eq!(rec, MeasurementRecord { outcome: 1, deterministic: true });

        // reset(+Z) on |+⟩ → |0⟩ regardless of the sampled outcome.
        for seed in 0..20 {
            let mut t = Tableau::new_zero_state(1);
            t.apply_h(0).unwrap();
            let mut r = ChaCha12Rng::seed_from_u64(seed);
            t.pauli_reset(&ps("+Z"), &mut r).unwrap();
            let rec = t.measure_pauli(&ps("+Z"), &mut r).unwrap();
            assert_eq!(rec, MeasurementRecord { outcome: 1, deterministic: true });
        }

        // reset(+XX) on |00⟩ stabilizes X⊗X.
        for seed in 0..20 {
            let mut t = Tableau::new_zero_state(2);
            let mut r = ChaCha12Rng::seed_from_u64(seed);
            t.pauli_reset(&ps("+XX"), &mut r).unwrap();
            let rec = t.measure_pauli(&ps("+XX"), &mut r).unwrap();
            assert_eq!(rec, MeasurementRecord { outcome: 1, deterministic: true });
        }

        let mut t = Tableau::new_zero_state(2);
        assert!(t
            .pauli_reset(&PauliString::identity(2), &mut rng())
            .is_err());
    }

    #[test]
    fn projection_basics() {
        let t = Tableau::new_zero_state(1);
        assert_eq!(t.projection_probability(&[ps("+X")]).unwrap(), 0.5);
        assert_eq!(t.projection_probability(&[ps("-Z")]).unwrap(), 0.0);
        assert_eq!(t.projection_probability(&[ps("+Z")]).unwrap(), 1.0);
        // Projection takes no randomness and leaves the state untouched.
        assert_eq!(t.projection_probability(&[ps("+X")]).unwrap(), 0.5);

        // Non-commuting or dependent targets are rejected.
        let t = Tableau::new_zero_state(2);
        assert!(t.projection_probability(&[ps("+XI"), ps("+ZI")]).is_err());
        assert!(t.projection_probability(&[ps("+ZI"), ps("-ZI")]).is_err());
    }

    #[test]
    fn projection_is_dyadic() {
        let mut t = Tableau::new_zero_state(3);
        t.apply_h(0).unwrap();
        t.apply_cnot(0, 1).unwrap();
        t.apply_s(1).unwrap();
        let p = t
            .projection_probability(&[ps("+ZII"), ps("+IZI"), ps("+IIZ")])
            .unwrap();
        assert!(p == 0.0 || (p.log2().fract() == 0.0 && p <= 1.0), "p = {p}");
    }

    #[test]
    fn from_stabilizers_round_trip() {
        // Bell state specified by generators.
        let t = Tableau::from_stabilizers(&[ps("+XX"), ps("+ZZ")]).unwrap();
        t.check_invariants().unwrap();
        assert_eq!(
            t.projection_probability(&[ps("+XX"), ps("+ZZ")]).unwrap(),
            1.0
        );

        // Negative-sign generator.
        let t = Tableau::from_stabilizers(&[ps("-Z")]).unwrap();
        let mut r = rng();
        let mut t2 = t.clone();
        let rec = t2.measure_pauli(&ps("+Z"), &mut r).unwrap();
        assert_eq!(rec, MeasurementRecord { outcome: -1, deterministic: true });

        // Anticommuting generators are invalid.
        assert!(Tableau::from_stabilizers(&[ps("+XI"), ps("+ZI")]).is_err());
        // Dependent generators are invalid.
        assert!(Tableau::from_stabilizers(&[ps("+XX"), ps("+XX")]).is_err());
    }

    #[test]
    fn from_stabilizers_matches_circuit_construction() {
        use rand::Rng;
        let mut r = rng();
        for _ in 0..50 {
            let n = 1 + (r.random::<u32>() as usize) % 4;
            let mut t = Tableau::new_zero_state(n);
            for _ in 0..20 {
                match r.random::<u32>() % 3 {
                    0 => t.apply_h(r.random::<u32>() as usize % n).unwrap(),
                    1 => t.apply_s(r.random::<u32>() as usize % n).unwrap(),
                    _ => {
                        if n > 1 {
                            let a = r.random::<u32>() as usize % n;
                            let b = (a + 1 + r.random::<u32>() as usize % (n - 1)) % n;
                            t.apply_cnot(a, b).unwrap();
                        }
                    }
                }
            }
            let gens: Vec<PauliString> = t.stabilizers();
            let rebuilt = Tableau::from_stabilizers(&gens).unwrap();
            rebuilt.check_invariants().unwrap();
            // Same state: projection onto the generators is 1.
            assert_eq!(rebuilt.projection_probability(&gens).unwrap(), 1.0);
            assert_eq!(t.projection_probability(&gens).unwrap(), 1.0);
        }
    }

    #[test]
    fn invariants_hold_through_random_operation_sequences() {
        use rand::Rng;
        let mut r = rng();
        for _ in 0..30 {
            let n = 2 + (r.random::<u32>() as usize) % 3;
            let mut t = Tableau::new_zero_state(n);
            for _ in 0..40 {
                match r.random::<u32>() % 6 {
                    0 => t.apply_h(r.random::<u32>() as usize % n).unwrap(),
                    1 => t.apply_s(r.random::<u32>() as usize % n).unwrap(),
                    2 => {
                        let a = r.random::<u32>() as usize % n;
                        let b = (a + 1 + r.random::<u32>() as usize % (n - 1)) % n;
                        t.apply_cnot(a, b).unwrap();
                    }
                    3 => {
                        let q = r.random::<u32>() as usize % n;
                        let p = [Pauli::X, Pauli::Y, Pauli::Z][r.random::<u32>() as usize % 3];
                        let mut obs = PauliString::single(n, q, p);
                        if r.random() {
                            obs = obs.negated();
                        }
                        t.measure_pauli(&obs, &mut rng()).unwrap();
                    }
                    4 => {
                        let q = r.random::<u32>() as usize % n;
                        let p = [Pauli::X, Pauli::Y, Pauli::Z][r.random::<u32>() as usize % 3];
                        t.pauli_reset(&PauliString::single(n, q, p), &mut rng())
                            .unwrap();
                    }
                    _ => {
                        let q = r.random::<u32>() as usize % n;
                        t.apply_x(q).unwrap();
                    }
                }
                t.check_invariants().unwrap();
            }
        }
    }

    #[test]
    fn measurements_match_multiword_rows() {
        // Same operation sequence at n = 40 (one row word) and embedded at
        // n = 70 (three row words) must agree on outcomes.
        use rand::Rng;
        for seed in 0..5 {
            let mut r = ChaCha12Rng::seed_from_u64(seed);
            let mut small = Tableau::new_zero_state(40);
            let mut big = Tableau::new_zero_state(70);
            for _ in 0..60 {
                let q = r.random::<u32>() as usize % 40;
                match r.random::<u32>() % 4 {
                    0 => {
                        small.apply_h(q).unwrap();
                        big.apply_h(q).unwrap();
                    }
                    1 => {
                        small.apply_s(q).unwrap();
                        big.apply_s(q).unwrap();
                    }
                    2 => {
                        let p = (q + 1 + r.random::<u32>() as usize % 39) % 40;
                        small.apply_cnot(q, p).unwrap();
                        big.apply_cnot(q, p).unwrap();
                    }
                    _ => {
                        let obs_small = PauliString::single(40, q, Pauli::Z);
                        let obs_big = PauliString::single(70, q, Pauli::Z);
                        let mut ra = ChaCha12Rng::seed_from_u64(999 + seed);
                        let mut rb = ChaCha12Rng::seed_from_u64(999 + seed);
                        let a = small.measure_pauli(&obs_small, &mut ra).unwrap();
                        let b = big.measure_pauli(&obs_big, &mut rb).unwrap();
                        assert_eq!(a, b);
                    }
                }
            }
            small.check_invariants().unwrap();
            big.check_invariants().unwrap();
        }
    }

    #[test]
    fn compiled_action_matches_gate_fast_paths() {
        use crate::channels::CliffordAction;
        let cases: Vec<(CliffordAction, fn(&mut Tableau) -> Result<()>)> = vec![
            (CliffordAction::h(), |t| t.apply_h(1)),
            (CliffordAction::s(), |t| t.apply_s(1)),
            (CliffordAction::x(), |t| t.apply_x(1)),
        ];
        for (action, fast) in cases {
            let mut a = Tableau::new_zero_state(3);
            a.apply_h(0).unwrap();
            a.apply_cnot(0, 1).unwrap();
            a.apply_cnot(1, 2).unwrap();
            let mut b = a.clone();
            fast(&mut a).unwrap();
            b.apply_clifford(&action, &[1]).unwrap();
            assert_eq!(a, b);
        }
        // Two-qubit compiled action, reversed qubit order.
        let mut a = Tableau::new_zero_state(3);
        a.apply_h(2).unwrap();
        let mut b = a.clone();
        a.apply_cnot(2, 0).unwrap();
        b.apply_clifford(&CliffordAction::cnot(), &[2, 0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dump_format() {
        let t = Tableau::new_zero_state(2);
        let dump = format!("{t}");
        assert_eq!(dump, "+XI\n+IX\n+ZI\n+IZ\n");
    }

    #[test]
    fn measurement_cost_scales_quadratically() {
        // Loose slope check: doubling n must grow the per-measurement time
        // by clearly less than the cubic ratio.
        use std::time::Instant;
        let time_for = |n: usize| {
            let mut t = Tableau::new_zero_state(n);
            for q in 0..n {
                t.apply_h(q).unwrap();
            }
            let mut obs = PauliString::identity(n);
            for q in 0..n {
                obs.set(q, Pauli::Z);
            }
            let mut r = rng();
            let start = Instant::now();
            for _ in 0..200 {
                t.measure_pauli(&obs, &mut r).unwrap();
            }
            start.elapsed().as_secs_f64()
        };
        let t64 = time_for(64).max(1e-9);
        let t128 = time_for(128);
        assert!(
            t128 / t64 < 16.0,
            "measurement scaling ratio {:.1} looks worse than quadratic",
            t128 / t64
        );
    }
}
