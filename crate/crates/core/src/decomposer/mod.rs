//! Stabilizer channel dictionary and minimal 1-norm decomposition.
//!
//! The dictionary holds every Clifford channel and every Pauli reset channel
//! at one or two qubits (24 + 6 and 11520 + 30 terms). Decomposing a channel
//! with the least Σ|q| is a linear program over the signed split q = q⁺ − q⁻;
//! the constructive per-basis-channel decompositions give an independent
//! completeness oracle.

mod simplex;

pub use simplex::{LpOutcome, LpStatus};

use crate::channels::{
    term_to_ptm, CliffordAction, Ptm, StabilizerChannelTerm, StabilizerDecomposition,
};
use crate::error::{Error, Result};
use crate::pauli::{comm_sign, pauli_basis, BasisIndex, PauliString, Phase};
use std::collections::HashMap;

pub use crate::channels::verify_decomposition;

/// Default feasibility tolerance for the linear program.
pub const DEFAULT_FEAS_TOL: f64 = 1e-9;

/// All distinct single- or two-qubit stabilizer channels: Cliffords first,
/// then Pauli resets, in a fixed enumeration order.
#[derive(Debug, Clone)]
pub struct ChannelDictionary {
    n: usize,
    terms: Vec<StabilizerChannelTerm>,
    num_cliffords: usize,
}

impl ChannelDictionary {
    pub fn new(n: usize) -> Result<Self> {
        let cliffords = enumerate_cliffords(n)?;
        let num_cliffords = cliffords.len();
        let mut terms: Vec<StabilizerChannelTerm> = cliffords
            .into_iter()
            .map(StabilizerChannelTerm::Clifford)
            .collect();
        terms.extend(
            enumerate_pauli_resets(n)?
                .into_iter()
                .map(StabilizerChannelTerm::PauliReset),
        );
        Ok(ChannelDictionary {
            n,
            terms,
            num_cliffords,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_cliffords(&self) -> usize {
        self.num_cliffords
    }

    pub fn num_resets(&self) -> usize {
        self.terms.len() - self.num_cliffords
    }

    pub fn terms(&self) -> &[StabilizerChannelTerm] {
        &self.terms
    }

    /// The term's PTM flattened row-major; built on demand.
    pub fn ptm_column(&self, idx: usize) -> Result<Vec<f64>> {
        Ok(term_to_ptm(&self.terms[idx])?.data().to_vec())
    }
}

/// The 24 single-qubit Clifford channels (closure of the H and S actions in
/// breadth-first order) or the 11520 two-qubit ones (iterating anticommuting
/// generator-image pairs).
pub fn enumerate_cliffords(n: usize) -> Result<Vec<CliffordAction>> {
    match n {
        1 => Ok(enumerate_cliffords_1q()),
        2 => Ok(enumerate_cliffords_2q()),
        _ => Err(Error::UnsupportedQubitCount(n, "dictionary supports 1 or 2")),
    }
}

fn action_key(a: &CliffordAction) -> Vec<(usize, i8)> {
    let mut key = Vec::with_capacity(2 * a.num_qubits());
    for k in 0..a.num_qubits() {
        for img in [a.image_of_x(k), a.image_of_z(k)] {
            key.push((BasisIndex::of(img).0, img.phase().sign().unwrap()));
        }
    }
    key
}

fn enumerate_cliffords_1q() -> Vec<CliffordAction> {
    let generators = [CliffordAction::h(), CliffordAction::s()];
    let identity = CliffordAction::identity(1);
    let mut seen: HashMap<Vec<(usize, i8)>, usize> = HashMap::new();
    let mut out = vec![identity.clone()];
    seen.insert(action_key(&identity), 0);
    let mut frontier = vec![identity];
    while let Some(current) = frontier.pop() {
        for g in &generators {
            let next = g.compose(&current).expect("same size");
            let key = action_key(&next);
            if !seen.contains_key(&key) {
                seen.insert(key, out.len());
                out.push(next.clone());
                frontier.push(next);
            }
        }
    }
    // Breadth-first-ish closure order is deterministic but stack-driven;
    // restore a stable order by the insertion sequence already in `out`.
    out
}

fn enumerate_cliffords_2q() -> Vec<CliffordAction> {
    let basis = pauli_basis(2);
    let signed = |idx: usize, neg: bool| -> PauliString {
        let p = basis[idx].clone();
        if neg {
            p.negated()
        } else {
            p
        }
    };
    let mut out = Vec::with_capacity(11520);
    for x1_idx in 1..16 {
        for x1_neg in [false, true] {
            let img_x1 = signed(x1_idx, x1_neg);
            for z1_idx in 1..16 {
                if basis[z1_idx].commutes_with(&basis[x1_idx]) {
                    continue;
                }
                for z1_neg in [false, true] {
                    let img_z1 = signed(z1_idx, z1_neg);
                    // Unsigned centralizer of the first pair: exactly
                    // {I, A, B, AB}; its non-identity members in index order.
                    let cent: Vec<usize> = (1..16)
                        .filter(|&u| {
                            basis[u].commutes_with(&basis[x1_idx])
                                && basis[u].commutes_with(&basis[z1_idx])
                        })
                        .collect();
                    debug_assert_eq!(cent.len(), 3);
                    for &x2_idx in &cent {
                        for x2_neg in [false, true] {
                            let img_x2 = signed(x2_idx, x2_neg);
                            for &z2_idx in &cent {
                                if basis[z2_idx].commutes_with(&basis[x2_idx]) {
                                    continue;
                                }
                                for z2_neg in [false, true] {
                                    let img_z2 = signed(z2_idx, z2_neg);
                                    let action = CliffordAction::from_images(
                                        vec![img_x1.clone(), img_x2.clone()],
                                        vec![img_z1.clone(), img_z2.clone()],
                                    )
                                    .expect("constructed pairs satisfy the relations");
                                    out.push(action);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// One reset per signed non-identity Pauli: 6 at one qubit, 30 at two.
pub fn enumerate_pauli_resets(n: usize) -> Result<Vec<PauliString>> {
    if n != 1 && n != 2 {
        return Err(Error::UnsupportedQubitCount(n, "dictionary supports 1 or 2"));
    }
    let mut out = Vec::new();
    for p in pauli_basis(n).into_iter().skip(1) {
        out.push(p.clone());
        out.push(p.negated());
    }
    Ok(out)
}

/// Raw LP solution over the dictionary.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub coefficients: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
}

/// Solve min Σ|q| subject to exact PTM reconstruction over the dictionary.
pub fn solve_min_norm_lp(
    channel: &Ptm,
    dict: &ChannelDictionary,
    feas_tol: f64,
) -> Result<LpSolution> {
    if channel.num_qubits() != dict.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: dict.num_qubits(),
            got: channel.num_qubits(),
        });
    }
    if !channel.is_trace_preserving(feas_tol) {
        return Err(Error::Infeasible {
            residual: (0..channel.dim())
                .map(|j| {
                    let expect = if j == 0 { 1.0 } else { 0.0 };
                    (channel.get(0, j) - expect).abs()
                })
                .fold(0.0, f64::max),
            tolerance: feas_tol,
        });
    }
    let m = dict.len();
    let dim2 = channel.dim() * channel.dim();
    // Constraint matrix [D | −D] over the split q = q⁺ − q⁻.
    let mut a = vec![0.0f64; dim2 * 2 * m];
    for t in 0..m {
        let col = dict.ptm_column(t)?;
        for (r, &v) in col.iter().enumerate() {
            a[r * 2 * m + t] = v;
            a[r * 2 * m + m + t] = -v;
        }
    }
    let b = channel.data().to_vec();
    let c = vec![1.0f64; 2 * m];
    let out = simplex::solve(&a, dim2, 2 * m, &b, &c, feas_tol);
    if out.status == LpStatus::Infeasible {
        return Err(Error::Infeasible {
            residual: f64::NAN,
            tolerance: feas_tol,
        });
    }
    let coefficients: Vec<f64> = (0..m).map(|t| out.x[t] - out.x[m + t]).collect();
    let objective = coefficients.iter().map(|q| q.abs()).sum();
    Ok(LpSolution {
        coefficients,
        objective,
        status: LpStatus::Optimal,
    })
}

/// Coefficients smaller than this are pruned from LP decompositions.
pub const PRUNE_TOL: f64 = 1e-12;

/// Minimal 1-norm stabilizer decomposition of a trace-preserving channel.
pub fn decompose_min_norm(
    channel: &Ptm,
    dict: &ChannelDictionary,
    feas_tol: f64,
) -> Result<StabilizerDecomposition> {
    let sol = solve_min_norm_lp(channel, dict, feas_tol)?;
    let mut terms = Vec::new();
    for (t, &q) in sol.coefficients.iter().enumerate() {
        if q.abs() >= PRUNE_TOL {
            terms.push((q, dict.terms()[t].clone()));
        }
    }
    let d = StabilizerDecomposition::new(dict.num_qubits(), terms)?;
    let residual = verify_decomposition(channel, &d)?;
    if residual > feas_tol.max(1e-7) {
        return Err(Error::Infeasible {
            residual,
            tolerance: feas_tol,
        });
    }
    Ok(d)
}

/// Constructive decomposition of the basis channel that maps the unsigned
/// Pauli `p` to `p_prime` and annihilates every other basis element.
///
/// For p ≠ I the terms are ±(1/4^n)·(C∘Q) over all Pauli conjugations Q,
/// with C the first dictionary Clifford mapping p to p_prime. For
/// p = p_prime = I the uniform Pauli mixture works. The non-unital target
/// (p = I, p_prime ≠ I) uses the reset channel and is supported at one
/// qubit, where R∘Q = R collapses the double sum to dictionary terms.
pub fn basis_channel_decomposition(
    p_prime: &PauliString,
    p: &PauliString,
    n: usize,
) -> Result<StabilizerDecomposition> {
    if p.num_qubits() != n || p_prime.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.num_qubits(),
        });
    }
    let p = p.unsigned();
    let p_prime = p_prime.unsigned();
    let scale = 1.0 / (1u64 << (2 * n)) as f64;
    let basis = pauli_basis(n);

    if p.is_identity_unsigned() {
        if p_prime.is_identity_unsigned() {
            // 1^(I,I): uniform mixture of all Pauli conjugations.
            let terms = basis
                .iter()
                .map(|q| {
                    (
                        scale,
                        StabilizerChannelTerm::Clifford(CliffordAction::from_pauli(q)),
                    )
                })
                .collect();
            return StabilizerDecomposition::new(n, terms);
        }
        // 1^(P', I) = R_{P'} − 1^(I,I); the reset absorbs the Q-sum only at
        // one qubit.
        if n != 1 {
            return Err(Error::UnsupportedQubitCount(
                n,
                "non-unital basis channels are built at n = 1",
            ));
        }
        let mut terms = vec![(1.0, StabilizerChannelTerm::PauliReset(p_prime.clone()))];
        for q in &basis {
            terms.push((
                -scale,
                StabilizerChannelTerm::Clifford(CliffordAction::from_pauli(q)),
            ));
        }
        return StabilizerDecomposition::new(n, terms);
    }
    if p_prime.is_identity_unsigned() {
        return Err(Error::DisallowedBasisChannel);
    }

    // Deterministic choice of C: first enumeration-order Clifford with
    // C(p) = +p_prime.
    let c = enumerate_cliffords(n)?
        .into_iter()
        .find(|c| {
            let img = c.apply_to(&p).expect("sizes match");
            img.unsigned() == p_prime && img.phase() == Phase::PLUS_ONE
        })
        .ok_or_else(|| Error::InvalidTerm("no Clifford maps p to p_prime".into()))?;
    let mut terms = Vec::with_capacity(basis.len());
    for q in &basis {
        let sign = comm_sign(&p, q)? as f64;
        let composed = c.compose(&CliffordAction::from_pauli(q))?;
        terms.push((
            sign * scale,
            StabilizerChannelTerm::Clifford(composed),
        ));
    }
    StabilizerDecomposition::new(n, terms)
}

/// The PTM a basis channel should reconstruct: a single 1 at the
/// (p_prime, p) entry.
pub fn basis_channel_ptm(p_prime: &PauliString, p: &PauliString, n: usize) -> Ptm {
    let mut out = Ptm::zeros(n);
    out.set(
        BasisIndex::of(&p_prime.unsigned()).0,
        BasisIndex::of(&p.unsigned()).0,
        1.0,
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{
        make_amplitude_damping, make_rotation_z, make_t_gate, Ptm,
    };
    use crate::dense::{self, CMat};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};

    #[test]
    fn single_qubit_dictionary_counts() {
        let dict = ChannelDictionary::new(1).unwrap();
        assert_eq!(dict.num_cliffords(), 24);
        assert_eq!(dict.num_resets(), 6);
        assert_eq!(dict.len(), 30);
    }

    #[test]
    fn single_qubit_terms_are_distinct() {
        let dict = ChannelDictionary::new(1).unwrap();
        let ptms: Vec<Vec<f64>> = (0..dict.len())
            .map(|i| dict.ptm_column(i).unwrap())
            .collect();
        for i in 0..ptms.len() {
            for j in (i + 1)..ptms.len() {
                let diff = ptms[i]
                    .iter()
                    .zip(&ptms[j])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                assert!(diff > 0.5, "terms {i} and {j} coincide");
            }
        }
        // Clifford PTMs are signed permutations.
        for i in 0..dict.num_cliffords() {
            let col = dict.ptm_column(i).unwrap();
            for r in 0..4 {
                let nonzero: Vec<f64> = (0..4)
                    .map(|c| col[r * 4 + c])
                    .filter(|v| *v != 0.0)
                    .collect();
                assert_eq!(nonzero.len(), 1);
                assert_eq!(nonzero[0].abs(), 1.0);
            }
        }
    }

    #[test]
    fn reset_terms_have_correct_targets() {
        let resets = enumerate_pauli_resets(1).unwrap();
        let shown: Vec<String> = resets.iter().map(|r| r.to_string()).collect();
        assert_eq!(shown, vec!["+X", "-X", "+Y", "-Y", "+Z", "-Z"]);
        assert_eq!(enumerate_pauli_resets(2).unwrap().len(), 30);
        assert!(enumerate_pauli_resets(3).is_err());
    }

    #[test]
    fn two_qubit_dictionary_counts() {
        let dict = ChannelDictionary::new(2).unwrap();
        assert_eq!(dict.num_cliffords(), 11520);
        assert_eq!(dict.num_resets(), 30);
        assert_eq!(dict.len(), 11550);
    }

    #[test]
    fn single_qubit_group_table_matches_dense_unitaries() {
        // Build the 24 single-qubit Clifford unitaries by closure of the
        // dense H and S matrices (up to global phase) and check that action
        // composition matches matrix multiplication; S∘S = Z in particular.
        let actions = enumerate_cliffords(1).unwrap();
        assert_eq!(actions.len(), 24);

        let canon = |m: &CMat| -> Vec<(i64, i64)> {
            // Normalize global phase by the first nonzero entry.
            let mut phase = None;
            for v in &m.data {
                if v.norm() > 1e-9 {
                    phase = Some(v / v.norm());
                    break;
                }
            }
            let ph = phase.unwrap();
            m.data
                .iter()
                .map(|v| {
                    let w = v / ph;
                    (
                        (w.re * 1e6).round() as i64,
                        (w.im * 1e6).round() as i64,
                    )
                })
                .collect()
        };
        let action_of = |u: &CMat| -> Vec<(usize, i8)> {
            let mut key = Vec::new();
            for p in ["+X", "+Z"] {
                let p: PauliString = p.parse().unwrap();
                let img = u.mul(&dense::pauli_matrix(&p)).mul(&u.dagger());
                let mut found = None;
                for cand_idx in 1..4 {
                    for sign in [1i8, -1] {
                        let cand = BasisIndex(cand_idx).to_pauli(1);
                        let cand = if sign < 0 { cand.negated() } else { cand };
                        if img.approx_eq(&dense::pauli_matrix(&cand), 1e-9) {
                            found = Some((cand_idx, sign));
                        }
                    }
                }
                key.push(found.expect("Clifford image must be a signed Pauli"));
            }
            key
        };

        // Closure over dense matrices.
        let mut unitaries: Vec<CMat> = vec![CMat::identity(2)];
        let mut seen = std::collections::HashSet::new();
        seen.insert(canon(&unitaries[0]));
        let mut frontier = vec![unitaries[0].clone()];
        let gens = [dense::gate_matrix_h(), dense::gate_matrix_s()];
        while let Some(u) = frontier.pop() {
            for g in &gens {
                let next = g.mul(&u);
                if seen.insert(canon(&next)) {
                    unitaries.push(next.clone());
                    frontier.push(next);
                }
            }
        }
        assert_eq!(unitaries.len(), 24);

        // Map action key → dense unitary.
        let mut by_key: HashMap<Vec<(usize, i8)>, CMat> = HashMap::new();
        for u in &unitaries {
            by_key.insert(action_of(u), u.clone());
        }
        assert_eq!(by_key.len(), 24);

        // Composition table agreement on every pair.
        for a in &actions {
            for b in &actions {
                let ab = a.compose(b).unwrap();
                let ua = &by_key[&action_key(a)];
                let ub = &by_key[&action_key(b)];
                let uab = ua.mul(ub);
                assert_eq!(action_key(&ab), action_of(&uab));
            }
        }

        // S∘S = Z.
        let s = CliffordAction::s();
        let ss = s.compose(&s).unwrap();
        assert_eq!(action_key(&ss), action_key(&CliffordAction::z()));
    }

    #[test]
    fn lp_recovers_t_gate_norm() {
        let dict = ChannelDictionary::new(1).unwrap();
        let t_ptm = Ptm::from_unitary(&dense::gate_matrix_rz(FRAC_PI_4)).unwrap();
        let d = decompose_min_norm(&t_ptm, &dict, DEFAULT_FEAS_TOL).unwrap();
        assert_abs_diff_eq!(d.one_norm(), SQRT_2, epsilon = 1e-8);
        assert!(verify_decomposition(&t_ptm, &d).unwrap() < 1e-9);
    }

    #[test]
    fn lp_on_dictionary_terms_gives_norm_one() {
        let dict = ChannelDictionary::new(1).unwrap();
        for idx in [0usize, 5, 23, 24, 29] {
            let ptm_vec = dict.ptm_column(idx).unwrap();
            let mut ptm = Ptm::zeros(1);
            for r in 0..4 {
                for c in 0..4 {
                    ptm.set(r, c, ptm_vec[r * 4 + c]);
                }
            }
            let d = decompose_min_norm(&ptm, &dict, DEFAULT_FEAS_TOL).unwrap();
            assert_abs_diff_eq!(d.one_norm(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn lp_matches_rotation_norm_on_claimed_range() {
        let dict = ChannelDictionary::new(1).unwrap();
        for theta in [std::f64::consts::PI / 16.0, FRAC_PI_8, FRAC_PI_4] {
            let ptm = Ptm::from_unitary(&dense::gate_matrix_rz(theta)).unwrap();
            let d = decompose_min_norm(&ptm, &dict, DEFAULT_FEAS_TOL).unwrap();
            assert_abs_diff_eq!(
                d.one_norm(),
                make_rotation_z(theta).one_norm(),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn lp_matches_amplitude_damping_norm() {
        let dict = ChannelDictionary::new(1).unwrap();
        let gamma = 0.1;
        let known = make_amplitude_damping(gamma).unwrap();
        let ptm = known.to_ptm().unwrap();
        let d = decompose_min_norm(&ptm, &dict, DEFAULT_FEAS_TOL).unwrap();
        assert_abs_diff_eq!(
            d.one_norm(),
            1.0 + 2.0 * known.negativity(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn lp_objective_is_a_lower_bound() {
        let dict = ChannelDictionary::new(1).unwrap();
        for d_known in [
            make_t_gate(),
            make_rotation_z(0.2),
            make_amplitude_damping(0.3).unwrap(),
        ] {
            let ptm = d_known.to_ptm().unwrap();
            let d = decompose_min_norm(&ptm, &dict, DEFAULT_FEAS_TOL).unwrap();
            assert!(d.one_norm() <= d_known.one_norm() + 1e-8);
        }
    }

    #[test]
    fn lp_rejects_non_trace_preserving() {
        let dict = ChannelDictionary::new(1).unwrap();
        let mut bad = Ptm::identity(1);
        bad.set(0, 1, 0.5);
        assert!(decompose_min_norm(&bad, &dict, DEFAULT_FEAS_TOL).is_err());
    }

    #[test]
    fn basis_channels_reconstruct_exactly() {
        // All 13 allowed single-qubit pairs.
        let basis = pauli_basis(1);
        let mut checked = 0;
        for p in &basis {
            for p_prime in &basis {
                if p_prime.is_identity_unsigned() && !p.is_identity_unsigned() {
                    assert!(basis_channel_decomposition(p_prime, p, 1).is_err());
                    continue;
                }
                let d = basis_channel_decomposition(p_prime, p, 1).unwrap();
                let target = basis_channel_ptm(p_prime, p, 1);
                let residual = verify_decomposition(&target, &d).unwrap();
                assert!(
                    residual < 1e-12,
                    "1^({p_prime},{p}) residual {residual}"
                );
                checked += 1;
            }
        }
        assert_eq!(checked, 13);
    }

    #[test]
    fn unital_basis_channels_reconstruct_at_two_qubits() {
        // Spot-check the P ≠ I construction at n = 2.
        let p: PauliString = "+XZ".parse().unwrap();
        let p_prime: PauliString = "+YI".parse().unwrap();
        let d = basis_channel_decomposition(&p_prime, &p, 2).unwrap();
        let target = basis_channel_ptm(&p_prime, &p, 2);
        assert!(verify_decomposition(&target, &d).unwrap() < 1e-12);
    }

    #[test]
    fn random_tp_channels_are_feasible() {
        use rand::{Rng, SeedableRng};
        let dict = ChannelDictionary::new(1).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        for _ in 0..5 {
            let kraus = random_kraus_pair(&mut rng);
            let ptm = Ptm::from_kraus(&kraus).unwrap();
            let d = decompose_min_norm(&ptm, &dict, DEFAULT_FEAS_TOL).unwrap();
            assert!(verify_decomposition(&ptm, &d).unwrap() < 1e-9);
        }
    }

    /// Random single-qubit channel from a Haar-ish random isometry: QR of a
    /// 4×2 complex Gaussian matrix, split into two Kraus operators.
    pub(crate) fn random_kraus_pair<R: rand::Rng>(rng: &mut R) -> Vec<CMat> {
        // Gram-Schmidt on two Gaussian 4-vectors.
        let mut cols: Vec<Vec<num_complex::Complex64>> = (0..2)
            .map(|_| {
                (0..4)
                    .map(|_| {
                        num_complex::Complex64::new(
                            gaussian(rng),
                            gaussian(rng),
                        )
                    })
                    .collect()
            })
            .collect();
        // Normalize col 0.
        let norm0: f64 = cols[0].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for v in cols[0].iter_mut() {
            *v /= norm0;
        }
        // Orthogonalize col 1 against col 0.
        let dot: num_complex::Complex64 = cols[0]
            .iter()
            .zip(&cols[1])
            .map(|(a, b)| a.conj() * b)
            .sum();
        let c0 = cols[0].clone();
        for (v, u) in cols[1].iter_mut().zip(&c0) {
            *v -= dot * u;
        }
        let norm1: f64 = cols[1].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for v in cols[1].iter_mut() {
            *v /= norm1;
        }
        // Isometry V: 2 → 4; Kraus E_k[(i, j)] = V[(2k + i, j)].
        (0..2)
            .map(|k| {
                let mut e = CMat::zeros(2, 2);
                for i in 0..2 {
                    for j in 0..2 {
                        e[(i, j)] = cols[j][2 * k + i];
                    }
                }
                e
            })
            .collect()
    }

    fn gaussian<R: rand::Rng>(rng: &mut R) -> f64 {
        // Box-Muller; plenty for test channel generation.
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
