//! Small dense complex matrices for reference computations.
//!
//! Everything here is sized for at most a few qubits (dimensions up to 16,
//! superoperators up to 256); clarity over speed throughout.

use crate::pauli::{Pauli, PauliString, Phase};
use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut m = CMat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c);
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows);
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn dagger(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn kron(&self, other: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn approx_eq(&self, other: &CMat, tol: f64) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

fn single_pauli_matrix(p: Pauli) -> CMat {
    match p {
        Pauli::I => CMat::identity(2),
        Pauli::X => CMat::from_rows(&[&[c(0., 0.), c(1., 0.)], &[c(1., 0.), c(0., 0.)]]),
        Pauli::Y => CMat::from_rows(&[&[c(0., 0.), c(0., -1.)], &[c(0., 1.), c(0., 0.)]]),
        Pauli::Z => CMat::from_rows(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(-1., 0.)]]),
    }
}

/// Dense 2^n × 2^n matrix of a signed Pauli operator.
///
/// Qubit 0 is the least-significant bit of the computational-basis index,
/// so the tensor order is P(n−1) ⊗ … ⊗ P(0).
pub fn pauli_matrix(p: &PauliString) -> CMat {
    let n = p.num_qubits();
    let mut m = CMat::identity(1);
    for q in (0..n).rev() {
        m = m.kron(&single_pauli_matrix(p.get(q)));
    }
    let phase = match p.phase() {
        Phase::PLUS_ONE => c(1., 0.),
        Phase::PLUS_I => c(0., 1.),
        Phase::MINUS_ONE => c(-1., 0.),
        _ => c(0., -1.),
    };
    m.scale(phase)
}

/// Named single- and two-qubit gate matrices.
pub fn gate_matrix_h() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_rows(&[&[c(s, 0.), c(s, 0.)], &[c(s, 0.), c(-s, 0.)]])
}

pub fn gate_matrix_s() -> CMat {
    CMat::from_rows(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(0., 1.)]])
}

pub fn gate_matrix_rz(theta: f64) -> CMat {
    CMat::from_rows(&[
        &[c(1., 0.), c(0., 0.)],
        &[c(0., 0.), c(theta.cos(), theta.sin())],
    ])
}

pub fn gate_matrix_cnot() -> CMat {
    // Control qubit 0 (LSB), target qubit 1.
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = Complex64::ONE;
    m[(2, 2)] = Complex64::ONE;
    m[(1, 3)] = Complex64::ONE;
    m[(3, 1)] = Complex64::ONE;
    m
}

/// Lift a k-qubit unitary to n qubits at the given positions. `qubits[i]`
/// receives the role of the unitary's qubit i (its 2^i-weight index bit).
pub fn lift_unitary(u: &CMat, n: usize, qubits: &[usize]) -> CMat {
    let k = qubits.len();
    assert_eq!(u.rows, 1 << k);
    let dim = 1usize << n;
    let mut out = CMat::zeros(dim, dim);
    let rest_mask: usize = {
        let mut m = (1usize << n) - 1;
        for &q in qubits {
            m &= !(1 << q);
        }
        m
    };
    let extract = |full: usize| -> usize {
        let mut sub = 0usize;
        for (i, &q) in qubits.iter().enumerate() {
            sub |= ((full >> q) & 1) << i;
        }
        sub
    };
    let insert = |rest: usize, sub: usize| -> usize {
        let mut full = rest;
        for (i, &q) in qubits.iter().enumerate() {
            full |= ((sub >> i) & 1) << q;
        }
        full
    };
    for row in 0..dim {
        let rest = row & rest_mask;
        let sub_row = extract(row);
        for sub_col in 0..(1 << k) {
            let v = u[(sub_row, sub_col)];
            if v != Complex64::ZERO {
                out[(row, insert(rest, sub_col))] = v;
            }
        }
    }
    out
}
