//! Dense two-phase primal simplex with Bland's rule.
//!
//! Solves min c·x subject to A x = b, x ≥ 0. Sized for the stabilizer
//! channel dictionary problems (16×60 at one qubit, 256×23100 at two), so a
//! dense tableau is fine and Bland's anti-cycling rule keeps the pivot
//! logic simple and terminating.

/// Pivot tolerance for entering/leaving decisions.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: usize,
    /// Structural columns; artificials live at cols..cols+rows.
    cols: usize,
    width: usize,
    data: Vec<f64>,
    /// Basis variable per row.
    basis: Vec<usize>,
    /// Reduced-cost row, width entries; the last entry carries −objective.
    cost: Vec<f64>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let piv = self.data[row * w + col];
        let inv = 1.0 / piv;
        for j in 0..w {
            self.data[row * w + j] *= inv;
        }
        self.data[row * w + col] = 1.0;
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let factor = self.data[r * w + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..w {
                let v = self.data[row * w + j];
                self.data[r * w + j] -= factor * v;
            }
            self.data[r * w + col] = 0.0;
        }
        let factor = self.cost[col];
        if factor != 0.0 {
            for j in 0..w {
                let v = self.data[row * w + j];
                self.cost[j] -= factor * v;
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Bland's rule: enter the lowest-index improving column among the
    /// allowed range, leave by minimum ratio with lowest basis index on
    /// ties. Returns false when optimal.
    fn bland_step(&mut self, enter_limit: usize) -> bool {
        let Some(col) = (0..enter_limit).find(|&j| self.cost[j] < -PIVOT_TOL) else {
            return false;
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..self.rows {
            let a = self.at(r, col);
            if a > PIVOT_TOL {
                let ratio = self.rhs(r) / a;
                let better = match leave {
                    None => true,
                    Some(lr) => {
                        ratio < best_ratio - PIVOT_TOL
                            || (ratio < best_ratio + PIVOT_TOL && self.basis[r] < self.basis[lr])
                    }
                };
                if better {
                    leave = Some(r);
                    best_ratio = ratio;
                }
            }
        }
        let row = leave.expect("phase objectives are bounded; a leaving row must exist");
        self.pivot(row, col);
        true
    }

    fn objective(&self) -> f64 {
        -self.cost[self.width - 1]
    }
}

/// Solve min c·x s.t. A x = b, x ≥ 0 with A given row-major (rows × cols).
pub fn solve(a: &[f64], rows: usize, cols: usize, b: &[f64], c: &[f64], feas_tol: f64) -> LpOutcome {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows);
    assert_eq!(c.len(), cols);

    // Drop rows that are numerically zero; they are either redundant or
    // witness infeasibility outright.
    let mut keep = Vec::new();
    for r in 0..rows {
        let maxabs = (0..cols).fold(0.0f64, |m, j| m.max(a[r * cols + j].abs()));
        if maxabs <= 1e-14 {
            if b[r].abs() > feas_tol {
                return LpOutcome {
                    status: LpStatus::Infeasible,
                    x: vec![0.0; cols],
                    objective: f64::INFINITY,
                };
            }
        } else {
            keep.push(r);
        }
    }
    let m = keep.len();
    let width = cols + m + 1;
    let mut data = vec![0.0f64; m * width];
    for (i, &r) in keep.iter().enumerate() {
        let flip = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..cols {
            data[i * width + j] = flip * a[r * cols + j];
        }
        data[i * width + cols + i] = 1.0;
        data[i * width + width - 1] = flip * b[r];
    }
    let basis: Vec<usize> = (0..m).map(|i| cols + i).collect();

    // Phase 1: minimize the sum of artificials. Reduced costs start as
    // 0 − Σ_rows for structural columns.
    let mut cost = vec![0.0f64; width];
    for i in 0..m {
        for j in 0..width {
            cost[j] -= data[i * width + j];
        }
    }
    for i in 0..m {
        cost[cols + i] = 0.0;
    }
    let mut t = Tableau {
        rows: m,
        cols,
        width,
        data,
        basis,
        cost,
    };
    while t.bland_step(t.cols + m) {}
    if t.objective() > feas_tol {
        return LpOutcome {
            status: LpStatus::Infeasible,
            x: vec![0.0; cols],
            objective: f64::INFINITY,
        };
    }

    // Drive remaining artificials out of the basis where possible;
    // rows that cannot pivot are redundant and stay harmlessly at zero.
    for r in 0..m {
        if t.basis[r] >= cols {
            if let Some(j) = (0..cols).find(|&j| t.at(r, j).abs() > PIVOT_TOL) {
                t.pivot(r, j);
            }
        }
    }

    // Phase 2: the real objective. Artificial columns are excluded from
    // entering.
    let mut cost = vec![0.0f64; t.width];
    cost[..cols].copy_from_slice(c);
    for r in 0..m {
        let bv = t.basis[r];
        let cb = if bv < cols { c[bv] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..t.width {
                cost[j] -= cb * t.at(r, j);
            }
        }
    }
    for r in 0..m {
        cost[t.basis[r]] = 0.0;
    }
    t.cost = cost;
    while t.bland_step(t.cols) {}

    let mut x = vec![0.0f64; cols];
    for r in 0..m {
        if t.basis[r] < cols {
            x[t.basis[r]] = t.rhs(r);
        }
    }
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    LpOutcome {
        status: LpStatus::Optimal,
        x,
        objective,
    }
}
