//! Dense operators on tensor products of `ℂ²` with explicit space labels.
//!
//! The first label in a layout is the most significant tensor factor, so a
//! layout `[Aux(0), Site(1), …, Site(N)]` puts the auxiliary space outermost
//! and auxiliary block `(i, j)` sits at rows `i·2^N..`, columns `j·2^N..`.
//! Local 2- and 4-dimensional operators are applied through index kernels
//! rather than by materializing `I ⊗ … ⊗ op ⊗ … ⊗ I`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MabaError, Result};
use crate::scalars::{ModelParams, C, I, ONE, ZERO};

pub type Mat = DMatrix<C>;
pub type Vector = DVector<C>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Space {
    Aux(u8),
    Site(usize),
}

/// Sites `1..=n` in order.
pub fn sites(n: usize) -> Vec<Space> {
    (1..=n).map(Space::Site).collect()
}

/// Frobenius-norm relative residual `‖a − b‖ / (1 + max(‖a‖, ‖b‖))`.
pub fn rel_residual_mat(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / (1.0 + a.norm().max(b.norm()))
}

pub fn rel_residual_vec(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / (1.0 + a.norm().max(b.norm()))
}

/// Offsets of the `2^k` local basis states inside the full index, first
/// position most significant, and the list of base indices with all local
/// bits cleared.
fn local_offsets(positions: &[usize], nspaces: usize) -> (Vec<usize>, Vec<usize>) {
    let k = positions.len();
    let masks: Vec<usize> = positions.iter().map(|&p| 1usize << (nspaces - 1 - p)).collect();
    let offs: Vec<usize> = (0..1usize << k)
        .map(|l| (0..k).filter(|&t| l >> (k - 1 - t) & 1 == 1).map(|t| masks[t]).sum())
        .collect();
    let all: usize = masks.iter().sum();
    let bases = (0..1usize << nspaces).filter(|i| i & all == 0).collect();
    (offs, bases)
}

fn check_positions(op: &Mat, positions: &[usize], nspaces: usize) {
    let d = 1usize << positions.len();
    assert_eq!(op.nrows(), d, "local operator dimension");
    assert!(positions.iter().all(|&p| p < nspaces));
}

/// `mat ← (op on positions) · mat`.
pub fn apply_left(mat: &mut Mat, op: &Mat, positions: &[usize], nspaces: usize) {
    check_positions(op, positions, nspaces);
    let (offs, bases) = local_offsets(positions, nspaces);
    let d = offs.len();
    let mut buf = vec![ZERO; d];
    for col in 0..mat.ncols() {
        for &base in &bases {
            for (j, &o) in offs.iter().enumerate() {
                buf[j] = mat[(base + o, col)];
            }
            for (i, &oi) in offs.iter().enumerate() {
                let mut acc = ZERO;
                for j in 0..d {
                    acc += op[(i, j)] * buf[j];
                }
                mat[(base + oi, col)] = acc;
            }
        }
    }
}

/// `mat ← mat · (op on positions)`.
pub fn apply_right(mat: &mut Mat, op: &Mat, positions: &[usize], nspaces: usize) {
    check_positions(op, positions, nspaces);
    let (offs, bases) = local_offsets(positions, nspaces);
    let d = offs.len();
    let mut buf = vec![ZERO; d];
    for row in 0..mat.nrows() {
        for &base in &bases {
            for (j, &o) in offs.iter().enumerate() {
                buf[j] = mat[(row, base + o)];
            }
            for (i, &oi) in offs.iter().enumerate() {
                let mut acc = ZERO;
                for j in 0..d {
                    acc += buf[j] * op[(j, i)];
                }
                mat[(row, base + oi)] = acc;
            }
        }
    }
}

/// `vec ← (op on positions) · vec`.
pub fn apply_vec(vec: &mut Vector, op: &Mat, positions: &[usize], nspaces: usize) {
    let mut m = Mat::from_column_slice(vec.len(), 1, vec.as_slice());
    apply_left(&mut m, op, positions, nspaces);
    vec.copy_from_slice(m.as_slice());
}

/// Kronecker product of matrices, left factor most significant.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Kronecker product of a list of vectors.
pub fn kron_vecs(vs: &[Vector]) -> Vector {
    vs.iter().fold(Vector::from_element(1, ONE), |acc, v| acc.kronecker(v))
}

/// A dense operator on the tensor product of the labeled spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumOperator {
    layout: Vec<Space>,
    mat: Mat,
}

impl QuantumOperator {
    pub fn new(layout: Vec<Space>, mat: Mat) -> Result<Self> {
        let d = 1usize << layout.len();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(MabaError::LayoutMismatch(format!("{} spaces need dim {d}, got {}x{}", layout.len(), mat.nrows(), mat.ncols())));
        }
        let mut sorted = layout.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != layout.len() {
            return Err(MabaError::LayoutMismatch("repeated space label".into()));
        }
        Ok(Self { layout, mat })
    }

    pub fn identity(layout: Vec<Space>) -> Self {
        let d = 1usize << layout.len();
        Self { layout, mat: Mat::identity(d, d) }
    }

    pub fn zeros(layout: Vec<Space>) -> Self {
        let d = 1usize << layout.len();
        Self { layout, mat: Mat::zeros(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn layout(&self) -> &[Space] {
        &self.layout
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    pub fn into_matrix(self) -> Mat {
        self.mat
    }

    fn positions(&self, labels: &[Space]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| self.layout.iter().position(|x| x == l).ok_or_else(|| MabaError::LayoutMismatch(format!("{l:?} not in layout"))))
            .collect()
    }

    /// The local operator `op` (dimension `2^labels.len()`) acting on
    /// `labels`, embedded into `layout`.
    pub fn embed(op: &Mat, labels: &[Space], layout: Vec<Space>) -> Result<Self> {
        let mut out = Self::identity(layout);
        out.apply_left(op, labels)?;
        Ok(out)
    }

    /// `self ← op_labels · self`.
    pub fn apply_left(&mut self, op: &Mat, labels: &[Space]) -> Result<()> {
        let pos = self.positions(labels)?;
        if op.nrows() != 1 << labels.len() {
            return Err(MabaError::LayoutMismatch("local operator dimension".into()));
        }
        apply_left(&mut self.mat, op, &pos, self.layout.len());
        Ok(())
    }

    /// `self ← self · op_labels`.
    pub fn apply_right(&mut self, op: &Mat, labels: &[Space]) -> Result<()> {
        let pos = self.positions(labels)?;
        if op.nrows() != 1 << labels.len() {
            return Err(MabaError::LayoutMismatch("local operator dimension".into()));
        }
        apply_right(&mut self.mat, op, &pos, self.layout.len());
        Ok(())
    }

    fn same_layout(&self, other: &Self) -> Result<()> {
        if self.layout != other.layout {
            return Err(MabaError::LayoutMismatch(format!("{:?} vs {:?}", self.layout, other.layout)));
        }
        Ok(())
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same_layout(other)?;
        Ok(Self { layout: self.layout.clone(), mat: &self.mat * &other.mat })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_layout(other)?;
        Ok(Self { layout: self.layout.clone(), mat: &self.mat + &other.mat })
    }

    pub fn scale(&self, s: C) -> Self {
        Self { layout: self.layout.clone(), mat: &self.mat * s }
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut layout = self.layout.clone();
        layout.extend_from_slice(&other.layout);
        Self::new(layout, kron(&self.mat, &other.mat))
    }

    /// Trace over one 2-dimensional space.
    pub fn partial_trace(&self, label: Space) -> Result<Self> {
        let p = self.positions(&[label])?[0];
        let n = self.layout.len();
        let mask = 1usize << (n - 1 - p);
        let low = mask - 1;
        let d = 1usize << (n - 1);
        let insert = |r: usize, s: usize| ((r & !low) << 1) | (s * mask) | (r & low);
        let mat = Mat::from_fn(d, d, |r, c| self.mat[(insert(r, 0), insert(c, 0))] + self.mat[(insert(r, 1), insert(c, 1))]);
        let mut layout = self.layout.clone();
        layout.remove(p);
        Ok(Self { layout, mat })
    }

    /// Auxiliary-space block `(i, j)` of an operator whose first label is
    /// the auxiliary space.
    pub fn aux_block(&self, i: usize, j: usize) -> Mat {
        let h = self.dim() / 2;
        self.mat.view((i * h, j * h), (h, h)).into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

impl Pauli {
    pub fn matrix(self) -> Mat {
        let (z, o) = (ZERO, ONE);
        match self {
            Pauli::X => Mat::from_row_slice(2, 2, &[z, o, o, z]),
            Pauli::Y => Mat::from_row_slice(2, 2, &[z, -I, I, z]),
            Pauli::Z => Mat::from_row_slice(2, 2, &[o, z, z, -o]),
            Pauli::Plus => Mat::from_row_slice(2, 2, &[z, o, z, z]),
            Pauli::Minus => Mat::from_row_slice(2, 2, &[z, z, o, z]),
        }
    }
}

/// `I ⊗ … ⊗ σ ⊗ … ⊗ I` with `σ` on site `i` (1-based) of an `n`-site chain.
pub fn pauli_on_site(which: Pauli, i: usize, n: usize) -> Result<QuantumOperator> {
    if i == 0 || i > n {
        return Err(MabaError::IndexOutOfRange { index: i, len: n });
    }
    QuantumOperator::embed(&which.matrix(), &[Space::Site(i)], sites(n))
}

/// The six-vertex R-matrix on `V ⊗ V`: `b(qu)` in the corners, `b(u)` and `1`
/// in the central block.
pub fn r_matrix(u: C, model: &ModelParams) -> Mat {
    let (z, o) = (ZERO, ONE);
    let a = model.b(model.q * u);
    let bb = model.b(u);
    Mat::from_row_slice(4, 4, &[a, z, z, z, z, bb, o, z, z, o, bb, z, z, z, z, a])
}

/// The flip operator on `V ⊗ V`.
pub fn flip() -> Mat {
    let (z, o) = (ZERO, ONE);
    Mat::from_row_slice(4, 4, &[o, z, z, z, z, z, o, z, z, o, z, z, z, z, z, o])
}

/// Residual of the Yang–Baxter equation on `V_a ⊗ V_b ⊗ V_c`.
pub fn ybe_residual(model: &ModelParams, ua: C, ub: C, uc: C) -> f64 {
    let lay = vec![Space::Aux(0), Space::Aux(1), Space::Aux(2)];
    let (a, b, c) = (lay[0], lay[1], lay[2]);
    let mut lhs = QuantumOperator::identity(lay.clone());
    lhs.apply_left(&r_matrix(ub / uc, model), &[b, c]).unwrap();
    lhs.apply_left(&r_matrix(ua / uc, model), &[a, c]).unwrap();
    lhs.apply_left(&r_matrix(ua / ub, model), &[a, b]).unwrap();
    let mut rhs = QuantumOperator::identity(lay);
    rhs.apply_left(&r_matrix(ua / ub, model), &[a, b]).unwrap();
    rhs.apply_left(&r_matrix(ua / uc, model), &[a, c]).unwrap();
    rhs.apply_left(&r_matrix(ub / uc, model), &[b, c]).unwrap();
    rel_residual_mat(lhs.matrix(), rhs.matrix())
}
