//! Closed-loop matrices in the coordinates
//! `X = col{u, ŵ_1..ŵ_N0, e_1..e_N0, ŵ_{N0+1}..ŵ_N, e_{N0+1}..e_N}`.

use nalgebra::DMatrix;

use super::gains::{controller_matrix, observer_matrix, GainSet};
use crate::error::{Error, Result};
use crate::modal::ModalModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopMatrices {
    /// `(2N+1) × (2N+1)` system matrix.
    pub f: DMatrix<f64>,
    /// Column multiplying the tail output `ζ`.
    pub lcal: DMatrix<f64>,
    /// `[K0 + 𝖺, 0]`.
    pub ktilde: DMatrix<f64>,
    /// `𝓛 [0, C0, 0, C1]`.
    pub f1: DMatrix<f64>,
    /// `col{-B̃0, 0, B1, 0}`.
    pub bcal: DMatrix<f64>,
    /// `[K0, 0]`.
    pub khat: DMatrix<f64>,
    /// `col{0, L0}`.
    pub ltilde: DMatrix<f64>,
    /// `[-a, 0, ..., 0]`.
    pub a_row: DMatrix<f64>,
    pub n0: usize,
    pub n: usize,
}

impl ClosedLoopMatrices {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    /// The four diagonal blocks `Ã0 + B̃0K0`, `A0 - L0C0`, `A1`, `A1`.
    pub fn diagonal_blocks(&self) -> [DMatrix<f64>; 4] {
        let (n0, n) = (self.n0, self.n);
        let m1 = n - n0;
        let s = [0, n0 + 1, 2 * n0 + 1, 2 * n0 + 1 + m1];
        let sizes = [n0 + 1, n0, m1, m1];
        std::array::from_fn(|k| self.f.view((s[k], s[k]), (sizes[k], sizes[k])).into_owned())
    }
}

fn put(target: &mut DMatrix<f64>, row: usize, col: usize, block: &DMatrix<f64>) {
    target
        .view_mut((row, col), block.shape())
        .copy_from(block);
}

/// Assembles `F`, `𝓛`, `K̃0`, `F1`, `𝓑`, `K̂0`, `L̃0` and `𝖺` for `model` and `gains`.
pub fn assemble_closed_loop(model: &ModalModel, gains: &GainSet) -> Result<ClosedLoopMatrices> {
    let (n0, n) = (model.n0(), model.n());
    if gains.l0.len() != n0 || gains.k0.len() != n0 + 1 {
        return Err(Error::Dimension(format!(
            "gains do not match N0 = {n0} (|L0| = {}, |K0| = {})",
            gains.l0.len(),
            gains.k0.len()
        )));
    }
    let m1 = n - n0;
    let dim = 2 * n + 1;
    let (r0, r1, r2, r3) = (0, n0 + 1, 2 * n0 + 1, 2 * n0 + 1 + m1);
    let l0 = gains.l0_matrix();
    let k0 = gains.k0_matrix();
    let mut a_row = DMatrix::zeros(1, n0 + 1);
    a_row[(0, 0)] = -model.config.a;
    let mut ltilde = DMatrix::zeros(n0 + 1, 1);
    put(&mut ltilde, 1, 0, &l0);

    let mut f = DMatrix::zeros(dim, dim);
    put(&mut f, r0, r0, &controller_matrix(model, &k0));
    put(&mut f, r0, r1, &(&ltilde * &model.c0));
    put(&mut f, r1, r1, &observer_matrix(model, &l0));
    if m1 > 0 {
        put(&mut f, r0, r3, &(&ltilde * &model.c1));
        put(&mut f, r1, r3, &(-(&l0 * &model.c1)));
        put(&mut f, r2, r0, &(-(&model.b1 * (&k0 + &a_row))));
        put(&mut f, r2, r2, &model.a1);
        put(&mut f, r3, r3, &model.a1);
    }

    let mut lcal = DMatrix::zeros(dim, 1);
    put(&mut lcal, r0, 0, &ltilde);
    put(&mut lcal, r1, 0, &(-&l0));

    let mut ktilde = DMatrix::zeros(1, dim);
    put(&mut ktilde, 0, r0, &(&k0 + &a_row));
    let mut khat = DMatrix::zeros(1, dim);
    put(&mut khat, 0, r0, &k0);

    let mut out_row = DMatrix::zeros(1, dim);
    put(&mut out_row, 0, r1, &model.c0);
    if m1 > 0 {
        put(&mut out_row, 0, r3, &model.c1);
    }
    let f1 = &lcal * out_row;

    let mut bcal = DMatrix::zeros(dim, 1);
    put(&mut bcal, r0, 0, &(-&model.b_tilde0));
    if m1 > 0 {
        put(&mut bcal, r2, 0, &model.b1);
    }

    Ok(ClosedLoopMatrices {
        f,
        lcal,
        ktilde,
        f1,
        bcal,
        khat,
        ltilde,
        a_row,
        n0,
        n,
    })
}
