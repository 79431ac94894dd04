//! Sparse symmetric positive definite solves on the free DOFs.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};

/// Numbering of the unconstrained DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    free: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl DofMap {
    /// `constrained[i]` marks prescribed DOFs.
    pub fn new(constrained: &[bool]) -> Self {
        let mut free = Vec::new();
        let mut slot = vec![None; constrained.len()];
        for (i, &c) in constrained.iter().enumerate() {
            if !c {
                slot[i] = Some(free.len());
                free.push(i);
            }
        }
        DofMap { free, slot }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn slot(&self, dof: usize) -> Option<usize> {
        self.slot[dof]
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Adds `scale * reduced` into the free entries of `full`.
    pub fn scatter_add(&self, reduced: &[f64], scale: f64, full: &mut [f64]) {
        for (&i, r) in self.free.iter().zip(reduced) {
            full[i] += scale * r;
        }
    }
}

/// Collects element contributions restricted to the free DOFs.
#[derive(Debug, Clone)]
pub struct FreeAssembly {
    coo: CooMatrix<f64>,
}

impl FreeAssembly {
    pub fn new(n: usize) -> Self {
        FreeAssembly {
            coo: CooMatrix::new(n, n),
        }
    }

    pub fn add_element<M>(&mut self, map: &DofMap, dofs: &[usize], ke: &M)
    where
        M: std::ops::Index<(usize, usize), Output = f64>,
    {
        for (a, &ia) in dofs.iter().enumerate() {
            let Some(ra) = map.slot(ia) else { continue };
            for (b, &ib) in dofs.iter().enumerate() {
                if let Some(rb) = map.slot(ib) {
                    self.coo.push(ra, rb, ke[(a, b)]);
                }
            }
        }
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        for i in 0..self.coo.nrows() {
            self.coo.push(i, i, shift);
        }
    }

    pub fn into_csc(self) -> CscMatrix<f64> {
        CscMatrix::from(&self.coo)
    }
}

/// Cholesky factor of a sparse SPD matrix.
pub struct SpdFactor {
    chol: CscCholesky<f64>,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdFactor").field("n", &self.chol.l().nrows()).finish()
    }
}

impl SpdFactor {
    pub fn factor(m: &CscMatrix<f64>) -> Result<Self> {
        CscCholesky::factor(m)
            .map(|chol| SpdFactor { chol })
            .map_err(|e| Error::Singular(format!("sparse Cholesky failed: {e:?}")))
    }

    /// Numeric refactorization for a matrix with the same pattern.
    pub fn refactor(&mut self, m: &CscMatrix<f64>) -> Result<()> {
        self.chol
            .refactor(m.values())
            .map_err(|e| Error::Singular(format!("sparse Cholesky failed: {e:?}")))
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = DMatrix::from_column_slice(b.len(), 1, b);
        self.chol.solve(&rhs).as_slice().to_vec()
    }
}

/// Solves `m x = b` for a symmetric `m` that may be only semidefinite: a
/// diagonal shift is added and grown until the factorization succeeds.
pub fn shifted_solve(m: &CscMatrix<f64>, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    if let Ok(f) = SpdFactor::factor(m) {
        return Ok((f.solve(b), 0.0));
    }
    let scale = m
        .triplet_iter()
        .filter(|(i, j, _)| i == j)
        .map(|(_, _, v)| v.abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut shift = 1e-10 * scale;
    for _ in 0..40 {
        let mut coo = CooMatrix::from(m);
        for i in 0..m.nrows() {
            coo.push(i, i, shift);
        }
        if let Ok(f) = SpdFactor::factor(&CscMatrix::from(&coo)) {
            return Ok((f.solve(b), shift));
        }
        shift *= 10.0;
    }
    Err(Error::Singular("no positive shift made the matrix definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn reduced_solve_matches_dense() {
        let map = DofMap::new(&[false, true, false, false]);
        assert_eq!(map.free(), &[0, 2, 3]);
        let k = Matrix3::new(4.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 2.0);
        let mut asm = FreeAssembly::new(3);
        // element over all four DOFs, entries on DOF 1 are dropped
        let mut ke = nalgebra::Matrix4::zeros();
        let order = [0, 2, 3];
        for a in 0..3 {
            for b in 0..3 {
                ke[(order[a], order[b])] = k[(a, b)];
            }
            ke[(1, order[a])] = 99.0;
        }
        asm.add_element(&map, &[0, 1, 2, 3], &ke);
        let f = SpdFactor::factor(&asm.into_csc()).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = f.solve(&b);
        let dense = k.lu().solve(&nalgebra::Vector3::from_column_slice(&b)).unwrap();
        for i in 0..3 {
            assert!((x[i] - dense[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_matrix_gets_shifted() {
        let mut coo = CooMatrix::new(2, 2);
        coo.push(0, 0, 1.0);
        coo.push(1, 1, 0.0);
        let (x, shift) = shifted_solve(&CscMatrix::from(&coo), &[1.0, 0.0]).unwrap();
        assert!(shift > 0.0);
        assert!((x[0] - 1.0).abs() < 1e-6);
    }
}
