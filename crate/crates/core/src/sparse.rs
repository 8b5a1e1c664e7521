//! Compressed-row sparse matrices and the direct LU solve behind every Newton
//! update and linear-implicit correction.
//!
//! Factorization is delegated to faer's sparse LU with partial pivoting. The
//! matrix is stored row-compressed, which faer reads as the column-compressed
//! transpose; systems are then solved with the transposed factors, so no copy
//! is made. Symbolic analyses are cached per sparsity pattern.

use std::cell::{Cell, RefCell};
use std::sync::{Arc, Weak};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;

use crate::error::{Error, Result};

/// Row pointers and sorted column indices of a CSR matrix.
#[derive(Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from (row, col) pairs; duplicates are merged.
    pub fn from_entries(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize)>) -> Self {
        entries.sort_unstable();
        entries.dedup();
        let mut row_ptr = vec![0; nrows + 1];
        for &(i, j) in &entries {
            assert!(i < nrows && j < ncols, "entry ({i}, {j}) outside {nrows}x{ncols}");
            row_ptr[i + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = entries.into_iter().map(|(_, j)| j).collect();
        Self { nrows, ncols, row_ptr, col_idx }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }
}

/// Sparse matrix in compressed-row form over a shared pattern.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), values.len(), "value array does not match pattern");
        Self { pattern, values }
    }

    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    /// Sums duplicate triplets.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let pattern = Arc::new(SparsityPattern::from_entries(
            nrows,
            ncols,
            triplets.iter().map(|&(i, j, _)| (i, j)).collect(),
        ));
        let mut m = Self::zeros(pattern);
        for &(i, j, v) in triplets {
            let k = m.pattern.find(i, j).expect("pattern built from these triplets");
            m.values[k] += v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t)
    }

    /// Stores every nonzero of a dense row-major matrix.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged dense matrix");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &t)
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pattern.row_range(i);
        self.pattern.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.mul_vec_add(x, &mut y);
        y
    }

    /// `y += A x`
    pub fn mul_vec_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.pattern.row_range(i);
            let mut s = 0.0;
            for k in r {
                s += self.values[k] * x[self.pattern.col_idx[k]];
            }
            *yi += s;
        }
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let ax = self.mul_vec(x);
        ax.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Overwrites row `i` with the identity row. The diagonal must be in the pattern.
    pub fn set_identity_row(&mut self, i: usize) {
        let diag = self.pattern.find(i, i).expect("identity row needs a stored diagonal");
        for k in self.pattern.row_range(i) {
            self.values[k] = 0.0;
        }
        self.values[diag] = 1.0;
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols()]; self.nrows()];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }
}

/// Counts of factorizations and back-solves on the current thread.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinearSolveCounts {
    pub factorizations: usize,
    pub solves: usize,
}

thread_local! {
    static COUNTS: Cell<LinearSolveCounts> = const { Cell::new(LinearSolveCounts { factorizations: 0, solves: 0 }) };
    static SYMBOLIC: RefCell<Vec<(Weak<SparsityPattern>, SymbolicLu<usize>)>> = const { RefCell::new(Vec::new()) };
}

pub fn solve_counts() -> LinearSolveCounts {
    COUNTS.with(Cell::get)
}

pub fn reset_solve_counts() {
    COUNTS.with(|c| c.set(LinearSolveCounts::default()));
}

fn bump(f: impl FnOnce(&mut LinearSolveCounts)) {
    COUNTS.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

/// LU factors of a square sparse matrix.
pub struct SparseFactorization {
    lu: Lu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for SparseFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseFactorization").field("n", &self.n).finish()
    }
}

fn transposed_view(a: &CsrMatrix) -> SparseColMatRef<'_, usize, f64> {
    let p = &a.pattern;
    let symbolic = SymbolicSparseColMatRef::new_checked(p.ncols, p.nrows, &p.row_ptr, None, &p.col_idx);
    SparseColMatRef::new(symbolic, &a.values)
}

fn symbolic_for(a: &CsrMatrix) -> Result<SymbolicLu<usize>> {
    SYMBOLIC.with(|cache| {
        let mut cache = cache.borrow_mut();
        cache.retain(|(w, _)| w.strong_count() > 0);
        if let Some((_, s)) = cache.iter().find(|(w, _)| std::ptr::eq(w.as_ptr(), Arc::as_ptr(&a.pattern))) {
            return Ok(s.clone());
        }
        let s = SymbolicLu::try_new(transposed_view(a).symbolic())
            .map_err(|e| Error::LinearSolver(format!("symbolic analysis failed: {e:?}")))?;
        cache.push((Arc::downgrade(&a.pattern), s.clone()));
        Ok(s)
    })
}

/// Factorizes `a`. Structurally singular matrices, and matrices whose
/// elimination hits an exact zero pivot, are reported with the pivot index.
pub fn factorize(a: &CsrMatrix) -> Result<SparseFactorization> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidInput(format!("cannot factorize a {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    if let Some(k) = a.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::LinearSolver(format!("non-finite matrix entry at position {k}")));
    }
    let symbolic = symbolic_for(a)?;
    let lu = Lu::try_new_with_symbolic(symbolic, transposed_view(a)).map_err(|e| match e {
        LuError::SymbolicSingular { index } => Error::SingularMatrix { pivot: index },
        LuError::Generic(g) => Error::LinearSolver(format!("{g:?}")),
    })?;
    bump(|c| c.factorizations += 1);
    let f = SparseFactorization { lu, n };

    // A zero pivot leaves non-finite entries in any solve; probe with A·1.
    let probe = a.mul_vec(&vec![1.0; n]);
    let x = f.solve_raw(&probe);
    if let Some(pivot) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix { pivot });
    }
    Ok(f)
}

impl SparseFactorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    fn solve_raw(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        let view = MatMut::from_column_major_slice_mut(&mut x, self.n, 1);
        self.lu.solve_transpose_in_place(view);
        x
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "right-hand side of length {} for a {}x{} system",
                rhs.len(),
                self.n,
                self.n
            )));
        }
        bump(|c| c.solves += 1);
        let x = self.solve_raw(rhs);
        if let Some(pivot) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { pivot });
        }
        Ok(x)
    }
}

pub fn back_solve(factors: &SparseFactorization, rhs: &[f64]) -> Result<Vec<f64>> {
    factors.solve(rhs)
}
