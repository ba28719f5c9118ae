//! Exact dense linear algebra over `F_q`: row-reduced echelon forms, kernels,
//! canonical subspaces, and the block-lower-triangular-Toeplitz ("BTT") and
//! periodic block matrix families used by the structured list decoder.

use std::sync::Arc;

use crate::error::{Error, Result, StructureDefect};
use crate::gf::{Fq, FqField};

/// Dense row-major matrix over `F_q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GfMatrix {
    field: Arc<FqField>,
    rows: usize,
    cols: usize,
    data: Vec<Fq>,
}

impl GfMatrix {
    pub fn zero(field: Arc<FqField>, rows: usize, cols: usize) -> Self {
        GfMatrix { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: Arc<FqField>, n: usize) -> Self {
        let mut m = Self::zero(field, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(field: Arc<FqField>, rows: Vec<Vec<Fq>>) -> Result<Self> {
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let q = field.q() as Fq;
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in &rows {
            if r.len() != cols {
                return Err(Error::Incompatible("ragged rows".into()));
            }
            for &v in r {
                if v >= q {
                    return Err(Error::Incompatible(format!(
                        "entry {v} out of range for F_{}",
                        field.q()
                    )));
                }
            }
            data.extend_from_slice(r);
        }
        Ok(GfMatrix { field, rows: rows.len(), cols, data })
    }

    /// Rows `e_i` for `i` in `range`, as an `|range| x n` matrix.
    pub fn unit_rows(field: Arc<FqField>, n: usize, range: std::ops::Range<usize>) -> Self {
        let mut m = Self::zero(field, range.len(), n);
        for (r, i) in range.enumerate() {
            m.set(r, i, 1);
        }
        m
    }

    pub fn field(&self) -> &Arc<FqField> {
        &self.field
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Fq {
        self.data[r * self.cols + c]
    }
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Fq) {
        self.data[r * self.cols + c] = v;
    }
    pub fn row(&self, r: usize) -> &[Fq] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn transpose(&self) -> GfMatrix {
        let mut out = GfMatrix::zero(self.field.clone(), self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn vstack(&self, other: &GfMatrix) -> Result<GfMatrix> {
        if self.cols != other.cols || self.field != other.field {
            return Err(Error::Incompatible("vstack needs equal widths over one field".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(GfMatrix { field: self.field.clone(), rows: self.rows + other.rows, cols: self.cols, data })
    }

    pub fn hstack(&self, other: &GfMatrix) -> Result<GfMatrix> {
        if self.rows != other.rows || self.field != other.field {
            return Err(Error::Incompatible("hstack needs equal heights over one field".into()));
        }
        let mut out = GfMatrix::zero(self.field.clone(), self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(r, c, self.get(r, c));
            }
            for c in 0..other.cols {
                out.set(r, self.cols + c, other.get(r, c));
            }
        }
        Ok(out)
    }

    pub fn select_rows(&self, which: &[usize]) -> GfMatrix {
        let mut out = GfMatrix::zero(self.field.clone(), which.len(), self.cols);
        for (r, &src) in which.iter().enumerate() {
            for c in 0..self.cols {
                out.set(r, c, self.get(src, c));
            }
        }
        out
    }

    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> GfMatrix {
        let mut out = GfMatrix::zero(self.field.clone(), r1 - r0, c1 - c0);
        for r in r0..r1 {
            for c in c0..c1 {
                out.set(r - r0, c - c0, self.get(r, c));
            }
        }
        out
    }

    pub fn mul(&self, other: &GfMatrix) -> Result<GfMatrix> {
        if self.cols != other.rows || self.field != other.field {
            return Err(Error::Incompatible(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = &*self.field;
        let mut out = GfMatrix::zero(self.field.clone(), self.rows, other.cols);
        for r in 0..self.rows {
            for t in 0..self.cols {
                let a = self.get(r, t);
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let b = other.get(t, c);
                    if b != 0 {
                        let cur = out.get(r, c);
                        out.set(r, c, f.add(cur, f.mul(a, b)));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix times column vector.
    pub fn mul_vec(&self, v: &[Fq]) -> Vec<Fq> {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        let f = &*self.field;
        let mut out = vec![0 as Fq; self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            let mut s: Fq = 0;
            for (a, &x) in row.iter().zip(v) {
                if *a != 0 && x != 0 {
                    s = f.add(s, f.mul(*a, x));
                }
            }
            out[r] = s;
        }
        out
    }

    /// Row-reduced echelon form and its pivot columns.
    pub fn rref(&self) -> (GfMatrix, Vec<usize>) {
        let f = self.field.clone();
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0usize;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let pivot_row = (row..m.rows).find(|&r| m.get(r, col) != 0);
            let Some(pr) = pivot_row else { continue };
            if pr != row {
                for c in 0..m.cols {
                    let tmp = m.get(row, c);
                    m.set(row, c, m.get(pr, c));
                    m.set(pr, c, tmp);
                }
            }
            let inv = f.inv(m.get(row, col));
            if inv != 1 {
                for c in col..m.cols {
                    m.set(row, c, f.mul(m.get(row, c), inv));
                }
            }
            for r in 0..m.rows {
                if r == row {
                    continue;
                }
                let factor = m.get(r, col);
                if factor == 0 {
                    continue;
                }
                for c in col..m.cols {
                    let v = f.sub(m.get(r, c), f.mul(factor, m.get(row, c)));
                    m.set(r, c, v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Canonical basis of `{ x : M x = 0 }`.
    pub fn kernel_basis(&self) -> GfSubspace {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let f = &*self.field;
        let mut rows = Vec::with_capacity(free.len());
        for &fc in &free {
            let mut v = vec![0 as Fq; self.cols];
            v[fc] = 1;
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = f.neg(r.get(i, fc));
            }
            rows.push(v);
        }
        GfSubspace::from_rows(self.field.clone(), self.cols, rows)
            .expect("kernel rows are well formed")
    }

    /// One solution of `M x = rhs` with free variables set to zero, if any.
    pub fn solve_particular(&self, rhs: &[Fq]) -> Result<Option<Vec<Fq>>> {
        if rhs.len() != self.rows {
            return Err(Error::Incompatible("right-hand side length mismatch".into()));
        }
        let mut rhs_m = GfMatrix::zero(self.field.clone(), self.rows, 1);
        for (r, &v) in rhs.iter().enumerate() {
            rhs_m.set(r, 0, v);
        }
        let aug = self.hstack(&rhs_m)?;
        let (red, pivots) = aug.rref();
        if pivots.contains(&self.cols) {
            return Ok(None);
        }
        let mut x = vec![0 as Fq; self.cols];
        for (i, &pc) in pivots.iter().enumerate() {
            x[pc] = red.get(i, self.cols);
        }
        Ok(Some(x))
    }
}

/// Linear subspace of `F_q^n` held as a row-reduced basis, so equal subspaces
/// compare equal structurally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GfSubspace {
    ambient: usize,
    basis: GfMatrix,
    pivots: Vec<usize>,
}

impl GfSubspace {
    pub fn from_rows(field: Arc<FqField>, ambient: usize, rows: Vec<Vec<Fq>>) -> Result<Self> {
        for r in &rows {
            if r.len() != ambient {
                return Err(Error::Incompatible("spanning row has wrong length".into()));
            }
        }
        let m = GfMatrix::from_rows(field.clone(), rows)?;
        if m.rows() == 0 {
            return Ok(GfSubspace {
                ambient,
                basis: GfMatrix::zero(field, 0, ambient),
                pivots: Vec::new(),
            });
        }
        if m.cols() != ambient {
            return Err(Error::Incompatible("spanning row has wrong length".into()));
        }
        let (red, pivots) = m.rref();
        let keep: Vec<usize> = (0..pivots.len()).collect();
        let basis = red.select_rows(&keep);
        Ok(GfSubspace { ambient, basis, pivots })
    }

    pub(crate) fn from_rref_unchecked(basis: GfMatrix, pivots: Vec<usize>) -> Self {
        GfSubspace { ambient: basis.cols(), basis, pivots }
    }

    pub fn zero_space(field: Arc<FqField>, ambient: usize) -> Self {
        GfSubspace { ambient, basis: GfMatrix::zero(field, 0, ambient), pivots: Vec::new() }
    }

    pub fn full(field: Arc<FqField>, ambient: usize) -> Self {
        GfSubspace {
            ambient,
            basis: GfMatrix::identity(field, ambient),
            pivots: (0..ambient).collect(),
        }
    }

    pub fn field(&self) -> &Arc<FqField> {
        self.basis.field()
    }
    pub fn ambient(&self) -> usize {
        self.ambient
    }
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }
    pub fn codim(&self) -> usize {
        self.ambient - self.dim()
    }
    pub fn basis(&self) -> &GfMatrix {
        &self.basis
    }
    pub fn pivot_columns(&self) -> &[usize] {
        &self.pivots
    }

    pub fn contains(&self, v: &[Fq]) -> bool {
        assert_eq!(v.len(), self.ambient);
        let f = &**self.field();
        let mut work = v.to_vec();
        for (i, &pc) in self.pivots.iter().enumerate() {
            let c = work[pc];
            if c != 0 {
                let row = self.basis.row(i);
                for (w, &b) in work.iter_mut().zip(row) {
                    *w = f.sub(*w, f.mul(c, b));
                }
            }
        }
        work.iter().all(|&x| x == 0)
    }

    /// Matrix `N` with `V = { x : N x = 0 }`.
    pub fn constraints(&self) -> GfMatrix {
        self.basis.kernel_basis().basis
    }

    pub fn intersect(&self, other: &GfSubspace) -> Result<GfSubspace> {
        if self.ambient != other.ambient || self.field() != other.field() {
            return Err(Error::Incompatible("intersection needs one common ambient space".into()));
        }
        let n = self.constraints().vstack(&other.constraints())?;
        Ok(n.kernel_basis())
    }

    pub fn sum(&self, other: &GfSubspace) -> Result<GfSubspace> {
        if self.ambient != other.ambient || self.field() != other.field() {
            return Err(Error::Incompatible("sum needs one common ambient space".into()));
        }
        let mut rows: Vec<Vec<Fq>> = Vec::new();
        for r in 0..self.dim() {
            rows.push(self.basis.row(r).to_vec());
        }
        for r in 0..other.dim() {
            rows.push(other.basis.row(r).to_vec());
        }
        GfSubspace::from_rows(self.field().clone(), self.ambient, rows)
    }

    /// Block-diagonal `k`-fold power: `{ (w_1, ..., w_k) : w_i ∈ V }`.
    pub fn direct_power(&self, k: usize) -> GfSubspace {
        let n = self.ambient;
        let mut rows = Vec::with_capacity(k * self.dim());
        for block in 0..k {
            for r in 0..self.dim() {
                let mut v = vec![0 as Fq; k * n];
                v[block * n..(block + 1) * n].copy_from_slice(self.basis.row(r));
                rows.push(v);
            }
        }
        GfSubspace::from_rows(self.field().clone(), k * n, rows).expect("well formed")
    }

    /// Intersects with `0^(n-keep) x F_q^keep` and drops the zero prefix,
    /// identifying the suffix coordinates with `F_q^keep`.
    pub fn restrict_suffix(&self, keep: usize) -> Result<GfSubspace> {
        if keep > self.ambient {
            return Err(Error::InvalidParameter("suffix longer than ambient".into()));
        }
        let drop = self.ambient - keep;
        let prefix =
            GfMatrix::unit_rows(self.field().clone(), self.ambient, 0..drop);
        let coord = prefix.kernel_basis(); // suffix coordinate subspace
        let inter = self.intersect(&coord)?;
        let rows: Vec<Vec<Fq>> =
            (0..inter.dim()).map(|r| inter.basis.row(r)[drop..].to_vec()).collect();
        GfSubspace::from_rows(self.field().clone(), keep, rows)
    }
}

/// Finds some `u' ∈ (u + V) ∩ W` and returns it with `V ∩ W`; the affine part
/// is `None` when the intersection is empty.
pub fn affine_intersect(
    u: &[Fq],
    v: &GfSubspace,
    w: &GfSubspace,
) -> Result<(Option<Vec<Fq>>, GfSubspace)> {
    if u.len() != v.ambient() || v.ambient() != w.ambient() {
        return Err(Error::Incompatible("affine intersection needs one ambient space".into()));
    }
    let inter = v.intersect(w)?;
    let f = &**v.field();
    let nw = w.constraints();
    // Solve N_W (u + c^T B_V) = 0 for coefficients c.
    let a = nw.mul(&v.basis().transpose())?;
    let rhs: Vec<Fq> = nw.mul_vec(u).iter().map(|&x| f.neg(x)).collect();
    let Some(c) = a.solve_particular(&rhs)? else {
        return Ok((None, inter));
    };
    let mut u2 = u.to_vec();
    for (i, &ci) in c.iter().enumerate() {
        if ci == 0 {
            continue;
        }
        let row = v.basis().row(i);
        for (t, &b) in u2.iter_mut().zip(row) {
            *t = f.add(*t, f.mul(ci, b));
        }
    }
    debug_assert!(w.contains(&u2));
    Ok((Some(u2), inter))
}

/// Down-shift by one block: `(v_1, ..., v_k) -> (0, v_1, ..., v_{k-1})`.
pub fn block_shift(v: &[Fq], k: usize, m: usize) -> Result<Vec<Fq>> {
    if v.len() != k * m {
        return Err(Error::Incompatible(format!(
            "vector length {} is not k*m = {}",
            v.len(),
            k * m
        )));
    }
    let mut out = vec![0 as Fq; k * m];
    out[m..].copy_from_slice(&v[..(k - 1) * m]);
    Ok(out)
}

/// Block-lower-triangular block-Toeplitz matrix with `k` block rows of shape
/// `a x b`, determined by its first column-group `M_1, ..., M_k`; `M_1` has
/// full rank `min(a, b)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BttMatrix {
    k: usize,
    a: usize,
    b: usize,
    blocks: Vec<GfMatrix>,
}

impl BttMatrix {
    pub fn new(k: usize, a: usize, b: usize, blocks: Vec<GfMatrix>) -> Result<Self> {
        if k == 0 || blocks.len() != k {
            return Err(Error::InvalidParameter(format!(
                "need k >= 1 blocks, got k = {k}, {} blocks",
                blocks.len()
            )));
        }
        for blk in &blocks {
            if blk.rows() != a || blk.cols() != b {
                return Err(Error::Structure(StructureDefect::BadShape {
                    rows: blk.rows(),
                    cols: blk.cols(),
                    k: 1,
                    a,
                    b,
                }));
            }
        }
        let need = a.min(b);
        let rank = blocks[0].rank();
        if rank != need {
            return Err(Error::Structure(StructureDefect::LeadingBlockRankDeficient {
                rank,
                need,
            }));
        }
        Ok(BttMatrix { k, a, b, blocks })
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn block_rows(&self) -> usize {
        self.a
    }
    pub fn block_cols(&self) -> usize {
        self.b
    }
    pub fn blocks(&self) -> &[GfMatrix] {
        &self.blocks
    }
    pub fn field(&self) -> &Arc<FqField> {
        self.blocks[0].field()
    }

    /// The full `(k a) x (k b)` matrix with block `(i, j) = M_{i - j + 1}`.
    pub fn assemble(&self) -> GfMatrix {
        let mut out = GfMatrix::zero(self.field().clone(), self.k * self.a, self.k * self.b);
        for i in 0..self.k {
            for j in 0..=i {
                let blk = &self.blocks[i - j];
                for r in 0..self.a {
                    for c in 0..self.b {
                        out.set(i * self.a + r, j * self.b + c, blk.get(r, c));
                    }
                }
            }
        }
        out
    }

    /// Column space of the assembled matrix.
    pub fn image(&self) -> GfSubspace {
        let asm = self.assemble();
        let t = asm.transpose();
        let rows: Vec<Vec<Fq>> = (0..t.rows()).map(|r| t.row(r).to_vec()).collect();
        GfSubspace::from_rows(self.field().clone(), self.k * self.a, rows).expect("well formed")
    }
}

/// Splits a full matrix into BTT form, reporting the first violated condition.
pub fn btt_validate(mat: &GfMatrix, k: usize, a: usize, b: usize) -> Result<BttMatrix> {
    if k == 0 || mat.rows() != k * a || mat.cols() != k * b {
        return Err(Error::Structure(StructureDefect::BadShape {
            rows: mat.rows(),
            cols: mat.cols(),
            k,
            a,
            b,
        }));
    }
    let block = |i: usize, j: usize| mat.submatrix(i * a, (i + 1) * a, j * b, (j + 1) * b);
    for i in 0..k {
        for j in (i + 1)..k {
            if !block(i, j).is_zero() {
                return Err(Error::Structure(StructureDefect::NotLowerTriangular {
                    i: i + 1,
                    j: j + 1,
                }));
            }
        }
    }
    for i in 1..k {
        for j in 1..=i {
            if block(i, j) != block(i - 1, j - 1) {
                return Err(Error::Structure(StructureDefect::NotToeplitz { i: i + 1, j: j + 1 }));
            }
        }
    }
    let blocks: Vec<GfMatrix> = (0..k).map(|i| block(i, 0)).collect();
    BttMatrix::new(k, a, b, blocks)
}

/// Periodic block matrix: `k` column-groups of width `b`, each `(k a)` tall,
/// group `j` starting with `j - 1` zero blocks followed by a shared diagonal
/// block; below-diagonal blocks are unconstrained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicMatrix {
    k: usize,
    a: usize,
    b: usize,
    columns: Vec<GfMatrix>,
}

impl PeriodicMatrix {
    pub fn new(k: usize, a: usize, b: usize, columns: Vec<GfMatrix>) -> Result<Self> {
        if k == 0 || columns.len() != k {
            return Err(Error::InvalidParameter(format!(
                "need k >= 1 column groups, got k = {k}, {}",
                columns.len()
            )));
        }
        for col in &columns {
            if col.rows() != k * a || col.cols() != b {
                return Err(Error::Structure(StructureDefect::BadShape {
                    rows: col.rows(),
                    cols: col.cols(),
                    k,
                    a,
                    b,
                }));
            }
        }
        let diag = columns[0].submatrix(0, a, 0, b);
        for (j, col) in columns.iter().enumerate() {
            if !col.submatrix(0, j * a, 0, b).is_zero() {
                return Err(Error::Structure(StructureDefect::NotLowerTriangular {
                    i: 1,
                    j: j + 1,
                }));
            }
            if col.submatrix(j * a, (j + 1) * a, 0, b) != diag {
                return Err(Error::Structure(StructureDefect::DiagonalMismatch { j: j + 1 }));
            }
        }
        let need = a.min(b);
        let rank = diag.rank();
        if rank != need {
            return Err(Error::Structure(StructureDefect::LeadingBlockRankDeficient {
                rank,
                need,
            }));
        }
        Ok(PeriodicMatrix { k, a, b, columns })
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn block_rows(&self) -> usize {
        self.a
    }
    pub fn block_cols(&self) -> usize {
        self.b
    }
    pub fn field(&self) -> &Arc<FqField> {
        self.columns[0].field()
    }

    pub fn assemble(&self) -> GfMatrix {
        let mut out = self.columns[0].clone();
        for col in &self.columns[1..] {
            out = out.hstack(col).expect("validated shapes");
        }
        out
    }

    pub fn image(&self) -> GfSubspace {
        let asm = self.assemble();
        let t = asm.transpose();
        let rows: Vec<Vec<Fq>> = (0..t.rows()).map(|r| t.row(r).to_vec()).collect();
        GfSubspace::from_rows(self.field().clone(), self.k * self.a, rows).expect("well formed")
    }
}

/// Rebuilds `ker(M)` of a `(k, r, m)`-BTT matrix (blocks `r x m`, `r <= m`) as
/// the image of a `(k, m, m - r)`-BTT matrix.
///
/// Writing `V_i` for the kernel vectors whose first `i` blocks vanish, the
/// down-shift maps `V_{i-1}` into `V_i` and `dim V_i = (k - i)(m - r)`, so a
/// set of `m - r` kernel vectors independent modulo `V_1` generates the whole
/// kernel under block shifts. Their block rows, stacked, are the output's
/// first column-group.
pub fn btt_kernel_to_image(mat: &BttMatrix) -> Result<BttMatrix> {
    let (k, r, m) = (mat.k(), mat.block_rows(), mat.block_cols());
    if r > m {
        return Err(Error::InvalidParameter(format!(
            "kernel-to-image needs block rows <= block cols, got {r} > {m}"
        )));
    }
    let field = mat.field().clone();
    let full = mat.assemble();
    let v0 = full.kernel_basis();
    // V_1: kernel vectors with a zero first block.
    let first_block = GfMatrix::unit_rows(field.clone(), k * m, 0..m);
    let v1 = full.vstack(&first_block)?.kernel_basis();

    let want = m - r;
    let mut span_rows: Vec<Vec<Fq>> = (0..v1.dim()).map(|i| v1.basis().row(i).to_vec()).collect();
    let mut span = GfSubspace::from_rows(field.clone(), k * m, span_rows.clone())?;
    let mut chosen: Vec<Vec<Fq>> = Vec::with_capacity(want);
    for i in 0..v0.dim() {
        if chosen.len() == want {
            break;
        }
        let cand = v0.basis().row(i).to_vec();
        if !span.contains(&cand) {
            span_rows.push(cand.clone());
            span = GfSubspace::from_rows(field.clone(), k * m, span_rows.clone())?;
            chosen.push(cand);
        }
    }
    if chosen.len() != want {
        return Err(Error::Structure(StructureDefect::LeadingBlockRankDeficient {
            rank: chosen.len(),
            need: want,
        }));
    }

    let mut blocks = Vec::with_capacity(k);
    for i in 0..k {
        let mut blk = GfMatrix::zero(field.clone(), m, want);
        for (c, v) in chosen.iter().enumerate() {
            for rr in 0..m {
                blk.set(rr, c, v[i * m + rr]);
            }
        }
        blocks.push(blk);
    }
    BttMatrix::new(k, m, want, blocks)
}

/// Sum over `d <= r` of the Gaussian binomials `[n choose d]_q`, saturating.
pub fn count_subspaces_up_to(q: u64, n: usize, r: usize) -> u128 {
    let mut total: u128 = 0;
    for d in 0..=r.min(n) {
        let mut num: u128 = 1;
        let mut den: u128 = 1;
        let mut ok = true;
        for i in 0..d {
            let qa = (q as u128).checked_pow((n - i) as u32);
            let qb = (q as u128).checked_pow((i + 1) as u32);
            let (Some(qa), Some(qb)) = (qa, qb) else {
                ok = false;
                break;
            };
            num = match num.checked_mul(qa - 1) {
                Some(v) => v,
                None => {
                    ok = false;
                    break;
                }
            };
            den *= qb - 1;
        }
        if !ok {
            return u128::MAX;
        }
        total = total.saturating_add(num / den);
    }
    total
}

fn combinations(n: usize, d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![Vec::new()];
    }
    if d > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        out.push(idx.clone());
        // advance the rightmost index that can still move
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - d {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All subspaces of `F_q^n` of dimension at most `r`, each exactly once, as
/// canonical row-reduced bases enumerated by pivot pattern.
pub fn subspaces_of_dim_at_most(
    field: &Arc<FqField>,
    n: usize,
    r: usize,
    cap: u128,
) -> Result<Vec<GfSubspace>> {
    let total = count_subspaces_up_to(field.q() as u64, n, r);
    if total > cap {
        return Err(Error::CapExceeded { needed: total, cap });
    }
    let q = field.q() as u64;
    let mut out = Vec::with_capacity(total as usize);
    out.push(GfSubspace::zero_space(field.clone(), n));
    for d in 1..=r.min(n) {
        for pivots in combinations(n, d) {
            let mut free: Vec<(usize, usize)> = Vec::new();
            for (row, &p) in pivots.iter().enumerate() {
                for col in p + 1..n {
                    if !pivots.contains(&col) {
                        free.push((row, col));
                    }
                }
            }
            let count = q.pow(free.len() as u32);
            for mut stamp in 0..count {
                let mut basis = GfMatrix::zero(field.clone(), d, n);
                for (row, &p) in pivots.iter().enumerate() {
                    basis.set(row, p, 1);
                }
                for &(row, col) in &free {
                    basis.set(row, col, (stamp % q) as Fq);
                    stamp /= q;
                }
                out.push(GfSubspace::from_rref_unchecked(basis, pivots.clone()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::FqField;

    fn f(q: (u64, usize)) -> Arc<FqField> {
        FqField::new(q.0, q.1).unwrap()
    }

    #[test]
    fn rref_identity_and_rank() {
        let f2 = f((2, 1));
        let id = GfMatrix::identity(f2.clone(), 3);
        let (r, p) = id.rref();
        assert_eq!(r, id);
        assert_eq!(p, vec![0, 1, 2]);
        assert_eq!(id.rank(), 3);
        assert_eq!(GfMatrix::zero(f2, 2, 5).rank(), 0);
    }

    #[test]
    fn rank_nullity_random() {
        use rand::{Rng, SeedableRng};
        let f3 = f((3, 1));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rows = rng.gen_range(1..=6);
            let cols = rng.gen_range(1..=8);
            let data: Vec<Vec<Fq>> =
                (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(0..3)).collect()).collect();
            let m = GfMatrix::from_rows(f3.clone(), data).unwrap();
            assert_eq!(m.rank() + m.kernel_basis().dim(), cols);
            assert_eq!(m.rank(), m.transpose().rank());
        }
    }

    #[test]
    fn kernel_vectors_annihilate() {
        use rand::{Rng, SeedableRng};
        let f5 = f((5, 1));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let rows = rng.gen_range(1..=5);
            let cols = rng.gen_range(1..=7);
            let data: Vec<Vec<Fq>> =
                (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(0..5)).collect()).collect();
            let m = GfMatrix::from_rows(f5.clone(), data).unwrap();
            let ker = m.kernel_basis();
            for i in 0..ker.dim() {
                let v = ker.basis().row(i);
                assert!(m.mul_vec(v).iter().all(|&x| x == 0));
            }
        }
    }

    #[test]
    fn solve_particular_consistent_and_not() {
        let f5 = f((5, 1));
        let m = GfMatrix::from_rows(f5.clone(), vec![vec![1, 2], vec![2, 4]]).unwrap();
        // (1,2) and (2,4) are dependent: rhs (1, 2) solvable, (1, 3) not.
        let x = m.solve_particular(&[1, 2]).unwrap().unwrap();
        assert_eq!(m.mul_vec(&x), vec![1, 2]);
        assert!(m.solve_particular(&[1, 3]).unwrap().is_none());
    }

    #[test]
    fn intersect_standard_basis_planes() {
        let f2 = f((2, 1));
        let e = |i: usize| {
            let mut v = vec![0 as Fq; 4];
            v[i] = 1;
            v
        };
        let v = GfSubspace::from_rows(f2.clone(), 4, vec![e(0), e(1)]).unwrap();
        let w = GfSubspace::from_rows(f2.clone(), 4, vec![e(1), e(2)]).unwrap();
        let i = v.intersect(&w).unwrap();
        assert_eq!(i, GfSubspace::from_rows(f2.clone(), 4, vec![e(1)]).unwrap());
        // Affine: (e3 + V) ∩ W must contain a point, found exhaustively too.
        let (u2, inter) = affine_intersect(&e(2), &v, &w).unwrap();
        let u2 = u2.unwrap();
        assert!(w.contains(&u2));
        assert_eq!(inter.dim(), 1);
        // Oracle: enumerate the coset.
        let mut found = false;
        for c0 in 0..2u16 {
            for c1 in 0..2u16 {
                let mut x = e(2);
                let f = &**f2.as_ref().q().eq(&2).then_some(&f2).unwrap();
                for (t, (&a, &b)) in x.iter_mut().zip(e(0).iter().zip(e(1).iter())) {
                    *t = f.add(*t, f.add(f.mul(c0, a), f.mul(c1, b)));
                }
                if x == u2 {
                    found = true;
                }
            }
        }
        assert!(found, "affine representative must lie in the coset");
    }

    #[test]
    fn intersect_with_full_and_zero() {
        let f3 = f((3, 1));
        let v =
            GfSubspace::from_rows(f3.clone(), 3, vec![vec![1, 0, 2], vec![0, 1, 1]]).unwrap();
        let full = GfSubspace::full(f3.clone(), 3);
        let zero = GfSubspace::zero_space(f3.clone(), 3);
        assert_eq!(v.intersect(&full).unwrap(), v);
        assert_eq!(v.intersect(&zero).unwrap(), zero);
        assert_eq!(v.sum(&zero).unwrap(), v);
        assert_eq!(v.sum(&full).unwrap(), full);
    }

    #[test]
    fn dimension_formula_for_sum_and_intersection() {
        use rand::{Rng, SeedableRng};
        let f2 = f((2, 1));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let n = rng.gen_range(2..=6);
            let rv: Vec<Vec<Fq>> = (0..rng.gen_range(0..=n))
                .map(|_| (0..n).map(|_| rng.gen_range(0..2)).collect())
                .collect();
            let rw: Vec<Vec<Fq>> = (0..rng.gen_range(0..=n))
                .map(|_| (0..n).map(|_| rng.gen_range(0..2)).collect())
                .collect();
            let v = GfSubspace::from_rows(f2.clone(), n, rv).unwrap();
            let w = GfSubspace::from_rows(f2.clone(), n, rw).unwrap();
            let i = v.intersect(&w).unwrap();
            let s = v.sum(&w).unwrap();
            assert_eq!(i.dim() + s.dim(), v.dim() + w.dim());
        }
    }

    #[test]
    fn contains_matches_enumeration() {
        let f3 = f((3, 1));
        let v =
            GfSubspace::from_rows(f3.clone(), 3, vec![vec![1, 1, 0], vec![0, 0, 1]]).unwrap();
        let mut members = 0;
        for idx in 0..27u32 {
            let x: Vec<Fq> =
                (0..3).map(|i| ((idx / 3u32.pow(i)) % 3) as Fq).collect();
            if v.contains(&x) {
                members += 1;
            }
        }
        assert_eq!(members, 9); // dim 2 over F_3
    }

    #[test]
    fn block_shift_moves_blocks_down() {
        assert_eq!(block_shift(&[1, 2, 3, 4], 2, 2).unwrap(), vec![0, 0, 1, 2]);
        assert!(block_shift(&[1, 2, 3], 2, 2).is_err());
        // k applications send everything to zero
        let mut v = vec![1, 2, 3, 4, 5, 6];
        for _ in 0..3 {
            v = block_shift(&v, 3, 2).unwrap();
        }
        assert_eq!(v, vec![0; 6]);
    }

    #[test]
    fn btt_assemble_and_validate_round_trip() {
        let f2 = f((2, 1));
        let b1 = GfMatrix::from_rows(f2.clone(), vec![vec![1, 0]]).unwrap();
        let b2 = GfMatrix::from_rows(f2.clone(), vec![vec![0, 0]]).unwrap();
        let btt = BttMatrix::new(2, 1, 2, vec![b1, b2]).unwrap();
        let asm = btt.assemble();
        assert_eq!(asm.rows(), 2);
        assert_eq!(asm.cols(), 4);
        let back = btt_validate(&asm, 2, 1, 2).unwrap();
        assert_eq!(back, btt);
    }

    #[test]
    fn btt_validate_reports_each_defect() {
        let f2 = f((2, 1));
        // k = 1: any full-rank matrix validates.
        let m = GfMatrix::identity(f2.clone(), 2);
        assert!(btt_validate(&m, 1, 2, 2).is_ok());
        // Upper block nonzero.
        let bad = GfMatrix::from_rows(
            f2.clone(),
            vec![vec![1, 0, 0, 1], vec![0, 1, 0, 0], vec![1, 0, 1, 0], vec![0, 0, 0, 1]],
        )
        .unwrap();
        match btt_validate(&bad, 2, 2, 2) {
            Err(Error::Structure(StructureDefect::NotLowerTriangular { i: 1, j: 2 })) => {}
            other => panic!("unexpected: {other:?}"),
        }
        // Toeplitz violated on the diagonal.
        let bad2 = GfMatrix::from_rows(
            f2.clone(),
            vec![vec![1, 0, 0, 0], vec![0, 1, 0, 0], vec![0, 0, 1, 1], vec![0, 0, 0, 1]],
        )
        .unwrap();
        match btt_validate(&bad2, 2, 2, 2) {
            Err(Error::Structure(StructureDefect::NotToeplitz { .. })) => {}
            other => panic!("unexpected: {other:?}"),
        }
        // Rank-deficient leading block.
        let bad3 = GfMatrix::zero(f2.clone(), 4, 4);
        match btt_validate(&bad3, 2, 2, 2) {
            Err(Error::Structure(StructureDefect::LeadingBlockRankDeficient { rank: 0, need: 2 })) => {}
            other => panic!("unexpected: {other:?}"),
        }
        // Wrong shape.
        match btt_validate(&GfMatrix::zero(f2, 3, 4), 2, 2, 2) {
            Err(Error::Structure(StructureDefect::BadShape { .. })) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn kernel_to_image_worked_example() {
        // q = 2, k = 2, r = 1, m = 2, M_1 = (1 0), M_2 = (0 0):
        // kernel is {v : v_1 = v_3 = 0}; the image form has first column
        // (0,1,0,0) and second column its block shift (0,0,0,1).
        let f2 = f((2, 1));
        let b1 = GfMatrix::from_rows(f2.clone(), vec![vec![1, 0]]).unwrap();
        let b2 = GfMatrix::from_rows(f2.clone(), vec![vec![0, 0]]).unwrap();
        let btt = BttMatrix::new(2, 1, 2, vec![b1, b2]).unwrap();
        let img = btt_kernel_to_image(&btt).unwrap();
        assert_eq!((img.k(), img.block_rows(), img.block_cols()), (2, 2, 1));
        let asm = img.assemble();
        let col = |c: usize| (0..4).map(|r| asm.get(r, c)).collect::<Vec<_>>();
        assert_eq!(col(0), vec![0, 1, 0, 0]);
        assert_eq!(col(1), vec![0, 0, 0, 1]);
        assert_eq!(img.image(), btt.assemble().kernel_basis());
    }

    #[test]
    fn kernel_to_image_full_rank_gives_empty_image() {
        let f3 = f((3, 1));
        let blocks = vec![GfMatrix::identity(f3.clone(), 2), GfMatrix::zero(f3.clone(), 2, 2)];
        let btt = BttMatrix::new(2, 2, 2, blocks).unwrap();
        let img = btt_kernel_to_image(&btt).unwrap();
        assert_eq!(img.block_cols(), 0);
        assert_eq!(img.image().dim(), 0);
    }

    #[test]
    fn kernel_to_image_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        for trial in 0..100 {
            let q = if trial % 2 == 0 { 2 } else { 3 };
            let field = f((q as u64, 1));
            let k = rng.gen_range(1..=4);
            let m = rng.gen_range(1..=4usize);
            let r = rng.gen_range(1..=m);
            let blocks: Vec<GfMatrix> = loop {
                let cand: Vec<GfMatrix> = (0..k)
                    .map(|_| {
                        let rows: Vec<Vec<Fq>> = (0..r)
                            .map(|_| (0..m).map(|_| rng.gen_range(0..q)).collect())
                            .collect();
                        GfMatrix::from_rows(field.clone(), rows).unwrap()
                    })
                    .collect();
                if cand[0].rank() == r {
                    break cand;
                }
            };
            let btt = BttMatrix::new(k, r, m, blocks).unwrap();
            let img = btt_kernel_to_image(&btt).unwrap();
            let ker = btt.assemble().kernel_basis();
            assert_eq!(img.image(), ker, "trial {trial}");
            // dim V_i = (k - i)(m - r)
            let full = btt.assemble();
            for i in 0..=k {
                let zeros = GfMatrix::unit_rows(field.clone(), k * m, 0..i * m);
                let vi = full.vstack(&zeros).unwrap().kernel_basis();
                assert_eq!(vi.dim(), (k - i) * (m - r), "trial {trial}, i = {i}");
            }
        }
    }

    #[test]
    fn periodic_validation() {
        let f2 = f((2, 1));
        // k = 2, a = 2, b = 1, diagonal (1,0)^T, below-diagonal (1,1)^T.
        let c1 =
            GfMatrix::from_rows(f2.clone(), vec![vec![1], vec![0], vec![1], vec![1]]).unwrap();
        let c2 =
            GfMatrix::from_rows(f2.clone(), vec![vec![0], vec![0], vec![1], vec![0]]).unwrap();
        let p = PeriodicMatrix::new(2, 2, 1, vec![c1.clone(), c2]).unwrap();
        assert_eq!(p.assemble().cols(), 2);
        // Mismatched diagonal block.
        let bad =
            GfMatrix::from_rows(f2.clone(), vec![vec![0], vec![0], vec![0], vec![1]]).unwrap();
        match PeriodicMatrix::new(2, 2, 1, vec![c1, bad]) {
            Err(Error::Structure(StructureDefect::DiagonalMismatch { j: 2 })) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn subspace_enumeration_counts() {
        // Gaussian binomials: [4 2]_2 = 35, [4 1]_2 = 15.
        assert_eq!(count_subspaces_up_to(2, 4, 2), 1 + 15 + 35);
        let f2 = f((2, 1));
        let all = subspaces_of_dim_at_most(&f2, 4, 2, 1 << 20).unwrap();
        assert_eq!(all.len(), 51);
        // Distinct and canonical.
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j]);
            }
        }
        // [4 2]_7 = 2850, [4 1]_7 = 400.
        assert_eq!(count_subspaces_up_to(7, 4, 2), 1 + 400 + 2850);
    }

    #[test]
    fn subspace_enumeration_respects_cap() {
        let f2 = f((2, 1));
        assert!(matches!(
            subspaces_of_dim_at_most(&f2, 4, 2, 10),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn direct_power_and_suffix_restriction() {
        let f2 = f((2, 1));
        let v = GfSubspace::from_rows(f2.clone(), 2, vec![vec![1, 1]]).unwrap();
        let vv = v.direct_power(2);
        assert_eq!(vv.dim(), 2);
        assert!(vv.contains(&[1, 1, 0, 0]));
        assert!(vv.contains(&[0, 0, 1, 1]));
        assert!(!vv.contains(&[1, 0, 0, 0]));
        let r = vv.restrict_suffix(2).unwrap();
        assert_eq!(r, v);
    }
}
