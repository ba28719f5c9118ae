//! List decoding of Reed-Solomon codes whose evaluation points sit in the
//! base field `F_q` while messages live over the extension `F_{q^m}`. The
//! decoder interpolates one polynomial
//!
//! `Q(X, Y_1, ..., Y_s) = A_0(X) + A_1(X) Y_1 + ... + A_s(X) Y_s`
//!
//! vanishing on the received word with `Y_l` playing the role of the
//! `(l-1)`-th Frobenius power of the codeword symbol. Every close codeword
//! then satisfies an `F_q`-linear system whose matrix is block-lower-
//! triangular block-Toeplitz, so the list is an affine shift of the kernel
//! of a BTT matrix.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gf::{linearized_op_matrix, FieldTower, Fq, Fqm};
use crate::linalg::{btt_kernel_to_image, BttMatrix, GfMatrix, GfSubspace};

/// Enumerating a pruned list visits `q^dim` coset points; this default keeps
/// that loop comfortably below a second on desk-scale codes.
pub const DEFAULT_PRUNE_CAP: u128 = 1 << 20;

/// Reed-Solomon code of length `n` and dimension `k` over `F_{q^m}`, with all
/// evaluation points drawn from the subfield `F_q`.
#[derive(Clone, Debug)]
pub struct RsSubfieldCode {
    tower: Arc<FieldTower>,
    n: usize,
    k: usize,
    points: Vec<Fq>,
}

impl RsSubfieldCode {
    /// When `points` is `None` the first `n` base-field elements are used in
    /// index order.
    pub fn new(
        tower: Arc<FieldTower>,
        n: usize,
        k: usize,
        points: Option<Vec<Fq>>,
    ) -> Result<Self> {
        let q = tower.q();
        if n == 0 || k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= k <= n, got k = {k}, n = {n}"
            )));
        }
        if n > q {
            return Err(Error::InvalidParameter(format!(
                "length {n} exceeds subfield size {q}"
            )));
        }
        let points = match points {
            None => (0..n as Fq).collect(),
            Some(p) => {
                if p.len() != n {
                    return Err(Error::InvalidParameter("need n evaluation points".into()));
                }
                for (i, &a) in p.iter().enumerate() {
                    if a as usize >= q {
                        return Err(Error::InvalidParameter(format!(
                            "point {a} outside F_{q}"
                        )));
                    }
                    if p[..i].contains(&a) {
                        return Err(Error::InvalidParameter(format!(
                            "repeated evaluation point {a}"
                        )));
                    }
                }
                p
            }
        };
        Ok(RsSubfieldCode { tower, n, k, points })
    }

    pub fn tower(&self) -> &Arc<FieldTower> {
        &self.tower
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn points(&self) -> &[Fq] {
        &self.points
    }

    /// Evaluates the message polynomial at every point.
    pub fn encode(&self, msg: &[Fqm]) -> Result<Vec<Fqm>> {
        if msg.len() != self.k {
            return Err(Error::Incompatible(format!(
                "message has {} symbols, code dimension is {}",
                msg.len(),
                self.k
            )));
        }
        let t = &*self.tower;
        for sym in msg {
            if sym.len() != t.m() {
                return Err(Error::Incompatible("message symbol has wrong length".into()));
            }
        }
        let mut out = Vec::with_capacity(self.n);
        for &alpha in &self.points {
            // Horner over F_{q^m}; alpha lies in the base field so each step
            // is a coordinate-wise scale.
            let mut acc = t.zero();
            for coeff in msg.iter().rev() {
                acc = t.scale_m(&acc, alpha);
                acc = t.add_m(&acc, coeff);
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Number of positions where two words agree.
pub fn agreement(a: &[Fqm], b: &[Fqm]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x == y).count()
}

/// Interpolation degrees `(s, d)` and agreement threshold `t` for one decode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeParams {
    s: usize,
    d: usize,
    t: usize,
}

impl DecodeParams {
    pub fn new(code: &RsSubfieldCode, s: usize, d: usize, t: usize) -> Result<Self> {
        let (n, k, m) = (code.n(), code.k(), code.tower().m());
        if s < 1 || s > m {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= s <= m = {m}, got s = {s}"
            )));
        }
        if (s + 1) * (d + 1) + k <= n + 1 {
            return Err(Error::InvalidParameter(format!(
                "(s+1)(d+1) + k - 1 = {} must exceed n = {n}",
                (s + 1) * (d + 1) + k - 1
            )));
        }
        if t + 1 <= d + k {
            return Err(Error::InvalidParameter(format!(
                "agreement threshold t = {t} must exceed d + k - 1 = {}",
                d + k - 1
            )));
        }
        if t > n {
            return Err(Error::InvalidParameter(format!(
                "agreement threshold t = {t} exceeds n = {n}"
            )));
        }
        Ok(DecodeParams { s, d, t })
    }

    /// Picks `s = ceil(1/eps) + 1`, the largest `d` the interpolation count
    /// allows, and `t = d + k`.
    pub fn choose(code: &RsSubfieldCode, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "list-size parameter must lie in (0, 1), got {eps}"
            )));
        }
        // Guard the ceiling against values like 1/3 that round up after the
        // float division.
        let s = (1.0 / eps - 1e-9).ceil() as usize + 1;
        let (n, k, m) = (code.n(), code.k(), code.tower().m());
        if s > m {
            return Err(Error::Infeasible {
                stage: "parameters",
                detail: format!("s = {s} exceeds extension degree m = {m}"),
            });
        }
        let d = (n - k + 1) / (s + 1);
        if d < 1 {
            return Err(Error::Infeasible {
                stage: "parameters",
                detail: format!("no positive degree d fits n = {n}, k = {k}, s = {s}"),
            });
        }
        DecodeParams::new(code, s, d, d + k)
    }

    pub fn s(&self) -> usize {
        self.s
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn t(&self) -> usize {
        self.t
    }

    /// Largest error count the decoder is guaranteed to handle.
    pub fn max_errors(&self, code: &RsSubfieldCode) -> usize {
        code.n() - self.t
    }
}

/// The interpolated polynomial, stored as coefficient vectors `a[0] = A_0`
/// (degree below `d + k`) and `a[l] = A_l` for `l = 1..=s` (degree at most
/// `d`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QPolynomial {
    coeffs: Vec<Vec<Fqm>>,
}

impl QPolynomial {
    pub fn s(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn a(&self, l: usize) -> &[Fqm] {
        &self.coeffs[l]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().flatten().all(|c| c.iter().all(|&x| x == 0))
    }

    /// Largest power of `X` dividing every `A_l`.
    pub fn valuation(&self) -> usize {
        let mut best: Option<usize> = None;
        for poly in &self.coeffs {
            if let Some(v) = poly.iter().position(|c| c.iter().any(|&x| x != 0)) {
                best = Some(best.map_or(v, |b| b.min(v)));
            }
        }
        best.unwrap_or(0)
    }

    /// Divides every `A_l` by `X^valuation`, preserving the stored lengths.
    pub fn normalized(&self) -> QPolynomial {
        let u = self.valuation();
        if u == 0 {
            return self.clone();
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|poly| {
                let m = poly.first().map(|c| c.len()).unwrap_or(0);
                let mut out: Vec<Fqm> = poly[u..].to_vec();
                out.resize(poly.len(), vec![0; m]);
                out
            })
            .collect();
        QPolynomial { coeffs }
    }

    /// `A_0(alpha) + sum_l A_l(alpha) sigma^(l-1)(y)` for a point `alpha` of
    /// the base field.
    pub fn constraint_value(&self, tower: &FieldTower, alpha: Fq, y: &Fqm) -> Fqm {
        let eval = |poly: &[Fqm]| {
            let mut acc = tower.zero();
            for c in poly.iter().rev() {
                acc = tower.scale_m(&acc, alpha);
                acc = tower.add_m(&acc, c);
            }
            acc
        };
        let mut total = eval(&self.coeffs[0]);
        for l in 1..self.coeffs.len() {
            let y_sig = tower.frobenius(y, l - 1);
            let term = tower.mul_m(&eval(&self.coeffs[l]), &y_sig);
            total = tower.add_m(&total, &term);
        }
        total
    }
}

/// Gaussian elimination over `F_{q^m}`, returning pivot columns; rows are
/// reduced in place.
fn fqm_rref(tower: &FieldTower, rows: &mut [Vec<Fqm>]) -> Vec<usize> {
    let nrows = rows.len();
    let ncols = if nrows == 0 { 0 } else { rows[0].len() };
    let mut pivots = Vec::new();
    let mut row = 0usize;
    for col in 0..ncols {
        if row == nrows {
            break;
        }
        let Some(pr) = (row..nrows).find(|&r| !tower.is_zero(&rows[r][col])) else {
            continue;
        };
        rows.swap(row, pr);
        let inv = tower.inv_m(&rows[row][col]).expect("pivot is nonzero");
        for c in col..ncols {
            rows[row][c] = tower.mul_m(&rows[row][c], &inv);
        }
        for r in 0..nrows {
            if r == row || tower.is_zero(&rows[r][col]) {
                continue;
            }
            let factor = rows[r][col].clone();
            for c in col..ncols {
                let sub = tower.mul_m(&factor, &rows[row][c]);
                rows[r][c] = tower.sub_m(&rows[r][c], &sub);
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// Builds the nonzero interpolation polynomial for a received word: the
/// kernel element of the constraint system with its first free variable set
/// to one.
pub fn interpolate(
    code: &RsSubfieldCode,
    params: &DecodeParams,
    word: &[Fqm],
) -> Result<QPolynomial> {
    let tower = code.tower();
    let (n, k) = (code.n(), code.k());
    let (s, d) = (params.s(), params.d());
    if word.len() != n {
        return Err(Error::Incompatible(format!(
            "received word has {} symbols, expected {n}",
            word.len()
        )));
    }
    for y in word {
        if y.len() != tower.m() {
            return Err(Error::Incompatible("received symbol has wrong length".into()));
        }
    }

    let w0 = d + k; // unknowns in A_0
    let wl = d + 1; // unknowns in each A_l
    let ncols = w0 + s * wl;
    let mut rows: Vec<Vec<Fqm>> = Vec::with_capacity(n);
    for (i, y) in word.iter().enumerate() {
        let alpha = code.points()[i];
        let mut row = Vec::with_capacity(ncols);
        let mut apow: Fq = 1;
        for _ in 0..w0 {
            row.push(tower.embed(apow));
            apow = tower.fq().mul(apow, alpha);
        }
        for l in 1..=s {
            let y_sig = tower.frobenius(y, l - 1);
            let mut apow: Fq = 1;
            for _ in 0..wl {
                row.push(tower.scale_m(&y_sig, apow));
                apow = tower.fq().mul(apow, alpha);
            }
        }
        rows.push(row);
    }

    let pivots = fqm_rref(tower, &mut rows);
    // The count (s+1)(d+1) + k - 1 > n guarantees a free column.
    let free = (0..ncols)
        .find(|c| !pivots.contains(c))
        .expect("interpolation system is underdetermined by construction");
    let mut x: Vec<Fqm> = vec![tower.zero(); ncols];
    x[free] = tower.one();
    for (r, &pc) in pivots.iter().enumerate() {
        if pc < free {
            x[pc] = tower.neg_m(&rows[r][free]);
        }
    }

    let mut coeffs = Vec::with_capacity(s + 1);
    coeffs.push(x[..w0].to_vec());
    for l in 0..s {
        coeffs.push(x[w0 + l * wl..w0 + (l + 1) * wl].to_vec());
    }
    let q = QPolynomial { coeffs };
    debug_assert!(!q.is_zero());
    Ok(q)
}

/// The linear system a close codeword must satisfy: the reduced `(k, r, m)`
/// BTT matrix built from independent rows of the leading block, plus the full
/// unreduced `km x km` system used for the affine shift.
#[derive(Clone, Debug)]
pub struct BttSystem {
    btt: BttMatrix,
    full: GfMatrix,
    rhs: Vec<Fq>,
}

impl BttSystem {
    /// The reduced block system; its kernel contains every close codeword
    /// relative to the shift.
    pub fn btt(&self) -> &BttMatrix {
        &self.btt
    }
    /// The unreduced coefficient system over `F_q`.
    pub fn full(&self) -> &GfMatrix {
        &self.full
    }
    pub fn rhs(&self) -> &[Fq] {
        &self.rhs
    }
    /// Rank of the leading linearized-operator block.
    pub fn m0_rank(&self) -> usize {
        self.btt.block_rows()
    }
}

/// Extracts the BTT system from an interpolation polynomial, normalizing away
/// any common power of `X` first. Returns `None` when every `A_l` with
/// `l >= 1` has zero constant term, in which case the list is provably empty.
pub fn structured_from_q(
    code: &RsSubfieldCode,
    params: &DecodeParams,
    q: &QPolynomial,
) -> Result<Option<BttSystem>> {
    let tower = code.tower();
    let fq = tower.fq();
    let (k, m, s, d) = (code.k(), tower.m(), params.s(), params.d());
    if q.s() != s {
        return Err(Error::Incompatible(format!(
            "polynomial has s = {}, parameters say {s}",
            q.s()
        )));
    }
    let q = q.normalized();
    let coeff = |l: usize, c: usize| -> Fqm {
        let poly = q.a(l);
        if c < poly.len() {
            poly[c].clone()
        } else {
            tower.zero()
        }
    };
    let _ = d;

    if (1..=s).all(|l| tower.is_zero(&coeff(l, 0))) {
        return Ok(None);
    }

    // Operator blocks M_c: x -> sum_l a_{l,c} sigma^(l-1)(x).
    let mut ops = Vec::with_capacity(k);
    for c in 0..k {
        let a: Vec<Fqm> = (1..=s).map(|l| coeff(l, c)).collect();
        ops.push(linearized_op_matrix(tower, &a)?);
    }

    // Greedy first set of independent rows of M_0, reused in every block.
    let r = ops[0].rank();
    let mut picked: Vec<usize> = Vec::with_capacity(r);
    let mut span = GfSubspace::zero_space(fq.clone(), m);
    for i in 0..m {
        if picked.len() == r {
            break;
        }
        let row = ops[0].row(i).to_vec();
        if !span.contains(&row) {
            let mut rows: Vec<Vec<Fq>> =
                picked.iter().map(|&j| ops[0].row(j).to_vec()).collect();
            rows.push(row);
            span = GfSubspace::from_rows(fq.clone(), m, rows)?;
            picked.push(i);
        }
    }
    let blocks: Vec<GfMatrix> = ops.iter().map(|op| op.select_rows(&picked)).collect();
    let btt = BttMatrix::new(k, r, m, blocks)?;

    // Full system: block row i reads sum_j M_{i-j} f_j = -a_{0,i}.
    let mut full = GfMatrix::zero(fq.clone(), k * m, k * m);
    for i in 0..k {
        for j in 0..=i {
            let op = &ops[i - j];
            for rr in 0..m {
                for cc in 0..m {
                    full.set(i * m + rr, j * m + cc, op.get(rr, cc));
                }
            }
        }
    }
    let mut rhs = Vec::with_capacity(k * m);
    for i in 0..k {
        rhs.extend(tower.neg_m(&coeff(0, i)));
    }

    Ok(Some(BttSystem { btt, full, rhs }))
}

/// A decoded list: the coset `shift + V` of flattened messages, with `V`
/// presented both as a subspace and as the image of a BTT matrix. An empty
/// list is signalled by a missing shift.
#[derive(Clone, Debug)]
pub struct StructuredList {
    shift: Option<Vec<Fq>>,
    subspace: GfSubspace,
    btt: BttMatrix,
}

impl StructuredList {
    pub fn new(shift: Option<Vec<Fq>>, subspace: GfSubspace, btt: BttMatrix) -> Result<Self> {
        if btt.image() != subspace {
            return Err(Error::Incompatible(
                "BTT image does not present the list subspace".into(),
            ));
        }
        if let Some(u) = &shift {
            if u.len() != subspace.ambient() {
                return Err(Error::Incompatible("shift has wrong length".into()));
            }
        }
        Ok(StructuredList { shift, subspace, btt })
    }

    pub fn is_empty(&self) -> bool {
        self.shift.is_none()
    }
    pub fn dim(&self) -> usize {
        self.subspace.dim()
    }
    pub fn shift(&self) -> Option<&[Fq]> {
        self.shift.as_deref()
    }
    pub fn subspace(&self) -> &GfSubspace {
        &self.subspace
    }
    pub fn btt(&self) -> &BttMatrix {
        &self.btt
    }

    /// Whether a message lies in the coset.
    pub fn contains_message(&self, code: &RsSubfieldCode, msg: &[Fqm]) -> bool {
        let Some(shift) = &self.shift else { return false };
        let flat = code.tower().flatten_blocks(msg);
        if flat.len() != shift.len() {
            return false;
        }
        let fq = code.tower().fq();
        let diff: Vec<Fq> = flat.iter().zip(shift).map(|(&a, &b)| fq.sub(a, b)).collect();
        self.subspace.contains(&diff)
    }

    /// All messages in the coset, in odometer order over the basis.
    pub fn enumerate_messages(
        &self,
        code: &RsSubfieldCode,
        cap: u128,
    ) -> Result<Vec<Vec<Fqm>>> {
        let Some(shift) = &self.shift else { return Ok(Vec::new()) };
        let tower = code.tower();
        let fq = tower.fq();
        let q = fq.q() as u128;
        let dim = self.subspace.dim();
        let total = q
            .checked_pow(dim as u32)
            .ok_or(Error::CapExceeded { needed: u128::MAX, cap })?;
        if total > cap {
            return Err(Error::CapExceeded { needed: total, cap });
        }
        let basis = self.subspace.basis();
        let mut out = Vec::with_capacity(total as usize);
        for mut stamp in 0..total {
            let mut flat = shift.clone();
            for i in 0..dim {
                let c = (stamp % q) as Fq;
                stamp /= q;
                if c != 0 {
                    for (t, &b) in flat.iter_mut().zip(basis.row(i)) {
                        *t = fq.add(*t, fq.mul(c, b));
                    }
                }
            }
            out.push(tower.unflatten_blocks(&flat)?);
        }
        Ok(out)
    }

    /// Keeps only coset members whose encodings agree with the word in at
    /// least `t` positions.
    pub fn prune_with_cap(
        &self,
        code: &RsSubfieldCode,
        word: &[Fqm],
        t: usize,
        cap: u128,
    ) -> Result<Vec<Vec<Fqm>>> {
        let mut out = Vec::new();
        for msg in self.enumerate_messages(code, cap)? {
            let enc = code.encode(&msg)?;
            if agreement(&enc, word) >= t {
                out.push(msg);
            }
        }
        Ok(out)
    }

    pub fn prune(
        &self,
        code: &RsSubfieldCode,
        word: &[Fqm],
        t: usize,
    ) -> Result<Vec<Vec<Fqm>>> {
        self.prune_with_cap(code, word, t, DEFAULT_PRUNE_CAP)
    }
}

/// Packages a BTT system (or the provably-empty case) into a structured list.
pub fn structured_list_from_system(
    code: &RsSubfieldCode,
    sys: Option<BttSystem>,
) -> Result<StructuredList> {
    let tower = code.tower();
    let (k, m) = (code.k(), tower.m());
    let fq = tower.fq();
    match sys {
        None => {
            let blocks = vec![GfMatrix::zero(fq.clone(), m, 0); k];
            let btt = BttMatrix::new(k, m, 0, blocks)?;
            StructuredList::new(None, GfSubspace::zero_space(fq.clone(), k * m), btt)
        }
        Some(sys) => {
            let shift = sys.full().solve_particular(sys.rhs())?;
            let image_btt = btt_kernel_to_image(sys.btt())?;
            let subspace = image_btt.image();
            StructuredList::new(shift, subspace, image_btt)
        }
    }
}

/// Full pipeline: interpolate, extract the BTT system, solve for the shift.
pub fn list_decode_structured(
    code: &RsSubfieldCode,
    params: &DecodeParams,
    word: &[Fqm],
) -> Result<StructuredList> {
    let q = interpolate(code, params, word)?;
    let sys = structured_from_q(code, params, &q)?;
    structured_list_from_system(code, sys)
}

/// Reference decoder: scans every message and keeps those whose encodings
/// have agreement at least `t`. Exponential in `k m`; guarded by `cap`.
pub fn brute_force_list(
    code: &RsSubfieldCode,
    word: &[Fqm],
    t: usize,
    cap: u128,
) -> Result<Vec<Vec<Fqm>>> {
    let tower = code.tower();
    let q = tower.q() as u128;
    let total = q
        .checked_pow((code.k() * tower.m()) as u32)
        .ok_or(Error::CapExceeded { needed: u128::MAX, cap })?;
    if total > cap {
        return Err(Error::CapExceeded { needed: total, cap });
    }
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rest = idx;
        let mut msg = Vec::with_capacity(code.k());
        for _ in 0..code.k() {
            let sym_idx = (rest % (tower.q() as u128).pow(tower.m() as u32)) as u64;
            rest /= (tower.q() as u128).pow(tower.m() as u32);
            msg.push(tower.element_from_index(sym_idx));
        }
        let enc = code.encode(&msg)?;
        if agreement(&enc, word) >= t {
            out.push(msg);
        }
    }
    Ok(out)
}
