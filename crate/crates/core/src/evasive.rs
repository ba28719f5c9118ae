//! Subspace designs and evasive subspaces: the Guruswami-Kopparty style
//! design from polynomial vanishing conditions, brute-force verifiers for the
//! BTT and periodic evasiveness properties, randomized search for evasive
//! subspaces of prescribed codimension, the product-with-design composition,
//! and the two-level construction that scales the block count.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf::{make_tower, FieldTower, Fq, FqField, Fqm};
use crate::linalg::{
    count_subspaces_up_to, subspaces_of_dim_at_most, BttMatrix, GfMatrix, GfSubspace,
    PeriodicMatrix,
};
use crate::par::{scan_argmax, Exec};
use crate::sim::{random_fq_vec, trial_rng};

fn ceil_guarded(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Which structured family a witness is evasive against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvasiveKind {
    Btt,
    Periodic,
}

/// How the evasiveness bound of a witness was established.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attestation {
    /// Follows from verified or claimed ingredients by a construction.
    Constructed,
    /// Checked against every candidate matrix.
    Exhaustive,
    /// Checked against this many uniformly random candidates.
    Sampled { trials: u64 },
    /// Asserted by the caller without machine verification.
    Claimed,
}

impl Attestation {
    fn weakest(self, other: Attestation) -> Attestation {
        match (self, other) {
            (Attestation::Sampled { trials: a }, Attestation::Sampled { trials: b }) => {
                Attestation::Sampled { trials: a.min(b) }
            }
            (s @ Attestation::Sampled { .. }, _) | (_, s @ Attestation::Sampled { .. }) => s,
            (Attestation::Claimed, _) | (_, Attestation::Claimed) => Attestation::Claimed,
            _ => Attestation::Constructed,
        }
    }
}

/// A subspace `W` of `F_q^{km}` together with the claim that every `(k,m,r)`
/// structured subspace meets it in dimension at most `s`.
#[derive(Clone, Debug)]
pub struct EvasiveWitness {
    subspace: GfSubspace,
    kind: EvasiveKind,
    k: usize,
    m: usize,
    r: usize,
    s: usize,
    codim_budget: usize,
    attestation: Attestation,
}

impl EvasiveWitness {
    #[allow(clippy::too_many_arguments)]
    pub fn attested(
        subspace: GfSubspace,
        kind: EvasiveKind,
        k: usize,
        m: usize,
        r: usize,
        s: usize,
        codim_budget: usize,
        attestation: Attestation,
    ) -> Result<Self> {
        if subspace.ambient() != k * m {
            return Err(Error::Incompatible(format!(
                "witness ambient {} is not k*m = {}",
                subspace.ambient(),
                k * m
            )));
        }
        if subspace.codim() > codim_budget {
            return Err(Error::Incompatible(format!(
                "codimension {} exceeds recorded budget {codim_budget}",
                subspace.codim()
            )));
        }
        Ok(EvasiveWitness { subspace, kind, k, m, r, s, codim_budget, attestation })
    }

    pub fn subspace(&self) -> &GfSubspace {
        &self.subspace
    }
    pub fn kind(&self) -> EvasiveKind {
        self.kind
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn codim(&self) -> usize {
        self.subspace.codim()
    }
    pub fn codim_budget(&self) -> usize {
        self.codim_budget
    }
    pub fn attestation(&self) -> Attestation {
        self.attestation
    }
    pub fn field(&self) -> &Arc<FqField> {
        self.subspace.field()
    }
}

/// Outcome of a verification scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvasiveReport {
    /// Largest intersection dimension seen.
    pub max_intersection: usize,
    /// Candidate index attaining it (smallest such).
    pub argmax: u64,
    /// Number of candidate indices scanned.
    pub candidates: u64,
}

fn checked_pow_u128(q: u64, e: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..e {
        acc = match acc.checked_mul(q as u128) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}

/// `dim(image(asm) ∩ W)` for an injective assembled matrix, given the
/// constraint matrix of `W`.
fn image_intersection_dim(nw: &GfMatrix, asm: &GfMatrix) -> usize {
    let prod = nw.mul(asm).expect("compatible shapes");
    asm.cols() - prod.rank()
}

fn btt_from_index(
    field: &Arc<FqField>,
    k: usize,
    m: usize,
    b: usize,
    idx: u64,
) -> Option<BttMatrix> {
    let q = field.q() as u64;
    let mut rest = idx;
    let mut blocks = Vec::with_capacity(k);
    for _ in 0..k {
        let mut blk = GfMatrix::zero(field.clone(), m, b);
        for rr in 0..m {
            for cc in 0..b {
                blk.set(rr, cc, (rest % q) as Fq);
                rest /= q;
            }
        }
        blocks.push(blk);
    }
    if blocks[0].rank() != b.min(m) {
        return None;
    }
    BttMatrix::new(k, m, b, blocks).ok()
}

fn random_btt(field: &Arc<FqField>, k: usize, m: usize, b: usize, rng: &mut ChaCha8Rng) -> BttMatrix {
    loop {
        let mut blocks = Vec::with_capacity(k);
        for _ in 0..k {
            let rows: Vec<Vec<Fq>> =
                (0..m).map(|_| random_fq_vec(field.q(), b, rng)).collect();
            blocks.push(GfMatrix::from_rows(field.clone(), rows).expect("well formed"));
        }
        if blocks[0].rank() == b.min(m) {
            return BttMatrix::new(k, m, b, blocks).expect("full-rank leading block");
        }
    }
}

fn periodic_from_index(
    field: &Arc<FqField>,
    k: usize,
    m: usize,
    r: usize,
    idx: u64,
) -> Option<PeriodicMatrix> {
    let q = field.q() as u64;
    let mut rest = idx;
    let mut next = || {
        let v = (rest % q) as Fq;
        rest /= q;
        v
    };
    let mut diag = GfMatrix::zero(field.clone(), m, r);
    for rr in 0..m {
        for cc in 0..r {
            diag.set(rr, cc, next());
        }
    }
    if diag.rank() != r.min(m) {
        return None;
    }
    let mut columns = Vec::with_capacity(k);
    for j in 0..k {
        let mut col = GfMatrix::zero(field.clone(), k * m, r);
        for rr in 0..m {
            for cc in 0..r {
                col.set(j * m + rr, cc, diag.get(rr, cc));
            }
        }
        for i in (j + 1)..k {
            for rr in 0..m {
                for cc in 0..r {
                    col.set(i * m + rr, cc, next());
                }
            }
        }
        columns.push(col);
    }
    PeriodicMatrix::new(k, m, r, columns).ok()
}

/// Exact maximum of `dim(V ∩ W)` over every `(k,m,r)`-BTT subspace `V`,
/// by enumerating all `q^{kmr}` first-column stacks (rank-deficient leading
/// blocks are skipped, as the definition excludes them).
pub fn verify_btt_evasive_exec(
    w: &GfSubspace,
    k: usize,
    m: usize,
    r: usize,
    cap: u64,
    exec: Exec,
) -> Result<EvasiveReport> {
    if w.ambient() != k * m {
        return Err(Error::Incompatible(format!(
            "ambient {} is not k*m = {}",
            w.ambient(),
            k * m
        )));
    }
    let field = w.field().clone();
    let total = checked_pow_u128(field.q() as u64, k * m * r);
    if total > cap as u128 {
        return Err(Error::CapExceeded { needed: total, cap: cap as u128 });
    }
    let count = total as u64;
    let nw = w.constraints();
    let best = scan_argmax(count, exec, |idx| {
        btt_from_index(&field, k, m, r, idx)
            .map_or(0, |btt| image_intersection_dim(&nw, &btt.assemble()))
    });
    let (argmax, max_intersection) = best.unwrap_or((0, 0));
    Ok(EvasiveReport { max_intersection, argmax, candidates: count })
}

pub fn verify_btt_evasive(witness: &EvasiveWitness, cap: u64) -> Result<EvasiveReport> {
    verify_btt_evasive_exec(&witness.subspace, witness.k, witness.m, witness.r, cap, Exec::Auto)
}

/// Maximum of `dim(V ∩ W)` over `trials` uniformly random `(k,m,r)`-BTT
/// subspaces, one seeded stream per candidate.
pub fn verify_btt_evasive_sampled(
    w: &GfSubspace,
    k: usize,
    m: usize,
    r: usize,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> EvasiveReport {
    let field = w.field().clone();
    let nw = w.constraints();
    let best = scan_argmax(trials, exec, |i| {
        let mut rng = trial_rng(seed, i);
        let btt = random_btt(&field, k, m, r, &mut rng);
        image_intersection_dim(&nw, &btt.assemble())
    });
    let (argmax, max_intersection) = best.unwrap_or((0, 0));
    EvasiveReport { max_intersection, argmax, candidates: trials }
}

/// Exact maximum of `dim(V ∩ W)` over every `(k,m,r)`-periodic subspace.
pub fn verify_periodic_evasive_exec(
    w: &GfSubspace,
    k: usize,
    m: usize,
    r: usize,
    cap: u64,
    exec: Exec,
) -> Result<EvasiveReport> {
    if w.ambient() != k * m {
        return Err(Error::Incompatible(format!(
            "ambient {} is not k*m = {}",
            w.ambient(),
            k * m
        )));
    }
    let field = w.field().clone();
    let entries = m * r * (1 + k * (k - 1) / 2);
    let total = checked_pow_u128(field.q() as u64, entries);
    if total > cap as u128 {
        return Err(Error::CapExceeded { needed: total, cap: cap as u128 });
    }
    let count = total as u64;
    let nw = w.constraints();
    let best = scan_argmax(count, exec, |idx| {
        periodic_from_index(&field, k, m, r, idx)
            .map_or(0, |p| image_intersection_dim(&nw, &p.assemble()))
    });
    let (argmax, max_intersection) = best.unwrap_or((0, 0));
    Ok(EvasiveReport { max_intersection, argmax, candidates: count })
}

pub fn verify_periodic_evasive(witness: &EvasiveWitness, cap: u64) -> Result<EvasiveReport> {
    verify_periodic_evasive_exec(
        &witness.subspace,
        witness.k,
        witness.m,
        witness.r,
        cap,
        Exec::Auto,
    )
}

/// The admissible elements of `F_{q^d}` used to seed a design: elements whose
/// scalar-and-Frobenius orbits are full-size and pairwise disjoint.
#[derive(Clone, Debug)]
pub struct AdmissibleSet {
    tower: Arc<FieldTower>,
    t: usize,
    bad: Vec<Fqm>,
    classes: Vec<Vec<Fqm>>,
    f_set: Vec<Fqm>,
}

/// Builds the admissible set over `F_{q^d}`: removes the exclusion set
/// `B = { a : a^{q^i - 1} ∈ F_q^× for some 0 < i < d }`, groups the rest into
/// orbit classes of size `d(q-1)` under Frobenius and scalars, and emits
/// `floor((q-1)/t)` elements per class, spaced `γ^t` apart from the
/// lexicographically least class member.
pub fn admissible_set(fq: &Arc<FqField>, d: usize, t: usize) -> Result<AdmissibleSet> {
    let q = fq.q();
    if d == 0 {
        return Err(Error::InvalidParameter("extension degree d must be positive".into()));
    }
    if t == 0 || t > q - 1 {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= t <= q - 1 = {}, got t = {t}",
            q - 1
        )));
    }
    let size_u128 = checked_pow_u128(q as u64, d);
    if size_u128 > (1 << 22) {
        return Err(Error::CapExceeded { needed: size_u128, cap: 1 << 22 });
    }
    let size = size_u128 as u64;
    let tower = make_tower(fq.p(), fq.e(), d)?;

    let mut is_bad = vec![false; size as usize];
    let mut bad = Vec::new();
    for idx in 1..size {
        let x = tower.element_from_index(idx);
        let xinv = tower.inv_m(&x).expect("nonzero");
        for i in 1..d {
            let ratio = tower.mul_m(&tower.frobenius(&x, i), &xinv);
            if tower.in_base(&ratio) {
                is_bad[idx as usize] = true;
                bad.push(x.clone());
                break;
            }
        }
    }

    let gamma = fq.gamma();
    let mut seen = vec![false; size as usize];
    let mut classes: Vec<Vec<Fqm>> = Vec::new();
    for idx in 1..size {
        if seen[idx as usize] || is_bad[idx as usize] {
            continue;
        }
        let alpha = tower.element_from_index(idx);
        let mut orbit = Vec::with_capacity(d * (q - 1));
        for j in 0..d {
            let conj = tower.frobenius(&alpha, j);
            let mut c: Fq = 1;
            for _ in 0..q - 1 {
                orbit.push(tower.scale_m(&conj, c));
                c = fq.mul(c, gamma);
            }
        }
        orbit.sort();
        orbit.dedup();
        if orbit.len() != d * (q - 1) {
            return Err(Error::Infeasible {
                stage: "admissible classes",
                detail: format!(
                    "orbit of element index {idx} has {} members, expected {}",
                    orbit.len(),
                    d * (q - 1)
                ),
            });
        }
        for member in &orbit {
            seen[tower.element_index(member) as usize] = true;
        }
        classes.push(orbit);
    }
    classes.sort_by(|a, b| a[0].cmp(&b[0]));

    let per_class = (q - 1) / t;
    let mut f_set = Vec::with_capacity(classes.len() * per_class);
    for class in &classes {
        let rep = &class[0];
        for i in 0..per_class {
            let scale = fq.pow(gamma, (i * t) as u64);
            f_set.push(tower.scale_m(rep, scale));
        }
    }

    Ok(AdmissibleSet { tower, t, bad, classes, f_set })
}

impl AdmissibleSet {
    pub fn tower(&self) -> &Arc<FieldTower> {
        &self.tower
    }
    pub fn t(&self) -> usize {
        self.t
    }
    /// The exclusion set `B`, in index order.
    pub fn bad(&self) -> &[Fqm] {
        &self.bad
    }
    /// Orbit classes of the remaining elements, each sorted, least first.
    pub fn classes(&self) -> &[Vec<Fqm>] {
        &self.classes
    }
    /// The admissible elements `F`.
    pub fn members(&self) -> &[Fqm] {
        &self.f_set
    }

    /// The point orbit `S_a = { sigma^j(a γ^i) : j < d, i < t }`.
    pub fn point_set(&self, alpha: &Fqm) -> Vec<Fqm> {
        let fq = self.tower.fq();
        let gamma = fq.gamma();
        let d = self.tower.m();
        let mut out = Vec::with_capacity(d * self.t);
        let mut scale: Fq = 1;
        for _ in 0..self.t {
            let pt = self.tower.scale_m(alpha, scale);
            for j in 0..d {
                out.push(self.tower.frobenius(&pt, j));
            }
            scale = fq.mul(scale, gamma);
        }
        out.sort();
        out.dedup();
        out
    }
}

/// A family of subspaces of `F_q^m` with the guarantee that every subspace of
/// dimension at most `r` meets the members in total dimension at most `s`.
#[derive(Clone, Debug)]
pub struct SubspaceDesign {
    field: Arc<FqField>,
    m: usize,
    design_d: usize,
    t: usize,
    r: usize,
    s: usize,
    members: Vec<GfSubspace>,
}

impl SubspaceDesign {
    pub fn field(&self) -> &Arc<FqField> {
        &self.field
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn design_d(&self) -> usize {
        self.design_d
    }
    pub fn t(&self) -> usize {
        self.t
    }
    pub fn r(&self) -> usize {
        self.r
    }
    /// The certified bound on the total intersection dimension.
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn members(&self) -> &[GfSubspace] {
        &self.members
    }
    pub fn len(&self) -> usize {
        self.members.len()
    }
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
    pub fn max_codim(&self) -> usize {
        self.members.iter().map(|h| h.codim()).max().unwrap_or(0)
    }

    pub(crate) fn from_parts(
        field: Arc<FqField>,
        m: usize,
        design_d: usize,
        t: usize,
        r: usize,
        s: usize,
        members: Vec<GfSubspace>,
    ) -> Self {
        SubspaceDesign { field, m, design_d, t, r, s, members }
    }
}

/// Identifying `F_q^m` with polynomials of degree below `m`, each admissible
/// element `a` yields the member `H_a = { P : P(a γ^i) = 0, i < t }`; the
/// family is an `(r, s)`-design with `s = (m-1) r / (d (t-r+1))`.
pub fn gk_design(
    fq: &Arc<FqField>,
    m: usize,
    design_d: usize,
    t: usize,
    r: usize,
) -> Result<SubspaceDesign> {
    let q = fq.q();
    if !(1 <= r && r <= t && t <= m && m < q) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= r <= t <= m < q, got r = {r}, t = {t}, m = {m}, q = {q}"
        )));
    }
    let adm = admissible_set(fq, design_d, t)?;
    let tower = adm.tower().clone();
    let gamma = fq.gamma();
    let mut members = Vec::with_capacity(adm.members().len());
    for alpha in adm.members() {
        let mut rows: Vec<Vec<Fq>> = vec![Vec::with_capacity(m); design_d * t];
        let mut scale: Fq = 1;
        for i in 0..t {
            let pt = tower.scale_m(alpha, scale);
            let mut ppow = tower.one();
            for _ in 0..m {
                for coord in 0..design_d {
                    rows[i * design_d + coord].push(ppow[coord]);
                }
                ppow = tower.mul_m(&ppow, &pt);
            }
            scale = fq.mul(scale, gamma);
        }
        let constraint = GfMatrix::from_rows(fq.clone(), rows)?;
        members.push(constraint.kernel_basis());
    }
    let s = (m - 1) * r / (design_d * (t - r + 1));
    Ok(SubspaceDesign::from_parts(fq.clone(), m, design_d, t, r, s, members))
}

/// Outcome of the exhaustive design check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DesignReport {
    pub max_sum: usize,
    pub argmax: u64,
    pub candidates: u128,
}

/// Exact maximum of the total intersection dimension over every subspace of
/// dimension at most `r`.
pub fn verify_subspace_design(
    design: &SubspaceDesign,
    r: usize,
    cap: u128,
    exec: Exec,
) -> Result<DesignReport> {
    let total = count_subspaces_up_to(design.field().q() as u64, design.m(), r);
    let candidates = subspaces_of_dim_at_most(design.field(), design.m(), r, cap)?;
    let constraints: Vec<GfMatrix> =
        design.members().iter().map(|h| h.constraints()).collect();
    let best = scan_argmax(candidates.len() as u64, exec, |idx| {
        let w = &candidates[idx as usize];
        let bt = w.basis().transpose();
        constraints
            .iter()
            .map(|nh| w.dim() - nh.mul(&bt).expect("compatible").rank())
            .sum::<usize>()
    });
    let (argmax, max_sum) = best.unwrap_or((0, 0));
    Ok(DesignReport { max_sum, argmax, candidates: total })
}

/// The product `H_1 x H_2 x ... x H_k` of the first `k` design members is a
/// `(k, m, r, s)`-periodic evasive subspace of `F_q^{km}` with the design's
/// `r` and `s`.
pub fn design_to_periodic_evasive(design: &SubspaceDesign, k: usize) -> Result<EvasiveWitness> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one block".into()));
    }
    if design.len() < k {
        return Err(Error::Infeasible {
            stage: "design product",
            detail: format!(
                "design has {} members, need {k}; enlarge the orbit field or compose",
                design.len()
            ),
        });
    }
    let m = design.m();
    let field = design.field().clone();
    let mut rows: Vec<Vec<Fq>> = Vec::new();
    for (block, h) in design.members().iter().take(k).enumerate() {
        for i in 0..h.dim() {
            let mut v = vec![0 as Fq; k * m];
            v[block * m..(block + 1) * m].copy_from_slice(h.basis().row(i));
            rows.push(v);
        }
    }
    let subspace = GfSubspace::from_rows(field, k * m, rows)?;
    EvasiveWitness::attested(
        subspace,
        EvasiveKind::Periodic,
        k,
        m,
        design.r(),
        design.s(),
        k * design.design_d() * design.t(),
        Attestation::Constructed,
    )
}

/// Knobs for the randomized search: total candidate-verification budget, the
/// master seed, the largest enumeration handled exhaustively, and the trial
/// count used beyond it.
#[derive(Clone, Copy, Debug)]
pub struct SearchConfig {
    pub budget: u64,
    pub seed: u64,
    pub exhaustive_cap: u64,
    pub sample_trials: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { budget: 100_000, seed: 0, exhaustive_cap: 1 << 22, sample_trials: 2_000 }
    }
}

/// A successful search: the witness plus how much work it took.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub witness: EvasiveWitness,
    pub attempts: u64,
    pub work: u64,
    pub measured: usize,
}

/// Samples uniformly random subspaces of codimension `ceil(eps k m)` until
/// one verifies `dim(V ∩ W) <= ceil(2r/eps)` against the BTT family, within
/// the configured budget of candidate verifications.
pub fn search_btt_evasive(
    field: &Arc<FqField>,
    k: usize,
    m: usize,
    r: usize,
    eps: f64,
    cfg: &SearchConfig,
    exec: Exec,
) -> Result<SearchOutcome> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "evasiveness parameter must lie in (0, 1), got {eps}"
        )));
    }
    if k == 0 || m == 0 || r == 0 || r > m {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= r <= m and k >= 1, got k = {k}, m = {m}, r = {r}"
        )));
    }
    // The existence argument needs r at most eps*m/2; equality is allowed.
    if 2.0 * r as f64 > eps * m as f64 + 1e-9 {
        return Err(Error::Infeasible {
            stage: "search precondition",
            detail: format!("need 2r <= eps*m, got r = {r}, eps = {eps}, m = {m}"),
        });
    }
    let codim = ceil_guarded(eps * (k * m) as f64).min(k * m);
    let dim = k * m - codim;
    let target = ceil_guarded(2.0 * r as f64 / eps);

    let total = checked_pow_u128(field.q() as u64, k * m * r);
    let exhaustive = total <= cfg.exhaustive_cap as u128;
    let cost = if exhaustive { total as u64 } else { cfg.sample_trials };

    let mut best: Option<usize> = None;
    let mut spent: u64 = 0;
    let mut attempt: u64 = 0;
    loop {
        if spent + cost > cfg.budget {
            return Err(Error::BudgetExhausted {
                budget: cfg.budget,
                best: best.unwrap_or(k * m),
                target,
            });
        }
        let stream_base = attempt * (cfg.sample_trials + 1);
        let mut rng = trial_rng(cfg.seed, stream_base);
        let subspace = loop {
            let rows: Vec<Vec<Fq>> =
                (0..dim).map(|_| random_fq_vec(field.q(), k * m, &mut rng)).collect();
            let cand = GfSubspace::from_rows(field.clone(), k * m, rows)?;
            if cand.dim() == dim {
                break cand;
            }
        };
        spent += cost;
        let (measured, attestation) = if exhaustive {
            let report =
                verify_btt_evasive_exec(&subspace, k, m, r, cfg.exhaustive_cap, exec)?;
            (report.max_intersection, Attestation::Exhaustive)
        } else {
            let report = verify_btt_evasive_sampled(
                &subspace,
                k,
                m,
                r,
                cfg.sample_trials,
                cfg.seed.wrapping_add(stream_base + 1),
                exec,
            );
            (report.max_intersection, Attestation::Sampled { trials: cfg.sample_trials })
        };
        if measured <= target {
            let s = if exhaustive { measured } else { target };
            let witness = EvasiveWitness::attested(
                subspace,
                EvasiveKind::Btt,
                k,
                m,
                r,
                s,
                codim,
                attestation,
            )?;
            return Ok(SearchOutcome { witness, attempts: attempt + 1, work: spent, measured });
        }
        best = Some(best.map_or(measured, |b| b.min(measured)));
        attempt += 1;
    }
}

/// Tiles the inner witness across the outer blocks: the result is
/// `W^{k'} ∩ W'`, a `(k'k, m, r, s')`-BTT evasive subspace when `W` is
/// `(k, m, r, s)`-BTT evasive and `W'` is `(k', km, s, s')`-periodic evasive.
pub fn compose(inner: &EvasiveWitness, outer: &EvasiveWitness) -> Result<EvasiveWitness> {
    if inner.kind() != EvasiveKind::Btt {
        return Err(Error::ChainMismatch("inner witness must be BTT-evasive".into()));
    }
    if outer.kind() != EvasiveKind::Periodic {
        return Err(Error::ChainMismatch("outer witness must be periodic-evasive".into()));
    }
    if outer.m() != inner.k() * inner.m() {
        return Err(Error::ChainMismatch(format!(
            "outer block length {} does not match inner ambient {}",
            outer.m(),
            inner.k() * inner.m()
        )));
    }
    if inner.s() > outer.r() {
        return Err(Error::ChainMismatch(format!(
            "inner bound s = {} exceeds outer strength r = {}",
            inner.s(),
            outer.r()
        )));
    }
    let tiled = inner.subspace().direct_power(outer.k());
    let subspace = tiled.intersect(outer.subspace())?;
    EvasiveWitness::attested(
        subspace,
        EvasiveKind::Btt,
        outer.k() * inner.k(),
        inner.m(),
        inner.r(),
        outer.s(),
        inner.codim_budget() * outer.k() + outer.codim_budget(),
        inner.attestation().weakest(outer.attestation()),
    )
}

/// Keeps the last `k_new` blocks: `W ∩ (0 x F_q^{k_new m})`, reindexed. Any
/// BTT subspace of the shorter ambient embeds as the suffix of one on the
/// longer ambient (prepend zero blocks), so the evasiveness bound carries
/// over.
pub fn restrict_witness(w: &EvasiveWitness, k_new: usize) -> Result<EvasiveWitness> {
    if k_new == 0 || k_new > w.k() {
        return Err(Error::InvalidParameter(format!(
            "cannot restrict {} blocks to {k_new}",
            w.k()
        )));
    }
    if k_new == w.k() {
        return Ok(w.clone());
    }
    let subspace = w.subspace().restrict_suffix(k_new * w.m())?;
    let codim = subspace.codim();
    let attestation = match w.attestation() {
        Attestation::Exhaustive => Attestation::Constructed,
        other => other,
    };
    EvasiveWitness::attested(
        subspace,
        w.kind(),
        k_new,
        w.m(),
        w.r(),
        w.s(),
        codim,
        attestation,
    )
}

/// Shape parameters for the two-level construction; the block counts and
/// vanishing multiplicities are chosen by the caller, with every inequality
/// the construction relies on checked here.
#[derive(Clone, Copy, Debug)]
pub struct TwoLevelConfig {
    /// Inner block count (searched level).
    pub k1: usize,
    /// Outer block count of the first design level.
    pub k2: usize,
    /// Extension degree for the design point orbits.
    pub dd: usize,
    /// Vanishing multiplicity of the first design level.
    pub t2: usize,
    /// Vanishing multiplicity of the second design level.
    pub t3: usize,
    /// Smallest field the construction accepts.
    pub min_q: usize,
    pub search: SearchConfig,
}

impl Default for TwoLevelConfig {
    fn default() -> Self {
        TwoLevelConfig {
            k1: 2,
            k2: 2,
            dd: 1,
            t2: 8,
            t3: 16,
            min_q: 2,
            search: SearchConfig::default(),
        }
    }
}

/// Builds a `(k, m, r, s)`-BTT evasive witness of codimension at most
/// `ceil(eps k m)` by composing a searched inner witness with one or two
/// design-derived periodic levels, depending on how `k` compares with
/// `k1` and `k1 k2`.
pub fn two_level_construct(
    field: &Arc<FqField>,
    k: usize,
    m: usize,
    r: usize,
    eps: f64,
    cfg: &TwoLevelConfig,
    exec: Exec,
) -> Result<EvasiveWitness> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "evasiveness parameter must lie in (0, 1), got {eps}"
        )));
    }
    if k == 0 || cfg.k1 == 0 || cfg.k2 == 0 {
        return Err(Error::InvalidParameter("block counts must be positive".into()));
    }
    if field.q() < cfg.min_q {
        return Err(Error::Infeasible {
            stage: "field size",
            detail: format!("q = {} below configured minimum {}", field.q(), cfg.min_q),
        });
    }
    let eps_inner = eps / 6.0;

    // Small k: the search alone covers it, with the inner-level parameter.
    if k <= cfg.k1 {
        let outcome = search_btt_evasive(field, k, m, r, eps_inner, &cfg.search, exec)?;
        return Ok(outcome.witness);
    }

    // Composed paths need the stronger hypothesis (equality allowed).
    if 24.0 * r as f64 > eps * m as f64 + 1e-9 {
        return Err(Error::Infeasible {
            stage: "two-level precondition",
            detail: format!("need 24r <= eps*m, got r = {r}, eps = {eps}, m = {m}"),
        });
    }

    let inner = search_btt_evasive(field, cfg.k1, m, r, eps_inner, &cfg.search, exec)?.witness;

    let level2 = |blocks: usize| -> Result<EvasiveWitness> {
        let design = gk_design(field, cfg.k1 * m, cfg.dd, cfg.t2, inner.s())?;
        let outer = design_to_periodic_evasive(&design, blocks)?;
        compose(&inner, &outer)
    };

    let finish = |w: EvasiveWitness| -> Result<EvasiveWitness> {
        let w = if w.k() == k { w } else { restrict_witness(&w, k)? };
        let budget = ceil_guarded(eps * (k * m) as f64);
        if w.codim() > budget {
            return Err(Error::Infeasible {
                stage: "codimension budget",
                detail: format!("codimension {} exceeds ceil(eps*k*m) = {budget}", w.codim()),
            });
        }
        Ok(w)
    };

    if k <= cfg.k1 * cfg.k2 {
        let k2p = k.div_ceil(cfg.k1);
        return finish(level2(k2p)?);
    }

    let w2 = level2(cfg.k2)?;
    let k3 = k.div_ceil(cfg.k1 * cfg.k2);
    let design2 = gk_design(field, cfg.k1 * cfg.k2 * m, cfg.dd, cfg.t3, w2.s())?;
    let outer2 = design_to_periodic_evasive(&design2, k3)?;
    let w3 = compose(&w2, &outer2)?;
    finish(w3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::FqField;

    fn f(q: u64, e: usize) -> Arc<FqField> {
        FqField::new(q, e).unwrap()
    }

    #[test]
    fn verify_extremes() {
        let f2 = f(2, 1);
        let full = GfSubspace::full(f2.clone(), 4);
        let zero = GfSubspace::zero_space(f2.clone(), 4);
        // Full space: every (2,2,1)-BTT image has dimension kr = 2.
        let rep = verify_btt_evasive_exec(&full, 2, 2, 1, 1 << 20, Exec::Auto).unwrap();
        assert_eq!(rep.max_intersection, 2);
        let rep = verify_btt_evasive_exec(&zero, 2, 2, 1, 1 << 20, Exec::Auto).unwrap();
        assert_eq!(rep.max_intersection, 0);
        let rep = verify_periodic_evasive_exec(&full, 2, 2, 1, 1 << 20, Exec::Auto).unwrap();
        assert_eq!(rep.max_intersection, 2);
        // Parallel and sequential scans agree.
        let seq = verify_btt_evasive_exec(&full, 2, 2, 1, 1 << 20, Exec::Sequential).unwrap();
        assert_eq!(seq.max_intersection, 2);
        assert_eq!(seq.argmax, rep.argmax);
    }

    #[test]
    fn verify_respects_cap() {
        let f3 = f(3, 1);
        let full = GfSubspace::full(f3, 9);
        assert!(matches!(
            verify_btt_evasive_exec(&full, 3, 3, 2, 100, Exec::Auto),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn admissible_set_prime_field_no_extension() {
        // q = 5, d = 1, t = 2: one scalar class, representatives 1 and
        // gamma^2 = 4; orbits {1,2} and {4,3}.
        let f5 = f(5, 1);
        let adm = admissible_set(&f5, 1, 2).unwrap();
        assert!(adm.bad().is_empty());
        assert_eq!(adm.classes().len(), 1);
        assert_eq!(adm.members(), &[vec![1], vec![4]]);
        assert_eq!(adm.point_set(&vec![1]), vec![vec![1], vec![2]]);
        assert_eq!(adm.point_set(&vec![4]), vec![vec![3], vec![4]]);
    }

    #[test]
    fn admissible_set_quadratic_extension_of_f3() {
        // F_9 = F_3[z]/(z^2+1): B consists of F_3^x plus z, 2z (whose
        // Frobenius ratio is 2), exactly the bound (q^2-1)/2 = 4.
        let f3 = f(3, 1);
        let adm = admissible_set(&f3, 2, 2).unwrap();
        let bad = adm.bad();
        assert_eq!(bad.len(), 4);
        assert!(bad.contains(&vec![1, 0]));
        assert!(bad.contains(&vec![2, 0]));
        assert!(bad.contains(&vec![0, 1]));
        assert!(bad.contains(&vec![0, 2]));
        // One class of size d(q-1) = 4, lexicographically least member 1+z.
        assert_eq!(adm.classes().len(), 1);
        assert_eq!(adm.classes()[0].len(), 4);
        assert_eq!(adm.members(), &[vec![1, 1]]);
        // S has size d*t = 4.
        assert_eq!(adm.point_set(&vec![1, 1]).len(), 4);
    }

    #[test]
    fn admissible_set_rejects_bad_t() {
        let f5 = f(5, 1);
        assert!(admissible_set(&f5, 1, 0).is_err());
        assert!(admissible_set(&f5, 1, 5).is_err());
    }

    #[test]
    fn gk_design_worked_example() {
        // q = 7, m = 4, d = 1, t = 3, r = 2: two members from one scalar
        // class (gamma = 3), vanishing on {1,3,2} and {6,4,5}.
        let f7 = f(7, 1);
        let design = gk_design(&f7, 4, 1, 3, 2).unwrap();
        assert_eq!(design.len(), 2);
        assert_eq!(design.s(), 3);
        assert_eq!(design.max_codim(), 3);
        let points = [vec![1u16, 3, 2], vec![6u16, 4, 5]];
        for (h, pts) in design.members().iter().zip(&points) {
            assert_eq!(h.dim(), 1);
            for i in 0..h.dim() {
                let poly = h.basis().row(i);
                for &pt in pts.iter() {
                    let mut acc: Fq = 0;
                    let mut p: Fq = 1;
                    for &c in poly {
                        acc = f7.add(acc, f7.mul(c, p));
                        p = f7.mul(p, pt);
                    }
                    assert_eq!(acc, 0, "member must vanish at {pt}");
                }
            }
        }
    }

    #[test]
    fn gk_design_rejects_bad_parameters() {
        let f7 = f(7, 1);
        assert!(gk_design(&f7, 4, 1, 3, 4).is_err()); // r > t
        assert!(gk_design(&f7, 4, 1, 5, 2).is_err()); // t > m
        assert!(gk_design(&f7, 7, 1, 3, 2).is_err()); // m >= q
    }

    #[test]
    fn design_verification_degenerate_members() {
        let f3 = f(3, 1);
        // A design whose only member is the full space: the maximum is r.
        let design = SubspaceDesign::from_parts(
            f3.clone(),
            3,
            1,
            1,
            2,
            2,
            vec![GfSubspace::full(f3.clone(), 3)],
        );
        let rep = verify_subspace_design(&design, 2, 1 << 20, Exec::Auto).unwrap();
        assert_eq!(rep.max_sum, 2);
        // r = 0 scans only the zero subspace.
        let rep0 = verify_subspace_design(&design, 0, 1 << 20, Exec::Auto).unwrap();
        assert_eq!(rep0.max_sum, 0);
    }

    fn tiny_design() -> SubspaceDesign {
        // q = 5, m = 3, t = 2, r = 1: members vanish on {1,2} and {4,3},
        // certified s = 1.
        gk_design(&f(5, 1), 3, 1, 2, 1).unwrap()
    }

    #[test]
    fn design_product_is_periodic_evasive() {
        let design = tiny_design();
        assert_eq!(design.s(), 1);
        let desrep = verify_subspace_design(&design, 1, 1 << 20, Exec::Auto).unwrap();
        assert!(desrep.max_sum <= 1);
        let w = design_to_periodic_evasive(&design, 2).unwrap();
        assert_eq!((w.k(), w.m(), w.r(), w.s()), (2, 3, 1, 1));
        assert_eq!(w.codim(), 4);
        // The product bound transfers to the periodic family.
        let rep = verify_periodic_evasive(&w, 1 << 24).unwrap();
        assert!(rep.max_intersection <= desrep.max_sum);
        // Not enough members is an error.
        assert!(design_to_periodic_evasive(&design, 3).is_err());
    }

    #[test]
    fn search_finds_witness_and_is_deterministic() {
        let f2 = f(2, 1);
        let cfg = SearchConfig { budget: 10_000, seed: 7, ..SearchConfig::default() };
        let out = search_btt_evasive(&f2, 2, 4, 1, 0.5, &cfg, Exec::Auto).unwrap();
        assert_eq!(out.witness.codim(), 4);
        assert!(out.measured <= 4);
        assert_eq!(out.witness.attestation(), Attestation::Exhaustive);
        let rep = verify_btt_evasive(&out.witness, 1 << 20).unwrap();
        assert_eq!(rep.max_intersection, out.measured);
        // Same seed, same witness; different seed may differ.
        let again = search_btt_evasive(&f2, 2, 4, 1, 0.5, &cfg, Exec::Sequential).unwrap();
        assert_eq!(again.witness.subspace(), out.witness.subspace());
        assert_eq!(again.attempts, out.attempts);
    }

    #[test]
    fn search_rejects_oversized_r() {
        let f2 = f(2, 1);
        let cfg = SearchConfig::default();
        // 2r > eps*m: the existence hypothesis fails.
        assert!(matches!(
            search_btt_evasive(&f2, 2, 4, 2, 0.5, &cfg, Exec::Auto),
            Err(Error::Infeasible { stage: "search precondition", .. })
        ));
    }

    #[test]
    fn search_budget_exhaustion_reports_best() {
        let f2 = f(2, 1);
        let cfg = SearchConfig { budget: 100, seed: 1, ..SearchConfig::default() };
        // One exhaustive pass costs 256 > 100.
        match search_btt_evasive(&f2, 2, 4, 1, 0.5, &cfg, Exec::Auto) {
            Err(Error::BudgetExhausted { budget: 100, target: 4, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn random_candidates_pass_at_positive_rate() {
        // The union-bound argument says a random subspace works with
        // positive probability; across 20 seeds at least one first attempt
        // must succeed.
        let f2 = f(2, 1);
        let mut first_attempt_passes = 0;
        for seed in 0..20 {
            let cfg = SearchConfig { budget: 256, seed, ..SearchConfig::default() };
            if let Ok(out) = search_btt_evasive(&f2, 2, 4, 1, 0.5, &cfg, Exec::Auto) {
                assert_eq!(out.attempts, 1);
                first_attempt_passes += 1;
            }
        }
        assert!(first_attempt_passes > 0);
    }

    fn attested_sum_zero_inner() -> EvasiveWitness {
        // W = {x in F_5^4 : x_1+x_2+x_3+x_4 = 0} as a (2,2,1,2)-BTT evasive
        // subspace, bound established by exhaustion below.
        let f5 = f(5, 1);
        let rows = vec![vec![4, 1, 0, 0], vec![4, 0, 1, 0], vec![4, 0, 0, 1]];
        let w = GfSubspace::from_rows(f5, 4, rows).unwrap();
        let rep = verify_btt_evasive_exec(&w, 2, 2, 1, 1 << 20, Exec::Auto).unwrap();
        assert_eq!(rep.max_intersection, 2);
        EvasiveWitness::attested(w, EvasiveKind::Btt, 2, 2, 1, 2, 1, Attestation::Exhaustive)
            .unwrap()
    }

    #[test]
    fn compose_chain_over_f5() {
        let inner = attested_sum_zero_inner();
        let f5 = f(5, 1);
        let design = gk_design(&f5, 4, 1, 2, 2).unwrap();
        assert_eq!(design.s(), 6);
        assert_eq!(design.len(), 2);
        let outer = design_to_periodic_evasive(&design, 2).unwrap();
        assert_eq!((outer.k(), outer.m(), outer.r(), outer.s()), (2, 4, 2, 6));
        let w = compose(&inner, &outer).unwrap();
        assert_eq!((w.k(), w.m(), w.r(), w.s()), (4, 2, 1, 6));
        assert!(w.codim() <= w.codim_budget());
        let rep = verify_btt_evasive(&w, 1 << 20).unwrap();
        assert!(rep.max_intersection <= 6, "measured {}", rep.max_intersection);
    }

    #[test]
    fn compose_with_trivial_outer() {
        let inner = attested_sum_zero_inner();
        let f5 = f(5, 1);
        let full = GfSubspace::full(f5, 8);
        let outer = EvasiveWitness::attested(
            full,
            EvasiveKind::Periodic,
            2,
            4,
            2,
            4,
            0,
            Attestation::Claimed,
        )
        .unwrap();
        let w = compose(&inner, &outer).unwrap();
        assert_eq!(w.subspace(), &inner.subspace().direct_power(2));
    }

    #[test]
    fn compose_rejects_mismatched_chain() {
        let inner = attested_sum_zero_inner();
        let f5 = f(5, 1);
        // Wrong outer block length.
        let outer = EvasiveWitness::attested(
            GfSubspace::full(f5.clone(), 6),
            EvasiveKind::Periodic,
            2,
            3,
            2,
            4,
            0,
            Attestation::Claimed,
        )
        .unwrap();
        assert!(matches!(compose(&inner, &outer), Err(Error::ChainMismatch(_))));
        // Outer strength below inner s.
        let outer2 = EvasiveWitness::attested(
            GfSubspace::full(f5, 8),
            EvasiveKind::Periodic,
            2,
            4,
            1,
            4,
            0,
            Attestation::Claimed,
        )
        .unwrap();
        assert!(matches!(compose(&inner, &outer2), Err(Error::ChainMismatch(_))));
    }

    #[test]
    fn restriction_preserves_the_bound() {
        let inner = attested_sum_zero_inner();
        let f5 = f(5, 1);
        let design = gk_design(&f5, 4, 1, 2, 2).unwrap();
        let outer = design_to_periodic_evasive(&design, 2).unwrap();
        let w = compose(&inner, &outer).unwrap();
        let w3 = restrict_witness(&w, 3).unwrap();
        assert_eq!(w3.k(), 3);
        assert_eq!(w3.subspace().ambient(), 6);
        let rep = verify_btt_evasive(&w3, 1 << 20).unwrap();
        assert!(rep.max_intersection <= w3.s());
    }

    #[test]
    fn two_level_small_k_uses_direct_search() {
        let f2 = f(2, 1);
        let cfg = TwoLevelConfig { k1: 2, ..TwoLevelConfig::default() };
        let w = two_level_construct(&f2, 1, 14, 1, 0.9, &cfg, Exec::Auto).unwrap();
        assert_eq!(w.k(), 1);
        assert_eq!(w.codim(), 3); // ceil((0.9/6)*14)
        assert_eq!(w.attestation(), Attestation::Exhaustive);
    }

    #[test]
    fn two_level_rejects_oversized_r() {
        let f53 = f(53, 1);
        let cfg = TwoLevelConfig { k1: 2, k2: 2, t2: 26, ..TwoLevelConfig::default() };
        assert!(matches!(
            two_level_construct(&f53, 3, 26, 2, 0.95, &cfg, Exec::Auto),
            Err(Error::Infeasible { stage: "two-level precondition", .. })
        ));
    }

    #[test]
    fn two_level_single_composition_with_padding() {
        // k = 3 sits between k1 = 2 and k1*k2 = 4: one design level, then
        // restriction from 4 blocks to 3.
        let f53 = f(53, 1);
        let cfg = TwoLevelConfig {
            k1: 2,
            k2: 2,
            dd: 1,
            t2: 26,
            t3: 26,
            min_q: 2,
            search: SearchConfig { seed: 5, ..SearchConfig::default() },
        };
        let w = two_level_construct(&f53, 3, 26, 1, 0.95, &cfg, Exec::Auto).unwrap();
        assert_eq!((w.k(), w.m(), w.r()), (3, 26, 1));
        assert_eq!(w.subspace().ambient(), 78);
        assert!(w.codim() <= 75); // ceil(0.95 * 78)
        assert_eq!(w.s(), 47); // floor(51*13 / (26-13+1))
        assert!(matches!(w.attestation(), Attestation::Sampled { .. }));
    }

    #[test]
    fn two_level_full_path_two_compositions() {
        // k = 16 = k1*k2*k3 with k1 = 2, k2 = 4, k3 = 2: exact tiling, no
        // padding, and the final codimension meets ceil(eps*k*m) = 384
        // exactly when every stage is transverse.
        let f211 = f(211, 1);
        let cfg = TwoLevelConfig {
            k1: 2,
            k2: 4,
            dd: 1,
            t2: 30,
            t3: 40,
            min_q: 2,
            search: SearchConfig { seed: 3, ..SearchConfig::default() },
        };
        let w = two_level_construct(&f211, 16, 25, 1, 0.96, &cfg, Exec::Auto).unwrap();
        assert_eq!((w.k(), w.m(), w.r()), (16, 25, 1));
        assert_eq!(w.subspace().ambient(), 400);
        assert!(w.codim() <= 384);
        assert!(matches!(w.attestation(), Attestation::Sampled { .. }));
    }

    #[test]
    fn two_level_respects_min_q() {
        let f2 = f(2, 1);
        let cfg = TwoLevelConfig { min_q: 100, ..TwoLevelConfig::default() };
        assert!(matches!(
            two_level_construct(&f2, 1, 14, 1, 0.9, &cfg, Exec::Auto),
            Err(Error::Infeasible { stage: "field size", .. })
        ));
    }
}
