//! JSON descriptions of fields, codes, witnesses, designs, and decode
//! output, shared by the command-line tools and stored artifacts. Formats
//! are plain data with stable field names, so files survive refactors of
//! the in-memory types.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evasive::{Attestation, EvasiveKind, EvasiveWitness, SubspaceDesign};
use crate::gf::{make_tower, FieldTower, Fq};
use crate::linalg::GfSubspace;
use crate::rs::RsSubfieldCode;

/// A field tower `F_{p^e} ⊂ F_{(p^e)^m}`, written `p^e:m`; the extension
/// part defaults to 1 when omitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub p: u64,
    pub e: usize,
    pub m: usize,
}

impl FieldSpec {
    pub fn parse(s: &str) -> Result<FieldSpec> {
        let bad = || Error::Parse(format!("cannot read field spec {s:?}, expected p^e:m"));
        let (base, m) = match s.split_once(':') {
            Some((b, m)) => (b, m.parse::<usize>().map_err(|_| bad())?),
            None => (s, 1),
        };
        let (p, e) = match base.split_once('^') {
            Some((p, e)) => (
                p.parse::<u64>().map_err(|_| bad())?,
                e.parse::<usize>().map_err(|_| bad())?,
            ),
            None => (base.parse::<u64>().map_err(|_| bad())?, 1),
        };
        Ok(FieldSpec { p, e, m })
    }

    pub fn q(&self) -> u64 {
        (self.p as u128).pow(self.e as u32).min(u64::MAX as u128) as u64
    }

    pub fn tower(&self) -> Result<Arc<FieldTower>> {
        make_tower(self.p, self.e, self.m)
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.e == 1 {
            write!(f, "{}:{}", self.p, self.m)
        } else {
            write!(f, "{}^{}:{}", self.p, self.e, self.m)
        }
    }
}

fn kind_name(kind: EvasiveKind) -> &'static str {
    match kind {
        EvasiveKind::Btt => "btt",
        EvasiveKind::Periodic => "periodic",
    }
}

fn kind_from_name(name: &str) -> Result<EvasiveKind> {
    match name {
        "btt" => Ok(EvasiveKind::Btt),
        "periodic" => Ok(EvasiveKind::Periodic),
        other => Err(Error::Parse(format!("unknown witness kind {other:?}"))),
    }
}

fn attestation_name(a: Attestation) -> String {
    match a {
        Attestation::Constructed => "constructed".into(),
        Attestation::Exhaustive => "exhaustive".into(),
        Attestation::Sampled { trials } => format!("sampled:{trials}"),
        Attestation::Claimed => "claimed".into(),
    }
}

fn attestation_from_name(name: &str) -> Result<Attestation> {
    match name {
        "constructed" => Ok(Attestation::Constructed),
        "exhaustive" => Ok(Attestation::Exhaustive),
        "claimed" => Ok(Attestation::Claimed),
        other => match other.strip_prefix("sampled:") {
            Some(n) => Ok(Attestation::Sampled {
                trials: n
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad trial count in {other:?}")))?,
            }),
            None => Err(Error::Parse(format!("unknown attestation {other:?}"))),
        },
    }
}

fn basis_rows(sub: &GfSubspace) -> Vec<Vec<Fq>> {
    (0..sub.dim()).map(|r| sub.basis().row(r).to_vec()).collect()
}

/// Stored form of an evasive witness: parameters, how its bound was
/// established, and a spanning basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessFile {
    pub p: u64,
    pub e: usize,
    pub q: u64,
    pub k: usize,
    pub m: usize,
    pub r: usize,
    pub s: usize,
    pub kind: String,
    pub codim: usize,
    pub verified: String,
    pub basis: Vec<Vec<Fq>>,
}

impl WitnessFile {
    pub fn from_witness(w: &EvasiveWitness) -> WitnessFile {
        let field = w.field();
        WitnessFile {
            p: field.p(),
            e: field.e(),
            q: field.q() as u64,
            k: w.k(),
            m: w.m(),
            r: w.r(),
            s: w.s(),
            kind: kind_name(w.kind()).into(),
            codim: w.codim(),
            verified: attestation_name(w.attestation()),
            basis: basis_rows(w.subspace()),
        }
    }

    pub fn to_witness(&self) -> Result<EvasiveWitness> {
        let field = crate::gf::FqField::new(self.p, self.e)?;
        if field.q() as u64 != self.q {
            return Err(Error::Parse(format!(
                "stored q = {} disagrees with p^e = {}",
                self.q,
                field.q()
            )));
        }
        let sub = GfSubspace::from_rows(field, self.k * self.m, self.basis.clone())?;
        if sub.codim() != self.codim {
            return Err(Error::Parse(format!(
                "stored codimension {} disagrees with basis rank (codim {})",
                self.codim,
                sub.codim()
            )));
        }
        EvasiveWitness::attested(
            sub,
            kind_from_name(&self.kind)?,
            self.k,
            self.m,
            self.r,
            self.s,
            self.codim,
            attestation_from_name(&self.verified)?,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<WitnessFile> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("witness file: {e}")))
    }
}

/// Stored form of a subspace design: parameters plus one basis per member.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignFile {
    pub p: u64,
    pub e: usize,
    pub m: usize,
    pub design_d: usize,
    pub t: usize,
    pub r: usize,
    pub s: usize,
    pub members: Vec<Vec<Vec<Fq>>>,
}

impl DesignFile {
    pub fn from_design(d: &SubspaceDesign) -> DesignFile {
        DesignFile {
            p: d.field().p(),
            e: d.field().e(),
            m: d.m(),
            design_d: d.design_d(),
            t: d.t(),
            r: d.r(),
            s: d.s(),
            members: d.members().iter().map(basis_rows).collect(),
        }
    }

    pub fn to_design(&self) -> Result<SubspaceDesign> {
        let field = crate::gf::FqField::new(self.p, self.e)?;
        let members = self
            .members
            .iter()
            .map(|rows| GfSubspace::from_rows(field.clone(), self.m, rows.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(SubspaceDesign::from_parts(
            field,
            self.m,
            self.design_d,
            self.t,
            self.r,
            self.s,
            members,
        ))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<DesignFile> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("design file: {e}")))
    }
}

/// Stored form of a code: the field tower, length, dimension, and
/// evaluation points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CodeSpec {
    pub field: FieldSpec,
    pub n: usize,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Fq>>,
}

impl CodeSpec {
    pub fn from_code(code: &RsSubfieldCode) -> CodeSpec {
        let tower = code.tower();
        CodeSpec {
            field: FieldSpec { p: tower.fq().p(), e: tower.fq().e(), m: tower.m() },
            n: code.n(),
            k: code.k(),
            points: Some(code.points().to_vec()),
        }
    }

    pub fn to_code(&self) -> Result<RsSubfieldCode> {
        RsSubfieldCode::new(self.field.tower()?, self.n, self.k, self.points.clone())
    }
}

/// Decoder output as written by the tools: the affine shift, the subspace
/// the list lives in, and the pruned messages.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ListFile {
    pub empty: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<Fq>>,
    pub dim: usize,
    pub basis: Vec<Vec<Fq>>,
    pub messages: Vec<Vec<Vec<Fq>>>,
}

/// One experiment trial. Timing fields are filled only when requested, so
/// default output stays byte-for-byte reproducible.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub errors: usize,
    pub list_size: usize,
    pub list_dim: usize,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpolate_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prune_ms: Option<f64>,
}

pub const TRIAL_CSV_HEADER: &str =
    "trial,errors,list_size,list_dim,success,interpolate_ms,system_ms,prune_ms";

fn opt_ms(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

impl TrialRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.trial,
            self.errors,
            self.list_size,
            self.list_dim,
            self.success,
            opt_ms(self.interpolate_ms),
            opt_ms(self.system_ms),
            opt_ms(self.prune_ms)
        )
    }

    pub fn jsonl(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}
