//! Restricted codes: a Reed-Solomon subfield code whose messages are drawn
//! from an evasive subspace, so that list decoding returns a coset of a
//! provably small subspace instead of one of dimension up to k(s-1).

use crate::error::{Error, Result};
use crate::evasive::{EvasiveKind, EvasiveWitness};
use crate::gf::{Fq, Fqm};
use crate::linalg::affine_intersect;
use crate::rs::{
    agreement, list_decode_structured, DecodeParams, RsSubfieldCode, DEFAULT_PRUNE_CAP,
};

/// A subfield code restricted to messages inside a BTT-evasive witness.
///
/// The decoder's output coset lives in the image of a block-triangular
/// Toeplitz matrix with at most `s - 1` block columns. Any such image with
/// fewer than `r` block columns extends to one with exactly `r` (append
/// columns keeping the leading block full rank), so a witness attested for
/// block width `r >= s - 1` bounds every intersection the decoder can
/// produce.
#[derive(Clone, Debug)]
pub struct RestrictedCode {
    base: RsSubfieldCode,
    params: DecodeParams,
    witness: EvasiveWitness,
}

impl RestrictedCode {
    pub fn new(
        base: RsSubfieldCode,
        params: DecodeParams,
        witness: EvasiveWitness,
    ) -> Result<Self> {
        // Revalidate the parameters against this code.
        let params = DecodeParams::new(&base, params.s(), params.d(), params.t())?;
        if witness.kind() != EvasiveKind::Btt {
            return Err(Error::ChainMismatch(
                "restricted code needs a BTT-evasive witness".into(),
            ));
        }
        let ambient = base.k() * base.tower().m();
        if witness.k() * witness.m() != ambient {
            return Err(Error::Incompatible(format!(
                "witness ambient {} does not match message space {ambient}",
                witness.k() * witness.m()
            )));
        }
        if witness.r() + 1 < params.s() {
            return Err(Error::ChainMismatch(format!(
                "witness block width {} cannot absorb lists of width {}",
                witness.r(),
                params.s() - 1
            )));
        }
        Ok(RestrictedCode { base, params, witness })
    }

    pub fn base(&self) -> &RsSubfieldCode {
        &self.base
    }
    pub fn params(&self) -> &DecodeParams {
        &self.params
    }
    pub fn witness(&self) -> &EvasiveWitness {
        &self.witness
    }
    /// Number of subfield symbols in a restricted message.
    pub fn message_dim(&self) -> usize {
        self.witness.subspace().dim()
    }

    /// Expands coordinates over the witness basis into a full message.
    pub fn message_from_coords(&self, coords: &[Fq]) -> Result<Vec<Fqm>> {
        if coords.len() != self.message_dim() {
            return Err(Error::Incompatible(format!(
                "expected {} coordinates, got {}",
                self.message_dim(),
                coords.len()
            )));
        }
        let tower = self.base.tower();
        let fq = tower.fq();
        let basis = self.witness.subspace().basis();
        let mut flat = vec![0 as Fq; basis.cols()];
        for (i, &c) in coords.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (t, &b) in flat.iter_mut().zip(basis.row(i)) {
                *t = fq.add(*t, fq.mul(c, b));
            }
        }
        tower.unflatten_blocks(&flat)
    }

    /// Reads coordinates back off a message; the basis is row reduced, so
    /// they sit at the pivot positions.
    pub fn coords_from_message(&self, msg: &[Fqm]) -> Result<Vec<Fq>> {
        let flat = self.base.tower().flatten_blocks(msg);
        if !self.witness.subspace().contains(&flat) {
            return Err(Error::Incompatible(
                "message lies outside the restricted message space".into(),
            ));
        }
        Ok(self.coords_of_flat(&flat))
    }

    fn coords_of_flat(&self, flat: &[Fq]) -> Vec<Fq> {
        self.witness
            .subspace()
            .pivot_columns()
            .iter()
            .map(|&c| flat[c])
            .collect()
    }

    pub fn encode(&self, coords: &[Fq]) -> Result<Vec<Fqm>> {
        let msg = self.message_from_coords(coords)?;
        self.base.encode(&msg)
    }

    /// List decodes within the witness: runs the structured decoder, then
    /// intersects the output coset with the witness before pruning. Returns
    /// the surviving coordinate vectors and the dimension of the
    /// intersection subspace.
    pub fn list_decode_with_cap(
        &self,
        word: &[Fqm],
        cap: u128,
    ) -> Result<(Vec<Vec<Fq>>, usize)> {
        let tower = self.base.tower();
        let fq = tower.fq();
        let q = fq.q() as u128;
        let list = list_decode_structured(&self.base, &self.params, word)?;
        let Some(shift) = list.shift() else {
            return Ok((Vec::new(), 0));
        };
        let (shift, inter) =
            affine_intersect(shift, list.subspace(), self.witness.subspace())?;
        let dim = inter.dim();
        let Some(shift) = shift else {
            return Ok((Vec::new(), dim));
        };
        let total = q
            .checked_pow(dim as u32)
            .ok_or(Error::CapExceeded { needed: u128::MAX, cap })?;
        if total > cap {
            return Err(Error::CapExceeded { needed: total, cap });
        }
        let basis = inter.basis();
        let mut out = Vec::new();
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
            let msg = tower.unflatten_blocks(&flat)?;
            let enc = self.base.encode(&msg)?;
            if agreement(&enc, word) >= self.params.t() {
                out.push(self.coords_of_flat(&flat));
            }
        }
        Ok((out, dim))
    }

    pub fn list_decode(&self, word: &[Fqm]) -> Result<(Vec<Vec<Fq>>, usize)> {
        self.list_decode_with_cap(word, DEFAULT_PRUNE_CAP)
    }

    /// Reference decoder over the restricted message space: scans every
    /// coordinate vector. Exponential in the witness dimension.
    pub fn brute_force_list(&self, word: &[Fqm], cap: u128) -> Result<Vec<Vec<Fq>>> {
        let q = self.base.tower().fq().q() as u128;
        let dim = self.message_dim();
        let total = q
            .checked_pow(dim as u32)
            .ok_or(Error::CapExceeded { needed: u128::MAX, cap })?;
        if total > cap {
            return Err(Error::CapExceeded { needed: total, cap });
        }
        let mut out = Vec::new();
        for mut stamp in 0..total {
            let mut coords = vec![0 as Fq; dim];
            for c in coords.iter_mut() {
                *c = (stamp % q) as Fq;
                stamp /= q;
            }
            let enc = self.encode(&coords)?;
            if agreement(&enc, word) >= self.params.t() {
                out.push(coords);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evasive::Attestation;
    use crate::gf::{make_tower, FieldTower};
    use crate::linalg::GfSubspace;
    use crate::par::Exec;
    use crate::sim::{corrupt_exactly, random_fq_vec, trial_rng};
    use std::sync::Arc;

    fn tiny_code() -> (Arc<FieldTower>, RsSubfieldCode, DecodeParams) {
        let tower = make_tower(5, 1, 2).unwrap();
        let code = RsSubfieldCode::new(tower.clone(), 4, 2, None).unwrap();
        let params = DecodeParams::new(&code, 2, 1, 3).unwrap();
        (tower, code, params)
    }

    fn full_witness(tower: &Arc<FieldTower>) -> EvasiveWitness {
        EvasiveWitness::attested(
            GfSubspace::full(tower.fq().clone(), 4),
            EvasiveKind::Btt,
            2,
            2,
            1,
            2,
            0,
            Attestation::Claimed,
        )
        .unwrap()
    }

    fn sum_zero_witness(tower: &Arc<FieldTower>) -> EvasiveWitness {
        let rows = vec![vec![4, 1, 0, 0], vec![4, 0, 1, 0], vec![4, 0, 0, 1]];
        let w = GfSubspace::from_rows(tower.fq().clone(), 4, rows).unwrap();
        let rep =
            crate::evasive::verify_btt_evasive_exec(&w, 2, 2, 1, 1 << 20, Exec::Auto).unwrap();
        EvasiveWitness::attested(
            w,
            EvasiveKind::Btt,
            2,
            2,
            1,
            rep.max_intersection,
            1,
            Attestation::Exhaustive,
        )
        .unwrap()
    }

    #[test]
    fn full_witness_matches_base_decoder() {
        let (tower, code, params) = tiny_code();
        let rc = RestrictedCode::new(code.clone(), params, full_witness(&tower)).unwrap();
        assert_eq!(rc.message_dim(), 4);
        for trial in 0..10 {
            let mut rng = trial_rng(41, trial);
            let word: Vec<Fqm> =
                (0..4).map(|_| crate::sim::random_message(&tower, 1, &mut rng)[0].clone()).collect();
            let (mut restricted, _) = rc.list_decode(&word).unwrap();
            let list = list_decode_structured(&code, &params, &word).unwrap();
            let mut base: Vec<Vec<Fq>> = list
                .prune(&code, &word, params.t())
                .unwrap()
                .iter()
                .map(|m| rc.coords_from_message(m).unwrap())
                .collect();
            restricted.sort();
            base.sort();
            assert_eq!(restricted, base);
        }
    }

    #[test]
    fn zero_witness_admits_only_zero() {
        let (tower, code, params) = tiny_code();
        let w = EvasiveWitness::attested(
            GfSubspace::zero_space(tower.fq().clone(), 4),
            EvasiveKind::Btt,
            2,
            2,
            1,
            0,
            4,
            Attestation::Claimed,
        )
        .unwrap();
        let rc = RestrictedCode::new(code.clone(), params, w).unwrap();
        assert_eq!(rc.message_dim(), 0);
        let zero_word = rc.encode(&[]).unwrap();
        let (list, dim) = rc.list_decode(&zero_word).unwrap();
        assert_eq!(list, vec![Vec::<Fq>::new()]);
        assert_eq!(dim, 0);
        // A word far from the zero codeword decodes to nothing.
        let far: Vec<Fqm> = vec![vec![1, 0]; 4];
        let (list, _) = rc.list_decode(&far).unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn planted_message_survives_one_error() {
        let (tower, code, params) = tiny_code();
        let rc = RestrictedCode::new(code.clone(), params, sum_zero_witness(&tower)).unwrap();
        assert_eq!(rc.message_dim(), 3);
        let e = params.max_errors(&code);
        assert_eq!(e, 1);
        for trial in 0..30 {
            let mut rng = trial_rng(42, trial);
            let coords = random_fq_vec(5, 3, &mut rng);
            let cw = rc.encode(&coords).unwrap();
            let word = corrupt_exactly(&code, &cw, e, &mut rng).unwrap();
            let (mut list, dim) = rc.list_decode(&word).unwrap();
            assert!(list.contains(&coords), "trial {trial}: planted message lost");
            assert!(dim <= rc.witness().s() + 1);
            let mut brute = rc.brute_force_list(&word, 1 << 20).unwrap();
            list.sort();
            brute.sort();
            assert_eq!(list, brute, "trial {trial}");
        }
    }

    #[test]
    fn encoding_is_linear() {
        let (tower, code, params) = tiny_code();
        let rc = RestrictedCode::new(code, params, sum_zero_witness(&tower)).unwrap();
        let mut rng = trial_rng(7, 0);
        for _ in 0..10 {
            let x = random_fq_vec(5, 3, &mut rng);
            let y = random_fq_vec(5, 3, &mut rng);
            let fq = tower.fq();
            let xy: Vec<Fq> = x.iter().zip(&y).map(|(&a, &b)| fq.add(a, b)).collect();
            let ex = rc.encode(&x).unwrap();
            let ey = rc.encode(&y).unwrap();
            let exy = rc.encode(&xy).unwrap();
            for i in 0..ex.len() {
                assert_eq!(exy[i], tower.add_m(&ex[i], &ey[i]));
            }
        }
    }

    #[test]
    fn round_trip_through_coords() {
        let (tower, code, params) = tiny_code();
        let rc = RestrictedCode::new(code, params, sum_zero_witness(&tower)).unwrap();
        let mut rng = trial_rng(9, 0);
        for _ in 0..20 {
            let coords = random_fq_vec(5, 3, &mut rng);
            let msg = rc.message_from_coords(&coords).unwrap();
            assert_eq!(rc.coords_from_message(&msg).unwrap(), coords);
        }
        // Messages outside the witness are rejected.
        let outside: Vec<Fqm> = vec![vec![1, 0], vec![0, 0]];
        assert!(rc.coords_from_message(&outside).is_err());
    }

    #[test]
    fn rejects_incompatible_builds() {
        let (tower, code, params) = tiny_code();
        // Wrong ambient.
        let w6 = EvasiveWitness::attested(
            GfSubspace::full(tower.fq().clone(), 6),
            EvasiveKind::Btt,
            3,
            2,
            1,
            2,
            0,
            Attestation::Claimed,
        )
        .unwrap();
        assert!(RestrictedCode::new(code.clone(), params, w6).is_err());
        // Witness too narrow for the list width: s = 2 needs r >= 1.
        let narrow = EvasiveWitness::attested(
            GfSubspace::full(tower.fq().clone(), 4),
            EvasiveKind::Btt,
            2,
            2,
            0,
            0,
            0,
            Attestation::Claimed,
        )
        .unwrap();
        assert!(matches!(
            RestrictedCode::new(code.clone(), params, narrow),
            Err(Error::ChainMismatch(_))
        ));
        // Periodic witnesses are not accepted.
        let wp = EvasiveWitness::attested(
            GfSubspace::full(tower.fq().clone(), 4),
            EvasiveKind::Periodic,
            2,
            2,
            1,
            2,
            0,
            Attestation::Claimed,
        )
        .unwrap();
        assert!(matches!(
            RestrictedCode::new(code, params, wp),
            Err(Error::ChainMismatch(_))
        ));
    }

    #[test]
    fn enumeration_respects_cap() {
        let (tower, code, params) = tiny_code();
        let rc = RestrictedCode::new(code, params, full_witness(&tower)).unwrap();
        let cw = rc.encode(&[1, 2, 3, 4]).unwrap();
        assert!(matches!(
            rc.list_decode_with_cap(&cw, 0),
            Err(Error::CapExceeded { .. })
        ));
    }
}
