//! Deterministic randomness for experiments. Every trial draws from its own
//! ChaCha8 stream derived from a master seed, so results do not depend on
//! scheduling or trial count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf::{Fq, FieldTower, Fqm};
use crate::rs::RsSubfieldCode;

/// Independent generator for one trial of a seeded experiment.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Uniform vector over the base field.
pub fn random_fq_vec(q: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<Fq> {
    (0..len).map(|_| rng.gen_range(0..q) as Fq).collect()
}

/// Uniform message of `k` extension-field symbols.
pub fn random_message(tower: &FieldTower, k: usize, rng: &mut ChaCha8Rng) -> Vec<Fqm> {
    (0..k).map(|_| random_fq_vec(tower.q(), tower.m(), rng)).collect()
}

/// Replaces exactly `e` distinct positions of a codeword with different
/// symbols.
pub fn corrupt_exactly(
    code: &RsSubfieldCode,
    word: &[Fqm],
    e: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Fqm>> {
    let n = word.len();
    if e > n {
        return Err(Error::InvalidParameter(format!(
            "cannot corrupt {e} of {n} positions"
        )));
    }
    let tower = code.tower();
    let mut out = word.to_vec();
    let positions = rand::seq::index::sample(rng, n, e);
    for pos in positions.iter() {
        loop {
            let sym = random_fq_vec(tower.q(), tower.m(), rng);
            if sym != out[pos] {
                out[pos] = sym;
                break;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::make_tower;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = trial_rng(42, 3);
            (0..4).map(|_| r.gen()).collect()
        };
        let b: Vec<u64> = {
            let mut r = trial_rng(42, 3);
            (0..4).map(|_| r.gen()).collect()
        };
        let c: Vec<u64> = {
            let mut r = trial_rng(42, 4);
            (0..4).map(|_| r.gen()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn corruption_changes_exactly_e_positions() {
        let tower = make_tower(2, 2, 2).unwrap();
        let code = RsSubfieldCode::new(tower.clone(), 4, 2, None).unwrap();
        let mut rng = trial_rng(7, 0);
        let msg = random_message(&tower, 2, &mut rng);
        let word = code.encode(&msg).unwrap();
        for e in 0..=4 {
            let bad = corrupt_exactly(&code, &word, e, &mut rng).unwrap();
            let diff = word.iter().zip(&bad).filter(|(x, y)| x != y).count();
            assert_eq!(diff, e);
        }
        assert!(corrupt_exactly(&code, &word, 5, &mut rng).is_err());
    }
}
