mod common;

use std::collections::BTreeMap;

use common::{mutate, valid_proofs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use restproof::reason::{check_proof, sources_map, Proof};
use restproof::samples;

#[test]
fn every_mutation_is_caught() {
    let proofs = valid_proofs();
    for (p, sources) in &proofs {
        check_proof(p, sources).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut per_family: BTreeMap<&str, usize> = BTreeMap::new();
    let mut tried = 0;
    while per_family.values().sum::<usize>() < 100 {
        tried += 1;
        assert!(tried < 10_000, "generator stalled");
        let (proof, sources) = &proofs[tried % proofs.len()];
        let iris: Vec<String> = sources.keys().cloned().collect();
        let Some(m) = mutate(proof, &iris, &mut rng) else { continue };
        assert!(check_proof(&m.proof, sources).is_err(), "{} mutation of {} went unnoticed", m.family, m.step);
        *per_family.entry(m.family).or_default() += 1;
    }
    assert_eq!(per_family.len(), 4, "{per_family:?}");
}

#[test]
fn reasoner_and_bundled_proofs_stay_valid() {
    for (p, sources) in valid_proofs() {
        check_proof(&p, &sources).unwrap();
    }
    let bundled = Proof::from_document(&restproof::n3::parse_document(samples::COMPOSITION_PROOF, None).unwrap()).unwrap();
    check_proof(&bundled, &sources_map(&samples::knowledge(), &samples::descriptions(), &samples::goal())).unwrap();
}
