//! Implementation against hand-written reference code and frozen values.

mod common;

use bitflip_core::crypto::{compute_mac, derive_keystream, scramble};
use bitflip_core::shuffle::derive_prp_seed;
use bitflip_core::vectors::to_hex;
use bitflip_core::wire::internet_checksum;
use bitflip_core::{ChecksumVariant, Direction, PermutationTable, Scrambler64, SecurityContext};
use common::{ref_expected_checksum, ref_sum, RefSplitMix};

fn counting_key() -> [u8; 16] {
    std::array::from_fn(|i| i as u8)
}

#[test]
fn scrambler_matches_reference_splitmix() {
    let mut rng = RefSplitMix(0xFEED);
    for _ in 0..200 {
        let seed = rng.next();
        let mut r = RefSplitMix(seed);
        let ours: Vec<u64> = Scrambler64::new(seed).take(16).collect();
        let theirs: Vec<u64> = (0..16).map(|_| r.next()).collect();
        assert_eq!(ours, theirs);
        assert_eq!(scramble(seed), RefSplitMix(seed).next());
    }
    let first: Vec<u64> = Scrambler64::new(0).take(3).collect();
    assert_eq!(first, [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]);
}

#[test]
fn checksum_matches_modular_reference() {
    let mut rng = RefSplitMix(3);
    for len in 0..80 {
        for _ in 0..50 {
            let data: Vec<u8> = (0..len).map(|_| rng.next() as u8).collect();
            let sum = ref_sum(&data);
            assert_eq!(internet_checksum(&data, ChecksumVariant::Inverted), sum, "{data:02x?}");
            assert_eq!(internet_checksum(&data, ChecksumVariant::Standard), !sum);
        }
    }
    let mut d = vec![0x13, 0x88, 0x17, 0x70, 0x00, 0x14, 0, 0];
    d.extend_from_slice(&[0x43, 0x96, 0, 0, 0x41, 0xC8, 0, 0, 0x40, 0, 0, 0]);
    assert_eq!(ref_expected_checksum(&d, false), 0x0F95);
    assert_eq!(internet_checksum(&d, ChecksumVariant::Standard), 0x0F95);
}

/// Fisher-Yates written from scratch with the documented draw.
fn ref_permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut rng = RefSplitMix(seed);
    let mut t: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next() % (i as u64 + 1)) as usize;
        t.swap(i, j);
    }
    t
}

#[test]
fn permutation_matches_reference_shuffle() {
    let mut rng = RefSplitMix(8);
    for n in [1, 2, 3, 7, 16, 112, 144] {
        for _ in 0..100 {
            let seed = rng.next();
            assert_eq!(PermutationTable::build(seed, n).unwrap().as_slice(), ref_permutation(seed, n));
        }
    }
    let t = PermutationTable::build(0x0123_4567_89AB_CDEF, 8).unwrap();
    assert_eq!(t.as_slice(), [6, 7, 1, 4, 0, 2, 3, 5]);
    assert_eq!(PermutationTable::build(0x0123_4567_89AB_CDEF, 2).unwrap().as_slice(), [0, 1]);
}

#[test]
fn frozen_keystreams_and_tags() {
    let key = counting_key();
    let c0 = SecurityContext::new(key, 0, 0, Direction::Uplink).unwrap();
    let c1 = SecurityContext::new(key, 1, 0, Direction::Uplink).unwrap();
    let c7 = SecurityContext::new(key, 7, 3, Direction::Downlink).unwrap();
    assert_eq!(to_hex(derive_keystream(&c0, 8).unwrap().as_bytes()), "8cc815aa65d9cd13");
    assert_eq!(to_hex(derive_keystream(&c1, 8).unwrap().as_bytes()), "d2310d2c11cb198f");
    assert_eq!(
        to_hex(derive_keystream(&c7, 24).unwrap().as_bytes()),
        "b6756719197a4981af116b268c4c98db4ba56005936b20f9"
    );
    assert_eq!(to_hex(&compute_mac(&c0, &[])), "a2135a6f");
    let data: Vec<u8> = (0..20).collect();
    assert_eq!(to_hex(&compute_mac(&c7, &data)), "8247f579");
}

#[test]
fn prp_seed_folds_whole_keystream() {
    let ks = [0x01, 0x23, 0x45, 0x67, 0x89, 0xAB, 0xCD, 0xEF, 0xFF];
    assert_eq!(derive_prp_seed(&ks).unwrap(), RefSplitMix(0x0123_4567_89AB_CDEF ^ 0xFF00_0000_0000_0000).next());
    assert_eq!(derive_prp_seed(&ks[..8]).unwrap(), RefSplitMix(0x0123_4567_89AB_CDEF).next());
    assert!(derive_prp_seed(&[]).is_err());
}
