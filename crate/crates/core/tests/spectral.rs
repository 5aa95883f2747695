use std::f64::consts::PI;

use hqlab::spectral::io::{read_field, write_field};
use hqlab::spectral::{apply_multiplier, random_field, random_real_field, GridSpec, MultiplierSymbol};
use hqlab::{Field32, Field64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hilbert_squares_to_minus_identity(seed in any::<u64>(), log_n in 4u32..9, band in 1usize..8) {
        let n = 1usize << log_n;
        let g = GridSpec::line(n, 2.0 * PI).unwrap();
        let band = band.min(n / 2 - 1);
        let f: Field64 = random_real_field(&g, band, &mut ChaCha8Rng::seed_from_u64(seed));
        let h = MultiplierSymbol::Hilbert;
        let hh = apply_multiplier(&apply_multiplier(&f, &h).unwrap(), &h).unwrap();
        prop_assert!(hh.add(&f).unwrap().norm() <= 1e-12);
    }

    #[test]
    fn riesz_squares_sum_to_minus_identity(seed in any::<u64>(), band in 1usize..8) {
        let g = GridSpec::plane(16, 3.0).unwrap();
        let f: Field64 = random_field(&g, band, false, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut sum = f.clone();
        for j in 1..=2 {
            let r = MultiplierSymbol::Riesz(j);
            sum = sum.add(&apply_multiplier(&apply_multiplier(&f, &r).unwrap(), &r).unwrap()).unwrap();
        }
        prop_assert!(sum.norm() <= 1e-12);
    }
}

#[test]
fn single_precision_tracks_double() {
    let g = GridSpec::plane(32, 2.0 * PI).unwrap();
    let f: Field64 = random_field(&g, 10, false, &mut ChaCha8Rng::seed_from_u64(4));
    let lo: Field32 = f.cast();
    for m in [MultiplierSymbol::Beurling, MultiplierSymbol::Riesz(1), MultiplierSymbol::Gaussian(0.3)] {
        let want = apply_multiplier(&f, &m).unwrap();
        let got = apply_multiplier(&lo, &m).unwrap().cast::<f64>();
        assert!(got.rel_l2_diff(&want) < 1e-5, "{m:?}");
    }
}

#[test]
fn binary_fields_round_trip() {
    for g in [GridSpec::line(64, 10.0).unwrap(), GridSpec::plane(8, 2.5).unwrap()] {
        let f: Field64 = random_field(&g, 3, false, &mut ChaCha8Rng::seed_from_u64(9));
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 16 * g.len());
        assert_eq!(read_field(&mut buf.as_slice()).unwrap(), f);
    }
}

#[test]
fn truncated_field_is_rejected() {
    let g = GridSpec::line(16, 1.0).unwrap();
    let f: Field64 = random_real_field(&g, 4, &mut ChaCha8Rng::seed_from_u64(1));
    let mut buf = Vec::new();
    write_field(&mut buf, &f).unwrap();
    buf.pop();
    assert!(read_field(&mut buf.as_slice()).is_err());
    buf[0] = b'X';
    assert!(read_field(&mut buf.as_slice()).is_err());
}
