use phase_collapse::analysis::{born_density_test, oracle_spots, Binning};
use phase_collapse::phases::Phase;
use phase_collapse::scenarios::{build_double_slit, build_field, DoubleSlitParams};
use phase_collapse::wavepackets::Amplitude;
use phase_collapse::{SeededStream, SpotRecord};

fn field() -> phase_collapse::Superposition {
    let config = build_double_slit(DoubleSlitParams::default()).unwrap();
    build_field(&config).unwrap().0
}

#[test]
fn oracle_samples_pass_in_almost_every_seed() {
    let psi = field();
    let passing = (0..100u64)
        .filter(|&seed| {
            let spots = oracle_spots(&psi, 2_000, &mut SeededStream::new(seed, 5));
            let r = born_density_test(&spots, &psi, Binning::EqualProbability(40), 10).unwrap();
            assert_eq!(r.total, 2_000);
            r.p_value > 0.01
        })
        .count();
    assert!(passing >= 98, "{passing}/100");
}

#[test]
fn uniform_spots_fail_against_fringes() {
    let psi = field();
    let d = psi.norm_domain();
    let mut s = SeededStream::new(3, 3);
    let spots: Vec<SpotRecord> = oracle_spots(&psi, 2_000, &mut SeededStream::new(0, 0))
        .into_iter()
        .map(|mut r| {
            r.x = d.x0 + s.next_unit() * d.width();
            r
        })
        .collect();
    let r = born_density_test(&spots, &psi, Binning::EqualWidth(40), 10).unwrap();
    assert!(r.p_value < 1e-6, "{}", r.p_value);
}

#[test]
fn single_bin_and_too_few_spots() {
    let psi = field();
    let spots = oracle_spots(&psi, 100, &mut SeededStream::new(1, 1));
    let r = born_density_test(&spots, &psi, Binning::EqualWidth(1), 10).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert!(born_density_test(&spots, &psi, Binning::EqualWidth(40), 10).is_err());
}

#[test]
fn report_ignores_the_global_phase() {
    let psi = field();
    let spots = oracle_spots(&psi, 1_000, &mut SeededStream::new(8, 0));
    let a = born_density_test(&spots, &psi, Binning::EqualProbability(20), 10).unwrap();
    let b = born_density_test(&spots, &psi.with_phase(Phase::new(2.5)), Binning::EqualProbability(20), 10).unwrap();
    assert_eq!(a, b);
    let expected: f64 = a.bins.iter().map(|b| b.expected).sum();
    assert!((expected - 1_000.0).abs() < 1e-9 * 1_000.0);
}
