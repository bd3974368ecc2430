use phase_collapse::analysis::{chi_square, HistogramBin};
use phase_collapse::screen::{generate_screen, ScreenSpec};
use phase_collapse::{Rect, SeededStream};

fn uniform_bins(counts: &[u64], expected: f64) -> Vec<HistogramBin> {
    counts
        .iter()
        .enumerate()
        .map(|(i, &o)| HistogramBin {
            lo: i as f64,
            hi: i as f64 + 1.0,
            observed: o,
            expected,
        })
        .collect()
}

fn screen(seed: u64) -> phase_collapse::Screen {
    let spec = ScreenSpec {
        window: Rect::new(-2.0, 3.0, 1.0, 2.0),
        rho: 20_000.0,
        sigma_cl: 1e-3,
        eta: 0.3,
        tilt: (0.0, 0.0),
    };
    generate_screen(spec, &SeededStream::new(seed, 0)).unwrap()
}

#[test]
fn cluster_positions_are_uniform_on_a_10x10_grid() {
    let s = screen(11);
    let n = s.len();
    assert_eq!(n, 100_000);
    let mut counts = vec![0u64; 100];
    for i in 0..n {
        let (x, z) = s.position(i);
        let gx = (((x + 2.0) / 5.0 * 10.0) as usize).min(9);
        let gz = (((z - 1.0) * 10.0) as usize).min(9);
        counts[gz * 10 + gx] += 1;
    }
    let r = chi_square(uniform_bins(&counts, n as f64 / 100.0));
    assert!(r.p_value > 0.001, "{r:?}");
}

#[test]
fn cluster_phases_are_uniform_in_50_bins() {
    let s = screen(12);
    let mut counts = vec![0u64; 50];
    for p in s.phases() {
        counts[((p.turns() * 50.0) as usize).min(49)] += 1;
    }
    let r = chi_square(uniform_bins(&counts, s.len() as f64 / 50.0));
    assert!(r.p_value > 0.001, "{r:?}");
    let mut refreshed = s.refresh_phases(&mut SeededStream::new(99, 1));
    let mut counts = vec![0u64; 50];
    for p in refreshed.phases() {
        counts[((p.turns() * 50.0) as usize).min(49)] += 1;
    }
    let r = chi_square(uniform_bins(&counts, s.len() as f64 / 50.0));
    assert!(r.p_value > 0.001, "{r:?}");
    refreshed = refreshed.refresh_phases(&mut SeededStream::new(99, 1));
    assert_eq!(refreshed.phases(), s.refresh_phases(&mut SeededStream::new(99, 1)).phases());
}

#[test]
fn sensitive_fraction_tracks_eta() {
    let s = screen(13);
    let f = s.sensitive_fraction();
    let sigma = (0.3f64 * 0.7 / s.len() as f64).sqrt();
    assert!((f - 0.3).abs() < 4.0 * sigma, "{f}");
}
