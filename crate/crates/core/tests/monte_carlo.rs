//! Monte Carlo sanity checks on small grids.

use phi_decoder::analysis;
use phi_decoder::config::RunConfig;
use phi_decoder::runner;

fn run(toml: &str) -> Vec<phi_decoder::engine::SurvivalRecord> {
    let cfg = RunConfig::from_toml(toml).unwrap();
    runner::run_in_memory(&cfg, 1)
}

#[test]
fn static_success_rises_as_noise_falls() {
    // 0.5% to 2% saturate at L = 12; the two noisier cells show the trend
    let ps = [0.1, 0.05, 0.02, 0.01, 0.005];
    let recs = run("mode = \"static\"\nL = [12]\np = [0.005, 0.01, 0.02, 0.05, 0.1]\nsamples = 500\nseed = 4\n");
    let rates: Vec<(f64, f64)> = ps
        .iter()
        .map(|&p| {
            let cell: Vec<_> = recs.iter().filter(|r| r.p == p).collect();
            assert_eq!(cell.len(), 500);
            let rate = cell.iter().filter(|r| r.success == Some(true)).count() as f64 / 500.0;
            (rate, (rate * (1.0 - rate) / 500.0).sqrt())
        })
        .collect();
    println!("static L=12 success at p = {ps:?}: {rates:?}");
    // no drop beyond 1.96 combined standard errors as p falls
    assert!(rates
        .windows(2)
        .all(|w| w[1].0 - w[0].0 >= -1.96 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt()));
    assert!(rates[4].0 > rates[0].0);
}

#[test]
fn high_noise_survival_falls_with_size() {
    let recs = run("mode = \"sync\"\nL = [12, 16, 20]\np = [0.02]\nq = \"p\"\nsamples = 300\nseed = 4\n");
    let curves = analysis::estimate_curves(&recs).unwrap();
    for c in &curves {
        println!("sync p=2% L={} mean {:.2} +- {:.2}", c.size, c.mean, c.stderr);
    }
    assert!(curves.windows(2).all(|w| w[1].mean < w[0].mean));
}
