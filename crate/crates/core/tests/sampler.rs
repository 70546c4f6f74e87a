use coexist_core::exact::exact_potts;
use coexist_core::graphs::{augment, cycle_counts, sample_pairing_model, MultiGraph};
use coexist_core::numerics::ModelParams;
use coexist_core::rng::StreamKey;
use coexist_core::sampler::{bichromatic_open_edges, sw_sweep, SpinConfig};
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided 1e-4 quantile; the seeds are fixed so this only guards against
/// a wrong stationary law, not against bad luck.
fn z_crit() -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - 0.5e-4)
}

#[test]
fn swendsen_wang_matches_enumeration() {
    let p = ModelParams::new(3, 3.0, 0.8, 0.3).unwrap();
    let g = MultiGraph::complete(4);
    let g_star = augment(&g).unwrap();
    let exact = exact_potts(&g, &p, None).unwrap();
    let key = StreamKey::new(11, 0);
    let (batches, per_batch) = (100usize, 200usize);
    let mut sigma = SpinConfig::constant(4, 0);
    for s in 0..100 {
        sigma = sw_sweep(&p, &g_star, &sigma, &key, s).unwrap().0;
    }
    let mut fav = Vec::with_capacity(batches);
    let mut agree = Vec::with_capacity(batches);
    let mut sweep = 100;
    for _ in 0..batches {
        let (mut f, mut a) = (0.0, 0.0);
        for _ in 0..per_batch {
            let (next, eta) = sw_sweep(&p, &g_star, &sigma, &key, sweep).unwrap();
            assert_eq!(bichromatic_open_edges(&g_star, &sigma, &eta), 0);
            sigma = next;
            sweep += 1;
            f += f64::from(sigma.colors[0] == 0);
            a += f64::from(sigma.colors[1] == sigma.colors[2]);
        }
        fav.push(f / per_batch as f64);
        agree.push(a / per_batch as f64);
    }
    let check = |xs: &[f64], want: f64| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let z = (m - want).abs() / (var / n).sqrt();
        assert!(z < z_crit(), "mean {m} vs exact {want} (z = {z})");
    };
    check(&fav, exact.favored[0]);
    check(&agree, exact.pair_agree[&(1, 2)]);
}

#[test]
fn short_cycles_are_poisson() {
    // Pooled over graphs, counts of k-cycles have mean (d-1)^k / (2k).
    let (n, d, graphs) = (400, 3, 200);
    let mut sums = [0u64; 3];
    for seed in 0..graphs {
        let g = sample_pairing_model(n, d, seed).unwrap();
        let c = cycle_counts(&g, 5).unwrap();
        for (i, k) in (3..=5).enumerate() {
            sums[i] += c.count(k);
        }
    }
    for (i, k) in (3..=5).enumerate() {
        let mean = 2f64.powi(k as i32) / (2.0 * k as f64);
        let total = graphs as f64 * mean;
        let z = (sums[i] as f64 - total).abs() / total.sqrt();
        assert!(z < z_crit(), "k = {k}: {} vs {total}", sums[i]);
    }
}
