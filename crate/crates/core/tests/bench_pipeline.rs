use dltf::bench::{
    generate_synthetic, run_param_sweep, run_support_recovery_bench, sample_from, timing_compare,
    BenchConfig, Method, SweepParam, TimingConfig,
};
use dltf::encoder::{ave_dif, encode_batch};
use dltf::soundness::near_orthonormal;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config() -> BenchConfig {
    BenchConfig {
        n: 16,
        m: 32,
        n_train: 300,
        n_test: 300,
        k_list: vec![2, 3],
        seeds: vec![0, 1],
        ksvd_iters: 5,
        dltf_outer_iters: 5,
        ..Default::default()
    }
}

#[test]
fn noise_has_the_requested_variance() {
    let noisy = generate_synthetic(64, 128, 2000, 4, 0.1, 3).unwrap();
    let clean = generate_synthetic(64, 128, 2000, 4, 0.0, 3).unwrap();
    assert_eq!(noisy.w0, clean.w0);
    assert_eq!(noisy.z_true, clean.z_true);
    let e = &noisy.x.view() - &clean.x.view();
    let count = e.len() as f64;
    let mean = e.sum() / count;
    let var = e.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
    assert!((var - 0.01).abs() < 0.001, "variance {var}");
}

#[test]
fn noiseless_data_is_exact_product() {
    let inst = generate_synthetic(8, 12, 50, 3, 0.0, 9).unwrap();
    let x = inst.w0.view().dot(&inst.z_true.view());
    assert_eq!(inst.x.view(), x.view());
    for col in inst.z_true.view().columns() {
        assert_eq!(col.iter().filter(|v| **v == 1.0).count(), 3);
        assert_eq!(col.iter().filter(|v| **v != 0.0).count(), 3);
    }
    assert_eq!(inst, generate_synthetic(8, 12, 50, 3, 0.0, 9).unwrap());
}

#[test]
fn orthonormal_generator_is_recovered_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w0 = near_orthonormal(20, 0.0, &mut rng).unwrap();
    let inst = sample_from(w0, 400, 5, 0.0, 4).unwrap();
    let codes = encode_batch(&inst.w0, &inst.x, 5).unwrap();
    assert_eq!(ave_dif(codes.view(), inst.z_true.view()).unwrap(), 0.0);
}

#[test]
fn bench_is_deterministic_and_bounded() {
    let cfg = small_config();
    let a = run_support_recovery_bench(&cfg).unwrap();
    let b = run_support_recovery_bench(&cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(!a.partial);
    assert_eq!(a.cells.len(), 4 * 2 * 2);
    for c in &a.cells {
        assert!((0.0..=c.k as f64).contains(&c.ave_dif), "{c:?}");
        let again = b.ave_dif(c.method, c.k, c.seed).unwrap();
        assert_eq!(c.ave_dif.to_bits(), again.to_bits());
    }
}

#[test]
fn report_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BenchConfig {
        methods: vec![Method::Original, Method::Random],
        output: Some(dir.path().join("out/report.json")),
        ..small_config()
    };
    let rep = run_support_recovery_bench(&cfg).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert_eq!(csv, rep.to_csv());
    let json = std::fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    let parsed: dltf::bench::BenchReport = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.cells.len(), rep.cells.len());
}

#[test]
fn single_point_sweep_equals_bench() {
    let cfg = BenchConfig { methods: vec![Method::Original, Method::Ksvd], ..small_config() };
    let direct = run_support_recovery_bench(&cfg).unwrap();
    let points = run_param_sweep(&cfg, SweepParam::Lambda, &[cfg.lambda]).unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(points[0].report.to_csv(), direct.to_csv());
}

#[test]
fn original_baseline_improves_with_signal_dimension() {
    let cfg = BenchConfig {
        m: 128,
        n_train: 1,
        n_test: 500,
        k_list: vec![4],
        seeds: vec![0, 1, 2],
        methods: vec![Method::Original],
        ..Default::default()
    };
    let grid = [32.0, 48.0, 64.0, 80.0, 108.0];
    let points = run_param_sweep(&cfg, SweepParam::N, &grid).unwrap();
    let means: Vec<f64> = points.iter().map(|p| p.report.mean_ave_dif(Method::Original, 4).unwrap()).collect();
    for pair in means.windows(2) {
        assert!(pair[1] <= pair[0], "{means:?}");
    }
}

#[test]
fn dltf_is_insensitive_to_theta() {
    let cfg = BenchConfig {
        n: 16,
        m: 32,
        n_train: 400,
        n_test: 400,
        k_list: vec![2],
        seeds: vec![0, 1],
        methods: vec![Method::Dltf],
        dltf_outer_iters: 10,
        ..Default::default()
    };
    let points = run_param_sweep(&cfg, SweepParam::Theta, &[0.001, 0.01, 0.1]).unwrap();
    let vals: Vec<f64> = points.iter().map(|p| p.report.mean_ave_dif(Method::Dltf, 2).unwrap()).collect();
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!((hi - lo) / hi < 0.25, "{vals:?}");
}

#[test]
fn timing_smoke_and_linear_scaling() {
    let one = timing_compare(&TimingConfig { n_samples: 1, repeats: 1, ..Default::default() }).unwrap();
    assert!(one.thresholded_ms >= 0.0 && one.omp_ms >= 0.0);

    let base = TimingConfig { k: 2, n_samples: 8000, repeats: 7, ..Default::default() };
    let small = timing_compare(&base).unwrap();
    let large = timing_compare(&TimingConfig { n_samples: 16000, ..base }).unwrap();
    let factor = large.thresholded_ms / small.thresholded_ms;
    assert!((1.5..=3.0).contains(&factor), "{small:?} {large:?}");
}
