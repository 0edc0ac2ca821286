use std::sync::Arc;

use proptest::prelude::*;

use qrinit::data::{parse_idx, prepare, IdxTensor, PixelScaling, RawMnist};
use qrinit::initializers::{self, InitializerSpec, TensorShape};
use qrinit::mt19937::Mt19937;
use qrinit::normal;
use qrinit::samplers::{self, DistributionSpec, RandomSource};
use qrinit::seed_select::{best_trial, finish, sample_candidates, SeedSearchConfig, Trial};
use qrinit::sobol::{DirectionNumberTable, SobolEngine};
use qrinit::stats::{
    self, efficiency_e, final_outcome, mann_whitney_u, mann_whitney_u_with, median_iqr, speed_verdict, Alternative,
    StatsError, UMethod, Verdict,
};

fn table() -> Arc<DirectionNumberTable> {
    Arc::new(DirectionNumberTable::bundled())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sobol_draws_are_open_unit_and_deterministic(dim in 1usize..=1024, n in 1usize..400) {
        let t = table();
        let a = SobolEngine::new(Arc::clone(&t), dim).unwrap().draw(dim, n).unwrap();
        let b = SobolEngine::new(t, dim).unwrap().draw(dim, n).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn sobol_cache_is_transparent(dim in 1usize..=64, split in 0usize..200, n in 1usize..200) {
        let t = table();
        let mut plain = SobolEngine::new(Arc::clone(&t), dim).unwrap();
        let mut cached = SobolEngine::new(t, dim).unwrap();
        cached.build_cache(400, dim, 1 << 24).unwrap();
        let mut a = plain.draw_integers(dim, split).unwrap();
        a.extend(plain.draw_integers(dim, n).unwrap());
        let mut b = cached.draw_integers(dim, split).unwrap();
        b.extend(cached.draw_integers(dim, n).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn inverse_cdf_round_trip(log_p in -9.0f64..-std::f64::consts::LOG10_2, upper in any::<bool>()) {
        let p = 10f64.powf(log_p);
        let p = if upper { 1.0 - p } else { p };
        let x = normal::inverse_cdf(p).unwrap();
        prop_assert!((normal::cdf(x) - p).abs() < 1e-12);
    }

    #[test]
    fn truncated_normal_stays_inside_two_sigma(u in 0.0f64..1.0, mu in -10.0f64..10.0, sigma in 1e-3f64..10.0) {
        let v = samplers::truncated_normal_from_base(u, mu, sigma);
        prop_assert!(v > mu - 2.0 * sigma && v < mu + 2.0 * sigma, "{} outside for u={}", v, u);
    }

    #[test]
    fn uniform_maps_into_bounds(u in 0.0f64..1.0, a in -5.0f64..5.0, width in 1e-6f64..10.0) {
        let v = samplers::uniform_from_base(u, a, a + width);
        prop_assert!(v >= a && v <= a + width);
    }

    #[test]
    fn initializer_parameters_follow_fan_rules(dims in prop::collection::vec(1usize..40, 1..=4)) {
        let receptive: usize = if dims.len() > 2 { dims[..dims.len() - 2].iter().product() } else { 1 };
        let (fan_in, fan_out) = match dims.len() {
            1 => (dims[0], dims[0]),
            r => (receptive * dims[r - 2], receptive * dims[r - 1]),
        };
        let (fi, fo) = (fan_in as f64, fan_out as f64);
        let shape = TensorShape::new(dims.clone()).unwrap();
        let expect = [
            (InitializerSpec::GlorotUniform, (6.0 / (fi + fo)).sqrt()),
            (InitializerSpec::GlorotNormal, (2.0 / (fi + fo)).sqrt()),
            (InitializerSpec::HeUniform, (6.0 / fi).sqrt()),
            (InitializerSpec::HeNormal, (2.0 / fi).sqrt()),
            (InitializerSpec::LecunUniform, (3.0 / fi).sqrt()),
            (InitializerSpec::LecunNormal, (1.0 / fi).sqrt()),
        ];
        for (spec, want) in expect {
            let got = match initializers::resolve_params(&spec, &shape) {
                DistributionSpec::Uniform { a, b } => {
                    prop_assert!((a + b).abs() < 1e-15);
                    b
                }
                DistributionSpec::TruncatedNormal { mu, sigma } => {
                    prop_assert_eq!(mu, 0.0);
                    sigma
                }
                other => return Err(TestCaseError::fail(format!("{spec}: {other:?}"))),
            };
            prop_assert!((got - want).abs() < 1e-12, "{} {:?}: {} vs {}", spec, dims, got, want);
        }
    }

    #[test]
    fn orthogonal_gram_is_scaled_identity(rows in 1usize..40, cols in 1usize..40, gain in 0.1f64..3.0, seed in any::<u32>()) {
        let shape = TensorShape::matrix(rows, cols).unwrap();
        let mut src = RandomSource::pseudo(seed);
        let w = initializers::initialize(&InitializerSpec::Orthogonal { gain }, &shape, &mut src).unwrap();
        let short = rows.min(cols);
        for i in 0..short {
            for j in 0..short {
                let dot: f64 = if rows >= cols {
                    (0..rows).map(|r| w.values[r * cols + i] * w.values[r * cols + j]).sum()
                } else {
                    (0..cols).map(|c| w.values[i * cols + c] * w.values[j * cols + c]).sum()
                };
                let want = if i == j { gain * gain } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-5, "({},{}) {} vs {}", i, j, dot, want);
            }
        }
    }

    #[test]
    fn initializers_are_deterministic(kind in 0usize..10, rows in 1usize..20, cols in 1usize..20, dim in 1usize..50) {
        let spec = InitializerSpec::all()[kind];
        let shape = TensorShape::matrix(rows, cols).unwrap();
        let t = table();
        let a = initializers::initialize(&spec, &shape, &mut RandomSource::quasi(Arc::clone(&t), dim).unwrap()).unwrap();
        let b = initializers::initialize(&spec, &shape, &mut RandomSource::quasi(t, dim).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn median_and_iqr_match_sort_oracle(v in prop::collection::vec(-1e3f64..1e3, 1..60)) {
        let mut s = v.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| {
            let h = (s.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            s[lo] + (h - lo as f64) * (s[hi] - s[lo])
        };
        let got = median_iqr(&v).unwrap();
        prop_assert!((got.median - q(0.5)).abs() < 1e-12);
        prop_assert!((got.iqr - (q(0.75) - q(0.25))).abs() < 1e-12);
    }

    #[test]
    fn efficiency_sign_matches_speed_verdict(e_q in 1usize..40, e_p in 1usize..40, delta in 0usize..10) {
        let e = efficiency_e(e_q, e_p, delta);
        prop_assert_eq!(e < 0.0, speed_verdict(e_q, e_p, delta) == Verdict::Win);
        prop_assert_eq!(e > 0.0, speed_verdict(e_q, e_p, delta) == Verdict::Loss);
    }

    #[test]
    fn seed_search_picks_a_sampled_candidate(
        lo in 1usize..20,
        span in 0usize..20,
        x in 1usize..6,
        y in 1usize..4,
        r in 1usize..4,
        seed in any::<u32>(),
        metrics in prop::collection::vec(0.0f64..1.0, 100),
    ) {
        let cfg = SeedSearchConfig { min_seed: lo, max_seed: lo + span, candidates: x.min(span + 1), trial_epochs: y, repeats: r, warm_start: false };
        let cands = sample_candidates::<String>(&cfg, seed).unwrap();
        prop_assert_eq!(cands.len(), cfg.candidates);
        let mut trials = Vec::new();
        for (i, &s) in cands.iter().enumerate() {
            for rep in 0..r {
                trials.push(Trial { seed: s, repeat: rep, metric: metrics[(i * r + rep) % metrics.len()] });
            }
        }
        let out = finish::<String>(&cfg, cands.clone(), trials.clone()).unwrap();
        prop_assert!(out.nu >= lo && out.nu <= lo + span);
        prop_assert!(cands.contains(&out.nu));
        prop_assert_eq!(out.delta_q, y * (cfg.candidates * r - 1));
        trials.reverse();
        prop_assert_eq!(best_trial(&trials).unwrap().seed, out.nu);
    }

    #[test]
    fn idx_round_trip_preserves_order(rows in 1usize..20, seed in any::<u32>()) {
        let mut rng = Mt19937::new(seed);
        let pixels: Vec<u8> = (0..rows * 4).map(|_| rng.next_below(256) as u8).collect();
        let labels: Vec<u8> = (0..rows).map(|_| rng.next_below(10) as u8).collect();
        let mut img = vec![0, 0, 8, 3];
        for d in [rows as u32, 2, 2] {
            img.extend(d.to_be_bytes());
        }
        img.extend(&pixels);
        let mut lab = vec![0, 0, 8, 1];
        lab.extend((rows as u32).to_be_bytes());
        lab.extend(&labels);
        let images = parse_idx(&img).unwrap();
        let label_t = parse_idx(&lab).unwrap();
        prop_assert_eq!(&images, &IdxTensor { dims: vec![rows, 2, 2], data: pixels.clone() });
        let raw = RawMnist { train_images: images.clone(), train_labels: label_t.clone(), test_images: images, test_labels: label_t };
        let ds = prepare(&raw, PixelScaling::UnitInterval).unwrap();
        prop_assert_eq!(&ds.train.labels, &labels);
        for (i, &p) in pixels.iter().enumerate() {
            prop_assert!((ds.train.x[i] - p as f32 / 255.0).abs() < 1e-6);
        }
        prop_assert!(ds.train.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for (row, &l) in ds.train.y.chunks(10).zip(&labels) {
            prop_assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert_eq!(row[l as usize], 1.0);
        }
    }
}

#[test]
fn first_dimension_is_dyadically_stratified() {
    let mut e = SobolEngine::new(table(), 1).unwrap();
    let draws = e.draw(1, 4095).unwrap();
    for m in 1..=12 {
        let count = (1usize << m) - 1;
        let mut seen = vec![false; 1 << m];
        for &v in &draws[..count] {
            let cell = (v * (1u64 << m) as f64) as usize;
            assert!(!seen[cell], "m={m} cell {cell} hit twice");
            seen[cell] = true;
        }
        assert!(!seen[0], "only the skipped zero belongs in the first cell");
    }
}

#[test]
fn quasi_normal_moments() {
    let mut src = RandomSource::quasi(table(), 1).unwrap();
    let v = samplers::sample_normal(&mut src, 0.0, 1.0, 1 << 14).unwrap();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 5e-3, "mean {mean}");
    assert!((sd - 1.0).abs() < 1e-2, "sd {sd}");
}

#[test]
fn quasi_uniform_discrepancy_beats_typical_pseudo_stream() {
    let mut src = RandomSource::quasi(table(), 1).unwrap();
    let q = samplers::star_discrepancy(&src.next_base(1024).unwrap());
    let mut pseudo: Vec<f64> = (0..100u32)
        .map(|seed| samplers::star_discrepancy(&RandomSource::pseudo(seed).next_base(1024).unwrap()))
        .collect();
    pseudo.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = (pseudo[49] + pseudo[50]) / 2.0;
    assert!(q < median, "quasi {q} vs pseudo median {median}");
}

#[test]
fn shape_dependent_truncated_initializers_have_corrected_spread() {
    let shape = TensorShape::matrix(256, 256).unwrap();
    for spec in [InitializerSpec::GlorotNormal, InitializerSpec::HeNormal, InitializerSpec::LecunNormal] {
        let sigma = match initializers::resolve_params(&spec, &shape) {
            DistributionSpec::TruncatedNormal { sigma, .. } => sigma,
            other => panic!("{other:?}"),
        };
        for mut src in [RandomSource::quasi(table(), 3).unwrap(), RandomSource::pseudo(7)] {
            let w = initializers::initialize(&spec, &shape, &mut src).unwrap();
            let n = w.values.len() as f64;
            let mean = w.values.iter().sum::<f64>() / n;
            let sd = (w.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            let want = 0.87962566103423975 * sigma;
            assert!((sd / want - 1.0).abs() < 0.02, "{spec}: sd {sd} vs {want}");
        }
    }
}

/// Null distribution of the rank-sum statistic by listing every subset.
fn enumerate_rank_sums(m: usize, n: usize) -> Vec<f64> {
    let mut counts = vec![0u64; m * n + 1];
    for mask in 0u32..(1 << (m + n)) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let rank_sum: usize = (0..m + n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        counts[rank_sum - m * (m + 1) / 2] += 1;
    }
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

fn tie_free_case(rng: &mut Mt19937) -> (Vec<f64>, Vec<f64>) {
    let m = 1 + rng.next_below(7) as usize;
    let n = 1 + rng.next_below(7) as usize;
    let shift = rng.next_f64() * 3.0 - 1.5;
    let mut pool: Vec<u32> = (0..1000).collect();
    rng.shuffle(&mut pool);
    let x = pool[..m].iter().map(|&v| v as f64 / 1000.0).collect();
    let y = pool[m..m + n].iter().map(|&v| v as f64 / 1000.0 + shift).collect();
    (x, y)
}

#[test]
fn exact_distribution_matches_subset_enumeration() {
    for m in 1..=7 {
        for n in 1..=7 {
            let dp = stats::rank_sum_distribution(m, n);
            let brute = enumerate_rank_sums(m, n);
            for (a, b) in dp.iter().zip(&brute) {
                assert!((a - b).abs() < 1e-14, "m={m} n={n}");
            }
        }
    }
}

#[test]
fn small_sample_p_values_match_enumeration() {
    let mut rng = Mt19937::new(2024);
    for _ in 0..200 {
        let (x, y) = tie_free_case(&mut rng);
        let dist = enumerate_rank_sums(x.len(), y.len());
        for alt in [Alternative::Less, Alternative::Greater] {
            let got = mann_whitney_u(&x, &y, alt).unwrap();
            let w = got.statistic as usize;
            let want: f64 = match alt {
                Alternative::Less => dist[..=w].iter().sum(),
                Alternative::Greater => dist[w..].iter().sum(),
            };
            assert!((got.p_value - want).abs() < 1e-12);
            assert_eq!(got.p_value < 0.05, want < 0.05);
        }
    }
}

#[test]
fn normal_approximation_agrees_with_exact_decisions() {
    let mut rng = Mt19937::new(7);
    let (mut agree, mut total) = (0, 0);
    for _ in 0..2000 {
        let (x, y) = tie_free_case(&mut rng);
        for alt in [Alternative::Less, Alternative::Greater] {
            let exact = mann_whitney_u_with(&x, &y, alt, UMethod::Exact).unwrap();
            let approx = mann_whitney_u_with(&x, &y, alt, UMethod::Asymptotic).unwrap();
            assert!(exact.exact && !approx.exact);
            total += 1;
            if (exact.p_value < 0.05) == (approx.p_value < 0.05) {
                agree += 1;
            }
        }
    }
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.99, "agreement {rate}");
}

#[test]
fn classification_is_total() {
    let all = [Verdict::Win, Verdict::Tie, Verdict::Loss];
    let mut seen = 0;
    for a in all {
        for e in all {
            for d in all {
                match final_outcome(a, e, d) {
                    Ok(o) => assert!(o.result().is_some()),
                    Err(StatsError::UnmappedPermutation(..)) => {}
                    Err(other) => panic!("{other}"),
                }
                seen += 1;
            }
        }
    }
    assert_eq!(seen, 27);
}

#[test]
fn untrained_models_score_near_chance_on_balanced_data() {
    use qrinit::nn::{build_model, evaluate, ModelConfig, SparseRows, Split, WeightSource};
    let mut rng = Mt19937::new(11);
    let rows = 1000;
    let x: Vec<f32> = (0..rows * 784).map(|_| rng.next_f64() as f32).collect();
    let labels: Vec<u8> = (0..rows).map(|i| (i % 10) as u8).collect();
    let sparse = SparseRows::from_dense(&x, 784);
    let cfg = ModelConfig::mlp_32_32(InitializerSpec::GlorotUniform);
    let inside = (0..100u32)
        .filter(|&seed| {
            let (model, _) = build_model(&cfg, &WeightSource::Pseudo, seed * 7).unwrap();
            let acc = evaluate(&model, Split { x: &sparse, labels: &labels }).unwrap();
            (0.05..=0.2).contains(&acc)
        })
        .count();
    assert!(inside >= 99, "{inside} of 100 inside the band");
}
