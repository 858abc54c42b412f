use censvine::copula::{tau_to_theta, theta_to_tau};
use censvine::likelihood::{exact_sum, total_loglik};
use censvine::margins::{km_fit, pseudo_observations};
use censvine::{
    DVineModelF64, Family, GaussLegendreF64, MarginMethod, ObservedCluster, PairCopulaF32, PairCopulaF64,
    PseudoClusterF64,
};
use proptest::prelude::*;

fn copula() -> impl Strategy<Value = PairCopulaF64> {
    prop_oneof![
        Just(PairCopulaF64::independence()),
        (0.1f64..12.0).prop_map(|t| PairCopulaF64::new(Family::Clayton, t).unwrap()),
        (1.05f64..8.0).prop_map(|t| PairCopulaF64::new(Family::Gumbel, t).unwrap()),
        (-10.0f64..15.0)
            .prop_filter("Frank near zero is independence", |t| t.abs() > 0.05)
            .prop_map(|t| PairCopulaF64::new(Family::Frank, t).unwrap()),
    ]
}

fn interior() -> impl Strategy<Value = f64> {
    0.01f64..0.99
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn frechet_bounds(c in copula(), u in interior(), v in interior()) {
        let value = c.cdf(u, v);
        prop_assert!(value >= (u + v - 1.0).max(0.0) - 1e-12, "{c:?} C({u},{v}) = {value}");
        prop_assert!(value <= u.min(v) + 1e-12, "{c:?} C({u},{v}) = {value}");
    }

    #[test]
    fn h_is_a_distribution_in_its_first_argument(c in copula(), x in interior(), dx in 0.0f64..0.2, y in interior()) {
        let a = c.h(x, y);
        let b = c.h((x + dx).min(0.999), y);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a - 1e-12, "{c:?} h not monotone at y={y}: {a} > {b}");
    }

    #[test]
    fn hinv_round_trip(c in copula(), p in 0.02f64..0.98, y in 0.05f64..0.95) {
        let x = c.h_inverse(p, y).unwrap();
        prop_assert!((c.h(x, y) - p).abs() < 1e-7, "{c:?} p={p} y={y} x={x}");
    }

    #[test]
    fn density_is_positive_and_finite(c in copula(), u in interior(), v in interior()) {
        let pdf = c.pdf(u, v);
        prop_assert!(pdf.is_finite() && pdf > 0.0);
        prop_assert!((c.ln_pdf(u, v) - pdf.ln()).abs() < 1e-9 * pdf.ln().abs().max(1.0));
    }

    #[test]
    fn tau_round_trip(tau in 0.02f64..0.9) {
        for family in [Family::Clayton, Family::Gumbel, Family::Frank] {
            let theta: f64 = tau_to_theta(family, tau).unwrap();
            let back: f64 = theta_to_tau(family, theta).unwrap();
            prop_assert!((back - tau).abs() < 1e-8, "{family}: {tau} -> {theta} -> {back}");
        }
    }

    #[test]
    fn single_precision_tracks_double(c in copula(), u in 0.05f64..0.95, v in 0.05f64..0.95) {
        let single = PairCopulaF32::new(c.family(), c.theta() as f32).unwrap();
        prop_assert!((single.cdf(u as f32, v as f32) as f64 - c.cdf(u, v)).abs() < 1e-4);
        prop_assert!((single.h(u as f32, v as f32) as f64 - c.h(u, v)).abs() < 1e-3);
    }

    #[test]
    fn exact_sum_ignores_order(mut xs in prop::collection::vec(-1e6f64..1e6, 1..60), seed in any::<u64>()) {
        let a = exact_sum(&xs);
        let n = xs.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            xs.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(a, exact_sum(&xs));
    }
}

fn three_dim_model() -> DVineModelF64 {
    DVineModelF64::from_params(
        vec![0, 1, 2],
        &[Family::Clayton, Family::Gumbel, Family::Frank],
        &[2.0, 1.8, 3.0],
    )
    .unwrap()
}

fn mixed_clusters(n: usize, seed: u64) -> Vec<PseudoClusterF64> {
    let m = three_dim_model();
    m.sample(n, seed)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, u)| {
            let delta = (0..3).map(|j| ((i >> j) & 1) as u8).collect();
            PseudoClusterF64::new(format!("c{i}"), u, delta).unwrap()
        })
        .collect()
}

#[test]
fn loglik_ignores_cluster_order_and_doubles_under_duplication() {
    let m = three_dim_model();
    let rule = GaussLegendreF64::new(21).unwrap();
    let data = mixed_clusters(64, 11);
    let base = total_loglik(&m, &data, &rule).unwrap();

    let mut reversed = data.clone();
    reversed.reverse();
    assert_eq!(total_loglik(&m, &reversed, &rule).unwrap(), base);

    let mut doubled = data.clone();
    doubled.extend(data.iter().cloned());
    assert_eq!(total_loglik(&m, &doubled, &rule).unwrap(), 2.0 * base);
}

#[test]
fn censoring_a_coordinate_never_gives_nan() {
    let m = three_dim_model();
    let rule = GaussLegendreF64::new(21).unwrap();
    for pc in mixed_clusters(40, 5) {
        for j in 0..3 {
            let mut delta = pc.delta.clone();
            delta[j] = 0;
            let changed = PseudoClusterF64::new(pc.id.clone(), pc.u.clone(), delta).unwrap();
            let value = total_loglik(&m, &[changed], &rule).unwrap();
            assert!(value.is_finite(), "{pc:?} coordinate {j}");
        }
    }
}

#[test]
fn complete_data_pseudo_observations_are_rank_based() {
    let data: Vec<ObservedCluster> = (0..30)
        .map(|i| {
            let a = ((i * 7) % 30) as f64 + 0.5;
            let b = ((i * 11) % 30) as f64 + 0.25;
            ObservedCluster::new(format!("{i}"), vec![a, b], vec![1, 1]).unwrap()
        })
        .collect();
    let warped: Vec<ObservedCluster> = data
        .iter()
        .map(|c| ObservedCluster::new(c.id.clone(), c.y.iter().map(|t| t.powi(3) + 2.0 * t).collect(), c.delta.clone()).unwrap())
        .collect();
    let a = pseudo_observations(&data, &MarginMethod::Kme).unwrap();
    let b = pseudo_observations(&warped, &MarginMethod::Kme).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.u, y.u);
    }
}

#[test]
fn kaplan_meier_without_censoring_is_empirical_survival() {
    let times = [3.2, 0.7, 5.5, 1.1, 2.4, 4.9, 0.2, 3.9];
    let curve = km_fit(&times.iter().map(|&t| (t, 1)).collect::<Vec<_>>()).unwrap();
    let n = times.len() as f64;
    for &t in &times {
        let below = times.iter().filter(|&&s| s <= t).count() as f64;
        assert!((curve.eval(t) - (1.0 - below / n)).abs() < 1e-14);
    }
}

#[test]
fn three_point_example_with_censored_middle() {
    let curve = km_fit(&[(1.0, 1), (2.0, 0), (3.0, 1)]).unwrap();
    assert!((curve.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
}
