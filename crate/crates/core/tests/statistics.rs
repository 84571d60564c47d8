//! Monte Carlo checks of the samplers against independent references.

use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use tuplewise_clt::dist::{make_discrete, prob, Distribution};
use tuplewise_clt::graph::{complete_bipartite, GraphSeq};
use tuplewise_clt::limit::{sample_limit, sample_y_bipartite, LimitLaw, YFamily};
use tuplewise_clt::mixture::split;
use tuplewise_clt::rng::RngStream;
use tuplewise_clt::sampler::{sample_row, stream_sequence, xi_star_fast_bipartite, Construction};
use tuplewise_clt::verify::{ks_one_sample, ks_two_sample, sample_mean, sample_variance, EmpiricalDist};

fn ctx_for(w: &Distribution, ell: u32) -> Construction {
    let pair = split(w, &prob(1, i64::from(ell))).unwrap();
    Construction::new(ell, &pair, w).unwrap()
}

#[test]
fn child_streams_are_uniform() {
    let root = RngStream::new(77);
    let xs: Vec<f64> = (0..10_000).map(|i| root.derive(i).open01()).collect();
    let d = ks_one_sample(&EmpiricalDist::new(xs.clone()).unwrap(), |x| x.clamp(0.0, 1.0));
    assert!(d <= 0.02, "{d}");
    // lag-one correlation across siblings
    let m = sample_mean(&xs);
    let cov = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (xs.len() - 1) as f64;
    let corr = cov / sample_variance(&xs);
    assert!(corr.abs() < 4.0 / (xs.len() as f64).sqrt(), "{corr}");
}

#[test]
fn y_for_two_labels_is_a_product_of_normals() {
    let n = 100_000;
    let y = sample_y_bipartite(2, &mut RngStream::new(1), n);
    let mut rng = RngStream::new(2);
    let product: Vec<f64> = (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            a * b
        })
        .collect();
    let d = ks_two_sample(&EmpiricalDist::new(y).unwrap(), &EmpiricalDist::new(product).unwrap());
    assert!(d <= 0.01, "{d}");
}

#[test]
fn y_is_standardized() {
    for ell in 2..=5 {
        let y = sample_y_bipartite(ell, &mut RngStream::new(u64::from(ell)), 100_000);
        let (m, v) = (sample_mean(&y), sample_variance(&y));
        assert!(m.abs() <= 0.02, "ell {ell}: mean {m}");
        assert!((v - 1.0).abs() <= 0.05, "ell {ell}: var {v}");
    }
}

#[test]
fn limit_has_unit_variance() {
    for r in [0.0, 0.3, 0.654_653_670_707_977_1, 1.0] {
        let law = LimitLaw::new(2, r, YFamily::CompleteBipartite).unwrap();
        let xs = sample_limit(&law, &mut RngStream::new(9), 100_000);
        let v = sample_variance(&xs);
        assert!((v - 1.0).abs() <= 0.05, "r {r}: var {v}");
    }
}

#[test]
fn limit_with_zero_r_is_normal() {
    let law = LimitLaw::new(3, 0.0, YFamily::CompleteBipartite).unwrap();
    let xs = sample_limit(&law, &mut RngStream::new(10), 100_000);
    let d = ks_one_sample(&EmpiricalDist::new(xs).unwrap(), tuplewise_clt::limit::normal_cdf);
    assert!(d <= 0.01, "{d}");
}

#[test]
fn family_moments_within_four_standard_errors() {
    let laws = [
        Distribution::parametric("normal", &[1.5, 2.0]).unwrap(),
        Distribution::parametric("uniform", &[-1.0, 3.0]).unwrap(),
        Distribution::parametric("exponential", &[0.5]).unwrap(),
        make_discrete(&[-2.0, 0.5, 4.0], &[0.2, 0.5, 0.3]).unwrap(),
    ];
    for (i, w) in laws.iter().enumerate() {
        let xs = w.sample(&mut RngStream::new(i as u64), 100_000);
        let (mean, var) = w.moments();
        let se = (var / xs.len() as f64).sqrt();
        let m = sample_mean(&xs);
        assert!((m - mean).abs() <= 4.0 * se, "{w}: {m} vs {mean}");
        let d = ks_one_sample(&EmpiricalDist::new(xs).unwrap(), |x| w.cdf(x));
        assert!(d <= 0.02, "{w}: KS {d}");
    }
}

#[test]
fn truncated_halves_match_their_moments() {
    let w = Distribution::parametric("normal", &[0.0, 1.0]).unwrap();
    let pair = split(&w, &prob(1, 2)).unwrap();
    let expected = (2.0 / std::f64::consts::PI).sqrt();
    assert!((pair.mean_v - expected).abs() < 1e-9 && (pair.mean_u + expected).abs() < 1e-9);
    let xs = pair.v.sample(&mut RngStream::new(3), 100_000);
    assert!(xs.iter().all(|&x| x >= 0.0));
    let se = (pair.v.moments().1 / xs.len() as f64).sqrt();
    assert!((sample_mean(&xs) - expected).abs() <= 4.0 * se);
}

#[test]
fn xi_star_standardized_small_m() {
    let base = RngStream::new(12);
    let xs: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| xi_star_fast_bipartite(10, 2, &mut base.derive(i)))
        .collect();
    assert!(sample_mean(&xs).abs() <= 0.02);
    assert!((sample_variance(&xs) - 1.0).abs() <= 0.05);
}

#[test]
fn each_summand_has_the_law_of_w() {
    let w = make_discrete(&[0.0, 1.0, 3.0], &[0.3, 0.5, 0.2]).unwrap();
    let ctx = ctx_for(&w, 3);
    let g = complete_bipartite(3);
    let base = RngStream::new(13);
    let rows: Vec<Vec<f64>> = (0..10_000u64)
        .map(|i| sample_row(&g, &ctx, &mut base.derive(i)).summands)
        .collect();
    for k in [0, 4, 8] {
        let xs: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let d = ks_one_sample(&EmpiricalDist::new(xs).unwrap(), |x| w.cdf(x));
        assert!(d <= 0.02, "edge {k}: {d}");
    }
}

#[test]
fn partial_sums_are_centered() {
    let w = Distribution::parametric("exponential", &[1.0]).unwrap();
    let ctx = ctx_for(&w, 2);
    let gs = GraphSeq::complete_bipartite(1, 4);
    let reps = 20_000;
    let base = RngStream::new(14);
    let paths: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            stream_sequence(&gs, &ctx, 16, &mut base.derive(i))
                .unwrap()
                .map(|p| p.s_n)
                .collect()
        })
        .collect();
    for n in [1usize, 5, 9, 16] {
        let xs: Vec<f64> = paths.iter().map(|p| p[n - 1]).collect();
        assert!(sample_mean(&xs).abs() <= 4.0 / (reps as f64).sqrt(), "n {n}");
    }
}
