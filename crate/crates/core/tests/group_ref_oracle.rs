mod common;

use cadcost::dxf::{MaterialLexicon, QuantitySet};
use cadcost::features::{build_histogram, featurize, Quantity, N_BINS};
use cadcost::group_ref::*;
use cadcost::synth::{generate_sample, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(i: usize) -> Vec<f64> {
    let mut e = vec![0.0; N_BINS];
    e[i] = 1.0;
    e
}

#[test]
fn distance_examples() {
    let p = unit(3);
    assert_eq!(euclidean_distance(&p, &p).unwrap(), 0.0);
    assert!((euclidean_distance(&unit(0), &unit(1)).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(kl_divergence(&p, &p, KL_EPSILON).unwrap(), 0.0);
    // mean = e1, drawing = e2
    let kl = kl_divergence(&unit(1), &unit(0), KL_EPSILON).unwrap();
    let direct = ((1.0 + 1e-10) / 1e-10f64).ln();
    assert!((kl - direct).abs() < 1e-12);
    assert!((kl - 23.0259).abs() < 1e-4);
}

#[test]
fn distances_match_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..1000 {
        let a = common::random_normalized(&mut rng, i % 2 == 0);
        let b = common::random_normalized(&mut rng, i % 3 == 0);
        let e = euclidean_distance(&a, &b).unwrap();
        assert!((e - common::euclid_oracle(&a, &b)).abs() <= 1e-12);
        let k = kl_divergence(&a, &b, KL_EPSILON).unwrap();
        assert!((k - common::kl_oracle(&a, &b, KL_EPSILON)).abs() <= 1e-12);
        assert!(k >= -10.0 * KL_EPSILON);
        assert_eq!(kl_divergence(&a, &a, KL_EPSILON).unwrap(), 0.0);
    }
}

#[test]
fn euclidean_is_a_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..500 {
        let a = common::random_normalized(&mut rng, false);
        let b = common::random_normalized(&mut rng, true);
        let c = common::random_normalized(&mut rng, false);
        let ab = euclidean_distance(&a, &b).unwrap();
        assert_eq!(ab, euclidean_distance(&b, &a).unwrap());
        assert!(ab > 0.0);
        let ac = euclidean_distance(&a, &c).unwrap();
        let bc = euclidean_distance(&b, &c).unwrap();
        assert!(ac <= ab + bc + 1e-9);
    }
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(euclidean_distance(&[0.0; 3], &[0.0; 4]).is_err());
    assert!(kl_divergence(&[-0.1, 1.1], &[0.5, 0.5], KL_EPSILON).is_err());
    assert!(kl_divergence(&[f64::NAN, 1.0], &[0.5, 0.5], KL_EPSILON).is_err());
}

fn synthetic_sets(n: usize) -> Vec<QuantitySet> {
    let cfg = SynthConfig::default();
    // even indices all belong to the first template
    (0..n).map(|i| generate_sample(&cfg, 2 * i).drawing.quantities).collect()
}

#[test]
fn single_drawing_reference_is_unit_vector() {
    let mut qs = QuantitySet::empty("a", "g");
    qs.line_lengths = vec![0.0, 12.0, 2.5, 2.6, 2.7];
    let r = fit_group_reference(&[&qs], &MaterialLexicon::default()).unwrap();
    // edges 0..12 step 1: three values in bin 3, one each in bins 1 and 12
    let line = r.quantity(Quantity::Line);
    assert_eq!(line.n_drawings, 1);
    let mut want = vec![0.0; N_BINS];
    want[0] = 0.2;
    want[2] = 0.6;
    want[11] = 0.2;
    for (a, b) in line.mean_bins.iter().zip(&want) {
        assert!((a - b).abs() < 1e-15);
    }
    qs.line_lengths = vec![2.5, 2.5];
    let mut other = QuantitySet::empty("b", "g");
    other.line_lengths = vec![0.0, 12.0, 2.5];
    let r = fit_group_reference(&[&other], &MaterialLexicon::default()).unwrap();
    let only_bin3 = build_histogram(&qs.line_lengths, &r.quantity(Quantity::Line).edges);
    assert_eq!(only_bin3.norm.to_vec(), unit(2));
}

#[test]
fn mean_bins_equal_bruteforce_average() {
    let sets = synthetic_sets(50);
    let refs: Vec<&QuantitySet> = sets.iter().collect();
    let r = fit_group_reference(&refs, &SynthConfig::default().lexicon()).unwrap();
    assert_eq!(r.n_train, 50);
    for q in Quantity::HISTOGRAM {
        let all: Vec<f64> = sets.iter().flat_map(|s| q.values(s).iter().copied()).collect();
        let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let edges = common::oracle_edges(lo, hi);
        let qr = r.quantity(q);
        for (a, b) in qr.edges.iter().zip(&edges) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        let mut sum = vec![0.0; N_BINS];
        let mut n = 0;
        for s in &sets {
            let v = q.values(s);
            if v.is_empty() {
                continue;
            }
            n += 1;
            let c = common::histogram_oracle(v, &edges);
            let t: u64 = c.iter().sum();
            for i in 0..N_BINS {
                sum[i] += c[i] as f64 / t as f64;
            }
        }
        assert_eq!(qr.n_drawings, n);
        for i in 0..N_BINS {
            assert!((qr.mean_bins[i] - sum[i] / n as f64).abs() <= 1e-12, "{q:?} bin {i}");
            assert!((0.0..=1.0).contains(&qr.mean_bins[i]));
        }
    }
}

#[test]
fn mean_bins_are_permutation_invariant() {
    let sets = synthetic_sets(30);
    let lex = SynthConfig::default().lexicon();
    let fwd: Vec<&QuantitySet> = sets.iter().collect();
    let rev: Vec<&QuantitySet> = sets.iter().rev().collect();
    let a = fit_group_reference(&fwd, &lex).unwrap();
    let b = fit_group_reference(&rev, &lex).unwrap();
    for q in Quantity::HISTOGRAM {
        assert_eq!(a.quantity(q).edges, b.quantity(q).edges);
        for (x, y) in a.quantity(q).mean_bins.iter().zip(&b.quantity(q).mean_bins) {
            assert!((x - y).abs() <= 1e-15);
        }
    }
}

#[test]
fn featurize_distances_match_stored_histograms() {
    let sets = synthetic_sets(40);
    let refs: Vec<&QuantitySet> = sets.iter().collect();
    let r = fit_group_reference(&refs, &SynthConfig::default().lexicon()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let qs = &sets[rng.random_range(0..sets.len())];
        let fv = featurize(qs, Some(&r)).unwrap();
        for q in Quantity::HISTOGRAM {
            let p = q.prefix();
            let norm: Vec<f64> = (1..=N_BINS)
                .map(|i| fv.get(&format!("norm_{p}_bin{i}")).unwrap())
                .collect();
            let mean = &r.quantity(q).mean_bins;
            assert_eq!(fv.get(&format!("{p}_euc_dist")), Some(euclidean_distance(&norm, mean).unwrap()));
            assert_eq!(fv.get(&format!("{p}_kl_div")), Some(kl_divergence(&norm, mean, r.epsilon).unwrap()));
        }
    }
}

#[test]
fn reference_file_round_trip() {
    let sets = synthetic_sets(10);
    let refs: Vec<&QuantitySet> = sets.iter().collect();
    let r = fit_group_reference(&refs, &SynthConfig::default().lexicon()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ref.json");
    r.save(&path).unwrap();
    assert_eq!(GroupReference::load(&path).unwrap(), r);
}
