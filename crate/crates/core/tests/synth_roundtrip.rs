use cadcost::dxf::*;
use cadcost::pipeline::read_labels;
use cadcost::synth::*;

fn close_lists(what: &str, a: &[f64], b: &[f64]) {
    assert_eq!(a.len(), b.len(), "{what} length");
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= 1e-6 * (1.0 + y.abs()), "{what}: {x} vs {y}");
    }
}

fn assert_quantities_match(got: &QuantitySet, want: &QuantitySet) {
    close_lists("lines", &got.line_lengths, &want.line_lengths);
    close_lists("arc lengths", &got.arc_lengths, &want.arc_lengths);
    close_lists("arc angles", &got.arc_angles, &want.arc_angles);
    close_lists("circles", &got.circle_radii, &want.circle_radii);
    close_lists("rotated", &got.rotated_measurements, &want.rotated_measurements);
    close_lists("angular", &got.angular_measurements, &want.angular_measurements);
    close_lists("diametric", &got.diametric_measurements, &want.diametric_measurements);
    close_lists("radial", &got.radial_measurements, &want.radial_measurements);
    close_lists("tolerances", &got.tolerances, &want.tolerances);
    assert_eq!(got.ellipse_count, want.ellipse_count);
    assert_eq!(got.spline_count, want.spline_count);
    assert_eq!(got.materials, want.materials);
    assert!((got.scale - want.scale).abs() <= 1e-9 * want.scale);
}

#[test]
fn thousand_drawings_recover_ground_truth() {
    let cfg = SynthConfig { n_drawings: 1000, seed: 3, ..SynthConfig::default() };
    let lex = cfg.lexicon();
    for s in generate_samples(&cfg).unwrap() {
        let text = write_dxf(&s.drawing.drawing);
        let parsed = parse_drawing(&tokenize_dxf(&text).unwrap(), &s.drawing.drawing.group, &s.drawing.drawing.source_id).unwrap();
        assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
        assert!(parsed.unsupported.is_empty());
        let got = extract_quantities(&parsed.drawing, &lex);
        assert_quantities_match(&got, &s.drawing.quantities);
        assert_eq!(got.group, s.drawing.quantities.group);
    }
}

#[test]
fn fixed_circle_template() {
    let mut cfg = SynthConfig::default();
    let t = &mut cfg.groups[0];
    t.circles = CountRange::new(3, 3);
    t.circle_radius = Range::fixed(5.0);
    t.diametric_dims = CountRange::new(0, 0);
    t.radial_dims = CountRange::new(0, 0);
    cfg.groups.truncate(1);
    cfg.n_drawings = 20;
    for s in generate_samples(&cfg).unwrap() {
        let text = write_dxf(&s.drawing.drawing);
        let parsed = parse_drawing(&tokenize_dxf(&text).unwrap(), "bracket", "x").unwrap();
        let qs = extract_quantities(&parsed.drawing, &cfg.lexicon());
        close_lists("circles", &qs.circle_radii, &[5.0; 3]);
        // three equal radii: zero population spread
        let expected = cfg.cost.base
            + cfg.cost.rotated_max * qs.rotated_measurements.iter().cloned().fold(f64::MIN, f64::max)
            + cfg.cost.arc_angle_mean * qs.arc_angles.iter().sum::<f64>() / qs.arc_angles.len() as f64
            + cfg.cost.ellipse_count * qs.ellipse_count as f64;
        assert!((linear_cost(&s.drawing.quantities, &cfg.cost) - expected).abs() <= 1e-9);
    }
}

#[test]
fn corpus_is_deterministic_and_labels_recompute() {
    let cfg = SynthConfig { n_drawings: 10, ..SynthConfig::default() };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = generate_corpus(&cfg, a.path()).unwrap();
    let pb = generate_corpus(&cfg, b.path()).unwrap();
    assert_eq!(pa.dxf_files.len(), 10);
    assert_eq!(pb.dxf_files.len(), 10);
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.iter().filter(|n| n.to_string_lossy().ends_with(".dxf")).count(), 10);
    for n in &names {
        assert_eq!(std::fs::read(a.path().join(n)).unwrap(), std::fs::read(b.path().join(n)).unwrap(), "{n:?}");
    }
    let labels = read_labels(&pa.labels).unwrap();
    assert_eq!(labels.len(), 10);
    assert_eq!(std::fs::read_to_string(&pa.lexicon).unwrap(), "S235JR\nC45\nAlMgSi1\n");
    assert_eq!(SynthConfig::load(&pa.config).unwrap(), cfg);

    for i in 0..10 {
        let s = generate_sample(&cfg, i);
        let label = &labels[&source_id(i)];
        assert_eq!(label.group, cfg.groups[i % 2].name);
        let parsed = read_drawing(&pa.dxf_files[i], &label.group).unwrap();
        let qs = extract_quantities(&parsed.drawing, &cfg.lexicon());
        let mult = cfg.materials.iter().find(|m| qs.materials.contains(&m.name)).unwrap().multiplier;
        let recomputed = true_cost(&qs, mult, &cfg.cost, s.noise);
        assert!((recomputed - label.cost).abs() <= 1e-9 * label.cost, "{recomputed} vs {}", label.cost);
    }

    let other = SynthConfig { seed: 43, ..cfg.clone() };
    assert_ne!(generate_sample(&other, 0).cost, generate_sample(&cfg, 0).cost);
}

#[test]
fn costs_are_positive_and_bounded() {
    let cfg = SynthConfig::default();
    let samples = generate_samples(&cfg).unwrap();
    assert_eq!(samples.len(), 800);
    let max_mult = cfg.materials.iter().map(|m| m.multiplier).fold(0.0, f64::max);
    for s in &samples {
        assert!(s.cost > 0.0);
        let clean = linear_cost(&s.drawing.quantities, &cfg.cost).clamp(COST_MIN, COST_MAX);
        assert!((COST_MIN..=COST_MAX).contains(&clean));
        assert!(s.cost <= COST_MAX * max_mult * (1.0 + s.noise).max(MIN_NOISE_FACTOR) + 1e-9);
    }
    let mean = samples.iter().map(|s| s.cost).sum::<f64>() / 800.0;
    assert!((COST_MIN..=COST_MAX * max_mult).contains(&mean));
}

#[test]
fn true_cost_examples() {
    let qs = QuantitySet::empty("e", "g");
    let c = CostCoefficients { base: 2.0, rotated_max: 1.0, arc_angle_mean: 1.0, ellipse_count: 1.0, circle_radius_std: 1.0 };
    assert_eq!(linear_cost(&qs, &c), 2.0);
    assert_eq!(true_cost(&qs, 1.5, &c, 0.0), 3.0);
    assert_eq!(true_cost(&qs, 1.0, &c, -5.0), 2.0 * MIN_NOISE_FACTOR);
    let big = CostCoefficients { base: 1000.0, ..c };
    assert_eq!(true_cost(&qs, 1.0, &big, 0.0), COST_MAX);
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(generate_samples(&SynthConfig { n_drawings: 0, ..SynthConfig::default() }).is_err());
    let mut cfg = SynthConfig::default();
    cfg.groups.clear();
    assert!(cfg.validate().is_err());
    let mut cfg = SynthConfig::default();
    cfg.groups[0].scales.clear();
    assert!(cfg.validate().is_err());
}
