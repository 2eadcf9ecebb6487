//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use cadcost::dxf::{
    ArcEntity, CircleEntity, DimensionEntity, DimensionKind, Drawing, EllipseEntity, LineEntity,
    Point2, SplineEntity,
};
use cadcost::gbdt::{fit_gbdt, Dataset, GbdtModel, Matrix, TrainParams};
use cadcost::evaluate::Metric;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Descriptors recomputed from the textbook formulas, without sharing code
/// with the library. Order: count, min, max, range, mean, median, mode,
/// std, skewness, kurtosis.
pub fn describe_oracle(values: &[f64]) -> [Option<f64>; 10] {
    let n = values.len();
    if n == 0 {
        return [Some(0.0), None, None, None, None, None, None, None, None, None];
    }
    let mut s = values.to_vec();
    // insertion sort, deliberately naive
    for i in 1..n {
        let mut j = i;
        while j > 0 && s[j - 1] > s[j] {
            s.swap(j - 1, j);
            j -= 1;
        }
    }
    let min = s[0];
    let max = s[n - 1];
    let median = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 };
    let mut total = 0.0;
    for v in values {
        total += v;
    }
    let mean = total / n as f64;
    let central = |p: i32| values.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n as f64;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let (skew, kurt) = if n < 3 || m2 < 1e-12 {
        (0.0, 0.0)
    } else {
        (m3 / (m2 * m2.sqrt()), m4 / (m2 * m2) - 3.0)
    };
    let mode = if max == min {
        min
    } else {
        let counts = histogram_oracle(values, &oracle_edges(min, max));
        let mut best = 0;
        for i in 1..12 {
            if counts[i] > counts[best] {
                best = i;
            }
        }
        let w = (max - min) / 12.0;
        min + w * (best as f64 + 0.5)
    };
    [
        Some(n as f64),
        Some(min),
        Some(max),
        Some(max - min),
        Some(mean),
        Some(median),
        Some(mode),
        Some(m2.sqrt()),
        Some(skew),
        Some(kurt),
    ]
}

pub fn oracle_edges(min: f64, max: f64) -> [f64; 13] {
    let mut e = [0.0; 13];
    for (i, x) in e.iter_mut().enumerate() {
        *x = min + (max - min) * i as f64 / 12.0;
    }
    e[12] = max;
    e
}

/// Per-value linear scan over the bins, clamping outside values.
pub fn histogram_oracle(values: &[f64], edges: &[f64; 13]) -> [u64; 12] {
    let mut counts = [0u64; 12];
    for &v in values {
        let mut bin = 11;
        for i in 0..12 {
            if v < edges[i + 1] {
                bin = i;
                break;
            }
        }
        counts[bin] += 1;
    }
    counts
}

pub fn euclid_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

/// `sum mean_i * ln((mean_i + eps) / (dwg_i + eps))`.
pub fn kl_oracle(dwg: &[f64], mean: &[f64], eps: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..dwg.len() {
        s += mean[i] * ((mean[i] + eps) / (dwg[i] + eps)).ln();
    }
    s
}

pub fn random_normalized(rng: &mut ChaCha8Rng, sparse: bool) -> Vec<f64> {
    let raw: Vec<f64> = (0..12)
        .map(|_| {
            if sparse && rng.random_bool(0.4) {
                0.0
            } else {
                rng.random_range(0.0..1.0)
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut e = vec![0.0; 12];
        e[rng.random_range(0..12)] = 1.0;
        return e;
    }
    raw.iter().map(|v| v / total).collect()
}

fn coord(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(-1e6..1e6),
        1 => rng.random_range(-1.0..1.0),
        2 => rng.random_range(-1000i32..1000) as f64,
        _ => rng.random_range(-500.0..500.0),
    }
}

fn point(rng: &mut ChaCha8Rng) -> Point2 {
    Point2::new(coord(rng), coord(rng))
}

fn positive(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(1e-3..1e4)
}

fn word(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789:-./";
    let len = rng.random_range(1..=max_len);
    let mut s: String = (0..len)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
        .collect();
    // inner spaces only
    if len > 4 && rng.random_bool(0.5) {
        s.insert(len / 2, ' ');
    }
    s
}

/// Random drawing covering every entity type and dimension kind, including
/// texts long enough to be written as MTEXT.
pub fn random_drawing(rng: &mut ChaCha8Rng, id: &str) -> Drawing {
    let mut d = Drawing::new(id, "g");
    for _ in 0..rng.random_range(0..8) {
        d.lines.push(LineEntity { start: point(rng), end: point(rng) });
    }
    for _ in 0..rng.random_range(0..5) {
        d.circles.push(CircleEntity { center: point(rng), radius: positive(rng) });
    }
    for _ in 0..rng.random_range(0..5) {
        d.arcs.push(ArcEntity {
            center: point(rng),
            radius: positive(rng),
            start_angle: rng.random_range(-720.0..720.0),
            end_angle: rng.random_range(-720.0..720.0),
        });
    }
    for _ in 0..rng.random_range(0..3) {
        let nc = rng.random_range(1..6);
        let nf = rng.random_range(0..4);
        d.splines.push(SplineEntity {
            degree: rng.random_range(1..6),
            control_points: (0..nc).map(|_| point(rng)).collect(),
            fit_points: (0..nf).map(|_| point(rng)).collect(),
        });
    }
    for _ in 0..rng.random_range(0..3) {
        d.ellipses.push(EllipseEntity {
            center: point(rng),
            major_axis: Point2::new(positive(rng), coord(rng)),
            axis_ratio: rng.random_range(0.01..=1.0),
        });
    }
    for _ in 0..rng.random_range(0..6) {
        let kind = [
            DimensionKind::Rotated,
            DimensionKind::Angular,
            DimensionKind::Diametric,
            DimensionKind::Radial,
            DimensionKind::Other,
        ][rng.random_range(0..5)];
        let tolerance = rng.random_bool(0.4).then(|| (rng.random_range(1..500) as f64) / 1000.0);
        let text_override = match tolerance {
            Some(t) => Some(format!("<> ±{t}")),
            None => rng.random_bool(0.3).then(|| word(rng, 12)),
        };
        d.dimensions.push(DimensionEntity {
            kind,
            text_override,
            measurement: positive(rng),
            tolerance,
            def_point_a: Some(point(rng)),
            def_point_b: Some(point(rng)),
        });
    }
    for _ in 0..rng.random_range(0..4) {
        let max = if rng.random_bool(0.2) { 700 } else { 30 };
        d.texts.push(word(rng, max));
    }
    d
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn close_pt(a: Point2, b: Point2) -> bool {
    close(a.x, b.x) && close(a.y, b.y)
}

/// Entity counts equal and every numeric field within 1e-9 (relative to
/// magnitude), strings equal.
pub fn drawings_match(a: &Drawing, b: &Drawing) -> Result<(), String> {
    macro_rules! same_len {
        ($f:ident) => {
            if a.$f.len() != b.$f.len() {
                return Err(format!("{} count {} vs {}", stringify!($f), a.$f.len(), b.$f.len()));
            }
        };
    }
    same_len!(lines);
    same_len!(circles);
    same_len!(arcs);
    same_len!(splines);
    same_len!(ellipses);
    same_len!(dimensions);
    same_len!(texts);
    for (x, y) in a.lines.iter().zip(&b.lines) {
        if !(close_pt(x.start, y.start) && close_pt(x.end, y.end)) {
            return Err(format!("line {x:?} vs {y:?}"));
        }
    }
    for (x, y) in a.circles.iter().zip(&b.circles) {
        if !(close_pt(x.center, y.center) && close(x.radius, y.radius)) {
            return Err(format!("circle {x:?} vs {y:?}"));
        }
    }
    for (x, y) in a.arcs.iter().zip(&b.arcs) {
        if !(close_pt(x.center, y.center)
            && close(x.radius, y.radius)
            && close(x.start_angle, y.start_angle)
            && close(x.end_angle, y.end_angle))
        {
            return Err(format!("arc {x:?} vs {y:?}"));
        }
    }
    for (x, y) in a.splines.iter().zip(&b.splines) {
        let pts = |p: &[Point2], q: &[Point2]| p.len() == q.len() && p.iter().zip(q).all(|(u, v)| close_pt(*u, *v));
        if x.degree != y.degree || !pts(&x.control_points, &y.control_points) || !pts(&x.fit_points, &y.fit_points) {
            return Err(format!("spline {x:?} vs {y:?}"));
        }
    }
    for (x, y) in a.ellipses.iter().zip(&b.ellipses) {
        if !(close_pt(x.center, y.center) && close_pt(x.major_axis, y.major_axis) && close(x.axis_ratio, y.axis_ratio)) {
            return Err(format!("ellipse {x:?} vs {y:?}"));
        }
    }
    for (x, y) in a.dimensions.iter().zip(&b.dimensions) {
        let opt_pt = |p: Option<Point2>, q: Option<Point2>| match (p, q) {
            (Some(p), Some(q)) => close_pt(p, q),
            (None, None) => true,
            _ => false,
        };
        let tol_ok = match (x.tolerance, y.tolerance) {
            (Some(p), Some(q)) => close(p, q),
            (None, None) => true,
            _ => false,
        };
        if x.kind != y.kind
            || !close(x.measurement, y.measurement)
            || !tol_ok
            || x.text_override != y.text_override
            || !opt_pt(x.def_point_a, y.def_point_a)
            || !opt_pt(x.def_point_b, y.def_point_b)
        {
            return Err(format!("dimension {x:?} vs {y:?}"));
        }
    }
    if a.texts != b.texts {
        return Err(format!("texts {:?} vs {:?}", a.texts, b.texts));
    }
    Ok(())
}

/// Small random boosted model over `d` features (some values missing).
pub fn random_small_model(rng: &mut ChaCha8Rng, d: usize) -> (GbdtModel, Matrix) {
    let n = rng.random_range(30..60);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d)
            .map(|_| {
                if rng.random_bool(0.1) {
                    f64::NAN
                } else {
                    rng.random_range(-2.0..2.0)
                }
            })
            .collect();
        let v = |i: usize| if row[i].is_nan() { 0.5 } else { row[i] };
        let target = v(0) * v(1 % d) + (3.0 * v(d - 1)).sin() + rng.random_range(-0.1..0.1);
        rows.push(row);
        y.push(target);
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let schema: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    let data = Dataset::new(x.clone(), y, schema).unwrap();
    let params = TrainParams {
        n_estimators: rng.random_range(3..15),
        max_depth: rng.random_range(1..5),
        learning_rate: rng.random_range(0.1..0.8),
        min_child_samples: rng.random_range(1..4),
        reg_lambda: rng.random_range(0.0..2.0),
        seed: rng.random(),
        ..TrainParams::default()
    };
    (fit_gbdt(&data, None, &params, Metric::Mse).unwrap(), x)
}

/// Interventional Shapley values by full coalition enumeration, calling the
/// model on composed rows.
pub fn shapley_bruteforce(model: &GbdtModel, row: &[f64], background: &Matrix, active: &[usize]) -> Vec<f64> {
    let d = active.len();
    let value = |mask: usize| -> f64 {
        let mut total = 0.0;
        for b in 0..background.n_rows() {
            let mut z = background.row(b).to_vec();
            for (k, &f) in active.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    z[f] = row[f];
                }
            }
            total += model.predict_row(&z);
        }
        total / background.n_rows() as f64
    };
    let values: Vec<f64> = (0..1usize << d).map(value).collect();
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    (0..d)
        .map(|i| {
            let mut phi = 0.0;
            for mask in 0..1usize << d {
                if mask & (1 << i) == 0 {
                    let s = mask.count_ones() as usize;
                    let w = fact(s) * fact(d - s - 1) / fact(d);
                    phi += w * (values[mask | (1 << i)] - values[mask]);
                }
            }
            phi
        })
        .collect()
}
