//! Exact tails checked against exhaustive enumeration of output sequences and
//! against a slow sequential-convolution evaluation of the converse term.

use std::collections::BTreeMap;

use vlsf_core::channel::{optimize_common_input, DMChannel};
use vlsf_core::converse::{l_t, ConverseConfig};
use vlsf_core::tail::{max_tail_over_types, type_tail_prob, CompositionType, TailConfig, TailEngine, TailMode};

/// Exact law of `Σ ln W(y_i|x_i)/Q(y_i)` with `Q` the output law of the
/// type, by listing every output sequence. Returns `(value, probability)`.
fn brute_force_law(w: &DMChannel, counts: &[usize]) -> Vec<(f64, f64)> {
    let t: usize = counts.iter().sum();
    let xs: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(x, &n)| std::iter::repeat_n(x, n))
        .collect();
    let ny = w.output_size();
    let q: Vec<f64> = (0..ny)
        .map(|y| {
            (0..w.input_size())
                .map(|x| counts[x] as f64 / t as f64 * w.prob(x, y))
                .sum()
        })
        .collect();
    let mut out = Vec::new();
    let total = ny.pow(t as u32);
    for code in 0..total {
        let mut c = code;
        let mut value = 0.0;
        let mut prob = 1.0;
        for &x in &xs {
            let y = c % ny;
            c /= ny;
            let p = w.prob(x, y);
            prob *= p;
            if p > 0.0 {
                value += (p / q[y]).ln();
            }
        }
        if prob > 0.0 {
            out.push((value, prob));
        }
    }
    out
}

fn tail_gt(law: &[(f64, f64)], lambda: f64) -> f64 {
    law.iter().filter(|(v, _)| *v > lambda).map(|(_, p)| p).sum()
}

/// Distinct support points, merging values closer than `tol`.
fn support(law: &[(f64, f64)], tol: f64) -> Vec<f64> {
    let mut vals: Vec<f64> = law.iter().map(|a| a.0).collect();
    vals.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for v in vals {
        if out.last().is_none_or(|&last| v - last > tol) {
            out.push(v);
        }
    }
    out
}

#[test]
fn type_tails_bracket_exhaustive_enumeration() {
    let step = 1e-6;
    let cfg = TailConfig::with_step(step);
    // Absorbs summation-order noise in the enumerated values.
    let fuzz = 1e-9;
    let mut cases = 0;
    for p in [0.11, 0.3] {
        let w = DMChannel::bsc(p).unwrap();
        let mut engine = TailEngine::new(w.clone(), cfg).unwrap();
        for t in 1..=8usize {
            engine.prepare(t);
            for a in 0..=t {
                let counts = vec![a, t - a];
                let ty = CompositionType::new(counts.clone());
                let law = brute_force_law(&w, &counts);
                let mut lambdas = support(&law, fuzz);
                lambdas.extend([-1.0, lambdas.last().unwrap() + 1.0]);
                for &lambda in &lambdas {
                    let up = type_tail_prob(&ty, &w, lambda, &cfg).unwrap();
                    assert!(up.certified);
                    let lower = tail_gt(&law, lambda + fuzz);
                    let upper = tail_gt(&law, lambda - t as f64 * step - fuzz);
                    assert!(
                        up.value >= lower - 1e-12,
                        "p={p} t={t} a={a} lambda={lambda}: {} < {lower}",
                        up.value
                    );
                    assert!(
                        up.value <= upper + 1e-12,
                        "p={p} t={t} a={a} lambda={lambda}: {} > {upper}",
                        up.value
                    );
                    let fast = engine.type_tail(&ty, lambda).unwrap();
                    assert!((fast - up.value).abs() <= 1e-12, "engine {fast} vs {}", up.value);
                    cases += 1;
                }
            }
        }
    }
    assert!(cases >= 200, "only {cases} cases");
}

#[test]
fn three_symbol_all_zero_type() {
    // All inputs equal: the type's output law is the row itself.
    let w = DMChannel::bsc(0.11).unwrap();
    let law = brute_force_law(&w, &[3, 0]);
    let ty = CompositionType::new(vec![3, 0]);
    let v = type_tail_prob(&ty, &w, 0.5, &TailConfig::with_step(1e-6))
        .unwrap()
        .value;
    assert_eq!(v, tail_gt(&law, 0.5));
}

#[test]
fn ternary_channel_against_enumeration() {
    let w = DMChannel::from_rows(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1], vec![0.25, 0.25, 0.5]]).unwrap();
    let step = 1e-6;
    let cfg = TailConfig::with_step(step);
    for t in 1..=5usize {
        for ty in CompositionType::enumerate(t, 3) {
            let law = brute_force_law(&w, ty.counts());
            for lambda in support(&law, 1e-9).into_iter().step_by(3) {
                let up = type_tail_prob(&ty, &w, lambda, &cfg).unwrap().value;
                assert!(up >= tail_gt(&law, lambda + 1e-9) - 1e-12);
                assert!(up <= tail_gt(&law, lambda - t as f64 * step - 1e-9) + 1e-12);
            }
        }
    }
}

/// Grid law of one symbol's density, rounded up, as a sorted map.
fn naive_symbol_law(w: &DMChannel, x: usize, q: &[f64], step: f64) -> BTreeMap<i64, f64> {
    let mut m = BTreeMap::new();
    for (y, &p) in w.row(x).iter().enumerate() {
        if p > 0.0 {
            let idx = ((p / q[y]).ln() / step).ceil() as i64;
            *m.entry(idx).or_insert(0.0) += p;
        }
    }
    m
}

fn naive_convolve(a: &BTreeMap<i64, f64>, b: &BTreeMap<i64, f64>) -> BTreeMap<i64, f64> {
    let mut out = BTreeMap::new();
    for (&i, &p) in a {
        for (&j, &r) in b {
            *out.entry(i + j).or_insert(0.0) += p * r;
        }
    }
    out
}

fn naive_max_tail(w: &DMChannel, t: usize, lambda: f64, step: f64) -> f64 {
    let thr = (lambda / step).floor() as i64;
    let mut best: f64 = 0.0;
    for a in 0..=t {
        let counts = [a, t - a];
        let q: Vec<f64> = (0..w.output_size())
            .map(|y| (0..2).map(|x| counts[x] as f64 / t as f64 * w.prob(x, y)).sum())
            .collect();
        let mut acc = BTreeMap::from([(0i64, 1.0)]);
        for (x, &n) in counts.iter().enumerate() {
            let law = naive_symbol_law(w, x, &q, step);
            for _ in 0..n {
                acc = naive_convolve(&acc, &law);
            }
        }
        let tail: f64 = acc.range(thr + 1..).map(|(_, p)| p).sum();
        best = best.max(tail);
    }
    best
}

#[test]
fn converse_term_matches_sequential_convolution() {
    let w = DMChannel::bsc(0.11).unwrap();
    let pair = optimize_common_input(&w, &w, 1e-9).unwrap();
    let cfg = ConverseConfig::new(20.0, 0.05);
    let t = 40;
    let fast = l_t(&cfg, &pair, t).unwrap();
    let lambda = 20.0 - 20f64.ln() - 1e-3 - 41f64.ln();
    let tail = naive_max_tail(&w, t, lambda, cfg.tail.step);
    let eps_m = 0.05 + 1.0 / 20.0;
    let expected = tail * tail + eps_m * (1.0 + tail);
    assert!((fast.lambda - lambda).abs() < 1e-12);
    assert!((fast.tail1 - tail).abs() < 1e-12, "{} vs {tail}", fast.tail1);
    assert!((fast.value - expected).abs() < 1e-12, "{} vs {expected}", fast.value);
    assert!(tail > 0.0 && tail < 1.0);
}

#[test]
fn max_over_types_matches_naive_maximum() {
    let w = DMChannel::bsc(0.3).unwrap();
    for t in [5usize, 12, 25] {
        for lambda in [0.5, 2.0, 4.0] {
            let fast = max_tail_over_types(t, &w, lambda, TailMode::Exact, &TailConfig::default()).unwrap();
            let slow = naive_max_tail(&w, t, lambda, 1e-5);
            assert!(
                (fast.value - slow).abs() < 1e-12,
                "t={t} lambda={lambda}: {} vs {slow}",
                fast.value
            );
        }
    }
}
