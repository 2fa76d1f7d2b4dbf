//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sceneparse::boost::{sigmoid_cost, ScoreMatrix};
use sceneparse::context::global_costs;
use sceneparse::corpus::{synth_corpus, ImageLabelCounts, LabelIndex, LabelRaster, SynthSpec};
use sceneparse::fusion::{weights_from_shifted, CostField, FusionRule};
use sceneparse::mrf::{minimize, EnergyModel, FlowGraph, SmoothnessMatrix};
use sceneparse::pipeline::*;

// Tolerances and thresholds.
const MRF_INSTANCES: usize = 200;
const MRF_RATIO_BOUND: f64 = 2.0;
const MRF_EXACT_SHARE: f64 = 0.90;
const MRF_EXACT_TOL: f64 = 1e-9;
const MRF_SECONDS: f64 = 10.0;
const LABEL_COST_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-9;
const SIGMOID_TOL: f64 = 1e-12;
const METRICS_TOL: f64 = 1e-12;
const FULL_GAIN_POINTS: f64 = 10.0;
const PIXEL_SLACK_POINTS: f64 = 2.0;
const FUSION_SLACK_POINTS: f64 = 1.0;
const BENCH_SECONDS: f64 = 600.0;
const BENCH_SEED: u64 = 42;

struct Report {
    lines: Vec<(bool, String, String)>,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        self.lines.push((ok, name.to_string(), detail));
    }
}

fn exhaustive_energy(n: usize, c: usize, e: impl Fn(&[usize]) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut labels = vec![0; n];
    for mut code in 0..c.pow(n as u32) {
        for l in labels.iter_mut() {
            *l = code % c;
            code /= c;
        }
        best = best.min(e(&labels));
    }
    best
}

fn mrf_oracle(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let started = Instant::now();
    let (mut exact, mut worst) = (0, 0.0f64);
    for _ in 0..MRF_INSTANCES {
        let n = rng.random_range(1..=8);
        let c = rng.random_range(2..=3);
        let d: Vec<f64> = (0..n * c).map(|_| rng.random_range(0.001..0.999)).collect();
        let mut adj = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(0.4) {
                    adj.push((a, b));
                }
            }
        }
        let lambda = [0.0, 0.5, 2.0][rng.random_range(0..3)];
        let h: Vec<f64> = (0..c).map(|_| rng.random_range(0.0..=1.0)).collect();
        let costs = CostField::new(n, c, d.clone()).unwrap();
        let v = SmoothnessMatrix::potts(c, 1.0);
        let model = EnergyModel::new(&costs, &adj, &v, lambda, Some(&h)).unwrap();
        let got = minimize(&model, &costs.argmin()).unwrap().energy.total();
        let brute = exhaustive_energy(n, c, |l| {
            let data: f64 = l.iter().enumerate().map(|(i, &k)| d[i * c + k]).sum();
            let pair = adj.iter().filter(|&&(a, b)| l[a] != l[b]).count() as f64;
            let used: f64 = (0..c).filter(|k| l.contains(k)).map(|k| h[k]).sum();
            data + lambda * pair + used
        });
        worst = worst.max(got / brute);
        if (got - brute).abs() <= MRF_EXACT_TOL * brute.max(1.0) {
            exact += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let share = exact as f64 / MRF_INSTANCES as f64;
    report.check(
        "mrf oracle",
        worst <= MRF_RATIO_BOUND && share >= MRF_EXACT_SHARE && secs < MRF_SECONDS,
        format!("worst ratio {worst:.4} (<= {MRF_RATIO_BOUND}), exact {exact}/{MRF_INSTANCES} (>= {:.0}%), {secs:.2}s (< {MRF_SECONDS}s)", MRF_EXACT_SHARE * 100.0),
    );
}

/// Arcs of a graph with source 0, internal nodes 1..=k, sink k+1.
fn arcs(k: usize) -> Vec<(usize, usize)> {
    let t = k + 1;
    let mut a = vec![(0, t)];
    for i in 1..=k {
        a.push((0, i));
        a.push((i, t));
        for j in 1..=k {
            if i != j {
                a.push((i, j));
            }
        }
    }
    a
}

fn min_cut_by_enumeration(k: usize, arcs: &[(usize, usize)], caps: &[u32]) -> u32 {
    let t = k + 1;
    (0..1u32 << k)
        .map(|mask| {
            let source_side = |v: usize| v == 0 || (v != t && mask >> (v - 1) & 1 == 1);
            arcs.iter()
                .zip(caps)
                .filter(|(&(u, v), _)| source_side(u) && !source_side(v))
                .map(|(_, &c)| c)
                .sum()
        })
        .min()
        .unwrap()
}

fn flow_of(k: usize, arcs: &[(usize, usize)], caps: &[u32]) -> f64 {
    let mut g = FlowGraph::new(k + 2);
    for (&(u, v), &c) in arcs.iter().zip(caps) {
        g.add_edge(u, v, c as f64);
    }
    g.max_flow(0, k + 1).flow
}

fn max_flow_exactness(report: &mut Report) {
    let mut checked = 0u64;
    let mut bad = 0u64;
    // Up to two internal nodes: every capacity assignment in 0..=5.
    for k in 0..=2 {
        let a = arcs(k);
        let mut caps = vec![0u32; a.len()];
        for mut code in 0..6u64.pow(a.len() as u32) {
            for c in caps.iter_mut() {
                *c = (code % 6) as u32;
                code /= 6;
            }
            checked += 1;
            bad += (flow_of(k, &a, &caps) != min_cut_by_enumeration(k, &a, &caps) as f64) as u64;
        }
    }
    // Three and four internal nodes: every arc subset, with capacities in
    // 1..=5 drawn from a fixed seed for the arcs present.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 3..=4 {
        let a = arcs(k);
        for mask in 0..1u64 << a.len() {
            let caps: Vec<u32> = (0..a.len()).map(|i| if mask >> i & 1 == 1 { rng.random_range(1..=5) } else { 0 }).collect();
            checked += 1;
            bad += (flow_of(k, &a, &caps) != min_cut_by_enumeration(k, &a, &caps) as f64) as u64;
        }
    }
    report.check(
        "max-flow exactness",
        bad == 0,
        format!("{checked} graphs with <= 4 internal nodes, {bad} mismatches (zero tolerance)"),
    );
}

fn label_cost_fixture(report: &mut Report) {
    let images = vec![
        ImageLabelCounts { id: "k".into(), counts: vec![4, 2], void: 0 },
        ImageLabelCounts { id: "rest".into(), counts: vec![2, 1], void: 1 },
    ];
    let index = LabelIndex::from_parts(2, images, vec![0.5, 0.5]).unwrap();
    let costs = global_costs(&index, &[0]).unwrap();
    let p_err = (costs.likelihood[0] - 25.0 / 9.0).abs();
    let h_err = (costs.cost[0] + (25.0f64 / 9.0).ln()).abs();
    report.check(
        "label cost fixture",
        p_err <= LABEL_COST_TOL && h_err <= LABEL_COST_TOL,
        format!("P = {:.15} (|err| {p_err:.1e}), H = {:.15} (|err| {h_err:.1e}), tol {LABEL_COST_TOL:e}", costs.likelihood[0], costs.cost[0]),
    );
}

fn fusion_fixture(report: &mut Report, bundle: &ModelBundle) {
    let l1 = ScoreMatrix::from_values(2, 2, &[2.0, 1.0, 2.0, 1.0]).unwrap();
    let l2 = ScoreMatrix::from_values(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
    let w = weights_from_shifted(&[Some(l1), Some(l2), None, None], 2).unwrap();
    // Raw ratios (2, 1/2) and (1, 1), normalized per class.
    let hand = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
    let fixture_err = (0..2)
        .flat_map(|j| (0..2).map(move |c| (j, c)))
        .map(|(j, c)| (w.get(j, c) - hand[j][c]).abs())
        .fold(0.0, f64::max);
    let sum_err = (0..bundle.num_classes())
        .map(|c| ((0..4).map(|j| bundle.weights.get(j, c)).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    report.check(
        "fusion weight fixture",
        fixture_err <= WEIGHT_TOL && sum_err <= WEIGHT_TOL,
        format!("fixture |err| {fixture_err:.1e}, trained per-class sums |err| {sum_err:.1e}, tol {WEIGHT_TOL:e}"),
    );
}

fn sigmoid_checks(report: &mut Report) {
    let half = sigmoid_cost(0.0) == 0.5;
    let quarter = (sigmoid_cost(3f64.ln()) - 0.25).abs();
    let grid: Vec<f64> = (0..1000).map(|i| sigmoid_cost(-20.0 + 40.0 * i as f64 / 999.0)).collect();
    let monotone = grid.windows(2).all(|w| w[1] < w[0]);
    report.check(
        "sigmoid cost",
        half && quarter <= SIGMOID_TOL && monotone,
        format!("cost(0) == 0.5: {half}, |cost(ln 3) - 0.25| = {quarter:.1e}, strictly decreasing on 1000 points: {monotone}"),
    );
}

fn metrics_fixture(report: &mut Report) {
    let mut truth = vec![1u16; 100];
    truth.extend([2u16; 10]);
    let mut pred = truth.clone();
    pred[..10].fill(2);
    pred[100..105].fill(1);
    let r = |v: Vec<u16>| LabelRaster::new(v.len(), 1, v).unwrap();
    let m = evaluate(&[r(pred)], &[r(truth)], 2).unwrap();
    let pp = (m.per_pixel - 95.0 / 110.0).abs();
    let pc = (m.per_class - 0.7).abs();
    report.check(
        "metrics fixture",
        pp <= METRICS_TOL && pc <= METRICS_TOL,
        format!("per-pixel {:.12} (|err| {pp:.1e}), per-class {:.12} (|err| {pc:.1e})", m.per_pixel, m.per_class),
    );
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };

    mrf_oracle(&mut report);
    max_flow_exactness(&mut report);
    label_cost_fixture(&mut report);
    sigmoid_checks(&mut report);
    metrics_fixture(&mut report);

    // Synthetic benchmark.
    let started = Instant::now();
    let corpus = synth_corpus(&SynthSpec::standard(), BENCH_SEED).unwrap();
    let config = Config::benchmark();
    let (bundle, train_report) = train_pipeline_traced(&corpus, &config).unwrap();
    let results: Vec<VariantResult> = Variant::ALL
        .iter()
        .map(|&v| evaluate_variant(&corpus, &bundle, v).unwrap())
        .collect();
    let bench_secs = started.elapsed().as_secs_f64();

    fusion_fixture(&mut report, &bundle);

    let traces: usize = train_report.regimes.iter().map(|r| r.loss_traces.len()).sum();
    let increases = train_report.loss_increases();
    report.check(
        "boosting loss",
        increases == 0 && traces > 0,
        format!("{traces} per-class trainers, {increases} rounds with higher loss"),
    );

    let get = |v: Variant| results.iter().find(|r| r.variant == v).unwrap();
    let full = get(Variant::Full);
    report.check(
        "label-cost effect",
        full.mean_unique_final <= full.mean_unique_pass1,
        format!("mean unique labels pass 1 {:.3}, pass 2 {:.3} over {} test images", full.mean_unique_pass1, full.mean_unique_final, corpus.test.len()),
    );

    let pts = |v: Variant| (100.0 * get(v).metrics.per_pixel, 100.0 * get(v).metrics.per_class);
    let (base_pp, base_pc) = pts(Variant::Baseline);
    let (full_pp, full_pc) = pts(Variant::Full);
    let (_, nl) = pts(Variant::Fused(FusionRule::Nl));
    let (_, avg) = pts(Variant::Fused(FusionRule::Average));
    let (_, med) = pts(Variant::Fused(FusionRule::Median));
    for r in &results {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(
            out,
            "       {:<11} per-pixel {:6.2}  per-class {:6.2}",
            r.variant.name(),
            100.0 * r.metrics.per_pixel,
            100.0 * r.metrics.per_class
        );
    }
    report.check(
        "variant ordering",
        full_pc >= base_pc + FULL_GAIN_POINTS
            && full_pp >= base_pp - PIXEL_SLACK_POINTS
            && nl >= avg - FUSION_SLACK_POINTS
            && nl >= med - FUSION_SLACK_POINTS
            && bench_secs < BENCH_SECONDS,
        format!(
            "full per-class {full_pc:.2} vs baseline {base_pc:.2} (need +{FULL_GAIN_POINTS}), \
             per-pixel {full_pp:.2} vs {base_pp:.2} (slack {PIXEL_SLACK_POINTS}), \
             nl {nl:.2} vs average {avg:.2} / median {med:.2} (slack {FUSION_SLACK_POINTS}), {bench_secs:.1}s (< {BENCH_SECONDS}s)"
        ),
    );

    // Determinism: retrain and reparse.
    let again = train_pipeline(&corpus, &config).unwrap();
    let same_bundle = again.to_bytes() == bundle.to_bytes();
    let images: Vec<_> = corpus.test.iter().map(|e| (e.id.as_str(), &e.image)).collect();
    let pgms = |b: &ModelBundle| -> Vec<Vec<u8>> {
        parse_all(&images, b, Variant::Full).unwrap().iter().map(|p| p.raster().to_pgm()).collect()
    };
    let same_pgms = pgms(&bundle) == pgms(&again);
    report.check(
        "determinism",
        same_bundle && same_pgms,
        format!("bundle bytes identical: {same_bundle}, {} label maps identical: {same_pgms}", images.len()),
    );

    let failed: Vec<&str> = report.lines.iter().filter(|l| !l.0).map(|l| l.1.as_str()).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
