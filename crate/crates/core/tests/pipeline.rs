use sceneparse::boost::Regime;
use sceneparse::context::{global_costs, initial_label_weights, rank_neighbors, InitialLabeling};
use sceneparse::corpus::{synth_corpus, Corpus, ImageLabelCounts, LabelIndex, LabelRaster, SynthSpec};
use sceneparse::features::feature_spec;
use sceneparse::fusion::CostField;
use sceneparse::mrf::{energy, minimize, EnergyModel, SmoothnessMatrix};
use sceneparse::pipeline::*;
use sceneparse::Error;

fn small_corpus() -> Corpus {
    let mut spec = SynthSpec::standard();
    spec.train = 40;
    spec.test = 6;
    synth_corpus(&spec, 11).unwrap()
}

fn small_config() -> Config {
    Config {
        trees: 15,
        ..Config::benchmark()
    }
}

fn raster(labels: &[u16]) -> LabelRaster {
    LabelRaster::new(labels.len(), 1, labels.to_vec()).unwrap()
}

#[test]
fn metrics_of_perfect_and_hopeless_predictions() {
    let gt = vec![raster(&[1, 1, 2, 0, 3]), raster(&[2, 2])];
    let perfect = evaluate(&gt, &gt, 3).unwrap();
    assert_eq!((perfect.per_pixel, perfect.per_class), (1.0, 1.0));
    let wrong = vec![raster(&[2, 3, 1, 1, 1]), raster(&[1, 3])];
    let m = evaluate(&wrong, &gt, 3).unwrap();
    assert_eq!((m.per_pixel, m.per_class), (0.0, 0.0));
    assert_eq!(m.confusion_at(0, 1), 1);
}

#[test]
fn hand_confusion_fixture() {
    // Class A: 100 pixels, 90 right. Class B: 10 pixels, 5 right. Plus void.
    let mut truth = vec![1u16; 100];
    truth.extend([2u16; 10]);
    truth.extend([0u16; 7]);
    let mut pred = truth.clone();
    for p in pred.iter_mut().take(10) {
        *p = 2;
    }
    for p in pred.iter_mut().skip(100).take(5) {
        *p = 1;
    }
    let m = evaluate(&[raster(&pred)], &[raster(&truth)], 2).unwrap();
    assert!((m.per_pixel - 95.0 / 110.0).abs() < 1e-12);
    assert!((m.per_class - (0.9 + 0.5) / 2.0).abs() < 1e-12);
    assert_eq!(m.confusion, vec![90, 10, 5, 5]);
    let order: Vec<usize> = m.by_frequency().iter().map(|s| s.class).collect();
    assert_eq!(order, vec![0, 1]);
    let names = vec!["a".to_string(), "b".to_string()];
    assert!(m.class_csv(&names).starts_with("class,pixels,correct,recall\na,100,90,0.9\n"));
    assert!(m.confusion_csv(&names).contains("a,90,10"));
}

#[test]
fn metrics_ignore_image_order_and_reject_misaligned_input() {
    let gt = vec![raster(&[1, 2, 2]), raster(&[3, 3]), raster(&[1])];
    let pred = vec![raster(&[1, 1, 2]), raster(&[3, 2]), raster(&[1])];
    let a = evaluate(&pred, &gt, 3).unwrap();
    let rev = |v: &Vec<LabelRaster>| v.iter().rev().cloned().collect::<Vec<_>>();
    assert_eq!(a, evaluate(&rev(&pred), &rev(&gt), 3).unwrap());
    assert!(evaluate(&pred[..2], &gt, 3).is_err());
    assert!(evaluate(&[raster(&[1, 1])], &[raster(&[1])], 3).is_err());
    assert!(evaluate(&[raster(&[0])], &[raster(&[0])], 3).is_err());
}

#[test]
fn config_overrides_parse_over_defaults() {
    let cfg = Config::parse("lambda = 0.2\nK = 3\nfusion_rule = median\n").unwrap();
    assert_eq!(cfg.lambda, 0.2);
    assert_eq!(cfg.neighbors, 3);
    assert_eq!(cfg.trees, Config::default().trees);
    assert_eq!(Config::parse(&Config::benchmark().to_text()).unwrap(), Config::benchmark());
}

#[test]
fn variant_names_round_trip() {
    for v in Variant::ALL {
        assert_eq!(Variant::parse(v.name()), Some(v));
    }
    assert_eq!(Variant::parse("nope"), None);
}

#[test]
fn bundle_survives_disk_and_guards_its_header() {
    let corpus = small_corpus();
    let config = small_config();
    let bundle = train_pipeline(&corpus, &config).unwrap();
    for c in 0..bundle.num_classes() {
        let total: f64 = (0..4).map(|j| bundle.weights.get(j, c)).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_bundle(&bundle, &path).unwrap();
    let loaded = load_bundle(&path).unwrap();
    assert_eq!(loaded, bundle);
    let (_, feats) = featurize(&corpus.test[0].image, &config).unwrap();
    for v in Variant::ALL {
        assert_eq!(variant_scores(&loaded, &feats, v).unwrap(), variant_scores(&bundle, &feats, v).unwrap());
    }

    let bytes = bundle.to_bytes();
    // Bytes 8..16 hold the feature layout hash.
    let mut patched = bytes.clone();
    patched[8] ^= 0xff;
    assert!(matches!(ModelBundle::from_bytes(&patched), Err(Error::FeatureHash { .. })));
    let mut versioned = bytes.clone();
    versioned[4] = 99;
    assert!(matches!(ModelBundle::from_bytes(&versioned), Err(Error::Version { .. })));
    for cut in [0, 3, 12, bytes.len() / 2, bytes.len() - 1] {
        assert!(ModelBundle::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    assert_eq!(bundle.feature_hash, feature_spec().hash());
}

#[test]
fn training_and_parsing_are_reproducible() {
    let corpus = small_corpus();
    let config = small_config();
    let a = train_pipeline(&corpus, &config).unwrap();
    let b = train_pipeline(&corpus, &config).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    let img = &corpus.test[1].image;
    let p = parse_image(img, &a, Variant::Full).unwrap();
    assert_eq!(p, parse_image(img, &b, Variant::Full).unwrap());
    assert_eq!(p.raster().to_pgm(), parse_image(img, &a, Variant::Full).unwrap().raster().to_pgm());
}

#[test]
fn label_cost_pass_never_ends_above_its_start() {
    let corpus = small_corpus();
    let bundle = train_pipeline(&corpus, &small_config()).unwrap();
    for e in &corpus.test {
        let p = parse_image(&e.image, &bundle, Variant::Full).unwrap();
        let q = p.pass2.as_ref().unwrap();
        assert!(q.result.energy.total() <= q.start_energy + 1e-12);
        assert_eq!(q.neighbors.len(), bundle.config.neighbors);
        assert_eq!(p.raster().dims(), e.labels.dims());
        let baseline = parse_image(&e.image, &bundle, Variant::Baseline).unwrap();
        assert!(baseline.pass2.is_none());
    }
}

#[test]
fn rare_regimes_drop_out_when_no_class_is_rare() {
    let spec = SynthSpec::parse(
        "version = 1\nwidth = 32\nheight = 32\ntrain = 12\ntest = 2\n\
         class = sky background 120 160 220 std=6\n\
         class = grass background 60 150 60 std=6\n\
         scene = field : sky grass :\n",
    )
    .unwrap();
    let corpus = synth_corpus(&spec, 2).unwrap();
    let (bundle, report) = train_pipeline_traced(&corpus, &small_config()).unwrap();
    assert!(bundle.model(Regime::BalancedLtX).is_none());
    assert!(bundle.model(Regime::BalancedLtHalfX).is_none());
    assert!(report.regimes[2].skipped.is_some() && report.regimes[3].skipped.is_some());
    for c in 0..2 {
        assert_eq!(bundle.weights.get(2, c) + bundle.weights.get(3, c), 0.0);
        assert!((bundle.weights.get(0, c) + bundle.weights.get(1, c) - 1.0).abs() < 1e-9);
    }
    let r = evaluate_variant(&corpus, &bundle, Variant::Full).unwrap();
    assert!(r.metrics.per_pixel > 0.5);
}

#[test]
fn outlier_island_is_removed_by_label_costs() {
    // Scene A images hold labels {0, 1}; scene B images hold {2, 3}.
    let mut images = Vec::new();
    for i in 0..5 {
        images.push(ImageLabelCounts { id: format!("a{i}"), counts: vec![6, 4, 0, 0], void: 0 });
        images.push(ImageLabelCounts { id: format!("b{i}"), counts: vec![0, 0, 5, 5], void: 0 });
    }
    let index = LabelIndex::from_parts(4, images, vec![0.5, 0.3, 0.2, 0.2]).unwrap();

    // Ten superpixels in a chain: six prefer 0, three prefer 1, and one
    // prefers label 2 by a small margin.
    let mut d = Vec::new();
    for i in 0..10 {
        let best = if i < 6 { 0 } else if i < 9 { 1 } else { 2 };
        for c in 0..4 {
            d.push(if c == best { 0.45 } else if i == 9 && c == 1 { 0.5 } else { 0.9 });
        }
    }
    let costs = CostField::new(10, 4, d).unwrap();
    let adj: Vec<(usize, usize)> = (0..9).map(|i| (i, i + 1)).collect();
    let v = SmoothnessMatrix::potts(4, 0.5);
    let base = EnergyModel::new(&costs, &adj, &v, 0.0, None).unwrap();
    let pass1 = minimize(&base, &costs.argmin()).unwrap();
    assert_eq!(pass1.unique, vec![0, 1, 2]);

    // Weights 0.4, 0.7, 0.9: scene A scores 1.1 and scene B 0.9.
    let lab = InitialLabeling::new(pass1.labels.clone(), 4).unwrap();
    let ranked = rank_neighbors(&index, &initial_label_weights(&lab).unwrap(), 5).unwrap();
    let ids: Vec<usize> = ranked.iter().map(|n| n.image).collect();
    assert!(ids.iter().all(|&j| index.images[j].id.starts_with('a')));
    let h = global_costs(&index, &ids).unwrap();
    // Label 2: none of 50 neighborhood superpixels, 25 of 100 overall.
    let expect = -((1.0 / 25.0) / (51.0 / 100.0f64)).ln();
    assert!((h.cost[2] - expect).abs() < 1e-12);

    let mrf_costs = h.mrf_costs();
    let model = EnergyModel { label_costs: Some(&mrf_costs), ..base };
    let start = energy(&pass1.labels, &model).unwrap().total();
    let pass2 = minimize(&model, &pass1.labels).unwrap();
    assert_eq!(pass2.unique, vec![0, 1]);
    assert!(pass2.unique.len() <= pass1.unique.len());
    assert!(pass2.energy.total() < start);
}
