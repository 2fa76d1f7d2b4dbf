use proptest::prelude::*;
use sceneparse::corpus::ImageRaster;
use sceneparse::features::{describe, feature_spec, FeatureMatrix};
use sceneparse::segment::{segment, SegmentParams, Segmentation};

fn halves(w: usize, h: usize, left: [u8; 3], right: [u8; 3]) -> ImageRaster {
    let pixels = (0..w * h).map(|i| if i % w < w / 2 { left } else { right }).collect();
    ImageRaster::new(w, h, pixels).unwrap()
}

#[test]
fn two_distant_halves_give_two_superpixels() {
    // RGB distance between the halves: sqrt(3 * 115.47^2) = 200.
    let img = halves(24, 16, [20, 20, 20], [135, 135, 135]);
    let params = SegmentParams {
        k: 10.0,
        min_size: 5,
        sigma: 0.0,
    };
    let seg = segment(&img, &params).unwrap();
    assert_eq!(seg.len(), 2);
    assert_eq!(seg.adjacency, vec![(0, 1)]);
    assert!(seg.labels.iter().enumerate().all(|(i, &s)| (s == seg.labels[0]) == (i % 24 < 12)));
}

#[test]
fn constant_image_is_one_superpixel_for_any_scale() {
    let img = ImageRaster::filled(17, 9, [77, 12, 200]);
    for k in [0.1, 10.0, 1e4] {
        let seg = segment(&img, &SegmentParams { k, min_size: 1, sigma: 0.8 }).unwrap();
        assert_eq!(seg.len(), 1);
        assert!(seg.adjacency.is_empty());
    }
}

/// A 6x6 two-color textured patch with its top-left corner at `(x0, y0)` on a
/// flat gray canvas, and the matching two-superpixel segmentation.
fn patch_scene(x0: usize, y0: usize) -> (ImageRaster, Segmentation) {
    let (w, h) = (40, 20);
    let mut pixels = vec![[90, 90, 90]; w * h];
    let mut ids = vec![0u32; w * h];
    for dy in 0..6 {
        for dx in 0..6 {
            let i = (y0 + dy) * w + x0 + dx;
            pixels[i] = if (dx + 2 * dy) % 3 == 0 { [220, 40, 30] } else { [60, 200, 90] };
            ids[i] = 1;
        }
    }
    (ImageRaster::new(w, h, pixels).unwrap(), Segmentation::from_labels(w, h, ids).unwrap())
}

#[test]
fn translation_changes_only_the_location_group() {
    let (img_a, seg_a) = patch_scene(5, 7);
    let (img_b, seg_b) = patch_scene(15, 7);
    let fa = describe(&img_a, &seg_a).unwrap();
    let fb = describe(&img_b, &seg_b).unwrap();
    let spec = feature_spec();
    let (ra, rb) = (fa.row(1), fb.row(1));
    for g in &spec.groups {
        let range = g.offset..g.offset + g.len;
        let max_diff = range.clone().map(|d| (ra[d] - rb[d]).abs()).fold(0.0, f64::max);
        if g.name == "location" {
            assert!(max_diff > 0.2, "location should move, diff {max_diff}");
            // Only the horizontal coordinate moved.
            let x = g.offset;
            assert!(((rb[x] - ra[x]) - 10.0 / 40.0).abs() < 1e-12);
            assert!((ra[x + 1] - rb[x + 1]).abs() < 1e-12);
        } else {
            assert!(max_diff < 1e-12, "group {} changed by {max_diff}", g.name);
        }
    }
}

fn histogram_sums(f: &FeatureMatrix, row: usize) -> Vec<f64> {
    let spec = feature_spec();
    let color = spec.group("color").unwrap();
    let texture = spec.group("texture").unwrap();
    let r = f.row(row);
    vec![
        r[color.offset + 6..color.offset + 14].iter().sum(),
        r[texture.offset..texture.offset + 8].iter().sum(),
    ]
}

fn small_image() -> impl Strategy<Value = ImageRaster> {
    (2usize..14, 2usize..14).prop_flat_map(|(w, h)| {
        // A handful of colors so that regions form.
        (Just((w, h)), proptest::collection::vec(0usize..4, w * h), proptest::collection::vec(any::<[u8; 3]>(), 4))
            .prop_map(|((w, h), idx, palette)| ImageRaster::new(w, h, idx.into_iter().map(|i| palette[i]).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn segmentation_is_total_dense_and_connected(
        img in small_image(),
        k in 0.5f64..500.0,
        min_size in 1usize..8,
        sigma in 0.0f64..1.5,
    ) {
        let seg = segment(&img, &SegmentParams { k, min_size, sigma }).unwrap();
        let (w, h) = img.dims();
        prop_assert_eq!(seg.labels.len(), w * h);
        let n = seg.len();
        prop_assert!(seg.labels.iter().all(|&s| (s as usize) < n));
        prop_assert!(seg.members.iter().all(|m| !m.is_empty()));
        // Each superpixel is one 4-connected component.
        for members in &seg.members {
            let id = seg.labels[members[0] as usize];
            let mut seen = vec![false; w * h];
            let mut stack = vec![members[0] as usize];
            seen[members[0] as usize] = true;
            let mut count = 0;
            while let Some(p) = stack.pop() {
                count += 1;
                let (x, y) = (p % w, p / w);
                let mut visit = |q: usize| {
                    if !seen[q] && seg.labels[q] == id {
                        seen[q] = true;
                        stack.push(q);
                    }
                };
                if x > 0 { visit(p - 1); }
                if x + 1 < w { visit(p + 1); }
                if y > 0 { visit(p - w); }
                if y + 1 < h { visit(p + w); }
            }
            prop_assert_eq!(count, members.len());
        }
        // Adjacency is irreflexive, ordered and backed by a shared edge.
        for &(a, b) in &seg.adjacency {
            prop_assert!(a < b && b < n);
        }
        let mut expect = Vec::new();
        for p in 0..w * h {
            let (x, y) = (p % w, p / w);
            for q in [(x + 1 < w).then(|| p + 1), (y + 1 < h).then(|| p + w)].into_iter().flatten() {
                let (a, b) = (seg.labels[p] as usize, seg.labels[q] as usize);
                if a != b { expect.push((a.min(b), a.max(b))); }
            }
        }
        expect.sort();
        expect.dedup();
        let mut got = seg.adjacency.clone();
        got.sort();
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn descriptors_are_finite_with_normalized_histograms(img in small_image(), k in 1.0f64..300.0) {
        let seg = segment(&img, &SegmentParams { k, min_size: 2, sigma: 0.5 }).unwrap();
        let f = describe(&img, &seg).unwrap();
        prop_assert_eq!(f.rows, seg.len());
        prop_assert_eq!(f.cols, feature_spec().dim());
        prop_assert!(f.data.iter().all(|v| v.is_finite()));
        for r in 0..f.rows {
            for s in histogram_sums(&f, r) {
                prop_assert!(s.abs() < 1e-9 || (s - 1.0).abs() < 1e-9, "histogram sum {}", s);
            }
        }
    }
}
