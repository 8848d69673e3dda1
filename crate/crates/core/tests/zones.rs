use std::collections::BTreeSet;
use std::time::Instant;

use netclutter::kselect::KPolicy;
use netclutter::mixture::Label;
use netclutter::network::extract_subnetwork;
use netclutter::pipeline::{classify_partitioned, PipelineOptions, ZoneStatus};
use netclutter::simulation::{confusion, rep_rng, rpoislpp, superpose};
use netclutter::synthetic::{geodesic_block, loop_grid};

/// City-scale structural check: about 8000 km of streets, about 11000 points
/// and an 18-zone partition. There is no ground truth for the real data, so
/// this only asserts that every zone gets a K and rates.
#[test]
fn eighteen_zones_at_city_scale() {
    let net = loop_grid(150, 150, 8.0e6, 0.2, 18).unwrap();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for v in net.vertices() {
        x0 = x0.min(v.x);
        x1 = x1.max(v.x);
        y0 = y0.min(v.y);
        y1 = y1.max(v.y);
    }
    // 6 x 3 blocks by segment midpoint
    let zone_of = |x: f64, y: f64| {
        let i = (((x - x0) / (x1 - x0) * 6.0) as usize).min(5);
        let j = (((y - y0) / (y1 - y0) * 3.0) as usize).min(2);
        format!("z{:02}", j * 6 + i)
    };
    let zones: Vec<String> = net
        .segments()
        .iter()
        .map(|s| {
            let (a, b) = (&net.vertices()[s.a], &net.vertices()[s.b]);
            zone_of(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
        })
        .collect();

    let mut rng = rep_rng(18, 0);
    let mut layers = vec![(rpoislpp(&net.full(), 9000.0 / 8.0e6, &mut rng).unwrap(), Label::Clutter)];
    for zi in 0..18 {
        let cx = x0 + (x1 - x0) * ((zi % 6) as f64 + 0.5) / 6.0;
        let cy = y0 + (y1 - y0) * ((zi / 6) as f64 + 0.5) / 3.0;
        let block: BTreeSet<usize> = geodesic_block(&net, cx, cy, 15_000.0).into_iter().collect();
        let region = extract_subnetwork(&net, &block, false).unwrap();
        layers.push((rpoislpp(&region, 0.0075, &mut rng).unwrap(), Label::Feature));
    }
    let pattern = superpose(layers);
    assert!((10_000..12_500).contains(&pattern.len()), "n = {}", pattern.len());

    let start = Instant::now();
    let opts = PipelineOptions { policy: KPolicy::Auto { k_max: 35 }, ..Default::default() };
    let result = classify_partitioned(&net, &pattern.points, &zones, &opts).unwrap();
    let secs = start.elapsed().as_secs_f64();

    assert_eq!(result.zones.len(), 18);
    for zone in &result.zones {
        let r = &zone.report;
        assert_eq!(r.status, ZoneStatus::Ok, "zone {}: {:?}", r.zone, r.message);
        let k = r.k.unwrap();
        assert!((1..=35).contains(&k));
        let truth: Vec<Label> = zone.point_indices.iter().map(|&i| pattern.truth[i]).collect();
        let pred: Vec<Label> = zone.point_indices.iter().map(|&i| result.labels[i].unwrap()).collect();
        let rates = confusion(&truth, &pred).unwrap();
        assert!(rates.tpr.is_some() && rates.fpr.is_some());
        eprintln!("{} K {k} n {} TPR {:.3} FPR {:.3}", r.zone, r.n_points, rates.tpr.unwrap(), rates.fpr.unwrap());
    }
    assert!(result.labels.iter().all(Option::is_some));
    eprintln!("{} points, {} segments, {secs:.1} s", pattern.len(), net.segments().len());
}
