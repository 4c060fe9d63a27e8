//! Enumerating the four window families and inspecting their structure.
//!
//! ```bash
//! cargo run --example window_families
//! ```

use alrscan::data::PointDataset;
use alrscan::rng::replicate_rng;
use alrscan::windows::{build_windows, Rect, WindowSpec};
use rand::Rng;

fn main() {
    let mut rng = replicate_rng(3, 0);
    let n = 60;
    // two subjects share each site to show closed-ball / duplicate behavior
    let mut coords = Vec::new();
    let mut cases = Vec::new();
    for _ in 0..n / 2 {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        for _ in 0..2 {
            coords.extend_from_slice(&[x, y]);
            cases.push(rng.random::<f64>() < 0.2);
        }
    }
    let data = PointDataset::new(2, coords, cases, None).unwrap();

    let families: Vec<(&str, WindowSpec)> = vec![
        (
            "grid (fixed radius on a lattice)",
            WindowSpec::FixedRadiusGrid {
                radius: 0.2,
                spacing: 0.1,
                offset: 0.05,
                min_subjects: 2,
                domain: Some(Rect {
                    lo: vec![0.0, 0.0],
                    hi: vec![1.0, 1.0],
                }),
                circle_inside: true,
            },
        ),
        ("knn (site centers, rank radii)", WindowSpec::knn(5)),
        (
            "all-pairs (row centers, distinct radii)",
            WindowSpec::all_pairs(0.25),
        ),
        (
            "explicit index sets",
            WindowSpec::explicit(vec![(0..10).collect(), (10..60).collect()]),
        ),
    ];
    for (label, spec) in families {
        let ws = build_windows(&data, &spec).unwrap();
        let n_max = ws.windows().iter().map(|w| w.n()).max().unwrap();
        println!("{label:45} N = {:5}   largest n_B = {n_max}", ws.len());
        // co-located subjects make some memberships coincide
        let deduped = ws.clone().dedup_membership().unwrap();
        if deduped.len() != ws.len() {
            println!("{:45}   ({} distinct memberships)", "", deduped.len());
        }
    }

    // provenance dump of a small family
    let ws = build_windows(&data, &WindowSpec::knn(2)).unwrap();
    let mut out = Vec::new();
    ws.dump_tsv(&mut out).unwrap();
    println!("\nfirst provenance rows of knn:jmax=2:");
    for line in String::from_utf8(out).unwrap().lines().take(5) {
        println!("  {line}");
    }
}
