use ndarray::Array2;

use shapclust_core::data::{read_csv, write_csv_to};
use shapclust_core::{Dataset, RngStream};

fn awkward_value(rng: &mut RngStream) -> f64 {
    match rng.below(6) {
        0 => rng.standard_normal() * 1e-300,
        1 => rng.standard_normal() * 1e300,
        2 => (rng.below(200) as f64) - 100.0,
        3 => -0.0,
        _ => rng.uniform(-1e6, 1e6),
    }
}

fn random_dataset(seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed, 0xC5);
    let n = 1 + rng.below(40);
    let p = 1 + rng.below(12);
    let features = Array2::from_shape_fn((n, p), |_| awkward_value(&mut rng));
    let names = (0..p)
        .map(|j| match (seed + j as u64) % 4 {
            0 => format!("f{j}"),
            1 => format!("Feature {j}"),
            2 => format!("x_{j} (mm)"),
            _ => format!("\"q{j}\", quoted"),
        })
        .collect();
    let k = 1 + rng.below(4);
    let labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.below(k) }).collect();
    let k = labels.iter().max().unwrap() + 1;
    let class_names = if seed.is_multiple_of(2) {
        (0..k).map(|c| format!("Class {c}")).collect()
    } else {
        (0..k).map(|c| format!("group-{}", (b'a' + c as u8) as char)).collect()
    };
    Dataset::new(features, Some(labels), names, class_names).unwrap()
}

#[test]
fn hundred_datasets_round_trip_exactly() {
    for seed in 0..100 {
        let d = random_dataset(seed);
        let mut buf = Vec::new();
        write_csv_to(&d, &mut buf, "target").unwrap();
        let back = read_csv(buf.as_slice(), Some("target")).unwrap();
        assert_eq!(back.feature_names(), d.feature_names(), "seed {seed}");
        assert_eq!(back.labels(), d.labels(), "seed {seed}");
        assert_eq!(back.class_names(), d.class_names(), "seed {seed}");
        let same_bits = back
            .features()
            .iter()
            .zip(d.features())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same_bits, "seed {seed}");
    }
}

#[test]
fn unlabeled_round_trip() {
    let d = Dataset::from_matrix(Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64 / 7.0)).unwrap();
    let mut buf = Vec::new();
    write_csv_to(&d, &mut buf, "label").unwrap();
    let back = read_csv(buf.as_slice(), None).unwrap();
    assert_eq!(back.features(), d.features());
    assert!(back.labels().is_none());
}
