use facetopo::data::*;
use facetopo::error::Error;
use proptest::prelude::*;

fn coords(m: &DatasetManifest, i: usize) -> Vec<(f64, f64)> {
    m.samples[i].landmarks.coords().collect()
}

fn small_synth(seed: u64) -> DatasetManifest {
    synth_generate(&SynthConfig {
        samples_per_class: 12,
        image_size: 16,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn landmark_row_parses_before_normalization() {
    let table = parse_landmark_csv("label,x0,y0,x1,y1\n2,0.1,0.2,0.3,0.4\n".as_bytes()).unwrap();
    assert_eq!(table.n_landmarks, 2);
    assert_eq!(table.labels, vec![2]);
    assert_eq!(table.rows[0], vec![(0.1, 0.2), (0.3, 0.4)]);
}

#[test]
fn landmark_csv_normalizes_by_dataset_box() {
    let text = "label,x0,y0,x1,y1\n0,10,20,30,40\n1,20,30,50,60\n";
    let m = parse_landmark_csv(text.as_bytes()).unwrap().into_manifest(None).unwrap();
    assert_eq!(m.classes, 2);
    assert_eq!(coords(&m, 0), vec![(0.0, 0.0), (0.5, 0.5)]);
    assert_eq!(coords(&m, 1), vec![(0.25, 0.25), (1.0, 1.0)]);
}

#[test]
fn empty_landmark_file_is_a_format_error() {
    assert!(matches!(parse_landmark_csv("".as_bytes()), Err(Error::Format { .. })));
}

#[test]
fn ragged_and_malformed_rows_name_their_line() {
    let ragged = "label,x0,y0,x1,y1\n0,1,2,3,4\n1,1,2,3\n";
    match parse_landmark_csv(ragged.as_bytes()) {
        Err(Error::Format { line: Some(3), .. }) => {}
        other => panic!("expected format error at line 3, got {other:?}"),
    }
    let bad = "label,x0,y0\n0,1,2\n0,1,2\n1,x,2\n";
    match parse_landmark_csv(bad.as_bytes()) {
        Err(Error::Parse { line: 4, .. }) => {}
        other => panic!("expected parse error at line 4, got {other:?}"),
    }
}

#[test]
fn landmark_csv_roundtrip_through_a_file() {
    let m = small_synth(3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("landmarks.csv");
    write_landmark_csv(&m, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_landmark_csv(&path).unwrap();
    assert_eq!(back.labels(), m.labels());
    for i in 0..m.len() {
        for (a, b) in coords(&m, i).iter().zip(coords(&back, i)) {
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
        }
    }
}

fn fer_row(label: usize, pixels: &[&str], usage: &str) -> String {
    format!("{label},{},{usage}\n", pixels.join(" "))
}

#[test]
fn fer_pixels_scale_to_unit_interval() {
    let zeros = vec!["0"; FER_SIDE * FER_SIDE];
    let mut bright = zeros.clone();
    bright[5] = "255";
    let text = format!(
        "emotion,pixels,Usage\n{}{}",
        fer_row(3, &zeros, "Training"),
        fer_row(1, &bright, "PublicTest")
    );
    let rows = load_fer_csv(text.as_bytes(), FER_SIDE).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].image.pixels().iter().all(|&p| p == 0.0));
    assert_eq!((rows[0].image.width(), rows[0].image.height()), (48, 48));
    assert_eq!(rows[1].image.pixels()[5], 1.0);
    assert_eq!(rows[0].usage, Some(Split::Train));
    assert_eq!(rows[1].usage, Some(Split::Val));
    assert_eq!(rows[0].label, 3);
}

#[test]
fn fer_short_row_is_a_format_error_with_its_line() {
    let full = vec!["7"; FER_SIDE * FER_SIDE];
    let short = vec!["7"; FER_SIDE * FER_SIDE - 1];
    let text = format!("{}{}", fer_row(0, &full, "Training"), fer_row(0, &short, "Training"));
    match load_fer_csv(text.as_bytes(), FER_SIDE) {
        Err(e @ Error::Format { line: Some(2), .. }) => assert!(e.to_string().contains("2303")),
        other => panic!("expected format error at line 2, got {other:?}"),
    }
}

#[test]
fn fer_images_attach_to_landmarks() {
    let m = small_synth(4);
    let mut buf = Vec::new();
    write_fer_csv(&m, &mut buf).unwrap();
    let rows = load_fer_csv(buf.as_slice(), 16).unwrap();
    let stripped = DatasetManifest {
        samples: m.samples.iter().map(|s| Sample { image: None, ..s.clone() }).collect(),
        ..m.clone()
    };
    let joined = attach_images(&stripped, rows).unwrap();
    for (a, b) in joined.samples.iter().zip(&m.samples) {
        let (pa, pb) = (a.image.as_ref().unwrap().pixels(), b.image.as_ref().unwrap().pixels());
        assert!(pa.iter().zip(pb).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}

#[test]
fn dataset_directory_roundtrip() {
    let m = split(&small_synth(5), &[(Split::Train, 0.75), (Split::Test, 0.25)], 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset_dir(&m, dir.path()).unwrap();
    let back = load_dataset_dir(dir.path()).unwrap();
    assert_eq!(back.labels(), m.labels());
    assert_eq!(back.splits, m.splits);
    assert!(back.has_images());
    for i in 0..m.len() {
        for (a, b) in coords(&m, i).iter().zip(coords(&back, i)) {
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
        }
    }
}

#[test]
fn synth_is_bit_reproducible() {
    assert_eq!(small_synth(8), small_synth(8));
    assert_ne!(small_synth(8), small_synth(9));
}

#[test]
fn synth_rejects_bad_pairs_and_noise() {
    let bad_pair = SynthConfig { signal_pairs: vec![(0, 10)], ..SynthConfig::default() };
    assert!(matches!(synth_generate(&bad_pair), Err(Error::InvalidArgument(_))));
    let no_noise = SynthConfig { noise: 0.0, ..SynthConfig::default() };
    assert!(synth_generate(&no_noise).is_err());
}

#[test]
fn split_rejects_fractions_not_summing_to_one() {
    let m = small_synth(1);
    assert!(split(&m, &[(Split::Train, 0.5), (Split::Test, 0.4)], 1).is_err());
}

#[test]
fn single_fraction_keeps_everything_together() {
    let m = split(&small_synth(1), &[(Split::Train, 1.0)], 1).unwrap();
    assert!(m.splits.iter().all(|s| *s == Some(Split::Train)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stratified_partition_is_exhaustive_and_proportional(
        labels in prop::collection::vec(0usize..4, 1..200),
        a in 0.0f64..1.0,
        seed_value in any::<u64>(),
    ) {
        let fractions = [a, 1.0 - a];
        let groups = stratified_partition(&labels, &fractions, seed_value).unwrap();
        let mut all: Vec<usize> = groups.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for class in 0..4 {
            let total = labels.iter().filter(|&&l| l == class).count() as f64;
            for (g, f) in groups.iter().zip(fractions) {
                let got = g.iter().filter(|&&i| labels[i] == class).count() as f64;
                prop_assert!((got - f * total).abs() <= 1.0);
            }
        }
        prop_assert_eq!(groups, stratified_partition(&labels, &fractions, seed_value).unwrap());
    }
}
