use entail_core::cleaner::{clean, CleanConfig};
use entail_core::model::{ClassInfo, LabeledDataset, LabeledExample, Split};
use entail_core::rng::rng_from_seed;
use rand::seq::SliceRandom;

const VOCAB: [&[&str]; 2] = [
    &[
        "goal", "match", "league", "striker", "coach", "season", "keeper", "penalty", "stadium", "referee",
    ],
    &[
        "senate",
        "ballot",
        "minister",
        "parliament",
        "vote",
        "campaign",
        "policy",
        "cabinet",
        "election",
        "treaty",
    ],
];
const WORDS_PER_TEXT: usize = 8;

/// 200 texts, 100 per class, each drawing eight words from its class vocabulary.
/// Returns the dataset with `flips` labels inverted and the flipped indices.
fn planted(flips: usize, seed: u64) -> (LabeledDataset, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let classes = vec![
        ClassInfo {
            id: 0,
            name: "sports".into(),
        },
        ClassInfo {
            id: 1,
            name: "politics".into(),
        },
    ];
    let mut ds = LabeledDataset::new("planted", classes);
    for i in 0..200 {
        let class = i % 2;
        let words: Vec<&str> = (0..WORDS_PER_TEXT)
            .map(|_| *VOCAB[class].choose(&mut rng).unwrap())
            .collect();
        ds.examples.push(LabeledExample {
            text: words.join(" "),
            label_text: if class == 0 { "sports" } else { "politics" }.into(),
            label_standard: class,
            dataset_id: "planted".into(),
            split: Split::Train,
        });
    }
    let mut idx: Vec<usize> = (0..200).collect();
    idx.shuffle(&mut rng);
    let mut flipped: Vec<usize> = idx[..flips].to_vec();
    flipped.sort_unstable();
    for &i in &flipped {
        let e = &mut ds.examples[i];
        e.label_standard = 1 - e.label_standard;
        e.label_text = ds.classes[e.label_standard].name.clone();
    }
    (ds, flipped)
}

#[test]
fn planted_noise_is_found() {
    for seed in [1u64, 2, 3, 42] {
        let (ds, flipped) = planted(20, seed);
        let (cleaned, report) = clean(&ds, &CleanConfig::default()).unwrap();
        let flagged: Vec<usize> = report.flagged.iter().map(|f| f.index).collect();
        let hits = flagged.iter().filter(|i| flipped.contains(i)).count();
        let false_alarms = flagged.len() - hits;
        println!(
            "seed {seed}: flagged {} hits {hits} false {false_alarms}",
            flagged.len()
        );
        assert!(hits as f64 >= 0.7 * flipped.len() as f64);
        assert!(false_alarms as f64 <= 0.05 * 180.0);
        assert_eq!(cleaned.examples.len(), 200 - flagged.len());
    }
}

#[test]
fn clean_data_loses_nothing() {
    let (ds, _) = planted(0, 7);
    let (cleaned, report) = clean(&ds, &CleanConfig::default()).unwrap();
    assert!(report.flagged.is_empty(), "{:?}", report.flagged);
    assert_eq!(cleaned, ds);
}

#[test]
fn skip_returns_input() {
    let (ds, _) = planted(20, 1);
    let config = CleanConfig {
        skip: true,
        ..Default::default()
    };
    let (cleaned, report) = clean(&ds, &config).unwrap();
    assert_eq!(cleaned, ds);
    assert!(report.skipped && report.flagged.is_empty());
}
