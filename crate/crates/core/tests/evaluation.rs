use entail_core::eval::{aggregate_reports, evaluate_dataset, metrics_from_confusion, ConditionReport};
use entail_core::report::{emit_bar_chart, PLOT_HEIGHT};
use entail_core::verbalizer::{build_catalog, CatalogSource};
use entail_core::zeroshot::MockBackend;
use entail_core::{ClassInfo, LabeledDataset, LabeledExample, Split};

fn dataset(n_per_class: usize, k: usize) -> LabeledDataset {
    let classes = (0..k)
        .map(|id| ClassInfo {
            id,
            name: format!("topic {id}"),
        })
        .collect();
    let mut ds = LabeledDataset::new("eval", classes);
    for i in 0..n_per_class * k {
        let y = i % k;
        ds.examples.push(LabeledExample {
            text: format!("document {i} about something"),
            label_text: format!("topic {y}"),
            label_standard: y,
            dataset_id: "eval".into(),
            split: Split::Test,
        });
    }
    ds
}

#[test]
fn hash_mock_sits_at_chance() {
    let ds = dataset(500, 4);
    let catalog = build_catalog(&ds, CatalogSource::Template("This text is about {}")).unwrap();
    let report = evaluate_dataset(&ds, &catalog, &MockBackend::hashed()).unwrap();
    assert!(
        (report.balanced_accuracy - 0.25).abs() <= 0.05,
        "balanced accuracy {}",
        report.balanced_accuracy
    );
}

#[test]
fn planted_and_inverted_mocks_bracket_the_range() {
    let ds = dataset(20, 3);
    let catalog = build_catalog(&ds, CatalogSource::Template("This text is about {}")).unwrap();
    let planted = MockBackend::planted_from_dataset(&ds);
    assert_eq!(
        evaluate_dataset(&ds, &catalog, &planted).unwrap().balanced_accuracy,
        1.0
    );
    let inverted = MockBackend::planted_from_dataset(&ds).inverted();
    assert_eq!(
        evaluate_dataset(&ds, &catalog, &inverted).unwrap().balanced_accuracy,
        0.0
    );
}

fn condition(cond: &str, dataset: &str, ba: f64) -> ConditionReport {
    let mut report = metrics_from_confusion(dataset, vec![vec![1]]);
    report.balanced_accuracy = ba;
    ConditionReport {
        condition: cond.into(),
        report,
    }
}

#[test]
fn aggregate_delta_arithmetic() {
    let all = [0.80, 0.70, 0.90, 0.60];
    let nli = [0.70, 0.60, 0.80, 0.524];
    let mut reports = Vec::new();
    for (i, (&a, &b)) in all.iter().zip(&nli).enumerate() {
        reports.push(condition("all", &format!("d{i}"), a));
        reports.push(condition("nli-only", &format!("d{i}"), b));
    }
    let summary = aggregate_reports(&reports);
    let delta = &summary.deltas[0];
    assert_eq!((delta.condition.as_str(), delta.baseline.as_str()), ("all", "nli-only"));
    assert!((delta.delta - 0.094).abs() < 1e-12, "delta {}", delta.delta);
}

#[test]
fn bar_heights_match_values() {
    let mut reports = Vec::new();
    for (cond, vals) in [("all", [0.91, 0.37, 0.5]), ("nli-only", [0.12, 0.999, 0.0])] {
        for (d, v) in ["a", "b", "c"].iter().zip(vals) {
            reports.push(condition(cond, d, v));
        }
    }
    let svg = emit_bar_chart(&aggregate_reports(&reports));
    let attr = |tag: &str, name: &str| -> f64 {
        let start = tag.find(&format!(" {name}=\"")).unwrap() + name.len() + 3;
        let end = start + tag[start..].find('"').unwrap();
        tag[start..end].parse().unwrap()
    };
    let bars: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"bar\"")).collect();
    // three datasets plus the mean group, two conditions each
    assert_eq!(bars.len(), 8);
    for bar in bars {
        let value = attr(bar, "data-value");
        let height = attr(bar, "height");
        assert!((height - value * PLOT_HEIGHT).abs() <= 1.0, "{bar}");
    }
}
