//! Class names to hypothesis sentences.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{HypothesisCatalog, LabeledDataset};

pub const PLACEHOLDER: &str = "{}";

/// Fills the single `{}` of `template` with `class_name` verbatim.
pub fn render_template(template: &str, class_name: &str) -> Result<String> {
    let count = template.matches(PLACEHOLDER).count();
    if count != 1 {
        return Err(Error::Template(count));
    }
    Ok(template.replacen(PLACEHOLDER, class_name, 1))
}

#[derive(Debug, Clone, PartialEq)]
pub enum CatalogSource<'a> {
    Template(&'a str),
    Explicit(&'a BTreeMap<usize, Vec<String>>),
}

pub fn build_catalog(ds: &LabeledDataset, source: CatalogSource<'_>) -> Result<HypothesisCatalog> {
    let mut entries = BTreeMap::new();
    match source {
        CatalogSource::Template(template) => {
            for class in &ds.classes {
                entries.insert(class.id, vec![render_template(template, &class.name)?]);
            }
        }
        CatalogSource::Explicit(map) => {
            for class in &ds.classes {
                let hyps = map.get(&class.id).ok_or_else(|| {
                    Error::invalid(format!("no hypothesis for class {} (`{}`)", class.id, class.name))
                })?;
                entries.insert(class.id, hyps.clone());
            }
        }
    }
    let catalog = HypothesisCatalog {
        dataset_id: ds.dataset_id.clone(),
        entries,
    };
    catalog.validate()?;
    Ok(catalog)
}

/// Uniformly picks a class other than `correct_class`, then uniformly one of
/// its hypotheses.
pub fn sample_incorrect_hypothesis<'c, R: Rng + ?Sized>(
    catalog: &'c HypothesisCatalog,
    correct_class: usize,
    rng: &mut R,
) -> Result<(&'c str, usize)> {
    let others: Vec<usize> = catalog
        .entries
        .keys()
        .copied()
        .filter(|&c| c != correct_class)
        .collect();
    if others.is_empty() || catalog.entries.len() < 2 {
        return Err(Error::invalid(
            "a catalog with fewer than two classes cannot yield an incorrect hypothesis",
        ));
    }
    let class = others[rng.gen_range(0..others.len())];
    let hyps = &catalog.entries[&class];
    let hyp = &hyps[rng.gen_range(0..hyps.len())];
    Ok((hyp.as_str(), class))
}

/// Uniformly picks one of the hypotheses of `class`.
pub fn sample_hypothesis<'c, R: Rng + ?Sized>(
    catalog: &'c HypothesisCatalog,
    class: usize,
    rng: &mut R,
) -> Result<&'c str> {
    let hyps = catalog
        .entries
        .get(&class)
        .ok_or_else(|| Error::invalid(format!("catalog has no class {class}")))?;
    Ok(&hyps[rng.gen_range(0..hyps.len())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClassInfo;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn classes(names: &[&str]) -> LabeledDataset {
        LabeledDataset::new(
            "d",
            names
                .iter()
                .enumerate()
                .map(|(id, n)| ClassInfo {
                    id,
                    name: n.to_string(),
                })
                .collect(),
        )
    }

    fn catalog(k: usize, per_class: usize) -> HypothesisCatalog {
        HypothesisCatalog {
            dataset_id: "d".into(),
            entries: (0..k)
                .map(|c| (c, (0..per_class).map(|h| format!("class {c} hyp {h}")).collect()))
                .collect(),
        }
    }

    #[test]
    fn renders_topic_template() {
        assert_eq!(
            render_template("This text is about {}", "politics").unwrap(),
            "This text is about politics"
        );
        assert_eq!(render_template("{}", "x").unwrap(), "x");
    }

    #[test]
    fn placeholder_count_must_be_one() {
        assert!(matches!(
            render_template("no placeholder", "x"),
            Err(Error::Template(0))
        ));
        assert!(matches!(render_template("{} and {}", "x"), Err(Error::Template(2))));
    }

    #[test]
    fn explicit_app_review_catalog() {
        let ds = classes(&["positive", "negative"]);
        let map: BTreeMap<usize, Vec<String>> = [
            (0, vec!["This app review text expresses positive sentiment".to_string()]),
            (1, vec!["This app review text expresses negative sentiment".to_string()]),
        ]
        .into_iter()
        .collect();
        let cat = build_catalog(&ds, CatalogSource::Explicit(&map)).unwrap();
        assert_eq!(
            cat.first_hypothesis(0),
            Some("This app review text expresses positive sentiment")
        );
        assert_eq!(cat.num_classes(), 2);
    }

    #[test]
    fn template_catalog_uses_label_text() {
        let ds = classes(&["economy", "welfare"]);
        let cat = build_catalog(&ds, CatalogSource::Template("This text is about {}")).unwrap();
        assert_eq!(cat.first_hypothesis(0), Some("This text is about economy"));
        assert_eq!(cat.first_hypothesis(1), Some("This text is about welfare"));
    }

    #[test]
    fn explicit_map_must_cover_classes_and_be_non_empty() {
        let ds = classes(&["a", "b"]);
        let missing: BTreeMap<usize, Vec<String>> = [(0, vec!["h".to_string()])].into_iter().collect();
        assert!(build_catalog(&ds, CatalogSource::Explicit(&missing)).is_err());
        let empty: BTreeMap<usize, Vec<String>> = [(0, vec!["h".to_string()]), (1, vec![String::new()])]
            .into_iter()
            .collect();
        assert!(build_catalog(&ds, CatalogSource::Explicit(&empty)).is_err());
    }

    #[test]
    fn two_classes_force_the_other() {
        let cat = catalog(2, 1);
        let mut rng = rng_from_seed(5);
        for _ in 0..50 {
            assert_eq!(sample_incorrect_hypothesis(&cat, 0, &mut rng).unwrap().1, 1);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let cat = catalog(3, 2);
        let draw = |seed| {
            let mut rng = rng_from_seed(seed);
            (0..20)
                .map(|_| sample_incorrect_hypothesis(&cat, 1, &mut rng).unwrap().0.to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn incorrect_classes_are_uniform() {
        let cat = catalog(3, 1);
        let mut rng = rng_from_seed(2024);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            counts[sample_incorrect_hypothesis(&cat, 0, &mut rng).unwrap().1] += 1;
        }
        assert_eq!(counts[0], 0);
        for c in &counts[1..] {
            let share = *c as f64 / 10_000.0;
            assert!((share - 0.5).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn single_class_catalog_cannot_sample() {
        let cat = catalog(1, 1);
        assert!(sample_incorrect_hypothesis(&cat, 0, &mut rng_from_seed(0)).is_err());
    }

    proptest! {
        #[test]
        fn never_returns_correct_class(k in 2usize..8, per in 1usize..4, correct in 0usize..8, seed in any::<u64>()) {
            let cat = catalog(k, per);
            let correct = correct % k;
            let mut rng = rng_from_seed(seed);
            for _ in 0..20 {
                let (hyp, class) = sample_incorrect_hypothesis(&cat, correct, &mut rng).unwrap();
                prop_assert_ne!(class, correct);
                prop_assert!(cat.entries[&class].iter().any(|h| h == hyp));
            }
        }

        #[test]
        fn rendering_is_injective(a in "[a-z ]{0,10}", b in "[a-z ]{0,10}") {
            let ra = render_template("This text is about {}.", &a).unwrap();
            let rb = render_template("This text is about {}.", &b).unwrap();
            prop_assert_eq!(a == b, ra == rb);
        }
    }
}
