use std::collections::HashSet;

use forumguard::corpus::{stratified_fold_plan, LabeledCorpus};
use forumguard::evaluate::{cross_validate, cross_validate_plan};
use forumguard::linear::{LinearModelConfig, LossKind};
use forumguard::pipeline::{fit_pipeline, ModelSpec, PipelineSpec, TrainedModel};
use proptest::prelude::*;

fn spec() -> PipelineSpec {
    let mut config = LinearModelConfig::new(LossKind::Logistic);
    config.max_epochs = 20;
    PipelineSpec::new(ModelSpec::Linear(config))
}

fn corpus_strategy() -> impl Strategy<Value = (Vec<String>, Vec<u8>)> {
    (10usize..40).prop_flat_map(|n| {
        let text = proptest::collection::vec("[a-h]{2,4}", 1..8).prop_map(|w| w.join(" "));
        (proptest::collection::vec(text, n), proptest::collection::vec(0u8..2, n)).prop_map(|(texts, mut labels)| {
            let n = labels.len();
            labels[0] = 0;
            labels[n - 1] = 1;
            labels[n - 2] = 1;
            (texts, labels)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fold_vocabularies_only_hold_training_tokens((texts, labels) in corpus_strategy(), seed in 0u64..1000) {
        let plan = stratified_fold_plan(&labels, 2, seed).unwrap();
        for fold in 0..plan.k {
            let train = plan.train_indices(fold);
            let train_texts: Vec<&str> = train.iter().map(|&i| texts[i].as_str()).collect();
            let train_labels: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
            if train_labels.iter().all(|&l| l == train_labels[0]) {
                continue;
            }
            let seen: HashSet<&str> = train_texts.iter().flat_map(|t| t.split(' ')).collect();
            let model = fit_pipeline(&train_texts, &train_labels, &spec(), None).unwrap();
            let TrainedModel::Linear { tfidf, .. } = &model.model else { unreachable!() };
            prop_assert!(tfidf.vocabulary.tokens().iter().all(|t| seen.contains(t.as_str())));
        }
    }

    #[test]
    fn cross_validation_matches_per_fold_fits((texts, labels) in corpus_strategy(), seed in 0u64..1000) {
        let corpus = LabeledCorpus::from_texts("p", &texts, &labels).unwrap();
        let plan = stratified_fold_plan(&labels, 2, seed).unwrap();
        let fitted = cross_validate(&corpus, &spec(), 2, seed, None);
        let manual = cross_validate_plan(&labels, &plan, |_, train, test| {
            let pick = |idx: &[usize]| idx.iter().map(|&i| texts[i].clone()).collect::<Vec<_>>();
            let y: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
            let model = fit_pipeline(&pick(train), &y, &spec(), None)?;
            Ok(model.predict_texts(&pick(test))?.into_iter().map(|p| p.label).collect())
        });
        match (fitted, manual) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }
}
