mod common;

use common::{synthetic_table, synthetic_schema};
use gkmnc::dataset::{Class, DataTable, Record};
use gkmnc::gpc::{self, GpcTrainConfig};
use gkmnc::mlp;
use gkmnc::pipeline::*;

fn mlp_config() -> PipelineConfig {
    let mut c = PipelineConfig::parse("hidden_size = 3\nmlp_max_iterations = 150\nmin_partition_rows = 30\nk_max = 4").unwrap();
    c.seed = 11;
    c
}

fn gpc_config() -> PipelineConfig {
    PipelineConfig::parse("classifier = gpc\nmin_partition_rows = 30\nk_max = 4\nseed = 5").unwrap()
}

fn model_json(model: &GkmncModel) -> String {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(model, &path).unwrap();
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn name_reflects_structure() {
    let table = synthetic_table(300, 1);
    let (model, report) = train_gkmnc(&table, None, &mlp_config()).unwrap();
    assert_eq!(model.grouping_attribute, Some(0));
    let ks: Vec<String> = model.groups.values().map(|g| g.k().to_string()).collect();
    assert_eq!(model.name(), format!("G1-[{}]-MLP", ks.join(",")));
    assert_eq!(report.model_name, model.name());
    assert_eq!(model.architecture().as_deref(), Some("2-3-1"));
    assert_eq!(model.groups.keys().collect::<Vec<_>>(), ["north", "south"]);
    for g in model.groups.values() {
        assert_eq!(g.leaves.len(), g.clusters.as_ref().map_or(1, |c| c.k));
        for leaf in &g.leaves {
            assert_eq!(leaf.classifier.input_size(), 2);
        }
    }

    let mut c = mlp_config();
    c.clustering = ClusteringMode::Off;
    assert_eq!(train_gkmnc(&table, None, &c).unwrap().0.name(), "G1-MLP");
    c.grouping = GroupingMode::Off;
    assert_eq!(train_gkmnc(&table, None, &c).unwrap().0.name(), "MLP");
}

#[test]
fn blobs_are_found_by_clustering() {
    let table = synthetic_table(400, 2);
    let (model, report) = train_gkmnc(&table, None, &mlp_config()).unwrap();
    for g in &report.groups {
        assert_eq!(g.decision, ClusterDecision::Clustered(2), "{}", g.group);
    }
    assert_eq!(model.name(), "G1-[2,2]-MLP");
    let eval = evaluate(&model, &synthetic_table(200, 3)).unwrap();
    assert!(eval.overall_accuracy > 0.85, "{eval}");
}

#[test]
fn worker_count_does_not_change_results() {
    let table = synthetic_table(300, 4);
    let validation = synthetic_table(120, 5);
    for base in [mlp_config(), gpc_config()] {
        let mut outputs = Vec::new();
        for workers in [1, 2, 4] {
            let mut c = base.clone();
            c.worker_count = workers;
            let (model, _) = train_gkmnc(&table, None, &c).unwrap();
            outputs.push((model_json(&model), evaluate(&model, &validation).unwrap()));
        }
        assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    }
}

#[test]
fn degenerate_config_is_the_universal_classifier() {
    let table = synthetic_table(250, 6);
    let validation = synthetic_table(100, 7);
    let x = table.numeric_rows();
    let y = table.targets().unwrap();

    let mut c = mlp_config();
    c.grouping = GroupingMode::Off;
    c.clustering = ClusteringMode::Off;
    let (model, _) = train_gkmnc(&table, None, &c).unwrap();
    let direct = mlp::train(&x, &y, 3, c.seed, &c.mlp_cg, &c.line_search).unwrap();
    let leaf = &model.groups[ALL_ROWS].leaves[0];
    match &leaf.classifier {
        Classifier::Mlp(m) => assert_eq!(m, &direct),
        other => panic!("unexpected leaf {other:?}"),
    }
    let acc = mlp::accuracy(&direct, &validation.numeric_rows(), &validation.targets().unwrap()).unwrap();
    assert_eq!(evaluate(&model, &validation).unwrap().overall_accuracy, acc);

    let mut c = gpc_config();
    c.grouping = GroupingMode::Off;
    c.clustering = ClusteringMode::Off;
    let (model, _) = train_gkmnc(&table, None, &c).unwrap();
    let direct = gpc::train(&x, &y, c.seed, &GpcTrainConfig::default()).unwrap();
    for r in validation.rows() {
        let f = model.forecast(r).unwrap();
        assert_eq!(f.probability, Some(direct.predict_prob(&r.numeric).unwrap()));
        assert_eq!(f.class, direct.classify(&r.numeric).unwrap());
    }
}

#[test]
fn evaluation_is_consistent() {
    let table = synthetic_table(300, 8);
    let validation = synthetic_table(150, 9);
    let (model, _) = train_gkmnc(&table, None, &mlp_config()).unwrap();
    let eval = evaluate(&model, &validation).unwrap();
    assert_eq!(eval.n, 150);
    assert_eq!(eval.confusion.total(), 150);
    assert_eq!(eval.per_leaf.iter().map(|l| l.n).sum::<usize>(), 150);
    assert_eq!(eval.per_group.iter().map(|g| g.n).sum::<usize>(), 150);
    assert!((eval.aggregated_accuracy().unwrap() - eval.overall_accuracy).abs() < 1e-12);

    let forecasts = model.forecast_table(&validation).unwrap();
    let predicted_positive = forecasts.iter().filter(|f| f.class == Class::Positive).count();
    assert_eq!(predicted_positive, eval.confusion.true_positive + eval.confusion.false_positive);

    let csv = eval.to_csv();
    assert!(csv.starts_with("scope,group,cluster,n,accuracy\noverall,,,150,"));
}

#[test]
fn constant_model_on_balanced_data() {
    let table = synthetic_table(200, 10);
    let positives: Vec<usize> = (0..table.len())
        .filter(|&i| table.rows()[i].target == Some(Class::Positive))
        .collect();
    let negatives: Vec<usize> = (0..table.len())
        .filter(|&i| table.rows()[i].target == Some(Class::Negative))
        .collect();
    let mut c = mlp_config();
    c.grouping = GroupingMode::Off;
    c.clustering = ClusteringMode::Off;
    let (model, _) = train_gkmnc(&table.subset(&positives), None, &c).unwrap();
    let m = positives.len().min(negatives.len());
    let mut balanced: Vec<usize> = positives[..m].to_vec();
    balanced.extend(&negatives[..m]);
    let eval = evaluate(&model, &table.subset(&balanced)).unwrap();
    assert_eq!(eval.overall_accuracy, 0.5);

    let perfect = evaluate(&model, &table.subset(&positives)).unwrap();
    assert_eq!(perfect.overall_accuracy, 1.0);
    assert!(matches!(
        evaluate(&model, &DataTable::empty(table.schema().clone())),
        Err(PipelineError::EmptyValidation)
    ));
}

#[test]
fn save_and_load_preserve_forecasts() {
    let table = synthetic_table(300, 12);
    let probe = synthetic_table(100, 13);
    let dir = tempfile::tempdir().unwrap();
    for config in [mlp_config(), gpc_config()] {
        let (model, _) = train_gkmnc(&table, None, &config).unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.name(), model.name());
        for r in probe.rows() {
            let (a, b) = (model.forecast(r).unwrap(), loaded.forecast(r).unwrap());
            assert_eq!(a.class, b.class);
            assert_eq!(a.route, b.route);
            match (a.probability, b.probability) {
                (Some(p), Some(q)) => assert!((p - q).abs() < 1e-12),
                (None, None) => {}
                other => panic!("probability mismatch {other:?}"),
            }
        }
    }
}

#[test]
fn bad_model_files_are_rejected() {
    let table = synthetic_table(120, 14);
    let (model, _) = train_gkmnc(&table, None, &mlp_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&model, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();

    let wrong = dir.path().join("wrong.json");
    std::fs::write(&wrong, text.replacen("\"version\": 1", "\"version\": 99", 1)).unwrap();
    assert!(matches!(load_model(&wrong), Err(PipelineError::FormatVersionMismatch { .. })));

    let foreign = dir.path().join("foreign.json");
    std::fs::write(&foreign, "{\"hello\": 1}").unwrap();
    assert!(matches!(load_model(&foreign), Err(PipelineError::FormatVersionMismatch { .. })));

    let truncated = dir.path().join("truncated.json");
    std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_model(&truncated), Err(PipelineError::CorruptFile(_))));

    let gutted = dir.path().join("gutted.json");
    std::fs::write(&gutted, "{\"format\": \"gkmnc-model\", \"version\": 1, \"model\": {\"groups\": 3}}").unwrap();
    assert!(matches!(load_model(&gutted), Err(PipelineError::CorruptFile(_))));
}

fn with_region(region: &str) -> Record {
    Record {
        nominal: vec![region.to_string(), "a".to_string()],
        numeric: vec![0.5, -0.5],
        identifiers: vec!["new".to_string()],
        target: None,
    }
}

#[test]
fn unseen_labels_follow_the_policy() {
    let table = synthetic_table(200, 15);
    let mut c = mlp_config();
    c.unseen_label_policy = UnseenLabelPolicy::Error;
    let (model, _) = train_gkmnc(&table, None, &c).unwrap();
    match model.forecast(&with_region("east")) {
        Err(PipelineError::UnseenNominalLabel { attribute, label }) => {
            assert_eq!(attribute, "region");
            assert_eq!(label, "east");
        }
        other => panic!("expected an unseen-label error, got {other:?}"),
    }

    c.unseen_label_policy = UnseenLabelPolicy::RouteToLargestGroup;
    let (model, _) = train_gkmnc(&table, None, &c).unwrap();
    let f = model.forecast(&with_region("east")).unwrap();
    assert!(f.route.unseen_label);
    assert_eq!(f.route.group, "north");
    let seen = model.forecast(&with_region("south")).unwrap();
    assert!(!seen.route.unseen_label);
}

#[test]
fn centroids_route_to_themselves() {
    let table = synthetic_table(300, 16);
    let (model, _) = train_gkmnc(&table, None, &mlp_config()).unwrap();
    let mut checked = 0;
    for (label, group) in &model.groups {
        let Some(clusters) = &group.clusters else { continue };
        for (c, centroid) in clusters.centroids.iter().enumerate() {
            let mut record = with_region(label);
            record.numeric = group.normalizer.invert(centroid).unwrap();
            let f = model.forecast(&record).unwrap();
            assert_eq!((f.route.group.as_str(), f.route.cluster), (label.as_str(), c));
            checked += 1;
        }
    }
    assert!(checked >= 4);
}

#[test]
fn leaves_do_not_depend_on_other_groups() {
    let table = synthetic_table(300, 17);
    let north: Vec<usize> = (0..table.len()).filter(|&i| table.rows()[i].nominal[0] == "north").collect();
    let mut south: Vec<usize> = (0..table.len()).filter(|&i| table.rows()[i].nominal[0] == "south").collect();
    south.reverse();
    south.rotate_left(7);
    let mut order = north.clone();
    order.extend(&south);
    let mut c = mlp_config();
    c.grouping = GroupingMode::Attribute("region".into());
    let (a, _) = train_gkmnc(&table, None, &c).unwrap();
    let (b, _) = train_gkmnc(&table.subset(&order), None, &c).unwrap();
    let (na, nb) = (&a.groups["north"], &b.groups["north"]);
    for (la, lb) in na.leaves.iter().zip(&nb.leaves) {
        assert_eq!(la.seed, leaf_seed(c.seed, "north", la.cluster));
        assert_eq!(la.seed, lb.seed);
        match (&la.classifier, &lb.classifier) {
            (Classifier::Mlp(x), Classifier::Mlp(y)) => assert_eq!(x, y),
            _ => unreachable!(),
        }
    }
}

#[test]
fn leaf_failures_name_the_leaf() {
    let table = synthetic_table(200, 18);
    let mut c = gpc_config();
    c.clustering = ClusteringMode::Off;
    c.gpc_max_rows = 60;
    match train_gkmnc(&table, None, &c) {
        Err(PipelineError::Leaf { group, cluster, rows, source }) => {
            assert_eq!(group, "north");
            assert_eq!(cluster, 0);
            assert!(rows > 60);
            assert!(source.to_string().contains("60"), "{source}");
        }
        other => panic!("expected a leaf error, got {other:?}"),
    }
}

#[test]
fn fixed_grouping_must_be_nominal() {
    let table = synthetic_table(100, 19);
    let mut c = mlp_config();
    c.grouping = GroupingMode::Attribute("x1".into());
    assert!(matches!(train_gkmnc(&table, None, &c), Err(PipelineError::NotNominal(_))));
    c.grouping = GroupingMode::Attribute("5".into());
    assert_eq!(train_gkmnc(&table, None, &c).unwrap().0.grouping_attribute, Some(4));
}

#[test]
fn hidden_size_search() {
    let table = synthetic_table(240, 20);
    let validation = synthetic_table(100, 21);
    let mut c = mlp_config();
    c.hidden_size = HiddenSize::Search;
    c.hidden_candidates = vec![1, 2, 4];
    let (model, report) = train_gkmnc(&table, Some(&validation), &c).unwrap();
    let search = report.hidden_search.unwrap();
    assert_eq!(search.table.len(), 3);
    assert_eq!(model.hidden_size, Some(search.best));
    let best_acc = search.table.iter().find(|r| r.0 == search.best).unwrap().1;
    assert_eq!(evaluate(&model, &validation).unwrap().overall_accuracy, best_acc);

    let (model, report) = train_gkmnc(&table, None, &c).unwrap();
    assert_eq!(model.hidden_size, Some(report.hidden_search.unwrap().best));
}

#[test]
fn cross_validation_is_deterministic() {
    let table = synthetic_table(200, 22);
    let c = mlp_config();
    let a = cross_validate(&table, 4, &c).unwrap();
    let b = cross_validate(&table, 4, &c).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.folds.len(), 4);
    assert!(a.folds.iter().all(|f| f.train_rows == 150 && f.evaluation.n == 50));
    let mean = a.fold_accuracies().iter().sum::<f64>() / 4.0;
    assert!((a.mean_accuracy - mean).abs() < 1e-15);
    assert!(a.mean_gain_report.is_some());
    assert!(cross_validate(&table, 1, &c).is_err());
}

#[test]
fn two_folds_of_four_rows() {
    let table = synthetic_table(4, 23);
    let mut c = mlp_config();
    c.grouping = GroupingMode::Off;
    let cv = cross_validate(&table, 2, &c).unwrap();
    assert_eq!(cv.folds.len(), 2);
    assert!(cv.folds.iter().all(|f| f.train_rows == 2 && f.evaluation.n == 2));
}

#[test]
fn schema_mismatch_is_reported() {
    let table = synthetic_table(100, 24);
    let (model, _) = train_gkmnc(&table, None, &mlp_config()).unwrap();
    let other = gkmnc::dataset::Schema::parse("x1 = numeric\nx2 = numeric\nlabel = target\npositive_label = yes\n").unwrap();
    let empty = DataTable::empty(std::sync::Arc::new(other));
    assert!(matches!(model.forecast_table(&empty), Err(PipelineError::SchemaMismatch { .. })));
    assert_eq!(synthetic_schema().fingerprint(), model.schema.fingerprint());
}
