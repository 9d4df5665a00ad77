use mctn::data::Task;
use mctn::metrics::{
    ablation_table, binary_accuracy, export_embeddings_2d, f1_score, mae_metric, pca_2d, pearson_r, separation_ratio,
    write_embeddings_csv, MetricsReport, TableRow,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// Brute-force references written independently of the library code.

fn acc_ref(p: &[f64], t: &[f64]) -> f64 {
    let mut hits = 0;
    for i in 0..p.len() {
        let a = if p[i] < 0.0 { 0 } else { 1 };
        let b = if t[i] < 0.0 { 0 } else { 1 };
        if a == b {
            hits += 1;
        }
    }
    hits as f64 / p.len() as f64
}

fn f1_ref(p: &[usize], t: &[usize]) -> f64 {
    let count = |pv, tv| p.iter().zip(t).filter(|(a, b)| **a == pv && **b == tv).count() as f64;
    let (tp, fp, fneg) = (count(1, 1), count(1, 0), count(0, 1));
    if tp == 0.0 {
        return 0.0;
    }
    2.0 * tp / (2.0 * tp + fp + fneg)
}

fn mae_ref(p: &[f64], t: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += if p[i] > t[i] { p[i] - t[i] } else { t[i] - p[i] };
    }
    s / p.len() as f64
}

/// Textbook single-pass form `(n Sxy - Sx Sy) / sqrt((n Sxx - Sx^2)(n Syy - Sy^2))`.
fn pearson_ref(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sx, sy) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    let sxy: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let sxx: f64 = a.iter().map(|x| x * x).sum();
    let syy: f64 = b.iter().map(|y| y * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

#[test]
fn metrics_match_brute_force_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let n = rng.random_range(2..40);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        assert!((binary_accuracy(&p, &t).unwrap() - acc_ref(&p, &t)).abs() <= 1e-9, "case {case}");
        assert!((mae_metric(&p, &t).unwrap() - mae_ref(&p, &t)).abs() <= 1e-9, "case {case}");
        assert!((pearson_r(&p, &t).unwrap() - pearson_ref(&p, &t)).abs() <= 1e-9, "case {case}");
        let pc: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let tc: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        assert!((f1_score(&pc, &tc).unwrap() - f1_ref(&pc, &tc)).abs() <= 1e-9, "case {case}");
    }
}

#[test]
fn pearson_hand_case() {
    let r = pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
    // 3 / sqrt(2 * (14/3))
    assert!((r - 0.9820).abs() < 1e-4, "{r}");
    assert!((r - 3.0 / (2.0f64 * 14.0 / 3.0).sqrt()).abs() < 1e-15);
}

#[test]
fn metric_edge_cases() {
    assert_eq!(binary_accuracy(&[0.0, -0.1], &[1.0, -2.0]).unwrap(), 1.0);
    assert_eq!(f1_score(&[0, 0], &[0, 0]).unwrap(), 0.0);
    assert!(pearson_r(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    assert!(mae_metric(&[], &[]).is_err());
    assert!(binary_accuracy(&[1.0], &[1.0, 2.0]).is_err());
    let rep = MetricsReport::regression(&[1.0, -1.0, 2.0], &[0.5, -0.5, 1.0]).unwrap();
    assert_eq!((rep.task, rep.n, rep.acc), (Task::Regression, 3, 1.0));
    assert_eq!(rep.f1, Some(1.0));
    let rep = MetricsReport::classification(&[vec![0.2, 0.8], vec![0.6, 0.4]], &[1, 1]).unwrap();
    assert_eq!((rep.acc, rep.mae, rep.corr), (0.5, None, None));
    assert!((rep.f1.unwrap() - 2.0 / 3.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn pearson_is_bounded_and_symmetric(
        pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..50)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let (Ok(r1), Ok(r2)) = (pearson_r(&a, &b), pearson_r(&b, &a)) {
            prop_assert!((-1.0..=1.0).contains(&r1));
            prop_assert!((r1 - r2).abs() < 1e-12);
            let shifted: Vec<f64> = a.iter().map(|x| 2.5 * x + 7.0).collect();
            prop_assert!((pearson_r(&shifted, &b).unwrap() - r1).abs() < 1e-9);
        }
    }

    #[test]
    fn mae_is_a_metric(a in proptest::collection::vec(-10.0f64..10.0, 1..30)) {
        prop_assert_eq!(mae_metric(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 1.5).collect();
        prop_assert!((mae_metric(&a, &b).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn accuracy_is_a_fraction(p in proptest::collection::vec(-3.0f64..3.0, 1..30)) {
        prop_assert_eq!(binary_accuracy(&p, &p).unwrap(), 1.0);
        let neg: Vec<f64> = p.iter().map(|x| if *x >= 0.0 { -1.0 } else { 1.0 }).collect();
        prop_assert_eq!(binary_accuracy(&p, &neg).unwrap(), 0.0);
    }
}

fn clusters(seed: u64, gap: f64) -> (Vec<(String, Vec<Vec<f64>>)>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reps = Vec::new();
    let mut labels = Vec::new();
    for i in 0..60 {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let steps: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..6).map(|d| rng.sample::<f64, _>(StandardNormal) + if d < 2 { gap * label } else { 0.0 }).collect())
            .collect();
        reps.push((format!("s{i}"), steps));
        labels.push(label);
    }
    (reps, labels)
}

#[test]
fn separated_clusters_project_apart() {
    let classes = |labels: &[f64]| labels.iter().map(|l| usize::from(*l >= 0.0)).collect::<Vec<_>>();
    let (reps, labels) = clusters(1, 3.0);
    let pts = export_embeddings_2d(&reps, &labels).unwrap();
    let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.x, p.y)).collect();
    let far = separation_ratio(&xy, &classes(&labels)).unwrap();
    let (reps, labels) = clusters(1, 0.0);
    let pts = export_embeddings_2d(&reps, &labels).unwrap();
    let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.x, p.y)).collect();
    let near = separation_ratio(&xy, &classes(&labels)).unwrap();
    assert!(far > 2.0 && near < 1.0 && far > near, "{far} vs {near}");
}

#[test]
fn pca_recovers_the_dominant_axis() {
    // Points on a line along (1, 1, 0) plus a z offset uncorrelated with position.
    let z = |i: usize| if [0, 4, 5, 9].contains(&i) { 0.1 } else { -0.1 };
    let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64, z(i)]).collect();
    let proj = pca_2d(&pts).unwrap();
    let mean = 4.5;
    for (i, (x, _)) in proj.iter().enumerate() {
        assert!((x - (i as f64 - mean) * 2f64.sqrt()).abs() < 1e-9, "{x}");
    }
    let spread = |f: fn(&(f64, f64)) -> f64| proj.iter().map(|p| f(p).powi(2)).sum::<f64>();
    assert!(spread(|p| p.0) > 100.0 * spread(|p| p.1));
}

#[test]
fn embeddings_csv_header() {
    let (reps, labels) = clusters(2, 1.0);
    let pts = export_embeddings_2d(&reps[..4], &labels[..4]).unwrap();
    let mut out = Vec::new();
    write_embeddings_csv(&pts, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "id,x,y,label");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn table_marks_best_and_failed_rows() {
    let good = MetricsReport::regression(&[1.0, -1.0, 0.5], &[0.9, -1.2, 0.4]).unwrap();
    let worse = MetricsReport::regression(&[1.0, 1.0, -0.5], &[0.9, -1.2, 0.4]).unwrap();
    let rows = vec![
        TableRow { variant: "a".into(), direction: "T⇄V".into(), report: Some(good), error: None },
        TableRow { variant: "b".into(), direction: "T→V".into(), report: Some(worse), error: None },
        TableRow { variant: "e".into(), direction: "(T⇄V)→A".into(), report: None, error: Some("diverged".into()) },
    ];
    let table = ablation_table(&rows);
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].contains("Acc") && lines[0].contains("Corr"));
    let row_a = lines.iter().find(|l| l.contains("T⇄V")).unwrap();
    assert!(row_a.contains("100.0*"), "{table}");
    assert!(table.contains("(T⇄V)→A") && table.contains("failed: diverged"), "{table}");
}
