//! CSV renderings of reports. Floats use Rust's shortest round-trip format,
//! so identical values always produce identical bytes.

use super::{AblationReport, BenchReport, EpochRecord, EvalReport};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn eval_summary_csv(r: &EvalReport) -> String {
    render(
        &["metric", "value"],
        [
            vec!["total".into(), r.total.to_string()],
            vec!["recognition_rate".into(), r.recognition_rate.to_string()],
            vec!["macro_f1".into(), r.macro_f1().to_string()],
        ],
    )
}

pub fn per_class_csv(r: &EvalReport) -> String {
    render(
        &["class", "support", "precision", "recall", "f1", "empty"],
        r.per_class.iter().map(|m| {
            vec![
                m.class.to_string(),
                m.support.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
                m.is_empty().to_string(),
            ]
        }),
    )
}

/// Rows are true classes, columns predicted classes.
pub fn confusion_csv(r: &EvalReport) -> String {
    let mut header = vec!["true".to_string()];
    header.extend((0..r.confusion.len()).map(|c| format!("pred_{c}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    render(
        &header,
        r.confusion.iter().enumerate().map(|(t, row)| {
            std::iter::once(t.to_string()).chain(row.iter().map(usize::to_string)).collect()
        }),
    )
}

pub fn loss_curve_csv(history: &[EpochRecord]) -> String {
    render(
        &[
            "epoch",
            "train_j",
            "train_fused",
            "train_structure",
            "train_texture",
            "val_j",
            "val_fused",
            "val_structure",
            "val_texture",
        ],
        history.iter().map(|h| {
            vec![
                h.epoch.to_string(),
                h.train.objective().to_string(),
                h.train.fused.to_string(),
                opt(h.train.structure),
                opt(h.train.texture),
                opt(h.val.map(|v| v.objective())),
                opt(h.val.map(|v| v.fused)),
                opt(h.val.and_then(|v| v.structure)),
                opt(h.val.and_then(|v| v.texture)),
            ]
        }),
    )
}

pub fn ablation_csv(r: &AblationReport) -> String {
    render(
        &["variant", "rr", "full_rr", "drop"],
        r.rows.iter().map(|row| {
            vec![
                row.variant.name().to_string(),
                row.rr.to_string(),
                r.full_rr.to_string(),
                r.drop(row).to_string(),
            ]
        }),
    )
}

fn edge_list(edges: &[(usize, usize)]) -> String {
    edges.iter().map(|(a, b)| format!("{a}-{b}")).collect::<Vec<_>>().join(" ")
}

pub fn bench_csv(r: &BenchReport) -> String {
    render(
        &["tree", "rr", "j", "edges"],
        r.rows
            .iter()
            .map(|row| vec![row.index.to_string(), row.rr.to_string(), row.j.to_string(), edge_list(&row.edges)]),
    )
}

pub fn bench_summary_csv(r: &BenchReport) -> String {
    render(
        &["statistic", "value"],
        [
            ("trees", r.rows.len() as f64),
            ("min_rr", r.min_rr()),
            ("median_rr", r.median_rr()),
            ("max_rr", r.max_rr()),
            ("spread_rr", r.spread()),
            ("median_j", r.median_j()),
        ]
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v.to_string()]),
    )
}
