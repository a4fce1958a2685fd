//! Greedy IoU matching and the per-class / pooled report table.
//!
//! cargo run --example evaluation

use std::collections::BTreeSet;

use abtext::detection::PrototypeClass::{TypeI, TypeII};
use abtext::eval::{evaluate_records, match_detections, metrics, render_table, ImageRecord};
use abtext::geometry::BBox;

fn main() -> abtext::Result<()> {
    let gts = [BBox::new(0, 0, 40, 20), BBox::new(60, 0, 40, 20)];
    let preds = [
        (BBox::new(2, 0, 40, 20), 0.9),
        (BBox::new(70, 0, 40, 20), 0.8),
        (BBox::new(200, 0, 10, 10), 0.4),
    ];
    for t in [0.5, 0.75] {
        let m = match_detections(&preds, &gts, t);
        let s = metrics(&m);
        println!(
            "IoU {t}: tp={} fp={} fn={} P={:.3} R={:.3} F1={:.3}",
            m.tp, m.fp, m.fn_, s.precision, s.recall, s.f1
        );
    }

    let gt = vec![
        ImageRecord {
            image: "a".into(),
            boxes: vec![gts[0], gts[1]],
            classes: vec![TypeI, TypeII],
            scores: None,
        },
        ImageRecord {
            image: "b".into(),
            boxes: vec![BBox::new(10, 10, 30, 30)],
            classes: vec![TypeII],
            scores: None,
        },
    ];
    let pred = vec![ImageRecord {
        image: "a".into(),
        boxes: preds.iter().map(|p| p.0).collect(),
        classes: vec![TypeI, TypeII, TypeII],
        scores: Some(preds.iter().map(|p| p.1).collect()),
    }];
    let reports = evaluate_records(&pred, &gt, &[0.5, 0.75], &BTreeSet::new())?;
    print!("{}", render_table(&reports));
    Ok(())
}
