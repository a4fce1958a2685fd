//! Overlap refinement for type II to IV prototypes.
//!
//! Characters detected around a prototype box are split into the main text
//! line and the overlapping group using the vertical spread of character
//! centers near the prototype's anchor column. A prototype with no vertical
//! spread there, or whose two rows never overlap horizontally, is a false
//! positive. Otherwise the final box covers the overlap group and the main
//! characters underneath it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{geometric_center, horizontal_overlap, median, BBox};

/// Which prototype column the center window is anchored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowAnchor {
    /// The prototype's left edge.
    #[default]
    LeftEdge,
    /// The prototype's horizontal center.
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapParams {
    /// Half-width of the center window around the anchor column.
    pub gamma: f64,
    /// Vertical spread at or below which the prototype is a false positive.
    pub alpha: f64,
    /// Largest gap allowed between consecutive overlap characters.
    pub beta: f64,
    pub anchor: WindowAnchor,
}

impl OverlapParams {
    /// Character-relative defaults: gamma is half the median width, alpha
    /// half the median height, beta the median width.
    pub fn from_chars(chars: &[BBox]) -> Option<Self> {
        let mut widths: Vec<f64> = chars.iter().map(|c| f64::from(c.w)).collect();
        let mut heights: Vec<f64> = chars.iter().map(|c| f64::from(c.h)).collect();
        let mw = median(&mut widths)?;
        let mh = median(&mut heights)?;
        Some(Self {
            gamma: mw / 2.0,
            alpha: mh / 2.0,
            beta: mw,
            anchor: WindowAnchor::LeftEdge,
        })
    }
}

/// Optional overrides on top of [`OverlapParams::from_chars`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlapConfig {
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub anchor: WindowAnchor,
}

impl OverlapConfig {
    pub fn resolve(&self, chars: &[BBox]) -> Option<OverlapParams> {
        let base = OverlapParams::from_chars(chars)?;
        Some(OverlapParams {
            gamma: self.gamma.unwrap_or(base.gamma),
            alpha: self.alpha.unwrap_or(base.alpha),
            beta: self.beta.unwrap_or(base.beta),
            anchor: self.anchor,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FalsePositive,
    Refined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FalsePositiveReason {
    /// Centers in the window do not spread vertically beyond alpha.
    FlatWindow,
    /// The two rows never overlap horizontally.
    NoOverlap,
    /// Pruning left an overlap group that no longer covers the main row.
    OverlapLostAfterPruning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRefinement {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<FalsePositiveReason>,
    pub final_box: Option<BBox>,
    pub q_main: Vec<BBox>,
    pub q_ov: Vec<BBox>,
}

impl OverlapRefinement {
    fn false_positive(reason: FalsePositiveReason) -> Self {
        Self {
            verdict: Verdict::FalsePositive,
            reason: Some(reason),
            final_box: None,
            q_main: Vec::new(),
            q_ov: Vec::new(),
        }
    }
}

/// Assign each character to the queue of the nearer vertical extreme; ties go to `q1` (`y_max`).
pub fn partition_queues(chars: &[BBox], y_max: f64, y_min: f64) -> (Vec<BBox>, Vec<BBox>) {
    chars.iter().partition(|c| {
        let cy = geometric_center(c).py;
        (y_max - cy).abs() <= (cy - y_min).abs()
    })
}

/// Sort by `x` and keep the longest run whose consecutive gaps are at most
/// `beta`. Equal-length runs are resolved by distance to `anchor_x`, then
/// by position.
pub fn prune_discontinuous(queue: &[BBox], beta: f64, anchor_x: f64) -> Vec<BBox> {
    let mut sorted = queue.to_vec();
    sorted.sort_by_key(|b| (b.x, b.y, b.w, b.h));
    if sorted.len() <= 1 {
        return sorted;
    }
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..sorted.len() {
        let gap = i64::from(sorted[i].x) - i64::from(sorted[i - 1].right());
        if gap as f64 > beta {
            runs.push((start, i));
            start = i;
        }
    }
    runs.push((start, sorted.len()));

    let distance = |&(a, b): &(usize, usize)| {
        let span = BBox::union_all(&sorted[a..b]).expect("non-empty run");
        (geometric_center(&span).px - anchor_x).abs()
    };
    let best = runs
        .iter()
        .copied()
        .reduce(|best, run| {
            let (lb, lr) = (best.1 - best.0, run.1 - run.0);
            if lr > lb || (lr == lb && distance(&run) < distance(&best)) {
                run
            } else {
                best
            }
        })
        .expect("at least one run");
    sorted[best.0..best.1].to_vec()
}

/// Union of the overlap group and the main characters under its span.
pub fn final_box(q_main: &[BBox], q_ov: &[BBox]) -> Result<BBox> {
    let span = BBox::union_all(q_ov).ok_or(Error::NoHorizontalOverlap)?;
    let covered: Vec<&BBox> = q_main
        .iter()
        .filter(|m| horizontal_overlap(m, &span) > 0)
        .collect();
    if covered.is_empty() {
        return Err(Error::NoHorizontalOverlap);
    }
    Ok(covered.into_iter().fold(span, |acc, m| acc.union(m)))
}

fn any_horizontal_overlap(a: &[BBox], b: &[BBox]) -> bool {
    a.iter()
        .any(|p| b.iter().any(|q| horizontal_overlap(p, q) > 0))
}

/// Refine one overlap prototype against the characters detected in its area.
pub fn refine_overlap(
    proto: &BBox,
    chars: &[BBox],
    params: &OverlapParams,
) -> Result<OverlapRefinement> {
    let proto_center = geometric_center(proto);
    let anchor = match params.anchor {
        WindowAnchor::LeftEdge => f64::from(proto.x),
        WindowAnchor::Center => proto_center.px,
    };
    let (lo, hi) = (anchor - params.gamma, anchor + params.gamma);
    let window: Vec<f64> = chars
        .iter()
        .map(geometric_center)
        .filter(|c| lo <= c.px && c.px <= hi)
        .map(|c| c.py)
        .collect();
    if window.is_empty() {
        return Err(Error::NoCenterInWindow);
    }
    let y_max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y_min = window.iter().copied().fold(f64::INFINITY, f64::min);
    if y_max - y_min <= params.alpha {
        return Ok(OverlapRefinement::false_positive(FalsePositiveReason::FlatWindow));
    }

    let (q1, q2) = partition_queues(chars, y_max, y_min);
    if !any_horizontal_overlap(&q1, &q2) {
        return Ok(OverlapRefinement::false_positive(FalsePositiveReason::NoOverlap));
    }
    // equal lengths take the second queue as the main line
    let (q_main, rest) = if q1.len() > q2.len() { (q1, q2) } else { (q2, q1) };
    let q_ov = prune_discontinuous(&rest, params.beta, proto_center.px);

    match final_box(&q_main, &q_ov) {
        Ok(b) => Ok(OverlapRefinement {
            verdict: Verdict::Refined,
            reason: None,
            final_box: Some(b),
            q_main,
            q_ov,
        }),
        Err(Error::NoHorizontalOverlap) => Ok(OverlapRefinement::false_positive(
            FalsePositiveReason::OverlapLostAfterPruning,
        )),
        Err(e) => Err(e),
    }
}

/// Keep only characters whose center lies inside `area`.
pub fn filter_center_in(area: &BBox, chars: &[BBox]) -> Vec<BBox> {
    chars
        .iter()
        .filter(|c| {
            let p = geometric_center(c);
            p.px >= f64::from(area.x)
                && p.px < f64::from(area.right())
                && p.py >= f64::from(area.y)
                && p.py < f64::from(area.bottom())
        })
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: u32, y: u32, w: u32, h: u32) -> BBox {
        BBox::new(x, y, w, h)
    }

    /// Five main characters over x in [0, 250] centered at y = 50, two upper
    /// characters centered at y = 15 over characters 2 and 3.
    fn stacked_scene() -> (BBox, Vec<BBox>) {
        let mut chars: Vec<BBox> = (0..5).map(|i| b(i * 50, 40, 50, 20)).collect();
        chars.push(b(55, 5, 40, 20));
        chars.push(b(105, 5, 40, 20));
        (b(50, 0, 100, 70), chars)
    }

    fn params(chars: &[BBox]) -> OverlapParams {
        OverlapParams::from_chars(chars).unwrap()
    }

    #[test]
    fn flat_row_is_false_positive() {
        let chars: Vec<BBox> = (0..5).map(|i| b(i * 30, 40, 25, 20)).collect();
        let out = refine_overlap(&b(30, 30, 60, 40), &chars, &params(&chars)).unwrap();
        assert_eq!(out.verdict, Verdict::FalsePositive);
        assert_eq!(out.reason, Some(FalsePositiveReason::FlatWindow));
    }

    #[test]
    fn disjoint_rows_are_false_positive() {
        // upper row sits entirely right of the lower row
        let chars = vec![
            b(0, 60, 20, 20),
            b(22, 60, 20, 20),
            b(44, 60, 20, 20),
            b(64, 10, 20, 20),
            b(86, 10, 20, 20),
        ];
        let out = refine_overlap(&b(64, 10, 40, 70), &chars, &params(&chars)).unwrap();
        assert_eq!(out.verdict, Verdict::FalsePositive);
        assert_eq!(out.reason, Some(FalsePositiveReason::NoOverlap));
    }

    #[test]
    fn stacked_scene_is_refined() {
        let (proto, chars) = stacked_scene();
        let out = refine_overlap(&proto, &chars, &params(&chars)).unwrap();
        assert_eq!(out.verdict, Verdict::Refined);
        assert_eq!(out.q_ov, vec![b(55, 5, 40, 20), b(105, 5, 40, 20)]);
        assert_eq!(out.q_main.len(), 5);
        assert_eq!(out.final_box, Some(b(50, 5, 100, 55)));
    }

    #[test]
    fn no_center_in_window() {
        let chars = vec![b(200, 0, 10, 10), b(220, 0, 10, 10)];
        assert!(matches!(
            refine_overlap(&b(0, 0, 50, 50), &chars, &params(&chars)),
            Err(Error::NoCenterInWindow)
        ));
        assert!(matches!(
            refine_overlap(&b(0, 0, 50, 50), &[], &OverlapParams { gamma: 1.0, alpha: 1.0, beta: 1.0, anchor: WindowAnchor::LeftEdge }),
            Err(Error::NoCenterInWindow)
        ));
    }

    #[test]
    fn center_anchor_switch() {
        let (proto, chars) = stacked_scene();
        let p = OverlapParams { anchor: WindowAnchor::Center, ..params(&chars) };
        // window [75, 125] around the center column holds both rows
        let out = refine_overlap(&proto, &chars, &p).unwrap();
        assert_eq!(out.verdict, Verdict::Refined);
    }

    #[test]
    fn partition_examples() {
        let mid = b(0, 45, 10, 10); // center 50, midpoint of 10 and 90
        let (q1, q2) = partition_queues(&[mid], 90.0, 10.0);
        assert_eq!((q1.len(), q2.len()), (1, 0));

        let lo = b(0, 5, 10, 10);
        let hi = b(20, 85, 10, 10);
        let (q1, q2) = partition_queues(&[lo, hi], 90.0, 10.0);
        assert_eq!(q1, vec![hi]);
        assert_eq!(q2, vec![lo]);

        let (q1, q2) = partition_queues(&[lo, hi], 30.0, 30.0);
        assert_eq!(q1.len(), 2);
        assert!(q2.is_empty());
    }

    #[test]
    fn prune_examples() {
        // gaps 2, 3, 50, 2
        let q = vec![b(0, 0, 10, 5), b(12, 0, 10, 5), b(25, 0, 10, 5), b(85, 0, 10, 5), b(97, 0, 10, 5)];
        assert_eq!(prune_discontinuous(&q, 10.0, 0.0), q[..3].to_vec());
        assert_eq!(prune_discontinuous(&q[..1], 10.0, 0.0), q[..1].to_vec());
        assert_eq!(prune_discontinuous(&q, 100.0, 0.0), q);
        assert!(prune_discontinuous(&[], 1.0, 0.0).is_empty());
        // equal runs: nearest to the anchor wins
        let two = vec![b(0, 0, 10, 5), b(100, 0, 10, 5)];
        assert_eq!(prune_discontinuous(&two, 5.0, 90.0), vec![two[1]]);
        assert_eq!(prune_discontinuous(&two, 5.0, 10.0), vec![two[0]]);
    }

    #[test]
    fn final_box_examples() {
        let one = b(10, 10, 20, 20);
        assert_eq!(final_box(&[one], &[one]).unwrap(), one);

        let main: Vec<BBox> = (0..5).map(|i| b(i * 50, 40, 50, 20)).collect();
        let ov = vec![b(55, 5, 40, 20), b(105, 5, 40, 20)];
        assert_eq!(final_box(&main, &ov).unwrap(), b(50, 5, 100, 55));

        let wide = vec![b(0, 0, 300, 20)];
        assert_eq!(final_box(&main, &wide).unwrap(), b(0, 0, 300, 60));

        assert!(matches!(final_box(&main, &[b(400, 0, 5, 5)]), Err(Error::NoHorizontalOverlap)));
        assert!(matches!(final_box(&main, &[]), Err(Error::NoHorizontalOverlap)));
    }

    #[test]
    fn default_params_from_medians() {
        let chars = vec![b(0, 0, 10, 20), b(0, 0, 20, 30), b(0, 0, 30, 40)];
        let p = params(&chars);
        assert_eq!((p.gamma, p.alpha, p.beta), (10.0, 15.0, 20.0));
        assert!(OverlapParams::from_chars(&[]).is_none());
    }

    #[test]
    fn center_in_filter() {
        let area = b(0, 0, 50, 50);
        let kept = filter_center_in(&area, &[b(40, 40, 8, 8), b(45, 45, 20, 20)]);
        assert_eq!(kept, vec![b(40, 40, 8, 8)]);
    }
}
