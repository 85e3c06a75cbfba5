use crate::datasets::Label;
use crate::{Error, Result};

/// Threshold on the decision score that maximizes balanced accuracy on a
/// labeled validation set, with `score < threshold` classified abnormal.
///
/// Candidates are the midpoints between consecutive distinct scores. Ties in
/// balanced accuracy go to the candidate closest to zero, so the plain sign
/// rule wins whenever it is optimal. If every score is equal there is no
/// midpoint and the common score itself is returned (everything normal).
pub fn choose_threshold(scores: &[f64], labels: &[Label]) -> Result<f64> {
    Ok(best_threshold(scores, labels)?.0)
}

/// Like [`choose_threshold`], also returning the balanced accuracy reached.
pub fn best_threshold(scores: &[f64], labels: &[Label]) -> Result<(f64, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("validation score {i}")));
    }
    let pos = labels.iter().filter(|l| l.is_abnormal()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Empty(format!(
            "threshold selection needs both classes ({pos} abnormal, {neg} normal)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sweep upwards: after consuming every sample with score <= s, those are
    // exactly the ones predicted abnormal by a threshold just above s.
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best: Option<(f64, f64)> = None;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]].is_abnormal() {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        if k == order.len() {
            break;
        }
        let t = 0.5 * (s + scores[order[k]]);
        let bacc = 0.5 * (tp as f64 / pos as f64 + (neg - fp) as f64 / neg as f64);
        let better = match best {
            None => true,
            Some((bt, bb)) => bacc > bb || (bacc == bb && closer_to_zero(t, bt)),
        };
        if better {
            best = Some((t, bacc));
        }
    }
    Ok(best.unwrap_or((scores[order[0]], 0.5)))
}

/// Strictly closer to zero, with the positive side winning an exact tie.
fn closer_to_zero(t: f64, than: f64) -> bool {
    t.abs() < than.abs() || (t.abs() == than.abs() && t > than)
}
