use crate::datasets::ImageSet;
use crate::nn::AutoencoderParams;
use crate::ssim::{score_dataset, SsimConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitFlag {
    Typical,
    Atypical,
}

impl SplitFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitFlag::Typical => "typical",
            SplitFlag::Atypical => "atypical",
        }
    }
}

/// Per-sample similarity score and typical/atypical flag.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub rho: f64,
    pub scores: Vec<f64>,
    pub flags: Vec<SplitFlag>,
}

impl SplitAssignment {
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    fn indices(&self, flag: SplitFlag) -> Vec<usize> {
        (0..self.flags.len()).filter(|&i| self.flags[i] == flag).collect()
    }

    /// Typical sample indices in dataset order.
    pub fn typical(&self) -> Vec<usize> {
        self.indices(SplitFlag::Typical)
    }

    pub fn atypical(&self) -> Vec<usize> {
        self.indices(SplitFlag::Atypical)
    }

    /// Sample indices from lowest to highest score (ties by index).
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]).then(a.cmp(&b)));
        order
    }

    /// `index,score,flag` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,score,flag\n");
        for (i, (score, flag)) in self.scores.iter().zip(&self.flags).enumerate() {
            s.push_str(&format!("{i},{score},{}\n", flag.as_str()));
        }
        s
    }
}

/// Flag the `round(rho% · N)` lowest-scoring samples as atypical. Equal scores
/// are ordered by dataset index.
pub fn split_from_scores(scores: Vec<f64>, rho: f64) -> Result<SplitAssignment> {
    if !(0.0..=100.0).contains(&rho) {
        return Err(Error::Config(format!("rho {rho} outside [0, 100]")));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("similarity score of sample {i}")));
    }
    let n_atypical = (rho / 100.0 * scores.len() as f64).round() as usize;
    let mut assignment = SplitAssignment {
        rho,
        flags: vec![SplitFlag::Typical; scores.len()],
        scores,
    };
    for i in assignment.ranking().into_iter().take(n_atypical) {
        assignment.flags[i] = SplitFlag::Atypical;
    }
    Ok(assignment)
}

/// Score every training sample by SSIM against its reconstruction and split.
pub fn split(params: &AutoencoderParams, train: &ImageSet, rho: f64, ssim: &SsimConfig) -> Result<SplitAssignment> {
    if !(0.0..=100.0).contains(&rho) {
        return Err(Error::Config(format!("rho {rho} outside [0, 100]")));
    }
    split_from_scores(score_dataset(params, train, ssim)?, rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_scores() {
        let scores: Vec<f64> = (1..=10).map(|i| f64::from(i) / 10.0).rev().collect();
        let a = split_from_scores(scores, 20.0).unwrap();
        let aty: Vec<f64> = a.atypical().iter().map(|&i| a.scores[i]).collect();
        assert_eq!(aty, vec![0.2, 0.1]);
        assert_eq!(a.atypical(), vec![8, 9]);
    }

    #[test]
    fn counts_follow_rounding() {
        let scores: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        assert_eq!(split_from_scores(scores.clone(), 10.0).unwrap().atypical().len(), 10);
        assert_eq!(split_from_scores(scores.clone(), 0.0).unwrap().atypical().len(), 0);
        assert_eq!(split_from_scores(scores[..15].to_vec(), 10.0).unwrap().atypical().len(), 2);
        assert_eq!(split_from_scores(scores, 100.0).unwrap().typical().len(), 0);
    }

    #[test]
    fn ties_broken_by_index() {
        let a = split_from_scores(vec![0.5, 0.2, 0.2, 0.2, 0.9], 40.0).unwrap();
        assert_eq!(a.atypical(), vec![1, 2]);
    }

    #[test]
    fn rho_out_of_range() {
        assert!(split_from_scores(vec![0.1], 101.0).is_err());
        assert!(split_from_scores(vec![0.1], -1.0).is_err());
    }

    #[test]
    fn csv_export() {
        let a = split_from_scores(vec![0.5, 0.25], 50.0).unwrap();
        assert_eq!(a.to_csv(), "index,score,flag\n0,0.5,typical\n1,0.25,atypical\n");
    }
}
