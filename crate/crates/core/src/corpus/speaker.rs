//! Speaker identity attributes: one-hot vectors over K speakers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal gender bucket used for report aggregation.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

/// One-hot speaker identity.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerAttribute {
    pub index: usize,
    pub k: usize,
}

impl SpeakerAttribute {
    pub fn new(index: usize, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 speakers, got {k}"
            )));
        }
        if index >= k {
            return Err(Error::InvalidArgument(format!(
                "speaker index {index} out of range for {k} speakers"
            )));
        }
        Ok(SpeakerAttribute { index, k })
    }

    /// The length-K one-hot vector.
    pub fn onehot(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.k];
        v[self.index] = 1.0;
        v
    }
}

/// Build a one-hot speaker attribute vector.
pub fn speaker_onehot(index: usize, k: usize) -> Result<Vec<f64>> {
    Ok(SpeakerAttribute::new(index, k)?.onehot())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn onehot_definitions() {
        assert_eq!(
            speaker_onehot(3, 8).unwrap(),
            vec![0., 0., 0., 1., 0., 0., 0., 0.]
        );
        assert_eq!(speaker_onehot(0, 2).unwrap(), vec![1., 0.]);
    }

    #[test]
    fn out_of_range_is_error() {
        assert!(speaker_onehot(8, 8).is_err());
        assert!(speaker_onehot(0, 1).is_err());
    }

    #[test]
    fn onehot_sums_to_one() {
        for k in 2..10 {
            for i in 0..k {
                let v = speaker_onehot(i, k).unwrap();
                assert_eq!(v.iter().sum::<f64>(), 1.0);
                assert_eq!(v.iter().cloned().fold(0.0, f64::max), 1.0);
            }
        }
    }
}
