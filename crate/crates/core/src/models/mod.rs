//! Network definitions: speech enhancer, conversion autoencoder,
//! discriminator, and speaker classifier, each at two size profiles.

pub mod adversary;
pub mod autovc;
pub mod se;

pub use adversary::{
    add_classifier_params, add_discriminator_params, classify, discriminate, discriminate_score,
    CLASSIFIER_MIN_FRAMES, DISCRIMINATOR_MIN_FRAMES,
};
pub use autovc::{add_autovc_params, autovc_forward, decode, encode, generator_forward};
pub use se::{add_se_params, se_forward, se_loss};

use serde::{Deserialize, Serialize};

/// Layer widths for every network. `paper` records the published sizes;
/// `tiny` (conv 16, recurrent 8) is the profile all tests and desk training
/// run at.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelProfile {
    /// Conv channel width for the encoder and post-net stacks.
    pub conv: usize,
    /// Cells per direction in each speech-enhancer BLSTM layer.
    pub se_cells: usize,
    /// Cells per direction in each encoder BLSTM layer; content dim = 2x this.
    pub enc_lstm: usize,
    /// Decoder LSTM stack widths.
    pub dec_lstm: [usize; 3],
    /// Discriminator conv channels per layer.
    pub disc_ch: [usize; 5],
    /// Classifier conv channels for the first four layers (the fifth equals
    /// the speaker count).
    pub cls_ch: [usize; 4],
}

impl ModelProfile {
    pub fn paper() -> Self {
        ModelProfile {
            conv: 512,
            se_cells: 160,
            enc_lstm: 512,
            dec_lstm: [512, 1024, 1024],
            disc_ch: [32, 32, 32, 32, 40],
            cls_ch: [8, 16, 32, 16],
        }
    }

    pub fn tiny() -> Self {
        ModelProfile {
            conv: 16,
            se_cells: 8,
            enc_lstm: 8,
            dec_lstm: [8, 8, 8],
            disc_ch: [16, 16, 16, 16, 16],
            cls_ch: [16, 16, 16, 16],
        }
    }

    /// Dimension of the content code (forward + backward encoder streams).
    pub fn content_dim(&self) -> usize {
        2 * self.enc_lstm
    }
}
