//! Objective evaluation: mel-cepstra, DTW-aligned MCD, variant reports, and
//! spectrogram image export.

pub mod cepstra;
pub mod mcd;
pub mod plot;
pub mod report;

pub use cepstra::{dct_matrix, mel_cepstra, MelCepstra, CEPSTRUM_ORDER};
pub use mcd::{dtw_align, dtw_cost, mcd};
pub use plot::{colormap, export_panels, export_spectrogram, render_heatmap_cells};
pub use report::{
    direction_label, evaluate_noisy_baseline, evaluate_variant, render_comparison, EvalReport,
    PairResult, PUBLISHED_AVG_MCD_DB,
};
