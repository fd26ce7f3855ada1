//! STFT analysis/synthesis, WAV I/O and input feature normalization.

mod activity;
mod normalize;
mod stft;
mod wav;

pub use activity::{frame_activity, frame_energies, ACTIVITY_THRESHOLD_DB};
pub use normalize::{laplace_normalize, LAPLACE_EPS};
pub use stft::{hann, istft, one_sided_weights, stft, Spectrogram, StftConfig, StftEngine, Waveform};
pub use wav::{read_wav, write_wav, WavFormat};
