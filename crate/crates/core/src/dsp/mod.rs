//! Frequency-domain front-end.

mod gate;
mod mel;
mod mfcc;
mod stft;

pub use gate::{spectral_gate, spectral_gate_with, GateParams};
pub use mel::{dct2_basis, hz_to_mel, mel_to_hz, MelFilterbank};
pub use mfcc::{mfcc_sequence, MfccConfig, MfccExtractor, MfccSequence, FRAMES_PER_SEGMENT, N_MFCC};
pub use stft::{
    frame_count, hann, istft, magnitude, power_spectrum, stft, Spectrogram, StftPlan,
};

/// Convenience constructor mirroring [`MelFilterbank::new`].
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32) -> crate::Result<MelFilterbank> {
    MelFilterbank::new(n_mels, n_fft, sample_rate)
}
