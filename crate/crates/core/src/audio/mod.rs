//! Audio primitives shared by every stage: sample buffers, WAV I/O, tone
//! synthesis, amplitude-normalized spectra and zero-phase IIR filtering.

mod buffer;
pub mod fft;
pub mod filter;
mod tone;
pub mod wav;

pub use buffer::SampleBuffer;
pub use fft::{fft_magnitude, Spectrum, Window};
pub use filter::{
    apply_filter_zero_phase, design_filter, Biquad, DesignFamily, FilterKind, FilterSpec, SosFilter,
};
pub use tone::{synth_tone, Tone, DEFAULT_FADE_S};
pub use wav::{load_wav, save_wav, WavEncoding};

/// Default processing rate when nothing else is specified.
pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;
