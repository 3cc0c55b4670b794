//! Periodic excitation, DFT on processed lines and noise estimation.

mod dft;
mod io;
mod multisine;
mod noise;
mod record;

pub use dft::{dft_lines, differentiate_periodic, estimate_frf, Averaging, SpectrumRecord};
pub(crate) use dft::validate_lines;
pub use io::{read_dataset, write_dataset, ChannelRole, DataFormat, Dataset};
pub use multisine::{generate_multisine, multisine_from_phases, MultisineSpec};
pub use noise::{add_white_noise, estimate_noise_variance, NoiseModel};
pub use record::{rms, trim_transient, SignalRecord};
