pub mod analyze;
pub mod eeg;
pub mod extract;
pub mod report;
pub mod simulate;
pub mod synth;

use std::path::Path;

use earload_core::audio::WavEncoding;
use earload_core::stimulus::{SessionManifest, MANIFEST_FILE};

use crate::exit::{fail, MISSING_INPUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Encoding {
    Pcm16,
    Pcm24,
    Float32,
}

impl From<Encoding> for WavEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Pcm16 => WavEncoding::Pcm16,
            Encoding::Pcm24 => WavEncoding::Pcm24,
            Encoding::Float32 => WavEncoding::Float32,
        }
    }
}

/// Load `dir/manifest.json`, exiting 3 when it is absent.
pub fn load_manifest(dir: &Path) -> anyhow::Result<SessionManifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(fail(
            MISSING_INPUT,
            format!("missing manifest: {}", path.display()),
        ));
    }
    Ok(SessionManifest::load(&path)?)
}

pub fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(fail(
            MISSING_INPUT,
            format!("missing {what}: {}", path.display()),
        ))
    }
}
