//! Task playback with an embedded probe tone: the task audio is band-stopped
//! around the probe frequency and the probe is inserted into the vacated band.

mod embed;
pub mod fixtures;
mod manifest;
mod session;

pub use embed::{
    embed_stimulus, embed_with, verify_notch, verify_notch_with, EmbedConfig, EmbeddedPlayback,
    NotchReport,
};
pub use manifest::{ManifestSegment, SessionManifest, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION};
pub use session::{
    build_session, render_session, Segment, SessionPlan, SessionTiming, TaskSpec,
    DEFAULT_FREQUENCIES,
};
