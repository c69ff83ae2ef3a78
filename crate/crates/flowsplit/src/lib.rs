//! File formats, rendering and the command line around [`flowsplit_core`].
//!
//! * [`flo`]: Middlebury `.flo` flow files.
//! * [`sequence`]: grayscale PGM/PNG frame sequences.
//! * [`render`]: color-wheel and magnitude images of a flow slice.
//! * [`report`]: manifests, CSV reports, atomic writes.
//! * [`verify`]: the self-checks behind `flowsplit verify`.

pub mod error;
pub mod flo;
pub mod render;
pub mod report;
pub mod sequence;
pub mod verify;

pub use error::{Error, Result};
pub use flo::{read_flo, write_flo, FlowSlice};
pub use render::{mask_common, render_color, render_magnitude};
pub use sequence::{read_sequence, write_sequence};

pub use flowsplit_core as core;
