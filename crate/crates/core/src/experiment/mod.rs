//! Listening sessions: building and rendering trials, recording responses,
//! and exporting the response table.

mod build;
mod session;
mod store;

pub use build::{
    build_session, build_session_with_audio, draw_option_order, plan_profiles, BuildOptions,
    DEFAULT_TRIALS,
};
pub use session::{
    export_responses, read_response_csv, Choice, OptionLabels, OptionOrder, ResponseRecord,
    ResponseRow, Session, SessionManifest, SessionStatus, StimulusSet, TrialPlan,
    write_response_csv, RESPONSE_CSV_HEADER,
};
pub use store::{discover_sessions, SessionDir, MANIFEST_FILE, RESPONSE_LOG};
