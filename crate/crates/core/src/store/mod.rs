//! Session persistence, effort analytics and exhibit cards.

mod analytics;
mod exhibit;
mod fixture;
mod log;
mod model;

pub use analytics::{compute_summary, participant_totals, summary_tsv, MeanSd, TaskSummary};
pub use exhibit::{export_exhibit_card, read_exhibit_data, ExhibitData};
pub use fixture::{
    bundled_pilot_logs_path, load_pilot_logs, parse_pilot_logs, replay_pilot_logs, PilotRow, ThemeCounts,
};
pub use log::{SessionStore, StoreState, LOG_FILE};
pub use model::{CreationId, CreationRecord, IterationEntry, OutcomeSummary, Session, StoreError};
