//! Blinded expert review: stratified samples drawn from model/label
//! disagreements, append-only rating sessions, the HTTP API raters use, and
//! the agreement report built from completed sessions.

mod api;
mod report;
mod sample;
mod session;

pub use api::{router, serve, ApiError, CreateSession, ReportQuery, SessionView, SubmitRating};
pub use report::{
    agreement_bundle, combined_matrix, fleiss_rows, session_report, FleissRow, KappaMatrix, PairwiseMatrix, RaterGroup, RaterKind, ReportContext,
    ReportOptions, SessionReport, SessionSummary, TabularAgreementRow, TABULAR,
};
pub use sample::{
    build_sample, disagreement_pool, largest_remainder, ItemStratum, PoolItem, ReviewItem, ReviewSample, SampleView, DEFAULT_SAMPLE_SIZE,
};
pub use session::{Ack, Answer, Clock, NextItem, RatingEntry, ReviewStore, SessionState, SessionStatus};
