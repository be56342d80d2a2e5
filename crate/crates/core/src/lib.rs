//! Scoring, inference and reporting for standardized UX survey KPIs.
//!
//! The crate turns raw survey exports into canonical responses ([`ingest`]),
//! scores the UX-Lite, UEQ-S, PSAT and NPS instruments ([`survey`]), attaches
//! confidence intervals and significance tests ([`inference`]), aggregates
//! quarter-bucketed KPI series ([`analytics`]), renders periodic reports
//! ([`report`]) and runs sampling experiments ([`simulate`]).

pub mod analytics;
pub mod config;
pub mod inference;
pub mod ingest;
pub mod report;
pub mod simulate;
pub mod survey;
