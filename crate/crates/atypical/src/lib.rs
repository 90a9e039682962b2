//! Map files, reports, parallel fan-out and the command line for the
//! `atypical-core` analyses.

pub mod cli;
pub mod corpus;
pub mod mapfile;
pub mod parallel;
pub mod report;
pub mod suites;
