//! Federated versus centralized at-risk student prediction.
//!
//! The pipeline turns the five OULAD tables (or a synthetic corpus of the
//! same shape) into a labeled feature matrix, splits and standardizes it,
//! and trains logistic regression and a 32-16-1 MLP either on pooled data or
//! with FedAvg across per-module institutions, evaluating every model on one
//! held-out test set.

pub mod balance;
pub mod dataset;
pub mod experiment;
pub mod federation;
pub mod metrics;
pub mod models;
pub mod preprocess;
pub mod seed;
