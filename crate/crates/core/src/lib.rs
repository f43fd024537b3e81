#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod baseline;
pub mod causality;
pub mod dist;
pub mod explain;
pub mod forecasting;
pub mod linalg;
pub mod messages;
pub mod nelder_mead;
pub mod rng;
pub mod series;
pub mod stat_tests;
pub mod vmd;
