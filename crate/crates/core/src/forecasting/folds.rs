//! Expanding-window walk-forward partitions.

use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ForecastError;

pub const FOLDS: usize = 4;
/// Weeks needed for unscaled folds: first train, minimal validation, and
/// four minimal test blocks.
pub const MIN_UNSCALED_WEEKS: usize = 288 + 36 + 4 * 52;
const PAPER_WEEKS: f64 = 546.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub fold_id: usize,
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
    pub train_dates: (NaiveDate, NaiveDate),
    pub validation_dates: (NaiveDate, NaiveDate),
    pub test_dates: (NaiveDate, NaiveDate),
}

fn span(grid: &[NaiveDate], r: &Range<usize>) -> (NaiveDate, NaiveDate) {
    (grid[r.start], grid[r.end - 1])
}

/// Four folds anchored at the start of `grid`. Each fold's train window
/// absorbs the previous fold's train, validation and test-length step, so
/// the test blocks tile the tail of the sample.
pub fn make_folds(grid: &[NaiveDate], allow_scaling: bool) -> Result<Vec<FoldSpec>, ForecastError> {
    let n = grid.len();
    let (first_train, step, val, last_test) = if n >= MIN_UNSCALED_WEEKS {
        let slack = n - MIN_UNSCALED_WEEKS;
        let extra_test = slack.min(12);
        let rem = slack - extra_test;
        let extra_val = rem.min(4);
        (288 + rem - extra_val, 52, 36 + extra_val, 52 + extra_test)
    } else {
        if !allow_scaling {
            return Err(ForecastError::GridTooShort { got: n, need: MIN_UNSCALED_WEEKS });
        }
        let s = n as f64 / PAPER_WEEKS;
        let first = (288.0 * s).round() as usize;
        let step = ((52.0 * s).round() as usize).max(1);
        let val = ((38.0 * s).round() as usize).max(1);
        let used = first + val + (FOLDS - 1) * step;
        if first < 2 || used + step > n {
            return Err(ForecastError::GridTooShort { got: n, need: 40 });
        }
        (first, step, val, n - used)
    };
    Ok((0..FOLDS)
        .map(|k| {
            let train_end = first_train + k * step;
            let val_end = train_end + val;
            let test_len = if k + 1 == FOLDS { last_test } else { step };
            let train = 0..train_end;
            let validation = train_end..val_end;
            let test = val_end..val_end + test_len;
            FoldSpec {
                fold_id: k + 1,
                train_dates: span(grid, &train),
                validation_dates: span(grid, &validation),
                test_dates: span(grid, &test),
                train,
                validation,
                test,
            }
        })
        .collect())
}
