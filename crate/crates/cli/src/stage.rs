//! Stage names and their dependency graph.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Classify,
    Index,
    Stats,
    Granger,
    Vmd,
    Forecast,
    Explain,
    Report,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Classify,
        Stage::Index,
        Stage::Stats,
        Stage::Granger,
        Stage::Vmd,
        Stage::Forecast,
        Stage::Explain,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Classify => "classify",
            Stage::Index => "index",
            Stage::Stats => "stats",
            Stage::Granger => "granger",
            Stage::Vmd => "vmd",
            Stage::Forecast => "forecast",
            Stage::Explain => "explain",
            Stage::Report => "report",
        }
    }

    /// Stages whose artifacts this stage reads.
    pub fn depends_on(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Ingest => &[],
            Classify => &[Ingest],
            Index => &[Ingest, Classify],
            Stats => &[Ingest, Index],
            Granger | Vmd | Forecast => &[Stats],
            Explain => &[Index, Stats, Forecast],
            Report => &[Ingest, Classify, Index, Stats, Granger, Vmd, Forecast, Explain],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| format!("unknown stage {s:?}; expected one of {}", Stage::ALL.map(|s| s.name()).join(", ")))
    }
}

/// Parses a comma-separated stage list into execution order without
/// duplicates.
pub fn parse_stage_list(s: &str) -> Result<Vec<Stage>, String> {
    let mut out: Vec<Stage> = s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err("empty stage list".into());
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dependencies_point_backwards() {
        for s in Stage::ALL {
            assert!(s.depends_on().iter().all(|d| *d < s), "{s}");
        }
    }

    #[test]
    fn stage_list_sorted_and_deduplicated() {
        assert_eq!(parse_stage_list("report,ingest,report").unwrap(), vec![Stage::Ingest, Stage::Report]);
        assert!(parse_stage_list("ingest,bogus").is_err());
        assert!(parse_stage_list(",").is_err());
    }
}
