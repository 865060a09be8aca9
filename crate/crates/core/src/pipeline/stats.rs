use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::registry::{Ga, Gav};

/// Processing stages in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    QueryResults,
    Consolidated,
    ValidPom,
    NoDependency,
    SourcesAcquired,
    ClonesDetected,
    PovCompilable,
    PovTestable,
    VulnerabilityConfirmed,
    Shaded,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::QueryResults,
        Stage::Consolidated,
        Stage::ValidPom,
        Stage::NoDependency,
        Stage::SourcesAcquired,
        Stage::ClonesDetected,
        Stage::PovCompilable,
        Stage::PovTestable,
        Stage::VulnerabilityConfirmed,
        Stage::Shaded,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Stage::QueryResults => "query results",
            Stage::Consolidated => "consolidated",
            Stage::ValidPom => "valid pom",
            Stage::NoDependency => "no dependency",
            Stage::SourcesAcquired => "sources acquired",
            Stage::ClonesDetected => "clones detected",
            Stage::PovCompilable => "pov compilable",
            Stage::PovTestable => "pov testable",
            Stage::VulnerabilityConfirmed => "vulnerability confirmed",
            Stage::Shaded => "shaded",
        }
    }

    /// Stages that need a POV project.
    pub fn needs_pov(self) -> bool {
        self >= Stage::PovCompilable
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.header())
    }
}

/// Counts after each stage. POV stages are `None` when no POV was given.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub query_results: usize,
    pub consolidated: usize,
    pub valid_pom: usize,
    pub no_dependency: usize,
    pub sources_acquired: usize,
    pub clones_detected: usize,
    pub pov_compilable: Option<usize>,
    pub pov_testable: Option<usize>,
    pub vulnerability_confirmed: Option<usize>,
    pub shaded: Option<usize>,
}

impl StageStats {
    pub fn get(&self, stage: Stage) -> Option<usize> {
        match stage {
            Stage::QueryResults => Some(self.query_results),
            Stage::Consolidated => Some(self.consolidated),
            Stage::ValidPom => Some(self.valid_pom),
            Stage::NoDependency => Some(self.no_dependency),
            Stage::SourcesAcquired => Some(self.sources_acquired),
            Stage::ClonesDetected => Some(self.clones_detected),
            Stage::PovCompilable => self.pov_compilable,
            Stage::PovTestable => self.pov_testable,
            Stage::VulnerabilityConfirmed => self.vulnerability_confirmed,
            Stage::Shaded => self.shaded,
        }
    }

    fn set(&mut self, stage: Stage, value: usize) {
        match stage {
            Stage::QueryResults => self.query_results = value,
            Stage::Consolidated => self.consolidated = value,
            Stage::ValidPom => self.valid_pom = value,
            Stage::NoDependency => self.no_dependency = value,
            Stage::SourcesAcquired => self.sources_acquired = value,
            Stage::ClonesDetected => self.clones_detected = value,
            Stage::PovCompilable => self.pov_compilable = Some(value),
            Stage::PovTestable => self.pov_testable = Some(value),
            Stage::VulnerabilityConfirmed => self.vulnerability_confirmed = Some(value),
            Stage::Shaded => self.shaded = Some(value),
        }
    }

    /// Values in column order.
    pub fn values(&self) -> [Option<usize>; 10] {
        Stage::ALL.map(|s| self.get(s))
    }

    /// Each count is at most its predecessor's; `shaded` is compared with
    /// `vulnerability confirmed`.
    pub fn is_monotone(&self) -> bool {
        let values = self.values();
        values.windows(2).all(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => b <= a,
            (_, None) => true,
            (None, Some(_)) => false,
        })
    }

    /// Counts from the sets of artifacts surviving each stage.
    pub fn from_survivors(survivors: &BTreeMap<Stage, BTreeSet<Gav>>, with_pov: bool) -> Self {
        Self::count(survivors, with_pov, |set| set.len())
    }

    /// Counts of distinct group/artifact pairs surviving each stage.
    pub fn from_survivors_by_ga(survivors: &BTreeMap<Stage, BTreeSet<Gav>>, with_pov: bool) -> Self {
        Self::count(survivors, with_pov, |set| set.iter().map(Gav::ga).collect::<BTreeSet<Ga>>().len())
    }

    fn count(
        survivors: &BTreeMap<Stage, BTreeSet<Gav>>,
        with_pov: bool,
        measure: impl Fn(&BTreeSet<Gav>) -> usize,
    ) -> Self {
        let mut stats = Self::default();
        for stage in Stage::ALL {
            if stage.needs_pov() && !with_pov {
                continue;
            }
            stats.set(stage, survivors.get(&stage).map_or(0, &measure));
        }
        stats
    }
}

/// Artifacts found in at least `threshold` distinct per-class result sets.
pub fn consolidate(match_sets: &[(String, Vec<Gav>)], threshold: usize) -> BTreeSet<Gav> {
    assert!(threshold >= 1, "consolidation threshold must be positive");
    let mut classes_per_gav: BTreeMap<&Gav, BTreeSet<&str>> = BTreeMap::new();
    for (class, gavs) in match_sets {
        for gav in gavs {
            classes_per_gav.entry(gav).or_default().insert(class);
        }
    }
    classes_per_gav
        .into_iter()
        .filter(|(_, classes)| classes.len() >= threshold)
        .map(|(gav, _)| gav.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaCount {
    pub ga: Ga,
    pub versions: usize,
}

/// Groups artifacts by group and artifact id, counting versions.
pub fn aggregate_by_ga<'a>(gavs: impl IntoIterator<Item = &'a Gav>) -> Vec<GaCount> {
    let mut counts: BTreeMap<Ga, BTreeSet<&str>> = BTreeMap::new();
    for gav in gavs {
        counts.entry(gav.ga()).or_default().insert(gav.version());
    }
    counts
        .into_iter()
        .map(|(ga, versions)| GaCount {
            ga,
            versions: versions.len(),
        })
        .collect()
}
