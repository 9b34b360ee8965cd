//! The fixed set of extractors: what each reads, which params it needs, and
//! its default utility function.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::{ParamValue, UtilityFunction};
use crate::records::SourceKind;

/// Offender list cap when a metric does not set `top_n`.
pub const DEFAULT_TOP_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtractorId {
    NonComplexFiles,
    CommentedFiles,
    AbsenceOfDuplications,
    FulfillmentCriticalBlockerRules,
    HighlyChangedFiles,
    PassedTests,
    FastTestBuilds,
    TestCoverage,
    NonBugDensity,
    ErrorsAtRuntime,
    AvailabilityUptime,
    FeatureUsage,
    ResolvedIssuesDated,
    IssuesCompletelySpecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    PerFile,
    PerCommitWindowFile,
    PerTestRun,
    Scalar,
}

impl ExtractorId {
    pub const ALL: [ExtractorId; 14] = [
        ExtractorId::NonComplexFiles,
        ExtractorId::CommentedFiles,
        ExtractorId::AbsenceOfDuplications,
        ExtractorId::FulfillmentCriticalBlockerRules,
        ExtractorId::HighlyChangedFiles,
        ExtractorId::PassedTests,
        ExtractorId::FastTestBuilds,
        ExtractorId::TestCoverage,
        ExtractorId::NonBugDensity,
        ExtractorId::ErrorsAtRuntime,
        ExtractorId::AvailabilityUptime,
        ExtractorId::FeatureUsage,
        ExtractorId::ResolvedIssuesDated,
        ExtractorId::IssuesCompletelySpecified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorId::NonComplexFiles => "non_complex_files",
            ExtractorId::CommentedFiles => "commented_files",
            ExtractorId::AbsenceOfDuplications => "absence_of_duplications",
            ExtractorId::FulfillmentCriticalBlockerRules => "fulfillment_critical_blocker_rules",
            ExtractorId::HighlyChangedFiles => "highly_changed_files",
            ExtractorId::PassedTests => "passed_tests",
            ExtractorId::FastTestBuilds => "fast_test_builds",
            ExtractorId::TestCoverage => "test_coverage",
            ExtractorId::NonBugDensity => "non_bug_density",
            ExtractorId::ErrorsAtRuntime => "errors_at_runtime",
            ExtractorId::AvailabilityUptime => "availability_uptime",
            ExtractorId::FeatureUsage => "feature_usage",
            ExtractorId::ResolvedIssuesDated => "resolved_issues_dated",
            ExtractorId::IssuesCompletelySpecified => "issues_completely_specified",
        }
    }

    pub fn source_kind(self) -> SourceKind {
        use ExtractorId::*;
        match self {
            NonComplexFiles | CommentedFiles | AbsenceOfDuplications
            | FulfillmentCriticalBlockerRules | TestCoverage => SourceKind::FileMeasure,
            HighlyChangedFiles => SourceKind::Commit,
            PassedTests | FastTestBuilds => SourceKind::TestRun,
            NonBugDensity | ResolvedIssuesDated | IssuesCompletelySpecified => SourceKind::Issue,
            ErrorsAtRuntime => SourceKind::LogEntry,
            AvailabilityUptime => SourceKind::AvailabilitySample,
            FeatureUsage => SourceKind::UsageEvent,
        }
    }

    pub fn entity(self) -> EntityKind {
        use ExtractorId::*;
        match self {
            NonComplexFiles | CommentedFiles | AbsenceOfDuplications
            | FulfillmentCriticalBlockerRules | TestCoverage => EntityKind::PerFile,
            HighlyChangedFiles => EntityKind::PerCommitWindowFile,
            PassedTests | FastTestBuilds => EntityKind::PerTestRun,
            _ => EntityKind::Scalar,
        }
    }

    /// Params the extractor reads, with their defaults.
    pub fn default_params(self) -> BTreeMap<String, ParamValue> {
        use ExtractorId::*;
        let num = |k: &str, v: f64| (k.to_string(), ParamValue::Number(v));
        let list = |k: &str, v: &[&str]| {
            (
                k.to_string(),
                ParamValue::List(v.iter().map(|s| s.to_string()).collect()),
            )
        };
        let entries = match self {
            NonComplexFiles => vec![num("complexity_threshold", 10.0)],
            CommentedFiles => vec![num("comment_min_pct", 10.0), num("comment_max_pct", 30.0)],
            AbsenceOfDuplications => vec![num("dup_threshold_pct", 5.0)],
            FulfillmentCriticalBlockerRules => vec![],
            HighlyChangedFiles => vec![num("change_limit", 5.0)],
            PassedTests => vec![],
            FastTestBuilds => vec![num("duration_limit_sec", 300.0)],
            TestCoverage => vec![num("target_pct", 80.0)],
            NonBugDensity => vec![list("open_statuses", &["open", "in_progress"])],
            ErrorsAtRuntime => vec![num("max_errors", 10.0)],
            AvailabilityUptime => vec![num("floor_pct", 99.0), num("goal_pct", 99.9)],
            FeatureUsage => vec![list("feature_catalog", &[])],
            ResolvedIssuesDated => vec![],
            IssuesCompletelySpecified => vec![list(
                "required_fields",
                &["description", "due_date", "assignee", "estimate_hours"],
            )],
        };
        entries.into_iter().collect()
    }

    pub fn required_params(self) -> Vec<String> {
        self.default_params().into_keys().collect()
    }

    /// Default utility under the given params. Missing numeric params fall back
    /// to the catalog defaults.
    pub fn default_utility(self, params: &BTreeMap<String, ParamValue>) -> UtilityFunction {
        use ExtractorId::*;
        let defaults = self.default_params();
        let p = |k: &str| {
            params
                .get(k)
                .and_then(ParamValue::as_number)
                .or_else(|| defaults.get(k).and_then(ParamValue::as_number))
                .unwrap_or(0.0)
        };
        match self {
            NonComplexFiles => UtilityFunction::step(p("complexity_threshold"), 1.0, 0.0),
            CommentedFiles => UtilityFunction::linear(vec![
                (0.0, 0.0),
                (p("comment_min_pct"), 1.0),
                (p("comment_max_pct"), 1.0),
                (100.0, 0.0),
            ]),
            AbsenceOfDuplications => UtilityFunction::step(p("dup_threshold_pct"), 1.0, 0.0),
            FulfillmentCriticalBlockerRules => UtilityFunction::step(1.0, 1.0, 0.0),
            HighlyChangedFiles => UtilityFunction::step(p("change_limit"), 1.0, 0.0),
            FastTestBuilds => UtilityFunction::step(p("duration_limit_sec"), 1.0, 0.0),
            TestCoverage => UtilityFunction::linear(vec![(0.0, 0.0), (p("target_pct"), 1.0)]),
            ErrorsAtRuntime => UtilityFunction::linear(vec![(0.0, 1.0), (p("max_errors"), 0.0)]),
            AvailabilityUptime => {
                UtilityFunction::linear(vec![(p("floor_pct"), 0.0), (p("goal_pct"), 1.0)])
            }
            PassedTests | NonBugDensity | FeatureUsage | ResolvedIssuesDated
            | IssuesCompletelySpecified => UtilityFunction::identity(),
        }
    }
}

impl fmt::Display for ExtractorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExtractorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExtractorId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown extractor `{s}`"))
    }
}

impl Serialize for ExtractorId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ExtractorId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in ExtractorId::ALL {
            assert_eq!(id.as_str().parse::<ExtractorId>().unwrap(), id);
        }
        assert!("nonexistent".parse::<ExtractorId>().is_err());
    }

    #[test]
    fn default_utilities_are_valid() {
        for id in ExtractorId::ALL {
            let u = id.default_utility(&id.default_params());
            assert!(u.problems().is_empty(), "{id}: {:?}", u.problems());
        }
    }

    #[test]
    fn documented_defaults() {
        let cc = ExtractorId::NonComplexFiles.default_utility(&BTreeMap::new());
        assert_eq!(cc, UtilityFunction::step(10.0, 1.0, 0.0));
        let band = ExtractorId::CommentedFiles.default_utility(&BTreeMap::new());
        assert_eq!(
            band,
            UtilityFunction::linear(vec![(0.0, 0.0), (10.0, 1.0), (30.0, 1.0), (100.0, 0.0)])
        );
        let avail = ExtractorId::AvailabilityUptime.default_utility(&BTreeMap::new());
        assert_eq!(avail, UtilityFunction::linear(vec![(99.0, 0.0), (99.9, 1.0)]));
    }
}
