use std::collections::{BTreeMap, BTreeSet};

use super::catalog::ExtractorId;
use super::{latest_issue_versions, Ctx, MetricError, MetricValue, Offender};
use crate::records::{FileMeasure, LogLevel, Payload, RawRecord, Severity};

type Summary = BTreeMap<String, f64>;

pub(super) fn run(
    id: ExtractorId,
    ctx: &Ctx<'_>,
    records: &[&RawRecord],
) -> Result<MetricValue, MetricError> {
    use ExtractorId::*;
    match id {
        NonComplexFiles => non_complex_files(ctx, records),
        CommentedFiles => per_file(ctx, records, "comment_density_pct", |f| {
            f.comment_density_pct()
        }),
        AbsenceOfDuplications => per_file(ctx, records, "duplicated_density_pct", |f| {
            f.duplicated_density_pct()
        }),
        FulfillmentCriticalBlockerRules => blocker_rules(ctx, records),
        HighlyChangedFiles => highly_changed(ctx, records),
        PassedTests => passed_tests(ctx, records),
        FastTestBuilds => fast_test_builds(ctx, records),
        TestCoverage => test_coverage(ctx, records),
        NonBugDensity => non_bug_density(ctx, records),
        ErrorsAtRuntime => errors_at_runtime(ctx, records),
        AvailabilityUptime => availability(ctx, records),
        FeatureUsage => feature_usage(ctx, records),
        ResolvedIssuesDated => resolved_dated(ctx, records),
        IssuesCompletelySpecified => completely_specified(ctx, records),
    }
}

struct Scored {
    entity: String,
    base: f64,
    utility: f64,
    detail: Option<String>,
}

/// Worst first: lowest utility, then highest base, then entity name.
fn offender_order(a: &Offender, b: &Offender) -> std::cmp::Ordering {
    a.utility
        .total_cmp(&b.utility)
        .then(b.base_value.total_cmp(&a.base_value))
        .then_with(|| a.entity.cmp(&b.entity))
}

/// Mean utility over the entities; offenders are the entities below 1.
fn entity_metric(ctx: &Ctx<'_>, base_name: &str, scored: Vec<Scored>, mut summary: Summary) -> MetricValue {
    let n = scored.len();
    summary.insert("entities".into(), n as f64);
    let value = if n == 0 {
        None
    } else {
        let sum: f64 = scored.iter().map(|s| s.utility).sum();
        let bases = scored.iter().map(|s| s.base);
        summary.insert(format!("mean_{base_name}"), bases.clone().sum::<f64>() / n as f64);
        summary.insert(format!("min_{base_name}"), bases.clone().fold(f64::INFINITY, f64::min));
        summary.insert(format!("max_{base_name}"), bases.fold(f64::NEG_INFINITY, f64::max));
        Some((sum / n as f64).clamp(0.0, 1.0))
    };
    let mut offenders: Vec<Offender> = scored
        .into_iter()
        .filter(|s| s.utility < 1.0)
        .map(|s| Offender {
            entity: s.entity,
            base_value: s.base,
            utility: s.utility,
            detail: s.detail,
        })
        .collect();
    summary.insert("offenders".into(), offenders.len() as f64);
    offenders.sort_by(offender_order);
    offenders.truncate(ctx.top_n);
    MetricValue {
        metric_id: ctx.metric_id.to_string(),
        value,
        n_entities: n,
        raw_summary: summary,
        offenders,
    }
}

/// Scalar base scored through the utility. Offenders are the contributing
/// items, worst (largest base) first, with utility 0.
fn scalar_metric(
    ctx: &Ctx<'_>,
    base: Option<f64>,
    n_entities: usize,
    mut summary: Summary,
    items: Vec<(String, f64, Option<String>)>,
) -> MetricValue {
    if let Some(b) = base {
        summary.insert("base_value".into(), b);
    }
    let mut offenders: Vec<Offender> = items
        .into_iter()
        .map(|(entity, base_value, detail)| Offender {
            entity,
            base_value,
            utility: 0.0,
            detail,
        })
        .collect();
    offenders.sort_by(offender_order);
    offenders.truncate(ctx.top_n);
    MetricValue {
        metric_id: ctx.metric_id.to_string(),
        value: base.map(|b| ctx.utility.evaluate(b)),
        n_entities,
        raw_summary: summary,
        offenders,
    }
}

/// Latest measure of each path within the window.
fn latest_files<'a>(records: &[&'a RawRecord]) -> Vec<&'a FileMeasure> {
    let mut latest: BTreeMap<&str, (&RawRecord, &FileMeasure)> = BTreeMap::new();
    for r in records {
        if let Payload::FileMeasure(f) = &r.payload {
            let newer = latest
                .get(f.path.as_str())
                .is_none_or(|(prev, _)| (r.timestamp, &r.record_id) > (prev.timestamp, &prev.record_id));
            if newer {
                latest.insert(f.path.as_str(), (r, f));
            }
        }
    }
    latest.into_values().map(|(_, f)| f).collect()
}

fn score(ctx: &Ctx<'_>, entity: &str, base: f64, detail: Option<String>) -> Scored {
    Scored {
        entity: entity.to_string(),
        base,
        utility: ctx.utility.evaluate(base),
        detail,
    }
}

fn per_file(
    ctx: &Ctx<'_>,
    records: &[&RawRecord],
    base_name: &str,
    base: impl Fn(&FileMeasure) -> Option<f64>,
) -> Result<MetricValue, MetricError> {
    let files = latest_files(records);
    let mut skipped = 0usize;
    let mut scored = Vec::new();
    for f in &files {
        match base(f) {
            Some(b) => scored.push(score(ctx, &f.path, b, None)),
            None => skipped += 1,
        }
    }
    let mut summary = Summary::new();
    summary.insert("files".into(), files.len() as f64);
    if skipped > 0 {
        summary.insert("files_without_base".into(), skipped as f64);
    }
    Ok(entity_metric(ctx, base_name, scored, summary))
}

fn non_complex_files(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let files = latest_files(records);
    let scored = files
        .iter()
        .map(|f| {
            let detail = (!f.function_complexities.is_empty()).then(|| {
                format!(
                    "{} functions, max complexity {}",
                    f.function_complexities.len(),
                    f.function_complexities.iter().max().unwrap_or(&0)
                )
            });
            score(ctx, &f.path, f.mean_complexity(), detail)
        })
        .collect();
    let mut summary = Summary::new();
    summary.insert("files".into(), files.len() as f64);
    let functions: usize = files.iter().map(|f| f.function_complexities.len()).sum();
    summary.insert("functions".into(), functions as f64);
    if let Some(max) = files
        .iter()
        .flat_map(|f| f.function_complexities.iter())
        .max()
    {
        summary.insert("max_function_complexity".into(), *max as f64);
    }
    Ok(entity_metric(ctx, "complexity", scored, summary))
}

fn blocker_rules(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let files = latest_files(records);
    let mut blockers = 0usize;
    let mut criticals = 0usize;
    let scored = files
        .iter()
        .map(|f| {
            let hits: Vec<&str> = f
                .violations
                .iter()
                .filter(|v| matches!(v.severity, Severity::Blocker | Severity::Critical))
                .map(|v| v.rule.as_str())
                .collect();
            for v in &f.violations {
                match v.severity {
                    Severity::Blocker => blockers += 1,
                    Severity::Critical => criticals += 1,
                    _ => {}
                }
            }
            let detail = (!hits.is_empty()).then(|| hits.join(", "));
            score(ctx, &f.path, hits.len() as f64, detail)
        })
        .collect();
    let mut summary = Summary::new();
    summary.insert("files".into(), files.len() as f64);
    summary.insert("blocker_violations".into(), blockers as f64);
    summary.insert("critical_violations".into(), criticals as f64);
    Ok(entity_metric(ctx, "blocking_violations", scored, summary))
}

fn highly_changed(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let mut per_path: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut authors: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut revisions = BTreeSet::new();
    let (mut added, mut deleted) = (0u64, 0u64);
    for r in records {
        if let Payload::Commit(c) = &r.payload {
            revisions.insert(c.revision.as_str());
            for f in &c.files {
                per_path
                    .entry(f.path.as_str())
                    .or_default()
                    .insert(c.revision.as_str());
                authors
                    .entry(f.path.as_str())
                    .or_default()
                    .insert(c.author.as_str());
                added += f.lines_added;
                deleted += f.lines_deleted;
            }
        }
    }
    let scored = per_path
        .iter()
        .map(|(path, revs)| {
            let who: Vec<&str> = authors[path].iter().copied().collect();
            score(ctx, path, revs.len() as f64, Some(format!("authors: {}", who.join(", "))))
        })
        .collect();
    let mut summary = Summary::new();
    summary.insert("commits".into(), revisions.len() as f64);
    summary.insert("lines_added".into(), added as f64);
    summary.insert("lines_deleted".into(), deleted as f64);
    Ok(entity_metric(ctx, "commits_per_file", scored, summary))
}

fn test_runs<'a>(records: &[&'a RawRecord]) -> Vec<&'a crate::records::TestRun> {
    records
        .iter()
        .filter_map(|r| match &r.payload {
            Payload::TestRun(t) => Some(t),
            _ => None,
        })
        .collect()
}

fn passed_tests(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let runs = test_runs(records);
    let mut summary = Summary::new();
    summary.insert("runs".into(), runs.len() as f64);
    for (key, f) in [
        ("tests_total", (|t: &crate::records::TestRun| t.total) as fn(&_) -> u64),
        ("tests_errors", |t| t.errors),
        ("tests_failures", |t| t.failures),
        ("tests_skipped", |t| t.skipped),
    ] {
        summary.insert(key.into(), runs.iter().map(|t| f(t)).sum::<u64>() as f64);
    }
    let scored = runs
        .iter()
        .filter_map(|t| {
            t.success_density().map(|d| {
                let detail = format!(
                    "{} total, {} errors, {} failures, {} skipped",
                    t.total, t.errors, t.failures, t.skipped
                );
                score(ctx, &t.label(), d, Some(detail))
            })
        })
        .collect();
    Ok(entity_metric(ctx, "success_density", scored, summary))
}

fn fast_test_builds(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let runs = test_runs(records);
    let scored = runs
        .iter()
        .map(|t| score(ctx, &t.label(), t.duration_sec, None))
        .collect();
    let mut summary = Summary::new();
    summary.insert("runs".into(), runs.len() as f64);
    Ok(entity_metric(ctx, "duration_sec", scored, summary))
}

fn test_coverage(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let files = latest_files(records);
    let covered: Vec<&&FileMeasure> = files.iter().filter(|f| f.line_coverage.is_some()).collect();
    let scored = covered
        .iter()
        .map(|f| score(ctx, &f.path, f.line_coverage.unwrap_or(0.0), None))
        .collect();
    let mut summary = Summary::new();
    summary.insert("files".into(), files.len() as f64);
    let cond: Vec<f64> = covered.iter().filter_map(|f| f.condition_coverage).collect();
    if !cond.is_empty() {
        summary.insert(
            "mean_condition_coverage_pct".into(),
            cond.iter().sum::<f64>() / cond.len() as f64,
        );
    }
    Ok(entity_metric(ctx, "line_coverage_pct", scored, summary))
}

fn non_bug_density(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let open_statuses = ctx.list("open_statuses")?;
    let issues = latest_issue_versions(records);
    let bugs: Vec<_> = issues
        .iter()
        .filter(|(_, i)| i.issue_type == crate::records::IssueType::Bug)
        .collect();
    let open_bugs: Vec<_> = bugs
        .iter()
        .filter(|(_, i)| open_statuses.iter().any(|s| s == i.status.as_str()))
        .collect();
    let total = issues.len();
    let mut summary = Summary::new();
    summary.insert("issues".into(), total as f64);
    summary.insert("bugs".into(), bugs.len() as f64);
    summary.insert("open_bugs".into(), open_bugs.len() as f64);
    let base = (total > 0).then(|| 1.0 - open_bugs.len() as f64 / total as f64);
    let items = open_bugs
        .iter()
        .map(|(_, i)| (i.issue_id.clone(), 1.0, Some(format!("status {}", i.status.as_str()))))
        .collect();
    Ok(scalar_metric(ctx, base, total, summary, items))
}

fn errors_at_runtime(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let mut per_level: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut locations: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut total = 0usize;
    for r in records {
        if let Payload::LogEntry(e) = &r.payload {
            total += 1;
            let key = match e.level {
                LogLevel::Fatal => "fatal",
                LogLevel::Error => "error",
                LogLevel::Warning => "warning",
                LogLevel::Info => "info",
                LogLevel::Debug => "debug",
                LogLevel::Trace => "trace",
            };
            *per_level.entry(key).or_default() += 1;
            if matches!(e.level, LogLevel::Fatal | LogLevel::Error) {
                let loc = match (&e.source_file, e.source_line) {
                    (Some(f), Some(l)) => format!("{f}:{l}"),
                    (Some(f), None) => f.clone(),
                    _ => "(unknown location)".to_string(),
                };
                let slot = locations.entry(loc).or_insert((0, e.message.clone()));
                slot.0 += 1;
            }
        }
    }
    let critical = per_level.get("fatal").copied().unwrap_or(0) + per_level.get("error").copied().unwrap_or(0);
    let mut summary = Summary::new();
    summary.insert("log_entries".into(), total as f64);
    summary.insert("runtime_errors".into(), critical as f64);
    for (level, n) in per_level {
        summary.insert(format!("level_{level}"), n as f64);
    }
    let items = locations
        .into_iter()
        .map(|(loc, (n, msg))| (loc, n as f64, Some(msg)))
        .collect();
    // a window without any log lines is "no data", not "no errors"
    let base = (total > 0).then_some(critical as f64);
    Ok(scalar_metric(ctx, base, total, summary, items))
}

fn availability(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let mut samples: Vec<(&RawRecord, bool)> = records
        .iter()
        .filter_map(|r| match &r.payload {
            Payload::AvailabilitySample(s) => Some((*r, s.up)),
            _ => None,
        })
        .collect();
    samples.sort_by(|a, b| (a.0.timestamp, &a.0.record_id).cmp(&(b.0.timestamp, &b.0.record_id)));
    let total = samples.len();
    let up = samples.iter().filter(|(_, u)| *u).count();
    let mut summary = Summary::new();
    summary.insert("samples".into(), total as f64);
    summary.insert("up_samples".into(), up as f64);
    let base = (total > 0).then(|| 100.0 * up as f64 / total as f64);
    if let Some(pct) = base {
        summary.insert("uptime_pct".into(), pct);
    }
    let recoveries: Vec<_> = samples
        .windows(2)
        .filter(|w| !w[0].1 && w[1].1)
        .map(|w| w[1].0.timestamp)
        .collect();
    summary.insert("recoveries".into(), recoveries.len() as f64);
    if recoveries.len() >= 2 {
        let gaps: Vec<f64> = recoveries
            .windows(2)
            .map(|w| (w[1] - w[0]).num_milliseconds() as f64 / 1000.0)
            .collect();
        summary.insert(
            "mean_time_between_failures_sec".into(),
            gaps.iter().sum::<f64>() / gaps.len() as f64,
        );
    }
    let items = samples
        .iter()
        .filter(|(_, u)| !*u)
        .map(|(r, _)| (r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true), 0.0, Some("down".to_string())))
        .collect();
    Ok(scalar_metric(ctx, base, total, summary, items))
}

fn feature_usage(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let catalog = ctx.list("feature_catalog")?;
    let mut uses: BTreeMap<&str, usize> = BTreeMap::new();
    let mut durations = Vec::new();
    let mut events = 0usize;
    for r in records {
        if let Payload::UsageEvent(u) = &r.payload {
            events += 1;
            *uses.entry(u.feature.as_str()).or_default() += 1;
            durations.extend(u.duration_sec);
        }
    }
    let used = catalog.iter().filter(|f| uses.contains_key(f.as_str())).count();
    let mut summary = Summary::new();
    summary.insert("catalog_size".into(), catalog.len() as f64);
    summary.insert("features_used".into(), used as f64);
    summary.insert("times_used".into(), events as f64);
    if !durations.is_empty() {
        summary.insert(
            "average_usage_time_sec".into(),
            durations.iter().sum::<f64>() / durations.len() as f64,
        );
    }
    let base = (!catalog.is_empty()).then(|| used as f64 / catalog.len() as f64);
    let items = catalog
        .iter()
        .filter(|f| !uses.contains_key(f.as_str()))
        .map(|f| (f.clone(), 0.0, Some("never used in window".to_string())))
        .collect();
    Ok(scalar_metric(ctx, base, catalog.len(), summary, items))
}

fn resolved_dated(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let issues = latest_issue_versions(records);
    let resolved: Vec<_> = issues
        .iter()
        .filter(|(_, i)| i.resolved.is_some_and(|t| ctx.window.contains(t)))
        .collect();
    let undated: Vec<_> = resolved
        .iter()
        .filter(|(_, i)| i.due_date.is_none() && i.iteration.is_none() && i.release.is_none())
        .collect();
    let mut summary = Summary::new();
    summary.insert("resolved_issues".into(), resolved.len() as f64);
    summary.insert("dated".into(), (resolved.len() - undated.len()) as f64);
    let base = (!resolved.is_empty())
        .then(|| (resolved.len() - undated.len()) as f64 / resolved.len() as f64);
    let items = undated
        .iter()
        .map(|(_, i)| (i.issue_id.clone(), 0.0, Some("no due date, iteration or release".to_string())))
        .collect();
    Ok(scalar_metric(ctx, base, resolved.len(), summary, items))
}

fn completely_specified(ctx: &Ctx<'_>, records: &[&RawRecord]) -> Result<MetricValue, MetricError> {
    let required = ctx.list("required_fields")?;
    let issues = latest_issue_versions(records);
    let mut items = Vec::new();
    for (_, issue) in &issues {
        let mut missing = Vec::new();
        for field in required {
            match issue.has_field(field) {
                Some(true) => {}
                Some(false) => missing.push(field.as_str()),
                None => {
                    return Err(MetricError::InvalidParam {
                        metric: ctx.metric_id.into(),
                        param: "required_fields".into(),
                        reason: format!("unknown issue field `{field}`"),
                    })
                }
            }
        }
        if !missing.is_empty() {
            items.push((
                issue.issue_id.clone(),
                missing.len() as f64,
                Some(format!("missing {}", missing.join(", "))),
            ));
        }
    }
    let total = issues.len();
    let mut summary = Summary::new();
    summary.insert("issues".into(), total as f64);
    summary.insert("incomplete".into(), items.len() as f64);
    let base = (total > 0).then(|| 1.0 - items.len() as f64 / total as f64);
    Ok(scalar_metric(ctx, base, total, summary, items))
}
