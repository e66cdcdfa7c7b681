//! Randomized self-test: generate instances, run every suite, tally results.

use std::collections::BTreeMap;
use std::fmt::Write;

use rayon::prelude::*;

use crate::builder::{example_instance, random_instance, Annotation, Strictness};
use crate::checks::{check_instance, minimize, CheckOptions, InstanceReport, Suite, SuiteResult};
use crate::tree::DyadicTree;

#[derive(Debug, Clone)]
pub struct SelftestConfig {
    pub cases: usize,
    pub max_leaves: usize,
    pub seed: u64,
    /// Strict draws only; otherwise strict and lax alternate.
    pub strict: bool,
    pub options: CheckOptions,
    /// Fixed instances checked before the random ones.
    pub corpus: Vec<(String, DyadicTree, Annotation)>,
}

impl SelftestConfig {
    /// The worked example is always part of the corpus.
    pub fn new(cases: usize, max_leaves: usize, seed: u64, strict: bool) -> Self {
        let (t, a) = example_instance();
        SelftestConfig {
            cases,
            max_leaves,
            seed,
            strict,
            options: CheckOptions::default(),
            corpus: vec![("example".into(), t, a)],
        }
    }
}

/// Seed of the `index`-th random case.
pub fn case_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64)
}

pub fn case_strictness(strict: bool, index: usize) -> Strictness {
    if strict || index.is_multiple_of(2) {
        Strictness::Strict
    } else {
        Strictness::Lax
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct CaseFailure {
    pub label: String,
    pub tree: DyadicTree,
    pub annotation: Annotation,
    pub failures: Vec<SuiteResult>,
}

#[derive(Debug, Clone, Default)]
pub struct SelftestSummary {
    pub instances: usize,
    pub singular: usize,
    pub tallies: BTreeMap<Suite, Tally>,
    /// Failing instances in run order.
    pub failures: Vec<CaseFailure>,
}

impl SelftestSummary {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn absorb(
        &mut self,
        label: String,
        tree: DyadicTree,
        annotation: Annotation,
        report: InstanceReport,
    ) {
        self.instances += 1;
        if report.singular {
            self.singular += 1;
        }
        for r in &report.results {
            let t = self.tallies.entry(r.suite).or_default();
            if r.passed() {
                t.passed += 1;
            } else {
                t.failed += 1;
            }
        }
        let failures: Vec<SuiteResult> = report.violations().cloned().collect();
        if !failures.is_empty() {
            self.failures.push(CaseFailure {
                label,
                tree,
                annotation,
                failures,
            });
        }
    }

    /// Counter table, one line per suite.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "instances: {} (nonsingular {}, singular {})",
            self.instances,
            self.instances - self.singular,
            self.singular
        );
        let width = Suite::ALL.iter().map(|s| s.name().len()).max().unwrap_or(0);
        for suite in Suite::ALL {
            let t = self.tallies.get(suite).copied().unwrap_or_default();
            let kind = if suite.is_diagnostic() {
                "  (diagnostic)"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "{:<width$}  pass {:>6}  fail {:>6}{kind}",
                suite.name(),
                t.passed,
                t.failed
            );
        }
        for f in &self.failures {
            for r in &f.failures {
                let first = r.failures.first().map(String::as_str).unwrap_or("");
                let _ = writeln!(out, "FAIL {} [{}]: {first}", f.label, r.suite.name());
            }
        }
        let _ = writeln!(
            out,
            "{}",
            if self.ok() {
                "selftest: ok"
            } else {
                "selftest: FAILED"
            }
        );
        out
    }
}

pub fn run_selftest(config: &SelftestConfig) -> SelftestSummary {
    let mut summary = SelftestSummary::default();
    for (label, t, a) in &config.corpus {
        let report = check_instance(t, a, &config.options);
        summary.absorb(label.clone(), t.clone(), a.clone(), report);
    }
    let results: Vec<_> = (0..config.cases)
        .into_par_iter()
        .map(|k| {
            let strictness = case_strictness(config.strict, k);
            let seed = case_seed(config.seed, k);
            let (t, a) = random_instance(seed, config.max_leaves, strictness);
            let report = check_instance(&t, &a, &config.options);
            (
                format!("case {k} (seed {seed}, {strictness:?})"),
                t,
                a,
                report,
            )
        })
        .collect();
    for (label, t, a, report) in results {
        summary.absorb(label, t, a, report);
    }
    summary
}

/// Smallest failing spine subtree of the first failure.
pub fn reproducer(
    summary: &SelftestSummary,
    options: &CheckOptions,
) -> Option<(DyadicTree, Annotation)> {
    summary
        .failures
        .first()
        .map(|f| minimize(&f.tree, &f.annotation, options))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_is_clean_and_deterministic() {
        let config = SelftestConfig::new(20, 5, 3, false);
        let a = run_selftest(&config);
        assert!(a.ok(), "{}", a.render());
        assert_eq!(a.instances, 21);
        let b = run_selftest(&config);
        assert_eq!(a.render(), b.render());
    }

    #[test]
    fn single_leaf_run() {
        let mut config = SelftestConfig::new(1, 1, 0, false);
        config.corpus.clear();
        let s = run_selftest(&config);
        assert!(s.ok());
        assert_eq!(s.instances, 1);
        assert_eq!(s.tallies[&Suite::Potentials].passed, 1);
    }
}
