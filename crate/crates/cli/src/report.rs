//! result.json and summary.txt.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use twostate::scenarios::{Assertion, ScenarioResult};

#[derive(Serialize)]
struct AssertionOut<'a> {
    name: &'a str,
    expected: f64,
    actual: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct Distribution<'a> {
    labels: &'a [Vec<f64>],
    probs: &'a [f64],
}

#[derive(Serialize)]
struct Report<'a> {
    config_echo: &'a Value,
    scalars: BTreeMap<&'a str, f64>,
    distributions: BTreeMap<&'a str, Distribution<'a>>,
    assertions: Vec<AssertionOut<'a>>,
    seeds: BTreeMap<&'a str, u64>,
    versions: BTreeMap<&'static str, &'static str>,
}

/// Re-evaluates assertions whose tolerance the config overrides.
pub fn apply_tolerances(result: &mut ScenarioResult, tolerances: &BTreeMap<String, f64>) {
    for (name, tol) in tolerances {
        match result.assertions.iter_mut().find(|a| &a.name == name) {
            Some(a) => *a = Assertion::new(&a.name.clone(), a.expected, a.actual, *tol),
            None => log::warn!("tolerance given for unknown assertion {name:?}"),
        }
    }
}

pub fn to_json(
    result: &ScenarioResult,
    config_echo: &Value,
    root_seed: u64,
) -> serde_json::Result<String> {
    let mut seeds: BTreeMap<&str, u64> =
        result.seeds.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    seeds.insert("root", root_seed);
    let report = Report {
        config_echo,
        scalars: result
            .scalars
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .collect(),
        distributions: result
            .tables
            .iter()
            .map(|(k, t)| {
                (
                    k.as_str(),
                    Distribution {
                        labels: &t.labels,
                        probs: &t.probs,
                    },
                )
            })
            .collect(),
        assertions: result
            .assertions
            .iter()
            .map(|a| AssertionOut {
                name: &a.name,
                expected: a.expected,
                actual: a.actual,
                tolerance: a.tolerance,
                pass: a.pass,
            })
            .collect(),
        seeds,
        versions: BTreeMap::from([
            ("twostate", twostate::VERSION),
            ("twostate-cli", env!("CARGO_PKG_VERSION")),
        ]),
    };
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    Ok(s)
}

/// Human-readable digest computed only from a parsed result.json.
pub fn summary(report: &Value) -> String {
    let mut out = String::new();
    let scenario = report["config_echo"]["scenario"].as_str().unwrap_or("?");
    let seed = &report["seeds"]["root"];
    let _ = writeln!(out, "scenario: {scenario}  seed: {seed}");
    let assertions = report["assertions"].as_array().cloned().unwrap_or_default();
    let passed = assertions
        .iter()
        .filter(|a| a["pass"] == Value::Bool(true))
        .count();
    let _ = writeln!(out, "assertions: {passed}/{} passed", assertions.len());
    for a in &assertions {
        let status = if a["pass"] == Value::Bool(true) {
            "PASS"
        } else {
            "FAIL"
        };
        let _ = writeln!(
            out,
            "  {status} {}  actual {}  expected {}  tolerance {}",
            a["name"].as_str().unwrap_or("?"),
            a["actual"],
            a["expected"],
            a["tolerance"]
        );
    }
    if let Some(scalars) = report["scalars"].as_object() {
        let _ = writeln!(out, "scalars:");
        for (k, v) in scalars {
            let _ = writeln!(out, "  {k} = {v}");
        }
    }
    if let Some(dists) = report["distributions"].as_object() {
        let _ = writeln!(out, "distributions:");
        for (k, d) in dists {
            let _ = writeln!(out, "  {k}:");
            let labels = d["labels"].as_array().cloned().unwrap_or_default();
            let probs = d["probs"].as_array().cloned().unwrap_or_default();
            for (l, p) in labels.iter().zip(&probs) {
                let _ = writeln!(out, "    {l} -> {p}");
            }
        }
    }
    out
}
