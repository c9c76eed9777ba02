//! A whole run on a small synthetic corpus, shared by the workflow and
//! acceptance targets. Raters go through the HTTP API.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use narrative_audit::ambiguity::AmbiguityCategory;
use narrative_audit::config::RunConfig;
use narrative_audit::corpus::{read_dataset, RoadTypeLabel};
use narrative_audit::models::ModelKind;
use narrative_audit::report::AuditReport;
use narrative_audit::review::{router, ReviewStore};
use narrative_audit::workflow::{self, coded_labels, Layout};
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn config(root: &Path, n_records: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.data_dir = root.join("data");
    cfg.out = root.join("out");
    cfg.seed = 11;
    cfg.synth.n_records = n_records;
    cfg.stats.resamples = 200;
    cfg.review.sample_size = 30;
    cfg
}

pub async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

/// Three scripted raters: one follows the coded label, one follows it but
/// calls every fourth item indeterminate, one keys on the word "intersection".
/// Returns every payload the server sent.
pub async fn rate_current_sample(cfg: &RunConfig) -> Vec<Value> {
    let layout = Layout::new(cfg);
    let coded = coded_labels(&read_dataset(&layout.dataset()).unwrap());
    let store = Arc::new(ReviewStore::open(&layout.review()).unwrap());
    let app = router(store, None);
    let sample_id = workflow::current_sample_id(&layout).unwrap();
    let mut served = vec![call(&app, Method::GET, &format!("/api/samples/{sample_id}"), None).await.1];
    for rater in ["alice", "bob", "carol"] {
        let (status, s) = call(&app, Method::POST, "/api/sessions", Some(json!({"rater_id": rater, "sample_id": sample_id}))).await;
        assert_eq!(status, StatusCode::CREATED, "{s}");
        let sid = s["session_id"].as_str().unwrap().to_string();
        served.push(s);
        loop {
            let (_, next) = call(&app, Method::GET, &format!("/api/sessions/{sid}/next"), None).await;
            served.push(next.clone());
            if next["status"] == "done" {
                break;
            }
            let key = next["crash_key"].as_str().unwrap();
            let position = next["position"].as_u64().unwrap();
            let narrative = next["narrative"].as_str().unwrap().to_lowercase();
            let label = match rater {
                "alice" => coded[key].as_str(),
                "bob" if position % 4 == 0 => "Indeterminate",
                "bob" => coded[key].as_str(),
                _ if narrative.contains("intersection") => RoadTypeLabel::Intersection.as_str(),
                _ => RoadTypeLabel::NonIntersection.as_str(),
            };
            let (status, ack) =
                call(&app, Method::POST, &format!("/api/sessions/{sid}/ratings"), Some(json!({"crash_key": key, "label": label}))).await;
            assert_eq!(status, StatusCode::OK, "{ack}");
            served.push(ack);
        }
        let (status, closed) = call(&app, Method::POST, &format!("/api/sessions/{sid}/close"), None).await;
        assert_eq!(status, StatusCode::OK);
        served.push(closed);
    }
    served
}

/// synth, train two models, evaluate, audit, sample, rate, compare, report.
/// With `all_records` the audit covers the whole corpus, not just the test split.
pub async fn full_run(cfg: &RunConfig, all_records: bool) -> (AuditReport, Vec<Value>) {
    workflow::synth(cfg).unwrap();
    for (kind, name) in [(ModelKind::Svm, "svm"), (ModelKind::Gbdt, "gbdt")] {
        workflow::train(cfg, kind, name).unwrap();
        if all_records {
            workflow::predict(cfg, name, true, None).unwrap();
        }
    }
    workflow::evaluate(cfg).unwrap();
    workflow::audit(cfg).unwrap();
    workflow::sample(cfg).unwrap();
    let served = rate_current_sample(cfg).await;
    workflow::compare(cfg).unwrap();
    (workflow::report(cfg).unwrap(), served)
}

fn walk(v: &Value, keys: &mut BTreeSet<String>, strings: &mut BTreeSet<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                keys.insert(k.clone());
                walk(x, keys, strings);
            }
        }
        Value::Array(a) => a.iter().for_each(|x| walk(x, keys, strings)),
        Value::String(s) => {
            strings.insert(s.clone());
        }
        _ => {}
    }
}

/// Field names a rater's client may receive.
pub const SERVED_FIELDS: [&str; 11] =
    ["sample_id", "items", "crash_key", "narrative", "session_id", "rater_id", "rated", "total", "status", "position", "superseded"];

/// Field names outside `SERVED_FIELDS` plus string values that name a
/// label, a model or an ambiguity stratum.
pub fn blinding_violations(served: &[Value], models: &[&str]) -> Vec<String> {
    let (mut keys, mut strings) = (BTreeSet::new(), BTreeSet::new());
    for v in served {
        walk(v, &mut keys, &mut strings);
    }
    let mut out: Vec<String> = keys.into_iter().filter(|k| !SERVED_FIELDS.contains(&k.as_str())).map(|k| format!("field {k}")).collect();
    let mut forbidden: Vec<String> = ["Intersection", "NonIntersection", "Indeterminate"].iter().map(|s| s.to_string()).collect();
    forbidden.extend(models.iter().map(|s| s.to_string()));
    forbidden.extend(AmbiguityCategory::ALL.iter().map(|c| c.as_str().to_string()));
    for f in forbidden {
        if strings.contains(&f) {
            out.push(format!("value {f:?}"));
        }
    }
    out
}
