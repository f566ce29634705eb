// SPDX-License-Identifier: Apache-2.0

mod common;

use std::sync::Arc;

use tabqa::apis::{compare_larger, compare_smaller, qa, qa_mask, substitute_label, ApiError, ApiFamily, ApiRegistry, Axis};
use tabqa::cli::load_table_file;
use tabqa::gateway::{parse_yes_no, Gateway, GatewayError, ScriptRule, ScriptedModel};
use tabqa::parser::parse_table;
use tabqa::value::Value;

#[test]
fn compare_first_occurrence_on_ties() {
    let idx = ["a", "b", "c", "d"];
    assert_eq!(*compare_larger(&[1.0, 5.0, 5.0, 2.0], &idx).unwrap(), "b");
    assert_eq!(*compare_smaller(&[3.0, 1.0, 4.0, 1.0], &idx).unwrap(), "b");
    assert!(matches!(compare_larger(&[1.0], &idx), Err(ApiError::LengthMismatch { .. })));
    assert_eq!(compare_larger::<&str>(&[], &[]), Err(ApiError::EmptyInput));
}

#[test]
fn registry_calls_check_arity() {
    let reg = ApiRegistry::standard(Gateway::new(Arc::new(ScriptedModel::default())));
    let spec = reg.get("compare_larger").unwrap();
    let v = spec
        .call(&[
            Value::List(vec![Value::Number(1.0), Value::Number(3.0)]),
            Value::List(vec![Value::Text("x".into()), Value::Text("y".into())]),
        ])
        .unwrap();
    assert_eq!(v, Value::Text("y".into()));
    assert!(spec.call(&[Value::Null]).is_err());
    assert!(reg.has_family(ApiFamily::Qa));
    assert!(!reg.clone().without_family(ApiFamily::Qa).has_family(ApiFamily::Qa));
}

#[test]
fn immigrants_qa_through_a_scripted_gateway() {
    let model = ScriptedModel::new(vec![
        ScriptRule::new("Question: Winnipeg: Manitoba?", vec![("yes", vec![-0.1])]),
        ScriptRule::new("Question: Rest of Manitoba: Manitoba?", vec![("Yes.", vec![-0.1])]),
        ScriptRule::new("Answer the question", vec![("no", vec![-0.1])]),
    ]);
    let gw = Gateway::new(Arc::new(model));
    let raw = load_table_file(&common::fixtures().join("tables/immigrants.json"), 0, 0).unwrap();
    let m = parse_table(&raw).unwrap();
    let picked = qa(&gw, "Manitoba?", &m, Axis::Row, 1).unwrap();
    let names: Vec<&str> = picked.iter().map(|t| t.get(1).unwrap()).collect();
    assert_eq!(names, ["Winnipeg", "Rest of Manitoba"]);
    let mask = qa_mask(&gw, "Manitoba?", &m, Axis::Row, 1).unwrap();
    assert_eq!(mask, [false, false, true, true, false, false]);
    assert!(matches!(
        qa(&gw, "x", &m, Axis::Column, 5),
        Err(ApiError::LevelOutOfRange { level: 5, depth: 2 })
    ));
}

#[test]
fn oracle_failures_count_as_no() {
    let failing = |_: &str| -> Result<bool, GatewayError> { Err(GatewayError::Transport("down".into())) };
    let raw = load_table_file(&common::fixtures().join("tables/illness.json"), 0, 0).unwrap();
    let m = parse_table(&raw).unwrap();
    assert!(qa(&failing, "{}?", &m, Axis::Row, 0).unwrap().is_empty());
}

#[test]
fn label_substitution() {
    assert_eq!(substitute_label("Is {} in Manitoba?", "Regina"), "Is Regina in Manitoba?");
    assert_eq!(substitute_label("Manitoba?", "Regina"), "Regina: Manitoba?");
}

#[derive(serde::Deserialize)]
struct YesNoCase {
    reply: String,
    answer: Option<bool>,
}

#[test]
fn yes_no_reply_fixture() {
    let cases: Vec<YesNoCase> =
        serde_json::from_str(&std::fs::read_to_string(common::fixtures().join("metrics/yes_no_20.json")).unwrap())
            .unwrap();
    assert_eq!(cases.len(), 20);
    for c in cases {
        assert_eq!(parse_yes_no(&c.reply).ok(), c.answer, "reply {:?}", c.reply);
    }
}
