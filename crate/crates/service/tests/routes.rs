use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use num_complex::Complex64;
use serde_json::{json, Value};
use tower::ServiceExt;

use stargraph_core::api::{
    ConditionsRequest, ConditionsResponse, ErrorBody, ResonanceRequest, ResonanceResponse,
    SolveRequest, SolveResponse,
};
use stargraph_core::coupling::ConditionKind;
use stargraph_core::{
    experiments::find_scenario, ConvergenceReport, CoulombSpec, Forcing, OperatorSpec, Profile,
    RegularizedPotential, ResolventProblem, ShortRangeSpec, StarGraph, SweepSpec,
};

async fn call(method: Method, path: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(path);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let resp = stargraph_service::router().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn post<T: serde::Serialize>(path: &str, body: &T) -> (StatusCode, Vec<u8>) {
    call(Method::POST, path, Some(serde_json::to_string(body).unwrap())).await
}

#[tokio::test]
async fn health_and_scenarios() {
    let (s, b) = call(Method::GET, "/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(serde_json::from_slice::<Value>(&b).unwrap(), json!({"status": "ok"}));
    let (s, b) = call(Method::GET, "/scenarios", None).await;
    assert_eq!(s, StatusCode::OK);
    let specs: Vec<SweepSpec> = serde_json::from_slice(&b).unwrap();
    assert_eq!(specs.len(), 9);
    assert_eq!(specs[0].scenario.id, "a_delta");
}

#[tokio::test]
async fn resonance_of_the_free_star() {
    let req = ResonanceRequest {
        short_range: ShortRangeSpec::zero(4),
        options: Default::default(),
    };
    let (s, b) = post("/resonance", &req).await;
    assert_eq!(s, StatusCode::OK);
    let r: ResonanceResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(r.rank, 1);
    let l0 = r.l[(0, 0)];
    for k in 1..4 {
        assert!((r.l[(k, 0)] / l0 - 1.0).norm() < 1e-8);
    }
}

#[tokio::test]
async fn conditions_report_the_delta_coupling() {
    let req = ConditionsRequest {
        coulomb: CoulombSpec::zero(3),
        short_range: ShortRangeSpec::uniform(3, Profile::Zero, Profile::unit(1.0), Profile::Zero),
        resonance: Default::default(),
        condition_tol: 1e-9,
        self_adjoint_tol: 1e-10,
        user: None,
        seed: 7,
        samples: 16,
    };
    let (s, b) = post("/conditions", &req).await;
    assert_eq!(s, StatusCode::OK);
    let r: ConditionsResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(r.rank, 1);
    assert_eq!(r.conditions.kind, ConditionKind::Delta);
    assert!(r.self_adjoint.self_adjoint);
    assert!(r.green_sampled < 1e-10);
}

#[tokio::test]
async fn solve_matches_the_library() {
    let graph = StarGraph::new(2, 6.0).unwrap();
    let pot = RegularizedPotential::new(CoulombSpec::zero(2), ShortRangeSpec::zero(2), 0.25).unwrap();
    let problem = ResolventProblem::new(
        graph,
        Complex64::new(0.0, 1.0),
        Forcing::on_edge(2, 0, Profile::unit(1.0)).unwrap(),
        OperatorSpec::Regularized(pot),
    )
    .unwrap();
    let req = SolveRequest {
        problem,
        mesh: Default::default(),
    };
    let (s, b) = post("/solve", &req).await;
    assert_eq!(s, StatusCode::OK);
    let remote: SolveResponse = serde_json::from_slice(&b).unwrap();
    let local = stargraph_core::api::solve(&req).unwrap();
    // float_roundtrip makes the transport exact
    assert_eq!(remote.vertex_values, local.vertex_values);
    assert_eq!(remote.edges[1].values, local.edges[1].values);
    assert!(remote.l2_norm <= remote.forcing_l2_norm);
}

#[tokio::test]
async fn sweep_round_trip() {
    let mut spec = find_scenario("a").unwrap();
    spec.eps = vec![0.1, 0.05, 0.025];
    let (s, b) = post("/sweep", &spec).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
    let r: ConvergenceReport = serde_json::from_slice(&b).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert_eq!(r.scenario, spec.scenario.id);
}

#[tokio::test]
async fn invalid_input_is_unprocessable() {
    let mut spec = find_scenario("a").unwrap();
    spec.eps = vec![0.1, 0.2];
    let (s, b) = post("/sweep", &spec).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let e: ErrorBody = serde_json::from_slice(&b).unwrap();
    assert!(!e.message.is_empty());

    let (s, b) = call(Method::POST, "/resonance", Some("{\"short_range\": 3}".into())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(serde_json::from_slice::<ErrorBody>(&b).unwrap().kind, "request");

    let (s, b) = call(Method::POST, "/resonance", Some("{".into())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(serde_json::from_slice::<ErrorBody>(&b).unwrap().kind, "request");
}

#[tokio::test]
async fn unknown_routes_and_methods() {
    assert_eq!(call(Method::GET, "/nope", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(Method::GET, "/sweep", None).await.0, StatusCode::METHOD_NOT_ALLOWED);
}
