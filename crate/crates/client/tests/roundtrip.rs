use stargraph_client::{Client, ClientError};
use stargraph_core::api::{self, ConditionsRequest, ResonanceRequest};
use stargraph_core::experiments::find_scenario;
use stargraph_core::{CoulombSpec, Profile, ShortRangeSpec};

async fn spawn_server() -> Client {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        stargraph_service::serve(listener).await.unwrap();
    });
    Client::new(&format!("http://{addr}/")).unwrap()
}

#[tokio::test]
async fn remote_results_equal_local_ones() {
    let client = spawn_server().await;
    client.health().await.unwrap();
    assert_eq!(client.scenarios().await.unwrap(), api::scenarios());

    let well = Profile::unit(-std::f64::consts::PI.powi(2) / 4.0);
    let req = ResonanceRequest {
        short_range: ShortRangeSpec::uniform(4, Profile::Zero, Profile::Zero, well),
        options: Default::default(),
    };
    let remote = client.resonance(&req).await.unwrap();
    assert_eq!(remote.rank, 3);
    assert_eq!(remote.l, api::resonance(&req).unwrap().l);

    let req = ConditionsRequest {
        coulomb: CoulombSpec::zero(3),
        short_range: ShortRangeSpec::uniform(3, Profile::Zero, Profile::Zero, Profile::unit(10.0)),
        resonance: Default::default(),
        condition_tol: 1e-9,
        self_adjoint_tol: 1e-10,
        user: None,
        seed: 1,
        samples: 8,
    };
    let remote = client.conditions(&req).await.unwrap();
    let local = api::conditions(&req).unwrap();
    assert_eq!(remote.rank, 0);
    assert_eq!(remote.green_sampled, local.green_sampled);

    // NaN slopes from an inconclusive fit survive the transport
    let mut spec = find_scenario("c").unwrap();
    spec.eps = vec![0.1, 0.05];
    let remote = client.sweep(&spec).await.unwrap();
    let local = api::sweep(&spec).unwrap();
    assert!(remote.zetas[0].fit_vs_limit.p.is_nan());
    assert_eq!(remote.rows.len(), local.rows.len());
    for (a, b) in remote.rows.iter().zip(&local.rows) {
        assert_eq!(a.err_vs_limit, b.err_vs_limit);
        assert_eq!(a.err_vs_dirichlet, b.err_vs_dirichlet);
    }
}

#[tokio::test]
async fn server_errors_are_typed() {
    let client = spawn_server().await;
    let mut spec = find_scenario("a").unwrap();
    spec.eps = vec![2.0];
    match client.sweep(&spec).await {
        Err(e @ ClientError::Server { .. }) => assert!(e.is_input_error(), "{e}"),
        other => panic!("expected a server error, got {other:?}"),
    }
}

#[tokio::test]
async fn unreachable_server_is_a_transport_error() {
    assert!(matches!(Client::new("localhost:1"), Err(ClientError::Url(_))));
    // bind then drop to get a port nobody listens on
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = Client::new(&format!("http://127.0.0.1:{port}")).unwrap();
    assert!(matches!(client.health().await, Err(ClientError::Http(_))));
}
