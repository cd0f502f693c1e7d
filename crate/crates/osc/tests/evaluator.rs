//! Fetch rules against a local HTTP stub, versioning of evaluations, job
//! serialization, refresh scheduling and response caching.

mod common;

use std::net::TcpListener;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{get, json, post, read, ServerOptions, Stub, TestServer};
use osc::evaluator::{Evaluator, JobQueue, JobState, Outcome, Scheduler};
use osc::fetch::{run_rule, Allowlist, FetchError, HttpClient, UreqClient};
use osc::repository::Repository;
use osc::store::Store;
use osc_core::sdl;

const SHOP: &str = r#"vocabulary shop {
    property price : money { doc "Monthly fee." importance 1 }
    property seats : integer { doc "Included seats." importance 2 }
}"#;

fn shop_service(stub: &Stub, extractor: &str, every: &str) -> String {
    format!(
        "service widget uses shop {{\n    set price 10 EUR\n    set seats 1\n    fetch price from \"{}\" extract {extractor} as money every {every}\n}}\n",
        stub.url("/price")
    )
}

fn rule_of(source: &str) -> sdl::FetchRule {
    let doc = sdl::parse_document(source).unwrap();
    doc.services[0].fetch_rules[0].clone()
}

fn client() -> UreqClient {
    UreqClient::new(Duration::from_secs(5), 1 << 20)
}

fn repo_with_shop(dir: &std::path::Path) -> Arc<Repository> {
    let repo = Arc::new(Repository::open(Store::open(dir).unwrap()).unwrap());
    repo.put_vocabulary("shop", SHOP).unwrap();
    repo
}

#[test]
fn extractors_read_live_values() {
    let stub = Stub::start(r#"{"plans":{"basic":{"monthly":"12.50"}}}"#);
    let allow = Allowlist::new([stub.addr.as_str()]);
    let c = client();

    let rule = rule_of(&shop_service(
        &stub,
        r#"json_pointer "/plans/basic/monthly""#,
        "1h",
    ));
    assert_eq!(run_rule(&rule, &c, &allow).unwrap(), "12.50");

    stub.set("<html><p>Basic plan: 7 EUR per month</p></html>");
    let rule = rule_of(&shop_service(&stub, r#"regex "plan: (\\d+) EUR""#, "1h"));
    assert_eq!(run_rule(&rule, &c, &allow).unwrap(), "7");

    stub.set(r#"<html><table><tr><td class="fee"> 9.99 </td></tr></table></html>"#);
    let rule = rule_of(&shop_service(&stub, r#"css "td.fee""#, "1h"));
    assert_eq!(run_rule(&rule, &c, &allow).unwrap().trim(), "9.99");

    let rule = rule_of(&shop_service(&stub, r#"css "td.missing""#, "1h"));
    assert_eq!(run_rule(&rule, &c, &allow), Err(FetchError::NoMatch));
}

#[test]
fn fetch_failures_are_reported() {
    let stub = Stub::start(r#"{"p":1}"#);
    let rule = rule_of(&shop_service(&stub, r#"json_pointer "/p""#, "1h"));
    let hits = stub.hits();
    let denied = run_rule(&rule, &client(), &Allowlist::new(["example.org"]));
    assert!(
        matches!(denied, Err(FetchError::NotAllowed(_))),
        "{denied:?}"
    );
    assert_eq!(stub.hits(), hits, "a denied host is never contacted");

    let allow = Allowlist::new([stub.addr.as_str()]);
    stub.set_status(503);
    assert_eq!(
        run_rule(&rule, &client(), &allow),
        Err(FetchError::Status(503))
    );

    stub.set_status(200);
    stub.set(&format!(r#"{{"p":1,"pad":"{}"}}"#, "x".repeat(4096)));
    let small = UreqClient::new(Duration::from_secs(5), 512);
    assert!(matches!(
        run_rule(&rule, &small, &allow),
        Err(FetchError::Network(_))
    ));

    let silent = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = silent.local_addr().unwrap().to_string();
    std::thread::spawn(move || {
        let held: Vec<_> = silent.incoming().take(1).collect();
        std::thread::sleep(Duration::from_secs(10));
        drop(held);
    });
    let url = url::Url::parse(&format!("http://{addr}/p")).unwrap();
    let quick = UreqClient::new(Duration::from_millis(300), 512);
    let started = Instant::now();
    assert!(matches!(quick.get(&url), Err(FetchError::Network(_))));
    assert!(started.elapsed() < Duration::from_secs(5));
}

#[test]
fn unchanged_evaluations_share_a_version() {
    let dir = tempfile::tempdir().unwrap();
    let repo = repo_with_shop(dir.path());
    let stub = Stub::start(r#"{"price":"12.50"}"#);
    let evaluator = Evaluator::new(
        repo.clone(),
        Arc::new(client()),
        Allowlist::new([stub.addr.as_str()]),
    );
    let source = shop_service(&stub, r#"json_pointer "/price""#, "5m");

    let mut versions = Vec::new();
    for _ in 0..3 {
        match evaluator.evaluate("widget", &source).unwrap() {
            Outcome::Committed {
                committed,
                warnings,
            } => {
                assert!(warnings.is_empty(), "{warnings:?}");
                versions.push(committed.version);
            }
            Outcome::Rejected(e) => panic!("{e:?}"),
        }
    }
    assert_eq!(versions, [1, 1, 1]);
    assert_eq!(repo.store().version_numbers("widget").unwrap(), [1]);
    let latest = repo.get_service("widget", None).unwrap().to_text();
    assert!(latest.contains("12.50"), "{latest}");

    stub.set(r#"{"price":"13.00"}"#);
    let Outcome::Committed { committed, .. } = evaluator.evaluate("widget", &source).unwrap()
    else {
        panic!("rejected");
    };
    assert_eq!((committed.version, committed.changed), (2, true));
    assert_eq!(repo.store().version_numbers("widget").unwrap(), [1, 2]);
    assert!(repo
        .get_service("widget", Some(1))
        .unwrap()
        .to_text()
        .contains("12.50"));

    stub.set_status(500);
    let Outcome::Committed {
        committed,
        warnings,
    } = evaluator.evaluate("widget", &source).unwrap()
    else {
        panic!("rejected");
    };
    assert_eq!(
        committed.version, 3,
        "the static value comes back when a fetch fails"
    );
    assert!(warnings[0].contains("status 500"), "{warnings:?}");

    stub.set_status(200);
    stub.set(r#"{"price":"cheap"}"#);
    let Outcome::Committed {
        committed,
        warnings,
    } = evaluator.evaluate("widget", &source).unwrap()
    else {
        panic!("rejected");
    };
    assert_eq!(committed.version, 3);
    assert!(warnings[0].contains("static value kept"), "{warnings:?}");
}

#[test]
fn invalid_sources_are_rejected_without_a_version() {
    let dir = tempfile::tempdir().unwrap();
    let repo = repo_with_shop(dir.path());
    let evaluator = Evaluator::new(repo.clone(), Arc::new(client()), Allowlist::default());
    let bad = "service widget uses shop {\n    set seats many\n}\n";
    let Outcome::Rejected(errors) = evaluator.evaluate("widget", bad).unwrap() else {
        panic!("accepted");
    };
    assert_eq!(errors[0].line, 2);
    let other = "service gadget uses shop {\n    set seats 1\n}\n";
    assert!(matches!(
        evaluator.evaluate("widget", other).unwrap(),
        Outcome::Rejected(_)
    ));
    let unknown = "service widget uses nothing {\n    set seats 1\n}\n";
    assert!(matches!(
        evaluator.evaluate("widget", unknown).unwrap(),
        Outcome::Rejected(_)
    ));
    assert!(repo.store().version_numbers("widget").unwrap().is_empty());
}

#[test]
fn jobs_for_one_service_run_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let repo = repo_with_shop(dir.path());
    let evaluator = Arc::new(Evaluator::new(
        repo.clone(),
        Arc::new(client()),
        Allowlist::default(),
    ));
    let jobs = JobQueue::start(evaluator, 4);
    let submitted: Vec<_> = (1..=6)
        .map(|seats| {
            jobs.submit(
                "widget",
                format!("service widget uses shop {{\n    set seats {seats}\n}}\n"),
            )
        })
        .collect();
    let finished: Vec<_> = submitted
        .iter()
        .map(|j| jobs.wait(&j.job_id, Duration::from_secs(30)).unwrap())
        .collect();
    for (i, job) in finished.iter().enumerate() {
        assert_eq!(job.state, JobState::Succeeded, "{job:?}");
        assert_eq!(job.version, Some(i as u64 + 1));
    }
    let latest = repo.get_service("widget", None).unwrap().to_text();
    assert!(latest.contains("set seats 6"), "{latest}");
    jobs.shutdown();
}

#[test]
fn refresh_follows_the_fetch_interval() {
    let dir = tempfile::tempdir().unwrap();
    let repo = repo_with_shop(dir.path());
    let stub = Stub::start(r#"{"price":"12.50"}"#);
    let evaluator = Evaluator::new(
        repo.clone(),
        Arc::new(client()),
        Allowlist::new([stub.addr.as_str()]),
    );
    let source = shop_service(&stub, r#"json_pointer "/price""#, "5m");
    assert!(matches!(
        evaluator.evaluate("widget", &source).unwrap(),
        Outcome::Committed { .. }
    ));
    assert_eq!(repo.scheduled().get("widget"), Some(&300));

    let mut scheduler = Scheduler::new(42);
    let mut runs = Vec::new();
    let mut now = 0.0;
    while now <= 700.0 {
        scheduler.reconcile(&repo.scheduled(), now);
        for id in scheduler.due(now) {
            evaluator
                .evaluate(&id, &repo.latest_source(&id).unwrap())
                .unwrap();
            runs.push(now);
        }
        now += 1.0;
    }
    assert!(runs.len() >= 2, "{runs:?}");
    assert!(runs.windows(2).all(|w| w[1] - w[0] <= 300.0), "{runs:?}");
    assert_eq!(stub.hits(), runs.len() + 1);

    repo.delete("widget").unwrap();
    scheduler.reconcile(&repo.scheduled(), now);
    assert_eq!(scheduler.next_due("widget"), None);
}

fn corpus_reads() -> Vec<(String, Option<String>)> {
    let mut reads: Vec<(String, Option<String>)> = [
        "/services",
        "/services?vocabulary=cloud_storage&company_jurisdiction=DE,EU",
        "/services?vocabulary=cloud_storage&payment_options=invoice",
        "/facets?vocabulary=cloud_storage",
        "/facets?vocabulary=cloud_storage&datacenter_location=DE",
        "/facets?vocabulary=iaas",
        "/services/securebox",
        "/services/securebox/history",
        "/services/securebox/versions/1",
        "/services/ec2/variants",
        "/services/flexstore/variants",
        "/services/missing",
        "/vocabularies/iaas",
    ]
    .iter()
    .map(|p| (p.to_string(), None))
    .collect();
    let requests = std::fs::read_dir(common::corpus().join("requests")).unwrap();
    let mut requests: Vec<_> = requests.map(|e| e.unwrap().path()).collect();
    requests.sort();
    for path in requests {
        let body = read(&path);
        reads.push(("/match".into(), Some(body.clone())));
        reads.push(("/match?format=jsonl".into(), Some(body)));
    }
    let usage = read(common::corpus().join("usage/storage_150.json"));
    reads.push((
        "/services/flexstore/variants/graduated/quote".into(),
        Some(usage),
    ));
    reads
}

fn fetch(server: &TestServer, path: &str, body: &Option<String>) -> (u16, String) {
    match body {
        Some(b) => post(&server.url(path), b),
        None => get(&server.url(path)),
    }
}

#[test]
fn cache_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let cached = TestServer::start(dir.path(), ServerOptions::default());
    cached.load_corpus();
    let plain = TestServer::start(
        dir.path(),
        ServerOptions {
            cache: false,
            ..ServerOptions::default()
        },
    );
    for (path, body) in corpus_reads() {
        let want = fetch(&plain, &path, &body);
        assert_eq!(fetch(&cached, &path, &body), want, "{path}");
        assert_eq!(fetch(&cached, &path, &body), want, "{path} from cache");
    }

    let before = json(&get(&cached.url("/services/skyvault")).1);
    let source = read(common::corpus().join("services/skyvault.sdl"))
        .replace("set provider", "set provider \"Skyvault Two\"\n    # was");
    let job = cached.put_service("skyvault", &source);
    assert_eq!(job.state, JobState::Succeeded, "{job:?}");
    let after = json(&get(&cached.url("/services/skyvault")).1);
    assert_eq!(after["version"], before["version"].as_u64().unwrap() + 1);
    let list = get(&cached.url("/services")).1;
    assert!(list.contains("Skyvault Two"), "{list}");

    cached.put_vocabulary("shop", SHOP);
    assert_eq!(get(&cached.url("/vocabularies/shop")).0, 200);
    assert_eq!(
        get(&cached.url("/services/skyvault")).1,
        get(&cached.url("/services/skyvault")).1
    );
}
