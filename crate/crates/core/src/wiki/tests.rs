use std::fs;
use std::sync::Arc;

use chrono::TimeZone;
use serde_json::json;

use super::*;
use crate::clock::ManualClock;
use crate::transport::{Method, OfflineTransport, RecordedTransport, Recording};

fn plan(dir: &Path) -> CrawlPlan {
    CrawlPlan::new(vec!["Renewable energy".into()], dir).unwrap()
}

fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2024, 6, 1, 12, 0, 0).unwrap()))
}

fn page(title: &str, extract: &str, links: &[&str]) -> Value {
    json!({
        "batchcomplete": true,
        "query": {"pages": [{
            "pageid": 1, "ns": 0, "title": title,
            "fullurl": format!("https://en.wikipedia.org/wiki/{}", title.replace(' ', "_")),
            "extract": extract,
            "links": links.iter().map(|l| json!({"ns": 0, "title": l})).collect::<Vec<_>>(),
        }]}
    })
}

fn rec(client: &WikiClient, title: &str, cont: Option<&str>, response: Value) -> Recording {
    Recording { method: Method::Get, url: client.query_url(title, cont), request_body: None, status: 200, response }
}

fn client_with(
    dir: &Path,
    clock: Arc<ManualClock>,
    build: impl FnOnce(&WikiClient) -> Vec<Recording>,
) -> (WikiClient, Arc<RecordedTransport>) {
    let probe = WikiClient::new(plan(dir), Arc::new(OfflineTransport::new()), clock.clone());
    let transport = Arc::new(RecordedTransport::new(build(&probe)));
    (WikiClient::new(plan(dir), transport.clone(), clock), transport)
}

#[test]
fn fetch_then_cache_hit() {
    let dir = tempfile::tempdir().unwrap();
    let clock = clock();
    let (client, transport) = client_with(dir.path(), clock.clone(), |c| {
        vec![rec(
            c,
            "Renewable energy",
            None,
            page(
                "Renewable energy",
                "Energy from renewable sources.\n\n== References ==\nx",
                &["Hydropower", "Category:Energy", "Hydropower", "Renewable energy"],
            ),
        )]
    });
    let a = client.fetch_page("Renewable energy").unwrap();
    assert_eq!(a.plain_text, "Energy from renewable sources.");
    assert_eq!(a.links, vec!["Hydropower", "Category:Energy"]);
    assert_eq!(a.url, "https://en.wikipedia.org/wiki/Renewable_energy");
    clock.advance(Duration::from_secs(3600));
    let b = client.fetch_page("renewable  Energy").unwrap();
    assert_eq!(a, b, "cache hit keeps the original retrieved_at");
    assert_eq!(transport.request_count(), 1);
    assert_eq!(client.cache_hits(), 1);
    assert_eq!(client.expand_links("Renewable energy").unwrap(), vec!["Hydropower"]);
}

#[test]
fn continuation_merges_links() {
    let dir = tempfile::tempdir().unwrap();
    let (client, transport) = client_with(dir.path(), clock(), |c| {
        let mut first = page("Solar power", "Sun.", &["A", "B"]);
        first["continue"] = json!({"plcontinue": "1|0|C", "continue": "||"});
        let mut second = page("Solar power", "Sun.", &["C", "A"]);
        second["query"]["pages"][0].as_object_mut().unwrap().remove("extract");
        vec![rec(c, "Solar power", None, first), rec(c, "Solar power", Some("1|0|C"), second)]
    });
    let doc = client.fetch_page("Solar power").unwrap();
    assert_eq!(doc.links, vec!["A", "B", "C"]);
    assert_eq!(transport.request_count(), 2);
    let starts = client.limiter().starts();
    assert!(starts[1].1 - starts[0].1 >= MIN_REQUEST_INTERVAL);
}

#[test]
fn missing_disambiguation_and_empty() {
    let dir = tempfile::tempdir().unwrap();
    let (client, _) = client_with(dir.path(), clock(), |c| {
        let mut dab = page("Mercury", "Mercury may refer to:", &["Mercury (planet)", "Mercury (element)"]);
        dab["query"]["pages"][0]["pageprops"] = json!({"disambiguation": ""});
        vec![
            rec(c, "Nope", None, json!({"query": {"pages": [{"ns": 0, "title": "Nope", "missing": true}]}})),
            rec(c, "Mercury", None, dab),
        ]
    });
    assert!(matches!(client.fetch_page("Nope"), Err(WikiError::NotFound(t)) if t == "Nope"));
    match client.fetch_page("Mercury") {
        Err(WikiError::Disambiguation { title, options }) => {
            assert_eq!(title, "Mercury");
            assert_eq!(options.len(), 2);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(client.fetch_page("  "), Err(WikiError::EmptyTitle)));
}

#[test]
fn offline_miss_is_forbidden() {
    let dir = tempfile::tempdir().unwrap();
    let offline = Arc::new(OfflineTransport::new());
    let client = WikiClient::new(plan(dir.path()), offline.clone(), clock());
    let err = client.fetch_page("Wind power").unwrap_err();
    assert!(err.is_network_forbidden(), "{err}");
    assert_eq!(offline.attempts(), 1, "no retries on forbidden access");
}

#[test]
fn link_cap_preserves_order() {
    let links: Vec<String> = (0..500).map(|i| format!("Topic {i}")).collect();
    let doc = PageDocument {
        title: "Seed".into(),
        url: "https://en.wikipedia.org/wiki/Seed".into(),
        plain_text: "x".into(),
        links: links.clone(),
        retrieved_at: Utc::now(),
    };
    assert_eq!(filter_links(&doc, 100), links[..100].to_vec());
    let none = PageDocument { links: vec![], ..doc };
    assert!(filter_links(&none, 100).is_empty());
}

#[test]
fn namespace_filter() {
    for t in ["File:Sun.png", "category: Energy", "Help:Contents", "Template:Energy", "Portal:Energy"] {
        assert!(is_excluded_namespace(t), "{t}");
    }
    assert!(!is_excluded_namespace("Star Wars: Episode I"));
}

#[test]
fn corpus_partial_failure_and_warm_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let topics: Vec<String> = ["Wind power", "Solar power", "Nope", "wind power"].map(String::from).to_vec();
    let records = |c: &WikiClient| {
        vec![
            rec(c, "Wind power", None, page("Wind power", "Wind turbines.", &[])),
            rec(c, "Solar power", None, page("Solar power", "Panels.", &[])),
            rec(c, "Nope", None, json!({"query": {"pages": [{"title": "Nope", "missing": true}]}})),
        ]
    };
    let (client, _) = client_with(dir.path(), clock(), records);
    let corpus = build_corpus(&client, &topics).unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(corpus.skipped.len(), 1);
    let first = fs::read(dir.path().join(CORPUS_FILE)).unwrap();

    let offline = Arc::new(OfflineTransport::new());
    let warm = WikiClient::new(plan(dir.path()), offline.clone(), clock());
    let again = build_corpus(&warm, &topics[..2]).unwrap();
    assert_eq!(fs::read(dir.path().join(CORPUS_FILE)).unwrap(), first);
    assert_eq!(again.documents, corpus.documents);
    assert_eq!(offline.attempts(), 0);

    let err = build_corpus(&warm, &["Nope".to_string()]).unwrap_err();
    assert!(matches!(err, WikiError::CorpusEmpty { ref skipped } if skipped.len() == 1));
}

#[test]
fn plan_invariants() {
    assert!(CrawlPlan::new(vec![" ".into()], "/tmp").is_err());
    let p = CrawlPlan::new(vec!["a".into()], "/tmp").unwrap();
    assert!(p.clone().with_request_interval(Duration::from_millis(99)).is_err());
    assert!(p.clone().with_api_base("/w/api.php").is_err());
    assert!(p.with_max_links(0).is_err());
    assert_eq!(article_url(DEFAULT_API_BASE, "Renewable energy"), "https://en.wikipedia.org/wiki/Renewable_energy");
}

#[test]
fn topics_file() {
    assert_eq!(
        read_topics("# seeds\nRenewable energy\n\n  Water  conservation \n"),
        vec!["Renewable energy", "Water conservation"]
    );
}
