mod common;

use std::sync::Arc;
use std::thread;

use common::{completion, MockServer};
use sea_core::dataset::Element;
use sea_providers::cache::ResponseCache;
use sea_providers::transport::Image;
use sea_providers::{annotate_elements, chat_transport, classifier_transport, classify, ParseStatus, ProviderConfig};

fn config(url: &str) -> ProviderConfig {
    ProviderConfig {
        endpoint_url: url.to_string(),
        model_name: "vlm-test".into(),
        timeout: 5.0,
        max_retries: 2,
        retry_backoff_ms: 0,
        ..Default::default()
    }
}

fn zebra() -> Vec<Element> {
    ["head", "tail"]
        .iter()
        .map(|n| Element {
            id: format!("zebra.{n}"),
            name: n.to_string(),
            optional: false,
            importance_score: None,
            extra: Default::default(),
        })
        .collect()
}

fn image() -> Image {
    Image::new(b"not really a png".to_vec(), "image/png")
}

#[test]
fn annotates_over_http() {
    let server = MockServer::start(|_, _| (200, completion(r#"{"zebra.head": true, "zebra.tail": false}"#)));
    let cfg = config(&server.url);
    let chat = chat_transport(&cfg, None).unwrap();
    let r = annotate_elements("s1", &image(), "zebra", &zebra(), &cfg, chat.as_ref()).unwrap();
    assert_eq!(r.visible_count(), 1);
    assert_eq!(r.parse_status, ParseStatus::Ok);
    let body: serde_json::Value = serde_json::from_str(&server.bodies()[0]).unwrap();
    assert_eq!(body["model"], "vlm-test");
    let url = body["messages"][0]["content"][0]["image_url"]["url"].as_str().unwrap();
    assert!(url.starts_with("data:image/png;base64,"));
}

#[test]
fn retry_budget_over_http() {
    let server = MockServer::start(|_, _| (503, "{}".into()));
    let cfg = config(&server.url);
    let chat = chat_transport(&cfg, None).unwrap();
    assert!(annotate_elements("s1", &image(), "zebra", &zebra(), &cfg, chat.as_ref()).is_err());
    assert_eq!(server.hits(), 3);

    let flaky = MockServer::start(|n, _| {
        if n == 0 {
            (500, "{}".into())
        } else {
            (200, completion(r#"{"zebra.head": false, "zebra.tail": false}"#))
        }
    });
    let cfg = config(&flaky.url);
    let chat = chat_transport(&cfg, None).unwrap();
    assert!(annotate_elements("s1", &image(), "zebra", &zebra(), &cfg, chat.as_ref()).is_ok());
    assert_eq!(flaky.hits(), 2);

    let rejected = MockServer::start(|_, _| (400, r#"{"error": "bad request"}"#.into()));
    let cfg = config(&rejected.url);
    let chat = chat_transport(&cfg, None).unwrap();
    assert!(annotate_elements("s1", &image(), "zebra", &zebra(), &cfg, chat.as_ref()).is_err());
    assert_eq!(rejected.hits(), 1);
}

#[test]
fn cache_avoids_the_network_and_is_transparent() {
    let server = MockServer::start(|_, _| (200, completion(r#"{"zebra.head": true, "zebra.tail": true}"#)));
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::new(dir.path()).unwrap());
    let cfg = config(&server.url);
    let plain = chat_transport(&cfg, None).unwrap();
    let cached = chat_transport(&cfg, Some(cache.clone())).unwrap();

    let direct = annotate_elements("s1", &image(), "zebra", &zebra(), &cfg, plain.as_ref()).unwrap();
    let first = annotate_elements("s1", &image(), "zebra", &zebra(), &cfg, cached.as_ref()).unwrap();
    let second = annotate_elements("s1", &image(), "zebra", &zebra(), &cfg, cached.as_ref()).unwrap();
    assert_eq!(direct, first);
    assert_eq!(first, second);
    assert_eq!(server.hits(), 2);

    let other = ProviderConfig {
        model_name: "another-vlm".into(),
        ..cfg.clone()
    };
    let cached_other = chat_transport(&other, Some(cache)).unwrap();
    annotate_elements("s1", &image(), "zebra", &zebra(), &other, cached_other.as_ref()).unwrap();
    assert_eq!(server.hits(), 3);
}

#[test]
fn concurrent_duplicates_hit_the_network_once() {
    let server = MockServer::start(|_, _| {
        thread::sleep(std::time::Duration::from_millis(100));
        (200, completion(r#"{"zebra.head": true, "zebra.tail": false}"#))
    });
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::new(dir.path()).unwrap());
    let cfg = config(&server.url);
    let chat: Arc<dyn sea_providers::transport::ChatTransport> =
        Arc::from(chat_transport(&cfg, Some(cache)).unwrap());
    let results: Vec<_> = (0..4)
        .map(|_| {
            let (chat, cfg) = (chat.clone(), cfg.clone());
            thread::spawn(move || annotate_elements("s1", &image(), "zebra", &zebra(), &cfg, chat.as_ref()).unwrap())
        })
        .map(|h| h.join().unwrap())
        .collect::<Vec<_>>();
    assert!(results.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(server.hits(), 1);
}

#[test]
fn classifier_over_http() {
    let server = MockServer::start(|_, body| {
        let req: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(req["texts"][0], "a black line drawing of a zebra");
        (200, r#"{"scores": [2.0, 0.0, 0.0]}"#.into())
    });
    let cfg = config(&server.url);
    let clf = classifier_transport(&cfg, None).unwrap();
    let labels: Vec<String> = ["zebra", "cat", "dog"].iter().map(|s| s.to_string()).collect();
    let r = classify("s1", &image(), &labels, "zebra", &cfg, clf.as_ref()).unwrap();
    assert!((r.ground_truth_prob - 0.7869860421615985).abs() < 1e-12);
}
