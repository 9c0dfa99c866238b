use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use dbtrail::config::load_config;
use dbtrail::ingest::load_data_dir;
use dbtrail::service::{router, AppState, RowRef, RowView, SearchResponse, StatsView};
use dbtrail_core::{Engine, RowKey};
use http_body_util::BodyExt;
use tower::ServiceExt;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/dblp")
}

fn state() -> Arc<AppState> {
    let dataset = load_data_dir(&fixture()).unwrap();
    let config = load_config(&fixture().join("engine.toml")).unwrap();
    let engine = Engine::build(&dataset, config).unwrap();
    let schema = dataset.schema().clone();
    Arc::new(AppState { engine, dataset, schema })
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Option<String>, Vec<u8>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let ctype = res.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string());
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, ctype, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    let (s, _, b) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, b)
}

async fn get_json<T: serde::de::DeserializeOwned>(app: &Router, uri: &str) -> T {
    let (status, body) = get(app, uri).await;
    assert_eq!(status, StatusCode::OK, "{uri}: {}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

#[tokio::test]
async fn search_returns_ranked_trails_with_links() {
    let app = router(state());
    let r: SearchResponse = get_json(&app, "/search?q=sergey+anatomy").await;
    assert_eq!(r.query, "sergey anatomy");
    assert_eq!(r.normalized, "sergey anatomy");
    let first = &r.trails[0];
    let keys: Vec<(&str, &[String])> = first.nodes.iter().map(|n| (n.table.as_str(), n.key.as_slice())).collect();
    assert!(keys.contains(&("author", &["2".to_string()][..])));
    assert!(keys.contains(&("publication", &["journals/cn/BrinP98".to_string()][..])));
    assert_eq!(first.terms_matched, ["sergey", "anatomy"]);
    let brin = first.nodes.iter().find(|n| n.table == "author").unwrap();
    assert_eq!(brin.link, "/row/author/2");
    assert_eq!(brin.title, "Sergey Brin");
    assert!(brin.snippet.contains("<b>Sergey</b>"), "{}", brin.snippet);
    let anatomy = first.nodes.iter().find(|n| n.table == "publication").unwrap();
    assert_eq!(anatomy.link, "/row/publication/journals%2Fcn%2FBrinP98");
    assert!(r.total_trails >= r.trails.len());
    assert!(r.timings.total >= 0.0);
}

#[tokio::test]
async fn search_parameters_are_validated() {
    let app = router(state());
    assert_eq!(get(&app, "/search").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/search?q=anatomy&k=0").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/search?q=a%3D").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/search?q=").await.0, StatusCode::BAD_REQUEST);
    let r: SearchResponse = get_json(&app, "/search?q=anatomy&limit=1&k=2&seed=4").await;
    assert_eq!(r.trails.len(), 1);
    let none: SearchResponse = get_json(&app, "/search?q=zzzzqx").await;
    assert!(none.trails.is_empty());
    assert_eq!(none.total_trails, 0);
}

#[tokio::test]
async fn search_is_deterministic_for_a_seed() {
    let app = router(state());
    let a: SearchResponse = get_json(&app, "/search?q=grid+foster&seed=3").await;
    let b: SearchResponse = get_json(&app, "/search?q=grid+foster&seed=3").await;
    assert_eq!(a.trails, b.trails);
}

#[tokio::test]
async fn row_json_has_columns_and_outlinks() {
    let app = router(state());
    let dam: RowView = get_json(&app, "/row/publication/journals%2Fac%2FDam66").await;
    assert_eq!(dam.table, "publication");
    assert_eq!(dam.key, ["journals/ac/Dam66"]);
    assert_eq!(dam.backlinks, "/backlinks/publication/journals%2Fac%2FDam66");
    let present: Vec<&str> = dam.columns.iter().filter(|c| c.value.is_some()).map(|c| c.name.as_str()).collect();
    assert_eq!(present, ["journal", "key", "pages", "title", "type", "url", "volume", "year"]);
    assert!(dam.columns.iter().all(|c| c.link.is_none()));

    let w: RowView = get_json(&app, "/row/writes/2/journals%2Fcn%2FBrinP98").await;
    let links: Vec<Option<&str>> = w.columns.iter().map(|c| c.link.as_deref()).collect();
    assert_eq!(links, [Some("/row/author/2"), Some("/row/publication/journals%2Fcn%2FBrinP98")]);

    let upper: RowView = get_json(&app, "/row/AUTHOR/4").await;
    assert_eq!(upper.table, "author");
    assert_eq!(upper.columns[1].value.as_deref(), Some("Vannevar Bush"));
}

#[tokio::test]
async fn row_xml_is_the_virtual_document() {
    let app = router(state());
    let req = Request::get("/row/publication/journals%2Fac%2FDam66")
        .header(header::ACCEPT, "application/xml")
        .body(Body::empty())
        .unwrap();
    let (status, ctype, body) = send(&app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert!(ctype.unwrap().starts_with("application/xml"));
    let expected = "<PUBLICATION>\n  <row>\n    <JOURNAL>Advances in Computers</JOURNAL>\n    \
<KEY>journals/ac/Dam66</KEY>\n    <PAGES>239-290</PAGES>\n    \
<TITLE>Computer Driven Displays and Their Use in Man/Machine Interaction.</TITLE>\n    \
<TYPE>article</TYPE>\n    <URL>http://dblp.uni-trier.de/db/journals/ac/ac7.html#Dam66</URL>\n    \
<VOLUME>7</VOLUME>\n    <YEAR>1966</YEAR>\n  </row>\n</PUBLICATION>\n";
    assert_eq!(String::from_utf8(body).unwrap(), expected);
}

#[tokio::test]
async fn unknown_rows_are_not_found() {
    let app = router(state());
    for uri in ["/row/author/999", "/row/nosuch/1", "/row/writes/2", "/row/author", "/backlinks/author/999"] {
        assert_eq!(get(&app, uri).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
}

#[tokio::test]
async fn backlinks_list_referencing_rows() {
    let st = state();
    let app = router(st.clone());
    let target = "journals/cn/BrinP98";
    let refs: Vec<RowRef> = get_json(&app, "/backlinks/publication/journals%2Fcn%2FBrinP98").await;
    let got: BTreeSet<RowKey> = refs.iter().map(|r| RowKey::new(r.table.clone(), r.key.clone())).collect();
    let mut expected = BTreeSet::new();
    for (key, row) in st.dataset.scan() {
        let (_, t) = st.schema.table(&row.table).unwrap();
        for fk in &t.foreign_keys {
            let ci = t.column_index(&fk.source_columns[0]).unwrap();
            if fk.target_table == "publication" && row.values[ci].as_deref() == Some(target) {
                expected.insert(key.clone());
            }
        }
    }
    assert_eq!(got, expected);
    assert_eq!(got.len(), 3);
    assert!(refs.iter().all(|r| r.link.starts_with("/row/")));

    let none: Vec<RowRef> =
        get_json(&app, "/backlinks/citation/journals%2Fjasis%2FNyceK89/journals%2Fac%2FDam66").await;
    assert!(none.is_empty());
}

#[tokio::test]
async fn stats_report_counts() {
    let app = router(state());
    let s: StatsView = get_json(&app, "/stats").await;
    assert_eq!((s.nodes, s.edges), (190, 200));
    assert!(s.terms > 0 && s.pairs > 0);
    let rows: Vec<(String, usize)> = s.tables.into_iter().map(|t| (t.name, t.rows)).collect();
    assert_eq!(
        rows,
        [("publication".into(), 50), ("author".into(), 40), ("writes".into(), 80), ("citation".into(), 20)]
    );
}
