use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cobb::io::encode_png;
use cobb::service::{router, AppState, Store};
use cobb_core::phantom::SpinePhantom;
use cobb_core::{GrayImage, NoiseSpec};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const LIMIT: usize = 1 << 20;

fn app(dir: &std::path::Path) -> Router {
    router(AppState::new(Store::open(dir).unwrap()), LIMIT)
}

async fn call(app: &Router, method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Value) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, serde_json::to_vec(&body).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn roi(r: cobb_core::Rect) -> Value {
    json!({"x": r.x, "y": r.y, "w": r.w, "h": r.h})
}

async fn upload(app: &Router, bytes: Vec<u8>) -> String {
    let (s, b) = call(app, "POST", "/images", bytes).await;
    assert_eq!(s, StatusCode::CREATED);
    serde_json::from_slice::<Value>(&b).unwrap()["image_id"].as_str().unwrap().to_string()
}

async fn session(app: &Router, image_id: &str, observer: &str) -> String {
    let (s, v) = call_json(app, "POST", "/sessions", json!({"image_id": image_id, "observer_id": observer})).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

fn phantom() -> SpinePhantom {
    SpinePhantom::new(10.0, -15.0, NoiseSpec::new(10.0, 42))
}

fn measure_body(ph: &SpinePhantom) -> Value {
    json!({"roi_superior": roi(ph.roi_superior()), "roi_inferior": roi(ph.roi_inferior())})
}

#[tokio::test]
async fn upload_is_content_addressed() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let pgm = b"P5\n2 2\n255\n\x00\xff\x80\x40".to_vec();
    let (s, b) = call(&app, "POST", "/images", pgm.clone()).await;
    assert_eq!(s, StatusCode::CREATED);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["image_id"], cobb::service::store::image_id(&pgm));
    assert_eq!((v["width"].as_u64(), v["height"].as_u64()), (Some(2), Some(2)));
    assert_eq!(upload(&app, pgm.clone()).await, v["image_id"].as_str().unwrap());

    let (s, body) = call(&app, "GET", &format!("/images/{}", v["image_id"].as_str().unwrap()), vec![]).await;
    assert_eq!((s, body), (StatusCode::OK, pgm));
}

#[tokio::test]
async fn bad_uploads_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, b) = call(&app, "POST", "/images", vec![]).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(serde_json::from_slice::<Value>(&b).unwrap()["error"].is_string());
    let (s, _) = call(&app, "POST", "/images", b"P5\n3 3\n255\n\x00".to_vec()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, b) = call(&app, "POST", "/images", vec![0u8; LIMIT + 1]).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    assert!(serde_json::from_slice::<Value>(&b).unwrap()["error"].is_string());
    let (s, _) = call(&app, "GET", "/images/deadbeef", vec![]).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn session_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let image = upload(&app, encode_png(&GrayImage::constant(20, 20, 0.5).unwrap())).await;
    let id = session(&app, &image, "A1").await;
    let (s, v) = call_json(&app, "GET", &format!("/sessions/{id}"), Value::Null).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["session_id"], id);
    assert_eq!(v["image_id"], image);
    assert_eq!(v["observer_id"], "A1");
    assert!(v["created_at"].as_str().unwrap().ends_with('Z'));
    assert_eq!(v["measurements"], json!([]));

    let (s, v) = call_json(&app, "POST", "/sessions", json!({"image_id": "ab12", "observer_id": "A1"})).await;
    assert_eq!((s, v["field"].as_str()), (StatusCode::NOT_FOUND, Some("image_id")));
    let (s, v) = call_json(&app, "POST", "/sessions", json!({"image_id": image})).await;
    assert_eq!((s, v["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("observer_id")));
    let (s, _) = call(&app, "POST", "/sessions", b"{not json".to_vec()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    for bad in ["nope", "..%2F..%2Fetc", "a.b"] {
        let (s, _) = call(&app, "GET", &format!("/sessions/{bad}"), vec![]).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{bad}");
    }
}

#[tokio::test]
async fn measuring_the_phantom() {
    let dir = tempfile::tempdir().unwrap();
    let ph = phantom();
    let id = {
        let app = app(dir.path());
        let image = upload(&app, encode_png(&ph.render())).await;
        let id = session(&app, &image, "A1").await;
        let mut angles = Vec::new();
        for _ in 0..2 {
            let (s, v) = call_json(&app, "POST", &format!("/sessions/{id}/measure"), measure_body(&ph)).await;
            assert_eq!(s, StatusCode::OK, "{v}");
            let cobb = v["cobb_deg"].as_f64().unwrap();
            assert!((cobb - 25.0).abs() <= 2.0, "{cobb}");
            assert_eq!(v["image_id"], image);
            assert_eq!(v["observer_id"], "A1");
            for role in ["superior", "inferior"] {
                for k in ["x1", "y1", "x2", "y2"] {
                    assert!(v["overlay"][role][k].is_f64(), "{role}.{k}");
                }
            }
            angles.push((v["angle_superior"].clone(), v["angle_inferior"].clone(), v["cobb_deg"].clone()));
        }
        assert_eq!(angles[0], angles[1]);
        id
    };
    // A fresh store over the same directory sees both acknowledged measurements.
    let app = app(dir.path());
    let (s, v) = call_json(&app, "GET", &format!("/sessions/{id}"), Value::Null).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["measurements"].as_array().unwrap().len(), 2);
    assert_eq!(v["measurements"][0]["cobb_deg"], v["measurements"][1]["cobb_deg"]);
}

#[tokio::test]
async fn measure_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let ph = phantom();
    let image = upload(&app, encode_png(&ph.render())).await;
    let id = session(&app, &image, "A1").await;
    let uri = format!("/sessions/{id}/measure");

    let (s, _) = call_json(&app, "POST", "/sessions/unknown/measure", measure_body(&ph)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let off = json!({"roi_superior": roi(ph.roi_superior()), "roi_inferior": {"x": 280, "y": 150, "w": 40, "h": 40}});
    let (s, v) = call_json(&app, "POST", &uri, off).await;
    assert_eq!((s, v["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("roi_inferior")), "{v}");

    let negative = json!({"roi_superior": {"x": -3, "y": 0, "w": 40, "h": 40}, "roi_inferior": roi(ph.roi_inferior())});
    let (s, v) = call_json(&app, "POST", &uri, negative).await;
    assert_eq!((s, v["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("roi_superior")));

    let small = json!({"roi_superior": {"x": 0, "y": 0, "w": 15, "h": 40}, "roi_inferior": roi(ph.roi_inferior())});
    let (s, v) = call_json(&app, "POST", &uri, small).await;
    assert_eq!((s, v["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("roi_superior")));

    let missing = json!({"roi_superior": roi(ph.roi_superior())});
    let (s, v) = call_json(&app, "POST", &uri, missing).await;
    assert_eq!((s, v["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("roi_inferior")));

    // A horizontal step on the left, a constant field on the right.
    let pixels = (0..60 * 120).map(|i| match (i % 120, i / 120) {
        (x, _) if x >= 60 => 0.5,
        (_, y) if y < 20 => 0.2,
        _ => 0.8,
    });
    let stepped = GrayImage::new(120, 60, pixels.collect()).unwrap();
    let stepped_id = session(&app, &upload(&app, encode_png(&stepped)).await, "A1").await;
    let flat = json!({"roi_superior": {"x": 0, "y": 0, "w": 50, "h": 40}, "roi_inferior": {"x": 70, "y": 10, "w": 40, "h": 40}});
    let (s, v) = call_json(&app, "POST", &format!("/sessions/{stepped_id}/measure"), flat).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["field"], "roi_inferior");
    assert_eq!(v["error"], "no endplate found (inferior)");

    let bad_cfg = json!({"roi_superior": roi(ph.roi_superior()), "roi_inferior": roi(ph.roi_inferior()), "config": {"nl": {"h": -1.0}}});
    let (s, v) = call_json(&app, "POST", &uri, bad_cfg).await;
    assert_eq!((s, v["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("config")));

    let (s, v) = call_json(&app, "GET", &format!("/sessions/{id}"), Value::Null).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["measurements"], json!([]));
}

#[tokio::test]
async fn config_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let ph = phantom();
    let image = upload(&app, encode_png(&ph.render())).await;
    let id = session(&app, &image, "A1").await;
    let mut body = measure_body(&ph);
    body["config"] = json!({"denoiser": "nlm", "hough": {"theta_resolution": 0.5}});
    let (s, v) = call_json(&app, "POST", &format!("/sessions/{id}/measure"), body).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let theta = v["line_superior"]["theta"].as_f64().unwrap();
    assert_eq!((theta * 2.0).fract(), 0.0);
}

#[tokio::test]
async fn export_lists_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, body) = call(&app, "GET", "/export/observations.csv", vec![]).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(String::from_utf8(body).unwrap(), "image_id,observer_id,session_id,group,method,cobb_deg\n");

    let ph = phantom();
    let image = upload(&app, encode_png(&ph.render())).await;
    for observer in ["A1", "A2"] {
        let id = session(&app, &image, observer).await;
        let (s, _) = call_json(&app, "POST", &format!("/sessions/{id}/measure"), measure_body(&ph)).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, body) = call(&app, "GET", "/export/observations.csv", vec![]).await;
    let obs = cobb::records::read_observations(body.as_slice()).unwrap();
    assert_eq!(obs.records.len(), 2);
    assert_eq!(obs.records[0].image_id, obs.records[1].image_id);
    let mut observers: Vec<&str> = obs.records.iter().map(|o| o.observer_id.as_str()).collect();
    observers.sort();
    assert_eq!(observers, ["A1", "A2"]);
    assert!(obs.records.iter().all(|o| o.group == cobb_core::Group::G2 && o.method == cobb_core::Method::Digital));

    let (_, body) = call(&app, "GET", "/export/observations.csv?group=G2&method=digital", vec![]).await;
    assert_eq!(String::from_utf8(body).unwrap().lines().count(), 3);
    let (_, body) = call(&app, "GET", "/export/observations.csv?method=manual", vec![]).await;
    assert_eq!(String::from_utf8(body).unwrap().lines().count(), 1);
    let (s, b) = call(&app, "GET", "/export/observations.csv?group=G9", vec![]).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(serde_json::from_slice::<Value>(&b).unwrap()["field"], "group");
}
