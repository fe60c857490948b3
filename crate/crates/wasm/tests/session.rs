use insident_wasm::Session;

#[test]
fn round_trip_through_json() {
    let mut s = Session::new(r#"{"n":300,"blobs":3,"anom_frac":0.02,"seed":1}"#).unwrap();
    let p: serde_json::Value = serde_json::from_str(&s.points().unwrap()).unwrap();
    assert_eq!(p["rows"].as_array().unwrap().len(), 300);
    let t: serde_json::Value = serde_json::from_str(&s.train(r#"{"k":3,"seed":0}"#).unwrap()).unwrap();
    assert_eq!(t["centroids"].as_array().unwrap().len(), 3);
    let m: serde_json::Value = serde_json::from_str(&s.summarize(30).unwrap()).unwrap();
    assert_eq!(m["members"].as_array().unwrap().len(), 30);
    let d: serde_json::Value = serde_json::from_str(&s.detect(0).unwrap()).unwrap();
    assert_eq!(d["flagged"].as_array().unwrap().len(), 6);
    assert_eq!(d["recall"], d["f1"]);
}

#[test]
fn same_request_same_answer() {
    let run = || {
        let mut s = Session::new(r#"{"n":500,"blobs":4,"anom_frac":0.02,"contextual":true,"seed":9}"#).unwrap();
        let t = s.train(r#"{"k":4,"seed":2}"#).unwrap();
        (t, s.summarize(50).unwrap(), s.detect(10).unwrap())
    };
    assert_eq!(run(), run());
}
