use std::path::PathBuf;

use cpnet::condenser::{ClipVisionProvider, EmbeddingProvider};
use cpnet::data::Image;
use cpnet::Error;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny_clip")
}

#[derive(serde::Deserialize)]
struct Probe {
    image: Vec<f32>,
    embedding: Vec<f32>,
}

#[test]
fn matches_reference_transformer() {
    let provider = ClipVisionProvider::load(&fixture()).unwrap();
    let probe: Probe =
        serde_json::from_str(&std::fs::read_to_string(fixture().join("probe.json")).unwrap()).unwrap();
    assert_eq!(provider.dim(), 16);
    let image = Image::new(1, 32, 32, probe.image).unwrap();
    let got = provider.embed(&image).unwrap();
    assert_eq!(got.len(), probe.embedding.len());
    let scale = probe.embedding.iter().map(|v| v.abs()).fold(0.0f32, f32::max);
    for (a, b) in got.iter().zip(&probe.embedding) {
        assert!((a - b).abs() <= 1e-4 * scale.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn rgb_and_replicated_gray_inputs_agree() {
    let provider = ClipVisionProvider::load(&fixture()).unwrap();
    let gray = Image::new(1, 32, 32, (0..1024).map(|i| (i % 5) as f32 / 4.0).collect()).unwrap();
    let rgb = Image::new(3, 32, 32, gray.data().repeat(3)).unwrap();
    assert_eq!(provider.embed(&gray).unwrap(), provider.embed(&rgb).unwrap());
}

#[test]
fn larger_inputs_are_resized() {
    let provider = ClipVisionProvider::load(&fixture()).unwrap();
    let v = provider.embed(&Image::zeros(1, 64, 64)).unwrap();
    assert_eq!(v.len(), 16);
    assert!(v.iter().all(|x| x.is_finite()));
}

#[test]
fn missing_weights_are_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    match ClipVisionProvider::load(dir.path()) {
        Err(Error::BackendLoad { backend, .. }) => assert_eq!(backend, "clip_vit"),
        other => panic!("expected a load error, got {other:?}"),
    }
}

#[test]
fn truncated_archive_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture().join("config.json"), dir.path().join("config.json")).unwrap();
    std::fs::write(dir.path().join("model.safetensors"), b"\x10\x00\x00\x00").unwrap();
    assert!(matches!(
        ClipVisionProvider::load(dir.path()),
        Err(Error::BackendLoad { .. })
    ));
}
