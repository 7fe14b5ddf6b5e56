use aescomp::modelio::{load_model, model_from_json, model_to_json, save_model};
use aescomp_core::svm::train_default;
use aescomp_core::{FeatureMatrix, KernelParams, Label, ProvenanceEntry, SmoConfig, Standardizer, SvmModel, ViewKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Any finite f64, drawn from raw bits so every exponent shows up.
fn finite(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = f64::from_bits(rng.random());
        if v.is_finite() {
            return v;
        }
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> SvmModel {
    let dim = rng.random_range(1..8);
    let n = rng.random_range(0..6);
    let c = rng.random_range(0.01..100.0);
    let sv = FeatureMatrix::new(n, dim, (0..n * dim).map(|_| finite(rng)).collect()).unwrap();
    let coeffs = (0..n)
        .map(|_| {
            let a: f64 = rng.random_range(1e-300..1.0) * c;
            if rng.random() {
                a
            } else {
                -a
            }
        })
        .collect();
    let means = (0..dim).map(|_| finite(rng)).collect();
    let stds = (0..dim).map(|_| f64::from_bits(rng.random::<u64>() >> 2).max(f64::MIN_POSITIVE)).collect();
    let split = rng.random_range(0..=dim);
    let mut prov = vec![ProvenanceEntry { backbone_id: "stub:1:4:8".into(), view: ViewKind::Global, dim: split }];
    if dim > split {
        prov.push(ProvenanceEntry { backbone_id: "places/resnet-50".into(), view: ViewKind::Scene, dim: dim - split });
    }
    prov.retain(|p| p.dim > 0);
    SvmModel::from_parts(
        sv,
        coeffs,
        finite(rng),
        KernelParams::new(rng.random_range(1e-6..1e3)).unwrap(),
        c,
        Standardizer::new(means, stds).unwrap(),
        prov,
        rng.random(),
    )
    .unwrap()
}

#[test]
fn hundred_models_roundtrip_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let m = random_model(&mut rng);
        let text = model_to_json(&m);
        let back = model_from_json(&text).unwrap();
        assert_eq!(back.bias().to_bits(), m.bias().to_bits());
        assert_eq!(back.kernel().gamma().to_bits(), m.kernel().gamma().to_bits());
        assert_eq!(back.c().to_bits(), m.c().to_bits());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.dual_coeffs()), bits(m.dual_coeffs()));
        assert_eq!(bits(back.support_vectors().as_slice()), bits(m.support_vectors().as_slice()));
        assert_eq!(bits(back.standardizer().means()), bits(m.standardizer().means()));
        assert_eq!(bits(back.standardizer().stds()), bits(m.standardizer().stds()));
        assert_eq!(back.provenance(), m.provenance());
        assert_eq!(back.converged(), m.converged());
        assert_eq!(model_to_json(&back), text);
    }
}

fn xor_model() -> SvmModel {
    let x = FeatureMatrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
    let y = [Label::Low, Label::High, Label::High, Label::Low];
    let cfg = SmoConfig { c: 10.0, ..SmoConfig::default() };
    aescomp_core::train_smo(&x, &y, KernelParams::new(1.0).unwrap(), &cfg).unwrap()
}

#[test]
fn xor_model_reloads_and_classifies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("xor.json");
    let m = xor_model();
    save_model(&m, &path).unwrap();
    let back = load_model(&path).unwrap();
    let pts = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let want = [Label::Low, Label::High, Label::High, Label::Low];
    for (p, w) in pts.iter().zip(want) {
        assert_eq!(back.predict_raw(p).unwrap(), w);
        assert_eq!(back.decision_function(p).unwrap().to_bits(), m.decision_function(p).unwrap().to_bits());
    }
    // retraining writes the same bytes
    let again = dir.path().join("xor2.json");
    save_model(&xor_model(), &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn file_layout() {
    let text = model_to_json(&xor_model());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["format_version"], 1);
    assert_eq!(v["label_map"]["+1"], "high");
    assert_eq!(v["label_map"]["-1"], "low");
    for k in ["gamma", "bias", "C", "dual_coeffs", "support_vectors", "standardizer", "provenance", "converged"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
}

fn kind_of(text: &str) -> &'static str {
    model_from_json(text).unwrap_err().kind()
}

#[test]
fn foreign_versions_and_malformed_files_are_format_errors() {
    let good = model_to_json(&xor_model());
    let v999 = good.replacen("\"format_version\":1", "\"format_version\":999", 1);
    assert_ne!(v999, good);
    let err = model_from_json(&v999).unwrap_err();
    assert_eq!(err.kind(), "FormatError");
    assert!(err.to_string().contains("999"));

    assert_eq!(kind_of(""), "FormatError");
    assert_eq!(kind_of("{"), "FormatError");
    assert_eq!(kind_of("[1,2]"), "FormatError");
    assert_eq!(kind_of(&good[..good.len() / 2]), "FormatError");
    assert_eq!(kind_of(&good.replacen("\"high\"", "\"low\"", 1)), "FormatError");
    assert_eq!(kind_of(&good.replacen("\"gamma\":", "\"gamma\":-", 1)), "FormatError");
    let bad_view = r#""provenance":[{"backbone_id":"a","view":"sideways","dim":2}]"#;
    assert!(good.contains(r#""provenance":[]"#));
    assert_eq!(kind_of(&good.replacen(r#""provenance":[]"#, bad_view, 1)), "FormatError");
    let mut v: serde_json::Value = serde_json::from_str(&good).unwrap();
    v["support_vectors"][0].as_array_mut().unwrap().push(1.0.into());
    assert_eq!(kind_of(&v.to_string()), "FormatError");
    let mut v: serde_json::Value = serde_json::from_str(&good).unwrap();
    v["dual_coeffs"][0] = 1e9.into();
    assert_eq!(kind_of(&v.to_string()), "FormatError");
}

#[test]
fn missing_model_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(load_model(&dir.path().join("nope.json")).unwrap_err().kind(), "IoError");
}

#[test]
fn trained_model_with_provenance_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<[f64; 3]> = (0..40).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let y: Vec<Label> = rows.iter().map(|r| Label::from_decision(r[0] + r[1] - 1.0)).collect();
    let m = train_default(&FeatureMatrix::from_rows(&rows).unwrap(), &y, &SmoConfig::default())
        .unwrap()
        .with_provenance(vec![
            ProvenanceEntry { backbone_id: "a".into(), view: ViewKind::Global, dim: 2 },
            ProvenanceEntry { backbone_id: "b".into(), view: ViewKind::Scene, dim: 1 },
        ])
        .unwrap();
    assert_eq!(model_from_json(&model_to_json(&m)).unwrap(), m);
}
