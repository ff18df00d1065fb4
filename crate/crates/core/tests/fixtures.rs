//! The files under `fixtures/` must match what the generators produce.
//! Run `cargo test -p reparam-core --test fixtures -- --ignored` to rewrite them.

use std::path::{Path, PathBuf};

use reparam_core::constraints::enumerate_candidates;
use reparam_core::io::{self, Provenance, VariationDocument};
use reparam_core::synth::{synth_variations, SyntheticSpec};
use reparam_core::{bundled, discovery::VariationSet};

fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// `(file name, contents)` for every shipped fixture.
fn generate() -> Vec<(String, String)> {
    let mut files = Vec::new();
    for (name, m) in bundled::all() {
        files.push((format!("{name}.model"), io::model_to_text(&m).unwrap()));
    }
    let chair = bundled::chair();
    let pool = enumerate_candidates(&chair, &chair.flatten(), 1e-5).unwrap();
    let spec = bundled::chair_spec(&pool).unwrap();
    let out = synth_variations(&chair, &pool, &spec).unwrap();
    let doc = VariationDocument::new(
        &chair,
        Provenance::Synthetic,
        &out.set,
        Some(out.ground_truth),
    )
    .unwrap();
    files.push(("chair.synth.json".into(), io::to_text(&spec).unwrap()));
    files.push(("chair.vars".into(), io::to_text(&doc).unwrap()));
    let parts = VariationDocument::new(
        &chair,
        Provenance::Manual,
        &bundled::chair_part_variations(),
        None,
    )
    .unwrap();
    files.push(("chair_parts.vars".into(), io::to_text(&parts).unwrap()));
    files
}

fn close(a: &VariationSet, b: &VariationSet) -> bool {
    a.labels() == b.labels()
        && a.variations.iter().zip(&b.variations).all(|(u, v)| {
            u.params
                .iter()
                .zip(v.params.iter())
                .all(|(p, q)| (p - q).abs() <= 1e-12 * (1.0 + p.abs()))
        })
}

#[test]
fn shipped_fixtures_match_generators() {
    let chair = bundled::chair();
    for (name, text) in generate() {
        let path = dir().join(&name);
        let shipped =
            std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if name.ends_with(".vars") {
            let a: VariationDocument = io::from_text(&shipped).unwrap();
            let b: VariationDocument = io::from_text(&text).unwrap();
            assert_eq!(a.ground_truth, b.ground_truth, "{name}");
            assert_eq!(a.provenance, b.provenance, "{name}");
            assert!(
                close(&a.into_set(&chair).unwrap(), &b.into_set(&chair).unwrap()),
                "{name}"
            );
        } else if name.ends_with(".synth.json") {
            let a: SyntheticSpec = io::from_text(&shipped).unwrap();
            let b: SyntheticSpec = io::from_text(&text).unwrap();
            assert_eq!(a.ground_truth, b.ground_truth);
            assert_eq!(a.variations.len(), b.variations.len());
            for (u, v) in a.variations.iter().zip(&b.variations) {
                assert_eq!(u.label, v.label);
                assert!(u
                    .offset
                    .iter()
                    .zip(&v.offset)
                    .all(|(p, q)| (p - q).abs() < 1e-12));
            }
        } else {
            assert_eq!(shipped, text, "{name}");
        }
    }
}

#[test]
fn shipped_models_load_and_hash_consistently() {
    for (name, m) in bundled::all() {
        let loaded = io::load_model(&dir().join(format!("{name}.model"))).unwrap();
        assert_eq!(
            io::model_hash(&loaded).unwrap(),
            io::model_hash(&m).unwrap()
        );
    }
}

#[test]
#[ignore = "rewrites fixtures/"]
fn regenerate_fixtures() {
    std::fs::create_dir_all(dir()).unwrap();
    for (name, text) in generate() {
        std::fs::write(dir().join(name), text).unwrap();
    }
}
