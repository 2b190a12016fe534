use std::path::PathBuf;

use tangle_core::catalog;
use tangle_core::io::read_tangle;
use tangle_core::validation::validate_chain;
use tangle_core::TangentChain;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

type Case = (&'static str, fn() -> TangentChain);

#[test]
fn bundled_closed_tangles_match_the_catalog() {
    let cases: [Case; 5] = [
        ("circle4.json", catalog::circle4),
        ("doubled_circle8.json", catalog::doubled_circle8),
        ("six_link_a.json", catalog::six_link_a),
        ("six_link_b.json", catalog::six_link_b),
        ("regular8.json", catalog::regular8),
    ];
    for (name, expected) in cases {
        let doc = read_tangle(&fixture(name)).unwrap();
        assert!(doc.closed, "{name}");
        let chain = doc.chain().unwrap();
        assert_eq!(chain.vectors(), expected().vectors(), "{name}");
        let r = validate_chain(&chain, true);
        assert_eq!(r.closure_residual, 0.0, "{name}");
    }
}

#[test]
fn bundled_open_tangle_is_exact() {
    let doc = read_tangle(&fixture("open5.json")).unwrap();
    assert!(!doc.closed);
    let r = validate_chain(&doc.chain().unwrap(), false);
    assert_eq!(r.max_norm_deviation, 0.0);
    assert_eq!(r.max_orthogonality_deviation_degrees, 0.0);
}
