//! Regenerates the shipped `.mm` fixtures. Run explicitly when the format
//! changes on purpose:
//!
//! ```text
//! cargo test --test gen_fixtures -- --ignored --nocapture
//! ```
//!
//! then update the hashes in `acceptance.rs`.

use qmm::format::{marginal_set_to_file, to_canonical_bytes};
use qmm::generators::{gen, InstanceKind, InstanceSpec};

#[test]
#[ignore]
fn regenerate_fixtures() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir).unwrap();
    let cases: [(&str, InstanceSpec); 5] = [
        (
            "ghz_chain_n8.mm",
            InstanceSpec::chain(InstanceKind::Ghz, 8, 2, 0),
        ),
        (
            "classical_chain_n8_s7_p01.mm",
            InstanceSpec::chain(InstanceKind::ClassicalChain, 8, 2, 7).with_perturbation(0.01),
        ),
        (
            "cluster_chain_n8.mm",
            InstanceSpec::chain(InstanceKind::ClusterState1d, 8, 2, 0),
        ),
        (
            "product_hex_n3_s4.mm",
            InstanceSpec::hexgrid(InstanceKind::Product, 3, 1, 2, 4),
        ),
        (
            "sequential_hex_n3_s13.mm",
            InstanceSpec::hexgrid(InstanceKind::Sequential, 3, 1, 2, 13),
        ),
    ];
    for (name, spec) in cases {
        let out = gen(&spec).unwrap();
        let bytes = to_canonical_bytes(&marginal_set_to_file(&out.marginals));
        let path = dir.join(name);
        std::fs::write(&path, &bytes).unwrap();
        println!("{name}: {} bytes, sha256 {}", bytes.len(), sha256_hex(&bytes));
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
