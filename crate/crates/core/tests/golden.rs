use std::path::PathBuf;

use loft_core::datagen;
use loft_core::determinize::{determinize, P_MIN};
use loft_core::harness::{self, ExperimentConfig};
use loft_core::learner::learn_operators;
use loft_core::operators::{equivalent_operator_sets, read_deterministic, write_deterministic};
use loft_core::{DeterministicOperator, Domain, DomainId};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/cover_operators.txt")
}

fn learn_cover() -> (Domain, Vec<DeterministicOperator>) {
    let cfg = ExperimentConfig::for_domain(DomainId::Cover);
    let domain = Domain::from_id(cfg.domain, &cfg.domains);
    let data = harness::collect_for_seed(&cfg, &domain, 0).unwrap();
    let learned = learn_operators(&datagen::to_symbolic(&domain, &data), &cfg.learner);
    (domain, determinize(&learned, P_MIN))
}

#[test]
fn cover_operators_match_golden_file() {
    let (domain, ops) = learn_cover();
    let text = write_deterministic(&ops);
    let path = golden_path();
    // LOFT_BLESS=1 regenerates the file
    if std::env::var_os("LOFT_BLESS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let golden = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, golden);
    let parsed = read_deterministic(&golden, domain.spec()).unwrap();
    assert!(equivalent_operator_sets(&parsed, domain.oracle_operators()));
}
