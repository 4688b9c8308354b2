use std::io::Write;

use slrprune::config::{load_config, ConfigError, MethodKind, RunConfig, Sparsity};
use slrprune::error::HarnessError;
use slrprune::experiment::sparsity_budget;
use slrprune_core::{Tensor, WeightSet};

#[test]
fn empty_config_is_all_defaults() {
    assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    assert_eq!(RunConfig::parse("# only a comment\n\n").unwrap(), RunConfig::default());
}

#[test]
fn keys_override_defaults() {
    let cfg = RunConfig::parse("method = admm\nrho = 0.5\nsparsity = 0.8\nseed = 7\n").unwrap();
    assert_eq!(cfg.method, MethodKind::Admm);
    assert_eq!(cfg.rho, 0.5);
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.sparsity, Sparsity::Fractions(vec![0.8]));
}

#[test]
fn schedule_domain_is_enforced() {
    assert!(matches!(RunConfig::parse("M = 0.5"), Err(ConfigError::Invalid { .. })));
    assert!(matches!(RunConfig::parse("r = 1.0"), Err(ConfigError::Invalid { .. })));
    assert!(RunConfig::parse("M = 300\nr = 0.1\ns0 = 0.01").is_ok());
}

#[test]
fn unknown_and_duplicate_keys_are_errors() {
    match RunConfig::parse("rho = 0.1\nlearning_rat = 0.1") {
        Err(ConfigError::UnknownKey { line, key }) => assert_eq!((line, key.as_str()), (2, "learning_rat")),
        other => panic!("expected unknown key, got {other:?}"),
    }
    assert!(matches!(RunConfig::parse("rho = 0.1\nrho = 0.2"), Err(ConfigError::Duplicate { .. })));
    assert!(matches!(RunConfig::parse("rho 0.1"), Err(ConfigError::Syntax { .. })));
    assert!(matches!(RunConfig::parse("budget = 1\nsparsity = 0.5"), Err(ConfigError::Invalid { .. })));
}

#[test]
fn ninety_percent_of_a_hundred_keeps_ten() {
    let w = WeightSet::new(vec![Tensor::zeros(&[10, 10]).unwrap()]);
    let budget = sparsity_budget(&Sparsity::Fractions(vec![0.9]), &w).unwrap();
    assert_eq!(budget.limits(), &[10]);
}

#[test]
fn load_config_reads_files_and_reports_exit_codes() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "outer_iterations = 12\nbudget = 8,16,8").unwrap();
    let cfg = load_config(f.path()).unwrap();
    assert_eq!(cfg.outer_iterations, 12);
    assert_eq!(cfg.sparsity, Sparsity::Limits(vec![8, 16, 8]));

    let err = HarnessError::from(load_config(std::path::Path::new("/nonexistent/x.cfg")).unwrap_err());
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn shipped_configs_parse() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
