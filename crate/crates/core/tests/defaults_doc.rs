use mmwave_mfg::config::DEFAULTS;

#[test]
fn defaults_table_lists_every_key() {
    let doc = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/defaults.md")).unwrap();
    for (section, key, value, _) in DEFAULTS {
        let row = format!("| {section} | `{key}` | `{value}` |");
        assert!(doc.contains(&row), "docs/defaults.md lacks {row}");
    }
}

#[test]
fn empty_document_resolves_to_defaults() {
    let s = mmwave_mfg::parse_scenario("").unwrap();
    assert_eq!(s, mmwave_mfg::Scenario::default());
    let again = mmwave_mfg::parse_scenario(&s.to_toml()).unwrap();
    assert_eq!(again.hash(), s.hash());
}
