use std::path::Path;

use lrpulse::export::load_params;
use lrpulse::AnsatzParams;

#[test]
fn shipped_table1_fixture_matches_builtin() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/table1.json");
    assert_eq!(load_params(&path).unwrap(), AnsatzParams::table1());
}
