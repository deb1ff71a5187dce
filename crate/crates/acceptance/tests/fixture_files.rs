//! Committed fixtures must equal what the generators produce. Set
//! `DRS_BLESS=1` to rewrite them.

use drs_acceptance::fixtures::generated_files;
use drs_acceptance::fixtures_dir;

#[test]
fn committed_fixtures_match_generators() {
    let bless = std::env::var_os("DRS_BLESS").is_some();
    for (rel, contents) in generated_files() {
        let path = fixtures_dir().join(&rel);
        if bless {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &contents).unwrap();
            continue;
        }
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{rel}: {e}"));
        assert!(on_disk == contents, "{rel} is stale; rerun with DRS_BLESS=1");
    }
}
