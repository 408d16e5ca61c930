//! The checked-in demo data is exactly what the toy generator produces.

use std::path::Path;

use csforge::toy::{write_demo_fixtures, DEMO_SEED};

#[test]
fn demo_files_match_generator() {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo");
    let tmp = tempfile::tempdir().unwrap();
    write_demo_fixtures(tmp.path(), DEMO_SEED).unwrap();
    let mut n = 0;
    for entry in std::fs::read_dir(tmp.path()).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap();
        let want = std::fs::read(&p).unwrap();
        let got = std::fs::read(demo.join(name)).unwrap_or_else(|e| panic!("{name:?}: {e}"));
        assert!(got == want, "{name:?} differs; regenerate with the make_demo example");
        n += 1;
    }
    assert!(n >= 10);
}
