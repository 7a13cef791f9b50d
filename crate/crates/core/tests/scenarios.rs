use std::path::PathBuf;

use qpchaser::sim::{load_scenario, Mode};

fn shipped() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

#[test]
fn shipped_scenarios_load_and_cover_thirty_seconds() {
    let files = shipped();
    assert_eq!(files.len(), 7);
    let mut dual = 0;
    for f in &files {
        let s = load_scenario(f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        dual += usize::from(s.mode == Mode::Dual);
        for m in &s.moving_objects {
            let last = m.script.last().unwrap().t;
            assert!(last >= 30.0, "{}: script ends at {last}", f.display());
        }
    }
    assert_eq!(dual, 3);
}
