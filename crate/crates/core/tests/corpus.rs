//! Accept/reject corpus for the front end. The first line of every file in
//! `tests/corpus` is `// expect: ok` or `// expect: <error fragment>`.

use std::fs;
use std::path::Path;

use tlv_core::project::{compile_sources, Source};
use tlv_core::sva::LowerOptions;

#[test]
fn corpus() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut paths: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pdvl"))
        .collect();
    paths.sort();
    assert!(paths.len() >= 20);

    let mut failures = Vec::new();
    for path in &paths {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let text = fs::read_to_string(path).unwrap();
        let expect = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("// expect: "))
            .unwrap_or_else(|| panic!("{name}: missing expect line"))
            .to_string();
        let result = compile_sources(&[Source::new(&name, &text)], &LowerOptions::default());
        let ok = match (&result, expect.as_str()) {
            (Ok(_), "ok") => true,
            (Err(e), want) if want != "ok" => e.to_string().contains(want),
            _ => false,
        };
        assert_eq!(name.starts_with("accept_"), expect == "ok", "{name}: name and expectation disagree");
        if !ok {
            let got = match result {
                Ok(_) => "accepted".to_string(),
                Err(e) => e.to_string(),
            };
            failures.push(format!("{name}: expected {expect:?}, got {got:?}"));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
