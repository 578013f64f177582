use std::path::Path;

use decaybound::WeightSpec;
use proptest::prelude::*;

#[test]
fn fuzz_table_seeds_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/weight_table");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let w = WeightSpec::parse_table(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(w.domain().0 < w.domain().1);
        n += 1;
    }
    assert!(n >= 3);
}

proptest! {
    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
        let _ = WeightSpec::parse_table(&text);
    }

    #[test]
    fn written_tables_read_back(values in prop::collection::vec(0.01f64..100.0, 2..40)) {
        let text: String = values.iter().enumerate().map(|(i, v)| format!("{},{v}\n", i as f64 * 0.25)).collect();
        let w = WeightSpec::parse_table(&text).unwrap();
        for (i, v) in values.iter().enumerate() {
            prop_assert!((w.eval(i as f64 * 0.25).unwrap() - v).abs() <= 1e-12 * v);
        }
    }
}
