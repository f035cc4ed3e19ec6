#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap::tree_classifier::DecisionTree;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(tree) = DecisionTree::from_text(text) {
        assert_eq!(DecisionTree::from_text(&tree.to_text()).unwrap(), tree);
        let _ = tree.predict(&[0.0; 8]);
    }
});
