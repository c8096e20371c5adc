// Every example doubles as a smoke test.

macro_rules! example {
    ($name:ident, $path:literal) => {
        #[test]
        fn $name() {
            #[path = $path]
            #[allow(dead_code)]
            mod inner;
            inner::main().unwrap();
        }
    };
}

example!(charges, "../examples/charges.rs");
example!(curve_pairing, "../examples/curve_pairing.rs");
example!(mollify, "../examples/mollify.rs");
example!(flow_lines, "../examples/flow_lines.rs");
example!(loop_decomposition, "../examples/loop_decomposition.rs");
example!(segment_lift, "../examples/segment_lift.rs");
example!(acceptance_subset, "../examples/acceptance_subset.rs");
