macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/examples/",
                stringify!($name),
                ".rs"
            ));
        }

        #[test]
        fn $name() {
            $name::run().expect(concat!(stringify!($name), " should run"));
        }
    };
}

example!(sinkhorn_basics);
example!(class_operators);
example!(proportion_estimation);
example!(label_propagation);
example!(barycentric_mapping);
example!(grid_oracle);
example!(benchmark_sweep);
example!(csv_round_trip);
