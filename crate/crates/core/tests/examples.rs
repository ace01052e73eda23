//! Runs every cargo example as a test.

macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run_example().unwrap();
        }
    };
}

example!(ingest_and_search);
example!(ontology_rules);
example!(concept_lattice);
example!(life_tracks);
example!(esom_map);
example!(hmm_process);
example!(ck_session);
example!(http_service);
