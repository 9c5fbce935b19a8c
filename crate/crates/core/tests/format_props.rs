use nvreadout::dynamics::*;
use nvreadout::nvmodel::PhysicalParams;
use proptest::prelude::*;

fn trajectory() -> impl Strategy<Value = Trajectory> {
    (0usize..3, prop::collection::vec(0u16..50, 1..40), any::<u64>(), prop::collection::vec((0u32..40, -1i8..=1, -1i8..=1), 0..4))
        .prop_map(|(l, counts, seed, flips)| Trajectory {
            counts,
            label: [Label::Dark, Label::Bright0, Label::BrightM1][l],
            flips: flips.into_iter().map(|(repetition, from, to)| FlipRecord { repetition, from, to }).collect(),
            seed,
        })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..30, 2usize..12, any::<u64>()).prop_flat_map(|(reps, n, seed)| {
        prop::collection::vec(trajectory(), n).prop_map(move |mut traces| {
            for t in &mut traces {
                t.counts.resize(reps, 0);
            }
            let classes = ClassCounts {
                dark: traces.iter().filter(|t| t.label == Label::Dark).count(),
                bright0: traces.iter().filter(|t| t.label == Label::Bright0).count(),
                bright_m1: traces.iter().filter(|t| t.label == Label::BrightM1).count(),
            };
            Dataset {
                manifest: DatasetManifest {
                    format_version: FORMAT_VERSION,
                    n_traces: traces.len(),
                    repetitions: reps,
                    classes,
                    params: PhysicalParams::default(),
                    timing: PulseTiming::default(),
                    seed,
                    stream: 0,
                    rng_scheme: RNG_SCHEME.to_string(),
                    truncated_from: None,
                },
                traces,
            }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_round_trip(ds in dataset()) {
        let bytes = encode_dataset(&ds).unwrap();
        let back = decode_dataset(&bytes).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(encode_dataset(&back).unwrap(), bytes);
    }

    #[test]
    fn corrupted_length_is_rejected(ds in dataset(), cut in 1usize..8) {
        let bytes = encode_dataset(&ds).unwrap();
        prop_assert!(decode_dataset(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn truncation_keeps_prefixes(ds in dataset(), n in 1usize..30) {
        let t = ds.truncated(n);
        for (a, b) in t.traces.iter().zip(&ds.traces) {
            prop_assert_eq!(&a.counts[..], &b.counts[..a.counts.len()]);
            prop_assert!(a.flips.iter().all(|f| (f.repetition as usize) < a.counts.len()));
        }
    }
}
