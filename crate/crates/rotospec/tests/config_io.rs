//! Scenario-file and results-table contracts: round-trip identity,
//! fixed column order, and CSV/JSON value agreement on real runs.

use proptest::prelude::*;
use rotospec::config::{parse_scenario, serialize_scenario};
use rotospec::harness::{
    builtin, run_scenario_with, NoiseSource, RunOptions, Scenario, SubcarrierTargets, Sweep,
    SweepParameter,
};
use rotospec::report::{render_results, write_results, OutputFormat, ResultRow, CSV_COLUMNS};
use rotospec::signal::{MachineSpec, NoiseSpec, SubcarrierPlan};

fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    let machine = (60.0f64..7000.0, 1i32..4, 0.1f64..2.0).prop_map(|(rpm, charge, gamma)| {
        MachineSpec::from_rpm(rpm, charge)
            .unwrap()
            .with_reflection(gamma)
            .unwrap()
    });
    let noise = prop_oneof![
        Just(Vec::new()),
        (0.0f64..20.0, 0u64..(1 << 62)).prop_map(|(snr_db, rng_seed)| vec![NoiseSource {
            spec: NoiseSpec::Awgn {
                snr_db,
                reference_bandwidth_hz: None,
                rng_seed,
            },
            targets: SubcarrierTargets::All,
        }]),
        (5.0f64..300.0, 0.1f64..4.0, 0.5f64..20.0, 1usize..8).prop_map(
            |(center, bw, power, stride)| vec![NoiseSource {
                spec: NoiseSpec::Narrowband {
                    center_hz: center,
                    bandwidth_hz: bw,
                    power,
                    rng_seed: 3,
                },
                targets: SubcarrierTargets::Stride(stride),
            }]
        ),
    ];
    let sweep = prop_oneof![
        Just(None),
        prop::collection::vec(0.01f64..0.9, 1..5).prop_map(|values| Some(Sweep {
            parameter: SweepParameter::Threshold,
            values,
        })),
        prop::collection::vec(100.0f64..7000.0, 1..5).prop_map(|values| Some(Sweep {
            parameter: SweepParameter::RotationSpeed,
            values,
        })),
    ];
    (
        prop::collection::vec(machine, 1..4),
        1usize..30,
        noise,
        sweep,
        0.001f64..1.0,
        1u32..20,
        0u64..(1 << 62),
    )
        .prop_map(
            |(mut machines, count, noise, sweep, threshold, trials, rng_seed)| {
                // A shared charge is a scenario invariant.
                let charge = machines[0].topological_charge();
                for m in machines.iter_mut() {
                    *m = MachineSpec::from_rpm(m.rpm(), charge)
                        .unwrap()
                        .with_reflection(m.reflection_coefficient())
                        .unwrap();
                }
                let machine_count = machines.len();
                Scenario {
                    name: "generated".into(),
                    machines,
                    plan: SubcarrierPlan::new(count).unwrap(),
                    noise,
                    threshold,
                    machine_count,
                    fine_enabled: true,
                    coarse: Default::default(),
                    sweep,
                    trials,
                    rng_seed,
                }
            },
        )
        .prop_filter("scenario must validate", |s| s.validate().is_ok())
}

proptest! {
    /// parse(serialize(s)) == s, field for field.
    #[test]
    fn scenario_round_trip_is_identity(scenario in scenario_strategy()) {
        let text = serialize_scenario(&scenario).unwrap();
        let parsed = parse_scenario(&text).unwrap();
        prop_assert_eq!(parsed, scenario);
    }
}

#[test]
fn csv_column_order_is_stable() {
    let mut scenario = builtin("single_machine").unwrap();
    scenario.trials = 1;
    let rows = run_scenario_with(
        &scenario,
        &RunOptions {
            record_timing: false,
            ..RunOptions::default()
        },
    )
    .unwrap();
    let bytes = render_results(&rows, OutputFormat::Csv).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(text.lines().count(), 1 + rows.len());
}

#[test]
fn csv_and_json_agree_on_a_real_run() {
    let mut scenario = builtin("snr_sweep").unwrap();
    scenario.trials = 2;
    let rows = run_scenario_with(
        &scenario,
        &RunOptions {
            record_timing: false,
            ..RunOptions::default()
        },
    )
    .unwrap();
    let csv_bytes = render_results(&rows, OutputFormat::Csv).unwrap();
    let json_bytes = render_results(&rows, OutputFormat::Json).unwrap();
    let mut reader = csv::Reader::from_reader(csv_bytes.as_slice());
    let from_csv: Vec<ResultRow> = reader.deserialize().map(|r| r.unwrap()).collect();
    let from_json: Vec<ResultRow> = serde_json::from_slice(&json_bytes).unwrap();
    assert_eq!(from_csv, from_json);
    assert_eq!(from_csv.len(), rows.len());
}

#[test]
fn repeated_writes_are_byte_identical_on_disk() {
    let mut scenario = builtin("three_machines").unwrap();
    scenario.trials = 1;
    let rows = run_scenario_with(
        &scenario,
        &RunOptions {
            record_timing: false,
            ..RunOptions::default()
        },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write_results(&rows, OutputFormat::Csv, &a).unwrap();
    write_results(&rows, OutputFormat::Csv, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn oversized_seeds_cannot_be_serialized() {
    let mut scenario = builtin("single_machine").unwrap();
    scenario.rng_seed = u64::MAX;
    let err = serialize_scenario(&scenario).unwrap_err();
    assert!(err.to_string().contains("rng_seed"), "{err}");
}
