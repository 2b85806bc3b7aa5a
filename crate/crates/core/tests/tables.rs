use std::path::PathBuf;

use qudit_core::grover::{mark_sweep, GroverCircuit};
use qudit_core::pulse_table::{Operation, PulseTable};
use qudit_core::synthesis::{infidelity, synthesize, SynthesisConfig, TargetSpec};

fn fixture(name: &str) -> (String, PulseTable) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    let table = PulseTable::parse(&text).unwrap();
    (text, table)
}

#[test]
fn fixtures_round_trip_exactly() {
    for (name, d, rows) in [("table1_d5.csv", 5, 16), ("table2_d8.csv", 8, 27)] {
        let (text, table) = fixture(name);
        assert_eq!(table.d, d);
        assert_eq!(table.rows.len(), rows);
        assert_eq!(PulseTable::parse(&table.to_csv()).unwrap(), table);
        let first_theta = text.lines().nth(1).unwrap().split(',').nth(2).unwrap();
        assert_eq!(table.rows[0].theta, first_theta.parse::<f64>().unwrap());
    }
}

#[test]
fn fixtures_cover_every_operation() {
    for name in ["table1_d5.csv", "table2_d8.csv"] {
        let (_, table) = fixture(name);
        let ops: Vec<Operation> = table.operation_names().iter().map(|n| Operation::parse(n)).collect();
        assert!(ops.contains(&Operation::EqualSuperposition));
        assert!(ops.contains(&Operation::Reflection));
        for k in 0..table.d {
            assert!(ops.contains(&Operation::Mark(k)), "{name}: Mark {k}");
        }
    }
}

#[test]
fn synthesized_rows_survive_csv() {
    let target = TargetSpec::oracle_on_uniform(3, 1).unwrap();
    let cfg = SynthesisConfig { tol: 1e-5, seed: 2, ..Default::default() };
    let r = synthesize(&target, &cfg).unwrap();
    let mut table = PulseTable::new(3);
    table.push_sequence("Mark 1", &r.sequence).unwrap();
    let back = PulseTable::parse(&table.rounded(9).to_csv()).unwrap();
    let seq = back.sequence_for(&Operation::Mark(1)).unwrap();
    assert!((infidelity(&seq, &target).unwrap() - r.infidelity).abs() < 1e-6);
}

#[test]
fn table_circuit_hits_every_mark() {
    let (_, table) = fixture("table1_d5.csv");
    let c = GroverCircuit::from_table(&table, 1).unwrap();
    for o in mark_sweep(&c, None).unwrap() {
        let best = (0..5).max_by(|&a, &b| o.distribution.get(a).total_cmp(&o.distribution.get(b))).unwrap();
        assert_eq!(best, o.marked);
    }
}
