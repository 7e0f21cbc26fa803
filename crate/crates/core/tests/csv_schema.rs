use std::path::Path;

use hbws::experiments::{run, to_csv_string, ExperimentConfig, CSV_COLUMNS};

fn fixture() -> ExperimentConfig {
    ExperimentConfig::load(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/small_sweep.toml"),
    )
    .unwrap()
}

/// Drops the trailing wall-time column.
fn without_wall_time(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

/// Keeps the columns that do not depend on floating-point results.
fn structural(csv: &str) -> String {
    let keep = [
        "sweep_var",
        "value",
        "scheme",
        "samples",
        "seed",
        "family_size",
    ];
    let idx: Vec<usize> = keep
        .iter()
        .map(|k| CSV_COLUMNS.iter().position(|c| c == k).unwrap())
        .collect();
    let mut out = String::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv.as_bytes());
    for rec in reader.records() {
        let rec = rec.unwrap();
        let fields: Vec<&str> = idx.iter().map(|&i| &rec[i]).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[test]
fn header_and_rows_match_golden_file() {
    let csv = to_csv_string(&run(&fixture()).unwrap().rows);
    assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
    let golden = include_str!("data/small_sweep.golden");
    assert_eq!(structural(&csv), golden);
}

#[test]
fn rerun_is_identical_except_wall_time() {
    let a = to_csv_string(&run(&fixture()).unwrap().rows);
    let b = to_csv_string(&run(&fixture()).unwrap().rows);
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = fixture();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run(&cfg).unwrap().rows);
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run(&cfg).unwrap().rows);
    assert_eq!(
        without_wall_time(&to_csv_string(&one)),
        without_wall_time(&to_csv_string(&four))
    );
}

#[test]
fn throughput_column_is_mean_times_prelog() {
    for row in run(&fixture()).unwrap().rows {
        let t = row.throughput.unwrap();
        assert!(
            (t - row.mean_bits.unwrap() * row.prelog.unwrap()).abs() <= 1e-12,
            "{row:?}"
        );
    }
}
