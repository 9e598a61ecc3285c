use super::*;
use std::collections::HashSet;
use std::fs;

fn small(kind: SweepKind) -> SweepConfig {
    let mut c = SweepConfig::noise(vec![10.0, 20.0], 3);
    c.l = 40;
    c.k = 20;
    c.sweep_kind = kind;
    c.trials = 6;
    c.master_seed = 7;
    c.algorithms = vec![Algorithm::Iht, Algorithm::Iks];
    if kind == SweepKind::Sparsity {
        c.grid = vec![2.0, 4.0];
        c.sparsity = None;
        c.inv_noise_db = Some(15.0);
    }
    c
}

#[test]
fn one_trial_one_point_one_row() {
    let mut c = small(SweepKind::Noise);
    c.grid = vec![17.0];
    c.trials = 1;
    c.algorithms = vec![Algorithm::Amp];
    let rows = run_sweep(&c).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].trials, 1);
    assert_eq!(rows[0].ser_stderr, 0.0);
    assert_eq!(rows[0].iteration, None);
}

#[test]
fn summary_csv_is_deterministic_and_has_exact_header() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(SweepKind::Noise);
    let mut outputs = Vec::new();
    for (i, workers) in [Some(1), Some(3)].into_iter().enumerate() {
        c.workers = workers;
        c.output = Some(dir.path().join(format!("out{i}.csv")));
        run_sweep(&c).unwrap();
        outputs.push(fs::read(c.output.as_ref().unwrap()).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_HEADER);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "IHT");
    assert_eq!(first[1], "noise");
    assert_eq!(first[3], "");
}

#[test]
fn raw_rows_reaggregate_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [SweepKind::Noise, SweepKind::Sparsity, SweepKind::FlopsTrace] {
        let mut c = small(kind);
        c.output = Some(dir.path().join("summary.csv"));
        c.raw_output = Some(dir.path().join("raw.csv"));
        let rows = run_sweep(&c).unwrap();
        let raw = read_raw(c.raw_output.as_ref().unwrap()).unwrap();
        assert_eq!(aggregate(&raw), rows, "{kind}");
        assert_eq!(read_summary(c.output.as_ref().unwrap()).unwrap(), rows);
    }
}

#[test]
fn trace_rows_cover_every_iteration() {
    let mut c = small(SweepKind::FlopsTrace);
    c.grid = vec![15.0];
    let rows = flops_trace(&c).unwrap();
    assert_eq!(rows.len(), 2 * c.max_iterations);
    for alg in &c.algorithms {
        let mine: Vec<&ResultRow> = rows.iter().filter(|r| r.algorithm == *alg).collect();
        let its: Vec<usize> = mine.iter().map(|r| r.iteration.unwrap()).collect();
        assert_eq!(its, (1..=c.max_iterations).collect::<Vec<_>>());
        assert!(mine.windows(2).all(|w| w[1].flops_mean > w[0].flops_mean));
        assert!(mine.iter().all(|r| (0.0..=1.0).contains(&r.ser_mean)));
    }
    assert!(flops_trace(&small(SweepKind::Noise)).is_err());
}

#[test]
fn paired_instances_and_distinct_streams() {
    let c = small(SweepKind::Noise);
    let a = trial_instance(&c, 1, 3).unwrap();
    let b = trial_instance(&c, 1, 3).unwrap();
    assert_eq!(a.y(), b.y());
    let mut seen = HashSet::new();
    for g in 0..2 {
        for t in 0..6 {
            let inst = trial_instance(&c, g, t).unwrap();
            let key: Vec<u64> = inst.y().iter().map(|v| v.to_bits()).collect();
            assert!(seen.insert(key));
        }
    }
    let raw = simulate(&c).unwrap();
    // All algorithms of one trial share the instance; rows follow
    // grid → trial → algorithm order.
    assert_eq!(raw.len(), 2 * 6 * 2);
    assert_eq!(raw[0].trial, 0);
    assert_eq!(raw[1].trial, 0);
    assert_eq!(raw[1].algorithm, Algorithm::Iks);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = small(SweepKind::Noise);
    let cases: Vec<Box<dyn Fn(&mut SweepConfig)>> = vec![
        Box::new(|c| c.grid.clear()),
        Box::new(|c| c.trials = 0),
        Box::new(|c| c.k = c.l),
        Box::new(|c| c.algorithms.clear()),
        Box::new(|c| c.sparsity = None),
        Box::new(|c| c.workers = Some(0)),
        Box::new(|c| c.alphabet.clear()),
        Box::new(|c| c.max_iterations = 0),
        Box::new(|c| {
            c.sweep_kind = SweepKind::Sparsity;
            c.inv_noise_db = Some(10.0);
            c.grid = vec![2.5];
        }),
        Box::new(|c| {
            c.sweep_kind = SweepKind::Sparsity;
            c.grid = vec![2.0];
        }),
    ];
    for (i, f) in cases.iter().enumerate() {
        let mut c = base.clone();
        f(&mut c);
        assert!(matches!(run_sweep(&c), Err(Error::Config(_))), "case {i}");
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let mut c = small(SweepKind::Noise);
    c.trials = 1;
    c.output = Some("/nonexistent-dir/out.csv".into());
    assert!(matches!(run_sweep(&c), Err(Error::Io { .. })));
}

#[test]
fn stderr_uses_sample_variance() {
    let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    assert_eq!(mean_stderr(&[0.5]), (0.5, 0.0));
}
