use criterion::{criterion_group, criterion_main, Criterion};
use ncp_core::linalg::{lu_det, pinv_apply};
use ncp_core::{default_start, trace_path, DenseMatrix, Lcp, LcpData, Oligopoly, OligopolyParams, RegionParams, SolverConfig};
use std::hint::black_box;

fn lcp2() -> Lcp {
    Lcp::new(&LcpData::new(vec![vec![2.0, 1.0], vec![1.0, 2.0]], vec![-1.0, -1.0]).unwrap()).unwrap()
}

fn bench_trace(c: &mut Criterion) {
    let rp = RegionParams::default();
    let cfg = SolverConfig::default();

    let p = lcp2();
    let s = default_start(2, &rp).unwrap();
    c.bench_function("trace_lcp_2d", |b| b.iter(|| trace_path(black_box(&p), &s, &cfg, &rp).unwrap()));

    let o = Oligopoly::new(OligopolyParams::five_firm()).unwrap();
    let s = default_start(5, &rp).unwrap();
    c.bench_function("trace_oligopoly_5", |b| b.iter(|| trace_path(black_box(&o), &s, &cfg, &rp).unwrap()));
}

fn bench_linalg(c: &mut Criterion) {
    let n = 22;
    let a = DenseMatrix::new(n, n, (0..n * n).map(|k| ((k * 7919 % 113) as f64 - 56.0) / 17.0 + if k % (n + 1) == 0 { 40.0 } else { 0.0 }).collect()).unwrap();
    c.bench_function("lu_det_22", |b| b.iter(|| lu_det(black_box(&a)).unwrap()));

    let j = DenseMatrix::new(n, n + 1, (0..n * (n + 1)).map(|k| ((k * 31 % 29) as f64 - 14.0) / 5.0 + if k % (n + 2) == 0 { 30.0 } else { 0.0 }).collect()).unwrap();
    let r = vec![1.0; n];
    c.bench_function("pinv_apply_22x23", |b| b.iter(|| pinv_apply(black_box(&j), &r).unwrap()));
}

criterion_group!(benches, bench_trace, bench_linalg);
criterion_main!(benches);
