use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use szz_bench::{line_pairs, synthetic_source};
use szz_core::classify::scan_functions;
use szz_core::similarity::line_similarity;
use szz_core::szz::lines::{classify_file_lines, code_signature};

fn similarity(c: &mut Criterion) {
    let pairs = line_pairs(256);
    let mut g = c.benchmark_group("line_similarity");
    g.throughput(Throughput::Elements(pairs.len() as u64));
    g.bench_function("256 pairs", |b| {
        b.iter(|| {
            pairs
                .iter()
                .map(|(x, y)| line_similarity(black_box(x), black_box(y)))
                .sum::<f64>()
        })
    });
    g.finish();
}

fn scanning(c: &mut Criterion) {
    let mut g = c.benchmark_group("source_scan");
    for n in [10, 100, 1000] {
        let src = synthetic_source(n);
        g.throughput(Throughput::Bytes(src.len() as u64));
        g.bench_with_input(BenchmarkId::new("scan_functions", n), &src, |b, s| {
            b.iter(|| scan_functions(black_box(s)).unwrap().len())
        });
        g.bench_with_input(BenchmarkId::new("classify_file_lines", n), &src, |b, s| {
            b.iter(|| classify_file_lines(black_box(s)).len())
        });
    }
    g.finish();
}

fn signatures(c: &mut Criterion) {
    let src = synthetic_source(100);
    let lines: Vec<&str> = src.lines().collect();
    c.bench_function("code_signature/1500 lines", |b| {
        b.iter(|| lines.iter().map(|l| code_signature(black_box(l)).len()).sum::<usize>())
    });
}

criterion_group!(benches, similarity, scanning, signatures);
criterion_main!(benches);
