use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use streamk_bench::{loaded_bank, sample_sizes};
use streamk_core::{bank_deserialize, bank_serialize, ProblemSize};

fn bench_query(c: &mut Criterion) {
    let bank = loaded_bank(923);
    let sizes = sample_sizes();

    c.bench_function("bank_query_hit", |b| {
        let size = ProblemSize::new(1, 64, 16).unwrap();
        b.iter(|| black_box(bank.query(black_box(size))))
    });

    c.bench_function("bank_query_mask_sweep", |b| {
        b.iter(|| {
            let mut acc = 0u64;
            for &size in &sizes {
                acc |= bank.query_mask(black_box(size));
            }
            black_box(acc)
        })
    });
}

fn bench_file(c: &mut Criterion) {
    let bank = loaded_bank(923);
    let bytes = bank_serialize(&bank);

    c.bench_function("bank_serialize", |b| {
        b.iter(|| black_box(bank_serialize(&bank)))
    });
    c.bench_function("bank_deserialize", |b| {
        b.iter(|| black_box(bank_deserialize(black_box(&bytes)).unwrap()))
    });
}

criterion_group!(benches, bench_query, bench_file);
criterion_main!(benches);
