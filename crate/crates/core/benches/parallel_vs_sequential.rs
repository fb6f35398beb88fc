use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nlslab::funcalc::{build_contour, fractional_power_batch, ContourOptions};
use nlslab::linop::{assemble_h, discrete_spectrum};
use nlslab::par::Execution;
use nlslab::{closed_form_profile, make_grid, NonlinearitySpec, SpinorField};
use num_complex::Complex64;

fn fractional_power(c: &mut Criterion) {
    let g = make_grid(25.0, 256).unwrap();
    let nl = NonlinearitySpec::pure_power(3.0).unwrap();
    let h = assemble_h(&closed_form_profile(3.0, 2.0, &g).unwrap(), &nl);
    let spectrum = discrete_spectrum(&h).unwrap();
    let s = 1.751;
    let gamma = build_contour(&h, Some(s), 1e-12, Some(&spectrum), ContourOptions::default()).unwrap();
    let xs: Vec<SpinorField> = (0..4)
        .map(|k| {
            let c = k as f64 - 1.5;
            let up = g.xs().iter().map(|x| Complex64::new((-(x - c).powi(2)).exp(), 0.0)).collect();
            let lo = g.xs().iter().map(|x| Complex64::new(0.0, (-(x + c).powi(2)).exp())).collect();
            SpinorField::new(g, up, lo).unwrap()
        })
        .collect();

    let mut group = c.benchmark_group("fractional_power_n256_batch4");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::available())] {
        let gam = gamma.clone().with_execution(exec);
        group.bench_function(name, |b| b.iter(|| fractional_power_batch(&h, s, black_box(&xs), &gam).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, fractional_power);
criterion_main!(benches);
