//! Per-stage and whole-iteration benchmarks: capture, extraction,
//! lifting, replay, and constraint solving, plus one end-to-end concolic
//! iteration. The last one is the number the iteration-speed acceptance
//! criterion caps at one second.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use sparktrace_bench::scanner_program;
use sparktrace_core::concolic::{negate_and_solve, symbolic_replay, Bindings, SolverConfig};
use sparktrace_core::lifter::{build_entry, eval_ir, lift};
use sparktrace_core::tracer::{baseline_trace, extract_function_instr, TraceOptions};
use sparktrace_core::value::Value;

fn input() -> Vec<Value> {
    vec![Value::str_from("abcdXbca")]
}

fn bindings() -> Bindings {
    [(0u32, b"abcdXbca".to_vec())].into_iter().collect()
}

fn bench_stages(c: &mut Criterion) {
    let program = scanner_program();
    let func = program.get("scan").unwrap();
    let opts = TraceOptions::default();

    c.bench_function("trace_capture", |b| {
        b.iter(|| {
            baseline_trace(func, black_box(&input()), &[0], &program, &opts).unwrap()
        })
    });

    let run = baseline_trace(func, &input(), &[0], &program, &opts).unwrap();
    c.bench_function("extract", |b| b.iter(|| extract_function_instr(black_box(&run.trace))));

    let extracted = extract_function_instr(&run.trace);
    c.bench_function("lift_and_entry", |b| {
        b.iter(|| build_entry(lift(black_box(&extracted)).unwrap()))
    });

    let module = build_entry(lift(&extracted).unwrap());
    c.bench_function("eval_replay", |b| {
        b.iter(|| eval_ir(black_box(&module), &bindings()).unwrap())
    });

    let (_, pc) = symbolic_replay(&module, &bindings()).unwrap();
    let solver = SolverConfig::default();
    let negatable: Vec<usize> =
        (0..pc.len()).filter(|&k| !pc[k].expr.is_const()).collect();
    c.bench_function("negate_and_solve_all", |b| {
        b.iter(|| {
            for &k in &negatable {
                black_box(negate_and_solve(
                    &pc,
                    k,
                    &extracted.symbol_table,
                    &bindings(),
                    &solver,
                ));
            }
        })
    });

    c.bench_function("full_iteration", |b| {
        b.iter(|| {
            let run =
                baseline_trace(func, black_box(&input()), &[0], &program, &opts).unwrap();
            let extracted = extract_function_instr(&run.trace);
            let module = build_entry(lift(&extracted).unwrap());
            let (_, pc) = symbolic_replay(&module, &bindings()).unwrap();
            for k in 0..pc.len() {
                if !pc[k].expr.is_const() {
                    black_box(negate_and_solve(
                        &pc,
                        k,
                        &extracted.symbol_table,
                        &bindings(),
                        &solver,
                    ));
                }
            }
        })
    });
}

criterion_group!(benches, bench_stages);
criterion_main!(benches);
