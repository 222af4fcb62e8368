//! Subcommand implementations.

use crate::{CliError, ConfigArgs};
use sparktrace_core::bytecode::{compile_program, CompiledProgram};
use sparktrace_core::concolic::{generate as run_generate, Bindings, TestCaseFile};
use sparktrace_core::config::Config;
use sparktrace_core::frontend::{self, ParamType, SourceProgram};
use sparktrace_core::harness::{discover_corpus, run_campaign};
use sparktrace_core::lifter::{build_entry, dump_ir, eval_ir, lift as lift_trace, load_ir};
use sparktrace_core::tracer::{
    baseline_trace, dump_trace, extract_function_instr, load_trace, TraceOptions,
};
use sparktrace_core::util::{decode_str_token, Span};
use sparktrace_core::value::Value;
use serde_json::json;
use std::path::{Path, PathBuf};

type CmdResult = Result<u8, CliError>;

fn build_config(args: &ConfigArgs) -> Result<Config, CliError> {
    let mut config = Config::default();
    if let Some(path) = &args.config {
        config.apply_file(path).map_err(CliError::usage)?;
    }
    let mut set = |key: &str, value: String| -> Result<(), CliError> {
        config.set(key, &value).map_err(CliError::usage)
    };
    if let Some(v) = &args.alphabet {
        set("alphabet", v.clone())?;
    }
    if let Some(v) = args.max_iterations {
        set("max_iterations", v.to_string())?;
    }
    if let Some(v) = args.max_solve_len {
        set("max_solve_len", v.to_string())?;
    }
    if let Some(v) = args.max_seed_len {
        set("max_seed_len", v.to_string())?;
    }
    if let Some(v) = args.seed_count {
        set("seed_count", v.to_string())?;
    }
    if let Some(v) = args.rng_seed {
        set("rng_seed", v.to_string())?;
    }
    if let Some(v) = args.time_budget_ms {
        set("per_function_time_budget_ms", v.to_string())?;
    }
    if let Some(v) = args.trace_op_cap {
        set("trace_op_cap", v.to_string())?;
    }
    if args.zero_timings {
        set("zero_timings", "true".into())?;
    }
    if args.single_symbolic_arg {
        set("symbolize_all_strings", "false".into())?;
    }
    if let Some(dir) = &args.output_dir {
        set("output_dir", dir.to_string_lossy().into_owned())?;
    }
    Ok(config)
}

fn load_program(path: &Path) -> Result<CompiledProgram, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let source = SourceProgram::new(path.to_string_lossy().into_owned(), text);
    let ast = frontend::parse(&source).map_err(|e| CliError::usage(e.to_string()))?;
    compile_program(&ast).map_err(|e| CliError::usage(e.to_string()))
}

fn require_function<'p>(
    program: &'p CompiledProgram,
    name: &str,
) -> Result<&'p sparktrace_core::BytecodeFunction, CliError> {
    program.get(name).ok_or_else(|| {
        let exports: Vec<String> =
            program.exports.iter().map(|e| e.name.clone()).collect();
        CliError::usage(format!(
            "function `{name}` not found; exported functions: {}",
            if exports.is_empty() { "(none)".to_string() } else { exports.join(", ") }
        ))
    })
}

fn parse_cli_value(token: &str) -> Result<Value, CliError> {
    if let Some(rest) = token.strip_prefix("int:") {
        return rest
            .parse()
            .map(Value::Int)
            .map_err(|_| CliError::usage(format!("bad int `{rest}`")));
    }
    if let Some(rest) = token.strip_prefix("bool:") {
        return rest
            .parse()
            .map(Value::Bool)
            .map_err(|_| CliError::usage(format!("bad bool `{rest}`")));
    }
    if token == "null" {
        return Ok(Value::Null);
    }
    if let Some(rest) = token.strip_prefix("str:") {
        return decode_str_token(rest).map(Value::Str).map_err(CliError::usage);
    }
    Ok(Value::Str(token.as_bytes().to_vec()))
}

fn out_dir(config: &Config) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::pipeline(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::pipeline(format!("cannot write {}: {e}", path.display())))
}

fn span_json(span: &Span) -> serde_json::Value {
    json!({"line": span.line, "col": span.col, "len": span.len})
}

pub fn trace(
    file: &Path,
    function: &str,
    arg_tokens: &[String],
    sym: Option<&str>,
    config_args: &ConfigArgs,
) -> CmdResult {
    let config = build_config(config_args)?;
    let program = load_program(file)?;
    let func = require_function(&program, function)?;
    let args: Vec<Value> =
        arg_tokens.iter().map(|t| parse_cli_value(t)).collect::<Result<_, _>>()?;
    let symbolic: Vec<usize> = match sym {
        None => Vec::new(),
        Some(list) => list
            .split(',')
            .filter(|t| !t.is_empty())
            .map(|t| t.trim().parse().map_err(|_| CliError::usage(format!("bad index `{t}`"))))
            .collect::<Result<_, _>>()?,
    };
    let opts = TraceOptions { op_cap: config.trace_op_cap, ..Default::default() };
    let run = baseline_trace(func, &args, &symbolic, &program, &opts)
        .map_err(|e| CliError::pipeline(e.to_string()))?;
    let extracted = extract_function_instr(&run.trace);

    let dir = out_dir(&config)?;
    let raw_path = dir.join(format!("{function}.raw.trace"));
    let extracted_path = dir.join(format!("{function}.trace"));
    write(&raw_path, &dump_trace(&run.trace))?;
    write(&extracted_path, &dump_trace(&extracted))?;
    println!(
        "traced {function}: {} ops ({} after extraction), outcome {}",
        run.trace.ops.len(),
        extracted.ops.len(),
        run.trace.outcome.kind_token()
    );
    println!("wrote {}", raw_path.display());
    println!("wrote {}", extracted_path.display());
    Ok(0)
}

pub fn lift(trace_path: &Path, output: Option<&Path>) -> CmdResult {
    let text = std::fs::read_to_string(trace_path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", trace_path.display())))?;
    let trace = load_trace(&text).map_err(|e| CliError::usage(e.to_string()))?;
    let module =
        build_entry(lift_trace(&trace).map_err(|e| CliError::pipeline(e.to_string()))?);
    let out = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| trace_path.with_extension("sir"));
    write(&out, &dump_ir(&module))?;
    println!(
        "lifted {} micro-ops into {} blocks, {} path assertions",
        trace.ops.len(),
        module.blocks.len(),
        module.assertions().len()
    );
    println!("wrote {}", out.display());
    Ok(0)
}

pub fn replay(module_path: &Path, case_path: &Path) -> CmdResult {
    let module_text = std::fs::read_to_string(module_path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", module_path.display())))?;
    let module = load_ir(&module_text).map_err(|e| CliError::usage(e.to_string()))?;
    let case_text = std::fs::read_to_string(case_path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", case_path.display())))?;
    let case: TestCaseFile =
        serde_json::from_str(&case_text).map_err(|e| CliError::usage(e.to_string()))?;
    let args = case.args_as_values().map_err(CliError::usage)?;

    let mut bindings = Bindings::new();
    for decl in &module.symbol_decls {
        match args.get(decl.param_index) {
            Some(Value::Str(bytes)) => {
                bindings.insert(decl.id, bytes.clone());
            }
            other => {
                return Err(CliError::usage(format!(
                    "test case argument {} for symbol `{}` is {:?}, expected a string",
                    decl.param_index, decl.name, other
                )))
            }
        }
    }

    let (outcome, assertions) =
        eval_ir(&module, &bindings).map_err(|e| CliError::pipeline(e.to_string()))?;
    println!("outcome: {outcome:?}");
    match assertions.iter().position(|&held| !held) {
        None => println!("all assertions hold ({} checked)", assertions.len()),
        Some(first) => println!(
            "first failed assertion index: {first} ({} of {} failed)",
            assertions.iter().filter(|&&h| !h).count(),
            assertions.len()
        ),
    }
    Ok(0)
}

pub fn generate(
    file: &Path,
    function: &str,
    keep_artifacts: bool,
    fail_on_findings: bool,
    config_args: &ConfigArgs,
) -> CmdResult {
    let config = build_config(config_args)?;
    let program = load_program(file)?;
    require_function(&program, function)?;
    let export = program
        .exports
        .iter()
        .find(|e| e.name == function)
        .ok_or_else(|| CliError::usage(format!("function `{function}` is not exported")))?;
    let string_params: Vec<usize> = export
        .param_types
        .iter()
        .enumerate()
        .filter(|(_, t)| **t == ParamType::Str)
        .map(|(i, _)| i)
        .collect();
    if string_params.is_empty() {
        return Err(CliError::usage(format!(
            "function `{function}` has no inferred String parameters to symbolize"
        )));
    }
    let symbolic: Vec<usize> = if config.symbolize_all_strings {
        string_params
    } else {
        vec![string_params[0]]
    };

    let report = run_generate(&program, function, &symbolic, &config)
        .map_err(|e| CliError::pipeline(e.to_string()))?;

    let dir = out_dir(&config)?;
    for case in &report.test_cases {
        let path = dir.join(format!("{function}.tc-{}.tc.json", case.id));
        let body = serde_json::to_string_pretty(&case.to_file())
            .map_err(|e| CliError::pipeline(e.to_string()))?;
        write(&path, &body)?;
    }
    let report_json = json!({
        "function": report.function,
        "iterations": report.iterations,
        "testCases": report.test_cases.len(),
        "uniquePaths": report.unique_paths,
        "exceptions": report.exceptions.iter().map(|e| json!({
            "kind": e.kind,
            "message": e.message,
            "span": span_json(&e.span),
            "testCaseId": e.test_case_id,
        })).collect::<Vec<_>>(),
        "wallTimeMs": report.wall_time_ms,
    });
    let report_path = dir.join(format!("{function}.report.json"));
    write(&report_path, &serde_json::to_string_pretty(&report_json).unwrap())?;

    if keep_artifacts {
        let art = dir.join("artifacts");
        std::fs::create_dir_all(&art)
            .map_err(|e| CliError::pipeline(format!("cannot create artifacts dir: {e}")))?;
        let func = program.get(function).expect("checked above");
        let opts = TraceOptions { op_cap: config.trace_op_cap, ..Default::default() };
        for case in &report.test_cases {
            let run = baseline_trace(func, &case.args, &symbolic, &program, &opts)
                .map_err(|e| CliError::pipeline(e.to_string()))?;
            let extracted = extract_function_instr(&run.trace);
            let module = build_entry(
                lift_trace(&extracted).map_err(|e| CliError::pipeline(e.to_string()))?,
            );
            write(&art.join(format!("{function}.{}.raw.trace", case.id)), &dump_trace(&run.trace))?;
            write(&art.join(format!("{function}.{}.trace", case.id)), &dump_trace(&extracted))?;
            write(&art.join(format!("{function}.{}.sir", case.id)), &dump_ir(&module))?;
        }
    }

    println!(
        "{function}: {} iterations, {} unique paths, {} exceptions",
        report.iterations,
        report.unique_paths,
        report.exceptions.len()
    );
    println!("wrote {}", report_path.display());
    if fail_on_findings && !report.exceptions.is_empty() {
        return Ok(1);
    }
    Ok(0)
}

pub fn campaign(
    corpus: &Path,
    jobs: usize,
    csv: bool,
    fail_on_findings: bool,
    config_args: &ConfigArgs,
) -> CmdResult {
    let config = build_config(config_args)?;
    let manifests = discover_corpus(corpus).map_err(CliError::usage)?;
    let report = run_campaign(&manifests, &config, jobs);

    let dir = out_dir(&config)?;
    let rows_path = dir.join("campaign.json");
    write(&rows_path, &report.rows_json())?;
    let libs_path = dir.join("campaign_libraries.json");
    write(&libs_path, &report.libraries_json())?;
    if csv {
        write(&dir.join("coverage.csv"), &report.coverage_csv())?;
    }

    for lib in &report.libraries {
        println!(
            "{:28} {:6.1}%  ({}/{} statements, {} findings)",
            lib.library,
            lib.coverage_percent,
            lib.statements_covered,
            lib.statements_total,
            lib.findings_total
        );
    }
    for err in &report.errors {
        eprintln!("failed: {}: {}", err.library, err.message);
    }
    println!("wrote {}", rows_path.display());
    println!("wrote {}", libs_path.display());

    if !report.errors.is_empty() {
        return Err(CliError::pipeline(format!(
            "{} of {} libraries failed",
            report.errors.len(),
            manifests.len()
        )));
    }
    if fail_on_findings && report.total_findings() > 0 {
        return Ok(1);
    }
    Ok(0)
}
