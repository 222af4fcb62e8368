//! Fixtures shared by the pipeline benchmarks.

use sparktrace_core::bytecode::{compile_program, CompiledProgram};
use sparktrace_core::frontend::parse_text;

/// A mid-sized string scanner: loops, byte comparisons, substring work.
pub const SCANNER: &str = r#"
function classify(c) {
  if (c < 97) { return 0; }
  if (c > 100) { return 2; }
  return 1;
}

export function scan(s) {
  var low = 0;
  var other = 0;
  for (var i = 0; i < s.length; i = i + 1) {
    var kind = classify(s.charCodeAt(i));
    if (kind == 1) { low = low + 1; } else { other = other + 1; }
  }
  if (low > other) { return s.substring(0, 3).concat("+"); }
  return s.substring(0, 1);
}
"#;

pub fn scanner_program() -> CompiledProgram {
    compile_program(&parse_text(SCANNER).expect("parses")).expect("compiles")
}
