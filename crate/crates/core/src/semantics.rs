//! Operator and string-member semantics shared by the reference
//! interpreter and the baseline tracer. Keeping both tiers on one table is
//! what makes the mirroring invariant hold by construction rather than by
//! luck.
//!
//! Semantics in brief: integers are 64-bit two's complement with wrapping
//! arithmetic; `+` concatenates when both operands are strings; `==` on
//! mixed tags is `false` with no coercion; relational operators accept two
//! integers or two strings (byte-lexicographic); out-of-range `charAt`
//! yields `""` and out-of-range `charCodeAt` yields `-1`; division or
//! modulo by zero throws a catchable `RangeError`.

use crate::value::{Value, MAX_STRING_LEN};

/// Error messages, stable across tiers.
pub mod msg {
    pub fn null_member() -> String {
        "TypeError: cannot read properties of null".into()
    }
    pub fn member_on(member: &str, ty: &str) -> String {
        format!("TypeError: {member} on {ty}")
    }
    pub fn index_not_int(member: &str) -> String {
        format!("TypeError: {member} index must be an integer")
    }
    pub fn arg_not_string(member: &str) -> String {
        format!("TypeError: {member} argument must be a string")
    }
    pub fn bad_add(t1: &str, t2: &str) -> String {
        format!("TypeError: cannot add {t1} and {t2}")
    }
    pub fn bad_arith(op: &str, t1: &str, t2: &str) -> String {
        format!("TypeError: cannot {op} {t1} and {t2}")
    }
    pub fn bad_neg(t: &str) -> String {
        format!("TypeError: cannot negate {t}")
    }
    pub fn bad_compare(t1: &str, t2: &str) -> String {
        format!("TypeError: cannot compare {t1} and {t2}")
    }
    pub fn div_zero() -> String {
        "RangeError: division by zero".into()
    }
    pub fn mod_zero() -> String {
        "RangeError: modulo by zero".into()
    }
    pub fn throw_non_string() -> String {
        "TypeError: thrown value must be a string".into()
    }
    pub fn string_too_long() -> String {
        "RangeError: string too long".into()
    }
    pub fn call_depth() -> String {
        "RangeError: maximum call depth exceeded".into()
    }
    pub fn not_a_function(name: &str) -> String {
        format!("TypeError: {name} is not a function")
    }
}

/// `Err` carries a thrown message.
pub type SemResult = Result<Value, String>;

pub fn add(l: &Value, r: &Value) -> SemResult {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => Ok(Value::Int(a.wrapping_add(*b))),
        (Value::Str(a), Value::Str(b)) => {
            if a.len() + b.len() > MAX_STRING_LEN {
                return Err(msg::string_too_long());
            }
            let mut s = a.clone();
            s.extend_from_slice(b);
            Ok(Value::Str(s))
        }
        _ => Err(msg::bad_add(l.type_name(), r.type_name())),
    }
}

pub fn arith(op: &str, l: &Value, r: &Value) -> SemResult {
    let (a, b) = match (l, r) {
        (Value::Int(a), Value::Int(b)) => (*a, *b),
        _ => return Err(msg::bad_arith(op, l.type_name(), r.type_name())),
    };
    Ok(Value::Int(match op {
        "sub" => a.wrapping_sub(b),
        "mul" => a.wrapping_mul(b),
        "div" => {
            if b == 0 {
                return Err(msg::div_zero());
            }
            a.wrapping_div(b)
        }
        "mod" => {
            if b == 0 {
                return Err(msg::mod_zero());
            }
            a.wrapping_rem(b)
        }
        other => unreachable!("arith {other}"),
    }))
}

pub fn neg(v: &Value) -> SemResult {
    match v {
        Value::Int(n) => Ok(Value::Int(n.wrapping_neg())),
        _ => Err(msg::bad_neg(v.type_name())),
    }
}

/// `==`: same-tag comparison, mixed tags are plain `false`.
pub fn equals(l: &Value, r: &Value) -> bool {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => a == b,
        (Value::Str(a), Value::Str(b)) => a == b,
        (Value::Bool(a), Value::Bool(b)) => a == b,
        (Value::Null, Value::Null) => true,
        _ => false,
    }
}

pub fn less(l: &Value, r: &Value, or_equal: bool) -> SemResult {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => {
            Ok(Value::Bool(if or_equal { a <= b } else { a < b }))
        }
        (Value::Str(a), Value::Str(b)) => Ok(Value::Bool(if or_equal { a <= b } else { a < b })),
        _ => Err(msg::bad_compare(l.type_name(), r.type_name())),
    }
}

pub fn char_at(s: &[u8], i: i64) -> Vec<u8> {
    if i >= 0 && (i as usize) < s.len() {
        vec![s[i as usize]]
    } else {
        Vec::new()
    }
}

pub fn char_code_at(s: &[u8], i: i64) -> i64 {
    if i >= 0 && (i as usize) < s.len() {
        s[i as usize] as i64
    } else {
        -1
    }
}

pub fn index_of(haystack: &[u8], needle: &[u8]) -> i64 {
    if needle.is_empty() {
        return 0;
    }
    if needle.len() > haystack.len() {
        return -1;
    }
    for start in 0..=(haystack.len() - needle.len()) {
        if &haystack[start..start + needle.len()] == needle {
            return start as i64;
        }
    }
    -1
}

/// Clamp substring bounds: each endpoint into `[0, len]`, swapped when
/// start exceeds end.
pub fn substring_bounds(len: usize, a: i64, b: i64) -> (usize, usize) {
    let clamp = |x: i64| -> usize { x.clamp(0, len as i64) as usize };
    let (lo, hi) = (clamp(a), clamp(b));
    if lo <= hi {
        (lo, hi)
    } else {
        (hi, lo)
    }
}

pub fn substring(s: &[u8], a: i64, b: i64) -> Vec<u8> {
    let (lo, hi) = substring_bounds(s.len(), a, b);
    s[lo..hi].to_vec()
}
