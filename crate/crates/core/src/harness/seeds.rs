//! Random seed test cases: lengths uniform over `[0, max_seed_len]`,
//! bytes uniform over the alphabet, reproducible from the RNG seed.

use crate::concolic::{Bindings, Provenance, TestCase};
use crate::value::Value;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[allow(clippy::too_many_arguments)]
pub fn random_seeds(
    function: &str,
    param_count: usize,
    symbolic_params: &[usize],
    n: usize,
    max_seed_len: usize,
    alphabet: &[u8],
    rng_seed: u64,
    first_id: u32,
) -> Vec<TestCase> {
    assert!(n >= 1, "at least one seed");
    assert!(!alphabet.is_empty(), "nonempty alphabet");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let args: Vec<Value> = (0..param_count)
            .map(|_| {
                let len = rng.gen_range(0..=max_seed_len);
                let bytes =
                    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
                Value::Str(bytes)
            })
            .collect();
        let bindings: Bindings = symbolic_params
            .iter()
            .enumerate()
            .filter_map(|(sym, &p)| match args.get(p) {
                Some(Value::Str(b)) => Some((sym as u32, b.clone())),
                _ => None,
            })
            .collect();
        out.push(TestCase {
            id: first_id + i as u32,
            function: function.to_string(),
            generation: 0,
            provenance: Provenance::RandomSeed,
            args,
            bindings,
        });
    }
    out
}
