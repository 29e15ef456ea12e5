pub mod estimates;
pub mod forms;
pub mod holo;
pub mod local;
pub mod monodromy;
pub mod pencil;
pub mod sections;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-part stream so that parts stay reproducible when run alone.
pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub(crate) fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    // NaN propagates so that a broken sample cannot hide behind max
    it.into_iter().fold(0.0, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
}

/// max/min over a list of positive constants.
pub(crate) fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}
