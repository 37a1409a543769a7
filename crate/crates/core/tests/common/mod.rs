#![allow(dead_code)]

use std::sync::Arc;

use scalesim_core::*;

pub const DEPTH: u32 = 12;

/// Fat-Cantor scale with `ℓ_n = 4^{-n}`, extended by the distance to the set.
pub fn cantor_scale() -> ScaleFunction64 {
    build_cantor_scale(GeneralizedCantorSpec64::quarter(DEPTH), Extension::Distance)
        .unwrap()
        .0
}

/// `(s, m̃)` for the fat-Cantor scale.
pub fn cantor_spec() -> DiffusionSpec64 {
    DiffusionSpec::with_energy_speed(cantor_scale())
}

/// `(s_c, m̃)` for `c ∈ {0, κ/4, κ/2, κ}`, with labels.
pub fn cantor_family() -> Vec<(String, DiffusionSpec64)> {
    let s = cantor_scale();
    let m = SpeedMeasure::energy_of(&s);
    let k = s.singular_mass();
    [(0.0, "0"), (k / 4.0, "κ/4"), (k / 2.0, "κ/2"), (k, "κ")]
        .into_iter()
        .map(|(c, label)| {
            let sc = subspace_scale(&s, c).unwrap();
            (format!("c={label}"), DiffusionSpec::new(sc, m.clone()).unwrap())
        })
        .collect()
}

/// `x + c(x)` with Lebesgue speed, which is `m̃` here.
pub fn staircase_spec() -> DiffusionSpec64 {
    let (s, _) = build_devils_staircase_scale::<f64>(DEPTH + 8).unwrap();
    let m = SpeedMeasure::lebesgue(s.domain());
    DiffusionSpec::new(s, m).unwrap()
}

pub fn orey_spec(b: impl Fn(f64) -> f64 + Send + Sync + 'static) -> DiffusionSpec64 {
    let (s, m) = build_orey_scale(Arc::new(b), 1e-11).unwrap();
    DiffusionSpec::new(s, m).unwrap()
}

pub fn skew_spec(alpha: f64) -> DiffusionSpec64 {
    skew_brownian_spec(alpha).unwrap()
}

/// Seeded Lebesgue probes in `(lo, hi)`.
pub fn probes(lo: f64, hi: f64, n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
}
