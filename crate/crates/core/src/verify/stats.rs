use statrs::function::erf::erfc;

use super::VerifyError;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (denominator `n - 1`).
    pub sd: f64,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        // two-pass keeps the variance accurate for large means
        let mean = xs.iter().sum::<f64>() / n as f64;
        let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        Self { n, mean, sd }
    }

    pub fn se(&self) -> f64 {
        self.sd / (self.n as f64).sqrt()
    }
}

/// `P(Z > z)` for a standard normal `Z`.
pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Pooled two-proportion z statistic for `k1/n1` against `k2/n2`. Zero when both
/// proportions are 0 or both are 1.
pub fn two_proportion_z(k1: u64, n1: u64, k2: u64, n2: u64) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let (p1, p2) = (k1 as f64 / n1f, k2 as f64 / n2f);
    let pooled = (k1 + k2) as f64 / (n1f + n2f);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (p1 - p2) / se
}

/// Two-sample Kolmogorov-Smirnov statistic `D` and its asymptotic p-value.
///
/// Ties across samples are handled by stepping both empirical CDFs past each value
/// together; with ties the asymptotic p-value is conservative.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64), VerifyError> {
    if a.is_empty() || b.is_empty() {
        return Err(VerifyError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let v = if a[i].total_cmp(&b[j]).is_le() { a[i] } else { b[j] };
        while i < na && a[i] == v {
            i += 1;
        }
        while j < nb && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, kolmogorov_q(lambda)))
}

/// `Q(λ) = 2 Σ_{j≥1} (-1)^{j-1} exp(-2j²λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_samples() {
        let xs = [0.3, -1.0, 2.0, 0.3];
        let (d, p) = ks_two_sample(&xs, &xs).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
        assert!(ks_two_sample(&[], &xs).is_err());
    }

    #[test]
    fn disjoint_samples_have_unit_distance() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..50).map(|i| 100.0 + i as f64).collect();
        let (d, p) = ks_two_sample(&a, &b).unwrap();
        assert_eq!(d, 1.0);
        assert!(p < 1e-10);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.0098 (classic critical values)
        assert_relative_eq!(kolmogorov_q(1.3581), 0.05, max_relative = 2e-3);
        assert_relative_eq!(kolmogorov_q(1.6276), 0.01, max_relative = 5e-3);
    }

    #[test]
    fn normal_tail_and_z() {
        assert_relative_eq!(normal_upper_tail(0.0), 0.5);
        assert_relative_eq!(normal_upper_tail(2.326_347_874), 0.01, max_relative = 1e-8);
        assert_eq!(two_proportion_z(0, 10, 0, 10), 0.0);
        let z = two_proportion_z(60, 100, 40, 100);
        assert_relative_eq!(z, 0.2 / (0.25f64 * 0.02).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn mean_se() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(m.mean, 2.5);
        assert_relative_eq!(m.sd, (5.0f64 / 3.0).sqrt());
        assert_relative_eq!(m.se(), (5.0f64 / 3.0).sqrt() / 2.0);
    }
}
