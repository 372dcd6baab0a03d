//! Annealing schedule a(t), plateau time grid (T_n, a_n) and decreasing
//! step sequences (γ_n, Γ_n, N(t), ϖ).

use std::sync::Mutex;

use crate::error::{Error, Result};

/// Noise schedule a(t) = A · log^{-q}(t+e). The classical cooling law has
/// q = 1/2; the negative-control law uses q = (1+ε)/2 > 1/2.
#[derive(Debug, Clone, Copy)]
pub struct AnnealSchedule {
    pub a_big: f64,
    log_exponent: f64,
}

impl AnnealSchedule {
    /// a(t) = A / √log(t+e), the admissible cooling law.
    pub fn new(a_big: f64) -> Result<Self> {
        if a_big <= 0.0 {
            return Err(Error::InvalidParameter(format!("A must be > 0, got {a_big}")));
        }
        Ok(Self { a_big, log_exponent: 0.5 })
    }

    /// a(t) = A · log^{-(1+ε)/2}(t+e); cools too fast to concentrate on
    /// the global minimum, used as a negative control.
    pub fn negative_control(a_big: f64, eps: f64) -> Result<Self> {
        if a_big <= 0.0 || eps <= 0.0 {
            return Err(Error::InvalidParameter("A and ε must be > 0".into()));
        }
        Ok(Self { a_big, log_exponent: (1.0 + eps) / 2.0 })
    }

    pub fn a_of(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        self.a_big / (t + std::f64::consts::E).ln().powf(self.log_exponent)
    }
}

/// Plateau time grid T_n = C_T · n^{1+β} with levels a_n = a(T_n).
#[derive(Debug, Clone, Copy)]
pub struct PlateauSchedule {
    pub c_t: f64,
    pub beta: f64,
    pub anneal: AnnealSchedule,
}

impl PlateauSchedule {
    pub fn new(c_t: f64, beta: f64, a_big: f64) -> Result<Self> {
        if c_t <= 0.0 || beta <= 0.0 {
            return Err(Error::InvalidParameter("C_T and β must be > 0".into()));
        }
        Ok(Self { c_t, beta, anneal: AnnealSchedule::new(a_big)? })
    }

    /// (T_n, a_n) for n ≥ 1; T_0 = 0 by convention.
    pub fn plateau_times(&self, n: usize) -> (f64, f64) {
        let t_n = if n == 0 { 0.0 } else { self.c_t * (n as f64).powf(1.0 + self.beta) };
        (t_n, self.anneal.a_of(t_n))
    }

    /// Plateau level in force at time t: a_{k+1} on [T_k, T_{k+1}).
    pub fn level_at(&self, t: f64) -> f64 {
        let mut k = 1usize;
        // T_n is increasing; linear scan then refine (t is desk-scale)
        while self.plateau_times(k).0 <= t {
            k += 1;
        }
        self.plateau_times(k).1
    }
}

/// Step sequence kinds: γ_n = γ₁ / n^α. `harmonic` is α = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    Power { gamma1: f64, alpha: f64 },
}

/// Decreasing step sequence with cached partial sums Γ_n.
///
/// The prefix-sum cache grows lazily behind a mutex; all public
/// operations behave as pure functions.
#[derive(Debug)]
pub struct StepSequence {
    kind: StepKind,
    prefix: Mutex<Vec<f64>>, // prefix[n] = Γ_n, prefix[0] = 0
}

impl StepSequence {
    pub fn power(gamma1: f64, alpha: f64) -> Result<Self> {
        if gamma1 <= 0.0 {
            return Err(Error::InvalidParameter(format!("γ₁ must be > 0, got {gamma1}")));
        }
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "α must lie in (1/2, 1]: Σγ_n² diverges for α ≤ 1/2 (got α={alpha})"
            )));
        }
        Ok(Self { kind: StepKind::Power { gamma1, alpha }, prefix: Mutex::new(vec![0.0]) })
    }

    pub fn harmonic(gamma1: f64) -> Result<Self> {
        Self::power(gamma1, 1.0)
    }

    pub fn kind(&self) -> StepKind {
        self.kind
    }

    /// γ_n, n ≥ 1.
    pub fn gamma(&self, n: usize) -> f64 {
        assert!(n >= 1);
        let StepKind::Power { gamma1, alpha } = self.kind;
        gamma1 / (n as f64).powf(alpha)
    }

    /// Γ_n = γ₁ + … + γ_n (Γ_0 = 0).
    pub fn big_gamma(&self, n: usize) -> f64 {
        let mut prefix = self.prefix.lock().unwrap();
        while prefix.len() <= n {
            let k = prefix.len();
            let last = *prefix.last().unwrap();
            prefix.push(last + self.gamma(k));
        }
        prefix[n]
    }

    /// N(t) = max{k ≥ 0 : Γ_k ≤ t}.
    pub fn n_of(&self, t: f64) -> usize {
        assert!(t >= 0.0);
        // grow the cache until it covers t
        let mut upper = 1usize;
        while self.big_gamma(upper) <= t {
            upper *= 2;
        }
        let prefix = self.prefix.lock().unwrap();
        // binary search: largest k with Γ_k ≤ t
        match prefix.partition_point(|&g| g <= t) {
            0 => 0,
            p => p - 1,
        }
    }

    /// limsup proxy for ϖ = limsup (γ_n − γ_{n+1})/γ_{n+1}²: max over the
    /// tail n ∈ [n_max/2, n_max].
    pub fn varpi_estimate(&self, n_max: usize) -> f64 {
        assert!(n_max >= 1000, "n_max must be ≥ 10³");
        let mut best = f64::NEG_INFINITY;
        for n in (n_max / 2)..n_max {
            let g = self.gamma(n);
            let g1 = self.gamma(n + 1);
            best = best.max((g - g1) / (g1 * g1));
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_of_values() {
        let s = AnnealSchedule::new(2.0).unwrap();
        assert!((s.a_of(0.0) - 2.0).abs() < 1e-14);
        let e = std::f64::consts::E;
        let t = e * e - e; // log(t+e) = 2
        assert!((s.a_of(t) - 2.0 / 2.0_f64.sqrt()).abs() < 1e-12);
        assert!(s.a_of(1e6) < s.a_of(1e3));
    }

    #[test]
    fn plateau_times_values() {
        let p = PlateauSchedule::new(10.0, 1.0, 1.0).unwrap();
        assert!((p.plateau_times(1).0 - 10.0).abs() < 1e-12);
        assert!((p.plateau_times(4).0 - 160.0).abs() < 1e-12);
    }

    #[test]
    fn a_n_difference_rate_band() {
        // n·log^{3/2}(n)·(a_n − a_{n+1}) stays in a bounded band
        let p = PlateauSchedule::new(10.0, 1.0, 1.0).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in 10..10_000usize {
            let (_, an) = p.plateau_times(n);
            let (_, an1) = p.plateau_times(n + 1);
            assert!(an - an1 > 0.0);
            let v = (n as f64) * (n as f64).ln().powf(1.5) * (an - an1);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(hi / lo < 10.0, "band ratio {}", hi / lo);
    }

    #[test]
    fn gamma_and_n_of() {
        let s = StepSequence::harmonic(1.0).unwrap();
        assert!((s.gamma(3) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.n_of(1.4), 1); // Γ₁=1 ≤ 1.4 < Γ₂=1.5
        let p = StepSequence::power(1.0, 0.6).unwrap();
        assert!(p.big_gamma(1_000_000) > 100.0);
    }

    #[test]
    fn n_of_inverts_big_gamma() {
        let s = StepSequence::power(0.5, 0.7).unwrap();
        for k in 1..2000usize {
            assert_eq!(s.n_of(s.big_gamma(k)), k);
        }
    }

    #[test]
    fn varpi_examples() {
        // The defining limsup of (γ_n−γ_{n+1})/γ_{n+1}² evaluates to 1/γ₁
        // for γ_n = γ₁/n and to 0 for γ_n = γ₁/n^α with α < 1.
        let h = StepSequence::harmonic(0.5).unwrap();
        assert!((h.varpi_estimate(100_000) - 2.0).abs() / 2.0 < 0.01);
        let h1 = StepSequence::harmonic(1.0).unwrap();
        assert!((h1.varpi_estimate(100_000) - 1.0).abs() < 0.01);
        let p = StepSequence::power(1.0, 0.6).unwrap();
        let v = p.varpi_estimate(100_000);
        assert!(v <= 0.01 && v > 0.0);
        assert!(p.varpi_estimate(200_000) < v); // decreasing
        // power(1, 1.0) equals harmonic(1)
        let pw = StepSequence::power(1.0, 1.0).unwrap();
        assert!((pw.varpi_estimate(10_000) - h1.varpi_estimate(10_000)).abs() < 1e-12);
    }

    #[test]
    fn invalid_alpha_rejected() {
        assert!(StepSequence::power(1.0, 0.4).is_err());
        assert!(StepSequence::power(0.0, 0.8).is_err());
    }

    #[test]
    fn gamma_at_plateau_times_vanishes_fast_power() {
        // γ_{N(T_n)} · n^{1+β} decreasing over n ∈ [10, 10³], power kind
        let seq = StepSequence::power(1.0, 0.6).unwrap();
        let p = PlateauSchedule::new(0.02, 0.5, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for n in (100..=1000usize).step_by(90) {
            let (t_n, _) = p.plateau_times(n);
            let k = seq.n_of(t_n).max(1);
            let v = seq.gamma(k) * (n as f64).powf(1.5);
            assert!(v < prev, "not decreasing at n={n}");
            prev = v;
        }
    }

    #[test]
    fn gamma_at_plateau_times_vanishes_fast_harmonic() {
        // Harmonic steps: Γ_k = γ₁ H_k grows like γ₁ ln k, so N(T_n) is
        // astronomically large at plateau times and the cached prefix sums
        // cannot reach it. Use the analytic inverse H_k ≈ ln k + γ_E as the
        // oracle: γ_{N(t)} ≈ γ₁ e^{-(t/γ₁ - γ_E)}.
        // γ_{N(t)}·n² underflows f64 long before n=1000, so compare logs.
        let gamma1: f64 = 1.0;
        let euler = 0.57721566490153286;
        let p = PlateauSchedule::new(10.0, 1.0, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for n in (10..=1000usize).step_by(90) {
            let (t_n, _) = p.plateau_times(n);
            let log_v = gamma1.ln() - (t_n / gamma1 - euler) + 2.0 * (n as f64).ln();
            assert!(log_v < prev, "not decreasing at n={n}");
            prev = log_v;
        }
    }
}
