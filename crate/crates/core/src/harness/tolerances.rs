//! Frozen pass/fail thresholds for experiment flags. Changing a value
//! here changes what CI accepts, so every edit should be deliberate.

/// exp_invariance, additive (constant σ): W1(empirical, ν_a) at every checkpoint.
pub const INVARIANCE_W1_ADDITIVE: f64 = 0.01;
/// exp_invariance, multiplicative σ: W1 vs the fine-reference sample at T.
pub const INVARIANCE_W1_MULTIPLICATIVE: f64 = 0.02;
/// exp_invariance: the Υ-ablated run must be worse by at least this factor.
pub const INVARIANCE_ABLATION_RATIO: f64 = 2.0;

/// exp_hwang: basin masses vs ν* weights at the smallest ladder a.
pub const HWANG_MASS_TOL: f64 = 0.02;
/// exp_hwang: log-log slope band for positive-definite minima (W1 ∝ a).
pub const HWANG_SLOPE_PD: (f64, f64) = (0.85, 1.15);
/// exp_hwang: slope band for the quartic degenerate minimum (W1 ∝ a^{1/2}).
pub const HWANG_SLOPE_DEGENERATE: (f64, f64) = (0.4, 0.6);

/// exp_contraction: fitted decay rate vs the analytic rate 2c.
pub const CONTRACTION_RATE_REL: f64 = 0.10;
/// exp_contraction: fitted rate must reach this fraction of witnessed α₀.
pub const CONTRACTION_ALPHA0_FACTOR: f64 = 0.9;

/// exp_anneal: required final fraction of chains near the global argmin.
pub const ANNEAL_NEAR_FRACTION: f64 = 0.9;
/// exp_anneal: the negative control must retain less global-basin mass
/// than this fraction of the main run's.
pub const ANNEAL_NEGCONTROL_FACTOR: f64 = 0.9;

/// exp_compare_sigma: |ratio − 1| allowed at κ = 1.
pub const COMPARE_WELL_CONDITIONED_TOL: f64 = 0.2;

/// exp_gibbs_chain: max/min band for n·log^{3/2}(n)·W1(ν_{a_n}, ν_{a_{n+1}})
/// and for the normalized level gaps (a_n − a_{n+1})·n·log^{3/2}(n).
pub const GIBBS_CHAIN_BAND_RATIO: f64 = 10.0;
/// exp_gibbs_chain: Monte-Carlo coupling cost vs deterministic bound,
/// allowed slack in standard errors.
pub const GIBBS_CHAIN_MC_SIGMAS: f64 = 4.0;
