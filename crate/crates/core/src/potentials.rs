//! Potential catalog: V, ∇V, ∇²V, argmin metadata and assumption checks.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, solve, sym_eigenvalues, sym_op_norm};
use crate::numdiff::{fd_hessian_of_grad, quasi_random_points};
use crate::rng::{sub, NoiseStream};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Metadata for a degenerate (strictly polynomial) minimum of order 2p:
/// V(x* + B·(s^{α₁}h₁, …)) − V* ~ s·g(h) as s → 0.
#[derive(Clone)]
pub struct DegenerateMinimumSpec {
    pub order_2p: usize,
    pub exponents: Vec<f64>,
    /// Orthogonal change of basis B (row-major d×d).
    pub basis: Vec<f64>,
    /// Limit polynomial g; exp(−κ·g) must be integrable for κ > 0.
    pub limit_polynomial: ScalarFn,
}

impl fmt::Debug for DegenerateMinimumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DegenerateMinimumSpec")
            .field("order_2p", &self.order_2p)
            .field("exponents", &self.exponents)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum Degeneracy {
    PositiveDefinite,
    Degenerate(DegenerateMinimumSpec),
}

#[derive(Clone, Debug)]
pub struct MinimumSpec {
    pub location: Vec<f64>,
    /// ∇²V(x*), row-major d×d.
    pub hessian_at_min: Vec<f64>,
    pub degeneracy: Degeneracy,
}

impl MinimumSpec {
    pub fn is_degenerate(&self) -> bool {
        matches!(self.degeneracy, Degeneracy::Degenerate(_))
    }
}

/// Synthetic regression dataset backing `sigmoid_regression`, kept so the
/// minibatch noise model can re-draw per-sample gradients.
pub struct RegressionData {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub lambda: f64,
}

impl RegressionData {
    /// Gradient of the i-th sample loss (1/2)(φ(⟨θ,uᵢ⟩)−vᵢ)² + (λ/2)|θ|².
    pub fn sample_gradient(&self, theta: &[f64], i: usize) -> Vec<f64> {
        let u = &self.inputs[i];
        let z = dot(theta, u);
        let s = sigmoid(z);
        let factor = sigmoid_d1(z) * (s - self.targets[i]);
        theta
            .iter()
            .zip(u)
            .map(|(&th, &ui)| factor * ui + self.lambda * th)
            .collect()
    }
}

/// A potential V with derivatives and argmin metadata.
pub struct Potential {
    pub dim: usize,
    pub name: String,
    eval: ScalarFn,
    grad: VectorFn,
    hess: Option<VectorFn>,
    pub minima: Vec<MinimumSpec>,
    pub v_star: f64,
    /// An A for which |x|² e^{−2V/A²} is integrable.
    pub admissible_a: f64,
    pub regression: Option<Arc<RegressionData>>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("v_star", &self.v_star)
            .finish()
    }
}

impl Potential {
    /// Assemble a potential outside the catalog (custom test targets).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        dim: usize,
        name: String,
        eval: ScalarFn,
        grad: VectorFn,
        hess: Option<VectorFn>,
        minima: Vec<MinimumSpec>,
        v_star: f64,
        admissible_a: f64,
    ) -> Self {
        Self { dim, name, eval, grad, hess, minima, v_star, admissible_a, regression: None }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }

    /// ∇²V, analytic when available, else finite differences of ∇V.
    pub fn hess(&self, x: &[f64]) -> Vec<f64> {
        match &self.hess {
            Some(h) => h(x),
            None => {
                let g = Arc::clone(&self.grad);
                fd_hessian_of_grad(&move |y: &[f64]| g(y), x)
            }
        }
    }

    pub fn eval_fn(&self) -> ScalarFn {
        Arc::clone(&self.eval)
    }

    /// Index of the nearest minimum (basin assignment).
    pub fn nearest_minimum(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, m) in self.minima.iter().enumerate() {
            let d: f64 = m
                .location
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn sigmoid_d1(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

#[inline]
fn sigmoid_d2(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s) * (1.0 - 2.0 * s)
}

// Quintic Hermite piece on [x0, x0+h], power basis in t = (x-x0)/h.
#[derive(Clone, Copy, Debug)]
struct QuinticPiece {
    x0: f64,
    h: f64,
    c: [f64; 6],
}

impl QuinticPiece {
    /// Matches value, first and second derivative at both ends.
    fn hermite(x0: f64, x1: f64, left: (f64, f64, f64), right: (f64, f64, f64)) -> Self {
        let h = x1 - x0;
        let (f0, d0, s0) = left;
        let (f1, d1, s1) = right;
        let (d0, d1) = (d0 * h, d1 * h);
        let (s0, s1) = (s0 * h * h, s1 * h * h);
        let c = [
            f0,
            d0,
            0.5 * s0,
            -10.0 * f0 - 6.0 * d0 - 1.5 * s0 + 10.0 * f1 - 4.0 * d1 + 0.5 * s1,
            15.0 * f0 + 8.0 * d0 + 1.5 * s0 - 15.0 * f1 + 7.0 * d1 - s1,
            -6.0 * f0 - 3.0 * d0 - 0.5 * s0 + 6.0 * f1 - 3.0 * d1 + 0.5 * s1,
        ];
        Self { x0, h, c }
    }

    fn eval(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.h;
        self.c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck)
    }

    fn d1(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.h;
        let mut acc = 0.0;
        for k in (1..6).rev() {
            acc = acc * t + k as f64 * self.c[k];
        }
        acc / self.h
    }

    fn d2(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.h;
        let mut acc = 0.0;
        for k in (2..6).rev() {
            acc = acc * t + (k * (k - 1)) as f64 * self.c[k];
        }
        acc / (self.h * self.h)
    }
}

/// C² double well on ℝ: quadratic tails of curvature h1 (left well at −1)
/// and h2 (right well at +1), quintic-Hermite bridge over the barrier at 0.
/// Both wells sit at the same value v0, so ν* weights depend only on the
/// curvatures.
struct TwoWell {
    h1: f64,
    h2: f64,
    v0: f64,
    left_value: f64, // value at the left well; = v0 for the symmetric-value well
    joint_l: f64,
    joint_r: f64,
    inner_l: QuinticPiece,
    inner_r: QuinticPiece,
}

impl TwoWell {
    // Joints sit strictly between each minimum and the barrier top: each
    // well is an exact parabola on a full neighborhood of its minimum, so
    // Laplace corrections to Gibbs weights stay O(a²) (a third-derivative
    // jump at a minimum would degrade them to O(a)). Each joint is placed
    // where its parabola has climbed a quarter of the way to the top, so
    // the bridge endpoints stay safely below the barrier.
    fn new(h1: f64, h2: f64, v0: f64, left_value: f64, barrier: f64) -> Self {
        let top = v0 + barrier;
        let mu = (h1 + h2) / 2.0;
        let dl = ((top - left_value) / (2.0 * h1)).sqrt().min(0.5);
        let dr = ((top - v0) / (2.0 * h2)).sqrt().min(0.5);
        let (joint_l, joint_r) = (-1.0 + dl, 1.0 - dr);
        let inner_l = QuinticPiece::hermite(
            joint_l,
            0.0,
            (left_value + 0.5 * h1 * dl * dl, h1 * dl, h1),
            (top, 0.0, -mu),
        );
        let inner_r = QuinticPiece::hermite(
            0.0,
            joint_r,
            (top, 0.0, -mu),
            (v0 + 0.5 * h2 * dr * dr, -h2 * dr, h2),
        );
        Self { h1, h2, v0, left_value, joint_l, joint_r, inner_l, inner_r }
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= self.joint_l {
            self.left_value + 0.5 * self.h1 * (x + 1.0) * (x + 1.0)
        } else if x <= 0.0 {
            self.inner_l.eval(x)
        } else if x <= self.joint_r {
            self.inner_r.eval(x)
        } else {
            self.v0 + 0.5 * self.h2 * (x - 1.0) * (x - 1.0)
        }
    }

    fn d1(&self, x: f64) -> f64 {
        if x <= self.joint_l {
            self.h1 * (x + 1.0)
        } else if x <= 0.0 {
            self.inner_l.d1(x)
        } else if x <= self.joint_r {
            self.inner_r.d1(x)
        } else {
            self.h2 * (x - 1.0)
        }
    }

    fn d2(&self, x: f64) -> f64 {
        if x <= self.joint_l {
            self.h1
        } else if x <= 0.0 {
            self.inner_l.d2(x)
        } else if x <= self.joint_r {
            self.inner_r.d2(x)
        } else {
            self.h2
        }
    }
}

fn positive_definite_min(location: Vec<f64>, hessian: Vec<f64>) -> MinimumSpec {
    MinimumSpec { location, hessian_at_min: hessian, degeneracy: Degeneracy::PositiveDefinite }
}

/// Parsed catalog identifier: `name` or `name(p1,p2,…)`.
pub fn parse_catalog_name(s: &str) -> Result<(String, Vec<f64>)> {
    let s = s.trim();
    if let Some(open) = s.find('(') {
        if !s.ends_with(')') {
            return Err(Error::InvalidParameter(format!("unbalanced parentheses in '{s}'")));
        }
        let name = s[..open].trim().to_string();
        let args = &s[open + 1..s.len() - 1];
        let params = args
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad number '{p}' in '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((name, params))
    } else {
        Ok((s.to_string(), Vec::new()))
    }
}

/// Look up a potential by catalog name, e.g. `"double_well_1d(2,8)"`.
pub fn catalog_get(spec: &str) -> Result<Arc<Potential>> {
    let (name, p) = parse_catalog_name(spec)?;
    match name.as_str() {
        "quadratic1d" => {
            let c = *p.first().unwrap_or(&1.0);
            if c <= 0.0 {
                return Err(Error::InvalidParameter("quadratic1d: c must be > 0".into()));
            }
            Ok(Arc::new(quadratic1d(c)))
        }
        "ill_quadratic2d" => {
            let kappa = *p.first().unwrap_or(&100.0);
            if kappa <= 0.0 {
                return Err(Error::InvalidParameter("ill_quadratic2d: κ must be > 0".into()));
            }
            Ok(Arc::new(ill_quadratic2d(kappa)))
        }
        "double_well_1d" => {
            let h1 = *p.first().unwrap_or(&2.0);
            let h2 = *p.get(1).unwrap_or(&8.0);
            if h1 <= 0.0 || h2 <= 0.0 {
                return Err(Error::InvalidParameter("double_well_1d: h_i must be > 0".into()));
            }
            Ok(Arc::new(double_well_1d(h1, h2)))
        }
        "global_local_1d" => Ok(Arc::new(global_local_1d())),
        "quartic_degenerate_1d" => Ok(Arc::new(quartic_degenerate_1d())),
        "sigmoid_regression" => {
            let m = *p.first().unwrap_or(&64.0);
            let lambda = *p.get(1).unwrap_or(&0.5);
            let seed = *p.get(2).unwrap_or(&0.0);
            if m < 1.0 || lambda <= 0.0 {
                return Err(Error::InvalidParameter(
                    "sigmoid_regression: need M ≥ 1 and λ > 0".into(),
                ));
            }
            Ok(Arc::new(sigmoid_regression(m as usize, lambda, seed as u64)?))
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}

/// V(x) = c·x² + 1; single minimum at 0 with V''(0) = 2c.
pub fn quadratic1d(c: f64) -> Potential {
    Potential {
        dim: 1,
        name: format!("quadratic1d({c})"),
        eval: Arc::new(move |x| c * x[0] * x[0] + 1.0),
        grad: Arc::new(move |x| vec![2.0 * c * x[0]]),
        hess: Some(Arc::new(move |_| vec![2.0 * c])),
        minima: vec![positive_definite_min(vec![0.0], vec![2.0 * c])],
        v_star: 1.0,
        admissible_a: 2.0,
        regression: None,
    }
}

/// V(x) = ½(x₁² + κ·x₂²) + 1; condition number κ.
pub fn ill_quadratic2d(kappa: f64) -> Potential {
    Potential {
        dim: 2,
        name: format!("ill_quadratic2d({kappa})"),
        eval: Arc::new(move |x| 0.5 * (x[0] * x[0] + kappa * x[1] * x[1]) + 1.0),
        grad: Arc::new(move |x| vec![x[0], kappa * x[1]]),
        hess: Some(Arc::new(move |_| vec![1.0, 0.0, 0.0, kappa])),
        minima: vec![positive_definite_min(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, kappa])],
        v_star: 1.0,
        admissible_a: 2.0,
        regression: None,
    }
}

/// Double well with equal minimum values at ±1 and curvatures (h1, h2).
pub fn double_well_1d(h1: f64, h2: f64) -> Potential {
    let w = Arc::new(TwoWell::new(h1, h2, 1.0, 1.0, 1.0));
    let (we, wg, wh) = (Arc::clone(&w), Arc::clone(&w), Arc::clone(&w));
    Potential {
        dim: 1,
        name: format!("double_well_1d({h1},{h2})"),
        eval: Arc::new(move |x| we.eval(x[0])),
        grad: Arc::new(move |x| vec![wg.d1(x[0])]),
        hess: Some(Arc::new(move |x| vec![wh.d2(x[0])])),
        minima: vec![
            positive_definite_min(vec![-1.0], vec![h1]),
            positive_definite_min(vec![1.0], vec![h2]),
        ],
        v_star: 1.0,
        admissible_a: 2.0,
        regression: None,
    }
}

/// One local minimum at −1 (value 1.5, curvature 2) and the global minimum
/// at +1 (value 1, curvature 8), barrier top 1.8 at x = 0.
pub fn global_local_1d() -> Potential {
    let w = Arc::new(TwoWell::new(2.0, 8.0, 1.0, 1.5, 0.8));
    let (we, wg, wh) = (Arc::clone(&w), Arc::clone(&w), Arc::clone(&w));
    Potential {
        dim: 1,
        name: "global_local_1d".into(),
        eval: Arc::new(move |x| we.eval(x[0])),
        grad: Arc::new(move |x| vec![wg.d1(x[0])]),
        hess: Some(Arc::new(move |x| vec![wh.d2(x[0])])),
        minima: vec![positive_definite_min(vec![1.0], vec![8.0])],
        v_star: 1.0,
        admissible_a: 2.0,
        regression: None,
    }
}

/// The non-global well location of `global_local_1d`.
pub const GLOBAL_LOCAL_LOCAL_MIN: f64 = -1.0;

/// V(x) = x⁴ + 1: strictly polynomial minimum of order 4, exponent 1/4.
pub fn quartic_degenerate_1d() -> Potential {
    Potential {
        dim: 1,
        name: "quartic_degenerate_1d".into(),
        eval: Arc::new(|x| x[0].powi(4) + 1.0),
        grad: Arc::new(|x| vec![4.0 * x[0].powi(3)]),
        hess: Some(Arc::new(|x| vec![12.0 * x[0] * x[0]])),
        minima: vec![MinimumSpec {
            location: vec![0.0],
            hessian_at_min: vec![0.0],
            degeneracy: Degeneracy::Degenerate(DegenerateMinimumSpec {
                order_2p: 4,
                exponents: vec![0.25],
                basis: vec![1.0],
                limit_polynomial: Arc::new(|h| h[0].powi(4)),
            }),
        }],
        v_star: 1.0,
        admissible_a: 2.0,
        regression: None,
    }
}

/// Single-layer sigmoid regression potential in d = 3:
/// V(θ) = (1/2M) Σ (φ(⟨θ,uᵢ⟩) − vᵢ)² + (λ/2)|θ|², with bounded synthetic
/// data uᵢ ∈ B(0,1), vᵢ ∈ [−1,1].
pub fn sigmoid_regression(m: usize, lambda: f64, seed: u64) -> Result<Potential> {
    let dim = 3;
    let stream = NoiseStream::new(seed ^ 0x5161_4d01_d5e5_u64, 0);
    let mut inputs = Vec::with_capacity(m);
    let mut targets = Vec::with_capacity(m);
    for i in 0..m {
        let mut u: Vec<f64> = (0..dim)
            .map(|k| 2.0 * stream.uniform(i as u64, sub::INIT, k as u64) - 1.0)
            .collect();
        let n = norm2(&u);
        if n > 1.0 {
            for v in &mut u {
                *v /= n;
            }
        }
        inputs.push(u);
        targets.push(2.0 * stream.uniform(i as u64, sub::INIT, dim as u64) - 1.0);
    }
    let data = Arc::new(RegressionData { inputs, targets, lambda });

    let d0 = Arc::clone(&data);
    let eval: ScalarFn = Arc::new(move |theta: &[f64]| {
        let mm = d0.inputs.len() as f64;
        let mut s = 0.0;
        for (u, &v) in d0.inputs.iter().zip(&d0.targets) {
            let r = sigmoid(dot(theta, u)) - v;
            s += r * r;
        }
        s / (2.0 * mm) + 0.5 * d0.lambda * dot(theta, theta)
    });
    let d1 = Arc::clone(&data);
    let grad: VectorFn = Arc::new(move |theta: &[f64]| {
        let mm = d1.inputs.len() as f64;
        let mut g = vec![0.0; theta.len()];
        for (u, &v) in d1.inputs.iter().zip(&d1.targets) {
            let z = dot(theta, u);
            let factor = sigmoid_d1(z) * (sigmoid(z) - v) / mm;
            for (gi, &ui) in g.iter_mut().zip(u) {
                *gi += factor * ui;
            }
        }
        for (gi, &ti) in g.iter_mut().zip(theta) {
            *gi += d1.lambda * ti;
        }
        g
    });
    let d2 = Arc::clone(&data);
    let hess: VectorFn = Arc::new(move |theta: &[f64]| {
        let d = theta.len();
        let mm = d2.inputs.len() as f64;
        let mut h = vec![0.0; d * d];
        for (u, &v) in d2.inputs.iter().zip(&d2.targets) {
            let z = dot(theta, u);
            let s = sigmoid(z);
            let w = (sigmoid_d2(z) * (s - v) + sigmoid_d1(z) * sigmoid_d1(z)) / mm;
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += w * u[i] * u[j];
                }
            }
        }
        for i in 0..d {
            h[i * d + i] += d2.lambda;
        }
        h
    });

    // locate the minimum by damped Newton from the origin
    let mut theta = vec![0.0; dim];
    for _ in 0..200 {
        let g = grad(&theta);
        if norm2(&g) < 1e-12 {
            break;
        }
        let h = hess(&theta);
        let step = solve(&h, &g).ok_or_else(|| {
            Error::InvalidParameter("sigmoid_regression: singular Hessian in minimization".into())
        })?;
        let mut t = 1.0;
        let f0 = eval(&theta);
        loop {
            let cand: Vec<f64> =
                theta.iter().zip(&step).map(|(&a, &s)| a - t * s).collect();
            if eval(&cand) <= f0 || t < 1e-8 {
                theta = cand;
                break;
            }
            t *= 0.5;
        }
    }
    let g_final = grad(&theta);
    if norm2(&g_final) > 1e-9 {
        return Err(Error::InvalidParameter(
            "sigmoid_regression: minimization did not converge".into(),
        ));
    }
    let h_min = hess(&theta);
    if sym_eigenvalues(&h_min, dim).first().copied().unwrap_or(0.0) <= 0.0 {
        return Err(Error::InvalidParameter(
            "sigmoid_regression: minimum is not positive definite".into(),
        ));
    }
    let v_star = eval(&theta);

    Ok(Potential {
        dim,
        name: format!("sigmoid_regression({m},{lambda},{seed})"),
        eval,
        grad,
        hess: Some(hess),
        minima: vec![positive_definite_min(theta, h_min)],
        v_star,
        admissible_a: 2.0,
        regression: Some(data),
    })
}

pub fn catalog_names() -> Vec<&'static str> {
    vec![
        "quadratic1d(c)",
        "ill_quadratic2d(kappa)",
        "double_well_1d(h1,h2)",
        "global_local_1d",
        "quartic_degenerate_1d",
        "sigmoid_regression(M,lambda,seed)",
    ]
}

/// Empirical assumption report over a probe box.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// sup |∇V|²/V over the probes.
    pub sup_grad_sq_over_v: f64,
    /// sup ‖∇²V‖ (spectral) over the probes.
    pub sup_hess_norm: f64,
    /// Smallest radius on the candidate ladder such that the dissipativity
    /// inner product ⟨∇V(x)−∇V(y), x−y⟩ ≥ α₀|x−y|² held on all sampled
    /// pairs outside the ball, with the witnessed α₀. None if it failed
    /// at every candidate radius.
    pub dissipativity: Option<(f64, f64)>,
    /// Relative change of ∫|x|²e^{−2V/A²} when doubling the box.
    pub moment_integral_rel_change: f64,
    pub moment_integral_converged: bool,
}

/// Probe the structural assumptions on a box.
pub fn check_assumptions(
    p: &Potential,
    lo: &[f64],
    hi: &[f64],
    a_big: f64,
) -> Result<AssumptionReport> {
    if lo.len() != p.dim || hi.len() != p.dim || lo.iter().zip(hi).any(|(l, h)| l >= h) {
        return Err(Error::InvalidInput("check_assumptions: empty or mismatched box".into()));
    }
    let n_probe = 2000usize.max(10usize.pow(p.dim as u32));
    let probes = quasi_random_points(lo, hi, n_probe);

    let mut sup_ratio: f64 = 0.0;
    let mut sup_hess: f64 = 0.0;
    for x in &probes {
        let v = p.eval(x);
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::NonFinite(format!("non-positive or non-finite V at {x:?}")));
        }
        let g = p.grad(x);
        if g.iter().any(|gi| !gi.is_finite()) {
            return Err(Error::NonFinite(format!("non-finite gradient at {x:?}")));
        }
        let g2: f64 = g.iter().map(|gi| gi * gi).sum();
        sup_ratio = sup_ratio.max(g2 / v);
        sup_hess = sup_hess.max(sym_op_norm(&p.hess(x), p.dim));
    }

    // dissipativity ladder
    let box_radius = hi.iter().map(|h| h.abs()).chain(lo.iter().map(|l| l.abs())).fold(0.0, f64::max);
    let mut dissipativity = None;
    let mut r0 = 0.0;
    while r0 < 0.9 * box_radius {
        let outside: Vec<&Vec<f64>> =
            probes.iter().filter(|x| norm2(x) > r0).collect();
        if outside.len() >= 20 {
            let mut alpha = f64::INFINITY;
            let mut ok = true;
            let pairs = outside.len().min(200);
            for i in 0..pairs {
                for j in (i + 1)..pairs {
                    let (x, y) = (outside[i], outside[j]);
                    let dxy: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
                    let d2 = dot(&dxy, &dxy);
                    if d2 < 1e-16 {
                        continue;
                    }
                    let gx = p.grad(x);
                    let gy = p.grad(y);
                    let inner: f64 =
                        gx.iter().zip(&gy).zip(&dxy).map(|((a, b), d)| (a - b) * d).sum();
                    let ratio = inner / d2;
                    if ratio <= 1e-9 {
                        ok = false;
                        break;
                    }
                    alpha = alpha.min(ratio);
                }
                if !ok {
                    break;
                }
            }
            if ok && alpha.is_finite() {
                dissipativity = Some((r0, alpha));
                break;
            }
        }
        r0 += 0.25 * (1.0 + box_radius / 8.0);
    }

    // truncated second-moment integral of e^{-2V/A²}, quasi-MC. The
    // doubled-box increment is estimated directly on the shell box2 \ box1
    // (not as a difference of two noisy totals, which would floor the
    // relative change at the quasi-MC error).
    let weight = |x: &[f64]| dot(x, x) * (-2.0 * p.eval(x) / (a_big * a_big)).exp();
    let pts = quasi_random_points(lo, hi, 20_000);
    let vol: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).product();
    let i1 = vol * pts.iter().map(|x| weight(x)).sum::<f64>() / pts.len() as f64;
    let lo2: Vec<f64> = lo.iter().map(|l| 2.0 * l).collect();
    let hi2: Vec<f64> = hi.iter().map(|h| 2.0 * h).collect();
    let pts2 = quasi_random_points(&lo2, &hi2, 20_000);
    let vol2: f64 = lo2.iter().zip(&hi2).map(|(l, h)| h - l).product();
    let inside = |x: &[f64]| x.iter().zip(lo.iter().zip(hi)).all(|(xi, (l, h))| xi >= l && xi <= h);
    let shell = vol2
        * pts2.iter().map(|x| if inside(x) { 0.0 } else { weight(x) }).sum::<f64>()
        / pts2.len() as f64;
    let rel = if i1 > 0.0 { shell.abs() / i1 } else { f64::INFINITY };

    Ok(AssumptionReport {
        sup_grad_sq_over_v: sup_ratio,
        sup_hess_norm: sup_hess,
        dissipativity,
        moment_integral_rel_change: rel,
        moment_integral_converged: rel < 1e-6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numdiff::fd_gradient;

    fn probe_points(p: &Potential, n: usize) -> Vec<Vec<f64>> {
        let lo = vec![-3.0; p.dim];
        let hi = vec![3.0; p.dim];
        quasi_random_points(&lo, &hi, n)
    }

    fn check_derivatives(p: &Potential) {
        for x in probe_points(p, 100) {
            let g = p.grad(&x);
            let gfd = fd_gradient(&|y: &[f64]| p.eval(y), &x);
            let scale = 1.0 + g.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (a, b) in g.iter().zip(&gfd) {
                assert!(
                    (a - b).abs() / scale < 1e-5,
                    "{}: grad mismatch at {x:?}: {a} vs {b}",
                    p.name
                );
            }
            let h = p.hess(&x);
            let hfd = fd_hessian_of_grad(&|y: &[f64]| p.grad(y), &x);
            let hscale = 1.0 + h.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (a, b) in h.iter().zip(&hfd) {
                assert!(
                    (a - b).abs() / hscale < 1e-4,
                    "{}: hess mismatch at {x:?}",
                    p.name
                );
            }
        }
    }

    fn check_minima(p: &Potential) {
        for m in &p.minima {
            let g = p.grad(&m.location);
            assert!(norm2(&g) <= 1e-8, "{}: |∇V(x*)|={}", p.name, norm2(&g));
            assert!((p.eval(&m.location) - p.v_star).abs() < 1e-12, "{}", p.name);
            if let Degeneracy::PositiveDefinite = m.degeneracy {
                let ev = sym_eigenvalues(&m.hessian_at_min, p.dim);
                assert!(ev[0] > 0.0, "{}: not PD", p.name);
            }
        }
    }

    #[test]
    fn catalog_members_consistent() {
        for name in [
            "quadratic1d(1)",
            "ill_quadratic2d(100)",
            "double_well_1d(2,8)",
            "global_local_1d",
            "quartic_degenerate_1d",
            "sigmoid_regression(64,0.5,3)",
        ] {
            let p = catalog_get(name).unwrap();
            check_derivatives(&p);
            check_minima(&p);
            for x in probe_points(&p, 50) {
                assert!(p.eval(&x) > 0.0, "{}: V ≤ 0", p.name);
            }
        }
    }

    #[test]
    fn quadratic1d_metadata() {
        let p = catalog_get("quadratic1d(1)").unwrap();
        assert_eq!(p.minima.len(), 1);
        assert_eq!(p.minima[0].hessian_at_min, vec![2.0]);
        assert!((p.eval(&[0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quartic_degenerate_metadata() {
        let p = catalog_get("quartic_degenerate_1d").unwrap();
        match &p.minima[0].degeneracy {
            Degeneracy::Degenerate(d) => {
                assert_eq!(d.order_2p, 4);
                assert!((d.exponents[0] - 0.25).abs() < 1e-15);
                // exp(-κ g) integrable: truncated quadrature converges
                let g = &d.limit_polynomial;
                let quad = |r: f64| {
                    let n = 20000;
                    let h = 2.0 * r / n as f64;
                    (0..=n)
                        .map(|i| (-g(&[-r + i as f64 * h])).exp())
                        .sum::<f64>()
                        * h
                };
                let q1 = quad(10.0);
                let q2 = quad(20.0);
                assert!(((q2 - q1) / q1).abs() < 1e-9);
            }
            _ => panic!("expected degenerate minimum"),
        }
    }

    #[test]
    fn double_well_shape() {
        let p = catalog_get("double_well_1d(2,8)").unwrap();
        assert!((p.eval(&[-1.0]) - p.eval(&[1.0])).abs() < 1e-12);
        assert!((p.hess(&[-1.0])[0] - 2.0).abs() < 1e-9);
        assert!((p.hess(&[1.0])[0] - 8.0).abs() < 1e-9);
        // no spurious stationary points: V' < 0 on (-1,0), > 0 on (0,1) is
        // wrong in general; just check sign pattern: negative slope right of
        // the barrier top toward +1? V decreases from 0 to 1.
        for i in 1..100 {
            let x = i as f64 / 100.0;
            assert!(p.grad(&[x])[0] < 0.0 || x < 1e-9, "slope sign at {x}");
            assert!(p.grad(&[-x])[0] > 0.0, "slope sign at {}", -x);
        }
    }

    #[test]
    fn global_local_shape() {
        let p = catalog_get("global_local_1d").unwrap();
        assert!((p.eval(&[1.0]) - 1.0).abs() < 1e-12);
        assert!((p.eval(&[-1.0]) - 1.5).abs() < 1e-12);
        assert!((p.eval(&[0.0]) - 1.8).abs() < 1e-12);
        assert!(norm2(&p.grad(&[-1.0])) < 1e-12); // local min is stationary
        assert_eq!(p.minima.len(), 1); // argmin is only the global one
    }

    #[test]
    fn sigmoid_regression_coercive() {
        let p = catalog_get("sigmoid_regression(64,0.5,3)").unwrap();
        let theta = vec![1000.0, -700.0, 300.0];
        let n2 = dot(&theta, &theta);
        assert!(p.eval(&theta) / n2 >= 0.5 / 2.0 - 1e-6);
        assert!(p.v_star > 0.0);
    }

    #[test]
    fn unknown_and_invalid() {
        assert!(matches!(catalog_get("nope"), Err(Error::UnknownName(_))));
        assert!(matches!(catalog_get("double_well_1d(-1,8)"), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn assumptions_quadratic() {
        let p = catalog_get("quadratic1d(1)").unwrap();
        let r = check_assumptions(&p, &[-10.0], &[10.0], 2.0).unwrap();
        let (r0, alpha0) = r.dissipativity.expect("dissipativity holds");
        assert!(r0 < 1e-12);
        assert!((alpha0 - 2.0).abs() < 0.05, "α₀={alpha0}");
        assert!(r.moment_integral_converged);
        assert!(r.sup_grad_sq_over_v <= 4.0 + 1e-9); // |2x|²/(x²+1) < 4
    }

    #[test]
    fn assumptions_double_well_needs_radius() {
        let p = catalog_get("double_well_1d(2,8)").unwrap();
        let r = check_assumptions(&p, &[-5.0], &[5.0], 2.0).unwrap();
        let (r0, _) = r.dissipativity.expect("holds outside some ball");
        assert!(r0 > 1.0, "R₀={r0} should exceed the well radius");
    }

    #[test]
    fn assumptions_reject_nonpositive() {
        let bad = Potential {
            dim: 1,
            name: "bad".into(),
            eval: Arc::new(|x| x[0]), // unbounded below
            grad: Arc::new(|_| vec![1.0]),
            hess: Some(Arc::new(|_| vec![0.0])),
            minima: vec![],
            v_star: 0.0,
            admissible_a: 1.0,
            regression: None,
        };
        assert!(check_assumptions(&bad, &[-10.0], &[10.0], 2.0).is_err());
    }
}
