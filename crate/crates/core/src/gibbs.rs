//! Gibbs measures ν_a ∝ e^{-2(V-V*)/a²}: quadrature normalization,
//! sampling, the small-noise limit ν*, the acceptance-rejection coupling
//! and degenerate-minimum rescaling.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{det, sym_eigenvalues};
use crate::potentials::{Degeneracy, DegenerateMinimumSpec, Potential};
use crate::rng::{sub, NoiseStream};

/// Default quadrature resolutions (points per axis).
pub const GRID_1D: usize = 8193;
pub const GRID_2D: usize = 513;

/// A density tabulated on a uniform 1D grid with its CDF.
#[derive(Debug, Clone)]
pub struct Density1d {
    pub xs: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl Density1d {
    /// Build from unnormalized values on a uniform grid.
    pub fn from_unnormalized(xs: Vec<f64>, mut pdf: Vec<f64>) -> Result<Self> {
        if xs.len() < 3 || xs.len() != pdf.len() {
            return Err(Error::InvalidInput("Density1d: bad grid".into()));
        }
        let h = xs[1] - xs[0];
        let mut cdf = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            cdf[i] = cdf[i - 1] + 0.5 * h * (pdf[i - 1] + pdf[i]);
        }
        let total = *cdf.last().unwrap();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::NonFinite("Density1d: non-finite mass".into()));
        }
        for v in &mut pdf {
            *v /= total;
        }
        for v in &mut cdf {
            *v /= total;
        }
        Ok(Self { xs, pdf, cdf })
    }

    /// CDF at x, linear between grid nodes, clamped to [0,1].
    pub fn cdf_at(&self, x: f64) -> f64 {
        let (lo, hi) = (self.xs[0], *self.xs.last().unwrap());
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let h = self.xs[1] - self.xs[0];
        let k = (((x - lo) / h) as usize).min(self.xs.len() - 2);
        let t = (x - self.xs[k]) / h;
        self.cdf[k] + t * (self.cdf[k + 1] - self.cdf[k])
    }

    /// Quantile by monotone inverse of the piecewise-linear CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u));
        let k = self.cdf.partition_point(|&c| c < u);
        if k == 0 {
            return self.xs[0];
        }
        if k >= self.cdf.len() {
            return *self.xs.last().unwrap();
        }
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.xs[k - 1] + t * (self.xs[k] - self.xs[k - 1])
    }
}

/// Finite weighted sum of Dirac masses, the shape of the limit ν*.
#[derive(Debug, Clone)]
pub struct DiracMixture {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiracMixture {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidInput("DiracMixture: empty or mismatched".into()));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidInput("DiracMixture: negative weight".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("DiracMixture: weights sum to {s}")));
        }
        Ok(Self { points, weights })
    }
}

/// ν* = Σ w_i δ_{x_i*} with w_i ∝ (det ∇²V(x_i*))^{-1/2}.
pub fn nu_star(p: &Potential) -> Result<DiracMixture> {
    if p.minima.is_empty() {
        return Err(Error::InvalidInput("nu_star: no minima metadata".into()));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for m in &p.minima {
        if m.is_degenerate() {
            return Err(Error::InvalidInput(
                "nu_star: degenerate minimum, use the rescaled path".into(),
            ));
        }
        let d = det(&m.hessian_at_min, p.dim);
        if d <= 0.0 {
            return Err(Error::InvalidInput("nu_star: non-PD Hessian".into()));
        }
        points.push(m.location.clone());
        weights.push(1.0 / d.sqrt());
    }
    let s: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= s;
    }
    DiracMixture::new(points, weights)
}

enum Quadrature {
    One(Density1d),
    Two {
        lo: [f64; 2],
        hi: [f64; 2],
        n: usize,
        /// Normalized density on the (n × n) tensor grid, row-major.
        pdf: Vec<f64>,
    },
}

/// A normalized Gibbs measure on a truncation box.
pub struct GibbsMeasure {
    pub potential: Arc<Potential>,
    pub a: f64,
    pub log_z: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    quad: Quadrature,
}

/// Truncation box from minima metadata: x* ± 12·a·√((∇²V)⁻¹)_kk per
/// coordinate, so anisotropic wells get tight boxes in stiff directions
/// (degenerate minima use the rescaling width (a²/2)^{α_min} instead).
pub fn auto_box(p: &Potential, a: f64) -> (Vec<f64>, Vec<f64>) {
    let d = p.dim;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for m in &p.minima {
        let r: Vec<f64> = match &m.degeneracy {
            Degeneracy::PositiveDefinite => {
                let h = &m.hessian_at_min;
                let inv_diag: Vec<f64> = match d {
                    1 => vec![1.0 / h[0].max(1e-12)],
                    2 => {
                        let det = (h[0] * h[3] - h[1] * h[2]).max(1e-12);
                        vec![h[3] / det, h[0] / det]
                    }
                    _ => {
                        let ev = sym_eigenvalues(h, d);
                        vec![1.0 / ev[0].max(1e-12); d]
                    }
                };
                inv_diag.iter().map(|&v| 12.0 * a * v.max(0.0).sqrt()).collect()
            }
            Degeneracy::Degenerate(spec) => {
                let alpha = spec.exponents.iter().copied().fold(f64::INFINITY, f64::min);
                vec![12.0 * (0.5 * a * a).powf(alpha); d]
            }
        };
        for k in 0..d {
            lo[k] = lo[k].min(m.location[k] - r[k]);
            hi[k] = hi[k].max(m.location[k] + r[k]);
        }
    }
    (lo, hi)
}

impl GibbsMeasure {
    /// Normalize over `box_override` or the automatic box; validates the
    /// truncation by a box-doubling test on log 𝒵.
    pub fn normalize(
        potential: Arc<Potential>,
        a: f64,
        box_override: Option<(Vec<f64>, Vec<f64>)>,
        grid_n: usize,
    ) -> Result<Self> {
        if a <= 0.0 {
            return Err(Error::InvalidParameter(format!("a must be > 0, got {a}")));
        }
        let (lo, hi) = match box_override {
            Some(b) => b,
            None => auto_box(&potential, a),
        };
        if lo.len() != potential.dim || lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            return Err(Error::InvalidInput("normalize: empty or mismatched box".into()));
        }
        match potential.dim {
            1 => Self::normalize_1d(potential, a, lo, hi, grid_n),
            2 => Self::normalize_2d(potential, a, lo, hi, grid_n),
            _ => Err(Error::InvalidInput("normalize: quadrature only for d ≤ 2".into())),
        }
    }

    pub fn normalize_default(potential: Arc<Potential>, a: f64) -> Result<Self> {
        let n = if potential.dim == 1 { GRID_1D } else { GRID_2D };
        Self::normalize(potential, a, None, n)
    }

    fn normalize_1d(
        potential: Arc<Potential>,
        a: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
        grid_n: usize,
    ) -> Result<Self> {
        let n = if grid_n % 2 == 0 { grid_n + 1 } else { grid_n.max(5) };
        let z1 = simpson_1d(&potential, a, lo[0], hi[0], n);
        let mid = 0.5 * (lo[0] + hi[0]);
        let (dlo, dhi) = (mid - (hi[0] - lo[0]), mid + (hi[0] - lo[0]));
        let z2 = simpson_1d(&potential, a, dlo, dhi, 2 * n - 1);
        if !(z1 > 0.0 && z2 > 0.0 && z1.is_finite() && z2.is_finite()) {
            return Err(Error::NonFinite("normalize: non-finite mass".into()));
        }
        if (z2.ln() - z1.ln()).abs() >= 1e-6 {
            return Err(Error::Truncation(format!(
                "box [{}, {}] too small: Δlog𝒵 = {:.3e}",
                lo[0],
                hi[0],
                (z2.ln() - z1.ln()).abs()
            )));
        }
        let log_z = -z1.ln();
        let h = (hi[0] - lo[0]) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| lo[0] + i as f64 * h).collect();
        let pdf: Vec<f64> = xs
            .iter()
            .map(|&x| unnorm_density(&potential, a, &[x]))
            .collect();
        let dens = Density1d::from_unnormalized(xs, pdf)?;
        Ok(Self { potential, a, log_z, lo, hi, quad: Quadrature::One(dens) })
    }

    fn normalize_2d(
        potential: Arc<Potential>,
        a: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
        grid_n: usize,
    ) -> Result<Self> {
        let n = grid_n.max(65) | 1; // odd so the half grid shares nodes
        let box2 = |lo: &[f64], hi: &[f64]| -> Result<f64> {
            let coarse = trapezoid_2d(&potential, a, lo, hi, (n + 1) / 2);
            let fine = trapezoid_2d(&potential, a, lo, hi, n);
            if !(fine > 0.0 && fine.is_finite()) {
                return Err(Error::NonFinite("normalize: non-finite mass".into()));
            }
            // Richardson: trapezoid error is O(h²)
            Ok(fine + (fine - coarse) / 3.0)
        };
        let z1 = box2(&lo, &hi)?;
        let dlo: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 1.5 * l - 0.5 * h).collect();
        let dhi: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 1.5 * h - 0.5 * l).collect();
        let z2 = box2(&dlo, &dhi)?;
        if (z2.ln() - z1.ln()).abs() >= 1e-6 {
            return Err(Error::Truncation(format!(
                "2D box too small: Δlog𝒵 = {:.3e}",
                (z2.ln() - z1.ln()).abs()
            )));
        }
        let log_z = -z1.ln();
        let mut pdf = Vec::with_capacity(n * n);
        for i in 0..n {
            let x0 = lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let x1 = lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64;
                pdf.push(unnorm_density(&potential, a, &[x0, x1]) / z1);
            }
        }
        let quad = Quadrature::Two { lo: [lo[0], lo[1]], hi: [hi[0], hi[1]], n, pdf };
        Ok(Self { potential, a, log_z, lo, hi, quad })
    }

    /// log ν_a(x) = log 𝒵_a − 2(V(x)−V*)/a².
    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_z - 2.0 * (self.potential.eval(x) - self.potential.v_star) / (self.a * self.a)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    pub fn density_1d(&self) -> Result<&Density1d> {
        match &self.quad {
            Quadrature::One(d) => Ok(d),
            _ => Err(Error::InvalidInput("density_1d: measure is not 1D".into())),
        }
    }

    /// Quadrature mass of each nearest-minimum basin (1D).
    pub fn basin_masses(&self) -> Result<Vec<f64>> {
        let d = self.density_1d()?;
        let h = d.xs[1] - d.xs[0];
        let mut masses = vec![0.0; self.potential.minima.len()];
        for (x, p) in d.xs.iter().zip(&d.pdf) {
            masses[self.potential.nearest_minimum(&[*x])] += p * h;
        }
        let s: f64 = masses.iter().sum();
        for m in &mut masses {
            *m /= s;
        }
        Ok(masses)
    }

    /// n draws, reproducible per (stream, batch).
    pub fn sample(&self, n: usize, stream: &NoiseStream, batch: u64) -> Result<Vec<Vec<f64>>> {
        match &self.quad {
            Quadrature::One(d) => Ok((0..n)
                .map(|i| vec![d.quantile(stream.uniform(batch, sub::BATCH, i as u64))])
                .collect()),
            Quadrature::Two { .. } => self.sample_2d_rejection(n, stream, batch),
        }
    }

    /// Rejection sampler with a Gaussian-mixture envelope at the minima.
    fn sample_2d_rejection(
        &self,
        n: usize,
        stream: &NoiseStream,
        batch: u64,
    ) -> Result<Vec<Vec<f64>>> {
        let mix = nu_star(&self.potential)?;
        // per-minimum covariance a²·H⁻¹, twice the local Gibbs covariance
        struct Comp {
            loc: Vec<f64>,
            chol: [f64; 3], // (l11, l21, l22) of the covariance
            hess: Vec<f64>,
            hdet: f64,
        }
        let mut comps = Vec::new();
        for m in &self.potential.minima {
            let d = det(&m.hessian_at_min, 2);
            let h = &m.hessian_at_min;
            let inv = [h[3] / d, -h[1] / d, -h[2] / d, h[0] / d];
            let cov: Vec<f64> = inv.iter().map(|v| self.a * self.a * v).collect();
            let l11 = cov[0].sqrt();
            let l21 = cov[2] / l11;
            let l22 = (cov[3] - l21 * l21).max(1e-300).sqrt();
            comps.push(Comp {
                loc: m.location.clone(),
                chol: [l11, l21, l22],
                hess: h.clone(),
                hdet: d,
            });
        }
        let env_pdf = |x: &[f64]| -> f64 {
            let mut s = 0.0;
            for (c, w) in comps.iter().zip(&mix.weights) {
                let dx = [x[0] - c.loc[0], x[1] - c.loc[1]];
                // exponent ½ dxᵀ cov⁻¹ dx with cov = a²H⁻¹
                let q = c.hess[0] * dx[0] * dx[0]
                    + 2.0 * c.hess[1] * dx[0] * dx[1]
                    + c.hess[3] * dx[1] * dx[1];
                let norm = c.hdet.sqrt() / (2.0 * std::f64::consts::PI * self.a * self.a);
                s += w * norm * (-0.5 * q / (self.a * self.a)).exp();
            }
            s
        };
        // envelope constant from the quadrature grid
        let Quadrature::Two { lo, hi, n: gn, pdf } = &self.quad else { unreachable!() };
        let mut c_env: f64 = 0.0;
        for i in 0..*gn {
            let x0 = lo[0] + (hi[0] - lo[0]) * i as f64 / (*gn - 1) as f64;
            for j in 0..*gn {
                let x1 = lo[1] + (hi[1] - lo[1]) * j as f64 / (*gn - 1) as f64;
                let e = env_pdf(&[x0, x1]);
                if e > 0.0 {
                    c_env = c_env.max(pdf[i * gn + j] / e);
                }
            }
        }
        let c_env = c_env * 1.05;
        let mut rng = stream.sequential(batch, sub::BATCH);
        let gauss = move |rng: &mut crate::rng::SeqRng| -> f64 {
            let u1 = rng.uniform();
            let u2 = rng.uniform();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let mut out = Vec::with_capacity(n);
        let mut proposals = 0usize;
        while out.len() < n {
            proposals += 1;
            if proposals > 10_000 * (n + 100) {
                return Err(Error::EnvelopeFailure(out.len() as f64 / proposals as f64));
            }
            // pick a component
            let u = rng.uniform();
            let mut acc = 0.0;
            let mut k = 0;
            for (i, w) in mix.weights.iter().enumerate() {
                acc += w;
                if u <= acc {
                    k = i;
                    break;
                }
            }
            let c = &comps[k];
            let (z1, z2) = (gauss(&mut rng), gauss(&mut rng));
            let l = &c.chol;
            let x = [c.loc[0] + l[0] * z1, c.loc[1] + l[1] * z1 + l[2] * z2];
            let accept = self.density(&x) / (c_env * env_pdf(&x));
            if rng.uniform() < accept {
                out.push(x.to_vec());
            }
        }
        Ok(out)
    }

    /// CSV dump of the quadrature grid for plotting.
    pub fn grid_csv(&self) -> String {
        match &self.quad {
            Quadrature::One(d) => {
                let mut s = String::from("x,density\n");
                for (x, p) in d.xs.iter().zip(&d.pdf) {
                    s.push_str(&format!("{x},{p}\n"));
                }
                s
            }
            Quadrature::Two { lo, hi, n, pdf } => {
                let mut s = String::from("x1,x2,density\n");
                for i in 0..*n {
                    let x0 = lo[0] + (hi[0] - lo[0]) * i as f64 / (*n - 1) as f64;
                    for j in 0..*n {
                        let x1 = lo[1] + (hi[1] - lo[1]) * j as f64 / (*n - 1) as f64;
                        s.push_str(&format!("{x0},{x1},{}\n", pdf[i * n + j]));
                    }
                }
                s
            }
        }
    }
}

fn unnorm_density(p: &Potential, a: f64, x: &[f64]) -> f64 {
    (-2.0 * (p.eval(x) - p.v_star) / (a * a)).exp()
}

fn simpson_1d(p: &Potential, a: f64, lo: f64, hi: f64, n: usize) -> f64 {
    debug_assert!(n % 2 == 1 && n >= 3);
    let h = (hi - lo) / (n - 1) as f64;
    let mut s = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * unnorm_density(p, a, &[lo + i as f64 * h]);
    }
    s * h / 3.0
}

fn trapezoid_2d(p: &Potential, a: f64, lo: &[f64], hi: &[f64], n: usize) -> f64 {
    let h0 = (hi[0] - lo[0]) / (n - 1) as f64;
    let h1 = (hi[1] - lo[1]) / (n - 1) as f64;
    let mut s = 0.0;
    for i in 0..n {
        let wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let x0 = lo[0] + i as f64 * h0;
        for j in 0..n {
            let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            let x1 = lo[1] + j as f64 * h1;
            s += wi * wj * unnorm_density(p, a, &[x0, x1]);
        }
    }
    s * h0 * h1
}

/// Exact W1 between two 1D Gibbs measures: ∫|F−G| on a shared fine grid.
pub fn w1_exact_1d(mu: &GibbsMeasure, nu: &GibbsMeasure) -> Result<f64> {
    let dm = mu.density_1d()?;
    let dn = nu.density_1d()?;
    let lo = dm.xs[0].min(dn.xs[0]);
    let hi = dm.xs.last().unwrap().max(*dn.xs.last().unwrap());
    let n = 4 * GRID_1D;
    let h = (hi - lo) / (n - 1) as f64;
    let mut s = 0.0;
    for i in 0..n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        s += w * (dm.cdf_at(x) - dn.cdf_at(x)).abs();
    }
    Ok(s * h)
}

/// Exact W1 between a 1D Gibbs measure and a Dirac mixture.
pub fn w1_to_mixture_1d(mu: &GibbsMeasure, mix: &DiracMixture) -> Result<f64> {
    let dm = mu.density_1d()?;
    let mut atoms: Vec<(f64, f64)> =
        mix.points.iter().map(|p| p[0]).zip(mix.weights.iter().copied()).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let step_cdf = |x: f64| -> f64 {
        atoms.iter().take_while(|(p, _)| *p <= x).map(|(_, w)| w).sum()
    };
    let lo = dm.xs[0].min(atoms[0].0 - 1.0);
    let hi = dm.xs.last().unwrap().max(atoms.last().unwrap().0 + 1.0);
    let n = 4 * GRID_1D;
    let h = (hi - lo) / (n - 1) as f64;
    let mut s = 0.0;
    for i in 0..n {
        // midpoint rule avoids straddling the CDF jumps
        let x = lo + (i as f64 + 0.5) * h;
        if x > hi {
            break;
        }
        s += (dm.cdf_at(x) - step_cdf(x)).abs();
    }
    Ok(s * h)
}

/// Grid-checked density-ratio bound M with sup f/g ≤ M (1.01 safety).
pub fn ratio_bound_grid(mu: &GibbsMeasure, nu: &GibbsMeasure) -> Result<f64> {
    let dm = mu.density_1d()?;
    let mut sup: f64 = 0.0;
    for &x in &dm.xs {
        let f = mu.density(&[x]);
        let g = nu.density(&[x]);
        if f > 0.0 {
            if g <= 0.0 {
                return Err(Error::RatioBound("g vanishes where f > 0".into()));
            }
            sup = sup.max(f / g);
        }
    }
    Ok(sup * 1.01)
}

/// Analytic M = 𝒵_{a'}/𝒵_a for nested Gibbs measures (a' < a): the ratio
/// e^{−2(V−V*)(1/a'² − 1/a²)} is maximal at the argmin where it equals 1.
pub fn nested_ratio_bound(mu: &GibbsMeasure, nu: &GibbsMeasure) -> Result<f64> {
    if mu.a >= nu.a {
        return Err(Error::InvalidInput("nested bound needs a_mu < a_nu".into()));
    }
    Ok((mu.log_z - nu.log_z).exp())
}

/// Acceptance-rejection coupling: pairs (X′, Y) with X′ ~ μ, Y ~ ν,
/// X′ = Y when U ≤ f(Y)/(M g(Y)), else an independent μ draw.
pub fn coupled_pair(
    mu: &GibbsMeasure,
    nu: &GibbsMeasure,
    m_bound: Option<f64>,
    n: usize,
    stream: &NoiseStream,
    batch: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let m = match m_bound {
        Some(m) => m,
        None => ratio_bound_grid(mu, nu)?,
    };
    // verify f ≤ M g on the grid; relative slack because the exact
    // nested bound attains equality at the argmin
    let dm = mu.density_1d()?;
    for &x in &dm.xs {
        if mu.density(&[x]) > m * nu.density(&[x]) * (1.0 + 1e-9) {
            return Err(Error::RatioBound(format!("f > M·g at x = {x}")));
        }
    }
    let ys = nu.sample(n, stream, batch)?;
    let xs = mu.sample(n, stream, batch.wrapping_add(0x9e37_79b9))?;
    let mut out = Vec::with_capacity(n);
    for (i, (y, x)) in ys.into_iter().zip(xs).enumerate() {
        let u = stream.uniform(batch, sub::BATCH, (2 * n + i) as u64);
        let f = mu.density(&y);
        let g = nu.density(&y);
        let xp = if g > 0.0 && u <= f / (m * g) { y.clone() } else { x };
        out.push((xp, y));
    }
    Ok(out)
}

/// Deterministic coupling bound E|X−Y| − (1/M)E|X−X̃| for independent
/// X, X̃ ~ μ and Y ~ ν, from CDFs on a shared fine grid:
/// E|X−Y| = ∫ F(1−G) + G(1−F), E|X−X̃| = 2∫ F(1−F).
pub fn coupling_w1_bound_1d(mu: &GibbsMeasure, nu: &GibbsMeasure, m: f64) -> Result<f64> {
    if m < 1.0 {
        return Err(Error::RatioBound(format!("M = {m} < 1 is impossible")));
    }
    let dm = mu.density_1d()?;
    let dn = nu.density_1d()?;
    let lo = dm.xs[0].min(dn.xs[0]);
    let hi = dm.xs.last().unwrap().max(*dn.xs.last().unwrap());
    let n = 4 * GRID_1D;
    let h = (hi - lo) / (n - 1) as f64;
    let (mut e_xy, mut e_xx) = (0.0, 0.0);
    for i in 0..n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let f = dm.cdf_at(x);
        let g = dn.cdf_at(x);
        e_xy += w * (f * (1.0 - g) + g * (1.0 - f));
        e_xx += w * 2.0 * f * (1.0 - f);
    }
    Ok((e_xy - e_xx / m) * h)
}

/// Samples of (Z_s − x*)/s^α with Z_s ~ ν_{√(2s)}, for a potential whose
/// minimum carries a DegenerateMinimumSpec (1D).
pub fn degenerate_rescaled_law(
    p: &Arc<Potential>,
    s: f64,
    n: usize,
    stream: &NoiseStream,
    batch: u64,
) -> Result<Vec<f64>> {
    if p.dim != 1 {
        return Err(Error::InvalidInput("degenerate_rescaled_law: 1D only".into()));
    }
    if s <= 0.0 {
        return Err(Error::InvalidParameter("s must be > 0".into()));
    }
    let min = p
        .minima
        .iter()
        .find(|m| m.is_degenerate())
        .ok_or_else(|| Error::InvalidInput("no degenerate minimum".into()))?;
    let Degeneracy::Degenerate(spec) = &min.degeneracy else { unreachable!() };
    let alpha = spec.exponents[0];
    let x_star = min.location[0];
    let a = (2.0 * s).sqrt();
    let g = GibbsMeasure::normalize_default(Arc::clone(p), a)?;
    let scale = s.powf(alpha);
    Ok(g.sample(n, stream, batch)?
        .into_iter()
        .map(|x| (x[0] - x_star) / scale)
        .collect())
}

/// The limit density ∝ exp(−g) of the rescaled law, tabulated.
pub fn degenerate_limit_density(
    spec: &DegenerateMinimumSpec,
    half_width: f64,
    n: usize,
) -> Result<Density1d> {
    let n = n.max(101);
    let h = 2.0 * half_width / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| -half_width + i as f64 * h).collect();
    let g = &spec.limit_polynomial;
    let pdf: Vec<f64> = xs.iter().map(|&x| (-g(&[x])).exp()).collect();
    Density1d::from_unnormalized(xs, pdf)
}
