//! Position-dependent diffusion fields σ(x), the product σσᵀ, the
//! divergence correction Υ and the drift b_a = −σσᵀ∇V + a²Υ.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{aat, identity, mat_vec, sym_eigenvalues};
use crate::numdiff::{fd_divergence, quasi_random_points};
use crate::potentials::{parse_catalog_name, Potential};

type MatrixFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A diffusion coefficient σ with its product σσᵀ and optional analytic
/// divergence of σσᵀ. `sigma0_sq` is the declared ellipticity floor.
pub struct DiffusionField {
    pub dim: usize,
    pub name: String,
    sigma: MatrixFn,
    sst: MatrixFn,
    /// Analytic Υ_i(x) = Σ_j ∂_j(σσᵀ)_{ij}(x), when available.
    upsilon_analytic: Option<VectorFn>,
    pub sigma0_sq: f64,
    /// Declared bound on ‖σ‖ over the intended working region.
    pub sigma_bound: f64,
}

impl fmt::Debug for DiffusionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("sigma0_sq", &self.sigma0_sq)
            .finish()
    }
}

impl DiffusionField {
    pub fn sigma(&self, x: &[f64]) -> Vec<f64> {
        (self.sigma)(x)
    }

    pub fn sigma_sigma_t(&self, x: &[f64]) -> Vec<f64> {
        (self.sst)(x)
    }

    pub fn has_analytic_upsilon(&self) -> bool {
        self.upsilon_analytic.is_some()
    }

    /// Υ(x): analytic when declared, else central finite differences of σσᵀ.
    pub fn upsilon(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("upsilon: non-finite input".into()));
        }
        let u = match &self.upsilon_analytic {
            Some(f) => f(x),
            None => self.upsilon_fd(x),
        };
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("upsilon: non-finite output at {x:?}")));
        }
        Ok(u)
    }

    /// Finite-difference Υ, also the oracle for the analytic route.
    pub fn upsilon_fd(&self, x: &[f64]) -> Vec<f64> {
        let sst = Arc::clone(&self.sst);
        fd_divergence(&move |y: &[f64]| sst(y), x)
    }
}

/// Potential and field bound together; the unit the integrators consume.
#[derive(Clone)]
pub struct DriftSpec {
    pub potential: Arc<Potential>,
    pub field: Arc<DiffusionField>,
    /// Test/ablation switch: when false the a²Υ correction is dropped.
    pub upsilon_enabled: bool,
}

impl DriftSpec {
    pub fn new(potential: Arc<Potential>, field: Arc<DiffusionField>) -> Result<Self> {
        if potential.dim != field.dim {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: potential d={}, field d={}",
                potential.dim, field.dim
            )));
        }
        Ok(Self { potential, field, upsilon_enabled: true })
    }

    pub fn without_upsilon(mut self) -> Self {
        self.upsilon_enabled = false;
        self
    }

    pub fn dim(&self) -> usize {
        self.potential.dim
    }

    /// b_a(x) = −σσᵀ(x)∇V(x) + a²Υ(x).
    pub fn drift(&self, x: &[f64], a: f64) -> Result<Vec<f64>> {
        let g = self.potential.grad(x);
        let sst = self.field.sigma_sigma_t(x);
        let mut b = mat_vec(&sst, &g);
        for v in &mut b {
            *v = -*v;
        }
        if self.upsilon_enabled {
            let u = self.field.upsilon(x)?;
            for (bi, ui) in b.iter_mut().zip(&u) {
                *bi += a * a * ui;
            }
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("drift: non-finite at {x:?}")));
        }
        Ok(b)
    }
}

/// Look up a diffusion field by catalog name. Gradient-dependent fields
/// need the potential they precondition.
pub fn field_get(
    spec: &str,
    dim: usize,
    potential: Option<&Arc<Potential>>,
) -> Result<Arc<DiffusionField>> {
    let (name, p) = parse_catalog_name(spec)?;
    match name.as_str() {
        "constant" => {
            let c = *p.first().unwrap_or(&1.0);
            if c <= 0.0 {
                return Err(Error::InvalidParameter("constant: c must be > 0".into()));
            }
            Ok(Arc::new(constant(c, dim)))
        }
        "scalar_smooth" => {
            if dim != 1 {
                return Err(Error::InvalidParameter("scalar_smooth is 1D".into()));
            }
            Ok(Arc::new(scalar_smooth()))
        }
        "diag_rmsprop" => {
            let lambda = *p.first().unwrap_or(&0.1);
            let sigma0 = *p.get(1).unwrap_or(&0.05);
            let sigma_max = *p.get(2).unwrap_or(&4.0);
            let pot = potential.ok_or_else(|| {
                Error::InvalidParameter("diag_rmsprop needs a potential gradient".into())
            })?;
            diag_rmsprop(pot, lambda, sigma0, sigma_max).map(Arc::new)
        }
        "rotation_mixed" => {
            if dim != 2 {
                return Err(Error::InvalidParameter("rotation_mixed is 2D".into()));
            }
            Ok(Arc::new(rotation_mixed()))
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}

/// σ(x) = c·I; the additive baseline, Υ ≡ 0.
pub fn constant(c: f64, dim: usize) -> DiffusionField {
    let eye = identity(dim);
    let sig: Vec<f64> = eye.iter().map(|v| c * v).collect();
    let sst: Vec<f64> = eye.iter().map(|v| c * c * v).collect();
    let (s1, s2) = (sig.clone(), sst.clone());
    DiffusionField {
        dim,
        name: format!("constant({c})"),
        sigma: Arc::new(move |_| s1.clone()),
        sst: Arc::new(move |_| s2.clone()),
        upsilon_analytic: Some(Arc::new(move |x: &[f64]| vec![0.0; x.len()])),
        sigma0_sq: c * c,
        sigma_bound: c,
    }
}

/// 1D σ(x) = √(1+x²), so σσᵀ = 1+x² and Υ(x) = 2x.
pub fn scalar_smooth() -> DiffusionField {
    DiffusionField {
        dim: 1,
        name: "scalar_smooth".into(),
        sigma: Arc::new(|x: &[f64]| vec![(1.0 + x[0] * x[0]).sqrt()]),
        sst: Arc::new(|x: &[f64]| vec![1.0 + x[0] * x[0]]),
        upsilon_analytic: Some(Arc::new(|x: &[f64]| vec![2.0 * x[0]])),
        sigma0_sq: 1.0,
        // unbounded globally; declared bound covers |x| ≤ 1000
        sigma_bound: (1.0 + 1e6_f64).sqrt(),
    }
}

/// RMSprop-style diagonal preconditioner σ = diag((λ+|∂_iV|)^{-1/2}),
/// clipped into [σ₀, σ_max] to keep ellipticity and boundedness.
pub fn diag_rmsprop(
    potential: &Arc<Potential>,
    lambda: f64,
    sigma0: f64,
    sigma_max: f64,
) -> Result<DiffusionField> {
    if lambda <= 0.0 {
        return Err(Error::InvalidParameter("diag_rmsprop: λ must be > 0".into()));
    }
    if !(sigma0 > 0.0 && sigma_max > sigma0) {
        return Err(Error::InvalidParameter("diag_rmsprop: need 0 < σ₀ < σ_max".into()));
    }
    let dim = potential.dim;
    let p1 = Arc::clone(potential);
    let entries = move |x: &[f64]| -> Vec<f64> {
        let g = p1.grad(x);
        g.iter()
            .map(|gi| (1.0 / (lambda + gi.abs()).sqrt()).clamp(sigma0, sigma_max))
            .collect()
    };
    let e1 = entries.clone();
    let e2 = entries;
    Ok(DiffusionField {
        dim,
        name: format!("diag_rmsprop({lambda})"),
        sigma: Arc::new(move |x: &[f64]| {
            let e = e1(x);
            let mut m = vec![0.0; dim * dim];
            for i in 0..dim {
                m[i * dim + i] = e[i];
            }
            m
        }),
        sst: Arc::new(move |x: &[f64]| {
            let e = e2(x);
            let mut m = vec![0.0; dim * dim];
            for i in 0..dim {
                m[i * dim + i] = e[i] * e[i];
            }
            m
        }),
        upsilon_analytic: None, // clipping breaks smoothness; FD fallback
        sigma0_sq: sigma0 * sigma0,
        sigma_bound: sigma_max,
    })
}

/// 2D non-diagonal smooth field built from tanh mixings.
pub fn rotation_mixed() -> DiffusionField {
    let t = |z: f64| z.tanh();
    let dt = |z: f64| 1.0 - z.tanh() * z.tanh();
    let sigma = move |x: &[f64]| -> Vec<f64> {
        vec![1.0 + 0.2 * t(x[1]), 0.3 * t(x[0]), -0.3 * t(x[0]), 1.0]
    };
    let sst = move |x: &[f64]| aat(&sigma(x), 2);
    DiffusionField {
        dim: 2,
        name: "rotation_mixed".into(),
        sigma: Arc::new(sigma),
        sst: Arc::new(sst),
        // sst = [[(1+0.2t₂)²+0.09t₁², -0.06t₁t₂], [-0.06t₁t₂, 1+0.09t₁²]]
        upsilon_analytic: Some(Arc::new(move |x: &[f64]| {
            let (t1, t2) = (t(x[0]), t(x[1]));
            let (dt1, dt2) = (dt(x[0]), dt(x[1]));
            vec![0.18 * t1 * dt1 - 0.06 * t1 * dt2, -0.06 * dt1 * t2]
        })),
        sigma0_sq: 0.5,
        sigma_bound: 2.0,
    }
}

pub fn field_names() -> Vec<&'static str> {
    vec![
        "constant(c)",
        "scalar_smooth",
        "diag_rmsprop(lambda[,sigma0,sigma_max])",
        "rotation_mixed",
    ]
}

/// Minimum eigenvalue of σσᵀ over quasi-random probes in a box.
#[derive(Debug, Clone)]
pub struct EllipticityReport {
    pub min_eigenvalue: f64,
    pub declared_sigma0_sq: f64,
    pub violated: bool,
}

pub fn ellipticity_scan(
    field: &DiffusionField,
    lo: &[f64],
    hi: &[f64],
    n_points: usize,
) -> Result<EllipticityReport> {
    if n_points < 100 {
        return Err(Error::InvalidInput("ellipticity_scan: n_points must be ≥ 100".into()));
    }
    let mut min_ev = f64::INFINITY;
    for x in quasi_random_points(lo, hi, n_points) {
        let sst = field.sigma_sigma_t(&x);
        if sst.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("σσᵀ non-finite at {x:?}")));
        }
        let ev = sym_eigenvalues(&sst, field.dim);
        min_ev = min_ev.min(ev[0]);
    }
    Ok(EllipticityReport {
        min_eigenvalue: min_ev,
        declared_sigma0_sq: field.sigma0_sq,
        violated: min_ev < field.sigma0_sq - 1e-12,
    })
}
