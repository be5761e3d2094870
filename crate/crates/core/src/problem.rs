//! PDE data for ∂_t u + β̄·∇̄u − εΔ̄u = f on I × Ω and the three benchmark
//! problems (rotating pulse, boundary layer, interior layer).

use std::fmt;
use std::sync::Arc;

use crate::fe::MAX_AXES;
use crate::mesh::{BoundaryTag, Domain, Facet};
use crate::{Error, Result};

/// Space-time point `[t, x1, x2]` (unused trailing entries are ignored).
pub type Point = [f64; MAX_AXES];

/// Closed-form solution with the derivatives needed for sources and errors.
pub trait ExactSolution: Send + Sync {
    fn value(&self, p: &Point) -> f64;
    /// `[∂_t u, ∂_1 u, ∂_2 u]`
    fn gradient(&self, p: &Point) -> [f64; MAX_AXES];
    /// Spatial Laplacian.
    fn laplacian(&self, p: &Point) -> f64;
}

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point) -> [f64; 2] + Send + Sync>;
/// Lateral Neumann data g(p, n̄).
pub type NeumannFn = Arc<dyn Fn(&Point, &[f64; MAX_AXES]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub eps: f64,
    pub domain: Domain,
    /// spatial advection β̄; the space-time field is β = (1, β̄)
    pub beta: VectorFn,
    pub source: ScalarFn,
    pub dirichlet: ScalarFn,
    pub neumann: NeumannFn,
    /// u(0, ·)
    pub initial: ScalarFn,
    pub exact: Option<Arc<dyn ExactSolution>>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("eps", &self.eps)
            .field("domain", &self.domain)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionKind {
    Dirichlet,
    Neumann,
}

/// Boundary condition at a point of a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData {
    pub kind: ConditionKind,
    pub value: f64,
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    pub beta_n: f64,
}

impl ProblemSpec {
    /// Space-time advection β = (1, β̄).
    pub fn beta_st(&self, p: &Point) -> [f64; MAX_AXES] {
        let b = (self.beta)(p);
        [1.0, b[0], b[1]]
    }

    /// β·n for a unit normal along `axis` with sign `sign`.
    pub fn beta_n(&self, p: &Point, axis: usize, sign: f64) -> f64 {
        sign * self.beta_st(p)[axis]
    }

    /// Data built from an exact solution: f, Dirichlet, Neumann and
    /// initial data are all derived from `exact`.
    pub fn from_exact(
        name: &str,
        eps: f64,
        domain: Domain,
        beta: VectorFn,
        exact: Arc<dyn ExactSolution>,
    ) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!("diffusion {eps} must be positive")));
        }
        domain.validate()?;
        let d = domain.d;
        let (ex, b) = (exact.clone(), beta.clone());
        let source: ScalarFn = Arc::new(move |p| manufactured(&*ex, &b, eps, d, p));
        let ex = exact.clone();
        let dirichlet: ScalarFn = Arc::new(move |p| ex.value(p));
        let (ex, b) = (exact.clone(), beta.clone());
        let neumann: NeumannFn = Arc::new(move |p, n| {
            let g = ex.gradient(p);
            let bb = b(p);
            let bn = bb[0] * n[1] + if d > 1 { bb[1] * n[2] } else { 0.0 };
            let dn: f64 = (1..=d).map(|a| g[a] * n[a]).sum();
            let zm = if bn < 0.0 { 1.0 } else { 0.0 };
            eps * dn - zm * bn * ex.value(p)
        });
        let ex = exact.clone();
        let initial: ScalarFn = Arc::new(move |p| {
            let q = [0.0, p[1], p[2]];
            ex.value(&q)
        });
        Ok(ProblemSpec { name: name.to_string(), eps, domain, beta, source, dirichlet, neumann, initial, exact: Some(exact) })
    }

    /// f = ∂_t u + β̄·∇̄u − εΔ̄u from the exact solution.
    pub fn manufactured_source(&self, p: &Point) -> Result<f64> {
        let ex = self.exact.as_ref().ok_or(Error::MissingExactSolution)?;
        Ok(manufactured(&**ex, &self.beta, self.eps, self.domain.d, p))
    }

    /// Condition kind, data and inflow/outflow indicators at `p` on the
    /// boundary facet `facet`.
    pub fn boundary_data(&self, facet: &Facet, p: &Point) -> Result<BoundaryData> {
        if facet.tag == BoundaryTag::Interior {
            return Err(Error::WrongBoundary(facet.id));
        }
        let sign = facet.owners[0].normal_sign();
        let bn = self.beta_n(p, facet.axis, sign);
        let zm = if bn < 0.0 { 1.0 } else { 0.0 };
        let zp = if bn > 0.0 { 1.0 } else { 0.0 };
        let (kind, value) = match facet.tag {
            BoundaryTag::Dirichlet => (ConditionKind::Dirichlet, (self.dirichlet)(p)),
            BoundaryTag::Omega0 => (ConditionKind::Neumann, (self.initial)(p)),
            BoundaryTag::OmegaT => (ConditionKind::Neumann, 0.0),
            BoundaryTag::NeumannLateral => (ConditionKind::Neumann, (self.neumann)(p, &facet.normal(0))),
            BoundaryTag::Interior => unreachable!(),
        };
        Ok(BoundaryData { kind, value, zeta_minus: zm, zeta_plus: zp, beta_n: bn })
    }
}

fn manufactured(ex: &dyn ExactSolution, beta: &VectorFn, eps: f64, d: usize, p: &Point) -> f64 {
    let g = ex.gradient(p);
    let b = beta(p);
    let adv: f64 = (0..d).map(|i| b[i] * g[i + 1]).sum();
    g[0] + adv - eps * ex.laplacian(p)
}

/// Names accepted by [`builtin_problem`].
pub const BUILTIN_NAMES: [&str; 3] = ["rotating_pulse", "boundary_layer", "interior_layer"];

/// One of the three benchmark problems on the unit time interval.
pub fn builtin_problem(name: &str, eps: f64) -> Result<ProblemSpec> {
    match name {
        "rotating_pulse" => rotating_pulse(eps),
        "boundary_layer" => boundary_layer(eps),
        "interior_layer" => interior_layer(eps),
        _ => Err(Error::UnknownProblem(name.to_string())),
    }
}

pub fn rotating_pulse(eps: f64) -> Result<ProblemSpec> {
    let domain = Domain::new(1.0, &[-0.5, -0.5], &[0.5, 0.5]);
    let beta: VectorFn = Arc::new(|p| [-4.0 * p[2], 4.0 * p[1]]);
    let mut spec = ProblemSpec::from_exact(
        "rotating_pulse",
        eps,
        domain,
        beta,
        Arc::new(Pulse { eps, sigma: 0.1, centre: [-0.2, 0.1] }),
    )?;
    spec.source = Arc::new(|_| 0.0);
    Ok(spec)
}

pub fn boundary_layer(eps: f64) -> Result<ProblemSpec> {
    let domain = Domain::new(1.0, &[0.0, 0.0], &[1.0, 1.0]);
    let beta: VectorFn = Arc::new(|_| [1.0, 1.0]);
    let ex = BoundaryLayer { eps };
    let mut spec = ProblemSpec::from_exact("boundary_layer", eps, domain, beta, Arc::new(ex))?;
    spec.source = Arc::new(move |p| ex.source(p));
    Ok(spec)
}

pub fn interior_layer(eps: f64) -> Result<ProblemSpec> {
    let domain = Domain::new(1.0, &[-0.5, -0.5], &[0.5, 0.5]);
    let beta: VectorFn = Arc::new(|_| [1.0, 1.0]);
    let ex = InteriorLayer { eps };
    let mut spec = ProblemSpec::from_exact("interior_layer", eps, domain, beta, Arc::new(ex))?;
    spec.source = Arc::new(move |p| ex.source(p));
    Ok(spec)
}

/// Gaussian pulse rotating under β̄ = (−4x₂, 4x₁) while diffusing.
#[derive(Debug, Clone, Copy)]
pub struct Pulse {
    pub eps: f64,
    pub sigma: f64,
    pub centre: [f64; 2],
}

impl Pulse {
    /// (u, rotated offsets x̃ − c, rotated coordinates x̃, s = 2σ² + 4εt)
    fn parts(&self, p: &Point) -> (f64, [f64; 2], [f64; 2], f64) {
        let (t, x1, x2) = (p[0], p[1], p[2]);
        let (sn, cs) = (4.0 * t).sin_cos();
        let xt = [x1 * cs + x2 * sn, -x1 * sn + x2 * cs];
        let dv = [xt[0] - self.centre[0], xt[1] - self.centre[1]];
        let s2 = self.sigma * self.sigma;
        let s = 2.0 * s2 + 4.0 * self.eps * t;
        let r2 = dv[0] * dv[0] + dv[1] * dv[1];
        let u = s2 / (s2 + 2.0 * self.eps * t) * (-r2 / s).exp();
        (u, dv, xt, s)
    }
}

impl ExactSolution for Pulse {
    fn value(&self, p: &Point) -> f64 {
        self.parts(p).0
    }

    fn gradient(&self, p: &Point) -> [f64; MAX_AXES] {
        let (u, dv, xt, s) = self.parts(p);
        let (sn, cs) = (4.0 * p[0]).sin_cos();
        // ∇_x r² = 2 Rᵀ(x̃ − c)
        let g1 = 2.0 * (cs * dv[0] - sn * dv[1]);
        let g2 = 2.0 * (sn * dv[0] + cs * dv[1]);
        let r2 = dv[0] * dv[0] + dv[1] * dv[1];
        let (c1, c2) = (self.centre[0], self.centre[1]);
        let dr2 = 8.0 * (-c1 * xt[1] + c2 * xt[0]);
        let ut = u * (-4.0 * self.eps / s - dr2 / s + 4.0 * self.eps * r2 / (s * s));
        [ut, -u * g1 / s, -u * g2 / s]
    }

    fn laplacian(&self, p: &Point) -> f64 {
        let (u, dv, _, s) = self.parts(p);
        let r2 = dv[0] * dv[0] + dv[1] * dv[1];
        u * (4.0 * r2 / (s * s) - 4.0 / s)
    }
}

/// (1 − e^{−t}) φ(x₁) φ(x₂) with outflow layers at x = 1.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryLayer {
    pub eps: f64,
}

impl BoundaryLayer {
    /// φ, φ', φ''
    fn phi(&self, x: f64) -> [f64; 3] {
        let e = self.eps;
        let den = (-1.0 / e).exp_m1();
        let ex = ((x - 1.0) / e).exp();
        [((x - 1.0) / e).exp_m1() / den + x - 1.0, ex / (e * den) + 1.0, ex / (e * e * den)]
    }

    /// f = e^{−t}φ₁φ₂ + (1 − e^{−t})(φ₁ + φ₂), using φ' − εφ'' = 1.
    pub fn source(&self, p: &Point) -> f64 {
        let (a, b) = (self.phi(p[1]), self.phi(p[2]));
        let et = (-p[0]).exp();
        et * a[0] * b[0] + (1.0 - et) * (a[0] + b[0])
    }
}

impl ExactSolution for BoundaryLayer {
    fn value(&self, p: &Point) -> f64 {
        -(-p[0]).exp_m1() * self.phi(p[1])[0] * self.phi(p[2])[0]
    }

    fn gradient(&self, p: &Point) -> [f64; MAX_AXES] {
        let (a, b) = (self.phi(p[1]), self.phi(p[2]));
        let g = -(-p[0]).exp_m1();
        [(-p[0]).exp() * a[0] * b[0], g * a[1] * b[0], g * a[0] * b[1]]
    }

    fn laplacian(&self, p: &Point) -> f64 {
        let (a, b) = (self.phi(p[1]), self.phi(p[2]));
        -(-p[0]).exp_m1() * (a[2] * b[0] + a[0] * b[2])
    }
}

/// (1 − e^{−t}) atan((x₂ − x₁)/(√2 ε)) (1 − (x₁ + x₂)²/2).
#[derive(Debug, Clone, Copy)]
pub struct InteriorLayer {
    pub eps: f64,
}

impl InteriorLayer {
    fn a(&self) -> f64 {
        1.0 / (std::f64::consts::SQRT_2 * self.eps)
    }

    pub fn source(&self, p: &Point) -> f64 {
        let a = self.a();
        let (x1, x2) = (p[1], p[2]);
        let z = a * (x2 - x1);
        let at = z.atan();
        let s = x1 + x2;
        let b = 1.0 - 0.5 * s * s;
        let et = (-p[0]).exp();
        let w = 1.0 + z * z;
        let lap = -4.0 * a * a * z * b / (w * w) - 2.0 * at;
        et * at * b + (1.0 - et) * (-2.0 * s * at - self.eps * lap)
    }
}

impl ExactSolution for InteriorLayer {
    fn value(&self, p: &Point) -> f64 {
        let a = self.a();
        let s = p[1] + p[2];
        -(-p[0]).exp_m1() * (a * (p[2] - p[1])).atan() * (1.0 - 0.5 * s * s)
    }

    fn gradient(&self, p: &Point) -> [f64; MAX_AXES] {
        let a = self.a();
        let z = a * (p[2] - p[1]);
        let at = z.atan();
        let s = p[1] + p[2];
        let b = 1.0 - 0.5 * s * s;
        let g = -(-p[0]).exp_m1();
        let da = a / (1.0 + z * z);
        [(-p[0]).exp() * at * b, g * (-da * b - at * s), g * (da * b - at * s)]
    }

    fn laplacian(&self, p: &Point) -> f64 {
        let a = self.a();
        let z = a * (p[2] - p[1]);
        let s = p[1] + p[2];
        let b = 1.0 - 0.5 * s * s;
        let w = 1.0 + z * z;
        -(-p[0]).exp_m1() * (-4.0 * a * a * z * b / (w * w) - 2.0 * z.atan())
    }
}

/// u = c₀ + c_t t + Σ cᵢ xᵢ; lies in every discrete space.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub c0: f64,
    pub coef: [f64; MAX_AXES],
}

impl ExactSolution for Linear {
    fn value(&self, p: &Point) -> f64 {
        self.c0 + (0..MAX_AXES).map(|a| self.coef[a] * p[a]).sum::<f64>()
    }

    fn gradient(&self, _p: &Point) -> [f64; MAX_AXES] {
        self.coef
    }

    fn laplacian(&self, _p: &Point) -> f64 {
        0.0
    }
}

/// u = t + x₁ (+ x₂) with constant β̄ on the unit box; exactly representable.
pub fn linear_problem(d: usize, eps: f64, beta: [f64; 2]) -> Result<ProblemSpec> {
    let lo = vec![0.0; d];
    let hi = vec![1.0; d];
    let mut coef = [1.0, 1.0, 0.0];
    if d == 2 {
        coef[2] = 1.0;
    }
    ProblemSpec::from_exact(
        "linear",
        eps,
        Domain::new(1.0, &lo, &hi),
        Arc::new(move |_| beta),
        Arc::new(Linear { c0: 0.0, coef }),
    )
}
