//! Parametric immersions into the flat model and all chart differentiation:
//! Jacobians, second derivatives, induced metric, Christoffel symbols,
//! orthonormal frames and the intrinsic curvature tensor.

use crate::ambient::{AmbientVector, ProductAmbient, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::fd::{diff1, diff2, stencil_reach};
use crate::jet::{Jet1, Jet2};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// A chart map evaluated over `f64` or jets. Implementors write one generic
/// evaluator and forward it through the three monomorphic entry points (see
/// [`impl_chart_map!`]).
pub trait ChartMap: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval_f64(&self, x: &[f64]) -> Vec<f64>;
    fn eval_jet1(&self, x: &[Jet1]) -> Vec<Jet1>;
    fn eval_jet2(&self, x: &[Jet2]) -> Vec<Jet2>;
}

/// Forwards the object-safe [`ChartMap`] entry points to an inherent generic
/// `fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S>` plus `dim_in`/`dim_out`.
#[macro_export]
macro_rules! impl_chart_map {
    ($ty:ty) => {
        impl $crate::immersion::ChartMap for $ty {
            fn dim_in(&self) -> usize {
                self.dim_in()
            }
            fn dim_out(&self) -> usize {
                self.dim_out()
            }
            fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
                self.eval(x)
            }
            fn eval_jet1(&self, x: &[$crate::jet::Jet1]) -> Vec<$crate::jet::Jet1> {
                self.eval(x)
            }
            fn eval_jet2(&self, x: &[$crate::jet::Jet2]) -> Vec<$crate::jet::Jet2> {
                self.eval(x)
            }
        }
    };
}

/// Axis-aligned chart domain in R^m.
#[derive(Debug, Clone)]
pub struct ChartBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ChartBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::Validation("chart box must satisfy lo < hi per axis".into()));
        }
        Ok(ChartBox { lo, hi })
    }

    pub fn symmetric(m: usize, half: f64) -> Self {
        ChartBox { lo: vec![-half; m], hi: vec![half; m] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains_with_margin(&self, x: &[f64], margin: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(xi, (lo, hi))| *xi >= lo + margin && *xi <= hi - margin)
    }

    /// Uniform grid, shrunk from the boundary by `margin`, with at most `cap`
    /// points in total (points per axis are reduced until under the cap).
    pub fn grid(&self, per_axis: usize, margin: f64, cap: usize) -> Vec<Vec<f64>> {
        let m = self.dim();
        let mut per = per_axis.max(1);
        while per > 1 && per.pow(m as u32) > cap {
            per -= 1;
        }
        let axis_points: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let lo = self.lo[i] + margin;
                let hi = self.hi[i] - margin;
                if per == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..per).map(|j| lo + (hi - lo) * j as f64 / (per - 1) as f64).collect()
                }
            })
            .collect();
        let mut out = Vec::with_capacity(per.pow(m as u32));
        let mut idx = vec![0usize; m];
        loop {
            out.push((0..m).map(|i| axis_points[i][idx[i]]).collect());
            let mut carry = 0;
            loop {
                if carry == m {
                    return out;
                }
                idx[carry] += 1;
                if idx[carry] < per {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
        }
    }
}

/// Differentiation settings.
#[derive(Debug, Clone, Copy)]
pub struct DiffConfig {
    /// Base finite-difference step.
    pub fd_step: f64,
    /// Stencil order, 2 or 4.
    pub fd_order: usize,
    /// Use the jet evaluators for Jacobians and Hessians where available.
    pub use_exact: bool,
    /// Step multiplier for nested (second-level) differentiation.
    pub nested_factor: f64,
    /// Step multiplier for direct second-derivative stencils (the eps/h^2
    /// roundoff of a second difference needs a coarser step).
    pub hessian_factor: f64,
    /// Quadric-membership tolerance for input validation.
    pub membership_tol: f64,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            fd_step: 1e-5,
            fd_order: 4,
            use_exact: true,
            nested_factor: 10.0,
            hessian_factor: 100.0,
            membership_tol: MEMBERSHIP_TOL,
        }
    }
}

impl DiffConfig {
    pub fn with_fd_step(mut self, h: f64) -> Self {
        assert!(h > 0.0);
        self.fd_step = h;
        self
    }

    pub fn with_exact(mut self, exact: bool) -> Self {
        self.use_exact = exact;
        self
    }

    /// Step used when differentiating first-level derived fields (metric,
    /// connection coefficients) a second time.
    pub fn nested_step(&self) -> f64 {
        self.fd_step * self.nested_factor
    }

    /// Step used for direct second-derivative stencils of the evaluator.
    pub fn hessian_step(&self) -> f64 {
        self.fd_step * self.hessian_factor
    }
}

/// A parametric immersion of one chart into the flat model of the product.
#[derive(Clone)]
pub struct ImmersionMap {
    ambient: ProductAmbient,
    m: usize,
    domain: ChartBox,
    map: Arc<dyn ChartMap>,
}

impl ImmersionMap {
    pub fn new(ambient: ProductAmbient, domain: ChartBox, map: Arc<dyn ChartMap>) -> Result<Self> {
        let m = domain.dim();
        if map.dim_in() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: map.dim_in(),
                context: "chart map input dimension".into(),
            });
        }
        if map.dim_out() != ambient.flat_dim() {
            return Err(Error::DimensionMismatch {
                expected: ambient.flat_dim(),
                got: map.dim_out(),
                context: "chart map output dimension".into(),
            });
        }
        if m > ambient.product_dim() {
            return Err(Error::Validation(format!(
                "intrinsic dimension {m} exceeds ambient dimension {}",
                ambient.product_dim()
            )));
        }
        Ok(ImmersionMap { ambient, m, domain, map })
    }

    pub fn ambient(&self) -> &ProductAmbient {
        &self.ambient
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.m
    }

    pub fn codim(&self) -> usize {
        self.ambient.product_dim() - self.m
    }

    pub fn domain(&self) -> &ChartBox {
        &self.domain
    }

    pub fn chart_map(&self) -> Arc<dyn ChartMap> {
        self.map.clone()
    }

    pub fn position(&self, x: &[f64]) -> AmbientVector {
        AmbientVector::from_vec(self.map.eval_f64(x))
    }

    /// Validate quadric membership of the evaluator on a sample grid.
    pub fn validate_on_grid(&self, per_axis: usize, tol: f64) -> Result<()> {
        for x in self.domain.grid(per_axis, 0.0, 625) {
            self.ambient.validate_on_quadric(&self.position(&x), tol)?;
        }
        Ok(())
    }

    /// Jacobian d F: columns are the coordinate derivatives.
    pub fn jacobian(&self, x: &[f64], cfg: &DiffConfig) -> DMatrix<f64> {
        let nf = self.ambient.flat_dim();
        if cfg.use_exact {
            let jets: Vec<Jet1> = (0..self.m).map(|i| Jet1::var(x[i], i, self.m)).collect();
            let out = self.map.eval_jet1(&jets);
            DMatrix::from_fn(nf, self.m, |r, c| out[r].d[c])
        } else {
            let f = |y: &[f64]| self.position(y);
            let mut j = DMatrix::zeros(nf, self.m);
            for i in 0..self.m {
                j.set_column(i, &diff1(&f, x, i, cfg.fd_step, cfg.fd_order));
            }
            j
        }
    }

    /// Second derivative of F along chart directions (i, j).
    pub fn second_derivative(&self, x: &[f64], i: usize, j: usize, cfg: &DiffConfig) -> AmbientVector {
        if cfg.use_exact {
            let jets: Vec<Jet2> = (0..self.m).map(|k| Jet2::var(x[k], k, self.m)).collect();
            let out = self.map.eval_jet2(&jets);
            AmbientVector::from_fn(self.ambient.flat_dim(), |r, _| out[r].hess(i, j))
        } else {
            let f = |y: &[f64]| self.position(y);
            diff2(&f, x, i, j, cfg.hessian_step(), cfg.fd_order)
        }
    }

    /// All second derivatives at once (cheaper with jets): entry (i, j).
    pub fn hessian(&self, x: &[f64], cfg: &DiffConfig) -> Vec<Vec<AmbientVector>> {
        if cfg.use_exact {
            let jets: Vec<Jet2> = (0..self.m).map(|k| Jet2::var(x[k], k, self.m)).collect();
            let out = self.map.eval_jet2(&jets);
            let nf = self.ambient.flat_dim();
            (0..self.m)
                .map(|i| {
                    (0..self.m)
                        .map(|j| AmbientVector::from_fn(nf, |r, _| out[r].hess(i, j)))
                        .collect()
                })
                .collect()
        } else {
            (0..self.m)
                .map(|i| (0..self.m).map(|j| self.second_derivative(x, i, j, cfg)).collect())
                .collect()
        }
    }

    /// Induced metric g_ij at x.
    pub fn metric(&self, x: &[f64], cfg: &DiffConfig) -> DMatrix<f64> {
        let j = self.jacobian(x, cfg);
        self.metric_from_jacobian(&j)
    }

    pub fn metric_from_jacobian(&self, j: &DMatrix<f64>) -> DMatrix<f64> {
        let signs = self.ambient.sign_table();
        let mut g = DMatrix::zeros(self.m, self.m);
        for a in 0..self.m {
            for b in a..self.m {
                let mut acc = 0.0;
                for r in 0..j.nrows() {
                    acc += signs[r] * j[(r, a)] * j[(r, b)];
                }
                g[(a, b)] = acc;
                g[(b, a)] = acc;
            }
        }
        g
    }

    /// Christoffel symbols Gamma^k_ij from central differences of the metric.
    /// Layout: `gamma[k][i * m + j]`.
    pub fn christoffels(&self, x: &[f64], cfg: &DiffConfig) -> Result<Vec<DVector<f64>>> {
        let m = self.m;
        let g0 = self.metric(x, cfg);
        let ginv = invert_metric(&g0)?;
        // dg[l] = flattened d g / d x_l.
        let gfield = |y: &[f64]| flatten(&self.metric(y, cfg));
        let dg: Vec<DVector<f64>> =
            (0..m).map(|l| diff1(&gfield, x, l, cfg.fd_step, cfg.fd_order)).collect();
        let d = |l: usize, i: usize, j: usize| dg[l][i * m + j];
        let mut out = vec![DVector::zeros(m * m); m];
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut acc = 0.0;
                    for l in 0..m {
                        acc += 0.5 * ginv[(k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j));
                    }
                    out[k][i * m + j] = acc;
                }
            }
        }
        Ok(out)
    }

    /// Margin consumed by first-level differentiation at `cfg`.
    pub fn first_level_margin(&self, cfg: &DiffConfig) -> f64 {
        let jac = if cfg.use_exact { 0.0 } else { stencil_reach(cfg.fd_step, cfg.fd_order) };
        jac + stencil_reach(cfg.fd_step, cfg.fd_order)
    }

    pub(crate) fn require_margin(&self, x: &[f64], margin: f64) -> Result<()> {
        if !self.domain.contains_with_margin(x, margin) {
            return Err(Error::InsufficientMargin { point: x.to_vec(), needed: margin });
        }
        Ok(())
    }

    /// Build the full frame data at a chart point.
    pub fn frame_at(&self, x: &[f64], cfg: &DiffConfig) -> Result<FramedPoint> {
        self.require_margin(x, self.first_level_margin(cfg))?;
        let p = self.position(x);
        self.ambient.validate_on_quadric(&p, cfg.membership_tol)?;

        let jac = self.jacobian(x, cfg);
        let g = self.metric_from_jacobian(&jac);
        let ginv = invert_metric(&g).map_err(|_| Error::DegenerateImmersion {
            point: x.to_vec(),
            detail: "induced metric not positive definite".into(),
        })?;

        // Pivoted Gram-Schmidt on the Jacobian columns, tracking chart
        // coefficients so frame vectors can be expressed in the chart basis.
        let (tangent_frame, frame_coeffs) = self.tangent_frame(&jac, x)?;

        let (nu1, nu2) = self.ambient.h_normals(&p)?;

        // Normal space: flat_inner-orthogonal complement of the tangent frame
        // and the position normals, via a rank-revealing decomposition.
        let normal_frame = self.normal_frame(&tangent_frame, &nu1, &nu2, x)?;

        let gamma = self.christoffels(x, cfg)?;

        Ok(FramedPoint {
            chart: x.to_vec(),
            position: p,
            jacobian: jac,
            tangent_frame,
            frame_coeffs,
            normal_frame,
            nu1,
            nu2,
            metric: g,
            metric_inv: ginv,
            christoffels: gamma,
        })
    }

    fn tangent_frame(
        &self,
        jac: &DMatrix<f64>,
        x: &[f64],
    ) -> Result<(Vec<AmbientVector>, DMatrix<f64>)> {
        let m = self.m;
        let inner = |a: &AmbientVector, b: &AmbientVector| self.ambient.flat_inner_unchecked(a, b);
        let mut vecs: Vec<AmbientVector> = (0..m).map(|i| jac.column(i).clone_owned()).collect();
        let mut coeffs: Vec<DVector<f64>> = (0..m)
            .map(|i| DVector::from_fn(m, |r, _| if r == i { 1.0 } else { 0.0 }))
            .collect();
        let mut frame: Vec<AmbientVector> = Vec::with_capacity(m);
        let mut frame_coeffs: Vec<DVector<f64>> = Vec::with_capacity(m);
        let scale = vecs.iter().map(|v| inner(v, v)).fold(0.0, f64::max);
        for _ in 0..m {
            // Pivot: largest remaining self-inner-product.
            let (mut best, mut best_val) = (usize::MAX, f64::NEG_INFINITY);
            for (i, v) in vecs.iter().enumerate() {
                let q = inner(v, v);
                if q > best_val {
                    best_val = q;
                    best = i;
                }
            }
            let mut v = vecs.remove(best);
            let mut c = coeffs.remove(best);
            for (e, ec) in frame.iter().zip(&frame_coeffs) {
                let dot = inner(&v, e);
                v -= e * dot;
                c -= ec * dot;
            }
            let q = inner(&v, &v);
            if q <= 1e-20 * scale {
                return Err(Error::DegenerateImmersion {
                    point: x.to_vec(),
                    detail: format!("Jacobian rank below {m}"),
                });
            }
            let norm = q.sqrt();
            frame.push(v / norm);
            frame_coeffs.push(c / norm);
        }
        let coeff_mat = DMatrix::from_fn(m, m, |i, a| frame_coeffs[a][i]);
        Ok((frame, coeff_mat))
    }

    fn normal_frame(
        &self,
        tangent: &[AmbientVector],
        nu1: &Option<AmbientVector>,
        nu2: &Option<AmbientVector>,
        x: &[f64],
    ) -> Result<Vec<AmbientVector>> {
        let nf = self.ambient.flat_dim();
        let signs = self.ambient.sign_table();
        let mut rows: Vec<DVector<f64>> = Vec::new();
        for v in tangent.iter().chain(nu1.iter()).chain(nu2.iter()) {
            rows.push(DVector::from_fn(nf, |r, _| signs[r] * v[r]));
        }
        let a = DMatrix::from_fn(rows.len(), nf, |r, c| rows[r][c]);
        let raw = linalg::nullspace(&a, 1e-10);
        let expected = self.ambient.product_dim() - self.m;
        if raw.len() != expected {
            return Err(Error::GeometryInconsistency(format!(
                "normal space dimension {} != expected {} at {:?}",
                raw.len(),
                expected,
                x
            )));
        }
        let inner = |a: &AmbientVector, b: &AmbientVector| self.ambient.flat_inner_unchecked(a, b);
        let frame = linalg::gram_schmidt(&raw, inner, true)?;
        if frame.len() != expected {
            return Err(Error::GeometryInconsistency(format!(
                "normal frame degenerate ({} of {expected} spacelike directions) at {:?}",
                frame.len(),
                x
            )));
        }
        Ok(frame)
    }

    /// Projection onto the pushed-forward tangent space at `x`, as an ambient
    /// matrix acting on coordinates. Smooth in `x` (frame independent).
    pub fn tangent_projector(&self, x: &[f64], cfg: &DiffConfig) -> Result<DMatrix<f64>> {
        let jac = self.jacobian(x, cfg);
        let g = self.metric_from_jacobian(&jac);
        let ginv = invert_metric(&g)?;
        Ok(projector_from(&jac, &ginv, self.ambient.sign_table()))
    }

    /// Projection onto span{nu_1, nu_2} at the point F(x).
    pub fn nu_projector(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let p = self.position(x);
        let (nu1, nu2) = self.ambient.h_normals(&p)?;
        let nf = self.ambient.flat_dim();
        let signs = self.ambient.sign_table();
        let mut out = DMatrix::zeros(nf, nf);
        for (nu, eps) in [
            (nu1, self.ambient.factor1().epsilon()),
            (nu2, self.ambient.factor2().epsilon()),
        ] {
            if let (Some(nu), Some(eps)) = (nu, eps) {
                for r in 0..nf {
                    for c in 0..nf {
                        out[(r, c)] += eps * nu[r] * nu[c] * signs[c];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Projection onto the normal space N_f M at `x` (smooth in `x`).
    pub fn normal_projector(&self, x: &[f64], cfg: &DiffConfig) -> Result<DMatrix<f64>> {
        let nf = self.ambient.flat_dim();
        Ok(DMatrix::identity(nf, nf) - self.tangent_projector(x, cfg)? - self.nu_projector(x)?)
    }

    /// Riemann tensor of the pulled-back metric in the chart basis,
    /// antisymmetrized, with the raw asymmetry reported.
    pub fn intrinsic_curvature(&self, x: &[f64], cfg: &DiffConfig) -> Result<CurvatureTensor> {
        let m = self.m;
        let outer = cfg.nested_step();
        let needed = self.first_level_margin(cfg) + stencil_reach(outer, cfg.fd_order);
        self.require_margin(x, needed)?;

        let g = self.metric(x, cfg);
        let gamma0 = self.christoffels(x, cfg)?;
        // dGamma[l] = d Gamma / d x_l, each flattened as [k][i*m+j].
        let gfield = |y: &[f64]| -> DVector<f64> {
            let gam = self.christoffels(y, cfg).expect("christoffels inside curvature stencil");
            DVector::from_fn(m * m * m, |r, _| gam[r / (m * m)][r % (m * m)])
        };
        let dgamma: Vec<DVector<f64>> =
            (0..m).map(|l| diff1(&gfield, x, l, outer, cfg.fd_order)).collect();
        let dg = |l: usize, k: usize, i: usize, j: usize| dgamma[l][k * m * m + i * m + j];
        let gam = |k: usize, i: usize, j: usize| gamma0[k][i * m + j];

        // R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
        //            + Gamma^l_{is} Gamma^s_{jk} - Gamma^l_{js} Gamma^s_{ik}
        let mut upper = vec![0.0; m * m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut acc = dg(i, l, j, k) - dg(j, l, i, k);
                        for s in 0..m {
                            acc += gam(l, i, s) * gam(s, j, k) - gam(l, j, s) * gam(s, i, k);
                        }
                        upper[((i * m + j) * m + k) * m + l] = acc;
                    }
                }
            }
        }
        // Lower the last index: R_{ijkl} = <R(d_i, d_j) d_k, d_l>.
        let mut raw = vec![0.0; m * m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut acc = 0.0;
                        for s in 0..m {
                            acc += g[(l, s)] * upper[((i * m + j) * m + k) * m + s];
                        }
                        raw[((i * m + j) * m + k) * m + l] = acc;
                    }
                }
            }
        }
        // Enforce the antisymmetries in (i,j) and (k,l); report the raw defect.
        let at = |v: &[f64], i: usize, j: usize, k: usize, l: usize| v[((i * m + j) * m + k) * m + l];
        let mut comp = vec![0.0; m * m * m * m];
        let mut asym: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let v = 0.25
                            * (at(&raw, i, j, k, l) - at(&raw, j, i, k, l) - at(&raw, i, j, l, k)
                                + at(&raw, j, i, l, k));
                        asym = asym.max((at(&raw, i, j, k, l) - v).abs());
                        comp[((i * m + j) * m + k) * m + l] = v;
                    }
                }
            }
        }
        Ok(CurvatureTensor { m, components: comp, raw_asymmetry: asym, metric: g })
    }
}

/// Riemann tensor in the chart basis with R_{ijkl} = <R(d_i, d_j) d_k, d_l>.
#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    m: usize,
    components: Vec<f64>,
    pub raw_asymmetry: f64,
    metric: DMatrix<f64>,
}

impl CurvatureTensor {
    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.components[((i * self.m + j) * self.m + k) * self.m + l]
    }

    /// Sectional curvature of the coordinate plane (i, j).
    pub fn sectional(&self, i: usize, j: usize) -> f64 {
        let g = &self.metric;
        let denom = g[(i, i)] * g[(j, j)] - g[(i, j)] * g[(i, j)];
        self.component(i, j, j, i) / denom
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Framed data at one chart point. Frames are per-point (not smooth across
/// points); identity checks elsewhere are formulated through projectors.
#[derive(Debug, Clone)]
pub struct FramedPoint {
    pub chart: Vec<f64>,
    pub position: AmbientVector,
    pub jacobian: DMatrix<f64>,
    /// Orthonormal basis of the pushed-forward tangent space.
    pub tangent_frame: Vec<AmbientVector>,
    /// Chart coefficients: e_a = sum_i frame_coeffs[(i, a)] d/dx_i.
    pub frame_coeffs: DMatrix<f64>,
    /// Orthonormal spacelike basis of N_f M.
    pub normal_frame: Vec<AmbientVector>,
    pub nu1: Option<AmbientVector>,
    pub nu2: Option<AmbientVector>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    /// Christoffel symbols, `christoffels[k][i * m + j]` = Gamma^k_ij.
    pub christoffels: Vec<DVector<f64>>,
}

impl FramedPoint {
    pub fn intrinsic_dim(&self) -> usize {
        self.tangent_frame.len()
    }

    pub fn codim(&self) -> usize {
        self.normal_frame.len()
    }

    /// Worst deviation from orthonormality across tangent and normal frames
    /// and the position normals.
    pub fn orthonormality_defect(&self, amb: &ProductAmbient) -> f64 {
        let mut all: Vec<(&AmbientVector, f64)> = Vec::new();
        for v in &self.tangent_frame {
            all.push((v, 1.0));
        }
        for v in &self.normal_frame {
            all.push((v, 1.0));
        }
        if let Some(nu) = &self.nu1 {
            all.push((nu, amb.factor1().epsilon().unwrap()));
        }
        if let Some(nu) = &self.nu2 {
            all.push((nu, amb.factor2().epsilon().unwrap()));
        }
        let mut worst: f64 = 0.0;
        for (i, (v, sv)) in all.iter().enumerate() {
            for (j, (w, _)) in all.iter().enumerate() {
                let d = amb.flat_inner_unchecked(v, w);
                let expect = if i == j { *sv } else { 0.0 };
                worst = worst.max((d - expect).abs());
            }
        }
        worst
    }

    /// Covariant derivative coefficients of the chart-constant extension of
    /// frame vector e_b along e_a: nabla_{e_a} E_b = sum_k coeff_k d/dx_k.
    pub fn frame_covariant_coeffs(&self, a: usize, b: usize) -> DVector<f64> {
        let m = self.intrinsic_dim();
        let mut out = DVector::zeros(m);
        for k in 0..m {
            let mut acc = 0.0;
            for i in 0..m {
                for j in 0..m {
                    acc += self.frame_coeffs[(i, a)]
                        * self.frame_coeffs[(j, b)]
                        * self.christoffels[k][i * m + j];
                }
            }
            out[k] = acc;
        }
        out
    }

    /// Push chart coefficients to an ambient vector through the Jacobian.
    pub fn push_chart(&self, coeffs: &DVector<f64>) -> AmbientVector {
        &self.jacobian * coeffs
    }
}

fn invert_metric(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = g.clone().cholesky().ok_or_else(|| {
        Error::GeometryInconsistency("induced metric not positive definite".into())
    })?;
    Ok(chol.inverse())
}

fn projector_from(jac: &DMatrix<f64>, ginv: &DMatrix<f64>, signs: &[f64]) -> DMatrix<f64> {
    // P = J g^{-1} J^t G
    let mut jtg = jac.transpose();
    for c in 0..jtg.ncols() {
        for r in 0..jtg.nrows() {
            jtg[(r, c)] *= signs[c];
        }
    }
    jac * ginv * jtg
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.nrows() * m.ncols(), |r, _| m[(r / m.ncols(), r % m.ncols())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Scalar;

    /// Unit sphere S^2 x fixed point on S^2 (slice), angle chart.
    struct SphereSlice;

    impl SphereSlice {
        fn dim_in(&self) -> usize {
            2
        }
        fn dim_out(&self) -> usize {
            6
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            let (u, v) = (x[0], x[1]);
            vec![
                u.cos() * v.cos(),
                u.sin() * v.cos(),
                v.sin(),
                S::constant(1.0),
                S::constant(0.0),
                S::constant(0.0),
            ]
        }
    }

    impl_chart_map!(SphereSlice);

    fn sphere_slice() -> ImmersionMap {
        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        ImmersionMap::new(amb, ChartBox::symmetric(2, 1.0), Arc::new(SphereSlice)).unwrap()
    }

    #[test]
    fn exact_and_fd_jacobians_agree() {
        let imm = sphere_slice();
        let x = [0.3, -0.4];
        let exact = imm.jacobian(&x, &DiffConfig::default());
        let fd = imm.jacobian(&x, &DiffConfig { use_exact: false, ..Default::default() });
        assert!((exact - fd).norm() < 1e-9);
    }

    #[test]
    fn fd_jacobian_fourth_order_convergence() {
        // In the truncation-dominated regime, halving the step cuts the
        // defect against the exact Jacobian by >= 8x (4th-order stencils).
        let imm = sphere_slice();
        let x = [0.25, 0.15];
        let exact = imm.jacobian(&x, &DiffConfig::default());
        let err = |h: f64| {
            let cfg = DiffConfig { use_exact: false, fd_step: h, ..Default::default() };
            (imm.jacobian(&x, &cfg) - &exact).norm()
        };
        let (coarse, fine) = (err(2e-2), err(1e-2));
        assert!(coarse / fine.max(1e-18) >= 8.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn second_derivative_of_great_circle_is_minus_position() {
        // Unit-speed great circle in the first sphere factor.
        struct Circle;
        impl Circle {
            fn dim_in(&self) -> usize {
                1
            }
            fn dim_out(&self) -> usize {
                6
            }
            fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
                vec![
                    x[0].cos(),
                    x[0].sin(),
                    S::constant(0.0),
                    S::constant(0.0),
                    S::constant(0.0),
                    S::constant(1.0),
                ]
            }
        }
        impl_chart_map!(Circle);
        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        let imm =
            ImmersionMap::new(amb, ChartBox::symmetric(1, 1.0), Arc::new(Circle)).unwrap();
        let cfg = DiffConfig::default();
        let x = [0.37];
        let dd = imm.second_derivative(&x, 0, 0, &cfg);
        let p = imm.position(&x);
        let block1 = imm.ambient().block1(&p);
        assert!((&dd + block1).norm() < 1e-10);
        // FD route agrees with the jet route.
        let fd = imm.second_derivative(&x, 0, 0, &DiffConfig { use_exact: false, ..cfg });
        assert!((dd - fd).norm() < 1e-7);
    }

    #[test]
    fn frame_is_orthonormal_and_complete() {
        let imm = sphere_slice();
        let fp = imm.frame_at(&[0.2, 0.5], &DiffConfig::default()).unwrap();
        assert_eq!(fp.tangent_frame.len(), 2);
        // codim = n1 + n2 - m = 2; plus two position normals fills the model.
        assert_eq!(fp.normal_frame.len(), 2);
        assert!(fp.orthonormality_defect(imm.ambient()) < 1e-10);
        let count = fp.tangent_frame.len()
            + fp.normal_frame.len()
            + fp.nu1.iter().count()
            + fp.nu2.iter().count();
        assert_eq!(count, imm.ambient().flat_dim());
        // Slice: tangent frame lies entirely in block 1.
        for e in &fp.tangent_frame {
            assert!(imm.ambient().block2(e).norm() < 1e-12);
        }
    }

    #[test]
    fn metric_matches_gram_matrix_of_jacobian() {
        let imm = sphere_slice();
        let cfg = DiffConfig::default();
        let x = [0.1, -0.3];
        let g = imm.metric(&x, &cfg);
        let j = imm.jacobian(&x, &cfg);
        // Independent Gram computation through flat_inner.
        for a in 0..2 {
            for b in 0..2 {
                let ja = j.column(a).clone_owned();
                let jb = j.column(b).clone_owned();
                let expect = imm.ambient().flat_inner(&ja, &jb).unwrap();
                assert!((g[(a, b)] - expect).abs() < 1e-9);
            }
        }
        // Round chart metric: g = diag(cos^2 v, 1).
        assert!((g[(0, 0)] - x[1].cos().powi(2)).abs() < 1e-12);
        assert!((g[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(g[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn round_sphere_sectional_curvature_is_one() {
        let imm = sphere_slice();
        let curv = imm.intrinsic_curvature(&[0.2, 0.3], &DiffConfig::default()).unwrap();
        assert!((curv.sectional(0, 1) - 1.0).abs() < 1e-4, "K = {}", curv.sectional(0, 1));
        assert!(curv.raw_asymmetry < 1e-5);
    }

    #[test]
    fn flat_chart_curvature_vanishes() {
        struct FlatPatch;
        impl FlatPatch {
            fn dim_in(&self) -> usize {
                2
            }
            fn dim_out(&self) -> usize {
                5
            }
            fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
                // Slice point on S^2 times an affine plane in R^2... the plane
                // is curled into the chart to keep the metric nontrivial.
                let a = x[0] + S::constant(0.25) * x[1];
                let b = x[1];
                vec![S::constant(0.0), S::constant(0.0), S::constant(1.0), a, b]
            }
        }
        impl_chart_map!(FlatPatch);
        let amb = ProductAmbient::from_curvatures(1.0, 2, 0.0, 2).unwrap();
        let imm =
            ImmersionMap::new(amb, ChartBox::symmetric(2, 1.0), Arc::new(FlatPatch)).unwrap();
        let curv = imm.intrinsic_curvature(&[0.0, 0.1], &DiffConfig::default()).unwrap();
        assert!(curv.max_abs() < 1e-5);
    }

    #[test]
    fn margin_violations_are_reported() {
        let imm = sphere_slice();
        let err = imm.frame_at(&[0.999999, 0.0], &DiffConfig::default());
        assert!(matches!(err, Err(Error::InsufficientMargin { .. })));
    }

    #[test]
    fn projectors_decompose_identity() {
        let imm = sphere_slice();
        let cfg = DiffConfig::default();
        let x = [0.15, 0.45];
        let pt = imm.tangent_projector(&x, &cfg).unwrap();
        let pn = imm.normal_projector(&x, &cfg).unwrap();
        let pnu = imm.nu_projector(&x).unwrap();
        let nf = imm.ambient().flat_dim();
        let sum = &pt + &pn + &pnu;
        assert!((sum - DMatrix::<f64>::identity(nf, nf)).norm() < 1e-10);
        // Idempotence.
        assert!((&pt * &pt - &pt).norm() < 1e-10);
        assert!((&pn * &pn - &pn).norm() < 1e-10);
    }
}
