//! The product ambient Q_{k1}^{n1} x Q_{k2}^{n2} through its canonical
//! embedding into a flat (possibly indefinite) inner-product space.
//!
//! A nonflat factor Q_k^n sits in R^{n+1} as the quadric <X,X> = 1/k, with a
//! Lorentzian first coordinate when k < 0; a flat factor is R^n itself. All
//! ambient-level geometry lives here: the signed inner product, the block
//! projections, the position normals nu_i, the second fundamental form of the
//! inclusion, and the section theta.

use crate::error::{Error, Result};
use crate::util::SplitMix64;
use nalgebra::DVector;

/// Vectors of the flat model R^{N1+N2}.
pub type AmbientVector = DVector<f64>;

/// Default tolerance for quadric-membership validation. Separate from the
/// residual tolerances used by the verification pipeline: constructors produce
/// points analytically on the quadric, so violations indicate scenario errors.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// One space form factor: curvature and dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceFormSpec {
    k: f64,
    n: usize,
}

impl SpaceFormSpec {
    pub fn new(k: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation(format!(
                "factor dimension must be positive, got n = {n}"
            )));
        }
        if !k.is_finite() {
            return Err(Error::Validation(format!("curvature must be finite, got {k}")));
        }
        Ok(SpaceFormSpec { k, n })
    }

    pub fn curvature(&self) -> f64 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Dimension of the flat model: n + 1 for a nonflat factor, n otherwise.
    pub fn flat_dim(&self) -> usize {
        if self.k != 0.0 {
            self.n + 1
        } else {
            self.n
        }
    }

    /// Metric index contributed by this factor: 1 iff k < 0.
    pub fn sigma(&self) -> usize {
        if self.k < 0.0 {
            1
        } else {
            0
        }
    }

    /// Radius 1/sqrt|k| of the quadric model; `None` for a flat factor.
    pub fn radius(&self) -> Option<f64> {
        if self.k != 0.0 {
            Some(1.0 / self.k.abs().sqrt())
        } else {
            None
        }
    }

    /// Sign of the curvature (+1 or -1); `None` for a flat factor.
    pub fn epsilon(&self) -> Option<f64> {
        if self.k > 0.0 {
            Some(1.0)
        } else if self.k < 0.0 {
            Some(-1.0)
        } else {
            None
        }
    }
}

/// The product of two space forms, realized in R^{N1+N2} with an explicit
/// per-coordinate sign table for the (possibly indefinite) flat metric.
#[derive(Debug, Clone)]
pub struct ProductAmbient {
    factor1: SpaceFormSpec,
    factor2: SpaceFormSpec,
    signs: Vec<f64>,
}

impl ProductAmbient {
    pub fn new(factor1: SpaceFormSpec, factor2: SpaceFormSpec) -> Self {
        let n1 = factor1.flat_dim();
        let n2 = factor2.flat_dim();
        let mut signs = vec![1.0; n1 + n2];
        if factor1.curvature() < 0.0 {
            signs[0] = -1.0;
        }
        if factor2.curvature() < 0.0 {
            signs[n1] = -1.0;
        }
        ProductAmbient { factor1, factor2, signs }
    }

    pub fn from_curvatures(k1: f64, n1: usize, k2: f64, n2: usize) -> Result<Self> {
        Ok(ProductAmbient::new(SpaceFormSpec::new(k1, n1)?, SpaceFormSpec::new(k2, n2)?))
    }

    pub fn factor1(&self) -> &SpaceFormSpec {
        &self.factor1
    }

    pub fn factor2(&self) -> &SpaceFormSpec {
        &self.factor2
    }

    pub fn k1(&self) -> f64 {
        self.factor1.k
    }

    pub fn k2(&self) -> f64 {
        self.factor2.k
    }

    /// Dimension n1 + n2 of the product manifold itself.
    pub fn product_dim(&self) -> usize {
        self.factor1.n + self.factor2.n
    }

    /// Dimension of the flat model.
    pub fn flat_dim(&self) -> usize {
        self.signs.len()
    }

    /// Metric index mu = sigma(k1) + sigma(k2) of the flat model.
    pub fn metric_index(&self) -> usize {
        self.factor1.sigma() + self.factor2.sigma()
    }

    /// Coefficients (k1, k1 + k2) of Phi = k1 I - (k1 + k2) R.
    pub fn phi_coefficients(&self) -> (f64, f64) {
        (self.factor1.k, self.factor1.k + self.factor2.k)
    }

    pub fn sign_table(&self) -> &[f64] {
        &self.signs
    }

    fn check_dim(&self, v: &AmbientVector, context: &str) -> Result<()> {
        if v.len() != self.flat_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.flat_dim(),
                got: v.len(),
                context: context.to_string(),
            });
        }
        Ok(())
    }

    /// Signed bilinear form of the flat model: negative sign on the first
    /// coordinate of each factor block with k_i < 0, positive elsewhere.
    pub fn flat_inner(&self, v: &AmbientVector, w: &AmbientVector) -> Result<f64> {
        self.check_dim(v, "flat_inner lhs")?;
        self.check_dim(w, "flat_inner rhs")?;
        Ok(self.flat_inner_unchecked(v, w))
    }

    pub fn flat_inner_unchecked(&self, v: &AmbientVector, w: &AmbientVector) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.signs.len() {
            acc += self.signs[i] * v[i] * w[i];
        }
        acc
    }

    /// Factor-1 block of `v`, zero-padded in block 2 (the projection pi~_1).
    pub fn block1(&self, v: &AmbientVector) -> AmbientVector {
        let n1 = self.factor1.flat_dim();
        let mut out = AmbientVector::zeros(self.flat_dim());
        out.rows_mut(0, n1).copy_from(&v.rows(0, n1));
        out
    }

    /// Factor-2 block of `v`, zero-padded in block 1 (the projection pi~_2).
    pub fn block2(&self, v: &AmbientVector) -> AmbientVector {
        let n1 = self.factor1.flat_dim();
        let n2 = self.factor2.flat_dim();
        let mut out = AmbientVector::zeros(self.flat_dim());
        out.rows_mut(n1, n2).copy_from(&v.rows(n1, n2));
        out
    }

    /// Assemble an ambient vector from explicit factor blocks.
    pub fn assemble(&self, b1: &[f64], b2: &[f64]) -> Result<AmbientVector> {
        let n1 = self.factor1.flat_dim();
        let n2 = self.factor2.flat_dim();
        if b1.len() != n1 || b2.len() != n2 {
            return Err(Error::DimensionMismatch {
                expected: n1 + n2,
                got: b1.len() + b2.len(),
                context: "assemble blocks".to_string(),
            });
        }
        let mut out = AmbientVector::zeros(n1 + n2);
        out.rows_mut(0, n1).copy_from_slice(b1);
        out.rows_mut(n1, n2).copy_from_slice(b2);
        Ok(out)
    }

    /// Per-factor defect |<pi~_i p, pi~_i p> - 1/k_i| (zero for flat factors).
    pub fn quadric_defects(&self, p: &AmbientVector) -> (f64, f64) {
        let d1 = if self.factor1.k != 0.0 {
            (self.flat_inner_unchecked(&self.block1(p), &self.block1(p)) - 1.0 / self.factor1.k)
                .abs()
        } else {
            0.0
        };
        let d2 = if self.factor2.k != 0.0 {
            (self.flat_inner_unchecked(&self.block2(p), &self.block2(p)) - 1.0 / self.factor2.k)
                .abs()
        } else {
            0.0
        };
        (d1, d2)
    }

    /// Validate that `p` lies on the product quadric within `tol`.
    pub fn validate_on_quadric(&self, p: &AmbientVector, tol: f64) -> Result<()> {
        self.check_dim(p, "quadric point")?;
        let (d1, d2) = self.quadric_defects(p);
        if d1 > tol {
            return Err(Error::OffQuadric { factor: 1, defect: d1, tol });
        }
        if d2 > tol {
            return Err(Error::OffQuadric { factor: 2, defect: d2, tol });
        }
        Ok(())
    }

    /// Validate that `v` is tangent to the product at `p` (orthogonal to the
    /// position normals of the nonflat factors).
    pub fn validate_tangent(&self, v: &AmbientVector, p: &AmbientVector, tol: f64) -> Result<()> {
        self.check_dim(v, "tangent vector")?;
        let scale = 1.0 + v.norm();
        for (factor, spec, block) in
            [(1usize, &self.factor1, self.block1(p)), (2, &self.factor2, self.block2(p))]
        {
            if spec.k != 0.0 {
                let defect = self.flat_inner_unchecked(v, &block).abs() * spec.k.abs();
                if defect > tol * scale {
                    return Err(Error::InputContract(format!(
                        "vector not tangent to factor {factor} at p (defect {defect:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Derivative of pi_2 applied to a tangent vector `v` of the product at
    /// `p`, regarded inside the flat model: the factor-2 block of `v`.
    pub fn project_factor2_tangent(&self, v: &AmbientVector, p: &AmbientVector) -> Result<AmbientVector> {
        self.validate_on_quadric(p, MEMBERSHIP_TOL)?;
        self.validate_tangent(v, p, 1e-7)?;
        Ok(self.block2(v))
    }

    /// Unit position normals nu_i = (1/r_i) pi~_i(p) of the inclusion of the
    /// product into the flat model; absent for flat factors. <nu_i, nu_i> is
    /// the curvature sign epsilon_i.
    pub fn h_normals(&self, p: &AmbientVector) -> Result<(Option<AmbientVector>, Option<AmbientVector>)> {
        self.validate_on_quadric(p, MEMBERSHIP_TOL)?;
        let nu1 = self.factor1.radius().map(|r| self.block1(p) / r);
        let nu2 = self.factor2.radius().map(|r| self.block2(p) / r);
        Ok((nu1, nu2))
    }

    /// Second fundamental form of the inclusion of the product into the flat
    /// model: alpha_h(X,Y) = -k1 <pi_1 X, Y> pi~_1(p) - k2 <pi_2 X, Y> pi~_2(p).
    pub fn alpha_h(&self, x: &AmbientVector, y: &AmbientVector, p: &AmbientVector) -> Result<AmbientVector> {
        self.validate_on_quadric(p, MEMBERSHIP_TOL)?;
        self.check_dim(x, "alpha_h X")?;
        self.check_dim(y, "alpha_h Y")?;
        Ok(self.alpha_h_unchecked(x, y, p))
    }

    pub fn alpha_h_unchecked(
        &self,
        x: &AmbientVector,
        y: &AmbientVector,
        p: &AmbientVector,
    ) -> AmbientVector {
        let mut out = AmbientVector::zeros(self.flat_dim());
        if self.factor1.k != 0.0 {
            let c = self.flat_inner_unchecked(&self.block1(x), &self.block1(y));
            out += self.block1(p) * (-self.factor1.k * c);
        }
        if self.factor2.k != 0.0 {
            let c = self.flat_inner_unchecked(&self.block2(x), &self.block2(y));
            out += self.block2(p) * (-self.factor2.k * c);
        }
        out
    }

    /// The normal section theta = -(eps1/r1) nu_1 + (eps2/r2) nu_2 with
    /// <theta, theta> = k1 + k2 and <theta, p> = 0. Requires k1 k2 != 0.
    pub fn theta(&self, p: &AmbientVector) -> Result<AmbientVector> {
        let (Some(r1), Some(r2)) = (self.factor1.radius(), self.factor2.radius()) else {
            return Err(Error::Unsupported(
                "theta requires both factors nonflat (k1 k2 != 0)".to_string(),
            ));
        };
        let (nu1, nu2) = self.h_normals(p)?;
        let e1 = self.factor1.epsilon().unwrap();
        let e2 = self.factor2.epsilon().unwrap();
        Ok(nu1.unwrap() * (-e1 / r1) + nu2.unwrap() * (e2 / r2))
    }

    /// Deterministic sample point on the product quadric.
    pub fn random_point(&self, rng: &mut SplitMix64) -> AmbientVector {
        let b1 = random_factor_point(&self.factor1, rng);
        let b2 = random_factor_point(&self.factor2, rng);
        self.assemble(&b1, &b2).expect("blocks sized by construction")
    }
}

fn random_factor_point(spec: &SpaceFormSpec, rng: &mut SplitMix64) -> Vec<f64> {
    let nf = spec.flat_dim();
    if spec.k == 0.0 {
        return (0..nf).map(|_| rng.normal()).collect();
    }
    let r = spec.radius().unwrap();
    if spec.k > 0.0 {
        // Normalize a Gaussian sample onto the sphere of radius r.
        loop {
            let v: Vec<f64> = (0..nf).map(|_| rng.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                return v.into_iter().map(|x| x * r / norm).collect();
            }
        }
    } else {
        // Hyperboloid sheet: sample spatial part, solve for the time coordinate.
        let spatial: Vec<f64> = (1..nf).map(|_| rng.normal()).collect();
        let s2: f64 = spatial.iter().map(|x| x * x).sum();
        let mut out = vec![(r * r + s2).sqrt()];
        out.extend(spatial);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> AmbientVector {
        AmbientVector::from_column_slice(v)
    }

    #[test]
    fn euclidean_inner_for_two_spheres() {
        let amb = ProductAmbient::from_curvatures(1.0, 1, 1.0, 1).unwrap();
        assert_eq!(amb.flat_dim(), 4);
        assert_eq!(amb.metric_index(), 0);
        let v = dv(&[1.0, 2.0, 3.0, 4.0]);
        let w = dv(&[0.5, -1.0, 2.0, 1.0]);
        assert_eq!(amb.flat_inner(&v, &w).unwrap(), 0.5 - 2.0 + 6.0 + 4.0);
    }

    #[test]
    fn lorentzian_sign_convention() {
        let amb = ProductAmbient::from_curvatures(-1.0, 2, 1.0, 2).unwrap();
        assert_eq!(amb.metric_index(), 1);
        let e0 = dv(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(amb.flat_inner(&e0, &e0).unwrap(), -1.0);
    }

    #[test]
    fn sign_table_matches_independent_oracle() {
        // k1 = -1, k2 = -4: both blocks Lorentzian.
        let amb = ProductAmbient::from_curvatures(-1.0, 2, -4.0, 3).unwrap();
        let n1f = amb.factor1().flat_dim();
        let mut rng = SplitMix64::new(7);
        for _ in 0..50 {
            let v = AmbientVector::from_fn(amb.flat_dim(), |_, _| rng.normal());
            let w = AmbientVector::from_fn(amb.flat_dim(), |_, _| rng.normal());
            // Independent sign-by-sign sum.
            let mut expect = 0.0;
            for i in 0..amb.flat_dim() {
                let sgn = if i == 0 || i == n1f { -1.0 } else { 1.0 };
                expect += sgn * v[i] * w[i];
            }
            let got = amb.flat_inner(&v, &w).unwrap();
            assert!((got - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let amb = ProductAmbient::from_curvatures(1.0, 1, 1.0, 1).unwrap();
        let v = dv(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            amb.flat_inner(&v, &v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tangent_projection_block_cases() {
        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        let p = dv(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        // Tangent vector supported in block 1 only.
        let v1 = dv(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(amb.project_factor2_tangent(&v1, &p).unwrap().norm(), 0.0);
        // Tangent vector supported in block 2: pi_2^2 = pi_2.
        let v2 = dv(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(amb.project_factor2_tangent(&v2, &p).unwrap(), v2);
    }

    #[test]
    fn tangent_projection_rejects_off_quadric_points() {
        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        let p = dv(&[1.1, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let v = dv(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            amb.project_factor2_tangent(&v, &p),
            Err(Error::OffQuadric { factor: 1, .. })
        ));
    }

    #[test]
    fn h_normals_unit_spheres_and_flat_factor() {
        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        let p = dv(&[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let (nu1, nu2) = amb.h_normals(&p).unwrap();
        assert_eq!(nu1.unwrap(), dv(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]));
        assert_eq!(nu2.unwrap(), dv(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]));

        let flat = ProductAmbient::from_curvatures(1.0, 2, 0.0, 2).unwrap();
        let q = dv(&[1.0, 0.0, 0.0, 3.0, -2.0]);
        let (nu1, nu2) = flat.h_normals(&q).unwrap();
        assert!(nu1.is_some());
        assert!(nu2.is_none());
    }

    #[test]
    fn hyperbolic_normal_is_timelike() {
        let amb = ProductAmbient::from_curvatures(-1.0, 2, 1.0, 2).unwrap();
        let mut rng = SplitMix64::new(3);
        let p = amb.random_point(&mut rng);
        let (nu1, _) = amb.h_normals(&p).unwrap();
        let nu1 = nu1.unwrap();
        assert!((amb.flat_inner(&nu1, &nu1).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_h_cross_terms_vanish_and_block_case() {
        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        let p = dv(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let x = dv(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let y = dv(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(amb.alpha_h(&x, &y, &p).unwrap().norm(), 0.0);
        // X = Y unit in block 1 gives -pi~_1(p).
        let a = amb.alpha_h(&x, &x, &p).unwrap();
        assert_eq!(a, -amb.block1(&p));
    }

    #[test]
    fn alpha_h_is_symmetric() {
        let amb = ProductAmbient::from_curvatures(-1.0, 2, 2.0, 2).unwrap();
        let mut rng = SplitMix64::new(11);
        let p = amb.random_point(&mut rng);
        let x = AmbientVector::from_fn(amb.flat_dim(), |_, _| rng.normal());
        let y = AmbientVector::from_fn(amb.flat_dim(), |_, _| rng.normal());
        let axy = amb.alpha_h(&x, &y, &p).unwrap();
        let ayx = amb.alpha_h(&y, &x, &p).unwrap();
        assert_eq!(axy, ayx);
    }

    #[test]
    fn alpha_h_matches_second_derivative_of_product_geodesic() {
        // Second derivative of the inclusion along a product geodesic through p.
        let amb = ProductAmbient::from_curvatures(1.0, 2, 4.0, 2).unwrap();
        let r1 = amb.factor1().radius().unwrap();
        let r2 = amb.factor2().radius().unwrap();
        let p = dv(&[r1, 0.0, 0.0, 0.0, 0.0, r2]);
        // Unit tangent split across both blocks.
        let c = (0.5f64).sqrt();
        let x = dv(&[0.0, c, 0.0, c, 0.0, 0.0]);
        let curve = |t: f64| -> AmbientVector {
            let s1 = (t * c / r1).sin();
            let c1 = (t * c / r1).cos();
            let s2 = (t * c / r2).sin();
            let c2 = (t * c / r2).cos();
            dv(&[r1 * c1, r1 * s1, 0.0, r2 * s2, 0.0, r2 * c2])
        };
        let h = 1e-4;
        let second = (curve(h) + curve(-h) - curve(0.0) * 2.0) / (h * h);
        let predicted = amb.alpha_h(&x, &x, &p).unwrap();
        let diff = (second - predicted).norm();
        assert!(diff < 1e-6, "diff {diff}");
    }

    #[test]
    fn theta_norm_and_orthogonality() {
        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        let mut rng = SplitMix64::new(5);
        for _ in 0..100 {
            let p = amb.random_point(&mut rng);
            let th = amb.theta(&p).unwrap();
            assert!((amb.flat_inner(&th, &th).unwrap() - 2.0).abs() < 1e-10);
            assert!(amb.flat_inner(&th, &p).unwrap().abs() < 1e-10);
        }
        // k1 + k2 = 0 makes theta a null vector.
        let null = ProductAmbient::from_curvatures(1.0, 2, -1.0, 2).unwrap();
        let p = null.random_point(&mut rng);
        let th = null.theta(&p).unwrap();
        assert!(null.flat_inner(&th, &th).unwrap().abs() < 1e-10);
    }

    #[test]
    fn theta_requires_both_factors_nonflat() {
        let amb = ProductAmbient::from_curvatures(1.0, 2, 0.0, 2).unwrap();
        let p = dv(&[0.0, 0.0, 1.0, 0.5, 0.5]);
        assert!(matches!(amb.theta(&p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn random_points_satisfy_quadric_constraints() {
        for (k1, k2) in [(1.0, 1.0), (-1.0, -4.0), (2.0, 0.0), (-0.5, 3.0)] {
            let amb = ProductAmbient::from_curvatures(k1, 3, k2, 2).unwrap();
            let mut rng = SplitMix64::new(99);
            for _ in 0..50 {
                let p = amb.random_point(&mut rng);
                let (d1, d2) = amb.quadric_defects(&p);
                assert!(d1 < 1e-10 && d2 < 1e-10, "defects {d1} {d2} for ({k1},{k2})");
            }
        }
    }
}
