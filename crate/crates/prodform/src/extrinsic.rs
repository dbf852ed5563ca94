//! Second fundamental form, shape operators, mean curvature, normal covariant
//! derivatives, and the parallelism / umbilicity residuals.
//!
//! Smooth fields near a base point are always built through the (frame
//! independent) projectors of [`ImmersionMap`]; per-point frames enter only at
//! the base point itself, so nothing here requires smooth frames.

use crate::ambient::AmbientVector;
use crate::error::{Error, Result};
use crate::fd::{diff1, stencil_reach};
use crate::immersion::{DiffConfig, FramedPoint, ImmersionMap};
use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold for the rank of the first normal space.
pub const FIRST_NORMAL_RANK_TOL: f64 = 1e-8;

/// Second fundamental form data of an immersion at one framed point.
#[derive(Debug, Clone)]
pub struct ExtrinsicData {
    /// Components of alpha_f(e_a, e_b) in the normal frame; `alpha[a][b]`.
    pub alpha: Vec<Vec<DVector<f64>>>,
    /// The same vectors in ambient coordinates.
    pub alpha_ambient: Vec<Vec<AmbientVector>>,
    /// Shape operator matrix per normal frame vector.
    pub shape_ops: Vec<DMatrix<f64>>,
    /// Mean curvature vector in normal-frame components.
    pub mean_curvature: DVector<f64>,
    /// Orthonormal basis of N_1 = span Im(alpha) in normal-frame components.
    pub first_normal_basis: Vec<DVector<f64>>,
    /// Rank of N_1 at the threshold [`FIRST_NORMAL_RANK_TOL`].
    pub first_normal_rank: usize,
    /// Singular values behind the rank decision, for report visibility.
    pub first_normal_spectrum: Vec<f64>,
    /// Worst disagreement between the two routes to alpha_f
    /// (projection onto N_fM versus alpha_F minus alpha_h).
    pub alpha_route_defect: f64,
}

impl ExtrinsicData {
    pub fn intrinsic_dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn codim(&self) -> usize {
        self.mean_curvature.len()
    }

    /// |H|.
    pub fn mean_curvature_norm(&self) -> f64 {
        self.mean_curvature.norm()
    }

    /// Largest norm over alpha(e_a, e_b).
    pub fn alpha_max_norm(&self) -> f64 {
        self.alpha
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0, |acc, v| acc.max(v.norm()))
    }

    /// Shape operator for an arbitrary normal vector given in frame components.
    pub fn shape_operator(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let m = self.intrinsic_dim();
        let mut out = DMatrix::zeros(m, m);
        for (r, op) in self.shape_ops.iter().enumerate() {
            out += op * xi[r];
        }
        out
    }
}

/// alpha_f on the chart coordinate basis at an arbitrary chart point:
/// `out[i][j] = P_N(y) d^2F/dx_i dx_j`. The normal projector annihilates both
/// the tangential Christoffel part and the alpha_h part of the flat second
/// derivative, so this is alpha_f(d_i, d_j) expressed in the flat model.
pub fn alpha_chart_basis(
    imm: &ImmersionMap,
    y: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<Vec<AmbientVector>>> {
    let pn = imm.normal_projector(y, cfg)?;
    let hess = imm.hessian(y, cfg);
    let m = imm.intrinsic_dim();
    Ok((0..m).map(|i| (0..m).map(|j| &pn * &hess[i][j]).collect()).collect())
}

/// Compute the extrinsic data at a framed point.
pub fn second_fundamental_form(
    imm: &ImmersionMap,
    fp: &FramedPoint,
    cfg: &DiffConfig,
) -> Result<ExtrinsicData> {
    let amb = imm.ambient();
    let m = fp.intrinsic_dim();
    let codim = fp.codim();
    let hess = imm.hessian(&fp.chart, cfg);

    // alpha_F(e_a, e_b): flat second derivative contracted into the frame,
    // minus its tangential component.
    let mut alpha_ambient: Vec<Vec<AmbientVector>> = Vec::with_capacity(m);
    let mut alpha: Vec<Vec<DVector<f64>>> = Vec::with_capacity(m);
    let mut route_defect: f64 = 0.0;
    for a in 0..m {
        let mut row_amb = Vec::with_capacity(m);
        let mut row = Vec::with_capacity(m);
        for b in 0..m {
            let mut w = AmbientVector::zeros(amb.flat_dim());
            for i in 0..m {
                for j in 0..m {
                    let c = fp.frame_coeffs[(i, a)] * fp.frame_coeffs[(j, b)];
                    if c != 0.0 {
                        w += &hess[i][j] * c;
                    }
                }
            }
            let mut alpha_f_big = w.clone();
            for e in &fp.tangent_frame {
                let c = amb.flat_inner_unchecked(&alpha_f_big, e);
                alpha_f_big -= e * c;
            }
            // Route 1: project alpha_F onto N_fM.
            let comps = DVector::from_fn(codim, |r, _| {
                amb.flat_inner_unchecked(&alpha_f_big, &fp.normal_frame[r])
            });
            let mut amb_vec = AmbientVector::zeros(amb.flat_dim());
            for r in 0..codim {
                amb_vec += &fp.normal_frame[r] * comps[r];
            }
            // Route 2: alpha_F - alpha_h(e_a, e_b).
            let ah = amb.alpha_h_unchecked(&fp.tangent_frame[a], &fp.tangent_frame[b], &fp.position);
            route_defect = route_defect.max((&alpha_f_big - &ah - &amb_vec).norm());
            row_amb.push(amb_vec);
            row.push(comps);
        }
        alpha_ambient.push(row_amb);
        alpha.push(row);
    }
    if route_defect > 1e-7 {
        return Err(Error::GeometryInconsistency(format!(
            "alpha_f routes disagree by {route_defect:.3e} at {:?}",
            fp.chart
        )));
    }

    let shape_ops: Vec<DMatrix<f64>> = (0..codim)
        .map(|r| DMatrix::from_fn(m, m, |a, b| alpha[a][b][r]))
        .collect();
    let mean_curvature = {
        let mut h = DVector::zeros(codim);
        for a in 0..m {
            h += &alpha[a][a];
        }
        h / m as f64
    };

    // First normal space from the singular spectrum of the alpha components.
    let pairs: Vec<(usize, usize)> =
        (0..m).flat_map(|a| (a..m).map(move |b| (a, b))).collect();
    let mat = DMatrix::from_fn(codim, pairs.len(), |r, c| alpha[pairs[c].0][pairs[c].1][r]);
    let (rank, basis, spectrum) = if pairs.is_empty() || codim == 0 {
        (0, Vec::new(), Vec::new())
    } else {
        let svd = mat.clone().svd(true, false);
        let svals: Vec<f64> = svd.singular_values.iter().cloned().collect();
        // Threshold against max(1, sigma_max) so a pure-noise spectrum of a
        // totally geodesic immersion reads as rank zero.
        let smax = svals.iter().cloned().fold(0.0, f64::max);
        let cut = FIRST_NORMAL_RANK_TOL * smax.max(1.0);
        let rank = svals.iter().filter(|s| **s > cut).count();
        let u = svd.u.expect("requested U");
        let basis = (0..rank).map(|c| u.column(c).clone_owned()).collect();
        (rank, basis, svals)
    };

    Ok(ExtrinsicData {
        alpha,
        alpha_ambient,
        shape_ops,
        mean_curvature,
        first_normal_basis: basis,
        first_normal_rank: rank,
        first_normal_spectrum: spectrum,
        alpha_route_defect: route_defect,
    })
}

/// A sample of the normal connection: components of nabla^perp_{d_i} xi.
#[derive(Debug, Clone)]
pub struct NormalDerivativeSample {
    pub base: Vec<f64>,
    pub direction: usize,
    /// The derivative as an ambient vector (lies in N_fM at the base point).
    pub value: AmbientVector,
    /// Components in the normal frame of the framed point it was taken at.
    pub components: DVector<f64>,
}

/// Differentiate a normal field along chart direction `dir` and return its
/// normal-connection derivative at `fp`. The flat derivative decomposes into
/// the Weingarten part (tangential), an alpha_h coupling into span{nu_i}, and
/// the normal-connection part; projecting onto N_fM keeps exactly the last.
pub fn normal_derivative<F>(
    imm: &ImmersionMap,
    fp: &FramedPoint,
    dir: usize,
    field: &F,
    cfg: &DiffConfig,
) -> Result<NormalDerivativeSample>
where
    F: Fn(&[f64]) -> AmbientVector,
{
    let x = &fp.chart;
    imm.require_margin(x, imm.first_level_margin(cfg) + stencil_reach(cfg.fd_step, cfg.fd_order))?;
    // Input contract: the field must actually lie in N_fM near x.
    for delta in [-cfg.fd_step, 0.0, cfg.fd_step] {
        let mut y = x.clone();
        y[dir] += delta;
        let v = field(&y);
        let pn = imm.normal_projector(&y, cfg)?;
        let drift = (&v - &pn * &v).norm();
        if drift > 1e-7 * (1.0 + v.norm()) {
            return Err(Error::InputContract(format!(
                "normal field drifts off N_fM by {drift:.3e} near {x:?}"
            )));
        }
    }
    let deriv = diff1(&|y: &[f64]| field(y), x, dir, cfg.fd_step, cfg.fd_order);
    let pn = imm.normal_projector(x, cfg)?;
    let value = &pn * deriv;
    let components = DVector::from_fn(fp.codim(), |r, _| {
        imm.ambient().flat_inner_unchecked(&value, &fp.normal_frame[r])
    });
    Ok(NormalDerivativeSample { base: x.clone(), direction: dir, value, components })
}

/// All covariant derivatives (nabla^perp_{e_c} alpha)(e_a, e_b) at `fp`,
/// indexed `[c][a][b]`, as ambient vectors in N_fM.
///
/// Frame vectors are extended with constant chart components; the Christoffel
/// corrections supply the covariant part, so any smooth extension gives the
/// same tensor values at the base point.
pub fn covariant_alpha_derivative(
    imm: &ImmersionMap,
    fp: &FramedPoint,
    cfg: &DiffConfig,
) -> Result<Vec<Vec<Vec<AmbientVector>>>> {
    let amb = imm.ambient();
    let m = fp.intrinsic_dim();
    let nf = amb.flat_dim();
    let x = &fp.chart;
    imm.require_margin(x, imm.first_level_margin(cfg) + stencil_reach(cfg.fd_step, cfg.fd_order))?;

    // Field of all alpha_f(E_a, E_b) with chart-constant frame extensions,
    // flattened to one vector per chart point.
    let coeffs = fp.frame_coeffs.clone();
    let field = |y: &[f64]| -> DVector<f64> {
        let base = alpha_chart_basis(imm, y, cfg).expect("alpha field inside stencil");
        let mut out = DVector::zeros(m * m * nf);
        for a in 0..m {
            for b in 0..m {
                let mut v = AmbientVector::zeros(nf);
                for i in 0..m {
                    for j in 0..m {
                        let c = coeffs[(i, a)] * coeffs[(j, b)];
                        if c != 0.0 {
                            v += &base[i][j] * c;
                        }
                    }
                }
                out.rows_mut((a * m + b) * nf, nf).copy_from(&v);
            }
        }
        out
    };
    let partials: Vec<DVector<f64>> =
        (0..m).map(|k| diff1(&field, x, k, cfg.fd_step, cfg.fd_order)).collect();

    let pn = imm.normal_projector(x, cfg)?;
    let alpha0 = alpha_chart_basis(imm, x, cfg)?;
    // alpha at the base point contracted with one chart slot, one frame slot.
    let alpha_chart_frame = |v: &DVector<f64>, b: usize| -> AmbientVector {
        let mut out = AmbientVector::zeros(nf);
        for i in 0..m {
            for j in 0..m {
                let c = v[i] * coeffs[(j, b)];
                if c != 0.0 {
                    out += &alpha0[i][j] * c;
                }
            }
        }
        out
    };

    let mut result = vec![vec![vec![AmbientVector::zeros(nf); m]; m]; m];
    for c in 0..m {
        for a in 0..m {
            for b in 0..m {
                // Directional derivative along e_c of the extended field.
                let mut d = AmbientVector::zeros(nf);
                for k in 0..m {
                    let w = coeffs[(k, c)];
                    if w != 0.0 {
                        d += partials[k].rows((a * m + b) * nf, nf) * w;
                    }
                }
                let mut v = &pn * d;
                // Subtract alpha(nabla_{e_c} E_a, e_b) and alpha(e_a, nabla_{e_c} E_b).
                let ga = fp.frame_covariant_coeffs(c, a);
                let gb = fp.frame_covariant_coeffs(c, b);
                v -= alpha_chart_frame(&ga, b);
                v -= alpha_chart_frame(&gb, a);
                result[c][a][b] = v;
            }
        }
    }
    Ok(result)
}

/// Frobenius norm of the Van der Waerden-Bortolotti derivative of alpha at x.
pub fn nabla_alpha_norm(imm: &ImmersionMap, x: &[f64], cfg: &DiffConfig) -> Result<f64> {
    let fp = imm.frame_at(x, cfg)?;
    let der = covariant_alpha_derivative(imm, &fp, cfg)?;
    let mut acc = 0.0;
    for block in &der {
        for row in block {
            for v in row {
                acc += v.norm_squared();
            }
        }
    }
    Ok(acc.sqrt())
}

/// Max over frame pairs of |alpha(e_a, e_b) - delta_ab H|.
pub fn umbilic_residual(ed: &ExtrinsicData) -> f64 {
    let m = ed.intrinsic_dim();
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let mut d = ed.alpha[a][b].clone();
            if a == b {
                d -= &ed.mean_curvature;
            }
            worst = worst.max(d.norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::ProductAmbient;
    use crate::immersion::ChartBox;
    use crate::jet::Scalar;
    use crate::impl_chart_map;
    use std::sync::Arc;

    /// Diagonal totally geodesic embedding over S^2 of curvature 1/2.
    struct DiagonalS2;
    impl DiagonalS2 {
        fn dim_in(&self) -> usize {
            2
        }
        fn dim_out(&self) -> usize {
            6
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            let r = S::constant(std::f64::consts::SQRT_2);
            let a = S::constant(0.5f64.sqrt());
            let p = [
                r * x[0].cos() * x[1].cos(),
                r * x[0].sin() * x[1].cos(),
                r * x[1].sin(),
            ];
            vec![a * p[0], a * p[1], a * p[2], a * p[0], a * p[1], a * p[2]]
        }
    }
    impl_chart_map!(DiagonalS2);

    /// Small sphere of intrinsic radius rho inside S^3, as a slice of S^3 x S^2.
    struct SmallSphereSlice {
        rho: f64,
    }
    impl SmallSphereSlice {
        fn dim_in(&self) -> usize {
            2
        }
        fn dim_out(&self) -> usize {
            7
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            let rho = S::constant(self.rho);
            let h = S::constant((1.0 - self.rho * self.rho).sqrt());
            vec![
                h,
                rho * x[0].cos() * x[1].cos(),
                rho * x[0].sin() * x[1].cos(),
                rho * x[1].sin(),
                S::constant(1.0),
                S::constant(0.0),
                S::constant(0.0),
            ]
        }
    }
    impl_chart_map!(SmallSphereSlice);

    /// Product of two circles of latitude in S^2 x S^2.
    struct CircleProduct {
        z1: f64,
        z2: f64,
    }
    impl CircleProduct {
        fn dim_in(&self) -> usize {
            2
        }
        fn dim_out(&self) -> usize {
            6
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            let r1 = S::constant((1.0 - self.z1 * self.z1).sqrt());
            let r2 = S::constant((1.0 - self.z2 * self.z2).sqrt());
            vec![
                r1 * x[0].cos(),
                r1 * x[0].sin(),
                S::constant(self.z1),
                r2 * x[1].cos(),
                r2 * x[1].sin(),
                S::constant(self.z2),
            ]
        }
    }
    impl_chart_map!(CircleProduct);

    fn diag_imm() -> ImmersionMap {
        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        ImmersionMap::new(amb, ChartBox::symmetric(2, 1.0), Arc::new(DiagonalS2)).unwrap()
    }

    #[test]
    fn diagonal_embedding_is_totally_geodesic() {
        let imm = diag_imm();
        let cfg = DiffConfig::default();
        let fp = imm.frame_at(&[0.2, -0.3], &cfg).unwrap();
        let ed = second_fundamental_form(&imm, &fp, &cfg).unwrap();
        assert!(ed.alpha_max_norm() < 1e-6, "alpha = {}", ed.alpha_max_norm());
        assert!(umbilic_residual(&ed) < 1e-7);
        assert_eq!(ed.first_normal_rank, 0);
    }

    #[test]
    fn diagonal_embedding_is_parallel() {
        let imm = diag_imm();
        let n = nabla_alpha_norm(&imm, &[0.1, 0.25], &DiffConfig::default()).unwrap();
        assert!(n < 1e-5, "nabla alpha = {n}");
    }

    #[test]
    fn small_sphere_slice_is_umbilic_with_known_mean_curvature() {
        let amb = ProductAmbient::from_curvatures(1.0, 3, 1.0, 2).unwrap();
        let imm = ImmersionMap::new(
            amb,
            ChartBox::symmetric(2, 1.0),
            Arc::new(SmallSphereSlice { rho: 0.8 }),
        )
        .unwrap();
        let cfg = DiffConfig::default();
        let fp = imm.frame_at(&[0.3, 0.1], &cfg).unwrap();
        let ed = second_fundamental_form(&imm, &fp, &cfg).unwrap();
        assert!(umbilic_residual(&ed) < 1e-6, "umb = {}", umbilic_residual(&ed));
        // Small sphere of intrinsic radius rho in the unit sphere:
        // |H| = sqrt(1/rho^2 - 1) = 0.75 at rho = 0.8.
        assert!((ed.mean_curvature_norm() - 0.75).abs() < 1e-8);
        assert_eq!(ed.first_normal_rank, 1);
        // trace A_H = m <H, H>.
        let ah = ed.shape_operator(&ed.mean_curvature);
        assert!((ah.trace() - 2.0 * ed.mean_curvature.norm_squared()).abs() < 1e-8);
    }

    #[test]
    fn product_alpha_vanishes_on_mixed_directions() {
        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        let imm = ImmersionMap::new(
            amb,
            ChartBox::symmetric(2, 1.0),
            Arc::new(CircleProduct { z1: 0.4, z2: -0.3 }),
        )
        .unwrap();
        let cfg = DiffConfig::default();
        let fp = imm.frame_at(&[0.2, 0.5], &cfg).unwrap();
        let ed = second_fundamental_form(&imm, &fp, &cfg).unwrap();
        // The frame directions are the factor directions (diagonal metric).
        let mixed = ed.alpha[0][1].norm().max(ed.alpha[1][0].norm());
        assert!(mixed < 1e-8, "mixed alpha = {mixed}");
        // Non-great circles are not totally geodesic.
        assert!(ed.alpha_max_norm() > 0.1);
    }

    #[test]
    fn circle_product_is_parallel() {
        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        let imm = ImmersionMap::new(
            amb,
            ChartBox::symmetric(2, 1.0),
            Arc::new(CircleProduct { z1: 0.4, z2: -0.3 }),
        )
        .unwrap();
        let n = nabla_alpha_norm(&imm, &[0.3, -0.2], &DiffConfig::default()).unwrap();
        assert!(n < 1e-4, "nabla alpha = {n}");
    }

    #[test]
    fn nu2_is_parallel_along_a_slice() {
        let amb = ProductAmbient::from_curvatures(1.0, 3, 1.0, 2).unwrap();
        let imm = ImmersionMap::new(
            amb,
            ChartBox::symmetric(2, 1.0),
            Arc::new(SmallSphereSlice { rho: 0.8 }),
        )
        .unwrap();
        let cfg = DiffConfig::default();
        let fp = imm.frame_at(&[0.1, 0.2], &cfg).unwrap();
        // A normal field of the slice: the unit normal of the small sphere
        // inside the first factor (constant-direction combination).
        let rho = 0.8f64;
        let h = (1.0 - rho * rho).sqrt();
        let field = |y: &[f64]| -> AmbientVector {
            // Position normal within S^3: differentiate-free closed form.
            let u = imm.position(y);
            let mut v = AmbientVector::zeros(7);
            // unit vector along rho * e_0 - h * (sphere part direction)
            v[0] = rho;
            for i in 1..4 {
                v[i] = -h * u[i] / rho;
            }
            v
        };
        let s = normal_derivative(&imm, &fp, 0, &field, &cfg).unwrap();
        assert!(s.value.norm() < 1e-6, "slice normal not parallel: {}", s.value.norm());
        // Orthogonal to the tangent frame by construction.
        for e in &fp.tangent_frame {
            assert!(imm.ambient().flat_inner_unchecked(&s.value, e).abs() < 1e-9);
        }
    }

    #[test]
    fn normal_derivative_rejects_non_normal_fields() {
        let imm = diag_imm();
        let cfg = DiffConfig::default();
        let fp = imm.frame_at(&[0.0, 0.0], &cfg).unwrap();
        let field = |y: &[f64]| imm.position(y); // position is not in N_fM
        let err = normal_derivative(&imm, &fp, 0, &field, &cfg);
        assert!(matches!(err, Err(Error::InputContract(_))));
    }

    #[test]
    fn clifford_like_torus_is_not_umbilic() {
        // Product torus inside S^3 x {pt}: principal curvatures differ.
        struct Torus;
        impl Torus {
            fn dim_in(&self) -> usize {
                2
            }
            fn dim_out(&self) -> usize {
                7
            }
            fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
                let a = S::constant(0.6);
                let b = S::constant(0.8);
                vec![
                    a * x[0].cos(),
                    a * x[0].sin(),
                    b * x[1].cos(),
                    b * x[1].sin(),
                    S::constant(1.0),
                    S::constant(0.0),
                    S::constant(0.0),
                ]
            }
        }
        impl_chart_map!(Torus);
        let amb = ProductAmbient::from_curvatures(1.0, 3, 1.0, 2).unwrap();
        let imm =
            ImmersionMap::new(amb, ChartBox::symmetric(2, 1.0), Arc::new(Torus)).unwrap();
        let cfg = DiffConfig::default();
        let fp = imm.frame_at(&[0.4, 0.8], &cfg).unwrap();
        let ed = second_fundamental_form(&imm, &fp, &cfg).unwrap();
        // Closed form: principal curvatures b/a and -a/b along the two factors.
        assert!(umbilic_residual(&ed) > 0.5);
        assert!(nabla_alpha_norm(&imm, &[0.4, 0.8], &cfg).unwrap() < 1e-4);
    }
}
