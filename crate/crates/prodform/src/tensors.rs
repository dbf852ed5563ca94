//! The projection tensors R, S, T and the operator Phi of an immersion, with
//! their algebraic and differential identities and the derived subbundles.
//!
//! In the frames of a [`FramedPoint`], pi_2 splits as L = f_* R + S on tangent
//! vectors and K = f_* S^t + T on normal vectors, with R = L^t L, S = K^t L,
//! T = K^t K. Matrix conventions: `r[(a,b)] = <R e_a, e_b>`,
//! `s[(r,a)] = <S e_a, xi_r>`, `t[(r,s)] = <T xi_r, xi_s>`.

use crate::ambient::{AmbientVector, ProductAmbient};
use crate::error::{Error, Result};
use crate::extrinsic::{self, ExtrinsicData};
use crate::fd::diff1;
use crate::immersion::{DiffConfig, FramedPoint, ImmersionMap};
use crate::linalg;
use nalgebra::{DMatrix, DVector};

/// Default kernel / eigenvalue tolerance for subbundle extraction.
pub const SUBBUNDLE_TOL: f64 = 1e-6;
/// Hysteresis factor: loose ranks use `SUBBUNDLE_TOL * HYSTERESIS`.
pub const HYSTERESIS: f64 = 100.0;

/// The tensors of one framed point.
#[derive(Debug, Clone)]
pub struct ProductTensors {
    /// pi_2 of the tangent frame, one ambient column per frame vector.
    pub l_matrix: DMatrix<f64>,
    /// pi_2 of the normal frame.
    pub k_matrix: DMatrix<f64>,
    /// R = L^t L in the tangent frame (m x m, symmetric).
    pub r: DMatrix<f64>,
    /// S = K^t L (codim x m): s[(r,a)] are the normal-frame components of S e_a.
    pub s: DMatrix<f64>,
    /// T = K^t K in the normal frame (codim x codim, symmetric).
    pub t: DMatrix<f64>,
    /// Phi = k1 I - (k1 + k2) R.
    pub phi: DMatrix<f64>,
    /// Worst residual of the two decomposition checks.
    pub decomposition_defect: f64,
}

impl ProductTensors {
    pub fn intrinsic_dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn codim(&self) -> usize {
        self.t.nrows()
    }

    pub fn s_norm(&self) -> f64 {
        self.s.norm()
    }

    pub fn phi_norm(&self) -> f64 {
        self.phi.norm()
    }

    pub fn r_eigenvalues(&self) -> Vec<f64> {
        linalg::sym_eigen(&self.r).0
    }

    pub fn t_eigenvalues(&self) -> Vec<f64> {
        linalg::sym_eigen(&self.t).0
    }
}

/// Compute L, K, R, S, T, Phi at a framed point and assert the splitting
/// pi_2 f_* X = f_* RX + SX and pi_2 xi = f_* S^t xi + T xi.
pub fn compute_tensors(amb: &ProductAmbient, fp: &FramedPoint) -> Result<ProductTensors> {
    let m = fp.intrinsic_dim();
    let codim = fp.codim();
    let nf = amb.flat_dim();

    let l_cols: Vec<AmbientVector> = fp.tangent_frame.iter().map(|e| amb.block2(e)).collect();
    let k_cols: Vec<AmbientVector> = fp.normal_frame.iter().map(|x| amb.block2(x)).collect();

    let r = DMatrix::from_fn(m, m, |a, b| amb.flat_inner_unchecked(&l_cols[a], &l_cols[b]));
    let s = DMatrix::from_fn(codim, m, |rr, a| amb.flat_inner_unchecked(&k_cols[rr], &l_cols[a]));
    let t = DMatrix::from_fn(codim, codim, |rr, ss| {
        amb.flat_inner_unchecked(&k_cols[rr], &k_cols[ss])
    });
    let (c1, c12) = amb.phi_coefficients();
    let phi = DMatrix::identity(m, m) * c1 - &r * c12;

    // Splitting checks.
    let mut defect: f64 = 0.0;
    for a in 0..m {
        let mut reconstructed = AmbientVector::zeros(nf);
        for b in 0..m {
            reconstructed += &fp.tangent_frame[b] * r[(a, b)];
        }
        for rr in 0..codim {
            reconstructed += &fp.normal_frame[rr] * s[(rr, a)];
        }
        defect = defect.max((&l_cols[a] - reconstructed).norm());
    }
    for rr in 0..codim {
        let mut reconstructed = AmbientVector::zeros(nf);
        for a in 0..m {
            reconstructed += &fp.tangent_frame[a] * s[(rr, a)];
        }
        for ss in 0..codim {
            reconstructed += &fp.normal_frame[ss] * t[(rr, ss)];
        }
        defect = defect.max((&k_cols[rr] - reconstructed).norm());
    }
    if defect > 1e-8 {
        return Err(Error::GeometryInconsistency(format!(
            "pi_2 splitting defect {defect:.3e} at {:?}",
            fp.chart
        )));
    }

    let l_matrix = DMatrix::from_fn(nf, m, |r_, c| l_cols[c][r_]);
    let k_matrix = DMatrix::from_fn(nf, codim, |r_, c| k_cols[c][r_]);
    Ok(ProductTensors { l_matrix, k_matrix, r, s, t, phi, decomposition_defect: defect })
}

/// Frobenius norms of S^t S - R(I - R), TS - S(I - R), S S^t - T(I - T).
pub fn algebraic_identity_residuals(pt: &ProductTensors) -> (f64, f64, f64) {
    let m = pt.intrinsic_dim();
    let codim = pt.codim();
    let im = DMatrix::<f64>::identity(m, m);
    let ic = DMatrix::<f64>::identity(codim, codim);
    let sts = pt.s.transpose() * &pt.s;
    let first = (&sts - &pt.r * (&im - &pt.r)).norm();
    let second = (&pt.t * &pt.s - &pt.s * (&im - &pt.r)).norm();
    let sst = &pt.s * pt.s.transpose();
    let third = (&sst - &pt.t * (&ic - &pt.t)).norm();
    (first, second, third)
}

/// Pointwise bases of the subbundles derived from R, S, T.
///
/// Tangent-side bases are in tangent-frame components, normal-side bases in
/// normal-frame components. Ranks are reported at the strict tolerance and at
/// the loose (hysteresis) tolerance so borderline spectra are visible.
#[derive(Debug, Clone)]
pub struct SubbundleSample {
    pub u_basis: Vec<DVector<f64>>,
    pub v_basis: Vec<DVector<f64>>,
    pub ker_r: Vec<DVector<f64>>,
    pub ker_i_minus_r: Vec<DVector<f64>>,
    pub ker_s: Vec<DVector<f64>>,
    pub r_spectrum: Vec<f64>,
    pub t_spectrum: Vec<f64>,
    pub s_singular_values: Vec<f64>,
    pub rank_s_strict: usize,
    pub rank_s_loose: usize,
    /// Worst |S v| over the claimed ker R + ker(I-R) basis vectors.
    pub ker_split_defect: f64,
}

/// Eigen-split extraction of U = ker T, V = ker(I - T), ker R, ker(I - R)
/// and ker S. Errors if S(TM)^perp carries a T-eigenvalue strictly inside
/// (tol, 1 - tol), which no immersion geometry can produce.
pub fn extract_subbundles(pt: &ProductTensors, tol: f64) -> Result<SubbundleSample> {
    let (r_vals, r_vecs) = linalg::sym_eigen(&pt.r);
    let (t_vals, t_vecs) = linalg::sym_eigen(&pt.t);

    let collect = |vals: &[f64], vecs: &[DVector<f64>], pred: &dyn Fn(f64) -> bool| {
        vals.iter()
            .zip(vecs)
            .filter(|(v, _)| pred(**v))
            .map(|(_, w)| w.clone())
            .collect::<Vec<_>>()
    };
    let ker_r = collect(&r_vals, &r_vecs, &|v| v < tol);
    let ker_i_minus_r = collect(&r_vals, &r_vecs, &|v| v > 1.0 - tol);
    let u_basis = collect(&t_vals, &t_vecs, &|v| v < tol);
    let v_basis = collect(&t_vals, &t_vecs, &|v| v > 1.0 - tol);

    // ker S and ker S^t from the singular value decomposition.
    let svd = pt.s.clone().svd(true, true);
    let svals: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let smax = svals.iter().cloned().fold(0.0, f64::max).max(1.0);
    let rank_s_strict = svals.iter().filter(|s| **s > tol * smax).count();
    let rank_s_loose = svals.iter().filter(|s| **s > tol * HYSTERESIS * smax).count();
    let vt = svd.v_t.as_ref().expect("requested V^t");
    let m = pt.intrinsic_dim();
    let mut ker_s: Vec<DVector<f64>> =
        (rank_s_strict..vt.nrows()).map(|r| vt.row(r).transpose()).collect();
    // Thin SVD: complete ker S when codim < m.
    if vt.nrows() < m {
        let mut rows = DMatrix::zeros(vt.nrows(), m);
        rows.copy_from(vt);
        let extra = linalg::nullspace(&rows, 1e-12);
        ker_s.extend(extra);
    }

    // Lemma: T restricted to S(TM)^perp = ker S^t is a projection; a middle
    // eigenvalue there contradicts the geometry.
    let u_mat = svd.u.as_ref().expect("requested U");
    let codim = pt.codim();
    let mut ker_st: Vec<DVector<f64>> =
        (rank_s_strict..u_mat.ncols()).map(|c| u_mat.column(c).clone_owned()).collect();
    if u_mat.ncols() < codim {
        // Thin SVD: complete ker S^t beyond the span of U.
        ker_st.extend(linalg::nullspace(&u_mat.transpose(), 1e-12));
    }
    if !ker_st.is_empty() {
        let q = ker_st.len();
        let w = DMatrix::from_fn(codim, q, |r, c| ker_st[c][r]);
        let restricted = w.transpose() * &pt.t * &w;
        let (vals, _) = linalg::sym_eigen(&restricted);
        for v in vals {
            if v > tol && v < 1.0 - tol {
                return Err(Error::GeometryInconsistency(format!(
                    "T has eigenvalue {v:.6} strictly inside (tol, 1 - tol) on S(TM)^perp"
                )));
            }
        }
    }

    // ker S = ker R + ker(I - R) splitting defect.
    let mut split_defect: f64 = 0.0;
    for w in ker_r.iter().chain(&ker_i_minus_r) {
        split_defect = split_defect.max((&pt.s * w).norm());
    }
    Ok(SubbundleSample {
        u_basis,
        v_basis,
        ker_r,
        ker_i_minus_r,
        ker_s,
        r_spectrum: r_vals,
        t_spectrum: t_vals,
        s_singular_values: svals,
        rank_s_strict,
        rank_s_loose,
        ker_split_defect: split_defect,
    })
}

/// Everything the differential identities need at one point.
pub struct TensorContext {
    pub fp: FramedPoint,
    pub pt: ProductTensors,
    pub ed: ExtrinsicData,
    /// (k1, k1 + k2) of the ambient.
    pub phi_coefficients: (f64, f64),
}

impl TensorContext {
    pub fn at(imm: &ImmersionMap, x: &[f64], cfg: &DiffConfig) -> Result<Self> {
        let fp = imm.frame_at(x, cfg)?;
        let pt = compute_tensors(imm.ambient(), &fp)?;
        let ed = extrinsic::second_fundamental_form(imm, &fp, cfg)?;
        Ok(TensorContext { fp, pt, ed, phi_coefficients: imm.ambient().phi_coefficients() })
    }
}

/// R as a chart-basis (1,1)-tensor field, flattened row-major; smooth in y.
fn r_chart_field(imm: &ImmersionMap, y: &[f64], cfg: &DiffConfig) -> DVector<f64> {
    let m = imm.intrinsic_dim();
    let amb = imm.ambient();
    let jac = imm.jacobian(y, cfg);
    let g = imm.metric_from_jacobian(&jac);
    let ginv = g.clone().cholesky().expect("metric positive definite").inverse();
    let cols: Vec<AmbientVector> = (0..m).map(|i| amb.block2(&jac.column(i).clone_owned())).collect();
    let r_low = DMatrix::from_fn(m, m, |i, j| amb.flat_inner_unchecked(&cols[i], &cols[j]));
    let r_up = ginv * r_low;
    DVector::from_fn(m * m, |idx, _| r_up[(idx / m, idx % m)])
}

/// Residuals of the three differential identities at x:
/// (nabla R - shape terms, nabla S - T alpha terms, nabla T + S A terms),
/// each the max norm over frame directions and normal basis vectors.
pub fn differential_identity_residuals(
    imm: &ImmersionMap,
    x: &[f64],
    cfg: &DiffConfig,
) -> Result<(f64, f64, f64)> {
    let ctx = TensorContext::at(imm, x, cfg)?;
    let amb = imm.ambient();
    let m = ctx.fp.intrinsic_dim();
    let codim = ctx.fp.codim();
    let nf = amb.flat_dim();
    let fp = &ctx.fp;
    let pt = &ctx.pt;
    let ed = &ctx.ed;

    // ---- Equation for nabla R ----
    let r_field = |y: &[f64]| r_chart_field(imm, y, cfg);
    let dr: Vec<DVector<f64>> =
        (0..m).map(|k| diff1(&r_field, x, k, cfg.fd_step, cfg.fd_order)).collect();
    let r0 = r_chart_field(imm, x, cfg);
    let gamma = &fp.christoffels;
    // (nabla_k R)^i_j = d_k R^i_j + Gamma^i_ks R^s_j - Gamma^s_kj R^i_s
    let covar_r = |k: usize, i: usize, j: usize| -> f64 {
        let mut acc = dr[k][i * m + j];
        for s in 0..m {
            acc += gamma[i][k * m + s] * r0[s * m + j] - gamma[s][k * m + j] * r0[i * m + s];
        }
        acc
    };
    let mut res_r: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            // LHS = (nabla_{e_a} R) e_b pushed to the flat model.
            let mut chart = DVector::zeros(m);
            for k in 0..m {
                for j in 0..m {
                    let w = fp.frame_coeffs[(k, a)] * fp.frame_coeffs[(j, b)];
                    if w != 0.0 {
                        for i in 0..m {
                            chart[i] += w * covar_r(k, i, j);
                        }
                    }
                }
            }
            let lhs = fp.push_chart(&chart);
            // RHS = A_{S e_b} e_a + S^t alpha(e_a, e_b).
            let s_eb = pt.s.column(b).clone_owned();
            let a_seb = ed.shape_operator(&s_eb);
            let mut rhs = AmbientVector::zeros(nf);
            for c in 0..m {
                rhs += &fp.tangent_frame[c] * a_seb[(a, c)];
            }
            let st_alpha = pt.s.transpose() * &ed.alpha[a][b];
            for c in 0..m {
                rhs += &fp.tangent_frame[c] * st_alpha[c];
            }
            res_r = res_r.max((lhs - rhs).norm());
        }
    }

    // ---- Equation for nabla S ----
    // Field of S(E_b) for all chart-constant frame extensions E_b, flattened.
    let coeffs = fp.frame_coeffs.clone();
    let s_field = |y: &[f64]| -> DVector<f64> {
        let jac = imm.jacobian(y, cfg);
        let pn = imm.normal_projector(y, cfg).expect("projector inside stencil");
        let mut out = DVector::zeros(m * nf);
        for b in 0..m {
            let v = &jac * coeffs.column(b);
            let sv = &pn * amb.block2(&v);
            out.rows_mut(b * nf, nf).copy_from(&sv);
        }
        out
    };
    let ds: Vec<DVector<f64>> =
        (0..m).map(|k| diff1(&s_field, x, k, cfg.fd_step, cfg.fd_order)).collect();
    let pn0 = imm.normal_projector(x, cfg)?;
    let mut res_s: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            // nabla^perp_{e_a} (S E_b)
            let mut d = AmbientVector::zeros(nf);
            for k in 0..m {
                let w = fp.frame_coeffs[(k, a)];
                if w != 0.0 {
                    d += ds[k].rows(b * nf, nf) * w;
                }
            }
            let mut lhs = &pn0 * d;
            // minus S(nabla_{e_a} E_b)
            let gcoeff = fp.frame_covariant_coeffs(a, b);
            let v = fp.push_chart(&gcoeff);
            lhs -= &pn0 * amb.block2(&v);
            // RHS = T alpha(e_a, e_b) - alpha(e_a, R e_b)
            let t_alpha = &pt.t * &ed.alpha[a][b];
            let mut rhs_comp = t_alpha;
            for c in 0..m {
                rhs_comp -= &ed.alpha[a][c] * pt.r[(b, c)];
            }
            let mut rhs = AmbientVector::zeros(nf);
            for r in 0..codim {
                rhs += &fp.normal_frame[r] * rhs_comp[r];
            }
            res_s = res_s.max((lhs - rhs).norm());
        }
    }

    // ---- Equation for nabla T ----
    // Projection extensions xi~_r(y) = P_N(y) xi_r and the fields T xi~_r.
    let frame0 = fp.normal_frame.clone();
    let t_field = |y: &[f64]| -> DVector<f64> {
        let pn = imm.normal_projector(y, cfg).expect("projector inside stencil");
        let mut out = DVector::zeros(2 * codim * nf);
        for r in 0..codim {
            let xi = &pn * &frame0[r];
            let txi = &pn * amb.block2(&xi);
            out.rows_mut(r * nf, nf).copy_from(&xi);
            out.rows_mut((codim + r) * nf, nf).copy_from(&txi);
        }
        out
    };
    let dt: Vec<DVector<f64>> =
        (0..m).map(|k| diff1(&t_field, x, k, cfg.fd_step, cfg.fd_order)).collect();
    let mut res_t: f64 = 0.0;
    for a in 0..m {
        for r in 0..codim {
            let mut d_xi = AmbientVector::zeros(nf);
            let mut d_txi = AmbientVector::zeros(nf);
            for k in 0..m {
                let w = fp.frame_coeffs[(k, a)];
                if w != 0.0 {
                    d_xi += dt[k].rows(r * nf, nf) * w;
                    d_txi += dt[k].rows((codim + r) * nf, nf) * w;
                }
            }
            // (nabla_{e_a} T) xi_r = nabla^perp(T xi~) - T nabla^perp(xi~)
            let nperp_xi = &pn0 * d_xi;
            let mut lhs = &pn0 * d_txi;
            lhs -= &pn0 * amb.block2(&nperp_xi);
            // RHS = -S A_{xi_r} e_a - alpha(e_a, S^t xi_r)
            let shape = &ed.shape_ops[r];
            let mut rhs_comp = DVector::zeros(codim);
            for c in 0..m {
                // S (A_{xi_r} e_a) component on xi_s is sum_c A[(a,c)] s[(s,c)]
                let w = shape[(a, c)];
                if w != 0.0 {
                    rhs_comp -= pt.s.column(c) * w;
                }
            }
            for c in 0..m {
                let w = pt.s[(r, c)];
                if w != 0.0 {
                    rhs_comp -= &ed.alpha[a][c] * w;
                }
            }
            let mut rhs = AmbientVector::zeros(nf);
            for ss in 0..codim {
                rhs += &fp.normal_frame[ss] * rhs_comp[ss];
            }
            res_t = res_t.max((lhs - rhs).norm());
        }
    }

    Ok((res_r, res_s, res_t))
}
