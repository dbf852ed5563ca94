//! Verification of the Gauss, Codazzi and Ricci equations in their
//! product-space-form shapes, plus the umbilical specializations.
//!
//! The normal curvature is measured from finite differences of a smooth local
//! normal gauge, never from the Ricci equation itself, so each check compares
//! two independently computed sides.

use crate::ambient::AmbientVector;
use crate::error::Result;
use crate::extrinsic::{self};
use crate::fd::diff1;
use crate::immersion::{DiffConfig, ImmersionMap};
use crate::linalg;
use crate::tensors::TensorContext;
use nalgebra::{DMatrix, DVector};

/// Wedge convention used throughout: (X ^ Y) Z = <Y,Z> X - <X,Z> Y.
pub fn wedge_apply(
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    inner: impl Fn(&DVector<f64>, &DVector<f64>) -> f64,
) -> DVector<f64> {
    x * inner(y, z) - y * inner(x, z)
}

/// Residuals of the fundamental equations over a set of sample points.
#[derive(Debug, Clone, Default)]
pub struct EquationReport {
    pub gauss_residual: f64,
    pub codazzi_residual: f64,
    pub codazzi_shape_residual: f64,
    pub ricci_residual: f64,
    /// Chart point realizing the worst Gauss residual.
    pub worst_point: Vec<f64>,
}

/// A smooth orthonormal gauge of the normal bundle near a base point:
/// projections of the base normal frame, orthonormalized in a fixed order.
/// Individual per-point frames elsewhere may flip; these fields are smooth
/// because they are built from the frame-independent normal projector.
pub struct NormalGauge<'a> {
    imm: &'a ImmersionMap,
    cfg: DiffConfig,
    base: Vec<AmbientVector>,
}

impl<'a> NormalGauge<'a> {
    pub fn new(imm: &'a ImmersionMap, base_frame: &[AmbientVector], cfg: &DiffConfig) -> Self {
        NormalGauge { imm, cfg: *cfg, base: base_frame.to_vec() }
    }

    /// The gauge fields at y. At the base point they equal the base frame.
    pub fn fields_at(&self, y: &[f64]) -> Vec<AmbientVector> {
        let pn = self.imm.normal_projector(y, &self.cfg).expect("projector in gauge");
        let amb = self.imm.ambient();
        let projected: Vec<AmbientVector> = self.base.iter().map(|xi| &pn * xi).collect();
        linalg::gram_schmidt(
            &projected,
            |a, b| amb.flat_inner_unchecked(a, b),
            false,
        )
        .expect("gauge stays independent near the base point")
    }

    /// Connection matrices omega_k(y) with
    /// nabla^perp_{d_k} xi~_s = sum_r omega_k[(r,s)] xi~_r.
    pub fn omega_at(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let q = self.base.len();
        let m = self.imm.intrinsic_dim();
        let nf = self.imm.ambient().flat_dim();
        let amb = self.imm.ambient();
        let field = |z: &[f64]| -> DVector<f64> {
            let fields = self.fields_at(z);
            let mut out = DVector::zeros(q * nf);
            for (s, xi) in fields.iter().enumerate() {
                out.rows_mut(s * nf, nf).copy_from(xi);
            }
            out
        };
        let here = self.fields_at(y);
        (0..m)
            .map(|k| {
                let d = diff1(&field, y, k, self.cfg.fd_step, self.cfg.fd_order);
                DMatrix::from_fn(q, q, |r, s| {
                    let ds = d.rows(s * nf, nf);
                    amb.flat_inner_unchecked(&ds.clone_owned(), &here[r])
                })
            })
            .collect()
    }

    /// Curvature matrices Omega_{kl}(y) of the normal connection in the gauge
    /// basis: R^perp(d_k, d_l) xi~_s = sum_r Omega_{kl}[(r,s)] xi~_r.
    pub fn curvature_at(&self, y: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        let q = self.base.len();
        let m = self.imm.intrinsic_dim();
        let omega_field = |z: &[f64]| -> DVector<f64> {
            let om = self.omega_at(z);
            DVector::from_fn(m * q * q, |idx, _| {
                let k = idx / (q * q);
                let rest = idx % (q * q);
                om[k][(rest / q, rest % q)]
            })
        };
        let step = self.cfg.nested_step();
        let dom: Vec<DVector<f64>> =
            (0..m).map(|k| diff1(&omega_field, y, k, step, self.cfg.fd_order)).collect();
        let om0 = self.omega_at(y);
        let slice = |v: &DVector<f64>, k: usize| {
            DMatrix::from_fn(q, q, |r, s| v[k * q * q + r * q + s])
        };
        (0..m)
            .map(|k| {
                (0..m)
                    .map(|l| {
                        let dk_wl = slice(&dom[k], l);
                        let dl_wk = slice(&dom[l], k);
                        dk_wl - dl_wk + &om0[k] * &om0[l] - &om0[l] * &om0[k]
                    })
                    .collect()
            })
            .collect()
    }
}

/// Max residual of the Gauss equation over all frame index combinations.
pub fn gauss_residual(imm: &ImmersionMap, x: &[f64], cfg: &DiffConfig) -> Result<f64> {
    let ctx = TensorContext::at(imm, x, cfg)?;
    let curv = imm.intrinsic_curvature(x, cfg)?;
    let m = ctx.fp.intrinsic_dim();
    let c = &ctx.fp.frame_coeffs;
    // <R(e_a, e_b) e_c, e_d> from the chart-basis tensor.
    let lhs = |a: usize, b: usize, cc: usize, d: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        acc += c[(i, a)] * c[(j, b)] * c[(k, cc)] * c[(l, d)]
                            * curv.component(i, j, k, l);
                    }
                }
            }
        }
        acc
    };
    let rhs = gauss_rhs_general(&ctx);
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for cc in 0..m {
                for d in 0..m {
                    worst = worst.max((lhs(a, b, cc, d) - rhs(a, b, cc, d)).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// The right-hand side of the Gauss equation in frame components, as a closure.
fn gauss_rhs_general(ctx: &TensorContext) -> impl Fn(usize, usize, usize, usize) -> f64 + '_ {
    move |a, b, c, d| {
        let r = &ctx.pt.r;
        let alpha = &ctx.ed.alpha;
        let (k1, k12) = ctx.phi_coefficients;
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let wedge_id = delta(b, c) * delta(a, d) - delta(a, c) * delta(b, d);
        let wedge_x_ry = r[(b, c)] * delta(a, d) - delta(a, c) * r[(b, d)];
        let wedge_rx_y = delta(b, c) * r[(a, d)] - r[(a, c)] * delta(b, d);
        let wedge_rx_ry = r[(b, c)] * r[(a, d)] - r[(a, c)] * r[(b, d)];
        k1 * (wedge_id - wedge_x_ry - wedge_rx_y)
            + k12 * wedge_rx_ry
            + alpha[a][d].dot(&alpha[b][c])
            - alpha[b][d].dot(&alpha[a][c])
    }
}

/// Max residuals of the two Codazzi forms: the nabla-alpha form and the
/// shape-operator form.
pub fn codazzi_residual(imm: &ImmersionMap, x: &[f64], cfg: &DiffConfig) -> Result<(f64, f64)> {
    let ctx = TensorContext::at(imm, x, cfg)?;
    let amb = imm.ambient();
    let m = ctx.fp.intrinsic_dim();
    let codim = ctx.fp.codim();
    let nf = amb.flat_dim();
    let fp = &ctx.fp;
    let pt = &ctx.pt;
    let ed = &ctx.ed;

    // --- nabla-alpha form ---
    let der = extrinsic::covariant_alpha_derivative(imm, fp, cfg)?;
    let s_ambient: Vec<AmbientVector> = (0..m)
        .map(|a| {
            let mut v = AmbientVector::zeros(nf);
            for r in 0..codim {
                v += &fp.normal_frame[r] * pt.s[(r, a)];
            }
            v
        })
        .collect();
    let mut res_alpha: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let lhs = &der[a][b][c] - &der[b][a][c];
                let rhs = &s_ambient[b] * pt.phi[(a, c)] - &s_ambient[a] * pt.phi[(b, c)];
                res_alpha = res_alpha.max((lhs - rhs).norm());
            }
        }
    }

    // --- shape-operator form ---
    // Field of A_{xi~_r}(E_a) for projection-extended normals and
    // chart-constant frame extensions, flattened over (r, a).
    let coeffs = fp.frame_coeffs.clone();
    let frame0 = fp.normal_frame.clone();
    let a_field = |y: &[f64]| -> DVector<f64> {
        let jac = imm.jacobian(y, cfg);
        let g = imm.metric_from_jacobian(&jac);
        let ginv = g.cholesky().expect("metric positive definite").inverse();
        let pn = imm.normal_projector(y, cfg).expect("projector inside stencil");
        let alpha_chart = {
            let hess = imm.hessian(y, cfg);
            (0..m)
                .map(|i| (0..m).map(|j| &pn * &hess[i][j]).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        let mut out = DVector::zeros(codim * m * nf);
        for (r, xi0) in frame0.iter().enumerate() {
            let xi = &pn * xi0;
            // (A_xi)^i_j = g^{il} <alpha(d_l, d_j), xi>
            let mut a_up = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    let mut acc = 0.0;
                    for l in 0..m {
                        acc += ginv[(i, l)]
                            * imm.ambient().flat_inner_unchecked(&alpha_chart[l][j], &xi);
                    }
                    a_up[(i, j)] = acc;
                }
            }
            for a in 0..m {
                // A_xi E_a pushed to the flat model.
                let chart = &a_up * coeffs.column(a);
                let v = &jac * chart;
                out.rows_mut((r * m + a) * nf, nf).copy_from(&v);
            }
        }
        out
    };
    let da: Vec<DVector<f64>> =
        (0..m).map(|k| diff1(&a_field, x, k, cfg.fd_step, cfg.fd_order)).collect();

    // nabla^perp of the projection-extended normals.
    let xi_field = |y: &[f64]| -> DVector<f64> {
        let pn = imm.normal_projector(y, cfg).expect("projector inside stencil");
        let mut out = DVector::zeros(codim * nf);
        for (r, xi0) in frame0.iter().enumerate() {
            out.rows_mut(r * nf, nf).copy_from(&(&pn * xi0));
        }
        out
    };
    let dxi: Vec<DVector<f64>> =
        (0..m).map(|k| diff1(&xi_field, x, k, cfg.fd_step, cfg.fd_order)).collect();

    let pt_proj = imm.tangent_projector(x, cfg)?;
    let pn0 = imm.normal_projector(x, cfg)?;
    // (nabla_{e_b} A)(e_a, xi_r) as an ambient tangent vector.
    let cov_a = |b: usize, a: usize, r: usize| -> AmbientVector {
        let mut d = AmbientVector::zeros(nf);
        for k in 0..m {
            let w = coeffs[(k, b)];
            if w != 0.0 {
                d += da[k].rows((r * m + a) * nf, nf) * w;
            }
        }
        let mut v = &pt_proj * d;
        // minus A_{nabla^perp_{e_b} xi_r} e_a
        let mut dn = AmbientVector::zeros(nf);
        for k in 0..m {
            let w = coeffs[(k, b)];
            if w != 0.0 {
                dn += dxi[k].rows(r * nf, nf) * w;
            }
        }
        let nperp = &pn0 * dn;
        let nperp_comps = DVector::from_fn(codim, |s, _| {
            imm.ambient().flat_inner_unchecked(&nperp, &fp.normal_frame[s])
        });
        let a_n = ed.shape_operator(&nperp_comps);
        for c in 0..m {
            v -= &fp.tangent_frame[c] * a_n[(a, c)];
        }
        // minus A_{xi_r} (nabla_{e_b} E_a)
        let gcoeff = fp.frame_covariant_coeffs(b, a);
        // components of nabla_{e_b} E_a in the frame basis
        let mut frame_comps = DVector::zeros(m);
        for c in 0..m {
            let mut acc = 0.0;
            for i in 0..m {
                for j in 0..m {
                    acc += gcoeff[i] * fp.metric[(i, j)] * fp.frame_coeffs[(j, c)];
                }
            }
            frame_comps[c] = acc;
        }
        for c in 0..m {
            let mut acc = 0.0;
            for e in 0..m {
                acc += ed.shape_ops[r][(e, c)] * frame_comps[e];
            }
            v -= &fp.tangent_frame[c] * acc;
        }
        v
    };
    let phi_ambient: Vec<AmbientVector> = (0..m)
        .map(|a| {
            let mut v = AmbientVector::zeros(nf);
            for c in 0..m {
                v += &fp.tangent_frame[c] * pt.phi[(a, c)];
            }
            v
        })
        .collect();
    let mut res_shape: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for r in 0..codim {
                let lhs = cov_a(b, a, r) - cov_a(a, b, r);
                let rhs = &phi_ambient[b] * pt.s[(r, a)] - &phi_ambient[a] * pt.s[(r, b)];
                res_shape = res_shape.max((lhs - rhs).norm());
            }
        }
    }

    Ok((res_alpha, res_shape))
}

/// Max residual of the Ricci equation: gauge-measured R^perp against the
/// shape-operator commutator plus the S-wedge term.
pub fn ricci_residual(imm: &ImmersionMap, x: &[f64], cfg: &DiffConfig) -> Result<f64> {
    let ctx = TensorContext::at(imm, x, cfg)?;
    let m = ctx.fp.intrinsic_dim();
    let codim = ctx.fp.codim();
    if codim == 0 || m < 2 {
        return Ok(0.0);
    }
    let gauge = NormalGauge::new(imm, &ctx.fp.normal_frame, cfg);
    let omega_frame = frame_curvature(&gauge, &ctx, x);
    let (_, k12) = ctx.phi_coefficients;
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for s in 0..codim {
                let lhs = omega_frame[a][b].column(s).clone_owned();
                let rhs = ricci_rhs(&ctx, k12, a, b, s);
                worst = worst.max((lhs - rhs).norm());
            }
        }
    }
    Ok(worst)
}

/// R^perp(e_a, e_b) in gauge components, for all frame pairs.
fn frame_curvature(
    gauge: &NormalGauge,
    ctx: &TensorContext,
    x: &[f64],
) -> Vec<Vec<DMatrix<f64>>> {
    let m = ctx.fp.intrinsic_dim();
    let q = ctx.fp.codim();
    let omega = gauge.curvature_at(x);
    let c = &ctx.fp.frame_coeffs;
    (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    let mut acc = DMatrix::zeros(q, q);
                    for k in 0..m {
                        for l in 0..m {
                            let w = c[(k, a)] * c[(l, b)];
                            if w != 0.0 {
                                acc += &omega[k][l] * w;
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// alpha(X, A_eta Y) - alpha(A_eta X, Y) + (k1+k2) (SX ^ SY) eta, in
/// normal-frame components, for eta = xi_s.
fn ricci_rhs(ctx: &TensorContext, k12: f64, a: usize, b: usize, s: usize) -> DVector<f64> {
    let m = ctx.fp.intrinsic_dim();
    let codim = ctx.fp.codim();
    let shape = &ctx.ed.shape_ops[s];
    let mut rhs = DVector::zeros(codim);
    for c in 0..m {
        rhs += &ctx.ed.alpha[a][c] * shape[(b, c)];
        rhs -= &ctx.ed.alpha[c][b] * shape[(a, c)];
    }
    // (S e_a ^ S e_b) xi_s = <S e_b, xi_s> S e_a - <S e_a, xi_s> S e_b
    let sa = ctx.pt.s.column(a).clone_owned();
    let sb = ctx.pt.s.column(b).clone_owned();
    rhs += (&sa * sb[s] - &sb * sa[s]) * k12;
    rhs
}

/// Residuals of the umbilical specializations against the measured data:
/// (Gauss form difference, Codazzi mean-curvature form, Ricci S-wedge form).
/// Meaningful only on umbilical instances.
pub fn umbilical_specialization_residuals(
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
    let (_, k12) = ctx.phi_coefficients;

    // Gauss: the general alpha terms against |eta|^2 X ^ Y.
    let rhs_general = gauss_rhs_general(&ctx);
    let eta2 = ed.mean_curvature.norm_squared();
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut gauss_diff: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let r = &pt.r;
                    let (k1, _) = ctx.phi_coefficients;
                    let wedge_id = delta(b, c) * delta(a, d) - delta(a, c) * delta(b, d);
                    let wedge_x_ry = r[(b, c)] * delta(a, d) - delta(a, c) * r[(b, d)];
                    let wedge_rx_y = delta(b, c) * r[(a, d)] - r[(a, c)] * delta(b, d);
                    let wedge_rx_ry = r[(b, c)] * r[(a, d)] - r[(a, c)] * r[(b, d)];
                    let umb = k1 * (wedge_id - wedge_x_ry - wedge_rx_y)
                        + k12 * wedge_rx_ry
                        + eta2 * wedge_id;
                    gauss_diff = gauss_diff.max((rhs_general(a, b, c, d) - umb).abs());
                }
            }
        }
    }

    // Codazzi: <Y,Z> nabla^perp_X eta - <X,Z> nabla^perp_Y eta
    //          = <Phi X, Z> SY - <Phi Y, Z> SX.
    // Mean curvature as a smooth field through the projectors.
    let eta_field = |y: &[f64]| -> AmbientVector {
        let jac = imm.jacobian(y, cfg);
        let g = imm.metric_from_jacobian(&jac);
        let ginv = g.cholesky().expect("metric positive definite").inverse();
        let alpha_chart = extrinsic::alpha_chart_basis(imm, y, cfg).expect("alpha in stencil");
        let mut h = AmbientVector::zeros(nf);
        for i in 0..m {
            for j in 0..m {
                h += &alpha_chart[i][j] * ginv[(i, j)];
            }
        }
        h / m as f64
    };
    let deta: Vec<AmbientVector> =
        (0..m).map(|k| diff1(&eta_field, x, k, cfg.fd_step, cfg.fd_order)).collect();
    let pn0 = imm.normal_projector(x, cfg)?;
    let nperp_eta: Vec<AmbientVector> = (0..m)
        .map(|a| {
            let mut d = AmbientVector::zeros(nf);
            for k in 0..m {
                let w = fp.frame_coeffs[(k, a)];
                if w != 0.0 {
                    d += &deta[k] * w;
                }
            }
            &pn0 * d
        })
        .collect();
    let s_ambient: Vec<AmbientVector> = (0..m)
        .map(|a| {
            let mut v = AmbientVector::zeros(nf);
            for r in 0..codim {
                v += &fp.normal_frame[r] * pt.s[(r, a)];
            }
            v
        })
        .collect();
    let mut codazzi_umb: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let lhs = &nperp_eta[a] * delta(b, c) - &nperp_eta[b] * delta(a, c);
                let rhs = &s_ambient[b] * pt.phi[(a, c)] - &s_ambient[a] * pt.phi[(b, c)];
                codazzi_umb = codazzi_umb.max((lhs - rhs).norm());
            }
        }
    }

    // Ricci: R^perp(X,Y) xi = (k1+k2)(SX ^ SY) xi.
    let gauge = NormalGauge::new(imm, &fp.normal_frame, cfg);
    let omega_frame = frame_curvature(&gauge, &ctx, x);
    let mut ricci_umb: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for s in 0..codim {
                let lhs = omega_frame[a][b].column(s).clone_owned();
                let sa = pt.s.column(a).clone_owned();
                let sb = pt.s.column(b).clone_owned();
                let rhs = (&sa * sb[s] - &sb * sa[s]) * k12;
                ricci_umb = ricci_umb.max((lhs - rhs).norm());
            }
        }
    }

    Ok((gauss_diff, codazzi_umb, ricci_umb))
}

/// Agreement between the general fundamental equations and their umbilical
/// forms, evaluated on the measured data: the Gauss right-hand sides, the two
/// Codazzi left-hand sides, and the Ricci shape-operator commutator (which
/// the umbilical form drops). Meaningful on umbilical instances only.
pub fn umbilical_form_agreement(
    imm: &ImmersionMap,
    x: &[f64],
    cfg: &DiffConfig,
) -> Result<(f64, f64, f64)> {
    let ctx = TensorContext::at(imm, x, cfg)?;
    let m = ctx.fp.intrinsic_dim();
    let codim = ctx.fp.codim();
    let nf = imm.ambient().flat_dim();
    let (_, k12) = ctx.phi_coefficients;
    let eta2 = ctx.ed.mean_curvature.norm_squared();
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };

    // Gauss: alpha terms versus |eta|^2 X wedge Y.
    let rhs_general = gauss_rhs_general(&ctx);
    let mut gauss_diff: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let r = &ctx.pt.r;
                    let (k1, _) = ctx.phi_coefficients;
                    let wedge_id = delta(b, c) * delta(a, d) - delta(a, c) * delta(b, d);
                    let wedge_x_ry = r[(b, c)] * delta(a, d) - delta(a, c) * r[(b, d)];
                    let wedge_rx_y = delta(b, c) * r[(a, d)] - r[(a, c)] * delta(b, d);
                    let wedge_rx_ry = r[(b, c)] * r[(a, d)] - r[(a, c)] * r[(b, d)];
                    let umb = k1 * (wedge_id - wedge_x_ry - wedge_rx_y)
                        + k12 * wedge_rx_ry
                        + eta2 * wedge_id;
                    gauss_diff = gauss_diff.max((rhs_general(a, b, c, d) - umb).abs());
                }
            }
        }
    }

    // Codazzi: the nabla-alpha left side versus its mean-curvature form.
    let der = extrinsic::covariant_alpha_derivative(imm, &ctx.fp, cfg)?;
    let eta_field = |y: &[f64]| -> AmbientVector {
        let jac = imm.jacobian(y, cfg);
        let g = imm.metric_from_jacobian(&jac);
        let ginv = g.cholesky().expect("metric positive definite").inverse();
        let alpha_chart = extrinsic::alpha_chart_basis(imm, y, cfg).expect("alpha in stencil");
        let mut h = AmbientVector::zeros(nf);
        for i in 0..m {
            for j in 0..m {
                h += &alpha_chart[i][j] * ginv[(i, j)];
            }
        }
        h / m as f64
    };
    let deta: Vec<AmbientVector> =
        (0..m).map(|k| diff1(&eta_field, x, k, cfg.fd_step, cfg.fd_order)).collect();
    let pn0 = imm.normal_projector(x, cfg)?;
    let nperp_eta: Vec<AmbientVector> = (0..m)
        .map(|a| {
            let mut d = AmbientVector::zeros(nf);
            for k in 0..m {
                let w = ctx.fp.frame_coeffs[(k, a)];
                if w != 0.0 {
                    d += &deta[k] * w;
                }
            }
            &pn0 * d
        })
        .collect();
    let mut codazzi_diff: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let lhs8 = &der[a][b][c] - &der[b][a][c];
                let lhs42 = &nperp_eta[a] * delta(b, c) - &nperp_eta[b] * delta(a, c);
                codazzi_diff = codazzi_diff.max((lhs8 - lhs42).norm());
            }
        }
    }

    // Ricci: the shape-operator commutator the umbilical form drops.
    let mut ricci_diff: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for s in 0..codim {
                let shape = &ctx.ed.shape_ops[s];
                let mut comm = DVector::zeros(codim);
                for c in 0..m {
                    comm += &ctx.ed.alpha[a][c] * shape[(b, c)];
                    comm -= &ctx.ed.alpha[c][b] * shape[(a, c)];
                }
                ricci_diff = ricci_diff.max(comm.norm());
            }
        }
    }
    Ok((gauss_diff, codazzi_diff, ricci_diff))
}

/// Evaluate all three equations over sample points, keeping the worst values.
pub fn verify_equations(
    imm: &ImmersionMap,
    points: &[Vec<f64>],
    cfg: &DiffConfig,
) -> Result<EquationReport> {
    let mut report = EquationReport::default();
    for x in points {
        let g = gauss_residual(imm, x, cfg)?;
        let (c8, c10) = codazzi_residual(imm, x, cfg)?;
        let ric = ricci_residual(imm, x, cfg)?;
        if g > report.gauss_residual {
            report.gauss_residual = g;
            report.worst_point = x.clone();
        }
        report.codazzi_residual = report.codazzi_residual.max(c8);
        report.codazzi_shape_residual = report.codazzi_shape_residual.max(c10);
        report.ricci_residual = report.ricci_residual.max(ric);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::ProductAmbient;
    use crate::immersion::ChartBox;
    use crate::jet::Scalar;
    use crate::impl_chart_map;
    use std::sync::Arc;

    #[test]
    fn wedge_convention_on_basis_vectors() {
        // (e1 ^ e2) e2 = e1 and (e1 ^ e2) e1 = -e2 under the Euclidean inner.
        let e1 = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        let e2 = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
        let dot = |a: &DVector<f64>, b: &DVector<f64>| a.dot(b);
        assert_eq!(wedge_apply(&e1, &e2, &e2, dot), e1);
        assert_eq!(wedge_apply(&e1, &e2, &e1, dot), -e2.clone());
        assert_eq!(wedge_apply(&e1, &e2, &(&e1 + &e2), dot).norm_squared(), 2.0);
    }

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

    fn slice_imm(rho: f64) -> ImmersionMap {
        let amb = ProductAmbient::from_curvatures(1.0, 3, 1.0, 2).unwrap();
        ImmersionMap::new(amb, ChartBox::symmetric(2, 1.0), Arc::new(SmallSphereSlice { rho }))
            .unwrap()
    }

    #[test]
    fn gauss_equation_holds_on_slice_and_diagonal() {
        let cfg = DiffConfig::default();
        let g = gauss_residual(&slice_imm(0.8), &[0.2, 0.1], &cfg).unwrap();
        assert!(g < 1e-3, "slice gauss residual {g}");

        let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2).unwrap();
        let imm =
            ImmersionMap::new(amb, ChartBox::symmetric(2, 1.0), Arc::new(DiagonalS2)).unwrap();
        let g = gauss_residual(&imm, &[0.1, -0.2], &cfg).unwrap();
        assert!(g < 1e-3, "diagonal gauss residual {g}");
    }

    #[test]
    fn codazzi_both_forms_hold_on_slice() {
        let cfg = DiffConfig::default();
        let (c8, c10) = codazzi_residual(&slice_imm(0.8), &[0.15, 0.2], &cfg).unwrap();
        assert!(c8 < 1e-4, "codazzi alpha-form {c8}");
        assert!(c10 < 1e-4, "codazzi shape-form {c10}");
    }

    #[test]
    fn ricci_equation_holds_and_slice_normal_bundle_is_flat() {
        let cfg = DiffConfig::default();
        let imm = slice_imm(0.8);
        let ctx = TensorContext::at(&imm, &[0.2, 0.1], &cfg).unwrap();
        let gauge = NormalGauge::new(&imm, &ctx.fp.normal_frame, &cfg);
        let omega = frame_curvature(&gauge, &ctx, &[0.2, 0.1]);
        let mut rperp: f64 = 0.0;
        for row in &omega {
            for mat in row {
                rperp = rperp.max(mat.norm());
            }
        }
        assert!(rperp < 1e-4, "slice R-perp {rperp}");
        let r = ricci_residual(&imm, &[0.2, 0.1], &cfg).unwrap();
        assert!(r < 1e-4, "ricci residual {r}");
    }

    #[test]
    fn umbilical_specializations_agree_on_the_slice_sphere() {
        let cfg = DiffConfig::default();
        let imm = slice_imm(0.8);
        let (g, c, r) = umbilical_specialization_residuals(&imm, &[0.1, 0.25], &cfg).unwrap();
        assert!(g < 1e-6, "gauss umbilical form diff {g}");
        assert!(c < 1e-5, "codazzi umbilical residual {c}");
        assert!(r < 1e-4, "ricci umbilical residual {r}");
    }
}
