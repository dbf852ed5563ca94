//! Classification of sampled immersions against the parallel, totally
//! geodesic and umbilical taxonomies, plus the reduction-of-codimension
//! detectors.
//!
//! All verdicts are about the sampled chart: global statements (completeness,
//! analytic continuation) are outside what a single-chart numerical tool can
//! certify, and every decision carries the measured margins in its evidence
//! map so threshold sensitivity stays auditable.

use crate::ambient::AmbientVector;
use crate::equations::NormalGauge;
use crate::error::{Error, Result};
use crate::extrinsic;
use crate::fd::diff1;
use crate::immersion::{DiffConfig, ImmersionMap};
use crate::linalg;
use crate::tensors::{self, TensorContext};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::fmt;

/// Classification thresholds. The theorems are exact dichotomies; these are
/// the declared numerical bands around them.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Parallelism threshold on the Van der Waerden-Bortolotti derivative.
    pub parallel: f64,
    /// Umbilicity threshold on max |alpha - <,> H|.
    pub umbilic: f64,
    /// Threshold under which a tensor counts as zero.
    pub zero: f64,
    /// Kernel / eigenvalue band for subbundle extraction.
    pub rank: f64,
    /// Threshold for normal-connection parallelism of subbundles.
    pub reduction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { parallel: 1e-4, umbilic: 1e-6, zero: 1e-6, rank: 1e-6, reduction: 1e-3 }
    }
}

/// Theorem taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Theorem {
    Parallel11,
    ParallelFlat12,
    TotGeod13,
    Umbilical14,
    None,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Theorem::Parallel11 => "Parallel_1_1",
            Theorem::ParallelFlat12 => "ParallelFlat_1_2",
            Theorem::TotGeod13 => "TotGeod_1_3",
            Theorem::Umbilical14 => "Umbilical_1_4",
            Theorem::None => "None",
        };
        write!(f, "{s}")
    }
}

/// Case label within a theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CaseId {
    P11i,
    P11ii,
    P11iii,
    P12i,
    P12ii,
    P12iii,
    P12iv,
    Tg13i,
    Tg13ii,
    Tg13iii,
    Tg13iv,
    U14i,
    U14ii,
    U14iii,
}

impl CaseId {
    pub fn theorem(&self) -> Theorem {
        use CaseId::*;
        match self {
            P11i | P11ii | P11iii => Theorem::Parallel11,
            P12i | P12ii | P12iii | P12iv => Theorem::ParallelFlat12,
            Tg13i | Tg13ii | Tg13iii | Tg13iv => Theorem::TotGeod13,
            U14i | U14ii | U14iii => Theorem::Umbilical14,
        }
    }

    pub fn roman(&self) -> &'static str {
        use CaseId::*;
        match self {
            P11i | P12i | Tg13i | U14i => "i",
            P11ii | P12ii | Tg13ii | U14ii => "ii",
            P11iii | P12iii | Tg13iii | U14iii => "iii",
            P12iv | Tg13iv => "iv",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} case ({})", self.theorem(), self.roman())
    }
}

/// Decision with the invariants it used.
#[derive(Debug, Clone)]
pub struct ClassificationVerdict {
    pub theorem: Theorem,
    pub case: Option<CaseId>,
    /// Measured invariants the decision rests on.
    pub evidence: BTreeMap<String, f64>,
    /// Margin commentary and structural notes (e.g. which slice side).
    pub notes: Vec<String>,
}

impl ClassificationVerdict {
    fn none(evidence: BTreeMap<String, f64>, note: impl Into<String>) -> Self {
        ClassificationVerdict {
            theorem: Theorem::None,
            case: None,
            evidence,
            notes: vec![note.into()],
        }
    }

    fn case(case: CaseId, evidence: BTreeMap<String, f64>, notes: Vec<String>) -> Self {
        ClassificationVerdict { theorem: case.theorem(), case: Some(case), evidence, notes }
    }
}

/// Grid-wide measurements shared by the detectors.
pub struct GridSample {
    pub contexts: Vec<TensorContext>,
    pub nabla_alpha: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl GridSample {
    pub fn collect(imm: &ImmersionMap, points: &[Vec<f64>], cfg: &DiffConfig) -> Result<Self> {
        let mut contexts = Vec::with_capacity(points.len());
        let mut nabla = Vec::with_capacity(points.len());
        for x in points {
            contexts.push(TensorContext::at(imm, x, cfg)?);
            nabla.push(extrinsic::nabla_alpha_norm(imm, x, cfg)?);
        }
        Ok(GridSample { contexts, nabla_alpha: nabla, points: points.to_vec() })
    }

    pub fn nabla_alpha_max(&self) -> f64 {
        self.nabla_alpha.iter().cloned().fold(0.0, f64::max)
    }

    pub fn s_norm_max(&self) -> f64 {
        self.contexts.iter().map(|c| c.pt.s_norm()).fold(0.0, f64::max)
    }

    pub fn phi_norm_max(&self) -> f64 {
        self.contexts.iter().map(|c| c.pt.phi_norm()).fold(0.0, f64::max)
    }

    pub fn alpha_norm_max(&self) -> f64 {
        self.contexts.iter().map(|c| c.ed.alpha_max_norm()).fold(0.0, f64::max)
    }

    pub fn umbilic_residual_max(&self) -> f64 {
        self.contexts.iter().map(|c| extrinsic::umbilic_residual(&c.ed)).fold(0.0, f64::max)
    }

    fn representative(&self) -> &TensorContext {
        &self.contexts[self.contexts.len() / 2]
    }
}

/// Eigenvalue pattern of R across the grid.
struct RSpectrumShape {
    min: f64,
    max: f64,
    all_zero: bool,
    all_one: bool,
    binary: bool,
    /// Constant multiple of the identity: (lambda, deviation).
    constant_lambda: Option<(f64, f64)>,
    /// Eigenvalues strictly inside (tol, 1-tol), pooled over the grid.
    interior: Vec<f64>,
}

fn r_spectrum_shape(grid: &GridSample, tol: f64) -> RSpectrumShape {
    let mut all: Vec<f64> = Vec::new();
    for ctx in &grid.contexts {
        all.extend(ctx.pt.r_eigenvalues());
    }
    let min = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let all_zero = all.iter().all(|v| v.abs() < tol);
    let all_one = all.iter().all(|v| (v - 1.0).abs() < tol);
    let binary = all.iter().all(|v| v.abs() < tol || (v - 1.0).abs() < tol);
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let spread = all.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let constant_lambda = if spread < tol.max(1e-8) { Some((mean, spread)) } else { None };
    let interior = all.iter().cloned().filter(|v| *v > tol && *v < 1.0 - tol).collect();
    RSpectrumShape { min, max, all_zero, all_one, binary, constant_lambda, interior }
}

/// Canonical ambient orientation for the flat-factor theorems: returns
/// (k_nonflat, swapped) when exactly one factor is flat.
fn flat_side(imm: &ImmersionMap) -> Option<(f64, bool)> {
    let k1 = imm.ambient().k1();
    let k2 = imm.ambient().k2();
    match (k1 == 0.0, k2 == 0.0) {
        (false, true) => Some((k1, false)),
        (true, false) => Some((k2, true)),
        _ => None,
    }
}

/// Decide the parallel classification at the sampled grid.
pub fn detect_parallel_case(
    imm: &ImmersionMap,
    grid: &GridSample,
    tols: &Tolerances,
    cfg: &DiffConfig,
) -> Result<ClassificationVerdict> {
    let mut ev = BTreeMap::new();
    let nmax = grid.nabla_alpha_max();
    ev.insert("nabla_alpha_max".to_string(), nmax);
    if nmax > tols.parallel {
        return Ok(ClassificationVerdict::none(
            ev,
            format!("not parallel on the sampled chart (nabla alpha {nmax:.3e})"),
        ));
    }

    let k1 = imm.ambient().k1();
    let k2 = imm.ambient().k2();
    let s_max = grid.s_norm_max();
    let phi_max = grid.phi_norm_max();
    ev.insert("s_norm_max".to_string(), s_max);
    ev.insert("phi_norm_max".to_string(), phi_max);
    let shape = r_spectrum_shape(grid, tols.rank);
    ev.insert("r_spec_min".to_string(), shape.min);
    ev.insert("r_spec_max".to_string(), shape.max);

    if k1 == 0.0 && k2 == 0.0 {
        return Ok(ClassificationVerdict::none(
            ev,
            "both factors flat: outside the product classification",
        ));
    }

    if let Some((_k, swapped)) = flat_side(imm) {
        // One flat factor: the flat-factor theorem. Internally orient so the
        // nonflat factor is first; R-spectrum statements swap accordingly.
        let mut notes = Vec::new();
        if swapped {
            notes.push("factors swapped internally (flat factor second)".to_string());
        }
        let (zero_means_slice_of_nonflat, one_means_slice_of_nonflat) = (!swapped, swapped);
        if s_max < tols.zero {
            if shape.all_zero || shape.all_one {
                let side_nonflat = (shape.all_zero && zero_means_slice_of_nonflat)
                    || (shape.all_one && one_means_slice_of_nonflat);
                notes.push(if side_nonflat {
                    "slice of the nonflat factor".to_string()
                } else {
                    "slice of the flat factor".to_string()
                });
                return Ok(ClassificationVerdict::case(CaseId::P12i, ev, notes));
            }
            if shape.binary {
                return Ok(ClassificationVerdict::case(CaseId::P12ii, ev, notes));
            }
            return Err(Error::GeometryInconsistency(
                "parallel with S = 0 but R has a non-binary spectrum".to_string(),
            ));
        }
        // S != 0: rank-one structure, then the zeta criterion.
        let fit = rank_one_fit(grid, swapped)?;
        ev.insert("rank1_s_fit".to_string(), fit.s_fit);
        ev.insert("rank1_r_fit".to_string(), fit.r_fit);
        ev.insert("lambda_mean".to_string(), fit.lambda);
        ev.insert("zeta_u_norm_max".to_string(), fit.zeta_norm);
        if fit.s_fit > tols.zero.max(100.0 * tols.rank) {
            return Err(Error::GeometryInconsistency(format!(
                "parallel flat-factor instance without rank-one S (fit {:.3e})",
                fit.s_fit
            )));
        }
        notes.push(format!("B extracted with lambda = {:.6}", fit.lambda));
        if fit.zeta_norm < tols.zero {
            return Ok(ClassificationVerdict::case(CaseId::P12iii, ev, notes));
        }
        return Ok(ClassificationVerdict::case(CaseId::P12iv, ev, notes));
    }

    // Both factors nonflat.
    if s_max < tols.zero {
        let mut notes = Vec::new();
        if shape.all_zero || shape.all_one {
            notes.push(if shape.all_zero {
                "slice of the first factor".to_string()
            } else {
                "slice of the second factor".to_string()
            });
            return Ok(ClassificationVerdict::case(CaseId::P11i, ev, notes));
        }
        if shape.binary {
            return Ok(ClassificationVerdict::case(CaseId::P11ii, ev, notes));
        }
        return Err(Error::GeometryInconsistency(
            "parallel with S = 0 but R has a non-binary spectrum".to_string(),
        ));
    }
    // S != 0 with both curvatures nonzero: Phi must vanish.
    if phi_max > tols.zero {
        return Err(Error::GeometryInconsistency(format!(
            "parallel instance with both S ({s_max:.3e}) and Phi ({phi_max:.3e}) nonzero \
             violates the S/Phi dichotomy"
        )));
    }
    let _ = cfg;
    Ok(ClassificationVerdict::case(
        CaseId::P11iii,
        ev,
        vec!["Phi = 0: composed through the diagonal embedding".to_string()],
    ))
}

struct RankOneFit {
    s_fit: f64,
    r_fit: f64,
    lambda: f64,
    zeta_norm: f64,
}

/// Fit S X = <X, B> SB and (I - R) X = lambda <X, B> B over the grid, and
/// measure zeta = (alpha(B, B))_U. `swapped` mirrors R to I - R when the flat
/// factor comes first in the ambient.
fn rank_one_fit(grid: &GridSample, swapped: bool) -> Result<RankOneFit> {
    let mut s_fit: f64 = 0.0;
    let mut r_fit: f64 = 0.0;
    let mut lambda_acc = 0.0;
    let mut zeta_norm: f64 = 0.0;
    for ctx in &grid.contexts {
        let m = ctx.fp.intrinsic_dim();
        let svd = ctx.pt.s.clone().svd(true, true);
        let vt = svd.v_t.as_ref().expect("V^t");
        let mut b = vt.row(0).transpose();
        // Deterministic sign: first coordinate of magnitude above the noise
        // floor is made positive.
        if let Some(lead) = b.iter().find(|v| v.abs() > 1e-10) {
            if *lead < 0.0 {
                b = -b;
            }
        }
        let sb = &ctx.pt.s * &b;
        let rank1 = &sb * b.transpose();
        s_fit = s_fit.max((&ctx.pt.s - rank1).norm());
        // (I - R) X = lambda <X, B> B, mirrored to R X = lambda <X,B> B when
        // the ambient was swapped.
        let eye = DMatrix::<f64>::identity(m, m);
        let i_minus_r = if swapped { ctx.pt.r.clone() } else { &eye - &ctx.pt.r };
        let lam = (&i_minus_r * &b).dot(&b);
        r_fit = r_fit.max((&i_minus_r - &b * b.transpose() * lam).norm());
        lambda_acc += lam;
        // zeta = component of alpha(B, B) in U = ker T.
        let sb_full = tensors::extract_subbundles(&ctx.pt, 1e-6)?;
        let mut alpha_bb = DVector::zeros(ctx.fp.codim());
        for a in 0..m {
            for c in 0..m {
                alpha_bb += &ctx.ed.alpha[a][c] * (b[a] * b[c]);
            }
        }
        let mut zeta = DVector::zeros(ctx.fp.codim());
        for u in &sb_full.u_basis {
            zeta += u * u.dot(&alpha_bb);
        }
        zeta_norm = zeta_norm.max(zeta.norm());
    }
    Ok(RankOneFit {
        s_fit,
        r_fit,
        lambda: lambda_acc / grid.contexts.len() as f64,
        zeta_norm,
    })
}

/// Decide the totally geodesic classification at the sampled grid.
pub fn detect_totally_geodesic_case(
    imm: &ImmersionMap,
    grid: &GridSample,
    tols: &Tolerances,
) -> Result<ClassificationVerdict> {
    let mut ev = BTreeMap::new();
    let alpha_max = grid.alpha_norm_max();
    ev.insert("alpha_max".to_string(), alpha_max);
    if alpha_max > tols.zero {
        return Ok(ClassificationVerdict::none(
            ev,
            format!("not totally geodesic (|alpha| = {alpha_max:.3e})"),
        ));
    }
    let k1 = imm.ambient().k1();
    let k2 = imm.ambient().k2();
    let shape = r_spectrum_shape(grid, tols.rank);
    ev.insert("r_spec_min".to_string(), shape.min);
    ev.insert("r_spec_max".to_string(), shape.max);

    if shape.all_zero || shape.all_one {
        let note = if shape.all_zero { "slice of the first factor" } else { "slice of the second factor" };
        return Ok(ClassificationVerdict::case(CaseId::Tg13i, ev, vec![note.to_string()]));
    }
    if shape.binary {
        return Ok(ClassificationVerdict::case(CaseId::Tg13ii, ev, Vec::new()));
    }
    if let Some((lambda, spread)) = shape.constant_lambda {
        ev.insert("lambda".to_string(), lambda);
        ev.insert("lambda_spread".to_string(), spread);
        if k1 * k2 > 0.0 {
            let expected = k1 / (k1 + k2);
            ev.insert("lambda_expected".to_string(), expected);
            if (lambda - expected).abs() < 1e-5 {
                return Ok(ClassificationVerdict::case(
                    CaseId::Tg13iii,
                    ev,
                    vec!["diagonal embedding factor".to_string()],
                ));
            }
        }
        if flat_side(imm).is_some() && grid.contexts[0].fp.intrinsic_dim() == 1 {
            return Ok(ClassificationVerdict::case(CaseId::Tg13iv, ev, Vec::new()));
        }
        return Ok(ClassificationVerdict::none(
            ev,
            format!("R = {lambda:.6} I matches no totally geodesic family here"),
        ));
    }
    // Mixed spectrum with interior values: geodesic-line case over a flat factor.
    if flat_side(imm).is_some() && shape.interior.len() == grid.contexts.len() {
        // Exactly one interior eigenvalue per sampled point, rest binary.
        ev.insert("interior_lambda".to_string(), shape.interior[0]);
        return Ok(ClassificationVerdict::case(
            CaseId::Tg13iv,
            ev,
            vec!["one geodesic direction crossing the factors".to_string()],
        ));
    }
    Ok(ClassificationVerdict::none(ev, "R spectrum matches no totally geodesic case"))
}

/// Decide the umbilical classification (m >= 3, k1 + k2 != 0).
pub fn detect_umbilical_case(
    imm: &ImmersionMap,
    grid: &GridSample,
    tols: &Tolerances,
) -> Result<ClassificationVerdict> {
    let mut ev = BTreeMap::new();
    let m = grid.contexts[0].fp.intrinsic_dim();
    let k1 = imm.ambient().k1();
    let k2 = imm.ambient().k2();
    let umb = grid.umbilic_residual_max();
    ev.insert("umbilic_residual_max".to_string(), umb);
    if m < 3 {
        return Ok(ClassificationVerdict::none(ev, format!("m = {m} < 3: theorem not applicable")));
    }
    if k1 + k2 == 0.0 {
        return Ok(ClassificationVerdict::none(ev, "k1 + k2 = 0 excluded by hypothesis"));
    }
    if umb > tols.umbilic {
        return Ok(ClassificationVerdict::none(
            ev,
            format!("not umbilical on the sampled chart (residual {umb:.3e})"),
        ));
    }
    let alpha_max = grid.alpha_norm_max();
    ev.insert("alpha_max".to_string(), alpha_max);
    if alpha_max < tols.zero {
        return Ok(ClassificationVerdict::none(
            ev,
            "totally geodesic: see the totally geodesic classification",
        ));
    }

    // dim ker S pointwise.
    let mut dims = Vec::new();
    for ctx in &grid.contexts {
        let sb = tensors::extract_subbundles(&ctx.pt, tols.rank)?;
        dims.push(m - sb.rank_s_strict);
    }
    let dim0 = dims[0];
    ev.insert("dim_ker_s".to_string(), dim0 as f64);
    if dims.iter().any(|d| *d != dim0) {
        return Ok(ClassificationVerdict::none(
            ev,
            "dim ker S unstable across the grid: indeterminate",
        ));
    }
    if dim0 == m {
        return Ok(ClassificationVerdict::case(
            CaseId::U14i,
            ev,
            vec!["S = 0: umbilical immersion into a slice".to_string()],
        ));
    }
    if dim0 == 0 {
        let shape = r_spectrum_shape(grid, tols.rank);
        if let Some((lambda, spread)) = shape.constant_lambda {
            ev.insert("lambda".to_string(), lambda);
            ev.insert("lambda_spread".to_string(), spread);
            ev.insert("theta_from_lambda".to_string(), lambda.sqrt().asin());
            return Ok(ClassificationVerdict::case(
                CaseId::U14ii,
                ev,
                vec![format!("R = {lambda:.6} I: weighted sum structure")],
            ));
        }
        return Ok(ClassificationVerdict::none(
            ev,
            "ker S = 0 but R is not a constant multiple of I",
        ));
    }
    if dim0 != m - 1 {
        return Err(Error::GeometryInconsistency(format!(
            "umbilical instance with dim ker S = {dim0} strictly between 0 and m-1 = {}",
            m - 1
        )));
    }
    // Which kernel: ker S = ker R or ker(I - R)?
    let mut ker_r_residual: f64 = 0.0;
    let mut ker_ir_residual: f64 = 0.0;
    for ctx in &grid.contexts {
        let sb = tensors::extract_subbundles(&ctx.pt, tols.rank)?;
        for v in &sb.ker_s {
            ker_r_residual = ker_r_residual.max((&ctx.pt.r * v).norm());
            let eye = DMatrix::<f64>::identity(m, m);
            ker_ir_residual = ker_ir_residual.max(((eye - &ctx.pt.r) * v).norm());
        }
    }
    ev.insert("ker_s_vs_ker_r".to_string(), ker_r_residual);
    ev.insert("ker_s_vs_ker_i_minus_r".to_string(), ker_ir_residual);
    let which = if ker_r_residual <= ker_ir_residual { "ker S = ker R" } else { "ker S = ker(I - R)" };
    Ok(ClassificationVerdict::case(
        CaseId::U14iii,
        ev,
        vec![format!("rank-one S with {which} on the sampled chart")],
    ))
}

/// Run the three detectors in order and report the first conclusive verdict.
pub fn classify(
    imm: &ImmersionMap,
    grid: &GridSample,
    tols: &Tolerances,
    cfg: &DiffConfig,
) -> Result<ClassificationVerdict> {
    let tg = detect_totally_geodesic_case(imm, grid, tols)?;
    if tg.theorem != Theorem::None {
        return Ok(tg);
    }
    let par = detect_parallel_case(imm, grid, tols, cfg)?;
    if par.theorem != Theorem::None {
        return Ok(par);
    }
    let umb = detect_umbilical_case(imm, grid, tols)?;
    if umb.theorem != Theorem::None {
        return Ok(umb);
    }
    let mut ev = tg.evidence;
    ev.extend(par.evidence);
    ev.extend(umb.evidence);
    Ok(ClassificationVerdict::none(ev, "no classification case matched at the tolerances"))
}

/// Reduction side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

/// Outcome of the reduction-of-codimension detectors on one side.
#[derive(Debug, Clone)]
pub struct ReductionVerdict {
    pub side: Side,
    /// Rank the immersion reduces by (0 when the witness is not parallel).
    pub reducible_by: usize,
    /// Rank of the candidate subbundle U cap N_1^perp (or V for right).
    pub witness_rank: usize,
    /// Direct normal-connection parallelism residual of the candidate.
    pub parallel_residual: f64,
    /// Residual of nabla^perp(U cap N_1^perp) subset N_1^perp.
    pub containment_residual: f64,
    /// Residual of nabla^perp R^perp restricted to the candidate.
    pub curvature_residual: f64,
    /// Residual of nabla^perp(U cap N_1^perp) subset {H}^perp.
    pub mean_curvature_residual: f64,
    /// Whether the equivalent routes agreed at the tolerance.
    pub routes_agree: bool,
    pub criteria_used: Vec<String>,
    /// The Phi = 0 diagonal-reduction path, when it applies.
    pub diagonal: Option<DiagonalReduction>,
    pub notes: Vec<String>,
}

/// The diagonal (Phi = 0) reduction data: N_1 as the witness subbundle.
#[derive(Debug, Clone)]
pub struct DiagonalReduction {
    pub rank_n1: usize,
    pub n1_parallel_residual: f64,
    /// max |<(T - b^2 I) n_i, n_j>| over the N_1 basis.
    pub t_shift_residual: f64,
    /// Gram defect of pi_2 restricted to N_1 against ratio b.
    pub similarity_defect: f64,
    pub applies: bool,
}

/// Projector data for a smooth candidate subbundle at one chart point.
struct CandidateBundle {
    /// Ambient orthonormal basis.
    basis: Vec<AmbientVector>,
}

/// Build U cap N_1^perp (or V cap N_1^perp) at a chart point, ambient basis.
fn candidate_at(
    imm: &ImmersionMap,
    y: &[f64],
    side: Side,
    rank_tol: f64,
    cfg: &DiffConfig,
) -> Result<CandidateBundle> {
    let fp = imm.frame_at(y, cfg)?;
    let pt = tensors::compute_tensors(imm.ambient(), &fp)?;
    let ed = extrinsic::second_fundamental_form(imm, &fp, cfg)?;
    let sb = tensors::extract_subbundles(&pt, rank_tol)?;
    let codim = fp.codim();
    let chosen = match side {
        Side::Left => &sb.u_basis,
        Side::Right => &sb.v_basis,
    };
    // Intersect with N_1^perp inside the chosen eigenspace: combinations of
    // the eigenbasis annihilated by every inner product with N_1.
    let kept: Vec<DVector<f64>> = if chosen.is_empty() {
        Vec::new()
    } else if ed.first_normal_basis.is_empty() {
        chosen.clone()
    } else {
        let pairing = DMatrix::from_fn(ed.first_normal_basis.len(), chosen.len(), |r, c| {
            ed.first_normal_basis[r].dot(&chosen[c])
        });
        // Entries are pairings of unit vectors: cut at an absolute cosine.
        linalg::nullspace_with_floor(&pairing, 1e-7, 1.0)
            .into_iter()
            .map(|w| {
                let mut v = DVector::zeros(codim);
                for (j, u) in chosen.iter().enumerate() {
                    v += u * w[j];
                }
                v
            })
            .collect()
    };
    let kept = linalg::gram_schmidt(&kept, |a, b| a.dot(b), true)?;
    let mut basis = Vec::new();
    for v in kept {
        let mut amb_vec = AmbientVector::zeros(imm.ambient().flat_dim());
        for r in 0..codim {
            amb_vec += &fp.normal_frame[r] * v[r];
        }
        basis.push(amb_vec);
    }
    Ok(CandidateBundle { basis })
}

/// Ambient projector onto the span of spacelike orthonormal vectors.
fn span_projector(basis: &[AmbientVector], signs: &[f64], nf: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(nf, nf);
    for v in basis {
        for r in 0..nf {
            for c in 0..nf {
                p[(r, c)] += v[r] * v[c] * signs[c];
            }
        }
    }
    p
}

/// Run the reduction detectors on one side.
pub fn detect_codim_reduction(
    imm: &ImmersionMap,
    grid: &GridSample,
    side: Side,
    tols: &Tolerances,
    cfg: &DiffConfig,
) -> Result<ReductionVerdict> {
    let amb = imm.ambient();
    let nf = amb.flat_dim();
    let signs = amb.sign_table().to_vec();
    let base_ctx = grid.representative();
    let x0 = base_ctx.fp.chart.clone();

    // Rank stability across the grid.
    let mut ranks = Vec::new();
    for p in &grid.points {
        ranks.push(candidate_at(imm, p, side, tols.rank, cfg)?.basis.len());
    }
    let witness_rank = ranks[grid.points.len() / 2];
    let mut notes = Vec::new();
    if ranks.iter().any(|r| *r != witness_rank) {
        return Ok(ReductionVerdict {
            side,
            reducible_by: 0,
            witness_rank,
            parallel_residual: f64::NAN,
            containment_residual: f64::NAN,
            curvature_residual: f64::NAN,
            mean_curvature_residual: f64::NAN,
            routes_agree: false,
            criteria_used: vec!["rank-stability".to_string()],
            diagonal: diagonal_reduction(imm, grid, tols, cfg)?,
            notes: vec![format!("candidate rank unstable across the grid: {ranks:?}")],
        });
    }
    if witness_rank == 0 {
        return Ok(ReductionVerdict {
            side,
            reducible_by: 0,
            witness_rank: 0,
            parallel_residual: 0.0,
            containment_residual: 0.0,
            curvature_residual: 0.0,
            mean_curvature_residual: 0.0,
            routes_agree: true,
            criteria_used: vec!["Thm_4_2".to_string()],
            diagonal: diagonal_reduction(imm, grid, tols, cfg)?,
            notes: vec!["candidate subbundle is trivial".to_string()],
        });
    }

    let base = candidate_at(imm, &x0, side, tols.rank, cfg)?;
    let m = base_ctx.fp.intrinsic_dim();
    let fp0 = &base_ctx.fp;

    // Smooth sections via the per-point candidate projector.
    let base_basis = base.basis.clone();
    let section_field = |y: &[f64]| -> DVector<f64> {
        let cand = candidate_at(imm, y, side, tols.rank, cfg).expect("candidate inside stencil");
        let p = span_projector(&cand.basis, &signs, nf);
        let mut out = DVector::zeros(base_basis.len() * nf);
        for (j, l0) in base_basis.iter().enumerate() {
            out.rows_mut(j * nf, nf).copy_from(&(&p * l0));
        }
        out
    };
    let dsec: Vec<DVector<f64>> =
        (0..m).map(|k| diff1(&section_field, &x0, k, cfg.fd_step, cfg.fd_order)).collect();
    let pn0 = imm.normal_projector(&x0, cfg)?;
    let p_l0 = span_projector(&base.basis, &signs, nf);
    let ed0 = &base_ctx.ed;
    let p_n1 = {
        let mut basis_amb = Vec::new();
        for n in &ed0.first_normal_basis {
            let mut v = AmbientVector::zeros(nf);
            for r in 0..fp0.codim() {
                v += &fp0.normal_frame[r] * n[r];
            }
            basis_amb.push(v);
        }
        span_projector(&basis_amb, &signs, nf)
    };
    let h_ambient = {
        let mut v = AmbientVector::zeros(nf);
        for r in 0..fp0.codim() {
            v += &fp0.normal_frame[r] * ed0.mean_curvature[r];
        }
        v
    };

    let mut parallel_residual: f64 = 0.0;
    let mut containment_residual: f64 = 0.0;
    let mut mean_curvature_residual: f64 = 0.0;
    let mut nperp_sections: Vec<Vec<AmbientVector>> = Vec::new();
    for a in 0..m {
        let mut per_dir = Vec::new();
        for j in 0..base.basis.len() {
            let mut d = AmbientVector::zeros(nf);
            for k in 0..m {
                let w = fp0.frame_coeffs[(k, a)];
                if w != 0.0 {
                    d += dsec[k].rows(j * nf, nf) * w;
                }
            }
            let nperp = &pn0 * d;
            parallel_residual = parallel_residual.max((&nperp - &p_l0 * &nperp).norm());
            containment_residual = containment_residual.max((&p_n1 * &nperp).norm());
            mean_curvature_residual =
                mean_curvature_residual.max(amb.flat_inner_unchecked(&nperp, &h_ambient).abs());
            per_dir.push(nperp);
        }
        nperp_sections.push(per_dir);
    }

    // Independent route: nabla^perp R^perp restricted to the candidate.
    let curvature_residual =
        nabla_rperp_on_bundle(imm, base_ctx, &base.basis, &nperp_sections, cfg)?;

    let passes_parallel = parallel_residual < tols.reduction;
    let passes_cor43 = containment_residual < tols.reduction;
    let passes_thm44 =
        curvature_residual < tols.reduction && mean_curvature_residual < tols.reduction;
    let routes_agree = passes_cor43 == passes_thm44 && (!passes_cor43 || passes_parallel);
    if !routes_agree {
        notes.push(format!(
            "route disagreement: parallel {parallel_residual:.3e}, containment \
             {containment_residual:.3e}, curvature {curvature_residual:.3e}, \
             mean-curvature {mean_curvature_residual:.3e}"
        ));
    }
    let reducible_by = if passes_parallel { witness_rank } else { 0 };
    Ok(ReductionVerdict {
        side,
        reducible_by,
        witness_rank,
        parallel_residual,
        containment_residual,
        curvature_residual,
        mean_curvature_residual,
        routes_agree,
        criteria_used: vec![
            "Thm_4_2".to_string(),
            "Cor_4_3".to_string(),
            "Thm_4_4".to_string(),
        ],
        diagonal: diagonal_reduction(imm, grid, tols, cfg)?,
        notes,
    })
}

/// (nabla^perp R^perp)(E_a, E_b) xi over the candidate bundle, max residual.
fn nabla_rperp_on_bundle(
    imm: &ImmersionMap,
    ctx: &TensorContext,
    bundle: &[AmbientVector],
    nperp_sections: &[Vec<AmbientVector>],
    cfg: &DiffConfig,
) -> Result<f64> {
    let m = ctx.fp.intrinsic_dim();
    let q = ctx.fp.codim();
    let amb = imm.ambient();
    let x0 = ctx.fp.chart.clone();
    if q == 0 || bundle.is_empty() || m < 2 {
        return Ok(0.0);
    }
    let gauge = NormalGauge::new(imm, &ctx.fp.normal_frame, cfg);

    // Components of the bundle sections in the gauge, and Omega, as fields.
    let field = |y: &[f64]| -> DVector<f64> {
        let omega = gauge.curvature_at(y);
        let fields = gauge.fields_at(y);
        let mut out = DVector::zeros(m * m * q * q + bundle.len() * q);
        for k in 0..m {
            for l in 0..m {
                for r in 0..q {
                    for s in 0..q {
                        out[((k * m + l) * q + r) * q + s] = omega[k][l][(r, s)];
                    }
                }
            }
        }
        let off = m * m * q * q;
        for (j, b) in bundle.iter().enumerate() {
            // Projection-extension of the section in gauge components: the
            // candidate projector is expensive; the normal projection of the
            // fixed vector has the same derivative inside N-perp terms.
            for r in 0..q {
                out[off + j * q + r] = amb.flat_inner_unchecked(b, &fields[r]);
            }
        }
        out
    };
    // Third-derivative territory: coarse step, second-order stencil.
    let step = cfg.nested_step() * 10.0;
    let dfield: Vec<DVector<f64>> = (0..m).map(|k| diff1(&field, &x0, k, step, 2)).collect();

    let f0 = field(&x0);
    let omega0 = |k: usize, l: usize| {
        DMatrix::from_fn(q, q, |r, s| f0[((k * m + l) * q + r) * q + s])
    };
    let omega_k = gauge.omega_at(&x0);
    let c = &ctx.fp.frame_coeffs;
    let gamma = &ctx.fp.christoffels;

    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for (j, xi0) in bundle.iter().enumerate() {
                let xi_comps = DVector::from_fn(q, |r, _| {
                    amb.flat_inner_unchecked(xi0, &ctx.fp.normal_frame[r])
                });
                for cdir in 0..m {
                    // d/d e_c of [Omega(E_a, E_b) xi~] in gauge components.
                    let mut dval = DVector::zeros(q);
                    for k in 0..m {
                        let w = c[(k, cdir)];
                        if w == 0.0 {
                            continue;
                        }
                        let df = &dfield[k];
                        // product rule: dOmega * xi + Omega * dxi
                        for kk in 0..m {
                            for ll in 0..m {
                                let wab = c[(kk, a)] * c[(ll, b)];
                                if wab == 0.0 {
                                    continue;
                                }
                                for r in 0..q {
                                    let mut acc = 0.0;
                                    for s in 0..q {
                                        acc += df[((kk * m + ll) * q + r) * q + s]
                                            * xi_comps[s]
                                            + f0[((kk * m + ll) * q + r) * q + s]
                                                * df[m * m * q * q + j * q + s];
                                    }
                                    dval[r] += w * wab * acc;
                                }
                            }
                        }
                    }
                    // Gauge correction omega_c applied to the value.
                    let mut omega_c = DMatrix::zeros(q, q);
                    for k in 0..m {
                        let w = c[(k, cdir)];
                        if w != 0.0 {
                            omega_c += &omega_k[k] * w;
                        }
                    }
                    let mut val0 = DVector::zeros(q);
                    for kk in 0..m {
                        for ll in 0..m {
                            let wab = c[(kk, a)] * c[(ll, b)];
                            if wab != 0.0 {
                                val0 += omega0(kk, ll) * &xi_comps * wab;
                            }
                        }
                    }
                    let mut total = dval + &omega_c * val0;
                    // Subtract R^perp(nabla_c E_a, e_b) xi and (a <-> b).
                    let ga = frame_gamma(c, gamma, cdir, a, m);
                    let gb = frame_gamma(c, gamma, cdir, b, m);
                    for kk in 0..m {
                        for ll in 0..m {
                            let w1 = ga[kk] * c[(ll, b)];
                            let w2 = c[(kk, a)] * gb[ll];
                            if w1 != 0.0 || w2 != 0.0 {
                                total -= omega0(kk, ll) * &xi_comps * (w1 + w2);
                            }
                        }
                    }
                    // Subtract R^perp(e_a, e_b) nabla^perp_c xi.
                    let nperp = &nperp_sections[cdir][j];
                    let nperp_comps = DVector::from_fn(q, |r, _| {
                        amb.flat_inner_unchecked(nperp, &ctx.fp.normal_frame[r])
                    });
                    for kk in 0..m {
                        for ll in 0..m {
                            let wab = c[(kk, a)] * c[(ll, b)];
                            if wab != 0.0 {
                                total -= omega0(kk, ll) * &nperp_comps * wab;
                            }
                        }
                    }
                    worst = worst.max(total.norm());
                }
            }
        }
    }
    Ok(worst)
}

/// Chart components of nabla_{e_c} E_a for chart-constant frame extensions.
fn frame_gamma(
    coeffs: &DMatrix<f64>,
    gamma: &[DVector<f64>],
    cdir: usize,
    a: usize,
    m: usize,
) -> DVector<f64> {
    let mut out = DVector::zeros(m);
    for k in 0..m {
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                acc += coeffs[(i, cdir)] * coeffs[(j, a)] * gamma[k][i * m + j];
            }
        }
        out[k] = acc;
    }
    out
}

/// The Phi = 0 diagonal-reduction route (with N_1 as the witness subbundle),
/// when Phi vanishes at the sampled tolerance.
fn diagonal_reduction(
    imm: &ImmersionMap,
    grid: &GridSample,
    tols: &Tolerances,
    cfg: &DiffConfig,
) -> Result<Option<DiagonalReduction>> {
    let phi_max = grid.phi_norm_max();
    if phi_max > tols.zero * 100.0 {
        return Ok(None);
    }
    let k1 = imm.ambient().k1();
    let k2 = imm.ambient().k2();
    if k1 * k2 <= 0.0 {
        return Ok(None);
    }
    let b2 = k1 / (k1 + k2);
    let amb = imm.ambient();
    let nf = amb.flat_dim();
    let signs = amb.sign_table().to_vec();
    let ctx = grid.representative();
    let fp0 = &ctx.fp;
    let x0 = fp0.chart.clone();
    let m = fp0.intrinsic_dim();
    let codim = fp0.codim();
    let rank_n1 = ctx.ed.first_normal_rank;
    if rank_n1 == 0 {
        return Ok(Some(DiagonalReduction {
            rank_n1: 0,
            n1_parallel_residual: 0.0,
            t_shift_residual: 0.0,
            similarity_defect: 0.0,
            applies: true,
        }));
    }
    // Ambient basis of N_1 at the base point.
    let n1_basis: Vec<AmbientVector> = ctx
        .ed
        .first_normal_basis
        .iter()
        .map(|n| {
            let mut v = AmbientVector::zeros(nf);
            for r in 0..codim {
                v += &fp0.normal_frame[r] * n[r];
            }
            v
        })
        .collect();
    // (T - b^2 I) N_1 orthogonal to N_1, and the similarity check.
    let mut t_shift: f64 = 0.0;
    let mut similarity: f64 = 0.0;
    for (i, ni) in n1_basis.iter().enumerate() {
        let tni_minus = {
            let pn = imm.normal_projector(&x0, cfg)?;
            &pn * amb.block2(ni) - ni * b2
        };
        for nj in n1_basis.iter() {
            t_shift = t_shift.max(amb.flat_inner_unchecked(&tni_minus, nj).abs());
        }
        for (j, nj) in n1_basis.iter().enumerate() {
            let gram = amb.flat_inner_unchecked(&amb.block2(ni), &amb.block2(nj));
            let expect = if i == j { b2 } else { 0.0 };
            similarity = similarity.max((gram - expect).abs());
        }
    }
    // Parallelism of N_1 via projection-extended sections.
    let n1_field = |y: &[f64]| -> DVector<f64> {
        let fp = imm.frame_at(y, cfg).expect("frame inside stencil");
        let ed = extrinsic::second_fundamental_form(imm, &fp, cfg).expect("alpha inside stencil");
        let mut basis_amb = Vec::new();
        for n in &ed.first_normal_basis {
            let mut v = AmbientVector::zeros(nf);
            for r in 0..fp.codim() {
                v += &fp.normal_frame[r] * n[r];
            }
            basis_amb.push(v);
        }
        let p = span_projector(&basis_amb, &signs, nf);
        let mut out = DVector::zeros(n1_basis.len() * nf);
        for (j, n0) in n1_basis.iter().enumerate() {
            out.rows_mut(j * nf, nf).copy_from(&(&p * n0));
        }
        out
    };
    let dn1: Vec<DVector<f64>> =
        (0..m).map(|k| diff1(&n1_field, &x0, k, cfg.fd_step, cfg.fd_order)).collect();
    let pn0 = imm.normal_projector(&x0, cfg)?;
    let p_n1 = span_projector(&n1_basis, &signs, nf);
    let mut n1_parallel: f64 = 0.0;
    for a in 0..m {
        for j in 0..n1_basis.len() {
            let mut d = AmbientVector::zeros(nf);
            for k in 0..m {
                let w = fp0.frame_coeffs[(k, a)];
                if w != 0.0 {
                    d += dn1[k].rows(j * nf, nf) * w;
                }
            }
            let nperp = &pn0 * d;
            n1_parallel = n1_parallel.max((&nperp - &p_n1 * &nperp).norm());
        }
    }
    let applies = n1_parallel < tols.reduction && t_shift < tols.reduction;
    Ok(Some(DiagonalReduction {
        rank_n1,
        n1_parallel_residual: n1_parallel,
        t_shift_residual: t_shift,
        similarity_defect: similarity,
        applies,
    }))
}
