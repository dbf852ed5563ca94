//! Analytic constructors for the example families: slices, extrinsic
//! products, the diagonal totally geodesic embedding, weighted sums,
//! extrinsic-circle products, totally geodesic compositions, an umbilical
//! rotation-invariant family, and a seeded generic graph used as a negative
//! control. Each instance carries its expected invariants.
//!
//! Every chart map is generic over the jet scalar, so exact Jacobians and
//! Hessians are available everywhere, including the two ODE-defined families
//! (which integrate with a fixed step count so the evaluator stays smooth in
//! the chart variable).

use crate::ambient::ProductAmbient;
use crate::classifier::CaseId;
use crate::error::{Error, Result};
use crate::immersion::{ChartBox, ChartMap, DiffConfig, ImmersionMap};
use crate::jet::Scalar;
use crate::util::SplitMix64;
use crate::impl_chart_map;
use nalgebra::DVector;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Family labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum GalleryLabel {
    Slice,
    ExtrinsicProduct,
    DiagonalGeodesic,
    WeightedSum,
    ExtrinsicCircleProduct,
    TotallyGeodesicComposition,
    UmbilicalProfile,
    GenericGraph,
}

impl std::fmt::Display for GalleryLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GalleryLabel::Slice => "Slice",
            GalleryLabel::ExtrinsicProduct => "ExtrinsicProduct",
            GalleryLabel::DiagonalGeodesic => "DiagonalGeodesic",
            GalleryLabel::WeightedSum => "WeightedSum",
            GalleryLabel::ExtrinsicCircleProduct => "ExtrinsicCircleProduct",
            GalleryLabel::TotallyGeodesicComposition => "TotallyGeodesicComposition",
            GalleryLabel::UmbilicalProfile => "UmbilicalProfile",
            GalleryLabel::GenericGraph => "GenericGraph",
        };
        write!(f, "{s}")
    }
}

/// Predicted invariants of an instance; `None` means "not pinned".
#[derive(Debug, Clone, Default)]
pub struct Expected {
    /// Sorted eigenvalues of R when constant over the chart.
    pub r_spectrum: Option<Vec<f64>>,
    pub rank_s: Option<usize>,
    pub parallel: Option<bool>,
    pub totally_geodesic: Option<bool>,
    pub umbilic: Option<bool>,
    /// Expected verdict of the combined classifier.
    pub case: Option<CaseId>,
    /// Expected verdict of the umbilical detector alone (parallel umbilical
    /// instances land in the parallel taxonomy first).
    pub umbilical_case: Option<CaseId>,
    /// The instance maps into Q_k^n x R^1 and should satisfy the
    /// R X = <X,Z> Z, S X = <X,Z> eta, T xi = <xi,eta> eta structure.
    pub q_cross_line_structure: bool,
}

/// One constructed example with ground-truth metadata.
#[derive(Clone)]
pub struct GalleryInstance {
    pub label: GalleryLabel,
    pub name: String,
    pub immersion: ImmersionMap,
    pub expected: Expected,
    pub params: BTreeMap<String, f64>,
}

impl GalleryInstance {
    /// Sample grid respecting differentiation margins.
    pub fn grid(&self, per_axis: usize, cfg: &DiffConfig) -> Vec<Vec<f64>> {
        let margin = 0.1 + 200.0 * cfg.fd_step;
        self.immersion.domain().grid(per_axis, margin, 625)
    }
}

// ---------------------------------------------------------------------------
// Chart building blocks
// ---------------------------------------------------------------------------

/// Unit hypersphere point from iterated angles: n angles -> n + 1 coordinates.
fn unit_sphere<S: Scalar>(angles: &[S]) -> Vec<S> {
    let mut out = vec![S::constant(1.0)];
    for a in angles {
        let c = a.cos();
        let s = a.sin();
        for v in out.iter_mut() {
            *v = *v * c;
        }
        out.push(s);
    }
    out
}

/// Round sphere of given radius inside one factor (optionally padded).
#[derive(Clone)]
struct SphereChart {
    n: usize,
    radius: f64,
    pad_after: usize,
}

impl SphereChart {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.n + 1 + self.pad_after
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let r = S::constant(self.radius);
        let mut out: Vec<S> = unit_sphere(x).into_iter().map(|v| v * r).collect();
        out.extend((0..self.pad_after).map(|_| S::constant(0.0)));
        out
    }
}
impl_chart_map!(SphereChart);

/// Small sphere: the slice {first coord = h} of a sphere of radius `big_r`,
/// of extrinsic radius rho, traced by unit-sphere angles.
#[derive(Clone)]
struct SmallSphereChart {
    n: usize,
    big_r: f64,
    rho: f64,
    pad_after: usize,
}

impl SmallSphereChart {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.n + 2 + self.pad_after
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let h = S::constant((self.big_r * self.big_r - self.rho * self.rho).sqrt());
        let rho = S::constant(self.rho);
        let mut out = vec![h];
        out.extend(unit_sphere(x).into_iter().map(|v| v * rho));
        out.extend((0..self.pad_after).map(|_| S::constant(0.0)));
        out
    }
}
impl_chart_map!(SmallSphereChart);

/// Graph chart of the hyperboloid sheet <x,x> = 1/k, k < 0.
#[derive(Clone)]
struct HyperbolicChart {
    n: usize,
    r2: f64, // r^2 = -1/k
}

impl HyperbolicChart {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.n + 1
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut s2 = S::constant(self.r2);
        for u in x {
            s2 = s2 + *u * *u;
        }
        let mut out = vec![s2.sqrt()];
        out.extend_from_slice(x);
        out
    }
}
impl_chart_map!(HyperbolicChart);

/// Circle of latitude z in a unit 2-sphere (padded), chart = angle.
#[derive(Clone)]
struct LatitudeCircleChart {
    z: f64,
    pad_after: usize,
}

impl LatitudeCircleChart {
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        3 + self.pad_after
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let r = S::constant((1.0 - self.z * self.z).sqrt());
        let mut out = vec![r * x[0].cos(), r * x[0].sin(), S::constant(self.z)];
        out.extend((0..self.pad_after).map(|_| S::constant(0.0)));
        out
    }
}
impl_chart_map!(LatitudeCircleChart);

/// Identity chart of a flat factor with optional padding.
#[derive(Clone)]
struct FlatIdentityChart {
    n: usize,
    pad_after: usize,
}

impl FlatIdentityChart {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.n + self.pad_after
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut out = x.to_vec();
        out.extend((0..self.pad_after).map(|_| S::constant(0.0)));
        out
    }
}
impl_chart_map!(FlatIdentityChart);

/// Plane curve (t, a t^2) in R^2: an immersion that is not parallel.
#[derive(Clone)]
struct ParabolaChart {
    a: f64,
}

impl ParabolaChart {
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        vec![x[0], S::constant(self.a) * x[0] * x[0]]
    }
}
impl_chart_map!(ParabolaChart);

/// Constant block (a point factor); chart dimension zero.
#[derive(Clone)]
struct ConstantChart {
    values: Vec<f64>,
}

impl ConstantChart {
    fn dim_in(&self) -> usize {
        0
    }
    fn dim_out(&self) -> usize {
        self.values.len()
    }
    fn eval<S: Scalar>(&self, _x: &[S]) -> Vec<S> {
        self.values.iter().map(|v| S::constant(*v)).collect()
    }
}
impl_chart_map!(ConstantChart);

/// Latitude helix (r cos wt, r sin wt, z0; v t) in Q^2_{k1} x R.
#[derive(Clone)]
struct LatitudeHelixChart {
    r: f64,
    z0: f64,
    omega: f64,
    v: f64,
}

impl LatitudeHelixChart {
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        4
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let w = S::constant(self.omega) * x[0];
        vec![
            S::constant(self.r) * w.cos(),
            S::constant(self.r) * w.sin(),
            S::constant(self.z0),
            S::constant(self.v) * x[0],
        ]
    }
}
impl_chart_map!(LatitudeHelixChart);

// ---------------------------------------------------------------------------
// Combinators
// ---------------------------------------------------------------------------

/// Product chart: the chart splits across the parts, outputs concatenate.
struct BlockChart {
    parts: Vec<Arc<dyn ChartMap>>,
}

impl BlockChart {
    fn apply<S: Scalar>(
        &self,
        x: &[S],
        eval: impl Fn(&dyn ChartMap, &[S]) -> Vec<S>,
    ) -> Vec<S> {
        let mut out = Vec::new();
        let mut off = 0;
        for p in &self.parts {
            let d = p.dim_in();
            out.extend(eval(p.as_ref(), &x[off..off + d]));
            off += d;
        }
        out
    }
}

impl ChartMap for BlockChart {
    fn dim_in(&self) -> usize {
        self.parts.iter().map(|p| p.dim_in()).sum()
    }
    fn dim_out(&self) -> usize {
        self.parts.iter().map(|p| p.dim_out()).sum()
    }
    fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x, |p, y| p.eval_f64(y))
    }
    fn eval_jet1(&self, x: &[crate::jet::Jet1]) -> Vec<crate::jet::Jet1> {
        self.apply(x, |p, y| p.eval_jet1(y))
    }
    fn eval_jet2(&self, x: &[crate::jet::Jet2]) -> Vec<crate::jet::Jet2> {
        self.apply(x, |p, y| p.eval_jet2(y))
    }
}

/// Weighted pair (a f1(x), b f2(x)) over one shared chart.
struct WeightedPairChart {
    f1: Arc<dyn ChartMap>,
    f2: Arc<dyn ChartMap>,
    a: f64,
    b: f64,
}

impl WeightedPairChart {
    fn apply<S: Scalar>(
        &self,
        x: &[S],
        eval: impl Fn(&dyn ChartMap, &[S]) -> Vec<S>,
    ) -> Vec<S> {
        let mut out: Vec<S> =
            eval(self.f1.as_ref(), x).into_iter().map(|v| v * S::constant(self.a)).collect();
        out.extend(eval(self.f2.as_ref(), x).into_iter().map(|v| v * S::constant(self.b)));
        out
    }
}

impl ChartMap for WeightedPairChart {
    fn dim_in(&self) -> usize {
        self.f1.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.f1.dim_out() + self.f2.dim_out()
    }
    fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x, |p, y| p.eval_f64(y))
    }
    fn eval_jet1(&self, x: &[crate::jet::Jet1]) -> Vec<crate::jet::Jet1> {
        self.apply(x, |p, y| p.eval_jet1(y))
    }
    fn eval_jet2(&self, x: &[crate::jet::Jet2]) -> Vec<crate::jet::Jet2> {
        self.apply(x, |p, y| p.eval_jet2(y))
    }
}

/// Totally geodesic block inclusion: zero-pad each factor block at its end.
/// Time coordinates sit first in their blocks, so signatures are preserved.
struct BlockInclusionChart {
    inner: Arc<dyn ChartMap>,
    split: usize, // flat dimension of the inner first factor
    pad1: usize,
    pad2: usize,
}

impl BlockInclusionChart {
    fn apply<S: Scalar>(
        &self,
        x: &[S],
        eval: impl Fn(&dyn ChartMap, &[S]) -> Vec<S>,
    ) -> Vec<S> {
        let inner = eval(self.inner.as_ref(), x);
        let mut out = Vec::with_capacity(inner.len() + self.pad1 + self.pad2);
        out.extend_from_slice(&inner[..self.split]);
        out.extend((0..self.pad1).map(|_| S::constant(0.0)));
        out.extend_from_slice(&inner[self.split..]);
        out.extend((0..self.pad2).map(|_| S::constant(0.0)));
        out
    }
}

impl ChartMap for BlockInclusionChart {
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.inner.dim_out() + self.pad1 + self.pad2
    }
    fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x, |p, y| p.eval_f64(y))
    }
    fn eval_jet1(&self, x: &[crate::jet::Jet1]) -> Vec<crate::jet::Jet1> {
        self.apply(x, |p, y| p.eval_jet1(y))
    }
    fn eval_jet2(&self, x: &[crate::jet::Jet2]) -> Vec<crate::jet::Jet2> {
        self.apply(x, |p, y| p.eval_jet2(y))
    }
}

/// Affine chart reparametrization: x -> inner(A x + b).
pub struct ReparamChart {
    pub inner: Arc<dyn ChartMap>,
    pub matrix: Vec<Vec<f64>>,
    pub shift: Vec<f64>,
}

impl ReparamChart {
    fn apply<S: Scalar>(
        &self,
        x: &[S],
        eval: impl Fn(&dyn ChartMap, &[S]) -> Vec<S>,
    ) -> Vec<S> {
        let m = self.inner.dim_in();
        let mut y = Vec::with_capacity(m);
        for i in 0..m {
            let mut acc = S::constant(self.shift[i]);
            for (j, xj) in x.iter().enumerate() {
                acc = acc + *xj * S::constant(self.matrix[i][j]);
            }
            y.push(acc);
        }
        eval(self.inner.as_ref(), &y)
    }
}

impl ChartMap for ReparamChart {
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.inner.dim_out()
    }
    fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x, |p, y| p.eval_f64(y))
    }
    fn eval_jet1(&self, x: &[crate::jet::Jet1]) -> Vec<crate::jet::Jet1> {
        self.apply(x, |p, y| p.eval_jet1(y))
    }
    fn eval_jet2(&self, x: &[crate::jet::Jet2]) -> Vec<crate::jet::Jet2> {
        self.apply(x, |p, y| p.eval_jet2(y))
    }
}

// ---------------------------------------------------------------------------
// ODE-defined charts
// ---------------------------------------------------------------------------

const ODE_STEPS: usize = 256;

/// Fixed-step-count RK4 over t in [0, x]; smooth in x because the step is x/N.
fn rk4<S: Scalar, const D: usize>(
    mut state: [S; D],
    x: S,
    rhs: impl Fn(&[S; D]) -> [S; D],
) -> [S; D] {
    let h = x / S::constant(ODE_STEPS as f64);
    let half = S::constant(0.5);
    let sixth = S::constant(1.0 / 6.0);
    let two = S::constant(2.0);
    for _ in 0..ODE_STEPS {
        let k1 = rhs(&state);
        let mut s2 = state;
        for i in 0..D {
            s2[i] = state[i] + k1[i] * h * half;
        }
        let k2 = rhs(&s2);
        let mut s3 = state;
        for i in 0..D {
            s3[i] = state[i] + k2[i] * h * half;
        }
        let k3 = rhs(&s3);
        let mut s4 = state;
        for i in 0..D {
            s4[i] = state[i] + k3[i] * h;
        }
        let k4 = rhs(&s4);
        for i in 0..D {
            state[i] = state[i] + (k1[i] + k2[i] * two + k3[i] * two + k4[i]) * h * sixth;
        }
    }
    state
}

/// Extrinsic circle in Q^2_{k} x R integrated from its Frenet data:
/// the tangent and the principal normal are rotated with constant speed
/// kappa while staying adapted to the product. The chart is (t, ...tail).
#[derive(Clone)]
pub struct FrenetCircleChart {
    pub k: f64,
    pub p0: [f64; 3],
    pub ts0: [f64; 3],
    pub tr0: f64,
    pub ns0: [f64; 3],
    pub nr0: f64,
    pub kappa: f64,
}

impl FrenetCircleChart {
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        4
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let k = S::constant(self.k);
        let kap = S::constant(self.kappa);
        // state = (c[3], z, Ts[3], Tr, Ns[3], Nr)
        let mut st = [S::constant(0.0); 12];
        for i in 0..3 {
            st[i] = S::constant(self.p0[i]);
            st[4 + i] = S::constant(self.ts0[i]);
            st[8 + i] = S::constant(self.ns0[i]);
        }
        st[3] = S::constant(0.0);
        st[7] = S::constant(self.tr0);
        st[11] = S::constant(self.nr0);
        let rhs = |s: &[S; 12]| -> [S; 12] {
            let c = [s[0], s[1], s[2]];
            let ts = [s[4], s[5], s[6]];
            let ns = [s[8], s[9], s[10]];
            let tr = s[7];
            let nr = s[11];
            let dot3 = |a: &[S; 3], b: &[S; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            let tt = dot3(&ts, &ts);
            let nt = dot3(&ns, &ts);
            let mut out = [S::constant(0.0); 12];
            for i in 0..3 {
                out[i] = ts[i];
                // Ts' = kappa Ns - k <Ts,Ts> c
                out[4 + i] = kap * ns[i] - k * tt * c[i];
                // Ns' = -kappa Ts - k <Ns,Ts> c
                out[8 + i] = -kap * ts[i] - k * nt * c[i];
            }
            out[3] = tr;
            out[7] = kap * nr;
            out[11] = -kap * tr;
            out
        };
        let end = rk4(st, x[0], rhs);
        vec![end[0], end[1], end[2], end[3]]
    }
}
impl_chart_map!(FrenetCircleChart);

/// Rotation-invariant umbilical immersion M^3 -> S^1(k1) x S^3(1): the
/// profile (t, sigma, theta) solves t' = cos theta, sigma' = sin theta,
/// theta' = cos theta tan sigma, which makes the orbit and profile principal
/// curvatures equal; the chart is (tau, phi1, phi2).
#[derive(Clone)]
pub struct UmbilicalProfileChart {
    pub r1: f64,
    pub sigma0: f64,
    pub theta0: f64,
}

impl UmbilicalProfileChart {
    fn dim_in(&self) -> usize {
        3
    }
    fn dim_out(&self) -> usize {
        6
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let st = [S::constant(0.0), S::constant(self.sigma0), S::constant(self.theta0)];
        let rhs = |s: &[S; 3]| -> [S; 3] {
            let (sigma, theta) = (s[1], s[2]);
            [theta.cos(), theta.sin(), theta.cos() * sigma.sin() / sigma.cos()]
        };
        let end = rk4(st, x[0], rhs);
        let (t, sigma) = (end[0], end[1]);
        let r1 = S::constant(self.r1);
        let u = unit_sphere(&x[1..3]);
        let cs = sigma.cos();
        vec![
            r1 * (t / r1).cos(),
            r1 * (t / r1).sin(),
            u[0] * cs,
            u[1] * cs,
            u[2] * cs,
            sigma.sin(),
        ]
    }
}
impl_chart_map!(UmbilicalProfileChart);

/// Seeded trigonometric graph immersion into S^3 x R^2, the negative control.
#[derive(Clone)]
struct GenericGraphChart {
    coeffs: Vec<f64>,
}

impl GenericGraphChart {
    fn new(seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let coeffs = (0..14).map(|_| rng.range(-0.35, 0.35)).collect();
        GenericGraphChart { coeffs }
    }
    fn dim_in(&self) -> usize {
        2
    }
    fn dim_out(&self) -> usize {
        6
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let c: Vec<S> = self.coeffs.iter().map(|v| S::constant(*v)).collect();
        let (u, v) = (x[0], x[1]);
        let t1 = u + c[0] * v.sin() + c[1] * (u * S::constant(1.3)).cos() * v;
        let t2 = v + c[2] * u.sin() + c[3] * (v * S::constant(0.9)).sin();
        let t3 = c[4] * u + c[5] * v + c[6] * (u + v).sin();
        let angles = [t1, t2, t3];
        let sph = unit_sphere(&angles);
        let q1 = c[7] * u + c[8] * v.cos() + c[9] * (u * S::constant(1.7)).sin();
        let q2 = c[10] * v + c[11] * u.cos() + c[12] * (v + u * c[13]).sin();
        vec![sph[0], sph[1], sph[2], sph[3], q1, q2]
    }
}
impl_chart_map!(GenericGraphChart);

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

fn params(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Factor side for slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceSide {
    Factor1,
    Factor2,
}

/// Inner data for a slice: an immersion into one factor plus the fixed point
/// of the other.
pub struct SliceSpec {
    pub side: SliceSide,
    pub inner: Arc<dyn ChartMap>,
    pub inner_chart: ChartBox,
    pub fixed_point: Vec<f64>,
    pub inner_parallel: bool,
    pub inner_totally_geodesic: bool,
    pub inner_umbilic: bool,
}

/// f = j o f~ with a constant coordinate in the other factor.
pub fn make_slice(
    amb: ProductAmbient,
    spec: SliceSpec,
    name: &str,
    p: BTreeMap<String, f64>,
) -> Result<GalleryInstance> {
    let (factor_fixed, expect_zero_side) = match spec.side {
        SliceSide::Factor1 => (amb.factor2(), true),
        SliceSide::Factor2 => (amb.factor1(), false),
    };
    if spec.fixed_point.len() != factor_fixed.flat_dim() {
        return Err(Error::Validation(format!(
            "slice fixed point has {} coordinates, factor needs {}",
            spec.fixed_point.len(),
            factor_fixed.flat_dim()
        )));
    }
    if factor_fixed.curvature() != 0.0 {
        let q: f64 = if factor_fixed.curvature() < 0.0 {
            -spec.fixed_point[0] * spec.fixed_point[0]
                + spec.fixed_point[1..].iter().map(|v| v * v).sum::<f64>()
        } else {
            spec.fixed_point.iter().map(|v| v * v).sum()
        };
        if (q - 1.0 / factor_fixed.curvature()).abs() > 1e-9 {
            return Err(Error::Validation("slice point off the factor quadric".to_string()));
        }
    }
    let constant = Arc::new(ConstantChart { values: spec.fixed_point.clone() });
    let parts: Vec<Arc<dyn ChartMap>> = match spec.side {
        SliceSide::Factor1 => vec![spec.inner.clone(), constant],
        SliceSide::Factor2 => vec![constant, spec.inner.clone()],
    };
    let map = Arc::new(BlockChart { parts });
    let m = spec.inner_chart.dim();
    let imm = ImmersionMap::new(amb, spec.inner_chart.clone(), map)?;
    imm.validate_on_grid(3, 1e-9)?;
    let expected = Expected {
        r_spectrum: Some(vec![if expect_zero_side { 0.0 } else { 1.0 }; m]),
        rank_s: Some(0),
        parallel: Some(spec.inner_parallel),
        totally_geodesic: Some(spec.inner_totally_geodesic),
        umbilic: Some(spec.inner_umbilic),
        case: None,
        umbilical_case: None,
        q_cross_line_structure: false,
    };
    Ok(GalleryInstance {
        label: GalleryLabel::Slice,
        name: name.to_string(),
        immersion: imm,
        expected,
        params: p,
    })
}

/// Factor data for extrinsic products.
pub struct ProductFactor {
    pub map: Arc<dyn ChartMap>,
    pub chart: ChartBox,
    pub parallel: bool,
    pub totally_geodesic: bool,
}

/// f(x, y) = (f1(x), f2(y)).
pub fn make_product(
    amb: ProductAmbient,
    f1: ProductFactor,
    f2: ProductFactor,
    name: &str,
    p: BTreeMap<String, f64>,
) -> Result<GalleryInstance> {
    let m1 = f1.chart.dim();
    let m2 = f2.chart.dim();
    let mut lo = f1.chart.lo.clone();
    lo.extend(&f2.chart.lo);
    let mut hi = f1.chart.hi.clone();
    hi.extend(&f2.chart.hi);
    let map = Arc::new(BlockChart { parts: vec![f1.map, f2.map] });
    let imm = ImmersionMap::new(amb, ChartBox::new(lo, hi)?, map)?;
    imm.validate_on_grid(3, 1e-9)?;
    let mut spectrum = vec![0.0; m1];
    spectrum.extend(vec![1.0; m2]);
    let expected = Expected {
        r_spectrum: Some(spectrum),
        rank_s: Some(0),
        parallel: Some(f1.parallel && f2.parallel),
        totally_geodesic: Some(f1.totally_geodesic && f2.totally_geodesic),
        umbilic: None,
        case: None,
        umbilical_case: None,
        q_cross_line_structure: false,
    };
    Ok(GalleryInstance {
        label: GalleryLabel::ExtrinsicProduct,
        name: name.to_string(),
        immersion: imm,
        expected,
        params: p,
    })
}

/// The diagonal totally geodesic embedding composed with an inner immersion
/// into Q_k^n, k = k1 k2 / (k1 + k2): f = g o inner, g(x) = (a x, b x).
pub fn make_diagonal(
    k1: f64,
    k2: f64,
    n: usize,
    inner: Arc<dyn ChartMap>,
    inner_chart: ChartBox,
    inner_parallel: bool,
    inner_totally_geodesic: bool,
    name: &str,
    p: BTreeMap<String, f64>,
) -> Result<GalleryInstance> {
    if k1 * k2 <= 0.0 {
        return Err(Error::Unsupported(
            "diagonal embedding needs k1 k2 > 0".to_string(),
        ));
    }
    let a = (k2 / (k1 + k2)).abs().sqrt();
    let b = (k1 / (k1 + k2)).abs().sqrt();
    let amb = ProductAmbient::from_curvatures(k1, n, k2, n)?;
    let map = Arc::new(WeightedPairChart {
        f1: inner.clone(),
        f2: inner,
        a,
        b,
    });
    let m = inner_chart.dim();
    let imm = ImmersionMap::new(amb, inner_chart, map)?;
    imm.validate_on_grid(3, 1e-9)?;
    let b2 = k1 / (k1 + k2);
    let expected = Expected {
        r_spectrum: Some(vec![b2; m]),
        rank_s: Some(m),
        parallel: Some(inner_parallel),
        totally_geodesic: Some(inner_totally_geodesic),
        umbilic: None,
        case: None,
        umbilical_case: None,
        q_cross_line_structure: false,
    };
    Ok(GalleryInstance {
        label: GalleryLabel::DiagonalGeodesic,
        name: name.to_string(),
        immersion: imm,
        expected,
        params: p,
    })
}

/// Weighted sum (cos theta f1, sin theta f2) of two immersions of the same
/// manifold into rescaled space forms. Validates that both factors induce the
/// same metric on a sample grid.
pub fn make_weighted_sum(
    amb: ProductAmbient,
    f1: Arc<dyn ChartMap>,
    f2: Arc<dyn ChartMap>,
    theta: f64,
    chart: ChartBox,
    umbilic: bool,
    parallel: bool,
    name: &str,
    p: BTreeMap<String, f64>,
) -> Result<GalleryInstance> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Validation("theta must lie in (0, pi/2)".to_string()));
    }
    let (a, b) = (theta.cos(), theta.sin());
    // Isometry validation: pullback metrics of the two parts must agree.
    {
        let probe1 = ImmersionMap::new(
            ProductAmbient::from_curvatures(0.0, f1.dim_out(), 0.0, 1)?,
            chart.clone(),
            Arc::new(BlockChart { parts: vec![f1.clone(), Arc::new(ConstantChart { values: vec![0.0] })] }),
        )?;
        let probe2 = ImmersionMap::new(
            ProductAmbient::from_curvatures(0.0, f2.dim_out(), 0.0, 1)?,
            chart.clone(),
            Arc::new(BlockChart { parts: vec![f2.clone(), Arc::new(ConstantChart { values: vec![0.0] })] }),
        )?;
        let cfg = DiffConfig::default();
        for x in chart.grid(3, 0.05, 27) {
            let g1 = probe1.metric(&x, &cfg);
            let g2 = probe2.metric(&x, &cfg);
            let mismatch = (&g1 - &g2).norm();
            if mismatch > 1e-8 {
                return Err(Error::NotIsometric(format!(
                    "weighted-sum factors induce different metrics (defect {mismatch:.3e})"
                )));
            }
        }
    }
    let m = chart.dim();
    let map = Arc::new(WeightedPairChart { f1, f2, a, b });
    let imm = ImmersionMap::new(amb, chart, map)?;
    imm.validate_on_grid(3, 1e-9)?;
    let expected = Expected {
        r_spectrum: Some(vec![b * b; m]),
        rank_s: Some(m),
        parallel: Some(parallel),
        totally_geodesic: None,
        umbilic: Some(umbilic),
        case: None,
        umbilical_case: None,
        q_cross_line_structure: false,
    };
    Ok(GalleryInstance {
        label: GalleryLabel::WeightedSum,
        name: name.to_string(),
        immersion: imm,
        expected,
        params: p,
    })
}

/// Curve kind for circle products in Q^2_{k1} x R^{n2}.
pub enum CircleKind {
    /// Constant-latitude helix (r cos wt, r sin wt, z0; v t); an extrinsic
    /// circle only in the degenerate cases v = 0 (slice circle) or z0 = 0
    /// (geodesic); never full.
    Latitude { r: f64, z0: f64, omega: f64, v: f64 },
    /// Frenet-integrated extrinsic circle with curvature kappa and initial
    /// normal angle psi; full for generic parameters.
    Frenet { r: f64, z0: f64, omega: f64, v: f64, kappa: f64, psi: f64 },
}

/// f = j o (gamma x tail): an extrinsic-circle (or helix) factor times a flat
/// tail, inside Q^2_{k1} x R^{n2}.
pub fn make_circle_product(
    k1: f64,
    kind: CircleKind,
    tail: Option<ProductFactor>,
    tail_flat_dim: usize,
    name: &str,
    p: BTreeMap<String, f64>,
) -> Result<GalleryInstance> {
    if k1 <= 0.0 {
        return Err(Error::Unsupported("circle products use the k1 > 0 model".to_string()));
    }
    let (r, z0, omega, v) = match &kind {
        CircleKind::Latitude { r, z0, omega, v } | CircleKind::Frenet { r, z0, omega, v, .. } => {
            (*r, *z0, *omega, *v)
        }
    };
    if (r * r + z0 * z0 - 1.0 / k1).abs() > 1e-12 {
        return Err(Error::Validation("circle start point off the quadric: r^2 + z0^2 != 1/k1".into()));
    }
    if (r * r * omega * omega + v * v - 1.0).abs() > 1e-12 {
        return Err(Error::Validation("circle not unit speed: r^2 w^2 + v^2 != 1".into()));
    }
    let is_frenet = matches!(kind, CircleKind::Frenet { .. });
    let curve: Arc<dyn ChartMap> = match kind {
        CircleKind::Latitude { r, z0, omega, v } => {
            Arc::new(LatitudeHelixChart { r, z0, omega, v })
        }
        CircleKind::Frenet { r, z0, omega, v, kappa, psi } => {
            let sk = k1.sqrt();
            let u2 = [-z0 * sk, 0.0, r * sk];
            // N0 = cos psi u2 + sin psi (v u1 - r w e_z)
            let ns0 = [
                psi.cos() * u2[0],
                psi.cos() * u2[1] + psi.sin() * v,
                psi.cos() * u2[2],
            ];
            let nr0 = -psi.sin() * r * omega;
            Arc::new(FrenetCircleChart {
                k: k1,
                p0: [r, 0.0, z0],
                ts0: [0.0, r * omega, 0.0],
                tr0: v,
                ns0,
                nr0,
                kappa,
            })
        }
    };
    let mut parts: Vec<Arc<dyn ChartMap>> = vec![curve];
    let mut lo = vec![-1.0];
    let mut hi = vec![1.0];
    let mut tail_parallel = true;
    let mut tail_geodesic = true;
    if let Some(t) = tail {
        if t.map.dim_out() != tail_flat_dim {
            return Err(Error::Validation("tail output dimension mismatch".into()));
        }
        lo.extend(&t.chart.lo);
        hi.extend(&t.chart.hi);
        tail_parallel = t.parallel;
        tail_geodesic = t.totally_geodesic;
        parts.push(t.map);
    } else if tail_flat_dim > 0 {
        parts.push(Arc::new(ConstantChart { values: vec![0.0; tail_flat_dim] }));
    }
    let n2 = 1 + tail_flat_dim;
    let amb = ProductAmbient::from_curvatures(k1, 2, 0.0, n2)?;
    let map = Arc::new(BlockChart { parts });
    let imm = ImmersionMap::new(amb, ChartBox::new(lo, hi)?, map)?;
    imm.validate_on_grid(3, 1e-8)?;
    // Latitude helices are extrinsic circles only when degenerate (v = 0
    // slice circle, z0 = 0 geodesic); Frenet curves are circles by design.
    let is_circle = is_frenet || v == 0.0 || z0 == 0.0;
    let expected = Expected {
        r_spectrum: None,
        rank_s: None,
        parallel: Some(is_circle && tail_parallel),
        totally_geodesic: Some(!is_frenet && z0 == 0.0 && tail_geodesic),
        umbilic: None,
        case: None,
        umbilical_case: None,
        q_cross_line_structure: n2 == 1,
    };
    Ok(GalleryInstance {
        label: GalleryLabel::ExtrinsicCircleProduct,
        name: name.to_string(),
        immersion: imm,
        expected,
        params: p,
    })
}

/// F = j o f for a totally geodesic block inclusion j between products
/// (zero padding at the end of each factor block). With zero pads it is the
/// identity inclusion.
pub fn make_composition(
    inner: &GalleryInstance,
    pad1: usize,
    pad2: usize,
    name: &str,
) -> Result<GalleryInstance> {
    let amb_in = inner.immersion.ambient();
    let f1 = amb_in.factor1();
    let f2 = amb_in.factor2();
    let amb = ProductAmbient::from_curvatures(
        f1.curvature(),
        f1.dim() + pad1,
        f2.curvature(),
        f2.dim() + pad2,
    )?;
    let map = Arc::new(BlockInclusionChart {
        inner: clone_map(inner),
        split: f1.flat_dim(),
        pad1,
        pad2,
    });
    let imm = ImmersionMap::new(amb, inner.immersion.domain().clone(), map)?;
    let expected = inner.expected.clone();
    Ok(GalleryInstance {
        label: GalleryLabel::TotallyGeodesicComposition,
        name: name.to_string(),
        immersion: imm,
        expected,
        params: inner.params.clone(),
    })
}

fn clone_map(instance: &GalleryInstance) -> Arc<dyn ChartMap> {
    instance.immersion.chart_map()
}

/// The rotation-invariant umbilical instance in S^1(k1) x S^3(1).
pub fn make_umbilical_profile(
    k1: f64,
    sigma0: f64,
    theta0: f64,
    name: &str,
) -> Result<GalleryInstance> {
    if k1 <= 0.0 {
        return Err(Error::Unsupported("profile family uses k1 > 0".into()));
    }
    let amb = ProductAmbient::from_curvatures(k1, 1, 1.0, 3)?;
    let chart = ChartBox::new(vec![-0.45, -0.5, -0.5], vec![0.45, 0.5, 0.5])?;
    let map = Arc::new(UmbilicalProfileChart { r1: 1.0 / k1.sqrt(), sigma0, theta0 });
    let imm = ImmersionMap::new(amb, chart, map)?;
    imm.validate_on_grid(3, 1e-8)?;
    let expected = Expected {
        r_spectrum: None,
        rank_s: Some(1),
        parallel: Some(false),
        totally_geodesic: Some(false),
        umbilic: Some(true),
        case: Some(CaseId::U14iii),
        umbilical_case: Some(CaseId::U14iii),
        q_cross_line_structure: false,
    };
    Ok(GalleryInstance {
        label: GalleryLabel::UmbilicalProfile,
        name: name.to_string(),
        immersion: imm,
        expected,
        params: params(&[("k1", k1), ("sigma0", sigma0), ("theta0", theta0)]),
    })
}

/// Seeded perturbed graph immersion, the negative control.
pub fn make_generic_graph(seed: u64, name: &str) -> Result<GalleryInstance> {
    let amb = ProductAmbient::from_curvatures(1.0, 3, 0.0, 2)?;
    let chart = ChartBox::symmetric(2, 0.6);
    let map = Arc::new(GenericGraphChart::new(seed));
    let imm = ImmersionMap::new(amb, chart, map)?;
    imm.validate_on_grid(3, 1e-8)?;
    let expected = Expected {
        parallel: Some(false),
        totally_geodesic: Some(false),
        umbilic: Some(false),
        ..Default::default()
    };
    Ok(GalleryInstance {
        label: GalleryLabel::GenericGraph,
        name: name.to_string(),
        immersion: imm,
        expected,
        params: params(&[("seed", seed as f64)]),
    })
}

// ---------------------------------------------------------------------------
// Preset registry
// ---------------------------------------------------------------------------

/// Stable list of the built-in instances.
pub fn preset_names() -> Vec<&'static str> {
    vec![
        "slice-great-s2",
        "slice-small-s3",
        "slice-small-s2",
        "slice-flat-plane",
        "product-circles",
        "product-geodesics",
        "product-sphere-line",
        "product-sphere-parabola",
        "diagonal-s2-k11",
        "diagonal-s2-k44",
        "diagonal-h2-hyperbolic",
        "diagonal-small-sphere",
        "weighted-sum-pi6",
        "weighted-sum-pi4",
        "weighted-sum-pi3",
        "weighted-sum-umbilic-m3",
        "circle-full",
        "circle-helix",
        "circle-slice-degenerate",
        "circle-geodesic-line",
        "umbilic-profile",
        "generic-graph",
        "composition-identity",
        "composition-slice",
    ]
}

/// Instantiate a preset by name.
pub fn instantiate(name: &str) -> Result<GalleryInstance> {
    match name {
        "slice-great-s2" => {
            // Great 2-sphere slice of S^4 x S^3: totally geodesic, case 1.3(i),
            // left-reducible by 2 and right-reducible by 3.
            let amb = ProductAmbient::from_curvatures(1.0, 4, 1.0, 3)?;
            let mut inst = make_slice(
                amb,
                SliceSpec {
                    side: SliceSide::Factor1,
                    inner: Arc::new(SphereChart { n: 2, radius: 1.0, pad_after: 2 }),
                    inner_chart: ChartBox::symmetric(2, 0.8),
                    fixed_point: vec![1.0, 0.0, 0.0, 0.0],
                    inner_parallel: true,
                    inner_totally_geodesic: true,
                    inner_umbilic: true,
                },
                name,
                params(&[("k1", 1.0), ("k2", 1.0)]),
            )?;
            inst.expected.case = Some(CaseId::Tg13i);
            Ok(inst)
        }
        "slice-small-s3" => {
            // Small 3-sphere in S^4 x {pt}: umbilical nontotally geodesic,
            // case 1.4(i).
            let amb = ProductAmbient::from_curvatures(1.0, 4, 1.0, 2)?;
            let mut inst = make_slice(
                amb,
                SliceSpec {
                    side: SliceSide::Factor1,
                    inner: Arc::new(SmallSphereChart { n: 3, big_r: 1.0, rho: 0.8, pad_after: 0 }),
                    inner_chart: ChartBox::symmetric(3, 0.7),
                    fixed_point: vec![0.0, 0.0, 1.0],
                    inner_parallel: true,
                    inner_totally_geodesic: false,
                    inner_umbilic: true,
                },
                name,
                params(&[("rho", 0.8)]),
            )?;
            inst.expected.case = Some(CaseId::P11i);
            inst.expected.umbilical_case = Some(CaseId::U14i);
            Ok(inst)
        }
        "slice-small-s2" => {
            // Small 2-sphere in S^3 x {pt}: |H| = 0.75 closed form at rho = 0.8.
            let amb = ProductAmbient::from_curvatures(1.0, 3, 1.0, 2)?;
            let mut inst = make_slice(
                amb,
                SliceSpec {
                    side: SliceSide::Factor1,
                    inner: Arc::new(SmallSphereChart { n: 2, big_r: 1.0, rho: 0.8, pad_after: 0 }),
                    inner_chart: ChartBox::symmetric(2, 0.8),
                    fixed_point: vec![1.0, 0.0, 0.0],
                    inner_parallel: true,
                    inner_totally_geodesic: false,
                    inner_umbilic: true,
                },
                name,
                params(&[("rho", 0.8)]),
            )?;
            inst.expected.case = Some(CaseId::P11i);
            Ok(inst)
        }
        "slice-flat-plane" => {
            // {x1} x R^2 inside H^2 x R^2: the R = I mirror case.
            let amb = ProductAmbient::from_curvatures(-1.0, 2, 0.0, 2)?;
            let mut inst = make_slice(
                amb,
                SliceSpec {
                    side: SliceSide::Factor2,
                    inner: Arc::new(FlatIdentityChart { n: 2, pad_after: 0 }),
                    inner_chart: ChartBox::symmetric(2, 1.0),
                    fixed_point: vec![1.0, 0.0, 0.0],
                    inner_parallel: true,
                    inner_totally_geodesic: true,
                    inner_umbilic: true,
                },
                name,
                params(&[("k1", -1.0)]),
            )?;
            inst.expected.case = Some(CaseId::Tg13i);
            Ok(inst)
        }
        "product-circles" => {
            let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2)?;
            let mut inst = make_product(
                amb,
                ProductFactor {
                    map: Arc::new(LatitudeCircleChart { z: 0.6, pad_after: 0 }),
                    chart: ChartBox::symmetric(1, 1.0),
                    parallel: true,
                    totally_geodesic: false,
                },
                ProductFactor {
                    map: Arc::new(LatitudeCircleChart { z: -0.4, pad_after: 0 }),
                    chart: ChartBox::symmetric(1, 1.0),
                    parallel: true,
                    totally_geodesic: false,
                },
                name,
                params(&[("z1", 0.6), ("z2", -0.4)]),
            )?;
            inst.expected.case = Some(CaseId::P11ii);
            Ok(inst)
        }
        "product-geodesics" => {
            let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 2)?;
            let mut inst = make_product(
                amb,
                ProductFactor {
                    map: Arc::new(LatitudeCircleChart { z: 0.0, pad_after: 0 }),
                    chart: ChartBox::symmetric(1, 1.0),
                    parallel: true,
                    totally_geodesic: true,
                },
                ProductFactor {
                    map: Arc::new(LatitudeCircleChart { z: 0.0, pad_after: 0 }),
                    chart: ChartBox::symmetric(1, 1.0),
                    parallel: true,
                    totally_geodesic: true,
                },
                name,
                params(&[]),
            )?;
            inst.expected.case = Some(CaseId::Tg13ii);
            Ok(inst)
        }
        "product-sphere-line" => {
            // Small sphere in S^3 times a line in R^2: parallel product.
            let amb = ProductAmbient::from_curvatures(1.0, 3, 0.0, 2)?;
            let mut inst = make_product(
                amb,
                ProductFactor {
                    map: Arc::new(SmallSphereChart { n: 2, big_r: 1.0, rho: 0.75, pad_after: 0 }),
                    chart: ChartBox::symmetric(2, 0.8),
                    parallel: true,
                    totally_geodesic: false,
                },
                ProductFactor {
                    map: Arc::new(FlatIdentityChart { n: 1, pad_after: 1 }),
                    chart: ChartBox::symmetric(1, 1.0),
                    parallel: true,
                    totally_geodesic: true,
                },
                name,
                params(&[("rho", 0.75)]),
            )?;
            inst.expected.case = Some(CaseId::P12ii);
            Ok(inst)
        }
        "product-sphere-parabola" => {
            // Same sphere, but the plane curve is not parallel.
            let amb = ProductAmbient::from_curvatures(1.0, 3, 0.0, 2)?;
            make_product(
                amb,
                ProductFactor {
                    map: Arc::new(SmallSphereChart { n: 2, big_r: 1.0, rho: 0.75, pad_after: 0 }),
                    chart: ChartBox::symmetric(2, 0.8),
                    parallel: true,
                    totally_geodesic: false,
                },
                ProductFactor {
                    map: Arc::new(ParabolaChart { a: 0.4 }),
                    chart: ChartBox::symmetric(1, 1.0),
                    parallel: false,
                    totally_geodesic: false,
                },
                name,
                params(&[("a", 0.4)]),
            )
        }
        "diagonal-s2-k11" => diagonal_identity(1.0, 1.0, 2, name),
        "diagonal-s2-k44" => diagonal_identity(4.0, 4.0, 2, name),
        "diagonal-h2-hyperbolic" => diagonal_identity(-1.0, -2.0, 2, name),
        "diagonal-small-sphere" => {
            // g over a small sphere in Q_{1/2}^3, then included into S^5 x S^5:
            // parallel case 1.1(iii) with rank N_1 = 1.
            let k = 0.5;
            let big_r = (1.0 / k).sqrt(); // sqrt(2)
            let inner = Arc::new(SmallSphereChart { n: 2, big_r, rho: 1.0, pad_after: 0 });
            let mut inst = make_diagonal(
                1.0,
                1.0,
                3,
                inner,
                ChartBox::symmetric(2, 0.8),
                true,
                false,
                name,
                params(&[("k1", 1.0), ("k2", 1.0), ("rho", 1.0)]),
            )?;
            inst = make_composition(&inst, 2, 2, name)?;
            inst.expected.case = Some(CaseId::P11iii);
            inst.expected.rank_s = Some(2);
            Ok(inst)
        }
        "weighted-sum-pi6" => weighted_sum_spheres(std::f64::consts::FRAC_PI_6, 2, name),
        "weighted-sum-pi4" => {
            let mut inst = weighted_sum_spheres(std::f64::consts::FRAC_PI_4, 2, name)?;
            inst.expected.case = Some(CaseId::P11iii);
            Ok(inst)
        }
        "weighted-sum-pi3" => weighted_sum_spheres(std::f64::consts::PI / 3.0, 2, name),
        "weighted-sum-umbilic-m3" => weighted_sum_spheres(std::f64::consts::FRAC_PI_6, 3, name),
        "circle-full" => {
            // Frenet extrinsic circle times a point tail in S^2 x R^2.
            let (r, z0) = (0.8, 0.6);
            let v = 0.5;
            let omega = (1.0 - v * v).sqrt() / r;
            let mut inst = make_circle_product(
                1.0,
                CircleKind::Frenet { r, z0, omega, v, kappa: 0.9, psi: 0.7 },
                None,
                1,
                name,
                params(&[
                    ("r", r),
                    ("z0", z0),
                    ("omega", omega),
                    ("v", v),
                    ("kappa", 0.9),
                    ("psi", 0.7),
                    ("frenet", 1.0),
                ]),
            )?;
            inst.expected.case = Some(CaseId::P12iv);
            inst.expected.parallel = Some(true);
            Ok(inst)
        }
        "circle-helix" => {
            // Latitude helix in S^2 x R: not an extrinsic circle; carries the
            // Q_k x R decomposition structure.
            let (r, z0) = (0.8, 0.6);
            let v = 0.5;
            let omega = (1.0 - v * v).sqrt() / r;
            make_circle_product(
                1.0,
                CircleKind::Latitude { r, z0, omega, v },
                None,
                0,
                name,
                params(&[("r", r), ("z0", z0), ("omega", omega), ("v", v)]),
            )
        }
        "circle-slice-degenerate" => {
            // v = 0: latitude circle inside the slice S^2 x {0}.
            let (r, z0) = (0.8, 0.6);
            let omega = 1.0 / r;
            let mut inst = make_circle_product(
                1.0,
                CircleKind::Latitude { r, z0, omega, v: 0.0 },
                None,
                0,
                name,
                params(&[("r", r), ("z0", z0), ("omega", omega), ("v", 0.0)]),
            )?;
            inst.expected.parallel = Some(true);
            inst.expected.case = Some(CaseId::P12i);
            Ok(inst)
        }
        "circle-geodesic-line" => {
            // Geodesic helix (z0 = 0) times a line: totally geodesic 1.3(iv).
            let r = 1.0;
            let v = 0.6;
            let omega = (1.0 - v * v).sqrt() / r;
            let mut inst = make_circle_product(
                1.0,
                CircleKind::Latitude { r, z0: 0.0, omega, v },
                Some(ProductFactor {
                    map: Arc::new(FlatIdentityChart { n: 1, pad_after: 0 }),
                    chart: ChartBox::symmetric(1, 1.0),
                    parallel: true,
                    totally_geodesic: true,
                }),
                1,
                name,
                params(&[("v", v), ("omega", omega)]),
            )?;
            inst.expected.case = Some(CaseId::Tg13iv);
            inst.expected.totally_geodesic = Some(true);
            inst.expected.parallel = Some(true);
            Ok(inst)
        }
        "umbilic-profile" => make_umbilical_profile(1.0, 0.45, 0.55, name),
        "generic-graph" => make_generic_graph(20260810, name),
        "composition-identity" => {
            let inner = instantiate("product-circles")?;
            make_composition(&inner, 0, 0, name)
        }
        "composition-slice" => {
            // Great circle slice of S^2 x S^1 pushed into S^4 x S^3.
            let amb = ProductAmbient::from_curvatures(1.0, 2, 1.0, 1)?;
            let inner = make_slice(
                amb,
                SliceSpec {
                    side: SliceSide::Factor1,
                    inner: Arc::new(SphereChart { n: 1, radius: 1.0, pad_after: 1 }),
                    inner_chart: ChartBox::symmetric(1, 1.0),
                    fixed_point: vec![1.0, 0.0],
                    inner_parallel: true,
                    inner_totally_geodesic: true,
                    inner_umbilic: true,
                },
                "slice-s1",
                params(&[]),
            )?;
            let mut inst = make_composition(&inner, 2, 2, name)?;
            inst.expected.case = Some(CaseId::Tg13i);
            Ok(inst)
        }
        other => Err(Error::Validation(format!("unknown gallery preset '{other}'"))),
    }
}

fn diagonal_identity(k1: f64, k2: f64, n: usize, name: &str) -> Result<GalleryInstance> {
    let k = k1 * k2 / (k1 + k2);
    let inner: Arc<dyn ChartMap> = if k > 0.0 {
        Arc::new(SphereChart { n, radius: 1.0 / k.sqrt(), pad_after: 0 })
    } else {
        Arc::new(HyperbolicChart { n, r2: -1.0 / k })
    };
    let mut inst = make_diagonal(
        k1,
        k2,
        n,
        inner,
        ChartBox::symmetric(n, 0.8),
        true,
        true,
        name,
        params(&[("k1", k1), ("k2", k2)]),
    )?;
    inst.expected.case = Some(CaseId::Tg13iii);
    Ok(inst)
}

/// Weighted sum of two small spheres over M = S^m(1), ambient S^{m+1} x S^{m+1}.
fn weighted_sum_spheres(theta: f64, m: usize, name: &str) -> Result<GalleryInstance> {
    let (ct, st) = (theta.cos(), theta.sin());
    let k1t = ct * ct; // rescaled curvatures k_i tilde
    let k2t = st * st;
    let f1 = Arc::new(SmallSphereChart { n: m, big_r: 1.0 / k1t.sqrt(), rho: 1.0, pad_after: 0 });
    let f2 = Arc::new(SmallSphereChart { n: m, big_r: 1.0 / k2t.sqrt(), rho: 1.0, pad_after: 0 });
    let amb = ProductAmbient::from_curvatures(1.0, m + 1, 1.0, m + 1)?;
    let parallel = (theta - std::f64::consts::FRAC_PI_4).abs() < 1e-12;
    let mut inst = make_weighted_sum(
        amb,
        f1,
        f2,
        theta,
        ChartBox::symmetric(m, 0.7),
        true,
        parallel,
        name,
        params(&[("theta", theta), ("m", m as f64)]),
    )?;
    if m >= 3 {
        inst.expected.case = Some(CaseId::U14ii);
        inst.expected.umbilical_case = Some(CaseId::U14ii);
    }
    Ok(inst)
}

/// Instantiate every preset (used by the full verification sweep).
pub fn all_presets() -> Result<Vec<GalleryInstance>> {
    preset_names().into_iter().map(instantiate).collect()
}

// ---------------------------------------------------------------------------
// Extrinsic-circle diagnostics
// ---------------------------------------------------------------------------

/// Brute-force diagnostics of a curve t -> Q^2_k x R^{n2} (the first chart
/// axis of a circle-product instance): parallelism of the curvature vector in
/// the normal connection, computed by plain finite differences of the curve,
/// and fullness measured from the span of its samples.
#[derive(Debug, Clone)]
pub struct CircleDiagnostics {
    /// max |nabla^perp_{gamma'} eta| over the samples.
    pub parallel_residual: f64,
    /// |eta| range over the samples.
    pub curvature_min: f64,
    pub curvature_max: f64,
    /// Smallest singular value ratio of the sphere-part samples (3 = full).
    pub sphere_span_ratio: f64,
    /// Height variation of the R-part of the curve.
    pub height_variation: f64,
    pub full: bool,
}

pub fn circle_diagnostics(inst: &GalleryInstance) -> Result<CircleDiagnostics> {
    if inst.label != GalleryLabel::ExtrinsicCircleProduct {
        return Err(Error::Validation("circle diagnostics need a circle-product instance".into()));
    }
    let imm = &inst.immersion;
    let amb = imm.ambient();
    let k = amb.k1();
    let m = imm.intrinsic_dim();
    // Evaluate along the first chart axis with the other axes mid-box.
    let mid: Vec<f64> = imm
        .domain()
        .lo
        .iter()
        .zip(&imm.domain().hi)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let curve = |x: &[f64]| -> DVector<f64> {
        let mut y = mid.clone();
        y[0] = x[0];
        imm.position(&y)
    };
    let _ = m;
    // 4th-order stencils at a coarse step: the fixed-step integrator behind
    // the evaluator carries ~1e-14 of accumulated roundoff, which second
    // differences amplify.
    let h = 2e-3;
    let proj_tangent_sphere = |c: &DVector<f64>, w: &DVector<f64>| -> DVector<f64> {
        // Project the sphere block of w onto the tangent space of the sphere.
        let cb = amb.block1(c);
        let wb = amb.block1(w);
        let coeff = k * amb.flat_inner_unchecked(&wb, &cb);
        &wb - &cb * coeff
    };
    let mut parallel_residual: f64 = 0.0;
    let mut kmin = f64::INFINITY;
    let mut kmax: f64 = 0.0;
    let samples: Vec<f64> = (0..21).map(|i| -0.8 + 0.08 * i as f64).collect();
    let eta_at = |x: &[f64]| -> DVector<f64> {
        let d2: DVector<f64> = crate::fd::diff2(&curve, x, 0, 0, h, 4);
        let c = curve(x);
        // Ambient covariant acceleration: project the sphere block.
        let sphere_part = proj_tangent_sphere(&c, &d2);
        let mut eta = amb.block2(&d2);
        eta += sphere_part;
        // Remove the component along the unit tangent.
        let d1: DVector<f64> = crate::fd::diff1(&curve, x, 0, h, 4);
        let coeff = amb.flat_inner_unchecked(&eta, &d1)
            / amb.flat_inner_unchecked(&d1, &d1);
        eta -= &d1 * coeff;
        eta
    };
    for &t in &samples {
        let x = [t];
        let eta = eta_at(&x);
        let curv = amb.flat_inner_unchecked(&eta, &eta).sqrt();
        kmin = kmin.min(curv);
        kmax = kmax.max(curv);
        // nabla^perp eta: derivative of eta, projected to the normal space of
        // the curve inside T(Q^2 x R).
        let de: DVector<f64> = crate::fd::diff1(&|y: &[f64]| eta_at(y), &x, 0, h, 4);
        let c = curve(&x);
        let mut v = proj_tangent_sphere(&c, &de) + amb.block2(&de);
        let d1: DVector<f64> = crate::fd::diff1(&curve, &x, 0, h, 4);
        let coeff = amb.flat_inner_unchecked(&v, &d1) / amb.flat_inner_unchecked(&d1, &d1);
        v -= &d1 * coeff;
        parallel_residual = parallel_residual.max(v.norm());
    }
    // Fullness: sphere samples span R^3 and the height varies.
    let cols: Vec<DVector<f64>> = samples
        .iter()
        .map(|&t| {
            let c = curve(&[t]);
            DVector::from_fn(3, |i, _| c[i])
        })
        .collect();
    let mat = nalgebra::DMatrix::from_fn(3, cols.len(), |r, c| cols[c][r]);
    let svals = mat.svd(false, false).singular_values;
    let ratio = svals[2] / svals[0];
    let heights: Vec<f64> = samples.iter().map(|&t| curve(&[t])[3]).collect();
    let hvar = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - heights.iter().cloned().fold(f64::INFINITY, f64::min);
    let full = ratio > 1e-3 && hvar > 1e-6;
    Ok(CircleDiagnostics {
        parallel_residual,
        curvature_min: kmin,
        curvature_max: kmax,
        sphere_span_ratio: ratio,
        height_variation: hvar,
        full,
    })
}
