//! Scenario files, the verification pipeline they drive, and reports.
//!
//! Scenarios are a line-oriented key-value format with brace-nested sections;
//! reports serialize as JSON. Identical scenario input produces byte-identical
//! reports apart from the timing field.

use crate::classifier::{self, ClassificationVerdict, GridSample, Side, Tolerances};
use crate::equations;
use crate::error::{Error, Result};
use crate::expr::ExprChart;
use crate::extrinsic;
use crate::gallery::{self, GalleryInstance};
use crate::immersion::{ChartBox, DiffConfig, ImmersionMap};
use crate::tensors;
use once_cell::sync::OnceCell;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Rayon pool capped by PRODFORM_THREADS.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceCell<rayon::ThreadPool> = OnceCell::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Ok(v) = std::env::var("PRODFORM_THREADS") {
            if let Ok(n) = v.parse::<usize>() {
                builder = builder.num_threads(n.max(1));
            }
        }
        builder.build().expect("thread pool")
    })
}

// ---------------------------------------------------------------------------
// Raw key-value tree
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Word(String),
    List(Vec<Value>),
    Section(BTreeMap<String, Value>),
}

impl Value {
    fn as_num(&self, key: &str) -> Result<f64> {
        match self {
            Value::Num(v) => Ok(*v),
            _ => Err(Error::Validation(format!("field '{key}' must be a number"))),
        }
    }

    fn as_usize(&self, key: &str) -> Result<usize> {
        let v = self.as_num(key)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::Validation(format!("field '{key}' must be a nonnegative integer")));
        }
        Ok(v as usize)
    }

    fn as_word(&self, key: &str) -> Result<&str> {
        match self {
            Value::Word(w) => Ok(w),
            _ => Err(Error::Validation(format!("field '{key}' must be a word or string"))),
        }
    }

    fn as_section(&self, key: &str) -> Result<&BTreeMap<String, Value>> {
        match self {
            Value::Section(s) => Ok(s),
            _ => Err(Error::Validation(format!("field '{key}' must be a section"))),
        }
    }

    fn as_num_list(&self, key: &str) -> Result<Vec<f64>> {
        match self {
            Value::List(items) => items.iter().map(|v| v.as_num(key)).collect(),
            _ => Err(Error::Validation(format!("field '{key}' must be a list of numbers"))),
        }
    }

    fn as_word_list(&self, key: &str) -> Result<Vec<String>> {
        match self {
            Value::List(items) => {
                items.iter().map(|v| v.as_word(key).map(|s| s.to_string())).collect()
            }
            _ => Err(Error::Validation(format!("field '{key}' must be a list"))),
        }
    }
}

/// Parse the line-oriented scenario text into a key-value tree.
pub fn parse_tree(text: &str) -> Result<BTreeMap<String, Value>> {
    let mut stack: Vec<BTreeMap<String, Value>> = vec![BTreeMap::new()];
    let mut names: Vec<String> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "}" {
            let done = stack.pop().ok_or(Error::Parse {
                line: lineno,
                msg: "unmatched closing brace".into(),
            })?;
            let name = names.pop().ok_or(Error::Parse {
                line: lineno,
                msg: "unmatched closing brace".into(),
            })?;
            stack
                .last_mut()
                .ok_or(Error::Parse { line: lineno, msg: "unmatched closing brace".into() })?
                .insert(name, Value::Section(done));
            continue;
        }
        if let Some(name) = line.strip_suffix('{') {
            let name = name.trim();
            if name.is_empty() || !is_key(name) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("bad section header '{line}'"),
                });
            }
            names.push(name.to_string());
            stack.push(BTreeMap::new());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 'key = value', section header or brace, got '{line}'"),
            });
        };
        let key = key.trim();
        if !is_key(key) {
            return Err(Error::Parse { line: lineno, msg: format!("bad key '{key}'") });
        }
        let value = parse_value(value.trim(), lineno)?;
        stack.last_mut().unwrap().insert(key.to_string(), value);
    }
    if stack.len() != 1 {
        return Err(Error::Parse { line: text.lines().count(), msg: "unclosed section".into() });
    }
    Ok(stack.pop().unwrap())
}

fn is_key(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

fn parse_value(text: &str, lineno: usize) -> Result<Value> {
    if text.is_empty() {
        return Err(Error::Parse { line: lineno, msg: "missing value".into() });
    }
    if let Some(rest) = text.strip_prefix('[') {
        let Some(inner) = rest.strip_suffix(']') else {
            return Err(Error::Parse { line: lineno, msg: "unclosed list".into() });
        };
        let inner = inner.trim();
        if inner.is_empty() {
            return Ok(Value::List(Vec::new()));
        }
        let items = split_top_level(inner)
            .into_iter()
            .map(|item| parse_value(item.trim(), lineno))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Value::List(items));
    }
    if let Some(stripped) = text.strip_prefix('"') {
        if let Some(word) = stripped.strip_suffix('"') {
            return Ok(Value::Word(word.to_string()));
        }
        return Err(Error::Parse { line: lineno, msg: "unclosed string".into() });
    }
    if let Ok(v) = text.parse::<f64>() {
        return Ok(Value::Num(v));
    }
    match text {
        "true" => return Ok(Value::Num(1.0)),
        "false" => return Ok(Value::Num(0.0)),
        _ => {}
    }
    if is_key(text) || text.contains('(') {
        return Ok(Value::Word(text.to_string()));
    }
    Err(Error::Parse { line: lineno, msg: format!("cannot parse value '{text}'") })
}

fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut in_str = false;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '"' => {
                in_str = !in_str;
                cur.push(c);
            }
            '(' | '[' if !in_str => {
                depth += 1;
                cur.push(c);
            }
            ')' | ']' if !in_str => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            ',' if depth == 0 && !in_str => {
                out.push(std::mem::take(&mut cur));
            }
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

// ---------------------------------------------------------------------------
// Typed scenario
// ---------------------------------------------------------------------------

/// Requested checks, in canonical execution order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum CheckKind {
    Tensors,
    Identities,
    Equations,
    Parallel,
    Umbilic,
    Classify,
    Reduce,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Tensors => "tensors",
            CheckKind::Identities => "identities",
            CheckKind::Equations => "equations",
            CheckKind::Parallel => "parallel",
            CheckKind::Umbilic => "umbilic",
            CheckKind::Classify => "classify",
            CheckKind::Reduce => "reduce",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "tensors" => CheckKind::Tensors,
            "identities" => CheckKind::Identities,
            "equations" => CheckKind::Equations,
            "parallel" => CheckKind::Parallel,
            "umbilic" => CheckKind::Umbilic,
            "classify" => CheckKind::Classify,
            "reduce" => CheckKind::Reduce,
            other => return Err(Error::Validation(format!("unknown check '{other}'"))),
        })
    }
}

/// Immersion source: a gallery preset or an inline expression map.
#[derive(Debug, Clone)]
pub enum Source {
    Gallery { preset: String },
    Inline { m: usize, components: Vec<String> },
}

/// Per-check tolerances with the declared defaults.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CheckTolerances {
    pub algebraic: f64,
    pub differential: f64,
    pub equations: f64,
    pub parallel: f64,
    pub umbilic: f64,
    pub zero: f64,
    pub rank: f64,
    pub reduction: f64,
    pub membership: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        CheckTolerances {
            algebraic: 1e-8,
            differential: 1e-4,
            equations: 1e-3,
            parallel: 1e-4,
            umbilic: 1e-6,
            zero: 1e-6,
            rank: 1e-6,
            reduction: 1e-3,
            membership: 1e-9,
        }
    }
}

impl CheckTolerances {
    pub fn classifier(&self) -> Tolerances {
        Tolerances {
            parallel: self.parallel,
            umbilic: self.umbilic,
            zero: self.zero,
            rank: self.rank,
            reduction: self.reduction,
        }
    }
}

/// A parsed, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub ambient: Option<(f64, usize, f64, usize)>,
    pub source: Source,
    pub grid_per_axis: usize,
    pub grid_lo: Option<Vec<f64>>,
    pub grid_hi: Option<Vec<f64>>,
    pub checks: Vec<CheckKind>,
    pub tolerances: CheckTolerances,
    pub fd: DiffConfig,
    pub expect_theorem: Option<String>,
    pub expect_case: Option<String>,
    pub seed: u64,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario> {
        let tree = parse_tree(text)?;
        Scenario::from_tree(&tree)
    }

    pub fn from_tree(tree: &BTreeMap<String, Value>) -> Result<Scenario> {
        let name = tree
            .get("name")
            .map(|v| v.as_word("name").map(|s| s.to_string()))
            .transpose()?
            .unwrap_or_else(|| "unnamed".to_string());

        let ambient = match tree.get("ambient") {
            Some(v) => {
                let s = v.as_section("ambient")?;
                let k1 = require(s, "k1")?.as_num("k1")?;
                let n1 = require(s, "n1")?.as_usize("n1")?;
                let k2 = require(s, "k2")?.as_num("k2")?;
                let n2 = require(s, "n2")?.as_usize("n2")?;
                if n1 == 0 || n2 == 0 {
                    return Err(Error::Validation("factor dimensions must be positive".into()));
                }
                Some((k1, n1, k2, n2))
            }
            None => None,
        };

        let source = {
            let s = require(tree, "source")?.as_section("source")?;
            match require(s, "kind")?.as_word("kind")? {
                "gallery" => Source::Gallery {
                    preset: require(s, "preset")?.as_word("preset")?.to_string(),
                },
                "inline" => {
                    let m = require(s, "m")?.as_usize("m")?;
                    let components = require(s, "components")?.as_word_list("components")?;
                    if m == 0 || m > crate::jet::MAX_VARS {
                        return Err(Error::Validation(format!(
                            "inline chart dimension m = {m} outside 1..{}",
                            crate::jet::MAX_VARS
                        )));
                    }
                    Source::Inline { m, components }
                }
                other => {
                    return Err(Error::Validation(format!("unknown source kind '{other}'")))
                }
            }
        };

        let (grid_per_axis, grid_lo, grid_hi) = match tree.get("grid") {
            Some(v) => {
                let s = v.as_section("grid")?;
                let per = s.get("per_axis").map(|v| v.as_usize("per_axis")).transpose()?;
                let lo = s.get("lo").map(|v| v.as_num_list("lo")).transpose()?;
                let hi = s.get("hi").map(|v| v.as_num_list("hi")).transpose()?;
                (per.unwrap_or(3), lo, hi)
            }
            None => (3, None, None),
        };

        let checks = match tree.get("checks") {
            Some(v) => {
                let mut kinds = v
                    .as_word_list("checks")?
                    .iter()
                    .map(|w| CheckKind::from_name(w))
                    .collect::<Result<Vec<_>>>()?;
                kinds.sort();
                kinds.dedup();
                kinds
            }
            None => vec![CheckKind::Tensors, CheckKind::Classify],
        };
        if checks.is_empty() {
            return Err(Error::Validation("no checks requested".into()));
        }

        let mut tolerances = CheckTolerances::default();
        if let Some(v) = tree.get("tolerances") {
            let s = v.as_section("tolerances")?;
            for (key, val) in s {
                let t = val.as_num(key)?;
                if t <= 0.0 {
                    return Err(Error::Validation(format!("tolerance '{key}' must be positive")));
                }
                match key.as_str() {
                    "algebraic" => tolerances.algebraic = t,
                    "differential" => tolerances.differential = t,
                    "equations" => tolerances.equations = t,
                    "parallel" => tolerances.parallel = t,
                    "umbilic" => tolerances.umbilic = t,
                    "zero" => tolerances.zero = t,
                    "rank" => tolerances.rank = t,
                    "reduction" => tolerances.reduction = t,
                    "membership" => tolerances.membership = t,
                    other => {
                        return Err(Error::Validation(format!("unknown tolerance '{other}'")))
                    }
                }
            }
        }

        let mut fd = DiffConfig::default();
        if let Some(v) = tree.get("fd") {
            let s = v.as_section("fd")?;
            if let Some(step) = s.get("step") {
                fd.fd_step = step.as_num("step")?;
                if fd.fd_step <= 0.0 {
                    return Err(Error::Validation("fd step must be positive".into()));
                }
            }
            if let Some(order) = s.get("order") {
                fd.fd_order = order.as_usize("order")?;
                if fd.fd_order != 2 && fd.fd_order != 4 {
                    return Err(Error::Validation("fd order must be 2 or 4".into()));
                }
            }
            if let Some(exact) = s.get("exact") {
                fd.use_exact = exact.as_num("exact")? != 0.0;
            }
        }
        fd.membership_tol = tolerances.membership;

        let (expect_theorem, expect_case) = match tree.get("expect") {
            Some(v) => {
                let s = v.as_section("expect")?;
                (
                    s.get("theorem").map(|v| v.as_word("theorem").map(String::from)).transpose()?,
                    s.get("case").map(|v| v.as_word("case").map(String::from)).transpose()?,
                )
            }
            None => (None, None),
        };

        let seed = tree.get("seed").map(|v| v.as_usize("seed")).transpose()?.unwrap_or(0) as u64;

        Ok(Scenario {
            name,
            ambient,
            source,
            grid_per_axis,
            grid_lo,
            grid_hi,
            checks,
            tolerances,
            fd,
            expect_theorem,
            expect_case,
            seed,
        })
    }
}

fn require<'a>(tree: &'a BTreeMap<String, Value>, key: &str) -> Result<&'a Value> {
    tree.get(key).ok_or_else(|| Error::Validation(format!("missing required field '{key}'")))
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResidualEntry {
    pub name: String,
    pub max: f64,
    pub rms: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerdictEcho {
    pub theorem: String,
    pub case: Option<String>,
    pub evidence: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl VerdictEcho {
    fn from(v: &ClassificationVerdict) -> Self {
        VerdictEcho {
            theorem: v.theorem.to_string(),
            case: v.case.map(|c| c.roman().to_string()),
            evidence: v.evidence.clone(),
            notes: v.notes.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReductionEcho {
    pub side: String,
    pub reducible_by: usize,
    pub witness_rank: usize,
    pub parallel_residual: f64,
    pub containment_residual: f64,
    pub curvature_residual: f64,
    pub mean_curvature_residual: f64,
    pub routes_agree: bool,
    pub diagonal_rank_n1: Option<usize>,
    pub diagonal_applies: Option<bool>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub tolerance: Option<f64>,
    pub residuals: Vec<ResidualEntry>,
    pub verdict: Option<VerdictEcho>,
    pub reductions: Vec<ReductionEcho>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub engine_version: String,
    pub fd_step: f64,
    pub fd_order: usize,
    pub fd_exact: bool,
    pub grid_points: usize,
    pub seed: u64,
    pub checks: Vec<CheckReport>,
    /// Wall-clock milliseconds; excluded from determinism comparisons.
    pub timing_ms: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn from_json(text: &str) -> Result<Report> {
        serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("bad report JSON: {e}")))
    }

    /// One line per check, for terminal output.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let worst = c
                .residuals
                .iter()
                .map(|r| format!("{}={:.3e}", r.name, r.max))
                .collect::<Vec<_>>()
                .join(" ");
            let verdict = c
                .verdict
                .as_ref()
                .map(|v| match &v.case {
                    Some(case) => format!(" verdict={} case ({})", v.theorem, case),
                    None => format!(" verdict={}", v.theorem),
                })
                .unwrap_or_default();
            out.push_str(&format!("{status} {}{verdict} {worst}\n", c.name));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Build the immersion a scenario describes.
pub fn build_immersion(scn: &Scenario) -> Result<(ImmersionMap, Option<GalleryInstance>)> {
    match &scn.source {
        Source::Gallery { preset } => {
            let inst = gallery::instantiate(preset)?;
            if let Some((k1, n1, k2, n2)) = scn.ambient {
                let amb = inst.immersion.ambient();
                if amb.k1() != k1
                    || amb.k2() != k2
                    || amb.factor1().dim() != n1
                    || amb.factor2().dim() != n2
                {
                    return Err(Error::Validation(format!(
                        "ambient section disagrees with preset '{preset}'"
                    )));
                }
            }
            Ok((inst.immersion.clone(), Some(inst)))
        }
        Source::Inline { m, components } => {
            let Some((k1, n1, k2, n2)) = scn.ambient else {
                return Err(Error::Validation("inline sources require an ambient section".into()));
            };
            let amb = crate::ambient::ProductAmbient::from_curvatures(k1, n1, k2, n2)?;
            if components.len() != amb.flat_dim() {
                return Err(Error::Validation(format!(
                    "inline map has {} components, the flat model needs {}",
                    components.len(),
                    amb.flat_dim()
                )));
            }
            let chart = ExprChart::parse(*m, components)?;
            let (lo, hi) = match (&scn.grid_lo, &scn.grid_hi) {
                (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
                _ => (vec![-0.5; *m], vec![0.5; *m]),
            };
            let domain = ChartBox::new(lo, hi)?;
            let imm = ImmersionMap::new(amb, domain, Arc::new(chart))?;
            imm.validate_on_grid(3, scn.tolerances.membership.max(1e-8))?;
            Ok((imm, None))
        }
    }
}

/// Sample grid for a scenario (respecting margins and the 625-point cap).
pub fn scenario_grid(scn: &Scenario, imm: &ImmersionMap) -> Result<Vec<Vec<f64>>> {
    let m = imm.intrinsic_dim();
    let margin = 0.05 + 200.0 * scn.fd.fd_step;
    let domain = imm.domain();
    let box_for_grid = match (&scn.grid_lo, &scn.grid_hi) {
        (Some(lo), Some(hi)) => {
            if lo.len() != m || hi.len() != m {
                return Err(Error::Validation("grid box dimension mismatch".into()));
            }
            for i in 0..m {
                if lo[i] < domain.lo[i] || hi[i] > domain.hi[i] {
                    return Err(Error::Validation(
                        "grid box must lie inside the chart domain".into(),
                    ));
                }
            }
            ChartBox::new(lo.clone(), hi.clone())?
        }
        _ => domain.clone(),
    };
    let pts = box_for_grid.grid(scn.grid_per_axis, margin, 625);
    if pts.is_empty() {
        return Err(Error::Validation("empty sample grid".into()));
    }
    Ok(pts)
}

fn entry(name: &str, values: &[(Vec<f64>, f64)]) -> ResidualEntry {
    let mut max = 0.0;
    let mut worst = values.first().map(|(p, _)| p.clone()).unwrap_or_default();
    let mut sq = 0.0;
    for (p, v) in values {
        if *v > max {
            max = *v;
            worst = p.clone();
        }
        sq += v * v;
    }
    ResidualEntry {
        name: name.to_string(),
        max,
        rms: (sq / values.len().max(1) as f64).sqrt(),
        worst_point: worst,
    }
}

/// Execute a scenario.
pub fn run_scenario(scn: &Scenario) -> Result<Report> {
    let started = std::time::Instant::now();
    let (imm, instance) = build_immersion(scn)?;
    let grid = scenario_grid(scn, &imm)?;
    let cfg = scn.fd;
    let tols = scn.tolerances;

    let mut checks = Vec::new();
    for kind in &scn.checks {
        let report = match kind {
            CheckKind::Tensors => check_tensors(&imm, &grid, &cfg, &tols)?,
            CheckKind::Identities => check_identities(&imm, &grid, &cfg, &tols)?,
            CheckKind::Equations => check_equations(&imm, &grid, &cfg, &tols)?,
            CheckKind::Parallel => check_parallel(&imm, &grid, &cfg, &tols)?,
            CheckKind::Umbilic => check_umbilic(&imm, &grid, &cfg, &tols)?,
            CheckKind::Classify => {
                check_classify(&imm, &grid, &cfg, &tols, scn, instance.as_ref())?
            }
            CheckKind::Reduce => check_reduce(&imm, &grid, &cfg, &tols)?,
        };
        checks.push(report);
    }

    Ok(Report {
        scenario: scn.name.clone(),
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        fd_step: cfg.fd_step,
        fd_order: cfg.fd_order,
        fd_exact: cfg.use_exact,
        grid_points: grid.len(),
        seed: scn.seed,
        checks,
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

fn check_tensors(
    imm: &ImmersionMap,
    grid: &[Vec<f64>],
    cfg: &DiffConfig,
    tols: &CheckTolerances,
) -> Result<CheckReport> {
    let per_point: Vec<(Vec<f64>, [f64; 5])> = thread_pool().install(|| {
        grid.par_iter()
            .map(|x| -> Result<(Vec<f64>, [f64; 5])> {
                let fp = imm.frame_at(x, cfg)?;
                let pt = tensors::compute_tensors(imm.ambient(), &fp)?;
                let (a1, a2, a3) = tensors::algebraic_identity_residuals(&pt);
                let mut range_defect = 0.0f64;
                for v in pt.r_eigenvalues().into_iter().chain(pt.t_eigenvalues()) {
                    range_defect = range_defect.max((-v).max(v - 1.0).max(0.0));
                }
                // Subbundle extraction also validates the binary spectrum on
                // S(TM)-perp.
                tensors::extract_subbundles(&pt, tols.rank)?;
                Ok((x.clone(), [a1, a2, a3, range_defect, pt.decomposition_defect]))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let pick = |i: usize| -> Vec<(Vec<f64>, f64)> {
        per_point.iter().map(|(p, v)| (p.clone(), v[i])).collect()
    };
    let residuals = vec![
        entry("sts_minus_r_i_minus_r", &pick(0)),
        entry("ts_minus_s_i_minus_r", &pick(1)),
        entry("sst_minus_t_i_minus_t", &pick(2)),
        entry("eigenvalue_range_defect", &pick(3)),
        entry("splitting_defect", &pick(4)),
    ];
    let passed = residuals[0].max < tols.algebraic
        && residuals[1].max < tols.algebraic
        && residuals[2].max < tols.algebraic
        && residuals[3].max < 1e-8;
    Ok(CheckReport {
        name: "tensors".into(),
        passed,
        tolerance: Some(tols.algebraic),
        residuals,
        verdict: None,
        reductions: Vec::new(),
        notes: Vec::new(),
    })
}

fn check_identities(
    imm: &ImmersionMap,
    grid: &[Vec<f64>],
    cfg: &DiffConfig,
    tols: &CheckTolerances,
) -> Result<CheckReport> {
    let per_point: Vec<(Vec<f64>, [f64; 3])> = thread_pool().install(|| {
        grid.par_iter()
            .map(|x| -> Result<(Vec<f64>, [f64; 3])> {
                let (a, b, c) = tensors::differential_identity_residuals(imm, x, cfg)?;
                Ok((x.clone(), [a, b, c]))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let pick = |i: usize| -> Vec<(Vec<f64>, f64)> {
        per_point.iter().map(|(p, v)| (p.clone(), v[i])).collect()
    };
    let residuals = vec![
        entry("nabla_r_identity", &pick(0)),
        entry("nabla_s_identity", &pick(1)),
        entry("nabla_t_identity", &pick(2)),
    ];
    let passed = residuals.iter().all(|r| r.max < tols.differential);
    Ok(CheckReport {
        name: "identities".into(),
        passed,
        tolerance: Some(tols.differential),
        residuals,
        verdict: None,
        reductions: Vec::new(),
        notes: Vec::new(),
    })
}

fn check_equations(
    imm: &ImmersionMap,
    grid: &[Vec<f64>],
    cfg: &DiffConfig,
    tols: &CheckTolerances,
) -> Result<CheckReport> {
    let per_point: Vec<(Vec<f64>, [f64; 4])> = thread_pool().install(|| {
        grid.par_iter()
            .map(|x| -> Result<(Vec<f64>, [f64; 4])> {
                let g = equations::gauss_residual(imm, x, cfg)?;
                let (c8, c10) = equations::codazzi_residual(imm, x, cfg)?;
                let ric = equations::ricci_residual(imm, x, cfg)?;
                Ok((x.clone(), [g, c8, c10, ric]))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let pick = |i: usize| -> Vec<(Vec<f64>, f64)> {
        per_point.iter().map(|(p, v)| (p.clone(), v[i])).collect()
    };
    let residuals = vec![
        entry("gauss", &pick(0)),
        entry("codazzi", &pick(1)),
        entry("codazzi_shape", &pick(2)),
        entry("ricci", &pick(3)),
    ];
    let passed = residuals.iter().all(|r| r.max < tols.equations);
    Ok(CheckReport {
        name: "equations".into(),
        passed,
        tolerance: Some(tols.equations),
        residuals,
        verdict: None,
        reductions: Vec::new(),
        notes: Vec::new(),
    })
}

fn check_parallel(
    imm: &ImmersionMap,
    grid: &[Vec<f64>],
    cfg: &DiffConfig,
    tols: &CheckTolerances,
) -> Result<CheckReport> {
    let per_point: Vec<(Vec<f64>, f64)> = thread_pool().install(|| {
        grid.par_iter()
            .map(|x| Ok((x.clone(), extrinsic::nabla_alpha_norm(imm, x, cfg)?)))
            .collect::<Result<Vec<_>>>()
    })?;
    let residuals = vec![entry("nabla_alpha", &per_point)];
    let passed = residuals[0].max < tols.parallel;
    Ok(CheckReport {
        name: "parallel".into(),
        passed,
        tolerance: Some(tols.parallel),
        residuals,
        verdict: None,
        reductions: Vec::new(),
        notes: Vec::new(),
    })
}

fn check_umbilic(
    imm: &ImmersionMap,
    grid: &[Vec<f64>],
    cfg: &DiffConfig,
    tols: &CheckTolerances,
) -> Result<CheckReport> {
    let per_point: Vec<(Vec<f64>, f64)> = thread_pool().install(|| {
        grid.par_iter()
            .map(|x| {
                let fp = imm.frame_at(x, cfg)?;
                let ed = extrinsic::second_fundamental_form(imm, &fp, cfg)?;
                Ok((x.clone(), extrinsic::umbilic_residual(&ed)))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let residuals = vec![entry("umbilic_residual", &per_point)];
    let passed = residuals[0].max < tols.umbilic;
    Ok(CheckReport {
        name: "umbilic".into(),
        passed,
        tolerance: Some(tols.umbilic),
        residuals,
        verdict: None,
        reductions: Vec::new(),
        notes: Vec::new(),
    })
}

fn check_classify(
    imm: &ImmersionMap,
    grid: &[Vec<f64>],
    cfg: &DiffConfig,
    tols: &CheckTolerances,
    scn: &Scenario,
    instance: Option<&GalleryInstance>,
) -> Result<CheckReport> {
    let gs = GridSample::collect(imm, grid, cfg)?;
    let verdict = classifier::classify(imm, &gs, &tols.classifier(), cfg)?;
    let echo = VerdictEcho::from(&verdict);
    // Expected case: explicit expect section, else gallery ground truth.
    let (expect_theorem, expect_case) = match (&scn.expect_theorem, &scn.expect_case) {
        (Some(t), c) => (Some(t.clone()), c.clone()),
        _ => match instance.and_then(|i| i.expected.case) {
            Some(case) => (
                Some(case.theorem().to_string()),
                Some(case.roman().to_string()),
            ),
            None => (None, None),
        },
    };
    let mut notes = Vec::new();
    let passed = match expect_theorem {
        Some(t) => {
            let theorem_ok = echo.theorem == t;
            let case_ok = match &expect_case {
                Some(c) => echo.case.as_deref() == Some(c.as_str()),
                None => true,
            };
            if !(theorem_ok && case_ok) {
                notes.push(format!(
                    "expected {t} case {:?}, measured {} case {:?}",
                    expect_case, echo.theorem, echo.case
                ));
            }
            theorem_ok && case_ok
        }
        None => {
            notes.push("no expected case: verdict is informational".to_string());
            true
        }
    };
    Ok(CheckReport {
        name: "classify".into(),
        passed,
        tolerance: None,
        residuals: Vec::new(),
        verdict: Some(echo),
        reductions: Vec::new(),
        notes,
    })
}

fn check_reduce(
    imm: &ImmersionMap,
    grid: &[Vec<f64>],
    cfg: &DiffConfig,
    tols: &CheckTolerances,
) -> Result<CheckReport> {
    let gs = GridSample::collect(imm, grid, cfg)?;
    let mut reductions = Vec::new();
    let mut passed = true;
    for side in [Side::Left, Side::Right] {
        let v = classifier::detect_codim_reduction(imm, &gs, side, &tols.classifier(), cfg)?;
        passed &= v.routes_agree;
        reductions.push(ReductionEcho {
            side: side.to_string(),
            reducible_by: v.reducible_by,
            witness_rank: v.witness_rank,
            parallel_residual: v.parallel_residual,
            containment_residual: v.containment_residual,
            curvature_residual: v.curvature_residual,
            mean_curvature_residual: v.mean_curvature_residual,
            routes_agree: v.routes_agree,
            diagonal_rank_n1: v.diagonal.as_ref().map(|d| d.rank_n1),
            diagonal_applies: v.diagonal.as_ref().map(|d| d.applies),
            notes: v.notes.clone(),
        });
    }
    Ok(CheckReport {
        name: "reduce".into(),
        passed,
        tolerance: Some(tols.reduction),
        residuals: Vec::new(),
        verdict: None,
        reductions,
        notes: Vec::new(),
    })
}

/// Text listing of the gallery presets with their expected cases.
pub fn list_gallery() -> String {
    let mut out = String::new();
    for name in gallery::preset_names() {
        match gallery::instantiate(name) {
            Ok(inst) => {
                let case = inst
                    .expected
                    .case
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| "None".to_string());
                let params = inst
                    .params
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push_str(&format!(
                    "{name:<28} {:<28} expected: {case:<28} [{params}]\n",
                    inst.label.to_string()
                ));
            }
            Err(e) => out.push_str(&format!("{name:<28} ERROR: {e}\n")),
        }
    }
    out
}
