//! Command dispatch.

use crate::cache::{cache_key, Cache, CacheStatus, Lookup, CACHE_ENV};
use crate::corpus::{self, parse_flat_matrix, CorpusId, Input};
use crate::error::{CliError, Context, Result};
use crate::external::{ProcessAdapter, SolverConfig};
use crate::report::{Parameters, Report, SolverStats, Timestamps, REPORT_SCHEMA_VERSION};
use crate::specfile::{self, raw_from_matrix, sha256_hex};
use nclab::algebra::{self, CcpMapSpec, CoproductSpec, PushoutSpec, QuotientSpec};
use nclab::conic::{ConicSolver, InteriorPoint, SdpProblem, SdpSolution, SolverAdapter};
use nclab::decomp::{self, AlphaMode, Decomposer};
use nclab::duality::{self, Functional, Verdict, VerdictOptions};
use nclab::geometry::{self, NcBodyFamily};
use nclab::linalg::{CMatrix, RVector};
use nclab::system::project_to_system;
use nclab::{Error, LevelElement, OperatorSystemSpec, ToleranceConfig};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Instant, SystemTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    Decompose,
    Alpha,
    Beta,
    Dualizable,
    Extension,
    Separate,
    Quotient,
    Coproduct,
    Pushout,
    Corpus,
}

impl CommandKind {
    pub const ALL: [CommandKind; 11] = [
        CommandKind::Validate,
        CommandKind::Decompose,
        CommandKind::Alpha,
        CommandKind::Beta,
        CommandKind::Dualizable,
        CommandKind::Extension,
        CommandKind::Separate,
        CommandKind::Quotient,
        CommandKind::Coproduct,
        CommandKind::Pushout,
        CommandKind::Corpus,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CommandKind::Validate => "validate",
            CommandKind::Decompose => "decompose",
            CommandKind::Alpha => "alpha",
            CommandKind::Beta => "beta",
            CommandKind::Dualizable => "dualizable",
            CommandKind::Extension => "extension",
            CommandKind::Separate => "separate",
            CommandKind::Quotient => "quotient",
            CommandKind::Coproduct => "coproduct",
            CommandKind::Pushout => "pushout",
            CommandKind::Corpus => "corpus",
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommandKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| CliError::UnknownCommand(s.to_string()))
    }
}

/// Flags shared by all commands; command-specific ones are ignored where
/// they do not apply.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub levels: Option<usize>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub tol: Option<f64>,
    /// `reference` (default) or `external`.
    pub solver: Option<String>,
    pub solver_config: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub no_cache: bool,
    pub exact: bool,
    pub element: Option<String>,
    pub element_t: Option<String>,
    pub point: Option<String>,
    pub body: Option<String>,
    pub inner: Option<String>,
    pub outer: Option<String>,
    pub functional: Option<String>,
    pub functional_t: Option<String>,
    pub restarts: Option<usize>,
    /// Highest quasistate level searched by `coproduct`.
    pub k_max: Option<usize>,
    pub write: Option<PathBuf>,
}

pub const DEFAULT_LEVELS: usize = 3;
pub const DEFAULT_SAMPLES: usize = 20;
pub const DEFAULT_K_MAX: usize = 2;

impl Flags {
    fn extra(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v.clone());
            }
        };
        put("element", &self.element);
        put("element_t", &self.element_t);
        put("point", &self.point);
        put("body", &self.body);
        put("inner", &self.inner);
        put("outer", &self.outer);
        put("functional", &self.functional);
        put("functional_t", &self.functional_t);
        if self.exact {
            m.insert("exact".into(), "true".into());
        }
        if let Some(r) = self.restarts {
            m.insert("restarts".into(), r.to_string());
        }
        if let Some(k) = self.k_max {
            m.insert("k_max".into(), k.to_string());
        }
        m
    }

    fn parameters(&self) -> Parameters {
        Parameters {
            seed: self.seed,
            levels: self.levels.unwrap_or(DEFAULT_LEVELS),
            samples: self.samples.unwrap_or(DEFAULT_SAMPLES),
            tol: self.tol,
            solver: self.solver.clone().unwrap_or_else(|| "reference".into()),
            extra: self.extra(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub cache: CacheStatus,
}

/// Counts solves passed to the wrapped adapter.
#[derive(Debug)]
struct Counting {
    inner: Arc<dyn SolverAdapter>,
    count: AtomicU64,
}

impl SolverAdapter for Counting {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn solve(&self, problem: &SdpProblem) -> SdpSolution {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.solve(problem)
    }
}

struct Ctx {
    params: Parameters,
    flags: Flags,
    tol: ToleranceConfig,
    solver: ConicSolver,
}

impl Ctx {
    fn spec(&self, file: &specfile::SpecFile) -> Result<OperatorSystemSpec> {
        let base = file.tolerance_config();
        let tol = ToleranceConfig {
            feas_tol: self.tol.feas_tol,
            bisect_tol: self.tol.bisect_tol,
            seed: self.params.seed,
            level_cap: self.params.levels.max(1),
            ..base
        };
        tol.validate()?;
        Ok(file.build()?.with_tolerances(tol))
    }

    fn map(&self, m: &corpus::MapFile) -> Result<CcpMapSpec> {
        let map = m.build()?;
        let s = self.spec(&m.source)?;
        let t = self.spec(&m.target)?;
        let values = map.values().iter().map(|v| LevelElement::new(&t, 1, v.coeffs().to_vec())).collect::<nclab::Result<Vec<_>>>()?;
        Ok(CcpMapSpec::new(&s, &t, values)?)
    }
}

/// Run one command; serves from the cache when an entry for the same
/// content hash exists.
pub fn run_command(command: &str, inputs: &[String], flags: &Flags) -> Result<Outcome> {
    let kind: CommandKind = command.parse()?;
    let resolved: Vec<Input> = if kind == CommandKind::Corpus {
        Vec::new()
    } else {
        inputs.iter().map(|a| corpus::resolve(a)).collect::<Result<Vec<_>>>()?.into_iter().flatten().collect()
    };
    let canonical: String = resolved.iter().map(Input::to_canonical).collect::<Vec<_>>().join("\n");
    let spec_hash = sha256_hex(canonical.as_bytes());
    let params = flags.parameters();
    if params.levels == 0 {
        return Err(CliError::InvalidArgument("--levels must be at least 1".into()));
    }

    let cache_dir = if flags.no_cache { None } else { flags.cache.clone().or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from)) };
    let cache = cache_dir.map(Cache::new).transpose()?;
    let key_params = json!({ "parameters": params, "inputs": if kind == CommandKind::Corpus { json!(inputs) } else { Value::Null } });
    let key = cache_key(&spec_hash, kind.as_str(), &key_params);
    let mut status = CacheStatus::Disabled;
    if let Some(c) = &cache {
        match c.lookup(&key) {
            Lookup::Hit(report) => return Ok(Outcome { report, cache: CacheStatus::Hit }),
            Lookup::Miss => status = CacheStatus::Miss,
            Lookup::Corrupted => status = CacheStatus::Recovered,
        }
    }

    let mut tol = resolved
        .iter()
        .find_map(|i| match i {
            Input::Spec(s) => Some(s.tolerance_config()),
            Input::Map(m) => Some(m.source.tolerance_config()),
        })
        .unwrap_or_default();
    if let Some(t) = flags.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::InvalidArgument(format!("--tol must be positive, got {t}")));
        }
        tol.feas_tol = t;
        tol.bisect_tol = t;
    }
    let inner: Arc<dyn SolverAdapter> = match params.solver.as_str() {
        "reference" => Arc::new(InteriorPoint::default()),
        "external" => {
            let path = flags
                .solver_config
                .clone()
                .ok_or_else(|| CliError::Config("--solver external needs --solver-config FILE".into()))?;
            Arc::new(ProcessAdapter::new(&SolverConfig::load(&path)?))
        }
        other => return Err(CliError::InvalidArgument(format!("unknown solver `{other}` (reference|external)"))),
    };
    let counting = Arc::new(Counting { inner, count: AtomicU64::new(0) });
    let solver = ConicSolver::from_tolerances(&tol).with_adapter(counting.clone());
    let ctx = Ctx { params: params.clone(), flags: flags.clone(), tol: tol.clone(), solver };

    let started = SystemTime::now();
    let clock = Instant::now();
    let (results, negative) = match kind {
        CommandKind::Validate => validate(&ctx, &resolved)?,
        CommandKind::Decompose => decompose(&ctx, &resolved)?,
        CommandKind::Alpha => alpha(&ctx, &resolved)?,
        CommandKind::Beta => beta(&ctx, &resolved)?,
        CommandKind::Dualizable => dualizable(&ctx, &resolved)?,
        CommandKind::Extension => extension(&ctx, &resolved)?,
        CommandKind::Separate => separate(&ctx, &resolved)?,
        CommandKind::Quotient => quotient(&ctx, &resolved)?,
        CommandKind::Coproduct => coproduct(&ctx, &resolved)?,
        CommandKind::Pushout => pushout(&ctx, &resolved)?,
        CommandKind::Corpus => corpus_cmd(&ctx, inputs)?,
    };
    let elapsed = clock.elapsed();
    let report = Report {
        schema: REPORT_SCHEMA_VERSION.into(),
        spec_hash,
        command: kind.as_str().into(),
        inputs: inputs.to_vec(),
        parameters: params,
        results,
        certified_negative: negative,
        solver: SolverStats {
            engine: to_json(&ctx.solver.engine).as_str().unwrap_or_default().to_string(),
            adapter: counting.name().to_string(),
            feas_tol: tol.feas_tol,
            bisect_tol: tol.bisect_tol,
            sdp_solves: counting.count.load(Ordering::Relaxed),
        },
        timestamps: Timestamps {
            started: humantime::format_rfc3339_millis(started).to_string(),
            finished: humantime::format_rfc3339_millis(started + elapsed).to_string(),
            elapsed_ms: elapsed.as_millis() as u64,
        },
    };
    if let Some(c) = &cache {
        c.store(&key, &report)?;
    }
    Ok(Outcome { report, cache: status })
}

type Run = Result<(Value, bool)>;

fn one_spec(ctx: &Ctx, inputs: &[Input], cmd: &str) -> Result<OperatorSystemSpec> {
    match inputs {
        [Input::Spec(s)] => ctx.spec(s),
        _ => Err(CliError::InvalidArgument(format!("{cmd} takes exactly one spec file or corpus system"))),
    }
}

fn two_specs(ctx: &Ctx, inputs: &[Input], cmd: &str) -> Result<(OperatorSystemSpec, OperatorSystemSpec)> {
    match inputs {
        [Input::Spec(s), Input::Spec(t)] => Ok((ctx.spec(s)?, ctx.spec(t)?)),
        _ => Err(CliError::InvalidArgument(format!("{cmd} takes two spec files or a corpus pair"))),
    }
}

fn matrix_rows(m: &CMatrix) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect())).collect())
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

/// `x ∈ M_n(S)` from a flat realization matrix.
fn element_arg(spec: &OperatorSystemSpec, text: &str, what: &str) -> Result<LevelElement> {
    let m = parse_flat_matrix(text, what)?;
    let d = spec.ambient_dim();
    if m.nrows() % d != 0 {
        return Err(CliError::InvalidArgument(format!("{what}: a {}x{} matrix is not a level of a system in M_{d}", m.nrows(), m.ncols())));
    }
    let level = m.nrows() / d;
    let (x, residual) = project_to_system(spec, &m, level)?;
    if residual > spec.tolerances().dedup_tol * m.norm().max(1.0) {
        return Err(CliError::InvalidArgument(format!("{what}: matrix lies outside M_{level}(S) (residual {residual:.3e})")));
    }
    Ok(x)
}

/// A functional from per-basis-element values, `[[[re, im], ...], ...]`.
fn functional_arg(spec: &OperatorSystemSpec, text: &str, what: &str) -> Result<Functional> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::InvalidArgument(format!("{what}: {e}")))?;
    let list = v.as_array().ok_or_else(|| CliError::schema(what, "expected one matrix per basis element"))?;
    let mut values = Vec::with_capacity(list.len());
    for (k, m) in list.iter().enumerate() {
        let raw = specfile::parse_matrix_list(m, &format!("{what}[{k}]"))?;
        let n = specfile::square_side(raw.len()).ok_or_else(|| CliError::schema(format!("{what}[{k}]"), "not a square matrix"))?;
        values.push(specfile::matrix_from_raw(n, &raw));
    }
    Ok(Functional::new(spec, values.first().map_or(1, |m| m.nrows()), values)?)
}

fn body_arg(text: &str, spec: Option<&OperatorSystemSpec>, max_level: usize) -> Result<NcBodyFamily> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| CliError::InvalidArgument(format!("body `{text}`: bad number `{s}`")));
    match parts.as_slice() {
        ["interval", a, b] => {
            let (a, b) = (num(a)?, num(b)?);
            if !(a <= b) {
                return Err(CliError::InvalidArgument(format!("body `{text}`: empty interval")));
            }
            Ok(NcBodyFamily::interval(a, b, max_level))
        }
        ["psd_ball", d] => {
            let d = d.parse::<usize>().ok().filter(|&d| d > 0).ok_or_else(|| CliError::InvalidArgument(format!("body `{text}`: bad size")))?;
            Ok(NcBodyFamily::psd_ball(d, max_level))
        }
        ["quasistate"] => {
            let s = spec.ok_or_else(|| CliError::InvalidArgument("body `quasistate` needs a spec input".into()))?;
            Ok(NcBodyFamily::quasistate(s))
        }
        _ => Err(CliError::InvalidArgument(format!("unknown body `{text}` (interval:a:b, psd_ball:d, quasistate)"))),
    }
}

fn validate(ctx: &Ctx, inputs: &[Input]) -> Run {
    if inputs.is_empty() {
        return Err(CliError::InvalidArgument("validate needs at least one input".into()));
    }
    let describe = |s: &OperatorSystemSpec| -> Result<Value> {
        let mut rows = Vec::new();
        for n in 1..=ctx.params.levels {
            let r = decomp::positive_generation_check(s, n, &ctx.solver).context(&format!("positive generation of {} at level {n}", s.name()))?;
            rows.push(json!({
                "level": n,
                "sa_dim": r.dim,
                "generated": r.pass,
                "cone_span_rank": r.rank,
                "face_dim": r.face_dim,
            }));
        }
        Ok(json!({
            "name": s.name(),
            "ambient_dim": s.ambient_dim(),
            "dim": s.dim(),
            "diagonal": s.is_diagonal(),
            "levels": rows,
        }))
    };
    let mut out = Vec::new();
    for input in inputs {
        match input {
            Input::Spec(f) => {
                let mut v = describe(&ctx.spec(f)?)?;
                v["hash"] = Value::from(f.hash());
                out.push(v);
            }
            Input::Map(m) => {
                let map = ctx.map(m)?;
                let ccp = algebra::check_ccp_map(&map, ctx.params.levels, ctx.params.samples, &ctx.solver).context("ccp check")?;
                out.push(json!({
                    "map": m.name,
                    "hash": m.hash(),
                    "source": describe(&map.source)?,
                    "target": describe(&map.target)?,
                    "rank": map.rank(),
                    "ccp": to_json(&ccp),
                }));
            }
        }
    }
    Ok((json!({ "inputs": out }), false))
}

fn decompose(ctx: &Ctx, inputs: &[Input]) -> Run {
    let spec = one_spec(ctx, inputs, "decompose")?;
    let text = ctx.flags.element.as_deref().ok_or_else(|| CliError::InvalidArgument("decompose needs --element MATRIX".into()))?;
    let x = element_arg(&spec, text, "element")?;
    let mut dec = Decomposer::new(&spec, x.level(), &ctx.solver).context("facial reduction")?;
    dec.with_max_objective = true;
    match dec.decompose(&x) {
        Ok(d) => Ok((
            json!({
                "level": x.level(),
                "status": to_json(&d.status),
                "value": d.value,
                "max_value": d.max_value,
                "residual": d.residual,
                "min_eig_y": d.min_eig_y,
                "min_eig_z": d.min_eig_z,
                "y": matrix_rows(d.y.realization()),
                "z": matrix_rows(d.z.realization()),
            }),
            false,
        )),
        Err(Error::Infeasible(reason)) => Ok((
            json!({
                "level": x.level(),
                "status": "infeasible",
                "reason": reason,
                "cone_span_dim": dec.face().dim(),
                "sa_dim": dec.frame().dim(),
            }),
            true,
        )),
        Err(e) => Err(CliError::Module { context: "decompose".into(), source: e }),
    }
}

fn alpha(ctx: &Ctx, inputs: &[Input]) -> Run {
    let spec = one_spec(ctx, inputs, "alpha")?;
    let mode = if ctx.flags.exact { AlphaMode::ExactDiagonal } else { AlphaMode::Sampled };
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for n in 1..=ctx.params.levels {
        match decomp::alpha_estimate(&spec, n, ctx.params.samples, mode, &ctx.solver) {
            Ok(r) => rows.push(r),
            Err(Error::ExactUnavailable(why)) => notes.push(format!("level {n}: exact value unavailable ({why})")),
            Err(e) => return Err(CliError::Module { context: format!("alpha at level {n}"), source: e }),
        }
    }
    let negative = rows.iter().any(|r| r.alpha.is_infinite());
    if negative {
        notes.push("alpha is infinite: the level is not positively generated".into());
    }
    Ok((json!({ "mode": to_json(&mode), "rows": to_json(&rows), "notes": notes }), negative))
}

fn beta(ctx: &Ctx, inputs: &[Input]) -> Run {
    let spec = one_spec(ctx, inputs, "beta")?;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for n in 1..=ctx.params.levels {
        if ctx.flags.exact {
            match duality::exact_beta(&spec, n) {
                Ok(b) => rows.push(json!({ "level": n, "beta": to_json(&nclab_f64(b)), "exact": true })),
                Err(Error::ExactUnavailable(why)) => notes.push(format!("level {n}: exact value unavailable ({why})")),
                Err(e) => return Err(CliError::Module { context: format!("beta at level {n}"), source: e }),
            }
        } else {
            let r = duality::normality_estimate(&spec, n, ctx.params.samples, &ctx.solver).context(&format!("beta at level {n}"))?;
            rows.push(to_json(&r));
        }
    }
    Ok((json!({ "rows": rows, "notes": notes }), false))
}

/// JSON-safe float, with infinities as strings.
fn nclab_f64(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v > 0.0 {
        Value::from("inf")
    } else if v < 0.0 {
        Value::from("-inf")
    } else {
        Value::from("nan")
    }
}

fn dualizable(ctx: &Ctx, inputs: &[Input]) -> Run {
    let spec = one_spec(ctx, inputs, "dualizable")?;
    let v = duality::dualizability_verdict(&spec, VerdictOptions { levels: ctx.params.levels, samples: ctx.params.samples }, &ctx.solver)
        .context("dualizability verdict")?;
    Ok((to_json(&v), v.verdict == Verdict::NotDualizableCertified))
}

fn extension(ctx: &Ctx, inputs: &[Input]) -> Run {
    let spec = match inputs {
        [Input::Spec(s)] => Some(ctx.spec(s)?),
        [] => None,
        _ => return Err(CliError::InvalidArgument("extension takes at most one spec".into())),
    };
    let levels = ctx.params.levels;
    let need = |f: &Option<String>, name: &str| f.clone().ok_or_else(|| CliError::InvalidArgument(format!("extension needs --{name} BODY")));
    let inner_s = need(&ctx.flags.inner, "inner")?;
    let outer_s = need(&ctx.flags.outer, "outer")?;
    let inner = body_arg(&inner_s, spec.as_ref(), levels)?;
    let outer = body_arg(&outer_s, spec.as_ref(), levels)?;
    let mut rows = Vec::new();
    for n in 1..=levels {
        let e = geometry::extension_constant(&inner, &outer, n, ctx.params.samples, ctx.params.seed, &ctx.solver)
            .context(&format!("extension constant at level {n}"))?;
        let o = geometry::order_embedding_check(&inner, &outer, n, ctx.params.samples, ctx.params.seed, &ctx.solver)
            .context(&format!("order embedding at level {n}"))?;
        rows.push(json!({
            "level": n,
            "c_hat": nclab_f64(e.c_hat),
            "c_small": nclab_f64(e.c_small),
            "reciprocal_exact": e.c_hat * e.c_small == 1.0,
            "order_embedding": o.pass,
            "order_witness": o.witness,
            "extension_witness": e.witness,
        }));
    }
    Ok((json!({ "inner": inner_s, "outer": outer_s, "rows": rows }), false))
}

fn separate(ctx: &Ctx, inputs: &[Input]) -> Run {
    let spec = match inputs {
        [Input::Spec(s)] => Some(ctx.spec(s)?),
        [] => None,
        _ => return Err(CliError::InvalidArgument("separate takes at most one spec".into())),
    };
    let body_s = ctx.flags.body.clone().ok_or_else(|| CliError::InvalidArgument("separate needs --body BODY".into()))?;
    let body = body_arg(&body_s, spec.as_ref(), ctx.params.levels)?;
    let text = ctx.flags.point.as_deref().ok_or_else(|| CliError::InvalidArgument("separate needs --point COORDS".into()))?;
    let coords: Vec<f64> = serde_json::from_str(text).map_err(|e| CliError::InvalidArgument(format!("point: {e}")))?;
    let level = (1..=ctx.params.levels)
        .find(|&n| body.dim(n).is_ok_and(|d| d == coords.len()))
        .ok_or_else(|| CliError::InvalidArgument(format!("no level up to {} has body dimension {}", ctx.params.levels, coords.len())))?;
    let x = RVector::from_vec(coords);
    let cert = geometry::separate_point(&body, &x, level, ctx.params.samples, ctx.params.seed, &ctx.solver).context("separation")?;
    Ok((
        json!({
            "body": body_s,
            "level": level,
            "separated": cert.is_some(),
            "certificate": cert.map(|c| to_json(&c)),
        }),
        false,
    ))
}

fn quotient(ctx: &Ctx, inputs: &[Input]) -> Run {
    let m = match inputs {
        [Input::Map(m)] => m,
        _ => return Err(CliError::InvalidArgument("quotient takes one map file or corpus map".into())),
    };
    let map = ctx.map(m)?;
    let q = QuotientSpec::of(&map);
    let mut cosets = Vec::new();
    for (k, b) in map.source.basis().iter().enumerate() {
        let x = map.source.element_from_matrix(b, 1)?;
        let norm = algebra::quotient_norm(&q, &x, &ctx.solver).context("quotient norm")?;
        cosets.push(json!({ "basis_element": k, "norm": norm }));
    }
    let mut constants = Vec::new();
    let mut notes = Vec::new();
    for n in 1..=ctx.params.levels {
        match algebra::quotient_constant_estimate(&map, n, ctx.params.samples, &ctx.solver) {
            Ok(c) => constants.push(json!({
                "level": c.level,
                "c_primal": nclab_f64(c.c_primal),
                "c_dual": nclab_f64(c.c_dual),
                "samples": c.samples,
            })),
            Err(e @ Error::NotSurjective { .. }) => {
                notes.push(e.to_string());
                break;
            }
            Err(e) => return Err(CliError::Module { context: format!("quotient constants at level {n}"), source: e }),
        }
    }
    let ccp = algebra::check_ccp_map(&map, ctx.params.levels, ctx.params.samples, &ctx.solver).context("ccp check")?;
    Ok((
        json!({
            "map": m.name,
            "rank": map.rank(),
            "kernel_dim": q.kernel().len(),
            "kernel_selfadjoint": q.is_selfadjoint_closed(),
            "ccp": to_json(&ccp),
            "coset_norms": cosets,
            "constants": constants,
            "notes": notes,
        }),
        false,
    ))
}

fn default_element(spec: &OperatorSystemSpec, level: usize) -> Result<LevelElement> {
    let mut coeffs = vec![CMatrix::zeros(level, level); spec.dim()];
    coeffs[0] = nclab::linalg::identity(level);
    Ok(spec.element_at(level, coeffs)?)
}

fn coproduct(ctx: &Ctx, inputs: &[Input]) -> Run {
    let (s, t) = two_specs(ctx, inputs, "coproduct")?;
    let x = match &ctx.flags.element {
        Some(text) => element_arg(&s, text, "element")?,
        None => default_element(&s, 1)?,
    };
    let y = match &ctx.flags.element_t {
        Some(text) => element_arg(&t, text, "element_t")?,
        None => default_element(&t, x.level())?,
    };
    if y.level() != x.level() {
        return Err(CliError::InvalidArgument(format!("components at levels {} and {}", x.level(), y.level())));
    }
    let k_max = ctx.flags.k_max.unwrap_or(DEFAULT_K_MAX.max(x.level()));
    let cp = CoproductSpec::new(&s, &t).with_k_max(k_max);
    let restarts = ctx.flags.restarts.unwrap_or(4);
    let norm = algebra::coproduct_norm_estimate(&cp, &x, Some(&y), restarts, &ctx.solver).context("coproduct norm")?;
    let (c, cs, ct) = algebra::coproduct_order_interval_constant(&cp, 1, ctx.params.samples, &ctx.solver).context("coproduct order interval")?;
    Ok((
        json!({
            "level": x.level(),
            "x": matrix_rows(x.realization()),
            "y": matrix_rows(y.realization()),
            "positive": cp.is_positive(&x, Some(&y))?,
            "norm": to_json(&norm),
            "order_interval": { "c_hat": nclab_f64(c), "c_hat_s": nclab_f64(cs), "c_hat_t": nclab_f64(ct) },
        }),
        false,
    ))
}

fn pushout(ctx: &Ctx, inputs: &[Input]) -> Run {
    let (s, t) = two_specs(ctx, inputs, "pushout")?;
    let f = match &ctx.flags.functional {
        Some(text) => functional_arg(&s, text, "functional")?,
        None => Functional::zero(&s, 1),
    };
    let g = match &ctx.flags.functional_t {
        Some(text) => functional_arg(&t, text, "functional_t")?,
        None => Functional::zero(&t, f.level()),
    };
    let po = PushoutSpec::over_zero(&s, &t);
    let values = |h: &Functional| Value::Array(h.values().iter().map(|m| Value::from(raw_from_matrix(m).iter().map(|p| json!(p)).collect::<Vec<_>>())).collect());
    let (member, reason) = match algebra::pushout_membership(&po, &f, &g, &ctx.solver) {
        Ok(m) => (m, None),
        Err(e @ Error::NotQuasistate { .. }) => (false, Some(e.to_string())),
        Err(e) => return Err(CliError::Module { context: "pushout membership".into(), source: e }),
    };
    Ok((json!({ "level": f.level(), "member": member, "reason": reason, "f": values(&f), "g": values(&g) }), !member))
}

fn corpus_cmd(ctx: &Ctx, inputs: &[String]) -> Run {
    let ids: Vec<CorpusId> = if inputs.is_empty() {
        CorpusId::all()
    } else {
        inputs.iter().map(|a| a.strip_prefix("corpus:").unwrap_or(a).parse()).collect::<Result<Vec<_>>>()?
    };
    let mut entries = Vec::new();
    for id in ids {
        let built = id.build();
        let mut files = Vec::new();
        for (i, input) in built.iter().enumerate() {
            let fname = if built.len() == 1 { format!("{id}.json") } else { format!("{id}.{i}.json") };
            let text = input.to_canonical();
            if let Some(dir) = &ctx.flags.write {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                let path = dir.join(&fname);
                std::fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
            }
            let kind = match input {
                Input::Spec(_) => "spec",
                Input::Map(_) => "map",
            };
            files.push(json!({ "file": fname, "kind": kind, "name": input.name(), "hash": sha256_hex(text.as_bytes()) }));
        }
        entries.push(json!({ "id": id.to_string(), "description": id.description(), "files": files }));
    }
    Ok((json!({ "entries": entries }), false))
}
