//! Experiment configuration, the suite registry and the orchestrator that
//! turns a config into a [`Report`].

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::besov::{check_embedding, check_lifting, BesovParams};
use crate::ensemble::{eigenmode_probes, gaussian_probes, standard_ensemble, Probe, DEFAULT_SEED, DEFAULT_SIZE};
use crate::grid::{assemble_laplacian, build_domain, GridSpec};
use crate::interpolation::{active_blocks, interpolation_norm, verify_interpolation_identity, InterpolationCouple};
use crate::multiplier::{
    interior_blocks, verify_gaussian_bound, verify_lemma_2_1, verify_lemma_2_2, verify_resolvent_factorization,
    MultiplierParams, SymbolFamily,
};
use crate::partition::{build_partition, phi, psi, DyadicPartition};
use crate::report::{exponent, exponents, GridMeta, RatePlot, Report, Row};
use crate::semigroup::{
    boundedness_constant, default_t_seq, maximal_regularity, maximal_regularity_constant, resolved_window,
    smoothing_rows, verify_block_decay, verify_boundedness, verify_continuity, verify_equivalent_norms,
    verify_inhomog_suite, verify_weak_continuity, EquivalenceCase, Forcing, MaxRegCase, SmoothingCase, XSpace,
};
use crate::spectral::{decompose, SpectralDecomposition, ORTHO_TOL, RESIDUAL_TOL};
use crate::{besov::besov_norm_coeffs, quadrature::log_grid, Error, Result};

/// Seed override read by the CLI.
pub const SEED_ENV: &str = "BESOVLAB_SEED";

/// Largest refined grid built by default for the stability rows.
const AUTO_REFINE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    /// `(a, b)` with either `n` interior points or spacing `h`.
    Interval {
        #[serde(default = "unit_bounds")]
        bounds: (f64, f64),
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        h: Option<f64>,
    },
    /// Axis-aligned rectangle; `n` counts interior points along `x`.
    Rectangle {
        #[serde(default = "unit_box")]
        bounds: [(f64, f64); 2],
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        h: Option<f64>,
    },
    /// Mask file in the grid text format, relative to the config file.
    MaskFile { path: PathBuf },
    /// Mask text given inline.
    Mask { text: String },
}

fn unit_bounds() -> (f64, f64) {
    (0.0, 1.0)
}

fn unit_box() -> [(f64, f64); 2] {
    [(0.0, 1.0), (0.0, 1.0)]
}

fn spacing(len: f64, n: Option<usize>, h: Option<f64>) -> Result<f64> {
    match (n, h) {
        (Some(n), None) if n > 0 => Ok(len / (n + 1) as f64),
        (None, Some(h)) if h > 0.0 => Ok(h),
        _ => Err(Error::Config("domain: give exactly one of a positive `n` or `h`".into())),
    }
}

impl DomainConfig {
    pub fn interval(n: usize) -> Self {
        DomainConfig::Interval { bounds: unit_bounds(), n: Some(n), h: None }
    }

    pub fn square(m: usize) -> Self {
        DomainConfig::Rectangle { bounds: unit_box(), n: Some(m), h: None }
    }

    /// Grid spec plus the mask text when it came from a mask.
    pub fn resolve(&self, base: &Path) -> Result<(GridSpec, Option<String>)> {
        let wrap = |e: Error| Error::Config(format!("domain: {e}"));
        match self {
            DomainConfig::Interval { bounds: (a, b), n, h } => {
                Ok((GridSpec::interval(*a, *b, spacing(b - a, *n, *h)?).map_err(wrap)?, None))
            }
            DomainConfig::Rectangle { bounds: [x, y], n, h } => {
                Ok((GridSpec::rectangle(*x, *y, spacing(x.1 - x.0, *n, *h)?).map_err(wrap)?, None))
            }
            DomainConfig::MaskFile { path } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| Error::Config(format!("domain.path {}: {e}", full.display())))?;
                Ok((GridSpec::parse_mask(&text).map_err(wrap)?, Some(text)))
            }
            DomainConfig::Mask { text } => Ok((GridSpec::parse_mask(text).map_err(wrap)?, Some(text.clone()))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute slope tolerance for rate fits.
    pub slope: f64,
    /// Relative change allowed for constants under refinement.
    pub stability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { slope: 0.1, stability: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingCase {
    #[serde(with = "crate::exponent")]
    pub r: f64,
    #[serde(with = "crate::exponent")]
    pub p: f64,
    pub s: f64,
    #[serde(with = "crate::exponent")]
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakCase {
    pub s: f64,
    #[serde(with = "crate::exponent")]
    pub p: f64,
}

/// One entry of `suites`; unset parameters take the registry defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuiteSpec {
    Partition,
    Spectral,
    Smoothing {
        #[serde(default)]
        cases: Option<Vec<SmoothingCase>>,
    },
    Boundedness {
        #[serde(default)]
        cases: Option<Vec<BesovParams>>,
        #[serde(default)]
        refine: Option<bool>,
    },
    Embedding {
        #[serde(default)]
        cases: Option<Vec<EmbeddingCase>>,
        #[serde(default)]
        lifting: Option<Vec<BesovParams>>,
        #[serde(default)]
        refine: Option<bool>,
    },
    BlockDecay {
        #[serde(default, with = "crate::exponent::opt_vec")]
        p: Option<Vec<f64>>,
        #[serde(default)]
        s0: Option<Vec<f64>>,
    },
    Continuity {
        #[serde(default)]
        cases: Option<Vec<BesovParams>>,
        #[serde(default)]
        weak: Option<Vec<WeakCase>>,
    },
    Equivalence {
        #[serde(default)]
        cases: Option<Vec<EquivalenceCase>>,
        #[serde(default)]
        refine: Option<bool>,
    },
    MaximalRegularity {
        #[serde(default)]
        cases: Option<Vec<MaxRegCase>>,
        #[serde(default)]
        refine: Option<bool>,
    },
    Multiplier {
        #[serde(default)]
        families: Option<Vec<SymbolFamily>>,
        #[serde(default, with = "crate::exponent::opt_vec")]
        p: Option<Vec<f64>>,
    },
    Factorization,
    Amalgam {
        #[serde(default)]
        thetas: Option<Vec<f64>>,
    },
    Gaussian {
        #[serde(default)]
        t_over_h2: Option<Vec<f64>>,
    },
    Interpolation {
        #[serde(default)]
        couples: Option<Vec<InterpolationCouple>>,
    },
    Inhomogeneous {
        #[serde(default)]
        dilation: Option<f64>,
    },
}

/// Registry: suite name and a one-line description, in battery order.
pub const REGISTRY: &[(&str, &str)] = &[
    ("partition", "partition of unity sums to one on the spectrum"),
    ("spectral", "eigenvalues against the closed form, orthogonality, residuals"),
    ("smoothing", "log-log rate of the semigroup smoothing estimates"),
    ("boundedness", "uniform Besov bound of the semigroup, stable under refinement"),
    ("embedding", "Besov embedding and lifting constants, stable under refinement"),
    ("block_decay", "per-block exponential decay rates and small-time prefactor power"),
    ("continuity", "strong continuity at t = 0 and the weak pairing identity"),
    ("equivalence", "semigroup characterization of the Besov norm"),
    ("maximal_regularity", "space-time maximal regularity constant and single-mode oracle"),
    ("multiplier", "block multiplier ratios uniform in j"),
    ("factorization", "resolvent factorization of block multipliers"),
    ("amalgam", "amalgam-space operator bounds across cube scales"),
    ("gaussian", "heat kernel positivity and Gaussian upper bound"),
    ("interpolation", "K-functional interpolation against Besov norms"),
    ("inhomogeneous", "inhomogeneous variants on a domain with low spectrum"),
];

impl SuiteSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SuiteSpec::Partition => "partition",
            SuiteSpec::Spectral => "spectral",
            SuiteSpec::Smoothing { .. } => "smoothing",
            SuiteSpec::Boundedness { .. } => "boundedness",
            SuiteSpec::Embedding { .. } => "embedding",
            SuiteSpec::BlockDecay { .. } => "block_decay",
            SuiteSpec::Continuity { .. } => "continuity",
            SuiteSpec::Equivalence { .. } => "equivalence",
            SuiteSpec::MaximalRegularity { .. } => "maximal_regularity",
            SuiteSpec::Multiplier { .. } => "multiplier",
            SuiteSpec::Factorization => "factorization",
            SuiteSpec::Amalgam { .. } => "amalgam",
            SuiteSpec::Gaussian { .. } => "gaussian",
            SuiteSpec::Interpolation { .. } => "interpolation",
            SuiteSpec::Inhomogeneous { .. } => "inhomogeneous",
        }
    }

    /// The suite with every parameter left at its default.
    pub fn by_name(name: &str) -> Result<Self> {
        serde_json::from_value(json!({ "suite": name })).map_err(|_| {
            let known: Vec<&str> = REGISTRY.iter().map(|r| r.0).collect();
            Error::Config(format!("unknown suite `{name}` (known: {})", known.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_size")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub suites: Vec<SuiteSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_alpha() -> Vec<f64> {
    vec![2.0, 1.0]
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_size() -> usize {
    DEFAULT_SIZE
}

impl ExperimentConfig {
    pub fn new(domain: DomainConfig, suites: Vec<SuiteSpec>) -> Self {
        Self {
            domain,
            alpha: default_alpha(),
            seed: DEFAULT_SEED,
            ensemble_size: DEFAULT_SIZE,
            tolerances: Tolerances::default(),
            suites,
            output_dir: None,
        }
    }

    /// Every registered suite with defaults on the unit interval.
    pub fn default_battery(n: usize) -> Self {
        let suites = REGISTRY.iter().map(|(name, _)| SuiteSpec::by_name(name).expect("registry")).collect();
        Self::new(DomainConfig::interval(n), suites)
    }

    /// Parses JSON; unknown keys and unknown suite names are errors naming
    /// the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(list) = raw.get("suites").and_then(Value::as_array) {
            for (i, s) in list.iter().enumerate() {
                match s.get("suite").and_then(Value::as_str) {
                    Some(name) if !REGISTRY.iter().any(|r| r.0 == name) => {
                        return Err(Error::Config(format!("suites[{i}].suite: unknown suite `{name}`")));
                    }
                    None => return Err(Error::Config(format!("suites[{i}]: missing `suite`"))),
                    _ => {}
                }
            }
        }
        let cfg: Self = serde_json::from_value(raw).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    /// Applies `BESOVLAB_SEED` if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not a u64")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() || self.alpha.iter().any(|&a| !(a > 0.0 && a <= 2.0)) {
            return Err(Error::Config(format!("alpha: need values in (0, 2], got {:?}", self.alpha)));
        }
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size: must be positive".into()));
        }
        let t = self.tolerances;
        if !(t.slope > 0.0 && t.stability > 0.0) {
            return Err(Error::Config("tolerances: must be positive".into()));
        }
        if self.suites.is_empty() {
            return Err(Error::Config("suites: empty".into()));
        }
        let bad = |i: usize, e: Error| Error::Config(format!("suites[{i}]: {e}"));
        for (i, s) in self.suites.iter().enumerate() {
            match s {
                SuiteSpec::Smoothing { cases: Some(c) } => c.iter().try_for_each(|c| c.validate()),
                SuiteSpec::Boundedness { cases: Some(c), .. } => c.iter().try_for_each(|c| c.validate()),
                SuiteSpec::Equivalence { cases: Some(c), .. } => c.iter().try_for_each(|c| c.validate()),
                SuiteSpec::Interpolation { couples: Some(c) } => c.iter().try_for_each(|c| c.validate()),
                SuiteSpec::Inhomogeneous { dilation: Some(d) } if !(*d > 0.0) => {
                    Err(Error::InvalidParameter(format!("dilation {d}")))
                }
                _ => Ok(()),
            }
            .map_err(|e| bad(i, e))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical config JSON and any mask text.
    pub fn hash(&self, mask: Option<&str>) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_string(self).expect("config serializes"));
        if let Some(m) = mask {
            h.update(b"\0mask\0");
            h.update(m);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Domain, decomposition, partition and probes shared by every job.
pub struct Context {
    pub spec: GridSpec,
    pub dec: SpectralDecomposition,
    pub part: DyadicPartition,
    pub probes: Vec<Probe>,
    seed: u64,
    size: usize,
    refined: OnceLock<std::result::Result<Arc<Context>, Error>>,
    dilated: OnceLock<std::result::Result<Arc<Context>, Error>>,
}

impl Context {
    pub fn build(spec: GridSpec, size: usize, seed: u64) -> Result<Self> {
        let domain = build_domain(spec.clone())?;
        let dec = decompose(&assemble_laplacian(&domain))?;
        let part = build_partition(&dec);
        let probes = standard_ensemble(&dec, size, seed);
        Ok(Self { spec, dec, part, probes, seed, size, refined: OnceLock::new(), dilated: OnceLock::new() })
    }

    /// The same domain at half the spacing (`n -> 2n + 1` in 1-D).
    pub fn refined(&self) -> Result<Arc<Context>> {
        self.refined.get_or_init(|| Context::build(self.spec.refined(), self.size, self.seed).map(Arc::new)).clone()
    }

    /// The domain dilated by `factor`; cached for the first factor asked.
    pub fn dilated(&self, factor: f64) -> Result<Arc<Context>> {
        self.dilated
            .get_or_init(|| Context::build(self.spec.scaled(factor)?, self.size, self.seed).map(Arc::new))
            .clone()
    }

    fn gaussians(&self) -> Vec<Probe> {
        gaussian_probes(self.dec.n(), self.size, self.seed)
    }

    fn auto_refine(&self) -> bool {
        2 * self.dec.n() < AUTO_REFINE_LIMIT
    }
}

type Output = (Vec<Row>, Vec<RatePlot>);
type JobFn = Box<dyn Fn(&Context) -> Result<Output> + Send + Sync>;

struct Job {
    suite: &'static str,
    params: Value,
    run: JobFn,
}

fn job(suite: &'static str, params: Value, f: impl Fn(&Context) -> Result<Output> + Send + Sync + 'static) -> Job {
    Job { suite, params, run: Box::new(f) }
}

fn rows(r: Vec<Row>) -> Output {
    (r, Vec::new())
}

/// Wall-clock seconds per suite; kept out of the report so that reports
/// stay byte-identical across runs.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timing {
    pub setup: f64,
    pub suites: Vec<(String, f64)>,
    pub total: f64,
}

/// Runs every selected suite with `jobs` worker threads (0: rayon default).
pub fn run_suite(cfg: &ExperimentConfig, base: &Path, jobs: usize) -> Result<(Report, Timing)> {
    cfg.validate()?;
    let (spec, mask) = cfg.domain.resolve(base)?;
    let start = Instant::now();
    let mut report = Report::new(cfg.hash(mask.as_deref()));
    report.grid = Some(GridMeta { dim: spec.dim(), n: spec.mask().iter().filter(|&&m| m).count(), h: spec.h() });
    let ctx = Context::build(spec, cfg.ensemble_size, cfg.seed)?;
    let mut timing = Timing { setup: start.elapsed().as_secs_f64(), ..Timing::default() };

    let list: Vec<Job> = cfg.suites.iter().flat_map(|s| plan(s, cfg, &ctx)).collect();
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    let results: Vec<(Output, f64)> = pool.install(|| {
        list.par_iter()
            .map(|j| {
                let t0 = Instant::now();
                let out = match catch_unwind(AssertUnwindSafe(|| (j.run)(&ctx))) {
                    Ok(Ok(out)) => out,
                    Ok(Err(e)) => rows(vec![Row::failed(j.suite, j.params.clone(), e.to_string())]),
                    Err(p) => {
                        let msg = p
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "panic".into());
                        rows(vec![Row::failed(j.suite, j.params.clone(), format!("panic: {msg}"))])
                    }
                };
                (out, t0.elapsed().as_secs_f64())
            })
            .collect()
    });
    for (j, ((r, p), secs)) in list.iter().zip(results) {
        report.rows.extend(r);
        report.plots.extend(p);
        match timing.suites.last_mut() {
            Some((name, t)) if name == j.suite => *t += secs,
            _ => timing.suites.push((j.suite.to_string(), secs)),
        }
    }
    timing.total = start.elapsed().as_secs_f64();
    Ok((report, timing))
}

fn plan(s: &SuiteSpec, cfg: &ExperimentConfig, ctx: &Context) -> Vec<Job> {
    let name = s.name();
    let alphas = cfg.alpha.clone();
    let tol = cfg.tolerances;
    let dim = ctx.spec.dim();
    let mut out = Vec::new();
    match s.clone() {
        SuiteSpec::Partition => out.push(job(name, json!({}), |c| Ok(rows(vec![partition_row(c)])))),
        SuiteSpec::Spectral => out.push(job(name, json!({}), |c| spectral_rows(c).map(rows))),
        SuiteSpec::Smoothing { cases } => {
            // defaults only include cases whose time window this grid resolves
            let cases = cases.unwrap_or_else(|| {
                let all = default_smoothing(dim, &alphas);
                all.into_iter().filter(|c| resolved_window(&ctx.dec, c.alpha, c.kappa).is_ok()).collect()
            });
            for case in cases {
                out.push(job(name, json!({ "case": case }), move |c| {
                    let (r, p) = smoothing_rows("smoothing.slope", &c.dec, &c.part, &case, &c.probes, tol.slope);
                    Ok((r, p.into_iter().collect()))
                }));
            }
        }
        SuiteSpec::Boundedness { cases, refine } => {
            let refine = refine.unwrap_or(ctx.auto_refine());
            let cases = cases.unwrap_or_else(|| {
                vec![
                    BesovParams::homogeneous(0.0, 2.0, 2.0),
                    BesovParams::homogeneous(0.0, 1.0, 1.0),
                    BesovParams::homogeneous(1.0, f64::INFINITY, f64::INFINITY),
                    BesovParams::homogeneous(-0.5, 1.0, f64::INFINITY),
                ]
            });
            for prm in cases {
                for &alpha in &alphas {
                    out.push(job(name, json!({ "besov": prm, "alpha": alpha }), move |c| {
                        let ts = |c: &Context| log_grid(1e-6 / c.dec.lambda_min(), 1.0 / c.dec.lambda_min(), 2);
                        let mut r = verify_boundedness(&c.dec, &c.part, &prm, alpha, &ts(c), &c.probes)?;
                        if refine {
                            let f = |c: &Context| boundedness_constant(&c.dec, &c.part, &prm, alpha, &ts(c), &c.probes);
                            r.push(stability(
                                "boundedness.stability",
                                json!({ "besov": prm, "alpha": alpha }),
                                c,
                                f,
                                tol,
                            )?);
                        }
                        Ok(rows(r))
                    }));
                }
            }
        }
        SuiteSpec::Embedding { cases, lifting, refine } => {
            let refine = refine.unwrap_or(ctx.auto_refine());
            let cases = cases.unwrap_or_else(|| {
                vec![
                    EmbeddingCase { r: 1.0, p: 2.0, s: 0.0, q: 2.0 },
                    EmbeddingCase { r: 1.0, p: f64::INFINITY, s: 0.0, q: 1.0 },
                    EmbeddingCase { r: 2.0, p: f64::INFINITY, s: 0.5, q: 2.0 },
                ]
            });
            for e in cases {
                out.push(job(name, json!({ "embedding": e }), move |c| {
                    let f = |c: &Context| probe_sup(c, |f| check_embedding(&c.dec, &c.part, f, e.r, e.p, e.s, e.q));
                    let p = json!({ "embedding": e, "n": c.dec.n() });
                    let mut r = vec![Row::finite("embedding.sup", p.clone(), f(c)?)];
                    if refine {
                        r.push(stability("embedding.stability", p, c, f, tol)?);
                    }
                    Ok(rows(r))
                }));
            }
            let lifting = lifting.unwrap_or_else(|| {
                vec![BesovParams::homogeneous(0.0, 1.0, 1.0), BesovParams::homogeneous(0.5, f64::INFINITY, 2.0)]
            });
            for prm in lifting {
                for &alpha in &alphas {
                    out.push(job(name, json!({ "lifting": prm, "alpha": alpha }), move |c| {
                        let f = |c: &Context| probe_sup(c, |f| check_lifting(&c.dec, &c.part, f, alpha, &prm));
                        let p = json!({ "lifting": prm, "alpha": alpha, "n": c.dec.n() });
                        let mut r = vec![Row::finite("lifting.sup", p.clone(), f(c)?)];
                        if refine {
                            r.push(stability("lifting.stability", p, c, f, tol)?);
                        }
                        Ok(rows(r))
                    }));
                }
            }
        }
        SuiteSpec::BlockDecay { p, s0 } => {
            let ps = p.unwrap_or_else(|| vec![1.0, 2.0, f64::INFINITY]);
            let s0s = s0.unwrap_or_else(|| vec![0.0, 1.0]);
            for &alpha in &alphas {
                for &p in &ps {
                    for &s0 in &s0s {
                        out.push(job(name, json!({ "alpha": alpha, "p": exponent(p), "s0": s0 }), move |c| {
                            verify_block_decay(&c.dec, &c.part, alpha, p, s0, &c.probes).map(rows)
                        }));
                    }
                }
            }
        }
        SuiteSpec::Continuity { cases, weak } => {
            let cases = cases.unwrap_or_else(|| {
                vec![
                    BesovParams::homogeneous(0.0, 2.0, 2.0),
                    BesovParams::homogeneous(0.5, 1.0, 1.0),
                    BesovParams::homogeneous(-0.5, f64::INFINITY, 2.0),
                ]
            });
            let weak = weak.unwrap_or_else(|| vec![WeakCase { s: 0.0, p: 2.0 }, WeakCase { s: 0.5, p: 4.0 }]);
            for &alpha in &alphas {
                for prm in cases.clone() {
                    out.push(job(name, json!({ "besov": prm, "alpha": alpha }), move |c| {
                        let ts = default_t_seq(&c.dec, alpha);
                        let mut r = Vec::new();
                        for probe in continuity_probes(c) {
                            r.extend(verify_continuity(&c.dec, &c.part, &probe.coeffs, &prm, alpha, &ts)?);
                        }
                        Ok(rows(r))
                    }));
                }
                for w in weak.clone() {
                    out.push(job(name, json!({ "weak": w, "alpha": alpha }), move |c| {
                        let ts = default_t_seq(&c.dec, alpha);
                        let g = c.gaussians();
                        let (f, h) = (&g[0].coeffs, &g[1 % g.len()].coeffs);
                        verify_weak_continuity(&c.dec, &c.part, f, h, w.s, w.p, alpha, &ts, true).map(rows)
                    }));
                }
            }
        }
        SuiteSpec::Equivalence { cases, refine } => {
            let refine = refine.unwrap_or(ctx.auto_refine());
            let cases = cases.unwrap_or_else(|| default_equivalence(&alphas));
            for case in cases {
                out.push(job(name, json!({ "case": case }), move |c| {
                    let probes = |c: &Context| {
                        let mut p = c.gaussians();
                        p.extend(eigenmode_probes(c.dec.n()));
                        p
                    };
                    let (_, mut r) = verify_equivalent_norms(&c.dec, &c.part, &probes(c), &case)?;
                    if refine {
                        let f = |c: &Context| verify_equivalent_norms(&c.dec, &c.part, &probes(c), &case).map(|x| x.0);
                        r.push(stability("equivalence.stability", json!({ "case": case }), c, f, tol)?);
                    }
                    Ok(rows(r))
                }));
            }
        }
        SuiteSpec::MaximalRegularity { cases, refine } => {
            let refine = refine.unwrap_or(ctx.auto_refine());
            let cases = cases.unwrap_or_else(|| {
                let inf = f64::INFINITY;
                [(1.0, 1.0), (2.0, 2.0), (inf, inf), (1.0, inf)]
                    .iter()
                    .map(|&(p, q)| MaxRegCase::new(0.0, p, q, alphas[0]))
                    .collect()
            });
            for case in cases {
                out.push(job(name, json!({ "case": case }), move |c| {
                    let f = |c: &Context| maximal_regularity_constant(&c.dec, &c.part, &c.gaussians(), &case);
                    let p = json!({ "case": case, "n": c.dec.n() });
                    let mut r = vec![Row::finite("maximal_regularity.constant", p.clone(), f(c)?)];
                    if refine {
                        r.push(stability("maximal_regularity.stability", p, c, f, tol)?);
                    }
                    if case.homogeneous && case.horizon.is_none() {
                        r.push(single_mode_maxreg(&case)?);
                    }
                    Ok(rows(r))
                }));
            }
        }
        SuiteSpec::Multiplier { families, p } => {
            let ps = p.unwrap_or_else(|| vec![1.0, 2.0, f64::INFINITY]);
            let families = families.unwrap_or_else(|| {
                let mut f = vec![SymbolFamily::Identity];
                for &alpha in &alphas {
                    f.push(SymbolFamily::ScaledSemigroup { alpha });
                    f.push(SymbolFamily::Semigroup { t: if alpha >= 2.0 { 1e-3 } else { 1e-4 }, alpha });
                }
                f
            });
            for fam in families {
                let ps = ps.clone();
                out.push(job(name, json!({ "family": fam, "p": exponents(&ps) }), move |c| {
                    let prm = MultiplierParams::defaults(c.spec.dim());
                    verify_lemma_2_1(&c.dec, &c.part, fam, &[], &ps, &prm).map(rows)
                }));
            }
        }
        SuiteSpec::Factorization => out.push(job(name, json!({}), |c| factorization_rows(c).map(rows))),
        SuiteSpec::Amalgam { thetas } => {
            let thetas = thetas.unwrap_or_else(|| (0..=5).map(|j| 4f64.powi(-j)).collect());
            out.push(job(name, json!({ "theta": thetas }), move |c| {
                let prm = MultiplierParams::defaults(c.spec.dim());
                verify_lemma_2_2(&c.dec, &thetas, &prm, |x| (-x * x / 2.0).exp()).map(rows)
            }));
        }
        SuiteSpec::Gaussian { t_over_h2 } => {
            let ratios = t_over_h2.unwrap_or_else(|| vec![1.0, 4.0, 16.0, 64.0]);
            out.push(job(name, json!({ "t_over_h2": ratios }), move |c| {
                let h2 = c.spec.h().powi(2);
                let mut ts: Vec<f64> = ratios.iter().map(|r| r * h2).collect();
                let ev = c.dec.eigenvalues();
                if ev.len() > 1 {
                    ts.push(10.0 / (ev[1] - ev[0]));
                }
                verify_gaussian_bound(&c.dec, &ts).map(rows)
            }));
        }
        SuiteSpec::Interpolation { couples } => {
            let couples = couples.unwrap_or_else(default_couples);
            for cp in couples {
                out.push(job(name, json!({ "couple": cp }), move |c| {
                    let brute = brute_probes(c, 12);
                    let mut r = verify_interpolation_identity(&c.dec, &c.part, &c.probes, &brute, &cp)?;
                    if cp.homogeneous {
                        r.extend(single_block_interpolation(&cp)?);
                    }
                    Ok(rows(r))
                }));
                let inh = cp.inhomogeneous();
                out.push(job(name, json!({ "couple": inh }), move |c| {
                    let d = c.dilated(4.0)?;
                    let brute = brute_probes(&d, 12);
                    verify_interpolation_identity(&d.dec, &d.part, &d.probes, &brute, &inh).map(rows)
                }));
            }
        }
        SuiteSpec::Inhomogeneous { dilation } => {
            let factor = dilation.unwrap_or(4.0);
            out.push(job(name, json!({ "dilation": factor }), move |c| {
                let d = c.dilated(factor)?;
                verify_inhomog_suite(&d.dec, &d.part, &d.probes, tol.slope)
            }));
        }
    }
    out
}

fn default_smoothing(dim: usize, alphas: &[f64]) -> Vec<SmoothingCase> {
    let inf = f64::INFINITY;
    let all = if dim == 1 {
        vec![
            SmoothingCase::lp_gain(2.0, 1.0, inf),
            SmoothingCase::derivative_gain(1.0, 2.0, 2.0, 1.0),
            SmoothingCase::derivative_gain(2.0, 2.0, inf, 1.0),
        ]
    } else {
        vec![SmoothingCase::lp_gain(2.0, 1.0, inf), SmoothingCase::lp_gain(1.0, 2.0, inf)]
    };
    all.into_iter().filter(|c| alphas.contains(&c.alpha)).collect()
}

fn default_equivalence(alphas: &[f64]) -> Vec<EquivalenceCase> {
    let inf = f64::INFINITY;
    let all = vec![
        EquivalenceCase::new(2.0, 0.5, 1.0, 2.0, 2.0, XSpace::Lp),
        EquivalenceCase::new(2.0, 0.5, 1.0, 2.0, 2.0, XSpace::Besov0 { r: 2.0 }),
        EquivalenceCase::new(1.0, 0.5, 1.0, 1.0, 1.0, XSpace::Lp),
        EquivalenceCase::new(2.0, -0.5, 1.0, inf, inf, XSpace::Besov0 { r: 1.0 }),
    ];
    all.into_iter().filter(|c| alphas.contains(&c.alpha)).collect()
}

fn default_couples() -> Vec<InterpolationCouple> {
    let inf = f64::INFINITY;
    [
        (2.0, (0.0, 2.0), (1.0, 1.0), 0.3, 2.0),
        (1.0, (-1.0, 1.0), (1.0, inf), 0.25, 1.0),
        (inf, (0.0, inf), (2.0, 1.0), 0.5, inf),
    ]
    .iter()
    .map(|&(p, a, b, th, q)| InterpolationCouple::new(p, a, b, th, q).expect("valid default couple"))
    .collect()
}

/// Largest ratio over the standard ensemble.
fn probe_sup(c: &Context, f: impl Fn(&crate::grid::Field) -> Result<f64>) -> Result<f64> {
    c.probes.iter().try_fold(0.0f64, |m, p| Ok(m.max(f(&p.field(&c.dec))?)))
}

/// `|C(refined) / C - 1| <= tol`.
fn stability(
    suite: &str,
    params: Value,
    c: &Context,
    f: impl Fn(&Context) -> Result<f64>,
    tol: Tolerances,
) -> Result<Row> {
    let fine = c.refined()?;
    let (a, b) = (f(c)?, f(&fine)?);
    Ok(Row::close(suite, params, b / a, 1.0, tol.stability).with_note(format!(
        "n {} -> {}: {a:.6} -> {b:.6}",
        c.dec.n(),
        fine.dec.n()
    )))
}

fn continuity_probes(c: &Context) -> Vec<Probe> {
    let mut p: Vec<Probe> = c.gaussians().into_iter().take(2).collect();
    p.push(c.probes.last().expect("ensemble is never empty").clone());
    p
}

/// Gaussian probes restricted to the lowest `max_blocks` active blocks.
fn brute_probes(c: &Context, max_blocks: usize) -> Vec<Probe> {
    c.gaussians()
        .into_iter()
        .take(3)
        .map(|mut p| {
            let blocks = active_blocks(&c.dec, &c.part, &p.coeffs);
            if blocks.len() > max_blocks {
                // keep eigenvalues whose every touching block is among the lowest ones
                let top = blocks[max_blocks - 1];
                let cut = 4f64.powi(top - 1);
                for (k, &lam) in c.dec.eigenvalues().iter().enumerate() {
                    if lam > cut {
                        p.coeffs[k] = 0.0;
                    }
                }
            }
            p
        })
        .collect()
}

fn partition_row(c: &Context) -> Row {
    let ev = c.dec.eigenvalues();
    let top = (c.dec.lambda_max().sqrt().log2().ceil() as i32) + 2;
    let bottom = (c.dec.lambda_min().sqrt().log2().floor() as i32) - 2;
    let mut full: f64 = 0.0;
    let mut low: f64 = 0.0;
    for &lam in ev {
        let x = lam.sqrt();
        let all: f64 = (bottom..=top).map(|j| phi(j, x)).sum();
        let high: f64 = (1..=top.max(1)).map(|j| phi(j, x)).sum();
        full = full.max((all - 1.0).abs());
        low = low.max((psi(lam) + high - 1.0).abs());
    }
    Row::at_most("partition.exactness", json!({ "n": c.dec.n(), "j": [bottom, top] }), full.max(low), 1e-12)
        .with_note(format!("homogeneous {full:.3e}, inhomogeneous {low:.3e}"))
}

/// Closed-form lattice eigenvalues when the mask fills its bounding box.
pub fn box_eigenvalues(spec: &GridSpec) -> Option<Vec<f64>> {
    if !spec.mask().iter().all(|&m| m) {
        return None;
    }
    let h = spec.h();
    let shape = spec.shape();
    let axis = |m: usize| -> Vec<f64> {
        (1..=m)
            .map(|k| 4.0 / (h * h) * (k as f64 * std::f64::consts::PI / (2.0 * (m + 1) as f64)).sin().powi(2))
            .collect()
    };
    let mut ev = axis(shape[0]);
    if spec.dim() == 2 {
        let ey = axis(shape[1]);
        ev = ev.iter().flat_map(|a| ey.iter().map(move |b| a + b)).collect();
    }
    ev.sort_by(f64::total_cmp);
    Some(ev)
}

fn spectral_rows(c: &Context) -> Result<Vec<Row>> {
    let domain = c.dec.domain().clone();
    let q = c.dec.quality(&assemble_laplacian(&domain));
    let p = json!({ "n": c.dec.n(), "dim": c.spec.dim() });
    let mut r = vec![
        Row::at_most("spectral.orthogonality", p.clone(), q.max_orthogonality_error, ORTHO_TOL),
        Row::at_most("spectral.residual", p.clone(), q.max_residual, RESIDUAL_TOL),
    ];
    if let Some(exact) = box_eigenvalues(&c.spec) {
        let dev = exact.iter().zip(c.dec.eigenvalues()).map(|(a, b)| ((a - b) / a).abs()).fold(0.0, f64::max);
        r.push(Row::at_most("spectral.closed_form", p.clone(), dev, 1e-8));
        let pi2 = std::f64::consts::PI.powi(2);
        let cont: f64 = c.spec.bounding_box().iter().map(|(a, b)| pi2 / (b - a).powi(2)).sum();
        r.push(Row::close("spectral.lambda_min", p, c.dec.lambda_min() / cont, 1.0, 0.01));
    }
    Ok(r)
}

fn factorization_rows(c: &Context) -> Result<Vec<Row>> {
    let prm = MultiplierParams::defaults(c.spec.dim());
    let mut r = Vec::new();
    for j in interior_blocks(&c.dec, &c.part) {
        for (name, g) in [("identity", (|_| 1.0) as fn(f64) -> f64), ("exp", |x: f64| (-x).exp())] {
            let (dev, scale) = verify_resolvent_factorization(&c.dec, g, j, &prm)?;
            let rel = if scale > 0.0 { dev / scale } else { dev };
            r.push(Row::at_most("factorization.deviation", json!({ "g": name, "j": j }), rel, 1e-8));
        }
    }
    Ok(r)
}

/// An interval of `n` cells whose mode `k` has eigenvalue exactly `4^j0`.
pub fn single_block_interval(j0: i32, n: usize, k: usize) -> Result<GridSpec> {
    let h = 2.0 * (((k + 1) as f64) * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin() / 2f64.powi(j0);
    GridSpec::interval(0.0, (n + 1) as f64 * h, h)
}

fn unit_mode(n: usize, k: usize) -> Vec<f64> {
    let mut c = vec![0.0; n];
    c[k] = 1.0;
    c
}

fn single_mode_maxreg(case: &MaxRegCase) -> Result<Row> {
    let (n, k) = (7, 3);
    let c = Context::build(single_block_interval(3, n, k)?, 1, 0)?;
    let r = maximal_regularity(&c.dec, &c.part, &unit_mode(n, k), Forcing::None, case)?;
    let expect = if case.q.is_infinite() { 1.0 } else { case.q.powf(-1.0 / case.q) };
    Ok(Row::close(
        "maximal_regularity.single_mode",
        json!({ "case": case, "lambda": 64.0 }),
        r.ratio() / expect,
        1.0,
        1e-6,
    ))
}

fn single_block_interpolation(cp: &InterpolationCouple) -> Result<Vec<Row>> {
    let (n, k) = (15, 5);
    let expect = cp.single_block_constant();
    let mut r = Vec::new();
    let mut seen = Vec::new();
    for j0 in 2..=6 {
        let c = Context::build(single_block_interval(j0, n, k)?, 1, 0)?;
        let e = unit_mode(n, k);
        let v = interpolation_norm(&c.dec, &c.part, &e, cp)? / besov_norm_coeffs(&c.dec, &c.part, &e, &cp.target());
        seen.push(v);
        r.push(Row::close("interpolation.single_block", json!({ "couple": cp, "j0": j0 }), v / expect, 1.0, 1e-6));
    }
    let max = seen.iter().cloned().fold(0.0, f64::max);
    let min = seen.iter().cloned().fold(f64::INFINITY, f64::min);
    r.push(Row::at_most(
        "interpolation.single_block_spread",
        json!({ "couple": cp, "j0": [2, 6] }),
        max / min - 1.0,
        0.01,
    ));
    Ok(r)
}

/// Writes the report files plus `timing.json`.
pub fn emit_all(report: &Report, timing: &Timing, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files = report.emit(dir)?;
    let t = dir.join("timing.json");
    std::fs::write(&t, serde_json::to_string_pretty(timing).expect("timing serializes") + "\n")?;
    files.push(t);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(suite: &str) -> String {
        format!(r#"{{"domain": {{"kind": "interval", "n": 63}}, "suites": [{{"suite": "{suite}"}}]}}"#)
    }

    #[test]
    fn minimal_partition_config() {
        let cfg = ExperimentConfig::from_json(&minimal("partition")).unwrap();
        let (rep, _) = run_suite(&cfg, Path::new("."), 1).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert!(rep.all_pass(), "{:?}", rep.rows);
    }

    #[test]
    fn unknown_suite_names_the_key() {
        let err = ExperimentConfig::from_json(&minimal("nonsense")).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("suites[0]") && m.contains("nonsense")), "{err}");
        let err = ExperimentConfig::from_json(r#"{"domain": {"kind": "interval", "n": 7}, "suites": [], "bogus": 1}"#)
            .unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn registry_round_trips() {
        for (name, _) in REGISTRY {
            assert_eq!(SuiteSpec::by_name(name).unwrap().name(), *name);
        }
    }

    #[test]
    fn closed_form_square() {
        let spec = GridSpec::unit_square(5).unwrap();
        let c = Context::build(spec.clone(), 2, 1).unwrap();
        let exact = box_eigenvalues(&spec).unwrap();
        for (a, b) in exact.iter().zip(c.dec.eigenvalues()) {
            assert!(((a - b) / a).abs() < 1e-10);
        }
    }

    #[test]
    fn hash_tracks_seed() {
        let mut cfg = ExperimentConfig::from_json(&minimal("partition")).unwrap();
        let a = cfg.hash(None);
        cfg.seed += 1;
        assert_ne!(a, cfg.hash(None));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn failing_job_becomes_a_row() {
        let cfg = ExperimentConfig::from_json(
            r#"{"domain": {"kind": "interval", "n": 15}, "suites": [
                {"suite": "amalgam", "thetas": [-1.0]}, {"suite": "partition"}]}"#,
        )
        .unwrap();
        let (rep, _) = run_suite(&cfg, Path::new("."), 2).unwrap();
        assert!(!rep.rows[0].pass);
        assert_eq!(rep.rows.last().unwrap().suite, "partition.exactness");
        assert!(rep.rows.last().unwrap().pass);
    }
}
