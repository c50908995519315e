//! End-to-end driver: one `(model, spec)` instance, counterexample files, and
//! the batch harness.
//!
//! Per instance the steps are: load the model, parse the specification, bail
//! out with `unknown` on disjunctions over inputs, extract the input box,
//! estimate output bounds, then decide.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_traits::ToPrimitive;
use thiserror::Error;
use tracing::{debug, info};

use crate::bounds_engine::{
    estimate_output_bounds, BoundsCache, EstimateConfig, Provenance, DEFAULT_SAMPLES_PER_INPUT,
};
use crate::checker::{decide, eval_point, UnknownReason, Verdict};
use crate::onnx_runtime::{load_network, Network};
use crate::optimizer::OptConfig;
use crate::spec_parser::sexpr::{read_all, SExpr};
use crate::spec_parser::{
    extract_input_box, has_complex_input_disjunction, parse_numeral, parse_spec, SpecFile, VarKind, Variable,
};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub samples_per_input: usize,
    pub optimizer: OptConfig,
    pub cache_dir: Option<PathBuf>,
    /// Soft limit, checked between pipeline stages.
    pub timeout: Option<Duration>,
    pub ce_out: Option<PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: DEFAULT_SEED,
            samples_per_input: DEFAULT_SAMPLES_PER_INPUT,
            optimizer: OptConfig::default(),
            cache_dir: None,
            timeout: None,
            ce_out: None,
        }
    }
}

impl VerifyOptions {
    fn estimate_config(&self) -> EstimateConfig {
        EstimateConfig {
            samples_per_input: self.samples_per_input,
            optimizer: self.optimizer,
        }
    }
}

/// Outcome of one instance.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub model: PathBuf,
    pub spec: PathBuf,
    pub verdict: Verdict,
    pub wall_time: f64,
    pub seed: u64,
    pub provenance: Option<Provenance>,
    pub ce_path: Option<PathBuf>,
    pub diagnostic: Option<String>,
    /// A file could not be read or written.
    pub io_failure: bool,
}

struct Deadline(Option<Instant>);

impl Deadline {
    fn expired(&self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }
}

/// Result of the in-memory pipeline.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub verdict: Verdict,
    pub provenance: Option<Provenance>,
    pub diagnostic: Option<String>,
}

impl PipelineOutcome {
    fn unknown(reason: UnknownReason, diagnostic: impl Into<String>) -> Self {
        PipelineOutcome {
            verdict: Verdict::Unknown(reason),
            provenance: None,
            diagnostic: Some(diagnostic.into()),
        }
    }
}

/// Runs the verdict pipeline on an already loaded network and specification.
pub fn verify_loaded(
    net: &Network,
    spec: &SpecFile,
    opts: &VerifyOptions,
    cache: Option<&BoundsCache>,
) -> PipelineOutcome {
    let deadline = Deadline(opts.timeout.map(|t| Instant::now() + t));
    run_stages(net, spec, opts, cache, &deadline)
}

fn run_stages(
    net: &Network,
    spec: &SpecFile,
    opts: &VerifyOptions,
    cache: Option<&BoundsCache>,
    deadline: &Deadline,
) -> PipelineOutcome {
    if spec.input_count != net.input_dim() || spec.output_count != net.output_dim() {
        return PipelineOutcome::unknown(
            UnknownReason::InvalidSpec,
            format!(
                "specification declares {} inputs / {} outputs but the model has {} / {}",
                spec.input_count,
                spec.output_count,
                net.input_dim(),
                net.output_dim()
            ),
        );
    }
    if has_complex_input_disjunction(spec) {
        return PipelineOutcome::unknown(
            UnknownReason::ComplexDisjunction,
            "specification has a disjunction over input constraints",
        );
    }
    let bounds = match extract_input_box(spec) {
        Ok(b) => b,
        Err(e) => return PipelineOutcome::unknown(UnknownReason::InvalidSpec, e.to_string()),
    };
    if deadline.expired() {
        return PipelineOutcome::unknown(UnknownReason::Timeout, "timeout before sampling");
    }
    let estimate = match estimate_output_bounds(net, &bounds, opts.seed, &opts.estimate_config(), cache) {
        Ok(e) => e,
        Err(e) => return PipelineOutcome::unknown(UnknownReason::UnsupportedModel, e.to_string()),
    };
    debug!(bounds = ?estimate.bounds.intervals(), provenance = ?estimate.bounds.provenance, "estimated output bounds");
    if deadline.expired() {
        return PipelineOutcome::unknown(UnknownReason::Timeout, "timeout after bound estimation");
    }
    let verdict = decide(
        spec,
        net,
        &bounds,
        &estimate.bounds,
        &estimate.samples,
        estimate.outputs.as_deref(),
    );
    PipelineOutcome {
        verdict,
        provenance: Some(estimate.bounds.provenance),
        diagnostic: None,
    }
}

/// Renders `((X_0 v) ... (Y_0 w) ...)` with shortest round-trip decimals.
pub fn format_counterexample(x: &[f64], y: &[f64]) -> String {
    let mut lines = Vec::with_capacity(x.len() + y.len());
    for (i, v) in x.iter().enumerate() {
        lines.push(format!("(X_{i} {v})"));
    }
    for (j, v) in y.iter().enumerate() {
        lines.push(format!("(Y_{j} {v})"));
    }
    format!("({})\n", lines.join("\n "))
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CounterexampleError {
    #[error("counterexample syntax: {0}")]
    Syntax(String),
    #[error("counterexample is missing {0}")]
    Missing(String),
}

fn ce_value(expr: &SExpr) -> Option<f64> {
    match expr {
        SExpr::Atom(text, _) => parse_numeral(text)?.to_f64(),
        SExpr::List(items, _) => match &items[..] {
            [op, inner] if op.as_atom() == Some("-") => ce_value(inner).map(|v| -v),
            _ => None,
        },
    }
}

/// Parses a counterexample assignment. Returns `(x, y)`; `y` is empty when
/// the file lists no outputs.
pub fn parse_counterexample(text: &str, inputs: usize) -> Result<(Vec<f64>, Vec<f64>), CounterexampleError> {
    let forms = read_all(text).map_err(|e| CounterexampleError::Syntax(format!("{}: {}", e.pos, e.message)))?;
    let pairs: Vec<&SExpr> = match &forms[..] {
        [SExpr::List(items, _)] if items.iter().all(|i| matches!(i, SExpr::List(..))) => items.iter().collect(),
        many => many.iter().collect(),
    };
    let mut x: Vec<Option<f64>> = vec![None; inputs];
    let mut y: Vec<Option<f64>> = Vec::new();
    for pair in pairs {
        let SExpr::List(items, pos) = pair else {
            return Err(CounterexampleError::Syntax("expected (name value) pairs".into()));
        };
        let [name, value] = &items[..] else {
            return Err(CounterexampleError::Syntax(format!("{pos}: expected (name value)")));
        };
        let var = name
            .as_atom()
            .and_then(Variable::parse)
            .ok_or_else(|| CounterexampleError::Syntax(format!("{pos}: bad variable name")))?;
        let v = ce_value(value)
            .filter(|v| v.is_finite())
            .ok_or_else(|| CounterexampleError::Syntax(format!("{pos}: bad value")))?;
        let slots = match var.kind {
            VarKind::Input => &mut x,
            VarKind::Output => &mut y,
        };
        if var.kind == VarKind::Input && var.index >= inputs {
            return Err(CounterexampleError::Syntax(format!("{pos}: {var} out of range")));
        }
        if slots.len() <= var.index {
            slots.resize(var.index + 1, None);
        }
        slots[var.index] = Some(v);
    }
    let x = x
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| CounterexampleError::Missing(format!("X_{i}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let y = y
        .into_iter()
        .enumerate()
        .map(|(j, v)| v.ok_or_else(|| CounterexampleError::Missing(format!("Y_{j}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((x, y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeCheck {
    /// The violation formula holds at `(x, N(x))`.
    pub valid: bool,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Largest |recorded Y_j − recomputed Y_j|, if outputs were recorded.
    pub max_output_deviation: Option<f64>,
}

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("model: {0}")]
    Model(#[from] crate::onnx_runtime::LoadError),
    #[error("specification: {0}")]
    Spec(#[from] crate::spec_parser::SpecError),
    #[error(transparent)]
    Counterexample(#[from] CounterexampleError),
    #[error("inference failed: {0}")]
    Infer(#[from] crate::onnx_runtime::InferError),
}

fn read_file(path: &Path) -> Result<Vec<u8>, ValidateError> {
    fs::read(path).map_err(|source| ValidateError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Re-checks a counterexample from scratch against an already loaded model
/// and specification.
pub fn check_counterexample(net: &Network, spec: &SpecFile, ce_text: &str) -> Result<CeCheck, ValidateError> {
    let (x, recorded) = parse_counterexample(ce_text, net.input_dim())?;
    let y = net.infer(&x)?;
    let max_output_deviation =
        (!recorded.is_empty()).then(|| recorded.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    Ok(CeCheck {
        valid: eval_point(&spec.assertion, &x, &y),
        x,
        y,
        max_output_deviation,
    })
}

/// `validate-ce`: re-parse everything, re-run inference, and evaluate the
/// violation formula at the counterexample.
pub fn validate_ce(model: &Path, spec: &Path, ce: &Path) -> Result<CeCheck, ValidateError> {
    let net = load_network(&read_file(model)?)?;
    let spec_text = String::from_utf8_lossy(&read_file(spec)?).into_owned();
    let spec = parse_spec(&spec_text)?;
    let ce_text = String::from_utf8_lossy(&read_file(ce)?).into_owned();
    check_counterexample(&net, &spec, &ce_text)
}

/// `verify`: runs one instance and writes the counterexample file when the
/// verdict is `violated` and `opts.ce_out` is set. Never panics on bad input;
/// every failure becomes an `unknown` record with a diagnostic.
pub fn verify(model: &Path, spec: &Path, opts: &VerifyOptions) -> RunRecord {
    let start = Instant::now();
    let deadline = Deadline(opts.timeout.map(|t| start + t));
    let mut record = RunRecord {
        model: model.to_path_buf(),
        spec: spec.to_path_buf(),
        verdict: Verdict::Unknown(UnknownReason::InvalidSpec),
        wall_time: 0.0,
        seed: opts.seed,
        provenance: None,
        ce_path: None,
        diagnostic: None,
        io_failure: false,
    };
    let outcome = (|| {
        let model_bytes = match fs::read(model) {
            Ok(b) => b,
            Err(e) => {
                record.io_failure = true;
                return PipelineOutcome::unknown(UnknownReason::UnsupportedModel, format!("{}: {e}", model.display()));
            }
        };
        let net = match load_network(&model_bytes) {
            Ok(n) => n,
            Err(e) => return PipelineOutcome::unknown(UnknownReason::UnsupportedModel, e.to_string()),
        };
        let spec_text = match fs::read_to_string(spec) {
            Ok(t) => t,
            Err(e) => {
                record.io_failure = true;
                return PipelineOutcome::unknown(UnknownReason::InvalidSpec, format!("{}: {e}", spec.display()));
            }
        };
        let parsed = match parse_spec(&spec_text) {
            Ok(s) => s,
            Err(e) => return PipelineOutcome::unknown(UnknownReason::InvalidSpec, e.to_string()),
        };
        let cache = match &opts.cache_dir {
            Some(dir) => match BoundsCache::open(dir) {
                Ok(c) => Some(c),
                Err(e) => {
                    tracing::warn!("cache directory {} unusable: {e}", dir.display());
                    None
                }
            },
            None => None,
        };
        run_stages(&net, &parsed, opts, cache.as_ref(), &deadline)
    })();

    record.verdict = outcome.verdict;
    record.provenance = outcome.provenance;
    record.diagnostic = outcome.diagnostic;
    if let (Verdict::Violated { x, y }, Some(path)) = (&record.verdict, &opts.ce_out) {
        match fs::write(path, format_counterexample(x, y)) {
            Ok(()) => record.ce_path = Some(path.clone()),
            Err(e) => {
                record.io_failure = true;
                record.diagnostic = Some(format!("writing {}: {e}", path.display()));
            }
        }
    }
    record.wall_time = start.elapsed().as_secs_f64();
    info!(
        model = %model.display(),
        spec = %spec.display(),
        verdict = record.verdict.token(),
        seconds = record.wall_time,
        "instance finished"
    );
    record
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub model: PathBuf,
    pub spec: PathBuf,
    pub timeout: Option<Duration>,
}

/// Reads `model,spec[,timeout_seconds]` rows. Blank lines, `#` comments and a
/// `model,spec,...` header are skipped; relative paths are resolved against
/// the manifest's directory.
pub fn read_manifest(path: &Path) -> io::Result<Vec<Instance>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let invalid = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let mut out = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result.map_err(|e| invalid(format!("manifest row {}: {e}", row + 1)))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if row == 0 && rec.get(0) == Some("model") {
            continue;
        }
        let (model, spec) = match (rec.get(0), rec.get(1)) {
            (Some(m), Some(s)) if !m.is_empty() && !s.is_empty() => (m, s),
            _ => return Err(invalid(format!("manifest row {} needs model,spec", row + 1))),
        };
        let timeout = match rec.get(2).filter(|t| !t.is_empty()) {
            Some(t) => Some(
                t.parse::<f64>()
                    .ok()
                    .filter(|v| *v >= 0.0 && v.is_finite())
                    .map(Duration::from_secs_f64)
                    .ok_or_else(|| invalid(format!("manifest row {}: bad timeout `{t}`", row + 1)))?,
            ),
            None => None,
        };
        out.push(Instance {
            model: base.join(model),
            spec: base.join(spec),
            timeout,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub verify: VerifyOptions,
    pub jobs: usize,
    /// Directory receiving one counterexample file per violated instance.
    pub ce_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    pub holds: usize,
    pub violated: usize,
    pub unknown: usize,
    /// Sum of per-instance wall times.
    pub total_time: f64,
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "holds={} violated={} unknown={} total_time={:.3}",
            self.holds, self.violated, self.unknown, self.total_time
        )
    }
}

impl Summary {
    pub fn of(records: &[RunRecord]) -> Self {
        records.iter().fold(Summary::default(), |mut s, r| {
            match r.verdict {
                Verdict::Holds => s.holds += 1,
                Verdict::Violated { .. } => s.violated += 1,
                Verdict::Unknown(_) => s.unknown += 1,
            }
            s.total_time += r.wall_time;
            s
        })
    }
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

fn ce_file_name(index: usize, inst: &Instance) -> String {
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    format!("{index:04}_{}_{}.counterexample", stem(&inst.model), stem(&inst.spec))
}

/// Runs every manifest instance (up to `jobs` at a time) and keeps the rows
/// in manifest order. Fails only if the manifest cannot be read.
pub fn run_batch(manifest: &Path, opts: &BatchOptions) -> io::Result<BatchReport> {
    let instances = read_manifest(manifest)?;
    if let Some(dir) = &opts.ce_dir {
        fs::create_dir_all(dir)?;
    }
    let run = |(index, inst): (usize, &Instance)| {
        let mut v = opts.verify.clone();
        if inst.timeout.is_some() {
            v.timeout = inst.timeout;
        }
        v.ce_out = opts.ce_dir.as_ref().map(|d| d.join(ce_file_name(index, inst)));
        verify(&inst.model, &inst.spec, &v)
    };

    #[cfg(feature = "parallel")]
    let records: Vec<RunRecord> = {
        use rayon::prelude::*;
        if opts.jobs > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.jobs)
                .build()
                .map_err(io::Error::other)?;
            pool.install(|| instances.par_iter().enumerate().map(run).collect())
        } else {
            instances.iter().enumerate().map(run).collect()
        }
    };
    #[cfg(not(feature = "parallel"))]
    let records: Vec<RunRecord> = instances.iter().enumerate().map(run).collect();

    let summary = Summary::of(&records);
    Ok(BatchReport { records, summary })
}

/// CSV with header `model,spec,result,time_seconds,seed`, LF line endings.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["model", "spec", "result", "time_seconds", "seed"])?;
    for r in records {
        w.write_record([
            r.model.display().to_string(),
            r.spec.display().to_string(),
            r.verdict.token().to_string(),
            format!("{:.3}", r.wall_time),
            r.seed.to_string(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_round_trip() {
        let x = vec![0.1, -0.25, 1e-7];
        let y = vec![3.0, -1.0 / 3.0];
        let text = format_counterexample(&x, &y);
        assert!(text.starts_with("((X_0 0.1)\n (X_1 -0.25)"), "{text}");
        let (px, py) = parse_counterexample(&text, 3).unwrap();
        assert_eq!(px, x);
        assert_eq!(py, y);
    }

    #[test]
    fn counterexample_errors() {
        assert!(matches!(
            parse_counterexample("((X_0 1.0))", 2),
            Err(CounterexampleError::Missing(ref v)) if v == "X_1"
        ));
        assert!(parse_counterexample("((X_0 abc))", 1).is_err());
        assert!(parse_counterexample("((X_3 1.0))", 1).is_err());
        // Negation written as a term is accepted.
        assert_eq!(parse_counterexample("((X_0 (- 2.5)))", 1).unwrap().0, vec![-2.5]);
    }

    #[test]
    fn summary_line_format() {
        let s = Summary {
            holds: 2,
            violated: 1,
            unknown: 0,
            total_time: 1.23456,
        };
        assert_eq!(s.to_string(), "holds=2 violated=1 unknown=0 total_time=1.235");
    }
}
