//! Declarative multi-step runs with a reproducibility manifest.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "out_dir": "out",
//!   "steps": [
//!     {"name": "lex", "run": {"op": "lex-gen", "corpus": "hi.jsonl", "lexicon": "lex.tsv", "p": 0.5, "out": "lex.jsonl"}},
//!     {"name": "div", "run": {"op": "diversity", "corpus": "lex.jsonl", "out": "div.json"}}
//!   ]
//! }
//! ```
//!
//! Output paths are relative to the output directory. An input path names
//! another step's output when some step writes that relative path; otherwise it
//! is relative to the directory holding the config. Steps run in dependency
//! order (ties keep listing order), and the run writes `run_manifest.json`
//! into the output directory whether or not every step succeeded.

pub mod report;
pub mod steps;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ops::write_atomic;
use crate::rng::stream_seed;
pub use report::{render, Format};
pub use steps::{StepError, StepOp, StepOutput};

pub const MANIFEST_NAME: &str = "run_manifest.json";
pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline: {0}")]
    Config(String),
    #[error("pipeline steps form a cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("step {step:?} failed: {source}")]
    Step { step: String, source: StepError },
    #[error("inputs changed since the recorded run: {0:?}")]
    InputsChanged(Vec<String>),
    #[error("replay differs from the recorded run: {0:?}")]
    Mismatch(Vec<String>),
}

type Result<T> = std::result::Result<T, PipelineError>;

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub name: String,
    /// Steps that must finish first, beyond those implied by file dependencies.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub after: Vec<String>,
    /// Overrides the seed derived from the global seed and the step name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub run: StepOp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub steps: Vec<Step>,
}

impl PipelineConfig {
    pub fn from_json_str(text: &str) -> Result<PipelineConfig> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        PipelineConfig::from_json_str(&read_text(path.as_ref())?)
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<(String, u64)> {
    let bytes = std::fs::read(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok((sha256_hex(&bytes), bytes.len() as u64))
}

/// A step with resolved paths and its position in the run.
#[derive(Debug, Clone)]
pub struct PlannedStep {
    pub name: String,
    pub seed: u64,
    pub op: StepOp,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub deps: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub steps: Vec<PlannedStep>,
    /// Indices into `steps` in execution order.
    pub order: Vec<usize>,
    /// Inputs that no step produces, sorted.
    pub external_inputs: Vec<PathBuf>,
}

/// Resolves paths, derives dependencies and orders the steps. Nothing is executed.
pub fn plan(cfg: &PipelineConfig, base_dir: &Path, out_dir: &Path) -> Result<Plan> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, s) in cfg.steps.iter().enumerate() {
        if s.name.is_empty() {
            return Err(PipelineError::Config(format!("step {} has an empty name", i + 1)));
        }
        if index.insert(&s.name, i).is_some() {
            return Err(PipelineError::Config(format!("duplicate step name {:?}", s.name)));
        }
    }
    if cfg.steps.is_empty() {
        return Err(PipelineError::Config("no steps".into()));
    }

    // Every declared output, relative to the output directory.
    let mut produced: BTreeMap<PathBuf, usize> = BTreeMap::new();
    let mut resolved_ops = Vec::with_capacity(cfg.steps.len());
    for s in &cfg.steps {
        let mut op = s.run.clone();
        for p in op.paths_mut().1 {
            *p = out_dir.join(&*p);
        }
        // Outputs of tcs-train depend on its config, which is always an external input.
        if let StepOp::TcsTrain { config, .. } = &mut op {
            *config = base_dir.join(&*config);
        }
        resolved_ops.push(op);
    }
    let step_err = |i: usize, source: StepError| PipelineError::Step {
        step: cfg.steps[i].name.clone(),
        source,
    };
    let mut outputs: Vec<Vec<PathBuf>> = Vec::with_capacity(cfg.steps.len());
    for (i, op) in resolved_ops.iter().enumerate() {
        let outs = op.outputs().map_err(|e| step_err(i, e))?;
        for p in &outs {
            if let Some(j) = produced.insert(p.clone(), i) {
                return Err(PipelineError::Config(format!(
                    "steps {:?} and {:?} both write {}",
                    cfg.steps[j].name,
                    cfg.steps[i].name,
                    p.display()
                )));
            }
        }
        outputs.push(outs);
    }
    for op in resolved_ops.iter_mut() {
        let is_tcs = matches!(op, StepOp::TcsTrain { .. });
        for (k, p) in op.paths_mut().0.into_iter().enumerate() {
            if is_tcs && k == 0 {
                continue;
            }
            let in_out = out_dir.join(&*p);
            *p = if produced.contains_key(&in_out) { in_out } else { base_dir.join(&*p) };
        }
    }

    let mut steps = Vec::with_capacity(cfg.steps.len());
    let mut external: BTreeSet<PathBuf> = BTreeSet::new();
    for (i, (s, op)) in cfg.steps.iter().zip(resolved_ops).enumerate() {
        let inputs = op.inputs().map_err(|e| step_err(i, e))?;
        let mut deps = BTreeSet::new();
        for p in &inputs {
            match produced.get(p) {
                Some(&j) if j == i => {
                    return Err(PipelineError::Config(format!("step {:?} reads its own output", s.name)));
                }
                Some(&j) => {
                    deps.insert(j);
                }
                None => {
                    if !p.is_file() {
                        return Err(PipelineError::Config(format!(
                            "step {:?}: input {} does not exist",
                            s.name,
                            p.display()
                        )));
                    }
                    external.insert(p.clone());
                }
            }
        }
        if let StepOp::TcsTrain { config, .. } = &op {
            if produced.contains_key(config) {
                return Err(PipelineError::Config(format!(
                    "step {:?}: a curriculum config must exist before the run",
                    s.name
                )));
            }
        }
        for a in &s.after {
            let j = *index
                .get(a.as_str())
                .ok_or_else(|| PipelineError::Config(format!("step {:?} runs after unknown step {a:?}", s.name)))?;
            deps.insert(j);
        }
        steps.push(PlannedStep {
            name: s.name.clone(),
            seed: s.seed.unwrap_or_else(|| stream_seed(cfg.seed, &s.name, 0)),
            op,
            inputs,
            outputs: outputs[i].clone(),
            deps,
        });
    }

    // Kahn's algorithm, always taking the lowest ready index.
    let n = steps.len();
    let mut indegree: Vec<usize> = steps.iter().map(|s| s.deps.len()).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for (j, s) in steps.iter().enumerate() {
            if s.deps.contains(&i) {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert(j);
                }
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).filter(|i| !order.contains(i)).map(|i| steps[i].name.clone()).collect();
        return Err(PipelineError::Cycle(stuck));
    }
    Ok(Plan {
        steps,
        order,
        external_inputs: external.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// Set when the file belongs to a step that did not finish.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub name: String,
    pub op: String,
    pub seed: u64,
    pub status: StepStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outputs: Vec<FileDigest>,
}

/// Everything needed to repeat a run and check that it reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// Directory the config's relative input paths were resolved against.
    pub base_dir: String,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub order: Vec<String>,
    pub steps: Vec<StepRecord>,
    pub complete: bool,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Manifest> {
        let m: Manifest = serde_json::from_str(&read_text(path.as_ref())?)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.as_ref().display())))?;
        if m.format != MANIFEST_FORMAT {
            return Err(PipelineError::Config(format!("unsupported manifest format {}", m.format)));
        }
        Ok(m)
    }
}

/// Knobs that sit outside the config file.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl RunOptions {
    /// Options implied by a config file at `path`: inputs relative to its
    /// directory, outputs under its `out_dir`, its seed.
    pub fn for_config(cfg: &PipelineConfig, path: &Path) -> RunOptions {
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunOptions {
            out_dir: base_dir.join(&cfg.out_dir),
            base_dir,
            seed: cfg.seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    /// Reports that steps produced without an output file, by step name.
    pub reports: Vec<(String, String)>,
}

fn rel(path: &Path, root: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn digests(paths: &[PathBuf], root: &Path, partial: bool) -> Result<Vec<FileDigest>> {
    let mut out = Vec::new();
    for p in paths {
        if partial && !p.is_file() {
            continue;
        }
        let (sha256, bytes) = file_digest(p)?;
        out.push(FileDigest {
            path: rel(p, root),
            sha256,
            bytes,
            partial,
        });
    }
    Ok(out)
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Plans and runs every step, then writes the manifest. A failing step stops
/// the run; the manifest still records what happened.
pub fn run_pipeline(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunReport> {
    let base_dir = absolute(&opts.base_dir);
    let out_dir = absolute(&opts.out_dir);
    let cfg = PipelineConfig {
        seed: opts.seed,
        ..cfg.clone()
    };
    let plan = plan(&cfg, &base_dir, &out_dir)?;
    let inputs = digests(&plan.external_inputs, &base_dir, false)?;

    let mut records: Vec<Option<StepRecord>> = vec![None; plan.steps.len()];
    let mut reports = Vec::new();
    let mut failure: Option<(String, StepError)> = None;
    for &i in &plan.order {
        let s = &plan.steps[i];
        let record = |status, error, outputs| StepRecord {
            name: s.name.clone(),
            op: s.op.name().to_string(),
            seed: s.seed,
            status,
            error,
            outputs,
        };
        if failure.is_some() {
            records[i] = Some(record(StepStatus::Skipped, None, Vec::new()));
            continue;
        }
        match s.op.execute(s.seed) {
            Ok(out) => {
                if let Some(r) = out.report {
                    reports.push((s.name.clone(), r));
                }
                records[i] = Some(record(StepStatus::Ok, None, digests(&s.outputs, &out_dir, false)?));
            }
            Err(e) => {
                let partial = digests(&s.outputs, &out_dir, true)?;
                records[i] = Some(record(StepStatus::Failed, Some(e.to_string()), partial));
                failure = Some((s.name.clone(), e));
            }
        }
    }

    let manifest = Manifest {
        format: MANIFEST_FORMAT,
        tool: "csforge".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        base_dir: base_dir.display().to_string(),
        config: cfg,
        inputs,
        order: plan.order.iter().map(|&i| plan.steps[i].name.clone()).collect(),
        steps: plan.order.iter().map(|&i| records[i].take().expect("every step recorded")).collect(),
        complete: failure.is_none(),
    };
    let manifest_path = out_dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&manifest_path, text.as_bytes()).map_err(|source| PipelineError::Io {
        path: manifest_path.display().to_string(),
        source,
    })?;
    if let Some((step, source)) = failure {
        return Err(PipelineError::Step { step, source });
    }
    Ok(RunReport {
        manifest,
        manifest_path,
        reports,
    })
}

/// Re-runs a recorded pipeline into `out_dir` and checks that the inputs are
/// unchanged and every recorded output is reproduced byte for byte.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<RunReport> {
    let recorded = Manifest::read(manifest_path)?;
    let base_dir = PathBuf::from(&recorded.base_dir);
    let mut changed = Vec::new();
    for f in &recorded.inputs {
        match file_digest(&base_dir.join(&f.path)) {
            Ok((d, _)) if d == f.sha256 => {}
            _ => changed.push(f.path.clone()),
        }
    }
    if !changed.is_empty() {
        return Err(PipelineError::InputsChanged(changed));
    }
    let opts = RunOptions {
        base_dir,
        out_dir: out_dir.to_path_buf(),
        seed: recorded.seed,
    };
    let run = run_pipeline(&recorded.config, &opts)?;
    let fresh: BTreeMap<&str, &StepRecord> = run.manifest.steps.iter().map(|s| (s.name.as_str(), s)).collect();
    let mut mismatches = Vec::new();
    for s in recorded.steps.iter().filter(|s| s.status == StepStatus::Ok) {
        let Some(now) = fresh.get(s.name.as_str()) else {
            mismatches.push(format!("step {} missing", s.name));
            continue;
        };
        if now.outputs != s.outputs {
            for f in &s.outputs {
                if !now.outputs.contains(f) {
                    mismatches.push(f.path.clone());
                }
            }
        }
    }
    if !mismatches.is_empty() {
        return Err(PipelineError::Mismatch(mismatches));
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        std::fs::write(dir.join(name), text).unwrap();
    }

    fn fixture() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "hi.txt", "घर अच्छा है\nकाम अच्छा है\nघर बड़ा है\n");
        write(dir.path(), "lex.tsv", "घर\thome\nकाम\twork\nअच्छा\tgood\n");
        dir
    }

    fn config(steps: &str) -> PipelineConfig {
        PipelineConfig::from_json_str(&format!(r#"{{"seed": 3, "steps": {steps}}}"#)).unwrap()
    }

    const CHAIN: &str = r#"[
        {"name": "div", "run": {"op": "diversity", "corpus": "lex.jsonl", "out": "div.json"}},
        {"name": "lex", "run": {"op": "lex-gen", "corpus": "hi.jsonl", "lexicon": "lex.tsv", "p": 0.5, "variants": 2, "out": "lex.jsonl"}},
        {"name": "ingest", "run": {"op": "ingest", "input": "hi.txt", "out": "hi.jsonl", "source": "MONO"}}
    ]"#;

    #[test]
    fn file_dependencies_order_steps() {
        let dir = fixture();
        let p = plan(&config(CHAIN), dir.path(), &dir.path().join("out")).unwrap();
        let names: Vec<&str> = p.order.iter().map(|&i| p.steps[i].name.as_str()).collect();
        assert_eq!(names, ["ingest", "lex", "div"]);
        assert_eq!(p.external_inputs.len(), 2);
    }

    #[test]
    fn cycles_are_rejected_before_running() {
        let dir = fixture();
        let cfg = config(
            r#"[
            {"name": "a", "after": ["b"], "run": {"op": "ingest", "input": "hi.txt", "out": "a.jsonl"}},
            {"name": "b", "after": ["a"], "run": {"op": "ingest", "input": "hi.txt", "out": "b.jsonl"}}
        ]"#,
        );
        let out = dir.path().join("out");
        let e = run_pipeline(&cfg, &RunOptions { base_dir: dir.path().into(), out_dir: out.clone(), seed: 0 }).unwrap_err();
        assert!(matches!(e, PipelineError::Cycle(ref v) if v.len() == 2), "{e}");
        assert!(!out.exists());
    }

    #[test]
    fn missing_inputs_and_duplicate_outputs_are_config_errors() {
        let dir = fixture();
        let missing = config(r#"[{"name": "a", "run": {"op": "ingest", "input": "nope.txt", "out": "a.jsonl"}}]"#);
        assert!(matches!(plan(&missing, dir.path(), dir.path()), Err(PipelineError::Config(_))));
        let dup = config(
            r#"[{"name": "a", "run": {"op": "ingest", "input": "hi.txt", "out": "a.jsonl"}},
                {"name": "b", "run": {"op": "ingest", "input": "hi.txt", "out": "a.jsonl"}}]"#,
        );
        assert!(matches!(plan(&dup, dir.path(), dir.path()), Err(PipelineError::Config(_))));
    }

    #[test]
    fn manifest_replays_identically() {
        let dir = fixture();
        let opts = RunOptions {
            base_dir: dir.path().into(),
            out_dir: dir.path().join("run1"),
            seed: 3,
        };
        let run = run_pipeline(&config(CHAIN), &opts).unwrap();
        assert!(run.manifest.complete);
        assert_eq!(run.manifest.steps.len(), 3);
        let again = replay(&run.manifest_path, &dir.path().join("run2")).unwrap();
        assert_eq!(again.manifest.steps, run.manifest.steps);

        write(dir.path(), "hi.txt", "घर है\nकाम है\nघर था\n");
        assert!(matches!(
            replay(&run.manifest_path, &dir.path().join("run3")),
            Err(PipelineError::InputsChanged(_))
        ));
    }

    #[test]
    fn failing_step_is_recorded_and_later_steps_skipped() {
        let dir = fixture();
        write(dir.path(), "bad.tsv", "घर\n");
        let cfg = config(
            r#"[
            {"name": "ingest", "run": {"op": "ingest", "input": "hi.txt", "out": "hi.jsonl"}},
            {"name": "lex", "run": {"op": "lex-gen", "corpus": "hi.jsonl", "lexicon": "bad.tsv", "p": 0.5, "out": "lex.jsonl"}},
            {"name": "div", "run": {"op": "diversity", "corpus": "lex.jsonl"}}
        ]"#,
        );
        let out = dir.path().join("out");
        let e = run_pipeline(&cfg, &RunOptions { base_dir: dir.path().into(), out_dir: out.clone(), seed: 0 }).unwrap_err();
        assert!(e.to_string().starts_with("step \"lex\" failed"), "{e}");
        let m = Manifest::read(out.join(MANIFEST_NAME)).unwrap();
        assert!(!m.complete);
        let status: Vec<&StepStatus> = m.steps.iter().map(|s| &s.status).collect();
        assert_eq!(status, [&StepStatus::Ok, &StepStatus::Failed, &StepStatus::Skipped]);
    }
}
