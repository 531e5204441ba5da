//! The contract with the external sandbox runner.
//!
//! The engine writes a [`SandboxManifest`] as JSON, launches the configured
//! runner command with the manifest path as its last argument, and reads a
//! [`SandboxResult`] back from `result_path`. The runner exits 0 whenever it
//! wrote the result file, so a non-zero exit or a missing file is a launch
//! failure rather than a submission failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{EvalOutcome, Verdict};

pub const MANIFEST_VERSION: u32 = 1;
/// Extra time granted to the runner beyond the task limit before it is killed.
pub const KILL_GRACE: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MountMode {
    ReadOnly,
    ReadWrite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageMount {
    pub tier: String,
    pub path: PathBuf,
    pub mode: MountMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxManifest {
    pub version: u32,
    pub task_id: u32,
    pub evaluation_id: u32,
    pub attempt: u32,
    pub code_path: PathBuf,
    pub entry_point: String,
    pub time_limit_secs: u64,
    pub storage_mounts: Vec<StorageMount>,
    pub work_dir: PathBuf,
    pub result_path: PathBuf,
    /// Identifier of the artifact format the entry point returns, e.g.
    /// `packing_flat` (a flat list of 3n decimals).
    pub artifact_schema: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SandboxVerdict {
    Completed,
    Error,
    Timeout,
    EntryPointMissing,
    Crash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    #[serde(rename = "type")]
    pub kind: String,
    pub message: String,
    #[serde(default)]
    pub traceback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxResult {
    pub verdict: SandboxVerdict,
    #[serde(default)]
    pub primary_score: Option<f64>,
    #[serde(default)]
    pub secondary_metrics: BTreeMap<String, f64>,
    pub stdout_path: PathBuf,
    pub stderr_path: PathBuf,
    #[serde(default)]
    pub artifact_path: Option<PathBuf>,
    #[serde(default)]
    pub error: Option<ErrorRecord>,
}

/// How an external task's artifact is scored on the engine side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "schema", rename_all = "snake_case")]
pub enum ArtifactSchema {
    /// Flat list of 3n decimals checked by the packing verifier.
    PackingFlat { n: usize },
}

impl ArtifactSchema {
    pub fn id(&self) -> &'static str {
        match self {
            ArtifactSchema::PackingFlat { .. } => "packing_flat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalEvaluator {
    /// Runner command; the manifest path is appended as the final argument.
    pub command: Vec<String>,
    pub entry_point: String,
    #[serde(default)]
    pub artifact: Option<ArtifactSchema>,
    /// File name for the submitted code inside the work directory.
    #[serde(default = "default_code_file")]
    pub code_file: String,
}

fn default_code_file() -> String {
    "submission.py".into()
}

fn read_lossy(path: &Path) -> String {
    fs::read(path)
        .map(|b| String::from_utf8_lossy(&b).into_owned())
        .unwrap_or_default()
}

pub struct ExternalJob<'a> {
    pub evaluator: &'a ExternalEvaluator,
    pub task_id: u32,
    pub evaluation_id: u32,
    pub attempt: u32,
    pub code: &'a str,
    pub time_limit: Duration,
    /// Directory holding `storage/{shared,system,<lineage>}` for this job.
    pub storage_root: &'a Path,
    pub work_dir: &'a Path,
}

/// Runs one job through the external runner and maps the result file onto
/// an engine outcome.
pub fn run_external(job: &ExternalJob<'_>) -> EvalOutcome {
    match launch(job) {
        Ok(outcome) => outcome,
        Err(msg) => EvalOutcome::invalid(format!("sandbox launch failure: {msg}")),
    }
}

fn launch(job: &ExternalJob<'_>) -> Result<EvalOutcome, String> {
    let ev = job.evaluator;
    let program = ev.command.first().ok_or("empty runner command")?;
    fs::create_dir_all(job.work_dir).map_err(|e| e.to_string())?;
    let code_path = job.work_dir.join(&ev.code_file);
    fs::write(&code_path, job.code).map_err(|e| e.to_string())?;
    let result_path = job.work_dir.join("result.json");
    let mut mounts = Vec::new();
    if let Ok(entries) = fs::read_dir(job.storage_root) {
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        mounts = names
            .into_iter()
            .map(|tier| StorageMount {
                path: job.storage_root.join(&tier),
                tier,
                mode: MountMode::ReadOnly,
            })
            .collect();
    }
    let manifest = SandboxManifest {
        version: MANIFEST_VERSION,
        task_id: job.task_id,
        evaluation_id: job.evaluation_id,
        attempt: job.attempt,
        code_path,
        entry_point: ev.entry_point.clone(),
        time_limit_secs: job.time_limit.as_secs(),
        storage_mounts: mounts,
        work_dir: job.work_dir.to_path_buf(),
        result_path: result_path.clone(),
        artifact_schema: ev.artifact.as_ref().map(|a| a.id().to_string()),
    };
    let manifest_path = job.work_dir.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_vec_pretty(&manifest).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;

    let mut child = Command::new(program)
        .args(&ev.command[1..])
        .arg(&manifest_path)
        .current_dir(job.work_dir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| format!("could not start `{program}`: {e}"))?;
    let deadline = Instant::now() + job.time_limit + KILL_GRACE;
    let status = loop {
        match child.try_wait().map_err(|e| e.to_string())? {
            Some(status) => break status,
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(EvalOutcome {
                    verdict: Verdict::Timeout,
                    stderr: format!(
                        "runner exceeded the {}s time limit and was killed",
                        job.time_limit.as_secs()
                    ),
                    ..EvalOutcome::default()
                });
            }
            None => std::thread::sleep(Duration::from_millis(20)),
        }
    };
    if !status.success() {
        return Err(format!("runner exited with {status}"));
    }
    let raw = fs::read(&result_path).map_err(|e| format!("no result file: {e}"))?;
    let result: SandboxResult = serde_json::from_slice(&raw).map_err(|e| format!("malformed result file: {e}"))?;
    Ok(map_result(&result, ev.artifact.as_ref()))
}

/// Maps a runner result onto an engine outcome, verifying the artifact when
/// the task declares an engine-side schema.
pub fn map_result(result: &SandboxResult, schema: Option<&ArtifactSchema>) -> EvalOutcome {
    let stdout = read_lossy(&result.stdout_path);
    let stderr = read_lossy(&result.stderr_path);
    let base = EvalOutcome {
        stdout,
        stderr,
        secondary: result.secondary_metrics.clone(),
        ..EvalOutcome::default()
    };
    match result.verdict {
        SandboxVerdict::Completed => {
            if let Some(ArtifactSchema::PackingFlat { n }) = schema {
                let Some(path) = &result.artifact_path else {
                    return EvalOutcome {
                        verdict: Verdict::Invalid,
                        error: Some("runner reported no artifact".into()),
                        ..base
                    };
                };
                let text = read_lossy(path);
                return super::score_packing(&text, *n, base);
            }
            match result.primary_score {
                Some(score) if score.is_finite() => EvalOutcome {
                    verdict: Verdict::Scored,
                    primary: Some(score),
                    ..base
                },
                Some(_) => EvalOutcome {
                    verdict: Verdict::Invalid,
                    error: Some("primary score is not finite".into()),
                    ..base
                },
                None => EvalOutcome {
                    verdict: Verdict::Unscored,
                    ..base
                },
            }
        }
        SandboxVerdict::Error | SandboxVerdict::EntryPointMissing => {
            let error = result
                .error
                .as_ref()
                .map(|e| {
                    let mut s = format!("{}: {}", e.kind, e.message);
                    if !e.traceback.is_empty() {
                        s.push('\n');
                        s.push_str(&e.traceback);
                    }
                    s
                })
                .unwrap_or_else(|| format!("{:?}", result.verdict));
            EvalOutcome {
                verdict: Verdict::Raised,
                error: Some(error),
                ..base
            }
        }
        SandboxVerdict::Timeout => EvalOutcome {
            verdict: Verdict::Timeout,
            ..base
        },
        SandboxVerdict::Crash => EvalOutcome {
            verdict: Verdict::Invalid,
            error: Some("submission process crashed".into()),
            ..base
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn result_schema_roundtrip() {
        let json = r#"{
            "verdict": "error",
            "primary_score": null,
            "secondary_metrics": {},
            "stdout_path": "/tmp/none.out",
            "stderr_path": "/tmp/none.err",
            "error": {"type": "NameError", "message": "name 'np' is not defined", "traceback": "line 3"}
        }"#;
        let r: SandboxResult = serde_json::from_str(json).unwrap();
        assert_eq!(r.verdict, SandboxVerdict::Error);
        let out = map_result(&r, None);
        assert_eq!(out.verdict, Verdict::Raised);
        assert!(out.error.unwrap().starts_with("NameError"));
        let back: SandboxResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn manifest_schema_fields() {
        let m = SandboxManifest {
            version: MANIFEST_VERSION,
            task_id: 1,
            evaluation_id: 7,
            attempt: 1,
            code_path: "/w/submission.py".into(),
            entry_point: "construct_packing".into(),
            time_limit_secs: 5,
            storage_mounts: vec![StorageMount {
                tier: "shared".into(),
                path: "/s/shared".into(),
                mode: MountMode::ReadOnly,
            }],
            work_dir: "/w".into(),
            result_path: "/w/result.json".into(),
            artifact_schema: Some("packing_flat".into()),
        };
        let v = serde_json::to_value(&m).unwrap();
        for key in [
            "entry_point",
            "time_limit_secs",
            "storage_mounts",
            "result_path",
            "artifact_schema",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["storage_mounts"][0]["mode"], "read_only");
    }
}
