use std::collections::BTreeMap;
use std::path::PathBuf;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};

use super::sandbox::{run_external, ExternalJob};
use super::{run_builtin, EvalOutcome, EvaluatorBinding};
use crate::research::Storage;

#[derive(Debug, Clone)]
pub struct WorkRequest {
    pub job_id: u32,
    pub attempt: u32,
    pub task_id: u32,
    pub binding: EvaluatorBinding,
    pub content: String,
    pub time_limit: Duration,
    /// Storage snapshot taken at submission time (external evaluators only).
    pub storage: Option<Storage>,
}

#[derive(Debug, Clone)]
pub struct WorkResult {
    pub job_id: u32,
    pub attempt: u32,
    pub outcome: EvalOutcome,
}

/// Fixed-size pool of evaluation threads. Results are buffered by
/// `(job, attempt)` until the tick loop asks for them.
pub struct WorkerPool {
    tx: Option<Sender<WorkRequest>>,
    rx: Receiver<WorkResult>,
    workers: Vec<JoinHandle<()>>,
    ready: BTreeMap<(u32, u32), EvalOutcome>,
    _scratch: Option<tempfile::TempDir>,
}

fn execute(req: WorkRequest, scratch: &std::path::Path) -> EvalOutcome {
    match &req.binding {
        EvaluatorBinding::External(ev) => {
            let dir = scratch.join(format!("eval-{}-{}", req.job_id, req.attempt));
            let storage_root = dir.join("storage");
            if let Err(e) = std::fs::create_dir_all(&storage_root).and_then(|_| match &req.storage {
                Some(s) => s.materialize(&storage_root),
                None => Ok(()),
            }) {
                return EvalOutcome::invalid(format!("sandbox launch failure: {e}"));
            }
            let outcome = run_external(&ExternalJob {
                evaluator: ev,
                task_id: req.task_id,
                evaluation_id: req.job_id,
                attempt: req.attempt,
                code: &req.content,
                time_limit: req.time_limit,
                storage_root: &storage_root,
                work_dir: &dir.join("work"),
            });
            let _ = std::fs::remove_dir_all(&dir);
            outcome
        }
        other => run_builtin(other, &req.content),
    }
}

impl WorkerPool {
    pub fn new(workers: usize, scratch: Option<PathBuf>) -> std::io::Result<Self> {
        let (tx, work_rx) = unbounded::<WorkRequest>();
        let (result_tx, rx) = unbounded::<WorkResult>();
        let (scratch_dir, owned) = match scratch {
            Some(p) => {
                std::fs::create_dir_all(&p)?;
                (p, None)
            }
            None => {
                let t = tempfile::Builder::new().prefix("station-eval").tempdir()?;
                (t.path().to_path_buf(), Some(t))
            }
        };
        let workers = (0..workers.max(1))
            .map(|i| {
                let work_rx = work_rx.clone();
                let result_tx = result_tx.clone();
                let scratch = scratch_dir.clone();
                std::thread::Builder::new()
                    .name(format!("eval-worker-{i}"))
                    .spawn(move || {
                        for req in work_rx.iter() {
                            let (job_id, attempt) = (req.job_id, req.attempt);
                            let outcome = execute(req, &scratch);
                            if result_tx
                                .send(WorkResult {
                                    job_id,
                                    attempt,
                                    outcome,
                                })
                                .is_err()
                            {
                                break;
                            }
                        }
                    })
            })
            .collect::<std::io::Result<Vec<_>>>()?;
        Ok(Self {
            tx: Some(tx),
            rx,
            workers,
            ready: BTreeMap::new(),
            _scratch: owned,
        })
    }

    pub fn dispatch(&self, req: WorkRequest) {
        if let Some(tx) = &self.tx {
            // Workers only exit when the sender is dropped, so this cannot fail.
            let _ = tx.send(req);
        }
    }

    fn drain(&mut self) {
        while let Ok(r) = self.rx.try_recv() {
            self.ready.insert((r.job_id, r.attempt), r.outcome);
        }
    }

    /// Whether the result for `(job, attempt)` has arrived (non-blocking).
    pub fn is_ready(&mut self, job_id: u32, attempt: u32) -> bool {
        self.drain();
        self.ready.contains_key(&(job_id, attempt))
    }

    /// Blocks until the result for `(job, attempt)` arrives.
    pub fn wait_for(&mut self, job_id: u32, attempt: u32) -> EvalOutcome {
        loop {
            if let Some(out) = self.ready.remove(&(job_id, attempt)) {
                return out;
            }
            match self.rx.recv() {
                Ok(r) => {
                    self.ready.insert((r.job_id, r.attempt), r.outcome);
                }
                Err(_) => return EvalOutcome::invalid("evaluation workers stopped"),
            }
        }
    }

    /// Waits up to `timeout` for any result to arrive.
    pub fn wait_any(&mut self, timeout: Duration) -> bool {
        match self.rx.recv_timeout(timeout) {
            Ok(r) => {
                self.ready.insert((r.job_id, r.attempt), r.outcome);
                true
            }
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => false,
        }
    }
}

impl Drop for WorkerPool {
    fn drop(&mut self) {
        self.tx.take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(id: u32, content: &str) -> WorkRequest {
        WorkRequest {
            job_id: id,
            attempt: 1,
            task_id: 1,
            binding: EvaluatorBinding::Echo,
            content: content.into(),
            time_limit: Duration::from_secs(5),
            storage: None,
        }
    }

    #[test]
    fn results_are_matched_to_jobs() {
        let mut pool = WorkerPool::new(3, None).unwrap();
        for i in 1..=20 {
            pool.dispatch(req(i, &i.to_string()));
        }
        for i in (1..=20).rev() {
            assert_eq!(pool.wait_for(i, 1).primary, Some(i as f64));
        }
    }
}
