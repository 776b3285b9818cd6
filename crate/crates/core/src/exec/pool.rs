//! Process-pool executor speaking the line protocol to guest-harness workers.

use std::collections::VecDeque;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::os::unix::process::CommandExt;
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use tempfile::TempDir;
use tracing::{debug, warn};

use super::protocol::{decode_response, encode_request};
use super::{ExecRequest, Executor};
use crate::model::{ExecStatus, ExecutionResult};

/// Requests served by one worker before it is replaced.
pub const DEFAULT_RECYCLE_AFTER: u32 = 100;
/// Extra time the host waits beyond `wall_ms` before killing a worker.
pub const SUPERVISOR_GRACE_MS: u64 = 2000;

const STDERR_TAIL_LINES: usize = 40;

#[derive(Debug, Clone)]
pub struct SandboxConfig {
    /// Program and arguments that start one harness worker.
    pub harness_cmd: Vec<String>,
    pub pool_size: usize,
    pub recycle_after: u32,
    pub grace_ms: u64,
    /// Address-space cap applied to each worker process, in MiB.
    pub memory_cap_mb: Option<u64>,
    /// Parent directory for per-worker scratch dirs (system temp when unset).
    pub scratch_root: Option<PathBuf>,
    /// Longest response line accepted from a worker.
    pub max_frame_bytes: usize,
}

impl SandboxConfig {
    pub fn new(harness_cmd: Vec<String>) -> Self {
        SandboxConfig {
            harness_cmd,
            pool_size: default_pool_size(),
            recycle_after: DEFAULT_RECYCLE_AFTER,
            grace_ms: SUPERVISOR_GRACE_MS,
            memory_cap_mb: Some(512 + 512),
            scratch_root: None,
            max_frame_bytes: 16 << 20,
        }
    }
}

/// `SANDBOX_WORKERS` when set to a positive integer, else the CPU count.
pub fn default_pool_size() -> usize {
    std::env::var("SANDBOX_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<io::Result<String>>,
    stderr_tail: Arc<Mutex<VecDeque<String>>>,
    served: u32,
    _scratch: TempDir,
}

impl Worker {
    fn spawn(cfg: &SandboxConfig) -> io::Result<Worker> {
        let (program, args) = cfg
            .harness_cmd
            .split_first()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty harness command"))?;
        let scratch = match &cfg.scratch_root {
            Some(root) => tempfile::Builder::new().prefix("harness-").tempdir_in(root)?,
            None => tempfile::Builder::new().prefix("harness-").tempdir()?,
        };
        let mut cmd = Command::new(program);
        cmd.args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .env_clear()
            .env("PATH", std::env::var_os("PATH").unwrap_or_else(|| "/usr/bin:/bin".into()))
            .env("LANG", "C.UTF-8")
            .env("PYTHONIOENCODING", "utf-8")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("HOME", scratch.path())
            .env("TMPDIR", scratch.path())
            .env("HARNESS_SCRATCH", scratch.path())
            .current_dir(scratch.path());
        let memory_cap = cfg.memory_cap_mb.map(|mb| mb.saturating_mul(1 << 20));
        // SAFETY: only async-signal-safe libc calls between fork and exec.
        unsafe {
            cmd.pre_exec(move || {
                if libc::setsid() < 0 {
                    return Err(io::Error::last_os_error());
                }
                let no_core = libc::rlimit { rlim_cur: 0, rlim_max: 0 };
                libc::setrlimit(libc::RLIMIT_CORE, &no_core);
                if let Some(bytes) = memory_cap {
                    let lim = libc::rlimit {
                        rlim_cur: bytes as libc::rlim_t,
                        rlim_max: bytes as libc::rlim_t,
                    };
                    if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                        return Err(io::Error::last_os_error());
                    }
                }
                Ok(())
            });
        }
        let mut child = cmd.spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr = child.stderr.take().expect("piped stderr");

        let (tx, rx) = mpsc::channel();
        let max = cfg.max_frame_bytes;
        thread::Builder::new()
            .name("harness-stdout".into())
            .spawn(move || {
                let mut reader = BufReader::new(stdout);
                loop {
                    let mut buf = Vec::new();
                    match reader.by_ref().take(max as u64 + 1).read_until(b'\n', &mut buf) {
                        Ok(0) => break,
                        Ok(_) if buf.len() > max => {
                            let _ = tx.send(Err(io::Error::new(io::ErrorKind::InvalidData, "frame too long")));
                            break;
                        }
                        Ok(_) => {
                            let msg = String::from_utf8(buf)
                                .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "frame is not UTF-8"));
                            if tx.send(msg).is_err() {
                                break;
                            }
                        }
                        Err(e) => {
                            let _ = tx.send(Err(e));
                            break;
                        }
                    }
                }
            })?;

        let stderr_tail = Arc::new(Mutex::new(VecDeque::new()));
        let tail = stderr_tail.clone();
        thread::Builder::new().name("harness-stderr".into()).spawn(move || {
            for line in BufReader::new(stderr).lines() {
                let Ok(line) = line else { break };
                let mut t = tail.lock().unwrap_or_else(|p| p.into_inner());
                if t.len() == STDERR_TAIL_LINES {
                    t.pop_front();
                }
                t.push_back(line);
            }
        })?;

        debug!(pid = child.id(), "spawned harness worker");
        Ok(Worker {
            child,
            stdin,
            lines: rx,
            stderr_tail,
            served: 0,
            _scratch: scratch,
        })
    }

    fn stderr_excerpt(&self) -> String {
        let t = self.stderr_tail.lock().unwrap_or_else(|p| p.into_inner());
        t.iter().rev().take(5).rev().cloned().collect::<Vec<_>>().join("\n")
    }

    fn crash_text(&mut self, what: &str) -> String {
        // give the stderr thread a moment to drain the final lines
        thread::sleep(Duration::from_millis(20));
        let status = self
            .child
            .try_wait()
            .ok()
            .flatten()
            .map(|s| s.to_string())
            .unwrap_or_else(|| "still running".into());
        let tail = self.stderr_excerpt();
        if tail.is_empty() {
            format!("{what} ({status})")
        } else {
            format!("{what} ({status}): {tail}")
        }
    }

    /// Sends one request and waits for its response. The flag says whether
    /// the worker can be reused.
    fn roundtrip(&mut self, request: &ExecRequest, grace_ms: u64) -> (ExecutionResult, bool) {
        self.served += 1;
        let id = request.request_id.clone();
        let start = Instant::now();
        let line = encode_request(request);
        if let Err(e) = writeln!(self.stdin, "{line}").and_then(|_| self.stdin.flush()) {
            let text = self.crash_text(&format!("worker stdin closed: {e}"));
            return (
                ExecutionResult::failed(id, ExecStatus::ProtocolError, text, elapsed_ms(start)),
                false,
            );
        }
        let budget = Duration::from_millis(request.limits.wall_ms.saturating_add(grace_ms));
        match self.lines.recv_timeout(budget) {
            Ok(Ok(line)) => match decode_response(&line, &id) {
                Ok(frame) => {
                    let mut result: ExecutionResult = frame.into();
                    let reusable = matches!(result.status, ExecStatus::Ok | ExecStatus::Exception);
                    if let Some(out) = &result.output_canonical {
                        if out.len() as u64 > request.limits.max_output_bytes {
                            result = ExecutionResult::failed(
                                id,
                                ExecStatus::Exception,
                                format!("output of {} bytes exceeds max_output_bytes", out.len()),
                                result.wall_ms,
                            );
                        }
                    }
                    (result, reusable)
                }
                Err(e) => {
                    warn!(error = %e, "malformed frame from worker");
                    (
                        ExecutionResult::failed(id, ExecStatus::ProtocolError, e.to_string(), elapsed_ms(start)),
                        false,
                    )
                }
            },
            Ok(Err(e)) => (
                ExecutionResult::failed(id, ExecStatus::ProtocolError, e.to_string(), elapsed_ms(start)),
                false,
            ),
            Err(RecvTimeoutError::Timeout) => {
                warn!(request = %id, "worker missed its deadline; killing it");
                (
                    ExecutionResult::failed(
                        id,
                        ExecStatus::Timeout,
                        format!("no response within {} ms", budget.as_millis()),
                        elapsed_ms(start),
                    ),
                    false,
                )
            }
            Err(RecvTimeoutError::Disconnected) => {
                let text = self.crash_text("worker exited");
                (
                    ExecutionResult::failed(id, ExecStatus::ProtocolError, text, elapsed_ms(start)),
                    false,
                )
            }
        }
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let pid = self.child.id() as libc::pid_t;
        // SAFETY: plain kill(2) on the worker's own process group.
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

struct PoolState {
    idle: Vec<Worker>,
    live: usize,
    spawned: u64,
}

/// Bounded pool of harness workers.
///
/// Workers are replaced after a protocol error, a crash, a timeout, or
/// `recycle_after` requests. Concurrent callers block until a worker is free.
pub struct SandboxExecutor {
    cfg: SandboxConfig,
    state: Mutex<PoolState>,
    freed: Condvar,
}

impl std::fmt::Debug for SandboxExecutor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SandboxExecutor").field("cfg", &self.cfg).finish()
    }
}

impl SandboxExecutor {
    pub fn new(mut cfg: SandboxConfig) -> Self {
        cfg.pool_size = cfg.pool_size.max(1);
        cfg.recycle_after = cfg.recycle_after.max(1);
        SandboxExecutor {
            cfg,
            state: Mutex::new(PoolState {
                idle: Vec::new(),
                live: 0,
                spawned: 0,
            }),
            freed: Condvar::new(),
        }
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.cfg
    }

    /// Workers started since the pool was created.
    pub fn spawned_workers(&self) -> u64 {
        self.lock().spawned
    }

    pub fn live_workers(&self) -> usize {
        self.lock().live
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, PoolState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn spawn_counted(&self) -> io::Result<Worker> {
        match Worker::spawn(&self.cfg) {
            Ok(w) => {
                self.lock().spawned += 1;
                Ok(w)
            }
            Err(e) => {
                self.lock().live -= 1;
                self.freed.notify_one();
                Err(e)
            }
        }
    }

    fn checkout(&self, fresh: bool) -> io::Result<Worker> {
        let mut st = self.lock();
        loop {
            if !fresh {
                if let Some(w) = st.idle.pop() {
                    return Ok(w);
                }
            }
            if st.live < self.cfg.pool_size {
                st.live += 1;
                drop(st);
                return self.spawn_counted();
            }
            if fresh {
                if let Some(old) = st.idle.pop() {
                    // reuse the slot, not the process
                    drop(st);
                    drop(old);
                    return self.spawn_counted();
                }
            }
            st = self.freed.wait(st).unwrap_or_else(|p| p.into_inner());
        }
    }

    fn checkin(&self, worker: Worker, reusable: bool) {
        if reusable && worker.served < self.cfg.recycle_after {
            self.lock().idle.push(worker);
        } else {
            drop(worker);
            self.lock().live -= 1;
        }
        self.freed.notify_one();
    }

    fn run(&self, request: &ExecRequest, fresh: bool) -> ExecutionResult {
        if let Err(why) = request.validate() {
            return ExecutionResult::failed(request.request_id.clone(), ExecStatus::Exception, why, 0);
        }
        let mut worker = match self.checkout(fresh) {
            Ok(w) => w,
            Err(e) => {
                return ExecutionResult::failed(
                    request.request_id.clone(),
                    ExecStatus::ProtocolError,
                    format!("failed to start harness worker: {e}"),
                    0,
                )
            }
        };
        let (result, reusable) = worker.roundtrip(request, self.cfg.grace_ms);
        self.checkin(worker, reusable && !fresh);
        result
    }
}

impl Executor for SandboxExecutor {
    fn execute(&self, request: &ExecRequest) -> ExecutionResult {
        self.run(request, false)
    }

    fn execute_fresh(&self, request: &ExecRequest) -> ExecutionResult {
        self.run(request, true)
    }
}
