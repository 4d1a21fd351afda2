//! Execution of model-written programs through an external runner.
//!
//! The runner is invoked as `<command...> <program-file> --timeout-sec S
//! --solver-bin PATH` and must print one JSON [`ExecResult`] on stdout.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::parse::ProgramSource;

/// Extra time granted to the runner beyond the program timeout.
pub const RUNNER_GRACE: Duration = Duration::from_secs(5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecStatus {
    Ok,
    ExecError,
    TimedOut,
    FormatError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramOutput {
    pub objective_cost: i64,
    pub solution_json: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub status: ExecStatus,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub parsed: Option<ProgramOutput>,
}

impl ExecResult {
    pub fn exec_error(stderr: impl Into<String>) -> Self {
        ExecResult {
            status: ExecStatus::ExecError,
            stdout: String::new(),
            stderr: stderr.into(),
            parsed: None,
        }
    }
}

pub trait Sandbox: Send + Sync {
    fn execute(&self, program: &ProgramSource, timeout: Duration) -> ExecResult;
}

/// Stand-in used when no runner is configured: every program fails.
#[derive(Clone, Copy, Debug, Default)]
pub struct UnavailableSandbox;

impl Sandbox for UnavailableSandbox {
    fn execute(&self, _program: &ProgramSource, _timeout: Duration) -> ExecResult {
        ExecResult::exec_error("program execution is unavailable: no sandbox runner configured")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessSandbox {
    /// Runner command and leading arguments, e.g. `["sandbox-run"]`.
    pub command: Vec<String>,
    pub solver_bin: PathBuf,
}

impl Sandbox for ProcessSandbox {
    fn execute(&self, program: &ProgramSource, timeout: Duration) -> ExecResult {
        match self.run(program, timeout) {
            Ok(r) => r,
            Err(msg) => ExecResult::exec_error(msg),
        }
    }
}

impl ProcessSandbox {
    fn run(&self, program: &ProgramSource, timeout: Duration) -> Result<ExecResult, String> {
        let (exe, lead) = self.command.split_first().ok_or("empty runner command")?;
        let dir = tempfile::tempdir().map_err(|e| format!("cannot create work directory: {e}"))?;
        let file = dir.path().join("program.py");
        std::fs::write(&file, &program.code).map_err(|e| format!("cannot write program: {e}"))?;
        let secs = timeout.as_secs().max(1);
        let mut child = Command::new(exe)
            .args(lead)
            .arg(&file)
            .arg("--timeout-sec")
            .arg(secs.to_string())
            .arg("--solver-bin")
            .arg(&self.solver_bin)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot start runner {exe}: {e}"))?;
        let mut out = child.stdout.take().expect("piped");
        let mut err = child.stderr.take().expect("piped");
        let out_t = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = out.read_to_string(&mut s);
            s
        });
        let err_t = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = err.read_to_string(&mut s);
            s
        });
        let limit = Duration::from_secs(secs) + RUNNER_GRACE;
        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(st)) => break Some(st),
                Ok(None) if started.elapsed() > limit => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(20)),
                Err(e) => return Err(format!("waiting for runner failed: {e}")),
            }
        };
        let stdout = out_t.join().unwrap_or_default();
        let stderr = err_t.join().unwrap_or_default();
        match status {
            None => Ok(ExecResult {
                status: ExecStatus::TimedOut,
                stdout,
                stderr: format!("runner exceeded {}s and was killed\n{stderr}", limit.as_secs()),
                parsed: None,
            }),
            Some(st) if !st.success() => Err(format!("runner exited with {st}\n{stderr}")),
            Some(_) => serde_json::from_str::<ExecResult>(stdout.trim())
                .map_err(|e| format!("runner printed no ExecResult ({e})\n{stderr}")),
        }
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use std::os::unix::fs::PermissionsExt;

    fn script(dir: &std::path::Path, body: &str) -> PathBuf {
        let p = dir.join("runner.sh");
        std::fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
        p
    }

    fn program() -> ProgramSource {
        ProgramSource {
            code: "print('hi')\n".into(),
            language: "python".into(),
        }
    }

    #[test]
    fn runner_contract() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("args.txt");
        let runner = script(
            dir.path(),
            &format!(
                "echo \"$@\" > {}\ncat \"$1\" >> {}\necho '{{\"status\":\"Ok\",\"stdout\":\"x\",\"stderr\":\"\",\"parsed\":{{\"objective_cost\":1,\"solution_json\":{{\"selected\":[0]}}}}}}'",
                log.display(),
                log.display()
            ),
        );
        let sb = ProcessSandbox {
            command: vec![runner.display().to_string()],
            solver_bin: "/opt/prefsat".into(),
        };
        let r = sb.execute(&program(), Duration::from_secs(7));
        assert_eq!(r.status, ExecStatus::Ok);
        assert_eq!(r.parsed.unwrap().objective_cost, 1);
        let args = std::fs::read_to_string(&log).unwrap();
        assert!(args.contains("program.py --timeout-sec 7 --solver-bin /opt/prefsat"));
        assert!(args.contains("print('hi')"));
    }

    #[test]
    fn runner_failures_become_exec_errors() {
        let dir = tempfile::tempdir().unwrap();
        let sb = ProcessSandbox {
            command: vec![script(dir.path(), "echo boom >&2; exit 3").display().to_string()],
            solver_bin: "x".into(),
        };
        let r = sb.execute(&program(), Duration::from_secs(1));
        assert_eq!(r.status, ExecStatus::ExecError);
        assert!(r.stderr.contains("boom"));

        let missing = ProcessSandbox {
            command: vec!["/nonexistent/runner".into()],
            solver_bin: "x".into(),
        };
        assert_eq!(missing.execute(&program(), Duration::from_secs(1)).status, ExecStatus::ExecError);
        assert_eq!(
            UnavailableSandbox.execute(&program(), Duration::from_secs(1)).status,
            ExecStatus::ExecError
        );
    }
}
