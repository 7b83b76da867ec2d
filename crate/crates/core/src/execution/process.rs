//! Child processes with captured streams and a hard timeout.
//!
//! Every child runs in its own process group. On timeout the whole group is
//! killed; after a normal exit the group is killed as well, so stray
//! grandchildren cannot keep the output pipes open.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::ExecError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessOutcome {
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub duration_ms: u64,
    pub timed_out: bool,
}

/// Runs `argv` in `cwd` with `env` layered over the inherited environment.
/// A relative program path containing `/` is resolved against `cwd`.
pub fn run_process(
    argv: &[String],
    cwd: &Path,
    env: &BTreeMap<String, String>,
    timeout: Duration,
) -> Result<ProcessOutcome, ExecError> {
    let (program, args) = argv.split_first().ok_or_else(|| ExecError::Config("empty command".into()))?;
    let program_path = PathBuf::from(program);
    let program_path = if program.contains('/') && program_path.is_relative() {
        cwd.join(program_path)
    } else {
        program_path
    };
    let mut cmd = Command::new(&program_path);
    cmd.args(args)
        .current_dir(cwd)
        .envs(env)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let started = Instant::now();
    let mut child = cmd.spawn().map_err(|source| ExecError::Spawn {
        program: program.clone(),
        source,
    })?;
    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());

    let mut poll = Duration::from_millis(1);
    let (status, timed_out) = loop {
        match child.try_wait() {
            Ok(Some(status)) => break (Some(status), false),
            Ok(None) if started.elapsed() >= timeout => {
                kill_group(&mut child);
                let _ = child.wait();
                break (None, true);
            }
            Ok(None) => {
                thread::sleep(poll.min(timeout.saturating_sub(started.elapsed())));
                poll = (poll * 2).min(Duration::from_millis(20));
            }
            Err(source) => {
                kill_group(&mut child);
                let _ = child.wait();
                return Err(ExecError::Spawn {
                    program: program.clone(),
                    source,
                });
            }
        }
    };
    if !timed_out {
        kill_group(&mut child);
    }
    let duration_ms = started.elapsed().as_millis() as u64;
    Ok(ProcessOutcome {
        exit_code: status.and_then(|s| s.code()),
        stdout: stdout.join().unwrap_or_default(),
        stderr: stderr.join().unwrap_or_default(),
        duration_ms,
        timed_out,
    })
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

#[cfg(unix)]
fn kill_group(child: &mut Child) {
    // process_group(0) made the child's pid its group id
    let pgid = child.id() as libc::pid_t;
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_group(child: &mut Child) {
    let _ = child.kill();
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    fn sh(script: &str, timeout_ms: u64) -> ProcessOutcome {
        let argv = vec!["sh".to_string(), "-c".to_string(), script.to_string()];
        run_process(&argv, Path::new("."), &BTreeMap::new(), Duration::from_millis(timeout_ms)).unwrap()
    }

    #[test]
    fn captures_streams_and_exit_code() {
        let out = sh("echo out; echo err >&2; exit 3", 5_000);
        assert_eq!(out.stdout, "out\n");
        assert_eq!(out.stderr, "err\n");
        assert_eq!(out.exit_code, Some(3));
        assert!(!out.timed_out);
    }

    #[test]
    fn timeout_kills_process_tree() {
        let started = Instant::now();
        let out = sh("sleep 5 & sleep 5; echo never", 100);
        assert!(out.timed_out);
        assert_eq!(out.exit_code, None);
        assert!(!out.stdout.contains("never"));
        assert!(started.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn background_grandchild_does_not_block() {
        let started = Instant::now();
        let out = sh("(sleep 5; echo late) & echo early", 5_000);
        assert_eq!(out.stdout, "early\n");
        assert!(started.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn env_overlay_is_visible() {
        let env = BTreeMap::from([("T4P_PROBE".to_string(), "hello".to_string())]);
        let argv = vec!["sh".to_string(), "-c".to_string(), "printf %s \"$T4P_PROBE\"".to_string()];
        let out = run_process(&argv, Path::new("."), &env, Duration::from_secs(5)).unwrap();
        assert_eq!(out.stdout, "hello");
    }

    #[test]
    fn missing_program_is_spawn_error() {
        let argv = vec!["/nonexistent/t4p-harness".to_string()];
        let err = run_process(&argv, Path::new("."), &BTreeMap::new(), Duration::from_secs(1)).unwrap_err();
        assert!(matches!(err, ExecError::Spawn { .. }));
    }
}
