use std::fmt::Display;
use std::io::Read;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{parse_accuracy, EvalError, Evaluator};

/// Runs a shell command per architecture.
///
/// The command is run as `sh -c <command> pop-eval <code>`, so the code is
/// available as `$1`. The last non-empty line of standard output must be
/// the accuracy, as a fraction or a percentage.
#[derive(Debug, Clone)]
pub struct ExternalCommand {
    pub command: String,
    pub timeout: Option<Duration>,
    /// Whether several instances may run at once.
    pub parallel: bool,
}

impl ExternalCommand {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalCommand {
            command: command.into(),
            timeout: None,
            parallel: false,
        }
    }

    pub fn run(&self, code: &str) -> Result<f64, EvalError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .arg("pop-eval")
            .arg(code)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| EvalError::Spawn {
                command: self.command.clone(),
                source,
            })?;
        let drain = |pipe: Option<Box<dyn Read + Send>>| {
            thread::spawn(move || {
                let mut buf = String::new();
                if let Some(mut p) = pipe {
                    let _ = p.read_to_string(&mut buf);
                }
                buf
            })
        };
        let out = drain(
            child
                .stdout
                .take()
                .map(|p| Box::new(p) as Box<dyn Read + Send>),
        );
        let err = drain(
            child
                .stderr
                .take()
                .map(|p| Box::new(p) as Box<dyn Read + Send>),
        );

        let start = Instant::now();
        let status = loop {
            if let Some(status) = child.try_wait().map_err(|source| EvalError::Spawn {
                command: self.command.clone(),
                source,
            })? {
                break Some(status);
            }
            if self.timeout.is_some_and(|t| start.elapsed() >= t) {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            thread::sleep(Duration::from_millis(5));
        };
        let stdout = out.join().unwrap_or_default();
        let stderr = err.join().unwrap_or_default();
        let Some(status) = status else {
            return Err(EvalError::Timeout {
                timeout: self.timeout.unwrap_or_default(),
                stdout,
                stderr,
            });
        };
        if !status.success() {
            return Err(EvalError::NonZeroExit {
                status: status.to_string(),
                stdout,
                stderr,
            });
        }
        let last = stdout
            .lines()
            .map(str::trim)
            .rfind(|l| !l.is_empty())
            .unwrap_or("");
        parse_accuracy(last).ok_or_else(|| EvalError::Unparseable {
            output: last.to_string(),
        })
    }
}

impl<C: Display + ?Sized> Evaluator<C> for ExternalCommand {
    fn evaluate(&self, element: &C) -> Result<f64, EvalError> {
        self.run(&element.to_string())
    }

    fn concurrency_safe(&self) -> bool {
        self.parallel
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_last_line() {
        let cmd = ExternalCommand::new("echo training $1; echo; echo 69.8%");
        assert_eq!(cmd.run("[(64),(64),(64)]").unwrap(), 0.698);
        let cmd = ExternalCommand::new("printf '0.5\\n'");
        assert_eq!(cmd.run("x").unwrap(), 0.5);
    }

    #[test]
    fn code_is_first_argument() {
        let cmd = ExternalCommand::new(r#"test "$1" = "[(64),(64),(128)]" && echo 0.25"#);
        assert_eq!(cmd.run("[(64),(64),(128)]").unwrap(), 0.25);
    }

    #[test]
    fn failures_are_reported() {
        let cmd = ExternalCommand::new("echo oops >&2; exit 3");
        match cmd.run("x") {
            Err(EvalError::NonZeroExit { stderr, .. }) => assert_eq!(stderr.trim(), "oops"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ExternalCommand::new("echo nope").run("x"),
            Err(EvalError::Unparseable { .. })
        ));
        assert!(matches!(
            ExternalCommand::new("echo 1.5").run("x"),
            Err(EvalError::Unparseable { .. })
        ));
        let slow = ExternalCommand {
            timeout: Some(Duration::from_millis(100)),
            ..ExternalCommand::new("exec sleep 5")
        };
        assert!(matches!(slow.run("x"), Err(EvalError::Timeout { .. })));
    }
}
