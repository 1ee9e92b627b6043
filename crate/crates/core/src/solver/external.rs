//! Invokes an external DIMACS solver process (CaDiCaL, MiniSat, kissat, ...)
//! as an alternative backend. Assumptions are appended as unit clauses; the
//! verdict is parsed from the standard "s ..." / "v ..." output lines.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;

use thiserror::Error;

use crate::cnf::Cnf;

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("failed to run solver {path}: {source}")]
    Spawn {
        path: String,
        source: std::io::Error,
    },
    #[error("solver produced no s-line verdict")]
    NoVerdict,
    #[error("solver exited abnormally: {0}")]
    Abnormal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExternalVerdict {
    Sat(Vec<bool>),
    Unsat,
}

#[derive(Debug, Clone)]
pub struct ExternalSolver {
    path: PathBuf,
}

impl ExternalSolver {
    pub fn new(path: impl Into<PathBuf>) -> ExternalSolver {
        ExternalSolver { path: path.into() }
    }

    /// Path from the `AIGCLASS_EXTERNAL_SOLVER` environment variable, if set.
    pub fn from_env() -> Option<ExternalSolver> {
        std::env::var_os("AIGCLASS_EXTERNAL_SOLVER").map(ExternalSolver::new)
    }

    pub fn solve(
        &self,
        cnf: &Cnf,
        assumptions: &[i32],
    ) -> Result<ExternalVerdict, ExternalError> {
        let mut dimacs = format!(
            "p cnf {} {}\n",
            cnf.num_vars(),
            cnf.len() + assumptions.len()
        );
        for clause in cnf.clauses() {
            for lit in clause {
                dimacs.push_str(&format!("{lit} "));
            }
            dimacs.push_str("0\n");
        }
        for lit in assumptions {
            dimacs.push_str(&format!("{lit} 0\n"));
        }
        let mut file = tempfile::NamedTempFile::new()?;
        file.write_all(dimacs.as_bytes())?;
        file.flush()?;

        let output = Command::new(&self.path)
            .arg(file.path())
            .output()
            .map_err(|source| ExternalError::Spawn {
                path: self.path.display().to_string(),
                source,
            })?;
        // DIMACS convention: exit code 10 for SAT, 20 for UNSAT.
        let stdout = String::from_utf8_lossy(&output.stdout);
        let mut verdict = None;
        let mut model = vec![false; cnf.num_vars() as usize + 1];
        for line in stdout.lines() {
            if let Some(rest) = line.strip_prefix("s ") {
                verdict = Some(rest.trim().to_string());
            } else if let Some(rest) = line.strip_prefix("v ") {
                for tok in rest.split_ascii_whitespace() {
                    if let Ok(lit) = tok.parse::<i32>() {
                        if lit > 0 {
                            let var = lit as usize;
                            if var < model.len() {
                                model[var] = true;
                            }
                        }
                    }
                }
            }
        }
        match verdict.as_deref() {
            Some("SATISFIABLE") => Ok(ExternalVerdict::Sat(model)),
            Some("UNSATISFIABLE") => Ok(ExternalVerdict::Unsat),
            Some(other) => Err(ExternalError::Abnormal(format!("verdict {other:?}"))),
            None => {
                if output.status.code() == Some(10) {
                    Ok(ExternalVerdict::Sat(model))
                } else if output.status.code() == Some(20) {
                    Ok(ExternalVerdict::Unsat)
                } else {
                    Err(ExternalError::NoVerdict)
                }
            }
        }
    }
}
