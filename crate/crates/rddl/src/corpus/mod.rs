//! Shipped proof scripts and models, and the script loader.

mod model;
mod script;

use std::path::Path;

pub use model::{parse_model, Model, ModelBody};
pub use script::{parse_script, Script, ScriptError};

use std::time::Instant;

use rayon::prelude::*;

use crate::kernel::{check_proof, Certificate, KernelConfig, Status};

/// A shipped script with its pinned outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: &'static str,
    pub source: &'static str,
    pub expected: Expected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expected {
    Checks { status: Status, obligations: usize },
    /// Negative controls: the kernel must reject the script.
    Rejected,
}

macro_rules! corpus_file {
    ($name:literal) => {
        include_str!(concat!("../../../../corpus/", $name))
    };
}

pub fn corpus_manifest() -> Vec<ManifestEntry> {
    use Expected::*;
    use Status::*;
    vec![
        ManifestEntry {
            name: "phi_C",
            source: corpus_file!("phi_C.rdl"),
            expected: Checks { status: Unconditional, obligations: 0 },
        },
        ManifestEntry {
            name: "drag",
            source: corpus_file!("drag.rdl"),
            expected: Checks { status: Unconditional, obligations: 0 },
        },
        ManifestEntry {
            name: "phi_C_mcs",
            source: corpus_file!("phi_C_mcs.rdl"),
            expected: Checks { status: Unconditional, obligations: 0 },
        },
        ManifestEntry {
            name: "decay_6",
            source: corpus_file!("decay_6.rdl"),
            expected: Checks { status: Unconditional, obligations: 0 },
        },
        ManifestEntry {
            name: "decay_7",
            source: corpus_file!("decay_7.rdl"),
            expected: Checks { status: Unconditional, obligations: 0 },
        },
        ManifestEntry {
            name: "decay_8",
            source: corpus_file!("decay_8.rdl"),
            expected: Checks { status: Unconditional, obligations: 0 },
        },
        ManifestEntry {
            name: "decay_9",
            source: corpus_file!("decay_9.rdl"),
            expected: Checks { status: Unconditional, obligations: 0 },
        },
        ManifestEntry { name: "phi_C_broken", source: corpus_file!("phi_C_broken.rdl"), expected: Rejected },
    ]
}

pub fn load_script(path: &Path) -> Result<Script, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_script(&text)?)
}

pub fn load_model(path: &Path) -> Result<Model, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_model(&text)?)
}

/// Outcome of checking one manifest entry.
#[derive(Debug)]
pub struct ManifestRun {
    pub entry: ManifestEntry,
    pub result: Result<Certificate, String>,
    pub wall_ms: u128,
}

impl ManifestRun {
    /// Whether the outcome matches the pinned expectation.
    pub fn as_expected(&self) -> bool {
        match (&self.entry.expected, &self.result) {
            (Expected::Checks { status, obligations }, Ok(c)) => c.status == *status && c.obligations.len() == *obligations,
            (Expected::Rejected, Err(_)) => true,
            _ => false,
        }
    }
}

/// Checks every manifest entry in parallel; results come back in manifest order.
pub fn run_manifest(cfg: &KernelConfig) -> Vec<ManifestRun> {
    corpus_manifest()
        .into_par_iter()
        .map(|entry| {
            let start = Instant::now();
            let result = parse_script(entry.source)
                .map_err(|e| e.to_string())
                .and_then(|s| check_proof(&s.sequent, &s.proof, cfg).map_err(|e| e.to_string()));
            ManifestRun { entry, result, wall_ms: start.elapsed().as_millis() }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {0}")]
    Io(String),
    #[error(transparent)]
    Script(#[from] ScriptError),
}

#[cfg(test)]
mod tests;
