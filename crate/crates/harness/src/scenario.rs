//! Scenario files: which induction to simulate, with which user parameters
//! and engine configuration.
//!
//! ```json
//! {
//!   "name": "complex",
//!   "induction": "complex_information",
//!   "params": "../params/default.json",
//!   "max_turns": 50,
//!   "engine": { "thresholds": { "t_a": 0.3, "t_b": 0.7 } }
//! }
//! ```
//!
//! `params` is either a path (relative to the scenario file) or an inline
//! parameter object. The keyword `builtin` expands to one default scenario
//! per induction type; `builtin:<keyword>` selects one of them.

use std::path::{Path, PathBuf};

use mitigator_core::acts::TurnContext;
use mitigator_core::confusion::InductionType;
use mitigator_core::engine::EngineConfig;
use mitigator_core::simulator::{default_params, SimUserParams, DEFAULT_MAX_TURNS};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: invalid parameters: {message}")]
    Params { path: PathBuf, message: String },
    #[error("unknown builtin scenario `{0}`")]
    UnknownBuiltin(String),
    #[error("{path}: max_turns must be at least 1")]
    ZeroTurns { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub induction: InductionType,
    pub params: SimUserParams,
    pub max_turns: u32,
    pub engine: EngineConfig,
    pub context: TurnContext,
}

impl ScenarioSpec {
    pub fn builtin(induction: InductionType) -> Self {
        Self {
            name: induction.keyword().to_string(),
            induction,
            params: default_params(),
            max_turns: DEFAULT_MAX_TURNS,
            engine: EngineConfig::default(),
            context: TurnContext::simulation(),
        }
    }

    /// Same scenario for every induction type, named `<prefix><keyword>`.
    pub fn per_induction(prefix: &str, params: &SimUserParams) -> Vec<Self> {
        InductionType::ALL
            .into_iter()
            .map(|i| Self {
                name: format!("{prefix}{}", i.keyword()),
                params: params.clone(),
                ..Self::builtin(i)
            })
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ParamsRef {
    Path(String),
    Inline(Box<serde_json::Value>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    induction: InductionType,
    #[serde(default)]
    params: Option<ParamsRef>,
    #[serde(default)]
    max_turns: Option<u32>,
    #[serde(default)]
    engine: EngineConfig,
    #[serde(default)]
    context: Option<TurnContext>,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads and validates a parameter file; `builtin` gives the defaults.
pub fn load_params(spec: &str) -> Result<SimUserParams, ScenarioError> {
    if spec == "builtin" {
        return Ok(default_params());
    }
    let path = Path::new(spec);
    params_from_text(&read(path)?, path)
}

fn params_from_text(text: &str, path: &Path) -> Result<SimUserParams, ScenarioError> {
    let params: SimUserParams = serde_json::from_str(text).map_err(|source| ScenarioError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    params.validated().map_err(|e| ScenarioError::Params {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let text = read(path)?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|source| ScenarioError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let params = match file.params {
        None => default_params(),
        Some(ParamsRef::Path(p)) if p == "builtin" => default_params(),
        Some(ParamsRef::Path(p)) => {
            let target = path.parent().unwrap_or(Path::new(".")).join(p);
            params_from_text(&read(&target)?, &target)?
        }
        Some(ParamsRef::Inline(v)) => params_from_text(&v.to_string(), path)?,
    };
    let max_turns = file.max_turns.unwrap_or(DEFAULT_MAX_TURNS);
    if max_turns == 0 {
        return Err(ScenarioError::ZeroTurns {
            path: path.to_path_buf(),
        });
    }
    let name = file.name.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    Ok(ScenarioSpec {
        name,
        induction: file.induction,
        params,
        max_turns,
        engine: file.engine,
        context: file.context.unwrap_or_else(TurnContext::simulation),
    })
}

/// Resolves one `--scenario` argument into one or more scenarios.
pub fn load_scenarios(spec: &str) -> Result<Vec<ScenarioSpec>, ScenarioError> {
    if spec == "builtin" {
        return Ok(InductionType::ALL.into_iter().map(ScenarioSpec::builtin).collect());
    }
    if let Some(keyword) = spec.strip_prefix("builtin:") {
        let induction = InductionType::from_keyword(keyword)
            .or_else(|| InductionType::from_name(keyword))
            .ok_or_else(|| ScenarioError::UnknownBuiltin(keyword.to_string()))?;
        return Ok(vec![ScenarioSpec::builtin(induction)]);
    }
    Ok(vec![load_scenario_file(Path::new(spec))?])
}
