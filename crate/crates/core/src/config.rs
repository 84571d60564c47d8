//! Experiment configuration: JSON schema, validation and hashing.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::{prob, Distribution, Prob, ProbSpec};
use crate::graph::{complete_bipartite, Graph, GraphSeq};
use crate::verify::{Arithmetic, FLOAT_TOLERANCE, KS_TOLERANCE};

/// A validation problem, located by line/column for syntax errors and by
/// field path for schema and semantic errors.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.to_string(),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "line {l}, column {c}: ")?;
        }
        if !self.field.is_empty() && self.field != "." {
            write!(f, "field `{}`: ", self.field)?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    /// `K_{m,m}` for `m = m_min..=m_max`.
    CompleteBipartite { m_min: usize, m_max: usize },
    /// Inline sequence of graphs.
    Explicit { graphs: GraphSeq },
    /// Sequence stored as JSON, relative paths resolved against the
    /// directory of the config file.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub exact: f64,
    pub float: f64,
    pub ks: f64,
    pub gap_ks: f64,
    pub sigma_band: f64,
    /// Minimum KS distance of row draws from the standard normal, checked by
    /// `ks-test` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_floor: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 0.0,
            float: FLOAT_TOLERANCE,
            ks: KS_TOLERANCE,
            gap_ks: 0.03,
            sigma_band: 4.0,
            normal_floor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleFile {
    pub path: PathBuf,
    pub column: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KsSection {
    /// Draws from the reference law.
    pub reference_samples: usize,
    /// Compare samples read from a CSV instead of simulating rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<SampleFile>,
}

impl Default for KsSection {
    fn default() -> Self {
        KsSection {
            reference_samples: 100_000,
            input: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSection {
    pub checkpoint: usize,
    pub reference_samples: usize,
}

impl Default for GapSection {
    fn default() -> Self {
        GapSection {
            checkpoint: 0,
            reference_samples: 100_000,
        }
    }
}

fn default_reps() -> usize {
    1000
}

fn default_tuple_size() -> usize {
    3
}

fn default_arithmetic() -> Arithmetic {
    Arithmetic::Exact
}

fn is_false(b: &bool) -> bool {
    !b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub distribution: Distribution,
    pub ell: u32,
    /// Mixture weight; `1/ell` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<ProbSpec>,
    /// Required to accept a `tau` with `tau * ell != 1`.
    #[serde(default, skip_serializing_if = "is_false")]
    pub acknowledge_tau_override: bool,
    pub graph: GraphSpec,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default = "default_tuple_size")]
    pub tuple_size: usize,
    #[serde(default = "default_arithmetic")]
    pub arithmetic: Arithmetic,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub ks: KsSection,
    #[serde(default)]
    pub gap: GapSection,
    /// Output directory; the `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError {
                field: path,
                line: Some(inner.line()),
                column: Some(inner.column()),
                message: inner.to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::field("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ell < 2 {
            return Err(ConfigError::field("ell", "must be at least 2"));
        }
        if self.reps == 0 {
            return Err(ConfigError::field("reps", "must be at least 1"));
        }
        if self.tuple_size < 1 {
            return Err(ConfigError::field("tuple_size", "must be at least 1"));
        }
        let tau = self.tau_value()?;
        if tau != self.default_tau() && !self.acknowledge_tau_override {
            return Err(ConfigError::field(
                "tau",
                "tau * ell must equal 1; set acknowledge_tau_override to use another weight",
            ));
        }
        if let GraphSpec::CompleteBipartite { m_min, m_max } = self.graph {
            if m_min == 0 || m_max < m_min {
                return Err(ConfigError::field("graph", "need 1 <= m_min <= m_max"));
            }
        }
        let t = &self.tolerances;
        for (name, x) in [("exact", t.exact), ("float", t.float), ("ks", t.ks), ("gap_ks", t.gap_ks), ("sigma_band", t.sigma_band)] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(ConfigError::field(&format!("tolerances.{name}"), "must be finite and non-negative"));
            }
        }
        if self.ks.reference_samples == 0 {
            return Err(ConfigError::field("ks.reference_samples", "must be at least 1"));
        }
        if self.gap.reference_samples == 0 {
            return Err(ConfigError::field("gap.reference_samples", "must be at least 1"));
        }
        Ok(())
    }

    fn default_tau(&self) -> Prob {
        prob(1, i64::from(self.ell))
    }

    pub fn tau_value(&self) -> Result<Prob, ConfigError> {
        match &self.tau {
            None => Ok(self.default_tau()),
            Some(spec) => spec
                .to_prob()
                .map_err(|e| ConfigError::field("tau", e.to_string())),
        }
    }

    /// Hex SHA-256 of the compact serialized config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// The graph sequence; file paths are resolved against `base`.
    pub fn graph_seq(&self, base: &Path) -> Result<GraphSeq, ConfigError> {
        match &self.graph {
            GraphSpec::CompleteBipartite { m_min, m_max } => Ok(GraphSeq::complete_bipartite(*m_min, *m_max)),
            GraphSpec::Explicit { graphs } => Ok(graphs.clone()),
            GraphSpec::File { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| ConfigError::field("graph.path", format!("cannot read {}: {e}", full.display())))?;
                serde_json::from_str(&text).map_err(|e| ConfigError {
                    field: "graph.path".into(),
                    line: Some(e.line()),
                    column: Some(e.column()),
                    message: format!("{}: {e}", full.display()),
                })
            }
        }
    }

    /// Largest graph of the sequence, built without the smaller ones for
    /// the complete bipartite family.
    pub fn row_graph(&self, base: &Path) -> Result<Graph, ConfigError> {
        match &self.graph {
            GraphSpec::CompleteBipartite { m_max, .. } => Ok(complete_bipartite(*m_max)),
            _ => {
                let gs = self.graph_seq(base)?;
                Ok(gs.graphs().last().expect("sequence is non-empty").clone())
            }
        }
    }
}
