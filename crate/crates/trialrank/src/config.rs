//! Run configurations: flat key-value files describing which query
//! representation, views, and relevance model a run uses.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::FieldView;
use crate::fusion::FusionWeights;
use crate::keywords::{BudgetUnit, KeywordConfig, LengthPolicy};
use crate::retrieval::Bm25Params;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io error reading config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryRepr {
    /// The verbose admission note as provided.
    Qd,
    /// The extracted keyword representation.
    Qk,
}

impl fmt::Display for QueryRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryRepr::Qd => "Qd",
            QueryRepr::Qk => "Qk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelevanceModel {
    Bm25,
    /// TOPSIS fusion with mean weights over the three criterion views.
    TtMw,
    /// BM25 first stage passed through the plug-in reranker hook.
    Bm25Rerank,
}

impl fmt::Display for RelevanceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelevanceModel::Bm25 => "BM25",
            RelevanceModel::TtMw => "TT_MW",
            RelevanceModel::Bm25Rerank => "BM25+rerank",
        })
    }
}

/// Everything one run needs: representation, views, model, and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub run_name: String,
    pub query_representation: QueryRepr,
    pub views: Vec<FieldView>,
    pub relevance_model: RelevanceModel,
    pub bm25: Bm25Params,
    pub keywords: KeywordConfig,
    pub weights: FusionWeights,
    /// Documents pooled per view when fusing.
    pub pool_depth: usize,
    /// Retrieval depth of the final run.
    pub depth: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_name: "run".into(),
            query_representation: QueryRepr::Qd,
            views: vec![FieldView::IComb],
            relevance_model: RelevanceModel::Bm25,
            bm25: Bm25Params::default(),
            keywords: KeywordConfig::default(),
            weights: FusionWeights::default(),
            pool_depth: 1000,
            depth: 1000,
            output: None,
        }
    }
}

const TT_MW_VIEWS: [FieldView; 3] = [FieldView::IIn, FieldView::IEx, FieldView::IMain];

impl RunConfig {
    /// TT_MW requires exactly the views {i_in, i_ex, i_main}; the BM25
    /// models require exactly one view.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.bm25
            .validate()
            .map_err(ConfigError::InvalidConfig)?;
        if !(0.0..=1.0).contains(&self.keywords.lambda) {
            return Err(ConfigError::InvalidConfig(format!(
                "lambda must be in [0,1], got {}",
                self.keywords.lambda
            )));
        }
        self.weights
            .validate()
            .map_err(|e| ConfigError::InvalidConfig(e.to_string()))?;
        if self.pool_depth == 0 || self.depth == 0 {
            return Err(ConfigError::InvalidConfig(
                "depth and pool_depth must be at least 1".into(),
            ));
        }
        match self.relevance_model {
            RelevanceModel::TtMw => {
                let mut got = self.views.clone();
                got.sort_by_key(FieldView::as_str);
                let mut want = TT_MW_VIEWS.to_vec();
                want.sort_by_key(FieldView::as_str);
                if got != want {
                    return Err(ConfigError::InvalidConfig(format!(
                        "TT_MW requires exactly the views i_in, i_ex, i_main; got {:?}",
                        self.views.iter().map(FieldView::as_str).collect::<Vec<_>>()
                    )));
                }
            }
            RelevanceModel::Bm25 | RelevanceModel::Bm25Rerank => {
                if self.views.len() != 1 {
                    return Err(ConfigError::InvalidConfig(format!(
                        "{} requires exactly one view; got {}",
                        self.relevance_model,
                        self.views.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses a flat key-value config file (`key = value`, `#` comments).
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let content = std::fs::read_to_string(path)?;
        Self::from_str(&content)
    }
}

fn parse_key<T: std::str::FromStr>(value: &str, key: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| ConfigError::InvalidConfig(format!("bad value for {key}: {e}")))
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(content: &str) -> Result<Self, Self::Err> {
        let mut pairs: HashMap<String, String> = HashMap::new();
        for (lineno, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
            })?;
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }

        let mut config = RunConfig::default();
        for (key, value) in &pairs {
            match key.as_str() {
                "run_name" => config.run_name = value.clone(),
                "query_representation" => {
                    config.query_representation = match value.to_ascii_lowercase().as_str() {
                        "qd" => QueryRepr::Qd,
                        "qk" => QueryRepr::Qk,
                        other => {
                            return Err(ConfigError::InvalidConfig(format!(
                                "unknown query_representation {other:?}"
                            )))
                        }
                    }
                }
                "views" => {
                    config.views = value
                        .split(',')
                        .map(str::trim)
                        .filter(|v| !v.is_empty())
                        .map(|v| {
                            FieldView::from_str(v).map_err(ConfigError::InvalidConfig)
                        })
                        .collect::<Result<_, _>>()?;
                }
                "relevance_model" => {
                    config.relevance_model = match value.to_ascii_lowercase().as_str() {
                        "bm25" => RelevanceModel::Bm25,
                        "tt_mw" | "topsis" => RelevanceModel::TtMw,
                        "bm25+rerank" | "bm25+bert" => RelevanceModel::Bm25Rerank,
                        other => {
                            return Err(ConfigError::InvalidConfig(format!(
                                "unknown relevance_model {other:?}"
                            )))
                        }
                    }
                }
                "k1" => config.bm25.k1 = parse_key(value, key)?,
                "b" => config.bm25.b = parse_key(value, key)?,
                "lambda" => config.keywords.lambda = parse_key(value, key)?,
                "standardize" => config.keywords.standardize = parse_key(value, key)?,
                "budget_unit" => {
                    config.keywords.budget_unit = match value.to_ascii_lowercase().as_str() {
                        "tokens" => BudgetUnit::Tokens,
                        "phrases" => BudgetUnit::Phrases,
                        other => {
                            return Err(ConfigError::InvalidConfig(format!(
                                "unknown budget_unit {other:?}"
                            )))
                        }
                    }
                }
                "keyword_budget" => {
                    config.keywords.length_policy =
                        LengthPolicy::Fixed(parse_key(value, key)?);
                }
                "weight_in" => config.weights.r_in = parse_key(value, key)?,
                "weight_ex" => config.weights.r_ex = parse_key(value, key)?,
                "weight_main" => config.weights.r_main = parse_key(value, key)?,
                "pool_depth" => config.pool_depth = parse_key(value, key)?,
                "depth" => config.depth = parse_key(value, key)?,
                "output" => config.output = Some(PathBuf::from(value)),
                other => {
                    return Err(ConfigError::InvalidConfig(format!(
                        "unknown config key {other:?}"
                    )))
                }
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_bm25_config() {
        let config: RunConfig = "\
            # comment\n\
            run_name = IKR3_BSL\n\
            query_representation = Qk\n\
            views = i_comb\n\
            relevance_model = BM25\n\
            k1 = 1.2\n\
            b = 0.75\n\
            depth = 500\n"
            .parse()
            .unwrap();
        assert_eq!(config.run_name, "IKR3_BSL");
        assert_eq!(config.query_representation, QueryRepr::Qk);
        assert_eq!(config.views, vec![FieldView::IComb]);
        assert_eq!(config.relevance_model, RelevanceModel::Bm25);
        assert_eq!(config.depth, 500);
    }

    #[test]
    fn parse_tt_mw_config() {
        let config: RunConfig = "\
            run_name = fused\n\
            query_representation = Qd\n\
            views = i_in, i_ex, i_main\n\
            relevance_model = TT_MW\n\
            pool_depth = 100\n"
            .parse()
            .unwrap();
        assert_eq!(config.relevance_model, RelevanceModel::TtMw);
        assert_eq!(config.views.len(), 3);
    }

    #[test]
    fn tt_mw_with_two_views_rejected() {
        let err = "views = i_in, i_ex\nrelevance_model = TT_MW\n"
            .parse::<RunConfig>()
            .unwrap_err();
        assert!(matches!(err, ConfigError::InvalidConfig(_)));
    }

    #[test]
    fn bm25_with_multiple_views_rejected() {
        let err = "views = i_in, i_ex\nrelevance_model = BM25\n"
            .parse::<RunConfig>()
            .unwrap_err();
        assert!(err.to_string().contains("exactly one view"));
    }

    #[test]
    fn unknown_keys_and_values_rejected() {
        assert!("nonsense = 1\n".parse::<RunConfig>().is_err());
        assert!("relevance_model = pagerank\n".parse::<RunConfig>().is_err());
        assert!("views = i_bogus\n".parse::<RunConfig>().is_err());
        assert!("lambda = 1.5\n".parse::<RunConfig>().is_err());
        assert!("k1 = -1\n".parse::<RunConfig>().is_err());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let err = "\
            views = i_in, i_ex, i_main\n\
            relevance_model = TT_MW\n\
            weight_in = 0.5\n\
            weight_ex = 0.4\n\
            weight_main = 0.4\n"
            .parse::<RunConfig>()
            .unwrap_err();
        assert!(matches!(err, ConfigError::InvalidConfig(_)));
    }

    #[test]
    fn bundled_run_configs_parse() {
        let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/configs"));
        for name in ["r1.cfg", "r2.cfg", "r3.cfg", "r4.cfg", "r5.cfg"] {
            let config = RunConfig::from_file(&dir.join(name))
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            config.validate().unwrap();
        }
    }

    #[test]
    fn r2_r3_differ_only_in_query_representation() {
        let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/configs"));
        let r2 = RunConfig::from_file(&dir.join("r2.cfg")).unwrap();
        let r3 = RunConfig::from_file(&dir.join("r3.cfg")).unwrap();
        assert_eq!(r2.query_representation, QueryRepr::Qd);
        assert_eq!(r3.query_representation, QueryRepr::Qk);
        let mut r3_as_r2 = r3.clone();
        r3_as_r2.query_representation = r2.query_representation;
        r3_as_r2.run_name = r2.run_name.clone();
        r3_as_r2.output = r2.output.clone();
        assert_eq!(r2, r3_as_r2, "same indexes, same fusion settings");
    }
}
