//! Run configuration, loadable from TOML. Every field has a default so a
//! config file only needs the values it changes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::ScenarioParams;
use crate::error::{Error, Result};
use crate::jcpot::validate_lambda;
use crate::ot::SinkhornParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    JcpotLp,
    JcpotPt,
    OtdaLp,
    OtdaPt,
    /// 1-NN on the merged raw sources.
    NoAdapt,
    /// 1-NN trained on a labeled 80 % split of the target itself.
    TargetOnly,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::JcpotLp,
        Method::JcpotPt,
        Method::OtdaLp,
        Method::OtdaPt,
        Method::NoAdapt,
        Method::TargetOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::JcpotLp => "jcpot-lp",
            Method::JcpotPt => "jcpot-pt",
            Method::OtdaLp => "otda-lp",
            Method::OtdaPt => "otda-pt",
            Method::NoAdapt => "no-adapt",
            Method::TargetOnly => "target-only",
        }
    }

    pub fn is_jcpot(self) -> bool {
        matches!(self, Method::JcpotLp | Method::JcpotPt)
    }

    pub fn is_otda(self) -> bool {
        matches!(self, Method::OtdaLp | Method::OtdaPt)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let known: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::Config(format!("unknown method `{s}` (expected one of {})", known.join(", ")))
        })
    }
}

/// Source weights: `"uniform"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "LambdaRepr", into = "LambdaRepr")]
pub enum LambdaSpec {
    #[default]
    Uniform,
    Explicit(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LambdaRepr {
    Name(String),
    Weights(Vec<f64>),
}

impl TryFrom<LambdaRepr> for LambdaSpec {
    type Error = String;

    fn try_from(r: LambdaRepr) -> std::result::Result<Self, String> {
        match r {
            LambdaRepr::Name(s) if s == "uniform" => Ok(LambdaSpec::Uniform),
            LambdaRepr::Name(s) => Err(format!("lambda must be \"uniform\" or a list of weights, got \"{s}\"")),
            LambdaRepr::Weights(w) => Ok(LambdaSpec::Explicit(w)),
        }
    }
}

impl From<LambdaSpec> for LambdaRepr {
    fn from(l: LambdaSpec) -> Self {
        match l {
            LambdaSpec::Uniform => LambdaRepr::Name("uniform".into()),
            LambdaSpec::Explicit(w) => LambdaRepr::Weights(w),
        }
    }
}

impl FromStr for LambdaSpec {
    type Err = Error;

    /// `uniform` or comma-separated weights.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "uniform" {
            return Ok(LambdaSpec::Uniform);
        }
        s.split(',')
            .map(|w| {
                w.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad lambda weight `{w}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(LambdaSpec::Explicit)
    }
}

impl LambdaSpec {
    /// `None` means uniform.
    pub fn weights(&self) -> Option<Vec<f64>> {
        match self {
            LambdaSpec::Uniform => None,
            LambdaSpec::Explicit(w) => Some(w.clone()),
        }
    }
}

/// Synthetic generator settings; the number of sources comes from the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub n_source: usize,
    pub n_target: usize,
    pub target_prop: Vec<f64>,
    pub prop_range: [f64; 2],
    pub dim: usize,
    pub separation: f64,
    pub sigma: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        let d = ScenarioParams::default();
        Self {
            n_source: d.n_source,
            n_target: d.n_target,
            target_prop: d.target_prop,
            prop_range: d.prop_range,
            dim: d.dim,
            separation: d.separation,
            sigma: d.sigma,
        }
    }
}

impl GeneratorParams {
    pub fn scenario(&self, num_sources: usize) -> ScenarioParams {
        ScenarioParams {
            num_sources,
            n_source: self.n_source,
            n_target: self.n_target,
            target_prop: self.target_prop.clone(),
            prop_range: self.prop_range,
            dim: self.dim,
            separation: self.separation,
            sigma: self.sigma,
        }
    }
}

/// CSV inputs instead of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub sources: Vec<PathBuf>,
    pub target: PathBuf,
    /// Labeled copy of the target for evaluation; without it the target file
    /// itself must carry labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub lambda: LambdaSpec,
    pub seed: u64,
    pub repetitions: usize,
    /// Values of K to sweep over (generator mode only).
    pub num_sources: Vec<usize>,
    pub generator: GeneratorParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataPaths>,
    /// Treat non-convergence as a failure.
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SinkhornParams::default();
        Self {
            methods: vec![Method::JcpotLp],
            epsilon: s.epsilon,
            tol: s.tol,
            max_iter: s.max_iter,
            lambda: LambdaSpec::Uniform,
            seed: 0,
            repetitions: 5,
            num_sources: vec![ScenarioParams::default().num_sources],
            generator: GeneratorParams::default(),
            data: None,
            strict: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sinkhorn_params(&self) -> SinkhornParams {
        SinkhornParams {
            epsilon: self.epsilon,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    /// The K values actually run.
    pub fn sweep(&self) -> Vec<usize> {
        match &self.data {
            Some(d) => vec![d.sources.len()],
            None => self.num_sources.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        self.sinkhorn_params()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let sweep = self.sweep();
        if sweep.is_empty() || sweep.contains(&0) {
            return bad(format!("number of sources must be at least 1, got {sweep:?}"));
        }
        if let LambdaSpec::Explicit(w) = &self.lambda {
            for &k in &sweep {
                validate_lambda(w, k).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if self.data.is_none() {
            for &k in &sweep {
                self.generator
                    .scenario(k)
                    .validate()
                    .map_err(|e| Error::Config(format!("generator: {e}")))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methods_parse_and_print() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(m.to_string(), m.name());
        }
        assert!(matches!("jcpot".parse::<Method>(), Err(Error::Config(_))));
    }

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_fields() {
        let c = RunConfig::from_toml_str(
            r#"
            methods = ["jcpot-lp", "otda-pt"]
            epsilon = 0.05
            lambda = [0.25, 0.75]
            num_sources = [2]
            repetitions = 2

            [generator]
            n_source = 50
            "#,
        )
        .unwrap();
        assert_eq!(c.methods, vec![Method::JcpotLp, Method::OtdaPt]);
        assert_eq!(c.lambda, LambdaSpec::Explicit(vec![0.25, 0.75]));
        assert_eq!(c.generator.n_source, 50);
        assert_eq!(c.generator.n_target, 400);
        c.validate().unwrap();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn invalid_configs() {
        assert!(RunConfig::from_toml_str("methods = [\"magic\"]").is_err());
        assert!(RunConfig::from_toml_str("lambda = \"heavy\"").is_err());
        assert!(RunConfig::from_toml_str("unknown_key = 1").is_err());

        let c = RunConfig {
            repetitions: 0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = RunConfig {
            lambda: LambdaSpec::Explicit(vec![0.5, 0.6]),
            num_sources: vec![2],
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = RunConfig {
            lambda: LambdaSpec::Explicit(vec![0.5, 0.5]),
            num_sources: vec![3],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn lambda_from_flag() {
        assert_eq!("uniform".parse::<LambdaSpec>().unwrap(), LambdaSpec::Uniform);
        assert_eq!(
            "0.3, 0.7".parse::<LambdaSpec>().unwrap(),
            LambdaSpec::Explicit(vec![0.3, 0.7])
        );
        assert!("a,b".parse::<LambdaSpec>().is_err());
    }
}
