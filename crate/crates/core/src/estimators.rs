//! Registry of estimators and per-dataset scoring.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, SourceInfo};
use crate::error::{Error, Result};
use crate::mano::{self, Branch, SoftrunConfig};
use crate::numerics::{LogitsMatrix, ProbVector, SinkhornConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Mano,
    ConfScore,
    Entropy,
    Atc,
    Nuclear,
    Mde,
    Cot,
}

/// Whether a score grows (`Positive`) or shrinks (`Negative`) with accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSign {
    Positive,
    Negative,
}

impl Estimator {
    pub const ALL: [Estimator; 7] = [
        Estimator::Mano,
        Estimator::ConfScore,
        Estimator::Entropy,
        Estimator::Atc,
        Estimator::Nuclear,
        Estimator::Mde,
        Estimator::Cot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mano => "mano",
            Estimator::ConfScore => "confscore",
            Estimator::Entropy => "entropy",
            Estimator::Atc => "atc",
            Estimator::Nuclear => "nuclear",
            Estimator::Mde => "mde",
            Estimator::Cot => "cot",
        }
    }

    pub fn sign(self) -> ScoreSign {
        match self {
            Estimator::Cot => ScoreSign::Negative,
            _ => ScoreSign::Positive,
        }
    }

    /// Short description of the pinned variant, reported with results.
    pub fn variant(self) -> &'static str {
        match self {
            Estimator::Mano => "softrun normalization + scaled entry-wise Lp norm",
            Estimator::ConfScore => "mean max-softmax confidence",
            Estimator::Entropy => "negative mean Shannon entropy of softmax (nats)",
            Estimator::Atc => "max-softmax confidence threshold fit on validation error rate",
            Estimator::Nuclear => "nuclear norm of softmax matrix / sqrt(NK)",
            Estimator::Mde => "mean T*logsumexp(q/T), T=1",
            Estimator::Cot => "entropic OT (eps=0.01) to label marginal on simplex vertices, TV cost",
        }
    }

    pub fn parse_list(csv: &str) -> Result<Vec<Estimator>> {
        let mut out: Vec<Estimator> = Vec::new();
        for part in csv.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let e = part.parse()?;
            if !out.contains(&e) {
                out.push(e);
            }
        }
        if out.is_empty() {
            return Err(Error::invalid("empty estimator list"));
        }
        Ok(out)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<_> = Estimator::ALL.iter().map(|e| e.name()).collect();
                Error::invalid(format!("unknown estimator '{s}' (known: {})", known.join(", ")))
            })
    }
}

/// Everything needed to score a dataset besides its logits.
#[derive(Debug, Clone)]
pub struct ScoringContext {
    pub softrun: SoftrunConfig,
    pub mde_temperature: f64,
    pub sinkhorn: SinkhornConfig,
    pub atc_threshold: Option<f64>,
    pub label_marginal: Option<ProbVector>,
}

impl ScoringContext {
    /// Fits ATC on validation data when present and takes the label
    /// marginal from the source info, else from the validation labels.
    pub fn from_source(softrun: SoftrunConfig, source: &SourceInfo) -> Result<Self> {
        source.validate()?;
        let atc_threshold = match (&source.val_logits, &source.val_labels) {
            (Some(_), Some(_)) => Some(baselines::atc_fit(source)?),
            _ => None,
        };
        let label_marginal = match (&source.label_marginal, &source.val_logits, &source.val_labels) {
            (Some(m), _, _) => Some(m.clone()),
            (None, Some(l), Some(y)) => Some(baselines::label_marginal(y, l.n_cols())?),
            _ => None,
        };
        Ok(Self {
            softrun,
            mde_temperature: 1.0,
            sinkhorn: SinkhornConfig::default(),
            atc_threshold,
            label_marginal,
        })
    }
}

/// Scores for one dataset plus the criterion that drove the MaNo branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub dataset_id: String,
    pub n_samples: usize,
    pub n_classes: usize,
    pub scores: BTreeMap<String, f64>,
    pub phi: f64,
    pub branch: Branch,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn score_dataset(
    dataset_id: &str,
    logits: &LogitsMatrix,
    estimators: &[Estimator],
    ctx: &ScoringContext,
) -> Result<ScoreReport> {
    ctx.softrun.validate()?;
    let phi = mano::criterion_phi(logits);
    let branch = if phi <= ctx.softrun.eta { Branch::Taylor } else { Branch::Softmax };
    let mut scores = BTreeMap::new();
    let mut warnings = Vec::new();
    for &e in estimators {
        let value = match e {
            Estimator::Mano => mano::mano_score(logits, &ctx.softrun)?.score,
            Estimator::ConfScore => baselines::conf_score(logits),
            Estimator::Entropy => baselines::entropy_score(logits),
            Estimator::Atc => {
                let t = ctx.atc_threshold.ok_or_else(|| {
                    Error::InsufficientData("ATC needs a labeled validation set".into())
                })?;
                baselines::atc_score(logits, t)?
            }
            Estimator::Nuclear => baselines::nuclear_score(logits)?,
            Estimator::Mde => baselines::mde_score(logits, ctx.mde_temperature)?,
            Estimator::Cot => {
                let source = SourceInfo { label_marginal: ctx.label_marginal.clone(), ..Default::default() };
                let r = baselines::cot_score(logits, &source, &ctx.sinkhorn)?;
                if r.defaulted_marginal {
                    warnings.push("cot: uniform label marginal assumed".to_string());
                }
                if !r.converged {
                    warnings.push("cot: sinkhorn did not reach tolerance".to_string());
                }
                r.score
            }
        };
        scores.insert(e.name().to_string(), value);
    }
    Ok(ScoreReport {
        dataset_id: dataset_id.to_string(),
        n_samples: logits.n_rows(),
        n_classes: logits.n_cols(),
        scores,
        phi,
        branch,
        warnings,
    })
}
