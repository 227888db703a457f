//! Containment-aware similarity between a query and a data embedding.
//!
//! * hinge distance `sum_d [q_d - x_d]+` counts containment violations;
//! * compliance `exp(-hinge)` maps it into `(0, 1]`;
//! * SDR (similarity dominance ratio) takes the data embedding as reference:
//!   intersection mass over data mass, minus the normalized excess of the
//!   covering (elementwise max) mass over the data mass;
//! * `psi = compliance * sdr`.
//!
//! With the aggregate-mass reduction SDR ranges over `(-1, 1]`, reaching 1
//! exactly when the two embeddings coincide.

use serde::{Deserialize, Serialize};

use crate::encoder::NodeEmbeddings;
use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

/// Smallest coordinate accepted by the ratio terms.
pub const MIN_COORDINATE: f64 = 1e-12;

/// How the per-dimension SDR terms are reduced to one number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdrReduction {
    /// Ratios of summed masses: `sum min / sum x - (sum max - sum x) / sum max`.
    #[default]
    Aggregate,
    /// Mean over dimensions of the per-dimension ratios. Always positive.
    Elementwise,
}

/// Which part of the measure ranks or thresholds pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    Psi,
    SdrOnly,
    ComplianceOnly,
}

impl ScoreMode {
    pub const ALL: [ScoreMode; 3] = [ScoreMode::Psi, ScoreMode::SdrOnly, ScoreMode::ComplianceOnly];

    pub fn name(self) -> &'static str {
        match self {
            ScoreMode::Psi => "psi",
            ScoreMode::SdrOnly => "sdr_only",
            ScoreMode::ComplianceOnly => "compliance_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub hinge: f64,
    pub compliance: f64,
    pub inter_mass: f64,
    pub data_mass: f64,
    pub convex_mass: f64,
    pub sdr: f64,
    pub psi: f64,
}

impl ScoreBreakdown {
    pub fn score(&self, mode: ScoreMode) -> f64 {
        match mode {
            ScoreMode::Psi => self.psi,
            ScoreMode::SdrOnly => self.sdr,
            ScoreMode::ComplianceOnly => self.compliance,
        }
    }
}

fn same_len(q: &[f64], d: &[f64]) -> Result<()> {
    if q.len() != d.len() {
        return Err(Error::arg(format!(
            "embedding lengths differ: {} vs {}",
            q.len(),
            d.len()
        )));
    }
    Ok(())
}

pub fn hinge_distance(q: &[f64], d: &[f64]) -> Result<f64> {
    same_len(q, d)?;
    Ok(q.iter().zip(d).map(|(a, b)| (a - b).max(0.0)).sum())
}

pub fn compliance(q: &[f64], d: &[f64]) -> Result<f64> {
    Ok((-hinge_distance(q, d)?).exp())
}

pub fn sdr(q: &[f64], d: &[f64]) -> Result<f64> {
    sdr_with(q, d, SdrReduction::Aggregate)
}

pub fn sdr_with(q: &[f64], d: &[f64], reduction: SdrReduction) -> Result<f64> {
    Ok(psi_with(q, d, reduction)?.sdr)
}

pub fn psi(q: &[f64], d: &[f64]) -> Result<ScoreBreakdown> {
    psi_with(q, d, SdrReduction::Aggregate)
}

pub fn psi_with(q: &[f64], d: &[f64], reduction: SdrReduction) -> Result<ScoreBreakdown> {
    same_len(q, d)?;
    if q.is_empty() {
        return Err(Error::arg("empty embeddings"));
    }
    if let Some(bad) = q.iter().chain(d).find(|&&x| !(x >= MIN_COORDINATE)) {
        return Err(Error::NumericDomain(format!(
            "embedding coordinate {bad:e} below {MIN_COORDINATE:e}"
        )));
    }
    let mut hinge = 0.0;
    let (mut inter, mut data, mut convex) = (0.0, 0.0, 0.0);
    let mut elementwise = 0.0;
    for (&a, &b) in q.iter().zip(d) {
        hinge += (a - b).max(0.0);
        let (lo, hi) = (a.min(b), a.max(b));
        inter += lo;
        data += b;
        convex += hi;
        if reduction == SdrReduction::Elementwise {
            elementwise += lo / b - (hi - b) / hi;
        }
    }
    let sdr = match reduction {
        SdrReduction::Aggregate => inter / data - (convex - data) / convex,
        SdrReduction::Elementwise => elementwise / q.len() as f64,
    };
    let compliance = (-hinge).exp();
    Ok(ScoreBreakdown {
        hinge,
        compliance,
        inter_mass: inter,
        data_mass: data,
        convex_mass: convex,
        sdr,
        psi: compliance * sdr,
    })
}

/// Measure applied to every (query node, data node) pair of node summaries;
/// entry `[v][u]` scores query node `v` against data node `u`.
pub fn node_pair_scores(
    query: &NodeEmbeddings,
    data: &NodeEmbeddings,
) -> Result<Vec<Vec<ScoreBreakdown>>> {
    (0..query.node_count())
        .map(|v| {
            (0..data.node_count())
                .map(|u| psi(query.node(v), data.node(u)))
                .collect()
        })
        .collect()
}

/// Per-pair scores recorded on a tape, each `B x 1`.
#[derive(Debug, Clone, Copy)]
pub struct TapeScores {
    pub hinge: Var,
    pub compliance: Var,
    pub sdr: Var,
    pub psi: Var,
}

/// Differentiable measure for `B x d` query and data embedding matrices,
/// row `i` of `q` paired with row `i` of `d`.
pub fn psi_on_tape(tape: &mut Tape, q: Var, d: Var, reduction: SdrReduction) -> Result<TapeScores> {
    if tape.shape(q) != tape.shape(d) {
        return Err(Error::arg(format!(
            "query {:?} and data {:?} embeddings differ in shape",
            tape.shape(q),
            tape.shape(d)
        )));
    }
    let diff = tape.sub(q, d)?;
    let viol = tape.positive_part(diff);
    let hinge = tape.row_sum(viol);
    let neg = tape.neg(hinge);
    let compliance = tape.exp(neg);

    let inter = tape.minimum(q, d)?;
    let convex = tape.maximum(q, d)?;
    let sdr = match reduction {
        SdrReduction::Aggregate => {
            let inter_mass = tape.row_sum(inter);
            let data_mass = tape.row_sum(d);
            let convex_mass = tape.row_sum(convex);
            let similar = tape.div(inter_mass, data_mass)?;
            let excess = tape.sub(convex_mass, data_mass)?;
            let dissimilar = tape.div(excess, convex_mass)?;
            tape.sub(similar, dissimilar)?
        }
        SdrReduction::Elementwise => {
            let similar = tape.div(inter, d)?;
            let excess = tape.sub(convex, d)?;
            let dissimilar = tape.div(excess, convex)?;
            let per_dim = tape.sub(similar, dissimilar)?;
            tape.row_mean(per_dim)
        }
    };
    let psi = tape.mul(compliance, sdr)?;
    Ok(TapeScores {
        hinge,
        compliance,
        sdr,
        psi,
    })
}
