//! Goodness-of-fit test of `H0: P = P0` for a stationary series.
//!
//! The first `m1` observations estimate the direction `mu_hat_1 - mu_0`;
//! the remaining `m2` are projected onto it and the projections are
//! self-normalized.

use std::collections::BTreeMap;

use crate::embedding::MeanEmbedding;
use crate::error::Result;
use crate::kernels::{gram_block, KernelSpec};
use crate::limitdist::{decide, Law, QuantileTable};
use crate::selfnorm::{sn_mean_stat, Origin, ProjectedSequence};
use crate::series::{check_alpha, Series, SplitConfig, SplitEcho, SplitScheme, TestOutcome};

#[derive(Clone, Debug)]
pub struct GofProblem {
    pub data: Series,
    pub null_embedding: MeanEmbedding,
    pub kernel: KernelSpec,
    pub split: SplitConfig,
    pub alpha: f64,
}

pub fn gof_projected_sequence(problem: &GofProblem) -> Result<ProjectedSequence> {
    let data = &problem.data;
    let blocks = problem.split.blocks(data.len(), SplitScheme::TwoWay)?;
    let block = gram_block(&problem.kernel, data, blocks.train.clone(), data, blocks.test.clone())?;
    let mu0 = &problem.null_embedding;
    let m1 = blocks.m1() as f64;
    let mu_train = blocks.train.clone().map(|j| mu0.evaluate(data.row(j))).sum::<f64>() / m1;
    let norm = mu0.squared_norm();
    let z = block
        .column_means()
        .into_iter()
        .zip(blocks.test.clone())
        .map(|(k_bar, t)| k_bar - mu_train - mu0.evaluate(data.row(t)) + norm)
        .collect();
    ProjectedSequence::new(z, Origin::Gof)
}

pub fn gof_test(problem: &GofProblem, table: &QuantileTable) -> Result<TestOutcome> {
    check_alpha(problem.alpha)?;
    let seq = gof_projected_sequence(problem)?;
    let m2 = seq.len();
    let sn = sn_mean_stat(&seq)?;
    let (critical_value, p_value, reject) = decide(table, Law::U, sn.scaled, problem.alpha)?;
    let mut metadata = kernel_metadata(&problem.kernel);
    metadata.insert("null".into(), problem.null_embedding.describe());
    metadata.insert("table".into(), table.provenance());
    Ok(TestOutcome {
        statistic: sn.u,
        scaled_statistic: sn.scaled,
        alpha: problem.alpha,
        critical_value,
        p_value,
        reject,
        split: SplitEcho {
            eta: problem.split.eta,
            m1: problem.data.len() - m2,
            held_out: m2,
        },
        location: None,
        metadata,
    })
}

pub(crate) fn kernel_metadata(kernel: &KernelSpec) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("kernel".into(), kernel.family.name().to_string());
    m.insert("sigma".into(), format!("{:e}", kernel.sigma));
    m
}
