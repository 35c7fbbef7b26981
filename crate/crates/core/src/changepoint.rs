//! Test for a single change in the marginal distribution.
//!
//! Head and tail blocks of length `m1` anchor the direction
//! `mu_hat_head - mu_hat_tail`; the middle block is projected onto it and
//! scanned with the self-normalized CUSUM.

use crate::error::Result;
use crate::gof::kernel_metadata;
use crate::kernels::{gram_block, KernelSpec};
use crate::limitdist::{decide, Law, QuantileTable};
use crate::selfnorm::{cusum_stat, Origin, ProjectedSequence};
use crate::series::{check_alpha, Series, SplitConfig, SplitEcho, SplitScheme, TestOutcome};

pub const DEFAULT_ETA: f64 = 0.1;

fn projection(data: &Series, kernel: &KernelSpec, split: SplitConfig, swap: bool) -> Result<ProjectedSequence> {
    let blocks = split.blocks(data.len(), SplitScheme::ThreeWay)?;
    let tail = blocks.tail.clone().expect("three-way split has a tail block");
    let (first, second) = if swap { (tail, blocks.train.clone()) } else { (blocks.train.clone(), tail) };
    let a = gram_block(kernel, data, first, data, blocks.test.clone())?.column_means();
    let b = gram_block(kernel, data, second, data, blocks.test.clone())?.column_means();
    let z = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    ProjectedSequence::new(z, Origin::Changepoint)
}

pub fn cp_projected_sequence(data: &Series, kernel: &KernelSpec, split: SplitConfig) -> Result<ProjectedSequence> {
    projection(data, kernel, split, false)
}

/// Projection onto `mu_hat_tail - mu_hat_head`; the negation of
/// [`cp_projected_sequence`].
pub fn cp_projected_sequence_swapped(
    data: &Series,
    kernel: &KernelSpec,
    split: SplitConfig,
) -> Result<ProjectedSequence> {
    projection(data, kernel, split, true)
}

pub fn cp_test(
    data: &Series,
    kernel: &KernelSpec,
    split: SplitConfig,
    alpha: f64,
    table: &QuantileTable,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let seq = cp_projected_sequence(data, kernel, split)?;
    let held_out = seq.len();
    let m1 = (data.len() - held_out) / 2;
    let cusum = cusum_stat(&seq)?;
    let (critical_value, p_value, reject) = decide(table, Law::G, cusum.g, alpha)?;
    let mut metadata = kernel_metadata(kernel);
    metadata.insert("table".into(), table.provenance());
    metadata.insert("khat".into(), cusum.khat.to_string());
    Ok(TestOutcome {
        statistic: cusum.g,
        scaled_statistic: cusum.g,
        alpha,
        critical_value,
        p_value,
        reject,
        split: SplitEcho {
            eta: split.eta,
            m1,
            held_out,
        },
        location: Some(m1 + cusum.khat),
        metadata,
    })
}
