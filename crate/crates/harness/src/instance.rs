use paritybench_core::{BenchmarkConfig, Instance, ProbabilityTable};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn f64_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_bits().to_le_bytes()).collect()
}

/// Checksum of the training multiset as sorted `(value, count)` pairs.
pub fn train_checksum(instance: &Instance) -> String {
    let bytes: Vec<u8> = instance
        .train_counts()
        .into_iter()
        .flat_map(|(v, c)| v.to_le_bytes().into_iter().chain(c.to_le_bytes()))
        .collect();
    sha256_hex(&bytes)
}

/// Checksum of the band masks (in draw order) and their target moments.
pub fn band_checksum(instance: &Instance) -> String {
    let mut bytes: Vec<u8> = instance.band.masks.iter().flat_map(|m| m.value().to_le_bytes()).collect();
    bytes.extend(f64_bytes(&instance.band.target_moments));
    sha256_hex(&bytes)
}

pub fn table_checksum(table: &ProbabilityTable) -> String {
    sha256_hex(&f64_bytes(table.mass()))
}

/// Replayable description of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub config: BenchmarkConfig,
    /// Sorted `(value, count)` pairs.
    pub train: Vec<(u32, u32)>,
    pub band_masks: Vec<u32>,
    pub band_moments: Vec<f64>,
    pub target_checksum: String,
    pub train_checksum: String,
    pub band_checksum: String,
    pub support_size: usize,
    pub observed_size: usize,
    pub high_value_size: usize,
    pub unseen_elite_size: usize,
    pub score_threshold: u32,
}

impl InstanceRecord {
    pub fn new(instance: &Instance) -> Self {
        Self {
            config: instance.config.clone(),
            train: instance.train_counts(),
            band_masks: instance.band.masks.iter().map(|m| m.value()).collect(),
            band_moments: instance.band.target_moments.clone(),
            target_checksum: table_checksum(&instance.target),
            train_checksum: train_checksum(instance),
            band_checksum: band_checksum(instance),
            support_size: instance.support.len(),
            observed_size: instance.observed.len(),
            high_value_size: instance.high_value.len(),
            unseen_elite_size: instance.unseen_elite.len(),
            score_threshold: instance.score_threshold,
        }
    }

    /// Rebuilds the instance from its config and checks every checksum.
    pub fn replay(&self) -> anyhow::Result<Instance> {
        let instance = paritybench_core::make_instance(&self.config)?;
        let again = InstanceRecord::new(&instance);
        anyhow::ensure!(again == *self, "replayed instance differs from the record");
        Ok(instance)
    }
}
