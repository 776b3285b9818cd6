use serde::{Deserialize, Serialize};

use crate::client::CompletionParams;
use crate::exec::ExecLimits;
use crate::model::{sha256_hex, EnvKind, Fraction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub turns_per_seed: u32,
    pub attempts_m: u32,
    pub env: EnvKind,
    /// Inclusive pass-rate band `[low, high]` for keeping a problem.
    pub filter_band: [Fraction; 2],
    /// Seed sessions run at once. Runs are reproducible only at 1 when
    /// the backend is a sequential script.
    pub concurrency: usize,
    pub rng_seed: u64,
    /// Inputs requested from the teacher for Induction.
    pub induction_inputs: usize,
    /// Extra teacher attempts when turn 1 fails to produce a problem.
    pub turn1_retries: u32,
    pub limits: ExecLimits,
    pub teacher: CompletionParams,
    pub student: CompletionParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            turns_per_seed: 6,
            attempts_m: 32,
            env: EnvKind::Induction,
            filter_band: [Fraction::new(1, 100).unwrap(), Fraction::new(97, 100).unwrap()],
            concurrency: 1,
            rng_seed: 0,
            induction_inputs: 5,
            turn1_retries: 2,
            limits: ExecLimits::default(),
            teacher: CompletionParams::teacher(),
            student: CompletionParams::student(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.turns_per_seed < 1 {
            return Err("turns_per_seed must be at least 1".into());
        }
        if self.attempts_m < 1 {
            return Err("attempts_m must be at least 1".into());
        }
        let [low, high] = self.filter_band;
        if !(low < high && high <= Fraction::ONE) {
            return Err(format!("filter_band needs 0 <= low < high <= 1, got [{low}, {high}]"));
        }
        if self.concurrency < 1 {
            return Err("concurrency must be at least 1".into());
        }
        if self.env == EnvKind::Induction && self.induction_inputs < 2 {
            return Err("induction needs at least 2 inputs".into());
        }
        self.limits.validate().map_err(|e| e.to_string())?;
        self.teacher.validate().map_err(|e| e.to_string())?;
        self.student.validate().map_err(|e| e.to_string())
    }

    /// Inputs asked of the teacher for this config's environment.
    pub fn input_count(&self) -> usize {
        match self.env {
            EnvKind::Induction => self.induction_inputs,
            _ => 1,
        }
    }

    /// Stable hash of every setting that affects output.
    pub fn fingerprint(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}
