//! Model configuration and the composed Gabor → pooling → collinearity run.

use serde::{Deserialize, Serialize};

use crate::collinearity::{
    build_collinearity_kernels, collinearity_layer, CollinearityKernelConfig, CollinearityKernelSet, DynamicsConfig,
};
use crate::error::{Error, Result};
use crate::field::{FeatureStack, GrayImage};
use crate::gabor::{gabor_layer, GaborBank, GaborConfig};
use crate::pooling::{pool, PoolingConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub gabor: GaborConfig,
    pub pooling: PoolingConfig,
    pub kernel: CollinearityKernelConfig,
    pub dynamics: DynamicsConfig,
}

impl ModelConfig {
    pub fn collect_errors(&self, errs: &mut Vec<String>) {
        self.gabor.collect_errors(errs);
        self.pooling.collect_errors(errs);
        self.kernel.collect_errors(errs);
        self.dynamics.collect_errors(errs);
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        self.collect_errors(&mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// A model with its filter bank and connectivity prebuilt.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    bank: GaborBank,
    kernels: CollinearityKernelSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    /// Full-resolution Gabor stack.
    pub gabor: FeatureStack,
    /// Pooled Gabor stack; the collinearity layer's input.
    pub pooled: FeatureStack,
    /// Converged collinearity rates on the pooled grid.
    pub col: FeatureStack,
    pub steps: usize,
    pub residual: f64,
}

impl Model {
    /// Validates the configuration and builds the kernels. Connectivity
    /// distances are given in Gabor wavelengths measured on the image, so
    /// on the pooled grid one wavelength spans `λ / p` units.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let bank = GaborBank::new(&config.gabor)?;
        let grid_lambda = bank.lambda_px() as f64 / config.pooling.stride as f64;
        let kernels = build_collinearity_kernels(&config.kernel, grid_lambda, bank.orientations())?;
        Ok(Self { config, bank, kernels })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn bank(&self) -> &GaborBank {
        &self.bank
    }

    pub fn kernels(&self) -> &CollinearityKernelSet {
        &self.kernels
    }

    pub fn stride(&self) -> usize {
        self.config.pooling.stride
    }

    /// Gabor and pooling layers only.
    pub fn feedforward(&self, image: &GrayImage) -> Result<(FeatureStack, FeatureStack)> {
        let gabor = gabor_layer(image, &self.bank);
        let pooled = pool(&gabor, &self.config.pooling)?;
        Ok((gabor, pooled))
    }

    pub fn run(&self, image: &GrayImage) -> Result<ModelOutput> {
        let (gabor, pooled) = self.feedforward(image)?;
        let conv = collinearity_layer(&pooled, &self.kernels, &self.config.dynamics)?;
        Ok(ModelOutput {
            gabor,
            pooled,
            col: conv.rates,
            steps: conv.steps,
            residual: conv.residual,
        })
    }
}

/// Builds the model and runs it once.
pub fn run_model(image: &GrayImage, config: &ModelConfig) -> Result<ModelOutput> {
    Model::new(config.clone())?.run(image)
}
