//! Per-owner FFT plans. A workspace is never shared between threads; every
//! sampler or worker holds its own.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::Arc;

pub struct FftWorkspace {
    planner: FftPlanner<f64>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for FftWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftWorkspace")
            .field("inverse_sizes", &self.inverse.keys().collect::<Vec<_>>())
            .field("forward_sizes", &self.forward.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Default for FftWorkspace {
    fn default() -> Self {
        Self::new()
    }
}

impl FftWorkspace {
    pub fn new() -> Self {
        FftWorkspace {
            planner: FftPlanner::new(),
            inverse: HashMap::new(),
            forward: HashMap::new(),
            scratch: Vec::new(),
        }
    }

    /// In place `x_j ← Σ_k x_k e^{+2πi jk/len}` (no normalization).
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let len = data.len();
        let planner = &mut self.planner;
        let plan = self
            .inverse
            .entry(len)
            .or_insert_with(|| planner.plan_fft_inverse(len))
            .clone();
        self.run(&*plan, data);
    }

    /// In place `x_j ← Σ_k x_k e^{-2πi jk/len}` (no normalization).
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let len = data.len();
        let planner = &mut self.planner;
        let plan = self
            .forward
            .entry(len)
            .or_insert_with(|| planner.plan_fft_forward(len))
            .clone();
        self.run(&*plan, data);
    }

    fn run(&mut self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        let need = plan.get_inplace_scratch_len();
        if self.scratch.len() < need {
            self.scratch.resize(need, Complex64::new(0.0, 0.0));
        }
        plan.process_with_scratch(data, &mut self.scratch[..need]);
    }
}
