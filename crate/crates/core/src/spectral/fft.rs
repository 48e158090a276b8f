use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Unnormalized 3-D complex FFT on an `n^3` row-major cube.
///
/// Lines are transformed independently, so splitting them across threads
/// gives bit-identical results for any pool size.
pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Shared plan for cubes of side `n`.
    pub fn cached(n: usize) -> Arc<Fft3> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("fft plan cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(Fft3::new(n)))
            .clone()
    }

    /// `X_k = sum_j x_j exp(-2 pi i j.k / n)`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// `x_j = sum_k X_k exp(+2 pi i j.k / n)`; no `1/n^3` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n);
        let plane = n * n;

        // z: contiguous lines
        data.par_chunks_mut(plane).for_each_init(
            || vec![Complex64::default(); plan.get_inplace_scratch_len()],
            |scratch, chunk| plan.process_with_scratch(chunk, scratch),
        );

        // y: strided within each x-plane
        data.par_chunks_mut(plane).for_each_init(
            || {
                (
                    vec![Complex64::default(); n],
                    vec![Complex64::default(); plan.get_inplace_scratch_len()],
                )
            },
            |(line, scratch), chunk| {
                for iz in 0..n {
                    for iy in 0..n {
                        line[iy] = chunk[iy * n + iz];
                    }
                    plan.process_with_scratch(line, scratch);
                    for iy in 0..n {
                        chunk[iy * n + iz] = line[iy];
                    }
                }
            },
        );

        // x: stride n^2; gather into (y, z, x) order, transform, scatter back
        let mut work = vec![Complex64::default(); data.len()];
        {
            let src = &*data;
            work.par_chunks_mut(n).enumerate().for_each(|(yz, line)| {
                for (ix, v) in line.iter_mut().enumerate() {
                    *v = src[ix * plane + yz];
                }
            });
        }
        work.par_chunks_mut(plane).for_each_init(
            || vec![Complex64::default(); plan.get_inplace_scratch_len()],
            |scratch, chunk| plan.process_with_scratch(chunk, scratch),
        );
        data.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(ix, chunk)| {
                for (yz, v) in chunk.iter_mut().enumerate() {
                    *v = work[yz * n + ix];
                }
            });
    }
}
