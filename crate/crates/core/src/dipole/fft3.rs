// Copyright 2026 The hfcalc authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.

//! In-place 3-D complex FFT over an x-fastest array, parallel over lines.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

pub(crate) struct Fft3 {
    dims: [usize; 3],
    plans: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3], direction: FftDirection) -> Self {
        let mut planner = FftPlanner::new();
        let plans = dims.map(|n| planner.plan_fft(n, direction));
        Self { dims, plans }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn process(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        let [m0, m1, m2] = self.dims;

        // Axis 0: contiguous lines.
        let plan = &self.plans[0];
        data.par_chunks_mut(m0 * m1).for_each_init(
            || vec![Complex64::default(); plan.get_inplace_scratch_len()],
            |scratch, plane| plan.process_with_scratch(plane, scratch),
        );

        // Axis 1: transpose each plane so columns become rows.
        let plan = &self.plans[1];
        data.par_chunks_mut(m0 * m1).for_each_init(
            || (vec![Complex64::default(); m0 * m1], vec![Complex64::default(); plan.get_inplace_scratch_len()]),
            |(buf, scratch), plane| {
                for j in 0..m1 {
                    for i in 0..m0 {
                        buf[i * m1 + j] = plane[i + m0 * j];
                    }
                }
                plan.process_with_scratch(buf, scratch);
                for j in 0..m1 {
                    for i in 0..m0 {
                        plane[i + m0 * j] = buf[i * m1 + j];
                    }
                }
            },
        );

        // Axis 2: gather lines of stride m0*m1 into a scratch array.
        let plan = &self.plans[2];
        let stride = m0 * m1;
        let mut lines = vec![Complex64::default(); data.len()];
        {
            let src = &*data;
            lines.par_chunks_mut(m2).enumerate().for_each(|(l, line)| {
                for (k, x) in line.iter_mut().enumerate() {
                    *x = src[l + stride * k];
                }
            });
        }
        lines.par_chunks_mut(m2 * m0.max(1)).for_each_init(
            || vec![Complex64::default(); plan.get_inplace_scratch_len()],
            |scratch, block| plan.process_with_scratch(block, scratch),
        );
        data.par_chunks_mut(stride).enumerate().for_each(|(k, plane)| {
            for (l, x) in plane.iter_mut().enumerate() {
                *x = lines[k + m2 * l];
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_dft() {
        let dims = [3, 4, 5];
        let n: usize = dims.iter().product();
        let input: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(((i * 31) % 7) as f64 - 3.0, ((i * 13) % 5) as f64))
            .collect();
        let mut fast = input.clone();
        Fft3::new(dims, FftDirection::Forward).process(&mut fast);
        for (idx, got) in fast.iter().enumerate() {
            let m = [idx % 3, (idx / 3) % 4, idx / 12];
            let mut acc = Complex64::default();
            for (v, x) in input.iter().enumerate() {
                let p = [v % 3, (v / 3) % 4, v / 12];
                let phase: f64 = (0..3).map(|a| (m[a] * p[a]) as f64 / dims[a] as f64).sum();
                acc += x * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * phase);
            }
            assert!((acc - got).norm() < 1e-10, "{idx}: {acc} vs {got}");
        }
    }
}
