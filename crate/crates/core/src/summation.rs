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

//! Compensated accumulation with a fixed traversal order.
//!
//! Partial sums are formed over fixed index ranges (independent of the
//! thread count) and merged in range order, so results are bitwise stable.

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub const ZERO: Self = Self { sum: 0.0, comp: 0.0 };

    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        // Branch-free two-sum.
        let t = self.sum + x;
        let bp = t - self.sum;
        self.comp += (self.sum - (t - bp)) + (x - bp);
        self.sum = t;
    }

    /// Folds another partial in, carrying its compensation term.
    #[inline]
    pub fn merge(&mut self, other: &Compensated) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Compensated::ZERO;
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Compensated accumulator for the six independent components of a
/// symmetric 3×3 tensor, ordered xx, yy, zz, xy, xz, yz.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymAccumulator {
    parts: [Compensated; 6],
}

impl SymAccumulator {
    pub const ZERO: Self = Self { parts: [Compensated::ZERO; 6] };

    #[inline(always)]
    pub fn add(&mut self, c: [f64; 6]) {
        for (p, x) in self.parts.iter_mut().zip(c) {
            p.add(x);
        }
    }

    pub fn merge(&mut self, other: &SymAccumulator) {
        for (p, o) in self.parts.iter_mut().zip(&other.parts) {
            p.merge(o);
        }
    }

    pub fn values(&self) -> [f64; 6] {
        std::array::from_fn(|i| self.parts[i].value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_bits() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
        assert_eq!(neumaier_sum(xs), 2.0);
    }

    #[test]
    fn merge_in_order_matches_single_pass() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 - 0.4).collect();
        let single = neumaier_sum(xs.iter().copied());
        let mut merged = Compensated::ZERO;
        for chunk in xs.chunks(333) {
            let mut p = Compensated::ZERO;
            chunk.iter().for_each(|&x| p.add(x));
            merged.merge(&p);
        }
        assert!((merged.value() - single).abs() <= 1e-13 * single.abs());
    }
}
