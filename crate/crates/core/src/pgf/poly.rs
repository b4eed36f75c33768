// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Dense polynomial products: schoolbook and FFT convolution, and the
//! balanced product tree used to expand `prod (q_i + p_i X)`.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{PgfError, Result};
use crate::pgf::DenseCountPgf;

/// Degree below which the quadratic algorithm is used.
pub const DEFAULT_FFT_THRESHOLD: usize = 5000;

/// Negative FFT round-off smaller than this in magnitude is clamped to zero.
pub const ROUND_OFF_FLOOR: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn convolve_schoolbook(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (o, y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Convolution through one forward and one inverse complex FFT, packing the
/// two real inputs as the real and imaginary parts of a single signal.
pub fn convolve_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| {
            Complex64::new(
                a.get(i).copied().unwrap_or(0.0),
                b.get(i).copied().unwrap_or(0.0),
            )
        })
        .collect();
    let (forward, inverse) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    });
    forward.process(&mut buf);

    let half = Complex64::new(0.5, 0.0);
    let minus_half_i = Complex64::new(0.0, -0.5);
    let mut prod = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let ck = buf[k];
        let cj = buf[(n - k) % n].conj();
        let ak = (ck + cj) * half;
        let bk = (ck - cj) * minus_half_i;
        prod[k] = ak * bk;
    }
    inverse.process(&mut prod);
    let scale = 1.0 / n as f64;
    prod[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Clamps tiny negative round-off and renormalizes. A coefficient at or
/// below `-ROUND_OFF_FLOOR` means the transform was misused.
fn clean_round_off(mut coeffs: Vec<f64>) -> Result<Vec<f64>> {
    for (index, c) in coeffs.iter_mut().enumerate() {
        if *c < 0.0 {
            if *c <= -ROUND_OFF_FLOOR {
                return Err(PgfError::FftRoundOff { index, value: *c });
            }
            *c = 0.0;
        }
    }
    let total: f64 = coeffs.iter().sum();
    if total > 0.0 {
        coeffs.iter_mut().for_each(|c| *c /= total);
    }
    Ok(coeffs)
}

/// Product of two dense distributions. Uses the quadratic algorithm when
/// both degrees are below `threshold`, FFT otherwise.
pub fn poly_mul(a: &DenseCountPgf, b: &DenseCountPgf, threshold: usize) -> Result<DenseCountPgf> {
    if a.degree().max(b.degree()) < threshold {
        Ok(DenseCountPgf::new_unchecked(convolve_schoolbook(
            a.coeffs(),
            b.coeffs(),
        )))
    } else {
        let raw = convolve_fft(a.coeffs(), b.coeffs());
        Ok(DenseCountPgf::new_unchecked(clean_round_off(raw)?))
    }
}

/// Balanced pairwise product: adjacent factors are multiplied in rounds,
/// an odd trailing factor is carried to the next round unchanged.
pub fn product_tree(factors: Vec<DenseCountPgf>, threshold: usize) -> Result<DenseCountPgf> {
    if factors.is_empty() {
        return Err(PgfError::EmptyProduct);
    }
    let mut level = factors;
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut iter = level.into_iter();
        while let Some(a) = iter.next() {
            match iter.next() {
                Some(b) => next.push(poly_mul(&a, &b, threshold)?),
                None => next.push(a),
            }
        }
        level = next;
    }
    Ok(level.pop().expect("non-empty level"))
}
