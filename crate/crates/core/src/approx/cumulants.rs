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

use std::sync::OnceLock;

use crate::error::{PgfError, Result};
use crate::uda::check_probability;

/// Highest cumulant order supported (six mixture components).
pub const MAX_ORDER: usize = 12;

/// Coefficients in `p` of the first `MAX_ORDER` Bernoulli cumulants, from
/// `k_1 = p` and `k_{j+1} = p (1 - p) dk_j/dp`.
fn bernoulli_polys() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![0.0, 1.0]];
        while polys.len() < MAX_ORDER {
            let k = polys.last().unwrap();
            let deriv: Vec<f64> = k.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
            // multiply by p - p^2
            let mut next = vec![0.0; deriv.len() + 2];
            for (i, c) in deriv.iter().enumerate() {
                next[i + 1] += c;
                next[i + 2] -= c;
            }
            polys.push(next);
        }
        polys
    })
}

/// The first `order` cumulants of a Bernoulli(p) variable.
pub fn bernoulli_cumulants(p: f64, order: usize) -> Vec<f64> {
    bernoulli_polys()[..order]
        .iter()
        .map(|poly| poly.iter().rev().fold(0.0, |acc, c| acc * p + c))
        .collect()
}

/// Running cumulants of `A = sum v_i A_i` up to a fixed even order.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantAccumulator {
    kappas: Vec<f64>,
}

impl CumulantAccumulator {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 || order % 2 == 1 || order > MAX_ORDER {
            return Err(PgfError::parameter(format!(
                "cumulant order must be even and in 2..={MAX_ORDER}, got {order}"
            )));
        }
        Ok(CumulantAccumulator {
            kappas: vec![0.0; order],
        })
    }

    pub fn order(&self) -> usize {
        self.kappas.len()
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn add(&mut self, v: f64, p: f64) -> Result<()> {
        let p = check_probability(p)?;
        if p == 0.0 || p == 1.0 {
            if p == 1.0 {
                self.kappas[0] += v;
            }
            return Ok(());
        }
        let mut vj = 1.0;
        for (slot, poly) in self.kappas.iter_mut().zip(bernoulli_polys()) {
            vj *= v;
            *slot += vj * poly.iter().rev().fold(0.0, |acc, c| acc * p + c);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &CumulantAccumulator) -> Result<()> {
        if self.order() != other.order() {
            return Err(PgfError::StateMismatch(format!(
                "cumulant orders {} and {}",
                self.order(),
                other.order()
            )));
        }
        self.kappas.iter_mut().zip(&other.kappas).for_each(|(a, b)| *a += b);
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Raw moments `m_1..m_n` from cumulants `k_1..k_n`.
pub fn cumulants_to_moments(kappas: &[f64]) -> Vec<f64> {
    let mut m = vec![1.0];
    for r in 1..=kappas.len() {
        let mr = (1..=r).map(|k| binomial(r - 1, k - 1) * kappas[k - 1] * m[r - k]).sum();
        m.push(mr);
    }
    m.remove(0);
    m
}

/// Inverse of [`cumulants_to_moments`].
pub fn moments_to_cumulants(moments: &[f64]) -> Vec<f64> {
    let m = |i: usize| if i == 0 { 1.0 } else { moments[i - 1] };
    let mut kappas: Vec<f64> = Vec::with_capacity(moments.len());
    for r in 1..=moments.len() {
        let rest: f64 = (1..r).map(|k| binomial(r - 1, k - 1) * kappas[k - 1] * m(r - k)).sum();
        kappas.push(m(r) - rest);
    }
    kappas
}

/// Affine map `Z = (A - shift) / scale + 10` that puts the mean ten standard
/// deviations above zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    pub shift: f64,
    pub scale: f64,
}

pub const Z_OFFSET: f64 = 10.0;

impl Standardization {
    pub fn to_z(&self, a: f64) -> f64 {
        (a - self.shift) / self.scale + Z_OFFSET
    }

    pub fn to_a(&self, z: f64) -> f64 {
        self.scale * (z - Z_OFFSET) + self.shift
    }
}

/// Cumulants of the standardized variable with the inverse map. Fails when
/// the variance is zero.
pub fn standardize(kappas: &[f64]) -> Result<(Vec<f64>, Standardization)> {
    if kappas.len() < 2 || kappas[1] <= 0.0 || !kappas[1].is_finite() {
        return Err(PgfError::parameter("degenerate distribution: zero variance"));
    }
    let sd = kappas[1].sqrt();
    let mut z = Vec::with_capacity(kappas.len());
    z.push(Z_OFFSET);
    z.push(1.0);
    for (j, k) in kappas.iter().enumerate().skip(2) {
        z.push(k / sd.powi(j as i32 + 1));
    }
    Ok((
        z,
        Standardization {
            shift: kappas[0],
            scale: sd,
        },
    ))
}
