//! Symmetric quadrature rules on tetrahedra.
//!
//! Points are barycentric 4-tuples and weights sum to one; scale by the
//! element volume at use. Degrees above two come from the Grundmann–Möller
//! family, which is permutation invariant but carries negative weights.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_negative_weights(&self) -> bool {
        self.weights.iter().any(|&w| w < 0.0)
    }

    /// Integrate `f` (a function of barycentric coordinates) over a tet of volume `vol`.
    pub fn integrate<F: Fn(&[f64; 4]) -> f64>(&self, vol: f64, f: F) -> f64 {
        vol * self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum::<f64>()
    }
}

/// Rule exact to total degree `degree` on any tetrahedron, `degree` in `1..=8`.
pub fn tet_rule(degree: usize) -> Result<QuadRule> {
    match degree {
        1 => Ok(QuadRule {
            points: vec![[0.25; 4]],
            weights: vec![1.0],
            degree: 1,
        }),
        2 => {
            let a = (5.0 + 3.0 * 5f64.sqrt()) / 20.0;
            let b = (5.0 - 5f64.sqrt()) / 20.0;
            let points = (0..4)
                .map(|i| {
                    let mut p = [b; 4];
                    p[i] = a;
                    p
                })
                .collect();
            Ok(QuadRule {
                points,
                weights: vec![0.25; 4],
                degree: 2,
            })
        }
        3..=8 => Ok(grundmann_moller(degree / 2)),
        _ => Err(Error::InvalidArgument(format!(
            "no tetrahedral rule of degree {degree} (supported: 1..=8)"
        ))),
    }
}

/// Grundmann–Möller rule of degree `2s + 1` on the tetrahedron.
pub fn grundmann_moller(s: usize) -> QuadRule {
    const N: i32 = 3;
    let d = 2 * s as i32 + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s as i32 {
        let denom = (d + N - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        // 3! * 2^{-2s} (d+n-2i)^d / (i! (d+n-i)!), rescaled so weights sum to one
        let w = sign * 6.0 * 0.25f64.powi(s as i32) * denom.powi(d)
            / (factorial(i as u32) * factorial((d + N - i) as u32));
        let total = s as i32 - i;
        for b0 in 0..=total {
            for b1 in 0..=total - b0 {
                for b2 in 0..=total - b0 - b1 {
                    let b3 = total - b0 - b1 - b2;
                    let p = [b0, b1, b2, b3].map(|b| (2 * b + 1) as f64 / denom);
                    points.push(p);
                    weights.push(w);
                }
            }
        }
    }
    QuadRule {
        points,
        weights,
        degree: 2 * s + 1,
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Closed form of `∫_K λ^α` for a tet of volume `vol`: `α! 3! |K| / (|α|+3)!`.
pub fn barycentric_monomial_integral(alpha: [u32; 4], vol: f64) -> f64 {
    let num: f64 = alpha.iter().map(|&a| factorial(a)).product();
    let total: u32 = alpha.iter().sum();
    num * 6.0 * vol / factorial(total + 3)
}
