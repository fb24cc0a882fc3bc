//! The power map L(x) = |x|^{d−1}x and the profile transform
//! D u(x) = d^{−(p−1)/p} u(L(x)), with checks of the identities it satisfies.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{integer_dimension, CknError, Result};
use crate::functionals::{gradient_integral, quotient_with_measure, weighted_integral};
use crate::params::{exponents, CknParams};
use crate::profiles::RadialProfile;
use crate::quadrature::{integrate_mc_scaled, McEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub d: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: f64,
}

impl TransformSpec {
    pub fn new(d: f64, p: f64, n: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(CknError::Argument(format!("transform power d = {d}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(CknError::Argument(format!("gradient exponent p = {p}")));
        }
        if !(n >= 1.0 && n.is_finite()) {
            return Err(CknError::Argument(format!("dimension N = {n}")));
        }
        Ok(TransformSpec { d, p, n })
    }

    /// The standard choice d = (N−p)/(N−p−μ) for given parameters.
    pub fn for_params(params: &CknParams) -> Result<Self> {
        TransformSpec::new(params.d()?, params.p, params.n)
    }

    /// (1/d)^{(p−1)/p}
    pub fn scale_factor(&self) -> f64 {
        self.d.powf(-(self.p - 1.0) / self.p)
    }

    /// The gradient weight d(p+μ−N)+N−p that pairs with |x|^{−μ}.
    pub fn gradient_weight(&self, mu: f64) -> f64 {
        self.d * (self.p + mu - self.n) + self.n - self.p
    }

    /// N + td − Nd, the weight that pairs with |x|^{−t}.
    pub fn mapped_weight(&self, t: f64) -> f64 {
        self.n + t * self.d - self.n * self.d
    }
}

/// ρ ↦ d^{−(p−1)/p} g(ρ^d).
pub fn forward(profile: &RadialProfile, spec: &TransformSpec) -> Result<RadialProfile> {
    profile.compose(spec.d, 1.0, spec.scale_factor())
}

/// ρ ↦ d^{(p−1)/p} g(ρ^{1/d}).
pub fn inverse(profile: &RadialProfile, spec: &TransformSpec) -> Result<RadialProfile> {
    profile.compose(1.0 / spec.d, 1.0, 1.0 / spec.scale_factor())
}

/// L(x) = |x|^{d−1} x.
pub fn power_map(x: &[f64], d: f64) -> Vec<f64> {
    let r = norm(x);
    let f = r.powf(d - 1.0);
    x.iter().map(|v| f * v).collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// (d|x|^{N(d−1)}, central-difference determinant of the Jacobian of L).
pub fn verify_jacobian(x: &[f64], d: f64) -> Result<(f64, f64)> {
    let n = x.len();
    if n == 0 {
        return Err(CknError::UnsupportedDimension(0.0));
    }
    let r = norm(x);
    if !(r >= 1e-8) {
        return Err(CknError::NearSingularPoint(r));
    }
    let formula = d * r.powf(n as f64 * (d - 1.0));
    let h = 1e-5 * r;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = power_map(&xp, d);
        xp[j] = x[j] - h;
        let fm = power_map(&xp, d);
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok((formula, jac.determinant()))
}

/// Both sides of ∫|d^{−(p−1)/p}u|^k |x|^{−t} = d ∫|Du|^k |x|^{−(N+td−Nd)},
/// each by its own radial quadrature.
pub fn verify_measure_identity(
    profile: &RadialProfile,
    k: f64,
    t: f64,
    spec: &TransformSpec,
    tol: f64,
) -> Result<(f64, f64)> {
    let lhs = spec.scale_factor().powf(k) * weighted_integral(profile, k, t, spec.n, tol)?.value;
    let image = forward(profile, spec)?;
    let rhs = spec.d * weighted_integral(&image, k, spec.mapped_weight(t), spec.n, tol)?.value;
    Ok((lhs, rhs))
}

/// Both sides of ∫|∇Du|^p |x|^{−(d(p+μ−N)+N−p)} = ∫|∇u|^p |x|^{−μ} for a
/// radial profile, by quadrature.
pub fn verify_gradient_radial(
    profile: &RadialProfile,
    spec: &TransformSpec,
    mu: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let image = forward(profile, spec)?;
    let lhs = gradient_integral(&image, spec.p, spec.gradient_weight(mu), spec.n, tol)?.value;
    let rhs = gradient_integral(profile, spec.p, mu, spec.n, tol)?.value;
    Ok((lhs, rhs))
}

/// u(x) = exp(−Σ a_i x_i²)(1 + b·x/(2+|x|)), non-radial unless all a_i agree
/// and b = 0. With |b| ≤ 1 the second factor stays positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonRadialField {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl NonRadialField {
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        let e = (-self.a.iter().zip(x).map(|(a, v)| a * v * v).sum::<f64>()).exp();
        let bx: f64 = self.b.iter().zip(x).map(|(b, v)| b * v).sum();
        e * (1.0 + bx / (2.0 + r))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        let e = (-self.a.iter().zip(x).map(|(a, v)| a * v * v).sum::<f64>()).exp();
        let bx: f64 = self.b.iter().zip(x).map(|(b, v)| b * v).sum();
        let h = 1.0 + bx / (2.0 + r);
        let c = if r > 0.0 {
            bx / (r * (2.0 + r) * (2.0 + r))
        } else {
            0.0
        };
        (0..x.len())
            .map(|i| {
                let dh = self.b[i] / (2.0 + r) - c * x[i];
                e * (dh - 2.0 * self.a[i] * x[i] * h)
            })
            .collect()
    }

    /// ∇(Du)(x) = d^{−(p−1)/p}|x|^{d−1}(v + (d−1)(x̂·v)x̂), v = ∇u(L(x)).
    pub fn transformed_gradient(&self, x: &[f64], spec: &TransformSpec) -> Vec<f64> {
        let r = norm(x);
        if r == 0.0 {
            return vec![0.0; x.len()];
        }
        let v = self.gradient(&power_map(x, spec.d));
        let xv: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / r;
        let f = spec.scale_factor() * r.powf(spec.d - 1.0);
        v.iter()
            .zip(x)
            .map(|(vi, xi)| f * (vi + (spec.d - 1.0) * xv * xi / r))
            .collect()
    }
}

/// Ten fixed non-radial fields in dimension n; the first is
/// e^{−|x|²}(1 + x₁/(2+|x|)).
pub fn field_catalog(n: usize) -> Vec<NonRadialField> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f1e1d);
    let mut out = Vec::with_capacity(10);
    let mut b0 = vec![0.0; n];
    b0[0] = 1.0;
    out.push(NonRadialField {
        a: vec![1.0; n],
        b: b0,
    });
    while out.len() < 10 {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = norm(&dir);
        if len < 1e-3 {
            continue;
        }
        let size = rng.gen_range(0.3..1.0);
        let b = dir.iter().map(|v| v * size / len).collect();
        out.push(NonRadialField { a, b });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientMcCheck {
    /// ∫|∇Du|^p |x|^{−(d(p+μ−N)+N−p)}
    pub lhs: McEstimate,
    /// ∫|∇u|^p |x|^{−μ}
    pub rhs: McEstimate,
    /// (lhs − rhs)/√(se_l² + se_r²)
    pub z: f64,
    /// lhs ≤ rhs + 3 combined standard errors
    pub holds: bool,
}

/// Monte Carlo comparison of the two gradient integrals for a non-radial field.
pub fn verify_gradient_mc(
    field: &NonRadialField,
    spec: &TransformSpec,
    mu: f64,
    samples: usize,
    seed: u64,
) -> Result<GradientMcCheck> {
    let n = integer_dimension(spec.n, 2, 4)?;
    if field.dim() != n {
        return Err(CknError::Argument(format!(
            "field dimension {} differs from N = {n}",
            field.dim()
        )));
    }
    let p = spec.p;
    let w = spec.gradient_weight(mu);
    let lhs_f = |x: &[f64]| norm(&field.transformed_gradient(x, spec)).powf(p);
    let rhs_f = |x: &[f64]| norm(&field.gradient(x)).powf(p);
    // the transformed field lives on the scale |x| ~ 1^{1/d}; both are O(1)
    let lhs = integrate_mc_scaled(&lhs_f, w, n, samples, seed, 0.5)?;
    let rhs = integrate_mc_scaled(&rhs_f, mu, n, samples, seed.wrapping_add(1), 0.5)?;
    let se = (lhs.std_error.powi(2) + rhs.std_error.powi(2)).sqrt();
    Ok(GradientMcCheck {
        lhs,
        rhs,
        z: (lhs.estimate - rhs.estimate) / se,
        holds: lhs.estimate <= rhs.estimate + 3.0 * se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferCheck {
    /// quotient with weights (s, μ, θ) at v
    pub original: f64,
    /// quotient with weights (N+sd−Nd, 0, N+θd−Nd) at Dv
    pub transformed: f64,
    pub ratio: f64,
    /// d^{prefactor_exp}
    pub expected_ratio: f64,
}

/// Q(v) against Q'(Dv) for the unweighted-gradient problem reached through
/// the transform, with `angular` the spherical factor of both integrals.
pub fn quotient_transfer_with_measure(
    params: &CknParams,
    profile: &RadialProfile,
    angular: f64,
    tol: f64,
) -> Result<TransferCheck> {
    let e = exponents(params)?;
    let spec = TransformSpec::for_params(params)?;
    let image = forward(profile, &spec)?;
    let mapped = params.transformed()?;
    let original = quotient_with_measure(params, profile, angular, tol)?.quotient;
    let transformed = quotient_with_measure(&mapped, &image, angular, tol)?.quotient;
    Ok(TransferCheck {
        original,
        transformed,
        ratio: original / transformed,
        expected_ratio: e.prefactor(),
    })
}

pub fn quotient_transfer(
    params: &CknParams,
    profile: &RadialProfile,
    tol: f64,
) -> Result<TransferCheck> {
    quotient_transfer_with_measure(params, profile, crate::special::sphere_area(params.n), tol)
}
