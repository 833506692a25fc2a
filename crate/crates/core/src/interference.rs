//! Mean-field interference: the per-unit-power coupling kernel Z(r, l) and
//! the aggregate interference P̄(t)·Z(r, l).
//!
//! For a user at distance `r` served by a BS at distance `l` and angle `θ`,
//! the BS sits at `d₁ = √(r² + l² − 2rl·cos θ)` from the origin. Interfering
//! users around that BS have density `p_I(q, d₁)` in their distance `q`, and
//! each contributes `p_B(q)A_N q^{−α_N} + (1 − p_B(q))A_L q^{−α_L}` per watt
//! per unit gain. Averaging over `θ` and the interfering gain law gives
//!
//! ```text
//! Z(r, l) = E[D_int] · (1/2π) ∫₀^{2π} I(d₁(θ)) dθ,
//! I(d)    = ∫_{r_B}^{r_max + d} p_I(q, d) · pl(q) dq.
//! ```

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};

use crate::antenna::{AngularDensity, GainDistribution, UniformAngle};
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::geometry::{blockage_prob, interferer_density, interferer_origin_distance};
use crate::par::par_map;
use crate::quad;

const THETA_TOL: f64 = 1e-9;

/// Mixed LOS/NLOS path gain per unit antenna gain at distance `q`.
pub fn mixed_path_gain(q: f64, s: &Scenario) -> f64 {
    let pb = blockage_prob(q, s);
    pb * s.a_nlos * q.powf(-s.alpha_nlos) + (1.0 - pb) * s.a_los * q.powf(-s.alpha_los)
}

/// I(d): interference per unit power and unit gain at a BS `d` from the origin.
pub fn interference_at_bs(d: f64, s: &Scenario) -> Result<f64> {
    if s.lambda_u == 0.0 {
        return Ok(0.0);
    }
    let f = |q: f64| interferer_density(q, d, s) * mixed_path_gain(q, s);
    let hi = s.r_max + d;
    let breaks = [s.r_max - d, d - s.r_max];
    let scale = s.lambda_u * TAU * s.r_blocker.powf(1.0 - s.alpha_los.min(s.alpha_nlos)).max(1.0);
    quad::integrate_split(&f, s.r_blocker, hi, &breaks, 1e-11 * scale).map_err(|e| match e {
        Error::Quadrature { a, b, estimate, .. } => Error::Quadrature {
            a,
            b,
            estimate,
            context: format!(" in the interferer integral at BS distance {d}"),
        },
        other => other,
    })
}

/// Angles in (0, π) where d₁ crosses a distance at which I(d) has a kink.
fn kink_angles(r: f64, l: f64, s: &Scenario) -> Vec<f64> {
    if r == 0.0 || l == 0.0 {
        return Vec::new();
    }
    [s.r_max - s.r_blocker, s.r_max, s.r_max + s.r_blocker]
        .iter()
        .filter_map(|&d| {
            let c = (r * r + l * l - d * d) / (2.0 * r * l);
            (c.abs() < 1.0).then(|| c.acos())
        })
        .collect()
}

/// (1/2π)∫₀^{2π} I(d₁(θ, r, l)) dθ, evaluated on [0, π] by symmetry.
pub fn geometric_kernel(r: f64, l: f64, s: &Scenario) -> Result<f64> {
    if s.lambda_u == 0.0 {
        return Ok(0.0);
    }
    let err = RefCell::new(None);
    let f = |theta: f64| match interference_at_bs(interferer_origin_distance(theta, r, l), s) {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    // Relative target, kept well above the noise of the inner integral.
    let tol = THETA_TOL * PI * f(0.5 * PI).abs().max(f64::MIN_POSITIVE);
    let v = quad::integrate_split(&f, 0.0, PI, &kink_angles(r, l, s), tol)?;
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(v / PI)
}

/// Same average over the full circle, without the reflection shortcut.
pub fn geometric_kernel_full(r: f64, l: f64, s: &Scenario) -> Result<f64> {
    let f = |theta: f64| interference_at_bs(interferer_origin_distance(theta, r, l), s).unwrap_or(f64::NAN);
    let tol = THETA_TOL * TAU * f(0.5 * PI).abs().max(f64::MIN_POSITIVE);
    let mut breaks = kink_angles(r, l, s);
    breaks.extend(breaks.clone().iter().map(|t| TAU - t));
    breaks.push(PI);
    let v = quad::integrate_split(&f, 0.0, TAU, &breaks, tol)?;
    Ok(v / TAU)
}

/// Gain law of an interfering link toward a BS it does not serve.
pub fn interferer_gains(phi_marginal: Option<&dyn AngularDensity>, s: &Scenario) -> Result<GainDistribution> {
    let h = s.beam_bs / TAU;
    let f = match phi_marginal {
        // Population mean of the own-alignment probability.
        Some(m) => population_alignment(m, s),
        None => {
            let (f, _) = crate::antenna::alignment_probs(&UniformAngle, 0.0, s)?;
            f
        }
    };
    GainDistribution::from_alignment(f, h, s)
}

/// E_φ[mass of the marginal within φ ± w/2] for φ drawn from the marginal.
pub fn population_alignment(m: &dyn AngularDensity, s: &Scenario) -> f64 {
    let n = 256;
    let d = TAU / n as f64;
    (0..n)
        .map(|i| {
            let a = i as f64 * d;
            let w = m.mass(a, a + d);
            let c = a + 0.5 * d;
            w * m.mass(c - s.beam_mu / 2.0, c + s.beam_mu / 2.0)
        })
        .sum()
}

/// Z(r, l) for the interfering gain law implied by `phi_marginal`.
pub fn coupling_kernel(r: f64, l: f64, phi_marginal: &dyn AngularDensity, s: &Scenario) -> Result<f64> {
    let marginal = if s.mfe.z_time_varying { Some(phi_marginal) } else { None };
    let gd = interferer_gains(marginal, s)?;
    Ok(gd.mean() * geometric_kernel(r, l, s)?)
}

/// Z with an explicit interfering gain law.
pub fn coupling_kernel_with_gains(r: f64, l: f64, gd: &GainDistribution, s: &Scenario) -> Result<f64> {
    Ok(gd.mean() * geometric_kernel(r, l, s)?)
}

/// Kernel values on a fixed list of (r, l) nodes.
#[derive(Debug, Clone)]
pub struct InterferenceKernel {
    pub coords: Vec<(f64, f64)>,
    /// Gain-free part (1/2π)∫I(d₁)dθ at each node.
    pub geometric: Vec<f64>,
    /// E[D] of the interfering gain law.
    pub mean_gain: f64,
}

impl InterferenceKernel {
    pub fn build(coords: Vec<(f64, f64)>, s: &Scenario) -> Result<Self> {
        let geometric = par_map(&coords, |&(r, l)| geometric_kernel(r, l, s))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mean_gain = interferer_gains(None, s)?.mean();
        Ok(InterferenceKernel {
            coords,
            geometric,
            mean_gain,
        })
    }

    /// Z at every node for interfering mean gain `mean_gain`.
    pub fn values_with_gain(&self, mean_gain: f64) -> Vec<f64> {
        self.geometric.iter().map(|g| g * mean_gain).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.values_with_gain(self.mean_gain)
    }
}

/// Population mean transmit power Σ m·P·cell_volume.
pub fn mean_power(density: &[f64], policy: &[f64], cell_volume: f64) -> Result<f64> {
    if density.len() != policy.len() {
        return Err(Error::precondition("density and policy grids differ in size"));
    }
    let mass: f64 = density.iter().sum::<f64>() * cell_volume;
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized { mass });
    }
    Ok(density.iter().zip(policy).map(|(m, p)| m * p).sum::<f64>() * cell_volume)
}

/// M̄ = P̄·Z(r, l).
pub fn aggregate_interference(density: &[f64], policy: &[f64], cell_volume: f64, z: f64) -> Result<f64> {
    Ok(mean_power(density, policy, cell_volume)? * z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> Scenario {
        Scenario::default()
    }

    #[test]
    fn no_users_no_interference() {
        let mut s = reference();
        s.lambda_u = 0.0;
        assert_eq!(coupling_kernel(10.0, 5.0, &UniformAngle, &s).unwrap(), 0.0);
    }

    #[test]
    fn kernel_linear_in_gains() {
        let s = reference();
        let gd = interferer_gains(None, &s).unwrap();
        let z = coupling_kernel_with_gains(10.0, 5.0, &gd, &s).unwrap();
        let z3 = coupling_kernel_with_gains(10.0, 5.0, &gd.scaled(3.0), &s).unwrap();
        assert_relative_eq!(z3, 3.0 * z, max_relative = 1e-14);
        assert!(z > 0.0);
    }

    #[test]
    fn reflection_shortcut_matches_full_circle() {
        let s = reference();
        for (r, l) in [(10.0, 5.0), (20.0, 10.0), (0.5, 14.0), (24.9, 0.4)] {
            let half = geometric_kernel(r, l, &s).unwrap();
            let full = geometric_kernel_full(r, l, &s).unwrap();
            assert!((half - full).abs() <= 1e-10 * half.max(1.0), "{half} vs {full}");
        }
    }

    #[test]
    fn bs_interference_against_direct_double_integral() {
        // At the centre I(0) reduces to a radial integral over the whole disk.
        let s = reference();
        let f = |q: f64| s.lambda_u * TAU * q * mixed_path_gain(q, &s);
        let direct = quad::integrate(&f, s.r_blocker, s.r_max, 1e-12).unwrap();
        assert_relative_eq!(interference_at_bs(0.0, &s).unwrap(), direct, max_relative = 1e-9);
    }

    #[test]
    fn mean_power_examples() {
        let vol = 0.25;
        let m = vec![1.0; 4];
        assert_eq!(mean_power(&m, &[0.0; 4], vol).unwrap(), 0.0);
        assert_relative_eq!(aggregate_interference(&m, &[0.1; 4], vol, 2.0).unwrap(), 0.2);
        // Two equal point masses with powers p₁, p₂.
        let m = vec![2.0, 0.0, 2.0, 0.0];
        let p = vec![0.02, 0.9, 0.06, 0.9];
        assert_relative_eq!(mean_power(&m, &p, vol).unwrap(), 0.04);
        assert!(matches!(
            mean_power(&[1.0; 4], &[0.0; 4], 1.0),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn z_increases_with_user_density() {
        let mut s = reference();
        let a = coupling_kernel(10.0, 5.0, &UniformAngle, &s).unwrap();
        s.lambda_u = 0.05;
        let b = coupling_kernel(10.0, 5.0, &UniformAngle, &s).unwrap();
        assert!(b > a);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn aggregate_linear_in_policy(c in 0.0f64..10.0, seed in 0u64..1000) {
                let n = 16;
                let vol = 1.0 / n as f64;
                let m = vec![1.0; n];
                let p: Vec<f64> = (0..n).map(|i| ((i as u64 * 7 + seed) % 11) as f64 * 1e-3).collect();
                let cp: Vec<f64> = p.iter().map(|x| c * x).collect();
                let a = aggregate_interference(&m, &cp, vol, 3.0).unwrap();
                let b = c * aggregate_interference(&m, &p, vol, 3.0).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-30));
            }

            #[test]
            fn z_monotone_in_user_density(lu in 0.001f64..0.1, k in 1.1f64..3.0) {
                let mut s = Scenario::default();
                s.lambda_u = lu;
                let a = coupling_kernel(8.0, 4.0, &UniformAngle, &s).unwrap();
                s.lambda_u = lu * k;
                let b = coupling_kernel(8.0, 4.0, &UniformAngle, &s).unwrap();
                prop_assert!(b > a);
            }
        }
    }
}
