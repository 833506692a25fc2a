//! Sectored antenna model: main-lobe gains, alignment probabilities and the
//! four-point distribution of the link gain product.

use std::f64::consts::{PI, TAU};

use crate::config::{HMode, Scenario};
use crate::error::{Error, Result};

/// Main-lobe gain of a sectored antenna, 2/(1 − cos(w/2)).
pub fn main_lobe_gain(beamwidth: f64) -> Result<f64> {
    if !(beamwidth > 0.0 && beamwidth <= TAU) {
        return Err(Error::Domain(format!("beamwidth {beamwidth} outside (0, 2π]")));
    }
    Ok(2.0 / (1.0 - (beamwidth / 2.0).cos()))
}

/// A probability law on the circle.
pub trait AngularDensity: Sync {
    /// Mass of the arc from `a` to `b` (counter-clockwise, `0 ≤ b − a ≤ 2π`).
    fn mass(&self, a: f64, b: f64) -> f64;

    fn total(&self) -> f64 {
        self.mass(0.0, TAU)
    }
}

/// Piecewise-constant density on `n` cells centred at `2πi/n`.
#[derive(Debug, Clone)]
pub struct PhiGrid {
    dphi: f64,
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl PhiGrid {
    /// `values` are densities (1/rad) per cell.
    pub fn new(values: Vec<f64>) -> Self {
        let n = values.len();
        let dphi = TAU / n as f64;
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in &values {
            acc += v * dphi;
            prefix.push(acc);
        }
        PhiGrid { dphi, values, prefix }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mass on `[−Δφ/2, x]`, extended periodically.
    fn cumulative(&self, x: f64) -> f64 {
        let n = self.values.len();
        let total = self.prefix[n];
        let y = x + 0.5 * self.dphi;
        let k = (y / TAU).floor();
        let y = y - k * TAU;
        let j = ((y / self.dphi) as usize).min(n - 1);
        k * total + self.prefix[j] + self.values[j] * (y - j as f64 * self.dphi)
    }
}

impl AngularDensity for PhiGrid {
    fn mass(&self, a: f64, b: f64) -> f64 {
        self.cumulative(b) - self.cumulative(a)
    }
}

/// All mass at one angle.
#[derive(Debug, Clone, Copy)]
pub struct PointMass(pub f64);

impl AngularDensity for PointMass {
    fn mass(&self, a: f64, b: f64) -> f64 {
        if b - a >= TAU {
            return 1.0;
        }
        let off = (self.0 - a).rem_euclid(TAU);
        if off <= b - a {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UniformAngle;

impl AngularDensity for UniformAngle {
    fn mass(&self, a: f64, b: f64) -> f64 {
        ((b - a) / TAU).clamp(0.0, 1.0)
    }
}

/// Normal law wrapped onto the circle.
#[derive(Debug, Clone, Copy)]
pub struct WrappedGaussian {
    pub mean: f64,
    pub var: f64,
}

impl WrappedGaussian {
    fn wraps(&self) -> i32 {
        (8.0 * self.var.sqrt() / TAU).ceil() as i32 + 1
    }

    /// Density at `x`, 1/rad.
    pub fn density(&self, x: f64) -> f64 {
        let sd = self.var.sqrt();
        let norm = 1.0 / (sd * (2.0 * PI).sqrt());
        (-self.wraps()..=self.wraps())
            .map(|k| {
                let z = (x - self.mean + TAU * k as f64) / sd;
                norm * (-0.5 * z * z).exp()
            })
            .sum()
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

impl AngularDensity for WrappedGaussian {
    fn mass(&self, a: f64, b: f64) -> f64 {
        let sd = self.var.sqrt();
        (-self.wraps()..=self.wraps())
            .map(|k| {
                let shift = TAU * k as f64 - self.mean;
                std_normal_cdf((b + shift) / sd) - std_normal_cdf((a + shift) / sd)
            })
            .sum()
    }
}

/// MU and BS alignment probabilities (F, H) for a serving bearing `psi_ub`.
pub fn alignment_probs(phi_marginal: &dyn AngularDensity, psi_ub: f64, s: &Scenario) -> Result<(f64, f64)> {
    let total = phi_marginal.total();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized { mass: total });
    }
    let f = beam_mass(phi_marginal, psi_ub, s.beam_mu);
    let h = match s.h_mode {
        HMode::Uniform => s.beam_bs / TAU,
        HMode::LikeF => beam_mass(phi_marginal, psi_ub, s.beam_bs),
    };
    Ok((f, h))
}

fn beam_mass(d: &dyn AngularDensity, center: f64, width: f64) -> f64 {
    if width >= TAU {
        return 1.0;
    }
    d.mass(center - width / 2.0, center + width / 2.0).clamp(0.0, 1.0)
}

/// Four-point law of the gain product D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainDistribution {
    /// (G_B·G_m, G_B·g_m, g_B·G_m, g_B·g_m)
    pub support: [f64; 4],
    pub probs: [f64; 4],
}

impl GainDistribution {
    /// Law from main/side gains at BS and MU and the alignment probabilities.
    pub fn new(g_bs: f64, side_bs: f64, g_mu: f64, side_mu: f64, f: f64, h: f64) -> Self {
        GainDistribution {
            support: [g_bs * g_mu, g_bs * side_mu, side_bs * g_mu, side_bs * side_mu],
            probs: [f * h, (1.0 - f) * h, f * (1.0 - h), (1.0 - f) * (1.0 - h)],
        }
    }

    pub fn from_alignment(f: f64, h: f64, s: &Scenario) -> Result<Self> {
        Ok(Self::new(
            main_lobe_gain(s.beam_bs)?,
            s.sidelobe_bs,
            main_lobe_gain(s.beam_mu)?,
            s.sidelobe_mu,
            f,
            h,
        ))
    }

    /// E[D].
    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(g, p)| g * p).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        GainDistribution {
            support: self.support.map(|g| g * c),
            probs: self.probs,
        }
    }
}

pub fn gain_distribution(phi_marginal: &dyn AngularDensity, psi_ub: f64, s: &Scenario) -> Result<GainDistribution> {
    let (f, h) = alignment_probs(phi_marginal, psi_ub, s)?;
    GainDistribution::from_alignment(f, h, s)
}
