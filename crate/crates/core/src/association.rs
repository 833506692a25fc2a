//! Gain-threshold user association.
//!
//! A user connects to the nearest BS within `r_0` whose gain clears the
//! threshold, `A_k·D ≥ η`. The LOS association density at distance `l` is
//!
//! ```text
//! f^c_L(l) = f_L(l) · P(D ∈ 𝒢_L) · [p_N(l) ⊕ P(D ∈ 𝒢_N)]
//! ```
//!
//! where `p_N` is the NLOS void probability and `⊕` is either the clamped
//! sum or the inclusion–exclusion union (see [`AssocMode`]). NLOS is
//! symmetric with the primed sets and `p_L`.

use std::sync::Arc;

use crate::antenna::{gain_distribution, AngularDensity, GainDistribution};
use crate::config::{AssocMode, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{nearest_bs_pdf, DistancePdf, LinkKind};
use crate::quad;

/// Relative tolerance on the threshold comparison, so a support point that
/// equals η/A up to rounding belongs to both the ≥ and ≤ sets.
const SET_RTOL: f64 = 1e-12;

/// Membership masks over the four-point gain support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GainSets {
    /// 𝒢_L = {g ≥ η/A_L}
    pub los: [bool; 4],
    /// 𝒢_N = {g ≤ η/A_N}
    pub nlos: [bool; 4],
    /// 𝒢'_L = {g ≤ η/A_L}
    pub los_prime: [bool; 4],
    /// 𝒢'_N = {g ≥ η/A_N}
    pub nlos_prime: [bool; 4],
}

fn at_least(g: f64, t: f64) -> bool {
    g >= t * (1.0 - SET_RTOL)
}

fn at_most(g: f64, t: f64) -> bool {
    g <= t * (1.0 + SET_RTOL)
}

pub fn gain_threshold_sets(gd: &GainDistribution, s: &Scenario) -> GainSets {
    let tl = s.eta / s.a_los;
    let tn = s.eta / s.a_nlos;
    let g = gd.support;
    GainSets {
        los: g.map(|x| at_least(x, tl)),
        nlos: g.map(|x| at_most(x, tn)),
        los_prime: g.map(|x| at_most(x, tl)),
        nlos_prime: g.map(|x| at_least(x, tn)),
    }
}

impl GainSets {
    /// The qualifying set for a serving link of `kind` (𝒢_L or 𝒢'_N).
    pub fn qualifying(&self, kind: LinkKind) -> [bool; 4] {
        match kind {
            LinkKind::Los => self.los,
            LinkKind::Nlos => self.nlos_prime,
        }
    }

    /// The set of competitor gains that fail the threshold (𝒢_N or 𝒢'_L).
    pub fn competitor_fails(&self, kind: LinkKind) -> [bool; 4] {
        match kind {
            LinkKind::Los => self.nlos,
            LinkKind::Nlos => self.los_prime,
        }
    }
}

/// P(D ∈ set).
pub fn set_prob(gd: &GainDistribution, set: &[bool; 4]) -> f64 {
    gd.probs.iter().zip(set).filter(|(_, &m)| m).map(|(p, _)| p).sum()
}

/// "No nearer competitor that qualifies" factor.
pub fn bracket(mode: AssocMode, void_other: f64, p_fail: f64) -> f64 {
    match mode {
        AssocMode::Clamp => (void_other + p_fail).min(1.0),
        AssocMode::Union => void_other + (1.0 - void_other) * p_fail,
    }
}

/// Nearest LOS and NLOS distance laws for one user position.
#[derive(Debug, Clone)]
pub struct SpatialLaw {
    pub r: f64,
    pub los: DistancePdf,
    pub nlos: DistancePdf,
}

impl SpatialLaw {
    pub fn new(r: f64, s: &Scenario) -> Result<Self> {
        Ok(SpatialLaw {
            r,
            los: nearest_bs_pdf(LinkKind::Los, r, s)?,
            nlos: nearest_bs_pdf(LinkKind::Nlos, r, s)?,
        })
    }

    /// Both laws built with p_B and 1 − p_B exchanged.
    pub fn swapped(r: f64, s: &Scenario) -> Result<Self> {
        Ok(SpatialLaw {
            r,
            los: DistancePdf::swapped(LinkKind::Los, r, s)?,
            nlos: DistancePdf::swapped(LinkKind::Nlos, r, s)?,
        })
    }

    pub fn pdf(&self, kind: LinkKind) -> &DistancePdf {
        match kind {
            LinkKind::Los => &self.los,
            LinkKind::Nlos => &self.nlos,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.los.breakpoints();
        b.extend(self.nlos.breakpoints());
        b
    }
}

#[derive(Debug, Clone)]
pub struct AssociationLaw {
    pub r: f64,
    pub gains: GainDistribution,
    pub gain_sets: GainSets,
    pub mode: AssocMode,
    pub rho_los: f64,
    /// 1 − ρ_L.
    pub rho_nlos: f64,
    /// B_N·∫f^c_N, the NLOS association probability computed directly.
    pub rho_nlos_direct: f64,
    spatial: Arc<SpatialLaw>,
}

/// Association law for a user at distance `r`, with own-link alignment
/// taken from `phi_marginal` and the serving bearing `psi_ub`.
pub fn association_law(r: f64, phi_marginal: &dyn AngularDensity, psi_ub: f64, s: &Scenario) -> Result<AssociationLaw> {
    let gd = gain_distribution(phi_marginal, psi_ub, s)?;
    AssociationLaw::new(Arc::new(SpatialLaw::new(r, s)?), gd, s)
}

impl AssociationLaw {
    pub fn new(spatial: Arc<SpatialLaw>, gains: GainDistribution, s: &Scenario) -> Result<Self> {
        let gain_sets = gain_threshold_sets(&gains, s);
        let mut law = AssociationLaw {
            r: spatial.r,
            gains,
            gain_sets,
            mode: s.assoc_mode,
            rho_los: 0.0,
            rho_nlos: 1.0,
            rho_nlos_direct: 0.0,
            spatial,
        };
        law.rho_los = law.integrate(LinkKind::Los)?.clamp(0.0, 1.0);
        law.rho_nlos = 1.0 - law.rho_los;
        law.rho_nlos_direct = law.integrate(LinkKind::Nlos)?.clamp(0.0, 1.0);
        Ok(law)
    }

    fn integrate(&self, kind: LinkKind) -> Result<f64> {
        let pdf = self.spatial.pdf(kind);
        if set_prob(&self.gains, &self.gain_sets.qualifying(kind)) == 0.0 {
            return Ok(0.0);
        }
        let f = |l: f64| self.density(kind, l);
        let mut breaks = self.spatial.breakpoints();
        breaks.extend(self.clamp_kink(kind));
        let v = quad::integrate_split(&f, 0.0, pdf.r_0(), &breaks, 1e-9).map_err(|e| match e {
            Error::Quadrature { a, b, estimate, .. } => Error::Quadrature {
                a,
                b,
                estimate,
                context: format!(" in the {} association integral at r = {}", kind.label(), self.r),
            },
            other => other,
        })?;
        Ok(pdf.normalizer * v)
    }

    /// Distance where the clamped bracket reaches 1, if inside `(0, r_0)`.
    fn clamp_kink(&self, kind: LinkKind) -> Option<f64> {
        let fail = set_prob(&self.gains, &self.gain_sets.competitor_fails(kind));
        if self.mode != AssocMode::Clamp || fail <= 0.0 || fail >= 1.0 {
            return None;
        }
        let other = self.spatial.pdf(kind.other());
        let (mut lo, mut hi) = (0.0, other.r_0());
        if other.void(hi) >= 1.0 - fail {
            return None;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if other.void(mid) >= 1.0 - fail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    pub fn spatial(&self) -> &SpatialLaw {
        &self.spatial
    }

    /// Competitor factor for a serving link of `kind` at distance `l`.
    pub fn bracket(&self, kind: LinkKind, l: f64) -> f64 {
        let void_other = self.spatial.pdf(kind.other()).void(l);
        let fail = set_prob(&self.gains, &self.gain_sets.competitor_fails(kind));
        bracket(self.mode, void_other, fail)
    }

    /// Conditional serving-distance density f^c_k(l).
    pub fn density(&self, kind: LinkKind, l: f64) -> f64 {
        let q = set_prob(&self.gains, &self.gain_sets.qualifying(kind));
        if q == 0.0 {
            return 0.0;
        }
        let f = self.spatial.pdf(kind).evaluate(l);
        if f == 0.0 {
            return 0.0;
        }
        f * q * self.bracket(kind, l)
    }

    pub fn pdf_los(&self, l: f64) -> f64 {
        self.density(LinkKind::Los, l)
    }

    pub fn pdf_nlos(&self, l: f64) -> f64 {
        self.density(LinkKind::Nlos, l)
    }
}
