//! Finite-disk stochastic geometry.
//!
//! All nearest-BS laws share one structure. For a user at distance `r` from
//! the origin, BSs of a given kind form an inhomogeneous Poisson process in
//! the serving distance `v` with hazard
//!
//! ```text
//! h_k(v) = λ_b · C(v, r) · w_k(v),   w_LOS = 1 − p_B,  w_NLOS = p_B
//! ```
//!
//! where `C(v, r)` is the length of the circle of radius `v` around the user
//! that lies inside the network disk (`2πv` when the circle is interior).
//! With `Λ_k(l) = ∫₀ˡ h_k`, the void probability is `exp(−Λ_k(l))`, the
//! normalizer is `B_k = 1 − exp(−Λ_k(r_0))`, and the density of the nearest
//! distance conditioned on at least one BS within `r_0` is
//! `h_k(l)·exp(−Λ_k(l)) / B_k`.

use std::f64::consts::PI;

use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::quad;

/// Absolute tolerance for the radial hazard integrals.
pub const HAZARD_TOL: f64 = 1e-9;

/// Uniform knot intervals per `[0, r_0]` in the cumulative-hazard cache.
const KNOT_INTERVALS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkKind {
    Los,
    Nlos,
}

impl LinkKind {
    pub fn other(self) -> Self {
        match self {
            LinkKind::Los => LinkKind::Nlos,
            LinkKind::Nlos => LinkKind::Los,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LinkKind::Los => "los",
            LinkKind::Nlos => "nlos",
        }
    }
}

/// Probability that a link of length `l` is blocked, clamped to 0 below r_B.
pub fn blockage_prob(l: f64, s: &Scenario) -> f64 {
    blockage(l, s.lambda_blockers(), s.r_blocker)
}

fn blockage(l: f64, lambda: f64, r_b: f64) -> f64 {
    if l <= r_b {
        0.0
    } else {
        -(-lambda * (l - r_b) * r_b).exp_m1()
    }
}

/// Length of the circle of radius `l`, centred at distance `r` from the
/// origin, that lies inside the disk of radius `r_max`.
pub fn arc_length(l: f64, r: f64, s: &Scenario) -> f64 {
    arc_length_in(l, r, s.r_max)
}

pub fn arc_length_in(l: f64, r: f64, r_max: f64) -> f64 {
    if l <= 0.0 {
        return 0.0;
    }
    if l <= r_max - r {
        return 2.0 * PI * l;
    }
    if l >= r_max + r || r <= 0.0 {
        return 0.0;
    }
    let c = ((r * r + l * l - r_max * r_max) / (2.0 * r * l)).clamp(-1.0, 1.0);
    2.0 * l * c.acos()
}

/// Distance of a point at angle `theta` and distance `l` from a user at
/// distance `r` from the origin (law of cosines).
pub fn interferer_origin_distance(theta: f64, r: f64, l: f64) -> f64 {
    (r * r + l * l - 2.0 * r * l * theta.cos()).max(0.0).sqrt()
}

/// Density (1/m) of users at distance `q` from a BS located `d` from the origin.
pub fn interferer_density(q: f64, d: f64, s: &Scenario) -> f64 {
    if q < 0.0 {
        return 0.0;
    }
    s.lambda_u * arc_length_in(q, d, s.r_max)
}

/// The scalar parameters the hazard depends on.
#[derive(Debug, Clone, Copy)]
struct Field {
    lambda_b: f64,
    lambda: f64,
    r_b: f64,
    r_max: f64,
}

impl Field {
    fn new(s: &Scenario) -> Self {
        Field {
            lambda_b: s.lambda_b,
            lambda: s.lambda_blockers(),
            r_b: s.r_blocker,
            r_max: s.r_max,
        }
    }

    fn weight(&self, los_weight: bool, v: f64) -> f64 {
        let p = blockage(v, self.lambda, self.r_b);
        if los_weight {
            1.0 - p
        } else {
            p
        }
    }

    fn hazard(&self, los_weight: bool, v: f64, r: f64) -> f64 {
        self.lambda_b * arc_length_in(v, r, self.r_max) * self.weight(los_weight, v)
    }

    fn breaks(&self, r: f64) -> [f64; 3] {
        [self.r_b, self.r_max - r, self.r_max + r]
    }

    fn cumulative(&self, los_weight: bool, l: f64, r: f64) -> Result<f64> {
        let h = |v: f64| self.hazard(los_weight, v, r);
        quad::integrate_split(&h, 0.0, l, &self.breaks(r), HAZARD_TOL)
    }
}

fn check_r(r: f64, s: &Scenario) -> Result<()> {
    if !(0.0..=s.r_max * (1.0 + 1e-12)).contains(&r) {
        return Err(Error::precondition(format!(
            "user distance r = {r} outside [0, r_max = {}]",
            s.r_max
        )));
    }
    Ok(())
}

/// Hazard h_k(v) of the nearest-BS process seen from distance `r`.
pub fn hazard(kind: LinkKind, v: f64, r: f64, s: &Scenario) -> f64 {
    Field::new(s).hazard(kind == LinkKind::Los, v, r)
}

/// Cumulative hazard Λ_k(l) = ∫₀ˡ h_k(v) dv.
pub fn cumulative_hazard(kind: LinkKind, l: f64, r: f64, s: &Scenario) -> Result<f64> {
    check_r(r, s)?;
    Field::new(s).cumulative(kind == LinkKind::Los, l.max(0.0), r)
}

/// Probability that no BS of `kind` lies within distance `l` of the user.
pub fn void_prob(kind: LinkKind, l: f64, r: f64, s: &Scenario) -> Result<f64> {
    if l < 0.0 {
        return Err(Error::precondition(format!("distance l = {l} is negative")));
    }
    Ok((-cumulative_hazard(kind, l, r, s)?).exp())
}

/// Nearest-BS distance law on `[0, r_0]` for one user position, with the
/// cumulative hazard cached at a fixed set of knots.
#[derive(Debug, Clone)]
pub struct DistancePdf {
    pub kind: LinkKind,
    pub r: f64,
    /// Probability of at least one BS of this kind within r_0 (B_L or B_N).
    pub normalizer: f64,
    r_0: f64,
    los_weight: bool,
    field: Field,
    knots: Vec<f64>,
    cum: Vec<f64>,
}

/// Nearest LOS or NLOS BS distance law for a user at distance `r`.
pub fn nearest_bs_pdf(kind: LinkKind, r: f64, s: &Scenario) -> Result<DistancePdf> {
    DistancePdf::build(kind, kind == LinkKind::Los, r, s)
}

impl DistancePdf {
    /// The law of `kind` built with the complementary blockage weight
    /// (`p_B` and `1 − p_B` exchanged).
    pub fn swapped(kind: LinkKind, r: f64, s: &Scenario) -> Result<Self> {
        DistancePdf::build(kind, kind != LinkKind::Los, r, s)
    }

    fn build(kind: LinkKind, los_weight: bool, r: f64, s: &Scenario) -> Result<Self> {
        check_r(r, s)?;
        let r = r.min(s.r_max);
        let field = Field::new(s);
        let r_0 = s.r_0;
        let mut knots: Vec<f64> = (0..=KNOT_INTERVALS)
            .map(|i| r_0 * i as f64 / KNOT_INTERVALS as f64)
            .collect();
        knots.extend(field.breaks(r).iter().filter(|&&b| b > 0.0 && b < r_0));
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let h = |v: f64| field.hazard(los_weight, v, r);
        let mut cum = Vec::with_capacity(knots.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in knots.windows(2) {
            acc += quad::integrate(&h, w[0], w[1], HAZARD_TOL / KNOT_INTERVALS as f64)
                .map_err(|e| with_context(e, kind, r))?;
            cum.push(acc);
        }
        let normalizer = -(-acc).exp_m1();
        if !(normalizer > 0.0) {
            return Err(Error::Domain(format!(
                "no {} BS can lie within r_0 of a user at r = {r}",
                kind.label()
            )));
        }
        Ok(DistancePdf {
            kind,
            r,
            normalizer,
            r_0,
            los_weight,
            field,
            knots,
            cum,
        })
    }

    pub fn r_0(&self) -> f64 {
        self.r_0
    }

    /// Hazard h(l).
    pub fn hazard(&self, l: f64) -> f64 {
        self.field.hazard(self.los_weight, l, self.r)
    }

    /// Cumulative hazard Λ(l) for `l ∈ [0, r_0]`.
    pub fn cumulative(&self, l: f64) -> f64 {
        let l = l.clamp(0.0, self.r_0);
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&l)) {
            Ok(i) => return self.cum[i],
            Err(i) => i - 1,
        };
        let h = |v: f64| self.hazard(v);
        // Knots sit on every kink, so the remainder is smooth.
        let rest = quad::integrate(&h, self.knots[i], l, 1e-13)
            .unwrap_or_else(|_| quadrature::integrate(h, self.knots[i], l, 1e-13).integral);
        self.cum[i] + rest
    }

    /// Void probability exp(−Λ(l)) on `[0, r_0]`.
    pub fn void(&self, l: f64) -> f64 {
        (-self.cumulative(l)).exp()
    }

    /// Unnormalized density h(l)·exp(−Λ(l)) = normalizer·evaluate(l).
    pub fn joint(&self, l: f64) -> f64 {
        if !(0.0..=self.r_0).contains(&l) {
            return 0.0;
        }
        let h = self.hazard(l);
        if h == 0.0 {
            return 0.0;
        }
        h * self.void(l)
    }

    /// Conditional density f(l) on `[0, r_0]`, 1/m.
    pub fn evaluate(&self, l: f64) -> f64 {
        self.joint(l) / self.normalizer
    }

    /// Conditional CDF of the nearest distance.
    pub fn cdf(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        if l >= self.r_0 {
            return 1.0;
        }
        (-(-self.cumulative(l)).exp_m1() / self.normalizer).min(1.0)
    }

    /// Kink locations inside `[0, r_0]` (for quadrature splitting).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.field
            .breaks(self.r)
            .into_iter()
            .filter(|&b| b > 0.0 && b < self.r_0)
            .collect()
    }
}

fn with_context(e: Error, kind: LinkKind, r: f64) -> Error {
    match e {
        Error::Quadrature { a, b, estimate, .. } => Error::Quadrature {
            a,
            b,
            estimate,
            context: format!(" in the {} hazard at r = {r}", kind.label()),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> Scenario {
        Scenario::default()
    }

    #[test]
    fn blockage_examples() {
        let s = reference();
        assert_eq!(blockage_prob(s.r_blocker, &s), 0.0);
        assert_eq!(blockage_prob(0.1, &s), 0.0);
        // 1 − e^{−0.12·9.7·0.3} = 1 − e^{−0.3492}
        assert_relative_eq!(blockage_prob(10.0, &s), 0.2947479, epsilon = 1e-6);
        assert!(blockage_prob(20.0, &s) > blockage_prob(10.0, &s));
        assert!(blockage_prob(1e4, &s) > 1.0 - 1e-12);
    }

    #[test]
    fn arc_length_examples() {
        let s = reference();
        assert_relative_eq!(arc_length(3.0, 5.0, &s), 6.0 * PI, epsilon = 1e-12);
        assert_eq!(arc_length(50.1, 25.0, &s), 0.0);
        // Continuity at the interior boundary l = r_max − r.
        let at = arc_length(5.0 + 1e-9, 20.0, &s);
        assert_relative_eq!(at, 10.0 * PI, epsilon = 1e-3);
    }

    #[test]
    fn arc_length_half_circle_at_rim_by_angular_sampling() {
        // Fraction of the circle inside the disk from dense angular sampling.
        let (r, l, rm) = (25.0, 1.0, 25.0);
        let n = 1_000_000;
        let inside = (0..n)
            .filter(|&i| {
                let a = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                let (x, y) = (l * a.cos(), r + l * a.sin());
                x * x + y * y <= rm * rm
            })
            .count();
        let sampled = 2.0 * PI * l * inside as f64 / n as f64;
        assert_relative_eq!(arc_length_in(l, r, rm), sampled, epsilon = 1e-4);
        // ≈ π·1, slightly less because the rim curves away.
        assert!((arc_length_in(l, r, rm) - PI).abs() < 0.05);
    }

    /// Arc angle from the two boundary intersection points and the slopes of
    /// the lines joining them to the user at (0, r).
    fn arc_length_slopes(l: f64, r: f64, rm: f64) -> Option<f64> {
        let delta = ((r + rm + l) * (r + rm - l) * (r - rm + l) * (-r + rm + l)).sqrt() / 4.0;
        let x1 = 2.0 * delta / r;
        let x2 = -x1;
        let y = r / 2.0 + (rm * rm - l * l) / (2.0 * r);
        let m1 = (y - r) / x1;
        let m2 = (y - r) / x2;
        // The arctangent is single valued only while the chord angle stays
        // within a quarter turn of the horizontal.
        if m1.abs() >= 1.0 {
            return None;
        }
        let theta = PI + ((m1 - m2) / (1.0 + m1 * m2)).atan();
        Some(theta * l)
    }

    #[test]
    fn arc_length_agrees_with_slope_construction() {
        let rm = 25.0;
        let mut checked = 0;
        for i in 1..40 {
            for j in 1..60 {
                let r = rm * i as f64 / 40.0;
                let l = (rm - r) + (2.0 * r) * j as f64 / 60.0;
                if let Some(c) = arc_length_slopes(l, r, rm) {
                    assert_relative_eq!(arc_length_in(l, r, rm), c, epsilon = 1e-9, max_relative = 1e-9);
                    checked += 1;
                }
            }
        }
        assert!(checked > 200);
    }

    #[test]
    fn origin_distance_examples() {
        assert_relative_eq!(interferer_origin_distance(0.0, 3.0, 4.0), 1.0);
        assert_relative_eq!(interferer_origin_distance(PI, 3.0, 4.0), 7.0);
        assert_relative_eq!(interferer_origin_distance(PI / 2.0, 3.0, 4.0), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn interferer_density_examples() {
        let mut s = reference();
        assert_relative_eq!(interferer_density(7.0, 0.0, &s), 2.0 * PI * 7.0 * 0.03);
        for d in [0.0, 5.0, 17.0, 25.0] {
            let f = |q: f64| interferer_density(q, d, &s);
            let total = quad::integrate_split(&f, 0.0, s.r_max + d, &[s.r_max - d], 1e-10).unwrap();
            assert_relative_eq!(total, s.lambda_u * PI * s.r_max * s.r_max, max_relative = 1e-8);
        }
        s.lambda_u = 0.0;
        assert_eq!(interferer_density(3.0, 2.0, &s), 0.0);
    }

    /// ∫₀ˡ v(1 − p_B(v)) dv in closed form for the clamped blockage law.
    fn los_moment(l: f64, lambda: f64, rb: f64) -> f64 {
        if l <= rb {
            return l * l / 2.0;
        }
        let k = lambda * rb;
        let e = (-k * (l - rb)).exp();
        // ∫_{rb}^{l} v e^{−k(v−rb)} dv
        let tail = (rb / k + 1.0 / (k * k)) - e * (l / k + 1.0 / (k * k));
        rb * rb / 2.0 + tail
    }

    #[test]
    fn centre_pdf_matches_interior_closed_form() {
        let s = reference();
        let lam = s.lambda_blockers();
        let pdf = nearest_bs_pdf(LinkKind::Los, 0.0, &s).unwrap();
        let b = 1.0 - (-2.0 * PI * s.lambda_b * los_moment(s.r_0, lam, s.r_blocker)).exp();
        assert_relative_eq!(pdf.normalizer, b, max_relative = 1e-9);
        for l in [0.1, 0.3, 1.0, 2.5, 7.0, 14.9] {
            let closed = 2.0
                * PI
                * l
                * s.lambda_b
                * (1.0 - blockage_prob(l, &s))
                * (-2.0 * PI * s.lambda_b * los_moment(l, lam, s.r_blocker)).exp()
                / b;
            assert_relative_eq!(pdf.evaluate(l), closed, max_relative = 1e-8);
        }
    }

    #[test]
    fn pdfs_integrate_to_one() {
        let s = reference();
        for kind in [LinkKind::Los, LinkKind::Nlos] {
            for r in [0.0, s.r_max / 2.0, s.r_max] {
                let pdf = nearest_bs_pdf(kind, r, &s).unwrap();
                let f = |l: f64| pdf.evaluate(l);
                let total = quad::integrate_split(&f, 0.0, s.r_0, &pdf.breakpoints(), 1e-9).unwrap();
                assert!((total - 1.0).abs() < 1e-6, "{kind:?} r={r}: {total}");
                assert_relative_eq!(pdf.cdf(s.r_0 * 0.999_999), 1.0, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn void_prob_examples() {
        let s = reference();
        assert_eq!(void_prob(LinkKind::Los, 0.0, 3.0, &s).unwrap(), 1.0);
        assert_eq!(void_prob(LinkKind::Nlos, s.r_blocker, 3.0, &s).unwrap(), 1.0);
        let a = void_prob(LinkKind::Nlos, 4.0, 10.0, &s).unwrap();
        let b = void_prob(LinkKind::Nlos, 8.0, 10.0, &s).unwrap();
        assert!(b < a && a < 1.0);
        assert!(void_prob(LinkKind::Los, 1.0, 30.0, &s).is_err());
    }

    #[test]
    fn cached_cumulative_matches_direct_integral() {
        let s = reference();
        let pdf = nearest_bs_pdf(LinkKind::Nlos, 22.0, &s).unwrap();
        for l in [0.2, 1.7, 3.0, 3.3, 9.9, 14.2] {
            let direct = cumulative_hazard(LinkKind::Nlos, l, 22.0, &s).unwrap();
            assert_relative_eq!(pdf.cumulative(l), direct, epsilon = 1e-10, max_relative = 1e-9);
            assert_relative_eq!(
                pdf.void(l),
                void_prob(LinkKind::Nlos, l, 22.0, &s).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn out_of_disk_user_rejected() {
        let s = reference();
        assert!(matches!(
            nearest_bs_pdf(LinkKind::Los, -1.0, &s),
            Err(Error::Precondition(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn arc_never_exceeds_full_circle(l in 0.01f64..60.0, r in 0.0f64..25.0) {
                let c = arc_length_in(l, r, 25.0);
                prop_assert!(c <= 2.0 * PI * l * (1.0 + 1e-12));
                prop_assert!(c >= 0.0);
                let interior = l <= 25.0 - r;
                prop_assert_eq!((c - 2.0 * PI * l).abs() < 1e-12 * l, interior);
            }

            #[test]
            fn hazard_times_void_is_unnormalized_pdf(r in 0.0f64..25.0, u in 0.0f64..1.0) {
                let s = Scenario::default();
                let l = u * s.r_0;
                for kind in [LinkKind::Los, LinkKind::Nlos] {
                    let pdf = nearest_bs_pdf(kind, r, &s).unwrap();
                    let lhs = void_prob(kind, l, r, &s).unwrap() * hazard(kind, l, r, &s);
                    let rhs = pdf.evaluate(l) * pdf.normalizer;
                    prop_assert!((lhs - rhs).abs() <= 1e-8, "{} vs {}", lhs, rhs);
                }
            }

            #[test]
            fn swap_maps_los_to_nlos(r in 0.0f64..25.0, u in 0.0f64..1.0) {
                let s = Scenario::default();
                let l = u * s.r_0;
                let los_swapped = DistancePdf::swapped(LinkKind::Los, r, &s).unwrap();
                let nlos = nearest_bs_pdf(LinkKind::Nlos, r, &s).unwrap();
                prop_assert_eq!(los_swapped.normalizer, nlos.normalizer);
                prop_assert_eq!(los_swapped.evaluate(l), nlos.evaluate(l));
                let nlos_swapped = DistancePdf::swapped(LinkKind::Nlos, r, &s).unwrap();
                let los = nearest_bs_pdf(LinkKind::Los, r, &s).unwrap();
                prop_assert_eq!(nlos_swapped.evaluate(l), los.evaluate(l));
            }

            #[test]
            fn random_positions_normalize(r in 0.0f64..25.0) {
                let s = Scenario::default();
                for kind in [LinkKind::Los, LinkKind::Nlos] {
                    let pdf = nearest_bs_pdf(kind, r, &s).unwrap();
                    let f = |l: f64| pdf.evaluate(l);
                    let total = quad::integrate_split(&f, 0.0, s.r_0, &pdf.breakpoints(), 1e-9).unwrap();
                    prop_assert!((total - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}
