//! Per-link SINR, packet success and energy efficiency, and the expected
//! utility of one transmission averaged over user position, association
//! and antenna gain.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::antenna::{alignment_probs, AngularDensity, GainDistribution, UniformAngle};
use crate::association::{bracket, gain_threshold_sets, set_prob, SpatialLaw};
use crate::config::{PsiMode, QModel, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{blockage_prob, LinkKind};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub kind: LinkKind,
    /// Serving distance, m.
    pub l: f64,
    /// Antenna gain product D.
    pub gain: f64,
    /// Aggregate interference, W.
    pub interference: f64,
    /// N₀·B, W.
    pub noise: f64,
}

/// A_k·l^{−α_k}.
pub fn path_gain(kind: LinkKind, l: f64, s: &Scenario) -> f64 {
    match kind {
        LinkKind::Los => s.a_los * l.powf(-s.alpha_los),
        LinkKind::Nlos => s.a_nlos * l.powf(-s.alpha_nlos),
    }
}

/// SINR per watt of transmit power.
pub fn sinr_slope(lb: &LinkBudget, s: &Scenario) -> Result<f64> {
    if !(lb.l > 0.0) {
        return Err(Error::Domain(format!("serving distance {} must be > 0", lb.l)));
    }
    Ok(path_gain(lb.kind, lb.l, s) * lb.gain / (lb.noise + lb.interference))
}

pub fn sinr(p: f64, lb: &LinkBudget, s: &Scenario) -> Result<f64> {
    Ok(sinr_slope(lb, s)? * p)
}

pub fn packet_success(gamma: f64, s: &Scenario) -> f64 {
    let base = -(-s.q_kappa * gamma).exp_m1();
    match s.q_model {
        QModel::Exponential => base,
        QModel::Sigmoid => base.powi(s.q_order as i32),
    }
}

/// R·q(slope·p)/p, with its limit at p = 0.
pub fn efficiency_at(p: f64, slope: f64, s: &Scenario) -> f64 {
    if p > 0.0 {
        return s.rate * packet_success(slope * p, s) / p;
    }
    match s.q_model {
        QModel::Exponential => s.rate * s.q_kappa * slope,
        QModel::Sigmoid => 0.0,
    }
}

pub fn energy_efficiency(p: f64, lb: &LinkBudget, s: &Scenario) -> Result<f64> {
    Ok(efficiency_at(p, sinr_slope(lb, s)?, s))
}

/// Golden-section search for the maximizer of `f` over `[lo, hi]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Brent's method (parabolic steps with golden-section fallback) for the
/// maximizer of `f` over `[lo, hi]`; stops at relative width `tol`.
pub fn brent_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let g = |x: f64| -f(x);
    let (mut a, mut b) = (lo, hi);
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = g(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = g(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    (x, -fx)
}

/// Power in `[0, p_max]` maximizing ξ for one link, with the maximum.
pub fn efficiency_peak(lb: &LinkBudget, s: &Scenario) -> Result<(f64, f64)> {
    let slope = sinr_slope(lb, s)?;
    if s.q_model == QModel::Exponential {
        // ξ decreases in p, the supremum is the p → 0 limit.
        return Ok((0.0, efficiency_at(0.0, slope, s)));
    }
    let lo = (s.p_max * 10f64.powf(-2.0 * s.grid.power_decades)).ln();
    let hi = s.p_max.ln();
    let (x, v) = golden_max(|x| efficiency_at(x.exp(), slope, s), lo, hi, 200);
    let at_max = efficiency_at(s.p_max, slope, s);
    if at_max >= v {
        Ok((s.p_max, at_max))
    } else {
        Ok((x.exp(), v))
    }
}

/// Geometric weights of one (r, l) quadrature node for one link kind.
#[derive(Debug, Clone, Copy, Default)]
struct KindNode {
    /// Visibility factor times the nearest-BS density, (1 − p_B)·f_L or p_B·f_N.
    geo: f64,
    /// Void probability of the competing kind at l.
    void_other: f64,
    /// A_k·l^{−α_k}
    path: f64,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    r: f64,
    l: f64,
    /// Quadrature weight times 2πrλ_u.
    weight: f64,
    kinds: [KindNode; 2],
}

/// The utility integral discretized on Gauss–Legendre panels in (r, l).
///
/// Only the gain law, the transmit power and the interference level vary
/// between evaluations; the geometry at every node is computed once.
#[derive(Debug, Clone)]
pub struct UtilityTable {
    nodes: Vec<Node>,
    /// Interference per unit mean power at each node.
    kernel: Vec<f64>,
    s: Arc<Scenario>,
}

fn panel_edges(a: f64, b: f64, cuts: &[f64]) -> Vec<f64> {
    let mut e = vec![a];
    let mut inner: Vec<f64> = cuts.iter().copied().filter(|&c| c > a + 1e-9 && c < b - 1e-9).collect();
    inner.sort_by(f64::total_cmp);
    e.extend(inner);
    e.push(b);
    e
}

/// Gauss–Legendre nodes over `[a, b]` with panels at `cuts`, `n` nodes in
/// total shared in proportion to panel length (at least 2 per panel).
fn nodes_on(a: f64, b: f64, cuts: &[f64], n: usize) -> Vec<(f64, f64)> {
    let edges = panel_edges(a, b, cuts);
    let total = b - a;
    let mut out = Vec::with_capacity(n + 4);
    for w in edges.windows(2) {
        let k = ((n as f64 * (w[1] - w[0]) / total).round() as usize).max(2);
        out.extend(quad::legendre_panels(k, w));
    }
    out
}

impl UtilityTable {
    pub fn new(s: &Scenario) -> Result<Self> {
        let g = &s.grid;
        let r_nodes = nodes_on(0.0, s.r_max, &[s.r_max - s.r_0], g.n_r);
        let mut nodes = Vec::with_capacity(r_nodes.len() * g.n_l);
        for &(r, wr) in &r_nodes {
            let spatial = SpatialLaw::new(r, s)?;
            let mut cuts = vec![s.r_max - r];
            cuts.extend(spatial.los.breakpoints());
            for (l, wl) in nodes_on(s.r_blocker, s.r_0, &cuts, g.n_l) {
                let pb = blockage_prob(l, s);
                let mut kinds = [KindNode::default(); 2];
                for (slot, kind) in [LinkKind::Los, LinkKind::Nlos].into_iter().enumerate() {
                    let vis = if kind == LinkKind::Los { 1.0 - pb } else { pb };
                    kinds[slot] = KindNode {
                        geo: vis * spatial.pdf(kind).evaluate(l),
                        void_other: spatial.pdf(kind.other()).void(l),
                        path: path_gain(kind, l, s),
                    };
                }
                nodes.push(Node {
                    r,
                    l,
                    weight: TAU * r * s.lambda_u * wr * wl,
                    kinds,
                });
            }
        }
        let kernel = vec![0.0; nodes.len()];
        Ok(UtilityTable {
            nodes,
            kernel,
            s: Arc::new(s.clone()),
        })
    }

    /// (r, l) coordinates of every node, in table order.
    pub fn coords(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().map(|n| (n.r, n.l)).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Installs the interference per unit mean power at every node.
    pub fn set_kernel(&mut self, kernel: Vec<f64>) -> Result<()> {
        if kernel.len() != self.nodes.len() {
            return Err(Error::precondition(format!(
                "kernel has {} values for {} nodes",
                kernel.len(),
                self.nodes.len()
            )));
        }
        self.kernel = kernel;
        Ok(())
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Mean of `f(kind, l)` under the association law for gain law `gains`.
    pub fn association_average<F: Fn(LinkKind, f64) -> f64>(&self, gains: &GainDistribution, f: F) -> Result<f64> {
        let s = &*self.s;
        let sets = gain_threshold_sets(gains, s);
        let mut num = 0.0;
        let mut den = 0.0;
        for (slot, kind) in [LinkKind::Los, LinkKind::Nlos].into_iter().enumerate() {
            let qual = set_prob(gains, &sets.qualifying(kind));
            if qual == 0.0 {
                continue;
            }
            let fail = set_prob(gains, &sets.competitor_fails(kind));
            for node in &self.nodes {
                let k = &node.kinds[slot];
                let w = node.weight * k.geo * bracket(s.assoc_mode, k.void_other, fail) * qual;
                if w > 0.0 {
                    num += w * f(kind, node.l);
                    den += w;
                }
            }
        }
        if den == 0.0 {
            return Err(Error::precondition("association law has no mass on the table"));
        }
        Ok(num / den)
    }

    /// Binds the gain law and the interference level (mean power `p_bar`).
    pub fn prepare(&self, gains: &GainDistribution, p_bar: f64) -> PreparedUtility<'_> {
        let s = &*self.s;
        let sets = gain_threshold_sets(gains, s);
        let noise = s.noise_power();
        let mut terms = Vec::with_capacity(2 * self.nodes.len());
        let mut gain_mix = [[(0.0, 0.0); 4]; 2];
        let mut n_gain = [0usize; 2];
        for (slot, kind) in [LinkKind::Los, LinkKind::Nlos].into_iter().enumerate() {
            for (i, &q) in sets.qualifying(kind).iter().enumerate() {
                if q && gains.probs[i] > 0.0 {
                    gain_mix[slot][n_gain[slot]] = (gains.support[i], gains.probs[i]);
                    n_gain[slot] += 1;
                }
            }
        }
        let fail = [
            set_prob(gains, &sets.competitor_fails(LinkKind::Los)),
            set_prob(gains, &sets.competitor_fails(LinkKind::Nlos)),
        ];
        for (node, &z) in self.nodes.iter().zip(&self.kernel) {
            let denom = noise + p_bar * z;
            for slot in 0..2 {
                let k = &node.kinds[slot];
                if k.geo == 0.0 || n_gain[slot] == 0 {
                    continue;
                }
                let w = node.weight * k.geo * bracket(s.assoc_mode, k.void_other, fail[slot]);
                if w == 0.0 {
                    continue;
                }
                terms.push(Term {
                    weight: w,
                    slope: k.path / denom,
                    slot: slot as u8,
                });
            }
        }
        PreparedUtility {
            terms,
            gain_mix,
            n_gain,
            s,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Term {
    weight: f64,
    /// SINR per watt per unit gain.
    slope: f64,
    slot: u8,
}

/// Utility as a function of transmit power for one gain law and one
/// interference level.
#[derive(Debug, Clone)]
pub struct PreparedUtility<'a> {
    terms: Vec<Term>,
    gain_mix: [[(f64, f64); 4]; 2],
    n_gain: [usize; 2],
    s: &'a Scenario,
}

impl PreparedUtility<'_> {
    pub fn utility(&self, p: f64) -> f64 {
        let s = self.s;
        let mut total = 0.0;
        for t in &self.terms {
            let slot = t.slot as usize;
            let mut acc = 0.0;
            for &(g, pi) in &self.gain_mix[slot][..self.n_gain[slot]] {
                acc += pi * efficiency_at(p, t.slope * g, s);
            }
            total += t.weight * acc;
        }
        total
    }
}

/// Own-link gain law for a population with orientation marginal
/// `phi_marginal`: the serving bearing is uniform unless fixed by the
/// scenario.
pub fn own_gain_law(phi_marginal: &dyn AngularDensity, s: &Scenario) -> Result<GainDistribution> {
    let (f, h) = match s.psi_mode {
        PsiMode::Fixed(psi) => alignment_probs(phi_marginal, psi, s)?,
        // Averaging the beam mass over a uniform bearing gives w/2π for
        // every normalized marginal.
        PsiMode::Population | PsiMode::Uniform => {
            let (_, h) = alignment_probs(phi_marginal, 0.0, s)?;
            let (f, _) = alignment_probs(&UniformAngle, 0.0, s)?;
            (f, h)
        }
    };
    GainDistribution::from_alignment(f, h, s)
}

/// Expected utility of one transmission at power `p` under the interference
/// field `interference_fn(r, l)` (W).
pub fn expected_utility<I: Fn(f64, f64) -> f64>(
    p: f64,
    interference_fn: I,
    phi_marginal: &dyn AngularDensity,
    s: &Scenario,
) -> Result<f64> {
    if !(0.0..=s.p_max).contains(&p) {
        return Err(Error::precondition(format!("power {p} outside [0, P_max]")));
    }
    let mut table = UtilityTable::new(s)?;
    let kernel = table.coords().iter().map(|&(r, l)| interference_fn(r, l)).collect();
    table.set_kernel(kernel)?;
    let gd = own_gain_law(phi_marginal, s)?;
    let v = table.prepare(&gd, 1.0).utility(p);
    if !v.is_finite() {
        return Err(Error::NonFinite {
            value: v,
            location: format!("expected utility at p = {p}"),
        });
    }
    Ok(v)
}

/// Area of the network disk, m².
pub fn disk_area(s: &Scenario) -> f64 {
    PI * s.r_max * s.r_max
}
