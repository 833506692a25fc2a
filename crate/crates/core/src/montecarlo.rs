//! Brute-force oracle: Poisson networks in the disk, geometric blockage by
//! discs, and empirical nearest-BS, association and interference statistics
//! seen from a probe user at `(r, 0)`.
//!
//! Every sample draws from its own ChaCha8 stream `(seed, index)`, and all
//! reductions run in index order, so results do not depend on the thread
//! count.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::antenna::main_lobe_gain;
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::geometry::LinkKind;
use crate::interference::interferer_gains;
use crate::link::path_gain;
use crate::par::par_range;

/// Relative tolerance of the association threshold, as in the analytic sets.
const SET_RTOL: f64 = 1e-12;

/// One realization of the BS, user and external blocker processes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSample {
    pub seed: u64,
    pub index: u64,
    pub bs: Vec<[f64; 2]>,
    /// Boresight of every BS, rad.
    pub bs_azimuth: Vec<f64>,
    pub mu: Vec<[f64; 2]>,
    pub mu_orientation: Vec<f64>,
    pub blockers: Vec<[f64; 2]>,
    /// Boresight of the probe user, uniform on the circle.
    pub probe_orientation: f64,
    /// Uniform offset for stratified placements, in [0, 1).
    pub jitter: f64,
}

fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn disk_points(rng: &mut ChaCha8Rng, lambda: f64, r_max: f64) -> Vec<[f64; 2]> {
    let mean = lambda * PI * r_max * r_max;
    let n = if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    (0..n)
        .map(|_| {
            let rad = r_max * rng.random::<f64>().sqrt();
            let th = TAU * rng.random::<f64>();
            [rad * th.cos(), rad * th.sin()]
        })
        .collect()
}

/// Sample `index` of the family seeded by `seed`.
pub fn sample_indexed(s: &Scenario, seed: u64, index: u64) -> NetworkSample {
    let mut rng = stream_rng(seed, index);
    let bs = disk_points(&mut rng, s.lambda_b, s.r_max);
    let bs_azimuth = (0..bs.len()).map(|_| TAU * rng.random::<f64>()).collect();
    let mu = disk_points(&mut rng, s.lambda_u, s.r_max);
    let orient = Normal::new(s.phi_mean, s.phi_var.sqrt()).expect("finite variance");
    let mu_orientation = (0..mu.len()).map(|_| orient.sample(&mut rng).rem_euclid(TAU)).collect();
    let blockers = disk_points(&mut rng, s.lambda_e, s.r_max);
    let probe_orientation = TAU * rng.random::<f64>();
    let jitter = rng.random::<f64>();
    NetworkSample {
        seed,
        index,
        bs,
        bs_azimuth,
        mu,
        mu_orientation,
        blockers,
        probe_orientation,
        jitter,
    }
}

pub fn sample_network(s: &Scenario, seed: u64) -> NetworkSample {
    sample_indexed(s, seed, 0)
}

/// Whether a disc of diameter `r_b` centred at `c` blocks the segment
/// `a → b`: its centre lies within `r_b/2` of the segment and projects
/// strictly inside `(r_b/2, |b − a| − r_b/2)`.
pub fn disc_blocks(a: [f64; 2], b: [f64; 2], c: [f64; 2], r_b: f64) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    let half = 0.5 * r_b;
    if len <= r_b {
        return false;
    }
    let (ux, uy) = (dx / len, dy / len);
    let (px, py) = (c[0] - a[0], c[1] - a[1]);
    let t = px * ux + py * uy;
    t > half && t < len - half && (px * uy - py * ux).abs() < half
}

/// All blocking bodies of a sample (BSs, users, external blockers) in
/// structure-of-arrays form.
#[derive(Debug, Clone, Default)]
pub struct Obstacles {
    xs: Vec<f64>,
    ys: Vec<f64>,
    r_b: f64,
}

impl Obstacles {
    pub fn new(points: impl IntoIterator<Item = [f64; 2]>, r_b: f64) -> Self {
        let (xs, ys) = points.into_iter().map(|p| (p[0], p[1])).unzip();
        Obstacles { xs, ys, r_b }
    }

    pub fn of(sample: &NetworkSample, s: &Scenario) -> Self {
        let pts = sample.bs.iter().chain(&sample.mu).chain(&sample.blockers).copied();
        Self::new(pts, s.r_blocker)
    }

    pub fn blocked(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        let half = 0.5 * self.r_b;
        if len <= self.r_b {
            return false;
        }
        let (ux, uy) = (dx / len, dy / len);
        self.xs.iter().zip(&self.ys).any(|(&x, &y)| {
            let (px, py) = (x - a[0], y - a[1]);
            let t = px * ux + py * uy;
            t > half && t < len - half && (px * uy - py * ux).abs() < half
        })
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// How probe links are shadowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shadowing {
    /// Each probe link meets its own freshly drawn obstacle field, so
    /// blockage is independent across links.
    #[default]
    Independent,
    /// All links share the sample's BSs, users and blockers as obstacles.
    Shared,
}

const FIELD_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Nearest BSs of each kind and the association outcome for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProbeOutcome {
    /// Nearest LOS BS distance within r_0.
    pub los: Option<f64>,
    /// Nearest NLOS BS distance within r_0.
    pub nlos: Option<f64>,
    /// The probe is served by its nearest LOS BS.
    pub serves_los: bool,
    /// The probe is served by its nearest NLOS BS.
    pub serves_nlos: bool,
}

struct Candidate {
    l: f64,
    gain: f64,
}

/// Outcome for a probe user at `(probe_r, 0)`.
///
/// The serving candidates are the nearest LOS and nearest NLOS BS within
/// r_0. A candidate of kind k serves when A_k·D ≥ η and the other candidate
/// is absent, farther away, or fails with A·D ≤ η. Gains follow the sampled
/// BS azimuths and the probe boresight.
pub fn probe_outcome(sample: &NetworkSample, probe_r: f64, shadowing: Shadowing, s: &Scenario) -> Result<ProbeOutcome> {
    let g_bs = main_lobe_gain(s.beam_bs)?;
    let g_mu = main_lobe_gain(s.beam_mu)?;
    let probe = [probe_r, 0.0];
    let shared = Obstacles::of(sample, s);
    let mut field_rng = stream_rng(sample.seed ^ FIELD_SALT, sample.index);
    let field_density = s.lambda_b + s.lambda_u + s.lambda_e;
    let mut blocked = |b: [f64; 2]| match shadowing {
        Shadowing::Shared => shared.blocked(probe, b),
        Shadowing::Independent => {
            Obstacles::new(disk_points(&mut field_rng, field_density, s.r_max), s.r_blocker).blocked(probe, b)
        }
    };
    let mut order: Vec<(f64, usize)> = sample
        .bs
        .iter()
        .enumerate()
        .map(|(k, b)| ((b[0] - probe[0]).hypot(b[1] - probe[1]), k))
        .filter(|&(d, _)| d <= s.r_0)
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut los: Option<Candidate> = None;
    let mut nlos: Option<Candidate> = None;
    for (l, k) in order {
        if los.is_some() && nlos.is_some() {
            break;
        }
        let b = sample.bs[k];
        let slot = if blocked(b) { &mut nlos } else { &mut los };
        if slot.is_some() {
            continue;
        }
        let to_bs = (b[1] - probe[1]).atan2(b[0] - probe[0]);
        let to_probe = to_bs + PI;
        let bs_side = if angle_gap(to_probe, sample.bs_azimuth[k]) <= 0.5 * s.beam_bs {
            g_bs
        } else {
            s.sidelobe_bs
        };
        let mu_side = if angle_gap(to_bs, sample.probe_orientation) <= 0.5 * s.beam_mu {
            g_mu
        } else {
            s.sidelobe_mu
        };
        *slot = Some(Candidate {
            l,
            gain: bs_side * mu_side,
        });
    }
    let qualifies = |kind: LinkKind, c: &Candidate| path_coeff(kind, s) * c.gain >= s.eta * (1.0 - SET_RTOL);
    let fails = |kind: LinkKind, c: &Candidate| path_coeff(kind, s) * c.gain <= s.eta * (1.0 + SET_RTOL);
    let serves = |kind: LinkKind, own: &Option<Candidate>, other: &Option<Candidate>| match own {
        Some(c) if qualifies(kind, c) => match other {
            None => true,
            Some(o) => o.l >= c.l || fails(kind.other(), o),
        },
        _ => false,
    };
    Ok(ProbeOutcome {
        los: los.as_ref().map(|c| c.l),
        nlos: nlos.as_ref().map(|c| c.l),
        serves_los: serves(LinkKind::Los, &los, &nlos),
        serves_nlos: serves(LinkKind::Nlos, &nlos, &los),
    })
}

fn path_coeff(kind: LinkKind, s: &Scenario) -> f64 {
    match kind {
        LinkKind::Los => s.a_los,
        LinkKind::Nlos => s.a_nlos,
    }
}

/// Count of successes out of `n` trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Frequency {
    pub hits: usize,
    pub n: usize,
}

impl Frequency {
    pub fn p(&self) -> f64 {
        self.hits as f64 / self.n as f64
    }

    /// Binomial standard error.
    pub fn se(&self) -> f64 {
        let p = self.p();
        (p * (1.0 - p) / self.n as f64).sqrt()
    }
}

/// Empirical statistics of the probe outcomes over `n` samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkStats {
    pub probe_r: f64,
    pub n: usize,
    /// Nearest LOS distances of the samples that have one within r_0.
    pub los_distances: Vec<f64>,
    pub nlos_distances: Vec<f64>,
    pub serves_los: Frequency,
    pub serves_nlos: Frequency,
    /// Samples served by neither candidate.
    pub outage: Frequency,
}

impl LinkStats {
    /// Share of samples with a BS of `kind` within r_0.
    pub fn presence(&self, kind: LinkKind) -> Frequency {
        let hits = match kind {
            LinkKind::Los => self.los_distances.len(),
            LinkKind::Nlos => self.nlos_distances.len(),
        };
        Frequency { hits, n: self.n }
    }
}

/// Probe statistics from samples `0..n` of the family `seed`.
pub fn empirical_link_stats(
    s: &Scenario,
    probe_r: f64,
    shadowing: Shadowing,
    seed: u64,
    n: usize,
) -> Result<LinkStats> {
    if !(0.0..=s.r_max).contains(&probe_r) {
        return Err(Error::precondition(format!(
            "probe distance {probe_r} outside [0, r_max = {}]",
            s.r_max
        )));
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let outcomes = par_range(n, |i| {
        probe_outcome(&sample_indexed(s, seed, i as u64), probe_r, shadowing, s)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(link_stats(probe_r, &outcomes))
}

/// Reduces per-sample outcomes in order.
pub fn link_stats(probe_r: f64, outcomes: &[ProbeOutcome]) -> LinkStats {
    let n = outcomes.len();
    let mut st = LinkStats {
        probe_r,
        n,
        serves_los: Frequency { hits: 0, n },
        serves_nlos: Frequency { hits: 0, n },
        outage: Frequency { hits: 0, n },
        ..Default::default()
    };
    for o in outcomes {
        st.los_distances.extend(o.los);
        st.nlos_distances.extend(o.nlos);
        st.serves_los.hits += o.serves_los as usize;
        st.serves_nlos.hits += o.serves_nlos as usize;
        st.outage.hits += (!o.serves_los && !o.serves_nlos) as usize;
    }
    st
}

/// Share of samples in which a link of length `l` from the disk centre, in
/// a uniformly drawn direction, is blocked.
pub fn blockage_frequency(s: &Scenario, l: f64, seed: u64, n: usize) -> Result<Frequency> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let hits = par_range(n, |i| {
        let sample = sample_indexed(s, seed, i as u64);
        let th = TAU * sample.jitter;
        Obstacles::of(&sample, s).blocked([0.0, 0.0], [l * th.cos(), l * th.sin()])
    })
    .into_iter()
    .filter(|&b| b)
    .count();
    Ok(Frequency { hits, n })
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(MeanEstimate {
            mean,
            se: (var / n).sqrt(),
            n: v.len(),
        })
    }
}

/// Interference per watt at a BS `l` from a probe at `(r, 0)`, averaged
/// over `placements` stratified bearings of the BS around the probe. Every
/// user of the sample transmits with the mean interfering gain `mean_gain`;
/// users closer than r_B to the BS are excluded.
pub fn unit_interference(
    sample: &NetworkSample,
    r: f64,
    l: f64,
    mean_gain: f64,
    placements: usize,
    s: &Scenario,
) -> f64 {
    let obstacles = Obstacles::of(sample, s);
    let mut total = 0.0;
    for m in 0..placements {
        let th = TAU * (m as f64 + sample.jitter) / placements as f64;
        let b = [r + l * th.cos(), l * th.sin()];
        for u in &sample.mu {
            let q = (u[0] - b[0]).hypot(u[1] - b[1]);
            if q < s.r_blocker {
                continue;
            }
            let kind = if obstacles.blocked(*u, b) {
                LinkKind::Nlos
            } else {
                LinkKind::Los
            };
            total += mean_gain * path_gain(kind, q, s);
        }
    }
    total / placements as f64
}

/// Unit-power interference of samples `0..n`, in index order.
pub fn interference_samples(s: &Scenario, r: f64, l: f64, seed: u64, n: usize, placements: usize) -> Result<Vec<f64>> {
    if n == 0 || placements == 0 {
        return Err(Error::EmptySample);
    }
    let mean_gain = interferer_gains(None, s)?.mean();
    Ok(par_range(n, |i| {
        unit_interference(&sample_indexed(s, seed, i as u64), r, l, mean_gain, placements, s)
    }))
}

/// Mean unit-power interference over samples `0..n`.
pub fn empirical_interference(
    s: &Scenario,
    r: f64,
    l: f64,
    seed: u64,
    n: usize,
    placements: usize,
) -> Result<MeanEstimate> {
    MeanEstimate::from_values(&interference_samples(s, r, l, seed, n, placements)?)
}

/// Least-squares slope of ln|mean_n − target| against ln n over the
/// prefixes n = N/8, N/4, N/2, N. Close to −1/2 for an unbiased estimator.
pub fn convergence_slope(values: &[f64], target: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = [8, 4, 2, 1]
        .iter()
        .map(|&d| values.len() / d)
        .filter(|&n| n > 0)
        .map(|n| {
            let mean = values[..n].iter().sum::<f64>() / n as f64;
            ((n as f64).ln(), (mean - target).abs().max(f64::MIN_POSITIVE).ln())
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    Ok(x.iter().enumerate().fold(0.0f64, |d, (i, &v)| {
        let f = cdf(v);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}
