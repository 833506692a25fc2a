//! The mean-field game on the state (φ, E): explicit finite-volume transport
//! of the population density, the backward value recursion with pointwise
//! power maximization, the damped fixed-point iteration between the two, and
//! the path-loss compensating baseline.
//!
//! Cells are centred at `φ_i = 2πi/n_φ` and `E_j = j·ΔE`, `ΔE = E_max/(n_E − 1)`.
//! Every output interval of length `T/n_time` is split into `substeps` equal
//! steps that satisfy the monotonicity bound
//! `Δt·(|μ_φ|/Δφ + 2D/Δφ² + P_max/ΔE) ≤ 0.9`.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::antenna::{
    alignment_probs, AngularDensity, GainDistribution, PhiGrid, PointMass, UniformAngle, WrappedGaussian,
};
use crate::config::{PhiBoundary, PsiMode, Scenario};
use crate::error::{Error, Result};
use crate::geometry::LinkKind;
use crate::interference::{interferer_gains, InterferenceKernel};
use crate::link::{brent_max, own_gain_law, path_gain, UtilityTable};
use crate::par::par_range;

/// Target fraction of the monotonicity bound used when choosing substeps.
const CFL_SAFETY: f64 = 0.9;
/// Largest mass drift a periodic step may show before renormalization.
pub const MASS_TOLERANCE: f64 = 1e-6;
const REFINE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateGrid {
    pub n_phi: usize,
    pub n_energy: usize,
    /// Output intervals.
    pub n_time: usize,
    /// Solver steps per output interval.
    pub substeps: usize,
    pub d_phi: f64,
    pub d_energy: f64,
    /// Solver step, s.
    pub dt: f64,
    pub horizon: f64,
}

/// Δt·rate ≤ 1 keeps the explicit step monotone.
fn stability_rate(s: &Scenario, d_phi: f64, d_energy: f64, p_max: f64) -> f64 {
    s.mu_phi.abs() / d_phi + 2.0 * s.phi_diffusion() / (d_phi * d_phi) + p_max / d_energy
}

impl StateGrid {
    /// Grid from the scenario with the fewest substeps meeting the bound.
    pub fn new(s: &Scenario) -> Result<Self> {
        let (d_phi, d_energy) = Self::spacing(s);
        let rate = stability_rate(s, d_phi, d_energy, s.p_max);
        let dt_out = s.horizon / s.grid.n_time as f64;
        let substeps = ((dt_out * rate / CFL_SAFETY).ceil() as usize).max(1);
        Self::with_substeps(s, substeps)
    }

    /// Grid with a prescribed number of substeps per output interval.
    pub fn with_substeps(s: &Scenario, substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::precondition("substeps must be ≥ 1"));
        }
        let (d_phi, d_energy) = Self::spacing(s);
        let dt = s.horizon / (s.grid.n_time * substeps) as f64;
        let rate = stability_rate(s, d_phi, d_energy, s.p_max);
        if dt * rate > CFL_SAFETY * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                dt,
                bound: CFL_SAFETY / rate,
            });
        }
        Ok(StateGrid {
            n_phi: s.grid.n_phi,
            n_energy: s.grid.n_energy,
            n_time: s.grid.n_time,
            substeps,
            d_phi,
            d_energy,
            dt,
            horizon: s.horizon,
        })
    }

    fn spacing(s: &Scenario) -> (f64, f64) {
        (TAU / s.grid.n_phi as f64, s.e_max / (s.grid.n_energy - 1) as f64)
    }

    pub fn phi(&self, i: usize) -> f64 {
        i as f64 * self.d_phi
    }

    pub fn energy(&self, j: usize) -> f64 {
        j as f64 * self.d_energy
    }

    /// Time of output node `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.n_time as f64
    }

    /// Number of solver steps over the horizon.
    pub fn n_steps(&self) -> usize {
        self.n_time * self.substeps
    }

    pub fn cells(&self) -> usize {
        self.n_phi * self.n_energy
    }

    pub fn cell_volume(&self) -> f64 {
        self.d_phi * self.d_energy
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_energy + j
    }

    pub fn mass(&self, m: &[f64]) -> f64 {
        m.iter().sum::<f64>() * self.cell_volume()
    }

    /// Orientation marginal of a density slice, 1/rad.
    pub fn phi_marginal(&self, m: &[f64]) -> Vec<f64> {
        m.chunks(self.n_energy)
            .map(|row| row.iter().sum::<f64>() * self.d_energy)
            .collect()
    }

    /// Population mean power Σ m·P·ΔφΔE.
    pub fn mean_power(&self, m: &[f64], policy: &[f64]) -> f64 {
        m.iter().zip(policy).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume()
    }
}

/// Density over (φ, E) at every solver step, 1/(rad·J).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub grid: StateGrid,
    /// `n_steps + 1` slices, each `n_phi·n_energy` long.
    pub values: Vec<Vec<f64>>,
    /// Largest |mass − 1| seen before renormalization.
    pub max_correction: f64,
}

impl MeanField {
    /// Slice at output node `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.grid.substeps]
    }
}

/// Value and policy at every solver step.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub grid: StateGrid,
    /// `n_steps + 1` slices; the last is the terminal cost.
    pub values: Vec<Vec<f64>>,
    /// `n_steps` slices, W.
    pub policy: Vec<Vec<f64>>,
}

impl ValueFunction {
    /// Policy at output node `k`.
    pub fn policy_at(&self, k: usize) -> &[f64] {
        &self.policy[k * self.grid.substeps]
    }
}

/// Wrapped Gaussian in φ with all energy at E_max.
pub fn initial_density(s: &Scenario, grid: &StateGrid) -> Vec<f64> {
    let wg = WrappedGaussian {
        mean: s.phi_mean,
        var: s.phi_var,
    };
    let mut m = vec![0.0; grid.cells()];
    let h = 0.5 * grid.d_phi;
    for i in 0..grid.n_phi {
        let c = grid.phi(i);
        m[grid.idx(i, grid.n_energy - 1)] = wg.mass(c - h, c + h) / grid.cell_volume();
    }
    m
}

struct Coefficients {
    /// Fraction moving one cell downstream in φ.
    down: f64,
    /// Fraction moving one cell upstream in φ.
    up: f64,
    /// Step of the downstream neighbour, +1 or −1.
    dir: isize,
    /// Δt/ΔE.
    e_ratio: f64,
}

fn coefficients(s: &Scenario, grid: &StateGrid) -> Coefficients {
    let a = s.mu_phi.abs() * grid.dt / grid.d_phi;
    let b = s.phi_diffusion() * grid.dt / (grid.d_phi * grid.d_phi);
    Coefficients {
        down: a + b,
        up: b,
        dir: if s.mu_phi >= 0.0 { 1 } else { -1 },
        e_ratio: grid.dt / grid.d_energy,
    }
}

/// Neighbour of orientation cell `i` at offset `step`, `None` past an
/// absorbing edge.
fn neighbour(i: usize, step: isize, n: usize, boundary: PhiBoundary) -> Option<usize> {
    let k = i as isize + step;
    match boundary {
        PhiBoundary::Periodic => Some(k.rem_euclid(n as isize) as usize),
        PhiBoundary::Absorbing => (0..n as isize).contains(&k).then_some(k as usize),
    }
}

fn check_step(policy: &[f64], s: &Scenario, grid: &StateGrid) -> Result<()> {
    if policy.len() != grid.cells() {
        return Err(Error::precondition(format!(
            "policy has {} cells, grid has {}",
            policy.len(),
            grid.cells()
        )));
    }
    let mut p_top = 0.0f64;
    for &p in policy {
        if !(0.0..=s.p_max * (1.0 + 1e-12)).contains(&p) {
            return Err(Error::precondition(format!("power {p} outside [0, P_max]")));
        }
        p_top = p_top.max(p);
    }
    let rate = stability_rate(s, grid.d_phi, grid.d_energy, p_top);
    if grid.dt * rate > 1.0 + 1e-12 {
        return Err(Error::Cfl {
            dt: grid.dt,
            bound: 1.0 / rate,
        });
    }
    Ok(())
}

/// One explicit step of the linear transport operator, without
/// renormalization. Power is taken as 0 in the E = 0 cells.
pub fn fpk_apply(m: &[f64], policy: &[f64], s: &Scenario, grid: &StateGrid) -> Result<Vec<f64>> {
    check_step(policy, s, grid)?;
    if m.len() != grid.cells() {
        return Err(Error::precondition("density and grid differ in size"));
    }
    let c = coefficients(s, grid);
    let ne = grid.n_energy;
    let mut out = vec![0.0; m.len()];
    for i in 0..grid.n_phi {
        let down = neighbour(i, c.dir, grid.n_phi, s.phi_boundary);
        let up = neighbour(i, -c.dir, grid.n_phi, s.phi_boundary);
        for j in 0..ne {
            let x = i * ne + j;
            let mx = m[x];
            if mx == 0.0 {
                continue;
            }
            let drain = if j == 0 { 0.0 } else { policy[x] * c.e_ratio };
            out[x] += mx * (1.0 - c.down - c.up - drain);
            if let Some(d) = down {
                out[d * ne + j] += mx * c.down;
            }
            if let Some(u) = up {
                out[u * ne + j] += mx * c.up;
            }
            if j > 0 {
                out[x - 1] += mx * drain;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FpkStep {
    pub density: Vec<f64>,
    /// Mass after the step minus one, before renormalization.
    pub correction: f64,
}

/// One transport step of a normalized density, renormalized afterwards.
pub fn fpk_step(m: &[f64], policy: &[f64], s: &Scenario, grid: &StateGrid) -> Result<FpkStep> {
    let before = grid.mass(m);
    if (before - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::NotNormalized { mass: before });
    }
    let mut density = fpk_apply(m, policy, s, grid)?;
    let after = grid.mass(&density);
    if !after.is_finite() || after <= 0.0 {
        return Err(Error::NonFinite {
            value: after,
            location: "mass after a transport step".into(),
        });
    }
    density.iter_mut().for_each(|v| *v /= after);
    Ok(FpkStep {
        density,
        correction: after - 1.0,
    })
}

/// Forward transport of `m0` under a policy given at every solver step.
pub fn transport(m0: &[f64], policy: &[Vec<f64>], s: &Scenario, grid: &StateGrid) -> Result<MeanField> {
    if policy.len() != grid.n_steps() {
        return Err(Error::precondition(format!(
            "policy has {} steps, grid has {}",
            policy.len(),
            grid.n_steps()
        )));
    }
    let mut values = Vec::with_capacity(grid.n_steps() + 1);
    values.push(m0.to_vec());
    let mut max_correction = 0.0f64;
    for p in policy {
        let step = fpk_step(values.last().unwrap(), p, s, grid)?;
        max_correction = max_correction.max(step.correction.abs());
        values.push(step.density);
    }
    Ok(MeanField {
        grid: grid.clone(),
        values,
        max_correction,
    })
}

/// Stage reward v(P) on the state grid.
pub trait StageReward: Sync {
    /// Reward at output interval `k` and orientation node `i` as a function
    /// of the energy node and the transmit power.
    fn slice(&self, k: usize, i: usize) -> Result<Box<dyn Fn(usize, f64) -> f64 + '_>>;

    /// Whether the slice varies with the energy node.
    fn energy_dependent(&self) -> bool {
        false
    }
}

/// 0 followed by `n − 1` log-spaced levels from P_max·10^{−decades} to P_max.
pub fn power_levels(s: &Scenario) -> Vec<f64> {
    let n = s.grid.n_power;
    let mut levels = vec![0.0];
    let lo = s.p_max * 10f64.powf(-s.grid.power_decades);
    for m in 0..n - 1 {
        let frac = if n > 2 { m as f64 / (n - 2) as f64 } else { 1.0 };
        levels.push(lo * (s.p_max / lo).powf(frac));
    }
    *levels.last_mut().unwrap() = s.p_max;
    levels
}

/// Candidate powers (sorted) and their rewards for one energy node.
struct Candidates {
    powers: Vec<f64>,
    rewards: Vec<f64>,
}

fn candidates(v: &dyn Fn(f64) -> f64, levels: &[f64], refine: bool) -> Candidates {
    let mut powers = levels.to_vec();
    let mut rewards: Vec<f64> = levels.iter().map(|&p| v(p)).collect();
    if refine && levels.len() > 2 {
        let best = (0..levels.len()).fold(0, |b, m| if rewards[m] > rewards[b] { m } else { b });
        if best > 0 {
            let lo = levels[(best - 1).max(1)].ln();
            let hi = levels[(best + 1).min(levels.len() - 1)].ln();
            if hi > lo {
                let (x, fx) = brent_max(|x| v(x.exp()), lo, hi, REFINE_TOL, 200);
                let p = x.exp().min(*levels.last().unwrap());
                let at = powers.partition_point(|&q| q < p);
                if powers.get(at) != Some(&p) {
                    powers.insert(at, p);
                    rewards.insert(at, fx);
                }
            }
        }
    }
    Candidates { powers, rewards }
}

/// Backward recursion from V(T) = 0 with the power maximizing
/// `Δt·v(P) + P·Δt/ΔE·(V(E − ΔE) − V(E))` at every node. Ties go to the
/// smaller power; the E = 0 cells do not transmit.
pub fn hjb_solve(reward: &dyn StageReward, s: &Scenario, grid: &StateGrid) -> Result<ValueFunction> {
    let levels = power_levels(s);
    let ne = grid.n_energy;
    let n_steps = grid.n_steps();
    let c = coefficients(s, grid);
    let mut values = vec![vec![0.0; grid.cells()]; n_steps + 1];
    let mut policy = vec![vec![0.0; grid.cells()]; n_steps];
    for k in (0..grid.n_time).rev() {
        // Candidate rewards per orientation node: one list shared by all
        // energy nodes unless the reward depends on energy.
        let per_phi = par_range(grid.n_phi, |i| -> Result<(Vec<Candidates>, f64)> {
            let v = reward.slice(k, i)?;
            let rows = if reward.energy_dependent() { ne } else { 1 };
            let mut out = Vec::with_capacity(rows);
            for row in 0..rows {
                let j = if rows == 1 { ne - 1 } else { row };
                let f = |p: f64| v(j, p);
                let cand = candidates(&f, &levels, s.grid.power_refine);
                if let Some(bad) = cand.rewards.iter().position(|r| !r.is_finite()) {
                    return Err(Error::NonFinite {
                        value: cand.rewards[bad],
                        location: format!(
                            "stage reward at t = {}, φ = {}, E = {}, P = {}",
                            grid.time(k),
                            grid.phi(i),
                            grid.energy(j),
                            cand.powers[bad]
                        ),
                    });
                }
                out.push(cand);
            }
            let v0 = v(0, 0.0);
            if !v0.is_finite() {
                return Err(Error::NonFinite {
                    value: v0,
                    location: format!("stage reward at t = {}, φ = {}, E = 0", grid.time(k), grid.phi(i)),
                });
            }
            Ok((out, v0))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        for sub in (0..grid.substeps).rev() {
            let n = k * grid.substeps + sub;
            let (head, tail) = values.split_at_mut(n + 1);
            let next = &tail[0];
            let cur = &mut head[n];
            let pol = &mut policy[n];
            for (i, (cands, v0)) in per_phi.iter().enumerate() {
                let down = neighbour(i, c.dir, grid.n_phi, s.phi_boundary);
                let up = neighbour(i, -c.dir, grid.n_phi, s.phi_boundary);
                for j in 0..ne {
                    let x = i * ne + j;
                    let mut base = (1.0 - c.down - c.up) * next[x];
                    if let Some(d) = down {
                        base += c.down * next[d * ne + j];
                    }
                    if let Some(u) = up {
                        base += c.up * next[u * ne + j];
                    }
                    if j == 0 {
                        cur[x] = base + grid.dt * v0;
                        pol[x] = 0.0;
                        continue;
                    }
                    let cand = if cands.len() == 1 { &cands[0] } else { &cands[j] };
                    let slope = c.e_ratio * (next[x - 1] - next[x]);
                    let mut best_p = cand.powers[0];
                    let mut best = grid.dt * cand.rewards[0] + best_p * slope;
                    for (&p, &r) in cand.powers.iter().zip(&cand.rewards).skip(1) {
                        let val = grid.dt * r + p * slope;
                        if val > best {
                            best = val;
                            best_p = p;
                        }
                    }
                    cur[x] = base + best;
                    pol[x] = best_p;
                }
            }
        }
    }
    Ok(ValueFunction {
        grid: grid.clone(),
        values,
        policy,
    })
}

/// Own-link alignment probabilities (F, H) at every output node and
/// orientation node, given the population marginals.
pub fn alignment_table(field: &MeanField, s: &Scenario) -> Result<Vec<Vec<(f64, f64)>>> {
    let grid = &field.grid;
    (0..grid.n_time)
        .map(|k| {
            let marginal = PhiGrid::new(grid.phi_marginal(field.at(k)));
            (0..grid.n_phi)
                .map(|i| {
                    let phi = grid.phi(i);
                    match s.psi_mode {
                        // Serving bearing distributed like the population.
                        PsiMode::Population => alignment_probs(&marginal, phi, s),
                        PsiMode::Uniform => {
                            let (f, _) = alignment_probs(&UniformAngle, phi, s)?;
                            let (_, h) = alignment_probs(&marginal, phi, s)?;
                            Ok((f, h))
                        }
                        PsiMode::Fixed(psi) => {
                            let (f, _) = alignment_probs(&PointMass(psi), phi, s)?;
                            let (_, h) = alignment_probs(&marginal, phi, s)?;
                            Ok((f, h))
                        }
                    }
                })
                .collect()
        })
        .collect()
}

/// Expected utility of one transmission as the stage reward, with the
/// interference set by the population mean power.
pub struct MfgReward<'a> {
    table: &'a UtilityTable,
    align: Vec<Vec<(f64, f64)>>,
    /// Mean power at each output node, scaled by the interfering gain ratio
    /// when the kernel follows the population.
    p_bar: Vec<f64>,
    s: &'a Scenario,
}

impl<'a> MfgReward<'a> {
    /// `table` carries the kernel for the static interfering gain law;
    /// `p_bar[k]` is the mean power at output node `k`.
    pub fn new(
        table: &'a UtilityTable,
        static_mean_gain: f64,
        field: &MeanField,
        p_bar: &[f64],
        s: &'a Scenario,
    ) -> Result<Self> {
        let grid = &field.grid;
        if p_bar.len() < grid.n_time {
            return Err(Error::precondition("mean power needed at every output node"));
        }
        let mut scaled = p_bar[..grid.n_time].to_vec();
        if s.mfe.z_time_varying {
            for (k, p) in scaled.iter_mut().enumerate() {
                let marginal = PhiGrid::new(grid.phi_marginal(field.at(k)));
                *p *= interferer_gains(Some(&marginal), s)?.mean() / static_mean_gain;
            }
        }
        Ok(MfgReward {
            table,
            align: alignment_table(field, s)?,
            p_bar: scaled,
            s,
        })
    }

    /// Gain law of the reference user at output node `k`, orientation `i`.
    pub fn gains(&self, k: usize, i: usize) -> Result<GainDistribution> {
        let (f, h) = self.align[k][i];
        GainDistribution::from_alignment(f, h, self.s)
    }
}

impl StageReward for MfgReward<'_> {
    fn slice(&self, k: usize, i: usize) -> Result<Box<dyn Fn(usize, f64) -> f64 + '_>> {
        let prepared = self.table.prepare(&self.gains(k, i)?, self.p_bar[k]);
        Ok(Box::new(move |_, p| prepared.utility(p)))
    }
}

/// Power a single link would use under the baseline,
/// min(P_max, P_target·l^{α_k}/(A_k·E[D])).
pub fn baseline_link_power(kind: LinkKind, l: f64, mean_gain: f64, p_target: f64, s: &Scenario) -> f64 {
    (p_target / (path_gain(kind, l, s) * mean_gain)).min(s.p_max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselinePolicy {
    /// Power used in every cell with E > 0, W.
    pub power: f64,
    /// Received SNR target times the noise power, W.
    pub p_target: f64,
    /// Share of the association law whose compensating power is clipped.
    pub clipped_fraction: f64,
}

impl BaselinePolicy {
    /// The policy on one grid slice.
    pub fn slice(&self, grid: &StateGrid) -> Vec<f64> {
        let mut p = vec![self.power; grid.cells()];
        for i in 0..grid.n_phi {
            p[grid.idx(i, 0)] = 0.0;
        }
        p
    }
}

/// Path-loss compensating power averaged over the association law, with
/// the SNR target `baseline_sinr_db` at the noise-only denominator.
pub fn baseline_policy(table: &UtilityTable, s: &Scenario) -> Result<BaselinePolicy> {
    let p_target = s.noise_power() * 10f64.powf(s.mfe.baseline_sinr_db / 10.0);
    let gains = own_gain_law(&UniformAngle, s)?;
    let mean_gain = gains.mean();
    let power = table.association_average(&gains, |kind, l| baseline_link_power(kind, l, mean_gain, p_target, s))?;
    let clipped_fraction = table.association_average(&gains, |kind, l| {
        if p_target / (path_gain(kind, l, s) * mean_gain) > s.p_max {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(BaselinePolicy {
        power,
        p_target,
        clipped_fraction,
    })
}

/// Mean power at every solver step.
pub fn mean_power_path(field: &MeanField, policy: &[Vec<f64>]) -> Vec<f64> {
    field
        .values
        .iter()
        .zip(policy)
        .map(|(m, p)| field.grid.mean_power(m, p))
        .collect()
}

fn output_nodes(path: &[f64], grid: &StateGrid) -> Vec<f64> {
    (0..grid.n_time).map(|k| path[k * grid.substeps]).collect()
}

/// Conditional mean over energy of the stage reward under `policy`, per
/// output node and orientation node.
pub fn utility_rows(reward: &dyn StageReward, field: &MeanField, policy: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let grid = &field.grid;
    let ne = grid.n_energy;
    (0..grid.n_time)
        .map(|k| {
            let m = field.at(k);
            let p = &policy[k * grid.substeps];
            par_range(grid.n_phi, |i| -> Result<f64> {
                let v = reward.slice(k, i)?;
                let row = &m[i * ne..(i + 1) * ne];
                let mass: f64 = row.iter().sum();
                let total: f64 = if mass > 0.0 {
                    row.iter()
                        .enumerate()
                        .filter(|(_, w)| **w > 0.0)
                        .map(|(j, w)| w * v(j, p[i * ne + j]))
                        .sum::<f64>()
                        / mass
                } else {
                    (0..ne).map(|j| v(j, p[i * ne + j])).sum::<f64>() / ne as f64
                };
                if total.is_finite() {
                    Ok(total)
                } else {
                    Err(Error::NonFinite {
                        value: total,
                        location: format!("utility at t = {}, φ = {}", grid.time(k), grid.phi(i)),
                    })
                }
            })
            .into_iter()
            .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// sup |m^{k+1} − m^k|.
    pub residual: f64,
    /// sup_t |P̄^{k+1} − P̄^k| / sup_t P̄^{k+1}.
    pub p_bar_residual: f64,
    pub mean_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationReport>,
    /// Iteration whose iterate is returned.
    pub best_iteration: usize,
    pub max_mass_correction: f64,
    pub kernel_nodes: usize,
    pub mean_gain_interferer: f64,
    pub baseline: BaselinePolicy,
    /// max over rows of (u_mfe − u_base)/|u_base|.
    pub max_relative_improvement: f64,
    /// min over rows of (u_mfe − u_base)/max(1, |u_base|).
    pub min_relative_margin: f64,
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub policy: BaselinePolicy,
    pub mean_field: MeanField,
    /// Mean power at every solver step.
    pub p_bar: Vec<f64>,
    /// `[k][i]` utility rows.
    pub utility: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MfeSolution {
    pub grid: StateGrid,
    pub mean_field: MeanField,
    pub value: ValueFunction,
    pub p_bar: Vec<f64>,
    pub utility: Vec<Vec<f64>>,
    pub baseline: BaselineRun,
    pub diagnostics: Diagnostics,
}

impl MfeSolution {
    /// Orientation average of the utility rows at every output node.
    pub fn mean_utility(&self) -> Vec<f64> {
        self.utility
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len() as f64)
            .collect()
    }
}

/// Utility table with the interference kernel installed.
pub fn kernel_table(s: &Scenario) -> Result<(UtilityTable, f64)> {
    let mut table = UtilityTable::new(s)?;
    let kernel = InterferenceKernel::build(table.coords(), s)?;
    table.set_kernel(kernel.values())?;
    Ok((table, kernel.mean_gain))
}

pub fn solve_mfe(s: &Scenario) -> Result<MfeSolution> {
    solve_mfe_with(s, &mut |_| {})
}

/// Damped fixed-point iteration between the value recursion and the
/// transport, starting from the density transported under the baseline.
pub fn solve_mfe_with(s: &Scenario, progress: &mut dyn FnMut(&IterationReport)) -> Result<MfeSolution> {
    s.validate()?;
    let grid = StateGrid::new(s)?;
    let (table, mean_gain) = kernel_table(s)?;
    let m0 = initial_density(s, &grid);

    let base = baseline_policy(&table, s)?;
    let base_path = vec![base.slice(&grid); grid.n_steps()];
    let base_field = transport(&m0, &base_path, s, &grid)?;
    let base_p_bar = mean_power_path(&base_field, &base_path);
    let base_reward = MfgReward::new(&table, mean_gain, &base_field, &output_nodes(&base_p_bar, &grid), s)?;
    let base_utility = utility_rows(&base_reward, &base_field, &base_path)?;

    let tau = s.mfe.damping;
    let mut field = base_field.clone();
    let mut p_bar = base_p_bar.clone();
    let mut history = Vec::new();
    let mut max_correction = base_field.max_correction;
    let mut best: Option<(f64, usize, MeanField, ValueFunction, Vec<f64>)> = None;
    let mut converged = false;
    for iteration in 1..=s.mfe.max_iters {
        let reward = MfgReward::new(&table, mean_gain, &field, &output_nodes(&p_bar, &grid), s)?;
        let value = hjb_solve(&reward, s, &grid)?;
        let induced = transport(&m0, &value.policy, s, &grid)?;
        max_correction = max_correction.max(induced.max_correction);
        let mut residual = 0.0f64;
        let mut next = field.clone();
        for (slot, new) in next.values.iter_mut().zip(&induced.values) {
            for (a, b) in slot.iter_mut().zip(new) {
                let mixed = (1.0 - tau) * *a + tau * b;
                residual = residual.max((mixed - *a).abs());
                *a = mixed;
            }
        }
        let next_p_bar = mean_power_path(&next, &value.policy);
        let scale = next_p_bar.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let p_bar_residual = if scale > 0.0 {
            next_p_bar
                .iter()
                .zip(&p_bar)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
                / scale
        } else {
            0.0
        };
        let report = IterationReport {
            iteration,
            residual,
            p_bar_residual,
            mean_power: next_p_bar.iter().sum::<f64>() / next_p_bar.len() as f64,
        };
        progress(&report);
        history.push(report);
        field = next;
        p_bar = next_p_bar;
        let score = residual.max(p_bar_residual);
        if best.as_ref().is_none_or(|b| score <= b.0) {
            best = Some((score, iteration, field.clone(), value, p_bar.clone()));
        }
        if residual < s.mfe.tol && p_bar_residual < s.mfe.tol {
            converged = true;
            break;
        }
    }
    let (_, best_iteration, field, value, p_bar) = best.expect("max_iters ≥ 1");
    let reward = MfgReward::new(&table, mean_gain, &field, &output_nodes(&p_bar, &grid), s)?;
    let utility = utility_rows(&reward, &field, &value.policy)?;

    let mut max_rel = f64::NEG_INFINITY;
    let mut min_margin = f64::INFINITY;
    for (row_m, row_b) in utility.iter().zip(&base_utility) {
        for (&um, &ub) in row_m.iter().zip(row_b) {
            max_rel = max_rel.max((um - ub) / ub.abs().max(f64::MIN_POSITIVE));
            min_margin = min_margin.min((um - ub) / ub.abs().max(1.0));
        }
    }
    let diagnostics = Diagnostics {
        iterations: history.len(),
        converged,
        history,
        best_iteration,
        max_mass_correction: max_correction,
        kernel_nodes: table.len(),
        mean_gain_interferer: mean_gain,
        baseline: base.clone(),
        max_relative_improvement: max_rel,
        min_relative_margin: min_margin,
    };
    Ok(MfeSolution {
        grid,
        mean_field: field,
        value,
        p_bar,
        utility,
        baseline: BaselineRun {
            policy: base,
            mean_field: base_field,
            p_bar: base_p_bar,
            utility: base_utility,
        },
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{efficiency_peak, energy_efficiency, LinkBudget};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn small() -> Scenario {
        let mut s = Scenario::default();
        s.grid.n_phi = 16;
        s.grid.n_energy = 8;
        s.grid.n_time = 10;
        s.grid.n_r = 12;
        s.grid.n_l = 12;
        s
    }

    fn still(s: &mut Scenario) {
        s.mu_phi = 0.0;
        s.sigma_phi = 0.0;
    }

    fn zero_policy(grid: &StateGrid) -> Vec<f64> {
        vec![0.0; grid.cells()]
    }

    #[test]
    fn default_grid_uses_two_substeps() {
        let s = Scenario::default();
        let g = StateGrid::new(&s).unwrap();
        assert_eq!(g.substeps, 2);
        assert_eq!(g.n_steps(), 200);
        assert_relative_eq!(g.d_phi, TAU / 64.0);
        assert_relative_eq!(g.d_energy, 100.0 / 31.0);
        let rate = stability_rate(&s, g.d_phi, g.d_energy, s.p_max);
        assert!(g.dt * rate <= CFL_SAFETY);
        assert!(matches!(StateGrid::with_substeps(&s, 1), Err(Error::Cfl { .. })));
    }

    #[test]
    fn initial_density_is_normalized_at_full_battery() {
        let s = small();
        let g = StateGrid::new(&s).unwrap();
        let m = initial_density(&s, &g);
        assert_relative_eq!(g.mass(&m), 1.0, epsilon = 1e-12);
        for i in 0..g.n_phi {
            for j in 0..g.n_energy - 1 {
                assert_eq!(m[g.idx(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn no_dynamics_leaves_density_unchanged() {
        let mut s = small();
        still(&mut s);
        let g = StateGrid::new(&s).unwrap();
        let m = initial_density(&s, &g);
        let out = fpk_step(&m, &zero_policy(&g), &s, &g).unwrap();
        assert_eq!(out.density, m);
        assert_eq!(out.correction, 0.0);
    }

    #[test]
    fn pure_advection_rotates_the_marginal() {
        let mut s = Scenario::default();
        s.sigma_phi = 0.0;
        s.horizon = 0.5;
        s.grid.n_energy = 4;
        s.grid.n_time = 50;
        let g = StateGrid::new(&s).unwrap();
        let policy = vec![zero_policy(&g); g.n_steps()];
        let field = transport(&initial_density(&s, &g), &policy, &s, &g).unwrap();
        let end = g.phi_marginal(field.values.last().unwrap());
        let moved = WrappedGaussian {
            mean: s.phi_mean + s.mu_phi * s.horizon,
            var: s.phi_var,
        };
        let h = 0.5 * g.d_phi;
        let l1: f64 = (0..g.n_phi)
            .map(|i| (end[i] - moved.mass(g.phi(i) - h, g.phi(i) + h) / g.d_phi).abs() * g.d_phi)
            .sum();
        assert!(l1 < 2.0 * g.d_phi, "L1 error {l1}");
        assert_relative_eq!(s.mu_phi * s.horizon, PI / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn full_power_drains_energy_at_p_max() {
        let mut s = small();
        still(&mut s);
        let g = StateGrid::new(&s).unwrap();
        let m = initial_density(&s, &g);
        let mean_e = |m: &[f64]| -> f64 {
            (0..g.n_phi)
                .flat_map(|i| (0..g.n_energy).map(move |j| (i, j)))
                .map(|(i, j)| m[g.idx(i, j)] * g.energy(j) * g.cell_volume())
                .sum()
        };
        let p = vec![s.p_max; g.cells()];
        let out = fpk_step(&m, &p, &s, &g).unwrap();
        let drop = mean_e(&m) - mean_e(&out.density);
        assert_relative_eq!(drop, s.p_max * g.dt, max_relative = 1e-9);
        assert!((drop - s.p_max * g.dt).abs() <= g.d_energy);
    }

    #[test]
    fn mass_is_conserved_over_the_horizon() {
        let s = Scenario::default();
        let g = StateGrid::new(&s).unwrap();
        let policy: Vec<Vec<f64>> = (0..g.n_steps())
            .map(|n| {
                (0..g.cells())
                    .map(|x| s.p_max * (((x * 7 + n * 13) % 17) as f64 / 16.0))
                    .collect()
            })
            .collect();
        let mut m = initial_density(&s, &g);
        for p in &policy {
            let raw = fpk_apply(&m, p, &s, &g).unwrap();
            assert!((g.mass(&raw) - 1.0).abs() < MASS_TOLERANCE);
            assert!(raw.iter().all(|&v| v >= 0.0));
            m = fpk_step(&m, p, &s, &g).unwrap().density;
        }
    }

    #[test]
    fn stability_violation_is_reported() {
        let s = small();
        let mut g = StateGrid::new(&s).unwrap();
        g.dt *= 10.0;
        let m = initial_density(&s, &g);
        match fpk_step(&m, &zero_policy(&g), &s, &g) {
            Err(Error::Cfl { dt, bound }) => assert!(dt > bound),
            other => panic!("expected a CFL error, got {other:?}"),
        }
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let s = small();
        let g = StateGrid::new(&s).unwrap();
        let m: Vec<f64> = initial_density(&s, &g).iter().map(|v| 2.0 * v).collect();
        assert!(matches!(
            fpk_step(&m, &zero_policy(&g), &s, &g),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn absorbing_edges_lose_mass() {
        let mut s = small();
        s.phi_boundary = PhiBoundary::Absorbing;
        s.phi_mean = 0.2;
        let g = StateGrid::new(&s).unwrap();
        let m = initial_density(&s, &g);
        let raw = fpk_apply(&m, &zero_policy(&g), &s, &g).unwrap();
        assert!(g.mass(&raw) < 1.0 - 1e-4);
        let step = fpk_step(&m, &zero_policy(&g), &s, &g).unwrap();
        assert!(step.correction < 0.0);
        assert_relative_eq!(g.mass(&step.density), 1.0, epsilon = 1e-12);
    }

    struct Constant(f64);

    impl StageReward for Constant {
        fn slice(&self, _: usize, _: usize) -> Result<Box<dyn Fn(usize, f64) -> f64 + '_>> {
            Ok(Box::new(move |_, _| self.0))
        }
    }

    #[test]
    fn zero_reward_gives_zero_value_and_power() {
        let s = small();
        let g = StateGrid::new(&s).unwrap();
        let vf = hjb_solve(&Constant(0.0), &s, &g).unwrap();
        assert!(vf.values.iter().flatten().all(|&v| v == 0.0));
        assert!(vf.policy.iter().flatten().all(|&p| p == 0.0));
    }

    #[test]
    fn constant_reward_accumulates_over_time() {
        let s = small();
        let g = StateGrid::new(&s).unwrap();
        let vf = hjb_solve(&Constant(2.0), &s, &g).unwrap();
        for v in &vf.values[0] {
            assert_relative_eq!(*v, 2.0 * s.horizon, max_relative = 1e-12);
        }
        assert!(vf.values.last().unwrap().iter().all(|&v| v == 0.0));
    }

    /// Interior optimum that varies with time, orientation and energy.
    struct Bumpy {
        p_max: f64,
    }

    impl StageReward for Bumpy {
        fn slice(&self, k: usize, i: usize) -> Result<Box<dyn Fn(usize, f64) -> f64 + '_>> {
            Ok(Box::new(move |j, p| {
                let a = 0.5 + 0.4 * (i as f64 + 0.7 * k as f64 + 0.3 * j as f64).sin();
                let x = p / self.p_max;
                a * x.sqrt() - x
            }))
        }

        fn energy_dependent(&self) -> bool {
            true
        }
    }

    fn dp_scenario(n_time: usize) -> Scenario {
        let mut s = Scenario::default();
        s.grid.n_phi = 8;
        s.grid.n_energy = 8;
        s.grid.n_time = n_time;
        s.grid.n_power = 4;
        s.grid.power_decades = 2.0;
        s.grid.power_refine = false;
        s.e_max = 0.7;
        s
    }

    /// Exhaustive per-node dynamic programming over the transport columns
    /// obtained by stepping unit densities.
    fn brute_force(reward: &dyn StageReward, s: &Scenario, g: &StateGrid) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let levels = power_levels(s);
        let n = g.cells();
        let columns: Vec<Vec<Vec<f64>>> = levels
            .iter()
            .map(|&p| {
                let policy = vec![p; n];
                (0..n)
                    .map(|x| {
                        let mut e = vec![0.0; n];
                        e[x] = 1.0;
                        fpk_apply(&e, &policy, s, g).unwrap()
                    })
                    .collect()
            })
            .collect();
        let mut values = vec![vec![0.0; n]; g.n_steps() + 1];
        let mut policy = vec![vec![0.0; n]; g.n_steps()];
        for step in (0..g.n_steps()).rev() {
            let k = step / g.substeps;
            for i in 0..g.n_phi {
                let v = reward.slice(k, i).unwrap();
                for j in 0..g.n_energy {
                    let x = g.idx(i, j);
                    let choices = if j == 0 { 1 } else { levels.len() };
                    let mut best = f64::NEG_INFINITY;
                    for c in 0..choices {
                        let p = if j == 0 { 0.0 } else { levels[c] };
                        let cont: f64 = columns[c][x].iter().zip(&values[step + 1]).map(|(a, b)| a * b).sum();
                        let total = g.dt * v(j, p) + cont;
                        if total > best {
                            best = total;
                            policy[step][x] = p;
                        }
                    }
                    values[step][x] = best;
                }
            }
        }
        (values, policy)
    }

    #[test]
    fn hjb_matches_brute_force_dynamic_programming() {
        for n_time in 1..=3 {
            let s = dp_scenario(n_time);
            let g = StateGrid::new(&s).unwrap();
            let reward = Bumpy { p_max: s.p_max };
            let vf = hjb_solve(&reward, &s, &g).unwrap();
            let (values, policy) = brute_force(&reward, &s, &g);
            for (a, b) in vf.values.iter().flatten().zip(values.iter().flatten()) {
                assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
            }
            assert_eq!(vf.policy, policy);
            let distinct: std::collections::BTreeSet<u64> = vf.policy.iter().flatten().map(|p| p.to_bits()).collect();
            assert!(distinct.len() >= 3, "the instance should exercise several levels");
        }
    }

    struct SingleLink {
        lb: LinkBudget,
        s: Scenario,
    }

    impl StageReward for SingleLink {
        fn slice(&self, _: usize, _: usize) -> Result<Box<dyn Fn(usize, f64) -> f64 + '_>> {
            Ok(Box::new(move |_, p| energy_efficiency(p, &self.lb, &self.s).unwrap()))
        }
    }

    #[test]
    fn argmax_never_exceeds_the_efficiency_peak() {
        let mut s = small();
        s.e_max = 0.05;
        let g = StateGrid::new(&s).unwrap();
        for l in [0.5, 3.0, 12.0] {
            let lb = LinkBudget {
                kind: LinkKind::Los,
                l,
                gain: 1.0,
                interference: 0.0,
                noise: s.noise_power(),
            };
            let (peak, _) = efficiency_peak(&lb, &s).unwrap();
            let reward = SingleLink { lb, s: s.clone() };
            let vf = hjb_solve(&reward, &s, &g).unwrap();
            for p in vf.policy.iter().flatten() {
                assert!(*p <= peak * (1.0 + 1e-6), "{p} above the peak {peak}");
            }
            let top = vf.policy[0][g.idx(0, g.n_energy - 1)];
            assert_relative_eq!(top, peak, max_relative = 1e-6);
        }
    }

    #[test]
    fn baseline_link_power_examples() {
        let mut s = Scenario::default();
        s.a_los = 1.0;
        let target = 1e-6;
        let l = 4.0;
        assert_relative_eq!(
            baseline_link_power(LinkKind::Los, l, 1.0, target, &s),
            (target * l.powf(s.alpha_los)).min(s.p_max)
        );
        assert!(baseline_link_power(LinkKind::Los, 1.0, 1.0, target, &s) < s.p_max);
        assert_eq!(baseline_link_power(LinkKind::Nlos, 1e3, 1.0, target, &s), s.p_max);
    }

    #[test]
    fn baseline_policy_is_flat_and_silent_when_empty() {
        let s = small();
        let g = StateGrid::new(&s).unwrap();
        let (table, _) = kernel_table(&s).unwrap();
        let base = baseline_policy(&table, &s).unwrap();
        assert!(base.power > 0.0 && base.power <= s.p_max);
        assert!((0.0..=1.0).contains(&base.clipped_fraction));
        let p = base.slice(&g);
        for i in 0..g.n_phi {
            assert_eq!(p[g.idx(i, 0)], 0.0);
            assert_eq!(p[g.idx(i, 1)], base.power);
        }
    }

    #[test]
    fn decoupled_game_converges_immediately() {
        let mut s = small();
        s.lambda_u = 1e-6;
        let sol = solve_mfe(&s).unwrap();
        let h = &sol.diagnostics.history;
        assert!(h.len() >= 2);
        assert!(h[1].residual < s.mfe.tol, "{:?}", h[1]);
        assert!(sol.diagnostics.converged);
    }

    #[test]
    fn equilibrium_dominates_the_baseline() {
        let s = small();
        let sol = solve_mfe(&s).unwrap();
        assert!(sol.diagnostics.converged);
        for (rm, rb) in sol.utility.iter().zip(&sol.baseline.utility) {
            for (um, ub) in rm.iter().zip(rb) {
                assert!(um - ub >= -1e-9 * ub.abs().max(1.0));
            }
        }
        assert!(sol.diagnostics.max_relative_improvement > 0.01);
        assert!(sol.diagnostics.max_mass_correction < MASS_TOLERANCE);
        for (n, p) in sol.value.policy.iter().enumerate() {
            for i in 0..sol.grid.n_phi {
                assert_eq!(p[sol.grid.idx(i, 0)], 0.0, "step {n}");
            }
            assert!(p.iter().all(|&x| (0.0..=s.p_max).contains(&x)));
        }
    }

    #[test]
    fn residual_history_decreases_after_the_start() {
        let mut s = Scenario::default();
        s.grid.n_phi = 32;
        s.grid.n_time = 20;
        let sol = solve_mfe(&s).unwrap();
        let h = &sol.diagnostics.history;
        assert!(sol.diagnostics.converged);
        for w in h.windows(2).skip(2) {
            assert!(w[1].residual < w[0].residual);
            assert!(w[1].p_bar_residual < w[0].p_bar_residual);
        }
    }

    #[test]
    fn rotating_the_initial_density_rotates_the_policy() {
        let s = small();
        let shift = 3;
        let mut r = s.clone();
        r.phi_mean += shift as f64 * TAU / s.grid.n_phi as f64;
        let a = solve_mfe(&s).unwrap();
        let b = solve_mfe(&r).unwrap();
        let g = &a.grid;
        let top = g.n_energy - 1;
        let profile = |sol: &MfeSolution, k: usize| -> Vec<f64> {
            (0..g.n_phi).map(|i| sol.value.policy_at(k)[g.idx(i, top)]).collect()
        };
        for k in [0, g.n_time / 2, g.n_time - 1] {
            let pa = profile(&a, k);
            let pb = profile(&b, k);
            for i in 0..g.n_phi {
                let j = (i + shift) % g.n_phi;
                assert_relative_eq!(pa[i], pb[j], max_relative = 1e-6);
            }
            let argmin = |p: &[f64]| (0..p.len()).fold(0, |m, i| if p[i] < p[m] { i } else { m });
            let d = (argmin(&pb) + g.n_phi - argmin(&pa)) % g.n_phi;
            assert!(d.abs_diff(shift) <= 1, "argmin moved by {d}");
        }
    }

    #[test]
    fn refinement_changes_mean_utility_little() {
        let mut s = small();
        s.grid.n_phi = 16;
        s.grid.n_time = 10;
        let coarse = solve_mfe(&s).unwrap();
        s.grid.n_phi = 32;
        s.grid.n_time = 20;
        let fine = solve_mfe(&s).unwrap();
        let avg = |sol: &MfeSolution| {
            let u = sol.mean_utility();
            u.iter().sum::<f64>() / u.len() as f64
        };
        let (a, b) = (avg(&coarse), avg(&fine));
        assert!((a - b).abs() / b < 0.02, "{a} vs {b}");
    }

    #[test]
    fn brent_finds_interior_maxima() {
        let (x, fx) = brent_max(|x| -(x - 1.3).powi(2) + 2.0, -4.0, 5.0, 1e-12, 200);
        assert_relative_eq!(x, 1.3, epsilon = 1e-8);
        assert_relative_eq!(fx, 2.0, epsilon = 1e-14);
        let (x, _) = brent_max(|x: f64| x.ln() - x / 3.0, 0.1, 30.0, 1e-12, 200);
        assert_relative_eq!(x, 3.0, epsilon = 1e-7);
    }

    #[test]
    fn power_levels_span_the_decades() {
        let s = Scenario::default();
        let l = power_levels(&s);
        assert_eq!(l.len(), 16);
        assert_eq!(l[0], 0.0);
        assert_relative_eq!(l[1], s.p_max * 1e-14, max_relative = 1e-12);
        assert_eq!(l[15], s.p_max);
        assert!(l.windows(2).all(|w| w[1] > w[0]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn transport_is_monotone_and_conservative(
                seed in proptest::collection::vec(0.0f64..1.0, 16 * 8),
                pol in proptest::collection::vec(0.0f64..1.0, 16 * 8),
                mu in -2.0f64..2.0,
                sigma in 0.0f64..0.5,
            ) {
                let mut s = small();
                s.mu_phi = mu;
                s.sigma_phi = sigma;
                let g = StateGrid::new(&s).unwrap();
                let total: f64 = seed.iter().sum::<f64>() * g.cell_volume();
                prop_assume!(total > 0.0);
                let m: Vec<f64> = seed.iter().map(|v| v / total).collect();
                let p: Vec<f64> = pol.iter().map(|v| v * s.p_max).collect();
                let out = fpk_apply(&m, &p, &s, &g).unwrap();
                prop_assert!(out.iter().all(|&v| v >= 0.0));
                prop_assert!((g.mass(&out) - 1.0).abs() < 1e-12);
            }

            #[test]
            fn policy_respects_bounds(scale in 0.1f64..10.0, e_max in 0.01f64..1.0) {
                let mut s = dp_scenario(2);
                s.e_max = e_max;
                s.grid.power_refine = true;
                let g = StateGrid::new(&s).unwrap();
                struct Scaled(f64, f64);
                impl StageReward for Scaled {
                    fn slice(&self, k: usize, i: usize) -> Result<Box<dyn Fn(usize, f64) -> f64 + '_>> {
                        Ok(Box::new(move |_, p| {
                            let x = p / self.1;
                            self.0 * (1.0 + (i + k) as f64 * 0.1) * x.sqrt() - x
                        }))
                    }
                }
                let vf = hjb_solve(&Scaled(scale, s.p_max), &s, &g).unwrap();
                for p in &vf.policy {
                    prop_assert!(p.iter().all(|&x| (0.0..=s.p_max).contains(&x)));
                    for i in 0..g.n_phi {
                        prop_assert_eq!(p[g.idx(i, 0)], 0.0);
                    }
                }
            }
        }
    }
}
