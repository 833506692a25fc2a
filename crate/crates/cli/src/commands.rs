//! The `solve`, `validate` and `tables` commands.

use std::path::{Path, PathBuf};

use mmwave_mfg::antenna::UniformAngle;
use mmwave_mfg::association::association_law;
use mmwave_mfg::config::parse_scenario_with_overrides;
use mmwave_mfg::geometry::{blockage_prob, nearest_bs_pdf, LinkKind};
use mmwave_mfg::interference::{coupling_kernel, InterferenceKernel};
use mmwave_mfg::link::UtilityTable;
use mmwave_mfg::mfg::{solve_mfe_with, MfeSolution};
use mmwave_mfg::montecarlo::{
    blockage_frequency, convergence_slope, empirical_link_stats, interference_samples, ks_statistic, MeanEstimate,
    Shadowing,
};
use mmwave_mfg::{Error, Scenario};
use serde::Serialize;

use crate::export::{Cell, CsvTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Validate,
    Tables,
}

#[derive(Debug, Clone)]
pub struct Options {
    /// Scenario file; the built-in defaults when absent.
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub overrides: Vec<String>,
    /// Monte Carlo network samples per check in `validate`.
    pub samples: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(Error),
    #[error("{0}")]
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

pub fn load_scenario(opts: &Options) -> Result<Scenario, CliError> {
    let text = match &opts.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Config(Error::io(path, e)))?,
        None => String::new(),
    };
    parse_scenario_with_overrides(&text, &opts.overrides).map_err(CliError::Config)
}

/// Files produced by one command, written together or not at all.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn table(&mut self, name: &str, table: &CsvTable, hash: &str) {
        self.files.push((name.to_string(), table.render(hash)));
    }

    pub fn text(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes every file into a staging directory inside `out`, then moves
    /// them into place. A failure leaves no new files behind.
    pub fn commit(&self, out: &Path) -> Result<Vec<PathBuf>, Error> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let staging = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(out)
            .map_err(|e| Error::io(out, e))?;
        for (name, contents) in &self.files {
            let p = staging.path().join(name);
            std::fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
        }
        let mut written = Vec::new();
        for (name, _) in &self.files {
            let dest = out.join(name);
            if let Err(e) = std::fs::rename(staging.path().join(name), &dest) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(Error::io(&dest, e));
            }
            written.push(dest);
        }
        Ok(written)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub written: Vec<PathBuf>,
    /// Names of failed oracle checks; the report is still written.
    pub failed_checks: Vec<String>,
}

/// Runs `cmd` and writes its artifacts into `opts.out`.
pub fn run(cmd: Command, opts: &Options, log: &mut dyn FnMut(&str)) -> Result<RunReport, CliError> {
    let s = load_scenario(opts)?;
    s.validate().map_err(CliError::Config)?;
    let mut failed_checks = Vec::new();
    let artifacts = match cmd {
        Command::Solve => solve_artifacts(&s, opts.seed, log)?.0,
        Command::Validate => {
            let (art, failed) = validate_artifacts(&s, opts.seed, opts.samples, log)?;
            failed_checks = failed;
            art
        }
        Command::Tables => tables_artifacts(&s, log)?,
    };
    Ok(RunReport {
        written: artifacts.commit(&opts.out)?,
        failed_checks,
    })
}

fn scenario_echo(s: &Scenario) -> String {
    format!("# scenario={}\n{}", s.hash(), s.to_toml())
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    scenario_hash: String,
    seed: u64,
    /// φ node of the lowest MFE power at E = e_max, t = 0.
    argmin_phi_t0: f64,
    mean_utility_mfe: Vec<f64>,
    mean_utility_base: Vec<f64>,
    diagnostics: &'a mmwave_mfg::mfg::Diagnostics,
}

/// Solves the game and renders policy, utility, mean-field, scenario and
/// diagnostics files.
pub fn solve_artifacts(
    s: &Scenario,
    seed: u64,
    log: &mut dyn FnMut(&str),
) -> Result<(Artifacts, MfeSolution), CliError> {
    log("solving the mean-field equilibrium");
    let sol = solve_mfe_with(s, &mut |r| {
        log(&format!(
            "iteration {}: residual {:.3e}, mean-power residual {:.3e}, mean power {:.3e} W",
            r.iteration, r.residual, r.p_bar_residual, r.mean_power
        ))
    })?;
    let hash = s.hash();
    let mut art = Artifacts::default();
    art.table("policy.csv", &policy_table(&sol), &hash);
    art.table("utility.csv", &utility_table(&sol), &hash);
    art.table("meanfield.csv", &meanfield_table(&sol), &hash);
    art.text("scenario.toml", scenario_echo(s));
    let summary = SolveSummary {
        scenario_hash: hash,
        seed,
        argmin_phi_t0: argmin_phi_t0(&sol),
        mean_utility_mfe: sol.mean_utility(),
        mean_utility_base: sol
            .baseline
            .utility
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len() as f64)
            .collect(),
        diagnostics: &sol.diagnostics,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Domain(e.to_string()))?;
    art.text("diagnostics.json", json + "\n");
    Ok((art, sol))
}

/// Orientation of the smallest MFE power at full energy and t = 0.
pub fn argmin_phi_t0(sol: &MfeSolution) -> f64 {
    let g = &sol.grid;
    let p = sol.value.policy_at(0);
    let j = g.n_energy - 1;
    let i = (0..g.n_phi)
        .min_by(|&a, &b| p[g.idx(a, j)].total_cmp(&p[g.idx(b, j)]))
        .unwrap_or(0);
    g.phi(i)
}

pub fn policy_table(sol: &MfeSolution) -> CsvTable {
    let g = &sol.grid;
    let base = sol.baseline.policy.slice(g);
    let mut t = CsvTable::new(&["t", "phi", "E", "P_mfe", "P_base"]);
    for k in 0..g.n_time {
        let p = sol.value.policy_at(k);
        for i in 0..g.n_phi {
            for j in 0..g.n_energy {
                let c = g.idx(i, j);
                t.push(vec![
                    g.time(k).into(),
                    g.phi(i).into(),
                    g.energy(j).into(),
                    p[c].into(),
                    base[c].into(),
                ]);
            }
        }
    }
    t
}

pub fn utility_table(sol: &MfeSolution) -> CsvTable {
    let g = &sol.grid;
    let mut t = CsvTable::new(&["t", "phi", "utility_mfe", "utility_base"]);
    for k in 0..g.n_time {
        for i in 0..g.n_phi {
            t.push(vec![
                g.time(k).into(),
                g.phi(i).into(),
                sol.utility[k][i].into(),
                sol.baseline.utility[k][i].into(),
            ]);
        }
    }
    t
}

/// Cell masses of the equilibrium density at every output node.
pub fn meanfield_table(sol: &MfeSolution) -> CsvTable {
    let g = &sol.grid;
    let mut t = CsvTable::new(&["t", "phi", "E", "mass"]);
    for k in 0..=g.n_time {
        let m = sol.mean_field.at(k);
        for i in 0..g.n_phi {
            for j in 0..g.n_energy {
                t.push(vec![
                    g.time(k).into(),
                    g.phi(i).into(),
                    g.energy(j).into(),
                    m[g.idx(i, j)].into(),
                ]);
            }
        }
    }
    t
}

/// One row of the oracle report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub r: f64,
    pub l: Option<f64>,
    pub n: usize,
    pub analytic: Option<f64>,
    pub empirical: Option<f64>,
    pub statistic: f64,
    pub bound: f64,
    /// `None` for diagnostics that carry no pass criterion.
    pub pass: Option<bool>,
    pub note: String,
}

fn opt(x: Option<f64>) -> Cell {
    x.map_or(Cell::Text(String::new()), Cell::Num)
}

pub fn checks_table(checks: &[Check]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "check",
        "r",
        "l",
        "n",
        "analytic",
        "empirical",
        "statistic",
        "bound",
        "result",
        "note",
    ]);
    for c in checks {
        t.push(vec![
            c.name.into(),
            c.r.into(),
            opt(c.l),
            c.n.into(),
            opt(c.analytic),
            opt(c.empirical),
            c.statistic.into(),
            c.bound.into(),
            c.pass.map_or(Cell::Text("info".into()), Cell::from),
            Cell::Text(c.note.clone()),
        ]);
    }
    t
}

/// Binomial z-score of `hits/n` against the probability `p`.
fn z_score(hits: usize, n: usize, p: f64) -> f64 {
    let freq = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    if se > 0.0 {
        (freq - p).abs() / se
    } else if freq == p {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Radii of the geometry and association checks, as fractions of r_max.
pub const CHECK_RADII: [f64; 3] = [0.0, 0.5, 0.9];
/// (r, l) pairs of the interference checks, m.
pub const KERNEL_POINTS: [(f64, f64); 2] = [(10.0, 5.0), (20.0, 10.0)];
/// Link lengths of the blockage checks, m.
pub const BLOCKAGE_LENGTHS: [f64; 3] = [2.0, 5.0, 10.0];

/// Nearest-distance KS and association checks at probe distance `r`.
pub fn link_checks(s: &Scenario, r: f64, seed: u64, n: usize) -> Result<Vec<Check>, Error> {
    let st = empirical_link_stats(s, r, Shadowing::Independent, seed, n)?;
    let mut out = Vec::new();
    for (kind, dist, name) in [
        (LinkKind::Los, &st.los_distances, "ks_nearest_los"),
        (LinkKind::Nlos, &st.nlos_distances, "ks_nearest_nlos"),
    ] {
        let pdf = nearest_bs_pdf(kind, r, s)?;
        let ks = ks_statistic(dist, |l| pdf.cdf(l))?;
        out.push(Check {
            name,
            r,
            l: None,
            n: dist.len(),
            analytic: Some(pdf.normalizer),
            empirical: Some(dist.len() as f64 / n as f64),
            statistic: ks,
            bound: 0.02,
            pass: Some(ks <= 0.02),
            note: "analytic/empirical: probability of a BS of this kind within r_0".into(),
        });
    }
    let law = association_law(r, &UniformAngle, 0.0, s)?;
    for (freq, rho, name) in [
        (st.serves_los, law.rho_los, "association_los"),
        (st.serves_nlos, law.rho_nlos_direct, "association_nlos"),
    ] {
        let z = z_score(freq.hits, freq.n, rho);
        out.push(Check {
            name,
            r,
            l: None,
            n,
            analytic: Some(rho),
            empirical: Some(freq.p()),
            statistic: z,
            bound: 3.0,
            pass: Some(z <= 3.0),
            note: format!("binomial z-score; outage frequency {:.5}", st.outage.p()),
        });
    }
    Ok(out)
}

/// Interference check at (r, l): relative error of the sample mean.
pub fn kernel_check(s: &Scenario, r: f64, l: f64, seed: u64, n: usize) -> Result<Check, Error> {
    let z = coupling_kernel(r, l, &UniformAngle, s)?;
    let v = interference_samples(s, r, l, seed, n, 64)?;
    let est = MeanEstimate::from_values(&v)?;
    let rel = (est.mean - z).abs() / z;
    let slope = convergence_slope(&v, z).map_or("n/a".to_string(), |k| format!("{k:.3}"));
    Ok(Check {
        name: "interference_kernel",
        r,
        l: Some(l),
        n,
        analytic: Some(z),
        empirical: Some(est.mean),
        statistic: rel,
        bound: 0.02,
        pass: Some(rel <= 0.02),
        note: format!(
            "relative error; standard error {:.3e}; log-log error slope {slope}",
            est.se
        ),
    })
}

/// Blockage of a single link with external blockers removed.
pub fn blockage_check(s: &Scenario, l: f64, seed: u64, n: usize) -> Result<Check, Error> {
    let mut s0 = s.clone();
    s0.lambda_e = 0.0;
    let f = blockage_frequency(&s0, l, seed, n)?;
    let p = blockage_prob(l, &s0);
    let z = z_score(f.hits, f.n, p);
    Ok(Check {
        name: "participant_blockage",
        r: 0.0,
        l: Some(l),
        n,
        analytic: Some(p),
        empirical: Some(f.p()),
        statistic: z,
        bound: 3.0,
        pass: Some(z <= 3.0),
        note: "binomial z-score; external blockers removed".into(),
    })
}

/// KS of the nearest distances when all links share one obstacle field.
fn shared_field_checks(s: &Scenario, r: f64, seed: u64, n: usize) -> Result<Vec<Check>, Error> {
    let st = empirical_link_stats(s, r, Shadowing::Shared, seed, n)?;
    let mut out = Vec::new();
    for (kind, dist, name) in [
        (LinkKind::Los, &st.los_distances, "shared_field_ks_los"),
        (LinkKind::Nlos, &st.nlos_distances, "shared_field_ks_nlos"),
    ] {
        let pdf = nearest_bs_pdf(kind, r, s)?;
        out.push(Check {
            name,
            r,
            l: None,
            n: dist.len(),
            analytic: None,
            empirical: None,
            statistic: ks_statistic(dist, |l| pdf.cdf(l))?,
            bound: 0.02,
            pass: None,
            note: "correlated shadowing across links; outside the model".into(),
        });
    }
    Ok(out)
}

/// The full oracle suite. Interference checks use n/10 samples.
pub fn validate_suite(s: &Scenario, seed: u64, n: usize, log: &mut dyn FnMut(&str)) -> Result<Vec<Check>, Error> {
    let mut checks = Vec::new();
    for frac in CHECK_RADII {
        let r = frac * s.r_max;
        log(&format!("nearest-BS and association checks at r = {r} m"));
        checks.extend(link_checks(s, r, seed, n)?);
    }
    for l in BLOCKAGE_LENGTHS {
        log(&format!("blockage check at l = {l} m"));
        checks.push(blockage_check(s, l, seed, n)?);
    }
    for (r, l) in KERNEL_POINTS {
        if r > s.r_max || l > s.r_0 {
            continue;
        }
        log(&format!("interference check at r = {r} m, l = {l} m"));
        checks.push(kernel_check(s, r, l, seed, (n / 10).max(1))?);
    }
    log("shared-field diagnostics");
    checks.extend(shared_field_checks(s, 0.0, seed, n)?);
    Ok(checks)
}

fn validate_artifacts(
    s: &Scenario,
    seed: u64,
    n: usize,
    log: &mut dyn FnMut(&str),
) -> Result<(Artifacts, Vec<String>), CliError> {
    let checks = validate_suite(s, seed, n, log)?;
    for c in &checks {
        let verdict = match c.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "info",
        };
        log(&format!(
            "{verdict} {} r={} statistic={:.4} bound={}",
            c.name, c.r, c.statistic, c.bound
        ));
    }
    let hash = s.hash();
    let mut art = Artifacts::default();
    art.table("validate.csv", &checks_table(&checks), &hash);
    art.text("scenario.toml", scenario_echo(s));
    let failed = checks
        .iter()
        .filter(|c| c.pass == Some(false))
        .map(|c| format!("{} at r = {}", c.name, c.r))
        .collect();
    Ok((art, failed))
}

fn tables_artifacts(s: &Scenario, log: &mut dyn FnMut(&str)) -> Result<Artifacts, CliError> {
    let hash = s.hash();
    let mut art = Artifacts::default();
    let radii: Vec<f64> = (0..=10).map(|k| s.r_max * k as f64 / 10.0).collect();

    log("nearest-BS distance laws");
    let mut geo = CsvTable::new(&["r", "l", "f_L", "f_N", "B_L", "B_N"]);
    for &r in &radii {
        let los = nearest_bs_pdf(LinkKind::Los, r, s)?;
        let nlos = nearest_bs_pdf(LinkKind::Nlos, r, s)?;
        for k in 0..=60 {
            let l = s.r_0 * k as f64 / 60.0;
            geo.push(vec![
                r.into(),
                l.into(),
                los.evaluate(l).into(),
                nlos.evaluate(l).into(),
                los.normalizer.into(),
                nlos.normalizer.into(),
            ]);
        }
    }
    art.table("geometry.csv", &geo, &hash);

    log("association probabilities");
    let mut assoc = CsvTable::new(&["r", "rho_L", "rho_N", "rho_N_direct"]);
    for k in 0..=25 {
        let r = s.r_max * k as f64 / 25.0;
        let law = association_law(r, &UniformAngle, 0.0, s)?;
        assoc.push(vec![
            r.into(),
            law.rho_los.into(),
            law.rho_nlos.into(),
            law.rho_nlos_direct.into(),
        ]);
    }
    art.table("association.csv", &assoc, &hash);

    log("interference kernel");
    let coords = UtilityTable::new(s)?.coords();
    let kernel = InterferenceKernel::build(coords.clone(), s)?;
    let mut z = CsvTable::new(&["r", "l", "Z"]);
    for ((r, l), v) in coords.iter().zip(kernel.values()) {
        z.push(vec![(*r).into(), (*l).into(), v.into()]);
    }
    art.table("kernel.csv", &z, &hash);
    art.text("scenario.toml", scenario_echo(s));
    Ok(art)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_score_edges() {
        assert_eq!(z_score(0, 10, 0.0), 0.0);
        assert_eq!(z_score(1, 10, 0.0), f64::INFINITY);
        assert!((z_score(60, 100, 0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(Error::Validation("x".into())).exit_code(), 1);
        assert_eq!(CliError::Runtime(Error::EmptySample).exit_code(), 2);
    }
}
