//! Scenario record: every physical, network, and discretization parameter in
//! one validated, immutable value.
//!
//! The on-disk form is a TOML document with six sections (`[network]`,
//! `[antenna]`, `[link]`, `[dynamics]`, `[grid]`, `[mfe]`). Every key is
//! optional; missing keys take the values from [`DEFAULTS`]. Numeric values
//! may be written as plain numbers or as simple expressions over `pi`
//! (`"pi/3"`, `"2*pi"`, `"0.5*pi"`).

use std::f64::consts::PI;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::antenna::main_lobe_gain;
use crate::error::{Error, Result};

/// Which reading of the BS alignment probability H is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HMode {
    /// BS orientations uniform and time invariant: H = W/(2π).
    Uniform,
    /// H computed like F, from the orientation marginal and the BS beamwidth.
    LikeF,
}

/// How the serving-BS bearing ψ_ub enters the own-link alignment probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMode {
    /// Bearing distributed like the population orientation marginal.
    Population,
    /// Bearing uniform on [0, 2π): F = w/(2π).
    Uniform,
    /// Fixed bearing (rad) shared by every user.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QModel {
    /// q(γ) = 1 − e^{−κγ}
    Exponential,
    /// q(γ) = (1 − e^{−κγ})^M, M = `q_order` ≥ 2
    Sigmoid,
}

/// Form of the "no nearer competitor" bracket in the association law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssocMode {
    /// p_void + P(competitor fails), clamped to 1.
    Clamp,
    /// p_void + (1 − p_void)·P(competitor fails).
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiBoundary {
    Periodic,
    Absorbing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n_phi: usize,
    pub n_energy: usize,
    /// Output time intervals on [0, T]; the solver may substep each one.
    pub n_time: usize,
    /// Number of candidate power levels, including P = 0.
    pub n_power: usize,
    /// Lowest positive power level is P_max·10^(−power_decades).
    pub power_decades: f64,
    pub power_refine: bool,
    /// Gauss–Legendre nodes over the MU radius r.
    pub n_r: usize,
    /// Gauss–Legendre nodes over the serving distance l.
    pub n_l: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfeSpec {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub z_time_varying: bool,
    /// Baseline received-SNR target at noise-only denominator, dB.
    pub baseline_sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub lambda_b: f64,
    pub lambda_u: f64,
    pub lambda_e: f64,
    pub r_max: f64,
    pub r_0: f64,
    pub r_blocker: f64,

    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub a_los: f64,
    pub a_nlos: f64,

    pub beam_bs: f64,
    pub beam_mu: f64,
    pub sidelobe_bs: f64,
    pub sidelobe_mu: f64,
    pub h_mode: HMode,
    pub psi_mode: PsiMode,

    pub eta: f64,
    pub noise_psd_dbm_hz: f64,
    /// N₀ in W/Hz, derived from `noise_psd_dbm_hz` once at parse time.
    pub noise_psd: f64,
    pub bandwidth: f64,
    pub rate: f64,
    pub q_model: QModel,
    pub q_kappa: f64,
    pub q_order: u32,
    pub assoc_mode: AssocMode,

    pub p_max: f64,
    pub mu_phi: f64,
    pub sigma_phi: f64,
    pub e_max: f64,
    pub horizon: f64,
    pub phi_mean: f64,
    pub phi_var: f64,
    pub ito_convention: bool,
    pub phi_boundary: PhiBoundary,

    pub grid: GridSpec,
    pub mfe: MfeSpec,
}

/// Default values: `(section, key, value, note)`.
pub const DEFAULTS: &[(&str, &str, &str, &str)] = &[
    ("network", "lambda_b", "0.08", "BS density, 1/m²"),
    ("network", "lambda_u", "0.03", "MU density, 1/m²"),
    ("network", "lambda_e", "0.01", "external blocker density, 1/m²"),
    ("network", "r_max", "25", "disk radius, m (≈157 BSs at λ_b = 0.08)"),
    ("network", "r_0", "15", "MU communication range, m"),
    ("network", "r_blocker", "0.3", "blocker size r_B, m"),
    ("antenna", "beam_bs", "pi/6", "BS beamwidth W, rad"),
    ("antenna", "beam_mu", "pi/6", "MU beamwidth w, rad"),
    ("antenna", "sidelobe_bs", "0.1", "BS sidelobe gain g_B"),
    ("antenna", "sidelobe_mu", "0.1", "MU sidelobe gain g_m"),
    ("antenna", "h_mode", "uniform", "uniform | like_f"),
    ("antenna", "psi_mode", "population", "population | uniform | fixed"),
    (
        "antenna",
        "psi_fixed",
        "pi/2",
        "bearing used when psi_mode = fixed, rad",
    ),
    ("link", "alpha_los", "2.2", "LOS path-loss exponent"),
    ("link", "alpha_nlos", "3.88", "NLOS path-loss exponent"),
    ("link", "a_los", "1", "LOS path-loss coefficient A_L"),
    ("link", "a_nlos", "1", "NLOS path-loss coefficient A_N"),
    ("link", "eta", "A_L·g_B·G_m", "association threshold η"),
    ("link", "noise_psd", "-147", "N₀, dBm/Hz"),
    ("link", "bandwidth", "1e8", "B, Hz"),
    ("link", "rate", "1e9", "R, bit/s"),
    ("link", "q_model", "sigmoid", "exponential | sigmoid"),
    ("link", "q_kappa", "1", "packet-success slope κ"),
    ("link", "q_order", "2", "sigmoid order M"),
    ("link", "assoc_mode", "clamp", "clamp | union"),
    ("dynamics", "p_max", "0.1", "W"),
    ("dynamics", "mu_phi", "pi/3", "orientation drift, rad/s"),
    ("dynamics", "sigma_phi", "pi/6", "orientation diffusion coefficient"),
    ("dynamics", "e_max", "100", "initial battery energy, J"),
    ("dynamics", "horizon", "1", "T, s"),
    ("dynamics", "phi_mean", "pi/2", "initial orientation mean, rad"),
    ("dynamics", "phi_var", "pi/4", "initial orientation variance, rad²"),
    ("dynamics", "ito_convention", "false", "diffusion σ²/2 instead of σ"),
    ("dynamics", "phi_boundary", "periodic", "periodic | absorbing"),
    ("grid", "n_phi", "64", ""),
    ("grid", "n_energy", "32", ""),
    ("grid", "n_time", "100", "output intervals"),
    ("grid", "n_power", "16", "power levels including 0"),
    ("grid", "power_decades", "14", "lowest level P_max·10^-decades"),
    ("grid", "power_refine", "true", "Brent refinement of the argmax"),
    ("grid", "n_r", "24", "quadrature nodes in r"),
    ("grid", "n_l", "24", "quadrature nodes in l"),
    ("mfe", "damping", "0.5", "τ"),
    ("mfe", "tol", "1e-6", ""),
    ("mfe", "max_iters", "50", ""),
    ("mfe", "z_time_varying", "false", ""),
    ("mfe", "baseline_sinr_db", "0", "baseline SNR target, dB"),
];

/// Number literal or a `pi` expression such as `"pi/3"`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or an expression like \"pi/3\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Num, E> {
                eval_expr(v).map(Num).map_err(E::custom)
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

/// Evaluates a product/quotient chain of numbers and `pi`, left to right.
fn eval_expr(text: &str) -> std::result::Result<f64, String> {
    let mut acc: Option<f64> = None;
    let mut op = '*';
    let mut token = String::new();
    let apply = |acc: Option<f64>, op: char, tok: &str| -> std::result::Result<f64, String> {
        let tok = tok.trim();
        let v = match tok {
            "pi" | "PI" | "π" => PI,
            _ => tok.parse::<f64>().map_err(|_| format!("cannot evaluate `{text}`"))?,
        };
        Ok(match (acc, op) {
            (None, _) => v,
            (Some(a), '*') => a * v,
            (Some(a), _) => a / v,
        })
    };
    for ch in text.chars() {
        if ch == '*' || ch == '/' {
            acc = Some(apply(acc, op, &token)?);
            token.clear();
            op = ch;
        } else {
            token.push(ch);
        }
    }
    apply(acc, op, &token)
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    network: Option<NetworkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    antenna: Option<AntennaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link: Option<LinkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dynamics: Option<DynamicsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mfe: Option<MfeSection>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    lambda_b: Option<Num>,
    lambda_u: Option<Num>,
    lambda_e: Option<Num>,
    r_max: Option<Num>,
    r_0: Option<Num>,
    r_blocker: Option<Num>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AntennaSection {
    beam_bs: Option<Num>,
    beam_mu: Option<Num>,
    sidelobe_bs: Option<Num>,
    sidelobe_mu: Option<Num>,
    h_mode: Option<HMode>,
    psi_mode: Option<String>,
    psi_fixed: Option<Num>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    alpha_los: Option<Num>,
    alpha_nlos: Option<Num>,
    a_los: Option<Num>,
    a_nlos: Option<Num>,
    eta: Option<Num>,
    noise_psd: Option<Num>,
    bandwidth: Option<Num>,
    rate: Option<Num>,
    q_model: Option<QModel>,
    q_kappa: Option<Num>,
    q_order: Option<u32>,
    assoc_mode: Option<AssocMode>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsSection {
    p_max: Option<Num>,
    mu_phi: Option<Num>,
    sigma_phi: Option<Num>,
    e_max: Option<Num>,
    horizon: Option<Num>,
    phi_mean: Option<Num>,
    phi_var: Option<Num>,
    ito_convention: Option<bool>,
    phi_boundary: Option<PhiBoundary>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n_phi: Option<usize>,
    n_energy: Option<usize>,
    n_time: Option<usize>,
    n_power: Option<usize>,
    power_decades: Option<Num>,
    power_refine: Option<bool>,
    n_r: Option<usize>,
    n_l: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MfeSection {
    damping: Option<Num>,
    tol: Option<Num>,
    max_iters: Option<usize>,
    z_time_varying: Option<bool>,
    baseline_sinr_db: Option<Num>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn toml_error(text: &str, err: toml::de::Error) -> Error {
    let line = err.span().map(|s| line_of(text, s.start)).unwrap_or(0);
    Error::Parse {
        line,
        message: err.message().to_string(),
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let doc: Document = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    resolve(doc)
}

/// Parses a document, applying `key=value` overrides first. Keys may be
/// qualified (`dynamics.mu_phi`) or bare when unambiguous (`mu_phi`).
pub fn parse_scenario_with_overrides(text: &str, overrides: &[String]) -> Result<Scenario> {
    let mut table: toml::Table = text.parse().map_err(|e| toml_error(text, e))?;
    for item in overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("override `{item}` is not key=value"),
        })?;
        let (section, key) = match key.trim().split_once('.') {
            Some((s, k)) => (s.to_string(), k.to_string()),
            None => {
                let key = key.trim();
                let section = DEFAULTS
                    .iter()
                    .find(|(_, k, _, _)| *k == key)
                    .map(|(s, _, _, _)| s.to_string())
                    .ok_or_else(|| Error::Parse {
                        line: 0,
                        message: format!("unknown override key `{key}`"),
                    })?;
                (section, key.to_string())
            }
        };
        let raw = raw.trim();
        let value: toml::Value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let entry = table
            .entry(section.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(key, value);
            }
            _ => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("`{section}` is not a section"),
                })
            }
        }
    }
    let doc = Document::deserialize(table).map_err(|e| Error::Parse {
        line: 0,
        message: e.message().to_string(),
    })?;
    resolve(doc)
}

fn num(v: Option<Num>, default: f64) -> f64 {
    v.map(|n| n.0).unwrap_or(default)
}

fn resolve(doc: Document) -> Result<Scenario> {
    let net = doc.network.unwrap_or_default();
    let ant = doc.antenna.unwrap_or_default();
    let link = doc.link.unwrap_or_default();
    let dy = doc.dynamics.unwrap_or_default();
    let gr = doc.grid.unwrap_or_default();
    let mf = doc.mfe.unwrap_or_default();

    let psi_mode = match ant.psi_mode.as_deref() {
        None | Some("population") => PsiMode::Population,
        Some("uniform") => PsiMode::Uniform,
        Some("fixed") => PsiMode::Fixed(num(ant.psi_fixed, PI / 2.0)),
        Some(other) => {
            return Err(Error::validation(format!(
                "psi_mode must be population, uniform or fixed, got `{other}`"
            )))
        }
    };

    let noise_psd_dbm_hz = num(link.noise_psd, -147.0);
    let mut s = Scenario {
        lambda_b: num(net.lambda_b, 0.08),
        lambda_u: num(net.lambda_u, 0.03),
        lambda_e: num(net.lambda_e, 0.01),
        r_max: num(net.r_max, 25.0),
        r_0: num(net.r_0, 15.0),
        r_blocker: num(net.r_blocker, 0.3),
        alpha_los: num(link.alpha_los, 2.2),
        alpha_nlos: num(link.alpha_nlos, 3.88),
        a_los: num(link.a_los, 1.0),
        a_nlos: num(link.a_nlos, 1.0),
        beam_bs: num(ant.beam_bs, PI / 6.0),
        beam_mu: num(ant.beam_mu, PI / 6.0),
        sidelobe_bs: num(ant.sidelobe_bs, 0.1),
        sidelobe_mu: num(ant.sidelobe_mu, 0.1),
        h_mode: ant.h_mode.unwrap_or(HMode::Uniform),
        psi_mode,
        eta: f64::NAN,
        noise_psd_dbm_hz,
        noise_psd: dbm_hz_to_w_hz(noise_psd_dbm_hz),
        bandwidth: num(link.bandwidth, 1e8),
        rate: num(link.rate, 1e9),
        q_model: link.q_model.unwrap_or(QModel::Sigmoid),
        q_kappa: num(link.q_kappa, 1.0),
        q_order: link.q_order.unwrap_or(2),
        assoc_mode: link.assoc_mode.unwrap_or(AssocMode::Clamp),
        p_max: num(dy.p_max, 0.1),
        mu_phi: num(dy.mu_phi, PI / 3.0),
        sigma_phi: num(dy.sigma_phi, PI / 6.0),
        e_max: num(dy.e_max, 100.0),
        horizon: num(dy.horizon, 1.0),
        phi_mean: num(dy.phi_mean, PI / 2.0),
        phi_var: num(dy.phi_var, PI / 4.0),
        ito_convention: dy.ito_convention.unwrap_or(false),
        phi_boundary: dy.phi_boundary.unwrap_or(PhiBoundary::Periodic),
        grid: GridSpec {
            n_phi: gr.n_phi.unwrap_or(64),
            n_energy: gr.n_energy.unwrap_or(32),
            n_time: gr.n_time.unwrap_or(100),
            n_power: gr.n_power.unwrap_or(16),
            power_decades: num(gr.power_decades, 14.0),
            power_refine: gr.power_refine.unwrap_or(true),
            n_r: gr.n_r.unwrap_or(24),
            n_l: gr.n_l.unwrap_or(24),
        },
        mfe: MfeSpec {
            damping: num(mf.damping, 0.5),
            tol: num(mf.tol, 1e-6),
            max_iters: mf.max_iters.unwrap_or(50),
            z_time_varying: mf.z_time_varying.unwrap_or(false),
            baseline_sinr_db: num(mf.baseline_sinr_db, 0.0),
        },
    };
    // Beamwidths are checked before the gains they feed are computed.
    check_beams(&s)?;
    s.eta = match link.eta {
        Some(n) => n.0,
        None => s.a_los * s.sidelobe_bs * main_lobe_gain(s.beam_mu)?,
    };
    s.validate()?;
    Ok(s)
}

pub fn dbm_hz_to_w_hz(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

fn check_beams(s: &Scenario) -> Result<()> {
    for (name, w) in [("beam_bs", s.beam_bs), ("beam_mu", s.beam_mu)] {
        if !(w > 0.0 && w <= 2.0 * PI) {
            return Err(Error::validation(format!("{name} must be in (0, 2π]")));
        }
    }
    Ok(())
}

impl Default for Scenario {
    fn default() -> Self {
        parse_scenario("").expect("built-in defaults are valid")
    }
}

impl Scenario {
    /// Checks every invariant of the record.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_b", self.lambda_b),
            ("r_max", self.r_max),
            ("r_0", self.r_0),
            ("r_blocker", self.r_blocker),
            ("alpha_los", self.alpha_los),
            ("alpha_nlos", self.alpha_nlos),
            ("a_los", self.a_los),
            ("a_nlos", self.a_nlos),
            ("eta", self.eta),
            ("bandwidth", self.bandwidth),
            ("rate", self.rate),
            ("q_kappa", self.q_kappa),
            ("p_max", self.p_max),
            ("e_max", self.e_max),
            ("horizon", self.horizon),
            ("phi_var", self.phi_var),
            ("tol", self.mfe.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be > 0")));
            }
        }
        // User and blocker densities may be zero (empty fields are legal limits).
        for (name, v) in [("lambda_u", self.lambda_u), ("lambda_e", self.lambda_e)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be >= 0")));
            }
        }
        for (name, v) in [("mu_phi", self.mu_phi), ("sigma_phi", self.sigma_phi)] {
            if !v.is_finite() {
                return Err(Error::validation(format!("{name} must be finite")));
            }
        }
        if self.sigma_phi < 0.0 {
            return Err(Error::validation("sigma_phi must be >= 0"));
        }
        if self.r_blocker >= self.r_0 {
            return Err(Error::validation("r_blocker must be < r_0"));
        }
        if self.r_0 > 2.0 * self.r_max {
            return Err(Error::validation("r_0 must be <= 2·r_max"));
        }
        check_beams(self)?;
        let big_b = main_lobe_gain(self.beam_bs)?;
        let big_m = main_lobe_gain(self.beam_mu)?;
        if !(self.sidelobe_bs > 0.0 && self.sidelobe_bs < big_b) {
            return Err(Error::validation("sidelobe_bs must be in (0, G_B)"));
        }
        if !(self.sidelobe_mu > 0.0 && self.sidelobe_mu < big_m) {
            return Err(Error::validation("sidelobe_mu must be in (0, G_m)"));
        }
        if let PsiMode::Fixed(psi) = self.psi_mode {
            if !psi.is_finite() {
                return Err(Error::validation("psi_fixed must be finite"));
            }
        }
        if self.q_model == QModel::Sigmoid && self.q_order < 2 {
            return Err(Error::validation("q_order must be >= 2 for the sigmoid model"));
        }
        let g = &self.grid;
        for (name, n) in [
            ("n_phi", g.n_phi),
            ("n_energy", g.n_energy),
            ("n_time", g.n_time),
            ("n_power", g.n_power),
            ("n_r", g.n_r),
            ("n_l", g.n_l),
        ] {
            if n < 4 {
                return Err(Error::validation(format!("{name} must be >= 4")));
            }
        }
        if !(g.power_decades > 0.0) {
            return Err(Error::validation("power_decades must be > 0"));
        }
        if !(self.mfe.damping > 0.0 && self.mfe.damping <= 1.0) {
            return Err(Error::validation("damping must be in (0, 1]"));
        }
        if self.mfe.max_iters == 0 {
            return Err(Error::validation("max_iters must be >= 1"));
        }
        Ok(())
    }

    /// Total blocker density λ = λ_b + λ_u + λ_e.
    pub fn lambda_blockers(&self) -> f64 {
        self.lambda_b + self.lambda_u + self.lambda_e
    }

    /// Thermal noise power N₀·B, W.
    pub fn noise_power(&self) -> f64 {
        self.noise_psd * self.bandwidth
    }

    /// Generator coefficient of the orientation diffusion.
    pub fn phi_diffusion(&self) -> f64 {
        if self.ito_convention {
            0.5 * self.sigma_phi * self.sigma_phi
        } else {
            self.sigma_phi
        }
    }

    /// Expected BS count in the disk, λ_b·π·r_max².
    pub fn expected_bs_count(&self) -> f64 {
        self.lambda_b * PI * self.r_max * self.r_max
    }

    /// Serializes back to the configuration format, with every key explicit.
    pub fn to_toml(&self) -> String {
        let (psi_mode, psi_fixed) = match self.psi_mode {
            PsiMode::Population => ("population", None),
            PsiMode::Uniform => ("uniform", None),
            PsiMode::Fixed(p) => ("fixed", Some(Num(p))),
        };
        let doc = Document {
            network: Some(NetworkSection {
                lambda_b: Some(Num(self.lambda_b)),
                lambda_u: Some(Num(self.lambda_u)),
                lambda_e: Some(Num(self.lambda_e)),
                r_max: Some(Num(self.r_max)),
                r_0: Some(Num(self.r_0)),
                r_blocker: Some(Num(self.r_blocker)),
            }),
            antenna: Some(AntennaSection {
                beam_bs: Some(Num(self.beam_bs)),
                beam_mu: Some(Num(self.beam_mu)),
                sidelobe_bs: Some(Num(self.sidelobe_bs)),
                sidelobe_mu: Some(Num(self.sidelobe_mu)),
                h_mode: Some(self.h_mode),
                psi_mode: Some(psi_mode.to_string()),
                psi_fixed,
            }),
            link: Some(LinkSection {
                alpha_los: Some(Num(self.alpha_los)),
                alpha_nlos: Some(Num(self.alpha_nlos)),
                a_los: Some(Num(self.a_los)),
                a_nlos: Some(Num(self.a_nlos)),
                eta: Some(Num(self.eta)),
                noise_psd: Some(Num(self.noise_psd_dbm_hz)),
                bandwidth: Some(Num(self.bandwidth)),
                rate: Some(Num(self.rate)),
                q_model: Some(self.q_model),
                q_kappa: Some(Num(self.q_kappa)),
                q_order: Some(self.q_order),
                assoc_mode: Some(self.assoc_mode),
            }),
            dynamics: Some(DynamicsSection {
                p_max: Some(Num(self.p_max)),
                mu_phi: Some(Num(self.mu_phi)),
                sigma_phi: Some(Num(self.sigma_phi)),
                e_max: Some(Num(self.e_max)),
                horizon: Some(Num(self.horizon)),
                phi_mean: Some(Num(self.phi_mean)),
                phi_var: Some(Num(self.phi_var)),
                ito_convention: Some(self.ito_convention),
                phi_boundary: Some(self.phi_boundary),
            }),
            grid: Some(GridSection {
                n_phi: Some(self.grid.n_phi),
                n_energy: Some(self.grid.n_energy),
                n_time: Some(self.grid.n_time),
                n_power: Some(self.grid.n_power),
                power_decades: Some(Num(self.grid.power_decades)),
                power_refine: Some(self.grid.power_refine),
                n_r: Some(self.grid.n_r),
                n_l: Some(self.grid.n_l),
            }),
            mfe: Some(MfeSection {
                damping: Some(Num(self.mfe.damping)),
                tol: Some(Num(self.mfe.tol)),
                max_iters: Some(self.mfe.max_iters),
                z_time_varying: Some(self.mfe.z_time_varying),
                baseline_sinr_db: Some(Num(self.mfe.baseline_sinr_db)),
            }),
        };
        toml::to_string(&doc).expect("scenario document serializes")
    }

    /// Short hex digest of the resolved scenario, embedded in every output.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
