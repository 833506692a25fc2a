//! Browser bindings: distance laws, association curves and sampled networks.
//!
//! Every entry point takes a scenario in TOML (empty for the defaults) and
//! returns JSON text.

use mmwave_mfg::antenna::UniformAngle;
use mmwave_mfg::association::association_law;
use mmwave_mfg::geometry::{nearest_bs_pdf, LinkKind};
use mmwave_mfg::montecarlo::{sample_indexed, Obstacles};
use mmwave_mfg::{parse_scenario, Scenario};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn scenario(config: &str) -> Result<Scenario, JsError> {
    let s = parse_scenario(config).map_err(|e| JsError::new(&e.to_string()))?;
    s.validate().map_err(|e| JsError::new(&e.to_string()))?;
    Ok(s)
}

fn js(e: mmwave_mfg::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Conditional nearest LOS/NLOS BS distance densities for a user at `r`.
#[wasm_bindgen]
pub fn distance_laws(config: &str, r: f64, points: usize) -> Result<String, JsError> {
    let s = scenario(config)?;
    let los = nearest_bs_pdf(LinkKind::Los, r, &s).map_err(js)?;
    let nlos = nearest_bs_pdf(LinkKind::Nlos, r, &s).map_err(js)?;
    let n = points.max(2);
    let l: Vec<f64> = (0..n).map(|k| s.r_0 * k as f64 / (n - 1) as f64).collect();
    Ok(json!({
        "l": l,
        "f_los": l.iter().map(|&x| los.evaluate(x)).collect::<Vec<_>>(),
        "f_nlos": l.iter().map(|&x| nlos.evaluate(x)).collect::<Vec<_>>(),
        "b_los": los.normalizer,
        "b_nlos": nlos.normalizer,
    })
    .to_string())
}

/// LOS and NLOS association probabilities across the disk.
#[wasm_bindgen]
pub fn association_curve(config: &str, points: usize) -> Result<String, JsError> {
    let s = scenario(config)?;
    let n = points.max(2);
    let mut r = Vec::with_capacity(n);
    let mut rho_los = Vec::with_capacity(n);
    let mut rho_nlos = Vec::with_capacity(n);
    for k in 0..n {
        let x = s.r_max * k as f64 / (n - 1) as f64;
        let law = association_law(x, &UniformAngle, 0.0, &s).map_err(js)?;
        r.push(x);
        rho_los.push(law.rho_los);
        rho_nlos.push(law.rho_nlos_direct);
    }
    Ok(json!({ "r": r, "rho_los": rho_los, "rho_nlos": rho_nlos }).to_string())
}

/// One network realization, with every BS within r_0 of a probe user at
/// `(probe_r, 0)` marked LOS or NLOS.
#[wasm_bindgen]
pub fn sample_network(config: &str, seed: u64, probe_r: f64) -> Result<String, JsError> {
    let s = scenario(config)?;
    let net = sample_indexed(&s, seed, 0);
    let obstacles = Obstacles::of(&net, &s);
    let probe = [probe_r, 0.0];
    let links: Vec<_> = net
        .bs
        .iter()
        .filter(|b| (b[0] - probe[0]).hypot(b[1] - probe[1]) <= s.r_0)
        .map(|b| json!({ "bs": b, "los": !obstacles.blocked(probe, *b) }))
        .collect();
    Ok(json!({
        "r_max": s.r_max,
        "r_0": s.r_0,
        "r_blocker": s.r_blocker,
        "probe": probe,
        "bs": net.bs,
        "mu": net.mu,
        "blockers": net.blockers,
        "links": links,
    })
    .to_string())
}
