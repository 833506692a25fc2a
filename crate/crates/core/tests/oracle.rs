//! Analytic laws against the Monte Carlo oracle on a sparse scenario.

use mmwave_mfg::antenna::UniformAngle;
use mmwave_mfg::association::association_law;
use mmwave_mfg::geometry::{nearest_bs_pdf, LinkKind};
use mmwave_mfg::montecarlo::{empirical_link_stats, ks_statistic, Shadowing};
use mmwave_mfg::Scenario;

fn sparse() -> Scenario {
    Scenario {
        lambda_b: 0.02,
        lambda_e: 0.05,
        r_blocker: 0.6,
        ..Scenario::default()
    }
}

#[test]
fn sparse_network_matches_closed_forms() {
    let s = sparse();
    for r in [5.0, 20.0] {
        let st = empirical_link_stats(&s, r, Shadowing::Independent, 31, 20_000).unwrap();
        for (kind, d) in [(LinkKind::Los, &st.los_distances), (LinkKind::Nlos, &st.nlos_distances)] {
            let pdf = nearest_bs_pdf(kind, r, &s).unwrap();
            let ks = ks_statistic(d, |l| pdf.cdf(l)).unwrap();
            assert!(ks <= 0.02, "r {r} {kind:?}: KS {ks}");
        }
        let law = association_law(r, &UniformAngle, 0.0, &s).unwrap();
        let se = (law.rho_los * (1.0 - law.rho_los) / st.n as f64).sqrt();
        assert!(
            (st.serves_los.p() - law.rho_los).abs() <= 3.0 * se,
            "r {r}: {} vs {}",
            st.serves_los.p(),
            law.rho_los
        );
        // sparse networks leave users without any BS in range
        assert!(st.outage.hits > 0);
    }
}
