use hdxcolor::certificates::{run_regime, CertError, CertificateParams, Regime, RegimeReport};
use hdxcolor::complex::build_complex;
use hdxcolor::graphs::{Graph, Kind, ListColoringInstance};
use hdxcolor::io::load_instance;
use hdxcolor::sampler::{down_up_gap, exact_mixing, run_chain, run_chains, MixingReport, TMix};
use hdxcolor::spectral::{down_up_gap_bound, local_profile, SpectralProfile};
use hdxcolor::trickledown::Variant;

fn proper(inst: &ListColoringInstance, c: &[u32]) -> bool {
    let g = inst.conflict_graph();
    (0..c.len())
        .all(|x| inst.list(x).contains(&c[x]) && g.neighbors(x).iter().all(|&y| c[y] != c[x]))
}

#[test]
fn files_to_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("p3.txt");
    std::fs::write(&g, "# path on three vertices\n3 2\n0 1\n1 2\n").unwrap();
    let l = dir.path().join("lists.json");
    std::fs::write(&l, r#"{"1": [1, 2, 3], "all": 2}"#).unwrap();
    let inst = load_instance(&g, l.to_str().unwrap(), Kind::Vertex).unwrap();
    let x = build_complex(&inst, 1000).unwrap();
    // middle color 3 leaves 2·2 choices, middle 1 or 2 forces both ends
    assert_eq!(x.facet_count(), 6);
    let profile = local_profile(&x).unwrap();
    let gap = down_up_gap(&x).unwrap();
    assert!(gap.ergodic);
    assert!(gap.exact_gap >= down_up_gap_bound(&profile) - 1e-12);
    let back: SpectralProfile =
        serde_json::from_str(&serde_json::to_string(&profile).unwrap()).unwrap();
    assert_eq!(back, profile);
}

#[test]
fn regimes_end_to_end() {
    let cases = [
        (
            ListColoringInstance::uniform(Kind::Vertex, Graph::path(2), 3).unwrap(),
            Regime::Vertex2Delta,
            1.0,
        ),
        (
            ListColoringInstance::uniform(Kind::Vertex, Graph::star(3), 5).unwrap(),
            Regime::VertexTree,
            1.0,
        ),
        (
            ListColoringInstance::uniform(Kind::Edge, Graph::path(4), 5).unwrap(),
            Regime::Edge,
            0.1,
        ),
    ];
    for (inst, regime, eps) in cases {
        let params = CertificateParams::for_instance(&inst, regime, eps, None).unwrap();
        let x = build_complex(&inst, 5000).unwrap();
        for variant in [Variant::Inductive, Variant::Full] {
            let report = run_regime(&x, &params, variant).unwrap();
            assert!(report.sound(), "{regime:?}");
            let text = serde_json::to_string(&report).unwrap();
            let back: RegimeReport = serde_json::from_str(&text).unwrap();
            assert_eq!(back, report);
        }
    }
    // Δ = 2, ε = 0.1: the f₂ denominator is negative
    let inst = ListColoringInstance::uniform(Kind::Vertex, Graph::path(3), 8).unwrap();
    let err = CertificateParams::for_instance(&inst, Regime::Vertex2Delta, 0.1, None)
        .and_then(|p| run_regime(&build_complex(&inst, 5000).unwrap(), &p, Variant::Full));
    assert!(matches!(err, Err(CertError::RegimeViolation(_))));
}

#[test]
fn chains_and_exact_mixing_on_edges() {
    let inst = ListColoringInstance::uniform(Kind::Edge, Graph::star(3), 4).unwrap();
    let seeds: Vec<u64> = (0..8).collect();
    let runs = run_chains(&inst, 200, &seeds).unwrap();
    for (seed, r) in seeds.iter().zip(&runs) {
        assert_eq!(r, &run_chain(&inst, 200, *seed).unwrap());
        let c: Vec<u32> = r.coloring.values().copied().collect();
        assert!(proper(&inst, &c));
    }
    let report = exact_mixing(&inst, 5000, 80).unwrap();
    // K3 line graph with 4 colors: 24 colorings
    assert_eq!(report.facets, 24);
    assert!(report.ergodic);
    assert!(report.exact_gap >= report.gap_lower_bound - 1e-12);
    assert!(matches!(report.t_mix, TMix::Steps(t) if t <= 80));
    let back: MixingReport =
        serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(back, report);
}
