use condred::config::{Scenario, StudyConfig};
use condred::convergence::{error_curve, fit_rate, run_study, ConvergenceReport, LimitPair};
use condred::Error;

fn small(scenario: Scenario) -> StudyConfig {
    let mut c = StudyConfig::for_scenario(scenario);
    c.grid.nx = 128;
    c.sweep.t_final = 0.25;
    c.sweep.num_records = 10;
    c.sweep.guard = false;
    c.output.timing = false;
    c
}

#[test]
fn small_study_is_complete_and_deterministic() {
    let cfg = small(Scenario::PolarizedBaseline);
    let a = run_study(&cfg).unwrap();
    assert!(a.complete, "{:?}", a.failures);
    assert_eq!(a.cells.len(), 20);
    assert!(a.cells.iter().all(|c| c.error >= 0.0 && c.seconds == 0.0));
    assert_eq!(a.slopes.len(), 5);
    let b = run_study(&cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a, b);

    let csv = a.to_csv();
    assert_eq!(csv.lines().next().unwrap(), "pair,eps,alpha,error_bm2,seconds");
    assert_eq!(csv.lines().count(), 21);

    let back = ConvergenceReport::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back, a);

    let svg = a.to_svg();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let root = doc.root_element();
    assert_eq!(root.attribute("viewBox"), Some("0 0 800 600"));
    let curves: Vec<&str> = root.descendants().filter(|n| n.has_tag_name("polyline")).filter_map(|n| n.attribute("data-pair")).collect();
    assert_eq!(curves, ["eq17", "eq18", "eq19", "eq20", "eq21"]);
    let guides: Vec<&str> = root.descendants().filter(|n| n.attribute("class") == Some("guide")).filter_map(|n| n.attribute("data-slope")).collect();
    assert_eq!(guides, ["1", "2"]);
}

#[test]
fn halving_the_parameter_never_grows_the_error() {
    let report = run_study(&small(Scenario::TwoMode)).unwrap();
    for p in LimitPair::STUDY {
        let mut curve = report.curve(p);
        curve.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        for w in curve.windows(2) {
            assert!(w[1].1 <= 1.2 * w[0].1, "{}: {:?}", p.tag(), curve);
        }
    }
}

#[test]
fn dispersionless_averaging_error_decreases() {
    let cfg = small(Scenario::PolarizedBaseline);
    let (xs, errs) = error_curve(LimitPair::AveragingNoDispersion, 0.0, &[0.5, 0.4, 0.3, 0.2], &cfg).unwrap();
    assert_eq!(xs, [0.5, 0.4, 0.3, 0.2]);
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
    let (s, _) = fit_rate(&xs, &errs).unwrap();
    assert!(s > 1.5, "slope {s}");
}

#[test]
fn identical_solvers_agree() {
    let mut cfg = small(Scenario::Tilted);
    cfg.sweep.pairs = vec![LimitPair::Identity];
    let report = run_study(&cfg).unwrap();
    assert_eq!(report.cells.len(), cfg.sweep.eps.len());
    assert!(report.cells.iter().all(|c| c.error <= 1e-12));
}

#[test]
fn global_error_obeys_triangle_inequality() {
    let cfg = small(Scenario::PolarizedBaseline);
    for eps in [0.4, 0.3] {
        let alpha = eps * eps;
        let (_, full_vs_limit) = error_curve(LimitPair::Global, 0.0, &[eps], &cfg).unwrap();
        let (_, full_vs_avg) = error_curve(LimitPair::Averaging, alpha, &[eps], &cfg).unwrap();
        let (_, avg_vs_limit) = error_curve(LimitPair::SemiclassicalAveraged, 0.0, &[alpha], &cfg).unwrap();
        assert!(full_vs_limit[0] <= full_vs_avg[0] + avg_vs_limit[0] + 1e-12, "{full_vs_limit:?} {full_vs_avg:?} {avg_vs_limit:?}");
        assert!(full_vs_limit[0] > 0.0);
    }
}

#[test]
fn error_curve_matches_study_cells() {
    let mut cfg = small(Scenario::PolarizedBaseline);
    cfg.sweep.pairs = vec![LimitPair::Semiclassical];
    let report = run_study(&cfg).unwrap();
    let (xs, errs) = error_curve(LimitPair::Semiclassical, cfg.sweep.fixed_eps, &cfg.sweep.alpha, &cfg).unwrap();
    let curve = report.curve(LimitPair::Semiclassical);
    assert_eq!(curve, xs.into_iter().zip(errs).collect::<Vec<_>>());
}

#[test]
fn single_point_sweeps_have_no_slopes() {
    let cfg = small(Scenario::PolarizedBaseline).with_eps(0.4).with_alpha(0.2);
    let report = run_study(&cfg).unwrap();
    assert!(report.complete);
    assert!(report.slopes.is_empty());
    assert_eq!(report.warnings.len(), 5);
    assert_eq!(report.cells.len(), 5);
}

#[test]
fn guard_reruns_smallest_cell() {
    let mut cfg = small(Scenario::PolarizedBaseline);
    cfg.sweep.guard = true;
    cfg.sweep.eps = vec![0.5, 0.4];
    cfg.sweep.pairs = vec![LimitPair::AveragingNoDispersion];
    let report = run_study(&cfg).unwrap();
    assert_eq!(report.guards.len(), 1);
    let g = &report.guards[0];
    assert_eq!(g.eps, 0.4);
    assert!(g.passed && g.relative_change < 0.1, "{g:?}");
}

#[test]
fn failing_cells_are_tagged() {
    let mut cfg = small(Scenario::FocusingPhase);
    cfg.sweep.t_final = 1.2;
    cfg.sweep.pairs = vec![LimitPair::AveragingNoDispersion];
    let report = run_study(&cfg).unwrap();
    assert!(!report.complete);
    assert_eq!(report.failures.len(), 4);
    assert!(report.failures.iter().all(|f| f.numerical && f.cell.starts_with("eq18 eps=")));
    assert!(report.failures[0].message.contains("caustic reached"));

    match error_curve(LimitPair::AveragingNoDispersion, 0.0, &[0.3], &cfg) {
        Err(e @ Error::Cell { .. }) => {
            assert!(e.is_numerical());
            assert!(e.to_string().contains("eq18 eps=0.3"), "{e}");
        }
        r => panic!("expected a cell error, got {r:?}"),
    }
}
