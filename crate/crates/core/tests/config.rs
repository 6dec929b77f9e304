use condred::config::{OutputFormat, Scenario, StudyConfig};
use condred::convergence::LimitPair;
use condred::eikonal::InitialPhase;
use condred::field::InitialAmplitude;
use condred::Error;
use proptest::prelude::*;

#[test]
fn quadratic_phase_section() {
    let c = StudyConfig::from_toml_str("[phase]\nkind = \"quadratic\"\nc = -0.3\n").unwrap();
    assert_eq!(c.phase, InitialPhase::Quadratic { c: -0.3 });
    assert_eq!(c.scenario, Scenario::PolarizedBaseline);
}

#[test]
fn scientific_notation_and_lists() {
    let text = r#"
scenario = "tilted"
[grid]
nx = 128
half_width = 1.2e1
[sweep]
eps = [5e-1, 4.0e-1, 0.3]
pairs = ["eq18", "debug"]
[output]
formats = ["json"]
timing = false
"#;
    let c = StudyConfig::from_toml_str(text).unwrap();
    assert_eq!(c.grid.nx, 128);
    assert_eq!(c.grid.half_width, 12.0);
    assert_eq!(c.sweep.eps, [0.5, 0.4, 0.3]);
    assert_eq!(c.sweep.pairs, [LimitPair::AveragingNoDispersion, LimitPair::Identity]);
    assert_eq!(c.output.formats, [OutputFormat::Json]);
    assert_eq!(c.phase, InitialPhase::Linear { b: vec![0.5] });
}

#[test]
fn nx_must_be_power_of_two() {
    match StudyConfig::from_toml_str("[grid]\nnx = 100\n") {
        Err(Error::Validation { key, .. }) => assert_eq!(key, "grid.nx"),
        r => panic!("{r:?}"),
    }
}

#[test]
fn unknown_key_in_tagged_section_points_at_section() {
    match StudyConfig::from_toml_str("[grid]\nnx = 64\n[phase]\nkind = \"quadratic\"\nc = -0.3\nd = 1.0\n") {
        Err(Error::Parse { line, msg }) => {
            assert_eq!(line, 3);
            assert!(msg.contains("unknown field `d`"), "{msg}");
        }
        r => panic!("{r:?}"),
    }
}

#[test]
fn parse_errors_carry_lines() {
    for (text, line) in [
        ("scenario = \"nowhere\"\n", 1),
        ("[sweep]\neps = 0.5\n", 2),
        ("[grid]\nnx = 64\nnum_modes = 1e3\n", 3),
        ("[output]\nformats = [\"pdf\"]\n", 2),
        ("[grid\n", 1),
    ] {
        match StudyConfig::from_toml_str(text) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
            r => panic!("{text}: {r:?}"),
        }
    }
}

fn arb_config() -> impl Strategy<Value = StudyConfig> {
    (
        prop::sample::select(Scenario::ALL.to_vec()),
        prop::sample::select(vec![32usize, 64, 128, 256]),
        4usize..40,
        prop::collection::vec(0.01f64..1.0, 1..6),
        prop::collection::vec(0.01f64..1.0, 1..6),
        0.01f64..2.0,
        prop::option::of(-2.0f64..2.0),
        0.2f64..3.0,
        any::<bool>(),
    )
        .prop_map(|(s, nx, modes, eps, alpha, t, c, width, guard)| {
            let mut cfg = StudyConfig::for_scenario(s);
            cfg.grid.nx = nx;
            cfg.grid.num_modes = modes;
            cfg.grid.num_quad = 3 * modes;
            cfg.sweep.eps = eps;
            cfg.sweep.alpha = alpha;
            cfg.sweep.t_final = t;
            cfg.sweep.guard = guard;
            if let Some(c) = c {
                cfg.phase = InitialPhase::Quadratic { c };
            }
            if let InitialAmplitude::TwoMode { width: w, .. } | InitialAmplitude::PolarizedGaussian { width: w, .. } = &mut cfg.amplitude {
                *w = width;
            }
            cfg
        })
}

proptest! {
    #[test]
    fn parse_serialize_is_a_fixed_point(cfg in arb_config()) {
        let text = cfg.to_toml_string().unwrap();
        let back = StudyConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml_string().unwrap(), text);
    }
}
