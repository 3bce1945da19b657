use std::path::PathBuf;

use ncrep::instance::{self, describe_parts, from_str, to_string};
use ncrep::CliError;
use ncrep_core::matrix::{matrix_unit, max_abs};
use ncrep_core::random::{random_block_instance, rng};
use ncrep_core::states::PositiveFunctional;

fn file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("instances").join(name)
}

const VALID: [&str; 4] = ["t2_d2.json", "t2_d2_state.json", "m3_corner.json", "skew_d2.json"];

#[test]
fn canonical_t2_file_is_valid() {
    let inst = instance::load(&file("t2_d2.json")).unwrap();
    assert_eq!((inst.n, inst.d.dim()), (2, 2));
    assert_eq!(inst.a.as_ref().unwrap().dim(), 3);
    assert!(inst.tracial);
    let phi = inst.phi.unwrap();
    assert!(max_abs(&phi.apply(&matrix_unit(2, 0, 1))) == 0.0);
    assert!(max_abs(&(phi.apply(&matrix_unit(2, 1, 1)) - matrix_unit(2, 1, 1))) == 0.0);
}

#[test]
fn non_multiplicative_character_is_rejected() {
    let err = instance::load(&file("bad_character.json")).unwrap_err();
    assert_eq!(err.invariant(), Some("multiplicative"), "{err}");
}

#[test]
fn wrong_dimension_density_is_a_parse_error() {
    let err = instance::load(&file("wrong_dimension_density.json")).unwrap_err();
    assert!(matches!(err, CliError::Parse(_)), "{err}");
}

#[test]
fn malformed_descriptions_are_parse_errors() {
    let cases = [
        r#"{"n": 2, "D": {"blocks": [[0], [1]]}, "state": {"tracial": true}}"#,
        r#"{"n": 2, "D": {"blocks": [[1], [2]], "generators": []}, "state": {"tracial": true}}"#,
        r#"{"n": 2, "D": {}, "state": {"tracial": true}}"#,
        r#"{"n": 2, "D": {"blocks": [[1, 2]]}, "state": {"tracial": true}, "extra": 1}"#,
        r#"{"n": 2, "D": {"blocks": [[1, 2]]}, "state": {"tracial": true}, "character": {"block_compression": true}}"#,
        r#"{"n": 2, "D": {"blocks": [[1], [2]]}, "A": {"triangular_over": [[1, 2]]}, "state": {"tracial": true}, "character": {"block_compression": true}}"#,
        r#"{"n": 2, "D": {"blocks": [[1, 2]]}, "state": {"density": [[[1, 0]], [[0, 0]]]}}"#,
        r#"{"n": 2, "D": {"blocks": [[1, 2]]}"#,
    ];
    for c in cases {
        let res = from_str(c).and_then(|d| d.build());
        assert!(matches!(res, Err(CliError::Parse(_))), "{c}");
    }
}

#[test]
fn structural_violations_are_reported() {
    let not_positive =
        r#"{"n": 2, "D": {"blocks": [[1, 2]]}, "state": {"density": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]}}"#;
    assert!(matches!(from_str(not_positive).unwrap().build(), Err(CliError::Invalid(_))));
    let bad_partition = r#"{"n": 3, "D": {"blocks": [[1], [1, 2]]}, "state": {"tracial": true}}"#;
    assert!(matches!(from_str(bad_partition).unwrap().build(), Err(CliError::Invalid(_))));
    // The unital algebra generated by E₂₁ is span{I, E₂₁}, which misses D₂.
    let d_outside_a = r#"{"n": 2, "D": {"blocks": [[1], [2]]}, "A": {"generators": [[[[0, 0], [1, 0]], [[0, 0], [0, 0]]]]}, "state": {"tracial": true}}"#;
    let err = from_str(d_outside_a).unwrap().build().unwrap_err();
    assert_eq!(err.invariant(), Some("D ⊆ A"));
}

#[test]
fn text_round_trip_is_exact() {
    for name in VALID {
        let desc = instance::read_description(&file(name)).unwrap();
        let again = from_str(&to_string(&desc)).unwrap();
        assert_eq!(desc, again, "{name}");
    }
}

fn assert_same(a: &instance::Instance, b: &instance::Instance) {
    assert_eq!(a.n, b.n);
    assert!(a.d.space().distance(b.d.space()) < 1e-12);
    match (&a.a, &b.a) {
        (Some(x), Some(y)) => assert!(x.space().distance(y.space()) < 1e-12),
        (None, None) => {}
        _ => panic!("A present on one side only"),
    }
    assert!(max_abs(&(a.state.density() - b.state.density())) < 1e-15);
    match (&a.phi, &b.phi) {
        (Some(x), Some(y)) => {
            for e in x.domain().basis() {
                assert!(max_abs(&(x.apply(&e) - y.apply(&e))) < 1e-12);
            }
        }
        (None, None) => {}
        _ => panic!("character present on one side only"),
    }
}

#[test]
fn generator_form_round_trip() {
    for name in VALID {
        let inst = instance::load(&file(name)).unwrap();
        let text = to_string(&inst.describe());
        let back = from_str(&text).unwrap().build().unwrap();
        assert_same(&inst, &back);
    }
}

#[test]
fn conjugated_random_instances_round_trip() {
    let mut r = rng(11);
    for n in 2..6 {
        let bi = random_block_instance(&mut r, n, true).unwrap();
        let tau = PositiveFunctional::tracial(n);
        let desc = describe_parts(&bi.d, Some(&bi.a), &tau, Some(&bi.phi));
        let inst = from_str(&to_string(&desc)).unwrap().build().unwrap();
        let again = from_str(&to_string(&inst.describe())).unwrap().build().unwrap();
        assert_same(&inst, &again);
        assert!(inst.d.space().distance(bi.d.space()) < 1e-12);
    }
}
