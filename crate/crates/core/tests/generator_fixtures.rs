//! Every generator builder against an independently computed dense matrix.
//!
//! The fixtures were produced by a separate implementation (NumPy, explicit
//! Kronecker products, no shared code) at small truncations, so agreement
//! here checks the vectorization convention, tensor-factor ordering, and
//! every coefficient in each model.

mod common;

use common::{load_matrix, max_abs_diff};
use fbme_core::models::{
    build_ao_adiabatic, build_ao_compound, build_eo_mode_adiabatic,
    build_eo_mode_compound_transformed, build_eo_tla_adiabatic, build_eo_tla_compound,
    build_jc_adiabatic, build_jc_compound_interaction, build_kerr, build_no_feedback,
    build_simple_feedback, AoForm, EoTlaForm,
};
use fbme_core::{AncillaKind, AncillaParams, SuperOp, SystemParams};

const TOL: f64 = 1e-12;

fn sys4() -> SystemParams {
    SystemParams::new(0.3, 0.7, 3).unwrap()
}

fn sys3() -> SystemParams {
    SystemParams::new(0.3, 0.7, 2).unwrap()
}

fn check(l: &SuperOp, fixture: &str) {
    let want = load_matrix(fixture);
    let got = l.to_dense();
    let d = max_abs_diff(&got, &want);
    assert!(d < TOL, "{fixture}: max deviation {d:.3e}");
}

#[test]
fn no_feedback_matches_fixture() {
    check(&build_no_feedback(&sys4()).unwrap(), "gen_no_feedback.txt");
}

#[test]
fn simple_feedback_matches_fixture() {
    check(&build_simple_feedback(&sys4()).unwrap(), "gen_simple.txt");
}

#[test]
fn eo_tla_adiabatic_matches_fixture() {
    check(
        &build_eo_tla_adiabatic(&sys4(), EoTlaForm::Closed).unwrap(),
        "gen_eo_tla_adiabatic.txt",
    );
}

#[test]
fn ao_adiabatic_matches_fixture() {
    check(&build_ao_adiabatic(&sys4(), AoForm::Rational).unwrap(), "gen_ao_adiabatic.txt");
}

#[test]
fn kerr_matches_fixture() {
    check(&build_kerr(&sys4()).unwrap(), "gen_kerr.txt");
}

#[test]
fn eo_mode_adiabatic_matches_fixture() {
    // gamma/eps^2 = 0.004 in the fixture header, i.e. diffusion setting 0.002
    let anc = AncillaParams::eo_mode_linked(2.3, 0.7, 0.002, 4).unwrap();
    assert!((anc.gamma / (anc.epsilon * anc.epsilon) - 0.004).abs() < 1e-15);
    check(&build_eo_mode_adiabatic(&sys4(), &anc).unwrap(), "gen_eo_mode_adiabatic.txt");
}

#[test]
fn eo_tla_compound_matches_fixture() {
    let anc = AncillaParams::tla_detuned(2.3, 1.1, 0.4);
    check(&build_eo_tla_compound(&sys3(), &anc).unwrap(), "gen_eo_tla_compound.txt");
}

#[test]
fn ao_tla_compound_matches_fixture() {
    let anc = AncillaParams::tla(2.3, 1.1);
    check(
        &build_ao_compound(&sys3(), &anc, AncillaKind::TwoLevel).unwrap(),
        "gen_ao_tla_compound.txt",
    );
}

#[test]
fn ao_mode_compound_matches_fixture() {
    let anc = AncillaParams::mode(2.3, 1.1, 3);
    check(
        &build_ao_compound(&sys3(), &anc, AncillaKind::Mode).unwrap(),
        "gen_ao_mode_compound.txt",
    );
}

#[test]
fn jc_compound_matches_fixture() {
    let anc = AncillaParams::tla_detuned(2.3, 1.1, 3.7);
    check(
        &build_jc_compound_interaction(&sys3(), &anc).unwrap(),
        "gen_jc_compound.txt",
    );
}

#[test]
fn jc_adiabatic_matches_fixture() {
    let anc = AncillaParams::tla_detuned(2.3, 1.1, 3.7);
    check(&build_jc_adiabatic(&sys4(), &anc).unwrap(), "gen_jc_adiabatic.txt");
}

#[test]
fn transformed_eo_mode_at_zero_filter_matches_fixture() {
    let anc = AncillaParams::mode(2.3, 1.1, 3);
    let model = build_eo_mode_compound_transformed(&sys3(), &anc).unwrap();
    check(&model.frozen(0.0).unwrap(), "gen_eo_mode_static.txt");
}
