use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use ctt_core::dataset::Example;
use ctt_core::evaluation::Label;
use ctt_core::surrogate::{FeatureScale, Hyperparameters, SurrogateModel, Task};
use ctt_ffi::*;

fn toy_text() -> CString {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/toy.ctt");
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

fn last_error() -> String {
    let p = ctt_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn instance_counts_and_evaluation() {
    let text = toy_text();
    let mut instance = ptr::null_mut();
    unsafe {
        assert_eq!(
            ctt_instance_parse(text.as_ptr(), &mut instance),
            CttStatus::Ok
        );
        assert!(ctt_last_error().is_null());
        assert_eq!(ctt_instance_num_events(instance), 4);
        assert_eq!(ctt_instance_num_room_period_pairs(instance), 8);

        let mut report = CttReport::default();
        let slots = [7u64, 0, 3, 1];
        assert_eq!(
            ctt_evaluate(instance, slots.as_ptr(), 4, &mut report),
            CttStatus::Ok
        );
        assert_eq!(
            report.hard_total,
            report.hc1 + report.hc2 + report.hc3 + report.hc4 + report.hc5
        );

        let partial = [CTT_UNASSIGNED, 0, 3, 1];
        assert_eq!(
            ctt_evaluate(instance, partial.as_ptr(), 4, &mut report),
            CttStatus::Ok
        );
        assert!(report.hc1 >= 1);
        assert_eq!(report.soft_total, 0);

        let short = [0u64];
        assert_eq!(
            ctt_evaluate(instance, short.as_ptr(), 1, &mut report),
            CttStatus::InvalidArgument
        );
        ctt_instance_free(instance);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let bad = CString::new("Name: x\nCourses: nope\n").unwrap();
    let mut instance = ptr::null_mut();
    unsafe {
        assert_eq!(
            ctt_instance_parse(bad.as_ptr(), &mut instance),
            CttStatus::Parse
        );
        assert!(instance.is_null());
        assert!(last_error().starts_with("line 2"));

        assert_eq!(
            ctt_instance_parse(ptr::null(), &mut instance),
            CttStatus::NullPointer
        );
        let missing = CString::new("/nonexistent/x.ctt").unwrap();
        assert_eq!(
            ctt_instance_load(missing.as_ptr(), &mut instance),
            CttStatus::Io
        );
        assert!(last_error().contains("x.ctt"));

        let invalid = [0xffu8, 0];
        assert_eq!(
            ctt_instance_parse(invalid.as_ptr().cast(), &mut instance),
            CttStatus::InvalidUtf8
        );
        assert_eq!(ctt_instance_num_events(ptr::null()), 0);
        ctt_instance_free(ptr::null_mut());
        ctt_solution_free(ptr::null_mut());
        ctt_model_free(ptr::null_mut());
        ctt_string_free(ptr::null_mut());
    }
}

#[test]
fn solve_writes_dataset_and_solution() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = CString::new(dir.path().join("toy.csv").to_str().unwrap()).unwrap();
    let text = toy_text();
    let mut config = ctt_ga_config_default();
    config.rng_seed = 42;
    config.max_evaluations = 2_000;
    unsafe {
        let mut instance = ptr::null_mut();
        assert_eq!(
            ctt_instance_parse(text.as_ptr(), &mut instance),
            CttStatus::Ok
        );
        let mut solution = ptr::null_mut();
        assert_eq!(
            ctt_solve(instance, &config, dataset.as_ptr(), &mut solution),
            CttStatus::Ok
        );
        assert_eq!(ctt_solution_is_feasible(solution), 1);
        assert!(ctt_solution_evaluations(solution) <= 2_000);

        let mut slots = [0u64; 4];
        assert_eq!(
            ctt_solution_slots(solution, slots.as_mut_ptr(), 4),
            CttStatus::Ok
        );
        let mut report = CttReport::default();
        assert_eq!(
            ctt_evaluate(instance, slots.as_ptr(), 4, &mut report),
            CttStatus::Ok
        );
        assert_eq!(report.hard_total, 0);
        assert_eq!(report.soft_total, ctt_solution_fitness(solution));
        assert_eq!(
            ctt_solution_slots(solution, slots.as_mut_ptr(), 3),
            CttStatus::InvalidArgument
        );

        let mut out = ptr::null_mut();
        assert_eq!(
            ctt_solution_text(instance, solution, &mut out),
            CttStatus::Ok
        );
        assert_eq!(CStr::from_ptr(out).to_str().unwrap().lines().count(), 4);
        ctt_string_free(out);

        ctt_solution_free(solution);
        ctt_instance_free(instance);
    }
    let rows = std::fs::read_to_string(dir.path().join("toy.csv")).unwrap();
    assert!(rows.lines().count() > 1);

    config.population_size = 0;
    let mut solution = ptr::null_mut();
    unsafe {
        let mut instance = ptr::null_mut();
        ctt_instance_parse(text.as_ptr(), &mut instance);
        assert_eq!(
            ctt_solve(instance, &config, ptr::null(), &mut solution),
            CttStatus::InvalidArgument
        );
        ctt_instance_free(instance);
    }
}

#[test]
fn model_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.model");
    let examples: Vec<Example> = (0..20u32)
        .map(|i| Example {
            features: vec![i % 5, i % 3],
            fitness: u64::from(i % 5 + 2 * (i % 3)),
            label: Label::Feasible,
        })
        .collect();
    let refs: Vec<&Example> = examples.iter().collect();
    let scale = FeatureScale::for_alleles(2, 5).unwrap();
    SurrogateModel::train(Task::Regression, &refs, scale, Hyperparameters::default())
        .unwrap()
        .save(&path)
        .unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    let status = unsafe { ctt_model_load(c_path.as_ptr(), &mut model) };
    if status != CttStatus::Ok {
        panic!("{}", last_error());
    }
    unsafe {
        assert_eq!(ctt_model_is_classifier(model), 0);
        let x = [1u32, 2];
        let mut y = 0.0;
        assert_eq!(
            ctt_model_predict_fitness(model, x.as_ptr(), 2, &mut y),
            CttStatus::Ok
        );
        assert!(y.is_finite());
        let mut f = 0;
        assert_eq!(
            ctt_model_predict_feasible(model, x.as_ptr(), 2, &mut f),
            CttStatus::WrongTask
        );
        assert_eq!(
            ctt_model_predict_fitness(model, x.as_ptr(), 1, &mut y),
            CttStatus::InvalidArgument
        );
        ctt_model_free(model);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ctt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
