//! C ABI for `ctt-core`.
//!
//! Every object crosses the boundary as an opaque pointer that must be
//! released with its matching `*_free` function. Fallible calls return a
//! [`CttStatus`]; on failure [`ctt_last_error`] describes the cause for the
//! calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ctt_core::dataset::{DatasetHeader, DatasetWriter};
use ctt_core::evaluation::{evaluate, Label, Timetable};
use ctt_core::ga::{solve, GaConfig, NullSink, Solution};
use ctt_core::instance::Instance;
use ctt_core::surrogate::{SurrogateModel, Task};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CttStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Io = 4,
    InvalidArgument = 5,
    WrongTask = 6,
    Panic = 99,
}

/// Marker for unassigned events in slot buffers.
pub const CTT_UNASSIGNED: u64 = u64::MAX;

pub struct CttInstance(Instance);

pub struct CttSolution(Solution);

pub struct CttModel(SurrogateModel);

/// GA parameters. `target_fitness < 0` means no target.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CttGaConfig {
    pub population_size: u64,
    pub offspring_count: u64,
    pub crossover_probability: f64,
    pub mutation_probability: f64,
    pub tournament_size: u64,
    pub non_improving_switch: u64,
    pub stop_non_improving: u64,
    pub max_evaluations: u64,
    pub target_fitness: i64,
    pub rng_seed: u64,
    pub threads: u64,
}

impl From<&CttGaConfig> for GaConfig {
    fn from(c: &CttGaConfig) -> Self {
        GaConfig {
            population_size: c.population_size as usize,
            offspring_count: c.offspring_count as usize,
            crossover_probability: c.crossover_probability,
            mutation_probability: c.mutation_probability,
            tournament_size: c.tournament_size as usize,
            non_improving_switch: c.non_improving_switch as usize,
            stop_non_improving: c.stop_non_improving as usize,
            max_evaluations: c.max_evaluations,
            target_fitness: u64::try_from(c.target_fitness).ok(),
            rng_seed: c.rng_seed,
            threads: c.threads as usize,
        }
    }
}

/// Constraint counts of a timetable.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CttReport {
    pub hc1: u64,
    pub hc2: u64,
    pub hc3: u64,
    pub hc4: u64,
    pub hc5: u64,
    pub sc1: u64,
    pub sc2: u64,
    pub sc3: u64,
    pub sc4: u64,
    pub hard_total: u64,
    pub soft_total: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CttStatus, String);

impl Failure {
    fn new(status: CttStatus, message: impl ToString) -> Self {
        Self(status, message.to_string())
    }
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CttStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CttStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CttStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }
        .ok_or_else(|| Failure::new(CttStatus::NullPointer, format!("{what} is null")))
}

unsafe fn utf8<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            CttStatus::NullPointer,
            format!("{what} is null"),
        ));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| Failure::new(CttStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(
            CttStatus::NullPointer,
            format!("{what} is null"),
        ));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(
            CttStatus::NullPointer,
            format!("{what} is null"),
        ));
    }
    unsafe { out.write(value) };
    Ok(())
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure::new(CttStatus::InvalidArgument, e))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn ctt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ctt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ctt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parses instance text in `.ctt` format.
#[no_mangle]
pub unsafe extern "C" fn ctt_instance_parse(
    text: *const c_char,
    out: *mut *mut CttInstance,
) -> CttStatus {
    guard(|| {
        let source = unsafe { utf8(text, "text") }?;
        let instance = Instance::parse(source).map_err(|e| Failure::new(CttStatus::Parse, e))?;
        unsafe { put(out, Box::into_raw(Box::new(CttInstance(instance))), "out") }
    })
}

/// Reads and parses a `.ctt` file.
#[no_mangle]
pub unsafe extern "C" fn ctt_instance_load(
    path: *const c_char,
    out: *mut *mut CttInstance,
) -> CttStatus {
    guard(|| {
        let path = unsafe { utf8(path, "path") }?;
        let source = std::fs::read_to_string(path)
            .map_err(|e| Failure::new(CttStatus::Io, format!("{path}: {e}")))?;
        let instance = Instance::parse(&source)
            .map_err(|e| Failure::new(CttStatus::Parse, format!("{path}: {e}")))?;
        unsafe { put(out, Box::into_raw(Box::new(CttInstance(instance))), "out") }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ctt_instance_free(instance: *mut CttInstance) {
    if !instance.is_null() {
        drop(unsafe { Box::from_raw(instance) });
    }
}

/// Number of lecture events, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ctt_instance_num_events(instance: *const CttInstance) -> u64 {
    unsafe { instance.as_ref() }.map_or(0, |i| i.0.num_events() as u64)
}

/// Number of (room, period) pairs, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ctt_instance_num_room_period_pairs(instance: *const CttInstance) -> u64 {
    unsafe { instance.as_ref() }.map_or(0, |i| i.0.num_room_period_pairs() as u64)
}

/// Evaluates a timetable given as one flat room-period index per event;
/// [`CTT_UNASSIGNED`] leaves an event unplaced.
#[no_mangle]
pub unsafe extern "C" fn ctt_evaluate(
    instance: *const CttInstance,
    slots: *const u64,
    len: usize,
    out: *mut CttReport,
) -> CttStatus {
    guard(|| {
        let instance = &unsafe { deref(instance, "instance") }?.0;
        let slots = unsafe { slice(slots, len, "slots") }?;
        let timetable = Timetable::new(
            slots
                .iter()
                .map(|&s| (s != CTT_UNASSIGNED).then_some(s as usize))
                .collect(),
        );
        let r = evaluate(instance, &timetable)
            .map_err(|e| Failure::new(CttStatus::InvalidArgument, e))?;
        let report = CttReport {
            hc1: r.hc1,
            hc2: r.hc2,
            hc3: r.hc3,
            hc4: r.hc4,
            hc5: r.hc5,
            sc1: r.sc1,
            sc2: r.sc2,
            sc3: r.sc3,
            sc4: r.sc4,
            hard_total: r.hard_total(),
            soft_total: r.soft_total(),
        };
        unsafe { put(out, report, "out") }
    })
}

/// Default GA parameters.
#[no_mangle]
pub extern "C" fn ctt_ga_config_default() -> CttGaConfig {
    let c = GaConfig::default();
    CttGaConfig {
        population_size: c.population_size as u64,
        offspring_count: c.offspring_count as u64,
        crossover_probability: c.crossover_probability,
        mutation_probability: c.mutation_probability,
        tournament_size: c.tournament_size as u64,
        non_improving_switch: c.non_improving_switch as u64,
        stop_non_improving: c.stop_non_improving as u64,
        max_evaluations: c.max_evaluations,
        target_fitness: c.target_fitness.map_or(-1, |t| t as i64),
        rng_seed: c.rng_seed,
        threads: c.threads as u64,
    }
}

/// Runs the two-stage GA. When `dataset_path` is non-null every soft-stage
/// evaluation is written there (gzip if it ends in `.gz`).
#[no_mangle]
pub unsafe extern "C" fn ctt_solve(
    instance: *const CttInstance,
    config: *const CttGaConfig,
    dataset_path: *const c_char,
    out: *mut *mut CttSolution,
) -> CttStatus {
    guard(|| {
        let instance = &unsafe { deref(instance, "instance") }?.0;
        let config = GaConfig::from(unsafe { deref(config, "config") }?);
        config
            .validate()
            .map_err(|e| Failure::new(CttStatus::InvalidArgument, e))?;
        let solution = if dataset_path.is_null() {
            solve(instance, &config, &mut NullSink)
        } else {
            let path = unsafe { utf8(dataset_path, "dataset_path") }?;
            let header = DatasetHeader {
                instance: instance.name().to_string(),
                n_features: instance.num_events(),
                n_alleles: Some(instance.num_room_period_pairs()),
            };
            let mut writer = DatasetWriter::create(Path::new(path), header)
                .map_err(|e| Failure::new(CttStatus::Io, format!("{path}: {e}")))?;
            let solution = solve(instance, &config, &mut writer);
            writer
                .close()
                .map_err(|e| Failure::new(CttStatus::Io, format!("{path}: {e}")))?;
            solution
        }
        .map_err(|e| Failure::new(CttStatus::InvalidArgument, e))?;
        unsafe { put(out, Box::into_raw(Box::new(CttSolution(solution))), "out") }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ctt_solution_free(solution: *mut CttSolution) {
    if !solution.is_null() {
        drop(unsafe { Box::from_raw(solution) });
    }
}

/// Soft-stage fitness of the best timetable, `u64::MAX` for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ctt_solution_fitness(solution: *const CttSolution) -> u64 {
    unsafe { solution.as_ref() }.map_or(u64::MAX, |s| s.0.fitness)
}

/// 1 when the best timetable has no hard violations, otherwise 0.
#[no_mangle]
pub unsafe extern "C" fn ctt_solution_is_feasible(solution: *const CttSolution) -> i32 {
    unsafe { solution.as_ref() }.map_or(0, |s| i32::from(s.0.label == Label::Feasible))
}

/// Evaluations spent, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ctt_solution_evaluations(solution: *const CttSolution) -> u64 {
    unsafe { solution.as_ref() }.map_or(0, |s| s.0.evaluations)
}

/// Copies the flat slot of every event into `buf`, which must hold exactly
/// one entry per event.
#[no_mangle]
pub unsafe extern "C" fn ctt_solution_slots(
    solution: *const CttSolution,
    buf: *mut u64,
    len: usize,
) -> CttStatus {
    guard(|| {
        let slots = unsafe { deref(solution, "solution") }?.0.timetable.slots();
        if len != slots.len() {
            return Err(Failure::new(
                CttStatus::InvalidArgument,
                format!("buffer holds {len} entries, solution has {}", slots.len()),
            ));
        }
        if buf.is_null() && len > 0 {
            return Err(Failure::new(CttStatus::NullPointer, "buf is null"));
        }
        for (i, s) in slots.iter().enumerate() {
            unsafe { buf.add(i).write(s.map_or(CTT_UNASSIGNED, |s| s as u64)) };
        }
        Ok(())
    })
}

/// Solution file text. Free the result with [`ctt_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ctt_solution_text(
    instance: *const CttInstance,
    solution: *const CttSolution,
    out: *mut *mut c_char,
) -> CttStatus {
    guard(|| {
        let instance = &unsafe { deref(instance, "instance") }?.0;
        let solution = &unsafe { deref(solution, "solution") }?.0;
        if solution.timetable.slots().len() != instance.num_events() {
            return Err(Failure::new(
                CttStatus::InvalidArgument,
                "solution belongs to another instance",
            ));
        }
        let s = owned_string(solution.timetable.to_solution_text(instance))?;
        unsafe { put(out, s, "out") }
    })
}

/// Loads a model saved by the `train` command.
#[no_mangle]
pub unsafe extern "C" fn ctt_model_load(path: *const c_char, out: *mut *mut CttModel) -> CttStatus {
    guard(|| {
        let path = unsafe { utf8(path, "path") }?;
        let model = SurrogateModel::load(Path::new(path))
            .map_err(|e| Failure::new(CttStatus::Io, format!("{path}: {e}")))?;
        unsafe { put(out, Box::into_raw(Box::new(CttModel(model))), "out") }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ctt_model_free(model: *mut CttModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// 1 for a classifier, 0 for a regressor, -1 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ctt_model_is_classifier(model: *const CttModel) -> i32 {
    unsafe { model.as_ref() }.map_or(-1, |m| i32::from(m.0.task() == Task::Classification))
}

/// Predicted fitness of one genome. Regressors only.
#[no_mangle]
pub unsafe extern "C" fn ctt_model_predict_fitness(
    model: *const CttModel,
    features: *const u32,
    len: usize,
    out: *mut f64,
) -> CttStatus {
    guard(|| {
        let model = &unsafe { deref(model, "model") }?.0;
        let features = unsafe { slice(features, len, "features") }?;
        if model.task() != Task::Regression {
            return Err(Failure::new(CttStatus::WrongTask, "model is a classifier"));
        }
        let y = model
            .predict_fitness(features)
            .map_err(|e| Failure::new(CttStatus::InvalidArgument, e))?;
        unsafe { put(out, y, "out") }
    })
}

/// Writes 1 to `out` when the genome is predicted feasible. Classifiers only.
#[no_mangle]
pub unsafe extern "C" fn ctt_model_predict_feasible(
    model: *const CttModel,
    features: *const u32,
    len: usize,
    out: *mut i32,
) -> CttStatus {
    guard(|| {
        let model = &unsafe { deref(model, "model") }?.0;
        let features = unsafe { slice(features, len, "features") }?;
        if model.task() != Task::Classification {
            return Err(Failure::new(CttStatus::WrongTask, "model is a regressor"));
        }
        let label = model
            .predict_feasible(features)
            .map_err(|e| Failure::new(CttStatus::InvalidArgument, e))?;
        unsafe { put(out, i32::from(label == Label::Feasible), "out") }
    })
}
