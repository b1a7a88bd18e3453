//! C ABI for loading a trained model, parsing tagged sentences, scoring
//! parses and querying the oracles.
//!
//! Every fallible function returns an [`SpStatus`]. On failure a message is
//! kept per thread and can be read with [`sp_last_error_message`]. Strings
//! handed out by the library must be released with [`sp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use spanparser::encoder::bundle::load_file;
use spanparser::encoder::{EncoderError, Model};
use spanparser::metrics::corpus_parseval;
use spanparser::oracle::{dyna, static_oracle, GoldTreeIndex, OracleState};
use spanparser::transition::{format_trace, parse_trace, Configuration};
use spanparser::treebank::{prepare, read_tagged, read_trees, tree_to_brackets, write_tree, NormalizationRules, Tree};

/// Result codes shared by all fallible entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed trees, tagged text, traces or mismatched inputs.
    Data = 3,
    /// The model file is missing, unreadable or not a model bundle.
    Model = 4,
    /// Scoring produced a non-finite value.
    Numeric = 5,
    Panic = 6,
}

/// Bracket counts and scores for a set of predicted trees against gold.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpF1Report {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

/// A loaded parser model. Opaque to C callers.
pub struct SpModel {
    model: Model,
}

struct Failure {
    status: SpStatus,
    message: String,
}

impl Failure {
    fn new(status: SpStatus, message: impl Into<String>) -> Failure {
        Failure { status, message: message.into() }
    }

    fn data(message: impl ToString) -> Failure {
        Failure::new(SpStatus::Data, message.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SpStatus::Ok
        }
        Ok(Err(f)) => {
            set_last_error(&f.message);
            f.status
        }
        Err(_) => {
            set_last_error("internal panic");
            SpStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(SpStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(SpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn check_out<T>(out: *mut T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(SpStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `out` must be non-null and writable.
unsafe fn hand_out(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure::data("output contains a NUL byte"))?;
    *out = c.into_raw();
    Ok(())
}

fn prepared_trees(source: &str) -> Result<Vec<Tree>, Failure> {
    let rules = NormalizationRules::default();
    read_trees(source).map_err(Failure::data)?.into_iter().map(|t| prepare(t, &rules).map_err(Failure::data)).collect()
}

fn single_tree(source: &str) -> Result<Tree, Failure> {
    let mut trees = prepared_trees(source)?;
    if trees.len() != 1 {
        return Err(Failure::data(format!("expected one tree, found {}", trees.len())));
    }
    Ok(trees.remove(0))
}

/// Loads a model bundle from `path` into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_model_load(path: *const c_char, out: *mut *mut SpModel) -> SpStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let path = text(path, "path")?;
        let model = load_file(Path::new(path)).map_err(|e| Failure::new(SpStatus::Model, format!("{path}: {e}")))?;
        *out = Box::into_raw(Box::new(SpModel { model }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or come from [`sp_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sp_model_free(model: *mut SpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parses one sentence of `word_TAG` tokens and writes its bracketed tree.
///
/// # Safety
/// `model` must come from [`sp_model_load`]; `tagged` must be a
/// NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_parse_tagged(
    model: *const SpModel,
    tagged: *const c_char,
    out: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let model = model.as_ref().ok_or_else(|| Failure::new(SpStatus::NullArgument, "model is null"))?;
        let mut sentences = read_tagged(text(tagged, "tagged")?).map_err(Failure::data)?;
        if sentences.len() != 1 {
            return Err(Failure::data(format!("expected one sentence, found {}", sentences.len())));
        }
        let (tree, _) = model.model.parse(&sentences.remove(0)).map_err(|e| match e {
            EncoderError::NonFinite(_) => Failure::new(SpStatus::Numeric, e.to_string()),
            e => Failure::data(e),
        })?;
        hand_out(out, write_tree(&tree))
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string handed out by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Scores predicted trees against gold trees, both given as bracketed text
/// with one tree per line. Trees are normalized before scoring.
///
/// # Safety
/// `predicted` and `gold` must be NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sp_eval_trees(
    predicted: *const c_char,
    gold: *const c_char,
    out: *mut SpF1Report,
) -> SpStatus {
    guard(|| {
        check_out(out, "out")?;
        let pred = prepared_trees(text(predicted, "predicted")?)?;
        let gold = prepared_trees(text(gold, "gold")?)?;
        if pred.len() != gold.len() {
            return Err(Failure::data(format!("{} predicted trees but {} gold trees", pred.len(), gold.len())));
        }
        if let Some(k) = pred.iter().zip(&gold).position(|(p, g)| p.len() != g.len()) {
            return Err(Failure::data(format!("sentence {}: word counts differ", k + 1)));
        }
        let pb: Vec<_> = pred.iter().map(tree_to_brackets).collect();
        let gb: Vec<_> = gold.iter().map(tree_to_brackets).collect();
        let r = corpus_parseval(pb.iter().zip(&gb)).map_err(Failure::data)?;
        *out = SpF1Report {
            matched: r.matched,
            predicted: r.predicted,
            gold: r.gold,
            recall: r.recall,
            precision: r.precision,
            f1: r.f1,
        };
        Ok(())
    })
}

/// Writes the static-oracle action trace for a gold tree, one action per line.
///
/// # Safety
/// `tree` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sp_static_oracle(tree: *const c_char, out: *mut *mut c_char) -> SpStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let gold = single_tree(text(tree, "tree")?)?;
        hand_out(out, format_trace(&static_oracle(&gold)))
    })
}

/// Replays `prefix` (one action per line, possibly empty) from the initial
/// configuration and writes the set of optimal next actions for the gold
/// tree, one per line.
///
/// # Safety
/// `tree` and `prefix` must be NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sp_dynamic_oracle(
    tree: *const c_char,
    prefix: *const c_char,
    out: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let gold = single_tree(text(tree, "tree")?)?;
        let actions = parse_trace(text(prefix, "prefix")?).map_err(Failure::data)?;
        let index = GoldTreeIndex::from_tree(&gold).map_err(Failure::data)?;
        let mut state = OracleState::new(&index);
        let mut config = Configuration::initial(gold.len()).map_err(Failure::data)?;
        for a in &actions {
            let next = config.apply(a).map_err(Failure::data)?;
            state.advance(&config, a);
            config = next;
        }
        if config.is_final() {
            return Err(Failure::data("configuration is final"));
        }
        hand_out(out, format_trace(&dyna(&config, &state).map_err(Failure::data)?))
    })
}

/// The message for the last failure on this thread, or null after a
/// success. The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn sp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
