//! C ABI over the deterministic roleforge primitives.
//!
//! Functions that can fail return an [`RfStatus`] code and leave a message
//! retrievable via [`rf_last_error_message`]. Heap objects cross the
//! boundary as opaque handles (`RfDialogue`) or as C strings the caller
//! must release with [`rf_string_free`]. The header is generated by
//! cbindgen at build time (see `build.rs`; it lands in `include/`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use roleforge::corpus::types::{DialogueOrigin, LanguageTag, RoleProfile};
use roleforge::dialogue::{extract_pairs, parse_script, render_script};
use roleforge::eval::parse_verdict;
use roleforge::tokens::estimate_tokens;

/// Status codes returned by fallible calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    /// A pointer argument was null or a string was not valid UTF-8.
    InvalidArgument = 1,
    /// Input violated a domain invariant.
    Validation = 2,
    /// Input could not be parsed.
    Parse = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<Vec<u8>>) {
    let c = CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn rf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Release a string returned by any `rf_*` call.
///
/// # Safety
/// `s` must be a pointer previously returned by this library and not yet
/// freed, or null.
#[no_mangle]
pub unsafe extern "C" fn rf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, RfStatus> {
    if ptr.is_null() {
        set_last_error(format!("{name} is null"));
        return Err(RfStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(format!("{name} is not valid UTF-8"));
        RfStatus::InvalidArgument
    })
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s)
        .map(CString::into_raw)
        .unwrap_or(std::ptr::null_mut())
}

fn minimal_profile(role_name: &str) -> RoleProfile {
    RoleProfile {
        role_id: "ffi".to_string(),
        name: role_name.to_string(),
        language_tag: LanguageTag::En,
        summary: format!("{role_name}."),
        sections: vec![("Life".to_string(), String::new())],
        aliases: Vec::new(),
        source_uri: None,
    }
}

/// Opaque parsed dialogue handle.
pub struct RfDialogue {
    dialogue: roleforge::corpus::types::Dialogue,
    role_name: String,
}

/// Parse a screenplay script into a dialogue. Returns null on failure (see
/// [`rf_last_error_message`]); release with [`rf_dialogue_free`].
///
/// # Safety
/// `script` and `role_name` must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn rf_script_parse(
    script: *const c_char,
    role_name: *const c_char,
) -> *mut RfDialogue {
    let Ok(script) = utf8_arg(script, "script") else {
        return std::ptr::null_mut();
    };
    let Ok(role_name) = utf8_arg(role_name, "role_name") else {
        return std::ptr::null_mut();
    };
    let profile = minimal_profile(role_name);
    match parse_script(script, &profile, "ffi-dialogue", None, DialogueOrigin::Mimic) {
        Ok(parsed) => {
            clear_last_error();
            Box::into_raw(Box::new(RfDialogue {
                dialogue: parsed.dialogue,
                role_name: role_name.to_string(),
            }))
        }
        Err(err) => {
            set_last_error(err.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `dialogue` must come from [`rf_script_parse`] and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn rf_dialogue_free(dialogue: *mut RfDialogue) {
    if !dialogue.is_null() {
        drop(Box::from_raw(dialogue));
    }
}

/// Number of turns, or -1 on a null handle.
///
/// # Safety
/// `dialogue` must be a live handle from [`rf_script_parse`] or null.
#[no_mangle]
pub unsafe extern "C" fn rf_dialogue_turn_count(dialogue: *const RfDialogue) -> i32 {
    match dialogue.as_ref() {
        Some(d) => d.dialogue.turns.len() as i32,
        None => -1,
    }
}

/// Number of extractable training pairs, or -1 on a null handle.
///
/// # Safety
/// `dialogue` must be a live handle from [`rf_script_parse`] or null.
#[no_mangle]
pub unsafe extern "C" fn rf_dialogue_pair_count(dialogue: *const RfDialogue) -> i32 {
    match dialogue.as_ref() {
        Some(d) => extract_pairs(&d.dialogue, &d.role_name).len() as i32,
        None => -1,
    }
}

/// Render the dialogue back into script text. Free with [`rf_string_free`].
///
/// # Safety
/// `dialogue` must be a live handle from [`rf_script_parse`] or null.
#[no_mangle]
pub unsafe extern "C" fn rf_dialogue_render(dialogue: *const RfDialogue) -> *mut c_char {
    match dialogue.as_ref() {
        Some(d) => to_c_string(render_script(&d.dialogue)),
        None => {
            set_last_error("dialogue is null");
            std::ptr::null_mut()
        }
    }
}

/// Extracted pairs as a JSON array. Free with [`rf_string_free`].
///
/// # Safety
/// `dialogue` must be a live handle from [`rf_script_parse`] or null.
#[no_mangle]
pub unsafe extern "C" fn rf_dialogue_pairs_json(dialogue: *const RfDialogue) -> *mut c_char {
    match dialogue.as_ref() {
        Some(d) => {
            let pairs = extract_pairs(&d.dialogue, &d.role_name);
            match serde_json_string(&pairs) {
                Some(json) => to_c_string(json),
                None => {
                    set_last_error("pair serialization failed");
                    std::ptr::null_mut()
                }
            }
        }
        None => {
            set_last_error("dialogue is null");
            std::ptr::null_mut()
        }
    }
}

fn serde_json_string<T: serde::Serialize>(value: &T) -> Option<String> {
    serde_json::to_string(value).ok()
}

/// Extract the 1-7 score from a judge completion into `out_score`.
///
/// # Safety
/// `completion` must be a valid NUL-terminated string; `out_score` must be
/// a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_verdict_parse(
    completion: *const c_char,
    out_score: *mut i32,
) -> RfStatus {
    if out_score.is_null() {
        set_last_error("out_score is null");
        return RfStatus::InvalidArgument;
    }
    let completion = match utf8_arg(completion, "completion") {
        Ok(s) => s,
        Err(status) => return status,
    };
    match parse_verdict(completion) {
        Ok(parsed) => {
            *out_score = parsed.score as i32;
            clear_last_error();
            RfStatus::Ok
        }
        Err(err) => {
            set_last_error(err.to_string());
            RfStatus::Parse
        }
    }
}

/// Evidence text preceding the score, or null when parsing fails. Free with
/// [`rf_string_free`].
///
/// # Safety
/// `completion` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rf_verdict_evidence(completion: *const c_char) -> *mut c_char {
    let Ok(completion) = utf8_arg(completion, "completion") else {
        return std::ptr::null_mut();
    };
    match parse_verdict(completion) {
        Ok(parsed) => to_c_string(parsed.evidence),
        Err(err) => {
            set_last_error(err.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Estimated token count of a text (word count scaled), or -1 on bad input.
///
/// # Safety
/// `text` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rf_token_estimate(text: *const c_char) -> i64 {
    match utf8_arg(text, "text") {
        Ok(text) => estimate_tokens(text) as i64,
        Err(_) => -1,
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn rf_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}
