//! Word-count based token estimation.
//!
//! Exact tokenizer parity is a non-goal; budgets everywhere in the pipeline
//! use the same estimate: whitespace-delimited words times 1.3, rounded up.

/// Estimated token count for a piece of text.
pub fn estimate_tokens(text: &str) -> usize {
    let words = text.split_whitespace().count();
    (words as f64 * 1.3).ceil() as usize
}

/// True when `text` fits within `budget` estimated tokens.
pub fn fits_budget(text: &str, budget: usize) -> bool {
    estimate_tokens(text) <= budget
}
