//! Randomized test forms: item order and option order shuffled per form,
//! with an answer-key sidecar for scoring.

use std::path::{Path, PathBuf};

use psychfit_core::ingest::ItemBank;
use psychfit_core::simulate::stream;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::output::{ensure_dir, write_json, OutputError};

#[derive(Debug, Error)]
pub enum FormError {
    #[error("item bank is empty")]
    EmptyBank,
    #[error("requested zero forms")]
    NoForms,
    #[error("submission has {found} answers, form has {expected} items")]
    SubmissionLength { expected: usize, found: usize },
    #[error(transparent)]
    Output(#[from] OutputError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormItem {
    pub position: usize,
    pub item_id: String,
    pub stem: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Form {
    pub form: usize,
    pub seed: u64,
    pub items: Vec<FormItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub position: usize,
    pub item_id: String,
    /// Index of the correct option as presented on this form.
    pub key_index: usize,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub form: usize,
    pub entries: Vec<KeyEntry>,
}

/// Builds form `form` (1-based) from its own random stream: a Fisher-Yates
/// shuffle of the items, then one of each item's options in presented order.
pub fn build_form(bank: &ItemBank, form: usize, seed: u64) -> (Form, AnswerKey) {
    let mut rng = stream(seed, form as u64);
    let mut order: Vec<usize> = (0..bank.len()).collect();
    rng.shuffle(&mut order);
    let mut items = Vec::with_capacity(order.len());
    let mut entries = Vec::with_capacity(order.len());
    for (position, &idx) in order.iter().enumerate() {
        let item = &bank.items()[idx];
        let mut opts: Vec<usize> = (0..item.options.len()).collect();
        rng.shuffle(&mut opts);
        let options: Vec<String> = opts.iter().map(|&o| item.options[o].clone()).collect();
        let key_index = options.iter().position(|o| *o == item.key).expect("bank key is one of the options");
        items.push(FormItem { position: position + 1, item_id: item.id.clone(), stem: item.stem.clone(), options });
        entries.push(KeyEntry { position: position + 1, item_id: item.id.clone(), key_index, key: item.key.clone() });
    }
    (Form { form, seed, items }, AnswerKey { form, entries })
}

pub fn generate_forms(bank: &ItemBank, n_forms: usize, seed: u64) -> Result<Vec<(Form, AnswerKey)>, FormError> {
    if bank.is_empty() {
        return Err(FormError::EmptyBank);
    }
    if n_forms == 0 {
        return Err(FormError::NoForms);
    }
    Ok((1..=n_forms).map(|f| build_form(bank, f, seed)).collect())
}

/// Writes `form_NN.json` and `form_NN_key.json` per form; returns the paths.
pub fn export_forms(bank: &ItemBank, n_forms: usize, seed: u64, outdir: &Path) -> Result<Vec<PathBuf>, FormError> {
    let forms = generate_forms(bank, n_forms, seed)?;
    ensure_dir(outdir)?;
    let mut written = Vec::new();
    for (form, key) in &forms {
        let f = outdir.join(format!("form_{:02}.json", form.form));
        let k = outdir.join(format!("form_{:02}_key.json", form.form));
        write_json(&f, form)?;
        write_json(&k, key)?;
        written.extend([f, k]);
    }
    Ok(written)
}

/// Number correct for chosen option indices given in form order.
pub fn score_submission(key: &AnswerKey, answers: &[usize]) -> Result<usize, FormError> {
    if answers.len() != key.entries.len() {
        return Err(FormError::SubmissionLength { expected: key.entries.len(), found: answers.len() });
    }
    Ok(key.entries.iter().zip(answers).filter(|(e, &a)| e.key_index == a).count())
}
