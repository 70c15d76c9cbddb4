//! Versioned JSON model files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ClassifierKind, GkmncModel, PipelineError, Result};

pub const MODEL_FORMAT: &str = "gkmnc-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'a str,
    version: u32,
    name: String,
    classifier: ClassifierKind,
    grouping_attribute: Option<String>,
    model: &'a GkmncModel,
}

#[derive(Deserialize)]
struct Header {
    format: Option<String>,
    version: Option<Value>,
}

pub fn save_model(model: &GkmncModel, path: impl AsRef<Path>) -> Result<()> {
    let envelope = Envelope {
        format: MODEL_FORMAT,
        version: MODEL_FORMAT_VERSION,
        name: model.name(),
        classifier: model.classifier,
        grouping_attribute: model
            .grouping_attribute
            .map(|a| model.schema.attributes()[a].name.clone()),
        model,
    };
    let text = serde_json::to_string_pretty(&envelope).map_err(|e| PipelineError::CorruptFile(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GkmncModel> {
    let text = fs::read_to_string(path)?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| PipelineError::CorruptFile(e.to_string()))?;
    let header: Header = serde_json::from_value(doc.clone()).map_err(|e| PipelineError::CorruptFile(e.to_string()))?;
    let expected = format!("{MODEL_FORMAT} v{MODEL_FORMAT_VERSION}");
    let found = format!(
        "{} v{}",
        header.format.as_deref().unwrap_or("?"),
        header.version.as_ref().map_or("?".to_string(), |v| v.to_string())
    );
    if found != expected {
        return Err(PipelineError::FormatVersionMismatch { found, expected });
    }
    let model = doc
        .get_mut("model")
        .map(Value::take)
        .ok_or_else(|| PipelineError::CorruptFile("missing `model` section".into()))?;
    serde_json::from_value(model).map_err(|e| PipelineError::CorruptFile(e.to_string()))
}
