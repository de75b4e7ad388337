use serde::{Deserialize, Serialize};

/// A non-fatal event raised while processing (dropped column, skipped fit, ...).
///
/// Records serialize to one JSON object per line on the diagnostics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub stage: String,
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

impl Diagnostic {
    pub fn new(stage: &str, kind: &str, message: impl Into<String>) -> Self {
        Self {
            stage: stage.to_string(),
            kind: kind.to_string(),
            message: message.into(),
            column: None,
        }
    }

    pub fn with_column(mut self, column: impl Into<String>) -> Self {
        self.column = Some(column.into());
        self
    }

    pub fn to_json_line(&self) -> String {
        // Serializing a plain struct of strings cannot fail.
        serde_json::to_string(self).expect("diagnostic serializes")
    }
}
