use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Warn,
}

/// One verification result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Which stated identity or inclusion the check exercises.
    pub anchor: String,
    pub status: Status,
    pub worst_residual: f64,
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, anchor: impl Into<String>, status: Status) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            status,
            worst_residual: 0.0,
            location: None,
            detail: None,
        }
    }

    /// PASS iff `worst <= tol`.
    pub fn residual(
        name: impl Into<String>,
        anchor: impl Into<String>,
        worst: f64,
        tol: f64,
    ) -> Self {
        let status = if worst <= tol { Status::Pass } else { Status::Fail };
        Self::new(name, anchor, status).with_residual(worst)
    }

    pub fn with_residual(mut self, r: f64) -> Self {
        self.worst_residual = r;
        self
    }

    pub fn with_location(mut self, loc: impl Into<String>) -> Self {
        self.location = Some(loc.into());
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tool_version: String,
    pub config_hash: String,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.into(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks);
    }

    pub fn has_failures(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}
