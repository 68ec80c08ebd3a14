use super::OrchestratorError;
use crate::prune::{PruneLedger, LEDGER_SCHEMA_VERSION};
use std::io::Write;
use std::path::Path;

pub fn ledger_to_string(ledger: &PruneLedger) -> String {
    let mut s = serde_json::to_string_pretty(ledger).expect("ledgers serialize");
    s.push('\n');
    s
}

pub fn ledger_from_str(text: &str) -> Result<PruneLedger, OrchestratorError> {
    let bad = |m: String| OrchestratorError::Ledger(m);
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(format!("not valid JSON: {e}")))?;
    let version = raw.get("schema_version").and_then(serde_json::Value::as_u64);
    if version != Some(u64::from(LEDGER_SCHEMA_VERSION)) {
        return Err(OrchestratorError::Version { found: version, supported: LEDGER_SCHEMA_VERSION });
    }
    let ledger: PruneLedger = serde_json::from_value(raw).map_err(|e| bad(e.to_string()))?;
    ledger.validate()?;
    Ok(ledger)
}

/// Writes the ledger atomically: a temporary file next to `path` is synced
/// and then renamed over it.
pub fn save_ledger(path: &Path, ledger: &PruneLedger) -> Result<(), OrchestratorError> {
    let io = |e: std::io::Error| OrchestratorError::Io(format!("{}: {e}", path.display()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(ledger_to_string(ledger).as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load_ledger(path: &Path) -> Result<PruneLedger, OrchestratorError> {
    let text = std::fs::read_to_string(path).map_err(|e| OrchestratorError::Io(format!("{}: {e}", path.display())))?;
    ledger_from_str(&text).map_err(|e| match e {
        OrchestratorError::Ledger(m) => OrchestratorError::Ledger(format!("{}: {m}", path.display())),
        other => other,
    })
}
