use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ScenarioError;

pub const NET_USER_LISTING: &str = "net_user.txt";
const NET_USER_PREFIX: &str = "net_user_";

/// Named files inside the shared fixture directory plus the fixed audit date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureSet {
    pub net_accounts: String,
    pub policy: String,
    pub clock_date: NaiveDate,
}

/// Builds the command→output map served by the fixture shell:
/// `net user` from `net_user.txt`, `net user <name>` from each
/// `net_user_<name>.txt`, and `net accounts` from `net_accounts_file`.
pub fn load_command_map(dir: &Path, net_accounts_file: &str) -> Result<BTreeMap<String, String>, ScenarioError> {
    let mut map = BTreeMap::new();
    let read = |path: PathBuf| -> Result<String, ScenarioError> {
        std::fs::read_to_string(&path).map_err(|_| ScenarioError::FixtureMissing(path))
    };
    map.insert("net accounts".to_string(), read(dir.join(net_accounts_file))?);

    let entries = std::fs::read_dir(dir).map_err(|_| ScenarioError::FixtureMissing(dir.to_path_buf()))?;
    for entry in entries.flatten() {
        let file_name = entry.file_name();
        let Some(name) = file_name.to_str() else { continue };
        if name == NET_USER_LISTING {
            map.insert("net user".to_string(), read(entry.path())?);
        } else if let Some(account) = name
            .strip_prefix(NET_USER_PREFIX)
            .and_then(|rest| rest.strip_suffix(".txt"))
        {
            if !account.is_empty() {
                map.insert(format!("net user {account}"), read(entry.path())?);
            }
        }
    }
    Ok(map)
}

/// Path of the per-account listing for `account`.
pub fn account_fixture_path(dir: &Path, account: &str) -> PathBuf {
    dir.join(format!("{NET_USER_PREFIX}{}.txt", account.to_ascii_lowercase()))
}
