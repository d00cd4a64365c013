//! Optional JSON configuration named by `RINGFORGE_CONFIG`.
//!
//! ```json
//! { "profiles": { "relaxed": { "w_min": 110 } }, "k_c": 0.16 }
//! ```
//!
//! Profile entries override fields of the built-in profile of the same name;
//! other names start from the default profile.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::design_opt::DesignConstraints;
use crate::error::{Error, Result};
use crate::io;

pub const CONFIG_ENV: &str = "RINGFORGE_CONFIG";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub profiles: BTreeMap<String, serde_json::Map<String, serde_json::Value>>,
    #[serde(default)]
    pub k_c: Option<f64>,
}

impl Config {
    pub fn from_env() -> Result<Config> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Config::load(Path::new(&p)),
            _ => Ok(Config::default()),
        }
    }

    pub fn load(path: &Path) -> Result<Config> {
        serde_json::from_str(&io::read_text(path)?).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn profile(&self, name: &str) -> Result<DesignConstraints> {
        let builtin = match name {
            "default" => Some(DesignConstraints::default()),
            "relaxed" => Some(DesignConstraints::relaxed()),
            _ => None,
        };
        let overrides = self.profiles.get(name);
        let mut value = match (&builtin, overrides) {
            (Some(b), _) => serde_json::to_value(b)?,
            (None, Some(_)) => serde_json::to_value(DesignConstraints::default())?,
            (None, None) => return Err(Error::invalid(format!("unknown constraint profile `{name}`"))),
        };
        if let (Some(o), serde_json::Value::Object(base)) = (overrides, &mut value) {
            for (k, v) in o {
                base.insert(k.clone(), v.clone());
            }
        }
        serde_json::from_value(value).map_err(|e| Error::Parse {
            source_name: format!("{CONFIG_ENV} profile `{name}`"),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_merge_into_builtin() {
        let c: Config = serde_json::from_str(r#"{"profiles": {"relaxed": {"w_min": 110}}}"#).unwrap();
        let p = c.profile("relaxed").unwrap();
        assert_eq!(p.w_min, 110.0);
        assert_eq!(p.p_min, 200.0);
        assert!(c.profile("other").is_err());
        let c: Config = serde_json::from_str(r#"{"profiles": {"coarse": {"w_min": 300}}}"#).unwrap();
        assert_eq!(c.profile("coarse").unwrap().p_min, 200.0);
        assert_eq!(c.profile("default").unwrap(), DesignConstraints::default());
    }
}
