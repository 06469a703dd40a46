//! Minimal `key = value` text documents used for thresholds and generator
//! configs. `#` starts a comment; blank lines are ignored; keys are unique.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::format(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::format(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::format(format!("line {}: duplicate key {key}", lineno + 1)));
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::format(format!("key {key}: cannot parse {v:?}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::format(format!("missing key {key}")))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = KeyValues::parse("# thresholds\n t_idle = 0.32 \n\nt_walk=0.87 # tuned\n").unwrap();
        assert_eq!(kv.require::<f64>("t_idle").unwrap(), 0.32);
        assert_eq!(kv.require::<f64>("t_walk").unwrap(), 0.87);
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(KeyValues::parse("a = 1\na = 2").is_err());
        assert!(KeyValues::parse("just words").is_err());
        assert!(KeyValues::parse(" = 3").is_err());
    }

    #[test]
    fn render_round_trips() {
        let kv = KeyValues::parse("b = 2\na = x y").unwrap();
        assert_eq!(KeyValues::parse(&kv.render()).unwrap(), kv);
    }
}
