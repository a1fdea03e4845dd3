//! Plain-text `key=value` records, one pair per line. Blank lines and lines
//! starting with `#` are ignored.

use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Record {
    pairs: Vec<(String, String)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.pairs.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("cannot parse `{key}` = `{v}`"))),
        }
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(k, _)| k.as_str())
    }

    pub fn extend(&mut self, other: &Record) {
        self.pairs.extend(other.pairs.iter().cloned());
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rec = Record::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1))
            })?;
            rec.push(k.trim(), v.trim());
        }
        Ok(rec)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.pairs {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let rec = Record::from_text("# comment\nkind = power\n\nepsilon=0.5\n").unwrap();
        assert_eq!(rec.get("kind"), Some("power"));
        assert_eq!(rec.parse::<f64>("epsilon").unwrap(), Some(0.5));
        assert_eq!(rec.to_text(), "kind=power\nepsilon=0.5\n");
        assert!(Record::from_text("novalue").is_err());
        assert!(rec.parse::<u64>("kind").is_err());
    }
}
