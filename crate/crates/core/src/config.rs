//! Flat `key = value` configuration text: UTF-8, one pair per line, `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hamiltonian::{DissipationRates, LeakageMode};
use crate::protocol::{Direction, EmissionDuration, ProtocolConfig, ReceiveKind};

/// Parsed key–value pairs; values are kept as text until a consumer claims them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config { line: i + 1, reason: format!("expected `key = value`, got `{line}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config { line: i + 1, reason: "empty key".into() });
            }
            if entries.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
                return Err(Error::Config { line: i + 1, reason: format!("duplicate key `{k}`") });
            }
        }
        Ok(Self { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (0, value.into()));
    }

    /// Removes and parses `key` if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| Error::Config { line, reason: format!("bad value for `{key}`: {e}") }),
        }
    }

    /// Fails if any key was never claimed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(Error::Config { line, reason: format!("unknown key `{k}`") }),
        }
    }
}

/// Renders pairs in the same text format `KeyValues::parse` reads.
pub fn render(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

macro_rules! text_enum {
    ($ty:ty, $what:literal, { $($variant:path => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(format!(concat!("unknown ", $what, " `{}`"), other)),
                }
            }
        }
    };
}

text_enum!(ReceiveKind, "receive kind", { ReceiveKind::Satd => "satd", ReceiveKind::Stirap => "stirap" });
text_enum!(Direction, "direction", { Direction::Forward => "forward", Direction::Reverse => "reverse" });
text_enum!(EmissionDuration, "emission-duration convention", {
    EmissionDuration::ThirtyOverV => "fixed",
    EmissionDuration::PulsePlusLeak => "leak-time",
});
text_enum!(LeakageMode, "leakage mode", { LeakageMode::Lumped => "lumped", LeakageMode::Damped => "damped" });

impl ProtocolConfig {
    /// Overrides fields from `kv`, consuming the keys it recognizes.
    ///
    /// `v` and `g3` set both nodes at once; per-node keys win over them.
    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        if let Some(v) = kv.take("v")? {
            self.v_l = v;
            self.v_r = v;
        }
        if let Some(g) = kv.take("g3")? {
            self.g3l = g;
            self.g3r = g;
        }
        macro_rules! field {
            ($key:literal => $place:expr) => {
                if let Some(x) = kv.take($key)? {
                    $place = x;
                }
            };
        }
        field!("v_l" => self.v_l);
        field!("v_r" => self.v_r);
        field!("g0" => self.g0);
        field!("g3l" => self.g3l);
        field!("g3r" => self.g3r);
        field!("gamma1" => self.rates.gamma1);
        field!("gamma2" => self.rates.gamma2);
        field!("gamma3" => self.rates.gamma3);
        field!("receive_kind" => self.receive_kind);
        field!("direction" => self.direction);
        field!("tl_convention" => self.emission_duration);
        field!("leakage_mode" => self.leakage_mode);
        field!("rtol" => self.rtol);
        field!("atol" => self.atol);
        field!("sample_dt" => self.sample_dt);
        DissipationRates::new(self.rates.gamma1, self.rates.gamma2, self.rates.gamma3)?;
        Ok(())
    }

    /// Every field as round-trippable text.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("v_l", self.v_l.to_string()),
            ("v_r", self.v_r.to_string()),
            ("g0", self.g0.to_string()),
            ("g3l", self.g3l.to_string()),
            ("g3r", self.g3r.to_string()),
            ("gamma1", self.rates.gamma1.to_string()),
            ("gamma2", self.rates.gamma2.to_string()),
            ("gamma3", self.rates.gamma3.to_string()),
            ("receive_kind", self.receive_kind.to_string()),
            ("direction", self.direction.to_string()),
            ("tl_convention", self.emission_duration.to_string()),
            ("leakage_mode", self.leakage_mode.to_string()),
            ("rtol", self.rtol.to_string()),
            ("atol", self.atol.to_string()),
            ("sample_dt", self.sample_dt.to_string()),
        ]
    }
}
