use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The six entries of the model pruning ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Oracle,
    Cb,
    Cpe,
    PgIrs,
    PgGr,
    Prw,
}

/// How a component participates in a variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Absent,
    /// Trainable network owned by the agent.
    Trained,
    /// Supplied from outside without learning.
    External,
}

/// Component pattern of one variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariantSpec {
    pub variant: Variant,
    pub fm: Role,
    pub ap: Role,
    pub ir: Role,
    pub vf: Role,
    pub mm: Role,
}

impl Variant {
    pub const ALL: [Variant; 6] = [Variant::Oracle, Variant::Cb, Variant::Cpe, Variant::PgIrs, Variant::PgGr, Variant::Prw];
    /// Variants that act in the environment.
    pub const AGENTS: [Variant; 5] = [Variant::Cb, Variant::Cpe, Variant::PgIrs, Variant::PgGr, Variant::Prw];

    /// Short lowercase identifier used on the command line and in paths.
    pub fn id(self) -> &'static str {
        match self {
            Variant::Oracle => "oracle",
            Variant::Cb => "cb",
            Variant::Cpe => "cpe",
            Variant::PgIrs => "pgirs",
            Variant::PgGr => "pggr",
            Variant::Prw => "prw",
        }
    }

    /// Display label, e.g. `C/B`.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Oracle => "Oracle",
            Variant::Cb => "C/B",
            Variant::Cpe => "C/PE",
            Variant::PgIrs => "PG/IRS",
            Variant::PgGr => "PG/GR",
            Variant::Prw => "P/RW",
        }
    }

    pub fn spec(self) -> VariantSpec {
        use Role::*;
        let (fm, ap, ir, vf, mm) = match self {
            Variant::Oracle => (Trained, Absent, Absent, Absent, Absent),
            Variant::Prw => (Trained, External, Absent, Absent, Absent),
            Variant::PgGr => (Trained, Trained, Absent, Absent, Absent),
            Variant::PgIrs => (Trained, Trained, External, Absent, Absent),
            Variant::Cpe => (Trained, Trained, Trained, Trained, Absent),
            Variant::Cb => (Trained, Trained, Trained, Trained, Trained),
        };
        VariantSpec { variant: self, fm, ap, ir, vf, mm }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.id() == key)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}; expected one of oracle, cb, cpe, pgirs, pggr, prw")))
    }
}
