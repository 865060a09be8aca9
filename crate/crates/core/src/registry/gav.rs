//! Artifact coordinates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoordinateError {
    #[error("expected `group:artifact:version`, got `{0}`")]
    Shape(String),
    #[error("expected `group:artifact`, got `{0}`")]
    GaShape(String),
    #[error("empty {field} in `{input}`")]
    Empty { field: &'static str, input: String },
    #[error("whitespace in {field} of `{input}`")]
    Whitespace { field: &'static str, input: String },
}

fn check_part(field: &'static str, value: &str, input: &str) -> Result<(), CoordinateError> {
    if value.is_empty() {
        return Err(CoordinateError::Empty {
            field,
            input: input.to_string(),
        });
    }
    if value.chars().any(char::is_whitespace) {
        return Err(CoordinateError::Whitespace {
            field,
            input: input.to_string(),
        });
    }
    Ok(())
}

/// Group/artifact/version coordinates of one registry artifact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Gav {
    group: String,
    artifact: String,
    version: String,
}

impl Gav {
    pub fn new(
        group: impl Into<String>,
        artifact: impl Into<String>,
        version: impl Into<String>,
    ) -> Result<Self, CoordinateError> {
        let (group, artifact, version) = (group.into(), artifact.into(), version.into());
        let rendered = format!("{group}:{artifact}:{version}");
        check_part("group", &group, &rendered)?;
        check_part("artifact", &artifact, &rendered)?;
        check_part("version", &version, &rendered)?;
        if group.contains(':') || artifact.contains(':') || version.contains(':') {
            return Err(CoordinateError::Shape(rendered));
        }
        Ok(Self {
            group,
            artifact,
            version,
        })
    }

    pub fn group(&self) -> &str {
        &self.group
    }

    pub fn artifact(&self) -> &str {
        &self.artifact
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn ga(&self) -> Ga {
        Ga {
            group: self.group.clone(),
            artifact: self.artifact.clone(),
        }
    }

    /// `<group-as-path>/<artifact>/<version>` in the standard repository layout.
    pub fn repository_dir(&self) -> String {
        format!(
            "{}/{}/{}",
            self.group.replace('.', "/"),
            self.artifact,
            self.version
        )
    }
}

impl fmt::Display for Gav {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.group, self.artifact, self.version)
    }
}

impl FromStr for Gav {
    type Err = CoordinateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [g, a, v] => Gav::new(*g, *a, *v),
            _ => Err(CoordinateError::Shape(s.to_string())),
        }
    }
}

/// Group/artifact pair: a component with versions aggregated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ga {
    group: String,
    artifact: String,
}

impl Ga {
    pub fn new(group: impl Into<String>, artifact: impl Into<String>) -> Result<Self, CoordinateError> {
        let (group, artifact) = (group.into(), artifact.into());
        let rendered = format!("{group}:{artifact}");
        check_part("group", &group, &rendered)?;
        check_part("artifact", &artifact, &rendered)?;
        if group.contains(':') || artifact.contains(':') {
            return Err(CoordinateError::GaShape(rendered));
        }
        Ok(Self { group, artifact })
    }

    pub fn group(&self) -> &str {
        &self.group
    }

    pub fn artifact(&self) -> &str {
        &self.artifact
    }

    pub fn matches(&self, group: &str, artifact: &str) -> bool {
        self.group == group && self.artifact == artifact
    }
}

impl fmt::Display for Ga {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.group, self.artifact)
    }
}

impl FromStr for Ga {
    type Err = CoordinateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split(':').collect::<Vec<_>>().as_slice() {
            [g, a] => Ga::new(*g, *a),
            _ => Err(CoordinateError::GaShape(s.to_string())),
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Gav);
string_serde!(Ga);
