//! Shade plugin prevalence over a pom corpus.
//!
//! Two element-path patterns are matched, with element names compared by
//! local name so that namespaced poms match:
//!
//! * a `plugin` element with an `artifactId` child whose text is exactly
//!   `maven-shade-plugin`;
//! * among those, a plugin element with a `relocations` descendant.

use std::ops::{Add, AddAssign};

use roxmltree::Node;
use serde::{Deserialize, Serialize};

use super::{parse_document, SHADE_PLUGIN};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrevalenceRecord {
    pub pom_count: usize,
    pub shade_plugin_count: usize,
    pub relocation_count: usize,
}

impl PrevalenceRecord {
    pub fn shade_ratio(&self) -> f64 {
        ratio(self.shade_plugin_count, self.pom_count)
    }

    pub fn relocation_ratio(&self) -> f64 {
        ratio(self.relocation_count, self.pom_count)
    }

    pub fn record(&mut self, scan: PomScan) {
        self.pom_count += 1;
        match scan {
            PomScan::Shaded { relocations } => {
                self.shade_plugin_count += 1;
                self.relocation_count += usize::from(relocations);
            }
            PomScan::Plain | PomScan::Malformed => {}
        }
    }
}

fn ratio(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

impl Add for PrevalenceRecord {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            pom_count: self.pom_count + rhs.pom_count,
            shade_plugin_count: self.shade_plugin_count + rhs.shade_plugin_count,
            relocation_count: self.relocation_count + rhs.relocation_count,
        }
    }
}

impl AddAssign for PrevalenceRecord {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "match")]
pub enum PomScan {
    Malformed,
    Plain,
    Shaded { relocations: bool },
}

fn is_shade_plugin(node: Node<'_, '_>) -> bool {
    node.is_element()
        && node.tag_name().name() == "plugin"
        && node.children().any(|c| {
            c.is_element()
                && c.tag_name().name() == "artifactId"
                && c.children().any(|t| t.is_text() && t.text() == Some(SHADE_PLUGIN))
        })
}

pub fn scan_pom(bytes: &[u8]) -> PomScan {
    let doc = match parse_document(bytes) {
        Ok(doc) => doc,
        Err(err) => {
            log::warn!("{err}");
            return PomScan::Malformed;
        }
    };
    let mut shaded = false;
    let mut relocations = false;
    for plugin in doc.descendants().filter(|n| is_shade_plugin(*n)) {
        shaded = true;
        relocations |= plugin
            .descendants()
            .any(|n| n.is_element() && n.tag_name().name() == "relocations");
    }
    if shaded {
        PomScan::Shaded { relocations }
    } else {
        PomScan::Plain
    }
}

pub fn prevalence_scan<I, B>(corpus: I) -> PrevalenceRecord
where
    I: IntoIterator<Item = B>,
    B: AsRef<[u8]>,
{
    let mut record = PrevalenceRecord::default();
    for pom in corpus {
        record.record(scan_pom(pom.as_ref()));
    }
    record
}
