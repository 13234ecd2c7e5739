use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::labels::{ClassEntry, ColorEntry, LabelSpace, MakeModel};
use super::roi::BBox;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum View {
    Front,
    Rear,
    Side,
    FrontQuarter,
    RearQuarter,
}

impl View {
    pub const ALL: [View; 5] = [View::Front, View::Rear, View::Side, View::FrontQuarter, View::RearQuarter];

    pub fn name(self) -> &'static str {
        match self {
            View::Front => "front",
            View::Rear => "rear",
            View::Side => "side",
            View::FrontQuarter => "front-quarter",
            View::RearQuarter => "rear-quarter",
        }
    }
}

impl std::str::FromStr for View {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        View::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown view {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quality {
    Good,
    Bad,
}

impl Quality {
    pub fn name(self) -> &'static str {
        match self {
            Quality::Good => "good",
            Quality::Bad => "bad",
        }
    }
}

/// One labeled image (or one region of an image).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Path relative to the manifest's directory.
    pub image: String,
    pub make: String,
    pub model: String,
    pub classid: usize,
    pub color: String,
    pub view: View,
    pub quality: Quality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub palette: Vec<ColorEntry>,
    pub classes: Vec<ClassEntry>,
}

impl ManifestHeader {
    pub fn make_model_labels(&self) -> LabelSpace {
        LabelSpace::MakeModel {
            classes: self.classes.clone(),
        }
    }

    pub fn color_labels(&self) -> LabelSpace {
        LabelSpace::Color {
            palette: self.palette.clone(),
        }
    }

    pub fn color_index(&self, name: &str) -> Option<usize> {
        self.palette.iter().position(|c| c.name == name)
    }
}

/// Header line followed by one JSON record per line.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<SampleRecord>,
    /// Directory image paths resolve against; set by [`Manifest::load`].
    pub base_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: ManifestHeader,
}

/// A broken invariant, tied to a record index when it concerns one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub record: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.record {
            Some(i) => write!(f, "record {i}: {}", self.message),
            None => write!(f, "header: {}", self.message),
        }
    }
}

impl Manifest {
    pub fn new(header: ManifestHeader, records: Vec<SampleRecord>) -> Self {
        Self {
            header,
            records,
            base_dir: None,
        }
    }

    pub fn image_path(&self, record: &SampleRecord) -> PathBuf {
        match &self.base_dir {
            Some(dir) => dir.join(&record.image),
            None => PathBuf::from(&record.image),
        }
    }

    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = n + 1;
            if header.is_none() {
                let h: HeaderLine = serde_json::from_str(line)
                    .map_err(|e| Error::format(source, format!("line {lineno}: bad header: {e}")))?;
                header = Some(h.header);
            } else {
                let r: SampleRecord = serde_json::from_str(line)
                    .map_err(|e| Error::format(source, format!("line {lineno}: {e}")))?;
                records.push(r);
            }
        }
        let header = header.ok_or_else(|| Error::format(source, "missing header line"))?;
        Ok(Self {
            header,
            records,
            base_dir: source.parent().map(Path::to_path_buf),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = serde_json::to_string(&HeaderLine {
            header: self.header.clone(),
        })
        .expect("serializable header");
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{}", serde_json::to_string(r).expect("serializable record"));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::train::write_atomic(path, self.to_text().as_bytes())
    }

    /// Copy sharing the header and base directory but holding `records`.
    pub fn with_records(&self, records: Vec<SampleRecord>) -> Self {
        Self {
            header: self.header.clone(),
            records,
            base_dir: self.base_dir.clone(),
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_manifest(self)
    }
}

pub fn validate_manifest(m: &Manifest) -> Vec<Violation> {
    let mut out = Vec::new();
    let header_issue = |out: &mut Vec<Violation>, message: String| out.push(Violation { record: None, message });

    let mut names = BTreeSet::new();
    for c in &m.header.palette {
        if !names.insert(c.name.as_str()) {
            header_issue(&mut out, format!("duplicate palette color {:?}", c.name));
        }
    }
    let mut classes: BTreeMap<usize, &ClassEntry> = BTreeMap::new();
    for (i, c) in m.header.classes.iter().enumerate() {
        if c.classid != i {
            header_issue(&mut out, format!("class table entry {i} has classid {}", c.classid));
        }
        if classes.insert(c.classid, c).is_some() {
            header_issue(&mut out, format!("duplicate classid {}", c.classid));
        }
    }

    let mut seen: BTreeMap<(&str, Option<BBox>), usize> = BTreeMap::new();
    for (i, r) in m.records.iter().enumerate() {
        let mut issue = |message: String| out.push(Violation { record: Some(i), message });
        match classes.get(&r.classid) {
            None => issue(format!("classid {} not in class table", r.classid)),
            Some(entry) => {
                if !entry.members.contains(&MakeModel::new(&r.make, &r.model)) {
                    issue(format!("{}/{} is not a member of class {}", r.make, r.model, r.classid));
                }
            }
        }
        if m.header.color_index(&r.color).is_none() {
            issue(format!("color {:?} not in palette", r.color));
        }
        if let Some(prev) = seen.insert((r.image.as_str(), r.bbox), i) {
            issue(format!("duplicates record {prev} ({} with the same bbox)", r.image));
        }
        let path = m.image_path(r);
        match image::image_dimensions(&path) {
            Err(_) if !path.exists() => issue(format!("missing image file {}", path.display())),
            Err(e) => issue(format!("unreadable image {}: {e}", path.display())),
            Ok((w, h)) => {
                if let Some(b) = r.bbox {
                    if !b.fits(w as usize, h as usize) {
                        issue(format!("bbox {b:?} outside {w}x{h} image"));
                    }
                }
            }
        }
    }
    out
}
