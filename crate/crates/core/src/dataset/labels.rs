use serde::{Deserialize, Serialize};

/// A named palette color with its reference RGB in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorEntry {
    pub name: String,
    pub rgb: [f64; 3],
}

/// White, black, gray, silver, red, blue, green, yellow, brown, beige.
pub fn default_palette() -> Vec<ColorEntry> {
    [
        ("white", [0.95, 0.95, 0.95]),
        ("black", [0.08, 0.08, 0.09]),
        ("gray", [0.45, 0.45, 0.46]),
        ("silver", [0.72, 0.73, 0.76]),
        ("red", [0.78, 0.10, 0.10]),
        ("blue", [0.10, 0.22, 0.72]),
        ("green", [0.12, 0.52, 0.20]),
        ("yellow", [0.93, 0.82, 0.12]),
        ("brown", [0.42, 0.26, 0.12]),
        ("beige", [0.86, 0.78, 0.60]),
    ]
    .into_iter()
    .map(|(name, rgb)| ColorEntry {
        name: name.to_string(),
        rgb,
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MakeModel {
    pub make: String,
    pub model: String,
}

impl MakeModel {
    pub fn new(make: &str, model: &str) -> Self {
        Self {
            make: make.to_string(),
            model: model.to_string(),
        }
    }
}

impl std::fmt::Display for MakeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.make, self.model)
    }
}

/// One shape class. Several make/model pairs with the same body shell share
/// a class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub classid: usize,
    pub members: Vec<MakeModel>,
}

/// Class names a checkpoint's head predicts over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum LabelSpace {
    MakeModel { classes: Vec<ClassEntry> },
    Color { palette: Vec<ColorEntry> },
    Unnamed { classes: usize },
}

impl LabelSpace {
    pub fn len(&self) -> usize {
        match self {
            LabelSpace::MakeModel { classes } => classes.len(),
            LabelSpace::Color { palette } => palette.len(),
            LabelSpace::Unnamed { classes } => *classes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Display name per class index.
    pub fn names(&self) -> Vec<String> {
        match self {
            LabelSpace::MakeModel { classes } => classes
                .iter()
                .map(|c| match c.members.first() {
                    Some(m) => m.to_string(),
                    None => format!("class{}", c.classid),
                })
                .collect(),
            LabelSpace::Color { palette } => palette.iter().map(|c| c.name.clone()).collect(),
            LabelSpace::Unnamed { classes } => (0..*classes).map(|i| format!("class{i}")).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("label spaces always serialize")
    }
}
