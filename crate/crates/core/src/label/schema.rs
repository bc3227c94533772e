use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit RGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const WHITE: Rgb = Rgb([255, 255, 255]);
    pub const BLACK: Rgb = Rgb([0, 0, 0]);

    pub fn to_hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for Rgb {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let hex = s.trim().trim_start_matches('#');
        if hex.len() != 6 {
            return Err(Error::InvalidSchema(format!("bad color {s:?}, expected #rrggbb")));
        }
        let mut out = [0u8; 3];
        for (i, chunk) in out.iter_mut().enumerate() {
            *chunk = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|_| Error::InvalidSchema(format!("bad color {s:?}")))?;
        }
        Ok(Rgb(out))
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Segmentation task. Each task has a fixed, ordered class list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Blk,
    Blkx,
    Sep,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Blk, Task::Blkx, Task::Sep];

    pub fn name(self) -> &'static str {
        match self {
            Task::Blk => "blk",
            Task::Blkx => "blkx",
            Task::Sep => "sep",
        }
    }

    /// Class names in index order. Index 0 is always BACKGROUND.
    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            Task::Blk => &["BACKGROUND", "TXT", "TAB"],
            Task::Blkx => &["BACKGROUND", "TXT", "TAB", "ILLUSTRATION"],
            Task::Sep => &["BACKGROUND", "H", "V", "T"],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "blk" => Ok(Task::Blk),
            "blkx" => Ok(Task::Blkx),
            "sep" => Ok(Task::Sep),
            other => Err(Error::InvalidSchema(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    Background,
    /// Solid block classes: TXT, TAB, ILLUSTRATION.
    Region,
    /// Thin line classes: H, V, T.
    Separator,
}

impl ClassKind {
    fn of(name: &str) -> ClassKind {
        match name {
            "BACKGROUND" => ClassKind::Background,
            "H" | "V" | "T" => ClassKind::Separator,
            _ => ClassKind::Region,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelClass {
    pub name: String,
    pub color: Rgb,
    /// Weight used by the label-preserving area filter. Always positive.
    pub weight: f64,
}

impl LabelClass {
    pub fn kind(&self) -> ClassKind {
        ClassKind::of(&self.name)
    }
}

/// Class list, palette and scaling weights of one segmentation task.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSchema {
    task: Task,
    classes: Vec<LabelClass>,
}

/// Index of the BACKGROUND class in every schema.
pub const BACKGROUND: u8 = 0;

const ORANGE: Rgb = Rgb([255, 165, 0]);
const MAGENTA: Rgb = Rgb([255, 0, 255]);
const RED: Rgb = Rgb([255, 0, 0]);
const GREEN: Rgb = Rgb([0, 255, 0]);
const BLUE: Rgb = Rgb([0, 0, 255]);

pub const DEFAULT_REGION_WEIGHT: f64 = 1.0;
pub const DEFAULT_SEPARATOR_WEIGHT: f64 = 4.0;

impl LabelSchema {
    pub fn new(task: Task, classes: Vec<LabelClass>) -> Result<Self> {
        let expected = task.class_names();
        if classes.len() != expected.len() {
            return Err(Error::InvalidSchema(format!(
                "task {task} needs {} classes, got {}",
                expected.len(),
                classes.len()
            )));
        }
        for (class, name) in classes.iter().zip(expected) {
            if class.name != *name {
                return Err(Error::InvalidSchema(format!(
                    "task {task}: expected class {name} in this position, got {}",
                    class.name
                )));
            }
            if !(class.weight.is_finite() && class.weight > 0.0) {
                return Err(Error::InvalidSchema(format!(
                    "class {} has non-positive weight {}",
                    class.name, class.weight
                )));
            }
        }
        for (i, a) in classes.iter().enumerate() {
            if let Some(b) = classes[i + 1..].iter().find(|b| b.color == a.color) {
                return Err(Error::InvalidSchema(format!(
                    "classes {} and {} share color {}",
                    a.name, b.name, a.color
                )));
            }
        }
        Ok(LabelSchema { task, classes })
    }

    /// Default palette: white background, black text, orange tables, magenta
    /// illustrations; red/green/blue for H/V/T separators.
    pub fn builtin(task: Task) -> Self {
        let palette: &[Rgb] = match task {
            Task::Blk => &[Rgb::WHITE, Rgb::BLACK, ORANGE],
            Task::Blkx => &[Rgb::WHITE, Rgb::BLACK, ORANGE, MAGENTA],
            Task::Sep => &[Rgb::WHITE, RED, GREEN, BLUE],
        };
        let classes = task
            .class_names()
            .iter()
            .zip(palette)
            .map(|(name, &color)| {
                let weight = match ClassKind::of(name) {
                    ClassKind::Separator => DEFAULT_SEPARATOR_WEIGHT,
                    _ => DEFAULT_REGION_WEIGHT,
                };
                LabelClass {
                    name: name.to_string(),
                    color,
                    weight,
                }
            })
            .collect();
        LabelSchema::new(task, classes).expect("builtin schemas are valid")
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn classes(&self) -> &[LabelClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class(&self, idx: u8) -> Option<&LabelClass> {
        self.classes.get(idx as usize)
    }

    pub fn index_of(&self, name: &str) -> Option<u8> {
        self.classes
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
            .map(|i| i as u8)
    }

    pub fn index_of_color(&self, color: Rgb) -> Option<u8> {
        self.classes
            .iter()
            .position(|c| c.color == color)
            .map(|i| i as u8)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.weight).collect()
    }

    pub fn palette(&self) -> Vec<Rgb> {
        self.classes.iter().map(|c| c.color).collect()
    }

    /// Returns a copy with one class weight replaced.
    pub fn with_weight(&self, class: &str, weight: f64) -> Result<Self> {
        let idx = self
            .index_of(class)
            .ok_or_else(|| Error::InvalidSchema(format!("no class {class} in task {}", self.task)))?;
        let mut classes = self.classes.clone();
        classes[idx as usize].weight = weight;
        LabelSchema::new(self.task, classes)
    }

    pub fn with_uniform_weights(&self) -> Self {
        let classes = self
            .classes
            .iter()
            .cloned()
            .map(|c| LabelClass { weight: 1.0, ..c })
            .collect();
        LabelSchema::new(self.task, classes).expect("uniform weights are valid")
    }

    /// Parses a schema config file. Unlisted classes keep their defaults.
    ///
    /// ```toml
    /// task = "sep"
    ///
    /// [classes.V]
    /// color = "#00ff00"
    /// weight = 6.0
    /// ```
    pub fn from_config_str(text: &str) -> Result<Self> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| Error::InvalidSchema(e.message().to_string()))?;
        let mut schema = LabelSchema::builtin(file.task);
        let mut classes = schema.classes.clone();
        for (name, overrides) in &file.classes {
            let idx = schema.index_of(name).ok_or_else(|| {
                Error::InvalidSchema(format!("no class {name} in task {}", file.task))
            })? as usize;
            if let Some(color) = &overrides.color {
                classes[idx].color = color.parse()?;
            }
            if let Some(weight) = overrides.weight {
                classes[idx].weight = weight;
            }
        }
        schema = LabelSchema::new(file.task, classes)?;
        Ok(schema)
    }

    pub fn load_config(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }

    pub fn to_config_string(&self) -> String {
        let file = SchemaFile {
            task: self.task,
            classes: self
                .classes
                .iter()
                .map(|c| {
                    (
                        c.name.clone(),
                        ClassOverride {
                            color: Some(c.color.to_hex()),
                            weight: Some(c.weight),
                        },
                    )
                })
                .collect(),
        };
        toml::to_string(&file).expect("schema serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemaFile {
    task: Task,
    #[serde(default)]
    classes: BTreeMap<String, ClassOverride>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassOverride {
    color: Option<String>,
    weight: Option<f64>,
}
