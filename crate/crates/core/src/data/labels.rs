use serde::{Deserialize, Serialize};

/// Per-frame annotation class.
///
/// Indices 0 to 8 are the model's output classes. `Uncertain` marks frames
/// the annotators could not place; they are fed to the model but never used
/// as targets or scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum LabelClass {
    Outside = 0,
    Insertion = 1,
    Cecum = 2,
    Ileum = 3,
    Ascending = 4,
    Transverse = 5,
    Descending = 6,
    Sigmoid = 7,
    Rectum = 8,
    Uncertain = 9,
}

impl LabelClass {
    pub const ALL: [LabelClass; 10] = [
        LabelClass::Outside,
        LabelClass::Insertion,
        LabelClass::Cecum,
        LabelClass::Ileum,
        LabelClass::Ascending,
        LabelClass::Transverse,
        LabelClass::Descending,
        LabelClass::Sigmoid,
        LabelClass::Rectum,
        LabelClass::Uncertain,
    ];

    /// The nine classes the model predicts.
    pub const TARGETS: [LabelClass; 9] = [
        LabelClass::Outside,
        LabelClass::Insertion,
        LabelClass::Cecum,
        LabelClass::Ileum,
        LabelClass::Ascending,
        LabelClass::Transverse,
        LabelClass::Descending,
        LabelClass::Sigmoid,
        LabelClass::Rectum,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Canonical lowercase name used in annotation files.
    pub fn name(self) -> &'static str {
        match self {
            LabelClass::Outside => "outside",
            LabelClass::Insertion => "insertion",
            LabelClass::Cecum => "cecum",
            LabelClass::Ileum => "ileum",
            LabelClass::Ascending => "ascending",
            LabelClass::Transverse => "transverse",
            LabelClass::Descending => "descending",
            LabelClass::Sigmoid => "sigmoid",
            LabelClass::Rectum => "rectum",
            LabelClass::Uncertain => "uncertain",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn is_target(self) -> bool {
        self != LabelClass::Uncertain
    }
}

impl std::fmt::Display for LabelClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
