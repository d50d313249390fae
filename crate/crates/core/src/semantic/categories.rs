use serde::{Deserialize, Serialize};

use crate::error::Result;

const DEFAULT_CATEGORIES: &str = include_str!("../../data/gesture_categories.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Category {
    pub name: String,
    pub description: String,
    pub labels: Vec<String>,
}

/// Flat set of gesture categories, each listing the labels it contains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySystem {
    pub categories: Vec<Category>,
}

impl CategorySystem {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn contains(&self, category: &str) -> bool {
        self.categories.iter().any(|c| c.name == category)
    }

    /// Category whose label list contains `label`.
    pub fn category_of(&self, label: &str) -> Option<&str> {
        self.categories
            .iter()
            .find(|c| c.labels.iter().any(|l| l.eq_ignore_ascii_case(label)))
            .map(|c| c.name.as_str())
    }
}

/// The built-in category system.
pub fn default_categories() -> CategorySystem {
    CategorySystem::from_json(DEFAULT_CATEGORIES).expect("bundled category file parses")
}
