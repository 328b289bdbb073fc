//! Machine-readable capability checklist and two-tier scoring of capability
//! manifests: per-category sufficiency over mandatory items, plus an overall
//! completeness percentage.

mod items;
mod self_manifest;

pub use self_manifest::self_manifest;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisTable, Cell};

#[derive(Debug, Error)]
pub enum ChecklistError {
    #[error("unknown checklist item '{0}' in override")]
    UnknownOverrideItem(String),
    #[error("manifest answers unknown item '{0}'")]
    UnknownAnswerItem(String),
    #[error("manifest is missing answers for: {0:?}")]
    MissingAnswers(Vec<String>),
    #[error("json: {0}")]
    Json(String),
}

/// One checklist category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Category {
    pub prefix: &'static str,
    pub name: &'static str,
}

/// Static item definition.
#[derive(Debug, Clone, Copy)]
pub struct ItemDef {
    pub id: &'static str,
    pub mandatory: bool,
    pub description: &'static str,
}

/// One checklist entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecklistItem {
    pub id: String,
    pub category: String,
    pub description: String,
    pub mandatory: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checklist {
    pub items: Vec<ChecklistItem>,
}

impl Checklist {
    pub fn categories(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for item in &self.items {
            if !seen.contains(&item.category) {
                seen.push(item.category.clone());
            }
        }
        seen
    }

    pub fn item(&self, id: &str) -> Option<&ChecklistItem> {
        self.items.iter().find(|i| i.id == id)
    }
}

/// Mandatory-flag overrides; the item set itself is fixed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ChecklistOverride {
    #[serde(default)]
    pub mandatory: BTreeMap<String, bool>,
}

/// The built-in checklist.
pub fn builtin_checklist() -> Checklist {
    let category_name = |id: &str| -> &'static str {
        let prefix = id.split('.').next().unwrap_or("");
        items::CATEGORIES
            .iter()
            .find(|c| c.prefix == prefix)
            .map(|c| c.name)
            .unwrap_or("?")
    };
    Checklist {
        items: items::ITEMS
            .iter()
            .map(|def| ChecklistItem {
                id: def.id.to_string(),
                category: category_name(def.id).to_string(),
                description: def.description.to_string(),
                mandatory: def.mandatory,
            })
            .collect(),
    }
}

/// Built-in checklist with mandatory flags optionally re-flagged from an
/// override file. Overrides may only flip flags, never add or remove items.
pub fn load_checklist(override_json: Option<&str>) -> Result<Checklist, ChecklistError> {
    let mut checklist = builtin_checklist();
    if let Some(text) = override_json {
        let over: ChecklistOverride =
            serde_json::from_str(text).map_err(|e| ChecklistError::Json(e.to_string()))?;
        for (id, mandatory) in over.mandatory {
            match checklist.items.iter_mut().find(|i| i.id == id) {
                Some(item) => item.mandatory = mandatory,
                None => return Err(ChecklistError::UnknownOverrideItem(id)),
            }
        }
    }
    Ok(checklist)
}

/// The three manifest answer values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    UnderDevelopment,
}

/// A product's answers to every checklist item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityManifest {
    pub product: String,
    pub answers: BTreeMap<String, Answer>,
}

impl CapabilityManifest {
    pub fn from_json(text: &str) -> Result<Self, ChecklistError> {
        serde_json::from_str(text).map_err(|e| ChecklistError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: String,
    pub items: usize,
    pub yes: usize,
    pub no: usize,
    pub under_development: usize,
    /// Mandatory items not answered yes.
    pub missing_mandatory: Vec<String>,
    /// True iff every mandatory item in the category is answered yes.
    pub sufficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub product: String,
    pub categories: Vec<CategoryScore>,
    /// 100 x yes / items.
    pub completeness_percent: f64,
    pub yes: usize,
    pub no: usize,
    pub under_development: usize,
}

/// Two-tier scoring. An under-development answer counts as not-yes for both
/// sufficiency and completeness and is reported separately.
pub fn score(
    manifest: &CapabilityManifest,
    checklist: &Checklist,
) -> Result<ScoreReport, ChecklistError> {
    for id in manifest.answers.keys() {
        if checklist.item(id).is_none() {
            return Err(ChecklistError::UnknownAnswerItem(id.clone()));
        }
    }
    let missing: Vec<String> = checklist
        .items
        .iter()
        .filter(|i| !manifest.answers.contains_key(&i.id))
        .map(|i| i.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(ChecklistError::MissingAnswers(missing));
    }

    let mut categories: Vec<CategoryScore> = Vec::new();
    for category in checklist.categories() {
        let mut cs = CategoryScore {
            category: category.clone(),
            items: 0,
            yes: 0,
            no: 0,
            under_development: 0,
            missing_mandatory: Vec::new(),
            sufficient: true,
        };
        for item in checklist.items.iter().filter(|i| i.category == category) {
            cs.items += 1;
            match manifest.answers[&item.id] {
                Answer::Yes => cs.yes += 1,
                Answer::No => cs.no += 1,
                Answer::UnderDevelopment => cs.under_development += 1,
            }
            if item.mandatory && manifest.answers[&item.id] != Answer::Yes {
                cs.missing_mandatory.push(item.id.clone());
                cs.sufficient = false;
            }
        }
        categories.push(cs);
    }

    let yes = categories.iter().map(|c| c.yes).sum::<usize>();
    let no = categories.iter().map(|c| c.no).sum::<usize>();
    let under_development = categories.iter().map(|c| c.under_development).sum::<usize>();
    let total = checklist.items.len();
    Ok(ScoreReport {
        product: manifest.product.clone(),
        categories,
        completeness_percent: 100.0 * yes as f64 / total as f64,
        yes,
        no,
        under_development,
    })
}

impl ScoreReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("Capability report: {}\n", self.product));
        out.push_str(&format!(
            "Completeness: {:.1}% ({} yes / {} no / {} under development)\n\n",
            self.completeness_percent, self.yes, self.no, self.under_development
        ));
        for c in &self.categories {
            let verdict = if c.sufficient { "sufficient" } else { "INSUFFICIENT" };
            out.push_str(&format!(
                "  {:<34} {:>2}/{:<2} yes  {}\n",
                c.category, c.yes, c.items, verdict
            ));
            for id in &c.missing_mandatory {
                out.push_str(&format!("      missing mandatory: {id}\n"));
            }
        }
        out
    }

    pub fn to_table(&self) -> AnalysisTable {
        let mut table = AnalysisTable::new(&[
            "category",
            "items",
            "yes",
            "no",
            "under_development",
            "sufficient",
            "missing_mandatory",
        ]);
        for c in &self.categories {
            table.push(vec![
                Cell::Text(c.category.clone()),
                Cell::Int(c.items as i64),
                Cell::Int(c.yes as i64),
                Cell::Int(c.no as i64),
                Cell::Int(c.under_development as i64),
                Cell::Int(c.sufficient as i64),
                Cell::Text(c.missing_mandatory.join(";")),
            ]);
        }
        table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_manifest(answer: Answer) -> CapabilityManifest {
        let checklist = builtin_checklist();
        CapabilityManifest {
            product: "test".into(),
            answers: checklist.items.iter().map(|i| (i.id.clone(), answer)).collect(),
        }
    }

    #[test]
    fn builtin_has_12_categories_and_unique_ids() {
        let checklist = builtin_checklist();
        assert_eq!(checklist.categories().len(), 12);
        let mut ids: Vec<&str> = checklist.items.iter().map(|i| i.id.as_str()).collect();
        let before = ids.len();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), before, "duplicate item ids");
        assert!(checklist.items.iter().any(|i| i.mandatory));
    }

    #[test]
    fn override_flips_exactly_one_flag() {
        let base = builtin_checklist();
        let json = r#"{"mandatory": {"out.social_cost": true}}"#;
        let over = load_checklist(Some(json)).unwrap();
        let mut diffs = 0;
        for (a, b) in base.items.iter().zip(over.items.iter()) {
            assert_eq!(a.id, b.id);
            if a.mandatory != b.mandatory {
                diffs += 1;
                assert_eq!(b.id, "out.social_cost");
            }
        }
        assert_eq!(diffs, 1);
    }

    #[test]
    fn override_with_bogus_id_errors() {
        let json = r#"{"mandatory": {"nope.bogus": true}}"#;
        assert!(matches!(
            load_checklist(Some(json)),
            Err(ChecklistError::UnknownOverrideItem(_))
        ));
    }

    #[test]
    fn full_yes_scores_100_and_all_sufficient() {
        let checklist = builtin_checklist();
        let report = score(&full_manifest(Answer::Yes), &checklist).unwrap();
        assert_eq!(report.completeness_percent, 100.0);
        assert!(report.categories.iter().all(|c| c.sufficient));
        assert_eq!(report.yes, checklist.items.len());
    }

    #[test]
    fn single_mandatory_no_breaks_its_category() {
        let checklist = builtin_checklist();
        let mut manifest = full_manifest(Answer::Yes);
        manifest.answers.insert("ped.luggage".into(), Answer::No);
        let report = score(&manifest, &checklist).unwrap();
        let ped = report.categories.iter().find(|c| c.category == "Pedestrians").unwrap();
        assert!(!ped.sufficient);
        assert_eq!(ped.missing_mandatory, vec!["ped.luggage".to_string()]);
        assert!(report
            .categories
            .iter()
            .filter(|c| c.category != "Pedestrians")
            .all(|c| c.sufficient));
    }

    #[test]
    fn under_development_counts_against_both_tiers() {
        let checklist = builtin_checklist();
        let mut manifest = full_manifest(Answer::Yes);
        manifest.answers.insert("ped.luggage".into(), Answer::UnderDevelopment);
        let report = score(&manifest, &checklist).unwrap();
        let ped = report.categories.iter().find(|c| c.category == "Pedestrians").unwrap();
        assert!(!ped.sufficient);
        assert_eq!(report.under_development, 1);
        let expected = 100.0 * (checklist.items.len() - 1) as f64 / checklist.items.len() as f64;
        assert!((report.completeness_percent - expected).abs() < 1e-9);
    }

    #[test]
    fn missing_answers_are_listed() {
        let checklist = builtin_checklist();
        let mut manifest = full_manifest(Answer::Yes);
        manifest.answers.remove("2d.measuring");
        manifest.answers.remove("val.certified");
        match score(&manifest, &checklist).unwrap_err() {
            ChecklistError::MissingAnswers(ids) => {
                assert_eq!(ids, vec!["2d.measuring".to_string(), "val.certified".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flipping_yes_to_no_never_improves_things() {
        let checklist = builtin_checklist();
        let base = score(&full_manifest(Answer::Yes), &checklist).unwrap();
        for item in &checklist.items {
            let mut manifest = full_manifest(Answer::Yes);
            manifest.answers.insert(item.id.clone(), Answer::No);
            let report = score(&manifest, &checklist).unwrap();
            assert!(report.completeness_percent <= base.completeness_percent);
            for (c, b) in report.categories.iter().zip(base.categories.iter()) {
                assert!(!c.sufficient || b.sufficient);
            }
        }
    }

    #[test]
    fn completeness_is_invariant_under_category_permutation() {
        let mut checklist = builtin_checklist();
        let manifest = full_manifest(Answer::Yes);
        let before = score(&manifest, &checklist).unwrap().completeness_percent;
        checklist.items.reverse();
        let after = score(&manifest, &checklist).unwrap().completeness_percent;
        assert_eq!(before, after);
    }

    #[test]
    fn score_is_deterministic() {
        let checklist = builtin_checklist();
        let manifest = self_manifest();
        let a = score(&manifest, &checklist).unwrap();
        let b = score(&manifest, &checklist).unwrap();
        assert_eq!(a, b);
    }
}
