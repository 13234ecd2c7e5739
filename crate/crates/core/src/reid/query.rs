use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{BestShotRecord, Index, IndexLabels};
use crate::dataset::LabelSpace;
use crate::{Error, Result};

pub const COMBINED_SCORE: &str = "product of matched attribute scores";

/// A query as given by a user: names still unresolved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub classids: Vec<usize>,
    pub make: Option<String>,
    pub model: Option<String>,
    pub colors: Vec<String>,
    pub min_shape_score: Option<f64>,
    pub min_color_score: Option<f64>,
    pub top_k: Option<usize>,
}

/// A validated query over class indices and color indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub classes: Option<BTreeSet<usize>>,
    pub colors: Option<BTreeSet<usize>>,
    pub min_shape_score: f64,
    pub min_color_score: f64,
    pub top_k: Option<usize>,
}

impl QuerySpec {
    /// Resolves make/model and color names through the label spaces.
    /// Make and model are matched case-insensitively against every member of
    /// every class, so models sharing a class id resolve to that class.
    pub fn resolve(&self, labels: &IndexLabels) -> Result<Query> {
        let LabelSpace::MakeModel { classes: table } = &labels.makemodel else {
            return Err(Error::InvalidState("index has no make/model class table".into()));
        };
        let mut classes: Option<BTreeSet<usize>> = None;
        if !self.classids.is_empty() {
            if let Some(&bad) = self.classids.iter().find(|&&c| c >= table.len()) {
                return Err(Error::Name {
                    kind: "classid",
                    name: bad.to_string(),
                    suggestions: vec![format!("0..{}", table.len())],
                });
            }
            classes = Some(self.classids.iter().copied().collect());
        }
        if self.make.is_some() || self.model.is_some() {
            let eq = |a: &str, b: &Option<String>| b.as_ref().is_none_or(|b| a.eq_ignore_ascii_case(b.trim()));
            let found: BTreeSet<usize> = table
                .iter()
                .filter(|c| c.members.iter().any(|m| eq(&m.make, &self.make) && eq(&m.model, &self.model)))
                .map(|c| c.classid)
                .collect();
            let wanted = [self.make.as_deref(), self.model.as_deref()].into_iter().flatten().collect::<Vec<_>>().join(" ");
            if found.is_empty() {
                let names: Vec<String> = table.iter().flat_map(|c| c.members.iter().map(|m| format!("{} {}", m.make, m.model))).collect();
                return Err(Error::Name {
                    kind: "make/model",
                    suggestions: nearest(&wanted, &names),
                    name: wanted,
                });
            }
            classes = Some(match classes {
                Some(ids) => ids.intersection(&found).copied().collect(),
                None => found,
            });
        }
        let mut colors = None;
        if !self.colors.is_empty() {
            let names = labels.color.names();
            let mut set = BTreeSet::new();
            for c in &self.colors {
                match names.iter().position(|n| n.eq_ignore_ascii_case(c.trim())) {
                    Some(i) => {
                        set.insert(i);
                    }
                    None => {
                        return Err(Error::Name {
                            kind: "color",
                            name: c.clone(),
                            suggestions: nearest(c, &names),
                        })
                    }
                }
            }
            colors = Some(set);
        }
        if classes.is_none() && colors.is_none() {
            return Err(Error::InvalidArgument(
                "query needs at least one attribute constraint (classid, make/model or color)".into(),
            ));
        }
        let min = |v: Option<f64>, present: bool, what: &str| -> Result<f64> {
            match v {
                None => Ok(0.0),
                Some(_) if !present => Err(Error::InvalidArgument(format!("a minimum {what} score needs a {what} constraint"))),
                Some(s) if (0.0..=1.0).contains(&s) => Ok(s),
                Some(s) => Err(Error::InvalidArgument(format!("minimum {what} score {s} outside [0, 1]"))),
            }
        };
        Ok(Query {
            min_shape_score: min(self.min_shape_score, classes.is_some(), "shape")?,
            min_color_score: min(self.min_color_score, colors.is_some(), "color")?,
            classes,
            colors,
            top_k: self.top_k,
        })
    }
}

/// Up to three entries closest to `name` by normalized edit distance.
fn nearest(name: &str, candidates: &[String]) -> Vec<String> {
    let wanted = name.to_lowercase();
    let mut scored: Vec<(f64, &String)> = candidates
        .iter()
        .map(|c| (strsim::normalized_levenshtein(&wanted, &c.to_lowercase()), c))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.dedup_by(|a, b| a.1 == b.1);
    scored.into_iter().take(3).map(|(_, c)| c.clone()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMatch<'a> {
    pub record: &'a BestShotRecord,
    pub score: f64,
}

impl Query {
    /// Combined score when `record`'s top-1 attributes satisfy the query.
    pub fn score(&self, record: &BestShotRecord) -> Option<f64> {
        let mut score = 1.0;
        if let Some(classes) = &self.classes {
            let top = record.top_class();
            if !classes.contains(&top.classid) || top.score < self.min_shape_score {
                return None;
            }
            score *= top.score;
        }
        if let Some(colors) = &self.colors {
            if !colors.contains(&record.color.index) || record.color.score < self.min_color_score {
                return None;
            }
            score *= record.color.score;
        }
        Some(score)
    }
}

/// Matching records by combined score (descending), ties by id.
pub fn query<'a>(index: &'a Index, q: &Query) -> Vec<QueryMatch<'a>> {
    let mut hits: Vec<QueryMatch> = index
        .records()
        .iter()
        .filter_map(|r| q.score(r).map(|score| QueryMatch { record: r, score }))
        .collect();
    sort_matches(&mut hits);
    if let Some(k) = q.top_k {
        hits.truncate(k);
    }
    hits
}

fn sort_matches(hits: &mut [QueryMatch]) {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.record.id.cmp(&b.record.id)));
}

/// Replaces each score by the cosine between the record descriptor and
/// `probe`, then re-sorts.
pub fn rerank_by_descriptor<'a>(mut hits: Vec<QueryMatch<'a>>, probe: &[f64]) -> Result<Vec<QueryMatch<'a>>> {
    for h in &mut hits {
        if h.record.descriptor.len() != probe.len() {
            return Err(Error::Incompatible {
                expected: format!("{}-dimensional descriptors", probe.len()),
                found: format!("{} in record {:?}", h.record.descriptor.len(), h.record.id),
            });
        }
        h.score = h.record.descriptor.iter().zip(probe).map(|(a, b)| a * b).sum();
    }
    sort_matches(&mut hits);
    Ok(hits)
}
