//! JSON file formats: pattern / configuration files and plan exports.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::Point;
use crate::pathing::PathPlan;
use crate::protocol::ProtocolParams;
use crate::symmetry::Pattern;

/// `{"points": [[x, y], ...]}`. Used both for target patterns and for
/// robot configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternFile {
    pub points: Vec<Point>,
}

impl PatternFile {
    pub fn parse(text: &str) -> Result<PatternFile> {
        Ok(serde_json::from_str(text)?)
    }

    /// Validated pattern (at least one point, finite, pairwise distinct).
    pub fn into_pattern(self) -> Result<Pattern> {
        Pattern::new(self.points)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn read_pattern(path: &Path) -> Result<Pattern> {
    PatternFile::parse(&fs::read_to_string(path)?)?.into_pattern()
}

/// Reads a robot configuration; same format as a pattern.
pub fn read_configuration(path: &Path) -> Result<Vec<Point>> {
    Ok(read_pattern(path)?.points)
}

pub fn write_pattern(path: &Path, points: &[Point]) -> Result<()> {
    let text = PatternFile { points: points.to_vec() }.to_json()?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Exported drawing path of the first component, with the parameters it
/// was built for. Coordinates are in the working frame: the normalised
/// pattern rotated by `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub params: ProtocolParams,
    pub theta: f64,
    /// Pattern indices of the first component.
    pub component: Vec<usize>,
    pub vertices: Vec<Point>,
    pub coverage: Vec<Vec<usize>>,
    pub tail_start: usize,
    pub hops: usize,
    pub min_margin: f64,
    /// `(formation size, state index)` carried by every vertex.
    pub labels: Vec<(usize, u128)>,
}

impl PlanFile {
    pub fn new(params: ProtocolParams, plan: &PathPlan) -> PlanFile {
        PlanFile {
            params,
            theta: plan.theta,
            component: plan.component.clone(),
            vertices: plan.path.vertices.clone(),
            coverage: plan.path.coverage.clone(),
            tail_start: plan.path.tail_start,
            hops: plan.path.hops(),
            min_margin: plan.min_margin,
            labels: plan.labels.clone(),
        }
    }

    pub fn parse(text: &str) -> Result<PlanFile> {
        let p: PlanFile = serde_json::from_str(text)?;
        if p.vertices.is_empty() || p.coverage.len() != p.vertices.len() || p.tail_start > p.vertices.len() {
            return domain("plan file is inconsistent");
        }
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Largest vertex deviation from `other`, or `None` when the paths have
    /// different lengths or coverage.
    pub fn deviation(&self, other: &PlanFile) -> Option<f64> {
        if self.vertices.len() != other.vertices.len()
            || self.coverage != other.coverage
            || self.tail_start != other.tail_start
        {
            return None;
        }
        Some(self.vertices.iter().zip(&other.vertices).map(|(a, b)| a.dist(*b)).fold(0.0, f64::max))
    }
}

pub fn read_plan(path: &Path) -> Result<PlanFile> {
    PlanFile::parse(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::random_connected;
    use crate::protocol::{derive_plan, DEFAULT_C};

    #[test]
    fn pattern_file_round_trips() {
        let f = PatternFile::parse(r#"{"points": [[0, 0], [1, 0.5]]}"#).unwrap();
        assert_eq!(f.points[1], Point::new(1.0, 0.5));
        let again = PatternFile::parse(&f.to_json().unwrap()).unwrap();
        assert_eq!(again, f);
    }

    #[test]
    fn invalid_patterns_are_rejected() {
        assert!(PatternFile::parse(r#"{"points": []}"#).unwrap().into_pattern().is_err());
        assert!(PatternFile::parse(r#"{"points": [[0,0],[0,0]]}"#).unwrap().into_pattern().is_err());
        assert!(PatternFile::parse(r#"{"points": [[0]]}"#).is_err());
        assert!(PatternFile::parse("not json").is_err());
    }

    #[test]
    fn plan_file_round_trips_with_wide_labels() {
        let (params, _, plan) = derive_plan(&random_connected(5, 12), DEFAULT_C).unwrap();
        let mut f = PlanFile::new(params, &plan);
        f.labels.push((9, u128::MAX - 3));
        let back = PlanFile::parse(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.deviation(&f), Some(0.0));
    }
}
