//! Norms, angles and class projections of the Shapley compositions in a
//! document.

use std::fmt::Write;

use serde::Serialize;

use crate::class_geometry::{class_compositions, project};
use crate::document::ExplanationDocument;
use crate::error::Result;

/// Norms below this are treated as the neutral element; cosines involving
/// them are undefined.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRow {
    pub name: String,
    pub norm: f64,
    /// Inner product with each class-composition, in class order.
    pub projections: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub class_names: Vec<String>,
    pub predicted_class: String,
    /// Features sorted by descending norm.
    pub features: Vec<FeatureRow>,
    /// Cosines between features in the order of `features`; `None` when
    /// either has zero norm.
    pub cosines: Vec<Vec<Option<f64>>>,
    pub angles_degrees: Vec<Vec<Option<f64>>>,
    pub efficiency_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

pub fn build_report(doc: &ExplanationDocument) -> Result<Report> {
    let classes = class_compositions(doc.classes())?;
    let mut order: Vec<usize> = (0..doc.features.len()).collect();
    let norms: Vec<f64> = doc.features.iter().map(|f| f.shapley.norm()).collect();
    // Stable: equal norms keep input order.
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut features = Vec::with_capacity(order.len());
    for &i in &order {
        let f = &doc.features[i];
        let projections = classes
            .iter()
            .map(|c| project(&f.shapley, c))
            .collect::<Result<Vec<_>>>()?;
        features.push(FeatureRow {
            name: f.name.clone(),
            norm: norms[i],
            projections,
        });
    }

    let mut cosines = vec![vec![None; order.len()]; order.len()];
    for (a, &i) in order.iter().enumerate() {
        for (b, &j) in order.iter().enumerate() {
            if norms[i] < ZERO_NORM || norms[j] < ZERO_NORM {
                continue;
            }
            let (x, y) = (&doc.features[i].shapley, &doc.features[j].shapley);
            let c = x.inner(y)? / (norms[i] * norms[j]);
            cosines[a][b] = Some(c.clamp(-1.0, 1.0));
        }
    }
    let angles_degrees = cosines
        .iter()
        .map(|row| row.iter().map(|c| c.map(|c| c.acos().to_degrees())).collect())
        .collect();

    let ex = doc.explanation();
    Ok(Report {
        class_names: doc.class_names.clone(),
        predicted_class: doc.class_names[ex.predicted_class()].clone(),
        features,
        cosines,
        angles_degrees,
        efficiency_residual: ex.efficiency_residual(),
    })
}

impl Report {
    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self)?;
                s.push('\n');
                Ok(s)
            }
            ReportFormat::Text => Ok(self.to_text()),
        }
    }

    pub fn to_text(&self) -> String {
        let names: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        let w = names.iter().map(|n| n.len()).max().unwrap_or(0).max(7);
        let mut out = String::new();
        let _ = writeln!(out, "predicted class: {}", self.predicted_class);
        let _ = writeln!(out, "efficiency residual: {:.3e}", self.efficiency_residual);

        let _ = writeln!(out, "\nnorms");
        for f in &self.features {
            let _ = writeln!(out, "  {:<w$}  {:>10.6}", f.name, f.norm);
        }

        let _ = writeln!(out, "\ncosines (angle in degrees)");
        let _ = write!(out, "  {:<w$}", "");
        for n in &names {
            let _ = write!(out, "  {:>18}", n);
        }
        out.push('\n');
        for (a, row) in self.cosines.iter().enumerate() {
            let _ = write!(out, "  {:<w$}", names[a]);
            for (b, c) in row.iter().enumerate() {
                let cell = match (c, self.angles_degrees[a][b]) {
                    (Some(c), Some(deg)) => format!("{c:.4} ({deg:.1})"),
                    _ => "n/a".to_string(),
                };
                let _ = write!(out, "  {:>18}", cell);
            }
            out.push('\n');
        }

        let _ = writeln!(out, "\nprojections onto class-compositions");
        let _ = write!(out, "  {:<w$}", "");
        for c in &self.class_names {
            let _ = write!(out, "  {:>12}", c);
        }
        out.push('\n');
        for f in &self.features {
            let _ = write!(out, "  {:<w$}", f.name);
            for p in &f.projections {
                let _ = write!(out, "  {:>12.6}", p);
            }
            out.push('\n');
        }
        out
    }
}
