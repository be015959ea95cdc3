//! Static SVG figures of an explanation: chained Shapley vectors in a 2-D
//! ILR subspace, per-feature histograms, and parallel coordinates of the
//! successive perturbations.
//!
//! Vector endpoints are written at full precision in `sshap:from` /
//! `sshap:to` attributes (ILR coordinates, not pixels) so figures can be
//! checked numerically.

use std::fmt::Write;

use crate::class_geometry::class_compositions;
use crate::composition::Composition;
use crate::document::ExplanationDocument;
use crate::error::{Error, Result};

pub const SSHAP_NS: &str = "urn:sshap:svg:1";

/// Projections shorter than this are not drawn.
const MIN_PROJECTION: f64 = 1e-9;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    Ilr2d,
    Histogram,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureOrdering {
    ByNorm,
    Input,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub kind: FigureKind,
    /// 1-based balance indices for `Ilr2d`.
    pub dims: (usize, usize),
    pub ordering: FeatureOrdering,
    pub width: f64,
    pub height: f64,
    pub margin: f64,
}

impl FigureSpec {
    pub fn new(kind: FigureKind) -> Self {
        FigureSpec {
            kind,
            dims: (1, 2),
            ordering: match kind {
                FigureKind::Parallel => FeatureOrdering::ByNorm,
                _ => FeatureOrdering::Input,
            },
            width: 640.0,
            height: 480.0,
            margin: 48.0,
        }
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.kind == FigureKind::Ilr2d {
            let (a, b) = self.dims;
            let top = classes.saturating_sub(1);
            if a == b || a == 0 || b == 0 || a > top || b > top {
                return Err(Error::InvalidDims(format!(
                    "dims ({a},{b}) must be distinct and within 1..={top}"
                )));
            }
        }
        if !(self.width > 2.0 * self.margin && self.height > 2.0 * self.margin) {
            return Err(Error::InvalidDims(format!(
                "size {}x{} leaves no room inside margin {}",
                self.width, self.height, self.margin
            )));
        }
        Ok(())
    }
}

/// Feature indices in the requested order. By-norm is descending and
/// stable.
pub fn feature_order(doc: &ExplanationDocument, ordering: FeatureOrdering) -> Vec<usize> {
    let mut order: Vec<usize> = (0..doc.features.len()).collect();
    if ordering == FeatureOrdering::ByNorm {
        let norms: Vec<f64> = doc.features.iter().map(|f| f.shapley.norm()).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    }
    order
}

/// ILR points `base, base + φ_(1), …` over `order`; `order.len() + 1`
/// entries.
pub fn ilr_chain(doc: &ExplanationDocument, order: &[usize]) -> Result<Vec<Vec<f64>>> {
    let basis = doc.basis()?;
    let mut point = basis.coords(&doc.base)?;
    let mut chain = vec![point.clone()];
    for &i in order {
        for (p, c) in point.iter_mut().zip(&doc.features[i].ilr) {
            *p += c;
        }
        chain.push(point.clone());
    }
    Ok(chain)
}

/// Stations of the parallel-coordinate plot: the base distribution, then the
/// cumulative perturbation after each feature in `ordering`.
pub fn parallel_stations(
    doc: &ExplanationDocument,
    ordering: FeatureOrdering,
) -> Result<Vec<(String, Composition)>> {
    let basis = doc.basis()?;
    let order = feature_order(doc, ordering);
    let chain = ilr_chain(doc, &order)?;
    let mut labels = vec!["base".to_string()];
    labels.extend(order.iter().map(|&i| format!("+{}", doc.features[i].name)));
    labels
        .into_iter()
        .zip(chain)
        .map(|(l, c)| Ok((l, basis.from_coords(&c)?)))
        .collect()
}

pub fn render(doc: &ExplanationDocument, spec: &FigureSpec) -> Result<String> {
    spec.validate(doc.classes())?;
    match spec.kind {
        FigureKind::Ilr2d => render_ilr2d(doc, spec),
        FigureKind::Histogram => render_histogram(doc, spec),
        FigureKind::Parallel => render_parallel(doc, spec),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn open_svg(out: &mut String, spec: &FigureSpec, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:sshap="{SSHAP_NS}" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = spec.width,
        h = spec.height
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        spec.width, spec.height
    );
}

/// Affine map from data coordinates to pixels.
struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
    left: f64,
    bottom: f64,
}

impl Frame {
    fn new(spec: &FigureSpec, x: (f64, f64), y: (f64, f64), equal: bool) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            let span = (hi - lo).max(1e-9);
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let ((xl, xh), (yl, yh)) = (pad(x), pad(y));
        let pw = spec.width - 2.0 * spec.margin;
        let ph = spec.height - 2.0 * spec.margin;
        let (mut sx, mut sy) = (pw / (xh - xl), ph / (yh - yl));
        let (mut x0, mut y0) = (xl, yl);
        if equal {
            let s = sx.min(sy);
            x0 -= (pw / s - (xh - xl)) / 2.0;
            y0 -= (ph / s - (yh - yl)) / 2.0;
            sx = s;
            sy = s;
        }
        Frame {
            x0,
            y0,
            sx,
            sy,
            left: spec.margin,
            bottom: spec.height - spec.margin,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) * self.sx
    }

    fn py(&self, y: f64) -> f64 {
        self.bottom - (y - self.y0) * self.sy
    }
}

fn color(k: usize) -> &'static str {
    PALETTE[k % PALETTE.len()]
}

fn render_ilr2d(doc: &ExplanationDocument, spec: &FigureSpec) -> Result<String> {
    let basis = doc.basis()?;
    let (a, b) = (spec.dims.0 - 1, spec.dims.1 - 1);
    let order = feature_order(doc, spec.ordering);
    let chain = ilr_chain(doc, &order)?;
    let pts: Vec<(f64, f64)> = chain.iter().map(|c| (c[a], c[b])).collect();
    let pred = basis.coords(&doc.prediction)?;

    let rays: Vec<(usize, (f64, f64))> = class_compositions(doc.classes())?
        .iter()
        .map(|c| {
            let v = basis.coords(&c.value)?;
            Ok((c.class_index, (v[a], v[b])))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, (x, y))| x.hypot(*y) >= MIN_PROJECTION)
        .collect();

    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).chain([0.0, pred[a]]).collect();
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).chain([0.0, pred[b]]).collect();
    for (_, (x, y)) in &rays {
        xs.push(*x);
        ys.push(*y);
    }
    let range = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
    };
    let frame = Frame::new(spec, range(&xs), range(&ys), true);

    let (l, r) = (spec.margin, spec.width - spec.margin);
    let (t, bt) = (spec.margin, spec.height - spec.margin);
    let mut out = String::new();
    open_svg(&mut out, spec, "Shapley compositions in ILR coordinates");
    let _ = writeln!(
        out,
        r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#222"/></marker><clipPath id="plot-area"><rect x="{l}" y="{t}" width="{}" height="{}"/></clipPath></defs>"##,
        r - l,
        bt - t
    );

    let (ox, oy) = (frame.px(0.0), frame.py(0.0));
    let _ = writeln!(
        out,
        r##"<g class="axes" stroke="#444" stroke-width="1"><line x1="{l:.3}" y1="{oy:.3}" x2="{r:.3}" y2="{oy:.3}"/><line x1="{ox:.3}" y1="{t:.3}" x2="{ox:.3}" y2="{bt:.3}"/></g>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.3}" y="{:.3}" font-size="12" text-anchor="end">balance {}</text>"#,
        r,
        bt + 28.0,
        spec.dims.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.3}" y="{:.3}" font-size="12" transform="rotate(-90 {:.3} {:.3})">balance {}</text>"#,
        l - 28.0,
        t,
        l - 28.0,
        t,
        spec.dims.1
    );

    if doc.classes() == 3 {
        // Tie locus of classes i, j points away from the third class.
        let reach = (spec.width + spec.height) / frame.sx.min(frame.sy);
        let _ = writeln!(out, r##"<g class="boundaries" clip-path="url(#plot-area)" stroke="#999" stroke-dasharray="2,4">"##);
        for (k, (x, y)) in &rays {
            let n = x.hypot(*y);
            let (ux, uy) = (-x / n * reach, -y / n * reach);
            let (i, j) = match k {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let _ = writeln!(
                out,
                r#"<line class="boundary" sshap:between="{i},{j}" sshap:direction="{},{}" x1="{ox:.3}" y1="{oy:.3}" x2="{:.3}" y2="{:.3}"/>"#,
                -x / n,
                -y / n,
                frame.px(ux),
                frame.py(uy)
            );
        }
        let _ = writeln!(out, "</g>");
    }

    let _ = writeln!(out, r#"<g class="class-rays" stroke-dasharray="6,4" stroke-width="1.5">"#);
    for (k, (x, y)) in &rays {
        let name = escape(&doc.class_names[*k]);
        let _ = writeln!(
            out,
            r#"<line class="class-ray" sshap:class="{name}" sshap:to="{x},{y}" stroke="{c}" x1="{ox:.3}" y1="{oy:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            frame.px(*x),
            frame.py(*y),
            c = color(*k)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-size="12" fill="{c}">{name}</text>"#,
            frame.px(*x) + 4.0,
            frame.py(*y) - 4.0,
            c = color(*k)
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r#"<g class="vectors" stroke-width="2" fill="none">"#);
    for (n, &i) in order.iter().enumerate() {
        let (from, to) = (pts[n], pts[n + 1]);
        let _ = writeln!(
            out,
            r##"<path class="shapley-vector" sshap:feature="{}" sshap:from="{},{}" sshap:to="{},{}" stroke="#222" marker-end="url(#arrow)" d="M{:.3},{:.3} L{:.3},{:.3}"/>"##,
            escape(&doc.features[i].name),
            from.0,
            from.1,
            to.0,
            to.1,
            frame.px(from.0),
            frame.py(from.1),
            frame.px(to.0),
            frame.py(to.1)
        );
    }
    let _ = writeln!(out, "</g>");
    for (class, (x, y)) in [("base", pts[0]), ("prediction", (pred[a], pred[b]))] {
        let _ = writeln!(
            out,
            r##"<circle class="{class}" sshap:at="{x},{y}" cx="{:.3}" cy="{:.3}" r="4" fill="{}"/>"##,
            frame.px(x),
            frame.py(y),
            if class == "base" { "#fff" } else { "#000" }
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn render_histogram(doc: &ExplanationDocument, spec: &FigureSpec) -> Result<String> {
    let order = feature_order(doc, spec.ordering);
    let d = doc.classes();
    let top = doc
        .features
        .iter()
        .flat_map(|f| f.shapley.parts().iter().cloned())
        .fold(1.0 / d as f64, f64::max);
    let frame = Frame::new(spec, (0.0, order.len().max(1) as f64), (0.0, top), false);
    let group = frame.sx * 0.8;
    let bar = group / d as f64;

    let mut out = String::new();
    open_svg(&mut out, spec, "Shapley compositions");
    let (l, r, bt) = (spec.margin, spec.width - spec.margin, spec.height - spec.margin);
    let _ = writeln!(
        out,
        r##"<line class="axis" stroke="#444" x1="{l}" y1="{bt}" x2="{r}" y2="{bt}"/>"##
    );
    for (n, &i) in order.iter().enumerate() {
        let f = &doc.features[i];
        let gx = frame.px(n as f64) + (frame.sx - group) / 2.0;
        let _ = writeln!(out, r#"<g class="bar-group" sshap:feature="{}">"#, escape(&f.name));
        for (k, p) in f.shapley.parts().iter().enumerate() {
            let y = frame.py(*p);
            let _ = writeln!(
                out,
                r#"<rect class="bar" sshap:class="{}" sshap:value="{p}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                escape(&doc.class_names[k]),
                gx + k as f64 * bar,
                y,
                bar,
                frame.py(0.0) - y,
                color(k)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-size="12" text-anchor="middle">{}</text>"#,
            gx + group / 2.0,
            bt + 16.0,
            escape(&f.name)
        );
        let _ = writeln!(out, "</g>");
    }
    let u = frame.py(1.0 / d as f64);
    let _ = writeln!(
        out,
        r##"<line class="uniform" sshap:value="{}" stroke="#000" stroke-dasharray="4,3" x1="{l}" y1="{u:.3}" x2="{r}" y2="{u:.3}"/>"##,
        1.0 / d as f64
    );
    legend(&mut out, doc, spec);
    out.push_str("</svg>\n");
    Ok(out)
}

fn legend(out: &mut String, doc: &ExplanationDocument, spec: &FigureSpec) {
    let _ = writeln!(out, r#"<g class="legend" font-size="12">"#);
    for (k, name) in doc.class_names.iter().enumerate() {
        let x = spec.margin + k as f64 * 110.0;
        let y = spec.margin / 2.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.3}" y="{:.3}" width="10" height="10" fill="{}"/><text x="{:.3}" y="{:.3}">{}</text>"#,
            y - 9.0,
            color(k),
            x + 14.0,
            y,
            escape(name)
        );
    }
    let _ = writeln!(out, "</g>");
}

fn render_parallel(doc: &ExplanationDocument, spec: &FigureSpec) -> Result<String> {
    let stations = parallel_stations(doc, spec.ordering)?;
    let n = stations.len();
    let frame = Frame::new(spec, (0.0, (n - 1).max(1) as f64), (0.0, 1.0), false);

    let mut out = String::new();
    open_svg(&mut out, spec, "Successive perturbations from base to prediction");
    let (t, bt) = (spec.margin, spec.height - spec.margin);
    for (s, (label, _)) in stations.iter().enumerate() {
        let x = frame.px(s as f64);
        let _ = writeln!(
            out,
            r##"<line class="station" stroke="#bbb" x1="{x:.3}" y1="{t}" x2="{x:.3}" y2="{bt}"/><text x="{x:.3}" y="{:.3}" font-size="12" text-anchor="middle">{}</text>"##,
            bt + 16.0,
            escape(label)
        );
    }
    for (k, name) in doc.class_names.iter().enumerate() {
        let values: Vec<f64> = stations.iter().map(|(_, c)| c.parts()[k]).collect();
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(s, v)| format!("{:.3},{:.3}", frame.px(s as f64), frame.py(*v)))
            .collect();
        let raw: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="class-line" sshap:class="{}" sshap:values="{}" fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            escape(name),
            raw.join(" "),
            color(k),
            points.join(" ")
        );
    }
    legend(&mut out, doc, spec);
    out.push_str("</svg>\n");
    Ok(out)
}
