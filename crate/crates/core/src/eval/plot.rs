use std::fmt::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use super::CentroidSet;
use crate::{Error, Result};

const SIZE: f64 = 520.0;
const LEGEND_W: f64 = 200.0;
const RADIUS: f64 = 220.0;
const AZIMUTH: f64 = 0.6;
const ELEVATION: f64 = 0.35;
const CYCLE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#637939",
];

/// SVG of the unit sphere seen orthographically, with centroids (large,
/// outlined) and sample descriptors (small) colored by class.
///
/// Descriptors of dimension `D > 3` are projected onto the three leading
/// eigenvectors of the uncentered second-moment matrix of all plotted
/// vectors, so projections stay inside the unit ball. Eigenvector signs are
/// fixed (largest component positive) and numbers are printed with fixed
/// precision, so equal inputs give equal bytes. `class_colors` overrides the
/// default color cycle, e.g. with a color palette's RGB values.
pub fn plot_sphere(set: &CentroidSet, samples: &[(usize, Vec<f64>)], class_colors: Option<&[[f64; 3]]>) -> Result<String> {
    let d = set.dim();
    if d < 3 {
        return Err(Error::InvalidArgument(format!("sphere plot needs D >= 3, got {d}")));
    }
    if let Some((i, _)) = samples.iter().enumerate().find(|(_, (c, v))| *c >= set.len() || v.len() != d) {
        return Err(Error::InvalidArgument(format!("sample {i} has a bad class or dimension")));
    }
    if let Some(colors) = class_colors {
        if colors.len() < set.len() {
            return Err(Error::InvalidArgument(format!("{} colors for {} classes", colors.len(), set.len())));
        }
    }
    let axes = principal_axes(set, samples);
    let project = |v: &[f64]| -> (f64, f64, f64) {
        let p: Vec<f64> = axes.iter().map(|a| a.iter().zip(v).map(|(x, y)| x * y).sum()).collect();
        let (ca, sa, ce, se) = (AZIMUTH.cos(), AZIMUTH.sin(), ELEVATION.cos(), ELEVATION.sin());
        let x = ca * p[0] - sa * p[1];
        let y1 = sa * p[0] + ca * p[1];
        let depth = ce * y1 - se * p[2];
        let up = se * y1 + ce * p[2];
        (SIZE / 2.0 + RADIUS * x, SIZE / 2.0 - RADIUS * up, depth)
    };
    let color = |c: usize| -> String {
        match class_colors {
            Some(rgb) => {
                let [r, g, b] = rgb[c].map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8);
                format!("#{r:02x}{g:02x}{b:02x}")
            }
            None => CYCLE[c % CYCLE.len()].to_string(),
        }
    };

    let mut s = String::new();
    let (w, h) = (SIZE + LEGEND_W, SIZE.max(30.0 + 18.0 * set.len() as f64));
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<circle cx="{c:.2}" cy="{c:.2}" r="{RADIUS:.2}" fill="#f4f4f4" stroke="#444" stroke-width="1.5"/>"##,
        c = SIZE / 2.0
    );
    for axis in 0..3 {
        let mut pts = String::new();
        for i in 0..=72 {
            let t = i as f64 / 72.0 * std::f64::consts::TAU;
            let mut v = [0.0; 3];
            v[axis] = 0.0;
            v[(axis + 1) % 3] = t.cos();
            v[(axis + 2) % 3] = t.sin();
            let (x, y, _) = project_basis(&project, &axes, v);
            let _ = write!(pts, "{}{x:.2},{y:.2}", if i == 0 { "" } else { " " });
        }
        let _ = writeln!(s, r##"<polyline points="{pts}" fill="none" stroke="#bbb" stroke-width="0.8"/>"##);
    }
    let mut points: Vec<(f64, f64, f64, usize)> = samples
        .iter()
        .map(|(c, v)| {
            let (x, y, z) = project(v);
            (x, y, z, *c)
        })
        .collect();
    points.sort_by(|a, b| b.2.total_cmp(&a.2));
    for (x, y, depth, c) in points {
        let opacity = if depth > 0.0 { 0.3 } else { 0.8 };
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{}" fill-opacity="{opacity:.1}"/>"#,
            color(c)
        );
    }
    for c in 0..set.len() {
        let (x, y, _) = project(set.centroid(c));
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="6.5" fill="{}" stroke="black" stroke-width="1.5"/>"#,
            color(c)
        );
    }
    for (c, name) in set.names.iter().enumerate() {
        let y = 24.0 + 18.0 * c as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{}" stroke="black" stroke-width="0.5"/>"#,
            SIZE,
            y - 10.0,
            color(c)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{y:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            SIZE + 18.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Maps a point given in plot-axis coordinates back through `project`.
fn project_basis(project: &impl Fn(&[f64]) -> (f64, f64, f64), axes: &[Vec<f64>], v: [f64; 3]) -> (f64, f64, f64) {
    let d = axes[0].len();
    let full: Vec<f64> = (0..d).map(|j| (0..3).map(|a| v[a] * axes[a][j]).sum()).collect();
    project(&full)
}

fn principal_axes(set: &CentroidSet, samples: &[(usize, Vec<f64>)]) -> Vec<Vec<f64>> {
    let d = set.dim();
    if d == 3 {
        return (0..3).map(|a| (0..3).map(|j| (a == j) as u8 as f64).collect()).collect();
    }
    let mut m = DMatrix::<f64>::zeros(d, d);
    let rows = (0..set.len()).map(|c| set.centroid(c)).chain(samples.iter().map(|(_, v)| v.as_slice()));
    for v in rows {
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += v[i] * v[j];
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    order
        .iter()
        .take(3)
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect()
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn set() -> CentroidSet {
        let mut data = vec![0.0; 3 * 5];
        data[0] = 1.0;
        data[6] = 1.0;
        data[12] = 1.0;
        CentroidSet {
            names: vec!["white".into(), "beige <&>".into(), "red".into()],
            centroids: Tensor::new(vec![3, 5], data).unwrap(),
        }
    }

    #[test]
    fn outline_and_centroids_without_samples() {
        let svg = plot_sphere(&set(), &[], None).unwrap();
        assert!(svg.starts_with("<?xml"));
        assert_eq!(svg.matches("r=\"6.5\"").count(), 3);
        assert!(svg.contains("beige &lt;&amp;&gt;"));
    }

    #[test]
    fn low_dimension_rejected() {
        let s = CentroidSet {
            names: vec!["a".into()],
            centroids: Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap(),
        };
        assert!(plot_sphere(&s, &[], None).is_err());
    }
}
