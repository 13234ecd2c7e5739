//! Procedural vehicle images standing in for a crawled photo corpus.
//!
//! Each shape class owns a parametric body archetype (hood/cabin/trunk
//! proportions, glass slopes, wheel size, frontal width and roof taper).
//! A sample draws the archetype from its view (side profile, front or rear
//! face, or a quarter view combining a compressed profile with a face),
//! places it with a random affine fit on a randomized background, and fills
//! the body with the sample color plus shading noise.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::Image;
use super::labels::{default_palette, ClassEntry, ColorEntry, MakeModel};
use super::manifest::{Manifest, ManifestHeader, Quality, SampleRecord, View};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Number of shape classes `K`.
    pub classes: usize,
    /// Full palette written to the manifest header.
    pub palette: Vec<ColorEntry>,
    /// Palette names to render.
    pub colors: Vec<String>,
    pub views: Vec<View>,
    /// Samples per (class, color, view).
    pub per_combination: usize,
    pub image_size: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// All ten default colors, front/side/rear views, one sample each, 64×64.
    pub fn new(classes: usize, seed: u64) -> Self {
        let palette = default_palette();
        Self {
            classes,
            colors: palette.iter().map(|c| c.name.clone()).collect(),
            palette,
            views: vec![View::Front, View::Side, View::Rear],
            per_combination: 1,
            image_size: 64,
            seed,
        }
    }

    pub fn record_count(&self) -> usize {
        self.classes * self.colors.len() * self.views.len() * self.per_combination
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.colors.is_empty() || self.views.is_empty() || self.per_combination == 0 {
            return bad("colors, views and per_combination must be non-empty".into());
        }
        if self.image_size < 16 {
            return bad(format!("image size {} below 16", self.image_size));
        }
        for name in &self.colors {
            if !self.palette.iter().any(|c| &c.name == name) {
                return bad(format!("color {name:?} not in palette"));
            }
        }
        for (i, a) in self.palette.iter().enumerate() {
            for b in &self.palette[i + 1..] {
                if a.rgb == b.rgb || a.name == b.name {
                    return bad(format!("palette entries {:?} and {:?} are not distinct", a.name, b.name));
                }
            }
        }
        Ok(())
    }

    fn rgb(&self, name: &str) -> [f64; 3] {
        self.palette.iter().find(|c| c.name == name).map(|c| c.rgb).expect("validated color")
    }
}

const NAMED_CLASSES: [&[(&str, &str)]; 12] = [
    &[("Dacia", "Logan"), ("Renault", "Logan")],
    &[("Renault", "Clio")],
    &[("Peugeot", "207")],
    &[("Audi", "A4")],
    &[("Volkswagen", "Golf")],
    &[("Mercedes-Benz", "C")],
    &[("BMW", "3")],
    &[("Ford", "Focus")],
    &[("Opel", "Astra")],
    &[("Toyota", "Corolla")],
    &[("Fiat", "Punto")],
    &[("Skoda", "Octavia")],
];

/// Class table for `k` synthetic classes. Class 0 is shared by two makes.
pub fn synth_class_table(k: usize) -> Vec<ClassEntry> {
    (0..k)
        .map(|classid| ClassEntry {
            classid,
            members: match NAMED_CLASSES.get(classid) {
                Some(names) => names.iter().map(|(m, n)| MakeModel::new(m, n)).collect(),
                None => vec![MakeModel::new(&format!("Synth{classid}"), &format!("M{classid}"))],
            },
        })
        .collect()
}

/// Body proportions, all relative to the vehicle length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Archetype {
    pub body_h: f64,
    pub cabin_h: f64,
    pub clearance: f64,
    pub hood: f64,
    pub trunk: f64,
    pub windshield: f64,
    pub rear_glass: f64,
    pub wheel_r: f64,
    pub width: f64,
    pub roof_taper: f64,
}

impl Archetype {
    fn scaled(&self, mut f: impl FnMut(usize) -> f64) -> Self {
        Self {
            body_h: self.body_h * f(0),
            cabin_h: self.cabin_h * f(1),
            clearance: self.clearance * f(2),
            hood: self.hood * f(3),
            trunk: self.trunk * f(4),
            windshield: self.windshield * f(5),
            rear_glass: self.rear_glass * f(6),
            wheel_r: self.wheel_r * f(7),
            width: self.width * f(8),
            roof_taper: (self.roof_taper * f(9)).min(0.98),
        }
    }
}

const STYLES: [Archetype; 6] = [
    // sedan
    Archetype { body_h: 0.21, cabin_h: 0.15, clearance: 0.05, hood: 0.27, trunk: 0.20, windshield: 0.14, rear_glass: 0.12, wheel_r: 0.085, width: 0.42, roof_taper: 0.74 },
    // hatchback
    Archetype { body_h: 0.23, cabin_h: 0.17, clearance: 0.05, hood: 0.22, trunk: 0.02, windshield: 0.13, rear_glass: 0.07, wheel_r: 0.085, width: 0.45, roof_taper: 0.80 },
    // wagon
    Archetype { body_h: 0.21, cabin_h: 0.16, clearance: 0.05, hood: 0.25, trunk: 0.02, windshield: 0.14, rear_glass: 0.025, wheel_r: 0.085, width: 0.41, roof_taper: 0.84 },
    // suv
    Archetype { body_h: 0.29, cabin_h: 0.19, clearance: 0.09, hood: 0.21, trunk: 0.03, windshield: 0.10, rear_glass: 0.04, wheel_r: 0.11, width: 0.50, roof_taper: 0.86 },
    // coupe
    Archetype { body_h: 0.18, cabin_h: 0.12, clearance: 0.04, hood: 0.34, trunk: 0.14, windshield: 0.19, rear_glass: 0.19, wheel_r: 0.08, width: 0.44, roof_taper: 0.64 },
    // van
    Archetype { body_h: 0.33, cabin_h: 0.24, clearance: 0.06, hood: 0.10, trunk: 0.0, windshield: 0.08, rear_glass: 0.012, wheel_r: 0.09, width: 0.47, roof_taper: 0.93 },
];

/// Deterministic archetype of a class: style `k mod 6`, a proportion variant
/// for `k div 6`, and a small fixed per-class perturbation.
pub fn archetype(classid: usize) -> Archetype {
    let style = STYLES[classid % STYLES.len()];
    let variant = classid / STYLES.len();
    let base = match variant {
        0 => style,
        1 => style.scaled(|i| [1.16, 0.84, 1.0, 1.2, 1.25, 0.85, 1.2, 1.1, 1.12, 0.92][i]),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c1a5 ^ classid as u64);
            let f: Vec<f64> = (0..10).map(|_| rng.gen_range(0.8..1.25)).collect();
            style.scaled(|i| f[i])
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xa4c7_e7e0 ^ classid as u64);
    let f: Vec<f64> = (0..10).map(|_| rng.gen_range(0.97..1.03)).collect();
    base.scaled(|i| f[i])
}

/// Discrete design details of a class, visible from every view: light shape
/// (4 styles), grille or plate arrangement (3), and side windows (1 to 4
/// panes). Any two of the first twelve classes differ in at least two of
/// the three.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cues {
    pub lights: usize,
    pub grille: usize,
    /// Number of side window panes minus one.
    pub windows: usize,
}

/// Window cue of the first twelve classes; coupes keep at most two panes.
const WINDOWS: [usize; 12] = [0, 2, 1, 1, 1, 0, 2, 3, 3, 3, 0, 2];

pub fn cues(classid: usize) -> Cues {
    Cues {
        lights: classid % 4,
        grille: classid % 3,
        windows: WINDOWS.get(classid).copied().unwrap_or((classid + classid / 6) % 3),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Layer {
    Body,
    Paint([f64; 3]),
    /// Grille and trim: dark on light paint, chrome on dark paint.
    Trim,
    /// Windows: tinted on light paint, reflecting sky on dark paint.
    Glass,
}

#[derive(Debug, Clone)]
enum Geom {
    Poly(Vec<(f64, f64)>),
    Circle { cx: f64, cy: f64, r: f64 },
}

#[derive(Debug, Clone)]
struct Shape {
    geom: Geom,
    layer: Layer,
}

impl Shape {
    fn poly(points: Vec<(f64, f64)>, layer: Layer) -> Self {
        Self { geom: Geom::Poly(points), layer }
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64, layer: Layer) -> Self {
        Self::poly(vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)], layer)
    }

    fn map(&self, f: &impl Fn((f64, f64)) -> (f64, f64), radius_scale: f64) -> Self {
        let geom = match &self.geom {
            Geom::Poly(pts) => Geom::Poly(pts.iter().map(|&p| f(p)).collect()),
            Geom::Circle { cx, cy, r } => {
                let (x, y) = f((*cx, *cy));
                Geom::Circle { cx: x, cy: y, r: r * radius_scale }
            }
        };
        Self { geom, layer: self.layer }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        match &self.geom {
            Geom::Poly(pts) => pts.iter().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |(a, b, c, d), &(x, y)| (a.min(x), b.min(y), c.max(x), d.max(y)),
            ),
            Geom::Circle { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match &self.geom {
            Geom::Circle { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Geom::Poly(pts) => {
                let mut inside = false;
                let mut j = pts.len() - 1;
                for i in 0..pts.len() {
                    let (xi, yi) = pts[i];
                    let (xj, yj) = pts[j];
                    if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                    j = i;
                }
                inside
            }
        }
    }
}

const GLASS: [f64; 3] = [0.13, 0.16, 0.2];
const SKY_GLASS: [f64; 3] = [0.5, 0.58, 0.66];
const TIRE: [f64; 3] = [0.05, 0.05, 0.05];
const RIM: [f64; 3] = [0.55, 0.56, 0.58];
const HEADLIGHT: [f64; 3] = [0.96, 0.95, 0.86];
const TAILLIGHT: [f64; 3] = [0.62, 0.05, 0.07];
const GRILLE: [f64; 3] = [0.1, 0.1, 0.11];
const CHROME: [f64; 3] = [0.78, 0.79, 0.8];
const PLATE: [f64; 3] = [0.9, 0.9, 0.92];

/// Side profile, vehicle front at x = 0, ground at y = 0, length 1.
fn side_profile(a: &Archetype, cues: &Cues) -> Vec<Shape> {
    let base = a.clearance;
    let belt = base + a.body_h;
    let roof = belt + a.cabin_h;
    let hood_x = a.hood;
    let roof_front = hood_x + a.windshield;
    let tail_x = 1.0 - a.trunk;
    let roof_rear = (tail_x - a.rear_glass).max(roof_front + 0.15);
    let body = vec![
        (0.0, base),
        (0.0, belt - 0.02),
        (0.02, belt),
        (hood_x, belt),
        (roof_front, roof),
        (roof_rear, roof),
        (tail_x, belt),
        (1.0, belt),
        (1.0, base),
    ];
    let pad = 0.016;
    let glass_y0 = belt + pad;
    let glass_y1 = roof - pad;
    let t = |y: f64| (y - belt) / a.cabin_h;
    let front_edge = |y: f64| hood_x + a.windshield * t(y) + pad * 1.4;
    let rear_edge = |y: f64| tail_x - (tail_x - roof_rear) * t(y) - pad * 1.4;
    let panes = cues.windows + 1;
    let span = roof_rear - roof_front;
    let mut shapes = vec![Shape::poly(body, Layer::Body)];
    for i in 0..panes {
        let left = roof_front + span * i as f64 / panes as f64;
        let right = roof_front + span * (i + 1) as f64 / panes as f64;
        let (l0, l1) = if i == 0 { (front_edge(glass_y0), front_edge(glass_y1)) } else { (left + pad, left + pad) };
        let (r0, r1) = if i + 1 == panes { (rear_edge(glass_y0), rear_edge(glass_y1)) } else { (right - pad, right - pad) };
        shapes.push(Shape::poly(vec![(l0, glass_y0), (r0, glass_y0), (r1, glass_y1), (l1, glass_y1)], Layer::Glass));
    }
    if cues.lights > 0 {
        // Side moulding; its height repeats the light cue.
        let y = base + a.body_h * [0.0, 0.28, 0.5, 0.72][cues.lights];
        shapes.push(Shape::rect(0.06, y - 0.014, 0.94, y + 0.014, Layer::Trim));
    }
    shapes.extend([
        match cues.lights {
            0 => Shape::rect(0.0, belt - 0.055, 0.035, belt - 0.02, Layer::Paint(HEADLIGHT)),
            1 => Shape::rect(0.0, belt - 0.07, 0.02, belt - 0.01, Layer::Paint(HEADLIGHT)),
            2 => Shape::poly(vec![(0.0, belt - 0.05), (0.07, belt - 0.012), (0.0, belt - 0.012)], Layer::Paint(HEADLIGHT)),
            _ => Shape::rect(0.0, belt - 0.09, 0.03, belt - 0.05, Layer::Paint(HEADLIGHT)),
        },
        Shape::rect(0.975, belt - 0.05, 1.0, belt - 0.015, Layer::Paint(TAILLIGHT)),
    ]);
    let wheel_front = (a.hood * 0.55).max(a.wheel_r + 0.04);
    let wheel_rear = 1.0 - (a.trunk * 0.6).max(a.wheel_r + 0.05);
    for cx in [wheel_front, wheel_rear] {
        shapes.push(Shape {
            geom: Geom::Circle { cx, cy: a.wheel_r, r: a.wheel_r },
            layer: Layer::Paint(TIRE),
        });
        shapes.push(Shape {
            geom: Geom::Circle { cx, cy: a.wheel_r, r: a.wheel_r * [0.55, 0.3, 0.75][cues.grille] },
            layer: Layer::Paint(RIM),
        });
    }
    shapes
}

/// Front or rear face centered on x = 0.
fn face(a: &Archetype, cues: &Cues, front: bool) -> Vec<Shape> {
    let hw = a.width / 2.0;
    let base = a.clearance;
    let belt = base + a.body_h;
    let roof = belt + a.cabin_h;
    let cabin_bottom = hw * 0.93;
    let cabin_top = hw * a.roof_taper;
    let pad = 0.018;
    let mut shapes = vec![
        Shape::rect(-hw + 0.02, 0.0, -hw + 0.02 + 0.1 * a.width, base + 0.03, Layer::Paint(TIRE)),
        Shape::rect(hw - 0.02 - 0.1 * a.width, 0.0, hw - 0.02, base + 0.03, Layer::Paint(TIRE)),
        Shape::poly(
            vec![
                (-hw, base),
                (hw, base),
                (hw, belt - 0.015),
                (cabin_bottom, belt),
                (cabin_top, roof),
                (-cabin_top, roof),
                (-cabin_bottom, belt),
                (-hw, belt - 0.015),
            ],
            Layer::Body,
        ),
        Shape::poly(
            vec![
                (-cabin_bottom + pad * 1.5, belt + pad),
                (cabin_bottom - pad * 1.5, belt + pad),
                (cabin_top - pad, roof - pad),
                (-cabin_top + pad, roof - pad),
            ],
            Layer::Glass,
        ),
    ];
    let light_y0 = belt - 0.3 * a.body_h;
    let light_y1 = belt - 0.1 * a.body_h;
    let lw = 0.2 * a.width;
    let light = Layer::Paint(if front { HEADLIGHT } else { TAILLIGHT });
    let lh = light_y1 - light_y0;
    for side in [-1.0, 1.0] {
        let outer = side * (hw - 0.015);
        let inner = side * (hw - 0.015 - lw);
        let (xa, xb) = (outer.min(inner), outer.max(inner));
        match cues.lights {
            0 => shapes.push(Shape::rect(xa, light_y0, xb, light_y1, light)),
            1 => {
                let r = lh * 0.75;
                shapes.push(Shape {
                    geom: Geom::Circle { cx: (xa + xb) / 2.0, cy: (light_y0 + light_y1) / 2.0, r },
                    layer: light,
                });
            }
            2 => shapes.push(Shape::poly(
                vec![(outer, light_y1), (inner, light_y1), (inner, light_y1 - lh * 0.4), (outer, light_y0 - lh * 0.3)],
                light,
            )),
            _ => shapes.push(Shape::rect(
                outer.min(outer - side * lw * 0.45),
                light_y0 - lh * 1.2,
                outer.max(outer - side * lw * 0.45),
                light_y1,
                light,
            )),
        }
    }
    if front {
        let gw = 0.2 * a.width;
        let gy0 = base + 0.35 * a.body_h;
        match cues.grille {
            0 => shapes.push(Shape::rect(-gw, gy0, gw, light_y1, Layer::Trim)),
            1 => {
                let step = (light_y1 - gy0) / 5.0;
                for i in [0.0, 2.0, 4.0] {
                    shapes.push(Shape::rect(-gw * 1.2, gy0 + i * step, gw * 1.2, gy0 + (i + 1.0) * step, Layer::Trim));
                }
            }
            _ => {
                shapes.push(Shape::rect(-hw * 0.8, base + 0.08 * a.body_h, hw * 0.8, base + 0.28 * a.body_h, Layer::Trim));
                shapes.push(Shape {
                    geom: Geom::Circle { cx: 0.0, cy: light_y1 - lh * 0.5, r: lh * 0.45 },
                    layer: Layer::Paint(RIM),
                });
            }
        }
    } else {
        let pw = 0.13 * a.width;
        let (py0, py1) = match cues.grille {
            0 => (base + 0.2 * a.body_h, base + 0.42 * a.body_h),
            1 => (light_y0, light_y1),
            _ => (base + 0.05 * a.body_h, base + 0.25 * a.body_h),
        };
        shapes.push(Shape::rect(-pw, py0, pw, py1, Layer::Paint(PLATE)));
        if cues.grille == 2 {
            shapes.push(Shape::rect(-hw, base + 0.3 * a.body_h, hw, base + 0.38 * a.body_h, Layer::Trim));
        }
    }
    shapes
}

/// Shapes of one view in model units (x right, y up, ground at 0).
fn view_shapes(a: &Archetype, cues: &Cues, view: View) -> Vec<Shape> {
    const PROFILE: f64 = 0.62;
    const FACE: f64 = 0.5;
    let affine = |shapes: Vec<Shape>, sx: f64, dx: f64, shear: f64| -> Vec<Shape> {
        let f = move |(x, y): (f64, f64)| (x * sx + dx, y + shear * (x * sx));
        shapes.iter().map(|s| s.map(&f, sx.abs())).collect()
    };
    match view {
        View::Side => side_profile(a, cues),
        View::Front => face(a, cues, true),
        View::Rear => face(a, cues, false),
        View::FrontQuarter => {
            let fw = a.width * FACE;
            let mut shapes = affine(side_profile(a, cues), PROFILE, fw / 2.0, -0.04);
            shapes.extend(affine(face(a, cues, true), FACE, 0.0, 0.0));
            shapes
        }
        View::RearQuarter => {
            let fw = a.width * FACE;
            let mut shapes = affine(side_profile(a, cues), PROFILE, 0.0, 0.04);
            shapes.extend(affine(face(a, cues, false), FACE, PROFILE + fw / 2.0, 0.0));
            shapes
        }
    }
}

/// One rendered sample.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: Image,
    /// Pixels fully covered by body paint (no glass, lights or tires).
    pub body_mask: Vec<bool>,
}

/// Renders one vehicle of `classid` in `color` seen from `view`.
pub fn render(classid: usize, color: [f64; 3], view: View, size: usize, rng: &mut ChaCha8Rng) -> Rendered {
    let arch = archetype(classid).scaled(|_| rng.gen_range(0.97..1.03));
    let mut shapes = view_shapes(&arch, &cues(classid), view);

    if matches!(view, View::Side | View::FrontQuarter | View::RearQuarter) && rng.gen_bool(0.5) {
        shapes = shapes.iter().map(|s| s.map(&|(x, y)| (-x, y), 1.0)).collect();
    }
    let (x0, y0, x1, y1) = shapes.iter().map(Shape::bounds).fold(
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), (e, f, g, h)| (a.min(e), b.min(f), c.max(g), d.max(h)),
    );
    let s = size as f64;
    let scale = (rng.gen_range(0.74..0.9) * s / (x1 - x0)).min(rng.gen_range(0.7..0.82) * s / (y1 - y0));
    let cx = s / 2.0 + rng.gen_range(-0.05..0.05) * s;
    let ground = s * rng.gen_range(0.84..0.92);
    let mid = (x0 + x1) / 2.0;
    let to_px = move |(x, y): (f64, f64)| ((x - mid) * scale + cx, ground - y * scale);
    let shapes: Vec<Shape> = shapes.iter().map(|sh| sh.map(&to_px, scale)).collect();
    let top = ground - y1 * scale;

    let luma = 0.3 * color[0] + 0.59 * color[1] + 0.11 * color[2];
    let (trim, glass) = if luma < 0.4 { (CHROME, SKY_GLASS) } else { (GRILLE, GLASS) };
    let background = background(size, ground, rng);
    let mut image = background.clone();
    let mut body_mask = vec![false; size * size];
    const SUB: usize = 3;
    let boxes: Vec<_> = shapes.iter().map(Shape::bounds).collect();
    for py in 0..size {
        let shade = 1.0 + 0.12 * (0.5 - ((py as f64 - top) / (ground - top)).clamp(0.0, 1.0));
        for px in 0..size {
            let mut acc = [0.0; 3];
            let mut body_hits = 0;
            let noise: f64 = rng.gen_range(-0.03..0.03);
            let paint = color.map(|c| (c * shade + noise).clamp(0.0, 1.0));
            for sy in 0..SUB {
                for sx in 0..SUB {
                    let x = px as f64 + (sx as f64 + 0.5) / SUB as f64;
                    let y = py as f64 + (sy as f64 + 0.5) / SUB as f64;
                    let hit = shapes
                        .iter()
                        .zip(&boxes)
                        .rev()
                        .find(|(sh, b)| x >= b.0 && x <= b.2 && y >= b.1 && y <= b.3 && sh.contains(x, y))
                        .map(|(sh, _)| sh.layer);
                    let rgb = match hit {
                        Some(Layer::Body) => {
                            body_hits += 1;
                            paint
                        }
                        Some(Layer::Paint(c)) => c,
                        Some(Layer::Trim) => trim,
                        Some(Layer::Glass) => glass,
                        None => [0, 1, 2].map(|c| background.get(c, py, px)),
                    };
                    for c in 0..3 {
                        acc[c] += rgb[c];
                    }
                }
            }
            for (c, v) in acc.iter().enumerate() {
                image.set(c, py, px, v / (SUB * SUB) as f64);
            }
            body_mask[py * size + px] = body_hits == SUB * SUB;
        }
    }
    Rendered { image, body_mask }
}

/// Low-saturation scene: graded sky, darker road below the ground line, a
/// few clutter blocks and per-pixel noise.
fn background(size: usize, ground: f64, rng: &mut ChaCha8Rng) -> Image {
    let level: f64 = rng.gen_range(0.3..0.72);
    let tint: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(-0.05..0.05));
    let road = level * rng.gen_range(0.55..0.8);
    let blocks: Vec<(f64, f64, f64, f64, [f64; 3])> = (0..rng.gen_range(2..5))
        .map(|_| {
            let w = rng.gen_range(0.1..0.4) * size as f64;
            let h = rng.gen_range(0.15..0.5) * size as f64;
            let x = rng.gen_range(0.0..size as f64 - w);
            let y = ground - h - rng.gen_range(0.0..0.2) * size as f64;
            let l = (level + rng.gen_range(-0.1..0.1)).clamp(0.05, 0.95);
            (x, y, w, h, [0, 1, 2].map(|_| l + rng.gen_range(-0.05..0.05)))
        })
        .collect();
    let mut img = Image::filled(size, size, [0.0; 3]);
    for y in 0..size {
        let fy = y as f64;
        for x in 0..size {
            let fx = x as f64;
            let mut rgb = if fy >= ground {
                [road; 3]
            } else {
                [level + 0.1 * (1.0 - fy / ground); 3]
            };
            for &(bx, by, bw, bh, c) in &blocks {
                if fx >= bx && fx < bx + bw && fy >= by && fy < by + bh && fy < ground {
                    rgb = c;
                }
            }
            let n: f64 = rng.gen_range(-0.04..0.04);
            for c in 0..3 {
                img.set(c, y, x, (rgb[c] + tint[c] + n).clamp(0.0, 1.0));
            }
        }
    }
    img
}

/// Masked mean RGB of a rendered sample.
pub fn masked_mean(r: &Rendered) -> Option<[f64; 3]> {
    let n = r.body_mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return None;
    }
    let mut mean = [0.0; 3];
    for (c, m) in mean.iter_mut().enumerate() {
        *m = r.image
            .plane(c)
            .iter()
            .zip(&r.body_mask)
            .filter(|(_, &k)| k)
            .map(|(v, _)| v)
            .sum::<f64>()
            / n as f64;
    }
    Some(mean)
}

/// Generated samples in manifest order, without touching the filesystem.
/// Images are rounded to 8 bits so they equal what [`synth_generate`] writes.
pub fn synth_samples(spec: &SynthSpec) -> Result<Vec<(SampleRecord, Rendered)>> {
    spec.validate()?;
    let table = synth_class_table(spec.classes);
    let mut out = Vec::with_capacity(spec.record_count());
    for classid in 0..spec.classes {
        for color in &spec.colors {
            for &view in &spec.views {
                for rep in 0..spec.per_combination {
                    let index = out.len();
                    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                    rng.set_stream(index as u64);
                    let mut rendered = render(classid, spec.rgb(color), view, spec.image_size, &mut rng);
                    rendered.image = rendered.image.quantized();
                    let members = &table[classid].members;
                    let member = &members[index % members.len()];
                    let record = SampleRecord {
                        image: format!("images/c{classid:03}_{color}_{}_{rep:02}.png", view.name()),
                        make: member.make.clone(),
                        model: member.model.clone(),
                        classid,
                        color: color.clone(),
                        view,
                        quality: Quality::Good,
                        bbox: None,
                    };
                    out.push((record, rendered));
                }
            }
        }
    }
    Ok(out)
}

pub fn synth_header(spec: &SynthSpec) -> ManifestHeader {
    ManifestHeader {
        palette: spec.palette.clone(),
        classes: synth_class_table(spec.classes),
    }
}

/// Writes PNGs under `out_dir/images/` and `out_dir/manifest.jsonl`.
pub fn synth_generate(spec: &SynthSpec, out_dir: &Path) -> Result<Manifest> {
    let samples = synth_samples(spec)?;
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let mut records = Vec::with_capacity(samples.len());
    for (record, rendered) in samples {
        rendered.image.save_png(&out_dir.join(&record.image))?;
        records.push(record);
    }
    let mut manifest = Manifest::new(synth_header(spec), records);
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    manifest.base_dir = Some(out_dir.to_path_buf());
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_count_is_product() {
        let mut spec = SynthSpec::new(12, 1);
        spec.colors = vec!["red".into(), "white".into()];
        spec.per_combination = 5;
        assert_eq!(spec.record_count(), 360);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SynthSpec::new(1, 0).validate().is_err());
        let mut spec = SynthSpec::new(3, 0);
        spec.colors = vec!["mauve".into()];
        assert!(spec.validate().is_err());
        let mut spec = SynthSpec::new(3, 0);
        spec.palette[1].rgb = spec.palette[0].rgb;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn shared_class_has_two_makes() {
        let table = synth_class_table(12);
        assert_eq!(table[0].members.len(), 2);
        assert_eq!(table[0].members[1], MakeModel::new("Renault", "Logan"));
    }

    #[test]
    fn archetypes_differ_between_classes() {
        for i in 0..24 {
            for j in i + 1..24 {
                assert_ne!(archetype(i), archetype(j));
            }
        }
    }

    #[test]
    fn first_twelve_classes_differ_in_two_cues() {
        for i in 0..12 {
            for j in i + 1..12 {
                let (a, b) = (cues(i), cues(j));
                let d = (a.lights != b.lights) as usize + (a.grille != b.grille) as usize + (a.windows != b.windows) as usize;
                assert!(d >= 2, "classes {i} and {j}");
            }
        }
    }
}
