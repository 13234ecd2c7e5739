//! Renders a contact sheet of synthetic samples: one row per class, columns
//! cycling through views and colors.

use std::path::PathBuf;

use vehreid_core::dataset::{synth_samples, Image, SynthSpec, View};

fn main() -> vehreid_core::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth_preview.png".into()));
    let mut spec = SynthSpec::new(12, 7);
    spec.views = vec![View::Front, View::Side, View::Rear, View::FrontQuarter, View::RearQuarter];
    spec.colors.truncate(4);
    let samples = synth_samples(&spec)?;
    let s = spec.image_size;
    let cols = spec.views.len() * spec.colors.len();
    let mut sheet = Image::filled(cols * s, spec.classes * s, [1.0; 3]);
    for (i, (_, r)) in samples.iter().enumerate() {
        let (row, col) = (i / cols, i % cols);
        for c in 0..3 {
            for y in 0..s {
                for x in 0..s {
                    sheet.set(c, row * s + y, col * s + x, r.image.get(c, y, x));
                }
            }
        }
    }
    sheet.save_png(&out)
}
