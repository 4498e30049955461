//! Static SVG: the loop over a raster heatmap of `K`.

use std::fmt::Write;

use base64::Engine;
use kloop::{CurvatureField, LoopCurve, Point};

/// Side length of the heatmap raster.
pub const RASTER: usize = 256;

/// Bounding box of the loop padded by 20 % of its larger side.
pub fn view_box(u: &LoopCurve) -> (f64, f64, f64, f64) {
    let xs = u.points().iter().map(|p| p.re);
    let ys = u.points().iter().map(|p| p.im);
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let side = (x1 - x0).max(y1 - y0).max(1e-9);
    let pad = 0.2 * side;
    (x0 - pad, y0 - pad, x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad)
}

/// Diverging blue-white-red colour for `t` in `[-1, 1]`.
fn colour(t: f64) -> [u8; 3] {
    let t = t.clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 * c).round() as u8;
    if t >= 0.0 {
        [255, fade(1.0 - 0.8 * t), fade(1.0 - 0.8 * t)]
    } else {
        [fade(1.0 + 0.8 * t), fade(1.0 + 0.8 * t), 255]
    }
}

fn heatmap_png(field: &CurvatureField, vb: (f64, f64, f64, f64)) -> Vec<u8> {
    let (x0, y0, w, h) = vb;
    let scale = field.sup_norm().max(f64::MIN_POSITIVE);
    let mut rgb = Vec::with_capacity(RASTER * RASTER * 3);
    for row in 0..RASTER {
        // Row 0 is the top edge, i.e. the largest y.
        let y = y0 + h * (1.0 - (row as f64 + 0.5) / RASTER as f64);
        for col in 0..RASTER {
            let x = x0 + w * (col as f64 + 0.5) / RASTER as f64;
            rgb.extend_from_slice(&colour(field.eval_k(Point::new(x, y)) / scale));
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, RASTER as u32, RASTER as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory png header");
        writer.write_image_data(&rgb).expect("in-memory png data");
    }
    out
}

pub fn render(u: &LoopCurve, field: &CurvatureField) -> String {
    let vb = view_box(u);
    let (x0, y0, w, h) = vb;
    let png = base64::engine::general_purpose::STANDARD.encode(heatmap_png(field, vb));
    // SVG y grows downwards, so plot (x, -y).
    let top = -(y0 + h);
    let mut pts = String::new();
    for p in u.points() {
        let _ = write!(pts, "{},{} ", p.re, -p.im);
    }
    let stroke = 0.004 * w.max(h);
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x} {y} {w} {h}\" width=\"512\" height=\"512\">\n",
            "<image x=\"{x}\" y=\"{y}\" width=\"{w}\" height=\"{h}\" preserveAspectRatio=\"none\" ",
            "href=\"data:image/png;base64,{png}\"/>\n",
            "<polygon points=\"{pts}\" fill=\"none\" stroke=\"black\" stroke-width=\"{sw}\"/>\n",
            "</svg>\n"
        ),
        x = x0,
        y = top,
        w = w,
        h = h,
        png = png,
        pts = pts.trim_end(),
        sw = stroke,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use kloop::paths::circle_loop;

    #[test]
    fn padded_box_and_content() {
        let u = circle_loop(1.0, Point::new(0.0, 0.0), 1, 64).unwrap();
        let (x, y, w, h) = view_box(&u);
        assert!((x + 1.4).abs() < 1e-12 && (y + 1.4).abs() < 1e-12);
        assert!((w - 2.8).abs() < 1e-12 && (h - 2.8).abs() < 1e-12);
        let f = CurvatureField::sine_product(1.0, 0.5, 0.0, 1.0, 1.0).unwrap();
        let svg = render(&u, &f);
        assert!(svg.starts_with("<svg") && svg.contains("data:image/png;base64,iVBORw0KGgo"));
        assert_eq!(svg, render(&u, &f));
    }
}
