//! Spectrogram heatmap rendering to PNG.

use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::Array2;

use crate::error::{Error, Result};

const CELL_W: u32 = 2;
const CELL_H: u32 = 2;
const MARGIN_LEFT: u32 = 40;
const MARGIN_RIGHT: u32 = 56;
const MARGIN_TOP: u32 = 16;
const MARGIN_BOTTOM: u32 = 22;
const BG: Rgb<u8> = Rgb([255, 255, 255]);
const INK: Rgb<u8> = Rgb([0, 0, 0]);

/// 5x7 column-major glyphs (bit 0 = top row) for the label character set.
fn glyph(c: char) -> [u8; 5] {
    match c.to_ascii_uppercase() {
        '0' => [0x3e, 0x51, 0x49, 0x45, 0x3e],
        '1' => [0x00, 0x42, 0x7f, 0x40, 0x00],
        '2' => [0x42, 0x61, 0x51, 0x49, 0x46],
        '3' => [0x21, 0x41, 0x45, 0x4b, 0x31],
        '4' => [0x18, 0x14, 0x12, 0x7f, 0x10],
        '5' => [0x27, 0x45, 0x45, 0x45, 0x39],
        '6' => [0x3c, 0x4a, 0x49, 0x49, 0x30],
        '7' => [0x01, 0x71, 0x09, 0x05, 0x03],
        '8' => [0x36, 0x49, 0x49, 0x49, 0x36],
        '9' => [0x06, 0x49, 0x49, 0x29, 0x1e],
        'A' => [0x7e, 0x11, 0x11, 0x11, 0x7e],
        'B' => [0x7f, 0x49, 0x49, 0x49, 0x36],
        'C' => [0x3e, 0x41, 0x41, 0x41, 0x22],
        'D' => [0x7f, 0x41, 0x41, 0x22, 0x1c],
        'E' => [0x7f, 0x49, 0x49, 0x49, 0x41],
        'F' => [0x7f, 0x09, 0x09, 0x09, 0x01],
        'G' => [0x3e, 0x41, 0x49, 0x49, 0x7a],
        'H' => [0x7f, 0x08, 0x08, 0x08, 0x7f],
        'I' => [0x00, 0x41, 0x7f, 0x41, 0x00],
        'J' => [0x20, 0x40, 0x41, 0x3f, 0x01],
        'K' => [0x7f, 0x08, 0x14, 0x22, 0x41],
        'L' => [0x7f, 0x40, 0x40, 0x40, 0x40],
        'M' => [0x7f, 0x02, 0x0c, 0x02, 0x7f],
        'N' => [0x7f, 0x04, 0x08, 0x10, 0x7f],
        'O' => [0x3e, 0x41, 0x41, 0x41, 0x3e],
        'P' => [0x7f, 0x09, 0x09, 0x09, 0x06],
        'Q' => [0x3e, 0x41, 0x51, 0x21, 0x5e],
        'R' => [0x7f, 0x09, 0x19, 0x29, 0x46],
        'S' => [0x46, 0x49, 0x49, 0x49, 0x31],
        'T' => [0x01, 0x01, 0x7f, 0x01, 0x01],
        'U' => [0x3f, 0x40, 0x40, 0x40, 0x3f],
        'V' => [0x1f, 0x20, 0x40, 0x20, 0x1f],
        'W' => [0x3f, 0x40, 0x38, 0x40, 0x3f],
        'X' => [0x63, 0x14, 0x08, 0x14, 0x63],
        'Y' => [0x07, 0x08, 0x70, 0x08, 0x07],
        'Z' => [0x61, 0x51, 0x49, 0x45, 0x43],
        '(' => [0x00, 0x1c, 0x22, 0x41, 0x00],
        ')' => [0x00, 0x41, 0x22, 0x1c, 0x00],
        '-' => [0x08, 0x08, 0x08, 0x08, 0x08],
        '.' => [0x00, 0x60, 0x60, 0x00, 0x00],
        '+' => [0x08, 0x08, 0x3e, 0x08, 0x08],
        _ => [0x00; 5],
    }
}

fn draw_text(img: &mut RgbImage, x: u32, y: u32, text: &str, color: Rgb<u8>) {
    let mut cx = x;
    for c in text.chars() {
        for (col, bits) in glyph(c).iter().enumerate() {
            for row in 0..7 {
                if bits >> row & 1 == 1 {
                    let (px, py) = (cx + col as u32, y + row);
                    if px < img.width() && py < img.height() {
                        img.put_pixel(px, py, color);
                    }
                }
            }
        }
        cx += 6;
    }
}

/// Dark-to-bright heatmap color for t in [0, 1].
pub fn colormap(t: f64) -> Rgb<u8> {
    let anchors: [(f64, [f64; 3]); 4] = [
        (0.0, [0.0, 0.0, 4.0]),
        (0.35, [87.0, 16.0, 110.0]),
        (0.65, [227.0, 89.0, 33.0]),
        (1.0, [252.0, 255.0, 164.0]),
    ];
    let t = t.clamp(0.0, 1.0);
    let mut rgb = anchors[anchors.len() - 1].1;
    for w in anchors.windows(2) {
        let ((t0, c0), (t1, c1)) = (w[0], w[1]);
        if t <= t1 {
            let u = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            rgb = [0, 1, 2].map(|i| c0[i] + u * (c1[i] - c0[i]));
            break;
        }
    }
    Rgb(rgb.map(|v| v.round() as u8))
}

/// Bare time-frequency cell raster (no axes): width = T cells, height = 80
/// bands with the lowest band at the bottom. A constant field renders as a
/// single color.
pub fn render_heatmap_cells(lms: &Array2<f64>, lo: f64, hi: f64) -> RgbImage {
    let (t_len, n_bands) = (lms.nrows(), lms.ncols());
    let mut img = RgbImage::new(t_len as u32 * CELL_W, n_bands as u32 * CELL_H);
    for t in 0..t_len {
        for b in 0..n_bands {
            let v = if hi > lo {
                (lms[[t, b]] - lo) / (hi - lo)
            } else {
                0.0
            };
            let color = colormap(v);
            let (x0, y0) = (t as u32 * CELL_W, (n_bands - 1 - b) as u32 * CELL_H);
            for dx in 0..CELL_W {
                for dy in 0..CELL_H {
                    img.put_pixel(x0 + dx, y0 + dy, color);
                }
            }
        }
    }
    img
}

fn value_range(panels: &[&Array2<f64>]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in panels {
        for &v in p.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

fn render_panel(lms: &Array2<f64>, title: &str, lo: f64, hi: f64) -> RgbImage {
    let cells = render_heatmap_cells(lms, lo, hi);
    let w = MARGIN_LEFT + cells.width() + MARGIN_RIGHT;
    let h = MARGIN_TOP + cells.height() + MARGIN_BOTTOM;
    let mut img = RgbImage::from_pixel(w, h, BG);
    for (x, y, px) in cells.enumerate_pixels() {
        img.put_pixel(MARGIN_LEFT + x, MARGIN_TOP + y, *px);
    }

    draw_text(&mut img, MARGIN_LEFT, 4, title, INK);
    // Frequency axis: mel bin indices, low at the bottom.
    draw_text(&mut img, 2, MARGIN_TOP, "79", INK);
    draw_text(&mut img, 2, MARGIN_TOP + cells.height() - 8, "0", INK);
    draw_text(&mut img, 2, MARGIN_TOP + cells.height() / 2 - 4, "MEL", INK);
    // Time axis in frames.
    let y_axis = MARGIN_TOP + cells.height() + 4;
    draw_text(&mut img, MARGIN_LEFT, y_axis, "0", INK);
    let last = format!("{}", lms.nrows().saturating_sub(1));
    draw_text(
        &mut img,
        MARGIN_LEFT + cells.width() - 6 * last.len() as u32,
        y_axis,
        &last,
        INK,
    );
    draw_text(
        &mut img,
        MARGIN_LEFT + cells.width() / 2 - 18,
        y_axis + 8,
        "FRAME",
        INK,
    );

    // dB-style color scale.
    let bar_x = MARGIN_LEFT + cells.width() + 8;
    for y in 0..cells.height() {
        let t = 1.0 - y as f64 / (cells.height() - 1).max(1) as f64;
        let color = colormap(t);
        for dx in 0..6 {
            img.put_pixel(bar_x + dx, MARGIN_TOP + y, color);
        }
    }
    draw_text(&mut img, bar_x + 8, MARGIN_TOP, &format!("{hi:.0}"), INK);
    draw_text(
        &mut img,
        bar_x + 8,
        MARGIN_TOP + cells.height() - 8,
        &format!("{lo:.0}"),
        INK,
    );
    img
}

fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path)
        .map_err(|e| Error::Eval(format!("cannot write {}: {e}", path.display())))
}

/// Single labelled spectrogram heatmap PNG.
pub fn export_spectrogram(lms: &Array2<f64>, path: &Path) -> Result<()> {
    let (lo, hi) = value_range(&[lms]);
    save_png(&render_panel(lms, "LOG-MEL SPECTROGRAM", lo, hi), path)
}

/// Titled panels on a two-column grid sharing one color scale; with four
/// panels this gives the (a)-(d) comparison layout.
pub fn export_panels(panels: &[(String, &Array2<f64>)], path: &Path) -> Result<()> {
    if panels.is_empty() {
        return Err(Error::InvalidArgument("no panels to render".into()));
    }
    let (lo, hi) = value_range(&panels.iter().map(|(_, p)| *p).collect::<Vec<_>>());
    let rendered: Vec<RgbImage> = panels
        .iter()
        .map(|(title, lms)| render_panel(lms, title, lo, hi))
        .collect();
    let pw = rendered.iter().map(|r| r.width()).max().unwrap();
    let ph = rendered.iter().map(|r| r.height()).max().unwrap();
    let cols = 2u32.min(rendered.len() as u32);
    let rows = (rendered.len() as u32).div_ceil(cols);
    let mut grid = RgbImage::from_pixel(cols * pw, rows * ph, BG);
    for (idx, panel) in rendered.iter().enumerate() {
        let (ox, oy) = (idx as u32 % cols * pw, idx as u32 / cols * ph);
        for (x, y, px) in panel.enumerate_pixels() {
            grid.put_pixel(ox + x, oy + y, *px);
        }
    }
    save_png(&grid, path)
}
