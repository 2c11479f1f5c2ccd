//! PNG and JSON helpers. Images are 8-bit RGB, labels and masks 8-bit
//! grayscale (labels hold class indices with 255 = ignore, masks 0/255).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use anyhow::{bail, Context, Result};
use png::{BitDepth, ColorType, Decoder, Encoder, Transformations};
use segbench_core::scenes::{BinaryMask, Image, SegLabel};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: ColorType,
    data: &[u8],
) -> Result<()> {
    ensure_parent(path)?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut enc = Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer
        .write_image_data(data)
        .with_context(|| format!("writing {}", path.display()))?;
    writer.finish()?;
    Ok(())
}

/// Decoded 8-bit pixels as `(width, height, channels, bytes)`.
fn read_png(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut dec = Decoder::new(BufReader::new(file));
    dec.set_transformations(Transformations::normalize_to_color8());
    let mut reader = dec
        .read_info()
        .with_context(|| format!("reading {}", path.display()))?;
    let size = reader.output_buffer_size().context("image too large")?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    buf.truncate(info.buffer_size());
    let channels = match info.color_type {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => bail!("{}: unexpanded palette image", path.display()),
    };
    Ok((info.width as usize, info.height as usize, channels, buf))
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn save_image(path: &Path, image: &Image) -> Result<()> {
    let bytes: Vec<u8> = image.data.iter().map(|&v| to_u8(v)).collect();
    write_png(path, image.width, image.height, ColorType::Rgb, &bytes)
}

pub fn load_image(path: &Path) -> Result<Image> {
    let (w, h, ch, buf) = read_png(path)?;
    if ch < 3 {
        bail!("{}: expected an RGB image", path.display());
    }
    let data = buf
        .chunks_exact(ch)
        .flat_map(|p| p[..3].iter().map(|&b| b as f64 / 255.0))
        .collect();
    Ok(Image::new(h, w, data)?)
}

pub fn save_label(path: &Path, label: &SegLabel) -> Result<()> {
    write_png(
        path,
        label.width,
        label.height,
        ColorType::Grayscale,
        &label.classes,
    )
}

pub fn load_label(path: &Path, num_classes: usize) -> Result<SegLabel> {
    let (w, h, ch, buf) = read_png(path)?;
    if ch != 1 {
        bail!("{}: expected a single-channel index map", path.display());
    }
    Ok(SegLabel::new(h, w, num_classes, buf)?)
}

pub fn save_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let bytes: Vec<u8> = mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_png(path, mask.width, mask.height, ColorType::Grayscale, &bytes)
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let (w, h, ch, buf) = read_png(path)?;
    if ch != 1 {
        bail!("{}: expected a single-channel mask", path.display());
    }
    Ok(BinaryMask {
        height: h,
        width: w,
        bits: buf.iter().map(|&b| b >= 128).collect(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// One JSON document per line.
pub fn write_json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    ensure_parent(path)?;
    let mut out = String::new();
    for item in items {
        out += &serde_json::to_string(item)?;
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).with_context(|| format!("parsing a line of {}", path.display()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::new(8, 9, (0..216).map(|i| i as f64 / 215.0).collect())
            .unwrap()
            .quantized();
        save_image(&dir.path().join("a.png"), &img).unwrap();
        assert_eq!(load_image(&dir.path().join("a.png")).unwrap(), img);

        let label = SegLabel::new(
            8,
            9,
            4,
            (0..72)
                .map(|i| if i % 7 == 0 { 255 } else { (i % 4) as u8 })
                .collect(),
        )
        .unwrap();
        save_label(&dir.path().join("l.png"), &label).unwrap();
        assert_eq!(load_label(&dir.path().join("l.png"), 4).unwrap(), label);

        let mask = BinaryMask::from_fn(8, 9, |y, x| (x + y) % 2 == 0);
        save_mask(&dir.path().join("m.png"), &mask).unwrap();
        assert_eq!(load_mask(&dir.path().join("m.png")).unwrap(), mask);
    }

    #[test]
    fn json_lines_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        write_json_lines(&p, &[1u32, 2, 3]).unwrap();
        assert_eq!(read_json_lines::<u32>(&p).unwrap(), vec![1, 2, 3]);
    }
}
