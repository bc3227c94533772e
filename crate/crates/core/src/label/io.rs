//! PNG encoding for label, scan and annotation rasters.
//!
//! Label images are written as 8-bit palette PNGs whose palette is the schema
//! palette in class order, so palette index == class index. Encoding is
//! deterministic: identical images produce identical bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Write};
use std::path::Path;
use std::sync::Arc;

use png::{BitDepth, ColorType, Compression, Transformations};

use crate::error::{Error, Result};
use crate::label::image::{IndexedLabelImage, RgbImage, ScanImage};
use crate::label::schema::{LabelSchema, Rgb};

fn corrupt(path: &Path, reason: impl ToString) -> Error {
    Error::CorruptFile {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

struct Decoded {
    width: u32,
    height: u32,
    color: ColorType,
    depth: BitDepth,
    palette: Option<Vec<u8>>,
    data: Vec<u8>,
}

fn decode(path: &Path, transformations: Transformations) -> Result<Decoded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(transformations);
    let mut reader = decoder.read_info().map_err(|e| corrupt(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| corrupt(path, "image too large"))?;
    let mut data = vec![0; size];
    let frame = reader.next_frame(&mut data).map_err(|e| corrupt(path, e))?;
    data.truncate(frame.buffer_size());
    let palette = reader.info().palette.as_ref().map(|p| p.to_vec());
    Ok(Decoded {
        width: frame.width,
        height: frame.height,
        color: frame.color_type,
        depth: frame.bit_depth,
        palette,
        data,
    })
}

fn unpack_indices(d: &Decoded) -> Vec<u8> {
    let bits = match d.depth {
        BitDepth::One => 1,
        BitDepth::Two => 2,
        BitDepth::Four => 4,
        _ => 8,
    };
    if bits == 8 {
        return d.data.clone();
    }
    let row_bytes = (d.width as usize * bits).div_ceil(8);
    let mask = (1u8 << bits) - 1;
    let mut out = Vec::with_capacity(d.width as usize * d.height as usize);
    for row in d.data.chunks(row_bytes).take(d.height as usize) {
        for x in 0..d.width as usize {
            let bit = x * bits;
            let shift = 8 - bits - (bit % 8);
            out.push((row[bit / 8] >> shift) & mask);
        }
    }
    out
}

/// Reads an indexed-palette PNG whose palette entries are all schema colors.
pub fn load_indexed(path: &Path, schema: &Arc<LabelSchema>) -> Result<IndexedLabelImage> {
    let d = decode(path, Transformations::IDENTITY)?;
    if d.color != ColorType::Indexed {
        return Err(corrupt(path, format!("expected palette image, found {:?}", d.color)));
    }
    let palette = d
        .palette
        .as_ref()
        .ok_or_else(|| corrupt(path, "palette image without PLTE chunk"))?;
    let mut map = Vec::with_capacity(palette.len() / 3);
    for entry in palette.chunks_exact(3) {
        let color = Rgb([entry[0], entry[1], entry[2]]);
        let idx = schema.index_of_color(color).ok_or(Error::UnknownColor {
            task: schema.task().to_string(),
            color: color.0,
            at: None,
        })?;
        map.push(idx);
    }
    let raw = unpack_indices(&d);
    let mut labels = Vec::with_capacity(raw.len());
    for (i, p) in raw.into_iter().enumerate() {
        let class = *map.get(p as usize).ok_or_else(|| {
            corrupt(path, format!("pixel {i} references missing palette entry {p}"))
        })?;
        labels.push(class);
    }
    IndexedLabelImage::new(d.width, d.height, labels, schema.clone())
        .map_err(|e| corrupt(path, e))
}

fn encode<W: Write>(
    out: W,
    width: u32,
    height: u32,
    color: ColorType,
    palette: Option<Vec<u8>>,
    data: &[u8],
) -> std::result::Result<(), png::EncodingError> {
    let mut enc = png::Encoder::new(out, width, height);
    enc.set_color(color);
    enc.set_depth(BitDepth::Eight);
    enc.set_compression(Compression::Fast);
    if let Some(p) = palette {
        enc.set_palette(p);
    }
    let mut writer = enc.write_header()?;
    writer.write_image_data(data)?;
    writer.finish()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn encode_to_vec(
    width: u32,
    height: u32,
    color: ColorType,
    palette: Option<Vec<u8>>,
    data: &[u8],
) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    encode(&mut buf, width, height, color, palette, data).expect("in-memory png encoding");
    buf.into_inner()
}

pub fn encode_indexed(img: &IndexedLabelImage) -> Vec<u8> {
    let palette: Vec<u8> = img.schema().palette().iter().flat_map(|c| c.0).collect();
    encode_to_vec(
        img.width(),
        img.height(),
        ColorType::Indexed,
        Some(palette),
        img.labels(),
    )
}

pub fn save_indexed(img: &IndexedLabelImage, path: &Path) -> Result<()> {
    write_file(path, &encode_indexed(img))
}

/// Reads an 8-bit scan. Color input is reduced to luma.
pub fn load_gray(path: &Path) -> Result<ScanImage> {
    let d = decode(path, Transformations::EXPAND | Transformations::STRIP_16)?;
    let pixels: Vec<u8> = match d.color {
        ColorType::Grayscale => d.data,
        ColorType::GrayscaleAlpha => d.data.chunks_exact(2).map(|c| c[0]).collect(),
        ColorType::Rgb => d.data.chunks_exact(3).map(luma).collect(),
        ColorType::Rgba => d.data.chunks_exact(4).map(luma).collect(),
        ColorType::Indexed => return Err(corrupt(path, "unexpanded palette image")),
    };
    ScanImage::new(d.width, d.height, pixels).map_err(|e| corrupt(path, e))
}

fn luma(c: &[u8]) -> u8 {
    ((299 * c[0] as u32 + 587 * c[1] as u32 + 114 * c[2] as u32 + 500) / 1000) as u8
}

pub fn encode_gray(img: &ScanImage) -> Vec<u8> {
    encode_to_vec(img.width(), img.height(), ColorType::Grayscale, None, img.pixels())
}

pub fn save_gray(img: &ScanImage, path: &Path) -> Result<()> {
    write_file(path, &encode_gray(img))
}

/// Reads an annotation layer as RGB. Alpha is discarded.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let d = decode(path, Transformations::EXPAND | Transformations::STRIP_16)?;
    let pixels: Vec<[u8; 3]> = match d.color {
        ColorType::Rgb => d.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        ColorType::Rgba => d.data.chunks_exact(4).map(|c| [c[0], c[1], c[2]]).collect(),
        ColorType::Grayscale => d.data.iter().map(|&g| [g, g, g]).collect(),
        ColorType::GrayscaleAlpha => d.data.chunks_exact(2).map(|c| [c[0]; 3]).collect(),
        ColorType::Indexed => return Err(corrupt(path, "unexpanded palette image")),
    };
    RgbImage::new(d.width, d.height, pixels).map_err(|e| corrupt(path, e))
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    let data: Vec<u8> = img.pixels().iter().flatten().copied().collect();
    write_file(
        path,
        &encode_to_vec(img.width(), img.height(), ColorType::Rgb, None, &data),
    )
}
