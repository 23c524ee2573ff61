//! Bounding-box lists: one `x_min y_min x_max y_max` per line, min inclusive,
//! max exclusive.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BBox {
    pub fn new(x_min: usize, y_min: usize, x_max: usize, y_max: usize) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> usize {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x_min..self.x_max).contains(&x) && (self.y_min..self.y_max).contains(&y)
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x_min < self.x_max
            && self.y_min < self.y_max
            && self.x_max <= width
            && self.y_max <= height
    }
}

pub type BBoxList = Vec<BBox>;

/// Checks every box against image bounds.
pub fn check_bounds(boxes: &[BBox], width: usize, height: usize) -> Result<()> {
    match boxes.iter().position(|b| !b.fits(width, height)) {
        None => Ok(()),
        Some(index) => {
            let b = boxes[index];
            Err(Error::BoxOutOfBounds {
                index,
                x_min: b.x_min,
                y_min: b.y_min,
                x_max: b.x_max,
                y_max: b.y_max,
                width,
                height,
            })
        }
    }
}

pub fn parse_boxes(text: &str) -> Result<BBoxList> {
    let mut boxes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::BoxSyntax {
                line: line_no,
                reason: format!("expected 4 integers, found {} fields", fields.len()),
            });
        }
        let mut coords = [0usize; 4];
        for (slot, tok) in coords.iter_mut().zip(&fields) {
            *slot = tok.parse().map_err(|_| Error::BoxSyntax {
                line: line_no,
                reason: format!("{tok:?} is not a non-negative integer"),
            })?;
        }
        let [x_min, y_min, x_max, y_max] = coords;
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::EmptyBox(line_no));
        }
        boxes.push(BBox::new(x_min, y_min, x_max, y_max));
    }
    Ok(boxes)
}

pub fn render_boxes(boxes: &[BBox]) -> String {
    let mut out = String::new();
    for b in boxes {
        let _ = writeln!(out, "{} {} {} {}", b.x_min, b.y_min, b.x_max, b.y_max);
    }
    out
}

pub fn read_boxes(path: impl AsRef<Path>) -> Result<BBoxList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_boxes(&text)
}

pub fn write_boxes(boxes: &[BBox], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_boxes(boxes)).map_err(|e| Error::io(path, e))
}
