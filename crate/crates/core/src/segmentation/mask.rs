//! Binary hand masks and their on-disk forms (PNG and run-length sidecar).

use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandMask {
    pub width: usize,
    pub height: usize,
    /// Row-major, 1 inside the hand region.
    pub data: Vec<u8>,
}

impl HandMask {
    pub fn new(width: usize, height: usize) -> Self {
        HandMask {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, inside: bool) {
        self.data[y * self.width + x] = inside as u8;
    }

    /// Mask value at a signed pixel position; out-of-image positions are outside.
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([if self.get(x as usize, y as usize) { 255 } else { 0 }])
        })
    }

    /// Pixels above mid-grey count as inside.
    pub fn from_image(img: &GrayImage) -> Self {
        HandMask {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.pixels().map(|p| (p[0] >= 128) as u8).collect(),
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_image().save(path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_image(&image::open(path)?.to_luma8()))
    }

    /// Run lengths over the row-major pixel stream, alternating outside and
    /// inside and starting with an (possibly empty) outside run.
    pub fn run_lengths(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut current = 0u8;
        let mut len = 0usize;
        for &v in &self.data {
            let v = (v != 0) as u8;
            if v == current {
                len += 1;
            } else {
                runs.push(len);
                current = v;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    /// Text sidecar: `width height` on the first line, runs on the second.
    pub fn to_rle_string(&self) -> String {
        let runs: Vec<String> = self.run_lengths().iter().map(usize::to_string).collect();
        format!("{} {}\n{}\n", self.width, self.height, runs.join(" "))
    }

    pub fn from_rle_str(s: &str) -> Result<Self> {
        let mut lines = s.lines();
        let dims: Vec<usize> = lines
            .next()
            .unwrap_or("")
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Format(format!("bad RLE header token {t:?}"))))
            .collect::<Result<_>>()?;
        let [width, height] = dims[..] else {
            return Err(Error::Format("RLE header needs width and height".into()));
        };
        let mut data = Vec::with_capacity(width * height);
        let mut value = 0u8;
        for tok in lines.next().unwrap_or("").split_whitespace() {
            let n: usize = tok
                .parse()
                .map_err(|_| Error::Format(format!("bad run length {tok:?}")))?;
            if data.len() + n > width * height {
                return Err(Error::Format("RLE runs exceed image size".into()));
            }
            data.extend(std::iter::repeat_n(value, n));
            value ^= 1;
        }
        if data.len() != width * height {
            return Err(Error::Format("RLE runs do not cover the image".into()));
        }
        Ok(HandMask { width, height, data })
    }
}
