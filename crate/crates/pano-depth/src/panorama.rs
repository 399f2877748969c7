//! In-memory raster type shared by the renderer, SGM, fusion, and metrics.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PanoramaError {
    #[error("data length {got} does not match {w}x{h}x{c}")]
    LengthMismatch { got: usize, w: usize, h: usize, c: usize },
    #[error("channel count must be 1 or 3, got {0}")]
    BadChannels(usize),
}

/// What the scalar values of a panorama mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PanoKind {
    /// Three channels in [0, 1].
    Rgb,
    /// One channel in [0, 1].
    Gray,
    /// Meters; 0 marks an invalid pixel.
    Depth,
    /// Radians; 0 marks an invalid pixel.
    Disparity,
}

/// Row-major raster. Values are stored as f64; the file formats (PPM bytes,
/// PFM f32) convert losslessly in and out of this representation.
#[derive(Clone, Debug, PartialEq)]
pub struct Panorama {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub kind: PanoKind,
    pub data: Vec<f64>,
}

impl Panorama {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        kind: PanoKind,
        data: Vec<f64>,
    ) -> Result<Self, PanoramaError> {
        if channels != 1 && channels != 3 {
            return Err(PanoramaError::BadChannels(channels));
        }
        if data.len() != width * height * channels {
            return Err(PanoramaError::LengthMismatch {
                got: data.len(),
                w: width,
                h: height,
                c: channels,
            });
        }
        Ok(Panorama {
            width,
            height,
            channels,
            kind,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize, kind: PanoKind) -> Self {
        Panorama {
            width,
            height,
            channels,
            kind,
            data: vec![0.0; width * height * channels],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.idx(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.idx(x, y, c);
        self.data[i] = v;
    }

    /// Scalar (single-channel) accessor.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x]
    }

    /// Convert RGB to grayscale with the fixed luma weights
    /// (0.299, 0.587, 0.114). Gray and single-channel inputs pass through.
    pub fn to_gray(&self) -> Panorama {
        if self.channels == 1 {
            let mut out = self.clone();
            out.kind = PanoKind::Gray;
            return out;
        }
        let mut data = Vec::with_capacity(self.width * self.height);
        for px in self.data.chunks_exact(3) {
            data.push(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
        }
        Panorama {
            width: self.width,
            height: self.height,
            channels: 1,
            kind: PanoKind::Gray,
            data,
        }
    }

    /// Iterator over valid scalar values (0 < v, and v <= cap if given).
    pub fn valid_values<'a>(&'a self, cap: Option<f64>) -> impl Iterator<Item = f64> + 'a {
        debug_assert_eq!(self.channels, 1);
        self.data
            .iter()
            .copied()
            .filter(move |&v| v > 0.0 && cap.map_or(true, |c| v <= c))
    }
}
