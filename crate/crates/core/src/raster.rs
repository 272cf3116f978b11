//! Dense image grids, used for both targets and renders.

use crate::error::CoreError;
use crate::gaussian::Vec2;

/// A W×H image with 1 or 3 channels, stored row-major and
/// channel-interleaved: `data[(y*width + x)*channels + k]`.
///
/// Pixel `j = y*width + x` has its center at `(x + 0.5, y + 0.5)` in the
/// continuous coordinates every Gaussian lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    /// All-zero raster.
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        assert!(width > 0 && height > 0, "raster dims must be positive");
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    /// Builds a raster from raw data, validating length and finiteness.
    pub fn from_data(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, CoreError> {
        if width == 0 || height == 0 {
            return Err(CoreError::InvalidRaster("dims must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(CoreError::InvalidRaster(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(CoreError::InvalidRaster(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(CoreError::InvalidRaster(format!("non-finite value {v}")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn same_dims(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + k]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, k: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + k] = v;
    }

    /// Value at flat pixel index `j`, channel `k`.
    #[inline]
    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.channels + k]
    }

    #[inline]
    pub fn add_at(&mut self, j: usize, k: usize, v: f64) {
        self.data[j * self.channels + k] += v;
    }

    /// Continuous center of flat pixel index `j`.
    #[inline]
    pub fn pixel_center(j: usize, width: usize) -> Vec2 {
        let x = (j % width) as f64;
        let y = (j / width) as f64;
        Vec2::new(x + 0.5, y + 0.5)
    }

    /// Copy with every value clamped to [0, 1].
    pub fn clamped01(&self) -> Raster {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }

    /// Single-channel luminance view (Rec. 601 weights for RGB input).
    pub fn luminance(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.pixel_count());
        for j in 0..self.pixel_count() {
            data.push(0.299 * self.at(j, 0) + 0.587 * self.at(j, 1) + 0.114 * self.at(j, 2));
        }
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }
}
