use crate::error::{Error, Result};

/// Single-channel raster with row-major real-valued intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        Ok(Self { width, height, data: vec![0.0; width * height] })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Shape {
                expected: format!("{} values", width * height),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut img = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(x, y);
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Value at a possibly out-of-range integer position; zero outside.
    #[inline]
    pub fn get_or_zero(&self, x: isize, y: isize) -> f64 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0.0
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    /// Bilinear sample at continuous pixel-center coordinates; zero outside the raster.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        if !(x > -1.0 && y > -1.0 && x < self.width as f64 && y < self.height as f64) {
            return 0.0;
        }
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let v00 = self.get_or_zero(xi, yi);
        let v10 = self.get_or_zero(xi + 1, yi);
        let v01 = self.get_or_zero(xi, yi + 1);
        let v11 = self.get_or_zero(xi + 1, yi + 1);
        (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Zero-pads on the right/bottom to the requested size.
    pub fn pad_to(&self, width: usize, height: usize) -> Result<Self> {
        if width < self.width || height < self.height {
            return Err(Error::Dimension(format!(
                "cannot pad {}x{} down to {width}x{height}",
                self.width, self.height
            )));
        }
        let mut out = Self::new(width, height)?;
        for y in 0..self.height {
            out.data[y * width..y * width + self.width]
                .copy_from_slice(&self.data[y * self.width..(y + 1) * self.width]);
        }
        Ok(out)
    }

    /// Homothetic bilinear resize so the result is `width` pixels wide.
    pub fn resize_to_width(&self, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidArgument("target width must be positive".into()));
        }
        let scale = width as f64 / self.width as f64;
        let height = ((self.height as f64 * scale).round() as usize).max(1);
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Self::from_fn(width, height, |x, y| {
            let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
            let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            self.sample_bilinear(src_x, src_y)
        })
    }
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(GrayImage::new(0, 3).is_err());
        assert!(GrayImage::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn bilinear_hits_pixel_centers() {
        let img = GrayImage::from_fn(4, 3, |x, y| (x + 10 * y) as f64).unwrap();
        assert_eq!(img.sample_bilinear(2.0, 1.0), 12.0);
        assert!((img.sample_bilinear(1.5, 0.5) - 6.5).abs() < 1e-12);
        assert_eq!(img.sample_bilinear(-2.0, 0.0), 0.0);
    }

    #[test]
    fn pad_keeps_content() {
        let img = GrayImage::from_fn(3, 2, |x, y| (x * y + 1) as f64).unwrap();
        let p = img.pad_to(4, 4).unwrap();
        assert_eq!(p.get(2, 1), 3.0);
        assert_eq!(p.get(3, 3), 0.0);
        assert_eq!(p.sum(), img.sum());
    }

    #[test]
    fn resize_width() {
        let img = GrayImage::new(800, 600).unwrap();
        let r = img.resize_to_width(400).unwrap();
        assert_eq!((r.width(), r.height()), (400, 300));
    }
}
