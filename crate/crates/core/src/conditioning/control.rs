use crate::error::{Error, Result};
use crate::frame::read_pixmap;
use std::path::Path;

/// Spatial conditioning image, channel-major with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ControlImage {
    pub fn blank(width: usize, height: usize, channels: usize) -> Self {
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self { width, height, channels, data: vec![value; width * height * channels] }
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.get(c, x, y)).collect()
    }

    /// Pixels where any channel is non-zero, as `(x, y)`.
    pub fn lit_pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if (0..self.channels).any(|c| self.get(c, x, y) != 0.0) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// Writes a three-channel image as P6.
    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if self.channels != 3 {
            return Err(Error::InvalidArgument("only three-channel control images can be saved".into()));
        }
        let mut bytes = Vec::new();
        crate::frame::write_rgb_ppm(&mut bytes, self.width, self.height, &self.data).expect("in-memory write");
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Bilinear resampling with half-pixel centres: destination pixel `x` samples
/// source coordinate `(x + 0.5) * src_w / dst_w - 0.5`, clamped to the image.
pub fn resize_bilinear(img: &ControlImage, width: usize, height: usize) -> Result<ControlImage> {
    if width == 0 || height == 0 || img.width == 0 || img.height == 0 {
        return Err(Error::InvalidArgument("resize to or from a zero dimension".into()));
    }
    if (width, height) == (img.width, img.height) {
        return Ok(img.clone());
    }
    let axis = |dst: usize, src: usize| -> Vec<(usize, usize, f64)> {
        (0..dst)
            .map(|i| {
                let s = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, s - lo as f64)
            })
            .collect()
    };
    let xs = axis(width, img.width);
    let ys = axis(height, img.height);
    let mut out = ControlImage::blank(width, height, img.channels);
    for c in 0..img.channels {
        for (y, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = img.get(c, x0, y0) * (1.0 - fx) + img.get(c, x1, y0) * fx;
                let bottom = img.get(c, x0, y1) * (1.0 - fx) + img.get(c, x1, y1) * fx;
                out.set(c, x, y, top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Ok(out)
}

/// Loads an externally rendered control image (e.g. a normal map from a full
/// body model) and resamples it to `width` x `height`.
pub fn load_control_image(path: impl AsRef<Path>, width: usize, height: usize) -> Result<ControlImage> {
    let pix = read_pixmap(path)?;
    let img = ControlImage { width: pix.width, height: pix.height, channels: 3, data: pix.planes };
    resize_bilinear(&img, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_upsample_and_identity() {
        let img = ControlImage { width: 2, height: 1, channels: 1, data: vec![0.0, 1.0] };
        let up = resize_bilinear(&img, 4, 1).unwrap();
        // Source coordinates -0.25, 0.25, 0.75, 1.25 clamp to [0, 1].
        assert_eq!(up.data, vec![0.0, 0.25, 0.75, 1.0]);
        assert_eq!(resize_bilinear(&img, 2, 1).unwrap(), img);
        assert!(resize_bilinear(&img, 0, 1).is_err());
    }

    #[test]
    fn bilinear_downsample_averages_pairs() {
        let img = ControlImage { width: 4, height: 1, channels: 1, data: vec![0.0, 1.0, 0.0, 1.0] };
        assert_eq!(resize_bilinear(&img, 2, 1).unwrap().data, vec![0.5, 0.5]);
    }

    #[test]
    fn load_rejects_missing_and_resizes() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_control_image(dir.path().join("nope.ppm"), 4, 4).is_err());
        let mut img = ControlImage::blank(2, 2, 3);
        img.set(0, 0, 0, 1.0);
        let p = dir.path().join("c.ppm");
        img.save_ppm(&p).unwrap();
        let loaded = load_control_image(&p, 4, 4).unwrap();
        assert_eq!((loaded.width, loaded.height, loaded.channels), (4, 4, 3));
        assert_eq!(loaded.get(0, 0, 0), 1.0);
        assert_eq!(loaded.get(0, 3, 3), 0.0);
        std::fs::write(&p, b"P6\n0 0\n255\n").unwrap();
        assert!(load_control_image(&p, 4, 4).is_err());
    }
}
