use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Image tensor stored `H×W×C`, row-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    /// Grayscale image from 8-bit pixels, mapped so that ink is 1 and the
    /// white background is 0.
    pub fn from_gray(size: usize, pixels: &[u8]) -> Self {
        Image { height: size, width: size, channels: 1, data: pixels.iter().map(|&p| 1.0 - p as f64 / 255.0).collect() }
    }
}

/// Token matrix of a patch grid: one row per patch in row-major grid order,
/// each row the patch's pixels (row, column, channel).
pub fn patchify(img: &Image, patch: usize) -> Result<Mat> {
    if patch == 0 || !img.height.is_multiple_of(patch) || !img.width.is_multiple_of(patch) {
        return Err(Error::Shape(format!("{}x{} image is not divisible by patch {patch}", img.width, img.height)));
    }
    if img.data.len() != img.height * img.width * img.channels {
        return Err(Error::Shape("image buffer does not match its dimensions".into()));
    }
    let (gx, gy, c) = (img.width / patch, img.height / patch, img.channels);
    Ok(Mat::from_fn(gx * gy, patch * patch * c, |n, j| {
        let (px, py) = (n % gx, n / gx);
        let (dy, rest) = (j / (patch * c), j % (patch * c));
        let (dx, ch) = (rest / c, rest % c);
        img.data[((py * patch + dy) * img.width + px * patch + dx) * c + ch]
    }))
}

/// Indices of the four corner tokens of a `width × height` grid.
pub fn corner_indices(width: usize, height: usize) -> [usize; 4] {
    [0, width - 1, (height - 1) * width, height * width - 1]
}

/// Mean of the four corner tokens.
pub fn pool_corners(tokens: &Mat, width: usize, height: usize) -> Result<Vec<f64>> {
    if width < 2 || height < 2 || tokens.rows() != width * height {
        return Err(Error::Shape(format!("corner pooling needs a grid of at least 2x2, got {width}x{height}")));
    }
    let mut out = vec![0.0; tokens.cols()];
    for n in corner_indices(width, height) {
        for (o, v) in out.iter_mut().zip(tokens.row(n)) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= 4.0);
    Ok(out)
}
