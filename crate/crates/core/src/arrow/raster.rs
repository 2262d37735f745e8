use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::scene::{ArrowScene, Point};

pub const WHITE: u8 = 255;
pub const BLACK: u8 = 0;

/// Square 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    pub size: usize,
    pub pixels: Vec<u8>,
}

impl Canvas {
    pub fn blank(size: usize) -> Self {
        Canvas { size, pixels: vec![WHITE; size * size] }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.size + x]
    }

    /// Sets a pixel; coordinates off the canvas are ignored.
    pub fn plot(&mut self, x: i64, y: i64) {
        if x >= 0 && y >= 0 && (x as usize) < self.size && (y as usize) < self.size {
            self.pixels[y as usize * self.size + x as usize] = BLACK;
        }
    }

    /// Bresenham segment, thickened by one pixel along the minor axis.
    pub fn segment(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64)) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let x_major = dx >= -dy;
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.plot(x, y);
            if x_major {
                self.plot(x, y + 1);
            } else {
                self.plot(x + 1, y);
            }
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Midpoint circle outline.
    pub fn circle(&mut self, (cx, cy): (i64, i64), r: i64) {
        if r <= 0 {
            self.plot(cx, cy);
            return;
        }
        let (mut x, mut y, mut d) = (r, 0, 1 - r);
        while x >= y {
            for (px, py) in [(x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)] {
                self.plot(cx + px, cy + py);
            }
            y += 1;
            if d < 0 {
                d += 2 * y + 1;
            } else {
                x -= 1;
                d += 2 * (y - x) + 1;
            }
        }
    }

    /// Two concentric outlines at radii `r` and `r - 1`.
    pub fn ring(&mut self, c: (i64, i64), r: i64) {
        self.circle(c, r);
        self.circle(c, r - 1);
    }

    /// Binary PGM (`P5`, maxval 255).
    pub fn write_pgm(&self, mut out: impl Write) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.size, self.size)?;
        out.write_all(&self.pixels)?;
        Ok(())
    }

    /// Reads a square binary PGM with maxval 255.
    pub fn read_pgm(mut input: impl BufRead) -> Result<Canvas> {
        let mut header = Vec::new();
        let mut fields = Vec::new();
        while fields.len() < 4 {
            header.clear();
            if input.read_until(b'\n', &mut header)? == 0 {
                return Err(Error::Dataset("truncated PGM header".into()));
            }
            let line = String::from_utf8_lossy(&header);
            let line = line.split('#').next().unwrap_or("");
            fields.extend(line.split_whitespace().map(str::to_owned));
        }
        let num = |i: usize| fields[i].parse::<usize>().map_err(|_| Error::Dataset(format!("bad PGM field {:?}", fields[i])));
        if fields[0] != "P5" || num(3)? != 255 {
            return Err(Error::Dataset("expected P5 with maxval 255".into()));
        }
        let (w, h) = (num(1)?, num(2)?);
        if w != h {
            return Err(Error::Dataset(format!("expected a square image, got {w}x{h}")));
        }
        let mut pixels = vec![0u8; w * h];
        input.read_exact(&mut pixels).map_err(|_| Error::Dataset("truncated PGM payload".into()))?;
        Ok(Canvas { size: w, pixels })
    }
}

fn pixel(p: Point) -> (i64, i64) {
    (p[0].floor() as i64, p[1].floor() as i64)
}

pub fn rasterize(scene: &ArrowScene) -> Canvas {
    let mut c = Canvas::blank(scene.resolution);
    for (a, b) in scene.segments() {
        c.segment(pixel(a), pixel(b));
    }
    c.ring(pixel(scene.center), scene.radius.round() as i64);
    c
}
