use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canvas margin, arrow length and circle radius ranges as fractions of the
/// resolution. The margin is 2 px at the smallest supported resolution.
pub const MIN_RESOLUTION: usize = 32;
pub const MARGIN: f64 = 2.0 / MIN_RESOLUTION as f64;
pub const ARROW_LENGTH: (f64, f64) = (0.15, 0.4);
pub const CIRCLE_RADIUS: (f64, f64) = (0.05, 0.12);
pub const WING_ANGLE_DEG: f64 = 30.0;
pub const WING_FRACTION: f64 = 0.25;
/// Minimum gap between the circle and any arrow segment.
pub const CLEARANCE: f64 = MARGIN;
pub const MAX_ATTEMPTS: usize = 10_000;

pub type Point = [f64; 2];

/// An arrow and a circle in pixel coordinates (x to the right, y down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrowScene {
    pub resolution: usize,
    pub tail: Point,
    pub tip: Point,
    pub wing_length: f64,
    pub wing_angle: f64,
    pub center: Point,
    pub radius: f64,
    pub label: bool,
}

impl ArrowScene {
    /// End points of the two head wings.
    pub fn wings(&self) -> [Point; 2] {
        let back = (self.tail[1] - self.tip[1]).atan2(self.tail[0] - self.tip[0]);
        [back + self.wing_angle, back - self.wing_angle]
            .map(|a| [self.tip[0] + self.wing_length * a.cos(), self.tip[1] + self.wing_length * a.sin()])
    }

    pub fn segments(&self) -> [(Point, Point); 3] {
        let [a, b] = self.wings();
        [(self.tail, self.tip), (self.tip, a), (self.tip, b)]
    }

    /// Same geometry at another resolution.
    pub fn rescaled(&self, resolution: usize) -> ArrowScene {
        let s = resolution as f64 / self.resolution as f64;
        let p = |q: Point| [q[0] * s, q[1] * s];
        ArrowScene {
            resolution,
            tail: p(self.tail),
            tip: p(self.tip),
            wing_length: self.wing_length * s,
            center: p(self.center),
            radius: self.radius * s,
            ..self.clone()
        }
    }
}

/// Exact test: does the ray from `origin` along `toward - origin` meet the
/// closed disk? Solves `|o + t d - c|² = r²` and accepts a real root `t > 0`.
pub fn ray_hits_disk(origin: Point, toward: Point, center: Point, radius: f64) -> bool {
    let d = sub(toward, origin);
    let len = norm(d);
    let d = [d[0] / len, d[1] / len];
    let oc = sub(origin, center);
    let b = dot(d, oc);
    let c = dot(oc, oc) - radius * radius;
    let disc = b * b - c;
    disc >= 0.0 && -b + disc.sqrt() > 0.0
}

/// Marches the same ray in steps of `step` until it leaves `[0, extent]²`.
pub fn ray_march_hits(origin: Point, toward: Point, center: Point, radius: f64, extent: f64, step: f64) -> bool {
    let d = sub(toward, origin);
    let len = norm(d);
    let d = [d[0] / len, d[1] / len];
    let inside = |p: Point| (-1.0..=extent + 1.0).contains(&p[0]) && (-1.0..=extent + 1.0).contains(&p[1]);
    let mut t = step;
    loop {
        let p = [origin[0] + t * d[0], origin[1] + t * d[1]];
        if !inside(p) {
            return false;
        }
        if norm(sub(p, center)) <= radius {
            return true;
        }
        t += step;
    }
}

pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let t = (dot(sub(p, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

/// Rejection-samples a scene whose exact label equals `label`.
pub fn sample_scene(rng: &mut impl Rng, resolution: usize, label: bool) -> Result<ArrowScene> {
    sample_with(rng, resolution, label, |_| true)
}

/// [`sample_scene`] with an extra placement constraint, checked on the unit canvas.
pub fn sample_with(
    rng: &mut impl Rng,
    resolution: usize,
    label: bool,
    accept: impl Fn(&ArrowScene) -> bool,
) -> Result<ArrowScene> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Range(format!("resolution {resolution} is below {MIN_RESOLUTION}")));
    }
    for _ in 0..MAX_ATTEMPTS {
        if let Some(scene) = propose(rng) {
            if scene.label == label && accept(&scene) {
                return Ok(scene.rescaled(resolution));
            }
        }
    }
    Err(Error::RejectionLimit { attempts: MAX_ATTEMPTS })
}

/// One candidate on the unit canvas, or `None` if placement fails.
fn propose(rng: &mut impl Rng) -> Option<ArrowScene> {
    let lo = MARGIN;
    let hi = 1.0 - MARGIN;
    let length = rng.gen_range(ARROW_LENGTH.0..=ARROW_LENGTH.1);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let tail = [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)];
    let tip = [tail[0] + length * angle.cos(), tail[1] + length * angle.sin()];
    let radius = rng.gen_range(CIRCLE_RADIUS.0..=CIRCLE_RADIUS.1);
    let center = [rng.gen_range(lo + radius..=hi - radius), rng.gen_range(lo + radius..=hi - radius)];
    let mut scene = ArrowScene {
        resolution: 1,
        tail,
        tip,
        wing_length: WING_FRACTION * length,
        wing_angle: WING_ANGLE_DEG.to_radians(),
        center,
        radius,
        label: false,
    };
    let in_canvas = |p: Point| (lo..=hi).contains(&p[0]) && (lo..=hi).contains(&p[1]);
    let [w0, w1] = scene.wings();
    if ![tip, w0, w1].into_iter().all(in_canvas) {
        return None;
    }
    if scene.segments().iter().any(|&(a, b)| segment_distance(center, a, b) <= radius + CLEARANCE) {
        return None;
    }
    scene.label = ray_hits_disk(tail, tip, center, radius);
    Some(scene)
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn straight_at_center_hits() {
        assert!(ray_hits_disk([10.0, 50.0], [30.0, 50.0], [70.0, 50.0], 5.0));
        assert!(!ray_hits_disk([30.0, 50.0], [10.0, 50.0], [70.0, 50.0], 5.0));
    }

    #[test]
    fn tangent_counts_as_hit() {
        assert!(ray_hits_disk([0.0, 5.0], [1.0, 5.0], [10.0, 0.0], 5.0));
        assert!(!ray_hits_disk([0.0, 5.0 + 1e-9], [1.0, 5.0 + 1e-9], [10.0, 0.0], 5.0));
    }

    #[test]
    fn sampled_scenes_respect_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..200 {
            let res = 64;
            let s = sample_scene(&mut rng, res, i % 2 == 0).unwrap();
            assert_eq!(s.label, i % 2 == 0);
            let (lo, hi) = (MARGIN * res as f64, (1.0 - MARGIN) * res as f64);
            let [a, b] = s.wings();
            for p in [s.tail, s.tip, a, b] {
                assert!(p[0] >= lo - 1e-9 && p[0] <= hi + 1e-9 && p[1] >= lo - 1e-9 && p[1] <= hi + 1e-9);
            }
            assert!(s.center[0] - s.radius >= lo - 1e-9 && s.center[0] + s.radius <= hi + 1e-9);
            for (p, q) in s.segments() {
                assert!(segment_distance(s.center, p, q) > s.radius);
            }
        }
    }

    #[test]
    fn small_resolution_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_scene(&mut rng, 16, true), Err(Error::Range(_))));
    }
}
