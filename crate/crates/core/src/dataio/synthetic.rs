//! Seeded multi-factor face-like dataset.
//!
//! A face is a closed deformed ellipse. Landmarks are an open outline arc
//! along its lower part plus an inner ring of feature points that carry
//! depth. Identity bends the ellipse radially, pose is a yaw rotation,
//! expression opens the lower half of the inner ring, and illumination is
//! a horizontal gain ramp plus a bias.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::geometry::{remap_occluded_landmarks, FaceShape};
use crate::image::GrayImage;

const OUTLINE_A: f64 = 0.8;
const OUTLINE_B: f64 = 1.0;
const OUTLINE_FROM: f64 = -30.0;
const OUTLINE_TO: f64 = 210.0;
const INNER_A: f64 = 0.42;
const INNER_B: f64 = 0.4;
const INNER_CY: f64 = 0.1;
const HARMONICS: usize = 3;
const CONTOUR_SAMPLES: usize = 128;
const RADIUS_TABLE: usize = 720;
/// Yaw at and beyond which self-occluded inner points are remapped.
pub const OCCLUSION_YAW_DEG: f64 = 45.0;

/// Generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// `[I_i, I_p, I_l, I_e]`.
    pub extents: [usize; 4],
    pub num_points: usize,
    /// Side of the square images in pixels.
    pub image_size: usize,
    pub seed: u64,
    /// Amplitude of the per-identity radial harmonics.
    pub identity_sigma: f64,
    /// Poses are spread evenly over `[-yaw_range, yaw_range]` degrees.
    pub yaw_range_deg: f64,
    /// Vertical opening of the lower inner points per expression step, in
    /// face units.
    pub expression_amplitude: f64,
    /// Illumination gains are spread evenly over this range.
    pub gain_range: (f64, f64),
    /// Illumination biases are spread evenly over this range.
    pub bias_range: (f64, f64),
    /// Largest relative left-to-right intensity slope.
    pub ramp: f64,
    /// Depth of the inner points, in face units.
    pub depth: f64,
    /// Per-sample translation jitter as a fraction of the image side.
    pub placement_jitter: f64,
    /// Per-sample relative scale jitter.
    pub scale_jitter: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            extents: [60, 7, 5, 3],
            num_points: 24,
            image_size: 128,
            seed: 0,
            identity_sigma: 0.06,
            yaw_range_deg: 60.0,
            expression_amplitude: 0.08,
            gain_range: (0.75, 1.05),
            bias_range: (-0.05, 0.05),
            ramp: 0.4,
            depth: 0.3,
            placement_jitter: 0.03,
            scale_jitter: 0.05,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.extents.contains(&0) {
            return invalid(format!("extents must be positive, got {:?}", self.extents));
        }
        if self.num_points < 8 {
            return invalid(format!(
                "need at least 8 landmarks for outline and feature points, got {}",
                self.num_points
            ));
        }
        if self.image_size < 16 {
            return invalid(format!("image side must be at least 16, got {}", self.image_size));
        }
        if !(self.yaw_range_deg > -90.0 && self.yaw_range_deg <= 90.0) {
            return invalid(format!("yaw range {} outside (-90, 90]", self.yaw_range_deg));
        }
        let finite = [
            self.identity_sigma,
            self.expression_amplitude,
            self.gain_range.0,
            self.gain_range.1,
            self.bias_range.0,
            self.bias_range.1,
            self.ramp,
            self.depth,
            self.placement_jitter,
            self.scale_jitter,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return invalid("generator strengths must be finite");
        }
        if !(0.0..0.5).contains(&self.identity_sigma) || !(0.0..0.5).contains(&self.scale_jitter) {
            return invalid("identity and scale jitter must lie in [0, 0.5)");
        }
        Ok(())
    }

    /// Index of the pose closest to zero yaw.
    pub fn frontal_pose(&self) -> usize {
        (0..self.extents[1])
            .min_by(|&a, &b| self.yaw_deg(a).abs().total_cmp(&self.yaw_deg(b).abs()))
            .unwrap_or(0)
    }

    pub fn yaw_deg(&self, pose: usize) -> f64 {
        spread(-self.yaw_range_deg, self.yaw_range_deg, pose, self.extents[1])
    }

    pub fn num_outline(&self) -> usize {
        self.num_points / 2
    }
}

fn spread(lo: f64, hi: f64, k: usize, n: usize) -> f64 {
    if n == 1 {
        (lo + hi) / 2.0
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

/// Ground-truth factor values of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFactors {
    /// Cosine and sine harmonic coefficients, then the inner-ring scale.
    pub identity: Vec<f64>,
    pub yaw_deg: f64,
    /// Vertical opening applied to the lower inner points.
    pub expression: f64,
    pub gain: f64,
    pub ramp: f64,
    pub bias: f64,
    /// Image position of the face-frame origin.
    pub center: (f64, f64),
    /// Pixels per face unit.
    pub scale: f64,
}

/// One generated sample without its raster.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    /// `[i, p, l, e]`.
    pub cell: [usize; 4],
    /// Landmarks in image coordinates, occluded points remapped.
    pub shape: FaceShape,
    pub visible: Vec<bool>,
    pub factors: SyntheticFactors,
}

#[derive(Debug, Clone)]
struct Identity {
    cos: [f64; HARMONICS],
    sin: [f64; HARMONICS],
    inner_scale: f64,
}

impl Identity {
    fn radial(&self, psi: f64, sigma: f64) -> f64 {
        1.0 + sigma
            * (0..HARMONICS)
                .map(|k| {
                    let m = (k + 2) as f64;
                    self.cos[k] * (m * psi).cos() + self.sin[k] * (m * psi).sin()
                })
                .sum::<f64>()
    }

    fn deform(&self, (x, y): (f64, f64), sigma: f64) -> (f64, f64) {
        let f = self.radial(y.atan2(x), sigma);
        (f * x, f * y)
    }
}

/// Random-access generator: every sample is a pure function of the spec
/// and its cell.
#[derive(Debug, Clone)]
pub struct SyntheticGenerator {
    spec: SyntheticSpec,
    identities: Vec<Identity>,
}

impl SyntheticGenerator {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let identities = (0..spec.extents[0])
            .map(|i| {
                let mut rng = stream(spec.seed, 1 + i as u64);
                let mut draw = |k: usize| rng.random_range(-1.0..=1.0) / (k + 2) as f64;
                let cos = std::array::from_fn(&mut draw);
                let sin = std::array::from_fn(&mut draw);
                let inner_scale = 1.0 + spec.identity_sigma * rng.random_range(-1.0..=1.0);
                Identity { cos, sin, inner_scale }
            })
            .collect();
        Ok(Self { spec, identities })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    /// Landmark indices of the outline arc, in order.
    pub fn outline(&self) -> Vec<usize> {
        (0..self.spec.num_outline()).collect()
    }

    fn inner_angle(&self, k: usize) -> f64 {
        let n = self.spec.num_points - self.spec.num_outline();
        2.0 * PI * (k as f64 + 0.5) / n as f64
    }

    fn inner_where(&self, f: impl Fn(f64, f64) -> bool) -> Vec<usize> {
        let no = self.spec.num_outline();
        (no..self.spec.num_points)
            .filter(|&k| {
                let phi = self.inner_angle(k - no);
                f(phi.cos(), phi.sin())
            })
            .collect()
    }

    /// Upper inner points on the image-left side.
    pub fn left_eye(&self) -> Vec<usize> {
        self.inner_where(|c, s| c < 0.0 && s < 0.0)
    }

    /// Upper inner points on the image-right side.
    pub fn right_eye(&self) -> Vec<usize> {
        self.inner_where(|c, s| c > 0.0 && s < 0.0)
    }

    /// Lower inner points, which move with expression.
    pub fn mouth(&self) -> Vec<usize> {
        self.inner_where(|_, s| s > 0.0)
    }

    fn check_cell(&self, cell: [usize; 4]) -> Result<()> {
        if cell.iter().zip(&self.spec.extents).any(|(c, e)| c >= e) {
            return invalid(format!("cell {cell:?} outside extents {:?}", self.spec.extents));
        }
        Ok(())
    }

    /// Frontal face-frame landmarks of identity `i` with expression `e`.
    pub fn identity_expression_shape(&self, i: usize, e: usize) -> Result<FaceShape> {
        self.check_cell([i, 0, 0, e])?;
        let id = &self.identities[i];
        let sigma = self.spec.identity_sigma;
        let no = self.spec.num_outline();
        let mut pts = Vec::with_capacity(self.spec.num_points);
        for k in 0..no {
            let phi = spread(OUTLINE_FROM, OUTLINE_TO, k, no).to_radians();
            pts.push(id.deform((OUTLINE_A * phi.cos(), OUTLINE_B * phi.sin()), sigma));
        }
        let open = self.spec.expression_amplitude * e as f64;
        for k in 0..self.spec.num_points - no {
            let phi = self.inner_angle(k);
            let (s, c) = phi.sin_cos();
            let x = id.inner_scale * INNER_A * c;
            let mut y = INNER_CY + id.inner_scale * INNER_B * s;
            if s > 0.0 {
                y += open * s;
            }
            pts.push((x, y));
        }
        FaceShape::from_points(&pts)
    }

    /// Face-frame landmarks after yaw, before occlusion handling and image
    /// placement.
    pub fn face_frame_shape(&self, i: usize, p: usize, e: usize) -> Result<FaceShape> {
        self.check_cell([i, p, 0, e])?;
        let base = self.identity_expression_shape(i, e)?;
        let yaw = self.spec.yaw_deg(p).to_radians();
        let (s, c) = yaw.sin_cos();
        let no = self.spec.num_outline();
        let pts: Vec<(f64, f64)> = base
            .points()
            .enumerate()
            .map(|(k, (x, y))| {
                let d = if k < no { 0.0 } else { self.spec.depth };
                (x * c + d * s, y)
            })
            .collect();
        FaceShape::from_points(&pts)
    }

    fn placement(&self, cell: [usize; 4]) -> ((f64, f64), f64) {
        let e = self.spec.extents;
        let index = ((cell[0] * e[1] + cell[1]) * e[2] + cell[2]) * e[3] + cell[3];
        let mut rng = stream(self.spec.seed, 1 << 40 | index as u64);
        let w = self.spec.image_size as f64;
        let j = self.spec.placement_jitter * w;
        let mut jit = |r: f64| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        let cx = w / 2.0 + jit(j);
        let cy = w / 2.0 + jit(j);
        let scale = 0.34 * w * (1.0 + jit(self.spec.scale_jitter));
        ((cx, cy), scale)
    }

    fn illumination(&self, l: usize) -> (f64, f64, f64) {
        let n = self.spec.extents[2];
        let (g0, g1) = self.spec.gain_range;
        let (b0, b1) = self.spec.bias_range;
        (
            spread(g0, g1, l, n),
            spread(-self.spec.ramp, self.spec.ramp, l, n),
            spread(b0, b1, l, n),
        )
    }

    /// Landmarks, visibility and factors of one cell.
    pub fn sample(&self, cell: [usize; 4]) -> Result<SyntheticSample> {
        self.check_cell(cell)?;
        let [i, p, l, e] = cell;
        let frame = self.face_frame_shape(i, p, e)?;
        let ((cx, cy), scale) = self.placement(cell);
        let pts: Vec<(f64, f64)> = frame.points().map(|(x, y)| (cx + scale * x, cy + scale * y)).collect();
        let placed = FaceShape::from_points(&pts)?;
        let outline = self.outline();
        let yaw = self.spec.yaw_deg(p);
        let mut visible = vec![true; self.spec.num_points];
        if yaw.abs() >= OCCLUSION_YAW_DEG {
            let poly: Vec<(f64, f64)> = outline.iter().map(|&k| placed.point(k)).collect();
            for (k, v) in visible.iter_mut().enumerate().skip(outline.len()) {
                *v = inside_horizontally(&poly, placed.point(k));
            }
        }
        let shape = if visible.iter().all(|&v| v) {
            placed
        } else {
            remap_occluded_landmarks(&placed, &visible, &outline)?
        };
        let id = &self.identities[i];
        let mut identity: Vec<f64> = id.cos.iter().chain(&id.sin).copied().collect();
        identity.push(id.inner_scale);
        let (gain, ramp, bias) = self.illumination(l);
        Ok(SyntheticSample {
            cell,
            shape,
            visible,
            factors: SyntheticFactors {
                identity,
                yaw_deg: yaw,
                expression: self.spec.expression_amplitude * e as f64,
                gain,
                ramp,
                bias,
                center: (cx, cy),
                scale,
            },
        })
    }

    /// 8-bit quantized raster of `sample`.
    pub fn render(&self, sample: &SyntheticSample) -> Result<GrayImage> {
        let [i, p, _, _] = sample.cell;
        let f = &sample.factors;
        let radius = self.radius_table(i, p);
        let w = self.spec.image_size;
        let blob_sigma = 0.06 * f.scale;
        let blobs: Vec<(f64, f64)> = (self.spec.num_outline()..self.spec.num_points)
            .filter(|&k| sample.visible[k])
            .map(|k| sample.shape.point(k))
            .collect();
        let img = GrayImage::from_fn(w, w, |px, py| {
            let (x, y) = (px as f64, py as f64);
            let (u, v) = ((x - f.center.0) / f.scale, (y - f.center.1) / f.scale);
            let sd = (u.hypot(v) - lookup(&radius, v.atan2(u))) * f.scale;
            let inside = 1.0 / (1.0 + (sd / 1.5).exp());
            let skin = 0.75 - 0.1 * v;
            let mut base = 0.15 + (skin - 0.15) * inside;
            for &(bx, by) in &blobs {
                let d2 = (x - bx).powi(2) + (y - by).powi(2);
                if d2 < 16.0 * blob_sigma * blob_sigma {
                    base -= 0.35 * (-d2 / (2.0 * blob_sigma * blob_sigma)).exp();
                }
            }
            let ramp = 1.0 + f.ramp * (2.0 * x / w as f64 - 1.0);
            (base * f.gain * ramp + f.bias).clamp(0.0, 1.0) as f32
        })?;
        Ok(img.quantize())
    }

    /// Landmarks and raster of one cell.
    pub fn generate_cell(&self, cell: [usize; 4]) -> Result<(SyntheticSample, GrayImage)> {
        let s = self.sample(cell)?;
        let img = self.render(&s)?;
        Ok((s, img))
    }

    /// Radius of the face contour of identity `i` at pose `p` over evenly
    /// spaced polar angles.
    fn radius_table(&self, i: usize, p: usize) -> Vec<f64> {
        let id = &self.identities[i];
        let c = self.spec.yaw_deg(p).to_radians().cos();
        let contour: Vec<(f64, f64)> = (0..CONTOUR_SAMPLES)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / CONTOUR_SAMPLES as f64;
                let (x, y) = id.deform((OUTLINE_A * phi.cos(), OUTLINE_B * phi.sin()), self.spec.identity_sigma);
                (x * c, y)
            })
            .collect();
        (0..RADIUS_TABLE)
            .map(|k| {
                let psi = 2.0 * PI * k as f64 / RADIUS_TABLE as f64 - PI;
                ray_hit(&contour, psi)
            })
            .collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Largest distance along direction `psi` from the origin at which the ray
/// meets the closed polygon.
fn ray_hit(poly: &[(f64, f64)], psi: f64) -> f64 {
    let (dy, dx) = psi.sin_cos();
    let mut best: f64 = 0.0;
    for k in 0..poly.len() {
        let (x0, y0) = poly[k];
        let (x1, y1) = poly[(k + 1) % poly.len()];
        let (ex, ey) = (x1 - x0, y1 - y0);
        let den = dx * ey - dy * ex;
        if den.abs() < 1e-15 {
            continue;
        }
        let t = (x0 * ey - y0 * ex) / den;
        let u = (x0 * dy - y0 * dx) / den;
        if t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            best = best.max(t);
        }
    }
    best
}

fn lookup(table: &[f64], psi: f64) -> f64 {
    let n = table.len();
    let pos = (psi + PI) / (2.0 * PI) * n as f64;
    let k = pos.floor();
    let frac = pos - k;
    let k0 = (k as i64).rem_euclid(n as i64) as usize;
    let k1 = (k0 + 1) % n;
    table[k0] * (1.0 - frac) + table[k1] * frac
}

/// Whether `pt` lies between the outermost crossings of its horizontal
/// line with the open polyline. Without crossings it is compared with the
/// polyline's horizontal extent.
fn inside_horizontally(poly: &[(f64, f64)], (x, y): (f64, f64)) -> bool {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for w in poly.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y < y0.min(y1) || y > y0.max(y1) {
            continue;
        }
        let xi = if y1 == y0 { x0 } else { x0 + (y - y0) / (y1 - y0) * (x1 - x0) };
        lo = lo.min(xi);
        hi = hi.max(xi);
    }
    if lo > hi {
        lo = poly.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        hi = poly.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    }
    (lo..=hi).contains(&x)
}

/// A fully generated dataset held in memory.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub spec: SyntheticSpec,
    pub frontal: usize,
    pub outline: Vec<usize>,
    pub left_eye: Vec<usize>,
    pub right_eye: Vec<usize>,
    /// Samples in cell order with the expression index fastest.
    pub samples: Vec<SyntheticSample>,
    pub images: Vec<GrayImage>,
}

/// Generates every cell of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    let g = SyntheticGenerator::new(spec.clone())?;
    let mut samples = Vec::new();
    let mut images = Vec::new();
    for cell in crate::model::grid_cells(spec.extents) {
        let (s, img) = g.generate_cell(cell)?;
        samples.push(s);
        images.push(img);
    }
    Ok(SyntheticDataset {
        spec: spec.clone(),
        frontal: spec.frontal_pose(),
        outline: g.outline(),
        left_eye: g.left_eye(),
        right_eye: g.right_eye(),
        samples,
        images,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_polyline_distance;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            extents: [3, 5, 2, 2],
            image_size: 64,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn validation() {
        let bad = |f: fn(&mut SyntheticSpec)| {
            let mut s = small();
            f(&mut s);
            SyntheticGenerator::new(s).is_err()
        };
        assert!(bad(|s| s.num_points = 7));
        assert!(bad(|s| s.extents[2] = 0));
        assert!(bad(|s| s.yaw_range_deg = 95.0));
        assert!(bad(|s| s.yaw_range_deg = -90.0));
        assert!(!bad(|s| s.yaw_range_deg = 90.0));
        assert!(SyntheticGenerator::new(small()).unwrap().sample([3, 0, 0, 0]).is_err());
    }

    #[test]
    fn landmark_sets() {
        let g = SyntheticGenerator::new(SyntheticSpec::default()).unwrap();
        assert_eq!(g.outline(), (0..12).collect::<Vec<_>>());
        assert_eq!(g.left_eye(), vec![18, 19, 20]);
        assert_eq!(g.right_eye(), vec![21, 22, 23]);
        assert_eq!(g.mouth(), (12..18).collect::<Vec<_>>());
        let g8 = SyntheticGenerator::new(SyntheticSpec {
            num_points: 8,
            ..small()
        })
        .unwrap();
        assert!(!g8.left_eye().is_empty() && !g8.right_eye().is_empty());
    }

    #[test]
    fn zero_yaw_is_identity_plus_expression() {
        let g = SyntheticGenerator::new(small()).unwrap();
        let p = g.spec().frontal_pose();
        assert_eq!(g.spec().yaw_deg(p), 0.0);
        for i in 0..3 {
            for e in 0..2 {
                assert_eq!(
                    g.face_frame_shape(i, p, e).unwrap(),
                    g.identity_expression_shape(i, e).unwrap()
                );
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.images, b.images);
        let c = generate_synthetic(&SyntheticSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.samples[0].shape, c.samples[0].shape);
    }

    #[test]
    fn remapped_points_lie_on_outline() {
        let g = SyntheticGenerator::new(small()).unwrap();
        let mut remapped = 0;
        for cell in crate::model::grid_cells(small().extents) {
            let s = g.sample(cell).unwrap();
            assert_eq!(s.shape.num_points(), 24);
            let poly: Vec<(f64, f64)> = g.outline().iter().map(|&k| s.shape.point(k)).collect();
            for (k, &v) in s.visible.iter().enumerate() {
                if !v {
                    remapped += 1;
                    assert!(point_polyline_distance(s.shape.point(k), &poly) < 1e-6);
                }
            }
            if s.factors.yaw_deg.abs() < OCCLUSION_YAW_DEG {
                assert!(s.visible.iter().all(|&v| v));
            }
        }
        assert!(remapped > 0);
    }

    #[test]
    fn image_is_quantized_and_darker_at_features() {
        let g = SyntheticGenerator::new(small()).unwrap();
        let (s, img) = g.generate_cell([0, 2, 0, 0]).unwrap();
        assert!(img.pixels().iter().all(|&v| (v * 255.0 - (v * 255.0).round()).abs() < 1e-4));
        let (x, y) = s.shape.point(g.left_eye()[0]);
        let (cx, cy) = s.factors.center;
        let feature = img.get(x.round() as usize, y.round() as usize);
        let cheek = img.get(cx.round() as usize, (cy + 0.1 * s.factors.scale).round() as usize);
        assert!(feature < cheek - 0.1, "{feature} {cheek}");
    }
}
