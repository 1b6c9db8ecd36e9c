//! Class taxonomy, semantic rasters, segment extraction and front/back
//! categorisation of grass pixels.

use crate::geometry::{normalize_angle, Vec2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SemanticsError {
    #[error("front direction vector is zero")]
    ZeroFrontVector,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid noise model: {0}")]
    InvalidNoiseModel(String),
    #[error("raster parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Roof,
    PavedArea,
    Grass,
    Vegetation,
    Fence,
    Car,
    Tree,
    Unknown,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 8] = [
        ClassLabel::Roof,
        ClassLabel::PavedArea,
        ClassLabel::Grass,
        ClassLabel::Vegetation,
        ClassLabel::Fence,
        ClassLabel::Car,
        ClassLabel::Tree,
        ClassLabel::Unknown,
    ];

    /// Vegetation, fences, cars and trees are all treated as obstacles.
    pub fn is_obstacle(self) -> bool {
        matches!(
            self,
            ClassLabel::Vegetation | ClassLabel::Fence | ClassLabel::Car | ClassLabel::Tree
        )
    }

    /// Roof or obstacle: anything a descending drone has to keep clear of.
    pub fn is_blocking(self) -> bool {
        self == ClassLabel::Roof || self.is_obstacle()
    }

    pub fn code(self) -> char {
        match self {
            ClassLabel::Roof => 'R',
            ClassLabel::PavedArea => 'P',
            ClassLabel::Grass => 'G',
            ClassLabel::Vegetation => 'V',
            ClassLabel::Fence => 'F',
            ClassLabel::Car => 'C',
            ClassLabel::Tree => 'T',
            ClassLabel::Unknown => 'U',
        }
    }

    pub fn from_code(c: char) -> Option<ClassLabel> {
        ClassLabel::ALL.into_iter().find(|l| l.code() == c)
    }
}

/// Integer pixel coordinate: `x` is the column (rightward), `y` the row (downward).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn as_point(self) -> Vec2 {
        Vec2::new(self.x as f64, self.y as f64)
    }
}

/// Row-major class raster with a ground resolution in metres per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticGrid {
    width: usize,
    height: usize,
    resolution: f64,
    labels: Vec<ClassLabel>,
}

impl SemanticGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        labels: Vec<ClassLabel>,
    ) -> Result<Self, SemanticsError> {
        if width == 0 || height == 0 {
            return Err(SemanticsError::InvalidGrid("empty raster".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(SemanticsError::InvalidGrid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if labels.len() != width * height {
            return Err(SemanticsError::InvalidGrid(format!(
                "expected {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, resolution: f64, label: ClassLabel) -> Self {
        Self::new(width, height, resolution, vec![label; width * height])
            .expect("filled grid dimensions must be valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn get(&self, p: Pixel) -> ClassLabel {
        self.labels[p.y * self.width + p.x]
    }

    pub fn set(&mut self, p: Pixel, label: ClassLabel) {
        self.labels[p.y * self.width + p.x] = label;
    }

    /// Fill the half-open pixel rectangle `[x0, x1) x [y0, y1)`, clipped to the raster.
    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, label: ClassLabel) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.labels[y * self.width + x] = label;
            }
        }
    }

    /// The drone sits at the image centre, `(W/2, H/2)`.
    pub fn drone_pixel(&self) -> Vec2 {
        Vec2::new(self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn center_pixel(&self) -> Pixel {
        Pixel::new(self.width / 2, self.height / 2)
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Pixel::new(x, y)))
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Quarter-turn rotation `(x, y) -> (H - 1 - y, x)`.
    pub fn rotated_quarter(&self) -> SemanticGrid {
        let (w, h) = (self.width, self.height);
        let mut labels = vec![ClassLabel::Unknown; w * h];
        for y in 0..h {
            for x in 0..w {
                let (nx, ny) = (h - 1 - y, x);
                labels[ny * h + nx] = self.labels[y * w + x];
            }
        }
        SemanticGrid {
            width: h,
            height: w,
            resolution: self.resolution,
            labels,
        }
    }

    /// Portable ASCII form: `W H resolution` header then one code letter per pixel.
    pub fn to_ascii(&self) -> String {
        let mut s = format!("{} {} {}\n", self.width, self.height, self.resolution);
        for row in self.labels.chunks(self.width) {
            s.extend(row.iter().map(|l| l.code()));
            s.push('\n');
        }
        s
    }

    pub fn from_ascii(text: &str) -> Result<Self, SemanticsError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(SemanticsError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let parse_err = |line: usize, message: String| SemanticsError::Parse {
            line: line + 1,
            message,
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(hline, "header must be `W H resolution`".into()));
        }
        let width: usize = fields[0]
            .parse()
            .map_err(|e| parse_err(hline, format!("width: {e}")))?;
        let height: usize = fields[1]
            .parse()
            .map_err(|e| parse_err(hline, format!("height: {e}")))?;
        let resolution: f64 = fields[2]
            .parse()
            .map_err(|e| parse_err(hline, format!("resolution: {e}")))?;
        let mut labels = Vec::with_capacity(width * height);
        let mut rows = 0;
        for (i, line) in lines {
            let line = line.trim_end();
            if line.chars().count() != width {
                return Err(parse_err(i, format!("expected {width} codes")));
            }
            for c in line.chars() {
                labels.push(
                    ClassLabel::from_code(c)
                        .ok_or_else(|| parse_err(i, format!("unknown class code {c:?}")))?,
                );
            }
            rows += 1;
        }
        if rows != height {
            return Err(SemanticsError::Parse {
                line: rows + 2,
                message: format!("expected {height} rows, got {rows}"),
            });
        }
        SemanticGrid::new(width, height, resolution, labels)
    }
}

impl fmt::Display for SemanticGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii())
    }
}

impl FromStr for SemanticGrid {
    type Err = SemanticsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SemanticGrid::from_ascii(s)
    }
}

/// A maximal 4-connected run of pixels sharing one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub class: ClassLabel,
    /// Member pixels in raster order.
    pub pixels: Vec<Pixel>,
    pub centroid: Vec2,
    pub touches_image_boundary: bool,
}

impl Segment {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Inclusive bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Pixel, Pixel) {
        let mut lo = Pixel::new(usize::MAX, usize::MAX);
        let mut hi = Pixel::new(0, 0);
        for p in &self.pixels {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn contains(&self, p: Pixel) -> bool {
        self.pixels.binary_search_by(|q| (q.y, q.x).cmp(&(p.y, p.x))).is_ok()
    }
}

/// Partition every pixel of `class` into 4-connected segments.
///
/// Segments are ordered by their first pixel in raster order.
pub fn connected_components(grid: &SemanticGrid, class: ClassLabel) -> Vec<Segment> {
    let (w, h) = (grid.width, grid.height);
    let mut seen = vec![false; w * h];
    let mut segments = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || grid.labels[start] != class {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if !seen[j] && grid.labels[j] == class {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        members.sort_unstable();
        let n = members.len() as f64;
        let (mut sx, mut sy) = (0.0, 0.0);
        let mut boundary = false;
        let pixels: Vec<Pixel> = members
            .iter()
            .map(|&i| {
                let p = Pixel::new(i % w, i / w);
                sx += p.x as f64;
                sy += p.y as f64;
                boundary |= p.x == 0 || p.y == 0 || p.x + 1 == w || p.y + 1 == h;
                p
            })
            .collect();
        segments.push(Segment {
            class,
            pixels,
            centroid: Vec2::new(sx / n, sy / n),
            touches_image_boundary: boundary,
        });
    }
    segments
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YardLabel {
    Front,
    Back,
    NotGrass,
}

/// Per-pixel front/back attribution of grass pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontBackMask {
    width: usize,
    height: usize,
    labels: Vec<YardLabel>,
}

impl FrontBackMask {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, p: Pixel) -> YardLabel {
        self.labels[p.y * self.width + p.x]
    }

    pub fn labels(&self) -> &[YardLabel] {
        &self.labels
    }
}

/// Front/back side of `point` relative to a house centred at `c_roof` whose
/// front faces `v_front`. The angle difference is wrapped into `(-pi, pi]`
/// and the closed interval `[-pi/2, pi/2]` counts as front.
pub fn yard_side(point: Vec2, c_roof: Vec2, v_front: Vec2) -> YardLabel {
    let theta = normalize_angle((point - c_roof).angle() - v_front.angle());
    if (-FRAC_PI_2..=FRAC_PI_2).contains(&theta) {
        YardLabel::Front
    } else {
        YardLabel::Back
    }
}

/// Label every grass pixel as front or back yard by its bearing from the roof
/// centroid relative to the house front direction.
pub fn classify_grass_front_back(
    grid: &SemanticGrid,
    c_roof: Vec2,
    v_front: Vec2,
) -> Result<FrontBackMask, SemanticsError> {
    if v_front.normalized().is_none() {
        return Err(SemanticsError::ZeroFrontVector);
    }
    let labels = grid
        .pixels()
        .map(|p| {
            if grid.get(p) == ClassLabel::Grass {
                yard_side(p.as_point(), c_roof, v_front)
            } else {
                YardLabel::NotGrass
            }
        })
        .collect();
    Ok(FrontBackMask {
        width: grid.width,
        height: grid.height,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Confusion {
    pub from: ClassLabel,
    pub to: ClassLabel,
    pub probability: f64,
}

/// Blob-structured stand-in for an imperfect segmentation network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelNoiseModel {
    pub confusions: Vec<Confusion>,
    pub blob_size: usize,
    pub seed: u64,
}

impl LabelNoiseModel {
    /// Confusions loosely following the failure modes seen on aerial imagery:
    /// shadowed roof read as pavement, trees and grass swapped.
    pub fn typical(seed: u64) -> Self {
        let c = |from, to, probability| Confusion {
            from,
            to,
            probability,
        };
        Self {
            confusions: vec![
                c(ClassLabel::Roof, ClassLabel::PavedArea, 0.03),
                c(ClassLabel::Tree, ClassLabel::Grass, 0.10),
                c(ClassLabel::Grass, ClassLabel::Tree, 0.01),
                c(ClassLabel::Vegetation, ClassLabel::Grass, 0.05),
            ],
            blob_size: 12,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SemanticsError> {
        if self.blob_size == 0 {
            return Err(SemanticsError::InvalidNoiseModel("blob size must be >= 1".into()));
        }
        for c in &self.confusions {
            if !(0.0..=1.0).contains(&c.probability) {
                return Err(SemanticsError::InvalidNoiseModel(format!(
                    "probability {} for {:?}->{:?} outside [0,1]",
                    c.probability, c.from, c.to
                )));
            }
        }
        for from in ClassLabel::ALL {
            let row: f64 = self
                .confusions
                .iter()
                .filter(|c| c.from == from)
                .map(|c| c.probability)
                .sum();
            if row > 1.0 + 1e-12 {
                return Err(SemanticsError::InvalidNoiseModel(format!(
                    "flip probabilities out of {from:?} sum to {row} > 1"
                )));
            }
        }
        Ok(())
    }
}

/// Seeded blob corruption of a semantic grid.
///
/// For each confusion `from -> to` a binomial count of the original `from`
/// pixels is relabelled, grown as 4-connected blobs of up to `blob_size`
/// pixels around randomly chosen seeds.
pub fn apply_label_noise(
    grid: &SemanticGrid,
    model: &LabelNoiseModel,
) -> Result<SemanticGrid, SemanticsError> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let (w, h) = (grid.width, grid.height);
    let mut out = grid.clone();
    let mut flipped = vec![false; w * h];
    let mut queue = VecDeque::new();

    for conf in &model.confusions {
        if conf.probability == 0.0 || conf.from == conf.to {
            continue;
        }
        let mut candidates: Vec<usize> =
            (0..w * h).filter(|&i| grid.labels[i] == conf.from).collect();
        if candidates.is_empty() {
            continue;
        }
        let binom = Binomial::new(candidates.len() as u64, conf.probability)
            .map_err(|e| SemanticsError::InvalidNoiseModel(e.to_string()))?;
        let target = binom.sample(&mut rng) as usize;
        candidates.shuffle(&mut rng);
        let mut done = 0;
        for &seed in &candidates {
            if done >= target {
                break;
            }
            if flipped[seed] {
                continue;
            }
            let limit = model.blob_size.min(target - done);
            let mut grown = 0;
            queue.clear();
            queue.push_back(seed);
            flipped[seed] = true;
            while let Some(i) = queue.pop_front() {
                out.labels[i] = conf.to;
                grown += 1;
                if grown >= limit {
                    break;
                }
                let (x, y) = (i % w, i / w);
                let mut nbrs = Vec::with_capacity(4);
                if x > 0 {
                    nbrs.push(i - 1);
                }
                if x + 1 < w {
                    nbrs.push(i + 1);
                }
                if y > 0 {
                    nbrs.push(i - w);
                }
                if y + 1 < h {
                    nbrs.push(i + w);
                }
                nbrs.shuffle(&mut rng);
                for j in nbrs {
                    if grown + queue.len() >= limit {
                        break;
                    }
                    if !flipped[j] && grid.labels[j] == conf.from {
                        flipped[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            // Anything queued but not relabelled is released again.
            for &i in &queue {
                flipped[i] = false;
            }
            done += grown;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid_from_rows(rows: &[&str]) -> SemanticGrid {
        let text = format!("{} {} 1\n{}\n", rows[0].len(), rows.len(), rows.join("\n"));
        text.parse().unwrap()
    }

    #[test]
    fn two_blocks_give_two_segments() {
        let mut g = SemanticGrid::filled(10, 10, 0.5, ClassLabel::Grass);
        g.fill_rect(1, 1, 3, 3, ClassLabel::Roof);
        g.fill_rect(7, 7, 9, 9, ClassLabel::Roof);
        let segs = connected_components(&g, ClassLabel::Roof);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].centroid, Vec2::new(1.5, 1.5));
        assert_eq!(segs[1].centroid, Vec2::new(7.5, 7.5));
        assert!(!segs[0].touches_image_boundary);
    }

    #[test]
    fn absent_class_gives_no_segments() {
        let g = SemanticGrid::filled(4, 4, 1.0, ClassLabel::Roof);
        assert!(connected_components(&g, ClassLabel::Grass).is_empty());
    }

    #[test]
    fn l_shaped_blob_centroid() {
        let g = grid_from_rows(&["GGGGG", "GRGGG", "GRGGG", "GRRRG", "GGGGG"]);
        let segs = connected_components(&g, ClassLabel::Roof);
        assert_eq!(segs.len(), 1);
        // (1,1) (1,2) (1,3) (2,3) (3,3)
        let expect = Vec2::new((1 + 1 + 1 + 2 + 3) as f64 / 5.0, (1 + 2 + 3 + 3 + 3) as f64 / 5.0);
        assert_eq!(segs[0].centroid, expect);
        assert_eq!(segs[0].area(), 5);
    }

    #[test]
    fn diagonal_pixels_are_separate_segments() {
        let g = grid_from_rows(&["RG", "GR"]);
        let segs = connected_components(&g, ClassLabel::Roof);
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.touches_image_boundary));
    }

    #[test]
    fn ascii_round_trip_and_errors() {
        let g = grid_from_rows(&["RPGV", "FCTU"]);
        assert_eq!(g.to_ascii().parse::<SemanticGrid>().unwrap(), g);
        assert!(matches!(
            "2 2 1\nRX\nGG\n".parse::<SemanticGrid>(),
            Err(SemanticsError::Parse { line: 2, .. })
        ));
        assert!("2 3 1\nRR\nGG\n".parse::<SemanticGrid>().is_err());
        assert!("2 1 -1\nRR\n".parse::<SemanticGrid>().is_err());
    }

    #[test]
    fn aligned_grass_is_front_and_opposite_is_back() {
        let c = Vec2::new(5.0, 5.0);
        let v = Vec2::new(0.0, 3.0);
        assert_eq!(yard_side(Vec2::new(5.0, 9.0), c, v), YardLabel::Front);
        assert_eq!(yard_side(Vec2::new(5.0, 1.0), c, v), YardLabel::Back);
    }

    #[test]
    fn wrapped_three_halves_pi_is_front_boundary() {
        // bearing of g is -pi/2 (straight up), v_front points along -x (angle pi):
        // raw difference -3pi/2 wraps to pi/2, inside the closed front interval.
        assert_eq!(normalize_angle(-1.5 * PI), 0.5 * PI);
        assert_eq!(normalize_angle(1.5 * PI), -0.5 * PI);
        let side = yard_side(Vec2::new(0.0, -1.0), Vec2::ZERO, Vec2::new(-1.0, 0.0));
        assert_eq!(side, YardLabel::Front);
    }

    #[test]
    fn zero_front_vector_is_rejected() {
        let g = SemanticGrid::filled(3, 3, 1.0, ClassLabel::Grass);
        assert_eq!(
            classify_grass_front_back(&g, Vec2::ZERO, Vec2::ZERO),
            Err(SemanticsError::ZeroFrontVector)
        );
    }

    #[test]
    fn zero_noise_is_identity_and_seed_is_deterministic() {
        let mut g = SemanticGrid::filled(40, 40, 0.25, ClassLabel::Grass);
        g.fill_rect(5, 5, 30, 30, ClassLabel::Roof);
        let mut m = LabelNoiseModel::typical(9);
        for c in &mut m.confusions {
            c.probability = 0.0;
        }
        assert_eq!(apply_label_noise(&g, &m).unwrap(), g);
        let noisy = LabelNoiseModel::typical(9);
        let a = apply_label_noise(&g, &noisy).unwrap();
        let b = apply_label_noise(&g, &noisy).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, g);
    }

    #[test]
    fn roof_to_paved_rate_is_respected() {
        let mut g = SemanticGrid::filled(50, 50, 0.25, ClassLabel::Grass);
        g.fill_rect(10, 10, 35, 50, ClassLabel::Roof); // 25 x 40 = 1000 px
        assert_eq!(g.count(ClassLabel::Roof), 1000);
        for seed in 0..20 {
            let m = LabelNoiseModel {
                confusions: vec![Confusion {
                    from: ClassLabel::Roof,
                    to: ClassLabel::PavedArea,
                    probability: 0.1,
                }],
                blob_size: 8,
                seed,
            };
            let out = apply_label_noise(&g, &m).unwrap();
            let corrupted = out.count(ClassLabel::PavedArea) as f64 / 1000.0;
            assert!((0.05..=0.15).contains(&corrupted), "seed {seed}: {corrupted}");
            assert_eq!(out.count(ClassLabel::Grass), g.count(ClassLabel::Grass));
        }
    }

    #[test]
    fn invalid_noise_models_are_rejected() {
        let mut m = LabelNoiseModel::typical(0);
        m.blob_size = 0;
        assert!(m.validate().is_err());
        let m = LabelNoiseModel {
            confusions: vec![
                Confusion { from: ClassLabel::Car, to: ClassLabel::Grass, probability: 0.7 },
                Confusion { from: ClassLabel::Car, to: ClassLabel::Roof, probability: 0.4 },
            ],
            blob_size: 1,
            seed: 0,
        };
        assert!(m.validate().is_err());
    }

    fn arb_grid() -> impl Strategy<Value = SemanticGrid> {
        (1usize..16, 1usize..16).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0usize..3, w * h).prop_map(move |v| {
                let labels = v
                    .into_iter()
                    .map(|k| [ClassLabel::Roof, ClassLabel::Grass, ClassLabel::PavedArea][k])
                    .collect();
                SemanticGrid::new(w, h, 0.5, labels).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn segments_partition_the_class(g in arb_grid()) {
            for class in [ClassLabel::Roof, ClassLabel::Grass] {
                let segs = connected_components(&g, class);
                let mut seen = vec![false; g.width() * g.height()];
                for s in &segs {
                    prop_assert!(!s.pixels.is_empty());
                    let (lo, hi) = s.bounding_box();
                    prop_assert!(s.centroid.x >= lo.x as f64 && s.centroid.x <= hi.x as f64);
                    prop_assert!(s.centroid.y >= lo.y as f64 && s.centroid.y <= hi.y as f64);
                    for p in &s.pixels {
                        let i = p.y * g.width() + p.x;
                        prop_assert!(!seen[i]);
                        seen[i] = true;
                        prop_assert_eq!(g.get(*p), class);
                    }
                }
                for p in g.pixels() {
                    prop_assert_eq!(seen[p.y * g.width() + p.x], g.get(p) == class);
                }
            }
        }

        #[test]
        fn front_back_covers_grass_exactly(
            g in arb_grid(), cx in -3.0f64..20.0, cy in -3.0f64..20.0,
            vx in -5.0f64..5.0, vy in -5.0f64..5.0,
        ) {
            prop_assume!(vx.abs() + vy.abs() > 1e-3);
            let m = classify_grass_front_back(&g, Vec2::new(cx, cy), Vec2::new(vx, vy)).unwrap();
            for p in g.pixels() {
                let grass = g.get(p) == ClassLabel::Grass;
                prop_assert_eq!(m.get(p) != YardLabel::NotGrass, grass);
            }
        }

        #[test]
        fn front_back_is_quarter_turn_invariant(
            g in arb_grid(), cx in 0.13f64..15.0, cy in 0.17f64..15.0,
            vx in -5.0f64..5.0, vy in -5.0f64..5.0,
        ) {
            prop_assume!(vx.abs() + vy.abs() > 1e-3);
            let c = Vec2::new(cx, cy);
            let v = Vec2::new(vx, vy);
            let m = classify_grass_front_back(&g, c, v).unwrap();
            let r = g.rotated_quarter();
            let h = g.height() as f64;
            let rc = Vec2::new(h - 1.0 - c.y, c.x);
            let rv = Vec2::new(-v.y, v.x);
            let rm = classify_grass_front_back(&r, rc, rv).unwrap();
            for p in g.pixels() {
                let q = Pixel::new(g.height() - 1 - p.y, p.x);
                let rel = p.as_point() - c;
                let theta = normalize_angle(rel.angle() - v.angle()).abs();
                // skip pixels sitting numerically on the front/back boundary
                prop_assume!((theta - FRAC_PI_2).abs() > 1e-9 || rel.norm() == 0.0);
                prop_assert_eq!(m.get(p), rm.get(q));
            }
        }
    }
}
