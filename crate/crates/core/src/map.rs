//! Semantic map data model: vector form, fixed-size structured packing with
//! validity mask, ego-window cropping and a versioned text serialization.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::{global_to_vehicle, vehicle_to_global, Pose2D, Vec2};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("element {id}: {reason}")]
    InvalidElement { id: u64, reason: String },
    #[error("map parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("structured tensor shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementShape {
    Point,
    Line,
    Polygon,
}

impl ElementShape {
    pub fn id(self) -> u8 {
        match self {
            ElementShape::Point => 0,
            ElementShape::Line => 1,
            ElementShape::Polygon => 2,
        }
    }

    pub const COUNT: usize = 3;
}

impl fmt::Display for ElementShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ElementShape::Point => "point",
            ElementShape::Line => "line",
            ElementShape::Polygon => "polygon",
        };
        f.write_str(s)
    }
}

impl FromStr for ElementShape {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "point" => Ok(ElementShape::Point),
            "line" => Ok(ElementShape::Line),
            "polygon" => Ok(ElementShape::Polygon),
            other => Err(format!("unknown shape '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SemanticType {
    Boundary,
    Divider,
    Marking,
    Pole,
    Crosswalk,
}

impl SemanticType {
    pub fn id(self) -> u8 {
        match self {
            SemanticType::Boundary => 0,
            SemanticType::Divider => 1,
            SemanticType::Marking => 2,
            SemanticType::Pole => 3,
            SemanticType::Crosswalk => 4,
        }
    }

    pub const COUNT: usize = 5;
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SemanticType::Boundary => "boundary",
            SemanticType::Divider => "divider",
            SemanticType::Marking => "marking",
            SemanticType::Pole => "pole",
            SemanticType::Crosswalk => "crosswalk",
        };
        f.write_str(s)
    }
}

impl FromStr for SemanticType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "boundary" => Ok(SemanticType::Boundary),
            "divider" => Ok(SemanticType::Divider),
            "marking" => Ok(SemanticType::Marking),
            "pole" => Ok(SemanticType::Pole),
            "crosswalk" => Ok(SemanticType::Crosswalk),
            other => Err(format!("unknown semantic type '{other}'")),
        }
    }
}

/// One road element: a point, polyline or closed polygon with a semantic
/// label. Polygons are stored without a repeated closing point.
#[derive(Clone, Debug, PartialEq)]
pub struct MapElement {
    pub element_id: u64,
    pub shape: ElementShape,
    pub semantic_type: SemanticType,
    pub points: Vec<Vec2>,
}

impl MapElement {
    pub fn validate(&self) -> Result<(), MapError> {
        let ok = match self.shape {
            ElementShape::Point => self.points.len() == 1,
            ElementShape::Line => self.points.len() >= 2,
            ElementShape::Polygon => self.points.len() >= 3,
        };
        if ok {
            Ok(())
        } else {
            Err(MapError::InvalidElement {
                id: self.element_id,
                reason: format!("{} with {} points", self.shape, self.points.len()),
            })
        }
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.points.len().max(1) as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |acc, p| (acc.0 + p.x, acc.1 + p.y));
        Vec2::new(sx / n, sy / n)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SemanticMap {
    pub elements: Vec<MapElement>,
}

impl SemanticMap {
    pub fn new(elements: Vec<MapElement>) -> Self {
        Self { elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Directed vector between adjacent element points, plus shape/type labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapVector {
    pub p_start: Vec2,
    pub p_end: Vec2,
    pub shape_id: u8,
    pub type_id: u8,
}

/// Split an element into its vector form: a line with N points yields N-1
/// vectors, a polygon additionally the closing edge, a point one degenerate
/// vector with `p_start == p_end`.
pub fn vectorize_element(elem: &MapElement) -> Result<Vec<MapVector>, MapError> {
    elem.validate()?;
    let mk = |a: Vec2, b: Vec2| MapVector {
        p_start: a,
        p_end: b,
        shape_id: elem.shape.id(),
        type_id: elem.semantic_type.id(),
    };
    let mut out = Vec::new();
    match elem.shape {
        ElementShape::Point => out.push(mk(elem.points[0], elem.points[0])),
        ElementShape::Line => {
            for w in elem.points.windows(2) {
                out.push(mk(w[0], w[1]));
            }
        }
        ElementShape::Polygon => {
            for w in elem.points.windows(2) {
                out.push(mk(w[0], w[1]));
            }
            out.push(mk(*elem.points.last().unwrap(), elem.points[0]));
        }
    }
    Ok(out)
}

/// Width of one packed vector row: start xy, end xy, shape, type, two aux
/// ordering scalars.
pub const VECTOR_WIDTH: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PackConfig {
    /// Maximum number of elements (rows).
    pub d1: usize,
    /// Maximum number of vectors per element.
    pub d2: usize,
    /// BEV window extent used to normalize coordinates to roughly [-1, 1].
    pub range_lon: f64,
    pub range_lat: f64,
}

impl Default for PackConfig {
    fn default() -> Self {
        Self {
            d1: 32,
            d2: 128,
            range_lon: 60.0,
            range_lat: 30.0,
        }
    }
}

/// Fixed-size `D1 x D2 x 8` packing of a semantic map with element validity
/// mask. Rows at or past each element's vector count are exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredMapTensor {
    pub d1: usize,
    pub d2: usize,
    /// Row-major `d1 * d2 * VECTOR_WIDTH` scalars.
    pub data: Vec<f64>,
    pub mask: Vec<bool>,
    pub counts: Vec<usize>,
    /// Set when elements or vectors were dropped to fit `d1`/`d2`.
    pub truncated: bool,
}

impl StructuredMapTensor {
    pub fn zeros(d1: usize, d2: usize) -> Self {
        Self {
            d1,
            d2,
            data: vec![0.0; d1 * d2 * VECTOR_WIDTH],
            mask: vec![false; d1],
            counts: vec![0; d1],
            truncated: false,
        }
    }

    #[inline]
    pub fn row(&self, elem: usize, vec_idx: usize) -> &[f64] {
        let off = (elem * self.d2 + vec_idx) * VECTOR_WIDTH;
        &self.data[off..off + VECTOR_WIDTH]
    }
}

/// Pack a vehicle-frame map into the fixed-size structured tensor.
///
/// Elements are ordered nearest-first by centroid distance to the origin
/// (ties broken by `element_id`), which makes the packing canonical and lets
/// truncation keep the closest elements. Vectors past `d2` are subsampled
/// uniformly. Coordinates are normalized by half the BEV ranges.
pub fn pack_structured(map: &SemanticMap, cfg: &PackConfig) -> Result<StructuredMapTensor, MapError> {
    let mut order: Vec<(f64, u64, usize)> = map
        .elements
        .iter()
        .enumerate()
        .map(|(i, e)| (e.centroid().norm(), e.element_id, i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut out = StructuredMapTensor::zeros(cfg.d1, cfg.d2);
    if order.len() > cfg.d1 {
        out.truncated = true;
        order.truncate(cfg.d1);
    }

    let half_lon = cfg.range_lon / 2.0;
    let half_lat = cfg.range_lat / 2.0;
    for (row, &(_, _, idx)) in order.iter().enumerate() {
        let vectors = vectorize_element(&map.elements[idx])?;
        let picked: Vec<&MapVector> = if vectors.len() > cfg.d2 {
            out.truncated = true;
            (0..cfg.d2).map(|k| &vectors[k * vectors.len() / cfg.d2]).collect()
        } else {
            vectors.iter().collect()
        };
        for (vi, v) in picked.iter().enumerate() {
            let off = (row * cfg.d2 + vi) * VECTOR_WIDTH;
            let rec = &mut out.data[off..off + VECTOR_WIDTH];
            rec[0] = v.p_start.x / half_lon;
            rec[1] = v.p_start.y / half_lat;
            rec[2] = v.p_end.x / half_lon;
            rec[3] = v.p_end.y / half_lat;
            rec[4] = v.shape_id as f64 / (ElementShape::COUNT - 1) as f64;
            rec[5] = v.type_id as f64 / (SemanticType::COUNT - 1) as f64;
            rec[6] = row as f64 / cfg.d1 as f64;
            rec[7] = vi as f64 / cfg.d2 as f64;
        }
        out.counts[row] = picked.len();
        out.mask[row] = !picked.is_empty();
    }
    Ok(out)
}

/// Express every map point in the vehicle frame of `pose`. Types, ids and
/// topology are unchanged.
pub fn map_to_vehicle(map: &SemanticMap, pose: Pose2D) -> SemanticMap {
    let elements = map
        .elements
        .iter()
        .map(|e| MapElement {
            element_id: e.element_id,
            shape: e.shape,
            semantic_type: e.semantic_type,
            points: e.points.iter().map(|&p| global_to_vehicle(p, pose)).collect(),
        })
        .collect();
    SemanticMap::new(elements)
}

/// Liang-Barsky clip of segment a->b against the centered window; returns
/// the clipped endpoints and entry/exit parameters.
fn clip_segment(a: Vec2, b: Vec2, hx: f64, hy: f64) -> Option<(Vec2, Vec2, f64, f64)> {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    let checks = [(-dx, a.x + hx), (dx, hx - a.x), (-dy, a.y + hy), (dy, hy - a.y)];
    for &(p, q) in &checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                if r > t1 {
                    return None;
                }
                if r > t0 {
                    t0 = r;
                }
            } else {
                if r < t0 {
                    return None;
                }
                if r < t1 {
                    t1 = r;
                }
            }
        }
    }
    let lerp = |t: f64| Vec2::new(a.x + t * dx, a.y + t * dy);
    Some((lerp(t0), lerp(t1), t0, t1))
}

/// Sutherland-Hodgman polygon clip against the centered window.
fn clip_polygon(points: &[Vec2], hx: f64, hy: f64) -> Vec<Vec2> {
    // Each clip plane as (normal, offset): inside where n.p <= offset.
    let planes: [(f64, f64, f64); 4] = [
        (1.0, 0.0, hx),
        (-1.0, 0.0, hx),
        (0.0, 1.0, hy),
        (0.0, -1.0, hy),
    ];
    let mut poly: Vec<Vec2> = points.to_vec();
    for &(nx, ny, off) in &planes {
        if poly.is_empty() {
            break;
        }
        let mut next = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let cur = poly[i];
            let prev = poly[(i + poly.len() - 1) % poly.len()];
            let cur_in = nx * cur.x + ny * cur.y <= off;
            let prev_in = nx * prev.x + ny * prev.y <= off;
            if cur_in != prev_in {
                let da = nx * prev.x + ny * prev.y - off;
                let db = nx * cur.x + ny * cur.y - off;
                let t = da / (da - db);
                next.push(Vec2::new(
                    prev.x + t * (cur.x - prev.x),
                    prev.y + t * (cur.y - prev.y),
                ));
            }
            if cur_in {
                next.push(cur);
            }
        }
        poly = next;
    }
    poly
}

/// Select and clip map elements to the axis-aligned ego window
/// `[-range_lon/2, range_lon/2] x [-range_lat/2, range_lat/2]` around
/// `pose`. Output coordinates stay in the map frame; elements fully inside
/// the window are returned unchanged. Polylines crossing the boundary are
/// clipped (and may split into several output elements); output elements are
/// renumbered sequentially.
pub fn crop_map(map: &SemanticMap, pose: Pose2D, range_lon: f64, range_lat: f64) -> SemanticMap {
    assert!(range_lon > 0.0 && range_lat > 0.0, "crop ranges must be positive");
    let hx = range_lon / 2.0;
    let hy = range_lat / 2.0;
    let inside = |p: Vec2| p.x.abs() <= hx && p.y.abs() <= hy;

    let mut out: Vec<MapElement> = Vec::new();
    let mut next_id = 0u64;
    let mut push = |shape: ElementShape, ty: SemanticType, points: Vec<Vec2>, out: &mut Vec<MapElement>| {
        let id = next_id;
        next_id += 1;
        out.push(MapElement {
            element_id: id,
            shape,
            semantic_type: ty,
            points,
        });
    };

    for elem in &map.elements {
        let local: Vec<Vec2> = elem.points.iter().map(|&p| global_to_vehicle(p, pose)).collect();
        let all_inside = local.iter().all(|&p| inside(p));
        match elem.shape {
            ElementShape::Point => {
                if all_inside {
                    push(elem.shape, elem.semantic_type, elem.points.clone(), &mut out);
                }
            }
            ElementShape::Line => {
                if all_inside {
                    push(elem.shape, elem.semantic_type, elem.points.clone(), &mut out);
                    continue;
                }
                let mut run: Vec<Vec2> = Vec::new();
                let mut flush = |run: &mut Vec<Vec2>, out: &mut Vec<MapElement>| {
                    if run.len() >= 2 {
                        let pts = run.iter().map(|&p| vehicle_to_global(p, pose)).collect();
                        push(ElementShape::Line, elem.semantic_type, pts, out);
                    }
                    run.clear();
                };
                for w in local.windows(2) {
                    match clip_segment(w[0], w[1], hx, hy) {
                        Some((ca, cb, t0, _)) => {
                            if run.is_empty() || t0 > 0.0 {
                                flush(&mut run, &mut out);
                                run.push(ca);
                            }
                            run.push(cb);
                        }
                        None => flush(&mut run, &mut out),
                    }
                }
                flush(&mut run, &mut out);
            }
            ElementShape::Polygon => {
                if all_inside {
                    push(elem.shape, elem.semantic_type, elem.points.clone(), &mut out);
                    continue;
                }
                let clipped = clip_polygon(&local, hx, hy);
                if clipped.len() >= 3 {
                    let pts = clipped.iter().map(|&p| vehicle_to_global(p, pose)).collect();
                    push(ElementShape::Polygon, elem.semantic_type, pts, &mut out);
                }
            }
        }
    }
    SemanticMap::new(out)
}

// ---------------------------------------------------------------------------
// text serialization
// ---------------------------------------------------------------------------

pub const MAP_FORMAT_HEADER: &str = "semmap 1";

/// Serialize a map to the versioned text format. Floats use Rust's shortest
/// round-trip formatting, so write -> read -> write is byte-identical.
pub fn map_to_string(map: &SemanticMap) -> String {
    let mut s = String::new();
    s.push_str(MAP_FORMAT_HEADER);
    s.push('\n');
    for e in &map.elements {
        s.push_str(&format!(
            "element {} {} {} {}\n",
            e.element_id,
            e.shape,
            e.semantic_type,
            e.points.len()
        ));
        for p in &e.points {
            s.push_str(&format!("{} {}\n", p.x, p.y));
        }
    }
    s
}

pub fn map_from_str(text: &str) -> Result<SemanticMap, MapError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(MapError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if header.trim_end() != MAP_FORMAT_HEADER {
        return Err(MapError::Parse {
            line: 1,
            msg: format!("expected header '{MAP_FORMAT_HEADER}', got '{header}'"),
        });
    }
    let mut elements = Vec::new();
    while let Some((ln, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "element" {
            return Err(MapError::Parse {
                line: ln + 1,
                msg: format!("expected 'element <id> <shape> <type> <n>', got '{line}'"),
            });
        }
        let parse_err = |ln: usize, msg: String| MapError::Parse { line: ln + 1, msg };
        let element_id: u64 = parts[1].parse().map_err(|e| parse_err(ln, format!("bad id: {e}")))?;
        let shape: ElementShape = parts[2].parse().map_err(|e| parse_err(ln, e))?;
        let semantic_type: SemanticType = parts[3].parse().map_err(|e| parse_err(ln, e))?;
        let n: usize = parts[4]
            .parse()
            .map_err(|e| parse_err(ln, format!("bad point count: {e}")))?;
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let (pln, pline) = lines.next().ok_or(MapError::Parse {
                line: ln + 1,
                msg: "unexpected end of file in point list".into(),
            })?;
            let coords: Vec<&str> = pline.split_whitespace().collect();
            if coords.len() != 2 {
                return Err(parse_err(pln, format!("expected 'x y', got '{pline}'")));
            }
            let x: f64 = coords[0].parse().map_err(|e| parse_err(pln, format!("bad x: {e}")))?;
            let y: f64 = coords[1].parse().map_err(|e| parse_err(pln, format!("bad y: {e}")))?;
            points.push(Vec2::new(x, y));
        }
        let elem = MapElement {
            element_id,
            shape,
            semantic_type,
            points,
        };
        elem.validate()
            .map_err(|e| parse_err(ln, format!("invalid element: {e}")))?;
        elements.push(elem);
    }
    Ok(SemanticMap::new(elements))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(id: u64, ty: SemanticType, pts: &[(f64, f64)]) -> MapElement {
        MapElement {
            element_id: id,
            shape: ElementShape::Line,
            semantic_type: ty,
            points: pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect(),
        }
    }

    #[test]
    fn vectorize_line_point_polygon() {
        let l = line(0, SemanticType::Divider, &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let vs = vectorize_element(&l).unwrap();
        assert_eq!(vs.len(), 2);
        assert_eq!(vs[0].p_start, Vec2::new(0.0, 0.0));
        assert_eq!(vs[0].p_end, Vec2::new(1.0, 0.0));
        assert_eq!(vs[1].p_start, Vec2::new(1.0, 0.0));
        assert_eq!(vs[1].p_end, Vec2::new(2.0, 0.0));

        let p = MapElement {
            element_id: 1,
            shape: ElementShape::Point,
            semantic_type: SemanticType::Pole,
            points: vec![Vec2::new(3.0, 4.0)],
        };
        let vs = vectorize_element(&p).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].p_start, vs[0].p_end);
        assert_eq!(vs[0].shape_id, ElementShape::Point.id());

        let poly = MapElement {
            element_id: 2,
            shape: ElementShape::Polygon,
            semantic_type: SemanticType::Marking,
            points: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)],
        };
        let vs = vectorize_element(&poly).unwrap();
        assert_eq!(vs.len(), 3);
        assert_eq!(vs[2].p_start, Vec2::new(1.0, 1.0));
        assert_eq!(vs[2].p_end, Vec2::new(0.0, 0.0));
    }

    #[test]
    fn vectorize_rejects_invalid() {
        let bad = line(0, SemanticType::Divider, &[(0.0, 0.0)]);
        assert!(vectorize_element(&bad).is_err());
    }

    #[test]
    fn pack_empty_map() {
        let t = pack_structured(&SemanticMap::default(), &PackConfig::default()).unwrap();
        assert!(t.data.iter().all(|&v| v == 0.0));
        assert!(t.mask.iter().all(|&m| !m));
        assert!(!t.truncated);
    }

    #[test]
    fn pack_occupancy_and_zero_padding() {
        let cfg = PackConfig::default();
        let elems: Vec<MapElement> = (0..3)
            .map(|i| {
                line(
                    i,
                    SemanticType::Divider,
                    &[
                        (i as f64, 0.0),
                        (i as f64, 1.0),
                        (i as f64, 2.0),
                        (i as f64, 3.0),
                        (i as f64, 4.0),
                        (i as f64, 5.0),
                    ],
                )
            })
            .collect();
        let t = pack_structured(&SemanticMap::new(elems), &cfg).unwrap();
        assert_eq!(t.d1, 32);
        assert_eq!(t.d2, 128);
        assert_eq!(t.data.len(), 32 * 128 * 8);
        let expected_mask: Vec<bool> = (0..32).map(|i| i < 3).collect();
        assert_eq!(t.mask, expected_mask);
        for row in 0..3 {
            assert_eq!(t.counts[row], 5);
            // Rows past the vector count are exactly zero.
            for vi in 5..128 {
                assert!(t.row(row, vi).iter().all(|&v| v == 0.0));
            }
        }
        for row in 3..32 {
            assert_eq!(t.counts[row], 0);
            for vi in 0..128 {
                assert!(t.row(row, vi).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn pack_truncates_farthest_elements() {
        let cfg = PackConfig::default();
        // 40 single-segment lines at increasing distance from origin.
        let elems: Vec<MapElement> = (0..40)
            .map(|i| {
                let x = 1.0 + i as f64;
                line(i as u64, SemanticType::Divider, &[(x, 0.0), (x, 1.0)])
            })
            .collect();
        let map = SemanticMap::new(elems.clone());
        let t = pack_structured(&map, &cfg).unwrap();
        assert!(t.truncated);
        // Brute-force 32 smallest centroid distances.
        let mut dists: Vec<(f64, u64)> = elems
            .iter()
            .map(|e| (e.centroid().norm(), e.element_id))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0));
        let kept: Vec<u64> = dists[..32].iter().map(|d| d.1).collect();
        // Row centroids must match the brute-force kept set, nearest first.
        for (row, &id) in kept.iter().enumerate() {
            let expected_x = (1.0 + id as f64) / (cfg.range_lon / 2.0);
            assert!((t.row(row, 0)[0] - expected_x).abs() < 1e-12);
        }
    }

    #[test]
    fn pack_subsamples_overlong_elements() {
        let cfg = PackConfig {
            d1: 4,
            d2: 8,
            ..PackConfig::default()
        };
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 0.0)).collect();
        let map = SemanticMap::new(vec![line(0, SemanticType::Boundary, &pts)]);
        let t = pack_structured(&map, &cfg).unwrap();
        assert!(t.truncated);
        assert_eq!(t.counts[0], 8);
    }

    #[test]
    fn pack_is_canonical_under_permutation() {
        let cfg = PackConfig::default();
        let a = line(7, SemanticType::Divider, &[(5.0, 0.0), (5.0, 2.0)]);
        let b = line(3, SemanticType::Boundary, &[(1.0, 0.0), (1.0, 2.0)]);
        let c = MapElement {
            element_id: 9,
            shape: ElementShape::Point,
            semantic_type: SemanticType::Pole,
            points: vec![Vec2::new(-2.0, 3.0)],
        };
        let t1 = pack_structured(&SemanticMap::new(vec![a.clone(), b.clone(), c.clone()]), &cfg).unwrap();
        let t2 = pack_structured(&SemanticMap::new(vec![c, a, b]), &cfg).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn crop_keeps_inside_drops_outside() {
        let inside = line(0, SemanticType::Divider, &[(1.0, 0.0), (2.0, 0.0)]);
        let outside = line(1, SemanticType::Divider, &[(100.0, 0.0), (101.0, 0.0)]);
        let map = SemanticMap::new(vec![inside.clone(), outside]);
        let c = crop_map(&map, Pose2D::identity(), 60.0, 30.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c.elements[0].points, inside.points);
    }

    #[test]
    fn crop_clips_crossing_line_to_window_edge() {
        let l = line(0, SemanticType::Boundary, &[(0.0, 0.0), (100.0, 0.0)]);
        let map = SemanticMap::new(vec![l]);
        let c = crop_map(&map, Pose2D::identity(), 60.0, 30.0);
        assert_eq!(c.len(), 1);
        let pts = &c.elements[0].points;
        assert_eq!(pts.len(), 2);
        assert!((pts[0].x - 0.0).abs() < 1e-9);
        assert!((pts[1].x - 30.0).abs() < 1e-9, "clipped endpoint on window edge");
    }

    #[test]
    fn crop_respects_pose() {
        // Element at (10, 0) with the window centered at (10, 0): kept even
        // though far from the map origin.
        let l = line(0, SemanticType::Divider, &[(9.0, 0.0), (11.0, 0.0)]);
        let map = SemanticMap::new(vec![l]);
        let c = crop_map(&map, Pose2D::new(10.0, 0.0, 0.0), 10.0, 10.0);
        assert_eq!(c.len(), 1);
        // Rotated pose: the same element sits laterally in the ego frame.
        let c = crop_map(&map, Pose2D::new(10.0, 0.0, std::f64::consts::PI / 2.0), 10.0, 4.0);
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn crop_splits_reentrant_polyline() {
        // Goes out of the lateral window and comes back: two runs.
        let l = line(
            0,
            SemanticType::Divider,
            &[(-5.0, 0.0), (-3.0, 40.0), (3.0, 40.0), (5.0, 0.0)],
        );
        let map = SemanticMap::new(vec![l]);
        let c = crop_map(&map, Pose2D::identity(), 60.0, 30.0);
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn crop_polygon_clipped() {
        let poly = MapElement {
            element_id: 0,
            shape: ElementShape::Polygon,
            semantic_type: SemanticType::Crosswalk,
            points: vec![
                Vec2::new(10.0, -40.0),
                Vec2::new(12.0, -40.0),
                Vec2::new(12.0, 40.0),
                Vec2::new(10.0, 40.0),
            ],
        };
        let map = SemanticMap::new(vec![poly]);
        let c = crop_map(&map, Pose2D::identity(), 60.0, 30.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c.elements[0].shape, ElementShape::Polygon);
        for p in &c.elements[0].points {
            assert!(p.y.abs() <= 15.0 + 1e-9);
        }
    }

    #[test]
    fn map_roundtrip_bit_exact() {
        let map = SemanticMap::new(vec![
            line(0, SemanticType::Divider, &[(0.125, -3.7), (1.0 / 3.0, 2.5e-11)]),
            MapElement {
                element_id: 42,
                shape: ElementShape::Point,
                semantic_type: SemanticType::Pole,
                points: vec![Vec2::new(-7.25, 19.0)],
            },
        ]);
        let s1 = map_to_string(&map);
        let parsed = map_from_str(&s1).unwrap();
        let s2 = map_to_string(&parsed);
        assert_eq!(s1, s2, "write -> read -> write must be byte-identical");
        assert_eq!(parsed, map);
    }

    #[test]
    fn map_parse_errors_carry_line_numbers() {
        let bad = "semmap 1\nelement 0 line divider 2\n0.0 0.0\nnot_a_number 1.0\n";
        match map_from_str(bad) {
            Err(MapError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(map_from_str("wrong header\n").is_err());
    }

    proptest! {
        #[test]
        fn serialization_roundtrips(xs in proptest::collection::vec((-1e4f64..1e4, -1e4f64..1e4), 2..20)) {
            let elem = MapElement {
                element_id: 5,
                shape: ElementShape::Line,
                semantic_type: SemanticType::Boundary,
                points: xs.iter().map(|&(x, y)| Vec2::new(x, y)).collect(),
            };
            let map = SemanticMap::new(vec![elem]);
            let s1 = map_to_string(&map);
            let parsed = map_from_str(&s1).unwrap();
            let s2 = map_to_string(&parsed);
            prop_assert_eq!(s1, s2);
            prop_assert_eq!(parsed, map);
        }

        #[test]
        fn pack_deterministic(seed_pts in proptest::collection::vec((-20f64..20.0, -10f64..10.0), 4..12)) {
            let mut elems = Vec::new();
            for (i, chunk) in seed_pts.chunks(2).enumerate() {
                if chunk.len() == 2 {
                    elems.push(line(i as u64, SemanticType::Divider,
                        &[(chunk[0].0, chunk[0].1), (chunk[1].0, chunk[1].1)]));
                }
            }
            let cfg = PackConfig::default();
            let m1 = SemanticMap::new(elems.clone());
            let t1 = pack_structured(&m1, &cfg).unwrap();
            let t2 = pack_structured(&m1, &cfg).unwrap();
            prop_assert_eq!(&t1, &t2);
            let mut rev = elems;
            rev.reverse();
            let t3 = pack_structured(&SemanticMap::new(rev), &cfg).unwrap();
            prop_assert_eq!(t1, t3);
        }
    }
}
