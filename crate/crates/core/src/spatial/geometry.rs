//! Planar geometry on WGS84 coordinates (degrees treated as a plane).

use serde_json::Value;

use crate::error::{Error, Result};

/// Points within this distance (degrees) of a ring count as on the boundary.
pub const BOUNDARY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    /// Longitude.
    pub x: f64,
    /// Latitude.
    pub y: f64,
}

impl Coord {
    pub const fn new(x: f64, y: f64) -> Self {
        Coord { x, y }
    }

    fn sub(self, o: Coord) -> Coord {
        Coord::new(self.x - o.x, self.y - o.y)
    }

    fn lerp(self, o: Coord, t: f64) -> Coord {
        Coord::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn distance(self, o: Coord) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

fn cross(a: Coord, b: Coord) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Where a point lies relative to an area.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

/// A closed ring: first and last coordinates are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring(Vec<Coord>);

impl Ring {
    /// Validates closure, minimum size and simplicity.
    pub fn new(coords: Vec<Coord>) -> Result<Self, String> {
        if coords.len() < 4 {
            return Err(format!("ring has {} positions, need at least 4", coords.len()));
        }
        if coords.first() != coords.last() {
            return Err("ring is not closed".to_owned());
        }
        if coords.iter().any(|c| !c.x.is_finite() || !c.y.is_finite()) {
            return Err("ring has a non-finite coordinate".to_owned());
        }
        let ring = Ring(coords);
        if let Some((i, j)) = ring.self_intersection() {
            return Err(format!("ring self-intersects between edges {i} and {j}"));
        }
        Ok(ring)
    }

    pub fn coords(&self) -> &[Coord] {
        &self.0
    }

    pub fn edges(&self) -> impl Iterator<Item = (Coord, Coord)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    fn self_intersection(&self) -> Option<(usize, usize)> {
        let edges: Vec<(Coord, Coord)> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // Adjacent edges share one endpoint; they may only overlap there.
                    if collinear_overlap(a, b, c, d) {
                        return Some((i, j));
                    }
                } else if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Winding-number containment with an epsilon boundary band.
    pub fn locate(&self, p: Coord) -> Location {
        let mut winding = 0i32;
        for (a, b) in self.edges() {
            if distance_to_segment(p, a, b) <= BOUNDARY_EPSILON {
                return Location::Boundary;
            }
            let side = cross(b.sub(a), p.sub(a));
            if a.y <= p.y {
                if b.y > p.y && side > 0.0 {
                    winding += 1;
                }
            } else if b.y <= p.y && side < 0.0 {
                winding -= 1;
            }
        }
        if winding != 0 {
            Location::Inside
        } else {
            Location::Outside
        }
    }

    fn bbox(&self) -> BBox {
        BBox::of(self.0.iter().copied())
    }
}

/// Polygon with an exterior ring and optional holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn locate(&self, p: Coord) -> Location {
        match self.exterior.locate(p) {
            Location::Outside => Location::Outside,
            Location::Boundary => Location::Boundary,
            Location::Inside => {
                for hole in &self.holes {
                    match hole.locate(p) {
                        Location::Inside => return Location::Outside,
                        Location::Boundary => return Location::Boundary,
                        Location::Outside => {}
                    }
                }
                Location::Inside
            }
        }
    }

    fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(&self.holes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPolygon(pub Vec<Polygon>);

impl MultiPolygon {
    /// A single axis-aligned rectangle, handy for fixtures.
    pub fn rectangle(min: Coord, max: Coord) -> Self {
        let ring = Ring::new(vec![
            min,
            Coord::new(max.x, min.y),
            max,
            Coord::new(min.x, max.y),
            min,
        ])
        .expect("rectangle ring is simple");
        MultiPolygon(vec![Polygon {
            exterior: ring,
            holes: Vec::new(),
        }])
    }

    pub fn locate(&self, p: Coord) -> Location {
        let mut best = Location::Outside;
        for poly in &self.0 {
            match poly.locate(p) {
                Location::Inside => return Location::Inside,
                Location::Boundary => best = Location::Boundary,
                Location::Outside => {}
            }
        }
        best
    }

    pub fn bbox(&self) -> BBox {
        self.0
            .iter()
            .map(|p| p.exterior.bbox())
            .reduce(BBox::union)
            .unwrap_or(BBox::EMPTY)
    }

    /// Length of the segment `a..b` lying inside or on the boundary of this area.
    pub fn overlap_length(&self, a: Coord, b: Coord) -> f64 {
        let len = a.distance(b);
        if len == 0.0 {
            return 0.0;
        }
        let mut cuts = vec![0.0, 1.0];
        for poly in &self.0 {
            for ring in poly.rings() {
                for (c, d) in ring.edges() {
                    cuts.extend(segment_crossing_params(a, b, c, d));
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .filter(|w| self.locate(a.lerp(b, (w[0] + w[1]) / 2.0)) != Location::Outside)
            .map(|w| (w[1] - w[0]) * len)
            .sum()
    }

    /// Length of a linestring lying inside this area.
    pub fn linestring_overlap(&self, line: &[Coord]) -> f64 {
        line.windows(2)
            .map(|w| self.overlap_length(w[0], w[1]))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Coord,
    pub max: Coord,
}

impl BBox {
    const EMPTY: BBox = BBox {
        min: Coord::new(f64::INFINITY, f64::INFINITY),
        max: Coord::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    fn of(points: impl Iterator<Item = Coord>) -> BBox {
        points.fold(BBox::EMPTY, |b, p| BBox {
            min: Coord::new(b.min.x.min(p.x), b.min.y.min(p.y)),
            max: Coord::new(b.max.x.max(p.x), b.max.y.max(p.y)),
        })
    }

    fn union(self, o: BBox) -> BBox {
        BBox {
            min: Coord::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Coord::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    pub fn contains(&self, p: Coord) -> bool {
        let e = BOUNDARY_EPSILON;
        p.x >= self.min.x - e && p.x <= self.max.x + e && p.y >= self.min.y - e && p.y <= self.max.y + e
    }

    pub fn intersects_line(&self, line: &[Coord]) -> bool {
        let other = BBox::of(line.iter().copied());
        other.min.x <= self.max.x + BOUNDARY_EPSILON
            && other.max.x >= self.min.x - BOUNDARY_EPSILON
            && other.min.y <= self.max.y + BOUNDARY_EPSILON
            && other.max.y >= self.min.y - BOUNDARY_EPSILON
    }
}

pub fn distance_to_segment(p: Coord, a: Coord, b: Coord) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2;
    p.distance(a.lerp(b, t.clamp(0.0, 1.0)))
}

fn orientation(a: Coord, b: Coord, c: Coord) -> i8 {
    let v = cross(b.sub(a), c.sub(a));
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn within_box(a: Coord, b: Coord, p: Coord) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test.
pub fn segments_intersect(a: Coord, b: Coord, c: Coord, d: Coord) -> bool {
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && within_box(a, b, c))
        || (o2 == 0 && within_box(a, b, d))
        || (o3 == 0 && within_box(c, d, a))
        || (o4 == 0 && within_box(c, d, b))
}

fn collinear_overlap(a: Coord, b: Coord, c: Coord, d: Coord) -> bool {
    if orientation(a, b, c) != 0 || orientation(a, b, d) != 0 {
        return false;
    }
    // Project onto the dominant axis and check the shared span is longer than a point.
    let (p, q, r, s) = if (b.x - a.x).abs() >= (b.y - a.y).abs() {
        (a.x, b.x, c.x, d.x)
    } else {
        (a.y, b.y, c.y, d.y)
    };
    let lo = p.min(q).max(r.min(s));
    let hi = p.max(q).min(r.max(s));
    hi > lo
}

/// Parameters along `a..b` where it crosses segment `c..d`.
fn segment_crossing_params(a: Coord, b: Coord, c: Coord, d: Coord) -> Vec<f64> {
    let r = b.sub(a);
    let s = d.sub(c);
    let denom = cross(r, s);
    let qp = c.sub(a);
    if denom == 0.0 {
        // Parallel: the endpoints of a collinear overlap are the cut points.
        if cross(qp, r) != 0.0 {
            return Vec::new();
        }
        let rr = r.x * r.x + r.y * r.y;
        return [c, d]
            .iter()
            .map(|p| ((p.x - a.x) * r.x + (p.y - a.y) * r.y) / rr)
            .filter(|t| (0.0..=1.0).contains(t))
            .collect();
    }
    let t = cross(qp, s) / denom;
    let u = cross(qp, r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        vec![t]
    } else {
        Vec::new()
    }
}

fn parse_position(v: &Value) -> Result<Coord, String> {
    let arr = v.as_array().ok_or("position is not an array")?;
    match arr.as_slice() {
        [x, y, ..] => Ok(Coord::new(
            x.as_f64().ok_or("longitude is not a number")?,
            y.as_f64().ok_or("latitude is not a number")?,
        )),
        _ => Err("position needs two numbers".to_owned()),
    }
}

fn parse_polygon_coords(v: &Value) -> Result<Polygon, String> {
    let rings = v.as_array().ok_or("polygon coordinates are not an array")?;
    let mut parsed = rings.iter().map(|r| {
        let coords = r
            .as_array()
            .ok_or("ring is not an array")?
            .iter()
            .map(parse_position)
            .collect::<Result<Vec<_>, _>>()?;
        Ring::new(coords)
    });
    let exterior = parsed.next().ok_or("polygon has no rings")??;
    let holes = parsed.collect::<Result<Vec<_>, _>>()?;
    Ok(Polygon { exterior, holes })
}

/// Parses a GeoJSON `Polygon` or `MultiPolygon` geometry object.
pub fn parse_area(geometry: &Value, index: usize) -> Result<MultiPolygon> {
    let err = |message: String| Error::Geometry { index, message };
    let kind = geometry
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| err("geometry has no type".to_owned()))?;
    let coords = geometry
        .get("coordinates")
        .ok_or_else(|| err("geometry has no coordinates".to_owned()))?;
    match kind {
        "Polygon" => Ok(MultiPolygon(vec![parse_polygon_coords(coords).map_err(err)?])),
        "MultiPolygon" => coords
            .as_array()
            .ok_or_else(|| err("multipolygon coordinates are not an array".to_owned()))?
            .iter()
            .map(|p| parse_polygon_coords(p).map_err(err))
            .collect::<Result<Vec<_>>>()
            .map(MultiPolygon),
        other => Err(err(format!("expected Polygon or MultiPolygon, found {other}"))),
    }
}

/// GeoJSON coordinates array for an area.
pub fn area_to_json(area: &MultiPolygon) -> Value {
    let ring = |r: &Ring| -> Value {
        Value::Array(
            r.coords()
                .iter()
                .map(|c| serde_json::json!([c.x, c.y]))
                .collect(),
        )
    };
    let polys: Vec<Value> = area
        .0
        .iter()
        .map(|p| Value::Array(p.rings().map(ring).collect()))
        .collect();
    serde_json::json!({ "type": "MultiPolygon", "coordinates": polys })
}
