//! Track topologies: directed loops with a planar embedding, joined by junctions.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance for the "both endpoints are the same physical point" check.
const COINCIDENCE_TOL: f64 = 1e-6;

/// A point on the track: loop index plus arc position along that loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    #[serde(rename = "loop")]
    pub loop_idx: usize,
    pub position: f64,
}

/// Closed planar curve traversed by a loop, parametrised by arc length.
///
/// Circles are travelled counter-clockwise starting at `start_angle`; polygons are
/// travelled through their vertices in order and must have a perimeter equal to the
/// loop length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Embedding {
    Circle { center: [f64; 2], start_angle: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackLoop {
    pub length: f64,
    pub embedding: Embedding,
}

impl TrackLoop {
    fn radius(&self) -> f64 {
        self.length / TAU
    }

    /// 2D point at arc position `s`.
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        let s = s.rem_euclid(self.length);
        match &self.embedding {
            Embedding::Circle { center, start_angle } => {
                let r = self.radius();
                let theta = start_angle + s / r;
                [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
            }
            Embedding::Polygon { vertices } => {
                let (i, t) = polygon_locate(vertices, s);
                let a = vertices[i];
                let b = vertices[(i + 1) % vertices.len()];
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            }
        }
    }

    /// Unit direction of travel at arc position `s`, as an angle in radians.
    pub fn heading_at(&self, s: f64) -> f64 {
        let s = s.rem_euclid(self.length);
        match &self.embedding {
            Embedding::Circle { start_angle, .. } => {
                start_angle + s / self.radius() + std::f64::consts::FRAC_PI_2
            }
            Embedding::Polygon { vertices } => {
                let (i, _) = polygon_locate(vertices, s);
                let a = vertices[i];
                let b = vertices[(i + 1) % vertices.len()];
                (b[1] - a[1]).atan2(b[0] - a[0])
            }
        }
    }

    fn perimeter(&self) -> f64 {
        match &self.embedding {
            Embedding::Circle { .. } => self.length,
            Embedding::Polygon { vertices } => segments(vertices).map(|(a, b)| dist(a, b)).sum(),
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

fn segments(vertices: &[[f64; 2]]) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    (0..vertices.len()).map(move |i| (vertices[i], vertices[(i + 1) % vertices.len()]))
}

/// Segment index and fraction along it for arc position `s`.
fn polygon_locate(vertices: &[[f64; 2]], s: f64) -> (usize, f64) {
    let mut acc = 0.0;
    for (i, (a, b)) in segments(vertices).enumerate() {
        let len = dist(a, b);
        if s < acc + len || i + 1 == vertices.len() {
            return (i, ((s - acc) / len).clamp(0.0, 1.0));
        }
        acc += len;
    }
    unreachable!("polygon has at least three vertices")
}

/// Which of the two track positions of a junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub a: TrackPoint,
    pub b: TrackPoint,
}

impl Junction {
    pub fn endpoint(&self, side: Side) -> TrackPoint {
        match side {
            Side::A => self.a,
            Side::B => self.b,
        }
    }
}

/// One endpoint of one junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JunctionEnd {
    pub junction: usize,
    pub side: Side,
}

impl JunctionEnd {
    pub fn twin(self) -> JunctionEnd {
        JunctionEnd { junction: self.junction, side: self.side.flip() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackTopology {
    pub name: String,
    pub loops: Vec<TrackLoop>,
    pub junctions: Vec<Junction>,
    /// Per loop: junction endpoints sorted by arc position. Derived, rebuilt on load.
    #[serde(skip)]
    endpoints_by_loop: Vec<Vec<(f64, JunctionEnd)>>,
}

impl TrackTopology {
    pub fn new(name: impl Into<String>, loops: Vec<TrackLoop>, junctions: Vec<Junction>) -> Result<Self> {
        let mut topo = TrackTopology { name: name.into(), loops, junctions, endpoints_by_loop: Vec::new() };
        topo.validate()?;
        topo.index();
        Ok(topo)
    }

    fn index(&mut self) {
        let mut by_loop = vec![Vec::new(); self.loops.len()];
        for (j, junction) in self.junctions.iter().enumerate() {
            for side in [Side::A, Side::B] {
                let p = junction.endpoint(side);
                by_loop[p.loop_idx].push((p.position, JunctionEnd { junction: j, side }));
            }
        }
        for list in &mut by_loop {
            list.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        }
        self.endpoints_by_loop = by_loop;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("topology {}: {msg}", self.name)));
        if self.loops.is_empty() {
            return bad("no loops".into());
        }
        for (i, l) in self.loops.iter().enumerate() {
            if !(l.length.is_finite() && l.length > 0.0) {
                return bad(format!("loop {i} has non-positive length {}", l.length));
            }
            if let Embedding::Polygon { vertices } = &l.embedding {
                if vertices.len() < 3 {
                    return bad(format!("loop {i} polygon needs at least 3 vertices"));
                }
                let p = l.perimeter();
                if (p - l.length).abs() > COINCIDENCE_TOL * l.length.max(1.0) {
                    return bad(format!("loop {i} polygon perimeter {p} differs from length {}", l.length));
                }
            }
        }
        for (j, junction) in self.junctions.iter().enumerate() {
            for p in [junction.a, junction.b] {
                let Some(l) = self.loops.get(p.loop_idx) else {
                    return bad(format!("junction {j} refers to missing loop {}", p.loop_idx));
                };
                if !(p.position >= 0.0 && p.position < l.length) {
                    return bad(format!("junction {j} position {} outside [0, {})", p.position, l.length));
                }
            }
            if junction.a.loop_idx == junction.b.loop_idx && junction.a.position == junction.b.position {
                return bad(format!("junction {j} endpoints coincide on the track"));
            }
            let pa = self.point_of(junction.a);
            let pb = self.point_of(junction.b);
            if dist(pa, pb) > COINCIDENCE_TOL {
                return bad(format!("junction {j} endpoints are {} apart in the plane", dist(pa, pb)));
            }
        }
        Ok(())
    }

    pub fn loop_length(&self, loop_idx: usize) -> f64 {
        self.loops[loop_idx].length
    }

    pub fn max_loop_length(&self) -> f64 {
        self.loops.iter().map(|l| l.length).fold(0.0, f64::max)
    }

    pub fn total_length(&self) -> f64 {
        self.loops.iter().map(|l| l.length).sum()
    }

    pub fn point_of(&self, p: TrackPoint) -> [f64; 2] {
        self.loops[p.loop_idx].point_at(p.position)
    }

    pub fn endpoint(&self, end: JunctionEnd) -> TrackPoint {
        self.junctions[end.junction].endpoint(end.side)
    }

    /// Junction endpoints on a loop, sorted by arc position.
    pub fn endpoints_on(&self, loop_idx: usize) -> &[(f64, JunctionEnd)] {
        &self.endpoints_by_loop[loop_idx]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: TrackTopology = serde_json::from_str(text)?;
        TrackTopology::new(raw.name, raw.loops, raw.junctions)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(inner) => Error::Config(format!("{}: {inner}", path.display())),
            other => other,
        })
    }

    /// Built-in track layouts `A`..`E`.
    pub fn preset(name: &str) -> Result<Self> {
        presets::build(name)
    }

    pub fn preset_names() -> [&'static str; 5] {
        ["A", "B", "C", "D", "E"]
    }
}

mod presets {
    use super::*;

    fn circle(length: f64, center: [f64; 2]) -> TrackLoop {
        TrackLoop { length, embedding: Embedding::Circle { center, start_angle: 0.0 } }
    }

    /// Arc position of a planar point lying on the loop's curve.
    fn arc_of(l: &TrackLoop, p: [f64; 2]) -> f64 {
        match &l.embedding {
            Embedding::Circle { center, start_angle } => {
                let theta = (p[1] - center[1]).atan2(p[0] - center[0]);
                ((theta - start_angle) * l.radius()).rem_euclid(l.length)
            }
            Embedding::Polygon { vertices } => {
                let mut acc = 0.0;
                let mut best = (f64::INFINITY, 0.0);
                for (a, b) in segments(vertices) {
                    let len = dist(a, b);
                    let t = (((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (len * len))
                        .clamp(0.0, 1.0);
                    let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    let d = dist(p, q);
                    if d < best.0 {
                        best = (d, acc + t * len);
                    }
                    acc += len;
                }
                best.1.rem_euclid(l.length)
            }
        }
    }

    fn circle_params(l: &TrackLoop) -> ([f64; 2], f64) {
        match l.embedding {
            Embedding::Circle { center, .. } => (center, l.radius()),
            Embedding::Polygon { .. } => unreachable!(),
        }
    }

    fn circle_circle(c0: [f64; 2], r0: f64, c1: [f64; 2], r1: f64) -> Vec<[f64; 2]> {
        let d = dist(c0, c1);
        if d >= r0 + r1 || d <= (r0 - r1).abs() {
            return Vec::new();
        }
        let a = (d * d + r0 * r0 - r1 * r1) / (2.0 * d);
        let h = (r0 * r0 - a * a).sqrt();
        let ux = (c1[0] - c0[0]) / d;
        let uy = (c1[1] - c0[1]) / d;
        let mx = c0[0] + a * ux;
        let my = c0[1] + a * uy;
        vec![[mx - h * uy, my + h * ux], [mx + h * uy, my - h * ux]]
    }

    fn circle_segment(c: [f64; 2], r: f64, a: [f64; 2], b: [f64; 2]) -> Vec<[f64; 2]> {
        let dx = b[0] - a[0];
        let dy = b[1] - a[1];
        let fx = a[0] - c[0];
        let fy = a[1] - c[1];
        let qa = dx * dx + dy * dy;
        let qb = 2.0 * (fx * dx + fy * dy);
        let qc = fx * fx + fy * fy - r * r;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc <= 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)]
            .into_iter()
            .filter(|t| (0.0..1.0).contains(t))
            .map(|t| [a[0] + t * dx, a[1] + t * dy])
            .collect()
    }

    /// Planar crossings between two loops, ordered by angle around the first loop.
    fn crossings(l0: &TrackLoop, l1: &TrackLoop) -> Vec<[f64; 2]> {
        match (&l0.embedding, &l1.embedding) {
            (Embedding::Circle { .. }, Embedding::Circle { .. }) => {
                let (c0, r0) = circle_params(l0);
                let (c1, r1) = circle_params(l1);
                circle_circle(c0, r0, c1, r1)
            }
            (Embedding::Circle { .. }, Embedding::Polygon { vertices }) => {
                let (c, r) = circle_params(l0);
                segments(vertices).flat_map(|(a, b)| circle_segment(c, r, a, b)).collect()
            }
            _ => unreachable!("presets only cross circles with circles or polygons"),
        }
    }

    /// Junctions at the given crossings (by index into `crossings(l0, l1)`).
    fn join(loops: &[TrackLoop], i: usize, k: usize, keep: &[usize]) -> Vec<Junction> {
        let points = crossings(&loops[i], &loops[k]);
        keep.iter()
            .map(|&c| {
                let p = points[c];
                Junction {
                    a: TrackPoint { loop_idx: i, position: arc_of(&loops[i], p) },
                    b: TrackPoint { loop_idx: k, position: arc_of(&loops[k], p) },
                }
            })
            .collect()
    }

    /// Loop pairs that cross, with the indices of the crossings that become junctions.
    type Crossings = Vec<(usize, usize, Vec<usize>)>;

    pub(super) fn build(name: &str) -> Result<TrackTopology> {
        let (loops, pairs): (Vec<TrackLoop>, Crossings) = match name {
            "A" => (vec![circle(60.0, [0.0, 0.0]), circle(60.0, [12.0, 0.0])], vec![(0, 1, vec![0, 1])]),
            "B" => {
                // The rectangle crosses the circle four times; one crossing is an overpass.
                let rect = TrackLoop {
                    length: 100.0,
                    embedding: Embedding::Polygon {
                        vertices: vec![[-15.0, -10.0], [15.0, -10.0], [15.0, 10.0], [-15.0, 10.0]],
                    },
                };
                (vec![circle(80.0, [0.0, 0.0]), rect], vec![(0, 1, vec![0, 1, 2])])
            }
            "C" => (
                vec![circle(70.0, [0.0, 0.0]), circle(90.0, [20.0, 0.0]), circle(70.0, [40.0, 0.0])],
                vec![(0, 1, vec![0, 1]), (1, 2, vec![0, 1])],
            ),
            "D" => (
                vec![
                    circle(120.0, [0.0, 0.0]),
                    circle(124.0, [34.0, 0.0]),
                    circle(116.0, [34.0, 34.0]),
                    circle(120.0, [0.0, 34.0]),
                ],
                vec![(0, 1, vec![0, 1]), (1, 2, vec![0, 1]), (2, 3, vec![0, 1]), (3, 0, vec![0, 1])],
            ),
            "E" => {
                let h = 16.0 * 3f64.sqrt() / 2.0;
                (
                    vec![circle(80.0, [0.0, 0.0]), circle(80.0, [16.0, 0.0]), circle(80.0, [8.0, h])],
                    vec![(0, 1, vec![0, 1]), (1, 2, vec![0, 1]), (2, 0, vec![0, 1])],
                )
            }
            other => return Err(Error::Config(format!("unknown topology preset `{other}`"))),
        };
        let junctions = pairs.iter().flat_map(|(i, k, keep)| join(&loops, *i, *k, keep)).collect();
        TrackTopology::new(name, loops, junctions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_sized() {
        let expect = [("A", 2, 2), ("B", 2, 3), ("C", 3, 4), ("D", 4, 8), ("E", 3, 6)];
        for (name, loops, junctions) in expect {
            let t = TrackTopology::preset(name).unwrap();
            assert_eq!(t.loops.len(), loops, "{name}");
            assert_eq!(t.junctions.len(), junctions, "{name}");
        }
        let a = TrackTopology::preset("A").unwrap().total_length();
        let d = TrackTopology::preset("D").unwrap().total_length();
        for name in TrackTopology::preset_names() {
            let len = TrackTopology::preset(name).unwrap().total_length();
            assert!(a <= len && len <= d, "{name} total length {len}");
        }
    }

    #[test]
    fn junction_endpoints_are_spread_out() {
        // Endpoints on one loop must leave room for two junction windows between them.
        for name in TrackTopology::preset_names() {
            let t = TrackTopology::preset(name).unwrap();
            for (l, track) in t.loops.iter().enumerate() {
                let ends = t.endpoints_on(l);
                for (i, (p, _)) in ends.iter().enumerate() {
                    let next = ends[(i + 1) % ends.len()].0;
                    let gap = (next - p).rem_euclid(track.length);
                    if ends.len() > 1 {
                        assert!(gap > 6.0, "{name} loop {l}: endpoints {gap} apart");
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let t = TrackTopology::preset("C").unwrap();
        let back = TrackTopology::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.endpoints_on(1).len(), 4);
    }

    #[test]
    fn rejects_non_coincident_junction() {
        let mut t = TrackTopology::preset("A").unwrap();
        t.junctions[0].b.position = (t.junctions[0].b.position + 3.0) % 60.0;
        let err = TrackTopology::new("bad", t.loops.clone(), t.junctions.clone()).unwrap_err();
        assert!(err.to_string().contains("apart"), "{err}");
    }

    #[test]
    fn rejects_out_of_range_position() {
        let t = TrackTopology::preset("A").unwrap();
        let mut junctions = t.junctions.clone();
        junctions[0].a.position = 60.0;
        assert!(TrackTopology::new("bad", t.loops.clone(), junctions).is_err());
    }

    #[test]
    fn polygon_parametrisation_is_continuous() {
        let t = TrackTopology::preset("B").unwrap();
        let rect = &t.loops[1];
        assert_eq!(rect.point_at(0.0), [-15.0, -10.0]);
        assert_eq!(rect.point_at(30.0), [15.0, -10.0]);
        let p = rect.point_at(99.999_999);
        assert!(dist(p, [-15.0, -10.0]) < 1e-5);
    }
}
