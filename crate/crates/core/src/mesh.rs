//! Conforming polygonal meshes of planar domains.
//!
//! A mesh is stored edge-based: every cell keeps its counterclockwise vertex
//! loop together with the global edges it traverses, and every edge records
//! the one or two cells it separates. Edges carry a canonical orientation
//! (lower vertex index first); a cell traverses each of its edges either along
//! or against that orientation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

pub type Point = Point2<f64>;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("degenerate rectangle ({x0},{y0})-({x1},{y1})")));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn unit_square() -> Self {
        Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Grid family used by the convergence studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridFamily {
    /// Uniform squares (rectangles on non-square domains).
    Rect,
    /// Quadrilateral-pentagonal-hexagonal macro-cell partition.
    Qph,
}

impl GridFamily {
    pub fn build(self, level: u32, domain: Rect) -> Result<PolygonalMesh> {
        match self {
            GridFamily::Rect => make_rect_grid(level, domain),
            GridFamily::Qph => make_qph_grid(level, domain),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridFamily::Rect => "rect",
            GridFamily::Qph => "qph",
        }
    }
}

impl std::str::FromStr for GridFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" | "rectangular" | "square" => Ok(GridFamily::Rect),
            "qph" | "polygonal" => Ok(GridFamily::Qph),
            other => Err(Error::invalid(format!("unknown grid family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Canonical orientation: `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// First incident cell, and the second one for interior edges.
    pub cells: (usize, Option<usize>),
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    /// Counterclockwise vertex loop.
    pub vertices: Vec<usize>,
    /// `edges[i]` joins `vertices[i]` and `vertices[(i + 1) % n]`.
    pub edges: Vec<usize>,
    /// Whether the counterclockwise traversal of `edges[i]` follows the
    /// edge's canonical orientation.
    pub aligned: Vec<bool>,
    pub area: f64,
    pub centroid: Point,
    pub diameter: f64,
}

impl Cell {
    pub fn num_edges(&self) -> usize {
        self.vertices.len()
    }
}

#[derive(Debug, Clone)]
pub struct PolygonalMesh {
    vertices: Vec<Point>,
    edges: Vec<Edge>,
    cells: Vec<Cell>,
    h: f64,
}

/// Summary numbers of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshStatistics {
    pub cells: usize,
    pub edges: usize,
    pub vertices: usize,
    pub boundary_edges: usize,
    pub h: f64,
    pub min_diameter: f64,
    pub max_diameter: f64,
    /// `max_T h_T² / |T|`.
    pub diameter_area_ratio: f64,
    /// `max_T h_T / min_{e ⊂ ∂T} |e|`.
    pub diameter_edge_ratio: f64,
    pub area: f64,
}

impl std::fmt::Display for MeshStatistics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "cells          {}", self.cells)?;
        writeln!(f, "edges          {} ({} on boundary)", self.edges, self.boundary_edges)?;
        writeln!(f, "vertices       {}", self.vertices)?;
        writeln!(f, "h              {:.6e}", self.h)?;
        writeln!(f, "h_T range      [{:.6e}, {:.6e}]", self.min_diameter, self.max_diameter)?;
        writeln!(f, "h_T^2/|T|      {:.4}", self.diameter_area_ratio)?;
        writeln!(f, "h_T/min|e|     {:.4}", self.diameter_edge_ratio)?;
        write!(f, "area           {:.15}", self.area)
    }
}

fn signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    0.5 * a
}

fn polygon_centroid(points: &[Point], area: f64) -> Point {
    let n = points.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        let cross = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    Point::new(cx / (6.0 * area), cy / (6.0 * area))
}

fn diameter(points: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max((p - q).norm());
        }
    }
    d
}

/// Signed area of the triangle (a, b, c).
pub(crate) fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

impl PolygonalMesh {
    /// Builds a mesh from vertex coordinates and polygon vertex loops.
    ///
    /// Loops given clockwise are reversed. Fails on degenerate or
    /// non-star-shaped cells, on edges shared by more than two cells and on
    /// hanging nodes.
    pub fn from_polygons(vertices: Vec<Point>, polygons: Vec<Vec<usize>>) -> Result<Self> {
        if polygons.is_empty() {
            return Err(Error::invalid("mesh without cells"));
        }
        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cells = Vec::with_capacity(polygons.len());

        for (ci, mut loop_) in polygons.into_iter().enumerate() {
            if loop_.len() < 3 {
                return Err(Error::Geometry { cell: ci, reason: "fewer than 3 vertices".into() });
            }
            if let Some(&bad) = loop_.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Geometry { cell: ci, reason: format!("vertex index {bad} out of range") });
            }
            let mut pts: Vec<Point> = loop_.iter().map(|&v| vertices[v]).collect();
            let mut area = signed_area(&pts);
            if area < 0.0 {
                loop_.reverse();
                pts.reverse();
                area = -area;
            }
            if !(area > 0.0) {
                return Err(Error::Geometry { cell: ci, reason: "zero area".into() });
            }
            let centroid = polygon_centroid(&pts, area);
            let n = loop_.len();
            for i in 0..n {
                let fan = triangle_area(&centroid, &pts[i], &pts[(i + 1) % n]);
                if fan <= 1e-14 * area {
                    return Err(Error::Geometry {
                        cell: ci,
                        reason: "cell is not star-shaped with respect to its centroid".into(),
                    });
                }
            }
            let mut cell_edges = Vec::with_capacity(n);
            let mut aligned = Vec::with_capacity(n);
            for i in 0..n {
                let a = loop_[i];
                let b = loop_[(i + 1) % n];
                if a == b {
                    return Err(Error::Geometry { cell: ci, reason: "repeated vertex".into() });
                }
                let key = (a.min(b), a.max(b));
                let ei = match edge_index.get(&key) {
                    Some(&ei) => {
                        let edge = &mut edges[ei];
                        if edge.cells.1.is_some() || edge.cells.0 == ci {
                            return Err(Error::NonConforming(format!(
                                "edge ({}, {}) is shared by more than two cells",
                                key.0, key.1
                            )));
                        }
                        edge.cells.1 = Some(ci);
                        ei
                    }
                    None => {
                        let ei = edges.len();
                        edges.push(Edge {
                            vertices: [key.0, key.1],
                            cells: (ci, None),
                            length: (vertices[key.1] - vertices[key.0]).norm(),
                        });
                        edge_index.insert(key, ei);
                        ei
                    }
                };
                cell_edges.push(ei);
                aligned.push(a < b);
            }
            cells.push(Cell {
                diameter: diameter(&pts),
                vertices: loop_,
                edges: cell_edges,
                aligned,
                area,
                centroid,
            });
        }

        let h = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
        let mesh = PolygonalMesh { vertices, edges, cells, h };
        mesh.check_hanging_nodes()?;
        Ok(mesh)
    }

    fn check_hanging_nodes(&self) -> Result<()> {
        let used: Vec<usize> = {
            let mut seen = vec![false; self.vertices.len()];
            for c in &self.cells {
                for &v in &c.vertices {
                    seen[v] = true;
                }
            }
            (0..self.vertices.len()).filter(|&v| seen[v]).collect()
        };
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            let a = self.vertices[e.vertices[0]];
            let b = self.vertices[e.vertices[1]];
            let d = b - a;
            let len2 = d.norm_squared();
            for &v in &used {
                if v == e.vertices[0] || v == e.vertices[1] {
                    continue;
                }
                let p = self.vertices[v] - a;
                let t = p.dot(&d) / len2;
                if t <= 1e-12 || t >= 1.0 - 1e-12 {
                    continue;
                }
                let dist = (p - d * t).norm();
                if dist <= 1e-12 * e.length {
                    return Err(Error::NonConforming(format!(
                        "vertex {v} hangs on edge ({}, {})",
                        e.vertices[0], e.vertices[1]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Mesh size `h = max_T h_T`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_points(&self, cell: usize) -> Vec<Point> {
        self.cells[cell].vertices.iter().map(|&v| self.vertices[v]).collect()
    }

    /// Endpoints of edge `ei` in canonical orientation.
    pub fn edge_points(&self, ei: usize) -> (Point, Point) {
        let e = &self.edges[ei];
        (self.vertices[e.vertices[0]], self.vertices[e.vertices[1]])
    }

    /// Unit normal of local edge `i` of `cell`, pointing out of the cell.
    pub fn outward_normal(&self, cell: usize, i: usize) -> Vector2<f64> {
        let c = &self.cells[cell];
        let a = self.vertices[c.vertices[i]];
        let b = self.vertices[c.vertices[(i + 1) % c.vertices.len()]];
        let d = b - a;
        Vector2::new(d.y, -d.x) / d.norm()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    pub fn boundary_edge_flags(&self) -> Vec<bool> {
        self.edges.iter().map(Edge::is_boundary).collect()
    }

    /// Checks that cells are star-shaped w.r.t. their centroid via the signs
    /// of the fan triangle areas. Always true for meshes built by this
    /// module; exposed for diagnostics.
    pub fn is_star_shaped(&self, cell: usize) -> bool {
        let c = &self.cells[cell];
        let pts = self.cell_points(cell);
        let n = pts.len();
        (0..n).all(|i| triangle_area(&c.centroid, &pts[i], &pts[(i + 1) % n]) > 0.0)
    }

    pub fn statistics(&self) -> MeshStatistics {
        let mut min_d = f64::INFINITY;
        let mut max_d: f64 = 0.0;
        let mut da: f64 = 0.0;
        let mut de: f64 = 0.0;
        for c in &self.cells {
            min_d = min_d.min(c.diameter);
            max_d = max_d.max(c.diameter);
            da = da.max(c.diameter * c.diameter / c.area);
            let min_edge = c.edges.iter().map(|&e| self.edges[e].length).fold(f64::INFINITY, f64::min);
            de = de.max(c.diameter / min_edge);
        }
        MeshStatistics {
            cells: self.cells.len(),
            edges: self.edges.len(),
            vertices: self.vertices.len(),
            boundary_edges: self.edges.iter().filter(|e| e.is_boundary()).count(),
            h: self.h,
            min_diameter: min_d,
            max_diameter: max_d,
            diameter_area_ratio: da,
            diameter_edge_ratio: de,
            area: self.total_area(),
        }
    }

    /// Writes the plain-text mesh format: vertex count, `x y` lines, cell
    /// count, `m v1 ... vm` lines with 0-based indices.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "{}", self.vertices.len()).unwrap();
        for p in &self.vertices {
            writeln!(s, "{} {}", format_g17(p.x), format_g17(p.y)).unwrap();
        }
        writeln!(s, "{}", self.cells.len()).unwrap();
        for c in &self.cells {
            write!(s, "{}", c.vertices.len()).unwrap();
            for v in &c.vertices {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: Read>(input: R) -> std::result::Result<Self, String> {
        let reader = BufReader::new(input);
        let mut tokens: Vec<String> = Vec::new();
        let mut lines = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|e| e.to_string())?;
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                lines.push(trimmed.to_string());
            }
        }
        let mut it = lines.into_iter();
        let mut next_line = |what: &str| it.next().ok_or_else(|| format!("unexpected end of file reading {what}"));

        let nv: usize = next_line("vertex count")?.parse().map_err(|e| format!("vertex count: {e}"))?;
        let mut vertices = Vec::with_capacity(nv);
        for i in 0..nv {
            let line = next_line("vertex")?;
            tokens.clear();
            tokens.extend(line.split_whitespace().map(str::to_string));
            if tokens.len() != 2 {
                return Err(format!("vertex line {i}: expected 2 numbers"));
            }
            let x: f64 = tokens[0].parse().map_err(|e| format!("vertex {i}: {e}"))?;
            let y: f64 = tokens[1].parse().map_err(|e| format!("vertex {i}: {e}"))?;
            vertices.push(Point::new(x, y));
        }
        let nc: usize = next_line("cell count")?.parse().map_err(|e| format!("cell count: {e}"))?;
        let mut polygons = Vec::with_capacity(nc);
        for i in 0..nc {
            let line = next_line("cell")?;
            let nums: std::result::Result<Vec<usize>, _> = line.split_whitespace().map(str::parse).collect();
            let nums = nums.map_err(|e| format!("cell {i}: {e}"))?;
            if nums.is_empty() || nums[0] + 1 != nums.len() {
                return Err(format!("cell {i}: vertex count does not match"));
            }
            polygons.push(nums[1..].to_vec());
        }
        if next_line("trailing").is_ok() {
            return Err("trailing content after cells".into());
        }
        PolygonalMesh::from_polygons(vertices, polygons).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_text(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        PolygonalMesh::read_text(f).map_err(|reason| Error::MeshFormat { path: path.to_path_buf(), reason })
    }
}

/// Shortest-round-trip-safe decimal rendering with 17 significant digits,
/// positional for moderate exponents (like C's `%.17g`).
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-5..17).contains(&exp) {
        let mant = trim_fraction(mant);
        return format!("{mant}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    trim_fraction(&format!("{:.*}", decimals, v)).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn check_level(level: u32) -> Result<usize> {
    if level == 0 {
        return Err(Error::invalid("grid level must be at least 1"));
    }
    if level > 16 {
        return Err(Error::invalid(format!("grid level {level} is too large")));
    }
    Ok(1usize << (level - 1))
}

fn lattice(n: usize, domain: &Rect) -> (Vec<Point>, impl Fn(usize, usize) -> usize) {
    let dx = (domain.x1 - domain.x0) / n as f64;
    let dy = (domain.y1 - domain.y0) / n as f64;
    let mut pts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            pts.push(Point::new(domain.x0 + i as f64 * dx, domain.y0 + j as f64 * dy));
        }
    }
    (pts, move |i: usize, j: usize| j * (n + 1) + i)
}

/// Uniform `2^(level-1) × 2^(level-1)` grid of congruent rectangles.
pub fn make_rect_grid(level: u32, domain: Rect) -> Result<PolygonalMesh> {
    let n = check_level(level)?;
    let (pts, id) = lattice(n, &domain);
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolygonalMesh::from_polygons(pts, cells)
}

/// Interior points of a macro-cell, as fractions of its width and height.
pub const QPH_FRACTIONS: [(f64, f64); 6] = [
    (9.0 / 25.0, 6.0 / 25.0),
    (16.0 / 25.0, 6.0 / 25.0),
    (23.0 / 100.0, 1.0 / 2.0),
    (77.0 / 100.0, 1.0 / 2.0),
    (9.0 / 25.0, 19.0 / 25.0),
    (16.0 / 25.0, 19.0 / 25.0),
];

/// `2^(level-1) × 2^(level-1)` macro-cells, each split into a bottom
/// quadrilateral, a right pentagon, a top quadrilateral, a left pentagon and
/// a central hexagon (in that order).
pub fn make_qph_grid(level: u32, domain: Rect) -> Result<PolygonalMesh> {
    let n = check_level(level)?;
    let (mut pts, id) = lattice(n, &domain);
    let dx = (domain.x1 - domain.x0) / n as f64;
    let dy = (domain.y1 - domain.y0) / n as f64;
    let mut cells = Vec::with_capacity(5 * n * n);
    for j in 0..n {
        for i in 0..n {
            let base = pts.len();
            for (fx, fy) in QPH_FRACTIONS {
                pts.push(Point::new(domain.x0 + (i as f64 + fx) * dx, domain.y0 + (j as f64 + fy) * dy));
            }
            let [a, b, c, d, e, f] = [base, base + 1, base + 2, base + 3, base + 4, base + 5];
            let (p00, p10, p11, p01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.push(vec![p00, p10, b, a]);
            cells.push(vec![p10, p11, f, d, b]);
            cells.push(vec![p11, p01, e, f]);
            cells.push(vec![p01, p00, a, c, e]);
            cells.push(vec![a, b, d, f, e, c]);
        }
    }
    PolygonalMesh::from_polygons(pts, cells)
}
