//! Task obstacles and grid path planning.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use crate::encoders::{EmbeddingCache, TextEncoder};
use crate::error::{Error, Result};
use crate::geometry::{
    convex_hull, discretize_circle, sigma_bound_circle, GroundGaussian, Polygon2D, Vec2, DEFAULT_CIRCLE_POINTS,
};
use crate::model::Checkpoint;

pub const DEFAULT_SIGMA_BOUND: f64 = 2.0;
pub const DEFAULT_RESOLUTION: f64 = 0.05;

/// Convex ground-plane region covering the bounded regions of a task set.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskObstacle {
    pub hull: Polygon2D,
    pub task_ids: Vec<String>,
    pub sigma_bound: f64,
}

/// Boundary points of every region's `sigma_bound` circle, `k` per circle.
pub fn boundary_points(regions: &[GroundGaussian], sigma_bound: f64, k: usize) -> Result<Vec<Vec2>> {
    let mut points = Vec::with_capacity(regions.len() * k);
    for region in regions {
        points.extend(discretize_circle(&sigma_bound_circle(region, sigma_bound)?, k)?);
    }
    Ok(points)
}

/// Hull over the discretized circles of already predicted regions.
pub fn obstacle_hull(regions: &[GroundGaussian], sigma_bound: f64, k: usize) -> Result<Polygon2D> {
    if regions.is_empty() {
        return Err(Error::Config("task obstacle needs at least one task".into()));
    }
    convex_hull(&boundary_points(regions, sigma_bound, k)?)
}

/// Predicts every task from one image and covers the results with a hull
/// in that image's ego frame.
pub fn task_obstacle(
    checkpoint: &Checkpoint,
    image_key: &str,
    task_set: &[String],
    sigma_bound: f64,
    vision: &EmbeddingCache,
    text: &dyn TextEncoder,
) -> Result<TaskObstacle> {
    if task_set.is_empty() {
        return Err(Error::Config("task obstacle needs at least one task".into()));
    }
    let regions =
        task_set.iter().map(|t| checkpoint.predict(image_key, t, vision, text)).collect::<Result<Vec<_>>>()?;
    Ok(TaskObstacle {
        hull: obstacle_hull(&regions, sigma_bound, DEFAULT_CIRCLE_POINTS)?,
        task_ids: task_set.to_vec(),
        sigma_bound,
    })
}

/// Vertex list as tab-separated `x y` rows.
pub fn polygon_table(polygon: &Polygon2D) -> String {
    let mut out = String::from("x\ty\n");
    for v in &polygon.vertices {
        let _ = writeln!(out, "{:.6}\t{:.6}", v.x, v.y);
    }
    out
}

pub fn parse_points(text: &str) -> Result<Vec<Vec2>> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('x') || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        match values.as_slice() {
            [x, y] => points.push(Vec2::new(*x, *y)),
            _ => return Err(Error::Config(format!("line {}: expected two numbers", i + 1))),
        }
    }
    Ok(points)
}

/// Rectangular occupancy grid. Cell `(row, col)` covers
/// `origin + [col, col+1) x [row, row+1)` times the resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct NavGrid {
    pub origin: Vec2,
    pub resolution: f64,
    rows: usize,
    cols: usize,
    occupied: Vec<bool>,
}

impl NavGrid {
    pub fn new(origin: Vec2, resolution: f64, rows: usize, cols: usize) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) || rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid needs positive resolution and size, got {resolution} and {rows}x{cols}"
            )));
        }
        Ok(Self { origin, resolution, rows, cols, occupied: vec![false; rows * cols] })
    }

    /// Smallest grid covering the rectangle `[min, max]`.
    pub fn covering(min: Vec2, max: Vec2, resolution: f64) -> Result<Self> {
        let size = max - min;
        let cols = (size.x / resolution).ceil().max(1.0) as usize;
        let rows = (size.y / resolution).ceil().max(1.0) as usize;
        Self::new(min, resolution, rows, cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Vec2 {
        self.origin + Vec2::new((col as f64 + 0.5) * self.resolution, (row as f64 + 0.5) * self.resolution)
    }

    pub fn cell_of(&self, p: &Vec2) -> Option<(usize, usize)> {
        let local = (p - self.origin) / self.resolution;
        if local.x < 0.0 || local.y < 0.0 {
            return None;
        }
        let (col, row) = (local.x.floor() as usize, local.y.floor() as usize);
        (row < self.rows && col < self.cols).then_some((row, col))
    }

    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.occupied[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, occupied: bool) {
        self.occupied[row * self.cols + col] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// One text row per grid row, top row last; `#` occupied, `.` free.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(if self.is_occupied(r, c) { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

/// Copy of `grid` with every cell whose center lies inside the hull marked
/// occupied. Parts of the hull outside the grid are ignored.
pub fn rasterize_obstacle(hull: &Polygon2D, grid: &NavGrid) -> NavGrid {
    let mut out = grid.clone();
    if hull.is_empty() {
        return out;
    }
    let (mut lo, mut hi) = (hull.vertices[0], hull.vertices[0]);
    for v in &hull.vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let res = grid.resolution;
    let to_index = |v: f64, o: f64, n: usize| ((v - o) / res - 0.5).clamp(-1.0, n as f64);
    let c0 = to_index(lo.x, grid.origin.x, grid.cols).floor().max(0.0) as usize;
    let c1 = (to_index(hi.x, grid.origin.x, grid.cols).ceil() as isize).min(grid.cols as isize - 1);
    let r0 = to_index(lo.y, grid.origin.y, grid.rows).floor().max(0.0) as usize;
    let r1 = (to_index(hi.y, grid.origin.y, grid.rows).ceil() as isize).min(grid.rows as isize - 1);
    if c1 < 0 || r1 < 0 {
        return out;
    }
    for r in r0..=r1 as usize {
        for c in c0..=c1 as usize {
            if hull.contains(&grid.cell_center(r, c), 1e-12) {
                out.set(r, c, true);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    /// Cells from start to goal.
    pub cells: Vec<(usize, usize)>,
    /// Cell centers from start to goal, meters.
    pub waypoints: Vec<Vec2>,
    /// Path length, meters.
    pub cost: f64,
}

impl PlannedPath {
    pub fn to_table(&self) -> String {
        let mut out = String::from("x\ty\n");
        for w in &self.waypoints {
            let _ = writeln!(out, "{:.6}\t{:.6}", w.x, w.y);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    h: f64,
    row: usize,
    col: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.row.cmp(&self.row))
            .then(other.col.cmp(&self.col))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn octile(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dr = a.0.abs_diff(b.0) as f64;
    let dc = a.1.abs_diff(b.1) as f64;
    let (lo, hi) = if dr < dc { (dr, dc) } else { (dc, dr) };
    hi - lo + std::f64::consts::SQRT_2 * lo
}

/// Free 8-connected neighbours of a cell with their step cost in cells.
/// Diagonal moves need both adjacent cardinal cells free.
pub fn neighbours(grid: &NavGrid, row: usize, col: usize) -> Vec<((usize, usize), f64)> {
    let mut out = Vec::with_capacity(8);
    let free = |r: isize, c: isize| {
        r >= 0
            && c >= 0
            && (r as usize) < grid.rows
            && (c as usize) < grid.cols
            && !grid.is_occupied(r as usize, c as usize)
    };
    let (r, c) = (row as isize, col as isize);
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            if (dr, dc) == (0, 0) || !free(r + dr, c + dc) {
                continue;
            }
            if dr != 0 && dc != 0 && !(free(r + dr, c) && free(r, c + dc)) {
                continue;
            }
            let cost = if dr != 0 && dc != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
            out.push((((r + dr) as usize, (c + dc) as usize), cost));
        }
    }
    out
}

/// A* from `start` to `goal`. `Ok(None)` means no route exists.
pub fn plan_path(grid: &NavGrid, start: Vec2, goal: Vec2) -> Result<Option<PlannedPath>> {
    let endpoint = |p: Vec2, name: &str| {
        let cell = grid
            .cell_of(&p)
            .ok_or_else(|| Error::InvalidEndpoint(format!("{name} ({}, {}) is outside the grid", p.x, p.y)))?;
        if grid.is_occupied(cell.0, cell.1) {
            return Err(Error::InvalidEndpoint(format!("{name} ({}, {}) is occupied", p.x, p.y)));
        }
        Ok(cell)
    };
    let s = endpoint(start, "start")?;
    let g = endpoint(goal, "goal")?;
    let idx = |cell: (usize, usize)| cell.0 * grid.cols + cell.1;
    let mut best = vec![f64::INFINITY; grid.rows * grid.cols];
    let mut parent = vec![usize::MAX; grid.rows * grid.cols];
    let mut closed = vec![false; grid.rows * grid.cols];
    let mut open = BinaryHeap::new();
    best[idx(s)] = 0.0;
    let h0 = octile(s, g);
    open.push(Open { f: h0, h: h0, row: s.0, col: s.1 });
    while let Some(node) = open.pop() {
        let cell = (node.row, node.col);
        let i = idx(cell);
        if closed[i] {
            continue;
        }
        closed[i] = true;
        if cell == g {
            let mut cells = vec![cell];
            let mut k = i;
            while parent[k] != usize::MAX {
                k = parent[k];
                cells.push((k / grid.cols, k % grid.cols));
            }
            cells.reverse();
            return Ok(Some(PlannedPath {
                waypoints: cells.iter().map(|&(r, c)| grid.cell_center(r, c)).collect(),
                cells,
                cost: best[i] * grid.resolution,
            }));
        }
        for (next, step) in neighbours(grid, node.row, node.col) {
            let j = idx(next);
            let cost = best[i] + step;
            if !closed[j] && cost < best[j] {
                best[j] = cost;
                parent[j] = i;
                let h = octile(next, g);
                open.push(Open { f: cost + h, h, row: next.0, col: next.1 });
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use std::collections::VecDeque;

    fn region(x: f64, y: f64, sigma: f64) -> GroundGaussian {
        GroundGaussian::new(Vec3::new(x, y, 0.0), sigma)
    }

    #[test]
    fn single_task_hull_is_its_polygon() {
        let r = region(1.0, -0.5, 0.2);
        let hull = obstacle_hull(&[r], 2.0, 16).unwrap();
        let pts = boundary_points(&[r], 2.0, 16).unwrap();
        assert_eq!(hull.len(), 16);
        for p in &pts {
            assert!(hull.vertices.iter().any(|v| (v - p).norm() < 1e-12));
        }
    }

    #[test]
    fn duplicate_tasks_do_not_change_the_hull() {
        let r = region(0.3, 0.3, 0.1);
        assert_eq!(obstacle_hull(&[r], 2.0, 16).unwrap(), obstacle_hull(&[r, r], 2.0, 16).unwrap());
    }

    #[test]
    fn two_distant_tasks_are_covered() {
        let (a, b) = (region(0.0, 0.0, 0.15), region(2.0, 0.0, 0.15));
        let hull = obstacle_hull(&[a, b], 2.0, 16).unwrap();
        for p in boundary_points(&[a, b], 2.0, 16).unwrap() {
            assert!(hull.contains(&p, 1e-9));
        }
        assert!(hull.contains(&a.mean.xy(), 0.0) && hull.contains(&b.mean.xy(), 0.0));
        assert!(hull.is_convex(1e-12));
    }

    #[test]
    fn empty_task_set_is_an_error() {
        assert!(matches!(obstacle_hull(&[], 2.0, 16), Err(Error::Config(_))));
    }

    #[test]
    fn rasterize_examples() {
        let grid = NavGrid::new(Vec2::zeros(), 0.05, 40, 40).unwrap();
        // tiny triangle around the center of cell (3, 4)
        let c = grid.cell_center(3, 4);
        let tri = Polygon2D {
            vertices: vec![c + Vec2::new(-0.01, -0.01), c + Vec2::new(0.01, -0.01), c + Vec2::new(0.0, 0.01)],
        };
        let one = rasterize_obstacle(&tri, &grid);
        assert_eq!(one.occupied_count(), 1);
        assert!(one.is_occupied(3, 4));
        assert_eq!(grid.occupied_count(), 0);

        let far = Polygon2D { vertices: vec![Vec2::new(10.0, 10.0), Vec2::new(11.0, 10.0), Vec2::new(10.0, 11.0)] };
        assert_eq!(rasterize_obstacle(&far, &grid), grid);

        let square = Polygon2D {
            vertices: vec![Vec2::new(0.33, 0.41), Vec2::new(1.33, 0.41), Vec2::new(1.33, 1.41), Vec2::new(0.33, 1.41)],
        };
        let n = rasterize_obstacle(&square, &grid).occupied_count();
        assert!((19 * 19..=21 * 21).contains(&n), "{n}");
        // brute-force oracle over every cell center
        let mut expected = 0;
        for r in 0..40 {
            for col in 0..40 {
                let p = grid.cell_center(r, col);
                if p.x >= 0.33 && p.x <= 1.33 && p.y >= 0.41 && p.y <= 1.41 {
                    expected += 1;
                }
            }
        }
        assert_eq!(n, expected);
    }

    #[test]
    fn partially_outside_hull_is_clipped() {
        let grid = NavGrid::new(Vec2::zeros(), 0.1, 10, 10).unwrap();
        let big = Polygon2D {
            vertices: vec![Vec2::new(-5.0, -5.0), Vec2::new(0.52, -5.0), Vec2::new(0.52, 5.0), Vec2::new(-5.0, 5.0)],
        };
        assert_eq!(rasterize_obstacle(&big, &grid).occupied_count(), 50);
    }

    #[test]
    fn empty_grid_path_and_lower_bound() {
        let grid = NavGrid::new(Vec2::zeros(), 1.0, 20, 20).unwrap();
        let p = plan_path(&grid, Vec2::new(0.5, 0.5), Vec2::new(19.5, 19.5)).unwrap().unwrap();
        assert!(p.cells.len() >= 20);
        assert!((p.cost - 19.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
        assert_eq!(p.cells[0], (0, 0));
        assert_eq!(*p.cells.last().unwrap(), (19, 19));
    }

    #[test]
    fn wall_blocks_the_route() {
        let mut grid = NavGrid::new(Vec2::zeros(), 1.0, 20, 20).unwrap();
        for r in 0..20 {
            grid.set(r, 10, true);
        }
        assert_eq!(plan_path(&grid, Vec2::new(0.5, 0.5), Vec2::new(19.5, 0.5)).unwrap(), None);
    }

    #[test]
    fn no_corner_cutting() {
        let mut grid = NavGrid::new(Vec2::zeros(), 1.0, 2, 2).unwrap();
        grid.set(0, 1, true);
        let p = plan_path(&grid, Vec2::new(0.5, 0.5), Vec2::new(1.5, 1.5)).unwrap().unwrap();
        assert_eq!(p.cells, vec![(0, 0), (1, 0), (1, 1)]);
        assert!((p.cost - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_endpoints() {
        let mut grid = NavGrid::new(Vec2::zeros(), 1.0, 5, 5).unwrap();
        grid.set(0, 0, true);
        assert!(matches!(plan_path(&grid, Vec2::new(0.5, 0.5), Vec2::new(3.5, 3.5)), Err(Error::InvalidEndpoint(_))));
        assert!(matches!(plan_path(&grid, Vec2::new(1.5, 1.5), Vec2::new(9.5, 3.5)), Err(Error::InvalidEndpoint(_))));
    }

    #[test]
    fn reachability_matches_breadth_first_search() {
        use crate::seed::rng_for;
        use rand::Rng;
        for seed in 0..20 {
            let mut rng = rng_for(seed, "nav-unit");
            let mut grid = NavGrid::new(Vec2::zeros(), 1.0, 12, 12).unwrap();
            for r in 0..12 {
                for c in 0..12 {
                    grid.set(r, c, rng.gen_bool(0.3));
                }
            }
            grid.set(0, 0, false);
            grid.set(11, 11, false);
            let mut seen = [false; 144];
            let mut queue = VecDeque::from([(0usize, 0usize)]);
            seen[0] = true;
            while let Some((r, c)) = queue.pop_front() {
                for ((nr, nc), _) in neighbours(&grid, r, c) {
                    if !seen[nr * 12 + nc] {
                        seen[nr * 12 + nc] = true;
                        queue.push_back((nr, nc));
                    }
                }
            }
            let path = plan_path(&grid, Vec2::new(0.5, 0.5), Vec2::new(11.5, 11.5)).unwrap();
            assert_eq!(path.is_some(), seen[143], "seed {seed}");
        }
    }
}
