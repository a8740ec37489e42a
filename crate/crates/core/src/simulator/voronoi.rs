//! One UE per Voronoi cell of a BS PPP, with a BS at the origin.
//!
//! Cells are built by clipping a large square with the bisectors of nearby
//! BSs, found through a uniform grid in rings of increasing size. The search
//! stops once every unvisited BS is farther than twice the cell's
//! circumradius, so cells are exact unless they reach the edge of the
//! sampled BS window.

use rand::Rng;

use crate::model::NetworkParams;
use crate::scalar::{lit, to_f64, Scalar};

use super::deployment::poisson_count;

struct Grid<T> {
    origin: T,
    cell: T,
    n: usize,
    start: Vec<usize>,
    points: Vec<[T; 2]>,
}

impl<T: Scalar> Grid<T> {
    fn new(points: &[[T; 2]], half_extent: T, cell: T) -> Self {
        let n = to_f64((half_extent * lit(2.0) / cell).ceil()).max(1.0) as usize;
        let mut g = Self { origin: -half_extent, cell, n, start: vec![0; n * n + 1], points: Vec::new() };
        let idx: Vec<usize> = points.iter().map(|p| g.index(*p)).collect();
        for &i in &idx {
            g.start[i + 1] += 1;
        }
        for i in 0..n * n {
            g.start[i + 1] += g.start[i];
        }
        let mut fill = g.start.clone();
        g.points = vec![[T::zero(); 2]; points.len()];
        for (p, &i) in points.iter().zip(&idx) {
            g.points[fill[i]] = *p;
            fill[i] += 1;
        }
        g
    }

    fn coord(&self, v: T) -> usize {
        let c = to_f64(((v - self.origin) / self.cell).floor());
        c.clamp(0.0, (self.n - 1) as f64) as usize
    }

    fn index(&self, p: [T; 2]) -> usize {
        self.coord(p[1]) * self.n + self.coord(p[0])
    }

    fn bucket(&self, ix: usize, iy: usize) -> &[[T; 2]] {
        let i = iy * self.n + ix;
        &self.points[self.start[i]..self.start[i + 1]]
    }
}

/// Keeps the part of `poly` closer to `p` than to `q`; returns whether
/// anything was cut.
fn clip<T: Scalar>(poly: &mut Vec<[T; 2]>, scratch: &mut Vec<[T; 2]>, p: [T; 2], q: [T; 2]) -> bool {
    let n = [q[0] - p[0], q[1] - p[1]];
    let half = lit::<T>(0.5);
    let m = [(p[0] + q[0]) * half, (p[1] + q[1]) * half];
    let side = |v: [T; 2]| (v[0] - m[0]) * n[0] + (v[1] - m[1]) * n[1];
    if poly.iter().all(|&v| side(v) <= T::zero()) {
        return false;
    }
    scratch.clear();
    let mut a = poly[poly.len() - 1];
    let mut sa = side(a);
    for &b in poly.iter() {
        let sb = side(b);
        if (sa < T::zero()) != (sb < T::zero()) && sa != sb {
            let t = sa / (sa - sb);
            scratch.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
        if sb <= T::zero() {
            scratch.push(b);
        }
        a = b;
        sa = sb;
    }
    std::mem::swap(poly, scratch);
    true
}

fn max_dist2<T: Scalar>(poly: &[[T; 2]], p: [T; 2]) -> T {
    poly.iter().fold(T::zero(), |acc, v| {
        let (dx, dy) = (v[0] - p[0], v[1] - p[1]);
        acc.max(dx * dx + dy * dy)
    })
}

/// Voronoi cell of `p` as a counter-clockwise convex polygon.
fn cell_of<T: Scalar>(grid: &Grid<T>, p: [T; 2], big: T, poly: &mut Vec<[T; 2]>, scratch: &mut Vec<[T; 2]>) {
    poly.clear();
    poly.extend([
        [p[0] - big, p[1] - big],
        [p[0] + big, p[1] - big],
        [p[0] + big, p[1] + big],
        [p[0] - big, p[1] + big],
    ]);
    let (cx, cy) = (grid.coord(p[0]) as isize, grid.coord(p[1]) as isize);
    let n = grid.n as isize;
    let four = lit::<T>(4.0);
    let mut reach2 = max_dist2(poly, p);
    for k in 0..=n {
        for iy in (cy - k)..=(cy + k) {
            if iy < 0 || iy >= n {
                continue;
            }
            let on_edge_row = iy == cy - k || iy == cy + k;
            let step = if on_edge_row { 1 } else { (2 * k).max(1) };
            let mut ix = cx - k;
            while ix <= cx + k {
                if ix >= 0 && ix < n {
                    for &q in grid.bucket(ix as usize, iy as usize) {
                        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
                        // Sites beyond twice the circumradius cannot cut the cell.
                        if q != p && dx * dx + dy * dy < four * reach2 && clip(poly, scratch, p, q) {
                            reach2 = max_dist2(poly, p);
                        }
                    }
                }
                ix += step;
            }
        }
        let covered = lit::<T>(k as f64) * grid.cell;
        if four * reach2 <= covered * covered {
            break;
        }
    }
}

/// Uniform point in the convex polygon `poly`, which contains `p`.
fn uniform_in_cell<T: Scalar, R: Rng + ?Sized>(poly: &[[T; 2]], p: [T; 2], rng: &mut R, areas: &mut Vec<T>) -> [T; 2] {
    areas.clear();
    let len = poly.len();
    let mut total = T::zero();
    for i in 0..len {
        let a = poly[i];
        let b = poly[(i + 1) % len];
        let cross = (a[0] - p[0]) * (b[1] - p[1]) - (a[1] - p[1]) * (b[0] - p[0]);
        total = total + cross.abs();
        areas.push(total);
    }
    let pick = lit::<T>(rng.random::<f64>()) * total;
    let i = areas.partition_point(|&c| c <= pick).min(len - 1);
    let a = poly[i];
    let b = poly[(i + 1) % len];
    let (mut u, mut v) = (lit::<T>(rng.random::<f64>()), lit::<T>(rng.random::<f64>()));
    if u + v > T::one() {
        u = T::one() - u;
        v = T::one() - v;
    }
    [p[0] + u * (a[0] - p[0]) + v * (b[0] - p[0]), p[1] + u * (a[1] - p[1]) + v * (b[1] - p[1])]
}

/// Draws BSs (density `λ`, plus one at the origin) and one UE per cell.
/// Pushes the UEs of other cells that fall within `radius` of the origin
/// into `interferers` and returns the origin cell's UE.
pub(crate) fn sample_voronoi_ues<T: Scalar, R: Rng + ?Sized>(
    params: &NetworkParams<T>,
    radius: T,
    rng: &mut R,
    interferers: &mut Vec<[T; 2]>,
) -> [T; 2] {
    let spacing = params.lambda.sqrt().recip();
    // UEs within the window belong to BSs at most a few cell radii beyond
    // it, and those cells need BSs farther out still.
    let ue_reach = radius + lit::<T>(2.0) * spacing;
    let bs_reach = ue_reach + lit::<T>(3.0) * spacing;
    let count = poisson_count(to_f64(params.lambda * T::PI() * bs_reach * bs_reach), rng).unwrap_or(0);
    let mut bss = Vec::with_capacity(count + 1);
    bss.push([T::zero(), T::zero()]);
    for _ in 0..count {
        let r = bs_reach * lit::<T>(rng.random::<f64>()).sqrt();
        let phi = lit::<T>(rng.random::<f64>()) * T::TAU();
        bss.push([r * phi.cos(), r * phi.sin()]);
    }
    let grid = Grid::new(&bss, bs_reach, spacing);
    let big = bs_reach * lit(4.0);
    let (mut poly, mut scratch, mut areas) = (Vec::new(), Vec::new(), Vec::new());
    let mut served = [T::zero(); 2];
    let r2 = radius * radius;
    let reach2 = ue_reach * ue_reach;
    for (i, &p) in bss.iter().enumerate() {
        if p[0] * p[0] + p[1] * p[1] > reach2 {
            continue;
        }
        cell_of(&grid, p, big, &mut poly, &mut scratch);
        let ue = uniform_in_cell(&poly, p, rng, &mut areas);
        if i == 0 {
            served = ue;
        } else if ue[0] * ue[0] + ue[1] * ue[1] <= r2 {
            interferers.push(ue);
        }
    }
    served
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn polygon_area(poly: &[[f64; 2]]) -> f64 {
        let n = poly.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
    }

    #[test]
    fn cells_match_brute_force_nearest_site() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<[f64; 2]> = (0..300)
            .map(|_| [rng.random_range(-1000.0..1000.0), rng.random_range(-1000.0..1000.0)])
            .collect();
        let grid = Grid::new(&pts, 1000.0, 120.0);
        let (mut poly, mut scratch, mut areas) = (Vec::new(), Vec::new(), Vec::new());
        let nearest = |x: [f64; 2]| {
            (0..pts.len())
                .min_by(|&i, &j| {
                    let di = (pts[i][0] - x[0]).powi(2) + (pts[i][1] - x[1]).powi(2);
                    let dj = (pts[j][0] - x[0]).powi(2) + (pts[j][1] - x[1]).powi(2);
                    di.partial_cmp(&dj).unwrap()
                })
                .unwrap()
        };
        for (i, &p) in pts.iter().enumerate().filter(|(_, p)| p[0].abs() < 600.0 && p[1].abs() < 600.0).take(40) {
            cell_of(&grid, p, 8000.0, &mut poly, &mut scratch);
            assert!(polygon_area(&poly) > 0.0);
            for _ in 0..50 {
                let x = uniform_in_cell(&poly, p, &mut rng, &mut areas);
                assert_eq!(nearest(x), i);
            }
        }
    }

    #[test]
    fn interior_cells_tile_the_plane() {
        // Areas of the cells of all sites sum to the area they cover.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<[f64; 2]> = (0..400)
            .map(|_| [rng.random_range(-1000.0..1000.0), rng.random_range(-1000.0..1000.0)])
            .collect();
        let grid = Grid::new(&pts, 1000.0, 100.0);
        let (mut poly, mut scratch) = (Vec::new(), Vec::new());
        let box_half = 1000.0;
        let mut total = 0.0;
        for &p in &pts {
            cell_of(&grid, p, 8000.0, &mut poly, &mut scratch);
            // Restrict to the sampling square.
            for q in [[p[0] - 2.0 * (p[0] + box_half), p[1]], [p[0] + 2.0 * (box_half - p[0]), p[1]]] {
                clip(&mut poly, &mut scratch, p, q);
            }
            for q in [[p[0], p[1] - 2.0 * (p[1] + box_half)], [p[0], p[1] + 2.0 * (box_half - p[1])]] {
                clip(&mut poly, &mut scratch, p, q);
            }
            total += polygon_area(&poly);
        }
        assert!((total - 4.0 * box_half * box_half).abs() < 1e-6 * total);
    }

    #[test]
    fn area_weighted_served_distance_is_rayleigh() {
        // Weighting the typical cell by its area gives the zero cell, whose
        // uniform point lies at a Rayleigh distance from the nearest BS.
        let lambda = 4.6e-6;
        let reach = 4000.0;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (mut poly, mut scratch, mut areas) = (Vec::new(), Vec::new(), Vec::new());
        let mut samples: Vec<(f64, f64)> = (0..20000)
            .map(|_| {
                let count = poisson_count(lambda * std::f64::consts::PI * reach * reach, &mut rng).unwrap();
                let mut bss = vec![[0.0, 0.0]];
                for _ in 0..count {
                    let r = reach * rng.random::<f64>().sqrt();
                    let phi = rng.random::<f64>() * std::f64::consts::TAU;
                    bss.push([r * phi.cos(), r * phi.sin()]);
                }
                let grid = Grid::new(&bss, reach, lambda.sqrt().recip());
                cell_of(&grid, [0.0, 0.0], 4.0 * reach, &mut poly, &mut scratch);
                let ue = uniform_in_cell(&poly, [0.0, 0.0], &mut rng, &mut areas);
                (ue[0].hypot(ue[1]), polygon_area(&poly))
            })
            .collect();
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total: f64 = samples.iter().map(|s| s.1).sum();
        let mut acc = 0.0;
        let mut ks: f64 = 0.0;
        for &(d, w) in &samples {
            let f = 1.0 - (-lambda * std::f64::consts::PI * d * d).exp();
            ks = ks.max((acc / total - f).abs());
            acc += w;
            ks = ks.max((acc / total - f).abs());
        }
        // Effective sample size of the weights is close to n; 1% critical value.
        let n_eff = total * total / samples.iter().map(|s| s.1 * s.1).sum::<f64>();
        assert!(ks < 1.63 / n_eff.sqrt(), "KS = {ks}, n_eff = {n_eff}");
        // Unweighted, the typical cell's UE is nearer than Rayleigh.
        let m2 = samples.iter().map(|s| s.0 * s.0).sum::<f64>() / samples.len() as f64;
        assert!(m2 < 0.9 / (lambda * std::f64::consts::PI));
    }
}
