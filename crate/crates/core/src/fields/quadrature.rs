//! Quadrature on S³, on the unit ball B⁴, and on ℝ⁴, with a bubble chart of
//! scale λ around a center p.

use crate::fields::P4;
use crate::numerics::{gauss_interval, gauss_legendre};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::ops::Range;

/// Product rule on S³ in hyperspherical angles, exact for polynomials of
/// degree `≤ 2l + 1` restricted to the sphere.
#[derive(Clone, Debug)]
pub struct S3Rule {
    pub dirs: Vec<P4>,
    pub weights: Vec<f64>,
    pub l: usize,
}

impl S3Rule {
    pub fn new(l: usize) -> Self {
        let n = l + 1;
        let (u, wu) = gauss_legendre(n);
        let nphi = 2 * l + 2;
        let mut dirs = Vec::with_capacity(n * n * nphi);
        let mut weights = Vec::with_capacity(n * n * nphi);
        for k in 1..=n {
            let a = k as f64 * PI / (n as f64 + 1.0);
            let (t, st) = (a.cos(), a.sin());
            let wt = PI / (n as f64 + 1.0) * st * st;
            for (ui, wui) in u.iter().zip(&wu) {
                let su = (1.0 - ui * ui).sqrt();
                for m in 0..nphi {
                    let phi = 2.0 * PI * m as f64 / nphi as f64;
                    dirs.push([t, st * ui, st * su * phi.cos(), st * su * phi.sin()]);
                    weights.push(wt * wui * 2.0 * PI / nphi as f64);
                }
            }
        }
        S3Rule { dirs, weights, l }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
    /// Hash of the node set, used to tag boundary-data files.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"s3");
        h.update((self.l as u64).to_le_bytes());
        for d in &self.dirs {
            for c in d {
                h.update(c.to_le_bytes());
            }
        }
        format!("{:x}", h.finalize())[..16].to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// The whole unit ball in polar coordinates about the origin.
    Ball,
    /// `|x − p| < radius`, clipped to the unit ball.
    Bubble { radius: f64 },
    /// `|x − p| ≥ inner` inside the unit ball.
    Background { inner: f64 },
    /// `|x − p| < radius` in ℝ⁴.
    Inner { radius: f64 },
    /// `|x − p| ≥ radius` in ℝ⁴, in the inverted variable `u = 1/|x − p|`.
    Outer { radius: f64 },
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub region: Region,
    pub range: Range<usize>,
}

/// Quadrature nodes and positive weights, grouped into charts.
#[derive(Clone, Debug)]
pub struct ChartQuadrature {
    pub nodes: Vec<P4>,
    pub weights: Vec<f64>,
    pub charts: Vec<Chart>,
    pub center: P4,
    pub scale: f64,
}

/// Sizes of the bubble-centered quadrature.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BubbleGrid {
    /// S³ rule parameter (exact to degree `2l + 1`).
    pub s3_l: usize,
    /// Bubble chart radius in units of λ.
    pub split: f64,
    /// Gauss points per radial panel.
    pub panel_points: usize,
    /// Number of graded radial panels in the background chart.
    pub background_panels: usize,
}

impl Default for BubbleGrid {
    fn default() -> Self {
        BubbleGrid {
            s3_l: 10,
            split: 8.0,
            panel_points: 10,
            background_panels: 6,
        }
    }
}

impl BubbleGrid {
    pub fn coarse() -> Self {
        BubbleGrid {
            s3_l: 6,
            split: 8.0,
            panel_points: 6,
            background_panels: 4,
        }
    }
}

/// Distance from `p` to the unit sphere along the unit direction `w`.
pub fn ray_exit(p: &P4, w: &P4) -> f64 {
    let pw: f64 = (0..4).map(|i| p[i] * w[i]).sum();
    let pp: f64 = p.iter().map(|v| v * v).sum();
    -pw + (pw * pw + 1.0 - pp).sqrt()
}

fn push_radial(nodes: &mut Vec<P4>, weights: &mut Vec<f64>, p: &P4, w: &P4, wdir: f64, breaks: &[f64], npts: usize) {
    for win in breaks.windows(2) {
        if win[1] <= win[0] {
            continue;
        }
        for (r, wr) in gauss_interval(npts, win[0], win[1]) {
            nodes.push(std::array::from_fn(|i| p[i] + r * w[i]));
            weights.push(wdir * wr * r * r * r);
        }
    }
}

impl ChartQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn total_weight(&self) -> f64 {
        crate::numerics::pairwise_sum(&self.weights)
    }

    /// Polar rule on the unit ball about the origin.
    pub fn ball(n_radial: usize, s3: &S3Rule) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (d, wd) in s3.dirs.iter().zip(&s3.weights) {
            push_radial(&mut nodes, &mut weights, &[0.0; 4], d, *wd, &[0.0, 1.0], n_radial);
        }
        let n = nodes.len();
        ChartQuadrature {
            nodes,
            weights,
            charts: vec![Chart {
                region: Region::Ball,
                range: 0..n,
            }],
            center: [0.0; 4],
            scale: 1.0,
        }
    }

    /// Polar rule on the ball `|x| ≤ radius` about the origin.
    pub fn ball_radius(n_radial: usize, s3: &S3Rule, radius: f64) -> Self {
        let mut q = Self::ball(n_radial, s3);
        let r4 = radius.powi(4);
        for (x, w) in q.nodes.iter_mut().zip(q.weights.iter_mut()) {
            *x = x.map(|c| c * radius);
            *w *= r4;
        }
        q
    }

    /// Two-chart rule on B⁴ around the bubble center `p` with scale `lambda`.
    pub fn bubble(p: P4, lambda: f64, grid: &BubbleGrid) -> Self {
        let s3 = S3Rule::new(grid.s3_l);
        let rb = grid.split * lambda;
        let base = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0];
        let mut bubble_breaks: Vec<f64> = vec![0.0];
        bubble_breaks.extend(base.iter().map(|b| b * lambda).filter(|b| *b < rb));
        bubble_breaks.push(rb);

        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (d, wd) in s3.dirs.iter().zip(&s3.weights) {
            let rmax = ray_exit(&p, d);
            let br: Vec<f64> = bubble_breaks.iter().map(|b| b.min(rmax)).collect();
            push_radial(&mut nodes, &mut weights, &p, d, *wd, &br, grid.panel_points);
        }
        let nb = nodes.len();
        for (d, wd) in s3.dirs.iter().zip(&s3.weights) {
            let rmax = ray_exit(&p, d);
            if rmax <= rb {
                continue;
            }
            let ratio = (rmax / rb).powf(1.0 / grid.background_panels as f64);
            let br: Vec<f64> = (0..=grid.background_panels)
                .map(|k| {
                    if k == grid.background_panels {
                        rmax
                    } else {
                        rb * ratio.powi(k as i32)
                    }
                })
                .collect();
            push_radial(&mut nodes, &mut weights, &p, d, *wd, &br, grid.panel_points);
        }
        let n = nodes.len();
        ChartQuadrature {
            nodes,
            weights,
            charts: vec![
                Chart {
                    region: Region::Bubble { radius: rb },
                    range: 0..nb,
                },
                Chart {
                    region: Region::Background { inner: rb },
                    range: nb..n,
                },
            ],
            center: p,
            scale: lambda,
        }
    }

    /// Rule on all of ℝ⁴: a bubble chart `|x − p| < split·λ` and an outer chart
    /// integrated in `u = 1/|x − p|`.
    pub fn r4(p: P4, lambda: f64, grid: &BubbleGrid) -> Self {
        let s3 = S3Rule::new(grid.s3_l);
        let rb = grid.split * lambda;
        let mut breaks: Vec<f64> = vec![0.0];
        breaks.extend(
            [0.25, 0.5, 1.0, 2.0, 4.0]
                .iter()
                .map(|b| b * lambda)
                .filter(|b| *b < rb),
        );
        breaks.push(rb);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (d, wd) in s3.dirs.iter().zip(&s3.weights) {
            push_radial(&mut nodes, &mut weights, &p, d, *wd, &breaks, grid.panel_points);
        }
        let ni = nodes.len();
        let umax = 1.0 / rb;
        let ubreaks: Vec<f64> = (0..=grid.background_panels)
            .map(|k| umax * k as f64 / grid.background_panels as f64)
            .collect();
        for (d, wd) in s3.dirs.iter().zip(&s3.weights) {
            for win in ubreaks.windows(2) {
                for (u, wu) in gauss_interval(grid.panel_points, win[0], win[1]) {
                    let r = 1.0 / u;
                    nodes.push(std::array::from_fn(|i| p[i] + r * d[i]));
                    weights.push(wd * wu * r.powi(5));
                }
            }
        }
        let n = nodes.len();
        ChartQuadrature {
            nodes,
            weights,
            charts: vec![
                Chart {
                    region: Region::Inner { radius: rb },
                    range: 0..ni,
                },
                Chart {
                    region: Region::Outer { radius: rb },
                    range: ni..n,
                },
            ],
            center: p,
            scale: lambda,
        }
    }

    /// Hash of node coordinates and weights.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            for c in x {
                h.update(c.to_le_bytes());
            }
            h.update(w.to_le_bytes());
        }
        format!("{:x}", h.finalize())[..16].to_string()
    }

    /// Distance of each node from the chart center.
    pub fn radii(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|x| (0..4).map(|i| (x[i] - self.center[i]).powi(2)).sum::<f64>().sqrt())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;

    fn monomial(x: &P4, e: [i32; 4]) -> f64 {
        (0..4).map(|i| x[i].powi(e[i])).product()
    }

    /// `∫_{S³} x^α dσ` for even exponents via the Gamma-function formula.
    fn sphere_moment(e: [i32; 4]) -> f64 {
        if e.iter().any(|v| v % 2 == 1) {
            return 0.0;
        }
        let g = |v: f64| libm_gamma(v);
        let b: Vec<f64> = e.iter().map(|&k| (k as f64 + 1.0) / 2.0).collect();
        2.0 * b.iter().map(|&v| g(v)).product::<f64>() / g(b.iter().sum())
    }

    fn libm_gamma(v: f64) -> f64 {
        // Only half-integers and integers appear here.
        if (v - v.round()).abs() < 1e-12 {
            (1..v.round() as i64).map(|k| k as f64).product()
        } else {
            let mut r = PI.sqrt();
            let mut t = 0.5;
            while t < v - 1e-12 {
                r *= t;
                t += 1.0;
            }
            r
        }
    }

    #[test]
    fn s3_rule_exactness() {
        let l = 5;
        let s = S3Rule::new(l);
        assert!((s.weights.iter().sum::<f64>() - 2.0 * PI * PI).abs() < 1e-12);
        for e in [
            [2, 0, 0, 0],
            [0, 2, 2, 0],
            [4, 2, 0, 4],
            [1, 1, 0, 0],
            [6, 0, 2, 2],
            [3, 0, 0, 0],
        ] {
            let q: f64 = s.dirs.iter().zip(&s.weights).map(|(d, w)| w * monomial(d, e)).sum();
            assert!((q - sphere_moment(e)).abs() < 1e-12, "{e:?}: {q}");
        }
    }

    #[test]
    fn ball_volume() {
        let q = ChartQuadrature::ball(6, &S3Rule::new(3));
        assert!((q.total_weight() - PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn bubble_volume_and_polynomials() {
        let p = [0.3, -0.1, 0.2, 0.05];
        let q = ChartQuadrature::bubble(p, 0.05, &BubbleGrid::default());
        let vol = PI * PI / 2.0;
        assert!((q.total_weight() - vol).abs() / vol < 1e-3);
        assert!(q.weights.iter().all(|w| *w > 0.0));
        // ∫_{B⁴} |x|² = 2π² / 6.
        let m2 = integrate(&q.weights, |i| q.nodes[i].iter().map(|v| v * v).sum());
        assert!((m2 - PI * PI / 3.0).abs() < 1e-6);
        assert!(q
            .nodes
            .iter()
            .all(|x| x.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-12));
    }

    #[test]
    fn r4_integrates_decaying_radial_function() {
        // ∫_{ℝ⁴} (1 + |x|²)⁻⁴ = 2π² · 1/12.
        let q = ChartQuadrature::r4([0.0; 4], 1.0, &BubbleGrid::default());
        let v = integrate(&q.weights, |i| {
            let r2: f64 = q.nodes[i].iter().map(|v| v * v).sum();
            (1.0 + r2).powi(-4)
        });
        assert!((v - PI * PI / 6.0).abs() < 1e-10, "{v}");
    }
}
