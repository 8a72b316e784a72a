//! Composite log-moneyness grid and the finite-difference stencils on it.

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    /// Ratio of successive steps in the outer jump wings.
    pub wing_ratio: f64,
    /// Maximum number of wing nodes per side.
    pub wing_budget: usize,
    pub max_nodes: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { wing_ratio: 1.5, wing_budget: 30, max_nodes: 1 << 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeGrid {
    pub nodes: Vec<f64>,
    /// Inclusive index range of the diffusion window.
    pub inner: (usize, usize),
    /// `steps[j] = nodes[j+1] - nodes[j]`.
    pub steps: Vec<f64>,
    pub uniform: bool,
    /// Step of the diffusion window.
    pub h: f64,
}

impl CompositeGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn inner_len(&self) -> usize {
        self.inner.1 - self.inner.0 + 1
    }

    /// Uniform grid of `n` nodes centred at `center` (no wings).
    pub fn uniform(n: usize, h: f64, center: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Grid(format!("a grid needs at least 3 nodes, got {n}")));
        }
        if !(h > 0.0) {
            return Err(Error::Grid(format!("step must be positive, got {h}")));
        }
        let mid = (n - 1) as f64 / 2.0;
        let nodes: Vec<f64> = (0..n).map(|i| center + (i as f64 - mid) * h).collect();
        Ok(CompositeGrid { nodes, inner: (0, n - 1), steps: vec![h; n - 1], uniform: true, h })
    }

    /// Linear interpolation of `values` at `x`; clamps to the end values outside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        assert_eq!(values.len(), self.len());
        let k = self.nodes.partition_point(|&v| v <= x);
        if k == 0 {
            return values[0];
        }
        if k == self.len() {
            return values[self.len() - 1];
        }
        let (x0, x1) = (self.nodes[k - 1], self.nodes[k]);
        let w = (x - x0) / (x1 - x0);
        values[k - 1] * (1.0 - w) + values[k] * w
    }
}

/// Uniform window of step `h` spanning `width` around `center`, with geometric
/// wings out to `jump_extension` beyond each end of the window.
pub fn build_grid(h: f64, width: f64, jump_extension: f64, center: f64) -> Result<CompositeGrid> {
    build_grid_with(h, width, jump_extension, center, &GridOptions::default())
}

pub fn build_grid_with(
    h: f64,
    width: f64,
    jump_extension: f64,
    center: f64,
    opts: &GridOptions,
) -> Result<CompositeGrid> {
    if !(h > 0.0 && width > 0.0) {
        return Err(Error::Grid(format!("need h > 0 and width > 0, got h = {h}, width = {width}")));
    }
    if !(jump_extension >= 0.0) {
        return Err(Error::Grid(format!("jump extension must be >= 0, got {jump_extension}")));
    }
    let intervals = (width / h).round();
    if intervals > opts.max_nodes as f64 {
        return Err(Error::Capacity { requested: intervals as usize + 1, limit: opts.max_nodes });
    }
    let n_inner = intervals as usize + 1;
    let inner = CompositeGrid::uniform(n_inner, h, center)?;
    if jump_extension == 0.0 {
        return Ok(inner);
    }

    let mut wing = Vec::new();
    let mut offset = 0.0;
    let mut step = h;
    while offset < jump_extension && wing.len() < opts.wing_budget {
        step *= opts.wing_ratio;
        let next = offset + step;
        if next >= jump_extension {
            // land on the extension; fold a sliver into the previous step
            if jump_extension - offset < 0.5 * step && !wing.is_empty() {
                wing.pop();
            }
            wing.push(jump_extension);
            break;
        }
        wing.push(next);
        offset = next;
    }
    let total = n_inner + 2 * wing.len();
    if total > opts.max_nodes {
        return Err(Error::Capacity { requested: total, limit: opts.max_nodes });
    }
    let left = inner.nodes[0];
    let right = inner.nodes[n_inner - 1];
    let mut nodes: Vec<f64> = wing.iter().rev().map(|o| left - o).collect();
    let lo = nodes.len();
    nodes.extend_from_slice(&inner.nodes);
    nodes.extend(wing.iter().map(|o| right + o));
    let steps: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let uniform = wing.is_empty();
    Ok(CompositeGrid { nodes, inner: (lo, lo + n_inner - 1), steps, uniform, h })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilKind {
    /// First-order forward difference.
    F,
    /// First-order backward difference.
    B,
    /// Central first difference, `(F + B)/2`.
    C,
    /// Second-order one-sided forward difference, `[-3, 4, -1]/(2h)`.
    F2,
    /// Second-order one-sided backward difference, `[1, -4, 3]/(2h)`.
    B2,
    /// Central second difference.
    C2,
}

/// Difference matrix of the given kind. Rows near the ends reference nodes past
/// the grid; those values are taken as zero, so every matrix is the truncation of
/// its bi-infinite Toeplitz stencil.
pub fn build_stencil(kind: StencilKind, grid: &CompositeGrid) -> Result<BandedMatrix> {
    let n = grid.len();
    if n < 3 {
        return Err(Error::Grid(format!("a stencil needs at least 3 nodes, got {n}")));
    }
    if !grid.uniform {
        return nonuniform_stencil(kind, grid);
    }
    let h = grid.h;
    let m = match kind {
        StencilKind::F => {
            let mut m = BandedMatrix::zeros(n, 0, 1);
            for i in 0..n {
                m.set(i, i, -1.0 / h);
                if i + 1 < n {
                    m.set(i, i + 1, 1.0 / h);
                }
            }
            m
        }
        StencilKind::B => {
            let mut m = BandedMatrix::zeros(n, 1, 0);
            for i in 0..n {
                m.set(i, i, 1.0 / h);
                if i > 0 {
                    m.set(i, i - 1, -1.0 / h);
                }
            }
            m
        }
        StencilKind::C => {
            let mut m = BandedMatrix::zeros(n, 1, 1);
            for i in 0..n {
                if i > 0 {
                    m.set(i, i - 1, -0.5 / h);
                }
                if i + 1 < n {
                    m.set(i, i + 1, 0.5 / h);
                }
            }
            m
        }
        StencilKind::B2 => {
            let mut m = BandedMatrix::zeros(n, 2, 0);
            for i in 0..n {
                m.set(i, i, 1.5 / h);
                if i >= 1 {
                    m.set(i, i - 1, -2.0 / h);
                }
                if i >= 2 {
                    m.set(i, i - 2, 0.5 / h);
                }
            }
            m
        }
        StencilKind::F2 => build_stencil(StencilKind::B2, grid)?.transpose().scale(-1.0),
        StencilKind::C2 => {
            let mut m = BandedMatrix::zeros(n, 1, 1);
            let h2 = h * h;
            for i in 0..n {
                m.set(i, i, -2.0 / h2);
                if i > 0 {
                    m.set(i, i - 1, 1.0 / h2);
                }
                if i + 1 < n {
                    m.set(i, i + 1, 1.0 / h2);
                }
            }
            m
        }
    };
    Ok(m)
}

fn nonuniform_stencil(kind: StencilKind, grid: &CompositeGrid) -> Result<BandedMatrix> {
    let n = grid.len();
    let s = &grid.steps;
    // step to the right / left of node i; a missing neighbour reuses the adjacent step
    let right = |i: usize| if i + 1 < n { s[i] } else { s[n - 2] };
    let left = |i: usize| if i > 0 { s[i - 1] } else { s[0] };
    let fwd = || {
        let mut m = BandedMatrix::zeros(n, 0, 1);
        for i in 0..n {
            m.set(i, i, -1.0 / right(i));
            if i + 1 < n {
                m.set(i, i + 1, 1.0 / right(i));
            }
        }
        m
    };
    let bwd = || {
        let mut m = BandedMatrix::zeros(n, 1, 0);
        for i in 0..n {
            m.set(i, i, 1.0 / left(i));
            if i > 0 {
                m.set(i, i - 1, -1.0 / left(i));
            }
        }
        m
    };
    match kind {
        StencilKind::F => Ok(fwd()),
        StencilKind::B => Ok(bwd()),
        StencilKind::C => Ok(fwd().combine(0.5, &bwd(), 0.5)),
        StencilKind::C2 => {
            let mut m = BandedMatrix::zeros(n, 1, 1);
            for i in 0..n {
                let (hl, hr) = (left(i), right(i));
                let k = 2.0 / (hl + hr);
                m.set(i, i, -k * (1.0 / hl + 1.0 / hr));
                if i > 0 {
                    m.set(i, i - 1, k / hl);
                }
                if i + 1 < n {
                    m.set(i, i + 1, k / hr);
                }
            }
            Ok(m)
        }
        StencilKind::F2 | StencilKind::B2 => {
            Err(Error::Grid(format!("{kind:?} stencil requires a uniform grid")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WIDTH: f64 = 13.815510557964274; // ln 1e6

    #[test]
    fn ladder_node_counts() {
        for (h, n) in [
            (0.2763100, 51),
            (0.1381550, 101),
            (0.0690776, 201),
            (0.0345388, 401),
            (0.0172694, 801),
            (0.0086347, 1601),
        ] {
            let g = build_grid(h, WIDTH, 0.0, 0.0).unwrap();
            assert_eq!(g.len(), n);
            assert!(g.uniform);
            assert!(((n - 1) as f64 * h - WIDTH).abs() < 1e-4);
            // the strike node x = 0 sits on the grid
            assert_eq!(g.nodes[(n - 1) / 2], 0.0);
        }
    }

    #[test]
    fn degenerate_and_capacity() {
        assert!(matches!(build_grid(1.0, 1.0, 0.0, 0.0), Err(Error::Grid(_))));
        let opts = GridOptions { max_nodes: 100, ..GridOptions::default() };
        assert!(matches!(build_grid_with(0.01, 10.0, 0.0, 0.0, &opts), Err(Error::Capacity { .. })));
    }

    #[test]
    fn wings_are_geometric_and_contain_the_window() {
        let g = build_grid(0.1, 2.0, 5.0, 0.3).unwrap();
        assert!(!g.uniform);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        let (lo, hi) = g.inner;
        let window = build_grid(0.1, 2.0, 0.0, 0.3).unwrap();
        assert_eq!(&g.nodes[lo..=hi], &window.nodes[..]);
        assert!((g.nodes[0] - (window.nodes[0] - 5.0)).abs() < 1e-12);
        assert!((g.nodes[g.len() - 1] - (window.nodes[window.len() - 1] + 5.0)).abs() < 1e-12);
        assert!(g.steps[hi] > g.h && g.steps[hi + 1] > g.steps[hi]);
        assert!(matches!(build_stencil(StencilKind::B2, &g), Err(Error::Grid(_))));
    }

    fn apply(kind: StencilKind, g: &CompositeGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let v: Vec<f64> = g.nodes.iter().map(|&x| f(x)).collect();
        build_stencil(kind, g).unwrap().matvec(&v)
    }

    #[test]
    fn exact_on_polynomials() {
        let g = CompositeGrid::uniform(11, 1.0, 0.0).unwrap();
        let c = apply(StencilKind::C, &g, |x| x);
        assert!(c[1..10].iter().all(|&v| v == 1.0));
        for h in [0.37, 0.01, 2.5] {
            let g = CompositeGrid::uniform(9, h, 0.4).unwrap();
            let c2 = apply(StencilKind::C2, &g, |x| x * x);
            assert!(c2[1..8].iter().all(|&v| (v - 2.0).abs() < 1e-9 / (h * h)));
        }
        let g = build_grid(0.2, 2.0, 3.0, 0.0).unwrap();
        let c2 = apply(StencilKind::C2, &g, |x| x * x);
        assert!(c2[1..g.len() - 1].iter().all(|&v| (v - 2.0).abs() < 1e-10));
        let c = apply(StencilKind::C, &g, |x| 3.0 * x - 1.0);
        assert!(c[1..g.len() - 1].iter().all(|&v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn b2_rows_and_second_order() {
        let g = CompositeGrid::uniform(7, 0.5, 0.0).unwrap();
        let m = build_stencil(StencilKind::B2, &g).unwrap();
        assert_eq!((m.get(4, 2), m.get(4, 3), m.get(4, 4)), (1.0, -4.0, 3.0));
        // e^x derivative: error ratio under halving approaches 4
        let err = |n: usize, h: f64| {
            let g = CompositeGrid::uniform(n, h, 0.0).unwrap();
            let d = apply(StencilKind::B2, &g, f64::exp);
            let i = (n - 1) / 2;
            (d[i] - 1.0).abs()
        };
        let ratio = err(21, 0.1) / err(41, 0.05);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
        let f = apply(StencilKind::F2, &CompositeGrid::uniform(41, 0.05, 0.0).unwrap(), f64::exp);
        assert!((f[20] - 1.0).abs() < 2e-3);
    }

    #[test]
    fn bandwidths_and_branch_transpose() {
        let g = CompositeGrid::uniform(12, 0.3, 0.0).unwrap();
        let bw = |k| build_stencil(k, &g).unwrap().bandwidths();
        assert!(bw(StencilKind::F) <= (1, 1));
        assert!(bw(StencilKind::B) <= (1, 1));
        assert_eq!(bw(StencilKind::C), (1, 1));
        assert_eq!(bw(StencilKind::B2), (2, 0));
        assert_eq!(bw(StencilKind::F2), (0, 2));
        assert_eq!(bw(StencilKind::C2), (1, 1));
        let b2 = build_stencil(StencilKind::B2, &g).unwrap();
        let f2 = build_stencil(StencilKind::F2, &g).unwrap();
        assert_eq!(f2, b2.transpose().scale(-1.0));
        let c2 = build_stencil(StencilKind::C2, &g).unwrap();
        assert_eq!(c2, c2.transpose());
    }

    proptest! {
        #[test]
        fn interior_rows_annihilate_constants(n in 5usize..40, h in 1e-3f64..1.0, c in -10.0f64..10.0) {
            let g = CompositeGrid::uniform(n, h, 0.0).unwrap();
            for k in [StencilKind::F, StencilKind::B, StencilKind::C, StencilKind::F2, StencilKind::B2, StencilKind::C2] {
                let d = build_stencil(k, &g).unwrap().matvec(&vec![c; n]);
                for v in &d[2..n - 2] {
                    prop_assert!(v.abs() <= 1e-9 * c.abs() / (h * h));
                }
            }
        }

        #[test]
        fn central_identities(n in 5usize..40, h in 1e-3f64..1.0) {
            let g = CompositeGrid::uniform(n, h, 0.0).unwrap();
            let f = build_stencil(StencilKind::F, &g).unwrap();
            let b = build_stencil(StencilKind::B, &g).unwrap();
            let c = build_stencil(StencilKind::C, &g).unwrap();
            let c2 = build_stencil(StencilKind::C2, &g).unwrap();
            prop_assert_eq!(&f.combine(0.5, &b, 0.5), &c);
            let fb = f.mul(&b);
            for i in 1..n - 1 {
                for j in 0..n {
                    prop_assert!((fb.get(i, j) - c2.get(i, j)).abs() <= 1e-12 / (h * h));
                }
            }
        }

        #[test]
        fn nonuniform_central_is_average(h in 0.01f64..0.5, ext in 0.1f64..5.0) {
            let g = build_grid(h, 20.0 * h, ext, 0.0).unwrap();
            let f = build_stencil(StencilKind::F, &g).unwrap();
            let b = build_stencil(StencilKind::B, &g).unwrap();
            let c = build_stencil(StencilKind::C, &g).unwrap();
            prop_assert_eq!(f.combine(0.5, &b, 0.5), c);
        }
    }
}
