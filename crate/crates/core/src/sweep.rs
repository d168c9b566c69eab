//! Pair sweep shared by every σ-quadrature evaluation.
//!
//! Unordered node pairs `{i, j}` are enumerated through their doubled
//! midpoint `s = i + j` and difference `d = i - j` in index units. For a
//! fixed `s` the post-collision sample points `s/2 ± (|d|/2)σ` depend on `d`
//! only through `|d|²` when `b` is constant, so per-pair quantities that only
//! depend on those samples (a "class") are computed once per `(s, |d|²)` and
//! reused for every pair in it, in both orientations.
//!
//! Relative to the node `⌊s/2⌋` the sample points depend only on the parity
//! of `s`, on `|d|²` and on the sphere node, so their interpolation stencils
//! are tabulated once per plan.
//!
//! Work is split by `s_z`. Each slab accumulates into a private buffer and the
//! buffers are summed in slab order, so the result does not depend on the
//! execution policy or thread count.

use crate::exec::Exec;
use crate::grid::{Stencil, Vec3, VelocityGrid, INDEX_SLACK};
use crate::kernel::{direction, CollisionKernel, SphereQuadrature};

pub(crate) trait PairVisitor: Sync {
    type Class: Copy + Default + Send;

    fn channels(&self) -> usize;

    fn samples(&self) -> bool {
        true
    }

    /// Per-class quantity from the stencils of `(m + rσ_k, m - rσ_k)` (`None`
    /// outside the cube) and the weights `w_k b(ĝ·σ_k)` over hemisphere
    /// nodes. Variable-size data may be appended to `arena`.
    fn class(&self, st: &[[Option<Stencil>; 2]], wts: &[f64], arena: &mut Vec<f64>) -> Self::Class;

    /// Adds the contribution of the ordered pair `(v, v*)` to `out`, laid out
    /// channel-major. `kin` already includes `Δv³`.
    fn scatter(
        &self,
        class: &Self::Class,
        arena: &[f64],
        kin: f64,
        v: usize,
        vs: usize,
        out: &mut [f64],
    );
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    off: [i32; 3],
    t: Vec3,
}

const ABSENT: u32 = u32::MAX;

/// Everything about the sweep that depends only on grid, kernel and
/// quadrature.
#[derive(Debug, Clone)]
pub(crate) struct SweepPlan {
    n: usize,
    dirs: Vec<Vec3>,
    base_weights: Vec<f64>,
    kin: Vec<f64>,
    qcount: usize,
    start: Vec<u32>,
    entries: Vec<Entry>,
}

impl SweepPlan {
    pub(crate) fn new(grid: &VelocityGrid, kernel: &CollisionKernel, quad: &SphereQuadrature) -> Self {
        let (dirs, base_weights): (Vec<Vec3>, Vec<f64>) = quad
            .hemisphere()
            .iter()
            .map(|&k| (quad.nodes()[k], quad.weights()[k]))
            .unzip();
        let n = grid.n_per_axis();
        let qcount = 3 * (n - 1) * (n - 1) + 1;
        let dv = grid.spacing();
        let vol = grid.cell_volume();
        let kin = (0..qcount)
            .map(|q| kernel.speed_factor((q as f64).sqrt() * dv) * vol)
            .collect();

        // |d|² values reachable for each parity pattern of d (= parity of s)
        let m = n as i64 - 1;
        let mut reachable = vec![false; 8 * qcount];
        for dz in -m..=m {
            for dy in -m..=m {
                for dx in -m..=m {
                    let p = parity(dx, dy, dz);
                    let q = (dx * dx + dy * dy + dz * dz) as usize;
                    reachable[p * qcount + q] = true;
                }
            }
        }
        let mut start = vec![ABSENT; 8 * qcount];
        let mut entries = Vec::new();
        for p in 0..8 {
            let h = [(p & 1) as f64 * 0.5, ((p >> 1) & 1) as f64 * 0.5, ((p >> 2) & 1) as f64 * 0.5];
            for q in 0..qcount {
                if !reachable[p * qcount + q] {
                    continue;
                }
                start[p * qcount + q] = entries.len() as u32;
                let r = 0.5 * (q as f64).sqrt();
                for s in &dirs {
                    for sign in [1.0, -1.0] {
                        let rel = [h[0] + sign * r * s[0], h[1] + sign * r * s[1], h[2] + sign * r * s[2]];
                        let off = rel.map(|x| x.floor() as i32);
                        let t = [
                            rel[0] - off[0] as f64,
                            rel[1] - off[1] as f64,
                            rel[2] - off[2] as f64,
                        ];
                        entries.push(Entry { off, t });
                    }
                }
            }
        }
        Self {
            n,
            dirs,
            base_weights,
            kin,
            qcount,
            start,
            entries,
        }
    }

    pub(crate) fn run<V: PairVisitor>(
        &self,
        grid: &VelocityGrid,
        kernel: &CollisionKernel,
        visitor: &V,
        exec: Exec,
    ) -> Vec<f64> {
        debug_assert_eq!(grid.n_per_axis(), self.n);
        let slabs = 2 * self.n - 1;
        let size = visitor.channels() * grid.len();
        let parts = exec.map_collect(slabs, |sz| self.slab(grid, kernel, visitor, sz as i64));
        let mut out = vec![0.0; size];
        for part in parts {
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
        }
        out
    }

    #[inline]
    fn resolve(&self, e: &Entry, base: [i64; 3]) -> Option<Stencil> {
        let top = self.n as i64 - 2;
        let mut b = [0usize; 3];
        let mut t = e.t;
        for a in 0..3 {
            let x = base[a] + e.off[a] as i64;
            if x >= 0 && x <= top {
                b[a] = x as usize;
            } else if x == top + 1 && t[a] <= INDEX_SLACK {
                b[a] = top as usize;
                t[a] = 1.0;
            } else if x == -1 && t[a] >= 1.0 - INDEX_SLACK {
                b[a] = 0;
                t[a] = 0.0;
            } else {
                return None;
            }
        }
        Some(Stencil::new(self.n, b, t))
    }

    fn fill(&self, st: &mut [[Option<Stencil>; 2]], p: usize, q: usize, base: [i64; 3]) {
        let s0 = self.start[p * self.qcount + q] as usize;
        let entries = &self.entries[s0..s0 + 2 * st.len()];
        for (slot, pair) in st.iter_mut().zip(entries.chunks_exact(2)) {
            *slot = [self.resolve(&pair[0], base), self.resolve(&pair[1], base)];
        }
    }

    fn slab<V: PairVisitor>(
        &self,
        grid: &VelocityGrid,
        kernel: &CollisionKernel,
        visitor: &V,
        sz: i64,
    ) -> Vec<f64> {
        let n = self.n;
        let top = 2 * n as i64 - 2;
        let h = self.dirs.len();
        let iso = kernel.is_isotropic();
        let iso_weights: Vec<f64> = self.base_weights.iter().map(|w| w * kernel.b(0.0)).collect();
        let mut wts = iso_weights.clone();
        let mut out = vec![0.0; visitor.channels() * grid.len()];
        let mut stamp = vec![0u32; self.qcount];
        let mut cache = vec![V::Class::default(); self.qcount];
        let mut cur = 0u32;
        let mut arena = Vec::new();
        let mut st: Vec<[Option<Stencil>; 2]> = vec![[None, None]; h];
        let lim_z = sz.min(top - sz);
        let sampling = visitor.samples();

        for sy in 0..=top {
            let lim_y = sy.min(top - sy);
            for sx in 0..=top {
                let lim_x = sx.min(top - sx);
                cur += 1;
                arena.clear();
                let p = parity(sx, sy, sz);
                let base = [sx >> 1, sy >> 1, sz >> 1];
                let mut dz = lim_z % 2;
                while dz <= lim_z {
                    let mut dy = if dz == 0 { lim_y % 2 } else { -lim_y };
                    while dy <= lim_y {
                        let mut dx = if dz == 0 && dy == 0 { lim_x % 2 } else { -lim_x };
                        while dx <= lim_x {
                            let q = (dx * dx + dy * dy + dz * dz) as usize;
                            let class = if iso {
                                if stamp[q] == cur {
                                    cache[q]
                                } else {
                                    if sampling {
                                    self.fill(&mut st, p, q, base);
                                }
                                    let c = visitor.class(&st, &iso_weights, &mut arena);
                                    stamp[q] = cur;
                                    cache[q] = c;
                                    c
                                }
                            } else {
                                arena.clear();
                                if sampling {
                                    self.fill(&mut st, p, q, base);
                                }
                                let g = direction([dx as f64, dy as f64, dz as f64]);
                                for (k, w) in wts.iter_mut().enumerate() {
                                    let d = &self.dirs[k];
                                    let c = g[0] * d[0] + g[1] * d[1] + g[2] * d[2];
                                    *w = self.base_weights[k] * kernel.b(c);
                                }
                                visitor.class(&st, &wts, &mut arena)
                            };
                            let kin = self.kin[q];
                            let vi = grid.index(
                                ((sx + dx) / 2) as usize,
                                ((sy + dy) / 2) as usize,
                                ((sz + dz) / 2) as usize,
                            );
                            if q == 0 {
                                visitor.scatter(&class, &arena, kin, vi, vi, &mut out);
                            } else {
                                let vj = grid.index(
                                    ((sx - dx) / 2) as usize,
                                    ((sy - dy) / 2) as usize,
                                    ((sz - dz) / 2) as usize,
                                );
                                visitor.scatter(&class, &arena, kin, vi, vj, &mut out);
                                visitor.scatter(&class, &arena, kin, vj, vi, &mut out);
                            }
                            dx += 2;
                        }
                        dy += 2;
                    }
                    dz += 2;
                }
            }
        }
        out
    }
}

#[inline]
fn parity(x: i64, y: i64, z: i64) -> usize {
    ((x & 1) | ((y & 1) << 1) | ((z & 1) << 2)) as usize
}
