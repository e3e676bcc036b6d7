//! Dyadic cubes, shifted dyadic grids, the bounded computation domain, and
//! exact integration of grid functions.
//!
//! The domain is the half-open box [0, 2^K)^n split into finest cells of side
//! 2^{cell_exp}. A shifted grid with per-axis digits t ∈ {0,1,2} consists of
//! the cubes 2^k (j + [0,1)^n + (−1)^k t/3); consecutive generations of one
//! grid nest, every generation partitions ℝ^n, and together the 3^n grids
//! cover every axis-parallel cube Q by some Q₀ with ℓ(Q₀) ≤ 3 ℓ(Q).
//!
//! All positions are handled in integer "third units" of 2^{cell_exp}/3: cell
//! c occupies [3c, 3c+3) and a generation-k cube occupies
//! [P(3j+σ), P(3j+σ+3)) with P = 2^{k−cell_exp} and σ = (−1)^k t, so
//! containment tests are exact.

use crate::ksum::NeumaierSum;
use crate::{Error, Result};

/// Largest allowed value of n·(box_exp − cell_exp); caps the cell count.
const MAX_TOTAL_LEVELS: i32 = 26;
/// Cubes coarser than cell_exp + MAX_GEN_SPAN overflow the integer layout.
const MAX_GEN_SPAN: i32 = 58;

/// Bounded dyadic computation domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domain {
    dim: u8,
    box_exp: i32,
    cell_exp: i32,
}

impl Domain {
    pub fn new(dim: u8, box_exp: i32, cell_exp: i32) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let levels = box_exp - cell_exp;
        if levels < 1 {
            return Err(Error::InvalidDomain(format!(
                "box_exp ({box_exp}) must exceed cell_exp ({cell_exp})"
            )));
        }
        if levels * dim as i32 > MAX_TOTAL_LEVELS {
            return Err(Error::InvalidDomain(format!(
                "2^{} cells exceed the addressable budget",
                levels * dim as i32
            )));
        }
        if box_exp.abs() > 500 || cell_exp.abs() > 500 {
            return Err(Error::InvalidDomain("exponents out of range".into()));
        }
        Ok(Self { dim, box_exp, cell_exp })
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn box_exp(&self) -> i32 {
        self.box_exp
    }

    pub fn cell_exp(&self) -> i32 {
        self.cell_exp
    }

    /// Cells per axis, 2^{box_exp − cell_exp}.
    pub fn cells_per_axis(&self) -> usize {
        1usize << (self.box_exp - self.cell_exp)
    }

    pub fn n_cells(&self) -> usize {
        self.cells_per_axis().pow(self.dim as u32)
    }

    /// Volume of one cell, 2^{n·cell_exp}; exactly representable.
    pub fn cell_vol(&self) -> f64 {
        exp2i(self.dim as i32 * self.cell_exp)
    }

    /// Default generation range for maximal-operator suprema and cube scans:
    /// [cell_exp, box_exp + 2]. Two extra generations suffice because every
    /// shifted grid has a cube containing the whole box at box_exp + 2, and
    /// coarser ancestors only dilute averages of functions supported here.
    pub fn default_gen_range(&self) -> (i32, i32) {
        (self.cell_exp, self.box_exp + 2)
    }

    /// Number of shifted grids, 3^n.
    pub fn n_grids(&self) -> usize {
        3usize.pow(self.dim as u32)
    }

    /// Decompose a flat row-major cell index into per-axis coordinates
    /// (axis 0 slowest, axis dim−1 fastest).
    pub fn cell_coords(&self, flat: usize) -> [usize; 3] {
        let n = self.cells_per_axis();
        let mut out = [0usize; 3];
        let mut rest = flat;
        for a in (0..self.dim as usize).rev() {
            out[a] = rest % n;
            rest /= n;
        }
        out
    }

    /// Flat row-major index of per-axis coordinates.
    pub fn flat_index(&self, coords: &[usize]) -> usize {
        let n = self.cells_per_axis();
        let mut flat = 0usize;
        for a in 0..self.dim as usize {
            flat = flat * n + coords[a];
        }
        flat
    }
}

/// Exact 2^e as f64.
pub fn exp2i(e: i32) -> f64 {
    f64::powi(2.0, e)
}

/// Shift descriptor for one of the 3^n grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShift {
    id: usize,
    digits: [u8; 3],
    dim: u8,
}

impl GridShift {
    /// Per-axis digit t ∈ {0,1,2}.
    pub fn digit(&self, axis: usize) -> u8 {
        self.digits[axis]
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Integer shift numerator σ = (−1)^gen · t for an axis; the geometric
    /// shift of generation-`gen` cubes is σ·2^gen/3.
    pub fn sigma(&self, axis: usize, gen: i32) -> i64 {
        let t = self.digits[axis] as i64;
        if gen.rem_euclid(2) == 0 {
            t
        } else {
            -t
        }
    }
}

/// The 3^n grid shift descriptors: grid id = Σ t_a · 3^a.
pub fn shifted_grids(dim: u8) -> Result<Vec<GridShift>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let n = 3usize.pow(dim as u32);
    let mut out = Vec::with_capacity(n);
    for id in 0..n {
        let mut digits = [0u8; 3];
        let mut rest = id;
        for d in digits.iter_mut().take(dim as usize) {
            *d = (rest % 3) as u8;
            rest /= 3;
        }
        out.push(GridShift { id, digits, dim });
    }
    Ok(out)
}

fn grid_shift(dim: u8, id: usize) -> Result<GridShift> {
    let grids = shifted_grids(dim)?;
    grids
        .get(id)
        .copied()
        .ok_or_else(|| Error::BadParameter(format!("grid id {id} out of range for dim {dim}")))
}

/// A cube of one shifted dyadic grid: side 2^gen, lower corner
/// 2^gen (coords + (−1)^gen t/3) per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicCube {
    pub grid: usize,
    pub gen: i32,
    pub coords: [i64; 3],
}

impl DyadicCube {
    pub fn new(grid: usize, gen: i32, coords: [i64; 3]) -> Self {
        Self { grid, gen, coords }
    }

    pub fn side(&self) -> f64 {
        exp2i(self.gen)
    }

    /// Volume 2^{n·gen}.
    pub fn volume(&self, dim: u8) -> f64 {
        exp2i(self.gen * dim as i32)
    }

    /// Geometric lower corner.
    pub fn lower(&self, dim: u8) -> Result<[f64; 3]> {
        let shift = grid_shift(dim, self.grid)?;
        let mut lo = [0.0; 3];
        for a in 0..dim as usize {
            let sigma = shift.sigma(a, self.gen) as f64;
            lo[a] = exp2i(self.gen) * (self.coords[a] as f64 + sigma / 3.0);
        }
        Ok(lo)
    }

    /// Parent cube within the same grid.
    pub fn parent(&self, dim: u8) -> Result<DyadicCube> {
        let shift = grid_shift(dim, self.grid)?;
        let mut coords = [0i64; 3];
        for a in 0..dim as usize {
            let sigma = shift.sigma(a, self.gen);
            coords[a] = (self.coords[a] + sigma).div_euclid(2);
        }
        Ok(DyadicCube { grid: self.grid, gen: self.gen + 1, coords })
    }

    /// The 2^n children within the same grid.
    pub fn children(&self, dim: u8) -> Result<Vec<DyadicCube>> {
        let shift = grid_shift(dim, self.grid)?;
        let child_gen = self.gen - 1;
        let mut base = [0i64; 3];
        for a in 0..dim as usize {
            // Child coords j satisfy 2 j_parent ≤ j + σ_child t ≤ 2 j_parent + 1.
            let sigma = shift.sigma(a, child_gen);
            base[a] = 2 * self.coords[a] - sigma;
        }
        let mut out = Vec::with_capacity(1 << dim);
        for mask in 0..(1usize << dim) {
            let mut coords = base;
            for a in 0..dim as usize {
                coords[a] += ((mask >> a) & 1) as i64;
            }
            out.push(DyadicCube { grid: self.grid, gen: child_gen, coords });
        }
        Ok(out)
    }

    /// Per-axis extent in third units of 2^{cell_exp}/3 (exact integers).
    pub fn extent3(&self, d: &Domain) -> Result<[(i64, i64); 3]> {
        let span = self.gen - d.cell_exp;
        if span < 0 {
            return Err(Error::CubeTooFine);
        }
        if span > MAX_GEN_SPAN {
            return Err(Error::BadParameter(format!(
                "generation {} too coarse for the integer layout",
                self.gen
            )));
        }
        let shift = grid_shift(d.dim, self.grid)?;
        let p = 1i64 << span;
        let mut out = [(0i64, 0i64); 3];
        for a in 0..d.dim as usize {
            let sigma = shift.sigma(a, self.gen);
            let lo = p * (3 * self.coords[a] + sigma);
            out[a] = (lo, lo + 3 * p);
        }
        Ok(out)
    }

    /// Set containment of half-open cubes (any grids), exact.
    pub fn contains(&self, other: &DyadicCube, d: &Domain) -> Result<bool> {
        let big = self.extent3(d)?;
        let small = other.extent3(d)?;
        Ok((0..d.dim as usize).all(|a| big[a].0 <= small[a].0 && small[a].1 <= big[a].1))
    }

    /// Strict set containment.
    pub fn contains_strictly(&self, other: &DyadicCube, d: &Domain) -> Result<bool> {
        Ok(self.contains(other, d)? && self.extent3(d)? != other.extent3(d)?)
    }

    pub fn intersects(&self, other: &DyadicCube, d: &Domain) -> Result<bool> {
        let x = self.extent3(d)?;
        let y = other.extent3(d)?;
        Ok((0..d.dim as usize).all(|a| x[a].0 < y[a].1 && y[a].0 < x[a].1))
    }

    /// Compact display form `grid:gen:c0[,c1[,c2]]`.
    pub fn label(&self, dim: u8) -> String {
        let coords: Vec<String> =
            (0..dim as usize).map(|a| self.coords[a].to_string()).collect();
        format!("{}:{}:{}", self.grid, self.gen, coords.join(","))
    }
}

/// Per-axis ranges of finest cells whose closure lies inside a cube clipped
/// to the domain box.
#[derive(Debug, Clone, Copy)]
pub struct CellBox {
    dim: u8,
    lo: [usize; 3],
    hi: [usize; 3],
}

impl CellBox {
    pub fn is_empty(&self) -> bool {
        (0..self.dim as usize).any(|a| self.lo[a] >= self.hi[a])
    }

    pub fn count(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        (0..self.dim as usize).map(|a| self.hi[a] - self.lo[a]).product()
    }

    pub fn axis_range(&self, a: usize) -> std::ops::Range<usize> {
        self.lo[a]..self.hi[a]
    }

    /// Visit flat cell indices in row-major (ascending) order.
    pub fn for_each(&self, d: &Domain, mut f: impl FnMut(usize)) {
        if self.is_empty() {
            return;
        }
        let n = d.cells_per_axis();
        match d.dim {
            1 => {
                for c0 in self.lo[0]..self.hi[0] {
                    f(c0);
                }
            }
            2 => {
                for c0 in self.lo[0]..self.hi[0] {
                    let row = c0 * n;
                    for c1 in self.lo[1]..self.hi[1] {
                        f(row + c1);
                    }
                }
            }
            3 => {
                for c0 in self.lo[0]..self.hi[0] {
                    for c1 in self.lo[1]..self.hi[1] {
                        let row = (c0 * n + c1) * n;
                        for c2 in self.lo[2]..self.hi[2] {
                            f(row + c2);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn indices(&self, d: &Domain) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.count());
        self.for_each(d, |i| out.push(i));
        out
    }
}

/// The finest cells whose interiors lie inside Q ∩ [0, 2^K)^n.
///
/// Cells cut by the boundary of a shifted cube are excluded; integrals over
/// such cubes count whole cells only.
pub fn cells_of(d: &Domain, cube: &DyadicCube) -> Result<CellBox> {
    let ext = cube.extent3(d)?;
    let n = d.cells_per_axis() as i64;
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..d.dim as usize {
        let (l3, h3) = ext[a];
        // Cell c is inside iff 3c ≥ l3 and 3(c+1) ≤ h3.
        let c_lo = ceil_div(l3, 3).max(0);
        let c_hi = h3.div_euclid(3).min(n);
        lo[a] = c_lo.max(0) as usize;
        hi[a] = c_hi.max(c_lo.max(0)) as usize;
    }
    Ok(CellBox { dim: d.dim, lo, hi })
}

#[inline]
fn ceil_div(a: i64, b: i64) -> i64 {
    // b > 0 everywhere we use this
    -((-a).div_euclid(b))
}

/// Nonnegative piecewise-constant function on the finest cells, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: Domain,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.n_cells() {
            return Err(Error::InvalidDomain(format!(
                "expected {} values, got {}",
                domain.n_cells(),
                values.len()
            )));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::BadCellValue { index, value });
            }
        }
        Ok(Self { domain, values })
    }

    pub fn constant(domain: Domain, c: f64) -> Result<Self> {
        Self::new(domain, vec![c; domain.n_cells()])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    /// Apply a cellwise map; the result must stay nonnegative and finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
        GridFunction::new(self.domain, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Cellwise product.
    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        assert_eq!(self.domain, other.domain);
        GridFunction::new(
            self.domain,
            self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        )
    }

    /// Split every cell 2^n ways per level; represents the same function on a
    /// finer grid, exactly.
    pub fn refine(&self, levels: u32) -> Result<GridFunction> {
        let mut dom = self.domain;
        let mut vals = self.values.clone();
        for _ in 0..levels {
            let fine = Domain::new(dom.dim, dom.box_exp, dom.cell_exp - 1)?;
            let n_coarse = dom.cells_per_axis();
            let mut out = vec![0.0; fine.n_cells()];
            for (flat, slot) in out.iter_mut().enumerate() {
                let fc = fine.cell_coords(flat);
                let mut cc = [0usize; 3];
                for a in 0..dom.dim as usize {
                    cc[a] = fc[a] / 2;
                    debug_assert!(cc[a] < n_coarse);
                }
                *slot = vals[dom.flat_index(&cc[..dom.dim as usize])];
            }
            dom = fine;
            vals = out;
        }
        GridFunction::new(dom, vals)
    }

    /// Exact integral over the whole box.
    pub fn total(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        for &v in &self.values {
            acc.add(v);
        }
        acc.total() * self.domain.cell_vol()
    }
}

/// Exact integral of `f` over the cells of `cube`, in fixed row-major order.
pub fn integrate(f: &GridFunction, cube: &DyadicCube) -> Result<f64> {
    let cells = cells_of(f.domain(), cube)?;
    let mut acc = NeumaierSum::new();
    cells.for_each(f.domain(), |i| acc.add(f.values[i]));
    Ok(acc.total() * f.domain().cell_vol())
}

/// An arbitrary axis-parallel cube with positive side.
#[derive(Debug, Clone, Copy)]
pub struct RealCube {
    pub dim: u8,
    pub lo: [f64; 3],
    pub side: f64,
}

impl RealCube {
    pub fn from_dyadic(cube: &DyadicCube, dim: u8) -> Result<Self> {
        Ok(RealCube { dim, lo: cube.lower(dim)?, side: cube.side() })
    }
}

/// Find a shifted-dyadic cube Q₀ ⊇ Q with ℓ(Q₀) ≤ 3 ℓ(Q).
///
/// Scans generations from the smallest 2^g ≥ ℓ(Q) upward; by the one-third
/// covering argument a fit exists no later than the first g with
/// 2^g ≥ 3ℓ(Q)/2, so the side ratio never exceeds 3. Failure is a defect,
/// not an error condition.
pub fn cover_cube(q: &RealCube) -> Result<(usize, DyadicCube)> {
    if !(1..=3).contains(&q.dim) {
        return Err(Error::UnsupportedDimension(q.dim));
    }
    if !(q.side.is_finite() && q.side > 0.0) || q.lo[..q.dim as usize].iter().any(|x| !x.is_finite())
    {
        return Err(Error::BadParameter("cube must be finite with positive side".into()));
    }
    let mut g0 = q.side.log2().ceil() as i32;
    while exp2i(g0) < q.side {
        g0 += 1;
    }
    let grids = shifted_grids(q.dim)?;
    for g in g0..=g0 + 2 {
        let side = exp2i(g);
        if side > 3.0 * q.side * (1.0 + 1e-12) {
            break;
        }
        for shift in &grids {
            let mut coords = [0i64; 3];
            let mut ok = true;
            for a in 0..q.dim as usize {
                let s = shift.sigma(a, g) as f64 / 3.0;
                let j = (q.lo[a] / side - s).floor();
                let cube_lo = side * (j + s);
                let cube_hi = side * (j + 1.0 + s);
                if !(cube_lo <= q.lo[a] && q.lo[a] + q.side <= cube_hi) {
                    ok = false;
                    break;
                }
                coords[a] = j as i64;
            }
            if ok {
                return Ok((shift.id(), DyadicCube::new(shift.id(), g, coords)));
            }
        }
    }
    panic!("one-third covering failed for side {}: defect", q.side);
}
