//! Luxemburg averages ‖f‖_{Φ,Q} and the maximal operators M_{Φ,D} (one
//! dyadic grid) and the (lower, upper) sandwich for M_Φ (all cubes).
//!
//! The Luxemburg average over a cube Q is the unique λ > 0 with
//! (1/|Q|) ∫_Q Φ(f/λ) = 1 (zero when f vanishes on Q). It is found by
//! bisection from the bracket [A, A·(1+log⁺(max_Q f / A))^{δ/r}] with
//! A = ((1/|Q|) ∫_Q f^r)^{1/r}; both endpoints sit on the correct side of
//! the modular because t^r ≤ Φ(t) and the log factor is monotone. For δ = 0
//! the bracket collapses, so the power case costs one pass.
//!
//! Normalization always uses the true cube volume |Q| = 2^{n·gen}; cubes of
//! shifted grids contribute only the cells wholly inside them.

use std::collections::HashMap;

use crate::geometry::{
    cells_of, exp2i, shifted_grids, CellBox, Domain, DyadicCube, GridFunction,
};
use crate::ksum::NeumaierSum;
use crate::young::YoungPhi;
use crate::{Error, Result};

/// Per-cell values of a maximal operator, with the evaluation metadata.
#[derive(Debug, Clone)]
pub struct MaximalField {
    pub domain: Domain,
    pub values: Vec<f64>,
    pub phi: YoungPhi,
    pub grids: Vec<usize>,
    pub gen_range: (i32, i32),
}

impl MaximalField {
    pub fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }
}

/// Value histogram of a function restricted to a cube: ascending distinct
/// values with multiplicities, zeros omitted.
#[derive(Debug, Clone, Default)]
struct Hist {
    entries: Vec<(f64, u64)>,
}

impl Hist {
    fn from_sorted_values(sorted: &[f64]) -> Self {
        let mut entries: Vec<(f64, u64)> = Vec::new();
        for &v in sorted {
            if v == 0.0 {
                continue;
            }
            match entries.last_mut() {
                Some((last, count)) if *last == v => *count += 1,
                _ => entries.push((v, 1)),
            }
        }
        Hist { entries }
    }

    fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn max_value(&self) -> f64 {
        self.entries.last().map_or(0.0, |&(v, _)| v)
    }

    /// (1/|Q|) Σ Φ(v/λ)·count·cell_vol, with scale = cell_vol/|Q|.
    fn modular(&self, phi: &YoungPhi, lambda: f64, scale: f64) -> f64 {
        let mut acc = NeumaierSum::new();
        for &(v, count) in &self.entries {
            acc.add(phi.eval(v / lambda) * count as f64);
        }
        acc.total() * scale
    }

    /// ((1/|Q|) Σ v^r·count·cell_vol)^{1/r}.
    fn r_mean(&self, phi: &YoungPhi, scale: f64) -> f64 {
        let mut acc = NeumaierSum::new();
        for &(v, count) in &self.entries {
            acc.add(phi.power_r(v) * count as f64);
        }
        let mean = acc.total() * scale;
        if phi.r() == 1.0 {
            mean
        } else {
            mean.powf(1.0 / phi.r())
        }
    }
}

/// Bisection core shared by every Luxemburg evaluation.
fn luxemburg_solve(hist: &Hist, scale: f64, phi: &YoungPhi) -> f64 {
    if hist.is_empty() {
        return 0.0;
    }
    let a = hist.r_mean(phi, scale);
    if a == 0.0 {
        return 0.0;
    }
    let bracket = if phi.delta() == 0.0 {
        1.0
    } else {
        let top = hist.max_value() / a;
        (1.0 + top.ln().max(0.0)).powf(phi.delta() / phi.r())
    };
    let mut lo = a;
    let mut hi = a * bracket;
    // Guards for float edge cases; mathematically the bracket always holds.
    let mut guard = 0;
    while hist.modular(phi, lo, scale) < 1.0 && guard < 60 {
        hi = lo;
        lo *= 0.5;
        guard += 1;
    }
    while hist.modular(phi, hi, scale) > 1.0 && guard < 120 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
    }
    let mut iters = 0;
    while hi - lo > 1e-12 * lo && iters < 200 {
        let mid = 0.5 * (lo + hi);
        if hist.modular(phi, mid, scale) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    0.5 * (lo + hi)
}

fn hist_of_cells(f: &GridFunction, cells: &CellBox) -> Hist {
    let mut vals = Vec::with_capacity(cells.count());
    cells.for_each(f.domain(), |i| vals.push(f.value(i)));
    vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    Hist::from_sorted_values(&vals)
}

/// cell_vol / |Q| for a cube of generation `gen`.
fn cube_scale(d: &Domain, gen: i32) -> f64 {
    exp2i(d.dim() as i32 * (d.cell_exp() - gen))
}

/// The Luxemburg average ‖f‖_{Φ,Q}: the λ with (1/|Q|)∫_Q Φ(f/λ) = 1,
/// to 1e−12 relative tolerance; 0 when f ≡ 0 on Q.
pub fn luxemburg_average(f: &GridFunction, cube: &DyadicCube, phi: &YoungPhi) -> Result<f64> {
    let cells = cells_of(f.domain(), cube)?;
    let hist = hist_of_cells(f, &cells);
    Ok(luxemburg_solve(&hist, cube_scale(f.domain(), cube.gen), phi))
}

/// Plain average (1/|Q|)∫_Q f.
pub fn cube_average(f: &GridFunction, cube: &DyadicCube) -> Result<f64> {
    let x = crate::geometry::integrate(f, cube)?;
    Ok(x / cube.volume(f.domain().dim()))
}

/// Per-generation assignment of cells to the cube of one grid that wholly
/// contains them. `None` marks cells cut by cube boundaries (only possible
/// on shifted grids).
struct GenAssignment {
    axis_cube: Vec<Vec<Option<i64>>>,
}

fn assign_cells(d: &Domain, grid: usize, gen: i32) -> Result<GenAssignment> {
    let shifts = shifted_grids(d.dim())?;
    let shift = shifts
        .get(grid)
        .copied()
        .ok_or_else(|| Error::BadParameter(format!("grid id {grid} out of range")))?;
    let span = gen - d.cell_exp();
    debug_assert!(span >= 0);
    let p = 1i64 << span;
    let n = d.cells_per_axis();
    let mut axis_cube = Vec::with_capacity(d.dim() as usize);
    for a in 0..d.dim() as usize {
        let sigma = shift.sigma(a, gen);
        let mut col = Vec::with_capacity(n);
        for c in 0..n as i64 {
            // Cell [3c, 3c+3) is whole in cube j iff
            // p(3j+σ) ≤ 3c and 3c+3 ≤ p(3j+σ+3).
            let j = (3 * c - sigma * p).div_euclid(3 * p);
            let lo = p * (3 * j + sigma);
            let whole = lo <= 3 * c && 3 * c + 3 <= lo + 3 * p;
            col.push(if whole { Some(j) } else { None });
        }
        axis_cube.push(col);
    }
    Ok(GenAssignment { axis_cube })
}

/// Visit each cube of one generation with the flat indices of its whole
/// cells. Buckets are independent, so visit order is free.
fn for_each_gen_bucket(
    d: &Domain,
    assign: &GenAssignment,
    mut visit: impl FnMut(&[i64; 3], &[u32]),
) {
    let n = d.cells_per_axis();
    let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    match d.dim() {
        1 => {
            for c0 in 0..n {
                if let Some(j0) = assign.axis_cube[0][c0] {
                    buckets.entry([j0, 0, 0]).or_default().push(c0 as u32);
                }
            }
        }
        2 => {
            for c0 in 0..n {
                let Some(j0) = assign.axis_cube[0][c0] else { continue };
                for c1 in 0..n {
                    if let Some(j1) = assign.axis_cube[1][c1] {
                        buckets.entry([j0, j1, 0]).or_default().push((c0 * n + c1) as u32);
                    }
                }
            }
        }
        3 => {
            for c0 in 0..n {
                let Some(j0) = assign.axis_cube[0][c0] else { continue };
                for c1 in 0..n {
                    let Some(j1) = assign.axis_cube[1][c1] else { continue };
                    for c2 in 0..n {
                        if let Some(j2) = assign.axis_cube[2][c2] {
                            buckets
                                .entry([j0, j1, j2])
                                .or_default()
                                .push(((c0 * n + c1) * n + c2) as u32);
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    for (coords, cells) in &buckets {
        visit(coords, cells);
    }
}

fn validate_gen_range(d: &Domain, range: (i32, i32)) -> Result<()> {
    if range.0 > range.1 {
        return Err(Error::EmptyGenRange);
    }
    if range.0 < d.cell_exp() {
        return Err(Error::CubeTooFine);
    }
    Ok(())
}

/// M_{Φ,D} f over one shifted grid: per cell, the supremum of Luxemburg
/// averages over the cubes of `grid` in `gen_range` wholly containing the
/// cell. One bucket pass per generation; each cube's modular is evaluated
/// on its value histogram.
pub fn dyadic_maximal(
    f: &GridFunction,
    phi: &YoungPhi,
    grid: usize,
    gen_range: Option<(i32, i32)>,
) -> Result<MaximalField> {
    let d = *f.domain();
    let range = gen_range.unwrap_or_else(|| d.default_gen_range());
    validate_gen_range(&d, range)?;
    let mut values = vec![0.0; d.n_cells()];
    for gen in range.0..=range.1 {
        let assign = assign_cells(&d, grid, gen)?;
        let scale = cube_scale(&d, gen);
        for_each_gen_bucket(&d, &assign, |_, cells| {
            let mut vals: Vec<f64> = cells.iter().map(|&i| f.value(i as usize)).collect();
            vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let hist = Hist::from_sorted_values(&vals);
            let v = luxemburg_solve(&hist, scale, phi);
            for &i in cells {
                let slot = &mut values[i as usize];
                if v > *slot {
                    *slot = v;
                }
            }
        });
    }
    Ok(MaximalField { domain: d, values, phi: *phi, grids: vec![grid], gen_range: range })
}

/// Same scan with a direct plain-average reducer; an independent closed-form
/// route for φ(t) = t used by identity checks against the bisection route.
pub fn linear_maximal_closed(
    f: &GridFunction,
    grid: usize,
    gen_range: Option<(i32, i32)>,
) -> Result<MaximalField> {
    let d = *f.domain();
    let range = gen_range.unwrap_or_else(|| d.default_gen_range());
    validate_gen_range(&d, range)?;
    let mut values = vec![0.0; d.n_cells()];
    for gen in range.0..=range.1 {
        let assign = assign_cells(&d, grid, gen)?;
        let scale = cube_scale(&d, gen);
        for_each_gen_bucket(&d, &assign, |_, cells| {
            let mut sorted: Vec<u32> = cells.to_vec();
            sorted.sort_unstable();
            let mut acc = NeumaierSum::new();
            for &i in &sorted {
                acc.add(f.value(i as usize));
            }
            let v = acc.total() * scale;
            for &i in cells {
                let slot = &mut values[i as usize];
                if v > *slot {
                    *slot = v;
                }
            }
        });
    }
    Ok(MaximalField {
        domain: d,
        values,
        phi: YoungPhi::linear(),
        grids: vec![grid],
        gen_range: range,
    })
}

/// The computable sandwich for the full maximal operator M_Φ:
/// lower = max over the 3^n shifted grids of M_{Φ,D^{(i)}} (every shifted
/// dyadic cube is a cube, so this bounds M_Φ from below), and
/// upper = 3^n · lower (the one-third covering corollary). Consumers pick
/// the side that keeps their inequality conservative.
pub fn full_maximal(
    f: &GridFunction,
    phi: &YoungPhi,
    gen_range: Option<(i32, i32)>,
) -> Result<(MaximalField, MaximalField)> {
    let d = *f.domain();
    let n_grids = d.n_grids();
    let mut lower = dyadic_maximal(f, phi, 0, gen_range)?;
    for grid in 1..n_grids {
        let next = dyadic_maximal(f, phi, grid, gen_range)?;
        for (slot, v) in lower.values.iter_mut().zip(next.values) {
            if v > *slot {
                *slot = v;
            }
        }
    }
    lower.grids = (0..n_grids).collect();
    let factor = n_grids as f64;
    let upper = MaximalField {
        domain: lower.domain,
        values: lower.values.iter().map(|&v| factor * v).collect(),
        phi: lower.phi,
        grids: lower.grids.clone(),
        gen_range: lower.gen_range,
    };
    Ok((lower, upper))
}

/// Brute-force oracle: enumerate every cube of the grid intersecting the box
/// and take the supremum directly. Intended for small domains.
pub fn naive_dyadic_maximal(
    f: &GridFunction,
    phi: &YoungPhi,
    grid: usize,
    gen_range: Option<(i32, i32)>,
) -> Result<MaximalField> {
    let d = *f.domain();
    let range = gen_range.unwrap_or_else(|| d.default_gen_range());
    validate_gen_range(&d, range)?;
    let shifts = shifted_grids(d.dim())?;
    let shift = shifts[grid];
    let mut values = vec![0.0; d.n_cells()];
    let n = d.cells_per_axis() as i64;
    let dim = d.dim() as usize;
    for gen in range.0..=range.1 {
        let p = 1i64 << (gen - d.cell_exp());
        let mut j_ranges = [(0i64, 0i64); 3];
        for (a, slot) in j_ranges.iter_mut().enumerate().take(dim) {
            let sigma = shift.sigma(a, gen);
            // generous bounds on cubes that can intersect the box
            let j_lo = (-sigma - 3) / 3 - 2;
            let j_hi = (3 * n / p - sigma) / 3 + 2;
            *slot = (j_lo, j_hi);
        }
        let mut coords = [0i64; 3];
        enumerate_cubes(&d, f, phi, grid, gen, dim, &j_ranges, &mut coords, 0, &mut values)?;
    }
    Ok(MaximalField { domain: d, values, phi: *phi, grids: vec![grid], gen_range: range })
}

#[allow(clippy::too_many_arguments)]
fn enumerate_cubes(
    d: &Domain,
    f: &GridFunction,
    phi: &YoungPhi,
    grid: usize,
    gen: i32,
    dim: usize,
    j_ranges: &[(i64, i64); 3],
    coords: &mut [i64; 3],
    axis: usize,
    values: &mut [f64],
) -> Result<()> {
    if axis == dim {
        let cube = DyadicCube::new(grid, gen, *coords);
        let cells = cells_of(d, &cube)?;
        if cells.is_empty() {
            return Ok(());
        }
        let v = luxemburg_average(f, &cube, phi)?;
        cells.for_each(d, |i| {
            if v > values[i] {
                values[i] = v;
            }
        });
        return Ok(());
    }
    for j in j_ranges[axis].0..=j_ranges[axis].1 {
        coords[axis] = j;
        enumerate_cubes(d, f, phi, grid, gen, dim, j_ranges, coords, axis + 1, values)?;
    }
    Ok(())
}
