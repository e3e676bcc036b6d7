//! Level-set decompositions and the principal-cube selection.
//!
//! * Calderón–Zygmund cubes: the maximal dyadic cubes tiling
//!   {M_{φ,D} f > λ}, each with Luxemburg average above λ and parent at or
//!   below λ.
//! * Ω_k = {M_D v > a^k} ∩ {M_{Φ,D} g > a^k} decomposed by intersecting the
//!   two CZ families (the smaller cube of each intersecting pair wins).
//! * The Γ flag: cubes meeting {v ≤ a^{k+1}} in at least one cell, for which
//!   the two-sided average chain a^k/[v] ≤ inf v ≤ avg v ≤ [v] a^{k+1} holds.
//! * The principal forest: the μ-weighted doubling recursion selecting
//!   G₀ ⊇ G₁ ⊇ … inside the Γ pairs, and the average-growth audits of the
//!   truncated weights v_k = min(v^r, b_{k+1}).

use serde::Serialize;

use crate::geometry::{cells_of, integrate, Domain, DyadicCube, GridFunction};
use crate::ksum::NeumaierSum;
use crate::orlicz::{dyadic_maximal, luxemburg_average, MaximalField};
use crate::weights::{bk_value, truncate, AInfParams, Check};
use crate::young::YoungPhi;
use crate::{Error, Result};

/// Maximal dyadic cubes of one grid tiling {M_{φ,D} f > λ}.
#[derive(Debug, Clone)]
pub struct CZDecomposition {
    pub lambda: f64,
    pub phi: YoungPhi,
    pub grid: usize,
    pub cubes: Vec<DyadicCube>,
    pub mask: Vec<bool>,
}

impl CZDecomposition {
    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// True when every cube lies wholly inside the domain box.
    pub fn is_inbox(&self, d: &Domain) -> Result<bool> {
        let n3 = 3 * d.cells_per_axis() as i64;
        for cube in &self.cubes {
            let ext = cube.extent3(d)?;
            for a in 0..d.dim() as usize {
                if ext[a].0 < 0 || ext[a].1 > n3 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// The cube of `grid` at generation `gen` containing the whole box, if any.
/// Exists for every grid once gen ≥ box_exp + 2.
pub fn box_containing_cube(d: &Domain, grid: usize, gen: i32) -> Result<Option<DyadicCube>> {
    let shifts = crate::geometry::shifted_grids(d.dim())?;
    let shift = shifts
        .get(grid)
        .copied()
        .ok_or_else(|| Error::BadParameter(format!("grid id {grid} out of range")))?;
    let span = gen - d.cell_exp();
    if span < 0 {
        return Ok(None);
    }
    if span > 58 {
        return Err(Error::BadParameter(format!("generation {gen} too coarse")));
    }
    let p = 1i64 << span;
    let n3 = 3 * d.cells_per_axis() as i64;
    let mut coords = [0i64; 3];
    for a in 0..d.dim() as usize {
        let sigma = shift.sigma(a, gen);
        // want p(3j+σ) ≤ 0 < 3n ≤ p(3j+σ+3)
        let j = (-sigma * p).div_euclid(3 * p);
        let lo = p * (3 * j + sigma);
        if !(lo <= 0 && n3 <= lo + 3 * p) {
            return Ok(None);
        }
        coords[a] = j;
    }
    Ok(Some(DyadicCube::new(grid, gen, coords)))
}

/// Calderón–Zygmund scan: top-down from a coarse ancestor whose average is
/// already ≤ λ, emitting each cube the first time its Luxemburg average
/// exceeds λ. Emitted cubes are disjoint, maximal, and tile the level set.
pub fn cz_cubes(
    f: &GridFunction,
    phi: &YoungPhi,
    grid: usize,
    lambda: f64,
) -> Result<CZDecomposition> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::BadParameter(format!("lambda must be > 0, got {lambda}")));
    }
    let d = *f.domain();
    let mut g_top = d.box_exp() + 2;
    let top = loop {
        let top = box_containing_cube(&d, grid, g_top)?
            .ok_or_else(|| Error::BadParameter("no box-containing cube".into()))?;
        if luxemburg_average(f, &top, phi)? <= lambda {
            break top;
        }
        g_top += 1;
        if g_top - d.cell_exp() > 58 {
            return Err(Error::BadParameter(format!(
                "lambda {lambda} too small: level set needs cubes beyond the integer layout"
            )));
        }
    };
    let mut cubes = Vec::new();
    let mut stack = vec![top];
    while let Some(q) = stack.pop() {
        for child in q.children(d.dim())? {
            if cells_of(&d, &child)?.is_empty() {
                continue;
            }
            if luxemburg_average(f, &child, phi)? > lambda {
                cubes.push(child);
            } else if child.gen > d.cell_exp() {
                stack.push(child);
            }
        }
    }
    // deterministic order: coarse to fine, then coordinates
    cubes.sort_by_key(|c| (std::cmp::Reverse(c.gen), c.coords));
    let mut mask = vec![false; d.n_cells()];
    for cube in &cubes {
        cells_of(&d, cube)?.for_each(&d, |i| mask[i] = true);
    }
    Ok(CZDecomposition { lambda, phi: *phi, grid, cubes, mask })
}

/// One cube of an Ω_k decomposition.
#[derive(Debug, Clone, Copy)]
pub struct OmegaCube {
    pub cube: DyadicCube,
    /// Emitted from the M_{Φ,D} g family (S-side) rather than the M_D v side.
    pub from_g_side: bool,
    /// Γ membership: the cube meets {v ≤ a^{k+1}} in at least one cell.
    pub gamma: bool,
}

/// Ω_k = {M_D v > a^k} ∩ {M_{Φ,D} g > a^k} as disjoint maximal cubes.
#[derive(Debug, Clone)]
pub struct OmegaFamily {
    pub k: i32,
    pub a: f64,
    pub grid: usize,
    pub cubes: Vec<OmegaCube>,
    pub mask: Vec<bool>,
}

/// Intersect the two CZ families at level a^k: for every intersecting pair
/// (R from v, S from g) keep S when S ⊊ R and R otherwise.
pub fn omega_decomposition(
    v: &GridFunction,
    g: &GridFunction,
    phi: &YoungPhi,
    a: f64,
    k: i32,
    grid: usize,
) -> Result<OmegaFamily> {
    if !(a.is_finite() && a > 1.0) {
        return Err(Error::BadParameter(format!("level base must satisfy a > 1, got {a}")));
    }
    let d = *v.domain();
    let level = a.powi(k);
    let r_fam = cz_cubes(v, &YoungPhi::linear(), grid, level)?;
    let s_fam = cz_cubes(g, phi, grid, level)?;
    let mut cubes = Vec::new();
    for r in &r_fam.cubes {
        for s in &s_fam.cubes {
            if !r.intersects(s, &d)? {
                continue;
            }
            // keep S when S ⊊ R, otherwise R (intersecting cubes are nested)
            let (cube, from_g_side) =
                if r.contains_strictly(s, &d)? { (*s, true) } else { (*r, false) };
            cubes.push(OmegaCube { cube, from_g_side, gamma: false });
        }
    }
    cubes.sort_by_key(|c| (std::cmp::Reverse(c.cube.gen), c.cube.coords));
    let mut mask = vec![false; d.n_cells()];
    for oc in &cubes {
        cells_of(&d, &oc.cube)?.for_each(&d, |i| {
            debug_assert!(!mask[i], "Ω cubes must be disjoint");
            mask[i] = true;
        });
    }
    // the union must be the cellwise AND of the two level sets
    debug_assert!(mask
        .iter()
        .zip(r_fam.mask.iter().zip(&s_fam.mask))
        .all(|(&q, (&r, &s))| q == (r && s)));
    Ok(OmegaFamily { k, a, grid, cubes, mask })
}

/// Flag the Γ cubes: those with at least one cell where v ≤ a^{k+1}.
pub fn gamma_set(fam: &OmegaFamily, v: &GridFunction) -> Result<OmegaFamily> {
    let d = v.domain();
    let cap = fam.a.powi(fam.k + 1);
    let mut out = fam.clone();
    for oc in &mut out.cubes {
        let mut hit = false;
        cells_of(d, &oc.cube)?.for_each(d, |i| {
            if v.value(i) <= cap {
                hit = true;
            }
        });
        oc.gamma = hit;
    }
    Ok(out)
}

/// The floor a^k/[v]_{A₁} ≤ inf_Q v that every Ω_k cube inherits from its
/// level set (M_D v > a^k on the cube and M_D v ≤ [v]_{A₁} v cellwise).
pub fn omega_v_floor_checks(
    fam: &OmegaFamily,
    v: &GridFunction,
    a1_v: f64,
    mdv: &MaximalField,
) -> Result<Vec<Check>> {
    let d = v.domain();
    let level = fam.a.powi(fam.k);
    let mut out = Vec::new();
    for oc in &fam.cubes {
        let mut inf_v = f64::INFINITY;
        let mut inf_m = f64::INFINITY;
        cells_of(d, &oc.cube)?.for_each(d, |i| {
            inf_v = inf_v.min(v.value(i));
            inf_m = inf_m.min(mdv.value(i));
        });
        let label = oc.cube.label(d.dim());
        out.push(Check::le(
            "omega_level_below_mdv",
            level,
            inf_m,
            Some(label.clone()),
        ));
        out.push(Check::le("omega_v_floor", level / a1_v, inf_v, Some(label)));
    }
    Ok(out)
}

/// The full two-sided chain on Γ cubes:
/// a^k ≤ inf M_D v, inf M_D v ≤ [v] inf v, inf v ≤ avg v ≤ [v] inf v,
/// and inf v ≤ a^{k+1}.
pub fn gamma_chain_checks(
    fam: &OmegaFamily,
    v: &GridFunction,
    a1_v: f64,
    mdv: &MaximalField,
) -> Result<Vec<Check>> {
    let d = v.domain();
    let level = fam.a.powi(fam.k);
    let cap = fam.a.powi(fam.k + 1);
    let mut out = Vec::new();
    for oc in fam.cubes.iter().filter(|c| c.gamma) {
        let cells = cells_of(d, &oc.cube)?;
        let mut inf_v = f64::INFINITY;
        let mut inf_m = f64::INFINITY;
        let mut acc = NeumaierSum::new();
        let mut count = 0u64;
        cells.for_each(d, |i| {
            inf_v = inf_v.min(v.value(i));
            inf_m = inf_m.min(mdv.value(i));
            acc.add(v.value(i));
            count += 1;
        });
        let avg_covered = acc.total() / count as f64;
        // |Q|-normalized average (dilutes when the cube sticks out of the box)
        let avg_q = acc.total() * d.cell_vol() / oc.cube.volume(d.dim());
        let label = oc.cube.label(d.dim());
        out.push(Check::le("gamma_level_below_mdv", level, inf_m, Some(label.clone())));
        out.push(Check::le("gamma_mdv_controls_v", inf_m, a1_v * inf_v, Some(label.clone())));
        out.push(Check::le("gamma_inf_below_avg", inf_v, avg_covered, Some(label.clone())));
        out.push(Check::le("gamma_avg_below_a1_inf", avg_q, a1_v * inf_v, Some(label.clone())));
        out.push(Check::le("gamma_inf_below_cap", inf_v, cap, Some(label)));
    }
    Ok(out)
}

fn cube_inside_box(d: &Domain, cube: &DyadicCube) -> Result<bool> {
    let ext = cube.extent3(d)?;
    let n3 = 3 * d.cells_per_axis() as i64;
    Ok((0..d.dim() as usize).all(|a| ext[a].0 >= 0 && ext[a].1 <= n3))
}

/// Average growth of the truncated weight v_k = min(v^r, b_{k+1}) over the
/// cubes of an Ω_ℓ family with ℓ ≥ k:
/// b_k/[v]_{A₁}^r ≤ avg_Q v_k ≤ b_{k+1}.
/// Cubes not wholly inside the box are reported as skipped: the zero
/// extension outside the support dilutes their normalized averages.
pub fn lemma23_check(
    fam: &OmegaFamily,
    v: &GridFunction,
    phi: &YoungPhi,
    k: i32,
    a1_v: f64,
) -> Result<Vec<Check>> {
    if k > fam.k {
        return Err(Error::BadParameter(format!(
            "truncation level k={k} must not exceed the family level {}",
            fam.k
        )));
    }
    let d = v.domain();
    let b_k = bk_value(fam.a, phi, k);
    let b_k1 = bk_value(fam.a, phi, k + 1);
    let vk = truncate(v, phi.r(), b_k1)?;
    let lower = b_k / a1_v.powf(phi.r());
    let mut out = Vec::new();
    for oc in &fam.cubes {
        let label = oc.cube.label(d.dim());
        if !cube_inside_box(d, &oc.cube)? {
            out.push(Check {
                name: "lemma23_skipped_outside_box".into(),
                lhs: 0.0,
                rhs: 0.0,
                slack: 0.0,
                witness: Some(label),
                pass: true,
            });
            continue;
        }
        let avg = integrate(&vk, &oc.cube)? / oc.cube.volume(d.dim());
        out.push(Check::le("lemma23_lower", lower, avg, Some(label.clone())));
        out.push(Check::le("lemma23_upper", avg, b_k1, Some(label)));
    }
    Ok(out)
}

/// Certified per-instance context for the v-side audits.
#[derive(Debug, Clone)]
pub struct WeightContext {
    pub grid: usize,
    pub a1_v: f64,
    pub a1_vr: f64,
    pub ainf_vr: AInfParams,
    pub mdv: MaximalField,
}

impl WeightContext {
    pub fn new(v: &GridFunction, phi: &YoungPhi, grid: usize, ainf_budget: usize) -> Result<Self> {
        let a1_v = crate::weights::a1_constant(v, &[grid])?.constant;
        let vr = v.map(|x| x.powf(phi.r()))?;
        let a1_vr = crate::weights::a1_constant(&vr, &[grid])?.constant;
        let ainf_vr = crate::weights::ainf_params(&vr, &[grid], ainf_budget)?;
        let mdv = dyadic_maximal(v, &YoungPhi::linear(), grid, None)?;
        Ok(WeightContext { grid, a1_v, a1_vr, ainf_vr, mdv })
    }
}

/// The decay estimate for truncated-weight mass on maximal-function level
/// sets: with E = Q ∩ {M_D v > a^k} and (t, ·) the Γ level of Q,
/// v_t(E) ≤ C · v_t(Q) · a^{(t−k) r η}, η = 1/(p′(1−ε)).
///
/// The constant is assembled from the proof chain (Hölder with exponent p,
/// the level-set bound for v^r, the Γ chain, and the b_k ratio bounds):
/// C = C₀^{1/p′} · Φ(a) · [v]^r · ([v]^{2r} [v^r] a^r)^η.
#[allow(clippy::too_many_arguments)]
pub fn lemma24_check(
    q: &DyadicCube,
    t: i32,
    v: &GridFunction,
    phi: &YoungPhi,
    a: f64,
    k: i32,
    ctx: &WeightContext,
    p_choice: Option<f64>,
) -> Result<Check> {
    let eps = ctx.ainf_vr.eps;
    let p = p_choice.unwrap_or(2.0 / eps);
    if p <= 1.0 / eps {
        return Err(Error::BadParameter(format!("p={p} must exceed 1/ε={}", 1.0 / eps)));
    }
    let d = v.domain();
    if !cube_inside_box(d, q)? {
        return Ok(Check {
            name: "lemma24_skipped_outside_box".into(),
            lhs: 0.0,
            rhs: 0.0,
            slack: 0.0,
            witness: Some(q.label(d.dim())),
            pass: true,
        });
    }
    let p_dual = p / (p - 1.0);
    let eta = 1.0 / (p_dual * (1.0 - eps));
    debug_assert!(eta > 1.0);
    let b_t1 = bk_value(a, phi, t + 1);
    let vt = truncate(v, phi.r(), b_t1)?;
    let level = a.powi(k);
    let cells = cells_of(d, q)?;
    let mut mass_e = NeumaierSum::new();
    let mut mass_q = NeumaierSum::new();
    cells.for_each(d, |i| {
        mass_q.add(vt.value(i));
        if ctx.mdv.value(i) > level {
            mass_e.add(vt.value(i));
        }
    });
    let cell_vol = d.cell_vol();
    let lhs = mass_e.total() * cell_vol;
    let vt_q = mass_q.total() * cell_vol;
    let r = phi.r();
    let c = ctx.ainf_vr.c0.powf(1.0 / p_dual)
        * phi.eval(a)
        * ctx.a1_v.powf(r)
        * (ctx.a1_v.powf(2.0 * r) * ctx.a1_vr * a.powf(r)).powf(eta);
    let rhs = c * vt_q * a.powf((t - k) as f64 * r * eta);
    Ok(Check::le(
        "lemma24_decay",
        lhs,
        rhs,
        Some(format!("cube {} t={t} k={k}", q.label(d.dim()))),
    ))
}

/// One Γ_N pair: an Ω_k cube carrying its level and u-average.
#[derive(Debug, Clone)]
pub struct GammaPair {
    pub k: i32,
    pub cube: DyadicCube,
    pub from_g_side: bool,
    pub avg_u: f64,
}

/// The principal-cube forest built over the Γ_N pairs.
#[derive(Debug, Clone)]
pub struct PrincipalForest {
    pub n_cutoff: i32,
    pub a: f64,
    pub alpha: f64,
    pub phi: YoungPhi,
    pub pairs: Vec<GammaPair>,
    /// G_n membership level; None = not principal.
    pub level: Vec<Option<u32>>,
    pub parent: Vec<Option<usize>>,
    pub mu: Vec<f64>,
    /// Pair indices per level G_0, G_1, …
    pub levels: Vec<Vec<usize>>,
}

impl PrincipalForest {
    pub fn is_principal(&self, idx: usize) -> bool {
        self.level[idx].is_some()
    }

    pub fn principal_indices(&self) -> Vec<usize> {
        (0..self.pairs.len()).filter(|&i| self.is_principal(i)).collect()
    }
}

/// The growth threshold in conditions of the μ-recursion: a pair at level k
/// joins under an ancestor at level t only if
/// avg_u(child) > a^{(k−t)αr} (b_t/b_k) avg_u(ancestor).
fn growth_threshold(a: f64, alpha: f64, phi: &YoungPhi, k: i32, t: i32, avg_parent: f64) -> f64 {
    let r = phi.r();
    a.powf((k - t) as f64 * alpha * r) * (bk_value(a, phi, t) / bk_value(a, phi, k)) * avg_parent
}

/// Build the forest: G₀ = inclusion-maximal pairs of Δ_N; a pair joins
/// G_{n+1} under a G_n ancestor when it is the first descendant whose
/// μ-weighted average strictly exceeds the ancestor's, every intermediate
/// Γ_N pair staying at or below the scaled threshold.
pub fn principal_forest(
    families: &[OmegaFamily],
    u: &GridFunction,
    phi: &YoungPhi,
    a: f64,
    alpha: f64,
    n_cutoff: i32,
) -> Result<PrincipalForest> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(Error::BadParameter(format!("alpha must exceed 1, got {alpha}")));
    }
    let d = u.domain();
    let dim = d.dim();
    let mut pairs = Vec::new();
    for fam in families {
        if fam.k < n_cutoff {
            continue;
        }
        for oc in fam.cubes.iter().filter(|c| c.gamma) {
            let avg_u = integrate(u, &oc.cube)? / oc.cube.volume(dim);
            pairs.push(GammaPair {
                k: fam.k,
                cube: oc.cube,
                from_g_side: oc.from_g_side,
                avg_u,
            });
        }
    }
    pairs.sort_by_key(|p| (std::cmp::Reverse(p.cube.gen), p.cube.coords, p.k));

    let n = pairs.len();
    let strictly_inside = |i: usize, j: usize| -> Result<bool> {
        pairs[j].cube.contains_strictly(&pairs[i].cube, d)
    };
    let inside = |i: usize, j: usize| -> Result<bool> { pairs[j].cube.contains(&pairs[i].cube, d) };

    let mut level: Vec<Option<u32>> = vec![None; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut levels: Vec<Vec<usize>> = Vec::new();

    // G0: inclusion-maximal cubes
    let mut g0 = Vec::new();
    for i in 0..n {
        let mut maximal = true;
        for j in 0..n {
            if i != j && strictly_inside(i, j)? {
                maximal = false;
                break;
            }
        }
        if maximal {
            level[i] = Some(0);
            g0.push(i);
        }
    }
    levels.push(g0);

    loop {
        let current = levels.last().unwrap().clone();
        if current.is_empty() {
            levels.pop();
            break;
        }
        let next_level = levels.len() as u32;
        let mut next = Vec::new();
        for i in 0..n {
            if level[i].is_some() {
                continue;
            }
            let mut chosen: Option<usize> = None;
            for &p in &current {
                if !strictly_inside(i, p)? {
                    continue;
                }
                // growth condition against the ancestor
                let thr = growth_threshold(a, alpha, phi, pairs[i].k, pairs[p].k, pairs[p].avg_u);
                if pairs[i].avg_u <= thr {
                    continue;
                }
                // every intermediate Γ_N pair must stay at or below its own
                // scaled threshold
                let mut first = true;
                for q in 0..n {
                    if q == i || !strictly_inside(i, q)? || !inside(q, p)? {
                        continue;
                    }
                    let thr_q =
                        growth_threshold(a, alpha, phi, pairs[q].k, pairs[p].k, pairs[p].avg_u);
                    if pairs[q].avg_u > thr_q {
                        first = false;
                        break;
                    }
                }
                if first {
                    debug_assert!(chosen.is_none(), "principal parent must be unique");
                    if chosen.is_none() {
                        chosen = Some(p);
                    }
                }
            }
            if let Some(p) = chosen {
                level[i] = Some(next_level);
                parent[i] = Some(p);
                next.push(i);
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }

    let r = phi.r();
    let mu = pairs
        .iter()
        .map(|p| bk_value(a, phi, p.k) / a.powf(alpha * r * p.k as f64) * p.avg_u)
        .collect();
    Ok(PrincipalForest { n_cutoff, a, alpha, phi: *phi, pairs, level, parent, mu, levels })
}

/// Re-evaluate the forest conditions on the built structure.
pub fn forest_checks(forest: &PrincipalForest, d: &Domain) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let pairs = &forest.pairs;
    if forest.levels.is_empty() {
        return Ok(out);
    }
    // G0 maximality
    for &i in &forest.levels[0] {
        let mut container = None;
        for (j, q) in pairs.iter().enumerate() {
            if j != i && q.cube.contains_strictly(&pairs[i].cube, d)? {
                container = Some(j);
                break;
            }
        }
        out.push(Check {
            name: "forest_g0_maximal".into(),
            lhs: container.map_or(0.0, |_| 1.0),
            rhs: 0.0,
            slack: 0.0,
            witness: Some(pairs[i].cube.label(d.dim())),
            pass: container.is_none(),
        });
    }
    // growth condition and first-descendant property per assigned parent
    for i in 0..pairs.len() {
        let Some(p) = forest.parent[i] else { continue };
        let thr = growth_threshold(
            forest.a,
            forest.alpha,
            &forest.phi,
            pairs[i].k,
            pairs[p].k,
            pairs[p].avg_u,
        );
        out.push(Check {
            name: "forest_growth".into(),
            lhs: thr,
            rhs: pairs[i].avg_u,
            slack: pairs[i].avg_u - thr,
            witness: Some(pairs[i].cube.label(d.dim())),
            pass: pairs[i].avg_u > thr,
        });
        // μ comparison is the same inequality in scaled form
        out.push(Check {
            name: "forest_mu_increases".into(),
            lhs: forest.mu[p],
            rhs: forest.mu[i],
            slack: forest.mu[i] - forest.mu[p],
            witness: Some(pairs[i].cube.label(d.dim())),
            pass: forest.mu[i] > forest.mu[p] * (1.0 - 1e-12),
        });
        for q in 0..pairs.len() {
            if q == i
                || !pairs[q].cube.contains_strictly(&pairs[i].cube, d)?
                || !pairs[p].cube.contains(&pairs[q].cube, d)?
            {
                continue;
            }
            let thr_q = growth_threshold(
                forest.a,
                forest.alpha,
                &forest.phi,
                pairs[q].k,
                pairs[p].k,
                pairs[p].avg_u,
            );
            out.push(Check::le(
                "forest_intermediate_flat",
                pairs[q].avg_u,
                thr_q,
                Some(pairs[q].cube.label(d.dim())),
            ));
        }
    }
    Ok(out)
}

/// Nesting of the decompositions: every Ω_k cube (k > t) sits inside some
/// Ω_t cube.
pub fn omega_nesting_checks(
    fine: &OmegaFamily,
    coarse: &OmegaFamily,
    d: &Domain,
) -> Result<Vec<Check>> {
    debug_assert!(fine.k > coarse.k);
    let mut out = Vec::new();
    for oc in &fine.cubes {
        let mut container = false;
        for cc in &coarse.cubes {
            if cc.cube.contains(&oc.cube, d)? {
                container = true;
                break;
            }
        }
        out.push(Check {
            name: "omega_nesting".into(),
            lhs: if container { 0.0 } else { 1.0 },
            rhs: 0.0,
            slack: 0.0,
            witness: Some(oc.cube.label(d.dim())),
            pass: container,
        });
    }
    Ok(out)
}

/// Levels [n..=k_max] of Ω decompositions with Γ flags.
#[derive(Debug, Clone)]
pub struct OmegaLevels {
    pub n: i32,
    pub k_max: i32,
    pub families: Vec<OmegaFamily>,
}

impl OmegaLevels {
    pub fn family(&self, k: i32) -> Option<&OmegaFamily> {
        if k < self.n || k > self.k_max {
            return None;
        }
        self.families.get((k - self.n) as usize)
    }
}

/// The level range on which the Ω machinery is faithful on a bounded box:
/// from the stabilization level (both CZ families stay inside the box; below
/// it only box-straddling ancestors appear and the in-box structure is
/// frozen) up to the last nonempty level.
pub fn stable_level_range(
    v: &GridFunction,
    g: &GridFunction,
    phi: &YoungPhi,
    a: f64,
    grid: usize,
) -> Result<(i32, i32)> {
    let d = v.domain();
    // k_max: last k with Ω_k nonempty, from the two maximal fields
    let mdv = dyadic_maximal(v, &YoungPhi::linear(), grid, None)?;
    let mg = dyadic_maximal(g, phi, grid, None)?;
    let mut top = 0.0f64;
    for i in 0..d.n_cells() {
        top = top.max(mdv.value(i).min(mg.value(i)));
    }
    if top <= 0.0 {
        return Ok((0, -1)); // empty range
    }
    let mut k_max = top.log(a).floor() as i32 + 1;
    while a.powi(k_max) >= top && k_max > -200 {
        k_max -= 1;
    }
    // n: first k where both CZ runs stay inside the box. In-box-ness is
    // monotone in the level (higher levels give smaller cubes).
    let inbox_at = |k: i32| -> Result<bool> {
        let lvl = a.powi(k);
        Ok(cz_cubes(v, &YoungPhi::linear(), grid, lvl)?.is_inbox(d)?
            && cz_cubes(g, phi, grid, lvl)?.is_inbox(d)?)
    };
    let mut n = k_max.min(0);
    if inbox_at(n)? {
        while n > -200 && inbox_at(n - 1)? {
            n -= 1;
        }
    } else {
        while n <= k_max && !inbox_at(n)? {
            n += 1;
        }
    }
    Ok((n, k_max))
}

/// Build the flagged Ω families over [n..=k_max].
pub fn build_omega_levels(
    v: &GridFunction,
    g: &GridFunction,
    phi: &YoungPhi,
    a: f64,
    grid: usize,
    range: Option<(i32, i32)>,
) -> Result<OmegaLevels> {
    let (n, k_max) = match range {
        Some(r) => r,
        None => stable_level_range(v, g, phi, a, grid)?,
    };
    let mut families = Vec::new();
    for k in n..=k_max {
        let fam = omega_decomposition(v, g, phi, a, k, grid)?;
        families.push(gamma_set(&fam, v)?);
    }
    Ok(OmegaLevels { n, k_max, families })
}

/// Default level base: a = 2^n + 1 for δ = 0, and max(2^n, L) + 1 with
/// L = (δ/β)^{δ/(r(α−1)−β)}, β = r(α−1)/2 when δ > 0.
pub fn default_level_base(phi: &YoungPhi, dim: u8, alpha: f64) -> f64 {
    let two_n = (1u32 << dim) as f64;
    if phi.delta() == 0.0 {
        return two_n + 1.0;
    }
    let beta = phi.r() * (alpha - 1.0) / 2.0;
    let l = (phi.delta() / beta).powf(phi.delta() / (phi.r() * (alpha - 1.0) - beta));
    two_n.max(l) + 1.0
}

/// Serializable audit report wrapper.
#[derive(Debug, Serialize)]
pub struct AuditReport {
    pub schema: String,
    pub kind: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl AuditReport {
    pub fn new(kind: impl Into<String>, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        AuditReport { schema: "omlab/1".into(), kind: kind.into(), checks, pass }
    }
}
