//! Seeded generators for certified weight instances.
//!
//! Each instance is a triple (f, u, v) of grid functions together with the
//! A₁ constants of u and of v^r at the requested certification power.
//! Certifying at the largest r of a sweep covers the smaller ones:
//! avg_Q v^{r'} ≤ (avg_Q v^r)^{r'/r} gives [v^{r'}]_{A₁} ≤ [v^r]^{r'/r}.
//!
//! Instances are deterministic functions of (kind, spec, seed). Rejection
//! against the A₁ caps retries with a derived stream, so acceptance keeps
//! determinism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Domain, GridFunction};
use crate::weights::a1_constant;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    Constant,
    Step,
    Staircase,
    Spike,
    RandomBounded,
}

impl std::str::FromStr for InstanceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "constant" => InstanceKind::Constant,
            "step" => InstanceKind::Step,
            "staircase" => InstanceKind::Staircase,
            "spike" => InstanceKind::Spike,
            "random-bounded" => InstanceKind::RandomBounded,
            other => return Err(Error::BadParameter(format!("unknown instance kind '{other}'"))),
        })
    }
}

impl std::fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InstanceKind::Constant => "constant",
            InstanceKind::Step => "step",
            InstanceKind::Staircase => "staircase",
            InstanceKind::Spike => "spike",
            InstanceKind::RandomBounded => "random-bounded",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InstanceSpec {
    pub kind: InstanceKind,
    pub domain: Domain,
    /// Cap enforced on [u]_{A₁} and on [v^r_cert]_{A₁} by rejection.
    pub a1_cap: f64,
    /// Power at which v is certified.
    pub r_cert: f64,
    pub max_attempts: u32,
}

impl InstanceSpec {
    pub fn new(kind: InstanceKind, domain: Domain) -> Self {
        InstanceSpec { kind, domain, a1_cap: 10.0, r_cert: 2.0, max_attempts: 64 }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub kind: InstanceKind,
    pub seed: u64,
    pub f: GridFunction,
    pub u: GridFunction,
    pub v: GridFunction,
    pub a1_u: f64,
    pub a1_v: f64,
    /// [v^r]_{A₁} at the certification power of the spec.
    pub a1_vr: f64,
}

impl Instance {
    /// The same functions on a finer grid. Averages over the surviving
    /// cubes are unchanged, so the certificates remain exact.
    pub fn refine(&self, levels: u32) -> Result<Instance> {
        Ok(Instance {
            kind: self.kind,
            seed: self.seed,
            f: self.f.refine(levels)?,
            u: self.u.refine(levels)?,
            v: self.v.refine(levels)?,
            a1_u: self.a1_u,
            a1_v: self.a1_v,
            a1_vr: self.a1_vr,
        })
    }
}

fn splitmix(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bounded nonnegative f with a zero fraction; shared by every kind.
fn gen_f(d: &Domain, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
    let vals: Vec<f64> = (0..d.n_cells())
        .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.0..4.0) })
        .collect();
    GridFunction::new(*d, vals)
}

/// 1 plus a jump on a random dyadic sub-box.
fn gen_step(d: &Domain, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
    let n = d.cells_per_axis();
    let levels_down = rng.gen_range(1..=(d.box_exp() - d.cell_exp()).min(3)) as u32;
    let width = n >> levels_down;
    let jump = rng.gen_range(1.2..2.5);
    let mut lo = [0usize; 3];
    for slot in lo.iter_mut().take(d.dim() as usize) {
        *slot = rng.gen_range(0..=(n / width - 1)) * width;
    }
    let mut vals = vec![1.0; d.n_cells()];
    for (flat, slot) in vals.iter_mut().enumerate() {
        let c = d.cell_coords(flat);
        let inside =
            (0..d.dim() as usize).all(|a| c[a] >= lo[a] && c[a] < lo[a] + width);
        if inside {
            *slot = jump;
        }
    }
    GridFunction::new(*d, vals)
}

/// Geometric levels ρ^j on nested shells toward the origin corner.
fn gen_staircase(d: &Domain, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
    let levels = (d.box_exp() - d.cell_exp()) as u32;
    let rho: f64 = rng.gen_range(1.1..1.8);
    let mut vals = vec![0.0; d.n_cells()];
    for (flat, slot) in vals.iter_mut().enumerate() {
        let c = d.cell_coords(flat);
        let m = (0..d.dim() as usize).map(|a| c[a]).max().unwrap_or(0);
        // shell index: 0 on the outer half, growing toward the corner
        let depth = if m == 0 {
            levels
        } else {
            levels - 1 - (usize::BITS - 1 - m.leading_zeros())
        };
        *slot = rho.powi(depth.min(6) as i32);
    }
    GridFunction::new(*d, vals)
}

/// 1 plus a tall narrow bump on one cell block.
fn gen_spike(d: &Domain, rng: &mut ChaCha8Rng, cap: f64) -> Result<GridFunction> {
    let n = d.cells_per_axis();
    let two_n = (1u32 << d.dim()) as f64;
    let height = rng.gen_range(1.0..(two_n * (cap - 1.0) * 0.8).max(1.5));
    let mut lo = [0usize; 3];
    for slot in lo.iter_mut().take(d.dim() as usize) {
        *slot = rng.gen_range(0..n);
    }
    let mut vals = vec![1.0; d.n_cells()];
    for (flat, slot) in vals.iter_mut().enumerate() {
        let c = d.cell_coords(flat);
        if (0..d.dim() as usize).all(|a| c[a] == lo[a]) {
            *slot = 1.0 + height;
        }
    }
    GridFunction::new(*d, vals)
}

/// iid cells in a band [lo, 1] chosen to keep the A₁ constants moderate.
fn gen_random_bounded(d: &Domain, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
    let lo = rng.gen_range(0.45..0.8);
    let vals: Vec<f64> = (0..d.n_cells()).map(|_| rng.gen_range(lo..1.0)).collect();
    GridFunction::new(*d, vals)
}

/// Build (f, u, v) for `spec`, rejecting draws whose certified constants
/// exceed the cap.
pub fn gen_instance(spec: &InstanceSpec, seed: u64) -> Result<Instance> {
    let d = &spec.domain;
    for attempt in 0..spec.max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed, attempt as u64));
        let f = gen_f(d, &mut rng)?;
        let (u, v) = match spec.kind {
            InstanceKind::Constant => {
                (GridFunction::constant(*d, 1.0)?, GridFunction::constant(*d, 1.0)?)
            }
            InstanceKind::Step => {
                let v = gen_step(d, &mut rng)?;
                let u = if rng.gen_bool(0.5) {
                    GridFunction::constant(*d, 1.0)?
                } else {
                    gen_step(d, &mut rng)?
                };
                (u, v)
            }
            InstanceKind::Staircase => {
                let v = gen_staircase(d, &mut rng)?;
                let u = if rng.gen_bool(0.5) {
                    GridFunction::constant(*d, 1.0)?
                } else {
                    gen_step(d, &mut rng)?
                };
                (u, v)
            }
            InstanceKind::Spike => {
                let u = gen_spike(d, &mut rng, spec.a1_cap)?;
                let v = if rng.gen_bool(0.5) {
                    GridFunction::constant(*d, 1.0)?
                } else {
                    gen_step(d, &mut rng)?
                };
                (u, v)
            }
            InstanceKind::RandomBounded => {
                (gen_random_bounded(d, &mut rng)?, gen_random_bounded(d, &mut rng)?)
            }
        };
        let a1_u = a1_constant(&u, &[0])?.constant;
        let a1_v = a1_constant(&v, &[0])?.constant;
        let vr = v.map(|x| x.powf(spec.r_cert))?;
        let a1_vr = a1_constant(&vr, &[0])?.constant;
        if a1_u <= spec.a1_cap && a1_vr <= spec.a1_cap {
            return Ok(Instance { kind: spec.kind, seed, f, u, v, a1_u, a1_v, a1_vr });
        }
    }
    Err(Error::GeneratorExhausted { attempts: spec.max_attempts })
}

/// Uncapped two-level weight with a huge jump; [v^r]_{A₁} is far beyond any
/// A₁ cap, the regime the conjecture-mode sweeps explore.
pub fn gen_singular_v(d: &Domain, seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed, 0xabcd));
    let jump = rng.gen_range(5e2..5e3);
    let n = d.cells_per_axis();
    let mut vals = vec![1.0; d.n_cells()];
    for (flat, slot) in vals.iter_mut().enumerate() {
        let c = d.cell_coords(flat);
        if (0..d.dim() as usize).all(|a| c[a] >= n / 2) {
            *slot = jump;
        }
    }
    GridFunction::new(*d, vals)
}
